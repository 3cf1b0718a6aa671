use std::io::Write;

use super::{CombinationSummary, ReplicationSummary};

/// Column order of the flat summary table.
pub const TSV_COLUMNS: [&str; 14] = [
    "scenario",
    "kind",
    "strategy",
    "successful",
    "failed",
    "mean",
    "variance",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "rvr_vs_mc_mc",
    "rvr_std_error",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One row per estimator kind × strategy; missing values are `NA`.
pub fn write_tsv<W: Write>(summary: &ReplicationSummary, out: W) -> std::io::Result<()> {
    write_combinations_tsv(&summary.scenario, &summary.combinations, out)
}

/// Same table for any list of combination summaries; `label` fills the
/// first column.
pub fn write_combinations_tsv<W: Write>(
    label: &str,
    combinations: &[CombinationSummary],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{}", TSV_COLUMNS.join("\t"))?;
    for c in combinations {
        let q = c.quantiles;
        let fields = [
            label.to_string(),
            c.kind.to_string(),
            c.strategy.to_string(),
            c.successful.to_string(),
            c.failed_replications.to_string(),
            cell(c.mean),
            cell(c.variance),
            cell(q.map(|q| q.min)),
            cell(q.map(|q| q.q1)),
            cell(q.map(|q| q.median)),
            cell(q.map(|q| q.q3)),
            cell(q.map(|q| q.max)),
            cell(c.rvr_vs_mc_mc),
            cell(c.rvr_std_error),
        ];
        writeln!(out, "{}", fields.join("\t"))?;
    }
    Ok(())
}
