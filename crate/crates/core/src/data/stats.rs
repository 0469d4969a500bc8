use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetManifest;
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, sum_f64, GridTensor, NormStats};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub mean: f64,
    pub std: f64,
    pub n_cells: u64,
}

/// Per-variable normalization statistics, persisted as
/// `{"<variable>": {"mean", "std", "n_cells"}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatsTable(pub BTreeMap<String, VariableStats>);

impl StatsTable {
    pub fn get(&self, variable: &str) -> Option<NormStats> {
        self.0.get(variable).map(|s| NormStats {
            mean: s.mean,
            std: s.std,
        })
    }

    pub fn require(&self, variable: &str) -> Result<NormStats> {
        self.get(variable)
            .ok_or_else(|| Error::InvalidStats(format!("no statistics for variable {variable}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        for (v, s) in &table.0 {
            NormStats::new(s.mean, s.std).map_err(|e| Error::InvalidStats(format!("{v}: {e}")))?;
        }
        Ok(table)
    }
}

/// Mean and population standard deviation over every cell of the given
/// fields, grouped by variable. Two passes with pairwise 64-bit sums.
pub fn stats_from_fields<'a>(fields: impl IntoIterator<Item = (&'a GridTensor, &'a str)>) -> Result<StatsTable> {
    let mut groups: BTreeMap<&str, Vec<&GridTensor>> = BTreeMap::new();
    for (g, v) in fields {
        groups.entry(v).or_default().push(g);
    }
    let mut table = BTreeMap::new();
    for (var, grids) in groups {
        let n: usize = grids.iter().map(|g| g.len()).sum();
        let mean = pairwise_sum(&grids.iter().map(|g| sum_f64(g.data())).collect::<Vec<_>>()) / n as f64;
        let ss = pairwise_sum(
            &grids
                .iter()
                .map(|g| {
                    let d: Vec<f64> = g.data().iter().map(|&x| (x as f64 - mean).powi(2)).collect();
                    pairwise_sum(&d)
                })
                .collect::<Vec<_>>(),
        );
        let std = (ss / n as f64).sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidStats(format!(
                "variable {var} has zero variance over {n} cells"
            )));
        }
        table.insert(
            var.to_string(),
            VariableStats {
                mean,
                std,
                n_cells: n as u64,
            },
        );
    }
    if table.is_empty() {
        return Err(Error::InvalidStats("no fields to compute statistics from".into()));
    }
    Ok(StatsTable(table))
}

/// Statistics over the samples tagged `split` of every manifest, pooled per
/// variable across products.
pub fn compute_norm_stats(manifests: &[DatasetManifest], split: Option<&str>) -> Result<StatsTable> {
    let mut samples = Vec::new();
    for m in manifests {
        samples.extend(m.load_samples(split)?);
    }
    if samples.is_empty() {
        return Err(Error::InvalidStats(format!(
            "split {} is empty",
            split.unwrap_or("<all>")
        )));
    }
    stats_from_fields(samples.iter().map(|(g, meta)| (g, meta.variable.as_str())))
}
