use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::protocol::{Mode, ProtocolKind};
use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub scale: usize,
    pub mode: Mode,
    pub r2: f64,
    pub mse: f64,
    pub n_samples: usize,
    pub n_cells: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub protocol_sha256: String,
    pub stats_sha256: String,
    /// `<model>-x<scale>[-ft]` → SHA-256 of the checkpoint bytes.
    pub checkpoints: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: ProtocolKind,
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl MetricsReport {
    pub fn row(&self, model: &str, scale: usize, mode: Mode) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.scale == scale && r.mode == mode)
    }

    /// Aligned text table: one block per mode, one line per scale, one
    /// `R²/MSE` column per model.
    pub fn to_table(&self) -> String {
        let mut models: Vec<&str> = Vec::new();
        let mut modes: Vec<Mode> = Vec::new();
        let mut scales: Vec<usize> = Vec::new();
        for r in &self.rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
            if !modes.contains(&r.mode) {
                modes.push(r.mode);
            }
            if !scales.contains(&r.scale) {
                scales.push(r.scale);
            }
        }
        let cell_w = models.iter().map(|m| m.len()).max().unwrap_or(0).max(15);
        let mut out = String::new();
        let _ = writeln!(out, "{} protocol, R²/MSE (normalized units)", self.protocol.name());
        let _ = write!(out, "{:<6} {:<6}", "mode", "scale");
        for m in &models {
            let _ = write!(out, " {m:>cell_w$}");
        }
        out.push('\n');
        for &mode in &modes {
            for &s in &scales {
                let _ = write!(out, "{:<6} {:<6}", mode.short(), format!("{s}x"));
                for m in &models {
                    let cell = self
                        .row(m, s, mode)
                        .map(|r| format!("{:.4}/{:.5}", r.r2, r.mse))
                        .unwrap_or_else(|| "-".into());
                    let _ = write!(out, " {cell:>cell_w$}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("report.txt"), self.to_table())?;
        Ok(())
    }
}
