use std::fmt;

use serde::{Deserialize, Serialize};

pub const BYTES_PER_F32_PARAM: u64 = 4;

pub fn params_to_bytes(params: u64, bytes_per_param: u64) -> u64 {
    params * bytes_per_param
}

/// Declared component sizes of a QA system (models, index, corpus) and their sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBudget {
    pub components: Vec<(String, u64)>,
    pub total_bytes: u64,
}

pub fn system_size_report(components: &[(String, u64)]) -> SizeBudget {
    SizeBudget {
        components: components.to_vec(),
        total_bytes: components.iter().map(|(_, b)| b).sum(),
    }
}

fn gb(bytes: u64) -> f64 {
    bytes as f64 / 1e9
}

impl fmt::Display for SizeBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.components.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
        for (name, bytes) in &self.components {
            writeln!(f, "{name:<width$}  {bytes:>16}  {:>9.3} GB", gb(*bytes))?;
        }
        write!(f, "{:<width$}  {:>16}  {:>9.3} GB", "total", self.total_bytes, gb(self.total_bytes))
    }
}
