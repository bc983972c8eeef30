use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublinopt::error::{Error, Result};
use sublinopt::gen::GenMeta;
pub use sublinopt::json::to_json;
use sublinopt::kernels::KernelSpec;
use sublinopt::solvers::{SolutionReport, SolverConfig};
use sublinopt::verification::Certificate;
use sublinopt::DataMatrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub path: PathBuf,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
}

impl InstanceInfo {
    pub fn new(path: &Path, m: &DataMatrix) -> Self {
        Self {
            path: path.to_path_buf(),
            n: m.n_rows(),
            d: m.n_cols(),
            nnz: m.nnz(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleSource {
    /// Deterministic exact solver run on the instance.
    Exact,
    /// Optimum recorded by the generator.
    Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub source: OracleSource,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// `achieved_value - value`.
    pub achieved_minus_optimum: f64,
}

/// Output of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub problem: String,
    pub instance: InstanceInfo,
    pub config: SolverConfig,
    pub kernel: Option<KernelSpec>,
    pub report: SolutionReport,
    pub certificate: Option<Certificate>,
    pub oracle: Option<OracleComparison>,
}

/// Output of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub problem: String,
    pub instance: InstanceInfo,
    pub seed: u64,
    pub certificate: Certificate,
}

/// Output of `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub schema_version: u32,
    pub instance: PathBuf,
    pub metadata: PathBuf,
    pub meta: GenMeta,
}

/// Sidecar path of an instance: `x.txt` -> `x.meta.json`.
pub fn sidecar_path(instance: &Path) -> PathBuf {
    instance.with_extension("meta.json")
}

pub fn read_meta(path: &Path) -> Result<GenMeta> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Whitespace-separated numbers; `#` starts a comment.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: k + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_replaces_extension() {
        assert_eq!(
            sidecar_path(Path::new("a/b.txt")),
            PathBuf::from("a/b.meta.json")
        );
    }
}
