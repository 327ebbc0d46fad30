//! Plot data for P(W > b) against n (at fixed b) or against b (at fixed n).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mcsched::analysis::{rate_function_estimate, RateFit};

use crate::config::ExperimentConfig;
use crate::output::ExceedRow;
use crate::runner::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    VsN,
    VsB,
}

impl FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vs_n" => Ok(SweepMode::VsN),
            "vs_b" => Ok(SweepMode::VsB),
            _ => Err(format!("unknown sweep mode `{s}` (expected vs_n or vs_b)")),
        }
    }
}

/// Fitted decay rate of one policy's `vs_n` curve.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub policy: String,
    pub b: u64,
    pub fit: Result<RateFit, String>,
}

fn find<'a>(rows: &'a [ExceedRow], policy: &str, n: usize, b: u64) -> Option<&'a ExceedRow> {
    rows.iter().find(|r| r.policy == policy && r.n == n && r.b == b)
}

/// Every configured `(policy, n, b)` must have a row.
fn check_complete(cfg: &ExperimentConfig, rows: &[ExceedRow]) -> Result<(), RunError> {
    let mut missing = Vec::new();
    for p in &cfg.policies {
        let name = p.to_string();
        for &n in &cfg.n_values {
            for &b in &cfg.thresholds {
                if find(rows, &name, n, b).is_none() {
                    missing.push(format!("policy={name} n={n} b={b}"));
                }
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(RunError::MissingCells(missing))
    }
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Writes `.dat` (gnuplot, one block per policy) and `.csv` files into
/// `dir`. For `vs_n` the fitted slope of `-ln P̂` against `n` goes into
/// each block header.
pub fn figure_sweep(
    cfg: &ExperimentConfig,
    rows: &[ExceedRow],
    mode: SweepMode,
    dir: &Path,
) -> Result<(Vec<PathBuf>, Vec<CurveFit>), RunError> {
    check_complete(cfg, rows)?;
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    let mut fits = Vec::new();
    let policies: Vec<String> = cfg.policies.iter().map(|p| p.to_string()).collect();
    let block_sep = "\n\n";
    match mode {
        SweepMode::VsN => {
            for &b in &cfg.thresholds {
                let mut dat = format!("# P(W > {b}) against n\n");
                let mut csv = String::from("policy,n,p_hat,censored,horizon\n");
                for (k, name) in policies.iter().enumerate() {
                    let pts: Vec<&ExceedRow> =
                        cfg.n_values.iter().map(|&n| find(rows, name, n, b).expect("checked")).collect();
                    let fit = rate_function_estimate(&pts.iter().map(|r| (r.n, r.p_hat)).collect::<Vec<_>>())
                        .map_err(|e| e.to_string());
                    if k > 0 {
                        dat.push_str(block_sep);
                    }
                    match &fit {
                        Ok(f) => writeln!(dat, "# policy={name} b={b} slope={:.6} se={:.6}", f.slope, f.std_err),
                        Err(e) => writeln!(dat, "# policy={name} b={b} slope=NA ({e})"),
                    }
                    .expect("writing to a String");
                    dat.push_str("# n p_hat censored\n");
                    for r in &pts {
                        writeln!(dat, "{} {:e} {}", r.n, r.p_hat, r.censored as u8).expect("writing to a String");
                        writeln!(csv, "{name},{},{},{},{}", r.n, r.p_hat, r.censored, r.horizon)
                            .expect("writing to a String");
                    }
                    fits.push(CurveFit { policy: name.clone(), b, fit });
                }
                for (ext, text) in [("dat", &dat), ("csv", &csv)] {
                    let path = dir.join(format!("vs_n_b{b}.{ext}"));
                    write(&path, text)?;
                    files.push(path);
                }
            }
        }
        SweepMode::VsB => {
            for &n in &cfg.n_values {
                let mut dat = format!("# P(W > b) against b at n = {n}\n");
                let mut csv = String::from("policy,b,p_hat,censored,horizon\n");
                for (k, name) in policies.iter().enumerate() {
                    if k > 0 {
                        dat.push_str(block_sep);
                    }
                    writeln!(dat, "# policy={name} n={n}\n# b p_hat censored").expect("writing to a String");
                    for &b in &cfg.thresholds {
                        let r = find(rows, name, n, b).expect("checked");
                        writeln!(dat, "{b} {:e} {}", r.p_hat, r.censored as u8).expect("writing to a String");
                        writeln!(csv, "{name},{b},{},{},{}", r.p_hat, r.censored, r.horizon)
                            .expect("writing to a String");
                    }
                }
                for (ext, text) in [("dat", &dat), ("csv", &csv)] {
                    let path = dir.join(format!("vs_b_n{n}.{ext}"));
                    write(&path, text)?;
                    files.push(path);
                }
            }
        }
    }
    Ok((files, fits))
}
