//! Deterministic batch execution and artifact writing.  Trajectories are
//! striped across workers and merged in index order, so the outputs are a
//! function of (spec, seed) only — never of the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use minsurf::engine::{RunResult, SampleRecord, SingleRunResult};

use crate::CliError;

/// Run `f(i)` for i in 0..n across `workers` OS threads; results come back
/// indexed, so the merge order is independent of scheduling.
pub fn run_batch<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let mut buckets: Vec<Vec<(u64, T)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    (w as u64..n)
                        .step_by(workers)
                        .map(|i| (i, f(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut indexed: Vec<(u64, T)> = buckets.drain(..).flatten().collect();
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, t)| t).collect()
}

/// 17 significant digits; enough to reproduce any f64 exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_coupled_csv(path: &Path, run: &RunResult) -> Result<(), CliError> {
    let mut out = String::from("t,r,theta,phi,psi,f,g,eps_hat,xu,xv,yu,yv,stop_reason\n");
    let last = run.series.len().saturating_sub(1);
    for (i, s) in run.series.iter().enumerate() {
        let SampleRecord {
            t,
            r,
            theta,
            phi,
            psi,
            f,
            g,
            eps_hat,
            xu,
            xv,
            yu,
            yv,
        } = *s;
        let reason = if i == last { run.stop.as_str() } else { "" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f(t),
            fmt_f(r),
            fmt_f(theta),
            fmt_f(phi),
            fmt_f(psi),
            fmt_f(f),
            fmt_f(g),
            fmt_f(eps_hat),
            fmt_f(xu),
            fmt_f(xv),
            fmt_f(yu),
            fmt_f(yv),
            reason,
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_single_csv(path: &Path, run: &SingleRunResult) -> Result<(), CliError> {
    let mut out = String::from("t,zu,zv,x1,x2,x3,m1,m2,m3,stop_reason\n");
    let last = run.series.len().saturating_sub(1);
    for (i, s) in run.series.iter().enumerate() {
        let reason = if i == last { run.stop.as_str() } else { "" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f(s.t),
            fmt_f(s.zu),
            fmt_f(s.zv),
            fmt_f(s.x[0]),
            fmt_f(s.x[1]),
            fmt_f(s.x[2]),
            fmt_f(s.m[0]),
            fmt_f(s.m[1]),
            fmt_f(s.m[2]),
            reason,
        ));
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub estimate: f64,
    /// None stands for the ∞ convention on degenerate samples.
    pub stderr: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ViolationLedger {
    pub coupled_steps: u64,
    pub violations: u64,
    pub max_violation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scenario: String,
    pub seed: u64,
    pub n_traj: u64,
    pub statistics: Vec<Statistic>,
    pub stop_counts: BTreeMap<String, u64>,
    pub ledger: ViolationLedger,
    pub pass: bool,
}

impl SummaryReport {
    pub fn new(scenario: &str, seed: u64, n_traj: u64) -> Self {
        SummaryReport {
            scenario: scenario.to_string(),
            seed,
            n_traj,
            statistics: Vec::new(),
            stop_counts: BTreeMap::new(),
            ledger: ViolationLedger::default(),
            pass: true,
        }
    }

    pub fn push_stat(&mut self, s: Statistic) {
        self.pass &= s.pass;
        self.statistics.push(s);
    }

    pub fn count_stop(&mut self, reason: &str) {
        *self.stop_counts.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn absorb_coupled(&mut self, run: &RunResult) {
        self.count_stop(run.stop.as_str());
        self.ledger.coupled_steps += run.summary.steps;
        self.ledger.violations += run.summary.violations;
        self.ledger.max_violation = self.ledger.max_violation.max(run.summary.max_violation);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        write_atomic(&dir.join("summary.json"), text.as_bytes())
    }
}

/// (mean, stderr); stderr is None for n < 2.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some((var / n as f64).sqrt()))
}

/// Empirical q-quantile by sorted interpolation.
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (values.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    values[lo] * (1.0 - w) + values[hi] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_order_independent_of_workers() {
        let one = run_batch(37, 1, |i| i * i);
        let four = run_batch(37, 4, |i| i * i);
        assert_eq!(one, four);
    }

    #[test]
    fn mean_stderr_examples() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((se.unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(mean_stderr(&[5.0]).1.is_none());
    }

    #[test]
    fn quantile_examples() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0, 5.0];
        assert!((quantile(&mut v, 0.0) - 1.0).abs() < 1e-15);
        assert!((quantile(&mut v, 1.0) - 5.0).abs() < 1e-15);
        assert!((quantile(&mut v, 0.5) - 3.0).abs() < 1e-15);
    }
}
