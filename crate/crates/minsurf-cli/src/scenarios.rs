//! The eight experiment scenarios.  Each runs a trajectory batch, writes
//! per-trajectory CSV series for the first few indices plus one
//! summary.json, and reduces everything else to pass/fail statistics.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use minsurf::engine::{
    run_coupled, run_single, CapSet, NoiseSource, RunResult, RunSummary, SingleRunResult,
    SingleSummary, StopReason,
};
use minsurf::reference::bm_first_passage_prob;

use crate::config::{scenario_seed, ScenarioSpec};
use crate::runner::{
    mean_stderr, quantile, run_batch, write_coupled_csv, write_single_csv, Statistic,
    SummaryReport,
};
use crate::CliError;

pub fn run_scenario(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    spec.validate()?;
    let mut spec = spec.clone();
    if spec.control.checkpoints.is_empty() {
        // Default time grid {T/4, T/2, 3T/4}; the terminal row covers T.
        let t = spec.control.t_max;
        spec.control.checkpoints = vec![0.25 * t, 0.5 * t, 0.75 * t];
    }
    let spec = &spec;
    match spec.name.as_str() {
        "sto-comp" => sto_comp(spec, workers),
        "coordinate-qv" => coordinate_qv(spec, workers),
        "gauss-occupation" => gauss_occupation(spec, workers),
        "gauss-timechange" => gauss_timechange(spec, workers),
        "halfspace" => halfspace(spec, workers),
        "mirror-coupling-plane" => mirror_coupling_plane(spec, workers),
        "liouville-embedded" => liouville_embedded(spec, workers),
        "max-principle-boundary" => max_principle_boundary(spec, workers),
        other => Err(CliError::BadSpec(format!("unknown scenario {other:?}"))),
    }
}

fn out_dir(spec: &ScenarioSpec) -> PathBuf {
    PathBuf::from(&spec.outputs)
}

fn traj_path(dir: &Path, i: u64) -> PathBuf {
    dir.join(format!("traj_{i:04}.csv"))
}

// ---------------------------------------------------------------- single

struct SingleOut {
    stop: StopReason,
    summary: SingleSummary,
    full: Option<SingleRunResult>,
}

fn single_batch(
    spec: &ScenarioSpec,
    workers: usize,
    caps: &CapSet,
) -> Result<Vec<SingleOut>, CliError> {
    let model = spec.surfaces[0].build()?;
    let z0 = spec.starts[0].z();
    let control = spec.control.to_control();
    let seed = scenario_seed(spec.seed, &spec.name);
    let csv_max = spec.csv_max;
    let outs = run_batch(spec.n_traj, workers, |i| {
        let mut noise = NoiseSource::new(seed, i);
        run_single(&model, z0, &control, &mut noise, caps).map(|r| SingleOut {
            stop: r.stop,
            summary: r.summary.clone(),
            full: (i < csv_max).then_some(r),
        })
    });
    let outs: Result<Vec<_>, _> = outs.into_iter().collect();
    let outs = outs.map_err(|e| CliError::Engine(e.to_string()))?;
    let dir = out_dir(spec);
    for (i, o) in outs.iter().enumerate() {
        if let Some(full) = &o.full {
            write_single_csv(&traj_path(&dir, i as u64), full)?;
        }
    }
    Ok(outs)
}

// ---------------------------------------------------------------- coupled

struct CoupledOut {
    stop: StopReason,
    summary: RunSummary,
    full: Option<RunResult>,
}

fn coupled_batch(spec: &ScenarioSpec, workers: usize) -> Result<Vec<CoupledOut>, CliError> {
    let m = spec.surfaces[0].build()?;
    let n = if spec.surfaces.len() == 2 {
        spec.surfaces[1].build()?
    } else {
        m.clone()
    };
    if spec.starts.len() != 2 {
        return Err(CliError::BadSpec("coupled scenario needs two starts".into()));
    }
    let (x0, y0) = (spec.starts[0].z(), spec.starts[1].z());
    let control = spec.control.to_control();
    let params = spec.overrides.to_params();
    let seed = scenario_seed(spec.seed, &spec.name);
    let csv_max = spec.csv_max;
    let outs = run_batch(spec.n_traj, workers, |i| {
        let mut noise = NoiseSource::new(seed, i);
        run_coupled(&m, &n, x0, y0, &control, &mut noise, &params).map(|r| CoupledOut {
            stop: r.stop,
            summary: r.summary.clone(),
            full: (i < csv_max).then_some(r),
        })
    });
    let outs: Result<Vec<_>, _> = outs.into_iter().collect();
    let outs = outs.map_err(|e| CliError::Engine(e.to_string()))?;
    let dir = out_dir(spec);
    for (i, o) in outs.iter().enumerate() {
        if let Some(full) = &o.full {
            write_coupled_csv(&traj_path(&dir, i as u64), full)?;
        }
    }
    Ok(outs)
}

fn initial_r(spec: &ScenarioSpec) -> Result<f64, CliError> {
    let m = spec.surfaces[0].build()?;
    let n = if spec.surfaces.len() == 2 {
        spec.surfaces[1].build()?
    } else {
        m.clone()
    };
    let xs = m
        .state_at(spec.starts[0].z())
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let ys = n
        .state_at(spec.starts[1].z())
        .map_err(|e| CliError::Engine(e.to_string()))?;
    Ok((xs.x - ys.x).norm())
}

/// Coupling QV rate f at the initial configuration.
fn initial_rate(spec: &ScenarioSpec) -> Result<f64, CliError> {
    let m = spec.surfaces[0].build()?;
    let n = if spec.surfaces.len() == 2 {
        spec.surfaces[1].build()?
    } else {
        m.clone()
    };
    let xs = m
        .state_at(spec.starts[0].z())
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let ys = n
        .state_at(spec.starts[1].z())
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let cfg = minsurf::configuration::compute_configuration(&xs, &ys)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let (_, rates) = minsurf::coupling::choose_coupling(&cfg, &spec.overrides.to_params());
    Ok(rates.qv_rate)
}

fn absorb_coupled(report: &mut SummaryReport, outs: &[CoupledOut]) {
    for o in outs {
        report.count_stop(o.stop.as_str());
        report.ledger.coupled_steps += o.summary.steps;
        report.ledger.violations += o.summary.violations;
        report.ledger.max_violation = report.ledger.max_violation.max(o.summary.max_violation);
    }
}

fn domination_stat(report: &mut SummaryReport) {
    let v = report.ledger.violations;
    report.push_stat(Statistic {
        name: "domination-violations".into(),
        estimate: v as f64,
        stderr: None,
        target: 0.0,
        tolerance: 0.0,
        pass: v == 0,
    });
}

// -------------------------------------------------------------- sto-comp

/// mean(ρ²_{t∧e}) − ρ₀² − 2·mean(t∧e) against 0.
fn sto_comp(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let outs = single_batch(spec, workers, &CapSet::default())?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    let values: Vec<f64> = outs
        .iter()
        .map(|o| {
            let s = &o.summary;
            s.terminal_x.norm_squared() - s.start_x.norm_squared() - 2.0 * s.terminal_t
        })
        .collect();
    for o in &outs {
        report.count_stop(o.stop.as_str());
    }
    let (mean, se) = mean_stderr(&values);
    let rho0_sq = outs[0].summary.start_x.norm_squared();
    let allowance = if spec.surfaces[0].is_flat() {
        0.0
    } else {
        0.02 * (rho0_sq + 2.0 * spec.control.t_max)
    };
    let tol = se.map_or(allowance, |s| 4.0 * s + allowance);
    report.push_stat(Statistic {
        name: "sto-comp-residual".into(),
        estimate: mean,
        stderr: se,
        target: 0.0,
        tolerance: tol,
        pass: se.is_some() && mean.abs() <= tol,
    });
    report.write(&out_dir(spec))?;
    Ok(report)
}

// --------------------------------------------------------- coordinate-qv

fn coordinate_qv(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let outs = single_batch(spec, workers, &CapSet::default())?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    let mut qv = nalgebra::Matrix3::<f64>::zeros();
    let mut int_qv = nalgebra::Matrix3::<f64>::zeros();
    for o in &outs {
        report.count_stop(o.stop.as_str());
        qv += o.summary.qv;
        int_qv += o.summary.int_qv;
    }
    let i33 = int_qv[(2, 2)];
    let diag_err = if i33 > 1e-12 {
        (qv[(2, 2)] - i33).abs() / i33
    } else {
        (qv[(2, 2)] - i33).abs()
    };
    report.push_stat(Statistic {
        name: "qv33-rel-err".into(),
        estimate: diag_err,
        stderr: None,
        target: 0.0,
        tolerance: 0.02,
        pass: diag_err <= 0.02,
    });
    let tr = int_qv.trace().max(1e-12);
    let mut cross: f64 = 0.0;
    for i in 0..3 {
        for j in 0..i {
            cross = cross.max((qv[(i, j)] - int_qv[(i, j)]).abs() / tr);
        }
    }
    report.push_stat(Statistic {
        name: "qv-cross-rel-err".into(),
        estimate: cross,
        stderr: None,
        target: 0.0,
        tolerance: 0.05,
        pass: cross <= 0.05,
    });
    report.write(&out_dir(spec))?;
    Ok(report)
}

// ------------------------------------------------------ gauss-occupation

/// Icosahedron vertices in polar orientation (poles plus two pentagonal
/// rings), so an axis-aligned plane's constant normal sits inside a cap.
pub fn icosahedral_caps() -> CapSet {
    let mut centers = Vec::with_capacity(12);
    centers.push(Vector3::new(0.0, 0.0, 1.0));
    centers.push(Vector3::new(0.0, 0.0, -1.0));
    let lat = (0.5f64).atan(); // ±26.57°
    let (cz, cr) = (lat.sin(), lat.cos());
    for k in 0..5 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
        centers.push(Vector3::new(cr * a.cos(), cr * a.sin(), cz));
        let b = a + std::f64::consts::PI / 5.0;
        centers.push(Vector3::new(cr * b.cos(), cr * b.sin(), -cz));
    }
    CapSet {
        centers,
        cos_radius: (std::f64::consts::PI / 8.0).cos(),
    }
}

fn gauss_occupation(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    if spec.control.checkpoints.len() < 2 {
        return Err(CliError::BadSpec(
            "gauss-occupation needs at least two checkpoints".into(),
        ));
    }
    let caps = icosahedral_caps();
    let outs = single_batch(spec, workers, &caps)?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    // A cap counts as meeting the Gauss image when the batch spends real
    // time in it (1% of the horizon on average); grazed caps don't gate
    // the monotonicity property.
    let n_caps = caps.centers.len();
    let mut mean_occ = vec![0.0; n_caps];
    for o in &outs {
        let last = o.summary.occupation.last().unwrap();
        for (acc, v) in mean_occ.iter_mut().zip(last) {
            *acc += v / spec.n_traj as f64;
        }
    }
    let reachable: Vec<usize> = (0..n_caps)
        .filter(|&c| mean_occ[c] >= 0.01 * spec.control.t_max)
        .collect();
    if std::env::var("MINSURF_OCC_DEBUG").is_ok() {
        let mid_dbg = spec.control.checkpoints.len() / 2;
        for c in 0..n_caps {
            let grow = outs
                .iter()
                .filter(|o| {
                    let rows = &o.summary.occupation;
                    rows[rows.len() - 1][c] > rows[mid_dbg][c]
                })
                .count();
            eprintln!(
                "cap {c:2} occ/T {:.4} grow-frac {:.2}",
                mean_occ[c] / spec.control.t_max,
                grow as f64 / outs.len() as f64
            );
        }
    }
    let mut monotone_ok = true;
    let mut increased = 0u64;
    // Row layout: one row per checkpoint plus the terminal row; the T/2
    // comparison row is the middle checkpoint.
    let mid = spec.control.checkpoints.len() / 2;
    let n_rows = spec.control.checkpoints.len() + 1;
    let mut batch_occ = vec![vec![0.0f64; n_caps]; n_rows];
    for o in &outs {
        report.count_stop(o.stop.as_str());
        let rows = &o.summary.occupation;
        let last = rows.len() - 1;
        for cap in 0..n_caps {
            for w in rows.windows(2) {
                if w[1][cap] < w[0][cap] - 1e-12 {
                    monotone_ok = false;
                }
            }
        }
        for (row, acc) in rows.iter().zip(batch_occ.iter_mut()) {
            for (cap, v) in row.iter().enumerate() {
                acc[cap] += v / spec.n_traj as f64;
            }
        }
        if reachable
            .iter()
            .all(|&cap| rows[last][cap] > rows[mid][cap])
        {
            increased += 1;
        }
    }
    let frac = increased as f64 / spec.n_traj as f64;
    report.push_stat(Statistic {
        name: "reachable-caps".into(),
        estimate: reachable.len() as f64,
        stderr: None,
        target: 1.0,
        tolerance: 0.0,
        pass: !reachable.is_empty(),
    });
    // Batch-mean occupation of each reachable cap keeps accumulating
    // across the whole grid; a single path alternates between regions, so
    // this is the statistic that sees the steady growth.
    let min_growth = reachable
        .iter()
        .flat_map(|&cap| {
            batch_occ
                .windows(2)
                .map(move |w| w[1][cap] - w[0][cap])
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min);
    report.push_stat(Statistic {
        name: "batch-occ-increasing".into(),
        estimate: min_growth,
        stderr: None,
        target: 0.0,
        tolerance: 0.0,
        pass: min_growth > 0.0,
    });
    report.push_stat(Statistic {
        name: "occupation-monotone".into(),
        estimate: if monotone_ok { 1.0 } else { 0.0 },
        stderr: None,
        target: 1.0,
        tolerance: 0.0,
        pass: monotone_ok,
    });
    // Informational: fraction of paths whose every reachable cap grew over
    // the second half on its own.
    report.push_stat(Statistic {
        name: "cap-increase-frac".into(),
        estimate: frac,
        stderr: None,
        target: 1.0,
        tolerance: 1.0,
        pass: true,
    });
    report.write(&out_dir(spec))?;
    Ok(report)
}

// ------------------------------------------------------ gauss-timechange

/// Realized spherical QV of the Gauss track against 2∫|K|ds.
fn gauss_timechange(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let outs = single_batch(spec, workers, &CapSet::default())?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    let mut sum_qv = 0.0;
    let mut sum_tau = 0.0;
    for o in &outs {
        report.count_stop(o.stop.as_str());
        sum_qv += o.summary.gauss_qv;
        sum_tau += 2.0 * o.summary.tau_gauss;
    }
    let err = if sum_tau > 1e-12 {
        (sum_qv - sum_tau).abs() / sum_tau
    } else {
        sum_qv.abs()
    };
    report.push_stat(Statistic {
        name: "gauss-qv-rel-err".into(),
        estimate: err,
        stderr: None,
        target: 0.0,
        tolerance: 0.05,
        pass: err <= 0.05,
    });
    report.write(&out_dir(spec))?;
    Ok(report)
}

// ------------------------------------------------------------- halfspace

fn halfspace(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    if spec.control.checkpoints.len() < 2 {
        return Err(CliError::BadSpec("halfspace needs checkpoints".into()));
    }
    let r0 = initial_r(spec)?;
    let all_flat = spec.surfaces.iter().all(|s| s.is_flat());
    let f0 = initial_rate(spec)?;
    let outs = coupled_batch(spec, workers)?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    absorb_coupled(&mut report, &outs);
    if all_flat && f0 <= 1e-9 {
        // Negative control: flat surfaces starting synchronously have
        // zero coupling rate; inf r stays r₀ and the pair never couples.
        let mut dev: f64 = 0.0;
        let mut coupled = 0u64;
        for o in &outs {
            dev = dev.max((o.summary.min_r - r0).abs());
            if o.stop == StopReason::Coupled {
                coupled += 1;
            }
        }
        report.push_stat(Statistic {
            name: "inf-r-constant".into(),
            estimate: dev,
            stderr: None,
            target: 0.0,
            tolerance: 1e-6,
            pass: dev <= 1e-6,
        });
        report.push_stat(Statistic {
            name: "never-couples".into(),
            estimate: coupled as f64,
            stderr: None,
            target: 0.0,
            tolerance: 0.0,
            pass: coupled == 0,
        });
    } else if all_flat {
        // Flat but mirrored (same plane, two points): inf r must reach
        // the coupling radius.
        let coupled = outs
            .iter()
            .filter(|o| o.stop == StopReason::Coupled)
            .count() as f64;
        report.push_stat(Statistic {
            name: "couples".into(),
            estimate: coupled / spec.n_traj as f64,
            stderr: None,
            target: 1.0,
            tolerance: 1.0,
            pass: coupled > 0.0,
        });
    } else {
        // 10% quantile of inf_{s≤t} r over the checkpoint grid must be
        // strictly decreasing.
        let ncp = spec.control.checkpoints.len();
        let mut qs = Vec::with_capacity(ncp + 1);
        for k in 0..ncp {
            let mut vals: Vec<f64> = outs.iter().map(|o| o.summary.checkpoints[k].min_r).collect();
            qs.push(quantile(&mut vals, 0.10));
        }
        let mut vals: Vec<f64> = outs.iter().map(|o| o.summary.min_r).collect();
        qs.push(quantile(&mut vals, 0.10));
        let min_drop = qs
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        report.push_stat(Statistic {
            name: "q10-inf-r-decreasing".into(),
            estimate: min_drop,
            stderr: None,
            target: 0.0,
            tolerance: 0.0,
            pass: min_drop > 0.0,
        });
    }
    domination_stat(&mut report);
    report.write(&out_dir(spec))?;
    Ok(report)
}

// -------------------------------------------------- mirror-coupling-plane

fn mirror_coupling_plane(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let r0 = initial_r(spec)?;
    let outs = coupled_batch(spec, workers)?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    absorb_coupled(&mut report, &outs);
    let coupled = outs
        .iter()
        .filter(|o| o.stop == StopReason::Coupled)
        .count() as f64;
    let n = spec.n_traj as f64;
    let p_hat = coupled / n;
    let se = (p_hat * (1.0 - p_hat) / n).sqrt();
    let target = bm_first_passage_prob(r0, spec.control.t_max);
    // 0.01 discretization allowance on top of the Monte Carlo band.
    let tol = 3.0 * se + 0.01;
    report.push_stat(Statistic {
        name: "coupling-prob".into(),
        estimate: p_hat,
        stderr: Some(se),
        target,
        tolerance: tol,
        pass: (p_hat - target).abs() <= tol,
    });
    domination_stat(&mut report);
    report.write(&out_dir(spec))?;
    Ok(report)
}

// ---------------------------------------------------- liouville-embedded

fn liouville_embedded(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let r0 = initial_r(spec)?;
    let outs = coupled_batch(spec, workers)?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    absorb_coupled(&mut report, &outs);
    let mut grid = spec.control.checkpoints.clone();
    grid.push(spec.control.t_max);
    let n = spec.n_traj as f64;
    // Coupling fraction by t against the planar mirror benchmark minus a
    // coarse floor; nondecreasing by construction.
    let mut min_margin = f64::INFINITY;
    for &t in &grid {
        let frac = outs
            .iter()
            .filter(|o| o.summary.coupled_time.is_some_and(|ct| ct <= t))
            .count() as f64
            / n;
        let bench = bm_first_passage_prob(r0, t);
        min_margin = min_margin.min(frac - bench);
    }
    report.push_stat(Statistic {
        name: "coupling-frac-margin".into(),
        estimate: min_margin,
        stderr: None,
        target: 0.0,
        tolerance: 0.1,
        pass: min_margin >= -0.1,
    });
    domination_stat(&mut report);
    report.write(&out_dir(spec))?;
    Ok(report)
}

// ------------------------------------------------ max-principle-boundary

fn max_principle_boundary(spec: &ScenarioSpec, workers: usize) -> Result<SummaryReport, CliError> {
    let any_boundary = spec
        .surfaces
        .iter()
        .map(|s| s.build().map(|m| m.pair.domain.has_boundary()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .any(|b| b);
    if !any_boundary {
        return Err(CliError::MissingBoundary);
    }
    let r0 = initial_r(spec)?;
    let outs = coupled_batch(spec, workers)?;
    let mut report = SummaryReport::new(&spec.name, spec.seed, spec.n_traj);
    absorb_coupled(&mut report, &outs);
    let stopped: Vec<&CoupledOut> = outs
        .iter()
        .filter(|o| matches!(o.stop, StopReason::Boundary | StopReason::Coupled))
        .collect();
    let (min_term, min_run) = stopped.iter().fold((f64::INFINITY, f64::INFINITY), |acc, o| {
        (
            acc.0.min(o.summary.terminal_r),
            acc.1.min(o.summary.min_r),
        )
    });
    let tol = 1e-6 * r0.max(1.0);
    report.push_stat(Statistic {
        name: "min-stopped-r".into(),
        estimate: min_term,
        stderr: None,
        target: r0,
        tolerance: tol,
        pass: !stopped.is_empty() && min_term <= r0 + tol,
    });
    report.push_stat(Statistic {
        name: "min-running-r".into(),
        estimate: min_run,
        stderr: None,
        target: r0,
        tolerance: tol,
        pass: true,
    });
    domination_stat(&mut report);
    report.write(&out_dir(spec))?;
    Ok(report)
}
