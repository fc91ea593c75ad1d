//! Euler–Maruyama integration of single and coupled Brownian motions.
//!
//! Brownian motion in a conformal chart is the planar process with
//! variance dt/λ.  Coupled steps draw ξ ∈ ℝ⁴, push the first pair through
//! the frames of M, and drive N with η = √(1−ε̂²)·O·(ξ₁,ξ₂) + ε̂·(ξ₃,ξ₄),
//! where (A, σ, ε̂) are recomputed from the configuration at every step —
//! the coupling law is pointwise, so frames are rebuilt from scratch and
//! nothing is transported.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::configuration::{compute_configuration, ConfigError};
use crate::coupling::{choose_coupling, CouplingChoice, CouplingParams, RatePair};
use crate::surface::{advance_state, SurfaceError, SurfaceModel, SurfaceState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step size underflow: lambda guard tripped 20 times")]
    NumericalGuard,
    #[error("need at least 2 samples")]
    TooFewSamples,
}

/// Reproducible normal-draw stream: a pure function of (seed, stream_id).
/// Disjoint stream ids give independent streams (counter-based generator).
pub struct NoiseSource {
    pub seed: u64,
    pub stream_id: u64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        NoiseSource {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal2(&mut self) -> [f64; 2] {
        [self.normal(), self.normal()]
    }

    pub fn normal4(&mut self) -> [f64; 4] {
        [self.normal(), self.normal(), self.normal(), self.normal()]
    }

    pub fn uniform(&mut self) -> f64 {
        use rand::Rng;
        self.rng.gen::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct StepControl {
    pub dt_base: f64,
    pub r_couple: f64,
    pub t_max: f64,
    pub lambda_guard: f64,
    pub sample_stride: usize,
    /// Times at which running statistics are snapshotted.
    pub checkpoints: Vec<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_base: 1e-4,
            r_couple: 1e-3,
            t_max: 1.0,
            lambda_guard: 0.1,
            sample_stride: 100,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Coupled,
    Boundary,
    TimedOut,
    NumericalGuard,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Coupled => "Coupled",
            StopReason::Boundary => "Boundary",
            StopReason::TimedOut => "TimedOut",
            StopReason::NumericalGuard => "NumericalGuard",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledState {
    pub xstate: SurfaceState,
    pub ystate: SurfaceState,
    pub t: f64,
    pub r: f64,
    /// Realized quadratic variation of r.
    pub r_qv: f64,
    /// ∫|K| ds along each marginal.
    pub tau_gauss_x: f64,
    pub tau_gauss_y: f64,
}

impl CoupledState {
    pub fn new(
        m: &SurfaceModel,
        n: &SurfaceModel,
        x0: Complex64,
        y0: Complex64,
    ) -> Result<Self, EngineError> {
        let xstate = m.state_at(x0)?;
        let ystate = n.state_at(y0)?;
        let r = (xstate.x - ystate.x).norm();
        Ok(CoupledState {
            xstate,
            ystate,
            t: 0.0,
            r,
            r_qv: 0.0,
            tau_gauss_x: 0.0,
            tau_gauss_y: 0.0,
        })
    }
}

/// Per-step diagnostics used for recording and the domination ledger.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub dt_used: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub rates: RatePair,
    pub choice: CouplingChoice,
}

/// Chart displacement realizing the ℝ³ tangent increment
/// c1·dir1 + c2·dir2 (dirs given through frame dot products).
fn chart_step(state: &SurfaceState, v: &Vector3<f64>) -> Complex64 {
    Complex64::new(
        v.dot(&state.frame_u) / state.lambda,
        v.dot(&state.frame_v) / state.lambda,
    )
}

fn lambda_guard_ok(
    model: &SurfaceModel,
    state: &SurfaceState,
    dz: Complex64,
    guard: f64,
) -> Result<bool, SurfaceError> {
    let z_new = state.z + dz;
    if !model.pair.domain.contains(z_new) {
        // Let advance_state produce the DomainExit; the guard only watches λ.
        return Ok(true);
    }
    let wf = (model.pair.wf)(z_new);
    let wg = (model.pair.wg)(z_new);
    let lam = crate::surface::conformal_factor(wf, wg)?;
    Ok((lam.ln() - state.lambda.ln()).abs() <= guard)
}

/// One Euler–Maruyama step of a single Brownian motion: Δz = √(dt/λ)(ξ₁+iξ₂).
/// The λ guard halves dt (reusing the same unit draws) up to 20 times.
pub fn step_single(
    model: &SurfaceModel,
    state: &SurfaceState,
    dt: f64,
    xi: [f64; 2],
    lambda_guard: f64,
) -> Result<(SurfaceState, f64), EngineError> {
    let mut dt_used = dt;
    for _ in 0..=20 {
        let scale = (dt_used / state.lambda).sqrt();
        let dz = Complex64::new(scale * xi[0], scale * xi[1]);
        if lambda_guard_ok(model, state, dz, lambda_guard)? {
            let next = advance_state(model, state, dz)?;
            return Ok((next, dt_used));
        }
        dt_used /= 2.0;
    }
    Err(EngineError::NumericalGuard)
}

/// One step of the coupled pair.  Pipeline: configuration → optimal (A, σ)
/// with the Σ₀ tie-break → ε̂ → dispersion; then both marginals advance as
/// chart Brownian increments.
pub fn step_coupled(
    m: &SurfaceModel,
    n: &SurfaceModel,
    cstate: &CoupledState,
    dt: f64,
    xi: [f64; 4],
    params: &CouplingParams,
    lambda_guard: f64,
) -> Result<(CoupledState, StepInfo), EngineError> {
    let config = compute_configuration(&cstate.xstate, &cstate.ystate)?;
    let (choice, rates) = choose_coupling(&config, params);

    let (ss, cs) = choice.sigma.sin_cos();
    let a = choice.a_sign;
    let scale = (1.0 - choice.eps_hat * choice.eps_hat).max(0.0).sqrt();
    // η = √(1−ε̂²)·O·(ξ₁,ξ₂) + ε̂·(ξ₃,ξ₄) with O = [[Acosσ, Asinσ],[−sinσ, cosσ]].
    let eta1 = scale * (a * cs * xi[0] + a * ss * xi[1]) + choice.eps_hat * xi[2];
    let eta2 = scale * (-ss * xi[0] + cs * xi[1]) + choice.eps_hat * xi[3];

    let mut dt_used = dt;
    for _ in 0..=20 {
        let sq = dt_used.sqrt();
        let inc_m = sq * (xi[0] * config.alpha_dir + xi[1] * config.beta_dir);
        let inc_n = sq * (eta1 * config.a_dir + eta2 * config.b_dir);
        let dz_m = chart_step(&cstate.xstate, &inc_m);
        let dz_n = chart_step(&cstate.ystate, &inc_n);
        if lambda_guard_ok(m, &cstate.xstate, dz_m, lambda_guard)?
            && lambda_guard_ok(n, &cstate.ystate, dz_n, lambda_guard)?
        {
            let xnext = advance_state(m, &cstate.xstate, dz_m)?;
            let ynext = advance_state(n, &cstate.ystate, dz_n)?;
            let r_new = (xnext.x - ynext.x).norm();
            let dr = r_new - cstate.r;
            let info = StepInfo {
                dt_used,
                theta: config.theta,
                phi: config.phi,
                psi: config.psi,
                rates,
                choice,
            };
            let next = CoupledState {
                tau_gauss_x: cstate.tau_gauss_x + (-cstate.xstate.k) * dt_used,
                tau_gauss_y: cstate.tau_gauss_y + (-cstate.ystate.k) * dt_used,
                xstate: xnext,
                ystate: ynext,
                t: cstate.t + dt_used,
                r: r_new,
                r_qv: cstate.r_qv + dr * dr,
            };
            return Ok((next, info));
        }
        dt_used /= 2.0;
    }
    Err(EngineError::NumericalGuard)
}

#[derive(Clone, Copy, Debug)]
pub struct SampleRecord {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub f: f64,
    pub g: f64,
    pub eps_hat: f64,
    pub xu: f64,
    pub xv: f64,
    pub yu: f64,
    pub yv: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckpointStat {
    pub t: f64,
    pub r: f64,
    pub min_r: f64,
    pub coupled: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub terminal_t: f64,
    pub terminal_r: f64,
    pub min_r: f64,
    pub steps: u64,
    /// Domination ledger: count and worst excess of g > f + 1e−9.
    pub violations: u64,
    pub max_violation: f64,
    pub r_qv: f64,
    pub coupled_time: Option<f64>,
    pub checkpoints: Vec<CheckpointStat>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub stop: StopReason,
    pub series: Vec<SampleRecord>,
    pub summary: RunSummary,
}

pub const DOMINATION_TOL: f64 = 1e-9;

/// Integrate the coupled pair until it couples (r ≤ r_couple), exits a
/// chart, reaches t_max, or trips a numerical guard.  Near coupling the
/// step is refined by (10·r_couple/r)², capped at 10⁴×.
pub fn run_coupled(
    m: &SurfaceModel,
    n: &SurfaceModel,
    x0: Complex64,
    y0: Complex64,
    control: &StepControl,
    noise: &mut NoiseSource,
    params: &CouplingParams,
) -> Result<RunResult, EngineError> {
    let mut cs = CoupledState::new(m, n, x0, y0)?;
    let mut series = Vec::new();
    let mut steps: u64 = 0;
    let mut violations: u64 = 0;
    let mut max_violation: f64 = 0.0;
    let mut min_r = cs.r;
    let mut cps: Vec<CheckpointStat> = Vec::new();
    let mut cp_idx = 0;
    let mut last_info: Option<StepInfo> = None;

    let stop = loop {
        if cs.r <= control.r_couple {
            break StopReason::Coupled;
        }
        if cs.t >= control.t_max {
            break StopReason::TimedOut;
        }
        let refine = if cs.r < 10.0 * control.r_couple {
            let f = 10.0 * control.r_couple / cs.r;
            (f * f).clamp(1.0, 1e4)
        } else {
            1.0
        };
        let dt = control.dt_base / refine;
        let xi = noise.normal4();
        match step_coupled(m, n, &cs, dt, xi, params, control.lambda_guard) {
            Ok((next, info)) => {
                if info.rates.drift_num > info.rates.qv_rate + DOMINATION_TOL {
                    violations += 1;
                    max_violation = max_violation.max(info.rates.drift_num - info.rates.qv_rate);
                }
                if steps % control.sample_stride as u64 == 0 {
                    series.push(SampleRecord {
                        t: cs.t,
                        r: cs.r,
                        theta: info.theta,
                        phi: info.phi,
                        psi: info.psi,
                        f: info.rates.qv_rate,
                        g: info.rates.drift_num,
                        eps_hat: info.choice.eps_hat,
                        xu: cs.xstate.z.re,
                        xv: cs.xstate.z.im,
                        yu: cs.ystate.z.re,
                        yv: cs.ystate.z.im,
                    });
                }
                // Bridge crossing correction: an Euler step can jump over
                // the coupling band, so score the probability that the
                // r-bridge between the endpoints dipped to r_couple
                // (volatility² = f at the step's start).
                let fdt = info.rates.qv_rate * info.dt_used;
                let a = (cs.r - control.r_couple) * (next.r - control.r_couple);
                let crossed = if next.r > control.r_couple && fdt > 0.0 && a < 15.0 * fdt / 2.0 {
                    noise.uniform() < (-2.0 * a / fdt).exp()
                } else {
                    false
                };
                last_info = Some(info);
                cs = next;
                steps += 1;
                min_r = min_r.min(cs.r);
                if crossed {
                    min_r = min_r.min(control.r_couple);
                    break StopReason::Coupled;
                }
                while cp_idx < control.checkpoints.len() && cs.t >= control.checkpoints[cp_idx] {
                    cps.push(CheckpointStat {
                        t: control.checkpoints[cp_idx],
                        r: cs.r,
                        min_r,
                        coupled: false,
                    });
                    cp_idx += 1;
                }
            }
            Err(EngineError::Config(ConfigError::ParticlesCoincident { .. })) => {
                break StopReason::Coupled
            }
            Err(EngineError::Surface(SurfaceError::DomainExit { .. })) => break StopReason::Boundary,
            Err(_) => break StopReason::NumericalGuard,
        }
    };

    let coupled = stop == StopReason::Coupled;
    // Unreached checkpoints keep the terminal statistics.
    while cp_idx < control.checkpoints.len() {
        cps.push(CheckpointStat {
            t: control.checkpoints[cp_idx],
            r: cs.r,
            min_r,
            coupled,
        });
        cp_idx += 1;
    }
    min_r = min_r.min(cs.r);
    let li = last_info;
    series.push(SampleRecord {
        t: cs.t,
        r: cs.r,
        theta: li.map_or(0.0, |i| i.theta),
        phi: li.map_or(0.0, |i| i.phi),
        psi: li.map_or(0.0, |i| i.psi),
        f: li.map_or(0.0, |i| i.rates.qv_rate),
        g: li.map_or(0.0, |i| i.rates.drift_num),
        eps_hat: li.map_or(0.0, |i| i.choice.eps_hat),
        xu: cs.xstate.z.re,
        xv: cs.xstate.z.im,
        yu: cs.ystate.z.re,
        yv: cs.ystate.z.im,
    });
    Ok(RunResult {
        stop,
        series,
        summary: RunSummary {
            terminal_t: cs.t,
            terminal_r: cs.r,
            min_r,
            steps,
            violations,
            max_violation,
            r_qv: cs.r_qv,
            coupled_time: if coupled { Some(cs.t) } else { None },
            checkpoints: cps,
        },
    })
}

#[derive(Clone, Copy, Debug)]
pub struct SingleSample {
    pub t: f64,
    pub zu: f64,
    pub zv: f64,
    pub x: Vector3<f64>,
    pub m: Vector3<f64>,
}

#[derive(Clone, Debug)]
pub struct SingleSummary {
    pub terminal_t: f64,
    pub terminal_x: Vector3<f64>,
    pub start_x: Vector3<f64>,
    pub steps: u64,
    /// Realized quadratic (co)variation Σ Δx_i Δx_j.
    pub qv: Matrix3<f64>,
    /// ∫ (δ_ij − m_i m_j) ds.
    pub int_qv: Matrix3<f64>,
    /// Σ |Δm|² along the Gauss track.
    pub gauss_qv: f64,
    /// ∫ |K| ds.
    pub tau_gauss: f64,
    /// Occupation time of each cap, snapshotted at each checkpoint
    /// (rows: checkpoints, final row: terminal time).
    pub occupation: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SingleRunResult {
    pub stop: StopReason,
    pub series: Vec<SingleSample>,
    pub summary: SingleSummary,
}

/// Spherical caps the Gauss track is scored against (empty = no scoring).
#[derive(Clone, Debug, Default)]
pub struct CapSet {
    pub centers: Vec<Vector3<f64>>,
    pub cos_radius: f64,
}

/// Integrate a single Brownian motion, recording the Gauss-sphere track,
/// the coordinate quadratic variations, and cap occupation times.
pub fn run_single(
    model: &SurfaceModel,
    x0: Complex64,
    control: &StepControl,
    noise: &mut NoiseSource,
    caps: &CapSet,
) -> Result<SingleRunResult, EngineError> {
    let mut state = model.state_at(x0)?;
    let start_x = state.x;
    let mut t = 0.0;
    let mut steps: u64 = 0;
    let mut qv = Matrix3::zeros();
    let mut int_qv = Matrix3::zeros();
    let mut gauss_qv = 0.0;
    let mut tau_gauss = 0.0;
    let mut occ = vec![0.0; caps.centers.len()];
    let mut occupation = Vec::new();
    let mut cp_idx = 0;
    let mut series = Vec::new();

    let stop = loop {
        if t >= control.t_max {
            break StopReason::TimedOut;
        }
        if steps % control.sample_stride as u64 == 0 {
            series.push(SingleSample {
                t,
                zu: state.z.re,
                zv: state.z.im,
                x: state.x,
                m: state.m,
            });
        }
        let xi = noise.normal2();
        match step_single(model, &state, control.dt_base, xi, control.lambda_guard) {
            Ok((next, dt_used)) => {
                let dx = next.x - state.x;
                qv += dx * dx.transpose();
                let pm = Matrix3::identity() - state.m * state.m.transpose();
                int_qv += pm * dt_used;
                gauss_qv += (next.m - state.m).norm_squared();
                tau_gauss += (-state.k) * dt_used;
                for (j, c) in caps.centers.iter().enumerate() {
                    if state.m.dot(c) >= caps.cos_radius {
                        occ[j] += dt_used;
                    }
                }
                state = next;
                t += dt_used;
                steps += 1;
                while cp_idx < control.checkpoints.len() && t >= control.checkpoints[cp_idx] {
                    occupation.push(occ.clone());
                    cp_idx += 1;
                }
            }
            Err(EngineError::Surface(SurfaceError::DomainExit { .. })) => break StopReason::Boundary,
            Err(_) => break StopReason::NumericalGuard,
        }
    };

    while cp_idx < control.checkpoints.len() {
        occupation.push(occ.clone());
        cp_idx += 1;
    }
    occupation.push(occ);
    series.push(SingleSample {
        t,
        zu: state.z.re,
        zv: state.z.im,
        x: state.x,
        m: state.m,
    });
    Ok(SingleRunResult {
        stop,
        series,
        summary: SingleSummary {
            terminal_t: t,
            terminal_x: state.x,
            start_x,
            steps,
            qv,
            int_qv,
            gauss_qv,
            tau_gauss,
            occupation,
        },
    })
}

/// Sum of squared successive increments.
pub fn estimate_qv(samples: &[f64]) -> Result<f64, EngineError> {
    if samples.len() < 2 {
        return Err(EngineError::TooFewSamples);
    }
    Ok(samples
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d * d
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{make_catenoid, make_plane};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn noise_is_reproducible_and_stream_separated() {
        let mut a = NoiseSource::new(42, 0);
        let mut b = NoiseSource::new(42, 0);
        let mut cst = NoiseSource::new(42, 1);
        let xa: Vec<f64> = (0..16).map(|_| a.normal()).collect();
        let xb: Vec<f64> = (0..16).map(|_| b.normal()).collect();
        let xc: Vec<f64> = (0..16).map(|_| cst.normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn estimate_qv_examples() {
        assert!(matches!(estimate_qv(&[1.0]), Err(EngineError::TooFewSamples)));
        assert_eq!(estimate_qv(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..11).map(|i| 0.5 * i as f64).collect();
        assert_abs_diff_eq!(estimate_qv(&ramp).unwrap(), 10.0 * 0.25, epsilon = 1e-14);
    }

    #[test]
    fn estimate_qv_lln() {
        let mut noise = NoiseSource::new(1, 0);
        let v: f64 = 4e-4;
        let mut path = vec![0.0f64];
        for _ in 0..1_000_000 {
            path.push(path.last().unwrap() + v.sqrt() * noise.normal());
        }
        let qv = estimate_qv(&path).unwrap();
        let expect = 1_000_000.0 * v;
        assert!((qv - expect).abs() / expect < 0.01, "qv = {qv}");
    }

    #[test]
    fn plane_single_step_variance_exact() {
        let plane = make_plane(100.0, false).unwrap();
        let st = plane.state_at(c(0.0, 0.0)).unwrap();
        let (next, dt_used) = step_single(&plane, &st, 0.01, [1.5, -0.5], 0.1).unwrap();
        assert_eq!(dt_used, 0.01);
        // λ ≡ 1: Δz = √dt·ξ exactly.
        assert_abs_diff_eq!(next.z.re, 0.1 * 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(next.z.im, 0.1 * -0.5, epsilon = 1e-15);
    }

    #[test]
    fn synchronous_planes_preserve_distance() {
        let m = make_plane(50.0, false).unwrap();
        let n = make_plane(50.0, false)
            .unwrap()
            .with_offset(Vector3::new(0.0, 0.0, -1.0));
        let params = CouplingParams::default();
        let mut cs = CoupledState::new(&m, &n, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let mut noise = NoiseSource::new(7, 0);
        for _ in 0..500 {
            let (next, info) = step_coupled(&m, &n, &cs, 1e-3, noise.normal4(), &params, 0.1).unwrap();
            assert_abs_diff_eq!(next.r, 1.0, epsilon = 1e-12);
            assert!(info.rates.qv_rate.abs() < 1e-12);
            assert!(info.rates.drift_num.abs() < 1e-12);
            cs = next;
        }
    }

    #[test]
    fn coupled_state_distance_invariant() {
        let m = make_plane(50.0, false).unwrap();
        let params = CouplingParams::default();
        let mut cs = CoupledState::new(&m, &m, c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let mut noise = NoiseSource::new(3, 0);
        for _ in 0..500 {
            let (next, _) = step_coupled(&m, &m, &cs, 1e-4, noise.normal4(), &params, 0.1).unwrap();
            assert_abs_diff_eq!(next.r, (next.xstate.x - next.ystate.x).norm(), epsilon = 1e-10);
            cs = next;
        }
    }

    #[test]
    fn mirror_plane_r_is_scaled_brownian() {
        // dr = 2 dB: per-step increments have mean ~0 and variance ~4·dt.
        let m = make_plane(200.0, false).unwrap();
        let params = CouplingParams::default();
        let mut cs = CoupledState::new(&m, &m, c(0.0, 0.0), c(50.0, 0.0)).unwrap();
        let mut noise = NoiseSource::new(11, 0);
        let dt = 1e-4;
        let n_steps = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n_steps {
            let (next, info) = step_coupled(&m, &m, &cs, dt, noise.normal4(), &params, 0.1).unwrap();
            assert_abs_diff_eq!(info.rates.qv_rate, 4.0, epsilon = 1e-9);
            assert_abs_diff_eq!(info.rates.drift_num, 0.0, epsilon = 1e-9);
            let dr = next.r - cs.r;
            sum += dr;
            sum2 += dr * dr;
            cs = next;
        }
        let mean = sum / n_steps as f64;
        let var = sum2 / n_steps as f64;
        // per-step sd is 2√dt = 0.02; mean of n draws has sd 0.02/√n
        assert!(mean.abs() < 4.0 * 0.02 / (n_steps as f64).sqrt());
        assert!((var - 4.0 * dt).abs() / (4.0 * dt) < 0.02, "var = {var}");
    }

    #[test]
    fn run_coupled_stops() {
        let m = make_plane(50.0, false).unwrap();
        let params = CouplingParams::default();
        // Synchronous: never couples, times out with r unchanged.
        let n = make_plane(50.0, false)
            .unwrap()
            .with_offset(Vector3::new(0.0, 0.0, -1.0));
        let control = StepControl {
            t_max: 0.05,
            dt_base: 1e-3,
            ..Default::default()
        };
        let mut noise = NoiseSource::new(1, 0);
        let res = run_coupled(&m, &n, c(0.0, 0.0), c(0.0, 0.0), &control, &mut noise, &params).unwrap();
        assert_eq!(res.stop, StopReason::TimedOut);
        assert_abs_diff_eq!(res.summary.terminal_r, 1.0, epsilon = 1e-10);
        assert_eq!(res.summary.violations, 0);

        // Mirror on the same plane from r0 = 0.05: couples quickly.
        let control = StepControl {
            t_max: 5.0,
            dt_base: 1e-4,
            ..Default::default()
        };
        let mut coupled = 0;
        for tr in 0..20 {
            let mut noise = NoiseSource::new(1, tr);
            let res =
                run_coupled(&m, &m, c(0.0, 0.0), c(0.05, 0.0), &control, &mut noise, &params)
                    .unwrap();
            if res.stop == StopReason::Coupled {
                coupled += 1;
                assert!(res.summary.coupled_time.is_some());
            }
            assert_eq!(res.summary.violations, 0);
            let times: Vec<f64> = res.series.iter().map(|s| s.t).collect();
            assert!(times.windows(2).all(|w| w[1] > w[0]));
        }
        assert!(coupled >= 15, "coupled {coupled}/20");
    }

    #[test]
    fn run_coupled_boundary_stop() {
        let m = make_catenoid(0.5, 2.0, true).unwrap();
        let n = make_plane(50.0, false)
            .unwrap()
            .with_offset(Vector3::new(0.0, 0.0, 5.0));
        let params = CouplingParams::default();
        let control = StepControl {
            t_max: 50.0,
            dt_base: 1e-3,
            ..Default::default()
        };
        let mut noise = NoiseSource::new(2, 0);
        let res = run_coupled(&m, &n, c(1.0, 0.0), c(0.0, 0.0), &control, &mut noise, &params).unwrap();
        assert_eq!(res.stop, StopReason::Boundary);
    }

    #[test]
    fn run_single_plane_gauss_track_constant() {
        let plane = make_plane(100.0, false).unwrap();
        let control = StepControl {
            t_max: 0.5,
            dt_base: 1e-3,
            ..Default::default()
        };
        let mut noise = NoiseSource::new(5, 0);
        let res = run_single(&plane, c(0.0, 0.0), &control, &mut noise, &CapSet::default()).unwrap();
        assert_eq!(res.stop, StopReason::TimedOut);
        assert_eq!(res.summary.gauss_qv, 0.0);
        assert_eq!(res.summary.tau_gauss, 0.0);
        // ∫(1−m₃²)ds = 0 for m = (0,0,−1); x₃ QV also 0.
        assert_abs_diff_eq!(res.summary.int_qv[(2, 2)], 0.0);
        assert_abs_diff_eq!(res.summary.qv[(2, 2)], 0.0);
    }

    #[test]
    fn run_single_enneper_tau_gauss_increasing() {
        let enneper = crate::surface::make_enneper(2.0, false).unwrap();
        let control = StepControl {
            t_max: 0.05,
            dt_base: 1e-4,
            ..Default::default()
        };
        let mut noise = NoiseSource::new(6, 0);
        let res = run_single(&enneper, c(0.3, 0.1), &control, &mut noise, &CapSet::default()).unwrap();
        assert!(res.summary.tau_gauss > 0.0);
        assert!(res.summary.gauss_qv > 0.0);
    }

    #[test]
    fn marginal_exchangeability_mirror() {
        // Swap (M, x0) with (N, y0).  Feeding the swapped run the noise
        // that the original run's N-particle received — re-expressed in the
        // swapped run's own M frame — must reproduce the same r-series
        // (ε̂ = 0 along the mirror path, so the noise map is a bijection).
        let m = make_plane(200.0, false).unwrap();
        let params = CouplingParams::default();
        let mut cs_a = CoupledState::new(&m, &m, c(0.0, 0.0), c(5.0, 0.0)).unwrap();
        let mut cs_b = CoupledState::new(&m, &m, c(5.0, 0.0), c(0.0, 0.0)).unwrap();
        let mut noise = NoiseSource::new(8, 0);
        for _ in 0..300 {
            let xi = noise.normal4();
            let cfg_a = compute_configuration(&cs_a.xstate, &cs_a.ystate).unwrap();
            let (choice, _) = choose_coupling(&cfg_a, &params);
            assert_eq!(choice.eps_hat, 0.0);
            let (ss, cssig) = choice.sigma.sin_cos();
            let a = choice.a_sign;
            let eta1 = a * cssig * xi[0] + a * ss * xi[1];
            let eta2 = -ss * xi[0] + cssig * xi[1];
            let inc_n_a = eta1 * cfg_a.a_dir + eta2 * cfg_a.b_dir;
            let cfg_b = compute_configuration(&cs_b.xstate, &cs_b.ystate).unwrap();
            let xi_b = [
                inc_n_a.dot(&cfg_b.alpha_dir),
                inc_n_a.dot(&cfg_b.beta_dir),
                xi[2],
                xi[3],
            ];
            let (na, ia) = step_coupled(&m, &m, &cs_a, 1e-4, xi, &params, 0.1).unwrap();
            let (nb, ib) = step_coupled(&m, &m, &cs_b, 1e-4, xi_b, &params, 0.1).unwrap();
            assert_abs_diff_eq!(na.r, nb.r, epsilon = 1e-9);
            assert_abs_diff_eq!(ia.theta, ib.phi, epsilon = 1e-9);
            assert_abs_diff_eq!(ia.phi, ib.theta, epsilon = 1e-9);
            cs_a = na;
            cs_b = nb;
        }
    }
}
