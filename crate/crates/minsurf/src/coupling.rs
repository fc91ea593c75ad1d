//! Pointwise coupling algebra.
//!
//! For a configuration (θ, φ, ψ) the coupling is an element of O(2) —
//! a sign A = ±1 and an angle σ — plus a perturbation strength ε̂.
//! The distance process then has quadratic-variation rate f and drift
//! numerator g (drift = g/(2r)); the coupling is chosen to maximize f−g,
//! which has a closed form, and the maximum is never negative: the
//! distance is dominated by a two-dimensional Bessel process.

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::configuration::{Configuration, Region, TOL_SIGMA};

/// Coupling selection: O(2) element plus perturbation.
#[derive(Clone, Copy, Debug)]
pub struct CouplingChoice {
    /// +1 orientation-preserving, −1 orientation-reversing.
    pub a_sign: f64,
    /// σ ∈ [0, 2π)
    pub sigma: f64,
    /// ε̂ ∈ [0, 1/2)
    pub eps_hat: f64,
}

/// (f, g): QV rate of r and drift numerator (drift of r is g/(2r)).
#[derive(Clone, Copy, Debug)]
pub struct RatePair {
    pub qv_rate: f64,
    pub drift_num: f64,
}

/// Tunables of the ε̂ formula.
#[derive(Clone, Copy, Debug)]
pub struct CouplingParams {
    pub eps_max: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        CouplingParams {
            eps_max: 0.25,
            delta: 0.1,
            kappa: 0.1,
        }
    }
}

/// f = sin²θ + sin²φ − 2A sinθ sinφ cosσ
/// g = 2 + cos²θ + cos²φ − 2cosσ[A cosθcosφcosψ + cosψ]
///                       + 2sinσ[A cosφ sinψ + cosθ sinψ]
pub fn rate_pair(theta: f64, phi: f64, psi: f64, sigma: f64, a_sign: f64) -> RatePair {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sps, cps) = psi.sin_cos();
    let (ss, cs) = sigma.sin_cos();
    let f = st * st + sp * sp - 2.0 * a_sign * st * sp * cs;
    let g = 2.0 + ct * ct + cp * cp - 2.0 * cs * (a_sign * ct * cp * cps + cps)
        + 2.0 * ss * (a_sign * cp * sps + ct * sps);
    RatePair {
        qv_rate: f.max(0.0),
        drift_num: g.max(0.0),
    }
}

/// Components of f−g as a function of σ:
/// f−g = base + 2(c₁ cosσ + c₂ sinσ).
pub fn fg_gap_components(theta: f64, phi: f64, psi: f64, a_sign: f64) -> (f64, f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sps, cps) = psi.sin_cos();
    let base = -2.0 * ct * ct - 2.0 * cp * cp;
    let c1 = a_sign * ct * cp * cps + cps - a_sign * st * sp;
    let c2 = -(a_sign * cp * sps + ct * sps);
    (base, c1, c2)
}

/// Maximizer of f−g over σ for fixed A: σ = atan2(c₂, c₁) (0 if both vanish).
pub fn optimal_sigma(theta: f64, phi: f64, psi: f64, a_sign: f64) -> f64 {
    let (_, c1, c2) = fg_gap_components(theta, phi, psi, a_sign);
    if c1 == 0.0 && c2 == 0.0 {
        return 0.0;
    }
    let s = c2.atan2(c1);
    if s < 0.0 {
        s + 2.0 * std::f64::consts::PI
    } else {
        s
    }
}

/// Tie-break on Σ₀/Σe: the orientation-reversing branch.
pub fn select_on_sigma0(config: &Configuration) -> f64 {
    debug_assert!(matches!(config.region, Region::Sigma0 | Region::SigmaE));
    -1.0
}

/// Closed-form maximum of f−g over O(2), with the maximizing (A, σ).
///
/// max = −2cos²θ − 2cos²φ + 2√(base + 2|h|) with
/// base = cos²ψ(1+cos²θcos²φ) + sin²ψ(cos²θ+cos²φ)
///        + sin²θsin²φ − 2cosθcosφcosψ sinθ sinφ,
/// h = cosθcosφ − cosψ sinθ sinφ; A* = sign(h), ties to −1.
pub fn gap_max(theta: f64, phi: f64, psi: f64) -> (f64, f64, f64) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sps, cps) = psi.sin_cos();
    let h = ct * cp - cps * st * sp;
    let base = cps * cps * (1.0 + ct * ct * cp * cp)
        + sps * sps * (ct * ct + cp * cp)
        + st * st * sp * sp
        - 2.0 * ct * cp * cps * st * sp;
    let value = -2.0 * ct * ct - 2.0 * cp * cp + 2.0 * (base + 2.0 * h.abs()).max(0.0).sqrt();
    let a_star = if h > TOL_SIGMA { 1.0 } else { -1.0 };
    let sigma_star = optimal_sigma(theta, phi, psi, a_star);
    (value, a_star, sigma_star)
}

/// ε̂ = ε_max · bump(h/δ) · clamp(gap/κ, 0, 1), bump(s) = (1−s²)² on |s|<1.
///
/// Zero for |h| ≥ δ, zero on Σe (where gap = 0), positive on Σ₀∖Σe,
/// bounded by ε_max < 1/2.
pub fn eps_hat(config: &Configuration, params: &CouplingParams) -> f64 {
    if config.region == Region::SigmaE {
        return 0.0;
    }
    let s = config.h / params.delta;
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let bump = {
        let t = 1.0 - s * s;
        t * t
    };
    let (gap, _, _) = gap_max(config.theta, config.phi, config.psi);
    params.eps_max * bump * (gap / params.kappa).clamp(0.0, 1.0)
}

/// Diffusion matrix and its dispersion factor in the (∂α, ∂β, ∂a, ∂b) basis.
#[derive(Clone, Debug)]
pub struct Dispersion {
    pub a: Matrix4<f64>,
    pub b: Matrix4<f64>,
}

fn o_matrix(a_sign: f64, sigma: f64) -> Matrix2<f64> {
    let (ss, cs) = sigma.sin_cos();
    Matrix2::new(a_sign * cs, a_sign * ss, -ss, cs)
}

/// a = [[I, √(1−ε̂²)Oᵀ], [√(1−ε̂²)O, I]];  B = [[I, 0], [√(1−ε̂²)O, ε̂I]].
pub fn dispersion(choice: &CouplingChoice) -> Dispersion {
    let s = (1.0 - choice.eps_hat * choice.eps_hat).max(0.0).sqrt();
    let o = o_matrix(choice.a_sign, choice.sigma);
    let mut a = Matrix4::identity();
    let mut b = Matrix4::identity();
    for i in 0..2 {
        for j in 0..2 {
            a[(i, 2 + j)] = s * o[(j, i)];
            a[(2 + i, j)] = s * o[(i, j)];
            b[(2 + i, j)] = s * o[(i, j)];
        }
    }
    b[(2, 2)] = choice.eps_hat;
    b[(3, 3)] = choice.eps_hat;
    Dispersion { a, b }
}

/// Γ(v, v) for the unperturbed coupling:
/// ⟨v, ∂α + A cosσ ∂a − sinσ ∂b⟩² + ⟨v, ∂β + A sinσ ∂a + cosσ ∂b⟩²
/// with v in the (∂α, ∂β, ∂a, ∂b) basis.  Equals vᵀ a v at ε̂ = 0.
pub fn gamma_form(a_sign: f64, sigma: f64, v: &Vector4<f64>) -> f64 {
    let (ss, cs) = sigma.sin_cos();
    let w1 = Vector4::new(1.0, 0.0, a_sign * cs, -ss);
    let w2 = Vector4::new(0.0, 1.0, a_sign * ss, cs);
    let p = v.dot(&w1);
    let q = v.dot(&w2);
    p * p + q * q
}

/// Frame-based (Procrustes) optimum of f−g over O(2).
///
/// With uᵢ = (eᵢ·∂α, eᵢ·∂β), wᵢ = (eᵢ·∂a, eᵢ·∂b):
/// f−g = const + 2⟨O, C⟩_F,  C = w₁u₁ᵀ + w₂u₂ᵀ − w₃u₃ᵀ,
/// const = (|u₃|²+|w₃|²) − (|u₁|²+|w₁|²) − (|u₂|²+|w₂|²);
/// the linear functional is maximized over each O(2) component in closed
/// form (the 2×2 orthogonal Procrustes solution per component).
pub fn procrustes_optimal(config: &Configuration) -> (f64, CouplingChoice) {
    let ax = &config.axes;
    let es = [ax.e1, ax.e2, ax.e3];
    let mut c = Matrix2::zeros();
    let mut constant = 0.0;
    for (i, e) in es.iter().enumerate() {
        let u = nalgebra::Vector2::new(e.dot(&config.alpha_dir), e.dot(&config.beta_dir));
        let w = nalgebra::Vector2::new(e.dot(&config.a_dir), e.dot(&config.b_dir));
        let sgn = if i == 2 { -1.0 } else { 1.0 };
        c += sgn * w * u.transpose();
        constant += -sgn * (u.norm_squared() + w.norm_squared());
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for a_sign in [1.0, -1.0] {
        let p = a_sign * c[(0, 0)] + c[(1, 1)];
        let q = a_sign * c[(0, 1)] - c[(1, 0)];
        let value = constant + 2.0 * (p * p + q * q).sqrt();
        let sigma = if p == 0.0 && q == 0.0 {
            0.0
        } else {
            let s = q.atan2(p);
            if s < 0.0 {
                s + 2.0 * std::f64::consts::PI
            } else {
                s
            }
        };
        // Strict improvement keeps the A = −1 branch on ties.
        let take = match best {
            None => true,
            Some((bv, _, _)) => value > bv + TOL_SIGMA,
        };
        if take {
            best = Some((value, a_sign, sigma));
        } else if let Some((bv, ba, _)) = best {
            if (value - bv).abs() <= TOL_SIGMA && ba > 0.0 {
                best = Some((value, a_sign, sigma));
            }
        }
    }
    let (value, a_sign, sigma) = best.unwrap();
    (
        value,
        CouplingChoice {
            a_sign,
            sigma,
            eps_hat: 0.0,
        },
    )
}

/// Full selection pipeline for one configuration: optimal (A, σ) with the
/// Σ₀ tie-break, ε̂ from the bump formula, and the realized rate pair.
pub fn choose_coupling(
    config: &Configuration,
    params: &CouplingParams,
) -> (CouplingChoice, RatePair) {
    let (_, mut a_sign, mut sigma) = gap_max(config.theta, config.phi, config.psi);
    if matches!(config.region, Region::Sigma0 | Region::SigmaE) {
        a_sign = select_on_sigma0(config);
        sigma = optimal_sigma(config.theta, config.phi, config.psi, a_sign);
    }
    let eh = eps_hat(config, params);
    let rates = rate_pair(config.theta, config.phi, config.psi, sigma, a_sign);
    (
        CouplingChoice {
            a_sign,
            sigma,
            eps_hat: eh,
        },
        rates,
    )
}
