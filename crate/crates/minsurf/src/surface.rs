//! Minimal surfaces given by Weierstrass data.
//!
//! A surface is described by a pair of functions `(wf, wg)` of a complex
//! chart coordinate: `wf` holomorphic and nonvanishing, `wg` the
//! stereographically projected Gauss map.  From the pair we evaluate the
//! immersion frame, unit normal, conformal factor and Gauss curvature at
//! any chart point.  A small catalog (plane, Enneper, catenoid, helicoid)
//! carries closed-form immersions; everything else integrates the
//! Weierstrass differential numerically.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

/// Guard threshold below which the metric is treated as degenerate.
pub const WF_GUARD: f64 = 1e-12;

pub type Holo = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("conformal factor degenerate: |wf| = {abs_wf:e} below guard")]
    DegenerateMetric { abs_wf: f64 },
    #[error("chart step leaves the domain (boundary = {boundary})")]
    DomainExit { boundary: bool },
    #[error("bad surface parameters: {0}")]
    BadParams(String),
}

/// Chart domain of the Weierstrass data.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartDomain {
    Disk {
        radius: f64,
        boundary: bool,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
        boundary: bool,
    },
    Rectangle {
        u_min: f64,
        u_max: f64,
        v_min: f64,
        v_max: f64,
        boundary: bool,
    },
    /// Annular sector `r_in < |z| < r_out`, `arg_min < Arg z < arg_max`.
    /// Used for the helicoid so the immersion stays single-valued.
    Sector {
        r_in: f64,
        r_out: f64,
        arg_min: f64,
        arg_max: f64,
        boundary: bool,
    },
}

impl ChartDomain {
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            ChartDomain::Disk { radius, .. } => z.norm() < radius,
            ChartDomain::Annulus { r_in, r_out, .. } => {
                let r = z.norm();
                r > r_in && r < r_out
            }
            ChartDomain::Rectangle {
                u_min,
                u_max,
                v_min,
                v_max,
                ..
            } => z.re > u_min && z.re < u_max && z.im > v_min && z.im < v_max,
            ChartDomain::Sector {
                r_in,
                r_out,
                arg_min,
                arg_max,
                ..
            } => {
                let r = z.norm();
                let a = z.arg();
                r > r_in && r < r_out && a > arg_min && a < arg_max
            }
        }
    }

    pub fn has_boundary(&self) -> bool {
        match *self {
            ChartDomain::Disk { boundary, .. }
            | ChartDomain::Annulus { boundary, .. }
            | ChartDomain::Rectangle { boundary, .. }
            | ChartDomain::Sector { boundary, .. } => boundary,
        }
    }
}

/// Holomorphic pair defining a minimal surface.
#[derive(Clone)]
pub struct WeierstrassPair {
    pub wf: Holo,
    pub wg: Holo,
    pub wg_deriv: Holo,
    pub domain: ChartDomain,
}

impl std::fmt::Debug for WeierstrassPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeierstrassPair")
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// Everything the engine needs at one chart point.
#[derive(Clone, Debug)]
pub struct SurfaceState {
    pub z: Complex64,
    /// Position in R^3.
    pub x: Vector3<f64>,
    /// Unit normal (inverse stereographic image of `wg`).
    pub m: Vector3<f64>,
    /// Conformal factor: |frame_u|^2 = |frame_v|^2 = lambda.
    pub lambda: f64,
    /// Gauss curvature, nonpositive.
    pub k: f64,
    pub frame_u: Vector3<f64>,
    pub frame_v: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Plane,
    Enneper,
    Catenoid,
    Helicoid,
    GenericWeierstrass,
}

/// A surface plus its placement in R^3.
///
/// `rotation`/`offset` move the immersion rigidly; curvature and the
/// conformal factor are unaffected.
#[derive(Clone, Debug)]
pub struct SurfaceModel {
    pub kind: SurfaceKind,
    pub pair: WeierstrassPair,
    /// Chart point whose local immersion value anchors the integral.
    pub basepoint: Complex64,
    pub rotation: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

/// Inverse stereographic projection of the Gauss map value.
///
/// `0 -> (0,0,-1)`; the pole (`|wg| -> inf`) maps to `(0,0,1)`.
pub fn gauss_normal(wg_val: Complex64) -> Vector3<f64> {
    let n2 = wg_val.norm_sqr();
    if !n2.is_finite() || n2 > 1e300 {
        return Vector3::new(0.0, 0.0, 1.0);
    }
    let d = 1.0 + n2;
    Vector3::new(2.0 * wg_val.re / d, 2.0 * wg_val.im / d, (n2 - 1.0) / d)
}

/// lambda = ( |wf| (1+|wg|^2) / 2 )^2
pub fn conformal_factor(wf_val: Complex64, wg_val: Complex64) -> Result<f64, SurfaceError> {
    let abs_wf = wf_val.norm();
    if abs_wf < WF_GUARD {
        return Err(SurfaceError::DegenerateMetric { abs_wf });
    }
    let s = abs_wf * (1.0 + wg_val.norm_sqr()) / 2.0;
    Ok(s * s)
}

/// K = -( 4|wg'| / (|wf| (1+|wg|^2)^2) )^2
pub fn curvature(
    wf_val: Complex64,
    wg_val: Complex64,
    wg_deriv_val: Complex64,
) -> Result<f64, SurfaceError> {
    let abs_wf = wf_val.norm();
    if abs_wf < WF_GUARD {
        return Err(SurfaceError::DegenerateMetric { abs_wf });
    }
    let d = 1.0 + wg_val.norm_sqr();
    let s = 4.0 * wg_deriv_val.norm() / (abs_wf * d * d);
    Ok(-(s * s))
}

/// Weierstrass differential Phi = ( wf(1-wg^2)/2, i wf(1+wg^2)/2, wf wg ).
pub fn weierstrass_phi(wf_val: Complex64, wg_val: Complex64) -> [Complex64; 3] {
    let g2 = wg_val * wg_val;
    let i = Complex64::new(0.0, 1.0);
    [
        wf_val * (Complex64::new(1.0, 0.0) - g2) / 2.0,
        i * wf_val * (Complex64::new(1.0, 0.0) + g2) / 2.0,
        wf_val * wg_val,
    ]
}

/// Coordinate frame of the immersion: frame_u = Re Phi, frame_v = -Im Phi.
pub fn immersion_differential(
    wf_val: Complex64,
    wg_val: Complex64,
) -> Result<(Vector3<f64>, Vector3<f64>), SurfaceError> {
    if wf_val.norm() < WF_GUARD {
        return Err(SurfaceError::DegenerateMetric {
            abs_wf: wf_val.norm(),
        });
    }
    let phi = weierstrass_phi(wf_val, wg_val);
    let fu = Vector3::new(phi[0].re, phi[1].re, phi[2].re);
    let fv = Vector3::new(-phi[0].im, -phi[1].im, -phi[2].im);
    Ok((fu, fv))
}

impl SurfaceModel {
    fn closed_form_local(&self, z: Complex64) -> Option<Vector3<f64>> {
        match self.kind {
            SurfaceKind::Plane => Some(Vector3::new(z.re, -z.im, 0.0)),
            SurfaceKind::Enneper => {
                // Integral of (1-z^2, i(1+z^2), 2z).
                let z3 = z * z * z / 3.0;
                let p0 = z - z3;
                let p1 = Complex64::new(0.0, 1.0) * (z + z3);
                let p2 = z * z;
                Some(Vector3::new(p0.re, p1.re, p2.re))
            }
            SurfaceKind::Catenoid => {
                // Integral of (1/z^2 - 1, i(1/z^2 + 1), 2/z).
                let inv = z.inv();
                let p0 = -inv - z;
                let p1 = Complex64::new(0.0, 1.0) * (z - inv);
                Some(Vector3::new(p0.re, p1.re, 2.0 * z.norm().ln()))
            }
            SurfaceKind::Helicoid => {
                // Integral of (i/z^2 - i, -(1/z^2 + 1), 2i/z); principal branch.
                let inv = z.inv();
                let i = Complex64::new(0.0, 1.0);
                let p0 = -i * inv - i * z;
                let p1 = inv - z;
                Some(Vector3::new(p0.re, p1.re, -2.0 * z.arg()))
            }
            SurfaceKind::GenericWeierstrass => None,
        }
    }

    /// Local immersion value (before the rigid placement).
    fn local_x(&self, z: Complex64) -> Result<Vector3<f64>, SurfaceError> {
        if let Some(x) = self.closed_form_local(z) {
            return Ok(x);
        }
        // Midpoint rule along the straight chart segment from the basepoint.
        let dz = z - self.basepoint;
        let n = ((dz.norm() / 1e-2).ceil() as usize).max(64);
        let step = dz / n as f64;
        let mut x = Vector3::zeros();
        for i in 0..n {
            let mid = self.basepoint + step * (i as f64 + 0.5);
            let phi = weierstrass_phi((self.pair.wf)(mid), (self.pair.wg)(mid));
            x += Vector3::new(
                (phi[0] * step).re,
                (phi[1] * step).re,
                (phi[2] * step).re,
            );
        }
        Ok(x)
    }

    fn state_with_x(&self, z: Complex64, x: Vector3<f64>) -> Result<SurfaceState, SurfaceError> {
        let wf = (self.pair.wf)(z);
        let wg = (self.pair.wg)(z);
        let wgd = (self.pair.wg_deriv)(z);
        let lambda = conformal_factor(wf, wg)?;
        let k = curvature(wf, wg, wgd)?;
        let (fu, fv) = immersion_differential(wf, wg)?;
        Ok(SurfaceState {
            z,
            x,
            m: self.rotation * gauss_normal(wg),
            lambda,
            k,
            frame_u: self.rotation * fu,
            frame_v: self.rotation * fv,
        })
    }

    /// Full state at a chart point inside the domain.
    pub fn state_at(&self, z: Complex64) -> Result<SurfaceState, SurfaceError> {
        if !self.pair.domain.contains(z) {
            return Err(SurfaceError::DomainExit {
                boundary: self.pair.domain.has_boundary(),
            });
        }
        let x = self.rotation * self.local_x(z)? + self.offset;
        self.state_with_x(z, x)
    }

    pub fn with_offset(mut self, offset: Vector3<f64>) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_rotation(mut self, rotation: Matrix3<f64>) -> Self {
        self.rotation = rotation;
        self
    }
}

/// Advance the chart coordinate by `dz`.
///
/// Catalog surfaces re-evaluate the closed-form immersion; generic
/// Weierstrass data accumulates the midpoint-rule increment
/// `X += Re( Phi(z + dz/2) dz )`.
pub fn advance_state(
    model: &SurfaceModel,
    state: &SurfaceState,
    dz: Complex64,
) -> Result<SurfaceState, SurfaceError> {
    if dz == Complex64::new(0.0, 0.0) {
        return Ok(state.clone());
    }
    let z_new = state.z + dz;
    if !model.pair.domain.contains(z_new) {
        return Err(SurfaceError::DomainExit {
            boundary: model.pair.domain.has_boundary(),
        });
    }
    if let Some(xl) = model.closed_form_local(z_new) {
        let x = model.rotation * xl + model.offset;
        model.state_with_x(z_new, x)
    } else {
        let mid = state.z + dz / 2.0;
        let phi = weierstrass_phi((model.pair.wf)(mid), (model.pair.wg)(mid));
        let inc = Vector3::new((phi[0] * dz).re, (phi[1] * dz).re, (phi[2] * dz).re);
        let x = state.x + model.rotation * inc;
        model.state_with_x(z_new, x)
    }
}

/// Incremental-only advance for cross-checking closed forms.
pub fn advance_state_incremental(
    model: &SurfaceModel,
    state: &SurfaceState,
    dz: Complex64,
) -> Result<SurfaceState, SurfaceError> {
    let z_new = state.z + dz;
    if !model.pair.domain.contains(z_new) {
        return Err(SurfaceError::DomainExit {
            boundary: model.pair.domain.has_boundary(),
        });
    }
    let mid = state.z + dz / 2.0;
    let phi = weierstrass_phi((model.pair.wf)(mid), (model.pair.wg)(mid));
    let inc = Vector3::new((phi[0] * dz).re, (phi[1] * dz).re, (phi[2] * dz).re);
    let x = state.x + model.rotation * inc;
    model.state_with_x(z_new, x)
}

fn const_fn(c: Complex64) -> Holo {
    Arc::new(move |_| c)
}

/// Catalog constructors.
pub fn make_plane(radius: f64, boundary: bool) -> Result<SurfaceModel, SurfaceError> {
    if radius <= 0.0 {
        return Err(SurfaceError::BadParams("plane radius must be positive".into()));
    }
    Ok(SurfaceModel {
        kind: SurfaceKind::Plane,
        pair: WeierstrassPair {
            wf: const_fn(Complex64::new(2.0, 0.0)),
            wg: const_fn(Complex64::new(0.0, 0.0)),
            wg_deriv: const_fn(Complex64::new(0.0, 0.0)),
            domain: ChartDomain::Disk { radius, boundary },
        },
        basepoint: Complex64::new(0.0, 0.0),
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

pub fn make_enneper(radius: f64, boundary: bool) -> Result<SurfaceModel, SurfaceError> {
    if radius <= 0.0 {
        return Err(SurfaceError::BadParams("enneper radius must be positive".into()));
    }
    Ok(SurfaceModel {
        kind: SurfaceKind::Enneper,
        pair: WeierstrassPair {
            wf: const_fn(Complex64::new(2.0, 0.0)),
            wg: Arc::new(|z| z),
            wg_deriv: const_fn(Complex64::new(1.0, 0.0)),
            domain: ChartDomain::Disk { radius, boundary },
        },
        basepoint: Complex64::new(0.0, 0.0),
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

pub fn make_catenoid(r_in: f64, r_out: f64, boundary: bool) -> Result<SurfaceModel, SurfaceError> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(SurfaceError::BadParams(format!(
            "catenoid annulus radii must satisfy 0 < r_in < r_out, got ({r_in}, {r_out})"
        )));
    }
    Ok(SurfaceModel {
        kind: SurfaceKind::Catenoid,
        pair: WeierstrassPair {
            wf: Arc::new(|z| Complex64::new(2.0, 0.0) / (z * z)),
            wg: Arc::new(|z| z),
            wg_deriv: const_fn(Complex64::new(1.0, 0.0)),
            domain: ChartDomain::Annulus { r_in, r_out, boundary },
        },
        basepoint: Complex64::new(1.0, 0.0),
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

/// Helicoid on a simply connected sector of the annulus, so the third
/// coordinate (a multiple of Arg z) stays single-valued.
pub fn make_helicoid(r_in: f64, r_out: f64, boundary: bool) -> Result<SurfaceModel, SurfaceError> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(SurfaceError::BadParams(format!(
            "helicoid radii must satisfy 0 < r_in < r_out, got ({r_in}, {r_out})"
        )));
    }
    let arg = 3.0 * std::f64::consts::FRAC_PI_4;
    Ok(SurfaceModel {
        kind: SurfaceKind::Helicoid,
        pair: WeierstrassPair {
            wf: Arc::new(|z| Complex64::new(0.0, 2.0) / (z * z)),
            wg: Arc::new(|z| z),
            wg_deriv: const_fn(Complex64::new(1.0, 0.0)),
            domain: ChartDomain::Sector {
                r_in,
                r_out,
                arg_min: -arg,
                arg_max: arg,
                boundary,
            },
        },
        basepoint: Complex64::new(1.0, 0.0),
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

/// Plane with a constant, nonzero Gauss map value: tilts the plane so its
/// normal is the inverse stereographic image of `wg_const`.
pub fn make_tilted_plane(
    wg_const: Complex64,
    radius: f64,
    boundary: bool,
) -> Result<SurfaceModel, SurfaceError> {
    if radius <= 0.0 {
        return Err(SurfaceError::BadParams("plane radius must be positive".into()));
    }
    Ok(SurfaceModel {
        kind: SurfaceKind::GenericWeierstrass,
        pair: WeierstrassPair {
            wf: const_fn(Complex64::new(2.0, 0.0)),
            wg: const_fn(wg_const),
            wg_deriv: const_fn(Complex64::new(0.0, 0.0)),
            domain: ChartDomain::Disk { radius, boundary },
        },
        basepoint: Complex64::new(0.0, 0.0),
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

pub fn make_generic(
    pair: WeierstrassPair,
    basepoint: Complex64,
) -> Result<SurfaceModel, SurfaceError> {
    if !pair.domain.contains(basepoint) {
        return Err(SurfaceError::BadParams(
            "basepoint must lie inside the chart domain".into(),
        ));
    }
    Ok(SurfaceModel {
        kind: SurfaceKind::GenericWeierstrass,
        pair,
        basepoint,
        rotation: Matrix3::identity(),
        offset: Vector3::zeros(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gauss_normal_examples() {
        assert_abs_diff_eq!(gauss_normal(c(0.0, 0.0)), Vector3::new(0.0, 0.0, -1.0));
        assert_abs_diff_eq!(gauss_normal(c(1e200, 0.0)), Vector3::new(0.0, 0.0, 1.0));
        assert_abs_diff_eq!(
            gauss_normal(c(1.0, 0.0)),
            Vector3::new(1.0, 0.0, 0.0),
            epsilon = 1e-15
        );
        for &g in &[c(0.3, -1.2), c(2.0, 5.0), c(-0.1, 0.0)] {
            assert_relative_eq!(gauss_normal(g).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conformal_factor_examples() {
        assert_relative_eq!(conformal_factor(c(2.0, 0.0), c(0.0, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(conformal_factor(c(2.0, 0.0), c(1.0, 0.0)).unwrap(), 4.0);
        assert!(matches!(
            conformal_factor(c(1e-15, 0.0), c(1.0, 0.0)),
            Err(SurfaceError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(curvature(c(2.0, 0.0), c(0.3, 0.1), c(0.0, 0.0)).unwrap(), -0.0);
        // Enneper at the origin.
        assert_relative_eq!(curvature(c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap(), -4.0);
        // Catenoid at z = 1 (wf = 2/z^2).
        assert_relative_eq!(curvature(c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap(), -0.25);
    }

    #[test]
    fn immersion_differential_examples() {
        let (fu, fv) = immersion_differential(c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(fu, Vector3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(fv, Vector3::new(0.0, -1.0, 0.0));
        let (fu, fv) = immersion_differential(c(2.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(fu, Vector3::new(0.0, 0.0, 2.0));
        assert_abs_diff_eq!(fv, Vector3::new(0.0, -2.0, 0.0));
        assert_abs_diff_eq!(fu.dot(&fv), 0.0);
    }

    fn probe_points(model: &SurfaceModel, n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let z = match model.pair.domain {
                ChartDomain::Disk { radius, .. } => c(
                    rng.gen_range(-radius..radius),
                    rng.gen_range(-radius..radius),
                ),
                ChartDomain::Annulus { r_out, .. } | ChartDomain::Sector { r_out, .. } => c(
                    rng.gen_range(-r_out..r_out),
                    rng.gen_range(-r_out..r_out),
                ),
                ChartDomain::Rectangle {
                    u_min,
                    u_max,
                    v_min,
                    v_max,
                    ..
                } => c(rng.gen_range(u_min..u_max), rng.gen_range(v_min..v_max)),
            };
            if model.pair.domain.contains(z) {
                out.push(z);
            }
        }
        out
    }

    fn catalog() -> Vec<SurfaceModel> {
        vec![
            make_plane(5.0, false).unwrap(),
            make_enneper(1.5, false).unwrap(),
            make_catenoid(0.5, 2.0, false).unwrap(),
            make_helicoid(0.5, 2.0, false).unwrap(),
            make_tilted_plane(c(0.4, -0.3), 5.0, false).unwrap(),
        ]
    }

    #[test]
    fn catalog_state_invariants_at_probe_points() {
        for model in catalog() {
            for z in probe_points(&model, 1000, 42) {
                let s = model.state_at(z).unwrap();
                assert_relative_eq!(s.m.norm(), 1.0, epsilon = 1e-10);
                assert!(s.m.dot(&s.frame_u).abs() < 1e-10 * s.lambda.sqrt().max(1.0));
                assert!(s.m.dot(&s.frame_v).abs() < 1e-10 * s.lambda.sqrt().max(1.0));
                assert_relative_eq!(s.frame_u.norm_squared(), s.lambda, max_relative = 1e-9);
                assert_relative_eq!(s.frame_v.norm_squared(), s.lambda, max_relative = 1e-9);
                assert!(s.frame_u.dot(&s.frame_v).abs() < 1e-9 * s.lambda);
                assert!(s.k <= 0.0);
                // Unsigned Weierstrass identity lambda * (-K) = (2|wg'|/(1+|wg|^2))^2.
                let wg = (model.pair.wg)(z);
                let wgd = (model.pair.wg_deriv)(z);
                let rhs = {
                    let t = 2.0 * wgd.norm() / (1.0 + wg.norm_sqr());
                    t * t
                };
                assert_abs_diff_eq!(s.lambda * (-s.k), rhs, epsilon = 1e-10 * rhs.max(1.0));
                // Cross-product normal matches gauss_normal (same sign).
                let cross = s.frame_u.cross(&s.frame_v);
                if cross.norm() > 1e-12 {
                    assert_abs_diff_eq!(cross / cross.norm(), s.m, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn advance_state_identity_and_plane_shift() {
        let plane = make_plane(10.0, false).unwrap();
        let s0 = plane.state_at(c(0.0, 0.0)).unwrap();
        let same = advance_state(&plane, &s0, c(0.0, 0.0)).unwrap();
        assert_eq!(same.z, s0.z);
        assert_abs_diff_eq!(same.x, s0.x);
        let moved = advance_state(&plane, &s0, c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(moved.x, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn advance_state_domain_exit() {
        let cat = make_catenoid(0.5, 2.0, false).unwrap();
        let s = cat.state_at(c(1.9, 0.0)).unwrap();
        match advance_state(&cat, &s, c(0.5, 0.0)) {
            Err(SurfaceError::DomainExit { boundary }) => assert!(!boundary),
            other => panic!("expected DomainExit, got {other:?}"),
        }
    }

    #[test]
    fn incremental_immersion_tracks_closed_form_on_catenoid() {
        let cat = make_catenoid(0.5, 2.0, false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut state = cat.state_at(c(1.0, 0.0)).unwrap();
        for _ in 0..1000 {
            let dz = c(rng.gen_range(-1e-2..1e-2), rng.gen_range(-1e-2..1e-2));
            match advance_state_incremental(&cat, &state, dz) {
                Ok(s) => state = s,
                Err(_) => continue, // step rejected at the domain edge
            }
        }
        let exact = cat.state_at(state.z).unwrap();
        assert!((state.x - exact.x).norm() <= 1e-4, "drift {}", (state.x - exact.x).norm());
    }

    #[test]
    fn bad_params_rejected() {
        assert!(matches!(
            make_catenoid(2.0, 0.5, false),
            Err(SurfaceError::BadParams(_))
        ));
        assert!(make_plane(-1.0, false).is_err());
        assert!(make_helicoid(1.0, 1.0, false).is_err());
    }

    #[test]
    fn plane_lambda_and_curvature_constant() {
        let plane = make_plane(5.0, false).unwrap();
        for z in probe_points(&plane, 50, 3) {
            let s = plane.state_at(z).unwrap();
            assert_relative_eq!(s.lambda, 1.0);
            assert_eq!(s.k, -0.0);
        }
    }
}
