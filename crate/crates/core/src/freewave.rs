//! The free-particle wave family and its probability-density waves.
//!
//! Every state carries a travelling envelope: the incoming branch decays as
//! exp[(R/2)(t − x/v)] ahead of the peak at x = vt, the outgoing branch is its
//! mirror image behind the peak. At the peak both reduce to the plane wave
//! exp[i(kx − ωt)].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::numeric::{diff, integrate};
use crate::types::{Branch, FreeWaveParams, PhysicalConstants};

/// Relative slack when testing which side of x = vt a point lies on.
pub const REGION_SLACK: f64 = 1e-12;

/// Quadrature truncation, in units of the envelope length v/R.
pub const TAIL_LENGTHS: f64 = 40.0;

/// Uniform spatial grid at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub t: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize, t: f64) -> Result<Self> {
        for (name, v) in [("x_min", x_min), ("x_max", x_max), ("t", t)] {
            ensure_finite(name, v)?;
        }
        if x_min >= x_max {
            return Err(invalid("grid", format!("x_min {x_min} must be below x_max {x_max}")));
        }
        if n < 3 {
            return Err(invalid("grid", format!("need at least 3 points, got {n}")));
        }
        Ok(Self { x_min, x_max, n, t })
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.n).map(move |i| {
            if i == self.n - 1 {
                self.x_max
            } else {
                self.x_min + i as f64 * h
            }
        })
    }
}

/// ω from ħω = ħ²k²/2m − ħ²R²/8mv².
pub fn dispersion_omega(k: f64, rate: f64, v: f64, constants: PhysicalConstants) -> Result<f64> {
    ensure_finite("k", k)?;
    ensure_finite("rate", rate)?;
    ensure_finite("v", v)?;
    if v <= 0.0 {
        return Err(invalid("v", format!("speed must be positive, got {v}")));
    }
    let hbar = constants.hbar();
    let m = constants.mass();
    Ok(hbar * k * k / (2.0 * m) - hbar * rate * rate / (8.0 * m * v * v))
}

/// Smallest momentum compatible with zero energy: ±ħR/2v.
pub fn min_momentum(rate: f64, v: f64, constants: PhysicalConstants) -> Result<(f64, f64)> {
    ensure_finite("rate", rate)?;
    ensure_finite("v", v)?;
    if v <= 0.0 {
        return Err(invalid("v", format!("speed must be positive, got {v}")));
    }
    let p = constants.hbar() * rate / (2.0 * v);
    Ok((p, -p))
}

fn check_region(params: &FreeWaveParams, x: f64, t: f64) -> Result<()> {
    ensure_finite("x", x)?;
    ensure_finite("t", t)?;
    let offset = params.offset_from_peak(x, t);
    let slack = REGION_SLACK * x.abs().max(1.0);
    let ok = match params.branch() {
        Branch::Incoming => offset >= -slack,
        Branch::Outgoing => offset <= slack,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::RegionMismatch {
            branch: params.branch(),
            x,
            t,
        })
    }
}

/// Branch formula without the region check. Stencils that stay inside the
/// guard band use this directly.
pub(crate) fn psi_formula(params: &FreeWaveParams, x: f64, t: f64) -> Complex64 {
    let envelope = params.branch().sign() * 0.5 * params.rate() * (t - x / params.speed());
    let phase = params.k() * x - params.omega() * t;
    Complex64::new(envelope, phase).exp()
}

pub fn psi_free(params: &FreeWaveParams, x: f64, t: f64) -> Result<Complex64> {
    check_region(params, x, t)?;
    Ok(psi_formula(params, x, t))
}

pub fn prob_density_free(params: &FreeWaveParams, x: f64, t: f64) -> Result<f64> {
    check_region(params, x, t)?;
    Ok((params.branch().sign() * params.rate() * (t - x / params.speed())).exp())
}

/// ∫ P dx over the branch's half line, in closed form: v/R.
pub fn total_probability(params: &FreeWaveParams) -> Result<f64> {
    if params.rate() == 0.0 {
        return Err(Error::DivergentNormalization);
    }
    Ok(params.speed() / params.rate())
}

/// Quadrature of P over [vt, vt + 40 v/R] (or its mirror for the outgoing branch).
pub fn total_probability_quadrature(params: &FreeWaveParams, t: f64) -> Result<f64> {
    if params.rate() == 0.0 {
        return Err(Error::DivergentNormalization);
    }
    let peak = params.speed() * t;
    let length = TAIL_LENGTHS * params.speed() / params.rate();
    let (a, b) = match params.branch() {
        Branch::Incoming => (peak, peak + length),
        Branch::Outgoing => (peak - length, peak),
    };
    let p = *params;
    let tol = 1e-14 * params.speed() / params.rate();
    integrate(move |x| psi_formula(&p, x, t).norm_sqr(), a, b, tol)
}

/// Sets R = v (unit total probability) and re-derives ω.
pub fn normalize_state(params: &FreeWaveParams) -> Result<FreeWaveParams> {
    crate::types::make_free_state(params.speed(), params.speed(), params.constants(), params.branch())
}

/// How derivatives are evaluated by the residual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Derivatives {
    /// Closed-form derivatives of the branch formula.
    Analytic,
    /// Three-point central differences with steps h in x and t; O(h²).
    CentralDifference { h: f64 },
    /// Central differences starting at step h, Richardson-extrapolated.
    Richardson { h: f64 },
}

impl Derivatives {
    fn step(&self) -> f64 {
        match *self {
            Derivatives::Analytic => 0.0,
            Derivatives::CentralDifference { h } | Derivatives::Richardson { h } => h,
        }
    }
}

/// Checks that every grid point sits on the branch side of x = vt with a
/// guard band of three difference steps (in x, and in vt for the time stencil).
fn check_guard(params: &FreeWaveParams, grid: &Grid1D, h: f64) -> Result<()> {
    let peak = params.speed() * grid.t;
    let guard = 3.0 * h * params.speed().max(1.0);
    for x in [grid.x_min, grid.x_max] {
        let offset = x - peak;
        let inside = match params.branch() {
            Branch::Incoming => offset >= guard,
            Branch::Outgoing => offset <= -guard,
        };
        let on_side = match params.branch() {
            Branch::Incoming => offset >= -REGION_SLACK * x.abs().max(1.0),
            Branch::Outgoing => offset <= REGION_SLACK * x.abs().max(1.0),
        };
        if h == 0.0 && !on_side || h > 0.0 && !inside {
            return Err(Error::StraddlesMeasurementPoint { mp: peak, guard });
        }
    }
    Ok(())
}

/// max over the grid of |iħ ∂ψ/∂t + (ħ²/2m) ∂²ψ/∂x²|.
pub fn schrodinger_residual(params: &FreeWaveParams, grid: &Grid1D, method: Derivatives) -> Result<f64> {
    let h = method.step();
    if !(h >= 0.0 && h.is_finite()) {
        return Err(invalid("h", "difference step must be finite and non-negative"));
    }
    if h == 0.0 && method != Derivatives::Analytic {
        return Err(invalid("h", "difference step must be positive"));
    }
    check_guard(params, grid, h)?;
    let c = params.constants();
    let hbar = c.hbar();
    let i = Complex64::i();
    let t = grid.t;
    let sigma = params.branch().sign();
    let time_rate = Complex64::new(sigma * 0.5 * params.rate(), -params.omega());
    let space_rate = Complex64::new(-sigma * 0.5 * params.rate() / params.speed(), params.k());

    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let (psi_t, psi_xx) = match method {
            Derivatives::Analytic => {
                let psi = psi_formula(params, x, t);
                (time_rate * psi, space_rate * space_rate * psi)
            }
            Derivatives::CentralDifference { h } => {
                let dt = (psi_formula(params, x, t + h) - psi_formula(params, x, t - h)) / (2.0 * h);
                let dxx = (psi_formula(params, x + h, t) - psi_formula(params, x, t) * 2.0
                    + psi_formula(params, x - h, t))
                    / (h * h);
                (dt, dxx)
            }
            Derivatives::Richardson { h } => {
                let in_t = |s: f64| psi_formula(params, x, s);
                let in_x = |s: f64| psi_formula(params, s, t);
                (
                    diff::real_derivative(&in_t, t, h),
                    diff::real_second_derivative(&in_x, x, h),
                )
            }
        };
        let r = (i * hbar * psi_t + psi_xx * c.kinetic()).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_free_state;
    use approx::assert_relative_eq;

    fn state(v: f64, rate: f64, branch: Branch) -> FreeWaveParams {
        make_free_state(v, rate, PhysicalConstants::default(), branch).unwrap()
    }

    #[test]
    fn dispersion_examples() {
        let c = PhysicalConstants::default();
        assert_relative_eq!(dispersion_omega(1.0, 1.0, 1.0, c).unwrap(), 0.375);
        assert_eq!(dispersion_omega(1.0, 0.0, 1.0, c).unwrap(), 0.5);
        assert_relative_eq!(dispersion_omega(2.0, 2.0, 2.0, c).unwrap(), 1.875);
        assert!(dispersion_omega(1.0, f64::NAN, 1.0, c).is_err());
    }

    #[test]
    fn min_momentum_examples() {
        let c = PhysicalConstants::default();
        assert_eq!(min_momentum(1.0, 1.0, c).unwrap(), (0.5, -0.5));
        assert_eq!(min_momentum(0.0, 1.0, c).unwrap().0, 0.0);
        assert_eq!(min_momentum(2.0, 1.0, c).unwrap(), (1.0, -1.0));
    }

    #[test]
    fn psi_at_peak_is_plane_wave() {
        let s = state(1.0, 1.0, Branch::Incoming);
        let psi = psi_free(&s, 2.0, 2.0).unwrap();
        assert_relative_eq!(psi.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(psi.arg(), 1.25, epsilon = 1e-14);
        let out = psi_free(&s.with_branch(Branch::Outgoing), 2.0, 2.0).unwrap();
        assert!((out - psi).norm() < 1e-15);
    }

    #[test]
    fn incoming_envelope() {
        let s = state(1.0, 1.0, Branch::Incoming);
        assert_relative_eq!(psi_free(&s, 3.0, 1.0).unwrap().norm(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(
            prob_density_free(&s, 3.0, 1.0).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn outgoing_envelope() {
        let s = state(1.0, 1.0, Branch::Outgoing);
        assert_relative_eq!(
            prob_density_free(&s, 0.0, 2.0).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn region_mismatch_is_an_error() {
        let s = state(1.0, 1.0, Branch::Incoming);
        assert!(matches!(psi_free(&s, 0.5, 1.0), Err(Error::RegionMismatch { .. })));
        let o = s.with_branch(Branch::Outgoing);
        assert!(matches!(
            prob_density_free(&o, 3.0, 1.0),
            Err(Error::RegionMismatch { .. })
        ));
    }

    #[test]
    fn total_probability_examples() {
        assert_eq!(total_probability(&state(2.0, 1.0, Branch::Incoming)).unwrap(), 2.0);
        assert_eq!(total_probability(&state(1.0, 1.0, Branch::Incoming)).unwrap(), 1.0);
        assert_eq!(
            total_probability(&state(1.0, 0.0, Branch::Incoming)),
            Err(Error::DivergentNormalization)
        );
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        for (v, r) in [(2.0, 1.0), (1.0, 1.0), (0.3, 7.0), (9.0, 0.2)] {
            for branch in [Branch::Incoming, Branch::Outgoing] {
                let s = state(v, r, branch);
                let q = total_probability_quadrature(&s, 1.3).unwrap();
                assert_relative_eq!(q, v / r, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_state(&state(1.0, 3.0, Branch::Incoming)).unwrap();
        assert_eq!(n.rate(), 1.0);
        assert_relative_eq!(n.omega(), 0.375);
        let s = state(1.0, 1.0, Branch::Incoming);
        assert_eq!(normalize_state(&s).unwrap(), s);
        let n = normalize_state(&state(2.0, 0.5, Branch::Incoming)).unwrap();
        assert_eq!(n.rate(), 2.0);
        assert_eq!(total_probability(&n).unwrap(), 1.0);
    }

    #[test]
    fn residual_examples() {
        let s = state(1.0, 1.0, Branch::Incoming);
        let grid = Grid1D::new(2.0, 4.0, 201, 1.0).unwrap();
        assert!(schrodinger_residual(&s, &grid, Derivatives::Analytic).unwrap() < 1e-12);
        assert!(schrodinger_residual(&s, &grid, Derivatives::CentralDifference { h: 1e-3 }).unwrap() < 1e-6);

        // Wrong ω: residual equals the dispersion gap times |ψ|.
        let wrong = s.with_omega(0.5).unwrap();
        let near = Grid1D::new(1.01, 3.0, 200, 1.0).unwrap();
        let r = schrodinger_residual(&wrong, &near, Derivatives::Analytic).unwrap();
        let min_psi = psi_free(&wrong, 3.0, 1.0).unwrap().norm();
        assert!(r >= 0.125 * min_psi);
        assert!(r > 0.1);
        assert_relative_eq!(r, 0.125 * (-0.005f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn residual_is_second_order() {
        let s = state(1.0, 1.0, Branch::Incoming);
        let wrong_grid = Grid1D::new(2.0, 4.0, 51, 1.0).unwrap();
        let r1 = schrodinger_residual(&s, &wrong_grid, Derivatives::CentralDifference { h: 2e-2 }).unwrap();
        let r2 = schrodinger_residual(&s, &wrong_grid, Derivatives::CentralDifference { h: 1e-2 }).unwrap();
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.05, "observed order {order}");
    }

    #[test]
    fn grid_across_the_peak_is_rejected() {
        let s = state(1.0, 1.0, Branch::Incoming);
        let grid = Grid1D::new(0.0, 2.0, 21, 1.0).unwrap();
        assert!(matches!(
            schrodinger_residual(&s, &grid, Derivatives::Analytic),
            Err(Error::StraddlesMeasurementPoint { .. })
        ));
        // Within the guard band of the difference stencil.
        let grid = Grid1D::new(1.002, 2.0, 21, 1.0).unwrap();
        assert!(schrodinger_residual(&s, &grid, Derivatives::CentralDifference { h: 1e-3 }).is_err());
    }

    #[test]
    fn analytic_residual_vanishes_iff_dispersion_holds() {
        let s = state(1.5, 0.7, Branch::Outgoing);
        let grid = Grid1D::new(-3.0, 0.0, 31, 1.0).unwrap();
        assert!(schrodinger_residual(&s, &grid, Derivatives::Analytic).unwrap() < 1e-12);
        let off = s.with_omega(s.omega() + 1e-6).unwrap();
        assert!(schrodinger_residual(&off, &grid, Derivatives::Analytic).unwrap() > 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn branches_meet_at_the_peak(v in 0.1f64..10.0, rate in 0.0f64..10.0, t in -5.0f64..5.0) {
            let s = state(v, rate, Branch::Incoming);
            let x = v * t;
            let a = psi_free(&s, x, t).unwrap();
            let b = psi_free(&s.with_branch(Branch::Outgoing), x, t).unwrap();
            let plane = Complex64::new(0.0, s.k() * x - s.omega() * t).exp();
            proptest::prop_assert!((a - plane).norm() < 1e-12);
            proptest::prop_assert!((b - plane).norm() < 1e-12);
        }

        #[test]
        fn envelopes_are_monotone(v in 0.1f64..10.0, rate in 0.01f64..10.0, t in -5.0f64..5.0,
                                  d in 0.001f64..2.0, step in 0.001f64..1.0) {
            let s = state(v, rate, Branch::Incoming);
            let x = v * t + d;
            proptest::prop_assert!(prob_density_free(&s, x + step, t).unwrap() < prob_density_free(&s, x, t).unwrap());
            let o = s.with_branch(Branch::Outgoing);
            let x = v * t - d;
            proptest::prop_assert!(prob_density_free(&o, x - step, t).unwrap() < prob_density_free(&o, x, t).unwrap());
        }

        #[test]
        fn normalization_gives_unit_probability(v in 0.01f64..100.0, rate in 0.0f64..100.0) {
            let n = normalize_state(&state(v, rate, Branch::Incoming)).unwrap();
            proptest::prop_assert!((total_probability(&n).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
