//! Complex eigenvalues of the free-wave family, hermitization at the
//! measurement point, and the complex space-time wave with its commutators.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::freewave::psi_free;
use crate::measurement::{MeasurementEvent, MP_TOLERANCE};
use crate::numeric::diff::{canonical_direction, derivative, second_derivative};
use crate::numeric::integrate;
use crate::types::{Branch, EigenRecord, FreeWaveParams, ObservableKind, PhysicalConstants};

/// Observables with a scalar eigenvalue on the free-wave family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    H,
    HDagger,
    P,
    /// Position of the peak reached from emission time `t0`.
    S {
        t0: f64,
    },
}

impl Observable {
    /// Parses `H`, `Hdagger`, `P` or `S`; `S` needs `t0`.
    pub fn parse(tag: &str, t0: Option<f64>) -> Result<Self> {
        match (tag.trim(), t0) {
            ("H", _) => Ok(Observable::H),
            ("Hdagger" | "H†" | "HDagger", _) => Ok(Observable::HDagger),
            ("P", _) => Ok(Observable::P),
            ("S", Some(t0)) => Ok(Observable::S { t0 }),
            ("S", None) => Err(invalid("t0", "observable S needs an emission time")),
            (other, _) => Err(Error::UnknownObservable(other.to_string())),
        }
    }

    pub fn kind(&self) -> ObservableKind {
        match self {
            Observable::H => ObservableKind::H,
            Observable::HDagger => ObservableKind::HDagger,
            Observable::P => ObservableKind::P,
            Observable::S { .. } => ObservableKind::S,
        }
    }
}

/// Eigenvalue Aψ/ψ away from the measurement point.
///
/// The outgoing branch mirrors the envelope, so every imaginary part changes sign.
pub fn eigenvalue(obs: Observable, state: &FreeWaveParams) -> Complex64 {
    let c = state.constants();
    let hbar = c.hbar();
    let sign = state.branch().sign();
    let (r, v) = (state.rate(), state.speed());
    match obs {
        Observable::H => Complex64::new(hbar * state.omega(), sign * hbar * r / 2.0),
        Observable::HDagger => Complex64::new(hbar * state.omega(), -sign * hbar * r / 2.0),
        Observable::P => Complex64::new(hbar * state.k(), sign * hbar * r / (2.0 * v)),
        Observable::S { t0 } => Complex64::new(v * t0, sign * hbar * r * t0 / (2.0 * c.mass() * v)),
    }
}

/// Applies `obs` to `state` at (x, t). At the measurement point the real
/// (hermitized) value is returned.
pub fn apply_observable(obs: Observable, state: &FreeWaveParams, x: f64, t: f64) -> Result<EigenRecord> {
    psi_free(state, x, t)?;
    if let Observable::S { t0 } = obs {
        ensure_finite("t0", t0)?;
        let latest = state.arrival_time(x);
        if t0 > latest + MP_TOLERANCE * latest.abs().max(1.0) {
            return Err(invalid(
                "t0",
                format!("emission time {t0} is after the arrival time {latest}"),
            ));
        }
    }
    let at_mp = state.offset_from_peak(x, t).abs() <= MP_TOLERANCE * x.abs().max(1.0);
    Ok(EigenRecord::new(obs.kind(), eigenvalue(obs, state), at_mp))
}

/// Drops the imaginary part of a record taken at a measurement event.
pub fn hermitize_at_mp(record: EigenRecord, event: &MeasurementEvent) -> Result<EigenRecord> {
    if !event.is_at_mp() {
        return Err(Error::NotAtMeasurementPoint {
            x: event.x,
            t: event.t,
            offset: event.mismatch,
        });
    }
    Ok(EigenRecord::new(record.observable, record.value, true))
}

/// (H − H†)ψ/ψ: iħR on the incoming branch, −iħR on the outgoing one.
pub fn anti_hermitian_part(state: &FreeWaveParams) -> Complex64 {
    eigenvalue(Observable::H, state) - eigenvalue(Observable::HDagger, state)
}

/// |(HH† − H†H)ψ/ψ|, zero for a normal operator.
pub fn normality_defect(state: &FreeWaveParams) -> f64 {
    let h = eigenvalue(Observable::H, state);
    let hd = eigenvalue(Observable::HDagger, state);
    (h * hd - hd * h).norm()
}

/// A point (x_c, t_c) of complex space-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexCoordinate {
    pub x_c: Complex64,
    pub t_c: Complex64,
    /// True on the canonical embedding x_c = x + ix, t_c = t + it.
    pub canonical: bool,
}

impl ComplexCoordinate {
    pub fn canonical(x: f64, t: f64) -> Self {
        Self {
            x_c: Complex64::new(x, x),
            t_c: Complex64::new(t, t),
            canonical: true,
        }
    }

    pub fn free(x_c: Complex64, t_c: Complex64) -> Self {
        Self {
            x_c,
            t_c,
            canonical: false,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, z) in [("x_c", self.x_c), ("t_c", self.t_c)] {
            ensure_finite(name, z.re)?;
            ensure_finite(name, z.im)?;
        }
        if self.canonical && (self.x_c.re != self.x_c.im || self.t_c.re != self.t_c.im) {
            return Err(invalid(
                "coordinate",
                "canonical coordinates need equal real and imaginary parts",
            ));
        }
        Ok(())
    }
}

/// exp[i k x_c − i ω t_c].
pub fn psi_complex(state: &FreeWaveParams, coord: &ComplexCoordinate) -> Result<Complex64> {
    coord.validate()?;
    Ok(plane(state.k(), state.omega(), coord.x_c, coord.t_c))
}

fn plane(k: f64, omega: f64, x_c: Complex64, t_c: Complex64) -> Complex64 {
    (Complex64::i() * (x_c * k - t_c * omega)).exp()
}

/// exp[(1 − i)(ωt − kx)], the same wave written on the canonical line.
pub fn psi_canonical(state: &FreeWaveParams, x: f64, t: f64) -> Complex64 {
    (Complex64::new(1.0, -1.0) * (state.omega() * t - state.k() * x)).exp()
}

/// Commutators checked on the complex space-time wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommutatorPair {
    /// [x_c, p_c]
    XcPc,
    /// [t_c, H_c] with t_c = (m/2)(x_c p_c⁻¹ + p_c⁻¹ x_c) and H_c = p_c²/2m.
    TcHc,
}

impl fmt::Display for CommutatorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommutatorPair::XcPc => "XcPc",
            CommutatorPair::TcHc => "TcHc",
        })
    }
}

impl FromStr for CommutatorPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "XcPc" | "xp" => Ok(CommutatorPair::XcPc),
            "TcHc" | "tH" => Ok(CommutatorPair::TcHc),
            other => Err(Error::UnknownObservable(other.to_string())),
        }
    }
}

type Wave<'a> = dyn Fn(Complex64) -> Complex64 + 'a;

/// Differential operators on functions of x_c, derivatives taken along the
/// canonical direction.
struct Operators {
    hbar: f64,
    mass: f64,
    h0: f64,
    /// Decay scale along +i used to truncate p⁻¹.
    reach: f64,
}

impl Operators {
    fn new(state: &FreeWaveParams) -> Self {
        let c: PhysicalConstants = state.constants();
        Self {
            hbar: c.hbar(),
            mass: c.mass(),
            h0: 0.2 / state.k(),
            reach: 60.0 / state.k(),
        }
    }

    fn p(&self, f: &Wave, z: Complex64) -> Complex64 {
        -Complex64::i() * self.hbar * derivative(&f, z, canonical_direction(), self.h0)
    }

    fn hamiltonian(&self, f: &Wave, z: Complex64) -> Complex64 {
        -second_derivative(&f, z, canonical_direction(), self.h0) * (self.hbar * self.hbar / (2.0 * self.mass))
    }

    /// p⁻¹ f(z) = (1/ħ) ∫₀^∞ f(z + is) ds, a right inverse of p on waves
    /// decaying towards +i∞.
    fn p_inverse(&self, f: &Wave, z: Complex64) -> Result<Complex64> {
        let scale = f(z).norm().max(f64::MIN_POSITIVE);
        let v: Complex64 = integrate(
            |s| f(z + Complex64::new(0.0, s)),
            0.0,
            self.reach,
            1e-13 * scale * self.reach,
        )?;
        Ok(v / self.hbar)
    }

    fn time(&self, f: &Wave, z: Complex64) -> Result<Complex64> {
        let xf = |w: Complex64| w * f(w);
        Ok((z * self.p_inverse(f, z)? + self.p_inverse(&xf, z)?) * (self.mass / 2.0))
    }
}

/// Mean over `probes` of ((AB − BA)ψ)/ψ. Both pairs give iħ.
pub fn commutator_check(
    pair: CommutatorPair,
    state: &FreeWaveParams,
    probes: &[ComplexCoordinate],
) -> Result<Complex64> {
    if probes.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let ops = Operators::new(state);
    let (k, omega) = (state.k(), state.omega());
    let mut total = Complex64::new(0.0, 0.0);
    for probe in probes {
        probe.validate()?;
        let t_c = probe.t_c;
        let z = probe.x_c;
        let psi = move |x: Complex64| plane(k, omega, x, t_c);
        let value = psi(z);
        if value.norm() < 1e-300 {
            return Err(Error::VanishingWavefunction(value.norm()));
        }
        let commutator = match pair {
            CommutatorPair::XcPc => {
                let xpsi = |w: Complex64| w * psi(w);
                z * ops.p(&psi, z) - ops.p(&xpsi, z)
            }
            CommutatorPair::TcHc => {
                let h_psi = |w: Complex64| ops.hamiltonian(&psi, w);
                let t_psi = |w: Complex64| ops.time(&psi, w).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                let th = ops.time(&h_psi, z)?;
                let ht = ops.hamiltonian(&t_psi, z);
                if !(ht.re.is_finite() && ht.im.is_finite()) {
                    return Err(Error::NoConvergence {
                        what: "inverse momentum quadrature".into(),
                        iterations: 0,
                    });
                }
                th - ht
            }
        };
        total += commutator / value;
    }
    Ok(total / probes.len() as f64)
}

/// |−(ħ²/2m) ∂²ψ/∂x_c² − iħ ∂ψ/∂t_c| and |ψ| at one point.
pub fn complex_schrodinger_defect(state: &FreeWaveParams, coord: &ComplexCoordinate) -> Result<(f64, f64)> {
    coord.validate()?;
    let ops = Operators::new(state);
    let (k, omega) = (state.k(), state.omega());
    let (x_c, t_c) = (coord.x_c, coord.t_c);
    let in_x = |z: Complex64| plane(k, omega, z, t_c);
    let in_t = |s: Complex64| plane(k, omega, x_c, s);
    let h_t = 0.2 / omega.abs().max(k);
    let dt = derivative(&in_t, t_c, canonical_direction(), h_t);
    let residual = ops.hamiltonian(&in_x, x_c) - Complex64::i() * ops.hbar * dt;
    Ok((residual.norm(), in_x(x_c).norm()))
}

/// Max over `probes` of the complex-space-time Schrödinger residual.
pub fn complex_schrodinger_residual(state: &FreeWaveParams, probes: &[ComplexCoordinate]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in probes {
        worst = worst.max(complex_schrodinger_defect(state, p)?.0);
    }
    Ok(worst)
}

/// Phase f(x, t) = kx − ωt carried by a frame moving at speed v.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalileanPhase {
    pub k: f64,
    pub omega: f64,
    pub speed: f64,
    pub constants: PhysicalConstants,
}

pub fn galilean_phase(v: f64, constants: PhysicalConstants) -> Result<GalileanPhase> {
    ensure_finite("v", v)?;
    if v <= 0.0 {
        return Err(invalid("v", "speed must be positive"));
    }
    let k = constants.mass() * v / constants.hbar();
    Ok(GalileanPhase {
        k,
        omega: k * v / 2.0,
        speed: v,
        constants,
    })
}

impl GalileanPhase {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.k * x - self.omega * t
    }

    /// The three invariance conditions, by central differences of `eval`:
    /// (ħ/m) f_x − v, f_xx, and (ħ/2m) f_x² − v f_x − f_t.
    pub fn conditions(&self, x: f64, t: f64) -> [f64; 3] {
        let h = 1e-3 * (1.0 + x.abs().max(t.abs()));
        let fx = (self.eval(x + h, t) - self.eval(x - h, t)) / (2.0 * h);
        let fxx = (self.eval(x + h, t) - 2.0 * self.eval(x, t) + self.eval(x - h, t)) / (h * h);
        let ft = (self.eval(x, t + h) - self.eval(x, t - h)) / (2.0 * h);
        let hm = self.constants.hbar() / self.constants.mass();
        [hm * fx - self.speed, fxx, 0.5 * hm * fx * fx - self.speed * fx - ft]
    }
}

/// Probability exp(−s) of finding a normalized system at separation s.
pub fn probability_field(s: f64, params: &FreeWaveParams) -> Result<f64> {
    ensure_finite("s", s)?;
    if s < 0.0 {
        return Err(invalid("s", "separation must be non-negative"));
    }
    if (params.rate() - params.speed()).abs() > 1e-12 * params.speed() {
        return Err(Error::NotNormalized(format!(
            "field needs R = v, got R = {} and v = {}",
            params.rate(),
            params.speed()
        )));
    }
    Ok((-s).exp())
}

/// Branch on which a record taken at (x, t) lives, given the peak position.
pub fn branch_at(state: &FreeWaveParams, x: f64, t: f64) -> Branch {
    if state.offset_from_peak(x, t) >= 0.0 {
        Branch::Incoming
    } else {
        Branch::Outgoing
    }
}
