//! Shared domain types: physical constants, wave branches, the free-wave
//! parameter set and eigenvalue records.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::freewave::dispersion_omega;

/// Complex observable value (energy, momentum, position or time).
pub type ComplexValue = Complex64;

/// Units of action, mass and entropy-per-temperature. Natural units by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    mass: f64,
    kb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            kb: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, kb: f64) -> Result<Self> {
        for (name, value) in [("hbar", hbar), ("mass", mass), ("kb", kb)] {
            ensure_finite(name, value)?;
            if value <= 0.0 {
                return Err(invalid(name, format!("must be strictly positive, got {value}")));
            }
        }
        Ok(Self { hbar, mass, kb })
    }

    pub fn with_hbar(self, hbar: f64) -> Result<Self> {
        Self::new(hbar, self.mass, self.kb)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn kb(&self) -> f64 {
        self.kb
    }

    /// ħ²/2m, the kinetic prefactor.
    pub fn kinetic(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

/// Which side of the measurement point a wave describes.
///
/// `Incoming` is valid for x ≥ vt (the wave approaching the device),
/// `Outgoing` for x ≤ vt (the mirrored tail after the crossing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Incoming,
    Outgoing,
}

impl Branch {
    /// +1 for incoming, -1 for outgoing. Multiplies every `R` in the envelope.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Incoming => 1.0,
            Branch::Outgoing => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Incoming => Branch::Outgoing,
            Branch::Outgoing => Branch::Incoming,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Incoming => f.write_str("incoming"),
            Branch::Outgoing => f.write_str("outgoing"),
        }
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "incoming" | "in" | "right" | "r" => Ok(Branch::Incoming),
            "outgoing" | "out" | "left" | "l" => Ok(Branch::Outgoing),
            other => Err(invalid("branch", format!("unknown branch `{other}`"))),
        }
    }
}

/// Parameters of one member of the free-particle wave family
///
/// ```text
/// ψ(x,t) = exp[±(R/2)(t − x/v)] · exp[i(kx − ωt)]
/// ```
///
/// with v = ħk/m and ħω = ħ²k²/2m − ħ²R²/8mv².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeWaveParams {
    k: f64,
    omega: f64,
    rate: f64,
    speed: f64,
    branch: Branch,
    constants: PhysicalConstants,
}

impl FreeWaveParams {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Envelope rate `R`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Particle speed `v`.
    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    /// Replaces ω without re-deriving it from the dispersion relation.
    ///
    /// The result generally violates the dispersion relation; it exists so
    /// residual checks can be exercised against deliberately wrong states.
    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        self.omega = ensure_finite("omega", omega)?;
        Ok(self)
    }

    /// ħω + ħ²R²/8mv² − ħ²k²/2m. Zero for every state built by [`make_free_state`].
    pub fn dispersion_gap(&self) -> f64 {
        let c = self.constants;
        let hbar = c.hbar();
        hbar * self.omega + hbar * hbar * self.rate * self.rate / (8.0 * c.mass() * self.speed * self.speed)
            - c.kinetic() * self.k * self.k
    }

    /// Arrival time t = x/v at position `x`.
    pub fn arrival_time(&self, x: f64) -> f64 {
        x / self.speed
    }

    /// Signed distance x − vt from the peak.
    pub fn offset_from_peak(&self, x: f64, t: f64) -> f64 {
        x - self.speed * t
    }
}

/// Builds the free wave moving along +x with speed `v` and envelope rate `rate`.
pub fn make_free_state(v: f64, rate: f64, constants: PhysicalConstants, branch: Branch) -> Result<FreeWaveParams> {
    ensure_finite("v", v)?;
    ensure_finite("rate", rate)?;
    if v <= 0.0 {
        return Err(invalid("v", format!("speed must be positive, got {v}")));
    }
    if rate < 0.0 {
        return Err(invalid(
            "rate",
            format!("envelope rate must be non-negative, got {rate}"),
        ));
    }
    let k = constants.mass() * v / constants.hbar();
    let omega = dispersion_omega(k, rate, v, constants)?;
    Ok(FreeWaveParams {
        k,
        omega,
        rate,
        speed: v,
        branch,
        constants,
    })
}

/// Observable tags carried by an [`EigenRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableKind {
    H,
    HDagger,
    P,
    S,
    Xc,
    Tc,
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObservableKind::H => "H",
            ObservableKind::HDagger => "Hdagger",
            ObservableKind::P => "P",
            ObservableKind::S => "S",
            ObservableKind::Xc => "Xc",
            ObservableKind::Tc => "Tc",
        };
        f.write_str(s)
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" => Ok(ObservableKind::H),
            "Hdagger" | "H†" => Ok(ObservableKind::HDagger),
            "P" => Ok(ObservableKind::P),
            "S" => Ok(ObservableKind::S),
            "Xc" => Ok(ObservableKind::Xc),
            "Tc" => Ok(ObservableKind::Tc),
            other => Err(Error::UnknownObservable(other.to_string())),
        }
    }
}

/// Result of applying an observable to a family state (Aψ/ψ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub observable: ObservableKind,
    pub value: ComplexValue,
    pub at_mp: bool,
}

impl EigenRecord {
    pub fn new(observable: ObservableKind, value: ComplexValue, at_mp: bool) -> Self {
        let value = if at_mp { Complex64::new(value.re, 0.0) } else { value };
        Self {
            observable,
            value,
            at_mp,
        }
    }
}
