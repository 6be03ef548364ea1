//! Uncertainty decompositions, contour integrals of the complexified density,
//! the signed density slope, distribution-function normalization and the
//! classical-point check at the measurement point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::freewave::{prob_density_free, psi_formula, TAIL_LENGTHS};
use crate::measurement::MeasurementEvent;
use crate::numeric::{diff, integrate, integrate_segment, CubicSpline};
use crate::types::{Branch, FreeWaveParams};

/// Samples z = re + i·im of a complex observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSampleSet {
    pairs: Vec<Complex64>,
}

impl ComplexSampleSet {
    pub fn new(pairs: Vec<Complex64>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: pairs.len(),
            });
        }
        if pairs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[Complex64] {
        &self.pairs
    }
}

/// Population moments of a complex sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub var_real: f64,
    pub var_imag: f64,
    /// ⟨z²⟩ − ⟨z⟩², which equals var_real − var_imag + 2i·covariance.
    pub var_complex: Complex64,
    pub covariance: f64,
}

impl UncertaintyReport {
    /// var_real − var_imag − re(var_complex); zero up to rounding.
    pub fn real_part_defect(&self) -> f64 {
        self.var_real - self.var_imag - self.var_complex.re
    }

    /// The covariance contribution 2·cov(re, im), carried by im(var_complex).
    pub fn covariance_term(&self) -> f64 {
        2.0 * self.covariance
    }
}

pub fn uncertainty_decompose(samples: &ComplexSampleSet) -> UncertaintyReport {
    let n = samples.pairs.len() as f64;
    let mean: Complex64 = samples.pairs.iter().sum::<Complex64>() / n;
    let (mut vr, mut vi, mut cov) = (0.0, 0.0, 0.0);
    let mut vc = Complex64::new(0.0, 0.0);
    for z in &samples.pairs {
        let d = z - mean;
        vr += d.re * d.re;
        vi += d.im * d.im;
        cov += d.re * d.im;
        vc += d * d;
    }
    UncertaintyReport {
        var_real: vr / n,
        var_imag: vi / n,
        var_complex: vc / n,
        covariance: cov / n,
    }
}

/// True iff Δx'·Δp' ≥ ħ/2 for the imaginary-part spreads.
pub fn heisenberg_check(dx_imag: f64, dp_imag: f64, hbar: f64) -> Result<bool> {
    for (name, v) in [("dx_imag", dx_imag), ("dp_imag", dp_imag), ("hbar", hbar)] {
        ensure_finite(name, v)?;
        if v < 0.0 {
            return Err(invalid(name, "must be non-negative"));
        }
    }
    Ok(dx_imag * dp_imag >= hbar / 2.0)
}

/// Which complexified density is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DensityKind {
    /// exp[R(t_c − x_c/v)]
    IncomingP1,
    /// exp[R(x_c/v − t_c)]
    OutgoingP1,
}

impl std::str::FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "IncomingP1" | "incoming" => Ok(DensityKind::IncomingP1),
            "OutgoingP1" | "outgoing" => Ok(DensityKind::OutgoingP1),
            other => Err(invalid("density", format!("unknown density `{other}`"))),
        }
    }
}

/// A polyline of complex positions at a fixed complex time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    vertices: Vec<Complex64>,
    t_c: Complex64,
}

impl Contour {
    pub fn new(vertices: Vec<Complex64>, t_c: Complex64) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: vertices.len(),
            });
        }
        for z in vertices.iter().chain(std::iter::once(&t_c)) {
            ensure_finite("vertex", z.re)?;
            ensure_finite("vertex", z.im)?;
        }
        if vertices.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::DegenerateContour);
        }
        Ok(Self { vertices, t_c })
    }

    /// The boundary of an axis-aligned rectangle, counter-clockwise, closed.
    pub fn rectangle(lower_left: Complex64, upper_right: Complex64, t_c: Complex64) -> Result<Self> {
        let (a, b) = (lower_left, upper_right);
        Self::new(
            vec![a, Complex64::new(b.re, a.im), b, Complex64::new(a.re, b.im), a],
            t_c,
        )
    }

    /// Reads vertices from CSV with columns `re_x, im_x`.
    pub fn from_csv(text: &str, t_c: Complex64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                reason: format!("missing column `{name}`"),
            })
        };
        let (ri, ii) = (col("re_x")?, col("im_x")?);
        let mut vertices = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let line = n + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
            let field = |i: usize| {
                record
                    .get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        line,
                        reason: "expected a number".into(),
                    })
            };
            vertices.push(Complex64::new(field(ri)?, field(ii)?));
        }
        Self::new(vertices, t_c)
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn t_c(&self) -> Complex64 {
        self.t_c
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.first() == self.vertices.last()
    }

    /// Splits every segment in two.
    pub fn refined(&self) -> Self {
        let mut v = Vec::with_capacity(2 * self.vertices.len());
        for w in self.vertices.windows(2) {
            v.push(w[0]);
            v.push((w[0] + w[1]) * 0.5);
        }
        v.push(*self.vertices.last().unwrap());
        Self {
            vertices: v,
            t_c: self.t_c,
        }
    }
}

/// Tolerance for each contour segment.
const SEGMENT_TOL: f64 = 1e-13;

/// ∫ P₁(x_c) dx_c along the contour.
pub fn contour_integral(kind: DensityKind, params: &FreeWaveParams, contour: &Contour) -> Result<Complex64> {
    let (r, v, t_c) = (params.rate(), params.speed(), contour.t_c);
    let sign = match kind {
        DensityKind::IncomingP1 => 1.0,
        DensityKind::OutgoingP1 => -1.0,
    };
    let f = move |z: Complex64| ((t_c - z / v) * (sign * r)).exp();
    let mut total = Complex64::new(0.0, 0.0);
    for w in contour.vertices.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        total += integrate_segment(&f, w[0], w[1], SEGMENT_TOL)?;
    }
    Ok(total)
}

/// dπ/dx and the density P at a point of the incoming region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub density: f64,
}

/// Signed slope −(R/v)·exp[R(t − x/v)] of the incoming density.
pub fn negative_density_slope(params: &FreeWaveParams, x: f64, t: f64) -> Result<SlopeReport> {
    if params.branch() != Branch::Incoming || x <= params.speed() * t {
        return Err(Error::RegionMismatch {
            branch: Branch::Incoming,
            x,
            t,
        });
    }
    let density = prob_density_free(&params.with_branch(Branch::Incoming), x, t)?;
    Ok(SlopeReport {
        slope: -(params.rate() / params.speed()) * density,
        density,
    })
}

/// A distribution function π decreasing from its value at the peak.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// π(x) = exp[R(t − x/v)] on [vt, ∞).
    Family { params: FreeWaveParams, t: f64 },
    /// Samples of π on increasing abscissae.
    Tabulated { x: Vec<f64>, pi: Vec<f64> },
}

/// ∫ (−dπ/dx) dx by substitution and by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    /// π(start) − π(end), the substitution value.
    pub value: f64,
    /// Quadrature of −dπ/dx over the (truncated) domain.
    pub quadrature: f64,
}

/// Normalizes the distribution density −dπ/dx. For the wave family the
/// change of variables gives exactly 1 whatever R and v; this is also the
/// average of the position projector ∫|x⟩⟨x| dx weighted by the density.
pub fn distribution_normalize(dist: &Distribution) -> Result<NormalizationReport> {
    match dist {
        Distribution::Family { params, t } => {
            if params.rate() <= 0.0 {
                return Err(Error::DivergentNormalization);
            }
            let p = params.with_branch(Branch::Incoming);
            let (r, v) = (p.rate(), p.speed());
            let start = v * t;
            let end = start + TAIL_LENGTHS * v / r;
            let t = *t;
            let density = move |x: f64| (r / v) * psi_formula(&p, x, t).norm_sqr();
            let quadrature = integrate(density, start, end, 1e-14)?;
            Ok(NormalizationReport { value: 1.0, quadrature })
        }
        Distribution::Tabulated { x, pi } => {
            if let Some(w) = pi.windows(2).find(|w| w[1] > w[0]) {
                return Err(Error::NonMonotone(w[1] - w[0]));
            }
            let spline = CubicSpline::new(x.clone(), pi.clone())?;
            let mut quadrature = 0.0;
            for w in x.windows(2) {
                quadrature += integrate(|s| -spline.derivative(s), w[0], w[1], 1e-14 * (w[1] - w[0]))?;
            }
            Ok(NormalizationReport {
                value: pi[0] - pi[pi.len() - 1],
                quadrature,
            })
        }
    }
}

/// Outcome of the classical-point check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPointReport {
    pub quantum_potential: f64,
    /// (ħk, ħω) of the principal function s = ħ(kx − ωt).
    pub principal_fn_coeffs: (f64, f64),
    /// s(x, t) at the event.
    pub principal_fn: f64,
    /// ∂²s/∂x².
    pub second_derivative: f64,
}

/// −(ħ²/4mP)[P″ − P′²/2P] for the density of `params` at (x, t).
///
/// At the measurement point the envelope rate vanishes and so does the
/// result; elsewhere the bracket is evaluated from derivatives of P on the
/// branch side and equals −ħ²R²/8mv².
pub fn quantum_potential(params: &FreeWaveParams, x: f64, t: f64) -> Result<f64> {
    prob_density_free(params, x, t)?;
    let offset = params.offset_from_peak(x, t);
    if offset.abs() <= crate::measurement::MP_TOLERANCE * x.abs().max(1.0) {
        return Ok(0.0);
    }
    let c = params.constants();
    let p = *params;
    let density = move |s: f64| Complex64::new(psi_formula(&p, s, t).norm_sqr(), 0.0);
    // Keep the stencil on this branch.
    let h = 0.25 * offset.abs().min(params.speed() / params.rate().max(1e-300));
    let d0 = density(x).re;
    let d1 = diff::real_derivative(&density, x, h).re;
    let d2 = diff::real_second_derivative(&density, x, h).re;
    Ok(-c.hbar() * c.hbar() / (4.0 * c.mass() * d0) * (d2 - d1 * d1 / (2.0 * d0)))
}

pub fn classical_point_check(params: &FreeWaveParams, event: &MeasurementEvent) -> Result<ClassicalPointReport> {
    let offset = params.offset_from_peak(event.x, event.t).abs();
    if offset > event.tolerance {
        return Err(Error::NotAtMeasurementPoint {
            x: event.x,
            t: event.t,
            offset,
        });
    }
    let hbar = params.constants().hbar();
    let (a, b) = (hbar * params.k(), hbar * params.omega());
    let s = move |x: f64| Complex64::new(a * x - b * event.t, 0.0);
    Ok(ClassicalPointReport {
        quantum_potential: quantum_potential(params, event.x, event.t)?,
        principal_fn_coeffs: (a, b),
        principal_fn: a * event.x - b * event.t,
        second_derivative: diff::real_second_derivative(&s, event.x, 0.1).re,
    })
}
