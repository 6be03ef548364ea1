//! Measurement-point detection, outcome sampling, projection of single and
//! composite systems, and mixtures in a chosen basis.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::evolution::{Component, DensityMatrix, SuperposedState, Wave, NORM_TOLERANCE};
use crate::freewave::psi_free;
use crate::numeric::diff;
use crate::potential::{arrival_time, psi_potential, PotentialSpec};
use crate::types::{Branch, FreeWaveParams};

/// Default tolerance on |x − vt| (relative to max(1, |x|)) for an event to
/// count as a crossing of the measurement point.
pub const MP_TOLERANCE: f64 = 1e-9;

/// What the device does with the system after the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Disposition {
    /// The system is absorbed and stops (v = 0 afterwards).
    Record,
    /// The system is let go and continues on the outgoing branch.
    #[default]
    Release,
}

/// A crossing of the measurement point at (x, t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub x: f64,
    pub t: f64,
    /// Local speed at x.
    pub speed: f64,
    /// Distance of (x, t) from the peak trajectory: |x − vt| for uniform
    /// motion, |t − ∫dx/v| in a potential.
    pub mismatch: f64,
    /// Accepted mismatch, in the same units.
    pub tolerance: f64,
    pub disposition: Disposition,
}

impl MeasurementEvent {
    /// Event for a wave moving uniformly at `speed`, with the default tolerance.
    pub fn new(x: f64, t: f64, speed: f64) -> Result<Self> {
        ensure_finite("x", x)?;
        ensure_finite("t", t)?;
        ensure_finite("speed", speed)?;
        if speed <= 0.0 {
            return Err(invalid("speed", "must be positive"));
        }
        Ok(Self {
            x,
            t,
            speed,
            mismatch: (x - speed * t).abs(),
            tolerance: MP_TOLERANCE * x.abs().max(1.0),
            disposition: Disposition::Release,
        })
    }

    pub fn with_disposition(mut self, disposition: Disposition) -> Self {
        self.disposition = disposition;
        self
    }

    pub fn is_at_mp(&self) -> bool {
        self.mismatch <= self.tolerance
    }
}

/// Something whose peak can be detected.
#[derive(Debug, Clone, Copy)]
pub enum Detectable<'a> {
    Free(&'a FreeWaveParams),
    Potential(&'a PotentialSpec),
}

/// Returns an event iff (x, t) lies on the peak trajectory within `tol`.
pub fn detect_mp(target: Detectable<'_>, x: f64, t: f64, tol: f64) -> Result<Option<MeasurementEvent>> {
    ensure_finite("x", x)?;
    ensure_finite("t", t)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid("tol", "tolerance must be positive"));
    }
    let (mismatch, speed) = match target {
        Detectable::Free(p) => ((x - p.speed() * t).abs(), p.speed()),
        Detectable::Potential(spec) => match arrival_time(spec, x) {
            Ok(arrival) => ((t - arrival).abs(), spec.velocity_at(x)),
            Err(_) => return Ok(None),
        },
    };
    Ok((mismatch <= tol).then_some(MeasurementEvent {
        x,
        t,
        speed,
        mismatch,
        tolerance: tol,
        disposition: Disposition::Release,
    }))
}

/// Components ordered by arrival time at `x`, earliest first.
pub fn arrival_order(state: &SuperposedState, x: f64) -> Result<Vec<(usize, f64)>> {
    let mut order = Vec::with_capacity(state.len());
    for (i, c) in state.components().iter().enumerate() {
        let t = match &c.wave {
            Wave::Free(p) => p.arrival_time(x),
            Wave::Potential { spec, .. } => arrival_time(spec, x)?,
        };
        order.push((i, t));
    }
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(order)
}

/// Random generator for stream `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn categorical(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::WeightSum(sum));
    }
    WeightedIndex::new(weights).map_err(|e| invalid("weights", e.to_string()))
}

/// Draws i with probability |a_i|².
pub fn sample_outcome<R: Rng + ?Sized>(state: &SuperposedState, rng: &mut R) -> Result<usize> {
    Ok(categorical(&state.weights())?.sample(rng))
}

/// Outcome statistics of an ensemble of independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub expected: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl EnsembleReport {
    /// True when every outcome lies within `sigmas` binomial standard deviations.
    pub fn within_sigmas(&self, sigmas: f64) -> bool {
        self.z_scores.iter().all(|z| z.abs() < sigmas)
    }
}

/// Runs `n_trials` categorical draws split over `workers` deterministic
/// streams. Counts depend only on (weights, n_trials, seed, workers).
pub fn run_ensemble(weights: &[f64], n_trials: u64, seed: u64, workers: usize) -> Result<EnsembleReport> {
    if weights.is_empty() {
        return Err(invalid("weights", "need at least one outcome"));
    }
    if workers == 0 {
        return Err(invalid("workers", "need at least one stream"));
    }
    if n_trials == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let dist = categorical(weights)?;
    let w = workers as u64;
    let per_stream: Vec<Vec<u64>> = (0..w)
        .into_par_iter()
        .map(|s| {
            let n = n_trials / w + u64::from(s < n_trials % w);
            let mut rng = stream_rng(seed, s);
            let mut counts = vec![0u64; weights.len()];
            for _ in 0..n {
                counts[dist.sample(&mut rng)] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; weights.len()];
    for c in &per_stream {
        for (total, n) in counts.iter_mut().zip(c) {
            *total += n;
        }
    }
    Ok(summarize(weights, counts, seed, workers))
}

fn summarize(weights: &[f64], counts: Vec<u64>, seed: u64, workers: usize) -> EnsembleReport {
    let n_trials: u64 = counts.iter().sum();
    let n = n_trials as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let z_scores = frequencies
        .iter()
        .zip(weights)
        .map(|(&f, &p)| {
            let sigma = (p * (1.0 - p) / n).sqrt();
            if sigma > 0.0 {
                (f - p) / sigma
            } else if f == p {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut chi_square = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(weights) {
        if p > 0.0 {
            let e = n * p;
            chi_square += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            chi_square = f64::INFINITY;
        }
    }
    let dof = cells.saturating_sub(1);
    let p_value = if !chi_square.is_finite() {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map(|d| d.sf(chi_square))
            .unwrap_or(f64::NAN)
    };
    EnsembleReport {
        n_trials,
        seed,
        workers,
        counts,
        frequencies,
        expected: weights.to_vec(),
        z_scores,
        chi_square,
        degrees_of_freedom: dof,
        p_value,
    }
}

/// Mismatch of the event against one component's own peak trajectory.
fn component_mismatch(wave: &Wave, event: &MeasurementEvent) -> Result<f64> {
    match wave {
        Wave::Free(p) => Ok((event.x - p.speed() * event.t).abs()),
        Wave::Potential { spec, .. } => Ok((event.t - arrival_time(spec, event.x)?).abs()),
    }
}

fn check_component(wave: &Wave, event: &MeasurementEvent) -> Result<()> {
    let offset = component_mismatch(wave, event)?;
    if offset > event.tolerance {
        return Err(Error::NotAtMeasurementPoint {
            x: event.x,
            t: event.t,
            offset,
        });
    }
    Ok(())
}

/// The surviving wave after the crossing: the outgoing branch when released,
/// the unchanged wave when recorded. Potential waves are re-referenced to the
/// crossing so the amplitude prefactor is 1 there.
fn post_wave(wave: &Wave, event: &MeasurementEvent) -> Result<Wave> {
    let branch = |b: Branch| match event.disposition {
        Disposition::Release => Branch::Outgoing,
        Disposition::Record => b,
    };
    Ok(match wave {
        Wave::Free(p) => Wave::Free(p.with_branch(branch(p.branch()))),
        Wave::Potential { spec, branch: b } => Wave::Potential {
            spec: if spec.mp_position() == event.x {
                spec.clone()
            } else {
                Arc::new((**spec).clone().with_mp_position(event.x)?)
            },
            branch: branch(*b),
        },
    })
}

fn unit(n: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[i] = Complex64::new(1.0, 0.0);
    v
}

/// Reduces `state` to the component `outcome`, whose peak must sit at the event.
pub fn dirac_project(state: &SuperposedState, outcome: usize, event: &MeasurementEvent) -> Result<SuperposedState> {
    let n = state.len();
    if outcome >= n {
        return Err(invalid(
            "outcome",
            format!("index {outcome} out of range for {n} components"),
        ));
    }
    let components = state.components();
    check_component(&components[outcome].wave, event)?;
    let amps = unit(n, outcome);
    let mut out = Vec::with_capacity(n);
    for (i, c) in components.iter().enumerate() {
        let wave = if i == outcome {
            post_wave(&c.wave, event)?
        } else {
            c.wave.clone()
        };
        out.push(Component {
            amplitude: amps[i],
            wave,
        });
    }
    SuperposedState::new(out)
}

/// Speed of the system after the event: zero when recorded.
pub fn post_measurement_speed(state: &SuperposedState, outcome: usize, event: &MeasurementEvent) -> f64 {
    match event.disposition {
        Disposition::Record => 0.0,
        Disposition::Release => match &state.components()[outcome].wave {
            Wave::Free(p) => p.speed(),
            Wave::Potential { spec, .. } => spec.velocity_at(event.x),
        },
    }
}

/// |ψ_outcome(x, t)|² of the surviving component at the event.
pub fn density_at_event(state: &SuperposedState, outcome: usize, event: &MeasurementEvent) -> Result<f64> {
    let c = &state.components()[outcome];
    let psi = match &c.wave {
        Wave::Free(p) => psi_free(p, event.x, event.t)?,
        Wave::Potential { spec, branch } => psi_potential(spec, *branch, event.x, event.t)?,
    };
    Ok(c.amplitude.norm_sqr() * psi.norm_sqr())
}

/// One factor of a composite product: a free wave in a constant potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub wave: FreeWaveParams,
    pub potential: f64,
}

impl Factor {
    pub fn free(wave: FreeWaveParams) -> Self {
        Self { wave, potential: 0.0 }
    }

    /// ψ(x, t)·exp(−iVt/ħ).
    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64> {
        let shift = Complex64::new(0.0, -self.potential * t / self.wave.constants().hbar()).exp();
        Ok(psi_free(&self.wave, x, t)? * shift)
    }

    /// ħω + V ± iħR/2.
    pub fn energy(&self) -> Complex64 {
        Wave::Free(self.wave).energy() + self.potential
    }
}

/// Σ a_i ψ_i ⊗ φ_i, with pointer states carried by orthonormal register vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeState {
    system: Vec<Factor>,
    pointer: Vec<Factor>,
    registers: Vec<Vec<Complex64>>,
    amplitudes: Vec<Complex64>,
    projected: bool,
}

const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn tensor_compose(
    system: Vec<Factor>,
    pointer: Vec<Factor>,
    registers: Vec<Vec<Complex64>>,
    amplitudes: Vec<Complex64>,
) -> Result<CompositeState> {
    let n = system.len();
    for len in [pointer.len(), registers.len(), amplitudes.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if n == 0 {
        return Err(invalid("system", "need at least one component"));
    }
    let dim = registers[0].len();
    for r in &registers {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let overlap = inner(&registers[i], &registers[j]).norm();
            let expected = if i == j { 1.0 } else { 0.0 };
            if (overlap - expected).abs() > ORTHOGONALITY_TOLERANCE {
                if i == j {
                    return Err(Error::NotNormalized(format!(
                        "pointer register {i} has norm² {overlap}"
                    )));
                }
                return Err(Error::NonOrthogonal { i, j, overlap });
            }
        }
    }
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(format!("Σ|a|² = {norm}")));
    }
    Ok(CompositeState {
        system,
        pointer,
        registers,
        amplitudes,
        projected: false,
    })
}

impl CompositeState {
    pub fn len(&self) -> usize {
        self.system.len()
    }
    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
    pub fn system(&self) -> &[Factor] {
        &self.system
    }
    pub fn pointer(&self) -> &[Factor] {
        &self.pointer
    }
    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
    /// Set once a projection has happened; there is no inverse operation.
    pub fn is_irreversible(&self) -> bool {
        self.projected
    }

    /// ⟨θ_i|θ_j⟩ restricted to the pointer registers.
    pub fn overlap(&self, i: usize, j: usize) -> Complex64 {
        inner(&self.registers[i], &self.registers[j])
    }

    /// θ_i(x, q, t) = ψ_i(x, t) φ_i(q, t).
    pub fn product(&self, i: usize, x: f64, q: f64, t: f64) -> Result<Complex64> {
        Ok(self.system[i].psi(x, t)? * self.pointer[i].psi(q, t)?)
    }

    /// Eigenvalue of (A ⊗ B) on θ_i: the product of the factor eigenvalues.
    pub fn product_eigenvalue(
        &self,
        i: usize,
        a: crate::spectral::Observable,
        b: crate::spectral::Observable,
    ) -> Complex64 {
        crate::spectral::eigenvalue(a, &self.system[i].wave) * crate::spectral::eigenvalue(b, &self.pointer[i].wave)
    }

    /// Composite state vector in the register basis: Σ a_i |r_i⟩.
    pub fn register_vector(&self) -> Vec<Complex64> {
        let dim = self.registers[0].len();
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for (a, r) in self.amplitudes.iter().zip(&self.registers) {
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi += a * ri;
            }
        }
        v
    }
}

/// max over the probes of |iħ ∂θ/∂t + Σ (ħ²/2m) ∇²θ − (V₁ + V₂) θ| for θ_i,
/// with system coordinate x and pointer coordinate q, by Richardson-extrapolated
/// central differences with base step h. Probes must keep 3h clear of either peak.
pub fn composite_schrodinger_residual(
    state: &CompositeState,
    i: usize,
    probes: &[(f64, f64, f64)],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", "difference step must be positive"));
    }
    let (sys, ptr) = (&state.system[i], &state.pointer[i]);
    let hbar = sys.wave.constants().hbar();
    let k1 = sys.wave.constants().kinetic();
    let k2 = ptr.wave.constants().kinetic();
    let v = sys.potential + ptr.potential;
    let mut worst: f64 = 0.0;
    for &(x, q, t) in probes {
        for p in [(x, t), (x - 3.0 * h, t - 3.0 * h), (x + 3.0 * h, t + 3.0 * h)] {
            sys.psi(p.0, p.1)?;
        }
        for p in [(q, t), (q - 3.0 * h, t - 3.0 * h), (q + 3.0 * h, t + 3.0 * h)] {
            ptr.psi(p.0, p.1)?;
        }
        let th = |x: f64, q: f64, t: f64| {
            crate::freewave::psi_formula(&sys.wave, x, t)
                * crate::freewave::psi_formula(&ptr.wave, q, t)
                * Complex64::new(0.0, -v * t / hbar).exp()
        };
        let c = th(x, q, t);
        let dt = diff::real_derivative(&|s| th(x, q, s), t, h);
        let dxx = diff::real_second_derivative(&|s| th(s, q, t), x, h);
        let dqq = diff::real_second_derivative(&|s| th(x, s, t), q, h);
        let r = Complex64::i() * hbar * dt + dxx * k1 + dqq * k2 - c * v;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Reduces the composite to the single product ψ′_outcome φ′_outcome.
pub fn von_neumann_project(state: &CompositeState, outcome: usize, event: &MeasurementEvent) -> Result<CompositeState> {
    let n = state.len();
    if outcome >= n {
        return Err(invalid(
            "outcome",
            format!("index {outcome} out of range for {n} components"),
        ));
    }
    check_component(&Wave::Free(state.system[outcome].wave), event)?;
    let mut out = state.clone();
    out.amplitudes = unit(n, outcome);
    if event.disposition == Disposition::Release {
        out.system[outcome].wave = out.system[outcome].wave.with_branch(Branch::Outgoing);
    }
    out.projected = true;
    Ok(out)
}

/// |ψ′(x, t) φ′(q_peak, t)|² of the surviving product, with the pointer read
/// at its own peak q = v_φ t.
pub fn composite_density_at_event(state: &CompositeState, outcome: usize, event: &MeasurementEvent) -> Result<f64> {
    let q = state.pointer[outcome].wave.speed() * event.t;
    Ok(state.amplitudes[outcome].norm_sqr() * state.product(outcome, event.x, q, event.t)?.norm_sqr())
}

/// Σ w_i |s_i⟩⟨s_i| for normalized vectors in a common orthonormal basis.
pub fn mixture_density(states: &[Vec<Complex64>], weights: &[f64]) -> Result<DensityMatrix> {
    if states.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: weights.len(),
        });
    }
    if states.is_empty() {
        return Err(invalid("states", "need at least one state"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::WeightSum(sum));
    }
    let dim = states[0].len();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (s, &w) in states.iter().zip(weights) {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.len(),
            });
        }
        let norm = inner(s, s).re;
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(format!("state has norm² {norm}")));
        }
        let v = DVector::from_column_slice(s);
        m += &v * v.adjoint() * Complex64::new(w, 0.0);
    }
    DensityMatrix::new(m)
}

/// Σ|a_i|² λ_i for the entangled state and Σ|a_i|² re λ_i after reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub entangled: Complex64,
    pub reduced: f64,
}

pub fn compare_averages(state: &CompositeState, eigenvalues: &[Complex64]) -> Result<Averages> {
    if eigenvalues.len() != state.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            found: eigenvalues.len(),
        });
    }
    let mut entangled = Complex64::new(0.0, 0.0);
    let mut reduced = 0.0;
    for (w, l) in state.weights().into_iter().zip(eigenvalues) {
        entangled += l * w;
        reduced += w * l.re;
    }
    Ok(Averages { entangled, reduced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Observable;
    use crate::types::{make_free_state, PhysicalConstants};
    use approx::assert_relative_eq;

    fn wave(v: f64, rate: f64) -> FreeWaveParams {
        make_free_state(v, rate, PhysicalConstants::default(), Branch::Incoming).unwrap()
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn three() -> SuperposedState {
        SuperposedState::free(
            &[re(0.5f64.sqrt()), re(0.3f64.sqrt()), re(0.2f64.sqrt())],
            &[wave(1.0, 1.0), wave(2.0, 1.0), wave(0.5, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn detection_examples() {
        let w = wave(1.0, 1.0);
        let e = detect_mp(Detectable::Free(&w), 2.0, 2.0, 1e-9).unwrap().unwrap();
        assert_eq!(e.t, 2.0);
        assert!(detect_mp(Detectable::Free(&w), 2.0, 1.0, 1e-9).unwrap().is_none());
        let spec = PotentialSpec::from_fns(
            0.0,
            2.0,
            21,
            |x| 1.0 + x,
            |_| 0.0,
            1.0,
            0.375,
            PhysicalConstants::default(),
        )
        .unwrap();
        let ln2 = 2f64.ln();
        assert!(detect_mp(Detectable::Potential(&spec), 1.0, ln2 + 5e-4, 1e-3)
            .unwrap()
            .is_some());
        assert!(detect_mp(Detectable::Potential(&spec), 1.0, ln2 + 2e-3, 1e-3)
            .unwrap()
            .is_none());
        assert!(detect_mp(Detectable::Free(&w), 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn arrival_order_follows_speed() {
        let order = arrival_order(&three(), 2.0).unwrap();
        assert_eq!(order.iter().map(|o| o.0).collect::<Vec<_>>(), vec![1, 0, 2]);
    }

    #[test]
    fn sampling_a_certain_outcome() {
        let s = SuperposedState::free(&[re(1.0), re(0.0), re(0.0)], &[wave(1.0, 1.0); 3]).unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..1000).all(|_| sample_outcome(&s, &mut rng).unwrap() == 0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let draw = |seed| {
            let mut rng = stream_rng(seed, 3);
            (0..50)
                .map(|_| sample_outcome(&three(), &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn ensemble_frequencies() {
        let r = run_ensemble(&[0.5, 0.3, 0.2], 100_000, 42, 4).unwrap();
        assert_eq!(r.counts.iter().sum::<u64>(), 100_000);
        assert!((r.frequencies[0] - 0.5).abs() < 0.00474);
        assert!(r.p_value > 0.001);
        assert_eq!(r, run_ensemble(&[0.5, 0.3, 0.2], 100_000, 42, 4).unwrap());
        assert!(run_ensemble(&[0.5, 0.3], 10, 1, 1).is_err());
    }

    #[test]
    fn dirac_projection() {
        let s = three();
        let event = MeasurementEvent::new(2.0, 2.0, 1.0).unwrap();
        let p = dirac_project(&s, 0, &event).unwrap();
        assert_eq!(p.amplitudes(), vec![re(1.0), re(0.0), re(0.0)]);
        assert_relative_eq!(density_at_event(&p, 0, &event).unwrap(), 1.0, epsilon = 1e-15);
        let twice = dirac_project(&p, 0, &event).unwrap();
        assert_eq!(twice.amplitudes(), p.amplitudes());
        match (&twice.components()[0].wave, &p.components()[0].wave) {
            (Wave::Free(a), Wave::Free(b)) => assert_eq!(a, b),
            _ => unreachable!(),
        }
        // Component 1 moves at v = 2 and is not at x = 2 when t = 2.
        assert!(matches!(
            dirac_project(&s, 1, &event),
            Err(Error::NotAtMeasurementPoint { .. })
        ));
    }

    #[test]
    fn record_stops_release_reemits() {
        let s = three();
        let event = MeasurementEvent::new(2.0, 2.0, 1.0).unwrap();
        let kept = event.with_disposition(Disposition::Record);
        assert_eq!(post_measurement_speed(&s, 0, &kept), 0.0);
        assert_eq!(post_measurement_speed(&s, 0, &event), 1.0);
        let p = dirac_project(&s, 0, &event).unwrap();
        assert_eq!(p.components()[0].wave.branch(), Branch::Outgoing);
        let p = dirac_project(&s, 0, &kept).unwrap();
        assert_eq!(p.components()[0].wave.branch(), Branch::Incoming);
    }

    #[test]
    fn projection_in_a_potential() {
        let spec = Arc::new(
            PotentialSpec::from_fns(
                0.0,
                2.0,
                21,
                |x| 1.0 + x,
                |_| 0.0,
                1.0,
                0.375,
                PhysicalConstants::default(),
            )
            .unwrap(),
        );
        let s = SuperposedState::new(vec![Component {
            amplitude: re(1.0),
            wave: Wave::Potential {
                spec: spec.clone(),
                branch: Branch::Incoming,
            },
        }])
        .unwrap();
        let t = arrival_time(&spec, 1.5).unwrap();
        let event = detect_mp(Detectable::Potential(&spec), 1.5, t, 1e-9).unwrap().unwrap();
        let p = dirac_project(&s, 0, &event).unwrap();
        assert_relative_eq!(density_at_event(&p, 0, &event).unwrap(), 1.0, epsilon = 1e-12);
    }

    fn registers() -> Vec<Vec<Complex64>> {
        vec![vec![re(1.0), re(0.0)], vec![re(0.0), re(1.0)]]
    }

    fn composite(a: f64) -> CompositeState {
        let b = (1.0 - a * a).sqrt();
        tensor_compose(
            vec![Factor::free(wave(1.0, 1.0)), Factor::free(wave(2.0, 1.0))],
            vec![Factor::free(wave(3.0, 0.0)), Factor::free(wave(1.5, 0.5))],
            registers(),
            vec![re(a), re(b)],
        )
        .unwrap()
    }

    #[test]
    fn composite_construction() {
        let c = composite(0.6);
        assert_eq!(c.overlap(0, 1), re(0.0));
        let bad = tensor_compose(
            vec![Factor::free(wave(1.0, 1.0)); 2],
            vec![Factor::free(wave(1.0, 1.0)); 2],
            vec![vec![re(1.0), re(0.0)], vec![re(0.6), re(0.8)]],
            vec![re(0.6), re(0.8)],
        );
        assert!(matches!(bad, Err(Error::NonOrthogonal { .. })));
        let short = tensor_compose(vec![Factor::free(wave(1.0, 1.0))], vec![], vec![], vec![re(1.0)]);
        assert!(matches!(short, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_eigenvalue() {
        let c = tensor_compose(
            vec![Factor::free(wave(2.0, 0.0))],
            vec![Factor::free(wave(3.0, 0.0))],
            vec![vec![re(1.0)]],
            vec![re(1.0)],
        )
        .unwrap();
        assert_eq!(c.product_eigenvalue(0, Observable::P, Observable::P), re(6.0));
        assert_eq!(c.register_vector(), vec![re(1.0)]);
    }

    #[test]
    fn composite_schrodinger() {
        let mut c = composite(1.0);
        c.system[0].potential = 0.7;
        c.pointer[0].potential = -0.2;
        let probes = [(3.0, 4.0, 1.0), (2.5, 3.5, 0.5)];
        assert!(composite_schrodinger_residual(&c, 0, &probes, 1e-3).unwrap() < 1e-6);
        assert!(composite_schrodinger_residual(&c, 1, &[(3.0, 4.0, 0.5)], 1e-3).unwrap() < 1e-6);
    }

    #[test]
    fn von_neumann_projection() {
        let c = composite(0.6);
        let event = MeasurementEvent::new(2.0, 2.0, 1.0).unwrap();
        let p = von_neumann_project(&c, 0, &event).unwrap();
        assert_eq!(p.amplitudes(), &[re(1.0), re(0.0)]);
        assert!(p.is_irreversible() && !c.is_irreversible());
        assert_relative_eq!(composite_density_at_event(&p, 0, &event).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(von_neumann_project(&p, 0, &event).unwrap(), p);
        assert!(von_neumann_project(&c, 1, &event).is_err());
    }

    #[test]
    fn preferred_basis_mixtures() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = vec![vec![re(1.0), re(0.0)], vec![re(0.0), re(1.0)]];
        let a = vec![vec![re(s), re(s)], vec![re(s), re(-s)]];
        let m1 = mixture_density(&phi, &[0.5, 0.5]).unwrap();
        let m2 = mixture_density(&a, &[0.5, 0.5]).unwrap();
        assert!(m1.max_difference(&m2).unwrap() < 1e-12);

        let single = mixture_density(&a[..1], &[1.0]).unwrap();
        assert_relative_eq!(crate::evolution::purity(&single).unwrap(), 1.0, max_relative = 1e-14);
        let m = mixture_density(&phi, &[0.7, 0.3]).unwrap();
        assert_relative_eq!(crate::evolution::purity(&m).unwrap(), 0.58, max_relative = 1e-14);
        assert!(matches!(mixture_density(&phi, &[0.7, 0.4]), Err(Error::WeightSum(_))));
    }

    #[test]
    fn averages() {
        let one = tensor_compose(
            vec![Factor::free(wave(1.0, 1.0))],
            vec![Factor::free(wave(1.0, 0.0))],
            vec![vec![re(1.0)]],
            vec![re(1.0)],
        )
        .unwrap();
        let a = compare_averages(&one, &[Complex64::new(0.375, 0.5)]).unwrap();
        assert_eq!(a.entangled, Complex64::new(0.375, 0.5));
        assert_eq!(a.reduced, 0.375);

        let c = composite(std::f64::consts::FRAC_1_SQRT_2);
        let a = compare_averages(&c, &[Complex64::new(0.375, 0.5), Complex64::new(0.875, 0.5)]).unwrap();
        assert!((a.entangled - Complex64::new(0.625, 0.5)).norm() < 1e-15);
        assert_relative_eq!(a.reduced, 0.625, max_relative = 1e-15);

        let energies: Vec<Complex64> = c.system().iter().map(|f| f.energy()).collect();
        let a = compare_averages(&c, &energies).unwrap();
        let expected: f64 = c
            .weights()
            .iter()
            .zip(c.system())
            .map(|(w, f)| w * f.wave.rate() / 2.0)
            .sum();
        assert_eq!(a.entangled.re, a.reduced);
        assert_relative_eq!(a.entangled.im, expected, max_relative = 1e-15);
    }
}
