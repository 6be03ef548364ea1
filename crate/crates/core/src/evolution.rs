//! Non-unitary evolution of superpositions, density matrices, reduction to a
//! mixture and the entropy trajectory.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::potential::PotentialSpec;
use crate::types::{Branch, FreeWaveParams, PhysicalConstants};

/// Tolerance on Σ|a|² = 1 for a superposition.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// The wave carried by one component of a superposition.
#[derive(Debug, Clone)]
pub enum Wave {
    Free(FreeWaveParams),
    Potential { spec: Arc<PotentialSpec>, branch: Branch },
}

impl Wave {
    /// H eigenvalue ħω ± iħR/2.
    pub fn energy(&self) -> Complex64 {
        let (hbar, omega, rate, sign) = match self {
            Wave::Free(p) => (p.constants().hbar(), p.omega(), p.rate(), p.branch().sign()),
            Wave::Potential { spec, branch } => (spec.constants().hbar(), spec.omega(), spec.rate(), branch.sign()),
        };
        Complex64::new(hbar * omega, sign * hbar * rate / 2.0)
    }

    pub fn constants(&self) -> PhysicalConstants {
        match self {
            Wave::Free(p) => p.constants(),
            Wave::Potential { spec, .. } => spec.constants(),
        }
    }

    pub fn branch(&self) -> Branch {
        match self {
            Wave::Free(p) => p.branch(),
            Wave::Potential { branch, .. } => *branch,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Component {
    pub amplitude: Complex64,
    pub wave: Wave,
}

/// Σ a_i |ψ_i⟩ with Σ|a_i|² = 1.
#[derive(Debug, Clone)]
pub struct SuperposedState {
    components: Vec<Component>,
}

impl SuperposedState {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("components", "a superposition needs at least one component"));
        }
        for c in &components {
            ensure_finite("amplitude", c.amplitude.re)?;
            ensure_finite("amplitude", c.amplitude.im)?;
        }
        let norm: f64 = components.iter().map(|c| c.amplitude.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(format!("Σ|a|² = {norm}")));
        }
        Ok(Self { components })
    }

    /// Superposition of free waves.
    pub fn free(amplitudes: &[Complex64], waves: &[FreeWaveParams]) -> Result<Self> {
        if amplitudes.len() != waves.len() {
            return Err(Error::DimensionMismatch {
                expected: amplitudes.len(),
                found: waves.len(),
            });
        }
        Self::new(
            amplitudes
                .iter()
                .zip(waves)
                .map(|(&amplitude, w)| Component {
                    amplitude,
                    wave: Wave::Free(*w),
                })
                .collect(),
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.components.iter().map(|c| c.amplitude).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.amplitude.norm_sqr()).collect()
    }

    pub fn energies(&self) -> Vec<Complex64> {
        self.components.iter().map(|c| c.wave.energy()).collect()
    }
}

/// Amplitudes after non-unitary evolution; they are not renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvedState {
    pub t: f64,
    pub amplitudes: Vec<Complex64>,
    /// Σ|a_i(t)|².
    pub norm_sqr: f64,
}

/// a_i(t) = a_i · exp(−iλ_i t/ħ) with λ_i the complex H eigenvalue.
pub fn evolve_state(state: &SuperposedState, t: f64) -> Result<EvolvedState> {
    ensure_finite("t", t)?;
    let amplitudes: Vec<Complex64> = state
        .components
        .iter()
        .map(|c| c.amplitude * propagator(c.wave.energy(), c.wave.constants().hbar(), t))
        .collect();
    let norm_sqr = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if !f64::is_finite(norm_sqr) {
        return Err(Error::NonFinite("evolved norm"));
    }
    Ok(EvolvedState {
        t,
        amplitudes,
        norm_sqr,
    })
}

fn propagator(energy: Complex64, hbar: f64, t: f64) -> Complex64 {
    (-Complex64::i() * energy * (t / hbar)).exp()
}

/// Hermitian positive semi-definite matrix in the component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    /// Row-major [re, im] pairs.
    entries: Vec<[f64; 2]>,
}

impl From<DensityMatrix> for MatrixRepr {
    fn from(d: DensityMatrix) -> Self {
        let n = d.dim();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let z = d.m[(i, j)];
                [z.re, z.im]
            })
            .collect();
        MatrixRepr { dim: n, entries }
    }
}

impl TryFrom<MatrixRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.entries.len() != r.dim * r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim * r.dim,
                found: r.entries.len(),
            });
        }
        let m = DMatrix::from_row_iterator(r.dim, r.dim, r.entries.iter().map(|e| Complex64::new(e[0], e[1])));
        DensityMatrix::new(m)
    }
}

const HERMITIAN_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidDensity(format!("matrix is {}×{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidDensity("non-finite entry".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > HERMITIAN_TOLERANCE * scale {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {asym:e})")));
        }
        let d = Self { m };
        let min = d.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE * scale {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(d)
    }

    /// |ψ⟩⟨ψ| for the amplitude vector ψ.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(&v * v.adjoint())
    }

    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &w) in weights.iter().enumerate() {
            m[(i, i)] = Complex64::new(w, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut h = self.m.clone();
        // Symmetrize exactly so the solver sees a Hermitian input.
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
            for j in 0..i {
                h[(i, j)] = h[(j, i)].conj();
            }
        }
        let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Largest entrywise distance to another matrix.
    pub fn max_difference(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok((&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// ρ_ij(t) = ρ_ij · u_i · conj(u_j) with u_i = exp(−iλ_i t/ħ).
pub fn evolve_density(
    rho: &DensityMatrix,
    energies: &[Complex64],
    t: f64,
    constants: PhysicalConstants,
) -> Result<DensityMatrix> {
    ensure_finite("t", t)?;
    let n = rho.dim();
    if energies.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: energies.len(),
        });
    }
    let u: Vec<Complex64> = energies.iter().map(|&e| propagator(e, constants.hbar(), t)).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = rho.m[(i, j)] * u[i] * u[j].conj();
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        m[(i, i)].im = 0.0;
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("evolved density matrix"));
    }
    // Congruence by a diagonal matrix keeps Hermiticity and positivity.
    Ok(DensityMatrix { m })
}

/// diag(|a_1|², …, |a_n|²): every coherence is dropped.
pub fn reduce_to_mixture(state: &SuperposedState) -> DensityMatrix {
    let weights = state.weights();
    let n = weights.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, w) in weights.into_iter().enumerate() {
        m[(i, i)] = Complex64::new(w, 0.0);
    }
    DensityMatrix { m }
}

/// trace(ρ²) for a unit-trace ρ.
pub fn purity(rho: &DensityMatrix) -> Result<f64> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::TraceNotUnity(tr));
    }
    Ok(rho.m.iter().map(|z| z.norm_sqr()).sum())
}

/// When the components of a superposition are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ReductionTiming {
    /// Everything reduces at the earliest arrival.
    #[default]
    FirstArrival,
    /// Each component reduces at its own arrival; no defined semantics.
    Staggered,
}

/// Reduction time for a superposition of free waves observed at `x`.
pub fn reduction_time(state: &SuperposedState, x: f64, timing: ReductionTiming) -> Result<f64> {
    ensure_finite("x", x)?;
    if timing == ReductionTiming::Staggered {
        return Err(invalid("timing", "staggered reduction has no defined semantics"));
    }
    let mut first = f64::INFINITY;
    for c in &state.components {
        match &c.wave {
            Wave::Free(p) => first = first.min(p.arrival_time(x)),
            Wave::Potential { spec, .. } => first = first.min(crate::potential::arrival_time(spec, x)?),
        }
    }
    Ok(first)
}

/// S(t) in units of k_B·(time·rate), with optional measurement instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrajectory {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    /// (time, S just before, S just after) for every measurement instant.
    pub measurements: Vec<(f64, f64, f64)>,
}

/// S(t) = −k_B·R·t·(v/R) = −k_B·v·t for a state measured at t = 0.
/// A measurement resets the entropy to zero.
pub fn entropy_trajectory(state: &FreeWaveParams, times: &[f64], measured_at: &[f64]) -> Result<EntropyTrajectory> {
    let (v, rate) = (state.speed(), state.rate());
    if rate <= 0.0 || (rate - v).abs() > 1e-12 * v {
        return Err(Error::NotNormalized(format!(
            "entropy needs R = v, got R = {rate}, v = {v}"
        )));
    }
    let kb = state.constants().kb();
    let s = |t: f64| -kb * rate * t * (v / rate);
    for &t in times.iter().chain(measured_at) {
        ensure_finite("t", t)?;
        if t < 0.0 {
            return Err(invalid("t", "times are measured from the initial measurement at t = 0"));
        }
    }
    Ok(EntropyTrajectory {
        times: times.to_vec(),
        entropy: times.iter().map(|&t| s(t)).collect(),
        measurements: measured_at.iter().map(|&t| (t, s(t), 0.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_free_state;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn wave(v: f64, rate: f64) -> FreeWaveParams {
        make_free_state(v, rate, PhysicalConstants::default(), Branch::Incoming).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn three(weights: [f64; 3]) -> SuperposedState {
        let amps: Vec<Complex64> = weights.iter().map(|w| c(w.sqrt())).collect();
        SuperposedState::free(&amps, &[wave(1.0, 1.0), wave(2.0, 0.5), wave(0.5, 2.0)]).unwrap()
    }

    #[test]
    fn rejects_unnormalized_superposition() {
        assert!(matches!(
            SuperposedState::free(&[c(1.0), c(1.0)], &[wave(1.0, 1.0), wave(2.0, 1.0)]),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn evolution_examples() {
        let s = SuperposedState::free(&[c(1.0)], &[wave(1.0, 1.0)]).unwrap();
        let e = evolve_state(&s, 2.0).unwrap();
        assert_relative_eq!(e.norm_sqr, 7.38905609893065, max_relative = 1e-14);
        let same = evolve_state(&three([0.5, 0.3, 0.2]), 0.0).unwrap();
        assert_eq!(same.amplitudes, three([0.5, 0.3, 0.2]).amplitudes());
        let plane = SuperposedState::free(&[c(1.0)], &[wave(1.0, 0.0)]).unwrap();
        assert_relative_eq!(evolve_state(&plane, 5.0).unwrap().norm_sqr, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn density_evolution_examples() {
        let k = PhysicalConstants::default();
        let rho = DensityMatrix::diagonal(&[0.5, 0.5]).unwrap();
        let energies = [wave(1.0, 1.0), wave(2.0, 1.0)].map(|w| Wave::Free(w).energy());
        let out = evolve_density(&rho, &energies, 1.5, k).unwrap();
        assert_relative_eq!(out.trace(), 1.5f64.exp(), max_relative = 1e-14);
        assert_eq!(evolve_density(&rho, &energies, 0.0, k).unwrap(), rho);

        let s = three([0.5, 0.3, 0.2]);
        let pure = DensityMatrix::pure(&s.amplitudes()).unwrap();
        for t in [0.3, 1.0, 2.5] {
            let e = evolve_density(&pure, &s.energies(), t, k).unwrap();
            let eig = e.eigenvalues();
            assert!(eig[eig.len() - 2].abs() < 1e-10 * eig[eig.len() - 1]);
        }
    }

    #[test]
    fn reduction_and_purity() {
        let third = 1.0 / 3.0;
        let m = reduce_to_mixture(&three([third, third, third]));
        for i in 0..3 {
            assert_relative_eq!(m.get(i, i).re, third, max_relative = 1e-14);
        }
        assert_relative_eq!(purity(&m).unwrap(), third, max_relative = 1e-14);
        let m = reduce_to_mixture(&three([1.0, 0.0, 0.0]));
        assert_eq!(purity(&m).unwrap(), 1.0);
        let m = reduce_to_mixture(&three([0.5, 0.3, 0.2]));
        assert_eq!(m.get(0, 1), c(0.0));
        assert_relative_eq!(purity(&m).unwrap(), 0.38, max_relative = 1e-14);
        let pure = DensityMatrix::pure(&three([0.5, 0.3, 0.2]).amplitudes()).unwrap();
        assert_relative_eq!(purity(&pure).unwrap(), 1.0, max_relative = 1e-14);
        let big = DensityMatrix::diagonal(&[1.0, 1.0]).unwrap();
        assert!(matches!(purity(&big), Err(Error::TraceNotUnity(_))));
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let mut m = DMatrix::from_element(2, 2, c(0.5));
        m[(0, 1)] = Complex64::new(0.5, 0.1);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::diagonal(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let rho =
            DensityMatrix::pure(&[Complex64::new(0.6, 0.1), Complex64::new(0.0, (1.0f64 - 0.37).sqrt())]).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.starts_with("{\"dim\":2,\"entries\":[["));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn staggered_reduction_is_refused() {
        let s = three([0.5, 0.3, 0.2]);
        assert_eq!(reduction_time(&s, 2.0, ReductionTiming::FirstArrival).unwrap(), 1.0);
        assert!(reduction_time(&s, 2.0, ReductionTiming::Staggered).is_err());
    }

    #[test]
    fn entropy_examples() {
        let traj = entropy_trajectory(&wave(1.0, 1.0), &[0.0, 1.0, 2.0], &[2.0]).unwrap();
        assert_eq!(traj.entropy[0], 0.0);
        assert_eq!(traj.entropy[2], -2.0);
        assert_eq!(traj.measurements, vec![(2.0, -2.0, 0.0)]);
        assert!(entropy_trajectory(&wave(1.0, 2.0), &[1.0], &[]).is_err());
    }

    proptest! {
        #[test]
        fn norm_grows_as_exp_rt(rate in 0.0f64..5.0, t in 0.0f64..4.0) {
            let s = SuperposedState::free(&[c(1.0)], &[wave(1.3, rate)]).unwrap();
            let n = evolve_state(&s, t).unwrap().norm_sqr;
            prop_assert!((n / (rate * t).exp() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mixture_purity(a in 0.0f64..1.0, b in 0.0f64..1.0, c3 in 0.0f64..1.0) {
            let total = a + b + c3;
            prop_assume!(total > 1e-3);
            let w = [a / total, b / total, c3 / total];
            let m = reduce_to_mixture(&three(w));
            let p = purity(&m).unwrap();
            prop_assert!((p - w.iter().map(|w| w * w).sum::<f64>()).abs() < 1e-12);
            prop_assert!((m.trace() - 1.0).abs() < 1e-12);
            if w.iter().filter(|&&w| w > 1e-9).count() >= 2 {
                prop_assert!(p < 1.0);
            }
        }

        #[test]
        fn density_semigroup(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let k = PhysicalConstants::default();
            let s = three([0.5, 0.3, 0.2]);
            let rho = DensityMatrix::pure(&s.amplitudes()).unwrap();
            let e = s.energies();
            let once = evolve_density(&rho, &e, t1 + t2, k).unwrap();
            let twice = evolve_density(&evolve_density(&rho, &e, t1, k).unwrap(), &e, t2, k).unwrap();
            let scale = once.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max);
            prop_assert!(once.max_difference(&twice).unwrap() < 1e-10 * scale);
        }

        #[test]
        fn entropy_slope(v in 0.1f64..10.0, t in 0.0f64..10.0) {
            let traj = entropy_trajectory(&wave(v, v), &[t, t + 0.5], &[]).unwrap();
            let slope = (traj.entropy[1] - traj.entropy[0]) / 0.5;
            prop_assert!((slope + v).abs() < 1e-10 * v.max(1.0));
        }
    }
}
