//! Inhomogeneous probability waves in a static potential, the continuity
//! check, and the Sturm–Liouville problem for the envelope amplitude.

use std::cell::Cell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::freewave::{Grid1D, REGION_SLACK};
use crate::numeric::{integrate, CubicSpline};
use crate::types::{Branch, PhysicalConstants};

const MIN_SAMPLES: usize = 8;

/// Sampled wave-number and potential fields plus the envelope parameters.
///
/// The measurement point used for the amplitude and phase reference is
/// `mp_position`; it defaults to the left edge of the table.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    k: CubicSpline,
    potential: CubicSpline,
    rate: f64,
    omega: f64,
    constants: PhysicalConstants,
    mp_position: f64,
    mp_rate: f64,
    /// ∫ dx/v from the left edge to each knot.
    cum_time: Vec<f64>,
    /// ∫ k dx from the left edge to each knot.
    cum_phase: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(
        x: Vec<f64>,
        potential: Vec<f64>,
        k: Vec<f64>,
        rate: f64,
        omega: f64,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        if x.len() < MIN_SAMPLES {
            return Err(invalid(
                "x_samples",
                format!("need at least {MIN_SAMPLES} samples, got {}", x.len()),
            ));
        }
        if potential.len() != x.len() || k.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: if potential.len() != x.len() {
                    potential.len()
                } else {
                    k.len()
                },
            });
        }
        ensure_finite("rate", rate)?;
        ensure_finite("omega", omega)?;
        if rate < 0.0 {
            return Err(invalid("rate", "must be non-negative"));
        }
        if let Some(bad) = k.iter().find(|&&k| !(k > 0.0)) {
            return Err(invalid(
                "kx",
                format!("velocity must be positive everywhere, found k = {bad}"),
            ));
        }
        let x0 = x[0];
        let k = CubicSpline::new(x.clone(), k)?;
        let potential = CubicSpline::new(x, potential)?;
        let mut spec = Self {
            k,
            potential,
            rate,
            omega,
            constants,
            mp_position: x0,
            mp_rate: 0.0,
            cum_time: Vec::new(),
            cum_phase: Vec::new(),
        };
        spec.tabulate()?;
        Ok(spec)
    }

    /// Builds a spec from two (x, value) tables sharing the same abscissae.
    pub fn from_tables(
        potential: &[(f64, f64)],
        k: &[(f64, f64)],
        rate: f64,
        omega: f64,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        if potential.len() != k.len() {
            return Err(Error::DimensionMismatch {
                expected: potential.len(),
                found: k.len(),
            });
        }
        if potential.iter().zip(k).any(|(a, b)| a.0 != b.0) {
            return Err(invalid(
                "tables",
                "potential and wave-number tables must share abscissae",
            ));
        }
        Self::new(
            potential.iter().map(|p| p.0).collect(),
            potential.iter().map(|p| p.1).collect(),
            k.iter().map(|p| p.1).collect(),
            rate,
            omega,
            constants,
        )
    }

    /// Samples closures on `n` uniform points over [a, b].
    #[allow(clippy::too_many_arguments)]
    pub fn from_fns<K, V>(
        a: f64,
        b: f64,
        n: usize,
        k: K,
        v: V,
        rate: f64,
        omega: f64,
        c: PhysicalConstants,
    ) -> Result<Self>
    where
        K: Fn(f64) -> f64,
        V: Fn(f64) -> f64,
    {
        let x = uniform(a, b, n)?;
        let kv = x.iter().map(|&x| k(x)).collect();
        let vv = x.iter().map(|&x| v(x)).collect();
        Self::new(x, vv, kv, rate, omega, c)
    }

    fn tabulate(&mut self) -> Result<()> {
        let knots = self.k.knots().to_vec();
        let mut cum_time = vec![0.0];
        let mut cum_phase = vec![0.0];
        let non_positive = Cell::new(None::<f64>);
        let m_over_hbar = self.constants.mass() / self.constants.hbar();
        for w in knots.windows(2) {
            let dt = integrate(
                |x| {
                    let k = self.k.eval(x);
                    if k <= 0.0 {
                        non_positive.set(Some(x));
                    }
                    m_over_hbar / k
                },
                w[0],
                w[1],
                1e-15 * (w[1] - w[0]),
            )?;
            let dp = integrate(|x| self.k.eval(x), w[0], w[1], 1e-15 * (w[1] - w[0]))?;
            cum_time.push(cum_time.last().unwrap() + dt);
            cum_phase.push(cum_phase.last().unwrap() + dp);
        }
        if let Some(x) = non_positive.get() {
            return Err(invalid(
                "kx",
                format!("interpolated velocity is not positive near x = {x}"),
            ));
        }
        self.cum_time = cum_time;
        self.cum_phase = cum_phase;
        Ok(())
    }

    pub fn with_mp_position(mut self, x: f64) -> Result<Self> {
        self.check_domain(x)?;
        self.mp_position = x;
        Ok(self)
    }

    /// Envelope rate assumed at the measurement point; physically zero.
    pub fn with_mp_rate(mut self, rate: f64) -> Result<Self> {
        self.mp_rate = ensure_finite("mp_rate", rate)?;
        Ok(self)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }
    pub fn mp_position(&self) -> f64 {
        self.mp_position
    }
    pub fn mp_rate(&self) -> f64 {
        self.mp_rate
    }
    pub fn x_start(&self) -> f64 {
        self.k.x_min()
    }
    pub fn x_end(&self) -> f64 {
        self.k.x_max()
    }
    pub fn samples(&self) -> &[f64] {
        self.k.knots()
    }

    pub fn k_at(&self, x: f64) -> f64 {
        self.k.eval(x)
    }
    pub fn potential_at(&self, x: f64) -> f64 {
        self.potential.eval(x)
    }
    pub fn velocity_at(&self, x: f64) -> f64 {
        self.constants.hbar() * self.k.eval(x) / self.constants.mass()
    }
    pub fn k_mp(&self) -> f64 {
        self.k.eval(self.mp_position)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        ensure_finite("x", x)?;
        let slack = REGION_SLACK * x.abs().max(1.0);
        if x < self.x_start() - slack || x > self.x_end() + slack {
            return Err(invalid(
                "x",
                format!(
                    "{x} outside the tabulated domain [{}, {}]",
                    self.x_start(),
                    self.x_end()
                ),
            ));
        }
        Ok(())
    }

    fn interval(&self, x: f64) -> usize {
        let knots = self.k.knots();
        knots.partition_point(|&k| k <= x).clamp(1, knots.len() - 1) - 1
    }

    fn cumulative<F: Fn(f64) -> f64>(&self, table: &[f64], f: F, x: f64) -> f64 {
        let i = self.interval(x);
        let a = self.k.knots()[i];
        let tol = 1e-15 * (x - a).abs().max(f64::MIN_POSITIVE);
        // Positivity was checked at construction, so this cannot fail to converge
        // for sane tables; fall back to a single rule if it does.
        let part = integrate(&f, a, x, tol).unwrap_or_else(|_| integrate(&f, a, x, 1e-10).unwrap_or(f64::NAN));
        table[i] + part
    }

    fn time_unchecked(&self, x: f64) -> f64 {
        let m_over_hbar = self.constants.mass() / self.constants.hbar();
        self.cumulative(&self.cum_time, |s| m_over_hbar / self.k.eval(s), x)
    }

    fn phase_unchecked(&self, x: f64) -> f64 {
        let from_start = self.cumulative(&self.cum_phase, |s| self.k.eval(s), x);
        let mp = self.cumulative(&self.cum_phase, |s| self.k.eval(s), self.mp_position);
        self.k_mp() * self.mp_position + from_start - mp
    }

    fn density_unchecked(&self, branch: Branch, x: f64, t: f64) -> f64 {
        let pref = self.k_mp() / self.k.eval(x).abs();
        pref * (branch.sign() * self.rate * (t - self.time_unchecked(x))).exp()
    }

    fn psi_unchecked(&self, branch: Branch, x: f64, t: f64) -> Complex64 {
        let amp = (self.k_mp() / self.k.eval(x).abs()).sqrt();
        let env = branch.sign() * 0.5 * self.rate * (t - self.time_unchecked(x));
        amp * Complex64::new(env, self.phase_unchecked(x) - self.omega * t).exp()
    }

    fn check_region(&self, branch: Branch, x: f64, t: f64) -> Result<()> {
        self.check_domain(x)?;
        ensure_finite("t", t)?;
        let arrival = self.time_unchecked(x);
        let slack = REGION_SLACK * arrival.abs().max(1.0);
        let ok = match branch {
            Branch::Incoming => t <= arrival + slack,
            Branch::Outgoing => t >= arrival - slack,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::RegionMismatch { branch, x, t })
        }
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    ensure_finite("a", a)?;
    ensure_finite("b", b)?;
    if a >= b || n < 2 {
        return Err(invalid("grid", format!("bad uniform grid [{a}, {b}] with {n} points")));
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { b } else { a + i as f64 * h }).collect())
}

/// Parses a whitespace-separated two-column table; `#` starts a comment.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    reason: format!("not a finite number: {s}"),
                })
        };
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(rows)
}

/// ∫ dx'/v(x') from the left edge of the table to `x`.
pub fn arrival_time(spec: &PotentialSpec, x: f64) -> Result<f64> {
    spec.check_domain(x)?;
    Ok(spec.time_unchecked(x))
}

/// ∫_a^b k(x) dx.
pub fn phase_integral(spec: &PotentialSpec, a: f64, b: f64) -> Result<f64> {
    spec.check_domain(a)?;
    spec.check_domain(b)?;
    let f = |s| spec.k_at(s);
    Ok(spec.cumulative(&spec.cum_phase, f, b) - spec.cumulative(&spec.cum_phase, f, a))
}

/// Spatial phase, referenced so that it equals k_mp·x at the measurement point.
pub fn phase(spec: &PotentialSpec, x: f64) -> Result<f64> {
    spec.check_domain(x)?;
    Ok(spec.phase_unchecked(x))
}

pub fn psi_potential(spec: &PotentialSpec, branch: Branch, x: f64, t: f64) -> Result<Complex64> {
    spec.check_region(branch, x, t)?;
    Ok(spec.psi_unchecked(branch, x, t))
}

pub fn prob_density_potential(spec: &PotentialSpec, branch: Branch, x: f64, t: f64) -> Result<f64> {
    spec.check_region(branch, x, t)?;
    Ok(spec.density_unchecked(branch, x, t))
}

/// max |∂P/∂t + ∂(Pv)/∂x| over the grid, by central differences with step h.
pub fn continuity_residual(spec: &PotentialSpec, branch: Branch, grid: &Grid1D, h: f64) -> Result<f64> {
    check_step(h)?;
    let reach = 3.0 * h;
    spec.check_domain(grid.x_min - reach)?;
    spec.check_domain(grid.x_max + reach)?;
    let t = grid.t;
    let inside = match branch {
        Branch::Incoming => spec.time_unchecked(grid.x_min - reach) >= t + reach,
        Branch::Outgoing => spec.time_unchecked(grid.x_max + reach) <= t - reach,
    };
    if !inside {
        let mp = mp_at_time(spec, t);
        return Err(Error::StraddlesMeasurementPoint { mp, guard: reach });
    }
    let p = |x: f64, t: f64| spec.density_unchecked(branch, x, t);
    continuity_residual_of(p, p, |x| spec.velocity_at(x), grid, h)
}

/// Continuity residual for arbitrary fields. `p_time` enters the ∂t term and
/// `p_flux` the flux term, which lets a defect be injected into one of them.
pub fn continuity_residual_of<A, B, V>(p_time: A, p_flux: B, velocity: V, grid: &Grid1D, h: f64) -> Result<f64>
where
    A: Fn(f64, f64) -> f64,
    B: Fn(f64, f64) -> f64,
    V: Fn(f64) -> f64,
{
    check_step(h)?;
    let t = grid.t;
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let dpdt = (p_time(x, t + h) - p_time(x, t - h)) / (2.0 * h);
        let flux = |s: f64| p_flux(s, t) * velocity(s);
        let dflux = (flux(x + h) - flux(x - h)) / (2.0 * h);
        let r = (dpdt + dflux).abs();
        if !r.is_finite() {
            return Err(Error::NonFinite("continuity residual"));
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", "difference step must be positive"));
    }
    Ok(())
}

/// Position of the peak at time t, by bisection on the arrival time.
fn mp_at_time(spec: &PotentialSpec, t: f64) -> f64 {
    let (mut a, mut b) = (spec.x_start(), spec.x_end());
    if t <= 0.0 {
        return a;
    }
    if t >= spec.time_unchecked(b) {
        return b;
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if spec.time_unchecked(m) < t {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLimitReport {
    pub d_equals_k_mp: bool,
    pub r_zero_consistent: bool,
    pub density: f64,
    pub prefactor: f64,
    pub plane_wave_residual: f64,
}

/// Treats `x` as the measurement point and checks that the wave there is the
/// plane wave exp[i k(x) x − iωt] at t = arrival_time(x).
pub fn mp_limit_check(spec: &PotentialSpec, x: f64) -> Result<MpLimitReport> {
    let at = spec.clone().with_mp_position(x)?;
    let t = at.time_unchecked(x);
    let k = at.k_at(x);
    let prefactor = at.k_mp() / k.abs();
    let density = at.density_unchecked(Branch::Incoming, x, t);
    let psi = at.psi_unchecked(Branch::Incoming, x, t);
    let plane = Complex64::new(0.0, k * x - at.omega * t).exp();
    Ok(MpLimitReport {
        d_equals_k_mp: (prefactor - 1.0).abs() <= 1e-12,
        r_zero_consistent: spec.mp_rate == 0.0,
        density,
        prefactor,
        plane_wave_residual: (psi - plane).norm(),
    })
}

/// The envelope-amplitude eigenproblem
/// −(ħ²/2m) R″ + [ħ²k²/2m + V] R = E R on [x0, x_end], R′(x0) = 0, R(x_end) = 0.
#[derive(Debug, Clone)]
pub struct SLProblem {
    x0: f64,
    x_end: f64,
    k: CubicSpline,
    potential: CubicSpline,
    n_eigen: usize,
    n_grid: usize,
    constants: PhysicalConstants,
}

/// Default number of intervals in the shooting grid.
pub const DEFAULT_SL_GRID: usize = 2000;

/// Largest local wave number times step the solver will trust.
const RESOLUTION_CEILING: f64 = 0.1;

impl SLProblem {
    /// `samples` are the abscissae of the `k` and `potential` tables; they must
    /// cover [x0, x_end].
    pub fn new(
        x0: f64,
        x_end: f64,
        samples: Vec<f64>,
        k: Vec<f64>,
        potential: Vec<f64>,
        n_eigen: usize,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        ensure_finite("x0", x0)?;
        ensure_finite("x_end", x_end)?;
        if x0 >= x_end {
            return Err(invalid("domain", format!("x0 {x0} must be below x_end {x_end}")));
        }
        if n_eigen == 0 {
            return Err(invalid("n_eigen", "must request at least one eigenpair"));
        }
        let kk = CubicSpline::new(samples.clone(), k)?;
        let vv = CubicSpline::new(samples, potential)?;
        if kk.x_min() > x0 || kk.x_max() < x_end {
            return Err(invalid("samples", "tables must cover the whole domain"));
        }
        Ok(Self {
            x0,
            x_end,
            k: kk,
            potential: vv,
            n_eigen,
            n_grid: DEFAULT_SL_GRID,
            constants,
        })
    }

    /// Samples closures on a fine uniform table over the domain.
    pub fn from_fns<K, V>(x0: f64, x_end: f64, k: K, v: V, n_eigen: usize, constants: PhysicalConstants) -> Result<Self>
    where
        K: Fn(f64) -> f64,
        V: Fn(f64) -> f64,
    {
        let x = uniform(x0, x_end, 4001)?;
        let kv = x.iter().map(|&x| k(x)).collect();
        let vv = x.iter().map(|&x| v(x)).collect();
        Self::new(x0, x_end, x, kv, vv, n_eigen, constants)
    }

    pub fn with_grid(mut self, n_grid: usize) -> Result<Self> {
        if n_grid < 16 {
            return Err(invalid("n_grid", "need at least 16 intervals"));
        }
        self.n_grid = n_grid;
        Ok(self)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x0, self.x_end)
    }
    pub fn n_eigen(&self) -> usize {
        self.n_eigen
    }
    pub fn n_grid(&self) -> usize {
        self.n_grid
    }
    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }
    pub fn potential_at(&self, x: f64) -> f64 {
        self.potential.eval(x)
    }

    /// q(x) = k² + 2mV/ħ², so that R″ = (q − λ) R with λ = 2mE/ħ².
    fn q(&self, x: f64) -> f64 {
        let k = self.k.eval(x);
        let c = self.constants;
        k * k + 2.0 * c.mass() * self.potential.eval(x) / (c.hbar() * c.hbar())
    }

    fn lambda_to_energy(&self, lambda: f64) -> f64 {
        lambda * self.constants.kinetic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SLSolution {
    pub grid: Vec<f64>,
    /// Energies ħω_n, increasing.
    pub eigenvalues: Vec<f64>,
    /// R_n sampled on `grid`, each with ∫R_n² dx = 1.
    pub eigenfunctions: Vec<Vec<f64>>,
}

struct Shooter {
    h: f64,
    x: Vec<f64>,
    q: Vec<f64>,
    dq0: f64,
    ddq0: f64,
}

impl Shooter {
    fn new(p: &SLProblem) -> Self {
        let n = p.n_grid;
        let x = uniform(p.x0, p.x_end, n + 1).expect("validated domain");
        let h = x[1] - x[0];
        let q: Vec<f64> = x.iter().map(|&x| p.q(x)).collect();
        let e = 1e-3 * (p.x_end - p.x0);
        let dq0 = (-3.0 * p.q(p.x0) + 4.0 * p.q(p.x0 + e) - p.q(p.x0 + 2.0 * e)) / (2.0 * e);
        let ddq0 = (p.q(p.x0) - 2.0 * p.q(p.x0 + e) + p.q(p.x0 + 2.0 * e)) / (e * e);
        Self { h, x, q, dq0, ddq0 }
    }

    /// Numerov integration from x0 with R(x0) = 1, R′(x0) = 0.
    fn shoot(&self, lambda: f64) -> Vec<f64> {
        let h2 = self.h * self.h;
        let n = self.x.len();
        let g: Vec<f64> = self.q.iter().map(|q| q - lambda).collect();
        let mut y = vec![0.0; n];
        y[0] = 1.0;
        let h = self.h;
        y[1] = 1.0 + h2 * g[0] / 2.0 + h2 * h * self.dq0 / 6.0 + h2 * h2 * (self.ddq0 + g[0] * g[0]) / 24.0;
        for i in 1..n - 1 {
            let a = 1.0 - h2 * g[i + 1] / 12.0;
            let b = 2.0 * (1.0 + 5.0 * h2 * g[i] / 12.0);
            let c = 1.0 - h2 * g[i - 1] / 12.0;
            y[i + 1] = (b * y[i] - c * y[i - 1]) / a;
            if y[i + 1].abs() > 1e150 {
                for v in &mut y[..=i + 1] {
                    *v *= 1e-150;
                }
            }
        }
        y
    }

    fn sign_changes(&self, lambda: f64) -> usize {
        let y = self.shoot(lambda);
        let mut count = 0;
        let mut last = y[0];
        for &v in &y[1..] {
            if v == 0.0 {
                continue;
            }
            if v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
        count
    }
}

/// Lowest `n_eigen` eigenpairs by Numerov shooting and node-count bisection.
pub fn solve_sturm_liouville(problem: &SLProblem) -> Result<SLSolution> {
    let shooter = Shooter::new(problem);
    let q_min = shooter.q.iter().cloned().fold(f64::INFINITY, f64::min);
    let q_max = shooter.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ceiling = q_min + (RESOLUTION_CEILING / shooter.h).powi(2);

    let lower = q_min - 1.0;
    let mut upper = q_max.max(q_min) + 1.0;
    let mut expansions = 0;
    while shooter.sign_changes(upper) < problem.n_eigen {
        upper = q_max.max(q_min) + 2.0 * (upper - q_max.max(q_min));
        expansions += 1;
        if upper > ceiling || expansions > 200 {
            let found = (0..problem.n_eigen)
                .take_while(|&n| bisect_level(&shooter, n, lower, ceiling).is_ok_and(|l| l < ceiling))
                .count();
            return Err(Error::InsufficientEigenvalues {
                found,
                requested: problem.n_eigen,
            });
        }
    }

    let mut eigenvalues = Vec::with_capacity(problem.n_eigen);
    let mut eigenfunctions = Vec::with_capacity(problem.n_eigen);
    for n in 0..problem.n_eigen {
        let lambda = bisect_level(&shooter, n, lower, upper)?;
        if lambda > ceiling {
            return Err(Error::InsufficientEigenvalues {
                found: n,
                requested: problem.n_eigen,
            });
        }
        let mut y = shooter.shoot(lambda);
        let last = y.len() - 1;
        y[last] = 0.0;
        let norm = trapezoid_sq(&y, shooter.h).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        eigenvalues.push(problem.lambda_to_energy(lambda));
        eigenfunctions.push(y);
    }
    Ok(SLSolution {
        grid: shooter.x,
        eigenvalues,
        eigenfunctions,
    })
}

/// λ_n = inf { λ : the shot has at least n + 1 sign changes }.
fn bisect_level(shooter: &Shooter, n: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    const MAX_ITER: usize = 200;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            return Ok(mid);
        }
        if shooter.sign_changes(mid) > n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NoConvergence {
        what: format!("eigenvalue bisection for level {n}"),
        iterations: MAX_ITER,
    })
}

fn trapezoid_sq(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    let inner: f64 = y[1..n - 1].iter().map(|v| v * v).sum();
    h * (inner + 0.5 * (y[0] * y[0] + y[n - 1] * y[n - 1]))
}

/// ∫ R_m R_n dx on the solution grid.
pub fn overlap(solution: &SLSolution, m: usize, n: usize) -> f64 {
    let h = solution.grid[1] - solution.grid[0];
    let a = &solution.eigenfunctions[m];
    let b = &solution.eigenfunctions[n];
    let len = a.len();
    let inner: f64 = (1..len - 1).map(|i| a[i] * b[i]).sum();
    h * (inner + 0.5 * (a[0] * b[0] + a[len - 1] * b[len - 1]))
}

/// Eigenvalues of the second-order difference matrix with `n` intervals,
/// Richardson-extrapolated against 2n intervals. Used as an independent check.
pub fn fd_oracle_eigenvalues(problem: &SLProblem, n: usize) -> Result<Vec<f64>> {
    let coarse = fd_eigenvalues(problem, n)?;
    let fine = fd_eigenvalues(problem, 2 * n)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Symmetric tridiagonal difference matrix (Neumann ghost point at x0,
/// Dirichlet at x_end) solved by Sturm-sequence bisection.
pub fn fd_eigenvalues(problem: &SLProblem, n: usize) -> Result<Vec<f64>> {
    if n < 16 {
        return Err(invalid("n", "need at least 16 intervals"));
    }
    let h = (problem.x_end - problem.x0) / n as f64;
    let h2 = h * h;
    // Unknowns at x_0 .. x_{n-1}.
    let diag: Vec<f64> = (0..n)
        .map(|i| 2.0 / h2 + problem.q(problem.x0 + i as f64 * h))
        .collect();
    let mut off = vec![-1.0 / h2; n - 1];
    off[0] = -std::f64::consts::SQRT_2 / h2;

    let count_below = |lambda: f64| {
        let mut count = 0;
        let mut d = diag[0] - lambda;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let prev = if d == 0.0 { f64::EPSILON * h2.recip() } else { d };
            d = diag[i] - lambda - off[i - 1] * off[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };

    let gersh_lo = diag
        .iter()
        .enumerate()
        .map(|(i, d)| d - off.get(i).map_or(0.0, |o| o.abs()) - if i > 0 { off[i - 1].abs() } else { 0.0 })
        .fold(f64::INFINITY, f64::min);
    let gersh_hi = diag
        .iter()
        .enumerate()
        .map(|(i, d)| d + off.get(i).map_or(0.0, |o| o.abs()) + if i > 0 { off[i - 1].abs() } else { 0.0 })
        .fold(f64::NEG_INFINITY, f64::max);
    if problem.n_eigen > n {
        return Err(Error::InsufficientEigenvalues {
            found: n,
            requested: problem.n_eigen,
        });
    }
    let mut out = Vec::with_capacity(problem.n_eigen);
    for level in 0..problem.n_eigen {
        let (mut lo, mut hi) = (gersh_lo, gersh_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(mid) > level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(problem.lambda_to_energy(0.5 * (lo + hi)));
    }
    Ok(out)
}

/// Arrival times t_n(x) = ∫_{x0}^{x} dx'/v_n with ħk_n = √(2m(E_n − V)),
/// one per eigenvalue of `solution`.
pub fn discrete_arrival_times(problem: &SLProblem, solution: &SLSolution, x: f64) -> Result<Vec<f64>> {
    let (x0, x_end) = problem.domain();
    ensure_finite("x", x)?;
    if x < x0 || x > x_end {
        return Err(invalid("x", format!("{x} outside [{x0}, {x_end}]")));
    }
    let c = problem.constants;
    solution
        .eigenvalues
        .iter()
        .map(|&e| {
            let bad = Cell::new(false);
            let t = integrate(
                |s| {
                    let kinetic = e - problem.potential_at(s);
                    if kinetic <= 0.0 {
                        bad.set(true);
                        return 0.0;
                    }
                    let v = (2.0 * kinetic / c.mass()).sqrt();
                    1.0 / v
                },
                x0,
                x,
                1e-13 * (x - x0).max(1.0),
            )?;
            if bad.get() {
                return Err(invalid("energy", format!("E = {e} is below the potential on the path")));
            }
            Ok(t)
        })
        .collect()
}
