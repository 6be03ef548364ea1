//! One function per scenario. Each returns its data tables, in write order,
//! and the invariant checks it ran.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use probwave::analysis::{contour_integral, uncertainty_decompose, ComplexSampleSet, Contour, DensityKind};
use probwave::evolution::{
    entropy_trajectory, evolve_state, purity, reduce_to_mixture, DensityMatrix, SuperposedState,
};
use probwave::freewave::{
    normalize_state, prob_density_free, psi_free, schrodinger_residual, total_probability,
    total_probability_quadrature, Derivatives, Grid1D,
};
use probwave::measurement::{
    arrival_order, compare_averages, composite_density_at_event, composite_schrodinger_residual, density_at_event,
    dirac_project, mixture_density, run_ensemble, sample_outcome, stream_rng, tensor_compose, von_neumann_project,
    Disposition, Factor, MeasurementEvent,
};
use probwave::potential::{
    arrival_time, continuity_residual, fd_oracle_eigenvalues, mp_limit_check, overlap, parse_table,
    prob_density_potential, psi_potential, solve_sturm_liouville, PotentialSpec, SLProblem,
};
use probwave::spectral::{branch_at, eigenvalue, galilean_phase, probability_field, Observable};
use probwave::{make_free_state, Branch, PhysicalConstants};
use rand::Rng;

use crate::output::{complex_columns, split, Table};
use crate::{Check, CliError, Config, Params, Scenario};

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn table(&mut self, stem: impl Into<String>, table: Table) {
        self.tables.push((stem.into(), table));
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }
}

type Res<T> = Result<T, CliError>;

pub fn run_scenario(config: &Config) -> Res<Outcome> {
    let p = &config.params;
    match config.scenario {
        Scenario::FreeWave => free_wave(p),
        Scenario::PotentialWave => potential_wave(p),
        Scenario::Ensemble => ensemble(p, config.seed),
        Scenario::Decoherence => decoherence(p),
        Scenario::Entropy => entropy(p),
        Scenario::SturmLiouville => sturm_liouville(p),
        Scenario::Uncertainty => uncertainty(p, config.seed),
        Scenario::Contour => contour(p),
        Scenario::Composite => composite(p, config.seed),
        Scenario::Field => field(p),
    }
}

fn constants(p: &Params) -> Res<PhysicalConstants> {
    Ok(PhysicalConstants::new(
        p.f64("hbar", 1.0)?,
        p.f64("mass", 1.0)?,
        p.f64("kb", 1.0)?,
    )?)
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// `n` points spanning [a, b] exactly, plus `extra` if it lies inside.
fn axis(a: f64, b: f64, n: usize, extra: Option<f64>) -> Res<Vec<f64>> {
    if !(a < b) || n < 2 {
        return Err(config_err(format!("bad grid [{a}, {b}] with {n} points")));
    }
    let m = (n - 1) as f64;
    let mut xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / m).collect();
    if let Some(x) = extra {
        if (a..=b).contains(&x) && !xs.contains(&x) {
            xs.push(x);
            xs.sort_by(f64::total_cmp);
        }
    }
    Ok(xs)
}

fn amplitudes_from(weights: &[f64]) -> Res<Vec<Complex64>> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(config_err("weights must be non-negative"));
    }
    Ok(weights.iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect())
}

fn matched_list(p: &Params, key: &str, n: usize, default: impl Fn(usize) -> f64) -> Res<Vec<f64>> {
    let list = p.f64_list(key, &(0..n).map(default).collect::<Vec<_>>())?;
    if list.len() != n {
        return Err(config_err(format!("`{key}` has {} entries, expected {n}", list.len())));
    }
    Ok(list)
}

fn free_wave(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let v = p.f64("v", 1.0)?;
    let rate = p.f64("rate", v)?;
    let times = p.f64_list("times", &[1.0, 2.0, 3.0])?;
    let mp_x = p.f64("mp_x", 2.0)?;
    let xs = axis(
        p.f64("x_min", 0.0)?,
        p.f64("x_max", 4.0)?,
        p.usize("n", 401)?,
        Some(mp_x),
    )?;
    let state = make_free_state(v, rate, c, Branch::Incoming)?;
    let mut out = Outcome::default();

    for (i, &t) in times.iter().enumerate() {
        let mut table = Table::new(&["x", "t", "P", "re_psi", "im_psi"]);
        for &x in &xs {
            let s = state.with_branch(branch_at(&state, x, t));
            let psi = psi_free(&s, x, t)?;
            table.push(vec![x, t, prob_density_free(&s, x, t)?, psi.re, psi.im]);
        }
        out.table(format!("snapshot_{i}"), table);

        for branch in [Branch::Incoming, Branch::Outgoing] {
            let s = state.with_branch(branch);
            let peak = v * t;
            let (a, b) = match branch {
                Branch::Incoming => (peak + 0.5, peak + 4.5),
                Branch::Outgoing => (peak - 4.5, peak - 0.5),
            };
            let grid = Grid1D::new(a, b, 81, t)?;
            let tag = format!("t{i}_{}", branch.to_string().to_lowercase());
            out.check(Check::within(
                format!("schrodinger_analytic_{tag}"),
                schrodinger_residual(&s, &grid, Derivatives::Analytic)?,
                1e-12,
            ));
            out.check(Check::within(
                format!("schrodinger_difference_{tag}"),
                schrodinger_residual(&s, &grid, Derivatives::Richardson { h: 1e-3 })?,
                1e-6,
            ));
        }
    }

    let t_mp = mp_x / v;
    out.check(Check::within(
        "density_one_at_mp",
        prob_density_free(&state, mp_x, t_mp)? - 1.0,
        1e-12,
    ));
    if rate > 0.0 {
        let closed = total_probability(&state)?;
        let quad = total_probability_quadrature(&state, times.first().copied().unwrap_or(0.0))?;
        out.check(Check::within(
            "total_probability_closed_form",
            quad - closed,
            1e-8 * closed.max(1.0),
        ));
        out.check(Check::within(
            "normalized_total_probability",
            total_probability(&normalize_state(&state)?)? - 1.0,
            1e-10,
        ));
    }
    Ok(out)
}

fn potential_wave(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let energy = p.f64("energy", 2.0)?;
    let rate = p.f64("rate", 1.0)?;
    let omega = energy / c.hbar();
    let spec = match (p.string("potential_table")?, p.string("k_table")?) {
        (Some(vp), Some(kp)) => {
            let read =
                |path: &str| std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {path}: {e}")));
            let vt = parse_table(&read(&vp)?)?;
            let kt = parse_table(&read(&kp)?)?;
            PotentialSpec::from_tables(&vt, &kt, rate, omega, c)?
        }
        (None, None) => {
            let (a, b) = (p.f64("x_start", 0.0)?, p.f64("x_end", 4.0)?);
            let (v0, accel) = (p.f64("v0", 1.0)?, p.f64("accel", 0.2)?);
            let vel = move |x: f64| v0 + accel * (x - a);
            let (m, hbar) = (c.mass(), c.hbar());
            PotentialSpec::from_fns(
                a,
                b,
                p.usize("samples", 201)?,
                move |x| m * vel(x) / hbar,
                move |x| energy - 0.5 * m * vel(x) * vel(x),
                rate,
                omega,
                c,
            )?
        }
        _ => return Err(config_err("potential_table and k_table must be given together")),
    };
    let spec = match p.opt_f64("mp_x")? {
        Some(x) => spec.with_mp_position(x)?,
        None => spec,
    };
    let (a, b) = (spec.x_start(), spec.x_end());
    let t_end = arrival_time(&spec, b)?;
    let times = p.f64_list("times", &[0.25 * t_end, 0.5 * t_end, 0.75 * t_end])?;
    let xs = axis(a, b, p.usize("n", 161)?, None)?;
    let mut out = Outcome::default();

    for (i, &t) in times.iter().enumerate() {
        let mut table = Table::new(&["x", "t", "arrival", "k", "V", "branch", "P", "re_psi", "im_psi"]);
        for &x in &xs {
            let arrival = arrival_time(&spec, x)?;
            let branch = if t <= arrival {
                Branch::Incoming
            } else {
                Branch::Outgoing
            };
            let psi = psi_potential(&spec, branch, x, t)?;
            table.push(vec![
                x,
                t,
                arrival,
                spec.k_at(x),
                spec.potential_at(x),
                branch.sign(),
                prob_density_potential(&spec, branch, x, t)?,
                psi.re,
                psi.im,
            ]);
        }
        out.table(format!("snapshot_{i}"), table);
    }

    let margin = 0.01 * (b - a);
    let h = 1e-3;
    let before = Grid1D::new(a + margin, b - margin, 101, -1.0)?;
    let after = Grid1D::new(a + margin, b - margin, 101, t_end + 1.0)?;
    out.check(Check::within(
        "continuity_incoming",
        continuity_residual(&spec, Branch::Incoming, &before, h)?,
        1e-6,
    ));
    out.check(Check::within(
        "continuity_outgoing",
        continuity_residual(&spec, Branch::Outgoing, &after, h)?,
        1e-6,
    ));
    let mid = 0.5 * (a + b);
    let limit = mp_limit_check(&spec, mid)?;
    out.check(Check::within("mp_prefactor", limit.prefactor - 1.0, 1e-12));
    out.check(Check::within("mp_density", limit.density - 1.0, 1e-12));
    out.check(Check::within("mp_plane_wave", limit.plane_wave_residual, 1e-10));
    Ok(out)
}

fn free_superposition(p: &Params, c: PhysicalConstants) -> Res<(Vec<f64>, SuperposedState)> {
    let weights = p.f64_list("weights", &[0.5, 0.3, 0.2])?;
    let speeds = matched_list(p, "speeds", weights.len(), |i| (i + 1) as f64)?;
    let rates = if p.contains("rates") {
        matched_list(p, "rates", weights.len(), |_| 0.0)?
    } else {
        speeds.clone()
    };
    let waves = speeds
        .iter()
        .zip(&rates)
        .map(|(&v, &r)| make_free_state(v, r, c, Branch::Incoming))
        .collect::<Result<Vec<_>, _>>()?;
    let state = SuperposedState::free(&amplitudes_from(&weights)?, &waves)?;
    Ok((weights, state))
}

fn ensemble(p: &Params, seed: u64) -> Res<Outcome> {
    let c = constants(p)?;
    let (weights, state) = free_superposition(p, c)?;
    let n_trials = p.usize("n_trials", 100_000)? as u64;
    let workers = p.usize("workers", 4)?;
    let mp_x = p.f64("mp_x", 2.0)?;
    let report = run_ensemble(&weights, n_trials, seed, workers)?;
    let mut out = Outcome::default();

    let mut table = Table::new(&["outcome", "count", "frequency", "expected", "z_score"]);
    for i in 0..weights.len() {
        table.push(vec![
            i as f64,
            report.counts[i] as f64,
            report.frequencies[i],
            report.expected[i],
            report.z_scores[i],
        ]);
    }
    out.table("ensemble", table);
    let mut arrivals = Table::new(&["rank", "outcome", "arrival_time"]);
    for (rank, (i, t)) in arrival_order(&state, mp_x)?.into_iter().enumerate() {
        arrivals.push(vec![rank as f64, i as f64, t]);
    }
    out.table("arrivals", arrivals);

    let max_z = report.z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    out.check(Check::below("max_abs_z_score", max_z, 3.0));
    out.check(Check::at_least("chi_square_p_value", report.p_value, 1e-3));

    // One further draw, on a stream the ensemble did not use, picks the
    // outcome whose projection is checked.
    let mut rng = stream_rng(seed, workers as u64);
    let outcome = sample_outcome(&state, &mut rng)?;
    let wave = match state.components()[outcome].wave {
        probwave::evolution::Wave::Free(w) => w,
        _ => unreachable!("ensemble states are free waves"),
    };
    let disposition = if p.bool("record", false)? {
        Disposition::Record
    } else {
        Disposition::Release
    };
    let event = MeasurementEvent::new(mp_x, wave.arrival_time(mp_x), wave.speed())?.with_disposition(disposition);
    let post = dirac_project(&state, outcome, &event)?;
    let again = dirac_project(&post, outcome, &event)?;
    out.checks.extend(projection_checks(
        "dirac",
        &post.amplitudes(),
        outcome,
        density_at_event(&post, outcome, &event)?,
        post.amplitudes() == again.amplitudes()
            && density_at_event(&again, outcome, &event)? == density_at_event(&post, outcome, &event)?,
    ));
    Ok(out)
}

fn projection_checks(tag: &str, amps: &[Complex64], outcome: usize, density: f64, idempotent: bool) -> Vec<Check> {
    let unit = amps
        .iter()
        .enumerate()
        .all(|(i, a)| *a == Complex64::new(if i == outcome { 1.0 } else { 0.0 }, 0.0));
    vec![
        Check::holds(format!("{tag}_unit_amplitudes"), unit),
        Check::within(format!("{tag}_density_at_mp"), density - 1.0, 1e-12),
        Check::holds(format!("{tag}_idempotent"), idempotent),
    ]
}

fn density_rows(table: &mut Table, rho: &DensityMatrix) {
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let z = rho.get(i, j);
            table.push(vec![i as f64, j as f64, z.re, z.im]);
        }
    }
}

fn decoherence(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let (weights, state) = free_superposition(p, c)?;
    let times = p.f64_list("times", &[0.0, 0.5, 1.0, 1.5, 2.0])?;
    let mut out = Outcome::default();

    let mut cols = vec!["t".to_string(), "norm_sqr".to_string()];
    cols.extend((0..state.len()).map(|i| format!("w{i}")));
    let mut evolution = Table::with_columns(cols);
    let mut ratios = Table::new(&["t", "component", "norm_ratio", "expected"]);
    let mut worst = 0.0f64;
    for &t in &times {
        let e = evolve_state(&state, t)?;
        let mut row = vec![t, e.norm_sqr];
        row.extend(e.amplitudes.iter().map(|a| a.norm_sqr() / e.norm_sqr));
        evolution.push(row);
        for (i, comp) in state.components().iter().enumerate() {
            let single = SuperposedState::new(vec![probwave::evolution::Component {
                amplitude: Complex64::new(1.0, 0.0),
                wave: comp.wave.clone(),
            }])?;
            let ratio = evolve_state(&single, t)?.norm_sqr;
            let rate = comp.wave.energy().im * 2.0 / comp.wave.constants().hbar();
            let expected = (rate * t).exp();
            worst = worst.max(((ratio - expected) / expected).abs());
            ratios.push(vec![t, i as f64, ratio, expected]);
        }
    }
    out.table("evolution", evolution);
    out.table("norm_ratio", ratios);

    let pure = DensityMatrix::pure(&state.amplitudes())?;
    let mixed = reduce_to_mixture(&state);
    let mut rho = Table::new(&["i", "j", "rho_re", "rho_im"]);
    density_rows(&mut rho, &pure);
    out.table("rho_pure", rho);
    let mut rho = Table::new(&["i", "j", "rho_re", "rho_im"]);
    density_rows(&mut rho, &mixed);
    out.table("rho_reduced", rho);

    let expected: f64 = weights.iter().map(|w| w * w).sum();
    let got = purity(&mixed)?;
    out.check(Check::within("norm_ratio_exp_rate_t", worst, 1e-10));
    out.check(Check::within("pure_state_purity", purity(&pure)? - 1.0, 1e-12));
    out.check(Check::within("reduced_purity_sum_fourth_powers", got - expected, 1e-12));
    if weights.iter().filter(|w| **w > 0.0).count() >= 2 {
        out.check(Check::below("reduced_state_is_mixed", got, 1.0));
    }
    Ok(out)
}

fn entropy(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let v = p.f64("v", 1.0)?;
    let t_max = p.f64("t_max", 2.0)?;
    let steps = p.usize("steps", 20)?;
    if steps == 0 || !(t_max > 0.0) {
        return Err(config_err("entropy needs steps ≥ 1 and t_max > 0"));
    }
    let measured_at = p.f64_list("measured_at", &[t_max])?;
    let state = make_free_state(v, v, c, Branch::Incoming)?;
    let times: Vec<f64> = (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect();
    let traj = entropy_trajectory(&state, &times, &measured_at)?;
    let mut table = Table::new(&["t", "S", "post_measurement"]);
    for (&t, &s) in traj.times.iter().zip(&traj.entropy) {
        table.push(vec![t, s, 0.0]);
    }
    for &(t, _, after) in &traj.measurements {
        table.push(vec![t, after, 1.0]);
    }
    let mut out = Outcome::default();
    let target = -c.kb() * v;
    let slope_err = traj
        .times
        .windows(2)
        .zip(traj.entropy.windows(2))
        .map(|(t, s)| ((s[1] - s[0]) / (t[1] - t[0]) - target).abs())
        .fold(0.0, f64::max);
    out.check(Check::within("slope_minus_kb_v", slope_err, 1e-10));
    out.check(Check::within("entropy_zero_at_start", traj.entropy[0], 0.0));
    let post = traj.measurements.iter().fold(0.0f64, |m, x| m.max(x.2.abs()));
    out.check(Check::within("entropy_zero_after_measurement", post, 0.0));
    out.table("entropy", table);
    Ok(out)
}

fn sturm_liouville(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let (x0, x_end) = (p.f64("x0", 0.0)?, p.f64("x_end", 1.0)?);
    let (k0, v0, slope) = (p.f64("k0", 1.0)?, p.f64("v0", 0.0)?, p.f64("v_slope", 0.0)?);
    let n_eigen = p.usize("n_eigen", 6)?;
    let problem = SLProblem::from_fns(x0, x_end, move |_| k0, move |x| v0 + slope * (x - x0), n_eigen, c)?
        .with_grid(p.usize("n_grid", probwave::potential::DEFAULT_SL_GRID)?)?;
    let sol = solve_sturm_liouville(&problem)?;
    let oracle = fd_oracle_eigenvalues(&problem, p.usize("oracle_n", 2000)?)?;
    let length = x_end - x0;
    let analytic = |n: usize| {
        let mu = (n as f64 + 0.5) * PI / length;
        c.kinetic() * (mu * mu + k0 * k0) + v0
    };
    let mut out = Outcome::default();
    let mut table = Table::new(&["n", "energy", "oracle", "analytic"]);
    let (mut worst_oracle, mut worst_analytic) = (0.0f64, 0.0f64);
    for (n, (&e, &o)) in sol.eigenvalues.iter().zip(&oracle).enumerate() {
        let a = if slope == 0.0 { analytic(n) } else { f64::NAN };
        worst_oracle = worst_oracle.max(((e - o) / o).abs());
        worst_analytic = worst_analytic.max(((e - a) / a).abs());
        table.push(vec![n as f64, e, o, if a.is_nan() { 0.0 } else { a }]);
    }
    out.table("eigenvalues", table);

    let mut cols = vec!["x".to_string()];
    cols.extend((0..sol.eigenfunctions.len()).map(|n| format!("R{n}")));
    let mut funcs = Table::with_columns(cols);
    for (j, &x) in sol.grid.iter().enumerate() {
        let mut row = vec![x];
        row.extend(sol.eigenfunctions.iter().map(|f| f[j]));
        funcs.push(row);
    }
    out.table("eigenfunctions", funcs);

    if slope == 0.0 {
        out.check(Check::within("closed_form_relative", worst_analytic, 1e-6));
    }
    out.check(Check::within("oracle_relative", worst_oracle, 1e-6));
    let mut ortho = 0.0f64;
    for m in 0..sol.eigenfunctions.len() {
        for n in 0..sol.eigenfunctions.len() {
            let expected = if m == n { 1.0 } else { 0.0 };
            ortho = ortho.max((overlap(&sol, m, n) - expected).abs());
        }
    }
    out.check(Check::within("orthonormality", ortho, 1e-6));
    Ok(out)
}

fn uncertainty(p: &Params, seed: u64) -> Res<Outcome> {
    let n = p.usize("n", 100_000)?;
    let (sr, si) = (p.f64("sigma_re", 2.0)?, p.f64("sigma_im", 1.0)?);
    let rho = p.f64("correlation", 0.0)?;
    let (mr, mi) = (p.f64("mean_re", 0.0)?, p.f64("mean_im", 0.0)?);
    if !(-1.0..=1.0).contains(&rho) || sr < 0.0 || si < 0.0 {
        return Err(config_err("need sigma ≥ 0 and |correlation| ≤ 1"));
    }
    // Unit-variance uniform draws.
    let half = 3f64.sqrt();
    let mut rng = stream_rng(seed, 0);
    let samples: Vec<Complex64> = (0..n)
        .map(|_| {
            let u1: f64 = rng.gen_range(-half..half);
            let u2: f64 = rng.gen_range(-half..half);
            Complex64::new(mr + sr * u1, mi + si * (rho * u1 + (1.0 - rho * rho).sqrt() * u2))
        })
        .collect();
    let set = ComplexSampleSet::new(samples)?;
    let u = uncertainty_decompose(&set);
    let mut out = Outcome::default();
    let mut cols = vec!["var_real".to_string(), "var_imag".to_string()];
    cols.extend(complex_columns("var_complex"));
    cols.extend(["covariance".to_string(), "covariance_term".to_string()]);
    let mut moments = Table::with_columns(cols);
    let [vc_re, vc_im] = split(u.var_complex);
    moments.push(vec![
        u.var_real,
        u.var_imag,
        vc_re,
        vc_im,
        u.covariance,
        u.covariance_term(),
    ]);
    out.table("moments", moments);

    let hbar = p.f64("hbar", 1.0)?;
    let (dx, dp) = (p.f64("dx_imag", 1.0)?, p.f64("dp_imag", 0.5)?);
    let satisfied = probwave::analysis::heisenberg_check(dx, dp, hbar)?;
    let mut h = Table::new(&["dx_imag", "dp_imag", "product", "bound", "satisfied"]);
    h.push(vec![dx, dp, dx * dp, hbar / 2.0, if satisfied { 1.0 } else { 0.0 }]);
    out.table("heisenberg", h);

    let scale = (u.var_real + u.var_imag).max(f64::MIN_POSITIVE);
    out.check(Check::within("real_part_identity", u.real_part_defect(), 1e-12 * scale));
    out.check(Check::within(
        "imag_part_is_twice_covariance",
        vc_im - u.covariance_term(),
        1e-12 * scale,
    ));
    let expected = sr * sr - si * si;
    out.check(Check::within(
        "sample_real_part",
        vc_re - expected,
        10.0 * (sr * sr + si * si) / (n as f64).sqrt(),
    ));
    Ok(out)
}

fn contour(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let v = p.f64("v", 1.0)?;
    let rate = p.f64("rate", v)?;
    let params = make_free_state(v, rate, c, Branch::Incoming)?;
    let t_c = Complex64::new(p.f64("t_re", 0.0)?, p.f64("t_im", 0.0)?);
    let kind: DensityKind = p.string("density")?.as_deref().unwrap_or("incoming").parse()?;
    let mut path = match p.string("path")? {
        Some(file) => {
            let text = std::fs::read_to_string(&file).map_err(|e| config_err(format!("cannot read {file}: {e}")))?;
            Contour::from_csv(&text, t_c)?
        }
        None => {
            let lo = p.f64_list("lower", &[0.0, 0.0])?;
            let hi = p.f64_list("upper", &[1.0, 1.0])?;
            if lo.len() != 2 || hi.len() != 2 {
                return Err(config_err("`lower` and `upper` are [re, im] pairs"));
            }
            Contour::rectangle(Complex64::new(lo[0], lo[1]), Complex64::new(hi[0], hi[1]), t_c)?
        }
    };
    for _ in 0..p.usize("refine", 0)? {
        path = path.refined();
    }

    let sign = match kind {
        DensityKind::IncomingP1 => 1.0,
        DensityKind::OutgoingP1 => -1.0,
    };
    let integrand = |z: Complex64| ((t_c - z / v) * (sign * rate)).exp();
    let antiderivative = |z: Complex64| {
        if rate == 0.0 {
            z
        } else {
            integrand(z) * (-v / (sign * rate))
        }
    };

    let mut cols = vec!["vertex".to_string()];
    cols.extend(complex_columns("x"));
    cols.extend(complex_columns("integrand"));
    cols.extend(complex_columns("cumulative"));
    let mut table = Table::with_columns(cols);
    let verts = path.vertices().to_vec();
    let mut cumulative = Complex64::new(0.0, 0.0);
    let mut length = 0.0;
    let mut peak = 0.0f64;
    for (i, &z) in verts.iter().enumerate() {
        if i > 0 && verts[i - 1] != z {
            let seg = Contour::new(vec![verts[i - 1], z], t_c)?;
            cumulative += contour_integral(kind, &params, &seg)?;
            length += (z - verts[i - 1]).norm();
        }
        let f = integrand(z);
        peak = peak.max(f.norm());
        let mut row = vec![i as f64];
        row.extend(split(z));
        row.extend(split(f));
        row.extend(split(cumulative));
        table.push(row);
    }
    let total = contour_integral(kind, &params, &path)?;
    let (start, end) = (verts[0], *verts.last().unwrap());
    let closed = antiderivative(end) - antiderivative(start);
    let straight = if start == end {
        Complex64::new(0.0, 0.0)
    } else {
        contour_integral(kind, &params, &Contour::new(vec![start, end], t_c)?)?
    };
    let tol = 1e-9 * (length * peak).max(1.0);
    let mut out = Outcome::default();
    out.table("contour", table);
    let mut cols = Vec::new();
    for name in ["integral", "closed_form", "straight"] {
        cols.extend(complex_columns(name));
    }
    let mut summary = Table::with_columns(cols);
    summary.push([total, closed, straight].iter().flat_map(|z| split(*z)).collect());
    out.table("summary", summary);
    if path.is_closed() {
        out.check(Check::within("closed_contour_vanishes", total.norm(), tol));
    }
    out.check(Check::within("closed_form_value", (total - closed).norm(), tol));
    out.check(Check::within("path_independence", (total - straight).norm(), tol));
    out.check(Check::within(
        "segment_sum_consistent",
        (total - cumulative).norm(),
        tol,
    ));
    Ok(out)
}

fn composite(p: &Params, seed: u64) -> Res<Outcome> {
    let c = constants(p)?;
    let weights = p.f64_list("weights", &[0.5, 0.5])?;
    let n = weights.len();
    let sys_v = matched_list(p, "system_speeds", n, |i| (i + 1) as f64)?;
    let ptr_v = matched_list(p, "pointer_speeds", n, |i| 1.5 * (i + 1) as f64)?;
    let sys_r = if p.contains("system_rates") {
        matched_list(p, "system_rates", n, |_| 0.0)?
    } else {
        sys_v.clone()
    };
    let ptr_r = if p.contains("pointer_rates") {
        matched_list(p, "pointer_rates", n, |_| 0.0)?
    } else {
        ptr_v.clone()
    };
    let factors = |v: &[f64], r: &[f64]| -> Res<Vec<Factor>> {
        v.iter()
            .zip(r)
            .map(|(&v, &r)| Ok(Factor::free(make_free_state(v, r, c, Branch::Incoming)?)))
            .collect()
    };
    let registers: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    let state = tensor_compose(
        factors(&sys_v, &sys_r)?,
        factors(&ptr_v, &ptr_r)?,
        registers,
        amplitudes_from(&weights)?,
    )?;
    let mp_x = p.f64("mp_x", 2.0)?;
    let mut out = Outcome::default();

    let eigs: Vec<Complex64> = state
        .system()
        .iter()
        .map(|f| eigenvalue(Observable::H, &f.wave))
        .collect();
    let mut cols = vec!["component".to_string(), "weight".to_string()];
    cols.extend(complex_columns("eigenvalue"));
    cols.push("arrival_time".to_string());
    let mut comps = Table::with_columns(cols);
    for i in 0..n {
        let [re, im] = split(eigs[i]);
        comps.push(vec![
            i as f64,
            weights[i],
            re,
            im,
            state.system()[i].wave.arrival_time(mp_x),
        ]);
    }
    out.table("components", comps);

    let avg = compare_averages(&state, &eigs)?;
    let mut cols = complex_columns("entangled").to_vec();
    cols.push("reduced".to_string());
    let mut averages = Table::with_columns(cols);
    averages.push(vec![avg.entangled.re, avg.entangled.im, avg.reduced]);
    out.table("averages", averages);
    out.check(Check::within(
        "entangled_real_equals_reduced",
        avg.entangled.re - avg.reduced,
        0.0,
    ));
    let imag: f64 = state
        .weights()
        .iter()
        .zip(state.system())
        .map(|(w, f)| w * (c.hbar() * f.wave.rate() / 2.0))
        .sum();
    out.check(Check::within(
        "entangled_imag_equals_weighted_rate",
        avg.entangled.im - imag,
        1e-15 * imag.abs().max(1.0),
    ));

    let outcome = match p.opt_usize("outcome")? {
        Some(i) if i < n => i,
        Some(i) => return Err(config_err(format!("outcome {i} out of range"))),
        None => {
            let w = state.weights();
            let sup = SuperposedState::free(
                &amplitudes_from(&w)?,
                &state.system().iter().map(|f| f.wave).collect::<Vec<_>>(),
            )?;
            sample_outcome(&sup, &mut stream_rng(seed, 0))?
        }
    };
    let wave = state.system()[outcome].wave;
    let event = MeasurementEvent::new(mp_x, wave.arrival_time(mp_x), wave.speed())?;
    let post = von_neumann_project(&state, outcome, &event)?;
    let again = von_neumann_project(&post, outcome, &event)?;
    let density = composite_density_at_event(&post, outcome, &event)?;
    out.checks.extend(projection_checks(
        "von_neumann",
        post.amplitudes(),
        outcome,
        density,
        again.amplitudes() == post.amplitudes() && composite_density_at_event(&again, outcome, &event)? == density,
    ));
    out.check(Check::holds("von_neumann_irreversible", post.is_irreversible()));
    let mut post_table = Table::new(&["component", "amplitude_re", "amplitude_im"]);
    for (i, a) in post.amplitudes().iter().enumerate() {
        post_table.push(vec![i as f64, a.re, a.im]);
    }
    out.table("post_state", post_table);

    let h = p.f64("h", 1e-3)?;
    let t = 0.5;
    let mut worst = 0.0f64;
    for i in 0..n {
        let (vs, vp) = (state.system()[i].wave.speed(), state.pointer()[i].wave.speed());
        let probes: Vec<(f64, f64, f64)> = [1.0, 2.0]
            .iter()
            .flat_map(|&dx| [1.0, 2.0].map(|dq| (vs * t + dx, vp * t + dq, t)))
            .collect();
        worst = worst.max(composite_schrodinger_residual(&state, i, &probes, h)?);
    }
    out.check(Check::within("composite_schrodinger", worst, 1e-6));

    // Two decompositions of the same equal-weight mixture in a two-state basis.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = |re: f64| Complex64::new(re, 0.0);
    let phi = mixture_density(&[vec![z(1.0), z(0.0)], vec![z(0.0), z(1.0)]], &[0.5, 0.5])?;
    let plus_minus = mixture_density(&[vec![z(s), z(s)], vec![z(s), z(-s)]], &[0.5, 0.5])?;
    let mut mix = Table::new(&["i", "j", "phi_re", "phi_im", "pm_re", "pm_im"]);
    for i in 0..2 {
        for j in 0..2 {
            let (a, b) = (phi.get(i, j), plus_minus.get(i, j));
            mix.push(vec![i as f64, j as f64, a.re, a.im, b.re, b.im]);
        }
    }
    out.table("mixture", mix);
    out.check(Check::within(
        "preferred_basis_mixtures_agree",
        phi.max_difference(&plus_minus)?,
        1e-12,
    ));
    Ok(out)
}

fn field(p: &Params) -> Res<Outcome> {
    let c = constants(p)?;
    let v = p.f64("v", 1.0)?;
    let state = make_free_state(v, v, c, Branch::Incoming)?;
    let s_values = axis(0.0, p.f64("s_max", 5.0)?, p.usize("n", 101)?, Some(LN_2))?;
    let mut out = Outcome::default();
    let mut table = Table::new(&["s", "probability"]);
    let mut monotone = true;
    let mut last = f64::INFINITY;
    for &s in &s_values {
        let pi = probability_field(s, &state)?;
        monotone &= pi < last;
        last = pi;
        table.push(vec![s, pi]);
    }
    out.table("field", table);
    out.check(Check::within(
        "field_at_zero",
        probability_field(0.0, &state)? - 1.0,
        0.0,
    ));
    out.check(Check::within(
        "field_at_ln2",
        probability_field(LN_2, &state)? - 0.5,
        1e-15,
    ));
    out.check(Check::holds("field_decreasing", monotone));

    let phase = galilean_phase(v, c)?;
    let xs = axis(0.0, p.f64("x_max", 4.0)?, 41, None)?;
    let times = p.f64_list("times", &[0.0, 1.0, 2.0])?;
    let mut g = Table::new(&[
        "x",
        "t",
        "phase",
        "condition_velocity",
        "condition_curvature",
        "condition_energy",
    ]);
    let mut worst = 0.0f64;
    for &t in &times {
        for &x in &xs {
            let cond = phase.conditions(x, t);
            let scale = 1.0 + phase.eval(x, t).abs();
            worst = worst.max(cond.iter().fold(0.0f64, |m, c| m.max(c.abs())) / scale);
            g.push(vec![x, t, phase.eval(x, t), cond[0], cond[1], cond[2]]);
        }
    }
    out.table("galilean", g);
    out.check(Check::within("galilean_conditions", worst, 1e-6));
    Ok(out)
}
