//! Acceptance suite. Every test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use probwave::analysis::{contour_integral, Contour, DensityKind};
use probwave::evolution::{entropy_trajectory, evolve_state, purity, reduce_to_mixture, SuperposedState};
use probwave::freewave::{
    normalize_state, psi_free, schrodinger_residual, total_probability, total_probability_quadrature, Derivatives,
    Grid1D,
};
use probwave::measurement::{
    compare_averages, composite_density_at_event, density_at_event, dirac_project, mixture_density, run_ensemble,
    stream_rng, tensor_compose, von_neumann_project, Factor, MeasurementEvent,
};
use probwave::potential::{
    continuity_residual, fd_oracle_eigenvalues, solve_sturm_liouville, PotentialSpec, SLProblem,
};
use probwave::spectral::{commutator_check, eigenvalue, CommutatorPair, ComplexCoordinate, Observable};
use probwave::{make_free_state, Branch, FreeWaveParams, PhysicalConstants};
use rand::Rng;

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!(
        "criterion {n:>2} [{}] {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn units() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn wave(v: f64, rate: f64) -> FreeWaveParams {
    make_free_state(v, rate, units(), Branch::Incoming).unwrap()
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[test]
fn criterion_01_dispersion_fidelity() {
    let start = Instant::now();
    let mut rng = stream_rng(1, 0);
    let (mut analytic, mut difference) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let v = rng.gen_range(0.1..=10.0);
        let rate = rng.gen_range(0.0..=10.0);
        let t = rng.gen_range(-2.0..=2.0);
        let branch = if rng.gen_bool(0.5) {
            Branch::Incoming
        } else {
            Branch::Outgoing
        };
        let s = make_free_state(v, rate, units(), branch).unwrap();
        let (guard, span) = (0.01 + 3e-3 * v.max(1.0), 2.0 * v.max(1.0));
        let peak = v * t;
        let (a, b) = match branch {
            Branch::Incoming => (peak + guard, peak + guard + span),
            Branch::Outgoing => (peak - guard - span, peak - guard),
        };
        let grid = Grid1D::new(a, b, 21, t).unwrap();
        analytic = analytic.max(schrodinger_residual(&s, &grid, Derivatives::Analytic).unwrap());
        difference = difference.max(schrodinger_residual(&s, &grid, Derivatives::Richardson { h: 1e-3 }).unwrap());
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "dispersion fidelity",
        analytic < 1e-12 && difference < 1e-6 && elapsed < Duration::from_secs(5),
        format!("analytic {analytic:.2e} < 1e-12, difference (h = 1e-3) {difference:.2e} < 1e-6, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_normalization() {
    let mut rng = stream_rng(2, 0);
    let (mut norm, mut closed) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let s = wave(rng.gen_range(0.1..=10.0), rng.gen_range(0.1..=10.0));
        norm = norm.max((total_probability(&normalize_state(&s).unwrap()).unwrap() - 1.0).abs());
        let q = total_probability_quadrature(&s, rng.gen_range(-1.0..=1.0)).unwrap();
        closed = closed.max((q - total_probability(&s).unwrap()).abs());
    }
    verdict(
        2,
        "normalization",
        norm <= 1e-10 && closed <= 1e-8,
        format!("|P - 1| {norm:.2e} <= 1e-10, |v/R - quadrature| {closed:.2e} <= 1e-8"),
    );
}

#[test]
fn criterion_03_non_unitarity() {
    let mut rng = stream_rng(3, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rate = rng.gen_range(0.0..=5.0);
        let t = rng.gen_range(0.0..=4.0);
        let s = SuperposedState::free(&[real(1.0)], &[wave(1.0, rate)]).unwrap();
        let ratio = evolve_state(&s, t).unwrap().norm_sqr;
        let expected = (rate * t).exp();
        worst = worst.max(((ratio - expected) / expected).abs());
    }
    let plane = SuperposedState::free(&[real(1.0)], &[wave(1.0, 0.0)]).unwrap();
    let unitary = (evolve_state(&plane, 3.7).unwrap().norm_sqr - 1.0).abs();
    verdict(
        3,
        "non-unitarity law",
        worst <= 1e-10 && unitary <= 1e-10,
        format!("max relative |ratio - exp(Rt)| {worst:.2e} <= 1e-10, R = 0 deviation {unitary:.2e}"),
    );
}

#[test]
fn criterion_04_purity_loss() {
    let mut rng = stream_rng(4, 0);
    let (mut worst, mut mixed) = (0.0f64, true);
    for trial in 0..200 {
        let n = 2 + trial % 4;
        let raw: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = raw.iter().map(|a| a / norm).collect();
        let waves: Vec<FreeWaveParams> = (0..n).map(|i| wave(1.0 + i as f64, 1.0 + i as f64)).collect();
        let s = SuperposedState::free(&amps, &waves).unwrap();
        let p = purity(&reduce_to_mixture(&s)).unwrap();
        let expected: f64 = amps.iter().map(|a| a.norm_sqr().powi(2)).sum();
        worst = worst.max((p - expected).abs());
        mixed &= p < 1.0;
    }
    verdict(
        4,
        "purity loss",
        worst <= 1e-12 && mixed,
        format!("|purity - sum |a|^4| {worst:.2e} <= 1e-12, all mixtures below 1: {mixed}"),
    );
}

#[test]
fn criterion_05_born_statistics() {
    let weights = [0.5, 0.3, 0.2];
    let start = Instant::now();
    let (mut within, mut p_ok) = (0, 0);
    for seed in 0..100 {
        let r = run_ensemble(&weights, 100_000, seed, 4).unwrap();
        within += usize::from(r.within_sigmas(3.0));
        p_ok += usize::from(r.p_value > 1e-3);
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        "Born statistics",
        within >= 99 && p_ok >= 99 && elapsed < Duration::from_secs(10),
        format!("{within}/100 seeds within 3 sigma, {p_ok}/100 with p > 0.001, {elapsed:.2?} for 100 ensembles"),
    );
}

#[test]
fn criterion_06_projection_postulates() {
    let waves = [wave(1.0, 1.0), wave(2.0, 2.0)];
    let amps = [real(0.6), real(0.8)];
    let state = SuperposedState::free(&amps, &waves).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for outcome in 0..2 {
        let w = waves[outcome];
        let event = MeasurementEvent::new(2.0, w.arrival_time(2.0), w.speed()).unwrap();
        let post = dirac_project(&state, outcome, &event).unwrap();
        let again = dirac_project(&post, outcome, &event).unwrap();
        let unit: Vec<Complex64> = (0..2).map(|i| real(if i == outcome { 1.0 } else { 0.0 })).collect();
        let density = density_at_event(&post, outcome, &event).unwrap();
        let post_wave = match &post.components()[outcome].wave {
            probwave::evolution::Wave::Free(p) => *p,
            _ => unreachable!(),
        };
        let plane = Complex64::from_polar(1.0, w.k() * event.x - w.omega() * event.t);
        let plane_err = (psi_free(&post_wave, event.x, event.t).unwrap() - plane).norm();
        ok &= post.amplitudes() == unit
            && again.amplitudes() == unit
            && density == 1.0
            && density_at_event(&again, outcome, &event).unwrap() == density
            && plane_err <= 1e-12;
        notes.push(format!(
            "dirac {outcome}: density {density}, plane-wave error {plane_err:.1e}"
        ));
    }

    let e = |i: usize| (0..2).map(|j| real(if i == j { 1.0 } else { 0.0 })).collect::<Vec<_>>();
    let composite = tensor_compose(
        vec![Factor::free(waves[0]), Factor::free(waves[1])],
        vec![Factor::free(wave(1.5, 1.5)), Factor::free(wave(3.0, 3.0))],
        vec![e(0), e(1)],
        amps.to_vec(),
    )
    .unwrap();
    for outcome in 0..2 {
        let w = waves[outcome];
        let event = MeasurementEvent::new(2.0, w.arrival_time(2.0), w.speed()).unwrap();
        let post = von_neumann_project(&composite, outcome, &event).unwrap();
        let again = von_neumann_project(&post, outcome, &event).unwrap();
        let density = composite_density_at_event(&post, outcome, &event).unwrap();
        ok &= post.amplitudes() == e(outcome).as_slice()
            && again.amplitudes() == post.amplitudes()
            && density == 1.0
            && composite_density_at_event(&again, outcome, &event).unwrap() == density
            && post.is_irreversible();
        notes.push(format!("von Neumann {outcome}: density {density}"));
    }
    verdict(6, "projection postulates", ok, notes.join("; "));
}

#[test]
fn criterion_07_sturm_liouville_oracle() {
    let (k0, length) = (1.3, 1.0);
    let start = Instant::now();
    let problem = SLProblem::from_fns(0.0, length, move |_| k0, |_| 0.0, 6, units())
        .unwrap()
        .with_grid(2000)
        .unwrap();
    let sol = solve_sturm_liouville(&problem).unwrap();
    let elapsed = start.elapsed();
    let oracle = fd_oracle_eigenvalues(&problem, 2000).unwrap();
    let (mut closed, mut backends) = (0.0f64, 0.0f64);
    for n in 0..=5 {
        let mu = (n as f64 + 0.5) * std::f64::consts::PI / length;
        let exact = 0.5 * (mu * mu + k0 * k0);
        closed = closed.max(((sol.eigenvalues[n] - exact) / exact).abs());
        backends = backends.max(((sol.eigenvalues[n] - oracle[n]) / oracle[n]).abs());
    }
    verdict(
        7,
        "Sturm-Liouville oracle equivalence",
        closed <= 1e-6 && backends <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("closed form {closed:.2e} <= 1e-6, shooting vs matrix {backends:.2e} <= 1e-6, solve {elapsed:.2?}"),
    );
}

#[test]
fn criterion_08_continuity() {
    let c = units();
    let constant = PotentialSpec::from_fns(0.0, 4.0, 201, |_| 1.0, |_| 1.5, 1.0, 2.0, c).unwrap();
    let linear = PotentialSpec::from_fns(
        0.0,
        4.0,
        201,
        |x| 1.0 + 0.25 * x,
        |x| 2.0 - 0.5 * (1.0 + 0.25 * x) * (1.0 + 0.25 * x),
        1.0,
        2.0,
        c,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for spec in [&constant, &linear] {
        let before = Grid1D::new(0.1, 3.9, 77, -1.0).unwrap();
        let t_end = probwave::potential::arrival_time(spec, 4.0).unwrap();
        let after = Grid1D::new(0.1, 3.9, 77, t_end + 1.0).unwrap();
        worst = worst.max(continuity_residual(spec, Branch::Incoming, &before, 1e-3).unwrap());
        worst = worst.max(continuity_residual(spec, Branch::Outgoing, &after, 1e-3).unwrap());
    }
    verdict(
        8,
        "continuity",
        worst < 1e-6,
        format!("max residual {worst:.2e} < 1e-6 at h = 1e-3"),
    );
}

#[test]
fn criterion_09_commutators() {
    let s = wave(1.0, 1.0);
    let grid = |x0: f64, t0: f64| -> Vec<ComplexCoordinate> {
        (0..5)
            .map(|i| ComplexCoordinate::canonical(x0 + 0.3 * i as f64, t0 + 0.2 * i as f64))
            .collect()
    };
    let mut worst = 0.0f64;
    for probes in [grid(0.1, 0.5), grid(2.05, 1.35)] {
        for pair in [CommutatorPair::XcPc, CommutatorPair::TcHc] {
            let value = commutator_check(pair, &s, &probes).unwrap();
            worst = worst.max((value - Complex64::new(0.0, 1.0)).norm());
        }
    }
    verdict(
        9,
        "commutators",
        worst <= 1e-8,
        format!("max |[A, B] - i hbar| {worst:.2e} <= 1e-8 on two grids"),
    );
}

#[test]
fn criterion_10_entropy_trajectory() {
    let v = 1.7;
    let s = wave(v, v);
    let times: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
    let traj = entropy_trajectory(&s, &times, &[2.0]).unwrap();
    let slope = traj
        .times
        .windows(2)
        .zip(traj.entropy.windows(2))
        .map(|(t, e)| ((e[1] - e[0]) / (t[1] - t[0]) + v).abs())
        .fold(0.0, f64::max);
    let post = traj.measurements[0].2;
    verdict(
        10,
        "entropy trajectory",
        slope <= 1e-10 && traj.entropy[0] == 0.0 && post == 0.0,
        format!(
            "slope error {slope:.2e} <= 1e-10, S(0) = {}, after measurement {post}",
            traj.entropy[0]
        ),
    );
}

#[test]
fn criterion_11_contour_cauchy() {
    let s = wave(1.0, 1.0);
    let z = Complex64::new;
    let t0 = z(0.0, 0.0);
    let square = Contour::rectangle(z(0.0, 0.0), z(1.0, 1.0), t0).unwrap();
    let closed = contour_integral(DensityKind::IncomingP1, &s, &square).unwrap().norm();
    let direct = Contour::new(vec![z(0.0, 0.0), z(1.0, 1.0)], t0).unwrap();
    let bent = Contour::new(vec![z(0.0, 0.0), z(0.0, 1.0), z(1.0, 1.0)], t0).unwrap();
    let path = (contour_integral(DensityKind::IncomingP1, &s, &direct).unwrap()
        - contour_integral(DensityKind::IncomingP1, &s, &bent).unwrap())
    .norm();
    let segment = Contour::new(vec![z(0.0, 0.0), z(1.0, 0.0)], t0).unwrap();
    let value = contour_integral(DensityKind::IncomingP1, &s, &segment).unwrap();
    let seg_err = (value - z(1.0 - (-1.0f64).exp(), 0.0)).norm();
    verdict(
        11,
        "contour integrals",
        closed < 1e-9 && path < 1e-9 && seg_err <= 1e-9,
        format!("closed square {closed:.2e}, two paths {path:.2e}, segment error {seg_err:.2e}"),
    );
}

#[test]
fn criterion_12_preferred_basis() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = mixture_density(&[vec![real(1.0), real(0.0)], vec![real(0.0), real(1.0)]], &[0.5, 0.5]).unwrap();
    let pm = mixture_density(&[vec![real(h), real(h)], vec![real(h), real(-h)]], &[0.5, 0.5]).unwrap();
    let diff = phi.max_difference(&pm).unwrap();

    let e = |i: usize| (0..3).map(|j| real(if i == j { 1.0 } else { 0.0 })).collect::<Vec<_>>();
    let sys = [wave(1.0, 1.0), wave(2.0, 0.5), wave(0.5, 3.0)];
    let amps = [real(0.5f64.sqrt()), real(0.3f64.sqrt()), real(0.2f64.sqrt())];
    let composite = tensor_compose(
        sys.iter().map(|w| Factor::free(*w)).collect(),
        sys.iter()
            .map(|w| Factor::free(wave(2.0 * w.speed(), w.rate())))
            .collect(),
        vec![e(0), e(1), e(2)],
        amps.to_vec(),
    )
    .unwrap();
    let eigs: Vec<Complex64> = sys.iter().map(|w| eigenvalue(Observable::H, w)).collect();
    let avg = compare_averages(&composite, &eigs).unwrap();
    let imag: f64 = composite
        .weights()
        .iter()
        .zip(&sys)
        .map(|(w, s)| w * (s.rate() / 2.0))
        .sum();
    verdict(
        12,
        "preferred basis",
        diff < 1e-12 && avg.entangled.re == avg.reduced && avg.entangled.im == imag,
        format!(
            "mixtures differ by {diff:.1e}; entangled {} vs reduced {}, imaginary part {} vs {imag}",
            avg.entangled, avg.reduced, avg.entangled.im
        ),
    );
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_probwave"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success(), "probwave {args:?} exited with {status}");
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_13_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("ensemble.toml");
    fs::write(
        &config,
        "scenario = \"ensemble\"\n[ensemble]\nweights = [0.5, 0.3, 0.2]\nworkers = 8\n",
    )
    .unwrap();
    let runs: [&[&str]; 5] = [
        &["--config", config.to_str().unwrap(), "--seed", "42"],
        &["--scenario", "uncertainty", "--seed", "7", "--format", "json"],
        &["--scenario", "composite", "--seed", "3"],
        &["--scenario", "free-wave"],
        &["--scenario", "sturm-liouville", "--format", "json"],
    ];
    let mut identical = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("a{i}"));
        let b = tmp.path().join(format!("b{i}"));
        run_cli(&a, args);
        run_cli(&b, args);
        identical += usize::from(snapshot(&a) == snapshot(&b));
    }
    verdict(
        13,
        "determinism",
        identical == runs.len(),
        format!(
            "{identical}/{} configurations byte-identical across two runs",
            runs.len()
        ),
    );
}
