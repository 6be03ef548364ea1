use num_complex::Complex64;
use probwave::freewave::{prob_density_free, psi_free};
use probwave::potential::{arrival_time, prob_density_potential, psi_potential, PotentialSpec};
use probwave::spectral::{apply_observable, eigenvalue, Observable};
use probwave::{make_free_state, Branch, PhysicalConstants};

#[test]
fn flat_potential_reproduces_the_free_wave() {
    let c = PhysicalConstants::default();
    let v = 1.3;
    let free = make_free_state(v, v, c, Branch::Incoming).unwrap();
    let spec = PotentialSpec::from_fns(0.0, 5.0, 51, |_| v, |_| 0.0, v, free.omega(), c).unwrap();
    for branch in [Branch::Incoming, Branch::Outgoing] {
        let f = free.with_branch(branch);
        for i in 0..=20 {
            let x = 0.25 * i as f64;
            let t = match branch {
                Branch::Incoming => x / v - 0.7,
                Branch::Outgoing => x / v + 0.7,
            };
            assert!((arrival_time(&spec, x).unwrap() - x / v).abs() < 1e-13);
            let pf = prob_density_free(&f, x, t).unwrap();
            let pp = prob_density_potential(&spec, branch, x, t).unwrap();
            assert!((pf - pp).abs() < 1e-12 * pf.max(1.0), "{branch} x={x}: {pf} vs {pp}");
            let d = psi_free(&f, x, t).unwrap() - psi_potential(&spec, branch, x, t).unwrap();
            assert!(d.norm() < 1e-11, "{branch} x={x}: {d}");
        }
    }
}

#[test]
fn zero_rate_makes_every_eigenvalue_real() {
    let s = make_free_state(2.0, 0.0, PhysicalConstants::default(), Branch::Incoming).unwrap();
    for obs in [
        Observable::H,
        Observable::HDagger,
        Observable::P,
        Observable::S { t0: 0.4 },
    ] {
        assert_eq!(eigenvalue(obs, &s).im, 0.0, "{obs:?}");
    }
    let h = eigenvalue(Observable::H, &s);
    assert_eq!(h, Complex64::new(2.0, 0.0));
}

#[test]
fn eigenvalues_turn_real_exactly_at_the_peak() {
    let s = make_free_state(1.0, 1.0, PhysicalConstants::default(), Branch::Incoming).unwrap();
    let away = apply_observable(Observable::H, &s, 3.0, 1.0).unwrap();
    let at = apply_observable(Observable::H, &s, 2.0, 2.0).unwrap();
    assert_eq!(away.value.im, 0.5);
    assert!(at.at_mp);
    assert_eq!(at.value, Complex64::new(away.value.re, 0.0));
}
