//! Gauss–Legendre quadrature with adaptive bisection.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be accumulated by the quadrature routines.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Fixed 16-point rule along the straight segment `a → b` in the complex
/// plane: ∫ f(z) dz.
pub fn gl16_segment<F>(f: &F, a: Complex64, b: Complex64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let (nodes, weights) = rule16();
    let half = (b - a) * 0.5;
    let mid = (a + b) * 0.5;
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(weights) {
        acc += f(mid + half * *x) * *w;
    }
    acc * half
}

fn gl16<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> T {
    let (nodes, weights) = rule16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = T::zero();
    for (x, w) in nodes.iter().zip(weights) {
        acc = acc + f(mid + half * x) * *w;
    }
    acc * half
}

const MAX_DEPTH: usize = 48;

/// Adaptive 16-point Gauss–Legendre on [a, b].
///
/// An interval is accepted once its estimate agrees with the sum over its
/// two halves to within `tol` (absolute, scaled down with depth).
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: f64) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if a == b {
        return Ok(T::zero());
    }
    let whole = gl16(&f, a, b);
    let mut evaluations = 0usize;
    adapt(&f, a, b, whole, tol, 0, &mut evaluations)
}

fn adapt<T, F>(f: &F, a: f64, b: f64, whole: T, tol: f64, depth: usize, evals: &mut usize) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let mid = 0.5 * (a + b);
    let left = gl16(f, a, mid);
    let right = gl16(f, mid, b);
    *evals += 1;
    let split = left + right;
    if (split - whole).magnitude() <= tol {
        return Ok(split);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence {
            what: format!("adaptive quadrature on [{a}, {b}]"),
            iterations: *evals,
        });
    }
    let l = adapt(f, a, mid, left, 0.5 * tol, depth + 1, evals)?;
    let r = adapt(f, mid, b, right, 0.5 * tol, depth + 1, evals)?;
    Ok(l + r)
}

/// Adaptive integral of an analytic function along the segment `a → b`.
pub fn integrate_segment<F>(f: &F, a: Complex64, b: Complex64, tol: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let dz = b - a;
    let g = |s: f64| f(a + dz * s) * dz;
    integrate(g, 0.0, 1.0, tol)
}
