//! Central differences and Richardson (Ridders) extrapolation for analytic
//! functions, along an arbitrary direction in the complex plane.

use num_complex::Complex64;

/// Unit direction along the canonical line x_c = x + ix.
pub fn canonical_direction() -> Complex64 {
    Complex64::new(1.0, 1.0) / std::f64::consts::SQRT_2
}

/// First derivative by a single central difference with step `h` along `dir`.
pub fn central_first<F>(f: &F, z: Complex64, dir: Complex64, h: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let dz = dir * h;
    (f(z + dz) - f(z - dz)) / (dz * 2.0)
}

/// Second derivative by a single three-point central difference.
pub fn central_second<F>(f: &F, z: Complex64, dir: Complex64, h: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let dz = dir * h;
    (f(z + dz) - f(z) * 2.0 + f(z - dz)) / (dz * dz)
}

/// Ridders' extrapolation of a difference quotient `q(h)` whose error is a
/// series in h². Returns the estimate and its error bound.
pub fn extrapolate<Q>(q: Q, h0: f64) -> (Complex64, f64)
where
    Q: Fn(f64) -> Complex64,
{
    const SHRINK: f64 = 1.4;
    const SHRINK2: f64 = SHRINK * SHRINK;
    const NTAB: usize = 12;
    const SAFE: f64 = 2.0;

    let mut tab = [[Complex64::new(0.0, 0.0); NTAB]; NTAB];
    let mut h = h0;
    tab[0][0] = q(h);
    let mut best = tab[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= SHRINK;
        tab[0][i] = q(h);
        let mut fac = SHRINK2;
        for j in 1..=i {
            tab[j][i] = (tab[j - 1][i] * fac - tab[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK2;
            let e = (tab[j][i] - tab[j - 1][i])
                .norm()
                .max((tab[j][i] - tab[j - 1][i - 1]).norm());
            if e <= err {
                err = e;
                best = tab[j][i];
            }
        }
        if (tab[i][i] - tab[i - 1][i - 1]).norm() >= SAFE * err {
            break;
        }
    }
    (best, err)
}

/// d f/dz along `dir`, extrapolated.
pub fn derivative<F>(f: &F, z: Complex64, dir: Complex64, h0: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    extrapolate(|h| central_first(f, z, dir, h), h0).0
}

/// d² f/dz² along `dir`, extrapolated.
pub fn second_derivative<F>(f: &F, z: Complex64, dir: Complex64, h0: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    extrapolate(|h| central_second(f, z, dir, h), h0).0
}

/// Derivative of a complex-valued function of one real variable.
pub fn real_derivative<F>(f: &F, x: f64, h0: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let g = |z: Complex64| f(z.re);
    derivative(&g, Complex64::new(x, 0.0), Complex64::new(1.0, 0.0), h0)
}

/// Second derivative of a complex-valued function of one real variable.
pub fn real_second_derivative<F>(f: &F, x: f64, h0: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let g = |z: Complex64| f(z.re);
    second_derivative(&g, Complex64::new(x, 0.0), Complex64::new(1.0, 0.0), h0)
}
