//! Spherical Bessel, Hankel and Riccati-Bessel functions of real positive
//! argument, plus fully normalized associated Legendre functions.
//!
//! `j_n` is computed by Miller's backward recurrence normalized against the
//! closed forms of `j_0`/`j_1`; `y_n` by forward recurrence, which is stable
//! for the dominant solution. `h_n^(1) = j_n + i y_n`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest order any routine here will evaluate.
pub const N_MAX_ORDER: usize = 120;

const RESCALE_ABOVE: f64 = 1e250;

fn check_args(n: usize, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("argument must be positive and finite, got {t}")));
    }
    if n > N_MAX_ORDER {
        return Err(Error::OrderCapExceeded { n, cap: N_MAX_ORDER });
    }
    Ok(())
}

/// First index of the backward recurrence for orders up to `nmax`.
fn miller_start(nmax: usize, t: f64) -> usize {
    // the extra 10 orders keep the seed's y_n contamination below 1e-15 at t = 40
    nmax + 20usize.max((1.5 * t).ceil() as usize) + 10
}

/// `j_0(t), ..., j_nmax(t)`.
pub fn sph_bessel_j_array(nmax: usize, t: f64) -> Result<Vec<f64>> {
    check_args(nmax, t)?;
    let start = miller_start(nmax, t);
    let mut f = vec![0.0f64; start + 2];
    f[start] = 1.0;
    for n in (1..=start).rev() {
        let next = (2 * n + 1) as f64 / t * f[n] - f[n + 1];
        f[n - 1] = next;
        if next.abs() > RESCALE_ABOVE {
            for v in f[n - 1..].iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    let (s, co) = t.sin_cos();
    let j0 = s / t;
    let j1 = s / (t * t) - co / t;
    let scale = if j0.abs() >= j1.abs() { j0 / f[0] } else { j1 / f[1] };
    Ok(f[..=nmax].iter().map(|v| v * scale).collect())
}

/// `y_0(t), ..., y_nmax(t)`; entries may overflow to infinity for n >> t.
pub fn sph_bessel_y_array(nmax: usize, t: f64) -> Result<Vec<f64>> {
    check_args(nmax, t)?;
    let (s, co) = t.sin_cos();
    let mut y = Vec::with_capacity(nmax + 1);
    y.push(-co / t);
    if nmax >= 1 {
        y.push(-co / (t * t) - s / t);
    }
    for n in 1..nmax {
        let next = (2 * n + 1) as f64 / t * y[n] - y[n - 1];
        y.push(next);
    }
    Ok(y)
}

pub fn sph_bessel_j(n: usize, t: f64) -> Result<f64> {
    Ok(sph_bessel_j_array(n, t)?[n])
}

pub fn sph_bessel_y(n: usize, t: f64) -> Result<f64> {
    Ok(sph_bessel_y_array(n, t)?[n])
}

pub fn sph_hankel1_array(nmax: usize, t: f64) -> Result<Vec<Complex64>> {
    let j = sph_bessel_j_array(nmax, t)?;
    let y = sph_bessel_y_array(nmax, t)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

pub fn sph_hankel1(n: usize, t: f64) -> Result<Complex64> {
    Ok(sph_hankel1_array(n, t)?[n])
}

/// Riccati-Bessel values `psi_n = t j_n`, `zeta_n = t h_n^(1)` and their
/// derivatives with respect to `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiPair {
    pub psi: f64,
    pub psi_prime: f64,
    pub zeta: Complex64,
    pub zeta_prime: Complex64,
}

impl RiccatiPair {
    /// `psi zeta' - psi' zeta`; equals `i` for every order.
    pub fn wronskian(&self) -> Complex64 {
        self.zeta_prime * self.psi - self.zeta * self.psi_prime
    }
}

/// Riccati-Bessel pairs for orders `0..=nmax`.
pub fn riccati_array(nmax: usize, t: f64) -> Result<Vec<RiccatiPair>> {
    let j = sph_bessel_j_array(nmax, t)?;
    let y = sph_bessel_y_array(nmax, t)?;
    let (s, co) = t.sin_cos();
    let mut out = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let h = Complex64::new(j[n], y[n]);
        // j_{-1} = cos t / t, y_{-1} = sin t / t
        let (jm, ym) = if n == 0 { (co / t, s / t) } else { (j[n - 1], y[n - 1]) };
        let hm = Complex64::new(jm, ym);
        let nf = n as f64;
        out.push(RiccatiPair {
            psi: t * j[n],
            psi_prime: t * jm - nf * j[n],
            zeta: h * t,
            zeta_prime: hm * t - h * nf,
        });
    }
    Ok(out)
}

pub fn riccati(n: usize, t: f64) -> Result<RiccatiPair> {
    Ok(riccati_array(n, t)?[n])
}

/// Triangular index of `(n, m)` with `0 <= m <= n`.
#[inline]
pub fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Runs the normalized three-term recurrence in `n` for every `m`, starting
/// from the supplied diagonal `diag[m]` (the value at `n = m`).
fn legendre_columns(nmax: usize, x: f64, diag: &[f64], out: &mut [f64]) {
    for m in 0..=nmax {
        let mf = m as f64;
        out[tri(m, m)] = diag[m];
        if m == nmax {
            continue;
        }
        out[tri(m + 1, m)] = x * (2.0 * mf + 3.0).sqrt() * diag[m];
        let mut a_prev = (2.0 * mf + 3.0).sqrt();
        for n in (m + 2)..=nmax {
            let nf = n as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            out[tri(n, m)] = a * (x * out[tri(n - 1, m)] - out[tri(n - 2, m)] / a_prev);
            a_prev = a;
        }
    }
}

/// Normalized `P_n^m(x)` for `0 <= m <= n <= nmax`, Condon-Shortley phase
/// included, such that `Y_n^m = P_n^m(cos theta) e^{i m phi}` is orthonormal.
pub fn legendre_table(nmax: usize, x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut diag = vec![0.0; nmax + 1];
    diag[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=nmax {
        let mf = m as f64;
        diag[m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * diag[m - 1];
    }
    let mut out = vec![0.0; tri(nmax, nmax) + 1];
    legendre_columns(nmax, x, &diag, &mut out);
    out
}

/// `P_n^m(x) / sqrt(1 - x^2)` for `m >= 1`, evaluated without dividing, so it
/// stays finite at the poles. Entries with `m = 0` are zero.
pub fn legendre_over_sin_table(nmax: usize, x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut diag = vec![0.0; nmax + 1];
    if nmax >= 1 {
        diag[1] = -(1.5f64).sqrt() / (4.0 * PI).sqrt();
    }
    for m in 2..=nmax {
        let mf = m as f64;
        diag[m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * diag[m - 1];
    }
    let mut out = vec![0.0; tri(nmax, nmax) + 1];
    legendre_columns(nmax, x, &diag, &mut out);
    for n in 0..=nmax {
        out[tri(n, 0)] = 0.0;
    }
    out
}

/// Fully normalized associated Legendre function for `|m| <= n`.
pub fn assoc_legendre_normalized(n: usize, m: i64, x: f64) -> Result<f64> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::Domain(format!("|m| = {} exceeds n = {n}", m.abs())));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [-1, 1]")));
    }
    if n > N_MAX_ORDER {
        return Err(Error::OrderCapExceeded { n, cap: N_MAX_ORDER });
    }
    let ma = m.unsigned_abs() as usize;
    let v = legendre_table(n, x)[tri(n, ma)];
    Ok(if m < 0 && ma % 2 == 1 { -v } else { v })
}
