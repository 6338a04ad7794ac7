//! One-dimensional quadrature: Gauss–Legendre nodes and an adaptive
//! Gauss–Kronrod (7/15) integrator for complex-valued integrands.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess for the i-th largest root
        let mut r = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, r);
            dp = d;
            let step = p / d;
            r -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, r);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - r * r) * dp * dp);
        x[n - 1 - i] = r;
        x[i] = -r;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Values the adaptive integrator can accumulate.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += w * x`
    fn axpy(&mut self, w: f64, x: &Self);
    /// Max-norm distance.
    fn dist(&self, other: &Self) -> f64;
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += x * w;
    }
    fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl QuadValue for Vec<Complex64> {
    fn zero_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        for (a, b) in self.iter_mut().zip(x) {
            *a += b * w;
        }
    }
    fn dist(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl<const N: usize> QuadValue for [Complex64; N] {
    fn zero_like(&self) -> Self {
        [Complex64::new(0.0, 0.0); N]
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        for (a, b) in self.iter_mut().zip(x) {
            *a += b * w;
        }
    }
    fn dist(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn gk15<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.axpy(WGK[7] * h, &fc);
    gauss.axpy(WG[3] * h, &fc);
    for j in 0..7 {
        let dx = h * XGK[j];
        let lo = f(c - dx);
        let hi = f(c + dx);
        kron.axpy(WGK[j] * h, &lo);
        kron.axpy(WGK[j] * h, &hi);
        if j % 2 == 1 {
            gauss.axpy(WG[j / 2] * h, &lo);
            gauss.axpy(WG[j / 2] * h, &hi);
        }
    }
    let err = kron.dist(&gauss);
    (kron, err)
}

struct Piece<V> {
    err: f64,
    a: f64,
    b: f64,
    val: V,
}

impl<V> PartialEq for Piece<V> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<V> Eq for Piece<V> {}
impl<V> PartialOrd for Piece<V> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Piece<V> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct ExtensionQuadrature {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for ExtensionQuadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-11, max_subdivisions: 200 }
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst interval until the
/// summed Kronrod-minus-Gauss estimate drops below `abs_tol`.
/// Returns the value and the final error estimate.
pub fn integrate<F: FnMut(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    cfg: ExtensionQuadrature,
) -> Result<(Complex64, f64)> {
    integrate_panels(f, a, b, 1, cfg)
}

/// As [`integrate`], starting from `panels` equal subintervals and allowing
/// `cfg.max_subdivisions` bisections beyond them. Useful for integrands with
/// a known number of oscillations.
pub fn integrate_panels<V: QuadValue, F: FnMut(f64) -> V>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    cfg: ExtensionQuadrature,
) -> Result<(V, f64)> {
    let panels = panels.max(1);
    let mut heap = BinaryHeap::with_capacity(panels + 2 * cfg.max_subdivisions);
    let mut total_err = 0.0;
    let mut zero = None;
    for p in 0..panels {
        let lo = a + (b - a) * p as f64 / panels as f64;
        let hi = if p + 1 == panels { b } else { a + (b - a) * (p + 1) as f64 / panels as f64 };
        let (val, err) = gk15(&mut f, lo, hi);
        if zero.is_none() {
            zero = Some(val.zero_like());
        }
        total_err += err;
        heap.push(Piece { err, a: lo, b: hi, val });
    }
    if a == b {
        return Ok((zero.expect("at least one panel"), 0.0));
    }
    let mut splits = 0;
    while total_err > cfg.abs_tol {
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure { estimate: total_err });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { err: e1, a: worst.a, b: mid, val: v1 });
        heap.push(Piece { err: e2, a: mid, b: worst.b, val: v2 });
        splits += 1;
        if splits % 64 == 0 {
            // refresh to avoid drift in the running sum
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let mut pieces: Vec<Piece<V>> = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = zero.expect("at least one panel");
    for p in &pieces {
        value.axpy(1.0, &p.val);
    }
    Ok((value, total_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        for deg in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let (x, _) = gauss_legendre(47);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[23].abs() < 1e-15);
        for i in 0..47 {
            assert!((x[i] + x[46 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn adaptive_complex_exponential() {
        let k = 3.7;
        let (v, e) = integrate(|s| Complex64::new(0.0, k * s).exp(), 0.0, 2.5, Default::default()).unwrap();
        let exact = (Complex64::new(0.0, k * 2.5).exp() - 1.0) / Complex64::new(0.0, k);
        assert!((v - exact).norm() < 1e-12);
        assert!(e <= 1e-11);
    }

    #[test]
    fn adaptive_reports_failure() {
        let cfg = ExtensionQuadrature { abs_tol: 1e-14, max_subdivisions: 3 };
        let r = integrate(|s| Complex64::new(1.0 / s.abs().max(1e-300).sqrt(), 0.0), 0.0, 1.0, cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn vector_valued_panels() {
        let (v, _) = integrate_panels(
            |s| vec![Complex64::new(s, 0.0), Complex64::new(0.0, 60.0 * s).exp()],
            0.0,
            3.0,
            30,
            Default::default(),
        )
        .unwrap();
        assert_relative_eq!(v[0].re, 4.5, max_relative = 1e-14);
        let exact = (Complex64::new(0.0, 180.0).exp() - 1.0) / Complex64::new(0.0, 60.0);
        assert!((v[1] - exact).norm() < 1e-12);
    }

    #[test]
    fn reversed_interval() {
        let (v, _) = integrate(|s| Complex64::new(s, 0.0), 1.0, 0.0, Default::default()).unwrap();
        assert_relative_eq!(v.re, -0.5, max_relative = 1e-14);
    }
}
