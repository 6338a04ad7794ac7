//! Central finite differences of vector fields. Mostly used for residual
//! reports; the Maxwell extension falls back to [`partial6`] when a field
//! has no closed-form Jacobian.

use num_complex::Complex64;

use crate::geom::{c, C3, CMat3, R3};

const C4: [(f64, f64); 2] = [(1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const C6: [(f64, f64); 3] = [(1.0, 45.0 / 60.0), (2.0, -9.0 / 60.0), (3.0, 1.0 / 60.0)];

fn partial<F: Fn(&R3) -> C3>(f: &F, x: &R3, axis: usize, h: f64, stencil: &[(f64, f64)]) -> C3 {
    let mut acc = C3::zeros();
    for &(o, w) in stencil {
        let mut xp = *x;
        let mut xm = *x;
        xp[axis] += o * h;
        xm[axis] -= o * h;
        acc += (f(&xp) - f(&xm)) * c(w / h, 0.0);
    }
    acc
}

/// `∂_axis f`, sixth order.
pub fn partial6<F: Fn(&R3) -> C3>(f: &F, x: &R3, axis: usize, h: f64) -> C3 {
    partial(f, x, axis, h, &C6)
}

/// `J[(i, j)] = ∂_j f_i`, fourth order.
pub fn jacobian<F: Fn(&R3) -> C3>(f: &F, x: &R3, h: f64) -> CMat3 {
    let mut j = CMat3::zeros();
    for axis in 0..3 {
        j.set_column(axis, &partial(f, x, axis, h, &C4));
    }
    j
}

/// `J[(i, j)] = ∂_j f_i`, sixth order.
pub fn jacobian6<F: Fn(&R3) -> C3>(f: &F, x: &R3, h: f64) -> CMat3 {
    let mut j = CMat3::zeros();
    for axis in 0..3 {
        j.set_column(axis, &partial(f, x, axis, h, &C6));
    }
    j
}

pub fn curl_of(j: &CMat3) -> C3 {
    C3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

pub fn div_of(j: &CMat3) -> Complex64 {
    j[(0, 0)] + j[(1, 1)] + j[(2, 2)]
}

pub fn curl<F: Fn(&R3) -> C3>(f: &F, x: &R3, h: f64) -> C3 {
    curl_of(&jacobian(f, x, h))
}

pub fn div<F: Fn(&R3) -> C3>(f: &F, x: &R3, h: f64) -> Complex64 {
    div_of(&jacobian(f, x, h))
}

/// Componentwise Laplacian, fourth order.
pub fn laplacian<F: Fn(&R3) -> C3>(f: &F, x: &R3, h: f64) -> C3 {
    const W: [(f64, f64); 2] = [(1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
    let f0 = f(x);
    let mut acc = f0 * c(-3.0 * 30.0 / 12.0 / (h * h), 0.0);
    for axis in 0..3 {
        for &(o, w) in &W {
            let mut xp = *x;
            let mut xm = *x;
            xp[axis] += o * h;
            xm[axis] -= o * h;
            acc += (f(&xp) + f(&xm)) * c(w / (h * h), 0.0);
        }
    }
    acc
}
