//! Small vector helpers shared by every module.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

pub type R3 = Vector3<f64>;
pub type C3 = Vector3<Complex64>;
pub type CMat3 = Matrix3<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn to_c3(v: &R3) -> C3 {
    v.map(Complex64::from)
}

/// Non-conjugating dot product `a . b` of a complex and a real vector.
#[inline]
pub fn dot_cr(a: &C3, b: &R3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `a . conj(b)`, the pointwise integrand of the L2 product on the sphere.
#[inline]
pub fn dot_conj(a: &C3, b: &C3) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

#[inline]
pub fn cnorm(a: &C3) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}

/// Polar and azimuthal angle of a unit vector; the azimuth is 0 on the axis.
pub fn angles(d: &R3) -> (f64, f64) {
    let theta = d[2].clamp(-1.0, 1.0).acos();
    let phi = if d[0] == 0.0 && d[1] == 0.0 { 0.0 } else { d[1].atan2(d[0]) };
    (theta, phi)
}

pub fn from_angles(theta: f64, phi: f64) -> R3 {
    let st = theta.sin();
    R3::new(st * phi.cos(), st * phi.sin(), theta.cos())
}

/// Orthonormal pair spanning the plane orthogonal to `n`.
pub fn tangent_frame(n: &R3) -> (R3, R3) {
    let helper = if n[0].abs() < 0.9 { R3::x() } else { R3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CSum {
    re: (f64, f64),
    im: (f64, f64),
}

#[inline]
fn neumaier(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

impl CSum {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}
