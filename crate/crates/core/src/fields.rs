//! Incident fields, the free-space Green tensor and radiating multipoles.
//!
//! Time dependence `e^{-iωt}`; every field pair satisfies `∇×E = ikH`,
//! `∇×H = -ikE`. The fundamental solution is `Φ(x, y) = e^{ik|x-y|} / (4π|x-y|)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{c, to_c3, C3, CMat3, I, R3};
use crate::harmonics::{vsh, ModeIndex, TangentialField};
use crate::specfun::riccati;

/// A Maxwell pair `x ↦ (E, H)`.
pub trait FieldFn: Send + Sync {
    fn eval(&self, x: &R3) -> Result<(C3, C3)>;

    /// `J[(i, j)] = ∂_j E_i` when available in closed form.
    fn e_jacobian(&self, _x: &R3) -> Option<CMat3> {
        None
    }

    fn e(&self, x: &R3) -> Result<C3> {
        Ok(self.eval(x)?.0)
    }
}

impl<T: FieldFn + ?Sized> FieldFn for Box<T> {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        (**self).eval(x)
    }
    fn e_jacobian(&self, x: &R3) -> Option<CMat3> {
        (**self).e_jacobian(x)
    }
}

impl<T: FieldFn + ?Sized> FieldFn for &T {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        (**self).eval(x)
    }
    fn e_jacobian(&self, x: &R3) -> Option<CMat3> {
        (**self).e_jacobian(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub k: f64,
    pub lambda: f64,
}

impl WaveParams {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("need k > 0 and lambda > 0, got k = {k}, lambda = {lambda}")));
        }
        Ok(Self { k, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveParams {
    pub d: R3,
    pub p: R3,
}

impl PlaneWaveParams {
    pub fn new(d: R3, p: R3) -> Result<Self> {
        if (d.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("incident direction has norm {}", d.norm())));
        }
        Ok(Self { d, p })
    }
}

/// Superposition `E = Σ a_j e^{ik x·d_j}`, `H = Σ (d_j × a_j) e^{ik x·d_j}`.
#[derive(Debug, Clone)]
pub struct PlaneWaveSum {
    pub k: f64,
    pub terms: Vec<(R3, C3)>,
}

impl FieldFn for PlaneWaveSum {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        let mut e = C3::zeros();
        let mut h = C3::zeros();
        for (d, a) in &self.terms {
            let ph = Complex64::from_polar(1.0, self.k * x.dot(d));
            e += a * ph;
            h += to_c3(d).cross(a) * ph;
        }
        Ok((e, h))
    }

    fn e_jacobian(&self, x: &R3) -> Option<CMat3> {
        let mut j = CMat3::zeros();
        for (d, a) in &self.terms {
            let ph = I * self.k * Complex64::from_polar(1.0, self.k * x.dot(d));
            j += (a * ph) * to_c3(d).transpose();
        }
        Some(j)
    }
}

/// `E = p e^{ik x·d}`, `H = (d×p) e^{ik x·d}`.
pub fn plane_wave(pw: &PlaneWaveParams, k: f64) -> Result<PlaneWaveSum> {
    let dot = pw.p.dot(&pw.d);
    if dot.abs() > 1e-10 {
        return Err(Error::InvalidPolarization { dot });
    }
    Ok(PlaneWaveSum { k, terms: vec![(pw.d, to_c3(&pw.p))] })
}

/// `E = ik ((d×p)×d) e^{ik x·d}` for any `p`.
pub fn section5_plane_wave(pw: &PlaneWaveParams, k: f64) -> PlaneWaveSum {
    let a = pw.d.cross(&pw.p).cross(&pw.d);
    PlaneWaveSum { k, terms: vec![(pw.d, to_c3(&a) * (I * k))] }
}

/// `E(x) = Σ_i w_i a(d_i) e^{ik x·d_i}` over the kernel's quadrature nodes.
pub fn herglotz(kernel: &TangentialField, k: f64) -> PlaneWaveSum {
    let rule = &kernel.rule;
    let terms = kernel
        .values
        .iter()
        .enumerate()
        .filter(|(_, a)| a.iter().any(|z| z.norm() > 0.0))
        .map(|(i, a)| (*rule.direction(i), a * c(rule.weight(i), 0.0)))
        .collect();
    PlaneWaveSum { k, terms }
}

/// Radial derivatives of `Φ` at separation `r = x - y`, allowing complex `r`
/// so the same code serves complex image points.
#[derive(Debug, Clone, Copy)]
pub struct PhiDerivs {
    pub r: C3,
    pub phi: Complex64,
    d1: Complex64,
    d2: Complex64,
    d3: Complex64,
}

impl PhiDerivs {
    pub fn new(r: C3, k: f64) -> Self {
        let rr = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let ikr = I * k * rr;
        let f = ikr.exp() / (4.0 * PI * rr);
        let kr2 = (k * rr) * (k * rr);
        let r2 = rr * rr;
        let d1 = f * (ikr - 1.0) / r2;
        let d2 = f * (3.0 - 3.0 * ikr - kr2) / (r2 * r2);
        let d3 = f * (-15.0 + 15.0 * ikr + 6.0 * kr2 - ikr * kr2) / (r2 * r2 * r2);
        Self { r, phi: f, d1, d2, d3 }
    }

    pub fn real(r: &R3, k: f64) -> Self {
        Self::new(to_c3(r), k)
    }

    pub fn grad(&self) -> C3 {
        self.r * self.d1
    }

    pub fn hess(&self) -> CMat3 {
        CMat3::identity() * self.d1 + (self.r * self.r.transpose()) * self.d2
    }

    /// `∂_i ∂_j ∂_l Φ`.
    pub fn third(&self, i: usize, j: usize, l: usize) -> Complex64 {
        let r = &self.r;
        let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        self.d2 * (r[l] * dl(i, j) + r[j] * dl(i, l) + r[i] * dl(j, l)) + self.d3 * r[i] * r[j] * r[l]
    }
}

fn guard(x: &R3, y: &R3, k: f64) -> Result<R3> {
    let r = x - y;
    let eps = 1e-10 * 2.0 * PI / k;
    if r.norm() < eps {
        return Err(Error::EvalAtSource { radius: r.norm() });
    }
    Ok(r)
}

/// `G(x, y) = Φ I + k^{-2} ∇∇Φ`.
pub fn green_tensor(x: &R3, y: &R3, k: f64) -> Result<CMat3> {
    let r = guard(x, y, k)?;
    let d = PhiDerivs::real(&r, k);
    Ok(CMat3::identity() * d.phi + d.hess() * c(1.0 / (k * k), 0.0))
}

/// `[(∇Φ) ×]`, so that `cross_matrix(g) a = g × a`.
pub fn cross_matrix(g: &C3) -> CMat3 {
    let z = c(0.0, 0.0);
    CMat3::new(z, -g[2], g[1], g[2], z, -g[0], -g[1], g[0], z)
}

/// Magnetic dipole: `E = ∇×(Φ(·, y) a)`, `H = (1/ik) ∇×E = -ik G a`.
#[derive(Debug, Clone)]
pub struct MagneticDipole {
    pub y: R3,
    pub a: R3,
    pub k: f64,
}

pub fn magnetic_dipole(y: R3, a: R3, k: f64) -> Result<MagneticDipole> {
    if a.norm() == 0.0 {
        return Err(Error::Domain("dipole moment must be nonzero".into()));
    }
    Ok(MagneticDipole { y, a, k })
}

impl FieldFn for MagneticDipole {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        let r = guard(x, &self.y, self.k)?;
        let d = PhiDerivs::real(&r, self.k);
        let a = to_c3(&self.a);
        let e = d.grad().cross(&a);
        let g = CMat3::identity() * d.phi + d.hess() * c(1.0 / (self.k * self.k), 0.0);
        Ok((e, g * a * (-I * self.k)))
    }

    fn e_jacobian(&self, x: &R3) -> Option<CMat3> {
        let r = guard(x, &self.y, self.k).ok()?;
        let d = PhiDerivs::real(&r, self.k);
        let hess = d.hess();
        // ∂_j E_i = ε_ilm ∂_j∂_l Φ a_m
        let mut jac = CMat3::zeros();
        for j in 0..3 {
            let col = hess.column(j).into_owned();
            jac.set_column(j, &col.cross(&to_c3(&self.a)));
        }
        Some(jac)
    }
}

/// Electric dipole: `E = G(·, y) a`, `H = (1/ik) ∇Φ × a`.
#[derive(Debug, Clone)]
pub struct ElectricDipole {
    pub y: R3,
    pub a: C3,
    pub k: f64,
}

impl ElectricDipole {
    /// Far-field amplitude `(1/4π) e^{-ik x̂·y} (a - (x̂·a) x̂)`.
    pub fn far_field(&self, xhat: &R3) -> C3 {
        let ph = Complex64::from_polar(1.0 / (4.0 * PI), -self.k * xhat.dot(&self.y));
        let xa = crate::geom::dot_cr(&self.a, xhat);
        (self.a - to_c3(xhat) * xa) * ph
    }
}

impl FieldFn for ElectricDipole {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        let r = guard(x, &self.y, self.k)?;
        let d = PhiDerivs::real(&r, self.k);
        let g = CMat3::identity() * d.phi + d.hess() * c(1.0 / (self.k * self.k), 0.0);
        let h = d.grad().cross(&self.a) / (I * self.k);
        Ok((g * self.a, h))
    }

    fn e_jacobian(&self, x: &R3) -> Option<CMat3> {
        let r = guard(x, &self.y, self.k).ok()?;
        let d = PhiDerivs::real(&r, self.k);
        let grad = d.grad();
        let k2 = self.k * self.k;
        let mut jac = CMat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = grad[j] * self.a[i];
                for l in 0..3 {
                    s += d.third(i, j, l) * self.a[l] / k2;
                }
                jac[(i, j)] = s;
            }
        }
        Some(jac)
    }
}

/// `q = ∇×(x h_n(k|x|) Y_n^m(x̂))` and its curl.
pub fn multipole_q(idx: ModeIndex, k: f64, x: &R3) -> Result<(C3, C3)> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::EvalAtSource { radius: 0.0 });
    }
    let xhat = x / r;
    let rp = riccati(idx.n, k * r)?;
    let h = rp.zeta / (k * r);
    let (u, v) = vsh(idx, &xhat)?;
    let nn = (idx.n * (idx.n + 1)) as f64;
    let s = nn.sqrt();
    let y = crate::harmonics::sph_harm(idx.n, idx.m, &xhat)?;
    let q = v * (-h * s);
    let curl = to_c3(&xhat) * (h * y * nn / r) + u * (rp.zeta_prime * s / r);
    Ok((q, curl))
}

/// Far-field amplitude of `q_n^m`: `-√(n(n+1)) (-i)^{n+1} / k · V_n^m`.
pub fn multipole_q_far(idx: ModeIndex, k: f64, xhat: &R3) -> Result<C3> {
    let (_, v) = vsh(idx, xhat)?;
    let s = ((idx.n * (idx.n + 1)) as f64).sqrt();
    Ok(v * (-(-I).powu(idx.n as u32 + 1) * s / k))
}

/// The multipole as a Maxwell pair `(q, (1/ik) ∇×q)`.
#[derive(Debug, Clone, Copy)]
pub struct Multipole {
    pub idx: ModeIndex,
    pub k: f64,
}

impl FieldFn for Multipole {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        let (q, cq) = multipole_q(self.idx, self.k, x)?;
        Ok((q, cq / (I * self.k)))
    }
}
