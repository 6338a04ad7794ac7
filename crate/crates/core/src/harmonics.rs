//! Scalar and vector spherical harmonics, the tensor-product sphere rule and
//! modal analysis/synthesis of tangential fields.
//!
//! Conventions: `Y_n^m(θ, φ) = P̄_n^m(cos θ) e^{imφ}` with Condon–Shortley
//! phase, `U_n^m = ∇_S Y_n^m / √(n(n+1))`, `V_n^m = x̂ × U_n^m`. The
//! z-translated basis multiplies both by `e^{-ik z·x̂}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{angles, c, CSum, C3, I, R3};
use crate::quadrature::gauss_legendre;
use crate::specfun::{legendre_over_sin_table, legendre_table, tri, N_MAX_ORDER};

pub const DEFAULT_N_THETA: usize = 48;

/// Spherical-harmonic mode `(n, m)` with `n >= 1`, `|m| <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub n: usize,
    pub m: i64,
}

impl ModeIndex {
    pub fn new(n: usize, m: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("vector harmonics need n >= 1".into()));
        }
        if m.unsigned_abs() as usize > n {
            return Err(Error::Domain(format!("|m| = {} exceeds n = {n}", m.abs())));
        }
        if n > N_MAX_ORDER {
            return Err(Error::OrderCapExceeded { n, cap: N_MAX_ORDER });
        }
        Ok(Self { n, m })
    }

    /// Position in the flat coefficient layout `(1,-1), (1,0), (1,1), (2,-2), ...`.
    #[inline]
    pub fn flat(&self) -> usize {
        self.n * self.n - 1 + (self.m + self.n as i64) as usize
    }

    /// Every mode with `1 <= n <= order`, in flat order.
    pub fn all(order: usize) -> impl Iterator<Item = ModeIndex> {
        (1..=order).flat_map(|n| (-(n as i64)..=n as i64).map(move |m| ModeIndex { n, m }))
    }
}

/// Number of modes with `1 <= n <= order`.
#[inline]
pub fn mode_count(order: usize) -> usize {
    order * (order + 2)
}

/// Legendre data on one colatitude: `P̄`, `P̄ / sin θ` and `dP̄/dθ`.
pub struct LegendreRing {
    p: Vec<f64>,
    q: Vec<f64>,
    tau: Vec<f64>,
}

impl LegendreRing {
    pub fn new(order: usize, cos_theta: f64) -> Self {
        // one extra order so that P̄^{m+1} is available for the derivative
        let p = legendre_table(order + 1, cos_theta);
        let q = legendre_over_sin_table(order, cos_theta);
        let mut tau = vec![0.0; tri(order, order) + 1];
        for n in 0..=order {
            let nf = n as f64;
            for m in 0..=n {
                let mf = m as f64;
                let up = if m < n { ((nf - mf) * (nf + mf + 1.0)).sqrt() * p[tri(n, m + 1)] } else { 0.0 };
                let down = if m == 0 {
                    // P̄^{-1} = -P̄^{1}
                    -(nf * (nf + 1.0)).sqrt() * if n >= 1 { p[tri(n, 1)] } else { 0.0 }
                } else {
                    ((nf + mf) * (nf - mf + 1.0)).sqrt() * p[tri(n, m - 1)]
                };
                tau[tri(n, m)] = 0.5 * (up - down);
            }
        }
        Self { p, q, tau }
    }

    /// `(P̄_n^m, P̄_n^m / sin θ, dP̄_n^m / dθ)` including negative `m`.
    #[inline]
    pub fn get(&self, n: usize, m: i64) -> (f64, f64, f64) {
        let ma = m.unsigned_abs() as usize;
        let i = tri(n, ma);
        let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
        (sign * self.p[i], sign * self.q[i], sign * self.tau[i])
    }
}

fn check_unit(d: &R3) -> Result<()> {
    if (d.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!("direction has norm {}", d.norm())));
    }
    Ok(())
}

/// Local spherical frame `(θ̂, φ̂)` at angles `(θ, φ)`.
#[inline]
pub fn spherical_frame(theta: f64, phi: f64) -> (R3, R3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (R3::new(ct * cp, ct * sp, -st), R3::new(-sp, cp, 0.0))
}

pub fn sph_harm(n: usize, m: i64, direction: &R3) -> Result<Complex64> {
    check_unit(direction)?;
    if m.unsigned_abs() as usize > n {
        return Err(Error::Domain(format!("|m| = {} exceeds n = {n}", m.abs())));
    }
    let (theta, phi) = angles(direction);
    let ring = LegendreRing::new(n, theta.cos());
    let (p, _, _) = ring.get(n, m);
    Ok(Complex64::from_polar(p, m as f64 * phi))
}

/// `(U_n^m, V_n^m)` at a unit direction.
pub fn vsh(idx: ModeIndex, direction: &R3) -> Result<(C3, C3)> {
    check_unit(direction)?;
    let (theta, phi) = angles(direction);
    let ring = LegendreRing::new(idx.n, theta.cos());
    Ok(vsh_from_ring(&ring, idx, theta, phi))
}

fn vsh_from_ring(ring: &LegendreRing, idx: ModeIndex, theta: f64, phi: f64) -> (C3, C3) {
    let (_, q, tau) = ring.get(idx.n, idx.m);
    let (th, ph) = spherical_frame(theta, phi);
    let s = ((idx.n * (idx.n + 1)) as f64).sqrt();
    let e = Complex64::from_polar(1.0 / s, idx.m as f64 * phi);
    let imq = I * (idx.m as f64 * q);
    let u = (th.map(|t| c(t * tau, 0.0)) + ph.map(|t| imq * t)) * e;
    let v = (ph.map(|t| c(t * tau, 0.0)) - th.map(|t| imq * t)) * e;
    (u, v)
}

pub fn vsh_u(idx: ModeIndex, direction: &R3) -> Result<C3> {
    Ok(vsh(idx, direction)?.0)
}

pub fn vsh_v(idx: ModeIndex, direction: &R3) -> Result<C3> {
    Ok(vsh(idx, direction)?.1)
}

/// `(e^{-ik z·x̂} U, e^{-ik z·x̂} V)`.
pub fn translated_basis(idx: ModeIndex, z: &R3, k: f64, direction: &R3) -> Result<(C3, C3)> {
    let (u, v) = vsh(idx, direction)?;
    let ph = Complex64::from_polar(1.0, -k * z.dot(direction));
    Ok((u * ph, v * ph))
}

/// Gauss–Legendre in `cos θ` times a uniform `φ` grid. Nodes are stored ring
/// by ring: node `i * n_phi + j` sits at `(θ_i, φ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    n_theta: usize,
    n_phi: usize,
    theta: Vec<f64>,
    ring_weight: Vec<f64>,
    phi: Vec<f64>,
    dirs: Vec<R3>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Domain("quadrature needs at least one node per axis".into()));
        }
        let (x, w) = gauss_legendre(n_theta);
        // descending cos θ, i.e. ascending θ
        let theta: Vec<f64> = x.iter().rev().map(|xi| xi.acos()).collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let ring_weight: Vec<f64> = w.iter().rev().map(|wi| wi * dphi).collect();
        let phi: Vec<f64> = (0..n_phi).map(|j| j as f64 * dphi).collect();
        let mut dirs = Vec::with_capacity(n_theta * n_phi);
        for &t in &theta {
            for &p in &phi {
                dirs.push(crate::geom::from_angles(t, p));
            }
        }
        Ok(Self { n_theta, n_phi, theta, ring_weight, phi, dirs })
    }

    /// The rule with `n_phi = 2 n_theta`.
    pub fn with_n_theta(n_theta: usize) -> Result<Self> {
        Self::new(n_theta, 2 * n_theta)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    pub fn direction(&self, i: usize) -> &R3 {
        &self.dirs[i]
    }

    pub fn directions(&self) -> &[R3] {
        &self.dirs
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.ring_weight[i / self.n_phi]
    }

    pub fn angles(&self, i: usize) -> (f64, f64) {
        (self.theta[i / self.n_phi], self.phi[i % self.n_phi])
    }

    /// Largest order `analyze` accepts for a translation of size `k|z|`.
    pub fn max_order(&self, k_abs_z: f64) -> usize {
        self.n_theta.saturating_sub(k_abs_z.ceil() as usize + 10)
    }

    fn check_order(&self, order: usize, k_abs_z: f64) -> Result<()> {
        let needed = order + k_abs_z.ceil() as usize + 10;
        if self.n_theta < needed || self.n_phi < 2 * order + 1 {
            return Err(Error::DegreeTooLow { needed, have: self.n_theta });
        }
        Ok(())
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::with_n_theta(DEFAULT_N_THETA).expect("default rule")
    }
}

/// Complex tangential vector field sampled at the nodes of a rule.
#[derive(Debug, Clone)]
pub struct TangentialField {
    pub values: Vec<C3>,
    pub rule: Arc<SphereQuadrature>,
}

impl TangentialField {
    pub fn zeros(rule: Arc<SphereQuadrature>) -> Self {
        Self { values: vec![C3::zeros(); rule.len()], rule }
    }

    pub fn from_fn<F: FnMut(&R3) -> C3>(rule: Arc<SphereQuadrature>, mut f: F) -> Self {
        let values = rule.directions().iter().map(&mut f).collect();
        Self { values, rule }
    }

    /// Largest `|value · x̂|` over the nodes.
    pub fn max_radial(&self) -> f64 {
        self.values
            .iter()
            .zip(self.rule.directions())
            .map(|(v, d)| crate::geom::dot_cr(v, d).norm())
            .fold(0.0, f64::max)
    }

    /// Discrete L2 norm on the sphere.
    pub fn l2_norm(&self) -> f64 {
        inner_product(self, self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), rule: self.rule.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_rule(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, rule: self.rule.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c(-1.0, 0.0)))
    }
}

fn same_rule(f: &TangentialField, g: &TangentialField) -> Result<()> {
    if Arc::ptr_eq(&f.rule, &g.rule) || f.rule == g.rule {
        Ok(())
    } else {
        Err(Error::RuleMismatch)
    }
}

/// `Σ_i w_i f(x̂_i) · conj(g(x̂_i))`.
pub fn inner_product(f: &TangentialField, g: &TangentialField) -> Result<Complex64> {
    same_rule(f, g)?;
    let mut acc = CSum::default();
    for (i, (a, b)) in f.values.iter().zip(&g.values).enumerate() {
        acc.add(crate::geom::dot_conj(a, b) * f.rule.weight(i));
    }
    Ok(acc.value())
}

/// Coefficients of a tangential field against the z-translated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialCoeffs {
    pub center: R3,
    pub k: f64,
    pub order: usize,
    pub cu: Vec<Complex64>,
    pub cv: Vec<Complex64>,
}

impl TangentialCoeffs {
    pub fn zeros(center: R3, k: f64, order: usize) -> Self {
        let len = mode_count(order);
        Self { center, k, order, cu: vec![c(0.0, 0.0); len], cv: vec![c(0.0, 0.0); len] }
    }

    pub fn u(&self, n: usize, m: i64) -> Complex64 {
        self.cu[ModeIndex { n, m }.flat()]
    }

    pub fn v(&self, n: usize, m: i64) -> Complex64 {
        self.cv[ModeIndex { n, m }.flat()]
    }
}

/// `cU = ⟨f, Ũ⟩`, `cV = ⟨f, Ṽ⟩` for all modes up to `order`.
pub fn analyze(f: &TangentialField, z: &R3, k: f64, order: usize) -> Result<TangentialCoeffs> {
    let rule = &*f.rule;
    rule.check_order(order, k * z.norm())?;
    let n_phi = rule.n_phi;
    let mut out = TangentialCoeffs::zeros(*z, k, order);
    let mut acc_u = vec![CSum::default(); out.cu.len()];
    let mut acc_v = vec![CSum::default(); out.cv.len()];
    let mut g_th = vec![c(0.0, 0.0); 2 * order + 1];
    let mut g_ph = vec![c(0.0, 0.0); 2 * order + 1];
    for (it, &theta) in rule.theta.iter().enumerate() {
        let ring = LegendreRing::new(order, theta.cos());
        g_th.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        g_ph.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        for (jp, &phi) in rule.phi.iter().enumerate() {
            let idx = it * n_phi + jp;
            let phase = Complex64::from_polar(1.0, k * z.dot(&rule.dirs[idx]));
            let val = f.values[idx] * phase;
            let (th, ph) = spherical_frame(theta, phi);
            let a = crate::geom::dot_cr(&val, &th);
            let b = crate::geom::dot_cr(&val, &ph);
            for (mi, m) in (-(order as i64)..=order as i64).enumerate() {
                let e = Complex64::from_polar(1.0, -(m as f64) * phi);
                g_th[mi] += a * e;
                g_ph[mi] += b * e;
            }
        }
        let w = rule.ring_weight[it];
        for idx in ModeIndex::all(order) {
            let (_, q, tau) = ring.get(idx.n, idx.m);
            let s = ((idx.n * (idx.n + 1)) as f64).sqrt();
            let mi = (idx.m + order as i64) as usize;
            let imq = I * (idx.m as f64 * q);
            let f_flat = idx.flat();
            acc_u[f_flat].add((g_th[mi] * tau - imq * g_ph[mi]) * (w / s));
            acc_v[f_flat].add((g_ph[mi] * tau + imq * g_th[mi]) * (w / s));
        }
    }
    for (dst, a) in out.cu.iter_mut().zip(&acc_u) {
        *dst = a.value();
    }
    for (dst, a) in out.cv.iter_mut().zip(&acc_v) {
        *dst = a.value();
    }
    Ok(out)
}

/// `Σ cU Ũ + cV Ṽ` sampled on `rule`.
pub fn synthesize(coeffs: &TangentialCoeffs, rule: Arc<SphereQuadrature>) -> TangentialField {
    let order = coeffs.order;
    let n_phi = rule.n_phi;
    let mut values = vec![C3::zeros(); rule.len()];
    let mut a_th = vec![c(0.0, 0.0); 2 * order + 1];
    let mut a_ph = vec![c(0.0, 0.0); 2 * order + 1];
    for (it, &theta) in rule.theta.iter().enumerate() {
        let ring = LegendreRing::new(order, theta.cos());
        a_th.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        a_ph.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        for idx in ModeIndex::all(order) {
            let (_, q, tau) = ring.get(idx.n, idx.m);
            let s = ((idx.n * (idx.n + 1)) as f64).sqrt();
            let mi = (idx.m + order as i64) as usize;
            let imq = I * (idx.m as f64 * q);
            let (cu, cv) = (coeffs.cu[idx.flat()], coeffs.cv[idx.flat()]);
            a_th[mi] += (cu * tau - cv * imq) / s;
            a_ph[mi] += (cu * imq + cv * tau) / s;
        }
        for (jp, &phi) in rule.phi.iter().enumerate() {
            let mut sth = CSum::default();
            let mut sph = CSum::default();
            for (mi, m) in (-(order as i64)..=order as i64).enumerate() {
                let e = Complex64::from_polar(1.0, m as f64 * phi);
                sth.add(a_th[mi] * e);
                sph.add(a_ph[mi] * e);
            }
            let idx = it * n_phi + jp;
            let phase = Complex64::from_polar(1.0, -coeffs.k * coeffs.center.dot(&rule.dirs[idx]));
            let (th, ph) = spherical_frame(theta, phi);
            values[idx] = (th.map(|t| sth.value() * t) + ph.map(|t| sph.value() * t)) * phase;
        }
    }
    TangentialField { values, rule }
}
