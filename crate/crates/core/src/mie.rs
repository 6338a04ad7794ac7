//! Scattering of the plane wave `E^in = ik ((d×p)×d) e^{ik x·d}` by a ball
//! `B_h(z)` that is either perfectly conducting or carries the impedance
//! condition `ν×(∇×E) + iλ ν×(ν×E) = 0`.
//!
//! With multipoles `M[f] = ∇×(x f(kr) Y_n^m) = -f s V_n^m` and
//! `N[f] = k^{-1}∇×M[f]`, where `s = √(n(n+1))`, the incident wave expands as
//! `Σ β N[j_n] + α M[j_n]` with
//! `β = 4πk i^n e_U / s`, `α = -4πk i^{n+1} e_V / s`,
//! `e_U = conj(U_n^m(d))·p`, `e_V = conj(V_n^m(d))·p`.
//! The scattered wave is `Σ β' N[h_n] + α' M[h_n]` and its far field is
//!
//! `E^∞(x̂) = 4π e^{ik z·d} e^{-ik z·x̂} Σ (-u_n e_U U_n^m(x̂) + v_n e_V V_n^m(x̂))`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{section5_plane_wave, FieldFn, PlaneWaveParams};
use crate::geom::{angles, c, dot_conj, to_c3, C3, I, R3};
use crate::harmonics::{
    analyze, spherical_frame, synthesize, vsh, LegendreRing, ModeIndex, SphereQuadrature, TangentialCoeffs,
    TangentialField,
};
use crate::specfun::{riccati_array, sph_bessel_j_array, RiccatiPair, N_MAX_ORDER};

pub const DEFAULT_GUARD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallKind {
    Pec,
    Impedance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBall {
    pub z: R3,
    pub h: f64,
}

impl TestBall {
    pub fn new(z: R3, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("ball radius must be positive, got {h}")));
        }
        Ok(Self { z, h })
    }
}

/// Eigenvalues `u_n`, `v_n` (`n = 1..=order`, stored at `n - 1`) of the
/// far-field operator of a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpectrum {
    pub k: f64,
    pub h: f64,
    pub order: usize,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub kind: BallKind,
}

impl BallSpectrum {
    pub fn u(&self, n: usize) -> Complex64 {
        self.u[n - 1]
    }
    pub fn v(&self, n: usize) -> Complex64 {
        self.v[n - 1]
    }
}

/// Orders at which `k^2` is (numerically) an interior eigenvalue of the ball.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuardReport {
    pub flagged: Vec<usize>,
}

impl GuardReport {
    pub fn passes(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Flags orders `1..=order` for which `kh` lies within `tol` of a zero of
/// `j_n` or of `ψ_n'`. Distances are Newton steps `|f/f'|`, so the test is
/// insensitive to the natural decay of `j_n` for `n >> kh`.
pub fn eigenvalue_guard_tol(k: f64, h: f64, order: usize, tol: f64) -> Result<GuardReport> {
    let t = k * h;
    let r = riccati_array(order, t)?;
    let j = sph_bessel_j_array(order, t)?;
    let mut flagged = Vec::new();
    for n in 1..=order {
        let nf = n as f64;
        let jp = j[n - 1] - (nf + 1.0) / t * j[n];
        let near_j = j[n].abs() <= tol * jp.abs();
        // ψ'' = (n(n+1)/t² - 1) ψ
        let psi2 = (nf * (nf + 1.0) / (t * t) - 1.0) * r[n].psi;
        let near_psi = r[n].psi_prime.abs() <= tol * psi2.abs();
        if near_j || near_psi {
            flagged.push(n);
        }
    }
    Ok(GuardReport { flagged })
}

pub fn eigenvalue_guard(k: f64, h: f64, order: usize) -> Result<GuardReport> {
    eigenvalue_guard_tol(k, h, order, DEFAULT_GUARD_TOL)
}

fn check_wave(k: f64, h: f64, order: usize) -> Result<()> {
    check_args(k, h, order)?;
    let report = eigenvalue_guard(k, h, order)?;
    if !report.passes() {
        return Err(Error::InteriorEigenvalueNear { orders: report.flagged });
    }
    Ok(())
}

fn check_args(k: f64, h: f64, order: usize) -> Result<()> {
    if !(k > 0.0) || !(h > 0.0) {
        return Err(Error::Domain(format!("need k > 0 and h > 0, got k = {k}, h = {h}")));
    }
    if order > N_MAX_ORDER {
        return Err(Error::OrderCapExceeded { n: order, cap: N_MAX_ORDER });
    }
    Ok(())
}

/// `(u_n, v_n)` from one Riccati pair.
fn eigenpair(r: &RiccatiPair, k: f64, kind: BallKind) -> (Complex64, Complex64) {
    match kind {
        BallKind::Pec => (r.psi_prime / r.zeta_prime, -r.psi / r.zeta),
        BallKind::Impedance(lam) => {
            let il = I * lam;
            let u = (k * r.psi - il * r.psi_prime) / (r.zeta * k - il * r.zeta_prime);
            let v = -(k * r.psi_prime + il * r.psi) / (r.zeta_prime * k + il * r.zeta);
            (u, v)
        }
    }
}

fn spectrum(k: f64, h: f64, order: usize, kind: BallKind) -> Result<BallSpectrum> {
    check_wave(k, h, order)?;
    raw_spectrum(k, h, order, kind)
}

fn raw_spectrum(k: f64, h: f64, order: usize, kind: BallKind) -> Result<BallSpectrum> {
    let r = riccati_array(order, k * h)?;
    let (u, v) = r[1..].iter().map(|p| eigenpair(p, k, kind)).unzip();
    Ok(BallSpectrum { k, h, order, u, v, kind })
}

/// `u_n = ψ_n'(kh)/ζ_n'(kh)`, `v_n = -ψ_n(kh)/ζ_n(kh)`.
pub fn pec_ball_spectrum(k: f64, h: f64, order: usize) -> Result<BallSpectrum> {
    spectrum(k, h, order, BallKind::Pec)
}

/// `u_n = (kψ - iλψ')/(kζ - iλζ')`, `v_n = -(kψ' + iλψ)/(kζ' + iλζ)`.
pub fn impedance_ball_spectrum(k: f64, h: f64, lambda: f64, order: usize) -> Result<BallSpectrum> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("impedance must be positive, got {lambda}")));
    }
    spectrum(k, h, order, BallKind::Impedance(lambda))
}

pub fn ball_spectrum(k: f64, h: f64, order: usize, kind: BallKind) -> Result<BallSpectrum> {
    match kind {
        BallKind::Pec => pec_ball_spectrum(k, h, order),
        BallKind::Impedance(l) => impedance_ball_spectrum(k, h, l, order),
    }
}

/// Like [`ball_spectrum`] without the eigenvalue guard, for reporting.
pub fn ball_spectrum_unguarded(k: f64, h: f64, order: usize, kind: BallKind) -> Result<BallSpectrum> {
    check_args(k, h, order)?;
    if let BallKind::Impedance(l) = kind {
        if !(l > 0.0) {
            return Err(Error::Domain(format!("impedance must be positive, got {l}")));
        }
    }
    raw_spectrum(k, h, order, kind)
}

/// Series length for forward evaluation, `ceil(kh + 4 (kh)^{1/3} + 8)`.
pub fn forward_order(kh: f64) -> usize {
    (kh + 4.0 * kh.cbrt() + 8.0).ceil() as usize
}

/// The scattered field of one ball for one incident plane wave, stored as
/// outgoing multipole coefficients.
#[derive(Debug, Clone)]
pub struct MieScatterer {
    pub ball: TestBall,
    pub k: f64,
    pub kind: BallKind,
    pub order: usize,
    pw: PlaneWaveParams,
    /// Far-field weights `-4π u_n e_U`, `4π v_n e_V`, translation phase included.
    ff_u: Vec<Complex64>,
    ff_v: Vec<Complex64>,
    /// Near-field coefficients of `N[h_n]` and `M[h_n]`, phase included.
    beta: Vec<Complex64>,
    alpha: Vec<Complex64>,
}

impl MieScatterer {
    pub fn new(ball: TestBall, kind: BallKind, pw: &PlaneWaveParams, k: f64) -> Result<Self> {
        Self::with_order(ball, kind, pw, k, forward_order(k * ball.h))
    }

    pub fn with_order(ball: TestBall, kind: BallKind, pw: &PlaneWaveParams, k: f64, order: usize) -> Result<Self> {
        let spec = ball_spectrum(k, ball.h, order, kind)?;
        let shift = Complex64::from_polar(1.0, k * ball.z.dot(&pw.d));
        let p = to_c3(&pw.p);
        let len = crate::harmonics::mode_count(order);
        let mut ff_u = Vec::with_capacity(len);
        let mut ff_v = Vec::with_capacity(len);
        let mut beta = Vec::with_capacity(len);
        let mut alpha = Vec::with_capacity(len);
        for idx in ModeIndex::all(order) {
            let n = idx.n;
            let s = ((n * (n + 1)) as f64).sqrt();
            let (ud, vd) = vsh(idx, &pw.d)?;
            let e_u = dot_conj(&p, &ud);
            let e_v = dot_conj(&p, &vd);
            ff_u.push(-4.0 * PI * spec.u(n) * e_u * shift);
            ff_v.push(4.0 * PI * spec.v(n) * e_v * shift);
            let ipow = I.powu(n as u32);
            let b_in = 4.0 * PI * k * ipow * e_u / s;
            let a_in = -4.0 * PI * k * ipow * I * e_v / s;
            // outgoing coefficients: β' = -u_n β, α' = v_n α
            let (bu, av) = (-spec.u(n), spec.v(n));
            beta.push(b_in * bu * shift);
            alpha.push(a_in * av * shift);
        }
        Ok(Self { ball, k, kind, order, pw: *pw, ff_u, ff_v, beta, alpha })
    }

    pub fn incident(&self) -> crate::fields::PlaneWaveSum {
        section5_plane_wave(&self.pw, self.k)
    }

    /// Far-field amplitude at a unit direction.
    pub fn far_field(&self, xhat: &R3) -> Result<C3> {
        let (theta, phi) = angles(xhat);
        let ring = LegendreRing::new(self.order, theta.cos());
        let (th, ph) = spherical_frame(theta, phi);
        let mut a_th = Complex64::new(0.0, 0.0);
        let mut a_ph = Complex64::new(0.0, 0.0);
        for idx in ModeIndex::all(self.order) {
            let (_, q, tau) = ring.get(idx.n, idx.m);
            let s = ((idx.n * (idx.n + 1)) as f64).sqrt();
            let e = Complex64::from_polar(1.0 / s, idx.m as f64 * phi);
            let imq = I * (idx.m as f64 * q);
            let (cu, cv) = (self.ff_u[idx.flat()], self.ff_v[idx.flat()]);
            a_th += (cu * tau - cv * imq) * e;
            a_ph += (cu * imq + cv * tau) * e;
        }
        let phase = Complex64::from_polar(1.0, -self.k * self.ball.z.dot(xhat));
        Ok((th.map(|t| a_th * t) + ph.map(|t| a_ph * t)) * phase)
    }

    /// Far field sampled on a rule, by modal synthesis.
    pub fn far_field_on(&self, rule: Arc<SphereQuadrature>) -> TangentialField {
        let coeffs = TangentialCoeffs {
            center: self.ball.z,
            k: self.k,
            order: self.order,
            cu: self.ff_u.clone(),
            cv: self.ff_v.clone(),
        };
        synthesize(&coeffs, rule)
    }

    /// Exact modal coefficients of the far field against the basis centred at the ball.
    pub fn far_field_coeffs(&self) -> TangentialCoeffs {
        TangentialCoeffs { center: self.ball.z, k: self.k, order: self.order, cu: self.ff_u.clone(), cv: self.ff_v.clone() }
    }

    /// Scattered `(E, H)` at a point outside the ball.
    pub fn scattered(&self, x: &R3) -> Result<(C3, C3)> {
        let rel = x - self.ball.z;
        let r = rel.norm();
        if r < self.ball.h * (1.0 - 1e-12) {
            return Err(Error::EvalInsideBall);
        }
        let k = self.k;
        let kr = k * r;
        let xhat = rel / r;
        let (theta, phi) = angles(&xhat);
        let ring = LegendreRing::new(self.order, theta.cos());
        let (th, ph) = spherical_frame(theta, phi);
        let rp = riccati_array(self.order, kr)?;
        // accumulate radial, θ and φ parts of E and H
        let mut e = [Complex64::new(0.0, 0.0); 3];
        let mut hh = [Complex64::new(0.0, 0.0); 3];
        for idx in ModeIndex::all(self.order) {
            let n = idx.n;
            let nn = (n * (n + 1)) as f64;
            let s = nn.sqrt();
            let (p, q, tau) = ring.get(n, idx.m);
            let eph = Complex64::from_polar(1.0, idx.m as f64 * phi);
            let y = p * eph;
            let imq = I * (idx.m as f64 * q);
            // U = (θ̂ τ + φ̂ imQ) e/s, V = (φ̂ τ - θ̂ imQ) e/s
            let u_th = tau * eph / s;
            let u_ph = imq * eph / s;
            let v_th = -imq * eph / s;
            let v_ph = tau * eph / s;
            let f = rp[n].zeta / kr;
            let dfac = rp[n].zeta_prime / kr;
            // M = -f s V, N = nn f/(kr) Y x̂ + dfac s U
            let m_r = Complex64::new(0.0, 0.0);
            let m_th = -f * s * v_th;
            let m_ph = -f * s * v_ph;
            let n_r = nn * f / kr * y;
            let n_th = dfac * s * u_th;
            let n_ph = dfac * s * u_ph;
            let (b, a) = (self.beta[idx.flat()], self.alpha[idx.flat()]);
            e[0] += b * n_r + a * m_r;
            e[1] += b * n_th + a * m_th;
            e[2] += b * n_ph + a * m_ph;
            // H = -i (β M + α N)
            hh[0] += -I * (b * m_r + a * n_r);
            hh[1] += -I * (b * m_th + a * n_th);
            hh[2] += -I * (b * m_ph + a * n_ph);
        }
        let to_cart = |v: [Complex64; 3]| to_c3(&xhat) * v[0] + th.map(|t| v[1] * t) + ph.map(|t| v[2] * t);
        Ok((to_cart(e), to_cart(hh)))
    }

    /// `(E_sc, E_total)` at a point outside the ball.
    pub fn near_field(&self, x: &R3) -> Result<(C3, C3)> {
        let (es, _) = self.scattered(x)?;
        let (ei, _) = self.incident().eval(x)?;
        Ok((es, es + ei))
    }
}

/// Total field (incident plus scattered) as a Maxwell pair.
pub struct MieTotal(pub MieScatterer);

impl FieldFn for MieTotal {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        let (es, hs) = self.0.scattered(x)?;
        let (ei, hi) = self.0.incident().eval(x)?;
        Ok((es + ei, hs + hi))
    }
}

/// Scattered field as a Maxwell pair.
pub struct MieScattered(pub MieScatterer);

impl FieldFn for MieScattered {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        self.0.scattered(x)
    }
}

/// Sampled far field of a PEC ball with the translation phase included.
pub fn far_field_pec_ball(
    ball: &TestBall,
    pw: &PlaneWaveParams,
    k: f64,
    rule: Arc<SphereQuadrature>,
) -> Result<TangentialField> {
    Ok(MieScatterer::new(*ball, BallKind::Pec, pw, k)?.far_field_on(rule))
}

/// Scattered and total field of a PEC ball at `x`.
pub fn near_field_pec_ball(ball: &TestBall, pw: &PlaneWaveParams, k: f64, x: &R3) -> Result<(C3, C3)> {
    MieScatterer::new(*ball, BallKind::Pec, pw, k)?.near_field(x)
}

/// Analysed coefficients at or below this fraction of the largest one are
/// quadrature roundoff and are dropped before scaling; otherwise they would be
/// amplified relative to modes whose eigenvalues are many decades smaller.
pub const SPECTRAL_CUTOFF: f64 = 1e-14;

/// Spectral far-field operator: coefficients of `g` in the z-translated basis
/// are scaled by `4π u_n` and `4π v_n`.
pub fn far_field_operator_apply(spectrum: &BallSpectrum, z: &R3, g: &TangentialField) -> Result<TangentialField> {
    let mut coeffs = analyze(g, z, spectrum.k, spectrum.order)?;
    let cmax = coeffs.cu.iter().chain(&coeffs.cv).map(|c| c.norm()).fold(0.0, f64::max);
    let floor = SPECTRAL_CUTOFF * cmax;
    for idx in ModeIndex::all(spectrum.order) {
        let f = idx.flat();
        for (cf, ev) in [(&mut coeffs.cu[f], spectrum.u(idx.n)), (&mut coeffs.cv[f], spectrum.v(idx.n))] {
            *cf = if cf.norm() <= floor { c(0.0, 0.0) } else { *cf * (4.0 * PI * ev) };
        }
    }
    Ok(synthesize(&coeffs, g.rule.clone()))
}

/// `∫ E^∞(x̂; d, g(d)) ds(d)` computed by superposing ball far fields over the
/// quadrature nodes of `g`, evaluated at the given directions.
pub fn far_field_operator_superposed(
    ball: &TestBall,
    kind: BallKind,
    k: f64,
    g: &TangentialField,
    order: usize,
    xhats: &[R3],
) -> Result<Vec<C3>> {
    let mut out = vec![C3::zeros(); xhats.len()];
    let rule = &g.rule;
    for (i, val) in g.values.iter().enumerate() {
        let d = *rule.direction(i);
        let w = rule.weight(i);
        // E^∞ is linear in p; split the complex density into real parts
        for (part, scale) in [(val.map(|z| z.re), c(w, 0.0)), (val.map(|z| z.im), c(0.0, w))] {
            if part.norm() == 0.0 {
                continue;
            }
            let pw = PlaneWaveParams { d, p: part };
            let sc = MieScatterer::with_order(*ball, kind, &pw, k, order)?;
            for (o, x) in out.iter_mut().zip(xhats) {
                *o += sc.far_field(x)? * scale;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::geom::cnorm;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_unit(r: &mut rand_chacha::ChaCha8Rng) -> R3 {
        loop {
            let v = R3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            if v.norm() > 0.1 && v.norm() < 1.0 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn v1_at_kh_one() {
        let s = pec_ball_spectrum(1.0, 1.0, 40).unwrap();
        let psi = 1f64.sin() - 1f64.cos();
        let zeta = Complex64::new(psi, -(1f64.cos() + 1f64.sin()));
        // |ζ_1(1)|² = 2 exactly
        assert_relative_eq!(zeta.norm_sqr(), 2.0, max_relative = 1e-14);
        let expect = -psi * zeta.conj() / 2.0;
        assert!((s.v(1) - expect).norm() < 1e-13);
        // quoted to seven digits
        assert!((s.v(1) - Complex64::new(-0.0453514, -0.2080734)).norm() < 5e-7);
    }

    #[test]
    fn decay_and_growth_rate() {
        let kh = 5.0;
        let s = pec_ball_spectrum(1.0, kh, 40).unwrap();
        for n in (kh.ceil() as usize + 2)..40 {
            assert!(s.v(n + 1).norm() < s.v(n).norm(), "n = {n}");
        }
        let h = crate::specfun::sph_hankel1_array(40, kh).unwrap();
        let ratio = |n: usize| 1.0 / s.v(n).norm() / (n as f64 * h[n].norm_sqr());
        assert!((ratio(39) / ratio(35) - 1.0).abs() < 0.02);
        assert!((ratio(39) - 2.0 * kh).abs() < 0.2 * kh);
    }

    #[test]
    fn guard_behaviour() {
        assert!(eigenvalue_guard(1.0, 1.0, 40).unwrap().passes());
        assert!(eigenvalue_guard(1.0, PI, 40).unwrap().flagged.iter().all(|&n| n != 1));
        // first positive root of j_1, i.e. of tan t = t, by bisection
        let j1 = |t: f64| t.sin() / (t * t) - t.cos() / t;
        let (mut a, mut b) = (4.0, 4.8);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if j1(a) * j1(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let root = 0.5 * (a + b);
        assert_relative_eq!(root, 4.493409457909064, max_relative = 1e-12);
        let rep = eigenvalue_guard(1.0, root, 10).unwrap();
        assert!(rep.flagged.contains(&1));
        assert!(matches!(pec_ball_spectrum(1.0, root, 10), Err(Error::InteriorEigenvalueNear { .. })));
    }

    #[test]
    fn impedance_tends_to_pec() {
        let (k, h) = (1.3, 1.1);
        let pec = pec_ball_spectrum(k, h, 10).unwrap();
        let mut errs = Vec::new();
        for lam in [1e3, 1e4, 1e5] {
            let imp = impedance_ball_spectrum(k, h, lam, 10).unwrap();
            let e = (1..=10)
                .map(|n| ((imp.u(n) - pec.u(n)).norm() / pec.u(n).norm()).max((imp.v(n) - pec.v(n)).norm() / pec.v(n).norm()))
                .fold(0.0, f64::max);
            errs.push((f64::ln(lam), e.ln()));
        }
        let slope = crate::fitting::ls_slope(&errs);
        assert!((slope + 1.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn impedance_lambda_equals_k() {
        let s = impedance_ball_spectrum(1.0, 1.0, 1.0, 20).unwrap();
        for n in 1..=20 {
            assert!(s.u(n).is_finite() && s.u(n).norm() > 0.0);
            assert!(s.v(n).is_finite() && s.v(n).norm() > 0.0);
        }
    }

    fn plane(d: R3, p: R3) -> PlaneWaveParams {
        PlaneWaveParams::new(d, p).unwrap()
    }

    #[test]
    fn pec_boundary_residual() {
        let k = 1.0;
        let ball = TestBall::new(R3::new(0.2, -0.1, 0.3), 2.0).unwrap();
        let d = R3::new(0.3, 0.4, -0.6).normalize();
        let p = d.cross(&R3::x()).normalize();
        let sc = MieScatterer::with_order(ball, BallKind::Pec, &plane(d, p), k, 40).unwrap();
        let mut r = rng(7);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let nu = random_unit(&mut r);
            let x = ball.z + nu * ball.h;
            let (_, et) = sc.near_field(&x).unwrap();
            worst = worst.max(cnorm(&to_c3(&nu).cross(&et)));
        }
        // |E^in| = k
        assert!(worst < 1e-8 * k, "{worst}");
        assert!(matches!(sc.scattered(&ball.z), Err(Error::EvalInsideBall)));
    }

    #[test]
    fn impedance_boundary_residual() {
        let (k, lam) = (1.0, 1.0);
        let ball = TestBall::new(R3::zeros(), 2.0).unwrap();
        let d = R3::new(-0.2, 0.5, 0.7).normalize();
        let p = d.cross(&R3::z()).normalize();
        let sc = MieScatterer::with_order(ball, BallKind::Impedance(lam), &plane(d, p), k, 30).unwrap();
        let total = MieTotal(sc);
        let mut r = rng(8);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let nu = random_unit(&mut r);
            let (e, h) = total.eval(&(nu * ball.h)).unwrap();
            let n = to_c3(&nu);
            let res = n.cross(&(h * (I * k))) + n.cross(&n.cross(&e)) * (I * lam);
            worst = worst.max(cnorm(&res));
        }
        assert!(worst < 1e-10 * k * k, "{worst}");
    }

    #[test]
    fn scattered_field_is_maxwell() {
        let k = 1.2;
        let ball = TestBall::new(R3::new(0.1, 0.0, 0.0), 1.0).unwrap();
        let pw = plane(R3::z(), R3::x());
        for kind in [BallKind::Pec, BallKind::Impedance(0.7)] {
            let f = MieScattered(MieScatterer::new(ball, kind, &pw, k).unwrap());
            for x in [R3::new(1.5, 0.3, -0.4), R3::new(-0.2, 2.0, 1.0)] {
                let ef = |p: &R3| f.eval(p).unwrap().0;
                let hf = |p: &R3| f.eval(p).unwrap().1;
                let (e, h) = f.eval(&x).unwrap();
                let je = fd::jacobian(&ef, &x, 1e-3);
                let jh = fd::jacobian(&hf, &x, 1e-3);
                let scale = cnorm(&e) + cnorm(&h);
                assert!(cnorm(&(fd::curl_of(&je) - h * (I * k))) < 1e-6 * scale);
                assert!(cnorm(&(fd::curl_of(&jh) + e * (I * k))) < 1e-6 * scale);
                assert!(fd::div_of(&je).norm() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn near_to_far() {
        let k = 1.0;
        let ball = TestBall::new(R3::new(0.3, 0.2, -0.1), 1.0).unwrap();
        let pw = plane(R3::new(0.0, 0.6, 0.8), R3::x());
        let sc = MieScatterer::new(ball, BallKind::Pec, &pw, k).unwrap();
        let xhat = R3::new(0.4, -0.4, 0.5).normalize();
        let ext = |r: f64| {
            let (e, _) = sc.scattered(&(ball.z + xhat * r)).unwrap();
            e * Complex64::from_polar(r, -k * r - k * ball.z.dot(&xhat))
        };
        let ff = sc.far_field(&xhat).unwrap();
        let h = ball.h;
        assert!(cnorm(&(ext(1e3 * h) - ff)) < 1e-2 * cnorm(&ff));
        let r1 = |r: f64| ext(2.0 * r) * c(2.0, 0.0) - ext(r);
        let r2 = (r1(2e3 * h) * c(4.0, 0.0) - r1(1e3 * h)) * c(1.0 / 3.0, 0.0);
        assert!(cnorm(&(r2 - ff)) < 1e-4 * cnorm(&ff));
    }

    #[test]
    fn sampled_far_field_matches_pointwise() {
        let rule = Arc::new(SphereQuadrature::with_n_theta(24).unwrap());
        let ball = TestBall::new(R3::new(0.0, 0.5, 0.0), 0.8).unwrap();
        let pw = plane(R3::x(), R3::z());
        let f = far_field_pec_ball(&ball, &pw, 1.5, rule.clone()).unwrap();
        let sc = MieScatterer::new(ball, BallKind::Pec, &pw, 1.5).unwrap();
        assert!(f.max_radial() < 1e-10);
        for i in [0, 17, 300, 900] {
            assert!(cnorm(&(f.values[i] - sc.far_field(rule.direction(i)).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn analysis_recovers_analytic_coefficients() {
        let rule = Arc::new(SphereQuadrature::default());
        let k = 2.0;
        let ball = TestBall::new(R3::new(0.3, 0.0, 0.0), 0.5).unwrap();
        let d = R3::new(0.0, 0.0, 1.0);
        let p = R3::x();
        let sc = MieScatterer::new(ball, BallKind::Pec, &plane(d, p), k).unwrap();
        let f = sc.far_field_on(rule);
        let a = analyze(&f, &ball.z, k, sc.order).unwrap();
        let spec = pec_ball_spectrum(k, ball.h, sc.order).unwrap();
        let shift = Complex64::from_polar(1.0, k * ball.z.dot(&d));
        for idx in ModeIndex::all(sc.order) {
            let (ud, vd) = vsh(idx, &d).unwrap();
            let eu = dot_conj(&to_c3(&p), &ud);
            let ev = dot_conj(&to_c3(&p), &vd);
            let cu = -4.0 * PI * spec.u(idx.n) * eu * shift;
            let cv = 4.0 * PI * spec.v(idx.n) * ev * shift;
            assert!((a.cu[idx.flat()] - cu).norm() < 1e-8);
            assert!((a.cv[idx.flat()] - cv).norm() < 1e-8);
        }
    }

    #[test]
    fn reciprocity() {
        let k = 1.7;
        let ball = TestBall::new(R3::zeros(), 0.9).unwrap();
        let mut r = rng(11);
        for _ in 0..6 {
            let d = random_unit(&mut r);
            let x = random_unit(&mut r);
            let p = d.cross(&random_unit(&mut r)).normalize();
            let q = x.cross(&random_unit(&mut r)).normalize();
            for kind in [BallKind::Pec, BallKind::Impedance(0.8)] {
                let a = MieScatterer::new(ball, kind, &plane(d, p), k).unwrap().far_field(&x).unwrap();
                let b = MieScatterer::new(ball, kind, &plane(-x, q), k).unwrap().far_field(&-d).unwrap();
                let lhs = crate::geom::dot_cr(&a, &q);
                let rhs = crate::geom::dot_cr(&b, &p);
                assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn eigen_relation_spectral() {
        let rule = Arc::new(SphereQuadrature::default());
        for (k, h, z) in [(1.0, 1.0, R3::zeros()), (1.0, 5.0, R3::new(0.0, 2.0, 0.0))] {
            let spec = pec_ball_spectrum(k, h, 20).unwrap();
            for idx in [ModeIndex::new(1, 0).unwrap(), ModeIndex::new(7, -3).unwrap(), ModeIndex::new(20, 20).unwrap()] {
                let g = TangentialField::from_fn(rule.clone(), |x| crate::harmonics::translated_basis(idx, &z, k, x).unwrap().0);
                let fg = far_field_operator_apply(&spec, &z, &g).unwrap();
                let expect = g.scale(4.0 * PI * spec.u(idx.n));
                let err = fg.sub(&expect).unwrap().l2_norm() / expect.l2_norm();
                assert!(err < 1e-8, "{err}");
            }
        }
    }

    #[test]
    fn superposed_operator_has_signed_eigenvalues() {
        // the physical far-field operator acts as -4πu_n on Ũ and 4πv_n on Ṽ
        let rule = Arc::new(SphereQuadrature::with_n_theta(20).unwrap());
        let k = 1.0;
        let ball = TestBall::new(R3::new(0.3, 0.0, 0.2), 1.0).unwrap();
        let order = 8;
        let spec = pec_ball_spectrum(k, ball.h, order).unwrap();
        let idx = ModeIndex::new(2, 1).unwrap();
        let xs = [R3::new(0.3, 0.1, 0.9).normalize(), R3::new(-0.7, 0.2, -0.1).normalize()];
        let gu = TangentialField::from_fn(rule.clone(), |x| crate::harmonics::translated_basis(idx, &ball.z, k, x).unwrap().0);
        let fu = far_field_operator_superposed(&ball, BallKind::Pec, k, &gu, order, &xs).unwrap();
        let gv = TangentialField::from_fn(rule.clone(), |x| crate::harmonics::translated_basis(idx, &ball.z, k, x).unwrap().1);
        let fv = far_field_operator_superposed(&ball, BallKind::Pec, k, &gv, order, &xs).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let (ut, vt) = crate::harmonics::translated_basis(idx, &ball.z, k, x).unwrap();
            assert!(cnorm(&(fu[i] + ut * (4.0 * PI * spec.u(2)))) < 1e-9);
            assert!(cnorm(&(fv[i] - vt * (4.0 * PI * spec.v(2)))) < 1e-9);
        }
    }

    #[test]
    fn bracket_at_observation_direction_is_not_diagonal() {
        // alternative reading: conj(U(x̂))·p inside the sum, so the d-integral
        // only sees ∫ g(d) ds(d), which cannot reproduce Ũ_{2,1}(x̂)
        let rule = Arc::new(SphereQuadrature::with_n_theta(20).unwrap());
        let (k, z) = (1.0, R3::new(0.3, 0.0, 0.2));
        let spec = pec_ball_spectrum(k, 1.0, 8).unwrap();
        let idx = ModeIndex::new(2, 1).unwrap();
        let g = TangentialField::from_fn(rule.clone(), |x| crate::harmonics::translated_basis(idx, &z, k, x).unwrap().0);
        let mut gint = C3::zeros();
        for (i, v) in g.values.iter().enumerate() {
            gint += v * c(rule.weight(i), 0.0);
        }
        let alt = |x: &R3| {
            let mut acc = C3::zeros();
            for m in ModeIndex::all(8) {
                let (u, v) = vsh(m, x).unwrap();
                acc += u * (4.0 * PI * spec.u(m.n) * dot_conj(&gint, &u)) + v * (4.0 * PI * spec.v(m.n) * dot_conj(&gint, &v));
            }
            acc * Complex64::from_polar(1.0, -k * z.dot(x))
        };
        let f = TangentialField::from_fn(rule.clone(), alt);
        let proj = crate::harmonics::inner_product(&f, &g).unwrap();
        let resid = f.sub(&g.scale(proj)).unwrap().l2_norm();
        assert!(resid > 1e-3 * f.l2_norm().max(1e-300) || f.l2_norm() < 1e-12);
        assert!((proj - 4.0 * PI * spec.u(2)).norm() > 1e-3 * spec.u(2).norm());
    }

    #[test]
    fn spectrum_independent_of_centre() {
        let a = pec_ball_spectrum(2.0, 0.7, 15).unwrap();
        let rule = Arc::new(SphereQuadrature::with_n_theta(40).unwrap());
        let idx = ModeIndex::new(3, 1).unwrap();
        for z in [R3::zeros(), R3::new(1.0, -1.0, 0.5)] {
            let g = TangentialField::from_fn(rule.clone(), |x| crate::harmonics::translated_basis(idx, &z, 2.0, x).unwrap().1);
            let fg = far_field_operator_apply(&a, &z, &g).unwrap();
            let ratio = inner_product_ratio(&fg, &g);
            assert!((ratio - 4.0 * PI * a.v(3)).norm() < 1e-10);
        }
    }

    fn inner_product_ratio(f: &TangentialField, g: &TangentialField) -> Complex64 {
        crate::harmonics::inner_product(f, g).unwrap() / crate::harmonics::inner_product(g, g).unwrap()
    }

    #[test]
    fn linearity() {
        let rule = Arc::new(SphereQuadrature::with_n_theta(30).unwrap());
        let spec = pec_ball_spectrum(1.0, 2.0, 12).unwrap();
        let z = R3::new(0.5, 0.0, 0.0);
        let g1 = TangentialField::from_fn(rule.clone(), |x| to_c3(&x.cross(&R3::z())));
        let g2 = TangentialField::from_fn(rule.clone(), |x| to_c3(&x.cross(&R3::x())) * I);
        let (a, b) = (c(0.3, -1.0), c(2.0, 0.5));
        let lhs = far_field_operator_apply(&spec, &z, &g1.scale(a).add(&g2.scale(b)).unwrap()).unwrap();
        let rhs = far_field_operator_apply(&spec, &z, &g1)
            .unwrap()
            .scale(a)
            .add(&far_field_operator_apply(&spec, &z, &g2).unwrap().scale(b))
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-12 * (1.0 + lhs.l2_norm()));
    }
}
