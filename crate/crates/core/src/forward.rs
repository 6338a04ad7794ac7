//! Forward scattering by a convex impedance polyhedron via the method of
//! fundamental solutions.
//!
//! The scattered field is a sum of electric dipoles placed on a shrunk copy of
//! the surface, two tangential orientations per source point. Coefficients are
//! fitted in the least-squares sense to the impedance condition
//! `ν × curl E + iλ ν × (ν × E) = 0` at collocation points, with Tikhonov
//! regularization chosen by an L-curve scan.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ElectricDipole, FieldFn, PhiDerivs, WaveParams};
use crate::geom::{c, cnorm, tangent_frame, to_c3, C3, R3};
use crate::harmonics::{SphereQuadrature, TangentialField};
use crate::mesh::Polyhedron;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Where the boundary condition is enforced.
#[derive(Debug, Clone)]
pub enum Collocation {
    /// `n_collocation` lattice points on the polyhedron faces.
    Surface,
    /// Caller-supplied points with outward unit normals.
    Explicit(Vec<(R3, R3)>),
}

#[derive(Debug, Clone)]
pub struct MfsConfig {
    pub n_sources: usize,
    /// Sources sit at `centroid + shrink (x - centroid)` for surface samples `x`.
    pub source_shrink: f64,
    pub n_collocation: usize,
    /// Fixed Tikhonov parameter relative to the largest singular value;
    /// `None` picks one from the L-curve.
    pub tikhonov: Option<f64>,
    pub collocation: Collocation,
    /// Largest acceptable relative collocation residual. Edges and vertices
    /// make the exterior field singular, so polyhedra with sharp edges
    /// typically fit to a few tenths only; smooth surfaces reach 1e-4 or better.
    pub max_residual: f64,
}

impl Default for MfsConfig {
    fn default() -> Self {
        Self {
            n_sources: 160,
            source_shrink: 0.6,
            n_collocation: 640,
            tikhonov: None,
            collocation: Collocation::Surface,
            max_residual: 0.95,
        }
    }
}

impl MfsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 {
            return Err(Error::Domain("n_sources must be positive".into()));
        }
        if !(0.5..=0.95).contains(&self.source_shrink) {
            return Err(Error::Domain(format!("source_shrink must lie in [0.5, 0.95], got {}", self.source_shrink)));
        }
        if let Some(t) = self.tikhonov {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("tikhonov must be a finite non-negative number, got {t}")));
            }
        }
        let n_coll = match &self.collocation {
            Collocation::Surface => self.n_collocation,
            Collocation::Explicit(p) => p.len(),
        };
        if n_coll < 2 * self.n_sources {
            return Err(Error::Domain(format!(
                "need n_collocation >= 2 n_sources, got {n_coll} < 2 x {}",
                self.n_sources
            )));
        }
        if !(self.max_residual > 0.0) {
            return Err(Error::Domain("max_residual must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted dipole expansion of the scattered field.
#[derive(Debug, Clone)]
pub struct MfsSolution {
    pub k: f64,
    pub lambda: f64,
    /// Source positions and (real, unit) dipole orientations.
    pub sources: Vec<(R3, R3)>,
    pub coeffs: Vec<Complex64>,
    /// Relative collocation residual `‖Ac - b‖ / ‖b‖`.
    pub residual: f64,
    /// Regularization parameter actually used, relative to the largest singular value.
    pub tikhonov: f64,
    pub n_collocation: usize,
}

impl MfsSolution {
    pub fn dipoles(&self) -> impl Iterator<Item = ElectricDipole> + '_ {
        self.sources.iter().zip(&self.coeffs).map(|((y, a), w)| ElectricDipole {
            y: *y,
            a: to_c3(a) * *w,
            k: self.k,
        })
    }

    /// Scattered field `(E, H)` at a point outside the source cloud.
    pub fn scattered(&self, x: &R3) -> Result<(C3, C3)> {
        let mut e = C3::zeros();
        let mut h = C3::zeros();
        for d in self.dipoles() {
            let (de, dh) = d.eval(x)?;
            e += de;
            h += dh;
        }
        Ok((e, h))
    }
}

impl FieldFn for MfsSolution {
    fn eval(&self, x: &R3) -> Result<(C3, C3)> {
        self.scattered(x)
    }
}

/// Impedance operator `ν × curl E + iλ ν × (ν × E)` with `curl E = ik H`.
fn bc_vector(e: &C3, h: &C3, nu: &R3, k: f64, lambda: f64) -> C3 {
    let n = to_c3(nu);
    let curl = h * (I * k);
    n.cross(&curl) + n.cross(&n.cross(e)) * (I * lambda)
}

/// Boundary operator applied to a unit dipole, without evaluating `H` separately.
fn dipole_bc(x: &R3, y: &R3, a: &R3, nu: &R3, k: f64, lambda: f64) -> Result<C3> {
    let r = x - y;
    if r.norm() * k < 1e-12 {
        return Err(Error::EvalAtSource { radius: r.norm() });
    }
    let d = PhiDerivs::real(&r, k);
    let ac = to_c3(a);
    let e = ac * d.phi + d.hess() * ac * c(1.0 / (k * k), 0.0);
    let curl = d.grad().cross(&ac);
    let n = to_c3(nu);
    Ok(n.cross(&curl) + n.cross(&n.cross(&e)) * (I * lambda))
}

fn source_points(poly: &Polyhedron, cfg: &MfsConfig) -> Vec<(R3, R3)> {
    let centre = poly.centroid();
    poly.surface_samples(cfg.n_sources)
        .into_iter()
        .flat_map(|(x, nu)| {
            let y = centre + (x - centre) * cfg.source_shrink;
            let (t1, t2) = tangent_frame(&nu);
            [(y, t1), (y, t2)]
        })
        .collect()
}

fn collocation_points(poly: &Polyhedron, cfg: &MfsConfig) -> Vec<(R3, R3)> {
    match &cfg.collocation {
        Collocation::Surface => poly.surface_samples(cfg.n_collocation),
        Collocation::Explicit(pts) => pts.clone(),
    }
}

struct System {
    a: DMatrix<Complex64>,
    b: DVector<Complex64>,
}

fn assemble(
    sources: &[(R3, R3)],
    points: &[(R3, R3)],
    wp: &WaveParams,
    incident: &dyn FieldFn,
) -> Result<System> {
    let (k, lambda) = (wp.k, wp.lambda);
    let scale = 1.0 / (k + lambda);
    let rows: Vec<Result<[(Vec<Complex64>, Complex64); 2]>> = points
        .par_iter()
        .map(|(x, nu)| {
            let (t1, t2) = tangent_frame(nu);
            let (ti, hi) = incident.eval(x)?;
            let inc = bc_vector(&ti, &hi, nu, k, lambda);
            let mut r1 = Vec::with_capacity(sources.len());
            let mut r2 = Vec::with_capacity(sources.len());
            for (y, a) in sources {
                let v = dipole_bc(x, y, a, nu, k, lambda)?;
                r1.push(crate::geom::dot_cr(&v, &t1) * scale);
                r2.push(crate::geom::dot_cr(&v, &t2) * scale);
            }
            Ok([
                (r1, -crate::geom::dot_cr(&inc, &t1) * scale),
                (r2, -crate::geom::dot_cr(&inc, &t2) * scale),
            ])
        })
        .collect();
    let m = 2 * points.len();
    let n = sources.len();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, pair) in rows.into_iter().enumerate() {
        for (j, (row, rhs)) in pair?.into_iter().enumerate() {
            let r = 2 * i + j;
            for (col, v) in row.into_iter().enumerate() {
                a[(r, col)] = v;
            }
            b[r] = rhs;
        }
    }
    Ok(System { a, b })
}

/// Tikhonov solutions `Σ s/(s² + α²) (uᴴb) v` from one SVD.
struct Filter {
    s: Vec<f64>,
    utb: DVector<Complex64>,
    v_t: DMatrix<Complex64>,
    b_norm: f64,
    /// Part of `b` outside the range of `U`.
    b_perp2: f64,
}

impl Filter {
    fn new(sys: &System) -> Result<Self> {
        let fail = || Error::IllConditioned { residual: f64::NAN };
        // Reduce to the square triangular factor first; the SVD of R is much cheaper.
        let (svd, rhs) = if sys.a.nrows() > sys.a.ncols() {
            let qr = sys.a.clone().qr();
            let qtb = qr.q().adjoint() * &sys.b;
            (qr.r().svd(true, true), qtb)
        } else {
            (sys.a.clone().svd(true, true), sys.b.clone())
        };
        let utb = svd.u.ok_or_else(fail)?.adjoint() * rhs;
        let v_t = svd.v_t.ok_or_else(fail)?;
        let s = svd.singular_values;
        let b_norm = sys.b.norm();
        let b_perp2 = (b_norm * b_norm - utb.norm_squared()).max(0.0);
        Ok(Self { s: s.iter().copied().collect(), utb, v_t, b_norm, b_perp2 })
    }

    fn s_max(&self) -> f64 {
        self.s.iter().copied().fold(0.0, f64::max)
    }

    /// Residual norm and solution norm for absolute parameter `alpha`.
    fn norms(&self, alpha: f64) -> (f64, f64) {
        let a2 = alpha * alpha;
        let mut res2 = self.b_perp2;
        let mut sol2 = 0.0;
        for (s, g) in self.s.iter().zip(self.utb.iter()) {
            let f = s * s / (s * s + a2);
            res2 += ((1.0 - f) * g.norm()).powi(2);
            if *s > 0.0 {
                sol2 += (f / s * g.norm()).powi(2);
            }
        }
        (res2.sqrt(), sol2.sqrt())
    }

    fn solve(&self, alpha: f64) -> Vec<Complex64> {
        let a2 = alpha * alpha;
        let mut y = DVector::zeros(self.s.len());
        for (i, s) in self.s.iter().enumerate() {
            let d = s * s + a2;
            if d > 0.0 {
                y[i] = self.utb[i] * (s / d);
            }
        }
        (self.v_t.adjoint() * y).iter().copied().collect()
    }
}

/// Corner of the L-curve: the point farthest from the chord joining the
/// ends of the curve in log-log coordinates.
fn l_curve_corner(curve: &[(f64, f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(_, r, s)| (r.max(1e-300).log10(), s.max(1e-300).log10()))
        .collect();
    let (p0, p1) = (pts[0], pts[pts.len() - 1]);
    let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return curve[0].0;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let dist = ((p.0 - p0.0) * dy - (p.1 - p0.1) * dx).abs() / len;
        if dist > best.1 {
            best = (i, dist);
        }
    }
    curve[best.0].0
}

/// Relative regularization parameters scanned by the L-curve.
pub const L_CURVE_GRID: [f64; 9] = [1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

pub fn mfs_solve(poly: &Polyhedron, wp: &WaveParams, incident: &dyn FieldFn, cfg: &MfsConfig) -> Result<MfsSolution> {
    cfg.validate()?;
    let sources = source_points(poly, cfg);
    let points = collocation_points(poly, cfg);
    let sys = assemble(&sources, &points, wp, incident)?;
    let filter = Filter::new(&sys)?;
    if filter.b_norm == 0.0 {
        return Ok(MfsSolution {
            k: wp.k,
            lambda: wp.lambda,
            coeffs: vec![Complex64::new(0.0, 0.0); sources.len()],
            sources,
            residual: 0.0,
            tikhonov: 0.0,
            n_collocation: points.len(),
        });
    }
    let s_max = filter.s_max();
    let rel = match cfg.tikhonov {
        Some(t) => t,
        None => {
            let curve: Vec<(f64, f64, f64)> = L_CURVE_GRID
                .iter()
                .map(|&t| {
                    let (r, s) = filter.norms(t * s_max);
                    (t, r, s)
                })
                .collect();
            l_curve_corner(&curve)
        }
    };
    let coeffs = filter.solve(rel * s_max);
    let cv = DVector::from_vec(coeffs.clone());
    let residual = (&sys.a * cv - &sys.b).norm() / filter.b_norm;
    log::debug!("mfs: {} unknowns, {} rows, alpha {rel:e}, residual {residual:e}", sources.len(), sys.b.len());
    if !(residual <= cfg.max_residual) {
        return Err(Error::IllConditioned { residual });
    }
    Ok(MfsSolution {
        k: wp.k,
        lambda: wp.lambda,
        sources,
        coeffs,
        residual,
        tikhonov: rel,
        n_collocation: points.len(),
    })
}

/// Electric far-field pattern of the fitted expansion on the rule's nodes.
pub fn mfs_farfield(sol: &MfsSolution, rule: Arc<SphereQuadrature>) -> TangentialField {
    let dipoles: Vec<ElectricDipole> = sol.dipoles().collect();
    let values = rule
        .directions()
        .par_iter()
        .map(|xhat| dipoles.iter().map(|d| d.far_field(xhat)).sum())
        .collect();
    TangentialField { values, rule }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeldOutReport {
    /// Largest `|BC(E_inc + E_s)|` over the points, relative to the largest `|BC(E_inc)|`.
    pub max_relative: f64,
    /// RMS of `|BC(E_inc + E_s)|` relative to the RMS of `|BC(E_inc)|`;
    /// comparable to the collocation residual.
    pub rms_relative: f64,
    pub n_points: usize,
}

/// Impedance residual of the total field at random boundary points not used in the fit.
pub fn held_out_residual(
    sol: &MfsSolution,
    poly: &Polyhedron,
    incident: &dyn FieldFn,
    n_points: usize,
    seed: u64,
) -> Result<HeldOutReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(R3, R3)> = (0..n_points)
        .map(|_| poly.random_surface_point(rng.gen(), rng.gen(), rng.gen()))
        .collect();
    held_out_at(sol, &pts, incident)
}

/// Same as [`held_out_residual`] at given points and normals.
pub fn held_out_at(sol: &MfsSolution, pts: &[(R3, R3)], incident: &dyn FieldFn) -> Result<HeldOutReport> {
    let (k, lambda) = (sol.k, sol.lambda);
    let pairs: Vec<Result<(f64, f64)>> = pts
        .par_iter()
        .map(|(x, nu)| {
            let (ei, hi) = incident.eval(x)?;
            let (es, hs) = sol.scattered(x)?;
            let inc = cnorm(&bc_vector(&ei, &hi, nu, k, lambda));
            let tot = cnorm(&bc_vector(&(ei + es), &(hi + hs), nu, k, lambda));
            Ok((tot, inc))
        })
        .collect();
    let mut max_tot = 0.0f64;
    let mut max_inc = 0.0f64;
    let (mut sum_tot, mut sum_inc) = (0.0, 0.0);
    for p in pairs {
        let (t, i) = p?;
        max_tot = max_tot.max(t);
        max_inc = max_inc.max(i);
        sum_tot += t * t;
        sum_inc += i * i;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    Ok(HeldOutReport {
        max_relative: ratio(max_tot, max_inc),
        rms_relative: ratio(sum_tot.sqrt(), sum_inc.sqrt()),
        n_points: pts.len(),
    })
}
