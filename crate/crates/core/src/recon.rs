//! Reconstruction sweep: test balls on a sphere of centres, accepted where
//! the indicator stays bounded, and the target imaged as their intersection.

use std::f64::consts::PI;
use std::path::Path;

use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::R3;
use crate::harmonics::{analyze, TangentialField};
use crate::indicator::{indicator_from_coeffs, Classification, TruncationPolicy};
use crate::mie::{ball_spectrum, BallKind, BallSpectrum, TestBall};

pub const DEFAULT_VOXEL_RES: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    pub r: f64,
    pub centers: Vec<R3>,
    pub radii: Vec<f64>,
}

impl SamplingGrid {
    pub fn h_step(&self) -> f64 {
        if self.radii.len() < 2 {
            return 2.0 * self.r;
        }
        self.radii[1] - self.radii[0]
    }
}

/// Fibonacci-lattice centres on `|z| = R` (the north pole when `n_z = 1`) and
/// `n_h` uniform radii from `h_min = R/n_h` up to, but excluding, `2R`.
pub fn make_grid(r: f64, n_z: usize, n_h: usize) -> Result<SamplingGrid> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("enclosing radius must be positive, got {r}")));
    }
    if n_z == 0 || n_h < 2 {
        return Err(Error::Domain(format!("need n_z >= 1 and n_h >= 2, got {n_z}, {n_h}")));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let centers: Vec<R3> = (0..n_z)
        .map(|i| {
            let cz = if n_z == 1 { 1.0 } else { 1.0 - 2.0 * i as f64 / (n_z - 1) as f64 };
            let s = (1.0 - cz * cz).max(0.0).sqrt();
            let phi = golden * i as f64;
            let v = R3::new(s * phi.cos(), s * phi.sin(), cz);
            v / v.norm() * r
        })
        .collect();
    let h_min = r / n_h as f64;
    let step = (2.0 * r - h_min) / n_h as f64;
    let radii: Vec<f64> = (0..n_h).map(|i| h_min + step * i as f64).collect();
    if n_z > 1 {
        // mean spacing of the centres
        let z_mesh = r * (4.0 * PI / n_z as f64).sqrt();
        if step > z_mesh {
            return Err(Error::Domain(format!("h-step {step} is coarser than the centre spacing {z_mesh}")));
        }
    }
    Ok(SamplingGrid { r, centers, radii })
}

/// Boolean voxel grid over `[−R, R]³`, index `(ix·res + iy)·res + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub r: f64,
    pub res: usize,
    pub bits: Vec<bool>,
}

impl VoxelGrid {
    pub fn voxel_size(&self) -> f64 {
        2.0 * self.r / self.res as f64
    }

    pub fn center(&self, ix: usize, iy: usize, iz: usize) -> R3 {
        let s = self.voxel_size();
        R3::new(
            -self.r + (ix as f64 + 0.5) * s,
            -self.r + (iy as f64 + 0.5) * s,
            -self.r + (iz as f64 + 0.5) * s,
        )
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.res + iy) * self.res + iz
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.bits[self.index(ix, iy, iz)]
    }

    /// Occupancy at the voxel containing `x`; false outside the box.
    pub fn contains(&self, x: &R3) -> bool {
        let s = self.voxel_size();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((x[a] + self.r) / s).floor();
            if f < 0.0 || f >= self.res as f64 {
                return false;
            }
            idx[a] = f as usize;
        }
        self.get(idx[0], idx[1], idx[2])
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Occupied voxels with an empty face neighbour or on the box face.
    pub fn boundary_centers(&self) -> Vec<R3> {
        let n = self.res;
        let mut out = Vec::new();
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    if !self.get(ix, iy, iz) {
                        continue;
                    }
                    let edge = [ix, iy, iz].iter().any(|&i| i == 0 || i + 1 == n);
                    let open = edge
                        || !self.get(ix - 1, iy, iz)
                        || !self.get(ix + 1, iy, iz)
                        || !self.get(ix, iy - 1, iz)
                        || !self.get(ix, iy + 1, iz)
                        || !self.get(ix, iy, iz - 1)
                        || !self.get(ix, iy, iz + 1);
                    if open {
                        out.push(self.center(ix, iy, iz));
                    }
                }
            }
        }
        out
    }

    /// Bitset, least significant bit first.
    pub fn to_base64(&self) -> String {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        base64::engine::general_purpose::STANDARD.encode(bytes)
    }

    pub fn from_base64(r: f64, res: usize, data: &str) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(data)
            .map_err(|e| Error::Schema(format!("voxel data: {e}")))?;
        let len = res * res * res;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Schema(format!("voxel data has {} bytes, expected {}", bytes.len(), len.div_ceil(8))));
        }
        let bits = (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(Self { r, res, bits })
    }
}

/// Pointwise AND of `|x − z| ≤ h` over `balls`, at voxel centres.
pub fn voxelize(r: f64, res: usize, balls: &[TestBall]) -> VoxelGrid {
    let mut grid = VoxelGrid { r, res, bits: vec![false; res * res * res] };
    let bits: Vec<bool> = (0..res * res * res)
        .into_par_iter()
        .map(|i| {
            let (ix, iy, iz) = (i / (res * res), (i / res) % res, i % res);
            let x = grid.center(ix, iy, iz);
            balls.iter().all(|b| (x - b.z).norm() <= b.h)
        })
        .collect();
    grid.bits = bits;
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedBall {
    pub center_index: usize,
    pub z: [f64; 3],
    pub h: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub grid: SamplingGrid,
    /// Sorted by `(center_index, h)`.
    pub accepted: Vec<AcceptedBall>,
    /// Raw classifications `[center][radius]`, before the monotone cleanup.
    pub raw: Vec<Vec<Classification>>,
    /// Smallest accepted radius per centre.
    pub critical_radius: Vec<Option<f64>>,
    pub occupancy: VoxelGrid,
    /// `(center, radius)` pairs skipped by the eigenvalue guard or failed.
    pub skipped: Vec<(usize, usize, String)>,
    /// Raw classifications that were not monotone in `h`.
    pub monotonicity_violations: usize,
    /// Every test ball was accepted: the data carry no information.
    pub degenerate: bool,
}

/// Settings for [`reconstruct`].
#[derive(Debug, Clone, Copy)]
pub struct ReconConfig {
    pub kind: BallKind,
    pub policy: TruncationPolicy,
    pub voxel_res: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { kind: BallKind::Pec, policy: TruncationPolicy::default(), voxel_res: DEFAULT_VOXEL_RES }
    }
}

/// Classifies every `(z_j, h_i)` pair, keeps per centre every radius from the
/// first Bounded one upwards, and voxelizes the intersection.
pub fn reconstruct(w_inf: &TangentialField, k: f64, grid: &SamplingGrid, cfg: &ReconConfig) -> Result<ReconResult> {
    let mut policy = cfg.policy;
    let cap = w_inf.rule.max_order(k * grid.r);
    if cap < policy.n_max {
        log::warn!("quadrature rule limits the indicator order from {} to {cap}", policy.n_max);
        policy.n_max = cap;
        policy.window = policy.window.min(cap.saturating_sub(1)).max(2);
    }
    policy.validate()?;
    let spectra: Vec<std::result::Result<BallSpectrum, String>> = grid
        .radii
        .par_iter()
        .map(|&h| ball_spectrum(k, h, policy.n_max, cfg.kind).map_err(|e| e.to_string()))
        .collect();
    for (i, s) in spectra.iter().enumerate() {
        if let Err(e) = s {
            log::warn!("skipping h = {}: {e}", grid.radii[i]);
        }
    }

    type Row = (Vec<Classification>, Vec<f64>, Vec<(usize, String)>);
    let rows: Vec<Result<Row>> = grid
        .centers
        .par_iter()
        .map(|z| {
            let coeffs = analyze(w_inf, z, k, policy.n_max)?;
            let mut cls = Vec::with_capacity(grid.radii.len());
            let mut slopes = Vec::with_capacity(grid.radii.len());
            let mut skipped = Vec::new();
            for (i, (&h, sp)) in grid.radii.iter().zip(&spectra).enumerate() {
                let res = match sp {
                    Ok(sp) => TestBall::new(*z, h).and_then(|b| indicator_from_coeffs(&coeffs, &b, sp, &policy)),
                    Err(e) => Err(Error::Domain(e.clone())),
                };
                match res {
                    Ok(curve) => {
                        cls.push(curve.classification);
                        slopes.push(curve.slope);
                    }
                    Err(e) => {
                        cls.push(Classification::Undetermined);
                        slopes.push(f64::NAN);
                        skipped.push((i, e.to_string()));
                    }
                }
            }
            Ok((cls, slopes, skipped))
        })
        .collect();

    let mut raw = Vec::with_capacity(rows.len());
    let mut accepted = Vec::new();
    let mut critical_radius = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    let mut violations = 0;
    let mut balls = Vec::new();
    let mut all_bounded = true;
    for (j, row) in rows.into_iter().enumerate() {
        let (cls, slopes, skip) = row?;
        skipped.extend(skip.into_iter().map(|(i, e)| (j, i, e)));
        let first = cls.iter().position(|&c| c == Classification::Bounded);
        if let Some(f) = first {
            violations += cls[f..].iter().filter(|&&c| c != Classification::Bounded).count();
            for i in f..cls.len() {
                accepted.push(AcceptedBall {
                    center_index: j,
                    z: grid.centers[j].into(),
                    h: grid.radii[i],
                    slope: slopes[i],
                });
            }
            balls.push(TestBall { z: grid.centers[j], h: grid.radii[f] });
        }
        all_bounded &= cls.iter().all(|&c| c == Classification::Bounded);
        critical_radius.push(first.map(|f| grid.radii[f]));
        raw.push(cls);
    }
    if violations > 0 {
        log::info!("{violations} classifications overridden by the monotone cleanup");
    }
    // larger accepted balls at one centre contain the smallest
    let occupancy = voxelize(grid.r, cfg.voxel_res, &balls);
    let degenerate = all_bounded && !grid.centers.is_empty();
    if degenerate {
        log::warn!("{}", Error::DegenerateData);
    }
    Ok(ReconResult {
        grid: grid.clone(),
        accepted,
        raw,
        critical_radius,
        occupancy,
        skipped,
        monotonicity_violations: violations,
        degenerate,
    })
}

/// Symmetric Hausdorff distance between the occupancy boundary and a sphere,
/// sampling the sphere at `n_samples` Fibonacci points.
pub fn hausdorff_to_sphere(occ: &VoxelGrid, center: &R3, radius: f64, n_samples: usize) -> f64 {
    let bnd = occ.boundary_centers();
    if bnd.is_empty() {
        return f64::INFINITY;
    }
    let forward = bnd.iter().map(|x| ((x - center).norm() - radius).abs()).fold(0.0, f64::max);
    let pts = make_grid(1.0, n_samples.max(1), 2).map(|g| g.centers).unwrap_or_default();
    let backward = pts
        .par_iter()
        .map(|u| {
            let y = center + u * radius;
            bnd.iter().map(|x| (x - y).norm()).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    forward.max(backward)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelSection {
    #[serde(rename = "R")]
    pub r: f64,
    pub res: usize,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub tool_version: String,
}

/// One accepted ball as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallEntry {
    pub z: [f64; 3],
    pub h: f64,
    pub slope: f64,
}

/// On-disk reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconFile {
    pub accepted: Vec<BallEntry>,
    pub voxels: VoxelSection,
    pub provenance: Provenance,
}

impl ReconFile {
    pub fn new(res: &ReconResult, config_description: &str) -> Self {
        let hash = Sha256::digest(config_description.as_bytes());
        Self {
            accepted: res.accepted.iter().map(|b| BallEntry { z: b.z, h: b.h, slope: b.slope }).collect(),
            voxels: VoxelSection {
                r: res.occupancy.r,
                res: res.occupancy.res,
                data: res.occupancy.to_base64(),
            },
            provenance: Provenance {
                config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn validate(&self) -> Result<VoxelGrid> {
        // Sorted by (centre, h): each centre forms one run with increasing h.
        let mut finished: Vec<[f64; 3]> = Vec::new();
        for w in self.accepted.windows(2) {
            if w[0].z == w[1].z {
                if !(w[0].h < w[1].h) {
                    return Err(Error::Schema("radii must increase within a centre".into()));
                }
            } else {
                finished.push(w[0].z);
                if finished.contains(&w[1].z) {
                    return Err(Error::Schema("balls of one centre must be contiguous".into()));
                }
            }
        }
        if self.accepted.iter().any(|b| !(b.h > 0.0)) {
            return Err(Error::Schema("ball radius must be positive".into()));
        }
        VoxelGrid::from_base64(self.voxels.r, self.voxels.res, &self.voxels.data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: Self = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }
}

/// Writes `res` as a [`ReconFile`] atomically.
pub fn export_result(res: &ReconResult, config_description: &str, path: &Path) -> Result<()> {
    let file = ReconFile::new(res, config_description);
    let text = serde_json::to_string_pretty(&file)?;
    crate::io::atomic_write(path, text.as_bytes())
}
