//! Far-field data files: modal coefficients plus optional node samples,
//! with the incident field recorded for provenance.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{C3, R3};
use crate::harmonics::{analyze, mode_count, synthesize, ModeIndex, SphereQuadrature, TangentialCoeffs, TangentialField};

pub const FORMAT_VERSION: u32 = 1;
/// Largest tolerated mismatch between stored modes and the analysis of the
/// stored samples, relative to the largest mode.
pub const MODE_SAMPLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidentType {
    Plane,
    Dipole,
    Herglotz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Section1,
    Section5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Incident {
    #[serde(rename = "type")]
    pub kind: IncidentType,
    pub d: [f64; 3],
    pub p: [f64; 3],
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub n: usize,
    pub m: i64,
    #[serde(rename = "cU")]
    pub cu: [f64; 2],
    #[serde(rename = "cV")]
    pub cv: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    pub rule: RuleSpec,
    /// Per node: Re E₁, Im E₁, Re E₂, Im E₂, Re E₃, Im E₃.
    pub values: Vec<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarFieldFile {
    pub version: u32,
    pub k: f64,
    pub incident: Incident,
    pub basis_center: [f64; 3],
    #[serde(rename = "N")]
    pub order: usize,
    pub modes: Vec<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Samples>,
}

fn cx(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl FarFieldFile {
    /// Builds a file from modal coefficients and, optionally, the sampled field.
    pub fn new(k: f64, incident: Incident, coeffs: &TangentialCoeffs, samples: Option<&TangentialField>) -> Self {
        let modes = ModeIndex::all(coeffs.order)
            .map(|idx| {
                let (u, v) = (coeffs.cu[idx.flat()], coeffs.cv[idx.flat()]);
                Mode { n: idx.n, m: idx.m, cu: [u.re, u.im], cv: [v.re, v.im] }
            })
            .collect();
        let samples = samples.map(|f| Samples {
            rule: RuleSpec { n_theta: f.rule.n_theta(), n_phi: f.rule.n_phi() },
            values: f.values.iter().map(|e| [e[0].re, e[0].im, e[1].re, e[1].im, e[2].re, e[2].im]).collect(),
        });
        Self {
            version: FORMAT_VERSION,
            k,
            incident,
            basis_center: coeffs.center.into(),
            order: coeffs.order,
            modes,
            samples,
        }
    }

    pub fn coeffs(&self) -> TangentialCoeffs {
        let mut c = TangentialCoeffs::zeros(R3::from(self.basis_center), self.k, self.order);
        for mode in &self.modes {
            let i = ModeIndex { n: mode.n, m: mode.m }.flat();
            c.cu[i] = cx(mode.cu);
            c.cv[i] = cx(mode.cv);
        }
        c
    }

    pub fn sampled_field(&self) -> Result<Option<TangentialField>> {
        let Some(s) = &self.samples else { return Ok(None) };
        let rule = Arc::new(SphereQuadrature::new(s.rule.n_theta, s.rule.n_phi)?);
        let values = s
            .values
            .iter()
            .map(|v| C3::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]), Complex64::new(v[4], v[5])))
            .collect();
        Ok(Some(TangentialField { values, rule }))
    }

    /// The stored samples, or the modes synthesized on a rule with at least
    /// `min_n_theta` rings.
    pub fn field(&self, min_n_theta: usize) -> Result<TangentialField> {
        if let Some(f) = self.sampled_field()? {
            return Ok(f);
        }
        let centre = R3::from(self.basis_center);
        let n_theta = min_n_theta.max(self.order + (self.k * centre.norm()).ceil() as usize + 10);
        Ok(synthesize(&self.coeffs(), Arc::new(SphereQuadrature::with_n_theta(n_theta)?)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schema(msg));
        if self.version != FORMAT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.order == 0 {
            return bad("N must be at least 1".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.basis_center) || !finite(&self.incident.d) || !finite(&self.incident.p) {
            return bad("non-finite vector".into());
        }
        if (self.incident.kind == IncidentType::Dipole) != self.incident.y.is_some() {
            return bad("\"y\" is required for dipole incidence and only then".into());
        }
        if self.modes.len() != mode_count(self.order) {
            return bad(format!("expected {} modes for N = {}, found {}", mode_count(self.order), self.order, self.modes.len()));
        }
        let mut seen = vec![false; self.modes.len()];
        for mode in &self.modes {
            if mode.n == 0 || mode.n > self.order || mode.m.unsigned_abs() as usize > mode.n {
                return bad(format!("mode (n = {}, m = {}) outside 1 <= n <= N, |m| <= n", mode.n, mode.m));
            }
            if !finite(&mode.cu) || !finite(&mode.cv) {
                return bad(format!("non-finite coefficient at (n = {}, m = {})", mode.n, mode.m));
            }
            let i = ModeIndex { n: mode.n, m: mode.m }.flat();
            if std::mem::replace(&mut seen[i], true) {
                return bad(format!("duplicate mode (n = {}, m = {})", mode.n, mode.m));
            }
        }
        if let Some(s) = &self.samples {
            if s.values.len() != s.rule.n_theta * s.rule.n_phi {
                return bad(format!(
                    "{} samples for a {} x {} rule",
                    s.values.len(),
                    s.rule.n_theta,
                    s.rule.n_phi
                ));
            }
            if !s.values.iter().all(|v| finite(v)) {
                return bad("non-finite sample".into());
            }
            let f = self.sampled_field()?.expect("samples present");
            let stored = self.coeffs();
            let centre = R3::from(self.basis_center);
            let fresh = analyze(&f, &centre, self.k, self.order)
                .map_err(|e| Error::Schema(format!("samples cannot resolve the modes: {e}")))?;
            let scale = stored.cu.iter().chain(&stored.cv).map(|z| z.norm()).fold(0.0, f64::max);
            let diff = stored
                .cu
                .iter()
                .zip(&fresh.cu)
                .chain(stored.cv.iter().zip(&fresh.cv))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if diff > MODE_SAMPLE_TOL * scale.max(f64::MIN_POSITIVE) {
                return bad(format!("modes disagree with samples by {diff:e} (scale {scale:e})"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, self.to_json()?.as_bytes())
    }
}

/// Multiplies every Cartesian component by `1 + level (ξ + iη)/√2` with
/// independent standard normals, reproducibly from `seed`.
pub fn add_multiplicative_noise(f: &TangentialField, level: f64, seed: u64) -> TangentialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = level / std::f64::consts::SQRT_2;
    let values = f
        .values
        .iter()
        .map(|e| {
            e.map(|z| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let eta: f64 = StandardNormal.sample(&mut rng);
                z * Complex64::new(1.0 + s * xi, s * eta)
            })
        })
        .collect();
    TangentialField { values, rule: f.rule.clone() }
}
