//! Command-line front end. Exit codes: 0 success, 2 numerical failure,
//! 3 input error, 4 guarded singular configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::data::{add_multiplicative_noise, FarFieldFile, Incident, IncidentType, Normalization};
use crate::error::{Error, Result};
use crate::fields::{plane_wave, section5_plane_wave, ElectricDipole, FieldFn, PlaneWaveParams, WaveParams};
use crate::forward::{mfs_farfield, mfs_solve, Collocation, MfsConfig};
use crate::geom::{to_c3, R3};
use crate::harmonics::{analyze, SphereQuadrature, TangentialField};
use crate::indicator::{indicator_partials, Classification, TruncationPolicy};
use crate::mesh::Polyhedron;
use crate::mie::{ball_spectrum, ball_spectrum_unguarded, eigenvalue_guard, forward_order, BallKind, MieScatterer, TestBall};
use crate::recon::{export_result, make_grid, reconstruct, ReconConfig, DEFAULT_VOXEL_RES};
use crate::reflect::{verify_reflection, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "polyscat", version, about = "Image convex impedance polyhedra from one electric far-field pattern")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize far-field data for a polyhedron (MFS) or a ball (Mie).
    Forward(ForwardArgs),
    /// Print the test-ball eigenvalues u_n, v_n as CSV.
    Spectra(SpectraArgs),
    /// Scan the indicator over radii for one centre, as CSV.
    Indicate(IndicateArgs),
    /// Run the full sweep and write the accepted balls and occupancy.
    Reconstruct(ReconstructArgs),
    /// Check the reflection operator against its oracles.
    VerifyReflection(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IncidentArg {
    Plane,
    Dipole,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    Section1,
    Section5,
}

#[derive(Debug, Args)]
pub struct BallKindArgs {
    /// Perfectly conducting test balls (the default).
    #[arg(long, conflicts_with = "ball_lambda")]
    pub pec: bool,
    /// Impedance test balls with this λ.
    #[arg(long = "ball-lambda")]
    pub ball_lambda: Option<f64>,
}

impl BallKindArgs {
    fn kind(&self) -> BallKind {
        match self.ball_lambda {
            Some(l) => BallKind::Impedance(l),
            None => BallKind::Pec,
        }
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Relative noise level of the data, used for the truncation floor.
    #[arg(long, default_value_t = 0.0)]
    pub noise_rel: f64,
    /// Multiply the samples by seeded complex Gaussian noise of this relative level.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// OFF mesh of a convex polyhedron.
    #[arg(long, required_unless_present = "ball", conflicts_with = "ball")]
    pub mesh: Option<PathBuf>,
    /// Ball of radius A centred at (CX, CY, CZ), solved by Mie series.
    #[arg(long, num_args = 4, value_names = ["A", "CX", "CY", "CZ"], allow_negative_numbers = true)]
    pub ball: Option<Vec<f64>>,
    #[arg(long)]
    pub k: f64,
    /// Surface impedance; omit with --ball for a perfect conductor.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = IncidentArg::Plane)]
    pub incident: IncidentArg,
    #[arg(long, num_args = 3, default_values_t = [0.0, 0.0, 1.0], allow_negative_numbers = true)]
    pub d: Vec<f64>,
    #[arg(long, num_args = 3, default_values_t = [1.0, 0.0, 0.0], allow_negative_numbers = true)]
    pub p: Vec<f64>,
    /// Dipole position (dipole incidence only).
    #[arg(long, num_args = 3, allow_negative_numbers = true)]
    pub y: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Section1)]
    pub normalization: NormalizationArg,
    /// Rings of the output quadrature rule (raised when the modes need more).
    #[arg(long, default_value_t = 48)]
    pub n_theta: usize,
    /// Highest stored mode order; chosen from the size of the target when omitted.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value_t = 160)]
    pub sources: usize,
    #[arg(long, default_value_t = 0.6)]
    pub shrink: f64,
    #[arg(long, default_value_t = 640)]
    pub collocation: usize,
    #[arg(long)]
    pub tikhonov: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub max_residual: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub k: f64,
    #[arg(long)]
    pub h: f64,
    #[arg(long = "n")]
    pub n: usize,
    #[command(flatten)]
    pub kind: BallKindArgs,
}

#[derive(Debug, Args)]
pub struct IndicateArgs {
    #[arg(long)]
    pub ffp: PathBuf,
    #[arg(long, num_args = 3, allow_negative_numbers = true)]
    pub z: Vec<f64>,
    #[arg(long)]
    pub h_min: f64,
    #[arg(long)]
    pub h_max: f64,
    #[arg(long, default_value_t = 32)]
    pub n_h: usize,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub kind: BallKindArgs,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub ffp: PathBuf,
    #[arg(long = "R", default_value_t = 2.0, allow_negative_numbers = true)]
    pub r: f64,
    #[arg(long, default_value_t = 64)]
    pub n_z: usize,
    #[arg(long, default_value_t = 64)]
    pub n_h: usize,
    #[arg(long, default_value_t = DEFAULT_VOXEL_RES)]
    pub voxel_res: usize,
    /// Worker threads for the sweep; the output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub kind: BallKindArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Use λ = k, which the operator does not admit.
    #[arg(long)]
    pub lambda_equals_k: bool,
    /// Also fit the λ → ∞ slope towards the Dirichlet reflection.
    #[arg(long)]
    pub dirichlet_limit: bool,
    #[arg(long, default_value_t = 5)]
    pub lattice_n: usize,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Forward(a) => cmd_forward(&a).map(|_| 0),
        Command::Spectra(a) => cmd_spectra(&a, out).map(|_| 0),
        Command::Indicate(a) => cmd_indicate(&a, out).map(|_| 0),
        Command::Reconstruct(a) => cmd_reconstruct(&a).map(|_| 0),
        Command::VerifyReflection(a) => cmd_verify_reflection(&a, out),
    }
}

fn vec3(v: &[f64], name: &str) -> Result<R3> {
    match v {
        [x, y, z] if v.iter().all(|t| t.is_finite()) => Ok(R3::new(*x, *y, *z)),
        _ => Err(Error::Domain(format!("--{name} needs three finite numbers"))),
    }
}

fn positive(x: f64, name: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("--{name} must be positive, got {x}")))
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

pub fn cmd_forward(a: &ForwardArgs) -> Result<()> {
    let k = positive(a.k, "k")?;
    let d = vec3(&a.d, "d")?;
    let p = vec3(&a.p, "p")?;
    let normalization = match a.normalization {
        NormalizationArg::Section1 => Normalization::Section1,
        NormalizationArg::Section5 => Normalization::Section5,
    };
    // Section-5 incidence carries the factor ik in front of the section-1 field.
    let gain = match normalization {
        Normalization::Section1 => Complex64::new(1.0, 0.0),
        Normalization::Section5 => Complex64::new(0.0, k),
    };
    let y = a.y.as_deref().map(|v| vec3(v, "y")).transpose()?;
    let kind = match a.incident {
        IncidentArg::Plane => IncidentType::Plane,
        IncidentArg::Dipole => IncidentType::Dipole,
    };
    if (kind == IncidentType::Dipole) != y.is_some() {
        return Err(Error::Domain("--y is required for dipole incidence and only then".into()));
    }
    let incident_meta = Incident { kind, d: d.into(), p: p.into(), normalization, y: y.map(Into::into) };

    let file = if let Some(b) = &a.ball {
        let (radius, centre) = (positive(b[0], "ball radius")?, vec3(&b[1..], "ball centre")?);
        if kind != IncidentType::Plane {
            return Err(Error::Domain("the Mie path supports plane-wave incidence only".into()));
        }
        let pw = PlaneWaveParams::new(d, p)?;
        if normalization == Normalization::Section1 {
            plane_wave(&pw, k)?;
        }
        let ball_kind = match a.lambda {
            Some(l) => BallKind::Impedance(positive(l, "lambda")?),
            None => BallKind::Pec,
        };
        let mie = MieScatterer::new(TestBall::new(centre, radius)?, ball_kind, &pw, k)?;
        let mut coeffs = mie.far_field_coeffs();
        // Mie coefficients are computed for section-5 incidence.
        let rescale = gain / Complex64::new(0.0, k);
        coeffs.cu.iter_mut().chain(coeffs.cv.iter_mut()).for_each(|c| *c *= rescale);
        let n_theta = a.n_theta.max(coeffs.order + (k * centre.norm()).ceil() as usize + 10);
        let rule = Arc::new(SphereQuadrature::with_n_theta(n_theta)?);
        let samples = crate::harmonics::synthesize(&coeffs, rule);
        FarFieldFile::new(k, incident_meta, &coeffs, Some(&samples))
    } else {
        let path = a.mesh.as_ref().expect("clap enforces --mesh or --ball");
        let text = std::fs::read_to_string(path).map_err(io_err)?;
        let poly = Polyhedron::from_off(&text)?;
        let lambda = a.lambda.ok_or_else(|| Error::Domain("--lambda is required with --mesh".into()))?;
        let wp = WaveParams::new(k, lambda)?;
        let incident: Box<dyn FieldFn> = match kind {
            IncidentType::Plane => {
                let pw = PlaneWaveParams::new(d, p)?;
                Box::new(match normalization {
                    Normalization::Section1 => plane_wave(&pw, k)?,
                    Normalization::Section5 => section5_plane_wave(&pw, k),
                })
            }
            IncidentType::Dipole => {
                let y = y.expect("checked above");
                if poly.contains(&y) {
                    return Err(Error::Domain("the dipole must lie outside the scatterer".into()));
                }
                Box::new(ElectricDipole { y, a: to_c3(&p) * gain, k })
            }
            IncidentType::Herglotz => unreachable!("not selectable on the command line"),
        };
        let cfg = MfsConfig {
            n_sources: a.sources,
            source_shrink: a.shrink,
            n_collocation: a.collocation,
            tikhonov: a.tikhonov,
            collocation: Collocation::Surface,
            max_residual: a.max_residual,
        };
        let sol = mfs_solve(&poly, &wp, incident.as_ref(), &cfg)?;
        eprintln!("mfs: {} unknowns, relative residual {:.3e}", sol.coeffs.len(), sol.residual);
        let centre = poly.centroid();
        let rule = Arc::new(SphereQuadrature::with_n_theta(a.n_theta)?);
        let available = rule.max_order(k * centre.norm());
        let order = a.order.unwrap_or_else(|| forward_order(k * poly.max_distance(&centre)).min(available));
        let samples = mfs_farfield(&sol, rule);
        let coeffs = analyze(&samples, &centre, k, order)?;
        FarFieldFile::new(k, incident_meta, &coeffs, Some(&samples))
    };
    file.validate()?;
    file.write(&a.out)
}

pub fn cmd_spectra(a: &SpectraArgs, out: &mut dyn Write) -> Result<()> {
    let k = positive(a.k, "k")?;
    let h = positive(a.h, "h")?;
    writeln!(out, "n,re_u,im_u,re_v,im_v").map_err(io_err)?;
    if a.n == 0 {
        return Ok(());
    }
    let guard = eigenvalue_guard(k, h, a.n)?;
    if !guard.passes() {
        eprintln!("warning: kh = {} is close to an interior eigenvalue at orders {:?}", k * h, guard.flagged);
    }
    let sp = ball_spectrum_unguarded(k, h, a.n, a.kind.kind())?;
    for n in 1..=a.n {
        let (u, v) = (sp.u(n), sp.v(n));
        writeln!(out, "{n},{:e},{:e},{:e},{:e}", u.re, u.im, v.re, v.im).map_err(io_err)?;
    }
    Ok(())
}

fn load_field(path: &std::path::Path, policy: &PolicyArgs, min_n_theta: usize) -> Result<(f64, TangentialField)> {
    let file = FarFieldFile::read(path)?;
    let mut w = file.field(min_n_theta)?;
    // the indicator works with section-5 data
    if file.incident.normalization == Normalization::Section1 {
        w = w.scale(Complex64::new(0.0, file.k));
    }
    if let Some(level) = policy.noise {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::Domain(format!("--noise must be non-negative, got {level}")));
        }
        w = add_multiplicative_noise(&w, level, policy.seed);
    }
    Ok((file.k, w))
}

fn build_policy(a: &PolicyArgs, w: &TangentialField) -> TruncationPolicy {
    let rel = a.noise_rel.max(a.noise.unwrap_or(0.0));
    TruncationPolicy { n_max: a.n_max, tau: a.tau, window: a.window, ..TruncationPolicy::for_data(w, rel) }
}

pub fn cmd_indicate(a: &IndicateArgs, out: &mut dyn Write) -> Result<()> {
    let z = vec3(&a.z, "z")?;
    positive(a.h_min, "h-min")?;
    if !(a.h_max > a.h_min) || a.n_h == 0 {
        return Err(Error::Domain("need h-max > h-min and n-h >= 1".into()));
    }
    let (k, w) = load_field(&a.ffp, &a.policy, 48)?;
    let mut policy = build_policy(&a.policy, &w);
    let cap = w.rule.max_order(k * z.norm());
    if cap < policy.n_max {
        eprintln!("warning: the data resolve orders up to {cap} only");
        policy.n_max = cap;
        policy.window = policy.window.min(cap.saturating_sub(1)).max(2);
    }
    policy.validate()?;
    writeln!(out, "h,order,i_n,i_n_minus_1,i_n_minus_2,slope,classification").map_err(io_err)?;
    for i in 0..a.n_h {
        let h = if a.n_h == 1 { a.h_min } else { a.h_min + (a.h_max - a.h_min) * i as f64 / (a.n_h - 1) as f64 };
        let row = ball_spectrum(k, h, policy.n_max, a.kind.kind())
            .and_then(|sp| indicator_partials(&w, &TestBall::new(z, h)?, &sp, &policy));
        match row {
            Ok(curve) => {
                let n = curve.partials.len();
                let tail = |j: usize| if n > j { format!("{:e}", curve.partials[n - 1 - j]) } else { String::new() };
                let label = match curve.classification {
                    Classification::Bounded => "bounded",
                    Classification::Divergent => "divergent",
                    Classification::Undetermined => "undetermined",
                };
                writeln!(out, "{h},{},{},{},{},{:e},{label}", curve.order(), tail(0), tail(1), tail(2), curve.slope)
                    .map_err(io_err)?;
            }
            Err(e @ (Error::InteriorEigenvalueNear { .. } | Error::SingularParameterCombination { .. })) => {
                eprintln!("warning: skipping h = {h}: {e}");
                writeln!(out, "{h},,,,,,skipped").map_err(io_err)?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let grid = make_grid(a.r, a.n_z, a.n_h)?;
    if a.voxel_res == 0 {
        return Err(Error::Domain("--voxel-res must be positive".into()));
    }
    let (k, w) = load_field(&a.ffp, &a.policy, 48)?;
    let policy = build_policy(&a.policy, &w);
    let cfg = ReconConfig { kind: a.kind.kind(), policy, voxel_res: a.voxel_res };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start workers: {e}")))?;
    eprintln!("sweeping {} centres x {} radii", grid.centers.len(), grid.radii.len());
    let res = pool.install(|| reconstruct(&w, k, &grid, &cfg))?;
    eprintln!(
        "accepted {} balls, {} occupied voxels, {} skipped pairs",
        res.accepted.len(),
        res.occupancy.count(),
        res.skipped.len()
    );
    if res.degenerate {
        eprintln!("warning: every test ball was accepted; the data carry no signal");
    }
    let desc = format!(
        "k={k} R={} n_z={} n_h={} voxel_res={} n_max={} tau={} window={} noise_floor={:e} kind={:?} noise={:?} seed={}",
        a.r,
        a.n_z,
        a.n_h,
        a.voxel_res,
        policy.n_max,
        policy.tau,
        policy.window,
        policy.noise_floor,
        cfg.kind,
        a.policy.noise,
        a.policy.seed
    );
    export_result(&res, &desc, &a.out)
}

pub fn cmd_verify_reflection(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let lambda = if a.lambda_equals_k { a.k } else { a.lambda };
    let opts = VerifyOptions { lattice_n: a.lattice_n, dirichlet_limit: a.dirichlet_limit, ..Default::default() };
    let report = verify_reflection(a.k, lambda, opts)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?).map_err(io_err)?;
    if let Some(slope) = report.dirichlet_slope {
        writeln!(out, "dirichlet slope: {slope:.4}").map_err(io_err)?;
    }
    Ok(if report.passed { 0 } else { 2 })
}
