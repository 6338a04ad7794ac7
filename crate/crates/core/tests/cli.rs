use std::path::Path;
use std::process::{Command, Output};

use approx::assert_relative_eq;
use num_complex::Complex64;
use polyscat::data::FarFieldFile;
use polyscat::fields::PlaneWaveParams;
use polyscat::geom::R3;
use polyscat::mie::{BallKind, MieScatterer, TestBall};
use polyscat::recon::ReconFile;

fn polyscat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyscat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CUBE_OFF: &str = "OFF
# unit-ish cube
8 6 0
-0.4 -0.4 -0.4
0.4 -0.4 -0.4
0.4 0.4 -0.4
-0.4 0.4 -0.4
-0.4 -0.4 0.4
0.4 -0.4 0.4
0.4 0.4 0.4
-0.4 0.4 0.4
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 2 3 7 6
4 1 2 6 5
4 0 4 7 3
";

#[test]
fn spectra_first_row_matches_closed_form() {
    let o = polyscat(&["spectra", "--k", "1", "--h", "1", "--n", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,re_u,im_u,re_v,im_v"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    // ψ₁(1) = sin 1 − cos 1, ζ₁(1) = −e^{i}(1 + i)
    let psi = 1f64.sin() - 1f64.cos();
    let zeta = -Complex64::from_polar(1.0, 1.0) * Complex64::new(1.0, 1.0);
    let v1 = -psi / zeta;
    assert_relative_eq!(row[3], v1.re, max_relative = 1e-12);
    assert_relative_eq!(row[4], v1.im, max_relative = 1e-12);
    assert_relative_eq!(v1.re, -0.0453514, epsilon = 2e-7);
    assert_relative_eq!(v1.im, -0.2080734, epsilon = 1e-7);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn spectra_edge_cases() {
    let o = polyscat(&["spectra", "--k", "1", "--h", "1", "--n", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "n,re_u,im_u,re_v,im_v");

    // first zero of j_1
    let o = polyscat(&["spectra", "--k", "1", "--h", "4.493409457909064", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = polyscat(&["spectra", "--k", "-1", "--h", "1", "--n", "3"]);
    assert_eq!(o.status.code(), Some(3));
    let o = polyscat(&["spectra", "--k", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn forward_ball_matches_mie() {
    let dir = tempfile::tempdir().unwrap();
    let out5 = dir.path().join("ball5.json");
    let out1 = dir.path().join("ball1.json");
    let base = ["forward", "--ball", "0.5", "0.3", "0", "0", "--k", "2", "--lambda", "1.5"];
    let mut a5 = base.to_vec();
    a5.extend(["--normalization", "section5", "-o", p(&out5)]);
    assert_eq!(polyscat(&a5).status.code(), Some(0));
    let mut a1 = base.to_vec();
    a1.extend(["-o", p(&out1)]);
    assert_eq!(polyscat(&a1).status.code(), Some(0));

    let pw = PlaneWaveParams::new(R3::z(), R3::x()).unwrap();
    let mie = MieScatterer::new(TestBall::new(R3::new(0.3, 0.0, 0.0), 0.5).unwrap(), BallKind::Impedance(1.5), &pw, 2.0).unwrap();
    let f5 = FarFieldFile::read(&out5).unwrap().sampled_field().unwrap().unwrap();
    let f1 = FarFieldFile::read(&out1).unwrap().sampled_field().unwrap().unwrap();
    let scale = f5.values.iter().map(polyscat::geom::cnorm).fold(0.0, f64::max);
    for (i, d) in f5.rule.directions().iter().enumerate() {
        let exact = mie.far_field(d).unwrap();
        assert!(polyscat::geom::cnorm(&(f5.values[i] - exact)) < 1e-8 * scale);
        let ik = Complex64::new(0.0, 2.0);
        assert!(polyscat::geom::cnorm(&(f1.values[i] * ik - exact)) < 1e-8 * scale);
    }
}

#[test]
fn forward_mesh_is_deterministic_and_atomic() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("cube.off");
    std::fs::write(&mesh, CUBE_OFF).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let o = polyscat(&["forward", "--mesh", p(&mesh), "--k", "2", "--lambda", "1", "--sources", "60", "--collocation", "200", "-o", p(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    FarFieldFile::read(&a).unwrap();

    let bad = dir.path().join("bad.off");
    std::fs::write(&bad, "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n").unwrap();
    let out = dir.path().join("never.json");
    let o = polyscat(&["forward", "--mesh", p(&bad), "--k", "2", "--lambda", "1", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!stderr(&o).is_empty());
    assert!(!out.exists());

    // a residual threshold no cube fit can meet
    let o = polyscat(&["forward", "--mesh", p(&mesh), "--k", "2", "--lambda", "1", "--sources", "60", "--collocation", "200", "--max-residual", "1e-6", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let only_tmp_free = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(only_tmp_free, 4);
}

#[test]
fn indicate_transition_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let ffp = dir.path().join("ball.json");
    let o = polyscat(&["forward", "--ball", "0.5", "0.3", "0", "0", "--k", "2", "-o", p(&ffp)]);
    assert_eq!(o.status.code(), Some(0));
    let scan = |extra: &[&str]| {
        let mut args = vec!["indicate", "--ffp", p(&ffp), "--z", "2", "0", "0", "--h-min", "0.6", "--h-max", "3.4", "--n-h", "15"];
        args.extend_from_slice(extra);
        let o = polyscat(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let text = scan(&[]);
    let rows: Vec<(f64, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].parse().unwrap(), cols[6].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 15);
    // The ball's field continues to its centre, 1.7 from z; the boundary is 2.2 away.
    for (h, c) in &rows {
        if *h < 1.5 {
            assert_eq!(c, "divergent", "h = {h}");
        }
        if *h > 2.4 {
            assert_eq!(c, "bounded", "h = {h}");
        }
    }

    let n1 = scan(&["--noise", "1e-3", "--seed", "4"]);
    let n2 = scan(&["--noise", "1e-3", "--seed", "4"]);
    let n3 = scan(&["--noise", "1e-3", "--seed", "5"]);
    assert_eq!(n1, n2);
    assert_ne!(n1, n3);

    let ffp5 = dir.path().join("ball5.json");
    let o = polyscat(&["forward", "--ball", "0.5", "0.3", "0", "0", "--k", "2", "--normalization", "section5", "-o", p(&ffp5)]);
    assert_eq!(o.status.code(), Some(0));
    let labels = |path: &Path| {
        let o = polyscat(&["indicate", "--ffp", p(path), "--z", "2", "0", "0", "--h-min", "0.6", "--h-max", "3.4", "--n-h", "15"]);
        stdout(&o).lines().map(|l| l.rsplit(',').next().unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(labels(&ffp), labels(&ffp5));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = polyscat(&["indicate", "--ffp", p(&empty), "--z", "2", "0", "0", "--h-min", "1", "--h-max", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn reconstruct_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let ffp = dir.path().join("ball.json");
    assert_eq!(polyscat(&["forward", "--ball", "0.5", "0.3", "0", "0", "--k", "2", "-o", p(&ffp)]).status.code(), Some(0));
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let o = polyscat(&[
            "reconstruct", "--ffp", p(&ffp), "--n-z", "12", "--n-h", "16", "--voxel-res", "24", "--workers", workers, "-o", p(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("sweeping"));
        out
    };
    let a = run("1", "r1.json");
    let b = run("4", "r4.json");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let f = ReconFile::read(&a).unwrap();
    let grid = f.validate().unwrap();
    assert_eq!(grid.res, 24);
    assert!(grid.count() > 0);
    assert!(grid.contains(&R3::new(0.3, 0.0, 0.0)));

    let o = polyscat(&["reconstruct", "--ffp", p(&ffp), "--R", "0", "-o", p(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_reflection_exit_codes() {
    let o = polyscat(&["verify-reflection", "--lattice-n", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("\"passed\": true"));

    let o = polyscat(&["verify-reflection", "--lambda-equals-k"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("singular"));

    let o = polyscat(&["verify-reflection", "--lattice-n", "2", "--dirichlet-limit"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().find(|l| l.starts_with("dirichlet slope:")).unwrap().to_string();
    let slope: f64 = line.trim_start_matches("dirichlet slope:").trim().parse().unwrap();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}
