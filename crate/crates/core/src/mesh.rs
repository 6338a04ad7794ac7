//! Convex polyhedra: OFF input and output, validation, reference shapes and
//! surface sampling.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::R3;

const CONVEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub vertices: Vec<R3>,
    /// Vertex loops, counter-clockwise seen from outside.
    pub faces: Vec<Vec<usize>>,
    /// Outward unit normals.
    pub normals: Vec<R3>,
}

fn newell(vertices: &[R3], face: &[usize]) -> R3 {
    let mut n = R3::zeros();
    for i in 0..face.len() {
        let a = vertices[face[i]];
        let b = vertices[face[(i + 1) % face.len()]];
        n += R3::new((a[1] - b[1]) * (a[2] + b[2]), (a[2] - b[2]) * (a[0] + b[0]), (a[0] - b[0]) * (a[1] + b[1]));
    }
    n
}

impl Polyhedron {
    /// Validates a closed convex mesh, reorienting faces outward.
    pub fn new(vertices: Vec<R3>, mut faces: Vec<Vec<usize>>) -> Result<Self> {
        if vertices.len() < 4 || faces.len() < 4 {
            return Err(Error::Schema("a polyhedron needs at least 4 vertices and 4 faces".into()));
        }
        for f in &faces {
            if f.len() < 3 || f.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Schema(format!("invalid face {f:?}")));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Schema("non-finite vertex".into()));
        }
        let centroid = vertices.iter().sum::<R3>() / vertices.len() as f64;
        let scale = vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
        let mut normals = Vec::with_capacity(faces.len());
        for f in faces.iter_mut() {
            let mut n = newell(&vertices, f);
            let len = n.norm();
            if len <= 1e-14 * scale * scale {
                return Err(Error::Schema(format!("degenerate face {f:?}")));
            }
            n /= len;
            let fc = f.iter().map(|&i| vertices[i]).sum::<R3>() / f.len() as f64;
            if n.dot(&(fc - centroid)) < 0.0 {
                f.reverse();
                n = -n;
            }
            normals.push(n);
        }
        let p = Self { vertices, faces, normals };
        for (fi, f) in p.faces.iter().enumerate() {
            let n = p.normals[fi];
            let q = p.vertices[f[0]];
            for v in &p.vertices {
                if n.dot(&(v - q)) > CONVEX_TOL * scale.max(1.0) {
                    return Err(Error::NonConvexInput(format!("vertex {v:?} lies outside face {fi}")));
                }
            }
        }
        // every edge used once in each direction
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for f in &p.faces {
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &cnt) in &edges {
            if cnt != 1 || edges.get(&(b, a)) != Some(&1) {
                return Err(Error::Schema(format!("mesh is not closed at edge ({a}, {b})")));
            }
        }
        Ok(p)
    }

    /// Parses `OFF`, counts line `nv nf ne`, vertex lines, then `count i0 i1 ...` face lines.
    /// `#` comments and blank lines are ignored.
    pub fn from_off(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        if lines.next() != Some("OFF") {
            return Err(Error::Schema("missing OFF header".into()));
        }
        let counts: Vec<usize> = parse_fields(lines.next().ok_or_else(|| Error::Schema("missing counts".into()))?)?;
        if counts.len() != 3 {
            return Err(Error::Schema("counts line must hold three integers".into()));
        }
        let (nv, nf) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = parse_fields(lines.next().ok_or_else(|| Error::Schema("missing vertex".into()))?)?;
            if v.len() != 3 {
                return Err(Error::Schema("vertex lines hold three floats".into()));
            }
            vertices.push(R3::new(v[0], v[1], v[2]));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let f: Vec<usize> = parse_fields(lines.next().ok_or_else(|| Error::Schema("missing face".into()))?)?;
            if f.is_empty() || f[0] != f.len() - 1 {
                return Err(Error::Schema(format!("face line {f:?} has the wrong count")));
            }
            faces.push(f[1..].to_vec());
        }
        if lines.next().is_some() {
            return Err(Error::Schema("trailing data after faces".into()));
        }
        Self::new(vertices, faces)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let idx: Vec<String> = f.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{} {}", f.len(), idx.join(" "));
        }
        s
    }

    /// Axis-aligned cube `[−a, a]³ + center`.
    pub fn cube(center: R3, a: f64) -> Self {
        let mut v = Vec::with_capacity(8);
        for i in 0..8 {
            let s = |b: usize| if i >> b & 1 == 1 { a } else { -a };
            v.push(center + R3::new(s(0), s(1), s(2)));
        }
        let faces = vec![
            vec![0, 2, 6, 4],
            vec![1, 5, 7, 3],
            vec![0, 4, 5, 1],
            vec![2, 3, 7, 6],
            vec![0, 1, 3, 2],
            vec![4, 6, 7, 5],
        ];
        Self::new(v, faces).expect("cube is valid")
    }

    /// Icosahedron refined `subdivisions` times, vertices on the sphere.
    pub fn icosphere(center: R3, radius: f64, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<R3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| R3::new(x, y, z).normalize())
        .collect();
        let mut f: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(4 * f.len());
            let mut midpoint = |a: usize, b: usize, v: &mut Vec<R3>| {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    v.push(((v[a] + v[b]) / 2.0).normalize());
                    v.len() - 1
                })
            };
            for [a, b, c] in f {
                let ab = midpoint(a, b, &mut v);
                let bc = midpoint(b, c, &mut v);
                let ca = midpoint(c, a, &mut v);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            f = next;
        }
        let vertices = v.into_iter().map(|p| center + p * radius).collect();
        Self::new(vertices, f.into_iter().map(|t| t.to_vec()).collect()).expect("icosphere is valid")
    }

    pub fn centroid(&self) -> R3 {
        self.vertices.iter().sum::<R3>() / self.vertices.len() as f64
    }

    /// Largest vertex distance from `z`.
    pub fn max_distance(&self, z: &R3) -> f64 {
        self.vertices.iter().map(|v| (v - z).norm()).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &R3) -> bool {
        self.faces
            .iter()
            .zip(&self.normals)
            .all(|(f, n)| n.dot(&(x - self.vertices[f[0]])) <= CONVEX_TOL)
    }

    pub fn area(&self) -> f64 {
        self.triangles().iter().map(|t| t.area()).sum()
    }

    /// Triangles fanned from each face centroid (triangular faces are kept),
    /// so the split respects the symmetries of the mesh.
    fn triangles(&self) -> Vec<Tri> {
        let mut out = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let normal = self.normals[fi];
            if f.len() == 3 {
                let [a, b, c] = [0, 1, 2].map(|i| self.vertices[f[i]]);
                out.push(Tri { a, b, c, normal });
                continue;
            }
            let centre = f.iter().map(|&i| self.vertices[i]).sum::<R3>() / f.len() as f64;
            for i in 0..f.len() {
                out.push(Tri {
                    a: centre,
                    b: self.vertices[f[i]],
                    c: self.vertices[f[(i + 1) % f.len()]],
                    normal,
                });
            }
        }
        out
    }

    /// About `n` points spread over the surface, with their face normals.
    /// Each fan triangle gets an `L × L` lattice of sub-triangle centroids,
    /// `L` proportional to its share of the area.
    pub fn surface_samples(&self, n: usize) -> Vec<(R3, R3)> {
        let tris = self.triangles();
        let total: f64 = tris.iter().map(|t| t.area()).sum();
        let mut out = Vec::with_capacity(n + tris.len());
        for t in &tris {
            let l = ((n as f64 * t.area() / total).sqrt().round() as usize).max(1);
            let lf = l as f64;
            for i in 0..l {
                for j in 0..l - i {
                    // upward sub-triangle
                    let (u, v) = ((i as f64 + 1.0 / 3.0) / lf, (j as f64 + 1.0 / 3.0) / lf);
                    out.push((t.at(u, v), t.normal));
                    if i + j + 1 < l {
                        let (u, v) = ((i as f64 + 2.0 / 3.0) / lf, (j as f64 + 2.0 / 3.0) / lf);
                        out.push((t.at(u, v), t.normal));
                    }
                }
            }
        }
        out
    }

    /// Uniformly random surface point and normal, from two uniforms in [0, 1).
    pub fn random_surface_point(&self, pick: f64, u: f64, v: f64) -> (R3, R3) {
        let tris = self.triangles();
        let total: f64 = tris.iter().map(|t| t.area()).sum();
        let mut acc = 0.0;
        let target = pick * total;
        let t = tris
            .iter()
            .find(|t| {
                acc += t.area();
                acc > target
            })
            .unwrap_or(tris.last().expect("non-empty"));
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        (t.at(u, v), t.normal)
    }
}

fn parse_fields<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| Error::Schema(format!("cannot parse {s:?}"))))
        .collect()
}

struct Tri {
    a: R3,
    b: R3,
    c: R3,
    normal: R3,
}

impl Tri {
    fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(&(self.c - self.a)).norm()
    }

    fn at(&self, u: f64, v: f64) -> R3 {
        self.a + (self.b - self.a) * u + (self.c - self.a) * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cube_properties() {
        let c = Polyhedron::cube(R3::new(0.1, 0.0, -0.2), 0.5);
        assert_relative_eq!(c.area(), 6.0, max_relative = 1e-14);
        for (f, n) in c.faces.iter().zip(&c.normals) {
            let fc = f.iter().map(|&i| c.vertices[i]).sum::<R3>() / 4.0;
            assert!(n.dot(&(fc - c.centroid())) > 0.0);
        }
        assert!(c.contains(&R3::new(0.5, 0.4, 0.2)));
        assert!(!c.contains(&R3::new(0.7, 0.0, 0.0)));
    }

    #[test]
    fn icosphere_approaches_sphere_area() {
        let s = Polyhedron::icosphere(R3::zeros(), 1.0, 4);
        assert_eq!(s.vertices.len(), 2562);
        assert!(s.vertices.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        assert!((s.area() - 4.0 * std::f64::consts::PI).abs() < 0.02);
    }

    #[test]
    fn off_round_trip() {
        let c = Polyhedron::cube(R3::zeros(), 1.0);
        let back = Polyhedron::from_off(&c.to_off()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn off_errors() {
        assert!(matches!(Polyhedron::from_off("PLY\n"), Err(Error::Schema(_))));
        assert!(matches!(Polyhedron::from_off("OFF\n4 4 0\n0 0 0\n"), Err(Error::Schema(_))));
        let open = "OFF\n4 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n";
        assert!(matches!(Polyhedron::from_off(open), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_non_convex() {
        // L-shaped prism
        let base = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
        let mut v: Vec<R3> = base.iter().map(|&(x, y)| R3::new(x, y, 0.0)).collect();
        v.extend(base.iter().map(|&(x, y)| R3::new(x, y, 1.0)));
        let mut f = vec![vec![5, 4, 3, 2, 1, 0], vec![6, 7, 8, 9, 10, 11]];
        for i in 0..6 {
            let j = (i + 1) % 6;
            f.push(vec![i, j, j + 6, i + 6]);
        }
        assert!(matches!(Polyhedron::new(v, f), Err(Error::NonConvexInput(_))));
    }

    #[test]
    fn samples_cover_faces() {
        let c = Polyhedron::cube(R3::zeros(), 0.5);
        let s = c.surface_samples(600);
        assert!(s.len() > 400 && s.len() < 900, "{}", s.len());
        for (p, n) in &s {
            assert_relative_eq!(n.dot(p), 0.5, epsilon = 1e-12);
        }
        let mean = s.iter().map(|(p, _)| p).sum::<R3>() / s.len() as f64;
        assert!(mean.norm() < 1e-12);
    }
}
