//! Quadrature rules on edges, polygonal faces and polyhedral elements.
//!
//! Faces are split into triangles fanning from the face center, elements
//! into tetrahedra with apex at the element center over the triangulated
//! faces. Simplices use collapsed (Duffy) Gauss-Legendre products, which
//! have positive weights and known exactness.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, OrientationTable, Point};

/// Highest exactness degree the rule tables support.
pub const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::Capability(format!(
            "quadrature exactness {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

pub fn segment_rule(a: &Point, b: &Point, degree: usize) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let (x, w) = gauss_legendre(points_for(degree));
    let len = (b - a).norm();
    Ok(QuadratureRule {
        points: x.iter().map(|&s| a + (b - a) * s).collect(),
        weights: w.iter().map(|&w| w * len).collect(),
        degree,
    })
}

pub fn triangle_rule(a: &Point, b: &Point, c: &Point, degree: usize) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let (xu, wu) = gauss_legendre(points_for(degree + 1));
    let (xv, wv) = gauss_legendre(points_for(degree));
    let mut rule = QuadratureRule {
        points: Vec::with_capacity(xu.len() * xv.len()),
        weights: Vec::with_capacity(xu.len() * xv.len()),
        degree,
    };
    for (&u, &wu) in xu.iter().zip(&wu) {
        for (&v, &wv) in xv.iter().zip(&wv) {
            let (l1, l2) = (u, (1.0 - u) * v);
            let l3 = 1.0 - l1 - l2;
            rule.points.push(a * l1 + b * l2 + c * l3);
            rule.weights.push(2.0 * area * (1.0 - u) * wu * wv);
        }
    }
    Ok(rule)
}

pub fn tetrahedron_rule(
    a: &Point,
    b: &Point,
    c: &Point,
    d: &Point,
    degree: usize,
) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let volume = (b - a).cross(&(c - a)).dot(&(d - a)).abs() / 6.0;
    let (xu, wu) = gauss_legendre(points_for(degree + 2));
    let (xv, wv) = gauss_legendre(points_for(degree + 1));
    let (xw, ww) = gauss_legendre(points_for(degree));
    let n = xu.len() * xv.len() * xw.len();
    let mut rule = QuadratureRule {
        points: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        degree,
    };
    for (&u, &wu) in xu.iter().zip(&wu) {
        for (&v, &wv) in xv.iter().zip(&wv) {
            for (&w, &ww) in xw.iter().zip(&ww) {
                let l1 = u;
                let l2 = (1.0 - u) * v;
                let l3 = (1.0 - u) * (1.0 - v) * w;
                let l4 = 1.0 - l1 - l2 - l3;
                rule.points.push(a * l1 + b * l2 + c * l3 + d * l4);
                let jac = 6.0 * volume * (1.0 - u) * (1.0 - u) * (1.0 - v);
                rule.weights.push(jac * wu * wv * ww);
            }
        }
    }
    Ok(rule)
}

pub fn edge_rule(mesh: &Mesh, edge: usize, degree: usize) -> Result<QuadratureRule> {
    let [a, b] = mesh.edges[edge];
    segment_rule(&mesh.vertices[a], &mesh.vertices[b], degree)
}

pub fn face_rule(
    mesh: &Mesh,
    orientation: &OrientationTable,
    face: usize,
    degree: usize,
) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let center = orientation.faces[face].center;
    let loop_ = &mesh.faces[face].vertices;
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    for i in 0..loop_.len() {
        let a = &mesh.vertices[loop_[i]];
        let b = &mesh.vertices[loop_[(i + 1) % loop_.len()]];
        rule.append(triangle_rule(&center, a, b, degree)?);
    }
    Ok(rule)
}

pub fn element_rule(
    mesh: &Mesh,
    orientation: &OrientationTable,
    element: usize,
    degree: usize,
) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let apex = orientation.elements[element].center;
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    for &f in &mesh.elements[element].faces {
        let center = orientation.faces[f].center;
        let loop_ = &mesh.faces[f].vertices;
        for i in 0..loop_.len() {
            let a = &mesh.vertices[loop_[i]];
            let b = &mesh.vertices[loop_[(i + 1) % loop_.len()]];
            rule.append(tetrahedron_rule(&apex, &center, a, b, degree)?);
        }
    }
    Ok(rule)
}
