//! Scaled monomial bases and exact differential operators on them.
//!
//! On an entity `P` of intrinsic dimension `d` with center `x_P` and
//! diameter `h_P`, the basis functions are `xi^alpha` with
//! `xi = (x - x_P) / h_P` expressed in the entity's intrinsic coordinates.
//! All operators in this module act on coefficient vectors in the
//! reference variable `xi`: a physical derivative is `1 / h_P` times the
//! matrix returned here.
//!
//! Vector-valued polynomials are stored component-major: coefficient
//! `c * n + m` multiplies monomial `m` in component `c`, with `n` the number
//! of scalar monomials.

use std::collections::HashMap;

use super::rational::{q, QMatrix};
use crate::error::{Error, Result};

/// Graded set of monomials of total degree `<= degree` in `dim` variables.
///
/// Monomials of degree `<= l - 1` form a prefix of the monomials of degree
/// `<= l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialSet {
    pub dim: usize,
    pub degree: i32,
    pub exponents: Vec<[u8; 3]>,
    index: HashMap<[u8; 3], usize>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `dim P^l` in `d` variables, `0` for `l < 0`.
pub fn poly_dim(degree: i32, dim: usize) -> usize {
    if degree < 0 {
        0
    } else {
        binomial(degree as usize + dim, dim)
    }
}

impl MonomialSet {
    pub fn new(dim: usize, degree: i32) -> Self {
        assert!((1..=3).contains(&dim), "intrinsic dimension must be 1, 2 or 3");
        let mut exponents = Vec::with_capacity(poly_dim(degree, dim));
        for total in 0..=degree.max(-1) {
            let total = total as u8;
            match dim {
                1 => exponents.push([total, 0, 0]),
                2 => {
                    for a in (0..=total).rev() {
                        exponents.push([a, total - a, 0]);
                    }
                }
                _ => {
                    for a in (0..=total).rev() {
                        for b in (0..=total - a).rev() {
                            exponents.push([a, b, total - a - b]);
                        }
                    }
                }
            }
        }
        let index = exponents.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        MonomialSet {
            dim,
            degree,
            exponents,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn position(&self, exponent: [u8; 3]) -> Option<usize> {
        self.index.get(&exponent).copied()
    }

    /// Values of every monomial at reference coordinates `xi`.
    pub fn evaluate(&self, xi: &[f64]) -> Vec<f64> {
        let max = self.degree.max(0) as usize;
        let powers: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| {
                let mut p = Vec::with_capacity(max + 1);
                let mut acc = 1.0;
                for _ in 0..=max {
                    p.push(acc);
                    acc *= xi[i];
                }
                p
            })
            .collect();
        self.exponents
            .iter()
            .map(|e| (0..self.dim).map(|i| powers[i][e[i] as usize]).product())
            .collect()
    }
}

/// `d/dxi_i : P^l -> P^{l-1}`.
pub fn partial(dim: usize, degree: i32, i: usize) -> QMatrix {
    let src = MonomialSet::new(dim, degree);
    let dst = MonomialSet::new(dim, degree - 1);
    let mut m = QMatrix::zeros(dst.len(), src.len());
    for (c, e) in src.exponents.iter().enumerate() {
        if e[i] > 0 {
            let mut t = *e;
            t[i] -= 1;
            m[(dst.position(t).unwrap(), c)] = q(e[i] as i64);
        }
    }
    m
}

/// Multiplication by `xi_i : P^l -> P^{l+1}`.
pub fn multiply(dim: usize, degree: i32, i: usize) -> QMatrix {
    let src = MonomialSet::new(dim, degree);
    let dst = MonomialSet::new(dim, degree + 1);
    let mut m = QMatrix::zeros(dst.len(), src.len());
    for (c, e) in src.exponents.iter().enumerate() {
        let mut t = *e;
        t[i] += 1;
        m[(dst.position(t).unwrap(), c)] = q(1);
    }
    m
}

/// Places `block` at block position `(br, bc)` of a block matrix with
/// blocks of the given sizes.
fn put(m: &mut QMatrix, row0: usize, col0: usize, block: &QMatrix, sign: i64) {
    for r in 0..block.nrows() {
        for c in 0..block.ncols() {
            let v = &block[(r, c)];
            if sign > 0 {
                m[(row0 + r, col0 + c)] += v;
            } else {
                m[(row0 + r, col0 + c)] -= v;
            }
        }
    }
}

/// Differential and Koszul-type operators, acting in reference coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Differential {
    /// Gradient in 3 variables, scalar to vector.
    Grad,
    /// Divergence in 3 variables.
    Div,
    Curl,
    /// Tangential gradient on a face (2 variables).
    GradF,
    DivF,
    /// `VROT_F r = (GRAD_F r)^perp`.
    VrotF,
    /// `ROT_F z = DIV_F (z^perp)`.
    RotF,
    /// Rotation by `-pi/2` in the oriented face plane: `(z1, z2) -> (z2, -z1)`.
    Perp,
    /// Derivative along an edge (1 variable).
    EdgeDerivative,
    /// `r -> xi r`, scalar to vector (any dimension).
    KoszulScalar,
    /// `v -> xi x v` in 3 variables.
    KoszulCross,
    /// `r -> xi^perp r` in 2 variables.
    KoszulPerp,
}

/// Shape of the ambient space an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub components: usize,
    pub degree: i32,
}

impl Differential {
    /// Required intrinsic dimension (`None`: any).
    fn dimension(self) -> Option<usize> {
        use Differential::*;
        match self {
            Grad | Div | Curl | KoszulCross => Some(3),
            GradF | DivF | VrotF | RotF | Perp | KoszulPerp => Some(2),
            EdgeDerivative => Some(1),
            KoszulScalar => None,
        }
    }

    /// Input and output shapes for input polynomials of degree `degree`.
    pub fn shapes(self, dim: usize, degree: i32) -> (Shape, Shape) {
        use Differential::*;
        let s = |components, degree| Shape { components, degree };
        match self {
            Grad | GradF | VrotF => (s(1, degree), s(dim, degree - 1)),
            Div | DivF | RotF => (s(dim, degree), s(1, degree - 1)),
            Curl => (s(3, degree), s(3, degree - 1)),
            Perp => (s(2, degree), s(2, degree)),
            EdgeDerivative => (s(1, degree), s(1, degree - 1)),
            KoszulScalar | KoszulPerp => (s(1, degree), s(dim, degree + 1)),
            KoszulCross => (s(3, degree), s(3, degree + 1)),
        }
    }
}

/// Exact matrix of a differential operator on polynomials of degree
/// `degree` in `dim` reference variables.
pub fn differential_matrix(op: Differential, dim: usize, degree: i32) -> Result<QMatrix> {
    use Differential::*;
    if let Some(required) = op.dimension() {
        if required != dim {
            return Err(Error::Domain(format!(
                "{op:?} needs intrinsic dimension {required}, got {dim}"
            )));
        }
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("invalid intrinsic dimension {dim}")));
    }
    let (input, output) = op.shapes(dim, degree);
    let n_in = poly_dim(input.degree, dim);
    let n_out = poly_dim(output.degree, dim);
    let mut m = QMatrix::zeros(output.components * n_out, input.components * n_in);
    let d = |i| partial(dim, degree, i);
    let x = |i| multiply(dim, degree, i);
    match op {
        Grad | GradF => {
            for c in 0..dim {
                put(&mut m, c * n_out, 0, &d(c), 1);
            }
        }
        EdgeDerivative => put(&mut m, 0, 0, &d(0), 1),
        Div | DivF => {
            for c in 0..dim {
                put(&mut m, 0, c * n_in, &d(c), 1);
            }
        }
        Curl => {
            // (d1 v2 - d2 v1, d2 v0 - d0 v2, d0 v1 - d1 v0)
            for c in 0..3 {
                let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                put(&mut m, c * n_out, b * n_in, &d(a), 1);
                put(&mut m, c * n_out, a * n_in, &d(b), -1);
            }
        }
        VrotF => {
            put(&mut m, 0, 0, &d(1), 1);
            put(&mut m, n_out, 0, &d(0), -1);
        }
        RotF => {
            put(&mut m, 0, n_in, &d(0), 1);
            put(&mut m, 0, 0, &d(1), -1);
        }
        Perp => {
            let id = QMatrix::identity(n_in);
            put(&mut m, 0, n_in, &id, 1);
            put(&mut m, n_out, 0, &id, -1);
        }
        KoszulScalar => {
            for c in 0..dim {
                put(&mut m, c * n_out, 0, &x(c), 1);
            }
        }
        KoszulPerp => {
            put(&mut m, 0, 0, &x(1), 1);
            put(&mut m, n_out, 0, &x(0), -1);
        }
        KoszulCross => {
            for c in 0..3 {
                let (a, b) = ((c + 1) % 3, (c + 2) % 3);
                put(&mut m, c * n_out, b * n_in, &x(a), 1);
                put(&mut m, c * n_out, a * n_in, &x(b), -1);
            }
        }
    }
    Ok(m)
}

/// Applies a differential operator to a coefficient vector.
pub fn apply_differential(
    op: Differential,
    dim: usize,
    degree: i32,
    coefficients: &[super::rational::Rational],
) -> Result<Vec<super::rational::Rational>> {
    let m = differential_matrix(op, dim, degree)?;
    if coefficients.len() != m.ncols() {
        return Err(Error::Domain(format!(
            "{op:?} on degree {degree} expects {} coefficients, got {}",
            m.ncols(),
            coefficients.len()
        )));
    }
    let v = QMatrix::from_columns(m.ncols(), &[coefficients.to_vec()]);
    Ok(m.mul(&v).column(0))
}
