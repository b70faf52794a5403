//! Dense rational matrices and univariate rational polynomials.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::interval::Interval;
use super::rational::{format_rational, int, parse_rational, Rational};
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl fmt::Debug for RMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = (0..self.cols).map(|j| format_rational(self.get(i, j))).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect())
            .expect("ragged literal matrix")
    }

    pub fn diag(d: &[Rational]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<Rational> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_columns(cols: &[Vec<Rational>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &RMatrix) -> Result<RMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = m.get(i, j) + a * other.get(k, j);
                    m.set(i, j, v);
                }
            }
        }
        Ok(m)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).fold(Rational::zero(), |a, b| a + b))
            .collect())
    }

    pub fn add(&self, other: &RMatrix) -> Result<RMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: &Rational) -> RMatrix {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn sub(&self, other: &RMatrix) -> Result<RMatrix> {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> RMatrix {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (a, i) in rows.clone().enumerate() {
            for (b, j) in cols.clone().enumerate() {
                m.set(a, b, self.get(i, j).clone());
            }
        }
        m
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (RMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).recip();
            for j in 0..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in 0..m.cols {
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the null space; each free variable is set to one in turn.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let (r, pivots) = self.rref();
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|c| !pivots.contains(c)) {
            let mut v = vec![Rational::zero(); self.cols];
            v[free] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -r.get(row, free).clone();
            }
            basis.push(v);
        }
        basis
    }

    pub fn inverse(&self) -> Result<RMatrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: self.cols });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(self.clone());
        }
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, n + i, Rational::one());
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular(format!("{self:?}")));
        }
        Ok(r.submatrix(0..n, n..2 * n))
    }

    /// Solves `self * x = b` exactly for square nonsingular `self`.
    pub fn solve(&self, b: &[Rational]) -> Result<Vec<Rational>> {
        self.inverse()?.mul_vec(b)
    }

    /// Induced norm for the max-norm: largest absolute row sum.
    pub fn inf_norm(&self) -> Rational {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).abs()).fold(Rational::zero(), |a, b| a + b))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn inf_norm_interval(&self) -> Interval {
        Interval::from_rational(&self.inf_norm())
    }

    /// Characteristic polynomial `det(tI - A)` by Faddeev-LeVerrier.
    pub fn charpoly(&self) -> Result<UPoly> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: self.cols });
        }
        let n = self.rows;
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[n] = Rational::one();
        let mut m = RMatrix::zeros(n, n);
        for k in 1..=n {
            let shifted = m.add(&RMatrix::identity(n).scale(&coeffs[n - k + 1]))?;
            m = self.mul(&shifted)?;
            let tr = (0..n).map(|i| m.get(i, i).clone()).fold(Rational::zero(), |a, b| a + b);
            coeffs[n - k] = -tr / int(k as i64);
        }
        Ok(UPoly::new(coeffs))
    }

    /// Evaluates a polynomial at this matrix (Horner).
    pub fn poly_eval(&self, p: &UPoly) -> Result<RMatrix> {
        let n = self.rows;
        let mut acc = RMatrix::zeros(n, n);
        for c in p.coeffs.iter().rev() {
            acc = acc.mul(self)?.add(&RMatrix::identity(n).scale(c))?;
        }
        Ok(acc)
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|i| self.row(i).iter().map(format_rational).collect()).collect()
    }

    pub fn from_strings(rows: &[Vec<String>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl Serialize for RMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Cell {
            S(String),
            F(f64),
        }
        let rows: Vec<Vec<Cell>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| match c {
                        Cell::S(s) => s,
                        Cell::F(f) => format!("{f}"),
                    })
                    .collect()
            })
            .collect();
        RMatrix::from_strings(&rows).map_err(serde::de::Error::custom)
    }
}

/// Dense univariate polynomial, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UPoly {
    pub coeffs: Vec<Rational>,
}

impl UPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::zero());
        }
        Self { coeffs }
    }

    pub fn one() -> Self {
        Self::new(vec![Rational::one()])
    }

    /// `t - r`
    pub fn linear_root(r: &Rational) -> Self {
        Self::new(vec![-r.clone(), Rational::one()])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn lead(&self) -> &Rational {
        self.coeffs.last().unwrap()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn mul(&self, other: &UPoly) -> UPoly {
        let mut c = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        UPoly::new(c)
    }

    pub fn pow(&self, n: usize) -> UPoly {
        (0..n).fold(UPoly::one(), |acc, _| acc.mul(self))
    }

    pub fn monic(&self) -> UPoly {
        let l = self.lead().clone();
        UPoly::new(self.coeffs.iter().map(|c| c / &l).collect())
    }

    /// Quotient and remainder.
    pub fn divrem(&self, d: &UPoly) -> (UPoly, UPoly) {
        let mut r = self.coeffs.clone();
        let dd = d.degree();
        if self.degree() < dd {
            return (UPoly::new(vec![Rational::zero()]), self.clone());
        }
        let mut q = vec![Rational::zero(); self.degree() - dd + 1];
        for k in (0..q.len()).rev() {
            let c = &r[k + dd] / d.lead();
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[k + j] -= &c * dc;
            }
            q[k] = c;
        }
        r.truncate(dd.max(1));
        (UPoly::new(q), UPoly::new(r))
    }

    pub fn derivative(&self) -> UPoly {
        if self.degree() == 0 {
            return UPoly::new(vec![Rational::zero()]);
        }
        UPoly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * int(i as i64)).collect())
    }

    pub fn gcd(&self, other: &UPoly) -> UPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.divrem(&b).1;
            a = b;
            b = r;
        }
        if a.is_zero() { a } else { a.monic() }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        use num_traits::ToPrimitive;
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::rational::rat;

    #[test]
    fn inverse_and_nullspace() {
        let a = RMatrix::from_i64(&[&[0, 1], &[-2, -3]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), RMatrix::identity(2));
        let k = a.add(&RMatrix::identity(2)).unwrap().nullspace();
        assert_eq!(k, vec![vec![int(-1), int(1)]]);
        assert!(RMatrix::from_i64(&[&[1, 2], &[2, 4]]).inverse().is_err());
    }

    #[test]
    fn charpoly_matches_trace_det() {
        let a = RMatrix::from_i64(&[&[0, 1], &[-2, -3]]);
        // t^2 + 3t + 2
        assert_eq!(a.charpoly().unwrap().coeffs, vec![int(2), int(3), int(1)]);
        let p = a.charpoly().unwrap();
        assert!(a.poly_eval(&p).unwrap().is_zero());
    }

    #[test]
    fn poly_division_and_gcd() {
        let p = UPoly::linear_root(&int(1)).mul(&UPoly::linear_root(&rat(1, 2)));
        let (q, r) = p.divrem(&UPoly::linear_root(&int(1)));
        assert!(r.is_zero());
        assert_eq!(q, UPoly::linear_root(&rat(1, 2)));
        let g = p.gcd(&UPoly::linear_root(&rat(1, 2)).mul(&UPoly::linear_root(&int(3))));
        assert_eq!(g, UPoly::linear_root(&rat(1, 2)));
    }

    #[test]
    fn norms_and_json() {
        let a = RMatrix::from_i64(&[&[0, 1], &[-2, -3]]);
        assert_eq!(a.inf_norm(), int(5));
        let s = serde_json::to_string(&a).unwrap();
        let b: RMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        let c: RMatrix = serde_json::from_str(r#"[["0.5", "-1/3"], ["2", "1e-2"]]"#).unwrap();
        assert_eq!(*c.get(1, 1), rat(1, 100));
    }
}
