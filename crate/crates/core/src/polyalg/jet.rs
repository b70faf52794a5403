//! Truncated multivariate polynomials ("jets") with exact rational coefficients.
//!
//! Variables are laid out as a parameter block followed by a phase block.
//! Truncation is by (optionally weighted) total degree: with weights `w`, the
//! degree of `z^e` is `sum w_i e_i`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::interval::{IBox, Interval};
use super::rational::{format_rational, Rational};
use crate::error::{Error, Result};

pub type Exponents = Vec<u32>;

/// Variable layout shared by all jets that take part in one computation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub num_params: usize,
    pub num_phase: usize,
    pub weights: Vec<u32>,
}

impl Layout {
    pub fn new(num_params: usize, num_phase: usize) -> Self {
        Self { num_params, num_phase, weights: vec![1; num_params + num_phase] }
    }

    /// Parameters count `param_weight`, phase variables count one.
    pub fn weighted(num_params: usize, num_phase: usize, param_weight: u32) -> Self {
        let mut weights = vec![param_weight; num_params];
        weights.extend(std::iter::repeat(1).take(num_phase));
        Self { num_params, num_phase, weights }
    }

    pub fn nvars(&self) -> usize {
        self.num_params + self.num_phase
    }

    pub fn degree(&self, e: &[u32]) -> u32 {
        e.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.iter().any(|&w| w != 1)
    }

    /// Same variables, unit weights.
    pub fn unweighted(&self) -> Layout {
        Layout::new(self.num_params, self.num_phase)
    }

    pub fn var_name(&self, i: usize) -> String {
        if i < self.num_params {
            if self.num_params == 1 { "l".to_string() } else { format!("l{i}") }
        } else {
            let j = i - self.num_params;
            match (self.num_phase, j) {
                (1, _) => "x".to_string(),
                (2, 0) => "x".to_string(),
                (2, 1) => "y".to_string(),
                (3, 0) => "x".to_string(),
                (3, 1) => "y".to_string(),
                (3, 2) => "z".to_string(),
                _ => format!("x{j}"),
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Jet {
    layout: Layout,
    max_order: u32,
    terms: BTreeMap<Exponents, Rational>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[order {}]({})", self.max_order, self)
    }
}

impl Jet {
    pub fn zero(layout: &Layout, max_order: u32) -> Self {
        Self { layout: layout.clone(), max_order, terms: BTreeMap::new() }
    }

    pub fn constant(layout: &Layout, max_order: u32, c: Rational) -> Self {
        let mut j = Self::zero(layout, max_order);
        j.add_term(vec![0; layout.nvars()], c);
        j
    }

    pub fn var(layout: &Layout, max_order: u32, index: usize) -> Result<Self> {
        if index >= layout.nvars() {
            return Err(Error::VariableIndex { index, nvars: layout.nvars() });
        }
        let mut e = vec![0; layout.nvars()];
        e[index] = 1;
        let mut j = Self::zero(layout, max_order);
        j.add_term(e, Rational::one());
        Ok(j)
    }

    pub fn monomial(layout: &Layout, max_order: u32, exps: Exponents, c: Rational) -> Result<Self> {
        if exps.len() != layout.nvars() {
            return Err(Error::DimensionMismatch { expected: layout.nvars(), got: exps.len() });
        }
        let mut j = Self::zero(layout, max_order);
        j.add_term(exps, c);
        Ok(j)
    }

    pub fn from_terms(
        layout: &Layout,
        max_order: u32,
        terms: impl IntoIterator<Item = (Exponents, Rational)>,
    ) -> Result<Self> {
        let mut j = Self::zero(layout, max_order);
        for (e, c) in terms {
            if e.len() != layout.nvars() {
                return Err(Error::DimensionMismatch { expected: layout.nvars(), got: e.len() });
            }
            j.add_term(e, c);
        }
        Ok(j)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars()
    }

    pub fn num_params(&self) -> usize {
        self.layout.num_params
    }

    pub fn num_phase(&self) -> usize {
        self.layout.num_phase
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.nvars()])
    }

    pub fn degree_of(&self, e: &[u32]) -> u32 {
        self.layout.degree(e)
    }

    /// Highest degree carrying a nonzero coefficient.
    pub fn actual_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| self.layout.degree(e)).max()
    }

    /// Lowest degree carrying a nonzero coefficient.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().map(|e| self.layout.degree(e)).min()
    }

    /// Adds `c z^e`, silently dropping terms above the truncation order.
    pub fn add_term(&mut self, e: Exponents, c: Rational) {
        if c.is_zero() || self.layout.degree(&e) > self.max_order {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn set_coeff(&mut self, e: Exponents, c: Rational) {
        self.terms.remove(&e);
        self.add_term(e, c);
    }

    fn check_layout(&self, other: &Jet) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    pub fn truncate(&self, order: u32) -> Jet {
        let mut out = Jet::zero(&self.layout, order);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    /// Part of exact degree `d`.
    pub fn homogeneous(&self, d: u32) -> Jet {
        let mut out = Jet::zero(&self.layout, self.max_order);
        for (e, c) in &self.terms {
            if self.layout.degree(e) == d {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    /// Terms of degree `>= d`.
    pub fn tail(&self, d: u32) -> Jet {
        let mut out = Jet::zero(&self.layout, self.max_order);
        for (e, c) in &self.terms {
            if self.layout.degree(e) >= d {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    /// Reinterprets the same coefficients under another layout with the same
    /// number of variables, retruncating at `order`.
    pub fn relayout(&self, layout: &Layout, order: u32) -> Result<Jet> {
        if layout.nvars() != self.nvars() || layout.num_params != self.num_params() {
            return Err(Error::LayoutMismatch);
        }
        let mut out = Jet::zero(layout, order);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_layout(other)?;
        let mut out = self.truncate(self.max_order.min(other.max_order));
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, s: &Rational) -> Jet {
        let mut out = Jet::zero(&self.layout, self.max_order);
        if s.is_zero() {
            return out;
        }
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_layout(other)?;
        Ok(self.mul_trunc(other, self.max_order.min(other.max_order)))
    }

    fn mul_trunc(&self, other: &Jet, order: u32) -> Jet {
        let mut out = Jet::zero(&self.layout, order);
        for (e1, c1) in &self.terms {
            let d1 = self.layout.degree(e1);
            if d1 > order {
                continue;
            }
            for (e2, c2) in &other.terms {
                if d1 + self.layout.degree(e2) > order {
                    continue;
                }
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(&self.layout, self.max_order, Rational::one());
        for _ in 0..n {
            acc = acc.mul_trunc(self, self.max_order);
        }
        acc
    }

    /// Substitutes `inners[i]` for variable `i` and truncates at `order`.
    ///
    /// The result lives in the inners' layout. Inner jets must have zero
    /// constant term unless `allow_constant` is set.
    pub fn compose(&self, inners: &[Jet], order: u32, allow_constant: bool) -> Result<Jet> {
        if inners.len() != self.nvars() {
            return Err(Error::DimensionMismatch { expected: self.nvars(), got: inners.len() });
        }
        let target = match inners.first() {
            Some(j) => j.layout.clone(),
            None => {
                return Ok(Jet::constant(&self.layout, order, self.constant_term()));
            }
        };
        for (i, inner) in inners.iter().enumerate() {
            if inner.layout != target {
                return Err(Error::LayoutMismatch);
            }
            let c = inner.constant_term();
            if !allow_constant && !c.is_zero() {
                return Err(Error::ConstantTerm { index: i, constant: format_rational(&c) });
            }
        }
        let inners: Vec<Jet> = inners.iter().map(|j| j.truncate(order)).collect();
        let mut powers: Vec<Vec<Jet>> = inners
            .iter()
            .map(|j| vec![Jet::constant(&target, order, Rational::one()), j.clone()])
            .collect();
        let mut out = Jet::zero(&target, order);
        for (e, c) in &self.terms {
            let mut term = Jet::constant(&target, order, c.clone());
            for (v, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                while powers[v].len() <= k as usize {
                    let next = powers[v].last().unwrap().mul_trunc(&inners[v], order);
                    powers[v].push(next);
                }
                term = term.mul_trunc(&powers[v][k as usize], order);
                if term.is_zero() {
                    break;
                }
            }
            for (te, tc) in term.terms {
                out.add_term(te, tc);
            }
        }
        Ok(out)
    }

    /// Substitutes jets for the phase variables only; parameters map to the
    /// parameters of the inners' layout.
    pub fn compose_phase(&self, phase_inners: &[Jet], order: u32) -> Result<Jet> {
        if phase_inners.len() != self.num_phase() {
            return Err(Error::DimensionMismatch { expected: self.num_phase(), got: phase_inners.len() });
        }
        let target = match phase_inners.first() {
            Some(j) => j.layout.clone(),
            None => return Ok(self.truncate(order)),
        };
        if target.num_params != self.num_params() {
            return Err(Error::LayoutMismatch);
        }
        let mut inners = Vec::with_capacity(self.nvars());
        for p in 0..self.num_params() {
            inners.push(Jet::var(&target, order, p)?);
        }
        inners.extend(phase_inners.iter().cloned());
        self.compose(&inners, order, false)
    }

    /// Formal partial derivative; the truncation order drops by the variable's weight.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if var >= self.nvars() {
            return Err(Error::VariableIndex { index: var, nvars: self.nvars() });
        }
        let order = self.max_order.saturating_sub(self.layout.weights[var]);
        let mut out = Jet::zero(&self.layout, order);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c * Rational::from_integer(BigInt::from(e[var])));
        }
        Ok(out)
    }

    /// Exact quotient by variable `var`, if every term contains it.
    pub fn divide_by_var(&self, var: usize) -> Option<Jet> {
        let mut out = Jet::zero(&self.layout, self.max_order.saturating_sub(self.layout.weights[var]));
        for (e, c) in &self.terms {
            if e[var] == 0 {
                return None;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, c.clone());
        }
        Some(out)
    }

    /// Sets parameter values, returning a jet in the phase variables only.
    pub fn substitute_params(&self, values: &[Rational]) -> Result<Jet> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: values.len() });
        }
        let layout = Layout::new(0, self.num_phase());
        let mut out = Jet::zero(&layout, u32::MAX);
        for (e, c) in &self.terms {
            let mut coef = c.clone();
            for (p, v) in values.iter().enumerate() {
                for _ in 0..e[p] {
                    coef *= v;
                }
            }
            out.add_term(e[self.num_params()..].to_vec(), coef);
        }
        Ok(out)
    }

    pub fn eval_rational(&self, point: &[Rational]) -> Result<Rational> {
        self.check_point(point.len())?;
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &k) in point.iter().zip(e) {
                for _ in 0..k {
                    t *= x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point.len())?;
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (x, &k) in point.iter().zip(e) {
                t *= x.powi(k as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    fn check_point(&self, n: usize) -> Result<()> {
        if n != self.nvars() {
            return Err(Error::DimensionMismatch { expected: self.nvars(), got: n });
        }
        Ok(())
    }

    /// Naive interval evaluation: sum of monomial enclosures.
    pub fn eval_interval(&self, domain: &IBox) -> Result<Interval> {
        self.check_point(domain.dim())?;
        let mut acc = Interval::ZERO;
        for (e, c) in &self.terms {
            let mut t = Interval::from_rational(c);
            for (x, &k) in domain.0.iter().zip(e) {
                if k > 0 {
                    t = t * x.powi(k);
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Hull of naive enclosures over a uniform `splits`-way subdivision of every axis.
    pub fn eval_interval_subdivided(&self, domain: &IBox, splits: usize) -> Result<Interval> {
        self.check_point(domain.dim())?;
        let mut out: Option<Interval> = None;
        for b in domain.subdivide(splits) {
            let v = self.eval_interval(&b)?;
            out = Some(match out {
                Some(o) => o.hull(&v),
                None => v,
            });
        }
        Ok(out.unwrap_or(Interval::ZERO))
    }

    pub fn to_json(&self) -> JetJson {
        JetJson {
            vars: JetVars { params: self.num_params(), phase: self.num_phase() },
            order: self.max_order,
            weights: self.layout.is_weighted().then(|| self.layout.weights.clone()),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| JetTerm { exps: e.clone(), num: c.numer().to_string(), den: c.denom().to_string() })
                .collect(),
        }
    }

    pub fn from_json(j: &JetJson) -> Result<Jet> {
        let layout = match &j.weights {
            Some(w) => {
                if w.len() != j.vars.params + j.vars.phase {
                    return Err(Error::DimensionMismatch { expected: j.vars.params + j.vars.phase, got: w.len() });
                }
                Layout { num_params: j.vars.params, num_phase: j.vars.phase, weights: w.clone() }
            }
            None => Layout::new(j.vars.params, j.vars.phase),
        };
        let mut out = Jet::zero(&layout, j.order);
        for t in &j.terms {
            if t.exps.len() != layout.nvars() {
                return Err(Error::DimensionMismatch { expected: layout.nvars(), got: t.exps.len() });
            }
            if layout.degree(&t.exps) > j.order {
                return Err(Error::Precondition(format!("term {:?} exceeds order {}", t.exps, j.order)));
            }
            let num: BigInt = t.num.trim().parse().map_err(|_| Error::ParseRational(t.num.clone()))?;
            let den: BigInt = t.den.trim().parse().map_err(|_| Error::ParseRational(t.den.clone()))?;
            if den.is_zero() {
                return Err(Error::ParseRational(format!("{}/{}", t.num, t.den)));
            }
            out.add_term(t.exps.clone(), Rational::new(num, den));
        }
        Ok(out)
    }

    /// Terms ordered by degree, then by descending exponent tuple.
    fn display_order(&self) -> Vec<(&Exponents, &Rational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            da.cmp(&db).then_with(|| b.0.cmp(a.0))
        });
        v
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.display_order().into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| {
                    let n = self.layout.var_name(v);
                    if k == 1 { n } else { format!("{n}^{k}") }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{}", format_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{}*{}", format_rational(&mag), vars.join("*"))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetVars {
    pub params: usize,
    pub phase: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetTerm {
    pub exps: Vec<u32>,
    pub num: String,
    pub den: String,
}

/// Wire form of a jet: `{vars: {params, phase}, order, terms: [{exps, num, den}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetJson {
    pub vars: JetVars,
    pub order: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    pub terms: Vec<JetTerm>,
}

impl Serialize for Jet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Jet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = JetJson::deserialize(d)?;
        Jet::from_json(&j).map_err(serde::de::Error::custom)
    }
}

/// Builds a jet from `(coefficient, exponents)` pairs with small-integer ratios.
pub fn jet_from(layout: &Layout, order: u32, terms: &[((i64, i64), &[u32])]) -> Jet {
    let mut j = Jet::zero(layout, order);
    for ((n, d), e) in terms {
        j.add_term(e.to_vec(), super::rational::rat(*n, *d));
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::rational::{int, rat};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lx() -> Layout {
        Layout::new(1, 1)
    }

    #[test]
    fn identity_composition() {
        let l = Layout::new(0, 2);
        let x = Jet::var(&l, 4, 0).unwrap();
        let q = jet_from(&l, 4, &[((3, 2), &[2, 0]), ((-1, 1), &[1, 1]), ((5, 1), &[0, 3])]);
        let y = Jet::var(&l, 4, 1).unwrap();
        assert_eq!(x.compose(&[q.clone(), y], 4, false).unwrap(), q);
    }

    #[test]
    fn self_composition_of_normal_form() {
        let l = Layout::new(0, 1);
        let p = jet_from(&l, 3, &[((-1, 1), &[1]), ((-4, 1), &[3])]);
        let pp = p.compose(&[p.clone()], 3, false).unwrap();
        assert_eq!(pp, jet_from(&l, 3, &[((1, 1), &[1]), ((8, 1), &[3])]));
    }

    #[test]
    fn substitution_scaling_phase() {
        let p = jet_from(&lx(), 3, &[((-1, 1), &[0, 1]), ((1, 1), &[1, 1]), ((-4, 1), &[0, 3])]);
        let lam = Jet::var(&lx(), 3, 0).unwrap();
        let two_x = Jet::var(&lx(), 3, 1).unwrap().scale(&int(2));
        let out = p.compose(&[lam, two_x], 3, false).unwrap();
        let expect = jet_from(&lx(), 3, &[((-2, 1), &[0, 1]), ((2, 1), &[1, 1]), ((-32, 1), &[0, 3])]);
        assert_eq!(out, expect);
    }

    #[test]
    fn constant_inner_rejected_unless_permitted() {
        let l = Layout::new(0, 1);
        let p = jet_from(&l, 3, &[((1, 1), &[2])]);
        let shifted = jet_from(&l, 3, &[((1, 1), &[0]), ((1, 1), &[1])]);
        assert!(matches!(p.compose(&[shifted.clone()], 3, false), Err(Error::ConstantTerm { .. })));
        let ok = p.compose(&[shifted], 3, true).unwrap();
        assert_eq!(ok, jet_from(&l, 3, &[((1, 1), &[0]), ((2, 1), &[1]), ((1, 1), &[2])]));
    }

    #[test]
    fn arity_mismatch() {
        let l = Layout::new(0, 2);
        let p = Jet::var(&l, 2, 0).unwrap();
        assert!(matches!(p.compose(&[p.clone()], 2, false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn derivative_power_rule() {
        let p = jet_from(&lx(), 3, &[((-2, 1), &[1, 1]), ((-2, 1), &[0, 2]), ((8, 1), &[0, 3])]);
        let d = p.derivative(1).unwrap();
        assert_eq!(d, jet_from(&lx(), 2, &[((-2, 1), &[1, 0]), ((-4, 1), &[0, 1]), ((24, 1), &[0, 2])]));
        assert_eq!(d.max_order(), 2);
        let c = Jet::constant(&lx(), 3, int(5));
        assert!(c.derivative(0).unwrap().is_zero());
        assert!(p.derivative(2).is_err());
    }

    #[test]
    fn mixed_partial_of_period_doubling_jet() {
        let p = jet_from(&lx(), 3, &[((-1, 1), &[0, 1]), ((1, 1), &[1, 1]), ((-4, 1), &[0, 3])]);
        let d = p.derivative(0).unwrap().derivative(1).unwrap();
        assert_eq!(d.constant_term(), int(1));
    }

    #[test]
    fn interval_eval_identity() {
        let l = Layout::new(0, 1);
        let x = Jet::var(&l, 1, 0).unwrap();
        let b = IBox::new(vec![Interval::new(-1.0, 1.0).unwrap()]);
        assert_eq!(x.eval_interval(&b).unwrap(), Interval::new(-1.0, 1.0).unwrap());
        assert!(x.eval_interval(&IBox::new(vec![])).is_err());
    }

    #[test]
    fn interval_eval_cubic_contains_range() {
        let l = Layout::new(0, 1);
        let p = jet_from(&l, 3, &[((-2, 1), &[2]), ((8, 1), &[3])]);
        let b = IBox::new(vec![Interval::new(0.0, 0.1).unwrap()]);
        let naive = p.eval_interval(&b).unwrap();
        assert!(naive.lo <= -0.02 && naive.hi >= 0.008);
        let fine = p.eval_interval_subdivided(&b, 8).unwrap();
        // dense sampling oracle
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let x = 0.1 * i as f64 / 10_000.0;
            let v = -2.0 * x * x + 8.0 * x * x * x;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(fine.lo <= lo && hi <= fine.hi);
        assert!(naive.contains_interval(&Interval::new(lo, hi).unwrap()));
        assert!(fine.width() < naive.width());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let p = jet_from(&lx(), 3, &[((-1, 3), &[0, 1]), ((7, 2), &[1, 1])]);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"vars\":{\"params\":1,\"phase\":1}"));
        let q: Jet = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"vars":{"params":0,"phase":1},"order":2,"terms":[{"exps":[3],"num":"1","den":"1"}]}"#;
        assert!(serde_json::from_str::<Jet>(bad).is_err());
    }

    #[test]
    fn display_is_readable() {
        let p = jet_from(&lx(), 3, &[((-2, 1), &[1, 1]), ((-2, 1), &[0, 2]), ((8, 1), &[0, 3])]);
        assert_eq!(p.to_string(), "-2*l*x - 2*x^2 + 8*x^3");
    }

    #[test]
    fn weighted_truncation() {
        let l = Layout::weighted(1, 1, 2);
        let p = jet_from(&l, 3, &[((1, 1), &[1, 1]), ((1, 1), &[2, 0]), ((1, 1), &[0, 3])]);
        // l^2 has weighted degree 4 and is dropped
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coeff(&[2, 0]), rat(0, 1));
    }

    fn random_jet(rng: &mut ChaCha8Rng, l: &Layout, order: u32, const_term: bool) -> Jet {
        let mut j = Jet::zero(l, order);
        let n = rng.gen_range(1..8);
        for _ in 0..n {
            let e: Vec<u32> = (0..l.nvars()).map(|_| rng.gen_range(0..=3)).collect();
            if !const_term && e.iter().all(|&k| k == 0) {
                continue;
            }
            j.add_term(e, rat(rng.gen_range(-9..=9), rng.gen_range(1..=5)));
        }
        j
    }

    #[test]
    fn ring_axioms_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = Layout::new(1, 2);
        for _ in 0..40 {
            let a = random_jet(&mut rng, &l, 6, true);
            let b = random_jet(&mut rng, &l, 6, true);
            let c = random_jet(&mut rng, &l, 6, true);
            assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
            assert_eq!(
                a.mul(&b.add(&c).unwrap()).unwrap(),
                a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
            );
            assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
            assert!(a.sub(&a).unwrap().is_zero());
        }
    }

    #[test]
    fn composition_truncation_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = Layout::new(1, 1);
        for _ in 0..30 {
            let outer = random_jet(&mut rng, &l, 6, true);
            let inners: Vec<Jet> = (0..2).map(|_| random_jet(&mut rng, &l, 6, false)).collect();
            let high = outer.compose(&inners, 6, false).unwrap().truncate(4);
            let t_inners: Vec<Jet> = inners.iter().map(|j| j.truncate(4)).collect();
            let low = outer.truncate(4).compose(&t_inners, 4, false).unwrap();
            assert_eq!(high, low);
        }
    }

    #[test]
    fn mixed_partials_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Layout::new(1, 2);
        for _ in 0..30 {
            let p = random_jet(&mut rng, &l, 6, true);
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let a = p.derivative(i).unwrap().derivative(j).unwrap();
                let b = p.derivative(j).unwrap().derivative(i).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn interval_eval_contains_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = Layout::new(1, 2);
        for _ in 0..10 {
            let p = random_jet(&mut rng, &l, 6, true);
            let b = IBox::new(
                (0..3)
                    .map(|_| {
                        let lo: f64 = rng.gen_range(-1.0..0.5);
                        Interval::new(lo, lo + rng.gen_range(0.0..0.5)).unwrap()
                    })
                    .collect(),
            );
            let enc = p.eval_interval(&b).unwrap();
            let enc_fine = p.eval_interval_subdivided(&b, 3).unwrap();
            for _ in 0..200 {
                let s: Vec<f64> = b.0.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
                let exact = p
                    .eval_rational(&s.iter().map(|v| Rational::from_float(*v).unwrap()).collect::<Vec<_>>())
                    .unwrap();
                assert!(enc.contains_rational(&exact));
                assert!(enc_fine.contains_rational(&exact));
            }
        }
    }

    proptest! {
        #[test]
        fn add_then_sub_roundtrips(cs in proptest::collection::vec(-20i64..20, 6)) {
            let l = Layout::new(0, 2);
            let mut a = Jet::zero(&l, 4);
            let mut b = Jet::zero(&l, 4);
            for (i, c) in cs.iter().enumerate() {
                a.add_term(vec![i as u32 % 3, i as u32 / 3], int(*c));
                b.add_term(vec![i as u32 / 3, i as u32 % 3], int(c * 2 - 1));
            }
            prop_assert_eq!(a.add(&b).unwrap().sub(&b).unwrap(), a);
        }
    }
}
