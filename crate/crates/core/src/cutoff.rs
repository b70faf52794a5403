//! C³ cutoff functions and certified derivative bounds of cut-off nonlinearities.
//!
//! `φ` is the identity on `[α₁, α₂]`, constant outside `[α₁ − Δ₁, α₂ + Δ₂]`, and
//! joined by degree-6 ramps that match through the third derivative.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::polyalg::{format_rational, parse_rational, rat, IBox, Interval, Jet, Rational, UPoly};

#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSpec {
    pub a1: Rational,
    pub d1: Rational,
    pub a2: Rational,
    pub d2: Rational,
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    a1: String,
    d1: String,
    a2: String,
    d2: String,
}

impl Serialize for CutoffSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecJson {
            a1: format_rational(&self.a1),
            d1: format_rational(&self.d1),
            a2: format_rational(&self.a2),
            d2: format_rational(&self.d2),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CutoffSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SpecJson::deserialize(d)?;
        let p = |s: &str| parse_rational(s).map_err(serde::de::Error::custom);
        CutoffSpec::new(p(&j.a1)?, p(&j.d1)?, p(&j.a2)?, p(&j.d2)?).map_err(serde::de::Error::custom)
    }
}

/// Which of the five pieces a point falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Branch {
    LowFlat,
    LowRamp,
    Core,
    HighRamp,
    HighFlat,
}

impl CutoffSpec {
    pub fn new(a1: Rational, d1: Rational, a2: Rational, d2: Rational) -> Result<Self> {
        if d1 <= Rational::zero() || d2 <= Rational::zero() {
            return Err(Error::Domain("cutoff ramp widths must be positive".into()));
        }
        if a1 > a2 {
            return Err(Error::Domain("cutoff needs α₁ ≤ α₂".into()));
        }
        Ok(Self { a1, d1, a2, d2 })
    }

    /// Same ramp width on both sides.
    pub fn symmetric(a1: Rational, a2: Rational, delta: Rational) -> Result<Self> {
        Self::new(a1, delta.clone(), a2, delta)
    }

    pub fn range(&self) -> (Rational, Rational) {
        (&self.a1 - &self.d1 / rat(2, 1), &self.a2 + &self.d2 / rat(2, 1))
    }

    pub fn range_interval(&self) -> Interval {
        let (lo, hi) = self.range();
        Interval::from_rational(&lo).hull(&Interval::from_rational(&hi))
    }

    /// Ramp polynomials in the shifted variable `t = x − α`.
    fn ramp(&self, low: bool) -> UPoly {
        let (a, d, sgn) = if low { (&self.a1, &self.d1, Rational::one()) } else { (&self.a2, &self.d2, -Rational::one()) };
        let d3 = d * d * d;
        let d4 = &d3 * d;
        let d5 = &d4 * d;
        UPoly::new(vec![
            a.clone(),
            Rational::one(),
            Rational::zero(),
            Rational::zero(),
            &sgn * rat(5, 2) / d3,
            rat(3, 1) / d4,
            sgn / d5,
        ])
    }

    fn branch(&self, x: &Rational) -> Branch {
        if *x <= &self.a1 - &self.d1 {
            Branch::LowFlat
        } else if *x < self.a1 {
            Branch::LowRamp
        } else if *x <= self.a2 {
            Branch::Core
        } else if *x < &self.a2 + &self.d2 {
            Branch::HighRamp
        } else {
            Branch::HighFlat
        }
    }

    /// `φ^{(order)}(x)` for `order ≤ 3`, exact.
    pub fn eval(&self, x: &Rational, order: u32) -> Result<Rational> {
        if order > 3 {
            return Err(Error::Domain("cutoff derivatives are provided through order 3".into()));
        }
        let (lo, hi) = self.range();
        let piece = |p: UPoly, t: Rational| {
            let mut p = p;
            for _ in 0..order {
                p = p.derivative();
            }
            p.eval(&t)
        };
        Ok(match self.branch(x) {
            Branch::LowFlat => if order == 0 { lo } else { Rational::zero() },
            Branch::HighFlat => if order == 0 { hi } else { Rational::zero() },
            Branch::Core => match order {
                0 => x.clone(),
                1 => Rational::one(),
                _ => Rational::zero(),
            },
            Branch::LowRamp => piece(self.ramp(true), x - &self.a1),
            Branch::HighRamp => piece(self.ramp(false), x - &self.a2),
        })
    }

    /// Floating-point evaluation of `φ^{(order)}`.
    pub fn eval_f64(&self, x: f64, order: u32) -> Result<f64> {
        let r = Rational::from_float(x).ok_or_else(|| Error::Domain("non-finite cutoff argument".into()))?;
        Ok(num_traits::ToPrimitive::to_f64(&self.eval(&r, order)?).unwrap_or(f64::NAN))
    }

    /// One-sided values `(left, right)` of `φ^{(order)}` at `x`, from the adjacent branch polynomials.
    pub fn one_sided(&self, x: &Rational, order: u32) -> Result<(Rational, Rational)> {
        let tiny = rat(1, 1_000_000_000) * (&self.d1).min(&self.d2) * (&self.d1).min(&self.d2);
        let probe = |y: Rational| -> Result<(Branch, Rational)> { Ok((self.branch(&y), y)) };
        let (bl, _) = probe(x - &tiny)?;
        let (br, _) = probe(x + &tiny)?;
        let at = |b: Branch| -> Result<Rational> {
            let (lo, hi) = self.range();
            let mut p = match b {
                Branch::LowFlat => UPoly::new(vec![lo - x.clone()]),
                Branch::HighFlat => UPoly::new(vec![hi - x.clone()]),
                Branch::Core => UPoly::new(vec![Rational::zero(), Rational::one()]),
                Branch::LowRamp => self.ramp(true),
                Branch::HighRamp => self.ramp(false),
            };
            for _ in 0..order {
                p = p.derivative();
            }
            let shift = match b {
                Branch::LowRamp => x - &self.a1,
                Branch::HighRamp => x - &self.a2,
                Branch::LowFlat | Branch::HighFlat => Rational::zero(),
                Branch::Core => x.clone(),
            };
            let v = p.eval(&shift);
            // the flat pieces were shifted by −x so that their constant survives only at order 0
            Ok(match b {
                Branch::LowFlat | Branch::HighFlat => if order == 0 { v + x } else { v },
                _ => v,
            })
        };
        Ok((at(bl)?, at(br)?))
    }

    /// Certified enclosures of `sup |φ′|`, `sup |φ″|`, `sup |φ‴|` over ℝ.
    pub fn derivative_sup(&self) -> Result<[Interval; 3]> {
        let mut out = [Interval::ONE, Interval::ZERO, Interval::ZERO];
        for low in [true, false] {
            let d = if low { &self.d1 } else { &self.d2 };
            let dom = if low {
                Interval::from_rational(&-d.clone()).hull(&Interval::ZERO)
            } else {
                Interval::ZERO.hull(&Interval::from_rational(d))
            };
            let mut p = self.ramp(low);
            for k in 0..3 {
                p = p.derivative();
                let poly = p.clone();
                let dpoly = p.derivative();
                // mean-value form keeps the overestimation quadratic in the cell width
                let f = |t: Interval| {
                    let m = Interval::point(t.mid());
                    let mv = eval_upoly(&poly, m) + eval_upoly(&dpoly, t) * (t - m);
                    let naive = eval_upoly(&poly, t);
                    mv.intersect(&naive).unwrap_or(naive)
                };
                let s = sup_abs_univariate(&f, dom, 1e-10)?;
                out[k] = out[k].max_with(&s);
            }
        }
        Ok(out)
    }

    /// Interval image of `φ` (valid for any argument).
    pub fn eval_interval(&self, x: Interval) -> Interval {
        let (lo, hi) = self.range();
        let lo = Interval::from_rational(&lo);
        let hi = Interval::from_rational(&hi);
        // φ is nondecreasing and 1-Lipschitz, so clamp the endpoints
        let f = |v: f64| {
            Rational::from_float(v)
                .and_then(|r| self.eval(&r, 0).ok())
                .map(|r| Interval::from_rational(&r))
                .unwrap_or(lo.hull(&hi))
        };
        f(x.lo).hull(&f(x.hi)).intersect(&lo.hull(&hi)).unwrap_or(lo.hull(&hi))
    }
}

fn eval_upoly(p: &UPoly, t: Interval) -> Interval {
    let mut acc = Interval::ZERO;
    for c in p.coeffs.iter().rev() {
        acc = acc * t + Interval::from_rational(c);
    }
    acc
}

#[derive(PartialEq)]
struct Cell {
    upper: f64,
    dom: Vec<Interval>,
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Branch-and-bound enclosure of `sup_{x∈dom} f(x)` for an interval extension `f`. Stops when the bracket is narrower than
/// `tol` relative to the upper bound.
pub fn sup_branch_and_bound(f: &dyn Fn(&[Interval]) -> Interval, dom: &[Interval], tol: f64, max_cells: usize) -> Interval {
    let mut best_lo = f64::NEG_INFINITY;
    let mid_lo = |d: &[Interval]| f(&d.iter().map(|i| Interval::point(i.mid())).collect::<Vec<_>>()).lo;
    let mut heap = BinaryHeap::new();
    heap.push(Cell { upper: f(dom).hi, dom: dom.to_vec() });
    best_lo = best_lo.max(mid_lo(dom));
    let mut cells = 0;
    while let Some(cell) = heap.pop() {
        if cell.upper - best_lo <= tol * cell.upper.abs().max(best_lo.abs()) || cells >= max_cells {
            return Interval { lo: best_lo.min(cell.upper), hi: cell.upper };
        }
        cells += 1;
        let axis = (0..cell.dom.len())
            .max_by(|&a, &b| cell.dom[a].width().total_cmp(&cell.dom[b].width()))
            .unwrap_or(0);
        for half in cell.dom[axis].split(2) {
            let mut d = cell.dom.clone();
            d[axis] = half;
            best_lo = best_lo.max(mid_lo(&d));
            heap.push(Cell { upper: f(&d).hi, dom: d });
        }
    }
    Interval { lo: best_lo, hi: best_lo }
}

fn sup_abs_univariate(f: &dyn Fn(Interval) -> Interval, dom: Interval, tol: f64) -> Result<Interval> {
    let g = |d: &[Interval]| f(d[0]).abs();
    let s = sup_branch_and_bound(&g, &[dom], tol, 200_000);
    Interval::new(s.lo, s.hi)
}

/// Product cutoff on a box, one spec per phase axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCutoff(pub Vec<CutoffSpec>);

impl BoxCutoff {
    pub fn range_box(&self) -> Vec<Interval> {
        self.0.iter().map(CutoffSpec::range_interval).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.iter().zip(x).map(|(s, v)| s.eval_f64(*v, 0)).collect()
    }
}

/// Certified upper bound on `sup ‖D(g∘Φ)‖_∞` (largest row sum of the phase
/// Jacobian) where `Φ` applies `specs` axis by axis and the parameters range over
/// `params`. Uses `φ′ ∈ [0, 1]`, so it suffices to bound `‖D_x g‖` on the range of `Φ`.
pub fn bound_composed_nonlinearity(g: &[Jet], specs: &BoxCutoff, params: &[Interval], tol: f64) -> Result<Interval> {
    let Some(first) = g.first() else { return Ok(Interval::ZERO) };
    let layout = first.layout().clone();
    if layout.num_params != params.len() || layout.num_phase != specs.0.len() {
        return Err(Error::DimensionMismatch { expected: layout.nvars(), got: params.len() + specs.0.len() });
    }
    if g.iter().all(Jet::is_zero) {
        return Ok(Interval::ZERO);
    }
    let mut dom: Vec<Interval> = params.to_vec();
    dom.extend(specs.range_box());
    let k = layout.num_params;
    let parts: Vec<Vec<Jet>> = g
        .iter()
        .map(|gi| (k..layout.nvars()).map(|v| gi.derivative(v)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut worst = Interval::ZERO;
    for row in &parts {
        let f = |d: &[Interval]| {
            let b = IBox::new(d.to_vec());
            row.iter().fold(Interval::ZERO, |acc, p| acc + p.eval_interval(&b).map(|v| v.abs()).unwrap_or(Interval::point(f64::INFINITY)))
        };
        let s = sup_branch_and_bound(&f, &dom, tol, 400_000);
        worst = worst.max_with(&s);
    }
    Ok(worst)
}

/// `sup |f|` over `[lo, hi]` for a univariate jet (phase variable 0), certified.
pub fn sup_abs_on(j: &Jet, dom: Interval, tol: f64) -> Result<Interval> {
    let f = |d: &[Interval]| j.eval_interval(&IBox::new(d.to_vec())).map(|v| v.abs()).unwrap_or(Interval::point(f64::INFINITY));
    Ok(sup_branch_and_bound(&f, &[dom], tol, 400_000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{jet_from, Layout};
    use proptest::prelude::*;

    fn unit() -> CutoffSpec {
        CutoffSpec::new(rat(0, 1), rat(1, 1), rat(1, 1), rat(1, 2)).unwrap()
    }

    #[test]
    fn branches() {
        let s = unit();
        assert_eq!(s.eval(&rat(1, 3), 0).unwrap(), rat(1, 3));
        assert_eq!(s.eval(&rat(1, 3), 1).unwrap(), rat(1, 1));
        assert_eq!(s.eval(&rat(-5, 1), 0).unwrap(), rat(-1, 2));
        assert_eq!(s.eval(&rat(-5, 1), 1).unwrap(), rat(0, 1));
        assert_eq!(s.eval(&rat(9, 1), 0).unwrap(), rat(5, 4));
        assert_eq!(s.eval(&rat(-1, 2), 0).unwrap(), rat(-27, 64));
        assert!(CutoffSpec::new(rat(0, 1), rat(0, 1), rat(1, 1), rat(1, 1)).is_err());
        assert!(CutoffSpec::new(rat(2, 1), rat(1, 1), rat(1, 1), rat(1, 1)).is_err());
    }

    #[test]
    fn c3_at_all_knots() {
        let s = unit();
        for x in [rat(-1, 1), rat(0, 1), rat(1, 1), rat(3, 2)] {
            for order in 0..=3 {
                let (l, r) = s.one_sided(&x, order).unwrap();
                assert_eq!(l, r, "order {order} at {x}");
            }
        }
    }

    #[test]
    fn derivative_suprema() {
        let s = unit();
        let [d1, d2, d3] = s.derivative_sup().unwrap();
        assert!(d1.hi <= 1.0 + 1e-12 && d1.lo >= 1.0 - 1e-12);
        // 30 s²(1+s)² peaks at s = −1/2 with value 15/8 per unit width; the right ramp has width 1/2
        assert!(d2.contains(15.0 / 8.0 * 2.0), "{d2}");
        // |60 s (1+s)(1+2s)| peaks at s = −1/2 ± √3/6 with value 10/√3, scaled by 1/Δ²
        assert!(d3.contains(10.0 / 3f64.sqrt() * 4.0), "{d3}");
        let tiny = CutoffSpec::symmetric(rat(0, 1), rat(1, 1), rat(1, 1_000_000)).unwrap();
        let t = tiny.derivative_sup().unwrap();
        assert!((t[1].mid() * 1e-6 - 15.0 / 8.0).abs() < 1e-6);
    }

    #[test]
    fn composed_bounds() {
        let l = Layout::new(0, 1);
        let zero = vec![Jet::zero(&l, 3)];
        let spec = BoxCutoff(vec![unit()]);
        assert_eq!(bound_composed_nonlinearity(&zero, &spec, &[], 1e-9).unwrap(), Interval::ZERO);
        let g = vec![jet_from(&l, 3, &[((3, 2), &[2])])];
        let b = bound_composed_nonlinearity(&g, &spec, &[], 1e-9).unwrap();
        assert!(b.contains(3.0 * 1.25), "{b}");
    }

    #[test]
    fn json_round_trip() {
        let s = unit();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"d2\":\"1/2\""));
        let back: CutoffSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let dec: CutoffSpec = serde_json::from_str(r#"{"a1":"-0.5","d1":"1e-6","a2":"0.5","d2":"1e-6"}"#).unwrap();
        assert_eq!(dec.d1, rat(1, 1_000_000));
    }

    proptest! {
        #[test]
        fn identity_core_lipschitz_and_range(x in -3.0f64..3.0, y in -3.0f64..3.0, c in 0.0f64..1.0) {
            let s = unit();
            let (lo, hi) = (-0.5, 1.25);
            let fx = s.eval_f64(x, 0).unwrap();
            let fy = s.eval_f64(y, 0).unwrap();
            prop_assert!((fx - fy).abs() <= (x - y).abs() * (1.0 + 1e-12) + 1e-15);
            prop_assert!(fx >= lo && fx <= hi);
            prop_assert_eq!(s.eval_f64(c, 0).unwrap(), c);
            let d = s.eval_f64(x, 1).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
