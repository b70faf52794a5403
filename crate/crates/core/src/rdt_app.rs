//! The lattice reaction-diffusion map
//! `(u_{n−1}, u_n) ↦ (u_n, −(3+λ)u_n − 2u_{n−1} − 3u_n² + u_n³)`
//! and its period-doubling certificate.
//!
//! In the chart `(x, y) = (−2u_{n−1} − u_n, 2u_{n−1} + 2u_n)` the linear part at
//! `λ = 0` is `diag(−1, −2)` and, with `s = x + y`,
//! `g_c = −(s³ − 3s² − λs)`, `g_u = 2(s³ − 3s² − λs)`.

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bounds::{
    certify_remainder, derivative_bound_system, global_lipschitz, BoundCertificate, BoundOptions, GlobalLipschitz, Growth,
    Shape,
};
use crate::conjugacy::{solve_order_by_order, ConjugacySolution};
use crate::cutoff::{bound_composed_nonlinearity, sup_abs_on, sup_branch_and_bound, BoxCutoff, CutoffSpec};
use crate::error::{Error, Result};
use crate::polyalg::{format_rational, jet_from, parse_rational, rat, IBox, Interval, Jet, Layout, RMatrix, Rational};
use crate::splitting::{check_rate_conditions, split_spectrum, LinearSplitting};

fn ser_rat<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

fn ser_rats<S: Serializer>(r: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(r.iter().map(format_rational))
}

fn ival(r: &Rational) -> Interval {
    Interval::from_rational(r)
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
fn exact(x: f64) -> Rational {
    Rational::from_float(x).expect("finite")
}

/// Map jets in `u`-coordinates; variables `[λ, u_{n−1}, u_n]`.
pub fn u_jets(layout: &Layout, order: u32) -> Vec<Jet> {
    let f0 = jet_from(layout, order, &[((1, 1), &[0, 0, 1])]);
    let f1 = jet_from(
        layout,
        order,
        &[((-3, 1), &[0, 0, 1]), ((-1, 1), &[1, 0, 1]), ((-2, 1), &[0, 1, 0]), ((-3, 1), &[0, 0, 2]), ((1, 1), &[0, 0, 3])],
    );
    vec![f0, f1]
}

/// `(g_c, g_u)` as jets in `[λ, x, y]`.
pub fn g_jets(layout: &Layout, order: u32) -> Result<Vec<Jet>> {
    let s = Jet::var(layout, order, 1)?.add(&Jet::var(layout, order, 2)?)?;
    let lam = Jet::var(layout, order, 0)?;
    // w = s³ − 3s² − λs
    let w = s.pow(3).sub(&s.pow(2).scale(&rat(3, 1)))?.sub(&lam.mul(&s)?)?;
    Ok(vec![w.scale(&rat(-1, 1)), w.scale(&rat(2, 1))])
}

/// Map jets in the diagonal chart; variables `[λ, x, y]`.
pub fn xy_jets(layout: &Layout, order: u32) -> Result<Vec<Jet>> {
    let g = g_jets(layout, order)?;
    let x = Jet::var(layout, order, 1)?.scale(&rat(-1, 1));
    let y = Jet::var(layout, order, 2)?.scale(&rat(-2, 1));
    Ok(vec![x.add(&g[0])?, y.add(&g[1])?])
}

/// `P_R = (−1 + λ)x − 4x³` on `[λ, x]`.
pub fn p_r(layout: &Layout, order: u32) -> Jet {
    jet_from(layout, order, &[((-1, 1), &[0, 1]), ((1, 1), &[1, 1]), ((-4, 1), &[0, 3])])
}

/// `P_K = −2λx − 2x² + 8x³` on `[λ, x]`.
pub fn p_k(layout: &Layout, order: u32) -> Jet {
    jet_from(layout, order, &[((-2, 1), &[1, 1]), ((-2, 1), &[0, 2]), ((8, 1), &[0, 3])])
}

/// The lattice map at a fixed rational parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdtSystem {
    #[serde(serialize_with = "ser_rat")]
    pub lambda: Rational,
}

pub fn build_rdt(lambda: Rational) -> RdtSystem {
    RdtSystem { lambda }
}

impl RdtSystem {
    pub fn u_map(&self, p: &[Rational; 2]) -> [Rational; 2] {
        let (a, b) = (&p[0], &p[1]);
        let next = -(rat(3, 1) + &self.lambda) * b - rat(2, 1) * a - rat(3, 1) * b * b + b * b * b;
        [b.clone(), next]
    }

    pub fn xy_map(&self, p: &[Rational; 2]) -> [Rational; 2] {
        let s = &p[0] + &p[1];
        let w = &s * &s * &s - rat(3, 1) * &s * &s - &self.lambda * &s;
        [-p[0].clone() - &w, rat(-2, 1) * &p[1] + rat(2, 1) * w]
    }

    pub fn to_xy(p: &[Rational; 2]) -> [Rational; 2] {
        [rat(-2, 1) * &p[0] - &p[1], rat(2, 1) * &p[0] + rat(2, 1) * &p[1]]
    }

    pub fn to_u(p: &[Rational; 2]) -> [Rational; 2] {
        let s = &p[0] + &p[1];
        [-(rat(2, 1) * &p[0] + &p[1]) / rat(2, 1), s]
    }

    pub fn u_map_f64(lambda: f64, p: [f64; 2]) -> [f64; 2] {
        let (a, b) = (p[0], p[1]);
        [b, -(3.0 + lambda) * b - 2.0 * a - 3.0 * b * b + b * b * b]
    }

    pub fn to_xy_f64(p: [f64; 2]) -> [f64; 2] {
        [-2.0 * p[0] - p[1], 2.0 * p[0] + 2.0 * p[1]]
    }

    pub fn to_u_f64(p: [f64; 2]) -> [f64; 2] {
        [-(2.0 * p[0] + p[1]) / 2.0, p[0] + p[1]]
    }

    /// `D_u F` at the origin.
    pub fn linearization(&self) -> RMatrix {
        RMatrix::from_rows(vec![vec![rat(0, 1), rat(1, 1)], vec![rat(-2, 1), -(rat(3, 1) + &self.lambda)]]).expect("2x2")
    }

    pub fn splitting() -> Result<LinearSplitting> {
        split_spectrum(&RMatrix::from_i64(&[&[0, 1], &[-2, -3]]))
    }
}

/// Center multiplier `∂R/∂x(λ, 0) = −1 + λ + (−3λ − 1 + √(λ² + 6λ + 1))/2`.
pub fn dr_at_zero(lambda: Interval) -> Result<Interval> {
    let disc = lambda.sqr() + lambda * 6.0 + 1.0;
    if disc.lo <= 0.0 {
        return Err(Error::Domain("λ² + 6λ + 1 must be positive".into()));
    }
    let root = disc.sqrt()?;
    Ok(Interval::point(-1.0) + lambda + (lambda * (-3.0) + Interval::point(-1.0) + root) * 0.5)
}

/// Taylor coefficients in `λ` of the center multiplier, through `order`.
/// The square root is expanded as a power series `s` with `s² = 1 + 6λ + λ²`.
pub fn dr_at_zero_series(order: usize) -> Vec<Rational> {
    let a = |k: usize| match k {
        0 => rat(1, 1),
        1 => rat(6, 1),
        2 => rat(1, 1),
        _ => Rational::zero(),
    };
    let mut s: Vec<Rational> = vec![rat(1, 1)];
    for k in 1..=order {
        let mut acc = a(k);
        for i in 1..k {
            acc -= &s[i] * &s[k - i];
        }
        s.push(acc / rat(2, 1));
    }
    (0..=order)
        .map(|k| {
            let lin = match k {
                0 => rat(-1, 1) + rat(-1, 2),
                1 => rat(1, 1) + rat(-3, 2),
                _ => Rational::zero(),
            };
            lin + &s[k] / rat(2, 1)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMode {
    /// Only `E_R < 1`: a period-2 orbit exists.
    Existence,
    /// `E_R < 1/2`, `λ < 4/3`: uniqueness and the connecting dynamics.
    Dynamics,
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterEnclosure {
    pub mode: OrbitMode,
    pub lambda_minus: Interval,
    pub lambda_plus: Interval,
    pub i_lambda: Interval,
    pub w_minus: Interval,
    pub w_plus: Interval,
}

fn lambda_pm(lambda: Interval, e_r: Interval) -> Result<(Interval, Interval)> {
    let r = lambda.sqrt()? * 0.5;
    let lo = (Interval::ONE - e_r).max_with(&Interval::ZERO).sqrt()? * r;
    let hi = (Interval::ONE + e_r).sqrt()? * r;
    Ok((lo, hi))
}

pub fn enclose_center_orbit(lambda: Interval, e_r: Interval, mode: OrbitMode) -> Result<CenterEnclosure> {
    if lambda.lo < 0.0 || e_r.lo < 0.0 {
        return Err(Error::Precondition("λ and E_R must be nonnegative".into()));
    }
    if !e_r.certainly_lt_f64(1.0) {
        return Err(Error::Precondition("E_R must be below 1".into()));
    }
    if mode == OrbitMode::Dynamics && !(e_r.certainly_lt_f64(0.5) && lambda.certainly_lt_f64(4.0 / 3.0)) {
        return Err(Error::Precondition("the dynamics statement needs E_R < 1/2 and λ < 4/3".into()));
    }
    let (lm, lp) = lambda_pm(lambda, e_r)?;
    let w_plus = Interval { lo: lm.lo, hi: lp.hi };
    Ok(CenterEnclosure {
        mode,
        lambda_minus: lm,
        lambda_plus: lp,
        i_lambda: Interval { lo: -lp.hi, hi: lp.hi },
        w_minus: Interval { lo: -lp.hi, hi: -lm.lo },
        w_plus,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KuRange {
    pub inf: Interval,
    pub sup: Interval,
    /// Certified brackets of the extremes of `P_K ± 2E_Kλx` over `𝓘_λ`.
    pub optimizer_min: Interval,
    pub optimizer_max: Interval,
    /// `1/12 − √(1 + 12λ + 12E_Kλ)/12`
    pub argmax: Interval,
    pub consistent: bool,
}

fn ku_closed_forms(lambda: Interval, e_r: Interval, e_k: Interval) -> Result<(Interval, Interval, Interval)> {
    let q = ((Interval::ONE + e_r) * lambda).sqrt()?;
    let inf = Interval::point(-0.5) * lambda * (Interval::ONE + e_r + Interval::point(2.0) * e_r * q + Interval::point(2.0) * e_k * q);
    let r = (Interval::ONE + lambda * 12.0 + e_k * lambda * 12.0).sqrt()?;
    let sup = (r - Interval::ONE).sqr() * (r * 2.0 + Interval::ONE) * (1.0 / 216.0);
    // 1/216 is inexact in binary; widen by one ulp-scale step
    let sup = Interval { lo: sup.lo * (1.0 - 1e-15), hi: sup.hi * (1.0 + 1e-15) };
    let argmax = (Interval::ONE - r) * (1.0 / 12.0);
    let argmax = Interval { lo: argmax.lo - argmax.mag() * 1e-15, hi: argmax.hi + argmax.mag() * 1e-15 };
    Ok((inf, sup, argmax))
}

/// `P_K(x) + 2σE_Kλ|x|`, in mean-value form on cells that do not straddle 0.
fn pk_band(lambda: Interval, e_k: Interval, x: Interval, sign: f64) -> Interval {
    let tilt = Interval::point(2.0 * sign) * e_k * lambda;
    let f = |x: Interval, s: Interval| Interval::point(-2.0) * lambda * x - x.sqr() * 2.0 + x.powi(3) * 8.0 + tilt * s * x;
    if x.lo < 0.0 && x.hi > 0.0 {
        return f(x, Interval { lo: -1.0, hi: 1.0 });
    }
    let s = if x.hi <= 0.0 { -Interval::ONE } else { Interval::ONE };
    let m = Interval::point(x.mid());
    let df = Interval::point(-2.0) * lambda - x * 4.0 + x.sqr() * 24.0 + tilt * s;
    let naive = f(x, s);
    let mv = f(m, s) + df * (x - m);
    naive.intersect(&mv).unwrap_or(naive)
}

pub fn enclose_ku_range(lambda: Interval, e_r: Interval, e_k: Interval) -> Result<KuRange> {
    if !(e_k.hi <= 4.5 && lambda.certainly_lt(&Interval::from_ratio(1, 43)) && e_r.certainly_lt_f64(0.5)) {
        return Err(Error::Precondition("the k_u range needs E_K ≤ 9/2, λ < 1/43 and E_R < 1/2".into()));
    }
    let (inf, sup, argmax) = ku_closed_forms(lambda, e_r, e_k)?;
    let (_, lp) = lambda_pm(lambda, e_r)?;
    let dom = Interval { lo: -lp.hi, hi: lp.hi };
    let tol = 1e-9;
    let cells = 200_000;
    let optimizer_max = sup_branch_and_bound(&|d| pk_band(lambda, e_k, d[0], 1.0), &[dom], tol, cells);
    let optimizer_min = -sup_branch_and_bound(&|d| -pk_band(lambda, e_k, d[0], -1.0), &[dom], tol, cells);
    let neg = Interval { lo: -lp.hi, hi: 0.0 };
    let slack = |v: Interval| v.mag() * 1e-6 + 1e-300;
    let consistent = sup.hi + slack(sup) >= optimizer_max.lo
        && sup.lo - slack(sup) <= optimizer_max.hi
        && inf.lo - slack(inf) <= optimizer_min.hi
        && inf.hi + slack(inf) >= optimizer_min.lo
        && neg.contains_interval(&argmax);
    Ok(KuRange { inf, sup, optimizer_min, optimizer_max, argmax, consistent })
}

/// The box `[λ_{c,−}, λ_{c,+}] × [λ_{u,−}, λ_{u,+}]` holding the period-2 orbit.
#[derive(Clone, Debug, Serialize)]
pub struct BoxLambda {
    pub c_minus: Interval,
    pub c_plus: Interval,
    pub u_minus: Interval,
    pub u_plus: Interval,
}

impl BoxLambda {
    /// Outer hull of the box.
    pub fn hull(&self) -> [Interval; 2] {
        [Interval { lo: self.c_minus.lo, hi: self.c_plus.hi }, Interval { lo: self.u_minus.lo, hi: self.u_plus.hi }]
    }

    /// Signed distance of `p` to the box boundary (positive inside).
    pub fn margin(&self, p: [f64; 2]) -> f64 {
        let h = self.hull();
        (p[0] - h[0].lo).min(h[0].hi - p[0]).min(p[1] - h[1].lo).min(h[1].hi - p[1])
    }
}

fn box_unchecked(lambda: Interval, e_r: Interval, e_k: Interval) -> Result<BoxLambda> {
    let (_, lp) = lambda_pm(lambda, e_r)?;
    let shift = Interval::point(3.0) * (Interval::ONE + e_r) * lambda * 0.125;
    let (inf, sup, _) = ku_closed_forms(lambda, e_r, e_k)?;
    Ok(BoxLambda { c_minus: -lp + shift, c_plus: lp + shift, u_minus: inf, u_plus: sup })
}

pub fn build_box(lambda: Interval, e_r: Interval, e_k: Interval) -> Result<BoxLambda> {
    enclose_center_orbit(lambda, e_r, OrbitMode::Dynamics)?;
    enclose_ku_range(lambda, e_r, e_k)?;
    box_unchecked(lambda, e_r, e_k)
}

/// One certified (or refuted) inequality `lhs < rhs` (or `≤`).
#[derive(Clone, Debug, Serialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: Interval,
    pub rhs: Interval,
    pub strict: bool,
    pub pass: bool,
}

impl Inequality {
    pub fn lt(name: &str, lhs: Interval, rhs: Interval) -> Self {
        Self { name: name.into(), lhs, rhs, strict: true, pass: lhs.certainly_lt(&rhs) }
    }

    pub fn le(name: &str, lhs: Interval, rhs: Interval) -> Self {
        Self { name: name.into(), lhs, rhs, strict: false, pass: lhs.certainly_le(&rhs) }
    }

    fn flag(name: &str, pass: bool) -> Self {
        let v = if pass { Interval::ZERO } else { Interval::ONE };
        Self { name: name.into(), lhs: v, rhs: Interval::ZERO, strict: false, pass }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnclosureReport {
    pub lambda: Interval,
    pub e_r: Interval,
    pub e_k: Interval,
    pub i_lambda: Interval,
    pub w_minus: Interval,
    pub w_plus: Interval,
    pub box_lambda: BoxLambda,
    pub ku_range: Option<KuRange>,
    pub flags: Vec<Inequality>,
    /// `"certificate"` when `E_R`, `E_K` were re-derived from a remainder certificate at this λ.
    pub provenance: String,
    pub accepted: bool,
}

fn hypothesis_flags(lambda: Interval, e_r: Interval, e_k: Interval) -> Vec<Inequality> {
    vec![
        Inequality::lt("E_R < 1/2", e_r, Interval::point(0.5)),
        Inequality::le("E_K <= 9/2", e_k, Interval::point(4.5)),
        Inequality::lt("lambda < 1/43", lambda, Interval::from_ratio(1, 43)),
        Inequality::lt("lambda < 4/3", lambda, Interval::from_ratio(4, 3)),
    ]
}

pub fn enclosure_report(lambda: Interval, e_r: Interval, e_k: Interval, provenance: &str) -> Result<EnclosureReport> {
    let mut flags = hypothesis_flags(lambda, e_r, e_k);
    let orbit = enclose_center_orbit(lambda, e_r, OrbitMode::Existence)?;
    let ku = enclose_ku_range(lambda, e_r, e_k).ok();
    flags.push(Inequality::flag("k_u closed forms agree with the optimizer", ku.as_ref().is_some_and(|k| k.consistent)));
    flags.push(Inequality::flag(
        "W_- and W_+ inside I_lambda",
        orbit.i_lambda.contains_interval(&orbit.w_minus) && orbit.i_lambda.contains_interval(&orbit.w_plus),
    ));
    let accepted = flags.iter().all(|f| f.pass);
    Ok(EnclosureReport {
        lambda,
        e_r,
        e_k,
        i_lambda: orbit.i_lambda,
        w_minus: orbit.w_minus,
        w_plus: orbit.w_plus,
        box_lambda: box_unchecked(lambda, e_r, e_k)?,
        ku_range: ku,
        flags,
        provenance: provenance.into(),
        accepted,
    })
}

/// Inputs of the full pipeline. Decimal inputs are kept as exact rationals.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineConfig {
    #[serde(serialize_with = "ser_rat")]
    pub lambda_max: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub er_coef: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub ek_coef: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub delta: Rational,
    /// Parameter window `W` on which `L_g` is certified.
    #[serde(serialize_with = "ser_rats")]
    pub window: Vec<Rational>,
    /// Remainder order `n` of the certificates (jets through degree `n − 1`).
    pub remainder_order: u32,
    /// Order `n` used in the smallness condition of the global theorem.
    pub smoothness_order: u32,
    /// λ values at which remainder certificates are produced (clamped to `λ_max`).
    #[serde(serialize_with = "ser_rats")]
    pub remainder_lambdas: Vec<Rational>,
    pub grid_points: usize,
    #[serde(serialize_with = "ser_rat")]
    pub grid_min: Rational,
    /// Re-certify the remainder at every grid point.
    pub certify_grid: bool,
    pub bisection_steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let p = |s: &str| parse_rational(s).expect("literal");
        Self {
            lambda_max: p("7.6e-5"),
            er_coef: p("57.1"),
            ek_coef: p("61.9"),
            delta: p("1e-6"),
            window: vec![p("-1e-6"), p("7.61e-5")],
            remainder_order: 6,
            smoothness_order: 3,
            remainder_lambdas: vec![p("1e-5"), p("5e-5"), p("7.6e-5")],
            grid_points: 16,
            grid_min: p("1e-7"),
            certify_grid: false,
            bisection_steps: 8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let zero = Rational::zero();
        if self.lambda_max <= zero || self.er_coef <= zero || self.ek_coef <= zero || self.delta <= zero {
            return Err(Error::Precondition("λ_max, the coefficients and Δ must be positive".into()));
        }
        if self.window.len() != 2 || self.window[0] > self.window[1] {
            return Err(Error::Precondition("the parameter window must be [lo, hi] with lo ≤ hi".into()));
        }
        if self.remainder_order < 3 || self.smoothness_order < 2 {
            return Err(Error::Precondition("remainder order must be ≥ 3 and smoothness order ≥ 2".into()));
        }
        if self.grid_min <= zero {
            return Err(Error::Precondition("the grid must start above 0".into()));
        }
        Ok(())
    }

    /// `E = coef · √λ_max`, uniform in λ.
    pub fn e_r(&self) -> Result<Interval> {
        Ok(ival(&self.er_coef) * ival(&self.lambda_max).sqrt()?)
    }

    pub fn e_k(&self) -> Result<Interval> {
        Ok(ival(&self.ek_coef) * ival(&self.lambda_max).sqrt()?)
    }

    /// Geometric grid of `grid_points` values on `[grid_min, λ_max]`.
    pub fn grid(&self) -> Vec<Rational> {
        let lo = self.grid_min.to_f64().unwrap_or(1e-7);
        let hi = self.lambda_max.to_f64().unwrap_or(lo);
        let n = self.grid_points.max(1);
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.lambda_max.clone()
                } else {
                    let t = i as f64 / (n - 1).max(1) as f64;
                    exact(lo * (hi / lo).powf(t))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffStage {
    pub x: CutoffSpec,
    pub y: CutoffSpec,
    pub kc: CutoffSpec,
    pub l_g: Interval,
    pub l_c: Interval,
}

/// Rational endpoints just outside an interval.
fn outward(i: Interval) -> (Rational, Rational) {
    (exact(i.lo), exact(i.hi))
}

/// Relative outward margin of the `k_c` window `[d₁, d₂]`. The top of `R(𝓘_λ)` at
/// `λ_max` equals `d₂` exactly, so the window needs room for rounding.
pub const KC_MARGIN: f64 = 1e-9;

/// `[d₁, d₂]` with `d₂ = λ₊(1 + 2E_Rλ)`, widened by [`KC_MARGIN`].
pub fn kc_window(lambda_max: Interval, e_r: Interval) -> Result<(Rational, Rational)> {
    let (_, lp) = lambda_pm(lambda_max, e_r)?;
    let wide = (lp + Interval::point(2.0) * e_r * lambda_max * lp) * Interval::point(1.0 + KC_MARGIN);
    Ok((exact(-wide.hi), exact(wide.hi)))
}

/// Cutoffs around `B_{λ_max}` and `[d₁, d₂]`, and certified bounds on `sup‖Dh‖`
/// and `sup‖Dk_c‖`.
pub fn certify_cutoffs(cfg: &PipelineConfig) -> Result<CutoffStage> {
    let lam = ival(&cfg.lambda_max);
    let e_r = cfg.e_r()?;
    let e_k = cfg.e_k()?;
    let b = box_unchecked(lam, e_r, e_k)?;
    let [bx, by] = b.hull();
    let (b1, b2) = outward(bx);
    let (c1, c2) = outward(by);
    let x = CutoffSpec::symmetric(b1, b2, cfg.delta.clone())?;
    let y = CutoffSpec::symmetric(c1, c2, cfg.delta.clone())?;
    let (d1, d2) = kc_window(lam, e_r)?;
    let kc = CutoffSpec::symmetric(d1, d2, cfg.delta.clone())?;
    let layout = Layout::new(1, 2);
    let g = g_jets(&layout, 3)?;
    let window = ival(&cfg.window[0]).hull(&ival(&cfg.window[1]));
    let l_g = bound_composed_nonlinearity(&g, &BoxCutoff(vec![x.clone(), y.clone()]), &[window], 1e-7)?;
    // D[(3/2)φ(x)²] = 3 φ φ′ with φ′ ∈ [0, 1], so it suffices to bound 3|x| on the range of φ
    let l1 = Layout::new(0, 1);
    let three_x = jet_from(&l1, 1, &[((3, 1), &[1])]);
    let l_c = sup_abs_on(&three_x, kc.range_interval(), 1e-9)?;
    Ok(CutoffStage { x, y, kc, l_g, l_c })
}

/// Remainder certificate at one λ and its conversion to the `E·λ|x|` shapes.
#[derive(Clone, Debug, Serialize)]
pub struct RemainderRecord {
    pub lambda: Interval,
    pub m_scale: f64,
    pub x_max: f64,
    pub certificate: BoundCertificate,
    /// Certified `sup |R − P_R|/(λ|x|)` and `sup |D_x(R − P_R)|/λ` over `𝓘_λ`.
    pub e_r_value: Interval,
    pub e_r_derivative: Interval,
    /// Certified `sup |k_u − P_K|/(2λ|x|)` and `sup |D_x(k_u − P_K)|/(2λ)`.
    pub e_k_value: Interval,
    pub e_k_derivative: Interval,
    /// `C ρ_max^{n−1}/λ`, the part of each value that comes from the remainder constants.
    pub conversion_r: f64,
    pub conversion_k: f64,
    pub checks: Vec<Inequality>,
    pub pass: bool,
}

/// `sup_{x ∈ dom} |q(λ, x)|` for a jet on `[λ, x]` at a fixed λ.
fn sup_at_lambda(q: &Jet, lambda: Interval, dom: Interval) -> Result<Interval> {
    let f = |d: &[Interval]| {
        q.eval_interval(&IBox::new(vec![lambda, d[0]])).map(|v| v.abs()).unwrap_or(Interval::point(f64::INFINITY))
    };
    Ok(sup_branch_and_bound(&f, &[dom], 1e-4, 20_000))
}

pub fn lattice_solution(order: u32) -> Result<(ConjugacySolution, LinearSplitting)> {
    let s = RdtSystem::splitting()?;
    let f = u_jets(&Layout::new(1, 2), order.max(3));
    let lc = Layout::new(1, 1);
    let kc = vec![jet_from(&lc, order, &[((3, 2), &[0, 2])])];
    Ok((solve_order_by_order(&f, &s, &kc, order)?, s))
}

pub fn certify_remainder_at(
    lambda: &Rational,
    cfg: &PipelineConfig,
    lipschitz: &GlobalLipschitz,
    solved: &(ConjugacySolution, LinearSplitting),
) -> Result<RemainderRecord> {
    let lam = ival(lambda);
    if lam.lo <= 0.0 {
        return Err(Error::Precondition("remainder certificates need λ > 0".into()));
    }
    let e_r_target = cfg.e_r()?;
    let e_k_target = cfg.e_k()?;
    let (_, lp) = lambda_pm(lam, e_r_target)?;
    let x_max = lp.hi;
    let x_dom = Interval { lo: -x_max, hi: x_max };
    // M = 2^k with M λ ≤ x_max keeps ρ_max = x_max
    let mut m_scale = 1.0f64;
    while (Interval::point(m_scale * 2.0) * lam).certainly_le(&Interval::point(x_max)) && m_scale < 1e12 {
        m_scale *= 2.0;
    }
    let domain = IBox::new(vec![Interval { lo: 0.0, hi: lam.hi }, x_dom]);
    let n = cfg.remainder_order;
    let opts = BoundOptions { n, m_scale, shape: Shape::PhaseVanishing, growth: Growth::Taylor, splits: 8, max_ansatz_iters: 60 };
    let (sol, s) = solved;
    let mut cert = certify_remainder(sol, s, &lipschitz.bound_inputs(), &domain, &opts)?;
    let der = derivative_bound_system(sol, s, &cert, 1)?;
    cert.derivative = Some(der.clone());
    let rho = Interval::point(cert.pieces.rho_max);
    let rho_pow = rho.powi(n - 1);
    let layout = sol.r[0].layout().clone();
    let order = sol.order;
    let dr = sol.r[0].sub(&p_r(&layout, order))?;
    let dk = sol.k[1].sub(&p_k(&layout, order))?;
    let quotient = |d: &Jet| d.divide_by_var(1).ok_or_else(|| Error::Precondition("difference does not vanish at x = 0".into()));
    let value = |d: &Jet, c: f64| -> Result<Interval> {
        Ok((sup_at_lambda(&quotient(d)?, lam, x_dom)? + Interval::point(c) * rho_pow).checked_div(&lam)?)
    };
    let slope = |d: &Jet, c: f64| -> Result<Interval> {
        Ok((sup_at_lambda(&d.derivative(1)?, lam, x_dom)? + Interval::point(c) * rho_pow).checked_div(&lam)?)
    };
    let e_r_value = value(&dr, cert.c[0])?;
    let e_r_derivative = slope(&dr, der.c[0])?;
    let e_k_value = value(&dk, cert.c[1])? * 0.5;
    let e_k_derivative = slope(&dk, der.c[1])? * 0.5;
    let conversion_r = (Interval::point(cert.c[0].max(der.c[0])) * rho_pow).checked_div(&lam)?.hi;
    let conversion_k = (Interval::point(cert.c[1].max(der.c[1])) * rho_pow).checked_div(&lam)?.hi;
    // R(𝓘_λ) must stay where k_c = (3/2)x², i.e. inside [d₁, d₂] built at λ_max
    let (_, d2) = kc_window(ival(&cfg.lambda_max), e_r_target)?;
    let d2 = ival(&d2);
    let p_r_edge = (Interval::point(-1.0) + lam) * (-lp) - (-lp).powi(3) * 4.0;
    let r_top = p_r_edge + e_r_target * lam * lp;
    let mut checks = vec![
        Inequality::le("sup|R - P_R|/(lambda|x|) <= E_R", e_r_value, e_r_target),
        Inequality::le("sup|D(R - P_R)|/lambda <= E_R", e_r_derivative, e_r_target),
        Inequality::le("sup|k_u - P_K|/(2 lambda|x|) <= E_K", e_k_value, e_k_target),
        Inequality::le("sup|D(k_u - P_K)|/(2 lambda) <= E_K", e_k_derivative, e_k_target),
        Inequality::le("R(I_lambda) inside [d1, d2]", r_top, d2),
    ];
    checks.push(Inequality::flag("fixed-point containment re-verified", cert.verify()));
    let pass = checks.iter().all(|c| c.pass);
    Ok(RemainderRecord {
        lambda: lam,
        m_scale,
        x_max,
        certificate: cert,
        e_r_value,
        e_r_derivative,
        e_k_value,
        e_k_derivative,
        conversion_r,
        conversion_k,
        checks,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: u8,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Inequality>,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageFailure {
    pub stage: u8,
    pub inequality: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineBundle {
    pub config: PipelineConfig,
    pub e_r: Interval,
    pub e_k: Interval,
    pub stages: Vec<StageRecord>,
    pub cutoffs: Option<CutoffStage>,
    pub lipschitz: Option<GlobalLipschitz>,
    pub remainder: Vec<RemainderRecord>,
    pub reports: Vec<EnclosureReport>,
    pub failures: Vec<StageFailure>,
    /// Largest λ_max (found by bisection) for which stages 1 to 5 pass, when the requested one fails.
    pub largest_certifiable: Option<f64>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl PipelineBundle {
    pub fn first_failure(&self) -> Option<&StageFailure> {
        self.failures.first()
    }
}

fn stage(stage: u8, name: &str, checks: Vec<Inequality>, detail: Option<String>) -> StageRecord {
    let pass = detail.is_none() && checks.iter().all(|c| c.pass);
    StageRecord { stage, name: name.into(), pass, checks, detail }
}

struct CoreRun {
    stages: Vec<StageRecord>,
    cutoffs: Option<CutoffStage>,
    lipschitz: Option<GlobalLipschitz>,
    remainder: Vec<RemainderRecord>,
}

/// Stages 1 to 5 for one configuration.
fn run_core(cfg: &PipelineConfig, remainder_lambdas: &[Rational]) -> Result<CoreRun> {
    let lam = ival(&cfg.lambda_max);
    let e_r = cfg.e_r()?;
    let e_k = cfg.e_k()?;
    let mut stages = Vec::new();

    // (1)-(2) cutoffs and the certified L_g, L_c
    let l_g_bound = Interval::from_ratio(13, 100);
    let l_c_bound = Interval::from_ratio(17, 1000);
    let cutoffs = match certify_cutoffs(cfg) {
        Ok(c) => {
            stages.push(stage(1, "cutoffs", vec![], None));
            stages.push(stage(
                2,
                "derivative bounds of the cut-off nonlinearities",
                vec![Inequality::lt("L_g < 0.13", c.l_g, l_g_bound), Inequality::lt("L_c < 0.017", c.l_c, l_c_bound)],
                None,
            ));
            Some(c)
        }
        Err(e) => {
            stages.push(stage(1, "cutoffs", vec![], Some(e.to_string())));
            None
        }
    };

    // (3) rate conditions and smallness of the global constants at the stated L_g, L_c
    let s = RdtSystem::splitting()?;
    let n3 = cfg.smoothness_order;
    let rates = check_rate_conditions(&s, n3);
    let lipschitz = global_lipschitz(&s.norms, l_g_bound, l_c_bound, n3, !s.blocks.unstable.is_empty(), !s.blocks.stable.is_empty());
    let mut checks = vec![Inequality::lt("rate condition with parameters", rates.worst_3a(), Interval::ONE)];
    let lipschitz = match lipschitz {
        Ok(l) => {
            checks.push(Inequality::lt("|A_u^-1|((|A_c| + L_r)^n + L_g + L_u) < 1", l.unstable_condition, Interval::ONE));
            stages.push(stage(3, "smallness condition", checks, None));
            Some(l)
        }
        Err(e) => {
            stages.push(stage(3, "smallness condition", checks, Some(e.to_string())));
            None
        }
    };

    // (4) remainder certificates converted to the E·λ|x| shapes
    let mut remainder = Vec::new();
    match &lipschitz {
        Some(l) => {
            let solved = lattice_solution(cfg.remainder_order - 1)?;
            let mut checks = Vec::new();
            let mut detail = None;
            for lam_i in remainder_lambdas.iter().filter(|x| **x <= cfg.lambda_max) {
                match certify_remainder_at(lam_i, cfg, l, &solved) {
                    Ok(r) => {
                        for c in &r.checks {
                            let mut c = c.clone();
                            c.name = format!("{} at lambda = {}", c.name, format_rational(lam_i));
                            checks.push(c);
                        }
                        remainder.push(r);
                    }
                    Err(e) => {
                        detail = Some(format!("lambda = {}: {e}", format_rational(lam_i)));
                        break;
                    }
                }
            }
            stages.push(stage(4, "remainder certificates", checks, detail));
        }
        None => stages.push(stage(4, "remainder certificates", vec![], Some("no global constants".into()))),
    }

    // (5) hypotheses of the orbit and k_u enclosures
    let mut flags = hypothesis_flags(lam, e_r, e_k);
    flags[2].name = "lambda_max < 1/43".into();
    stages.push(stage(5, "enclosure hypotheses", flags, None));
    Ok(CoreRun { stages, cutoffs, lipschitz, remainder })
}

fn failures(stages: &[StageRecord]) -> Vec<StageFailure> {
    let mut out = Vec::new();
    for s in stages.iter().filter(|s| !s.pass) {
        if let Some(d) = &s.detail {
            out.push(StageFailure { stage: s.stage, inequality: d.clone() });
        }
        for c in s.checks.iter().filter(|c| !c.pass) {
            out.push(StageFailure { stage: s.stage, inequality: c.name.clone() });
        }
    }
    out
}

/// Runs the proof pipeline; failing inequalities are recorded, not raised.
pub fn certify_pipeline(cfg: &PipelineConfig) -> Result<PipelineBundle> {
    cfg.validate()?;
    let e_r = cfg.e_r()?;
    let e_k = cfg.e_k()?;
    let core = run_core(cfg, &cfg.remainder_lambdas)?;
    let mut stages = core.stages;

    // (6) reports over the λ grid
    let grid = cfg.grid();
    let reports: Vec<Result<EnclosureReport>> = grid
        .par_iter()
        .map(|l| {
            let provenance = match (&core.lipschitz, cfg.certify_grid) {
                (Some(lip), true) => {
                    let solved = lattice_solution(cfg.remainder_order - 1)?;
                    let ok = certify_remainder_at(l, cfg, lip, &solved).map(|r| r.pass).unwrap_or(false);
                    if ok { "certificate" } else { "ansatz (certificate failed)" }
                }
                _ => "ansatz",
            };
            enclosure_report(ival(l), e_r, e_k, provenance)
        })
        .collect();
    let mut grid_checks = Vec::new();
    let mut ok_reports = Vec::new();
    for (l, r) in grid.iter().zip(reports) {
        let name = format!("report accepted at lambda = {:e}", l.to_f64().unwrap_or(f64::NAN));
        match r {
            Ok(r) => {
                grid_checks.push(Inequality::flag(&name, r.accepted));
                ok_reports.push(r);
            }
            Err(e) => grid_checks.push(Inequality::flag(&format!("{name} ({e})"), false)),
        }
    }
    let reports = ok_reports;
    stages.push(stage(6, "enclosure reports", grid_checks, None));

    let failures = failures(&stages);
    let passed = failures.is_empty();
    let largest_certifiable = if passed { cfg.lambda_max.to_f64() } else { bisect_lambda_max(cfg) };
    let notes = vec![
        "E_R and E_K are uniform: coef * sqrt(lambda_max) at every lambda of the grid.".into(),
        "d2 = lambda_+ + 2 E_R lambda lambda_+ (symmetric with d1) so that R(I_lambda) lies where k_c = (3/2)x^2.".into(),
        format!(
            "remainder certificates use jets through degree {} in (lambda, x) with the phase-vanishing shape; the E shapes are obtained by dividing by lambda|x| at fixed lambda",
            cfg.remainder_order - 1
        ),
    ];
    Ok(PipelineBundle {
        config: cfg.clone(),
        e_r,
        e_k,
        stages,
        cutoffs: core.cutoffs,
        lipschitz: core.lipschitz,
        remainder: core.remainder,
        reports,
        failures,
        largest_certifiable,
        notes,
        passed,
    })
}

/// Largest λ_max below the configured one for which stages 1 to 5 pass, with the
/// remainder checked at λ_max itself.
pub fn bisect_lambda_max(cfg: &PipelineConfig) -> Option<f64> {
    let passes = |lm: &Rational| {
        let mut c = cfg.clone();
        c.lambda_max = lm.clone();
        // a smaller λ_max only needs the parameter window up to itself
        let top = lm * rat(1001, 1000);
        if top < c.window[1] {
            c.window[1] = top.max(c.window[0].clone());
        }
        run_core(&c, std::slice::from_ref(lm)).map(|r| r.stages.iter().all(|s| s.pass)).unwrap_or(false)
    };
    let hi0 = cfg.lambda_max.clone();
    let mut lo = &hi0 / rat(1024, 1);
    if !passes(&lo) {
        return None;
    }
    let mut hi = hi0;
    for _ in 0..cfg.bisection_steps {
        // geometric midpoint, rounded to a double
        let mid = exact((lo.to_f64()? * hi.to_f64()?).sqrt());
        if passes(&mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.to_f64()
}

/// Enclosure reports (ansatz constants) over a λ grid, computed in parallel.
pub fn sweep_reports(grid: &[Rational], e_r: Interval, e_k: Interval) -> Result<Vec<EnclosureReport>> {
    grid.par_iter().map(|l| enclosure_report(ival(l), e_r, e_k, "ansatz")).collect()
}

/// CSV rows `(λ, W_-, W_+, box corners, accepted)`.
pub fn reports_csv(reports: &[EnclosureReport]) -> String {
    let mut out = String::from("lambda,w_minus_lo,w_minus_hi,w_plus_lo,w_plus_hi,c_lo,c_hi,u_lo,u_hi,accepted\n");
    for r in reports {
        let [c, u] = r.box_lambda.hull();
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
            r.lambda.mid(),
            r.w_minus.lo,
            r.w_minus.hi,
            r.w_plus.lo,
            r.w_plus.hi,
            c.lo,
            c.hi,
            u.lo,
            u.hi,
            r.accepted
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn linearization_and_charts() {
        let sys = build_rdt(rat(0, 1));
        assert_eq!(sys.linearization(), RMatrix::from_i64(&[&[0, 1], &[-2, -3]]));
        assert_eq!(sys.u_map(&[rat(0, 1), rat(0, 1)]), [rat(0, 1), rat(0, 1)]);
        let s = RdtSystem::splitting().unwrap();
        assert_eq!(s.block_matrix(), RMatrix::from_i64(&[&[-1, 0], &[0, -2]]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sys = build_rdt(rat(3, 100_000));
        for _ in 0..100 {
            let p = [rat(rng.gen_range(-1000..1000), 7919), rat(rng.gen_range(-1000..1000), 7919)];
            assert_eq!(RdtSystem::to_u(&RdtSystem::to_xy(&p)), p);
            let lhs = RdtSystem::to_xy(&sys.u_map(&p));
            let rhs = sys.xy_map(&RdtSystem::to_xy(&p));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn xy_jets_match_pointwise_map() {
        let l = Layout::new(1, 2);
        let f = xy_jets(&l, 3).unwrap();
        let sys = build_rdt(rat(1, 50));
        let p = [rat(1, 3), rat(-2, 7)];
        let v = sys.xy_map(&p);
        let pt = [rat(1, 50), p[0].clone(), p[1].clone()];
        assert_eq!(f[0].eval_rational(&pt).unwrap(), v[0]);
        assert_eq!(f[1].eval_rational(&pt).unwrap(), v[1]);
    }

    /// Independent check through the generalized binomial coefficients of √(1 + u).
    fn binomial_series(order: usize) -> Vec<Rational> {
        // √(1+u) = Σ C(1/2, j) u^j with u = 6λ + λ²
        let half = rat(1, 2);
        let mut binom = vec![rat(1, 1)];
        for j in 1..=order {
            let prev = binom[j - 1].clone();
            binom.push(prev * (&half - rat(j as i64 - 1, 1)) / rat(j as i64, 1));
        }
        let mut out = vec![Rational::zero(); order + 1];
        // u^j = λ^j (6 + λ)^j
        for (j, b) in binom.iter().enumerate() {
            for i in 0..=j {
                let deg = j + i;
                if deg > order {
                    continue;
                }
                let c = num_integer::binomial(j as i64, i as i64);
                let six = num_traits::pow(rat(6, 1), j - i);
                out[deg] += b * rat(c, 1) * six;
            }
        }
        out[0] += rat(-1, 1) - rat(1, 2);
        out[1] += rat(1, 1) - rat(3, 2);
        for k in 0..=order {
            if k >= 2 {
                out[k] = &out[k] / rat(2, 1);
            }
        }
        out[0] = rat(-1, 1);
        out[1] = rat(1, 1);
        out
    }

    #[test]
    fn multiplier_series_and_closed_form() {
        let s = dr_at_zero_series(3);
        assert_eq!(s, vec![rat(-1, 1), rat(1, 1), rat(-2, 1), rat(6, 1)]);
        assert_eq!(s, binomial_series(3));
        assert!(dr_at_zero(Interval::ZERO).unwrap().contains(-1.0));
        let lam = 1e-3;
        let v = dr_at_zero(Interval::point(lam)).unwrap();
        let series = -1.0 + lam - 2.0 * lam * lam + 6.0 * lam.powi(3);
        assert!((v.mid() - series).abs() < 1e-10);
        assert!(dr_at_zero(Interval::point(-3.0)).is_err());
    }

    #[test]
    fn center_orbit_examples() {
        let lam = Interval::from_decimal("7.6e-5").unwrap();
        let e_r = Interval::point(57.1) * lam.sqrt().unwrap();
        assert!((e_r.mid() - 0.49779).abs() < 1e-5);
        let c = enclose_center_orbit(lam, e_r, OrbitMode::Dynamics).unwrap();
        assert!((c.w_plus.lo - 3.089023e-3).abs() < 1e-8, "{}", c.w_plus);
        assert!((c.w_plus.hi - 5.334598e-3).abs() < 1e-8, "{}", c.w_plus);
        assert!(c.i_lambda.contains_interval(&c.w_plus) && c.i_lambda.contains_interval(&c.w_minus));
        let z = enclose_center_orbit(lam, Interval::ZERO, OrbitMode::Existence).unwrap();
        assert!(z.w_plus.width() < 1e-15 && z.w_plus.contains(lam.mid().sqrt() / 2.0));
        assert!(enclose_center_orbit(lam, Interval::ONE, OrbitMode::Existence).is_err());
        assert!(enclose_center_orbit(lam, Interval::point(0.7), OrbitMode::Dynamics).is_err());
    }

    #[test]
    fn ku_range_closed_forms_match_optimizer() {
        let lam_max = Interval::from_decimal("7.6e-5").unwrap();
        let e_r = Interval::point(57.1) * lam_max.sqrt().unwrap();
        let e_k = Interval::point(61.9) * lam_max.sqrt().unwrap();
        assert!((e_k.mid() - 0.53963).abs() < 1e-5);
        for i in 1..=10 {
            let lam = lam_max * (i as f64 / 10.0);
            let k = enclose_ku_range(lam, e_r, e_k).unwrap();
            assert!(k.consistent, "{i}: {k:?}");
            assert!(k.inf.hi < 0.0 && k.sup.lo > 0.0);
        }
        let k = enclose_ku_range(Interval::point(1e-14), Interval::ZERO, Interval::ZERO).unwrap();
        assert!(k.inf.mag() < 1e-13 && k.sup.mag() < 1e-13);
        assert!(enclose_ku_range(Interval::point(0.03), e_r, e_k).is_err());
    }

    #[test]
    fn box_corners_and_monotonicity() {
        let e_r = Interval::point(0.3);
        let e_k = Interval::point(0.4);
        let lam = Interval::point(5e-5);
        let b = build_box(lam, e_r, e_k).unwrap();
        let lp = (1.3f64).sqrt() * (5e-5f64).sqrt() / 2.0;
        let shift = 3.0 * 1.3 * 5e-5 / 8.0;
        assert!(b.c_plus.contains(lp + shift) && b.c_minus.contains(-lp + shift));
        let mut prev: Option<[Interval; 2]> = None;
        for k in 1..=10 {
            let h = build_box(Interval::point(7.6e-6 * k as f64), e_r, e_k).unwrap().hull();
            if let Some(p) = prev {
                assert!(h[0].contains_interval(&p[0]) && h[1].contains_interval(&p[1]));
            }
            prev = Some(h);
        }
        let tiny = build_box(Interval::point(1e-16), Interval::ZERO, Interval::ZERO).unwrap().hull();
        assert!(tiny[0].mag() < 1e-7 && tiny[1].mag() < 1e-12);
    }

    #[test]
    fn grid_is_geometric_and_ends_at_lambda_max() {
        let cfg = PipelineConfig::default();
        let g = cfg.grid();
        assert_eq!(g.len(), 16);
        assert_eq!(g[15], cfg.lambda_max);
        let r1 = (&g[2] / &g[1]).to_f64().unwrap();
        let r2 = (&g[5] / &g[4]).to_f64().unwrap();
        assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn default_pipeline_passes() {
        let b = certify_pipeline(&PipelineConfig::default()).unwrap();
        assert!(b.passed, "{:?}", b.failures);
        assert_eq!(b.stages.len(), 6);
        let last = b.remainder.last().unwrap();
        assert!(last.e_r_derivative.hi < b.e_r.lo && last.e_k_derivative.hi < b.e_k.lo);
        let c = b.cutoffs.unwrap();
        assert!(c.l_g.hi < 0.13 && c.l_c.hi < 0.017);
    }

    #[test]
    fn too_large_lambda_fails_with_named_inequality() {
        let mut cfg = PipelineConfig::default();
        cfg.lambda_max = rat(1, 10_000);
        cfg.bisection_steps = 2;
        let b = certify_pipeline(&cfg).unwrap();
        assert!(!b.passed);
        assert!(b.failures.iter().any(|f| f.stage == 5 && f.inequality == "E_R < 1/2"));
        assert!(b.largest_certifiable.unwrap() < 1e-4);
    }
}
