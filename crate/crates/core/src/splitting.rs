//! Center/unstable/stable splitting of a rational linear map, the rate
//! conditions on its block norms, and the parameter-extended linearization.

use std::ops::Range;

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polyalg::{format_rational, int, rat, Interval, RMatrix, Rational, UPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralClass {
    Center,
    Unstable,
    Stable,
}

/// Certified location of one eigenvalue (counted with algebraic multiplicity).
#[derive(Clone, Debug, Serialize)]
pub struct EigenEnclosure {
    pub class: SpectralClass,
    pub re: Interval,
    pub im: Interval,
    pub modulus: Interval,
    #[serde(serialize_with = "ser_opt_rational")]
    pub exact: Option<Rational>,
    pub multiplicity: usize,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

/// Operator norms (max-norm) of the diagonal blocks. Empty blocks have norm zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockNorms {
    pub a_c: Interval,
    pub a_u: Interval,
    pub a_s: Interval,
    pub a_c_inv: Interval,
    pub a_u_inv: Interval,
}

impl BlockNorms {
    pub fn from_f64(a_c: f64, a_u: f64, a_s: f64, a_c_inv: f64, a_u_inv: f64) -> Self {
        let p = Interval::point;
        Self { a_c: p(a_c), a_u: p(a_u), a_s: p(a_s), a_c_inv: p(a_c_inv), a_u_inv: p(a_u_inv) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Blocks {
    pub center: Range<usize>,
    pub unstable: Range<usize>,
    pub stable: Range<usize>,
}

impl Blocks {
    pub fn hyperbolic(&self) -> Range<usize> {
        self.unstable.start..self.stable.end
    }
}

/// `T A T^{-1}` is block diagonal with blocks ordered center, unstable, stable.
#[derive(Clone, Debug, Serialize)]
pub struct LinearSplitting {
    pub dim: usize,
    pub a: RMatrix,
    pub change_of_basis: RMatrix,
    pub change_of_basis_inv: RMatrix,
    pub blocks: Blocks,
    pub eigenvalues: Vec<EigenEnclosure>,
    pub norms: BlockNorms,
}

impl LinearSplitting {
    /// `T A T^{-1}`.
    pub fn block_matrix(&self) -> RMatrix {
        self.change_of_basis.mul(&self.a).and_then(|m| m.mul(&self.change_of_basis_inv)).expect("square")
    }

    pub fn a_c(&self) -> RMatrix {
        let b = self.block_matrix();
        b.submatrix(self.blocks.center.clone(), self.blocks.center.clone())
    }

    pub fn a_u(&self) -> RMatrix {
        let b = self.block_matrix();
        b.submatrix(self.blocks.unstable.clone(), self.blocks.unstable.clone())
    }

    pub fn a_s(&self) -> RMatrix {
        let b = self.block_matrix();
        b.submatrix(self.blocks.stable.clone(), self.blocks.stable.clone())
    }

    pub fn a_h(&self) -> RMatrix {
        let h = self.blocks.hyperbolic();
        self.block_matrix().submatrix(h.clone(), h)
    }

    pub fn num_center(&self) -> usize {
        self.blocks.center.len()
    }

    fn is_block_diagonal(&self) -> bool {
        let b = self.block_matrix();
        let which = |i: usize| {
            if self.blocks.center.contains(&i) {
                0
            } else if self.blocks.unstable.contains(&i) {
                1
            } else {
                2
            }
        };
        (0..self.dim).all(|i| (0..self.dim).all(|j| which(i) == which(j) || b.get(i, j).is_zero()))
    }
}

fn block_norms(b: &RMatrix, blocks: &Blocks) -> Result<BlockNorms> {
    let sub = |r: &Range<usize>| b.submatrix(r.clone(), r.clone());
    let norm = |m: &RMatrix| if m.rows() == 0 { Interval::ZERO } else { m.inf_norm_interval() };
    let inv_norm = |m: &RMatrix| -> Result<Interval> {
        if m.rows() == 0 {
            return Ok(Interval::ZERO);
        }
        Ok(m.inverse()?.inf_norm_interval())
    };
    let (c, u, s) = (sub(&blocks.center), sub(&blocks.unstable), sub(&blocks.stable));
    Ok(BlockNorms { a_c: norm(&c), a_u: norm(&u), a_s: norm(&s), a_c_inv: inv_norm(&c)?, a_u_inv: inv_norm(&u)? })
}

/// Splits the spectrum of `a` into modulus `= 1`, `> 1` and `< 1`.
///
/// Rational eigenvalues and the cyclotomic factors `t^2+1`, `t^2±t+1` are
/// handled exactly. The remaining roots are enclosed by Weierstrass disks; they
/// must all fall into one class so the splitting stays defined over the rationals.
pub fn split_spectrum(a: &RMatrix) -> Result<LinearSplitting> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
    }
    let n = a.rows();
    let chi = a.charpoly()?;
    let mut rest = chi.clone();
    let mut eigen = Vec::new();
    // class -> annihilating factor of the corresponding generalized eigenspace
    let mut factors = [UPoly::one(), UPoly::one(), UPoly::one()];
    let slot = |c: SpectralClass| match c {
        SpectralClass::Center => 0,
        SpectralClass::Unstable => 1,
        SpectralClass::Stable => 2,
    };

    for r in rational_roots(&chi) {
        let lin = UPoly::linear_root(&r);
        let mut m = 0;
        loop {
            let (q, rem) = rest.divrem(&lin);
            if !rem.is_zero() {
                break;
            }
            rest = q;
            m += 1;
        }
        let modulus = r.abs();
        let class = match modulus.cmp(&Rational::one()) {
            std::cmp::Ordering::Equal => SpectralClass::Center,
            std::cmp::Ordering::Greater => SpectralClass::Unstable,
            std::cmp::Ordering::Less => SpectralClass::Stable,
        };
        let iv = Interval::from_rational(&r);
        eigen.push(EigenEnclosure {
            class,
            re: iv,
            im: Interval::ZERO,
            modulus: iv.abs(),
            exact: Some(r.clone()),
            multiplicity: m,
        });
        let k = slot(class);
        factors[k] = factors[k].mul(&lin.pow(m));
    }

    let cyclotomic: [(&[i64], f64); 3] = [(&[1, 0, 1], 0.0), (&[1, 1, 1], -0.5), (&[1, -1, 1], 0.5)];
    for (coeffs, re) in cyclotomic {
        let f = UPoly::new(coeffs.iter().map(|&c| int(c)).collect());
        let mut m = 0;
        while rest.degree() >= 2 {
            let (q, rem) = rest.divrem(&f);
            if !rem.is_zero() {
                break;
            }
            rest = q;
            m += 1;
        }
        if m > 0 {
            let im = (1.0 - re * re).sqrt();
            for sign in [1.0, -1.0] {
                eigen.push(EigenEnclosure {
                    class: SpectralClass::Center,
                    re: Interval::point(re),
                    im: Interval::hull_of((sign * im).next_down(), (sign * im).next_up()),
                    modulus: Interval::ONE,
                    exact: None,
                    multiplicity: m,
                });
            }
            factors[0] = factors[0].mul(&f.pow(m));
        }
    }

    if rest.degree() > 0 {
        let sq = squarefree(&rest);
        let encl = enclose_roots(&sq)?;
        let mut class = None;
        for (z, radius) in &encl {
            let modulus = complex_modulus(z) + Interval::new(-radius, *radius)?;
            let c = if modulus.certainly_lt_f64(1.0) {
                SpectralClass::Stable
            } else if modulus.lo > 1.0 {
                SpectralClass::Unstable
            } else {
                return Err(Error::IndeterminateSplitting(format!(
                    "eigenvalue near {:.6}{:+.6}i has modulus enclosure {modulus} straddling 1",
                    z.re, z.im
                )));
            };
            if class.is_some_and(|k| k != c) {
                return Err(Error::IndeterminateSplitting(
                    "an irreducible irrational factor of the characteristic polynomial has roots on both sides of the unit circle".into(),
                ));
            }
            class = Some(c);
            let mult = multiplicity_of(&rest, &sq);
            eigen.push(EigenEnclosure {
                class: c,
                re: Interval::new(z.re - radius, z.re + radius)?,
                im: Interval::new(z.im - radius, z.im + radius)?,
                modulus,
                exact: None,
                multiplicity: mult,
            });
        }
        let k = slot(class.expect("nonempty root set"));
        factors[k] = factors[k].mul(&rest);
    }

    let mut columns: Vec<Vec<Rational>> = Vec::new();
    let mut sizes = [0usize; 3];
    for (k, f) in factors.iter().enumerate() {
        if f.degree() == 0 {
            continue;
        }
        let basis = a.poly_eval(f)?.nullspace();
        sizes[k] = basis.len();
        columns.extend(basis);
    }
    if columns.len() != n {
        return Err(Error::IndeterminateSplitting(format!(
            "generalized eigenspaces span {} of {n} dimensions",
            columns.len()
        )));
    }
    let t_inv = RMatrix::from_columns(&columns, n);
    let t = t_inv.inverse()?;
    let blocks = Blocks {
        center: 0..sizes[0],
        unstable: sizes[0]..sizes[0] + sizes[1],
        stable: sizes[0] + sizes[1]..n,
    };
    let b = t.mul(a)?.mul(&t_inv)?;
    let norms = block_norms(&b, &blocks)?;
    let s = LinearSplitting {
        dim: n,
        a: a.clone(),
        change_of_basis: t,
        change_of_basis_inv: t_inv,
        blocks,
        eigenvalues: eigen,
        norms,
    };
    debug_assert!(s.is_block_diagonal());
    Ok(s)
}

fn squarefree(p: &UPoly) -> UPoly {
    let g = p.gcd(&p.derivative());
    p.divrem(&g).0.monic()
}

fn multiplicity_of(p: &UPoly, sq: &UPoly) -> usize {
    let mut q = p.clone();
    let mut m = 0;
    loop {
        let (d, r) = q.divrem(sq);
        if !r.is_zero() || d.degree() + sq.degree() != q.degree() {
            break;
        }
        q = d;
        m += 1;
        if q.degree() == 0 {
            break;
        }
    }
    m.max(1)
}

fn lcm_denominators(p: &UPoly) -> BigInt {
    p.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

fn small_divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let mut out = vec![BigInt::one()];
    let Some(v) = n.to_u64() else {
        return out;
    };
    let mut d = 2u64;
    while d * d <= v && d <= 1_000_000 {
        if v % d == 0 {
            out.push(BigInt::from(d));
            out.push(BigInt::from(v / d));
        }
        d += 1;
    }
    if v > 1 {
        out.push(BigInt::from(v));
    }
    out.sort();
    out.dedup();
    out
}

/// Rational roots of `p`: numerical roots rounded against the admissible
/// denominators (divisors of the leading coefficient), then checked exactly.
pub fn rational_roots(p: &UPoly) -> Vec<Rational> {
    if p.degree() == 0 {
        return Vec::new();
    }
    let sq = squarefree(p);
    let mut roots = Vec::new();
    if !sq.coeffs[0].is_zero() || sq.degree() > 0 {
        if sq.eval(&Rational::zero()).is_zero() {
            roots.push(Rational::zero());
        }
    }
    let l = lcm_denominators(&sq);
    let lead = (sq.lead() * Rational::from_integer(l)).to_integer();
    let approx = durand_kerner(&sq.to_f64());
    for z in approx {
        if z.im.abs() > 1e-4 * (1.0 + z.re.abs()) {
            continue;
        }
        for q in small_divisors(&lead) {
            let qf = q.to_f64().unwrap_or(f64::INFINITY);
            let pnum = (z.re * qf).round();
            if !pnum.is_finite() {
                continue;
            }
            let cand = Rational::new(BigInt::from(pnum as i64), q.clone());
            if sq.eval(&cand).is_zero() && !roots.contains(&cand) {
                roots.push(cand);
            }
        }
    }
    roots.sort();
    roots
}

/// Simultaneous Newton (Weierstrass/Durand-Kerner) iteration on the monic
/// normalization of `coeffs` (increasing degree).
fn durand_kerner(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let d = coeffs.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    let c: Vec<f64> = coeffs.iter().map(|v| v / lead).collect();
    let bound = 1.0 + c[..d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..d).map(|k| seed.powu(k as u32) * bound).collect();
    let eval = |x: Complex<f64>| c.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &v| acc * x + v);
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..d {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let w = eval(z[i]) / den;
            z[i] -= w;
            delta = delta.max(w.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    // polish real roots
    for zi in &mut z {
        if zi.im.abs() < 1e-9 * (1.0 + zi.re.abs()) {
            zi.im = 0.0;
        }
    }
    z
}

fn to_exact(z: &Complex<f64>) -> Complex<Rational> {
    Complex::new(Rational::from_float(z.re).unwrap(), Rational::from_float(z.im).unwrap())
}

fn complex_modulus(z: &Complex<f64>) -> Interval {
    let e = to_exact(z);
    let sq = &e.re * &e.re + &e.im * &e.im;
    Interval::from_rational(&sq).sqrt().expect("nonnegative")
}

/// Approximate roots with certified inclusion radii: each disk of radius
/// `d |W_i|` about `z_i` holds a root, and pairwise disjoint disks hold one each.
fn enclose_roots(p: &UPoly) -> Result<Vec<(Complex<f64>, f64)>> {
    let m = p.monic();
    let d = m.degree();
    let z = durand_kerner(&m.to_f64());
    let exact: Vec<Complex<Rational>> = z.iter().map(to_exact).collect();
    let mut radii = Vec::with_capacity(d);
    for i in 0..d {
        let fz = m.coeffs.iter().rev().fold(Complex::new(Rational::zero(), Rational::zero()), |acc, c| {
            acc * exact[i].clone() + Complex::new(c.clone(), Rational::zero())
        });
        let mut den = Complex::new(Rational::one(), Rational::zero());
        for j in 0..d {
            if j != i {
                den = den * (exact[i].clone() - exact[j].clone());
            }
        }
        let den_sq = &den.re * &den.re + &den.im * &den.im;
        if den_sq.is_zero() {
            return Err(Error::IndeterminateSplitting("coincident root approximations".into()));
        }
        let w_sq = (&fz.re * &fz.re + &fz.im * &fz.im) / den_sq;
        let w = Interval::from_rational(&w_sq).sqrt()?;
        radii.push((w * (d as f64)).hi);
    }
    for i in 0..d {
        for j in i + 1..d {
            let dist = complex_modulus(&(z[i] - z[j]));
            if !(Interval::point(radii[i]) + Interval::point(radii[j])).certainly_lt(&dist) {
                return Err(Error::IndeterminateSplitting("root inclusion disks overlap".into()));
            }
        }
    }
    Ok(z.into_iter().zip(radii).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub value: Interval,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub n: u32,
    pub checks: Vec<ConditionCheck>,
    /// `||A_c^{-1}||^k ||A_s|| < 1` and `||A_u^{-1}|| ||A_c||^k < 1` for all `1 <= k <= n`.
    pub plain: bool,
    /// Same with `max{1, .}` around the center norms, at exponent `n`.
    pub with_parameters: bool,
}

impl RateReport {
    pub fn worst_3a(&self) -> Interval {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with("3a"))
            .map(|c| c.value)
            .fold(Interval::ZERO, |a, b| a.max_with(&b))
    }
}

pub fn check_rate_conditions(s: &LinearSplitting, n: u32) -> RateReport {
    check_rate_conditions_norms(&s.norms, n)
}

pub fn check_rate_conditions_norms(norms: &BlockNorms, n: u32) -> RateReport {
    let worst = |f: &dyn Fn(u32) -> Interval| (1..=n.max(1)).map(f).fold(Interval::ZERO, |a, b| a.max_with(&b));
    let stable = worst(&|k| norms.a_c_inv.powi(k) * norms.a_s);
    let unstable = worst(&|k| norms.a_u_inv * norms.a_c.powi(k));
    let one = Interval::ONE;
    let stable_a = norms.a_c_inv.max_with(&one).powi(n) * norms.a_s;
    let unstable_a = norms.a_u_inv * norms.a_c.max_with(&one).powi(n);
    let mk = |name: &str, v: Interval| ConditionCheck { name: name.into(), value: v, pass: v.certainly_lt_f64(1.0) };
    let checks = vec![
        mk("3.stable", stable),
        mk("3.unstable", unstable),
        mk("3a.stable", stable_a),
        mk("3a.unstable", unstable_a),
    ];
    let plain = checks[0].pass && checks[1].pass;
    let with_parameters = checks[2].pass && checks[3].pass;
    RateReport { n, checks, plain, with_parameters }
}

/// The linearization `[[Id, 0], [C, A]]` of the system with parameters as
/// trivial state variables, written in coordinates `(mu, x_c, x_u, x_s)` where
/// a point is `sum mu_i (e_i, x_i) + (0, x)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtendedSystem {
    pub base: LinearSplitting,
    pub k: usize,
    pub c: RMatrix,
    /// `x_i`, `y_i` in the original coordinates of `X`.
    #[serde(serialize_with = "ser_vecs")]
    pub x_vecs: Vec<Vec<Rational>>,
    #[serde(serialize_with = "ser_vecs")]
    pub y_vecs: Vec<Vec<Rational>>,
    #[serde(serialize_with = "ser_rational")]
    pub m: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub c_x: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub c_y: Rational,
    /// Center block of the extended map in `(mu, x_c)` coordinates and its inverse.
    pub a_c_tilde: RMatrix,
    pub a_c_tilde_inv: RMatrix,
    pub extended_splitting: LinearSplitting,
}

fn ser_vecs<S: serde::Serializer>(v: &[Vec<Rational>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strs: Vec<Vec<String>> = v.iter().map(|r| r.iter().map(format_rational).collect()).collect();
    strs.serialize(s)
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

impl ExtendedSystem {
    /// Norm bounds of the extended blocks with the parameter norm `M sum |mu_i|`.
    pub fn norms(&self) -> BlockNorms {
        let b = &self.base.norms;
        let one = Interval::ONE;
        let cy_over_m = Interval::from_rational(&(&self.c_y / &self.m));
        BlockNorms {
            a_c: (b.a_c + cy_over_m).max_with(&one),
            a_c_inv: (b.a_c_inv * (cy_over_m + 1.0)).max_with(&one),
            a_u: b.a_u,
            a_s: b.a_s,
            a_u_inv: b.a_u_inv,
        }
    }

    pub fn with_scale(mut self, m: Rational) -> Self {
        self.m = m;
        self
    }

    /// Checks `A~ (e_i, x_i) = (e_i, x_i) + (0, y_i)` exactly.
    pub fn verify_identity(&self) -> bool {
        let a = &self.base.a;
        (0..self.k).all(|i| {
            let ci = self.c.column(i);
            let ax = a.mul_vec(&self.x_vecs[i]).expect("dims");
            (0..self.base.dim).all(|r| &ci[r] + &ax[r] == &self.x_vecs[i][r] + &self.y_vecs[i][r])
        })
    }
}

fn vec_norm(v: &[Rational]) -> Rational {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero)
}

/// Builds the parameter-extended system for `D_lambda F(0,0) = c` (`dim x k`).
pub fn extend_with_parameters(s: &LinearSplitting, c: &RMatrix, m: Rational) -> Result<ExtendedSystem> {
    if c.rows() != s.dim {
        return Err(Error::DimensionMismatch { expected: s.dim, got: c.rows() });
    }
    if !m.is_positive() {
        return Err(Error::Precondition("norm scale M must be positive".into()));
    }
    let k = c.cols();
    let n = s.dim;
    let t = &s.change_of_basis;
    let t_inv = &s.change_of_basis_inv;
    let cb = t.mul(c)?;
    let h = s.blocks.hyperbolic();
    let nc = s.num_center();
    let a_h = s.a_h();
    let resolvent = RMatrix::identity(h.len()).sub(&a_h)?.inverse().map_err(|_| {
        Error::ResonantExtension("1 is an eigenvalue of the hyperbolic block".into())
    })?;
    let mut x_vecs = Vec::with_capacity(k);
    let mut y_vecs = Vec::with_capacity(k);
    let mut xb_norms = Vec::new();
    let mut yb_norms = Vec::new();
    let mut y_block = RMatrix::zeros(nc, k);
    for i in 0..k {
        let col = cb.column(i);
        let xh = resolvent.mul_vec(&col[h.clone()])?;
        let mut xb = vec![Rational::zero(); n];
        xb[h.clone()].clone_from_slice(&xh);
        let mut yb = vec![Rational::zero(); n];
        yb[..nc].clone_from_slice(&col[..nc]);
        for (r, v) in col[..nc].iter().enumerate() {
            y_block.set(r, i, v.clone());
        }
        xb_norms.push(vec_norm(&xb));
        yb_norms.push(vec_norm(&yb));
        x_vecs.push(t_inv.mul_vec(&xb)?);
        y_vecs.push(t_inv.mul_vec(&yb)?);
    }
    let c_x = xb_norms.into_iter().max().unwrap_or_else(Rational::zero);
    let c_y = yb_norms.into_iter().max().unwrap_or_else(Rational::zero);

    let a_c = s.a_c();
    let mut a_c_tilde = RMatrix::zeros(k + nc, k + nc);
    for i in 0..k {
        a_c_tilde.set(i, i, Rational::one());
    }
    for r in 0..nc {
        for j in 0..k {
            a_c_tilde.set(k + r, j, y_block.get(r, j).clone());
        }
        for j in 0..nc {
            a_c_tilde.set(k + r, k + j, a_c.get(r, j).clone());
        }
    }
    // (mu, x) -> (mu, A_c^{-1} x - sum mu_i A_c^{-1} y_i)
    let a_c_inv = if nc > 0 { a_c.inverse()? } else { RMatrix::zeros(0, 0) };
    let corr = a_c_inv.mul(&y_block)?.scale(&-Rational::one());
    let mut a_c_tilde_inv = RMatrix::zeros(k + nc, k + nc);
    for i in 0..k {
        a_c_tilde_inv.set(i, i, Rational::one());
    }
    for r in 0..nc {
        for j in 0..k {
            a_c_tilde_inv.set(k + r, j, corr.get(r, j).clone());
        }
        for j in 0..nc {
            a_c_tilde_inv.set(k + r, k + j, a_c_inv.get(r, j).clone());
        }
    }
    debug_assert_eq!(a_c_tilde.mul(&a_c_tilde_inv)?, RMatrix::identity(k + nc));

    // A~ = [[Id, 0], [C, A]] and T~ (lambda, x) = (lambda, T x - sum lambda_i x_i^b)
    let dim = k + n;
    let mut a_t = RMatrix::zeros(dim, dim);
    for i in 0..k {
        a_t.set(i, i, Rational::one());
    }
    for r in 0..n {
        for j in 0..k {
            a_t.set(k + r, j, c.get(r, j).clone());
        }
        for j in 0..n {
            a_t.set(k + r, k + j, s.a.get(r, j).clone());
        }
    }
    let mut tt = RMatrix::zeros(dim, dim);
    for i in 0..k {
        tt.set(i, i, Rational::one());
    }
    for r in 0..n {
        for j in 0..n {
            tt.set(k + r, k + j, t.get(r, j).clone());
        }
    }
    for i in 0..k {
        let xb = t.mul_vec(&x_vecs[i])?;
        for r in 0..n {
            tt.set(k + r, i, -xb[r].clone());
        }
    }
    // reorder so the parameter directions sit in front of the center block
    let tt_inv = tt.inverse()?;
    let blocks = Blocks {
        center: 0..k + nc,
        unstable: k + s.blocks.unstable.start..k + s.blocks.unstable.end,
        stable: k + s.blocks.stable.start..k + s.blocks.stable.end,
    };
    let ext_b = tt.mul(&a_t)?.mul(&tt_inv)?;
    let mut eigen = s.eigenvalues.clone();
    if k > 0 {
        eigen.push(EigenEnclosure {
            class: SpectralClass::Center,
            re: Interval::ONE,
            im: Interval::ZERO,
            modulus: Interval::ONE,
            exact: Some(Rational::one()),
            multiplicity: k,
        });
    }
    let extended_splitting = LinearSplitting {
        dim,
        a: a_t,
        change_of_basis: tt,
        change_of_basis_inv: tt_inv,
        norms: block_norms(&ext_b, &blocks)?,
        blocks,
        eigenvalues: eigen,
    };
    debug_assert!(extended_splitting.is_block_diagonal());

    Ok(ExtendedSystem {
        base: s.clone(),
        k,
        c: c.clone(),
        x_vecs,
        y_vecs,
        m,
        c_x,
        c_y,
        a_c_tilde,
        a_c_tilde_inv,
        extended_splitting,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NormScaleReport {
    #[serde(serialize_with = "ser_rational")]
    pub m: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub epsilon: Rational,
    pub a_c_tilde_bound: Interval,
    pub a_c_tilde_inv_bound: Interval,
    pub target: Interval,
    pub target_inv: Interval,
    pub rate: RateReport,
    pub note: String,
}

/// Largest `eps` (dyadic, rounded down) keeping both slack products at or
/// below `1 - margin/2`, where `margin` is how far condition 3a passes.
pub fn default_epsilon(norms: &BlockNorms, n: u32) -> Result<Rational> {
    let rate = check_rate_conditions_norms(norms, n);
    if !rate.with_parameters {
        return Err(Error::NoNormScale(format!(
            "the rate condition with parameters fails at order {n} (worst product {})",
            rate.worst_3a()
        )));
    }
    let margin = 1.0 - rate.worst_3a().hi;
    let target = 1.0 - margin / 2.0;
    let root = |s: f64| (target / s).powf(1.0 / n as f64);
    let mut eps = f64::INFINITY;
    if norms.a_s.hi > 0.0 {
        eps = eps.min(root(norms.a_s.hi) - norms.a_c_inv.hi);
    }
    if norms.a_u_inv.hi > 0.0 {
        eps = eps.min(root(norms.a_u_inv.hi) - norms.a_c.hi);
    }
    if !eps.is_finite() {
        eps = 1.0;
    }
    let mut e = Rational::new(BigInt::from((eps.max(0.0) * 1048576.0).floor() as i64), BigInt::from(1_048_576));
    for _ in 0..80 {
        if e.is_positive() && epsilon_ok(norms, n, &e, target) {
            return Ok(e);
        }
        e = if e.is_positive() { e / int(2) } else { rat(1, 1 << 20) };
    }
    Err(Error::NoNormScale("no certified epsilon".into()))
}

fn epsilon_ok(norms: &BlockNorms, n: u32, eps: &Rational, target: f64) -> bool {
    let e = Interval::from_rational(eps);
    let one = Interval::ONE;
    let s = (norms.a_c_inv + e).max_with(&one).powi(n) * norms.a_s;
    let u = norms.a_u_inv * (norms.a_c + e).max_with(&one).powi(n);
    s.hi <= target && u.hi <= target && s.certainly_lt_f64(1.0) && u.certainly_lt_f64(1.0)
}

pub fn select_norm_scale(e: &ExtendedSystem, n: u32) -> Result<NormScaleReport> {
    let eps = default_epsilon(&e.base.norms, n)?;
    select_norm_scale_with_epsilon(e, n, &eps)
}

/// Smallest power of two `M` with `||A~_c|| <= max{1, ||A_c|| + eps}` and
/// `||A~_c^{-1}|| <= max{1, ||A_c^{-1}|| + eps}`.
pub fn select_norm_scale_with_epsilon(e: &ExtendedSystem, n: u32, eps: &Rational) -> Result<NormScaleReport> {
    let rate = check_rate_conditions(&e.base, n);
    if !rate.with_parameters {
        return Err(Error::NoNormScale(format!("the rate condition with parameters fails at order {n}")));
    }
    let s = &e.base;
    let nc = s.num_center();
    let a_c = if nc > 0 { s.a_c().inf_norm() } else { Rational::zero() };
    let a_c_inv = if nc > 0 { s.a_c().inverse()?.inf_norm() } else { Rational::zero() };
    let one = Rational::one();
    let target = (&a_c + eps).max(one.clone());
    let target_inv = (&a_c_inv + eps).max(one.clone());
    let mut m = Rational::one();
    for _ in 0..64 {
        let fwd = (&a_c + &e.c_y / &m).max(one.clone());
        let inv = (&a_c_inv * (&one + &e.c_y / &m)).max(one.clone());
        if fwd <= target && inv <= target_inv {
            let checked = e.clone().with_scale(m.clone()).norms();
            return Ok(NormScaleReport {
                m,
                epsilon: eps.clone(),
                a_c_tilde_bound: checked.a_c,
                a_c_tilde_inv_bound: checked.a_c_inv,
                target: Interval::from_rational(&target),
                target_inv: Interval::from_rational(&target_inv),
                rate,
                note: "epsilon is half the rate-condition margin; M is the first power of two that fits".into(),
            });
        }
        m *= int(2);
    }
    Err(Error::NoNormScale("no power of two up to 2^63 satisfies the norm bounds".into()))
}
