//! Order-by-order solution of `F(λ, K(λ,θ)) = K(λ, R(λ,θ))` for the jets of the
//! parameterization `K = ι + (k_c, k_h)` and the reduced map `R = A_c θ + r`.
//!
//! Everything is computed in the block coordinates of a [`LinearSplitting`]:
//! `F̂(λ, z) = T F(λ, T⁻¹ z)`, so the linear part of `F̂` is block diagonal.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polyalg::jet::Exponents;
use crate::polyalg::{IBox, Jet, Layout, RMatrix, Rational};
use crate::splitting::LinearSplitting;

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacySolution {
    pub order: u32,
    /// Components of `K` in block coordinates (center first).
    pub k: Vec<Jet>,
    /// Components of `R`, one per center direction.
    pub r: Vec<Jet>,
    pub kc: Vec<Jet>,
    /// Jet of `R⁻¹` in the phase variables at fixed parameters.
    pub t: Vec<Jet>,
    /// The map in block coordinates.
    pub f_block: Vec<Jet>,
    pub num_center: usize,
}

impl ConjugacySolution {
    pub fn k_c(&self) -> Vec<Jet> {
        self.kc.clone()
    }

    /// Hyperbolic components `k_u, k_s` of `K`.
    pub fn k_h(&self) -> &[Jet] {
        &self.k[self.num_center..]
    }

    /// `F̂∘K − K∘R` truncated at the solution order.
    pub fn residual(&self) -> Result<Vec<Jet>> {
        conjugacy_defect(&self.f_block, &self.k, &self.r, self.order)
    }
}

fn param_vars(layout: &Layout, order: u32) -> Result<Vec<Jet>> {
    (0..layout.num_params).map(|p| Jet::var(layout, order, p)).collect()
}

/// `F̂(λ, z) = T F(λ, T⁻¹ z)` for a map given in original coordinates.
pub fn to_block_coordinates(f: &[Jet], s: &LinearSplitting) -> Result<Vec<Jet>> {
    let n = s.dim;
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    let layout = f[0].layout().clone();
    if layout.num_phase != n {
        return Err(Error::DimensionMismatch { expected: n, got: layout.num_phase });
    }
    let order = f.iter().map(Jet::max_order).min().unwrap_or(0);
    let zvars: Vec<Jet> = (0..n).map(|j| Jet::var(&layout, order, layout.num_params + j)).collect::<Result<_>>()?;
    let lin = |m: &RMatrix, vars: &[Jet]| -> Result<Vec<Jet>> {
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero(&layout, order);
                for (j, v) in vars.iter().enumerate() {
                    acc = acc.add(&v.scale(m.get(i, j)))?;
                }
                Ok(acc)
            })
            .collect()
    };
    let mut inners = param_vars(&layout, order)?;
    inners.extend(lin(&s.change_of_basis_inv, &zvars)?);
    let fz: Vec<Jet> = f.iter().map(|fi| fi.compose(&inners, order, false)).collect::<Result<_>>()?;
    lin(&s.change_of_basis, &fz)
}

/// Linear phase part of a map as a matrix.
fn linear_phase_part(f: &[Jet]) -> RMatrix {
    let l = f[0].layout();
    let n = l.num_phase;
    let mut m = RMatrix::zeros(f.len(), n);
    for (i, fi) in f.iter().enumerate() {
        for j in 0..n {
            let mut e = vec![0; l.nvars()];
            e[l.num_params + j] = 1;
            m.set(i, j, fi.coeff(&e));
        }
    }
    m
}

/// `F̂(λ, K) − K(λ, R)` at the given order.
pub fn conjugacy_defect(f_block: &[Jet], k: &[Jet], r: &[Jet], order: u32) -> Result<Vec<Jet>> {
    let layout = r[0].layout().clone();
    let mut inner_fk = param_vars(&layout, order)?;
    inner_fk.extend(k.iter().map(|j| j.truncate(order)));
    let mut inner_kr = param_vars(&layout, order)?;
    inner_kr.extend(r.iter().map(|j| j.truncate(order)));
    let mut out = Vec::with_capacity(k.len());
    for (fi, ki) in f_block.iter().zip(k) {
        let fk = fi.compose(&inner_fk, order, false)?;
        let kr = ki.compose(&inner_kr, order, false)?;
        out.push(fk.sub(&kr)?);
    }
    Ok(out)
}

fn monomials_of_degree(layout: &Layout, d: u32) -> Vec<Exponents> {
    fn rec(layout: &Layout, i: usize, left: u32, cur: &mut Exponents, out: &mut Vec<Exponents>) {
        if i == layout.nvars() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let w = layout.weights[i];
        let mut k = 0;
        while k * w <= left {
            cur[i] = k;
            rec(layout, i + 1, left - k * w, cur, out);
            k += 1;
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    rec(layout, 0, d, &mut vec![0; layout.nvars()], &mut out);
    out
}

fn monomial_name(layout: &Layout, e: &[u32]) -> String {
    let parts: Vec<String> = e
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(v, &k)| if k == 1 { layout.var_name(v) } else { format!("{}^{k}", layout.var_name(v)) })
        .collect();
    if parts.is_empty() { "1".into() } else { parts.join("*") }
}

/// Solves the conjugacy equation through `order` with `k_c` prescribed.
///
/// `f` is given in original coordinates over a layout with the parameters first;
/// its weights fix total or weighted truncation. `kc` lives on the layout
/// `(params, center)` with the same parameter weight.
pub fn solve_order_by_order(f: &[Jet], s: &LinearSplitting, kc: &[Jet], order: u32) -> Result<ConjugacySolution> {
    let fl = f.first().ok_or(Error::DimensionMismatch { expected: s.dim, got: 0 })?.layout().clone();
    for fi in f {
        if !fi.constant_term().is_zero() {
            return Err(Error::Precondition("F has a nonzero constant term".into()));
        }
    }
    if linear_phase_part(f) != s.a {
        return Err(Error::Precondition("the linear phase part of F differs from the split matrix".into()));
    }
    let nc = s.num_center();
    let n = s.dim;
    let kpar = fl.num_params;
    let pw = fl.weights.first().copied().unwrap_or(1);
    let layout = if fl.is_weighted() { Layout::weighted(kpar, nc, pw) } else { Layout::new(kpar, nc) };
    if kc.len() != nc {
        return Err(Error::DimensionMismatch { expected: nc, got: kc.len() });
    }
    for (i, j) in kc.iter().enumerate() {
        if j.layout() != &layout {
            return Err(Error::LayoutMismatch);
        }
        if j.valuation().is_some_and(|v| v < 2) || j.terms().any(|(e, _)| e.iter().sum::<u32>() < 2) {
            return Err(Error::Precondition(format!("k_c component {i} has constant or linear terms")));
        }
    }
    let f_full = to_block_coordinates(f, s)?;
    let f_block: Vec<Jet> = f_full.iter().map(|j| j.truncate(order)).collect();
    let b = s.block_matrix();
    let a_c = b.submatrix(0..nc, 0..nc);
    let h = s.blocks.hyperbolic();
    let a_h = b.submatrix(h.clone(), h.clone());
    let nh = h.len();

    // start from K = ι + k_c, R = A_c θ
    let mut k: Vec<Jet> = Vec::with_capacity(n);
    for i in 0..nc {
        let mut ki = Jet::var(&layout, order, kpar + i)?;
        ki = ki.add(&kc[i].truncate(order).relayout(&layout, order)?)?;
        k.push(ki);
    }
    for _ in 0..nh {
        k.push(Jet::zero(&layout, order));
    }
    let mut r: Vec<Jet> = (0..nc)
        .map(|i| {
            let mut ri = Jet::zero(&layout, order);
            for j in 0..nc {
                let mut e = vec![0; layout.nvars()];
                e[kpar + j] = 1;
                ri.add_term(e, a_c.get(i, j).clone());
            }
            ri
        })
        .collect();

    for d in 1..=order {
        let defect = conjugacy_defect(&f_block, &k, &r, d)?;
        // center rows determine r explicitly
        for i in 0..nc {
            let hd = defect[i].homogeneous(d);
            for (e, c) in hd.terms() {
                if e[kpar..].iter().sum::<u32>() == 1 && layout.degree(e) == 1 {
                    return Err(Error::Precondition("F̂ and A_c disagree in the linear part".into()));
                }
                r[i].add_term(e.clone(), c.clone());
            }
        }
        if nh == 0 {
            continue;
        }
        // hyperbolic rows: A_h X − [X(λ, R)]_d = −defect_h
        let monos: Vec<Exponents> = monomials_of_degree(&layout, d)
            .into_iter()
            .filter(|e| !(d == 1 && e[kpar..].iter().sum::<u32>() == 1 && layout.degree(e) == 1))
            .collect();
        if monos.is_empty() {
            continue;
        }
        let nm = monos.len();
        let idx = |comp: usize, m: usize| comp * nm + m;
        let mut inner = param_vars(&layout, d)?;
        inner.extend(r.iter().map(|j| j.truncate(d)));
        let mut sys = RMatrix::zeros(nh * nm, nh * nm);
        for (mi, e) in monos.iter().enumerate() {
            let mono = Jet::monomial(&layout, d, e.clone(), Rational::one())?;
            let transported = mono.compose(&inner, d, false)?.homogeneous(d);
            for (te, tc) in transported.terms() {
                let Some(row_m) = monos.iter().position(|x| x == te) else { continue };
                for comp in 0..nh {
                    let cur = sys.get(idx(comp, row_m), idx(comp, mi)).clone();
                    sys.set(idx(comp, row_m), idx(comp, mi), cur - tc);
                }
            }
            for row in 0..nh {
                for comp in 0..nh {
                    let cur = sys.get(idx(row, mi), idx(comp, mi)).clone();
                    sys.set(idx(row, mi), idx(comp, mi), cur + a_h.get(row, comp));
                }
            }
        }
        let mut rhs = vec![Rational::zero(); nh * nm];
        for comp in 0..nh {
            let hd = defect[nc + comp].homogeneous(d);
            for (mi, e) in monos.iter().enumerate() {
                rhs[idx(comp, mi)] = -hd.coeff(e);
            }
        }
        let sol = match sys.inverse() {
            Ok(inv) => inv.mul_vec(&rhs)?,
            Err(_) => {
                let ker = sys.nullspace();
                let bad = ker
                    .first()
                    .and_then(|v| v.iter().position(|c| !c.is_zero()))
                    .unwrap_or(0);
                let (comp, mi) = (bad / nm, bad % nm);
                return Err(Error::Resonance {
                    order: d,
                    monomial: format!("{} in hyperbolic component {comp}", monomial_name(&layout, &monos[mi])),
                });
            }
        };
        for comp in 0..nh {
            for (mi, e) in monos.iter().enumerate() {
                k[nc + comp].add_term(e.clone(), sol[idx(comp, mi)].clone());
            }
        }
    }

    let t = invert_r_jet(&r, order)?;
    Ok(ConjugacySolution {
        order,
        k,
        r,
        kc: kc.iter().map(|j| j.truncate(order)).collect(),
        t,
        f_block: f_full,
        num_center: nc,
    })
}

/// Chooses `k_c` so the listed `(component, monomial)` coefficients of `R` vanish.
///
/// Each target coefficient of `R` is affine in the `k_c` coefficient of the same
/// monomial (given lower degrees); the affine maps are probed exactly and solved
/// one degree at a time.
pub fn normal_form_kc(
    f: &[Jet],
    s: &LinearSplitting,
    targets: &[(usize, Exponents)],
    order: u32,
) -> Result<Vec<Jet>> {
    let fl = f.first().ok_or(Error::DimensionMismatch { expected: s.dim, got: 0 })?.layout().clone();
    let nc = s.num_center();
    let pw = fl.weights.first().copied().unwrap_or(1);
    let layout = if fl.is_weighted() { Layout::weighted(fl.num_params, nc, pw) } else { Layout::new(fl.num_params, nc) };
    let mut kc: Vec<Jet> = (0..nc).map(|_| Jet::zero(&layout, order)).collect();
    let mut degrees: Vec<u32> = targets.iter().map(|(_, e)| layout.degree(e)).collect();
    degrees.sort();
    degrees.dedup();
    for d in degrees {
        if d > order {
            continue;
        }
        let tg: Vec<&(usize, Exponents)> = targets.iter().filter(|(_, e)| layout.degree(e) == d).collect();
        for (c, e) in &tg {
            if *c >= nc || e.len() != layout.nvars() || e[layout.num_params..].iter().sum::<u32>() < 2 {
                return Err(Error::Precondition(format!("target {c}:{e:?} is not a nonlinear center monomial")));
            }
        }
        let probe = |kc: &[Jet]| -> Result<Vec<Rational>> {
            let sol = solve_order_by_order(f, s, kc, d)?;
            Ok(tg.iter().map(|(c, e)| sol.r[*c].coeff(e)).collect())
        };
        let base = probe(&kc)?;
        let m = tg.len();
        let mut a = RMatrix::zeros(m, m);
        for (j, (c, e)) in tg.iter().enumerate() {
            let mut trial = kc.clone();
            trial[*c].add_term(e.clone(), Rational::one());
            let v = probe(&trial)?;
            for i in 0..m {
                a.set(i, j, &v[i] - &base[i]);
            }
        }
        let neg: Vec<Rational> = base.iter().map(|b| -b.clone()).collect();
        let coeffs = a.solve(&neg).map_err(|_| {
            let (c, e) = tg[a.nullspace().first().and_then(|v| v.iter().position(|x| !x.is_zero())).unwrap_or(0)];
            Error::Resonance { order: d, monomial: format!("{} in center component {c}", monomial_name(&layout, e)) }
        })?;
        for ((c, e), v) in tg.iter().zip(coeffs) {
            kc[*c].add_term(e.clone(), v);
        }
    }
    Ok(kc)
}

/// Jet of `R⁻¹(λ, ·)`: iterates `T ← T + A_c⁻¹(θ − R(λ, T))`, gaining one order per step.
pub fn invert_r_jet(r: &[Jet], order: u32) -> Result<Vec<Jet>> {
    let layout = r[0].layout().clone();
    let nc = layout.num_phase;
    let lin = linear_phase_part(r);
    let inv = lin.inverse().map_err(|_| Error::Singular("linear part of R".into()))?;
    let theta: Vec<Jet> = (0..nc).map(|j| Jet::var(&layout, order, layout.num_params + j)).collect::<Result<_>>()?;
    let apply = |m: &RMatrix, v: &[Jet]| -> Result<Vec<Jet>> {
        (0..nc)
            .map(|i| {
                let mut acc = Jet::zero(&layout, order);
                for (j, vj) in v.iter().enumerate() {
                    acc = acc.add(&vj.scale(m.get(i, j)))?;
                }
                Ok(acc)
            })
            .collect()
    };
    let mut t = apply(&inv, &theta)?;
    let mut params = param_vars(&layout, order)?;
    for _ in 0..=order {
        params.truncate(layout.num_params);
        params.extend(t.iter().cloned());
        let rt: Vec<Jet> = r.iter().map(|ri| ri.compose(&params, order, true)).collect::<Result<_>>()?;
        let err: Vec<Jet> = theta.iter().zip(&rt).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        if err.iter().all(Jet::is_zero) {
            break;
        }
        let corr = apply(&inv, &err)?;
        t = t.iter().zip(&corr).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSample {
    pub max_scaled: f64,
    pub at: Vec<f64>,
}

/// Largest `|F̂(λ,K) − K(λ,R)| / ρ^{N+1}` over random samples of `(λ, θ)`,
/// where `ρ = max(|λ|^{1/w}, |θ|)`. `f` is the full map in original coordinates.
pub fn conjugacy_residual_numeric(
    f: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    s: &LinearSplitting,
    sol: &ConjugacySolution,
    samples: &IBox,
    count: usize,
    seed: u64,
) -> Result<ResidualSample> {
    let layout = sol.r[0].layout().clone();
    let kpar = layout.num_params;
    let t = s.change_of_basis.to_rows();
    let ti = s.change_of_basis_inv.to_rows();
    let to_f = |m: &Vec<Vec<Rational>>| -> Vec<Vec<f64>> {
        m.iter().map(|r| r.iter().map(|c| num_traits::ToPrimitive::to_f64(c).unwrap()).collect()).collect()
    };
    let (t, ti) = (to_f(&t), to_f(&ti));
    let mv = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> { m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = ResidualSample { max_scaled: 0.0, at: vec![] };
    for _ in 0..count {
        let p: Vec<f64> = samples.0.iter().map(|i| if i.lo == i.hi { i.lo } else { rng.gen_range(i.lo..=i.hi) }).collect();
        let rho = p
            .iter()
            .enumerate()
            .map(|(i, v)| if i < kpar { v.abs().powf(1.0 / layout.weights[i] as f64) } else { v.abs() })
            .fold(0.0, f64::max);
        if rho == 0.0 {
            continue;
        }
        let kz: Vec<f64> = sol.k.iter().map(|j| j.eval_f64(&p)).collect::<Result<_>>()?;
        let fk = mv(&t, &f(&p[..kpar], &mv(&ti, &kz)));
        let mut rp = p[..kpar].to_vec();
        for ri in &sol.r {
            rp.push(ri.eval_f64(&p)?);
        }
        let kr: Vec<f64> = sol.k.iter().map(|j| j.eval_f64(&rp)).collect::<Result<_>>()?;
        let res = fk.iter().zip(&kr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scaled = res / rho.powi(sol.order as i32 + 1);
        if scaled > best.max_scaled {
            best = ResidualSample { max_scaled: scaled, at: p };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{int, jet_from, rat};
    use crate::splitting::split_spectrum;

    /// Lattice map in `(u_{n-1}, u_n)` with parameter `l`.
    fn lattice(layout: &Layout, order: u32) -> Vec<Jet> {
        let f0 = jet_from(layout, order, &[((1, 1), &[0, 0, 1])]);
        let f1 = jet_from(
            layout,
            order,
            &[
                ((-3, 1), &[0, 0, 1]),
                ((-1, 1), &[1, 0, 1]),
                ((-2, 1), &[0, 1, 0]),
                ((-3, 1), &[0, 0, 2]),
                ((1, 1), &[0, 0, 3]),
            ],
        );
        vec![f0, f1]
    }

    fn split() -> LinearSplitting {
        split_spectrum(&RMatrix::from_i64(&[&[0, 1], &[-2, -3]])).unwrap()
    }

    #[test]
    fn lattice_normal_form_weighted() {
        let l = Layout::weighted(1, 2, 2);
        let f = lattice(&l, 3);
        let lc = Layout::weighted(1, 1, 2);
        let kc = vec![jet_from(&lc, 3, &[((3, 2), &[0, 2])])];
        let sol = solve_order_by_order(&f, &split(), &kc, 3).unwrap();
        assert_eq!(sol.r[0], jet_from(&lc, 3, &[((-1, 1), &[0, 1]), ((1, 1), &[1, 1]), ((-4, 1), &[0, 3])]));
        assert_eq!(
            sol.k[1],
            jet_from(&lc, 3, &[((-2, 1), &[1, 1]), ((-2, 1), &[0, 2]), ((8, 1), &[0, 3])])
        );
        assert!(sol.residual().unwrap().iter().all(Jet::is_zero));

        let kc0 = vec![Jet::zero(&lc, 3)];
        let sol0 = solve_order_by_order(&f, &split(), &kc0, 3).unwrap();
        assert_eq!(sol0.r[0], jet_from(&lc, 3, &[((-1, 1), &[0, 1]), ((1, 1), &[1, 1]), ((3, 1), &[0, 2]), ((-13, 1), &[0, 3])]));
    }

    #[test]
    fn kc_from_normal_form_target() {
        let l = Layout::weighted(1, 2, 2);
        let f = lattice(&l, 3);
        let kc = normal_form_kc(&f, &split(), &[(0, vec![0, 2])], 3).unwrap();
        assert_eq!(kc[0].coeff(&[0, 2]), rat(3, 2));
    }

    #[test]
    fn normal_form_invariant_over_c2() {
        let l = Layout::weighted(1, 2, 2);
        let f = lattice(&l, 3);
        let lc = Layout::weighted(1, 1, 2);
        for c2 in [int(0), int(1), rat(3, 2)] {
            let kc = vec![Jet::monomial(&lc, 3, vec![0, 2], c2.clone()).unwrap()];
            let sol = solve_order_by_order(&f, &split(), &kc, 3).unwrap();
            let d2 = sol.r[0].coeff(&[0, 2]) * int(2);
            let d3 = sol.r[0].coeff(&[0, 3]) * int(6);
            assert_eq!(&d2, &(int(6) - int(4) * &c2));
            assert_eq!(&d3, &(int(-78) + int(72) * &c2 - int(24) * &c2 * &c2));
            assert_eq!(int(2) * d3 + int(3) * &d2 * &d2, int(-48));
        }
    }

    #[test]
    fn zero_nonlinearity() {
        let l = Layout::new(1, 2);
        let a = RMatrix::from_i64(&[&[0, 1], &[-2, -3]]);
        let f = vec![jet_from(&l, 4, &[((1, 1), &[0, 0, 1])]), jet_from(&l, 4, &[((-2, 1), &[0, 1, 0]), ((-3, 1), &[0, 0, 1])])];
        let s = split_spectrum(&a).unwrap();
        let lc = Layout::new(1, 1);
        let sol = solve_order_by_order(&f, &s, &[Jet::zero(&lc, 4)], 4).unwrap();
        assert_eq!(sol.r[0], jet_from(&lc, 4, &[((-1, 1), &[0, 1])]));
        assert!(sol.k[1].is_zero());
        assert!(normal_form_kc(&f, &s, &[(0, vec![0, 2])], 4).unwrap()[0].is_zero());
    }

    #[test]
    fn reversion_examples() {
        let l = Layout::new(0, 1);
        let r = vec![jet_from(&l, 3, &[((-1, 1), &[1])])];
        assert_eq!(invert_r_jet(&r, 3).unwrap()[0], r[0]);
        let r = vec![jet_from(&l, 4, &[((-1, 1), &[1]), ((-4, 1), &[3])])];
        let t = invert_r_jet(&r, 4).unwrap();
        // -x - 4x^3 is not its own inverse: R(-x - 4x^3) = x + 8x^3
        assert_eq!(t[0], jet_from(&l, 4, &[((-1, 1), &[1]), ((4, 1), &[3])]));
        let rt = r[0].compose(&t, 4, false).unwrap();
        assert_eq!(rt, Jet::var(&l, 4, 0).unwrap());
        let r = vec![jet_from(&l, 2, &[((2, 1), &[1]), ((1, 1), &[2])])];
        assert_eq!(invert_r_jet(&r, 2).unwrap()[0], jet_from(&l, 2, &[((1, 2), &[1]), ((-1, 8), &[2])]));
    }

    #[test]
    fn residual_numeric_controls() {
        let l = Layout::weighted(1, 2, 2);
        let f = lattice(&l, 3);
        let lc = Layout::weighted(1, 1, 2);
        let kc = vec![jet_from(&lc, 3, &[((3, 2), &[0, 2])])];
        let s = split();
        let sol = solve_order_by_order(&f, &s, &kc, 3).unwrap();
        let map = |p: &[f64], u: &[f64]| vec![u[1], -(3.0 + p[0]) * u[1] - 2.0 * u[0] - 3.0 * u[1] * u[1] + u[1].powi(3)];
        let bx = |r: f64| IBox::new(vec![crate::polyalg::Interval::ZERO, crate::polyalg::Interval::new(-r, r).unwrap()]);
        let a = conjugacy_residual_numeric(&map, &s, &sol, &bx(1e-2), 400, 1).unwrap();
        let b = conjugacy_residual_numeric(&map, &s, &sol, &bx(1e-3), 400, 1).unwrap();
        assert!(a.max_scaled.is_finite() && b.max_scaled < 2.0 * a.max_scaled + 1.0);

        let mut bad = sol.clone();
        bad.k[1].add_term(vec![0, 2], rat(1, 10));
        let a = conjugacy_residual_numeric(&map, &s, &bad, &bx(1e-2), 400, 1).unwrap();
        let b = conjugacy_residual_numeric(&map, &s, &bad, &bx(1e-3), 400, 1).unwrap();
        assert!(b.max_scaled > 5.0 * a.max_scaled);
    }

    #[test]
    fn random_maps_have_exact_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let dim = 2 + trial % 2;
            let order = 2 + (trial as u32 % 3);
            // center -1, unstable 3, optional stable 1/3, mixed by a unimodular change of basis
            let mut diag = vec![int(-1), int(3)];
            if dim == 3 {
                diag.push(rat(1, 3));
            }
            let mut p = RMatrix::identity(dim);
            for i in 0..dim {
                for j in i + 1..dim {
                    p.set(i, j, int(rng.gen_range(-2..=2)));
                }
            }
            let a = p.mul(&RMatrix::diag(&diag)).unwrap().mul(&p.inverse().unwrap()).unwrap();
            let s = split_spectrum(&a).unwrap();
            let l = Layout::new(1, dim);
            let mut f = Vec::new();
            for i in 0..dim {
                let mut fi = Jet::zero(&l, order);
                for j in 0..dim {
                    let mut e = vec![0; dim + 1];
                    e[j + 1] = 1;
                    fi.add_term(e, a.get(i, j).clone());
                }
                for _ in 0..4 {
                    let mut e: Vec<u32> = (0..=dim).map(|_| rng.gen_range(0..=2)).collect();
                    e[0] = e[0].min(1);
                    if e.iter().sum::<u32>() >= 2 {
                        fi.add_term(e, rat(rng.gen_range(-5..=5), rng.gen_range(1..=3)));
                    }
                }
                f.push(fi);
            }
            let lc = Layout::new(1, 1);
            let kc = vec![jet_from(&lc, order, &[((1, 2), &[0, 2])])];
            let sol = solve_order_by_order(&f, &s, &kc, order).unwrap();
            assert!(sol.residual().unwrap().iter().all(Jet::is_zero), "trial {trial}");
        }
    }

    #[test]
    fn origin_stays_fixed() {
        let l = Layout::new(1, 2);
        let f = lattice(&l, 4);
        let lc = Layout::new(1, 1);
        let sol = solve_order_by_order(&f, &split(), &[Jet::zero(&lc, 4)], 4).unwrap();
        assert!(sol.r[0].terms().all(|(e, _)| e[1] > 0));
        // total-degree truncation keeps the l^2 x term the weighted view drops
        assert_eq!(sol.r[0].coeff(&[2, 1]), int(-2));
    }

    #[test]
    fn odd_center_target_is_resonant() {
        // with A_c = -1 the x^3 coefficient of k_c cancels from R
        let l = Layout::weighted(1, 2, 2);
        let f = lattice(&l, 3);
        let err = normal_form_kc(&f, &split(), &[(0, vec![0, 3])], 3).unwrap_err();
        assert!(matches!(err, Error::Resonance { order: 3, .. }), "{err}");
    }
}
