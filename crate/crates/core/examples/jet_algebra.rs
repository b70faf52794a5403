//! Exact truncated jets: products, composition, derivatives and interval ranges.

use center_manifold::polyalg::{jet_from, rat, IBox, Interval, Jet, Layout};

fn main() -> center_manifold::Result<()> {
    let l = Layout::new(0, 1);
    // the cubic normal form at λ = 0
    let p = jet_from(&l, 5, &[((-1, 1), &[1]), ((-4, 1), &[3])]);
    let pp = p.compose(&[p.clone()], 5, false)?;
    println!("p = {p}");
    println!("p∘p = {pp}");
    println!("p' = {}", p.derivative(0)?);
    println!("p² = {}", p.mul(&p)?);

    // weighted truncation: λ counts as degree 2
    let w = Layout::weighted(1, 1, 2);
    let lam = Jet::var(&w, 3, 0)?;
    let x = Jet::var(&w, 3, 1)?;
    let r = x.scale(&rat(-1, 1)).add(&lam.mul(&x)?)?.sub(&x.pow(3).scale(&rat(4, 1)))?;
    println!("R = {r}  (λx has weighted degree 3; λ²x is dropped)");
    println!("R·R truncated = {}", r.mul(&r)?);

    let k = jet_from(&l, 3, &[((-2, 1), &[2]), ((8, 1), &[3])]);
    let dom = IBox::new(vec![Interval::new(0.0, 0.1)?]);
    println!("range of {k} on [0, 0.1] ⊆ {}", k.eval_interval(&dom)?);
    println!("with 64 pieces ⊆ {}", k.eval_interval_subdivided(&dom, 64)?);
    Ok(())
}
