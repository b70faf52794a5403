//! Order-by-order conjugacy for the lattice map, with the two choices of k_c.

use center_manifold::conjugacy::{normal_form_kc, solve_order_by_order};
use center_manifold::polyalg::{jet_from, Jet, Layout};
use center_manifold::rdt_app::{dr_at_zero_series, u_jets, RdtSystem};

fn main() -> center_manifold::Result<()> {
    let order: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let l = Layout::weighted(1, 2, 2);
    let lc = Layout::weighted(1, 1, 2);
    let f = u_jets(&l, order);
    let s = RdtSystem::splitting()?;

    let kc = normal_form_kc(&f, &s, &[(0, vec![0, 2])], order)?;
    let sol = solve_order_by_order(&f, &s, &kc, order)?;
    println!("k_c = {}", kc[0]);
    println!("R = {}", sol.r[0]);
    println!("k_u = {}", sol.k[1]);
    println!("residual vanishes: {}", sol.residual()?.iter().all(Jet::is_zero));

    let plain = solve_order_by_order(&f, &s, &[Jet::zero(&lc, order)], order)?;
    println!("with k_c = 0: R = {}", plain.r[0]);

    // ∂R/∂x(λ, 0) against the series of the closed-form multiplier
    let tl = Layout::new(1, 2);
    let deep = solve_order_by_order(&u_jets(&tl, 7), &s, &[jet_from(&Layout::new(1, 1), 7, &[((3, 2), &[0, 2])])], 7)?;
    let dr = deep.r[0].derivative(1)?;
    let series = dr_at_zero_series(3);
    for (k, c) in series.iter().enumerate() {
        println!("λ^{k}: jet {}  series {}", dr.coeff(&[k as u32, 0]), c);
    }
    Ok(())
}
