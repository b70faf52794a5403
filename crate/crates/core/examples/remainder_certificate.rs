//! Remainder certificate for the lattice map on [0, λ] × [−x_max, x_max].

use center_manifold::bounds::{certify_remainder, derivative_bound_system, global_lipschitz, BoundOptions, Growth, Shape};
use center_manifold::polyalg::{IBox, Interval};
use center_manifold::rdt_app::lattice_solution;

fn main() -> center_manifold::Result<()> {
    let (sol, s) = lattice_solution(5)?;
    let lip = global_lipschitz(&s.norms, Interval::from_ratio(13, 100), Interval::from_ratio(17, 1000), 3, true, false)?;
    println!("L_r = {}  L_u = {}  smallness {}", lip.l_r, lip.l_u, lip.unstable_condition);
    let lambda = 5e-5;
    let x_max = 5e-3;
    let dom = IBox::new(vec![Interval::new(0.0, lambda)?, Interval::new(-x_max, x_max)?]);
    for (shape, growth) in [(Shape::Power, Growth::Crude), (Shape::Power, Growth::Taylor), (Shape::PhaseVanishing, Growth::Taylor)] {
        let opts = BoundOptions { n: 6, m_scale: 64.0, shape, growth, ..Default::default() };
        let mut cert = match certify_remainder(&sol, &s, &lip.bound_inputs(), &dom, &opts) {
            Ok(c) => c,
            Err(e) => {
                println!("{shape:?}/{growth:?}: {e}");
                continue;
            }
        };
        let d = derivative_bound_system(&sol, &s, &cert, 1)?;
        println!("{shape:?}/{growth:?}: C = {:?}, containment {}, ρ_max = {:e}", cert.c, cert.verify(), cert.pieces.rho_max);
        println!("  derivative C = {:?}", d.c);
        cert.derivative = Some(d);
    }
    Ok(())
}
