//! Newton period-2 orbits of the lattice map and their position in the certified box.

use center_manifold::oracle::{center_coordinate, default_seed, dyadic_lambdas, find_period2, period2_multipliers, verify_enclosure};
use center_manifold::polyalg::{parse_rational, Interval};
use center_manifold::rdt_app::{enclosure_report, PipelineConfig};
use num_traits::ToPrimitive;

fn main() -> center_manifold::Result<()> {
    let cfg = PipelineConfig::default();
    let lambda = parse_rational("5e-5")?;
    let orbit = find_period2(&lambda, default_seed(5e-5))?;
    let rep = enclosure_report(Interval::point(5e-5), cfg.e_r()?, cfg.e_k()?, "ansatz")?;
    let check = verify_enclosure(&orbit, &rep)?;
    for p in &check.points {
        println!("xy = {:?}, center {:e}, box margin {:e}, W margin {:e}", p.xy, p.center, p.box_margin, p.w_margin);
    }
    println!("residual {:e}, inside: {}", orbit.residual, check.pass);
    println!("multipliers of DF² {:?}", period2_multipliers(&orbit));
    for l in dyadic_lambdas(6) {
        let lf = l.to_f64().unwrap_or(0.0);
        let o = find_period2(&l, default_seed(lf))?;
        let amp = center_coordinate(o.points[0].xy[0]);
        println!("λ = {lf:e}: amplitude {amp:e}, √λ/2 = {:e}, ratio {:.5}", lf.sqrt() / 2.0, amp / (lf.sqrt() / 2.0));
    }
    Ok(())
}
