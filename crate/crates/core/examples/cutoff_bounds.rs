//! C³ cutoffs and certified suprema of the cut-off nonlinearity.

use center_manifold::cutoff::{bound_composed_nonlinearity, BoxCutoff, CutoffSpec};
use center_manifold::polyalg::{parse_rational, rat, Interval, Layout};
use center_manifold::rdt_app::{certify_cutoffs, g_jets, PipelineConfig};

fn main() -> center_manifold::Result<()> {
    let c = CutoffSpec::symmetric(rat(-1, 2), rat(1, 2), rat(1, 10))?;
    for x in [-1.0, -0.55, -0.5, 0.0, 0.5, 0.57, 1.0] {
        println!("φ({x}) = {:.6}  φ'({x}) = {:.6}", c.eval_f64(x, 0)?, c.eval_f64(x, 1)?);
    }
    let [d1, d2, d3] = c.derivative_sup()?;
    println!("sup|φ'| ⊆ {d1}, sup|φ''| ⊆ {d2}, sup|φ'''| ⊆ {d3}");

    let g = g_jets(&Layout::new(1, 2), 3)?;
    let b = BoxCutoff(vec![c.clone(), c]);
    let w = Interval::new(0.0, 1e-3)?;
    println!("sup‖D(g∘φ)‖ on [−1/2, 1/2]² ⊆ {}", bound_composed_nonlinearity(&g, &b, &[w], 1e-6)?);

    let cfg = PipelineConfig::default();
    let stage = certify_cutoffs(&cfg)?;
    println!("lattice cutoffs at λ_max = {}: L_g ⊆ {}, L_c ⊆ {}", parse_rational("7.6e-5")?, stage.l_g, stage.l_c);
    Ok(())
}
