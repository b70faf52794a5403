//! Traces the connection between the period-2 orbit and the origin at λ = 5·10⁻⁵.
//! Usage: `heteroclinic_trace [steps] [csv-dir]`.

use center_manifold::oracle::{linear_rate_steps, trace_heteroclinic, ORIGIN_TOL};
use center_manifold::polyalg::{parse_rational, Interval};
use center_manifold::rdt_app::{build_box, PipelineConfig};

fn main() -> center_manifold::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let csv_dir = args.next();
    let cfg = PipelineConfig::default();
    let lambda = parse_rational("5e-5")?;
    let b = build_box(Interval::point(5e-5), cfg.e_r()?, cfg.e_k()?)?;
    let t = trace_heteroclinic(&lambda, &b, steps)?;
    println!("start center coordinate {:e}", t.start_center);
    println!(
        "forward:  ‖p‖ after {steps} steps = {:e}, first below 1e-10 at {:?}, rate {:.8}",
        t.forward_final_norm, t.forward_hit, t.forward_rate
    );
    println!("backward: distance to the pair = {:e}, first below 1e-8 at {:?}", t.backward_final_distance, t.backward_hit);
    println!("smallest box margin {:e}, residuals {:e} / {:e}", t.min_box_margin, t.forward.residual, t.backward.residual);
    let need = linear_rate_steps(5e-5, t.forward.points[0].u[1].abs().max(1e-300) / ORIGIN_TOL);
    println!("a decay no faster than (1 - λ)^n needs about {need:.0} steps to reach 1e-10");
    if let Some(dir) = csv_dir {
        std::fs::write(format!("{dir}/forward.csv"), t.forward.to_csv())?;
        std::fs::write(format!("{dir}/backward.csv"), t.backward.to_csv())?;
    }
    Ok(())
}
