//! Runs the period-doubling certificate for the lattice map and prints each stage.

use center_manifold::rdt_app::{certify_pipeline, reports_csv, PipelineConfig};

fn main() -> center_manifold::Result<()> {
    let cfg = PipelineConfig::default();
    let bundle = certify_pipeline(&cfg)?;
    println!("E_R = {}  E_K = {}", bundle.e_r, bundle.e_k);
    if let Some(c) = &bundle.cutoffs {
        println!("L_g <= {}  L_c <= {}", c.l_g, c.l_c);
    }
    if let Some(l) = &bundle.lipschitz {
        println!("L_r = {}  L_u = {}  unstable condition = {}", l.l_r, l.l_u, l.unstable_condition);
    }
    for r in &bundle.remainder {
        println!(
            "lambda = {:e}: M = {}, C = {:?}, E_R value {} slope {}, E_K value {} slope {}",
            r.lambda.mid(),
            r.m_scale,
            r.certificate.c,
            r.e_r_value,
            r.e_r_derivative,
            r.e_k_value,
            r.e_k_derivative
        );
    }
    for s in &bundle.stages {
        println!("stage {} {:<45} {}", s.stage, s.name, if s.pass { "pass" } else { "FAIL" });
        for c in s.checks.iter().filter(|c| !c.pass) {
            println!("    failed: {} ({} vs {})", c.name, c.lhs, c.rhs);
        }
        if let Some(d) = &s.detail {
            println!("    {d}");
        }
    }
    print!("{}", reports_csv(&bundle.reports));
    println!("passed: {}  largest certifiable lambda_max: {:?}", bundle.passed, bundle.largest_certifiable);
    Ok(())
}
