//! Lipschitz constant of the time-τ perturbation for flows, L_G = τ‖Dg‖ sup‖e^{At}‖² exp(‖Dg‖∫‖e^{At}‖).

use center_manifold::bounds::{compute_lg, scalar_exp_norm};

fn main() -> center_manifold::Result<()> {
    let f = scalar_exp_norm(-1.0);
    let oracle = 0.1 * (0.1 * (1.0 - (-1.0f64).exp())).exp();
    for pieces in [16, 256, 1 << 16] {
        let v = compute_lg(0.1, 1.0, &f, pieces)?;
        println!("{pieces:>6} pieces: {v}  width {:e}  contains {oracle:.9}: {}", v.width(), v.contains(oracle));
    }
    println!("‖Dg‖ = 0: {}", compute_lg(0.0, 1.0, &f, 16)?);
    println!("τ = 0:    {}", compute_lg(0.1, 0.0, &f, 16)?);
    for tau in [0.5, 1.0, 2.0, 4.0] {
        println!("τ = {tau}: {}", compute_lg(0.1, tau, &f, 4096)?);
    }
    Ok(())
}
