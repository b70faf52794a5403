//! Exact center/unstable/stable splitting of a rational matrix and the rate conditions.

use center_manifold::polyalg::RMatrix;
use center_manifold::splitting::{check_rate_conditions, split_spectrum};

fn main() -> center_manifold::Result<()> {
    let lattice: &[&[i64]] = &[&[0, 1], &[-2, -3]];
    let mixed: &[&[i64]] = &[&[-1, 0, 0], &[0, 3, 0], &[1, 0, 0]];
    for rows in [lattice, mixed] {
        let a = RMatrix::from_i64(rows);
        let s = split_spectrum(&a)?;
        println!("A = {:?}", a.to_strings());
        for e in &s.eigenvalues {
            println!("  eigenvalue {e:?}");
        }
        println!("  blocks {:?}", s.blocks);
        println!("  T = {:?}", s.change_of_basis.to_strings());
        println!("  T A T⁻¹ = {:?}", s.block_matrix().to_strings());
        println!("  |A_c| = {}  |A_u⁻¹| = {}  |A_s| = {}", s.norms.a_c, s.norms.a_u_inv, s.norms.a_s);
        let r = check_rate_conditions(&s, 3);
        println!("  rate conditions at n = 3: plain {} with parameters {}", r.plain, r.with_parameters);
    }
    // a Jordan block on the unit circle is still a valid center block
    let j = RMatrix::from_i64(&[&[1, 1], &[0, 1]]);
    println!("Jordan block: {:?}", split_spectrum(&j)?.blocks);
    Ok(())
}
