//! The two proximal maps behind the auxiliary updates.
//!
//! `cargo run --example proximal_operators`

use gradecast::mftci::{nuclear_norm, shrink_singular_values, soft_threshold};
use nalgebra::DMatrix;

fn main() -> gradecast::Result<()> {
    let x = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.4, 1.0, 0.1, 0.0, 0.2, 0.3]);
    println!("X singular values: {:.3?}", x.singular_values().as_slice());

    // Singular values shrink by the threshold; small ones vanish, so rank drops.
    let z1 = shrink_singular_values(&x, 0.5)?;
    println!("after shrinking by 0.5: {:.3?}", z1.singular_values().as_slice());
    println!("nuclear norm {:.3} -> {:.3}", nuclear_norm(&x), nuclear_norm(&z1));

    // Entries move toward zero by the threshold and stay non-negative.
    let z2 = soft_threshold(&x, 0.3);
    println!("soft threshold at 0.3:");
    for row in z2.row_iter() {
        println!("  {:.2?}", row.iter().collect::<Vec<_>>());
    }
    Ok(())
}
