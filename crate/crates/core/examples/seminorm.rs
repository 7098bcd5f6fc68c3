//! Smallest seminorm over gradients when the values are fixed.

use c11fit::erm::minimize_seminorm;
use c11fit::gamma::gamma1;
use c11fit::{OneField, PointSet};

fn main() -> c11fit::Result<()> {
    // samples of x^2 / 2, whose gradient is 1-Lipschitz
    let xs = [-1.0, -0.4, 0.1, 0.5, 1.0];
    let base = PointSet::new(xs.iter().map(|&x| vec![x]).collect())?;
    let values: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();

    let flat = OneField::with_zero_gradients(base.clone(), values.clone())?;
    println!("zero gradients: Gamma = {:.4}", gamma1(&flat).0);
    let (best, field) = minimize_seminorm(&base, &values)?;
    println!("optimized:      Gamma = {best:.4}");
    for (x, g) in xs.iter().zip(field.gradients()) {
        println!("  D f({x:>4}) = {:>7.4}   (true {x})", g[0]);
    }
    Ok(())
}
