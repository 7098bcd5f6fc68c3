//! The smallest gradient Lipschitz constant of a 1-field, exactly and by grid search.

use c11fit::gamma::{gamma1, gamma1_bruteforce};
use c11fit::{OneField, PointSet};

fn main() -> c11fit::Result<()> {
    // step from 0 to 1 with flat jets: the best bridge is 2x^2 then 1 - 2(1-x)^2
    let base = PointSet::new(vec![vec![0.0], vec![1.0]])?;
    let step = OneField::new(base, vec![0.0, 1.0], vec![vec![0.0], vec![0.0]])?;
    let (value, cert) = gamma1(&step);
    let cert = cert.expect("two distinct jets");
    println!("step: Gamma = {value}, pair ({}, {}), z = {:?}", cert.a_idx, cert.b_idx, cert.z);

    let base = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 0.8], vec![-0.5, 0.4]])?;
    let field = OneField::new(
        base,
        vec![0.1, -0.3, 0.4, 0.0],
        vec![vec![0.5, -0.2], vec![0.0, 0.3], vec![-0.4, 0.1], vec![0.2, 0.2]],
    )?;
    let (exact, _) = gamma1(&field);
    for grid in [25, 100, 400] {
        let approx = gamma1_bruteforce(&field, grid)?;
        println!("grid {grid:>3}: {approx:.6}  (exact {exact:.6})");
    }
    Ok(())
}
