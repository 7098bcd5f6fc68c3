//! Least-squares fit of noisy samples under a bound on the gradient's
//! Lipschitz constant.

use c11fit::erm::{solve, RegressionProblem};
use c11fit::gamma::gamma1;
use c11fit::PointSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> c11fit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<f64> = (0..12).map(|i| i as f64 / 11.0 * 2.0 - 1.0).collect();
    let y: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.05 * rng.random_range(-1.0..1.0)).collect();
    let base = PointSet::new(xs.iter().map(|&x| vec![x]).collect())?;

    for m in [0.5, 2.0, 8.0] {
        let report = solve(&RegressionProblem::new(base.clone(), y.clone(), m)?)?;
        println!(
            "M = {m:>3}: mean squared residual {:.3e}, Gamma = {:.4}, {} iterations",
            report.objective,
            gamma1(&report.field).0,
            report.iterations
        );
    }
    Ok(())
}
