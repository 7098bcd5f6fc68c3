//! Volumetric-center cutting planes on a toy problem: minimize a linear
//! function over a disk that is only known through a separation oracle.

use c11fit::cutplane::{run_minimize, Halfspace, OracleResponse, Outcome, SolverConfig};

fn main() -> c11fit::Result<()> {
    let center = [0.3, -0.2];
    let radius = 0.5;
    let mut disk = |x: &[f64]| {
        let u = [x[0] - center[0], x[1] - center[1]];
        let r = u[0].hypot(u[1]);
        if r <= radius {
            return OracleResponse::Inside;
        }
        // tangent plane at the closest boundary point
        let w = vec![u[0] / r, u[1] / r];
        let offset = w[0] * center[0] + w[1] * center[1] + radius;
        OracleResponse::Cut(Halfspace::new(w, offset).expect("unit normal"))
    };
    let mut objective = |x: &[f64]| (x[0] + x[1], vec![1.0, 1.0]);

    let cfg = SolverConfig::for_problem(2, 2.0, 20.0)?.with_max_iters(2000);
    println!("budget from the volume argument: {} iterations", SolverConfig::for_problem(2, 2.0, 20.0)?.max_iters);
    match run_minimize(&mut disk, &mut objective, 2, cfg)? {
        Outcome::Minimizer { point, objective, iterations, .. } => {
            let exact = center[0] + center[1] - radius * 2f64.sqrt();
            println!("after {iterations} iterations: x = {point:.5?}, value {objective:.6} (exact {exact:.6})");
        }
        other => println!("no minimizer: {other:?}"),
    }
    Ok(())
}
