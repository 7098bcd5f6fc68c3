//! Extend a 1-field to the plane with the minimal gradient Lipschitz constant.

use c11fit::gamma::gamma1;
use c11fit::wells::{build_complex, check_wells_condition, lip_gradient_estimate, CellComplex};
use c11fit::{OneField, PointSet};

fn main() -> c11fit::Result<()> {
    let base = PointSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.8]])?;
    let field = OneField::new(
        base,
        vec![0.0, 0.5, -0.2, 0.3],
        vec![vec![0.0, 0.0], vec![0.4, 0.1], vec![-0.1, -0.3], vec![0.2, 0.2]],
    )?;
    let (m, _) = gamma1(&field);
    println!("Gamma = {m:.5}, Wells slack {:.2e}", check_wells_condition(&field, m).slack);

    let complex = build_complex(&field, m)?;
    println!("{} cells", complex.cells.len());
    for x in [[0.0, 0.0], [0.5, 0.5], [2.0, -1.0]] {
        let e = complex.eval(&x)?;
        println!("f({x:?}) = {:.5}, grad {:.5?}, cell {:?}", e.value, e.gradient, e.cell);
    }
    println!("sampled Lip(grad) = {:.5}", lip_gradient_estimate(&complex, 20_000, 1)?);

    // the complex round-trips through JSON for caching
    let json = serde_json::to_string(&complex)?;
    let back: CellComplex = serde_json::from_str(&json)?;
    assert_eq!(back.eval(&[0.5, 0.5])?.value, complex.eval(&[0.5, 0.5])?.value);
    println!("cached complex: {} bytes of JSON", json.len());
    Ok(())
}
