//! Compute a small LASSO path and print every piece (the README example).

use l1path::nalgebra::DMatrix;
use l1path::path::{eval_path, path_bffd};
use l1path::ssm::StateSpaceModel;

fn main() -> Result<(), l1path::Error> {
    let f = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 0.2, 1.1, 0.5, 0.4]);
    let y = [1.0, -0.5, 0.8];
    let model = StateSpaceModel::lasso_model(&f, &y)?;

    let path = path_bffd(&model)?; // the entire LASSO path
    for piece in &path.pieces {
        println!(
            "σ² ∈ [{}, {}): û₀ = {}·σ² + {}",
            piece.lo, piece.hi, piece.coeffs[0].c1, piece.coeffs[0].c0
        );
    }
    let u_at = eval_path(&path, 0.25); // û(σ² = 0.25), exact
    assert_eq!(u_at.len(), 2);
    Ok(())
}
