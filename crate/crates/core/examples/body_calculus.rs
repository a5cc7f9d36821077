//! Gauge, conjugate and support function of a body given as JSON, before and
//! after an affine transform.

use nalgebra::{DMatrix, DVector};
use symcap::body::{transform, ConvexBody};

pub fn run_example() -> symcap::Result<()> {
    let body = ConvexBody::from_json(r#"{"type":"ellipsoid","a":[1.0,2.0]}"#)?;
    let x = [0.3, -0.1, 0.2, 0.4];
    let h = body.gauge_eval(&x)?;
    let g = body.gauge_grad(&x)?;
    println!("H(x) = {h:.6}  |grad H| = {:.6}", g.norm());

    // the conjugate inverts the gradient map
    let back = body.fenchel_grad(g.as_slice())?;
    println!(
        "|grad H*(grad H(x)) - x| = {:.2e}",
        (back - DVector::from_column_slice(&x)).norm()
    );
    let w = [1.0, 0.5, -0.2, 0.1];
    let hs = body.fenchel_eval(&w)?;
    let sup = body.support_eval(&w)?;
    println!("H*(w) = {hs:.6}  h(w)^2/4 = {:.6}", 0.25 * sup * sup);

    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.2, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.1, 0.0, 0.0, 0.0, 0.3, 0.9,
        ],
    );
    let b = DVector::from_vec(vec![0.05, 0.0, -0.02, 0.01]);
    let moved = transform(&body, &m, &b)?;
    println!(
        "transformed: gauge at b = {:.3e}",
        moved.gauge_eval(b.as_slice())?
    );
    println!(
        "ellipsoid-equivalent axes: {:?}",
        moved.ellipsoid_equivalent()
    );
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
