//! Finite-difference table for the calculus of a translated, sheared body.

use symcap::body::ConvexBody;
use symcap::checks::gradcheck;

pub fn run_example() -> symcap::Result<()> {
    let body = ConvexBody::from_json(
        r#"{"type":"transform","base":{"type":"ellipsoid","a":[1.0,2.0]},
            "M":[[1,0.4,0,0],[0,1,0,0],[0,0,1,0.2],[0,0,0,1]],"b":[0.05,0.02,-0.03,0.01]}"#,
    )?;
    for row in gradcheck(&body, 16, 128, 100, 7)? {
        println!(
            "{:<26} {:>4} {:>10.2e} < {:<6.0e} {}",
            row.check, row.samples, row.max_error, row.tol, row.pass
        );
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
