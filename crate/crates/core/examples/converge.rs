//! Capacities of E(1,2) across truncations and grids.

use symcap::cli::{cmd_converge, Command, RunConfig};

pub fn run_example() -> symcap::Result<()> {
    let cfg = RunConfig {
        no_timestamp: true,
        ..RunConfig::new(Command::Converge)
    }
    .with_body(r#"{"type":"ellipsoid","a":[1,2]}"#);
    let out = cmd_converge(&cfg)?;
    for r in &out.rows {
        println!("l_max {:>2} grid {:>4}: {:?}", r.l_max, r.grid, r.caps);
    }
    for d in &out.deltas {
        println!("grid {:>4} c_{}: |64 - 32| = {:?}", d.grid, d.k, d.delta);
    }
    Ok(())
}

fn main() -> symcap::Result<()> {
    run_example()
}
