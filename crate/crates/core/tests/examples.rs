#[allow(dead_code)]
#[path = "../examples/besse_zoll.rs"]
mod besse_zoll;
#[allow(dead_code)]
#[path = "../examples/body_calculus.rs"]
mod body_calculus;
#[allow(dead_code)]
#[path = "../examples/capacities.rs"]
mod capacities;
#[allow(dead_code)]
#[path = "../examples/converge.rs"]
mod converge;
#[allow(dead_code)]
#[path = "../examples/gradcheck.rs"]
mod gradcheck;
#[allow(dead_code)]
#[path = "../examples/index.rs"]
mod index;
#[allow(dead_code)]
#[path = "../examples/oracle.rs"]
mod oracle;
#[allow(dead_code)]
#[path = "../examples/orbit.rs"]
mod orbit;
#[allow(dead_code)]
#[path = "../examples/profile.rs"]
mod profile;
#[allow(dead_code)]
#[path = "../examples/spectrum.rs"]
mod spectrum;

#[test]
fn body_calculus_example_runs() {
    body_calculus::run_example().expect("body_calculus example");
}

#[test]
fn oracle_example_runs() {
    oracle::run_example().expect("oracle example");
}

#[test]
fn profile_example_runs() {
    profile::run_example().expect("profile example");
}

#[test]
fn spectrum_example_runs() {
    spectrum::run_example().expect("spectrum example");
}

#[test]
fn orbit_example_runs() {
    orbit::run_example().expect("orbit example");
}

#[test]
fn index_example_runs() {
    index::run_example().expect("index example");
}

#[test]
fn capacities_example_runs() {
    capacities::run_example().expect("capacities example");
}

#[test]
fn besse_zoll_example_runs() {
    besse_zoll::run_example().expect("besse_zoll example");
}

#[test]
fn gradcheck_example_runs() {
    gradcheck::run_example().expect("gradcheck example");
}

#[test]
fn converge_example_runs() {
    converge::run_example().expect("converge example");
}
