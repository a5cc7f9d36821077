//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcap::body::{transform, ConvexBody};
use symcap::capacities::{besse_check, zoll_check};
use symcap::checks::gradcheck;
use symcap::cli::{self, cmd_besse, cmd_capacities, cmd_converge, Command, RunConfig};
use symcap::linalg::random_symplectic;
use symcap::pipeline::{analyze, spectrum, PipelineOptions, SAME_ACTION};
use symcap::profile::{build_profile, profile_check, smoothed_k, ProfileFamily};

const C1_REL: f64 = 1e-6;
const C1_SECONDS: f64 = 30.0;
const HIGHER_REL: f64 = 1e-4;
const BESSE_TOL: f64 = 1e-6;
const ORBIT_RES: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-9;
const FD_REL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-6;
const CALCULUS_SAMPLES: usize = 100;
const CONFORMAL_REL: f64 = 1e-5;
const TRANSLATION_REL: f64 = 1e-5;
const SYMPLECTIC_REL: f64 = 1e-4;
const SYMPLECTIC_TRIALS: usize = 10;
const PROFILE_PAIRS: usize = 20;
const SCALAR_RES: f64 = 1e-12;
const CONVERGE_DELTA: f64 = 1e-7;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ell_json(a: &[f64]) -> String {
    serde_json::json!({"type": "ellipsoid", "a": a}).to_string()
}

fn cfg(command: Command, body: &str) -> RunConfig {
    let mut c = RunConfig::new(command).with_body(body);
    c.no_timestamp = true;
    c
}

fn ellipsoids() -> Vec<Vec<f64>> {
    vec![vec![1.0, 2.0], vec![1.0, 2f64.sqrt()], vec![1.0, 1.3, 2.7]]
}

// k-th smallest of the multiset {m·a_i}, by merging the arithmetic sequences
fn oracle(a: &[f64], k: usize) -> Vec<f64> {
    let mut next = vec![1.0f64; a.len()];
    (0..k)
        .map(|_| {
            let i = (0..a.len())
                .min_by(|&i, &j| (next[i] * a[i]).total_cmp(&(next[j] * a[j])))
                .unwrap();
            next[i] += 1.0;
            (next[i] - 1.0) * a[i]
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_systole() -> Check {
    let mut notes = Vec::new();
    for a in ellipsoids() {
        let t = Instant::now();
        let out =
            cmd_capacities(&cfg(Command::Capacities, &ell_json(&a))).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let c1 = out.capacities.value(1).ok_or("c1 missing")?;
        ensure(rel(c1, a[0]) < C1_REL, || format!("{a:?}: c1 = {c1}"))?;
        ensure(secs < C1_SECONDS, || format!("{a:?}: {secs:.1} s"))?;
        notes.push(format!("{a:?} {secs:.1}s"));
    }
    Ok(notes.join(", "))
}

fn c2_higher() -> Check {
    let mut worst = 0.0f64;
    for a in ellipsoids() {
        let out =
            cmd_capacities(&cfg(Command::Capacities, &ell_json(&a))).map_err(|e| e.to_string())?;
        let want = oracle(&a, 4);
        for (k, w) in want.iter().enumerate() {
            let v = out
                .capacities
                .value(k + 1)
                .ok_or_else(|| format!("{a:?}: c{} missing", k + 1))?;
            worst = worst.max(rel(v, *w));
            ensure(rel(v, *w) < HIGHER_REL, || {
                format!("{a:?}: c{} = {v}, oracle {w}", k + 1)
            })?;
        }
        ensure(!out.capacities.monotonicity_fired(), || {
            format!("{a:?}: monotonicity enforcement fired")
        })?;
    }
    Ok(format!("max rel err {worst:.1e}"))
}

fn c3_besse() -> Check {
    let b = cmd_besse(&cfg(Command::Besse, &ell_json(&[1.0, 2.0]))).map_err(|e| e.to_string())?;
    let bs = b.besse.ok_or("E(1,2) not Besse")?;
    ensure(
        bs.i == 2 && (bs.tau - 2.0).abs() < BESSE_TOL && bs.mu == 4,
        || format!("E(1,2): {bs:?}"),
    )?;
    let formula = 2.0 * (bs.tau / 1.0 + bs.tau / 2.0) - 2.0;
    ensure((bs.mu as f64 - formula).abs() < BESSE_TOL, || {
        format!("mu {} vs formula {formula}", bs.mu)
    })?;
    ensure(!b.zoll, || "E(1,2) reported Zoll".into())?;

    let ball =
        cmd_besse(&cfg(Command::Besse, &ell_json(&[1.0, 1.0]))).map_err(|e| e.to_string())?;
    ensure(ball.zoll, || "ball not Zoll".into())?;

    let irr = cmd_besse(&cfg(Command::Besse, &ell_json(&[1.0, 2f64.sqrt()])))
        .map_err(|e| e.to_string())?;
    ensure(irr.besse.is_none(), || {
        format!("E(1,sqrt 2) Besse: {:?}", irr.besse)
    })?;
    Ok("E(1,2) = (2, 2, 4); ball Zoll; E(1,sqrt 2) none".into())
}

fn sheared(a: &[f64], seed: u64, shift: f64) -> ConvexBody {
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_symplectic(n, &mut rng, 0.3);
    let b = DVector::from_fn(2 * n, |i, _| shift * (i as f64 - 0.5));
    transform(&ConvexBody::ellipsoid(a).unwrap(), &m, &b).unwrap()
}

fn bodies() -> Vec<(String, ConvexBody)> {
    let mut out: Vec<(String, ConvexBody)> = ellipsoids()
        .into_iter()
        .map(|a| (format!("E{a:?}"), ConvexBody::ellipsoid(&a).unwrap()))
        .collect();
    out.push((
        "symplectic image of E(1,2)".into(),
        sheared(&[1.0, 2.0], 5, 0.0),
    ));
    out.push((
        "translated image of E(1,2)".into(),
        sheared(&[1.0, 2.0], 6, 0.04),
    ));
    out
}

fn c4_orbits() -> Check {
    let mut count = 0;
    let mut worst = 0.0f64;
    for (name, body) in bodies() {
        // the translated gauge is not quadratic; its high windings need more modes
        let opts = if name.starts_with("translated") {
            PipelineOptions {
                l_max: 64,
                grid: 1024,
                ..PipelineOptions::default()
            }
        } else {
            PipelineOptions::default()
        };
        for c in spectrum(&body, &opts).map_err(|e| e.to_string())? {
            let (b, o) = (c.boundary_residual.unwrap(), c.ode_residual.unwrap());
            worst = worst.max(b).max(o);
            ensure(b < ORBIT_RES && o < ORBIT_RES, || {
                format!("{name} {}: residuals {b:e} {o:e}", c.id)
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} circles, max residual {worst:.1e}"))
}

fn c5_calculus() -> Check {
    let mut q = nalgebra::DMatrix::from_fn(4, 4, |i, j| 0.2 * ((i + 2 * j) % 3) as f64);
    q = &q * q.transpose() + nalgebra::DMatrix::identity(4, 4) * 2.0;
    let classes = vec![
        (
            "ellipsoid",
            ConvexBody::ellipsoid(&[1.0, 1.3, 2.7]).unwrap(),
        ),
        ("quadratic", ConvexBody::quadratic(q).unwrap()),
        ("transformed", sheared(&[1.0, 2.0], 9, 0.0)),
        ("translated", sheared(&[1.0, 2.0], 10, 0.05)),
    ];
    for (name, body) in classes {
        let rows = gradcheck(&body, 8, 64, CALCULUS_SAMPLES, 1).map_err(|e| e.to_string())?;
        for r in rows {
            let tol = match r.check.as_str() {
                "fenchel_inverse" | "support_identity" => IDENTITY_TOL,
                "reduced_hessian_symmetry" => SYMMETRY_TOL,
                _ => FD_REL,
            };
            ensure(r.samples >= 1 && r.max_error < tol, || {
                format!("{name} {}: {:e} (tol {tol:e})", r.check, r.max_error)
            })?;
            // loop-space rows sample fewer loops; the pointwise ones carry the sample count
            let pointwise = !matches!(
                r.check.as_str(),
                "ratio_grad_fd" | "free_grad_h1_fd" | "reduced_hessian_symmetry"
            );
            if pointwise {
                ensure(r.samples >= CALCULUS_SAMPLES, || {
                    format!("{name} {}: {} samples", r.check, r.samples)
                })?;
            }
        }
    }
    Ok(format!("{CALCULUS_SAMPLES} samples x 4 body classes"))
}

fn caps_of(body: &ConvexBody) -> std::result::Result<Vec<f64>, String> {
    let r = analyze(body, &PipelineOptions::default()).map_err(|e| e.to_string())?;
    let v = r.capacities.values();
    ensure(v.len() == 4, || format!("only {} capacities", v.len()))?;
    Ok(v)
}

fn distinct_below(body: &ConvexBody, cut: f64) -> std::result::Result<Vec<f64>, String> {
    let opts = PipelineOptions {
        l_max: 16,
        grid: 128,
        ..PipelineOptions::default()
    };
    let mut out: Vec<f64> = Vec::new();
    for c in spectrum(body, &opts).map_err(|e| e.to_string())? {
        if c.action < cut
            && out
                .last()
                .is_none_or(|l| (c.action - l).abs() > SAME_ACTION * l)
        {
            out.push(c.action);
        }
    }
    Ok(out)
}

fn c6_invariance() -> Check {
    let base = ConvexBody::ellipsoid(&[1.0, 2.0]).unwrap();
    let caps = caps_of(&base)?;
    let lam = 1.7;
    let scaled = transform(
        &base,
        &(nalgebra::DMatrix::identity(4, 4) * lam),
        &DVector::zeros(4),
    )
    .unwrap();
    for (s, c) in caps_of(&scaled)?.iter().zip(&caps) {
        ensure(rel(*s, lam * lam * c) < CONFORMAL_REL, || {
            format!("conformality: {s} vs {}", lam * lam * c)
        })?;
    }
    let moved = transform(
        &base,
        &nalgebra::DMatrix::identity(4, 4),
        &DVector::from_vec(vec![0.1, -0.05, 0.2, 0.0]),
    )
    .unwrap();
    for (s, c) in caps_of(&moved)?.iter().zip(&caps) {
        ensure(rel(*s, *c) < TRANSLATION_REL, || {
            format!("translation: {s} vs {c}")
        })?;
    }
    let reference = distinct_below(&base, 3.5)?;
    for seed in 0..SYMPLECTIC_TRIALS as u64 {
        let got = distinct_below(&sheared(&[1.0, 2.0], 100 + seed, 0.0), 3.5)?;
        ensure(got.len() == reference.len(), || {
            format!("seed {seed}: {got:?} vs {reference:?}")
        })?;
        for (g, r) in got.iter().zip(&reference) {
            ensure(rel(*g, *r) < SYMPLECTIC_REL, || {
                format!("seed {seed}: {got:?} vs {reference:?}")
            })?;
        }
    }
    Ok(format!(
        "lambda = {lam}; {SYMPLECTIC_TRIALS} symplectic images agree"
    ))
}

fn c7_profiles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    while pairs < PROFILE_PAIRS {
        let n = rng.gen_range(1..=3);
        let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
        a.sort_by(f64::total_cmp);
        let body = sheared(&a, rng.gen(), 0.0);
        let spec = oracle(&body.ellipsoid_equivalent(), 8);
        let eta = rng.gen_range(1.05 * spec[0]..spec[5]);
        if spec.iter().any(|t| (t - eta).abs() < 1e-3 * eta) {
            continue;
        }
        pairs += 1;
        for family in [ProfileFamily::FstarLin, ProfileFamily::FLin] {
            let p =
                build_profile(eta, &spec, family).map_err(|e| format!("{a:?} eta {eta}: {e}"))?;
            for c in profile_check(&p).conditions {
                worst = worst.min(c.margin);
                ensure(c.pass && c.margin > 0.0, || {
                    format!("{family:?} {a:?} eta {eta}: {} margin {}", c.name, c.margin)
                })?;
            }
            for _ in 0..20 {
                let w: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let hs = body.fenchel_eval(&w).map_err(|e| e.to_string())?;
                let (k, _) = smoothed_k(&p, hs).map_err(|e| e.to_string())?;
                let r = (p.dphi(k * k * hs) * k - 1.0).abs();
                ensure(r < SCALAR_RES, || format!("scalar residual {r:e}"))?;
            }
        }
    }
    Ok(format!("{PROFILE_PAIRS} pairs, min margin {worst:.2e}"))
}

fn c8_band() -> Check {
    let mut count = 0;
    for (name, body) in bodies() {
        let an = analyze(&body, &PipelineOptions::default()).map_err(|e| e.to_string())?;
        let (eps, eta) = (an.profile.epsilon(), an.profile.eta);
        for c in &an.circles {
            if let Some(v) = c.free_value {
                ensure(eps < v && v < eta, || {
                    format!("{name} {}: {v} outside ({eps}, {eta})", c.id)
                })?;
                count += 1;
            }
        }
    }
    ensure(count > 0, || "no free-route critical points".into())?;
    Ok(format!("{count} free critical points in band"))
}

fn c9_converge() -> Check {
    let out =
        cmd_converge(&cfg(Command::Converge, &ell_json(&[1.0, 2.0]))).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    ensure(!out.deltas.is_empty(), || "no deltas".into())?;
    for d in out.deltas.iter().filter(|d| d.k <= 4) {
        let v = d
            .delta
            .ok_or_else(|| format!("grid {} c{} missing", d.grid, d.k))?;
        worst = worst.max(v);
        ensure(v < CONVERGE_DELTA, || {
            format!("grid {} c{}: delta {v:e}", d.grid, d.k)
        })?;
    }
    Ok(format!("max delta {worst:.1e}"))
}

fn c10_determinism() -> Check {
    let body = ell_json(&[1.0, 1.3, 2.7]);
    for cmd in [Command::Spectrum, Command::Capacities, Command::Besse] {
        let mut c = cfg(cmd, &body);
        c.seed = 42;
        let a = cli::run(&c).map_err(|e| e.to_string())?;
        let b = cli::run(&c).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{cmd:?}: reports differ"))?;
    }
    let caps = analyze(
        &ConvexBody::ellipsoid(&[1.0, 2.0]).unwrap(),
        &PipelineOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        besse_check(&caps.capacities, BESSE_TOL).is_ok()
            && zoll_check(&caps.capacities, BESSE_TOL).is_ok(),
        || "checks failed on a full report".into(),
    )?;
    Ok("spectrum, capacities, besse byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("systole c1", c1_systole),
        ("higher capacities", c2_higher),
        ("Besse/Zoll", c3_besse),
        ("orbit certification", c4_orbits),
        ("calculus identities", c5_calculus),
        ("invariance", c6_invariance),
        ("profile validity", c7_profiles),
        ("smoothed band", c8_band),
        ("convergence", c9_converge),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
