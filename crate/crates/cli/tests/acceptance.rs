//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness. `cargo test --test acceptance -- 3 7`
//! restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use kpp_core::analysis::{find_attractor_from_constant, liouville_check, tail_gap_profile};
use kpp_core::evolve::comparison_harness;
use kpp_core::reaction::{FourierTerm, Periods, Trig};
use kpp_core::spectral::EigenOptions;
use kpp_core::{
    build_domain, principal_growth, variational_speed, Cell, CellProblem, Coefficient, DispersalSpec, DomainSpec,
    Field, IntegratorSpec, KernelSpec, LatticeRates, Model, ParametricKpp, Perturbation, ReactionSpec, TiltSpec,
};
use kpp_lab::commands::front_speed;
use kpp_lab::config::{FrontBlock, Prepared, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn prepare(config: Value) -> Result<Prepared> {
    let config: RunConfig = serde_json::from_value(config)?;
    Ok(config.prepare(Path::new("."))?)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kpp-lab"))
}

/// Writes `config` to a scratch directory and runs `kpp-lab <command>` on it.
fn run_cli(command: &str, config: &Value) -> Result<(i32, tempfile::TempDir)> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config)?)?;
    let status = binary()
        .arg(command)
        .arg(&path)
        .arg("--output-dir")
        .arg(dir.path().join("out"))
        .output()?
        .status;
    Ok((status.code().context("killed by signal")?, dir))
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn num(v: &Value, key: &str) -> Result<f64> {
    v[key].as_f64().with_context(|| format!("missing number {key}"))
}

// ---------------------------------------------------------------------------
// media shared by several criteria

#[derive(Clone, Copy)]
enum Medium {
    Fisher,
    SpacePeriodic,
    TimePeriodic,
}

impl Medium {
    const ALL: [Medium; 3] = [Medium::Fisher, Medium::SpacePeriodic, Medium::TimePeriodic];

    fn label(self) -> &'static str {
        match self {
            Medium::Fisher => "a",
            Medium::SpacePeriodic => "b",
            Medium::TimePeriodic => "c",
        }
    }

    fn r0(self) -> Value {
        match self {
            Medium::Fisher => json!({ "form": "constant", "value": 1.0 }),
            Medium::SpacePeriodic => json!({
                "form": "fourier", "mean": 1.0,
                "terms": [{ "amplitude": 0.3, "space": [1, 0], "trig": "cos" }]
            }),
            Medium::TimePeriodic => json!({
                "form": "fourier", "mean": 1.0,
                "terms": [{ "amplitude": 0.5, "time": 1, "trig": "sin" }]
            }),
        }
    }

    fn reaction(self, bump: Option<f64>) -> Value {
        let mut r = json!({ "r0": self.r0() });
        if let Some(amplitude) = bump {
            r["perturbation"] = json!({ "shape": "bump", "amplitude": amplitude, "radius": 5.0 });
        }
        r
    }
}

fn line_config(half_extent: f64, buffer: f64, reaction: Value) -> Value {
    json!({
        "domain": { "kind": "continuum", "dim": 1, "half_extent": half_extent, "h": 0.1,
                    "periods": [1.0], "buffer": buffer },
        "dispersal": { "kind": "random" },
        "reaction": reaction,
        "integrator": { "scheme": "explicit_euler", "dt": 0.002 },
        "record_every": 500,
        "seed": 20240607
    })
}

// ---------------------------------------------------------------------------
// 1. Fisher-KPP variational speed through the CLI

fn fisher_speed() -> Result<Outcome> {
    let config = json!({
        "domain": { "kind": "continuum", "dim": 1, "half_extent": 50.0, "h": 0.05, "periods": [1.0] },
        "dispersal": { "kind": "random" },
        "reaction": {}
    });
    let start = Instant::now();
    let (code, dir) = run_cli("speed", &config)?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(code == 0, "kpp-lab speed exited with {code}");
    let report = read_json(&dir.path().join("out/speed.json"))?;
    let (c, mu) = (num(&report, "c_star")?, num(&report, "mu_star")?);
    let pass = (c - 2.0).abs() < 1e-3 && (mu - 1.0).abs() < 1e-3 && secs < 30.0;
    Ok(Outcome::new(pass, format!("c*={c:.7} mu*={mu:.7} in {secs:.2}s")))
}

// ---------------------------------------------------------------------------
// 2. lattice speed against a dense grid of the exact symbol

fn lattice_speed() -> Result<Outcome> {
    let oracle = (0..=49_900)
        .map(|k| 0.01 + k as f64 * 1e-4)
        .map(|mu| (2.0 * f64::cosh(mu) - 1.0) / mu)
        .fold(f64::INFINITY, f64::min);
    let p = prepare(json!({
        "domain": { "kind": "lattice", "dim": 1, "radius": 10, "periods": [1.0] },
        "dispersal": { "kind": "discrete", "rate": 1.0 },
        "reaction": {}
    }))?;
    let problem = CellProblem::from_reaction(&p.reaction, &p.dispersal, p.domain.cell())?;
    let res = variational_speed(&problem, &[1.0], &Default::default())?;
    let gap = (res.c_star - oracle).abs();
    Ok(Outcome::new(
        gap < 1e-4,
        format!("c*={:.9} oracle={oracle:.9} gap={gap:.1e}", res.c_star),
    ))
}

// ---------------------------------------------------------------------------
// 3. fitted front speed against the variational speed, with and without a bump

fn front_consistency() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for medium in Medium::ALL {
        let base = prepare(line_config(400.0, 5.0, medium.reaction(None)))?;
        let problem = CellProblem::from_reaction(&base.reaction, &base.dispersal, base.domain.cell())?;
        let c0 = variational_speed(&problem, &[1.0], &Default::default())?.c_star;
        // the front starts at -200 so it crosses the bump at the origin mid-run
        let front = FrontBlock {
            offset: -200.0,
            ..FrontBlock::default()
        };
        let plain = front_speed(&base, &front)?.speed;
        let mut worst_c0 = (plain - c0).abs() / c0;
        let mut worst_bump: f64 = 0.0;
        for amplitude in [0.5, -0.5] {
            let p = prepare(line_config(400.0, 5.0, medium.reaction(Some(amplitude))))?;
            let s = front_speed(&p, &front)?.speed;
            worst_c0 = worst_c0.max((s - c0).abs() / c0);
            worst_bump = worst_bump.max((s - plain).abs() / plain);
        }
        pass &= worst_c0 <= 0.05 && worst_bump <= 0.02;
        parts.push(format!(
            "({}) c0*={c0:.4} fit={plain:.4} vs c0* {:.2}% vs bump {:.2}%",
            medium.label(),
            100.0 * worst_c0,
            100.0 * worst_bump
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 4. uniqueness of the periodic attractor

fn liouville() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for medium in Medium::ALL {
        let p = prepare(line_config(60.0, 10.0, medium.reaction(Some(0.5))))?;
        let (report, _) = liouville_check(&p.model()?, &p.starts()?, &p.config.experiment.attractor)?;
        pass &= report.max_distance < 1e-6 && report.part_metric_violation <= 1e-12;
        parts.push(format!(
            "({}) max dist {:.1e} part-metric rise {:.1e}",
            medium.label(),
            report.max_distance,
            report.part_metric_violation
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 5. tail of the perturbed attractor

fn tail() -> Result<Outcome> {
    let p = prepare(line_config(60.0, 10.0, Medium::SpacePeriodic.reaction(Some(0.5))))?;
    let model = p.model()?;
    let opts = &p.config.experiment.attractor;
    let u_star = find_attractor_from_constant(&model, p.reaction.m0(), opts)?;
    let reference = model.with_reaction(p.reaction.reference())?;
    let u0_star = find_attractor_from_constant(&reference, p.reaction.m0(), opts)?;
    let report = tail_gap_profile(&u_star, &u0_star, &[2.0, 5.0, 10.0, 20.0, 40.0], 1e-2)?;
    let gaps: Vec<String> = report.rows.iter().map(|r| format!("{:.1e}", r.gap)).collect();
    let pass = report.monotone && report.final_gap < 1e-2;
    Ok(Outcome::new(pass, format!("gaps [{}]", gaps.join(", "))))
}

// ---------------------------------------------------------------------------
// 6. comparison principle on random ordered pairs

fn comparison() -> Result<Outcome> {
    let continuum = DomainSpec::continuum(1, 3.0, 0.25, 1.0);
    let classes = [
        ("random", continuum.clone(), DispersalSpec::Random),
        (
            "nonlocal",
            continuum,
            DispersalSpec::Nonlocal {
                kernel: KernelSpec::bump(1.0)?,
            },
        ),
        (
            "lattice",
            DomainSpec::lattice(1, 12, 1),
            DispersalSpec::Discrete {
                rates: LatticeRates::symmetric(1, 1.0),
            },
        ),
    ];
    let reaction = ReactionSpec::kpp(
        ParametricKpp {
            r0: Coefficient::space_cosine(1.0, 0.3),
            b: Coefficient::constant(1.0),
            perturbation: Perturbation::Bump {
                amplitude: 0.5,
                radius: 1.5,
            },
        },
        1.0,
        &[1.0],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec, dispersal) in classes {
        let domain = Arc::new(build_domain(&spec)?);
        let model = Model::new(&domain, &dispersal, reaction.clone(), IntegratorSpec::euler(0.01))?;
        let n = domain.len();
        let (mut failures, mut worst) = (0, f64::INFINITY);
        for _ in 0..100 {
            let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            // about a fifth of the points touch
            let hi: Vec<f64> = lo
                .iter()
                .map(|&a| if rng.gen_bool(0.2) { a } else { a + rng.gen_range(0.0..1.0) })
                .collect();
            let rep = comparison_harness(
                &model,
                &Field::new(domain.clone(), lo, 0.0)?,
                &Field::new(domain.clone(), hi, 0.0)?,
                1.0,
                10,
            )?;
            failures += usize::from(!rep.pass);
            worst = worst.min(rep.min_gap);
        }
        pass &= failures == 0;
        parts.push(format!("{name} {failures}/100 failed, min gap {worst:.1e}"));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 7. spectral closed forms and invariants

fn cell(dim: usize, h: f64) -> Result<Cell> {
    Ok(build_domain(&DomainSpec::continuum(dim, 1.0, h, 1.0))?.cell().clone())
}

fn lambda(p: &CellProblem, xi: &[f64], mu: f64) -> Result<f64> {
    Ok(principal_growth(p, &TiltSpec::new(xi, mu)?, &EigenOptions::default())?.lambda)
}

fn mixed(mean: f64) -> Coefficient {
    let term = |amplitude, time, space, trig| FourierTerm {
        amplitude,
        time,
        space,
        trig,
        phase: 0.0,
    };
    Coefficient::Fourier {
        mean,
        terms: vec![term(0.4, 0, [1, 0], Trig::Cos), term(0.3, 1, [0, 0], Trig::Sin)],
    }
}

fn spectral() -> Result<Outcome> {
    let periods = Periods {
        time: 1.0,
        space: [1.0, 1.0],
    };
    let mut errs = [0.0f64; 6];

    let random = CellProblem::new(cell(1, 0.05)?, DispersalSpec::Random, Coefficient::constant(0.3), periods)?;
    for mu in [0.5, 1.0, 2.0] {
        errs[0] = errs[0].max((lambda(&random, &[1.0], mu)? - (mu * mu + 0.3)).abs());
    }

    let lattice_cell = build_domain(&DomainSpec::lattice(1, 4, 1))?.cell().clone();
    let rates = DispersalSpec::Discrete {
        rates: LatticeRates::symmetric(1, 1.0),
    };
    let lattice = CellProblem::new(lattice_cell, rates, Coefficient::constant(0.4), periods)?;
    for mu in [0.3, 1.0, 2.0] {
        let exact = 2.0 * f64::cosh(mu) - 2.0 + 0.4;
        errs[1] = errs[1].max((lambda(&lattice, &[1.0], mu)? - exact).abs());
    }

    // direct summation over the midpoint-quadrature bump weights
    let (h, r) = (0.1f64, 1.0f64);
    let reach = (r / h).ceil() as i64;
    let raw: Vec<(f64, f64)> = (-reach..=reach)
        .map(|k| (k as f64 * h, (k as f64 * h / r).abs()))
        .filter(|&(_, s)| s < 1.0)
        .map(|(z, s)| (z, (-1.0 / (1.0 - s * s)).exp()))
        .collect();
    let mass: f64 = raw.iter().map(|(_, w)| w).sum();
    let kernel = DispersalSpec::Nonlocal {
        kernel: KernelSpec::bump(r)?,
    };
    let nonlocal = CellProblem::new(cell(1, h)?, kernel, Coefficient::constant(0.5), periods)?;
    for mu in [0.0, 0.7, 2.5] {
        let moment: f64 = raw.iter().map(|(z, w)| w / mass * (mu * z).exp()).sum();
        errs[2] = errs[2].max((lambda(&nonlocal, &[1.0], mu)? - (moment - 0.5)).abs());
    }

    let base = CellProblem::new(cell(1, 0.1)?, DispersalSpec::Random, mixed(0.2), periods)?;
    let shifted = base.with_coefficient(mixed(1.7));
    for mu in [0.0, 0.8] {
        let d = lambda(&shifted, &[1.0], mu)? - lambda(&base, &[1.0], mu)?;
        errs[3] = errs[3].max((d - 1.5).abs());
    }

    // 0.75 + 0.4 cos >= 0.3 sin + 0.4 cos pointwise
    let lo = base.with_coefficient(mixed(0.0));
    let hi = base.with_coefficient(Coefficient::space_cosine(0.75, 0.4));
    errs[4] = (lambda(&lo, &[1.0], 0.5)? - lambda(&hi, &[1.0], 0.5)?).max(0.0);

    let plane = CellProblem::new(cell(2, 0.125)?, DispersalSpec::Random, mixed(0.1), periods)?;
    errs[5] = (lambda(&plane, &[1.0, 0.0], 0.0)? - lambda(&plane, &[0.6, 0.8], 0.0)?).abs();

    let tols = [1e-3, 1e-8, 1e-6, 1e-8, 1e-8, 1e-8];
    let pass = errs.iter().zip(tols).all(|(e, t)| *e <= t);
    Ok(Outcome::new(
        pass,
        format!(
            "random {:.1e} lattice {:.1e} kernel {:.1e} shift {:.1e} monotone {:.1e} direction {:.1e}",
            errs[0], errs[1], errs[2], errs[3], errs[4], errs[5]
        ),
    ))
}

// ---------------------------------------------------------------------------
// 8. periodic logistic equation against its closed form

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// `u' = u (1 + 0.5 sin(2 pi t) - u)`: with `w = 1/u` the equation is linear,
/// `w' = -r w + 1`, and the periodic solution is explicit up to quadrature.
fn logistic_oracle(t: f64) -> f64 {
    let big_r = |s: f64| s + 0.5 * (1.0 - (2.0 * PI * s).cos()) / (2.0 * PI);
    let e = |s: f64| big_r(s).exp();
    let w0 = simpson(e, 0.0, 1.0, 20_000) / (e(1.0) - 1.0);
    let w = (w0 + simpson(e, 0.0, t, 20_000)) / e(t);
    1.0 / w
}

fn periodic_logistic() -> Result<Outcome> {
    let mut config = line_config(2.0, 0.0, Medium::TimePeriodic.reaction(None));
    config["domain"]["h"] = json!(0.5);
    config["integrator"] = json!({ "scheme": "rk4", "dt": 0.005 });
    config["experiment"] = json!({ "attractor": { "tol": 1e-12 } });
    let p = prepare(config)?;
    let r = find_attractor_from_constant(&p.model()?, p.reaction.m0() + 1.0, &p.config.experiment.attractor)?;
    let mut worst: f64 = 0.0;
    for (k, phase) in r.phases.iter().enumerate() {
        let want = logistic_oracle(k as f64 / r.phases.len() as f64);
        for &v in phase.values() {
            worst = worst.max((v - want).abs());
        }
    }
    Ok(Outcome::new(
        worst < 1e-6,
        format!("max |u* - oracle| = {worst:.1e} over {} phases", r.phases.len()),
    ))
}

// ---------------------------------------------------------------------------
// 9. negative controls

fn negative_controls() -> Result<Outcome> {
    let decay = line_config(10.0, 0.0, json!({ "r0": { "form": "constant", "value": -1.0 } }));
    let (decay_code, _) = run_cli("speed", &decay)?;

    let mut cone = line_config(300.0, 0.0, json!({}));
    cone["record_every"] = json!(2000);
    cone["experiment"] = json!({
        "initial": { "kind": "patch", "radius": 2.0, "height": 0.5 },
        "checks": [{ "check": "spreading", "c_low": 0.5, "c_high": 1.0, "t_end": 100.0, "expect_fail": true }]
    });
    let (cone_code, dir) = run_cli("verify", &cone)?;
    let verify = read_json(&dir.path().join("out/verify.json"))?;
    let status = verify["checks"][0]["status"].as_str().unwrap_or("missing").to_string();
    let file = verify["checks"][0]["report"].as_str().context("no report for the cone check")?;
    let report = read_json(&dir.path().join("out").join(file))?;
    let outer = num(&report["report"], "outer_max")?;
    let pass = decay_code == 3 && cone_code == 0 && status == "expected_fail";
    Ok(Outcome::new(
        pass,
        format!("decay exit {decay_code}; cone c_high=1.0 {status} (outer max {outer:.2}), exit {cone_code}"),
    ))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 9] = [
    ("Fisher-KPP variational speed", fisher_speed),
    ("discrete lattice speed", lattice_speed),
    ("front vs variational speed", front_consistency),
    ("Liouville uniqueness", liouville),
    ("tail property", tail),
    ("comparison principle", comparison),
    ("spectral closed forms", spectral),
    ("periodic logistic oracle", periodic_logistic),
    ("negative controls", negative_controls),
];

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e:#}")));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {n} {verdict} {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
