//! Acceptance gate: one line per criterion, nonzero exit on any failure.

mod common;

use std::fs;
use std::process::Command;
use std::time::Instant;

use serde_json::Value;
use statrs::function::gamma::gamma;

use lenglart::bdg::{bdg_ratio, BmKind, MartingaleSpec};
use lenglart::constructions::{sample_y, ExtremalParams, Proposal, TailMode};
use lenglart::montecarlo::{
    discrete_ratio_experiment, draw_samples, estimate, monotone_ratio_experiment, ratio_experiment, EstimatorMethod,
};
use lenglart::oracles::{check_moment_identities, constant, lambda_bound, ConstantKind, MomentLaw};
use lenglart::verifier::{check_inequality, JumpLaw, PairGenerator};

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mom() -> EstimatorMethod {
    EstimatorMethod::median_of_means(31).unwrap()
}

fn constants() -> Check {
    let frozen = [
        (ConstantKind::Lenglart, 2.0 * 2f64.sqrt()),
        (ConstantKind::Monotone, 2f64.sqrt()),
        (ConstantKind::PratelliPower, 2.0),
        (ConstantKind::LenglartOriginal, 3.0),
    ];
    let mut worst = 0f64;
    for (kind, want) in frozen {
        let got = constant(kind, 0.5).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
    }
    ensure(worst <= 1e-12, format!("max error {worst:.1e}"))
}

fn monotone_sharpness() -> Check {
    let r = monotone_ratio_experiment(0.5, 40, 1_000_000, mom(), 7, Proposal::HorizonUniform)
        .map_err(|e| e.to_string())?;
    let s2 = 2f64.sqrt();
    let (lo, hi) = (s2 * 40.0 / 41.0 - 0.03, s2 + 0.03);
    let num = &r.numerator;
    let detail = format!(
        "ratio {:.5} in [{lo:.5}, {hi:.5}], numerator {:.4} +- {:.4}",
        r.ratio, num.value, num.halfwidth
    );
    ensure(r.ratio >= lo && r.ratio <= hi && (num.value - 40.0).abs() <= 3.0 * num.halfwidth, detail)
}

fn lenglart_sharpness() -> Check {
    let params = ExtremalParams::new(0.5, 40, 7).map_err(|e| e.to_string())?;
    let r = ratio_experiment(&params, 1_000_000, mom(), Proposal::HorizonUniform).map_err(|e| e.to_string())?;
    let c = 2.0 * 2f64.sqrt();
    let (lo, hi) = (c * 40.0 / 41.0 - 0.10, c + 0.10);
    ensure(
        r.ratio >= lo && r.ratio <= hi,
        format!("ratio {:.5} in [{lo:.5}, {hi:.5}]", r.ratio),
    )
}

fn y_law() -> Check {
    let n = 1_000_000;
    let ys = draw_samples(n, 41, |_, rng| sample_y(1.0, TailMode::ExactLaw, rng).unwrap());
    let freq = ys.iter().filter(|&&y| y >= 4.0).count() as f64 / n as f64;
    let se = (0.25f64 * 0.75 / n as f64).sqrt();
    let m = estimate(
        |rng| sample_y(1.0, TailMode::ExactLaw, rng).unwrap().sqrt(),
        n,
        mom(),
        42,
    )
    .map_err(|e| e.to_string())?;
    let rel = (m.value - 2.0).abs() / 2.0;
    ensure(
        (freq - 0.25).abs() <= 3.0 * se && rel < 0.02,
        format!("P[Y >= 4] = {freq:.5} (se {se:.1e}), E[Y^0.5] = {:.4} ({:.2}%)", m.value, 100.0 * rel),
    )
}

fn identities() -> Check {
    let mut worst = 0f64;
    for p in [0.1, 0.5, 0.9] {
        let laws = [
            (MomentLaw::Uniform, 1.0 / (1.0 + p)),
            (MomentLaw::Exponential, gamma(1.0 + p)),
            (MomentLaw::PointMass(2.5), 2.5f64.powf(p)),
        ];
        for (law, exact) in laws {
            let r = check_moment_identities(law, p).map_err(|e| e.to_string())?;
            for v in [r.direct, r.tail_integral, r.truncated_mean_integral] {
                worst = worst.max((v - exact).abs());
            }
        }
    }
    ensure(worst <= 1e-8, format!("max error {worst:.1e}"))
}

fn lambda_grid() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for p in [0.1, 0.5, 0.9] {
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 1..=30_000 {
            let lambda = i as f64 * 1e-4;
            let v = lambda_bound(p, lambda).map_err(|e| e.to_string())?;
            if v < best {
                best = v;
                arg = lambda;
            }
        }
        let target = p.powf(-p);
        ok &= (arg - p).abs() <= 1e-4 + 1e-12 && (best - target).abs() <= 1e-8;
        notes.push(format!("p={p}: lambda* {arg:.4}, min {best:.10}"));
    }
    ensure(ok, notes.join("; "))
}

fn discretization() -> Check {
    let params = ExtremalParams::new(0.5, 10, 7).map_err(|e| e.to_string())?;
    let n = 200_000;
    let cont = ratio_experiment(&params, n, mom(), Proposal::HorizonUniform).map_err(|e| e.to_string())?;
    let mut levels = Vec::new();
    for level in [2, 4, 6] {
        let r = discrete_ratio_experiment(&params, level, n, mom(), Proposal::HorizonUniform)
            .map_err(|e| e.to_string())?;
        levels.push(r);
    }
    let rel = (levels[2].ratio - cont.ratio).abs() / cont.ratio;
    let increasing = levels
        .windows(2)
        .all(|w| w[0].ratio <= w[1].ratio + 3.0 * w[0].sigma().hypot(w[1].sigma()));
    let shown: Vec<String> = levels.iter().map(|r| format!("{:.4}", r.ratio)).collect();
    ensure(
        rel < 0.02 && increasing,
        format!(
            "levels 2/4/6: {}, continuous {:.4}, level 6 off by {:.2}%",
            shown.join("/"),
            cont.ratio,
            100.0 * rel
        ),
    )
}

fn enumeration() -> Check {
    let (q, steps) = (0.3, 12);
    let outcomes = common::enumerate(q, steps);
    let gen = PairGenerator::CompensatedBernoulli {
        jump: JumpLaw::Bernoulli { q },
        steps,
    };
    let mut ok = true;
    let mut worst_z = 0f64;
    for p in [0.3, 0.5, 0.7] {
        let sup_x = common::expect(&outcomes, |o| common::sup(&o.x).powf(p));
        let g_end = common::expect(&outcomes, |o| o.g[steps].powf(p));
        let x_end = common::expect(&outcomes, |o| o.x[steps].powf(p));
        let lenglart = constant(ConstantKind::Lenglart, p).map_err(|e| e.to_string())?;
        let monotone = constant(ConstantKind::Monotone, p).map_err(|e| e.to_string())?;
        ok &= sup_x <= lenglart * g_end && x_end <= monotone * g_end;
        let r = check_inequality(&gen, p, ConstantKind::Lenglart, 200_000, EstimatorMethod::Plain, 8)
            .map_err(|e| e.to_string())?;
        let z = (r.lhs.value - sup_x).abs() / r.lhs.halfwidth;
        worst_z = worst_z.max(z);
        ok &= r.pass && z <= 3.0 && (r.rhs.value - g_end).abs() <= 1e-10 * g_end;
    }
    ensure(ok, format!("{} paths, worst MC deviation {worst_z:.2} stderr", outcomes.len()))
}

fn bdg() -> Check {
    let spec = MartingaleSpec {
        kind: BmKind::FixedTime { t: 1.0 },
        step: 1e-3,
        q: 1.0,
    };
    let r = bdg_ratio(&spec, 100_000, EstimatorMethod::Plain, 9).map_err(|e| e.to_string())?;
    let bound = 2f64.sqrt() + 3.0 * r.ratio.sigma();
    ensure(
        r.ratio.ratio <= bound && r.monotone_bound_holds,
        format!(
            "ratio {:.5} <= {bound:.5}, step bias {:.2e}",
            r.ratio.ratio, r.step_bias
        ),
    )
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = dir.path().join("suite.json");
    fs::write(
        &suite,
        r#"[{"generator":{"kind":"extremal","p":0.5,"n":10},"p":0.5,"constant":"lenglart"},
            {"generator":{"kind":"compensated_bernoulli","jump":{"law":"bernoulli","q":0.3},"steps":12},"p":0.5,"constant":"monotone"}]"#,
    )
    .map_err(|e| e.to_string())?;
    let suite = suite.to_str().unwrap().to_string();
    let cases: Vec<Vec<&str>> = vec![
        vec!["sharpness", "--samples", "200000"],
        vec!["sharpness", "--samples", "200000", "--n", "10", "--level", "6"],
        vec!["monotone-sharpness", "--samples", "200000"],
        vec!["verify", &suite, "--samples", "100000"],
        vec!["bdg", "--samples", "20000"],
        vec!["identities", "--law", "exp"],
        vec!["dump-paths", "--n", "4", "--level", "3"],
    ];
    for (i, case) in cases.iter().enumerate() {
        let mut first: Option<Value> = None;
        for threads in ["1", "2", "7"] {
            let out = dir.path().join(format!("{i}-{threads}"));
            let mut args = case.clone();
            let out_str = out.to_str().unwrap().to_string();
            args.extend(["--threads", threads, "--output", &out_str]);
            let o = Command::new(env!("CARGO_BIN_EXE_lenglart"))
                .args(&args)
                .env_remove("LENGLART_SEED")
                .output()
                .map_err(|e| e.to_string())?;
            if o.status.code() != Some(0) {
                return Err(format!("{case:?} exited with {:?}", o.status.code()));
            }
            let text = fs::read_to_string(&out).map_err(|e| e.to_string())?;
            let doc = match serde_json::from_str::<Value>(&text) {
                Ok(mut v) => {
                    v.as_object_mut().and_then(|m| m.remove("timestamp"));
                    v
                }
                Err(_) => Value::String(text),
            };
            match &first {
                None => first = Some(doc),
                Some(f) if *f != doc => return Err(format!("{case:?} differs at {threads} threads")),
                Some(_) => {}
            }
        }
    }
    Ok(format!("{} commands identical across 1/2/7 threads", cases.len()))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("constants", constants),
        ("monotone sharpness", monotone_sharpness),
        ("lenglart sharpness", lenglart_sharpness),
        ("stopped supremum law", y_law),
        ("moment identities", identities),
        ("lambda bound", lambda_grid),
        ("discretization", discretization),
        ("enumeration oracle", enumeration),
        ("bdg", bdg),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {}: {tag} {name}: {detail} [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
