//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use doi_core::ddpm::{step_update_sticks, stick_weights, DdpmState};
use doi_core::estimands::ht_e_ate;
use doi_core::net::{
    gen_barabasi_albert, gen_erdos_renyi, inverse_distance_network, pagerank_default,
    AngularDistance, Network,
};
use doi_core::rng::stream;
use doi_core::simbench::{
    run_benchmark, BenchmarkCell, BenchmarkConfig, DgpConfig, GraphSpec, Method, ReplicateRow,
};
use doi_core::{ChainConfig, Dataset, Priors, Treatment};
use oracles::{
    atom_checks, doi_checks, geweke_checks, outcome_checks, probit_checks, stick_checks, worst,
    Check,
};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Criteria 1, 2 and 6: one benchmark run with three cells.

const CELL_S1: usize = 0;
const CELL_S3: usize = 1;
const CELL_NOINT: usize = 2;

fn simulation_grid() -> BenchmarkConfig {
    let er = GraphSpec::ErdosRenyi { p: 0.01 };
    BenchmarkConfig {
        cells: vec![
            BenchmarkCell {
                dgp: DgpConfig::default(),
                graph: er.clone(),
                n: 300,
                n_sim: 50,
            },
            BenchmarkCell {
                dgp: DgpConfig {
                    scenario: 3,
                    ..DgpConfig::default()
                },
                graph: er.clone(),
                n: 300,
                n_sim: 30,
            },
            BenchmarkCell {
                dgp: DgpConfig {
                    psi1: 0.0,
                    ..DgpConfig::default()
                },
                graph: er,
                n: 300,
                n_sim: 30,
            },
        ],
        chain: ChainConfig {
            burn_in: 500,
            keep: 500,
            ..ChainConfig::default()
        },
        priors: Priors::default(),
        truth_draws: 1000,
        ease_level: 0.0,
        seed: 20_240_601,
    }
}

fn criterion_1(report: &doi_core::simbench::BenchmarkReport) -> Outcome {
    let doi = report.metrics(CELL_S1, Method::DoiEate).expect("cell");
    let ht = report.metrics(CELL_S1, Method::HtEate).expect("cell");
    let pass = doi.bias.abs() <= 0.05
        && doi.mse <= 0.03
        && (0.85..=1.0).contains(&doi.coverage)
        && doi.mse < ht.mse;
    outcome(
        pass,
        format!(
            "scenario 1, ER(0.01), N=300, n_sim={}: bias {:+.4}, MSE {:.4}, coverage {:.2}; HT MSE {:.4}",
            doi.n_sim, doi.bias, doi.mse, doi.coverage, ht.mse
        ),
    )
}

fn criterion_2(report: &doi_core::simbench::BenchmarkReport) -> Outcome {
    let doi = report.metrics(CELL_S3, Method::DoiEate).expect("cell");
    outcome(
        doi.mse <= 0.04 && doi.coverage >= 0.85,
        format!(
            "scenario 3, ER(0.01), N=300, n_sim={}: MSE {:.4}, coverage {:.2}",
            doi.n_sim, doi.mse, doi.coverage
        ),
    )
}

fn rows(
    report: &doi_core::simbench::BenchmarkReport,
    cell: usize,
    method: Method,
) -> Vec<&ReplicateRow> {
    report
        .replicates
        .iter()
        .filter(|r| r.cell == cell && r.method == method)
        .collect()
}

fn criterion_6(report: &doi_core::simbench::BenchmarkReport) -> Outcome {
    let ate = rows(report, CELL_NOINT, Method::DoiEate);
    let ease = rows(report, CELL_NOINT, Method::DoiEase);
    let truth_err = ate
        .iter()
        .map(|r| (r.record.truth - 5.0).abs())
        .fold(0.0, f64::max);
    let mean_err = ate
        .iter()
        .map(|r| (r.record.estimate - 5.0).abs())
        .sum::<f64>()
        / ate.len() as f64;
    let covers = ease
        .iter()
        .filter(|r| r.record.lo <= 0.0 && 0.0 <= r.record.hi)
        .count();
    let cover_rate = covers as f64 / ease.len() as f64;
    outcome(
        truth_err <= 1e-12 && mean_err <= 0.2 && cover_rate >= 0.9 && ate.len() == 30,
        format!(
            "psi1=0, {} replicates: max |truth-5| {truth_err:.1e}, mean |E-ATE mean - 5| {mean_err:.4}, E-ASE interval covers 0 in {covers}/{}",
            ate.len(),
            ease.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 3: HT over all 256 assignments of an 8-unit table.

/// Potential outcome of unit `i` under assignment bitmask `mask`; depends on
/// the unit's own treatment and nonlinearly on its ring neighbours'.
fn potential(i: usize, mask: u32) -> f64 {
    let z = |j: usize| f64::from((mask >> (j % 8)) & 1);
    let own = z(i);
    let nb = z(i + 1) + z(i + 7);
    let base = [1.3, -0.4, 2.2, 0.7, -1.9, 0.05, 3.1, -2.6][i];
    base + own * (2.0 + 0.3 * i as f64) + 0.8 * nb * nb - 1.1 * own * nb + 0.5 * z(i + 3)
}

fn criterion_3() -> Outcome {
    let n = 8;
    let ring = Network::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).expect("ring");
    let mut ht_avg = 0.0;
    for mask in 0u32..256 {
        let z: Vec<f64> = (0..n).map(|i| f64::from((mask >> i) & 1)).collect();
        let y: Vec<f64> = (0..n).map(|i| potential(i, mask)).collect();
        let data = Dataset::new(
            vec![vec![1.0]; n],
            Treatment::binary(z).unwrap(),
            y,
            ring.clone(),
        )
        .unwrap();
        ht_avg += ht_e_ate(&data, 0.5).unwrap().estimate;
    }
    ht_avg /= 256.0;
    // E[Y_i | Z_i = z] averages over the 128 assignments of the others.
    let mut truth = 0.0;
    for i in 0..n {
        let (mut treated, mut control) = (0.0, 0.0);
        for mask in 0u32..256 {
            if mask >> i & 1 == 1 {
                treated += potential(i, mask);
            } else {
                control += potential(i, mask);
            }
        }
        truth += (treated - control) / 128.0;
    }
    truth /= n as f64;
    let err = (ht_avg - truth).abs();
    outcome(
        err <= 1e-12,
        format!("N=8, Bernoulli(0.5): enumeration mean {ht_avg:.12}, true E-ATE {truth:.12}, |diff| {err:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5: conditional-update oracles and the joint simulators.

fn criterion_4() -> Outcome {
    const DRAWS: usize = 100_000;
    let (probit, violations) = probit_checks(DRAWS, 105);
    let groups: Vec<(&str, Vec<Check>)> = vec![
        ("doi", doi_checks(DRAWS, 101)),
        ("sticks", stick_checks(DRAWS, 102)),
        ("atoms", atom_checks(DRAWS, 103)),
        ("outcome", outcome_checks(DRAWS, 104)),
        ("probit", probit),
    ];
    let mut pass = violations == 0;
    let mut parts = Vec::new();
    for (name, checks) in &groups {
        let w = worst(checks);
        pass &= checks.iter().all(|c| c.ok(4.0));
        parts.push(format!("{name} {:.2} ({})", w.z.abs(), w.name));
    }
    outcome(
        pass,
        format!(
            "1e5 draws, worst |z|: {}; probit sign violations {violations}",
            parts.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let checks = geweke_checks(20_000, 106);
    let w = worst(&checks);
    outcome(
        checks.iter().all(|c| c.ok(4.0)),
        format!(
            "N=8, 2e4 sweeps, {} moment z-scores, worst |z| {:.2} ({})",
            checks.len(),
            w.z.abs(),
            w.name
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 7: stick-breaking weights.

fn weight_defect(w: &[f64]) -> (f64, bool) {
    let sum: f64 = w.iter().sum();
    ((sum - 1.0).abs(), w.iter().all(|&x| x >= 0.0))
}

fn criterion_7() -> Outcome {
    let mut rng = stream(107, &[]);
    let mut worst_sum = 0.0f64;
    let mut negative = 0;
    for s in 0..10_000 {
        let k = rng.random_range(1..=300usize);
        let weights = if s % 2 == 0 {
            // Raw sticks, including values at the edges of (0, 1).
            let alpha = 10f64.powf(rng.random_range(-2.0..2.0));
            let beta = Beta::new(1.0, alpha).unwrap();
            let sticks: Vec<f64> = (0..k - 1)
                .map(|_| match rng.random_range(0..10) {
                    0 => 1e-300,
                    1 => 1.0 - 1e-16,
                    _ => beta.sample(&mut rng),
                })
                .collect();
            stick_weights(&sticks)
        } else {
            // States after the sampler's stick update.
            let priors = Priors {
                k_init: k.max(2),
                alpha_shape: rng.random_range(0.5..5.0),
                ..Priors::default()
            };
            let mut state = DdpmState::from_prior(rng.random_range(1..200), 2, &priors, &mut rng);
            step_update_sticks(&mut state, &mut rng).unwrap();
            state.weights.clone()
        };
        let (d, nonneg) = weight_defect(&weights);
        worst_sum = worst_sum.max(d);
        negative += usize::from(!nonneg);
    }
    outcome(
        worst_sum <= 1e-12 && negative == 0,
        format!("1e4 random states: max |sum w - 1| {worst_sum:.1e}, states with a negative weight {negative}"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 8: PageRank fixed point, checked with a dense operator.

fn dense_residual(net: &Network, s: &[f64], damping: f64) -> f64 {
    let n = net.n();
    let mut a = vec![vec![0.0; n]; n];
    for (i, j, w) in net.edges() {
        a[i][j] = w;
        a[j][i] = w;
    }
    let out: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let mut r = 0.0;
    for i in 0..n {
        let mut v = (1.0 - damping) / n as f64;
        for j in 0..n {
            v += damping
                * if out[j] > 0.0 {
                    a[j][i] / out[j]
                } else {
                    1.0 / n as f64
                }
                * s[j];
        }
        r += (v - s[i]).abs();
    }
    r
}

fn criterion_8() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_sum = 0.0f64;
    for g in 0..20u64 {
        let mut rng = stream(108, &[g]);
        let n = rng.random_range(30..250);
        let net = if g % 2 == 0 {
            gen_erdos_renyi(n, rng.random_range(0.005..0.1), &mut rng).unwrap()
        } else {
            gen_barabasi_albert(n, 3, rng.random_range(1..=3), &mut rng).unwrap()
        };
        let pr = pagerank_default(&net).unwrap();
        worst_res = worst_res.max(dense_residual(&net, &pr.scores, pr.damping));
        worst_sum = worst_sum.max((pr.scores.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(
        worst_res < 1e-8 && worst_sum <= 1e-10,
        format!("20 ER/BA graphs: max residual {worst_res:.1e}, max |sum - 1| {worst_sum:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// Criteria 9 and 10: through the binary.

fn doi(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_doi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

const BENCH: &str = r#"{
    "command": "benchmark",
    "cells": [
        {"graph": {"family": "erdos_renyi", "p": 0.01}, "n": 300, "n_sim": 6},
        {"dgp": {"scenario": 3}, "graph": {"family": "barabasi_albert", "n0": 5, "k": 2}, "n": 200, "n_sim": 6}
    ],
    "chain": {"burn_in": 150, "keep": 150},
    "truth_draws": 200,
    "seed": 9,
    "output": "bench"
}"#;

fn criterion_9() -> Outcome {
    let run = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let p = dir.path();
        std::fs::write(p.join("bench.json"), BENCH).map_err(|e| e.to_string())?;
        let runs = [("t1", "1"), ("t4", "4"), ("t4b", "4")];
        for (out, threads) in runs {
            doi(
                &[
                    "benchmark",
                    "--config",
                    "bench.json",
                    "--out",
                    out,
                    "--threads",
                    threads,
                ],
                p,
            )?;
        }
        let mut bytes = 0;
        for f in ["summary.csv", "replicates.csv"] {
            let a = std::fs::read(p.join("t1").join(f)).map_err(|e| e.to_string())?;
            for (other, _) in &runs[1..] {
                let b = std::fs::read(p.join(other).join(f)).map_err(|e| e.to_string())?;
                if a != b {
                    return Err(format!("{f} differs between t1 and {other}"));
                }
            }
            bytes += a.len();
        }
        Ok(format!("three runs (threads 1, 4, 4): summary.csv and replicates.csv byte-identical ({bytes} bytes)"))
    };
    match run() {
        Ok(d) => outcome(true, d),
        Err(e) => outcome(false, e),
    }
}

const HOUSEHOLD_SIM: &str =
    r#"{"command": "simulate", "design": {"kind": "household"}, "seed": 10, "output": "h"}"#;

const HOUSEHOLD_FIT: &str = r#"{
    "command": "fit",
    "data": "h/units.csv",
    "network": {"source": "households"},
    "mechanism": {"stratified_bernoulli": {"probs": {"a": 0.628, "b": 0.449}}},
    "estimands": [
        {"kind": "e_ate", "z": 1},
        {"kind": "e_ase", "z": 0},
        {"kind": "e_ase", "z": 1},
        {"kind": "e_ase", "z": 0, "subgroup": {"neighbors": 1}},
        {"kind": "e_ase", "z": 0, "subgroup": {"neighbors": 2}}
    ],
    "chain": {"burn_in": 300, "keep": 300, "family": "probit"},
    "seed": 10,
    "output": "fit"
}"#;

fn household_probit() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    std::fs::write(p.join("sim.json"), HOUSEHOLD_SIM).map_err(|e| e.to_string())?;
    std::fs::write(p.join("fit.json"), HOUSEHOLD_FIT).map_err(|e| e.to_string())?;
    doi(&["simulate", "--config", "sim.json"], p)?;
    doi(&["fit", "--config", "fit.json"], p)?;
    let summary = std::fs::read_to_string(p.join("fit/summary.csv")).map_err(|e| e.to_string())?;
    let mut lines = summary.lines();
    if lines.next() != Some("estimand,mean,sd,q2.5,median,q97.5,length") {
        return Err("summary.csv header".into());
    }
    let body: Vec<&str> = lines.collect();
    if body.len() != 5 {
        return Err(format!("summary.csv has {} rows, expected 5", body.len()));
    }
    for line in &body {
        let v: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|x| x.parse().unwrap_or(f64::NAN))
            .collect();
        let ordered = v.len() == 6 && v[2] <= v[3] && v[3] <= v[4] && v[1] >= 0.0;
        let bounded = v
            .iter()
            .take(5)
            .filter(|x| !x.is_nan())
            .all(|x| (-1.0..=1.0).contains(x));
        if !ordered || !bounded {
            return Err(format!("malformed row {line}"));
        }
    }
    let json: Value = serde_json::from_str(
        &std::fs::read_to_string(p.join("fit/summary.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let diag = &json["diagnostics"];
    let violations = diag["sign_violations"]
        .as_u64()
        .ok_or("no sign_violations")?;
    if violations != 0 {
        return Err(format!("{violations} probit sign violations"));
    }
    let trace = std::fs::read_to_string(p.join("fit/trace.csv")).map_err(|e| e.to_string())?;
    if trace.lines().count() != 301 || !p.join("fit/manifest.json").is_file() {
        return Err("trace or manifest missing".into());
    }
    Ok(format!(
        "household probit: {} units / {} households, 5 summary rows, sign violations 0",
        diag["units"], diag["households"]
    ))
}

/// Inverse-distance networks against a direct evaluation of the weight formula.
fn inverse_distance() -> Result<String, String> {
    use std::f64::consts::{PI, TAU};
    let two = inverse_distance_network(&[1.0, 1.0 + PI / 16.0], PI / 8.0, AngularDistance::Raw)
        .map_err(|e| e.to_string())?;
    if (two.weight(0, 1) - 16.0 / PI).abs() > 1e-12 {
        return Err(format!("pair weight {}", two.weight(0, 1)));
    }
    let across = [0.1, TAU - 0.1];
    let raw =
        inverse_distance_network(&across, 0.5, AngularDistance::Raw).map_err(|e| e.to_string())?;
    let wrapped = inverse_distance_network(&across, 0.5, AngularDistance::Wrapped)
        .map_err(|e| e.to_string())?;
    if raw.edge_count() != 0 || (wrapped.weight(0, 1) - 5.0).abs() > 1e-9 {
        return Err("wrap-around pair".into());
    }
    let mut rng = stream(110, &[]);
    let mut checked = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..60);
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        let cutoff = rng.random_range(0.05..2.0);
        for metric in [AngularDistance::Raw, AngularDistance::Wrapped] {
            let net =
                inverse_distance_network(&angles, cutoff, metric).map_err(|e| e.to_string())?;
            for i in 0..n {
                for j in 0..n {
                    let raw = (angles[i] - angles[j]).abs();
                    let d = match metric {
                        AngularDistance::Raw => raw,
                        AngularDistance::Wrapped => raw.min(TAU - raw),
                    };
                    let want = if i != j && d <= cutoff { 1.0 / d } else { 0.0 };
                    if (net.weight(i, j) - want).abs() > 1e-12 * want.max(1.0) {
                        return Err(format!("weight ({i},{j}) {} vs {want}", net.weight(i, j)));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "inverse-distance weights match the formula on {checked} pairs"
    ))
}

fn criterion_10() -> Outcome {
    match (household_probit(), inverse_distance()) {
        (Ok(a), Ok(b)) => outcome(true, format!("{a}; {b}")),
        (a, b) => outcome(
            false,
            format!("{}; {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e)),
        ),
    }
}

fn main() {
    let total = Instant::now();
    let grid = run_benchmark(&simulation_grid()).expect("simulation grid runs");
    let grid_secs = total.elapsed().as_secs_f64();
    let criteria: Vec<(usize, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(|| criterion_1(&grid))),
        (2, Box::new(|| criterion_2(&grid))),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(|| criterion_6(&grid))),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
        (10, Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    println!("acceptance: simulation grid (criteria 1, 2, 6) took {grid_secs:.1}s");
    for (id, check) in criteria {
        let o = check();
        println!(
            "{} criterion {id:>2}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} of 10 passed in {:.1}s",
        10 - failed.len(),
        total.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
