//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsrelay::benchmarks::{SchemeContext, SchemeId};
use rsrelay::channel::{generate_channels, mrt_precoders, SystemConfig};
use rsrelay::distortion::{build_coefficients, covariance_dest_phase1, covariance_dest_phase2, covariance_relay};
use rsrelay::harness::{run_experiment, ExperimentSpec, SweepAxis};
use rsrelay::oracle::{global_check, water_filling_gap};
use rsrelay::rates::{LinkSet, PowerAllocation};
use rsrelay::solver::{Problem, SolverOptions, Termination};

const REALIZATIONS: u64 = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let passed = out.passed && in_time;
    let budget = match limit {
        Some(l) => format!("{:.1} s of {} s", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    println!("{} {id} {name}: {} [{budget}]", if passed { "PASS" } else { "FAIL" }, out.detail);
    passed
}

fn random_powers(rng: &mut ChaCha8Rng, k: usize, ps: f64, pr: f64) -> PowerAllocation {
    let mut draw = |n: usize, budget: f64| -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() }).collect();
        let fill = rng.random::<f64>() * budget;
        let total: f64 = w.iter().sum::<f64>().max(1e-300);
        w.iter().map(|x| x / total * fill).collect()
    };
    let src = draw(2 * k, ps);
    let rel = draw(k, pr);
    PowerAllocation::new(src[..k].to_vec(), src[k..].to_vec(), rel)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn coefficient_equivalence() -> Outcome {
    let config = SystemConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 3];
    for seed in 0..REALIZATIONS {
        let ch = generate_channels(&config, seed).unwrap();
        let pc = mrt_precoders(&ch).unwrap();
        let co = build_coefficients(&ch, &pc, &config).unwrap();
        let p = random_powers(&mut rng, config.num_subcarriers, config.power_source, config.power_relay);
        let pairs = [
            (co.relay_interference(&p), covariance_relay(&ch, &pc, &p, &config).unwrap()),
            (co.dest_phase1_interference(&p), covariance_dest_phase1(&ch, &pc, &p, &config).unwrap()),
            (co.dest_phase2_interference(&p), covariance_dest_phase2(&ch, &pc, &p, &config).unwrap()),
        ];
        for (w, (a, b)) in worst.iter_mut().zip(pairs) {
            for (x, y) in a.iter().zip(&b) {
                *w = w.max(rel_err(*x, *y));
            }
        }
    }
    Outcome {
        passed: worst.iter().all(|w| *w <= 1e-9),
        detail: format!(
            "max relative error relay {:.1e}, destination phase 1 {:.1e}, phase 2 {:.1e} over {REALIZATIONS} instances (tol 1e-9)",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn taylor_bounds() -> Outcome {
    let config = SystemConfig::default();
    let k = config.num_subcarriers;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut tight, mut violation, mut grad_err) = ([0.0f64; 3], [0.0f64; 3], [0.0f64; 3]);
    let points = 1000;
    let per_realization = 50;
    for r in 0..points / per_realization {
        let ch = generate_channels(&config, r as u64).unwrap();
        let co = build_coefficients(&ch, &mrt_precoders(&ch).unwrap(), &config).unwrap();
        let links = LinkSet::from_coefficients(&co, config.rate_prefactor);
        for _ in 0..per_realization {
            let p = random_powers(&mut rng, k, config.power_source, config.power_relay);
            let anchor = random_powers(&mut rng, k, config.power_source, config.power_relay);
            let x: Vec<f64> = p.p_sr.iter().chain(&p.p_sd).chain(&p.p_rd).copied().collect();
            let unflat = |v: &[f64]| PowerAllocation::new(v[..k].to_vec(), v[k..2 * k].to_vec(), v[2 * k..].to_vec());
            for (l, link) in [&links.sr, &links.rd, &links.sd].into_iter().enumerate() {
                for s in 0..k {
                    let at = link.surrogate_at(s, &anchor, &anchor, links.prelog).unwrap();
                    tight[l] = tight[l].max((at - link.rate_at(s, &anchor, links.prelog)).abs());
                    let bound = link.surrogate_at(s, &p, &anchor, links.prelog).unwrap();
                    violation[l] = violation[l].max(bound - link.rate_at(s, &p, links.prelog));

                    let i0 = link.interference_at(s, &anchor);
                    let g = link.surrogate_term(s, &p, i0, links.prelog).grad;
                    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
                    let f = |v: &[f64]| link.surrogate_at(s, &unflat(v), &anchor, links.prelog).unwrap();
                    let mut worst = 0.0f64;
                    for j in 0..3 * k {
                        let h = 1e-5 * x[j].max(1e-2);
                        let (mut up, mut dn) = (x.clone(), x.clone());
                        up[j] += h;
                        dn[j] -= h;
                        worst = worst.max(((f(&up) - f(&dn)) / (2.0 * h) - g[j]).abs());
                    }
                    grad_err[l] = grad_err[l].max(worst / scale);
                }
            }
        }
    }
    let passed = (0..3).all(|l| tight[l] <= 1e-10 && violation[l] <= 1e-10 && grad_err[l] <= 1e-5);
    let names = ["S-R", "R-D", "S-D"];
    let detail = (0..3)
        .map(|l| {
            format!(
                "{}: gap at anchor {:.1e}, violation {:.1e}, gradient {:.1e}",
                names[l],
                tight[l],
                violation[l].max(0.0),
                grad_err[l]
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { passed, detail: format!("{points} points; {detail} (tol 1e-10, 1e-10, 1e-5)") }
}

fn sia_convergence() -> Outcome {
    let config = SystemConfig::default();
    let opts = SolverOptions::default();
    let (mut worst_drop, mut converged) = (0.0f64, 0);
    let (mut iters, mut solves) = (Vec::new(), Vec::new());
    let mut errors = Vec::new();
    for seed in 0..REALIZATIONS {
        let ch = generate_channels(&config, seed).unwrap();
        let co = build_coefficients(&ch, &mrt_precoders(&ch).unwrap(), &config).unwrap();
        let links = LinkSet::from_coefficients(&co, config.rate_prefactor);
        match Problem::rate_splitting(&links, &config).sia(&opts) {
            Ok((_, t)) => {
                for w in t.true_objectives.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
                if t.termination == Termination::Converged && t.iterations <= 50 {
                    converged += 1;
                }
                iters.push(t.iterations);
                solves.push(t.surrogate_solves);
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    iters.sort_unstable();
    let median = iters.get(iters.len() / 2).copied().unwrap_or(0);
    let max = iters.last().copied().unwrap_or(0);
    let share = converged as f64 / REALIZATIONS as f64;
    Outcome {
        passed: errors.is_empty() && worst_drop <= 10.0 * opts.inner_tol && share >= 0.95,
        detail: format!(
            "largest objective decrease {:.1e} (tol {:.0e}); converged within 50 outer iterations in {converged}/{REALIZATIONS}; \
             outer iterations median {median}, max {max}; surrogate solves max {}{}",
            worst_drop.max(0.0),
            10.0 * opts.inner_tol,
            solves.iter().max().copied().unwrap_or(0),
            if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join(", ")) }
        ),
    }
}

fn small_instance_global() -> Outcome {
    let opts = SolverOptions::default();
    let per_k = 50;
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for k in [1usize, 2] {
        let (mut shortfall, mut polish, mut excess) = (0.0f64, 0.0f64, 0.0f64);
        let mut tol = 0.0;
        for seed in 0..per_k {
            match global_check(k, seed, 200, &opts) {
                Ok(c) => {
                    shortfall = shortfall.max(c.grid - c.sia);
                    polish = polish.max((c.sia - c.polished).abs());
                    excess = excess.max(c.sia - c.grid);
                    tol = c.tol;
                    if !c.passed() {
                        failures.push(format!("K={k} seed {seed}"));
                    }
                }
                Err(e) => failures.push(format!("K={k} seed {seed}: {e}")),
            }
        }
        parts.push(format!(
            "K={k}: grid minus SIA {:.1e}, |SIA - polished grid| {polish:.1e} (tol {tol:.0e}), SIA above lattice by up to {excess:.1e}",
            shortfall.max(0.0)
        ));
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{per_k} instances per K, 200 points per variable; {}{}",
            parts.join("; "),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    }
}

fn containment() -> Outcome {
    let config = SystemConfig::default();
    let opts = SolverOptions::default();
    let schemes = [SchemeId::Odl, SchemeId::Orl, SchemeId::RsNd];
    let mut worst = [f64::NEG_INFINITY; 3];
    let mut errors = Vec::new();
    for seed in 0..REALIZATIONS {
        let ch = generate_channels(&config, seed).unwrap();
        let mut ctx = SchemeContext::new(&config, &ch);
        let rs = match ctx.solve(SchemeId::Rs, &opts) {
            Ok(o) => o.report.r_total,
            Err(e) => {
                errors.push(format!("seed {seed} RS: {e}"));
                continue;
            }
        };
        for (w, s) in worst.iter_mut().zip(schemes) {
            match ctx.solve(s, &opts) {
                Ok(o) => *w = w.max(o.report.r_total - rs),
                Err(e) => errors.push(format!("seed {seed} {s}: {e}")),
            }
        }
    }
    Outcome {
        passed: errors.is_empty() && worst.iter().all(|w| *w <= 1e-6),
        detail: format!(
            "max over {REALIZATIONS} realizations of ODL - RS {:.2e}, ORL - RS {:.2e}, RS_ND - RS {:.2e} (tol 1e-6){}",
            worst[0],
            worst[1],
            worst[2],
            if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join(", ")) }
        ),
    }
}

fn fmt_series(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn trends() -> Outcome {
    let base = SystemConfig::default();
    let mut noise = ExperimentSpec::new(base.clone(), SweepAxis::Noise);
    noise.axis_values = vec![-60.0, -50.0, -40.0, -30.0, -20.0];
    noise.schemes = vec![SchemeId::Rs];
    noise.num_realizations = REALIZATIONS as usize;
    let mut direct = ExperimentSpec::new(base, SweepAxis::StrengthSd);
    direct.axis_values = vec![-45.0, -40.0, -30.0, -20.0, -10.0];
    direct.schemes = vec![SchemeId::Rs, SchemeId::Odl];
    direct.num_realizations = REALIZATIONS as usize;

    let (a, b) = match (run_experiment(&noise), run_experiment(&direct)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Outcome { passed: false, detail: format!("sweep failed: {e}") },
    };
    let rs_noise = a.means(SchemeId::Rs);
    let rs_direct = b.means(SchemeId::Rs);
    let odl_direct = b.means(SchemeId::Odl);
    let decreasing = rs_noise.windows(2).all(|w| w[1] < w[0]);
    let increasing = rs_direct.windows(2).all(|w| w[1] > w[0]);
    let last = rs_direct.len() - 1;
    Outcome {
        passed: decreasing && increasing,
        detail: format!(
            "(a) RS vs noise -60..-20 dB [{}] strictly decreasing: {decreasing}; \
             (b) RS vs rho_sd -45..-10 dB [{}] increasing: {increasing}; \
             (c) at rho_sd = -10 dB ODL - RS = {:.2e} (ODL >= RS allowed)",
            fmt_series(&rs_noise),
            fmt_series(&rs_direct),
            odl_direct[last] - rs_direct[last]
        ),
    }
}

fn water_filling() -> Outcome {
    let opts = SolverOptions::default();
    let config = SystemConfig::default();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for seed in 0..20 {
        match water_filling_gap(&config, seed, &opts) {
            Ok(g) => worst = worst.max(g),
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    Outcome {
        passed: errors.is_empty() && worst <= 1e-6,
        detail: format!(
            "max per-subcarrier power gap {worst:.1e} over 20 realizations (tol 1e-6){}",
            if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join(", ")) }
        ),
    }
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_rsrelay"))
            .args(["run", "--sweep", "noise", "--realizations", "4", "--seed", "2024", "--schemes", "RS,RS_ND,ODL,ORL,HD"])
            .arg("--out")
            .arg(&path)
            .env_remove("RSRELAY_SEED")
            .env_remove("RSRELAY_OUT_DIR")
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("exit status {status}"));
        }
        fs::read(&path).map_err(|e| e.to_string())
    };
    match (run("a.csv"), run("b.csv")) {
        (Ok(a), Ok(b)) => Outcome {
            passed: a == b && !a.is_empty(),
            detail: format!("two `run --seed 2024` invocations, {} bytes each, identical: {}", a.len(), a == b),
        },
        (Err(e), _) | (_, Err(e)) => Outcome { passed: false, detail: format!("run failed: {e}") },
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        check(1, "coefficient form equals covariance form", Some(secs(5)), coefficient_equivalence),
        check(2, "lower bounds: tightness, validity, gradients", Some(secs(30)), taylor_bounds),
        check(3, "SIA ascent and convergence", Some(secs(300)), sia_convergence),
        check(4, "small-instance global check against grid search", Some(secs(600)), small_instance_global),
        check(5, "scheme containment", None, containment),
        check(6, "qualitative trends", Some(secs(900)), trends),
        check(7, "ODL matches water-filling", None, water_filling),
        check(8, "reproducible CSV output", None, reproducibility),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
