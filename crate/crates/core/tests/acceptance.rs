//! Acceptance suite. Runs as a plain binary so that every criterion prints
//! exactly one PASS/FAIL line; exits non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pd_powers::environment::{build_tiny_instance, rollout, RngStream};
use pd_powers::estimation::{SpdState, DRIFT_TOL};
use pd_powers::harness::{run_experiment, ExperimentOutput, RunConfig};
use pd_powers::learner::LearnerConfig;
use pd_powers::model::{validate_instance, CmdpInstance, PolicyTable, PROB_SUM_TOL};
use pd_powers::oracle::{brute_force_comparator, constrained_comparator, dp_evaluate};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn default_config(out: &Path, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::parse("").expect("empty config parses to defaults");
    cfg.out_dir = out.to_path_buf();
    cfg.workers = workers;
    cfg
}

fn at(rows: &[pd_powers::harness::AggregateRow], k: usize) -> (f64, f64) {
    let r = &rows[k - 1];
    assert_eq!(r.k, k);
    (r.regret_mean, r.violation_mean)
}

fn sublinear(c_half: f64, c_full: f64, half: usize, full: usize) -> bool {
    let rate = c_full / (full as f64) < 0.5 * (c_half / half as f64);
    let increments = (c_full - c_half) < 0.7 * c_half;
    rate || increments
}

fn shape(exp: &ExperimentOutput, elapsed: f64) -> Outcome {
    let k = exp.prepared.learner.episodes;
    let half = k / 2;
    let (r1, v1) = at(&exp.aggregate_pd_powers, half);
    let (r2, v2) = at(&exp.aggregate_pd_powers, k);
    let (_, b1) = at(&exp.aggregate_random, half);
    let (_, b2) = at(&exp.aggregate_random, k);
    let regret_ok = sublinear(r1, r2, half, k);
    let violation_ok = sublinear(v1, v2, half, k);
    let base_ratio = (b2 - b1) / b1;
    let base_ok = (base_ratio - 1.0).abs() <= 0.05;
    let time_ok = elapsed < 600.0;
    outcome(
        regret_ok && violation_ok && base_ok && time_ok,
        format!(
            "regret {r1:.2}->{r2:.2} (increment ratio {:.4}, sublinear {regret_ok}); \
             violation {v1:.2}->{v2:.2} (increment ratio {:.4}, sublinear {violation_ok}); \
             baseline increment ratio {base_ratio:.4} (affine {base_ok}); runtime {elapsed:.1}s",
            (r2 - r1) / r1,
            (v2 - v1) / v1
        ),
    )
}

fn baseline_anchor(exp: &ExperimentOutput) -> Outcome {
    let inst = &exp.prepared.instance;
    // survival 0.95 per step under the uniform policy, E[G] = 1/2 on the chain
    let closed_form: f64 = (0..inst.horizon()).map(|i| 0.5 * 0.95f64.powi(i as i32)).sum();
    let expected = inst.threshold() - closed_form;
    let k = exp.prepared.learner.episodes as f64;
    let worst = exp
        .seeds
        .iter()
        .map(|s| (s.random.final_violation() / k - expected).abs())
        .fold(0.0, f64::max);
    let per_episode = exp.seeds[0].random.final_violation() / k;
    outcome(
        worst <= 1e-3 && (expected - 1.987).abs() <= 1e-3,
        format!(
            "per-episode violation {per_episode:.6} vs closed form {expected:.6} (max dev {worst:.2e}); cumulative {:.1}",
            per_episode * k
        ),
    )
}

fn slater(exp: &ExperimentOutput) -> Outcome {
    let inst = &exp.prepared.instance;
    let gamma = exp.prepared.comparator.gamma;
    let closed_form: f64 = (0..inst.horizon()).map(|i| 0.91f64.powi(i as i32)).sum::<f64>() - inst.threshold();
    outcome(
        (0.75..=0.82).contains(&gamma) && (gamma - closed_form).abs() <= 1e-9,
        format!("gamma {gamma:.9}, closed form {closed_form:.9}"),
    )
}

fn lemma_suite(exp: &ExperimentOutput) -> Outcome {
    let cfg = &exp.prepared.learner;
    let hz = exp.prepared.instance.horizon() as f64;
    let expected_variance = (exp.seeds.len() * cfg.episodes * exp.prepared.instance.horizon() * 2) as u64;
    let mut problems = Vec::new();
    let mut total = 0u64;
    for s in &exp.seeds {
        let c = &s.checks;
        total += c.total();
        if c.variance_bound != expected_variance / exp.seeds.len() as u64 {
            problems.push(format!("seed {}: {} variance checks", s.seed, c.variance_bound));
        }
        for (name, n) in [
            ("q_range", c.q_range),
            ("simplex", c.simplex),
            ("mixing_floor", c.mixing_floor),
            ("dual_bound", c.dual_bound),
            ("omd_step", c.omd_step),
            ("sigma_floor", c.sigma_floor),
        ] {
            if n == 0 {
                problems.push(format!("seed {}: no {name} checks ran", s.seed));
            }
        }
        if s.min_variance_slack < 0.0 {
            problems.push(format!("seed {}: variance slack {}", s.seed, s.min_variance_slack));
        }
        for row in &s.pd_powers.rows {
            if !(row.y >= 0.0 && row.y <= 3.0 * hz * cfg.eta * row.k as f64 + 1e-12) {
                problems.push(format!("seed {} k {}: Y = {}", s.seed, row.k, row.y));
                break;
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{total} inline checks, 0 failures")
        } else {
            problems.join("; ")
        },
    )
}

fn ridge_equivalence() -> Outcome {
    let (d, lambda) = (5, 1.0 / 9.0);
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst_theta = 0.0f64;
    let mut worst_drift = 0.0f64;
    for weighted in [false, true] {
        let mut st = SpdState::new(d, lambda).unwrap();
        let mut gram = DMatrix::<f64>::identity(d, d) * lambda;
        let mut rhs = DVector::<f64>::zeros(d);
        for _ in 0..500 {
            let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let y = rng.random_range(-10.0..10.0);
            let w2 = if weighted { rng.random_range(20.0..100.0) } else { 1.0 };
            st.rank1_update(&x, y, w2).unwrap();
            gram += &x * x.transpose() / w2;
            rhs += &x * (y / w2);
            let direct = gram.clone().lu().solve(&rhs).expect("ridge system is nonsingular");
            worst_theta = worst_theta.max((st.theta() - direct).amax());
            worst_drift = worst_drift.max(st.inverse_drift());
        }
    }
    outcome(
        worst_theta <= 1e-8 && worst_drift <= DRIFT_TOL,
        format!("max |theta - direct| {worst_theta:.2e}, max inverse drift {worst_drift:.2e} (500 updates, both families)"),
    )
}

fn monte_carlo_gap(inst: &CmdpInstance, policy: &PolicyTable, n: usize) -> (f64, f64, f64) {
    let g = inst.constraint();
    let exact = dp_evaluate(inst, policy, g).initial_value(inst);
    let stream = RngStream::new(0xACCE55);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for k in 1..=n {
        let ep = rollout(inst, policy, k, &stream).unwrap();
        let ret: f64 = (0..inst.horizon())
            .map(|h| g[h][ep.states[h]][ep.actions[h]])
            .sum();
        sum += ret;
        sum_sq += ret * ret;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    (exact, mean, se)
}

fn random_stochastic(hz: usize, ns: usize, na: usize) -> PolicyTable {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let table = (0..hz)
        .map(|_| {
            (0..ns)
                .map(|_| {
                    let w: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
                    let z: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / z).collect()
                })
                .collect()
        })
        .collect();
    PolicyTable::from_table(table).unwrap()
}

fn comparator_oracles(exp: &ExperimentOutput) -> Outcome {
    let tiny = build_tiny_instance();
    let reward = tiny.reward_table(1).clone();
    let fast = constrained_comparator(&tiny, &reward, 1e-10).unwrap().value_r;
    let brute = brute_force_comparator(&tiny, &reward).unwrap();
    let cmp_ok = (fast - brute).abs() <= 1e-6;

    let inst = &exp.prepared.instance;
    let (hz, ns, na) = (inst.horizon(), inst.num_states(), inst.num_actions());
    let policies = [
        ("uniform", PolicyTable::uniform(hz, ns, na)),
        ("all-plus", PolicyTable::deterministic(&vec![vec![na - 1; ns]; hz], na)),
        ("random-stochastic", random_stochastic(hz, ns, na)),
    ];
    let mut mc_ok = true;
    let mut parts = Vec::new();
    for (name, p) in &policies {
        let (exact, mean, se) = monte_carlo_gap(inst, p, 100_000);
        let z = if se > 0.0 { (exact - mean).abs() / se } else if exact == mean { 0.0 } else { f64::INFINITY };
        mc_ok &= z <= 3.0;
        parts.push(format!("{name} {exact:.4} vs {mean:.4} ({z:.2} se)"));
    }
    outcome(
        cmp_ok && mc_ok,
        format!("tiny comparator {fast:.9} vs brute force {brute:.9}; DP vs MC: {}", parts.join(", ")),
    )
}

fn optimism(exp: &ExperimentOutput) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in &exp.seeds {
        let (r, g) = (s.pd_powers.optimism_fraction(0), s.pd_powers.optimism_fraction(1));
        ok &= r >= 0.95 && g >= 0.95;
        parts.push(format!("seed {} r {r:.4} g {g:.4}", s.seed));
    }
    outcome(ok, parts.join(", "))
}

fn realizability(exp: &ExperimentOutput) -> Outcome {
    let inst = &exp.prepared.instance;
    let rep = validate_instance(inst, 1000, &mut ChaCha8Rng::seed_from_u64(8));
    let max_theta = rep.theta_norms.iter().copied().fold(0.0, f64::max);
    let ok = rep.passed() && rep.max_prob_sum_error <= PROB_SUM_TOL && max_theta <= 3.0 && rep.max_phi_v_norm <= 1.0;
    outcome(
        ok,
        format!(
            "prob sum error {:.2e}, max ||theta*|| {max_theta:.6}, max ||phi_V|| {:.6}",
            rep.max_prob_sum_error, rep.max_phi_v_norm
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(first: &Path, root: &Path) -> Outcome {
    let again = root.join("again");
    let serial = root.join("serial");
    run_experiment(&default_config(&again, 5)).unwrap();
    run_experiment(&default_config(&serial, 1)).unwrap();
    let base = csv_files(first);
    let rerun_ok = base == csv_files(&again);
    let workers_ok = base == csv_files(&serial);
    outcome(
        rerun_ok && workers_ok && !base.is_empty(),
        format!(
            "{} CSVs; rerun identical {rerun_ok}; workers 1 vs 5 identical {workers_ok}",
            base.len()
        ),
    )
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temp dir");
    let first = root.path().join("first");
    let start = Instant::now();
    let exp = run_experiment(&default_config(&first, 5)).expect("default experiment runs");
    let elapsed = start.elapsed().as_secs_f64();
    let defaults = LearnerConfig::theorem_defaults(10, 2000, 3.0);
    assert_eq!(exp.prepared.learner, defaults, "default config must use the theorem step sizes");

    let results = [
        ("1 shape of regret/violation curves", shape(&exp, elapsed)),
        ("2 random-policy violation anchor", baseline_anchor(&exp)),
        ("3 Slater margin", slater(&exp)),
        ("4 deterministic lemma suite", lemma_suite(&exp)),
        ("5 ridge solutions vs direct solves", ridge_equivalence()),
        ("6 comparator and DP oracles", comparator_oracles(&exp)),
        ("7 statistical optimism", optimism(&exp)),
        ("8 instance realizability", realizability(&exp)),
        ("9 byte-identical reruns", determinism(&first, root.path())),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
