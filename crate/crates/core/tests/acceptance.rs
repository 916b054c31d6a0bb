//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails. Criteria can be selected
//! by number: `cargo test --test acceptance -- 1 4 6`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltl_rl::automata::{accepts_lasso, parse_hoa_ldba, translate_fragment, validate_ldba, Ldba, LassoWord};
use ltl_rl::env::{step_dynamics, Bounds, CarAction, CarState, Workspace};
use ltl_rl::harness::{run_experiment, tabular_oracle, ExperimentConfig, Gridworld};
use ltl_rl::learner::{Mlp, Output};
use ltl_rl::ltl::parse_ltl;
use ltl_rl::product::{ProductEnv, QInit};
use ltl_rl::shaping::{annotate, brute_force_annotation, RewardParams};
use ltl_rl::testkit::{random_lasso, random_ldba};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> Ldba {
    let text = std::fs::read_to_string(root().join("crates/core/fixtures").join(name)).unwrap();
    let (t, parts, eps) = parse_hoa_ldba(&text).unwrap();
    validate_ldba(&t, &parts, &eps).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> Verdict {
    let t = Instant::now();
    let v = f();
    let el = t.elapsed();
    match limit {
        Some(l) if el > l => verdict(false, format!("{}; took {:.1}s, limit {}s", v.detail, el.as_secs_f64(), l.as_secs())),
        _ => verdict(v.pass, format!("{} ({:.1}s)", v.detail, el.as_secs_f64())),
    }
}

fn annotation_equivalence() -> Verdict {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut compare = |name: String, a: &Ldba| {
        let alphabet: Vec<_> = a.valuations().collect();
        let fast = annotate(a);
        let slow = brute_force_annotation(a, &alphabet).unwrap();
        checked += 1;
        if fast.b_maps() != slow.b_maps() || fast.traps() != slow.traps() {
            bad.push(name);
        }
    };
    for f in ["phi1.hoa", "phi2.hoa", "phi3.hoa"] {
        compare(f.to_string(), &fixture(f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..100 {
        let n_ap = rng.gen_range(1..=3);
        let a = random_ldba(&mut rng, 8, 3, n_ap);
        assert!(a.num_states() <= 8 && a.num_sets() <= 3);
        compare(format!("random #{k}"), &a);
    }
    verdict(bad.is_empty(), format!("{checked} automata, mismatches: {bad:?}"))
}

fn reward_suite() -> Verdict {
    let w = Workspace::load(root().join("configs/workspaces/example1.json")).unwrap();
    let params = RewardParams { r_g: 50.0, r_n: -0.1, r_d: -10.0, d_max: w.bounds.diagonal() };
    let env = ProductEnv::new(w.clone(), &fixture("phi1.hoa"), params, 200);
    let still = CarAction::new(0.0, 0.0);
    let mut failures = Vec::new();
    // entering a from q0 and b from q1 fire annotated edges
    for (x, y, q) in [(-3.0, -3.0, 0), (-2.0, -3.5, 0), (3.0, 2.5, 1)] {
        let r = env.step(&env.reset_at(CarState::new(x, y, 0.0), q), still).reward;
        if r != 50.0 {
            failures.push(format!("goal ({x}, {y}) q{q}: {r}"));
        }
    }
    // free space: r_n times the distance to the progress region, in closed form
    let a_dist = |x: f64, y: f64| {
        let dx = (-3.5 - x).max(0.0).max(x + 2.0);
        let dy = (-3.5 - y).max(0.0).max(y + 2.0);
        dx.hypot(dy)
    };
    let b_dist = |x: f64, y: f64| {
        let dx = (2.0 - x).max(0.0).max(x - 3.5);
        let dy = (2.0 - y).max(0.0).max(y - 3.5);
        dx.hypot(dy)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut n_free = 0;
    while n_free < 200 {
        let (x, y) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if w.regions.iter().any(|r| r.rect.contains(x, y)) {
            continue;
        }
        n_free += 1;
        for (q, d) in [(0, a_dist(x, y)), (1, b_dist(x, y))] {
            let r = env.step(&env.reset_at(CarState::new(x, y, 0.0), q), still).reward;
            if (r - -0.1 * d).abs() > 1e-9 {
                failures.push(format!("free ({x}, {y}) q{q}: {r} vs {}", -0.1 * d));
            }
        }
    }
    for (x, y, q, d) in [(0.0, -2.5, 0, 2.0), (1.0, 1.0, 0, 18f64.sqrt()), (-3.0, 1.0, 0, 3.0), (0.0, 0.0, 1, 8f64.sqrt())] {
        let r = env.step(&env.reset_at(CarState::new(x, y, 0.0), q), still).reward;
        if (r - -0.1 * d).abs() > 1e-9 {
            failures.push(format!("hand point ({x}, {y}) q{q}: {r}"));
        }
    }
    // trap entry: the same task with an avoidance conjunct
    let mut wc = w.clone();
    wc.regions.push(ltl_rl::env::Region { name: "c".into(), rect: ltl_rl::env::Rect::new(-1.0, 1.0, -1.0, 1.0) });
    let guarded = translate_fragment(&parse_ltl("F (a & F b) & G !c").unwrap()).unwrap();
    let env_c = ProductEnv::new(wc, &guarded, params, 200);
    let o = env_c.step(&env_c.reset_at(CarState::new(0.0, 0.0, 0.0), guarded.initial()), still);
    if o.reward != -10.0 || !env_c.automaton().is_trap(o.next.q) {
        failures.push(format!("trap entry: reward {} q' {}", o.reward, o.next.q));
    }
    verdict(failures.is_empty(), format!("goal/free/trap checks, failures: {failures:?}"))
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut nets = 0;
    for trial in 0..6 {
        let n_in = rng.gen_range(2..7);
        let (h1, h2) = (rng.gen_range(3..12), rng.gen_range(3..12));
        let n_out = rng.gen_range(1..4);
        let output = if trial % 2 == 0 { Output::Identity } else { Output::ScaledTanh { bound: 1.0 } };
        let shape = Mlp::new(&[n_in, h1, h2, n_out], output, &mut rng);
        let p: Vec<f64> = (0..shape.num_params()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let net = Mlp::from_flat(shape.sizes(), output, &p).unwrap();
        let batch = 4;
        let x = Array2::from_shape_fn((batch, n_in), |_| rng.gen_range(-1.0..1.0));
        let c = Array2::from_shape_fn((batch, n_out), |_| rng.gen_range(-1.0..1.0));
        let loss = |m: &Mlp| (&m.forward(x.view()) * &c).sum();
        let (g, _) = net.backward(&net.forward_trace(x.view()), &c);
        let flat = g.flat();
        for _ in 0..20 {
            let k = rng.gen_range(0..p.len());
            let at = |d: f64| {
                let mut q = p.clone();
                q[k] += d;
                loss(&Mlp::from_flat(net.sizes(), output, &q).unwrap())
            };
            let num = (at(1e-5) - at(-1e-5)) / 2e-5;
            let rel = (num - flat[k]).abs() / (num.abs() + flat[k].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        nets += 1;
    }
    verdict(worst < 1e-4, format!("{nets} networks x 20 coordinates, worst relative error {worst:.2e}"))
}

/// Reference steps integrated with 1000 RK4 substeps over dt = 0.1:
/// (x, y, θ), (v, φ), result.
const RK4_REFERENCE: [([f64; 3], [f64; 2], [f64; 3]); 10] = [
    ([0.647, 1.625, -1.447], [-0.7, 0.436], [0.6240742872818298, 1.6929294139562845, -1.4796132204120367]),
    ([2.19, -0.992, -1.61], [0.356, 0.803], [2.20437114338577, -1.0279041300774372, -1.5731241603479382]),
    ([-2.254, -2.7, -0.851], [-0.401, 0.203], [-2.2833925835180615, -2.672418169424191, -0.8592539923010882]),
    ([-1.91, -2.814, -1.04], [-0.53, -0.398], [-1.9281799528611459, -2.763082305185369, -1.0177168019434726]),
    ([-0.51, -1.739, 2.843], [0.244, 0.46], [-0.535010761022031, -1.7374335791633473, 2.8550889499664045]),
    ([-0.754, 2.613, 2.039], [-0.507, 0.422], [-0.7218911982982744, 2.5722897560657305, 2.016237041115963]),
    ([2.67, 0.429, -0.778], [-0.246, 0.668], [2.6465957925444576, 0.44041265223059056, -0.797409498079992]),
    ([0.205, 2.611, 1.119], [0.636, 0.332], [0.22250037955493107, 2.6730650715901354, 1.1409268027148445]),
    ([-0.743, -1.026, 2.754], [0.398, -0.188], [-0.7783590534068441, -1.0073492855847586, 2.7464281829963846]),
    ([-2.428, -0.509, 1.302], [-0.338, 0.758], [-2.424577853261442, -0.5452189700944786, 1.2700031636821731]),
];

fn dynamics_check() -> Verdict {
    let b = Bounds::default();
    let dt = 0.1;
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let s = CarState::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0));
        let v = rng.gen_range(-1.0..1.0);
        let n = step_dynamics(s, CarAction::new(v, 0.0), dt, &b);
        let want = (s.x + dt * (v * s.theta.cos()), s.y + dt * (v * s.theta.sin()), s.theta);
        if (n.x, n.y, n.theta) != want {
            failures.push(format!("straight {s:?} v={v}"));
        }
    }
    let mut worst_ratio = 0.0f64;
    for (s, a, r) in RK4_REFERENCE {
        let n = step_dynamics(CarState::new(s[0], s[1], s[2]), CarAction::new(a[0], a[1]), dt, &b);
        // the position's second derivative has constant norm |v|·|ω|/cos γ
        let (v, phi) = (a[0], a[1]);
        let gamma = phi.tan().atan() / 2.0;
        let bound = 0.5 * dt * dt * v.abs() * (v * phi.tan()).abs() / gamma.cos();
        let err = (n.x - r[0]).hypot(n.y - r[1]);
        worst_ratio = worst_ratio.max(err / bound);
        if err > bound || (n.theta - r[2]).abs() > 1e-12 {
            failures.push(format!("rk4 {s:?}: position error {err:.3e} > {bound:.3e} or heading {} vs {}", n.theta, r[2]));
        }
    }
    verdict(
        failures.is_empty(),
        format!("100 straight-line steps exact, 10 RK4 references, worst error/bound {worst_ratio:.6}, failures: {failures:?}"),
    )
}

fn translator_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut disagreements = Vec::new();
    for (f, name) in [
        ("F (a & F b)", "phi1.hoa"),
        ("F (a & F (b & F (c & F d)))", "phi2.hoa"),
        ("F (a & F d) | F (b & (!c U d))", "phi3.hoa"),
    ] {
        let ours = translate_fragment(&parse_ltl(f).unwrap()).unwrap();
        let theirs = fixture(name);
        let mut n = 0;
        for _ in 0..1000 {
            let (prefix, cycle) = random_lasso(&mut rng, theirs.ap(), 6, 4);
            let w = LassoWord::new(prefix, cycle);
            if accepts_lasso(&ours, &w) != accepts_lasso(&theirs, &w) {
                n += 1;
            }
        }
        disagreements.push((name, n));
    }
    let total: usize = disagreements.iter().map(|d| d.1).sum();
    verdict(total == 0, format!("3 x 1000 lassos, disagreements {disagreements:?}"))
}

fn oracle_check() -> Verdict {
    let params = RewardParams { r_g: 50.0, r_n: -0.1, r_d: -10.0, d_max: 12.0 };
    let mut details = Vec::new();
    let mut pass = true;
    for (grid, hoa) in [("phi1_5x5.json", "phi1.hoa"), ("phi3_case2.json", "phi3.hoa")] {
        let g = Gridworld::load(root().join("crates/core/fixtures/grids").join(grid)).unwrap();
        let ann = g.annotate(&fixture(hoa)).unwrap();
        let res = tabular_oracle(&g, &ann, &params, 0.99, 1e-9).unwrap();
        let m = res.mismatches();
        pass &= m.is_empty() && res.count_reachable() > 0;
        details.push(format!("{grid}: {} satisfied / {} reachable, {} mismatches", res.count_satisfied(), res.count_reachable(), m.len()));
    }
    verdict(pass, details.join("; "))
}

fn end_to_end_learning() -> Verdict {
    let mut cfg = ExperimentConfig::load(root().join("configs/experiments/example1.json")).unwrap();
    cfg.steps = 200_000;
    cfg.seeds = vec![0, 1, 2];
    cfg.modes = vec![QInit::RandomQ, QInit::FixedQ0];
    let report = run_experiment(&cfg, None).unwrap();
    let rates = |m: QInit| report.runs.iter().filter(|r| r.mode == m).map(|r| r.success_rate).collect::<Vec<_>>();
    let ours = rates(QInit::RandomQ);
    let base = rates(QInit::FixedQ0);
    let good = ours.iter().filter(|&&r| r >= 0.6).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    verdict(
        good >= 2 && mean(&ours) >= mean(&base),
        format!(
            "random-q {ours:?} (mean {:.3}, {good}/3 >= 0.6), fixed-q0 {base:?} (mean {:.3})",
            mean(&ours),
            mean(&base)
        ),
    )
}

fn reproducibility() -> Verdict {
    let mut cfg = ExperimentConfig::load(root().join("configs/experiments/example1.json")).unwrap();
    cfg.steps = 5_000;
    cfg.seeds = vec![11];
    cfg.modes = vec![QInit::RandomQ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_experiment(&cfg, Some(d.path())).unwrap();
    }
    let mut same = true;
    for f in ["random-q_seed11_checkpoint.json", "random-q_seed11_metrics.csv", "report.json"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        same &= !a.is_empty() && a == b;
    }
    verdict(same, "two 5000-step runs with seed 11: checkpoint, metrics and report byte-identical")
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    type Criterion = (usize, &'static str, Option<u64>, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        (1, "annotation matches brute force", Some(5), annotation_equivalence),
        (2, "reward regimes", None, reward_suite),
        (3, "gradient correctness", Some(10), gradient_check),
        (4, "dynamics correctness", None, dynamics_check),
        (5, "translator soundness", Some(10), translator_soundness),
        (6, "tabular oracle vs reachability", Some(30), oracle_check),
        (7, "end-to-end learning", None, end_to_end_learning),
        (8, "reproducibility", None, reproducibility),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (n, name, limit, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let v = timed(limit.map(Duration::from_secs), f);
        failed += !v.pass as usize;
        writeln!(out, "criterion {n} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail).unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
