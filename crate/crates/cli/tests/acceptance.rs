//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Directional criteria run on synthetic data with bias 0.75, noise 0.3,
//! 200 training and 200 test identities, two images per identity per view,
//! K = 200 and the default lambda.

mod support;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use camel::block::{build_block_data, build_consistency_matrix};
use camel::data::{generate_synthetic, split_identities, SyntheticSpec};
use camel::eval::{
    average_precision, build_split, rank_from_distances, rank_gallery, Protocol, SplitEntry,
};
use camel::objective::{objective_sum_form, objective_trace_form};
use camel::solver::{cluster_purity_report, pencil_matrix, solve_projection};
use camel::{
    camel_fit, camel_fit_supervised, cmel_fit, CamelConfig, FeatureSet, IndicatorMatrix,
    ProjectionModel, Ridge, Sample,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FORM_TOL: f64 = 1e-10;
const DESCENT_SLACK: f64 = 1e-8;
const CONSTRAINT_TOL: f64 = 1e-6;
const EIGEN_TOL: f64 = 1e-6;
const AGREEMENT_POINTS: f64 = 0.02;
const K_SPREAD_POINTS: f64 = 0.05;
const SCALE_BUDGET: Duration = Duration::from_secs(30 * 60);

const BIAS: f64 = 0.75;
const NOISE: f64 = 0.3;
const TRAIN_IDS: u64 = 200;
const CLUSTERS: usize = 200;
const SEEDS: u64 = 10;

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

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_features(r: &mut ChaCha8Rng, views: usize, dim: usize, per_view: usize) -> FeatureSet {
    let samples = (0..views)
        .flat_map(|p| (0..per_view).map(move |_| p))
        .map(|p| {
            Sample::new(
                p,
                None,
                (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    FeatureSet::new(views, samples).unwrap()
}

fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn synthetic(bias: f64, ids: usize, per: usize, seed: u64) -> (FeatureSet, FeatureSet) {
    let fs = generate_synthetic(&SyntheticSpec {
        ids,
        per_view_per_id: per,
        bias_strength: bias,
        noise_sigma: NOISE,
        seed,
        ..Default::default()
    })
    .unwrap();
    split_identities(&fs, (ids / 2) as u64).unwrap()
}

fn rank1(model: &ProjectionModel, test: &FeatureSet, seed: u64) -> f64 {
    let split = build_split(test, Protocol::SingleShot, 1, seed).unwrap();
    rank_gallery(model, &split, test).unwrap().rank1()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let views = r.random_range(2..4usize);
        let dim = r.random_range(1..9usize);
        let per_view = r.random_range(1..=40 / views);
        let k = r.random_range(1..9usize);
        let fs = random_features(&mut r, views, dim, per_view);
        let t = r.random_range(1..=dim);
        let u = random_matrix(&mut r, views * dim, t);
        let assignment: Vec<usize> = (0..fs.len()).map(|_| r.random_range(0..k)).collect();
        let lambda = r.random_range(0.0..1.0);
        let sum = objective_sum_form(&u, &fs, &assignment, k, lambda)
            .unwrap()
            .total;
        let block = build_block_data(&fs, Ridge::default()).unwrap();
        let h = IndicatorMatrix::from_assignment(&assignment, k).unwrap();
        let d = build_consistency_matrix(views, dim);
        let trace = objective_trace_form(&u, &block.x_tilde, &h, &d, lambda, fs.len()).unwrap();
        worst = worst.max((sum - trace).abs() / sum.abs().max(trace.abs()).max(1e-300));
    }
    outcome(
        worst <= FORM_TOL,
        format!("100 instances, worst relative gap {worst:.2e} (tol {FORM_TOL:.0e})"),
    )
}

fn criteria_2_3() -> (Outcome, Outcome) {
    let mut violations = 0;
    let mut capped = 0;
    let mut worst_constraint = 0.0f64;
    let mut max_iters = 0;
    for seed in 0..20 {
        let (train, _) = synthetic(BIAS, 2 * TRAIN_IDS as usize, 2, seed);
        let cfg = CamelConfig::default()
            .with_clusters(CLUSTERS)
            .with_seed(seed);
        let (model, st) = camel_fit(&train, &cfg).unwrap();
        violations += st
            .objective_history
            .windows(2)
            .filter(|w| w[1] > w[0] + DESCENT_SLACK)
            .count();
        if !st.converged || st.iteration > cfg.max_iter {
            capped += 1;
        }
        max_iters = max_iters.max(st.iteration);
        let t = model.out_dim() as f64;
        for res in &st.constraint_history {
            worst_constraint = worst_constraint.max(res / t.sqrt());
        }
    }
    (
        outcome(
            violations == 0 && capped == 0,
            format!("20 fits, {violations} ascents, {capped} runs hit the cap, at most {max_iters} iterations"),
        ),
        outcome(
            worst_constraint <= CONSTRAINT_TOL,
            format!("worst ||U'SU - VI||_F / sqrt(T) over every update {worst_constraint:.2e} (tol {CONSTRAINT_TOL:.0e})"),
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let (mut worst_oracle, mut worst_gamma) = (0.0f64, 0.0f64);
    for _ in 0..60 {
        let views = r.random_range(2..4usize);
        let dim = r.random_range(1..=12 / views);
        let per_view = r.random_range(2..15usize);
        let fs = random_features(&mut r, views, dim, per_view);
        let block = build_block_data(&fs, Ridge::default()).unwrap();
        let k = r.random_range(1..6usize);
        let assignment: Vec<usize> = (0..fs.len()).map(|_| r.random_range(0..k)).collect();
        let h = IndicatorMatrix::from_assignment(&assignment, k).unwrap();
        let d = build_consistency_matrix(views, dim);
        let lambda = r.random_range(0.0..1.0);
        let t = r.random_range(1..=views * dim);
        let proj = solve_projection(&block, &h, &d, lambda, t).unwrap();
        let f =
            objective_trace_form(&proj.u_tilde, &block.x_tilde, &h, &d, lambda, fs.len()).unwrap();

        let gammas = support::generalized_values(
            &pencil_matrix(&block, &h, &d, lambda).unwrap(),
            &block.sigma_tilde,
        );
        let oracle = views as f64 * gammas[..t].iter().sum::<f64>();
        let selected = views as f64 * proj.eigenvalues.iter().sum::<f64>();
        // relative to the objective, floored at the spectral scale for near-zero optima
        let floor =
            1e-6 * views as f64 * t as f64 * gammas.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let scale = f.abs().max(oracle.abs()).max(floor);
        worst_oracle = worst_oracle.max((f - oracle).abs() / scale);
        worst_gamma = worst_gamma.max((f - selected).abs() / scale);
    }
    outcome(
        worst_oracle <= EIGEN_TOL && worst_gamma <= EIGEN_TOL,
        format!(
            "60 instances with VM <= 12, worst gap to Jacobi oracle {worst_oracle:.2e}, to V*sum(gamma) {worst_gamma:.2e} (tol {EIGEN_TOL:.0e})"
        ),
    )
}

struct SeedRun {
    camel: f64,
    cmel: f64,
    supervised: f64,
    euclidean: f64,
    mixed_initial: f64,
    mixed_final: f64,
}

fn directional_runs(bias: f64) -> Vec<SeedRun> {
    (0..SEEDS)
        .map(|seed| {
            let (train, test) = synthetic(bias, 2 * TRAIN_IDS as usize, 2, seed);
            let cfg = CamelConfig::default()
                .with_clusters(CLUSTERS)
                .with_seed(seed);
            let (camel, st) = camel_fit(&train, &cfg).unwrap();
            let (cmel, _) = cmel_fit(&train, &cfg).unwrap();
            let sup = camel_fit_supervised(&train, &cfg).unwrap();
            let labels = train.identities().unwrap();
            SeedRun {
                camel: rank1(&camel, &test, seed),
                cmel: rank1(&cmel, &test, seed),
                supervised: rank1(&sup, &test, seed),
                euclidean: rank1(&ProjectionModel::identity(2, test.dim()), &test, seed),
                mixed_initial: cluster_purity_report(&st.initial_assignment, labels)
                    .unwrap()
                    .rate_mixed,
                mixed_final: cluster_purity_report(st.h.assignment(), labels)
                    .unwrap()
                    .rate_mixed,
            }
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_7() -> Outcome {
    let (train, test) = synthetic(BIAS, 2 * TRAIN_IDS as usize, 5, 0);
    let scores: Vec<(usize, f64)> = [50, 100, 200, 400]
        .into_iter()
        .map(|k| {
            let (m, _) = camel_fit(&train, &CamelConfig::default().with_clusters(k)).unwrap();
            (k, rank1(&m, &test, 0))
        })
        .collect();
    let hi = scores.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let lo = scores.iter().map(|s| s.1).fold(f64::MAX, f64::min);
    let listed: Vec<String> = scores
        .iter()
        .map(|(k, s)| format!("K={k}: {s:.3}"))
        .collect();
    outcome(
        hi - lo <= K_SPREAD_POINTS,
        format!(
            "N = {}, rank-1 {}, spread {:.3} (tol {K_SPREAD_POINTS})",
            train.len(),
            listed.join(", "),
            hi - lo
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let mut mismatches = 0;
    for _ in 0..50 {
        let ids = r.random_range(1..11u64);
        let views = r.random_range(2..4usize);
        let mut entry = |index| SplitEntry {
            index,
            identity: r.random_range(0..ids),
            view: r.random_range(0..views),
        };
        let gallery: Vec<SplitEntry> = (0..24).map(&mut entry).collect();
        let probes: Vec<SplitEntry> = (0..6).map(|i| entry(100 + i)).collect();
        let d = DMatrix::from_fn(probes.len(), gallery.len(), |_, _| {
            r.random_range(0..6) as f64 * 0.25
        });
        let ours = rank_from_distances(&d, &probes, &gallery);
        let want = support::brute_force(&d, &probes, &gallery);
        if ours.cmc != want.cmc
            || ours.map.to_bits() != want.map.to_bits()
            || ours.excluded_probes != want.excluded
        {
            mismatches += 1;
        }
    }
    let hand = average_precision(&[1, 2, 1], 1);
    outcome(
        mismatches == 0 && hand == Some(5.0 / 6.0),
        format!("50 random splits, {mismatches} mismatches with brute force; AP(hits at 1 and 3) = {hand:?}"),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_camel"))
        .args(args)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn criterion_11(dir: &Path) -> Outcome {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (data, m1, m2, r1, r2) = (
        p("data.csv"),
        p("a.model"),
        p("b.model"),
        p("a.txt"),
        p("b.txt"),
    );
    let ok = run_cli(&["synth", "--out", &data, "--seed", "11"])
        && run_cli(&["fit", "--features", &data, "--out", &m1, "--seed", "3"])
        && run_cli(&["fit", "--features", &data, "--out", &m2, "--seed", "3"])
        && run_cli(&["eval", "--features", &data, "--model", &m1, "--out", &r1])
        && run_cli(&["eval", "--features", &data, "--model", &m1, "--out", &r2]);
    if !ok {
        return outcome(false, "a CLI invocation failed");
    }
    let read = |f: &str| std::fs::read(f).unwrap();
    let models = read(&m1) == read(&m2);
    let reports = read(&r1) == read(&r2);
    outcome(
        models && reports,
        format!("model files identical: {models}, eval reports identical: {reports}"),
    )
}

fn criterion_12() -> Outcome {
    let start = Instant::now();
    let fs = generate_synthetic(&SyntheticSpec {
        views: 6,
        ids: 8334,
        per_view_per_id: 2,
        dim: 64,
        seed: 12,
        ..Default::default()
    })
    .unwrap();
    let result = camel_fit(&fs, &CamelConfig::default().with_clusters(500));
    let elapsed = start.elapsed();
    match result {
        Ok((_, st)) => outcome(
            elapsed <= SCALE_BUDGET,
            format!(
                "N = {}, V = 6, M = 64, K = 500: {} iterations, converged {}, {:.1} s on {} thread(s) (budget {} s)",
                fs.len(),
                st.iteration,
                st.converged,
                elapsed.as_secs_f64(),
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
                SCALE_BUDGET.as_secs()
            ),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn report(id: &str, name: &str, o: &Outcome, elapsed: Duration) -> bool {
    println!(
        "criterion {id:>2} [{}] {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let mut all = true;

    let (o, t) = timed(criterion_1);
    let o = outcome(o.pass && t < Duration::from_secs(10), o.detail);
    all &= report("1", "objective-form equivalence", &o, t);

    let ((o2, o3), t) = timed(criteria_2_3);
    let o2 = outcome(o2.pass && t < Duration::from_secs(120), o2.detail);
    all &= report("2", "monotone descent", &o2, t);
    all &= report("3", "constraint satisfaction", &o3, t);

    let (o, t) = timed(criterion_4);
    all &= report("4", "eigen-step correctness", &o, t);

    let ((biased, unbiased), t) = timed(|| (directional_runs(BIAS), directional_runs(0.0)));
    let wins = biased.iter().filter(|s| s.camel > s.cmel).count();
    let gap =
        (mean(unbiased.iter().map(|s| s.camel)) - mean(unbiased.iter().map(|s| s.cmel))).abs();
    let o = outcome(
        wins >= 8 && gap <= AGREEMENT_POINTS && t < Duration::from_secs(300),
        format!(
            "bias {BIAS}: CAMEL > CMEL in {wins}/10 (mean {:.3} vs {:.3}); bias 0: mean gap {gap:.3} (tol {AGREEMENT_POINTS})",
            mean(biased.iter().map(|s| s.camel)),
            mean(biased.iter().map(|s| s.cmel))
        ),
    );
    all &= report("5", "asymmetric vs symmetric", &o, t);

    let wins = biased.iter().filter(|s| s.camel > s.euclidean).count();
    let o = outcome(
        wins >= 9,
        format!(
            "CAMEL > Euclidean in {wins}/10 (mean {:.3} vs {:.3})",
            mean(biased.iter().map(|s| s.camel)),
            mean(biased.iter().map(|s| s.euclidean))
        ),
    );
    all &= report("6", "baseline improvement", &o, Duration::ZERO);

    let (o, t) = timed(criterion_7);
    all &= report("7", "K-insensitivity", &o, t);

    let drops = biased
        .iter()
        .filter(|s| s.mixed_final <= s.mixed_initial)
        .count();
    let o = outcome(
        drops >= 7,
        format!(
            "mixed-cluster rate at convergence <= initialization in {drops}/10 (mean {:.3} -> {:.3})",
            mean(biased.iter().map(|s| s.mixed_initial)),
            mean(biased.iter().map(|s| s.mixed_final))
        ),
    );
    all &= report("8", "purity trend", &o, Duration::ZERO);

    let (o, t) = timed(criterion_9);
    all &= report("9", "evaluation oracle", &o, t);

    let wins = biased.iter().filter(|s| s.supervised >= s.camel).count();
    let o = outcome(
        wins >= 8,
        format!(
            "supervised >= CAMEL in {wins}/10 (mean {:.3} vs {:.3})",
            mean(biased.iter().map(|s| s.supervised)),
            mean(biased.iter().map(|s| s.camel))
        ),
    );
    all &= report("10", "supervised dominance", &o, Duration::ZERO);

    let dir = tempfile::tempdir().unwrap();
    let (o, t) = timed(|| criterion_11(dir.path()));
    all &= report("11", "determinism", &o, t);

    let (o, t) = timed(criterion_12);
    all &= report("12", "scale smoke test", &o, t);

    if !all {
        std::process::exit(1);
    }
}
