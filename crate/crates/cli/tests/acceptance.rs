//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cnnmil::{
    build_meta_dataset, cnn_classify, evaluate_model, evolve, fast_nondominated_sort, hypervolume, kfold_validate,
    loo_validate, rank_hausdorff, train_final, tune_stack, Bag, CnnParams, FeatureSubset, GaConfig, Label, MetaDataset,
    MetaFeatures, Objectives, RankParameter, Scheme, StackedModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const MUSK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/musk1_clean1.csv");

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    if elapsed > Duration::from_secs(limit_secs) {
        Err(format!("took {elapsed:.2?}, limit {limit_secs} s"))
    } else {
        Ok(())
    }
}

fn rank(d: usize) -> RankParameter {
    RankParameter::new(d).unwrap()
}

fn distance_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for pair in 0..1000 {
        let dim = rng.gen_range(1..=4);
        let a = common::random_bag(&mut rng, "a".into(), Label::Positive, 6, dim);
        let b = common::random_bag(&mut rng, "b".into(), Label::Negative, 6, dim);
        let mut mask: Vec<bool> = (0..dim).map(|_| rng.gen()).collect();
        if !mask.contains(&true) {
            mask[0] = true;
        }
        let s = FeatureSubset::from_mask(&mask).unwrap();
        let rows = |bag: &Bag| bag.instances().iter().map(|i| i.features().to_vec()).collect::<Vec<_>>();
        for d in 1..=a.len().max(b.len()) {
            let got = rank_hausdorff(&a, &b, rank(d), &s).unwrap();
            let want = common::hausdorff(&rows(&a), &rows(&b), d, s.indices());
            if got.to_bits() != want.to_bits() {
                return Err(format!("pair {pair}, d = {d}: {got} vs oracle {want}"));
            }
            compared += 1;
        }
    }
    within(start.elapsed(), 5)?;
    Ok(format!("{compared} (pair, d) cases bit-identical in {:.2?}", start.elapsed()))
}

fn cnn_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let thetas = [0.1, 0.25, 0.5, 0.75, 0.9];
    let mut compared = 0;
    for set in 0..200 {
        let t = rng.gen_range(4..=8);
        let train = common::random_dataset(&mut rng, t, 4, 1);
        let test = common::random_bag(&mut rng, "q".into(), Label::Negative, 4, 1);
        for eta_r in 1..=3 {
            for eta_c in 1..=3 {
                for d in 1..=3 {
                    for &theta in &thetas {
                        let params = CnnParams { eta_r, eta_c, d: rank(d), theta, features: FeatureSubset::all(1) };
                        let got = cnn_classify(&train, &params, &test).unwrap();
                        let (label, counts) = common::cnn(&train, &test, eta_r, eta_c, d, theta, &[0]);
                        let got_counts =
                            [got.counts.ref_pos, got.counts.ref_neg, got.counts.cite_pos, got.counts.cite_neg];
                        if got.label != label || got_counts != counts {
                            return Err(format!(
                                "dataset {set}, ({eta_r}, {eta_c}, {d}, {theta}): {:?} {got_counts:?} vs oracle {label:?} {counts:?}",
                                got.label
                            ));
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!("{compared} classifications agree in {:.2?}", start.elapsed()))
}

fn loo_equals_n_fold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for set in 0..20 {
        let n = rng.gen_range(6..=14);
        let data = common::random_dataset(&mut rng, n, 4, 2);
        let params = CnnParams {
            eta_r: rng.gen_range(1..=3),
            eta_c: rng.gen_range(1..=3),
            d: rank(rng.gen_range(1..=3)),
            theta: rng.gen_range(0.1..0.9),
            features: FeatureSubset::all(2),
        };
        let loo = loo_validate(&data, &params).unwrap();
        let nfold = kfold_validate(&data, &params, n, rng.gen()).unwrap();
        if loo.predictions != nfold.predictions || loo.objectives() != nfold.objectives() {
            return Err(format!("dataset {set} differs"));
        }
    }
    Ok("20 datasets identical".into())
}

fn sort_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for pop in 0..100 {
        let n = rng.gen_range(1..=50);
        // coarse grid so ties and duplicates occur
        let points: Vec<Objectives> = (0..n)
            .map(|_| Objectives::new(rng.gen_range(0..8) as f64 / 7.0, rng.gen_range(0..8) as f64 / 7.0))
            .collect();
        if fast_nondominated_sort(&points) != common::brute_force_fronts(&points) {
            return Err(format!("population {pop} differs"));
        }
    }
    Ok("100 populations identical".into())
}

fn toy_pipeline() -> Outcome {
    let start = Instant::now();
    let data = common::separable_twelve();
    let config = GaConfig { population: 20, generations: 10, ..GaConfig::default() };
    let front = evolve(&data, &config, 1).unwrap();
    if !front.objectives().contains(&Objectives::new(1.0, 1.0)) {
        return Err(format!("front {:?} lacks (1, 1)", front.objectives()));
    }
    if front != evolve(&data, &config, 1).unwrap() {
        return Err("same seed gave a different front".into());
    }
    let meta = build_meta_dataset(&data, &front).unwrap();
    let stacked = tune_stack(&meta, &config, 1).unwrap();
    let best = stacked.most_balanced().unwrap();
    let model = StackedModel::fit(&meta, best, None, MetaFeatures::Labels).unwrap();
    let report = evaluate_model(&data, &model, Scheme::Loo).unwrap();
    let correct = report.predictions.iter().zip(data.labels()).filter(|(p, t)| **p == *t).count();
    within(start.elapsed(), 60)?;
    check(
        correct == 12,
        format!("stacked LOO {correct}/12 correct, {} front members, {:.2?}", front.len(), start.elapsed()),
    )
}

fn cnnmil(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cnnmil")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn points(file: &Value) -> Vec<Objectives> {
    file["front"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| Objectives::new(m["acc_pos"].as_f64().unwrap(), m["acc_neg"].as_f64().unwrap()))
        .collect()
}

/// Full Musk1 pipeline (default search settings: population 100, 100 generations).
fn musk_pipeline(scratch: &Path, jobs: &str) -> Result<PathBuf, String> {
    let dataset = scratch.join("dataset.json");
    if !dataset.exists() {
        cnnmil(&["ingest", MUSK, "--out", scratch.to_str().unwrap()])?;
    }
    let out = scratch.join(format!("jobs{jobs}"));
    let o = out.to_str().unwrap();
    let d = dataset.to_str().unwrap();
    cnnmil(&["optimize", "--dataset", d, "--seed", "0", "--jobs", jobs, "--out", o])?;
    let front = out.join("front.json");
    cnnmil(&["stack", "--front", front.to_str().unwrap(), "--dataset", d, "--seed", "0", "--jobs", jobs, "--out", o])?;
    Ok(out)
}

fn musk_stage1(run: &Path) -> Outcome {
    let front = points(&read_json(&run.join("front.json")));
    let best_pos_at_full_neg = front.iter().filter(|p| p.acc_neg == 1.0).map(|p| p.acc_pos).fold(f64::NAN, f64::max);
    let best_neg_at_full_pos = front.iter().filter(|p| p.acc_pos == 1.0).map(|p| p.acc_neg).fold(f64::NAN, f64::max);
    check(
        best_pos_at_full_neg >= 0.85 && best_neg_at_full_pos >= 0.78,
        format!("Acc+ {best_pos_at_full_neg:.4} at Acc- = 1; Acc- {best_neg_at_full_pos:.4} at Acc+ = 1"),
    )
}

fn musk_stage2(run: &Path) -> Outcome {
    let cnn = points(&read_json(&run.join("front.json")));
    let stacked = points(&read_json(&run.join("stack_front.json")));
    let origin = Objectives::new(0.0, 0.0);
    let (hv_cnn, hv_stack) = (hypervolume(&cnn, origin), hypervolume(&stacked, origin));
    let best_min = stacked.iter().map(Objectives::min).fold(0.0, f64::max);
    check(
        hv_stack >= hv_cnn - 0.02 && best_min >= 0.90,
        format!("hypervolume stacked {hv_stack:.4} vs CNN {hv_cnn:.4}; best min(Acc+, Acc-) {best_min:.4}"),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    for file in ["front.json", "stack_front.json", "model.json"] {
        let (x, y) = (std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap());
        if x != y {
            return Err(format!("{file} differs between --jobs 1 and --jobs 8"));
        }
    }
    Ok("front, stacked front and model files identical for --jobs 1 and 8".into())
}

fn dual_feasibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    for set in 0..50 {
        let n = rng.gen_range(8..=60);
        let j = rng.gen_range(1..=12);
        let mut labels: Vec<Label> =
            (0..n).map(|_| if rng.gen_bool(0.5) { Label::Positive } else { Label::Negative }).collect();
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        let flip = |l: Label| if l.is_positive() { Label::Negative } else { Label::Positive };
        // columns agree with the label most of the time
        let t2: Vec<Vec<Label>> =
            labels.iter().map(|&l| (0..j).map(|_| if rng.gen_bool(0.75) { l } else { flip(l) }).collect()).collect();
        let scores = t2.iter().map(|r| r.iter().map(|l| (l.as_f64() + 1.0) / 2.0).collect()).collect();
        let column_params = (0..j)
            .map(|_| CnnParams { eta_r: 1, eta_c: 1, d: rank(1), theta: 0.5, features: FeatureSubset::all(1) })
            .collect();
        let meta = MetaDataset { t2, scores, labels, column_params };
        let gamma = 10f64.powf(rng.gen_range(-3.0..3.0));
        let c = 10f64.powf(rng.gen_range(-2.0..3.0));
        let svm = train_final(&meta, gamma, c).unwrap();
        if svm.alphas.iter().any(|&a| !(0.0..=c).contains(&a)) {
            return Err(format!("set {set}: coefficient outside [0, {c}]"));
        }
        let balance: f64 = svm.alphas.iter().zip(&meta.labels).map(|(a, l)| a * l.as_f64()).sum();
        worst = worst.max(balance.abs());
        if balance.abs() >= 1e-6 {
            return Err(format!("set {set}: sum of alpha * y = {balance:e}"));
        }
    }
    Ok(format!("50 meta datasets feasible, max |sum alpha*y| = {worst:e}"))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(&str, Outcome)> = vec![
        ("distance oracle equivalence", distance_oracle()),
        ("CNN oracle equivalence", cnn_oracle()),
        ("LOO = N-fold", loo_equals_n_fold()),
        ("non-dominated sort oracle", sort_oracle()),
        ("toy pipeline perfection", toy_pipeline()),
    ];

    let musk_start = Instant::now();
    match musk_pipeline(scratch.path(), "1") {
        Ok(run) => {
            eprintln!("Musk1 pipeline (--jobs 1) finished in {:.1?}", musk_start.elapsed());
            results.push(("Musk1 stage-1 reproduction", musk_stage1(&run)));
            results.push(("Musk1 stage-2 improvement", musk_stage2(&run)));
            let again = musk_pipeline(scratch.path(), "8");
            results.push(("determinism across --jobs", again.and_then(|other| determinism(&run, &other))));
        }
        Err(e) => {
            for name in ["Musk1 stage-1 reproduction", "Musk1 stage-2 improvement", "determinism across --jobs"] {
                results.push((name, Err(format!("pipeline failed: {e}"))));
            }
        }
    }
    results.push(("dual-solver feasibility", dual_feasibility()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
