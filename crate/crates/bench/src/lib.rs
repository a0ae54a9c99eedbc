//! Fixtures shared by the benchmarks.

use cnnmil::{load_musk_csv, normalize_minmax, Bag, Dataset, Label, MetaDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn musk1() -> Dataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/musk1_clean1.csv");
    normalize_minmax(&load_musk_csv(path).expect("Musk1 data file"))
}

/// Random bags with 1..=`max_len` instances of `dim` features in [0, 1).
pub fn random_dataset(seed: u64, n: usize, max_len: usize, dim: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bags = (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let rows = (0..rng.gen_range(1..=max_len)).map(|_| (0..dim).map(|_| rng.gen()).collect()).collect();
            Bag::from_rows(format!("b{i}"), label, rows).expect("valid bag")
        })
        .collect();
    Dataset::new(bags).expect("valid dataset")
}

/// Meta rows whose ±1 columns agree with the label with probability `agree`.
pub fn random_meta(seed: u64, rows: usize, columns: usize, agree: f64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..rows).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
    let x = labels
        .iter()
        .map(|l| (0..columns).map(|_| if rng.gen_bool(agree) { l.as_f64() } else { -l.as_f64() }).collect())
        .collect();
    (x, labels)
}

/// Meta dataset around precomputed ±1 rows, with placeholder member parameters.
pub fn meta_from_rows(x: &[Vec<f64>], labels: &[Label]) -> MetaDataset {
    let sign = |v: f64| if v >= 0.0 { Label::Positive } else { Label::Negative };
    let t2: Vec<Vec<Label>> = x.iter().map(|r| r.iter().map(|&v| sign(v)).collect()).collect();
    let columns = x.first().map_or(0, Vec::len);
    let params = cnnmil::CnnParams {
        eta_r: 1,
        eta_c: 1,
        d: cnnmil::RankParameter::new(1).expect("rank 1"),
        theta: 0.5,
        features: cnnmil::FeatureSubset::all(1),
    };
    MetaDataset {
        scores: x.iter().map(|r| r.iter().map(|v| (v + 1.0) / 2.0).collect()).collect(),
        t2,
        labels: labels.to_vec(),
        column_params: vec![params; columns],
    }
}
