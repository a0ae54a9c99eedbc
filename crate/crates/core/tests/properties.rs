mod common;

use cnnmil::optimize::CnnGenome;
use cnnmil::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bag_rows(max_len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-100.0f64..100.0, dim), 1..=max_len)
}

fn bag_pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>)> {
    (1usize..=4).prop_flat_map(|dim| (bag_rows(6, dim), bag_rows(6, dim), prop::collection::vec(any::<bool>(), dim)))
}

fn subset(mask: &[bool]) -> FeatureSubset {
    let mut m = mask.to_vec();
    if !m.iter().any(|&b| b) {
        m[0] = true;
    }
    FeatureSubset::from_mask(&m).unwrap()
}

fn bag(id: &str, rows: Vec<Vec<f64>>) -> Bag {
    Bag::from_rows(id, Label::Positive, rows).unwrap()
}

fn rank(d: usize) -> RankParameter {
    RankParameter::new(d).unwrap()
}

proptest! {
    #[test]
    fn hausdorff_matches_brute_force_bitwise((a, b, mask) in bag_pair(), d in 1usize..=8) {
        let s = subset(&mask);
        let expected = common::hausdorff(&a, &b, d, s.indices());
        let got = rank_hausdorff(&bag("a", a.clone()), &bag("b", b.clone()), rank(d), &s).unwrap();
        prop_assert_eq!(got.to_bits(), expected.to_bits());
        let directed = directed_rank_hausdorff(&bag("a", a.clone()), &bag("b", b.clone()), rank(d), &s).unwrap();
        prop_assert_eq!(directed.to_bits(), common::directed(&a, &b, d, s.indices()).to_bits());
    }

    #[test]
    fn table_agrees_with_pairwise_distances((a, b, mask) in bag_pair(), d in 1usize..=6) {
        let s = subset(&mask);
        let bags = [bag("a", a), bag("b", b)];
        let table = NearestPointTable::new(&bags, &s).unwrap();
        let direct = rank_hausdorff(&bags[0], &bags[1], rank(d), &s).unwrap();
        prop_assert_eq!(table.hausdorff(0, 1, rank(d)).to_bits(), direct.to_bits());
        prop_assert_eq!(table.hausdorff(1, 0, rank(d)).to_bits(), direct.to_bits());
        prop_assert_eq!(table.hausdorff(0, 0, rank(d)), 0.0);
    }

    #[test]
    fn hausdorff_is_symmetric_and_nondecreasing_in_rank((a, b, mask) in bag_pair()) {
        let s = subset(&mask);
        let (a, b) = (bag("a", a), bag("b", b));
        let mut previous = 0.0;
        for d in 1..=7 {
            let ab = rank_hausdorff(&a, &b, rank(d), &s).unwrap();
            prop_assert_eq!(ab.to_bits(), rank_hausdorff(&b, &a, rank(d), &s).unwrap().to_bits());
            prop_assert!(ab >= previous);
            previous = ab;
        }
        let classic = rank_hausdorff(&a, &b, rank(a.len().max(b.len())), &s).unwrap();
        prop_assert_eq!(classic, previous);
    }

    #[test]
    fn features_outside_the_subset_are_ignored((a, b, mask) in bag_pair(), noise in -50.0f64..50.0, d in 1usize..=4) {
        let s = subset(&mask);
        let scramble = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().enumerate().map(|(k, &v)| if s.indices().contains(&k) { v } else { v + noise }).collect())
                .collect()
        };
        let before = rank_hausdorff(&bag("a", a.clone()), &bag("b", b.clone()), rank(d), &s).unwrap();
        let after = rank_hausdorff(&bag("a", scramble(&a)), &bag("b", b.clone()), rank(d), &s).unwrap();
        prop_assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn cnn_matches_brute_force(seed in any::<u64>(), t in 4usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = common::random_dataset(&mut rng, t, 3, 1);
        let test = common::random_bag(&mut rng, "q".into(), Label::Negative, 3, 1);
        for eta_r in 1..=3 {
            for eta_c in 1..=3 {
                for d in 1..=3 {
                    for theta in [0.2, 0.5, 0.8] {
                        let params = CnnParams { eta_r, eta_c, d: rank(d), theta, features: FeatureSubset::all(1) };
                        let got = cnn_classify(&train, &params, &test).unwrap();
                        let (label, c) = common::cnn(&train, &test, eta_r, eta_c, d, theta, &[0]);
                        prop_assert_eq!(got.label, label);
                        prop_assert_eq!([got.counts.ref_pos, got.counts.ref_neg, got.counts.cite_pos, got.counts.cite_neg], c);
                        prop_assert_eq!(c[0] + c[1], eta_r);
                    }
                }
            }
        }
    }

    #[test]
    fn raising_theta_never_turns_a_bag_positive(seed in any::<u64>(), lo in 0.01f64..0.99, hi in 0.01f64..0.99) {
        prop_assume!(lo <= hi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = common::random_dataset(&mut rng, 7, 3, 2);
        let test = common::random_bag(&mut rng, "q".into(), Label::Negative, 3, 2);
        let params = |theta| CnnParams { eta_r: 2, eta_c: 2, d: rank(1), theta, features: FeatureSubset::all(2) };
        let at_hi = cnn_classify(&train, &params(hi), &test).unwrap();
        let at_lo = cnn_classify(&train, &params(lo), &test).unwrap();
        if at_hi.label == Label::Positive {
            prop_assert_eq!(at_lo.label, Label::Positive);
        }
        prop_assert_eq!(at_hi.score, at_lo.score);
    }

    #[test]
    fn n_fold_equals_leave_one_out(seed in any::<u64>(), n in 5usize..=10, fold_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = common::random_dataset(&mut rng, n, 3, 2);
        let params = CnnParams { eta_r: 2, eta_c: 3, d: rank(2), theta: 0.5, features: FeatureSubset::all(2) };
        let loo = loo_validate(&data, &params).unwrap();
        let kfold = kfold_validate(&data, &params, n, fold_seed).unwrap();
        prop_assert_eq!(loo.predictions, kfold.predictions);
        prop_assert_eq!(loo.acc_pos, kfold.acc_pos);
        prop_assert_eq!(loo.acc_neg, kfold.acc_neg);
    }

    #[test]
    fn kfold_folds_partition_and_stratify(n_pos in 2usize..20, n_neg in 2usize..20, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(k <= n_pos + n_neg);
        let labels: Vec<Label> = (0..n_pos).map(|_| Label::Positive).chain((0..n_neg).map(|_| Label::Negative)).collect();
        let folds = validation::fold_plan(&labels, Scheme::KFold { k, seed }).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for fold in &folds {
            let pos = fold.iter().filter(|&&i| labels[i].is_positive()).count();
            prop_assert!(pos.abs_diff(n_pos / k) <= 1 || pos.abs_diff(n_pos.div_ceil(k)) <= 1);
        }
    }

    #[test]
    fn nondominated_sort_matches_brute_force(points in prop::collection::vec((0u8..6, 0u8..6), 0..50)) {
        let objectives: Vec<Objectives> =
            points.iter().map(|&(a, b)| Objectives::new(a as f64 / 5.0, b as f64 / 5.0)).collect();
        prop_assert_eq!(fast_nondominated_sort(&objectives), common::brute_force_fronts(&objectives));
    }

    #[test]
    fn normalization_is_idempotent_and_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = common::random_dataset(&mut rng, 5, 4, 3);
        let once = normalize_minmax(&raw);
        for b in once.bags() {
            for inst in b.instances() {
                prop_assert!(inst.features().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
        prop_assert_eq!(&normalize_minmax(&once), &once);
        let back = Dataset::from_json(&once.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, once);
    }

    #[test]
    fn genome_decoding_inverts_encoding(
        eta_r in 1usize..10, eta_c in 1usize..10, d in 1usize..6, theta in 0.05f64..0.95,
        mask in prop::collection::vec(any::<bool>(), 1..20),
    ) {
        let dim = mask.len();
        let features = subset(&mask);
        let params = CnnParams { eta_r, eta_c, d: rank(d), theta, features };
        let genome = CnnGenome::from_params(&params, dim);
        prop_assert_eq!(genome.to_params(10).unwrap(), params.clone());
        let json = serde_json::to_string(&params).unwrap();
        prop_assert_eq!(serde_json::from_str::<CnnParams>(&json).unwrap(), params);
    }

    #[test]
    fn crowding_marks_extremes(points in prop::collection::vec((0u8..10, 0u8..10), 3..20)) {
        let objectives: Vec<Objectives> =
            points.iter().map(|&(a, b)| Objectives::new(a as f64, b as f64)).collect();
        let c = crowding_distance(&objectives);
        prop_assert!(c.iter().all(|&v| v >= 0.0));
        prop_assert!(c.iter().filter(|v| v.is_infinite()).count() >= 2);
    }
}
