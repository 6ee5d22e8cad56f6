//! Property tests for the structural invariants: split preservation, count
//! partitioning, threshold feasibility, ratio symmetry, the decomposition
//! identity, CSV round-trips, and flip-log reversal.

use proptest::prelude::*;

use biasforge::data::{parse_csv, render_csv, Column, Group, TabularDataset};
use biasforge::eval::{
    decompose_fpr_ratio, fairness_ratios, group_confusion, threshold_at_global_fpr, GroupConfusion,
};
use biasforge::inject::{flip_negatives_to_positives, flip_positives_to_negatives_equalize};

fn dataset_strategy(max_rows: usize) -> impl Strategy<Value = TabularDataset> {
    (2..max_rows)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(-1e3f64..1e3, n),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(0u64..5, n),
            )
        })
        .prop_map(|(labels, reals, groups, gaps)| {
            let n = labels.len();
            let mut t = Vec::with_capacity(n);
            let mut acc = 0u64;
            for g in gaps {
                acc += g;
                t.push(acc);
            }
            TabularDataset::new(
                vec!["t".into(), "x".into(), "y".into(), "z".into()],
                vec![
                    Column::Time(t),
                    Column::Real(reals),
                    Column::Binary(labels.into_iter().map(u8::from).collect()),
                    Column::Group(
                        groups
                            .into_iter()
                            .map(|a| if a { Group::A } else { Group::B })
                            .collect(),
                    ),
                ],
                "y",
                Some("z"),
                "t",
            )
            .unwrap()
        })
}

fn confusion_strategy(g: Group) -> impl Strategy<Value = GroupConfusion> {
    (1u64..400, 1u64..400, 1u64..400, 1u64..400).prop_map(move |(tp, fp, tn, fneg)| {
        GroupConfusion {
            group: g,
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fneg,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn split_preserves_rows(ds in dataset_strategy(120), frac in 0.05f64..0.95) {
        match ds.temporal_split(frac) {
            Ok((train, test)) => {
                prop_assert_eq!(train.concat(&test).unwrap(), ds);
            }
            Err(_) => {
                // only legal when a side would be empty
                let k = (frac * ds.n_rows() as f64).ceil() as usize;
                prop_assert!(k == 0 || k >= ds.n_rows());
            }
        }
    }

    #[test]
    fn group_fractions_partition(ds in dataset_strategy(120)) {
        let fa = ds.group_fraction(Group::A).unwrap();
        let fb = ds.group_fraction(Group::B).unwrap();
        prop_assert_eq!(fa + fb, 1.0);
        if let (Ok(pa), Ok(pb)) = (ds.prevalence(Some(Group::A)), ds.prevalence(Some(Group::B))) {
            let p = ds.prevalence(None).unwrap();
            prop_assert!((fa * pa + fb * pb - p).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_identity(ds in dataset_strategy(80)) {
        let text = render_csv(&ds);
        let schema = ds.schema();
        let back = parse_csv(&text, &schema, "prop").unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(render_csv(&back), text);
    }

    #[test]
    fn threshold_feasible_and_maximal(
        scores in proptest::collection::vec(0u8..20, 4..120),
        labels in proptest::collection::vec(any::<bool>(), 4..120),
        target in 0.02f64..0.98,
    ) {
        let n = scores.len().min(labels.len());
        let scores: Vec<f64> = scores[..n].iter().map(|&s| f64::from(s) / 20.0).collect();
        let labels: Vec<u8> = labels[..n].iter().map(|&b| u8::from(b)).collect();
        prop_assume!(labels.iter().any(|&y| y == 0));
        let t = threshold_at_global_fpr(&scores, &labels, target).unwrap();
        let negs: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &y)| y == 0).map(|(&s, _)| s).collect();
        let fpr_at = |thr: f64| negs.iter().filter(|&&s| s > thr).count() as f64 / negs.len() as f64;
        let achieved = fpr_at(t);
        prop_assert!(achieved <= target);
        // achieved FPR is maximal among all real thresholds not above target:
        // any strictly smaller candidate threshold overshoots
        let mut all: Vec<f64> = scores.clone();
        all.push(t - 1.0);
        for cand in all {
            if cand < t {
                prop_assert!(fpr_at(cand) > target || fpr_at(cand) <= achieved);
            }
        }
        // feasibility margin: target - achieved < (1 + max tie block)/n_neg
        let mut sorted = negs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut max_block = 1usize;
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j] == sorted[i] { j += 1; }
            max_block = max_block.max(j - i);
            i = j;
        }
        prop_assert!(target - achieved < (1.0 + max_block as f64) / negs.len() as f64);
    }

    #[test]
    fn ratio_swap_negates(a in confusion_strategy(Group::A), b in confusion_strategy(Group::B)) {
        let r1 = fairness_ratios(&a, &b);
        let r2 = fairness_ratios(&b, &a);
        prop_assert_eq!(r1.log2_fpr_ratio.unwrap(), -r2.log2_fpr_ratio.unwrap());
        prop_assert_eq!(r1.log2_fnr_ratio.unwrap(), -r2.log2_fnr_ratio.unwrap());
        prop_assert_eq!(r1.log2_ppv_ratio.unwrap(), -r2.log2_ppv_ratio.unwrap());
    }

    #[test]
    fn decomposition_identity(a in confusion_strategy(Group::A), b in confusion_strategy(Group::B)) {
        let d = decompose_fpr_ratio(&a, &b).unwrap();
        prop_assert!(d.residual <= 1e-9, "residual {}", d.residual);
    }

    #[test]
    fn group_confusions_partition_global(
        ds in dataset_strategy(120),
        threshold in 0.0f64..1.0,
    ) {
        let n = ds.n_rows();
        let scores: Vec<f64> = (0..n).map(|i| (i % 17) as f64 / 17.0).collect();
        prop_assume!(ds.groups().unwrap().contains(&Group::A));
        prop_assume!(ds.groups().unwrap().contains(&Group::B));
        let (a, b) = group_confusion(&scores, ds.labels(), ds.groups().unwrap(), threshold).unwrap();
        let global_pos: u64 = ds.labels().iter().map(|&y| u64::from(y)).sum();
        prop_assert_eq!(a.positives() + b.positives(), global_pos);
        prop_assert_eq!(a.total() + b.total(), n as u64);
        let predicted: u64 = scores.iter().filter(|&&s| s > threshold).count() as u64;
        prop_assert_eq!(a.true_pos + a.false_pos + b.true_pos + b.false_pos, predicted);
    }

    #[test]
    fn flip_logs_revert_exactly(ds in dataset_strategy(150), c in 1.0f64..3.0) {
        prop_assume!(ds.groups().unwrap().contains(&Group::A));
        prop_assume!(ds.groups().unwrap().contains(&Group::B));
        if let Ok((flipped, log)) = flip_negatives_to_positives(&ds, Group::A, c, 9) {
            prop_assert_eq!(log.revert(&flipped).unwrap(), ds.clone());
        }
        if let Ok((flipped, log)) = flip_positives_to_negatives_equalize(&ds, 9) {
            prop_assert_eq!(log.revert(&flipped).unwrap(), ds);
        }
    }
}
