mod common;

use std::collections::BTreeMap;

use common::*;
use jointgibbs::data::{infer_variable_meta, md_pattern, Column, Dataset, VariableMeta};
use jointgibbs::graph::GraphOptions;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn dataset(n: usize, miss: &[Vec<bool>]) -> Dataset {
    let names = ["a", "b", "c", "d"];
    let cols = miss
        .iter()
        .enumerate()
        .map(|(j, m)| Column::numeric(names[j], (0..n).map(|i| (!m[i]).then_some((i * (j + 3)) as f64 * 0.37)).collect()))
        .collect();
    Dataset::new(cols).unwrap()
}

fn same_meta(a: &VariableMeta, b: &VariableMeta) -> bool {
    let sorted = |v: &[String]| {
        let mut v = v.to_vec();
        v.sort();
        v
    };
    let scale_close = match (&a.scale, &b.scale) {
        (Some(x), Some(y)) => (x.mean - y.mean).abs() < 1e-9 && (x.sd - y.sd).abs() < 1e-9,
        (x, y) => x.is_none() && y.is_none(),
    };
    a.name == b.name
        && a.vtype == b.vtype
        && a.level == b.level
        && a.n_missing == b.n_missing
        && sorted(&a.levels) == sorted(&b.levels)
        && scale_close
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn md_pattern_counts(n in 1usize..60, k in 1usize..5, seed in 0u64..1000) {
        let mut r = rng(seed);
        let miss: Vec<Vec<bool>> = (0..k).map(|_| (0..n).map(|_| r.random::<f64>() < 0.3).collect()).collect();
        let ds = dataset(n, &miss);
        let p = md_pattern(&ds, None);
        prop_assert_eq!(p.counts.iter().sum::<usize>(), n);
        for (j, want) in p.missing_per_variable.iter().enumerate() {
            let got: usize = p.patterns.iter().zip(&p.counts).map(|(row, c)| usize::from(1 - row[j]) * c).sum();
            prop_assert_eq!(got, *want);
        }
    }

    #[test]
    fn shuffling_within_groups_keeps_meta(seed in 0u64..1000, groups in 3usize..12, per in 2usize..6) {
        let mut r = rng(seed);
        let n = groups * per;
        let id: Vec<String> = (0..n).map(|i| format!("g{}", i / per)).collect();
        let l2: Vec<Option<f64>> = (0..n).map(|i| ((i / per) % 4 != 1).then_some((i / per) as f64 * 1.5)).collect();
        let cats = ["p", "q", "r"];
        let l2c: Vec<Option<String>> = (0..n).map(|i| Some(cats[(i / per) % 3].to_string())).collect();
        let l1: Vec<Option<f64>> = (0..n).map(|_| (r.random::<f64>() > 0.2).then(|| normal(&mut r))).collect();
        let l1c: Vec<Option<String>> = (0..n).map(|_| (r.random::<f64>() > 0.1).then(|| cats[r.random_range(0..3)].to_string())).collect();
        let build = |order: &[usize]| {
            let pick_s = |v: &[String]| order.iter().map(|&i| Some(v[i].clone())).collect::<Vec<_>>();
            Dataset::new(vec![
                Column::categorical("id", &pick_s(&id)),
                Column::numeric("l2", order.iter().map(|&i| l2[i]).collect()),
                Column::categorical("l2c", &order.iter().map(|&i| l2c[i].clone()).collect::<Vec<_>>()),
                Column::numeric("l1", order.iter().map(|&i| l1[i]).collect()),
                Column::categorical("l1c", &order.iter().map(|&i| l1c[i].clone()).collect::<Vec<_>>()),
            ])
            .unwrap()
        };
        let base: Vec<usize> = (0..n).collect();
        let mut shuffled = Vec::with_capacity(n);
        for g in 0..groups {
            let mut rows: Vec<usize> = (g * per..(g + 1) * per).collect();
            rows.shuffle(&mut r);
            shuffled.extend(rows);
        }
        let a = infer_variable_meta(&build(&base), Some("id"), &BTreeMap::new(), None).unwrap();
        let b = infer_variable_meta(&build(&shuffled), Some("id"), &BTreeMap::new(), None).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(same_meta(x, y), "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn covariate_models_are_triangular(miss in prop::collection::vec(0usize..20, 4), seed in 0u64..100) {
        let n = 60;
        let mut r = rng(seed);
        let names = ["x1", "x2", "x3", "x4"];
        let mut cols = vec![numeric("y", &(0..n).map(|_| normal(&mut r)).collect::<Vec<_>>())];
        for (j, &m) in miss.iter().enumerate() {
            let v: Vec<f64> = (0..n).map(|i| if (i * 7 + j * 13) % n < m { f64::NAN } else { normal(&mut r) }).collect();
            cols.push(numeric(names[j], &v));
        }
        let ds = Dataset::new(cols).unwrap();
        let g = graph("y ~ x1 + x2 + x3 + x4", &ds, &GraphOptions::default());
        // each model conditions only on complete variables and on
        // variables modelled after it
        let incomplete = g.incomplete();
        let order: Vec<String> = g.covariate_models().map(|s| s.name().to_string()).collect();
        for (i, sm) in g.covariate_models().enumerate() {
            for v in sm.predictor_variables() {
                let later = order.iter().position(|o| *o == v).is_some_and(|j| j > i);
                prop_assert!(!incomplete.contains(&v) || later, "{} uses {}", sm.name(), v);
            }
        }
        let expected: usize = miss.iter().filter(|&&m| m > 0).count();
        prop_assert_eq!(g.covariate_models().count(), expected);
    }
}
