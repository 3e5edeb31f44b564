use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;

#[test]
fn mpca_examples() {
    let all = mean_per_class_accuracy(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
    assert_eq!(all.mpca, 1.0);

    // class 0: 10/10, class 1: 0/2 → 0.5, not 10/12
    let mut truths = vec![0; 10];
    truths.extend([1, 1]);
    let preds = vec![0; 12];
    let acc = mean_per_class_accuracy(&preds, &truths, 2).unwrap();
    assert_eq!(acc.mpca, 0.5);
    assert_eq!(acc.recalls, vec![1.0, 0.0]);

    let acc = mean_per_class_accuracy(&[0, 0, 1, 0, 1, 1], &[0, 0, 1, 1, 2, 2], 3).unwrap();
    assert_eq!(acc.recalls, vec![1.0, 0.5, 0.0]);
    assert_eq!(acc.mpca, 0.5);
}

#[test]
fn mpca_names_empty_class() {
    let err = mean_per_class_accuracy(&[0, 0], &[0, 2], 3).unwrap_err();
    assert!(matches!(err, Error::EmptyClass { class: 1 }));
}

#[test]
fn aggregate_examples() {
    let a = aggregate(&[0.6, 0.7, 0.8]).unwrap();
    assert!((a.mean - 0.7).abs() < 1e-12);
    assert!((a.std - 0.1).abs() < 1e-12);
    let one = aggregate(&[0.42]).unwrap();
    assert_eq!((one.mean, one.std), (0.42, 0.0));
    assert!(aggregate(&[]).is_err());
    let runs: Vec<RunSummary> = [0.8, 0.6, 0.7]
        .iter()
        .enumerate()
        .map(|(i, &m)| RunSummary {
            seed: i as u64,
            recalls: vec![m],
            mpca: m,
            fingerprint: fingerprint("x"),
        })
        .collect();
    let r = aggregate_runs(&runs).unwrap();
    assert!((r.mean - a.mean).abs() < 1e-12 && (r.std - a.std).abs() < 1e-12);
}

#[test]
fn fingerprint_is_fnv1a() {
    assert_eq!(fingerprint(""), 0xcbf2_9ce4_8422_2325);
    assert_eq!(fingerprint("a"), 0xaf63_dc4c_8601_ec8c);
}

// Lanczos approximation (g = 7, n = 9), independent of the library used
// by the implementation.
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Two-tailed p by trapezoidal integration of the t density over `[0, |t|]`.
fn p_by_quadrature(t: f64, df: f64) -> f64 {
    let norm = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    let f = |u: f64| norm * (1.0 + u * u / df).powf(-(df + 1.0) / 2.0);
    let n = 50_000;
    let h = t.abs() / n as f64;
    let mut area = 0.5 * (f(0.0) + f(t.abs()));
    for i in 1..n {
        area += f(i as f64 * h);
    }
    1.0 - 2.0 * area * h
}

#[test]
fn ttest_hand_example() {
    let r = students_ttest(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    // pooled variance 1, standard error √(2/3)
    let t_hand = -3.0 / (2.0f64 / 3.0).sqrt();
    assert!((r.t - t_hand).abs() < 1e-12);
    assert!((r.t + 3.6742).abs() < 1e-3);
    assert_eq!(r.df, 4.0);
    assert!((r.p - 0.0213).abs() < 1e-3, "{}", r.p);
    assert!((r.p - p_by_quadrature(r.t, 4.0)).abs() < 1e-6);
    assert!(r.significant);
}

#[test]
fn ttest_degenerate_cases() {
    let same = students_ttest(&[0.5, 0.7, 0.9], &[0.5, 0.7, 0.9]).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    let flat = students_ttest(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
    assert_eq!((flat.t, flat.p, flat.degenerate), (0.0, 1.0, false));
    let apart = students_ttest(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
    assert_eq!(apart.p, 0.0);
    assert!(apart.degenerate && apart.significant);
    assert!(students_ttest(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn ttest_swap_flips_sign_only() {
    let a = [0.61, 0.64, 0.59, 0.70];
    let b = [0.55, 0.58, 0.66];
    let (x, y) = (students_ttest(&a, &b).unwrap(), students_ttest(&b, &a).unwrap());
    assert_eq!(x.t, -y.t);
    assert_eq!(x.p, y.p);
}

#[test]
fn welch_matches_pooled_on_equal_designs() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let w = ttest(&a, &b, true).unwrap();
    let s = students_ttest(&a, &b).unwrap();
    assert!((w.t - s.t).abs() < 1e-12);
    assert!((w.df - 4.0).abs() < 1e-12);
    let w = ttest(&[1.0, 2.0, 3.0, 4.0], &[10.0, 30.0, 20.0], true).unwrap();
    assert!(w.df < 5.0 && w.df > 1.0);
}

#[test]
fn beta_p_matches_quadrature_on_grid() {
    for df in 1..=60 {
        for t in [0.1, 0.5, 1.0, 2.0, 3.5, 6.0, 10.0] {
            let (got, want) = (t_two_tailed_p(t, df as f64), p_by_quadrature(t, df as f64));
            assert!((got - want).abs() < 1e-6, "df={df} t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn p_decreases_with_abs_t() {
    for df in [1.0, 4.0, 33.0] {
        let ps: Vec<f64> = (0..=100).map(|i| t_two_tailed_p(i as f64 * 0.1, df)).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
        assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

fn five_strategies(runs: usize, rounds: usize) -> (Vec<String>, RoundAccuracies) {
    let names: Vec<String> = ["random", "certainty", "divdis", "iwerm", "emoc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut data = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        let per_round = (0..rounds)
            .map(|r| (0..runs).map(|i| 0.5 + 0.01 * (k * i + r) as f64 + 0.003 * i as f64).collect())
            .collect();
        data.insert(name.clone(), per_round);
    }
    (names, data)
}

#[test]
fn significance_has_ten_pairs_for_five_strategies() {
    let (names, data) = five_strategies(17, 4);
    let table = significance_matrix(&names, &data, false).unwrap();
    assert_eq!(table.pairs.len(), 10);
    assert_eq!(table.rounds, 4);
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], "pair,round_0,round_1,round_2,round_3");
    assert!(lines[1].starts_with("random - certainty,"));
}

#[test]
fn significance_self_and_order() {
    let (names, data) = five_strategies(3, 2);
    let twice = vec![names[2].clone(), names[2].clone()];
    let t = significance_matrix(&twice, &data, false).unwrap();
    assert!(t.results[0].iter().all(|r| r.p == 1.0));

    let fwd = significance_matrix(&names[..2], &data, false).unwrap();
    let rev: Vec<String> = names[..2].iter().rev().cloned().collect();
    let rev = significance_matrix(&rev, &data, false).unwrap();
    for (a, b) in fwd.results[0].iter().zip(&rev.results[0]) {
        assert_eq!(a.p, b.p);
    }
}

#[test]
fn significance_names_missing_cell() {
    let (names, mut data) = five_strategies(3, 2);
    data.get_mut("iwerm").unwrap().pop();
    let err = significance_matrix(&names, &data, false).unwrap_err();
    assert!(err.to_string().contains("iwerm") && err.to_string().contains("round 1"), "{err}");
    let err = significance_matrix(&["nope".to_string()], &data, false).unwrap_err();
    assert!(err.to_string().contains("nope"));
}

#[test]
fn default_grid_is_value_union() {
    let g = GridSpec::default();
    assert_eq!(g.lrs, vec![1e-3, 1e-4]);
    assert_eq!(g.l2s, vec![0.001, 0.01, 0.05, 0.1, 0.15]);
    assert_eq!(g.cells().len(), 10);
    for setup in [Setup::Butterfly, Setup::Plant] {
        for mode in TrainMode::ALL {
            let (lr, l2) = preset(setup, mode);
            assert!(g.lrs.contains(&lr) && g.l2s.contains(&l2));
        }
    }
}

#[test]
fn grid_single_cell_and_injected_argmax() {
    let one = GridSpec {
        lrs: vec![0.5],
        l2s: vec![0.0],
    };
    let r = grid_search(&one, |_, _| Ok(0.3)).unwrap();
    assert_eq!((r.best.lr, r.best.l2), (0.5, 0.0));

    let r = grid_search(&GridSpec::default(), |lr, l2| {
        Ok(if lr == 1e-4 && l2 == 0.1 { 0.9 } else { 0.2 })
    })
    .unwrap();
    assert_eq!((r.best.lr, r.best.l2), (1e-4, 0.1));
    assert_eq!(r.cells.len(), 10);
}

#[test]
fn grid_tie_break_prefers_small_l2_then_small_lr() {
    let r = grid_search(&GridSpec::default(), |_, l2| Ok(if l2 >= 0.01 { 0.8 } else { 0.1 })).unwrap();
    assert_eq!((r.best.lr, r.best.l2), (1e-4, 0.01));
}

#[test]
fn grid_failures_are_skipped_until_all_fail() {
    let r = grid_search(&GridSpec::default(), |lr, _| {
        if lr == 1e-3 {
            Err(Error::NonFinite("loss"))
        } else {
            Ok(0.5)
        }
    })
    .unwrap();
    assert_eq!(r.best.lr, 1e-4);
    assert_eq!(r.cells.iter().filter(|c| c.score.is_err()).count(), 5);
    let err = grid_search(&GridSpec::default(), |_, _| Err(Error::NonFinite("loss"))).unwrap_err();
    assert!(matches!(err, Error::AllCellsFailed(_)));
}

proptest! {
    #[test]
    fn mpca_invariant_under_relabeling(
        truths in proptest::collection::vec(0usize..4, 8..40),
        noise in proptest::collection::vec(0usize..4, 44),
        perm_seed in 0usize..24,
    ) {
        let mut truths = truths;
        truths.extend([0, 1, 2, 3]);
        let preds: Vec<usize> = truths.iter().zip(&noise).map(|(&t, &n)| if n == 0 { (t + 1) % 4 } else { t }).collect();
        let mut perm = vec![0, 1, 2, 3];
        let mut k = perm_seed;
        for i in (1..4).rev() {
            perm.swap(i, k % (i + 1));
            k /= i + 1;
        }
        let a = mean_per_class_accuracy(&preds, &truths, 4).unwrap().mpca;
        let pp: Vec<usize> = preds.iter().map(|&p| perm[p]).collect();
        let pt: Vec<usize> = truths.iter().map(|&t| perm[t]).collect();
        let b = mean_per_class_accuracy(&pp, &pt, 4).unwrap().mpca;
        prop_assert!((a - b).abs() < 1e-12);
        let wrong: Vec<usize> = truths.iter().map(|&t| (t + 1) % 4).collect();
        prop_assert_eq!(mean_per_class_accuracy(&wrong, &truths, 4).unwrap().mpca, 0.0);
        prop_assert_eq!(mean_per_class_accuracy(&truths, &truths, 4).unwrap().mpca, 1.0);
    }

    #[test]
    fn grid_result_independent_of_enumeration_order(
        scores in proptest::collection::vec(0u8..4, 10),
        rotate in 0usize..10,
    ) {
        let base = GridSpec::default();
        let table: Vec<((f64, f64), f64)> = base.cells().into_iter().zip(scores.iter().map(|&s| s as f64)).collect();
        let lookup = |lr: f64, l2: f64| -> Result<f64> {
            Ok(table.iter().find(|(c, _)| *c == (lr, l2)).unwrap().1)
        };
        let mut lrs = base.lrs.clone();
        lrs.reverse();
        let mut l2s = base.l2s.clone();
        let n = l2s.len();
        l2s.rotate_left(rotate % n);
        let shuffled = GridSpec { lrs, l2s };
        let a = grid_search(&base, lookup).unwrap().best;
        let b = grid_search(&shuffled, lookup).unwrap().best;
        prop_assert_eq!((a.lr, a.l2), (b.lr, b.l2));
    }

    #[test]
    fn aggregate_is_permutation_invariant(mut v in proptest::collection::vec(0.0f64..1.0, 1..10)) {
        let a = aggregate(&v).unwrap();
        v.reverse();
        let b = aggregate(&v).unwrap();
        prop_assert!((a.mean - b.mean).abs() < 1e-12 && (a.std - b.std).abs() < 1e-12);
    }
}
