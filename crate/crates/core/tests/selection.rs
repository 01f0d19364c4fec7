use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sensaudit_core::selection::{binary_cube_indices, PermutationOptions, SelectionOptions};
use sensaudit_core::{
    group_permutation_importance, ti_variable_selection, Criterion, Error, SelectionMode,
    SelectionProblem,
};

/// Walsh decomposition of `f` on `{0,1}^p` under the uniform measure:
/// `S_i = c_{i}^2 / V`, `T_i = sum_{u contains i} c_u^2 / V`.
fn walsh_oracle(values: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let corners = 1usize << p;
    let coef: Vec<f64> = (0..corners)
        .map(|u| {
            values
                .iter()
                .enumerate()
                .map(|(m, v)| {
                    if (u & m).count_ones() % 2 == 0 {
                        *v
                    } else {
                        -*v
                    }
                })
                .sum::<f64>()
                / corners as f64
        })
        .collect();
    let var: f64 = coef[1..].iter().map(|c| c * c).sum();
    let s = (0..p).map(|i| coef[1 << i].powi(2) / var).collect();
    let t = (0..p)
        .map(|i| {
            (1..corners)
                .filter(|u| u >> i & 1 == 1)
                .map(|u| coef[u].powi(2))
                .sum::<f64>()
                / var
        })
        .collect();
    (s, t)
}

/// BIC of an intercept-plus-`cols` fit via normal equations and Gauss-Jordan.
fn oracle_bic(x: &DMatrix<f64>, y: &[f64], cols: &[usize]) -> f64 {
    let n = y.len();
    let d = cols.len() + 1;
    let design = |r: usize, j: usize| if j == 0 { 1.0 } else { x[(r, cols[j - 1])] };
    let mut a = vec![vec![0.0; d + 1]; d];
    for (i, row) in a.iter_mut().enumerate() {
        for j in 0..d {
            row[j] = (0..n).map(|r| design(r, i) * design(r, j)).sum();
        }
        row[d] = (0..n).map(|r| design(r, i) * y[r]).sum();
    }
    for c in 0..d {
        let piv = (c..d)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let lead = a[c][c];
        for v in a[c].iter_mut() {
            *v /= lead;
        }
        for r in 0..d {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let rss: f64 = (0..n)
        .map(|r| {
            let fit: f64 = (0..d).map(|j| a[j][d] * design(r, j)).sum();
            (y[r] - fit).powi(2)
        })
        .sum();
    n as f64 * (rss / n as f64).ln() + d as f64 * (n as f64).ln()
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Standard-normal regressors and `y = sum beta_j x_j + sd * eps`.
fn planted(n: usize, beta: &[f64], sd: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = beta.len();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|r| {
            (0..p).map(|j| beta[j] * x[(r, j)]).sum::<f64>()
                + sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (x, y)
}

fn bic_corners(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let p = x.ncols();
    (0..1usize << p)
        .map(|m| {
            oracle_bic(
                x,
                y,
                &(0..p).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>(),
            )
        })
        .collect()
}

#[test]
fn planted_dgp_selects_true_regressors() {
    let (x, y) = planted(200, &[2.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.5, 11);
    let problem = SelectionProblem::new(names(6), x.clone(), y.clone(), Criterion::Bic).unwrap();
    let res = ti_variable_selection(&problem, &SelectionOptions::default()).unwrap();

    let (_, t_oracle) = walsh_oracle(&bic_corners(&x, &y), 6);
    for (c, t) in res.candidates.iter().zip(&t_oracle) {
        assert!((c.total - t).abs() < 1e-9, "{}: {} vs {t}", c.name, c.total);
    }
    assert!(res.selected.contains(&"x1".to_string()) && res.selected.contains(&"x3".to_string()));
    let t = res.total();
    let noise = [t[1], t[3], t[4], t[5]].into_iter().fold(0.0, f64::max);
    assert!(t[0] > 2.0 * noise && t[2] > 2.0 * noise, "{t:?}");
    assert_eq!(res.evaluations, 64);
    assert_eq!(res.threshold, 1.0 / 6.0);
}

#[test]
fn noiseless_response_selects_only_its_regressor() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(50, 3, |_, _| rng.random::<f64>());
    let y: Vec<f64> = (0..50).map(|r| x[(r, 1)]).collect();
    let res = ti_variable_selection(
        &SelectionProblem::new(names(3), x, y, Criterion::Bic).unwrap(),
        &SelectionOptions::default(),
    )
    .unwrap();
    assert_eq!(res.selected, vec!["x2"]);
    let t = res.total();
    assert!(t[1] > 0.99, "{t:?}");
    assert!(t[0] < 0.01 && t[2] < 0.01, "{t:?}");
}

#[test]
fn single_candidate_has_unit_total_effect() {
    for criterion in [
        Criterion::Bic,
        Criterion::Aic,
        Criterion::AdjustedR2,
        Criterion::CvMse,
    ] {
        let (x, y) = planted(40, &[0.3], 1.0, 5);
        let res = ti_variable_selection(
            &SelectionProblem::new(names(1), x, y, criterion).unwrap(),
            &SelectionOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(res.candidates[0].total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.candidates[0].first_order, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn exhaustive_indices_match_walsh_oracle_for_small_p() {
    for p in 1..=4 {
        for seed in 0..5u64 {
            let beta: Vec<f64> = (0..p).map(|j| [1.0, 0.0, 0.4, 0.1][j]).collect();
            let (x, y) = planted(60, &beta, 1.0, 100 * p as u64 + seed);
            let res = ti_variable_selection(
                &SelectionProblem::new(names(p), x.clone(), y.clone(), Criterion::Bic).unwrap(),
                &SelectionOptions::default(),
            )
            .unwrap();
            let (s, t) = walsh_oracle(&bic_corners(&x, &y), p);
            for i in 0..p {
                assert!(
                    (res.candidates[i].total - t[i]).abs() <= 1e-10,
                    "p={p} seed={seed}"
                );
                assert!(
                    (res.candidates[i].first_order - s[i]).abs() <= 1e-10,
                    "p={p} seed={seed}"
                );
            }
        }
    }
}

#[test]
fn relabeling_candidates_permutes_indices() {
    let (x, y) = planted(80, &[1.0, 0.0, 0.5, 0.2], 1.0, 9);
    let order = [2, 0, 3, 1];
    let xp = DMatrix::from_fn(80, 4, |r, j| x[(r, order[j])]);
    let np: Vec<String> = order.iter().map(|&j| format!("x{}", j + 1)).collect();
    let a = ti_variable_selection(
        &SelectionProblem::new(names(4), x, y.clone(), Criterion::Bic).unwrap(),
        &SelectionOptions::default(),
    )
    .unwrap();
    let b = ti_variable_selection(
        &SelectionProblem::new(np, xp, y, Criterion::Bic).unwrap(),
        &SelectionOptions::default(),
    )
    .unwrap();
    for (j, &src) in order.iter().enumerate() {
        assert_eq!(b.candidates[j].name, a.candidates[src].name);
        assert!((b.candidates[j].total - a.candidates[src].total).abs() < 1e-12);
        assert_eq!(b.candidates[j].selected, a.candidates[src].selected);
    }
}

#[test]
fn rescaling_the_response_shifts_bic_and_keeps_indices() {
    // BIC picks up an additive 2n ln(c) when y is scaled by c.
    let (x, y) = planted(100, &[1.0, 0.2, 0.0], 1.0, 21);
    let scaled: Vec<f64> = y.iter().map(|v| 3.0 * v - 7.0).collect();
    let run = |y: Vec<f64>| {
        ti_variable_selection(
            &SelectionProblem::new(names(3), x.clone(), y, Criterion::Bic).unwrap(),
            &SelectionOptions::default(),
        )
        .unwrap()
        .total()
    };
    for (a, b) in run(y).iter().zip(run(scaled)) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn cube_indices_are_affine_invariant(
        values in prop::collection::vec(-10.0..10.0f64, 8),
        scale in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64],
        shift in -100.0..100.0f64,
    ) {
        let var = {
            let m = values.iter().sum::<f64>() / 8.0;
            values.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        prop_assume!(var > 1e-6);
        let (s, t) = binary_cube_indices(&values, 3).unwrap();
        let moved: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
        let (s2, t2) = binary_cube_indices(&moved, 3).unwrap();
        let (so, to) = walsh_oracle(&values, 3);
        for i in 0..3 {
            prop_assert!((s[i] - s2[i]).abs() < 1e-9 && (t[i] - t2[i]).abs() < 1e-9);
            prop_assert!((s[i] - so[i]).abs() < 1e-9 && (t[i] - to[i]).abs() < 1e-9);
            prop_assert!(t[i] >= s[i] - 1e-12 && t[i] <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn sampled_mode_agrees_with_exhaustive() {
    let (x, y) = planted(200, &[2.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.5, 11);
    let problem = SelectionProblem::new(names(6), x, y, Criterion::Bic).unwrap();
    let exact = ti_variable_selection(&problem, &SelectionOptions::default()).unwrap();
    let opts = SelectionOptions {
        mode: SelectionMode::Sampled,
        n_base: 1024,
        seed: 4,
        threshold: None,
    };
    let sampled = ti_variable_selection(&problem, &opts).unwrap();
    assert_eq!(sampled.selected, exact.selected);
    for (a, b) in sampled.total().iter().zip(exact.total()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
    assert!(sampled.evaluations <= 64);
    assert_eq!((sampled.n_base, sampled.seed), (Some(1024), Some(4)));
    assert_eq!(ti_variable_selection(&problem, &opts).unwrap(), sampled);
}

#[test]
fn collinear_subsets_take_the_sentinel() {
    let (mut x, y) = planted(50, &[1.0, 0.0, 0.5], 1.0, 2);
    for r in 0..50 {
        x[(r, 1)] = 2.0 * x[(r, 0)];
    }
    let res = ti_variable_selection(
        &SelectionProblem::new(names(3), x, y, Criterion::Bic).unwrap(),
        &SelectionOptions::default(),
    )
    .unwrap();
    // Every subset holding both x1 and x2 is rank deficient.
    assert_eq!(res.singular_subsets, 2);
    assert!(res.sentinel.is_some());
}

#[test]
fn construction_rejects_bad_problems() {
    let (x, y) = planted(10, &[1.0, 1.0], 1.0, 1);
    assert!(SelectionProblem::new(names(3), x.clone(), y.clone(), Criterion::Bic).is_err());
    assert!(SelectionProblem::new(names(2), x.clone(), y[..9].to_vec(), Criterion::Bic).is_err());
    assert!(matches!(
        SelectionProblem::new(names(2), x.clone(), vec![1.0; 10], Criterion::Bic),
        Err(Error::DegenerateOutput(_))
    ));
    // n = p + 1 is too small to enumerate every subset.
    let (x3, y3) = planted(3, &[1.0, 1.0], 1.0, 1);
    let small = SelectionProblem::new(names(2), x3, y3, Criterion::Bic).unwrap();
    assert!(ti_variable_selection(&small, &SelectionOptions::default()).is_err());
}

#[test]
fn problem_loads_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = planted(30, &[1.0, 0.0], 0.5, 8);
    let mut joint = String::from("a,b,y\n");
    let mut xs = String::from("a,b\n");
    let mut ys = String::from("y\n");
    for r in 0..30 {
        joint += &format!("{},{},{}\n", x[(r, 0)], x[(r, 1)], y[r]);
        xs += &format!("{},{}\n", x[(r, 0)], x[(r, 1)]);
        ys += &format!("{}\n", y[r]);
    }
    std::fs::write(dir.path().join("joint.csv"), joint).unwrap();
    std::fs::write(dir.path().join("x.csv"), xs).unwrap();
    std::fs::write(dir.path().join("y.csv"), ys).unwrap();

    let a =
        SelectionProblem::from_csv(&dir.path().join("joint.csv"), None, Criterion::Aic).unwrap();
    let b = SelectionProblem::from_csv(
        &dir.path().join("x.csv"),
        Some(&dir.path().join("y.csv")),
        Criterion::Aic,
    )
    .unwrap();
    assert_eq!(a.names(), &["a".to_string(), "b".to_string()]);
    assert_eq!(a.x(), b.x());
    assert_eq!(a.y(), b.y());
    assert_eq!(a.n_obs(), 30);
    // Without a y file the last column must be named y.
    assert!(SelectionProblem::from_csv(&dir.path().join("x.csv"), None, Criterion::Aic).is_err());
}

fn uniform_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn predictor_using_one_column() {
    let x = uniform_matrix(500, 3, 1);
    let y: Vec<f64> = x.column(0).iter().copied().collect();
    let predictor = |m: &DMatrix<f64>| m.column(0).iter().copied().collect::<Vec<f64>>();
    let res = group_permutation_importance(
        &predictor,
        &names(3),
        &x,
        &y,
        &PermutationOptions::default(),
    )
    .unwrap();
    assert_eq!(res.baseline_loss, 0.0);
    assert_abs_diff_eq!(res.features[0].total, 1.0, epsilon = 1e-12);
    assert_eq!((res.features[1].total, res.features[2].total), (0.0, 0.0));
    assert_eq!(res.features[0].oat_share, 1.0);
}

#[test]
fn product_predictor_shows_positive_contrast() {
    // Corner losses tend to 0, 2/9, 2/9, 2/9: S = 1/3, T = 2/3, OAT share 1/2.
    let x = uniform_matrix(40_000, 2, 7);
    let f = |m: &DMatrix<f64>| {
        (0..m.nrows())
            .map(|r| m[(r, 0)] * m[(r, 1)])
            .collect::<Vec<f64>>()
    };
    let y = f(&x);
    let res = group_permutation_importance(&f, &names(2), &x, &y, &PermutationOptions::default())
        .unwrap();
    let corners = [0.0, 2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0];
    let (s_oracle, t_oracle) = walsh_oracle(&corners, 2);
    for (feat, (s, t)) in res.features.iter().zip(s_oracle.iter().zip(&t_oracle)) {
        assert!((feat.total - t).abs() < 0.03, "{feat:?}");
        assert!((feat.first_order - s).abs() < 0.03, "{feat:?}");
        assert!((feat.oat - 2.0 / 9.0).abs() < 0.01, "{feat:?}");
        assert!(feat.contrast > 0.1, "{feat:?}");
    }
}

#[test]
fn intact_data_minimises_loss_across_seeds() {
    let mut minimal = 0;
    for seed in 0..100u64 {
        let x = uniform_matrix(200, 3, 1000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = |m: &DMatrix<f64>| {
            (0..m.nrows())
                .map(|r| m[(r, 0)] + 0.5 * m[(r, 1)] + 0.25 * m[(r, 2)])
                .collect::<Vec<f64>>()
        };
        let y: Vec<f64> = f(&x)
            .iter()
            .map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let opts = PermutationOptions {
            seed,
            ..Default::default()
        };
        let res = group_permutation_importance(&f, &names(3), &x, &y, &opts).unwrap();
        if res.features.iter().all(|feat| feat.oat > 0.0) {
            minimal += 1;
        }
    }
    assert!(minimal >= 95, "{minimal}/100");
}

#[test]
fn sampled_permutation_importance() {
    let x = uniform_matrix(2000, 3, 3);
    let f = |m: &DMatrix<f64>| {
        (0..m.nrows())
            .map(|r| m[(r, 0)] * m[(r, 1)])
            .collect::<Vec<f64>>()
    };
    let y = f(&x);
    let exact = group_permutation_importance(&f, &names(3), &x, &y, &PermutationOptions::default())
        .unwrap();
    let opts = PermutationOptions {
        mode: SelectionMode::Sampled,
        n_base: 512,
        seed: 0,
    };
    let sampled = group_permutation_importance(&f, &names(3), &x, &y, &opts).unwrap();
    for (a, b) in sampled.total().iter().zip(exact.total()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
    let small = PermutationOptions { n_base: 32, ..opts };
    assert!(group_permutation_importance(&f, &names(3), &x, &y, &small).is_err());
}
