use hsm_core::covband::{bandwidth, estimate_gl, estimate_log, estimate_mgl_with, SubdiagonalView, SymMatrix};
use hsm_core::harness::random_dag;
use hsm_core::hierarchy::{group_structure_gl, group_structure_log, path_decompose, Hierarchy, PathDecomposition, WeightRule};
use hsm_core::prox::{
    gl_path_scales, log_path_groups, prox_gl_path, prox_gl_tree, prox_log_path, prox_log_path_bcd,
    prox_log_path_with_latents, prox_mgl_path, soft_threshold, verify_log_optimality, BcdOptions, LogPathKnots,
    MglWeights,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cumulative(sizes: &[usize]) -> Vec<f64> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            *acc += s;
            Some((*acc as f64).sqrt())
        })
        .collect()
}

/// Node sizes with a vector of matching length.
fn path_instance(max_depth: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::vec(1usize..=4, 1..=max_depth).prop_flat_map(|sizes| {
        let p: usize = sizes.iter().sum();
        (Just(sizes), prop::collection::vec(-3.0f64..3.0, p))
    })
}

fn path_pair(max_depth: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>)> {
    prop::collection::vec(1usize..=4, 1..=max_depth).prop_flat_map(|sizes| {
        let p: usize = sizes.iter().sum();
        (Just(sizes), prop::collection::vec(-3.0f64..3.0, p), prop::collection::vec(-3.0f64..3.0, p))
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn symmetric(p: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, p * p).prop_map(move |v| {
        let rows: Vec<Vec<f64>> =
            (0..p).map(|i| (0..p).map(|j| if i >= j { v[i * p + j] } else { v[j * p + i] }).collect()).collect();
        SymMatrix::from_rows(&rows).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn soft_threshold_is_nonexpansive(a in prop::collection::vec(-5.0f64..5.0, 6), b in prop::collection::vec(-5.0f64..5.0, 6), mu in 0.0f64..3.0) {
        let (pa, pb) = (soft_threshold(&a, mu).unwrap(), soft_threshold(&b, mu).unwrap());
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-12);
    }

    #[test]
    fn log_path_prox_is_nonexpansive((sizes, a, b) in path_pair(12), lambda in 0.0f64..2.0) {
        let w = cumulative(&sizes);
        let pa = prox_log_path(&a, &sizes, lambda, &w).unwrap().beta;
        let pb = prox_log_path(&b, &sizes, lambda, &w).unwrap().beta;
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-10);
    }

    #[test]
    fn gl_path_prox_is_nonexpansive((sizes, a, b) in path_pair(12), lambda in 0.0f64..2.0) {
        let w: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
        let pa = prox_gl_path(&a, &sizes, lambda, &w).unwrap().beta;
        let pb = prox_gl_path(&b, &sizes, lambda, &w).unwrap().beta;
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-10);
    }

    #[test]
    fn log_path_passes_certificate((sizes, y) in path_instance(20), lambda in 0.0f64..2.0) {
        let w = cumulative(&sizes);
        let sol = prox_log_path_with_latents(&y, &sizes, lambda, &w).unwrap();
        let gs = log_path_groups(&sizes, &w).unwrap();
        let cert = verify_log_optimality(&y, &sol, &gs, lambda, 1e-9);
        prop_assert!(cert.ok, "violation {}", cert.worst_violation);
        prop_assert_eq!(sol.loop_count, sol.knots.len() + 1);
    }

    #[test]
    fn knot_averages_do_not_increase((sizes, y) in path_instance(25)) {
        let w = cumulative(&sizes);
        let mut start = 0;
        let z: Vec<f64> = sizes.iter().map(|&s| { start += s; y[start - s..start].iter().map(|v| v * v).sum() }).collect();
        let knots = LogPathKnots::compute(&z, &w).unwrap();
        for pair in knots.averages().windows(2) {
            prop_assert!(pair[0] >= pair[1] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn knots_shrink_to_a_prefix_as_lambda_grows((sizes, y) in path_instance(20), a in 0.0f64..1.5, b in 0.0f64..1.5) {
        let w = cumulative(&sizes);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k_lo = prox_log_path(&y, &sizes, lo, &w).unwrap().knots;
        let k_hi = prox_log_path(&y, &sizes, hi, &w).unwrap().knots;
        prop_assert!(k_lo.starts_with(&k_hi), "{:?} vs {:?}", k_lo, k_hi);
    }

    #[test]
    fn log_support_is_closed_under_ancestors((sizes, y) in path_instance(20), lambda in 0.0f64..1.5) {
        let w = cumulative(&sizes);
        let beta = prox_log_path(&y, &sizes, lambda, &w).unwrap().beta;
        let mut start = 0;
        let active: Vec<bool> = sizes.iter().map(|&s| { start += s; beta[start - s..start].iter().any(|&v| v != 0.0) }).collect();
        if let Some(last) = active.iter().rposition(|&a| a) {
            prop_assert!(active[..=last].iter().all(|&a| a));
        }
    }

    #[test]
    fn gl_path_matches_scales((sizes, y) in path_instance(15), lambda in 0.0f64..1.5) {
        let w: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
        let mut start = 0;
        let z: Vec<f64> = sizes.iter().map(|&s| { start += s; y[start - s..start].iter().map(|v| v * v).sum() }).collect();
        let (scales, _) = gl_path_scales(&z, lambda, &w);
        for pair in scales.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "scales must not grow with depth: {:?}", scales);
        }
    }

    #[test]
    fn uniform_mgl_is_gl((sizes, y) in path_instance(15), lambda in 0.0f64..1.5, c in prop::collection::vec(0.2f64..3.0, 15)) {
        let c = &c[..sizes.len()];
        let m = prox_mgl_path(&y, &sizes, lambda, &MglWeights::uniform(c).unwrap()).unwrap().beta;
        let g = prox_gl_path(&y, &sizes, lambda, c).unwrap().beta;
        prop_assert!(dist(&m, &g) <= 1e-8);
    }

    #[test]
    fn descendants_and_ancestors_are_inverse(seed in any::<u64>(), nodes in 1usize..12, prob in 0.0f64..0.6) {
        let h = random_dag(&mut ChaCha8Rng::seed_from_u64(seed), nodes, 3, prob);
        for i in 0..h.num_nodes() {
            let d = h.descendants(i).unwrap();
            prop_assert!(d.contains(&i));
            for j in 0..h.num_nodes() {
                prop_assert_eq!(d.contains(&j), h.ancestors(j).unwrap().contains(&i));
            }
        }
    }

    #[test]
    fn path_decomposition_is_an_exact_cover(seed in any::<u64>(), nodes in 1usize..15, prob in 0.0f64..0.6) {
        let h = random_dag(&mut ChaCha8Rng::seed_from_u64(seed), nodes, 3, prob);
        let pd = path_decompose(&h);
        let rebuilt = PathDecomposition::from_paths(&h, pd.paths().to_vec());
        prop_assert!(rebuilt.is_ok());
    }

    #[test]
    fn gl_zeros_propagate_to_descendants(seed in any::<u64>(), nodes in 1usize..10, lambda in 0.01f64..2.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = forest(&mut rng, nodes);
        let gs = group_structure_gl(&h, &WeightRule::SqrtSize).unwrap();
        // continuous data, so a node is zeroed only through its group
        let y: Vec<f64> = (0..h.p()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta = prox_gl_tree(&y, &h, lambda, &gs).unwrap().beta;
        for i in 0..h.num_nodes() {
            if h.node(i).iter().all(|&k| beta[k] == 0.0) {
                for d in h.descendants(i).unwrap() {
                    prop_assert!(h.node(d).iter().all(|&k| beta[k] == 0.0));
                }
            }
        }
    }

    #[test]
    fn log_support_on_dags_is_closed_under_ancestors(seed in any::<u64>(), nodes in 2usize..8, prob in 0.1f64..0.5, lambda in 0.05f64..1.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_dag(&mut rng, nodes, 2, prob);
        let gs = group_structure_log(&h, &WeightRule::SqrtSize).unwrap();
        let y: Vec<f64> = (0..h.p()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta = prox_log_path_bcd(&y, &h, &path_decompose(&h), lambda, &gs.weights(), BcdOptions::with_tol(1e-12)).unwrap().beta;
        let active = |i: usize| h.node(i).iter().any(|&k| beta[k] != 0.0);
        for i in (0..h.num_nodes()).filter(|&i| active(i)) {
            for a in h.ancestors(i).unwrap() {
                prop_assert!(active(a), "node {} active but ancestor {} is not", i, a);
            }
        }
    }
}

fn forest(rng: &mut ChaCha8Rng, nodes: usize) -> Hierarchy {
    use rand::Rng;
    let sizes: Vec<usize> = (0..nodes).map(|_| rng.random_range(1..=3)).collect();
    let mut start = 0;
    let groups: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&s| {
            start += s;
            (start - s..start).collect()
        })
        .collect();
    let mut edges = Vec::new();
    for j in 1..nodes {
        if rng.random_bool(0.7) {
            edges.push((rng.random_range(0..j), j));
        }
    }
    Hierarchy::new(start, groups, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_bandwidth_never_grows_with_lambda(s in (2usize..9).prop_flat_map(symmetric), a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k_lo = estimate_log(&s, lo).unwrap().bandwidth;
        let k_hi = estimate_log(&s, hi).unwrap().bandwidth;
        prop_assert!(k_hi <= k_lo);
    }

    #[test]
    fn estimators_equal_the_vector_prox(s in (2usize..9).prop_flat_map(symmetric), lambda in 0.0f64..1.5) {
        let p = s.order();
        let view = SubdiagonalView::new(p);
        let y = view.gather(&s);
        let diag: Vec<f64> = (0..p).map(|i| s.get(i, i)).collect();
        let sizes = view.sizes();

        let log = prox_log_path(&y, &sizes, lambda, &view.cumulative_weights()).unwrap().beta;
        let expect = view.scatter(&diag, &log).unwrap();
        let got = estimate_log(&s, lambda).unwrap().sigma_hat;
        prop_assert!(got.frobenius_distance(&expect).unwrap() <= 1e-10);

        let gl = prox_gl_path(&y, &sizes, lambda, &view.node_weights()).unwrap().beta;
        let expect = view.scatter(&diag, &gl).unwrap();
        let got = estimate_gl(&s, lambda).unwrap().sigma_hat;
        prop_assert!(got.frobenius_distance(&expect).unwrap() <= 1e-10);

        let uniform = MglWeights::uniform(&view.node_weights()).unwrap();
        let got = estimate_mgl_with(&s, lambda, &uniform).unwrap().sigma_hat;
        prop_assert!(got.frobenius_distance(&expect).unwrap() <= 1e-8);
    }

    #[test]
    fn estimates_stay_symmetric_and_keep_the_diagonal(s in (2usize..9).prop_flat_map(symmetric), lambda in 0.0f64..1.5) {
        for est in [estimate_log(&s, lambda).unwrap(), estimate_gl(&s, lambda).unwrap()] {
            let m = est.sigma_hat.as_matrix();
            prop_assert_eq!(m, &m.transpose());
            for i in 0..s.order() {
                prop_assert_eq!(m[(i, i)], s.get(i, i));
            }
            prop_assert_eq!(est.bandwidth, bandwidth(&est.sigma_hat));
        }
    }
}
