use proptest::prelude::*;
use wellsvm_core::kernel::{self, InstanceKernel};
use wellsvm_core::labelgen::{self, PairwiseForm, ViolationProblem};
use wellsvm_core::learner::{cutting_plane, initialize_ssl, NoClock, Problem};
use wellsvm_core::metrics::{clustering_accuracy, roi_success_rates};
use wellsvm_core::mlkl::{self, LabelKernel, MlklOptions};
use wellsvm_core::oracle::{self, FeasibleSpec};
use wellsvm_core::svm_dual::{self, QpOptions};
use wellsvm_core::*;

fn psd(n: usize, rank: usize, entries: &[f64]) -> GramMatrix {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = (0..rank).map(|k| entries[i * rank + k] * entries[j * rank + k]).sum();
        }
    }
    GramMatrix::from_row_major(n, v).unwrap()
}

fn psd_qp() -> impl Strategy<Value = (GramMatrix, Vec<f64>)> {
    (1usize..=30, 1usize..=6).prop_flat_map(|(n, rank)| {
        (
            prop::collection::vec(-2.0f64..2.0, n * rank),
            prop::collection::vec(0.01f64..5.0, n),
        )
            .prop_map(move |(e, c)| (psd(n, rank, &e), c))
    })
}

fn labels(n: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1 } else { -1 }), n)
}

fn points(n: usize) -> impl Strategy<Value = Vec<SparseVector>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), n)
        .prop_map(|rows| rows.iter().map(|r| SparseVector::from_dense(r).unwrap()).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_vector_rejects_bad_indices(mut idx in prop::collection::vec(0usize..20, 2..6)) {
        idx.sort_unstable();
        let dup = idx.windows(2).any(|w| w[0] == w[1]);
        let vals = vec![1.0; idx.len()];
        prop_assert_eq!(SparseVector::new(idx.clone(), vals.clone()).is_ok(), !dup);
        idx.reverse();
        prop_assert!(SparseVector::new(idx, vals).is_err());
    }

    #[test]
    fn qp_matches_reference_and_kkt((q, c) in psd_qp()) {
        let bounds = BoxBounds::new(c).unwrap();
        let tol = 1e-6;
        let s = svm_dual::solve_box_qp_with(&q, &bounds, None, &QpOptions::with_tol(tol)).unwrap();
        prop_assert!(s.converged);
        prop_assert!(bounds.contains(&s.alpha));
        prop_assert!(svm_dual::kkt_violation(&q, &s.alpha, &bounds) <= tol);
        let (_, reference) = oracle::reference_box_qp(&q, &bounds, oracle::REFERENCE_QP_ITERS).unwrap();
        let rel = (s.objective - reference).abs() / reference.abs().max(1.0);
        prop_assert!(rel <= 1e-5, "solver {} reference {}", s.objective, reference);
    }

    #[test]
    fn closed_form_weights(norms in prop::collection::vec(0.0f64..10.0, 1..8)) {
        let total: f64 = norms.iter().sum();
        match mlkl::update_weights(&norms) {
            None => prop_assert!(total == 0.0),
            Some(mu) => {
                for (m, w) in mu.iter().zip(&norms) {
                    prop_assert!((m - w / total).abs() <= 1e-12);
                }
                prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_candidate_mkl_is_the_plain_dual(rows in points(8), y in labels(8), c in 0.1f64..5.0) {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let g = kernel::gram(&rows, &spec);
        let bounds = BoxBounds::uniform(8, c).unwrap();
        let k = vec![LabelKernel::from_assignment(&y)];
        let opts = MlklOptions::default();
        let r = mlkl::mlkl_solve(&InstanceKernel::Gram(&g), &k, &[1.0], &bounds, None, &opts).unwrap();
        let q = kernel::composite_label_gram(&g, &[y], &[1.0]).unwrap();
        let s = svm_dual::solve_box_qp_with(&q, &bounds, None, &opts.qp).unwrap();
        prop_assert_eq!(r.state.alpha, s.alpha);
        prop_assert_eq!(r.state.objective.to_bits(), s.objective.to_bits());
        prop_assert_eq!(r.mu, vec![1.0]);
    }

    #[test]
    fn ssl_sorting_matches_enumeration(
        r in prop::collection::vec(-1.0f64..1.0, 2..=12),
        seed in 0u64..1000,
    ) {
        let n = r.len();
        let n_lab = 1 + (seed as usize % n.min(4));
        let known: Vec<Option<Label>> = (0..n)
            .map(|i| (i < n_lab).then_some(if (seed >> i) & 1 == 1 { 1 } else { -1 }))
            .collect();
        let b = BalanceSpec::ssl(known).unwrap();
        let y = labelgen::generate_ssl(&r, &b).unwrap();
        let set = oracle::enumerate_feasible(&FeasibleSpec::Balance(b)).unwrap();
        let (_, best) = oracle::lp_solve_exhaustive(&r, &set).unwrap();
        prop_assert!(set.candidates().contains(&LabelCandidate::Assignment(y.clone())));
        let v = dot(&r, &y.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        prop_assert!((v - best).abs() <= 1e-12);
    }

    #[test]
    fn clustering_sorting_matches_enumeration(r in prop::collection::vec(-1.0f64..1.0, 1..=12), beta in 0usize..=2) {
        let beta = beta.min(r.len());
        let beta = if r.len() % 2 == 1 && beta == 0 { 1 } else { beta };
        let y = labelgen::generate_clustering(&r, beta).unwrap();
        let s: i32 = y.iter().map(|&v| i32::from(v)).sum();
        prop_assert!(s.unsigned_abs() as usize <= beta);
        let set = oracle::enumerate_feasible(&FeasibleSpec::Balance(BalanceSpec::clustering(r.len(), beta).unwrap())).unwrap();
        let (_, best) = oracle::lp_solve_exhaustive(&r, &set).unwrap();
        let v = dot(&r, &y.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        prop_assert!((v - best).abs() <= 1e-12);
    }

    #[test]
    fn mil_sorting_matches_enumeration(sizes in prop::collection::vec(1usize..=4, 1..=3), seed in any::<u64>()) {
        let mut bags = Vec::new();
        let mut start = 0;
        for s in sizes {
            bags.push(start..start + s);
            start += s;
        }
        let r: Vec<f64> = (0..start).map(|i| ((seed.wrapping_mul(i as u64 + 7) >> 11) % 1000) as f64 / 500.0 - 1.0).collect();
        let sel = labelgen::generate_mil(&r, &bags).unwrap();
        let set = oracle::enumerate_feasible(&FeasibleSpec::Bags(bags.clone())).unwrap();
        let (_, best) = oracle::lp_solve_exhaustive(&r, &set).unwrap();
        let v: f64 = sel.iter().map(|&i| r[i]).sum();
        prop_assert!((v - best).abs() <= 1e-12);
        for (s, b) in sel.iter().zip(&bags) {
            prop_assert!(b.contains(s));
        }
    }

    #[test]
    fn certified_candidates_raise_the_quadratic_score(
        rows in points(8),
        alpha in prop::collection::vec(0.0f64..1.0, 8),
        a in labels(8),
        b in labels(8),
    ) {
        let g = kernel::gram(&rows, &KernelSpec::gaussian(1.0).unwrap());
        let form = PairwiseForm::new(InstanceKernel::Gram(&g), alpha).unwrap();
        let fa: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
        let fb: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
        if labelgen::certify_violation(&fb, &fa, &form, None).unwrap() {
            prop_assert!(form.quad(&fb) > form.quad(&fa));
        }
    }

    #[test]
    fn no_certificate_at_the_global_maximizer(rows in points(6), alpha in prop::collection::vec(0.0f64..1.0, 6), beta in 0usize..=2) {
        let g = kernel::gram(&rows, &KernelSpec::Linear);
        let form = PairwiseForm::new(InstanceKernel::Gram(&g), alpha).unwrap();
        let set = oracle::enumerate_feasible(&FeasibleSpec::Balance(BalanceSpec::clustering(6, beta).unwrap())).unwrap();
        let vs: Vec<Vec<f64>> = set.candidates().iter().map(|c| c.domain_vector(6)).collect();
        let best = labelgen::pick_incumbent(&vs, &form, None).unwrap();
        let vp = ViolationProblem::new(&form, &vs[best], None).unwrap();
        for v in &vs {
            prop_assert!(!vp.certify(v));
        }
    }

    #[test]
    fn pick_incumbent_is_exhaustive_argmax(e in prop::collection::vec(-1.0f64..1.0, 8 * 8), c in prop::collection::vec(labels(8), 3)) {
        let h = psd(8, 8, &e);
        let form = PairwiseForm::new(InstanceKernel::Gram(&h), vec![1.0; 8]).unwrap();
        let vs: Vec<Vec<f64>> = c.iter().map(|y| y.iter().map(|&v| f64::from(v)).collect()).collect();
        let scores: Vec<f64> = vs.iter().map(|v| dot(v, &h.mul_vec(v))).collect();
        let i = labelgen::pick_incumbent(&vs, &form, None).unwrap();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((scores[i] - max).abs() <= 1e-9 * max.abs().max(1.0));
    }

    #[test]
    fn roi_harmonic_identity(rel in 1usize..200, pred in 1usize..200, frac in 0.0f64..=1.0) {
        let s = ((rel.min(pred) as f64 * frac).floor() as usize).max(1);
        let r = roi_success_rates(s, rel, pred).unwrap();
        let lhs = 1.0 / r.success_rate;
        let rhs = 0.5 * (1.0 / r.rate_relevant + 1.0 / r.rate_roi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        prop_assert!(r.success_rate <= r.rate_relevant.max(r.rate_roi) + 1e-15);
        prop_assert!(r.success_rate >= r.rate_relevant.min(r.rate_roi) - 1e-15);
    }

    #[test]
    fn clustering_accuracy_is_flip_invariant(pair in (1usize..50).prop_flat_map(|n| (labels(n), labels(n)))) {
        let (p, t) = pair;
        let neg: Vec<Label> = p.iter().map(|v| -v).collect();
        let a = clustering_accuracy(&p, &t).unwrap();
        prop_assert_eq!(a, clustering_accuracy(&neg, &t).unwrap());
        prop_assert!(a >= 0.5);
    }

    #[test]
    fn label_kernel_objective_is_linear_in_mu(rows in points(6), ys in prop::collection::vec(labels(6), 3), w in prop::collection::vec(0.01f64..1.0, 3), alpha in prop::collection::vec(0.0f64..1.0, 6)) {
        let g = kernel::gram(&rows, &KernelSpec::Linear);
        let ik = InstanceKernel::Gram(&g);
        let ks: Vec<LabelKernel> = ys.iter().map(|y| LabelKernel::from_assignment(y)).collect();
        let total: f64 = w.iter().sum();
        let mu: Vec<f64> = w.iter().map(|v| v / total).collect();
        let whole = mlkl::mlkl_objective(&ik, &ks, &mu, &alpha);
        let parts: f64 = (0..3)
            .map(|t| {
                let mut e = vec![0.0; 3];
                e[t] = 1.0;
                mu[t] * mlkl::mlkl_objective(&ik, &ks, &e, &alpha)
            })
            .sum();
        prop_assert!((whole - parts).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssl_traces_never_increase(rows in points(14), linear in any::<bool>(), c2 in 0.05f64..1.0) {
        let mut lab = vec![None; 14];
        lab[0] = Some(1);
        lab[1] = Some(-1);
        lab[2] = Some(1);
        let d = Dataset::new(rows, lab, 2).unwrap();
        let kernel = if linear { KernelSpec::Linear } else { KernelSpec::gaussian(1.0).unwrap() };
        let cfg = TaskConfig::new(Task::Ssl { c1: 1.0, c2 }, kernel);
        let p = Problem::ssl(&d, &cfg).unwrap();
        let res = cutting_plane(&p, initialize_ssl(&d, &cfg).unwrap(), &cfg, &NoClock).unwrap();
        prop_assert!(res.trace.len() <= cfg.max_outer_iters);
        for w in res.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-8);
        }
        for adm in &res.admissions {
            prop_assert!(adm.certified && adm.margin > 0.0);
        }
    }

    #[test]
    fn clustering_candidates_respect_beta(rows in points(12), beta in 0usize..=3) {
        let d = Dataset::unlabeled(rows, 2).unwrap();
        let cfg = TaskConfig::new(Task::Clustering { c: 0.5, beta }, KernelSpec::gaussian(1.0).unwrap());
        let t = learner::train_clustering(&d, &cfg, &NoClock).unwrap();
        for c in &t.model.candidates {
            let y = c.as_assignment().unwrap();
            let s: i32 = y.iter().map(|&v| i32::from(v)).sum();
            prop_assert!(s.unsigned_abs() as usize <= beta);
        }
    }

    #[test]
    fn bag_slot_map_is_a_bijection(sizes in prop::collection::vec((1usize..=4, any::<bool>()), 1..=6)) {
        let bags: Vec<(String, Vec<SparseVector>, Label)> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(m, pos))| {
                let xs = (0..m).map(|j| SparseVector::from_dense(&[i as f64, j as f64]).unwrap()).collect();
                (format!("b{i}"), xs, if pos { 1 } else { -1 })
            })
            .collect();
        let b = BagDataset::new(bags, 2).unwrap();
        let p = b.n_positive();
        let mut seen = vec![false; b.dual_size()];
        for bag in p..b.bags().len() {
            for j in 0..b.bags()[bag].len() {
                let slot = b.negative_slot(bag, j).unwrap();
                prop_assert!(slot >= p && !seen[slot]);
                seen[slot] = true;
                prop_assert_eq!(b.slot_instance(slot), Some(b.bags()[bag].start + j));
            }
        }
        prop_assert!(seen[p..].iter().all(|&s| s));
        prop_assert!(b.bags()[..p].iter().all(|x| x.label == 1));
        prop_assert!(b.bags()[p..].iter().all(|x| x.label == -1));
    }
}

use wellsvm_core::learner;
