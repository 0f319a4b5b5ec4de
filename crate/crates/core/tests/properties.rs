use enet_oracle::basis::DesignMatrix;
use enet_oracle::linalg::{l1_norm, project_l1_ball};
use enet_oracle::loss::LossModel;
use enet_oracle::solver::{soft_threshold, PenaltyConfig, Problem, SolverOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn instance(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    use rand::Rng;
    let mut rng = enet_oracle::rng::stream(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |i, _| x[(i, 0)] - 0.7 * x[(i, p - 1)] + rng.random_range(-0.5..0.5));
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_convex_with_matching_derivative(a in -6.0..6.0f64, b in -6.0..6.0f64, t in 0.0..1.0f64, y in 0u8..2) {
        let y = f64::from(y);
        for model in [LossModel::quadratic(), LossModel::logistic()] {
            let mid = model.value(t * a + (1.0 - t) * b, y).unwrap();
            let chord = t * model.value(a, y).unwrap() + (1.0 - t) * model.value(b, y).unwrap();
            prop_assert!(mid <= chord + 1e-12);
            let h = 1e-6;
            let fd = (model.value(a + h, y).unwrap() - model.value(a - h, y).unwrap()) / (2.0 * h);
            prop_assert!((fd - model.derivative(a, y).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn soft_threshold_is_the_l1_prox(z in -5.0..5.0f64, t in 0.0..3.0f64, w in -5.0..5.0f64) {
        let s = soft_threshold(z, t);
        let f = |u: f64| 0.5 * (u - z).powi(2) + t * u.abs();
        prop_assert!(f(s) <= f(w) + 1e-12);
    }

    #[test]
    fn l1_projection_is_feasible_and_idempotent(v in proptest::collection::vec(-4.0..4.0f64, 1..12), r in 0.1..5.0f64) {
        let v = DVector::from_vec(v);
        let p = project_l1_ball(&v, r);
        prop_assert!(l1_norm(&p) <= r * (1.0 + 1e-12));
        prop_assert!((project_l1_ball(&p, r) - &p).amax() <= 1e-12);
    }

    #[test]
    fn solver_is_permutation_equivariant(seed in 0u64..1000, l1 in 0.01..0.3f64, l2 in 0.0..0.3f64) {
        let (n, p) = (40, 7);
        let (x, y) = instance(seed, n, p);
        let perm: Vec<usize> = (0..p).rev().collect();
        let xp = DMatrix::from_fn(n, p, |i, j| x[(i, perm[j])]);
        let pen = PenaltyConfig::new(l1, l2);
        let opts = SolverOptions::default();
        let d = DesignMatrix::from_matrix(x).unwrap();
        let dp = DesignMatrix::from_matrix(xp).unwrap();
        let a = Problem::new(&d, &y, LossModel::quadratic()).unwrap().fit(&pen, &opts, None).unwrap();
        let b = Problem::new(&dp, &y, LossModel::quadratic()).unwrap().fit(&pen, &opts, None).unwrap();
        for (j, &k) in perm.iter().enumerate() {
            prop_assert!((a.beta_hat[k] - b.beta_hat[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_beats_random_feasible_points(seed in 0u64..1000, l1 in 0.0..0.3f64, l2 in 0.0..0.3f64, radius in 0.3..3.0f64) {
        let (x, y) = instance(seed, 30, 5);
        let d = DesignMatrix::from_matrix(x).unwrap();
        let problem = Problem::new(&d, &y, LossModel::quadratic()).unwrap();
        let pen = PenaltyConfig::new(l1, l2).with_radius(radius);
        let fit = problem.fit(&pen, &SolverOptions::default(), None).unwrap();
        prop_assert!(l1_norm(&fit.beta_hat) <= radius * (1.0 + 1e-9));
        let mut rng = enet_oracle::rng::stream(seed ^ 0x5eed);
        for _ in 0..20 {
            use rand::Rng;
            let b = project_l1_ball(&DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0)), radius);
            prop_assert!(fit.objective <= problem.objective(&b, &pen).unwrap() + 1e-9);
        }
    }

    #[test]
    fn warm_start_reaches_the_same_solution(seed in 0u64..1000, l1 in 0.02..0.3f64) {
        let (x, y) = instance(seed, 50, 12);
        let d = DesignMatrix::from_matrix(x).unwrap();
        let problem = Problem::new(&d, &y, LossModel::quadratic()).unwrap();
        let pen = PenaltyConfig::new(l1, 0.05);
        let opts = SolverOptions::default();
        let cold = problem.fit(&pen, &opts, None).unwrap();
        let warm_from = DVector::from_element(12, 0.5);
        let warm = problem.fit(&pen, &opts, Some(&warm_from)).unwrap();
        prop_assert!((cold.beta_hat - warm.beta_hat).amax() < 1e-6);
    }
}
