use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sensor_collab::admm::{project_psd, project_soc};
use sensor_collab::estimator::{self, CollaborationPlan};
use sensor_collab::linalg;
use sensor_collab::model::{ou_covariance, CollaborationTopology, InstanceConfig};

fn vec_strategy(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|len| proptest::collection::vec(-5.0..5.0f64, len))
}

fn square_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..6).prop_flat_map(|n| {
        proptest::collection::vec(-3.0..3.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soc_projection_is_in_cone_and_idempotent(v in vec_strategy(2..8)) {
        let beta = DVector::from_vec(v);
        let p = project_soc(&beta);
        let n = p.len() - 1;
        prop_assert!(p.rows(0, n).norm() <= p[n] + 1e-12);
        let again = project_soc(&p);
        prop_assert!((again - &p).amax() <= 1e-12 * (1.0 + p.amax()));
        // Residual is orthogonal to the projection (Moreau decomposition).
        prop_assert!((&beta - &p).dot(&p).abs() <= 1e-9 * (1.0 + beta.norm_squared()));
    }

    #[test]
    fn psd_projection_is_psd_and_idempotent(m in square_strategy()) {
        let p = project_psd(&m);
        prop_assert!(linalg::is_psd(&p, 1e-10));
        prop_assert!(linalg::asymmetry(&p) < 1e-12);
        prop_assert!((project_psd(&p) - &p).amax() < 1e-10);
        let s = linalg::symmetrize(&m);
        prop_assert!(linalg::frob_dot(&(&s - &p), &p).abs() < 1e-9 * (1.0 + s.norm_squared()));
    }

    #[test]
    fn ou_covariance_is_spd(k in 1usize..8, rho in 0.01..20.0f64, var in 0.1..4.0f64) {
        let c = ou_covariance(k, rho, var).unwrap();
        prop_assert!(linalg::is_psd(&c, 0.0));
        for i in 0..k {
            prop_assert_eq!(c[(i, i)], var);
        }
        prop_assert!(c.clone().cholesky().is_some());
    }

    #[test]
    fn scatter_gather_round_trip(seed in 0u64..500, d in 0.1..1.2f64) {
        let mut cfg = InstanceConfig::paper_default(seed);
        cfg.d = d;
        let inst = cfg.build().unwrap();
        let topo: &CollaborationTopology = inst.topology();
        let w: Vec<f64> = (0..topo.num_links()).map(|i| i as f64 + 0.5).collect();
        let mat = topo.scatter(&w).unwrap();
        let back = topo.gather(&mat).unwrap();
        prop_assert_eq!(back.as_slice(), &w[..]);
        prop_assert_eq!(mat.iter().filter(|v| **v != 0.0).count(), topo.num_links());
    }

    #[test]
    fn distortion_is_bounded_by_prior(seed in 0u64..200, scale in 0.0..3.0f64) {
        let inst = InstanceConfig::paper_default(seed).build().unwrap();
        let n = inst.horizon() * inst.num_links();
        let w = DVector::from_fn(n, |i, _| scale * ((i * 37 % 11) as f64 / 11.0 - 0.5));
        let plan = CollaborationPlan::new(inst.horizon(), inst.num_links(), w).unwrap();
        let t = estimator::error_covariance_correlated(&inst, &plan).unwrap().trace;
        prop_assert!(t > 0.0 && t <= inst.theta_cov().trace() + 1e-12);
        let unc = estimator::distortion_uncorrelated(&inst, &plan).unwrap();
        prop_assert!(t <= unc + 1e-12);
    }
}

#[test]
fn zero_plan_returns_prior_trace() {
    let inst = InstanceConfig::paper_default(0).build().unwrap();
    let t = estimator::error_covariance_correlated(&inst, &CollaborationPlan::zeros(&inst)).unwrap().trace;
    assert_relative_eq!(t, 3.0, epsilon = 1e-12);
}
