use ipm_core::minmode::{min_modes_k_warm, residual};
use ipm_core::objective::{w_grad, PenaltySpec};
use ipm_core::problems::ch::{ch_config, CahnHilliard, CH_MASS};
use ipm_core::problems::periodic::PeriodicGrid;
use ipm_core::problems::quadratic::{PerturbedQuadratic, Quadratic};
use ipm_core::problems::toy::Toy2D;
use ipm_core::{
    aux_hessian_center_matrix, gradient_consistency, inner_minimize, ipm_run, index_region_membership, min_mode,
    min_modes_k, penalty_grad_y, penalty_value, w_tilde_grad, w_tilde_value, w_value, GameProfile, IpmConfig,
    Matrix, Metric, PenaltyKind, PotentialSurface, ReflectionFrame, Vector,
};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn toy_point() -> impl Strategy<Value = Vector> {
    (-1.8..1.8f64, -0.9..2.3f64).prop_map(|(x, y)| Vector::from_vec(vec![x, y]))
}

fn vec_of(n: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, n).prop_map(Vector::from_vec)
}

fn sym_matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |a| {
        let m = Matrix::from_row_slice(n, n, &a);
        (&m + m.transpose()) * 0.5
    })
}

fn penalty_kind() -> impl Strategy<Value = PenaltyKind> {
    prop_oneof![Just(PenaltyKind::SeparableQuartic), Just(PenaltyKind::EuclideanQuartic)]
}

fn angle_unit() -> impl Strategy<Value = Vector> {
    (0.0..std::f64::consts::TAU).prop_map(|t: f64| Vector::from_vec(vec![t.cos(), t.sin()]))
}

/// CH state: the prescribed mass plus a random smooth zero-mean perturbation.
fn ch_state() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-0.4..0.4f64, 6).prop_map(|c| {
        let grid = PeriodicGrid::new(100).unwrap();
        let x = grid.nodes();
        let phi = Vector::from_fn(100, |i, _| {
            let t = 2.0 * std::f64::consts::PI * x[i];
            CH_MASS + c[0] * t.sin() + c[1] * t.cos() + c[2] * (2.0 * t).sin() + c[3] * (2.0 * t).cos()
                + c[4] * (3.0 * t).sin() + c[5] * (3.0 * t).cos()
        });
        let m = grid.mean(&phi);
        phi.add_scalar(CH_MASS - m)
    })
}

fn symmetry_defect<S: PotentialSurface>(s: &S, x: &Vector, u: &Vector, v: &Vector) -> f64 {
    let a = u.dot(&s.hessian_action(x, v));
    let b = v.dot(&s.hessian_action(x, u));
    (a - b).abs() / (1.0 + u.norm() * v.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn toy_gradient_is_consistent(x in toy_point(), seed in 0u64..1000) {
        prop_assert!(gradient_consistency(&Toy2D, &x, 8, seed).unwrap() <= 1e-5);
    }

    #[test]
    fn ch_gradient_is_consistent(phi in ch_state(), seed in 0u64..1000) {
        let s = CahnHilliard::standard();
        prop_assert!(gradient_consistency(&s, &phi, 4, seed).unwrap() <= 1e-5);
    }

    #[test]
    fn perturbed_quadratic_gradient_is_consistent(x in vec_of(3, 1.5), seed in 0u64..1000) {
        let s = PerturbedQuadratic::index2_example();
        prop_assert!(gradient_consistency(&s, &x, 8, seed).unwrap() <= 1e-5);
    }

    #[test]
    fn hessian_actions_are_symmetric(x in toy_point(), u in vec_of(2, 3.0), v in vec_of(2, 3.0), phi in ch_state(), a in vec_of(100, 1.0), b in vec_of(100, 1.0)) {
        prop_assert!(symmetry_defect(&Toy2D, &x, &u, &v) <= 1e-8);
        prop_assert!(symmetry_defect(&CahnHilliard::standard(), &phi, &a, &b) <= 1e-8);
    }

    #[test]
    fn admissible_projection_is_idempotent(u in vec_of(100, 2.0)) {
        let m = Metric::hminus1(100).unwrap();
        let p = m.project_admissible(&u);
        prop_assert!((m.project_admissible(&p) - &p).amax() <= 1e-12);
        prop_assert!((Metric::Euclidean.project_admissible(&u) - &u).amax() == 0.0);
    }

    #[test]
    fn reflection_projector_is_idempotent_and_symmetric(phi in ch_state(), w in vec_of(100, 1.0), z in vec_of(100, 1.0)) {
        let s = CahnHilliard::standard();
        let m = s.metric();
        let modes = min_modes_k(&s, &m, &phi, 2, 1e-8).unwrap();
        let frame = ReflectionFrame::from_modes(&m, phi, &modes).unwrap();
        let pw = frame.project(&w);
        prop_assert!((frame.project(&pw) - &pw).amax() <= 1e-10);
        let lhs = m.inner(&frame.project(&w), &z);
        let rhs = m.inner(&w, &frame.project(&z));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + m.norm(&w) * m.norm(&z)));
    }

    #[test]
    fn hminus1_inner_is_symmetric_and_positive(u in vec_of(100, 1.0), v in vec_of(100, 1.0)) {
        let g = PeriodicGrid::new(100).unwrap();
        let (u, v) = (g.remove_mean(&u), g.remove_mean(&v));
        let a = g.hminus1_inner(&u, &v).unwrap();
        let b = g.hminus1_inner(&v, &u).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if u.amax() > 1e-6 {
            prop_assert!(g.hminus1_inner(&u, &u).unwrap() > 0.0);
        }
    }

    #[test]
    fn discrete_integration_by_parts(u in vec_of(100, 1.0), w in vec_of(100, 1.0)) {
        let g = PeriodicGrid::new(100).unwrap();
        let a = g.l2_inner(&g.neg_laplacian(&u), &w);
        let b = g.l2_inner(&u, &g.neg_laplacian(&w));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn penalty_is_nonnegative_and_flat_at_the_center(kind in penalty_kind(), x in vec_of(4, 2.0), y in vec_of(4, 2.0)) {
        let p = PenaltySpec { kind, rho: 1.0 };
        let d = penalty_value(&p, &x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d > 0.0 || x == y);
        prop_assert_eq!(penalty_value(&p, &x, &x).unwrap(), 0.0);
        prop_assert!(penalty_grad_y(&p, &x, &x).unwrap().amax() <= 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_differences(kind in penalty_kind(), x in vec_of(3, 1.0), y in vec_of(3, 1.0)) {
        let p = PenaltySpec { kind, rho: 1.0 };
        let g = penalty_grad_y(&p, &x, &y).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let mut e = Vector::zeros(3);
            e[j] = h;
            let fd = (penalty_value(&p, &x, &(&y + &e)).unwrap() - penalty_value(&p, &x, &(&y - &e)).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-7 * g.amax().max(1.0));
        }
    }

    #[test]
    fn penalty_hessian_is_positive_semidefinite(kind in penalty_kind(), r in vec_of(4, 2.0)) {
        let h = kind.hessian(&r, 1.0);
        let min = SymmetricEigen::new(h).eigenvalues.min();
        prop_assert!(min >= -1e-12);
        prop_assert_eq!(kind.hessian(&Vector::zeros(4), 1.0).amax(), 0.0);
    }

    #[test]
    fn center_gradient_identity(x in toy_point(), alpha in 0.0..2.0f64, beta in 1.0..2.5f64, rho in 0.0..100.0f64, u in angle_unit()) {
        let cfg = IpmConfig { alpha, beta, rho, ..IpmConfig::default() };
        let frame = ReflectionFrame::new(&Metric::Euclidean, x.clone(), vec![u.clone()]).unwrap();
        let g = w_tilde_grad(&Toy2D, &frame, &x, &cfg).unwrap();
        let gv = Toy2D.gradient(&x);
        let expect = &gv - &u * ((alpha + beta) * u.dot(&gv));
        prop_assert!((g - expect).amax() <= 1e-10);
    }

    #[test]
    fn saddle_stays_stationary_for_every_rho(h in sym_matrix(4), rho in 0.0..1e3f64, kind in penalty_kind()) {
        let q = Quadratic::new(h).unwrap();
        let x = Vector::zeros(4);
        let Ok(mode) = min_mode(&q, &Metric::Euclidean, &x, 1e-8, None) else { return Ok(()) };
        let cfg = IpmConfig { rho, penalty: kind, ..IpmConfig::default() };
        let frame = ReflectionFrame::new(&Metric::Euclidean, x.clone(), vec![mode.eigenvector]).unwrap();
        prop_assert_eq!(w_tilde_grad(&q, &frame, &x, &cfg).unwrap().amax(), 0.0);
    }

    #[test]
    fn center_hessian_spectrum(h in sym_matrix(5), alpha in -0.5..2.0f64, beta in 0.0..2.0f64) {
        let beta = if alpha + beta > 1.0 { beta } else { beta + 1.5 };
        let mut lam: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
        lam.sort_by(f64::total_cmp);
        prop_assume!(lam[1] - lam[0] > 1e-6);
        let mut expect = lam.clone();
        expect[0] *= 1.0 - alpha - beta;
        expect.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = SymmetricEigen::new(aux_hessian_center_matrix(&h, alpha, beta, 1).unwrap()).eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let scale = lam.iter().map(|l| l.abs()).fold(1.0, f64::max);
        for (a, b) in got.iter().zip(&expect) {
            prop_assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn rho_zero_is_plain_w(x in toy_point(), y in toy_point(), u in angle_unit(), alpha in 0.0..2.0f64, beta in 1.0..2.0f64) {
        let cfg = IpmConfig { alpha, beta, rho: 0.0, ..IpmConfig::default() };
        let frame = ReflectionFrame::new(&Metric::Euclidean, x, vec![u]).unwrap();
        let a = w_tilde_value(&Toy2D, &frame, &y, &cfg).unwrap();
        let b = w_value(&Toy2D, &frame, &y, alpha, beta).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let ga = w_tilde_grad(&Toy2D, &frame, &y, &cfg).unwrap();
        let gb = w_grad(&Toy2D, &frame, &y, alpha, beta).unwrap();
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn rayleigh_quotients_bound_the_lowest_eigenvalue(x in toy_point(), z in angle_unit()) {
        let m = Metric::Euclidean;
        if let Ok(p) = min_mode(&Toy2D, &m, &x, 1e-8, None) {
            let q = z.dot(&Toy2D.hessian_action(&x, &z));
            prop_assert!(q >= p.eigenvalue - 1e-8);
            prop_assert!(residual(&Toy2D, &m, &x, &p) <= 1e-8 * (1.0 + p.eigenvalue.abs()));
            prop_assert!((p.eigenvector.norm() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn deflation_matches_dense_decomposition(n in 3usize..=16, seed in any::<u64>(), k in 1usize..3) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let a = Matrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let h = (&a + a.transpose()) * 0.5;
        let q = Quadratic::new(h.clone()).unwrap();
        let mut lam: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        lam.sort_by(f64::total_cmp);
        prop_assume!(lam.windows(2).take(k + 1).all(|w| w[1] - w[0] > 1e-6));
        let modes = min_modes_k(&q, &Metric::Euclidean, &Vector::zeros(n), k, 1e-10).unwrap();
        for (i, p) in modes.pairs.iter().enumerate() {
            prop_assert!((p.eigenvalue - lam[i]).abs() <= 1e-8 * (1.0 + lam[i].abs()));
            for other in &modes.pairs[..i] {
                prop_assert!(p.eigenvector.dot(&other.eigenvector).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn lipschitz_bound(beta in 0.5..2.0f64, u in angle_unit(), x in toy_point(), pairs in prop::collection::vec((toy_point(), toy_point()), 10)) {
        // sup of |∇V| on a box containing every argument of W
        let mut lip: f64 = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                let p = Vector::from_vec(vec![-6.0 + 12.0 * i as f64 / 200.0, -6.0 + 12.0 * j as f64 / 200.0]);
                lip = lip.max(Toy2D.gradient(&p).norm());
            }
        }
        let frame = ReflectionFrame::new(&Metric::Euclidean, x, vec![u]).unwrap();
        for (y1, y2) in pairs {
            let d = (&y1 - &y2).norm();
            if d < 1e-9 { continue; }
            let dw = (w_value(&Toy2D, &frame, &y1, 1.0, beta).unwrap() - w_value(&Toy2D, &frame, &y2, 1.0, beta).unwrap()).abs();
            prop_assert!(dw / d <= (1.0 + beta) * lip);
        }
    }

    #[test]
    fn game_costs_are_recomputable(x in toy_point(), dy in vec_of(2, 0.1)) {
        let m = Metric::Euclidean;
        let cfg = IpmConfig { rho: 10.0, ..IpmConfig::default() };
        let Ok(modes) = min_modes_k(&Toy2D, &m, &x, 1, 1e-8) else { return Ok(()) };
        let p = GameProfile::new(&Toy2D, &m, &x + dy, x.clone(), modes.vectors(), &cfg).unwrap();
        let again = p.compute_costs(&Toy2D, &m, &cfg).unwrap();
        for (a, b) in p.costs.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn small_steps_descend(x in toy_point(), rho in 0.0..100.0f64) {
        let m = Metric::Euclidean;
        let Ok(modes) = min_modes_k(&Toy2D, &m, &x, 1, 1e-8) else { return Ok(()) };
        let cfg = IpmConfig { rho, dt: 1e-3, inner_steps: 50, check_descent: true, ..IpmConfig::default() };
        let frame = ReflectionFrame::from_modes(&m, x.clone(), &modes).unwrap();
        let r = inner_minimize(&Toy2D, &m, &frame, &x, &cfg).unwrap();
        prop_assert_eq!(r.descent_violations, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn toy_traces_are_well_formed(x in toy_point(), rho in prop_oneof![Just(0.0), Just(5.0), Just(100.0)]) {
        let cfg = IpmConfig { rho, dt: 0.01, ..IpmConfig::default() };
        let t = ipm_run(&Toy2D, &Metric::Euclidean, &x, 1, &cfg).unwrap();
        for w in t.records.windows(2) {
            prop_assert!(w[1].outer_index > w[0].outer_index);
        }
        prop_assert!(t.records.iter().all(|r| r.grad_norm >= 0.0));
        if t.converged() {
            prop_assert!(t.last_grad_norm().unwrap() <= cfg.tol);
            let r = index_region_membership(&Toy2D, &Metric::Euclidean, &t.final_point, 1, cfg.eig_tol).unwrap();
            prop_assert!(r.member);
        }
    }

    #[test]
    fn mirrored_starts_give_mirrored_runs(x in 0.05..1.8f64, y in -0.9..2.3f64) {
        let cfg = IpmConfig { rho: 100.0, dt: 0.01, ..IpmConfig::default() };
        let a = ipm_run(&Toy2D, &Metric::Euclidean, &Vector::from_vec(vec![x, y]), 1, &cfg).unwrap();
        let b = ipm_run(&Toy2D, &Metric::Euclidean, &Vector::from_vec(vec![-x, y]), 1, &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            prop_assert_eq!(ra.point[0].to_bits(), (-rb.point[0]).to_bits());
            prop_assert_eq!(ra.point[1].to_bits(), rb.point[1].to_bits());
        }
    }

    #[test]
    fn runs_are_deterministic(x in toy_point()) {
        let cfg = IpmConfig { rho: 100.0, dt: 0.01, ..IpmConfig::default() };
        let a = ipm_run(&Toy2D, &Metric::Euclidean, &x, 1, &cfg).unwrap();
        let b = ipm_run(&Toy2D, &Metric::Euclidean, &x, 1, &cfg).unwrap();
        prop_assert_eq!(&a.final_point, &b.final_point);
        prop_assert_eq!(a.grad_norms(), b.grad_norms());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ch_runs_conserve_mass(phi in ch_state(), rho in prop_oneof![Just(0.0), Just(100.0)]) {
        let s = CahnHilliard::standard();
        let cfg = IpmConfig { max_outer: 5, ..ch_config(rho, 10).unwrap() };
        let m = s.metric();
        let t = ipm_run(&s, &m, &phi, 1, &cfg).unwrap();
        for r in &t.records {
            prop_assert!((s.grid().mean(&r.point) - CH_MASS).abs() <= 1e-12);
        }
        let modes = min_modes_k_warm(&s, &m, &phi, 1, 1e-8, None);
        if let Ok(modes) = modes {
            let frame = ReflectionFrame::from_modes(&m, phi.clone(), &modes).unwrap();
            let r = inner_minimize(&s, &m, &frame, &phi, &cfg).unwrap();
            let y = r.point;
            // a blown-up iterate is reported as divergence; its mean is not meaningful
            if !r.blew_up {
                prop_assert!((s.grid().mean(&y) - CH_MASS).abs() <= 1e-12);
            }
        }
    }
}
