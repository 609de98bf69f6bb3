//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use ipm_core::experiments::{basin_scan, ch_run, ch_table, toy_config, BasinSpec, TOY_BAD_START};
use ipm_core::minmode::min_modes_k_warm;
use ipm_core::objective::w_grad;
use ipm_core::problems::ch::{ch_config, CahnHilliard, ChInitial, CH_MASS};
use ipm_core::problems::quadratic::PerturbedQuadratic;
use ipm_core::problems::toy::{Toy2D, TOY_SADDLES};
use ipm_core::{
    aux_hessian_center_matrix, convergence_order, fixed_point_residual, index_region_membership, ipm_run,
    metric_grad_norm, min_mode, nash_check, w_tilde_grad, w_tilde_value, GameProfile, IpmConfig, Matrix, Metric,
    PenaltyKind, PotentialSurface, ReflectionFrame, TraceStatus, Vector,
};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Documented Ω₁ starting points for the toy recovery test.
const TOY_STARTS: [[f64; 2]; 10] = [
    [0.5, 1.0],
    [0.3, 0.9],
    [-0.5, 1.0],
    [0.0, -0.2],
    [0.2, -0.4],
    [0.8, 1.2],
    [-0.3, 0.8],
    [0.7, 0.9],
    [-0.1, -0.5],
    [0.4, 1.3],
];

fn verdict(id: &str, pass: bool, detail: &str) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn v(x: &[f64]) -> Vector {
    Vector::from_vec(x.to_vec())
}

fn dist_to_saddles(p: &Vector) -> f64 {
    TOY_SADDLES
        .iter()
        .map(|s| (p[0] - s[0]).hypot(p[1] - s[1]))
        .fold(f64::INFINITY, f64::min)
}

fn toy_cfg(rho: f64, m: usize) -> IpmConfig {
    IpmConfig { rho, inner_steps: m, ..toy_config() }
}

#[test]
fn criterion_1_toy_saddle_recovery() {
    let start = Instant::now();
    let cfg = toy_cfg(100.0, 100);
    assert_eq!((cfg.alpha, cfg.beta, cfg.tol), (1.0, 1.0, 1e-8));
    let mut worst: f64 = 0.0;
    let mut all = true;
    for p in TOY_STARTS {
        let x0 = v(&p);
        let member = index_region_membership(&Toy2D, &Metric::Euclidean, &x0, 1, cfg.eig_tol).unwrap().member;
        let t = ipm_run(&Toy2D, &Metric::Euclidean, &x0, 1, &cfg).unwrap();
        let d = dist_to_saddles(&t.final_point);
        let ok = member && t.converged() && t.last_grad_norm().unwrap() <= 1e-8 && d <= 1e-3;
        worst = worst.max(d);
        all &= ok;
    }
    let el = start.elapsed();
    verdict(
        "1",
        all && within(el, 5.0),
        &format!("10/10 Ω₁ starts converge, max distance to saddle {worst:.2e} ≤ 1e-3, {:.2}s < 5s", el.as_secs_f64()),
    );
}

#[test]
fn criterion_2_quadratic_order() {
    let start = Instant::now();
    let t = ipm_run(&Toy2D, &Metric::Euclidean, &v(&[0.5, 1.0]), 1, &toy_cfg(100.0, 500)).unwrap();
    let p = convergence_order(&t, 10).unwrap();
    let el = start.elapsed();
    verdict(
        "2",
        t.converged() && (1.7..=2.3).contains(&p) && within(el, 5.0),
        &format!("M=500 order {p:.3} in [1.7, 2.3], {:.2}s < 5s", el.as_secs_f64()),
    );
}

#[test]
fn criterion_3_robustness_ordering() {
    let start = Instant::now();
    let bad = v(&TOY_BAD_START);
    let imf = ipm_run(&Toy2D, &Metric::Euclidean, &bad, 1, &toy_cfg(0.0, 500)).unwrap();
    let ipm = ipm_run(&Toy2D, &Metric::Euclidean, &bad, 1, &toy_cfg(100.0, 500)).unwrap();
    let imf_fails = matches!(imf.status, TraceStatus::Diverged | TraceStatus::MaxIterations);
    let ipm_ok = ipm.converged() && dist_to_saddles(&ipm.final_point) <= 1e-3;
    println!(
        "  bad start {:?}: IMF {} / IPM {}",
        TOY_BAD_START,
        imf.status.as_str(),
        ipm.status.as_str()
    );

    let spec = BasinSpec::default();
    assert_eq!((spec.nx, spec.ny), (101, 101));
    let mut fr = Vec::new();
    for rho in [0.0, 5.0, 100.0] {
        let r = basin_scan(&spec, &toy_cfg(rho, 100)).unwrap();
        fr.push(r.omega1_success_fraction());
    }
    let el = start.elapsed();
    println!("  Ω₁ success fractions: rho=0 {:.4}, rho=5 {:.4}, rho=100 {:.4}", fr[0], fr[1], fr[2]);
    verdict(
        "3",
        imf_fails && ipm_ok && fr[2] >= fr[1] && fr[1] >= fr[0] && fr[2] >= 0.99 && within(el, 300.0),
        &format!(
            "IMF fails and IPM converges from the bad start ({}/{}); fractions ordered {:.4} ≥ {:.4} ≥ {:.4}; rho=100 fraction {:.4} ≥ 0.99; {:.1}s < 300s",
            imf_fails,
            ipm_ok,
            fr[2],
            fr[1],
            fr[0],
            fr[2],
            el.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4_table_pattern() {
    let start = Instant::now();
    let surface = CahnHilliard::standard();
    let mut base = ch_config(100.0, 10).unwrap();
    base.max_outer = 1000;
    let cells = ch_table(&surface, &[10, 100, 200, 500], &[0.0, 100.0], &ChInitial::TABLE, &base).unwrap();
    let ipm_all = cells.iter().filter(|c| c.rho > 0.0).all(|c| c.pass);
    let imf_fail_500 = cells.iter().any(|c| c.rho == 0.0 && c.m == 500 && !c.pass);
    let el = start.elapsed();
    println!("{}", ipm_core::experiments::table_markdown(&cells));
    verdict(
        "4",
        ipm_all && imf_fail_500 && within(el, 600.0),
        &format!(
            "IPM column all ✓: {ipm_all}; an IMF cell at M=500 is ✗: {imf_fail_500}; {:.1}s < 600s",
            el.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_5_ch_physics() {
    let start = Instant::now();
    let surface = CahnHilliard::standard();
    let cfg = ch_config(100.0, 10).unwrap();
    let run = ch_run(&surface, ChInitial::Phi01, &IpmConfig { max_outer: 1000, ..cfg }).unwrap();
    let phi = &run.trace.final_point;
    let mass_err = (surface.grid().mean(phi) - CH_MASS).abs();
    let gnorm = surface.hminus1_gradient_norm(phi);
    let cert = run.certificate.clone().expect("converged run has a certificate");
    let el = start.elapsed();
    println!(
        "  λ₁ = {:.6}, λ₂ = {:.3e} (translation overlap {:.6}), λ₂ with translation removed = {:.4}",
        cert.lambda1, cert.lambda2, cert.lambda2_translation_overlap, cert.reduced[1]
    );
    verdict(
        "5",
        run.trace.converged() && mass_err <= 1e-12 && gnorm <= 1e-6 && cert.is_index_one() && within(el, 120.0),
        &format!(
            "mass error {mass_err:.1e} ≤ 1e-12, H⁻¹ gradient norm {gnorm:.2e} ≤ 1e-6, index 1 modulo translation (λ₁ {:.4} < 0 < λ₂ {:.4}), {:.1}s < 120s",
            cert.reduced[0],
            cert.reduced[1],
            el.as_secs_f64()
        ),
    );
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

#[test]
fn criterion_6_identity_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let metric = Metric::Euclidean;

    // (a) gradient at the center
    let mut err_a: f64 = 0.0;
    for _ in 0..200 {
        let x = v(&[rng.gen_range(-1.5..1.5), rng.gen_range(-0.8..2.0)]);
        let (alpha, beta) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0) + 1.0);
        let cfg = IpmConfig { alpha, beta, rho: rng.gen_range(0.0..100.0), ..IpmConfig::default() };
        let Ok(mode) = min_mode(&Toy2D, &metric, &x, 1e-10, None) else { continue };
        let u = mode.eigenvector;
        let frame = ReflectionFrame::new(&metric, x.clone(), vec![u.clone()]).unwrap();
        let g = w_tilde_grad(&Toy2D, &frame, &x, &cfg).unwrap();
        let gv = Toy2D.gradient(&x);
        let expect = &gv - &u * ((alpha + beta) * u.dot(&gv));
        err_a = err_a.max((g - expect).amax());
    }

    // (b) spectrum identity
    let mut err_b: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..9);
        let h = random_sym(&mut rng, n);
        let (alpha, beta) = (rng.gen_range(-0.5..2.0), rng.gen_range(0.0..2.0));
        let (alpha, beta) = if alpha + beta > 1.0 { (alpha, beta) } else { (alpha, beta + 1.0) };
        let mut lam: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
        lam.sort_by(f64::total_cmp);
        let mut expect = lam.clone();
        expect[0] *= 1.0 - alpha - beta;
        expect.sort_by(f64::total_cmp);
        let hc = aux_hessian_center_matrix(&h, alpha, beta, 1).unwrap();
        let mut got: Vec<f64> = SymmetricEigen::new(hc).eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let scale = lam.iter().map(|l| l.abs()).fold(1.0, f64::max);
        for (a, b) in got.iter().zip(&expect) {
            err_b = err_b.max((a - b).abs() / scale);
        }
    }

    // (c) gradient against finite differences
    let mut err_c: f64 = 0.0;
    for i in 0..200 {
        let x = v(&[rng.gen_range(-1.5..1.5), rng.gen_range(-0.8..2.0)]);
        let y = &x + v(&[rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let u = v(&[theta.cos(), theta.sin()]);
        let cfg = IpmConfig {
            alpha: rng.gen_range(0.0..2.0),
            beta: rng.gen_range(1.0..2.0),
            rho: rng.gen_range(0.0..100.0),
            penalty: if i % 2 == 0 { PenaltyKind::SeparableQuartic } else { PenaltyKind::EuclideanQuartic },
            ..IpmConfig::default()
        };
        let frame = ReflectionFrame::new(&metric, x, vec![u]).unwrap();
        let g = w_tilde_grad(&Toy2D, &frame, &y, &cfg).unwrap();
        let h = 1e-5;
        let fd = Vector::from_fn(2, |j, _| {
            let mut e = Vector::zeros(2);
            e[j] = h;
            (w_tilde_value(&Toy2D, &frame, &(&y + &e), &cfg).unwrap()
                - w_tilde_value(&Toy2D, &frame, &(&y - &e), &cfg).unwrap())
                / (2.0 * h)
        });
        err_c = err_c.max((&g - &fd).norm() / g.norm().max(1.0));
    }
    let el = start.elapsed();
    verdict(
        "6",
        err_a <= 1e-10 && err_b <= 1e-8 && err_c <= 1e-6 && within(el, 30.0),
        &format!(
            "(a) center gradient error {err_a:.1e} ≤ 1e-10; (b) spectrum error {err_b:.1e} ≤ 1e-8; (c) finite-difference error {err_c:.1e} ≤ 1e-6; {:.2}s < 30s",
            el.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_equivalence_triangle() {
    let start = Instant::now();
    let metric = Metric::Euclidean;
    let cfg = toy_cfg(100.0, 100);
    let deep = IpmConfig { inner_steps: 5000, ..cfg.clone() };
    let mut worst_res: f64 = 0.0;
    let mut all = true;
    let mut checked = 0;
    for p in TOY_STARTS {
        let t = ipm_run(&Toy2D, &metric, &v(&p), 1, &cfg).unwrap();
        if !t.converged() {
            continue;
        }
        checked += 1;
        let x = &t.final_point;
        let r = fixed_point_residual(&Toy2D, &metric, x, 1, &deep).unwrap();
        worst_res = worst_res.max(r);
        let profile = GameProfile::at_point(&Toy2D, &metric, x, 1, &cfg).unwrap();
        let nash = nash_check(&Toy2D, &metric, &profile, 1e-3, 500, &cfg).unwrap();
        all &= r <= 10.0 * cfg.tol && nash.certified;
    }
    let el = start.elapsed();
    verdict(
        "7",
        all && checked == TOY_STARTS.len() && within(el, 60.0),
        &format!(
            "{checked} converged points: max fixed-point residual {worst_res:.1e} ≤ {:.0e}, all Nash-certified (δ=1e-3, 500 samples); {:.2}s < 60s",
            10.0 * cfg.tol,
            el.as_secs_f64()
        ),
    );
}

/// Penalty-free outer loop on a Euclidean surface.
fn imf_reference(x0: &Vector, cfg: &IpmConfig) -> Vec<(Vector, f64)> {
    let metric = Metric::Euclidean;
    let mut x = x0.clone();
    let mut modes = min_modes_k_warm(&Toy2D, &metric, &x, 1, cfg.eig_tol, None).unwrap();
    let mut out = vec![(x.clone(), metric_grad_norm(&Toy2D, &metric, &x))];
    for _ in 0..cfg.max_outer {
        let frame = ReflectionFrame::from_modes(&metric, x.clone(), &modes).unwrap();
        let mut y = x.clone();
        for _ in 0..cfg.inner_steps {
            let g = w_grad(&Toy2D, &frame, &y, cfg.alpha, cfg.beta).unwrap();
            y = &y - &g * cfg.dt;
        }
        x = y;
        modes = min_modes_k_warm(&Toy2D, &metric, &x, 1, cfg.eig_tol, Some(&modes.vectors())).unwrap();
        let g = metric_grad_norm(&Toy2D, &metric, &x);
        out.push((x.clone(), g));
        if g <= cfg.tol {
            break;
        }
    }
    out
}

#[test]
fn criterion_8_imf_reduction() {
    let metric = Metric::Euclidean;
    let cfg = toy_cfg(0.0, 100);
    let mut bitwise = true;
    for p in [[0.5, 1.0], [0.3, 0.9], [0.0, -0.2]] {
        let t = ipm_run(&Toy2D, &metric, &v(&p), 1, &cfg).unwrap();
        let r = imf_reference(&v(&p), &cfg);
        bitwise &= t.records.len() == r.len();
        for (rec, (x, g)) in t.records.iter().zip(&r) {
            bitwise &= rec.point.iter().zip(x.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
            bitwise &= rec.grad_norm.to_bits() == g.to_bits();
        }
    }

    let one = IpmConfig { rho: 100.0, inner_steps: 1, max_outer: 30, ..toy_config() };
    let t = ipm_run(&Toy2D, &metric, &v(&[0.5, 1.0]), 1, &one).unwrap();
    let mut err: f64 = 0.0;
    for w in t.records.windows(2) {
        let x = &w[0].point;
        let u = min_mode(&Toy2D, &metric, x, one.eig_tol, None).unwrap().eigenvector;
        let g = Toy2D.gradient(x);
        let step = &g - &u * ((one.alpha + one.beta) * u.dot(&g));
        let expect = x - step * one.dt;
        err = err.max((&w[1].point - expect).amax());
    }
    verdict(
        "8",
        bitwise && err <= 1e-14,
        &format!(
            "rho=0 traces bitwise equal to the penalty-free loop: {bitwise}; M=1 update error {err:.1e} ≤ 1e-14 over {} steps",
            t.records.len() - 1
        ),
    );
}

#[test]
fn criterion_9_index_two() {
    let start = Instant::now();
    let s = PerturbedQuadratic::index2_example();
    let metric = Metric::Euclidean;
    let cfg = IpmConfig { rho: 100.0, inner_steps: 100, dt: 0.01, ..IpmConfig::default() };
    let t = ipm_run(&s, &metric, &v(&[0.3, -0.2, 0.25]), 2, &cfg).unwrap();
    let x = &t.final_point;
    let mut lam: Vec<f64> = SymmetricEigen::new(s.dense_hessian(x).unwrap()).eigenvalues.iter().copied().collect();
    lam.sort_by(f64::total_cmp);
    let el = start.elapsed();
    verdict(
        "9",
        t.converged() && x.norm() < 0.5 && lam[0] < lam[1] && lam[1] < 0.0 && lam[2] > 0.0 && within(el, 5.0),
        &format!(
            "k=2 run {} at |x| = {:.3} with λ = ({:.4}, {:.4}, {:.4}); {:.2}s < 5s",
            t.status.as_str(),
            x.norm(),
            lam[0],
            lam[1],
            lam[2],
            el.as_secs_f64()
        ),
    );
}
