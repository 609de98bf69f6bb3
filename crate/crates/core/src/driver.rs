//! The outer/inner iteration, convergence diagnostics and the game-theoretic
//! certificate of a computed saddle.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, IpmError, Result};
use crate::minmode::{min_modes_k_warm, ModeSet};
use crate::model::{
    random_unit, IpmConfig, IterationRecord, IterationTrace, Metric, PotentialSurface, TraceStatus, Vector,
};
use crate::objective::{w_tilde_grad_unchecked, w_tilde_value_unchecked, ReflectionFrame};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
/// Errors at or below this level are treated as round-off when fitting orders.
pub const ORDER_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub point: Vector,
    pub steps_taken: usize,
    /// Steps that increased `W̃ρ` (only counted with `check_descent`).
    pub descent_violations: usize,
    /// Stopped early because `‖y‖∞` exceeded `config.blowup`.
    pub blew_up: bool,
}

/// Norm of the metric gradient of `V`, measured in the base pairing.
pub fn metric_grad_norm<S: PotentialSurface + ?Sized>(surface: &S, metric: &Metric, x: &Vector) -> f64 {
    metric.base_norm(&metric.project_admissible(&metric.to_metric_gradient(&surface.gradient(x))))
}

fn inner_direction<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    frame: &ReflectionFrame,
    y: &Vector,
    config: &IpmConfig,
) -> (Vector, Vector) {
    let g = w_tilde_grad_unchecked(surface, frame, y, config);
    let step = metric.project_admissible(&metric.to_metric_gradient(&g));
    (g, surface.precondition_step(config.dt, step))
}

/// `M` gradient steps `y ← y − Δt P ∇_M W̃ρ(y; x, u)` with the frame frozen,
/// where `P` is the surface's step preconditioner (identity by default).
pub fn inner_minimize<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    frame: &ReflectionFrame,
    y0: &Vector,
    config: &IpmConfig,
) -> Result<InnerResult> {
    check_dim(surface.dim(), y0.len())?;
    check_dim(surface.dim(), frame.center.len())?;
    metric.check_dim(y0.len())?;
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(IpmError::NumericalFailure("initial inner iterate is not finite".into()));
    }
    let mut y = y0.clone();
    let mut violations = 0;
    let track = config.check_descent || config.line_search;
    let mut current = if track { w_tilde_value_unchecked(surface, frame, &y, config) } else { 0.0 };
    for step_index in 0..config.inner_steps {
        let (g, dir) = inner_direction(surface, metric, frame, &y, config);
        let next = if config.line_search {
            let slope = metric.base_dot(&g, &dir);
            let mut t = config.dt;
            let mut candidate = &y - &dir * t;
            let mut value = w_tilde_value_unchecked(surface, frame, &candidate, config);
            for _ in 0..MAX_HALVINGS {
                if value <= current - ARMIJO_C * t * slope {
                    break;
                }
                t *= 0.5;
                candidate = &y - &dir * t;
                value = w_tilde_value_unchecked(surface, frame, &candidate, config);
            }
            if value > current {
                violations += 1;
            }
            current = value;
            candidate
        } else {
            let candidate = &y - &dir * config.dt;
            if config.check_descent {
                let value = w_tilde_value_unchecked(surface, frame, &candidate, config);
                if value > current {
                    violations += 1;
                }
                current = value;
            }
            candidate
        };
        if !next.iter().all(|v| v.is_finite()) {
            return Err(IpmError::NumericalFailure(format!(
                "non-finite inner iterate at step {}",
                step_index + 1
            )));
        }
        y = next;
        if y.amax() > config.blowup {
            return Ok(InnerResult {
                point: y,
                steps_taken: step_index + 1,
                descent_violations: violations,
                blew_up: true,
            });
        }
    }
    Ok(InnerResult {
        point: y,
        steps_taken: config.inner_steps,
        descent_violations: violations,
        blew_up: false,
    })
}

fn validate_run<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x0: &Vector,
    k: usize,
    config: &IpmConfig,
) -> Result<()> {
    config.validate()?;
    check_dim(surface.dim(), x0.len())?;
    metric.check_dim(x0.len())?;
    if k == 0 || k >= x0.len() {
        return Err(IpmError::InvalidArgument(format!("index {k} out of range for dim {}", x0.len())));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(IpmError::InvalidArgument("initial point is not finite".into()));
    }
    let (ws, wm) = (surface.pairing_weight(), metric.base_weight());
    if (ws - wm).abs() > 1e-15 * ws.abs().max(wm.abs()) {
        return Err(IpmError::InvalidArgument(format!(
            "surface pairing weight {ws} does not match metric weight {wm}"
        )));
    }
    Ok(())
}

/// Runs the outer iteration from `x0` searching for an index-`k` saddle.
///
/// Each outer step minimizes `W̃ρ` with `M` inner steps started at `x_k`,
/// sets `x_{k+1}` to the result, refreshes the modes (warm-started from the
/// previous ones) and records `‖∇V(x_{k+1})‖`. Failures of the run are
/// reported through the trace status; `Err` is returned only for invalid
/// inputs.
pub fn ipm_run<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x0: &Vector,
    k: usize,
    config: &IpmConfig,
) -> Result<IterationTrace> {
    validate_run(surface, metric, x0, k, config)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut warning = false;

    let finish = |records: Vec<IterationRecord>, status, point: Vector, warning, failure: Option<String>| {
        Ok(IterationTrace {
            records,
            status,
            final_point: point,
            step_size_warning: warning,
            failure,
        })
    };

    let mut x = x0.clone();
    let mut modes: ModeSet = match min_modes_k_warm(surface, metric, &x, k, config.eig_tol, None) {
        Ok(m) => m,
        Err(e) => return finish(records, TraceStatus::NumericalFailure, x, false, Some(e.to_string())),
    };
    let g0 = metric_grad_norm(surface, metric, &x);
    if !g0.is_finite() || g0 > config.blowup {
        return finish(records, TraceStatus::Diverged, x, false, Some(format!("gradient norm {g0:e}")));
    }
    records.push(IterationRecord {
        outer_index: 0,
        point: x.clone(),
        grad_norm: g0,
        lambda1: modes.lambda1(),
        inner_steps_taken: 0,
        wall_time: start.elapsed().as_secs_f64(),
        descent_violations: 0,
    });
    if g0 <= config.tol {
        return finish(records, TraceStatus::Converged, x, false, None);
    }

    for outer in 1..=config.max_outer {
        let frame = ReflectionFrame::from_modes(metric, x.clone(), &modes)?;
        let inner = match inner_minimize(surface, metric, &frame, &x, config) {
            Ok(r) => r,
            Err(IpmError::NumericalFailure(msg)) => {
                return finish(records, TraceStatus::Diverged, x, warning, Some(msg));
            }
            Err(e) => return Err(e),
        };
        warning |= inner.descent_violations > 0;
        x = inner.point;
        let xn = x.norm();
        if inner.blew_up || !xn.is_finite() || xn > config.blowup {
            return finish(records, TraceStatus::Diverged, x, warning, Some(format!("iterate norm {xn:e}")));
        }
        let warm = modes.vectors();
        modes = match min_modes_k_warm(surface, metric, &x, k, config.eig_tol, Some(&warm)) {
            Ok(m) => m,
            Err(e) => return finish(records, TraceStatus::NumericalFailure, x, warning, Some(e.to_string())),
        };
        let g = metric_grad_norm(surface, metric, &x);
        if !g.is_finite() || g > config.blowup {
            return finish(records, TraceStatus::Diverged, x, warning, Some(format!("gradient norm {g:e}")));
        }
        records.push(IterationRecord {
            outer_index: outer,
            point: x.clone(),
            grad_norm: g,
            lambda1: modes.lambda1(),
            inner_steps_taken: inner.steps_taken,
            wall_time: start.elapsed().as_secs_f64(),
            descent_violations: inner.descent_violations,
        });
        if g <= config.tol {
            return finish(records, TraceStatus::Converged, x, warning, None);
        }
    }
    finish(records, TraceStatus::MaxIterations, x, warning, None)
}

/// Least-squares slope of `log e_{k+1}` against `log e_k` over the last
/// `tail` points of the final strictly decreasing run of errors in
/// `(ORDER_FLOOR, 1)`.
pub fn fit_order(errors: &[f64], tail: usize) -> Result<f64> {
    let usable = |e: f64| e.is_finite() && e > ORDER_FLOOR && e < 1.0;
    let mut end = errors.len();
    while end > 0 && !usable(errors[end - 1]) {
        end -= 1;
    }
    let mut begin = end;
    while begin > 0 && usable(errors[begin - 1]) && (begin == end || errors[begin - 1] > errors[begin]) {
        begin -= 1;
    }
    let segment = &errors[begin..end];
    let segment = &segment[segment.len().saturating_sub(tail)..];
    if segment.len() < 3 {
        return Err(IpmError::InsufficientData(format!(
            "{} usable decreasing errors, need at least 3",
            segment.len()
        )));
    }
    let pts: Vec<(f64, f64)> = segment.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(IpmError::InsufficientData("errors do not vary".into()));
    }
    Ok(sxy / sxx)
}

/// Convergence order fitted on the gradient norms of a converged trace.
pub fn convergence_order(trace: &IterationTrace, tail: usize) -> Result<f64> {
    if !trace.converged() {
        return Err(IpmError::InvalidArgument(format!(
            "convergence order needs a converged trace, status is {}",
            trace.status.as_str()
        )));
    }
    fit_order(&trace.grad_norms(), tail)
}

/// Convergence order fitted on `‖x_k − x*‖` for a known limit `x*`.
pub fn convergence_order_to(trace: &IterationTrace, limit: &Vector, tail: usize) -> Result<f64> {
    if !trace.converged() {
        return Err(IpmError::InvalidArgument("convergence order needs a converged trace".into()));
    }
    let errors: Vec<f64> = trace.records.iter().map(|r| (&r.point - limit).norm()).collect();
    fit_order(&errors, tail)
}

/// `‖Φ̂ρ(x) − x‖_M`, with `Φ̂ρ` one deep inner minimization from `x`.
pub fn fixed_point_residual<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    k: usize,
    deep_config: &IpmConfig,
) -> Result<f64> {
    validate_run(surface, metric, x, k, deep_config)?;
    let modes = min_modes_k_warm(surface, metric, x, k, deep_config.eig_tol, None)?;
    let frame = ReflectionFrame::from_modes(metric, x.clone(), &modes)?;
    let inner = inner_minimize(surface, metric, &frame, x, deep_config)?;
    if inner.blew_up {
        return Err(IpmError::NumericalFailure("deep inner solve blew up".into()));
    }
    Ok(metric.norm(&(inner.point - x)))
}

/// Action profile of the `(k + 2)`-player game: `y`, `x` and the modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameProfile {
    pub y: Vector,
    pub x: Vector,
    pub modes: Vec<Vector>,
    /// `[W̃ρ(y; x, u), ½‖x − y‖²_M, u_1ᵀH_1u_1, …, u_kᵀH_ku_k]`.
    pub costs: Vec<f64>,
}

fn rayleigh<S: PotentialSurface + ?Sized>(surface: &S, metric: &Metric, x: &Vector, u: &Vector) -> f64 {
    metric.base_dot(u, &surface.hessian_action(x, u))
}

/// `u ᵀ H_i u` with `H_i = H − Σ_{j<i} λ_j u_j u_jᵀ` in the metric.
fn mode_cost<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    x: &Vector,
    previous: &[(f64, Vector)],
    u: &Vector,
) -> f64 {
    let mut c = rayleigh(surface, metric, x, u);
    for (lambda, v) in previous {
        let p = metric.inner(v, u);
        c -= lambda * p * p;
    }
    c
}

impl GameProfile {
    pub fn new<S: PotentialSurface + ?Sized>(
        surface: &S,
        metric: &Metric,
        y: Vector,
        x: Vector,
        modes: Vec<Vector>,
        config: &IpmConfig,
    ) -> Result<Self> {
        check_dim(surface.dim(), y.len())?;
        check_dim(surface.dim(), x.len())?;
        for u in &modes {
            check_dim(surface.dim(), u.len())?;
            let n = metric.norm(u);
            if (n - 1.0).abs() > 1e-10 {
                return Err(IpmError::InvalidArgument(format!("mode has metric norm {n}, expected 1")));
            }
        }
        let mut p = Self { y, x, modes, costs: Vec::new() };
        p.costs = p.compute_costs(surface, metric, config)?;
        Ok(p)
    }

    /// Profile `(x, x, v_1..v_k(x))`.
    pub fn at_point<S: PotentialSurface + ?Sized>(
        surface: &S,
        metric: &Metric,
        x: &Vector,
        k: usize,
        config: &IpmConfig,
    ) -> Result<Self> {
        let modes = min_modes_k_warm(surface, metric, x, k, config.eig_tol, None)?;
        Self::new(surface, metric, x.clone(), x.clone(), modes.vectors(), config)
    }

    fn frame(&self, metric: &Metric) -> Result<ReflectionFrame> {
        ReflectionFrame::new(metric, self.x.clone(), self.modes.clone())
    }

    fn previous_pairs<S: PotentialSurface + ?Sized>(&self, surface: &S, metric: &Metric, i: usize) -> Vec<(f64, Vector)> {
        self.modes[..i]
            .iter()
            .map(|v| (rayleigh(surface, metric, &self.x, v), v.clone()))
            .collect()
    }

    pub fn compute_costs<S: PotentialSurface + ?Sized>(
        &self,
        surface: &S,
        metric: &Metric,
        config: &IpmConfig,
    ) -> Result<Vec<f64>> {
        let frame = self.frame(metric)?;
        let mut costs = vec![
            w_tilde_value_unchecked(surface, &frame, &self.y, config),
            0.5 * metric.norm(&(&self.x - &self.y)).powi(2),
        ];
        for i in 0..self.modes.len() {
            let prev = self.previous_pairs(surface, metric, i);
            costs.push(mode_cost(surface, metric, &self.x, &prev, &self.modes[i]));
        }
        Ok(costs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NashReport {
    pub certified: bool,
    /// Largest cost decrease found per player (`y`, `x`, `u_1`, …); values
    /// at or below zero mean no improving deviation was found.
    pub worst_violation_per_player: Vec<f64>,
    pub samples_used: usize,
    pub delta: f64,
}

fn slack(cost: f64) -> f64 {
    1e-10 * (1.0 + cost.abs())
}

fn metric_direction(metric: &Metric, rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = metric.project_admissible(&random_unit(rng, n));
        let norm = metric.norm(&v);
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Samples unilateral deviations of size `delta` for each player and checks
/// that none lowers that player's cost by more than `1e-10 (1 + |cost|)`.
///
/// `y` moves uniformly in the metric ball of radius `delta`; each mode moves
/// by `delta` in a random admissible direction and is renormalized to the
/// metric sphere. The `x` player is checked exactly: its cost is zero iff
/// `x = y`.
pub fn nash_check<S: PotentialSurface + ?Sized>(
    surface: &S,
    metric: &Metric,
    profile: &GameProfile,
    delta: f64,
    n_samples: usize,
    config: &IpmConfig,
) -> Result<NashReport> {
    if !(delta > 0.0) || n_samples == 0 {
        return Err(IpmError::InvalidArgument("nash_check needs delta > 0 and n_samples ≥ 1".into()));
    }
    let n = profile.x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let frame = profile.frame(metric)?;
    let costs = profile.compute_costs(surface, metric, config)?;
    let mut worst = vec![f64::NEG_INFINITY; costs.len()];

    for _ in 0..n_samples {
        let dir = metric_direction(metric, &mut rng, n);
        let radius = delta * rng.gen::<f64>().powf(1.0 / n as f64);
        let y = &profile.y + dir * radius;
        let c = w_tilde_value_unchecked(surface, &frame, &y, config);
        worst[0] = worst[0].max(costs[0] - c);
    }

    // the x player's best response is x = y, reducing its cost to zero
    worst[1] = costs[1];

    for i in 0..profile.modes.len() {
        let prev = profile.previous_pairs(surface, metric, i);
        for _ in 0..n_samples {
            let dir = metric_direction(metric, &mut rng, n);
            let u = &profile.modes[i] + dir * delta;
            let u = &u / metric.norm(&u);
            let c = mode_cost(surface, metric, &profile.x, &prev, &u);
            worst[2 + i] = worst[2 + i].max(costs[2 + i] - c);
        }
    }

    let certified = worst.iter().zip(&costs).all(|(w, c)| *w <= slack(*c));
    Ok(NashReport {
        certified,
        worst_violation_per_player: worst,
        samples_used: n_samples,
        delta,
    })
}
