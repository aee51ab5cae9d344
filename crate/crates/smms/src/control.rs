//! Provably convergent control policies.
//!
//! Three controllers, all recording full trajectories:
//!
//! - [`reach_center`]: inside a safety ball, repeatedly pick the mode whose
//!   mean points most towards the center and dwell for
//!   `delta (r^2 - |y|^2)`. Converges to the ε-neighborhood of the center
//!   with probability one and never leaves the ball.
//! - [`reach_in_ball`]: arbitrary target inside a ball, reached through a
//!   chain of center-reaching legs along the segment from start to target.
//! - [`reach_1d`]: one-dimensional interval safety set, constant mode with
//!   multiplicative dwell `delta * y`; the log of the state drifts right by
//!   the law of large numbers.
//!
//! The dwell constant is derived from the support bound `L` and a certified
//! lower bound on the spanning margin λ; any positive underestimate of λ
//! keeps every convergence argument intact, so a configurable safety factor
//! (default 1/2) turns the strict inequalities of the analysis into
//! implementable choices.
//!
//! State updates are recorded in world coordinates with the exact
//! expression `y' = y + dwell * rate`, so an auditor can replay the
//! recurrence bit-for-bit.

use crate::decide::{self, MethodChoice};
use crate::model::{derive_rng, expected_system, mode_support_radius, sample, system_support, Smms};
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

/// Dedicated stream index for the sampled-lambda probe draws, so that
/// controller trajectories consume sampling draws only.
const LAMBDA_STREAM: u64 = u64::MAX;

/// Relative slack for floating-point safety checks.
const SAFETY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("degenerate geometry: start or target on the ball boundary")]
    DegenerateGeometry,
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
}

/// Open Euclidean ball used as a safety set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, ControlError> {
        if !(radius > 0.0) {
            return Err(ControlError::InvalidConfig("ball radius must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn distance_from_center(&self, x: &[f64]) -> f64 {
        dist(&self.center, x)
    }

    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        self.distance_from_center(x) < self.radius
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Target precision ε.
    pub eps: f64,
    /// Fixed dwell constant; bypasses the derived formula when set.
    pub delta_override: Option<f64>,
    /// Total step budget for one controller run, including all legs.
    pub max_steps: usize,
    /// Multiplier in (0, 1] applied to the derived dwell constant.
    pub delta_safety_factor: f64,
    /// Base seed; simulation harnesses derive per-run streams from it.
    pub rng_seed: u64,
}

impl ControllerConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            delta_override: None,
            max_steps: 1_000_000,
            delta_safety_factor: 0.5,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.eps > 0.0) {
            return Err(ControlError::InvalidConfig("eps must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(ControlError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.delta_safety_factor > 0.0 && self.delta_safety_factor <= 1.0) {
            return Err(ControlError::InvalidConfig(
                "delta_safety_factor must lie in (0, 1]".into(),
            ));
        }
        if let Some(d) = self.delta_override {
            if !(d > 0.0) {
                return Err(ControlError::InvalidConfig("delta_override must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    StepBudgetExhausted,
    SafetyViolationDetected,
}

/// One decision instant: the state observed, the choice made, and the rate
/// the environment answered with.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: f64,
    pub state: Vec<f64>,
    pub mode: usize,
    pub dwell: f64,
    pub rate: Vec<f64>,
    /// The point the controller was steering towards at this step; recorded
    /// so the mode-choice invariant is auditable from the trajectory alone.
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub outcome: Outcome,
}

impl Trajectory {
    /// CSV export: `k,t,y_1..y_n,mode,dwell,rate_1..rate_n`, one row per
    /// decision plus a terminal row with empty decision cells.
    pub fn to_csv(&self) -> String {
        let n = self.final_state.len();
        let mut out = String::new();
        out.push_str("k,t");
        for j in 1..=n {
            out.push_str(&format!(",y_{j}"));
        }
        out.push_str(",mode,dwell");
        for j in 1..=n {
            out.push_str(&format!(",rate_{j}"));
        }
        out.push('\n');
        for (k, s) in self.steps.iter().enumerate() {
            out.push_str(&format!("{k},{}", s.t));
            for y in &s.state {
                out.push_str(&format!(",{y}"));
            }
            out.push_str(&format!(",{},{}", s.mode, s.dwell));
            for r in &s.rate {
                out.push_str(&format!(",{r}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("{},{}", self.steps.len(), self.final_time));
        for y in &self.final_state {
            out.push_str(&format!(",{y}"));
        }
        out.push_str(",,");
        for _ in 0..n {
            out.push(',');
        }
        out.push('\n');
        out
    }

    /// JSON export with outcome and a config echo.
    pub fn to_json(&self, cfg: &ControllerConfig) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                json!({
                    "k": k,
                    "t": s.t,
                    "y": s.state,
                    "mode": s.mode,
                    "dwell": s.dwell,
                    "rate": s.rate,
                    "target": s.target,
                })
            })
            .collect();
        json!({
            "steps": steps,
            "final": { "t": self.final_time, "y": self.final_state },
            "outcome": self.outcome,
            "config": {
                "eps": cfg.eps,
                "delta_override": cfg.delta_override,
                "max_steps": cfg.max_steps,
                "delta_safety_factor": cfg.delta_safety_factor,
                "rng_seed": cfg.rng_seed,
            },
        })
    }
}

/// Advance the plant one decision: `y + dwell * rate` with a freshly
/// sampled rate.
pub fn step<R: Rng>(
    y: &[f64],
    mode: &crate::model::ModeDistribution,
    dwell: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let rate = sample(mode, rng);
    let next = y.iter().zip(&rate).map(|(yi, ri)| yi + dwell * ri).collect();
    (next, rate)
}

/// Shared per-run context: mode means, support bound, spanning margin.
pub(crate) struct PolicyEnv {
    pub means: Vec<Vec<f64>>,
    pub support: f64,
    pub lambda: f64,
}

/// Checks the reachability verdict and derives the spanning margin. Errors
/// when the verdict is NO.
pub(crate) fn build_env(m: &Smms, cfg: &ControllerConfig) -> Result<PolicyEnv, ControlError> {
    let es = expected_system(m);
    let verdict = decide::decide_expected(&es);
    if !verdict.is_yes() {
        return Err(ControlError::PreconditionViolation(
            "system is not almost-surely reachable (verdict NO)".into(),
        ));
    }
    let mut lambda_rng = derive_rng(cfg.rng_seed, LAMBDA_STREAM);
    let lambda = decide::compute_lambda(&es, MethodChoice::Auto, &mut lambda_rng)
        .map_err(|e| ControlError::PreconditionViolation(format!("lambda unavailable: {e}")))?;
    Ok(PolicyEnv {
        means: es.means_f64(),
        support: system_support(m),
        lambda: lambda.value,
    })
}

/// Dwell constant for a center-reaching leg in a ball of radius `r` at
/// precision `eps`: the safety factor times
/// `min(1/L, 1/(2Lr), eps λ/(r^2 L^2), eps λ/(4rL + 2 eps λ))`.
pub(crate) fn dwell_constant(env: &PolicyEnv, cfg: &ControllerConfig, r: f64, eps: f64) -> f64 {
    if let Some(d) = cfg.delta_override {
        return d;
    }
    let l = env.support;
    let el = eps * env.lambda;
    let bound = (1.0 / l)
        .min(1.0 / (2.0 * l * r))
        .min(el / (r * r * l * l))
        .min(el / (4.0 * r * l + 2.0 * el));
    cfg.delta_safety_factor * bound
}

pub(crate) enum LegEnd {
    Reached,
    Stopped(Outcome),
}

/// One center-reaching leg. Appends decisions to `steps`, advances state,
/// time, and budget in place.
#[allow(clippy::too_many_arguments)]
pub(crate) fn center_leg<R: Rng>(
    m: &Smms,
    env: &PolicyEnv,
    cfg: &ControllerConfig,
    ball: &Ball,
    eps: f64,
    y: &mut Vec<f64>,
    t: &mut f64,
    budget: &mut usize,
    steps: &mut Vec<Step>,
    rng: &mut R,
) -> LegEnd {
    let r = ball.radius;
    let delta = dwell_constant(env, cfg, r, eps);
    loop {
        let d = ball.distance_from_center(y);
        if d <= eps {
            return LegEnd::Reached;
        }
        if *budget == 0 {
            return LegEnd::Stopped(Outcome::StepBudgetExhausted);
        }
        *budget -= 1;

        // argmax_i mean_i · (center - y), ties to the lowest index.
        let mut best = f64::NEG_INFINITY;
        let mut mode = 0;
        for (i, mean) in env.means.iter().enumerate() {
            let score: f64 = mean
                .iter()
                .zip(ball.center.iter().zip(y.iter()))
                .map(|(mi, (ci, yi))| mi * (ci - yi))
                .sum();
            if score > best {
                best = score;
                mode = i;
            }
        }
        let dwell = delta * (r * r - d * d);
        let (next, rate) = step(y, &m.modes()[mode], dwell, rng);
        steps.push(Step {
            t: *t,
            state: y.clone(),
            mode,
            dwell,
            rate,
            target: ball.center.clone(),
        });
        *y = next;
        *t += dwell;

        if ball.distance_from_center(y) > r * (1.0 + SAFETY_SLACK) {
            return LegEnd::Stopped(Outcome::SafetyViolationDetected);
        }
    }
}

/// Reach the ε-neighborhood of the ball center from any interior start.
pub fn reach_center<R: Rng>(
    m: &Smms,
    ball: &Ball,
    x_s: &[f64],
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<Trajectory, ControlError> {
    cfg.validate()?;
    check_dim(m, ball, x_s)?;
    if !ball.strictly_contains(x_s) {
        return Err(ControlError::PreconditionViolation(
            "start point is not strictly inside the safety ball".into(),
        ));
    }
    let env = build_env(m, cfg)?;
    let eps = cfg.eps.min(ball.radius);

    let mut y = x_s.to_vec();
    let mut t = 0.0;
    let mut budget = cfg.max_steps;
    let mut steps = Vec::new();
    let outcome =
        match center_leg(m, &env, cfg, ball, eps, &mut y, &mut t, &mut budget, &mut steps, rng) {
            LegEnd::Reached => Outcome::Reached,
            LegEnd::Stopped(o) => o,
        };
    Ok(Trajectory { steps, final_time: t, final_state: y, outcome })
}

/// Waypoint geometry for reaching an arbitrary in-ball target: shrink
/// radius, waypoint count, and the points themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    pub shrink_radius: f64,
    pub count: usize,
    pub waypoints: Vec<Vec<f64>>,
}

/// `r_tilde = min(r - |x_s - c|, r - |x_t - c|) / 2`,
/// `N = floor(|x_t - x_s| / r_tilde) + 1`, waypoints evenly spaced on the
/// segment from start to target.
pub fn waypoints(ball: &Ball, x_s: &[f64], x_t: &[f64]) -> Result<WaypointPlan, ControlError> {
    let d_s = ball.distance_from_center(x_s);
    let d_t = ball.distance_from_center(x_t);
    let shrink = 0.5 * (ball.radius - d_s).min(ball.radius - d_t);
    if !(shrink > 0.0) {
        return Err(ControlError::DegenerateGeometry);
    }
    let span = dist(x_s, x_t);
    let count = (span / shrink).floor() as usize + 1;
    let waypoints = (1..=count)
        .map(|k| {
            let f = k as f64 / count as f64;
            x_s.iter().zip(x_t).map(|(s, t)| s + f * (t - s)).collect()
        })
        .collect();
    Ok(WaypointPlan { shrink_radius: shrink, count, waypoints })
}

/// Reach the ε-neighborhood of an arbitrary target strictly inside the
/// safety ball, via center-reaching legs on the waypoint chain.
pub fn reach_in_ball<R: Rng>(
    m: &Smms,
    ball: &Ball,
    x_s: &[f64],
    x_t: &[f64],
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<Trajectory, ControlError> {
    cfg.validate()?;
    check_dim(m, ball, x_s)?;
    check_dim(m, ball, x_t)?;
    if !ball.strictly_contains(x_s) || !ball.strictly_contains(x_t) {
        return Err(ControlError::PreconditionViolation(
            "start and target must be strictly inside the safety ball".into(),
        ));
    }
    let env = build_env(m, cfg)?;
    let plan = waypoints(ball, x_s, x_t)?;
    // Strictly below min(eps, r_tilde): the containment chain
    // |u_{k+1} - u| <= r_tilde + eps_tilde < 2 r_tilde needs strict margin.
    let eps_tilde = 0.99 * cfg.eps.min(plan.shrink_radius);

    let mut y = x_s.to_vec();
    let mut t = 0.0;
    let mut budget = cfg.max_steps;
    let mut steps = Vec::new();

    for u in &plan.waypoints {
        if dist(&y, x_t) <= cfg.eps {
            break;
        }
        let sub = Ball { center: u.clone(), radius: 2.0 * plan.shrink_radius };
        // Sub-ball containment inside the outer safety ball, from the
        // shrink-radius construction.
        assert!(
            ball.distance_from_center(u) + sub.radius <= ball.radius * (1.0 + SAFETY_SLACK),
            "waypoint ball escapes the safety ball"
        );
        match center_leg(m, &env, cfg, &sub, eps_tilde, &mut y, &mut t, &mut budget, &mut steps, rng)
        {
            LegEnd::Reached => {}
            LegEnd::Stopped(o) => {
                return Ok(Trajectory { steps, final_time: t, final_state: y, outcome: o })
            }
        }
    }
    Ok(Trajectory { steps, final_time: t, final_state: y, outcome: Outcome::Reached })
}

/// One-dimensional dwell policy on the open interval `(a, b)`: constant
/// mode of the travel direction's sign, dwell proportional to the distance
/// from the trailing wall. Support is normalized to the unit interval by
/// scaling the dwell when a mode's support radius exceeds one.
pub fn reach_1d<R: Rng>(
    m: &Smms,
    interval: (f64, f64),
    x_s: f64,
    x_t: f64,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<Trajectory, ControlError> {
    cfg.validate()?;
    let (a, b) = interval;
    if m.dim() != 1 {
        return Err(ControlError::PreconditionViolation(
            "one-dimensional policy needs a one-dimensional system".into(),
        ));
    }
    if !(a < b) || !(a < x_s && x_s < b) || !(a < x_t && x_t < b) {
        return Err(ControlError::PreconditionViolation(
            "start and target must lie strictly inside the interval".into(),
        ));
    }

    if (x_s - x_t).abs() <= cfg.eps {
        return Ok(Trajectory {
            steps: Vec::new(),
            final_time: 0.0,
            final_state: vec![x_s],
            outcome: Outcome::Reached,
        });
    }

    let es = expected_system(m);
    let means: Vec<f64> = es.means_f64().iter().map(|v| v[0]).collect();
    let rightward = x_t > x_s;
    // Pick the strongest mode of the required sign.
    let (mode, mean) = means
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, mu)| if rightward { mu > 0.0 } else { mu < 0.0 })
        .max_by(|(_, x), (_, y)| x.abs().partial_cmp(&y.abs()).unwrap())
        .ok_or_else(|| {
            ControlError::PreconditionViolation(format!(
                "no mode with {} mean exists",
                if rightward { "positive" } else { "negative" }
            ))
        })?;

    // Unit-support normalization: scale dwell so the effective per-step
    // rate lies in [-1, 1].
    let scale = mode_support_radius(&m.modes()[mode]).max(1.0);
    let span = b - a;
    let eps_tilde = if rightward { cfg.eps.min(b - x_t) } else { cfg.eps.min(x_t - a) };
    let delta = match cfg.delta_override {
        Some(d) => d,
        None => cfg.delta_safety_factor * ((mean.abs() / scale) / 2.0).min(eps_tilde / span),
    };

    let mut x = x_s;
    let mut t = 0.0;
    let mut budget = cfg.max_steps;
    let mut steps = Vec::new();
    let outcome = loop {
        if (x - x_t).abs() <= cfg.eps {
            break Outcome::Reached;
        }
        if budget == 0 {
            break Outcome::StepBudgetExhausted;
        }
        budget -= 1;

        // Distance from the trailing wall in the travel direction.
        let y_int = if rightward { x - a } else { b - x };
        let dwell = (delta / scale) * y_int;
        let rate = sample(&m.modes()[mode], rng);
        steps.push(Step {
            t,
            state: vec![x],
            mode,
            dwell,
            rate: rate.clone(),
            target: vec![x_t],
        });
        x += dwell * rate[0];
        t += dwell;

        if x <= a - SAFETY_SLACK * span || x >= b + SAFETY_SLACK * span {
            break Outcome::SafetyViolationDetected;
        }
    };
    Ok(Trajectory { steps, final_time: t, final_state: vec![x], outcome })
}

fn check_dim(m: &Smms, ball: &Ball, x: &[f64]) -> Result<(), ControlError> {
    if ball.center.len() != m.dim() || x.len() != m.dim() {
        return Err(ControlError::PreconditionViolation(format!(
            "dimension mismatch: system is {}-dimensional",
            m.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::tests::car_system;
    use crate::model::{derive_rng, ModeDistribution};
    use crate::rational::{parse_rational, Rational};

    fn rv(parts: &[&str]) -> Vec<Rational> {
        parts.iter().map(|s| parse_rational(s).unwrap()).collect()
    }

    /// Deterministic four-direction system: point masses on the axes.
    pub(crate) fn axes_system() -> Smms {
        let dirs = [["1", "0"], ["-1", "0"], ["0", "1"], ["0", "-1"]];
        Smms::new(
            dirs.iter()
                .map(|d| ModeDistribution::point_mass(rv(d)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn step_moves_linearly() {
        let pm = ModeDistribution::point_mass(rv(&["1", "0"])).unwrap();
        let mut rng = derive_rng(0, 0);
        let (next, rate) = step(&[0.0, 0.0], &pm, 0.5, &mut rng);
        assert_eq!(next, vec![0.5, 0.0]);
        assert_eq!(rate, vec![1.0, 0.0]);

        let (same, _) = step(&[1.0, 2.0], &pm, 0.0, &mut rng);
        assert_eq!(same, vec![1.0, 2.0]);

        let atom =
            ModeDistribution::finite_discrete(vec![(rv(&["0", "-1"]), parse_rational("1").unwrap())])
                .unwrap();
        let (down, _) = step(&[1.0, 1.0], &atom, 2.0, &mut rng);
        assert_eq!(down, vec![1.0, -1.0]);
    }

    #[test]
    fn already_inside_reaches_with_zero_steps() {
        let m = axes_system();
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_center(&m, &ball, &[0.05, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        assert!(traj.steps.is_empty());
        assert_eq!(traj.final_state, vec![0.05, 0.0]);
    }

    /// Hand-evaluated first step of the policy on the deterministic axes
    /// system: with the dwell constant pinned to
    /// 0.5 * min(1, 1/2, 0.1, 0.1/4.2) = 1/84, the first decision picks the
    /// -e1 mode and lands at (0.4910714..., 0).
    #[test]
    fn first_step_matches_hand_evaluation() {
        let m = axes_system();
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut cfg = ControllerConfig::new(0.1);
        let delta = 0.5 * 1.0f64.min(0.5).min(0.1).min(0.1 / 4.2);
        assert!((delta - 1.0 / 84.0).abs() < 1e-15);
        cfg.delta_override = Some(delta);
        let mut rng = derive_rng(1, 0);
        let traj = reach_center(&m, &ball, &[0.5, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        let first = &traj.steps[0];
        assert_eq!(first.mode, 1, "should pick the -e1 mode");
        let expected_dwell = delta * (1.0 - 0.25);
        assert!((first.dwell - expected_dwell).abs() < 1e-15);
        assert!((expected_dwell - 0.0089285714).abs() < 1e-9);
        let second = &traj.steps[1];
        assert!((second.state[0] - 0.4910714285714286).abs() < 1e-15);
        assert_eq!(second.state[1], 0.0);
    }

    #[test]
    fn rejects_start_outside_ball_and_no_verdict() {
        let m = axes_system();
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        assert!(matches!(
            reach_center(&m, &ball, &[1.5, 0.0], &cfg, &mut rng),
            Err(ControlError::PreconditionViolation(_))
        ));

        let one_sided = Smms::new(vec![
            ModeDistribution::point_mass(rv(&["1", "0"])).unwrap(),
            ModeDistribution::point_mass(rv(&["0", "1"])).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            reach_center(&one_sided, &ball, &[0.5, 0.0], &cfg, &mut rng),
            Err(ControlError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let m = car_system();
        let ball = Ball::new(vec![0.0, 0.0], 5.0).unwrap();
        let mut cfg = ControllerConfig::new(0.5);
        cfg.max_steps = 3;
        let mut rng = derive_rng(1, 0);
        let traj = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::StepBudgetExhausted);
        assert_eq!(traj.steps.len(), 3);
    }

    #[test]
    fn car_center_runs_stay_safe_and_reach() {
        let m = car_system();
        let ball = Ball::new(vec![0.0, 0.0], 5.0).unwrap();
        let cfg = ControllerConfig::new(0.5);
        for run in 0..20 {
            let mut rng = derive_rng(7, run);
            let traj = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut rng).unwrap();
            assert_eq!(traj.outcome, Outcome::Reached, "run {run}");
            for s in &traj.steps {
                let d = ball.distance_from_center(&s.state);
                assert!(d < 5.0 * (1.0 + 1e-9), "run {run}: |y| = {d}");
                assert!(s.dwell > 0.0);
            }
            assert!(ball.distance_from_center(&traj.final_state) <= 0.5);
        }
    }

    #[test]
    fn recorded_modes_are_argmax_choices() {
        let m = car_system();
        let es = expected_system(&m);
        let means = es.means_f64();
        let ball = Ball::new(vec![0.0, 0.0], 5.0).unwrap();
        let cfg = ControllerConfig::new(0.5);
        let mut rng = derive_rng(3, 0);
        let traj = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut rng).unwrap();
        for s in &traj.steps {
            let score = |i: usize| -> f64 {
                means[i]
                    .iter()
                    .zip(s.target.iter().zip(&s.state))
                    .map(|(mi, (ci, yi))| mi * (ci - yi))
                    .sum()
            };
            let chosen = score(s.mode);
            for j in 0..means.len() {
                assert!(chosen >= score(j), "mode {} beaten by {}", s.mode, j);
            }
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_trajectories() {
        let m = car_system();
        let ball = Ball::new(vec![0.0, 0.0], 5.0).unwrap();
        let cfg = ControllerConfig::new(0.5);
        let t1 = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut derive_rng(11, 4)).unwrap();
        let t2 = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut derive_rng(11, 4)).unwrap();
        assert_eq!(t1, t2);
        let t3 = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut derive_rng(11, 5)).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn replayed_recurrence_is_bit_exact() {
        let m = car_system();
        let ball = Ball::new(vec![0.0, 0.0], 5.0).unwrap();
        let cfg = ControllerConfig::new(0.5);
        let traj = reach_center(&m, &ball, &[3.0, 0.0], &cfg, &mut derive_rng(2, 0)).unwrap();
        let mut y = traj.steps[0].state.clone();
        for (k, s) in traj.steps.iter().enumerate() {
            assert_eq!(s.state, y, "divergence at step {k}");
            y = y.iter().zip(&s.rate).map(|(yi, ri)| yi + s.dwell * ri).collect();
        }
        assert_eq!(y, traj.final_state);
    }

    #[test]
    fn waypoint_plan_matches_formulas() {
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let plan = waypoints(&ball, &[-0.5, 0.0], &[0.5, 0.0]).unwrap();
        assert!((plan.shrink_radius - 0.25).abs() < 1e-15);
        assert_eq!(plan.count, 5);
        for (k, u) in plan.waypoints.iter().enumerate() {
            let expected = -0.5 + 0.2 * (k + 1) as f64;
            assert!((u[0] - expected).abs() < 1e-12);
            assert_eq!(u[1], 0.0);
        }
    }

    #[test]
    fn degenerate_waypoint_geometry_is_rejected() {
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            waypoints(&ball, &[1.0, 0.0], &[0.0, 0.0]).unwrap_err(),
            ControlError::DegenerateGeometry
        );
        let m = axes_system();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        assert!(matches!(
            reach_in_ball(&m, &ball, &[1.0, 0.0], &[0.0, 0.0], &cfg, &mut rng),
            Err(ControlError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn coincident_endpoints_reach_immediately() {
        let m = axes_system();
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_in_ball(&m, &ball, &[0.3, 0.2], &[0.3, 0.2], &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        assert!(traj.steps.is_empty());
    }

    #[test]
    fn car_ball_crossing_reaches_over_seeded_runs() {
        let m = car_system();
        let ball = Ball::new(vec![0.0, 0.0], 6.0).unwrap();
        let cfg = ControllerConfig::new(0.5);
        for run in 0..10 {
            let mut rng = derive_rng(13, run);
            let traj = reach_in_ball(&m, &ball, &[-3.0, 0.0], &[3.0, 0.0], &cfg, &mut rng).unwrap();
            assert_eq!(traj.outcome, Outcome::Reached, "run {run}");
            let goal_dist = dist(&traj.final_state, &[3.0, 0.0]);
            assert!(goal_dist <= 0.5, "run {run}: final distance {goal_dist}");
            for s in &traj.steps {
                assert!(ball.distance_from_center(&s.state) < 6.0 * (1.0 + 1e-9));
            }
        }
    }

    fn positive_half_mode() -> Smms {
        // Uniform on [0.1, 0.9]: mean 1/2, support radius 0.9.
        let mode = ModeDistribution::uniform_box(rv(&["1/2"]), rv(&["2/5"])).unwrap();
        Smms::new(vec![mode]).unwrap()
    }

    #[test]
    fn one_dim_dwell_constant_matches_theorem_bound() {
        let m = positive_half_mode();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_1d(&m, (0.0, 1.0), 0.1, 0.8, &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        // delta = 0.5 * min(mean/2, eps/(b-a)) = 0.5 * min(0.25, 0.1) = 0.05,
        // support radius below one so no rescaling; first dwell = 0.05 * 0.1.
        let first = &traj.steps[0];
        assert!((first.dwell - 0.05 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn one_dim_deterministic_growth_is_geometric() {
        // Point mass +1/2: y(k) = 0.1 * (1 + 0.5*0.05)^k, entering
        // B(0.8, 0.1) at the first k with y >= 0.7, which the closed form
        // puts at k = 79.
        let mode = ModeDistribution::point_mass(rv(&["1/2"])).unwrap();
        let m = Smms::new(vec![mode]).unwrap();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_1d(&m, (0.0, 1.0), 0.1, 0.8, &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        let growth: f64 = 1.0 + 0.05 * 0.5;
        let oracle_steps = ((0.7f64 / 0.1).ln() / growth.ln()).ceil() as usize;
        assert_eq!(oracle_steps, 79);
        assert_eq!(traj.steps.len(), 79);
        // Strictly increasing in the deterministic case.
        for w in traj.steps.windows(2) {
            assert!(w[1].state[0] > w[0].state[0]);
        }
    }

    #[test]
    fn one_dim_inside_band_reaches_immediately() {
        let m = positive_half_mode();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_1d(&m, (0.0, 1.0), 0.75, 0.8, &cfg, &mut rng).unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        assert!(traj.steps.is_empty());
    }

    #[test]
    fn one_dim_missing_sign_is_rejected() {
        let m = positive_half_mode();
        let cfg = ControllerConfig::new(0.05);
        let mut rng = derive_rng(1, 0);
        // Leftward travel needs a negative-mean mode.
        assert!(matches!(
            reach_1d(&m, (0.0, 1.0), 0.8, 0.2, &cfg, &mut rng),
            Err(ControlError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn one_dim_overshoot_is_bounded_per_step() {
        let m = positive_half_mode();
        let cfg = ControllerConfig::new(0.1);
        let eps_tilde = 0.1f64.min(1.0 - 0.8);
        for run in 0..50 {
            let mut rng = derive_rng(21, run);
            let traj = reach_1d(&m, (0.0, 1.0), 0.1, 0.8, &cfg, &mut rng).unwrap();
            assert_eq!(traj.outcome, Outcome::Reached);
            let mut prev = traj.steps[0].state[0];
            for s in traj.steps.iter().skip(1) {
                assert!((s.state[0] - prev).abs() <= eps_tilde + 1e-12);
                assert!(s.state[0] > 0.0 && s.state[0] < 1.0);
                prev = s.state[0];
            }
            assert!((traj.final_state[0] - prev).abs() <= eps_tilde + 1e-12);
        }
    }

    #[test]
    fn one_dim_mirrored_travel_works() {
        let mode = ModeDistribution::finite_discrete(vec![
            (rv(&["-3/4"]), parse_rational("2/3").unwrap()),
            (rv(&["1/2"]), parse_rational("1/3").unwrap()),
        ])
        .unwrap();
        let m = Smms::new(vec![mode]).unwrap();
        let cfg = ControllerConfig::new(0.1);
        for run in 0..20 {
            let mut rng = derive_rng(31, run);
            let traj = reach_1d(&m, (0.0, 1.0), 0.8, 0.2, &cfg, &mut rng).unwrap();
            assert_eq!(traj.outcome, Outcome::Reached, "run {run}");
            assert!((traj.final_state[0] - 0.2).abs() <= 0.1);
            for s in &traj.steps {
                assert!(s.state[0] > 0.0 && s.state[0] < 1.0);
            }
        }
    }

    #[test]
    fn csv_export_has_one_row_per_decision_plus_terminal() {
        let m = axes_system();
        let ball = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = ControllerConfig::new(0.1);
        let mut rng = derive_rng(1, 0);
        let traj = reach_center(&m, &ball, &[0.5, 0.0], &cfg, &mut rng).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,t,y_1,y_2,mode,dwell,rate_1,rate_2");
        assert_eq!(lines.len(), 1 + traj.steps.len() + 1);
        let json = traj.to_json(&cfg);
        assert_eq!(json["outcome"], "reached");
        assert_eq!(json["steps"].as_array().unwrap().len(), traj.steps.len());
    }
}
