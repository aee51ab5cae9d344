//! Single-tree RRT path finder over a polytope-union safety set.
//!
//! Samples uniformly in the bounding box of the safety set with a small
//! goal bias, steers by a fixed step, and accepts an edge only when one
//! member polytope strictly contains both endpoints (convexity then covers
//! the whole segment, so accepted edges are exactly safe). Correctness of
//! the returned path rests on the independent path validator, not on the
//! planner's bookkeeping.

use super::{PiecewiseLinearPath, PlanError, SafetySet};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Samples drawn before giving up.
    pub max_samples: usize,
    /// Probability of sampling the goal instead of the box.
    pub goal_bias: f64,
    /// Steering step; defaults to 10% of the bounding-box diagonal.
    pub steer_step: Option<f64>,
    /// Goal-connect radius; defaults to the steering step.
    pub goal_radius: Option<f64>,
    /// Keep tree nodes at least this far from the safety boundary, so the
    /// returned path has clearance the cover construction can live with.
    /// Defaults to a quarter of the steering step; the endpoints are
    /// exempt. Zero disables the margin.
    pub clearance_margin: Option<f64>,
    /// Sampling box override, required when the safety set is unbounded.
    pub bbox: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_samples: 20_000,
            goal_bias: 0.05,
            steer_step: None,
            goal_radius: None,
            clearance_margin: None,
            bbox: None,
        }
    }
}

struct Node {
    point: Vec<f64>,
    parent: usize,
    /// Member polytope containing the edge from the parent.
    edge_member: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Plan a piecewise-linear path from `x_s` to `x_t` strictly inside the
/// safety set. Deterministic given the generator state.
pub fn rrt_plan<R: Rng>(
    s: &SafetySet,
    x_s: &[f64],
    x_t: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<PiecewiseLinearPath, PlanError> {
    if !s.contains(x_s, true)? || !s.contains(x_t, true)? {
        return Err(PlanError::PreconditionViolation(
            "planner endpoints must be strictly inside the safety set".into(),
        ));
    }

    // Convex shortcut: the straight segment may already be valid.
    if let Some(member) = s.common_member(x_s, x_t)? {
        return PiecewiseLinearPath::new(vec![x_s.to_vec(), x_t.to_vec()], vec![member]);
    }

    let (lo, hi) = match &cfg.bbox {
        Some(b) => b.clone(),
        None => s.bounding_box()?,
    };
    if lo.len() != s.dim() || hi.len() != s.dim() {
        return Err(PlanError::DimensionMismatch { expected: s.dim(), got: lo.len() });
    }
    let diagonal = dist(&lo, &hi);
    let step = cfg.steer_step.unwrap_or(0.1 * diagonal);
    let goal_radius = cfg.goal_radius.unwrap_or(step);
    let margin = cfg.clearance_margin.unwrap_or(0.25 * step);
    if !(step > 0.0) {
        return Err(PlanError::InvalidGeometry("degenerate sampling box".into()));
    }

    let mut nodes = vec![Node { point: x_s.to_vec(), parent: usize::MAX, edge_member: usize::MAX }];

    for _ in 0..cfg.max_samples {
        let sample: Vec<f64> = if rng.gen_range(0.0..1.0) < cfg.goal_bias {
            x_t.to_vec()
        } else {
            lo.iter().zip(&hi).map(|(&l, &h)| rng.gen_range(l..=h)).collect()
        };

        // Nearest tree node, lowest index on ties.
        let (nearest, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, dist(&n.point, &sample)))
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });

        let from = nodes[nearest].point.clone();
        let gap = dist(&from, &sample);
        if gap == 0.0 {
            continue;
        }
        let new: Vec<f64> = if gap <= step {
            sample
        } else {
            from.iter().zip(&sample).map(|(f, s)| f + (s - f) * step / gap).collect()
        };

        // Wall-hugging interior vertices would collapse the path clearance
        // and with it the cover-ball radius, so tree nodes must keep the
        // margin in every member an incident edge uses. Only the fixed
        // endpoints are exempt.
        let from_exempt = nearest == 0;
        let edge_member = (0..s.members().len()).find_map(|i| {
            let member = &s.members()[i];
            let from_ok = member.contains(&from, true).ok()?
                && (from_exempt || member.contains_with_margin(&from, margin).ok()?);
            let new_ok = member.contains_with_margin(&new, margin).ok()?;
            (from_ok && new_ok).then_some(i)
        });
        let Some(member) = edge_member else {
            continue;
        };
        nodes.push(Node { point: new.clone(), parent: nearest, edge_member: member });

        if dist(&new, x_t) <= goal_radius {
            let goal_member = (0..s.members().len()).find(|&i| {
                let member = &s.members()[i];
                member.contains_with_margin(&new, margin).unwrap_or(false)
                    && member.contains(x_t, true).unwrap_or(false)
            });
            if let Some(goal_member) = goal_member {
                // Backtrack to the root, then snap the goal on.
                let mut rev_points = vec![x_t.to_vec()];
                let mut rev_members = vec![goal_member];
                let mut at = nodes.len() - 1;
                while at != 0 {
                    rev_points.push(nodes[at].point.clone());
                    rev_members.push(nodes[at].edge_member);
                    at = nodes[at].parent;
                }
                rev_points.push(x_s.to_vec());
                rev_points.reverse();
                rev_members.reverse();
                return PiecewiseLinearPath::new(rev_points, rev_members);
            }
        }
    }
    Err(PlanError::PlanningBudgetExhausted)
}
