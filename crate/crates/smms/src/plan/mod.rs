//! Safety-set geometry and the end-to-end path-following controller.
//!
//! Safety regions are unions of convex H-polytopes with nonempty interior
//! (certified at construction by an exact feasibility solve). A planned
//! piecewise-linear path assigns each segment to one member polytope, which
//! keeps clearance computation exact on a non-convex union: distance to the
//! boundary is concave on each convex member, so the minimum over a segment
//! is attained at an endpoint.
//!
//! From a path with clearance `r*` the cover construction places points at
//! most `r*/2` apart and balls of radius `3 r*/4` around them; consecutive
//! balls overlap and each lies inside the safety set, so the controller can
//! hop from ball center to ball center all the way to the target.

pub mod rrt;

pub use rrt::{rrt_plan, PlannerConfig};

use crate::control::{
    build_env, center_leg, Ball, ControlError, ControllerConfig, LegEnd, Outcome, Step, Trajectory,
};
use crate::model::Smms;
use crate::rational::{rational_from_f64, Rational};
use crate::simplex::{maximize_ineq, LpResult};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("point lies outside the polytope")]
    OutsidePolytope,
    #[error("path vertex on or outside the safety boundary (zero clearance)")]
    VertexOnBoundary,
    #[error("safety member {member} has empty interior")]
    EmptyInterior { member: usize },
    #[error("safety set is unbounded; supply an explicit sampling box")]
    UnboundedSafetySet,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("planner exhausted its sample budget without connecting")]
    PlanningBudgetExhausted,
    #[error("almost-sure reachability does not hold; witness direction attached")]
    NotReachable { witness: Vec<Rational> },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error(transparent)]
    Control(#[from] ControlError),
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Convex polytope `{ x : a_j · x <= b_j }`; treated as an open set via
/// strict inequalities where openness matters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    rows: Vec<(Vec<f64>, f64)>,
    dim: usize,
}

impl ConvexPolytope {
    pub fn new(rows: Vec<(Vec<f64>, f64)>) -> Result<Self, PlanError> {
        let dim = rows
            .first()
            .map(|(a, _)| a.len())
            .ok_or_else(|| PlanError::InvalidGeometry("polytope needs at least one row".into()))?;
        for (a, b) in &rows {
            if a.len() != dim {
                return Err(PlanError::DimensionMismatch { expected: dim, got: a.len() });
            }
            if !a.iter().chain(std::iter::once(b)).all(|v| v.is_finite()) {
                return Err(PlanError::InvalidGeometry("non-finite coefficient".into()));
            }
            if a.iter().all(|&v| v == 0.0) {
                return Err(PlanError::InvalidGeometry("zero normal row".into()));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[f64], strict: bool) -> Result<bool, PlanError> {
        if x.len() != self.dim {
            return Err(PlanError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.rows.iter().all(|(a, b)| {
            let s: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            if strict {
                s < *b
            } else {
                s <= *b
            }
        }))
    }

    /// Containment with every face pulled in by `margin` (in Euclidean
    /// units): `a_j·x <= b_j - margin |a_j|`.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> Result<bool, PlanError> {
        if x.len() != self.dim {
            return Err(PlanError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.rows.iter().all(|(a, b)| {
            let s: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            s < b - margin * norm
        }))
    }

    /// Radius of the largest ball around `x` inside the polytope:
    /// `min_j (b_j - a_j·x) / |a_j|`. Errors when `x` violates a row.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64, PlanError> {
        if x.len() != self.dim {
            return Err(PlanError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut min = f64::INFINITY;
        for (a, b) in &self.rows {
            let s: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            let slack = b - s;
            if slack < 0.0 {
                return Err(PlanError::OutsidePolytope);
            }
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            min = min.min(slack / norm);
        }
        Ok(min)
    }

    fn rows_rational(&self) -> Result<Vec<(Vec<Rational>, Rational)>, PlanError> {
        self.rows
            .iter()
            .map(|(a, b)| {
                let ar = a
                    .iter()
                    .map(|&v| rational_from_f64(v))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| PlanError::InvalidGeometry("non-finite coefficient".into()))?;
                let br = rational_from_f64(*b)
                    .ok_or_else(|| PlanError::InvalidGeometry("non-finite coefficient".into()))?;
                Ok((ar, br))
            })
            .collect()
    }

    /// Exact strict-feasibility check: maximize the L1-weighted margin `t`
    /// in `a_j·x + |a_j|_1 t <= b_j, t <= 1`; the interior is nonempty iff
    /// the optimum is positive.
    fn has_interior(&self) -> Result<bool, PlanError> {
        let rows = self.rows_rational()?;
        let n = self.dim;
        let mut a: Vec<Vec<Rational>> = Vec::with_capacity(rows.len() + 1);
        let mut b: Vec<Rational> = Vec::with_capacity(rows.len() + 1);
        for (ar, br) in &rows {
            let l1: Rational = ar.iter().map(Signed::abs).sum();
            let mut row = ar.clone();
            row.push(l1);
            a.push(row);
            b.push(br.clone());
        }
        let mut cap = vec![Rational::zero(); n + 1];
        cap[n] = Rational::one();
        a.push(cap.clone());
        b.push(Rational::one());
        let sol = maximize_ineq(&a, &b, &cap);
        match sol.result {
            LpResult::Optimal { objective, .. } => Ok(objective.is_positive()),
            LpResult::Infeasible { .. } => Ok(false),
            LpResult::Unbounded => unreachable!("margin is capped at one"),
        }
    }

    /// Tight axis-aligned bounding box via one exact LP per face, or `None`
    /// when the polytope is unbounded in some direction.
    fn bounding_box(&self) -> Result<Option<(Vec<f64>, Vec<f64>)>, PlanError> {
        let rows = self.rows_rational()?;
        let a: Vec<Vec<Rational>> = rows.iter().map(|(ar, _)| ar.clone()).collect();
        let b: Vec<Rational> = rows.iter().map(|(_, br)| br.clone()).collect();
        let n = self.dim;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for j in 0..n {
            for (sign, out) in [(1.0, &mut hi), (-1.0, &mut lo)] {
                let mut c = vec![Rational::zero(); n];
                c[j] = rational_from_f64(sign).unwrap();
                let sol = maximize_ineq(&a, &b, &c);
                match sol.result {
                    LpResult::Optimal { objective, .. } => {
                        out[j] = sign * crate::rational::to_f64(&objective);
                    }
                    LpResult::Unbounded => return Ok(None),
                    LpResult::Infeasible { .. } => {
                        return Err(PlanError::InvalidGeometry("empty polytope".into()))
                    }
                }
            }
        }
        Ok(Some((lo, hi)))
    }
}

/// Union of convex members forming the (possibly non-convex) safety region.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySet {
    members: Vec<ConvexPolytope>,
    dim: usize,
}

impl SafetySet {
    /// Certifies at load time that every member has nonempty interior.
    pub fn new(members: Vec<ConvexPolytope>) -> Result<Self, PlanError> {
        let dim = members
            .first()
            .map(ConvexPolytope::dim)
            .ok_or_else(|| PlanError::InvalidGeometry("safety set needs a member".into()))?;
        for (i, m) in members.iter().enumerate() {
            if m.dim() != dim {
                return Err(PlanError::DimensionMismatch { expected: dim, got: m.dim() });
            }
            if !m.has_interior()? {
                return Err(PlanError::EmptyInterior { member: i });
            }
        }
        Ok(Self { members, dim })
    }

    pub fn members(&self) -> &[ConvexPolytope] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[f64], strict: bool) -> Result<bool, PlanError> {
        for m in &self.members {
            if m.contains(x, strict)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Lowest-index member strictly containing both points; a segment with
    /// such a member lies strictly inside it by convexity.
    pub fn common_member(&self, a: &[f64], b: &[f64]) -> Result<Option<usize>, PlanError> {
        for (i, m) in self.members.iter().enumerate() {
            if m.contains(a, true)? && m.contains(b, true)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Union of the members' exact bounding boxes; errors when any member
    /// is unbounded.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for m in &self.members {
            let Some((mlo, mhi)) = m.bounding_box()? else {
                return Err(PlanError::UnboundedSafetySet);
            };
            for j in 0..self.dim {
                lo[j] = lo[j].min(mlo[j]);
                hi[j] = hi[j].max(mhi[j]);
            }
        }
        Ok((lo, hi))
    }
}

/// Piecewise-linear path with one containing member per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    pub vertices: Vec<Vec<f64>>,
    /// Member polytope containing segment `i` (from vertex `i` to `i+1`).
    pub segment_members: Vec<usize>,
}

impl PiecewiseLinearPath {
    pub fn new(vertices: Vec<Vec<f64>>, segment_members: Vec<usize>) -> Result<Self, PlanError> {
        if vertices.is_empty() {
            return Err(PlanError::InvalidPath("path needs at least one vertex".into()));
        }
        if segment_members.len() + 1 != vertices.len() && !(vertices.len() == 1 && segment_members.is_empty())
        {
            return Err(PlanError::InvalidPath(
                "need exactly one member per segment".into(),
            ));
        }
        Ok(Self { vertices, segment_members })
    }

    /// Builds a path from bare vertices by assigning each segment the first
    /// member that strictly contains both endpoints.
    pub fn assign(vertices: Vec<Vec<f64>>, s: &SafetySet) -> Result<Self, PlanError> {
        if vertices.is_empty() {
            return Err(PlanError::InvalidPath("path needs at least one vertex".into()));
        }
        let mut members = Vec::with_capacity(vertices.len().saturating_sub(1));
        for w in vertices.windows(2) {
            let m = s.common_member(&w[0], &w[1])?.ok_or_else(|| {
                PlanError::InvalidPath(format!(
                    "segment {:?} -> {:?} lies in no single safety member",
                    w[0], w[1]
                ))
            })?;
            members.push(m);
        }
        Ok(Self { vertices, segment_members: members })
    }

    /// Independent validity check against a safety set: both endpoints of
    /// every segment strictly inside the assigned member.
    pub fn validate(&self, s: &SafetySet) -> Result<(), PlanError> {
        if self.vertices.len() == 1 {
            if !s.contains(&self.vertices[0], true)? {
                return Err(PlanError::InvalidPath("vertex outside the safety set".into()));
            }
            return Ok(());
        }
        for (i, w) in self.vertices.windows(2).enumerate() {
            let m = *self
                .segment_members
                .get(i)
                .ok_or_else(|| PlanError::InvalidPath("missing segment member".into()))?;
            let member = s
                .members()
                .get(m)
                .ok_or_else(|| PlanError::InvalidPath(format!("member index {m} out of range")))?;
            if !member.contains(&w[0], true)? || !member.contains(&w[1], true)? {
                return Err(PlanError::InvalidPath(format!(
                    "segment {i} is not strictly inside member {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }
}

/// Sound lower bound on the distance from the path image to the complement
/// of the safety set: the minimum over path vertices of the distance to the
/// assigned member's boundary. Concavity of the distance on each convex
/// member puts the segment minimum at an endpoint.
pub fn path_clearance(path: &PiecewiseLinearPath, s: &SafetySet) -> Result<f64, PlanError> {
    if path.vertices.len() == 1 {
        let v = &path.vertices[0];
        let mut best: f64 = 0.0;
        for m in s.members() {
            if m.contains(v, false)? {
                best = best.max(m.distance_to_boundary(v)?);
            }
        }
        if best <= 0.0 {
            return Err(PlanError::VertexOnBoundary);
        }
        return Ok(best);
    }
    let mut clearance = f64::INFINITY;
    for (i, &m) in path.segment_members.iter().enumerate() {
        let member = s
            .members()
            .get(m)
            .ok_or_else(|| PlanError::InvalidPath(format!("member index {m} out of range")))?;
        for v in [&path.vertices[i], &path.vertices[i + 1]] {
            let d = member.distance_to_boundary(v)?;
            clearance = clearance.min(d);
        }
    }
    if clearance <= 0.0 {
        return Err(PlanError::VertexOnBoundary);
    }
    Ok(clearance)
}

/// Chain of intersecting safety balls along a path, with handoff points at
/// the ball centers.
#[derive(Debug, Clone, PartialEq)]
pub struct BallCover {
    pub balls: Vec<Ball>,
    pub handoffs: Vec<Vec<f64>>,
}

/// Densify the path to spacing `r*/2` and place balls of radius `3r*/4` at
/// the densified points. Each ball is verified inside the safety set
/// through its segment's member.
pub fn build_ball_cover(
    path: &PiecewiseLinearPath,
    r_star: f64,
    s: &SafetySet,
    x_s: &[f64],
    x_t: &[f64],
) -> Result<BallCover, PlanError> {
    if !(r_star > 0.0) {
        return Err(PlanError::PreconditionViolation("r* must be positive".into()));
    }
    let tol = 1e-9 * r_star;
    if dist(&path.vertices[0], x_s) > tol
        || dist(path.vertices.last().unwrap(), x_t) > tol
    {
        return Err(PlanError::PreconditionViolation(
            "path endpoints must match start and target".into(),
        ));
    }

    let spacing = r_star / 2.0;
    let radius = 0.75 * r_star;

    // Densified points with the member of the segment they came from.
    let mut points: Vec<(Vec<f64>, usize)> = Vec::new();
    if path.vertices.len() == 1 {
        // Lone vertex: the best containing member, as in path_clearance.
        let v = &path.vertices[0];
        let mut best = (0usize, 0.0f64);
        for (i, m) in s.members().iter().enumerate() {
            if m.contains(v, true)? {
                let d = m.distance_to_boundary(v)?;
                if d > best.1 {
                    best = (i, d);
                }
            }
        }
        points.push((v.clone(), best.0));
    } else {
        points.push((path.vertices[0].clone(), path.segment_members[0]));
        for (i, w) in path.vertices.windows(2).enumerate() {
            let member = path.segment_members[i];
            let len = dist(&w[0], &w[1]);
            let pieces = if len == 0.0 { 1 } else { (len / spacing).ceil() as usize };
            for k in 1..=pieces {
                // Land the last point on the vertex itself; the lerp at
                // f = 1 is not bit-exact.
                let p: Vec<f64> = if k == pieces {
                    w[1].clone()
                } else {
                    let f = k as f64 / pieces as f64;
                    w[0].iter().zip(&w[1]).map(|(a, b)| a + f * (b - a)).collect()
                };
                if dist(&p, &points.last().unwrap().0) > 0.0 {
                    points.push((p, member));
                }
            }
        }
    }

    let mut balls = Vec::with_capacity(points.len());
    let mut handoffs = Vec::with_capacity(points.len());
    for (p, member) in &points {
        let d = s.members()[*member].distance_to_boundary(p)?;
        if d + 1e-12 < radius {
            return Err(PlanError::PreconditionViolation(format!(
                "cover ball of radius {radius} escapes the safety set (clearance {d}); r* too large"
            )));
        }
        balls.push(Ball { center: p.clone(), radius });
        handoffs.push(p.clone());
    }
    Ok(BallCover { balls, handoffs })
}

/// End-to-end controller for a path-connected safety set: decide, plan,
/// cover, then hop the cover from handoff to handoff.
///
/// Returns `NotReachable` with the violating direction when the decision
/// procedure answers NO.
#[allow(clippy::too_many_arguments)]
pub fn reach_in_pc_set<R: Rng>(
    m: &Smms,
    s: &SafetySet,
    x_s: &[f64],
    x_t: &[f64],
    ctrl: &ControllerConfig,
    planner: &PlannerConfig,
    fixed_path: Option<&PiecewiseLinearPath>,
    rng: &mut R,
) -> Result<Trajectory, PlanError> {
    ctrl.validate()?;
    if s.dim() != m.dim() {
        return Err(PlanError::DimensionMismatch { expected: m.dim(), got: s.dim() });
    }
    let verdict = crate::decide::is_almost_sure_reachable(m);
    if let Some(w) = verdict.witness() {
        return Err(PlanError::NotReachable { witness: w.w.clone() });
    }
    if !s.contains(x_s, true)? || !s.contains(x_t, true)? {
        return Err(PlanError::PreconditionViolation(
            "start and target must lie strictly inside the safety set".into(),
        ));
    }

    if dist(x_s, x_t) <= ctrl.eps {
        return Ok(Trajectory {
            steps: Vec::new(),
            final_time: 0.0,
            final_state: x_s.to_vec(),
            outcome: Outcome::Reached,
        });
    }

    let owned_path;
    let path = match fixed_path {
        Some(p) => {
            p.validate(s)?;
            p
        }
        None => {
            owned_path = rrt_plan(s, x_s, x_t, planner, rng)?;
            &owned_path
        }
    };
    let r_star = path_clearance(path, s)?;
    let cover = build_ball_cover(path, r_star, s, x_s, x_t)?;

    let env = build_env(m, ctrl)?;
    // Handoff precision: deep enough inside the next ball that the chain
    // never starts a leg near a boundary (centers are r*/2 apart, balls
    // have radius 3r*/4, so a start within r*/6 of the previous center
    // stays 2r*/3 < 3r*/4 from the next).
    let leg_eps = ctrl.eps.min(r_star / 6.0);

    let mut y = x_s.to_vec();
    let mut t = 0.0;
    let mut budget = ctrl.max_steps;
    let mut steps: Vec<Step> = Vec::new();

    for i in 1..cover.balls.len() {
        let ball = &cover.balls[i];
        match center_leg(m, &env, ctrl, ball, leg_eps, &mut y, &mut t, &mut budget, &mut steps, rng)
        {
            LegEnd::Reached => {}
            LegEnd::Stopped(o) => {
                return Ok(Trajectory { steps, final_time: t, final_state: y, outcome: o })
            }
        }
    }
    Ok(Trajectory { steps, final_time: t, final_state: y, outcome: Outcome::Reached })
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::control::tests::axes_system;
    use crate::model::derive_rng;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn unit_square() -> ConvexPolytope {
        ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 1.0),
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, -1.0], 0.0),
        ])
        .unwrap()
    }

    fn square_set() -> SafetySet {
        SafetySet::new(vec![unit_square()]).unwrap()
    }

    #[test]
    fn containment_strict_and_closed() {
        let p = unit_square();
        assert!(p.contains(&[0.5, 0.5], true).unwrap());
        assert!(!p.contains(&[1.0, 0.5], true).unwrap());
        assert!(p.contains(&[1.0, 0.5], false).unwrap());
        assert!(!p.contains(&[2.0, 0.0], false).unwrap());
        assert!(matches!(
            p.contains(&[0.0], true),
            Err(PlanError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn boundary_distance_matches_hand_values() {
        let p = unit_square();
        assert_eq!(p.distance_to_boundary(&[0.5, 0.5]).unwrap(), 0.5);
        assert!((p.distance_to_boundary(&[0.1, 0.5]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(p.distance_to_boundary(&[1.5, 0.5]).unwrap_err(), PlanError::OutsidePolytope);
    }

    #[test]
    fn row_scaling_changes_nothing() {
        // 2x <= 2 is the same face as x <= 1: distance from x = 0 is 1
        // either way.
        let doubled = ConvexPolytope::new(vec![(vec![2.0], 2.0)]).unwrap();
        let plain = ConvexPolytope::new(vec![(vec![1.0], 1.0)]).unwrap();
        assert_eq!(doubled.distance_to_boundary(&[0.0]).unwrap(), 1.0);
        assert_eq!(plain.distance_to_boundary(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_rows_are_rejected() {
        assert!(matches!(
            ConvexPolytope::new(vec![(vec![0.0, 0.0], 1.0)]),
            Err(PlanError::InvalidGeometry(_))
        ));
        assert!(matches!(
            ConvexPolytope::new(vec![]),
            Err(PlanError::InvalidGeometry(_))
        ));
    }

    #[test]
    fn empty_interior_members_are_rejected_at_load() {
        // x <= 0 and -x <= 0 pin x = 0: nonempty but hollow.
        let flat = ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 0.0),
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, -1.0], 0.0),
        ])
        .unwrap();
        assert_eq!(
            SafetySet::new(vec![flat]).unwrap_err(),
            PlanError::EmptyInterior { member: 0 }
        );
    }

    #[test]
    fn bounding_box_is_exact_and_detects_unbounded() {
        let s = square_set();
        let (lo, hi) = s.bounding_box().unwrap();
        assert_eq!(lo, vec![0.0, 0.0]);
        assert_eq!(hi, vec![1.0, 1.0]);

        let half = ConvexPolytope::new(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        let s = SafetySet::new(vec![half]).unwrap();
        assert_eq!(s.bounding_box().unwrap_err(), PlanError::UnboundedSafetySet);
    }

    #[test]
    fn clearance_of_straight_path_in_square() {
        let s = square_set();
        let path =
            PiecewiseLinearPath::assign(vec![vec![0.2, 0.5], vec![0.8, 0.5]], &s).unwrap();
        let r = path_clearance(&path, &s).unwrap();
        // 0.2 up to the representation error of the inputs themselves.
        assert!((r - 0.2).abs() < 1e-15, "clearance {r}");
    }

    #[test]
    fn clearance_of_single_vertex_paths() {
        let s = square_set();
        let center = PiecewiseLinearPath::new(vec![vec![0.5, 0.5]], vec![]).unwrap();
        assert_eq!(path_clearance(&center, &s).unwrap(), 0.5);
        let corner = PiecewiseLinearPath::new(vec![vec![0.05, 0.05]], vec![]).unwrap();
        assert!((path_clearance(&corner, &s).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn boundary_vertices_are_rejected() {
        let s = square_set();
        let on_edge = PiecewiseLinearPath::new(vec![vec![0.0, 0.5], vec![0.5, 0.5]], vec![0]).unwrap();
        assert_eq!(path_clearance(&on_edge, &s).unwrap_err(), PlanError::VertexOnBoundary);
        let outside = PiecewiseLinearPath::new(vec![vec![-0.5, 0.5], vec![0.5, 0.5]], vec![0]).unwrap();
        assert_eq!(path_clearance(&outside, &s).unwrap_err(), PlanError::OutsidePolytope);
    }

    #[test]
    fn cover_follows_the_spacing_rule() {
        let s = SafetySet::new(vec![ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 2.0),
            (vec![-1.0, 0.0], 2.0),
            (vec![0.0, 1.0], 2.0),
            (vec![0.0, -1.0], 2.0),
        ])
        .unwrap()])
        .unwrap();
        // Straight path of length 1 with r* = 0.4: spacing 0.2, six points,
        // six balls of radius 0.3 with consecutive centers 0.2 apart.
        let path =
            PiecewiseLinearPath::assign(vec![vec![-0.5, 0.0], vec![0.5, 0.0]], &s).unwrap();
        let cover = build_ball_cover(&path, 0.4, &s, &[-0.5, 0.0], &[0.5, 0.0]).unwrap();
        assert_eq!(cover.balls.len(), 6);
        for b in &cover.balls {
            assert!((b.radius - 0.3).abs() < 1e-15);
        }
        for w in cover.balls.windows(2) {
            let d = distance(&w[0].center, &w[1].center);
            assert!((d - 0.2).abs() < 1e-12);
            assert!(d < w[0].radius + w[1].radius);
        }
        assert_eq!(cover.handoffs.first().unwrap(), &vec![-0.5, 0.0]);
        assert_eq!(cover.handoffs.last().unwrap(), &vec![0.5, 0.0]);
    }

    #[test]
    fn short_paths_need_no_densification() {
        // Two-segment path of total length 0.5 with r* = 1: spacing bound
        // 0.5, so the original vertices suffice.
        let big = SafetySet::new(vec![ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 2.0),
            (vec![-1.0, 0.0], 2.0),
            (vec![0.0, 1.0], 2.0),
            (vec![0.0, -1.0], 2.0),
        ])
        .unwrap()])
        .unwrap();
        let path = PiecewiseLinearPath::assign(
            vec![vec![0.0, 0.0], vec![0.25, 0.0], vec![0.5, 0.0]],
            &big,
        )
        .unwrap();
        let cover = build_ball_cover(&path, 1.0, &big, &[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert_eq!(cover.balls.len(), 3);
    }

    #[test]
    fn zero_length_path_gets_single_ball() {
        let s = square_set();
        let path = PiecewiseLinearPath::new(vec![vec![0.5, 0.5]], vec![]).unwrap();
        let cover = build_ball_cover(&path, 0.4, &s, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(cover.balls.len(), 1);
    }

    #[test]
    fn oversized_cover_radius_is_caught() {
        let s = square_set();
        let path =
            PiecewiseLinearPath::assign(vec![vec![0.2, 0.5], vec![0.8, 0.5]], &s).unwrap();
        // Clearance is 0.2; pretending r* = 1 pushes balls outside.
        assert!(matches!(
            build_ball_cover(&path, 1.0, &s, &[0.2, 0.5], &[0.8, 0.5]),
            Err(PlanError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn pc_set_rejects_unreachable_systems_with_witness() {
        let m = crate::model::Smms::new(vec![
            crate::model::ModeDistribution::point_mass_f64(&[1.0, 0.0]).unwrap(),
            crate::model::ModeDistribution::point_mass_f64(&[0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let s = square_set();
        let cfg = ControllerConfig::new(0.05);
        let planner = PlannerConfig::default();
        let mut rng = derive_rng(1, 0);
        let err = reach_in_pc_set(&m, &s, &[0.2, 0.2], &[0.8, 0.8], &cfg, &planner, None, &mut rng)
            .unwrap_err();
        match err {
            PlanError::NotReachable { witness } => {
                assert!(!witness.iter().all(num_traits::Zero::is_zero));
            }
            other => panic!("expected NotReachable, got {other}"),
        }
    }

    #[test]
    fn pc_set_immediate_when_already_at_target() {
        let m = axes_system();
        let s = square_set();
        let cfg = ControllerConfig::new(0.1);
        let planner = PlannerConfig::default();
        let mut rng = derive_rng(1, 0);
        let traj = reach_in_pc_set(
            &m,
            &s,
            &[0.5, 0.5],
            &[0.55, 0.5],
            &cfg,
            &planner,
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        assert!(traj.steps.is_empty());
    }

    #[test]
    fn pc_set_crosses_the_square_deterministically() {
        let m = axes_system();
        let s = square_set();
        let mut cfg = ControllerConfig::new(0.05);
        cfg.max_steps = 200_000;
        let planner = PlannerConfig::default();
        let t1 = reach_in_pc_set(
            &m,
            &s,
            &[0.2, 0.2],
            &[0.8, 0.8],
            &cfg,
            &planner,
            None,
            &mut derive_rng(5, 0),
        )
        .unwrap();
        assert_eq!(t1.outcome, Outcome::Reached);
        assert!(distance(&t1.final_state, &[0.8, 0.8]) <= 0.05);
        for s_ in &t1.steps {
            assert!(s.contains(&s_.state, true).unwrap());
        }
        let t2 = reach_in_pc_set(
            &m,
            &s,
            &[0.2, 0.2],
            &[0.8, 0.8],
            &cfg,
            &planner,
            None,
            &mut derive_rng(5, 0),
        )
        .unwrap();
        assert_eq!(t1, t2);
    }

    /// Two overlapping rectangles forming an L-shaped corridor.
    pub(crate) fn l_corridor() -> SafetySet {
        let horizontal = ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 3.0),
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, -1.0], 0.0),
        ])
        .unwrap();
        let vertical = ConvexPolytope::new(vec![
            (vec![1.0, 0.0], 3.0),
            (vec![-1.0, 0.0], -2.0),
            (vec![0.0, 1.0], 3.0),
            (vec![0.0, -1.0], 0.0),
        ])
        .unwrap();
        SafetySet::new(vec![horizontal, vertical]).unwrap()
    }

    #[test]
    fn pc_set_navigates_between_members() {
        let m = axes_system();
        let s = l_corridor();
        let mut cfg = ControllerConfig::new(0.1);
        cfg.max_steps = 400_000;
        let planner = PlannerConfig::default();
        let mut rng = derive_rng(8, 0);
        let traj = reach_in_pc_set(
            &m,
            &s,
            &[0.5, 0.5],
            &[2.5, 2.5],
            &cfg,
            &planner,
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.outcome, Outcome::Reached);
        for s_ in &traj.steps {
            assert!(s.contains(&s_.state, true).unwrap(), "state {:?} escaped", s_.state);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        /// Clearance soundness: points sampled uniformly on the path keep
        /// at least the claimed distance inside their segment's member.
        #[test]
        fn sampled_path_points_respect_clearance(seed in 0u64..500) {
            let s = square_set();
            let path = PiecewiseLinearPath::assign(
                vec![vec![0.2, 0.5], vec![0.8, 0.5], vec![0.8, 0.2]],
                &s,
            )
            .unwrap();
            let clearance = path_clearance(&path, &s).unwrap();
            let mut rng = derive_rng(seed, 0);
            for _ in 0..10 {
                let seg = rng.gen_range(0..path.segment_members.len());
                let f: f64 = rng.gen_range(0.0..=1.0);
                let a = &path.vertices[seg];
                let b = &path.vertices[seg + 1];
                let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect();
                let member = &s.members()[path.segment_members[seg]];
                let d = member.distance_to_boundary(&p).unwrap();
                prop_assert!(d >= clearance - 1e-9);
            }
        }

        /// Scaling safety rows by positive constants changes no observable
        /// geometry operation.
        #[test]
        fn row_scaling_invariance(scale in 1u32..50, x in 0.01f64..0.99, y in 0.01f64..0.99) {
            let c = scale as f64 / 7.0;
            let scaled = ConvexPolytope::new(vec![
                (vec![c, 0.0], c),
                (vec![-c, 0.0], 0.0),
                (vec![0.0, c], c),
                (vec![0.0, -c], 0.0),
            ])
            .unwrap();
            let plain = unit_square();
            let p = [x, y];
            prop_assert_eq!(plain.contains(&p, true).unwrap(), scaled.contains(&p, true).unwrap());
            let d1 = plain.distance_to_boundary(&p).unwrap();
            let d2 = scaled.distance_to_boundary(&p).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }
}
