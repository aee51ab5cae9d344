//! Certified lower bounds on the spanning margin.
//!
//! `lambda = inf_{|v|=1} max_i v·mean_i` is positive exactly when the means
//! positively span the space; the controller's dwell constant needs a
//! positive lower bound on it. Any `0 < lambda_hat <= lambda` is sound
//! because every dwell constraint is monotone in lambda.
//!
//! Three methods, picked by dimension: in the plane, lambda equals the
//! minimum origin-to-edge distance of the exact convex hull of the means;
//! in three dimensions the same over brute-force-enumerated hull facets;
//! in higher dimensions a multi-start projected subgradient descent with a
//! 0.9 safety factor, cross-checked against 10^4 sampled directions. Only
//! the first two are certified; the sampled bound is probabilistic.

use super::DecideError;
use crate::model::ExpectedSystem;
use crate::rational::{to_f64, Rational};
use num_traits::{Signed, Zero};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMethod {
    Exact2d,
    HullExact,
    SampledSubgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaBound {
    pub value: f64,
    pub method: LambdaMethod,
    pub certified: bool,
}

const SAMPLED_STARTS: usize = 16;
const SAMPLED_ITERATIONS: usize = 400;
const CERTIFICATION_DIRECTIONS: usize = 10_000;
const SAMPLED_SAFETY_FACTOR: f64 = 0.9;

/// Positive lower bound on `inf_{|v|=1} max_i v·mean_i`.
///
/// Errors with `NotPositivelySpanning` when the infimum is not positive,
/// which the caller should have excluded by deciding reachability first.
pub fn compute_lambda<R: Rng>(
    es: &ExpectedSystem,
    choice: MethodChoice,
    rng: &mut R,
) -> Result<LambdaBound, DecideError> {
    match (choice, es.dim) {
        (MethodChoice::Sampled, _) => sampled_subgradient(es, rng),
        (MethodChoice::Auto | MethodChoice::Exact, 1) => exact_1d(es),
        (MethodChoice::Auto | MethodChoice::Exact, 2) => exact_2d(es),
        (MethodChoice::Auto | MethodChoice::Exact, 3) => hull_exact_3d(es),
        (MethodChoice::Auto, _) => sampled_subgradient(es, rng),
        (MethodChoice::Exact, dim) => Err(DecideError::UnsupportedDimension { dim }),
    }
}

/// Only two unit directions exist on the line: lambda = min(max mean,
/// max -mean).
fn exact_1d(es: &ExpectedSystem) -> Result<LambdaBound, DecideError> {
    let best_pos = es.means.iter().map(|m| m[0].clone()).max().unwrap();
    let best_neg = es.means.iter().map(|m| -m[0].clone()).max().unwrap();
    let lambda = best_pos.min(best_neg);
    if !lambda.is_positive() {
        return Err(DecideError::NotPositivelySpanning);
    }
    Ok(LambdaBound {
        value: to_f64(&lambda),
        method: LambdaMethod::Exact2d,
        certified: true,
    })
}

fn cross(a: &[Rational], b: &[Rational]) -> Rational {
    &a[0] * &b[1] - &a[1] * &b[0]
}

/// Exact planar method: convex hull of the mean points (monotone chain
/// over exact rationals), then the minimum origin-to-edge-line distance.
/// The infimum of the support function over the circle is attained at a
/// hull-edge normal whenever the origin is interior.
fn exact_2d(es: &ExpectedSystem) -> Result<LambdaBound, DecideError> {
    let mut pts: Vec<Vec<Rational>> = es.means.clone();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return Err(DecideError::NotPositivelySpanning);
    }

    // Andrew's monotone chain, counter-clockwise hull.
    let half = |points: &[Vec<Rational>]| -> Vec<Vec<Rational>> {
        let mut chain: Vec<Vec<Rational>> = Vec::new();
        for p in points {
            while chain.len() >= 2 {
                let a = &chain[chain.len() - 2];
                let b = &chain[chain.len() - 1];
                let ab = [&b[0] - &a[0], &b[1] - &a[1]];
                let ap = [&p[0] - &a[0], &p[1] - &a[1]];
                if cross(&ab, &ap).is_positive() {
                    break;
                }
                chain.pop();
            }
            chain.push(p.clone());
        }
        chain
    };
    let lower = half(&pts);
    let reversed: Vec<Vec<Rational>> = pts.iter().rev().cloned().collect();
    let upper = half(&reversed);
    let mut hull: Vec<Vec<Rational>> = lower[..lower.len() - 1].to_vec();
    hull.extend_from_slice(&upper[..upper.len() - 1]);
    if hull.len() < 3 {
        return Err(DecideError::NotPositivelySpanning);
    }

    let mut min_dist = f64::INFINITY;
    for i in 0..hull.len() {
        let p = &hull[i];
        let q = &hull[(i + 1) % hull.len()];
        // Twice the signed area of (0, p, q); positive for every edge of a
        // CCW hull iff the origin is strictly interior.
        let c = cross(p, q);
        if !c.is_positive() {
            return Err(DecideError::NotPositivelySpanning);
        }
        let edge = [&q[0] - &p[0], &q[1] - &p[1]];
        let len2 = &edge[0] * &edge[0] + &edge[1] * &edge[1];
        let dist = to_f64(&c) / to_f64(&len2).sqrt();
        min_dist = min_dist.min(dist);
    }
    Ok(LambdaBound {
        value: min_dist,
        method: LambdaMethod::Exact2d,
        certified: true,
    })
}

/// Exact three-dimensional method: enumerate all supporting planes through
/// triples of means (brute-force facet enumeration, fine at small mode
/// counts) and take the minimum origin-to-plane distance.
fn hull_exact_3d(es: &ExpectedSystem) -> Result<LambdaBound, DecideError> {
    let pts = &es.means;
    let k = pts.len();
    let mut min_dist = f64::INFINITY;
    let mut found_facet = false;

    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let u: Vec<Rational> = (0..3).map(|d| &pts[j][d] - &pts[i][d]).collect();
                let v: Vec<Rational> = (0..3).map(|d| &pts[l][d] - &pts[i][d]).collect();
                let mut normal = vec![
                    &u[1] * &v[2] - &u[2] * &v[1],
                    &u[2] * &v[0] - &u[0] * &v[2],
                    &u[0] * &v[1] - &u[1] * &v[0],
                ];
                if normal.iter().all(Zero::is_zero) {
                    continue; // collinear triple
                }
                let mut offset = crate::rational::dot(&normal, &pts[i]);

                // Supporting plane test: all points on one side.
                let mut any_below = false;
                let mut any_above = false;
                for p in pts {
                    let s = crate::rational::dot(&normal, p);
                    if s < offset {
                        any_below = true;
                    } else if s > offset {
                        any_above = true;
                    }
                }
                if any_below && any_above {
                    continue;
                }
                if any_above {
                    for c in normal.iter_mut() {
                        *c = -c.clone();
                    }
                    offset = -offset;
                }
                found_facet = true;
                // Origin strictly inside requires positive offset for the
                // outward-oriented plane.
                if !offset.is_positive() {
                    return Err(DecideError::NotPositivelySpanning);
                }
                let norm2 = crate::rational::dot(&normal, &normal);
                let dist = to_f64(&offset) / to_f64(&norm2).sqrt();
                min_dist = min_dist.min(dist);
            }
        }
    }
    if !found_facet {
        return Err(DecideError::NotPositivelySpanning);
    }
    Ok(LambdaBound {
        value: min_dist,
        method: LambdaMethod::HullExact,
        certified: true,
    })
}

fn support_value(means: &[Vec<f64>], v: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, m) in means.iter().enumerate() {
        let s: f64 = m.iter().zip(v).map(|(a, b)| a * b).sum();
        if s > best {
            best = s;
            arg = i;
        }
    }
    (best, arg)
}

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Multi-start projected subgradient descent of `f(v) = max_i v·mean_i` on
/// the unit sphere, shrunk by a 0.9 safety factor and cross-checked against
/// sampled directions. Probabilistic, hence never marked certified.
fn sampled_subgradient<R: Rng>(
    es: &ExpectedSystem,
    rng: &mut R,
) -> Result<LambdaBound, DecideError> {
    let means = es.means_f64();
    let n = es.dim;
    let scale = means
        .iter()
        .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(DecideError::NotPositivelySpanning);
    }

    let mut best = f64::INFINITY;
    for _ in 0..SAMPLED_STARTS {
        let mut v = random_unit(n, rng);
        for k in 0..SAMPLED_ITERATIONS {
            let (f, arg) = support_value(&means, &v);
            best = best.min(f);
            let step = 0.5 / ((k + 1) as f64).sqrt();
            let g = &means[arg];
            let mut next: Vec<f64> = v
                .iter()
                .zip(g)
                .map(|(vi, gi)| vi - step * gi / scale)
                .collect();
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            for x in next.iter_mut() {
                *x /= norm;
            }
            v = next;
        }
        let (f, _) = support_value(&means, &v);
        best = best.min(f);
    }

    for _ in 0..CERTIFICATION_DIRECTIONS {
        let v = random_unit(n, rng);
        let (f, _) = support_value(&means, &v);
        best = best.min(f);
    }
    if best <= 0.0 {
        return Err(DecideError::NotPositivelySpanning);
    }
    Ok(LambdaBound {
        value: SAMPLED_SAFETY_FACTOR * best,
        method: LambdaMethod::SampledSubgradient,
        certified: false,
    })
}
