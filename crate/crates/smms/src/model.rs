//! Stochastic multi-mode system plant model.
//!
//! A plant is a finite set of modes, each a compactly supported distribution
//! over constant rate vectors. The controller picks a mode and a dwell time;
//! the environment samples a rate from the chosen distribution and the state
//! moves linearly for the dwell. Every distribution exposes an analytic mean
//! (exact rational) and a support radius, which is all the decision procedure
//! and the step-size formulas need.
//!
//! Distribution parameters are stored as exact rationals and converted to
//! binary64 only at the simulation boundary.

use crate::rational::{dot, to_f64, vec_to_f64, zero_vec, Rational};
use num_traits::{One, Signed};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("system must have at least one mode")]
    NoModes,
    #[error("half-widths must be non-negative")]
    NegativeHalfWidth,
    #[error("radius must be non-negative")]
    NegativeRadius,
    #[error("finite distribution needs at least one atom")]
    NoAtoms,
    #[error("atom probabilities must lie in [0, 1]")]
    ProbabilityOutOfRange,
    #[error("atom probabilities must sum to 1 (within 1e-12), got {got}")]
    ProbabilitySum { got: String },
    #[error("parameter is not a finite number representable as a rational")]
    NonRationalParameter,
}

/// A compactly supported distribution over rate vectors.
///
/// Construct through the checked constructors; the invariants (consistent
/// dimension, probabilities summing to one, non-negative extents) are
/// enforced there and relied on everywhere else.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeDistribution {
    PointMass {
        value: Vec<Rational>,
    },
    /// Uniform over the axis-aligned box `center ± half_widths`.
    UniformBox {
        center: Vec<Rational>,
        half_widths: Vec<Rational>,
    },
    /// Uniform over the closed Euclidean ball.
    UniformBall {
        center: Vec<Rational>,
        radius: Rational,
    },
    FiniteDiscrete {
        atoms: Vec<(Vec<Rational>, Rational)>,
    },
}

impl ModeDistribution {
    pub fn point_mass(value: Vec<Rational>) -> Result<Self, ModelError> {
        if value.is_empty() {
            return Err(ModelError::ZeroDimension);
        }
        Ok(Self::PointMass { value })
    }

    pub fn uniform_box(center: Vec<Rational>, half_widths: Vec<Rational>) -> Result<Self, ModelError> {
        if center.is_empty() {
            return Err(ModelError::ZeroDimension);
        }
        if half_widths.len() != center.len() {
            return Err(ModelError::DimensionMismatch {
                expected: center.len(),
                got: half_widths.len(),
            });
        }
        if half_widths.iter().any(Signed::is_negative) {
            return Err(ModelError::NegativeHalfWidth);
        }
        Ok(Self::UniformBox { center, half_widths })
    }

    pub fn uniform_ball(center: Vec<Rational>, radius: Rational) -> Result<Self, ModelError> {
        if center.is_empty() {
            return Err(ModelError::ZeroDimension);
        }
        if radius.is_negative() {
            return Err(ModelError::NegativeRadius);
        }
        Ok(Self::UniformBall { center, radius })
    }

    pub fn finite_discrete(atoms: Vec<(Vec<Rational>, Rational)>) -> Result<Self, ModelError> {
        let dim = atoms.first().map(|(v, _)| v.len()).ok_or(ModelError::NoAtoms)?;
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        for (v, p) in &atoms {
            if v.len() != dim {
                return Err(ModelError::DimensionMismatch { expected: dim, got: v.len() });
            }
            if p.is_negative() || *p > Rational::one() {
                return Err(ModelError::ProbabilityOutOfRange);
            }
        }
        let total: Rational = atoms.iter().map(|(_, p)| p.clone()).sum();
        let tol = Rational::new(1.into(), 1_000_000_000_000u64.into());
        if (total.clone() - Rational::one()).abs() > tol {
            return Err(ModelError::ProbabilitySum {
                got: crate::rational::format_rational(&total),
            });
        }
        Ok(Self::FiniteDiscrete { atoms })
    }

    /// Convenience constructor from binary64 components. Fails on
    /// non-finite input, which is the one way a parameter can be
    /// non-rational.
    pub fn point_mass_f64(value: &[f64]) -> Result<Self, ModelError> {
        let v = value
            .iter()
            .map(|&x| Rational::from_float(x).ok_or(ModelError::NonRationalParameter))
            .collect::<Result<Vec<_>, _>>()?;
        Self::point_mass(v)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::PointMass { value } => value.len(),
            Self::UniformBox { center, .. } => center.len(),
            Self::UniformBall { center, .. } => center.len(),
            Self::FiniteDiscrete { atoms } => atoms[0].0.len(),
        }
    }
}

/// Expected rate vector, exact.
pub fn mode_mean(d: &ModeDistribution) -> Vec<Rational> {
    match d {
        ModeDistribution::PointMass { value } => value.clone(),
        ModeDistribution::UniformBox { center, .. } => center.clone(),
        ModeDistribution::UniformBall { center, .. } => center.clone(),
        ModeDistribution::FiniteDiscrete { atoms } => {
            let mut mean = zero_vec(atoms[0].0.len());
            for (v, p) in atoms {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += p * x;
                }
            }
            mean
        }
    }
}

fn norm_f64(v: &[Rational]) -> f64 {
    to_f64(&dot(v, v)).sqrt()
}

/// Smallest radius `rho` with `P(||Z|| >= rho) = 0`.
pub fn mode_support_radius(d: &ModeDistribution) -> f64 {
    match d {
        ModeDistribution::PointMass { value } => norm_f64(value),
        ModeDistribution::UniformBox { center, half_widths } => {
            // The farthest box corner from the origin has coordinates
            // |center_j| + hw_j.
            let corner: Vec<Rational> =
                center.iter().zip(half_widths).map(|(c, h)| c.abs() + h).collect();
            norm_f64(&corner)
        }
        ModeDistribution::UniformBall { center, radius } => norm_f64(center) + to_f64(radius),
        ModeDistribution::FiniteDiscrete { atoms } => atoms
            .iter()
            .map(|(v, _)| norm_f64(v))
            .fold(0.0, f64::max),
    }
}

/// The plant: a nonempty set of modes of common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Smms {
    modes: Vec<ModeDistribution>,
    dim: usize,
}

impl Smms {
    pub fn new(modes: Vec<ModeDistribution>) -> Result<Self, ModelError> {
        let dim = modes.first().map(ModeDistribution::dim).ok_or(ModelError::NoModes)?;
        for m in &modes {
            if m.dim() != dim {
                return Err(ModelError::DimensionMismatch { expected: dim, got: m.dim() });
            }
        }
        Ok(Self { modes, dim })
    }

    pub fn modes(&self) -> &[ModeDistribution] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }
}

/// The deterministic system whose rates are the mode means.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedSystem {
    pub means: Vec<Vec<Rational>>,
    pub dim: usize,
}

impl ExpectedSystem {
    pub fn means_f64(&self) -> Vec<Vec<f64>> {
        self.means.iter().map(|m| vec_to_f64(m)).collect()
    }
}

pub fn expected_system(m: &Smms) -> ExpectedSystem {
    ExpectedSystem {
        means: m.modes().iter().map(mode_mean).collect(),
        dim: m.dim(),
    }
}

/// Largest support radius over all modes (the constant `L` in the dwell
/// formulas): bounds displacement per unit dwell time.
pub fn system_support(m: &Smms) -> f64 {
    m.modes().iter().map(mode_support_radius).fold(0.0, f64::max)
}

/// Reproducible generator contract: ChaCha8 seeded from a 64-bit seed, one
/// independent stream per run index. All Monte Carlo draws in this crate go
/// through streams derived this way; the generator family is fixed and never
/// changed silently.
pub fn derive_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// One i.i.d. draw from the distribution. Deterministic given the stream
/// state; the result always lies inside the support.
pub fn sample<R: Rng>(d: &ModeDistribution, rng: &mut R) -> Vec<f64> {
    match d {
        ModeDistribution::PointMass { value } => vec_to_f64(value),
        ModeDistribution::UniformBox { center, half_widths } => center
            .iter()
            .zip(half_widths)
            .map(|(c, h)| {
                let c = to_f64(c);
                let h = to_f64(h);
                if h == 0.0 {
                    c
                } else {
                    c + rng.gen_range(-h..=h)
                }
            })
            .collect(),
        ModeDistribution::UniformBall { center, radius } => {
            sample_ball(&vec_to_f64(center), to_f64(radius), rng)
        }
        ModeDistribution::FiniteDiscrete { atoms } => {
            let u: f64 = rng.gen_range(0.0..1.0);
            let mut acc = 0.0;
            for (v, p) in atoms {
                acc += to_f64(p);
                if u < acc {
                    return vec_to_f64(v);
                }
            }
            // Rounding in the cumulative sum can leave u just past the last
            // edge; the final atom takes the residual mass.
            vec_to_f64(&atoms[atoms.len() - 1].0)
        }
    }
}

/// Uniform draw from a closed ball: Gaussian direction scaled by
/// `radius * U^(1/n)`. Exactly uniform, no rejection loop.
fn sample_ball<R: Rng>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    let n = center.len();
    if radius == 0.0 {
        return center.to_vec();
    }
    let mut dir: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
    let mut norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    while norm == 0.0 {
        dir = (0..n).map(|_| standard_normal(rng)).collect();
        norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let u: f64 = rng.gen_range(0.0..1.0);
    let scale = radius * u.powf(1.0 / n as f64) / norm;
    let mut out: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + d * scale).collect();
    // Guard against the offset norm landing a rounding error outside the
    // closed ball; support containment must hold exactly.
    let off = out
        .iter()
        .zip(center)
        .map(|(x, c)| (x - c) * (x - c))
        .sum::<f64>()
        .sqrt();
    if off > radius {
        let shrink = radius / off * (1.0 - f64::EPSILON);
        out = center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + d * scale * shrink)
            .collect();
    }
    out
}

/// Box-Muller standard normal. Fixed algorithm keeps draws bit-reproducible
/// across crate versions, unlike a distribution pulled from a library that
/// may change its ziggurat tables.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen_range(0.0..1.0);
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
