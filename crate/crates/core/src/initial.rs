//! Initial conditions: explicit particle arrays or i.i.d. draws from a
//! finitely supported product measure.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::game::{GameSpec, ParticleState, Strategy};
use crate::graph::Space;
use crate::wealth::Wealth;

/// One atom `(wealth, strategy)` of the single-particle law with its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub wealth: Wealth,
    pub strategy: Strategy,
    pub prob: Ratio<i64>,
}

/// Finitely supported law of `(wealth, strategy)`; weights sum to exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMeasure {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
}

impl InitialMeasure {
    pub fn new(atoms: Vec<Atom>, game: &GameSpec) -> Result<Self> {
        if atoms.is_empty() {
            return config("initial measure has no atoms");
        }
        let mut total = Ratio::<i64>::zero();
        for (k, a) in atoms.iter().enumerate() {
            if a.prob.is_negative() {
                return config(format!("initial.atoms[{k}].prob is negative"));
            }
            game.check_strategy(a.strategy)?;
            total += a.prob;
        }
        if !total.is_one() {
            return config(format!("initial atom probabilities sum to {total}, not 1"));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += *a.prob.numer() as f64 / *a.prob.denom() as f64;
                acc
            })
            .collect();
        Ok(InitialMeasure { atoms, cumulative })
    }

    /// The point mass at `(wealth, strategy)`.
    pub fn dirac(wealth: Wealth, strategy: Strategy, game: &GameSpec) -> Result<Self> {
        InitialMeasure::new(vec![Atom { wealth, strategy, prob: Ratio::one() }], game)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Wealth, Strategy) {
        let u: f64 = rng.random();
        let k = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| self.atoms.iter().rposition(|a| !a.prob.is_zero()).unwrap_or(0));
        (self.atoms[k].wealth, self.atoms[k].strategy)
    }

    /// Probability mass per strategy.
    pub fn strategy_weights(&self, strategies: usize) -> Vec<f64> {
        let mut w = vec![0.0; strategies];
        for a in &self.atoms {
            w[a.strategy] += *a.prob.numer() as f64 / *a.prob.denom() as f64;
        }
        w
    }
}

/// How initial positions are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositionLaw {
    /// The invariant law of the move kernel.
    Stationary,
    /// Every particle starts at the given vertex.
    Vertex(usize),
}

impl PositionLaw {
    pub fn sampler(&self, space: &Space) -> Result<PositionSampler> {
        match *self {
            PositionLaw::Stationary => {
                let pi = space.stationary()?;
                let mut acc = 0.0;
                let cumulative = pi
                    .iter()
                    .map(|p| {
                        acc += *p.numer() as f64 / *p.denom() as f64;
                        acc
                    })
                    .collect();
                Ok(PositionSampler::Weighted(cumulative))
            }
            PositionLaw::Vertex(v) => {
                if v >= space.vertex_count() {
                    return config(format!("initial vertex {v} outside the graph"));
                }
                Ok(PositionSampler::Fixed(v))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum PositionSampler {
    Weighted(Vec<f64>),
    Fixed(usize),
}

impl PositionSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            PositionSampler::Fixed(v) => *v,
            PositionSampler::Weighted(c) => {
                let u: f64 = rng.random();
                c.iter().position(|&x| u < x).unwrap_or(c.len() - 1)
            }
        }
    }
}

/// Draws `n` particles i.i.d. from `measure`, all at position 0.
pub fn sample_particles<R: Rng + ?Sized>(
    measure: &InitialMeasure,
    game: &GameSpec,
    n: usize,
    rng: &mut R,
) -> Vec<ParticleState> {
    (0..n)
        .map(|_| {
            let (wealth, strategy) = measure.sample(rng);
            game.settle(ParticleState::new(0, wealth, strategy))
        })
        .collect()
}
