use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, ParticleState, Strategy};
use crate::wealth::{Scale, Wealth};

use super::distance::{Conditioning, WealthMarginal};

/// Wealth coordinate of an atom. All dead particles of one strategy share a
/// single atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Alive(Wealth),
    Dead,
}

/// Uniform measure on a particle array, stored as exact atom counts so
/// several arrays can be pooled without rounding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    counts: BTreeMap<(Strategy, Level), u64>,
    samples: u64,
}

impl EmpiricalMeasure {
    pub fn from_particles(particles: &[ParticleState]) -> Self {
        let mut m = EmpiricalMeasure::default();
        for p in particles {
            let level = if p.alive { Level::Alive(p.wealth) } else { Level::Dead };
            *m.counts.entry((p.strategy, level)).or_default() += 1;
            m.samples += 1;
        }
        m
    }

    /// Sum of the underlying counts. Pooling arrays of equal size weights
    /// each array equally.
    pub fn pool<'a>(parts: impl IntoIterator<Item = &'a EmpiricalMeasure>) -> Self {
        let mut m = EmpiricalMeasure::default();
        for part in parts {
            m.absorb(part);
        }
        m
    }

    pub fn absorb(&mut self, other: &EmpiricalMeasure) {
        for (&key, &c) in &other.counts {
            *self.counts.entry(key).or_default() += c;
        }
        self.samples += other.samples;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn count(&self, strategy: Strategy, level: Level) -> u64 {
        self.counts.get(&(strategy, level)).copied().unwrap_or(0)
    }

    pub fn weight(&self, strategy: Strategy, level: Level) -> f64 {
        self.count(strategy, level) as f64 / self.samples as f64
    }

    /// `(strategy, level, weight)` in increasing key order.
    pub fn atoms(&self) -> impl Iterator<Item = (Strategy, Level, f64)> + '_ {
        let n = self.samples as f64;
        self.counts.iter().map(move |(&(z, l), &c)| (z, l, c as f64 / n))
    }

    pub fn strategy_weight(&self, strategy: Strategy) -> f64 {
        let c: u64 = self
            .counts
            .range((strategy, Level::Alive(Wealth::from_ticks(i64::MIN)))..=(strategy, Level::Dead))
            .map(|(_, c)| c)
            .sum();
        c as f64 / self.samples as f64
    }

    /// Wealth law on the real line, with each dead atom placed at
    /// [`dead_wealth`]. Conditioning on a strategy renormalizes to that
    /// strategy's share.
    pub fn marginal(&self, game: &GameSpec, scale: Scale, conditioning: Conditioning) -> Result<WealthMarginal> {
        let atoms = self
            .counts
            .iter()
            .filter(|(&(z, _), _)| conditioning.admits(z))
            .map(|(&(z, level), &c)| {
                let w = match level {
                    Level::Alive(w) => w,
                    Level::Dead => dead_wealth(game, z),
                };
                (scale.to_f64(w), c as f64)
            })
            .collect();
        WealthMarginal::new(conditioning, atoms)
            .map_err(|_| Error::Usage(format!("empirical measure has no mass under {conditioning:?}")))
    }
}

/// Wealth assigned to the dead atom of `strategy` when a law is projected to
/// the real line: zero for the prisoner's dilemma, where death clamps the
/// wealth, and the strategy's death threshold otherwise.
pub fn dead_wealth(game: &GameSpec, strategy: Strategy) -> Wealth {
    match game {
        GameSpec::Pd(_) => Wealth::ZERO,
        GameSpec::General(g) => g.strategies()[strategy].death_threshold(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{PdPayoffs, COOPERATE, DEFECT};

    fn w(t: i64) -> Wealth {
        Wealth::from_ticks(t)
    }

    fn p(wealth: i64, strategy: Strategy, alive: bool) -> ParticleState {
        ParticleState { position: 0, wealth: w(wealth), strategy, alive }
    }

    #[test]
    fn identical_particles_give_one_atom() {
        let m = EmpiricalMeasure::from_particles(&[p(3, COOPERATE, true), p(3, COOPERATE, true)]);
        assert_eq!(m.atoms().collect::<Vec<_>>(), vec![(COOPERATE, Level::Alive(w(3)), 1.0)]);
    }

    #[test]
    fn dead_particles_share_an_atom() {
        let m = EmpiricalMeasure::from_particles(&[
            p(3, COOPERATE, true),
            p(0, DEFECT, false),
            p(3, COOPERATE, true),
            p(0, DEFECT, false),
        ]);
        assert_eq!(m.weight(COOPERATE, Level::Alive(w(3))), 0.5);
        assert_eq!(m.weight(DEFECT, Level::Dead), 0.5);
        assert_eq!(m.atoms().count(), 2);
        assert_eq!(m.strategy_weight(DEFECT), 0.5);
    }

    #[test]
    fn permutation_invariant() {
        let ps = vec![p(1, 0, true), p(2, 1, true), p(0, 1, false), p(5, 0, true)];
        let mut rev = ps.clone();
        rev.reverse();
        assert_eq!(EmpiricalMeasure::from_particles(&ps), EmpiricalMeasure::from_particles(&rev));
    }

    #[test]
    fn marginal_places_pd_dead_at_zero() {
        let g = GameSpec::Pd(PdPayoffs::new(w(2), w(3), w(4), w(1)).unwrap());
        let m = EmpiricalMeasure::from_particles(&[p(4, DEFECT, true), p(0, DEFECT, false), p(6, COOPERATE, true)]);
        let d = m.marginal(&g, Scale::new(2).unwrap(), Conditioning::Strategy(DEFECT)).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 0.5), (2.0, 0.5)]);
        assert!(m.marginal(&g, Scale::new(1).unwrap(), Conditioning::Strategy(5)).is_err());
    }
}
