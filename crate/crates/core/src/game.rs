//! Particle state, payoff resolution and death absorption.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::wealth::Wealth;

/// Strategy index. In prisoner's dilemma mode `0` cooperates and `1` defects;
/// in general mode it indexes the game's mixed strategies.
pub type Strategy = usize;

pub const COOPERATE: Strategy = 0;
pub const DEFECT: Strategy = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: usize,
    pub wealth: Wealth,
    pub strategy: Strategy,
    pub alive: bool,
}

impl ParticleState {
    pub fn new(position: usize, wealth: Wealth, strategy: Strategy) -> Self {
        ParticleState { position, wealth, strategy, alive: true }
    }
}

/// Prisoner's dilemma payoff magnitudes. A cooperator facing a defector loses
/// `sucker`; a losing defector in a mutual-defection game loses `2 * punishment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdPayoffs {
    pub reward: Wealth,
    pub sucker: Wealth,
    pub temptation: Wealth,
    pub punishment: Wealth,
}

impl PdPayoffs {
    /// Validates `T > R > 0` and `S > P > 0`.
    pub fn new(reward: Wealth, sucker: Wealth, temptation: Wealth, punishment: Wealth) -> Result<Self> {
        if !reward.is_positive() {
            return config("payoffs.R must be positive");
        }
        if temptation <= reward {
            return config("payoffs.T must exceed payoffs.R");
        }
        if !punishment.is_positive() {
            return config("payoffs.P must be positive");
        }
        if sucker <= punishment {
            return config("payoffs.S must exceed payoffs.P");
        }
        // 2P must stay representable
        punishment.checked_mul(2)?;
        Ok(PdPayoffs { reward, sucker, temptation, punishment })
    }

    pub fn double_punishment(&self) -> Wealth {
        Wealth::from_ticks(self.punishment.ticks() * 2)
    }
}

/// Result of the coin tossed by nature when both players defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coin {
    /// The first player loses `2P`.
    Head,
    /// The second player loses `2P`.
    Tail,
}

/// Payoff pair for one prisoner's dilemma game. The coin is only read when
/// both players defect.
pub fn pd_outcome(payoffs: &PdPayoffs, z_i: Strategy, z_j: Strategy, coin: Coin) -> (Wealth, Wealth) {
    match (z_i, z_j) {
        (COOPERATE, COOPERATE) => (payoffs.reward, payoffs.reward),
        (COOPERATE, DEFECT) => (-payoffs.sucker, payoffs.temptation),
        (DEFECT, COOPERATE) => (payoffs.temptation, -payoffs.sucker),
        (DEFECT, DEFECT) => match coin {
            Coin::Head => (-payoffs.double_punishment(), Wealth::ZERO),
            Coin::Tail => (Wealth::ZERO, -payoffs.double_punishment()),
        },
        _ => panic!("prisoner's dilemma strategy out of range: ({z_i}, {z_j})"),
    }
}

/// A fixed mixed strategy over the actions of a [`GeneralGame`] and its death
/// domain `(-inf, death_threshold]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    weights: Vec<Ratio<i64>>,
    cumulative: Vec<f64>,
    death_threshold: Wealth,
}

impl MixedStrategy {
    pub fn new(weights: Vec<Ratio<i64>>, death_threshold: Wealth) -> Result<Self> {
        if weights.is_empty() {
            return config("mixed strategy has no actions");
        }
        if weights.iter().any(|w| w.is_negative()) {
            return config("mixed strategy weights must be nonnegative");
        }
        let mut total = Ratio::<i64>::zero();
        for w in &weights {
            total += *w;
        }
        if !total.is_one() {
            return config(format!("mixed strategy weights sum to {total}, not 1"));
        }
        let mut acc = Ratio::<i64>::zero();
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += *w;
                *acc.numer() as f64 / *acc.denom() as f64
            })
            .collect();
        Ok(MixedStrategy { weights, cumulative, death_threshold })
    }

    /// The pure strategy that always plays `action`.
    pub fn pure(actions: usize, action: usize, death_threshold: Wealth) -> Result<Self> {
        let weights = (0..actions).map(|b| if b == action { Ratio::one() } else { Ratio::zero() }).collect();
        MixedStrategy::new(weights, death_threshold)
    }

    pub fn weights(&self) -> &[Ratio<i64>] {
        &self.weights
    }

    pub fn weight_f64(&self, action: usize) -> f64 {
        let w = self.weights[action];
        *w.numer() as f64 / *w.denom() as f64
    }

    pub fn death_threshold(&self) -> Wealth {
        self.death_threshold
    }

    /// Inverts the cumulative weights at `u ∈ [0, 1)`, scanning actions in
    /// index order.
    pub fn sample_action(&self, u: f64) -> usize {
        self.cumulative.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u rounded past the last cumulative weight; take the last action with mass
            self.weights.iter().rposition(|w| !w.is_zero()).unwrap_or(0)
        })
    }
}

/// A symmetric game `(G, Gᵀ)` with fixed mixed strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralGame {
    matrix: Vec<Vec<Wealth>>,
    strategies: Vec<MixedStrategy>,
}

impl GeneralGame {
    pub fn new(matrix: Vec<Vec<Wealth>>, strategies: Vec<MixedStrategy>) -> Result<Self> {
        let a = matrix.len();
        if a == 0 {
            return config("game.matrix is empty");
        }
        if matrix.iter().any(|row| row.len() != a) {
            return config("game.matrix must be square");
        }
        if strategies.is_empty() {
            return config("game.strategies is empty");
        }
        for (l, s) in strategies.iter().enumerate() {
            if s.weights.len() != a {
                return config(format!("game.strategies[{l}].alpha has {} weights for {a} actions", s.weights.len()));
            }
        }
        Ok(GeneralGame { matrix, strategies })
    }

    pub fn actions(&self) -> usize {
        self.matrix.len()
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    /// Payoff to a player choosing `own` against a player choosing `other`.
    pub fn payoff(&self, own: usize, other: usize) -> Wealth {
        self.matrix[own][other]
    }

    pub fn matrix(&self) -> &[Vec<Wealth>] {
        &self.matrix
    }

    /// Payoff pair when `l_i` meets `l_j`, with actions drawn from `u_i`, `u_j`.
    pub fn outcome(&self, l_i: Strategy, l_j: Strategy, u_i: f64, u_j: f64) -> (Wealth, Wealth) {
        let b = self.strategies[l_i].sample_action(u_i);
        let b2 = self.strategies[l_j].sample_action(u_j);
        (self.matrix[b][b2], self.matrix[b2][b])
    }

    /// The two-action matrix `[[R, -S], [T, 0]]` with pure cooperate/defect
    /// strategies and death domains `(-inf, 0]`. It agrees with the prisoner's
    /// dilemma on every profile except mutual defection.
    pub fn pd_embedding(p: &PdPayoffs) -> Self {
        let matrix = vec![vec![p.reward, -p.sucker], vec![p.temptation, Wealth::ZERO]];
        let strategies = (0..2).map(|b| MixedStrategy::pure(2, b, Wealth::ZERO).expect("pure strategy")).collect();
        GeneralGame { matrix, strategies }
    }
}

pub fn general_outcome(game: &GeneralGame, l_i: Strategy, l_j: Strategy, u_i: f64, u_j: f64) -> (Wealth, Wealth) {
    game.outcome(l_i, l_j, u_i, u_j)
}

/// Which game the particles play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GameSpec {
    Pd(PdPayoffs),
    General(GeneralGame),
}

impl GameSpec {
    pub fn strategy_count(&self) -> usize {
        match self {
            GameSpec::Pd(_) => 2,
            GameSpec::General(g) => g.strategies.len(),
        }
    }

    pub fn is_pd(&self) -> bool {
        matches!(self, GameSpec::Pd(_))
    }

    /// Whether `wealth` lies in the death domain of `strategy`.
    pub fn in_death_domain(&self, strategy: Strategy, wealth: Wealth) -> bool {
        match self {
            GameSpec::Pd(_) => !wealth.is_positive(),
            GameSpec::General(g) => wealth <= g.strategies[strategy].death_threshold,
        }
    }

    /// Brings a freshly configured particle in line with the death rule.
    pub fn settle(&self, mut p: ParticleState) -> ParticleState {
        if self.in_death_domain(p.strategy, p.wealth) {
            p.alive = false;
            if self.is_pd() {
                p.wealth = Wealth::ZERO;
            }
        } else {
            p.alive = true;
        }
        p
    }

    pub fn check_strategy(&self, strategy: Strategy) -> Result<()> {
        if strategy >= self.strategy_count() {
            return config(format!("strategy {strategy} out of range (game has {} strategies)", self.strategy_count()));
        }
        Ok(())
    }

    /// Samples one game between strategies `z_i` and `z_j`.
    pub fn play<R: Rng + ?Sized>(&self, z_i: Strategy, z_j: Strategy, rng: &mut R) -> (Wealth, Wealth) {
        match self {
            GameSpec::Pd(p) => {
                let coin = if z_i == DEFECT && z_j == DEFECT {
                    if rng.random::<bool>() {
                        Coin::Head
                    } else {
                        Coin::Tail
                    }
                } else {
                    Coin::Head
                };
                pd_outcome(p, z_i, z_j, coin)
            }
            GameSpec::General(g) => {
                let u_i: f64 = rng.random();
                let u_j: f64 = rng.random();
                g.outcome(z_i, z_j, u_i, u_j)
            }
        }
    }

    /// Adds `delta` to a live particle and applies death absorption.
    ///
    /// In prisoner's dilemma mode a nonpositive result is clamped to zero; in
    /// general mode the wealth that entered the death domain is kept frozen.
    ///
    /// # Panics
    /// If the particle is already dead, or on wealth overflow.
    pub fn apply_payoff(&self, p: ParticleState, delta: Wealth) -> ParticleState {
        assert!(p.alive, "payoff applied to a dead particle");
        let wealth = p.wealth.checked_add(delta).expect("wealth overflow");
        let mut next = ParticleState { wealth, ..p };
        if self.in_death_domain(p.strategy, wealth) {
            next.alive = false;
            if self.is_pd() {
                next.wealth = Wealth::ZERO;
            }
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(t: i64) -> Wealth {
        Wealth::from_ticks(t)
    }

    fn payoffs() -> PdPayoffs {
        PdPayoffs::new(w(2), w(3), w(4), w(1)).unwrap()
    }

    #[test]
    fn pd_outcome_table() {
        let p = payoffs();
        assert_eq!(pd_outcome(&p, COOPERATE, COOPERATE, Coin::Tail), (w(2), w(2)));
        assert_eq!(pd_outcome(&p, DEFECT, COOPERATE, Coin::Head), (w(4), w(-3)));
        assert_eq!(pd_outcome(&p, COOPERATE, DEFECT, Coin::Head), (w(-3), w(4)));
        assert_eq!(pd_outcome(&p, DEFECT, DEFECT, Coin::Head), (w(-2), w(0)));
        assert_eq!(pd_outcome(&p, DEFECT, DEFECT, Coin::Tail), (w(0), w(-2)));
    }

    #[test]
    fn payoff_inequalities() {
        assert!(PdPayoffs::new(w(2), w(3), w(2), w(1)).is_err());
        assert!(PdPayoffs::new(w(2), w(1), w(4), w(1)).is_err());
        assert!(PdPayoffs::new(w(0), w(3), w(4), w(1)).is_err());
        assert!(PdPayoffs::new(w(2), w(3), w(4), w(0)).is_err());
    }

    #[test]
    fn general_pure_strategies() {
        let g = GeneralGame::new(
            vec![vec![w(1), w(2), w(3)], vec![w(4), w(5), w(6)], vec![w(7), w(8), w(9)]],
            vec![MixedStrategy::pure(3, 1, w(0)).unwrap(), MixedStrategy::pure(3, 2, w(0)).unwrap()],
        )
        .unwrap();
        assert_eq!(general_outcome(&g, 0, 1, 0.7, 0.1), (w(6), w(8)));
    }

    #[test]
    fn cdf_inversion() {
        let s = MixedStrategy::new(vec![Ratio::new(1, 2), Ratio::new(1, 2)], w(0)).unwrap();
        assert_eq!(s.sample_action(0.25), 0);
        assert_eq!(s.sample_action(0.5), 1);
        assert_eq!(s.sample_action(0.999), 1);
        let skewed = MixedStrategy::new(vec![Ratio::new(1, 3), Ratio::zero(), Ratio::new(2, 3)], w(0)).unwrap();
        assert_eq!(skewed.sample_action(0.4), 2);
    }

    #[test]
    fn pd_embedding_matches_non_dd_profiles() {
        let p = payoffs();
        let g = GeneralGame::pd_embedding(&p);
        for (zi, zj) in [(0, 0), (0, 1), (1, 0)] {
            assert_eq!(general_outcome(&g, zi, zj, 0.3, 0.9), pd_outcome(&p, zi, zj, Coin::Head));
        }
        assert_eq!(general_outcome(&g, COOPERATE, DEFECT, 0.0, 0.0), (w(-3), w(4)));
    }

    #[test]
    fn mixed_strategy_validation() {
        assert!(MixedStrategy::new(vec![Ratio::new(1, 2), Ratio::new(1, 3)], w(0)).is_err());
        assert!(MixedStrategy::new(vec![Ratio::new(3, 2), Ratio::new(-1, 2)], w(0)).is_err());
        let bad_dims = GeneralGame::new(vec![vec![w(1)]], vec![MixedStrategy::pure(2, 0, w(0)).unwrap()]);
        assert!(bad_dims.is_err());
    }

    #[test]
    fn apply_payoff_examples() {
        let pd = GameSpec::Pd(payoffs());
        let p = ParticleState::new(0, w(5), COOPERATE);
        assert_eq!(pd.apply_payoff(p, w(-2)), ParticleState { wealth: w(3), ..p });

        let poor = ParticleState::new(0, w(1), COOPERATE);
        let dead = pd.apply_payoff(poor, w(-3));
        assert_eq!(dead.wealth, w(0));
        assert!(!dead.alive);

        let general = GameSpec::General(GeneralGame::pd_embedding(&payoffs()));
        let frozen = general.apply_payoff(ParticleState::new(0, w(1), COOPERATE), w(-4));
        assert_eq!(frozen.wealth, w(-3));
        assert!(!frozen.alive);
    }

    #[test]
    #[should_panic(expected = "dead particle")]
    fn payoff_on_dead_particle_panics() {
        let pd = GameSpec::Pd(payoffs());
        let mut p = ParticleState::new(0, w(0), COOPERATE);
        p.alive = false;
        pd.apply_payoff(p, w(1));
    }
}
