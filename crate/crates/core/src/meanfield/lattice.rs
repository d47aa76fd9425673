//! Reachable wealth lattice of the mean-field law.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{config, Error, Result};
use crate::game::{GameSpec, Strategy, COOPERATE, DEFECT};
use crate::initial::InitialMeasure;
use crate::wealth::Wealth;

/// One way a focal particle's wealth can change: against a partner of
/// strategy `partner`, with conditional probability `weight`, by `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub partner: Strategy,
    pub weight: f64,
    pub delta: Wealth,
}

/// Nonzero wealth changes of a focal particle of strategy `focal`. Games that
/// leave the focal wealth unchanged are dropped; they do not move mass.
pub fn jumps(game: &GameSpec, focal: Strategy) -> Vec<Jump> {
    match game {
        GameSpec::Pd(p) => match focal {
            COOPERATE => vec![
                Jump { partner: COOPERATE, weight: 1.0, delta: p.reward },
                Jump { partner: DEFECT, weight: 1.0, delta: -p.sucker },
            ],
            DEFECT => vec![
                Jump { partner: COOPERATE, weight: 1.0, delta: p.temptation },
                Jump { partner: DEFECT, weight: 0.5, delta: -p.double_punishment() },
            ],
            _ => panic!("prisoner's dilemma strategy out of range: {focal}"),
        },
        GameSpec::General(g) => {
            let mine = &g.strategies()[focal];
            let mut out = Vec::new();
            for (k, theirs) in g.strategies().iter().enumerate() {
                let mut by_delta: BTreeMap<Wealth, f64> = BTreeMap::new();
                for b in 0..g.actions() {
                    for own in 0..g.actions() {
                        let w = theirs.weight_f64(b) * mine.weight_f64(own);
                        let delta = g.payoff(own, b);
                        if w > 0.0 && delta != Wealth::ZERO {
                            *by_delta.entry(delta).or_default() += w;
                        }
                    }
                }
                out.extend(by_delta.into_iter().map(|(delta, weight)| Jump { partner: k, weight, delta }));
            }
            out
        }
    }
}

/// `P(Poisson(mu) > k)` for every `k` up to where it underflows.
fn poisson_tails(mu: f64) -> Vec<f64> {
    if mu <= 0.0 {
        return vec![0.0];
    }
    let upper = (mu + 40.0 * mu.sqrt() + 60.0).ceil() as usize;
    let mut log_fact = 0.0;
    let mut pmf = Vec::with_capacity(upper + 1);
    for j in 0..=upper {
        if j > 0 {
            log_fact += (j as f64).ln();
        }
        pmf.push((-mu + j as f64 * mu.ln() - log_fact).exp());
    }
    let mut tails = vec![0.0; upper + 1];
    let mut acc = 0.0;
    for k in (0..upper).rev() {
        acc += pmf[k + 1];
        tails[k] = acc;
    }
    tails
}

/// Smallest `k` with `P(Poisson(mu) > k) < bound`, and that tail.
pub fn poisson_cutoff(mu: f64, bound: f64) -> (usize, f64) {
    let tails = poisson_tails(mu);
    tails.iter().enumerate().find(|&(_, &t)| t < bound).map(|(k, &t)| (k, t)).unwrap_or((tails.len() - 1, 0.0))
}

/// Alive wealth levels per strategy, reachable within `k_max` games.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    levels: Vec<Vec<Wealth>>,
    index: Vec<HashMap<Wealth, usize>>,
    active: Vec<bool>,
    k_max: usize,
    truncation_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    pub horizon: f64,
    /// Mean-field rate constant.
    pub kappa: f64,
    /// Total probability budget for states left off the lattice.
    pub epsilon: f64,
    pub max_states: usize,
}

/// Enumerates the reachable lattice.
///
/// A particle plays at total rate at most `kappa`, so its game count by the
/// horizon is dominated by `Poisson(kappa * horizon)`; every state needing
/// more than `k_max` games, with `P(Poisson > k_max) < epsilon / 10`, is
/// dropped.
pub fn build_lattice(game: &GameSpec, initial: &InitialMeasure, params: LatticeParams) -> Result<LatticeSpec> {
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return config(format!("truncation epsilon must lie in (0, 1), got {}", params.epsilon));
    }
    if !(params.horizon >= 0.0 && params.horizon.is_finite()) {
        return config("horizon must be finite and nonnegative");
    }
    if !(params.kappa >= 0.0 && params.kappa.is_finite()) {
        return config("kappa must be finite and nonnegative");
    }
    let (k_max, truncation_bound) = poisson_cutoff(params.kappa * params.horizon, params.epsilon / 10.0);

    let strategies = game.strategy_count();
    let mut active = vec![false; strategies];
    let mut seeds: Vec<Vec<Wealth>> = vec![Vec::new(); strategies];
    for atom in initial.atoms() {
        if *atom.prob.numer() == 0 || game.in_death_domain(atom.strategy, atom.wealth) {
            continue;
        }
        active[atom.strategy] = true;
        seeds[atom.strategy].push(atom.wealth);
    }

    let mut levels = Vec::with_capacity(strategies);
    let mut total = 0usize;
    for z in 0..strategies {
        let moves: Vec<Jump> = jumps(game, z).into_iter().filter(|j| active[j.partner]).collect();
        let mut depth: HashMap<Wealth, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for &w in &seeds[z] {
            if depth.insert(w, 0).is_none() {
                queue.push_back(w);
            }
        }
        while let Some(w) = queue.pop_front() {
            let d = depth[&w];
            if d == k_max {
                continue;
            }
            for j in &moves {
                let next = w.checked_add(j.delta)?;
                if game.in_death_domain(z, next) || depth.contains_key(&next) {
                    continue;
                }
                depth.insert(next, d + 1);
                queue.push_back(next);
                if total + depth.len() > params.max_states {
                    return Err(Error::LatticeTooLarge { size: total + depth.len(), cap: params.max_states });
                }
            }
        }
        let mut ws: Vec<Wealth> = depth.into_keys().collect();
        ws.sort_unstable();
        total += ws.len();
        levels.push(ws);
    }
    if total > params.max_states {
        return Err(Error::LatticeTooLarge { size: total, cap: params.max_states });
    }
    let index = levels.iter().map(|ws| ws.iter().enumerate().map(|(i, &w)| (w, i)).collect()).collect();
    Ok(LatticeSpec { levels, index, active, k_max, truncation_bound })
}

impl LatticeSpec {
    pub fn strategy_count(&self) -> usize {
        self.levels.len()
    }

    /// Sorted alive wealth levels of strategy `z`.
    pub fn levels(&self, z: Strategy) -> &[Wealth] {
        &self.levels[z]
    }

    pub fn position(&self, z: Strategy, w: Wealth) -> Option<usize> {
        self.index[z].get(&w).copied()
    }

    /// Whether strategy `z` carries alive mass initially.
    pub fn is_active(&self, z: Strategy) -> bool {
        self.active[z]
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `P(Poisson(kappa * horizon) > k_max)`, an upper bound on the mass
    /// that can leave the lattice before the horizon.
    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GeneralGame, MixedStrategy, PdPayoffs};
    use crate::initial::Atom;
    use num_rational::Ratio;

    fn w(t: i64) -> Wealth {
        Wealth::from_ticks(t)
    }

    fn pd() -> GameSpec {
        GameSpec::Pd(PdPayoffs::new(w(2), w(3), w(4), w(1)).unwrap())
    }

    fn params(horizon: f64) -> LatticeParams {
        LatticeParams { horizon, kappa: 1.0, epsilon: 1e-10, max_states: 100_000 }
    }

    #[test]
    fn poisson_cutoff_bounds_tail() {
        let (k, tail) = poisson_cutoff(2.0, 1e-11);
        assert!(tail < 1e-11);
        // the previous cutoff must not satisfy the bound
        let tails = poisson_tails(2.0);
        assert!(tails[k - 1] >= 1e-11);
        // P(Poisson(2) > 0) = 1 - e^-2
        assert!((tails[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn cooperators_only_grow() {
        let m = InitialMeasure::dirac(w(1), COOPERATE, &pd()).unwrap();
        let lat = build_lattice(&pd(), &m, params(2.0)).unwrap();
        let k = lat.k_max();
        let expected: Vec<Wealth> = (0..=k as i64).map(|j| w(1 + 2 * j)).collect();
        assert_eq!(lat.levels(COOPERATE), expected.as_slice());
        assert!(lat.levels(DEFECT).is_empty());
    }

    #[test]
    fn defectors_only_shrink_to_death() {
        let m = InitialMeasure::dirac(w(7), DEFECT, &pd()).unwrap();
        let lat = build_lattice(&pd(), &m, params(5.0)).unwrap();
        assert_eq!(lat.levels(DEFECT), &[w(1), w(3), w(5), w(7)]);
    }

    #[test]
    fn mixed_lattice_is_closed_under_one_step() {
        let g = pd();
        let atoms = vec![
            Atom { wealth: w(4), strategy: COOPERATE, prob: Ratio::new(1, 2) },
            Atom { wealth: w(4), strategy: DEFECT, prob: Ratio::new(1, 2) },
        ];
        let m = InitialMeasure::new(atoms, &g).unwrap();
        let lat = build_lattice(&g, &m, params(1.0)).unwrap();
        for z in 0..2 {
            let moves = jumps(&g, z);
            // every listed state within k_max - 1 games of an atom has all successors listed
            let reach = |y: Wealth| {
                (0..=lat.k_max()).any(|a| {
                    (0..=lat.k_max() - a).any(|b| {
                        let (up, down) = if z == 0 { (2, 3) } else { (4, 2) };
                        y.ticks() == 4 + up * a as i64 - down * b as i64 && a + b < lat.k_max()
                    })
                })
            };
            for &y in lat.levels(z) {
                if !reach(y) {
                    continue;
                }
                for j in &moves {
                    let t = y.checked_add(j.delta).unwrap();
                    assert!(g.in_death_domain(z, t) || lat.position(z, t).is_some(), "{z} {y} -> {t}");
                }
            }
        }
    }

    #[test]
    fn lattice_cap_is_enforced() {
        let g = pd();
        let atoms = vec![
            Atom { wealth: w(40), strategy: COOPERATE, prob: Ratio::new(1, 2) },
            Atom { wealth: w(40), strategy: DEFECT, prob: Ratio::new(1, 2) },
        ];
        let m = InitialMeasure::new(atoms, &g).unwrap();
        let p = LatticeParams { max_states: 50, ..params(10.0) };
        assert!(matches!(build_lattice(&g, &m, p), Err(Error::LatticeTooLarge { .. })));
    }

    #[test]
    fn general_jumps_use_focal_row() {
        // focal strategy 1 plays action 1; partner strategy 0 plays action 0:
        // focal payoff is G(1, 0)
        let g = GeneralGame::new(
            vec![vec![w(1), w(2)], vec![w(3), w(4)]],
            vec![MixedStrategy::pure(2, 0, w(0)).unwrap(), MixedStrategy::pure(2, 1, w(0)).unwrap()],
        )
        .unwrap();
        let js = jumps(&GameSpec::General(g), 1);
        assert_eq!(js[0], Jump { partner: 0, weight: 1.0, delta: w(3) });
        assert_eq!(js[1], Jump { partner: 1, weight: 1.0, delta: w(4) });
    }
}
