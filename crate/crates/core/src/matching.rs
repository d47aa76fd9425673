//! Random matching: every alive unordered pair plays at the same rate, with
//! no spatial structure. The slowed variant divides the pair rate by `N`,
//! which is exactly the time change `t -> t / N`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{config, Result};
use crate::game::{GameSpec, ParticleState};
use crate::initial::{sample_particles, InitialMeasure};
use crate::rng::{purpose, stream, SimRng};
use crate::spatial::check_rate;
use crate::trajectory::{Engine, Event, EventKind, Trajectory};

const NOT_ALIVE: usize = usize::MAX;

/// Initial population of a matching system.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchingInitial {
    Particles(Vec<ParticleState>),
    /// `N` i.i.d. draws from the measure.
    Product(InitialMeasure),
}

#[derive(Debug, Clone)]
pub struct MatchingSystem {
    game: GameSpec,
    particles: Vec<ParticleState>,
    pair_rate: f64,
    alive: Vec<usize>,
    slot: Vec<usize>,
    alive_by_strategy: Vec<usize>,
    clock: f64,
    seed: u64,
    schedule: SimRng,
    outcome: SimRng,
}

/// Builds a matching system. `base_rate` is the homogenized per-pair rate
/// `lambda * collision_mass`; with `slowed` the pair rate is `base_rate / N`.
pub fn init_matching(
    game: GameSpec,
    n: usize,
    base_rate: f64,
    slowed: bool,
    initial: MatchingInitial,
    seed: u64,
) -> Result<MatchingSystem> {
    if n == 0 {
        return config("N must be at least 1");
    }
    check_rate("pair rate", base_rate)?;
    let particles: Vec<ParticleState> = match initial {
        MatchingInitial::Particles(ps) => {
            if ps.len() != n {
                return config(format!("{} initial particles given for N = {n}", ps.len()));
            }
            for p in &ps {
                game.check_strategy(p.strategy)?;
            }
            ps.into_iter().map(|p| game.settle(p)).collect()
        }
        MatchingInitial::Product(measure) => {
            sample_particles(&measure, &game, n, &mut stream(seed, &[purpose::INITIAL]))
        }
    };
    let pair_rate = if slowed { base_rate / n as f64 } else { base_rate };
    let mut alive = Vec::with_capacity(n);
    let mut slot = vec![NOT_ALIVE; n];
    let mut alive_by_strategy = vec![0; game.strategy_count()];
    for (i, p) in particles.iter().enumerate() {
        if p.alive {
            slot[i] = alive.len();
            alive.push(i);
            alive_by_strategy[p.strategy] += 1;
        }
    }
    Ok(MatchingSystem {
        game,
        particles,
        pair_rate,
        alive,
        slot,
        alive_by_strategy,
        clock: 0.0,
        seed,
        schedule: stream(seed, &[purpose::SCHEDULE]),
        outcome: stream(seed, &[purpose::OUTCOME]),
    })
}

impl MatchingSystem {
    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn pair_rate(&self) -> f64 {
        self.pair_rate
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn alive_by_strategy(&self) -> &[usize] {
        &self.alive_by_strategy
    }

    /// `pair_rate * C(alive, 2)`.
    pub fn total_rate(&self) -> f64 {
        let a = self.alive.len() as f64;
        self.pair_rate * a * (a - 1.0) / 2.0
    }

    fn kill(&mut self, i: usize) {
        let k = self.slot[i];
        self.alive.swap_remove(k);
        if let Some(&moved) = self.alive.get(k) {
            self.slot[moved] = k;
        }
        self.slot[i] = NOT_ALIVE;
        self.alive_by_strategy[self.particles[i].strategy] -= 1;
    }

    pub fn run(&mut self, horizon: f64, snapshot_times: &[f64]) -> Result<Trajectory> {
        Engine::run(self, horizon, snapshot_times, false)
    }

    pub fn run_logged(&mut self, horizon: f64, snapshot_times: &[f64]) -> Result<Trajectory> {
        Engine::run(self, horizon, snapshot_times, true)
    }
}

impl Engine for MatchingSystem {
    fn clock(&self) -> f64 {
        self.clock
    }

    fn particles(&self) -> &[ParticleState] {
        &self.particles
    }

    fn strategy_count(&self) -> usize {
        self.game.strategy_count()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn propose(&mut self, horizon: f64) -> Option<Event> {
        let total = self.total_rate();
        if total <= 0.0 {
            self.clock = horizon;
            return None;
        }
        let wait: f64 = Exp1.sample(&mut self.schedule);
        let time = self.clock + wait / total;
        if time > horizon {
            self.clock = horizon;
            return None;
        }
        let n = self.alive.len();
        let a = self.schedule.random_range(0..n);
        let mut b = self.schedule.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (self.alive[a], self.alive[b]);
        let (delta_i, delta_j) =
            self.game.play(self.particles[i].strategy, self.particles[j].strategy, &mut self.outcome);
        Some(Event { time, kind: EventKind::Game { i, j, delta_i, delta_j } })
    }

    fn apply(&mut self, event: &Event) {
        self.clock = event.time;
        match event.kind {
            EventKind::Game { i, j, delta_i, delta_j } => {
                let (pi, pj) = (self.particles[i], self.particles[j]);
                assert!(pi.alive && pj.alive, "game between dead particles {i} and {j}");
                self.particles[i] = self.game.apply_payoff(pi, delta_i);
                self.particles[j] = self.game.apply_payoff(pj, delta_j);
                for k in [i, j] {
                    if !self.particles[k].alive {
                        self.kill(k);
                    }
                }
            }
            EventKind::Move { .. } => panic!("random matching has no motion"),
        }
    }
}
