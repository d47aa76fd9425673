//! Exact event-driven simulation of the spatial particle system.
//!
//! Every particle jumps at rate `d` (dead ones too, the motion has no alive
//! gate). Each unordered pair carries a game clock of rate `lambda`, but only
//! pairs that are alive and share a site can change the state, so the engine
//! keeps an index of alive particles per site and runs a single clock of rate
//! `lambda * colocated_pairs`. That is the law of the full per-pair clock
//! system with the null events removed.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{config, Error, Result};
use crate::game::{GameSpec, ParticleState};
use crate::graph::Space;
use crate::initial::{InitialMeasure, PositionLaw};
use crate::rng::{purpose, stream, SimRng};
use crate::sumtree::SumTree;
use crate::trajectory::{Engine, Event, EventKind, Trajectory};

const NOT_INDEXED: usize = usize::MAX;

/// How the particle array of a fresh system is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Particles(Vec<ParticleState>),
    /// I.i.d. draws of `(wealth, strategy)` and of the position.
    Product {
        measure: InitialMeasure,
        positions: PositionLaw,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRates {
    pub moves: f64,
    pub games: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct SpatialSystem {
    game: GameSpec,
    space: Space,
    particles: Vec<ParticleState>,
    d: f64,
    lambda: f64,
    site_members: Vec<Vec<usize>>,
    slot: Vec<usize>,
    pair_weights: SumTree,
    clock: f64,
    seed: u64,
    schedule: SimRng,
    outcome: SimRng,
}

fn pairs_of(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

pub(crate) fn check_rate(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return config(format!("{name} must be a finite nonnegative rate, got {value}"));
    }
    Ok(())
}

/// Builds a spatial system at time 0.
pub fn init_spatial(
    game: GameSpec,
    space: Space,
    n: usize,
    d: f64,
    lambda: f64,
    initial: Initial,
    seed: u64,
) -> Result<SpatialSystem> {
    if n == 0 {
        return config("N must be at least 1");
    }
    check_rate("d", d)?;
    check_rate("lambda", lambda)?;
    let particles = match initial {
        Initial::Particles(ps) => {
            if ps.len() != n {
                return config(format!("{} initial particles given for N = {n}", ps.len()));
            }
            for (k, p) in ps.iter().enumerate() {
                if p.position >= space.vertex_count() {
                    return config(format!("particle {k} is at vertex {} outside the graph", p.position));
                }
                game.check_strategy(p.strategy)?;
            }
            ps.into_iter().map(|p| game.settle(p)).collect()
        }
        Initial::Product { measure, positions } => {
            let sampler = positions.sampler(&space)?;
            let mut init_rng = stream(seed, &[purpose::INITIAL]);
            let mut pos_rng = stream(seed, &[purpose::POSITIONS]);
            (0..n)
                .map(|_| {
                    let (wealth, strategy) = measure.sample(&mut init_rng);
                    let position = sampler.sample(&mut pos_rng);
                    game.settle(ParticleState::new(position, wealth, strategy))
                })
                .collect()
        }
    };
    let vertices = space.vertex_count();
    let mut sys = SpatialSystem {
        game,
        space,
        particles,
        d,
        lambda,
        site_members: vec![Vec::new(); vertices],
        slot: vec![NOT_INDEXED; n],
        pair_weights: SumTree::new(vertices),
        clock: 0.0,
        seed,
        schedule: stream(seed, &[purpose::SCHEDULE]),
        outcome: stream(seed, &[purpose::OUTCOME]),
    };
    for i in 0..n {
        if sys.particles[i].alive {
            sys.index_insert(i);
        }
    }
    Ok(sys)
}

impl SpatialSystem {
    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// Number of alive unordered pairs sharing a site.
    pub fn colocated_pairs(&self) -> u64 {
        self.pair_weights.total()
    }

    pub fn event_rates(&self) -> EventRates {
        let moves = self.particles.len() as f64 * self.d;
        let games = self.lambda * self.colocated_pairs() as f64;
        EventRates { moves, games, total: moves + games }
    }

    /// Alive particle ids at `site`.
    pub fn site_members(&self, site: usize) -> &[usize] {
        &self.site_members[site]
    }

    fn index_insert(&mut self, i: usize) {
        let s = self.particles[i].position;
        self.slot[i] = self.site_members[s].len();
        self.site_members[s].push(i);
        self.pair_weights.set(s, pairs_of(self.site_members[s].len()));
    }

    fn index_remove(&mut self, i: usize) {
        let s = self.particles[i].position;
        let k = self.slot[i];
        debug_assert_ne!(k, NOT_INDEXED);
        let members = &mut self.site_members[s];
        members.swap_remove(k);
        if let Some(&moved) = members.get(k) {
            self.slot[moved] = k;
        }
        self.slot[i] = NOT_INDEXED;
        let len = members.len();
        self.pair_weights.set(s, pairs_of(len));
    }

    /// Full recount of the site index against the particle array.
    pub fn check_index(&self) -> Result<()> {
        let mut counts = vec![0usize; self.space.vertex_count()];
        for (i, p) in self.particles.iter().enumerate() {
            if p.alive {
                counts[p.position] += 1;
                let k = self.slot[i];
                if self.site_members[p.position].get(k) != Some(&i) {
                    return Err(Error::Usage(format!("particle {i} missing from site index")));
                }
            } else if self.slot[i] != NOT_INDEXED {
                return Err(Error::Usage(format!("dead particle {i} still indexed")));
            }
        }
        let mut pairs = 0;
        for (s, &c) in counts.iter().enumerate() {
            if self.site_members[s].len() != c || self.pair_weights.weight(s) != pairs_of(c) {
                return Err(Error::Usage(format!("site {s} count mismatch")));
            }
            pairs += pairs_of(c);
        }
        if pairs != self.colocated_pairs() {
            return Err(Error::Usage("co-located pair total mismatch".into()));
        }
        Ok(())
    }

    /// Runs to `horizon`; see [`Engine::run`].
    pub fn run(&mut self, horizon: f64, snapshot_times: &[f64]) -> Result<Trajectory> {
        Engine::run(self, horizon, snapshot_times, false)
    }

    pub fn run_logged(&mut self, horizon: f64, snapshot_times: &[f64]) -> Result<Trajectory> {
        Engine::run(self, horizon, snapshot_times, true)
    }
}

impl Engine for SpatialSystem {
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
        let rates = self.event_rates();
        if rates.total <= 0.0 {
            self.clock = horizon;
            return None;
        }
        let wait: f64 = Exp1.sample(&mut self.schedule);
        let time = self.clock + wait / rates.total;
        if time > horizon {
            self.clock = horizon;
            return None;
        }
        let u = self.schedule.random::<f64>() * rates.total;
        let kind = if u < rates.moves || rates.games <= 0.0 {
            let particle = self.schedule.random_range(0..self.particles.len());
            let from = self.particles[particle].position;
            let to = self.space.random_move(from, &mut self.schedule);
            EventKind::Move { particle, from, to }
        } else {
            let site = self.pair_weights.find(self.schedule.random_range(0..self.pair_weights.total()));
            let members = &self.site_members[site];
            let a = self.schedule.random_range(0..members.len());
            let mut b = self.schedule.random_range(0..members.len() - 1);
            if b >= a {
                b += 1;
            }
            let (i, j) = (members[a], members[b]);
            let (delta_i, delta_j) =
                self.game.play(self.particles[i].strategy, self.particles[j].strategy, &mut self.outcome);
            EventKind::Game { i, j, delta_i, delta_j }
        };
        Some(Event { time, kind })
    }

    fn apply(&mut self, event: &Event) {
        self.clock = event.time;
        match event.kind {
            EventKind::Move { particle, to, .. } => {
                if self.particles[particle].alive {
                    self.index_remove(particle);
                    self.particles[particle].position = to;
                    self.index_insert(particle);
                } else {
                    self.particles[particle].position = to;
                }
            }
            EventKind::Game { i, j, delta_i, delta_j } => {
                let (pi, pj) = (self.particles[i], self.particles[j]);
                assert!(pi.alive && pj.alive, "game between dead particles {i} and {j}");
                assert_eq!(pi.position, pj.position, "game between particles on different sites");
                self.particles[i] = self.game.apply_payoff(pi, delta_i);
                self.particles[j] = self.game.apply_payoff(pj, delta_j);
                for k in [i, j] {
                    if !self.particles[k].alive {
                        self.index_remove(k);
                    }
                }
            }
        }
        #[cfg(debug_assertions)]
        self.check_index().expect("site index out of sync");
    }
}

/// Fraction of `[0, t]` that particle `i` spends in `sites`, computed exactly
/// from the logged moves.
pub fn occupation_fraction(traj: &Trajectory, particle: usize, sites: &[usize], t: f64) -> Result<f64> {
    let mut sets = vec![None; traj.initial.len()];
    sets[particle] = Some(sites);
    product_occupation_fraction(traj, &sets, t)
}

/// Fraction of `[0, t]` during which every particle `i` with `sets[i] =
/// Some(S_i)` is simultaneously inside `S_i`.
pub fn product_occupation_fraction(traj: &Trajectory, sets: &[Option<&[usize]>], t: f64) -> Result<f64> {
    let events = traj
        .events
        .as_ref()
        .ok_or_else(|| Error::Usage("occupation needs a trajectory recorded with its event log".into()))?;
    if !(t > 0.0 && t <= traj.horizon) {
        return Err(Error::Usage(format!("occupation window {t} must lie in (0, {}]", traj.horizon)));
    }
    if sets.len() != traj.initial.len() {
        return Err(Error::Usage("one site set (or None) per particle required".into()));
    }
    let inside = |i: usize, pos: usize| sets[i].is_none_or(|s| s.contains(&pos));
    let mut positions: Vec<usize> = traj.initial.iter().map(|p| p.position).collect();
    let mut outside = positions.iter().enumerate().filter(|&(i, &p)| !inside(i, p)).count();
    let mut last = 0.0;
    let mut occupied = 0.0;
    for e in events.iter().take_while(|e| e.time <= t) {
        if let EventKind::Move { particle, to, .. } = e.kind {
            if outside == 0 {
                occupied += e.time - last;
            }
            last = e.time;
            let was = inside(particle, positions[particle]);
            positions[particle] = to;
            let now = inside(particle, to);
            match (was, now) {
                (true, false) => outside += 1,
                (false, true) => outside -= 1,
                _ => {}
            }
        }
    }
    if outside == 0 {
        occupied += t - last;
    }
    Ok(occupied / t)
}
