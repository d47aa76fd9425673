//! Events, snapshots and the shared run loop of the stochastic engines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ParticleState;
use crate::wealth::Wealth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Move {
        particle: usize,
        from: usize,
        to: usize,
    },
    /// A game between `i` and `j` with the payoffs they received.
    Game {
        i: usize,
        j: usize,
        delta_i: Wealth,
        delta_j: Wealth,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    /// The same event with particle labels mapped through `sigma`.
    pub fn relabel(&self, sigma: &[usize]) -> Event {
        let kind = match self.kind {
            EventKind::Move { particle, from, to } => EventKind::Move { particle: sigma[particle], from, to },
            EventKind::Game { i, j, delta_i, delta_j } => {
                EventKind::Game { i: sigma[i], j: sigma[j], delta_i, delta_j }
            }
        };
        Event { time: self.time, kind }
    }
}

/// Event tallies. Games are counted by unordered strategy profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub moves: u64,
    strategies: usize,
    games: Vec<u64>,
}

impl EventCounts {
    pub fn new(strategies: usize) -> Self {
        EventCounts { moves: 0, strategies, games: vec![0; strategies * strategies] }
    }

    pub fn record_game(&mut self, z_i: usize, z_j: usize) {
        let (a, b) = if z_i <= z_j { (z_i, z_j) } else { (z_j, z_i) };
        self.games[a * self.strategies + b] += 1;
    }

    /// Games played between strategies `a` and `b` (either order).
    pub fn games(&self, a: usize, b: usize) -> u64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.games[a * self.strategies + b]
    }

    pub fn total_games(&self) -> u64 {
        self.games.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub particles: Vec<ParticleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub initial: Vec<ParticleState>,
    pub snapshots: Vec<Snapshot>,
    pub counts: EventCounts,
    pub games_per_particle: Vec<u64>,
    /// Full event log, kept only when requested.
    pub events: Option<Vec<Event>>,
    pub horizon: f64,
}

/// An exact event-driven engine.
pub trait Engine {
    fn clock(&self) -> f64;
    fn particles(&self) -> &[ParticleState];
    fn strategy_count(&self) -> usize;
    fn seed(&self) -> u64;

    /// Samples the next event without applying it. If it would occur after
    /// `horizon` (or never), the clock is set to `horizon` and `None` is
    /// returned; by memorylessness the discarded draw does not bias the law.
    fn propose(&mut self, horizon: f64) -> Option<Event>;

    /// Applies an event and moves the clock to its time. Used both for
    /// sampled events and for replaying a recorded stream.
    fn apply(&mut self, event: &Event);

    fn step_until(&mut self, horizon: f64) -> Option<Event> {
        let event = self.propose(horizon)?;
        self.apply(&event);
        Some(event)
    }

    /// Samples and applies the next event, or returns `None` if the total
    /// rate is zero.
    fn advance(&mut self) -> Option<Event> {
        self.step_until(f64::INFINITY)
    }

    /// Runs to `horizon`, recording the state at every `snapshot_times`
    /// entry. Snapshots are right-continuous: an event at exactly a snapshot
    /// time is included.
    fn run(&mut self, horizon: f64, snapshot_times: &[f64], record_events: bool) -> Result<Trajectory>
    where
        Self: Sized,
    {
        validate_snapshot_times(self.clock(), horizon, snapshot_times)?;
        let initial = self.particles().to_vec();
        let mut counts = EventCounts::new(self.strategy_count());
        let mut games_per_particle = vec![0; initial.len()];
        let mut events = record_events.then(Vec::new);
        let mut snapshots = Vec::with_capacity(snapshot_times.len());
        let mut pending = snapshot_times.iter().copied().peekable();

        loop {
            let event = self.propose(horizon);
            let event_time = event.map_or(f64::INFINITY, |e| e.time);
            while let Some(&t) = pending.peek() {
                if t < event_time {
                    snapshots.push(Snapshot { time: t, particles: self.particles().to_vec() });
                    pending.next();
                } else {
                    break;
                }
            }
            let Some(event) = event else { break };
            match event.kind {
                EventKind::Move { .. } => counts.moves += 1,
                EventKind::Game { i, j, .. } => {
                    let ps = self.particles();
                    counts.record_game(ps[i].strategy, ps[j].strategy);
                    games_per_particle[i] += 1;
                    games_per_particle[j] += 1;
                }
            }
            self.apply(&event);
            if let Some(log) = events.as_mut() {
                log.push(event);
            }
        }

        Ok(Trajectory { seed: self.seed(), initial, snapshots, counts, games_per_particle, events, horizon })
    }
}

fn validate_snapshot_times(start: f64, horizon: f64, times: &[f64]) -> Result<()> {
    if !(horizon >= start) {
        return Err(Error::Usage(format!("horizon {horizon} is before the current time {start}")));
    }
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Usage("snapshot times must be sorted".into()));
    }
    if times.iter().any(|&t| !(t >= start && t <= horizon)) {
        return Err(Error::Usage(format!("snapshot times must lie in [{start}, {horizon}]")));
    }
    Ok(())
}
