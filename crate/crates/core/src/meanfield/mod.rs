//! Deterministic integration of the nonlinear mean-field master equations.
//!
//! The state is a probability vector laid out as: the alive levels of every
//! strategy (in lattice order), then one dead compartment per strategy, then
//! one compartment per strategy for mass that has jumped past the truncation
//! boundary. Mass past the boundary stops interacting; its size is bounded
//! by [`LatticeSpec::truncation_bound`].
//!
//! A focal alive particle of strategy `z` meets an alive partner of strategy
//! `k` at rate `kappa * A_k`, where `A_k` is the alive mass of strategy `k`.
//! Every flux leaves one compartment and enters another, so the drift sums
//! to zero up to rounding.

mod lattice;

pub use lattice::{build_lattice, jumps, poisson_cutoff, Jump, LatticeParams, LatticeSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, GeneralGame, PdPayoffs, Strategy, COOPERATE, DEFECT};
use crate::initial::InitialMeasure;
use crate::wealth::Wealth;

/// Mass conservation tolerance checked after every step.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub time: f64,
    pub mass: Vec<f64>,
}

/// Index arithmetic for the flat state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    offsets: Vec<usize>,
    strategies: usize,
    alive_len: usize,
}

impl Layout {
    pub fn new(lattice: &LatticeSpec) -> Self {
        let mut offsets = Vec::with_capacity(lattice.strategy_count() + 1);
        let mut acc = 0;
        for z in 0..lattice.strategy_count() {
            offsets.push(acc);
            acc += lattice.levels(z).len();
        }
        offsets.push(acc);
        Layout { offsets, strategies: lattice.strategy_count(), alive_len: acc }
    }

    pub fn len(&self) -> usize {
        self.alive_len + 2 * self.strategies
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alive(&self, z: Strategy, level: usize) -> usize {
        self.offsets[z] + level
    }

    pub fn alive_range(&self, z: Strategy) -> std::ops::Range<usize> {
        self.offsets[z]..self.offsets[z + 1]
    }

    pub fn dead(&self, z: Strategy) -> usize {
        self.alive_len + z
    }

    pub fn truncated(&self, z: Strategy) -> usize {
        self.alive_len + self.strategies + z
    }
}

#[derive(Debug, Clone, Copy)]
struct Flux {
    source: usize,
    partner: Strategy,
    weight: f64,
    target: usize,
}

/// Mean-field model on a fixed lattice with a compiled flux table.
#[derive(Debug, Clone)]
pub struct MeanFieldModel {
    game: GameSpec,
    lattice: LatticeSpec,
    layout: Layout,
    kappa: f64,
    fluxes: Vec<Flux>,
}

impl MeanFieldModel {
    pub fn new(game: GameSpec, initial: &InitialMeasure, params: LatticeParams) -> Result<Self> {
        let lattice = build_lattice(&game, initial, params)?;
        Ok(MeanFieldModel::on_lattice(game, lattice, params.kappa))
    }

    pub fn on_lattice(game: GameSpec, lattice: LatticeSpec, kappa: f64) -> Self {
        let layout = Layout::new(&lattice);
        let mut fluxes = Vec::new();
        for z in 0..lattice.strategy_count() {
            let moves: Vec<Jump> = jumps(&game, z).into_iter().filter(|j| lattice.is_active(j.partner)).collect();
            for (level, &y) in lattice.levels(z).iter().enumerate() {
                for j in &moves {
                    let landing = y.checked_add(j.delta).expect("lattice wealth overflow");
                    let target = if game.in_death_domain(z, landing) {
                        layout.dead(z)
                    } else {
                        match lattice.position(z, landing) {
                            Some(l) => layout.alive(z, l),
                            None => layout.truncated(z),
                        }
                    };
                    fluxes.push(Flux { source: layout.alive(z, level), partner: j.partner, weight: j.weight, target });
                }
            }
        }
        MeanFieldModel { game, lattice, layout, kappa, fluxes }
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Projects the initial law onto the lattice.
    pub fn initial_state(&self, initial: &InitialMeasure) -> Result<MeanFieldState> {
        let mut mass = vec![0.0; self.layout.len()];
        for a in initial.atoms() {
            let p = *a.prob.numer() as f64 / *a.prob.denom() as f64;
            if self.game.in_death_domain(a.strategy, a.wealth) {
                mass[self.layout.dead(a.strategy)] += p;
            } else {
                let level = self
                    .lattice
                    .position(a.strategy, a.wealth)
                    .ok_or_else(|| Error::Usage(format!("initial atom {} is not on the lattice", a.wealth)))?;
                mass[self.layout.alive(a.strategy, level)] += p;
            }
        }
        Ok(MeanFieldState { time: 0.0, mass })
    }

    pub fn alive_mass(&self, state: &MeanFieldState, z: Strategy) -> f64 {
        state.mass[self.layout.alive_range(z)].iter().sum()
    }

    pub fn dead_mass(&self, state: &MeanFieldState, z: Strategy) -> f64 {
        state.mass[self.layout.dead(z)]
    }

    pub fn truncated_mass(&self, state: &MeanFieldState, z: Strategy) -> f64 {
        state.mass[self.layout.truncated(z)]
    }

    /// Mass at `(wealth, z)`, zero off the lattice.
    pub fn mass_at(&self, state: &MeanFieldState, z: Strategy, wealth: Wealth) -> f64 {
        self.lattice.position(z, wealth).map_or(0.0, |l| state.mass[self.layout.alive(z, l)])
    }

    fn alive_masses(&self, mass: &[f64]) -> Vec<f64> {
        (0..self.lattice.strategy_count()).map(|z| mass[self.layout.alive_range(z)].iter().sum()).collect()
    }

    /// Time derivative of the state vector, evaluated through the flux table.
    pub fn drift(&self, mass: &[f64]) -> Vec<f64> {
        let alive = self.alive_masses(mass);
        let mut d = vec![0.0; mass.len()];
        for f in &self.fluxes {
            let flow = self.kappa * f.weight * alive[f.partner] * mass[f.source];
            d[f.source] -= flow;
            d[f.target] += flow;
        }
        d
    }

    /// One classical RK4 step of size `dt`.
    pub fn rk4_step(&self, state: &MeanFieldState, dt: f64) -> Result<MeanFieldState> {
        if !(dt > 0.0) {
            return Err(Error::Integration(format!("step size must be positive, got {dt}")));
        }
        let mass = rk4_step(&state.mass, dt, |m| self.drift(m));
        let total: f64 = mass.iter().sum();
        if !total.is_finite() || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Integration(format!(
                "total mass {total} drifted from 1 at t = {}; reduce dt",
                state.time + dt
            )));
        }
        if let Some(m) = mass.iter().copied().find(|&m| m < -MASS_TOLERANCE) {
            return Err(Error::Integration(format!("mass {m} went negative at t = {}; reduce dt", state.time + dt)));
        }
        Ok(MeanFieldState { time: state.time + dt, mass })
    }

    /// Integrates to each snapshot time with steps no longer than `dt`.
    /// Every interval between snapshots is split into equal steps so the
    /// snapshots are hit exactly.
    pub fn integrate(&self, state0: &MeanFieldState, dt: f64, snapshot_times: &[f64]) -> Result<Vec<MeanFieldState>> {
        if !(dt > 0.0) {
            return Err(Error::Integration(format!("step size must be positive, got {dt}")));
        }
        if snapshot_times.windows(2).any(|w| !(w[0] <= w[1]))
            || snapshot_times.first().is_some_and(|&t| t < state0.time)
        {
            return Err(Error::Usage("snapshot times must be sorted and not before the initial time".into()));
        }
        let mut state = state0.clone();
        let mut out = Vec::with_capacity(snapshot_times.len());
        for &target in snapshot_times {
            let span = target - state.time;
            if span > 0.0 {
                let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    state = self.rk4_step(&state, h)?;
                }
                state.time = target;
            }
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// Classical fourth-order Runge-Kutta step for `x' = f(x)`.
pub fn rk4_step<F>(x: &[f64], dt: f64, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let shifted = |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k1 = f(x);
    let k2 = f(&shifted(&k1, dt / 2.0));
    let k3 = f(&shifted(&k2, dt / 2.0));
    let k4 = f(&shifted(&k3, dt));
    x.iter().enumerate().map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Prisoner's dilemma drift written directly from the cooperator/defector
/// evolution equations, as inflow minus outflow per lattice level. Flux
/// into death and past the truncation boundary is accounted separately.
pub fn pd_drift(model: &MeanFieldModel, payoffs: &PdPayoffs, mass: &[f64]) -> Vec<f64> {
    let lat = model.lattice();
    let layout = model.layout();
    let kappa = model.kappa();
    let a0 = if lat.is_active(COOPERATE) { alive(layout, mass, COOPERATE) } else { 0.0 };
    let a1 = if lat.is_active(DEFECT) { alive(layout, mass, DEFECT) } else { 0.0 };
    let p = |z: Strategy, y: Option<Wealth>| -> f64 {
        y.and_then(|y| lat.position(z, y)).map_or(0.0, |l| mass[layout.alive(z, l)])
    };
    let mut d = vec![0.0; mass.len()];
    let (r, s, t, p2) = (payoffs.reward, payoffs.sucker, payoffs.temptation, payoffs.double_punishment());

    for (l, &y) in lat.levels(COOPERATE).iter().enumerate() {
        let here = mass[layout.alive(COOPERATE, l)];
        let from_below = y.checked_sub(r).ok().filter(|w| w.is_positive());
        let from_above = y.checked_add(s).ok();
        d[layout.alive(COOPERATE, l)] =
            kappa * (p(COOPERATE, from_below) * a0 + p(COOPERATE, from_above) * a1 - here * (a0 + a1));
        leak(&mut d, model, COOPERATE, y.checked_add(r).ok(), kappa * here * a0);
        leak(&mut d, model, COOPERATE, y.checked_sub(s).ok(), kappa * here * a1);
    }
    for (l, &y) in lat.levels(DEFECT).iter().enumerate() {
        let here = mass[layout.alive(DEFECT, l)];
        let from_below = y.checked_sub(t).ok().filter(|w| w.is_positive());
        let from_above = y.checked_add(p2).ok();
        d[layout.alive(DEFECT, l)] = kappa
            * (p(DEFECT, from_below) * a0 + 0.5 * p(DEFECT, from_above) * a1 + 0.5 * here * a1 - here * (a0 + a1));
        leak(&mut d, model, DEFECT, y.checked_add(t).ok(), kappa * here * a0);
        leak(&mut d, model, DEFECT, y.checked_sub(p2).ok(), 0.5 * kappa * here * a1);
    }
    d
}

/// General-game drift written directly from the general evolution equation:
/// a focal `l` player choosing `b'` against a `k` player choosing `b` gains
/// `G(b', b)`.
pub fn general_drift(model: &MeanFieldModel, game: &GeneralGame, mass: &[f64]) -> Vec<f64> {
    let lat = model.lattice();
    let layout = model.layout();
    let kappa = model.kappa();
    let spec = model.game();
    let strategies = game.strategies();
    let alive_k: Vec<f64> =
        (0..strategies.len()).map(|k| if lat.is_active(k) { alive(layout, mass, k) } else { 0.0 }).collect();
    let total_alive: f64 = alive_k.iter().sum();
    let mut d = vec![0.0; mass.len()];
    for (l, mine) in strategies.iter().enumerate() {
        for (level, &y) in lat.levels(l).iter().enumerate() {
            let here = mass[layout.alive(l, level)];
            let mut inflow = 0.0;
            for (k, theirs) in strategies.iter().enumerate() {
                for b in 0..game.actions() {
                    for b2 in 0..game.actions() {
                        let w = theirs.weight_f64(b) * mine.weight_f64(b2);
                        if w == 0.0 {
                            continue;
                        }
                        let gain = game.payoff(b2, b);
                        if let Ok(src) = y.checked_sub(gain) {
                            if !spec.in_death_domain(l, src) {
                                if let Some(sl) = lat.position(l, src) {
                                    inflow += alive_k[k] * w * mass[layout.alive(l, sl)];
                                }
                            }
                        }
                        if gain != Wealth::ZERO {
                            leak(&mut d, model, l, y.checked_add(gain).ok(), kappa * alive_k[k] * w * here);
                        }
                    }
                }
            }
            d[layout.alive(l, level)] += kappa * (inflow - here * total_alive);
        }
    }
    d
}

fn alive(layout: &Layout, mass: &[f64], z: Strategy) -> f64 {
    mass[layout.alive_range(z)].iter().sum()
}

/// Books a flux whose landing state is dead or off the lattice; landings on
/// the lattice are counted as inflow at the landing level instead.
fn leak(d: &mut [f64], model: &MeanFieldModel, z: Strategy, landing: Option<Wealth>, flow: f64) {
    let Some(y) = landing else { return };
    if model.game().in_death_domain(z, y) {
        d[model.layout().dead(z)] += flow;
    } else if model.lattice().position(z, y).is_none() {
        d[model.layout().truncated(z)] += flow;
    }
}
