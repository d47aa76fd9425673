//! The three convergence experiments. Replicas run in parallel on the
//! ambient rayon pool; results are collected by replica index, so reports do
//! not depend on the worker count.

use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::game::{GameSpec, GeneralGame, MixedStrategy, ParticleState};
use crate::graph::Space;
use crate::initial::{sample_particles, InitialMeasure, PositionLaw};
use crate::matching::{init_matching, MatchingInitial};
use crate::meanfield::{LatticeParams, MeanFieldModel};
use crate::rng::{derive_seed, stream};
use crate::spatial::{init_spatial, Initial};
use crate::trajectory::{EventKind, Trajectory};
use crate::wealth::{Scale, Wealth};

use super::covariance::{exchangeable_covariance, indicator_above};
use super::distance::{wasserstein1, Conditioning, WealthMarginal};
use super::measure::EmpiricalMeasure;
use super::report::{Cell, CellVerdict, ExperimentReport, Verdict};
use super::stats::{bootstrap_se, intervals_overlap, nonincreasing_within, ols_slope};

mod tag {
    pub const HOMOGENIZATION: u64 = 0x100;
    pub const CHAOS: u64 = 0x200;
    pub const OCCUPATION: u64 = 0x300;
    pub const INITIAL: u64 = 1;
    pub const POSITIONS: u64 = 2;
    pub const MATCHING: u64 = 3;
    pub const SPATIAL: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
}

fn final_state(traj: &Trajectory) -> &[ParticleState] {
    &traj.snapshots.last().expect("run was given the horizon as a snapshot time").particles
}

fn pool(parts: &[EmpiricalMeasure], idx: &[usize]) -> EmpiricalMeasure {
    EmpiricalMeasure::pool(idx.iter().map(|&i| &parts[i]))
}

/// `Σ_z w_z · W1(a | z, b | z)` over strategies with positive weight. A
/// strategy absent from both measures contributes nothing.
fn weighted_w1(
    game: &GameSpec,
    scale: Scale,
    weights: &[f64],
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
) -> Result<f64> {
    let mut total = 0.0;
    for (z, &wz) in weights.iter().enumerate().filter(|(_, &w)| w > 0.0) {
        let c = Conditioning::Strategy(z);
        match (a.marginal(game, scale, c), b.marginal(game, scale, c)) {
            (Ok(x), Ok(y)) => total += wz * wasserstein1(&x, &y)?,
            (Err(_), Err(_)) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(total)
}

fn check_common(replicas: usize, bootstrap: usize, z: f64) -> Result<()> {
    if replicas < 2 {
        return config("experiments need at least 2 replicas per cell");
    }
    if bootstrap < 2 {
        return config("bootstrap needs at least 2 resamples");
    }
    if !(z > 0.0 && z.is_finite()) {
        return config("confidence multiplier z must be positive");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationConfig {
    pub game: GameSpec,
    pub space: Space,
    pub initial: InitialMeasure,
    pub scale: Scale,
    pub n: usize,
    /// Spatial per-pair game rate.
    pub lambda: f64,
    pub horizon: f64,
    pub d_grid: Vec<f64>,
    pub replicas: usize,
    pub bootstrap: usize,
    /// Width of confidence intervals, in standard errors.
    pub z: f64,
    pub seed: u64,
}

/// Distance between the spatial wealth law at the horizon and the law of
/// random matching at rate `lambda · collision_mass`, for each `d`.
///
/// All cells share the initial particle arrays replica by replica, with
/// positions drawn from the stationary law. The noise floor is the distance
/// between two independent random-matching batches on those same arrays.
/// When the collision mass is below 1 the distances must be nonincreasing
/// in `d` and the last cell must agree with the noise floor. When it equals
/// 1 every cell must agree with the noise floor.
pub fn homogenization_experiment(cfg: &HomogenizationConfig) -> Result<ExperimentReport> {
    check_common(cfg.replicas, cfg.bootstrap, cfg.z)?;
    if cfg.d_grid.is_empty() {
        return config("d grid is empty");
    }
    let collision = cfg.space.collision_mass()?;
    let rm_rate = cfg.lambda * collision;
    let t = cfg.horizon;
    let seed = cfg.seed;
    let base = [tag::HOMOGENIZATION];
    let sampler = PositionLaw::Stationary.sampler(&cfg.space)?;
    let initials: Vec<Vec<ParticleState>> = (0..cfg.replicas as u64)
        .map(|r| {
            let mut ic = stream(seed, &[base[0], tag::INITIAL, r]);
            let mut pos = stream(seed, &[base[0], tag::POSITIONS, r]);
            let mut ps = sample_particles(&cfg.initial, &cfg.game, cfg.n, &mut ic);
            for p in &mut ps {
                p.position = sampler.sample(&mut pos);
            }
            ps
        })
        .collect();

    let matching_batch = |batch: u64| -> Result<Vec<EmpiricalMeasure>> {
        initials
            .par_iter()
            .enumerate()
            .map(|(r, ps)| {
                let s = derive_seed(seed, &[base[0], tag::MATCHING, batch, r as u64]);
                let mut sys =
                    init_matching(cfg.game.clone(), cfg.n, rm_rate, false, MatchingInitial::Particles(ps.clone()), s)?;
                Ok(EmpiricalMeasure::from_particles(final_state(&sys.run(t, &[t])?)))
            })
            .collect()
    };
    let rm = matching_batch(0)?;
    let rm_other = matching_batch(1)?;

    let weights = cfg.initial.strategy_weights(cfg.game.strategy_count());
    let dist = |a: &[EmpiricalMeasure], b: &[EmpiricalMeasure], idx: &[usize]| {
        weighted_w1(&cfg.game, cfg.scale, &weights, &pool(a, idx), &pool(b, idx))
    };
    let all: Vec<usize> = (0..cfg.replicas).collect();
    let estimate = |a: &[EmpiricalMeasure], b: &[EmpiricalMeasure], cell: u64| -> Result<(f64, f64)> {
        let x = dist(a, b, &all)?;
        let boot_seed = derive_seed(seed, &[base[0], tag::BOOTSTRAP, cell]);
        let se = bootstrap_se(cfg.replicas, cfg.bootstrap, boot_seed, |idx| dist(a, b, idx).unwrap_or(f64::NAN));
        Ok((x, se))
    };
    let noise = estimate(&rm, &rm_other, u64::MAX)?;

    let mut stats = Vec::with_capacity(cfg.d_grid.len());
    for &d in &cfg.d_grid {
        let spatial: Vec<EmpiricalMeasure> = initials
            .par_iter()
            .enumerate()
            .map(|(r, ps)| {
                let s = derive_seed(seed, &[base[0], tag::SPATIAL, d.to_bits(), r as u64]);
                let mut sys = init_spatial(
                    cfg.game.clone(),
                    cfg.space.clone(),
                    cfg.n,
                    d,
                    cfg.lambda,
                    Initial::Particles(ps.clone()),
                    s,
                )?;
                Ok(EmpiricalMeasure::from_particles(final_state(&sys.run(t, &[t])?)))
            })
            .collect::<Result<_>>()?;
        stats.push(estimate(&spatial, &rm, d.to_bits())?);
    }

    let degenerate = collision >= 1.0;
    let mut cells = Vec::new();
    let mut verdicts = Vec::new();
    if degenerate {
        let mut worst: f64 = f64::NEG_INFINITY;
        for (&d, &s) in cfg.d_grid.iter().zip(&stats) {
            let ok = intervals_overlap(s, noise, cfg.z);
            worst = worst.max((s.0 - noise.0).abs() - cfg.z * (s.1 + noise.1));
            cells.push(cell(vec![fmt(d), "spatial_vs_matching".into()], s, cfg.replicas, CellVerdict::from_check(ok)));
        }
        verdicts.push(Verdict::at_most("all_cells_at_noise_floor", worst, 0.0));
    } else {
        let mut worst: f64 = f64::NEG_INFINITY;
        for (k, (&d, &s)) in cfg.d_grid.iter().zip(&stats).enumerate() {
            let verdict = if k == 0 {
                CellVerdict::Info
            } else {
                let prev = stats[k - 1];
                worst = worst.max(s.0 - prev.0 - cfg.z * (prev.1.powi(2) + s.1.powi(2)).sqrt());
                CellVerdict::from_check(nonincreasing_within(prev, s, cfg.z))
            };
            cells.push(cell(vec![fmt(d), "spatial_vs_matching".into()], s, cfg.replicas, verdict));
        }
        if stats.len() > 1 {
            verdicts.push(Verdict::at_most("nonincreasing_in_d", worst, 0.0));
        }
        let last = *stats.last().expect("grid is nonempty");
        verdicts.push(Verdict::at_most(
            "last_cell_at_noise_floor",
            (last.0 - noise.0).abs(),
            cfg.z * (last.1 + noise.1),
        ));
    }
    cells.push(cell(vec![String::new(), "matching_vs_matching".into()], noise, cfg.replicas, CellVerdict::Info));
    Ok(ExperimentReport {
        experiment: "homogenization".into(),
        seed,
        grid_columns: vec!["d".into(), "quantity".into()],
        cells,
        verdicts,
    })
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn cell(grid: Vec<String>, (statistic, stderr): (f64, f64), replicas: usize, verdict: CellVerdict) -> Cell {
    Cell { grid, statistic: Some(statistic), stderr: Some(stderr), replicas, verdict }
}

/// An extra large-`N` cell checked against an absolute tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n: usize,
    pub replicas: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub game: GameSpec,
    pub initial: InitialMeasure,
    pub scale: Scale,
    /// Mean-field rate constant; the slowed pair rate is `kappa / N`.
    pub kappa: f64,
    pub horizon: f64,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    /// Test functional `1{alive, wealth > threshold}`.
    pub threshold: Wealth,
    pub dt: f64,
    pub epsilon: f64,
    pub max_states: usize,
    pub spot: Option<SpotCheck>,
    pub slope_range: (f64, f64),
    pub bootstrap: usize,
    pub z: f64,
    pub seed: u64,
}

struct ChaosCell {
    measures: Vec<EmpiricalMeasure>,
    indicator: Vec<Vec<f64>>,
}

/// Decorrelation and convergence to the mean-field law in the slowed
/// random-matching model.
///
/// For each `N` the report holds the covariance of the test functional at
/// two distinct particles and the distance between the pooled wealth law at
/// the horizon and the mean-field solution.
pub fn chaos_experiment(cfg: &ChaosConfig) -> Result<ExperimentReport> {
    check_common(cfg.replicas, cfg.bootstrap, cfg.z)?;
    if cfg.n_grid.is_empty() || cfg.n_grid.contains(&0) {
        return config("N grid must be nonempty with N >= 1");
    }
    let t = cfg.horizon;
    let params = LatticeParams { horizon: t, kappa: cfg.kappa, epsilon: cfg.epsilon, max_states: cfg.max_states };
    let model = MeanFieldModel::new(cfg.game.clone(), &cfg.initial, params)?;
    let mu_t = model.integrate(&model.initial_state(&cfg.initial)?, cfg.dt, &[t])?.pop().expect("one snapshot");
    let weights = cfg.initial.strategy_weights(cfg.game.strategy_count());
    let limits: Vec<Option<WealthMarginal>> = weights
        .iter()
        .enumerate()
        .map(|(z, &w)| {
            (w > 0.0)
                .then(|| WealthMarginal::from_meanfield(&model, &mu_t, cfg.scale, Conditioning::Strategy(z)))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let f = indicator_above(cfg.threshold);

    let run_cell = |n: usize, replicas: usize| -> Result<ChaosCell> {
        let out: Vec<(EmpiricalMeasure, Vec<f64>)> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let s = derive_seed(cfg.seed, &[tag::CHAOS, n as u64, r]);
                let mut sys = init_matching(
                    cfg.game.clone(),
                    n,
                    cfg.kappa,
                    true,
                    MatchingInitial::Product(cfg.initial.clone()),
                    s,
                )?;
                let traj = sys.run(t, &[t])?;
                let ps = final_state(&traj);
                Ok((EmpiricalMeasure::from_particles(ps), ps.iter().map(f).collect()))
            })
            .collect::<Result<_>>()?;
        let (measures, indicator) = out.into_iter().unzip();
        Ok(ChaosCell { measures, indicator })
    };
    let distance_to_limit = |parts: &[EmpiricalMeasure], idx: &[usize]| -> Result<f64> {
        let pooled = pool(parts, idx);
        let mut total = 0.0;
        for (z, limit) in limits.iter().enumerate() {
            let Some(limit) = limit else { continue };
            let emp = pooled.marginal(&cfg.game, cfg.scale, Conditioning::Strategy(z))?;
            total += weights[z] * wasserstein1(&emp, limit)?;
        }
        Ok(total)
    };
    let w1_cell = |c: &ChaosCell, n: usize| -> Result<(f64, f64)> {
        let idx: Vec<usize> = (0..c.measures.len()).collect();
        let x = distance_to_limit(&c.measures, &idx)?;
        let boot = derive_seed(cfg.seed, &[tag::CHAOS, tag::BOOTSTRAP, n as u64]);
        let se =
            bootstrap_se(idx.len(), cfg.bootstrap, boot, |i| distance_to_limit(&c.measures, i).unwrap_or(f64::NAN));
        Ok((x, se))
    };

    let mut cov_cells = Vec::new();
    let mut w1_stats = Vec::new();
    let mut cov_points = Vec::new();
    for &n in &cfg.n_grid {
        let c = run_cell(n, cfg.replicas)?;
        if n >= 2 {
            let cov = exchangeable_covariance(&c.indicator)?;
            cov_points.push((n, cov.estimate));
            cov_cells.push(Cell {
                grid: vec!["covariance".into(), n.to_string()],
                statistic: Some(cov.estimate),
                stderr: cov.stderr,
                replicas: cfg.replicas,
                verdict: CellVerdict::Info,
            });
        } else {
            cov_cells.push(Cell {
                grid: vec!["covariance".into(), n.to_string()],
                statistic: None,
                stderr: None,
                replicas: cfg.replicas,
                verdict: CellVerdict::Absent,
            });
        }
        w1_stats.push(w1_cell(&c, n)?);
    }

    let mut verdicts = Vec::new();
    if let (Some(first), Some(last)) = (cov_points.first(), cov_points.last()) {
        if cov_points.len() >= 2 {
            verdicts.push(Verdict::check("covariance_decreases", Some(last.1.abs()), None, Some(first.1.abs()), true));
        }
    }
    let log_points: Vec<(f64, f64)> =
        cov_points.iter().filter(|p| p.1 != 0.0).map(|&(n, c)| ((n as f64).ln(), c.abs().ln())).collect();
    let slope = if log_points.len() == cov_points.len() { ols_slope(&log_points) } else { None };
    verdicts.push(Verdict::check("covariance_slope", slope, Some(cfg.slope_range.0), Some(cfg.slope_range.1), false));

    let mut cells = cov_cells;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (k, (&n, &s)) in cfg.n_grid.iter().zip(&w1_stats).enumerate() {
        let verdict = if k == 0 {
            CellVerdict::Info
        } else {
            let prev = w1_stats[k - 1];
            worst = worst.max(s.0 - prev.0 - cfg.z * (prev.1.powi(2) + s.1.powi(2)).sqrt());
            CellVerdict::from_check(nonincreasing_within(prev, s, cfg.z))
        };
        cells.push(cell(vec!["w1".into(), n.to_string()], s, cfg.replicas, verdict));
    }
    if w1_stats.len() > 1 {
        verdicts.push(Verdict::at_most("w1_nonincreasing_in_n", worst, 0.0));
    }
    if let Some(spot) = cfg.spot {
        let c = run_cell(spot.n, spot.replicas)?;
        let s = w1_cell(&c, spot.n)?;
        cells.push(cell(
            vec!["w1_spot".into(), spot.n.to_string()],
            s,
            spot.replicas,
            CellVerdict::from_check(s.0 <= spot.tolerance),
        ));
        verdicts.push(Verdict::at_most("w1_spot_within_tolerance", s.0, spot.tolerance));
    }
    Ok(ExperimentReport {
        experiment: "chaos".into(),
        seed: cfg.seed,
        grid_columns: vec!["quantity".into(), "N".into()],
        cells,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationConfig {
    pub space: Space,
    pub d: f64,
    pub horizon: f64,
    /// Site sets `S` whose occupation is compared with `π(S)`.
    pub sites: Vec<Vec<usize>>,
    pub tolerance: f64,
    /// Number of equal time blocks used for the batch-means standard error.
    pub batches: usize,
    pub seed: u64,
}

/// Time particle 0 spends at each vertex within each of `batches` equal
/// blocks of `[0, horizon]`.
fn vertex_occupation(traj: &Trajectory, vertices: usize, batches: usize) -> Result<Vec<Vec<f64>>> {
    let events = traj.events.as_ref().ok_or_else(|| Error::Usage("occupation needs the event log".into()))?;
    let width = traj.horizon / batches as f64;
    let mut occ = vec![vec![0.0; vertices]; batches];
    let mut pos = traj.initial[0].position;
    let mut last = 0.0;
    let credit = |occ: &mut Vec<Vec<f64>>, from: f64, to: f64, v: usize| {
        let mut a = from;
        while a < to {
            let b = ((a / width).floor() as usize).min(batches - 1);
            let end = if b + 1 == batches { to } else { to.min((b + 1) as f64 * width) };
            occ[b][v] += end - a;
            a = end;
        }
    };
    for e in events {
        if let EventKind::Move { particle: 0, to, .. } = e.kind {
            credit(&mut occ, last, e.time, pos);
            last = e.time;
            pos = to;
        }
    }
    credit(&mut occ, last, traj.horizon, pos);
    Ok(occ)
}

/// Fraction of time a lone random walker spends in each site set, against
/// the stationary mass of the set.
pub fn occupation_experiment(cfg: &OccupationConfig) -> Result<ExperimentReport> {
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return config("occupation horizon must be positive");
    }
    if cfg.batches < 2 {
        return config("occupation needs at least 2 batches");
    }
    let vertices = cfg.space.vertex_count();
    if let Some(v) = cfg.sites.iter().flatten().find(|&&v| v >= vertices) {
        return config(format!("site {v} outside the graph"));
    }
    // the walker never plays, so any one-strategy game serves
    let idle = GeneralGame::new(vec![vec![Wealth::ZERO]], vec![MixedStrategy::pure(1, 0, Wealth::ZERO)?])?;
    let game = GameSpec::General(idle);
    let measure = InitialMeasure::dirac(Wealth::from_ticks(1), 0, &game)?;
    let s = derive_seed(cfg.seed, &[tag::OCCUPATION]);
    let initial = Initial::Product { measure, positions: PositionLaw::Stationary };
    let mut sys = init_spatial(game, cfg.space.clone(), 1, cfg.d, 0.0, initial, s)?;
    let traj = sys.run_logged(cfg.horizon, &[])?;
    let occ = vertex_occupation(&traj, vertices, cfg.batches)?;
    let pi = cfg.space.stationary()?;
    let width = cfg.horizon / cfg.batches as f64;

    let mut cells = Vec::with_capacity(cfg.sites.len());
    let mut worst: f64 = 0.0;
    for set in &cfg.sites {
        let mut members = set.clone();
        members.sort_unstable();
        members.dedup();
        let target = members.iter().fold(Ratio::<u64>::zero(), |acc, &v| acc + pi[v]);
        let target = *target.numer() as f64 / *target.denom() as f64;
        let per_batch: Vec<f64> = occ.iter().map(|b| members.iter().map(|&v| b[v]).sum::<f64>() / width).collect();
        let total: f64 = occ.iter().map(|b| members.iter().map(|&v| b[v]).sum::<f64>()).sum::<f64>() / cfg.horizon;
        let err = (total - target).abs();
        worst = worst.max(err);
        let se = super::stats::sample_sd(&per_batch) / (cfg.batches as f64).sqrt();
        let label = members.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        cells.push(cell(vec![label], (err, se), 1, CellVerdict::from_check(err <= cfg.tolerance)));
    }
    Ok(ExperimentReport {
        experiment: "occupation".into(),
        seed: cfg.seed,
        grid_columns: vec!["sites".into()],
        cells,
        verdicts: vec![Verdict::at_most("max_error", worst, cfg.tolerance)],
    })
}

#[cfg(test)]
mod tests;
