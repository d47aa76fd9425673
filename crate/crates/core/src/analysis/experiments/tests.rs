use super::*;
use crate::game::{PdPayoffs, COOPERATE, DEFECT};
use crate::initial::Atom;
use crate::spatial::occupation_fraction;

fn w(t: i64) -> Wealth {
    Wealth::from_ticks(t)
}

fn pd() -> GameSpec {
    GameSpec::Pd(PdPayoffs::new(w(2), w(3), w(4), w(1)).unwrap())
}

fn half_and_half(game: &GameSpec) -> InitialMeasure {
    InitialMeasure::new(
        vec![
            Atom { wealth: w(4), strategy: COOPERATE, prob: Ratio::new(1, 2) },
            Atom { wealth: w(4), strategy: DEFECT, prob: Ratio::new(1, 2) },
        ],
        game,
    )
    .unwrap()
}

fn homogenization(m: usize, lambda: f64, d_grid: Vec<f64>) -> HomogenizationConfig {
    let game = pd();
    HomogenizationConfig {
        initial: half_and_half(&game),
        game,
        space: Space::torus(m).unwrap(),
        scale: Scale::new(1).unwrap(),
        n: 4,
        lambda,
        horizon: 2.0,
        d_grid,
        replicas: 60,
        bootstrap: 40,
        z: 2.0,
        seed: 5,
    }
}

#[test]
fn static_models_are_at_distance_zero() {
    let r = homogenization_experiment(&homogenization(3, 0.0, vec![1.0, 8.0])).unwrap();
    for c in &r.cells {
        assert_eq!(c.statistic, Some(0.0));
    }
    assert!(r.passed());
}

#[test]
fn single_site_is_at_the_noise_floor() {
    let r = homogenization_experiment(&homogenization(1, 1.0, vec![1.0, 16.0])).unwrap();
    assert!(r.verdict("all_cells_at_noise_floor").is_some());
    assert!(r.passed(), "{r:#?}");
    assert_eq!(r.cells.len(), 3);
}

#[test]
fn homogenization_is_reproducible() {
    let cfg = homogenization(2, 1.0, vec![2.0]);
    let a = homogenization_experiment(&cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| homogenization_experiment(&cfg).unwrap());
    assert_eq!(a, b);
}

fn chaos(n_grid: Vec<usize>) -> ChaosConfig {
    let game = pd();
    ChaosConfig {
        initial: half_and_half(&game),
        game,
        scale: Scale::new(1).unwrap(),
        kappa: 1.0,
        horizon: 1.0,
        n_grid,
        replicas: 50,
        threshold: w(2),
        dt: 0.01,
        epsilon: 1e-8,
        max_states: 100_000,
        spot: None,
        slope_range: (-1.6, -0.4),
        bootstrap: 20,
        z: 2.0,
        seed: 9,
    }
}

#[test]
fn single_particle_has_no_covariance_cell() {
    let r = chaos_experiment(&chaos(vec![1, 4])).unwrap();
    let first = &r.cells[0];
    assert_eq!(first.grid, vec!["covariance".to_string(), "1".into()]);
    assert_eq!(first.verdict, CellVerdict::Absent);
    assert_eq!(first.statistic, None);
    assert!(r.cells[1].statistic.is_some());
}

#[test]
fn chaos_is_reproducible_across_pool_sizes() {
    let cfg = ChaosConfig { spot: Some(SpotCheck { n: 16, replicas: 10, tolerance: 10.0 }), ..chaos(vec![2, 8]) };
    let a = chaos_experiment(&cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| chaos_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    assert!(a.verdict("w1_spot_within_tolerance").unwrap().passed);
}

#[test]
fn single_particle_matches_the_static_limit() {
    // one particle never plays, and the mean field at time 0 is the initial law
    let cfg = ChaosConfig { horizon: 0.0, ..chaos(vec![1]) };
    let r = chaos_experiment(&cfg).unwrap();
    let w1 = r.cells.iter().find(|c| c.grid[0] == "w1").unwrap();
    assert_eq!(w1.statistic, Some(0.0));
}

fn occupation(sites: Vec<Vec<usize>>) -> OccupationConfig {
    OccupationConfig {
        space: Space::torus(3).unwrap(),
        d: 2.0,
        horizon: 500.0,
        sites,
        tolerance: 0.1,
        batches: 10,
        seed: 4,
    }
}

#[test]
fn whole_torus_is_occupied_all_the_time() {
    let r = occupation_experiment(&occupation(vec![(0..9).collect()])).unwrap();
    assert!(r.cells[0].statistic.unwrap() < 1e-12);
}

#[test]
fn vertex_occupation_agrees_with_the_event_scan() {
    let game = pd();
    let m = InitialMeasure::dirac(w(1), COOPERATE, &game).unwrap();
    let initial = Initial::Product { measure: m, positions: PositionLaw::Stationary };
    let mut sys = init_spatial(game, Space::torus(3).unwrap(), 1, 2.0, 0.0, initial, 1).unwrap();
    let traj = sys.run_logged(100.0, &[]).unwrap();
    let occ = vertex_occupation(&traj, 9, 7).unwrap();
    let total = |v: usize| occ.iter().map(|b| b[v]).sum::<f64>() / 100.0;
    for v in 0..9 {
        assert!((total(v) - occupation_fraction(&traj, 0, &[v], 100.0).unwrap()).abs() < 1e-12);
    }
    // disjoint sets add up
    let a = occupation_fraction(&traj, 0, &[0, 1], 100.0).unwrap();
    let b = occupation_fraction(&traj, 0, &[5], 100.0).unwrap();
    let ab = occupation_fraction(&traj, 0, &[0, 1, 5], 100.0).unwrap();
    assert!((a + b - ab).abs() < 1e-12);
    let blocks: f64 = occ.iter().flatten().sum();
    assert!((blocks - 100.0).abs() < 1e-9);
}

#[test]
fn occupation_rejects_bad_sites() {
    assert!(occupation_experiment(&occupation(vec![vec![9]])).is_err());
}
