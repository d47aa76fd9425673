//! Workloads shared by the criterion benchmarks in `benches/`.

use dpd_core::game::{COOPERATE, DEFECT};
use dpd_core::{Atom, GameSpec, InitialMeasure, PdPayoffs, Wealth};
use num_rational::Ratio;

pub fn pd() -> GameSpec {
    let w = Wealth::from_ticks;
    GameSpec::Pd(PdPayoffs::new(w(2), w(3), w(4), w(1)).unwrap())
}

/// Half cooperators, half defectors, all starting from `wealth` ticks.
pub fn half_and_half(game: &GameSpec, wealth: i64) -> InitialMeasure {
    InitialMeasure::new(
        vec![
            Atom { wealth: Wealth::from_ticks(wealth), strategy: COOPERATE, prob: Ratio::new(1, 2) },
            Atom { wealth: Wealth::from_ticks(wealth), strategy: DEFECT, prob: Ratio::new(1, 2) },
        ],
        game,
    )
    .unwrap()
}
