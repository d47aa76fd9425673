use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Strategy;
use crate::meanfield::{MeanFieldModel, MeanFieldState};
use crate::wealth::Scale;

use super::measure::dead_wealth;

/// Which particles a wealth marginal describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    All,
    Strategy(Strategy),
}

impl Conditioning {
    pub fn admits(self, z: Strategy) -> bool {
        match self {
            Conditioning::All => true,
            Conditioning::Strategy(s) => s == z,
        }
    }
}

/// A probability measure on the real line with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthMarginal {
    conditioning: Conditioning,
    /// Sorted, distinct support points with positive weights summing to 1.
    atoms: Vec<(f64, f64)>,
}

impl WealthMarginal {
    /// Normalizes nonnegative `(value, weight)` pairs. Zero weights are
    /// dropped and repeated values merged.
    pub fn new(conditioning: Conditioning, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(x, p)| !x.is_finite() || !p.is_finite() || p < 0.0) {
            return Err(Error::Usage("marginal atoms need finite values and nonnegative weights".into()));
        }
        atoms.retain(|&(_, p)| p > 0.0);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total <= 0.0 {
            return Err(Error::Usage("marginal has no mass".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(WealthMarginal { conditioning, atoms: merged })
    }

    /// Wealth law of the mean-field state, with the dead mass at the dead
    /// wealth and mass that left the lattice excluded.
    pub fn from_meanfield(
        model: &MeanFieldModel,
        state: &MeanFieldState,
        scale: Scale,
        conditioning: Conditioning,
    ) -> Result<Self> {
        let layout = model.layout();
        let mut atoms = Vec::new();
        for z in (0..model.lattice().strategy_count()).filter(|&z| conditioning.admits(z)) {
            for (k, &w) in model.lattice().levels(z).iter().enumerate() {
                atoms.push((scale.to_f64(w), state.mass[layout.alive(z, k)].max(0.0)));
            }
            atoms.push((scale.to_f64(dead_wealth(model.game(), z)), state.mass[layout.dead(z)].max(0.0)));
        }
        WealthMarginal::new(conditioning, atoms)
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, p)| x * p).sum()
    }
}

/// Walks the merged support, yielding each point with both CDFs there and
/// the gap to the next point.
fn merged_cdfs(a: &WealthMarginal, b: &WealthMarginal) -> Vec<(f64, f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut out = Vec::with_capacity(a.atoms.len() + b.atoms.len());
    while i < a.atoms.len() || j < b.atoms.len() {
        let xa = a.atoms.get(i).map_or(f64::INFINITY, |t| t.0);
        let xb = b.atoms.get(j).map_or(f64::INFINITY, |t| t.0);
        let x = xa.min(xb);
        if xa == x {
            fa += a.atoms[i].1;
            i += 1;
        }
        if xb == x {
            fb += b.atoms[j].1;
            j += 1;
        }
        out.push((x, fa, fb));
    }
    out
}

/// First Wasserstein distance, `∫ |F_a − F_b| dx`.
pub fn wasserstein1(a: &WealthMarginal, b: &WealthMarginal) -> Result<f64> {
    if a.conditioning != b.conditioning {
        return Err(Error::Usage(format!(
            "cannot compare marginals conditioned on {:?} and {:?}",
            a.conditioning, b.conditioning
        )));
    }
    let cdf = merged_cdfs(a, b);
    Ok(cdf.windows(2).map(|w| (w[0].1 - w[0].2).abs() * (w[1].0 - w[0].0)).sum())
}

/// Kolmogorov–Smirnov distance, `sup |F_a − F_b|`.
pub fn ks_distance(a: &WealthMarginal, b: &WealthMarginal) -> f64 {
    merged_cdfs(a, b).iter().map(|&(_, fa, fb)| (fa - fb).abs()).fold(0.0, f64::max)
}
