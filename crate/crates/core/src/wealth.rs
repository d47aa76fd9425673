//! Exact wealth arithmetic on the lattice `{k / q : k ∈ ℤ}`.
//!
//! Every wealth value in a run is an integer number of ticks, one tick being
//! `1 / q` for a run-global denominator `q`. The denominator is fixed once when
//! the configuration is loaded (the LCM of every rational that enters the run)
//! and never changes afterwards, so sums and comparisons are plain integer
//! operations.

use std::fmt;
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A wealth amount measured in ticks of `1 / q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wealth(i64);

impl Wealth {
    pub const ZERO: Wealth = Wealth(0);

    pub const fn from_ticks(ticks: i64) -> Self {
        Wealth(ticks)
    }

    pub const fn ticks(self) -> i64 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn checked_add(self, rhs: Wealth) -> Result<Wealth> {
        self.0.checked_add(rhs.0).map(Wealth).ok_or_else(|| Error::Overflow(format!("{} + {} ticks", self.0, rhs.0)))
    }

    pub fn checked_sub(self, rhs: Wealth) -> Result<Wealth> {
        self.0.checked_sub(rhs.0).map(Wealth).ok_or_else(|| Error::Overflow(format!("{} - {} ticks", self.0, rhs.0)))
    }

    pub fn checked_mul(self, k: i64) -> Result<Wealth> {
        self.0.checked_mul(k).map(Wealth).ok_or_else(|| Error::Overflow(format!("{} * {k} ticks", self.0)))
    }
}

impl Neg for Wealth {
    type Output = Wealth;

    fn neg(self) -> Wealth {
        Wealth(self.0.checked_neg().expect("wealth negation overflow"))
    }
}

impl fmt::Display for Wealth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}t", self.0)
    }
}

/// The run-global lattice denominator `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    q: i64,
}

impl Scale {
    pub fn new(q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::Config(format!("lattice denominator must be positive, got {q}")));
        }
        Ok(Scale { q })
    }

    /// Smallest scale on which every given rational is representable.
    pub fn for_rationals<'a>(values: impl IntoIterator<Item = &'a Ratio<i64>>) -> Result<Self> {
        let mut q: i64 = 1;
        for v in values {
            let den = v.denom().abs();
            if den == 0 {
                return Err(Error::Config("zero denominator".into()));
            }
            let g = gcd(q, den);
            q = (q / g).checked_mul(den).ok_or_else(|| Error::Overflow("lattice denominator overflows i64".into()))?;
        }
        Scale::new(q)
    }

    pub fn q(self) -> i64 {
        self.q
    }

    /// `numer / denom` as a lattice amount.
    pub fn amount(self, numer: i64, denom: i64) -> Result<Wealth> {
        make_amount(numer, denom, self)
    }

    pub fn amount_of(self, r: &Ratio<i64>) -> Result<Wealth> {
        make_amount(*r.numer(), *r.denom(), self)
    }

    pub fn to_f64(self, w: Wealth) -> f64 {
        w.0 as f64 / self.q as f64
    }

    /// Exact rational value of `w`.
    pub fn to_ratio(self, w: Wealth) -> Ratio<i64> {
        Ratio::new(w.0, self.q)
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale { q: 1 }
    }
}

/// Converts `numer / denom` into ticks of `1 / q`.
///
/// Fails when `denom` is zero, when the value is not on the lattice (`denom`
/// must divide `q` once the fraction is reduced), or when the scaled integer
/// overflows.
pub fn make_amount(numer: i64, denom: i64, scale: Scale) -> Result<Wealth> {
    if denom == 0 {
        return Err(Error::Config(format!("amount {numer}/0 has a zero denominator")));
    }
    let r = Ratio::new(numer, denom);
    if r.is_zero() {
        return Ok(Wealth::ZERO);
    }
    let den = *r.denom();
    if scale.q % den != 0 {
        return Err(Error::Config(format!("amount {numer}/{denom} is off the 1/{} lattice", scale.q)));
    }
    r.numer()
        .checked_mul(scale.q / den)
        .map(Wealth)
        .ok_or_else(|| Error::Overflow(format!("{numer}/{denom} at q={}", scale.q)))
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_examples() {
        let q2 = Scale::new(2).unwrap();
        let q4 = Scale::new(4).unwrap();
        assert_eq!(make_amount(3, 1, q2).unwrap().ticks(), 6);
        assert_eq!(make_amount(1, 2, q2).unwrap().ticks(), 1);
        assert_eq!(make_amount(-5, 1, q4).unwrap().ticks(), -20);
        assert_eq!(q4.q(), 4);
    }

    #[test]
    fn zero_denominator_is_config_error() {
        assert!(matches!(make_amount(1, 0, Scale::default()), Err(Error::Config(_))));
    }

    #[test]
    fn off_lattice_is_rejected() {
        assert!(matches!(make_amount(1, 3, Scale::new(2).unwrap()), Err(Error::Config(_))));
        // reduces to 1/2 which is on the lattice
        assert_eq!(make_amount(2, 4, Scale::new(2).unwrap()).unwrap().ticks(), 1);
    }

    #[test]
    fn overflow_is_reported() {
        let s = Scale::new(1 << 40).unwrap();
        assert!(matches!(make_amount(1 << 40, 1, s), Err(Error::Overflow(_))));
        assert!(Wealth::from_ticks(i64::MAX).checked_add(Wealth::from_ticks(1)).is_err());
    }

    #[test]
    fn lcm_scale() {
        let rs = [Ratio::new(1, 2), Ratio::new(2, 3), Ratio::new(5, 4), Ratio::new(7, 1)];
        assert_eq!(Scale::for_rationals(&rs).unwrap().q(), 12);
    }
}
