//! Exact nonnegative rationals for edge weights and masses.
//!
//! Selection probabilities like `1/(2|E|nm)` must be reproduced exactly when
//! lumped chains are built, so weights and weighted degrees are kept as
//! `Ratio<u128>` and only converted to floating point at the sampler / report
//! boundary. Conversions go through [`Dd`] so the f64 value is the correctly
//! rounded one even when numerator and denominator are large.

use crate::dd::Dd;

pub type Ratio = num_rational::Ratio<u128>;

/// `C(n, 2)` as a `u128`.
pub fn choose2(n: u64) -> u128 {
    if n < 2 {
        return 0;
    }
    let n = n as u128;
    n * (n - 1) / 2
}

pub fn ratio(num: u128, den: u128) -> Ratio {
    Ratio::new(num, den)
}

pub fn ratio_to_dd(r: &Ratio) -> Dd {
    Dd::from_ratio_u128(*r.numer(), *r.denom())
}

pub fn ratio_to_f64(r: &Ratio) -> f64 {
    ratio_to_dd(r).to_f64()
}
