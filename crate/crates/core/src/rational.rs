//! Exact rational scalar used everywhere in the crate.
//!
//! Every quantity in the auction (allocations, payments, prices, demands,
//! submodular function values) is a [`Rat`]. Equality checks are exact, so
//! every structural assertion runs at zero tolerance.

use num_rational::BigRational;
use num_traits::Signed;
use std::str::FromStr;
use thiserror::Error;

pub type Rat = BigRational;

/// `numer / denom` as an exact rational. Panics on a zero denominator.
pub fn rat(numer: i64, denom: i64) -> Rat {
    Rat::new(numer.into(), denom.into())
}

pub fn rat_int(value: i64) -> Rat {
    Rat::from_integer(value.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRatError {
    #[error("`{0}` is not an exact rational (expected `p` or `p/q`)")]
    Malformed(String),
    #[error("`{0}` is negative; a nonnegative rational is required here")]
    Negative(String),
}

/// Parses `"p/q"` or `"p"` exactly. Floats and whitespace are rejected.
pub fn parse_rat(text: &str) -> Result<Rat, ParseRatError> {
    Rat::from_str(text).map_err(|_| ParseRatError::Malformed(text.to_string()))
}

/// Like [`parse_rat`] but additionally requires the value to be >= 0.
pub fn parse_nonneg_rat(text: &str) -> Result<Rat, ParseRatError> {
    let r = parse_rat(text)?;
    if r.is_negative() {
        return Err(ParseRatError::Negative(text.to_string()));
    }
    Ok(r)
}

/// Canonical string form: `"p/q"`, or `"p"` when the denominator is one.
pub fn rat_to_string(r: &Rat) -> String {
    r.to_string()
}

/// True iff `value` is an integer multiple of `step` (`step` > 0).
pub fn is_multiple_of(value: &Rat, step: &Rat) -> bool {
    debug_assert!(step.is_positive());
    (value / step).is_integer()
}
