//! Ability-to-pay functions and the demand query.
//!
//! An agent's admissible outcomes are `{(x, pi) : pi <= alpha(x)}` where
//! `alpha` is concave and nondecreasing with `alpha(0) = 0`. We represent
//! `alpha` as the lower envelope of finitely many affine pieces
//! `x -> a + b*x` with `a, b >= 0`, which covers hard budgets `(B, 0)`,
//! average budgets `(0, beta)` and their combinations, and keeps every
//! demand computation an exact rational.

use crate::rational::Rat;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PaymentError {
    #[error("ability-to-pay needs at least one affine piece")]
    NoPieces,
    #[error("piece {index} has a negative intercept or slope")]
    NegativePiece { index: usize },
    #[error("negative value")]
    NegativeValue,
    #[error("demand queried at an inadmissible state (x = {x}, pi = {pi})")]
    InadmissibleState { x: Rat, pi: Rat },
}

/// One affine piece of the envelope: `x -> intercept + slope * x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub intercept: Rat,
    pub slope: Rat,
}

/// The concave nondecreasing payment cap `alpha`, stored canonically:
/// dominated pieces pruned, survivors sorted by ascending intercept (hence
/// strictly descending slope). `alpha(0) = 0` holds by definition whatever
/// the pieces say.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbilityToPay {
    pieces: Vec<Piece>,
}

impl AbilityToPay {
    pub fn new(pieces: Vec<(Rat, Rat)>) -> Result<Self, PaymentError> {
        if pieces.is_empty() {
            return Err(PaymentError::NoPieces);
        }
        for (index, (a, b)) in pieces.iter().enumerate() {
            if a < &Rat::zero() || b < &Rat::zero() {
                return Err(PaymentError::NegativePiece { index });
            }
        }
        let mut kept: Vec<Piece> = Vec::new();
        for (a, b) in pieces {
            let candidate = Piece { intercept: a, slope: b };
            if kept.iter().any(|p| dominates(p, &candidate)) {
                continue;
            }
            kept.retain(|p| !dominates(&candidate, p));
            kept.push(candidate);
        }
        kept.sort_by(|p, q| {
            p.intercept
                .cmp(&q.intercept)
                .then_with(|| p.slope.cmp(&q.slope))
        });
        Ok(AbilityToPay { pieces: kept })
    }

    /// Hard budget `B`: total payment capped at `B`.
    pub fn hard_budget(budget: Rat) -> Result<Self, PaymentError> {
        AbilityToPay::new(vec![(budget, Rat::zero())])
    }

    /// Average budget `beta`: at most `beta` per unit.
    pub fn average_budget(beta: Rat) -> Result<Self, PaymentError> {
        AbilityToPay::new(vec![(Rat::zero(), beta)])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `alpha(x)`: zero at zero, otherwise the envelope minimum.
    pub fn eval(&self, x: &Rat) -> Rat {
        debug_assert!(!x.is_negative());
        if x.is_zero() {
            return Rat::zero();
        }
        self.pieces
            .iter()
            .map(|p| &p.intercept + &p.slope * x)
            .min()
            .expect("pieces are nonempty")
    }

    /// `beta = lim_{x -> 0+} alpha(x)/x`: the slope of the zero-intercept
    /// piece if there is one, `None` (= infinity) otherwise.
    pub fn beta(&self) -> Option<Rat> {
        self.pieces
            .iter()
            .filter(|p| p.intercept.is_zero())
            .map(|p| p.slope.clone())
            .min()
    }

    /// Admissibility of an outcome: `pi <= alpha(x)`, with the zero
    /// allocation admitting only a zero payment.
    pub fn is_admissible(&self, x: &Rat, pi: &Rat) -> bool {
        !x.is_negative() && !pi.is_negative() && *pi <= self.eval(x)
    }
}

fn dominates(p: &Piece, q: &Piece) -> bool {
    // p everywhere below-or-equal q, so q never attains the envelope.
    p.intercept <= q.intercept && p.slope <= q.slope
}

/// A bidder: a private per-unit value and a public ability-to-pay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub value: Rat,
    pub alpha: AbilityToPay,
}

impl Agent {
    pub fn new(value: Rat, alpha: AbilityToPay) -> Result<Self, PaymentError> {
        if value.is_negative() {
            return Err(PaymentError::NegativeValue);
        }
        Ok(Agent { value, alpha })
    }

    pub fn beta(&self) -> Option<Rat> {
        self.alpha.beta()
    }
}

/// The demand at clock price `p` from state `(x, pi)`: the largest `z` with
/// `(x + z, pi + p*z)` admissible, zero once `p >= v`. A piece bounds `z`
/// only when its slope is below `p`; if no piece does, the supremum is
/// infinite and `cap` (the caller passes `f([n])`) is returned instead.
pub fn demand(
    agent: &Agent,
    x: &Rat,
    pi: &Rat,
    p: &Rat,
    cap: &Rat,
) -> Result<Rat, PaymentError> {
    if !agent.alpha.is_admissible(x, pi) {
        return Err(PaymentError::InadmissibleState {
            x: x.clone(),
            pi: pi.clone(),
        });
    }
    if *p >= agent.value {
        return Ok(Rat::zero());
    }
    let mut best: Option<Rat> = None;
    for piece in agent.alpha.pieces() {
        if piece.slope < *p {
            // pi + p z <= a + b (x + z)  <=>  z <= (a + b x - pi) / (p - b)
            let bound = (&piece.intercept + &piece.slope * x - pi) / (p - &piece.slope);
            if best.as_ref().is_none_or(|b| bound < *b) {
                best = Some(bound);
            }
        }
    }
    Ok(match best {
        Some(d) if d < *cap => d,
        _ => cap.clone(),
    })
}
