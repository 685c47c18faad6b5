//! Submodular-function oracles and polymatroid queries.
//!
//! The allocation environment is the packing polytope
//! `P = { x >= 0 : x(S) <= f(S) for all S }` for a monotone submodular `f`
//! with `f(empty) = 0`. This module provides the three built-in oracle
//! forms, exhaustive validation for explicit tables, the capped function
//! `f_psi(S) = min_{T subset S} f(T) + psi(S \ T)`, greedy maximization
//! over `P` intersected with a box, and tightness/feasibility queries.
//!
//! Subsets are n-bit masks in little-endian agent order (bit `i` = agent
//! `i`); minimizer enumeration is in ascending mask order so reported
//! witnesses are deterministic.

use crate::rational::Rat;
use num_traits::Zero;
use std::fmt;
use thiserror::Error;

/// Exhaustive validation enumerates pairs of subsets; beyond this it is refused.
pub const VALIDATE_MAX_N: usize = 16;
/// Brute-force capped evaluation enumerates `2^|S|` subsets.
pub const CAPPED_EVAL_MAX_CARD: u32 = 20;
/// Ground sets are masks in a `u32`; construction refuses anything larger.
pub const MAX_GROUND_SET: usize = 20;

/// A subset of agents `{0..n-1}` as a bitmask, bit `i` = agent `i`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Subset {
        debug_assert!(n <= MAX_GROUND_SET);
        Subset(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(i: usize) -> Subset {
        Subset(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Subset {
        Subset(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Subset {
        Subset(self.0 & !(1 << i))
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn minus(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn card(self) -> u32 {
        self.0.count_ones()
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// All `T` with `T subset self`, in ascending mask order.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let mask = self.0;
        let mut cur = Some(0u32);
        std::iter::from_fn(move || {
            let t = cur?;
            cur = if t == mask {
                None
            } else {
                Some(t.wrapping_sub(mask) & mask)
            };
            Some(Subset(t))
        })
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// A length-`n` vector of nonnegative rationals. Plays the roles of
/// allocations, demands, caps and greedy points; supports `v(S)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubsetVector(Vec<Rat>);

impl SubsetVector {
    pub fn new(entries: Vec<Rat>) -> Result<Self, PolymatroidError> {
        if let Some(i) = entries.iter().position(|e| e < &Rat::zero()) {
            return Err(PolymatroidError::NegativeEntry { index: i });
        }
        Ok(SubsetVector(entries))
    }

    pub fn zero(n: usize) -> Self {
        SubsetVector(vec![Rat::zero(); n])
    }

    /// Constant vector, e.g. the finite stand-in for "infinite demand".
    pub fn constant(n: usize, value: Rat) -> Self {
        debug_assert!(value >= Rat::zero());
        SubsetVector(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Rat {
        &self.0[i]
    }

    pub fn set(&mut self, i: usize, value: Rat) {
        debug_assert!(value >= Rat::zero());
        self.0[i] = value;
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rat> {
        self.0.iter()
    }

    /// `v(S) = sum_{i in S} v_i`.
    pub fn sum(&self, s: Subset) -> Rat {
        s.members().map(|i| &self.0[i]).sum()
    }

    pub fn total(&self) -> Rat {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &SubsetVector) -> SubsetVector {
        debug_assert_eq!(self.len(), other.len());
        SubsetVector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Copy with coordinate `i` replaced by `value`.
    pub fn with_coord(&self, i: usize, value: Rat) -> SubsetVector {
        debug_assert!(value >= Rat::zero());
        let mut out = self.clone();
        out.0[i] = value;
        out
    }

    /// Copy with coordinate `i` zeroed, i.e. `(0, v_{-i})`.
    pub fn without_coord(&self, i: usize) -> SubsetVector {
        self.with_coord(i, Rat::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|e| e.is_zero())
    }

    pub fn as_slice(&self) -> &[Rat] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Rat> {
        self.0
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PolymatroidError {
    #[error("ground set of size {n} exceeds the supported maximum {max}")]
    GroundSetTooLarge { n: usize, max: usize },
    #[error("ground set must have at least one agent")]
    EmptyGroundSet,
    #[error("supply must be positive")]
    NonPositiveSupply,
    #[error("click-through rates must be positive and nonincreasing (violated at position {index})")]
    BadCtrs { index: usize },
    #[error("explicit table must list all {expected} subset values, got {got}")]
    BadTableSize { expected: usize, got: usize },
    #[error("explicit table value for mask {mask} is negative")]
    NegativeTableValue { mask: u32 },
    #[error("vector entry {index} is negative")]
    NegativeEntry { index: usize },
    #[error("exhaustive validation unsupported for n = {n} (limit {max})")]
    ValidationTooLarge { n: usize, max: usize },
    #[error("allocation is infeasible: x(S) > f(S) for S = {set:?}")]
    Infeasible { set: Subset },
}

/// Why an explicit table fails to define a polymatroid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmodularViolation {
    /// `f(empty) != 0`.
    EmptySetNonzero { value: Rat },
    /// `f(smaller) > f(larger)` for `smaller subset larger`.
    NotMonotone {
        smaller: Subset,
        larger: Subset,
        f_smaller: Rat,
        f_larger: Rat,
    },
    /// `f(S cap T) + f(S cup T) > f(S) + f(T)` for the witnessing pair.
    NotSubmodular {
        s: Subset,
        t: Subset,
        cap_cup: Rat,
        separate: Rat,
    },
}

impl fmt::Display for SubmodularViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubmodularViolation::EmptySetNonzero { value } => {
                write!(f, "f(empty) = {value}, expected 0")
            }
            SubmodularViolation::NotMonotone {
                smaller,
                larger,
                f_smaller,
                f_larger,
            } => write!(
                f,
                "not monotone: f({smaller:?}) = {f_smaller} > f({larger:?}) = {f_larger}"
            ),
            SubmodularViolation::NotSubmodular {
                s,
                t,
                cap_cup,
                separate,
            } => write!(
                f,
                "not submodular at S = {s:?}, T = {t:?}: f(S&T) + f(S|T) = {cap_cup} > f(S) + f(T) = {separate}"
            ),
        }
    }
}

/// The three built-in oracle forms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SubmodularForm {
    /// `f(S) = supply` for nonempty `S`: a multi-unit auction with
    /// `supply` divisible units.
    MultiUnit { supply: Rat },
    /// `f(S)` = sum of the `|S|` largest click-through rates; the
    /// single-keyword sponsored-search environment.
    SponsoredSearch { ctrs: Vec<Rat> },
    /// Arbitrary table indexed by subset mask.
    ExplicitTable { values: Vec<Rat> },
}

/// A monotone submodular function `f : 2^[n] -> Q_+` with `f(empty) = 0`,
/// defining the polymatroid environment.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubmodularFunction {
    n: usize,
    form: SubmodularForm,
}

impl SubmodularFunction {
    pub fn multi_unit(n: usize, supply: Rat) -> Result<Self, PolymatroidError> {
        check_ground_set(n)?;
        if supply <= Rat::zero() {
            return Err(PolymatroidError::NonPositiveSupply);
        }
        Ok(SubmodularFunction {
            n,
            form: SubmodularForm::MultiUnit { supply },
        })
    }

    pub fn sponsored_search(ctrs: Vec<Rat>) -> Result<Self, PolymatroidError> {
        check_ground_set(ctrs.len())?;
        for i in 0..ctrs.len() {
            if ctrs[i] <= Rat::zero() || (i > 0 && ctrs[i] > ctrs[i - 1]) {
                return Err(PolymatroidError::BadCtrs { index: i });
            }
        }
        Ok(SubmodularFunction {
            n: ctrs.len(),
            form: SubmodularForm::SponsoredSearch { ctrs },
        })
    }

    /// `values[mask]` = `f` of the subset with that mask. Shape and sign are
    /// checked here; monotonicity/submodularity via [`Self::validate`].
    pub fn explicit_table(n: usize, values: Vec<Rat>) -> Result<Self, PolymatroidError> {
        check_ground_set(n)?;
        if n > VALIDATE_MAX_N {
            return Err(PolymatroidError::ValidationTooLarge {
                n,
                max: VALIDATE_MAX_N,
            });
        }
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(PolymatroidError::BadTableSize {
                expected,
                got: values.len(),
            });
        }
        if let Some(mask) = values.iter().position(|v| v < &Rat::zero()) {
            return Err(PolymatroidError::NegativeTableValue { mask: mask as u32 });
        }
        Ok(SubmodularFunction {
            n,
            form: SubmodularForm::ExplicitTable { values },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> &SubmodularForm {
        &self.form
    }

    pub fn is_multi_unit(&self) -> bool {
        matches!(self.form, SubmodularForm::MultiUnit { .. })
    }

    pub fn ground_set(&self) -> Subset {
        Subset::full(self.n)
    }

    /// `f(S)`.
    pub fn eval(&self, s: Subset) -> Rat {
        debug_assert!(s.is_subset_of(self.ground_set()));
        match &self.form {
            SubmodularForm::MultiUnit { supply } => {
                if s.is_empty() {
                    Rat::zero()
                } else {
                    supply.clone()
                }
            }
            SubmodularForm::SponsoredSearch { ctrs } => {
                ctrs[..s.card() as usize].iter().sum()
            }
            SubmodularForm::ExplicitTable { values } => values[s.0 as usize].clone(),
        }
    }

    /// `f([n])`, the total mass; also the finite cap used in place of
    /// infinite demands.
    pub fn mass_cap(&self) -> Rat {
        self.eval(self.ground_set())
    }

    /// Exhaustively checks `f(empty) = 0`, monotonicity and submodularity.
    /// An empty list means the function is a valid polymatroid oracle.
    ///
    /// Explicit tables are checked via single-element monotone steps and the
    /// local exchange condition `f(S+i) + f(S+j) >= f(S+i+j) + f(S)`, both of
    /// which are equivalent to the global properties.
    pub fn validate(&self) -> Result<Vec<SubmodularViolation>, PolymatroidError> {
        let values = match &self.form {
            // Structurally monotone and submodular; constructors enforce the
            // parameter constraints.
            SubmodularForm::MultiUnit { .. } | SubmodularForm::SponsoredSearch { .. } => {
                return Ok(Vec::new())
            }
            SubmodularForm::ExplicitTable { values } => values,
        };
        if self.n > VALIDATE_MAX_N {
            return Err(PolymatroidError::ValidationTooLarge {
                n: self.n,
                max: VALIDATE_MAX_N,
            });
        }
        let mut violations = Vec::new();
        if !values[0].is_zero() {
            violations.push(SubmodularViolation::EmptySetNonzero {
                value: values[0].clone(),
            });
        }
        let full = self.ground_set();
        for s in full.subsets() {
            for i in full.minus(s).members() {
                let grown = s.with(i);
                if values[s.0 as usize] > values[grown.0 as usize] {
                    violations.push(SubmodularViolation::NotMonotone {
                        smaller: s,
                        larger: grown,
                        f_smaller: values[s.0 as usize].clone(),
                        f_larger: values[grown.0 as usize].clone(),
                    });
                }
                for j in full.minus(grown).members() {
                    if j < i {
                        continue;
                    }
                    let si = grown;
                    let sj = s.with(j);
                    let both = si.with(j);
                    let separate = &values[si.0 as usize] + &values[sj.0 as usize];
                    let cap_cup = &values[s.0 as usize] + &values[both.0 as usize];
                    if cap_cup > separate {
                        violations.push(SubmodularViolation::NotSubmodular {
                            s: si,
                            t: sj,
                            cap_cup,
                            separate,
                        });
                    }
                }
            }
        }
        Ok(violations)
    }

    /// The capped function `f_psi(S) = min_{T subset S} f(T) + psi(S \ T)`,
    /// which defines the polymatroid `P` intersected with the box
    /// `0 <= y <= psi`. Brute-force over `2^|S|` subsets, with a closed form
    /// for the multi-unit oracle.
    pub fn capped_eval(&self, psi: &SubsetVector, s: Subset) -> Rat {
        debug_assert_eq!(psi.len(), self.n);
        debug_assert!(s.is_subset_of(self.ground_set()));
        if s.is_empty() {
            return Rat::zero();
        }
        if let SubmodularForm::MultiUnit { supply } = &self.form {
            let box_mass = psi.sum(s);
            return if box_mass < *supply { box_mass } else { supply.clone() };
        }
        self.capped_eval_brute(psi, s)
    }

    /// The definitional minimization, with no closed-form short-circuit.
    /// Exposed so the multi-unit shortcut can be cross-checked.
    pub fn capped_eval_brute(&self, psi: &SubsetVector, s: Subset) -> Rat {
        assert!(
            s.card() <= CAPPED_EVAL_MAX_CARD,
            "capped_eval is brute force; |S| = {} exceeds {}",
            s.card(),
            CAPPED_EVAL_MAX_CARD
        );
        let mut best: Option<Rat> = None;
        for t in s.subsets() {
            let value = self.eval(t) + psi.sum(s.minus(t));
            if best.as_ref().is_none_or(|b| value < *b) {
                best = Some(value);
            }
        }
        best.expect("subset enumeration is nonempty")
    }

    /// Greedy maximization of `1^T y` over `P` intersected with the box
    /// `0 <= y <= psi`, filling coordinates in the given order. Whatever the
    /// order, the total equals `f_psi([n])`.
    pub fn greedy_max(&self, psi: &SubsetVector, order: &[usize]) -> SubsetVector {
        debug_assert_eq!(psi.len(), self.n);
        debug_assert!(is_permutation(order, self.n), "order must permute 0..n");
        let mut y = SubsetVector::zero(self.n);
        for &i in order {
            let room = self.increment_room(&y, i);
            let cap_room = psi.get(i) - y.get(i);
            let step = if cap_room < room { cap_room } else { room };
            if step > Rat::zero() {
                let new = y.get(i) + step;
                y.set(i, new);
            }
        }
        y
    }

    /// Largest `z` with `y + z e_i` still in `P`: `min_{S : i in S} f(S) - y(S)`.
    pub fn increment_room(&self, y: &SubsetVector, i: usize) -> Rat {
        let full = self.ground_set();
        debug_assert!(full.contains(i));
        let rest = full.without(i);
        let mut best: Option<Rat> = None;
        for t in rest.subsets() {
            let s = t.with(i);
            let room = self.eval(s) - y.sum(s);
            if best.as_ref().is_none_or(|b| room < *b) {
                best = Some(room);
            }
        }
        best.expect("ground set contains i")
    }

    /// `Ok(())` iff `x(S) <= f(S)` for every subset; otherwise names the
    /// lowest-mask violated set.
    pub fn check_feasible(&self, x: &SubsetVector) -> Result<(), PolymatroidError> {
        debug_assert_eq!(x.len(), self.n);
        for s in self.ground_set().subsets() {
            if x.sum(s) > self.eval(s) {
                return Err(PolymatroidError::Infeasible { set: s });
            }
        }
        Ok(())
    }

    /// Exact tightness test `x(S) = f(S)` for feasible `x`.
    pub fn is_tight(&self, x: &SubsetVector, s: Subset) -> Result<bool, PolymatroidError> {
        self.check_feasible(x)?;
        Ok(x.sum(s) == self.eval(s))
    }

    /// All tight sets of a feasible point, ascending mask order.
    pub fn tight_sets(&self, x: &SubsetVector) -> Result<Vec<Subset>, PolymatroidError> {
        self.check_feasible(x)?;
        Ok(self
            .ground_set()
            .subsets()
            .filter(|&s| x.sum(s) == self.eval(s))
            .collect())
    }
}

fn check_ground_set(n: usize) -> Result<(), PolymatroidError> {
    if n == 0 {
        return Err(PolymatroidError::EmptyGroundSet);
    }
    if n > MAX_GROUND_SET {
        return Err(PolymatroidError::GroundSetTooLarge {
            n,
            max: MAX_GROUND_SET,
        });
    }
    Ok(())
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}
