//! The ascending clinching auction over a polymatroid environment.
//!
//! One loop serves both the multi-unit and the general polyhedral variant;
//! they differ only in how the clinched amounts are computed, and on
//! multi-unit oracles the two clinch rules produce bit-identical traces.
//!
//! Per iteration: demands are computed at the current per-agent clock
//! prices, clinching transfers the under-demanded remnant supply, demands
//! are recomputed and the state is checkpointed, and then one agent's
//! price advances by `epsilon` in round-robin order. Infinite demands are represented by the finite cap `f([n])`,
//! which leaves every capped-function value unchanged.

use crate::payment::{demand, Agent, PaymentError};
use crate::polymatroid::{PolymatroidError, SubmodularForm, SubmodularFunction, Subset, SubsetVector};
use crate::rational::{is_multiple_of, Rat};
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AuctionError {
    #[error("scenario has {agents} agents but the environment has {n}")]
    AgentCountMismatch { agents: usize, n: usize },
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("price_order must be a permutation of the agents")]
    BadPriceOrder,
    #[error(transparent)]
    Polymatroid(#[from] PolymatroidError),
    #[error(transparent)]
    Payment(#[from] PaymentError),
    #[error("iteration bound {bound} exceeded; the clock failed to close demands")]
    IterationBoundExceeded { bound: u64 },
    #[error("internal invariant broke in iteration {iteration}: {detail}")]
    InternalInvariant { iteration: usize, detail: String },
    #[error("invariant violation at checkpoint {iteration}: {detail}")]
    InvariantViolation { iteration: usize, detail: String },
}

/// Which reading of Assumption 1 a scenario field violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assumption1Violation {
    pub agent: usize,
    pub field: Assumption1Field,
    pub value: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption1Field {
    Value,
    Beta,
}

/// A complete auction instance: environment, agents, price increment and
/// the round-robin order of clock advances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub f: SubmodularFunction,
    pub agents: Vec<Agent>,
    pub epsilon: Rat,
    pub price_order: Vec<usize>,
}

impl Scenario {
    pub fn new(
        f: SubmodularFunction,
        agents: Vec<Agent>,
        epsilon: Rat,
        price_order: Option<Vec<usize>>,
    ) -> Result<Self, AuctionError> {
        let n = f.n();
        if agents.len() != n {
            return Err(AuctionError::AgentCountMismatch {
                agents: agents.len(),
                n,
            });
        }
        if epsilon <= Rat::zero() {
            return Err(AuctionError::NonPositiveEpsilon);
        }
        let price_order = price_order.unwrap_or_else(|| (0..n).collect());
        if !is_permutation(&price_order, n) {
            return Err(AuctionError::BadPriceOrder);
        }
        Ok(Scenario {
            f,
            agents,
            epsilon,
            price_order,
        })
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }

    /// Values and finite average budgets must sit on the epsilon grid.
    /// Infinite beta (pure hard budgets) is treated as compliant.
    pub fn assumption1_violations(&self) -> Vec<Assumption1Violation> {
        let mut out = Vec::new();
        for (i, agent) in self.agents.iter().enumerate() {
            if !is_multiple_of(&agent.value, &self.epsilon) {
                out.push(Assumption1Violation {
                    agent: i,
                    field: Assumption1Field::Value,
                    value: agent.value.clone(),
                });
            }
            if let Some(beta) = agent.beta() {
                if !is_multiple_of(&beta, &self.epsilon) {
                    out.push(Assumption1Violation {
                        agent: i,
                        field: Assumption1Field::Beta,
                        value: beta,
                    });
                }
            }
        }
        out
    }

    pub fn is_assumption1_compliant(&self) -> bool {
        self.assumption1_violations().is_empty()
    }
}

/// Loop state at a checkpoint: exact allocation, payments, clock and the
/// just-recomputed demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionState {
    pub x: SubsetVector,
    pub pi: SubsetVector,
    pub price: SubsetVector,
    pub demand: SubsetVector,
}

/// One per-iteration record, taken after clinching and the demand
/// refresh, just before agent `price_agent`'s clock advances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub price_agent: usize,
    pub state: AuctionState,
    pub positive_demand: Subset,
    /// Saturation partition with respect to `price_agent`.
    pub unsaturated: Subset,
    pub saturated: Subset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClinchEvent {
    pub iteration: usize,
    pub agent: usize,
    pub amount: Rat,
    pub price: Rat,
}

/// Where in the iteration a demand hit zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropPhase {
    /// At the demand computation following a price advance; the agent kept
    /// some demand unclinched and lost it to the higher price.
    PriceStep,
    /// At the post-clinch refresh: the agent clinched his entire demand.
    PostClinch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    ClinchedFullDemand,
    PriceReachedValue,
    AverageBudgetBinding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropEvent {
    pub agent: usize,
    pub iteration: usize,
    pub phase: DropPhase,
    /// The clock price the agent faced when his demand first hit zero.
    pub price: Rat,
    pub reasons: Vec<DropReason>,
}

/// Full execution record of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub clinch_events: Vec<ClinchEvent>,
    pub drop_events: Vec<DropEvent>,
    /// First clock price at which each agent's demand was zero.
    pub dropping_price: Vec<Rat>,
    pub dropping_reasons: Vec<Vec<DropReason>>,
    /// Agents whose demand was positive at the first computation.
    pub initial_positive: Subset,
    pub price_order: Vec<usize>,
}

impl AuctionTrace {
    /// Drop events of agents that lost their demand to a price advance,
    /// i.e. without clinching it, in reverse chronological order.
    pub fn price_step_drops_reversed(&self) -> Vec<&DropEvent> {
        self.drop_events
            .iter()
            .filter(|e| e.phase == DropPhase::PriceStep)
            .rev()
            .collect()
    }

    pub fn drop_event_of(&self, agent: usize) -> Option<&DropEvent> {
        self.drop_events.iter().find(|e| e.agent == agent)
    }

    pub fn checkpoint_at(&self, iteration: usize) -> Option<&Checkpoint> {
        self.checkpoints.get(iteration - 1)
    }
}

/// One block of the nested tight-set family: `set` is the positive-demand
/// set just before `anchor` dropped at clock price `anchor_price`; `block`
/// is `set` minus the next smaller family member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyBlock {
    pub set: Subset,
    pub block: Subset,
    pub anchor: usize,
    pub anchor_price: Rat,
}

impl AuctionTrace {
    /// The nested family `S_1 subset ... subset S_k` anchored at the agents
    /// who dropped without clinching their demand, smallest set first.
    pub fn tight_set_family(&self) -> Vec<FamilyBlock> {
        let mut blocks: Vec<FamilyBlock> = Vec::new();
        let mut prev = Subset::EMPTY;
        // Reverse chronological: the last such dropper anchors the
        // smallest set of the family.
        for event in self.price_step_drops_reversed() {
            let set = match self.checkpoint_at(event.iteration - 1) {
                Some(cp) => cp.positive_demand,
                None => self.initial_positive,
            };
            blocks.push(FamilyBlock {
                set,
                block: set.minus(prev),
                anchor: event.agent,
                anchor_price: event.price.clone(),
            });
            prev = set;
        }
        blocks
    }
}

/// The auction's final allocation and payments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub x: SubsetVector,
    pub pi: SubsetVector,
}

/// How clinched amounts are computed each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClinchRule {
    /// Closed form for multi-unit oracles, capped-function route otherwise.
    #[default]
    Auto,
    /// Always the capped-function route, whatever the oracle.
    General,
    /// The multi-unit remnant-supply formula; only valid for multi-unit
    /// oracles.
    MultiUnitFormula,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Check the loop invariants at every checkpoint and fail the run on
    /// a violation.
    pub check_invariants: bool,
    pub clinch_rule: ClinchRule,
}

/// Clinched amounts via the capped function:
/// `delta_i = [f_{x+d}([n]) - f_{x+(0,d_{-i})}([n])]^+`.
pub fn clinch_amounts(
    f: &SubmodularFunction,
    x: &SubsetVector,
    d: &SubsetVector,
) -> Result<SubsetVector, AuctionError> {
    f.check_feasible(x)?;
    let full = f.ground_set();
    let psi = x.add(d);
    let whole = f.capped_eval(&psi, full);
    let mut delta = SubsetVector::zero(f.n());
    for i in 0..f.n() {
        if d.get(i).is_zero() {
            continue;
        }
        let without = f.capped_eval(&psi.with_coord(i, x.get(i).clone()), full);
        let gain = &whole - &without;
        if gain > Rat::zero() {
            delta.set(i, gain);
        }
    }
    Ok(delta)
}

/// The multi-unit remnant-supply shortcut:
/// `delta_i = [supply - sum_j x_j - sum_{j != i} d_j]^+`.
pub fn clinch_amounts_multi_unit(
    supply: &Rat,
    x: &SubsetVector,
    d: &SubsetVector,
) -> SubsetVector {
    let allocated = x.total();
    let total_demand = d.total();
    let mut delta = SubsetVector::zero(x.len());
    for i in 0..x.len() {
        let others = &total_demand - d.get(i);
        let slack = supply - &allocated - others;
        if slack > Rat::zero() {
            delta.set(i, slack);
        }
    }
    delta
}

/// Saturation with respect to agent `k`: with `psi = (x_k, x_{-k} + d_{-k})`,
/// agent `i` is k-unsaturated iff `psi_i = f_psi([n]) - f_psi([n] \ i)`.
/// Returns `(unsaturated, saturated)`.
pub fn saturation_partition(
    f: &SubmodularFunction,
    x: &SubsetVector,
    d: &SubsetVector,
    k: usize,
) -> (Subset, Subset) {
    let full = f.ground_set();
    let psi = x.add(d).with_coord(k, x.get(k).clone());
    let whole = f.capped_eval(&psi, full);
    let mut unsaturated = Subset::EMPTY;
    for i in 0..f.n() {
        let rest = f.capped_eval(&psi, full.without(i));
        if *psi.get(i) == &whole - &rest {
            unsaturated = unsaturated.with(i);
        }
    }
    (unsaturated, full.minus(unsaturated))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    /// Clinching twice in a row yields nothing, i.e.
    /// `f_{x+d}([n]) = f_{x+(0,d_{-i})}([n])` for all `i`.
    ClinchingMaximal,
    /// All goods can still be sold: `f_{x+d}([n]) = f([n])`.
    AllGoodsSellable,
    /// Every agent is self-unsaturated:
    /// `f_{x+(0,d_{-i})}([n]) = f_{x+(0,d_{-i})}([n] \ i) + x_i`.
    SelfUnsaturated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantViolation {
    pub kind: InvariantKind,
    pub agent: Option<usize>,
    pub lhs: Rat,
    pub rhs: Rat,
}

/// Exact checks of the three loop invariants for a checkpoint state.
pub fn check_invariants(f: &SubmodularFunction, state: &AuctionState) -> Vec<InvariantViolation> {
    let full = f.ground_set();
    let psi = state.x.add(&state.demand);
    let whole = f.capped_eval(&psi, full);
    let mut violations = Vec::new();
    let sellable = f.eval(full);
    if whole != sellable {
        violations.push(InvariantViolation {
            kind: InvariantKind::AllGoodsSellable,
            agent: None,
            lhs: whole.clone(),
            rhs: sellable,
        });
    }
    for i in 0..f.n() {
        let dropped = psi.with_coord(i, state.x.get(i).clone());
        let without_i = f.capped_eval(&dropped, full);
        if without_i != whole {
            violations.push(InvariantViolation {
                kind: InvariantKind::ClinchingMaximal,
                agent: Some(i),
                lhs: whole.clone(),
                rhs: without_i.clone(),
            });
        }
        let rest = f.capped_eval(&dropped, full.without(i));
        let shifted = &rest + state.x.get(i);
        if without_i != shifted {
            violations.push(InvariantViolation {
                kind: InvariantKind::SelfUnsaturated,
                agent: Some(i),
                lhs: without_i,
                rhs: shifted,
            });
        }
    }
    violations
}

/// Runs the auction with default options (clinch rule chosen by oracle
/// form, no invariant checking).
pub fn run(scenario: &Scenario) -> Result<(Outcome, AuctionTrace), AuctionError> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(
    scenario: &Scenario,
    options: &RunOptions,
) -> Result<(Outcome, AuctionTrace), AuctionError> {
    let f = &scenario.f;
    let n = scenario.n();
    let cap = f.mass_cap();
    let eps = &scenario.epsilon;
    let use_multi_unit_rule = match options.clinch_rule {
        ClinchRule::Auto => f.is_multi_unit(),
        ClinchRule::General => false,
        ClinchRule::MultiUnitFormula => {
            if !f.is_multi_unit() {
                return Err(AuctionError::InternalInvariant {
                    iteration: 0,
                    detail: "multi-unit clinch rule on a non-multi-unit oracle".into(),
                });
            }
            true
        }
    };

    let mut x = SubsetVector::zero(n);
    let mut pi = SubsetVector::zero(n);
    let mut price = SubsetVector::zero(n);
    let mut order_pos = 0usize;

    let mut trace = AuctionTrace {
        checkpoints: Vec::new(),
        clinch_events: Vec::new(),
        drop_events: Vec::new(),
        dropping_price: vec![Rat::zero(); n],
        dropping_reasons: vec![Vec::new(); n],
        initial_positive: Subset::EMPTY,
        price_order: scenario.price_order.clone(),
    };
    let mut dropped = vec![false; n];

    // Demand vanishes for good once an agent's clock passes his value, so
    // n * (v_max/eps + 2) clock steps suffice.
    let v_max = scenario
        .agents
        .iter()
        .map(|a| &a.value)
        .max()
        .cloned()
        .unwrap_or_else(Rat::zero);
    let steps = (v_max / eps).ceil().to_integer();
    let bound: u64 = (n as u64) * (u64::try_from(steps).unwrap_or(u64::MAX).saturating_add(2));
    let bound = bound.max(1);

    let mut prev_demand: Option<SubsetVector> = None;
    let mut iteration = 0usize;
    loop {
        iteration += 1;
        if iteration as u64 > bound {
            return Err(AuctionError::IterationBoundExceeded { bound });
        }
        let hat = scenario.price_order[order_pos];

        let demands = compute_demands(scenario, &x, &pi, &price, &cap)?;
        match &prev_demand {
            Some(prev) => {
                #[allow(clippy::needless_range_loop)]
                for i in 0..n {
                    if !dropped[i] && prev.get(i) > &Rat::zero() && demands.get(i).is_zero() {
                        record_drop(
                            scenario,
                            &mut trace,
                            &mut dropped,
                            i,
                            iteration,
                            DropPhase::PriceStep,
                            &x,
                            &pi,
                            &price,
                            None,
                        );
                    }
                }
            }
            None => {
                #[allow(clippy::needless_range_loop)]
                for i in 0..n {
                    if demands.get(i) > &Rat::zero() {
                        trace.initial_positive = trace.initial_positive.with(i);
                    } else {
                        // Never had positive demand; the dropping price is
                        // the opening clock.
                        dropped[i] = true;
                        trace.dropping_price[i] = Rat::zero();
                        trace.dropping_reasons[i] =
                            drop_reasons(scenario, i, &x, &pi, &price, None);
                    }
                }
            }
        }

        let delta = if use_multi_unit_rule {
            let supply = match f.form() {
                SubmodularForm::MultiUnit { supply } => supply,
                _ => unreachable!("guarded above"),
            };
            let mut delta = clinch_amounts_multi_unit(supply, &x, &demands);
            // The remnant-supply polytope caps clinching at the demand box;
            // the printed formula exceeds it only when the supply is
            // under-demanded outright.
            for i in 0..n {
                if delta.get(i) > demands.get(i) {
                    delta.set(i, demands.get(i).clone());
                }
            }
            delta
        } else {
            clinch_amounts(f, &x, &demands)?
        };

        for i in 0..n {
            let amount = delta.get(i).clone();
            if amount.is_zero() {
                continue;
            }
            if amount > *demands.get(i) {
                return Err(AuctionError::InternalInvariant {
                    iteration,
                    detail: format!("agent {i} clinched {amount} above demand {}", demands.get(i)),
                });
            }
            x.set(i, x.get(i) + &amount);
            pi.set(i, pi.get(i) + price.get(i) * &amount);
            trace.clinch_events.push(ClinchEvent {
                iteration,
                agent: i,
                amount,
                price: price.get(i).clone(),
            });
        }
        if let Err(PolymatroidError::Infeasible { set }) = f.check_feasible(&x) {
            return Err(AuctionError::InternalInvariant {
                iteration,
                detail: format!("allocation left the polymatroid on {set:?}"),
            });
        }

        let refreshed = compute_demands(scenario, &x, &pi, &price, &cap)?;
        for i in 0..n {
            if !dropped[i] && demands.get(i) > &Rat::zero() && refreshed.get(i).is_zero() {
                record_drop(
                    scenario,
                    &mut trace,
                    &mut dropped,
                    i,
                    iteration,
                    DropPhase::PostClinch,
                    &x,
                    &pi,
                    &price,
                    Some((delta.get(i), demands.get(i))),
                );
            }
        }

        let positive = positive_set(&refreshed);
        let (unsaturated, saturated) = saturation_partition(f, &x, &refreshed, hat);
        let state = AuctionState {
            x: x.clone(),
            pi: pi.clone(),
            price: price.clone(),
            demand: refreshed.clone(),
        };
        if options.check_invariants {
            let violations = check_invariants(f, &state);
            if !violations.is_empty() {
                return Err(AuctionError::InvariantViolation {
                    iteration,
                    detail: format!("{violations:?}"),
                });
            }
        }
        trace.checkpoints.push(Checkpoint {
            iteration,
            price_agent: hat,
            state,
            positive_demand: positive,
            unsaturated,
            saturated,
        });

        if positive.is_empty() {
            break;
        }
        price.set(hat, price.get(hat) + eps);
        order_pos = (order_pos + 1) % n;
        prev_demand = Some(refreshed);
    }

    Ok((Outcome { x, pi }, trace))
}

fn compute_demands(
    scenario: &Scenario,
    x: &SubsetVector,
    pi: &SubsetVector,
    price: &SubsetVector,
    cap: &Rat,
) -> Result<SubsetVector, AuctionError> {
    let mut d = SubsetVector::zero(scenario.n());
    for (i, agent) in scenario.agents.iter().enumerate() {
        d.set(i, demand(agent, x.get(i), pi.get(i), price.get(i), cap)?);
    }
    Ok(d)
}

fn positive_set(d: &SubsetVector) -> Subset {
    let mut s = Subset::EMPTY;
    for i in 0..d.len() {
        if d.get(i) > &Rat::zero() {
            s = s.with(i);
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn record_drop(
    scenario: &Scenario,
    trace: &mut AuctionTrace,
    dropped: &mut [bool],
    agent: usize,
    iteration: usize,
    phase: DropPhase,
    x: &SubsetVector,
    pi: &SubsetVector,
    price: &SubsetVector,
    clinch: Option<(&Rat, &Rat)>,
) {
    dropped[agent] = true;
    let reasons = drop_reasons(scenario, agent, x, pi, price, clinch);
    debug_assert!(
        !reasons.is_empty(),
        "agent {agent} dropped at {} with no classifiable reason",
        price.get(agent)
    );
    trace.dropping_price[agent] = price.get(agent).clone();
    trace.dropping_reasons[agent] = reasons.clone();
    trace.drop_events.push(DropEvent {
        agent,
        iteration,
        phase,
        price: price.get(agent).clone(),
        reasons,
    });
}

/// Classifies a zero demand: full clinch first, then price at value, then
/// a binding average budget; coincidences record every applicable reason.
fn drop_reasons(
    scenario: &Scenario,
    agent: usize,
    x: &SubsetVector,
    pi: &SubsetVector,
    price: &SubsetVector,
    clinch: Option<(&Rat, &Rat)>,
) -> Vec<DropReason> {
    let mut reasons = Vec::new();
    if let Some((delta, demand_before)) = clinch {
        if !delta.is_zero() && delta == demand_before {
            reasons.push(DropReason::ClinchedFullDemand);
        }
    }
    let a = &scenario.agents[agent];
    if price.get(agent) >= &a.value {
        reasons.push(DropReason::PriceReachedValue);
    }
    if let Some(beta) = a.beta() {
        if price.get(agent) > &beta && *pi.get(agent) == &beta * x.get(agent) {
            reasons.push(DropReason::AverageBudgetBinding);
        }
    }
    reasons
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payment::AbilityToPay;
    use crate::rational::{rat, rat_int};

    fn avg_agent(value: i64, beta: i64) -> Agent {
        Agent::new(
            rat_int(value),
            AbilityToPay::average_budget(rat_int(beta)).unwrap(),
        )
        .unwrap()
    }

    fn multi_unit_scenario(supply: i64, values: &[(i64, i64)], eps: i64) -> Scenario {
        let f = SubmodularFunction::multi_unit(values.len(), rat_int(supply)).unwrap();
        let agents = values.iter().map(|&(v, b)| avg_agent(v, b)).collect();
        Scenario::new(f, agents, rat_int(eps), None).unwrap()
    }

    #[test]
    fn clinch_amounts_examples() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        let x = SubsetVector::zero(2);
        let both = SubsetVector::constant(2, rat_int(1));
        assert!(clinch_amounts(&f, &x, &both).unwrap().is_zero());

        let only_first = SubsetVector::new(vec![rat_int(1), rat_int(0)]).unwrap();
        let delta = clinch_amounts(&f, &x, &only_first).unwrap();
        assert_eq!(delta.as_slice(), &[rat_int(1), rat_int(0)]);

        assert!(clinch_amounts(&f, &x, &SubsetVector::zero(2))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn clinch_amounts_rejects_infeasible_allocation() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        let x = SubsetVector::new(vec![rat_int(2), rat_int(0)]).unwrap();
        assert!(matches!(
            clinch_amounts(&f, &x, &SubsetVector::zero(2)),
            Err(AuctionError::Polymatroid(PolymatroidError::Infeasible { .. }))
        ));
    }

    #[test]
    fn multi_unit_formula_examples() {
        let x = SubsetVector::zero(2);
        let d = SubsetVector::new(vec![rat_int(1), rat_int(0)]).unwrap();
        let delta = clinch_amounts_multi_unit(&rat_int(1), &x, &d);
        assert_eq!(delta.as_slice(), &[rat_int(1), rat_int(0)]);

        let d = SubsetVector::constant(2, rat_int(1));
        assert!(clinch_amounts_multi_unit(&rat_int(1), &x, &d).is_zero());

        let x = SubsetVector::constant(2, rat_int(1));
        let d = SubsetVector::new(vec![rat_int(2), rat_int(0)]).unwrap();
        let delta = clinch_amounts_multi_unit(&rat_int(3), &x, &d);
        assert_eq!(delta.as_slice(), &[rat_int(1), rat_int(0)]);
    }

    #[test]
    fn clinch_rules_agree_on_demanded_states() {
        let f = SubmodularFunction::multi_unit(3, rat(3, 2)).unwrap();
        let supply = rat(3, 2);
        let x = SubsetVector::new(vec![rat(1, 2), rat(1, 4), rat_int(0)]).unwrap();
        // Total x + d covers the supply, as the sellable-supply
        // invariant guarantees in runs.
        let d = SubsetVector::new(vec![rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap();
        let via_capped = clinch_amounts(&f, &x, &d).unwrap();
        let via_formula = clinch_amounts_multi_unit(&supply, &x, &d);
        assert_eq!(via_capped, via_formula);
    }

    #[test]
    fn two_agent_run_example() {
        let scenario = multi_unit_scenario(1, &[(3, 100), (2, 100)], 1);
        let (outcome, trace) = run(&scenario).unwrap();
        assert_eq!(outcome.x.as_slice(), &[rat_int(1), rat_int(0)]);
        assert_eq!(outcome.pi.as_slice(), &[rat_int(2), rat_int(0)]);
        assert_eq!(trace.dropping_price, vec![rat_int(3), rat_int(2)]);
        assert_eq!(
            trace.dropping_reasons[1],
            vec![DropReason::PriceReachedValue]
        );
        // Positive-demand sets shrink.
        let mut last = trace.initial_positive;
        for cp in &trace.checkpoints {
            assert!(cp.positive_demand.is_subset_of(last));
            last = cp.positive_demand;
        }
    }

    #[test]
    fn two_agent_trace_family_is_nested_and_anchored() {
        let scenario = multi_unit_scenario(1, &[(3, 100), (2, 100)], 1);
        let (_, trace) = run(&scenario).unwrap();
        let family = trace.tight_set_family();
        // Agent 1 drops at p = 2 without clinching, then agent 0 at p = 3:
        // the family is {0} inside {0,1}, anchored at those prices.
        assert_eq!(family.len(), 2);
        assert_eq!(family[0].set, Subset::singleton(0));
        assert_eq!(family[0].anchor, 0);
        assert_eq!(family[0].anchor_price, rat_int(3));
        assert_eq!(family[1].set, Subset::full(2));
        assert_eq!(family[1].block, Subset::singleton(1));
        assert_eq!(family[1].anchor, 1);
        assert_eq!(family[1].anchor_price, rat_int(2));
    }

    #[test]
    fn price_order_is_honored_and_recorded() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        let agents = vec![avg_agent(2, 100), avg_agent(2, 100)];
        let forward =
            Scenario::new(f.clone(), agents.clone(), rat_int(1), Some(vec![0, 1])).unwrap();
        let backward = Scenario::new(f, agents, rat_int(1), Some(vec![1, 0])).unwrap();
        let (out_fwd, trace_fwd) = run(&forward).unwrap();
        let (out_bwd, trace_bwd) = run(&backward).unwrap();
        assert_eq!(trace_fwd.price_order, vec![0, 1]);
        assert_eq!(trace_bwd.price_order, vec![1, 0]);
        // With tied values the clock order decides who exits first, so the
        // allocation flips with the order.
        assert_eq!(out_fwd.x.as_slice(), &[rat_int(0), rat_int(1)]);
        assert_eq!(out_bwd.x.as_slice(), &[rat_int(1), rat_int(0)]);
    }

    #[test]
    fn single_agent_clinches_everything_at_price_zero() {
        let f = SubmodularFunction::multi_unit(1, rat_int(1)).unwrap();
        let scenario = Scenario::new(f, vec![avg_agent(1, 100)], rat_int(1), None).unwrap();
        let (outcome, trace) = run(&scenario).unwrap();
        assert_eq!(outcome.x.as_slice(), &[rat_int(1)]);
        assert_eq!(outcome.pi.as_slice(), &[rat_int(0)]);
        assert_eq!(trace.clinch_events.len(), 1);
        assert_eq!(trace.clinch_events[0].price, rat_int(0));
    }

    #[test]
    fn all_zero_values_terminate_immediately() {
        let scenario = multi_unit_scenario(1, &[(0, 5), (0, 5)], 1);
        let (outcome, trace) = run(&scenario).unwrap();
        assert!(outcome.x.is_zero());
        assert!(outcome.pi.is_zero());
        assert_eq!(trace.checkpoints.len(), 1);
        assert!(trace.initial_positive.is_empty());
    }

    #[test]
    fn saturation_partition_examples() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        let x = SubsetVector::zero(2);
        let d = SubsetVector::constant(2, rat_int(1));
        let (unsat, sat) = saturation_partition(&f, &x, &d, 0);
        assert_eq!(unsat, Subset::full(2));
        assert!(sat.is_empty());

        let (unsat, _) = saturation_partition(&f, &x, &SubsetVector::zero(2), 0);
        assert_eq!(unsat, Subset::full(2));

        let ss = SubmodularFunction::sponsored_search(vec![rat_int(2), rat_int(1)]).unwrap();
        let d = SubsetVector::constant(2, rat_int(2));
        let (unsat, sat) = saturation_partition(&ss, &x, &d, 0);
        assert_eq!(unsat, Subset::full(2));
        assert!(sat.is_empty());
    }

    #[test]
    fn invariants_hold_at_multi_unit_start_state() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        let cap = f.mass_cap();
        let state = AuctionState {
            x: SubsetVector::zero(2),
            pi: SubsetVector::zero(2),
            price: SubsetVector::zero(2),
            demand: SubsetVector::constant(2, cap),
        };
        assert!(check_invariants(&f, &state).is_empty());
    }

    #[test]
    fn invariant_violations_are_detected() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        // Agent 1's demand zeroed while agent 0 still demands: clinching
        // would hand agent 0 the good, so maximality fails.
        let state = AuctionState {
            x: SubsetVector::zero(2),
            pi: SubsetVector::zero(2),
            price: SubsetVector::zero(2),
            demand: SubsetVector::new(vec![rat_int(1), rat_int(0)]).unwrap(),
        };
        let violations = check_invariants(&f, &state);
        assert!(violations
            .iter()
            .any(|v| v.kind == InvariantKind::ClinchingMaximal));
        assert!(!violations
            .iter()
            .any(|v| v.kind == InvariantKind::AllGoodsSellable));

        // No demand at all: the goods can no longer be sold.
        let state = AuctionState {
            demand: SubsetVector::zero(2),
            ..state
        };
        let violations = check_invariants(&f, &state);
        assert!(violations
            .iter()
            .any(|v| v.kind == InvariantKind::AllGoodsSellable));
    }

    #[test]
    fn run_checks_invariants_when_asked() {
        let scenario = multi_unit_scenario(1, &[(3, 100), (2, 100)], 1);
        let options = RunOptions {
            check_invariants: true,
            ..Default::default()
        };
        assert!(run_with(&scenario, &options).is_ok());
    }

    #[test]
    fn multi_unit_paths_are_bit_identical() {
        let scenario = multi_unit_scenario(2, &[(3, 2), (2, 100), (4, 1)], 1);
        let general = run_with(
            &scenario,
            &RunOptions {
                clinch_rule: ClinchRule::General,
                ..Default::default()
            },
        )
        .unwrap();
        let closed = run_with(
            &scenario,
            &RunOptions {
                clinch_rule: ClinchRule::MultiUnitFormula,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(general, closed);
    }

    #[test]
    fn assumption1_violations_are_reported() {
        let f = SubmodularFunction::multi_unit(1, rat_int(1)).unwrap();
        let agent = Agent::new(
            rat(1, 3),
            AbilityToPay::average_budget(rat(1, 2)).unwrap(),
        )
        .unwrap();
        let scenario = Scenario::new(f, vec![agent], rat(1, 2), None).unwrap();
        let violations = scenario.assumption1_violations();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, Assumption1Field::Value);
        assert!(!scenario.is_assumption1_compliant());
    }

    #[test]
    fn bad_scenarios_are_rejected() {
        let f = SubmodularFunction::multi_unit(2, rat_int(1)).unwrap();
        assert!(matches!(
            Scenario::new(f.clone(), vec![avg_agent(1, 1)], rat_int(1), None),
            Err(AuctionError::AgentCountMismatch { .. })
        ));
        let agents = vec![avg_agent(1, 1), avg_agent(1, 1)];
        assert!(matches!(
            Scenario::new(f.clone(), agents.clone(), rat_int(0), None),
            Err(AuctionError::NonPositiveEpsilon)
        ));
        assert!(matches!(
            Scenario::new(f, agents, rat_int(1), Some(vec![0, 0])),
            Err(AuctionError::BadPriceOrder)
        ));
    }

    #[test]
    fn dropped_demand_stays_zero_at_higher_prices() {
        let scenario = multi_unit_scenario(1, &[(3, 2), (5, 100)], 1);
        let (outcome, trace) = run(&scenario).unwrap();
        let cap = scenario.f.mass_cap();
        for event in &trace.drop_events {
            let i = event.agent;
            for bump in [rat_int(1), rat_int(7)] {
                let higher = &event.price + bump;
                let d = demand(
                    &scenario.agents[i],
                    outcome.x.get(i),
                    outcome.pi.get(i),
                    &higher,
                    &cap,
                )
                .unwrap();
                assert!(d.is_zero());
            }
        }
    }
}
