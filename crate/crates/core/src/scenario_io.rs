//! Scenario documents, run reports and the seeded scenario generator.
//!
//! Scenarios and reports are JSON with every rational written as an exact
//! string (`"7/4"`, `"3"`); floats never appear, so documents round-trip
//! bit-exactly. Explicit tables are keyed by the subset's bitmask in
//! little-endian agent order.

use crate::auction::{
    AuctionTrace, Checkpoint, DropReason, Outcome, Scenario,
};
use crate::payment::{AbilityToPay, Agent, PaymentError};
use crate::polymatroid::{PolymatroidError, SubmodularForm, SubmodularFunction, Subset, SubsetVector};
use crate::rational::{parse_nonneg_rat, parse_rat, rat_int, rat_to_string, ParseRatError, Rat};
use crate::verification::{CheckStatus, VerificationReport};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{field}`: {source}")]
    BadRational {
        field: String,
        source: ParseRatError,
    },
    #[error("environment: {0}")]
    Environment(#[from] PolymatroidError),
    #[error("agent {index}: {source}")]
    BadAgent {
        index: usize,
        source: PaymentError,
    },
    #[error("explicit table misses the value for mask {mask}")]
    MissingTableEntry { mask: u32 },
    #[error("explicit table key `{key}` is not a subset mask below 2^n")]
    BadTableKey { key: String },
    #[error("scenario: {0}")]
    Scenario(#[from] crate::auction::AuctionError),
    #[error("environment is invalid: {0}")]
    InvalidEnvironment(String),
    #[error("generator: {0}")]
    Generator(String),
}

/// JSON numbers-as-strings, accepting bare integers for convenience.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum RatText {
    Int(i64),
    Text(String),
}

impl RatText {
    fn parse(&self, field: &str) -> Result<Rat, IoError> {
        let r = match self {
            RatText::Int(v) => return Ok(rat_int(*v)),
            RatText::Text(s) => parse_rat(s),
        };
        r.map_err(|source| IoError::BadRational {
            field: field.to_string(),
            source,
        })
    }

    fn parse_nonneg(&self, field: &str) -> Result<Rat, IoError> {
        let r = match self {
            RatText::Int(v) if *v >= 0 => return Ok(rat_int(*v)),
            RatText::Int(v) => Err(ParseRatError::Negative(v.to_string())),
            RatText::Text(s) => parse_nonneg_rat(s),
        };
        r.map_err(|source| IoError::BadRational {
            field: field.to_string(),
            source,
        })
    }

    fn of(r: &Rat) -> RatText {
        RatText::Text(rat_to_string(r))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentDoc {
    MultiUnit {
        supply: RatText,
    },
    SponsoredSearch {
        ctrs: Vec<RatText>,
    },
    ExplicitTable {
        n: usize,
        values: BTreeMap<String, RatText>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AgentDoc {
    pub value: RatText,
    /// `[intercept, slope]` pairs of the ability-to-pay envelope.
    pub ability_to_pay: Vec<[RatText; 2]>,
}

/// The on-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScenarioFile {
    pub environment: EnvironmentDoc,
    pub agents: Vec<AgentDoc>,
    pub epsilon: RatText,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_order: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<ScenarioFile, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates the document into a runnable [`Scenario`]; explicit tables
    /// must pass the exhaustive polymatroid checks.
    pub fn to_scenario(&self) -> Result<Scenario, IoError> {
        let f = match &self.environment {
            EnvironmentDoc::MultiUnit { supply } => {
                let supply = supply.parse_nonneg("environment.supply")?;
                SubmodularFunction::multi_unit(self.agents.len(), supply)?
            }
            EnvironmentDoc::SponsoredSearch { ctrs } => {
                let ctrs = ctrs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.parse_nonneg(&format!("environment.ctrs[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                SubmodularFunction::sponsored_search(ctrs)?
            }
            EnvironmentDoc::ExplicitTable { n, values } => {
                if *n > crate::polymatroid::VALIDATE_MAX_N {
                    return Err(IoError::Environment(
                        PolymatroidError::ValidationTooLarge {
                            n: *n,
                            max: crate::polymatroid::VALIDATE_MAX_N,
                        },
                    ));
                }
                let size = 1u64 << *n as u32;
                let mut table = vec![None; size as usize];
                for (key, value) in values {
                    let mask: u64 = key
                        .parse()
                        .map_err(|_| IoError::BadTableKey { key: key.clone() })?;
                    if mask >= size {
                        return Err(IoError::BadTableKey { key: key.clone() });
                    }
                    table[mask as usize] =
                        Some(value.parse_nonneg(&format!("environment.values[{key}]"))?);
                }
                let mut dense = Vec::with_capacity(size as usize);
                for (mask, slot) in table.into_iter().enumerate() {
                    dense.push(slot.ok_or(IoError::MissingTableEntry { mask: mask as u32 })?);
                }
                let f = SubmodularFunction::explicit_table(*n, dense)?;
                let violations = f.validate()?;
                if !violations.is_empty() {
                    let text = violations
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("; ");
                    return Err(IoError::InvalidEnvironment(text));
                }
                f
            }
        };
        let mut agents = Vec::with_capacity(self.agents.len());
        for (index, doc) in self.agents.iter().enumerate() {
            let value = doc.value.parse_nonneg(&format!("agents[{index}].value"))?;
            let pieces = doc
                .ability_to_pay
                .iter()
                .enumerate()
                .map(|(j, [a, b])| {
                    Ok((
                        a.parse_nonneg(&format!("agents[{index}].ability_to_pay[{j}][0]"))?,
                        b.parse_nonneg(&format!("agents[{index}].ability_to_pay[{j}][1]"))?,
                    ))
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            let alpha =
                AbilityToPay::new(pieces).map_err(|source| IoError::BadAgent { index, source })?;
            let agent =
                Agent::new(value, alpha).map_err(|source| IoError::BadAgent { index, source })?;
            agents.push(agent);
        }
        let epsilon = self.epsilon.parse("epsilon")?;
        Ok(Scenario::new(f, agents, epsilon, self.price_order.clone())?)
    }

    /// The canonical document for a scenario; inverse of [`Self::to_scenario`]
    /// up to rational normalization.
    pub fn from_scenario(scenario: &Scenario, seed: Option<u64>) -> ScenarioFile {
        let environment = match scenario.f.form() {
            SubmodularForm::MultiUnit { supply } => EnvironmentDoc::MultiUnit {
                supply: RatText::of(supply),
            },
            SubmodularForm::SponsoredSearch { ctrs } => EnvironmentDoc::SponsoredSearch {
                ctrs: ctrs.iter().map(RatText::of).collect(),
            },
            SubmodularForm::ExplicitTable { values } => EnvironmentDoc::ExplicitTable {
                n: scenario.n(),
                values: values
                    .iter()
                    .enumerate()
                    .map(|(mask, v)| (mask.to_string(), RatText::of(v)))
                    .collect(),
            },
        };
        let agents = scenario
            .agents
            .iter()
            .map(|agent| AgentDoc {
                value: RatText::of(&agent.value),
                ability_to_pay: agent
                    .alpha
                    .pieces()
                    .iter()
                    .map(|p| [RatText::of(&p.intercept), RatText::of(&p.slope)])
                    .collect(),
            })
            .collect();
        let identity: Vec<usize> = (0..scenario.n()).collect();
        ScenarioFile {
            environment,
            agents,
            epsilon: RatText::of(&scenario.epsilon),
            price_order: (scenario.price_order != identity).then(|| scenario.price_order.clone()),
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    /// FNV-1a over the canonical JSON; embedded in reports so a report can
    /// be matched to its input.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_json().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        format!("fnv1a:{h:016x}")
    }
}

/// Parses and validates a scenario document in one step.
pub fn parse_scenario(text: &str) -> Result<Scenario, IoError> {
    ScenarioFile::parse(text)?.to_scenario()
}

/// The worked sponsored-search example: CTRs (2, 1), one high-value agent
/// on a tight average budget against a low-value agent with slack.
pub fn example1() -> ScenarioFile {
    ScenarioFile {
        environment: EnvironmentDoc::SponsoredSearch {
            ctrs: vec![RatText::Int(2), RatText::Int(1)],
        },
        agents: vec![
            AgentDoc {
                value: RatText::Int(10),
                ability_to_pay: vec![[RatText::Int(0), RatText::Int(1)]],
            },
            AgentDoc {
                value: RatText::Int(2),
                ability_to_pay: vec![[RatText::Int(0), RatText::Int(2)]],
            },
        ],
        epsilon: RatText::Text("1/4".into()),
        price_order: None,
        seed: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    MultiUnit,
    SponsoredSearch,
    ExplicitTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMix {
    HardOnly,
    AverageOnly,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct GenerateParams {
    pub n: usize,
    pub kind: EnvKind,
    /// Values are drawn from the epsilon grid up to this bound.
    pub v_max: Rat,
    pub epsilon: Rat,
    pub constraint_mix: ConstraintMix,
}

/// Deterministic scenario generation: same seed and parameters, same
/// document. Values and finite average budgets land on the epsilon grid,
/// so generated scenarios satisfy the grid assumption by construction.
/// Explicit tables are sums of weighted truncated rank functions, hence
/// monotone submodular, and are validated after construction.
pub fn generate(seed: u64, params: &GenerateParams) -> Result<ScenarioFile, IoError> {
    let n = params.n;
    if n == 0 || n > 8 {
        return Err(IoError::Generator(format!(
            "generated scenarios support 1 <= n <= 8, got {n}"
        )));
    }
    let eps = &params.epsilon;
    if *eps <= Rat::zero() {
        return Err(IoError::Generator("epsilon must be positive".into()));
    }
    let v_steps = (&params.v_max / eps).floor().to_integer();
    let v_steps = i64::try_from(v_steps).map_err(|_| {
        IoError::Generator("v_max/epsilon is too large to grid".into())
    })?;
    if v_steps < 1 {
        return Err(IoError::Generator(
            "v_max must be at least one epsilon".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = |rng: &mut ChaCha8Rng, lo: i64, hi: i64| -> Rat {
        rat_int(rng.random_range(lo..=hi)) * eps
    };

    let f = match params.kind {
        EnvKind::MultiUnit => {
            let supply = grid(&mut rng, 1, 2 * v_steps.clamp(1, 4));
            SubmodularFunction::multi_unit(n, supply)?
        }
        EnvKind::SponsoredSearch => {
            let mut ctrs: Vec<Rat> = (0..n).map(|_| grid(&mut rng, 1, 4)).collect();
            ctrs.sort_by(|a, b| b.cmp(a));
            SubmodularFunction::sponsored_search(ctrs)?
        }
        EnvKind::ExplicitTable => {
            let full = Subset::full(n);
            let terms: usize = rng.random_range(1..=3);
            let mut weighted_ranks = Vec::new();
            for _ in 0..terms {
                let mask = Subset(rng.random_range(1..=full.0));
                let cap: u32 = rng.random_range(1..=mask.card());
                let weight = grid(&mut rng, 1, 3);
                weighted_ranks.push((mask, cap, weight));
            }
            let mut values = Vec::with_capacity(1 << n);
            for s in full.subsets() {
                let mut total = Rat::zero();
                for (mask, cap, weight) in &weighted_ranks {
                    let rank = s.intersection(*mask).card().min(*cap);
                    total += weight * rat_int(rank as i64);
                }
                values.push(total);
            }
            let f = SubmodularFunction::explicit_table(n, values)?;
            debug_assert!(f.validate().expect("size within limits").is_empty());
            f
        }
    };

    let mut agents = Vec::with_capacity(n);
    for index in 0..n {
        let value = grid(&mut rng, 1, v_steps);
        let style: u8 = match params.constraint_mix {
            ConstraintMix::HardOnly => 0,
            ConstraintMix::AverageOnly => 1,
            ConstraintMix::Mixed => rng.random_range(0..3),
        };
        let pieces = match style {
            0 => vec![(grid(&mut rng, 1, 2 * v_steps), Rat::zero())],
            1 => vec![(Rat::zero(), grid(&mut rng, 1, v_steps + 2))],
            _ => vec![
                (Rat::zero(), grid(&mut rng, 1, v_steps + 2)),
                (grid(&mut rng, 1, 2 * v_steps), Rat::zero()),
            ],
        };
        let alpha =
            AbilityToPay::new(pieces).map_err(|source| IoError::BadAgent { index, source })?;
        let agent =
            Agent::new(value, alpha).map_err(|source| IoError::BadAgent { index, source })?;
        agents.push(agent);
    }

    let price_order = if rng.random_bool(0.5) {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        Some(order)
    } else {
        None
    };

    let scenario = Scenario::new(f, agents, eps.clone(), price_order)?;
    Ok(ScenarioFile::from_scenario(&scenario, Some(seed)))
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    Summary,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeDoc {
    pub x: Vec<String>,
    pub pi: Vec<String>,
}

impl OutcomeDoc {
    pub fn of(outcome: &Outcome) -> OutcomeDoc {
        OutcomeDoc {
            x: outcome.x.iter().map(rat_to_string).collect(),
            pi: outcome.pi.iter().map(rat_to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppingDoc {
    pub agent: usize,
    pub price: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyBlockDoc {
    pub set: Vec<usize>,
    pub block: Vec<usize>,
    pub anchor: usize,
    pub anchor_price: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummaryDoc {
    pub checkpoints: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointDoc {
    pub iteration: usize,
    pub price_agent: usize,
    pub x: Vec<String>,
    pub pi: Vec<String>,
    pub price: Vec<String>,
    pub demand: Vec<String>,
    pub positive_demand: Vec<usize>,
    pub unsaturated: Vec<usize>,
    pub saturated: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClinchEventDoc {
    pub iteration: usize,
    pub agent: usize,
    pub amount: String,
    pub price: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationEntryDoc {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationDoc {
    pub passed: bool,
    pub checks: Vec<VerificationEntryDoc>,
}

/// The self-contained run report. Deterministic for a given scenario:
/// rerunning reproduces it byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub scenario_hash: String,
    pub assumption1_compliant: bool,
    pub assumption1_note: String,
    pub outcome: OutcomeDoc,
    pub dropping: Vec<DroppingDoc>,
    pub tight_set_family: Vec<FamilyBlockDoc>,
    pub invariants: InvariantSummaryDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clinch_events: Option<Vec<ClinchEventDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<CheckpointDoc>>,
}

fn members(s: Subset) -> Vec<usize> {
    s.members().collect()
}

fn vec_doc(v: &SubsetVector) -> Vec<String> {
    v.iter().map(rat_to_string).collect()
}

fn reason_name(reason: &DropReason) -> String {
    match reason {
        DropReason::ClinchedFullDemand => "clinched_full_demand",
        DropReason::PriceReachedValue => "price_reached_value",
        DropReason::AverageBudgetBinding => "average_budget_binding",
    }
    .to_string()
}

fn status_name(status: CheckStatus) -> String {
    match status {
        CheckStatus::Pass => "pass",
        CheckStatus::Warn => "warn",
        CheckStatus::Fail => "fail",
    }
    .to_string()
}

pub fn build_run_report(
    file: &ScenarioFile,
    scenario: &Scenario,
    outcome: &Outcome,
    trace: &AuctionTrace,
    verification: Option<&VerificationReport>,
    trace_mode: TraceMode,
) -> RunReport {
    let invariant_violations: Vec<String> = trace
        .checkpoints
        .iter()
        .flat_map(|cp| {
            crate::auction::check_invariants(&scenario.f, &cp.state)
                .into_iter()
                .map(move |v| format!("iteration {}: {v:?}", cp.iteration))
        })
        .collect();
    let checkpoint_doc = |cp: &Checkpoint| CheckpointDoc {
        iteration: cp.iteration,
        price_agent: cp.price_agent,
        x: vec_doc(&cp.state.x),
        pi: vec_doc(&cp.state.pi),
        price: vec_doc(&cp.state.price),
        demand: vec_doc(&cp.state.demand),
        positive_demand: members(cp.positive_demand),
        unsaturated: members(cp.unsaturated),
        saturated: members(cp.saturated),
    };
    RunReport {
        tool: "polyclinch".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_hash: file.hash(),
        assumption1_compliant: scenario.is_assumption1_compliant(),
        assumption1_note: format!("{:?}", scenario.assumption1_violations()),
        outcome: OutcomeDoc::of(outcome),
        dropping: (0..scenario.n())
            .map(|agent| DroppingDoc {
                agent,
                price: rat_to_string(&trace.dropping_price[agent]),
                reasons: trace.dropping_reasons[agent].iter().map(reason_name).collect(),
            })
            .collect(),
        tight_set_family: trace
            .tight_set_family()
            .iter()
            .map(|b| FamilyBlockDoc {
                set: members(b.set),
                block: members(b.block),
                anchor: b.anchor,
                anchor_price: rat_to_string(&b.anchor_price),
            })
            .collect(),
        invariants: InvariantSummaryDoc {
            checkpoints: trace.checkpoints.len(),
            violations: invariant_violations,
        },
        verification: verification.map(|report| VerificationDoc {
            passed: report.passed(),
            checks: report
                .entries
                .iter()
                .map(|e| VerificationEntryDoc {
                    name: e.name.clone(),
                    status: status_name(e.status),
                    detail: e.detail.clone(),
                })
                .collect(),
        }),
        clinch_events: match trace_mode {
            TraceMode::Summary => None,
            TraceMode::Full => Some(
                trace
                    .clinch_events
                    .iter()
                    .map(|e| ClinchEventDoc {
                        iteration: e.iteration,
                        agent: e.agent,
                        amount: rat_to_string(&e.amount),
                        price: rat_to_string(&e.price),
                    })
                    .collect(),
            ),
        },
        checkpoints: match trace_mode {
            TraceMode::Summary => None,
            TraceMode::Full => Some(trace.checkpoints.iter().map(checkpoint_doc).collect()),
        },
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
