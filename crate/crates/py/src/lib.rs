//! Python bindings: drive scenarios, auctions and the verification suite
//! from Python. Exact rationals cross the boundary as strings ("7/4"),
//! reports and scenario documents as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use polyclinch::auction::{run_with, ClinchRule, RunOptions};
use polyclinch::rational::{parse_nonneg_rat, rat_to_string};
use polyclinch::scenario_io::{
    build_run_report, example1, generate, ConstraintMix, EnvKind, GenerateParams, ScenarioFile,
    TraceMode,
};
use polyclinch::verification::{
    pareto_check, vcg_baseline, verify_scenario, ParetoCheck, VerifyOptions,
};

fn value_err(message: impl ToString) -> PyErr {
    PyValueError::new_err(message.to_string())
}

/// `(x', pi', welfare_gain)`, all exact rational strings.
type Improvement = (Vec<String>, Vec<String>, String);

/// A validated auction scenario: environment, agents, epsilon, order.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    file: ScenarioFile,
    inner: polyclinch::Scenario,
}

impl Scenario {
    fn wrap(file: ScenarioFile) -> PyResult<Self> {
        let inner = file.to_scenario().map_err(value_err)?;
        Ok(Scenario { file, inner })
    }
}

#[pymethods]
impl Scenario {
    /// Parse and validate a scenario JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Scenario::wrap(ScenarioFile::parse(text).map_err(value_err)?)
    }

    /// The built-in worked example: CTRs (2, 1), agents (v=10, beta=1)
    /// and (v=2, beta=2).
    #[staticmethod]
    fn example1() -> PyResult<Self> {
        Scenario::wrap(example1())
    }

    /// Deterministic seeded generation. `kind` is one of "multi_unit",
    /// "sponsored_search", "explicit_table"; `constraint_mix` one of
    /// "hard", "average", "mixed". Rational bounds are exact strings.
    #[staticmethod]
    #[pyo3(signature = (seed, n, kind="multi_unit", v_max="6", epsilon="1", constraint_mix="mixed"))]
    fn generate(
        seed: u64,
        n: usize,
        kind: &str,
        v_max: &str,
        epsilon: &str,
        constraint_mix: &str,
    ) -> PyResult<Self> {
        let params = GenerateParams {
            n,
            kind: match kind {
                "multi_unit" => EnvKind::MultiUnit,
                "sponsored_search" => EnvKind::SponsoredSearch,
                "explicit_table" => EnvKind::ExplicitTable,
                other => return Err(value_err(format!("unknown kind `{other}`"))),
            },
            v_max: parse_nonneg_rat(v_max).map_err(value_err)?,
            epsilon: parse_nonneg_rat(epsilon).map_err(value_err)?,
            constraint_mix: match constraint_mix {
                "hard" => ConstraintMix::HardOnly,
                "average" => ConstraintMix::AverageOnly,
                "mixed" => ConstraintMix::Mixed,
                other => return Err(value_err(format!("unknown constraint mix `{other}`"))),
            },
        };
        Scenario::wrap(generate(seed, &params).map_err(value_err)?)
    }

    fn to_json(&self) -> String {
        self.file.to_json()
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn epsilon(&self) -> String {
        rat_to_string(&self.inner.epsilon)
    }

    fn assumption1_compliant(&self) -> bool {
        self.inner.is_assumption1_compliant()
    }

    /// Run the clinching auction; returns the run report as JSON.
    #[pyo3(signature = (check_invariants=true, full_trace=false))]
    fn run(&self, check_invariants: bool, full_trace: bool) -> PyResult<String> {
        let options = RunOptions {
            check_invariants,
            clinch_rule: ClinchRule::Auto,
        };
        let (outcome, trace) = run_with(&self.inner, &options).map_err(value_err)?;
        let mode = if full_trace {
            TraceMode::Full
        } else {
            TraceMode::Summary
        };
        let report = build_run_report(&self.file, &self.inner, &outcome, &trace, None, mode);
        Ok(report.to_json())
    }

    /// Final allocation and payments as two lists of rational strings.
    fn outcome(&self) -> PyResult<(Vec<String>, Vec<String>)> {
        let (outcome, _) = polyclinch::run(&self.inner).map_err(value_err)?;
        Ok((
            outcome.x.iter().map(rat_to_string).collect(),
            outcome.pi.iter().map(rat_to_string).collect(),
        ))
    }

    /// Run the verification suite; returns `(passed, report_json)`.
    #[pyo3(signature = (pareto=true, ic=false, oracle=false))]
    fn verify(&self, pareto: bool, ic: bool, oracle: bool) -> PyResult<(bool, String)> {
        let options = VerifyOptions {
            pareto,
            ic,
            oracle,
            oracle_seed: self.file.seed.unwrap_or(0),
        };
        let report = verify_scenario(&self.inner, &options).map_err(value_err)?;
        let (outcome, trace) = polyclinch::run(&self.inner).map_err(value_err)?;
        let doc = build_run_report(
            &self.file,
            &self.inner,
            &outcome,
            &trace,
            Some(&report),
            TraceMode::Summary,
        );
        Ok((report.passed(), doc.to_json()))
    }

    /// The VCG baseline on capped values min(v, beta): `(x, pi)`.
    fn vcg_baseline(&self) -> (Vec<String>, Vec<String>) {
        let outcome = vcg_baseline(&self.inner.f, &self.inner.agents);
        (
            outcome.x.iter().map(rat_to_string).collect(),
            outcome.pi.iter().map(rat_to_string).collect(),
        )
    }

    /// Exact Pareto check of an explicit outcome. Returns None when the
    /// outcome is efficient, otherwise `(x', pi', welfare_gain)`.
    fn pareto_improvement(
        &self,
        x: Vec<String>,
        pi: Vec<String>,
    ) -> PyResult<Option<Improvement>> {
        let parse_vec = |items: Vec<String>| -> PyResult<Vec<polyclinch::Rat>> {
            items
                .iter()
                .map(|s| parse_nonneg_rat(s).map_err(value_err))
                .collect()
        };
        let outcome = polyclinch::Outcome {
            x: polyclinch::SubsetVector::new(parse_vec(x)?).map_err(value_err)?,
            pi: polyclinch::SubsetVector::new(parse_vec(pi)?).map_err(value_err)?,
        };
        match pareto_check(&self.inner.f, &self.inner.agents, &outcome).map_err(value_err)? {
            ParetoCheck::Pass { .. } => Ok(None),
            ParetoCheck::Improvable(imp) => Ok(Some((
                imp.x.iter().map(rat_to_string).collect(),
                imp.pi.iter().map(rat_to_string).collect(),
                rat_to_string(&imp.welfare_gain),
            ))),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n={}, epsilon={}, assumption1={})",
            self.inner.n(),
            rat_to_string(&self.inner.epsilon),
            self.inner.is_assumption1_compliant(),
        )
    }
}

#[pymodule]
fn polyclinch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Scenario>()?;
    Ok(())
}
