//! Ten-test causality checklist.
//!
//! Tests 1-3 and 10 are human judgments carried in the bundle; tests 4-9 are
//! computed. How the ten outcomes combine into one verdict is this engine's
//! own rule, see [`overall_verdict`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::confounding::{bias_adjust, cornfield_requirements, mantel_haenszel_pool};
use crate::effect::{association_test, misclassification_adjust, AssociationMethod, EffectEstimate};
use crate::study::{EvidenceBundle, TestStatus, JUDGED_TESTS};
use crate::synthesis::{
    consistency_verdict, dose_trend, fit_doll_peto, meta_analyze, ConsistencyConfig, ConsistencyStatus, MetaResult,
    StudyEstimate,
};
use crate::{Error, Result};

pub const TEST_NAMES: [&str; 10] = [
    "Existence of mechanism",
    "Analogous relationships",
    "Temporality",
    "Validity of data",
    "Strength of association",
    "Lack of confounders",
    "Consistency of association",
    "Statistical significance",
    "Dose-response relationship",
    "Validity of logic",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecklistConfig {
    /// Test 5 passes when the RR (or its LCL under `strict_lcl`) reaches this.
    pub strength_threshold: f64,
    pub strict_lcl: bool,
    /// Significance level for tests 8 and 9.
    pub alpha: f64,
    pub heterogeneity_alpha: f64,
    pub confidence_level: f64,
    /// Treat tests 6 and 7 as mandatory: NotAssessable there blocks support.
    pub strict: bool,
}

impl Default for ChecklistConfig {
    fn default() -> Self {
        Self {
            strength_threshold: 2.0,
            strict_lcl: false,
            alpha: 0.05,
            heterogeneity_alpha: 0.10,
            confidence_level: 0.95,
            strict: false,
        }
    }
}

impl ChecklistConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha) {
            return Err(Error::Config(format!("alpha {} is not in (0, 1)", self.alpha)));
        }
        if !unit(self.heterogeneity_alpha) {
            return Err(Error::Config(format!("heterogeneity_alpha {} is not in (0, 1)", self.heterogeneity_alpha)));
        }
        if !unit(self.confidence_level) {
            return Err(Error::Config(format!("confidence_level {} is not in (0, 1)", self.confidence_level)));
        }
        if !(self.strength_threshold.is_finite() && self.strength_threshold > 0.0) {
            return Err(Error::Config(format!("strength_threshold {} must be > 0", self.strength_threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: u8,
    pub name: String,
    pub status: TestStatus,
    pub metrics: BTreeMap<String, f64>,
    pub rationale: String,
}

impl TestOutcome {
    pub fn new(test_id: u8, status: TestStatus, rationale: impl Into<String>) -> Self {
        let name = TEST_NAMES.get(usize::from(test_id).wrapping_sub(1)).copied().unwrap_or("Unknown test");
        Self { test_id, name: name.to_string(), status, metrics: BTreeMap::new(), rationale: rationale.into() }
    }

    fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    fn metrics(mut self, m: BTreeMap<String, f64>) -> Self {
        self.metrics.extend(m);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallVerdict {
    CausationSupported,
    CausationNotEstablished,
}

/// The estimate tests 5, 6 and 8 are judged on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryAnalysis {
    pub estimate: EffectEstimate,
    pub p_value: f64,
    /// How the estimate and p-value were produced.
    pub source: String,
    pub study_estimates: Vec<StudyEstimate>,
    pub meta: Option<MetaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistReport {
    pub outcomes: Vec<TestOutcome>,
    pub overall: OverallVerdict,
    pub narrative: String,
    pub primary: PrimaryAnalysis,
}

impl ChecklistReport {
    pub fn outcome(&self, test_id: u8) -> &TestOutcome {
        &self.outcomes[usize::from(test_id) - 1]
    }
}

/// Single study: its Mantel-Haenszel estimate, with the table's association
/// test when it is a single stratum. Several studies: random-effects pool.
pub fn primary_analysis(bundle: &EvidenceBundle, confidence_level: f64) -> Result<PrimaryAnalysis> {
    if bundle.studies.is_empty() {
        return Err(Error::Validation { violations: vec!["bundle has no studies".into()] });
    }
    let per_study = bundle
        .studies
        .iter()
        .map(|s| mantel_haenszel_pool(s, confidence_level).map(|e| (s, e)))
        .collect::<Result<Vec<_>>>()?;
    let study_estimates =
        per_study.iter().map(|(s, e)| StudyEstimate::from_estimate(s.id.clone(), e)).collect::<Result<Vec<_>>>()?;

    if let [(study, estimate)] = per_study.as_slice() {
        if let [stratum] = study.strata() {
            let test = association_test(&stratum.table)?;
            let method = match test.method {
                AssociationMethod::ChiSquare => "Pearson chi-square",
                AssociationMethod::FisherExact => "Fisher exact",
            };
            return Ok(PrimaryAnalysis {
                estimate: *estimate,
                p_value: test.p_value,
                source: format!("study `{}` crude {}; p from {method} test", study.id, estimate.kind),
                study_estimates,
                meta: None,
            });
        }
        return Ok(PrimaryAnalysis {
            estimate: *estimate,
            p_value: estimate.p_value,
            source: format!(
                "study `{}` Mantel-Haenszel {} over {} strata; Wald p",
                study.id,
                estimate.kind,
                study.strata().len()
            ),
            study_estimates,
            meta: None,
        });
    }
    let meta = meta_analyze(&study_estimates, confidence_level)?;
    Ok(PrimaryAnalysis {
        estimate: meta.pooled_random,
        p_value: meta.pooled_random.p_value,
        source: format!("DerSimonian-Laird random-effects pool of {} studies; Wald p", study_estimates.len()),
        study_estimates,
        meta: Some(meta),
    })
}

/// Test 5 on one estimate.
pub fn strength_status(estimate: &EffectEstimate, config: &ChecklistConfig) -> TestStatus {
    let value = if config.strict_lcl { estimate.lcl } else { estimate.point };
    if value >= config.strength_threshold {
        TestStatus::Pass
    } else {
        TestStatus::Fail
    }
}

/// Test 8 on one p-value.
pub fn significance_status(p_value: f64, alpha: f64) -> TestStatus {
    if p_value < alpha {
        TestStatus::Pass
    } else {
        TestStatus::Fail
    }
}

fn judged(bundle: &EvidenceBundle, test_id: u8) -> TestOutcome {
    match bundle.judgment(test_id) {
        Some(j) => TestOutcome::new(test_id, j.verdict, j.rationale.clone()),
        None => TestOutcome::new(test_id, TestStatus::NotAssessable, "no judgment supplied"),
    }
}

fn validity(bundle: &EvidenceBundle, config: &ChecklistConfig) -> TestOutcome {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    for (locator, table) in bundle.tables() {
        let report = table.validate();
        violations.extend(report.violations.iter().map(|v| format!("{locator}: {v}")));
        warnings.extend(report.warnings.iter().map(|w| format!("{locator}: {w}")));
    }
    let mut metrics = BTreeMap::new();
    if let (Some(spec), Some(study)) = (&bundle.misclassification, bundle.studies.first()) {
        let crude = study.crude_table();
        match misclassification_adjust(&crude, spec) {
            Ok(r) => {
                let observed = crate::effect::natural_ratio(&crude, config.confidence_level).map(|e| e.point);
                let adjusted = r.relative_risk.or(r.odds_ratio);
                if let Some(adj) = adjusted {
                    metrics.insert("misclassification_adjusted_ratio".into(), adj);
                }
                if let (Ok(obs), Some(adj)) = (observed, adjusted) {
                    metrics.insert("observed_ratio".into(), obs);
                    if obs > 1.0 && adj <= 1.0 {
                        warnings.push(format!(
                            "{}: misclassification what-if removes the raised risk (ratio {obs:.4} -> {adj:.4})",
                            study.id
                        ));
                    }
                }
            }
            Err(e) => warnings.push(format!("{}: misclassification what-if: {e}", study.id)),
        }
    }
    metrics.insert("violations".into(), violations.len() as f64);
    metrics.insert("warnings".into(), warnings.len() as f64);
    if !violations.is_empty() {
        TestOutcome::new(4, TestStatus::Fail, violations.join("; ")).metrics(metrics)
    } else if !warnings.is_empty() {
        TestOutcome::new(4, TestStatus::Discounted, warnings.join("; ")).metrics(metrics)
    } else {
        TestOutcome::new(4, TestStatus::Pass, "all tables pass structural validation").metrics(metrics)
    }
}

fn strength(primary: &PrimaryAnalysis, config: &ChecklistConfig) -> TestOutcome {
    let e = &primary.estimate;
    let status = strength_status(e, config);
    let (label, value) = if config.strict_lcl { ("LCL".to_string(), e.lcl) } else { (e.kind.to_string(), e.point) };
    let cmp = if status == TestStatus::Pass { ">=" } else { "<" };
    TestOutcome::new(5, status, format!("{label} {value:.4} {cmp} threshold {}", config.strength_threshold))
        .metric("rr", e.point)
        .metric("lcl", e.lcl)
        .metric("ucl", e.ucl)
        .metric("threshold", config.strength_threshold)
}

fn confounders(bundle: &EvidenceBundle, primary: &PrimaryAnalysis) -> TestOutcome {
    if bundle.confounders.is_empty() {
        return TestOutcome::new(6, TestStatus::NotAssessable, "no candidate confounders declared");
    }
    let rr = primary.estimate.point;
    let Ok(req) = cornfield_requirements(rr) else {
        return TestOutcome::new(
            6,
            TestStatus::NotAssessable,
            format!("observed ratio {rr:.4} is not above 1; no raised risk for a confounder to explain"),
        )
        .metric("rr", rr);
    };
    let mut out = TestOutcome::new(6, TestStatus::Pass, "")
        .metric("rr", rr)
        .metric("min_rr_confounder", req.min_rr_confounder)
        .metric("min_prevalence_ratio", req.min_prevalence_ratio);
    let mut explaining = Vec::new();
    for c in &bundle.confounders {
        if let Ok(adj) = bias_adjust(rr, &c.spec) {
            out.metrics.insert(format!("bias_factor[{}]", c.label), adj.bias_factor);
            out.metrics.insert(format!("rr_adjusted[{}]", c.label), adj.rr_adjusted);
        }
        if req.met_by(&c.spec) {
            explaining.push(format!(
                "`{}` (RR {}, prevalence ratio {:.4})",
                c.label,
                c.spec.strength(),
                c.spec.prevalence_ratio()
            ));
        }
    }
    if explaining.is_empty() {
        out.rationale = format!(
            "no declared confounder reaches RR >= {0:.4} and prevalence ratio >= {0:.4}",
            req.min_rr_confounder
        );
    } else {
        out.status = TestStatus::Fail;
        out.rationale = format!("could fully explain the association: {}", explaining.join(", "));
    }
    out
}

fn consistency(primary: &PrimaryAnalysis, config: &ChecklistConfig) -> TestOutcome {
    let cfg = ConsistencyConfig {
        heterogeneity_alpha: config.heterogeneity_alpha,
        confidence_level: config.confidence_level,
    };
    match consistency_verdict(&primary.study_estimates, &cfg) {
        Err(Error::InsufficientStudies(k)) => TestOutcome::new(
            7,
            TestStatus::NotAssessable,
            format!("association observed in {k} study only; it has not been replicated"),
        )
        .metric("studies", k as f64),
        Err(e) => TestOutcome::new(7, TestStatus::NotAssessable, e.to_string()),
        Ok(v) => {
            let (status, rationale) = match v.status {
                ConsistencyStatus::Pass => (
                    TestStatus::Pass,
                    "studies are homogeneous and the pooled interval lies above 1".to_string(),
                ),
                ConsistencyStatus::Fail => (
                    TestStatus::Fail,
                    format!(
                        "heterogeneous (Q p = {:.4} < {}) with estimates on both sides of 1",
                        v.q_p, config.heterogeneity_alpha
                    ),
                ),
                ConsistencyStatus::Indeterminate => (
                    TestStatus::Discounted,
                    format!(
                        "consistency unresolved: Q p = {:.4}, pooled fixed-effect LCL {:.4}, {:.0}% of study pairs overlap",
                        v.q_p,
                        v.meta.pooled_fixed.lcl,
                        100.0 * v.overlap_fraction
                    ),
                ),
            };
            TestOutcome::new(7, status, rationale)
                .metric("q", v.meta.q)
                .metric("q_p", v.q_p)
                .metric("i_squared", v.meta.i_squared)
                .metric("tau_squared", v.meta.tau_squared)
                .metric("overlap_fraction", v.overlap_fraction)
                .metric("studies", primary.study_estimates.len() as f64)
        }
    }
}

fn significance(primary: &PrimaryAnalysis, config: &ChecklistConfig) -> TestOutcome {
    let status = significance_status(primary.p_value, config.alpha);
    let rationale = if status == TestStatus::Pass {
        format!("p = {:.4e} < alpha {}", primary.p_value, config.alpha)
    } else {
        format!("p = {:.4} >= alpha {}; the association could be random fluctuation", primary.p_value, config.alpha)
    };
    TestOutcome::new(8, status, rationale).metric("p", primary.p_value).metric("alpha", config.alpha)
}

const DOSE_SCOPE_NOTE: &str = "only exposure intensity is modelled; duration and time since first exposure are not";

fn dose_response(bundle: &EvidenceBundle, config: &ChecklistConfig) -> TestOutcome {
    if bundle.dose_series.is_empty() {
        return TestOutcome::new(9, TestStatus::NotAssessable, "no dose series supplied");
    }
    let mut out = TestOutcome::new(9, TestStatus::Pass, "");
    let mut failures = Vec::new();
    let mut assessed = 0;
    for ds in &bundle.dose_series {
        match dose_trend(ds) {
            Ok(t) => {
                assessed += 1;
                out.metrics.insert(format!("trend_p[{}]", ds.id), t.trend_p);
                out.metrics.insert(format!("trend_z[{}]", ds.id), t.z);
                if t.trend_p >= config.alpha {
                    failures.push(format!("`{}` trend p = {:.4} >= {}", ds.id, t.trend_p, config.alpha));
                }
                if !t.monotone_nondecreasing {
                    failures.push(format!("`{}` RRs are not non-decreasing in dose", ds.id));
                }
            }
            Err(e) => failures.push(format!("`{}`: {e}", ds.id)),
        }
        if let Ok(fit) = fit_doll_peto(ds) {
            out.metrics.insert(format!("doll_peto_z[{}]", ds.id), fit.z);
        }
    }
    if assessed == 0 {
        out.status = TestStatus::NotAssessable;
        out.rationale = format!("{}; {DOSE_SCOPE_NOTE}", failures.join("; "));
    } else if failures.is_empty() {
        out.rationale = format!("significant increasing trend in every series; {DOSE_SCOPE_NOTE}");
    } else {
        out.status = TestStatus::Discounted;
        out.rationale = format!(
            "{}; a threshold effect or a bias that does not scale with dose may explain this; {DOSE_SCOPE_NOTE}",
            failures.join("; ")
        );
    }
    out
}

pub fn run_checklist(bundle: &EvidenceBundle, config: &ChecklistConfig) -> Result<ChecklistReport> {
    config.validate()?;
    let primary = primary_analysis(bundle, config.confidence_level)?;
    let outcomes = vec![
        judged(bundle, 1),
        judged(bundle, 2),
        judged(bundle, 3),
        validity(bundle, config),
        strength(&primary, config),
        confounders(bundle, &primary),
        consistency(&primary, config),
        significance(&primary, config),
        dose_response(bundle, config),
        judged(bundle, 10),
    ];
    let (overall, narrative) = overall_verdict(&outcomes, config)?;
    Ok(ChecklistReport { outcomes, overall, narrative, primary })
}

/// Aggregation rule (this engine's construction): support requires test 8
/// to pass, test 5 to pass or be discounted, and no test to fail. In strict
/// mode tests 6 and 7 must also have been assessed.
pub fn overall_verdict(outcomes: &[TestOutcome], config: &ChecklistConfig) -> Result<(OverallVerdict, String)> {
    if outcomes.len() != 10 || outcomes.iter().enumerate().any(|(i, o)| usize::from(o.test_id) != i + 1) {
        return Err(Error::Arity(outcomes.len()));
    }
    for o in outcomes {
        if o.status == TestStatus::Discounted && o.rationale.trim().is_empty() {
            return Err(Error::Validation {
                violations: vec![format!("test {} is discounted without a rationale", o.test_id)],
            });
        }
        if JUDGED_TESTS.contains(&o.test_id) && o.status == TestStatus::Fail && o.rationale.trim().is_empty() {
            return Err(Error::Validation {
                violations: vec![format!("test {} fails without a rationale", o.test_id)],
            });
        }
    }
    let status = |id: usize| outcomes[id - 1].status;
    let mut blockers = Vec::new();
    if status(8) != TestStatus::Pass {
        blockers
            .push("test 8 (statistical significance) did not pass, so the remaining questions are moot".to_string());
    }
    if !matches!(status(5), TestStatus::Pass | TestStatus::Discounted) {
        blockers.push("test 5 (strength of association) neither passed nor was discounted".to_string());
    }
    let failed: Vec<String> =
        outcomes.iter().filter(|o| o.status == TestStatus::Fail).map(|o| o.test_id.to_string()).collect();
    if !failed.is_empty() {
        blockers.push(format!("failed test(s): {}", failed.join(", ")));
    }
    if config.strict {
        for id in [6, 7] {
            if status(id) == TestStatus::NotAssessable {
                blockers.push(format!("strict mode: test {id} ({}) was not assessed", TEST_NAMES[id - 1]));
            }
        }
    }
    let overall =
        if blockers.is_empty() { OverallVerdict::CausationSupported } else { OverallVerdict::CausationNotEstablished };

    let mut narrative = String::new();
    match overall {
        OverallVerdict::CausationSupported => {
            narrative.push_str("Population causation supported on the totality of the evidence.")
        }
        OverallVerdict::CausationNotEstablished => {
            let _ = write!(narrative, "Population causation not established: {}.", blockers.join("; "));
        }
    }
    for o in outcomes.iter().filter(|o| o.status != TestStatus::Pass) {
        let _ = write!(narrative, " Test {} ({}): {}", o.test_id, o.name, o.status);
        if !o.rationale.is_empty() {
            let _ = write!(narrative, " - {}", o.rationale);
        }
        narrative.push('.');
    }
    narrative.push_str(" Aggregation rule: test 8 must pass, test 5 must pass or be discounted, no test may fail");
    if config.strict {
        narrative.push_str(", and tests 6 and 7 must be assessed");
    }
    narrative.push('.');
    Ok((overall, narrative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confounding::ConfounderSpec;
    use crate::study::{CandidateConfounder, QualitativeJudgment, TwoByTwoTable};

    fn all(status: TestStatus) -> Vec<TestOutcome> {
        (1..=10).map(|i| TestOutcome::new(i, status, "r")).collect()
    }

    #[test]
    fn verdict_examples() {
        let c = ChecklistConfig::default();
        assert_eq!(overall_verdict(&all(TestStatus::Pass), &c).unwrap().0, OverallVerdict::CausationSupported);
        let mut v = all(TestStatus::Pass);
        v[7].status = TestStatus::Fail;
        assert_eq!(overall_verdict(&v, &c).unwrap().0, OverallVerdict::CausationNotEstablished);
        let mut v = all(TestStatus::Pass);
        v[2].status = TestStatus::Fail;
        let (verdict, narrative) = overall_verdict(&v, &c).unwrap();
        assert_eq!(verdict, OverallVerdict::CausationNotEstablished);
        assert!(narrative.contains("Test 3 (Temporality): fail"));
    }

    #[test]
    fn arity_is_checked() {
        let c = ChecklistConfig::default();
        assert_eq!(overall_verdict(&all(TestStatus::Pass)[..9], &c), Err(Error::Arity(9)));
        let mut v = all(TestStatus::Pass);
        v.swap(0, 1);
        assert!(matches!(overall_verdict(&v, &c), Err(Error::Arity(10))));
    }

    #[test]
    fn strict_mode_requires_tests_6_and_7() {
        let mut v = all(TestStatus::Pass);
        v[6].status = TestStatus::NotAssessable;
        let lax = ChecklistConfig::default();
        assert_eq!(overall_verdict(&v, &lax).unwrap().0, OverallVerdict::CausationSupported);
        let strict = ChecklistConfig { strict: true, ..lax };
        assert_eq!(overall_verdict(&v, &strict).unwrap().0, OverallVerdict::CausationNotEstablished);
    }

    fn worked_bundle() -> EvidenceBundle {
        let mut b = EvidenceBundle::single(TwoByTwoTable::cohort(25, 975, 5, 995));
        for id in [1, 2, 3, 10] {
            b.judgments.push(QualitativeJudgment::new(id, TestStatus::Pass, "").unwrap());
        }
        b
    }

    #[test]
    fn worked_example_supports_causation() {
        let r = run_checklist(&worked_bundle(), &ChecklistConfig::default()).unwrap();
        let status: Vec<_> = r.outcomes.iter().map(|o| o.status).collect();
        use TestStatus::*;
        assert_eq!(status, [Pass, Pass, Pass, Pass, Pass, NotAssessable, NotAssessable, Pass, NotAssessable, Pass]);
        assert_eq!(r.outcome(5).metrics["rr"], 5.0);
        assert_eq!(r.overall, OverallVerdict::CausationSupported);
    }

    #[test]
    fn strong_confounder_blocks() {
        let mut b = worked_bundle();
        b.confounders
            .push(CandidateConfounder { label: "smoking".into(), spec: ConfounderSpec::new(10.0, 0.5, 0.05).unwrap() });
        let r = run_checklist(&b, &ChecklistConfig::default()).unwrap();
        assert_eq!(r.outcome(6).status, TestStatus::Fail);
        assert_eq!(r.overall, OverallVerdict::CausationNotEstablished);
    }

    #[test]
    fn null_table_fails_significance() {
        let b = EvidenceBundle::single(TwoByTwoTable::cohort(10, 10, 10, 10));
        let r = run_checklist(&b, &ChecklistConfig::default()).unwrap();
        assert_eq!(r.outcome(8).status, TestStatus::Fail);
        assert_eq!(r.outcome(8).metrics["p"], 1.0);
        assert_eq!(r.outcome(1).status, TestStatus::NotAssessable);
        assert_eq!(r.overall, OverallVerdict::CausationNotEstablished);
    }

    #[test]
    fn config_errors() {
        let b = worked_bundle();
        for bad in [
            ChecklistConfig { alpha: 0.0, ..Default::default() },
            ChecklistConfig { alpha: 1.0, ..Default::default() },
            ChecklistConfig { strength_threshold: 0.0, ..Default::default() },
            ChecklistConfig { heterogeneity_alpha: 1.5, ..Default::default() },
        ] {
            assert!(matches!(run_checklist(&b, &bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn strict_lcl_is_more_stringent() {
        let cfg = ChecklistConfig { strict_lcl: true, ..Default::default() };
        let r = run_checklist(&worked_bundle(), &cfg).unwrap();
        assert_eq!(r.outcome(5).status, TestStatus::Fail);
    }
}
