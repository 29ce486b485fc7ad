//! Causal-chain data model and the study-file reader.
//!
//! A study file is one UTF-8 JSON document. Unknown keys are rejected at every
//! level, counts must be integers, and every table is validated before a
//! bundle is handed out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::confounding::{ConfounderSpec, ParameterRange};
use crate::effect::{Accuracy, MisclassificationSpec};
use crate::{Error, Result};

/// Study design of a 2x2 table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Cohort,
    CaseControl,
}

/// Exposure-by-outcome counts.
///
/// `a` exposed cases, `b` exposed noncases, `c` unexposed cases, `d`
/// unexposed noncases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TwoByTwoTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub design: Design,
}

impl TwoByTwoTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64, design: Design) -> Self {
        Self { a, b, c, d, design }
    }

    pub fn cohort(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self::new(a, b, c, d, Design::Cohort)
    }

    pub fn case_control(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self::new(a, b, c, d, Design::CaseControl)
    }

    pub fn exposed_total(&self) -> u64 {
        self.a + self.b
    }

    pub fn unexposed_total(&self) -> u64 {
        self.c + self.d
    }

    pub fn cases(&self) -> u64 {
        self.a + self.c
    }

    pub fn noncases(&self) -> u64 {
        self.b + self.d
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn has_zero_cell(&self) -> bool {
        self.a == 0 || self.b == 0 || self.c == 0 || self.d == 0
    }

    pub fn cells(&self) -> [u64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Expected cell counts under independence of the margins, in `a, b, c, d`
    /// order. All zero for an empty table.
    pub fn expected_counts(&self) -> [f64; 4] {
        let n = self.total() as f64;
        if n == 0.0 {
            return [0.0; 4];
        }
        let (r1, r0) = (self.exposed_total() as f64, self.unexposed_total() as f64);
        let (c1, c0) = (self.cases() as f64, self.noncases() as f64);
        [r1 * c1 / n, r1 * c0 / n, r0 * c1 / n, r0 * c0 / n]
    }

    pub fn validate(&self) -> ValidationReport {
        validate_table(&CellCounts::from(*self))
    }

    /// Sum of two tables of the same design, cell by cell.
    pub fn merged(&self, other: &TwoByTwoTable) -> TwoByTwoTable {
        TwoByTwoTable::new(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d, self.design)
    }
}

impl fmt::Display for TwoByTwoTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{a:{}, b:{}, c:{}, d:{}}}", self.a, self.b, self.c, self.d)
    }
}

/// Unvalidated signed counts, as they arrive from a file or a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCounts {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
    pub design: Design,
}

impl CellCounts {
    pub fn new(a: i64, b: i64, c: i64, d: i64, design: Design) -> Self {
        Self { a, b, c, d, design }
    }
}

impl From<TwoByTwoTable> for CellCounts {
    fn from(t: TwoByTwoTable) -> Self {
        let cast = |v: u64| i64::try_from(v).unwrap_or(i64::MAX);
        CellCounts::new(cast(t.a), cast(t.b), cast(t.c), cast(t.d), t.design)
    }
}

impl TryFrom<CellCounts> for TwoByTwoTable {
    type Error = Error;

    fn try_from(raw: CellCounts) -> Result<Self> {
        let report = validate_table(&raw);
        if !report.is_ok() {
            return Err(Error::Validation { violations: report.violations.iter().map(|v| v.to_string()).collect() });
        }
        Ok(TwoByTwoTable::new(raw.a as u64, raw.b as u64, raw.c as u64, raw.d as u64, raw.design))
    }
}

/// One broken table invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending cell (`a`..`d`) or margin name.
    pub cell: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.cell, self.message)
    }
}

/// Non-fatal conditions that change how a table is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableWarning {
    /// At least one zero cell; the 0.5 continuity correction will apply.
    ZeroCell { cells: Vec<String> },
    /// Some expected count below 5; the association test uses Fisher's exact test.
    SmallExpected { min_expected: f64 },
}

impl fmt::Display for TableWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableWarning::ZeroCell { cells } => {
                write!(f, "zero cell ({}): 0.5 continuity correction applied to all cells", cells.join(", "))
            }
            TableWarning::SmallExpected { min_expected } => {
                write!(f, "small study: minimum expected count {min_expected:.3} < 5, Fisher exact test used")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<TableWarning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the table invariants. Violations are returned, never raised.
pub fn validate_table(t: &CellCounts) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cells = [("a", t.a), ("b", t.b), ("c", t.c), ("d", t.d)];
    for (name, v) in cells {
        if v < 0 {
            report.violations.push(Violation { cell: name.to_string(), message: format!("negative count {v}") });
        }
    }
    if !report.violations.is_empty() {
        return report;
    }
    if t.a.checked_add(t.b).is_none_or(|m| m == 0) {
        report.violations.push(Violation { cell: "a+b".into(), message: "empty exposed margin".into() });
    }
    if t.c.checked_add(t.d).is_none_or(|m| m == 0) {
        report.violations.push(Violation { cell: "c+d".into(), message: "empty unexposed margin".into() });
    }
    if !report.violations.is_empty() {
        return report;
    }
    let zero: Vec<String> = cells.iter().filter(|(_, v)| *v == 0).map(|(n, _)| n.to_string()).collect();
    if !zero.is_empty() {
        report.warnings.push(TableWarning::ZeroCell { cells: zero });
    }
    let table = TwoByTwoTable::new(t.a as u64, t.b as u64, t.c as u64, t.d as u64, t.design);
    let min_expected = table.expected_counts().into_iter().fold(f64::INFINITY, f64::min);
    if min_expected < 5.0 {
        report.warnings.push(TableWarning::SmallExpected { min_expected });
    }
    report
}

/// Covariate name to level label.
pub type CovariateProfile = BTreeMap<String, String>;

fn profile_label(p: &CovariateProfile) -> String {
    if p.is_empty() {
        return "(all)".into();
    }
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub profile: CovariateProfile,
    pub table: TwoByTwoTable,
}

/// A study reported as covariate strata. A crude study is a single stratum
/// with an empty profile.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedStudy {
    pub id: String,
    pub metadata: String,
    strata: Vec<Stratum>,
}

impl StratifiedStudy {
    pub fn new(id: impl Into<String>, strata: Vec<Stratum>) -> Result<Self> {
        let id = id.into();
        if strata.is_empty() {
            return Err(Error::Validation { violations: vec![format!("study `{id}` has no strata")] });
        }
        let names: BTreeSet<&String> = strata[0].profile.keys().collect();
        let mut seen = BTreeSet::new();
        for s in &strata {
            let these: BTreeSet<&String> = s.profile.keys().collect();
            if these != names {
                return Err(Error::Validation {
                    violations: vec![format!("study `{id}`: strata use different covariate names")],
                });
            }
            if !seen.insert(&s.profile) {
                return Err(Error::Validation {
                    violations: vec![format!(
                        "study `{id}`: duplicate covariate profile {}",
                        profile_label(&s.profile)
                    )],
                });
            }
        }
        Ok(Self { id, metadata: String::new(), strata })
    }

    /// Single-stratum study.
    pub fn crude(id: impl Into<String>, table: TwoByTwoTable) -> Self {
        Self {
            id: id.into(),
            metadata: String::new(),
            strata: vec![Stratum { profile: CovariateProfile::new(), table }],
        }
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = metadata.into();
        self
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.strata[0].profile.keys().cloned().collect()
    }

    /// Shared design of all strata.
    pub fn design(&self) -> Result<Design> {
        let first = self.strata[0].table.design;
        if self.strata.iter().all(|s| s.table.design == first) {
            Ok(first)
        } else {
            Err(Error::MixedDesign)
        }
    }

    /// Cell-wise sum of all strata.
    pub fn crude_table(&self) -> TwoByTwoTable {
        let first = self.strata[0].table;
        self.strata[1..].iter().fold(first, |acc, s| acc.merged(&s.table))
    }
}

/// Exact-profile lookup of the stratum describing persons like the plaintiff.
/// Nearest matches are never substituted.
pub fn select_relevant_stratum<'a>(
    study: &'a StratifiedStudy,
    profile: &CovariateProfile,
) -> Result<&'a TwoByTwoTable> {
    let expected = study.covariate_names();
    let found: Vec<String> = profile.keys().cloned().collect();
    if expected != found {
        return Err(Error::CovariateMismatch { expected, found });
    }
    study
        .strata
        .iter()
        .find(|s| &s.profile == profile)
        .map(|s| &s.table)
        .ok_or_else(|| Error::NoMatch { available: study.strata.iter().map(|s| profile_label(&s.profile)).collect() })
}

/// Dose level against the shared zero-dose referent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DosePoint {
    pub dose: f64,
    /// Exposed arm = this dose group; unexposed arm = the shared referent.
    pub table: TwoByTwoTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseSeries {
    pub id: String,
    pub units: String,
    points: Vec<DosePoint>,
}

impl DoseSeries {
    pub fn new(id: impl Into<String>, units: impl Into<String>, points: Vec<DosePoint>) -> Result<Self> {
        let id = id.into();
        let mut violations = Vec::new();
        if points.is_empty() {
            violations.push(format!("dose series `{id}` has no points"));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.dose.is_finite() || p.dose < 0.0 {
                violations.push(format!("dose series `{id}` point {i}: dose {} is not a non-negative number", p.dose));
            }
            if i > 0 && p.dose <= points[i - 1].dose {
                violations.push(format!("dose series `{id}`: doses must be strictly increasing"));
            }
            if (p.table.c, p.table.d) != (points[0].table.c, points[0].table.d) {
                violations
                    .push(format!("dose series `{id}` point {i}: unexposed arm differs from the shared referent"));
            }
        }
        if violations.is_empty() {
            Ok(Self { id, units: units.into(), points })
        } else {
            Err(Error::Validation { violations })
        }
    }

    pub fn points(&self) -> &[DosePoint] {
        &self.points
    }

    /// Shared referent as `(cases, noncases)`.
    pub fn referent(&self) -> (u64, u64) {
        (self.points[0].table.c, self.points[0].table.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationClass {
    /// Necessary and sufficient.
    R0,
    /// Single identified exposure plus background.
    R1,
    /// Several identified exposures.
    R2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionModel {
    Additive,
    Synergistic,
}

/// Action -> exposure -> outcome chain under assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalChainSpec {
    pub action: String,
    pub exposure: String,
    #[serde(default)]
    pub other_exposures: Vec<String>,
    pub outcome: String,
    pub relation: RelationClass,
    pub interaction: InteractionModel,
}

impl CausalChainSpec {
    pub fn check(&self) -> Result<()> {
        let ok = match self.relation {
            RelationClass::R0 | RelationClass::R1 => self.other_exposures.is_empty(),
            RelationClass::R2 => !self.other_exposures.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation {
                violations: vec![format!(
                    "relation {:?} is inconsistent with {} other exposure(s)",
                    self.relation,
                    self.other_exposures.len()
                )],
            })
        }
    }
}

/// Status of one checklist test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    Discounted,
    NotAssessable,
}

impl fmt::Display for TestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestStatus::Pass => "pass",
            TestStatus::Fail => "fail",
            TestStatus::Discounted => "discounted",
            TestStatus::NotAssessable => "not assessable",
        })
    }
}

/// Tests that are judged by people rather than computed.
pub const JUDGED_TESTS: [u8; 4] = [1, 2, 3, 10];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualitativeJudgment {
    pub test_id: u8,
    pub verdict: TestStatus,
    pub rationale: String,
}

impl QualitativeJudgment {
    pub fn new(test_id: u8, verdict: TestStatus, rationale: impl Into<String>) -> Result<Self> {
        let rationale = rationale.into();
        if !JUDGED_TESTS.contains(&test_id) {
            return Err(Error::Validation {
                violations: vec![format!("test {test_id} is computed and cannot be supplied as a judgment")],
            });
        }
        if matches!(verdict, TestStatus::Fail | TestStatus::Discounted) && rationale.trim().is_empty() {
            return Err(Error::Validation {
                violations: vec![format!("test {test_id}: {verdict} requires a rationale")],
            });
        }
        Ok(Self { test_id, verdict, rationale })
    }
}

/// Candidate omitted variable declared for the confounding test.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateConfounder {
    pub label: String,
    pub spec: ConfounderSpec,
}

/// Intervals for a Monte Carlo confounding sensitivity run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPriors {
    pub rr_confounder: ParameterRange,
    pub prevalence_exposed: ParameterRange,
    pub prevalence_unexposed: ParameterRange,
}

/// Everything the checklist and the legal layer consume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvidenceBundle {
    pub studies: Vec<StratifiedStudy>,
    pub dose_series: Vec<DoseSeries>,
    pub judgments: Vec<QualitativeJudgment>,
    pub chain: Option<CausalChainSpec>,
    pub confounders: Vec<CandidateConfounder>,
    pub misclassification: Option<MisclassificationSpec>,
    pub sensitivity: Option<SensitivityPriors>,
    pub relevant_profile: Option<CovariateProfile>,
}

impl EvidenceBundle {
    /// Bundle holding one crude study.
    pub fn single(table: TwoByTwoTable) -> Self {
        Self { studies: vec![StratifiedStudy::crude("study-1", table)], ..Default::default() }
    }

    pub fn judgment(&self, test_id: u8) -> Option<&QualitativeJudgment> {
        self.judgments.iter().find(|j| j.test_id == test_id)
    }

    /// Every table in the bundle with a locator, in file order.
    pub fn tables(&self) -> Vec<(String, TwoByTwoTable)> {
        let mut out = Vec::new();
        for s in &self.studies {
            for (i, st) in s.strata.iter().enumerate() {
                out.push((format!("{}[{i}]", s.id), st.table));
            }
        }
        for ds in &self.dose_series {
            for (i, p) in ds.points.iter().enumerate() {
                out.push((format!("{}[{i}]", ds.id), p.table));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&file::StudyFile::from(self)).expect("study file serializes")
    }
}

/// Parses and validates a study file.
pub fn parse_study_file(bytes: &[u8]) -> Result<EvidenceBundle> {
    let raw: file::StudyFile = parse_json_bytes(bytes)?;
    raw.into_bundle()
}

/// Deserializes a JSON document, reporting the path of the first schema
/// error.
pub fn parse_json_bytes<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Schema { path: ".".into(), message: format!("input is not UTF-8: {e}") })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| Error::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
    de.end().map_err(|e| Error::Schema { path: ".".into(), message: e.to_string() })?;
    Ok(value)
}

mod file {
    //! On-disk representation. Kept separate from the domain types so the
    //! schema can stay stable while the model evolves.

    use super::*;

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(super) struct StudyFile {
        studies: Vec<StudyDto>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        dose_series: Vec<DoseSeriesDto>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        judgments: Vec<JudgmentDto>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chain: Option<CausalChainSpec>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        confounders: Vec<ConfounderDto>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        misclassification: Option<MisclassificationDto>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sensitivity: Option<SensitivityDto>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relevant_profile: Option<CovariateProfile>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct StudyDto {
        id: String,
        design: Design,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        metadata: String,
        strata: Vec<StratumDto>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct StratumDto {
        #[serde(default)]
        profile: CovariateProfile,
        table: TableDto,
    }

    #[derive(Debug, Clone, Copy, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct TableDto {
        a: i64,
        b: i64,
        c: i64,
        d: i64,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct DoseSeriesDto {
        id: String,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        units: String,
        points: Vec<DosePointDto>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct DosePointDto {
        dose: f64,
        table: TableDto,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct JudgmentDto {
        test: u8,
        verdict: TestStatus,
        #[serde(default)]
        rationale: String,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct ConfounderDto {
        label: String,
        rr: f64,
        prevalence_exposed: f64,
        prevalence_unexposed: f64,
    }

    #[derive(Debug, Clone, Copy, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct AccuracyDto {
        sensitivity: f64,
        specificity: f64,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(untagged)]
    enum MisclassificationDto {
        Nondifferential(AccuracyDto),
        Differential { cases: AccuracyDto, noncases: AccuracyDto },
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SensitivityDto {
        rr_confounder: [f64; 2],
        prevalence_exposed: [f64; 2],
        prevalence_unexposed: [f64; 2],
    }

    fn table(raw: TableDto, design: Design, path: &str, violations: &mut Vec<String>) -> Option<TwoByTwoTable> {
        let counts = CellCounts::new(raw.a, raw.b, raw.c, raw.d, design);
        let report = validate_table(&counts);
        if report.is_ok() {
            Some(TwoByTwoTable::new(raw.a as u64, raw.b as u64, raw.c as u64, raw.d as u64, design))
        } else {
            for v in report.violations {
                violations.push(format!("{path}.table.{}: {}", v.cell, v.message));
            }
            None
        }
    }

    fn range(v: [f64; 2], path: &str, violations: &mut Vec<String>) -> ParameterRange {
        match ParameterRange::new(v[0], v[1]) {
            Ok(r) => r,
            Err(e) => {
                violations.push(format!("{path}: {e}"));
                ParameterRange::point(1.0)
            }
        }
    }

    fn push_err(violations: &mut Vec<String>, path: &str, e: Error) {
        match e {
            Error::Validation { violations: vs } => violations.extend(vs.into_iter().map(|v| format!("{path}: {v}"))),
            other => violations.push(format!("{path}: {other}")),
        }
    }

    impl StudyFile {
        pub(super) fn into_bundle(self) -> Result<EvidenceBundle> {
            if self.studies.is_empty() {
                return Err(Error::Schema { path: "studies".into(), message: "at least one study is required".into() });
            }
            let mut v = Vec::new();
            let mut bundle = EvidenceBundle::default();

            let mut ids = BTreeSet::new();
            for (si, s) in self.studies.into_iter().enumerate() {
                let path = format!("studies[{si}]");
                if !ids.insert(s.id.clone()) {
                    v.push(format!("{path}.id: duplicate study id `{}`", s.id));
                }
                let mut strata = Vec::new();
                for (ti, st) in s.strata.into_iter().enumerate() {
                    if let Some(t) = table(st.table, s.design, &format!("{path}.strata[{ti}]"), &mut v) {
                        strata.push(Stratum { profile: st.profile, table: t });
                    }
                }
                if v.is_empty() {
                    match StratifiedStudy::new(s.id, strata) {
                        Ok(study) => bundle.studies.push(study.with_metadata(s.metadata)),
                        Err(e) => push_err(&mut v, &path, e),
                    }
                }
            }

            for (di, ds) in self.dose_series.into_iter().enumerate() {
                let path = format!("dose_series[{di}]");
                let mut points = Vec::new();
                for (pi, p) in ds.points.into_iter().enumerate() {
                    if let Some(t) = table(p.table, Design::Cohort, &format!("{path}.points[{pi}]"), &mut v) {
                        points.push(DosePoint { dose: p.dose, table: t });
                    }
                }
                if v.is_empty() {
                    match DoseSeries::new(ds.id, ds.units, points) {
                        Ok(series) => bundle.dose_series.push(series),
                        Err(e) => push_err(&mut v, &path, e),
                    }
                }
            }

            let mut judged = BTreeSet::new();
            for (ji, j) in self.judgments.into_iter().enumerate() {
                let path = format!("judgments[{ji}]");
                if !judged.insert(j.test) {
                    v.push(format!("{path}.test: duplicate judgment for test {}", j.test));
                    continue;
                }
                match QualitativeJudgment::new(j.test, j.verdict, j.rationale) {
                    Ok(j) => bundle.judgments.push(j),
                    Err(e) => push_err(&mut v, &path, e),
                }
            }

            if let Some(chain) = self.chain {
                match chain.check() {
                    Ok(()) => bundle.chain = Some(chain),
                    Err(e) => push_err(&mut v, "chain", e),
                }
            }

            for (ci, c) in self.confounders.into_iter().enumerate() {
                match ConfounderSpec::new(c.rr, c.prevalence_exposed, c.prevalence_unexposed) {
                    Ok(spec) => bundle.confounders.push(CandidateConfounder { label: c.label, spec }),
                    Err(e) => push_err(&mut v, &format!("confounders[{ci}]"), e),
                }
            }

            if let Some(m) = self.misclassification {
                let spec = match m {
                    MisclassificationDto::Nondifferential(acc) => {
                        Accuracy::new(acc.sensitivity, acc.specificity).map(MisclassificationSpec::nondifferential)
                    }
                    MisclassificationDto::Differential { cases, noncases } => {
                        Accuracy::new(cases.sensitivity, cases.specificity).and_then(|c| {
                            Accuracy::new(noncases.sensitivity, noncases.specificity)
                                .map(|n| MisclassificationSpec::differential(c, n))
                        })
                    }
                };
                match spec {
                    Ok(s) => bundle.misclassification = Some(s),
                    Err(e) => push_err(&mut v, "misclassification", e),
                }
            }

            if let Some(s) = self.sensitivity {
                let priors = SensitivityPriors {
                    rr_confounder: range(s.rr_confounder, "sensitivity.rr_confounder", &mut v),
                    prevalence_exposed: range(s.prevalence_exposed, "sensitivity.prevalence_exposed", &mut v),
                    prevalence_unexposed: range(s.prevalence_unexposed, "sensitivity.prevalence_unexposed", &mut v),
                };
                let probs = [priors.prevalence_exposed, priors.prevalence_unexposed];
                if probs.iter().any(|r| r.low < 0.0 || r.high > 1.0) {
                    v.push("sensitivity: prevalence bounds must lie in [0, 1]".into());
                }
                if priors.rr_confounder.low <= 0.0 {
                    v.push("sensitivity.rr_confounder: must be > 0".into());
                }
                bundle.sensitivity = Some(priors);
            }

            if let Some(p) = self.relevant_profile {
                let names: Vec<String> = p.keys().cloned().collect();
                if v.is_empty() && bundle.studies.iter().all(|s| s.covariate_names() != names) {
                    v.push(format!("relevant_profile: covariates {names:?} match no study"));
                }
                bundle.relevant_profile = Some(p);
            }

            if v.is_empty() {
                Ok(bundle)
            } else {
                Err(Error::Validation { violations: v })
            }
        }
    }

    fn dto(t: &TwoByTwoTable) -> TableDto {
        TableDto { a: t.a as i64, b: t.b as i64, c: t.c as i64, d: t.d as i64 }
    }

    impl From<&EvidenceBundle> for StudyFile {
        fn from(b: &EvidenceBundle) -> Self {
            let acc = |a: &Accuracy| AccuracyDto { sensitivity: a.sensitivity(), specificity: a.specificity() };
            StudyFile {
                studies: b
                    .studies
                    .iter()
                    .map(|s| StudyDto {
                        id: s.id.clone(),
                        design: s.strata[0].table.design,
                        metadata: s.metadata.clone(),
                        strata: s
                            .strata
                            .iter()
                            .map(|st| StratumDto { profile: st.profile.clone(), table: dto(&st.table) })
                            .collect(),
                    })
                    .collect(),
                dose_series: b
                    .dose_series
                    .iter()
                    .map(|ds| DoseSeriesDto {
                        id: ds.id.clone(),
                        units: ds.units.clone(),
                        points: ds.points.iter().map(|p| DosePointDto { dose: p.dose, table: dto(&p.table) }).collect(),
                    })
                    .collect(),
                judgments: b
                    .judgments
                    .iter()
                    .map(|j| JudgmentDto { test: j.test_id, verdict: j.verdict, rationale: j.rationale.clone() })
                    .collect(),
                chain: b.chain.clone(),
                confounders: b
                    .confounders
                    .iter()
                    .map(|c| ConfounderDto {
                        label: c.label.clone(),
                        rr: c.spec.rr_confounder_outcome,
                        prevalence_exposed: c.spec.prevalence_exposed,
                        prevalence_unexposed: c.spec.prevalence_unexposed,
                    })
                    .collect(),
                misclassification: b.misclassification.as_ref().map(|m| {
                    if m.is_differential() {
                        MisclassificationDto::Differential { cases: acc(&m.cases), noncases: acc(&m.noncases) }
                    } else {
                        MisclassificationDto::Nondifferential(acc(&m.cases))
                    }
                }),
                sensitivity: b.sensitivity.map(|s| SensitivityDto {
                    rr_confounder: [s.rr_confounder.low, s.rr_confounder.high],
                    prevalence_exposed: [s.prevalence_exposed.low, s.prevalence_exposed.high],
                    prevalence_unexposed: [s.prevalence_unexposed.low, s.prevalence_unexposed.high],
                }),
                relevant_profile: b.relevant_profile.clone(),
            }
        }
    }
}
