//! Effect measures on a single 2x2 table.
//!
//! Relative risk is the ratio of outcome rates, `(a/(a+b)) / (c/(c+d))`.
//! Ratio measures get log-scale Wald intervals. When any cell is zero, 0.5 is
//! added to all four cells (Haldane-Anscombe) and the estimate is flagged as
//! corrected.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::numeric::{check_confidence_level, chi_square_1_sf, two_sided_p, z_critical};
use crate::study::{Design, TwoByTwoTable};
use crate::{Error, Result};

/// Attached to every probability-of-causation figure.
pub const PDE_ACCELERATION_CAVEAT: &str = "PDE caveat: when exposure accelerates outcomes that would \
have occurred later anyway, (RR-1)/RR understates the probability of causation; no correction is applied";

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "RR")]
    RelativeRisk,
    #[serde(rename = "OR")]
    OddsRatio,
    #[serde(rename = "excess_risk")]
    ExcessRisk,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::RelativeRisk => "RR",
            MeasureKind::OddsRatio => "OR",
            MeasureKind::ExcessRisk => "excess risk",
        })
    }
}

/// A point estimate with its confidence interval and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: MeasureKind,
    pub point: f64,
    pub lcl: f64,
    pub ucl: f64,
    pub confidence_level: f64,
    pub p_value: f64,
    /// Continuity correction applied.
    pub corrected: bool,
    /// Standard error on the estimation scale (log scale for ratios).
    pub se: f64,
}

impl EffectEstimate {
    /// Builds a ratio estimate from a log-scale point and standard error.
    pub fn from_log(kind: MeasureKind, log_point: f64, se: f64, confidence_level: f64, corrected: bool) -> Self {
        let z = z_critical(confidence_level);
        let p_value = if se > 0.0 {
            two_sided_p(log_point / se)
        } else if log_point == 0.0 {
            1.0
        } else {
            0.0
        };
        let point = log_point.exp();
        Self {
            kind,
            point,
            lcl: (log_point - z * se).exp().min(point),
            ucl: (log_point + z * se).exp().max(point),
            confidence_level,
            p_value,
            corrected,
            se,
        }
    }

    pub fn is_ratio(&self) -> bool {
        !matches!(self.kind, MeasureKind::ExcessRisk)
    }

    /// Null value of the measure: 1 for ratios, 0 for differences.
    pub fn null_value(&self) -> f64 {
        if self.is_ratio() {
            1.0
        } else {
            0.0
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn check_margins(t: &TwoByTwoTable) -> Result<()> {
    if t.exposed_total() == 0 {
        return Err(Error::Degenerate(format!("empty exposed margin in {t}")));
    }
    if t.unexposed_total() == 0 {
        return Err(Error::Degenerate(format!("empty unexposed margin in {t}")));
    }
    Ok(())
}

/// Cells as reals, with the 0.5 correction when any cell is zero.
fn corrected_cells(t: &TwoByTwoTable) -> ([f64; 4], bool) {
    let cells = t.cells().map(|v| v as f64);
    if t.has_zero_cell() {
        (cells.map(|v| v + 0.5), true)
    } else {
        (cells, false)
    }
}

/// Correctly rounded whenever the reduced fraction has both terms below
/// 2^53; beyond that the error is at most about one ulp.
fn ratio_u128(num: u128, den: u128) -> f64 {
    let (mut x, mut y) = (num, den);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    let g = x.max(1);
    (num / g) as f64 / (den / g) as f64
}

pub fn relative_risk(t: &TwoByTwoTable, confidence_level: f64) -> Result<EffectEstimate> {
    check_confidence_level(confidence_level)?;
    if t.design == Design::CaseControl {
        return Err(Error::Design(
            "relative risk is not estimable from a case-control table; use the odds ratio".into(),
        ));
    }
    check_margins(t)?;
    let ([a, b, c, d], corrected) = corrected_cells(t);
    let point = if corrected {
        (a / (a + b)) / (c / (c + d))
    } else {
        ratio_u128(t.a as u128 * t.unexposed_total() as u128, t.c as u128 * t.exposed_total() as u128)
    };
    let se = (1.0 / a - 1.0 / (a + b) + 1.0 / c - 1.0 / (c + d)).max(0.0).sqrt();
    Ok(with_exact_point(
        EffectEstimate::from_log(MeasureKind::RelativeRisk, point.ln(), se, confidence_level, corrected),
        point,
    ))
}

pub fn odds_ratio(t: &TwoByTwoTable, confidence_level: f64) -> Result<EffectEstimate> {
    check_confidence_level(confidence_level)?;
    check_margins(t)?;
    let ([a, b, c, d], corrected) = corrected_cells(t);
    let point =
        if corrected { (a * d) / (b * c) } else { ratio_u128(t.a as u128 * t.d as u128, t.b as u128 * t.c as u128) };
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok(with_exact_point(
        EffectEstimate::from_log(MeasureKind::OddsRatio, point.ln(), se, confidence_level, corrected),
        point,
    ))
}

/// Keeps the directly computed ratio as the point so that exact rational
/// inputs are not disturbed by the log/exp round trip.
fn with_exact_point(mut e: EffectEstimate, point: f64) -> EffectEstimate {
    e.point = point;
    e.lcl = e.lcl.min(point);
    e.ucl = e.ucl.max(point);
    e
}

/// RR for cohort tables, OR for case-control tables.
pub fn natural_ratio(t: &TwoByTwoTable, confidence_level: f64) -> Result<EffectEstimate> {
    match t.design {
        Design::Cohort => relative_risk(t, confidence_level),
        Design::CaseControl => odds_ratio(t, confidence_level),
    }
}

/// Probability that a case is due to the exposure, `(RR - 1) / RR`.
pub fn pde(rr: f64) -> Result<f64> {
    if rr.is_nan() || rr <= 0.0 {
        return Err(Error::Domain(format!("PDE needs RR > 0, got {rr}")));
    }
    if rr.is_infinite() {
        return Ok(1.0);
    }
    Ok((rr - 1.0) / rr)
}

/// Risk difference `a/(a+b) - c/(c+d)` with a Wald interval from the two
/// binomial variances.
pub fn excess_risk(t: &TwoByTwoTable, confidence_level: f64) -> Result<EffectEstimate> {
    check_confidence_level(confidence_level)?;
    if t.design == Design::CaseControl {
        return Err(Error::Design("excess risk needs cohort rates".into()));
    }
    check_margins(t)?;
    let (n1, n0) = (t.exposed_total() as f64, t.unexposed_total() as f64);
    let (p1, p0) = (t.a as f64 / n1, t.c as f64 / n0);
    let point = p1 - p0;
    let se = (p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0).sqrt();
    let z = z_critical(confidence_level);
    let p_value = if se > 0.0 { two_sided_p(point / se) } else { association_test(t)?.p_value };
    Ok(EffectEstimate {
        kind: MeasureKind::ExcessRisk,
        point,
        lcl: point - z * se,
        ucl: point + z * se,
        confidence_level,
        p_value,
        corrected: false,
        se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationMethod {
    ChiSquare,
    FisherExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationTest {
    pub method: AssociationMethod,
    /// Pearson statistic on the chi-square path.
    pub statistic: Option<f64>,
    pub p_value: f64,
}

/// Pearson chi-square (1 df, no Yates correction) when every expected count
/// is at least 5, otherwise the two-sided Fisher exact test.
///
/// Two-sided Fisher p sums the probabilities of all tables with the observed
/// margins whose probability does not exceed that of the observed table.
pub fn association_test(t: &TwoByTwoTable) -> Result<AssociationTest> {
    check_margins(t)?;
    let min_expected = t.expected_counts().into_iter().fold(f64::INFINITY, f64::min);
    if min_expected >= 5.0 {
        let statistic = pearson_statistic(t);
        Ok(AssociationTest {
            method: AssociationMethod::ChiSquare,
            statistic: Some(statistic),
            p_value: chi_square_1_sf(statistic),
        })
    } else {
        Ok(AssociationTest {
            method: AssociationMethod::FisherExact,
            statistic: None,
            p_value: fisher_exact_two_sided(t),
        })
    }
}

pub fn pearson_statistic(t: &TwoByTwoTable) -> f64 {
    let det = t.a as i128 * t.d as i128 - t.b as i128 * t.c as i128;
    let margins = [t.exposed_total(), t.unexposed_total(), t.cases(), t.noncases()];
    if margins.contains(&0) {
        return 0.0;
    }
    let det = det as f64;
    let n = t.total() as f64;
    margins.iter().fold(n * det * det, |acc, &m| acc / m as f64)
}

/// Relative slack when comparing table probabilities against the observed
/// one; guards against ties lost to rounding in the log-factorials.
const FISHER_TIE_TOLERANCE: f64 = 1e-9;

/// Two-sided Fisher exact p-value for any table, the exact path of
/// [`association_test`].
pub fn fisher_exact_two_sided(t: &TwoByTwoTable) -> f64 {
    let n = t.total();
    let exposed = t.exposed_total();
    let cases = t.cases();
    let lo = (exposed + cases).saturating_sub(n);
    let hi = exposed.min(cases);
    if lo == hi {
        return 1.0;
    }
    let log_denominator = ln_binomial(n, exposed);
    let log_p = |x: u64| ln_binomial(cases, x) + ln_binomial(n - cases, exposed - x) - log_denominator;
    let observed = log_p(t.a);
    let cutoff = observed + FISHER_TIE_TOLERANCE.ln_1p();
    let p: f64 = (lo..=hi).map(log_p).filter(|&lp| lp <= cutoff).map(f64::exp).sum();
    p.clamp(0.0, 1.0)
}

/// Sensitivity and specificity of exposure classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    sensitivity: f64,
    specificity: f64,
}

impl Accuracy {
    pub fn new(sensitivity: f64, specificity: f64) -> Result<Self> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(sensitivity) || !unit(specificity) {
            return Err(Error::Domain(format!(
                "sensitivity {sensitivity} and specificity {specificity} must lie in (0, 1]"
            )));
        }
        if sensitivity + specificity <= 1.0 {
            return Err(Error::Domain(format!(
                "sensitivity + specificity = {} must exceed 1",
                sensitivity + specificity
            )));
        }
        Ok(Self { sensitivity, specificity })
    }

    pub fn perfect() -> Self {
        Self { sensitivity: 1.0, specificity: 1.0 }
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn specificity(&self) -> f64 {
        self.specificity
    }

    fn youden(&self) -> f64 {
        self.sensitivity + self.specificity - 1.0
    }
}

/// Exposure misclassification, possibly differential by outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationSpec {
    pub cases: Accuracy,
    pub noncases: Accuracy,
    differential: bool,
}

impl MisclassificationSpec {
    pub fn nondifferential(accuracy: Accuracy) -> Self {
        Self { cases: accuracy, noncases: accuracy, differential: false }
    }

    pub fn differential(cases: Accuracy, noncases: Accuracy) -> Self {
        Self { cases, noncases, differential: true }
    }

    pub fn is_differential(&self) -> bool {
        self.differential
    }
}

/// A 2x2 table of real-valued (expected or corrected) counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealTable {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub design: Design,
}

impl RealTable {
    pub fn relative_risk(&self) -> Option<f64> {
        let (n1, n0) = (self.a + self.b, self.c + self.d);
        if self.design != Design::Cohort || n1 <= 0.0 || n0 <= 0.0 || self.c <= 0.0 {
            return None;
        }
        Some((self.a / n1) / (self.c / n0))
    }

    pub fn odds_ratio(&self) -> Option<f64> {
        if self.b <= 0.0 || self.c <= 0.0 {
            return None;
        }
        Some((self.a * self.d) / (self.b * self.c))
    }

    /// Rounds each cell half-to-even into an integer table.
    pub fn round_half_even(&self) -> TwoByTwoTable {
        let r = |v: f64| v.max(0.0).round_ties_even() as u64;
        TwoByTwoTable::new(r(self.a), r(self.b), r(self.c), r(self.d), self.design)
    }
}

impl From<&TwoByTwoTable> for RealTable {
    fn from(t: &TwoByTwoTable) -> Self {
        Self { a: t.a as f64, b: t.b as f64, c: t.c as f64, d: t.d as f64, design: t.design }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisclassificationResult {
    pub table: RealTable,
    /// `None` for case-control data or when a denominator cell is zero.
    pub relative_risk: Option<f64>,
    pub odds_ratio: Option<f64>,
}

/// Expected observed counts when true counts are classified with `spec`.
pub fn forward_misclassify(t: &RealTable, spec: &MisclassificationSpec) -> RealTable {
    let row = |exposed: f64, unexposed: f64, acc: &Accuracy| {
        let total = exposed + unexposed;
        let seen = acc.sensitivity * exposed + (1.0 - acc.specificity) * unexposed;
        (seen, total - seen)
    };
    let (a, c) = row(t.a, t.c, &spec.cases);
    let (b, d) = row(t.b, t.d, &spec.noncases);
    RealTable { a, b, c, d, design: t.design }
}

/// Back-corrects exposure misclassification within each outcome row.
pub fn misclassification_adjust(t: &TwoByTwoTable, spec: &MisclassificationSpec) -> Result<MisclassificationResult> {
    back_correct(&RealTable::from(t), spec)
}

pub fn back_correct(t: &RealTable, spec: &MisclassificationSpec) -> Result<MisclassificationResult> {
    let row = |seen_exposed: f64, seen_unexposed: f64, acc: &Accuracy, names: (&str, &str)| {
        let total = seen_exposed + seen_unexposed;
        let exposed = (seen_exposed - (1.0 - acc.specificity) * total) / acc.youden();
        let unexposed = total - exposed;
        let slack = 1e-9 * total.max(1.0);
        for (name, v) in [(names.0, exposed), (names.1, unexposed)] {
            if v < -slack {
                return Err(Error::InfeasibleCorrection { cell: name.to_string(), value: v });
            }
        }
        Ok((exposed.max(0.0), unexposed.max(0.0)))
    };
    let (a, c) = row(t.a, t.c, &spec.cases, ("a", "c"))?;
    let (b, d) = row(t.b, t.d, &spec.noncases, ("b", "d"))?;
    let table = RealTable { a, b, c, d, design: t.design };
    Ok(MisclassificationResult { table, relative_risk: table.relative_risk(), odds_ratio: table.odds_ratio() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASBESTOS: TwoByTwoTable = TwoByTwoTable { a: 25, b: 975, c: 5, d: 995, design: Design::Cohort };

    #[test]
    fn relative_risk_examples() {
        let e = relative_risk(&ASBESTOS, 0.95).unwrap();
        assert_eq!(e.point, 5.0);
        assert!(!e.corrected);
        assert!((e.lcl - 1.9218).abs() < 5e-4, "{}", e.lcl);
        assert!((e.ucl - 13.008).abs() < 5e-3, "{}", e.ucl);
        assert_eq!(relative_risk(&TwoByTwoTable::cohort(10, 90, 10, 90), 0.95).unwrap().point, 1.0);
    }

    #[test]
    fn relative_risk_errors() {
        let cc = TwoByTwoTable::case_control(25, 975, 5, 995);
        assert!(matches!(relative_risk(&cc, 0.95), Err(Error::Design(_))));
        let empty = TwoByTwoTable::cohort(3, 4, 0, 0);
        assert!(matches!(relative_risk(&empty, 0.95), Err(Error::Degenerate(_))));
        assert!(matches!(relative_risk(&ASBESTOS, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn odds_ratio_examples() {
        assert_eq!(odds_ratio(&TwoByTwoTable::cohort(10, 10, 10, 10), 0.95).unwrap().point, 1.0);
        let e = odds_ratio(&ASBESTOS, 0.95).unwrap();
        assert_eq!(e.point, (25.0 * 995.0) / (975.0 * 5.0));
        assert!((e.point - 5.1026).abs() < 1e-4);
        let z = odds_ratio(&TwoByTwoTable::cohort(0, 10, 5, 5), 0.95).unwrap();
        assert!(z.corrected);
        assert_eq!(z.point, (0.5 * 5.5) / (10.5 * 5.5));
    }

    #[test]
    fn pde_examples() {
        assert_eq!(pde(5.0).unwrap(), 0.8);
        assert_eq!(pde(1.0).unwrap(), 0.0);
        assert_eq!(pde(2.0).unwrap(), 0.5);
        assert!(pde(0.0).is_err());
        assert!(pde(-1.0).is_err());
        assert!(pde(f64::NAN).is_err());
    }

    #[test]
    fn excess_risk_examples() {
        let e = excess_risk(&ASBESTOS, 0.95).unwrap();
        assert!((e.point - 0.020).abs() < 1e-15);
        assert!(e.lcl < e.point && e.point < e.ucl);
        assert_eq!(excess_risk(&TwoByTwoTable::cohort(5, 95, 5, 95), 0.95).unwrap().point, 0.0);
        assert!(excess_risk(&TwoByTwoTable::cohort(0, 0, 5, 5), 0.95).is_err());
    }

    #[test]
    fn association_paths() {
        let null = association_test(&TwoByTwoTable::cohort(10, 10, 10, 10)).unwrap();
        assert_eq!(null.method, AssociationMethod::ChiSquare);
        assert_eq!(null.statistic, Some(0.0));
        assert_eq!(null.p_value, 1.0);

        let small = association_test(&TwoByTwoTable::cohort(3, 1, 1, 3)).unwrap();
        assert_eq!(small.method, AssociationMethod::FisherExact);
        // Observed table and its mirror image: (16 + 16 + 1 + 1) / 70.
        assert!((small.p_value - 34.0 / 70.0).abs() < 1e-12);

        let big = association_test(&ASBESTOS).unwrap();
        assert_eq!(big.method, AssociationMethod::ChiSquare);
        assert!(big.p_value < 0.05);
    }

    #[test]
    fn misclassification_identity_and_infeasible() {
        let spec = MisclassificationSpec::nondifferential(Accuracy::perfect());
        let r = misclassification_adjust(&ASBESTOS, &spec).unwrap();
        assert_eq!(r.table, RealTable::from(&ASBESTOS));
        assert_eq!(r.relative_risk, Some(5.0));

        let harsh = MisclassificationSpec::nondifferential(Accuracy::new(0.8, 0.95).unwrap());
        match misclassification_adjust(&ASBESTOS, &harsh) {
            Err(Error::InfeasibleCorrection { cell, value }) => {
                // 25 of 30 cases seen exposed is more than sensitivity 0.8 allows.
                assert_eq!(cell, "c");
                assert!(value < 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(Accuracy::new(0.5, 0.5).is_err());
        assert!(Accuracy::new(0.0, 1.0).is_err());
    }

    #[test]
    fn forward_then_back_is_identity() {
        let spec =
            MisclassificationSpec::differential(Accuracy::new(0.85, 0.95).unwrap(), Accuracy::new(0.9, 0.9).unwrap());
        let truth = RealTable::from(&TwoByTwoTable::cohort(120, 880, 40, 960));
        let seen = forward_misclassify(&truth, &spec);
        let back = back_correct(&seen, &spec).unwrap().table;
        for (x, y) in [(back.a, truth.a), (back.b, truth.b), (back.c, truth.c), (back.d, truth.d)] {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
