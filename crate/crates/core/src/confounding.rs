//! Stratified pooling, Simpson's-paradox detection and sensitivity of an
//! observed relative risk to one unmeasured binary confounder.
//!
//! The confounding bias factor used throughout is
//!
//! ```text
//! B = (p1 (RRc - 1) + 1) / (p0 (RRc - 1) + 1)
//! ```
//!
//! where `RRc` is the confounder-outcome relative risk and `p1`, `p0` are the
//! confounder prevalences among exposed and unexposed. The observed RR equals
//! the true RR times `B` when the confounder does not modify the exposure
//! effect on the ratio scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effect::{natural_ratio, EffectEstimate, MeasureKind};
use crate::numeric::{check_confidence_level, quantile_sorted};
use crate::study::{Design, StratifiedStudy};
use crate::{Error, Result};

/// One binary omitted variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfounderSpec {
    pub rr_confounder_outcome: f64,
    pub prevalence_exposed: f64,
    pub prevalence_unexposed: f64,
}

impl ConfounderSpec {
    pub fn new(rr_confounder_outcome: f64, prevalence_exposed: f64, prevalence_unexposed: f64) -> Result<Self> {
        if !(rr_confounder_outcome.is_finite() && rr_confounder_outcome > 0.0) {
            return Err(Error::Domain(format!("confounder RR must be finite and > 0, got {rr_confounder_outcome}")));
        }
        for p in [prevalence_exposed, prevalence_unexposed] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("prevalence {p} is not in [0, 1]")));
            }
        }
        Ok(Self { rr_confounder_outcome, prevalence_exposed, prevalence_unexposed })
    }

    /// Ratio of the prevalences of the risk-raising level of the confounder,
    /// exposed over unexposed. For a protective confounder (`RRc < 1`) the
    /// raising level is its absence.
    pub fn prevalence_ratio(&self) -> f64 {
        let (p1, p0) = if self.rr_confounder_outcome >= 1.0 {
            (self.prevalence_exposed, self.prevalence_unexposed)
        } else {
            (1.0 - self.prevalence_exposed, 1.0 - self.prevalence_unexposed)
        };
        match (p1 == 0.0, p0 == 0.0) {
            (true, true) => 1.0,
            (false, true) => f64::INFINITY,
            _ => p1 / p0,
        }
    }

    /// Confounder-outcome RR expressed as a value `>= 1`.
    pub fn strength(&self) -> f64 {
        let r = self.rr_confounder_outcome;
        if r >= 1.0 {
            r
        } else {
            1.0 / r
        }
    }
}

/// Closed interval for one sensitivity parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub low: f64,
    pub high: f64,
}

impl ParameterRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low > high {
            return Err(Error::Domain(format!("invalid range [{low}, {high}]")));
        }
        Ok(Self { low, high })
    }

    pub fn point(v: f64) -> Self {
        Self { low: v, high: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        let u: f64 = rng.random();
        (self.low + u * (self.high - self.low)).min(self.high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRange {
    pub rr_confounder: ParameterRange,
    pub prevalence_exposed: ParameterRange,
    pub prevalence_unexposed: ParameterRange,
    pub draws: u64,
    pub seed: u64,
}

/// Mantel-Haenszel pooled RR (cohort) or OR (case-control).
///
/// Variances: Greenland-Robins for the RR, Robins-Breslow-Greenland for the
/// OR. A single stratum returns the crude estimate of that stratum.
pub fn mantel_haenszel_pool(study: &StratifiedStudy, confidence_level: f64) -> Result<EffectEstimate> {
    check_confidence_level(confidence_level)?;
    let design = study.design()?;
    let strata = study.strata();
    if strata.len() == 1 {
        return natural_ratio(&strata[0].table, confidence_level);
    }
    for s in strata {
        if s.table.exposed_total() == 0 || s.table.unexposed_total() == 0 {
            return Err(Error::Degenerate(format!("stratum {} of study `{}` has an empty margin", s.table, study.id)));
        }
    }
    let raw: Vec<[f64; 4]> = strata.iter().map(|s| s.table.cells().map(|v| v as f64)).collect();
    if let Some(e) = mh_from_cells(&raw, design, confidence_level, false) {
        return Ok(e);
    }
    let corrected: Vec<[f64; 4]> =
        strata.iter().zip(&raw).map(|(s, c)| if s.table.has_zero_cell() { c.map(|v| v + 0.5) } else { *c }).collect();
    mh_from_cells(&corrected, design, confidence_level, true)
        .ok_or_else(|| Error::Degenerate(format!("Mantel-Haenszel estimate undefined for study `{}`", study.id)))
}

fn mh_from_cells(cells: &[[f64; 4]], design: Design, confidence_level: f64, corrected: bool) -> Option<EffectEstimate> {
    let (log_point, var) = match design {
        Design::Cohort => {
            let (mut r, mut s, mut v) = (0.0, 0.0, 0.0);
            for &[a, b, c, d] in cells {
                let (n1, n0) = (a + b, c + d);
                let n = n1 + n0;
                r += a * n0 / n;
                s += c * n1 / n;
                v += (n1 * n0 * (a + c) - a * c * n) / (n * n);
            }
            if r <= 0.0 || s <= 0.0 {
                return None;
            }
            ((r / s).ln(), v / (r * s))
        }
        Design::CaseControl => {
            let (mut r, mut s) = (0.0, 0.0);
            let (mut pr, mut ps_qr, mut qs) = (0.0, 0.0, 0.0);
            for &[a, b, c, d] in cells {
                let n = a + b + c + d;
                let (ri, si) = (a * d / n, b * c / n);
                let (pi, qi) = ((a + d) / n, (b + c) / n);
                r += ri;
                s += si;
                pr += pi * ri;
                ps_qr += pi * si + qi * ri;
                qs += qi * si;
            }
            if r <= 0.0 || s <= 0.0 {
                return None;
            }
            let var = pr / (2.0 * r * r) + ps_qr / (2.0 * r * s) + qs / (2.0 * s * s);
            ((r / s).ln(), var)
        }
    };
    if !(var.is_finite() && var >= 0.0) {
        return None;
    }
    let kind = match design {
        Design::Cohort => MeasureKind::RelativeRisk,
        Design::CaseControl => MeasureKind::OddsRatio,
    };
    Some(EffectEstimate::from_log(kind, log_point, var.sqrt(), confidence_level, corrected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpsonReport {
    pub crude: EffectEstimate,
    pub per_stratum: Vec<EffectEstimate>,
    /// The crude association points one way and every stratum strictly the
    /// other way.
    pub reversal: bool,
}

pub fn detect_simpson(study: &StratifiedStudy, confidence_level: f64) -> Result<SimpsonReport> {
    study.design()?;
    if study.strata().len() < 2 {
        return Err(Error::Degenerate("Simpson's paradox needs at least 2 strata".into()));
    }
    let crude = natural_ratio(&study.crude_table(), confidence_level)?;
    let per_stratum =
        study.strata().iter().map(|s| natural_ratio(&s.table, confidence_level)).collect::<Result<Vec<_>>>()?;
    Ok(SimpsonReport { reversal: is_reversal(crude.point, per_stratum.iter().map(|e| e.point)), crude, per_stratum })
}

/// Reversal rule on raw ratios.
pub fn is_reversal(crude: f64, strata: impl IntoIterator<Item = f64>) -> bool {
    if crude == 1.0 {
        return false;
    }
    let harmful = crude > 1.0;
    let mut any = false;
    for s in strata {
        any = true;
        let opposite = if harmful { s < 1.0 } else { s > 1.0 };
        if !opposite {
            return false;
        }
    }
    any
}

/// Minimum strength an omitted variable needs to fully explain an observed
/// relative risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornfieldRequirements {
    pub min_rr_confounder: f64,
    pub min_prevalence_ratio: f64,
}

impl CornfieldRequirements {
    /// True when the candidate meets both minima and so could account for the
    /// whole association.
    pub fn met_by(&self, c: &ConfounderSpec) -> bool {
        c.strength() >= self.min_rr_confounder && c.prevalence_ratio() >= self.min_prevalence_ratio
    }
}

pub fn cornfield_requirements(rr_observed: f64) -> Result<CornfieldRequirements> {
    if rr_observed.is_nan() || rr_observed <= 1.0 {
        return Err(Error::Domain(format!(
            "observed RR {rr_observed} is not above 1; there is nothing to explain away"
        )));
    }
    Ok(CornfieldRequirements { min_rr_confounder: rr_observed, min_prevalence_ratio: rr_observed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDirection {
    Inflating,
    Masking,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasAdjustment {
    pub bias_factor: f64,
    pub rr_adjusted: f64,
    pub direction: BiasDirection,
}

pub fn bias_factor(c: &ConfounderSpec) -> f64 {
    let excess = c.rr_confounder_outcome - 1.0;
    (c.prevalence_exposed * excess + 1.0) / (c.prevalence_unexposed * excess + 1.0)
}

pub fn bias_adjust(rr_observed: f64, c: &ConfounderSpec) -> Result<BiasAdjustment> {
    if rr_observed.is_nan() || rr_observed <= 0.0 {
        return Err(Error::Domain(format!("observed RR must be > 0, got {rr_observed}")));
    }
    let b = bias_factor(c);
    let direction = if b > 1.0 {
        BiasDirection::Inflating
    } else if b < 1.0 {
        BiasDirection::Masking
    } else {
        BiasDirection::Neutral
    };
    Ok(BiasAdjustment { bias_factor: b, rr_adjusted: rr_observed / b, direction })
}

pub const SENSITIVITY_QUANTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub rr_observed: f64,
    pub draws: u64,
    pub seed: u64,
    pub threshold: f64,
    /// `(probability, adjusted RR)` pairs at [`SENSITIVITY_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
    pub fraction_above_threshold: f64,
}

/// Generator for draw `index`: ChaCha8 seeded from `seed`, on stream `index`.
/// Each draw owns its stream, so results do not depend on evaluation order.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Confounder drawn for one Monte Carlo iteration.
pub fn draw_confounder(range: &SensitivityRange, index: u64) -> ConfounderSpec {
    let mut rng = draw_rng(range.seed, index);
    ConfounderSpec {
        rr_confounder_outcome: range.rr_confounder.sample(&mut rng),
        prevalence_exposed: range.prevalence_exposed.sample(&mut rng),
        prevalence_unexposed: range.prevalence_unexposed.sample(&mut rng),
    }
}

/// Monte Carlo sensitivity of `rr_observed` to a confounder drawn uniformly
/// and independently from each parameter interval.
pub fn mc_sensitivity(rr_observed: f64, range: &SensitivityRange, threshold: f64) -> Result<SensitivitySummary> {
    if range.draws == 0 {
        return Err(Error::Config("draws must be >= 1".into()));
    }
    if range.rr_confounder.low <= 0.0 {
        return Err(Error::Domain("confounder RR range must be > 0".into()));
    }
    for r in [range.prevalence_exposed, range.prevalence_unexposed] {
        if r.low < 0.0 || r.high > 1.0 {
            return Err(Error::Domain(format!("prevalence range [{}, {}] leaves [0, 1]", r.low, r.high)));
        }
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Config(format!("threshold must be > 0, got {threshold}")));
    }
    bias_adjust(rr_observed, &ConfounderSpec::new(1.0, 0.0, 0.0)?)?;

    let mut adjusted: Vec<f64> =
        (0..range.draws).into_par_iter().map(|i| rr_observed / bias_factor(&draw_confounder(range, i))).collect();
    adjusted.sort_by(f64::total_cmp);
    let above = adjusted.iter().filter(|&&v| v > threshold).count();
    Ok(SensitivitySummary {
        rr_observed,
        draws: range.draws,
        seed: range.seed,
        threshold,
        quantiles: SENSITIVITY_QUANTILES.iter().map(|&p| (p, quantile_sorted(&adjusted, p))).collect(),
        fraction_above_threshold: above as f64 / range.draws as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effect::relative_risk;
    use crate::study::{CovariateProfile, Stratum, TwoByTwoTable};

    fn level(v: &str) -> CovariateProfile {
        [("c".to_string(), v.to_string())].into()
    }

    fn study(tables: &[TwoByTwoTable]) -> StratifiedStudy {
        let strata =
            tables.iter().enumerate().map(|(i, &table)| Stratum { profile: level(&i.to_string()), table }).collect();
        StratifiedStudy::new("s", strata).unwrap()
    }

    #[test]
    fn homogeneous_strata_pool_to_common_rr() {
        let t = TwoByTwoTable::cohort(25, 975, 5, 995);
        let e = mantel_haenszel_pool(&study(&[t, t]), 0.95).unwrap();
        assert!((e.point - 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_stratum_equals_crude() {
        let t = TwoByTwoTable::cohort(12, 88, 4, 96);
        let s = StratifiedStudy::crude("one", t);
        assert_eq!(mantel_haenszel_pool(&s, 0.95).unwrap(), relative_risk(&t, 0.95).unwrap());
    }

    #[test]
    fn mixed_designs_rejected() {
        let s = study(&[TwoByTwoTable::cohort(1, 2, 3, 4), TwoByTwoTable::case_control(1, 2, 3, 4)]);
        assert_eq!(mantel_haenszel_pool(&s, 0.95), Err(Error::MixedDesign));
    }

    #[test]
    fn case_control_pooling_matches_known_value() {
        // Two strata with OR 2 and 2; pooled OR 2.
        let s = study(&[TwoByTwoTable::case_control(20, 10, 10, 10), TwoByTwoTable::case_control(40, 20, 20, 20)]);
        let e = mantel_haenszel_pool(&s, 0.95).unwrap();
        assert_eq!(e.kind, MeasureKind::OddsRatio);
        assert!((e.point - 2.0).abs() < 1e-12);
        assert!(e.lcl < 2.0 && e.ucl > 2.0);
    }

    #[test]
    fn sparse_strata_trigger_correction_only_when_needed() {
        let s = study(&[TwoByTwoTable::cohort(0, 10, 2, 8), TwoByTwoTable::cohort(3, 7, 1, 9)]);
        let e = mantel_haenszel_pool(&s, 0.95).unwrap();
        assert!(!e.corrected);
        let s = study(&[TwoByTwoTable::cohort(2, 10, 0, 8), TwoByTwoTable::cohort(3, 7, 0, 9)]);
        let e = mantel_haenszel_pool(&s, 0.95).unwrap();
        assert!(e.corrected && e.point.is_finite());
    }

    #[test]
    fn mixed_directions_are_not_a_reversal() {
        assert!(!is_reversal(1.0, [1.2, 0.8]));
        assert!(!is_reversal(1.1, [1.2, 0.8]));
        assert!(is_reversal(0.9, [1.2, 1.1]));
        assert!(!is_reversal(0.9, [1.2, 1.0]));
    }

    #[test]
    fn homogeneous_strata_no_reversal() {
        let t = TwoByTwoTable::cohort(20, 80, 10, 90);
        assert!(!detect_simpson(&study(&[t, t]), 0.95).unwrap().reversal);
    }

    #[test]
    fn cornfield_examples() {
        let req = cornfield_requirements(3.0).unwrap();
        assert_eq!(req.min_rr_confounder, 3.0);
        assert_eq!(req.min_prevalence_ratio, 3.0);
        assert!(cornfield_requirements(1.0).is_err());
        let weak = ConfounderSpec::new(1.5, 0.9, 0.01).unwrap();
        assert!(!cornfield_requirements(2.0).unwrap().met_by(&weak));
        let strong = ConfounderSpec::new(10.0, 0.5, 0.05).unwrap();
        assert!(cornfield_requirements(5.0).unwrap().met_by(&strong));
    }

    #[test]
    fn bias_adjust_examples() {
        let b = bias_adjust(3.0, &ConfounderSpec::new(2.0, 0.5, 0.25).unwrap()).unwrap();
        assert!((b.bias_factor - 1.2).abs() < 1e-15);
        assert_eq!(b.direction, BiasDirection::Inflating);
        assert!((b.rr_adjusted - 2.5).abs() < 1e-12);

        let balanced = bias_adjust(3.0, &ConfounderSpec::new(4.0, 0.3, 0.3).unwrap()).unwrap();
        assert_eq!(balanced.bias_factor, 1.0);
        assert_eq!(balanced.rr_adjusted, 3.0);
        assert_eq!(balanced.direction, BiasDirection::Neutral);

        let null = bias_adjust(3.0, &ConfounderSpec::new(1.0, 0.9, 0.1).unwrap()).unwrap();
        assert_eq!(null.bias_factor, 1.0);

        let masking = bias_adjust(1.5, &ConfounderSpec::new(3.0, 0.1, 0.6).unwrap()).unwrap();
        assert_eq!(masking.direction, BiasDirection::Masking);
        assert!(masking.rr_adjusted > 1.5);
    }

    fn range(rr: (f64, f64), p1: (f64, f64), p0: (f64, f64), draws: u64, seed: u64) -> SensitivityRange {
        SensitivityRange {
            rr_confounder: ParameterRange::new(rr.0, rr.1).unwrap(),
            prevalence_exposed: ParameterRange::new(p1.0, p1.1).unwrap(),
            prevalence_unexposed: ParameterRange::new(p0.0, p0.1).unwrap(),
            draws,
            seed,
        }
    }

    #[test]
    fn degenerate_ranges_collapse() {
        let r = range((2.0, 2.0), (0.5, 0.5), (0.25, 0.25), 50, 7);
        let s = mc_sensitivity(3.0, &r, 2.0).unwrap();
        let expected = bias_adjust(3.0, &ConfounderSpec::new(2.0, 0.5, 0.25).unwrap()).unwrap().rr_adjusted;
        assert!(s.quantiles.iter().all(|&(_, q)| q == expected));
        assert_eq!(s.fraction_above_threshold, 1.0);
    }

    #[test]
    fn neutral_ranges_leave_rr_unchanged() {
        let r = range((1.0, 1.0), (0.0, 1.0), (0.0, 1.0), 200, 1);
        let s = mc_sensitivity(2.5, &r, 2.0).unwrap();
        assert!(s.quantiles.iter().all(|&(_, q)| q == 2.5));
    }

    #[test]
    fn sensitivity_is_seed_deterministic() {
        let r = range((1.0, 8.0), (0.1, 0.9), (0.0, 0.5), 10_000, 42);
        let a = mc_sensitivity(4.0, &r, 2.0).unwrap();
        let b = mc_sensitivity(4.0, &r, 2.0).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| mc_sensitivity(4.0, &r, 2.0).unwrap());
        assert_eq!(a, c);
        let other = mc_sensitivity(4.0, &SensitivityRange { seed: 43, ..r }, 2.0).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn sensitivity_rejects_bad_config() {
        let r = range((1.0, 2.0), (0.0, 1.0), (0.0, 1.0), 0, 1);
        assert!(mc_sensitivity(2.0, &r, 2.0).is_err());
        let r = SensitivityRange { draws: 10, ..r };
        assert!(mc_sensitivity(2.0, &r, 0.0).is_err());
        assert!(mc_sensitivity(-1.0, &r, 2.0).is_err());
    }
}
