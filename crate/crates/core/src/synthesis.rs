//! Evidence across studies and across dose levels.
//!
//! Meta-analysis pools log relative risks by inverse variance (fixed effect)
//! and by DerSimonian-Laird (random effects). The dose-response side has a
//! Cochran-Armitage trend test that scores groups by their numeric dose, and a
//! closed-form fit of `RR(x) = (1 + x)^z`.

use serde::{Deserialize, Serialize};

use crate::effect::{natural_ratio, relative_risk, EffectEstimate, MeasureKind};
use crate::numeric::{check_confidence_level, chi_square_sf, normal_sf, z_critical};
use crate::study::DoseSeries;
use crate::{Error, Result};

/// One study's log relative risk and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEstimate {
    pub study_id: String,
    pub log_rr: f64,
    pub se: f64,
}

impl StudyEstimate {
    pub fn new(study_id: impl Into<String>, log_rr: f64, se: f64) -> Result<Self> {
        if !log_rr.is_finite() {
            return Err(Error::Domain(format!("log RR {log_rr} is not finite")));
        }
        if !(se.is_finite() && se > 0.0) {
            return Err(Error::Domain(format!("standard error {se} must be finite and > 0")));
        }
        Ok(Self { study_id: study_id.into(), log_rr, se })
    }

    /// Uses the log-scale point and standard error of a ratio estimate.
    pub fn from_estimate(study_id: impl Into<String>, e: &EffectEstimate) -> Result<Self> {
        if !e.is_ratio() {
            return Err(Error::Domain("meta-analysis pools ratio measures only".into()));
        }
        Self::new(study_id, e.point.ln(), e.se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub pooled_fixed: EffectEstimate,
    pub pooled_random: EffectEstimate,
    /// Cochran's Q.
    pub q: f64,
    pub q_df: u32,
    pub q_p: f64,
    pub i_squared: f64,
    pub tau_squared: f64,
}

fn require_two(estimates: &[StudyEstimate]) -> Result<()> {
    if estimates.len() < 2 {
        Err(Error::InsufficientStudies(estimates.len()))
    } else {
        Ok(())
    }
}

/// Inverse-variance weighted mean and its standard error. Terms are summed in
/// a canonical order so the result does not depend on input order.
fn weighted_mean(terms: &mut [(f64, f64)]) -> (f64, f64) {
    terms.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let sum_w: f64 = terms.iter().map(|&(_, w)| w).sum();
    let sum_wy: f64 = terms.iter().map(|&(y, w)| w * y).sum();
    (sum_wy / sum_w, (1.0 / sum_w).sqrt())
}

pub fn meta_analyze(estimates: &[StudyEstimate], confidence_level: f64) -> Result<MetaResult> {
    check_confidence_level(confidence_level)?;
    require_two(estimates)?;
    let mut fixed_terms: Vec<(f64, f64)> = estimates.iter().map(|e| (e.log_rr, 1.0 / (e.se * e.se))).collect();
    let (mu_fixed, se_fixed) = weighted_mean(&mut fixed_terms);

    let q: f64 = fixed_terms.iter().map(|&(y, w)| w * (y - mu_fixed).powi(2)).sum();
    let q_df = (estimates.len() - 1) as u32;
    let df = q_df as f64;
    let i_squared = if q > 0.0 { ((q - df) / q).max(0.0) } else { 0.0 };

    let sum_w: f64 = fixed_terms.iter().map(|&(_, w)| w).sum();
    let sum_w2: f64 = fixed_terms.iter().map(|&(_, w)| w * w).sum();
    let c = sum_w - sum_w2 / sum_w;
    let tau_squared = if c > 0.0 { ((q - df) / c).max(0.0) } else { 0.0 };

    let (mu_random, se_random) = if tau_squared == 0.0 {
        (mu_fixed, se_fixed)
    } else {
        let mut random_terms: Vec<(f64, f64)> =
            estimates.iter().map(|e| (e.log_rr, 1.0 / (e.se * e.se + tau_squared))).collect();
        weighted_mean(&mut random_terms)
    };

    Ok(MetaResult {
        pooled_fixed: EffectEstimate::from_log(MeasureKind::RelativeRisk, mu_fixed, se_fixed, confidence_level, false),
        pooled_random: EffectEstimate::from_log(
            MeasureKind::RelativeRisk,
            mu_random,
            se_random,
            confidence_level,
            false,
        ),
        q,
        q_df,
        q_p: chi_square_sf(q, q_df),
        i_squared,
        tau_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub heterogeneity_alpha: f64,
    pub confidence_level: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { heterogeneity_alpha: 0.10, confidence_level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyEvidence {
    pub status: ConsistencyStatus,
    pub q_p: f64,
    /// Fraction of study pairs whose confidence intervals overlap.
    pub overlap_fraction: f64,
    pub meta: MetaResult,
}

/// Homogeneous and jointly harmful passes; heterogeneous with estimates on
/// both sides of 1 fails; anything else is indeterminate.
pub fn consistency_verdict(estimates: &[StudyEstimate], config: &ConsistencyConfig) -> Result<ConsistencyEvidence> {
    require_two(estimates)?;
    let meta = meta_analyze(estimates, config.confidence_level)?;
    let heterogeneous = meta.q_p < config.heterogeneity_alpha;
    let any_below = estimates.iter().any(|e| e.log_rr < 0.0);
    let any_above = estimates.iter().any(|e| e.log_rr > 0.0);
    let status = if !heterogeneous && meta.pooled_fixed.lcl > 1.0 {
        ConsistencyStatus::Pass
    } else if heterogeneous && any_below && any_above {
        ConsistencyStatus::Fail
    } else {
        ConsistencyStatus::Indeterminate
    };

    let z = z_critical(config.confidence_level);
    let ci: Vec<(f64, f64)> = estimates.iter().map(|e| (e.log_rr - z * e.se, e.log_rr + z * e.se)).collect();
    let mut pairs = 0usize;
    let mut overlapping = 0usize;
    for i in 0..ci.len() {
        for j in i + 1..ci.len() {
            pairs += 1;
            if ci[i].0 <= ci[j].1 && ci[j].0 <= ci[i].1 {
                overlapping += 1;
            }
        }
    }
    Ok(ConsistencyEvidence { status, q_p: meta.q_p, overlap_fraction: overlapping as f64 / pairs as f64, meta })
}

/// One group of a trend test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendGroup {
    pub score: f64,
    pub cases: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendStatistic {
    pub z: f64,
    /// One-sided p-value against an increasing trend.
    pub p_value: f64,
}

/// Cochran-Armitage score test for a linear trend in proportions.
pub fn cochran_armitage(groups: &[TrendGroup]) -> Result<TrendStatistic> {
    let n: f64 = groups.iter().map(|g| g.total as f64).sum();
    let r: f64 = groups.iter().map(|g| g.cases as f64).sum();
    if n == 0.0 {
        return Err(Error::Degenerate("trend test on empty groups".into()));
    }
    let p_bar = r / n;
    let s_bar = groups.iter().map(|g| g.total as f64 * g.score).sum::<f64>() / n;
    let spread: f64 = groups.iter().map(|g| g.total as f64 * (g.score - s_bar).powi(2)).sum();
    let variance = p_bar * (1.0 - p_bar) * spread;
    if !(variance > 0.0) {
        return Err(Error::Degenerate(
            "trend test has zero variance (all groups share one score or one outcome)".into(),
        ));
    }
    let t: f64 = groups.iter().map(|g| (g.score - s_bar) * g.cases as f64).sum();
    let z = t / variance.sqrt();
    Ok(TrendStatistic { z, p_value: normal_sf(z) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseTrend {
    pub z: f64,
    pub trend_p: f64,
    pub monotone_nondecreasing: bool,
    /// `(dose, RR)` against the shared referent.
    pub point_rrs: Vec<(f64, f64)>,
}

/// Trend test over the referent (score 0) and each dose group (score =
/// dose), plus a monotonicity check on the point RRs.
pub fn dose_trend(series: &DoseSeries) -> Result<DoseTrend> {
    let points = series.points();
    if points.len() < 2 {
        return Err(Error::Degenerate(format!("dose series `{}` needs at least 2 dose points", series.id)));
    }
    let (ref_cases, ref_noncases) = series.referent();
    let mut groups = vec![TrendGroup { score: 0.0, cases: ref_cases, total: ref_cases + ref_noncases }];
    groups.extend(points.iter().map(|p| TrendGroup {
        score: p.dose,
        cases: p.table.a,
        total: p.table.exposed_total(),
    }));
    let stat = cochran_armitage(&groups)?;
    let point_rrs =
        points.iter().map(|p| natural_ratio(&p.table, 0.95).map(|e| (p.dose, e.point))).collect::<Result<Vec<_>>>()?;
    let monotone_nondecreasing = point_rrs.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(DoseTrend { z: stat.z, trend_p: stat.p_value, monotone_nondecreasing, point_rrs })
}

/// Log RR at one dose with its inverse-variance weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseObservation {
    pub dose: f64,
    pub log_rr: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseFit {
    /// Exponent in `RR(x) = (1 + x)^z`.
    pub z: f64,
    pub z_se: f64,
    /// Weighted residual sum of squares on the log scale.
    pub residual_sse: f64,
    /// `(dose, fitted RR)` per observation.
    pub fitted: Vec<(f64, f64)>,
}

impl DoseFit {
    pub fn fitted_rr(&self, dose: f64) -> f64 {
        (1.0 + dose).powf(self.z)
    }
}

/// Weighted least squares of `log RR` on `log(1 + x)` through the origin.
pub fn fit_doll_peto_points(obs: &[DoseObservation]) -> Result<DoseFit> {
    if obs.is_empty() {
        return Err(Error::Degenerate("no dose observations".into()));
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for o in obs {
        if !(o.dose >= 0.0 && o.dose.is_finite() && o.weight > 0.0 && o.log_rr.is_finite()) {
            return Err(Error::Domain(format!("invalid dose observation {o:?}")));
        }
        let u = o.dose.ln_1p();
        sxx += o.weight * u * u;
        sxy += o.weight * u * o.log_rr;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("all doses are 0; the exponent is not identifiable".into()));
    }
    let z = sxy / sxx;
    let residual_sse = obs.iter().map(|o| o.weight * (o.log_rr - z * o.dose.ln_1p()).powi(2)).sum();
    let fit = DoseFit { z, z_se: (1.0 / sxx).sqrt(), residual_sse, fitted: Vec::new() };
    let fitted = obs.iter().map(|o| (o.dose, fit.fitted_rr(o.dose))).collect();
    Ok(DoseFit { fitted, ..fit })
}

/// Fits the power model to a dose series, weighting each log RR by its
/// inverse variance.
pub fn fit_doll_peto(series: &DoseSeries) -> Result<DoseFit> {
    let obs = series
        .points()
        .iter()
        .map(|p| {
            let e = relative_risk(&p.table, 0.95)?;
            Ok(DoseObservation { dose: p.dose, log_rr: e.point.ln(), weight: 1.0 / (e.se * e.se) })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_doll_peto_points(&obs)
}
