//! Legal decision layer: general causation, but-for and material
//! contribution rules, joint-exposure apportionment, liability allocation
//! and the taxi posterior.
//!
//! The engine computes; it never picks a legal winner between the two
//! apportionment schemes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checklist::{ChecklistReport, OverallVerdict};
use crate::effect::{pde, EffectEstimate, MeasureKind, PDE_ACCELERATION_CAVEAT};
use crate::study::{parse_json_bytes, TestStatus};
use crate::{Error, Result};

pub const RARE_OUTCOME_NOTE: &str =
    "odds ratio used in place of the relative risk; this is only sound when the outcome is rare";

pub const FORESEEABILITY_NOTE: &str =
    "foreseeability (the \"not insignificant\" risk question) is outside the scope of this engine";

pub const BARE_STATISTICS_WARNING: &str = "bare statistics: negligence and exposure rates are equal across \
companies, so the posterior is fleet share alone and carries no case-specific evidence";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LegalConfig {
    pub rr_threshold: f64,
    /// Compare the lower confidence limit instead of the point estimate.
    pub use_lcl: bool,
    /// De minimis floor for material contribution; 1% is this engine's choice.
    pub material_fraction_floor: f64,
    /// Evidentiary-gap variant: a material increase in risk suffices.
    pub evidentiary_gap: bool,
    pub alpha: f64,
}

impl Default for LegalConfig {
    fn default() -> Self {
        Self { rr_threshold: 2.0, use_lcl: false, material_fraction_floor: 0.01, evidentiary_gap: false, alpha: 0.05 }
    }
}

impl LegalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rr_threshold.is_finite() && self.rr_threshold > 0.0) {
            return Err(Error::Config(format!("rr_threshold {} must be > 0", self.rr_threshold)));
        }
        if !(self.material_fraction_floor > 0.0 && self.material_fraction_floor < 1.0) {
            return Err(Error::Config(format!(
                "material_fraction_floor {} is not in (0, 1)",
                self.material_fraction_floor
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} is not in (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralCausationVerdict {
    Established,
    NotEstablished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralCausation {
    pub verdict: GeneralCausationVerdict,
    pub basis: String,
}

/// First limb: is the exposure capable of causing the outcome in the
/// population? Follows the checklist verdict and cites every test.
pub fn general_causation(report: &ChecklistReport, pooled: &EffectEstimate, _cfg: &LegalConfig) -> GeneralCausation {
    let verdict = match report.overall {
        OverallVerdict::CausationSupported => GeneralCausationVerdict::Established,
        OverallVerdict::CausationNotEstablished => GeneralCausationVerdict::NotEstablished,
    };
    let mut basis = format!(
        "Population {} {:.4} ({:.0}% CI {:.4}-{:.4}, p = {:.4e}).",
        pooled.kind,
        pooled.point,
        100.0 * pooled.confidence_level,
        pooled.lcl,
        pooled.ucl,
        pooled.p_value
    );
    for o in &report.outcomes {
        let _ = write!(basis, " Test {} {}: {}", o.test_id, o.name, o.status);
        if !o.metrics.is_empty() {
            let m: Vec<String> = o.metrics.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
            let _ = write!(basis, " [{}]", m.join(", "));
        }
        if o.status != TestStatus::Pass && !o.rationale.is_empty() {
            let _ = write!(basis, " ({})", o.rationale);
        }
        basis.push('.');
    }
    GeneralCausation { verdict, basis }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButForVerdict {
    Satisfied,
    NotSatisfied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButForResult {
    pub verdict: ButForVerdict,
    /// The rule in both its RR and PDE forms, with the configured values.
    pub rule: String,
    /// Point estimate, or LCL under `use_lcl`.
    pub compared_value: f64,
    pub threshold: f64,
    pub pde: f64,
    pub pde_threshold: f64,
    pub notes: Vec<String>,
}

/// Second limb on the balance of probabilities. The inequality is strict:
/// an RR exactly at the threshold does not satisfy the test.
pub fn but_for_verdict(estimate: &EffectEstimate, cfg: &LegalConfig) -> Result<ButForResult> {
    cfg.validate()?;
    let mut notes = Vec::new();
    match estimate.kind {
        MeasureKind::RelativeRisk => {}
        MeasureKind::OddsRatio => notes.push(RARE_OUTCOME_NOTE.to_string()),
        MeasureKind::ExcessRisk => {
            return Err(Error::Domain("but-for needs a ratio estimate, not an excess risk".into()))
        }
    }
    let (label, value) = if cfg.use_lcl { ("LCL", estimate.lcl) } else { ("RR", estimate.point) };
    let satisfied = value > cfg.rr_threshold;
    let pde_value = pde(value)?;
    let pde_threshold = pde(cfg.rr_threshold)?;
    notes.push(PDE_ACCELERATION_CAVEAT.to_string());
    let (cmp, pcmp) = if satisfied { (">", ">") } else { ("<=", "<=") };
    Ok(ButForResult {
        verdict: if satisfied { ButForVerdict::Satisfied } else { ButForVerdict::NotSatisfied },
        rule: format!(
            "{label} {value:.4} {cmp} {threshold} (equivalently PDE {pde_value:.4} {pcmp} {pde_threshold:.4}); \
             satisfied only when strictly above the threshold",
            threshold = cfg.rr_threshold
        ),
        compared_value: value,
        threshold: cfg.rr_threshold,
        pde: pde_value,
        pde_threshold,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialVerdict {
    Material,
    NotMaterial,
    MaterialRiskIncrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialResult {
    pub verdict: MaterialVerdict,
    pub rule: String,
}

/// `fraction` is the exposure's involved fraction from apportionment, or the
/// PDE for a single exposure.
pub fn material_contribution_verdict(
    estimate: &EffectEstimate,
    fraction: f64,
    cfg: &LegalConfig,
) -> Result<MaterialResult> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("fraction {fraction} is not in [0, 1]")));
    }
    let significant = estimate.p_value < cfg.alpha;
    let sig_text = format!("p = {:.4e} {} alpha {}", estimate.p_value, if significant { "<" } else { ">=" }, cfg.alpha);
    if cfg.evidentiary_gap {
        let raised = estimate.point > 1.0;
        let verdict =
            if significant && raised { MaterialVerdict::MaterialRiskIncrease } else { MaterialVerdict::NotMaterial };
        return Ok(MaterialResult {
            verdict,
            rule: format!(
                "evidentiary gap: material increase in risk requires significance ({sig_text}) and {} {:.4} > 1; \
                 apportionment is reported but not applied",
                estimate.kind, estimate.point
            ),
        });
    }
    let above_floor = fraction > cfg.material_fraction_floor;
    let verdict = if significant && above_floor { MaterialVerdict::Material } else { MaterialVerdict::NotMaterial };
    Ok(MaterialResult {
        verdict,
        rule: format!(
            "material contribution requires significance ({sig_text}) and fraction {fraction:.4} > floor {}",
            cfg.material_fraction_floor
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApportionScheme {
    /// Units `rr_a-1`, `rr_s-1` and `rr_as-1` for the joint cell.
    ExcessUnits,
    /// Additive partition: main effects plus interaction `rr_as-rr_a-rr_s+1`.
    SynergyPartition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApportionmentResult {
    pub scheme: ApportionScheme,
    pub units: BTreeMap<String, f64>,
    pub total_units: f64,
    pub involved_fraction: BTreeMap<String, f64>,
}

/// Excess cases among the jointly exposed, per unit of baseline risk, split
/// between exposure `a`, exposure `s` and their interaction.
pub fn apportion_joint_exposures(
    rr_a: f64,
    rr_s: f64,
    rr_as: f64,
    scheme: ApportionScheme,
) -> Result<ApportionmentResult> {
    for (name, v) in [("rr_a", rr_a), ("rr_s", rr_s), ("rr_as", rr_as)] {
        if !(v.is_finite() && v >= 1.0) {
            return Err(Error::Domain(format!("{name} = {v} must be finite and >= 1")));
        }
    }
    let (ua, us) = (rr_a - 1.0, rr_s - 1.0);
    let (ui, total) = match scheme {
        ApportionScheme::ExcessUnits => {
            let ui = rr_as - 1.0;
            (ui, ua + us + ui)
        }
        ApportionScheme::SynergyPartition => {
            let additive = rr_a + rr_s - 1.0;
            if rr_as < additive {
                return Err(Error::NegativeInteraction { rr_as, additive });
            }
            (rr_as - rr_a - rr_s + 1.0, rr_as - 1.0)
        }
    };
    let frac = |v: f64| if total > 0.0 { (v / total).clamp(0.0, 1.0) } else { 0.0 };
    Ok(ApportionmentResult {
        scheme,
        units: [("a", ua), ("s", us), ("interaction", ui)].into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        total_units: total,
        involved_fraction: [("a", frac(ua + ui)), ("s", frac(us + ui))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    })
}

/// Share of a subgroup's cases attributable to exposure, `(rr-1)/rr`.
/// Numerically the same as the PDE applied within the subgroup.
pub fn assigned_share(rr_subgroup: f64) -> Result<f64> {
    if !(rr_subgroup >= 1.0) {
        return Err(Error::Domain(format!("subgroup RR {rr_subgroup} must be >= 1")));
    }
    pde(rr_subgroup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMode {
    MarketShare,
    WeightedTortfeasor,
    Equal,
}

/// Splits `damages` (in the smallest currency unit) in proportion to the
/// weights. Largest-remainder rounding makes the parts sum to `damages`;
/// ties in the remainder go to the label that sorts first.
pub fn allocate_liability(
    weights: &BTreeMap<String, f64>,
    damages: u64,
    mode: AllocationMode,
) -> Result<BTreeMap<String, u64>> {
    if weights.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let w: Vec<f64> = match mode {
        AllocationMode::Equal => vec![1.0; weights.len()],
        AllocationMode::MarketShare | AllocationMode::WeightedTortfeasor => {
            if weights.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::DegenerateWeights);
            }
            weights.values().copied().collect()
        }
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    let quotas: Vec<f64> = w.iter().map(|v| damages as f64 * (v / total)).collect();
    let mut amounts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let assigned: u64 = amounts.iter().sum();
    if assigned <= damages {
        let mut left = damages - assigned;
        // With float quotas the shortfall can exceed the party count, so cycle.
        while left > 0 {
            for &i in &order {
                if left == 0 {
                    break;
                }
                if w[i] > 0.0 {
                    amounts[i] += 1;
                    left -= 1;
                }
            }
        }
    } else {
        let mut excess = assigned - damages;
        while excess > 0 {
            for &i in order.iter().rev() {
                if excess == 0 {
                    break;
                }
                if amounts[i] > 0 {
                    amounts[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    Ok(weights.keys().cloned().zip(amounts).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxiCompany {
    pub label: String,
    pub fleet_size: u64,
    pub negligence_rate: f64,
    pub exposure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxiScenario {
    pub companies: Vec<TaxiCompany>,
}

impl TaxiScenario {
    pub fn new(companies: Vec<TaxiCompany>) -> Result<Self> {
        let mut violations = Vec::new();
        if companies.is_empty() {
            violations.push("companies: at least one company is required".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, c) in companies.iter().enumerate() {
            if !seen.insert(c.label.as_str()) {
                violations.push(format!("companies[{i}].label: duplicate label `{}`", c.label));
            }
            if c.fleet_size == 0 {
                violations.push(format!("companies[{i}].fleet_size: must be positive"));
            }
            for (field, v) in [("negligence_rate", c.negligence_rate), ("exposure_rate", c.exposure_rate)] {
                if !(v.is_finite() && v >= 0.0) {
                    violations.push(format!("companies[{i}].{field}: {v} must be finite and >= 0"));
                }
            }
        }
        if violations.is_empty() {
            Ok(Self { companies })
        } else {
            Err(Error::Validation { violations })
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let raw: TaxiScenario = parse_json_bytes(bytes)?;
        Self::new(raw.companies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxiPosterior {
    /// `(label, posterior)` in input order.
    pub posterior: Vec<(String, f64)>,
    /// Company whose posterior exceeds 0.5, if any.
    pub balance_verdict: Option<String>,
    /// Assumption (a): equal negligence rates.
    pub equal_negligence: bool,
    /// Assumption (b): equal exposure rates.
    pub equal_exposure: bool,
    pub warnings: Vec<String>,
}

/// Posterior over which company's taxi was involved, proportional to
/// `fleet * negligence_rate * exposure_rate`.
///
/// Each rate is divided by its largest value first. The posterior is
/// unchanged, and equal rates cancel exactly instead of leaving rounding
/// error (3 * 0.1 is not 0.3 in binary).
pub fn taxi_posterior(s: &TaxiScenario) -> Result<TaxiPosterior> {
    let max_of = |f: fn(&TaxiCompany) -> f64| s.companies.iter().map(f).fold(0.0, f64::max);
    let (max_neg, max_exp) = (max_of(|c| c.negligence_rate), max_of(|c| c.exposure_rate));
    if !(max_neg > 0.0 && max_exp > 0.0) {
        return Err(Error::AllZeroMass);
    }
    let masses: Vec<f64> = s
        .companies
        .iter()
        .map(|c| c.fleet_size as f64 * (c.negligence_rate / max_neg) * (c.exposure_rate / max_exp))
        .collect();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroMass);
    }
    let posterior: Vec<(String, f64)> =
        s.companies.iter().zip(&masses).map(|(c, m)| (c.label.clone(), m / total)).collect();
    let balance_verdict = posterior.iter().find(|(_, p)| *p > 0.5).map(|(l, _)| l.clone());
    let all_equal = |f: fn(&TaxiCompany) -> f64| s.companies.windows(2).all(|w| f(&w[0]) == f(&w[1]));
    let equal_negligence = all_equal(|c| c.negligence_rate);
    let equal_exposure = all_equal(|c| c.exposure_rate);
    let mut warnings = Vec::new();
    if equal_negligence && equal_exposure {
        warnings.push(BARE_STATISTICS_WARNING.to_string());
    }
    Ok(TaxiPosterior { posterior, balance_verdict, equal_negligence, equal_exposure, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rr(point: f64, lcl: f64, p: f64) -> EffectEstimate {
        EffectEstimate {
            kind: MeasureKind::RelativeRisk,
            point,
            lcl,
            ucl: point * 2.0,
            confidence_level: 0.95,
            p_value: p,
            corrected: false,
            se: 0.1,
        }
    }

    #[test]
    fn but_for_examples() {
        let cfg = LegalConfig::default();
        let r = but_for_verdict(&rr(5.0, 1.92, 1e-4), &cfg).unwrap();
        assert_eq!(r.verdict, ButForVerdict::Satisfied);
        assert_eq!(r.pde, 0.8);
        assert!(r.rule.contains("PDE 0.8000"));
        assert_eq!(but_for_verdict(&rr(2.0, 1.5, 1e-4), &cfg).unwrap().verdict, ButForVerdict::NotSatisfied);
        let lcl = LegalConfig { use_lcl: true, ..cfg };
        assert_eq!(but_for_verdict(&rr(5.0, 1.92, 1e-4), &lcl).unwrap().verdict, ButForVerdict::NotSatisfied);
    }

    #[test]
    fn material_examples() {
        let cfg = LegalConfig { material_fraction_floor: 0.05, ..Default::default() };
        let m = |e, f, c: &LegalConfig| material_contribution_verdict(&e, f, c).unwrap().verdict;
        assert_eq!(m(rr(1.6, 1.2, 0.001), 0.3, &cfg), MaterialVerdict::Material);
        assert_eq!(m(rr(1.6, 0.8, 0.2), 0.3, &cfg), MaterialVerdict::NotMaterial);
        assert_eq!(m(rr(1.6, 1.2, 0.001), 0.01, &cfg), MaterialVerdict::NotMaterial);
        let gap = LegalConfig { evidentiary_gap: true, ..cfg };
        assert_eq!(m(rr(1.3, 1.1, 0.01), 0.0, &gap), MaterialVerdict::MaterialRiskIncrease);
        assert!(material_contribution_verdict(&rr(1.3, 1.1, 0.01), 1.5, &cfg).is_err());
    }

    #[test]
    fn apportionment_examples() {
        let p = apportion_joint_exposures(6.0, 11.0, 51.0, ApportionScheme::ExcessUnits).unwrap();
        assert_eq!(p.units["a"], 5.0);
        assert_eq!(p.units["s"], 10.0);
        assert_eq!(p.units["interaction"], 50.0);
        assert_eq!(p.total_units, 65.0);
        assert_eq!(p.involved_fraction["a"], 55.0 / 65.0);
        assert_eq!(p.involved_fraction["s"], 60.0 / 65.0);

        let s = apportion_joint_exposures(6.0, 11.0, 51.0, ApportionScheme::SynergyPartition).unwrap();
        assert_eq!(s.units["interaction"], 35.0);
        assert_eq!(s.total_units, 50.0);
        let add = apportion_joint_exposures(2.0, 3.0, 4.0, ApportionScheme::SynergyPartition).unwrap();
        assert_eq!(add.units["interaction"], 0.0);
        assert!(matches!(
            apportion_joint_exposures(2.0, 3.0, 3.5, ApportionScheme::SynergyPartition),
            Err(Error::NegativeInteraction { .. })
        ));
        assert!(apportion_joint_exposures(0.5, 3.0, 4.0, ApportionScheme::ExcessUnits).is_err());
    }

    #[test]
    fn assigned_share_examples() {
        assert_eq!(assigned_share(5.0).unwrap(), 0.8);
        assert_eq!(assigned_share(1.0).unwrap(), 0.0);
        assert!((assigned_share(51.0).unwrap() - 50.0 / 51.0).abs() < 1e-15);
        assert!(assigned_share(0.9).is_err());
    }

    fn weights(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, w)| (k.to_string(), *w)).collect()
    }

    #[test]
    fn allocation_examples() {
        let shares = weights(&[("w", 0.4), ("x", 0.3), ("y", 0.2), ("z", 0.1)]);
        let a = allocate_liability(&shares, 100, AllocationMode::MarketShare).unwrap();
        assert_eq!(a.values().copied().collect::<Vec<_>>(), [40, 30, 20, 10]);
        let three = weights(&[("x", 5.0), ("y", 0.0), ("z", 1.0)]);
        let e = allocate_liability(&three, 99, AllocationMode::Equal).unwrap();
        assert_eq!(e.values().copied().collect::<Vec<_>>(), [33, 33, 33]);
        let years = weights(&[("x", 10.0), ("y", 5.0), ("z", 5.0)]);
        let w = allocate_liability(&years, 100, AllocationMode::WeightedTortfeasor).unwrap();
        assert_eq!(w.values().copied().collect::<Vec<_>>(), [50, 25, 25]);
        let thirds =
            allocate_liability(&weights(&[("x", 1.0), ("y", 1.0), ("z", 1.0)]), 100, AllocationMode::MarketShare)
                .unwrap();
        assert_eq!(thirds.values().copied().collect::<Vec<_>>(), [34, 33, 33]);
        assert_eq!(
            allocate_liability(&weights(&[("x", 0.0)]), 10, AllocationMode::MarketShare),
            Err(Error::DegenerateWeights)
        );
        assert_eq!(allocate_liability(&BTreeMap::new(), 10, AllocationMode::Equal), Err(Error::DegenerateWeights));
    }

    fn company(label: &str, fleet: u64, n: f64, e: f64) -> TaxiCompany {
        TaxiCompany { label: label.into(), fleet_size: fleet, negligence_rate: n, exposure_rate: e }
    }

    #[test]
    fn taxi_examples() {
        let s = TaxiScenario::new(vec![company("blue", 3, 1.0, 1.0), company("yellow", 1, 1.0, 1.0)]).unwrap();
        let p = taxi_posterior(&s).unwrap();
        assert_eq!(p.posterior[0].1, 0.75);
        assert_eq!(p.balance_verdict.as_deref(), Some("blue"));
        assert_eq!(p.warnings, [BARE_STATISTICS_WARNING]);

        let even = TaxiScenario::new(vec![company("blue", 1, 1.0, 1.0), company("yellow", 1, 1.0, 1.0)]).unwrap();
        assert_eq!(taxi_posterior(&even).unwrap().balance_verdict, None);

        let barred = TaxiScenario::new(vec![company("blue", 3, 0.0, 1.0), company("yellow", 1, 1.0, 1.0)]).unwrap();
        let p = taxi_posterior(&barred).unwrap();
        assert_eq!(p.posterior[1].1, 1.0);
        assert!(!p.equal_negligence && p.equal_exposure && p.warnings.is_empty());

        let none = TaxiScenario::new(vec![company("blue", 3, 0.0, 1.0)]).unwrap();
        assert_eq!(taxi_posterior(&none), Err(Error::AllZeroMass));
    }

    #[test]
    fn taxi_parsing() {
        let ok = br#"{"companies":[{"label":"blue","fleet_size":3,"negligence_rate":1,"exposure_rate":1}]}"#;
        assert_eq!(TaxiScenario::from_json(ok).unwrap().companies.len(), 1);
        let dup = br#"{"companies":[{"label":"b","fleet_size":3,"negligence_rate":1,"exposure_rate":1},
                                    {"label":"b","fleet_size":0,"negligence_rate":-1,"exposure_rate":1}]}"#;
        let Err(Error::Validation { violations }) = TaxiScenario::from_json(dup) else { panic!() };
        assert_eq!(violations.len(), 3);
        assert!(matches!(TaxiScenario::from_json(b"{\"companies\":[],\"x\":1}"), Err(Error::Schema { .. })));
    }
}
