//! Seeded synthetic populations and brute-force oracles.
//!
//! Random mode draws binomial counts from ChaCha8 seeded with the truth's
//! seed. Expected mode emits expected counts rounded half-to-even, so
//! closed-form examples can be checked without stochastic tolerance.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::confounding::ConfounderSpec;
use crate::effect::{forward_misclassify, Accuracy, MisclassificationSpec, RealTable};
use crate::study::{parse_json_bytes, CovariateProfile, Design, StratifiedStudy, Stratum, TwoByTwoTable};
use crate::synthesis::StudyEstimate;
use crate::{Error, Result};

pub const ENUMERATION_BOUND: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Random,
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CohortTruth {
    pub n_exposed: u64,
    pub n_unexposed: u64,
    pub baseline_risk: f64,
    pub true_rr: f64,
    pub seed: u64,
}

impl CohortTruth {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.n_exposed == 0 || self.n_unexposed == 0 {
            v.push("arm sizes must be positive".to_string());
        }
        if !(self.baseline_risk > 0.0 && self.baseline_risk < 1.0) {
            v.push(format!("baseline_risk {} is not in (0, 1)", self.baseline_risk));
        }
        if !(self.true_rr.is_finite() && self.true_rr > 0.0) {
            v.push(format!("true_rr {} must be > 0", self.true_rr));
        } else if self.baseline_risk * self.true_rr > 1.0 {
            v.push(format!("exposed risk {} exceeds 1", self.baseline_risk * self.true_rr));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation { violations: v })
        }
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("probability clamped to [0, 1]").sample(rng)
}

/// Random-mode cohort: exposed cases first, then unexposed cases.
pub fn simulate_cohort(t: &CohortTruth) -> Result<TwoByTwoTable> {
    t.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    Ok(cohort_draw(t, &mut rng))
}

fn cohort_draw(t: &CohortTruth, rng: &mut ChaCha8Rng) -> TwoByTwoTable {
    let a = binomial(rng, t.n_exposed, t.baseline_risk * t.true_rr);
    let c = binomial(rng, t.n_unexposed, t.baseline_risk);
    TwoByTwoTable::cohort(a, t.n_exposed - a, c, t.n_unexposed - c)
}

pub fn expected_cohort(t: &CohortTruth) -> Result<TwoByTwoTable> {
    t.validate()?;
    Ok(expected_cohort_cells(t).round_half_even())
}

fn expected_cohort_cells(t: &CohortTruth) -> RealTable {
    let (n1, n0) = (t.n_exposed as f64, t.n_unexposed as f64);
    let a = n1 * t.baseline_risk * t.true_rr;
    let c = n0 * t.baseline_risk;
    RealTable { a, b: n1 - a, c, d: n0 - c, design: Design::Cohort }
}

pub fn simulate_cohort_mode(t: &CohortTruth, mode: SimMode) -> Result<TwoByTwoTable> {
    match mode {
        SimMode::Random => simulate_cohort(t),
        SimMode::Expected => expected_cohort(t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfoundedTruth {
    pub cohort: CohortTruth,
    pub confounder: Option<ConfounderSpec>,
    /// Multiplier on `true_rr * rr_c` in the jointly exposed cell. Without it
    /// the joint excess is additive: `true_rr + rr_c - 1`.
    pub interaction_rr: Option<f64>,
    pub misclassification: Option<MisclassificationSpec>,
}

impl ConfoundedTruth {
    pub fn unconfounded(cohort: CohortTruth) -> Self {
        Self { cohort, confounder: None, interaction_rr: None, misclassification: None }
    }
}

/// A parsed truth file: the population and how to sample it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthFile {
    pub truth: ConfoundedTruth,
    pub mode: SimMode,
}

mod file {
    use super::*;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(super) struct TruthDto {
        pub n_exposed: u64,
        pub n_unexposed: u64,
        pub baseline_risk: f64,
        pub true_rr: f64,
        #[serde(default)]
        pub seed: u64,
        #[serde(default)]
        pub confounder: Option<ConfounderDto>,
        #[serde(default)]
        pub interaction_rr: Option<f64>,
        #[serde(default)]
        pub misclassification: Option<MisclassificationDto>,
        #[serde(default = "random")]
        pub mode: SimMode,
    }

    fn random() -> SimMode {
        SimMode::Random
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(super) struct ConfounderDto {
        pub rr: f64,
        pub prevalence_exposed: f64,
        pub prevalence_unexposed: f64,
    }

    #[derive(Deserialize, Clone, Copy)]
    #[serde(deny_unknown_fields)]
    pub(super) struct AccuracyDto {
        pub sensitivity: f64,
        pub specificity: f64,
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum MisclassificationDto {
        Nondifferential(AccuracyDto),
        Differential { cases: AccuracyDto, noncases: AccuracyDto },
    }
}

/// Parses and validates a truth file. Unknown keys are rejected.
pub fn parse_truth_file(bytes: &[u8]) -> Result<TruthFile> {
    let raw: file::TruthDto = parse_json_bytes(bytes)?;
    let accuracy = |a: file::AccuracyDto| Accuracy::new(a.sensitivity, a.specificity);
    let truth = ConfoundedTruth {
        cohort: CohortTruth {
            n_exposed: raw.n_exposed,
            n_unexposed: raw.n_unexposed,
            baseline_risk: raw.baseline_risk,
            true_rr: raw.true_rr,
            seed: raw.seed,
        },
        confounder: raw
            .confounder
            .map(|c| ConfounderSpec::new(c.rr, c.prevalence_exposed, c.prevalence_unexposed))
            .transpose()?,
        interaction_rr: raw.interaction_rr,
        misclassification: match raw.misclassification {
            None => None,
            Some(file::MisclassificationDto::Nondifferential(a)) => {
                Some(MisclassificationSpec::nondifferential(accuracy(a)?))
            }
            Some(file::MisclassificationDto::Differential { cases, noncases }) => {
                Some(MisclassificationSpec::differential(accuracy(cases)?, accuracy(noncases)?))
            }
        },
    };
    validate_confounded(&truth)?;
    risks(&truth)?;
    Ok(TruthFile { truth, mode: raw.mode })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundedSample {
    pub study: StratifiedStudy,
    pub crude: TwoByTwoTable,
}

pub const CONFOUNDER_KEY: &str = "confounder";

fn profile(level: &str) -> CovariateProfile {
    [(CONFOUNDER_KEY.to_string(), level.to_string())].into()
}

/// One confounder level: its share of each arm and the risk in each arm.
struct Cell {
    level: &'static str,
    n_exposed: f64,
    n_unexposed: f64,
    risk_exposed: f64,
    risk_unexposed: f64,
}

fn risks(t: &ConfoundedTruth) -> Result<Vec<Cell>> {
    let c = &t.cohort;
    let b0 = c.baseline_risk;
    let cell = |level, n_exposed, n_unexposed, risk_exposed, risk_unexposed| Cell {
        level,
        n_exposed,
        n_unexposed,
        risk_exposed,
        risk_unexposed,
    };
    let Some(conf) = t.confounder else {
        return Ok(vec![cell("absent", 1.0, 1.0, b0 * c.true_rr, b0)]);
    };
    let rr_c = conf.rr_confounder_outcome;
    let joint = match t.interaction_rr {
        Some(k) => c.true_rr * rr_c * k,
        None => c.true_rr + rr_c - 1.0,
    };
    let levels = vec![
        cell("present", conf.prevalence_exposed, conf.prevalence_unexposed, b0 * joint, b0 * rr_c),
        cell("absent", 1.0 - conf.prevalence_exposed, 1.0 - conf.prevalence_unexposed, b0 * c.true_rr, b0),
    ];
    for l in &levels {
        for (arm, r) in [("exposed", l.risk_exposed), ("unexposed", l.risk_unexposed)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::RiskOverflow { stratum: format!("{CONFOUNDER_KEY}={}, {arm}", l.level), risk: r });
            }
        }
    }
    Ok(levels)
}

fn validate_confounded(t: &ConfoundedTruth) -> Result<()> {
    t.cohort.validate()?;
    if let Some(k) = t.interaction_rr {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!("interaction_rr {k} must be > 0")));
        }
    }
    Ok(())
}

fn cells(t: &ConfoundedTruth) -> Result<Vec<Cell>> {
    validate_confounded(t)?;
    risks(t)
}

/// Unrounded expected tables per confounder level, after any
/// misclassification. The arithmetic oracle behind expected mode.
pub fn expected_confounded_cells(t: &ConfoundedTruth) -> Result<Vec<(String, RealTable)>> {
    let (n1, n0) = (t.cohort.n_exposed as f64, t.cohort.n_unexposed as f64);
    Ok(cells(t)?
        .into_iter()
        .map(|cell| {
            let (m1, m0) = (n1 * cell.n_exposed, n0 * cell.n_unexposed);
            let a = m1 * cell.risk_exposed;
            let c = m0 * cell.risk_unexposed;
            let mut table = RealTable { a, b: m1 - a, c, d: m0 - c, design: Design::Cohort };
            if let Some(spec) = &t.misclassification {
                table = forward_misclassify(&table, spec);
            }
            (format!("{CONFOUNDER_KEY}={}", cell.level), table)
        })
        .collect())
}

/// Confounder-stratified cohort plus its crude table (the stratum sum).
/// Without a confounder there is one stratum, equal to [`simulate_cohort`]
/// (or [`expected_cohort`]) when no misclassification is set.
pub fn simulate_confounded_cohort(t: &ConfoundedTruth, mode: SimMode) -> Result<ConfoundedSample> {
    let tables: Vec<(&'static str, TwoByTwoTable)> = match mode {
        SimMode::Expected => {
            let levels = cells(t)?;
            expected_confounded_cells(t)?
                .into_iter()
                .zip(levels)
                .map(|((_, real), cell)| (cell.level, real.round_half_even()))
                .collect()
        }
        SimMode::Random => {
            let levels = cells(t)?;
            let mut rng = ChaCha8Rng::seed_from_u64(t.cohort.seed);
            let mut out = Vec::with_capacity(levels.len());
            if t.confounder.is_none() {
                out.push(("absent", cohort_draw(&t.cohort, &mut rng)));
            } else {
                // Split the arms by confounder status, then draw cases.
                let (n1, n0) = (t.cohort.n_exposed, t.cohort.n_unexposed);
                let m1 = binomial(&mut rng, n1, levels[0].n_exposed);
                let m0 = binomial(&mut rng, n0, levels[0].n_unexposed);
                for (cell, (e, u)) in levels.iter().zip([(m1, m0), (n1 - m1, n0 - m0)]) {
                    let a = binomial(&mut rng, e, cell.risk_exposed);
                    let c = binomial(&mut rng, u, cell.risk_unexposed);
                    out.push((cell.level, TwoByTwoTable::cohort(a, e - a, c, u - c)));
                }
            }
            if let Some(spec) = &t.misclassification {
                for (_, table) in &mut out {
                    *table = misclassify_draw(table, spec, &mut rng);
                }
            }
            out
        }
    };
    let strata: Vec<Stratum> =
        tables.iter().map(|&(level, table)| Stratum { profile: profile(level), table }).collect();
    let crude = tables.iter().skip(1).fold(tables[0].1, |acc, (_, t)| acc.merged(t));
    Ok(ConfoundedSample { study: StratifiedStudy::new("simulated", strata)?, crude })
}

/// Each person's exposure is reported correctly with probability Se (truly
/// exposed) or Sp (truly unexposed).
fn misclassify_draw(t: &TwoByTwoTable, spec: &MisclassificationSpec, rng: &mut ChaCha8Rng) -> TwoByTwoTable {
    let mut row = |exposed: u64, unexposed: u64, se: f64, sp: f64| {
        let kept = binomial(rng, exposed, se);
        let flipped = binomial(rng, unexposed, 1.0 - sp);
        let seen = kept + flipped;
        (seen, exposed + unexposed - seen)
    };
    let (a, c) = row(t.a, t.c, spec.cases.sensitivity(), spec.cases.specificity());
    let (b, d) = row(t.b, t.d, spec.noncases.sensitivity(), spec.noncases.specificity());
    TwoByTwoTable::new(a, b, c, d, t.design)
}

/// `k` study log-RRs drawn from `N(mu, tau^2 + se_i^2)`, standard errors
/// cycling through `ses`.
pub fn simulate_random_effects(mu: f64, tau: f64, ses: &[f64], k: usize, seed: u64) -> Result<Vec<StudyEstimate>> {
    if ses.is_empty() || ses.iter().any(|s| !(s.is_finite() && *s > 0.0)) || !(tau >= 0.0) {
        return Err(Error::Domain("standard errors must be > 0 and tau >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (0..k)
        .map(|i| {
            let se = ses[i % ses.len()];
            let theta = mu + tau * std.sample(&mut rng);
            let y = theta + se * std.sample(&mut rng);
            StudyEstimate::new(format!("sim-{i}"), y, se)
        })
        .collect()
}

/// Two-sided Fisher p-value by full hypergeometric enumeration in exact
/// integer arithmetic. Tables as or less probable than the observed one
/// count toward the p-value.
pub fn exact_fisher_oracle(t: &TwoByTwoTable) -> Result<f64> {
    let n = t.total();
    if n > ENUMERATION_BOUND {
        return Err(Error::EnumerationBound(n));
    }
    let row1 = t.a + t.b;
    let col1 = t.a + t.c;
    let row0 = n - row1;
    let lo = col1.saturating_sub(row0);
    let hi = row1.min(col1);

    // weight(x) = C(row1, x) * C(row0, col1 - x), stepped by exact ratios.
    let mut w1 = binomial_big(row1, lo);
    let mut w0 = binomial_big(row0, col1 - lo);
    let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
    for x in lo..=hi {
        weights.push(&w1 * &w0);
        if x < hi {
            w1 = w1 * (row1 - x) / (x + 1);
            w0 = w0 * (col1 - x) / (row0 + x + 1 - col1);
        }
    }
    let observed = &weights[(t.a - lo) as usize];
    let total: BigUint = weights.iter().sum();
    let tail: BigUint = weights.iter().filter(|w| *w <= observed).sum();
    Ok(ratio(&tail, &total))
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `num / den` for `num <= den`, correctly scaled before conversion.
fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() - num.bits() + 128;
    let q = (num << shift) / den;
    let mut v = q.to_f64().expect("finite");
    let mut s = shift as i32;
    while s > 0 {
        let step = s.min(1000);
        v *= 2f64.powi(-step);
        s -= step;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effect::Accuracy;

    fn truth(seed: u64) -> CohortTruth {
        CohortTruth { n_exposed: 1000, n_unexposed: 1000, baseline_risk: 0.005, true_rr: 5.0, seed }
    }

    #[test]
    fn cohort_is_deterministic() {
        assert_eq!(simulate_cohort(&truth(7)).unwrap(), simulate_cohort(&truth(7)).unwrap());
        assert_ne!(simulate_cohort(&truth(7)).unwrap(), simulate_cohort(&truth(8)).unwrap());
    }

    #[test]
    fn expected_cohort_matches_worked_example() {
        assert_eq!(expected_cohort(&truth(0)).unwrap(), TwoByTwoTable::cohort(25, 975, 5, 995));
    }

    #[test]
    fn truth_is_validated() {
        let bad = CohortTruth { true_rr: 300.0, ..truth(0) };
        assert!(matches!(simulate_cohort(&bad), Err(Error::Validation { .. })));
    }

    #[test]
    fn no_confounder_degenerates_to_cohort() {
        for seed in 0..5 {
            let t = ConfoundedTruth::unconfounded(truth(seed));
            let s = simulate_confounded_cohort(&t, SimMode::Random).unwrap();
            assert_eq!(s.study.strata().len(), 1);
            assert_eq!(s.crude, simulate_cohort(&truth(seed)).unwrap());
        }
        let e = simulate_confounded_cohort(&ConfoundedTruth::unconfounded(truth(0)), SimMode::Expected).unwrap();
        assert_eq!(e.crude, expected_cohort(&truth(0)).unwrap());
    }

    #[test]
    fn confounded_expected_crude_rr_is_bias_factor() {
        let t = ConfoundedTruth {
            cohort: CohortTruth {
                n_exposed: 100_000,
                n_unexposed: 100_000,
                baseline_risk: 0.01,
                true_rr: 1.0,
                seed: 0,
            },
            confounder: Some(ConfounderSpec::new(2.0, 0.5, 0.25).unwrap()),
            interaction_rr: None,
            misclassification: None,
        };
        let s = simulate_confounded_cohort(&t, SimMode::Expected).unwrap();
        assert_eq!(s.crude, TwoByTwoTable::cohort(1500, 98_500, 1250, 98_750));
    }

    #[test]
    fn risk_overflow() {
        let t = ConfoundedTruth {
            cohort: CohortTruth { baseline_risk: 0.2, true_rr: 3.0, ..truth(0) },
            confounder: Some(ConfounderSpec::new(4.0, 0.5, 0.5).unwrap()),
            interaction_rr: None,
            misclassification: None,
        };
        let Err(Error::RiskOverflow { stratum, risk }) = simulate_confounded_cohort(&t, SimMode::Random) else {
            panic!()
        };
        assert_eq!(stratum, "confounder=present, exposed");
        assert!((risk - 1.2).abs() < 1e-12);
    }

    #[test]
    fn misclassification_changes_random_draws_reproducibly() {
        let acc = Accuracy::new(0.9, 0.95).unwrap();
        let t = ConfoundedTruth {
            misclassification: Some(MisclassificationSpec::nondifferential(acc)),
            ..ConfoundedTruth::unconfounded(truth(3))
        };
        let a = simulate_confounded_cohort(&t, SimMode::Random).unwrap();
        let b = simulate_confounded_cohort(&t, SimMode::Random).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.crude.cases(), simulate_cohort(&truth(3)).unwrap().cases());
    }

    #[test]
    fn truth_files() {
        let f = parse_truth_file(
            br#"{"n_exposed":1000,"n_unexposed":1000,"baseline_risk":0.005,"true_rr":5,"mode":"expected"}"#,
        )
        .unwrap();
        assert_eq!(f.mode, SimMode::Expected);
        assert_eq!(simulate_confounded_cohort(&f.truth, f.mode).unwrap().crude, TwoByTwoTable::cohort(25, 975, 5, 995));
        let misc = br#"{"n_exposed":10,"n_unexposed":10,"baseline_risk":0.1,"true_rr":2,
            "confounder":{"rr":2,"prevalence_exposed":0.5,"prevalence_unexposed":0.2},
            "misclassification":{"cases":{"sensitivity":0.9,"specificity":0.9},"noncases":{"sensitivity":0.8,"specificity":0.9}}}"#;
        let f = parse_truth_file(misc).unwrap();
        assert!(f.truth.misclassification.unwrap().is_differential());
        assert_eq!(f.mode, SimMode::Random);
        assert!(matches!(
            parse_truth_file(br#"{"n_exposed":10,"n_unexposed":10,"baseline_risk":0.1,"true_rr":2,"misclassification":{"sensitivity":0.3,"specificity":0.3}}"#),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse_truth_file(br#"{"n_exposed":10,"n_unexposed":10,"baseline_risk":0.5,"true_rr":2,"confounder":{"rr":3,"prevalence_exposed":0.5,"prevalence_unexposed":0.2}}"#),
            Err(Error::RiskOverflow { .. })
        ));
        assert!(matches!(parse_truth_file(br#"{"n_exposed":10}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn fisher_oracle_examples() {
        let p = exact_fisher_oracle(&TwoByTwoTable::cohort(3, 1, 1, 3)).unwrap();
        assert!((p - 34.0 / 70.0).abs() < 1e-15);
        assert_eq!(exact_fisher_oracle(&TwoByTwoTable::cohort(0, 7, 0, 7)).unwrap(), 1.0);
        // Only the two extreme tables are as unlikely: 2 / C(20, 10).
        let p = exact_fisher_oracle(&TwoByTwoTable::cohort(10, 0, 0, 10)).unwrap();
        assert!((p - 2.0 / 184_756.0).abs() < 1e-20);
        assert_eq!(exact_fisher_oracle(&TwoByTwoTable::cohort(5000, 5000, 1, 0)), Err(Error::EnumerationBound(10_001)));
    }

    #[test]
    fn fisher_oracle_handles_the_bound() {
        let p = exact_fisher_oracle(&TwoByTwoTable::cohort(2600, 2400, 2400, 2600)).unwrap();
        assert!(p > 0.0 && p < 1e-3);
    }
}
