//! One function per subcommand. Each reads its inputs, runs the engine and
//! fills in a [`Report`]; rendering happens in the caller.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use causal_core::checklist::{primary_analysis, run_checklist, ChecklistReport};
use causal_core::confounding::{
    bias_adjust, cornfield_requirements, detect_simpson, mantel_haenszel_pool, mc_sensitivity, SensitivityRange,
};
use causal_core::effect::{
    association_test, excess_risk, misclassification_adjust, natural_ratio, pde, PDE_ACCELERATION_CAVEAT,
};
use causal_core::legal::{
    apportion_joint_exposures, but_for_verdict, general_causation, material_contribution_verdict, taxi_posterior,
    ApportionScheme, TaxiScenario, FORESEEABILITY_NOTE,
};
use causal_core::sim::{parse_truth_file, simulate_confounded_cohort};
use causal_core::study::{
    parse_study_file, select_relevant_stratum, EvidenceBundle, StratifiedStudy, Stratum, TwoByTwoTable,
};
use causal_core::synthesis::{consistency_verdict, dose_trend, fit_doll_peto, ConsistencyConfig};
use causal_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Scheme, StudyInput};
use crate::config::{parse_config, EngineConfig};
use crate::report::{digest, Report};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path)
        .map_err(|e| Error::Schema { path: path.display().to_string(), message: format!("cannot read file: {e}") })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("engine types serialize")
}

struct Loaded {
    bytes: Vec<u8>,
    bundle: EvidenceBundle,
    cfg: EngineConfig,
}

fn load(input: &StudyInput) -> Result<Loaded> {
    let bytes = read(&input.file)?;
    let bundle = parse_study_file(&bytes)?;
    let cfg = match &input.config {
        Some(p) => parse_config(&read(p)?)?,
        None => EngineConfig::default(),
    };
    Ok(Loaded { bytes, bundle, cfg })
}

fn study_report(command: &str, l: &Loaded) -> Report {
    let mut r = Report::new(command, &l.bytes, to_value(&l.cfg));
    for (locator, table) in l.bundle.tables() {
        for w in table.validate().warnings {
            r.warn(format!("{locator}: {w}"));
        }
    }
    r
}

fn table_value(t: &TwoByTwoTable) -> Value {
    to_value(t)
}

/// Everything computed from one table on its own.
fn stratum_value(s: &Stratum, confidence_level: f64, r: &mut Report) -> Value {
    let t = &s.table;
    let ratio = natural_ratio(t, confidence_level);
    let pde_value = ratio.as_ref().ok().map(|e| pde(e.point));
    if let Some(Ok(_)) = pde_value {
        r.warn(PDE_ACCELERATION_CAVEAT);
    }
    json!({
        "profile": s.profile,
        "table": table_value(t),
        "ratio": outcome(ratio),
        "excess_risk": outcome(excess_risk(t, confidence_level)),
        "pde": match pde_value {
            Some(Ok(p)) => json!({"value": p, "rule": "(RR - 1) / RR on the point estimate"}),
            Some(Err(e)) => json!({"error": e.to_string()}),
            None => Value::Null,
        },
        "association": outcome(association_test(t)),
    })
}

/// An engine result, or its error message when that one value is undefined.
fn outcome<T: Serialize>(r: Result<T>) -> Value {
    match r {
        Ok(v) => to_value(&v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn study_value(s: &StratifiedStudy, l: &Loaded, r: &mut Report) -> Value {
    let cl = l.cfg.checklist.confidence_level;
    let mut v = json!({
        "id": s.id,
        "metadata": s.metadata,
        "strata": s.strata().iter().map(|st| stratum_value(st, cl, r)).collect::<Vec<_>>(),
    });
    if s.strata().len() > 1 {
        v["crude"] = json!({
            "table": table_value(&s.crude_table()),
            "ratio": outcome(natural_ratio(&s.crude_table(), cl)),
        });
        v["mantel_haenszel"] = outcome(mantel_haenszel_pool(s, cl));
        let simpson = detect_simpson(s, cl);
        if let Ok(rep) = &simpson {
            if rep.reversal {
                r.warn(format!(
                    "{}: Simpson reversal, crude and stratum-specific associations point in opposite directions",
                    s.id
                ));
            }
        }
        v["simpson"] = outcome(simpson);
    }
    if let Some(spec) = &l.bundle.misclassification {
        v["misclassification_adjusted"] = outcome(misclassification_adjust(&s.crude_table(), spec));
    }
    v
}

pub fn measure(input: &StudyInput) -> Result<Report> {
    let l = load(input)?;
    let mut r = study_report("measure", &l);
    let cl = l.cfg.checklist.confidence_level;

    let studies: Vec<Value> = l.bundle.studies.iter().map(|s| study_value(s, &l, &mut r)).collect();
    let mut effect = json!({ "studies": studies });
    if let Some(profile) = &l.bundle.relevant_profile {
        let relevant: Vec<Value> = l
            .bundle
            .studies
            .iter()
            .map(|s| {
                let picked = select_relevant_stratum(s, profile).and_then(|t| {
                    let e = natural_ratio(t, cl)?;
                    Ok(json!({"table": table_value(t), "ratio": e, "pde": outcome(pde(e.point))}))
                });
                json!({"study": s.id, "relevant_stratum": outcome(picked)})
            })
            .collect();
        effect["relevant_profile"] =
            json!({"profile": profile, "rule": "exact profile match only", "per_study": relevant});
    }
    r.effect = Some(effect);

    let primary = primary_analysis(&l.bundle, cl)?;
    let rr = primary.estimate.point;
    let confounders: Vec<Value> = l
        .bundle
        .confounders
        .iter()
        .map(|c| {
            let met = cornfield_requirements(rr).map(|req| req.met_by(&c.spec));
            json!({
                "label": c.label,
                "spec": c.spec,
                "bias_adjustment": outcome(bias_adjust(rr, &c.spec)),
                "meets_cornfield": outcome(met),
            })
        })
        .collect();
    r.confounding = Some(json!({
        "primary": primary,
        "cornfield_requirements": outcome(cornfield_requirements(rr)),
        "rule": "adjusted RR = observed RR / bias factor; a confounder can explain the association only if it meets both Cornfield requirements",
        "confounders": confounders,
    }));
    Ok(r)
}

pub fn meta(input: &StudyInput) -> Result<Report> {
    let l = load(input)?;
    let mut r = study_report("meta", &l);
    let cc = ConsistencyConfig {
        heterogeneity_alpha: l.cfg.checklist.heterogeneity_alpha,
        confidence_level: l.cfg.checklist.confidence_level,
    };
    let primary = primary_analysis(&l.bundle, cc.confidence_level)?;
    let evidence = consistency_verdict(&primary.study_estimates, &cc)?;
    r.synthesis = Some(json!({
        "study_estimates": primary.study_estimates,
        "rule": "per-study Mantel-Haenszel log ratio and SE; fixed = inverse variance, random = DerSimonian-Laird",
        "heterogeneity_alpha": cc.heterogeneity_alpha,
        "consistency": evidence,
    }));
    Ok(r)
}

pub fn dose(input: &StudyInput) -> Result<Report> {
    let l = load(input)?;
    if l.bundle.dose_series.is_empty() {
        return Err(Error::Validation { violations: vec!["dose_series: the study file has no dose series".into()] });
    }
    let mut r = study_report("dose", &l);
    let series: Vec<Value> = l
        .bundle
        .dose_series
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "units": s.units,
                "trend": outcome(dose_trend(s)),
                "trend_rule": "Cochran-Armitage, referent score 0, one-sided against an increasing trend",
                "fit": outcome(fit_doll_peto(s)),
                "fit_rule": "weighted least squares of log RR on log(1 + dose) through the origin",
            })
        })
        .collect();
    r.synthesis = Some(json!({ "dose_series": series }));
    Ok(r)
}

fn checklist_section(l: &Loaded, r: &mut Report) -> Result<ChecklistReport> {
    let report = run_checklist(&l.bundle, &l.cfg.checklist)?;
    r.effect = Some(json!({ "primary": report.primary }));
    r.checklist = Some(to_value(&report));
    Ok(report)
}

pub fn checklist(input: &StudyInput) -> Result<Report> {
    let l = load(input)?;
    let mut r = study_report("checklist", &l);
    checklist_section(&l, &mut r)?;
    Ok(r)
}

pub fn legal(input: &StudyInput) -> Result<Report> {
    let l = load(input)?;
    let mut r = study_report("legal", &l);
    let report = checklist_section(&l, &mut r)?;
    let estimate = report.primary.estimate;
    let general = general_causation(&report, &estimate, &l.cfg.legal);
    let but_for = but_for_verdict(&estimate, &l.cfg.legal)?;
    for n in &but_for.notes {
        r.warn(n.clone());
    }
    let fraction = pde(estimate.point)?.clamp(0.0, 1.0);
    let material = material_contribution_verdict(&estimate, fraction, &l.cfg.legal)?;
    r.warn(FORESEEABILITY_NOTE);
    r.legal = Some(json!({
        "general_causation": general,
        "but_for": but_for,
        "material_contribution": material,
        "material_fraction": {"value": fraction, "rule": "PDE of the primary estimate, clamped to [0, 1]"},
    }));
    Ok(r)
}

/// Exact fraction text for integral unit counts, else the decimal.
fn fraction_text(num: f64, den: f64) -> String {
    if num.fract() == 0.0 && den.fract() == 0.0 && den > 0.0 {
        format!("{num}/{den}")
    } else if den > 0.0 {
        format!("{}", num / den)
    } else {
        "undefined".into()
    }
}

pub fn apportion(rr_a: f64, rr_s: f64, rr_as: f64, scheme: Scheme) -> Result<Report> {
    let scheme = match scheme {
        Scheme::Paper => ApportionScheme::ExcessUnits,
        Scheme::Synergy => ApportionScheme::SynergyPartition,
    };
    let canonical = format!("apportion rr_a={rr_a} rr_s={rr_s} rr_as={rr_as} scheme={scheme:?}");
    let mut r = Report::new("apportion", canonical.as_bytes(), json!({"scheme": scheme}));
    let res = apportion_joint_exposures(rr_a, rr_s, rr_as, scheme)?;
    let u = |k: &str| res.units[k];
    let total = res.total_units;
    let fractions: BTreeMap<&str, String> = [
        ("a", fraction_text(u("a") + u("interaction"), total)),
        ("s", fraction_text(u("s") + u("interaction"), total)),
    ]
    .into();
    let rule = match scheme {
        ApportionScheme::ExcessUnits => "units rr_a-1, rr_s-1, rr_as-1; total is their sum",
        ApportionScheme::SynergyPartition => "units rr_a-1, rr_s-1, rr_as-rr_a-rr_s+1; total is rr_as-1",
    };
    r.legal = Some(json!({
        "apportionment": res,
        "involved_fraction_text": fractions,
        "rule": rule,
        "inputs": {"rr_a": rr_a, "rr_s": rr_s, "rr_as": rr_as},
    }));
    Ok(r)
}

pub fn taxi(spec: &Path) -> Result<Report> {
    let bytes = read(spec)?;
    let scenario = TaxiScenario::from_json(&bytes)?;
    let mut r = Report::new("taxi", &bytes, json!({}));
    let post = taxi_posterior(&scenario)?;
    for w in &post.warnings {
        r.warn(w.clone());
    }
    r.legal = Some(json!({
        "taxi": post,
        "scenario": scenario,
        "rule": "posterior proportional to fleet_size * negligence_rate * exposure_rate; balance verdict needs posterior > 0.5",
    }));
    Ok(r)
}

pub fn sensitivity(input: &StudyInput, seed: u64, draws: u64, threshold: f64) -> Result<Report> {
    let l = load(input)?;
    let priors = l.bundle.sensitivity.ok_or_else(|| Error::Validation {
        violations: vec!["sensitivity: the study file declares no sensitivity priors".into()],
    })?;
    let mut cfg = to_value(&l.cfg);
    cfg["sensitivity"] = json!({"seed": seed, "draws": draws, "threshold": threshold});
    let mut r = study_report("sensitivity", &l);
    r.config = cfg;
    let primary = primary_analysis(&l.bundle, l.cfg.checklist.confidence_level)?;
    let range = SensitivityRange {
        rr_confounder: priors.rr_confounder,
        prevalence_exposed: priors.prevalence_exposed,
        prevalence_unexposed: priors.prevalence_unexposed,
        draws,
        seed,
    };
    let summary = mc_sensitivity(primary.estimate.point, &range, threshold)?;
    r.confounding = Some(json!({
        "primary_source": primary.source,
        "priors": range,
        "sensitivity": summary,
        "rule": "uniform independent draws per parameter; ChaCha8 stream per draw index; adjusted RR = observed / bias factor",
    }));
    Ok(r)
}

pub fn simulate(truth: &Path, seed: Option<u64>, study_out: Option<&Path>) -> Result<Report> {
    let bytes = read(truth)?;
    let mut tf = parse_truth_file(&bytes)?;
    if let Some(s) = seed {
        tf.truth.cohort.seed = s;
    }
    let mut r = Report::new("simulate", &bytes, json!({"mode": tf.mode, "seed": tf.truth.cohort.seed}));
    let sample = simulate_confounded_cohort(&tf.truth, tf.mode)?;

    // A stratum with an empty arm cannot go into a study file.
    let kept: Vec<Stratum> = sample
        .study
        .strata()
        .iter()
        .filter(|s| {
            let empty = s.table.exposed_total() == 0 || s.table.unexposed_total() == 0;
            if empty {
                r.warn(format!("simulated stratum {:?} has an empty arm and was dropped", s.profile));
            }
            !empty
        })
        .cloned()
        .collect();
    let study = if kept.is_empty() {
        r.warn("no simulated stratum has both arms; the study file holds the crude table only");
        StratifiedStudy::crude("simulated", sample.crude)
    } else {
        StratifiedStudy::new("simulated", kept)?
    };
    let bundle = EvidenceBundle { studies: vec![study], ..Default::default() };
    let study_json = bundle.to_json();
    for (locator, table) in bundle.tables() {
        for w in table.validate().warnings {
            r.warn(format!("{locator}: {w}"));
        }
    }
    if let Some(p) = study_out {
        fs::write(p, format!("{study_json}\n"))
            .map_err(|e| Error::Schema { path: p.display().to_string(), message: format!("cannot write file: {e}") })?;
    }
    r.simulation = Some(json!({
        "truth": tf.truth,
        "mode": tf.mode,
        "crude": table_value(&sample.crude),
        "crude_ratio": outcome(natural_ratio(&sample.crude, 0.95)),
        "study_file": serde_json::from_str::<Value>(&study_json).expect("study file is JSON"),
        "study_file_digest": digest(study_json.as_bytes()),
    }));
    Ok(r)
}
