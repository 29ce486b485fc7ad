use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "causal", version, about = "Evaluate causal evidence from 2x2 study data and report on it")]
pub struct Cli {
    /// Output rendering.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub format: Format,

    /// Worker threads for Monte Carlo work. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    /// Units rr_a-1, rr_s-1 and rr_as-1.
    #[value(alias = "excess-units")]
    Paper,
    /// Main effects plus the additive interaction rr_as-rr_a-rr_s+1.
    Synergy,
}

#[derive(Debug, Args)]
pub struct StudyInput {
    /// Study file (JSON).
    pub file: PathBuf,
    /// Engine configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effect measures, association tests and confounding checks per study.
    Measure(StudyInput),
    /// Fixed- and random-effects meta-analysis with a consistency verdict.
    Meta(StudyInput),
    /// Dose-response trend test and power-model fit.
    Dose(StudyInput),
    /// The ten-test causality checklist.
    Checklist(StudyInput),
    /// Checklist plus general causation, but-for and material contribution.
    Legal(StudyInput),
    /// Split joint-exposure excess risk between two exposures.
    Apportion {
        /// RR for exposure a alone.
        #[arg(long, allow_negative_numbers = true)]
        rr_a: f64,
        /// RR for exposure s alone.
        #[arg(long, allow_negative_numbers = true)]
        rr_s: f64,
        /// RR for both exposures together.
        #[arg(long, allow_negative_numbers = true)]
        rr_as: f64,
        #[arg(long, value_enum)]
        scheme: Scheme,
    },
    /// Posterior over which company's taxi was involved.
    Taxi {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Monte Carlo sensitivity of the primary RR to an unmeasured confounder.
    Sensitivity {
        #[command(flatten)]
        input: StudyInput,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        draws: u64,
        /// RR the adjusted estimate is compared against.
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
    },
    /// Generate a study from a truth file.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        /// Overrides the seed in the truth file.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the generated study file here.
        #[arg(long)]
        study_out: Option<PathBuf>,
    },
}
