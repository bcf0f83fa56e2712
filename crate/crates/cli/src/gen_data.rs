use std::path::Path;

use clap::Args;

use catstream_core::config::ConfigError;
use catstream_core::data::{
    format_dataset, generate_synthetic, inject_mixed, split_sequential, AnomalyMode, DatasetManifest,
    SyntheticParams, SYNTHETIC_DIMENSION,
};

use crate::io::write_file;
use crate::run_config::parse_list;
use crate::{assemble, CliError, Common, RunConfig};

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Generator recipe. Only `synthetic` exists.
    pub recipe: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of repetitions of the zigzag period.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Instances per period.
    #[arg(long)]
    pub period: Option<usize>,
    /// Share of id slots jolted by +-1.
    #[arg(long)]
    pub noise_frac: Option<f64>,
    /// Leading instances kept for training; defaults to 9/11 of the total.
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Test positions replaced by anomalies; defaults to half the test set.
    #[arg(long)]
    pub anomalies: Option<usize>,
    /// Comma-separated anomaly modes, drawn uniformly per replaced position.
    #[arg(long)]
    pub modes: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

const OPTIONS: &[(&str, Option<&str>)] = &[
    ("recipe", Some("synthetic")),
    ("seed", Some("0")),
    ("periods", Some("220")),
    ("period", Some("50")),
    ("noise_frac", Some("0.1")),
    ("train_count", None),
    ("anomalies", None),
    ("modes", Some("random_ids,copy_train")),
    ("out", None),
];

pub fn run(a: GenDataArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flags.extend(a.recipe.map(|v| ("recipe", v)));
    flags.extend(a.seed.map(|v| ("seed", v.to_string())));
    flags.extend(a.periods.map(|v| ("periods", v.to_string())));
    flags.extend(a.period.map(|v| ("period", v.to_string())));
    flags.extend(a.noise_frac.map(|v| ("noise_frac", v.to_string())));
    flags.extend(a.train_count.map(|v| ("train_count", v.to_string())));
    flags.extend(a.anomalies.map(|v| ("anomalies", v.to_string())));
    flags.extend(a.modes.map(|v| ("modes", v)));
    let cfg = assemble(RunConfig::new("gen-data", OPTIONS, None), &a.common, flags)?;

    let recipe = cfg.require("recipe")?;
    if recipe != "synthetic" {
        return Err(ConfigError::BadValue {
            key: "recipe".into(),
            value: recipe.into(),
            reason: "only `synthetic` is available".into(),
        }
        .into());
    }
    let seed: u64 = cfg.parsed("seed")?.unwrap_or(0);
    let params = SyntheticParams {
        n_periods: cfg.parsed("periods")?.unwrap_or(220),
        period: cfg.parsed("period")?.unwrap_or(50),
        noise_frac: cfg.parsed("noise_frac")?.unwrap_or(0.1),
    };
    if params.period == 0 || !(0.0..=1.0).contains(&params.noise_frac) {
        return Err(ConfigError::Invalid("period must be positive and noise_frac within [0, 1]".into()).into());
    }
    let modes: Vec<AnomalyMode> = parse_list("modes", cfg.require("modes")?)?;
    let out = cfg.path("out")?;

    let all = generate_synthetic(&params, seed);
    let train_count = cfg.parsed("train_count")?.unwrap_or(all.len() * 9 / 11);
    let (train, test) = split_sequential(&all, train_count)?;
    let anomalies = cfg.parsed("anomalies")?.unwrap_or(test.len() / 2);
    let test = inject_mixed(&test, &train, &modes, anomalies, SYNTHETIC_DIMENSION, seed)?;

    let mut combined = train.clone();
    combined.extend(test.iter().cloned());
    let mut manifest = DatasetManifest::from_instances("synthetic", Some(seed), SYNTHETIC_DIMENSION, 3, &combined);
    manifest.train_count = Some(train.len());
    manifest.test_count = Some(test.len());
    for (k, v) in [
        ("periods", params.n_periods.to_string()),
        ("period", params.period.to_string()),
        ("noise_frac", params.noise_frac.to_string()),
        ("anomalies", anomalies.to_string()),
        ("modes", cfg.require("modes")?.to_string()),
    ] {
        manifest.params.insert(k.into(), v);
    }

    write_outputs(&out, &format_dataset(&train), &format_dataset(&test), &manifest)?;
    cfg.echo(&out)?;
    println!(
        "generated {} instances: train {} / test {} ({} normal, {} anomalous overall)",
        all.len(),
        train.len(),
        test.len(),
        manifest.normal_count,
        manifest.anomalous_count
    );
    Ok(())
}

fn write_outputs(out: &Path, train: &str, test: &str, manifest: &DatasetManifest) -> Result<(), CliError> {
    write_file(&out.join("train.csv"), train)?;
    write_file(&out.join("test.csv"), test)?;
    write_file(&out.join("manifest.txt"), &manifest.to_text())
}
