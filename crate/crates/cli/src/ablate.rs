use clap::Args;
use rayon::prelude::*;

use catstream_core::scoring::{auroc, labeled_scores, score_stream, Level, ScoreOptions};
use catstream_core::training::train_stream;
use catstream_core::{Error, EvalError, Instance, ModelDims, TrainConfig};

use crate::io::{load_dataset, write_file};
use crate::run_config::parse_list;
use crate::{assemble, CliError, Common, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoNoise,
    NoRelrep,
    NoBlockloss,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoNoise, Variant::NoRelrep, Variant::NoBlockloss];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoNoise => "no_noise",
            Variant::NoRelrep => "no_relrep",
            Variant::NoBlockloss => "no_blockloss",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantScore {
    pub variant: Variant,
    pub seed: u64,
    pub instance_auroc: f64,
    /// NaN when every block carries the same label.
    pub block_auroc: f64,
}

fn level_auroc(records: &[catstream_core::scoring::ScoreRecord], level: Level) -> Result<f64, Error> {
    match auroc(&labeled_scores(records, level)) {
        Ok(a) => Ok(a),
        Err(EvalError::SingleClass { .. }) if level == Level::Block => Ok(f64::NAN),
        Err(e) => Err(e.into()),
    }
}

/// Trains the full model and the two retrained ablations with `base.seed`,
/// scores each on `test`, and rescores the full model without the block
/// loss. Rows come back in [`Variant::ALL`] order.
pub fn run_variants(train: &[Instance], test: &[Instance], dims: ModelDims, base: &TrainConfig) -> Result<Vec<VariantScore>, Error> {
    let trained = [
        (Variant::Full, base.clone()),
        (Variant::NoNoise, TrainConfig { no_noise: true, ..base.clone() }),
        (Variant::NoRelrep, TrainConfig { no_relrep: true, ..base.clone() }),
    ];
    let mut rows: Vec<VariantScore> = trained
        .par_iter()
        .map(|(variant, cfg)| -> Result<Vec<VariantScore>, Error> {
            let t = train_stream(train, cfg, dims)?;
            let score = |opts: ScoreOptions, variant| -> Result<VariantScore, Error> {
                let r = score_stream(&t.model, test, cfg.block_size, &t.memory, &opts)?;
                Ok(VariantScore {
                    variant,
                    seed: cfg.seed,
                    instance_auroc: level_auroc(&r, Level::Instance)?,
                    block_auroc: level_auroc(&r, Level::Block)?,
                })
            };
            let opts = ScoreOptions::from_config(cfg);
            let mut out = vec![score(opts, *variant)?];
            if *variant == Variant::Full {
                out.push(score(ScoreOptions { no_blockloss: true, ..opts }, Variant::NoBlockloss)?);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|r| Variant::ALL.iter().position(|v| *v == r.variant));
    Ok(rows)
}

/// Median of the finite values, NaN if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Per variant: median AUROCs and the median paired change against the full
/// model of the same seed (negative means the ablation hurts).
pub fn summarize(rows: &[VariantScore]) -> Vec<(Variant, [f64; 4])> {
    let full = |seed| rows.iter().find(|r| r.seed == seed && r.variant == Variant::Full);
    Variant::ALL
        .iter()
        .map(|&v| {
            let mine: Vec<&VariantScore> = rows.iter().filter(|r| r.variant == v).collect();
            let delta = |f: fn(&VariantScore) -> f64| {
                median(mine.iter().filter_map(|r| full(r.seed).map(|b| f(r) - f(b))))
            };
            (
                v,
                [
                    median(mine.iter().map(|r| r.instance_auroc)),
                    median(mine.iter().map(|r| r.block_auroc)),
                    delta(|r| r.instance_auroc),
                    delta(|r| r.block_auroc),
                ],
            )
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training dataset file.
    #[arg(long)]
    pub train: Option<String>,
    /// Test dataset file.
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long)]
    pub manifest: Option<String>,
    /// Comma-separated model seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

const OPTIONS: &[(&str, Option<&str>)] = &[
    ("train", None),
    ("test", None),
    ("manifest", None),
    ("seeds", Some("0,1,2,3,4")),
    ("out", None),
];

pub fn run(a: AblateArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flags.extend(a.train.map(|v| ("train", v)));
    flags.extend(a.test.map(|v| ("test", v)));
    flags.extend(a.manifest.map(|v| ("manifest", v)));
    flags.extend(a.seeds.map(|v| ("seeds", v)));
    let cfg = assemble(RunConfig::new("ablate", OPTIONS, Some(TrainConfig::default())), &a.common, flags)?;
    let out = cfg.path("out")?;
    let seeds: Vec<u64> = parse_list("seeds", cfg.require("seeds")?)?;
    let (train, dims) = load_dataset(&cfg.path("train")?, cfg.get("manifest"))?;
    let (test, test_dims) = load_dataset(&cfg.path("test")?, cfg.get("manifest"))?;
    if test_dims != dims {
        return Err(catstream_core::data::DataError::Config("train and test shapes differ".into()).into());
    }
    let per_seed = seeds
        .par_iter()
        .map(|&seed| run_variants(&train, &test, dims, &TrainConfig { seed, ..cfg.model().clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<VariantScore> = per_seed.into_iter().flatten().collect();

    let mut detail = String::from("variant,seed,instance_auroc,block_auroc\n");
    for r in &rows {
        detail.push_str(&format!("{},{},{},{}\n", r.variant.as_str(), r.seed, r.instance_auroc, r.block_auroc));
    }
    let mut summary = String::from("variant,instance_auroc,block_auroc,instance_delta,block_delta\n");
    for (v, [i, b, di, db]) in summarize(&rows) {
        summary.push_str(&format!("{},{i},{b},{di},{db}\n", v.as_str()));
    }
    cfg.echo(&out)?;
    write_file(&out.join("ablation.csv"), &detail)?;
    write_file(&out.join("ablation_summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}
