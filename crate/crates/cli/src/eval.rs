use clap::Args;

use catstream_core::scoring::{evaluate, labeled_scores, parse_scores, Level};
use catstream_core::EvalError;

use crate::io::{read_file, write_file};
use crate::{assemble, CliError, Common, RunConfig};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score file written by `score`.
    #[arg(long)]
    pub scores: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

const OPTIONS: &[(&str, Option<&str>)] = &[("scores", None), ("out", None)];

/// Report text for both levels. A level whose labels are all one class gets
/// an `error` line; it is an error only when no level can be evaluated.
pub fn report(text: &str) -> Result<String, EvalError> {
    let records = parse_scores(text)?;
    let mut out = String::new();
    let mut first_error = None;
    let mut evaluated = 0;
    for level in [Level::Instance, Level::Block] {
        match evaluate(&labeled_scores(&records, level)) {
            Ok(r) => {
                r.write_text(level.as_str(), &mut out);
                evaluated += 1;
            }
            Err(e) => {
                log::warn!("{level} level not evaluated: {e}");
                out.push_str(&format!("{level}.error={e}\n"));
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) if evaluated == 0 => Err(e),
        _ => Ok(out),
    }
}

pub fn run(a: EvalArgs) -> Result<(), CliError> {
    let flags = a.scores.map(|v| ("scores", v)).into_iter().collect();
    let cfg = assemble(RunConfig::new("eval", OPTIONS, None), &a.common, flags)?;
    let text = read_file(&cfg.path("scores")?)?;
    let out = report(&text)?;
    if let Some(dir) = cfg.get("out") {
        let dir = std::path::Path::new(dir);
        cfg.echo(dir)?;
        write_file(&dir.join("eval.txt"), &out)?;
    }
    print!("{out}");
    Ok(())
}
