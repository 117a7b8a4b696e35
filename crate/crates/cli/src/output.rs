use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use runevt::paper::paper_model;
use runevt::{Error, ExceedanceSet, FitResult, GlobalModel};

/// 2 for usage and schema problems, 1 for computational failures.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Schema(_)
            | Error::Config(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::UnknownDiscipline(_)
            | Error::MissingThreshold(_),
        ) => 2,
        Some(_) => 1,
        None if e.downcast_ref::<io::Error>().is_some() => 2,
        None => 1,
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

/// Writes `{command, config, result}` as pretty JSON.
pub fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let env = Envelope { command, config, result };
    let mut sink = open_sink(output)?;
    serde_json::to_writer_pretty(&mut sink, &env).map_err(Error::from)?;
    writeln!(sink)?;
    sink.flush()?;
    Ok(())
}

pub fn open_sink(output: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn read_input(path: &Path) -> anyhow::Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        File::open(path)
            .with_context(|| format!("opening {}", path.display()))?
            .read_to_string(&mut text)?;
    }
    Ok(text)
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = read_input(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    // unwrap our own output envelope
    Ok(match v {
        Value::Object(mut m) if m.contains_key("command") && m.contains_key("result") => {
            m.remove("result").unwrap_or(Value::Null)
        }
        other => other,
    })
}

/// A model file: bare model, fit result, or a `fit` envelope.
pub enum LoadedModel {
    Model(GlobalModel),
    Fit(Box<FitResult>),
}

impl LoadedModel {
    pub fn model(&self) -> &GlobalModel {
        match self {
            LoadedModel::Model(m) => m,
            LoadedModel::Fit(f) => &f.model,
        }
    }
}

pub fn load_model(path: Option<&Path>) -> anyhow::Result<LoadedModel> {
    let Some(path) = path else {
        return Ok(LoadedModel::Model(paper_model()));
    };
    let v = read_json(path)?;
    let schema = |e: serde_json::Error| Error::Schema(format!("{}: {e}", path.display()));
    if v.get("log_likelihood").is_some() {
        Ok(LoadedModel::Fit(Box::new(serde_json::from_value(v).map_err(schema)?)))
    } else {
        Ok(LoadedModel::Model(serde_json::from_value(v).map_err(schema)?))
    }
}

/// Exceedance sets from `ingest`/`simulate` output or a bare array.
pub fn load_sets(path: &Path) -> anyhow::Result<Vec<ExceedanceSet>> {
    let v = read_json(path)?;
    let v = match v {
        Value::Object(mut m) if m.contains_key("sets") => m.remove("sets").unwrap_or(Value::Null),
        other => other,
    };
    let sets: Vec<ExceedanceSet> =
        serde_json::from_value(v).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    for s in &sets {
        s.validate()?;
    }
    Ok(sets)
}
