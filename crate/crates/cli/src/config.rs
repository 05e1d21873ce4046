//! Experiment configuration: a flat key-value document (TOML), versioned by
//! `schema_version = 1`. The seed fully determines all randomized inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qac_core::models::ModelSpec;
use qac_core::HermitianOperator;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    VerifyLemma1,
    VerifyDbound2,
    RunAlg1,
    RunAlg2,
    Schedule,
    Estimate,
    Kernels,
    Stateprep,
}

impl Task {
    pub fn parse(name: &str) -> anyhow::Result<Self> {
        Ok(match name {
            "verify_lemma1" => Task::VerifyLemma1,
            "verify_dbound2" => Task::VerifyDbound2,
            "run_alg1" => Task::RunAlg1,
            "run_alg2" => Task::RunAlg2,
            "schedule" => Task::Schedule,
            "estimate" => Task::Estimate,
            "kernels" => Task::Kernels,
            "stateprep" => Task::Stateprep,
            other => bail!("unknown task '{other}'"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::VerifyLemma1 => "verify_lemma1",
            Task::VerifyDbound2 => "verify_dbound2",
            Task::RunAlg1 => "run_alg1",
            Task::RunAlg2 => "run_alg2",
            Task::Schedule => "schedule",
            Task::Estimate => "estimate",
            Task::Kernels => "kernels",
            Task::Stateprep => "stateprep",
        }
    }
}

/// Raw document shape; everything optional so schema errors carry context.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    task: String,
    model: Option<String>,
    size: Option<u64>,
    dim: Option<usize>,
    gap_floor: Option<f64>,
    sites: Option<usize>,
    field: Option<f64>,
    file: Option<String>,
    seed: Option<u64>,
    output: Option<String>,
    epsilon: Option<f64>,
    level: Option<usize>,
    delta: Option<f64>,
    t_total: Option<f64>,
    n_steps: Option<u64>,
    c: Option<f64>,
    gamma1: Option<f64>,
    bits: Option<u32>,
    kernel_delta: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
}

/// A validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub model: Option<ModelSpec>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub epsilon: f64,
    pub level: usize,
    pub delta: Option<f64>,
    pub t_total: Option<f64>,
    pub n_steps: Option<u64>,
    pub c: f64,
    pub gamma1: Option<f64>,
    pub bits: u32,
    pub kernel_delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Echo of the parsed document for the report.
    pub echo: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct ExplicitPair {
    dim: usize,
    h0_re: Vec<f64>,
    h0_im: Vec<f64>,
    h1_re: Vec<f64>,
    h1_im: Vec<f64>,
}

fn load_explicit(path: &Path) -> anyhow::Result<ModelSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading explicit model file {}", path.display()))?;
    let pair: ExplicitPair = serde_json::from_str(&text).context("parsing explicit model JSON")?;
    let d = pair.dim;
    if pair.h0_re.len() != d * d
        || pair.h0_im.len() != d * d
        || pair.h1_re.len() != d * d
        || pair.h1_im.len() != d * d
    {
        bail!("explicit model arrays must each hold dim^2 entries");
    }
    let build = |re: &[f64], im: &[f64]| -> anyhow::Result<HermitianOperator> {
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| {
            num_complex::Complex64::new(re[r * d + c], im[r * d + c])
        });
        HermitianOperator::new(m).map_err(|e| anyhow::anyhow!("{e}"))
    };
    Ok(ModelSpec::Explicit {
        h0: build(&pair.h0_re, &pair.h0_im)?,
        h1: build(&pair.h1_re, &pair.h1_im)?,
    })
}

impl ExperimentConfig {
    /// Parses and schema-checks a config file. Schema violations are
    /// reported with exit code 2 by the caller.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let raw: RawConfig = toml::from_str(&text).context("parsing config document")?;
        if raw.schema_version != 1 {
            bail!("unsupported schema_version {}", raw.schema_version);
        }
        let task = Task::parse(&raw.task)?;
        let seed = raw.seed.unwrap_or(0);
        let level = raw.level.unwrap_or(0);
        let model = match raw.model.as_deref() {
            None => None,
            Some("grover") => Some(ModelSpec::Grover {
                size: raw.size.context("grover model needs 'size'")?,
            }),
            Some("random_gapped") => Some(ModelSpec::RandomGapped {
                dim: raw.dim.context("random_gapped model needs 'dim'")?,
                gap_floor: raw
                    .gap_floor
                    .context("random_gapped model needs 'gap_floor'")?,
                seed,
                level,
            }),
            Some("ising") => Some(ModelSpec::Ising {
                sites: raw.sites.context("ising model needs 'sites'")?,
                field: raw.field.unwrap_or(1.0),
            }),
            Some("explicit") => {
                let file = raw.file.as_deref().context("explicit model needs 'file'")?;
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                Some(load_explicit(&base.join(file))?)
            }
            Some(other) => bail!("unknown model '{other}'"),
        };
        let mut echo = BTreeMap::new();
        let doc: toml::Value = toml::from_str(&text)?;
        if let toml::Value::Table(table) = doc {
            for (k, v) in table {
                echo.insert(k, v.to_string());
            }
        }
        Ok(Self {
            task,
            model,
            seed,
            output: raw.output.map(PathBuf::from),
            epsilon: raw.epsilon.unwrap_or(1e-2),
            level,
            delta: raw.delta,
            t_total: raw.t_total,
            n_steps: raw.n_steps,
            c: raw.c.unwrap_or(0.2),
            gamma1: raw.gamma1,
            bits: raw.bits.unwrap_or(6),
            kernel_delta: raw.kernel_delta.unwrap_or(2f64.powi(-20)),
            alpha: raw.alpha.unwrap_or(1.0),
            beta: raw.beta.unwrap_or(1.0),
            gamma: raw.gamma.unwrap_or(0.5),
            echo,
        })
    }
}
