//! Run configuration: a TOML file, command-line flags and `key=value`
//! overrides merged into one table and then validated.
//!
//! ```toml
//! method = "mg_turbo"
//! acquisition = "adaptive"
//! budget = 100
//! init_size = 20
//! seeds = [0, 1, 2]
//! out = "runs/mg"
//!
//! [problem]
//! kind = "synthetic"
//! dim = 14
//! response = "saturating"
//! noise = 0.05
//!
//! [trust]
//! tau_fail = 5
//! ```

use std::path::{Path, PathBuf};

use mgturbo::acquisition::{AcquisitionConfig, AcquisitionStrategy, TieBreak};
use mgturbo::baselines::GaConfig;
use mgturbo::memory::BasinConfig;
use mgturbo::objectives::{ExternalMode, ResponseKind, StandardKind};
use mgturbo::surrogate::GpFitConfig;
use mgturbo::trust::{CandidateConfig, OptimizerConfig, TrustRegionParams};
use mgturbo::Method;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Generated calibration instance scored by mean GEH.
    Synthetic {
        dim: usize,
        #[serde(default)]
        num_counts: Option<usize>,
        #[serde(default)]
        response: ResponseKind,
        #[serde(default)]
        noise: f64,
        /// Seed of the problem instance, independent of the run seeds.
        #[serde(default)]
        instance_seed: u64,
    },
    Standard {
        function: StandardKind,
        dim: usize,
    },
    External {
        command: Vec<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default)]
        mode: ExternalMode,
        #[serde(default = "default_timeout")]
        timeout: f64,
        #[serde(default)]
        observed: Option<Vec<f64>>,
    },
}

fn default_timeout() -> f64 {
    60.0
}

/// Adaptive-acquisition schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveConfig {
    pub beta_start: f64,
    pub beta_end: f64,
    pub tie_break: TieBreak,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        let a = AcquisitionConfig::default();
        Self {
            beta_start: a.beta_start,
            beta_end: a.beta_end,
            tie_break: a.tie_break,
        }
    }
}

fn default_budget() -> usize {
    100
}

fn default_init_size() -> usize {
    20
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Ignored by `ga` and `random`; defaults to Thompson sampling otherwise.
    #[serde(default)]
    pub acquisition: Option<AcquisitionStrategy>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_init_size")]
    pub init_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Run seeds concurrently.
    #[serde(default)]
    pub parallel_seeds: bool,
    /// Evaluate the proposals of one iteration concurrently.
    #[serde(default)]
    pub parallel_evals: bool,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub trust: TrustRegionParams,
    #[serde(default)]
    pub basin: BasinConfig,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default)]
    pub gp: GpFitConfig,
    #[serde(default)]
    pub candidates: CandidateConfig,
    #[serde(default)]
    pub ga: GaConfig,
}

/// Values given on the command line; each replaces the file's value.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub method: Option<String>,
    pub acquisition: Option<String>,
    pub budget: Option<usize>,
    pub init_size: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub problem: Option<String>,
    pub overrides: Vec<String>,
}

/// Loaded configuration plus warnings produced while resolving it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn load(path: Option<&Path>, flags: &Flags) -> Result<Loaded> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    apply_flags(&mut table, flags)?;
    from_table(table)
}

pub fn from_table(table: Table) -> Result<Loaded> {
    let mut config: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_string()))?;
    let mut warnings = Vec::new();
    if !config.method.uses_acquisition() {
        if let Some(a) = config.acquisition.take() {
            warnings.push(format!(
                "acquisition '{}' is ignored by method '{}'",
                a.as_str(),
                config.method
            ));
        }
    } else if config.acquisition.is_none() {
        config.acquisition = Some(AcquisitionStrategy::default());
    }
    config.validate()?;
    Ok(Loaded { config, warnings })
}

fn apply_flags(table: &mut Table, flags: &Flags) -> Result<()> {
    let mut set = |key: &str, value: Value| {
        table.insert(key.to_string(), value);
    };
    if let Some(m) = &flags.method {
        set("method", Value::String(m.clone()));
    }
    if let Some(a) = &flags.acquisition {
        set("acquisition", Value::String(a.clone()));
    }
    if let Some(b) = flags.budget {
        set("budget", Value::Integer(to_int(b)?));
    }
    if let Some(i) = flags.init_size {
        set("init_size", Value::Integer(to_int(i)?));
    }
    if let Some(seeds) = &flags.seeds {
        let values = seeds
            .iter()
            .map(|&s| to_int(s).map(Value::Integer))
            .collect::<Result<Vec<_>>>()?;
        set("seeds", Value::Array(values));
    }
    if let Some(out) = &flags.out {
        set("out", Value::String(out.display().to_string()));
    }
    if let Some(p) = &flags.problem {
        table.insert("problem".into(), Value::Table(parse_problem(p)?));
    }
    for ov in &flags.overrides {
        apply_override(table, ov)?;
    }
    Ok(())
}

fn to_int<T: TryInto<i64> + Copy + std::fmt::Display>(v: T) -> Result<i64> {
    v.try_into()
        .map_err(|_| CliError::Config(format!("value {v} is too large")))
}

/// Parses a `key=value` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `a.b.c=value`, creating intermediate tables as needed.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' is malformed")));
    }
    let mut current = table;
    for part in &path[..path.len() - 1] {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{part}' is not a table")))?;
    }
    current.insert(path[path.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Parses `kind[:key=value,...]`, e.g. `synthetic:dim=14,noise=0.05` or
/// `standard:function=ackley,dim=10`. Commas inside brackets or quotes do not split.
pub fn parse_problem(spec: &str) -> Result<Table> {
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k, r),
        None => (spec, ""),
    };
    let mut table = Table::new();
    table.insert("kind".into(), Value::String(kind.trim().to_string()));
    for item in split_top_level(rest) {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            CliError::Config(format!("problem option '{item}' is not key=value"))
        })?;
        table.insert(k.trim().to_string(), parse_value(v));
    }
    Ok(table)
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            match c {
                _ if escaped => escaped = false,
                '\\' if q == '"' => escaped = true,
                _ if c == q => quote = None,
                _ => {}
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(CliError::Config(msg));
        if self.seeds.is_empty() {
            return cfg("seeds: list must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return cfg("seeds: list contains duplicates".into());
        }
        if self.budget == 0 {
            return cfg("budget: must be >= 1".into());
        }
        if self.method.uses_acquisition() && self.init_size >= self.budget {
            return cfg(format!(
                "init_size: must be below budget ({} >= {})",
                self.init_size, self.budget
            ));
        }
        if self.method.uses_acquisition() && self.init_size < 2 {
            return cfg("init_size: must be >= 2".into());
        }
        if matches!(self.method, Method::MultiTurbo | Method::MgTurbo)
            && self.init_size < self.trust.num_regions
        {
            return cfg(format!(
                "init_size: must be >= trust.num_regions ({})",
                self.trust.num_regions
            ));
        }
        let named = |section: &str, r: mgturbo::Result<()>| {
            r.map_err(|e| CliError::Config(format!("{section}: {e}")))
        };
        named("trust", self.trust.validate())?;
        named("basin", self.basin.validate())?;
        named("adaptive", self.acquisition_config().validate())?;
        named("ga", self.ga.validate())?;
        if self.gp.starts == 0 || self.gp.max_evals_per_start == 0 || self.gp.refit_every == 0 {
            return cfg("gp: starts, max_evals_per_start and refit_every must be >= 1".into());
        }
        if self.candidates.per_dim == 0 || self.candidates.max == 0 || self.candidates.thompson_max == 0 {
            return cfg("candidates: counts must be >= 1".into());
        }
        self.problem.validate()
    }

    pub fn acquisition_config(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            strategy: self.acquisition.unwrap_or_default(),
            beta_start: self.adaptive.beta_start,
            beta_end: self.adaptive.beta_end,
            tie_break: self.adaptive.tie_break,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            budget: self.budget,
            init_size: self.init_size,
            acquisition: self.acquisition_config(),
            trust: self.trust,
            basin: self.basin.clone(),
            gp: self.gp,
            candidates: self.candidates,
            parallel: self.parallel_evals,
        }
    }

    /// The configuration with dimension-dependent defaults filled in, as
    /// echoed into summaries.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        if c.ga.mutation_prob.is_none() {
            c.ga.mutation_prob = Some(1.0 / self.problem.dim() as f64);
        }
        if let ProblemConfig::Synthetic { dim, num_counts, .. } = &mut c.problem {
            num_counts.get_or_insert(3 * *dim);
        }
        c
    }

    /// Label used for output grouping, e.g. `turbo_thompson` or `ga`.
    pub fn label(&self) -> String {
        match self.acquisition {
            Some(a) if self.method.uses_acquisition() => format!("{}_{}", self.method, a.as_str()),
            _ => self.method.to_string(),
        }
    }
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            Self::Synthetic { dim, .. } | Self::Standard { dim, .. } => *dim,
            Self::External { lower, .. } => lower.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CliError::Config(format!("problem: {m}")));
        match self {
            Self::Synthetic { dim, noise, num_counts, .. } => {
                if *dim == 0 {
                    return err("dim must be >= 1".into());
                }
                if !(noise.is_finite() && (0.0..1.0).contains(noise)) {
                    return err(format!("noise must lie in [0, 1), got {noise}"));
                }
                if num_counts == &Some(0) {
                    return err("num_counts must be >= 1".into());
                }
            }
            Self::Standard { dim, .. } => {
                if *dim == 0 {
                    return err("dim must be >= 1".into());
                }
            }
            Self::External { command, lower, upper, timeout, mode, observed } => {
                if command.is_empty() {
                    return err("command must not be empty".into());
                }
                if lower.is_empty() || lower.len() != upper.len() {
                    return err("lower and upper must be non-empty and of equal length".into());
                }
                if !(timeout.is_finite() && *timeout > 0.0) {
                    return err(format!("timeout must be > 0, got {timeout}"));
                }
                if *mode == ExternalMode::Counts && observed.is_none() {
                    return err("counts mode requires observed".into());
                }
            }
        }
        Ok(())
    }
}
