use mgturbo::objectives::{
    CountVector, ExternalObjective, ExternalObjectiveConfig, StandardFunction, SyntheticCalibration,
    SyntheticSpec,
};
use mgturbo::{Objective, SearchSpace};

use crate::config::ProblemConfig;
use crate::error::{CliError, Result};

/// An objective together with the box it is searched over.
pub struct Problem {
    pub objective: Box<dyn Objective>,
    pub space: SearchSpace,
}

impl Problem {
    pub fn build(config: &ProblemConfig) -> Result<Self> {
        let cfg = |e: mgturbo::Error| CliError::Config(format!("problem: {e}"));
        match config {
            ProblemConfig::Synthetic { dim, num_counts, response, noise, instance_seed } => {
                let spec = SyntheticSpec {
                    dim: *dim,
                    num_counts: *num_counts,
                    response: *response,
                    noise: *noise,
                    seed: *instance_seed,
                };
                let problem = SyntheticCalibration::generate(&spec).map_err(cfg)?;
                let space = problem.space().clone();
                Ok(Self { objective: Box::new(problem), space })
            }
            ProblemConfig::Standard { function, dim } => {
                let f = StandardFunction::new(*function, *dim).map_err(cfg)?;
                let space = f.space().clone();
                Ok(Self { objective: Box::new(f), space })
            }
            ProblemConfig::External { command, lower, upper, mode, timeout, observed } => {
                let space = SearchSpace::new(lower.clone(), upper.clone()).map_err(cfg)?;
                let observed = observed
                    .clone()
                    .map(CountVector::new)
                    .transpose()
                    .map_err(|e| CliError::Config(format!("problem.observed: {e}")))?;
                let objective = ExternalObjective::new(ExternalObjectiveConfig {
                    command: command.clone(),
                    mode: *mode,
                    timeout: *timeout,
                    observed,
                })
                .map_err(cfg)?;
                Ok(Self { objective: Box::new(objective), space })
            }
        }
    }
}
