//! Flat run configuration: defaults, then an optional TOML/JSON file, then
//! command-line flags.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use structcs::dictionary::DictMode;
use structcs::recon::{LambdaInit, Method, ReconConfig};
use structcs::sampling::{SamplerConfig, SamplerKind};
use structcs::solver::FistaConfig;
use structcs::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub mode: DictMode,
    pub sampler: SamplerKind,
    /// Sample count; takes precedence over `fraction`.
    pub samples: Option<usize>,
    pub fraction: f64,
    pub sigma: f64,
    pub poisson_param: f64,
    pub seed: u64,
    /// Add a fully-sampled center sized for the dictionary.
    pub fsr: bool,
    /// Explicit center size, overriding the dictionary's.
    pub fsr_extent: Option<[usize; 2]>,
    pub noise_sigma: f64,
    pub levels: usize,
    pub nscales: Option<usize>,
    pub nangles_coarse: usize,
    pub max_iters: usize,
    pub reweights: usize,
    pub reweight_eps: f64,
    pub lambda_scale: f64,
    pub lambda_init: LambdaInit,
    pub kaiser_beta: f64,
    pub initial_step: f64,
    pub backtrack: f64,
    pub step_growth: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = ReconConfig::default();
        let s = SamplerConfig::default();
        Self {
            method: Method::Sbpd,
            mode: r.mode,
            sampler: s.kind,
            samples: None,
            fraction: 0.1,
            sigma: s.sigma_frac,
            poisson_param: s.poisson_param,
            seed: 0,
            fsr: true,
            fsr_extent: None,
            noise_sigma: 0.0,
            levels: r.levels,
            nscales: r.nscales,
            nangles_coarse: r.nangles_coarse,
            max_iters: r.max_iters,
            reweights: r.reweights,
            reweight_eps: r.reweight_eps,
            lambda_scale: r.lambda_scale,
            lambda_init: r.lambda_init,
            kaiser_beta: r.kaiser_beta,
            initial_step: r.fista.initial_step,
            backtrack: r.fista.backtrack,
            step_growth: r.fista.growth,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with a config file, chosen by extension.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
        }
    }

    pub fn recon(&self) -> ReconConfig {
        ReconConfig {
            mode: self.mode,
            levels: self.levels,
            nscales: self.nscales,
            nangles_coarse: self.nangles_coarse,
            max_iters: self.max_iters,
            reweights: self.reweights,
            reweight_eps: self.reweight_eps,
            lambda_scale: self.lambda_scale,
            lambda_init: self.lambda_init,
            kaiser_beta: self.kaiser_beta,
            fista: FistaConfig {
                initial_step: self.initial_step,
                backtrack: self.backtrack,
                growth: self.step_growth,
                ..FistaConfig::default()
            },
        }
    }

    pub fn sample_count(&self, rows: usize, cols: usize) -> Result<usize> {
        match self.samples {
            Some(n) => Ok(n),
            None if self.fraction > 0.0 && self.fraction <= 1.0 => {
                Ok(((self.fraction * (rows * cols) as f64).round() as usize).max(1))
            }
            None => Err(Error::InvalidArgument(format!(
                "fraction: {} is not in (0, 1]",
                self.fraction
            ))),
        }
    }

    pub fn sampler_config(&self, rows: usize, cols: usize) -> Result<SamplerConfig> {
        let fsr = match (self.fsr, self.fsr_extent) {
            (false, _) => None,
            (true, Some([h, w])) => Some((h, w)),
            (true, None) => Some(self.recon().required_fsr(rows, cols)?),
        };
        Ok(SamplerConfig {
            kind: self.sampler,
            sigma_frac: self.sigma,
            poisson_param: self.poisson_param,
            n_samples: self.sample_count(rows, cols)?,
            seed: self.seed,
            fsr,
        })
    }
}
