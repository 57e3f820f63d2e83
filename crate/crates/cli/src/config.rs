//! Config documents for each subcommand.
//!
//! Every struct rejects unknown keys and materializes its defaults, so
//! serializing a parsed config gives the complete echo written to the run
//! directory.

use fracup::embedding::{default_corpus, EmbeddingParams, HlsParams};
use fracup::extremal::MinimizeConfig;
use fracup::grid::{FunctionSpec, Grid, Shape};
use fracup::schrodinger::EvolutionConfig;
use fracup::uncertainty::default_lambdas;
use fracup::{Result, UncertaintyParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyRun {
    pub params: UncertaintyParams,
    pub grid: Grid,
    pub spec: FunctionSpec,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Also evaluate J with the spatial weight centered at the `|f|^p` centroid.
    #[serde(default)]
    pub center: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityRun {
    pub minimize: MinimizeConfig,
    pub perturbations: Vec<FunctionSpec>,
    #[serde(default = "default_epsilons")]
    pub epsilon_list: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    fracup::schrodinger::log_times(1e-3, 1e-1, 7)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub params: UncertaintyParams,
    /// Lower bound J must respect along the flow.
    pub floor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveRun {
    pub initial: FunctionSpec,
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub flow: Option<FlowSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedRun {
    pub embedding: EmbeddingParams,
    pub uncertainty: UncertaintyParams,
    pub grid: Grid,
    /// Defaults to 20 Gaussians, 20 bumps and 60 random series.
    #[serde(default)]
    pub corpus: Option<Vec<FunctionSpec>>,
    #[serde(default = "default_hy_exponents")]
    pub hausdorff_young: Vec<f64>,
    #[serde(default)]
    pub hls: Option<HlsParams>,
}

fn default_hy_exponents() -> Vec<f64> {
    vec![1.0, 4.0 / 3.0, 1.5, 2.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub grid: Grid,
    pub cases: Vec<UncertaintyParams>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

fn reseed(spec: &mut FunctionSpec, seed: u64) {
    if let Shape::RandomFourier { seed: s, .. } = &mut spec.shape {
        *s = seed;
    }
}

impl UncertaintyRun {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.spec.validate()
    }

    pub fn apply_seed(&mut self, seed: u64) {
        reseed(&mut self.spec, seed);
    }
}

impl StabilityRun {
    pub fn validate(&self) -> Result<()> {
        self.minimize.validate()?;
        if self.perturbations.is_empty() {
            return Err(fracup::Error::InvalidParameter("no perturbations given".into()));
        }
        self.perturbations.iter().try_for_each(FunctionSpec::validate)
    }

    /// Sets the recorded seed and reseeds random initial data and the
    /// perturbations (`seed`, `seed + 1`, ...).
    pub fn apply_seed(&mut self, seed: u64) {
        self.minimize.seed = seed;
        reseed(&mut self.minimize.init, seed);
        for (k, p) in self.perturbations.iter_mut().enumerate() {
            reseed(p, seed + k as u64);
        }
    }
}

pub fn validate_minimize(cfg: &MinimizeConfig) -> Result<()> {
    cfg.validate()
}

pub fn seed_minimize(cfg: &mut MinimizeConfig, seed: u64) {
    cfg.seed = seed;
    reseed(&mut cfg.init, seed);
}

impl EvolveRun {
    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        self.evolution.validate()?;
        if let Some(f) = &self.flow {
            f.params.validate()?;
        }
        Ok(())
    }

    pub fn apply_seed(&mut self, seed: u64) {
        reseed(&mut self.initial, seed);
    }
}

impl EmbedRun {
    pub fn validate(&self) -> Result<()> {
        self.uncertainty.validate()?;
        if let Some(h) = &self.hls {
            h.validate()?;
        }
        if let Some(c) = &self.corpus {
            c.iter().try_for_each(FunctionSpec::validate)?;
        }
        if let Some(p) = self.hausdorff_young.iter().find(|p| !(1.0..=2.0).contains(*p)) {
            return Err(fracup::Error::InvalidParameter(format!(
                "Hausdorff-Young exponent must lie in [1, 2], got {p}"
            )));
        }
        Ok(())
    }

    /// Fills in the default corpus so the echo lists every field.
    pub fn materialize(&mut self) {
        if self.corpus.is_none() {
            self.corpus = Some(default_corpus(self.grid.dim()));
        }
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.materialize();
        for (k, spec) in self.corpus.iter_mut().flatten().enumerate() {
            reseed(spec, seed + k as u64);
        }
    }
}

impl SweepRun {
    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(fracup::Error::InvalidParameter("no parameter cases given".into()));
        }
        for c in &self.cases {
            c.validate()?;
            if c.n != self.grid.dim() {
                return Err(fracup::Error::InvalidParameter(format!(
                    "case has n = {} but the grid has dimension {}",
                    c.n,
                    self.grid.dim()
                )));
            }
        }
        Ok(())
    }
}
