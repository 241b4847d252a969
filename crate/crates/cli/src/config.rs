//! Run configuration.
//!
//! The file format is TOML: top-level keys plus nested tables. Every table
//! rejects unknown keys.
//!
//! ```toml
//! schema_version = 1
//! input = "viral_load.csv"     # fit: long-format CSV (id, time, y, covariates)
//! output = "runs/fit1"         # any verb
//! seed = 7
//! cd4_scale = 100              # fit: divide the cd4 column
//! fit_dir = "runs/fit1"        # predict, diagnose: a finished fit
//!
//! [model]                      # fit
//! family = "cgal"              # al | gal | cgal
//! p0 = 0.5
//! prior_preset = "baseline"    # baseline | sensitivity | uniform_alpha
//! [model.link]
//! kind = "biphasic"            # linear | biphasic | biphasic_short
//! covariate = "cd4"
//! [model.priors]               # optional; replaces the preset, missing keys from baseline
//! tau0 = 10.0
//!
//! [sampler]                    # fit, simulate
//! n_chains = 4
//! n_iter = 10000
//!
//! [[scenario]]                 # simulate; repeat per scenario, default is the 4-scenario grid
//! p0 = 0.5
//! alpha_true = 0.05
//! replicates = 50
//!
//! [predict]                    # schedule and linear cd4 path
//! [diagnose]                   # n_sims
//! [pdf_table]                  # panels, grid and cGAL settings
//! [kurtosis_table]             # p0 levels, gamma grid, draws per point
//! ```
//!
//! Precedence, highest first: command-line flags, the config file, built-in
//! defaults. Relative paths in a file are resolved against the file's
//! directory, relative paths on the command line against the working
//! directory. `--seed` and the top-level `seed` override `sampler.seed`.

use std::path::{Path, PathBuf};

use cgalqr::mcmc::{SamplerConfig, DEFAULT_CD4_MODEL, DEFAULT_SCHEDULE};
use cgalqr::model::{Link, ModelSpec, PriorConfig};
use cgalqr::sim::ScenarioSpec;
use cgalqr::Family;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::SCHEMA_VERSION;

pub const DEFAULT_SEED: u64 = 20_240_101;
/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CGALQR_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Fit,
    Predict,
    Diagnose,
    Simulate,
    PdfTable,
    KurtosisTable,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Fit => "fit",
            Verb::Predict => "predict",
            Verb::Diagnose => "diagnose",
            Verb::Simulate => "simulate",
            Verb::PdfTable => "pdf-table",
            Verb::KurtosisTable => "kurtosis-table",
        }
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub verb: Option<Verb>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cd4_scale: Option<f64>,
    #[serde(default)]
    pub fit_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub predict: Option<PredictSection>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseSection>,
    #[serde(default)]
    pub pdf_table: Option<PdfTableSection>,
    #[serde(default)]
    pub kurtosis_table: Option<KurtosisSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            verb: None,
            input: None,
            output: None,
            seed: None,
            cd4_scale: None,
            fit_dir: None,
            model: None,
            sampler: None,
            scenarios: vec![],
            predict: None,
            diagnose: None,
            pdf_table: None,
            kurtosis_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub family: Family,
    pub p0: f64,
    pub link: Link,
    pub prior_preset: Option<String>,
    pub priors: Option<PriorConfig>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: Family::Cgal,
            p0: 0.5,
            link: Link::Biphasic { covariate: "cd4".into() },
            prior_preset: None,
            priors: None,
        }
    }
}

impl ModelSection {
    pub fn priors(&self) -> CliResult<PriorConfig> {
        match (&self.priors, &self.prior_preset) {
            (Some(p), _) => Ok(*p),
            (None, Some(name)) => Ok(PriorConfig::preset(name)?),
            (None, None) => Ok(PriorConfig::baseline()),
        }
    }

    pub fn to_spec(&self) -> CliResult<ModelSpec> {
        Ok(ModelSpec::new(self.family, self.p0, self.link.clone(), self.priors()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub schedule: Vec<f64>,
    pub cd4_intercept: f64,
    pub cd4_slope: f64,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            cd4_intercept: DEFAULT_CD4_MODEL.0,
            cd4_slope: DEFAULT_CD4_MODEL.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    pub n_sims: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { n_sims: 250 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfPanel {
    pub p0: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdfTableSection {
    pub panels: Vec<PdfPanel>,
    pub mu: f64,
    pub sigma: f64,
    pub tau0: f64,
    pub alpha: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_points: usize,
}

impl Default for PdfTableSection {
    fn default() -> Self {
        Self {
            panels: vec![PdfPanel { p0: 0.1, gamma: 1.0 }, PdfPanel { p0: 0.5, gamma: -0.625 }],
            mu: 0.0,
            sigma: 1.0,
            tau0: 10.0,
            alpha: 0.5,
            y_min: -15.0,
            y_max: 15.0,
            n_points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KurtosisSection {
    pub p0: Vec<f64>,
    /// Interior points of the admissible γ interval per level.
    pub n_gamma: usize,
    pub tau0: f64,
    pub alpha: f64,
    pub n_draws: usize,
}

impl Default for KurtosisSection {
    fn default() -> Self {
        Self {
            p0: vec![0.1, 0.5],
            n_gamma: 21,
            tau0: 10.0,
            alpha: 0.5,
            n_draws: 100_000,
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub cd4_scale: Option<f64>,
    pub fit_dir: Option<PathBuf>,
    pub family: Option<Family>,
    pub p0: Option<f64>,
    pub n_chains: Option<usize>,
    pub n_adapt: Option<usize>,
    pub n_burnin: Option<usize>,
    pub n_iter: Option<usize>,
    pub thin: Option<usize>,
    pub replicates: Option<usize>,
    pub families: Option<Vec<Family>>,
    pub n_sims: Option<usize>,
    pub n_draws: Option<usize>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config file, resolving its relative paths against the file's
    /// directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input, &mut cfg.output, &mut cfg.fit_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        set(&mut self.input, &o.input);
        set(&mut self.output, &o.output);
        set(&mut self.fit_dir, &o.fit_dir);
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.cd4_scale.is_some() {
            self.cd4_scale = o.cd4_scale;
        }
        if o.family.is_some() || o.p0.is_some() {
            let m = self.model.get_or_insert_with(ModelSection::default);
            if let Some(f) = o.family {
                m.family = f;
            }
            if let Some(p) = o.p0 {
                m.p0 = p;
            }
        }
        let sampler_flags = [o.n_chains, o.n_adapt, o.n_burnin, o.n_iter, o.thin];
        if sampler_flags.iter().any(Option::is_some) {
            let s = self.sampler.get_or_insert_with(SamplerConfig::default);
            for (dst, src) in [
                (&mut s.n_chains, o.n_chains),
                (&mut s.n_adapt, o.n_adapt),
                (&mut s.n_burnin, o.n_burnin),
                (&mut s.n_iter, o.n_iter),
                (&mut s.thin, o.thin),
            ] {
                if let Some(v) = src {
                    *dst = v;
                }
            }
        }
        if o.replicates.is_some() || o.families.is_some() {
            if self.scenarios.is_empty() {
                self.scenarios = ScenarioSpec::grid();
            }
            for s in &mut self.scenarios {
                if let Some(r) = o.replicates {
                    s.replicates = r;
                }
                if let Some(f) = &o.families {
                    s.families.clone_from(f);
                }
            }
        }
        if let Some(n) = o.n_sims {
            self.diagnose.get_or_insert_with(Default::default).n_sims = n;
        }
        if let Some(n) = o.n_draws {
            self.kurtosis_table.get_or_insert_with(Default::default).n_draws = n;
        }
    }

    /// Fills defaults for `verb`, drops sections it does not use, makes paths
    /// absolute and checks that they exist. The result is what manifests
    /// record and hash; `output` is cleared since it does not affect results.
    pub fn resolve(&self, verb: Verb) -> CliResult<Self> {
        if let Some(v) = self.verb {
            if v != verb {
                return Err(CliError::config(format!(
                    "config is for verb '{}' but '{}' was invoked",
                    v.name(),
                    verb.name()
                )));
            }
        }
        let mut out = Self {
            verb: Some(verb),
            ..Self::default()
        };
        let seed = self.seed.or(self.sampler.as_ref().map(|s| s.seed)).unwrap_or(DEFAULT_SEED);
        let sampler = || {
            let mut s = self.sampler.clone().unwrap_or_default();
            s.seed = seed;
            s.validate()?;
            Ok::<_, CliError>(s)
        };
        match verb {
            Verb::Fit => {
                let input = self.input.as_ref().ok_or_else(|| CliError::config("fit needs an input CSV"))?;
                out.input = Some(existing_file(input)?);
                if let Some(s) = self.cd4_scale {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(CliError::config(format!("cd4_scale must be positive, got {s}")));
                    }
                }
                out.cd4_scale = self.cd4_scale;
                let mut model = self.model.clone().unwrap_or_default();
                model.priors = Some(model.priors()?);
                model.prior_preset = None;
                model.to_spec()?;
                out.model = Some(model);
                out.sampler = Some(sampler()?);
                out.seed = Some(seed);
            }
            Verb::Predict | Verb::Diagnose => {
                let dir = self
                    .fit_dir
                    .as_ref()
                    .ok_or_else(|| CliError::config(format!("{} needs fit_dir", verb.name())))?;
                let dir = absolute(dir)?;
                if !dir.join(crate::manifest::MANIFEST_FILE).is_file() {
                    return Err(CliError::config(format!("{}: not a finished fit directory", dir.display())));
                }
                out.fit_dir = Some(dir);
                if verb == Verb::Predict {
                    let p = self.predict.clone().unwrap_or_default();
                    if p.schedule.is_empty() || p.schedule.iter().any(|t| !t.is_finite()) {
                        return Err(CliError::config("predict.schedule needs finite times"));
                    }
                    out.predict = Some(p);
                } else {
                    let d = self.diagnose.clone().unwrap_or_default();
                    if d.n_sims == 0 {
                        return Err(CliError::config("diagnose.n_sims must be at least 1"));
                    }
                    out.diagnose = Some(d);
                    out.seed = Some(seed);
                }
            }
            Verb::Simulate => {
                let scenarios = if self.scenarios.is_empty() {
                    ScenarioSpec::grid()
                } else {
                    self.scenarios.clone()
                };
                for s in &scenarios {
                    s.validate()?;
                }
                out.scenarios = scenarios;
                out.sampler = Some(sampler()?);
                out.seed = Some(seed);
            }
            Verb::PdfTable => {
                let p = self.pdf_table.clone().unwrap_or_default();
                if p.n_points < 2 || !(p.y_max > p.y_min) || p.panels.is_empty() {
                    return Err(CliError::config("pdf_table needs panels, n_points >= 2 and y_max > y_min"));
                }
                out.pdf_table = Some(p);
            }
            Verb::KurtosisTable => {
                let k = self.kurtosis_table.clone().unwrap_or_default();
                if k.n_gamma == 0 || k.n_draws < 4 || k.p0.is_empty() {
                    return Err(CliError::config("kurtosis_table needs p0 levels, n_gamma >= 1 and n_draws >= 4"));
                }
                out.kurtosis_table = Some(k);
                out.seed = Some(seed);
            }
        }
        Ok(out)
    }

    /// Output directory: the explicit setting, else `$CGALQR_OUTPUT_ROOT/<verb>`,
    /// else `cgalqr-output/<verb>` under the working directory.
    pub fn output_dir(&self, verb: Verb) -> PathBuf {
        if let Some(o) = &self.output {
            return o.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("cgalqr-output"));
        root.join(verb.name())
    }
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
}

fn existing_file(p: &Path) -> CliResult<PathBuf> {
    if !p.is_file() {
        return Err(CliError::config(format!("{}: file not found", p.display())));
    }
    absolute(p)
}
