use std::path::PathBuf;
use std::process::ExitCode;

use cgalqr::Family;
use cgalqr_cli::{run, CliError, Invocation, Overrides, Verb};
use clap::error::ErrorKind as ClapKind;
use clap::{Args, Parser, Subcommand};

/// Bayesian mixed-effects quantile regression with AL, GAL and contaminated
/// GAL likelihoods.
///
/// Settings come from flags, then the TOML file given by --config, then
/// built-in defaults. Outputs go to --output, else $CGALQR_OUTPUT_ROOT/<verb>,
/// else ./cgalqr-output/<verb>. Failures print a JSON error to stderr and
/// exit non-zero.
#[derive(Parser)]
#[command(name = "cgalqr", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model to a long-format CSV (id, time, y, covariates)
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Divide the cd4 column by this factor
        #[arg(long)]
        cd4_scale: Option<f64>,
        /// al, gal or cgal
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        p0: Option<f64>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Population quantile trajectory from a finished fit
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit_dir: Option<PathBuf>,
    },
    /// Influence, LOO and simulated-residual diagnostics for a finished fit
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit_dir: Option<PathBuf>,
        /// Posterior predictive replicates for the residual tests
        #[arg(long)]
        n_sims: Option<usize>,
    },
    /// Simulation study over one or more scenarios
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated families to fit, e.g. gal,cgal
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<Family>>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Density and CDF grids for AL, GAL and cGAL
    PdfTable {
        #[command(flatten)]
        common: Common,
    },
    /// Sample skewness, kurtosis and L-kurtosis over a grid of shape values
    KurtosisTable {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_draws: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// With --manifest: fail unless outputs match the recorded hashes
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    adapt: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    iter: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

impl SamplerArgs {
    fn apply(self, o: &mut Overrides) {
        o.n_chains = self.chains;
        o.n_adapt = self.adapt;
        o.n_burnin = self.burnin;
        o.n_iter = self.iter;
        o.thin = self.thin;
    }
}

fn invocation(cmd: Cmd) -> Invocation {
    let mut o = Overrides::default();
    let (verb, common) = match cmd {
        Cmd::Fit {
            common,
            input,
            cd4_scale,
            family,
            p0,
            sampler,
        } => {
            o.input = input;
            o.cd4_scale = cd4_scale;
            o.family = family;
            o.p0 = p0;
            sampler.apply(&mut o);
            (Verb::Fit, common)
        }
        Cmd::Predict { common, fit_dir } => {
            o.fit_dir = fit_dir;
            (Verb::Predict, common)
        }
        Cmd::Diagnose { common, fit_dir, n_sims } => {
            o.fit_dir = fit_dir;
            o.n_sims = n_sims;
            (Verb::Diagnose, common)
        }
        Cmd::Simulate {
            common,
            replicates,
            families,
            sampler,
        } => {
            o.replicates = replicates;
            o.families = families;
            sampler.apply(&mut o);
            (Verb::Simulate, common)
        }
        Cmd::PdfTable { common } => (Verb::PdfTable, common),
        Cmd::KurtosisTable { common, n_draws } => {
            o.n_draws = n_draws;
            (Verb::KurtosisTable, common)
        }
    };
    o.output = common.output;
    o.seed = common.seed;
    Invocation {
        verb,
        config: common.config,
        manifest: common.manifest,
        verify: common.verify,
        overrides: o,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.render().to_string().trim());
            eprintln!("{}", err.to_json(None));
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let inv = invocation(cli.cmd);
    match run(&inv) {
        Ok((dir, m)) => {
            let files: Vec<&str> = m.outputs.iter().map(|o| o.file.as_str()).collect();
            let line = serde_json::json!({
                "schema_version": cgalqr_cli::SCHEMA_VERSION,
                "status": "ok",
                "verb": inv.verb.name(),
                "output_dir": dir,
                "outputs": files,
                "config_hash": m.config_hash,
            });
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json(Some(inv.verb.name())));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
