//! Verb implementations. Each returns its output files in memory; staging,
//! validation and the manifest are handled by the caller.

use std::path::Path;

use cgalqr::diagnostics::{
    lstat_kurtosis, sample_skewness_kurtosis, write_influence_csv, write_loo_csv, write_residual_csv,
    DiagnosticsReport, KL_EXPORT_CAP,
};
use cgalqr::dist::{al_cdf, al_logpdf, cgal_cdf, cgal_logpdf, cgal_sample, gal_cdf, gal_logpdf, gal_sample, gamma_bounds};
use cgalqr::mcmc::{posterior_summary, predict_quantile_trajectory, run_sampler, PosteriorDraws, RHAT_THRESHOLD};
use cgalqr::model::Model;
use cgalqr::sim::{run_scenario, summarize_tables, TABLE_HEADER};
use cgalqr::{AlParams, CgalParams, Family, GalParams, QuantileLevel, RngStream};
use serde_json::json;

use crate::config::{RunConfig, Verb};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::manifest::{FileRecord, Manifest};
use crate::output::{OutputFile, Schema};

pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub inputs: Vec<FileRecord>,
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

/// Builds a CSV in memory.
fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(vec![]);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.into_inner().map_err(|e| CliError::new(crate::error::ErrorKind::Io, e.to_string()))
}

fn with_writer(write: impl FnOnce(&mut Vec<u8>) -> cgalqr::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = vec![];
    write(&mut buf)?;
    Ok(buf)
}

fn section<'a, T>(v: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    v.as_ref()
        .ok_or_else(|| CliError::config(format!("resolved config lacks {name}")))
}

pub fn execute(verb: Verb, cfg: &RunConfig) -> CliResult<RunOutput> {
    match verb {
        Verb::Fit => fit(cfg),
        Verb::Predict => predict(cfg),
        Verb::Diagnose => diagnose(cfg),
        Verb::Simulate => simulate(cfg),
        Verb::PdfTable => pdf_table(cfg),
        Verb::KurtosisTable => kurtosis_table(cfg),
    }
}

fn fit(cfg: &RunConfig) -> CliResult<RunOutput> {
    let input = section(&cfg.input, "input")?;
    let data = ingest_csv(input, cfg.cd4_scale)?;
    let spec = section(&cfg.model, "model")?.to_spec()?;
    let model = Model::new(spec.clone(), &data)?;
    let sampler = section(&cfg.sampler, "sampler")?;
    let draws = run_sampler(&model, sampler)?;
    let summary = posterior_summary(&draws)?;
    let conv = summary.convergence();

    let mut header: Vec<String> = vec!["chain".into(), "iteration".into()];
    header.extend(draws.names.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut files = vec![
        OutputFile::new("draws.csv", Schema::csv("draws", &header), with_writer(|w| draws.write_csv(w))?),
        OutputFile::new(
            "summary.csv",
            Schema::csv("summary", &["parameter", "median", "hpd_lo", "hpd_hi", "rhat", "ess"]),
            with_writer(|w| summary.write_csv(w))?,
        ),
    ];
    let acceptance: Vec<_> = draws
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, ch)| {
            ch.acceptance
                .iter()
                .map(move |(block, rate)| json!({"chain": c, "block": block, "rate": rate}))
        })
        .collect();
    files.push(OutputFile::json(
        "convergence.json",
        "convergence",
        &json!({
            "schema_version": crate::SCHEMA_VERSION,
            "family": spec.family,
            "p0": spec.p0.get(),
            "link": spec.link.name(),
            "n_subjects": model.n_subjects(),
            "n_obs": model.n_obs(),
            "n_chains": draws.n_chains(),
            "draws_per_chain": draws.n_per_chain(),
            "rhat_threshold": RHAT_THRESHOLD,
            "max_rhat": conv.max_rhat(),
            "all_converged": conv.all_converged(),
            "params": conv.params,
            "acceptance": acceptance,
        }),
    )?);
    let probs = draws.contamination_prob();
    if !probs.is_empty() {
        let mut rows = vec![];
        let mut k = 0;
        for i in 0..model.n_subjects() {
            for (j, (t, y)) in model.times(i).iter().zip(model.responses(i)).enumerate() {
                rows.push(vec![model.subject_id(i).to_string(), j.to_string(), f(*t), f(*y), f(probs[k])]);
                k += 1;
            }
        }
        let cols = ["subject", "index", "time", "y", "contamination_prob"];
        files.push(OutputFile::new("contamination.csv", Schema::csv("contamination", &cols), csv_bytes(&cols, rows)?));
    }
    Ok(RunOutput {
        files,
        inputs: vec![FileRecord::of(input)?],
    })
}

/// A finished fit reloaded from its output directory.
struct LoadedFit {
    model: Model,
    draws: PosteriorDraws,
    inputs: Vec<FileRecord>,
}

fn load_fit(dir: &Path) -> CliResult<LoadedFit> {
    let m = Manifest::load_dir(dir)?;
    if m.verb != Verb::Fit {
        return Err(CliError::config(format!("{}: manifest is for '{}', not a fit", dir.display(), m.verb.name())));
    }
    for inp in &m.inputs {
        inp.check()?;
    }
    let cfg = &m.config;
    let data = ingest_csv(section(&cfg.input, "input")?, cfg.cd4_scale)?;
    let spec = section(&cfg.model, "model")?.to_spec()?;
    let model = Model::new(spec.clone(), &data)?;
    let rec = m
        .output("draws.csv")
        .ok_or_else(|| CliError::input(format!("{}: fit produced no draws", dir.display())))?;
    let draws_path = dir.join(&rec.file);
    let draws_file = FileRecord::of(&draws_path)?;
    if draws_file.sha256 != rec.sha256 {
        return Err(CliError::new(
            crate::error::ErrorKind::Verification,
            format!("{} does not match its manifest", draws_path.display()),
        ));
    }
    let ids = (0..model.n_subjects()).map(|i| model.subject_id(i).to_string()).collect();
    let file = std::fs::File::open(&draws_path)?;
    let draws = PosteriorDraws::read_csv(file, spec.family, spec.p(), spec.d(), ids)?;
    Ok(LoadedFit {
        model,
        draws,
        inputs: vec![FileRecord::of(&dir.join(crate::manifest::MANIFEST_FILE))?, draws_file],
    })
}

fn predict(cfg: &RunConfig) -> CliResult<RunOutput> {
    let fit = load_fit(section(&cfg.fit_dir, "fit_dir")?)?;
    let p = section(&cfg.predict, "predict")?;
    let traj = predict_quantile_trajectory(&fit.draws, fit.model.spec(), &p.schedule, (p.cd4_intercept, p.cd4_slope))?;
    let cols = ["time", "cd4", "median", "hpd_lo", "hpd_hi"];
    let rows = traj
        .iter()
        .map(|t| vec![f(t.t), f(t.cd4), f(t.median), f(t.hpd_lo), f(t.hpd_hi)]);
    Ok(RunOutput {
        files: vec![OutputFile::new("trajectory.csv", Schema::csv("trajectory", &cols), csv_bytes(&cols, rows)?)],
        inputs: fit.inputs,
    })
}

fn diagnose(cfg: &RunConfig) -> CliResult<RunOutput> {
    let fit = load_fit(section(&cfg.fit_dir, "fit_dir")?)?;
    let d = section(&cfg.diagnose, "diagnose")?;
    let seed = section(&cfg.seed, "seed")?;
    let rep = DiagnosticsReport::compute(&fit.model, &fit.draws, d.n_sims, RngStream::new(*seed, 0))?;
    let model = &fit.model;
    let flagged: Vec<_> = rep
        .influence
        .iter()
        .filter(|r| r.influential)
        .map(|r| json!({"subject": r.subject, "index": r.index, "time": r.time, "kl": r.kl.min(KL_EXPORT_CAP)}))
        .collect();
    let summary = json!({
        "schema_version": crate::SCHEMA_VERSION,
        "family": model.spec().family,
        "n_draws": fit.draws.n_total(),
        "loo": {
            "elpd": rep.loo.elpd,
            "looic": rep.loo.looic,
            "se_elpd": rep.loo.se_elpd,
            "p_loo": rep.loo.p_loo,
            "n_high_k": rep.loo.n_high_k,
        },
        "residuals": {
            "n_sims": rep.residuals.n_sims,
            "ks_statistic": rep.residuals.ks.statistic,
            "ks_p_value": rep.residuals.ks.p_value,
            "dispersion_ratio": rep.residuals.dispersion_ratio,
            "p_dispersion": rep.residuals.p_dispersion,
            "p_outlier": rep.residuals.p_outlier,
        },
        "influence": {
            "kl_threshold": cgalqr::diagnostics::kl_threshold(),
            "n_influential": flagged.len(),
            "influential": flagged,
        },
    });
    let files = vec![
        OutputFile::new(
            "influence.csv",
            Schema::csv("influence", &["subject", "index", "time", "kl", "calibration", "influential"]),
            with_writer(|w| write_influence_csv(&rep.influence, w))?,
        ),
        OutputFile::new(
            "loo.csv",
            Schema::csv("loo", &["subject", "index", "time", "elpd", "pareto_k"]),
            with_writer(|w| write_loo_csv(model, &rep.loo, w))?,
        ),
        OutputFile::new(
            "residuals.csv",
            Schema::csv("residuals", &["subject", "index", "time", "y", "residual"]),
            with_writer(|w| write_residual_csv(model, &rep.residuals, w))?,
        ),
        OutputFile::json("diagnostics.json", "diagnostics", &summary)?,
    ];
    Ok(RunOutput {
        files,
        inputs: fit.inputs,
    })
}

fn simulate(cfg: &RunConfig) -> CliResult<RunOutput> {
    let sampler = section(&cfg.sampler, "sampler")?;
    let seed = *section(&cfg.seed, "seed")?;
    let mut tables = vec![];
    let mut reps = vec![];
    for s in &cfg.scenarios {
        // Every scenario uses the same master seed, so scenarios share their
        // random-effect and noise streams.
        let res = run_scenario(s, sampler, seed)?;
        for fo in &res.fits {
            let base = vec![f(s.p0), f(s.alpha_true), fo.replicate.to_string(), fo.family.name().to_string()];
            let status = vec![f(fo.max_rhat), fo.refit.to_string(), fo.flagged.to_string()];
            if let Some(e) = &fo.error {
                let mut row = base.clone();
                row.extend(["".into(), "".into(), "".into(), "".into(), "".into()]);
                row.extend(status.clone());
                row.push(e.clone());
                reps.push(row);
            }
            for p in &fo.params {
                let mut row = base.clone();
                row.extend([p.name.clone(), f(p.truth), f(p.median), f(p.hpd_lo), f(p.hpd_hi)]);
                row.extend(status.clone());
                row.push(String::new());
                reps.push(row);
            }
        }
        tables.push(res.table);
    }
    let table = summarize_tables(tables);
    let count_cols = ["p0", "alpha", "Model", "replicates", "failed", "refit", "flagged"];
    let counts = table.counts.iter().map(|c| {
        vec![
            f(c.p0),
            f(c.alpha),
            c.model.clone(),
            c.replicates.to_string(),
            c.failed.to_string(),
            c.refit.to_string(),
            c.flagged.to_string(),
        ]
    });
    let rep_cols = [
        "p0", "alpha", "replicate", "Model", "Parameter", "True", "median", "hpd_lo", "hpd_hi", "max_rhat", "refit",
        "flagged", "error",
    ];
    Ok(RunOutput {
        files: vec![
            OutputFile::new("performance.csv", Schema::csv("performance", &TABLE_HEADER), with_writer(|w| table.write_csv(w))?),
            OutputFile::new(
                "performance.md",
                Schema::Text { id: "performance-markdown" },
                table.to_markdown().into_bytes(),
            ),
            OutputFile::new("fit_counts.csv", Schema::csv("fit-counts", &count_cols), csv_bytes(&count_cols, counts)?),
            OutputFile::new("replicates.csv", Schema::csv("replicates", &rep_cols), csv_bytes(&rep_cols, reps)?),
        ],
        inputs: vec![],
    })
}

fn pdf_table(cfg: &RunConfig) -> CliResult<RunOutput> {
    let p = section(&cfg.pdf_table, "pdf_table")?;
    let cols = ["p0", "gamma", "y", "al_pdf", "gal_pdf", "cgal_pdf", "al_cdf", "gal_cdf", "cgal_cdf"];
    let mut rows = vec![];
    for panel in &p.panels {
        let level = QuantileLevel::new(panel.p0)?;
        let al = AlParams::new(p.mu, p.sigma, level)?;
        let gal = GalParams::new(p.mu, p.sigma, panel.gamma, level)?;
        let cgal = CgalParams::new(gal, p.alpha, p.tau0)?;
        for k in 0..p.n_points {
            let y = p.y_min + (p.y_max - p.y_min) * k as f64 / (p.n_points - 1) as f64;
            rows.push(vec![
                f(panel.p0),
                f(panel.gamma),
                f(y),
                f(al_logpdf(y, &al).exp()),
                f(gal_logpdf(y, &gal).exp()),
                f(cgal_logpdf(y, &cgal).exp()),
                f(al_cdf(y, &al)),
                f(gal_cdf(y, &gal)?),
                f(cgal_cdf(y, &cgal)?),
            ]);
        }
    }
    Ok(RunOutput {
        files: vec![OutputFile::new("pdf.csv", Schema::csv("pdf", &cols), csv_bytes(&cols, rows)?)],
        inputs: vec![],
    })
}

fn kurtosis_table(cfg: &RunConfig) -> CliResult<RunOutput> {
    let k = section(&cfg.kurtosis_table, "kurtosis_table")?;
    let seed = *section(&cfg.seed, "seed")?;
    let cols = ["p0", "gamma", "Model", "skewness", "kurtosis", "lkurt_left", "lkurt_right"];
    let mut rows = vec![];
    let mut stream = 0u64;
    for &p0 in &k.p0 {
        let level = QuantileLevel::new(p0)?;
        let (lo, hi) = gamma_bounds(level);
        for g in 0..k.n_gamma {
            let gamma = lo + (hi - lo) * (g + 1) as f64 / (k.n_gamma + 1) as f64;
            let gal = GalParams::new(0.0, 1.0, gamma, level)?;
            let cgal = CgalParams::new(gal, k.alpha, k.tau0)?;
            for family in [Family::Gal, Family::Cgal] {
                let mut rng = RngStream::new(seed, stream).rng();
                stream += 1;
                let x: Vec<f64> = (0..k.n_draws)
                    .map(|_| match family {
                        Family::Cgal => cgal_sample(&cgal, &mut rng),
                        _ => gal_sample(&gal, &mut rng),
                    })
                    .collect();
                let (skew, kurt) = sample_skewness_kurtosis(&x)?;
                let (left, right) = lstat_kurtosis(&x)?;
                rows.push(vec![f(p0), f(gamma), family.name().into(), f(skew), f(kurt), f(left), f(right)]);
            }
        }
    }
    Ok(RunOutput {
        files: vec![OutputFile::new("kurtosis.csv", Schema::csv("kurtosis", &cols), csv_bytes(&cols, rows)?)],
        inputs: vec![],
    })
}
