use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgalqr::sim::{generate_dataset, replicate_seed, ScenarioSpec};

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("cgalqr-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        std::fs::create_dir_all(&p).unwrap();
        Scratch(p)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn cgalqr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgalqr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CGALQR_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write_scenario_csv(path: &Path, n_subjects: usize) {
    let mut s = ScenarioSpec::new(0.5, 0.05);
    s.n_subjects = n_subjects;
    let data = generate_dataset(&s, &mut replicate_seed(7, 0).rng()).unwrap();
    let mut csv = String::from("id,time,y\n");
    for subj in &data.subjects {
        for o in &subj.observations {
            csv += &format!("{},{},{}\n", subj.id, o.t, o.y);
        }
    }
    std::fs::write(path, csv).unwrap();
}

const SHORT_FIT: &str = "input = \"data.csv\"\n\
    [model]\nfamily = \"cgal\"\np0 = 0.5\nprior_preset = \"uniform_alpha\"\n\
    [model.link]\nkind = \"biphasic_short\"\nbeta3 = 3.5\nbeta4 = 0.05\n";

#[test]
fn help_lists_every_verb() {
    let o = cgalqr(&["--help"], &std::env::temp_dir());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for verb in ["fit", "predict", "diagnose", "simulate", "pdf-table", "kurtosis-table"] {
        assert!(text.contains(verb), "{verb} missing from help");
    }
    assert!(cgalqr(&["--version"], &std::env::temp_dir()).status.success());
}

#[test]
fn usage_and_config_errors_are_json() {
    let dir = Scratch::new("errors");
    let o = cgalqr(&["fit", "--no-such-flag"], &dir.0);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");

    std::fs::write(dir.0.join("bad.toml"), "[sampler]\nn_chain = 4\n").unwrap();
    let o = cgalqr(&["pdf-table", "--config", "bad.toml"], &dir.0);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["schema_version"], 1);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["error"]["verb"], "pdf-table");
    assert!(e["error"]["message"].as_str().unwrap().contains("n_chain"));

    let o = cgalqr(&["fit"], &dir.0);
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["kind"], "config");
}

#[test]
fn bad_input_reports_line_and_leaves_no_output() {
    let dir = Scratch::new("ingest");
    std::fs::write(dir.0.join("data.csv"), "id,time,y\na,0,1.5\na,1,oops\n").unwrap();
    let o = cgalqr(&["fit", "--input", "data.csv", "--output", "out"], &dir.0);
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "input");
    let msg = e["error"]["message"].as_str().unwrap();
    assert!(msg.contains("line 3") && msg.contains("oops"), "{msg}");
    assert!(!dir.0.join("out").exists());
}

#[test]
fn failed_verification_keeps_previous_outputs() {
    let dir = Scratch::new("verify");
    std::fs::write(dir.0.join("run.toml"), "[pdf_table]\nn_points = 21\n").unwrap();
    assert!(cgalqr(&["pdf-table", "--config", "run.toml", "--output", "a"], &dir.0).status.success());
    let manifest_path = dir.0.join("a/manifest.json");
    let mut m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest_path).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = "0".repeat(64).into();
    std::fs::write(dir.0.join("tampered.json"), serde_json::to_vec(&m).unwrap()).unwrap();

    let o = cgalqr(&["pdf-table", "--manifest", "tampered.json", "--output", "b", "--verify"], &dir.0);
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["kind"], "verification");
    assert!(!dir.0.join("b").exists());

    let before = std::fs::read(dir.0.join("a/pdf.csv")).unwrap();
    let o = cgalqr(&["pdf-table", "--manifest", "tampered.json", "--output", "a", "--verify"], &dir.0);
    assert!(!o.status.success());
    assert_eq!(std::fs::read(dir.0.join("a/pdf.csv")).unwrap(), before);
    let names: Vec<_> = std::fs::read_dir(dir.0.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");

    let o = cgalqr(&["pdf-table", "--manifest", "a/manifest.json", "--seed", "3"], &dir.0);
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
}

#[test]
fn output_root_env_is_honored() {
    let dir = Scratch::new("env");
    std::fs::write(dir.0.join("run.toml"), "[kurtosis_table]\nn_gamma = 2\nn_draws = 500\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cgalqr"))
        .args(["kurtosis-table", "--config", "run.toml"])
        .current_dir(&dir.0)
        .env("CGALQR_OUTPUT_ROOT", dir.0.join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(line["status"], "ok");
    assert!(dir.0.join("root/kurtosis-table/kurtosis.csv").exists());
    assert!(dir.0.join("root/kurtosis-table/manifest.json").exists());
}

#[test]
fn pdf_table_shows_heavier_cgal_tails() {
    let dir = Scratch::new("pdf");
    let o = cgalqr(&["pdf-table", "--output", "out"], &dir.0);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(dir.0.join("out/pdf.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rd
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .filter(|r: &Vec<f64>| r[0] == 0.1 && r[1] == 1.0)
        .collect();
    assert_eq!(rows.len(), 601);
    // Columns: p0, gamma, y, al_pdf, gal_pdf, cgal_pdf, ...
    let at = |y: f64| rows.iter().find(|r| (r[2] - y).abs() < 1e-9).unwrap();
    assert!(at(0.0)[5] < at(0.0)[4]);
    // cGAL above GAL in both tails, below in the centre: two crossovers.
    let above: Vec<bool> = rows.iter().map(|r| r[5] > r[4]).collect();
    assert!(above[0] && above[above.len() - 1]);
    assert_eq!(above.windows(2).filter(|w| w[0] != w[1]).count(), 2);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r[8]) && r[3] >= 0.0);
    }
}

#[test]
fn fit_converges_and_reruns_identically() {
    let dir = Scratch::new("fit");
    write_scenario_csv(&dir.0.join("data.csv"), 15);
    std::fs::write(
        dir.0.join("run.toml"),
        format!("{SHORT_FIT}[sampler]\nn_chains = 4\nn_adapt = 1000\nn_burnin = 1000\nn_iter = 4000\nthin = 4\n"),
    )
    .unwrap();
    let o = cgalqr(&["fit", "--config", "run.toml", "--output", "fit"], &dir.0);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let conv: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.0.join("fit/convergence.json")).unwrap()).unwrap();
    for p in conv["params"].as_array().unwrap() {
        let name = p["name"].as_str().unwrap();
        if name.starts_with("beta") {
            let rhat = p["rhat"].as_f64().unwrap();
            assert!(rhat < 1.05, "{name}: {rhat}");
        }
    }
    assert!(dir.0.join("fit/contamination.csv").exists());

    let o = cgalqr(&["fit", "--manifest", "fit/manifest.json", "--output", "again", "--verify"], &dir.0);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["draws.csv", "summary.csv", "convergence.json", "contamination.csv"] {
        assert_eq!(
            std::fs::read(dir.0.join("fit").join(f)).unwrap(),
            std::fs::read(dir.0.join("again").join(f)).unwrap(),
            "{f}"
        );
    }

    let o = cgalqr(&["predict", "--fit-dir", "fit", "--output", "pred"], &dir.0);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(dir.0.join("pred/trajectory.csv")).unwrap();
    for r in rd.records() {
        let v: Vec<f64> = r.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[3] <= v[2] && v[2] <= v[4]);
    }

    // A changed input is caught before anything runs.
    std::fs::write(dir.0.join("data.csv"), "id,time,y\na,0,1\n").unwrap();
    let o = cgalqr(&["predict", "--fit-dir", "fit", "--output", "pred2"], &dir.0);
    assert_eq!(stderr_json(&o)["error"]["kind"], "verification");
}
