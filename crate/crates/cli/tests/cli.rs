use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const REFERENCE: &str = "name,female,male\n\
Ann,500,0\n\
Bob,0,400\n\
Kim,300,200\n\
Lee,100,300\n\
Zoë,150,100\n\
Ugo,20,80\n\
Rare,3,2\n";

fn gendermix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gendermix"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        ws.write("raw.csv", REFERENCE);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) {
        fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    /// Ingest the raw reference with the given extra flags.
    fn ingest(&self, output: &str, extra: &[&str]) -> Output {
        let (input, out) = (self.arg("raw.csv"), self.arg(output));
        let mut args = vec!["ingest", "--input", &input, "--output", &out];
        args.extend_from_slice(extra);
        gendermix(&args)
    }
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn ingest_writes_a_sorted_canonical_table() {
    let ws = Workspace::new();
    let out = ws.ingest("ref.csv", &["--min-count", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        ws.read("ref.csv"),
        "name,female,male\nann,500,0\nbob,0,400\nkim,300,200\nlee,100,300\nrare,3,2\nugo,20,80\nzoe,150,100\n"
    );
    let meta = json(&out);
    assert_eq!(meta["individuals"], 2155);
    assert_eq!(meta["config"]["args"]["min_count"], 0);
    assert!(ws.path("ref.csv.meta.json").exists());

    // the exported table ingests back to the same bytes
    let (input, out2) = (ws.arg("ref.csv"), ws.arg("again.csv"));
    let out = gendermix(&[
        "ingest",
        "--input",
        &input,
        "--output",
        &out2,
        "--min-count",
        "0",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(ws.read("again.csv"), ws.read("ref.csv"));
}

#[test]
fn default_min_count_drops_rare_names() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.ingest("ref.csv", &[])), 0);
    let text = ws.read("ref.csv");
    assert!(!text.contains("rare"));
    assert!(text.contains("ugo,20,80"));
    let meta: serde_json::Value = serde_json::from_str(&ws.read("ref.csv.meta.json")).unwrap();
    assert_eq!(meta["min_count_threshold"], 100);
}

#[test]
fn last_letter_tables_have_at_most_26_rows() {
    let ws = Workspace::new();
    let mut text = String::from("name,female,male\n");
    for i in 0..200u32 {
        let a = (b'a' + (i % 26) as u8) as char;
        let b = (b'a' + ((i * 7) % 26) as u8) as char;
        let c = (b'a' + (i / 26) as u8) as char;
        text.push_str(&format!("{a}{c}x{b},{},{}\n", i + 1, 200 - i));
    }
    ws.write("raw.csv", &text);
    let out = ws.ingest("last.csv", &["--letters", "last", "--min-count", "0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(data_rows(&ws.path("last.csv")), 26);
    assert_eq!(json(&out)["mode"], "last-letter");
}

#[test]
fn merge_pools_tables_and_rejects_mixed_modes() {
    let ws = Workspace::new();
    ws.ingest("a.csv", &["--min-count", "0"]);
    ws.write("raw.csv", "name,female,male\nann,5,5\nnew,1,0\n");
    ws.ingest("b.csv", &["--min-count", "0"]);
    ws.write("raw.csv", "name,female,male\nbob,10,0\n");
    ws.ingest("c.csv", &["--min-count", "0"]);

    let (a, b, c, all) = (
        ws.arg("a.csv"),
        ws.arg("b.csv"),
        ws.arg("c.csv"),
        ws.arg("all.csv"),
    );
    let out = gendermix(&[
        "merge", "--input", &a, "--input", &b, "--input", &c, "--output", &all,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = ws.read("all.csv");
    assert!(text.contains("ann,505,5\n"));
    assert!(text.contains("bob,10,400\n"));
    assert!(text.contains("new,1,0\n"));

    let single = ws.arg("single.csv");
    assert_eq!(
        code(&gendermix(&["merge", "--input", &a, "--output", &single])),
        0
    );
    assert_eq!(ws.read("single.csv"), ws.read("a.csv"));

    ws.write("raw.csv", REFERENCE);
    ws.ingest("init.csv", &["--letters", "initial", "--min-count", "0"]);
    let init = ws.arg("init.csv");
    let out = gendermix(&[
        "merge",
        "--input",
        &format!("{a},{init}"),
        "--output",
        &single,
    ]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn estimate_counts_exactly_on_gendered_names() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("t.csv", "name,count\nAnn,3\nbob,1\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("t.csv"));
    for method in ["m0", "m1:0.9", "m2:0.9", "ggem"] {
        let out = gendermix(&[
            "estimate",
            "--reference",
            &r,
            "--target",
            &t,
            "--method",
            method,
        ]);
        assert_eq!(code(&out), 0, "{method}");
        let v = json(&out);
        let beta = v["estimate"]["beta"].as_f64().unwrap();
        assert!((beta - 0.75).abs() < 1e-11, "{method}: {beta}");
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["config"]["args"]["seed"], 0);
    }
}

#[test]
fn estimate_clamps_one_signed_targets() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("t.csv", "name,count\nann,3\nkim,5\nzoe,2\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("t.csv"));
    let out = gendermix(&["estimate", "--reference", &r, "--target", &t]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["estimate"]["beta"], 1.0);
    assert_eq!(v["estimate"]["clamped"], true);
    assert_eq!(v["estimate"]["alpha"], "inf");
}

#[test]
fn estimate_without_usable_names_exits_3() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("t.csv", "name,count\nkim,3\nzoe,4\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("t.csv"));
    let out = gendermix(&[
        "estimate",
        "--reference",
        &r,
        "--target",
        &t,
        "--method",
        "m2",
        "--cutoff",
        "0.9",
    ]);
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no names pass cutoff"));

    ws.write("u.csv", "name,count\nnobody,3\n");
    let u = ws.arg("u.csv");
    assert_eq!(
        code(&gendermix(&["estimate", "--reference", &r, "--target", &u])),
        3
    );
}

#[test]
fn estimate_reads_name_lists_and_letters() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("names.txt", "Ann\nann\nBob\n\nLee\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("names.txt"));
    let out = gendermix(&[
        "estimate",
        "--reference",
        &r,
        "--target",
        &t,
        "--target-format",
        "list",
        "--method",
        "m0",
        "--csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("method,cutoff,gamma_star,beta"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "method0");
    assert_eq!(row[3], "0.5625");

    let out = gendermix(&[
        "estimate",
        "--reference",
        &r,
        "--target",
        &t,
        "--target-format",
        "list",
        "--letters",
        "initial",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["reference"]["mode"], "initial-letter");
}

#[test]
fn estimate_bootstrap_and_partial_blocks() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("t.csv", "name,count\nann,30\nbob,40\nkim,20\nlee,10\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("t.csv"));
    let out = gendermix(&[
        "estimate",
        "--reference",
        &r,
        "--target",
        &t,
        "--bootstrap",
        "150",
        "--seed",
        "3",
        "--partial",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let b = &v["estimate"]["bootstrap"];
    assert_eq!(b["repeats"], 150);
    assert_eq!(b["seed"], 3);
    assert!(b["low"].as_f64().unwrap() <= v["estimate"]["beta"].as_f64().unwrap());
    assert_eq!(v["partial"].as_array().unwrap().len(), 10);

    let out = gendermix(&[
        "estimate",
        "--reference",
        &r,
        "--target",
        &t,
        "--bootstrap",
        "10",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn contract_errors_exit_2() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    ws.write("t.csv", "name,count\nann,3\n");
    let (r, t) = (ws.arg("ref.csv"), ws.arg("t.csv"));
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "estimate",
            "--reference",
            &r,
            "--target",
            &t,
            "--method",
            "m1",
        ],
        vec![
            "estimate",
            "--reference",
            &r,
            "--target",
            &t,
            "--method",
            "m1",
            "--cutoff",
            "0.3",
        ],
        vec![
            "estimate",
            "--reference",
            &r,
            "--target",
            &t,
            "--gamma-star",
            "1",
        ],
        vec!["estimate", "--reference", "missing.csv", "--target", &t],
        vec!["estimate", "--reference", &t, "--target", &t],
        vec!["bench", "--build-ref", &r, "--repeats", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = gendermix(&args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn simulate_writes_target_truth_and_params() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    let (r, o) = (ws.arg("ref.csv"), ws.arg("pop.csv"));
    let out = gendermix(&[
        "simulate",
        "--reference",
        &r,
        "--beta0",
        "0.4",
        "--size",
        "1000",
        "--seed",
        "7",
        "--output",
        &o,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["beta_true"], 0.4);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["female"], 400.0);
    assert!(ws.read("pop.csv").starts_with("name,count\n"));
    assert!(ws
        .read("pop.truth.csv")
        .starts_with("name,true_female,true_male\n"));
    assert_eq!(
        ws.read("pop.params.json"),
        String::from_utf8(out.stdout).unwrap()
    );

    let total: u64 = ws
        .read("pop.csv")
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1000);
}

#[test]
fn bench_uses_the_52_point_grid_by_default() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    let (r, o) = (ws.arg("ref.csv"), ws.arg("bench.csv"));
    let out = gendermix(&[
        "bench",
        "--build-ref",
        &r,
        "--methods",
        "ggem",
        "--repeats",
        "2",
        "--size",
        "200",
        "--format",
        "csv",
        "--output",
        &o,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(data_rows(&ws.path("bench.csv")), 52);
    let meta: serde_json::Value = serde_json::from_str(&ws.read("bench.csv.meta.json")).unwrap();
    assert_eq!(meta["config"]["args"]["repeats"], 2);
}

#[test]
fn bench_mismatch_experiment_reports_partial_coverage() {
    let ws = Workspace::new();
    ws.ingest("build.csv", &[]);
    ws.write(
        "raw.csv",
        "name,female,male\nann,100,0\nbob,0,100\nkim,60,40\n",
    );
    ws.ingest("analyze.csv", &["--min-count", "0"]);
    ws.write("grid.txt", "0.25\n0.5 # balanced\n0.75\n");
    let (b, a, g) = (
        ws.arg("build.csv"),
        ws.arg("analyze.csv"),
        ws.arg("grid.txt"),
    );
    let out = gendermix(&[
        "bench",
        "--build-ref",
        &b,
        "--analyze-ref",
        &a,
        "--methods",
        "m0,ggem",
        "--grid",
        &g,
        "--repeats",
        "5",
        "--size",
        "300",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let cells = v["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    let frac = cells[0]["names_matched_frac"].as_f64().unwrap();
    assert!(frac > 0.0 && frac < 1.0);
    assert_eq!(v["provenance"]["config"]["reference_analyze"], a.as_str());
    assert_eq!(v["provenance"]["config"]["seed"], 0);
}

#[test]
fn figure_presets_emit_plot_ready_csv() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    let r = ws.arg("ref.csv");

    let out = gendermix(&[
        "bench",
        "--build-ref",
        &r,
        "--figure",
        "fig3",
        "--repeats",
        "2",
        "--size",
        "200",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("beta0,method,cutoff,mean_beta"));
    assert_eq!(text.lines().count(), 1 + 52 * 7);

    let out = gendermix(&[
        "bench",
        "--build-ref",
        &r,
        "--figure",
        "fig4",
        "--repeats",
        "3",
        "--size",
        "500",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("beta0,method,low,high,mean_beta_partial"));
    assert_eq!(text.lines().count(), 1 + 2 * 10);

    let out = gendermix(&[
        "bench",
        "--build-ref",
        &r,
        "--figure",
        "fig6",
        "--repeats",
        "2",
        "--size",
        "200",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().lines().count(),
        1 + 52 * 2
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let ws = Workspace::new();
    ws.ingest("ref.csv", &[]);
    let r = ws.arg("ref.csv");
    ws.write("grid.txt", "0.3\n");
    ws.write(
        "run.cfg",
        &format!(
            "# bench defaults\nbuild_ref = {r}\nmethods = m0,ggem\ngrid = {}\nrepeats = 3\nsize = 100\nformat = csv\n",
            ws.arg("grid.txt")
        ),
    );
    let cfg = ws.arg("run.cfg");
    let out = gendermix(&["--config", &cfg, "bench"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);

    let out = gendermix(&["--config", &cfg, "bench", "--methods", "ggem"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);

    ws.write("bad.cfg", "no_such_flag = 1\n");
    let bad = ws.arg("bad.cfg");
    assert_eq!(code(&gendermix(&["--config", &bad, "bench"])), 2);
}
