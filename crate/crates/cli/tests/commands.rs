use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use stemrisk_cli::Cli;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stemrisk"))
}

fn data(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stemrisk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn assert_no_panic(o: &Output) {
    assert!(!stderr(o).contains("panicked"), "{}", stderr(o));
}

const SMALL_COHORT: &str = "name,lifetime_risk,lscd,s\n\
a,0.001,1e8,1e6\n\
b,0.01,1e10,1e7\n\
c,0.003,1e9,1e6\n\
d,0.05,1e11,1e8\n\
e,0.0002,1e7,1e5\n";

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_exits_zero_and_documents_every_flag() {
    let cmd = Cli::command();
    for sub in cmd.get_subcommands() {
        let name = sub.get_name();
        let o = run(&[name, "--help"]);
        assert_eq!(code(&o), 0, "{name} --help");
        let text = stdout(&o);
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(
                    text.contains(&format!("--{long}")),
                    "{name} help lacks --{long}"
                );
                if long != "help" {
                    assert!(arg.get_help().is_some(), "{name} --{long} has no help text");
                }
            }
        }
    }
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["bogus"],
        vec![],
        vec!["analyze"],
        vec![
            "simulate",
            "--u",
            "x",
            "--n",
            "1",
            "--lineages",
            "1",
            "--divisions",
            "1",
            "--seed",
            "1",
        ],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert_no_panic(&o);
    }
}

#[test]
fn analyze_reports_collapsed_cohort() {
    let o = run(&[
        "analyze",
        "--cohort",
        &data("cohort_31.csv"),
        "--collapse",
        &data("collapse_31_to_25.json"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_records"], 25);
    assert_eq!(v["figure1"]["n"], 25);
    assert_eq!(v["scores"].as_array().unwrap().len(), 25);
    assert!(v.get("radiation").is_none());
    assert!(v.get("prediction").is_none());
    assert_eq!(v["metadata"]["dataset_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let args = [
        "analyze",
        "--cohort",
        &data("cohort_31.csv"),
        "--radiation",
        &data("radiation_9.csv"),
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["radiation"]["n"], 9);
    assert_eq!(v["metadata"]["seed"], 7);
}

#[test]
fn reals_are_written_with_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = write(&dir, "c.csv", SMALL_COHORT);
    let o = run(&["analyze", "--cohort", &cohort]);
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.contains("\"coefficient\""))
        .unwrap();
    let value = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = value.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{value}");
}

#[test]
fn missing_file_exits_two_and_names_it() {
    let o = run(&["analyze", "--cohort", "/definitely/not/here.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/definitely/not/here.csv"));
    let o = run(&[
        "plot",
        "--data",
        "/no/such.csv",
        "--x",
        "log10_lscd",
        "--y",
        "log10_risk",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/no/such.csv"));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = write(&dir, "c.csv", SMALL_COHORT);
    let out = dir.path().join("missing_dir/report.json");
    let o = run(&[
        "analyze",
        "--cohort",
        &cohort,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing_dir"));
}

#[test]
fn malformed_inputs_exit_one_without_panicking() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "name,lifetime_risk,lscd\na,1.5,1e8\n",
        "name,lifetime_risk,lscd\na,abc,1e8\n",
        "name,lscd\na,1e8\n",
        "",
        "name,lifetime_risk,lscd\na,0.1,1e8\na,0.2,1e9\n",
        "\u{0}\u{1}garbage,,,\n\"unterminated",
        "name,lifetime_risk,lscd\na,0.1,1e8\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = write(&dir, &format!("bad{i}.csv"), text);
        let o = run(&["analyze", "--cohort", &path]);
        assert_eq!(code(&o), 1, "case {i}: {}", stderr(&o));
        assert_no_panic(&o);
        assert!(stderr(&o).contains("error"));
    }
    let o = run(&[
        "analyze",
        "--cohort",
        &data("cohort_31.csv"),
        "--collapse",
        &data("cohort_31.csv"),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn scores_cluster_and_radiation_commands() {
    let cohort = data("cohort_31.csv");
    let o = run(&["scores", "--cohort", &cohort]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "name,ers,rbers,cluster_kmeans,cluster_ward"
    );
    assert_eq!(text.lines().count(), 32);

    let o = run(&["cluster", "--cohort", &cohort]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",D,D")
        || l.ends_with(",R,R")
        || l.ends_with(",D,R")
        || l.ends_with(",R,D")));

    let o = run(&["radiation", "--radiation", &data("radiation_9.csv")]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ear_vs_lscd"]["p_method"], "exact_permutation");
}

#[test]
fn predict_and_analyze_with_turnovers() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = write(&dir, "c.csv", SMALL_COHORT);
    let turnovers = write(
        &dir,
        "t.csv",
        "name,turnovers\na,100\nb,200\nc,300\nd,400\ne,50\n",
    );
    let o = run(&[
        "predict",
        "--cohort",
        &cohort,
        "--turnovers",
        &turnovers,
        "--u",
        "1e-4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "name,predicted_risk,observed_risk,log10_ratio"
    );
    assert_eq!(text.lines().count(), 6);

    let drivers = write(&dir, "n.csv", "name,drivers\na,1\n");
    let o = run(&[
        "analyze",
        "--cohort",
        &cohort,
        "--turnovers",
        &turnovers,
        "--drivers",
        &drivers,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["prediction"]["entries"][0]["drivers"], 1);
    assert_eq!(v["prediction"]["entries"][1]["drivers"], 3);

    let short = write(&dir, "short.csv", "name,turnovers\na,100\n");
    let o = run(&["predict", "--cohort", &cohort, "--turnovers", &short]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("'b'") || stderr(&o).contains("b"));

    let o = run(&[
        "predict",
        "--cohort",
        &cohort,
        "--turnovers",
        &turnovers,
        "--u",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn simulate_examples() {
    let base = [
        "simulate",
        "--n",
        "2",
        "--lineages",
        "500",
        "--divisions",
        "6",
        "--seed",
        "11",
    ];
    let certain = run(&[&base[..], &["--u", "1,1"]].concat());
    assert_eq!(code(&certain), 0, "{}", stderr(&certain));
    let rows: Vec<(u64, f64)> = stdout(&certain)
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert!(rows
        .iter()
        .all(|&(t, f)| if t >= 2 { f == 1.0 } else { f == 0.0 }));

    let zero = run(&[&base[..], &["--u", "0"]].concat());
    assert_eq!(code(&zero), 0);
    assert!(stdout(&zero)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .all(|l| l.ends_with(",0")));

    let text = stdout(&certain);
    for key in [
        "# s:",
        "# u: 1,1",
        "# n: 2",
        "# lineages: 500",
        "# divisions: 6",
        "# seed: 11",
        "# generator:",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn simulate_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = run(&[
            "simulate",
            "--u",
            "0.01",
            "--n",
            "2",
            "--lineages",
            "20000",
            "--divisions",
            "300",
            "--seed",
            "5",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    for bad in [
        vec![
            "--u",
            "0.1",
            "--n",
            "1",
            "--lineages",
            "0",
            "--divisions",
            "5",
            "--seed",
            "1",
        ],
        vec![
            "--u",
            "1.5",
            "--n",
            "1",
            "--lineages",
            "5",
            "--divisions",
            "5",
            "--seed",
            "1",
        ],
        vec![
            "--u",
            "0.1",
            "--n",
            "1",
            "--lineages",
            "5",
            "--divisions",
            "5",
            "--seed",
            "1",
            "--grid",
            "9",
        ],
        vec![
            "--u",
            "0.1,0.1",
            "--n",
            "3",
            "--lineages",
            "5",
            "--divisions",
            "5",
            "--seed",
            "1",
        ],
        vec![
            "--u",
            "0.1",
            "--n",
            "0",
            "--lineages",
            "5",
            "--divisions",
            "5",
            "--seed",
            "1",
        ],
    ] {
        let o = run(&[&["simulate"][..], &bad].concat());
        assert_eq!(code(&o), 1, "{bad:?}: {}", stderr(&o));
        assert_no_panic(&o);
    }
}

#[test]
fn plot_structure() {
    let cohort = data("cohort_31.csv");
    let o = run(&[
        "plot",
        "--data",
        &cohort,
        "--x",
        "log10_lscd",
        "--y",
        "log10_risk",
        "--overlay",
        "regression_line",
    ]);
    assert_eq!(code(&o), 0);
    let svg = stdout(&o);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<circle").count(), 31);
    assert_eq!(svg.matches("<line").count(), 1);

    let o = run(&[
        "plot",
        "--data",
        &cohort,
        "--x",
        "log10_lscd",
        "--y",
        "log10_risk",
        "--overlay",
        "ers_contours",
        "--levels",
        "-5,-15,-25",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = stdout(&o);
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(svg.matches("<line").count(), 0);

    let o = run(&[
        "plot",
        "--data",
        &data("radiation_9.csv"),
        "--x",
        "log10_lscd",
        "--y",
        "ear",
        "--labels",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains(">Colon</text>"));
}

#[test]
fn plot_identity_on_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let pred = write(
        &dir,
        "p.csv",
        "name,predicted_risk,observed_risk,log10_ratio\na,1e-3,2e-3,0.3\nb,1e-5,1e-4,1\nc,0,1e-3,\n",
    );
    let o = run(&[
        "plot",
        "--data",
        &pred,
        "--x",
        "predicted_risk",
        "--y",
        "observed_risk",
        "--overlay",
        "identity_line",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = stdout(&o);
    assert_eq!(svg.matches("<circle").count(), 2);
    assert_eq!(svg.matches("<line").count(), 1);
    assert!(stderr(&o).contains("skipped"));
}

#[test]
fn plot_rejects_bad_requests() {
    let cohort = data("cohort_31.csv");
    let c = cohort.as_str();
    for args in [
        vec!["plot", "--data", c, "--x", "ear", "--y", "log10_risk"],
        vec![
            "plot",
            "--data",
            c,
            "--x",
            "log10_lscd",
            "--y",
            "log10_lscd",
        ],
        vec![
            "plot",
            "--data",
            c,
            "--x",
            "log10_lscd",
            "--y",
            "log10_risk",
            "--width",
            "0",
        ],
        vec![
            "plot",
            "--data",
            c,
            "--x",
            "s",
            "--y",
            "log10_risk",
            "--overlay",
            "ers_contours",
        ],
        vec![
            "plot",
            "--data",
            c,
            "--x",
            "log10_lscd",
            "--y",
            "log10_risk",
            "--overlay",
            "ers_contours",
            "--levels",
            "3",
        ],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert_no_panic(&o);
    }
}

#[test]
fn plot_is_byte_identical_across_runs() {
    let path = data("cohort_31.csv");
    let args = [
        "plot",
        "--data",
        &path,
        "--x",
        "log10_lscd",
        "--y",
        "log10_risk",
        "--overlay",
        "ers_contours",
        "--labels",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}
