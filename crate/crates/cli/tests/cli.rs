use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str =
    "divergence,p,sigma,L,n,d,axis,axis_value,replicate,estimate,stderr,wall_time_ms,error";

fn gssd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gssd"))
        .args(args)
        .current_dir(dir)
        .env_remove("GSSD_SEED")
        .env_remove("GSSD_FAULT_NEGATE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn estimate_prints_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &[
            "estimate",
            "--kind",
            "wasserstein",
            "--p",
            "2",
            "--sigma",
            "3",
            "-L",
            "50",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    let line = out.trim();
    assert!(line.starts_with("estimate="), "{line}");
    assert!(line.contains(" stderr="));
    assert!(line.ends_with(" L=50 sigma=3"), "{line}");
}

#[test]
fn identical_csvs_with_shared_key_give_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "1,2\n3,4\n-1,0.5\n");
    let o = gssd(
        dir.path(),
        &["estimate", "a.csv", "a.csv", "--shared-noise-key"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("estimate=0 "), "{}", stdout(&o));
}

#[test]
fn mismatched_dimensions_exit_2_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "1,2\n3,4\n");
    write(dir.path(), "b.csv", "1,2,3\n");
    let o = gssd(dir.path(), &["estimate", "a.csv", "b.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains('2') && err.contains('3'), "{err}");
}

#[test]
fn unreadable_csv_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(dir.path(), &["estimate", "missing.csv", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_inputs_conflict_with_synthetic_flags() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "1,2\n");
    let o = gssd(dir.path(), &["estimate", "a.csv", "a.csv", "--n", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flags_exit_2_for_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "estimate",
        "metric-check",
        "sweep-samples",
        "sweep-dim",
        "sweep-displacement",
        "sweep-projections",
        "sweep-noise",
    ] {
        let o = gssd(dir.path(), &[sub, "--no-such-flag"]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
        let help = gssd(dir.path(), &[sub, "--help"]);
        assert_eq!(help.status.code(), Some(0));
        let text = stdout(&help);
        for flag in [
            "--seed",
            "--sigma",
            "--projections",
            "--kind",
            "--p ",
            "--jobs",
            "--config",
        ] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(text.contains("[default: 3]"), "{sub}: {text}");
        assert!(text.contains("[env: GSSD_SEED=]"), "{sub}");
    }
}

#[test]
fn metric_check_passes_for_every_base() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["wasserstein", "sinkhorn", "mmd"] {
        let o = gssd(
            dir.path(),
            &["metric-check", "--kind", kind, "--n", "60", "-L", "8"],
        );
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stdout(&o));
        let out = stdout(&o);
        for axiom in ["symmetry", "non-negativity", "self-identity", "triangle"] {
            assert!(out.contains(&format!("{axiom}: pass")), "{kind}: {out}");
        }
    }
}

#[test]
fn metric_check_with_two_csvs_uses_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "0,0\n1,1\n2,0\n");
    write(dir.path(), "b.csv", "5,5\n6,4\n");
    let o = gssd(dir.path(), &["metric-check", "a.csv", "b.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn negated_values_fail_non_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gssd"))
        .args(["metric-check", "--n", "30", "-L", "4"])
        .current_dir(dir.path())
        .env("GSSD_FAULT_NEGATE", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("non-negativity: fail"));
    assert!(
        stderr(&o).contains("non-negativity violated"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn sweep_writes_header_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &[
            "sweep-samples",
            "-o",
            "res/out.csv",
            "--grid",
            "8,16,32",
            "--replicates",
            "2",
            "-L",
            "4",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("slope="));
    let csv = std::fs::read_to_string(dir.path().join("res/out.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(HEADER));
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("res/out.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["seed"], 0);
    assert_eq!(meta["axis"], "sample_size");
    assert!(meta["slope"].is_number() && meta["slope_r2"].is_number());
    assert!(meta["version"].is_string() && meta["scenario"].is_string());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("res")).unwrap().collect();
    assert_eq!(leftovers.len(), 2);
}

#[test]
fn desk_scale_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &[
            "sweep-samples",
            "-o",
            "s.csv",
            "--replicates",
            "1",
            "-L",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let sizes: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(sizes, ["64", "128", "256", "512", "1024", "2048", "4096"]);
}

#[test]
fn full_scale_extends_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &[
            "sweep-samples",
            "-o",
            "s.csv",
            "--paper-scale",
            "--replicates",
            "1",
            "-L",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!((last[4], last[5]), ("25000", "50"));
}

#[test]
fn reference_in_projection_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &["sweep-projections", "-o", "p.csv", "--grid", "10,50,10000"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("p.csv").exists());
}

#[test]
fn unwritable_output_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "blocker", "");
    let start = std::time::Instant::now();
    // a huge sweep would take minutes if it ran
    let o = gssd(
        dir.path(),
        &[
            "sweep-samples",
            "-o",
            "blocker/out.csv",
            "--paper-scale",
            "--replicates",
            "1000",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn timings_only_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep-noise",
        "--sizes",
        "8,16,32",
        "--grid",
        "0,1",
        "--replicates",
        "1",
        "-L",
        "2",
    ];
    let plain = gssd(dir.path(), &[&args[..], &["-o", "a.csv"]].concat());
    assert_eq!(plain.status.code(), Some(0));
    let timed = gssd(
        dir.path(),
        &[&args[..], &["-o", "b.csv", "--record-timings"]].concat(),
    );
    assert_eq!(timed.status.code(), Some(0));
    let column = |name: &str| -> Vec<String> {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(11).unwrap().to_string())
            .collect()
    };
    assert!(column("a.csv").iter().all(|v| v.is_empty()));
    assert!(column("b.csv").iter().all(|v| v.parse::<f64>().is_ok()));
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "run.conf",
        "# defaults\nsigma = 1.5\nprojections = 7\nseed = 3\n",
    );
    let est = |extra: &[&str], env_seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_gssd"));
        c.arg("estimate")
            .args(extra)
            .current_dir(dir.path())
            .env_remove("GSSD_SEED");
        if let Some(s) = env_seed {
            c.env("GSSD_SEED", s);
        }
        stdout(&c.output().unwrap())
    };
    let from_file = est(&["--config", "run.conf"], None);
    assert!(from_file.ends_with("L=7 sigma=1.5\n"), "{from_file}");
    let flag_wins = est(&["--config", "run.conf", "--sigma", "2"], None);
    assert!(flag_wins.ends_with("L=7 sigma=2\n"), "{flag_wins}");
    // file seed 3 beats the environment, flag beats both
    assert_eq!(est(&["--config", "run.conf"], Some("9")), from_file);
    assert_eq!(
        est(&["--config", "run.conf", "--seed", "3"], Some("9")),
        from_file
    );
    assert_ne!(
        est(&["--config", "run.conf", "--seed", "4"], None),
        from_file
    );
    assert_eq!(est(&["--seed", "9"], None), est(&[], Some("9")));

    write(dir.path(), "bad.conf", "no_such_flag = 1\n");
    let o = gssd(dir.path(), &["estimate", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn displacement_with_shared_key_is_zero_at_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(
        dir.path(),
        &[
            "sweep-displacement",
            "-o",
            "d.csv",
            "--n",
            "50",
            "--replicates",
            "1",
            "-L",
            "5",
            "--shared-noise-key",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("argmin_wasserstein=2"));
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let at_anchor = csv
        .lines()
        .find(|l| l.split(',').nth(7) == Some("2"))
        .unwrap();
    assert_eq!(at_anchor.split(',').nth(9), Some("0"));
}

#[test]
fn jobs_zero_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gssd(dir.path(), &["estimate", "--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
