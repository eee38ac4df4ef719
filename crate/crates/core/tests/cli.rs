use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use travelwave::cli::output::{read_csv, Summary};

fn travelwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_travelwave")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    travelwave(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Every cell outside the first (integer) column carries 17 significant digits.
fn assert_full_precision(path: &Path, skip: usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.chars().next().unwrap().is_ascii_alphabetic(), "{}: header {header}", path.display());
    let mut rows = 0;
    for line in lines {
        for cell in line.split(',').skip(skip).filter(|c| !c.is_empty()) {
            let mantissa = cell.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{}: {cell}", path.display());
            assert!(cell.parse::<f64>().is_ok());
        }
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn zero_epoch_run_writes_a_complete_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = travelwave(&["train", "--preset", "ks-eps0", "--epochs", "0", "--seed", "3", "--out", p(&out), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "trace.csv", "checkpoint.bin", "profiles.csv", "summary.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let s = Summary::read(&out.join("summary.toml")).unwrap();
    assert_eq!(s.status, "completed");
    assert_eq!(s.epochs, 0);
    assert_eq!(s.exact_speed, Some(1.0));
    let config = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(config.contains("seed = 3"));
    assert_full_precision(&out.join("trace.csv"), 1);
    assert_full_precision(&out.join("profiles.csv"), 0);
    assert_eq!(read_csv(&out.join("profiles.csv")).unwrap().header, ["z", "u", "u_z", "v", "v_z"]);
}

#[test]
fn eval_reproduces_profiles_and_rejects_bad_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&["train", "--preset", "ac", "--epochs", "3", "--out", p(&run), "--quiet"]), 0);
    let ckpt = run.join("checkpoint.bin");

    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    assert_eq!(code(&["eval", p(&ckpt), "--out", p(&e1), "--quiet"]), 0);
    assert_eq!(code(&["eval", p(&ckpt), "--out", p(&e2), "--svg", "--quiet"]), 0);
    let first = fs::read(e1.join("profiles.csv")).unwrap();
    assert_eq!(first, fs::read(e2.join("profiles.csv")).unwrap());
    // the default grid is the one written at the end of training
    assert_eq!(first, fs::read(run.join("profiles.csv")).unwrap());
    assert!(e2.join("profiles.svg").is_file());

    let grid = dir.path().join("grid");
    assert_eq!(code(&["eval", p(&ckpt), "--grid", "-1:1:5", "--out", p(&grid), "--quiet"]), 0);
    assert_eq!(read_csv(&grid.join("profiles.csv")).unwrap().column("z").unwrap(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
    assert_eq!(code(&["eval", p(&ckpt), "--grid", "1:0", "--quiet"]), 2);

    // a config that differs from the training one fails the digest check
    let other = write(dir.path(), "other.toml", &fs::read_to_string(run.join("config.toml")).unwrap().replace("alpha = 0.9", "alpha = 0.8"));
    assert_eq!(code(&["eval", p(&ckpt), "--config", &other, "--quiet"]), 2);

    let mut bytes = fs::read(&ckpt).unwrap();
    bytes[0] ^= 0xff;
    let bad = dir.path().join("bad.bin");
    fs::write(&bad, &bytes).unwrap();
    assert_eq!(code(&["eval", p(&bad), "--config", p(&run.join("config.toml")), "--quiet"]), 4);
    let short = dir.path().join("short.bin");
    fs::write(&short, &fs::read(&ckpt).unwrap()[..20]).unwrap();
    assert_eq!(code(&["eval", p(&short), "--config", p(&run.join("config.toml")), "--quiet"]), 4);
    assert_eq!(code(&["eval", p(&dir.path().join("none.bin")), "--quiet"]), 4);
}

#[test]
fn invalid_configurations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let negative = write(
        dir.path(),
        "neg.toml",
        "label = \"neg\"\n[model]\nsystem = \"ks\"\nepsilon = 0.0\ndiffusion = 2.0\nchi = 0.5\nboundary = { u_minus = -1.0, v_minus = -1.0, u_plus = 1.0, v_plus = 0.0 }\n",
    );
    let o = travelwave(&["train", "--config", &negative, "--out", p(&dir.path().join("x")), "--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("u_minus"), "{}", String::from_utf8_lossy(&o.stderr));

    let empty = write(dir.path(), "empty.toml", "base = \"ks-eps0\"\n[sweep]\n\"training.seed\" = []\n");
    assert_eq!(code(&["sweep", "--config", &empty, "--quiet"]), 2);
    let unknown = write(dir.path(), "unknown.toml", "base = \"ks-eps0\"\n[training]\nlearning_rate = 1.0\n");
    assert_eq!(code(&["train", "--config", &unknown, "--quiet"]), 2);
    let broken = write(dir.path(), "broken.toml", "[model\n");
    assert_eq!(code(&["train", "--config", &broken, "--quiet"]), 2);
    assert_eq!(code(&["oracle", "--preset", "missing", "--quiet"]), 2);
    assert_eq!(code(&["train", "--config", p(&dir.path().join("absent.toml")), "--quiet"]), 4);
}

#[test]
fn sweep_writes_one_run_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = write(dir.path(), "s.toml", "base = \"ks-eps0\"\n[training]\nepochs = 2\n[sweep]\n\"training.use_bc\" = [true, false]\n");
    assert_eq!(code(&["sweep", "--config", &cfg, "--out", p(&out), "--quiet"]), 0);
    assert!(out.join("point-000/summary.toml").is_file());
    assert!(out.join("point-001/summary.toml").is_file());
    assert!(fs::read_to_string(out.join("point-001/config.toml")).unwrap().contains("use_bc = false"));
    let table = read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(table.columns[0].len(), 2);
}

#[test]
fn symmetric_competition_front_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle");
    let cfg = write(dir.path(), "lv.toml", "label = \"lv\"\n[model]\nsystem = \"lv\"\nb = 2.0\nh = 2.0\nk = 2.0\nd = 2.0\n");
    let o = travelwave(&["oracle", "--config", &cfg, "--out", p(&out), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read_csv(&out.join("oracle.csv")).unwrap();
    let s = table.column("oracle_speed").unwrap()[0];
    assert!(s.abs() < 0.01, "front speed {s}");
}

#[test]
fn plot_renders_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&["train", "--preset", "lv-pos", "--epochs", "4", "--out", p(&run), "--quiet"]), 0);
    let plots = dir.path().join("plots");
    assert_eq!(code(&["plot", p(&run.join("trace.csv")), "--out", p(&plots), "--quiet"]), 0);
    let svg = fs::read_to_string(plots.join("trace_speed.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(plots.join("trace_loss.svg").is_file());
    assert_eq!(code(&["plot", p(&run.join("profiles.csv")), "--y", "u,nope", "--out", p(&plots), "--quiet"]), 2);
}
