use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gcmsim::report::{read_data, read_summary};

fn gcmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcmsim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
base_seed = 11
reps = 4
[grid]
n = [60]
rates = [0.0, 0.3]
mechanisms = ["MAR", "MNAR"]
methods = ["FIML", "RF", "KNN"]
[forest]
ntree = 10
max_iter = 3
"#;

#[test]
fn generate_complete_has_no_empty_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = [50]\nrates = [0.0]\nmechanisms = [\"MAR\"]\n");
    let out = dir.path().join("data");
    let o = gcmsim(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    assert!(text.starts_with("id,y1,y2,y3,y4,aux\n"));
    assert!(!text.contains(",,") && !text.lines().any(|l| l.ends_with(',')));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn generate_mar_thirty_percent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = [400]\nrates = [0.3]\nmechanisms = [\"MAR\"]\n");
    let out = dir.path().join("data");
    let o = gcmsim(&["generate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = out.join("data_N400_MAR_rate0.3_rep0.csv");
    let data = read_data(fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(data.column_missing_count(0), 0);
    for t in 1..4 {
        let frac = data.column_missing_count(t) as f64 / 400.0;
        assert!(frac > 0.2 && frac < 0.45, "column {t}: {frac}");
    }
}

#[test]
fn run_is_reproducible_and_matches_dry_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = gcmsim(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gcmsim(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--parallelism", "3"]);
    assert!(o.status.success());
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("# schema: gcmsim-summary/1\nN,rate,mechanism,method,parameter,bias_type,bias,mc_se,coverage,convergence_rate\n"));
    assert!(!text.contains('\r'));
    let rows = read_summary(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 5 * 8);

    let plan = gcmsim(&["run", "--config", &cfg, "--dry-run"]);
    assert!(plan.status.success());
    let plan = String::from_utf8(plan.stdout).unwrap();
    assert!(plan.contains("8 cells, 32 replicates"));
    let planned: Vec<String> = plan
        .lines()
        .filter(|l| l.contains("method="))
        .map(|l| {
            let f = |k: &str| l.split(&format!("{k}=")).nth(1).unwrap().split(' ').next().unwrap().to_string();
            format!("{},{},{},{}", f("N"), f("rate"), f("mechanism"), f("method"))
        })
        .collect();
    let mut ran: Vec<String> = rows.iter().map(|r| format!("{},{},{},{}", r.n, r.rate, r.mechanism, r.method)).collect();
    ran.dedup();
    assert_eq!(planned, ran);
}

#[test]
fn single_replicate_coverage_is_binary_or_missing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("s.csv");
    let o = gcmsim(&["run", "--config", &cfg, "--reps", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_summary(fs::File::open(&out).unwrap()).unwrap();
    assert!(rows.iter().all(|r| matches!(r.coverage, None | Some(0.0) | Some(1.0))));
}

#[test]
fn plot_writes_one_svg_per_panel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let summary = dir.path().join("s.csv");
    assert!(gcmsim(&["run", "--config", &cfg, "--out", summary.to_str().unwrap()]).status.success());
    let plots = dir.path().join("plots");
    let args = ["plot", "--summary", summary.to_str().unwrap(), "--parameter", "beta_S", "--out", plots.to_str().unwrap()];
    let o = gcmsim(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> =
        fs::read_dir(&plots).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["bias_beta_S_MAR_N60.svg", "bias_beta_S_MNAR_N60.svg"]);
    let first = fs::read(plots.join(&names[0])).unwrap();
    assert!(gcmsim(&args).status.success());
    assert_eq!(fs::read(plots.join(&names[0])).unwrap(), first);
}

#[test]
fn plot_errors_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.csv");
    fs::write(
        &summary,
        "# schema: gcmsim-summary/1\nN,rate,mechanism,method,parameter,bias_type,bias,mc_se,coverage,convergence_rate\n\
         100,0.3,MAR,FIML,beta_L,relative,0.01,0.002,0.95,1\n",
    )
    .unwrap();
    let plots = dir.path().join("plots");
    let o = gcmsim(&["plot", "--summary", summary.to_str().unwrap(), "--parameter", "gamma", "--out", plots.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown parameter"));
    let o = gcmsim(&["plot", "--summary", summary.to_str().unwrap(), "--parameter", "beta_S", "--out", plots.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!plots.exists());
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "reps = 3\nnoise = 1.0\n");
    let o = gcmsim(&["run", "--config", &cfg, "--dry-run"]);
    assert!(!o.status.success());
}

#[test]
fn desk_scale_preset() {
    let o = gcmsim(&["run", "--desk-scale", "--dry-run"]);
    assert!(o.status.success());
    let plan = String::from_utf8(o.stdout).unwrap();
    assert!(plan.contains("60 cells, 12000 replicates"), "{plan}");
    assert!(plan.lines().filter(|l| l.contains("reps=200")).count() == 60);
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = [20]\nrates = [0.0]\nmechanisms = [\"MAR\"]\n");
    let o = gcmsim(&["generate", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert!(!o.status.success());
}
