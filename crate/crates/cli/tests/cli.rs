use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use su2qlm_cli::checkpoint;
use su2qlm_cli::config::OUT_DIR_ENV;
use su2qlm_cli::output::read_jsonl;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_su2qlm"));
    c.env_remove(OUT_DIR_ENV);
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn csv_column(path: &Path, col: &str) -> Vec<String> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let i = rd.headers().unwrap().iter().position(|h| h == col).unwrap();
    rd.records().map(|r| r.unwrap()[i].to_string()).collect()
}

const POINT: &str = "[model]\nt = 0.0\neps = 5.0\n[lattice]\nL = 4\nN_M = 4\n";

#[test]
fn ground_zero_coupling_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", POINT);
    let out = tmp.path().join("out");
    let o = run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let e: f64 = csv_column(&out.join("records.csv"), "energy")[0].parse().unwrap();
    assert!((e + 15.0).abs() < 1e-8, "E = {e}");
    let rows = read_jsonl(&out.join("records.jsonl")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(out.join("checkpoints/L4_N4_t0_chi64_seed1.mps").exists());
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", "[model]\nt = 2.0\n[lattice]\nL = 5\nN_M = 4\n[tebd]\nseeds = [3]\n");
    let files = ["records.csv", "records.jsonl", "checkpoints/L5_N4_t2_chi64_seed3.mps"];
    let mut contents = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        assert_eq!(run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&dir)).status.code(), Some(0));
        contents.push(files.map(|f| fs::read(dir.join(f)).unwrap()));
    }
    assert_eq!(contents[0], contents[1]);

    // a second run into the same directory replaces the row instead of appending
    let dir = tmp.path().join("a");
    run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&dir));
    assert_eq!(fs::read(dir.join(files[0])).unwrap(), contents[0][0]);
}

#[test]
fn invalid_filling_exits_1_without_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[model]\nt = 1.0\n[lattice]\nL = 4\nN_M = 10\n");
    let out = tmp.path().join("out");
    let o = run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &format!("{POINT}[mps]\nchi = 10\n"));
    let out = tmp.path().join("out");
    assert_eq!(run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out)).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn sweep_writes_one_sorted_record_per_point() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[model]\nt = 1.0\n[lattice]\nL = 4\nN_M = 2\n[sweep]\nparameter = \"t\"\nvalues = [3.0, 1.0, 0.5]\n",
    );
    let out = tmp.path().join("out");
    assert_eq!(run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out)).status.code(), Some(0));
    let ts: Vec<f64> = csv_column(&out.join("records.csv"), "t").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(ts, vec![0.5, 1.0, 3.0]);
    let rows = read_jsonl(&out.join("records.jsonl")).unwrap();
    assert_eq!(rows.iter().map(|r| r.key.t).collect::<Vec<_>>(), ts);
}

#[test]
fn warm_and_cold_sweeps_agree() {
    let tmp = TempDir::new().unwrap();
    let tolerance = 1e-9;
    let mut energies = Vec::new();
    for warm in [true, false] {
        let cfg = write_config(
            tmp.path(),
            &format!("s{warm}.toml"),
            &format!(
                "[model]\nt = 1.0\n[lattice]\nL = 6\nN_M = 6\n[sweep]\nparameter = \"t\"\nvalues = [1.0, 2.0, 4.0]\nwarm_start = {warm}\n"
            ),
        );
        let out = tmp.path().join(format!("out{warm}"));
        assert_eq!(run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out)).status.code(), Some(0));
        energies.push(read_jsonl(&out.join("records.jsonl")).unwrap().iter().map(|r| r.record.as_ref().unwrap().energy).collect::<Vec<_>>());
    }
    for (w, c) in energies[0].iter().zip(&energies[1]) {
        assert!((w - c).abs() < 10.0 * tolerance, "warm {w} vs cold {c}");
    }
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &format!("{POINT}[sweep]\nparameter = \"t\"\nvalues = []\n"));
    let out = tmp.path().join("out");
    assert_eq!(run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out)).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn analyze_cdw_on_a_neel_record() {
    // the t = 0 ground state at half filling is the Neel configuration
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", POINT);
    let out = tmp.path().join("out");
    run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out));
    let o = run(bin()
        .args(["analyze", "--task", "cdw", "--k", &std::f64::consts::PI.to_string()])
        .arg(out.join("records.jsonl"))
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let zeta: f64 = csv_column(&out.join("analysis_cdw.csv"), "zeta")[0].parse().unwrap();
    assert!((zeta - 1.0).abs() < 1e-12, "zeta = {zeta}");
}

#[test]
fn analyze_transition_on_synthetic_tanh_curves() {
    let tmp = TempDir::new().unwrap();
    let t_c = 7.25;
    let mut body = String::from("group,L,t,value\n");
    for len in [16, 24, 32] {
        for i in 0..=200 {
            let t = 2.0 + 0.05 * i as f64;
            let v = 0.5 - 0.5 * ((t - t_c) * len as f64 / 16.0).tanh();
            body.push_str(&format!("A,{len},{t},{v}\n"));
        }
    }
    let table = write_config(tmp.path(), "curves.csv", &body);
    let o = run(bin().args(["analyze", "--task", "transition"]).arg(&table).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(0));
    let est: f64 = csv_column(&tmp.path().join("analysis_transition.csv"), "t_c")[0].parse().unwrap();
    assert!((est - t_c).abs() < 1e-9, "t_c = {est}");
}

#[test]
fn analyze_chi_error_on_identical_records_is_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", "[model]\nt = 1.5\n[lattice]\nL = 5\nN_M = 4\n");
    let out = tmp.path().join("out");
    run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out));
    let rec = out.join("records.jsonl");
    let copy = tmp.path().join("copy.jsonl");
    fs::copy(&rec, &copy).unwrap();
    let o = run(bin().args(["analyze", "--task", "chi-error"]).arg(&rec).arg(&copy).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let path = out.join("analysis_chi_error.csv");
    for col in ["d_energy", "d_zeta", "d_density_max", "d_entropy_max"] {
        let v = csv_column(&path, col);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].parse::<f64>().unwrap(), 0.0, "{col}");
    }
}

#[test]
fn analyze_rejects_malformed_records() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.jsonl", "{\"key\": 3}\n");
    let o = run(bin().args(["analyze", "--task", "xi"]).arg(&bad).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_passes_and_reports_the_bulk_count() {
    let o = run(bin().arg("validate"));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("bulk 14"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn corrupted_gate_fails_the_gauss_check() {
    let o = run(bin().args(["validate", "--corrupt-gate"]));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_ne!(o.status.code(), Some(0));
    let gauss = text.lines().find(|l| l.contains("gauss")).unwrap();
    assert!(gauss.starts_with("FAIL"), "{gauss}");
}

#[test]
fn checkpoint_resume_reproduces_measurements() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", "[model]\nt = 2.0\n[lattice]\nL = 6\nN_M = 6\n");
    let out = tmp.path().join("out");
    run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&out));
    let ck = out.join("checkpoints/L6_N6_t2_chi64_seed1.mps");
    let state = checkpoint::load(&ck).unwrap();
    assert_eq!(checkpoint::encode(&state), fs::read(&ck).unwrap());

    // resuming from a converged state stays at the same energy
    let resumed = tmp.path().join("resumed");
    let o = run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&resumed).arg("--resume").arg(&ck));
    assert_eq!(o.status.code(), Some(0));
    let e0: f64 = csv_column(&out.join("records.csv"), "energy")[0].parse().unwrap();
    let e1: f64 = csv_column(&resumed.join("records.csv"), "energy")[0].parse().unwrap();
    assert!((e0 - e1).abs() < 1e-8, "{e0} vs {e1}");
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", POINT);
    let ck = write_config(tmp.path(), "bad.mps", "SU2QLMPS2 not a checkpoint");
    let o = run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")).arg("--resume").arg(&ck));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn environment_overrides_config_directory_and_flag_overrides_both() {
    let tmp = TempDir::new().unwrap();
    let cfg_dir = tmp.path().join("from_config");
    let body = format!("{POINT}[output]\ndirectory = {:?}\nformats = [\"csv\"]\ncheckpoints = false\n", cfg_dir.to_str().unwrap());
    let cfg = write_config(tmp.path(), "g.toml", &body);

    let env_dir = tmp.path().join("from_env");
    run(bin().args(["ground", "--config"]).arg(&cfg).env(OUT_DIR_ENV, &env_dir));
    assert!(env_dir.join("records.csv").exists());
    assert!(!cfg_dir.exists());

    let flag_dir = tmp.path().join("from_flag");
    run(bin().args(["ground", "--config"]).arg(&cfg).arg("--out").arg(&flag_dir).env(OUT_DIR_ENV, &env_dir));
    assert!(flag_dir.join("records.csv").exists());
    assert!(!flag_dir.join("records.jsonl").exists());

    run(bin().args(["ground", "--config"]).arg(&cfg));
    assert!(cfg_dir.join("records.csv").exists());
}

#[test]
fn chi_and_seed_flags_override_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", "[model]\nt = 1.0\n[lattice]\nL = 4\nN_M = 2\n");
    let out = tmp.path().join("out");
    run(bin().args(["ground", "--chi", "12", "--seed", "9", "--config"]).arg(&cfg).arg("--out").arg(&out));
    let rec = out.join("records.csv");
    assert_eq!(csv_column(&rec, "chi"), vec!["12"]);
    assert_eq!(csv_column(&rec, "seed"), vec!["9"]);
}

#[test]
fn ed_subcommand_matches_the_zero_coupling_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", POINT);
    let o = run(bin().args(["ed", "--config"]).arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(0));
    let e: f64 = csv_column(&tmp.path().join("ed.csv"), "E0")[0].parse().unwrap();
    assert!((e + 15.0).abs() < 1e-10);
}
