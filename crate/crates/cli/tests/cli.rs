use std::path::Path;
use std::process::{Command, Output};

fn scarlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scarlab")).args(args).env_remove("SCARLAB_WORKERS").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = scarlab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(text.ends_with("\r\n"), "records end in CRLF");
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> String {
    tmp.path().join(name).to_str().unwrap().to_string()
}

fn column(rows: &[Vec<String>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn spectrum_writes_tables_with_one_scar_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "spec");
    ok(&["spectrum", "--model", "mps", "--N", "8", "--s", "0.3", "--out", &out]);
    let dir = Path::new(&out);
    let (header, rows) = csv(&dir.join("spectrum_N8.csv"));
    assert_eq!(header, ["s", "n", "E_n [J]", "S_A [nats]", "is_scar"]);
    let scars: Vec<_> = rows.iter().filter(|r| r[4] == "true").collect();
    assert_eq!(scars.len(), 1);
    assert!(scars[0][2].parse::<f64>().unwrap().abs() < 1e-10);
    let e = column(&rows, 2);
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    let (_, hist) = csv(&dir.join("r_histogram_N8_s0.3.csv"));
    let mass: f64 = hist.iter().map(|r| (r[1].parse::<f64>().unwrap() - r[0].parse::<f64>().unwrap()) * r[2].parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
    let echo = std::fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(echo.contains("task = \"spectrum\""));
    assert!(echo.contains("n = [8]"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["task"], "spectrum");
    assert!(meta["summary"]["N8 s=0.3"]["r_ave"].as_f64().unwrap() > 0.0);
}

#[test]
fn echoed_config_reruns_to_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out_dir(&tmp, "a");
    ok(&["dynamics", "--N", "6", "--v", "0.2", "--checkpoints", "4", "--populations", "--out", &a]);
    // re-run from the echo, redirecting the output
    let b = out_dir(&tmp, "b");
    let echo = Path::new(&a).join("config.toml");
    ok(&["run", "--config", echo.to_str().unwrap(), "--out", &b]);
    for f in ["fidelity_N6_v0.2.csv", "populations_N6_v0.2.csv"] {
        let x = std::fs::read(Path::new(&a).join(f)).unwrap();
        let y = std::fs::read(Path::new(&b).join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let (header, rows) = csv(&Path::new(&a).join("fidelity_N6_v0.2.csv"));
    assert_eq!(header, ["t [1/J]", "s", "F", "S_diag [nats]"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert!(rows[0][3].parse::<f64>().unwrap() < 1e-8);
    let (_, pops) = csv(&Path::new(&a).join("populations_N6_v0.2.csv"));
    let total: f64 = pops.iter().filter(|r| r[0] == rows[4][1]).map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(!Path::new(&a).join("restart_N6_v0.2.bin").exists());
}

#[test]
fn unknown_config_keys_exit_with_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "task = \"qsl\"\n[model]\nlength = 10\n").unwrap();
    let out = scarlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length"));
}

#[test]
fn missing_task_and_bad_workers_are_schema_errors() {
    assert_eq!(scarlab(&["run"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_scarlab")).args(["qsl", "--N", "10"]).env("SCARLAB_WORKERS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(scarlab(&["spectrum", "--N", "7"]).status.code(), Some(2));
}

#[test]
fn oversized_sector_hits_the_resource_ceiling() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scarlab(&["spectrum", "--N", "10", "--max-dense-dim", "100", "--out", &out_dir(&tmp, "x")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unbracketed_velocity_scan_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "x");
    let out = scarlab(&["velocity-scan", "--N", "6", "--v-max", "1e-3", "--v-min", "1e-4", "--out", &dir]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = std::fs::read_to_string(Path::new(&dir).join("metadata.json")).unwrap();
    assert!(meta.contains("not bracketed"));
}

#[test]
fn velocity_scan_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "v");
    ok(&["velocity-scan", "--variant", "ground", "--N", "4,6", "--v-min", "1e-3", "--out", &dir]);
    let (header, rows) = csv(&Path::new(&dir).join("velocity.csv"));
    assert_eq!(header, ["N", "variant", "threshold", "v_F [J]"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "ground");
    let v = column(&rows, 3);
    assert!(v.iter().all(|&x| x > 1e-3 && x < 1.0));
}

#[test]
fn qsl_table_covers_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "q");
    ok(&["qsl", "--N", "10,100,1000", "--s", "0,0.5,1", "--out", &dir]);
    let (header, rows) = csv(&Path::new(&dir).join("qsl.csv"));
    assert_eq!(header, ["N", "s", "log_C", "C_N", "dE0 [J]", "v_qsl [J]"]);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert!(column(&rows, 2).iter().all(|x| x.is_finite() && *x <= 0.0));
}

#[test]
fn kpm_from_config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("kpm.toml");
    std::fs::write(
        &cfg,
        "task = \"kpm\"\n[model]\nkind = \"fqh\"\nlx = 2\nly = 4\n[grid]\ns = [0.0]\n[kpm]\nmoments = 256\nomega_points = 64\n",
    )
    .unwrap();
    let dir = out_dir(&tmp, "k");
    ok(&["run", "--config", cfg.to_str().unwrap(), "--probes", "0..2", "--out", &dir]);
    let (header, rows) = csv(&Path::new(&dir).join("kpm_2x4_s0.0.csv"));
    assert_eq!(header, ["n", "omega [J]", "G [1/J]"]);
    assert_eq!(rows.len(), 3 * 64);
    let echo = std::fs::read_to_string(Path::new(&dir).join("config.toml")).unwrap();
    assert!(echo.contains("probes = [0, 1, 2]"));
}

#[test]
fn agp_tables_for_both_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("agp.toml");
    std::fs::write(&cfg, "[agp]\ncrossing_points = 21\n").unwrap();
    for variant in ["ground", "scar"] {
        let dir = out_dir(&tmp, variant);
        ok(&["agp", "--config", cfg.to_str().unwrap(), "--variant", variant, "--N", "6", "--s", "0.5", "--v", "1e-3,1e-2", "--out", &dir]);
        let (header, rows) = csv(&Path::new(&dir).join("agp_N6.csv"));
        assert_eq!(header, ["s", "n", "E_n [J]", "|A_n0| [1/J]"]);
        assert!(!rows.is_empty());
        let (_, apt) = csv(&Path::new(&dir).join("apt_N6.csv"));
        let f = column(&apt, 1);
        assert_eq!(f.len(), 2);
        assert!(f[0] >= f[1] && f[0] <= 1.0, "{variant}: {f:?}");
    }
}

#[test]
fn susceptibility_and_tower_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "chi");
    ok(&["susceptibility", "--N", "6,8", "--epsilon", "0,0.1", "--out", &dir]);
    let (header, rows) = csv(&Path::new(&dir).join("susceptibility.csv"));
    assert_eq!(header, ["N", "epsilon [J]", "chi_scar", "chi_thermal", "gauge_norm"]);
    assert_eq!(rows.len(), 4);
    assert!(column(&rows, 2).iter().all(|&x| x > 0.0));

    let dir = out_dir(&tmp, "tower");
    ok(&["tower", "--N", "6", "--ell", "0,1,2", "--s", "0.5", "--out", &dir]);
    let (_, rows) = csv(&Path::new(&dir).join("tower.csv"));
    assert_eq!(rows.len(), 3);
    for (ell, e) in column(&rows, 5).iter().enumerate() {
        assert!((e - ell as f64).abs() < 1e-10, "ell={ell}: {e}");
    }
}
