use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldh_cli::commands::compare::CompareReport;
use ldh_cli::manifest::{Manifest, MANIFEST_NAME};
use ldh_core::{read_stack, write_stack, HologramStack, Stack, StackMeta};
use ndarray::Array3;
use num_complex::Complex32;

fn ldh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldh")).args(args).output().expect("spawn ldh")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ldh(&args)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn files_under(root: &Path) -> BTreeSet<String> {
    fn walk(base: &Path, d: &Path, acc: &mut BTreeSet<String>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, acc);
            } else {
                let rel = p.strip_prefix(base).unwrap();
                acc.insert(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
    }
    let mut acc = BTreeSet::new();
    walk(root, root, &mut acc);
    acc
}

fn assert_manifest_complete(out: &Path) -> Manifest {
    let m = Manifest::read(&out.join(MANIFEST_NAME)).unwrap();
    let listed: BTreeSet<String> = m.artifacts.iter().map(|a| a.path.clone()).collect();
    assert_eq!(listed.len(), m.artifacts.len(), "duplicate manifest entries");
    let mut on_disk = files_under(out);
    on_disk.remove(MANIFEST_NAME);
    assert_eq!(on_disk, listed);
    for a in &m.artifacts {
        assert!(a.params.is_object(), "{} has no params", a.path);
    }
    assert!(!m.config.is_empty());
    m
}

const SMALL_SCENE: &str = "nt = 512\n";

#[test]
fn simulate_default_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.toml", "");
    let out = dir.path().join("sim");
    ok(&run("simulate", &cfg, &out, &[]));
    let st = read_stack(out.join("field.rcl")).unwrap();
    assert_eq!(st.meta().nt, 4096);
    assert_eq!((st.meta().nx, st.meta().ny), (64, 64));
    for f in ["field.truth.json", "field.labels.u8", "field.reflectivity.f32", "field.rcl.meta.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let m = assert_manifest_complete(&out);
    assert!(m.config.contains("sample_rate_hz"));
}

#[test]
fn same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.toml", SMALL_SCENE);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&run("simulate", &cfg, &a, &[]));
    ok(&run("simulate", &cfg, &b, &["--threads", "1"]));
    ok(&run("simulate", &cfg, &c, &["--seed", "99"]));
    let bytes = |d: &Path| std::fs::read(d.join("field.rcl")).unwrap();
    assert!(bytes(&a) == bytes(&b));
    assert!(bytes(&a) != bytes(&c));
}

#[test]
fn invalid_pulsatility_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scene.toml",
        "[scene.regions.artery]\ntau_c_s = 6.4e-5\npulsatility = 1.2\nreflectivity = 1.0\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pulsatility"), "{}", stderr(&o));
}

#[test]
fn syntax_error_names_line_and_unknown_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "nt = 64\n[scene]\nnx = = 3\n");
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write(dir.path(), "typo.toml", "[scene]\nheart_rate = 2.0\n");
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("heart_rate"), "{}", stderr(&o));
}

#[test]
fn full_band_process_satisfies_parseval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.toml", SMALL_SCENE);
    let sim = dir.path().join("sim");
    ok(&run("simulate", &cfg, &sim, &[]));
    let pcfg = write(
        dir.path(),
        "process.toml",
        "input = \"sim/field.rcl\"\n[stft]\nn_win = 64\nhop = 32\n[svd]\nenabled = false\n[[band]]\nname = \"full\"\nlow_hz = 0.0\n",
    );
    let out = dir.path().join("proc");
    ok(&run("process", &pcfg, &out, &[]));

    let Stack::Complex(st) = read_stack(sim.join("field.rcl")).unwrap() else { panic!("complex stack expected") };
    let raw = std::fs::read(out.join("movies/full.f64")).unwrap();
    let movie: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (ny, nx) = (64, 64);
    let n_windows = (512 - 64) / 32 + 1;
    assert_eq!(movie.len(), n_windows * ny * nx);
    let mut worst = 0.0f64;
    for m in 0..n_windows {
        for y in 0..ny {
            for x in 0..nx {
                let e: f64 = (0..64).map(|t| st.field()[[m * 32 + t, y, x]].norm_sqr() as f64).sum();
                let v = movie[(m * ny + y) * nx + x];
                worst = worst.max((v - e).abs() / e);
            }
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn missing_input_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let pcfg = write(dir.path(), "process.toml", "input = \"nowhere/absent.rcl\"\npreset = \"full-rate\"\n");
    let o = run("process", &pcfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("absent.rcl"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("process", &dir.path().join("none.toml"), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("none.toml"), "{}", stderr(&o));
}

#[test]
fn zero_field_flat_field_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let st = HologramStack::new(StackMeta::new(8, 8, 64, 1000.0), Array3::<Complex32>::zeros((64, 8, 8))).unwrap();
    write_stack(&Stack::Complex(st), dir.path().join("zero.rcl")).unwrap();
    let pcfg = write(
        dir.path(),
        "process.toml",
        "input = \"zero.rcl\"\nflat_field = true\n[stft]\nn_win = 16\nhop = 8\n[svd]\nenabled = false\n[[band]]\nname = \"full\"\nlow_hz = 0.0\n",
    );
    let o = run("process", &pcfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn band_above_nyquist_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.toml", "nt = 256\nsample_rate_hz = 8000.0\n");
    let sim = dir.path().join("sim");
    ok(&run("simulate", &cfg, &sim, &[]));
    let pcfg = write(dir.path(), "process.toml", "input = \"sim/field.rcl\"\npreset = \"full-rate\"\n[stft]\nn_win = 64\nhop = 32\n");
    let o = run("process", &pcfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Nyquist"), "{}", stderr(&o));
}

const PRESET_PROCESS: &str = "input = \"sim/field.rcl\"
preset = \"full-rate\"
flat_field = true
baseline = true

[svd]
cutoff_hz = 100.0

[[roi]]
name = \"artery\"
region = \"artery\"

[[roi]]
name = \"corner\"
rect = [0, 0, 8, 8]
";

#[test]
fn preset_process_is_reproducible_and_fully_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scene.toml", "");
    ok(&run("simulate", &cfg, &dir.path().join("sim"), &[]));
    let pcfg = write(dir.path(), "process.toml", PRESET_PROCESS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run("process", &pcfg, &a, &[]));
    ok(&run("process", &pcfg, &b, &[]));

    let m = assert_manifest_complete(&a);
    for f in [
        "images/low_1k_mean.pgm",
        "images/low_1k_rc_mean.pgm",
        "images/high_mean.pgm",
        "images/full_mean.pgm",
        "images/mid_mean.pgm",
        "composite.ppm",
        "traces/artery__low_4k_rc.csv",
        "traces/corner__high.csv",
        "spectrograms/artery.f64",
        "spectrograms/artery_db.pgm",
        "clutter.csv",
    ] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert!(m.config.contains("low_1k"), "preset not echoed");

    let raw: Vec<_> = m
        .artifacts
        .iter()
        .filter(|x| x.path.ends_with(".f64") || x.path.ends_with(".csv"))
        .collect();
    assert!(raw.len() >= 10);
    for x in raw {
        let (p, q) = (a.join(&x.path), b.join(&x.path));
        assert!(std::fs::read(&p).unwrap() == std::fs::read(&q).unwrap(), "{} differs", x.path);
    }

    let rcfg = write(
        dir.path(),
        "render.toml",
        "manifest = \"a/manifest.json\"\n[render]\nclip_lo_pct = 1.0\nclip_hi_pct = 99.0\ngamma = 0.8\n[[composite]]\nname = \"full_rate\"\nslow = \"mid\"\nfast = \"high\"\n",
    );
    let r = dir.path().join("r");
    ok(&run("render", &rcfg, &r, &[]));
    assert_manifest_complete(&r);
    assert!(r.join("composites/full_rate.ppm").is_file());
    assert!(r.join("images/low_4k_rc_mean.pgm").is_file());
}

#[test]
fn interferograms_reconstruct_and_process() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scene.toml",
        "nt = 128\n[interferogram]\nkx = 0.25\nky = 0.25\nhalfwidth = 0.1\n",
    );
    ok(&run("simulate", &cfg, &dir.path().join("sim"), &[]));
    let body = "[stft]\nn_win = 32\nhop = 16\n[[band]]\nname = \"full\"\nlow_hz = 0.0\n";
    let no_rec = write(dir.path(), "p1.toml", &format!("input = \"sim/interferograms.rcl\"\n{body}"));
    let o = run("process", &no_rec, &dir.path().join("o1"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[reconstruct]"), "{}", stderr(&o));

    let rec = write(
        dir.path(),
        "p2.toml",
        &format!("input = \"sim/interferograms.rcl\"\n[reconstruct]\nkx = 0.25\nky = 0.25\nhalfwidth = 0.1\n{body}"),
    );
    let out = dir.path().join("o2");
    ok(&run("process", &rec, &out, &[]));
    assert_manifest_complete(&out);
}

fn compare(dir: &Path, extra: &str) -> (Output, PathBuf) {
    let cfg = write(dir, "compare.toml", &format!("[compare]\n{extra}"));
    let out = dir.join("cmp");
    (run("compare-rates", &cfg, &out, &[]), out)
}

fn report(out: &Path) -> CompareReport {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn compare_rates_same_data() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = compare(dir.path(), "factor = 1\n");
    ok(&o);
    let r = report(&out);
    assert!(r.pearson > 0.8, "r = {}", r.pearson);
    assert_eq!(r.low_rate_hz, r.fast_rate_hz);
    assert_manifest_complete(&out);
}

#[test]
fn compare_rates_decimated() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = compare(dir.path(), "factor = 8\n");
    ok(&o);
    let r = report(&out);
    assert_eq!(r.low_rate_hz, 8000.0);
    assert!(r.pearson > 0.9, "r = {}", r.pearson);
    assert!(r.pass);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let lines = std::fs::read_to_string(out.join("traces/rc_low_band.csv")).unwrap();
    assert_eq!(lines.lines().next(), Some("time_s,value"));
    assert_eq!(lines.lines().count(), r.n_windows + 1);
}

#[test]
fn compare_rates_factor_must_divide_nt() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = compare(dir.path(), "factor = 3\nnt = 4000\nn_win = 240\nhop = 60\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not divide"), "{}", stderr(&o));
}
