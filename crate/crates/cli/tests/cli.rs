use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gup-bic"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of `wavefunctions.csv` as (x_SI, state, re, im).
fn wave_rows(path: &Path) -> Vec<(f64, usize, f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_SI,x_tilde,state_index,re_phi,im_phi"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn wavefunction_at_special_energy_contains_sine() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "w", "wavefunction", "--potential", "well", "--k", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = wave_rows(&tmp.path().join("w/wavefunctions.csv"));
    let a = 1e-10f64;
    let first: Vec<_> = rows.iter().filter(|r| r.1 == 1).collect();
    let sign = first[first.len() / 2].2.signum();
    let worst = first
        .iter()
        .map(|(x, _, re, im)| {
            let want = (std::f64::consts::FRAC_PI_2 * (x + a) / a).sin() / a.sqrt();
            ((sign * re - want) / a.powf(-0.5)).abs().max(im.abs() / a.powf(-0.5))
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    assert!(rows.iter().any(|r| r.1 == 2));
    let states = json(&tmp.path().join("w/states.json"));
    assert_eq!(states["degeneracy"], 2);
    assert_eq!(states["oscillatory_first"], true);
}

#[test]
fn wavefunction_in_extra_continuum_mixes_parts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "w", "wavefunction", "--E", "1e-18"]);
    assert!(out.status.success());
    let states = json(&tmp.path().join("w/states.json"));
    assert_eq!(states["degeneracy"], 2);
    for s in states["states"].as_array().unwrap() {
        let c: Vec<f64> = s["coefficients"]
            .as_array()
            .unwrap()
            .iter()
            .map(|z| z[0].as_f64().unwrap().hypot(z[1].as_f64().unwrap()))
            .collect();
        // exponential (1, 2) and oscillatory (3, 4) parts both present
        assert!(c[0] + c[1] > 1e-6 && c[2] + c[3] > 1e-6, "{c:?}");
    }
}

#[test]
fn zero_grid_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["wavefunction", "--k", "1", "--grid-n", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("--grid-n"));
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn dof_scans_are_constant_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for (pot, dof) in [("well", "2"), ("linear", "1"), ("harmonic", "2")] {
        let out = run(tmp.path(), &["--out", pot, "dof-scan", "--potential", pot, "--n", "200"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(tmp.path().join(pot).join("scan.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("E_SI,E_dimensionless,dof,label"));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 200);
        assert!(rows.iter().all(|r| r[2] == dof), "{pot}");
        if pot == "well" {
            let marked: Vec<f64> =
                rows.iter().filter(|r| r[3] == "StandardLevel").map(|r| r[0].parse().unwrap()).collect();
            assert_eq!(marked.len(), 2);
            assert!((marked[0] - 1.782e-18).abs() < 1e-19 && (marked[1] - 1.043e-17).abs() < 1e-19, "{marked:?}");
        }
    }
    let again = run(tmp.path(), &["--out", "again", "dof-scan", "--potential", "linear", "--n", "200"]);
    assert!(again.status.success());
    assert_eq!(
        fs::read(tmp.path().join("linear/scan.csv")).unwrap(),
        fs::read(tmp.path().join("again/scan.csv")).unwrap()
    );
}

#[test]
fn verify_default_and_classical_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "v", "verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&tmp.path().join("v/verify.json"))["all_passed"], true);

    fs::write(tmp.path().join("b0.cfg"), "beta = 0\npotential = harmonic\n").unwrap();
    let out = run(tmp.path(), &["--config", "b0.cfg", "--out", "b0", "verify"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&tmp.path().join("b0/verify.json"));
    let dims: Vec<f64> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["name"].as_str().unwrap().starts_with("decaying_subspace_dimension"))
        .map(|c| c["value"].as_f64().unwrap())
        .collect();
    assert_eq!(dims, vec![1.0, 1.0]);
}

#[test]
fn corrupted_custom_potential_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("v.csv"), "x,V\n0,0\n2e-11,0\n1e-11,0\n3e-11,0\n4e-11,0\n").unwrap();
    fs::write(tmp.path().join("c.cfg"), "potential = custom\ncustom_file = v.csv\n").unwrap();
    let out = run(tmp.path(), &["--config", "c.cfg", "verify"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(tmp.path().join("u.cfg"), "mass = 1e-30\ncolour = blue\n").unwrap();
    let out = run(tmp.path(), &["--config", "u.cfg", "verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn manifest_digest_matches_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "# linear bouncer\npotential = linear\nL = 1e-8\n";
    fs::write(tmp.path().join("l.cfg"), cfg).unwrap();
    let out = run(tmp.path(), &["--config", "l.cfg", "--out", "m", "momentum-check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&tmp.path().join("m/manifest.json"));
    assert_eq!(m["config_digest"].as_str().unwrap(), hex::encode(Sha256::digest(cfg.as_bytes())));
    assert_eq!(m["command"], "momentum-check");
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"momentum.json"));
    for f in outputs {
        assert!(tmp.path().join("m").join(f).exists());
    }
    let r = json(&tmp.path().join("m/momentum.json"));
    assert_eq!(r["momentum_dimension"], 1);
    assert_eq!(r["position_dimension"], 4);
    // wrong potential kind
    let out = run(tmp.path(), &["--out", "m2", "momentum-check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn observability_reports_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--out", "o", "observability"]);
    assert!(out.status.success());
    let r = json(&tmp.path().join("o/observability.json"));
    assert_eq!(r["ground_class"], "Obvious");
    assert!((r["critical"]["exponent"].as_f64().unwrap() - 47.56).abs() < 0.01);
    fs::write(tmp.path().join("b.cfg"), "beta = 1e20\n").unwrap();
    let out = run(tmp.path(), &["--config", "b.cfg", "--out", "o2", "observability"]);
    assert!(out.status.success());
    assert_eq!(json(&tmp.path().join("o2/observability.json"))["ground_class"], "Inconspicuous");
}
