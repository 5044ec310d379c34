use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use surfdos::constant_surface::theorem3_constant;
use surfdos::symbol::{make_free_laplacian, LatticeDims};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn surfdos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfdos")).args(args).output().expect("binary runs")
}

fn shipped(cmd: &str, name: &str) -> Output {
    let p = configs().join(name);
    surfdos(&[cmd, p.to_str().unwrap()])
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

const FREE_11: &str = "[symbol]\nkind = \"free\"\nd1 = 1\nd2 = 1\n";

#[test]
fn classify_shipped_configs() {
    let v = json(&shipped("classify", "classify_stable.toml"));
    assert_eq!(v["lower_edge"], "Stable");
    assert_eq!(v["meta"]["seed"], 0);
    assert_eq!(v["meta"]["config_sha256"].as_str().unwrap().len(), 64);
    let v = json(&shipped("classify", "classify_fluctuating.toml"));
    let e0 = v["lower_edge"]["Fluctuating"]["e0"].as_f64().unwrap();
    assert!((e0 - (1.0 - 2f64.sqrt())).abs() < 1e-7);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", "seed = \n"),
        ("unknown.toml", "seed = 0\ncolour = 3\n"),
        ("nosymbol.toml", "[disorder]\nkind = \"constant\"\nt = 1.0\n"),
        ("baddist.toml", &format!("{FREE_11}[disorder]\nkind = \"uniform\"\na = 1.0\nb = 0.0\n")),
        ("dims.toml", "[symbol]\nkind = \"free\"\nd1 = 0\nd2 = 1\n[disorder]\nkind = \"constant\"\nt = 0.0\n"),
    ];
    for (name, body) in cases {
        let p = write_config(dir.path(), name, body);
        let o = surfdos(&["classify", &p]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(surfdos(&["classify", "/nonexistent/x.toml"]).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    // stable edge has no Lifshitz tail
    let o = shipped("lifshitz", "classify_stable.toml");
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not fluctuating"));

    // d2 = 3 at the resonant coupling 1 + t·I = 0
    let sym = make_free_laplacian(LatticeDims::new(1, 3).unwrap());
    let i00 = theorem3_constant(&sym, 0.1).unwrap().ingredients.i00.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "[symbol]\nkind = \"free\"\nd1 = 1\nd2 = 3\n[disorder]\nkind = \"constant\"\nt = {:e}\n\
         [run]\nenergies = {{ spacing = \"log\", lo = 1e-3, hi = 1e-2, count = 6 }}\n",
        -1.0 / i00
    );
    let o = surfdos(&["const-asym", &write_config(dir.path(), "border.toml", &body)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("borderline"));

    let body = "[appendix]\ng = [[1, 0], [0, 1]]\nenergy = 0.5\nn_max = 2\n";
    let o = surfdos(&["appendix-check", &write_config(dir.path(), "spec.toml", body)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_potential_curve_is_zero_and_reproducible() {
    let p = configs().join("idss_zero.toml");
    let p = p.to_str().unwrap();
    let a = surfdos(&["idss", p]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let rows: Vec<&str> = text.lines().skip_while(|l| *l != "E,value,stderr").skip(1).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((v[1], v[2]), (0.0, 0.0));
    }
    assert!(text.contains("# seed=0") && text.contains("# config_sha256="));
    let b = surfdos(&["--threads", "1", "idss", p]);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = surfdos(&["idss", p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(out).unwrap(), a.stdout);
}

#[test]
fn random_curve_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "seed = 5\n{FREE_11}[disorder]\nkind = \"two_point\"\nv0 = 0.0\nv1 = 2.0\np = 0.5\n\
         [run]\nn = 12\nm = 6\nenergies = {{ spacing = \"linear\", lo = 0.05, hi = 0.6, count = 5 }}\n"
    );
    let p = write_config(dir.path(), "tp.toml", &body);
    let a = surfdos(&["--threads", "1", "idss", &p]);
    let b = surfdos(&["--threads", "4", "idss", &p]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, surfdos(&["idss", &p]).stdout);
}

#[test]
fn const_asym_zero_potential_skips() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{FREE_11}[disorder]\nkind = \"constant\"\nt = 0.0\n\
         [run]\nn = 40\nenergies = {{ spacing = \"log\", lo = 1e-3, hi = 1e-2, count = 6 }}\n"
    );
    let v = json(&surfdos(&["const-asym", &write_config(dir.path(), "t0.toml", &body)]));
    assert_eq!(v["verdict"], "skip");
    assert!(v["fit"].is_null());
}

#[test]
fn lifshitz_fit_of_injected_curve_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let e0 = -0.4;
    let mut csv = String::from("# kind=ids\nE,value,stderr\n");
    for k in 0..10 {
        let x: f64 = 1e-3 * 1.5f64.powi(k);
        csv.push_str(&format!("{:e},{:e},0e0\n", e0 + x, (-x.powf(-0.5)).exp()));
    }
    std::fs::write(dir.path().join("tail.csv"), csv).unwrap();
    let body = "[lifshitz]\ne0 = -0.4\noffsets = [5e-4, 1.0]\ncurve = \"tail.csv\"\n";
    let v = json(&surfdos(&["lifshitz", &write_config(dir.path(), "inj.toml", body)]));
    assert!((v["exponent_hat"].as_f64().unwrap() + 0.5).abs() < 1e-10);
    assert!(v["newton_alpha"].is_null());
}

#[test]
fn prop_w1_no_mismatches() {
    let v = json(&shipped("prop-w1-check", "prop_w1_d11.toml"));
    assert_eq!(v["failures"], 0);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 100);
    assert!(checks.iter().all(|c| c["seed"] == 2024 && c["lhs"] == c["rhs"]));
    assert!(checks.iter().any(|c| c["lhs"].as_u64().unwrap() > 0));
}

#[test]
fn appendix_and_newton_reports() {
    for name in ["appendix_identity.toml", "appendix_shear.toml"] {
        let v = json(&shipped("appendix-check", name));
        assert_eq!(v["all_positive"], true);
        assert!(v["J_variation"].as_f64().unwrap() > 1e-3);
    }
    let v = json(&shipped("newton", "newton_d1_2.toml"));
    assert_eq!(v["alpha"], "1");
    let p = &v["points"][0];
    assert_eq!(p["alpha"], "1");
    assert!(p["family_used"].as_str().unwrap().contains("shears"));
    assert!(!p["hull"].as_array().unwrap().is_empty());
}
