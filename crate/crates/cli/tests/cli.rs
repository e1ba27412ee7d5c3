use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn padiclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padiclab"))
        .args(args)
        .env_remove("PADICLAB_CACHE")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout {:?}, stderr {:?}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn sign(r: &Value, name: &str) -> Option<i64> {
    r["signs"]["entries"]
        .as_array()?
        .iter()
        .find(|e| e["name"] == name)?["value"]
        .as_i64()
}

fn checks(r: &Value) -> Vec<(String, String, String)> {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["name"].as_str().unwrap().to_owned(),
                c["status"].as_str().unwrap().to_owned(),
                c["detail"].as_str().unwrap().to_owned(),
            )
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn gamma32_at_three_agrees_mod_nine() {
    let out = padiclab(&["gamma32", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(sign(&r, "epsilon"), Some(-1));
    assert_eq!(sign(&r, "same-side"), Some(1));
    let cs = checks(&r);
    assert_eq!(cs.len(), 6);
    assert!(cs.iter().all(|c| c.1 == "pass" && c.0.ends_with("mod 3^2")));
    assert!(cs.iter().any(|c| c.2.contains("u-limit = -4 + O(3^2)")));
}

#[test]
fn gamma32_shallow_run_at_seven() {
    let out = padiclab(&["gamma32", "--p", "7", "--m-max", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(checks(&r)
        .iter()
        .all(|c| c.1 == "pass" && c.0.ends_with("mod 7^1")));
    assert_eq!(sign(&r, "epsilon"), Some(-1));
}

#[test]
fn gamma32_refuses_one_mod_four() {
    let out = padiclab(&["gamma32", "--p", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 mod 4"));
}

#[test]
fn mu_for_32b_at_three() {
    let out = padiclab(&["mu", "--g2", "-16", "--g3", "0", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let cs = checks(&report(&out));
    let solve = cs.iter().find(|c| c.0.starts_with("Dieudonné")).unwrap();
    assert!(solve.2.contains("λ = O(3^1)"), "{}", solve.2);
    assert!(solve.2.contains("μ = -1 + O(3^1)"), "{}", solve.2);
    assert!(cs
        .iter()
        .any(|c| c.0.starts_with("μ_p ≢ 0") && c.1 == "pass"));
}

#[test]
fn mu_congruence_sign_at_seven() {
    let out = padiclab(&["mu", "--p", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(sign(&r, "mu vs -E_{p+1}/12"), Some(1));
    assert_eq!(sign(&r, "mu vs p-typical"), Some(1));
}

#[test]
fn mu_refuses_ordinary_prime() {
    let out = padiclab(&["mu", "--p", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordinary"));
}

#[test]
fn verify_identities() {
    let out = padiclab(&["verify", "wp-lift", "--terms", "50"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(checks(&report(&out))[0].1, "pass");

    let out = padiclab(&["verify", "20zeta", "--terms", "80"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(sign(&report(&out), "20-zeta sigma"), Some(-1));
}

#[test]
fn honda_with_input_files() {
    let dir = tempfile::tempdir().unwrap();
    let curve = write(dir.path(), "32b.txt", "# y^2 = 4x^3 + 16x\ng2 -16\ng3 0\n");
    let form: String = "level 32\n1 1\n2 0\n3 0\n4 0\n5 -2\n6 0\n7 0\n8 0\n9 -3\n10 0\n\
        11 0\n12 0\n13 6\n14 0\n15 0\n16 0\n17 2\n18 0\n19 0\n20 0\n"
        .into();
    let form = write(dir.path(), "g.txt", &form);
    let out = padiclab(&[
        "honda", "--curve", &curve, "--form", &form, "--terms", "20", "--p", "3,5,7",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cs = checks(&report(&out));
    assert_eq!(cs.len(), 3);
    assert!(cs.iter().all(|c| c.1 == "pass"));

    // a form file that is too short for the requested terms
    let out = padiclab(&["honda", "--form", &form, "--terms", "40"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "g2 -16\n\ng3 x/0\n");
    let out = padiclab(&["mu", "--curve", &bad, "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt") && err.contains("line 3"), "{err}");

    let out = padiclab(&["mu", "--g2", "1/0", "--g3", "1", "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ulimit_problem_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.txt", "g2 -16\ng3 0\n");
    let builtin = write(
        dir.path(),
        "w1.toml",
        "p = 3\nm_max = 2\nn_check = 20\n\n[source]\nbuiltin = \"W1-32\"\n",
    );
    let out = padiclab(&["ulimit", &builtin]);
    assert_eq!(out.status.code(), Some(0));
    let cs = checks(&report(&out));
    assert!(cs.iter().all(|c| c.1 == "pass"));
    assert!(cs[0].2.contains("γ = -4 + O(3^2)"), "{}", cs[0].2);
    assert!(cs[1].2.contains("m=2: 3"), "{}", cs[1].2);

    // ζ-route W from the curve file, paths relative to the problem file
    let zeta = write(
        dir.path(),
        "z.toml",
        "p = 7\nm_max = 1\nn_check = 10\nestimate_depth = 1\n\n[source]\nzeta_curve = \"c.txt\"\n",
    );
    let out = padiclab(&["ulimit", &zeta]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cs = checks(&report(&out));
    assert!(cs[0].2.contains("γ = 1 + O(7^1)"), "{}", cs[0].2);

    // W = g|V₃ = η(12τ)²η(24τ)² is the pure exceptional direction: γ = 1 exactly
    let eta = write(
        dir.path(),
        "eta.toml",
        "p = 3\nm_max = 1\nn_check = 10\nestimate_depth = 1\n\n[source]\neta = [[12, 2], [24, 2]]\n",
    );
    let out = padiclab(&["ulimit", &eta]);
    assert_eq!(out.status.code(), Some(0));
    let cs = checks(&report(&out));
    assert!(cs[0].2.contains("γ = 1 + O(3^24)"), "{}", cs[0].2);

    let two = write(
        dir.path(),
        "two.toml",
        "p = 3\nm_max = 1\nn_check = 5\n[source]\nbuiltin = \"W1-32\"\nzeta_curve = \"c.txt\"\n",
    );
    assert_eq!(padiclab(&["ulimit", &two]).status.code(), Some(2));

    // b(5) = −2: the U-limit setup needs a supersingular prime
    let ordinary = write(
        dir.path(),
        "o.toml",
        "p = 5\nm_max = 1\nn_check = 5\n[source]\nbuiltin = \"W1-32\"\n",
    );
    assert_eq!(padiclab(&["ulimit", &ordinary]).status.code(), Some(2));
}

#[test]
fn cache_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache = cache.to_str().unwrap();
    let args = ["honda", "--terms", "120"];
    let plain = report(&padiclab(&[&["--no-cache"], &args[..]].concat()));
    let cold = report(&padiclab(&[&["--cache-dir", cache], &args[..]].concat()));
    let warm = report(&padiclab(&[&["--cache-dir", cache], &args[..]].concat()));
    assert_eq!(checks(&plain), checks(&cold));
    assert_eq!(checks(&cold), checks(&warm));
    assert!(std::fs::read_dir(cache).unwrap().next().is_some());
}

#[test]
fn reports_are_deterministic() {
    let a = report(&padiclab(&["gamma32", "--p", "11"]));
    let b = report(&padiclab(&["gamma32", "--p", "11"]));
    assert_eq!(checks(&a), checks(&b));
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["input_digest"].as_str().unwrap().len(), 64);
    let c = report(&padiclab(&["gamma32", "--p", "11", "--prec", "1"]));
    assert_ne!(a["input_digest"], c["input_digest"]);
}

#[test]
fn suite_subset_and_unknown_criterion() {
    let out = padiclab(&["--jobs", "2", "suite", "acceptance", "--only", "8,9"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("criterion  8 PASS") && err.contains("criterion  9 PASS"),
        "{err}"
    );
    let cs = checks(&report(&out));
    assert!(cs.iter().any(|c| c.0 == "criterion 9"));
    assert!(!cs.iter().any(|c| c.0 == "criterion 1"));

    assert_eq!(
        padiclab(&["suite", "acceptance", "--only", "11"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn grid_from_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", "bound = 2\nprimes = [5, 7]\n");
    let out = padiclab(&["--jobs", "2", "grid", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    let cs = checks(&r);
    assert_eq!(cs.len(), 2);
    assert!(cs[0].0.starts_with("p=5") && cs[1].0.starts_with("p=7"));
    assert_eq!(sign(&r, "mu vs -E_{p+1}/12"), Some(1));

    let out = padiclab(&["grid", "--config", &cfg, "--p", "3"]);
    let cs = checks(&report(&out));
    assert_eq!(cs.len(), 1);
    assert!(cs[0].0.starts_with("p=3"));

    let bad = write(dir.path(), "bad.toml", "bound = 2\nprimez = [5]\n");
    assert_eq!(padiclab(&["grid", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn table_format() {
    let out = padiclab(&["--format", "table", "verify", "wp-lift", "--terms", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS")), "{text}");
}
