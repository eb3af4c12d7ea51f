use dunham::cli::{run, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};
use dunham::wkb_series::{gen_terms, WkbSeries};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dunham").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn terms_plain_first_two() {
    let (code, out, _) = call(&["terms", "--n-max", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "T_0 = -Q^(1/2)\nT_1 = -1/4 * Q' * Q^-1\n");
}

#[test]
fn terms_latex_golden() {
    let (code, out, _) = call(&["terms", "--n-max", "3", "--format", "latex"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, include_str!("golden/terms_latex_n3.txt"));
}

#[test]
fn terms_json_round_trip() {
    let (code, out, _) = call(&["terms", "--n-max", "0", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let s: WkbSeries = serde_json::from_str(&out).unwrap();
    assert_eq!(s.terms().len(), 1);

    let (_, out, _) = call(&["terms", "--n-max", "9", "--format", "json"]);
    let s: WkbSeries = serde_json::from_str(&out).unwrap();
    assert_eq!(s, gen_terms(9));
}

#[test]
fn terms_rejects_csv() {
    assert_eq!(call(&["terms", "--n-max", "2", "--format", "csv"]).0, EXIT_USAGE);
}

#[test]
fn verify_odd() {
    let (code, out, _) = call(&["verify-odd", "--n-max", "4"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 5);
    assert!(out.lines().skip(1).all(|l| l.contains("true")));

    let (code, out, _) = call(&["verify-odd", "--n-max", "7", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let certs = v["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 7);
    assert!(certs.iter().all(|c| c["verified"] == true));

    let (code, _, err) = call(&["verify-odd", "--n-max", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("n-max"));
}

#[test]
fn spectrum_harmonic_csv() {
    let (code, out, _) = call(&["spectrum", "x^2", "--levels", "4", "--order", "2", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next().unwrap(), "K,E,residual,B_0,B_2,B_4,optimal_truncation_index");
    for (k, e) in csv_column(&out, "E").iter().enumerate() {
        let e: f64 = e.parse().unwrap();
        assert!((e - (2 * k + 1) as f64).abs() < 1e-8);
    }
}

#[test]
fn spectrum_parse_error_names_token() {
    let (code, _, err) = call(&["spectrum", "sin(x)", "--levels", "2", "--order", "1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("sin"), "{err}");
    let (code, _, _) = call(&["spectrum", "x^3", "--levels", "2", "--order", "1"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn spectrum_reports_failed_levels() {
    // the ground state of the quartic well has no root at order 3
    let (code, out, err) = call(&["spectrum", "x^4", "--levels", "6", "--order", "3", "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 6);
    if levels[0].get("error").is_some() {
        assert_eq!(code, EXIT_NUMERIC);
        assert!(err.contains("K = 0"));
    }
    for l in &levels[1..] {
        assert!(l["E"].as_f64().is_some());
    }
}

#[test]
fn seed_bracket_flag() {
    let (code, out, _) = call(&["spectrum", "x^2", "--levels", "1", "--order", "0", "--seed-bracket", "0.5,1.5", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let e: f64 = csv_column(&out, "E")[0].parse().unwrap();
    assert!((e - 1.0).abs() < 1e-9);
    assert_eq!(call(&["spectrum", "x^2", "--levels", "1", "--order", "0", "--seed-bracket", "2,1"]).0, EXIT_USAGE);
    assert_eq!(call(&["spectrum", "x^2", "--levels", "1", "--order", "0", "--seed-bracket", "2,4"]).0, EXIT_NUMERIC);
}

#[test]
fn oracle_command() {
    let (code, out, _) = call(&["oracle", "x^2", "--count", "3", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let es: Vec<f64> = csv_column(&out, "E").iter().map(|s| s.parse().unwrap()).collect();
    for (k, e) in es.iter().enumerate() {
        assert!((e - (2 * k + 1) as f64).abs() < 1e-9);
    }
    let (code, out, _) = call(&["oracle", "x^4", "--count", "6", "--mode", "fd", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["levels"].as_array().unwrap().len(), 6);
    assert!((v["levels"][0]["E"].as_f64().unwrap() - 1.060362).abs() < 1e-6);
    assert_eq!(call(&["oracle", "x^2", "--count", "0"]).0, EXIT_USAGE);
}

#[test]
fn compare_command() {
    let (code, out, _) = call(&["compare", "x^2", "--levels", "3", "--orders", "0,2", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next().unwrap(), "K,order,E_dunham,E_oracle,abs_err,rel_err");
    assert_eq!(out.lines().count(), 7);
    assert!(csv_column(&out, "abs_err").iter().all(|e| e.parse::<f64>().unwrap() < 1e-8));

    let (code, out, _) = call(&["compare", "x^4", "--levels", "6", "--orders", "0,2", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    for order in [0, 2] {
        let rel: Vec<f64> = v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["order"] == order)
            .map(|r| r["rel_err"].as_f64().unwrap())
            .collect();
        assert!(rel.windows(2).all(|w| w[1] < w[0]), "order {order}: {rel:?}");
    }

    assert_eq!(call(&["compare", "x^2", "--levels", "3", "--orders", ""]).0, EXIT_USAGE);
    assert_eq!(call(&["compare", "x^2", "--levels", "3"]).0, EXIT_USAGE);
}

#[test]
fn manifest_and_determinism() {
    let dir = std::env::temp_dir().join(format!("dunham-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run_once = |tag: &str| {
        let data = dir.join(format!("{tag}.csv"));
        let manifest = dir.join(format!("{tag}.json"));
        let args = [
            "spectrum",
            "0.5*x^2 + 0.1*x^4",
            "--levels",
            "3",
            "--order",
            "2",
            "--format",
            "csv",
            "--output",
            data.to_str().unwrap(),
            "--manifest-out",
            manifest.to_str().unwrap(),
        ];
        assert_eq!(call(&args).0, EXIT_OK);
        let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
        (std::fs::read(&data).unwrap(), m)
    };
    let (a, ma) = run_once("a");
    let (b, mb) = run_once("b");
    assert_eq!(a, b);
    assert_eq!(ma["command"], "spectrum");
    assert_eq!(ma["version"], env!("CARGO_PKG_VERSION"));
    assert!(ma["timestamp"].as_str().is_some());
    assert_eq!(ma["config"]["resolved"], mb["config"]["resolved"]);
    assert_eq!(ma["config"]["resolved"]["potential"]["coefficients"][4], "1/10");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn help_and_bad_flags() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify-odd"));
    assert_eq!(call(&["spectrum", "x^2", "--levels", "2"]).0, EXIT_USAGE);
    assert_eq!(call(&["nonsense"]).0, EXIT_USAGE);
}
