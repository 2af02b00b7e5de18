use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn windtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windtrace")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn classes_default_matches_golden_file() {
    let out = windtrace(&["classes"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, golden("classes_default.json"));
}

#[test]
fn classes_csv_matches_golden_file() {
    let out = windtrace(&["classes", "--delta", "-4", "--r", "2", "--level", "2", "--dmax", "8", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, golden("classes_delta4_level2.csv"));
}

#[test]
fn classes_table_contents() {
    let v = json(&windtrace(&["classes", "--dmax", "6"]));
    assert_eq!(v["schema_version"], 1);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    // D = 3 d is a discriminant only for d = 0, 3 mod 4
    for row in rows {
        let d = row["d"].as_i64().unwrap();
        assert_eq!(row["D"].as_i64().unwrap(), 3 * d);
        let classes = row["classes"].as_array().unwrap();
        assert_eq!(classes.is_empty(), d % 4 == 1 || d % 4 == 2, "d={d}");
        for chi in row["chi"].as_array().unwrap() {
            assert!([-1, 0, 1].contains(&chi.as_i64().unwrap()));
        }
    }
    // D = 9: the split classes [0, 3, C]
    let d3: Vec<Vec<i64>> = serde_json::from_value(rows[2]["classes"].clone()).unwrap();
    assert_eq!(d3, vec![vec![0, 3, 0], vec![0, 3, 1], vec![0, 3, 2]]);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let a = windtrace(&["classes", "--dmax", "16", "--level", "3", "--delta", "-3", "--r", "3", "--threads", "1"]);
    let b = windtrace(&["classes", "--dmax", "16", "--level", "3", "--delta", "-3", "--r", "3", "--threads", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let a = windtrace(&["series", "--dmax", "8", "--threads", "1"]);
    let b = windtrace(&["series", "--dmax", "8", "--threads", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn series_constant_terms_and_exponents() {
    let out = windtrace(&["series"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["g"]["constant_term"], "1/3");
    assert_eq!(v["theta_star"]["constant_term"], "1/3");
    for section in [&v["g"]["entries"], &v["theta_star"]["entries"], &v["theta"]["entries"]] {
        for en in section.as_array().unwrap() {
            let d = en["d"].as_i64().unwrap();
            assert!(d > 0 && (d % 4 == 0 || d % 4 == 3) && d <= 12, "d={d}");
        }
    }
    // the two routes to each trace agree
    for en in v["g"]["entries"].as_array().unwrap() {
        let t = en["trace"].as_f64().unwrap();
        let w = en["trace_winding"].as_f64().unwrap();
        assert!((t - w).abs() < 1e-6);
    }
    let samples = v["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 1);
    assert_eq!(samples[0]["tau"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn series_extends_without_changing_shared_rows() {
    let a = json(&windtrace(&["series", "--dmax", "12"]));
    let b = json(&windtrace(&["series", "--dmax", "16"]));
    for key in ["theta_star", "theta"] {
        let ea = a[key]["entries"].as_array().unwrap();
        let eb = b[key]["entries"].as_array().unwrap();
        assert!(eb.len() > ea.len());
        assert_eq!(ea[..], eb[..ea.len()]);
    }
    let ga = a["g"]["entries"].as_array().unwrap();
    let gb = b["g"]["entries"].as_array().unwrap();
    assert_eq!(ga[..], gb[..ga.len()]);
}

#[test]
fn series_csv_columns() {
    let out = windtrace(&["series", "--dmax", "4", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("series,d,term,a,b"));
    assert!(text.contains("g,0,constant,1/3,"));
    assert!(text.contains("theta_star,0,constant,1/3,"));
    assert!(text.lines().filter(|l| l.starts_with("theta,")).skip(1).all(|l| l.split(',').nth(2) == Some("gauss")));
}

#[test]
fn tau_samples_are_repeatable() {
    let v = json(&windtrace(&["series", "--dmax", "4", "--tau", "0.4+1.2i", "--tau", "-0.1+0.8i"]));
    let s = v["samples"].as_array().unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[1]["tau"], serde_json::json!([-0.1, 0.8]));
    assert_eq!(v["theta_star"]["v_min"], 0.8);
}

#[test]
fn verify_subset_passes() {
    let out = windtrace(&["verify", "--criterion", "1", "--criterion", "7", "--criterion", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["all_pass"], true);
    let crit = v["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 3);
    for c in crit {
        assert!(!c["residuals"].as_array().unwrap().is_empty());
    }
}

#[test]
fn verify_all_passes() {
    let out = windtrace(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["criteria"].as_array().unwrap().len(), 10);
}

#[test]
fn forced_failure_names_the_criterion() {
    let out = windtrace(&["verify", "--criterion", "7", "--perturb", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("periodic-g-fourier"), "{err}");
    let v = json(&out);
    assert_eq!(v["criteria"][0]["pass"], false);
    let out = windtrace(&["verify", "--criterion", "9", "--perturb", "9", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("id,name,pass,label,value,tolerance\n"));
    assert!(text.contains("9,shimura-block,false,"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["classes", "--tol", "1e-2"][..],
        &["classes", "--tol", "1e-13"],
        &["series", "--tau", "0.3-1i"],
        &["series", "--tau", "x"],
        &["classes", "--delta", "-5"],
        &["classes", "--delta", "-4", "--r", "1"],
        &["classes", "--format", "xml"],
        &["verify", "--criterion", "11"],
        &["bogus"],
    ] {
        assert_eq!(windtrace(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_path_is_reported() {
    let out = windtrace(&["classes", "--out", "/nonexistent-dir/classes.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("/nonexistent-dir/classes.json"));
}

#[test]
fn writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let out = windtrace(&["classes", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), golden("classes_default.json"));
}

#[test]
fn unreachable_precision_exits_3() {
    let out = windtrace(&["series", "--dmax", "3", "--tol", "1e-12", "--precision", "high"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
