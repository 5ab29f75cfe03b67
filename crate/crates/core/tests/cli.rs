use std::path::Path;
use std::process::{Command, Output};

fn osgpcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osgpcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("iid.csv");
    let out = osgpcp(&["run", "--samples", "700", "--out", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("fitted sigma_theta2="));
    assert!(text.contains("osgpcp"));
    assert!(dir.path().join("iid.json").exists());

    let header = std::fs::read_to_string(&trace).unwrap();
    assert!(header.starts_with(
        "t,y_true,bayes_lo,bayes_hi,bayes_cov,bayes_size,scp_lo,scp_hi,scp_cov,scp_size,\
         acp_lo,acp_hi,acp_cov,acp_size,acp_empty,q_t,eta_t,reset\n"
    ));
    assert_eq!(header.lines().count(), 601);

    let summary = osgpcp(&["summarize", trace.to_str().unwrap()]);
    assert!(summary.status.success());
    let text = stdout(&summary);
    for method in ["bayes", "standard_cp", "osgpcp"] {
        assert!(text.contains(method), "{text}");
    }
}

#[test]
fn runs_on_the_bundled_sample() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("sample.csv");
    let sample = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample_ohlc.csv");
    let out = osgpcp(&[
        "run",
        "--dataset",
        "csv",
        "--csv-path",
        sample.to_str().unwrap(),
        "--eta-mode",
        "decaying",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("slots: 900"));
}

#[test]
fn reports_errors_without_panicking() {
    let out = osgpcp(&["run", "--dataset", "csv", "--csv-path", "/nonexistent/x.csv"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(!err.contains("panicked"));

    let out = osgpcp(&["run", "--alpha", "1.5", "--samples", "300"]);
    assert!(!out.status.success());

    let out = osgpcp(&["summarize", "/nonexistent/trace.csv"]);
    assert!(!out.status.success());
}
