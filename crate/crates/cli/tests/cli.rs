use std::path::PathBuf;
use std::process::{Command, Output};

fn perp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn field(out: &Output, key: &str) -> String {
    stdout(out)
        .lines()
        .find_map(|l| {
            let mut parts = l.split_whitespace();
            (parts.next() == Some(key)).then(|| parts.next().unwrap_or("").to_string())
        })
        .unwrap_or_else(|| panic!("no `{key}` in {}", stdout(out)))
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("perp-cli-{}-{name}", std::process::id()))
}

const LINEAR: &[&str] = &[
    "price", "--kind", "linear", "--mode", "ct", "--kappa", "0.5", "--iota", "0", "--ra", "0.03",
    "--rb", "0.01", "--spot", "1",
];

#[test]
fn linear_price_example() {
    let out = perp(LINEAR);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(field(&out, "price"), "1.0416667");
    assert_eq!(field(&out, "basis"), "0.04166667");
    assert!(stdout(&out).contains("kappa + r_b - r_a > 0"));
}

#[test]
fn divergent_price_exits_two_and_names_the_inequality() {
    let out = perp(&[
        "price", "--kind", "linear", "--mode", "ct", "--kappa", "0.01", "--iota", "0", "--ra",
        "0.03", "--rb", "0.01", "--spot", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kappa + r_b - r_a > 0"), "{}", stderr(&out));
}

#[test]
fn everlasting_call_example() {
    let out = perp(&[
        "price", "--kind", "everlasting-call", "--kappa", "1", "--ra", "0", "--rb", "0", "--sigma",
        "1", "--strike", "1", "--spot", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(field(&out, "price"), "0.3333333");
}

#[test]
fn quanto_and_inverse_prices() {
    let out = perp(&[
        "price", "--kind", "quanto", "--kappa", "0.5", "--ra", "0.03", "--rb", "0.01", "--rc",
        "0.02", "--sigma", "0.2", "--sigma-z", "0.2", "--z0", "1",
    ]);
    assert_eq!(field(&out, "price"), "1.1111111");
    let out = perp(&["price", "--kind", "quanto", "--mode", "dt", "--kappa", "0.5", "--z0", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = perp(&["price", "--kind", "inverse", "--mode", "dt", "--kappa", "0.05", "--ra", "0.0001"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(perp(&["price", "--kappa"]).status.code(), Some(1));
    assert_eq!(perp(&["price", "--kind", "swap", "--kappa", "1"]).status.code(), Some(1));
    assert_eq!(perp(&["price", "--kind", "linear"]).status.code(), Some(1));
    assert_eq!(perp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(perp(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_exit_three() {
    let out = perp(&["basis", "--kind", "linear", "--kappa", "1", "--input", "/nonexistent/h.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = perp(&["--config", "/nonexistent/perp.conf", "price"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let path = scratch("conf");
    std::fs::write(&path, "# defaults\nkind = linear\nkappa = 0.5\nra = 0.03\nrb = 0.01\n").unwrap();
    let conf = path.to_str().unwrap();
    let from_file = perp(&["--config", conf, "price"]);
    let overridden = perp(&["--config", conf, "price", "--rb", "0.03"]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(field(&from_file, "price"), "1.0416667");
    assert_eq!(field(&overridden, "price"), "1.0000000");

    let bad = scratch("bad-conf");
    std::fs::write(&bad, "colour = red\n").unwrap();
    let out = perp(&["--config", bad.to_str().unwrap(), "price"]);
    std::fs::remove_file(&bad).unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn json_mode_keeps_full_precision() {
    let mut args = vec!["--json"];
    args.extend_from_slice(LINEAR);
    let out = perp(&args);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["price"].as_f64().unwrap(), 0.5 / 0.48);
    assert_eq!(v["kind"], "linear");
}

#[test]
fn curve_writes_figure_csv() {
    let out = perp(&["curve", "--figure", "fig3", "--points", "21"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("spot,everlasting_call"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0][1], 0.0);
    assert!((rows[20][1] - 7.0 / 6.0).abs() < 1e-12);

    let path = scratch("fig2.csv");
    let out = perp(&["curve", "--figure", "fig2", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(written.lines().count(), 82);
    assert_eq!(perp(&["curve", "--figure", "fig9"]).status.code(), Some(1));
}

#[test]
fn mc_brackets_the_closed_form() {
    let out = perp(&[
        "--json", "mc", "--kind", "linear", "--kappa", "0.5", "--ra", "0.03", "--rb", "0.01",
        "--sigma", "0.3", "--samples", "20000", "--seed", "7",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["z"].as_f64().unwrap().abs() <= 3.0, "{v}");
    assert_eq!(v["n"], 20000);
}

#[test]
fn replicate_reports_a_small_hedge_error() {
    let out = perp(&[
        "--json", "replicate", "--kappa", "0.5", "--ra", "0.03", "--rb", "0.01", "--sigma", "0.5",
        "--horizon", "1", "--dt", "0.001",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["max_abs_value"].as_f64().unwrap() < 0.05, "{v}");
    assert_eq!(v["n_steps"], 1000);
}

#[test]
fn basis_and_funding_from_history() {
    let path = scratch("history.csv");
    std::fs::write(
        &path,
        "timestamp,spot,futures_price,funding_rate,kind\n\
         2024-05-01T00:00:00Z,100,100.1,0.0001,linear\n\
         2024-05-01T08:00:00Z,101,101.2,0.0001,linear\n\
         2024-05-01T16:00:00Z,102,102.0,0.0001,linear\n",
    )
    .unwrap();
    let input = path.to_str().unwrap();
    let basis = perp(&["basis", "--kind", "linear", "--mode", "dt", "--kappa", "0.1", "--input", input]);
    let funding = perp(&["funding", "--kind", "linear", "--kappa", "0.1", "--input", input]);
    let mismatch = perp(&["basis", "--kind", "inverse", "--mode", "dt", "--kappa", "0.1", "--input", input]);
    std::fs::remove_file(&path).unwrap();

    assert!(basis.status.success(), "{}", stderr(&basis));
    assert_eq!(field(&basis, "rows"), "3");
    // zero rates put the theoretical basis at 0: mean of 0.1/100, 0.2/101, 0
    assert_eq!(field(&basis, "mean_deviation"), "0.0009933993");
    assert_eq!(mismatch.status.code(), Some(2));

    assert!(funding.status.success(), "{}", stderr(&funding));
    let text = stdout(&funding);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    // the long side pays kappa (f_t - x_t): 0.1 * 0.1
    assert!(lines[1].ends_with(",-0.01000000"), "{}", lines[1]);
}
