use std::path::Path;
use std::process::Command;

/// Runs `geomem dims` at `t = 1e-3` and returns `(match_rate, no_gap_rate)`
/// plus the per-repetition `(k, no_gap)` rows.
fn dims(dir: &Path, spec: &str, n: usize, estimator: &str, reps: usize) -> ((f64, f64), Vec<(usize, bool)>) {
    let cfg = format!(
        r#"{{"spec": {spec}, "N_list": [{n}], "t_grid": [0.001], "repetitions": {reps},
            "estimators": ["{estimator}"], "master_seed": 31}}"#
    );
    let cfg_path = dir.join(format!("{estimator}_{n}.json"));
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.join(format!("{estimator}_{n}"));
    let o = Command::new(env!("CARGO_BIN_EXE_geomem"))
        .args(["dims", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("dims_summary.csv")).unwrap();
    let cols: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let rates = (cols[6].parse().unwrap(), cols[5].parse().unwrap());
    let rows = std::fs::read_to_string(out.join("dims.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[4].parse().unwrap(), c[5] == "true")
        })
        .collect();
    (rates, rows)
}

const THREE_OF_TEN: &str = r#"{"ambient_dim": 10, "blocks": [{"dim": 3, "variance": 1.0}]}"#;

#[test]
fn exact_oracle_recovers_m_for_any_n() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"ambient_dim": 30, "blocks": [{"dim": 5, "variance": 1.0}, {"dim": 10, "variance": 0.3}]}"#;
    for n in [10, 1000] {
        let ((match_rate, no_gap), _) = dims(dir.path(), spec, n, "exact", 3);
        assert_eq!((match_rate, no_gap), (1.0, 0.0));
    }
}

#[test]
fn large_dataset_recovers_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let ((match_rate, _), _) = dims(dir.path(), THREE_OF_TEN, 100_000, "empirical", 10);
    assert!(match_rate >= 0.8, "match rate {match_rate}");
}

#[test]
fn tiny_dataset_loses_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let ((match_rate, _), rows) = dims(dir.path(), THREE_OF_TEN, 10, "empirical", 20);
    let collapsed = rows.iter().filter(|(k, no_gap)| *k == 0 || *no_gap).count();
    assert!(collapsed * 2 > rows.len(), "k = 0 or no gap in {collapsed} of {}", rows.len());
    assert!(match_rate < 0.5);
}
