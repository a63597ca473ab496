use std::path::Path;
use std::process::{Command, Output};

fn patchdg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchdg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = patchdg(d, &["generate-mesh", "quad:6", "--out", "sq.poly"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = patchdg(d, &["solve", "--mesh", "sq.poly", "--problem", "example1", "--order", "2", "--out", "run", "--diagnostics"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["solution.csv", "field.csv", "manifest.json", "matrix.mtx", "penalties.csv", "coeff_maps.json"] {
        assert!(d.join("run").join(f).is_file(), "{f}");
    }
    let sol = std::fs::read_to_string(d.join("run/solution.csv")).unwrap();
    assert_eq!(sol.lines().next().unwrap(), "cell_id,centroid_x,centroid_y,dof_value");
    assert_eq!(sol.lines().count(), 37);

    let man = read_json(&d.join("run/manifest.json"));
    assert_eq!(man["subcommand"], "solve");
    assert_eq!(man["threads"], 1);
    let cfg = &man["config"];
    assert_eq!(cfg["order"], 2);
    assert_eq!(cfg["patch"]["rule"], "von-neumann");
    assert_eq!(cfg["patch"]["depth"]["auto"]["safety"], 2.0);
    assert_eq!(cfg["assembly"]["penalty_k"], 10.0);
    assert_eq!(cfg["quadrature"]["cell_degree"], 6);
    assert_eq!(cfg["quadrature"]["edge_points"], 4);
    let res = &man["results"];
    assert_eq!(res["dofs"], 36);
    assert!(res["solver"]["residual"].as_f64().unwrap() < 1e-10);
    assert!(res["errors"]["l2_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_mesh_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = patchdg(tmp.path(), &["solve", "--mesh", "absent.poly", "--order", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("mesh: file not found"), "{}", stderr(&o));
}

#[test]
fn invalid_flags_fail_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cases: [&[&str]; 7] = [
        &["solve", "--mesh", "builtin:tri:4", "--order", "9", "--out", "o"],
        &["solve", "--mesh", "builtin:tri:4", "--order", "0", "--out", "o"],
        &["solve", "--mesh", "builtin:tri:4", "--order", "2", "--rule", "diagonal", "--out", "o"],
        &["solve", "--mesh", "builtin:tri:4", "--order", "2", "--depth", "-1", "--out", "o"],
        &["solve", "--mesh", "builtin:tri:4", "--order", "2", "--interior-penalty", "2", "--out", "o"],
        &["solve", "--mesh", "builtin:tri:4", "--order", "2", "--problem", "example7", "--out", "o"],
        &["study", "--mesh", "builtin:tri:4", "builtin:hex:4", "--out", "o"],
    ];
    for args in cases {
        let o = patchdg(d, args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!d.join("o").exists(), "{args:?} created output");
    }
    assert!(stderr(&patchdg(d, cases[0])).contains("order"));
}

#[test]
fn study_without_meshes_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = patchdg(tmp.path(), &["study", "--orders", "1,2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn study_table_has_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = patchdg(
        d,
        &["study", "--mesh", "builtin:tri:4", "builtin:tri:8", "builtin:tri:16", "--orders", "1,2,3", "--out", "st"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("st/study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,h_or_N,l2_error,energy_error,l2_rate,energy_rate");
    assert_eq!(lines.len(), 10);
    for (i, line) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], (i / 3 + 1).to_string());
        // The coarsest mesh of each order has no rate.
        assert_eq!(f[4].is_empty(), i % 3 == 0, "{line}");
    }
    for f in ["l2.svg", "energy.svg", "manifest.json"] {
        assert!(d.join("st").join(f).is_file());
    }
    let man = read_json(&d.join("st/manifest.json"));
    assert_eq!(man["config"]["meshes"].as_array().unwrap().len(), 3);
    assert_eq!(man["results"]["studies"].as_array().unwrap().len(), 3);
}

#[test]
fn partial_study_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = patchdg(d, &["study", "--mesh", "builtin:tri:1", "builtin:tri:4", "builtin:tri:8", "--orders", "3", "--out", "st"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let man = read_json(&d.join("st/manifest.json"));
    let failures = man["results"]["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["mesh_index"], 0);
    assert_eq!(failures[0]["numerical"], true);
    assert_eq!(std::fs::read_to_string(d.join("st/study.csv")).unwrap().lines().count(), 3);
}

#[test]
fn numerical_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = patchdg(tmp.path(), &["solve", "--mesh", "builtin:tri:1", "--order", "3", "--out", "o"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("solve: mesh too coarse"), "{}", stderr(&o));
}

#[test]
fn patch_report_has_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = patchdg(d, &["patch-report", "--mesh", "builtin:voronoi:5:2", "--order", "3", "--out", "r/report.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(d.join("r/report.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "cell_id,depth,members,R,r,gamma,theta,lambda_certified,lebesgue_estimate,cardinality_bound"
    );
    let cells = read_mesh_cells(d, "voronoi:5:2");
    assert_eq!(lines.len() - 1, cells);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{i},")));
    }
}

fn read_mesh_cells(d: &Path, spec: &str) -> usize {
    let o = patchdg(d, &["generate-mesh", spec, "--out", "count.poly"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    out.split(": ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap()
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let base = ["solve", "--mesh", "builtin:voronoi:10:3", "--order", "3", "--perturb", "0.2", "--seed", "11"];
    let one = [&base[..], &["--out", "t1"]].concat();
    let four = [&base[..], &["--out", "t4", "--threads", "4"]].concat();
    assert_eq!(code(&patchdg(d, &one)), 0);
    assert_eq!(code(&patchdg(d, &four)), 0);
    let a = std::fs::read(d.join("t1/solution.csv")).unwrap();
    let b = std::fs::read(d.join("t4/solution.csv")).unwrap();
    assert_eq!(a, b);
    let man = read_json(&d.join("t4/manifest.json"));
    assert_eq!(man["config"]["patch"]["perturbation"]["seed"], 11);
}

#[test]
fn custom_polynomial_problem_is_reproduced() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // u = 1 + x y - 2 y^2 with A = [[2, 0.5], [0.5, 1]] lies in P_2.
    std::fs::write(
        d.join("quad.json"),
        r#"{"name": "quadratic", "solution": [[0, 0, 1.0], [1, 1, 1.0], [0, 2, -2.0]],
            "coefficient": [[2.0, 0.5], [0.5, 1.0]], "boundary": "dirichlet"}"#,
    )
    .unwrap();
    let o = patchdg(d, &["solve", "--mesh", "builtin:mixed:6:0.1:2", "--order", "2", "--problem", "quad.json", "--out", "c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let man = read_json(&d.join("c/manifest.json"));
    assert_eq!(man["config"]["problem"]["name"], "quadratic");
    assert!(man["results"]["errors"]["l2_error"].as_f64().unwrap() < 1e-10);
    assert!(man["results"]["errors"]["energy_error"].as_f64().unwrap() < 1e-9);
}
