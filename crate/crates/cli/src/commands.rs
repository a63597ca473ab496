use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use patchdg::analyze::{run_study, solve_problem, write_study_csv, write_svg_plot, PlotNorm};
use patchdg::mesh::{builtin_mesh, subtriangulate, validate_regularity, DEFAULT_SIGMA_THRESHOLD};
use patchdg::patch::report_row;
use patchdg::solve::{write_sampled_field_csv, write_solution_csv};
use patchdg::GlobalRecon;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{GenerateMeshArgs, PatchReportArgs, SolveArgs, StudyArgs};
use crate::config::*;
use crate::{stage, CliError};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| config_err(format!("output: {}: {e}", path.display())))
}

/// Runs `f` on a fresh file and tags failures with the file name.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> patchdg::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| config_err(format!("output: {}: {e}", path.display())))
}

fn write_manifest(dir: &Path, subcommand: &str, threads: usize, config: impl Serialize, results: impl Serialize) -> Result<(), CliError> {
    let manifest = json!({
        "tool": "patchdg",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "argv": std::env::args().collect::<Vec<_>>(),
        "threads": threads,
        "config": config,
        "results": results,
    });
    write_file(&dir.join("manifest.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn solve(a: &SolveArgs, threads: usize) -> Result<(), CliError> {
    let m = check_order(a.order)?;
    let opts = solve_options(&a.method)?;
    if a.samples < 2 {
        return Err(config_err(format!("samples: {} must be at least 2", a.samples)));
    }
    let (problem, problem_info) = load_problem(&a.method.problem)?;
    let (mesh, mesh_info) = load_mesh_arg(&a.mesh)?;
    let dir = &a.method.out;
    prepare_output_dir(dir)?;

    let out = solve_problem(&mesh, &problem, m, &opts).map_err(stage("solve"))?;

    write_file(&dir.join("solution.csv"), |w| write_solution_csv(&mesh, &out.solution, w))?;
    write_file(&dir.join("field.csv"), |w| {
        write_sampled_field_csv(&mesh, &out.recon, &out.solution, a.samples, w)
    })?;
    if a.diagnostics {
        write_file(&dir.join("matrix.mtx"), |w| out.system.matrix.write_matrix_market(w))?;
        write_file(&dir.join("penalties.csv"), |w| out.system.write_penalty_csv(&mesh, w))?;
        write_file(&dir.join("coeff_maps.json"), |w| out.recon.write_coeff_maps(w))?;
    }

    let depths = out.recon.ops.iter().map(|o| o.patch.depth);
    let config = json!({
        "mesh": mesh_info,
        "problem": problem_info,
        "order": m,
        "patch": opts.patch,
        "assembly": opts.assembly,
        "quadrature": resolved_quadrature(&opts.assembly, m),
        "energy_boundary": opts.energy_boundary,
        "field_samples": a.samples,
        "output_dir": dir,
    });
    let results = json!({
        "dofs": out.system.dim(),
        "pure_neumann": out.system.pure_neumann,
        "regularity": out.regularity,
        "patch_depth": { "min": depths.clone().min(), "max": depths.max() },
        "mean_patch_size": out.recon.mean_patch_size(),
        "max_condition": out.recon.max_condition(),
        "solver": out.solution.stats,
        "timings": out.timings,
        "errors": out.errors,
    });
    write_manifest(dir, "solve", threads, config, results)?;

    println!("{} on {} (N = {}, m = {m})", problem.name, mesh_info.source, mesh.num_cells());
    if let Some(e) = out.errors {
        println!("  L2 error     {:.6e}", e.l2_error);
        println!("  energy error {:.6e}", e.energy_error);
    }
    println!("  wrote {}", dir.display());
    Ok(())
}

pub fn study(a: &StudyArgs, threads: usize) -> Result<(), CliError> {
    if a.mesh.is_empty() {
        return Err(config_err("mesh: the study needs at least one mesh"));
    }
    if a.orders.is_empty() {
        return Err(config_err("orders: at least one order is required"));
    }
    let mut orders = Vec::with_capacity(a.orders.len());
    for &m in &a.orders {
        let m = check_order(m)?;
        if orders.contains(&m) {
            return Err(config_err(format!("orders: {m} is listed twice")));
        }
        orders.push(m);
    }
    let axis = rate_axis(&a.axis)?;
    let opts = solve_options(&a.method)?;
    let (problem, problem_info) = load_problem(&a.method.problem)?;
    if !problem_info.has_exact_solution {
        return Err(config_err(format!("problem: '{}' has no exact solution to measure errors against", problem.name)));
    }
    let mut meshes = Vec::with_capacity(a.mesh.len());
    let mut mesh_infos = Vec::with_capacity(a.mesh.len());
    for arg in &a.mesh {
        let (mesh, info) = load_mesh_arg(arg)?;
        meshes.push(mesh);
        mesh_infos.push(info);
    }
    let dir = &a.method.out;
    prepare_output_dir(dir)?;

    let result = run_study(&problem, &meshes, &orders, &opts, axis);

    write_file(&dir.join("study.csv"), |w| write_study_csv(&result.studies, w))?;
    write_file(&dir.join("l2.svg"), |w| write_svg_plot(&result.studies, PlotNorm::L2, w))?;
    write_file(&dir.join("energy.svg"), |w| write_svg_plot(&result.studies, PlotNorm::Energy, w))?;
    let config = json!({
        "meshes": mesh_infos,
        "problem": problem_info,
        "orders": orders,
        "axis": axis,
        "patch": opts.patch,
        "assembly": opts.assembly,
        "quadrature": orders.iter().map(|&m| resolved_quadrature(&opts.assembly, m)).collect::<Vec<_>>(),
        "energy_boundary": opts.energy_boundary,
        "output_dir": dir,
    });
    write_manifest(dir, "study", threads, config, &result)?;

    for s in &result.studies {
        match &s.rates {
            Some(r) => println!(
                "m = {}: L2 rate {:.2}, energy rate {:.2} over {} meshes",
                s.m,
                r.l2_tail,
                r.energy_tail,
                s.reports.len()
            ),
            None => println!("m = {}: no rates ({} successful meshes)", s.m, s.reports.len()),
        }
    }
    println!("  wrote {}", dir.display());
    if result.failures.is_empty() {
        Ok(())
    } else {
        for f in &result.failures {
            eprintln!("  failed: m = {} mesh {}: {}", f.m, mesh_infos[f.mesh_index].source, f.message);
        }
        Err(CliError::PartialStudy {
            failed: result.failures.len(),
            total: orders.len() * meshes.len(),
        })
    }
}

pub fn patch_report(a: &PatchReportArgs) -> Result<(), CliError> {
    let m = check_order(a.order)?;
    let opts = patch_options(&a.patch)?;
    if a.density == 0 {
        return Err(config_err("density: must be at least 1"));
    }
    let (mesh, info) = load_mesh_arg(&a.mesh)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_output_dir(parent)?;
    }

    let sub = subtriangulate(&mesh).map_err(stage("mesh"))?;
    let reg = validate_regularity(&mesh, &sub, DEFAULT_SIGMA_THRESHOLD);
    let recon = GlobalRecon::build(&mesh, m, &opts).map_err(stage("reconstruction"))?;
    let rows = recon
        .ops
        .par_iter()
        .map(|op| report_row(&mesh, &reg, &op.patch, m, a.density))
        .collect::<patchdg::Result<Vec<_>>>()
        .map_err(stage("patch-report"))?;

    write_file(&a.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        for r in &rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    })?;
    let uncertified = rows.iter().filter(|r| r.lambda_certified.is_none()).count();
    println!(
        "{}: {} cells, {uncertified} without a certified lambda bound, wrote {}",
        info.source,
        rows.len(),
        a.out.display()
    );
    Ok(())
}

pub fn generate_mesh(a: &GenerateMeshArgs) -> Result<(), CliError> {
    let spec = a.spec.strip_prefix("builtin:").unwrap_or(&a.spec);
    let mesh = builtin_mesh(spec).map_err(|e| config_err(format!("mesh: {e}")))?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_output_dir(parent)?;
    }
    let text = mesh.to_polymesh_string();
    std::fs::write(&a.out, text).map_err(|e| config_err(format!("output: {}: {e}", a.out.display())))?;
    println!("{spec}: {} cells, h = {:.4}, wrote {}", mesh.num_cells(), mesh.h(), a.out.display());
    Ok(())
}
