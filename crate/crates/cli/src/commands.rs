use std::path::Path;
use std::time::Instant;

use log::info;
use mmsupg::io::{write_csv, write_summary, write_vtk, ExperimentResult};
use mmsupg::norms::{report, NormReport};
use mmsupg::timestep::{run_simulation_with, Method};
use mmsupg::{ProblemSpec, Result, RunConfig, RunOutput};
use rayon::prelude::*;

use crate::settings::{ensure_dir, Settings};

pub struct Finished {
    pub output: RunOutput,
    pub norms: NormReport,
    pub seconds: f64,
}

fn simulate(problem: &ProblemSpec, cfg: &RunConfig, snapshots: Option<&Path>) -> Result<Finished> {
    let start = Instant::now();
    let steps = cfg.n_steps();
    let output = run_simulation_with(problem, cfg, |state, m| {
        let Some(dir) = snapshots else { return Ok(()) };
        let keep = m == 0 || m == steps || (cfg.output_every > 0 && m % cfg.output_every == 0);
        if keep {
            write_vtk(&state.mesh, &state.u, &dir.join(format!("u_{m:06}.vtk")))?;
        }
        Ok(())
    })?;
    let last = output.final_state();
    let norms = report(&last.mesh, &last.u, problem.exact.as_ref(), last.t)?;
    Ok(Finished {
        output,
        norms,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn row(settings: &Settings, cfg: &RunConfig, done: &Finished) -> ExperimentResult {
    ExperimentResult {
        method: cfg.method,
        n_elements: done.norms.n_elements,
        dt: cfg.dt,
        eps: settings.eps,
        h1: done.norms.h1_semi,
        seconds: done.seconds,
    }
}

fn norm_label(norms: &NormReport) -> &'static str {
    if norms.against_exact {
        "h1 error"
    } else {
        "h1 seminorm"
    }
}

pub fn run(settings: &Settings) -> Result<()> {
    let problem = settings.problem()?;
    let cfg = &settings.run;
    ensure_dir(&settings.out_dir)?;
    let done = simulate(&problem, cfg, Some(&settings.out_dir))?;
    let last = done.output.final_state();
    write_vtk(&last.mesh, &last.u, &settings.out_dir.join("final.vtk"))?;

    let n = &done.norms;
    let halvings: usize = done.output.mmpde.iter().map(|r| r.report.halvings).sum();
    let min_area = last.mesh.min_area();
    let entries = [
        ("problem", settings.problem_name.clone()),
        ("method", cfg.method.to_string()),
        ("n", cfg.n.to_string()),
        ("elements", n.n_elements.to_string()),
        ("dt", cfg.dt.to_string()),
        ("eps", settings.eps.to_string()),
        ("t", n.t.to_string()),
        ("steps", done.output.steps.to_string()),
        ("against_exact", n.against_exact.to_string()),
        ("h1", format!("{:.10e}", n.h1_semi)),
        ("l2", format!("{:.10e}", n.l2)),
        ("max_abs_u", format!("{:.10e}", done.output.max_abs_u)),
        ("min_area", format!("{min_area:.6e}")),
        ("mmpde_calls", done.output.mmpde.len().to_string()),
        ("mmpde_halvings", halvings.to_string()),
        ("seconds", format!("{:.3}", done.seconds)),
    ];
    write_summary(&entries, &settings.out_dir.join("summary.txt"))?;
    println!(
        "{} {} n={} t={}: {} {:.6e}, l2 {:.6e} ({:.1}s)",
        settings.problem_name,
        cfg.method,
        cfg.n,
        n.t,
        norm_label(n),
        n.h1_semi,
        n.l2,
        done.seconds
    );
    Ok(())
}

fn run_all(
    settings: &Settings,
    problem: &ProblemSpec,
    configs: Vec<RunConfig>,
) -> Result<Vec<ExperimentResult>> {
    configs
        .into_par_iter()
        .map(|cfg| {
            let done = simulate(problem, &cfg, None)?;
            info!("{} n={} done in {:.1}s", cfg.method, cfg.n, done.seconds);
            Ok(row(settings, &cfg, &done))
        })
        .collect()
}

fn print_rows(rows: &[ExperimentResult]) {
    println!(
        "{:<8} {:>7} {:>8} {:>14} {:>9}",
        "method", "N", "dt", "h1", "seconds"
    );
    for r in rows {
        println!(
            "{:<8} {:>7} {:>8} {:>14.6e} {:>9.1}",
            r.method.name(),
            r.n_elements,
            r.dt,
            r.h1,
            r.seconds
        );
    }
}

pub fn compare(settings: &Settings) -> Result<()> {
    let problem = settings.problem()?;
    let configs = Method::ALL
        .iter()
        .map(|&method| RunConfig {
            method,
            ..settings.run.clone()
        })
        .collect();
    let mut rows = run_all(settings, &problem, configs)?;
    mmsupg::io::sort_results(&mut rows);
    ensure_dir(&settings.out_dir)?;
    write_csv(&rows, &settings.out_dir.join("compare.csv"))?;
    print_rows(&rows);
    Ok(())
}

/// Least-squares slope of `log h1` against `log h`, `h = 1/n`.
pub fn loglog_slope(levels: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = levels.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn convergence(settings: &Settings, levels: &[usize], methods: &[Method]) -> Result<()> {
    let problem = settings.problem()?;
    let configs = methods
        .iter()
        .flat_map(|&method| levels.iter().map(move |&n| (method, n)))
        .map(|(method, n)| RunConfig {
            method,
            n,
            ..settings.run.clone()
        })
        .collect();
    let mut rows = run_all(settings, &problem, configs)?;
    mmsupg::io::sort_results(&mut rows);
    ensure_dir(&settings.out_dir)?;
    write_csv(&rows, &settings.out_dir.join("convergence.csv"))?;
    print_rows(&rows);
    if levels.len() >= 2 {
        let mut slopes = Vec::new();
        for &m in methods {
            let errors: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.h1)
                .collect();
            let slope = loglog_slope(levels, &errors);
            println!("{m} slope: {slope:.4}");
            slopes.push((m.name(), format!("{slope:.6}")));
        }
        let entries: Vec<(&str, String)> = slopes.iter().map(|(k, v)| (*k, v.clone())).collect();
        write_summary(&entries, &settings.out_dir.join("slopes.txt"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let levels = [8, 16, 32, 64];
        let errors: Vec<f64> = levels
            .iter()
            .map(|&n| 3.0 * (n as f64).powf(-0.5))
            .collect();
        assert!((loglog_slope(&levels, &errors) - 0.5).abs() < 1e-12);
    }
}
