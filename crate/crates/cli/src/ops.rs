//! Implementations of the three subcommands.

use std::sync::Arc;
use std::time::Instant;

use onebit_jscc::baselines;
use onebit_jscc::io;
use onebit_jscc::montecarlo;
use onebit_jscc::optimizer::{self, OptimizerConfig};
use onebit_jscc::{dop, mse};
use onebit_jscc::{make_grid, Criterion, SystemParams};
use rayon::prelude::*;

use crate::manifest::RunManifest;
use crate::{
    Axis, CliError, DescentArgs, GridArgs, ModelArgs, OptimizeArgs, SweepArgs, ValidateArgs,
};

const SWEEP_HEADER: &str = "axis_value,scheme,value";
const ALL_SCHEMES: [&str; 5] = ["elb", "noe", "pbt", "plt", "slb"];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Builds validated system parameters, naming the offending flag on error.
fn build_params(m: &ModelArgs) -> Result<SystemParams, CliError> {
    for (flag, value) in [
        ("--sigma-v", m.sigma_v),
        ("--sigma-u", m.sigma_u),
        ("--sigma-w", m.sigma_w),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(usage(format!(
                "{flag} must be a positive finite number, got {value}"
            )));
        }
    }
    if !m.r.is_finite() || !(-1.0..=1.0).contains(&m.r) {
        return Err(usage(format!("--r must lie in [-1, 1], got {}", m.r)));
    }
    let mut params = SystemParams::new(m.sigma_v, m.sigma_u, m.sigma_w, m.r)?;
    match (Criterion::from(m.criterion), m.d_target) {
        (Criterion::Dop, None) => {
            return Err(usage("--d-target is required when --criterion dop"));
        }
        (Criterion::Dop, Some(d)) => {
            if !d.is_finite() || d <= 0.0 {
                return Err(usage(format!(
                    "--d-target must be a positive finite number, got {d}"
                )));
            }
            params = params.with_d_target(d)?;
        }
        (Criterion::Mse, Some(_)) => {
            return Err(usage("--d-target only applies to --criterion dop"));
        }
        (Criterion::Mse, None) => {}
    }
    Ok(params)
}

/// Builds the optimizer configuration from the grid and descent flags.
fn build_cfg(
    m: &ModelArgs,
    g: &GridArgs,
    d: &DescentArgs,
) -> Result<OptimizerConfig, CliError> {
    if g.grid_n < 3 || g.grid_n % 2 == 0 {
        return Err(usage(format!(
            "--grid-n must be an odd integer >= 3, got {}",
            g.grid_n
        )));
    }
    if !g.grid_halfwidth.is_finite() || g.grid_halfwidth < 4.0 {
        return Err(usage(format!(
            "--grid-halfwidth must be >= 4, got {}",
            g.grid_halfwidth
        )));
    }
    let v_grid = Arc::new(make_grid(m.sigma_v, g.grid_halfwidth, g.grid_n)?);
    let u_grid = Arc::new(make_grid(m.sigma_u, g.grid_halfwidth, g.grid_n)?);
    let mut cfg = OptimizerConfig::new(m.criterion.into(), v_grid, u_grid);
    if let Some(step) = d.step_size {
        if !step.is_finite() || step <= 0.0 {
            return Err(usage(format!(
                "--step-size must be a positive finite number, got {step}"
            )));
        }
        cfg.step_size = step;
    }
    if let Some(iters) = d.max_iters {
        if iters == 0 {
            return Err(usage("--max-iters must be >= 1"));
        }
        cfg.max_iters = iters;
    }
    if let Some(tol) = d.tol {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(usage(format!(
                "--tol must be a positive finite number, got {tol}"
            )));
        }
        cfg.grad_tol = tol;
    }
    Ok(cfg)
}

fn record_model_params(man: &mut RunManifest, m: &ModelArgs, g: &GridArgs, cfg: &OptimizerConfig) {
    man.param("sigma_v", m.sigma_v)
        .param("sigma_u", m.sigma_u)
        .param("sigma_w", m.sigma_w)
        .param("r", m.r)
        .param("criterion", Criterion::from(m.criterion));
    if let Some(d) = m.d_target {
        man.param("d_target", d);
    }
    man.param("grid_n", g.grid_n)
        .param("grid_halfwidth", g.grid_halfwidth)
        .param("step_size", cfg.step_size)
        .param("max_iters", cfg.max_iters)
        .param("tol", cfg.grad_tol);
}

pub fn cmd_optimize(a: OptimizeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let params = build_params(&a.model)?;
    let cfg = build_cfg(&a.model, &a.grid, &a.descent)?;

    let report = match (a.power, a.lambda) {
        (Some(p), None) => {
            if !p.is_finite() || p <= 0.0 {
                return Err(usage(format!(
                    "--power must be a positive finite number, got {p}"
                )));
            }
            optimizer::solve_for_power(p, &params, &cfg)?
        }
        (None, Some(l)) => {
            if !l.is_finite() || l < 0.0 {
                return Err(usage(format!(
                    "--lambda must be a finite number >= 0, got {l}"
                )));
            }
            optimizer::descend_from_starts(&params.with_lambda(l)?, &cfg, None, None)?
        }
        // clap's arg group enforces exactly one of --power/--lambda.
        _ => unreachable!("budget group admits exactly one flag"),
    };

    std::fs::create_dir_all(&a.out).map_err(onebit_jscc::Error::from)?;
    let mapping_path = a.out.join("mapping.csv");
    let decoder_path = a.out.join("decoder.csv");
    let summary_path = a.out.join("summary.csv");
    io::write_mapping(&report.mapping, &mapping_path)?;
    io::write_decoder(&report.decoder, &decoder_path)?;
    io::write_records(
        &summary_path,
        optimizer::SUMMARY_HEADER,
        &[report.summary_record()],
    )?;

    let mut man = RunManifest::new("optimize");
    record_model_params(&mut man, &a.model, &a.grid, &cfg);
    if let Some(p) = a.power {
        man.param("power", p);
    }
    if let Some(l) = a.lambda {
        man.param("lambda", l);
    }
    man.output(&mapping_path)
        .output(&decoder_path)
        .output(&summary_path);
    man.write(&a.out.join("manifest.txt"), started.elapsed())?;

    if report.power_target_missed {
        eprintln!(
            "warning: power target not attainable within the weight bracket; \
             nearest achieved power is {:.6e}",
            report.power
        );
    }
    println!("{}", optimizer::SUMMARY_HEADER);
    println!("{}", report.summary_record());
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Validated, deduplicated, alphabetically sorted scheme list.
fn resolve_schemes(requested: &[String], criterion: Criterion) -> Result<Vec<String>, CliError> {
    let mut schemes: Vec<String> = if requested.is_empty() {
        ALL_SCHEMES
            .iter()
            .filter(|&&s| !(s == "slb" && criterion == Criterion::Dop))
            .map(|&s| s.to_string())
            .collect()
    } else {
        for s in requested {
            if !ALL_SCHEMES.contains(&s.as_str()) {
                return Err(usage(format!(
                    "--schemes: unknown scheme \"{s}\" (expected a subset of {})",
                    ALL_SCHEMES.join(",")
                )));
            }
            if s == "slb" && criterion == Criterion::Dop {
                return Err(usage(
                    "--schemes: \"slb\" is undefined for --criterion dop \
                     (the capacity bound has no outage form)",
                ));
            }
        }
        requested.to_vec()
    };
    schemes.sort();
    schemes.dedup();
    Ok(schemes)
}

/// One scheme's criterion value at one sweep point.
fn scheme_value(
    scheme: &str,
    params: &SystemParams,
    p_target: f64,
    snr: f64,
    cfg: &OptimizerConfig,
) -> onebit_jscc::Result<f64> {
    let criterion = cfg.criterion;
    Ok(match scheme {
        "noe" => optimizer::solve_for_power(p_target, params, cfg)?.criterion_value,
        "plt" => {
            baselines::optimize_plt(params, p_target, criterion, &cfg.v_grid, &cfg.u_grid, None)?
                .value
        }
        "pbt" => {
            baselines::optimize_pbt(params, p_target, criterion, &cfg.v_grid, &cfg.u_grid, None)?
                .value
        }
        "slb" => baselines::slb(params, snr)?.value,
        "elb" => match criterion {
            Criterion::Mse => baselines::elb_mse_at_power(params, p_target, cfg)?.value,
            Criterion::Dop => baselines::elb_dop_at_power(params, p_target, cfg)?.value,
        },
        other => unreachable!("schemes validated, got {other}"),
    })
}

pub fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let params = build_params(&a.model)?;
    let cfg = build_cfg(&a.model, &a.grid, &a.descent)?;
    let criterion = Criterion::from(a.model.criterion);
    let schemes = resolve_schemes(&a.schemes, criterion)?;

    // Axis bounds and sampling (defaults reproduce the published curves).
    let (lo, hi, n_points) = match a.axis {
        Axis::Snr => (
            a.axis_min.unwrap_or(-10.0),
            a.axis_max.unwrap_or(20.0),
            a.axis_points.unwrap_or(20),
        ),
        Axis::R => (
            a.axis_min.unwrap_or(0.0),
            a.axis_max.unwrap_or(0.95),
            a.axis_points.unwrap_or(11),
        ),
    };
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(usage(format!(
            "--axis-min/--axis-max must be finite with min <= max, got [{lo}, {hi}]"
        )));
    }
    if n_points == 0 {
        return Err(usage("--axis-points must be >= 1"));
    }
    if a.axis == Axis::R && (lo < -1.0 || hi > 1.0) {
        return Err(usage(format!(
            "--axis-min/--axis-max must lie in [-1, 1] for --axis r, got [{lo}, {hi}]"
        )));
    }
    match a.axis {
        Axis::Snr => {
            if a.power.is_some() {
                return Err(usage(
                    "--power conflicts with --axis snr (power is the sweep axis)",
                ));
            }
        }
        Axis::R => {
            let p = a
                .power
                .ok_or_else(|| usage("--power is required for --axis r"))?;
            if !p.is_finite() || p <= 0.0 {
                return Err(usage(format!(
                    "--power must be a positive finite number, got {p}"
                )));
            }
        }
    }

    let points: Vec<f64> = if n_points == 1 {
        vec![lo]
    } else {
        (0..n_points)
            .map(|k| lo + (hi - lo) * k as f64 / (n_points - 1) as f64)
            .collect()
    };

    // Each point resolves to (axis value, params, power target, linear snr).
    let tasks: Vec<(f64, SystemParams, f64, f64)> = points
        .iter()
        .map(|&x| match a.axis {
            Axis::Snr => {
                let snr = 10f64.powf(x / 10.0);
                let p_target = snr * params.sigma_w * params.sigma_w;
                (x, params.clone(), p_target, snr)
            }
            Axis::R => {
                let p_target = a.power.expect("checked above");
                let snr = p_target / (params.sigma_w * params.sigma_w);
                let mut at_r = params.clone();
                at_r.r = x;
                (x, at_r, p_target, snr)
            }
        })
        .collect();

    let compute = || -> Vec<onebit_jscc::Result<Vec<String>>> {
        tasks
            .par_iter()
            .map(|(x, p, p_target, snr)| {
                schemes
                    .iter()
                    .map(|s| {
                        let value = scheme_value(s, p, *p_target, *snr, &cfg)?;
                        // The complementary convention (1 - distortion,
                        // 1 - outage) matches the published curves.
                        Ok(format!("{:.16e},{s},{:.16e}", x, 1.0 - value))
                    })
                    .collect()
            })
            .collect()
    };
    let results = match a.jobs {
        Some(0) => return Err(usage("--jobs must be >= 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| usage(format!("--jobs: cannot build thread pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    let mut rows = Vec::with_capacity(tasks.len() * schemes.len());
    for point_rows in results {
        rows.extend(point_rows?);
    }

    std::fs::create_dir_all(&a.out).map_err(onebit_jscc::Error::from)?;
    let sweep_path = a.out.join("sweep.csv");
    io::write_records(&sweep_path, SWEEP_HEADER, &rows)?;

    let mut man = RunManifest::new("sweep");
    record_model_params(&mut man, &a.model, &a.grid, &cfg);
    man.param(
        "axis",
        match a.axis {
            Axis::Snr => "snr",
            Axis::R => "r",
        },
    )
    .param("axis_min", lo)
    .param("axis_max", hi)
    .param("axis_points", n_points)
    .param("schemes", schemes.join("+"));
    if let Some(p) = a.power {
        man.param("power", p);
    }
    if let Some(j) = a.jobs {
        man.param("jobs", j);
    }
    man.output(&sweep_path);
    man.write(&a.out.join("manifest.txt"), started.elapsed())?;

    println!("wrote {} rows to {}", rows.len(), sweep_path.display());
    Ok(())
}

pub fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let params = build_params(&a.model)?;
    if a.samples == 0 {
        return Err(usage("--samples must be >= 1"));
    }
    let criterion = Criterion::from(a.model.criterion);
    let f = io::read_mapping(&a.mapping, params.sigma_v)?;
    let g = io::read_decoder(&a.decoder, params.sigma_u)?;

    let quadrature = match criterion {
        Criterion::Mse => mse::mse_distortion(&f, &g, &params)?.distortion,
        Criterion::Dop => dop::dop_evaluate(&f, &g, &params)?.outage,
    };
    let sim = montecarlo::simulate(&f, &g, &params, criterion, a.samples, a.seed)?;
    let diff = (sim.empirical_value - quadrature).abs();
    let gate = 4.0 * sim.std_error + 1e-12;
    let passed = diff <= gate;

    println!("criterion   {criterion}");
    println!("quadrature  {quadrature:.10e}");
    println!(
        "empirical   {:.10e} (n {}, seed {}, std error {:.4e})",
        sim.empirical_value, sim.n_samples, sim.seed, sim.std_error
    );
    println!(
        "difference  {:.4e} vs gate 4 x std error = {:.4e}",
        diff, gate
    );
    println!("{}", if passed { "PASS" } else { "FAIL" });

    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).map_err(onebit_jscc::Error::from)?;
        let summary_path = out.join("mc_summary.csv");
        io::write_records(
            &summary_path,
            montecarlo::SUMMARY_HEADER,
            &[sim.summary_record(criterion)],
        )?;
        let mut man = RunManifest::new("validate");
        man.param("sigma_v", a.model.sigma_v)
            .param("sigma_u", a.model.sigma_u)
            .param("sigma_w", a.model.sigma_w)
            .param("r", a.model.r)
            .param("criterion", criterion)
            .param("mapping", a.mapping.display())
            .param("decoder", a.decoder.display())
            .param("samples", a.samples)
            .param("seed", a.seed)
            .param("result", if passed { "pass" } else { "fail" });
        if let Some(d) = a.model.d_target {
            man.param("d_target", d);
        }
        man.output(&summary_path);
        man.write(&out.join("manifest.txt"), started.elapsed())?;
    }

    if passed {
        Ok(())
    } else {
        Err(CliError::ValidationFailed)
    }
}
