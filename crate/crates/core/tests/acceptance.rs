//! End-to-end acceptance checks for the whole design/evaluation pipeline.
//!
//! Each check prints exactly one status line on success
//! (`acceptance NN (<label>): PASS <detail>`) and one matching FAIL line
//! (with the offending numbers) before panicking, so a full run's transcript
//! contains one line per criterion. Run them in order with
//! `cargo test --test acceptance -- --test-threads=1 --nocapture`.
//!
//! Every tolerance is pinned as a named constant below, next to a note on
//! what limits it.

use std::sync::Arc;
use std::time::Instant;

use onebit_jscc::baselines::{one_bit_capacity, optimize_pbt, optimize_plt, slb};
use onebit_jscc::baselines::{elb_dop_at_power, elb_mse_at_power};
use onebit_jscc::dop::{dop_decoder, dop_evaluate, DopProblem};
use onebit_jscc::model::make_grid;
use onebit_jscc::montecarlo::simulate;
use onebit_jscc::mse::{mmse_decoder, mse_distortion, MseProblem};
use onebit_jscc::optimizer::{
    descend_from_starts, measure_period, solve_for_power, OptimizerConfig, StartSpec,
};
use onebit_jscc::specfun::normal_pdf;
use onebit_jscc::{Criterion, EncoderMapping, SourceGrid, SystemParams};

// ---------------------------------------------------------------------------
// Pinned tolerances.
// ---------------------------------------------------------------------------

/// 01: quadrature MSE of the zero encoder against the side-information floor
/// (1 - r^2) sigma_v^2. Limited by grid truncation at 6 sigma (~7e-8).
const ZERO_ENCODER_TOL: f64 = 1e-6;

/// 02: the optimized transmit power must be driven essentially to zero by a
/// large power penalty before the no-channel comparison is meaningful.
const VANISHING_POWER_CEILING: f64 = 1e-6;
/// 02: outage of the vanishing-power optimum against the no-channel limit.
const VANISHING_POWER_OUTAGE_TOL: f64 = 5e-3;
/// 02: the no-channel outage limit 2 Q(sqrt(D) / (sigma_v sqrt(1 - r^2)))
/// at sigma_v = 1, r = 0.6, D = 0.09, i.e. 2 Q(0.375).
const NO_CHANNEL_OUTAGE_LIMIT: f64 = 0.707_660_466_654_552_4;

/// 03: relative agreement of the analytic MSE gradient with central finite
/// differences of the quadrature Lagrangian.
const MSE_GRAD_REL_TOL: f64 = 1e-3;
/// 03: same for the outage gradient, on nodes where the finite-difference
/// stencil does not flip any decoder decision.
const DOP_GRAD_REL_TOL: f64 = 2e-2;
/// 03/"active": nodes with source density above this take part in the
/// gradient comparison (matches the optimizer's own active-node floor).
const ACTIVE_PDF_FLOOR: f64 = 1e-8;
/// 03: absolute floor on the comparison denominator. Central differences of
/// an O(1) objective carry irreducible f64 noise of about
/// eps*|L|/(2h) + L'''*h^2/6 ~ 2e-11 with the h used here, so derivatives
/// below ~3e-7 (a 1e-3-relative gate of 3e-10, ten times the noise) cannot
/// be certified to a relative tolerance by finite differences at all; they
/// are compared against this floor instead. Far-tail nodes whose true
/// derivative is that small are numerically zero for the descent.
const FD_NOISE_FLOOR: f64 = 3e-7;

/// 04: gradient sup-norm over active nodes at a converged MSE optimum.
const MSE_STATIONARITY_TOL: f64 = 1e-4;
/// 04: same for the outage criterion (its quadrature is rougher).
const DOP_STATIONARITY_TOL: f64 = 1e-3;

/// 05: slack allowed when the optimized mapping is compared against the best
/// sawtooth/two-level baselines (they are members of its search space).
const BOUND_CHAIN_SLACK: f64 = 1e-4;

/// 06: periods measured at two power budgets must agree within this many
/// grid spacings.
const PERIOD_AGREEMENT_SPACINGS: f64 = 2.0;

/// 07: Monte Carlo vs. quadrature gate in standard errors of the mean.
const MC_SIGMA_GATE: f64 = 4.0;
/// 07: simulation size per pair.
const MC_SAMPLES: u64 = 1_000_000;

/// 08: outage along an SNR sweep may rise by at most this much per step
/// (optimizer noise allowance), and the high-SNR endpoint must sit within
/// this of its own source-outage floor.
const SATURATION_SLACK: f64 = 1e-3;

/// 09: agreement of capacity/bound endpoints in the infinite-SNR limit.
const ENDPOINT_TOL: f64 = 1e-9;

/// 10: odd-symmetry drift allowed after a full optimization run at r = 0.
const ODDNESS_TOL: f64 = 1e-3;
/// 10: floating-point slack when checking that the mapping is non-decreasing.
const MONOTONE_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Harness helpers.
// ---------------------------------------------------------------------------

/// Fails the check with a formatted message unless the condition holds.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

/// Maps library errors into check failures.
fn lib<T>(r: onebit_jscc::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

/// Prints the one status line for a criterion and panics on failure.
fn conclude(id: u32, label: &str, started: Instant, outcome: Result<String, String>) {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("acceptance {id:02} ({label}): PASS [{secs:.1}s] {detail}"),
        Err(msg) => {
            println!("acceptance {id:02} ({label}): FAIL [{secs:.1}s] {msg}");
            panic!("acceptance {id:02} ({label}) failed: {msg}");
        }
    }
}

fn grid(sigma: f64, halfwidth: f64, n: usize) -> Result<Arc<SourceGrid>, String> {
    Ok(Arc::new(lib(make_grid(sigma, halfwidth, n))?))
}

/// Unit-variance system with correlation r (sigma_v = sigma_u = sigma_w = 1).
fn unit_params(r: f64) -> Result<SystemParams, String> {
    lib(SystemParams::new(1.0, 1.0, 1.0, r))
}

/// Deterministic stand-ins for "random smooth mappings": a linear ramp plus
/// two incommensurate sinusoids, with five pinned coefficient triples.
const SMOOTH_COEFFS: [(f64, f64, f64); 5] = [
    (0.9, 0.6, 0.3),
    (0.4, -0.7, 0.2),
    (1.1, 0.25, -0.5),
    (0.6, -0.3, -0.35),
    (0.2, 0.85, 0.15),
];

fn smooth_mapping(g: &Arc<SourceGrid>, (a, b, c): (f64, f64, f64)) -> Result<EncoderMapping, String> {
    let values = g
        .nodes
        .iter()
        .map(|&v| a * v + b * (1.3 * v).sin() + c * (0.7 * v).cos())
        .collect();
    lib(EncoderMapping::new(g.clone(), values))
}

/// Source density at a node of a grid with standard deviation sigma.
fn node_pdf(v: f64, sigma: f64) -> Result<f64, String> {
    Ok(lib(normal_pdf(v / sigma))? / sigma)
}

// ---------------------------------------------------------------------------
// 01 — zero encoder hits the side-information distortion floor.
// ---------------------------------------------------------------------------

#[test]
fn c01_zero_encoder_distortion_matches_side_information_floor() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        // With f = 0 the channel output carries nothing, so the best decoder
        // is the conditional mean given U alone and the distortion must be
        // (1 - r^2) sigma_v^2 up to quadrature truncation.
        let vg = grid(1.0, 6.0, 1201)?;
        let ug = grid(1.0, 6.0, 1201)?;
        let mut worst = 0.0f64;
        for r in [0.0, 0.6, 0.85] {
            let p = unit_params(r)?;
            let f = lib(EncoderMapping::new(vg.clone(), vec![0.0; vg.len()]))?;
            let g = lib(mmse_decoder(&f, &p, &ug))?;
            let d = lib(mse_distortion(&f, &g, &p))?.distortion;
            let want = 1.0 - r * r;
            let err = (d - want).abs();
            worst = worst.max(err);
            ensure!(
                err <= ZERO_ENCODER_TOL,
                "r = {r}: distortion {d:.12} vs floor {want:.12} (|diff| {err:.3e} > {ZERO_ENCODER_TOL:e})"
            );
        }
        Ok(format!("worst |D - (1 - r^2)| = {worst:.3e} over r in {{0, 0.6, 0.85}}"))
    };
    conclude(1, "zero encoder hits the side-information floor", t, run());
}

// ---------------------------------------------------------------------------
// 02 — a crushing power penalty drives outage to the no-channel limit.
// ---------------------------------------------------------------------------

#[test]
fn c02_vanishing_power_outage_approaches_the_no_channel_limit() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let vg = grid(1.0, 5.0, 2001)?;
        let ug = grid(1.0, 5.0, 1001)?;
        let p = lib(lib(unit_params(0.6)?.with_d_target(0.09))?.with_lambda(1e5))?;
        let mut cfg = OptimizerConfig::new(Criterion::Dop, vg, ug);
        cfg.starts = vec![StartSpec::NearZeroLinear];
        // The penalty dominates the objective; a step of 1/(2 lambda) makes
        // the penalized part contract immediately instead of backtracking
        // from the default step every iteration.
        cfg.step_size = 5e-6;
        cfg.max_iters = 2000;
        let rep = lib(descend_from_starts(&p, &cfg, None, None))?;
        ensure!(
            rep.power <= VANISHING_POWER_CEILING,
            "power {:.3e} not driven below {VANISHING_POWER_CEILING:e} by lambda = 1e5",
            rep.power
        );
        let err = (rep.criterion_value - NO_CHANNEL_OUTAGE_LIMIT).abs();
        ensure!(
            err <= VANISHING_POWER_OUTAGE_TOL,
            "outage {:.6} vs no-channel limit {NO_CHANNEL_OUTAGE_LIMIT:.6} (|diff| {err:.3e} > {VANISHING_POWER_OUTAGE_TOL:e})",
            rep.criterion_value
        );
        Ok(format!(
            "power {:.2e}, outage {:.6} vs limit {NO_CHANNEL_OUTAGE_LIMIT:.6} (|diff| {err:.2e})",
            rep.power, rep.criterion_value
        ))
    };
    conclude(2, "vanishing power recovers the no-channel outage", t, run());
}

// ---------------------------------------------------------------------------
// 03 — analytic gradients match finite differences of the quadrature.
// ---------------------------------------------------------------------------

#[test]
fn c03_analytic_gradients_match_finite_differences() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let mut mse_worst = 0.0f64;
        let mut dop_worst = 0.0f64;
        let mut dop_checked = 0usize;
        let mut dop_skipped = 0usize;

        // MSE: the decoder is refreshed inside each evaluation; since it
        // minimizes the objective over decoders, the envelope derivative
        // equals the fixed-decoder gradient. All active nodes must agree.
        let vg = grid(1.0, 5.0, 401)?;
        let ug = grid(1.0, 5.0, 201)?;
        for r in [0.0, 0.6] {
            let p = lib(unit_params(r)?.with_lambda(0.1))?;
            let problem = lib(MseProblem::new(&p, vg.clone(), ug.clone()))?;
            for coeffs in SMOOTH_COEFFS {
                let f = smooth_mapping(&vg, coeffs)?;
                let grad = lib(problem.gradient(&f))?;
                let analytic: Vec<f64> = (0..vg.len())
                    .map(|i| {
                        Ok::<f64, String>(vg.weights[i] * node_pdf(vg.nodes[i], 1.0)? * grad[i])
                    })
                    .collect::<Result<_, _>>()?;
                let gmax = analytic.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                for i in 0..vg.len() {
                    if node_pdf(vg.nodes[i], 1.0)? <= ACTIVE_PDF_FLOOR {
                        continue;
                    }
                    let h = 1e-5 * f.values[i].abs().max(1.0);
                    let mut fp = f.clone();
                    fp.values[i] += h;
                    let mut fm = f.clone();
                    fm.values[i] -= h;
                    let fd = (lib(problem.evaluate(&fp))?.lagrangian
                        - lib(problem.evaluate(&fm))?.lagrangian)
                        / (2.0 * h);
                    let denom = analytic[i]
                        .abs()
                        .max(fd.abs())
                        .max(1e-6 * gmax)
                        .max(FD_NOISE_FLOOR);
                    let rel = ((fd - analytic[i]) / denom).abs();
                    mse_worst = mse_worst.max(rel);
                    ensure!(
                        rel <= MSE_GRAD_REL_TOL,
                        "mse gradient node {i} (r = {r}, coeffs {coeffs:?}): fd {fd:.6e} vs analytic {:.6e} (rel {rel:.3e} > {MSE_GRAD_REL_TOL:e})",
                        analytic[i]
                    );
                }
            }
        }

        // Outage: the decoder solves a discrete window placement, so the
        // objective-with-refreshed-decoder is only piecewise smooth. Nodes
        // whose bump flips any decoder decision are boundary-crossing and
        // excluded; elsewhere the refreshed decoder is constant across the
        // stencil and the fixed-decoder derivative must match.
        let vg = grid(1.0, 5.0, 401)?;
        let ug = grid(1.0, 5.0, 301)?;
        for r in [0.0, 0.6] {
            let p = lib(lib(unit_params(r)?.with_d_target(0.09))?.with_lambda(0.1))?;
            let problem = lib(DopProblem::new(&p, vg.clone(), ug.clone(), None))?;
            for coeffs in SMOOTH_COEFFS {
                let f = smooth_mapping(&vg, coeffs)?;
                let g = lib(problem.decoder(&f))?;
                let grad = lib(problem.gradient_with(&f, &g))?;
                let analytic: Vec<f64> = (0..vg.len())
                    .map(|i| {
                        Ok::<f64, String>(vg.weights[i] * node_pdf(vg.nodes[i], 1.0)? * grad[i])
                    })
                    .collect::<Result<_, _>>()?;
                let gmax = analytic.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                for i in 0..vg.len() {
                    if node_pdf(vg.nodes[i], 1.0)? <= ACTIVE_PDF_FLOOR {
                        continue;
                    }
                    let h = 1e-5 * f.values[i].abs().max(1.0);
                    let mut fp = f.clone();
                    fp.values[i] += h;
                    let mut fm = f.clone();
                    fm.values[i] -= h;
                    let gp = lib(problem.decoder(&fp))?;
                    let gm = lib(problem.decoder(&fm))?;
                    if gp != g || gm != g {
                        dop_skipped += 1;
                        continue;
                    }
                    dop_checked += 1;
                    let fd = (lib(problem.evaluate_with(&fp, &g))?.lagrangian
                        - lib(problem.evaluate_with(&fm, &g))?.lagrangian)
                        / (2.0 * h);
                    let denom = analytic[i]
                        .abs()
                        .max(fd.abs())
                        .max(1e-6 * gmax)
                        .max(FD_NOISE_FLOOR);
                    let rel = ((fd - analytic[i]) / denom).abs();
                    dop_worst = dop_worst.max(rel);
                    ensure!(
                        rel <= DOP_GRAD_REL_TOL,
                        "outage gradient node {i} (r = {r}, coeffs {coeffs:?}): fd {fd:.6e} vs analytic {:.6e} (rel {rel:.3e} > {DOP_GRAD_REL_TOL:e})",
                        analytic[i]
                    );
                }
            }
        }
        ensure!(
            dop_checked > dop_skipped,
            "too few smooth nodes for the outage comparison ({dop_checked} checked vs {dop_skipped} boundary-crossing)"
        );
        Ok(format!(
            "worst rel err: mse {mse_worst:.2e}, outage {dop_worst:.2e} ({dop_checked} nodes checked, {dop_skipped} boundary-crossing skipped)"
        ))
    };
    conclude(3, "analytic gradients match finite differences", t, run());
}

// ---------------------------------------------------------------------------
// 04 — runs that report convergence are stationary points.
// ---------------------------------------------------------------------------

#[test]
fn c04_converged_runs_are_stationary() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        // MSE instance.
        let vg = grid(1.0, 5.0, 501)?;
        let ug = grid(1.0, 5.0, 301)?;
        let p = lib(unit_params(0.6)?.with_lambda(0.2))?;
        let mut cfg = OptimizerConfig::new(Criterion::Mse, vg, ug);
        cfg.grad_tol = MSE_STATIONARITY_TOL;
        cfg.max_iters = 40_000;
        let mse_rep = lib(descend_from_starts(&p, &cfg, None, None))?;
        ensure!(
            mse_rep.converged,
            "mse run stopped without convergence after {} iterations (grad sup-norm {:.3e})",
            mse_rep.iterations,
            mse_rep.final_grad_norm
        );
        ensure!(
            mse_rep.final_grad_norm <= MSE_STATIONARITY_TOL,
            "mse residual {:.3e} above {MSE_STATIONARITY_TOL:e}",
            mse_rep.final_grad_norm
        );

        // Outage instance.
        let vg = grid(1.0, 5.0, 401)?;
        let ug = grid(1.0, 5.0, 201)?;
        let p = lib(lib(unit_params(0.6)?.with_d_target(0.09))?.with_lambda(0.05))?;
        let mut cfg = OptimizerConfig::new(Criterion::Dop, vg, ug);
        cfg.grad_tol = DOP_STATIONARITY_TOL;
        cfg.max_iters = 60_000;
        let dop_rep = lib(descend_from_starts(&p, &cfg, None, None))?;
        ensure!(
            dop_rep.converged,
            "outage run stopped without convergence after {} iterations (grad sup-norm {:.3e})",
            dop_rep.iterations,
            dop_rep.final_grad_norm
        );
        ensure!(
            dop_rep.final_grad_norm <= DOP_STATIONARITY_TOL,
            "outage residual {:.3e} above {DOP_STATIONARITY_TOL:e}",
            dop_rep.final_grad_norm
        );
        Ok(format!(
            "mse residual {:.2e} ({} iters, start {}), outage residual {:.2e} ({} iters, start {})",
            mse_rep.final_grad_norm,
            mse_rep.iterations,
            mse_rep.start_used,
            dop_rep.final_grad_norm,
            dop_rep.iterations,
            dop_rep.start_used
        ))
    };
    conclude(4, "converged runs are stationary", t, run());
}

// ---------------------------------------------------------------------------
// 05 — bounds and baselines order correctly across SNR.
// ---------------------------------------------------------------------------

#[test]
fn c05_bound_chain_orders_schemes_at_three_snrs() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let vg = grid(1.0, 5.0, 301)?;
        let ug = grid(1.0, 5.0, 151)?;
        let p = unit_params(0.6)?;
        let mut lines = Vec::new();
        for snr_db in [0.0, 7.0, 14.0] {
            let p_target = 10f64.powf(snr_db / 10.0); // sigma_w = 1
            let mut cfg = OptimizerConfig::new(Criterion::Mse, vg.clone(), ug.clone());
            cfg.max_iters = 800;
            cfg.grad_tol = 1e-4;
            let noe = lib(solve_for_power(p_target, &p, &cfg))?.criterion_value;
            let elb = lib(elb_mse_at_power(&p, p_target, &cfg))?.value;
            let shannon = lib(slb(&p, p_target))?.value;
            let plt =
                lib(optimize_plt(&p, p_target, Criterion::Mse, &vg, &ug, None))?.value;
            let pbt =
                lib(optimize_pbt(&p, p_target, Criterion::Mse, &vg, &ug, None))?.value;
            ensure!(
                shannon <= elb,
                "snr {snr_db} dB: Shannon bound {shannon:.6} above encoder-side bound {elb:.6}"
            );
            ensure!(
                elb <= noe,
                "snr {snr_db} dB: encoder-side bound {elb:.6} above optimized distortion {noe:.6}"
            );
            ensure!(
                noe <= plt.min(pbt) + BOUND_CHAIN_SLACK,
                "snr {snr_db} dB: optimized distortion {noe:.6} above best baseline {:.6} + {BOUND_CHAIN_SLACK:e} (sawtooth {plt:.6}, two-level {pbt:.6})",
                plt.min(pbt)
            );
            lines.push(format!(
                "{snr_db} dB: {shannon:.4} <= {elb:.4} <= {noe:.4} <= min({plt:.4}, {pbt:.4})"
            ));
        }
        Ok(lines.join("; "))
    };
    conclude(5, "bound chain orders schemes across snr", t, run());
}

// ---------------------------------------------------------------------------
// 06 — the mapping period shrinks with correlation, not with power.
// ---------------------------------------------------------------------------

#[test]
fn c06_period_shrinks_with_correlation_and_is_stable_in_power() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let vg = grid(1.0, 5.0, 501)?;
        let ug = grid(1.0, 5.0, 301)?;
        let spacing = vg.spacing();
        let period_at = |r: f64, p_target: f64| -> Result<Option<f64>, String> {
            let p = unit_params(r)?;
            let mut cfg = OptimizerConfig::new(Criterion::Mse, vg.clone(), ug.clone());
            cfg.max_iters = 2000;
            cfg.grad_tol = 1e-4;
            let rep = lib(solve_for_power(p_target, &p, &cfg))?;
            Ok(measure_period(&rep.mapping))
        };
        let show = |p: Option<f64>| p.map_or("none".to_string(), |x| format!("{x:.4}"));

        // Measure every operating point first so a failure reports the whole
        // picture in one line.
        let p_r9 = period_at(0.9, 5.0)?;
        let p_r7 = period_at(0.7, 5.0)?;
        let p_r5 = period_at(0.5, 5.0)?;
        let q_p1 = period_at(0.85, 1.0)?;
        let q_p10 = period_at(0.85, 10.0)?;
        let summary = format!(
            "periods at power 5: r=0.9 -> {}, r=0.7 -> {}, r=0.5 -> {}; at r=0.85: power 1 -> {}, power 10 -> {}",
            show(p_r9),
            show(p_r7),
            show(p_r5),
            show(q_p1),
            show(q_p10)
        );

        let (p_r9, p_r7, p_r5) = match (p_r9, p_r7, p_r5) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(format!("a mapping has no measurable period — {summary}")),
        };
        ensure!(
            p_r9 < p_r7 && p_r7 < p_r5,
            "periods at power 5 not decreasing in correlation — {summary}"
        );
        let (q_p1, q_p10) = match (q_p1, q_p10) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(format!("a mapping has no measurable period — {summary}")),
        };
        let gap = (q_p1 - q_p10).abs();
        ensure!(
            gap <= PERIOD_AGREEMENT_SPACINGS * spacing,
            "period drifts with power at r = 0.85: |diff| {gap:.4} > {PERIOD_AGREEMENT_SPACINGS} spacings ({:.4}) — {summary}",
            PERIOD_AGREEMENT_SPACINGS * spacing
        );
        Ok(summary)
    };
    conclude(6, "period shrinks with correlation, stable in power", t, run());
}

// ---------------------------------------------------------------------------
// 07 — quadrature agrees with Monte Carlo for stored scheme pairs.
// ---------------------------------------------------------------------------

#[test]
fn c07_quadrature_matches_monte_carlo_within_four_sigma() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let vg = grid(1.0, 5.0, 801)?;
        let ug = grid(1.0, 5.0, 401)?;
        let mut worst_sigmas = 0.0f64;

        // MSE pairs: smooth mappings with their posterior-mean decoders.
        let p = unit_params(0.6)?;
        for (k, coeffs) in SMOOTH_COEFFS.iter().enumerate() {
            let f = smooth_mapping(&vg, *coeffs)?;
            let g = lib(mmse_decoder(&f, &p, &ug))?;
            let quad = lib(mse_distortion(&f, &g, &p))?.distortion;
            let sim = lib(simulate(&f, &g, &p, Criterion::Mse, MC_SAMPLES, 101 + k as u64))?;
            let gap = (quad - sim.empirical_value).abs();
            let gate = MC_SIGMA_GATE * sim.std_error + 1e-12;
            worst_sigmas = worst_sigmas.max(gap / sim.std_error.max(1e-300));
            ensure!(
                gap <= gate,
                "mse pair {k}: quadrature {quad:.6} vs simulated {:.6} (|diff| {gap:.3e} > {MC_SIGMA_GATE} x se {:.3e})",
                sim.empirical_value,
                sim.std_error
            );
        }

        // Outage pairs: the same mappings with their window decoders.
        let p = lib(unit_params(0.6)?.with_d_target(0.09))?;
        for (k, coeffs) in SMOOTH_COEFFS.iter().enumerate() {
            let f = smooth_mapping(&vg, *coeffs)?;
            let g = lib(dop_decoder(&f, &p, &ug, &vg))?;
            let quad = lib(dop_evaluate(&f, &g, &p))?.outage;
            let sim = lib(simulate(&f, &g, &p, Criterion::Dop, MC_SAMPLES, 201 + k as u64))?;
            let gap = (quad - sim.empirical_value).abs();
            let gate = MC_SIGMA_GATE * sim.std_error + 1e-12;
            worst_sigmas = worst_sigmas.max(gap / sim.std_error.max(1e-300));
            ensure!(
                gap <= gate,
                "outage pair {k}: quadrature {quad:.6} vs simulated {:.6} (|diff| {gap:.3e} > {MC_SIGMA_GATE} x se {:.3e})",
                sim.empirical_value,
                sim.std_error
            );
        }
        Ok(format!(
            "10 pairs x {MC_SAMPLES} samples; worst gap {worst_sigmas:.2} standard errors (gate {MC_SIGMA_GATE})"
        ))
    };
    conclude(7, "quadrature matches simulation within four sigma", t, run());
}

// ---------------------------------------------------------------------------
// 08 — optimized outage decays with SNR and saturates at the source floor.
// ---------------------------------------------------------------------------

#[test]
fn c08_outage_saturates_at_the_source_floor_as_snr_grows() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let vg = grid(1.0, 5.0, 301)?;
        let ug = grid(1.0, 5.0, 151)?;
        let p = lib(unit_params(0.6)?.with_d_target(0.09))?;
        let mut eps = Vec::new();
        let mut floor = 0.0f64;
        for snr_db in [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0] {
            let p_target = 10f64.powf(snr_db / 10.0); // sigma_w = 1
            let mut cfg = OptimizerConfig::new(Criterion::Dop, vg.clone(), ug.clone());
            cfg.max_iters = 600;
            let rep = lib(solve_for_power(p_target, &p, &cfg))?;
            let so = rep
                .source_outage
                .ok_or("outage run reported no source-outage floor")?;
            eps.push((snr_db, rep.criterion_value));
            floor = so;
        }
        for w in eps.windows(2) {
            let ((db0, e0), (db1, e1)) = (w[0], w[1]);
            ensure!(
                e1 <= e0 + SATURATION_SLACK,
                "outage rose along the sweep: {e0:.6} at {db0} dB -> {e1:.6} at {db1} dB (slack {SATURATION_SLACK:e})"
            );
        }
        let (last_db, last_eps) = *eps.last().expect("sweep is non-empty");
        ensure!(
            last_eps >= floor - SATURATION_SLACK,
            "outage {last_eps:.6} at {last_db} dB fell below its source-outage floor {floor:.6} - {SATURATION_SLACK:e}"
        );
        let path = eps
            .iter()
            .map(|(db, e)| format!("{db} dB: {e:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(format!("{path}; floor at 20 dB: {floor:.4}"))
    };
    conclude(8, "outage decays with snr and saturates at the floor", t, run());
}

// ---------------------------------------------------------------------------
// 09 — capacity/bound endpoints are exact.
// ---------------------------------------------------------------------------

#[test]
fn c09_shannon_bound_endpoints_are_exact() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        let sv = 1.3;
        let r = 0.6;
        let p = lib(SystemParams::new(sv, 1.0, 1.0, r))?;

        // Zero SNR: the crossover is 1/2, capacity is exactly zero, and the
        // bound equals the side-information floor bit for bit.
        let c0 = lib(one_bit_capacity(0.0))?;
        ensure!(c0 == 0.0, "capacity at zero snr is {c0:e}, not exactly 0");
        let b0 = lib(slb(&p, 0.0))?.value;
        let floor = (1.0 - r * r) * sv * sv;
        ensure!(
            b0 == floor,
            "bound at zero snr is {b0:.17}, not exactly (1 - r^2) sigma_v^2 = {floor:.17}"
        );

        // Effectively infinite SNR: the crossover underflows to 0, capacity
        // is one bit, and the bound is a quarter of the floor.
        let c_inf = lib(one_bit_capacity(1e12))?;
        ensure!(
            (c_inf - 1.0).abs() <= ENDPOINT_TOL,
            "capacity at snr 1e12 is {c_inf:.15}, not within {ENDPOINT_TOL:e} of 1"
        );
        let b_inf = lib(slb(&p, 1e12))?.value;
        let quarter = floor / 4.0;
        ensure!(
            (b_inf - quarter).abs() <= ENDPOINT_TOL,
            "bound at snr 1e12 is {b_inf:.15}, not within {ENDPOINT_TOL:e} of {quarter:.15}"
        );
        Ok(format!(
            "C(0) = {c0}, bound(0) = {b0:.6}; C(1e12) = {c_inf}, bound(1e12) = {b_inf:.6}"
        ))
    };
    conclude(9, "capacity and bound endpoints are exact", t, run());
}

// ---------------------------------------------------------------------------
// 10 — without side information the optimum stays odd and monotone.
// ---------------------------------------------------------------------------

#[test]
fn c10_uncorrelated_optimum_stays_odd_and_monotone() {
    let t = Instant::now();
    let run = || -> Result<String, String> {
        // At r = 0 the problem is symmetric under v -> -v, the initializer is
        // odd, and every descent/decoder step preserves that symmetry up to
        // rounding; the optimum is also monotone. Both survive a full power
        // search.
        let vg = grid(1.0, 5.0, 501)?;
        let ug = grid(1.0, 5.0, 301)?;
        let p = unit_params(0.0)?;
        let mut cfg = OptimizerConfig::new(Criterion::Mse, vg.clone(), ug.clone());
        cfg.starts = vec![StartSpec::NearZeroLinear];
        cfg.max_iters = 2000;
        cfg.grad_tol = 1e-4;
        let rep = lib(solve_for_power(5.0, &p, &cfg))?;
        let f = &rep.mapping;
        let n = vg.len();
        let mut odd_drift = 0.0f64;
        for i in 0..n {
            odd_drift = odd_drift.max((f.values[i] + f.values[n - 1 - i]).abs());
        }
        ensure!(
            odd_drift < ODDNESS_TOL,
            "odd symmetry drifted to {odd_drift:.3e} (tolerance {ODDNESS_TOL:e})"
        );
        for i in 1..n {
            ensure!(
                f.values[i] >= f.values[i - 1] - MONOTONE_SLACK,
                "mapping not non-decreasing at node {i}: f({:.4}) = {:.6} < f({:.4}) = {:.6}",
                vg.nodes[i],
                f.values[i],
                vg.nodes[i - 1],
                f.values[i - 1]
            );
        }
        Ok(format!(
            "max |f(v) + f(-v)| = {odd_drift:.2e}, monotone over {n} nodes, power {:.3}",
            rep.power
        ))
    };
    conclude(10, "uncorrelated optimum stays odd and monotone", t, run());
}
