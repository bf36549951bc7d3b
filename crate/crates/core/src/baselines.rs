//! Reference schemes and performance bounds: the sawtooth (periodic linear)
//! and two-level (periodic binary) parametric encoders with their power laws
//! and parameter searches, the one-bit Shannon lower bound, and the
//! encoder-side-information lower bounds obtained by solving the reduced
//! problem on the estimation error T = V - (r sigma_v / sigma_u) U, which is
//! Gaussian with std sigma_t = sigma_v sqrt(1 - r^2) and independent of U.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    self, make_grid, Criterion, DecoderTable, EncoderMapping, SourceGrid, SystemParams,
};
use crate::optimizer::{self, Objective, OptimizerConfig, OptimizerReport};
use crate::specfun;

/// Node count of the side-information grid used for the reduced problems
/// (their source is independent of U, so a coarse grid suffices).
const REDUCED_U_NODES: usize = 51;
const REDUCED_U_HALFWIDTH: f64 = 5.0;

/// Golden-section refinement iterations after the coarse parameter prescan.
const GOLDEN_ITERS: usize = 36;
const PRESCAN_POINTS: usize = 25;

/// Sawtooth encoder parameters: slope `alpha`, segment width `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PltParams {
    pub alpha: f64,
    pub beta: f64,
}

impl PltParams {
    /// # Errors
    /// Rejects non-finite or non-positive parameters.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, x) in [("alpha", alpha), ("beta", beta)] {
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "{name} must be finite and > 0, got {x}"
                )));
            }
        }
        Ok(PltParams { alpha, beta })
    }
}

/// Two-level encoder parameters: level `level` (the output magnitude) and
/// period `delta` in source units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbtParams {
    pub level: f64,
    pub delta: f64,
}

impl PbtParams {
    /// # Errors
    /// Rejects non-finite or non-positive parameters.
    pub fn new(level: f64, delta: f64) -> Result<Self> {
        for (name, x) in [("level", level), ("delta", delta)] {
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "{name} must be finite and > 0, got {x}"
                )));
            }
        }
        Ok(PbtParams { level, delta })
    }
}

/// Which bound a [`BoundReport`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Shannon lower bound through the one-bit channel capacity.
    Slb,
    /// Encoder-side-information lower bound on MSE.
    ElbMse,
    /// Encoder-side-information lower bound on outage probability.
    ElbDop,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Slb => "slb",
            Scheme::ElbMse => "elb-mse",
            Scheme::ElbDop => "elb-dop",
        };
        write!(f, "{s}")
    }
}

/// A lower-bound evaluation. For the encoder-side-information bounds the
/// mapping lives on the reduced source axis (std sigma_t) and the decoder is
/// the composite rule g(y, u) = (r sigma_v / sigma_u) u + t_hat_y on the
/// caller's side-information grid; the Shannon bound has neither.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub scheme: Scheme,
    /// Distortion (MSE bounds) or outage probability (DOP bound).
    pub value: f64,
    /// Average power behind the bound (for the Shannon bound, the transmit
    /// power implied by the given snr).
    pub power: f64,
    pub params_used: SystemParams,
    pub mapping: Option<EncoderMapping>,
    pub decoder: Option<DecoderTable>,
}

/// Sawtooth mapping f(v) = alpha (-1)^k (beta k - v) with k = floor(v/beta + 1/2):
/// continuous, odd, piecewise slope +/-alpha, extrema +/-(alpha beta / 2).
///
/// # Errors
/// Only mapping construction failures (non-finite products for absurd
/// parameter/grid combinations).
pub fn plt_mapping(p: &PltParams, grid: &Arc<SourceGrid>) -> Result<EncoderMapping> {
    let values = grid
        .nodes
        .iter()
        .map(|&v| {
            let k = (v / p.beta + 0.5).floor();
            let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
            p.alpha * sign * (p.beta * k - v)
        })
        .collect();
    EncoderMapping::new(grid.clone(), values)
}

/// Exact average power E[f(V)^2] of the sawtooth under V ~ N(0, sigma_v^2),
/// by the closed-form series over segment indices; the truncation
/// |i| <= ceil(10 sigma_v / beta) + 2 leaves a tail below 1e-12 of the total.
pub fn plt_power(p: &PltParams, sigma_v: f64) -> f64 {
    let (alpha, beta) = (p.alpha, p.beta);
    let i_max = (10.0 * sigma_v / beta).ceil() as i64 + 2;
    let mut q_sum = 0.0;
    let mut e_sum = 0.0;
    for i in -i_max..=i_max {
        let i_f = i as f64;
        // Segment i spans [(i - 1/2) beta, (i + 1/2) beta].
        let a = (i_f * beta - 0.5 * beta) / sigma_v;
        let b = (i_f * beta + 0.5 * beta) / sigma_v;
        q_sum += i_f * i_f * (specfun::q_raw(a) - specfun::q_raw(b));
        e_sum += i_f * ((-0.5 * a * a).exp() - (-0.5 * b * b).exp());
    }
    let inner = sigma_v * sigma_v + beta * beta * q_sum
        - 2.0 * beta * sigma_v * specfun::INV_SQRT_2PI * e_sum;
    alpha * alpha * inner
}

/// Two-level mapping: odd square wave with output levels +/-level and
/// half-period delta/2 — f(v) = +level on [0, delta/2), alternating sign on
/// each successive cell for v > 0, and f(-v) = -f(v). Output magnitude is
/// `level` everywhere, so the average power is exactly level^2.
///
/// # Errors
/// Only mapping construction failures.
pub fn pbt_mapping(p: &PbtParams, grid: &Arc<SourceGrid>) -> Result<EncoderMapping> {
    let values = grid
        .nodes
        .iter()
        .map(|&v| {
            let cell = (2.0 * v.abs() / p.delta).floor() as i64;
            let magnitude = if cell % 2 == 0 { p.level } else { -p.level };
            if v < 0.0 {
                -magnitude
            } else {
                magnitude
            }
        })
        .collect();
    EncoderMapping::new(grid.clone(), values)
}

/// Capacity in bits of the binary-input channel formed by antipodal
/// signalling through the AWGN channel and the one-bit ADC:
/// C = 1 - h(Q(sqrt(snr))).
///
/// # Errors
/// Rejects negative or NaN snr.
pub fn one_bit_capacity(snr: f64) -> Result<f64> {
    if snr.is_nan() || snr < 0.0 {
        return Err(Error::InvalidParam(format!(
            "snr must be >= 0, got {snr}"
        )));
    }
    let crossover = specfun::q_raw(snr.sqrt());
    Ok(1.0 - specfun::binary_entropy(crossover)?)
}

/// Shannon lower bound on MSE distortion at the given channel snr:
/// D_lower = (1 - r^2) sigma_v^2 2^(-2C) with C the one-bit capacity.
/// The side information is free at this bound, hence the (1 - r^2) factor.
///
/// # Errors
/// Rejects negative or NaN snr.
pub fn slb(params: &SystemParams, snr: f64) -> Result<BoundReport> {
    let capacity = one_bit_capacity(snr)?;
    let value = (1.0 - params.r * params.r)
        * params.sigma_v
        * params.sigma_v
        * (-2.0 * capacity).exp2();
    Ok(BoundReport {
        scheme: Scheme::Slb,
        value,
        power: snr * params.sigma_w * params.sigma_w,
        params_used: params.clone(),
        mapping: None,
        decoder: None,
    })
}

/// A power-constrained sawtooth design: the best (alpha, beta) found for the
/// criterion, with its mapping, matched decoder, and achieved numbers.
#[derive(Debug, Clone)]
pub struct PltDesign {
    pub params: PltParams,
    pub mapping: EncoderMapping,
    pub decoder: DecoderTable,
    /// Distortion or outage probability of (mapping, decoder).
    pub value: f64,
    /// Closed-form average power of the sawtooth; the alpha projection makes
    /// it equal the requested target (grid quadrature of the kinked mapping
    /// would drift by its own O(h^2) error and is not reported here).
    pub power: f64,
}

/// A power-constrained two-level design (level fixed at sqrt(p_target), only
/// the period is searched).
#[derive(Debug, Clone)]
pub struct PbtDesign {
    pub params: PbtParams,
    pub mapping: EncoderMapping,
    pub decoder: DecoderTable,
    /// Distortion or outage probability of (mapping, decoder).
    pub value: f64,
    /// Exact average power: the output magnitude is constant, so this is the
    /// squared level.
    pub power: f64,
}

/// Logarithmically spaced points over [lo, hi], inclusive.
fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Golden-section minimization of `score` over a log-scale bracket. The best
/// probe is tracked by the caller inside `score`; this just drives probes.
fn golden_min<F: FnMut(f64) -> Result<f64>>(
    score: &mut F,
    lo: f64,
    hi: f64,
    iters: usize,
) -> Result<()> {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = score(c.exp())?;
    let mut fd = score(d.exp())?;
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = score(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = score(d.exp())?;
        }
    }
    Ok(())
}

fn check_power_target(p_target: f64) -> Result<()> {
    if !p_target.is_finite() || p_target <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "power target must be finite and > 0, got {p_target}"
        )));
    }
    Ok(())
}

/// Best sawtooth under an exact average-power constraint: beta is searched
/// (coarse log prescan, then golden-section refinement) and alpha is
/// projected so the series power meets `p_target` exactly.
///
/// # Errors
/// Propagates grid/parameter validation and the degenerate-correlation
/// rejection of the criterion problems.
pub fn optimize_plt(
    params: &SystemParams,
    p_target: f64,
    criterion: Criterion,
    v_grid: &Arc<SourceGrid>,
    u_grid: &Arc<SourceGrid>,
    vhat_grid: Option<Arc<SourceGrid>>,
) -> Result<PltDesign> {
    check_power_target(p_target)?;
    let obj = Objective::from_parts(params, criterion, v_grid.clone(), u_grid.clone(), vhat_grid)?;
    let sv = params.sigma_v;
    let mut best: Option<(f64, PltParams)> = None;
    let mut score = |beta: f64| -> Result<f64> {
        let unit_power = plt_power(&PltParams { alpha: 1.0, beta }, sv);
        let p = PltParams::new((p_target / unit_power).sqrt(), beta)?;
        let f = plt_mapping(&p, v_grid)?;
        let e = obj.evaluate_with(&f, &obj.decoder(&f)?)?;
        if best.is_none_or(|(v, _)| e.value < v) {
            best = Some((e.value, p));
        }
        Ok(e.value)
    };

    let betas = log_space(0.25 * sv, 12.0 * sv, PRESCAN_POINTS);
    let mut k_best = 0;
    let mut v_best = f64::INFINITY;
    for (k, &beta) in betas.iter().enumerate() {
        let val = score(beta)?;
        if val < v_best {
            v_best = val;
            k_best = k;
        }
    }
    let lo = betas[k_best.saturating_sub(1)];
    let hi = betas[(k_best + 1).min(betas.len() - 1)];
    golden_min(&mut score, lo, hi, GOLDEN_ITERS)?;

    let (_, p) = best.expect("prescan evaluated at least one candidate");
    let mapping = plt_mapping(&p, v_grid)?;
    let decoder = obj.decoder(&mapping)?;
    let e = obj.evaluate_with(&mapping, &decoder)?;
    let power = plt_power(&p, sv);
    Ok(PltDesign {
        params: p,
        mapping,
        decoder,
        value: e.value,
        power,
    })
}

/// Best two-level design under an exact average-power constraint: the level
/// is sqrt(p_target) (output magnitude is constant, so power is exactly the
/// squared level) and only the period is searched.
///
/// # Errors
/// As for [`optimize_plt`].
pub fn optimize_pbt(
    params: &SystemParams,
    p_target: f64,
    criterion: Criterion,
    v_grid: &Arc<SourceGrid>,
    u_grid: &Arc<SourceGrid>,
    vhat_grid: Option<Arc<SourceGrid>>,
) -> Result<PbtDesign> {
    check_power_target(p_target)?;
    let obj = Objective::from_parts(params, criterion, v_grid.clone(), u_grid.clone(), vhat_grid)?;
    let sv = params.sigma_v;
    let level = p_target.sqrt();
    let mut best: Option<(f64, PbtParams)> = None;
    let mut score = |delta: f64| -> Result<f64> {
        let p = PbtParams::new(level, delta)?;
        let f = pbt_mapping(&p, v_grid)?;
        let e = obj.evaluate_with(&f, &obj.decoder(&f)?)?;
        if best.is_none_or(|(v, _)| e.value < v) {
            best = Some((e.value, p));
        }
        Ok(e.value)
    };

    let deltas = log_space(0.2 * sv, 16.0 * sv, PRESCAN_POINTS);
    let mut k_best = 0;
    let mut v_best = f64::INFINITY;
    for (k, &delta) in deltas.iter().enumerate() {
        let val = score(delta)?;
        if val < v_best {
            v_best = val;
            k_best = k;
        }
    }
    let lo = deltas[k_best.saturating_sub(1)];
    let hi = deltas[(k_best + 1).min(deltas.len() - 1)];
    golden_min(&mut score, lo, hi, GOLDEN_ITERS)?;

    let (_, p) = best.expect("prescan evaluated at least one candidate");
    let mapping = pbt_mapping(&p, v_grid)?;
    let decoder = obj.decoder(&mapping)?;
    let e = obj.evaluate_with(&mapping, &decoder)?;
    Ok(PbtDesign {
        params: p,
        mapping,
        decoder,
        value: e.value,
        power: level * level,
    })
}

/// Reduced problem behind the encoder-side-information bounds: source std
/// sigma_t = sigma_v sqrt(1 - r^2), correlation 0, same channel and Lagrange
/// weight; the source grid keeps the caller's node count and halfwidth, the
/// side-information grid shrinks (it integrates a constant).
fn reduced_setup(
    params: &SystemParams,
    criterion: Criterion,
    cfg: &OptimizerConfig,
) -> Result<(SystemParams, OptimizerConfig)> {
    let sigma_t = params.sigma_v * (1.0 - params.r * params.r).sqrt();
    let mut reduced = SystemParams::new(sigma_t, params.sigma_u, params.sigma_w, 0.0)?
        .with_lambda(params.lambda)?;
    if params.d_target > 0.0 {
        reduced = reduced.with_d_target(params.d_target)?;
    }
    let v_grid = Arc::new(make_grid(
        sigma_t,
        cfg.v_grid.halfwidth_sigmas,
        cfg.v_grid.len(),
    )?);
    let u_grid = Arc::new(make_grid(
        params.sigma_u,
        REDUCED_U_HALFWIDTH,
        REDUCED_U_NODES,
    )?);
    let mut rcfg = cfg.clone();
    rcfg.criterion = criterion;
    rcfg.v_grid = v_grid;
    rcfg.u_grid = u_grid;
    rcfg.vhat_grid = None;
    Ok((reduced, rcfg))
}

/// Composite decoder on the original problem: conditional mean of V given u
/// plus the reduced problem's label estimate, g(y, u) = (r sigma_v / sigma_u) u + t_hat_y.
fn composite_decoder(
    params: &SystemParams,
    u_grid: &Arc<SourceGrid>,
    reduced: &DecoderTable,
) -> Result<DecoderTable> {
    let c = params.r * params.sigma_v / params.sigma_u;
    let center = reduced.u_grid.center();
    let (t0, t1) = (reduced.g0[center], reduced.g1[center]);
    let g0 = u_grid.nodes.iter().map(|&u| c * u + t0).collect();
    let g1 = u_grid.nodes.iter().map(|&u| c * u + t1).collect();
    DecoderTable::new(u_grid.clone(), g0, g1)
}

/// r = +/-1: the reduced source degenerates to a constant, the composite
/// decoder is the exact conditional mean, and both bounds are zero.
fn degenerate_bound(
    scheme: Scheme,
    params: &SystemParams,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    if scheme == Scheme::ElbDop {
        params.require_d_target()?;
    }
    model::check_u_grid(params, &cfg.u_grid)?;
    Ok(BoundReport {
        scheme,
        value: 0.0,
        power: 0.0,
        params_used: params.clone(),
        mapping: None,
        decoder: Some(model::conditional_mean_decoder(params, &cfg.u_grid)),
    })
}

fn elb_report(
    scheme: Scheme,
    params: &SystemParams,
    cfg: &OptimizerConfig,
    report: OptimizerReport,
) -> Result<BoundReport> {
    let decoder = composite_decoder(params, &cfg.u_grid, &report.decoder)?;
    Ok(BoundReport {
        scheme,
        value: report.criterion_value,
        power: report.power,
        params_used: params.clone(),
        mapping: Some(report.mapping),
        decoder: Some(decoder),
    })
}

/// Encoder-side-information lower bound on MSE at the Lagrange weight in
/// `params`: the distortion an encoder could reach if it saw U, obtained by
/// running the full optimizer on the reduced problem. The change of
/// variables V = (r sigma_v / sigma_u) U + T is exact, so the reduced
/// distortion equals the composite scheme's distortion on the original
/// problem.
///
/// # Errors
/// Propagated from the optimizer.
pub fn elb_mse(params: &SystemParams, cfg: &OptimizerConfig) -> Result<BoundReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_bound(Scheme::ElbMse, params, cfg);
    }
    let (reduced, rcfg) = reduced_setup(params, Criterion::Mse, cfg)?;
    let report = optimizer::descend_from_starts(&reduced, &rcfg, None, None)?;
    elb_report(Scheme::ElbMse, params, cfg, report)
}

/// [`elb_mse`] at an average-power target instead of a fixed Lagrange
/// weight (bisection on the reduced problem).
pub fn elb_mse_at_power(
    params: &SystemParams,
    p_target: f64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_bound(Scheme::ElbMse, params, cfg);
    }
    let (reduced, rcfg) = reduced_setup(params, Criterion::Mse, cfg)?;
    let report = optimizer::solve_for_power(p_target, &reduced, &rcfg)?;
    elb_report(Scheme::ElbMse, params, cfg, report)
}

/// Encoder-side-information lower bound on outage probability at the
/// Lagrange weight in `params`, by the same reduction as [`elb_mse`]: the
/// outage event (V - Vhat)^2 >= D maps exactly onto (T - t_hat_y)^2 >= D
/// under the composite decoder.
///
/// # Errors
/// Propagated from the optimizer; requires `d_target` to be set.
pub fn elb_dop(params: &SystemParams, cfg: &OptimizerConfig) -> Result<BoundReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_bound(Scheme::ElbDop, params, cfg);
    }
    let (reduced, rcfg) = reduced_setup(params, Criterion::Dop, cfg)?;
    let report = optimizer::descend_from_starts(&reduced, &rcfg, None, None)?;
    elb_report(Scheme::ElbDop, params, cfg, report)
}

/// [`elb_dop`] at an average-power target instead of a fixed Lagrange weight.
pub fn elb_dop_at_power(
    params: &SystemParams,
    p_target: f64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_bound(Scheme::ElbDop, params, cfg);
    }
    let (reduced, rcfg) = reduced_setup(params, Criterion::Dop, cfg)?;
    let report = optimizer::solve_for_power(p_target, &reduced, &rcfg)?;
    elb_report(Scheme::ElbDop, params, cfg, report)
}
