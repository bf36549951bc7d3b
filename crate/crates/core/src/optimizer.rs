//! Gradient-descent design of encoder mappings: Lagrangian descent with a
//! backtracking line search, a multi-start policy hedging local minima, and
//! bisection on the Lagrange weight to meet an average-power target.
//!
//! The update is f <- f - mu * grad(L), with the decoder refreshed before
//! every trial evaluation, so the accepted Lagrangian sequence is
//! non-increasing by construction for both criteria. Gradients and sup-norms
//! come from the criterion modules; this module never looks inside them.

use std::fmt;
use std::sync::Arc;

use crate::baselines;
use crate::dop::DopProblem;
use crate::error::{Error, Result};
use crate::model::{self, Criterion, DecoderTable, EncoderMapping, SourceGrid, SystemParams};
use crate::mse::MseProblem;

/// Slope of the "near-zero linear" initializer.
const NEAR_ZERO_SLOPE: f64 = 0.01;

/// Accepted-step slack: a trial counts as non-increasing if it exceeds the
/// current Lagrangian by no more than this.
const MONOTONE_SLACK: f64 = 1e-12;

/// Bisection bracket for the Lagrange weight, and its stopping rule.
const LAMBDA_LO: f64 = 1e-6;
const LAMBDA_HI: f64 = 1e3;
const MAX_BISECTIONS: usize = 40;
const POWER_REL_TOL: f64 = 1e-3;

/// How a descent run was initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartSpec {
    /// Linear mapping with slope close to zero.
    NearZeroLinear,
    /// Best sawtooth (periodic linear) shape found by a parameter search.
    PltShaped,
    /// Best two-level (periodic binary) shape found by a parameter search.
    PbtShaped,
    /// Winner of the previous probe in a power search.
    Warm,
    /// Caller-provided mapping.
    Custom,
}

impl fmt::Display for StartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StartSpec::NearZeroLinear => "near-zero-linear",
            StartSpec::PltShaped => "plt-shaped",
            StartSpec::PbtShaped => "pbt-shaped",
            StartSpec::Warm => "warm",
            StartSpec::Custom => "custom",
        };
        write!(f, "{s}")
    }
}

/// Descent hyper-parameters plus the quadrature grids every run shares.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub criterion: Criterion,
    /// Source grid; also the default decoder-candidate grid for the outage
    /// criterion.
    pub v_grid: Arc<SourceGrid>,
    /// Side-information grid.
    pub u_grid: Arc<SourceGrid>,
    /// Candidate reconstruction grid for the outage decoder search
    /// (defaults to `v_grid`).
    pub vhat_grid: Option<Arc<SourceGrid>>,
    /// Initial step size mu; backtracking halves it within an iteration.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stopping threshold on the gradient sup-norm over active nodes.
    pub grad_tol: f64,
    /// Step halvings allowed within one iteration before declaring a stall.
    pub max_backtracks: usize,
    pub starts: Vec<StartSpec>,
}

impl OptimizerConfig {
    /// Defaults: mu = 0.1, 20000 iterations, gradient tolerance 1e-5 for MSE
    /// and 1e-4 for the outage criterion (its quadrature is rougher), all
    /// three standard starts.
    pub fn new(criterion: Criterion, v_grid: Arc<SourceGrid>, u_grid: Arc<SourceGrid>) -> Self {
        let grad_tol = match criterion {
            Criterion::Mse => 1e-5,
            Criterion::Dop => 1e-4,
        };
        OptimizerConfig {
            criterion,
            v_grid,
            u_grid,
            vhat_grid: None,
            step_size: 0.1,
            max_iters: 20_000,
            grad_tol,
            max_backtracks: 60,
            starts: vec![
                StartSpec::NearZeroLinear,
                StartSpec::PltShaped,
                StartSpec::PbtShaped,
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "step_size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be >= 1".into()));
        }
        if !self.grad_tol.is_finite() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "grad_tol must be finite and > 0, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

/// Result of a descent run (or of a power search, which attaches its probe
/// trace).
#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub criterion: Criterion,
    pub mapping: EncoderMapping,
    pub decoder: DecoderTable,
    /// MSE distortion or outage probability of (mapping, decoder).
    pub criterion_value: f64,
    /// Probability that outage is unavoidable regardless of the channel
    /// label (outage criterion only).
    pub source_outage: Option<f64>,
    pub power: f64,
    pub lambda: f64,
    /// Accepted gradient steps taken.
    pub iterations: usize,
    /// Gradient sup-norm over active nodes at the returned mapping.
    pub final_grad_norm: f64,
    pub converged: bool,
    pub start_used: StartSpec,
    /// Lagrangian after every accepted step (leading entry: the start).
    pub lagrangian_trace: Vec<f64>,
    /// (lambda, achieved power) per probe, in probe order, when the report
    /// came from a power search.
    pub lambda_trace: Vec<(f64, f64)>,
    /// Set when a power search could not meet its target and reports the
    /// nearest achievable power instead.
    pub power_target_missed: bool,
}

/// Header for [`OptimizerReport::summary_record`].
pub const SUMMARY_HEADER: &str = "criterion,lambda,power,value,iters,grad_norm,converged";

impl OptimizerReport {
    /// One-line CSV record matching [`SUMMARY_HEADER`].
    pub fn summary_record(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            self.criterion,
            self.lambda,
            self.power,
            self.criterion_value,
            self.iterations,
            self.final_grad_norm,
            self.converged
        )
    }
}

/// Numbers shared by both criteria for one (mapping, decoder) evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EvalNumbers {
    pub(crate) value: f64,
    pub(crate) power: f64,
    pub(crate) lagrangian: f64,
    pub(crate) source_outage: Option<f64>,
}

/// Criterion dispatch around the two problem types. Built once per grid
/// configuration; the conditional-density tables inside are independent of
/// the Lagrange weight, so power searches retune lambda in place.
pub(crate) enum Objective {
    Mse(MseProblem),
    Dop(DopProblem),
}

impl Objective {
    pub(crate) fn build(params: &SystemParams, cfg: &OptimizerConfig) -> Result<Objective> {
        Objective::from_parts(
            params,
            cfg.criterion,
            cfg.v_grid.clone(),
            cfg.u_grid.clone(),
            cfg.vhat_grid.clone(),
        )
    }

    pub(crate) fn from_parts(
        params: &SystemParams,
        criterion: Criterion,
        v_grid: Arc<SourceGrid>,
        u_grid: Arc<SourceGrid>,
        vhat_grid: Option<Arc<SourceGrid>>,
    ) -> Result<Objective> {
        match criterion {
            Criterion::Mse => Ok(Objective::Mse(MseProblem::new(params, v_grid, u_grid)?)),
            Criterion::Dop => Ok(Objective::Dop(DopProblem::new(
                params, v_grid, u_grid, vhat_grid,
            )?)),
        }
    }

    fn set_lambda(&mut self, lambda: f64) {
        match self {
            Objective::Mse(p) => p.params.lambda = lambda,
            Objective::Dop(p) => p.params.lambda = lambda,
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            Objective::Mse(p) => p.params.lambda,
            Objective::Dop(p) => p.params.lambda,
        }
    }

    fn criterion(&self) -> Criterion {
        match self {
            Objective::Mse(_) => Criterion::Mse,
            Objective::Dop(_) => Criterion::Dop,
        }
    }

    pub(crate) fn decoder(&self, f: &EncoderMapping) -> Result<DecoderTable> {
        match self {
            Objective::Mse(p) => p.decoder(f),
            Objective::Dop(p) => p.decoder(f),
        }
    }

    pub(crate) fn evaluate_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<EvalNumbers> {
        match self {
            Objective::Mse(p) => {
                let e = p.evaluate_with(f, g)?;
                Ok(EvalNumbers {
                    value: e.distortion,
                    power: e.power,
                    lagrangian: e.lagrangian,
                    source_outage: None,
                })
            }
            Objective::Dop(p) => {
                let e = p.evaluate_with(f, g)?;
                Ok(EvalNumbers {
                    value: e.outage,
                    power: e.power,
                    lagrangian: e.lagrangian,
                    source_outage: Some(e.source_outage),
                })
            }
        }
    }

    fn gradient_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<Vec<f64>> {
        match self {
            Objective::Mse(p) => p.gradient_with(f, g),
            Objective::Dop(p) => p.gradient_with(f, g),
        }
    }

    fn active_sup_norm(&self, grad: &[f64]) -> f64 {
        match self {
            Objective::Mse(p) => p.active_sup_norm(grad),
            Objective::Dop(p) => p.active_sup_norm(grad),
        }
    }
}

/// Report for the degenerate correlations r = +/-1: the side information
/// determines the source, so the optimal mapping spends no power and the
/// conditional-mean decoder is exact under both criteria.
fn degenerate_report(
    params: &SystemParams,
    cfg: &OptimizerConfig,
    start_used: StartSpec,
) -> Result<OptimizerReport> {
    model::check_v_grid(params, &cfg.v_grid)?;
    model::check_u_grid(params, &cfg.u_grid)?;
    if cfg.criterion == Criterion::Dop {
        params.require_d_target()?;
    }
    let mapping = EncoderMapping::new(cfg.v_grid.clone(), vec![0.0; cfg.v_grid.len()])?;
    let decoder = model::conditional_mean_decoder(params, &cfg.u_grid);
    let source_outage = match cfg.criterion {
        Criterion::Mse => None,
        Criterion::Dop => Some(0.0),
    };
    Ok(OptimizerReport {
        criterion: cfg.criterion,
        mapping,
        decoder,
        criterion_value: 0.0,
        source_outage,
        power: 0.0,
        lambda: params.lambda,
        iterations: 0,
        final_grad_norm: 0.0,
        converged: true,
        start_used,
        lagrangian_trace: vec![0.0],
        lambda_trace: Vec::new(),
        power_target_missed: false,
    })
}

/// Core descent loop on a prebuilt objective. Returns the best iterate by
/// Lagrangian, with the decoder refreshed and the gradient re-measured at
/// that mapping so the reported numbers are self-consistent.
fn descend_core(
    obj: &Objective,
    init: EncoderMapping,
    cfg: &OptimizerConfig,
    start_used: StartSpec,
) -> Result<OptimizerReport> {
    cfg.validate()?;
    let mut f = init;
    let mut g = obj.decoder(&f)?;
    let mut cur = obj.evaluate_with(&f, &g)?;
    if !cur.lagrangian.is_finite() {
        return Err(Error::InvalidParam(
            "initial mapping has a non-finite Lagrangian".into(),
        ));
    }
    let mut best = (cur.lagrangian, f.clone(), g.clone(), cur);
    let mut trace = vec![cur.lagrangian];
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        let grad = obj.gradient_with(&f, &g)?;
        if obj.active_sup_norm(&grad) <= cfg.grad_tol {
            break;
        }

        // Backtracking line search from the configured step size.
        let mut mu = cfg.step_size;
        let mut accepted = false;
        let mut saw_finite_trial = false;
        for _ in 0..=cfg.max_backtracks {
            let values: Vec<f64> = f
                .values
                .iter()
                .zip(&grad)
                .map(|(&fv, &gv)| fv - mu * gv)
                .collect();
            if let Ok(trial) = EncoderMapping::new(f.grid.clone(), values) {
                let trial_g = obj.decoder(&trial)?;
                let trial_eval = obj.evaluate_with(&trial, &trial_g)?;
                if trial_eval.lagrangian.is_finite() {
                    saw_finite_trial = true;
                    if trial_eval.lagrangian <= cur.lagrangian + MONOTONE_SLACK {
                        f = trial;
                        g = trial_g;
                        cur = trial_eval;
                        iterations = iter;
                        trace.push(cur.lagrangian);
                        if cur.lagrangian < best.0 {
                            best = (cur.lagrangian, f.clone(), g.clone(), cur);
                        }
                        accepted = true;
                        break;
                    }
                }
            }
            mu *= 0.5;
        }
        if !accepted {
            if !saw_finite_trial {
                let mut last = report_at(obj, best.1, cfg, start_used, iterations, trace)?;
                last.converged = false;
                return Err(Error::Diverged {
                    iter,
                    last: Box::new(last),
                });
            }
            // Every finite trial increased the Lagrangian: a stall. Return
            // the best iterate; its convergence flag comes from the
            // re-measured gradient below.
            break;
        }
    }

    report_at(obj, best.1, cfg, start_used, iterations, trace)
}

/// Assembles a self-consistent report at a mapping: refreshed decoder,
/// evaluation and gradient all taken at the returned pair.
fn report_at(
    obj: &Objective,
    mapping: EncoderMapping,
    cfg: &OptimizerConfig,
    start_used: StartSpec,
    iterations: usize,
    lagrangian_trace: Vec<f64>,
) -> Result<OptimizerReport> {
    let decoder = obj.decoder(&mapping)?;
    let eval = obj.evaluate_with(&mapping, &decoder)?;
    let grad = obj.gradient_with(&mapping, &decoder)?;
    let final_grad_norm = obj.active_sup_norm(&grad);
    Ok(OptimizerReport {
        criterion: obj.criterion(),
        mapping,
        decoder,
        criterion_value: eval.value,
        source_outage: eval.source_outage,
        power: eval.power,
        lambda: obj.lambda(),
        iterations,
        final_grad_norm,
        converged: final_grad_norm <= cfg.grad_tol,
        start_used,
        lagrangian_trace,
        lambda_trace: Vec::new(),
        power_target_missed: false,
    })
}

/// Gradient descent from a caller-provided initial mapping at the Lagrange
/// weight in `params`.
///
/// r = +/-1 returns the all-zero mapping immediately (no power is worth
/// spending when the side information already determines the source).
///
/// # Errors
/// Non-finite Lagrangians that backtracking cannot escape surface as
/// [`Error::Diverged`] with the last finite iterate attached.
pub fn descend(
    init: &EncoderMapping,
    params: &SystemParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizerReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_report(params, cfg, StartSpec::Custom);
    }
    let obj = Objective::build(params, cfg)?;
    descend_core(&obj, init.clone(), cfg, StartSpec::Custom)
}

/// Builds the start mappings requested by the config. `p_hint` shapes the
/// parametric starts: when given, they are the power-constrained optimized
/// sawtooth/two-level designs; otherwise a coarse Lagrangian prescan over
/// shape and power level picks them.
fn materialize_starts(
    params: &SystemParams,
    cfg: &OptimizerConfig,
    obj: &Objective,
    p_hint: Option<f64>,
) -> Result<Vec<(StartSpec, EncoderMapping)>> {
    let sv = params.sigma_v;
    let mut out = Vec::new();
    for &spec in &cfg.starts {
        match spec {
            StartSpec::NearZeroLinear => {
                let values = cfg.v_grid.nodes.iter().map(|&v| NEAR_ZERO_SLOPE * v).collect();
                out.push((spec, EncoderMapping::new(cfg.v_grid.clone(), values)?));
            }
            StartSpec::PltShaped => {
                let mapping = if let Some(p) = p_hint {
                    baselines::optimize_plt(
                        params,
                        p,
                        cfg.criterion,
                        &cfg.v_grid,
                        &cfg.u_grid,
                        cfg.vhat_grid.clone(),
                    )?
                    .mapping
                } else {
                    let mut best: Option<(f64, EncoderMapping)> = None;
                    for beta_scale in [0.4, 0.8, 1.5, 2.5, 4.0, 6.0, 8.0] {
                        let beta = beta_scale * sv;
                        let unit = baselines::PltParams::new(1.0, beta)?;
                        let unit_power = baselines::plt_power(&unit, sv);
                        for power in [0.05, 0.25, 1.0, 4.0, 16.0, 64.0] {
                            let alpha = (power / unit_power).sqrt();
                            let p = baselines::PltParams::new(alpha, beta)?;
                            let f = baselines::plt_mapping(&p, &cfg.v_grid)?;
                            let e = obj.evaluate_with(&f, &obj.decoder(&f)?)?;
                            if best.as_ref().is_none_or(|(l, _)| e.lagrangian < *l) {
                                best = Some((e.lagrangian, f));
                            }
                        }
                    }
                    best.expect("prescan always evaluates candidates").1
                };
                out.push((spec, mapping));
            }
            StartSpec::PbtShaped => {
                let mapping = if let Some(p) = p_hint {
                    baselines::optimize_pbt(
                        params,
                        p,
                        cfg.criterion,
                        &cfg.v_grid,
                        &cfg.u_grid,
                        cfg.vhat_grid.clone(),
                    )?
                    .mapping
                } else {
                    let mut best: Option<(f64, EncoderMapping)> = None;
                    for delta_scale in [0.4, 0.8, 1.5, 2.5, 4.0, 6.0, 10.0] {
                        let delta = delta_scale * sv;
                        for power in [0.05f64, 0.25, 1.0, 4.0, 16.0, 64.0] {
                            let p = baselines::PbtParams::new(power.sqrt(), delta)?;
                            let f = baselines::pbt_mapping(&p, &cfg.v_grid)?;
                            let e = obj.evaluate_with(&f, &obj.decoder(&f)?)?;
                            if best.as_ref().is_none_or(|(l, _)| e.lagrangian < *l) {
                                best = Some((e.lagrangian, f));
                            }
                        }
                    }
                    best.expect("prescan always evaluates candidates").1
                };
                out.push((spec, mapping));
            }
            StartSpec::Warm | StartSpec::Custom => {
                return Err(Error::InvalidParam(format!(
                    "start spec {spec} cannot be materialized from a config; \
                     pass its mapping explicitly"
                )));
            }
        }
    }
    Ok(out)
}

/// Runs one descent per start and keeps every report (same order as the
/// start list).
fn descend_all(
    obj: &Objective,
    starts: &[(StartSpec, EncoderMapping)],
    cfg: &OptimizerConfig,
) -> Result<Vec<OptimizerReport>> {
    let mut reports = Vec::with_capacity(starts.len());
    for (spec, init) in starts {
        reports.push(descend_core(obj, init.clone(), cfg, *spec)?);
    }
    Ok(reports)
}

/// Index of the best report by Lagrangian (value + lambda * power), ties to
/// the earliest start.
fn best_by_lagrangian(reports: &[OptimizerReport]) -> usize {
    let mut best = 0;
    for (k, r) in reports.iter().enumerate().skip(1) {
        let lk = r.criterion_value + r.lambda * r.power;
        let lb = reports[best].criterion_value + reports[best].lambda * reports[best].power;
        if lk < lb {
            best = k;
        }
    }
    best
}

/// Multi-start descent at the Lagrange weight in `params`: every configured
/// start descends independently and the best Lagrangian wins. `warm`
/// injects an extra start (used by the power search to reuse the previous
/// probe's winner).
pub fn descend_from_starts(
    params: &SystemParams,
    cfg: &OptimizerConfig,
    p_hint: Option<f64>,
    warm: Option<&EncoderMapping>,
) -> Result<OptimizerReport> {
    if params.r.abs() >= 1.0 {
        return degenerate_report(params, cfg, StartSpec::Custom);
    }
    let obj = Objective::build(params, cfg)?;
    let mut starts = materialize_starts(params, cfg, &obj, p_hint)?;
    if let Some(w) = warm {
        starts.push((StartSpec::Warm, w.clone()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParam("no starts configured".into()));
    }
    let reports = descend_all(&obj, &starts, cfg)?;
    let best = best_by_lagrangian(&reports);
    Ok(reports.into_iter().nth(best).expect("index in range"))
}

/// Bisection on log(lambda) until the achieved average power matches the
/// target within 0.1% (or the bracket/step budget runs out, in which case
/// the nearest achievable power is reported with `power_target_missed`
/// set). Each probe is a full multi-start descent, warm-started from the
/// previous probe's winner; at the accepted weight the final report is the
/// power-feasible candidate with the best criterion value, which keeps the
/// optimized sawtooth/two-level starts from ever beating the winner.
pub fn solve_for_power(
    p_target: f64,
    params: &SystemParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizerReport> {
    if !p_target.is_finite() || p_target <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "power target must be finite and > 0, got {p_target}"
        )));
    }
    if params.r.abs() >= 1.0 {
        let mut report = degenerate_report(params, cfg, StartSpec::Custom)?;
        report.power_target_missed = true;
        report.lambda_trace = vec![(params.lambda, 0.0)];
        return Ok(report);
    }

    let mut obj = Objective::build(params, cfg)?;
    let starts = materialize_starts(params, cfg, &obj, Some(p_target))?;
    if starts.is_empty() {
        return Err(Error::InvalidParam("no starts configured".into()));
    }
    let power_tol = POWER_REL_TOL * p_target;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut warm: Option<EncoderMapping> = None;

    let probe = |lambda: f64,
                 obj: &mut Objective,
                 warm: &mut Option<EncoderMapping>,
                 trace: &mut Vec<(f64, f64)>|
     -> Result<(f64, Vec<OptimizerReport>)> {
        obj.set_lambda(lambda);
        let mut probe_starts = starts.clone();
        if let Some(w) = warm.as_ref() {
            probe_starts.push((StartSpec::Warm, w.clone()));
        }
        let reports = descend_all(obj, &probe_starts, cfg)?;
        let best = best_by_lagrangian(&reports);
        let power = reports[best].power;
        *warm = Some(reports[best].mapping.clone());
        trace.push((lambda, power));
        Ok((power, reports))
    };

    let finalize = |reports: Vec<OptimizerReport>,
                    obj: &Objective,
                    trace: Vec<(f64, f64)>,
                    missed: bool|
     -> Result<OptimizerReport> {
        // Candidates: every descended start, plus the raw parametric starts
        // evaluated as-is (zero iterations), in case descent traded power
        // for value across the feasibility line.
        let mut candidates = reports;
        let mut by_construction = vec![false; candidates.len()];
        for (spec, f) in &starts {
            if matches!(spec, StartSpec::PltShaped | StartSpec::PbtShaped) {
                candidates.push(report_at(obj, f.clone(), cfg, *spec, 0, Vec::new())?);
                // The parametric designs meet the power budget exactly by
                // construction (their constraint is enforced in closed form);
                // the grid quadrature of a kinked waveform may overshoot by
                // its own discretization error, which should not disqualify
                // them.
                by_construction.push(true);
            }
        }
        let feasible: Vec<usize> = (0..candidates.len())
            .filter(|&k| {
                by_construction[k] || candidates[k].power <= p_target * (1.0 + POWER_REL_TOL)
            })
            .collect();
        let pick = if feasible.is_empty() {
            best_by_lagrangian(&candidates)
        } else {
            *feasible
                .iter()
                .min_by(|&&a, &&b| {
                    candidates[a]
                        .criterion_value
                        .partial_cmp(&candidates[b].criterion_value)
                        .expect("criterion values are finite")
                })
                .expect("feasible set is non-empty")
        };
        let mut report = candidates.into_iter().nth(pick).expect("index in range");
        report.lambda_trace = trace;
        report.power_target_missed = missed;
        Ok(report)
    };

    // Bracket endpoints.
    let (lo_power, lo_reports) = probe(LAMBDA_LO, &mut obj, &mut warm, &mut trace)?;
    if (lo_power - p_target).abs() <= power_tol {
        return finalize(lo_reports, &obj, trace, false);
    }
    if lo_power < p_target {
        // Even a near-zero power penalty cannot spend enough power.
        return finalize(lo_reports, &obj, trace, true);
    }
    // Best-by-power-residual fallback across every probe.
    let mut nearest = ((lo_power - p_target).abs(), lo_reports, LAMBDA_LO);

    let (hi_power, hi_reports) = probe(LAMBDA_HI, &mut obj, &mut warm, &mut trace)?;
    if (hi_power - p_target).abs() <= power_tol {
        return finalize(hi_reports, &obj, trace, false);
    }
    if hi_power > p_target {
        return finalize(hi_reports, &obj, trace, true);
    }
    if (hi_power - p_target).abs() < nearest.0 {
        nearest = ((hi_power - p_target).abs(), hi_reports, LAMBDA_HI);
    }

    let (mut lo, mut hi) = (LAMBDA_LO, LAMBDA_HI);
    for _ in 0..MAX_BISECTIONS {
        // Midpoint on a log scale.
        let mid = (lo * hi).sqrt();
        let (power, reports) = probe(mid, &mut obj, &mut warm, &mut trace)?;
        if (power - p_target).abs() <= power_tol {
            return finalize(reports, &obj, trace, false);
        }
        if (power - p_target).abs() < nearest.0 {
            nearest = ((power - p_target).abs(), reports, mid);
        }
        if power > p_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Step budget exhausted: report the nearest achievable power.
    let (_, reports, lambda) = nearest;
    obj.set_lambda(lambda);
    finalize(reports, &obj, trace, true)
}

/// Dominant period estimate: twice the median spacing of the mapping's
/// zero-crossings inside |v| <= 3 sigma_v. Returns `None` with fewer than
/// three crossings (monotone or constant mappings have no period).
pub fn measure_period(f: &EncoderMapping) -> Option<f64> {
    let grid = &f.grid;
    let limit = 3.0 * grid.sigma;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev: Option<(usize, f64)> = None; // last node with a nonzero value
    for (i, (&v, &fv)) in grid.nodes.iter().zip(&f.values).enumerate() {
        if v.abs() > limit || fv == 0.0 {
            continue;
        }
        if let Some((pi, pf)) = prev {
            if (pf < 0.0) != (fv < 0.0) && grid.nodes[pi].abs() <= limit {
                let crossing = if pi + 1 == i {
                    // Linear interpolation between adjacent nodes.
                    let t = pf / (pf - fv);
                    grid.nodes[pi] + t * grid.spacing()
                } else {
                    // The sign change straddles a run of exact zeros.
                    0.5 * (grid.nodes[pi] + v)
                };
                crossings.push(crossing);
            }
        }
        prev = Some((i, fv));
    }
    if crossings.len() < 3 {
        return None;
    }
    let mut gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let median = if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
    };
    Some(2.0 * median)
}
