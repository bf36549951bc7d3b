//! Distortion-outage side of the design problem: difference-interval
//! geometry, the windowed-mass decoder, outage evaluation, and the Lagrangian
//! gradient for the criterion P[(V - Vhat)^2 >= D].
//!
//! For a decoder table g and target D, each side-information value u induces
//! two acceptance windows I_y(u) = (g(y,u) - sqrt(D), g(y,u) + sqrt(D)). A
//! source value v survives label y exactly when v lies in I_y(u), so the
//! outage probability splits into three disjoint pieces:
//!
//! * v in I0\I1: outage happens exactly when the channel outputs label 1;
//! * v in I1\I0: outage happens exactly when the channel outputs label 0;
//! * v outside both windows: outage regardless of the label ("source
//!   outage" - no channel input could have saved it).
//!
//! All quadratures integrate the piecewise-linear interpolant of the grid
//! samples with *exact* window endpoints (cells straddling an endpoint are
//! split analytically, not snapped to nodes): outage is sensitive to
//! O(spacing) boundary errors.
//!
//! The gradient reported per v-node is the variational derivative with the
//! source pdf factor divided out, exactly as in the MSE module:
//!
//! ```text
//! dL/df_i = w_i * p_V(v_i) * grad[i]
//! ```
//!
//! The set probabilities inside the gradient use the same clipped-cell node
//! weights as the outage quadrature itself, so the identity above holds to
//! rounding error and finite differences of the discrete Lagrangian validate
//! the gradient tightly.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    self, average_power, DecoderTable, EncoderMapping, SourceGrid, SystemParams, Tables,
};
use crate::specfun;

/// Per side-information node: bounds of the two difference intervals
/// I0\I1 = (b0l, b0r) and I1\I0 = (b1l, b1r) between the label-0 and
/// label-1 acceptance windows. Empty intervals are encoded with the lower
/// bound above the upper bound (+inf, -inf), so width computations and
/// membership tests degrade gracefully.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBounds {
    /// Lower edge of I0\I1.
    pub b0l: f64,
    /// Upper edge of I0\I1.
    pub b0r: f64,
    /// Lower edge of I1\I0.
    pub b1l: f64,
    /// Upper edge of I1\I0.
    pub b1r: f64,
}

impl IntervalBounds {
    const EMPTY: (f64, f64) = (f64::INFINITY, f64::NEG_INFINITY);

    /// Case analysis on a single pair of decoder outputs with target `d`:
    /// equal outputs make both differences empty; otherwise each difference
    /// is the leading sliver of its window not covered by the other.
    pub fn from_outputs(g0: f64, g1: f64, d: f64) -> IntervalBounds {
        let s = d.sqrt();
        if g0 == g1 {
            let (el, er) = Self::EMPTY;
            return IntervalBounds {
                b0l: el,
                b0r: er,
                b1l: el,
                b1r: er,
            };
        }
        if g0 > g1 {
            IntervalBounds {
                b0l: (g1 + s).max(g0 - s),
                b0r: g0 + s,
                b1l: g1 - s,
                b1r: (g1 + s).min(g0 - s),
            }
        } else {
            IntervalBounds {
                b0l: g0 - s,
                b0r: (g0 + s).min(g1 - s),
                b1l: (g1 - s).max(g0 + s),
                b1r: g1 + s,
            }
        }
    }

    /// Membership of a source value in I0\I1 (closed at the edges; the
    /// distinction carries no probability mass).
    pub fn s01_contains(&self, v: f64) -> bool {
        self.b0l <= v && v <= self.b0r
    }

    /// Membership of a source value in I1\I0.
    pub fn s10_contains(&self, v: f64) -> bool {
        self.b1l <= v && v <= self.b1r
    }
}

/// Difference-interval bounds for every node of a decoder table.
///
/// # Errors
/// `d` must be finite and positive.
pub fn interval_bounds(g: &DecoderTable, d: f64) -> Result<Vec<IntervalBounds>> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "distortion target must be finite and > 0, got {d}"
        )));
    }
    Ok(g.g0
        .iter()
        .zip(&g.g1)
        .map(|(&a, &b)| IntervalBounds::from_outputs(a, b, d))
        .collect())
}

/// Running integral of the piecewise-linear interpolant of uniform grid
/// samples, evaluable at arbitrary (non-node) points. Backs the
/// sliding-window scan of the decoder.
struct Cumulative<'a> {
    nodes: &'a [f64],
    m: Vec<f64>,
    cum: Vec<f64>,
    d: f64,
}

impl<'a> Cumulative<'a> {
    fn new(nodes: &'a [f64], d: f64, m: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 0..n - 1 {
            acc += 0.5 * d * (m[k] + m[k + 1]);
            cum.push(acc);
        }
        Cumulative { nodes, m, cum, d }
    }

    /// Integral of the interpolant from the left grid edge to x (clamped to
    /// the grid support).
    fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[n - 1] {
            return self.cum[n - 1];
        }
        let k = (((x - self.nodes[0]) / self.d) as usize).min(n - 2);
        let t = ((x - self.nodes[k]) / self.d).clamp(0.0, 1.0);
        let half_t2 = 0.5 * t * t;
        self.cum[k] + self.d * (self.m[k] * (t - half_t2) + self.m[k + 1] * half_t2)
    }

    /// Integral over (a, b) intersected with the grid support; 0 when empty.
    fn window(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.eval(b) - self.eval(a)
        }
    }
}

/// Integral of the piecewise-linear interpolant of `m(i)` over (a, b)
/// clamped to the grid, splitting the first and last cells analytically.
/// Linear in the samples; the coefficient each node receives is exactly
/// [`clipped_node_weight`], which the gradient relies on.
fn range_integral<F: Fn(usize) -> f64>(nodes: &[f64], d: f64, m: F, a: f64, b: f64) -> f64 {
    let n = nodes.len();
    let a = a.max(nodes[0]);
    let b = b.min(nodes[n - 1]);
    if b <= a {
        return 0.0;
    }
    let ka = (((a - nodes[0]) / d) as usize).min(n - 2);
    let kb = (((b - nodes[0]) / d) as usize).min(n - 2);
    // Integral over [t0, t1] (cell coordinates) of m0*(1-t) + m1*t, times d.
    let piece = |m0: f64, m1: f64, t0: f64, t1: f64| {
        let half_t2 = 0.5 * (t1 * t1 - t0 * t0);
        d * (m0 * ((t1 - t0) - half_t2) + m1 * half_t2)
    };
    if ka == kb {
        let t0 = ((a - nodes[ka]) / d).clamp(0.0, 1.0);
        let t1 = ((b - nodes[ka]) / d).clamp(0.0, 1.0);
        return piece(m(ka), m(ka + 1), t0, t1);
    }
    let mut prev = m(ka + 1);
    let t0 = ((a - nodes[ka]) / d).clamp(0.0, 1.0);
    let mut acc = piece(m(ka), prev, t0, 1.0);
    for k in ka + 1..kb {
        let next = m(k + 1);
        acc += 0.5 * d * (prev + next);
        prev = next;
    }
    let t1 = ((b - nodes[kb]) / d).clamp(0.0, 1.0);
    acc + piece(prev, m(kb + 1), 0.0, t1)
}

/// Quadrature weight node `i` receives from [`range_integral`] over (a, b):
/// its interpolation hat function integrated over the clipped window. Equals
/// the plain trapezoid weight for nodes strictly inside, tapers to zero
/// across the boundary cells, and is 0 for empty windows (a > b), including
/// the (+inf, -inf) empty-interval encoding.
fn clipped_node_weight(nodes: &[f64], d: f64, i: usize, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let n = nodes.len();
    let mut c = 0.0;
    if i > 0 {
        let lo = a.max(nodes[i - 1]);
        let hi = b.min(nodes[i]);
        if hi > lo {
            let t0 = ((lo - nodes[i - 1]) / d).clamp(0.0, 1.0);
            let t1 = ((hi - nodes[i - 1]) / d).clamp(0.0, 1.0);
            c += d * 0.5 * (t1 * t1 - t0 * t0);
        }
    }
    if i + 1 < n {
        let lo = a.max(nodes[i]);
        let hi = b.min(nodes[i + 1]);
        if hi > lo {
            let t0 = ((lo - nodes[i]) / d).clamp(0.0, 1.0);
            let t1 = ((hi - nodes[i]) / d).clamp(0.0, 1.0);
            c += d * ((t1 - t0) - 0.5 * (t1 * t1 - t0 * t0));
        }
    }
    c
}

/// Quadrature outage evaluation of a (mapping, decoder) pair.
#[derive(Debug, Clone)]
pub struct DopEval {
    /// Outage probability P[(V - Vhat)^2 >= D].
    pub outage: f64,
    /// Probability that the source value lies outside both acceptance
    /// windows, so outage occurs regardless of the channel label.
    pub source_outage: f64,
    /// Average transmit power E[f(V)^2].
    pub power: f64,
    /// outage + lambda * power.
    pub lagrangian: f64,
    /// The decoder table the evaluation used.
    pub decoder: DecoderTable,
}

/// Shared state for repeated outage operations on fixed (params, grids),
/// mirroring [`crate::mse::MseProblem`]: the conditional-density tables are
/// mapping-independent and built once.
pub struct DopProblem {
    pub(crate) params: SystemParams,
    pub(crate) v_grid: Arc<SourceGrid>,
    pub(crate) u_grid: Arc<SourceGrid>,
    /// Candidate reconstruction values for the decoder search.
    pub(crate) vhat_grid: Arc<SourceGrid>,
    pub(crate) tables: Tables,
    sqrt_d: f64,
    /// Candidate indices sorted by (|vhat|, vhat); scanning in this order
    /// with a strictly-greater comparison breaks argmax ties toward the
    /// smallest magnitude, then the smaller value.
    vhat_order: Vec<usize>,
}

impl DopProblem {
    /// `vhat_grid` defaults to the source grid when `None`.
    ///
    /// # Errors
    /// Rejects |r| = 1 (callers use the degenerate closed forms instead),
    /// grids inconsistent with the parameters, and a missing distortion
    /// target.
    pub fn new(
        params: &SystemParams,
        v_grid: Arc<SourceGrid>,
        u_grid: Arc<SourceGrid>,
        vhat_grid: Option<Arc<SourceGrid>>,
    ) -> Result<Self> {
        model::check_v_grid(params, &v_grid)?;
        model::check_u_grid(params, &u_grid)?;
        let d_target = params.require_d_target()?;
        if params.r.abs() >= 1.0 {
            return Err(Error::DegenerateCorrelation(params.r));
        }
        let vhat_grid = vhat_grid.unwrap_or_else(|| v_grid.clone());
        if vhat_grid.sigma != params.sigma_v {
            return Err(Error::GridConfig(format!(
                "reconstruction grid sigma {} != params.sigma_v {}",
                vhat_grid.sigma, params.sigma_v
            )));
        }
        let mut vhat_order: Vec<usize> = (0..vhat_grid.len()).collect();
        vhat_order.sort_by(|&a, &b| {
            let (va, vb) = (vhat_grid.nodes[a], vhat_grid.nodes[b]);
            (va.abs(), va)
                .partial_cmp(&(vb.abs(), vb))
                .expect("grid nodes are finite")
        });
        let tables = Tables::new(params, &v_grid, &u_grid);
        Ok(DopProblem {
            params: params.clone(),
            v_grid,
            u_grid,
            vhat_grid,
            tables,
            sqrt_d: d_target.sqrt(),
            vhat_order,
        })
    }

    fn check_mapping(&self, f: &EncoderMapping) -> Result<()> {
        if f.grid.nodes != self.v_grid.nodes {
            return Err(Error::GridConfig(
                "mapping grid does not match the problem's source grid".into(),
            ));
        }
        Ok(())
    }

    fn check_decoder(&self, g: &DecoderTable) -> Result<()> {
        if g.u_grid.nodes != self.u_grid.nodes {
            return Err(Error::GridConfig(
                "decoder grid does not match the problem's side-information grid".into(),
            ));
        }
        Ok(())
    }

    /// Outage-optimal decoder for the mapping: for each label y and side
    /// information u, the center of the width-2sqrt(D) window capturing the
    /// most posterior mass, found by scanning every candidate over a running
    /// cumulative integral. Ties break toward the smallest |vhat|, then the
    /// smallest vhat, which keeps the table odd-symmetric for symmetric
    /// posteriors.
    ///
    /// # Errors
    /// sqrt(D) beyond the source grid half-width makes every window cover
    /// the whole grid; that degenerate configuration is rejected.
    pub fn decoder(&self, f: &EncoderMapping) -> Result<DecoderTable> {
        self.check_mapping(f)?;
        let span = self.v_grid.halfwidth_sigmas * self.params.sigma_v;
        if self.sqrt_d > span {
            return Err(Error::GridConfig(format!(
                "window half-width sqrt(D) = {} exceeds the source grid half-width {span}",
                self.sqrt_d
            )));
        }
        let (q0, q1) = model::label_likelihoods(&f.values, self.params.sigma_w);
        let nodes = &self.v_grid.nodes;
        let d = self.v_grid.spacing();
        let s = self.sqrt_d;

        let rows: Vec<(f64, f64)> = (0..self.u_grid.len())
            .into_par_iter()
            .map(|j| {
                let row = self.tables.v_row(j);
                let weigh = |q: &[f64]| {
                    let m = row.iter().zip(q).map(|(&p, &w)| p * w).collect();
                    Cumulative::new(nodes, d, m)
                };
                let scan = |c: &Cumulative| {
                    let mut best_mass = f64::NEG_INFINITY;
                    let mut best = 0.0;
                    for &k in &self.vhat_order {
                        let vhat = self.vhat_grid.nodes[k];
                        let mass = c.window(vhat - s, vhat + s);
                        if mass > best_mass {
                            best_mass = mass;
                            best = vhat;
                        }
                    }
                    best
                };
                (scan(&weigh(&q0)), scan(&weigh(&q1)))
            })
            .collect();

        let g0 = rows.iter().map(|&(a, _)| a).collect();
        let g1 = rows.iter().map(|&(_, b)| b).collect();
        DecoderTable::new(self.u_grid.clone(), g0, g1)
    }

    /// Quadrature outage/power/Lagrangian of the pair (f, g): per u-node,
    /// the label-weighted mass of the two difference intervals plus the
    /// mass outside both acceptance windows, integrated with exact window
    /// endpoints.
    pub fn evaluate_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<DopEval> {
        self.check_mapping(f)?;
        self.check_decoder(g)?;
        let (q0, q1) = model::label_likelihoods(&f.values, self.params.sigma_w);
        let nodes = &self.v_grid.nodes;
        let d = self.v_grid.spacing();
        let s = self.sqrt_d;

        let inner: Vec<(f64, f64)> = (0..self.u_grid.len())
            .into_par_iter()
            .map(|j| {
                let row = self.tables.v_row(j);
                let (g0, g1) = (g.g0[j], g.g1[j]);
                let ib = IntervalBounds::from_outputs(g0, g1, self.params.d_target);
                let label1_loss = range_integral(nodes, d, |i| row[i] * q1[i], ib.b0l, ib.b0r);
                let label0_loss = range_integral(nodes, d, |i| row[i] * q0[i], ib.b1l, ib.b1r);
                let p0 = range_integral(nodes, d, |i| row[i], g0 - s, g0 + s);
                let p1 = range_integral(nodes, d, |i| row[i], g1 - s, g1 + s);
                let overlap =
                    range_integral(nodes, d, |i| row[i], g0.max(g1) - s, g0.min(g1) + s);
                let union = p0 + p1 - overlap;
                let source = (self.tables.v_mass_given_u[j] - union).max(0.0);
                (label1_loss + label0_loss + source, source)
            })
            .collect();

        // Fixed-order reduction keeps repeated runs bit-identical.
        let mut outage = 0.0;
        let mut source_outage = 0.0;
        for (j, &(o, so)) in inner.iter().enumerate() {
            let wp = self.u_grid.weights[j] * self.tables.u_pdf[j];
            outage += wp * o;
            source_outage += wp * so;
        }
        let power = average_power(f);
        Ok(DopEval {
            outage,
            source_outage,
            power,
            lagrangian: outage + self.params.lambda * power,
            decoder: g.clone(),
        })
    }

    /// Refreshes the decoder and evaluates the pair in one call.
    pub fn evaluate(&self, f: &EncoderMapping) -> Result<DopEval> {
        let g = self.decoder(f)?;
        self.evaluate_with(f, &g)
    }

    /// Lagrangian gradient per v-node at a *given* decoder:
    ///
    /// ```text
    /// grad(v) = 2 lambda f(v)
    ///         - exp(-f(v)^2 / (2 sigma_w^2)) / (sqrt(2 pi) sigma_w)
    ///           * (Pr[U in S01(v)] - Pr[U in S10(v)])
    /// ```
    ///
    /// where S01(v) = {u : v in I0\I1(u)} and S10(v) = {u : v in I1\I0(u)}.
    /// The set probabilities weight each u-node by the clipped quadrature
    /// weight v receives from that node's difference interval (normalized by
    /// the node's plain weight), making the gradient the exact derivative of
    /// the discrete Lagrangian computed by [`Self::evaluate_with`].
    pub fn gradient_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<Vec<f64>> {
        self.check_mapping(f)?;
        self.check_decoder(g)?;
        let bounds = interval_bounds(g, self.params.d_target)?;
        let nodes = &self.v_grid.nodes;
        let d = self.v_grid.spacing();
        let (sw, lambda) = (self.params.sigma_w, self.params.lambda);
        let c0 = specfun::INV_SQRT_2PI / sw;
        let w_u = &self.u_grid.weights;

        let grad: Vec<f64> = (0..self.v_grid.len())
            .into_par_iter()
            .map(|i| {
                let urow = self.tables.u_row(i);
                let v = nodes[i];
                let mut s01 = 0.0;
                let mut s10 = 0.0;
                for (j, ib) in bounds.iter().enumerate() {
                    // Quick reject: the clipped weight vanishes more than one
                    // cell outside the interval (and for empty intervals,
                    // whose bounds are (+inf, -inf)).
                    if v > ib.b0l - d && v < ib.b0r + d {
                        s01 += w_u[j]
                            * urow[j]
                            * clipped_node_weight(nodes, d, i, ib.b0l, ib.b0r);
                    }
                    if v > ib.b1l - d && v < ib.b1r + d {
                        s10 += w_u[j]
                            * urow[j]
                            * clipped_node_weight(nodes, d, i, ib.b1l, ib.b1r);
                    }
                }
                let w_i = self.v_grid.weights[i];
                let fv = f.values[i];
                2.0 * lambda * fv
                    - c0 * (-0.5 * fv * fv / (sw * sw)).exp() * (s01 - s10) / w_i
            })
            .collect();
        Ok(grad)
    }

    /// Gradient with the decoder refreshed for `f` first.
    pub fn gradient(&self, f: &EncoderMapping) -> Result<Vec<f64>> {
        let g = self.decoder(f)?;
        self.gradient_with(f, &g)
    }

    /// Sup-norm of a gradient over nodes that carry quadrature mass.
    pub(crate) fn active_sup_norm(&self, grad: &[f64]) -> f64 {
        crate::mse::active_sup_norm(&self.tables.v_pdf, grad)
    }
}

/// Outage-optimal decoder for a mapping (window-mass argmax per label and
/// side-information node).
///
/// r = +/-1 short-circuits to the conditional mean g(y, u) = r sigma_v u / sigma_u,
/// which decodes perfectly whenever D > 0.
///
/// # Errors
/// Missing distortion target, grid/parameter inconsistencies, or sqrt(D)
/// beyond the source grid half-width.
pub fn dop_decoder(
    f: &EncoderMapping,
    params: &SystemParams,
    u_grid: &Arc<SourceGrid>,
    vhat_grid: &Arc<SourceGrid>,
) -> Result<DecoderTable> {
    model::check_v_grid(params, &f.grid)?;
    model::check_u_grid(params, u_grid)?;
    params.require_d_target()?;
    if params.r.abs() >= 1.0 {
        return Ok(model::conditional_mean_decoder(params, u_grid));
    }
    DopProblem::new(
        params,
        f.grid.clone(),
        u_grid.clone(),
        Some(vhat_grid.clone()),
    )?
    .decoder(f)
}

/// Quadrature outage of a (mapping, decoder) pair under the given parameters.
///
/// For r = +/-1 the source is a deterministic function of U and the outage
/// collapses to a single quadrature over u.
pub fn dop_evaluate(f: &EncoderMapping, g: &DecoderTable, params: &SystemParams) -> Result<DopEval> {
    model::check_v_grid(params, &f.grid)?;
    model::check_u_grid(params, &g.u_grid)?;
    let d_target = params.require_d_target()?;
    if params.r.abs() >= 1.0 {
        let (sv, su, sw) = (params.sigma_v, params.sigma_u, params.sigma_w);
        let s = d_target.sqrt();
        let mut outage = 0.0;
        let mut source_outage = 0.0;
        for (j, (&u, &w)) in g.u_grid.nodes.iter().zip(&g.u_grid.weights).enumerate() {
            let v = params.r * sv * u / su;
            let fv = f.eval(v);
            let miss0 = (v - g.g0[j]).abs() >= s;
            let miss1 = (v - g.g1[j]).abs() >= s;
            let pu = w * specfun::normal_pdf_raw(u / su) / su;
            let p0 = specfun::q_raw(-fv / sw);
            let p1 = specfun::q_raw(fv / sw);
            outage += pu * (if miss0 { p0 } else { 0.0 } + if miss1 { p1 } else { 0.0 });
            if miss0 && miss1 {
                source_outage += pu;
            }
        }
        let power = average_power(f);
        return Ok(DopEval {
            outage,
            source_outage,
            power,
            lagrangian: outage + params.lambda * power,
            decoder: g.clone(),
        });
    }
    DopProblem::new(params, f.grid.clone(), g.u_grid.clone(), None)?.evaluate_with(f, g)
}

/// Lagrangian gradient per v-node at a fixed decoder.
///
/// # Errors
/// [`Error::DegenerateCorrelation`] for |r| = 1 (the optimizer short-circuits
/// those runs before any gradient is needed).
pub fn grad_dop(f: &EncoderMapping, g: &DecoderTable, params: &SystemParams) -> Result<Vec<f64>> {
    if params.r.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation(params.r));
    }
    DopProblem::new(params, f.grid.clone(), g.u_grid.clone(), None)?.gradient_with(f, g)
}

/// Outage floor in the vanishing-power limit: with f -> 0 the channel output
/// carries no information and the best decoder centers its window on the
/// conditional mean, leaving 2 Q(sqrt(D) / (sigma_v sqrt(1 - r^2))).
///
/// Returns 0 for r = +/-1 (perfect side information).
///
/// # Errors
/// Missing distortion target.
pub fn dop_low_snr_limit(params: &SystemParams) -> Result<f64> {
    let d_target = params.require_d_target()?;
    if params.r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let cond_std = params.sigma_v * (1.0 - params.r * params.r).sqrt();
    Ok(2.0 * specfun::q_raw(d_target.sqrt() / cond_std))
}
