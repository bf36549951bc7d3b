//! Mean-squared-error side of the design problem: the minimum-MSE decoder
//! table for a given mapping, the quadrature MSE/Lagrangian evaluation, and
//! the functional gradient of the Lagrangian used by the descent optimizer.
//!
//! The Lagrangian is L(f, g) = E[(V - g(Y, U))^2] + lambda E[f(V)^2]. The
//! gradient reported per v-node is the variational derivative with the source
//! pdf factor divided out, so the discrete chain rule reads
//!
//! ```text
//! dL/df_i = w_i * p_V(v_i) * grad[i]
//! ```
//!
//! which is exactly what the finite-difference tests check.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    self, average_power, DecoderTable, EncoderMapping, SourceGrid, SystemParams, Tables,
};
use crate::specfun;

/// Posterior normalizations below this are treated as numerically empty and
/// the decoder entry falls back to the conditional mean.
const DEN_FLOOR: f64 = 1e-300;

/// Nodes with marginal density below this do not count toward gradient
/// sup-norms: they carry no quadrature mass.
pub(crate) const ACTIVE_PDF_FLOOR: f64 = 1e-8;

/// Quadrature MSE evaluation of a (mapping, decoder) pair.
#[derive(Debug, Clone)]
pub struct MseEval {
    /// Mean squared error E[(V - Vhat)^2].
    pub distortion: f64,
    /// Average transmit power E[f(V)^2].
    pub power: f64,
    /// distortion + lambda * power.
    pub lagrangian: f64,
    /// The decoder table the evaluation used.
    pub decoder: DecoderTable,
}

/// Shared state for repeated MSE operations on fixed (params, grids): the
/// conditional-density tables are mapping-independent and dominate the cost
/// of a single call, so optimizer loops build this once.
pub struct MseProblem {
    pub(crate) params: SystemParams,
    pub(crate) v_grid: Arc<SourceGrid>,
    pub(crate) u_grid: Arc<SourceGrid>,
    pub(crate) tables: Tables,
}

impl MseProblem {
    /// # Errors
    /// Rejects |r| = 1 (callers use the degenerate closed forms instead) and
    /// grids inconsistent with the parameters.
    pub fn new(
        params: &SystemParams,
        v_grid: Arc<SourceGrid>,
        u_grid: Arc<SourceGrid>,
    ) -> Result<Self> {
        model::check_v_grid(params, &v_grid)?;
        model::check_u_grid(params, &u_grid)?;
        if params.r.abs() >= 1.0 {
            return Err(Error::DegenerateCorrelation(params.r));
        }
        let tables = Tables::new(params, &v_grid, &u_grid);
        Ok(MseProblem {
            params: params.clone(),
            v_grid,
            u_grid,
            tables,
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

    /// Minimum-MSE decoder table for the mapping: for each label y and side
    /// information u, the posterior mean of V given (Y = y, U = u), computed
    /// by quadrature. Entries whose posterior normalization underflows fall
    /// back to the conditional mean E[V | U = u] and are counted in
    /// `fallback_entries`.
    pub fn decoder(&self, f: &EncoderMapping) -> Result<DecoderTable> {
        self.check_mapping(f)?;
        let (sv, su, r) = (self.params.sigma_v, self.params.sigma_u, self.params.r);
        let (q0, q1) = model::label_likelihoods(&f.values, self.params.sigma_w);
        let v = &self.v_grid.nodes;
        let w_v = &self.v_grid.weights;
        let n_v = v.len();

        let rows: Vec<(f64, f64, usize)> = (0..self.u_grid.len())
            .into_par_iter()
            .map(|j| {
                let row = self.tables.v_row(j);
                let mut num0 = 0.0;
                let mut den0 = 0.0;
                let mut num1 = 0.0;
                let mut den1 = 0.0;
                for i in 0..n_v {
                    let k = w_v[i] * row[i];
                    let a = k * q0[i];
                    den0 += a;
                    num0 += a * v[i];
                    let b = k * q1[i];
                    den1 += b;
                    num1 += b * v[i];
                }
                let cond_mean = r * sv * self.u_grid.nodes[j] / su;
                let mut fallbacks = 0;
                let g0 = if den0 < DEN_FLOOR {
                    fallbacks += 1;
                    cond_mean
                } else {
                    num0 / den0
                };
                let g1 = if den1 < DEN_FLOOR {
                    fallbacks += 1;
                    cond_mean
                } else {
                    num1 / den1
                };
                (g0, g1, fallbacks)
            })
            .collect();

        let mut g0 = Vec::with_capacity(rows.len());
        let mut g1 = Vec::with_capacity(rows.len());
        let mut fallback_entries = 0;
        for (a, b, c) in rows {
            g0.push(a);
            g1.push(b);
            fallback_entries += c;
        }
        let mut table = DecoderTable::new(self.u_grid.clone(), g0, g1)?;
        table.fallback_entries = fallback_entries;
        Ok(table)
    }

    /// Quadrature distortion/power/Lagrangian of the pair (f, g).
    pub fn evaluate_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<MseEval> {
        self.check_mapping(f)?;
        if g.u_grid.nodes != self.u_grid.nodes {
            return Err(Error::GridConfig(
                "decoder grid does not match the problem's side-information grid".into(),
            ));
        }
        let (q0, q1) = model::label_likelihoods(&f.values, self.params.sigma_w);
        let v = &self.v_grid.nodes;
        let w_v = &self.v_grid.weights;
        let n_v = v.len();

        let inner: Vec<f64> = (0..self.u_grid.len())
            .into_par_iter()
            .map(|j| {
                let row = self.tables.v_row(j);
                let (g0, g1) = (g.g0[j], g.g1[j]);
                let mut acc = 0.0;
                for i in 0..n_v {
                    let e0 = v[i] - g0;
                    let e1 = v[i] - g1;
                    acc += w_v[i] * row[i] * (e0 * e0 * q0[i] + e1 * e1 * q1[i]);
                }
                acc
            })
            .collect();

        // Fixed-order reduction keeps repeated runs bit-identical.
        let mut distortion = 0.0;
        for (j, x) in inner.iter().enumerate() {
            distortion += self.u_grid.weights[j] * self.tables.u_pdf[j] * x;
        }
        let power = average_power(f);
        Ok(MseEval {
            distortion,
            power,
            lagrangian: distortion + self.params.lambda * power,
            decoder: g.clone(),
        })
    }

    /// Refreshes the decoder and evaluates the pair in one call.
    pub fn evaluate(&self, f: &EncoderMapping) -> Result<MseEval> {
        let g = self.decoder(f)?;
        self.evaluate_with(f, &g)
    }

    /// Lagrangian gradient per v-node at a *given* decoder (used inside the
    /// descent loop where the decoder was just refreshed):
    ///
    /// ```text
    /// grad(v) = 2 lambda f(v)
    ///         - exp(-f(v)^2 / (2 sigma_w^2)) / (sqrt(2 pi) sigma_w)
    ///           * (2 v A(v) - B(v))
    /// ```
    ///
    /// with A(v) = E[g(0,U) - g(1,U) | V = v] and B(v) the same conditional
    /// expectation of g(0,U)^2 - g(1,U)^2.
    pub fn gradient_with(&self, f: &EncoderMapping, g: &DecoderTable) -> Result<Vec<f64>> {
        self.check_mapping(f)?;
        let sw = self.params.sigma_w;
        let lambda = self.params.lambda;
        let n_u = self.u_grid.len();

        // Fold the u-quadrature weights into the decoder differences once.
        let mut wdg = vec![0.0; n_u];
        let mut wdg2 = vec![0.0; n_u];
        for j in 0..n_u {
            let w = self.u_grid.weights[j];
            wdg[j] = w * (g.g0[j] - g.g1[j]);
            wdg2[j] = w * (g.g0[j] * g.g0[j] - g.g1[j] * g.g1[j]);
        }
        let c0 = specfun::INV_SQRT_2PI / sw;

        let grad: Vec<f64> = (0..self.v_grid.len())
            .into_par_iter()
            .map(|i| {
                let urow = self.tables.u_row(i);
                let mut a = 0.0;
                let mut b = 0.0;
                for j in 0..n_u {
                    a += urow[j] * wdg[j];
                    b += urow[j] * wdg2[j];
                }
                let fv = f.values[i];
                let v = self.v_grid.nodes[i];
                2.0 * lambda * fv
                    - c0 * (-0.5 * fv * fv / (sw * sw)).exp() * (2.0 * v * a - b)
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
        active_sup_norm(&self.tables.v_pdf, grad)
    }
}

/// Sup-norm over nodes whose marginal density exceeds the activity floor.
pub(crate) fn active_sup_norm(v_pdf: &[f64], grad: &[f64]) -> f64 {
    v_pdf
        .iter()
        .zip(grad)
        .filter(|(&p, _)| p > ACTIVE_PDF_FLOOR)
        .map(|(_, &g)| g.abs())
        .fold(0.0, f64::max)
}

/// Minimum-MSE decoder for a mapping: posterior mean of V given (Y, U).
///
/// r = +/-1 short-circuits to the conditional mean g(y, u) = r sigma_v u / sigma_u.
///
/// # Errors
/// Grid/parameter inconsistencies ([`Error::GridConfig`]).
pub fn mmse_decoder(
    f: &EncoderMapping,
    params: &SystemParams,
    u_grid: &Arc<SourceGrid>,
) -> Result<DecoderTable> {
    model::check_v_grid(params, &f.grid)?;
    model::check_u_grid(params, u_grid)?;
    if params.r.abs() >= 1.0 {
        return Ok(model::conditional_mean_decoder(params, u_grid));
    }
    MseProblem::new(params, f.grid.clone(), u_grid.clone())?.decoder(f)
}

/// Quadrature MSE of a (mapping, decoder) pair under the given parameters.
///
/// For r = +/-1 the source is a deterministic function of U and the double
/// quadrature collapses to a single integral over u.
pub fn mse_distortion(
    f: &EncoderMapping,
    g: &DecoderTable,
    params: &SystemParams,
) -> Result<MseEval> {
    model::check_v_grid(params, &f.grid)?;
    model::check_u_grid(params, &g.u_grid)?;
    if params.r.abs() >= 1.0 {
        let (sv, su, sw) = (params.sigma_v, params.sigma_u, params.sigma_w);
        let mut distortion = 0.0;
        for (j, (&u, &w)) in g.u_grid.nodes.iter().zip(&g.u_grid.weights).enumerate() {
            let v = params.r * sv * u / su;
            let fv = f.eval(v);
            let p0 = specfun::q_raw(-fv / sw);
            let p1 = specfun::q_raw(fv / sw);
            let e0 = v - g.g0[j];
            let e1 = v - g.g1[j];
            let pu = specfun::normal_pdf_raw(u / su) / su;
            distortion += w * pu * (e0 * e0 * p0 + e1 * e1 * p1);
        }
        let power = average_power(f);
        return Ok(MseEval {
            distortion,
            power,
            lagrangian: distortion + params.lambda * power,
            decoder: g.clone(),
        });
    }
    MseProblem::new(params, f.grid.clone(), g.u_grid.clone())?.evaluate_with(f, g)
}

/// Lagrangian gradient per v-node with the decoder refreshed for `f`.
///
/// # Errors
/// [`Error::DegenerateCorrelation`] for |r| = 1 (the optimizer short-circuits
/// those runs before any gradient is needed).
pub fn grad_mse(
    f: &EncoderMapping,
    params: &SystemParams,
    u_grid: &Arc<SourceGrid>,
) -> Result<Vec<f64>> {
    let problem = MseProblem::new(params, f.grid.clone(), u_grid.clone())?;
    problem.gradient(f)
}
