//! Problem domain types: system parameters, truncated quadrature grids, the
//! encoder mapping and decoder table representations, the one-bit quantizer,
//! and the average-power functional.
//!
//! Conventions used everywhere in this crate:
//! * the source is V ~ N(0, sigma_v^2), side information U ~ N(0, sigma_u^2)
//!   with correlation r, channel noise W ~ N(0, sigma_w^2);
//! * the channel output is the one-bit label y = quantize(f(V) + W), with
//!   y = 0 for non-negative arguments;
//! * expectations over V (or U) are trapezoid quadratures on a uniform grid
//!   truncated at `halfwidth_sigmas` standard deviations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::specfun;

/// Which design criterion an optimizer run or simulation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Mean squared error E[(V - Vhat)^2].
    Mse,
    /// Distortion outage probability P[(V - Vhat)^2 >= D].
    Dop,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Mse => write!(f, "mse"),
            Criterion::Dop => write!(f, "dop"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Criterion::Mse),
            "dop" => Ok(Criterion::Dop),
            other => Err(Error::InvalidParam(format!(
                "criterion must be \"mse\" or \"dop\", got \"{other}\""
            ))),
        }
    }
}

/// Source / side-information / channel parameters plus the Lagrange weight
/// and (for the outage criterion) the distortion target.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub sigma_w: f64,
    /// Correlation between V and U, in [-1, 1].
    pub r: f64,
    /// Lagrange weight on average power (>= 0).
    pub lambda: f64,
    /// Distortion target D for the outage criterion (> 0 where used;
    /// 0.0 means "unset", which outage operations reject).
    pub d_target: f64,
}

impl SystemParams {
    /// Validated constructor; `lambda` starts at 0 and `d_target` unset.
    pub fn new(sigma_v: f64, sigma_u: f64, sigma_w: f64, r: f64) -> Result<Self> {
        for (name, s) in [
            ("sigma_v", sigma_v),
            ("sigma_u", sigma_u),
            ("sigma_w", sigma_w),
        ] {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "{name} must be finite and > 0, got {s}"
                )));
            }
        }
        if !r.is_finite() || !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidParam(format!(
                "r must lie in [-1, 1], got {r}"
            )));
        }
        Ok(SystemParams {
            sigma_v,
            sigma_u,
            sigma_w,
            r,
            lambda: 0.0,
            d_target: 0.0,
        })
    }

    /// Returns a copy with the given Lagrange weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParam(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(SystemParams { lambda, ..self.clone() })
    }

    /// Returns a copy with the given outage distortion target.
    pub fn with_d_target(&self, d_target: f64) -> Result<Self> {
        if !d_target.is_finite() || d_target <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "d_target must be finite and > 0, got {d_target}"
            )));
        }
        Ok(SystemParams { d_target, ..self.clone() })
    }

    /// The outage target, or an error if it was never set.
    pub(crate) fn require_d_target(&self) -> Result<f64> {
        if self.d_target > 0.0 {
            Ok(self.d_target)
        } else {
            Err(Error::InvalidParam(
                "d_target must be set (> 0) for outage operations".into(),
            ))
        }
    }
}

/// Uniform quadrature grid truncated at `halfwidth_sigmas` standard
/// deviations, with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGrid {
    /// Standard deviation of the variable this grid discretizes.
    pub sigma: f64,
    /// Truncation half-width in units of `sigma`.
    pub halfwidth_sigmas: f64,
    /// Strictly increasing, uniformly spaced nodes; odd count, middle node 0.
    pub nodes: Vec<f64>,
    /// Trapezoid weights: spacing/2 at the ends, spacing inside.
    pub weights: Vec<f64>,
}

impl SourceGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node spacing (uniform by construction).
    pub fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    /// Index of the central node (exactly 0.0).
    pub fn center(&self) -> usize {
        self.nodes.len() / 2
    }

    /// Quadrature of the standard-normal mass this grid captures:
    /// sum_i w_i * phi(v_i/sigma)/sigma.
    pub fn captured_mass(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * specfun::normal_pdf_raw(v / self.sigma) / self.sigma)
            .sum()
    }

    /// Marginal densities phi(v_i/sigma)/sigma at every node.
    pub(crate) fn pdf(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|&v| specfun::normal_pdf_raw(v / self.sigma) / self.sigma)
            .collect()
    }
}

/// Builds a uniform trapezoid grid with an odd node count so 0 is a node and
/// nodes come in exact +/- pairs.
///
/// # Errors
/// Rejects non-positive or non-finite `sigma`, `halfwidth_sigmas < 4` (too
/// much probability mass would be cut off), even `n`, and `n < 3`.
pub fn make_grid(sigma: f64, halfwidth_sigmas: f64, n: usize) -> Result<SourceGrid> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::GridConfig(format!(
            "sigma must be finite and > 0, got {sigma}"
        )));
    }
    if !halfwidth_sigmas.is_finite() || halfwidth_sigmas < 4.0 {
        return Err(Error::GridConfig(format!(
            "halfwidth_sigmas must be >= 4, got {halfwidth_sigmas}"
        )));
    }
    if n < 3 || n % 2 == 0 {
        return Err(Error::GridConfig(format!(
            "n must be odd and >= 3, got {n}"
        )));
    }
    let m = (n - 1) / 2;
    // Spacing chosen so node m is exactly 0 and nodes mirror exactly:
    // v_i = (i - m) * d.
    let d = halfwidth_sigmas * sigma / m as f64;
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 - m as f64) * d).collect();
    let mut weights = vec![d; n];
    weights[0] = 0.5 * d;
    weights[n - 1] = 0.5 * d;
    Ok(SourceGrid {
        sigma,
        halfwidth_sigmas,
        nodes,
        weights,
    })
}

/// Encoder mapping f sampled on a source grid; between nodes the mapping is
/// understood as linear, constant beyond the support.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMapping {
    pub grid: Arc<SourceGrid>,
    pub values: Vec<f64>,
}

impl EncoderMapping {
    /// # Errors
    /// Rejects length mismatch with the grid and non-finite values.
    pub fn new(grid: Arc<SourceGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "mapping has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                name: "mapping value",
                value: *bad,
            });
        }
        Ok(EncoderMapping { grid, values })
    }

    /// Evaluates the mapping at `x` by linear interpolation, clamped to the
    /// boundary values outside the grid support.
    pub fn eval(&self, x: f64) -> f64 {
        interp_clamped(&self.grid.nodes, &self.values, x)
    }
}

/// Decoder lookup table: reconstruction levels g(y, u) for both channel
/// labels, sampled on a side-information grid (linear interpolation in u).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTable {
    pub u_grid: Arc<SourceGrid>,
    /// Reconstruction for label y = 0 at each u node.
    pub g0: Vec<f64>,
    /// Reconstruction for label y = 1 at each u node.
    pub g1: Vec<f64>,
    /// How many (y, u) entries fell back to the conditional mean because the
    /// posterior normalization underflowed.
    pub fallback_entries: usize,
}

impl DecoderTable {
    /// # Errors
    /// Rejects length mismatches and non-finite entries.
    pub fn new(u_grid: Arc<SourceGrid>, g0: Vec<f64>, g1: Vec<f64>) -> Result<Self> {
        if g0.len() != u_grid.len() || g1.len() != u_grid.len() {
            return Err(Error::InvalidParam(format!(
                "decoder columns have {} / {} values for a grid of {} nodes",
                g0.len(),
                g1.len(),
                u_grid.len()
            )));
        }
        if let Some(bad) = g0.iter().chain(&g1).find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                name: "decoder value",
                value: *bad,
            });
        }
        Ok(DecoderTable {
            u_grid,
            g0,
            g1,
            fallback_entries: 0,
        })
    }

    /// Reconstruction g(y, u) with linear interpolation in u (clamped).
    pub fn eval(&self, y: u8, u: f64) -> f64 {
        let col = if y == 0 { &self.g0 } else { &self.g1 };
        interp_clamped(&self.u_grid.nodes, col, u)
    }
}

/// One-bit ADC: label 0 for z >= 0, label 1 for z < 0.
///
/// # Errors
/// Returns [`Error::NonFinite`] for NaN (infinities still have a sign and
/// quantize fine).
pub fn quantize(z: f64) -> Result<u8> {
    if z.is_nan() {
        return Err(Error::NonFinite {
            name: "z",
            value: z,
        });
    }
    Ok(quantize_raw(z))
}

#[inline]
pub(crate) fn quantize_raw(z: f64) -> u8 {
    if z >= 0.0 {
        0
    } else {
        1
    }
}

/// Average transmit power E[f(V)^2] by quadrature on the mapping's own grid.
pub fn average_power(f: &EncoderMapping) -> f64 {
    let g = &f.grid;
    g.nodes
        .iter()
        .zip(&g.weights)
        .zip(&f.values)
        .map(|((&v, &w), &fv)| {
            w * specfun::normal_pdf_raw(v / g.sigma) / g.sigma * fv * fv
        })
        .sum()
}

/// Per-node likelihoods of the two channel labels given the channel input:
/// P(y = 0 | f) = Q(-f/sigma_w) and P(y = 1 | f) = Q(f/sigma_w).
pub(crate) fn label_likelihoods(values: &[f64], sigma_w: f64) -> (Vec<f64>, Vec<f64>) {
    let q0 = values
        .iter()
        .map(|&x| crate::specfun::q_raw(-x / sigma_w))
        .collect();
    let q1 = values
        .iter()
        .map(|&x| crate::specfun::q_raw(x / sigma_w))
        .collect();
    (q0, q1)
}

/// Linear interpolation on a uniform ascending grid, clamped to the boundary
/// values outside the support.
pub(crate) fn interp_clamped(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    if x <= nodes[0] {
        return values[0];
    }
    if x >= nodes[n - 1] {
        return values[n - 1];
    }
    let d = nodes[1] - nodes[0];
    let mut k = ((x - nodes[0]) / d) as usize;
    if k > n - 2 {
        k = n - 2;
    }
    // Guard against floating-point edge cases in the index computation.
    if x < nodes[k] && k > 0 {
        k -= 1;
    } else if x > nodes[k + 1] && k < n - 2 {
        k += 1;
    }
    let t = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
    values[k] + t * (values[k + 1] - values[k])
}

/// Checks that an encoder grid is consistent with `params.sigma_v` (same
/// standard deviation), used by operations that mix mappings and parameters.
pub(crate) fn check_v_grid(params: &SystemParams, grid: &SourceGrid) -> Result<()> {
    if grid.sigma != params.sigma_v {
        return Err(Error::GridConfig(format!(
            "encoder grid sigma {} != params.sigma_v {}",
            grid.sigma, params.sigma_v
        )));
    }
    Ok(())
}

/// Same consistency check for a side-information grid.
pub(crate) fn check_u_grid(params: &SystemParams, grid: &SourceGrid) -> Result<()> {
    if grid.sigma != params.sigma_u {
        return Err(Error::GridConfig(format!(
            "decoder grid sigma {} != params.sigma_u {}",
            grid.sigma, params.sigma_u
        )));
    }
    Ok(())
}

/// Conditional-mean decoder table for the degenerate correlations r = +/-1:
/// V is a deterministic function of U, so both labels decode to
/// r * sigma_v * u / sigma_u regardless of the mapping.
pub(crate) fn conditional_mean_decoder(params: &SystemParams, u_grid: &Arc<SourceGrid>) -> DecoderTable {
    let col: Vec<f64> = u_grid
        .nodes
        .iter()
        .map(|&u| params.r * params.sigma_v * u / params.sigma_u)
        .collect();
    DecoderTable::new(u_grid.clone(), col.clone(), col)
        .expect("conditional-mean table is always valid")
}

/// Precomputed per-node densities and conditional kernels for a fixed
/// (params, v-grid, u-grid) triple. These do not depend on the mapping, so
/// optimizer loops build them once and reuse them every iteration.
pub(crate) struct Tables {
    /// p_V(v_i), marginal density at v nodes.
    pub v_pdf: Vec<f64>,
    /// p_U(u_j), marginal density at u nodes.
    pub u_pdf: Vec<f64>,
    /// Row-major [j][i]: conditional density p(v_i | u_j) (density in v).
    pub cond_v_given_u: Vec<f64>,
    /// Row-major [i][j]: conditional density p(u_j | v_i) (density in u).
    pub cond_u_given_v: Vec<f64>,
    /// Per u-node quadrature mass of p(. | u_j) over the v-grid (close to 1;
    /// the "whole axis" reference for complement-set integrals).
    pub v_mass_given_u: Vec<f64>,
    pub n_v: usize,
    pub n_u: usize,
}

impl Tables {
    /// Requires |r| < 1; callers special-case the degenerate correlations.
    pub fn new(params: &SystemParams, v_grid: &SourceGrid, u_grid: &SourceGrid) -> Self {
        use rayon::prelude::*;
        let (sv, su, r) = (params.sigma_v, params.sigma_u, params.r);
        debug_assert!(r.abs() < 1.0);
        let n_v = v_grid.len();
        let n_u = u_grid.len();
        let v_pdf = v_grid.pdf();
        let u_pdf = u_grid.pdf();

        let mut cond_v_given_u = vec![0.0; n_v * n_u];
        cond_v_given_u
            .par_chunks_mut(n_v)
            .zip(u_grid.nodes.par_iter())
            .for_each(|(row, &u)| {
                let us = u / su;
                for (cell, &v) in row.iter_mut().zip(&v_grid.nodes) {
                    *cell = specfun::cond_pdf_raw(v / sv, us, r) / sv;
                }
            });

        let mut cond_u_given_v = vec![0.0; n_v * n_u];
        cond_u_given_v
            .par_chunks_mut(n_u)
            .zip(v_grid.nodes.par_iter())
            .for_each(|(row, &v)| {
                let vs = v / sv;
                for (cell, &u) in row.iter_mut().zip(&u_grid.nodes) {
                    *cell = specfun::cond_pdf_raw(u / su, vs, r) / su;
                }
            });

        let v_mass_given_u: Vec<f64> = cond_v_given_u
            .par_chunks(n_v)
            .map(|row| {
                row.iter()
                    .zip(&v_grid.weights)
                    .map(|(&p, &w)| w * p)
                    .sum()
            })
            .collect();

        Tables {
            v_pdf,
            u_pdf,
            cond_v_given_u,
            cond_u_given_v,
            v_mass_given_u,
            n_v,
            n_u,
        }
    }

    /// Conditional density row p(. | u_j) over v nodes.
    #[inline]
    pub fn v_row(&self, j: usize) -> &[f64] {
        &self.cond_v_given_u[j * self.n_v..(j + 1) * self.n_v]
    }

    /// Conditional density row p(. | v_i) over u nodes.
    #[inline]
    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.cond_u_given_v[i * self.n_u..(i + 1) * self.n_u]
    }
}
