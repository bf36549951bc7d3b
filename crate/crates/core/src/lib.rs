//! Design and evaluation of zero-delay transmission schemes for a single
//! Gaussian sample sent over an AWGN channel and received through a one-bit
//! ADC, with correlated Gaussian side information at the decoder.
//!
//! The encoder is a mapping f(v) applied to the source sample, subject to an
//! average power constraint E[f(V)^2] <= P; the receiver sees only the sign
//! of f(V) + W plus the side information U and reconstructs V. Two design
//! criteria are supported: mean squared error and distortion outage
//! probability P[(V - Vhat)^2 >= D].
//!
//! Module map:
//! * [`model`] — parameters, quadrature grids, mapping/decoder tables;
//! * [`specfun`] — Gaussian tail, entropy, and density helpers;
//! * [`mse`] — MMSE decoder, distortion, and Lagrangian gradient;
//! * [`dop`] — outage-optimal decoder, outage probability, and gradient;
//! * [`baselines`] — sawtooth/two-level reference encoders and lower bounds;
//! * [`optimizer`] — gradient descent, multi-start, and power search;
//! * [`montecarlo`] — simulation oracle for both criteria;
//! * [`io`] — CSV import/export of mappings, decoders, and summaries.

pub mod baselines;
pub mod dop;
pub mod error;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod mse;
pub mod optimizer;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{
    average_power, make_grid, quantize, Criterion, DecoderTable, EncoderMapping, SourceGrid,
    SystemParams,
};
