pub mod conv;
mod cost;
mod drift;
mod future;
pub mod kernel;
mod operators;

pub use cost::{cost, cost_breakdown, shift_signal, CostBreakdown, CostValue};
pub use drift::{
    drift_b_to_w, drift_b_to_w_exact, drift_w_to_b, reference_constants, DriftSignal, TransferMode,
};
pub(crate) use future::GL8;
pub use future::{alpha_norm, future_kernel_g2, AlphaExponent, FutureInfluence, FutureKernel};
pub use kernel::{kernel, FracKernel};
pub use operators::{apply_dh, apply_dh_inverse, bump, constants, OperatorConstants};
