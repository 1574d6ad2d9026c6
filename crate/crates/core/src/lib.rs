//! Memory diagnostics for heavy-tailed stationary processes: symmetric
//! α-stable moving averages and α-Fréchet max-stable processes.

pub mod error;
pub mod inference;
pub mod kernels;
pub mod maxstable;
pub mod memory;
pub mod quad;
pub mod rng;
pub mod stable;

pub use error::{Error, Result};
pub use kernels::{AlphaNorm, Kernel, TabulatedKernel, TailDecay, TailModel};
pub use stable::{sample_sas, simulate_linear_sas, SamplePath, StableParams};
