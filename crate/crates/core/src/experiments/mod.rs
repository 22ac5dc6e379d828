//! End-to-end experiment pipelines shared by the CLI and the acceptance
//! tests.

pub mod inverse;
pub mod lyapunov;
pub mod oscillator;
pub mod robust;
pub mod swissroll;
pub mod verify;
