//! Exact simulation of small qubit registers.
//!
//! Statevector evolution with per-kind gate kernels, three-axis Pauli
//! expectations, and density-matrix evolution with depolarizing channels.
//! Qubit `i` maps to bit `i` of the basis index (qubit 0 is the least
//! significant bit), so `|q3 q2 q1 q0> = |b>` with `b = q0 + 2 q1 + 4 q2 + 8 q3`.

mod density;
mod gate;
mod state;

pub use density::DensityMatrix;
pub use gate::{GateKind, GateOp};
pub use state::{PauliAxis, QuantumState};

/// Hard cap on register size: dense density matrices stay feasible up to here.
pub const MAX_QUBITS: usize = 12;

/// Number of qubits used by the circuit family and readout.
pub const READOUT_QUBITS: usize = 4;

/// Length of the three-axis readout vector (Z, X, Y over four qubits).
pub const FEATURE_DIM: usize = 12;
