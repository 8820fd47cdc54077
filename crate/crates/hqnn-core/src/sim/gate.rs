use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gate inventory used by the circuit templates.
///
/// Rotations follow the half-angle convention `RX(θ) = exp(-iθX/2)` (same for
/// RY/RZ); controlled rotations apply the rotation on the target conditioned
/// on the control being |1>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cx,
    Cz,
    Crx,
    Crz,
}

impl GateKind {
    /// True for gates that carry a rotation angle.
    pub fn is_parameterized(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crx | GateKind::Crz
        )
    }

    /// True for two-qubit (controlled) gates.
    pub fn is_controlled(self) -> bool {
        matches!(
            self,
            GateKind::Cx | GateKind::Cz | GateKind::Crx | GateKind::Crz
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cx => "CX",
            GateKind::Cz => "CZ",
            GateKind::Crx => "CRX",
            GateKind::Crz => "CRZ",
        }
    }
}

/// One gate in a circuit's execution-ordered list.
///
/// `param_slot` indexes into the trainable-parameter vector; it is `None` on
/// fixed gates and on parameterized gates that have not been through circuit
/// compilation yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub param_slot: Option<usize>,
}

impl GateOp {
    /// Single-qubit gate (RX/RY/RZ/H) on `target`.
    pub fn single(kind: GateKind, target: usize) -> Self {
        debug_assert!(!kind.is_controlled());
        GateOp {
            kind,
            target,
            control: None,
            param_slot: None,
        }
    }

    /// Controlled gate (CX/CZ/CRX/CRZ) with explicit control and target.
    pub fn controlled(kind: GateKind, control: usize, target: usize) -> Self {
        debug_assert!(kind.is_controlled());
        GateOp {
            kind,
            target,
            control: Some(control),
            param_slot: None,
        }
    }

    pub fn with_slot(mut self, slot: usize) -> Self {
        self.param_slot = Some(slot);
        self
    }

    pub fn is_two_qubit(&self) -> bool {
        self.control.is_some()
    }

    /// Check structural invariants against a register of `num_qubits`.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.target >= num_qubits {
            return Err(Error::Config(format!(
                "gate {} target {} out of range for {num_qubits} qubits",
                self.kind.label(),
                self.target
            )));
        }
        match (self.kind.is_controlled(), self.control) {
            (true, None) => {
                return Err(Error::Contract(format!(
                    "gate {} requires a control qubit",
                    self.kind.label()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Contract(format!(
                    "gate {} does not take a control qubit",
                    self.kind.label()
                )))
            }
            (true, Some(c)) => {
                if c >= num_qubits {
                    return Err(Error::Config(format!(
                        "gate {} control {c} out of range for {num_qubits} qubits",
                        self.kind.label()
                    )));
                }
                if c == self.target {
                    return Err(Error::Config(format!(
                        "gate {} control equals target ({c})",
                        self.kind.label()
                    )));
                }
            }
            (false, None) => {}
        }
        Ok(())
    }
}

/// 2x2 matrix of a single-qubit gate.
pub(crate) fn matrix_1q(kind: GateKind, theta: f64) -> [[Complex64; 2]; 2] {
    let half = theta / 2.0;
    let (sin, cos) = half.sin_cos();
    let c = Complex64::new(cos, 0.0);
    match kind {
        GateKind::Rx => {
            let mis = Complex64::new(0.0, -sin);
            [[c, mis], [mis, c]]
        }
        GateKind::Ry => {
            let s = Complex64::new(sin, 0.0);
            [[c, -s], [s, c]]
        }
        GateKind::Rz => [
            [Complex64::new(cos, -sin), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(cos, sin)],
        ],
        GateKind::H => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        _ => unreachable!("matrix_1q called with controlled gate"),
    }
}
