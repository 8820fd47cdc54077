use num_complex::Complex64;

use super::gate::{matrix_1q, GateKind, GateOp};
use super::{FEATURE_DIM, MAX_QUBITS, READOUT_QUBITS};
use crate::error::{Error, Result};

/// Measurement axis for single-qubit Pauli expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Pure state of a small qubit register: `2^Q` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// The all-zeros computational basis state |0...0>.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::Config(format!(
                "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { num_qubits, amps })
    }

    /// Build a state from raw amplitudes (power-of-two length, unit norm).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || !(2..=(1 << MAX_QUBITS)).contains(&len) {
            return Err(Error::Contract(format!(
                "amplitude vector length {len} is not a supported power of two"
            )));
        }
        let state = QuantumState {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!(
                "amplitude vector norm {norm} deviates from 1"
            )));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Sum of |amplitude|^2.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Apply one gate. `angle` must be present exactly when the gate kind is
    /// parameterized.
    pub fn apply(&mut self, gate: &GateOp, angle: Option<f64>) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let theta = resolve_angle(gate, angle)?;
        self.apply_unchecked(gate, theta);
        Ok(())
    }

    /// Kernel dispatch without contract checks; callers guarantee validity.
    /// `theta` is ignored by fixed gates.
    pub(crate) fn apply_unchecked(&mut self, gate: &GateOp, theta: f64) {
        match gate.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::H => {
                let m = matrix_1q(gate.kind, theta);
                self.kernel_1q(&m, gate.target);
            }
            GateKind::Cx => self.kernel_cx(gate.control.unwrap(), gate.target),
            GateKind::Cz => self.kernel_cz(gate.control.unwrap(), gate.target),
            GateKind::Crz => self.kernel_crz(gate.control.unwrap(), gate.target, theta),
            GateKind::Crx => {
                let m = matrix_1q(GateKind::Rx, theta);
                self.kernel_controlled_1q(&m, gate.control.unwrap(), gate.target);
            }
        }
    }

    fn kernel_1q(&mut self, m: &[[Complex64; 2]; 2], target: usize) {
        let mask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn kernel_controlled_1q(&mut self, m: &[[Complex64; 2]; 2], control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                let j = i | tm;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn kernel_cx(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    fn kernel_cz(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm != 0 {
                self.amps[i] = -self.amps[i];
            }
        }
    }

    fn kernel_crz(&mut self, control: usize, target: usize, theta: f64) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        let half = theta / 2.0;
        let (sin, cos) = half.sin_cos();
        let phase0 = Complex64::new(cos, -sin);
        let phase1 = Complex64::new(cos, sin);
        for i in 0..self.amps.len() {
            if i & cm != 0 {
                self.amps[i] *= if i & tm == 0 { phase0 } else { phase1 };
            }
        }
    }

    /// Exact single-qubit Pauli expectation.
    pub fn expectation(&self, axis: PauliAxis, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Config(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let mask = 1usize << qubit;
        let value = match axis {
            PauliAxis::Z => self
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sign = if i & mask == 0 { 1.0 } else { -1.0 };
                    sign * a.norm_sqr()
                })
                .sum(),
            PauliAxis::X => {
                let mut acc = 0.0;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        acc += 2.0 * (self.amps[i].conj() * self.amps[i | mask]).re;
                    }
                }
                acc
            }
            PauliAxis::Y => {
                let mut acc = 0.0;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        acc += 2.0 * (self.amps[i].conj() * self.amps[i | mask]).im;
                    }
                }
                acc
            }
        };
        Ok(value)
    }

    /// Three-axis readout `[<Z0>..<Z3>, <X0>..<X3>, <Y0>..<Y3>]`.
    pub fn feature_vector(&self) -> Result<[f64; FEATURE_DIM]> {
        if self.num_qubits != READOUT_QUBITS {
            return Err(Error::Contract(format!(
                "feature vector requires {READOUT_QUBITS} qubits, state has {}",
                self.num_qubits
            )));
        }
        let mut out = [0.0; FEATURE_DIM];
        for q in 0..READOUT_QUBITS {
            out[q] = self.expectation(PauliAxis::Z, q)?;
            out[READOUT_QUBITS + q] = self.expectation(PauliAxis::X, q)?;
            out[2 * READOUT_QUBITS + q] = self.expectation(PauliAxis::Y, q)?;
        }
        Ok(out)
    }

    /// Squared overlap |<self|other>|^2.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::Contract(format!(
                "fidelity between {}-qubit and {}-qubit states",
                self.num_qubits, other.num_qubits
            )));
        }
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr())
    }
}

fn resolve_angle(gate: &GateOp, angle: Option<f64>) -> Result<f64> {
    match (gate.kind.is_parameterized(), angle) {
        (true, Some(theta)) => Ok(theta),
        (true, None) => Err(Error::Contract(format!(
            "gate {} requires an angle",
            gate.kind.label()
        ))),
        (false, Some(_)) => Err(Error::Contract(format!(
            "gate {} takes no angle",
            gate.kind.label()
        ))),
        (false, None) => Ok(0.0),
    }
}
