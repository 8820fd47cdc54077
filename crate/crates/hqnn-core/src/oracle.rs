//! Brute-force dense-matrix reference path.
//!
//! Builds full `2^Q x 2^Q` gate unitaries by Kronecker products (controlled
//! gates via projector decomposition), multiplies them into a circuit matrix,
//! and measures observables as dense quadratic forms. Deliberately shares no
//! kernels with the `sim` module: the test suites cross-check the fast
//! simulator against this path.

use num_complex::Complex64;

use crate::ansatz::CompiledCircuit;
use crate::error::{Error, Result};
use crate::sim::{GateKind, GateOp, PauliAxis, FEATURE_DIM, READOUT_QUBITS};

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        DenseMatrix { dim, data }
    }

    pub fn from_blocks(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        DenseMatrix { dim, data }
    }

    pub fn get(&self, r: usize, col: usize) -> C64 {
        self.data[r * self.dim + col]
    }

    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let dim = self.dim * other.dim;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for ra in 0..self.dim {
            for ca in 0..self.dim {
                let a = self.get(ra, ca);
                for rb in 0..other.dim {
                    for cb in 0..other.dim {
                        data[(ra * other.dim + rb) * dim + (ca * other.dim + cb)] =
                            a * other.get(rb, cb);
                    }
                }
            }
        }
        DenseMatrix { dim, data }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for k in 0..dim {
                let a = self.get(r, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for col in 0..dim {
                    data[r * dim + col] += a * other.get(k, col);
                }
            }
        }
        DenseMatrix { dim, data }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix {
            dim: self.dim,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|k| self.get(r, k) * v[k]).sum())
            .collect()
    }
}

fn pauli_x() -> DenseMatrix {
    DenseMatrix::from_blocks(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

fn pauli_y() -> DenseMatrix {
    DenseMatrix::from_blocks(2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

fn pauli_z() -> DenseMatrix {
    DenseMatrix::from_blocks(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

fn hadamard() -> DenseMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DenseMatrix::from_blocks(2, vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
}

/// Rotation from its generator: `exp(-i θ P / 2) = cos(θ/2) I - i sin(θ/2) P`.
fn rotation(pauli: &DenseMatrix, theta: f64) -> DenseMatrix {
    let half = theta / 2.0;
    let mut out = DenseMatrix::identity(2);
    for i in 0..4 {
        out.data[i] = out.data[i] * c(half.cos(), 0.0) + pauli.data[i] * c(0.0, -half.sin());
    }
    out
}

fn projector(bit: usize) -> DenseMatrix {
    let mut m = DenseMatrix::from_blocks(2, vec![c(0.0, 0.0); 4]);
    m.data[bit * 2 + bit] = c(1.0, 0.0);
    m
}

/// Kronecker chain with the given 2x2 factors at the named qubits and
/// identities elsewhere. Qubit 0 is the least significant index bit, so the
/// chain runs from qubit Q-1 down to qubit 0.
pub fn embed(factors: &[(usize, DenseMatrix)], num_qubits: usize) -> DenseMatrix {
    let mut out = DenseMatrix::identity(1);
    for q in (0..num_qubits).rev() {
        let factor = factors
            .iter()
            .find(|(fq, _)| *fq == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| DenseMatrix::identity(2));
        out = out.kron(&factor);
    }
    out
}

/// Full unitary of one gate on a `num_qubits` register.
pub fn gate_unitary(gate: &GateOp, angle: Option<f64>, num_qubits: usize) -> Result<DenseMatrix> {
    gate.validate(num_qubits)?;
    let theta = match (gate.kind.is_parameterized(), angle) {
        (true, Some(t)) => t,
        (true, None) => {
            return Err(Error::Contract(format!(
                "gate {} requires an angle",
                gate.kind.label()
            )))
        }
        (false, Some(_)) => {
            return Err(Error::Contract(format!(
                "gate {} takes no angle",
                gate.kind.label()
            )))
        }
        (false, None) => 0.0,
    };
    let target_block = match gate.kind {
        GateKind::Rx | GateKind::Crx => rotation(&pauli_x(), theta),
        GateKind::Ry => rotation(&pauli_y(), theta),
        GateKind::Rz | GateKind::Crz => rotation(&pauli_z(), theta),
        GateKind::H => hadamard(),
        GateKind::Cx => pauli_x(),
        GateKind::Cz => pauli_z(),
    };
    match gate.control {
        None => Ok(embed(&[(gate.target, target_block)], num_qubits)),
        Some(ctrl) => {
            // |0><0|_c ⊗ I + |1><1|_c ⊗ U_t
            let rest = embed(&[(ctrl, projector(0))], num_qubits);
            let act = embed(&[(ctrl, projector(1)), (gate.target, target_block)], num_qubits);
            Ok(rest.add(&act))
        }
    }
}

/// Full circuit unitary: encoding layer then variational gates, multiplied in
/// execution order (later gates on the left).
pub fn circuit_unitary(
    circuit: &CompiledCircuit,
    inputs: &[f64],
    params: &[f64],
) -> Result<DenseMatrix> {
    if inputs.len() != READOUT_QUBITS {
        return Err(Error::Contract(format!(
            "expected {READOUT_QUBITS} input angles, got {}",
            inputs.len()
        )));
    }
    if params.len() != circuit.num_params() {
        return Err(Error::Contract(format!(
            "expected {} parameters, got {}",
            circuit.num_params(),
            params.len()
        )));
    }
    let n = circuit.num_qubits();
    let mut total = DenseMatrix::identity(1 << n);
    for (q, gate) in circuit.encoding_gates().iter().enumerate() {
        total = gate_unitary(gate, Some(inputs[q]), n)?.matmul(&total);
    }
    for gate in circuit.variational_gates() {
        let angle = gate.param_slot.map(|s| params[s]);
        total = gate_unitary(gate, angle, n)?.matmul(&total);
    }
    Ok(total)
}

/// Expectation `<psi| P_qubit |psi>` via the dense embedded observable.
pub fn pauli_expectation(psi: &[C64], axis: PauliAxis, qubit: usize, num_qubits: usize) -> f64 {
    let block = match axis {
        PauliAxis::X => pauli_x(),
        PauliAxis::Y => pauli_y(),
        PauliAxis::Z => pauli_z(),
    };
    let observable = embed(&[(qubit, block)], num_qubits);
    let applied = observable.mul_vec(psi);
    psi.iter()
        .zip(&applied)
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// Reference feature vector: full unitary applied to |0000>, expectations
/// measured densely.
pub fn reference_features(
    circuit: &CompiledCircuit,
    inputs: &[f64],
    params: &[f64],
) -> Result<[f64; FEATURE_DIM]> {
    let n = circuit.num_qubits();
    let unitary = circuit_unitary(circuit, inputs, params)?;
    let mut zero = vec![c(0.0, 0.0); 1 << n];
    zero[0] = c(1.0, 0.0);
    let psi = unitary.mul_vec(&zero);
    let mut out = [0.0; FEATURE_DIM];
    for q in 0..READOUT_QUBITS {
        out[q] = pauli_expectation(&psi, PauliAxis::Z, q, n);
        out[READOUT_QUBITS + q] = pauli_expectation(&psi, PauliAxis::X, q, n);
        out[2 * READOUT_QUBITS + q] = pauli_expectation(&psi, PauliAxis::Y, q, n);
    }
    Ok(out)
}
