//! Forward evaluation of compiled circuits and analytic gradients of the
//! 12-feature readout via the parameter-shift rule.
//!
//! RX/RY/RZ angles (including the encoding layer) use the two-term rule
//! `d<O>/dθ = [<O>(θ+π/2) - <O>(θ-π/2)] / 2`. CRX/CRZ generators have
//! half-angle eigenvalues {0, ±1/2}, so their expectations mix frequencies
//! 1/2 and 1; the four-term rule with shifts ±π/2, ±3π/2 and coefficients
//! (√2±1)/(4√2) is exact for them.

use crate::ansatz::CompiledCircuit;
use crate::error::{Error, Result};
use crate::sim::{QuantumState, FEATURE_DIM, READOUT_QUBITS};

/// Names one differentiable angle of a circuit: an encoding input or a
/// trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichAngle {
    Input(usize),
    Param(usize),
}

/// Features plus jacobians with respect to every angle.
///
/// `input_jacobian[k]` and `param_jacobian[j]` hold the 12 feature derivatives
/// with respect to encoding angle `k` / trainable parameter `j` (columns of
/// the 12x4 and 12xP jacobians).
#[derive(Debug, Clone)]
pub struct CircuitEvaluation {
    pub features: [f64; FEATURE_DIM],
    pub input_jacobian: [[f64; FEATURE_DIM]; READOUT_QUBITS],
    pub param_jacobian: Vec<[f64; FEATURE_DIM]>,
}

/// Anything that can turn (circuit, input angles, parameters) into the
/// 12-feature readout. The exact statevector path and the depolarizing
/// density-matrix path both implement this.
pub trait CircuitEvaluator: Sync {
    fn features(
        &self,
        circuit: &CompiledCircuit,
        inputs: &[f64; READOUT_QUBITS],
        params: &[f64],
    ) -> Result<[f64; FEATURE_DIM]>;
}

/// Exact statevector evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Statevector;

impl CircuitEvaluator for Statevector {
    fn features(
        &self,
        circuit: &CompiledCircuit,
        inputs: &[f64; READOUT_QUBITS],
        params: &[f64],
    ) -> Result<[f64; FEATURE_DIM]> {
        run_circuit(circuit, inputs, params)?.feature_vector()
    }
}

/// Execute a compiled circuit on |0000> and return the final statevector.
pub fn run_circuit(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
) -> Result<QuantumState> {
    check_params(circuit, params)?;
    let mut state = QuantumState::zero(circuit.num_qubits())?;
    for (q, gate) in circuit.encoding_gates().iter().enumerate() {
        state.apply_unchecked(gate, inputs[q]);
    }
    for gate in circuit.variational_gates() {
        let theta = gate.param_slot.map_or(0.0, |s| params[s]);
        state.apply_unchecked(gate, theta);
    }
    Ok(state)
}

fn check_params(circuit: &CompiledCircuit, params: &[f64]) -> Result<()> {
    if params.len() != circuit.num_params() {
        return Err(Error::Contract(format!(
            "expected {} trainable parameters, got {}",
            circuit.num_params(),
            params.len()
        )));
    }
    Ok(())
}

/// Exact statevector forward pass.
pub fn forward(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
) -> Result<[f64; FEATURE_DIM]> {
    Statevector.features(circuit, inputs, params)
}

/// Whether the named angle belongs to a plain rotation (two-term rule) or a
/// controlled rotation (four-term rule).
fn uses_two_term_rule(circuit: &CompiledCircuit, which: WhichAngle) -> Result<bool> {
    match which {
        WhichAngle::Input(k) => {
            if k >= READOUT_QUBITS {
                return Err(Error::Contract(format!("input angle index {k} out of range")));
            }
            Ok(true)
        }
        WhichAngle::Param(j) => {
            let gate = circuit
                .variational_gates()
                .iter()
                .find(|g| g.param_slot == Some(j))
                .ok_or_else(|| {
                    Error::Contract(format!("parameter index {j} out of range"))
                })?;
            Ok(!gate.kind.is_controlled())
        }
    }
}

fn eval_shifted<E: CircuitEvaluator + ?Sized>(
    eval: &E,
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    which: WhichAngle,
    delta: f64,
) -> Result<[f64; FEATURE_DIM]> {
    match which {
        WhichAngle::Input(k) => {
            let mut shifted = *inputs;
            shifted[k] += delta;
            eval.features(circuit, &shifted, params)
        }
        WhichAngle::Param(j) => {
            let mut shifted = params.to_vec();
            shifted[j] += delta;
            eval.features(circuit, inputs, &shifted)
        }
    }
}

/// Parameter-shift gradient of all 12 features with respect to one angle,
/// under an arbitrary evaluator.
pub fn shift_gradient_with<E: CircuitEvaluator + ?Sized>(
    eval: &E,
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    which: WhichAngle,
) -> Result<[f64; FEATURE_DIM]> {
    check_params(circuit, params)?;
    let two_term = uses_two_term_rule(circuit, which)?;
    let mut grad = [0.0; FEATURE_DIM];
    if two_term {
        let s = std::f64::consts::FRAC_PI_2;
        let plus = eval_shifted(eval, circuit, inputs, params, which, s)?;
        let minus = eval_shifted(eval, circuit, inputs, params, which, -s)?;
        for i in 0..FEATURE_DIM {
            grad[i] = 0.5 * (plus[i] - minus[i]);
        }
    } else {
        let sqrt2 = std::f64::consts::SQRT_2;
        let c_plus = (sqrt2 + 1.0) / (4.0 * sqrt2);
        let c_minus = (sqrt2 - 1.0) / (4.0 * sqrt2);
        let s1 = std::f64::consts::FRAC_PI_2;
        let s2 = 3.0 * std::f64::consts::FRAC_PI_2;
        let p1 = eval_shifted(eval, circuit, inputs, params, which, s1)?;
        let m1 = eval_shifted(eval, circuit, inputs, params, which, -s1)?;
        let p2 = eval_shifted(eval, circuit, inputs, params, which, s2)?;
        let m2 = eval_shifted(eval, circuit, inputs, params, which, -s2)?;
        for i in 0..FEATURE_DIM {
            grad[i] = c_plus * (p1[i] - m1[i]) - c_minus * (p2[i] - m2[i]);
        }
    }
    Ok(grad)
}

/// Parameter-shift gradient on the exact statevector path.
pub fn shift_gradient(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    which: WhichAngle,
) -> Result<[f64; FEATURE_DIM]> {
    shift_gradient_with(&Statevector, circuit, inputs, params, which)
}

/// Features plus full input and parameter jacobians under an arbitrary
/// evaluator.
pub fn full_jacobians_with<E: CircuitEvaluator + ?Sized>(
    eval: &E,
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
) -> Result<CircuitEvaluation> {
    let features = eval.features(circuit, inputs, params)?;
    let mut input_jacobian = [[0.0; FEATURE_DIM]; READOUT_QUBITS];
    for (k, column) in input_jacobian.iter_mut().enumerate() {
        *column = shift_gradient_with(eval, circuit, inputs, params, WhichAngle::Input(k))?;
    }
    let param_jacobian = (0..circuit.num_params())
        .map(|j| shift_gradient_with(eval, circuit, inputs, params, WhichAngle::Param(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CircuitEvaluation {
        features,
        input_jacobian,
        param_jacobian,
    })
}

/// Full jacobians on the exact statevector path.
pub fn full_jacobians(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
) -> Result<CircuitEvaluation> {
    full_jacobians_with(&Statevector, circuit, inputs, params)
}

/// Central finite difference `(f(θ+h) - f(θ-h)) / 2h` per feature, under an
/// arbitrary evaluator. Test oracle for the shift rules.
pub fn finite_difference_with<E: CircuitEvaluator + ?Sized>(
    eval: &E,
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    which: WhichAngle,
    h: f64,
) -> Result<[f64; FEATURE_DIM]> {
    if h <= 0.0 {
        return Err(Error::Contract(format!("step size {h} must be positive")));
    }
    check_params(circuit, params)?;
    uses_two_term_rule(circuit, which)?;
    let plus = eval_shifted(eval, circuit, inputs, params, which, h)?;
    let minus = eval_shifted(eval, circuit, inputs, params, which, -h)?;
    let mut grad = [0.0; FEATURE_DIM];
    for i in 0..FEATURE_DIM {
        grad[i] = (plus[i] - minus[i]) / (2.0 * h);
    }
    Ok(grad)
}

/// Finite-difference oracle on the exact statevector path.
pub fn finite_difference_oracle(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    which: WhichAngle,
    h: f64,
) -> Result<[f64; FEATURE_DIM]> {
    finite_difference_with(&Statevector, circuit, inputs, params, which, h)
}

/// Gradient comparison `analytic` vs `reference` with a relative tolerance,
/// falling back to an absolute tolerance for near-zero entries.
pub fn gradients_close(
    analytic: &[f64; FEATURE_DIM],
    reference: &[f64; FEATURE_DIM],
    rel_tol: f64,
    abs_tol: f64,
    small: f64,
) -> bool {
    analytic.iter().zip(reference).all(|(a, r)| {
        if r.abs() < small {
            (a - r).abs() < abs_tol
        } else {
            ((a - r) / r).abs() < rel_tol
        }
    })
}
