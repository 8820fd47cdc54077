//! Gate-level depolarizing noise evaluation and the noise-sweep harness.
//!
//! The noisy path evolves a density matrix and applies a uniform depolarizing
//! channel after every gate: probability `p1` on the touched qubit after each
//! single-qubit gate (the four encoding rotations included) and `p2` on the
//! touched pair after each two-qubit gate. Parameter-shift gradients stay
//! exact under this channel-after-gate model, so retraining reuses the
//! ordinary trainer with the noisy evaluator plugged in.

use serde::{Deserialize, Serialize};

use crate::ansatz::CompiledCircuit;
use crate::data::{DeviceRecord, SplitAssignment, Standardizer, NUM_TARGETS, TARGET_NAMES};
use crate::error::{Error, Result};
use crate::grad::CircuitEvaluator;
use crate::model::{evaluate, train, HybridModel, TrainConfig};
use crate::sim::{DensityMatrix, FEATURE_DIM, READOUT_QUBITS};

/// Density-matrix circuit evaluation with depolarizing noise after each gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizingEvaluator {
    pub p1: f64,
    pub p2: f64,
}

impl DepolarizingEvaluator {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "depolarizing probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(DepolarizingEvaluator { p1, p2 })
    }
}

impl CircuitEvaluator for DepolarizingEvaluator {
    fn features(
        &self,
        circuit: &CompiledCircuit,
        inputs: &[f64; READOUT_QUBITS],
        params: &[f64],
    ) -> Result<[f64; FEATURE_DIM]> {
        if params.len() != circuit.num_params() {
            return Err(Error::Contract(format!(
                "expected {} trainable parameters, got {}",
                circuit.num_params(),
                params.len()
            )));
        }
        let mut rho = DensityMatrix::zero(circuit.num_qubits())?;
        for (q, gate) in circuit.encoding_gates().iter().enumerate() {
            rho.apply_unchecked(gate, inputs[q]);
            rho.depolarize(&[gate.target], self.p1)?;
        }
        for gate in circuit.variational_gates() {
            let theta = gate.param_slot.map_or(0.0, |s| params[s]);
            rho.apply_unchecked(gate, theta);
            match gate.control {
                Some(c) => rho.depolarize(&[c, gate.target], self.p2)?,
                None => rho.depolarize(&[gate.target], self.p1)?,
            }
        }
        rho.feature_vector()
    }
}

/// The 12-feature readout under gate-level depolarizing noise.
pub fn noisy_forward(
    circuit: &CompiledCircuit,
    inputs: &[f64; READOUT_QUBITS],
    params: &[f64],
    p1: f64,
    p2: f64,
) -> Result<[f64; FEATURE_DIM]> {
    DepolarizingEvaluator::new(p1, p2)?.features(circuit, inputs, params)
}

/// R² scores of one (p1, p2) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGridPoint {
    pub p1: f64,
    pub p2: f64,
    pub per_target_r2: [f64; NUM_TARGETS],
    pub overall_r2: f64,
}

/// The default grid: a clean row, a mild symmetric row, and two rows with
/// increasing single-qubit noise at fixed two-qubit noise.
pub fn default_noise_grid() -> Vec<(f64, f64)> {
    vec![(0.0, 0.0), (0.005, 0.005), (0.010, 0.005), (0.050, 0.005)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Evaluate the given trained model under each noise setting.
    Evaluate,
    /// Retrain from the same initialization under each noise setting, then
    /// evaluate at that setting.
    Retrain,
}

/// Run the grid. In retrain mode the model passed in provides the
/// initialization; each grid point trains its own copy with the same config.
#[allow(clippy::too_many_arguments)]
pub fn noise_sweep(
    model: &HybridModel,
    records: &[DeviceRecord],
    assignment: &SplitAssignment,
    standardizer: &Standardizer,
    train_iqr: &[f64; NUM_TARGETS],
    grid: &[(f64, f64)],
    mode: NoiseMode,
    train_config: &TrainConfig,
) -> Result<Vec<NoiseGridPoint>> {
    let mut points = Vec::with_capacity(grid.len());
    for &(p1, p2) in grid {
        let evaluator = DepolarizingEvaluator::new(p1, p2)?;
        let report = match mode {
            NoiseMode::Evaluate => evaluate(
                model,
                records,
                &assignment.test,
                standardizer,
                train_iqr,
                &evaluator,
            )?,
            NoiseMode::Retrain => {
                let mut candidate = model.clone();
                train(
                    &mut candidate,
                    records,
                    assignment,
                    standardizer,
                    train_config,
                    &evaluator,
                )?;
                evaluate(
                    &candidate,
                    records,
                    &assignment.test,
                    standardizer,
                    train_iqr,
                    &evaluator,
                )?
            }
        };
        points.push(NoiseGridPoint {
            p1,
            p2,
            per_target_r2: report.r2,
            overall_r2: report.overall_r2,
        });
    }
    Ok(points)
}

/// Per-target R² difference `noisy - baseline`.
pub fn delta_r2(baseline: &NoiseGridPoint, noisy: &NoiseGridPoint) -> [f64; NUM_TARGETS] {
    let mut out = [0.0; NUM_TARGETS];
    for t in 0..NUM_TARGETS {
        out[t] = noisy.per_target_r2[t] - baseline.per_target_r2[t];
    }
    out
}

/// Grid results as CSV: p1, p2, overall, then the six targets.
pub fn render_grid_csv(points: &[NoiseGridPoint]) -> String {
    let mut out = String::from("p1,p2,overall_r2");
    for name in TARGET_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}", p.p1, p.p2, p.overall_r2));
        for t in 0..NUM_TARGETS {
            out.push_str(&format!(",{}", p.per_target_r2[t]));
        }
        out.push('\n');
    }
    out
}

/// ΔR² relative to the first grid point, one row per remaining point.
pub fn render_delta_csv(points: &[NoiseGridPoint]) -> Result<String> {
    let baseline = points
        .first()
        .ok_or_else(|| Error::Usage("delta report needs at least one grid point".into()))?;
    let mut out = String::from("p1,p2,overall_delta_r2");
    for name in TARGET_NAMES {
        out.push(',');
        out.push_str(&format!("delta_{name}"));
    }
    out.push('\n');
    for p in points {
        let delta = delta_r2(baseline, p);
        out.push_str(&format!(
            "{},{},{}",
            p.p1,
            p.p2,
            p.overall_r2 - baseline.overall_r2
        ));
        for d in delta {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
    }
    Ok(out)
}
