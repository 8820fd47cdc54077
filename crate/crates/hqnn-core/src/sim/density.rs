use num_complex::Complex64;

use super::gate::{matrix_1q, GateKind, GateOp};
use super::state::{PauliAxis, QuantumState};
use super::{FEATURE_DIM, MAX_QUBITS, READOUT_QUBITS};
use crate::error::{Error, Result};

/// Mixed state of a small register: dense `2^Q x 2^Q` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// |0...0><0...0|.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "qubit count {num_qubits} outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let dim = 1usize << num_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        entries[0] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix {
            num_qubits,
            dim,
            entries,
        })
    }

    /// Outer product |psi><psi| of a pure state.
    pub fn from_state(state: &QuantumState) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                entries[r * dim + c] = amps[r] * amps[c].conj();
            }
        }
        DensityMatrix {
            num_qubits: state.num_qubits(),
            dim,
            entries,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// Unitary conjugation `rho -> U rho U†` for one gate.
    pub fn apply(&mut self, gate: &GateOp, angle: Option<f64>) -> Result<()> {
        gate.validate(self.num_qubits)?;
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
        self.apply_unchecked(gate, theta);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &GateOp, theta: f64) {
        match gate.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::H => {
                let m = matrix_1q(gate.kind, theta);
                self.conjugate_1q(&m, None, gate.target);
            }
            GateKind::Crx => {
                let m = matrix_1q(GateKind::Rx, theta);
                self.conjugate_1q(&m, gate.control, gate.target);
            }
            GateKind::Cx => self.conjugate_cx(gate.control.unwrap(), gate.target),
            GateKind::Cz => self.conjugate_diagonal(|i, cm, tm| {
                if i & cm != 0 && i & tm != 0 {
                    Complex64::new(-1.0, 0.0)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            }, gate.control.unwrap(), gate.target),
            GateKind::Crz => {
                let half = theta / 2.0;
                let (sin, cos) = half.sin_cos();
                let phase0 = Complex64::new(cos, -sin);
                let phase1 = Complex64::new(cos, sin);
                self.conjugate_diagonal(move |i, cm, tm| {
                    if i & cm == 0 {
                        Complex64::new(1.0, 0.0)
                    } else if i & tm == 0 {
                        phase0
                    } else {
                        phase1
                    }
                }, gate.control.unwrap(), gate.target)
            }
        }
    }

    /// Left- then right-multiply by a (possibly controlled) 2x2 block.
    fn conjugate_1q(&mut self, m: &[[Complex64; 2]; 2], control: Option<usize>, target: usize) {
        let tm = 1usize << target;
        let cm = control.map(|c| 1usize << c).unwrap_or(0);
        let dim = self.dim;
        // U rho: mix row pairs within each column.
        for r in 0..dim {
            if r & tm == 0 && (cm == 0 || r & cm != 0) {
                let r1 = r | tm;
                for c in 0..dim {
                    let a = self.entries[r * dim + c];
                    let b = self.entries[r1 * dim + c];
                    self.entries[r * dim + c] = m[0][0] * a + m[0][1] * b;
                    self.entries[r1 * dim + c] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
        // (U rho) U†: mix column pairs within each row.
        for c in 0..dim {
            if c & tm == 0 && (cm == 0 || c & cm != 0) {
                let c1 = c | tm;
                for r in 0..dim {
                    let a = self.entries[r * dim + c];
                    let b = self.entries[r * dim + c1];
                    self.entries[r * dim + c] = a * m[0][0].conj() + b * m[0][1].conj();
                    self.entries[r * dim + c1] = a * m[1][0].conj() + b * m[1][1].conj();
                }
            }
        }
    }

    /// CX is a basis permutation: rho[i][j] -> rho[f(i)][f(j)].
    fn conjugate_cx(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        let dim = self.dim;
        let flip = |i: usize| if i & cm != 0 { i ^ tm } else { i };
        let old = self.entries.clone();
        for r in 0..dim {
            for c in 0..dim {
                self.entries[r * dim + c] = old[flip(r) * dim + flip(c)];
            }
        }
    }

    /// Diagonal unitaries: rho[i][j] -> d(i) conj(d(j)) rho[i][j].
    fn conjugate_diagonal<F>(&mut self, phase: F, control: usize, target: usize)
    where
        F: Fn(usize, usize, usize) -> Complex64,
    {
        let cm = 1usize << control;
        let tm = 1usize << target;
        let dim = self.dim;
        let phases: Vec<Complex64> = (0..dim).map(|i| phase(i, cm, tm)).collect();
        for r in 0..dim {
            for c in 0..dim {
                self.entries[r * dim + c] *= phases[r] * phases[c].conj();
            }
        }
    }

    /// Uniform depolarizing channel on one qubit or a qubit pair.
    ///
    /// One qubit: `rho -> (1-p) rho + (p/3) sum_{P in {X,Y,Z}} P rho P`.
    /// Two qubits: `rho -> (1-p) rho + (p/15) sum` over the 15 non-identity
    /// two-qubit Paulis. Both are evaluated in closed form.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!(
                "depolarizing probability {p} outside [0, 1]"
            )));
        }
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(Error::Config(format!(
                    "depolarizing qubit {q} out of range for {} qubits",
                    self.num_qubits
                )));
            }
        }
        match qubits {
            [q] => {
                self.depolarize_1q(*q, p);
                Ok(())
            }
            [a, b] if a != b => {
                self.depolarize_2q(*a, *b, p);
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "depolarizing channel takes 1 or 2 distinct qubits, got {qubits:?}"
            ))),
        }
    }

    fn depolarize_1q(&mut self, qubit: usize, p: f64) {
        // Writing out the Pauli sum elementwise: entries whose row/column
        // bits agree on the qubit average with their bit-flipped partner,
        // entries that differ contract by (1 - 4p/3).
        let m = 1usize << qubit;
        let dim = self.dim;
        let keep = 1.0 - 2.0 * p / 3.0;
        let swap = 2.0 * p / 3.0;
        let damp = 1.0 - 4.0 * p / 3.0;
        let old = self.entries.clone();
        for r in 0..dim {
            for c in 0..dim {
                let idx = r * dim + c;
                if (r & m == 0) == (c & m == 0) {
                    self.entries[idx] = keep * old[idx] + swap * old[(r ^ m) * dim + (c ^ m)];
                } else {
                    self.entries[idx] = damp * old[idx];
                }
            }
        }
    }

    fn depolarize_2q(&mut self, qa: usize, qb: usize, p: f64) {
        // The 15-Pauli sum equals 16 T - id, where T fully depolarizes the
        // pair; so the channel is (1 - 16p/15) rho + (16p/15) T(rho).
        let ma = 1usize << qa;
        let mb = 1usize << qb;
        let dim = self.dim;
        let lambda = 16.0 * p / 15.0;
        let old = self.entries.clone();
        for r in 0..dim {
            for c in 0..dim {
                let idx = r * dim + c;
                let mut v = (1.0 - lambda) * old[idx];
                if (r & ma == c & ma) && (r & mb == c & mb) {
                    let rb = r & !(ma | mb);
                    let cb = c & !(ma | mb);
                    let mut block = Complex64::new(0.0, 0.0);
                    for v2 in 0..4usize {
                        let off = if v2 & 1 != 0 { ma } else { 0 } | if v2 & 2 != 0 { mb } else { 0 };
                        block += old[(rb | off) * dim + (cb | off)];
                    }
                    v += (lambda / 4.0) * block;
                }
                self.entries[idx] = v;
            }
        }
    }

    /// `tr(rho P_qubit)` for a single-qubit Pauli.
    pub fn expectation(&self, axis: PauliAxis, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Config(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let m = 1usize << qubit;
        let dim = self.dim;
        let value = match axis {
            PauliAxis::Z => (0..dim)
                .map(|i| {
                    let sign = if i & m == 0 { 1.0 } else { -1.0 };
                    sign * self.entries[i * dim + i].re
                })
                .sum::<f64>(),
            PauliAxis::X => (0..dim)
                .map(|i| self.entries[i * dim + (i ^ m)].re)
                .sum::<f64>(),
            PauliAxis::Y => (0..dim)
                .map(|i| {
                    let e = self.entries[i * dim + (i ^ m)];
                    // tr(rho Y) picks up ±i on the off-diagonal pair.
                    if i & m == 0 {
                        -e.im
                    } else {
                        e.im
                    }
                })
                .sum::<f64>(),
        };
        Ok(value)
    }

    /// Three-axis readout, same ordering as the pure-state path.
    pub fn feature_vector(&self) -> Result<[f64; FEATURE_DIM]> {
        if self.num_qubits != READOUT_QUBITS {
            return Err(Error::Contract(format!(
                "feature vector requires {READOUT_QUBITS} qubits, density matrix has {}",
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

    /// Check the density-matrix invariants: Hermitian and unit trace within
    /// `tol`, and positive semidefinite up to a -1e-10 eigenvalue floor
    /// (tested via Cholesky of `rho + floor * I`).
    pub fn validate(&self, tol: f64) -> Result<()> {
        let dim = self.dim;
        for r in 0..dim {
            for c in 0..=r {
                let d = self.entry(r, c) - self.entry(c, r).conj();
                if d.norm() > tol {
                    return Err(Error::Contract(format!(
                        "density matrix not Hermitian at ({r},{c}): deviation {}",
                        d.norm()
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Contract(format!(
                "density matrix trace {tr} deviates from 1"
            )));
        }
        const EIGENVALUE_FLOOR: f64 = 1e-10;
        if !self.is_psd_within(EIGENVALUE_FLOOR) {
            return Err(Error::Contract(
                "density matrix has an eigenvalue below -1e-10".to_string(),
            ));
        }
        Ok(())
    }

    /// Cholesky factorization of `rho + shift * I` succeeds iff all
    /// eigenvalues are >= -shift.
    fn is_psd_within(&self, shift: f64) -> bool {
        let dim = self.dim;
        let mut a: Vec<Complex64> = self.entries.clone();
        for i in 0..dim {
            a[i * dim + i] += Complex64::new(shift, 0.0);
        }
        let mut l = vec![Complex64::new(0.0, 0.0); dim * dim];
        for j in 0..dim {
            let mut d = a[j * dim + j].re;
            for k in 0..j {
                d -= l[j * dim + k].norm_sqr();
            }
            if d < -1e-14 {
                return false;
            }
            let d = d.max(0.0).sqrt();
            l[j * dim + j] = Complex64::new(d, 0.0);
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k].conj();
                }
                l[i * dim + j] = if d > 1e-150 {
                    s / d
                } else {
                    // Zero pivot: the column must be (numerically) zero too.
                    if s.norm() > 1e-7 {
                        return false;
                    }
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_state_outer_product_validates() {
        let mut s = QuantumState::zero(4).unwrap();
        s.apply(&GateOp::single(GateKind::H, 1), None).unwrap();
        s.apply(&GateOp::controlled(GateKind::Cx, 1, 2), None)
            .unwrap();
        let rho = DensityMatrix::from_state(&s);
        rho.validate(1e-12).unwrap();
    }

    #[test]
    fn rx_pi_flips_z_on_density_path() {
        let mut rho = DensityMatrix::zero(4).unwrap();
        rho.apply(&GateOp::single(GateKind::Rx, 0), Some(PI))
            .unwrap();
        assert!((rho.expectation(PauliAxis::Z, 0).unwrap() + 1.0).abs() < 1e-12);
        rho.validate(1e-12).unwrap();
    }

    #[test]
    fn identity_rotation_is_identity() {
        let mut s = QuantumState::zero(4).unwrap();
        s.apply(&GateOp::single(GateKind::H, 0), None).unwrap();
        s.apply(&GateOp::controlled(GateKind::Crz, 0, 3), Some(0.7))
            .unwrap();
        let mut rho = DensityMatrix::from_state(&s);
        let before = rho.clone();
        rho.apply(&GateOp::single(GateKind::Ry, 2), Some(0.0))
            .unwrap();
        for (a, b) in rho.entries.iter().zip(&before.entries) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn depolarize_p_zero_is_identity() {
        let mut s = QuantumState::zero(4).unwrap();
        s.apply(&GateOp::single(GateKind::Rx, 1), Some(0.9)).unwrap();
        let mut rho = DensityMatrix::from_state(&s);
        let before = rho.clone();
        rho.depolarize(&[1], 0.0).unwrap();
        rho.depolarize(&[0, 2], 0.0).unwrap();
        for (a, b) in rho.entries.iter().zip(&before.entries) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn depolarize_three_quarters_kills_bloch_vector() {
        let mut rho = DensityMatrix::zero(4).unwrap();
        rho.depolarize(&[0], 0.75).unwrap();
        assert!(rho.expectation(PauliAxis::Z, 0).unwrap().abs() < 1e-12);
        rho.validate(1e-12).unwrap();
    }

    #[test]
    fn depolarize_scales_bloch_components_exactly() {
        for step in 0..=10 {
            let p = f64::from(step) / 10.0;
            let mut s = QuantumState::zero(2).unwrap();
            // Put qubit 0 somewhere generic on the Bloch sphere.
            s.apply(&GateOp::single(GateKind::Ry, 0), Some(0.8)).unwrap();
            s.apply(&GateOp::single(GateKind::Rz, 0), Some(-0.4)).unwrap();
            let mut rho = DensityMatrix::from_state(&s);
            let before: Vec<f64> = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z]
                .iter()
                .map(|&ax| rho.expectation(ax, 0).unwrap())
                .collect();
            rho.depolarize(&[0], p).unwrap();
            let factor = 1.0 - 4.0 * p / 3.0;
            for (i, &ax) in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z].iter().enumerate() {
                let after = rho.expectation(ax, 0).unwrap();
                assert!(
                    (after - factor * before[i]).abs() < 1e-12,
                    "p={p} axis {i}: {after} vs {}",
                    factor * before[i]
                );
            }
            let tr = rho.trace();
            assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-14);
        }
    }

    #[test]
    fn two_qubit_depolarize_preserves_trace_and_psd() {
        let mut s = QuantumState::zero(4).unwrap();
        s.apply(&GateOp::single(GateKind::H, 0), None).unwrap();
        s.apply(&GateOp::controlled(GateKind::Cx, 0, 1), None)
            .unwrap();
        s.apply(&GateOp::controlled(GateKind::Crx, 1, 2), Some(1.1))
            .unwrap();
        let mut rho = DensityMatrix::from_state(&s);
        rho.depolarize(&[0, 1], 0.3).unwrap();
        rho.validate(1e-12).unwrap();
    }

    #[test]
    fn full_two_qubit_twirl_point() {
        // p = 15/16 leaves the pair maximally mixed.
        let mut rho = DensityMatrix::zero(2).unwrap();
        rho.depolarize(&[0, 1], 15.0 / 16.0).unwrap();
        for i in 0..4 {
            assert!((rho.entry(i, i).re - 0.25).abs() < 1e-12);
        }
        for ax in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
            assert!(rho.expectation(ax, 0).unwrap().abs() < 1e-12);
            assert!(rho.expectation(ax, 1).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn depolarize_rejects_bad_probability_and_qubits() {
        let mut rho = DensityMatrix::zero(2).unwrap();
        assert!(matches!(
            rho.depolarize(&[0], 1.5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            rho.depolarize(&[0, 0], 0.1),
            Err(Error::Config(_))
        ));
        assert!(matches!(rho.depolarize(&[5], 0.1), Err(Error::Config(_))));
    }
}
