//! Metrics, rank correlations, the descriptor-vs-accuracy ablation report,
//! and the expressibility estimator.
//!
//! nRMSE divides the per-target RMSE by the training-split interquartile
//! range of that target; the overall score is the arithmetic mean over the
//! six targets. Expressibility is the KL divergence between a circuit's
//! pairwise state-fidelity histogram and the Haar-random fidelity law
//! `P(F) = (N-1)(1-F)^(N-2)`; smaller means more expressible.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::ansatz::{CompiledCircuit, EntanglerFamily};
use crate::error::{Error, Result};
use crate::grad::run_circuit;
use crate::seed;
use crate::sim::QuantumState;

/// Per-target and aggregate regression metrics, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: [f64; 6],
    pub nrmse: [f64; 6],
    pub r2: [f64; 6],
    pub overall_nrmse: f64,
    pub overall_r2: f64,
}

impl MetricsReport {
    /// Assemble a report from per-target errors and training-split scales.
    pub fn from_parts(rmse: [f64; 6], train_iqr: &[f64; 6], r2: [f64; 6]) -> Result<Self> {
        let mut nr = [0.0; 6];
        for i in 0..6 {
            nr[i] = nrmse(rmse[i], train_iqr[i])?;
        }
        Ok(MetricsReport {
            rmse,
            nrmse: nr,
            r2,
            overall_nrmse: overall_mean(&nr),
            overall_r2: overall_mean(&r2),
        })
    }

    pub fn to_csv(&self, target_names: &[&str; 6]) -> String {
        let mut out = String::from("target,rmse,nrmse,r2\n");
        for i in 0..6 {
            out.push_str(&format!(
                "{},{},{},{}\n",
                target_names[i], self.rmse[i], self.nrmse[i], self.r2[i]
            ));
        }
        out.push_str(&format!(
            "overall,,{},{}\n",
            self.overall_nrmse, self.overall_r2
        ));
        out
    }
}

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Usage(format!(
            "rmse needs equal nonzero lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Linear-interpolation quantile at fractional index `p * (n - 1)`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Interquartile range Q0.75 - Q0.25 with linear-interpolation quantiles.
pub fn iqr(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Usage(format!(
            "iqr needs at least 2 values, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(quantile(&sorted, 0.75) - quantile(&sorted, 0.25))
}

/// RMSE normalized by a training-split scale.
pub fn nrmse(rmse: f64, scale: f64) -> Result<f64> {
    if scale <= 0.0 {
        return Err(Error::DegenerateScale(format!(
            "nrmse scale must be positive, got {scale}"
        )));
    }
    Ok(rmse / scale)
}

/// Arithmetic mean of the six per-target scores.
pub fn overall_mean(values: &[f64; 6]) -> f64 {
    values.iter().sum::<f64>() / 6.0
}

/// Coefficient of determination 1 - SS_res / SS_tot.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Usage(format!(
            "r_squared needs equal nonzero lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateScale(
            "r_squared is undefined for constant truth".into(),
        ));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Average ranks (1-based), ties share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateScale(
            "correlation is undefined for constant input".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties; two-sided p-value
/// from the t-approximation `t = ρ sqrt((n-2) / (1-ρ²))` with n-2 degrees of
/// freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Usage(format!(
            "spearman needs equal lengths >= 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    let n = x.len() as f64;
    let p = if rho.abs() >= 1.0 - 1e-15 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 2.0)
            .map_err(|e| Error::Contract(format!("t-distribution: {e}")))?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok((rho, p))
}

/// One row of the descriptor-vs-accuracy study: a single-template circuit
/// configuration with its descriptors and split-averaged score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub levels: usize,
    pub param_count: usize,
    pub depth: usize,
    pub two_qubit_count: usize,
    pub d_kl: f64,
    pub entangler_family: EntanglerFamily,
    pub overall_nrmse: f64,
}

/// Spearman correlation of one descriptor against accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorCorrelation {
    pub descriptor: String,
    pub rho: f64,
    pub p_value: f64,
}

/// Output of the ablation: per-descriptor correlations plus mean accuracy per
/// entangler family. Accuracy is defined as negative overall nRMSE so that
/// positive correlations mean "more of the descriptor, better the model".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub correlations: Vec<DescriptorCorrelation>,
    pub family_mean_accuracy: Vec<(String, f64)>,
    pub rows: usize,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,value,p_value\n");
        for c in &self.correlations {
            out.push_str(&format!(
                "spearman_vs_accuracy,{},{},{}\n",
                c.descriptor, c.rho, c.p_value
            ));
        }
        for (family, mean) in &self.family_mean_accuracy {
            out.push_str(&format!("family_mean_accuracy,{family},{mean},\n"));
        }
        out
    }
}

pub fn ablation_table(rows: &[AblationRow]) -> Result<AblationReport> {
    if rows.len() < 10 {
        return Err(Error::Usage(format!(
            "ablation needs at least 10 rows, got {}",
            rows.len()
        )));
    }
    let accuracy: Vec<f64> = rows.iter().map(|r| -r.overall_nrmse).collect();
    let descriptors: [(&str, Vec<f64>); 4] = [
        (
            "param_count",
            rows.iter().map(|r| r.param_count as f64).collect(),
        ),
        ("depth", rows.iter().map(|r| r.depth as f64).collect()),
        (
            "two_qubit_count",
            rows.iter().map(|r| r.two_qubit_count as f64).collect(),
        ),
        ("d_kl", rows.iter().map(|r| r.d_kl).collect()),
    ];
    let mut correlations = Vec::new();
    for (name, values) in descriptors {
        let (rho, p_value) = spearman(&values, &accuracy)?;
        correlations.push(DescriptorCorrelation {
            descriptor: name.to_string(),
            rho,
            p_value,
        });
    }
    let mut family_mean_accuracy = Vec::new();
    for family in [
        EntanglerFamily::None,
        EntanglerFamily::CnotLike,
        EntanglerFamily::ControlledRotation,
        EntanglerFamily::Mixed,
    ] {
        let scores: Vec<f64> = rows
            .iter()
            .filter(|r| r.entangler_family == family)
            .map(|r| -r.overall_nrmse)
            .collect();
        if !scores.is_empty() {
            family_mean_accuracy.push((
                family.label().to_string(),
                scores.iter().sum::<f64>() / scores.len() as f64,
            ));
        }
    }
    Ok(AblationReport {
        correlations,
        family_mean_accuracy,
        rows: rows.len(),
    })
}

/// Haar-random fidelity density `P(F) = (N-1)(1-F)^(N-2)` on [0, 1].
pub fn haar_fidelity_pdf(fidelity: f64, dim: usize) -> f64 {
    let n = dim as f64;
    (n - 1.0) * (1.0 - fidelity).powi(dim as i32 - 2)
}

/// Exact Haar probability mass of the fidelity bin [lo, hi]:
/// `(1-lo)^(N-1) - (1-hi)^(N-1)`.
fn haar_bin_mass(lo: f64, hi: f64, dim: usize) -> f64 {
    let e = dim as i32 - 1;
    (1.0 - lo).powi(e) - (1.0 - hi).powi(e)
}

/// Monte Carlo expressibility estimate.
///
/// Samples `n_pairs` pairs of full angle vectors (4 encoding angles plus all
/// trainable parameters) uniformly in (-π, π], histograms the pairwise state
/// fidelities into `n_bins` equal-width bins, and returns
/// `D_KL(empirical || Haar)` with natural logarithm and the 0 log 0 = 0
/// convention. Deterministic given the seed.
pub fn estimate_expressibility(
    circuit: &CompiledCircuit,
    n_pairs: usize,
    n_bins: usize,
    expr_seed: u64,
) -> Result<f64> {
    if n_pairs < 1000 {
        return Err(Error::Config(format!(
            "expressibility needs at least 1000 pairs, got {n_pairs}"
        )));
    }
    if n_bins < 2 {
        return Err(Error::Config(format!(
            "expressibility needs at least 2 bins, got {n_bins}"
        )));
    }
    let mut rng = seed::rng(expr_seed, "expressibility", 0);
    let dim = 1usize << circuit.num_qubits();
    let mut counts = vec![0usize; n_bins];

    let sample_state = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<QuantumState> {
        // Uniform in (-π, π]: map u in [0, 1) to π - 2πu.
        let mut draw = || std::f64::consts::PI * (1.0 - 2.0 * rng.gen::<f64>());
        let inputs: [f64; 4] = std::array::from_fn(|_| draw());
        let params: Vec<f64> = (0..circuit.num_params()).map(|_| draw()).collect();
        run_circuit(circuit, &inputs, &params)
    };

    for _ in 0..n_pairs {
        let a = sample_state(&mut rng)?;
        let b = sample_state(&mut rng)?;
        let f = a.fidelity(&b)?;
        let bin = ((f * n_bins as f64) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }

    let total = n_pairs as f64;
    let width = 1.0 / n_bins as f64;
    let mut d_kl = 0.0;
    for (b, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = count as f64 / total;
        let q = haar_bin_mass(b as f64 * width, (b + 1) as f64 * width, dim);
        d_kl += p * (p / q).ln();
    }
    Ok(d_kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{compile, CircuitSpec};

    #[test]
    fn rmse_basics() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 2.5).collect();
        assert!((rmse(&shifted, &y).unwrap() - 2.5).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_matches_direct_sum_oracle() {
        let mut rng = crate::seed::rng(1, "rmse-oracle", 0);
        let pred: Vec<f64> = (0..257).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let truth: Vec<f64> = (0..257).map(|_| rng.gen_range(-5.0..5.0)).collect();
        // Reverse-order accumulation as an independent path.
        let mut acc = 0.0;
        for i in (0..pred.len()).rev() {
            let d = pred[i] - truth[i];
            acc += d * d;
        }
        let expect = (acc / pred.len() as f64).sqrt();
        assert!((rmse(&pred, &truth).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn iqr_hand_interpolated() {
        // Sorted [1,2,3,4]: Q25 at index 0.75 -> 1.75, Q75 at 2.25 -> 3.25.
        assert!((iqr(&[4.0, 2.0, 1.0, 3.0]).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(iqr(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!(iqr(&[1.0]).is_err());
    }

    #[test]
    fn nrmse_and_overall() {
        assert_eq!(nrmse(2.0, 2.0).unwrap(), 1.0);
        assert!(matches!(nrmse(1.0, 0.0), Err(Error::DegenerateScale(_))));
        assert_eq!(overall_mean(&[1.0; 6]), 1.0);
        assert!((overall_mean(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn r_squared_basics() {
        let truth = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&truth, &truth).unwrap(), 1.0);
        let mean_pred = [2.5; 4];
        assert!(r_squared(&mean_pred, &truth).unwrap().abs() < 1e-15);
        assert!(matches!(
            r_squared(&truth, &[2.0; 4]),
            Err(Error::DegenerateScale(_))
        ));
    }

    #[test]
    fn spearman_monotone_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y_up = [10.0, 20.0, 25.0, 40.0, 100.0];
        let (rho, p) = spearman(&x, &y_up).unwrap();
        assert!((rho - 1.0).abs() < 1e-15);
        assert_eq!(p, 0.0);
        let y_down: Vec<f64> = y_up.iter().map(|v| -v).collect();
        let (rho, _) = spearman(&x, &y_down).unwrap();
        assert!((rho + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_matches_rank_then_pearson_oracle_with_ties() {
        let mut rng = crate::seed::rng(8, "spearman-oracle", 0);
        for trial in 0..20 {
            let n = 30;
            // Coarse grid forces ties.
            let x: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6))).collect();
            let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6))).collect();
            let (rho, _) = match spearman(&x, &y) {
                Ok(v) => v,
                Err(_) => continue, // constant column; skip this draw
            };
            // Independent oracle: bubble-sorted rank table, then textbook
            // Pearson over the ranks.
            let rank_of = |vals: &[f64]| -> Vec<f64> {
                let mut idx: Vec<usize> = (0..vals.len()).collect();
                for i in 0..idx.len() {
                    for j in 0..idx.len() - 1 - i {
                        if vals[idx[j]] > vals[idx[j + 1]] {
                            idx.swap(j, j + 1);
                        }
                    }
                }
                let mut ranks = vec![0.0; vals.len()];
                let mut start = 0;
                while start < idx.len() {
                    let mut end = start;
                    while end + 1 < idx.len() && vals[idx[end + 1]] == vals[idx[start]] {
                        end += 1;
                    }
                    let avg = (start + end) as f64 / 2.0 + 1.0;
                    for k in start..=end {
                        ranks[idx[k]] = avg;
                    }
                    start = end + 1;
                }
                ranks
            };
            let rx = rank_of(&x);
            let ry = rank_of(&y);
            let n_f = n as f64;
            let mx = rx.iter().sum::<f64>() / n_f;
            let my = ry.iter().sum::<f64>() / n_f;
            let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
            let den = (rx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>()
                * ry.iter().map(|b| (b - my) * (b - my)).sum::<f64>())
            .sqrt();
            let oracle = num / den;
            assert!((rho - oracle).abs() < 1e-12, "trial {trial}: {rho} vs {oracle}");
        }
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transform() {
        let mut rng = crate::seed::rng(8, "spearman-mono", 0);
        let x: Vec<f64> = (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (rho, _) = spearman(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let y2: Vec<f64> = y.iter().map(|v| v * 7.0 + 3.0).collect();
        let (rho2, _) = spearman(&x2, &y2).unwrap();
        assert!((rho - rho2).abs() < 1e-12);
    }

    #[test]
    fn spearman_rejects_degenerate_input() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateScale(_))
        ));
    }

    fn fake_rows(n: usize, f: impl Fn(usize) -> (usize, f64)) -> Vec<AblationRow> {
        (0..n)
            .map(|i| {
                let (params, score) = f(i);
                AblationRow {
                    label: format!("row{i}"),
                    levels: 1,
                    param_count: params,
                    depth: i + 1,
                    two_qubit_count: i % 5,
                    d_kl: 0.1 * (i as f64),
                    entangler_family: if i % 2 == 0 {
                        EntanglerFamily::CnotLike
                    } else {
                        EntanglerFamily::ControlledRotation
                    },
                    overall_nrmse: score,
                }
            })
            .collect()
    }

    #[test]
    fn ablation_detects_perfect_monotone_descriptor() {
        // Accuracy (-nrmse) strictly increasing in param_count.
        let rows = fake_rows(12, |i| (i + 4, 1.0 / (i + 1) as f64));
        let report = ablation_table(&rows).unwrap();
        let pc = &report.correlations[0];
        assert_eq!(pc.descriptor, "param_count");
        assert!((pc.rho - 1.0).abs() < 1e-12);
        assert_eq!(report.family_mean_accuracy.len(), 2);
    }

    #[test]
    fn ablation_null_is_weak() {
        // Accuracy decoupled from descriptors by a fixed scramble.
        let scramble = [5, 2, 9, 0, 7, 3, 11, 1, 8, 4, 10, 6];
        let rows = fake_rows(12, |i| (i + 4, 0.5 + 0.01 * scramble[i] as f64));
        let report = ablation_table(&rows).unwrap();
        let pc = &report.correlations[0];
        assert!(pc.rho.abs() < 0.6);
        assert!(pc.p_value > 0.01);
    }

    #[test]
    fn ablation_needs_ten_rows() {
        let rows = fake_rows(9, |i| (i, i as f64));
        assert!(matches!(ablation_table(&rows), Err(Error::Usage(_))));
    }

    #[test]
    fn haar_pdf_values_and_normalization() {
        assert!((haar_fidelity_pdf(0.0, 16) - 15.0).abs() < 1e-12);
        assert_eq!(haar_fidelity_pdf(1.0, 16), 0.0);
        // Trapezoid quadrature of the density over [0, 1].
        let n = 20_000;
        let mut integral = 0.0;
        for i in 0..n {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            integral += 0.5 * (haar_fidelity_pdf(a, 16) + haar_fidelity_pdf(b, 16)) / n as f64;
        }
        assert!((integral - 1.0).abs() < 1e-6);
        // The exact bin masses sum to 1 by construction.
        let total: f64 = (0..75)
            .map(|b| haar_bin_mass(b as f64 / 75.0, (b + 1) as f64 / 75.0, 16))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expressibility_is_nonnegative_and_deterministic() {
        let circuit = compile(&CircuitSpec::single(2, 1).unwrap()).unwrap();
        let a = estimate_expressibility(&circuit, 1000, 30, 5).unwrap();
        let b = estimate_expressibility(&circuit, 1000, 30, 5).unwrap();
        assert!(a >= 0.0);
        assert_eq!(a.to_bits(), b.to_bits());
        let c = estimate_expressibility(&circuit, 1000, 30, 6).unwrap();
        assert_ne!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn expressibility_weakly_decreases_with_levels() {
        // Empirical regression values for seed 1234, 5000 pairs, 75 bins:
        // t2:  0.2789, 0.0280, 0.0078
        // t5:  0.0621, 0.0106, 0.0045
        // t13: 0.0108, 0.0050, 0.0031
        for id in [2u8, 5, 13] {
            let mut previous = f64::INFINITY;
            for levels in 1..=3 {
                let circuit = compile(&CircuitSpec::single(id, levels).unwrap()).unwrap();
                let d = estimate_expressibility(&circuit, 5000, 75, 1234).unwrap();
                assert!(
                    d <= previous,
                    "template {id}: d_kl rose from {previous} to {d} at L={levels}"
                );
                previous = d;
            }
        }
    }

    #[test]
    fn fixed_entanglers_cancel_in_pairwise_fidelity() {
        // Template 2 is template 1 plus a parameter-free CX chain; at L=1
        // that trailing unitary drops out of |<a|b>|², so the two templates
        // share the exact same expressibility estimate.
        let t1 = compile(&CircuitSpec::single(1, 1).unwrap()).unwrap();
        let t2 = compile(&CircuitSpec::single(2, 1).unwrap()).unwrap();
        let d1 = estimate_expressibility(&t1, 2000, 40, 7).unwrap();
        let d2 = estimate_expressibility(&t2, 2000, 40, 7).unwrap();
        assert_eq!(d1.to_bits(), d2.to_bits());
    }

    #[test]
    fn ablation_report_csv_shape() {
        let rows = fake_rows(12, |i| (i + 4, 1.0 / (i + 1) as f64));
        let report = ablation_table(&rows).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 4 + report.family_mean_accuracy.len());
        assert!(csv.contains("spearman_vs_accuracy,d_kl,"));
    }

    #[test]
    fn expressibility_rejects_tiny_settings() {
        let circuit = compile(&CircuitSpec::single(1, 1).unwrap()).unwrap();
        assert!(estimate_expressibility(&circuit, 10, 30, 5).is_err());
        assert!(estimate_expressibility(&circuit, 1000, 1, 5).is_err());
    }
}
