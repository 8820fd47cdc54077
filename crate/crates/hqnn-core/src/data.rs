//! Device-record schema, CSV I/O, standardization, splitting, and the
//! synthetic data generator.
//!
//! A record carries 5 continuous process/geometry features, 19 binary one-hot
//! process indicators (four groups: wet clean, plasma treatment, gate
//! dielectric, post-deposition anneal), and 6 electrical targets. The
//! generator draws devices from 17 built-in process recipes and produces
//! targets from fixed smooth functions of the features plus Gaussian noise;
//! the coefficient table is versioned and pinned by regression tests.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const NUM_CONTINUOUS: usize = 5;
pub const NUM_ONE_HOT: usize = 19;
pub const NUM_FEATURES: usize = NUM_CONTINUOUS + NUM_ONE_HOT;
pub const NUM_TARGETS: usize = 6;

pub const CONTINUOUS_NAMES: [&str; NUM_CONTINUOUS] = [
    "x_coord",
    "y_coord",
    "ale_cycles",
    "remaining_algan_nm",
    "recess_depth_nm",
];

pub const TARGET_NAMES: [&str; NUM_TARGETS] = [
    "vth_fwd_v",
    "vth_rev_v",
    "dvth_v",
    "ss_mv_dec",
    "ion_a",
    "ioff_a",
];

/// One-hot groups in column order: (group name, variants).
pub const ONE_HOT_GROUPS: [(&str, &[&str]); 4] = [
    ("wet_clean", &["a", "b"]),
    ("plasma", &["a", "b", "c", "d", "e", "f", "g", "h", "i"]),
    (
        "dielectric",
        &[
            "sin_peald_15",
            "sin_peald_25",
            "sin_rtcvd_15",
            "al2o3_h2o_15",
            "al2o3_h2o_25",
            "al2o3_o3_15",
        ],
    ),
    ("pda", &["fg_700", "o2_500"]),
];

/// Start offset of each one-hot group within the 19 indicator columns.
pub const GROUP_OFFSETS: [usize; 4] = [0, 2, 11, 17];

/// Target indices by name.
pub const VTH_FWD: usize = 0;
pub const VTH_REV: usize = 1;
pub const DVTH: usize = 2;
pub const SS: usize = 3;
pub const ION: usize = 4;
pub const IOFF: usize = 5;

/// The i_off target is log-transformed (natural log) before standardization.
pub const LOG_TARGETS: [bool; NUM_TARGETS] = [false, false, false, false, false, true];

/// Full CSV header, in order.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = CONTINUOUS_NAMES.iter().map(|s| s.to_string()).collect();
    for (group, variants) in ONE_HOT_GROUPS {
        for v in variants {
            cols.push(format!("{group}__{v}"));
        }
    }
    cols.extend(TARGET_NAMES.iter().map(|s| s.to_string()));
    cols
}

/// One fabricated device: features and extracted electrical targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRecord {
    pub continuous: [f64; NUM_CONTINUOUS],
    pub one_hot: [f64; NUM_ONE_HOT],
    pub targets: [f64; NUM_TARGETS],
}

impl DeviceRecord {
    /// The 24-feature input vector: continuous then one-hot.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        out[..NUM_CONTINUOUS].copy_from_slice(&self.continuous);
        out[NUM_CONTINUOUS..].copy_from_slice(&self.one_hot);
        out
    }

    /// Schema invariants: hysteresis identity, positivity, and exact one-hot
    /// groups. `row` feeds the error message (1-based, header is row 1).
    pub fn validate(&self, row: usize) -> Result<()> {
        let t = &self.targets;
        if (t[DVTH] - (t[VTH_REV] - t[VTH_FWD])).abs() > 1e-9 {
            return Err(Error::Parse {
                row,
                column: TARGET_NAMES[DVTH].into(),
                message: format!(
                    "dvth_v {} differs from vth_rev_v - vth_fwd_v = {}",
                    t[DVTH],
                    t[VTH_REV] - t[VTH_FWD]
                ),
            });
        }
        for (idx, name) in [(SS, "ss_mv_dec"), (ION, "ion_a"), (IOFF, "ioff_a")] {
            if t[idx] <= 0.0 {
                return Err(Error::Parse {
                    row,
                    column: name.into(),
                    message: format!("{name} must be positive, got {}", t[idx]),
                });
            }
        }
        for (g, (group, variants)) in ONE_HOT_GROUPS.iter().enumerate() {
            let start = GROUP_OFFSETS[g];
            let slice = &self.one_hot[start..start + variants.len()];
            let sum: f64 = slice.iter().sum();
            let binary = slice.iter().all(|&v| v == 0.0 || v == 1.0);
            if !binary || sum != 1.0 {
                return Err(Error::Parse {
                    row,
                    column: (*group).into(),
                    message: format!(
                        "one-hot group '{group}' must contain exactly one 1, got {slice:?}"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Write records in the fixed schema. Floats use the shortest representation
/// that round-trips exactly.
pub fn write_csv(records: &[DeviceRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
    writer
        .write_record(csv_header())
        .map_err(|e| csv_io_error(path, e))?;
    for record in records {
        let mut fields: Vec<String> = Vec::with_capacity(NUM_FEATURES + NUM_TARGETS);
        for v in record.continuous {
            fields.push(format!("{v}"));
        }
        for v in record.one_hot {
            fields.push(format!("{v}"));
        }
        for v in record.targets {
            fields.push(format!("{v}"));
        }
        writer.write_record(&fields).map_err(|e| csv_io_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Load records, checking the header and every schema invariant.
pub fn load_csv(path: &Path) -> Result<Vec<DeviceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_io_error(path, e))?;
    let header = csv_header();
    let actual: Vec<String> = reader
        .headers()
        .map_err(|e| csv_io_error(path, e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if actual != header {
        let detail = header
            .iter()
            .zip(actual.iter().chain(std::iter::repeat(&String::new())))
            .find(|(want, got)| want != got)
            .map(|(want, got)| format!("expected column '{want}', found '{got}'"))
            .unwrap_or_else(|| format!("expected {} columns, found {}", header.len(), actual.len()));
        return Err(Error::Parse {
            row: 1,
            column: "header".into(),
            message: detail,
        });
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 2;
        let row = row.map_err(|e| csv_io_error(path, e))?;
        if row.len() != header.len() {
            return Err(Error::Parse {
                row: row_number,
                column: "record".into(),
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let parse = |idx: usize| -> Result<f64> {
            row[idx].trim().parse::<f64>().map_err(|_| Error::Parse {
                row: row_number,
                column: header[idx].clone(),
                message: format!("expected a number, found '{}'", &row[idx]),
            })
        };
        let mut record = DeviceRecord {
            continuous: [0.0; NUM_CONTINUOUS],
            one_hot: [0.0; NUM_ONE_HOT],
            targets: [0.0; NUM_TARGETS],
        };
        for (k, slot) in record.continuous.iter_mut().enumerate() {
            *slot = parse(k)?;
        }
        for (k, slot) in record.one_hot.iter_mut().enumerate() {
            *slot = parse(NUM_CONTINUOUS + k)?;
        }
        for (k, slot) in record.targets.iter_mut().enumerate() {
            *slot = parse(NUM_CONTINUOUS + NUM_ONE_HOT + k)?;
        }
        record.validate(row_number)?;
        records.push(record);
    }
    Ok(records)
}

/// Train/val/test index assignment from a seeded shuffle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffle indices and cut at floor(r0 n) / floor(r1 n) / remainder.
pub fn split(n: usize, ratios: (f64, f64, f64), split_seed: u64) -> Result<SplitAssignment> {
    if n < 3 {
        return Err(Error::Usage(format!("cannot split {n} records three ways")));
    }
    let (r0, r1, r2) = ratios;
    if (r0 + r1 + r2 - 1.0).abs() > 1e-9 || r0 <= 0.0 || r1 <= 0.0 || r2 <= 0.0 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(split_seed, "split", 0);
    // Fisher-Yates, fixed draw order.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    // The epsilon absorbs representation error in r * n (e.g. 0.6 * 5).
    let n_train = ((r0 * n as f64) + 1e-9).floor() as usize;
    let n_val = ((r1 * n as f64) + 1e-9).floor() as usize;
    let train = indices[..n_train].to_vec();
    let val = indices[n_train..n_train + n_val].to_vec();
    let test = indices[n_train + n_val..].to_vec();
    Ok(SplitAssignment {
        train,
        val,
        test,
        seed: split_seed,
    })
}

/// Feature/target standardization fitted on the training split only.
///
/// Continuous features and targets go to zero mean / unit variance
/// (population statistics); binary indicators pass through unchanged; i_off
/// is log-transformed (natural log) before standardization and exponentiated
/// on inversion. Constant columns are flagged and transform to exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    cont_mean: [f64; NUM_CONTINUOUS],
    cont_std: [f64; NUM_CONTINUOUS],
    cont_constant: [bool; NUM_CONTINUOUS],
    target_mean: [f64; NUM_TARGETS],
    target_std: [f64; NUM_TARGETS],
    target_constant: [bool; NUM_TARGETS],
}

const STD_FLOOR: f64 = 1e-12;

fn column_stats(values: &[f64]) -> (f64, f64, bool) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < STD_FLOOR {
        (mean, STD_FLOOR, true)
    } else {
        (mean, std, false)
    }
}

impl Standardizer {
    /// Fit on the records selected by `train_idx`.
    pub fn fit(records: &[DeviceRecord], train_idx: &[usize]) -> Result<Self> {
        if train_idx.is_empty() {
            return Err(Error::Usage("cannot fit a standardizer on an empty split".into()));
        }
        for &i in train_idx {
            if i >= records.len() {
                return Err(Error::Contract(format!(
                    "train index {i} out of range for {} records",
                    records.len()
                )));
            }
        }
        let mut s = Standardizer {
            cont_mean: [0.0; NUM_CONTINUOUS],
            cont_std: [1.0; NUM_CONTINUOUS],
            cont_constant: [false; NUM_CONTINUOUS],
            target_mean: [0.0; NUM_TARGETS],
            target_std: [1.0; NUM_TARGETS],
            target_constant: [false; NUM_TARGETS],
        };
        for k in 0..NUM_CONTINUOUS {
            let col: Vec<f64> = train_idx.iter().map(|&i| records[i].continuous[k]).collect();
            let (mean, std, constant) = column_stats(&col);
            s.cont_mean[k] = mean;
            s.cont_std[k] = std;
            s.cont_constant[k] = constant;
        }
        for k in 0..NUM_TARGETS {
            let col: Vec<f64> = train_idx
                .iter()
                .map(|&i| {
                    let v = records[i].targets[k];
                    if LOG_TARGETS[k] {
                        v.ln()
                    } else {
                        v
                    }
                })
                .collect();
            let (mean, std, constant) = column_stats(&col);
            s.target_mean[k] = mean;
            s.target_std[k] = std;
            s.target_constant[k] = constant;
        }
        Ok(s)
    }

    /// Standardized 24-feature vector.
    pub fn apply_features(&self, record: &DeviceRecord) -> [f64; NUM_FEATURES] {
        let mut out = record.features();
        for k in 0..NUM_CONTINUOUS {
            out[k] = if self.cont_constant[k] {
                0.0
            } else {
                (out[k] - self.cont_mean[k]) / self.cont_std[k]
            };
        }
        out
    }

    /// Standardized target vector (with the i_off log transform).
    pub fn apply_targets(&self, targets: &[f64; NUM_TARGETS]) -> [f64; NUM_TARGETS] {
        let mut out = [0.0; NUM_TARGETS];
        for k in 0..NUM_TARGETS {
            if self.target_constant[k] {
                out[k] = 0.0;
                continue;
            }
            let v = if LOG_TARGETS[k] { targets[k].ln() } else { targets[k] };
            out[k] = (v - self.target_mean[k]) / self.target_std[k];
        }
        out
    }

    /// Map standardized predictions back to original units (exp for i_off).
    pub fn invert_targets(&self, standardized: &[f64; NUM_TARGETS]) -> [f64; NUM_TARGETS] {
        let mut out = [0.0; NUM_TARGETS];
        for k in 0..NUM_TARGETS {
            let v = if self.target_constant[k] {
                self.target_mean[k]
            } else {
                standardized[k] * self.target_std[k] + self.target_mean[k]
            };
            out[k] = if LOG_TARGETS[k] { v.exp() } else { v };
        }
        out
    }
}

// --- synthetic generator -------------------------------------------------

/// Version tag of the generator's target functions; changing any coefficient
/// below requires bumping this string.
pub const GENERATOR_VERSION: &str = "synthgen-v1";

const BARRIER_NM: f64 = 18.0;
const ALE_NM_PER_CYCLE: f64 = 0.11;

/// One process recipe: remaining barrier after etch plus the categorical
/// choices (indices into the one-hot groups).
struct Recipe {
    remaining_algan_nm: f64,
    wet_clean: usize,
    plasma: usize,
    dielectric: usize,
    pda: usize,
}

const fn recipe(remaining: f64, wet: usize, plasma: usize, diel: usize, pda: usize) -> Recipe {
    Recipe {
        remaining_algan_nm: remaining,
        wet_clean: wet,
        plasma,
        dielectric: diel,
        pda,
    }
}

/// The 17 built-in process recipes the generator cycles through.
const RECIPES: [Recipe; 17] = [
    recipe(13.6, 0, 0, 0, 0),
    recipe(13.6, 0, 1, 0, 0),
    recipe(13.6, 0, 2, 0, 0),
    recipe(13.6, 0, 3, 0, 0),
    recipe(13.6, 0, 4, 0, 0),
    recipe(3.7, 0, 0, 0, 0),
    recipe(3.7, 0, 0, 1, 0),
    recipe(3.7, 0, 4, 1, 0),
    recipe(5.9, 1, 0, 2, 0),
    recipe(3.7, 1, 0, 2, 0),
    recipe(1.5, 1, 0, 2, 0),
    recipe(3.7, 0, 5, 3, 0),
    recipe(3.7, 0, 5, 3, 1),
    recipe(3.7, 0, 7, 3, 0),
    recipe(3.7, 0, 6, 4, 0),
    recipe(3.7, 0, 8, 4, 0),
    recipe(3.7, 0, 6, 5, 0),
];

// Target-function coefficient table, version synthgen-v1. All target columns
// share the same latent drivers (recess depth, dielectric, plasma, die
// position), so they stay physically coupled.
mod coeff {
    pub const VTH_BASE: f64 = -3.2;
    pub const VTH_PER_NM: f64 = 0.22;
    pub const VTH_X_GRADIENT: f64 = 0.05;
    pub const VTH_INTERACTION: f64 = 0.04;
    pub const VTH_NOISE: f64 = 0.05;
    pub const VTH_DIEL: [f64; 6] = [0.0, -0.18, 0.12, 0.35, 0.22, 0.50];
    pub const VTH_SPLIT: [f64; 17] = [
        0.00, 0.06, 0.11, 0.17, 0.23, 0.28, 0.34, 0.40, 0.45, 0.52, 0.58, 0.63, 0.69, 0.76,
        0.81, 0.88, 0.94,
    ];

    pub const PLASMA_STRENGTH: [f64; 9] = [0.0, 0.5, 0.8, 1.5, 1.8, 1.2, 1.0, 0.9, 1.4];
    pub const DIEL_GAIN: [f64; 6] = [1.0, 0.8, 1.2, 1.5, 1.3, 1.8];

    pub const HYST_BASE: f64 = 0.04;
    pub const HYST_DIEL: [f64; 6] = [0.02, 0.035, 0.08, 0.13, 0.15, 0.06];
    pub const HYST_PDA: [f64; 2] = [0.0, 0.09];
    pub const HYST_PLASMA: f64 = 0.01;
    pub const HYST_NOISE: f64 = 0.012;

    pub const LN_SS_BASE: f64 = 4.1589; // ln(64)
    pub const LN_SS_PER_NM: f64 = 0.006;
    pub const LN_SS_DIEL: [f64; 6] = [0.0, 0.024, 0.064, 0.096, 0.112, 0.04];
    pub const LN_SS_PLASMA: f64 = 0.05;
    pub const LN_SS_Y_GRADIENT: f64 = 0.004;
    pub const LN_SS_NOISE: f64 = 0.03;

    pub const LN_ION_BASE: f64 = -0.8675; // ln(0.42)
    pub const LN_ION_PER_NM: f64 = -0.015;
    pub const LN_ION_DIEL: [f64; 6] = [0.0, -0.025, -0.045, -0.065, -0.08, -0.035];
    pub const LN_ION_PLASMA: f64 = 0.02;
    pub const LN_ION_X_GRADIENT: f64 = 0.01;
    pub const LN_ION_NOISE: f64 = 0.05;

    pub const LN_IOFF_BASE: f64 = -18.2;
    pub const LN_IOFF_PER_NM: f64 = -0.06;
    pub const LN_IOFF_X_GRADIENT: f64 = 0.04;
    pub const LN_IOFF_PLASMA: [f64; 9] = [0.0, -0.4, -0.7, -1.3, -1.6, -0.9, -0.6, -0.8, -1.1];
    pub const LN_IOFF_DIEL: [f64; 6] = [0.0, 0.35, 0.9, 1.4, 1.7, 0.6];
    pub const LN_IOFF_NOISE_BASE: f64 = 0.18;
    pub const LN_IOFF_NOISE_PLASMA: f64 = 0.05;
    pub const IOFF_PLASMA_NOISE: [f64; 9] = [2.0, 1.2, 1.0, 0.6, 0.5, 0.8, 1.0, 0.9, 0.7];

    pub const REMAINING_JITTER: f64 = 0.04;
}

/// Draw `n` synthetic device records. Devices cycle through the 17 recipes
/// round-robin; all randomness comes from the seeded stream, so equal
/// (n, seed) reproduce identical records.
pub fn synthesize(n: usize, synth_seed: u64) -> Result<Vec<DeviceRecord>> {
    if n == 0 {
        return Err(Error::Usage("cannot synthesize zero records".into()));
    }
    let mut rng = seed::rng(synth_seed, "synth", 0);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let split_idx = i % RECIPES.len();
        let r = &RECIPES[split_idx];

        // Die position on a roughly circular wafer grid.
        let (x, y) = loop {
            let x: i32 = rng.gen_range(-4..=4);
            let y: i32 = rng.gen_range(-4..=4);
            if x * x + y * y <= 20 {
                break (f64::from(x), f64::from(y));
            }
        };

        let jitter: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            * coeff::REMAINING_JITTER;
        let remaining = r.remaining_algan_nm + jitter;
        let recess = BARRIER_NM - remaining;
        let cycles = ((BARRIER_NM - r.remaining_algan_nm) / ALE_NM_PER_CYCLE).round();

        let mut noise = || -> f64 {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        };

        let vth_fwd = coeff::VTH_BASE
            + coeff::VTH_PER_NM * recess
            + coeff::VTH_DIEL[r.dielectric]
            + coeff::VTH_SPLIT[split_idx]
            + coeff::VTH_X_GRADIENT * x
            + coeff::VTH_INTERACTION
                * coeff::PLASMA_STRENGTH[r.plasma]
                * coeff::DIEL_GAIN[r.dielectric]
            + coeff::VTH_NOISE * noise();

        let hysteresis = coeff::HYST_BASE
            + coeff::HYST_DIEL[r.dielectric]
            + coeff::HYST_PDA[r.pda]
            + coeff::HYST_PLASMA * coeff::PLASMA_STRENGTH[r.plasma]
            + coeff::HYST_NOISE * noise();
        let vth_rev = vth_fwd + hysteresis;

        let ln_ss = coeff::LN_SS_BASE
            + coeff::LN_SS_PER_NM * recess
            + coeff::LN_SS_DIEL[r.dielectric]
            + coeff::LN_SS_PLASMA * coeff::PLASMA_STRENGTH[r.plasma]
            + coeff::LN_SS_Y_GRADIENT * y
            + coeff::LN_SS_NOISE * noise();

        let ln_ion = coeff::LN_ION_BASE
            + coeff::LN_ION_PER_NM * recess
            + coeff::LN_ION_DIEL[r.dielectric]
            + coeff::LN_ION_PLASMA * coeff::PLASMA_STRENGTH[r.plasma]
            + coeff::LN_ION_X_GRADIENT * x
            + coeff::LN_ION_NOISE * noise();

        let ioff_sigma = coeff::LN_IOFF_NOISE_BASE
            + coeff::LN_IOFF_NOISE_PLASMA * coeff::IOFF_PLASMA_NOISE[r.plasma];
        let ln_ioff = coeff::LN_IOFF_BASE
            + coeff::LN_IOFF_PER_NM * recess
            + coeff::LN_IOFF_PLASMA[r.plasma]
            + coeff::LN_IOFF_DIEL[r.dielectric]
            + coeff::LN_IOFF_X_GRADIENT * x
            + ioff_sigma * noise();

        let mut one_hot = [0.0; NUM_ONE_HOT];
        one_hot[GROUP_OFFSETS[0] + r.wet_clean] = 1.0;
        one_hot[GROUP_OFFSETS[1] + r.plasma] = 1.0;
        one_hot[GROUP_OFFSETS[2] + r.dielectric] = 1.0;
        one_hot[GROUP_OFFSETS[3] + r.pda] = 1.0;

        let record = DeviceRecord {
            continuous: [x, y, cycles, remaining, recess],
            one_hot,
            targets: [
                vth_fwd,
                vth_rev,
                vth_rev - vth_fwd,
                ln_ss.exp(),
                ln_ion.exp(),
                ln_ioff.exp(),
            ],
        };
        debug_assert!(record.validate(i + 2).is_ok());
        records.push(record);
    }
    Ok(records)
}
