//! Synthetic problem generation and recovery metrics.
//!
//! SNR convention: `synthesize` sets the complex noise variance to
//! `delta = mean(|Hx|^2) * 10^(-snr_db/10)`, i.e. relative to the mean
//! measured power. Under unit-power signals an SNR of 30 dB therefore gives
//! `delta = 1e-3`.

use crate::model::{ComplexSignal, MatrixKind, MeasurementMatrix, ProblemInstance};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random matrix ensembles for [`gen_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixEnsemble {
    /// i.i.d. {0,1} entries, each 1 with probability `density`.
    Binary01 { density: f64 },
    /// i.i.d. `CN(0, 1/N)` entries (unit expected row energy for unit-power
    /// signals, so solver defaults transfer across sizes).
    ComplexGaussian,
}

/// Random signal ensembles for [`gen_signal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalEnsemble {
    /// Fraction `rho` of entries nonzero (uniform support), values CN(0, 1).
    DenseComplex { rho: f64 },
    /// Exactly `k` entries equal to 1 at uniform positions, rest 0.
    Binary { k: usize },
}

pub fn gen_matrix(
    ensemble: MatrixEnsemble,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<MeasurementMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::dimension("gen_matrix needs M >= 1 and N >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match ensemble {
        MatrixEnsemble::Binary01 { density } => {
            if !(density > 0.0 && density < 1.0) {
                return Err(Error::config(format!(
                    "binary matrix density must be in (0,1), got {density}"
                )));
            }
            let entries = (0..m * n)
                .map(|_| {
                    let one = rng.random::<f64>() < density;
                    Complex64::new(if one { 1.0 } else { 0.0 }, 0.0)
                })
                .collect();
            MeasurementMatrix::new(m, n, entries, MatrixKind::Binary01)
        }
        MatrixEnsemble::ComplexGaussian => {
            let sd = (1.0 / (2.0 * n as f64)).sqrt();
            let entries = (0..m * n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(sd * re, sd * im)
                })
                .collect();
            MeasurementMatrix::new(m, n, entries, MatrixKind::ComplexGaussian)
        }
    }
}

pub fn gen_signal(ensemble: SignalEnsemble, n: usize, seed: u64) -> Result<ComplexSignal> {
    if n == 0 {
        return Err(Error::dimension("gen_signal needs N >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match ensemble {
        SignalEnsemble::DenseComplex { rho } => {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::config(format!("rho must be in (0,1], got {rho}")));
            }
            let k = ((rho * n as f64).round() as usize).clamp(1, n);
            let mut support: Vec<usize> = sample(&mut rng, n, k).into_iter().collect();
            support.sort_unstable();
            let sd = (0.5f64).sqrt();
            let mut values = vec![Complex64::new(0.0, 0.0); n];
            for i in support {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                values[i] = Complex64::new(sd * re, sd * im);
            }
            ComplexSignal::new(values)
        }
        SignalEnsemble::Binary { k } => {
            if k == 0 || k > n {
                return Err(Error::config(format!("binary signal needs 0 < K <= N, got K={k}, N={n}")));
            }
            let mut values = vec![Complex64::new(0.0, 0.0); n];
            for i in sample(&mut rng, n, k) {
                values[i] = Complex64::new(1.0, 0.0);
            }
            ComplexSignal::new(values)
        }
    }
}

/// Builds a measured instance `y = |Hx + w|` at the requested SNR.
/// `snr_db = +inf` means noiseless (`delta = 0`). The instance keeps the
/// noise variance and the ground truth.
pub fn synthesize(
    matrix: MeasurementMatrix,
    x: &ComplexSignal,
    snr_db: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if x.len() != matrix.cols() {
        return Err(Error::dimension(format!(
            "signal length {} does not match matrix columns {}",
            x.len(),
            matrix.cols()
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::config(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let z = matrix.matvec(&x.values)?;
    let power = z.iter().map(|zi| zi.norm_sqr()).sum::<f64>() / z.len() as f64;
    let delta = if snr_db.is_infinite() {
        0.0
    } else {
        power * 10f64.powf(-snr_db / 10.0)
    };
    let y = if delta > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = (delta / 2.0).sqrt();
        z.iter()
            .map(|zi| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                (zi + Complex64::new(sd * re, sd * im)).norm()
            })
            .collect()
    } else {
        z.iter().map(|zi| zi.norm()).collect()
    };
    ProblemInstance::new(matrix, y, delta, Some(x.clone()))
}

/// NMSE after compensating the global phase:
/// `min over phi of ||x_true - e^{i phi} x_hat||^2 / ||x_true||^2`, using the
/// closed-form minimizer `phi = arg(sum conj(x_hat) x_true)`.
pub fn nmse_phase_aligned(x_true: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::dimension("nmse: length mismatch"));
    }
    let norm_true = x_true.norm_sqr();
    if !(norm_true > 0.0) {
        return Err(Error::domain("nmse_phase_aligned", "x_true must be nonzero"));
    }
    let c: Complex64 = x_hat
        .values
        .iter()
        .zip(&x_true.values)
        .map(|(h, t)| h.conj() * t)
        .sum();
    let phase = if c.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        c / c.norm()
    };
    let err: f64 = x_true
        .values
        .iter()
        .zip(&x_hat.values)
        .map(|(t, h)| (t - h * phase).norm_sqr())
        .sum();
    Ok(err / norm_true)
}

/// Pearson correlation of the real parts (signed). Errors on constant input.
pub fn correlation(x_true: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::dimension("correlation: length mismatch"));
    }
    let n = x_true.len() as f64;
    let ma = x_true.values.iter().map(|z| z.re).sum::<f64>() / n;
    let mb = x_hat.values.iter().map(|z| z.re).sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (t, h) in x_true.values.iter().zip(&x_hat.values) {
        let a = t.re - ma;
        let b = h.re - mb;
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    if !(saa > 0.0) || !(sbb > 0.0) {
        return Err(Error::domain("correlation", "constant vector has no correlation"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Normalized inner-product magnitude `|<x_hat, x_true>| / (||x_hat|| ||x_true||)`,
/// the mean-free-less variant kept alongside the Pearson metric.
pub fn raw_correlation(x_true: &ComplexSignal, x_hat: &ComplexSignal) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::dimension("raw_correlation: length mismatch"));
    }
    let na = x_true.norm_sqr().sqrt();
    let nb = x_hat.norm_sqr().sqrt();
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::domain("raw_correlation", "zero vector"));
    }
    let c: Complex64 = x_hat
        .values
        .iter()
        .zip(&x_true.values)
        .map(|(h, t)| h.conj() * t)
        .sum();
    Ok(c.norm() / (na * nb))
}

/// Thresholds the real part: 1 where `Re(x) >= threshold`, else 0.
/// Preserves any 2D layout.
pub fn binarize(x_hat: &ComplexSignal, threshold: f64) -> ComplexSignal {
    ComplexSignal {
        values: x_hat
            .values
            .iter()
            .map(|z| Complex64::new(if z.re >= threshold { 1.0 } else { 0.0 }, 0.0))
            .collect(),
        shape2d: x_hat.shape2d,
    }
}

/// Second-moment sparsity estimate for the recovery scenario (binary signal
/// through a `CN(0, 1/N)` matrix): `E|z|^2 = K/N + delta`, so
/// `rho ≈ mean(y^2) - delta`. Clamped to `[1/N, 1 - 1/N]`.
pub fn estimate_rho(instance: &ProblemInstance) -> f64 {
    let n = instance.unknowns() as f64;
    let mean_y2 = instance.y.iter().map(|y| y * y).sum::<f64>() / instance.y.len() as f64;
    (mean_y2 - instance.delta).clamp(1.0 / n, 1.0 - 1.0 / n)
}
