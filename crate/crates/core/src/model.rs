//! Domain types shared by every module: signals, measurement matrices,
//! problem instances, solver configuration and per-run records.
//!
//! Variance convention used throughout: a circular complex Gaussian
//! `CN(m, sigma)` has density proportional to `exp(-|z - m|^2 / sigma)`,
//! i.e. `sigma` is the *total* variance of the complex value (each of the
//! real and imaginary parts carries `sigma / 2`). Every variance-like
//! quantity (`delta`, `sigma`, `s`, `v`, `x_v`) follows this convention.

use crate::{Error, Result};
use num_complex::Complex64;

/// A complex signal of length `N`, optionally carrying a 2D pixel layout
/// (`rows * cols == N`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub values: Vec<Complex64>,
    pub shape2d: Option<(usize, usize)>,
}

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        Self::with_shape(values, None)
    }

    pub fn with_shape(values: Vec<Complex64>, shape2d: Option<(usize, usize)>) -> Result<Self> {
        let sig = ComplexSignal { values, shape2d };
        sig.check()?;
        Ok(sig)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::dimension("signal length must be >= 1"));
        }
        if let Some((r, c)) = self.shape2d {
            if r * c != self.values.len() {
                return Err(Error::dimension(format!(
                    "shape2d {}x{} does not match length {}",
                    r,
                    c,
                    self.values.len()
                )));
            }
        }
        if let Some(i) = self.values.iter().position(|z| !is_finite_c(*z)) {
            return Err(Error::domain(
                "ComplexSignal",
                format!("non-finite entry at index {i}"),
            ));
        }
        Ok(())
    }

    /// Squared Euclidean norm.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub(crate) fn is_finite_c(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Provenance of a measurement matrix. `Binary01` entries are exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Binary01,
    ComplexGaussian,
    Custom,
}

impl MatrixKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixKind::Binary01 => "binary01",
            MatrixKind::ComplexGaussian => "complex-gaussian",
            MatrixKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binary01" => Some(MatrixKind::Binary01),
            "complex-gaussian" => Some(MatrixKind::ComplexGaussian),
            "custom" => Some(MatrixKind::Custom),
            _ => None,
        }
    }
}

/// Dense `M x N` projection matrix, stored row-major, with the elementwise
/// squared magnitudes `|H|^2` cached alongside (the AMP variance passes
/// consume `|H|^2` as often as `H` itself). Column-major mirrors of both are
/// kept as well: the swept update walks one column per coordinate and would
/// otherwise stride across every row.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    m: usize,
    n: usize,
    entries: Vec<Complex64>,
    abs2: Vec<f64>,
    cols: Vec<Complex64>,
    abs2_cols: Vec<f64>,
    kind: MatrixKind,
}

impl MeasurementMatrix {
    pub fn new(m: usize, n: usize, entries: Vec<Complex64>, kind: MatrixKind) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::dimension("matrix must have M >= 1 and N >= 1"));
        }
        if entries.len() != m * n {
            return Err(Error::dimension(format!(
                "matrix storage holds {} entries, expected {}x{}",
                entries.len(),
                m,
                n
            )));
        }
        if let Some(i) = entries.iter().position(|z| !is_finite_c(*z)) {
            return Err(Error::domain(
                "MeasurementMatrix",
                format!("non-finite entry at flat index {i}"),
            ));
        }
        let abs2: Vec<f64> = entries.iter().map(|z| z.norm_sqr()).collect();
        let mut cols = vec![Complex64::new(0.0, 0.0); m * n];
        let mut abs2_cols = vec![0.0; m * n];
        for mu in 0..m {
            for i in 0..n {
                cols[i * m + mu] = entries[mu * n + i];
                abs2_cols[i * m + mu] = abs2[mu * n + i];
            }
        }
        Ok(MeasurementMatrix {
            m,
            n,
            entries,
            abs2,
            cols,
            abs2_cols,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entry(&self, mu: usize, i: usize) -> Complex64 {
        self.entries[mu * self.n + i]
    }

    pub fn row(&self, mu: usize) -> &[Complex64] {
        &self.entries[mu * self.n..(mu + 1) * self.n]
    }

    pub fn abs2_row(&self, mu: usize) -> &[f64] {
        &self.abs2[mu * self.n..(mu + 1) * self.n]
    }

    /// Column `i` of `H`, contiguous.
    pub fn col(&self, i: usize) -> &[Complex64] {
        &self.cols[i * self.m..(i + 1) * self.m]
    }

    /// Column `i` of `|H|^2`, contiguous.
    pub fn abs2_col(&self, i: usize) -> &[f64] {
        &self.abs2_cols[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn abs2(&self) -> &[f64] {
        &self.abs2
    }

    /// `H x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return Err(Error::dimension(format!(
                "matvec: x has length {}, matrix has {} columns",
                x.len(),
                self.n
            )));
        }
        Ok((0..self.m)
            .map(|mu| {
                self.row(mu)
                    .iter()
                    .zip(x)
                    .map(|(h, xi)| h * xi)
                    .sum::<Complex64>()
            })
            .collect())
    }

    /// `|H|^2 xv` (real, used for the variance field).
    pub fn abs2_matvec(&self, xv: &[f64]) -> Result<Vec<f64>> {
        if xv.len() != self.n {
            return Err(Error::dimension(format!(
                "abs2_matvec: xv has length {}, matrix has {} columns",
                xv.len(),
                self.n
            )));
        }
        Ok((0..self.m)
            .map(|mu| {
                self.abs2_row(mu)
                    .iter()
                    .zip(xv)
                    .map(|(h2, v)| h2 * v)
                    .sum::<f64>()
            })
            .collect())
    }
}

/// One phase-retrieval problem: the matrix, the measured magnitudes
/// `y = |Hx + w|` (non-negative), the noise variance `delta` of the circular
/// complex noise `w`, and optionally the ground truth for scoring.
///
/// Intensity data `|Hx + w|^2` must be square-rooted at ingestion; the
/// solver and all metrics operate on magnitudes.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub matrix: MeasurementMatrix,
    pub y: Vec<f64>,
    pub delta: f64,
    pub ground_truth: Option<ComplexSignal>,
}

impl ProblemInstance {
    pub fn new(
        matrix: MeasurementMatrix,
        y: Vec<f64>,
        delta: f64,
        ground_truth: Option<ComplexSignal>,
    ) -> Result<Self> {
        if y.len() != matrix.rows() {
            return Err(Error::dimension(format!(
                "y has length {}, matrix has {} rows",
                y.len(),
                matrix.rows()
            )));
        }
        Ok(ProblemInstance {
            matrix,
            y,
            delta,
            ground_truth,
        })
    }

    pub fn measurements(&self) -> usize {
        self.matrix.rows()
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.cols()
    }
}

/// Input prior carried by the denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// Complex Gaussian `CN(mean, variance)`.
    Gaussian { mean: Complex64, variance: f64 },
    /// Bernoulli on {0, 1} with `P(x = 1) = rho`.
    Binary { rho: f64 },
}

/// Output channel relating a noiseless projection `z` to its measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelSpec {
    /// Magnitude observation `y = |z + w|`, `w ~ CN(0, delta)`.
    RicianMagnitude { delta: f64 },
    /// Linear observation `y = z + w` (regression/sanity channel).
    Awgn { delta: f64 },
}

impl ChannelSpec {
    pub fn delta(&self) -> f64 {
        match *self {
            ChannelSpec::RicianMagnitude { delta } | ChannelSpec::Awgn { delta } => delta,
        }
    }
}

/// Initialization of the signal-mean vector `x_a`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Explicit starting vector (length must be N).
    Vector(Vec<Complex64>),
    /// i.i.d. CN(0, 1) draws from the run's seeded RNG.
    Random,
    /// Every entry set to the given constant.
    Constant(Complex64),
}

/// All prSAMP tunables for one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Damping on the likelihood fields `s` and `r`, in `[0, 1)`; 0 disables.
    pub alpha: f64,
    /// 2D median damping weight, in `[0, 1)`; 0 disables the 2D step.
    pub alpha2d: f64,
    /// Pixel layout of the unknown; required when `alpha2d > 0`.
    pub shape2d: Option<(usize, usize)>,
    /// Iteration cap.
    pub t_max: usize,
    /// Stop when `||x_a^t - x_a^{t-1}||^2` falls below this (absolute).
    pub epsilon: f64,
    /// Replacement value for negative/non-finite variances.
    pub v0: f64,
    /// Number of independent restarts; the lowest-NR run wins.
    pub restarts: usize,
    pub input_prior: PriorSpec,
    pub output_channel: ChannelSpec,
    pub x0: InitSpec,
    /// Initial per-coordinate variance, in `(0, 1]`.
    pub xv0: f64,
    /// Base RNG seed (restart k runs with `seed + k`).
    pub seed: u64,
    /// Hard floor applied to every variance after clamping.
    pub clamp_vmin: f64,
    /// Also damp `(g, dg)` with `alpha` wherever they are recomputed.
    /// Off by default.
    pub damp_output: bool,
}

/// Default iteration cap: `N` for small problems (they need room to pass the
/// initial oscillations), `N/4` once `N >= 256`.
pub fn default_t_max(n: usize) -> usize {
    if n < 256 {
        n
    } else {
        (n / 4).max(64)
    }
}

/// Default convergence threshold, scaled with problem size so the
/// unnormalized `||dx||^2 < epsilon` criterion is size-stable.
pub fn default_epsilon(n: usize) -> f64 {
    1e-8 * n as f64
}

impl SolverConfig {
    /// Preset for the calibration scenario: complex unknown, ill-conditioned
    /// binary matrix. Heavy damping (`alpha = 0.9`), `xv0 = 0.5`, Gaussian
    /// `CN(0, 1)` prior, random init.
    pub fn calibration(n: usize, channel_delta: f64) -> Self {
        SolverConfig {
            alpha: 0.9,
            alpha2d: 0.0,
            shape2d: None,
            t_max: default_t_max(n),
            epsilon: default_epsilon(n),
            v0: 0.5,
            restarts: 1,
            input_prior: PriorSpec::Gaussian {
                mean: Complex64::new(0.0, 0.0),
                variance: 1.0,
            },
            output_channel: ChannelSpec::RicianMagnitude {
                delta: channel_delta,
            },
            x0: InitSpec::Random,
            xv0: 0.5,
            seed: 0,
            clamp_vmin: 1e-12,
            damp_output: false,
        }
    }

    /// Preset for the recovery scenario: binary unknown, complex matrix.
    /// Light damping (`alpha = 0.2`), `xv0 = 0.1`, Bernoulli prior.
    pub fn recovery(n: usize, channel_delta: f64, rho: f64) -> Self {
        SolverConfig {
            alpha: 0.2,
            alpha2d: 0.0,
            shape2d: None,
            t_max: default_t_max(n),
            epsilon: default_epsilon(n),
            v0: 0.1,
            restarts: 1,
            input_prior: PriorSpec::Binary { rho },
            output_channel: ChannelSpec::RicianMagnitude {
                delta: channel_delta,
            },
            x0: InitSpec::Random,
            xv0: 0.1,
            seed: 0,
            clamp_vmin: 1e-12,
            damp_output: false,
        }
    }

    /// Checks the config against a problem with `n` unknowns.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must be in [0,1), got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.alpha2d) {
            return Err(Error::config(format!(
                "alpha2d must be in [0,1), got {}",
                self.alpha2d
            )));
        }
        if self.alpha2d > 0.0 {
            match self.shape2d {
                None => {
                    return Err(Error::config("alpha2d > 0 requires shape2d"));
                }
                Some((r, c)) => {
                    if r * c != n {
                        return Err(Error::config(format!(
                            "shape2d {}x{} does not match N = {}",
                            r, c, n
                        )));
                    }
                }
            }
        }
        if self.t_max == 0 {
            return Err(Error::config("t_max must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::config(format!("v0 must be > 0, got {}", self.v0)));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be >= 1"));
        }
        if !(self.xv0 > 0.0 && self.xv0 <= 1.0) {
            return Err(Error::config(format!(
                "xv0 must be in (0,1], got {}",
                self.xv0
            )));
        }
        if !(self.clamp_vmin > 0.0) {
            return Err(Error::config(format!(
                "clamp_vmin must be > 0, got {}",
                self.clamp_vmin
            )));
        }
        match &self.input_prior {
            PriorSpec::Gaussian { variance, mean } => {
                if !(*variance > 0.0) || !variance.is_finite() {
                    return Err(Error::config(format!(
                        "gaussian prior variance must be > 0, got {variance}"
                    )));
                }
                if !is_finite_c(*mean) {
                    return Err(Error::config("gaussian prior mean must be finite"));
                }
            }
            PriorSpec::Binary { rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::config(format!(
                        "binary prior rho must be in (0,1), got {rho}"
                    )));
                }
            }
        }
        if self.output_channel.delta() < 0.0 || !self.output_channel.delta().is_finite() {
            return Err(Error::config(format!(
                "channel delta must be finite and >= 0, got {}",
                self.output_channel.delta()
            )));
        }
        if let InitSpec::Vector(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::config(format!(
                    "x0 vector has length {}, problem has N = {}",
                    x0.len(),
                    n
                )));
            }
        }
        Ok(())
    }
}

/// Per-iteration solver fields. Owned by exactly one run; all length-N
/// vectors are indexed by coordinate, length-M vectors by measurement row.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Posterior means of the unknowns.
    pub x_a: Vec<Complex64>,
    /// Posterior variances of the unknowns (> 0 after clamping).
    pub x_v: Vec<f64>,
    /// Output mean field (with Onsager memory folded in).
    pub omega: Vec<Complex64>,
    /// Output variance field (> 0 after clamping).
    pub v: Vec<f64>,
    /// Channel score per row.
    pub g: Vec<Complex64>,
    /// Channel curvature per row.
    pub dg: Vec<f64>,
    /// Likelihood pseudo-measurements per coordinate.
    pub r: Vec<Complex64>,
    /// Likelihood pseudo-variances per coordinate (> 0 after clamping).
    pub s: Vec<f64>,
    /// Completed iterations.
    pub t: usize,
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub config: SolverConfig,
    pub converged: bool,
    pub iterations_used: usize,
    /// Normalized residual `||y - |H x_hat||^2 / ||y||^2`.
    pub nr: f64,
    /// Phase-aligned NMSE against the ground truth, when available.
    pub nmse: Option<f64>,
    /// Pearson correlation of real parts against the ground truth (signed).
    pub correlation: Option<f64>,
    /// Wall-clock seconds for this run. Excluded from determinism
    /// comparisons and zeroed in deterministic file outputs.
    pub wall_time: f64,
    pub seed: u64,
}

/// One violated invariant reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: violates `{}`", self.field, self.rule)
    }
}

/// Checks every type invariant of a problem instance and reports violations
/// instead of erroring. Pure: identical calls yield identical reports.
pub fn validate(instance: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = instance.matrix.rows();
    let n = instance.matrix.cols();
    if m == 0 {
        out.push(Violation {
            field: "matrix.M".into(),
            rule: "M >= 1".into(),
        });
    }
    if n == 0 {
        out.push(Violation {
            field: "matrix.N".into(),
            rule: "N >= 1".into(),
        });
    }
    for (idx, z) in instance.matrix.entries().iter().enumerate() {
        if !is_finite_c(*z) {
            out.push(Violation {
                field: format!("matrix.entries[{idx}]"),
                rule: "entries finite".into(),
            });
            break;
        }
    }
    if instance.matrix.kind() == MatrixKind::Binary01 {
        for (idx, z) in instance.matrix.entries().iter().enumerate() {
            let ok = z.im == 0.0 && (z.re == 0.0 || z.re == 1.0);
            if !ok {
                out.push(Violation {
                    field: format!("matrix.entries[{idx}]"),
                    rule: "entries ∈ {0,1}".into(),
                });
                break;
            }
        }
    }
    for (idx, (z, c)) in instance
        .matrix
        .entries()
        .iter()
        .zip(instance.matrix.abs2())
        .enumerate()
    {
        let expect = z.norm_sqr();
        let tol = 1e-12 * expect.max(1e-300);
        if (c - expect).abs() > tol {
            out.push(Violation {
                field: format!("matrix.abs2[{idx}]"),
                rule: "|H|^2 cache equals |entry|^2 within 1e-12 relative".into(),
            });
            break;
        }
    }
    if instance.y.len() != m {
        out.push(Violation {
            field: "y".into(),
            rule: "length(y) = M".into(),
        });
    }
    for (mu, ym) in instance.y.iter().enumerate() {
        if !(*ym >= 0.0) || !ym.is_finite() {
            out.push(Violation {
                field: format!("y[{mu}]"),
                rule: "y[μ] ≥ 0".into(),
            });
            break;
        }
    }
    if !(instance.delta >= 0.0) || !instance.delta.is_finite() {
        out.push(Violation {
            field: "delta".into(),
            rule: "delta ≥ 0".into(),
        });
    }
    if let Some(gt) = &instance.ground_truth {
        if gt.len() != n {
            out.push(Violation {
                field: "ground_truth".into(),
                rule: "length = N".into(),
            });
        }
        if gt.check().is_err() {
            out.push(Violation {
                field: "ground_truth".into(),
                rule: "finite entries; shape2d consistent".into(),
            });
        }
    }
    out
}
