//! Scalar input priors (denoisers) and output channels.
//!
//! A denoiser maps a Gaussian pseudo-measurement `(r, s)` to the posterior
//! mean/variance of one unknown under its prior. An output channel maps the
//! Gaussian field `(omega, v)` and one measurement `y` to the score pair
//! `(g, dg)`: with posterior mean `z_hat` and variance `v_z` of the noiseless
//! projection `z ~ CN(omega, v)` given `y`,
//!
//! ```text
//! g  = (z_hat - omega) / v
//! dg = (v_z / v - 1) / v
//! ```
//!
//! Every closed form here is validated against an independent brute-force
//! posterior in [`crate::oracles`].

use crate::{Error, Result};
use num_complex::Complex64;

/// Posterior mean/variance returned by a denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserResult {
    pub mean: Complex64,
    pub variance: f64,
}

/// Score pair returned by an output channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelResult {
    pub g: Complex64,
    pub dg: f64,
}

/// Posterior of a `CN(m, sigma)` coordinate observed through
/// `r = x + noise(s)`: the conjugate complex-Gaussian update.
pub fn gaussian_denoise(
    r: Complex64,
    s: f64,
    m: Complex64,
    sigma: f64,
) -> Result<DenoiserResult> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(
            "gaussian_denoise",
            format!("s must be > 0, got {s}"),
        ));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(
            "gaussian_denoise",
            format!("sigma must be > 0, got {sigma}"),
        ));
    }
    let denom = sigma + s;
    Ok(DenoiserResult {
        mean: (r * sigma + m * s) / denom,
        variance: sigma * s / denom,
    })
}

/// Posterior of a {0,1} coordinate with `P(x=1) = rho` observed through
/// `r = x + noise(s)`.
///
/// Only `Re(r)` enters: `|r - 1|^2 - |r|^2 = 1 - 2 Re(r)`, so the imaginary
/// part cancels exactly. Evaluated in log space.
pub fn binary_denoise(r: Complex64, s: f64, rho: f64) -> Result<DenoiserResult> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(
            "binary_denoise",
            format!("s must be > 0, got {s}"),
        ));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(
            "binary_denoise",
            format!("rho must be in (0,1), got {rho}"),
        ));
    }
    // log odds of x=0 against x=1
    let l = ((1.0 - rho) / rho).ln() + (1.0 - 2.0 * r.re) / s;
    let p1 = if l >= 0.0 {
        let e = (-l).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + l.exp())
    };
    Ok(DenoiserResult {
        mean: Complex64::new(p1, 0.0),
        variance: p1 * (1.0 - p1),
    })
}

/// Ratio `I1(kappa) / I0(kappa)` of modified Bessel functions of the first
/// kind, accurate to >= 10 significant digits for any finite `kappa >= 0`.
///
/// Below the crossover the exponentially scaled Chebyshev fits are used (the
/// `exp(kappa)` factors cancel in the ratio, so nothing overflows); above it
/// the large-argument expansion `1 - 1/(2k) - 1/(8k^2) - 1/(8k^3)` takes
/// over, whose truncation error at the crossover is ~3e-12 relative.
pub fn bessel_ratio(kappa: f64) -> Result<f64> {
    Ok(bessel_ratio_parts(kappa)?.0)
}

/// Crossover between scaled Chebyshev evaluation and the asymptotic series.
const RATIO_ASYMPTOTIC_CUTOFF: f64 = 500.0;

/// Returns `(R, 1 - R)`, with the complement computed without cancellation
/// in the large-`kappa` branch (where `1 - R` is tiny).
pub(crate) fn bessel_ratio_parts(kappa: f64) -> Result<(f64, f64)> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::domain(
            "bessel_ratio",
            format!("kappa must be finite and >= 0, got {kappa}"),
        ));
    }
    if kappa == 0.0 {
        return Ok((0.0, 1.0));
    }
    if kappa >= RATIO_ASYMPTOTIC_CUTOFF {
        let inv = 1.0 / kappa;
        let one_minus = 0.5 * inv + 0.125 * inv * inv + 0.125 * inv * inv * inv;
        // keep the ratio strictly below 1 even when 1 - one_minus rounds up
        let r = (1.0 - one_minus).min(1.0 - f64::EPSILON / 2.0);
        return Ok((r, one_minus));
    }
    let r = i1_scaled(kappa) / i0_scaled(kappa);
    Ok((r, 1.0 - r))
}

/// Chebyshev series evaluation (Clenshaw recurrence) over `[-1, 1]`.
fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

/// `exp(-x) I0(x)` for `x >= 0` (Cephes fits).
fn i0_scaled(x: f64) -> f64 {
    if x <= 8.0 {
        chbevl(x / 2.0 - 2.0, &I0_COEFFS_A)
    } else {
        chbevl(32.0 / x - 2.0, &I0_COEFFS_B) / x.sqrt()
    }
}

/// `exp(-x) I1(x)` for `x >= 0` (Cephes fits).
fn i1_scaled(x: f64) -> f64 {
    if x <= 8.0 {
        chbevl(x / 2.0 - 2.0, &I1_COEFFS_A) * x
    } else {
        chbevl(32.0 / x - 2.0, &I1_COEFFS_B) / x.sqrt()
    }
}

/// Magnitude channel `y = |z + w|`, `w ~ CN(0, delta)`.
///
/// With `t = z + w ~ CN(omega, v + delta)` pinned to the circle `|t| = y`,
/// the posterior phase is von Mises with concentration
/// `kappa = 2 y |omega| / (v + delta)`, so with `R = I1(kappa)/I0(kappa)`:
///
/// ```text
/// u_hat = y (omega/|omega|) R          (0 when omega = 0)
/// var_t = y^2 (1 - R^2)
/// g     = (u_hat - omega) / (v + delta)
/// v_z   = (v/(v+delta))^2 var_t + v delta / (v + delta)
/// dg    = (v_z / v - 1) / v
/// ```
///
/// `delta = 0` reduces to the noiseless magnitude channel. Note `dg` can be
/// positive here, unlike linear channels.
pub fn rician_channel(y: f64, omega: Complex64, v: f64, delta: f64) -> Result<ChannelResult> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(
            "rician_channel",
            format!("v must be > 0, got {v}"),
        ));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(
            "rician_channel",
            format!("y must be finite and >= 0, got {y}"),
        ));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::domain(
            "rician_channel",
            format!("delta must be finite and >= 0, got {delta}"),
        ));
    }
    let vt = v + delta;
    let a = omega.norm();
    let (u_hat, var_t) = if a == 0.0 || y == 0.0 {
        // symmetric limit: uniform posterior phase (omega = 0) or the
        // posterior pinned at the origin (y = 0)
        (Complex64::new(0.0, 0.0), y * y)
    } else {
        let kappa = 2.0 * y * a / vt;
        let (ratio, one_minus) = bessel_ratio_parts(kappa)?;
        // 1 - R^2 = (1 - R)(1 + R) avoids cancellation for large kappa
        (omega / a * (y * ratio), y * y * (one_minus * (1.0 + ratio)))
    };
    let shrink = v / vt;
    let g = (u_hat - omega) / vt;
    let v_z = shrink * shrink * var_t + v * delta / vt;
    let dg = (v_z / v - 1.0) / v;
    Ok(ChannelResult { g, dg })
}

/// Linear Gaussian channel `y = z + w`: `g = (y - omega)/(v + delta)`,
/// `dg = -1/(v + delta)`. Used for regression tests and plain CS problems.
pub fn awgn_channel(y: f64, omega: Complex64, v: f64, delta: f64) -> Result<ChannelResult> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(
            "awgn_channel",
            format!("v must be > 0, got {v}"),
        ));
    }
    let vt = v + delta;
    if !(vt > 0.0) {
        return Err(Error::domain(
            "awgn_channel",
            format!("v + delta must be > 0, got {vt}"),
        ));
    }
    Ok(ChannelResult {
        g: (Complex64::new(y, 0.0) - omega) / vt,
        dg: -1.0 / vt,
    })
}

impl crate::model::PriorSpec {
    /// Dispatches to the denoiser matching this prior.
    pub fn denoise(&self, r: Complex64, s: f64) -> Result<DenoiserResult> {
        match *self {
            crate::model::PriorSpec::Gaussian { mean, variance } => {
                gaussian_denoise(r, s, mean, variance)
            }
            crate::model::PriorSpec::Binary { rho } => binary_denoise(r, s, rho),
        }
    }
}

impl crate::model::ChannelSpec {
    /// Dispatches to the channel matching this spec.
    pub fn evaluate(&self, y: f64, omega: Complex64, v: f64) -> Result<ChannelResult> {
        match *self {
            crate::model::ChannelSpec::RicianMagnitude { delta } => {
                rician_channel(y, omega, v, delta)
            }
            crate::model::ChannelSpec::Awgn { delta } => awgn_channel(y, omega, v, delta),
        }
    }
}

// Chebyshev coefficients for the scaled modified Bessel functions, from the
// Cephes library (Moshier). A-series: interval [0, 8], argument x/2 - 2.
// B-series: interval [8, inf), argument 32/x - 2, value * sqrt(x).

const I0_COEFFS_A: [f64; 30] = [
    -4.415_341_646_479_339_5e-18,
    3.330_794_518_822_238_4e-17,
    -2.431_279_846_547_955e-16,
    1.715_391_285_555_133e-15,
    -1.168_533_287_799_345_1e-14,
    7.676_185_498_604_936e-14,
    -4.856_446_783_111_929e-13,
    2.955_052_663_129_64e-12,
    -1.726_826_291_441_556e-11,
    9.675_809_035_373_237e-11,
    -5.189_795_601_635_263e-10,
    2.659_823_724_682_386_6e-9,
    -1.300_025_009_986_248e-8,
    6.046_995_022_541_919e-8,
    -2.670_793_853_940_612e-7,
    1.117_387_539_120_103_7e-6,
    -4.416_738_358_458_750_5e-6,
    1.644_844_807_072_889_6e-5,
    -5.754_195_010_082_104e-5,
    1.885_028_850_958_416_5e-4,
    -5.763_755_745_385_824e-4,
    1.639_475_616_941_335_7e-3,
    -4.324_309_995_050_576e-3,
    1.054_646_039_459_499_8e-2,
    -2.373_741_480_589_947e-2,
    4.930_528_423_967_071e-2,
    -9.490_109_704_804_764e-2,
    1.716_209_015_222_087_7e-1,
    -3.046_826_723_431_984e-1,
    6.767_952_744_094_761e-1,
];

const I0_COEFFS_B: [f64; 25] = [
    -7.233_180_487_874_754e-18,
    -4.830_504_485_944_182e-18,
    4.465_621_420_296_76e-17,
    3.461_222_867_697_461e-17,
    -2.827_623_980_516_583_6e-16,
    -3.425_485_619_677_219e-16,
    1.772_560_133_056_526_3e-15,
    3.811_680_669_352_622_4e-15,
    -9.554_846_698_828_307e-15,
    -4.150_569_347_287_222e-14,
    1.540_086_217_521_41e-14,
    3.852_778_382_742_142_6e-13,
    7.180_124_451_383_666e-13,
    -1.794_178_531_506_806_2e-12,
    -1.321_581_184_044_771_3e-11,
    -3.149_916_527_963_241_6e-11,
    1.188_914_710_784_643_9e-11,
    4.940_602_388_224_97e-10,
    3.396_232_025_708_386_5e-9,
    2.266_668_990_498_178e-8,
    2.048_918_589_469_063_8e-7,
    2.891_370_520_834_756_7e-6,
    6.889_758_346_916_825e-5,
    3.369_116_478_255_694_3e-3,
    8.044_904_110_141_088e-1,
];

const I1_COEFFS_A: [f64; 29] = [
    2.777_914_112_761_046_4e-18,
    -2.111_421_214_358_166e-17,
    1.553_631_957_736_200_5e-16,
    -1.105_596_947_735_386_2e-15,
    7.600_684_294_735_408e-15,
    -5.042_185_504_727_912e-14,
    3.223_793_365_945_575e-13,
    -1.983_974_397_764_943_6e-12,
    1.173_618_629_889_090_1e-11,
    -6.663_489_723_502_027e-11,
    3.625_590_281_552_117e-10,
    -1.887_249_751_722_829_4e-9,
    9.381_537_386_495_773e-9,
    -4.445_059_128_796_328e-8,
    2.003_294_753_552_135_3e-7,
    -8.568_720_264_695_455e-7,
    3.470_251_308_137_678_5e-6,
    -1.327_316_365_603_943_6e-5,
    4.781_565_107_550_054e-5,
    -1.617_608_158_258_967_4e-4,
    5.122_859_561_685_758e-4,
    -1.513_572_450_631_253_2e-3,
    4.156_422_944_312_888e-3,
    -1.056_408_489_462_619_7e-2,
    2.472_644_903_062_651_6e-2,
    -5.294_598_120_809_499e-2,
    1.026_436_586_898_471e-1,
    -1.764_165_183_578_340_6e-1,
    2.525_871_864_436_336_5e-1,
];

const I1_COEFFS_B: [f64; 25] = [
    7.517_296_310_842_105e-18,
    4.414_348_323_071_708e-18,
    -4.650_305_368_489_358_6e-17,
    -3.209_525_921_993_424e-17,
    2.962_628_997_645_95e-16,
    3.308_202_310_920_928_5e-16,
    -1.880_354_775_510_782_5e-15,
    -3.814_403_072_437_007_5e-15,
    1.042_027_698_412_880_2e-14,
    4.272_440_016_711_951e-14,
    -2.101_541_842_772_664_3e-14,
    -4.083_551_111_092_197_4e-13,
    -7.198_551_776_245_908e-13,
    2.035_628_544_147_089_6e-12,
    1.412_580_743_661_378_2e-11,
    3.252_603_583_015_488_4e-11,
    -1.897_495_812_350_541_3e-11,
    -5.589_743_462_196_584e-10,
    -3.835_380_385_964_237e-9,
    -2.631_468_846_889_519_6e-8,
    -2.512_236_237_870_209e-7,
    -3.882_564_808_877_691e-6,
    -1.105_889_387_626_237_1e-4,
    -9.761_097_491_361_469e-3,
    7.785_762_350_182_801e-1,
];
