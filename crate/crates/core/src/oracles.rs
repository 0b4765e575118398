//! Brute-force reference computations used to validate the closed forms in
//! [`crate::channels`]. Everything here is deliberately independent of the
//! implementation paths it checks: Bessel ratios come from the defining
//! power series or a continued fraction, posteriors from quadrature or
//! importance sampling. These run in tests and in the CLI selftest.

use crate::channels::{ChannelResult, DenoiserResult};
use crate::model::PriorSpec;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `I1(k)/I0(k)` from the defining power series. Both series overflow past
/// `k ~ 700`; callers stay well below that.
pub fn bessel_ratio_series(kappa: f64) -> f64 {
    assert!((0.0..600.0).contains(&kappa), "series oracle domain");
    let q = kappa * kappa / 4.0;
    // I0 = sum t_k, t_0 = 1, t_{k+1} = t_k q / (k+1)^2
    let mut t = 1.0;
    let mut i0 = 1.0;
    let mut k = 0.0;
    while t > 1e-20 * i0 {
        k += 1.0;
        t *= q / (k * k);
        i0 += t;
    }
    // I1 = (k/2) sum u_k, u_0 = 1, u_{k+1} = u_k q / ((k+1)(k+2))
    let mut u = 1.0;
    let mut i1 = 1.0;
    let mut k = 0.0;
    while u > 1e-20 * i1 {
        k += 1.0;
        u *= q / (k * (k + 1.0));
        i1 += u;
    }
    (kappa / 2.0) * i1 / i0
}

/// `I1(k)/I0(k)` by backward evaluation of the continued fraction implied by
/// the three-term recurrence `I_{v-1} - I_{v+1} = (2v/k) I_v`. Converges for
/// any `k > 0` once the start depth exceeds the argument.
pub fn bessel_ratio_continued_fraction(kappa: f64) -> f64 {
    assert!(kappa > 0.0 && kappa.is_finite());
    let depth = (kappa + 40.0 * kappa.sqrt() + 120.0) as usize;
    let mut r = 0.0;
    for nu in (1..=depth).rev() {
        r = 1.0 / (2.0 * nu as f64 / kappa + r);
    }
    r
}

/// `ln(exp(-x) I0(x))` for `x >= 0`, via the power series below `x = 40` and
/// the large-argument expansion above it.
pub fn log_i0_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 40.0 {
        let q = x * x / 4.0;
        let mut t = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        while t > 1e-20 * sum {
            k += 1.0;
            t *= q / (k * k);
            sum += t;
        }
        sum.ln() - x
    } else {
        let inv = 1.0 / x;
        let corr = inv
            * (0.125
                + inv
                    * (9.0 / 128.0
                        + inv * (75.0 / 1024.0 + inv * (11_025.0 / 98_304.0 + inv * (893_025.0 / 3_932_160.0)))));
        -0.5 * (2.0 * std::f64::consts::PI * x).ln() + corr.ln_1p()
    }
}

/// Posterior mean/variance of one coordinate by brute force: a 2D trapezoid
/// over the complex plane for the Gaussian prior (evaluated through its exact
/// re/im factorization), the exact two-point sum for the binary prior.
pub fn denoiser_oracle(prior: &PriorSpec, r: Complex64, s: f64) -> Result<DenoiserResult> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Oracle(format!("denoiser oracle needs s > 0, got {s}")));
    }
    match *prior {
        PriorSpec::Gaussian { mean, variance } => {
            if !(variance > 0.0) {
                return Err(Error::Oracle("gaussian oracle needs sigma > 0".into()));
            }
            let (m_re, v_re) = axis_posterior(r.re, s, mean.re, variance)?;
            let (m_im, v_im) = axis_posterior(r.im, s, mean.im, variance)?;
            Ok(DenoiserResult {
                mean: Complex64::new(m_re, m_im),
                variance: v_re + v_im,
            })
        }
        PriorSpec::Binary { rho } => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Oracle("binary oracle needs rho in (0,1)".into()));
            }
            // two-point posterior over x in {0, 1}
            let l0 = (1.0 - rho).ln() - r.norm_sqr() / s;
            let l1 = rho.ln() - ((r - Complex64::new(1.0, 0.0)).norm_sqr()) / s;
            let m = l0.max(l1);
            let w0 = (l0 - m).exp();
            let w1 = (l1 - m).exp();
            let p1 = w1 / (w0 + w1);
            Ok(DenoiserResult {
                mean: Complex64::new(p1, 0.0),
                variance: p1 - p1 * p1,
            })
        }
    }
}

/// 1D posterior moments for one real axis of the Gaussian-prior update;
/// the circular-Gaussian weights factor exactly across axes.
fn axis_posterior(r: f64, s: f64, m: f64, sigma: f64) -> Result<(f64, f64)> {
    let lo = (r - 9.0 * s.sqrt()).min(m - 9.0 * sigma.sqrt());
    let hi = (r + 9.0 * s.sqrt()).max(m + 9.0 * sigma.sqrt());
    let n = 6000usize;
    let h = (hi - lo) / n as f64;
    let mut w_sum = 0.0;
    let mut t_sum = 0.0;
    let mut t2_sum = 0.0;
    // peak the exponent first so weights stay in range
    let mut e_max = f64::NEG_INFINITY;
    for k in 0..=n {
        let t = lo + h * k as f64;
        let e = -(t - r) * (t - r) / s - (t - m) * (t - m) / sigma;
        if e > e_max {
            e_max = e;
        }
    }
    for k in 0..=n {
        let t = lo + h * k as f64;
        let e = -(t - r) * (t - r) / s - (t - m) * (t - m) / sigma;
        let mut w = (e - e_max).exp();
        if k == 0 || k == n {
            w *= 0.5;
        }
        w_sum += w;
        t_sum += w * t;
        t2_sum += w * t * t;
    }
    if !(w_sum > 0.0) || !w_sum.is_finite() {
        return Err(Error::Oracle("denoiser quadrature collapsed".into()));
    }
    let mean = t_sum / w_sum;
    let var = t2_sum / w_sum - mean * mean;
    Ok((mean, var))
}

/// Noiseless-magnitude posterior by 1D angular quadrature on the circle
/// `|z| = y`: weights `exp(-|y e^{i phi} - omega|^2 / v)`.
pub fn channel_oracle_circle(y: f64, omega: Complex64, v: f64) -> Result<ChannelResult> {
    if !(v > 0.0) || y < 0.0 {
        return Err(Error::Oracle("circle oracle needs v > 0, y >= 0".into()));
    }
    let a = omega.norm();
    let n = 1usize << 14;
    let kappa = 2.0 * y * a / v;
    let mut w_sum = 0.0;
    let mut c_sum = 0.0;
    // rotated frame: omega real >= 0, weight exp(kappa (cos phi - 1))
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let w = (kappa * (phi.cos() - 1.0)).exp();
        w_sum += w;
        c_sum += w * phi.cos();
    }
    let mean_rot = y * c_sum / w_sum;
    let z_hat = if a == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        omega / a * mean_rot
    };
    let v_z = y * y - z_hat.norm_sqr();
    Ok(ChannelResult {
        g: (z_hat - omega) / v,
        dg: (v_z / v - 1.0) / v,
    })
}

/// Noisy-magnitude posterior by brute-force 2D trapezoid quadrature of
/// `p(z) ∝ CN(z; omega, v) · Rice(y; |z|, delta)` over the complex plane.
///
/// Cartesian coordinates on purpose: the integrand is smooth in
/// `(Re z, Im z)` (the Rice factor is an entire function of `|z|^2`), so the
/// trapezoid converges spectrally; a polar grid would put a Jacobian kink at
/// the origin and stall at O(h^2) whenever the posterior reaches it.
pub fn channel_oracle_quadrature(
    y: f64,
    omega: Complex64,
    v: f64,
    delta: f64,
) -> Result<ChannelResult> {
    if delta == 0.0 {
        return channel_oracle_circle(y, omega, v);
    }
    if !(v > 0.0) || !(delta > 0.0) || y < 0.0 {
        return Err(Error::Oracle("quadrature oracle domain".into()));
    }
    // the posterior lives where the prior ball and the likelihood ring overlap
    let ring = y + 9.0 * delta.sqrt();
    let prior = 9.0 * v.sqrt();
    let axis_window = |c: f64| -> (f64, f64) {
        let lo = (c - prior).max(-ring);
        let hi = (c + prior).min(ring);
        if lo < hi {
            (lo, hi)
        } else {
            ((c - prior).min(-ring), (c + prior).max(ring))
        }
    };
    let (re_lo, re_hi) = axis_window(omega.re);
    let (im_lo, im_hi) = axis_window(omega.im);
    let min_std = (v.min(delta) / 2.0).sqrt();
    let points = |lo: f64, hi: f64| -> usize {
        (((hi - lo) / (min_std / 6.0)).ceil() as usize).clamp(200, 2400)
    };
    let n_re = points(re_lo, re_hi);
    let n_im = points(im_lo, im_hi);
    let h_re = (re_hi - re_lo) / n_re as f64;
    let h_im = (im_hi - im_lo) / n_im as f64;

    let log_w = |zr: f64, zi: f64| -> f64 {
        let a = (zr * zr + zi * zi).sqrt();
        let dr = zr - omega.re;
        let di = zi - omega.im;
        -(dr * dr + di * di) / v - (y - a) * (y - a) / delta
            + log_i0_scaled(2.0 * y * a / delta)
    };

    // coarse pass for the exponent peak, then the weighted moments
    let mut e_max = f64::NEG_INFINITY;
    for ir in 0..=48 {
        let zr = re_lo + (re_hi - re_lo) * ir as f64 / 48.0;
        for ii in 0..=48 {
            let zi = im_lo + (im_hi - im_lo) * ii as f64 / 48.0;
            e_max = e_max.max(log_w(zr, zi));
        }
    }
    let mut w_sum = 0.0;
    let mut re_sum = 0.0;
    let mut im_sum = 0.0;
    let mut a2_sum = 0.0;
    for ir in 0..=n_re {
        let zr = re_lo + h_re * ir as f64;
        let edge_r = if ir == 0 || ir == n_re { 0.5 } else { 1.0 };
        for ii in 0..=n_im {
            let zi = im_lo + h_im * ii as f64;
            let edge = if ii == 0 || ii == n_im { 0.5 * edge_r } else { edge_r };
            let w = (log_w(zr, zi) - e_max).exp() * edge;
            w_sum += w;
            re_sum += w * zr;
            im_sum += w * zi;
            a2_sum += w * (zr * zr + zi * zi);
        }
    }
    if !(w_sum > 0.0) || !w_sum.is_finite() {
        return Err(Error::Oracle("quadrature collapsed".into()));
    }
    let z_hat = Complex64::new(re_sum / w_sum, im_sum / w_sum);
    let v_z = a2_sum / w_sum - z_hat.norm_sqr();
    Ok(ChannelResult {
        g: (z_hat - omega) / v,
        dg: (v_z / v - 1.0) / v,
    })
}

/// Monte-Carlo channel estimate with batch-means standard errors.
#[derive(Debug, Clone, Copy)]
pub struct McChannelEstimate {
    pub g: Complex64,
    pub dg: f64,
    pub se_g_re: f64,
    pub se_g_im: f64,
    pub se_dg: f64,
}

/// Noisy-magnitude posterior by self-normalized importance sampling with the
/// prior `CN(omega, v)` as proposal and the Rice likelihood as weight.
/// The point estimate uses every sample; standard errors come from a
/// leave-one-batch-out jackknife, which handles the ratio-estimator
/// nonlinearity without the small-batch bias of plain batch means.
/// `delta = 0` falls back to the deterministic circle quadrature.
pub fn channel_oracle_mc(
    y: f64,
    omega: Complex64,
    v: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McChannelEstimate> {
    if delta == 0.0 {
        let c = channel_oracle_circle(y, omega, v)?;
        return Ok(McChannelEstimate {
            g: c.g,
            dg: c.dg,
            se_g_re: 0.0,
            se_g_im: 0.0,
            se_dg: 0.0,
        });
    }
    if !(v > 0.0) || !(delta > 0.0) || y < 0.0 {
        return Err(Error::Oracle("mc oracle domain".into()));
    }
    const BATCHES: usize = 50;
    let per_batch = (n_samples / BATCHES).max(50);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (v / 2.0).sqrt();
    // the shared log-weight shift must not depend on the draws; the mode of
    // the Rice factor over the support is a safe anchor
    let lw_shift = log_i0_scaled(2.0 * y * (omega.norm() + 6.0 * sd) / delta);
    // per-batch sufficient statistics (w, w z, w |z|^2)
    let mut stats = Vec::with_capacity(BATCHES);
    for _ in 0..BATCHES {
        let mut w_sum = 0.0;
        let mut z_sum = Complex64::new(0.0, 0.0);
        let mut z2_sum = 0.0;
        for _ in 0..per_batch {
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            let z = omega + Complex64::new(sd * n1, sd * n2);
            let a = z.norm();
            let lw = -(y - a) * (y - a) / delta + log_i0_scaled(2.0 * y * a / delta) - lw_shift;
            let w = lw.exp();
            w_sum += w;
            z_sum += z * w;
            z2_sum += w * z.norm_sqr();
        }
        stats.push((w_sum, z_sum, z2_sum));
    }
    let total: (f64, Complex64, f64) = stats.iter().fold(
        (0.0, Complex64::new(0.0, 0.0), 0.0),
        |acc, s| (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2),
    );
    if !(total.0 > 0.0) || !total.0.is_finite() {
        return Err(Error::Oracle("importance weights collapsed".into()));
    }
    let estimate = |w: f64, zs: Complex64, z2: f64| -> (f64, f64, f64) {
        let z_hat = zs / w;
        let v_z = z2 / w - z_hat.norm_sqr();
        let g = (z_hat - omega) / v;
        (g.re, g.im, (v_z / v - 1.0) / v)
    };
    let point = estimate(total.0, total.1, total.2);
    // leave-one-batch-out jackknife
    let mut loo = Vec::with_capacity(BATCHES);
    for s in &stats {
        let w = total.0 - s.0;
        if !(w > 0.0) {
            return Err(Error::Oracle("importance weights collapsed".into()));
        }
        loo.push(estimate(w, total.1 - s.1, total.2 - s.2));
    }
    let jack_se = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| -> f64 {
        let b = loo.len() as f64;
        let mean = loo.iter().map(|t| pick(t)).sum::<f64>() / b;
        let ss = loo.iter().map(|t| (pick(t) - mean).powi(2)).sum::<f64>();
        ((b - 1.0) / b * ss).sqrt()
    };
    Ok(McChannelEstimate {
        g: Complex64::new(point.0, point.1),
        dg: point.2,
        se_g_re: jack_se(&|t| t.0),
        se_g_im: jack_se(&|t| t.1),
        se_dg: jack_se(&|t| t.2),
    })
}

/// Unified entry point: deterministic circle quadrature at `delta = 0`,
/// importance sampling otherwise.
pub fn channel_oracle(
    y: f64,
    omega: Complex64,
    v: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McChannelEstimate> {
    channel_oracle_mc(y, omega, v, delta, n_samples, seed)
}
