// Scratch convergence probe, run by hand:
//   cargo test -p prsamp-core --test probe -- --ignored --nocapture

use prsamp_core::model::SolverConfig;
use prsamp_core::solver::solve_with_restarts;
use prsamp_core::synth::{
    gen_matrix, gen_signal, nmse_phase_aligned, synthesize, MatrixEnsemble, SignalEnsemble,
};

fn calib_nmse_full(
    n: usize,
    delta: f64,
    snr: f64,
    t_max: usize,
    alpha: f64,
    restarts: usize,
    seed: u64,
    damp_output: bool,
) -> f64 {
    let m = (delta * n as f64).round() as usize;
    let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, seed).unwrap();
    let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, seed + 1).unwrap();
    let inst = synthesize(h, &x, snr, seed + 2).unwrap();
    let mut cfg = SolverConfig::calibration(n, inst.delta);
    cfg.t_max = t_max;
    cfg.alpha = alpha;
    cfg.restarts = restarts;
    cfg.seed = seed * 1000;
    cfg.damp_output = damp_output;
    let (est, _) = solve_with_restarts(&inst, &cfg).unwrap();
    nmse_phase_aligned(inst.ground_truth.as_ref().unwrap(), &est).unwrap()
}

fn calib_nmse(n: usize, delta: f64, snr: f64, t_max: usize, alpha: f64, restarts: usize, seed: u64) -> f64 {
    calib_nmse_full(n, delta, snr, t_max, alpha, restarts, seed, false)
}

#[test]
#[ignore]
fn probe_damp_output() {
    for (n, t_max) in [(64usize, 64usize), (64, 128), (128, 64), (256, 64), (256, 128)] {
        for alpha in [0.9, 0.95] {
            let seeds = if n >= 256 { 8 } else { 12 };
            let mut hits = 0;
            let start = std::time::Instant::now();
            for seed in 0..seeds {
                if calib_nmse_full(n, 4.0, 30.0, t_max, alpha, 1, 700 + seed, true) < 0.2 {
                    hits += 1;
                }
            }
            println!(
                "damp_output n={n} t_max={t_max} alpha={alpha}: success {hits}/{seeds} ({:.1}s)",
                start.elapsed().as_secs_f64()
            );
        }
    }
}

#[test]
#[ignore]
fn probe_trajectory() {
    use prsamp_core::model::InitSpec;
    use prsamp_core::solver::{initialize, median_damp_2d, output_step, sweep, normalized_residual};
    use prsamp_core::model::ComplexSignal;
    use rand::SeedableRng;

    let n = 64usize;
    let m = 256usize;
    for seed in [10u64, 12, 14] {
        let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, seed).unwrap();
        let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, seed + 1).unwrap();
        let inst = synthesize(h, &x, 30.0, seed + 2).unwrap();
        let mut cfg = SolverConfig::calibration(n, inst.delta);
        cfg.t_max = 256;
        cfg.x0 = InitSpec::Random;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 1000);
        let mut state = initialize(&inst, &cfg, &mut rng).unwrap();
        println!("--- seed {seed}");
        for t in 1..=cfg.t_max {
            output_step(&mut state, &inst, &cfg).unwrap();
            sweep(&mut state, &inst, &cfg, &mut rng).unwrap();
            median_damp_2d(&mut state, &cfg).unwrap();
            if t % 16 == 0 || t <= 4 {
                let est = ComplexSignal::new(state.x_a.clone()).unwrap();
                let nr = normalized_residual(&inst, &est).unwrap();
                let nm = nmse_phase_aligned(inst.ground_truth.as_ref().unwrap(), &est).unwrap();
                let xv_mean: f64 = state.x_v.iter().sum::<f64>() / n as f64;
                let xa_pow: f64 = state.x_a.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
                println!("  t={t:3} nr={nr:.3e} nmse={nm:.3e} mean_xv={xv_mean:.3e} mean|xa|^2={xa_pow:.3e}");
            }
        }
    }
}

#[test]
#[ignore]
fn probe_calibration() {
    for (n, t_max) in [(32usize, 32usize), (32, 128), (64, 64), (64, 256)] {
        for alpha in [0.9, 0.8] {
            let mut nmses: Vec<f64> = (0..6)
                .map(|s| calib_nmse(n, 4.0, 30.0, t_max, alpha, 1, 10 + s))
                .collect();
            nmses.sort_by(f64::total_cmp);
            println!(
                "n={n:3} t_max={t_max:3} alpha={alpha}: nmse per seed = {:?}",
                nmses.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
#[ignore]
fn probe_success_rates() {
    let n = 64;
    for (t_max, alpha) in [(128usize, 0.9), (192, 0.9), (256, 0.9), (192, 0.85), (128, 0.8)] {
        let mut hits = 0;
        let total = 20;
        let start = std::time::Instant::now();
        for seed in 0..total {
            let nmse = calib_nmse(n, 4.0, 30.0, t_max, alpha, 1, 100 + seed);
            if nmse < 0.2 {
                hits += 1;
            }
        }
        println!(
            "n={n} t_max={t_max} alpha={alpha}: success {hits}/{total} ({:.2}s total)",
            start.elapsed().as_secs_f64()
        );
    }
    // delta = 1 must fail essentially always
    let mut hits = 0;
    for seed in 0..20 {
        if calib_nmse(n, 1.0, 30.0, 192, 0.9, 1, 300 + seed) < 0.2 {
            hits += 1;
        }
    }
    println!("delta=1 control: success {hits}/20 (want 0)");
}

#[test]
#[ignore]
fn probe_awgn_reduction() {
    use num_complex::Complex64;
    use prsamp_core::model::{ChannelSpec, InitSpec, MeasurementMatrix, MatrixKind, ProblemInstance};
    use prsamp_core::solver::solve_once;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    let n = 128;
    let m = 256;
    let mut nmses = vec![];
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9000 + seed);
        let sd = (1.0 / n as f64).sqrt();
        let entries: Vec<Complex64> = (0..m * n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(sd * re, 0.0)
            })
            .collect();
        let h = MeasurementMatrix::new(m, n, entries, MatrixKind::Custom).unwrap();
        let x_vals: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, 0.0)
            })
            .collect();
        let x = prsamp_core::model::ComplexSignal::new(x_vals).unwrap();
        let z = h.matvec(&x.values).unwrap();
        let p = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / m as f64;
        let delta = p * 1e-4; // 40 dB
        let y: Vec<f64> = z
            .iter()
            .map(|zi| {
                let w: f64 = StandardNormal.sample(&mut rng);
                zi.re + (delta).sqrt() * w
            })
            .collect();
        let inst = ProblemInstance::new(h, y, delta, Some(x.clone())).unwrap();
        let mut cfg = prsamp_core::model::SolverConfig::calibration(n, delta);
        cfg.alpha = 0.0;
        cfg.t_max = 50;
        cfg.output_channel = ChannelSpec::Awgn { delta };
        cfg.x0 = InitSpec::Constant(Complex64::new(0.0, 0.0));
        let (est, rec) = solve_once(&inst, &cfg, seed).unwrap();
        let nmse = nmse_phase_aligned(&x, &est).unwrap();
        nmses.push(nmse);
        if seed < 5 {
            println!("awgn seed {seed}: nmse={nmse:.3e} iters={} converged={}", rec.iterations_used, rec.converged);
        }
    }
    nmses.sort_by(f64::total_cmp);
    println!("awgn median nmse = {:.3e} (want < 1e-3)", nmses[10]);
}

#[test]
#[ignore]
fn probe_parallel_gamp_reference() {
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    // textbook complex GAMP, parallel updates, damping on (g, dg, r, s)
    for (n, t_max, alpha) in [(64usize, 256usize, 0.9), (256, 256, 0.9)] {
        let m = 4 * n;
        let mut hits = 0;
        let seeds = 8u64;
        for seed in 0..seeds {
            let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, 700 + seed).unwrap();
            let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, 701 + seed).unwrap();
            let inst = synthesize(h, &x, 30.0, 702 + seed).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7000 + seed);
            let sd = (0.5f64).sqrt();
            let mut x_a: Vec<Complex64> = (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(sd * re, sd * im)
                })
                .collect();
            let mut x_v = vec![0.5f64; n];
            let mut g = vec![Complex64::new(0.0, 0.0); m];
            let mut dg = vec![0.0f64; m];
            let mut r = x_a.clone();
            let mut s = x_v.clone();
            for _t in 0..t_max {
                // output
                let mut v_new = vec![0.0; m];
                let mut omega = vec![Complex64::new(0.0, 0.0); m];
                for mu in 0..m {
                    let row = inst.matrix.row(mu);
                    let row2 = inst.matrix.abs2_row(mu);
                    let mut vv = 0.0;
                    let mut hx = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        vv += row2[i] * x_v[i];
                        hx += row[i] * x_a[i];
                    }
                    vv = vv.max(1e-12);
                    v_new[mu] = vv;
                    omega[mu] = hx - g[mu] * vv;
                }
                for mu in 0..m {
                    let ch = prsamp_core::channels::rician_channel(
                        inst.y[mu],
                        omega[mu],
                        v_new[mu],
                        inst.delta,
                    )
                    .unwrap();
                    g[mu] = g[mu] * alpha + ch.g * (1.0 - alpha);
                    dg[mu] = dg[mu] * alpha + ch.dg * (1.0 - alpha);
                }
                // input (parallel)
                for i in 0..n {
                    let col = inst.matrix.col(i);
                    let col2 = inst.matrix.abs2_col(i);
                    let mut denom = 0.0;
                    let mut proj = Complex64::new(0.0, 0.0);
                    for mu in 0..m {
                        denom -= col2[mu] * dg[mu];
                        proj += col[mu].conj() * g[mu];
                    }
                    let mut s_new = 1.0 / denom;
                    if !(denom > 0.0) || !s_new.is_finite() || s_new <= 0.0 {
                        s_new = 0.5;
                    }
                    let r_new = x_a[i] + proj * s_new;
                    s[i] = alpha * s[i] + (1.0 - alpha) * s_new;
                    r[i] = r[i] * alpha + r_new * (1.0 - alpha);
                    let d = prsamp_core::channels::gaussian_denoise(
                        r[i],
                        s[i],
                        Complex64::new(0.0, 0.0),
                        1.0,
                    )
                    .unwrap();
                    x_a[i] = d.mean;
                    x_v[i] = d.variance.max(1e-12);
                }
            }
            let est = prsamp_core::model::ComplexSignal::new(x_a.clone()).unwrap();
            let nmse = nmse_phase_aligned(inst.ground_truth.as_ref().unwrap(), &est).unwrap();
            if seed < 4 {
                println!("parallel gamp n={n} seed {seed}: nmse={nmse:.3e}");
            }
            if nmse < 0.2 {
                hits += 1;
            }
        }
        println!("parallel gamp n={n} t_max={t_max} alpha={alpha}: success {hits}/{seeds}");
    }
}

#[test]
#[ignore]
fn probe_size_scaling() {
    for (n, t_max, seeds) in [(128usize, 128usize, 12u64), (256, 64, 8), (256, 128, 8)] {
        let mut hits = 0;
        let start = std::time::Instant::now();
        for seed in 0..seeds {
            let nmse = calib_nmse(n, 4.0, 30.0, t_max, 0.9, 1, 500 + seed);
            if nmse < 0.2 {
                hits += 1;
            }
        }
        println!(
            "n={n} t_max={t_max}: success {hits}/{seeds} ({:.1}s)",
            start.elapsed().as_secs_f64()
        );
    }
}

fn calib_nmse_branches(
    n: usize,
    delta: f64,
    t_max: usize,
    alpha: f64,
    seed: u64,
) -> (f64, f64) {
    use prsamp_core::model::ComplexSignal;
    let m = (delta * n as f64).round() as usize;
    let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, seed).unwrap();
    let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, seed + 1).unwrap();
    let inst = synthesize(h, &x, 30.0, seed + 2).unwrap();
    let mut cfg = SolverConfig::calibration(n, inst.delta);
    cfg.t_max = t_max;
    cfg.alpha = alpha;
    cfg.seed = seed * 1000;
    let (est, _) = solve_with_restarts(&inst, &cfg).unwrap();
    let truth = inst.ground_truth.as_ref().unwrap();
    let direct = nmse_phase_aligned(truth, &est).unwrap();
    let conj_est = ComplexSignal::new(est.values.iter().map(|z| z.conj()).collect()).unwrap();
    let conjugate = nmse_phase_aligned(truth, &conj_est).unwrap();
    (direct, conjugate)
}

// hand-rolled swept loop with extra experimental knobs
fn swept_experiment(
    n: usize,
    m: usize,
    seed: u64,
    t_max: usize,
    alpha: f64,
    damp_xa: bool,
    v_kick: f64, // variances below v_kick * v0 get reset to v0
) -> (f64, f64) {
    use num_complex::Complex64;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use prsamp_core::model::ComplexSignal;

    let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, seed).unwrap();
    let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, seed + 1).unwrap();
    let inst = synthesize(h, &x, 30.0, seed + 2).unwrap();
    let truth = inst.ground_truth.as_ref().unwrap();
    let delta = inst.delta;
    let v0 = 0.5;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 7919);
    let sd = (0.5f64).sqrt();
    let mut x_a: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(sd * re, sd * im)
        })
        .collect();
    let mut x_v = vec![0.5f64; n];
    let mut g = vec![Complex64::new(0.0, 0.0); m];
    let mut dg = vec![0.0f64; m];
    let mut r = x_a.clone();
    let mut s = x_v.clone();
    let clamp = |v: f64| -> f64 {
        if !(v > 0.0) || !v.is_finite() || v < v_kick * v0 {
            v0
        } else {
            v
        }
    };
    for _t in 0..t_max {
        // output step
        let mut v_field = vec![0.0; m];
        let mut omega = vec![Complex64::new(0.0, 0.0); m];
        for mu in 0..m {
            let row = inst.matrix.row(mu);
            let row2 = inst.matrix.abs2_row(mu);
            let mut vv = 0.0;
            let mut hx = Complex64::new(0.0, 0.0);
            for i in 0..n {
                vv += row2[i] * x_v[i];
                hx += row[i] * x_a[i];
            }
            vv = clamp(vv);
            v_field[mu] = vv;
            omega[mu] = hx - g[mu] * vv;
            let ch =
                prsamp_core::channels::rician_channel(inst.y[mu], omega[mu], vv, delta).unwrap();
            g[mu] = ch.g;
            dg[mu] = ch.dg;
        }
        // swept input step
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &i in &order {
            let col = inst.matrix.col(i);
            let col2 = inst.matrix.abs2_col(i);
            let mut denom = 0.0;
            let mut proj = Complex64::new(0.0, 0.0);
            for mu in 0..m {
                if col2[mu] != 0.0 {
                    denom -= col2[mu] * dg[mu];
                    proj += col[mu].conj() * g[mu];
                }
            }
            let mut s_new = 1.0 / denom;
            if !(denom > 0.0) || !s_new.is_finite() || s_new <= 0.0 {
                s_new = v0;
            }
            let r_new = x_a[i] + proj * s_new;
            s[i] = clamp(alpha * s[i] + (1.0 - alpha) * s_new);
            r[i] = r[i] * alpha + r_new * (1.0 - alpha);
            let d = prsamp_core::channels::gaussian_denoise(
                r[i],
                s[i],
                Complex64::new(0.0, 0.0),
                1.0,
            )
            .unwrap();
            let a_new = if damp_xa {
                x_a[i] * alpha + d.mean * (1.0 - alpha)
            } else {
                d.mean
            };
            let v_new = clamp(if damp_xa {
                alpha * x_v[i] + (1.0 - alpha) * d.variance
            } else {
                d.variance
            });
            let da = a_new - x_a[i];
            let dv = v_new - x_v[i];
            for mu in 0..m {
                if col2[mu] == 0.0 {
                    continue;
                }
                v_field[mu] = clamp(v_field[mu] + col2[mu] * dv);
                omega[mu] += col[mu] * da - g[mu] * (col2[mu] * dv);
                let ch = prsamp_core::channels::rician_channel(
                    inst.y[mu],
                    omega[mu],
                    v_field[mu],
                    delta,
                )
                .unwrap();
                g[mu] = ch.g;
                dg[mu] = ch.dg;
            }
            x_a[i] = a_new;
            x_v[i] = v_new;
        }
    }
    let est = ComplexSignal::new(x_a).unwrap();
    let d = nmse_phase_aligned(truth, &est).unwrap();
    let cj = ComplexSignal::new(est.values.iter().map(|z| z.conj()).collect()).unwrap();
    let c = nmse_phase_aligned(truth, &cj).unwrap();
    (d, c)
}

#[test]
#[ignore]
fn probe_stabilizers() {
    for (label, alpha, damp_xa, v_kick, t_max) in [
        ("baseline a=.9", 0.9, false, 0.0, 256usize),
        ("alpha=.95", 0.95, false, 0.0, 384),
        ("alpha=.98", 0.98, false, 0.0, 512),
        ("damp_xa a=.9", 0.9, true, 0.0, 256),
        ("vkick 1e-3 a=.9", 0.9, false, 1e-3, 256),
        ("vkick 1e-2 a=.9", 0.9, false, 1e-2, 256),
        ("damp_xa+vkick1e-3", 0.9, true, 1e-3, 256),
    ] {
        for n in [128usize, 256] {
            let m = 4 * n;
            let seeds = 8u64;
            let (mut ok, mut fails) = (0, 0);
            for seed in 0..seeds {
                let (d, c) = swept_experiment(n, m, 40 + seed, t_max, alpha, damp_xa, v_kick);
                if d.min(c) < 0.2 {
                    ok += 1;
                } else {
                    fails += 1;
                }
            }
            println!("{label:20} n={n:3}: valid {ok}/{}", ok + fails);
        }
    }
}

#[test]
#[ignore]
fn probe_recovery_scenario() {
    use prsamp_core::model::PriorSpec;
    use prsamp_core::synth::binarize;

    // binary signal, complex matrix: exact recovery after thresholding
    for (m, t_max, alpha) in [(250usize, 64usize, 0.2), (250, 128, 0.2), (200, 64, 0.2), (256, 64, 0.2)] {
        let n = 256;
        let k = 50;
        let mut exact = 0;
        let mut corr_ok = 0;
        let seeds = 10u64;
        let start = std::time::Instant::now();
        for seed in 0..seeds {
            let h = gen_matrix(MatrixEnsemble::ComplexGaussian, m, n, 7700 + seed).unwrap();
            let x = gen_signal(SignalEnsemble::Binary { k }, n, 7800 + seed).unwrap();
            let inst = synthesize(h, &x, 30.0, 7900 + seed).unwrap();
            let mut cfg = SolverConfig::recovery(n, inst.delta, k as f64 / n as f64);
            cfg.t_max = t_max;
            cfg.alpha = alpha;
            cfg.restarts = 1;
            cfg.seed = seed * 31 + 5;
            let (est, _) = solve_with_restarts(&inst, &cfg).unwrap();
            let truth = inst.ground_truth.as_ref().unwrap();
            if binarize(&est, 0.5) == binarize(truth, 0.5) {
                exact += 1;
            }
            if prsamp_core::synth::correlation(truth, &est).map(|c| c.abs()).unwrap_or(0.0) >= 0.8 {
                corr_ok += 1;
            }
        }
        println!(
            "recovery m={m} t_max={t_max} alpha={alpha}: exact {exact}/{seeds}, corr>=0.8 {corr_ok}/{seeds} ({:.0}s)",
            start.elapsed().as_secs_f64()
        );
    }
}

#[test]
#[ignore]
fn probe_recovery_trace() {
    use num_complex::Complex64;
    use prsamp_core::model::{ComplexSignal, InitSpec};
    use prsamp_core::solver::{initialize, normalized_residual, output_step, sweep};
    use rand::SeedableRng;

    let (n, k, m) = (256usize, 50usize, 250usize);
    for (label, x0) in [
        ("random", InitSpec::Random),
        ("const-rho", InitSpec::Constant(Complex64::new(50.0 / 256.0, 0.0))),
    ] {
        let seed = 7700u64;
        let h = gen_matrix(MatrixEnsemble::ComplexGaussian, m, n, seed).unwrap();
        let x = gen_signal(SignalEnsemble::Binary { k }, n, seed + 100).unwrap();
        let inst = synthesize(h, &x, 30.0, seed + 200).unwrap();
        let truth = inst.ground_truth.as_ref().unwrap();
        let mut cfg = SolverConfig::recovery(n, inst.delta, k as f64 / n as f64);
        cfg.t_max = 128;
        cfg.x0 = x0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let mut state = initialize(&inst, &cfg, &mut rng).unwrap();
        println!("--- {label}");
        for t in 1..=128usize {
            output_step(&mut state, &inst, &cfg).unwrap();
            sweep(&mut state, &inst, &cfg, &mut rng).unwrap();
            if t % 16 == 0 || t <= 3 {
                let est = ComplexSignal::new(state.x_a.clone()).unwrap();
                let nr = normalized_residual(&inst, &est).unwrap();
                let corr = prsamp_core::synth::correlation(truth, &est)
                    .map(|c| c.abs())
                    .unwrap_or(f64::NAN);
                let p_mean: f64 = state.x_a.iter().map(|z| z.re).sum::<f64>() / n as f64;
                let s_mean: f64 = state.s.iter().sum::<f64>() / n as f64;
                let on_support: f64 = truth
                    .values
                    .iter()
                    .zip(&state.x_a)
                    .filter(|(t, _)| t.re == 1.0)
                    .map(|(_, e)| e.re)
                    .sum::<f64>()
                    / k as f64;
                println!(
                    "  t={t:3} nr={nr:.3e} corr={corr:.3} mean_p={p_mean:.3} mean_p_support={on_support:.3} s={s_mean:.2e}"
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_recovery_alpha_scan() {
    use num_complex::Complex64;
    use prsamp_core::model::InitSpec;
    use prsamp_core::synth::binarize;

    let (n, k, m) = (256usize, 50usize, 250usize);
    let rho = k as f64 / n as f64;
    for alpha in [0.2f64, 0.5, 0.7, 0.9] {
        for (label, x0) in [
            ("random", InitSpec::Random),
            ("const-rho", InitSpec::Constant(Complex64::new(rho, 0.0))),
        ] {
            let mut exact = 0;
            let mut corr_sum = 0.0;
            let seeds = 6u64;
            for seed in 0..seeds {
                let h = gen_matrix(MatrixEnsemble::ComplexGaussian, m, n, 7700 + seed).unwrap();
                let x = gen_signal(SignalEnsemble::Binary { k }, n, 7800 + seed).unwrap();
                let inst = synthesize(h, &x, 30.0, 7900 + seed).unwrap();
                let mut cfg = SolverConfig::recovery(n, inst.delta, rho);
                cfg.t_max = 64;
                cfg.alpha = alpha;
                cfg.x0 = x0.clone();
                cfg.seed = seed * 31 + 5;
                let (est, _) = solve_with_restarts(&inst, &cfg).unwrap();
                let truth = inst.ground_truth.as_ref().unwrap();
                if binarize(&est, 0.5) == binarize(truth, 0.5) {
                    exact += 1;
                }
                corr_sum += prsamp_core::synth::correlation(truth, &est)
                    .map(|c| c.abs())
                    .unwrap_or(0.0);
            }
            println!(
                "alpha={alpha} x0={label:9}: exact {exact}/{seeds}, mean corr {:.3}",
                corr_sum / seeds as f64
            );
        }
    }
}

#[test]
#[ignore]
fn probe_noise_sweep_shape() {
    // criterion-3 shape: NMSE(delta=1) vs NMSE(delta=4) at SNR 5 and 30
    let n = 64;
    for snr in [5.0f64, 30.0] {
        for delta in [1.0f64, 4.0] {
            let mut best = Vec::new();
            for master in 0..5u64 {
                let mut cell_best = f64::INFINITY;
                for trial in 0..5u64 {
                    let seed = 100_000 + master * 1000 + trial * 10;
                    let nmse = calib_nmse(n, delta, snr, 192, 0.9, 2, seed);
                    cell_best = cell_best.min(nmse);
                }
                best.push(cell_best);
            }
            best.sort_by(f64::total_cmp);
            println!(
                "snr={snr:4} delta={delta}: best-of-5 per master seed = {:?} median {:.3}",
                best.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>(),
                best[2]
            );
        }
    }
}

#[test]
#[ignore]
fn probe_large_n_dynamics() {
    use prsamp_core::model::ComplexSignal;
    use prsamp_core::solver::{initialize, normalized_residual, output_step, sweep};
    use rand::SeedableRng;

    let n = 256usize;
    let m = 1024usize;
    for seed in [5u64, 6] {
        let h = gen_matrix(MatrixEnsemble::Binary01 { density: 0.5 }, m, n, seed).unwrap();
        let x = gen_signal(SignalEnsemble::DenseComplex { rho: 1.0 }, n, seed + 1).unwrap();
        let inst = synthesize(h, &x, 30.0, seed + 2).unwrap();
        let truth = inst.ground_truth.as_ref().unwrap();
        let mut cfg = SolverConfig::calibration(n, inst.delta);
        cfg.t_max = 512;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 1000);
        let mut state = initialize(&inst, &cfg, &mut rng).unwrap();
        println!("--- n=256 seed {seed}");
        for t in 1..=512usize {
            output_step(&mut state, &inst, &cfg).unwrap();
            let stats = sweep(&mut state, &inst, &cfg, &mut rng).unwrap();
            if t % 32 == 0 || t <= 2 {
                let est = ComplexSignal::new(state.x_a.clone()).unwrap();
                let nr = normalized_residual(&inst, &est).unwrap();
                let d = nmse_phase_aligned(truth, &est).unwrap();
                let cj = ComplexSignal::new(est.values.iter().map(|z| z.conj()).collect()).unwrap();
                let c = nmse_phase_aligned(truth, &cj).unwrap();
                let xv: f64 = state.x_v.iter().sum::<f64>() / n as f64;
                let s_mean: f64 = state.s.iter().sum::<f64>() / n as f64;
                let dg_mean: f64 = state.dg.iter().sum::<f64>() / m as f64;
                println!(
                    "  t={t:3} nr={nr:.2e} nmse={d:.2e}/{c:.2e} xv={xv:.2e} s={s_mean:.2e} dg={dg_mean:+.2e} clamps={}",
                    stats.clamps
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_conjugate_branch() {
    for (n, t_max) in [(64usize, 192usize), (128, 192), (256, 192)] {
        let (mut correct, mut conj, mut fail) = (0, 0, 0);
        let seeds = 16u64;
        let start = std::time::Instant::now();
        for seed in 0..seeds {
            let (d, c) = calib_nmse_branches(n, 4.0, t_max, 0.9, 900 + seed);
            if d < 0.2 {
                correct += 1;
            } else if c < 0.2 {
                conj += 1;
            } else {
                fail += 1;
            }
        }
        println!(
            "n={n} t_max={t_max}: correct {correct}, conjugate {conj}, failed {fail} / {seeds} ({:.0}s)",
            start.elapsed().as_secs_f64()
        );
    }
}
