use std::f64::consts::TAU;
use std::path::PathBuf;

use num_complex::{Complex32, Complex64};

use vehchan::chstats::{analyze, StatsConfig};
use vehchan::dpsinterp::{estimate_coefficients, nmse_db, reconstruct, Interpolator};
use vehchan::gscm::enumerate_paths;
use vehchan::mnct::{ChannelTensor, TensorGrid};
use vehchan::presets;
use vehchan::scenario::{load_scenario, Scenario};
use vehchan::synth::{cfr, synthesize};

fn fixture(name: &str) -> Scenario {
    load_scenario(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn c64(v: Complex32) -> Complex64 {
    Complex64::new(f64::from(v.re), f64::from(v.im))
}

#[test]
fn path_geometry_is_reciprocal() {
    let sc = fixture("overtaking.toml");
    for t in [0.5, 4.0, 9.3] {
        let ab = enumerate_paths(&sc, (1, 3), t, 11).unwrap();
        let ba = enumerate_paths(&sc, (3, 1), t, 11).unwrap();
        let key = |p: &vehchan::gscm::Path| (p.kind, p.source, (p.delay * 1e15).round() as i64);
        let mut a: Vec<_> = ab.paths.iter().map(|p| (key(p), p.gain.norm())).collect();
        let mut b: Vec<_> = ba.paths.iter().map(|p| (key(p), p.gain.norm())).collect();
        a.sort_by(|x, y| x.0.cmp(&y.0));
        b.sort_by(|x, y| x.0.cmp(&y.0));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() <= 1e-12 * x.1.max(1e-300), "{x:?} vs {y:?}");
        }
    }
}

#[test]
fn reverse_link_is_conjugate_and_runs_are_deterministic() {
    let sc = fixture("overtaking.toml");
    let mut sounder = presets::table2();
    sounder.noise_floor_db = None;
    let model = presets::table5();
    let a = synthesize(&sc, &[(1, 3), (3, 1)], 0.05, &sounder, &model, 5).unwrap();
    let b = synthesize(&sc, &[(1, 3), (3, 1)], 0.05, &sounder, &model, 5).unwrap();
    assert_eq!(a.data, b.data);
    assert!(a.grid.convention.conjugate_reciprocity);
    for (x, y) in a.data[0].iter().zip(&a.data[1]) {
        assert_eq!(*x, y.conj());
    }
}

#[test]
fn cfr_energy_matches_delay_domain() {
    let sc = fixture("overtaking.toml");
    let set = enumerate_paths(&sc, (1, 2), 2.0, 3).unwrap();
    let grid = presets::table2().grid(1);
    let mut h = vec![Complex64::default(); grid.q];
    cfr(&set.paths, &grid, &mut h);
    let freq_energy: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    // Direct evaluation of Σ_q |Σ_i a_i e^{-j2π f_q τ_i}|²
    // = Σ_i Σ_k a_i a_k* Σ_q e^{-j2π f_q (τ_i - τ_k)}.
    let mut direct = 0.0;
    for p in &set.paths {
        for r in &set.paths {
            let s: Complex64 = (0..grid.q)
                .map(|q| Complex64::from_polar(1.0, -TAU * grid.freq(q) * (p.delay - r.delay)))
                .sum();
            direct += (p.gain * r.gain.conj() * s).re;
        }
    }
    assert!((freq_energy - direct).abs() <= 1e-9 * direct, "{freq_energy} vs {direct}");
    let diag: f64 = set.paths.iter().map(|p| p.gain.norm_sqr()).sum::<f64>() * grid.q as f64;
    // Cross terms can only redistribute, never exceed the coherent bound.
    assert!(freq_energy <= diag * set.paths.len() as f64);
}

#[test]
fn noise_floor_sets_per_subcarrier_power() {
    let sc = fixture("overtaking.toml");
    let mut sounder = presets::table2();
    let model = presets::table5();
    let duration = 0.1;
    sounder.noise_floor_db = None;
    let clean = synthesize(&sc, &[(1, 2)], duration, &sounder, &model, 2).unwrap();
    sounder.noise_floor_db = Some(-100.0);
    let noisy = synthesize(&sc, &[(1, 2)], duration, &sounder, &model, 2).unwrap();
    let n = clean.data[0].len() as f64;
    let power: f64 = clean.data[0]
        .iter()
        .zip(&noisy.data[0])
        .map(|(a, b)| (c64(*b) - c64(*a)).norm_sqr())
        .sum::<f64>()
        / n;
    let db = 10.0 * power.log10();
    assert!((db + 100.0).abs() < 0.1, "noise power {db} dB");
}

fn taps_tensor(taps: &[(f64, f64)], q: usize, t: usize) -> ChannelTensor {
    let grid = TensorGrid {
        nodes: 2,
        t,
        q,
        f_c: 5.9e9,
        delta_f: 250e3,
        t_sys: 500e-6,
        convention: Default::default(),
    };
    let mut tensor = ChannelTensor::zeros(grid.clone(), vec![(1, 2)]).unwrap();
    for m in 0..t {
        for (qi, v) in tensor.snapshot_mut(0, m).iter_mut().enumerate() {
            let h: Complex64 = taps
                .iter()
                .map(|&(tau, amp)| Complex64::from_polar(amp, -TAU * grid.freq(qi) * tau))
                .sum();
            *v = Complex32::new(h.re as f32, h.im as f32);
        }
    }
    tensor
}

#[test]
fn delay_shift_moves_mean_delay_only() {
    let q = 64;
    let tau_s = 1.0 / (q as f64 * 250e3);
    let config = StatsConfig::new(16, q, 500e-6, 250e3);
    let base = [(10.0 * tau_s, 1.0), (13.0 * tau_s, 0.6)];
    for shift in [3.0 * tau_s, 7.0 * tau_s, 20.4 * tau_s] {
        let moved: Vec<(f64, f64)> = base.iter().map(|&(t, a)| (t + shift, a)).collect();
        let a = analyze(&taps_tensor(&base, q, 32), 0, &config).unwrap();
        let b = analyze(&taps_tensor(&moved, q, 32), 0, &config).unwrap();
        for (ra, rb) in a.regions.iter().zip(&b.regions) {
            let (ma, mb) = (ra.spreads.mean_delay.unwrap(), rb.spreads.mean_delay.unwrap());
            let (sa, sb) = (ra.spreads.rms_delay.unwrap(), rb.spreads.rms_delay.unwrap());
            assert!((mb - ma - shift).abs() <= 0.5 * tau_s, "mean delay {ma} -> {mb}");
            assert!((sa - sb).abs() <= 0.5 * tau_s, "rms delay {sa} vs {sb}");
        }
    }
}

#[test]
fn constant_channel_is_centered_at_zero() {
    let (q, m) = (32, 16);
    let config = StatsConfig::new(m, q, 500e-6, 250e3);
    let stats = analyze(&taps_tensor(&[(0.0, 1.0)], q, 48), 0, &config).unwrap();
    assert_eq!(stats.regions.len(), 3);
    for r in &stats.regions {
        let s = r.spreads;
        assert!(s.mean_delay.unwrap().abs() < 1e-6 * config.tau_s);
        assert!(s.mean_doppler.unwrap().abs() < 1e-6 * config.nu_s);
        // A tone has no spread of its own; what remains is the taper
        // resolution, at most the concentration half-bandwidth of 2 bins.
        assert!(s.rms_delay.unwrap() <= 2.0 * config.tau_s);
        assert!(s.rms_doppler.unwrap() <= 2.0 * config.nu_s);
        assert!(r.path_loss_db.abs() < 1e-6);
    }
}

#[test]
fn adjacent_blocks_agree_in_overlap() {
    let interp = Interpolator::new(presets::desk_interp(), 61).unwrap();
    let plan = interp.config.plan.clone();
    let grid = TensorGrid {
        nodes: 2,
        t: 4 * plan.m_s,
        q: 61,
        f_c: 5.9e9,
        delta_f: plan.f_s,
        t_sys: plan.t_s,
        convention: Default::default(),
    };
    // Two in-band paths.
    let paths = [(0.4e-6, 150.0, 1.0), (1.3e-6, -320.0, 0.5)];
    let mut tensor = ChannelTensor::zeros(grid.clone(), vec![(1, 2)]).unwrap();
    for m in 0..grid.t {
        let time = m as f64 * grid.t_sys;
        for (q, v) in tensor.snapshot_mut(0, m).iter_mut().enumerate() {
            let h: Complex64 = paths
                .iter()
                .map(|&(tau, nu, a)| Complex64::from_polar(a, TAU * (nu * time - grid.freq(q) * tau)))
                .sum();
            *v = Complex32::new(h.re as f32, h.im as f32);
        }
    }
    let time_idx: Vec<usize> = (0..plan.window()).map(|m| m * plan.r_t_s).collect();
    let freq_pairs: Vec<(usize, usize)> = (0..plan.n_s).filter_map(|q| plan.sounding_column(q).map(|c| (q, c))).collect();
    let freq_idx: Vec<usize> = freq_pairs.iter().map(|&(_, c)| c).collect();
    let coeffs = |start: usize| {
        let y = nalgebra::DMatrix::from_fn(plan.window(), freq_pairs.len(), |r, c| c64(tensor.at(0, start + r, freq_pairs[c].0)));
        estimate_coefficients(&y, &interp.basis, &time_idx, &freq_idx).unwrap()
    };
    let (s1, s2) = (interp.window_start(1, grid.t), interp.window_start(2, grid.t));
    let (p1, p2) = (coeffs(s1), coeffs(s2));
    // Shared snapshots are [s2, s1 + window); evaluate both models on the
    // fine lattice there.
    let shared: Vec<usize> = (s2 * plan.r_t_s..(s1 + plan.window() - 1) * plan.r_t_s).collect();
    assert!(!shared.is_empty());
    let rows1: Vec<usize> = shared.iter().map(|&m| m - s1 * plan.r_t_s).collect();
    let rows2: Vec<usize> = shared.iter().map(|&m| m - s2 * plan.r_t_s).collect();
    let all_f: Vec<usize> = (0..plan.n_i).collect();
    let a = reconstruct(&p1, &interp.basis, &rows1, &all_f);
    let b = reconstruct(&p2, &interp.basis, &rows2, &all_f);
    let (a, b): (Vec<Complex64>, Vec<Complex64>) = (a.iter().copied().collect(), b.iter().copied().collect());
    let nmse = nmse_db(&a, &b);
    assert!(nmse <= -35.0, "overlap disagreement {nmse:.1} dB");
}
