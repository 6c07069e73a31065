use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use vehchan::chstats::{pdp_dsd, rms_spreads, LsfEstimator, StatsConfig};
use vehchan::dpsinterp::{estimate_coefficients, plan_grids, reconstruct, DpsBasis, InterpConfig};
use vehchan::geom::{OrientedRect, Point2};
use vehchan::gscm::{obstruct_los, power_db, select_reflection_point, ObstructionProfile, ScattererTypeParams};
use vehchan::linksim::coding::{conv_encode, depuncture, puncture, scramble, viterbi_decode, CodeRate};
use vehchan::linksim::interleaver::{deinterleave, interleave, permutation};
use vehchan::linksim::modulation::Modulation;
use vehchan::linksim::{ensemble_per, PerSeries};
use vehchan::mnct::{ChannelTensor, FreqConvention, TensorGrid};
use vehchan::scenario::{select_relevant_diffuse, DiffuseScatterer, Trajectory, TrajectorySample};

fn point() -> impl Strategy<Value = Point2> {
    (-60.0..60.0f64, -60.0..60.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn pose() -> impl Strategy<Value = OrientedRect> {
    (point(), 0.0..TAU, 3.0..14.0f64, 1.5..3.0f64).prop_map(|(c, a, l, w)| OrientedRect {
        center: c,
        heading: Point2::new(a.cos(), a.sin()),
        length: l,
        width: w,
    })
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relevant_diffuse_ignores_input_order(
        pos in prop::collection::vec(point(), 1..40),
        shuffle_seed in any::<u64>(),
        budget in 0usize..50,
        tx in point(),
        rx in point(),
    ) {
        let pop: Vec<DiffuseScatterer> = pos
            .iter()
            .enumerate()
            .map(|(i, &p)| DiffuseScatterer { index: i, wall: 0, position: p, initial_phase: 0.0 })
            .collect();
        let mut shuffled = pop.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = shuffle_seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let a: Vec<usize> = select_relevant_diffuse(&pop, tx, rx, budget, 1e-6).iter().map(|d| d.index).collect();
        let b: Vec<usize> = select_relevant_diffuse(&shuffled, tx, rx, budget, 1e-6).iter().map(|d| d.index).collect();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.len() <= budget);
    }

    #[test]
    fn spline_reproduces_knots(
        steps in prop::collection::vec((0.2..2.0f64, -30.0..30.0f64, -30.0..30.0f64), 2..10),
    ) {
        let mut t = 0.0;
        let samples: Vec<TrajectorySample> = steps
            .iter()
            .map(|&(dt, x, y)| {
                t += dt;
                TrajectorySample { t, x, y }
            })
            .collect();
        let traj = Trajectory::new(samples.clone(), 1.5, Point2::default()).unwrap();
        for s in &samples {
            let k = traj.state(s.t).unwrap();
            prop_assert!((k.position.x - s.x).abs() < 1e-9 && (k.position.y - s.y).abs() < 1e-9);
        }
        prop_assert!(traj.state(samples[samples.len() - 1].t + 0.1).is_err());
    }

    #[test]
    fn power_non_increasing_in_distance(
        g0 in -120.0..0.0f64,
        n_p in 0.0..5.0f64,
        fading in -10.0..10.0f64,
        d1 in 0.1..500.0f64,
        dd in 0.0..500.0f64,
    ) {
        let p = ScattererTypeParams { g0_db: g0, n_p, mu_sigma: 0.0, mu_c: 1.0, d_c_min: 1.0 };
        prop_assert!(power_db(&p, d1 + dd, fading) <= power_db(&p, d1, fading) + 1e-12);
    }

    #[test]
    fn reflection_case_is_exclusive_and_olos_costs_power(tx in point(), rx in point(), pose in pose()) {
        prop_assume!(tx.distance(rx) > 1e-3);
        let st = select_reflection_point(tx, rx, &pose).unwrap();
        let front = st.theta_tx_front.abs() <= TAU / 4.0 && st.theta_rx_front.abs() <= TAU / 4.0;
        let back = st.theta_tx_back.abs() >= TAU / 4.0 && st.theta_rx_back.abs() >= TAU / 4.0;
        // Front and back cannot both hold: they would need the nodes on both
        // sides of the two parallel faces at once.
        prop_assert!(!(front && back));
        prop_assert!(st.x_md.abs() <= 0.5 * pose.length);
        let profile = ObstructionProfile::builtin("bus_default").unwrap();
        match obstruct_los(tx, rx, &pose, Some(&profile), 0.008) {
            Some((loss, alpha)) => {
                prop_assert!(st.olos);
                prop_assert!(loss >= 0.0 && alpha >= 0.0);
            }
            None => prop_assert!(!st.olos),
        }
    }

    #[test]
    fn lsf_scales_with_power_and_spreads_do_not(
        taps in prop::collection::vec((0usize..8, -3.0..3.0f64, 0.1..1.0f64), 1..4),
        c_re in -3.0..3.0f64,
        c_im in -3.0..3.0f64,
    ) {
        let c = cplx(c_re, c_im);
        prop_assume!(c.norm() > 0.1);
        let (m, q) = (16, 16);
        let config = StatsConfig::new(m, q, 1e-3, 1e6);
        let block: Vec<Complex64> = (0..m * q)
            .map(|i| {
                let (mt, qf) = ((i / q) as f64, (i % q) as f64);
                taps.iter()
                    .map(|&(d, nu, a)| Complex64::from_polar(a, TAU * (nu * mt / m as f64 - d as f64 * qf / q as f64)))
                    .sum()
            })
            .collect();
        let scaled: Vec<Complex64> = block.iter().map(|v| v * c).collect();
        let est = LsfEstimator::new(&config).unwrap();
        let (a, b) = (est.estimate(&block), est.estimate(&scaled));
        let g = c.norm_sqr();
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!(*x >= 0.0);
            prop_assert!((y - g * x).abs() <= 1e-9 * g * (1.0 + x.abs()));
        }
        let (pa, da) = pdp_dsd(&a);
        let (pb, db) = pdp_dsd(&b);
        let floor = 1e-6 * pa.iter().cloned().fold(0.0, f64::max);
        let sa = rms_spreads(&pa, &da, &config, floor);
        let sb = rms_spreads(&pb, &db, &config, g * floor);
        for (x, y) in [(sa.rms_delay, sb.rms_delay), (sa.rms_doppler, sb.rms_doppler), (sa.mean_delay, sb.mean_delay)] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()), "{} vs {}", x, y),
                (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
            }
        }
    }

    #[test]
    fn envelope_contains_mean(
        runs in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 6), 1..8),
    ) {
        let series: Vec<PerSeries> = runs
            .iter()
            .map(|per| PerSeries { window_s: 0.12, per: per.clone(), packets: vec![120; per.len()] })
            .collect();
        let env = ensemble_per(&series).unwrap();
        for k in 0..6 {
            prop_assert!(env.min[k] <= env.mean[k] && env.mean[k] <= env.max[k]);
            for r in &runs {
                prop_assert!(env.min[k] <= r[k] && r[k] <= env.max[k]);
            }
        }
    }

    #[test]
    fn coding_chain_round_trips(
        data in prop::collection::vec(0u8..2, 1..300),
        seed in 1u8..128,
        three_quarters in any::<bool>(),
    ) {
        let mut bits = data.clone();
        scramble(&mut bits, seed);
        bits.extend([0; 6]);
        let rate = if three_quarters { CodeRate::ThreeQuarters } else { CodeRate::Half };
        let coded = conv_encode(&bits);
        let sent = puncture(&coded, rate);
        let llr: Vec<f64> = sent.iter().map(|&b| if b == 0 { 2.0 } else { -2.0 }).collect();
        let mut decoded = viterbi_decode(&depuncture(&llr, rate, coded.len()));
        decoded.truncate(data.len());
        scramble(&mut decoded, seed);
        prop_assert_eq!(decoded, data);
    }

    #[test]
    fn interleaver_and_mapper_round_trip(
        sixty_four in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let m = if sixty_four { Modulation::Qam64 } else { Modulation::Qpsk };
        let n_bpsc = m.bits_per_symbol();
        let n_cbps = 48 * n_bpsc;
        let bits: Vec<u8> = (0..n_cbps).map(|i| ((seed >> (i % 64)) as u8 ^ (i as u8 / 3)) & 1).collect();
        let perm = permutation(n_cbps, n_bpsc);
        let inter = interleave(&bits, &perm);
        prop_assert_eq!(&deinterleave(&inter, &perm), &bits);
        let h = Complex64::from_polar(0.7, seed as f64 * 1e-3);
        let mut llr = Vec::new();
        for s in m.map(&inter) {
            m.demap(s * h, h, 1e-3, &mut llr);
        }
        let hard: Vec<u8> = llr.iter().map(|&l| u8::from(l < 0.0)).collect();
        prop_assert_eq!(hard, inter);
    }

    #[test]
    fn tensor_file_round_trip(
        t in 1usize..6,
        q in 1usize..9,
        values in prop::collection::vec(-1e3..1e3f32, 2 * 6 * 9 * 2),
        conjugate in any::<bool>(),
    ) {
        let grid = TensorGrid {
            nodes: 3,
            t,
            q,
            f_c: 5.9e9,
            delta_f: 250e3,
            t_sys: 5e-4,
            convention: FreqConvention { centered: true, conjugate_reciprocity: conjugate },
        };
        let mut tensor = ChannelTensor::zeros(grid, vec![(1, 2), (2, 3)]).unwrap();
        let mut it = values.chunks_exact(2);
        for link in 0..2 {
            for v in tensor.data[link].iter_mut() {
                let c = it.next().unwrap();
                *v = num_complex::Complex32::new(c[0], c[1]);
            }
        }
        let mut bytes = Vec::new();
        tensor.write_to(&mut bytes).unwrap();
        let back = ChannelTensor::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.grid, tensor.grid);
        prop_assert_eq!(back.links, tensor.links);
        prop_assert_eq!(back.data, tensor.data);
    }
}

fn small_config() -> InterpConfig {
    InterpConfig {
        plan: plan_grids(500e-6, 50e-6, 250e3, 125e3, 8, 15, 20, 2).unwrap(),
        f_c: 5.9e9,
        v_max: 27.8,
        tau_max: 2e-6,
        d_t: Some(6),
        d_f: Some(10),
    }
}

fn observed_positions(config: &InterpConfig) -> (Vec<usize>, Vec<usize>) {
    let p = &config.plan;
    let time: Vec<usize> = (0..p.window()).map(|m| m * p.r_t_s).collect();
    let freq: Vec<usize> = (0..p.n_s).filter_map(|q| p.sounding_column(q)).collect();
    (time, freq)
}

fn matrix(rows: usize, cols: usize, v: &[(f64, f64)]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |r, c| {
        let (a, b) = v[(r * cols + c) % v.len()];
        cplx(a, b)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dps_estimate_is_linear(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..64),
        b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..64),
        s_re in -2.0..2.0f64,
    ) {
        let config = small_config();
        let basis = DpsBasis::new(&config).unwrap();
        let (ti, fi) = observed_positions(&config);
        let (ya, yb) = (matrix(ti.len(), fi.len(), &a), matrix(ti.len(), fi.len(), &b));
        let s = cplx(s_re, 0.5);
        let combined = &ya * s + &yb;
        let lhs = estimate_coefficients(&combined, &basis, &ti, &fi).unwrap();
        let rhs = estimate_coefficients(&ya, &basis, &ti, &fi).unwrap() * s + estimate_coefficients(&yb, &basis, &ti, &fi).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn dps_subspace_members_are_reproduced(
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 60),
    ) {
        let config = small_config();
        let basis = DpsBasis::new(&config).unwrap();
        let (dt, df) = basis.dims();
        let psi = matrix(dt, df, &coeffs);
        let (ti, fi) = observed_positions(&config);
        let y = reconstruct(&psi, &basis, &ti, &fi);
        let est = estimate_coefficients(&y, &basis, &ti, &fi).unwrap();
        prop_assert!((&est - &psi).norm() <= 1e-8 * psi.norm());
        // The whole interpolation lattice follows.
        let all_t: Vec<usize> = (0..config.plan.m_i).collect();
        let all_f: Vec<usize> = (0..config.plan.n_i).collect();
        let full = reconstruct(&est, &basis, &all_t, &all_f);
        let truth = reconstruct(&psi, &basis, &all_t, &all_f);
        prop_assert!((&full - &truth).norm() <= 1e-8 * truth.norm());
    }
}
