//! Multi-link channel synthesis on the sounding grid, the switched sounding
//! schedule, the multitone sounding signal and the calibration step.

use std::f64::consts::{PI, TAU};

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::gscm::{Gscm, ModelParams, Path};
pub use crate::mnct::{ChannelTensor, FreqConvention, TensorGrid};
use crate::rng::{self, tag};
use crate::scenario::Scenario;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Multi-node sounder parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SounderConfig {
    /// Number of nodes (L).
    pub nodes: u32,
    pub f_c: f64,
    /// Subcarrier count (Q).
    pub q: usize,
    pub delta_f: f64,
    /// Snapshot interval, s.
    pub t_sys: f64,
    /// Sounding interval, s.
    pub t_s: f64,
    /// Sounding sequence length, s.
    pub t_seq: f64,
    /// Maximum relative velocity, m/s.
    pub v_max: f64,
    /// Stationarity region duration, s.
    pub t_stat: f64,
    /// Additive noise power per sample, dB. `None` disables noise.
    pub noise_floor_db: Option<f64>,
}

impl Default for SounderConfig {
    fn default() -> Self {
        crate::presets::table2()
    }
}

impl SounderConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    pub fn bandwidth(&self) -> f64 {
        self.q as f64 * self.delta_f
    }

    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.t_stat
    }

    /// Time samples per stationarity region.
    pub fn region_len(&self) -> usize {
        (self.t_stat / self.t_sys).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Validation("the sounder needs at least two nodes".into()));
        }
        if self.q == 0 || !(self.delta_f > 0.0 && self.f_c > 0.0 && self.t_s > 0.0 && self.t_stat > 0.0) {
            return Err(Error::Validation("sounder parameters must be positive".into()));
        }
        let expected = f64::from(self.nodes - 1) * self.t_s;
        if (self.t_sys - expected).abs() > 1e-9 * expected {
            return Err(Error::Validation(format!(
                "snapshot interval {} s differs from (L-1) T_s = {expected} s",
                self.t_sys
            )));
        }
        let limit = SPEED_OF_LIGHT / (2.0 * self.f_c * self.v_max);
        if self.v_max > 0.0 && self.t_sys >= limit {
            return Err(Error::Validation(format!(
                "snapshot interval {} s does not resolve the maximum Doppler (limit {limit} s)",
                self.t_sys
            )));
        }
        Ok(())
    }

    pub fn grid(&self, t: usize) -> TensorGrid {
        TensorGrid {
            nodes: self.nodes,
            t,
            q: self.q,
            f_c: self.f_c,
            delta_f: self.delta_f,
            t_sys: self.t_sys,
            convention: FreqConvention::default(),
        }
    }
}

/// Maximum resolvable Doppler shift of an `L`-node sounder with sounding
/// interval `t_s`.
pub fn max_doppler(nodes: u32, t_s: f64) -> Result<f64> {
    if nodes < 2 || !(t_s > 0.0) {
        return Err(Error::Validation("max_doppler needs L >= 2 and T_s > 0".into()));
    }
    Ok(1.0 / (2.0 * f64::from(nodes - 1) * t_s))
}

/// Zero-based phase of the snapshot in which link `(a, b)` is measured.
/// Node `p + 1` transmits in phase `p`, so the link is measured in the
/// phase of its lower-numbered end.
pub fn schedule_phase(a: u16, b: u16) -> u32 {
    u32::from(a.min(b)) - 1
}

/// Frequency response of a path set on `grid`:
/// `g[q] = sum_i gain_i exp(-j 2 pi f_q tau_i)`.
pub fn cfr(paths: &[Path], grid: &TensorGrid, out: &mut [Complex64]) {
    const ANCHOR: usize = 64;
    const LANES: usize = 4;
    let zero = Complex64::new(0.0, 0.0);
    out.iter_mut().for_each(|v| *v = zero);
    let steps: Vec<Complex64> = paths
        .iter()
        .map(|p| Complex64::from_polar(1.0, -TAU * grid.delta_f * p.delay))
        .collect();
    // The recurrence is re-anchored every ANCHOR bins to bound rounding
    // drift; paths are advanced LANES at a time to keep independent chains.
    for q0 in (0..out.len()).step_by(ANCHOR) {
        let q1 = (q0 + ANCHOR).min(out.len());
        let f0 = grid.freq(q0);
        for (group, group_steps) in paths.chunks(LANES).zip(steps.chunks(LANES)) {
            let mut ph = [zero; LANES];
            let mut st = [zero; LANES];
            for (i, p) in group.iter().enumerate() {
                ph[i] = p.gain * Complex64::from_polar(1.0, -TAU * f0 * p.delay);
                st[i] = group_steps[i];
            }
            for v in &mut out[q0..q1] {
                *v += (ph[0] + ph[1]) + (ph[2] + ph[3]);
                for i in 0..LANES {
                    ph[i] *= st[i];
                }
            }
        }
    }
}

/// Synthesizes the requested links. Snapshot `m` of a link measured in
/// phase `p` is taken at `t0 + m T_sys + p T_s`, with `t0` the start of the
/// common trajectory span. Reversed links hold the conjugate of the forward
/// response.
pub fn synthesize(
    scenario: &Scenario,
    links: &[(u16, u16)],
    duration: f64,
    config: &SounderConfig,
    model: &ModelParams,
    seed: u64,
) -> Result<ChannelTensor> {
    config.validate()?;
    let t_count = (duration / config.t_sys).round();
    if !(t_count >= 1.0) {
        return Err(Error::Validation("duration yields an empty tensor".into()));
    }
    let t_count = t_count as usize;
    if links.is_empty() {
        return Err(Error::Validation("no links requested".into()));
    }
    for &(a, b) in links {
        if a == b || a == 0 || b == 0 || u32::from(a.max(b)) > config.nodes {
            return Err(Error::Validation(format!("invalid link ({a}, {b}) for {} nodes", config.nodes)));
        }
        if scenario.node(a).is_none() || scenario.node(b).is_none() {
            return Err(Error::Validation(format!("link ({a}, {b}) references a node missing from the scenario")));
        }
    }
    let (start, end) = scenario.common_span();
    let last = start + (t_count - 1) as f64 * config.t_sys + f64::from(config.nodes - 2) * config.t_s;
    if last > end + 1e-9 {
        return Err(Error::OutOfSpan { t: last, start, end });
    }
    let gscm = Gscm::new(scenario, model.clone(), config.f_c, seed)?;
    let grid = config.grid(t_count);
    let mut tensor = ChannelTensor::zeros(grid, links.to_vec())?;

    for (li, &(a, b)) in links.iter().enumerate() {
        let (lo, hi) = (a.min(b), a.max(b));
        let offset = f64::from(schedule_phase(lo, hi)) * config.t_s;
        let mut tracker = gscm.tracker(lo, hi)?;
        let mut noise_rng = rng::stream(seed, &[tag::NOISE, u64::from(lo), u64::from(hi)]);
        let noise_sigma = config.noise_floor_db.map(|db| (10f64.powf(db / 10.0) / 2.0).sqrt());
        let conj = a > b;
        const CHUNK: usize = 512;
        let mut m0 = 0;
        while m0 < t_count {
            let m1 = (m0 + CHUNK).min(t_count);
            let sets = (m0..m1)
                .map(|m| tracker.paths_at(start + m as f64 * config.t_sys + offset).map(|s| s.paths))
                .collect::<Result<Vec<_>>>()?;
            let rows = &mut tensor.data[li][m0 * grid.q..m1 * grid.q];
            fill_rows(&sets, &grid, rows, conj);
            if let Some(sigma) = noise_sigma {
                for v in rows.iter_mut() {
                    let re: f64 = noise_rng.sample(StandardNormal);
                    let im: f64 = noise_rng.sample(StandardNormal);
                    let n = Complex64::new(re, im) * sigma;
                    let n = if conj { n.conj() } else { n };
                    *v += Complex32::new(n.re as f32, n.im as f32);
                }
            }
            m0 = m1;
        }
    }
    Ok(tensor)
}

fn fill_rows(sets: &[Vec<Path>], grid: &TensorGrid, rows: &mut [Complex32], conj: bool) {
    let work = |(paths, row): (&Vec<Path>, &mut [Complex32])| {
        let mut buf = vec![Complex64::new(0.0, 0.0); grid.q];
        cfr(paths, grid, &mut buf);
        for (o, v) in row.iter_mut().zip(&buf) {
            let v = if conj { v.conj() } else { *v };
            *o = Complex32::new(v.re as f32, v.im as f32);
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        sets.par_iter().zip(rows.par_chunks_mut(grid.q)).for_each(work);
    }
    #[cfg(not(feature = "parallel"))]
    sets.iter().zip(rows.chunks_mut(grid.q)).for_each(work);
}

/// Unit-magnitude multitone with low crest factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundingSignal {
    pub tones: Vec<Complex64>,
    pub crest_factor_db: f64,
}

const OVERSAMPLING: usize = 4;

/// Peak-to-RMS ratio of the time-domain multitone, dB, evaluated with
/// fourfold oversampling.
pub fn crest_factor_db(tones: &[Complex64]) -> f64 {
    let n = OVERSAMPLING * tones.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..tones.len()].copy_from_slice(tones);
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let peak = power.iter().copied().fold(0.0, f64::max);
    let mean = power.iter().sum::<f64>() / n as f64;
    10.0 * (peak / mean).log10()
}

/// Newman phases `pi q^2 / Q` with a small seeded perturbation, refined by
/// up to 200 rounds of time-domain clipping and projection back onto
/// unit-magnitude tones. The best iterate is kept.
pub fn generate_sounding_signal(q: usize, seed: u64) -> Result<SoundingSignal> {
    if q == 0 {
        return Err(Error::Validation("sounding signal needs at least one tone".into()));
    }
    let mut rng = rng::stream(seed, &[tag::SOUNDING]);
    let mut tones: Vec<Complex64> = (0..q)
        .map(|k| {
            let k = k as f64;
            let jitter = 0.01 * (rng.random::<f64>() - 0.5);
            Complex64::from_polar(1.0, PI * k * k / q as f64 + jitter)
        })
        .collect();
    let mut best = (crest_factor_db(&tones), tones.clone());
    if q > 1 {
        let n = OVERSAMPLING * q;
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(n);
        let fwd = planner.plan_fft_forward(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..200 {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            buf[..q].copy_from_slice(&tones);
            inv.process(&mut buf);
            let rms = (buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
            let clip = 1.4 * rms;
            for v in buf.iter_mut() {
                let a = v.norm();
                if a > clip {
                    *v *= clip / a;
                }
            }
            fwd.process(&mut buf);
            for (t, v) in tones.iter_mut().zip(&buf) {
                *t = if v.norm() > 0.0 { v / v.norm() } else { *t };
            }
            let cf = crest_factor_db(&tones);
            if cf < best.0 {
                best = (cf, tones.clone());
            }
        }
    }
    Ok(SoundingSignal {
        tones: best.1,
        crest_factor_db: best.0,
    })
}

/// Removes the sounding signal and the calibration response:
/// `g[m, q] = y[m, q] / (x[q] g_c[q])` for time-major `y`.
pub fn calibrate(y: &[Complex64], x: &[Complex64], g_c: &[Complex64]) -> Result<Vec<Complex64>> {
    let q = x.len();
    if g_c.len() != q || q == 0 || y.len() % q != 0 {
        return Err(Error::Validation("calibration inputs have mismatched lengths".into()));
    }
    let divisor: Vec<Complex64> = x.iter().zip(g_c).map(|(a, b)| a * b).collect();
    if let Some(k) = divisor.iter().position(|d| d.norm() == 0.0 || !d.is_finite()) {
        return Err(Error::ZeroDivisor(k));
    }
    Ok(y.chunks(q)
        .flat_map(|row| row.iter().zip(&divisor).map(|(v, d)| v / d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gscm::{PathKind, SourceId};

    #[test]
    fn max_doppler_values() {
        assert!((max_doppler(3, 250e-6).unwrap() - 1000.0).abs() < 1e-9);
        assert!((max_doppler(2, 250e-6).unwrap() - 2000.0).abs() < 1e-9);
        assert!((max_doppler(4, 125e-6).unwrap() - 1333.333_333).abs() < 1e-3);
        assert!(max_doppler(1, 250e-6).is_err());
    }

    #[test]
    fn default_config_is_consistent() {
        let c = SounderConfig::default();
        c.validate().unwrap();
        assert_eq!(c.region_len(), 240);
        assert!((c.bandwidth() - 150.25e6).abs() < 1.0);
        assert!((c.doppler_resolution() - 8.333).abs() < 1e-3);
    }

    #[test]
    fn single_path_cfr() {
        let grid = SounderConfig::default().grid(1);
        let tau = 123e-9;
        let gain = Complex64::from_polar(0.01, 0.3);
        let paths = [Path {
            kind: PathKind::Los,
            source: SourceId::Los,
            delay: tau,
            gain,
        }];
        let mut out = vec![Complex64::new(0.0, 0.0); grid.q];
        cfr(&paths, &grid, &mut out);
        for (q, v) in out.iter().enumerate() {
            let expect = gain * Complex64::from_polar(1.0, -TAU * grid.freq(q) * tau);
            assert!((v - expect).norm() < 1e-14, "q={q}");
        }
        let slope = (out[1] / out[0]).arg();
        assert!((slope + TAU * grid.delta_f * tau).abs() < 1e-9);
    }

    #[test]
    fn crest_factor_bounds() {
        assert!(crest_factor_db(&[Complex64::new(1.0, 0.0)]).abs() < 1e-12);
        let zero_phase = vec![Complex64::new(1.0, 0.0); 601];
        assert!(crest_factor_db(&zero_phase) > 20.0);
        let s = generate_sounding_signal(601, 7).unwrap();
        assert!(s.crest_factor_db <= 6.0, "{}", s.crest_factor_db);
        assert!(s.tones.iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
        assert!((crest_factor_db(&s.tones) - s.crest_factor_db).abs() < 1e-12);
        assert_eq!(generate_sounding_signal(601, 7).unwrap(), s);
        let one = generate_sounding_signal(1, 0).unwrap();
        assert!(one.crest_factor_db.abs() < 1e-12);
    }

    #[test]
    fn calibration_identity_and_ripple() {
        let q = 16;
        let x: Vec<Complex64> = (0..q).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64)).collect();
        // 3 dB peak-to-peak amplitude ripple.
        let g_c: Vec<Complex64> = (0..q)
            .map(|k| Complex64::from_polar(10f64.powf(1.5 * (0.9 * k as f64).sin() / 20.0), -0.2 * k as f64))
            .collect();
        let g_true: Vec<Complex64> = (0..3 * q).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let y: Vec<Complex64> = g_true
            .iter()
            .enumerate()
            .map(|(i, g)| g * x[i % q] * g_c[i % q])
            .collect();
        let g = calibrate(&y, &x, &g_c).unwrap();
        for (a, b) in g.iter().zip(&g_true) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
        let ones = vec![Complex64::new(1.0, 0.0); q];
        assert_eq!(calibrate(&y, &ones, &ones).unwrap(), y);
        let mut bad = ones.clone();
        bad[5] = Complex64::new(0.0, 0.0);
        assert!(matches!(calibrate(&y, &ones, &bad), Err(Error::ZeroDivisor(5))));
    }
}
