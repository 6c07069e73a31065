//! Time-variant channel statistics per stationarity region: multitaper
//! local scattering function, PDP/DSD marginals, RMS delay and Doppler
//! spreads and path loss.
//!
//! Region `k` (zero based) covers time samples `kM .. (k+1)M` and the full
//! band. With `m'` the centered time index and `u_i`, `ũ_j` the time and
//! frequency tapers,
//!
//! ```text
//! H_w[n, p] = sum_{m', q} g[m', q] u_i[m' + M/2] ũ_j[q] exp(-j2π (p m'/M - n q/N))
//! C[n, p]   = 1/(IJ) sum_w |H_w[n, p]|^2
//! ```

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dpss::slepian;
use crate::mnct::ChannelTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Time samples per region.
    pub m: usize,
    /// Frequency samples (the full band).
    pub n: usize,
    pub i_tapers: usize,
    pub j_tapers: usize,
    /// Delay bin width, s.
    pub tau_s: f64,
    /// Doppler bin width, Hz.
    pub nu_s: f64,
    /// Bins must exceed the noise floor by this margin. `None` disables.
    pub noise_margin_db: Option<f64>,
    /// Bins must lie within this range below the peak. `None` disables.
    pub peak_dynamic_db: Option<f64>,
    /// Fixed noise floor (PDP units, dB). `None` estimates it per region.
    pub noise_floor_db: Option<f64>,
    /// The last bins of the PDP read as negative delays. Taper leakage of a
    /// path at zero delay lands there after the circular transform.
    #[serde(default)]
    pub negative_delay_bins: usize,
}

impl StatsConfig {
    /// Defaults for a tensor with snapshot interval `t_sys`, subcarrier
    /// spacing `delta_f`, `q` subcarriers and regions of `m` snapshots.
    pub fn new(m: usize, q: usize, t_sys: f64, delta_f: f64) -> Self {
        Self {
            m,
            n: q,
            i_tapers: 3,
            j_tapers: 3,
            tau_s: 1.0 / (q as f64 * delta_f),
            nu_s: 1.0 / (m as f64 * t_sys),
            noise_margin_db: Some(5.0),
            peak_dynamic_db: Some(40.0),
            noise_floor_db: None,
            // Leakage spans the frequency taper half-bandwidth, 2 bins.
            negative_delay_bins: if q >= 16 { 2 } else { 0 },
        }
    }

    pub fn without_thresholds(mut self) -> Self {
        self.noise_margin_db = None;
        self.peak_dynamic_db = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m % 2 != 0 {
            return Err(Error::Validation(format!("region length M = {} must be even and >= 2", self.m)));
        }
        if self.n == 0 || self.i_tapers == 0 || self.j_tapers == 0 || self.i_tapers > self.m || self.j_tapers > self.n {
            return Err(Error::Validation("invalid taper counts".into()));
        }
        if self.noise_margin_db.is_some_and(|x| x < 0.0) || self.peak_dynamic_db.is_some_and(|x| x < 0.0) {
            return Err(Error::Validation("thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Separable multitaper window bank.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperBank {
    /// `I` time tapers of length `M`.
    pub time: Vec<Vec<f64>>,
    /// `J` frequency tapers of length `N`.
    pub freq: Vec<Vec<f64>>,
}

impl TaperBank {
    /// Window `w = iJ + j` at `(m' + M/2, q)`.
    pub fn window(&self, w: usize, m: usize, q: usize) -> f64 {
        let j_count = self.freq.len();
        self.time[w / j_count][m] * self.freq[w % j_count][q]
    }
}

fn taper_family(len: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if len == 1 {
        return Ok(vec![vec![1.0]]);
    }
    // Half-bandwidth 2/len, clipped below Nyquist for very short windows.
    let w = (2.0 / len as f64).min(0.45);
    Ok(slepian(len, w, count)?.sequences)
}

/// First `I` time and `J` frequency Slepian tapers, concentration
/// half-bandwidths `2/M` and `2/N`.
pub fn dps_window_bank(m: usize, n: usize, i: usize, j: usize) -> Result<TaperBank> {
    if i == 0 || j == 0 || i > m || j > n {
        return Err(Error::Validation(format!("taper counts I={i}, J={j} do not fit M={m}, N={n}")));
    }
    Ok(TaperBank {
        time: taper_family(m, i)?,
        freq: taper_family(n, j)?,
    })
}

/// Local scattering function of one region, `N` delay bins by `M` Doppler
/// bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Lsf {
    pub m: usize,
    pub n: usize,
    /// `data[n * M + (p + M/2)]`.
    pub data: Vec<f64>,
}

impl Lsf {
    /// Value at delay bin `n` and Doppler bin `p ∈ [-M/2, M/2)`.
    pub fn get(&self, n: usize, p: i64) -> f64 {
        self.data[n * self.m + (p + (self.m / 2) as i64) as usize]
    }
}

/// FFT plans and tapers for repeated LSF evaluation.
pub struct LsfEstimator {
    bank: TaperBank,
    m: usize,
    n: usize,
    time_fft: Arc<dyn Fft<f64>>,
    freq_ifft: Arc<dyn Fft<f64>>,
}

impl LsfEstimator {
    pub fn new(config: &StatsConfig) -> Result<Self> {
        config.validate()?;
        let bank = dps_window_bank(config.m, config.n, config.i_tapers, config.j_tapers)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            time_fft: planner.plan_fft_forward(config.m),
            freq_ifft: planner.plan_fft_inverse(config.n),
            bank,
            m: config.m,
            n: config.n,
        })
    }

    pub fn bank(&self) -> &TaperBank {
        &self.bank
    }

    /// LSF of an `M x N` time-major block.
    pub fn estimate(&self, block: &[Complex64]) -> Lsf {
        let (m, n) = (self.m, self.n);
        assert_eq!(block.len(), m * n);
        let half = m / 2;
        let mut acc = vec![0.0; m * n];
        // Column-major scratch: column q holds M time samples.
        let mut cols = vec![Complex64::new(0.0, 0.0); m * n];
        let mut rows = vec![Complex64::new(0.0, 0.0); m * n];
        for u in &self.bank.time {
            for q in 0..n {
                let col = &mut cols[q * m..(q + 1) * m];
                for (mm, c) in col.iter_mut().enumerate() {
                    *c = block[mm * n + q] * u[mm];
                }
            }
            self.time_fft.process(&mut cols);
            // FFT bin k of the 0-based index relates to the centered index by
            // a unit-modulus factor, which vanishes in |H|^2.
            for v in &self.bank.freq {
                for pk in 0..m {
                    let row = &mut rows[pk * n..(pk + 1) * n];
                    for (q, r) in row.iter_mut().enumerate() {
                        *r = cols[q * m + pk] * v[q];
                    }
                }
                self.freq_ifft.process(&mut rows);
                for pk in 0..m {
                    let p_idx = (pk + half) % m;
                    for nn in 0..n {
                        acc[nn * m + p_idx] += rows[pk * n + nn].norm_sqr();
                    }
                }
            }
        }
        let scale = 1.0 / (self.bank.time.len() * self.bank.freq.len()) as f64;
        acc.iter_mut().for_each(|x| *x *= scale);
        Lsf { m, n, data: acc }
    }
}

/// Number of complete regions in a tensor of `t` snapshots.
pub fn region_count(t: usize, m: usize) -> usize {
    if m == 0 {
        0
    } else {
        t / m
    }
}

fn region_block(tensor: &ChannelTensor, link: usize, k: usize, config: &StatsConfig) -> Result<Vec<Complex64>> {
    if link >= tensor.links.len() {
        return Err(Error::Validation(format!("link index {link} out of range")));
    }
    if config.n != tensor.grid.q {
        return Err(Error::Validation(format!(
            "statistics configured for N = {} but the tensor has Q = {}",
            config.n, tensor.grid.q
        )));
    }
    let count = region_count(tensor.grid.t, config.m);
    if k >= count {
        return Err(Error::Validation(format!("region {k} out of range ({count} regions)")));
    }
    let q = tensor.grid.q;
    let start = k * config.m * q;
    Ok(tensor.data[link][start..start + config.m * q]
        .iter()
        .map(|c| Complex64::new(f64::from(c.re), f64::from(c.im)))
        .collect())
}

/// LSF of region `k` of `link`.
pub fn lsf(tensor: &ChannelTensor, link: usize, k: usize, config: &StatsConfig) -> Result<Lsf> {
    let block = region_block(tensor, link, k, config)?;
    Ok(LsfEstimator::new(config)?.estimate(&block))
}

/// PDP `(1/M) Σ_p C` and DSD `(1/N) Σ_n C`; the DSD is indexed by `p + M/2`.
pub fn pdp_dsd(lsf: &Lsf) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (lsf.m, lsf.n);
    let mut pdp = vec![0.0; n];
    let mut dsd = vec![0.0; m];
    for nn in 0..n {
        let row = &lsf.data[nn * m..(nn + 1) * m];
        pdp[nn] = row.iter().sum::<f64>() / m as f64;
        for (d, v) in dsd.iter_mut().zip(row) {
            *d += v;
        }
    }
    dsd.iter_mut().for_each(|x| *x /= n as f64);
    (pdp, dsd)
}

/// Noise floor estimate: median of the PDP over the largest 10% of delays.
pub fn estimate_noise_floor(pdp: &[f64]) -> f64 {
    let start = ((0.9 * pdp.len() as f64).floor() as usize).min(pdp.len().saturating_sub(1));
    let mut tail = pdp[start..].to_vec();
    tail.sort_by(f64::total_cmp);
    let k = tail.len();
    if k % 2 == 1 {
        tail[k / 2]
    } else {
        0.5 * (tail[k / 2 - 1] + tail[k / 2])
    }
}

/// Mean and RMS spread of the delays/Dopplers; `None` when every bin is
/// thresholded out.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Spreads {
    pub mean_delay: Option<f64>,
    pub rms_delay: Option<f64>,
    pub mean_doppler: Option<f64>,
    pub rms_doppler: Option<f64>,
}

fn moments(values: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (x, p) in values {
        s0 += p;
        s1 += x * p;
        s2 += x * x * p;
    }
    if !(s0 > 0.0) {
        return None;
    }
    let mean = s1 / s0;
    Some((mean, (s2 / s0 - mean * mean).max(0.0).sqrt()))
}

fn passes(values: &[f64], config: &StatsConfig, floor: f64) -> Vec<bool> {
    let peak = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| {
            let above_noise = config
                .noise_margin_db
                .is_none_or(|db| v >= floor * 10f64.powf(db / 10.0));
            let near_peak = config
                .peak_dynamic_db
                .is_none_or(|db| v >= peak * 10f64.powf(-db / 10.0));
            above_noise && near_peak && v > 0.0
        })
        .collect()
}

/// Second central moments of the PDP and DSD over the bins passing both
/// thresholds. `noise_floor` is linear in PDP/DSD units.
pub fn rms_spreads(pdp: &[f64], dsd: &[f64], config: &StatsConfig, noise_floor: f64) -> Spreads {
    let m = dsd.len() as i64;
    let n = pdp.len();
    let wrap = n.saturating_sub(config.negative_delay_bins);
    let keep_t = passes(pdp, config, noise_floor);
    let keep_f = passes(dsd, config, noise_floor);
    let delay = moments(
        pdp.iter()
            .enumerate()
            .filter(|(i, _)| keep_t[*i])
            .map(|(i, &p)| {
                let bin = if i >= wrap { i as f64 - n as f64 } else { i as f64 };
                (bin * config.tau_s, p)
            }),
    );
    let doppler = moments(
        dsd.iter()
            .enumerate()
            .filter(|(i, _)| keep_f[*i])
            .map(|(i, &p)| ((i as i64 - m / 2) as f64 * config.nu_s, p)),
    );
    Spreads {
        mean_delay: delay.map(|d| d.0),
        rms_delay: delay.map(|d| d.1),
        mean_doppler: doppler.map(|d| d.0),
        rms_doppler: doppler.map(|d| d.1),
    }
}

/// `-10 log10(mean |g|^2)` over the region.
pub fn path_loss(tensor: &ChannelTensor, link: usize, k: usize, m: usize) -> Result<f64> {
    let count = region_count(tensor.grid.t, m);
    if link >= tensor.links.len() || k >= count {
        return Err(Error::Validation(format!("region {k} of link {link} out of range")));
    }
    let q = tensor.grid.q;
    let block = &tensor.data[link][k * m * q..(k + 1) * m * q];
    Ok(path_loss_of(block.iter().map(|c| f64::from(c.norm_sqr()))))
}

fn path_loss_of(power: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for p in power {
        sum += p;
        count += 1;
    }
    -10.0 * (sum / count as f64).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub k: usize,
    /// Region center relative to the tensor start, s.
    pub t_center: f64,
    pub pdp: Vec<f64>,
    /// Indexed by `p + M/2`.
    pub dsd: Vec<f64>,
    pub noise_floor: f64,
    pub spreads: Spreads,
    pub path_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityStats {
    pub link: (u16, u16),
    pub config: StatsConfig,
    pub regions: Vec<RegionStats>,
}

/// One CSV row of the statistics export; NaN marks empty regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub k: usize,
    pub t_center_s: f64,
    pub path_loss_db: f64,
    pub rms_delay_ns: f64,
    pub rms_doppler_hz: f64,
    pub mean_delay_ns: f64,
    pub mean_doppler_hz: f64,
}

impl StationarityStats {
    pub fn rows(&self) -> Vec<StatsRow> {
        self.regions
            .iter()
            .map(|r| StatsRow {
                k: r.k,
                t_center_s: r.t_center,
                path_loss_db: r.path_loss_db,
                rms_delay_ns: r.spreads.rms_delay.map_or(f64::NAN, |x| x * 1e9),
                rms_doppler_hz: r.spreads.rms_doppler.unwrap_or(f64::NAN),
                mean_delay_ns: r.spreads.mean_delay.map_or(f64::NAN, |x| x * 1e9),
                mean_doppler_hz: r.spreads.mean_doppler.unwrap_or(f64::NAN),
            })
            .collect()
    }
}

/// Statistics of every complete region of `link`.
pub fn analyze(tensor: &ChannelTensor, link: usize, config: &StatsConfig) -> Result<StationarityStats> {
    let estimator = LsfEstimator::new(config)?;
    let count = region_count(tensor.grid.t, config.m);
    if count == 0 {
        return Err(Error::Validation(format!(
            "tensor has {} snapshots, fewer than one region of {}",
            tensor.grid.t, config.m
        )));
    }
    let one = |k: usize| -> Result<RegionStats> {
        let block = region_block(tensor, link, k, config)?;
        let lsf = estimator.estimate(&block);
        let (pdp, dsd) = pdp_dsd(&lsf);
        let noise_floor = config
            .noise_floor_db
            .map_or_else(|| estimate_noise_floor(&pdp), |db| 10f64.powf(db / 10.0));
        let spreads = rms_spreads(&pdp, &dsd, config, noise_floor);
        Ok(RegionStats {
            k,
            t_center: (k as f64 + 0.5) * config.m as f64 * tensor.grid.t_sys,
            path_loss_db: path_loss_of(block.iter().map(|c| c.norm_sqr())),
            pdp,
            dsd,
            noise_floor,
            spreads,
        })
    };
    #[cfg(feature = "parallel")]
    let regions = {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let regions = (0..count).map(one).collect::<Result<Vec<_>>>()?;
    Ok(StationarityStats {
        link: tensor.links[link],
        config: config.clone(),
        regions,
    })
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// Writes `k,t_center_s,path_loss_db,rms_delay_ns,rms_doppler_hz,mean_delay_ns,mean_doppler_hz`.
pub fn write_stats_csv<W: Write>(rows: &[StatsRow], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "k",
        "t_center_s",
        "path_loss_db",
        "rms_delay_ns",
        "rms_doppler_hz",
        "mean_delay_ns",
        "mean_doppler_hz",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            fmt_value(r.t_center_s),
            fmt_value(r.path_loss_db),
            fmt_value(r.rms_delay_ns),
            fmt_value(r.rms_doppler_hz),
            fmt_value(r.mean_delay_ns),
            fmt_value(r.mean_doppler_hz),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<StatsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
        .collect()
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, n: usize) -> StatsConfig {
        StatsConfig::new(m, n, 500e-6, 250e3)
    }

    #[test]
    fn bank_orthonormal() {
        let b = dps_window_bank(16, 12, 3, 3).unwrap();
        for fam in [&b.time, &b.freq] {
            for (i, u) in fam.iter().enumerate() {
                for (j, v) in fam.iter().enumerate() {
                    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
                }
            }
        }
        assert!(dps_window_bank(4, 4, 5, 1).is_err());
    }

    #[test]
    fn single_bin_marginals() {
        let mut lsf = Lsf {
            m: 4,
            n: 3,
            data: vec![0.0; 12],
        };
        lsf.data[2 * 4 + 3] = 6.0;
        let (pdp, dsd) = pdp_dsd(&lsf);
        assert_eq!(pdp[2], 6.0 / 4.0);
        assert_eq!(dsd[3], 6.0 / 3.0);
        assert_eq!(lsf.get(2, 1), 6.0);
    }

    #[test]
    fn two_tap_closed_forms() {
        let c = StatsConfig {
            tau_s: 100e-9,
            ..cfg(4, 4)
        }
        .without_thresholds();
        let dsd = vec![0.0, 0.0, 1.0, 0.0];
        let s = rms_spreads(&[1.0, 0.0, 1.0, 0.0], &dsd, &c, 0.0);
        assert!((s.rms_delay.unwrap() - 100e-9).abs() < 1e-21);
        let s = rms_spreads(&[1.0, 0.25, 0.0, 0.0], &dsd, &c, 0.0);
        assert!((s.mean_delay.unwrap() - 20e-9).abs() < 1e-18);
        assert!((s.rms_delay.unwrap() - 40e-9).abs() < 1e-18);
        assert_eq!(s.mean_doppler, Some(0.0));
        assert_eq!(s.rms_doppler, Some(0.0));
    }

    #[test]
    fn empty_region_is_flagged() {
        let c = StatsConfig {
            noise_floor_db: Some(0.0),
            ..cfg(4, 4)
        };
        let s = rms_spreads(&[0.1; 4], &[0.1; 4], &c, 1.0);
        assert_eq!(s.rms_delay, None);
        assert_eq!(s.rms_doppler, None);
    }

    #[test]
    fn noise_floor_median() {
        let mut pdp = vec![1.0; 100];
        pdp[90..].copy_from_slice(&[5.0, 1.0, 2.0, 3.0, 4.0, 9.0, 8.0, 7.0, 6.0, 0.5]);
        assert_eq!(estimate_noise_floor(&pdp), 4.5);
    }
}
