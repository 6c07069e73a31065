//! Software OFDM link (10 MHz, 64-point FFT, 48 data subcarriers) used to
//! turn channel tensors into time-variant packet error rates.

pub mod coding;
pub mod interleaver;
mod link;
pub mod modulation;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use coding::CodeRate;
pub use link::{run_awgn, run_ensemble, run_link, AwgnPoint, Transceiver, DATA_SUBCARRIERS};
pub use modulation::Modulation;

use crate::chstats::csv_err;
use crate::{Error, Result};

/// Modulation and coding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mcs {
    /// QPSK, rate 1/2.
    Qpsk12,
    /// 64-QAM, rate 3/4.
    Qam64_34,
    /// QPSK without channel coding (test mode).
    UncodedQpsk,
}

impl Mcs {
    pub fn modulation(self) -> Modulation {
        match self {
            Mcs::Qpsk12 | Mcs::UncodedQpsk => Modulation::Qpsk,
            Mcs::Qam64_34 => Modulation::Qam64,
        }
    }

    pub fn rate(self) -> Option<CodeRate> {
        match self {
            Mcs::Qpsk12 => Some(CodeRate::Half),
            Mcs::Qam64_34 => Some(CodeRate::ThreeQuarters),
            Mcs::UncodedQpsk => None,
        }
    }

    /// Coded bits per OFDM symbol.
    pub fn n_cbps(self) -> usize {
        DATA_SUBCARRIERS.len() * self.modulation().bits_per_symbol()
    }

    /// Data bits per OFDM symbol.
    pub fn n_dbps(self) -> usize {
        match self.rate() {
            Some(CodeRate::Half) => self.n_cbps() / 2,
            Some(CodeRate::ThreeQuarters) => self.n_cbps() * 3 / 4,
            None => self.n_cbps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Receiver noise `density + 10 log10(B) + NF` dBm; the channel tensor
    /// carries the path gain.
    Thermal { density_dbm_hz: f64, noise_figure_db: f64 },
    /// Fixed SNR relative to a unit-gain channel.
    Snr { db: f64 },
    None,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Thermal {
            density_dbm_hz: -174.0,
            noise_figure_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub bandwidth: f64,
    pub fft_size: usize,
    pub guard_interval: f64,
    /// Preamble and signal field ahead of the first data symbol, s.
    pub preamble: f64,
    pub mcs: Mcs,
    pub packet_bytes: usize,
    /// Packets per second.
    pub packet_rate: f64,
    pub tx_power_dbm: f64,
    pub noise: NoiseModel,
    /// PER window length, s.
    pub window_s: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            bandwidth: 10e6,
            fft_size: 64,
            guard_interval: 1.6e-6,
            preamble: 40e-6,
            mcs: Mcs::Qpsk12,
            packet_bytes: 100,
            packet_rate: 1000.0,
            tx_power_dbm: 0.0,
            noise: NoiseModel::default(),
            window_s: 0.12,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size != 64 {
            return Err(Error::Validation("only the 64-point OFDM layout is supported".into()));
        }
        let positive = [self.bandwidth, self.packet_rate, self.window_s];
        if positive.iter().any(|v| !(*v > 0.0)) || self.packet_bytes == 0 {
            return Err(Error::Validation("PHY parameters must be positive".into()));
        }
        if !(self.guard_interval >= 0.0 && self.preamble >= 0.0) {
            return Err(Error::Validation("guard interval and preamble must be non-negative".into()));
        }
        Ok(())
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.fft_size as f64
    }

    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing() + self.guard_interval
    }

    /// Service field, payload and tail bits padded to whole symbols.
    pub fn n_symbols(&self) -> usize {
        (16 + 8 * self.packet_bytes + 6).div_ceil(self.mcs.n_dbps())
    }

    pub fn airtime(&self) -> f64 {
        self.preamble + self.n_symbols() as f64 * self.symbol_duration()
    }

    /// Offered load, bit/s.
    pub fn offered_load(&self) -> f64 {
        8.0 * self.packet_bytes as f64 * self.packet_rate
    }

    /// Noise variance relative to unit transmit energy per subcarrier.
    pub fn noise_variance(&self) -> f64 {
        match self.noise {
            NoiseModel::Thermal {
                density_dbm_hz,
                noise_figure_db,
            } => {
                let n_dbm = density_dbm_hz + 10.0 * self.bandwidth.log10() + noise_figure_db;
                10f64.powf((n_dbm - self.tx_power_dbm) / 10.0)
            }
            NoiseModel::Snr { db } => 10f64.powf(-db / 10.0),
            NoiseModel::None => 0.0,
        }
    }
}

/// Time-variant PER of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSeries {
    pub window_s: f64,
    pub per: Vec<f64>,
    pub packets: Vec<usize>,
}

impl PerSeries {
    pub fn t_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.window_s
    }
}

/// Pointwise min/mean/max over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerEnvelope {
    pub window_s: f64,
    pub runs: usize,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn ensemble_per(runs: &[PerSeries]) -> Result<PerEnvelope> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Validation("ensemble of zero runs".into()))?;
    let k = first.per.len();
    if runs.iter().any(|r| r.per.len() != k || r.window_s != first.window_s) {
        return Err(Error::Validation("runs cover different window grids".into()));
    }
    let mut min = vec![f64::INFINITY; k];
    let mut max = vec![f64::NEG_INFINITY; k];
    let mut mean = vec![0.0; k];
    for r in runs {
        for (i, &p) in r.per.iter().enumerate() {
            min[i] = min[i].min(p);
            max[i] = max[i].max(p);
            mean[i] += p;
        }
    }
    for (i, m) in mean.iter_mut().enumerate() {
        // Keep min <= mean <= max exact under rounding.
        *m = (*m / runs.len() as f64).clamp(min[i], max[i]);
    }
    Ok(PerEnvelope {
        window_s: first.window_s,
        runs: runs.len(),
        min,
        mean,
        max,
    })
}

/// Empirical distribution of `γ_ref[k] / γ̄[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCdf {
    /// Sorted ratios over windows with a non-zero ensemble mean.
    pub ratios: Vec<f64>,
    /// Windows skipped because the ensemble mean is zero.
    pub excluded: usize,
}

impl RatioCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        if self.ratios.is_empty() {
            return f64::NAN;
        }
        self.ratios.partition_point(|&r| r <= x) as f64 / self.ratios.len() as f64
    }
}

pub fn per_ratio_cdf(reference: &[f64], mean: &[f64]) -> Result<RatioCdf> {
    if reference.len() != mean.len() {
        return Err(Error::Validation("PER series of different length".into()));
    }
    let mut ratios = Vec::with_capacity(mean.len());
    let mut excluded = 0;
    for (&r, &m) in reference.iter().zip(mean) {
        if m > 0.0 {
            ratios.push(r / m);
        } else {
            excluded += 1;
        }
    }
    ratios.sort_by(f64::total_cmp);
    Ok(RatioCdf { ratios, excluded })
}

#[derive(Debug, Serialize, Deserialize)]
struct PerRow {
    k: usize,
    t_center_s: f64,
    per: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvelopeRow {
    k: usize,
    t_center_s: f64,
    per_min: f64,
    per_mean: f64,
    per_max: f64,
}

pub fn write_per_csv<W: Write>(series: &PerSeries, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (k, &per) in series.per.iter().enumerate() {
        wr.serialize(PerRow {
            k,
            t_center_s: series.t_center(k),
            per,
        })
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `k,t_center_s,per` rows; packet counts are not stored.
pub fn read_per_csv<R: Read>(r: R) -> Result<PerSeries> {
    let mut rd = csv::Reader::from_reader(r);
    let mut per = Vec::new();
    let mut window_s = f64::NAN;
    for (i, row) in rd.deserialize::<PerRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.k != i {
            return Err(Error::Validation(format!("PER rows out of order at k = {}", row.k)));
        }
        if i == 0 {
            window_s = 2.0 * row.t_center_s;
        }
        per.push(row.per);
    }
    let n = per.len();
    Ok(PerSeries {
        window_s,
        per,
        packets: vec![0; n],
    })
}

pub fn write_envelope_csv<W: Write>(env: &PerEnvelope, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for k in 0..env.mean.len() {
        wr.serialize(EnvelopeRow {
            k,
            t_center_s: (k as f64 + 0.5) * env.window_s,
            per_min: env.min[k],
            per_mean: env.mean[k],
            per_max: env.max[k],
        })
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_envelope_csv<R: Read>(r: R) -> Result<PerEnvelope> {
    let mut rd = csv::Reader::from_reader(r);
    let (mut min, mut mean, mut max) = (Vec::new(), Vec::new(), Vec::new());
    let mut window_s = f64::NAN;
    for (i, row) in rd.deserialize::<EnvelopeRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.k != i {
            return Err(Error::Validation(format!("envelope rows out of order at k = {}", row.k)));
        }
        if i == 0 {
            window_s = 2.0 * row.t_center_s;
        }
        min.push(row.per_min);
        mean.push(row.per_mean);
        max.push(row.per_max);
    }
    Ok(PerEnvelope {
        window_s,
        runs: 0,
        min,
        mean,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_layout() {
        let phy = PhyConfig::default();
        assert!((phy.symbol_duration() - 8e-6).abs() < 1e-15);
        assert_eq!(Mcs::Qpsk12.n_dbps(), 48);
        assert_eq!(Mcs::Qam64_34.n_dbps(), 216);
        assert_eq!(phy.n_symbols(), 18);
        assert_eq!(phy.offered_load(), 800_000.0);
    }

    #[test]
    fn thermal_noise_level() {
        let phy = PhyConfig::default();
        // -174 + 70 + 10 = -94 dBm against 0 dBm.
        assert!((10.0 * phy.noise_variance().log10() + 94.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_and_cdf() {
        let mk = |p: Vec<f64>| PerSeries {
            window_s: 0.12,
            packets: vec![120; p.len()],
            per: p,
        };
        let env = ensemble_per(&[mk(vec![0.0, 0.2]), mk(vec![1.0, 0.2])]).unwrap();
        assert_eq!((env.min[0], env.mean[0], env.max[0]), (0.0, 0.5, 1.0));
        assert!(ensemble_per(&[]).is_err());
        let c = per_ratio_cdf(&[0.5, 1.0, 2.0, 0.3], &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(c.excluded, 1);
        assert!((c.cdf(1.0) - 2.0 / 3.0).abs() < 1e-15);
    }
}
