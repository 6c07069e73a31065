use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::coding::{conv_encode, depuncture, puncture, scramble, viterbi_decode, SCRAMBLER_SEED};
use super::interleaver::{deinterleave, interleave, permutation};
use super::{PerSeries, PhyConfig};
use crate::mnct::ChannelTensor;
use crate::rng::{stream, tag};
use crate::{Error, Result};

/// Data subcarrier indices (pilots at ±7 and ±21, DC unused).
pub const DATA_SUBCARRIERS: [i32; 48] = [
    -26, -25, -24, -23, -22, -20, -19, -18, -17, -16, -15, -14, -13, -12, -11, -10, -9, -8, -6, -5, -4, -3, -2,
    -1, 1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 22, 23, 24, 25, 26,
];

/// Encoder and receiver chain for one PHY configuration.
#[derive(Debug, Clone)]
pub struct Transceiver {
    pub phy: PhyConfig,
    perm: Vec<usize>,
    n_sym: usize,
    n_data: usize,
}

impl Transceiver {
    pub fn new(phy: PhyConfig) -> Result<Self> {
        phy.validate()?;
        let mcs = phy.mcs;
        Ok(Self {
            perm: permutation(mcs.n_cbps(), mcs.modulation().bits_per_symbol()),
            n_sym: phy.n_symbols(),
            n_data: phy.n_symbols() * mcs.n_dbps(),
            phy,
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_sym
    }

    /// Data bits of a packet: 16 service bits, the payload, 6 tail bits and
    /// padding, scrambled with the tail forced back to zero.
    fn data_bits(&self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let payload = 8 * self.phy.packet_bytes;
        let mut bits = vec![0u8; self.n_data];
        for b in &mut bits[16..16 + payload] {
            *b = rng.random::<bool>() as u8;
        }
        scramble(&mut bits, SCRAMBLER_SEED);
        bits[16 + payload..16 + payload + 6].fill(0);
        bits
    }

    fn encode(&self, data: &[u8]) -> Vec<u8> {
        match self.phy.mcs.rate() {
            Some(rate) => puncture(&conv_encode(data), rate),
            None => data.to_vec(),
        }
    }

    fn decode(&self, llr: &[f64]) -> Vec<u8> {
        match self.phy.mcs.rate() {
            Some(rate) => viterbi_decode(&depuncture(llr, rate, 2 * self.n_data)),
            None => llr.iter().map(|&l| (l < 0.0) as u8).collect(),
        }
    }

    /// Sends one packet through per-symbol channel coefficients `h`
    /// (`n_symbols x 48`, symbol-major) with noise variance `n0`. Returns
    /// true when the payload is received in error.
    pub fn packet_error(&self, h: &[Complex64], n0: f64, payload_rng: &mut ChaCha8Rng, noise_rng: &mut ChaCha8Rng) -> bool {
        let modulation = self.phy.mcs.modulation();
        let n_cbps = self.phy.mcs.n_cbps();
        let data = self.data_bits(payload_rng);
        let coded = self.encode(&data);
        let sigma = (n0 / 2.0).sqrt();
        let mut llr = Vec::with_capacity(coded.len());
        let mut sym_llr = Vec::with_capacity(n_cbps);
        for (s, chunk) in coded.chunks_exact(n_cbps).enumerate() {
            let symbols = modulation.map(&interleave(chunk, &self.perm));
            sym_llr.clear();
            for (i, x) in symbols.iter().enumerate() {
                let hk = h[s * DATA_SUBCARRIERS.len() + i];
                let mut r = hk * x;
                if n0 > 0.0 {
                    let (a, b): (f64, f64) = (noise_rng.sample(StandardNormal), noise_rng.sample(StandardNormal));
                    r += Complex64::new(a, b) * sigma;
                }
                modulation.demap(r, hk, n0, &mut sym_llr);
            }
            llr.extend(deinterleave(&sym_llr, &self.perm));
        }
        let mut decoded = self.decode(&llr);
        scramble(&mut decoded, SCRAMBLER_SEED);
        let mut sent = data;
        scramble(&mut sent, SCRAMBLER_SEED);
        let payload = 16..16 + 8 * self.phy.packet_bytes;
        decoded[payload.clone()] != sent[payload]
    }
}

fn packet_rngs(seed: u64, i: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (stream(seed, &[tag::PAYLOAD, i]), stream(seed, &[tag::LINK_NOISE, i]))
}

#[cfg(feature = "parallel")]
fn map_packets<F: Fn(usize) -> bool + Sync + Send>(n: usize, f: F) -> Vec<bool> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_packets<F: Fn(usize) -> bool>(n: usize, f: F) -> Vec<bool> {
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnPoint {
    pub errors: usize,
    pub packets: usize,
}

impl AwgnPoint {
    pub fn per(&self) -> f64 {
        self.errors as f64 / self.packets as f64
    }
}

/// Packets over a flat unit-gain channel with the configured noise model.
pub fn run_awgn(phy: &PhyConfig, packets: usize, seed: u64) -> Result<AwgnPoint> {
    let trx = Transceiver::new(phy.clone())?;
    let h = vec![Complex64::new(1.0, 0.0); trx.n_sym * DATA_SUBCARRIERS.len()];
    let n0 = phy.noise_variance();
    let errors = map_packets(packets, |i| {
        let (mut p, mut z) = packet_rngs(seed, i as u64);
        trx.packet_error(&h, n0, &mut p, &mut z)
    });
    Ok(AwgnPoint {
        errors: errors.iter().filter(|&&e| e).count(),
        packets,
    })
}

/// Fractional tensor positions of the data subcarriers.
fn subcarrier_positions(phy: &PhyConfig, tensor: &ChannelTensor) -> Result<Vec<f64>> {
    let g = &tensor.grid;
    let center = (g.q / 2) as f64;
    let pos: Vec<f64> = DATA_SUBCARRIERS
        .iter()
        .map(|&k| {
            let f = f64::from(k) * phy.subcarrier_spacing();
            if g.convention.centered {
                f / g.delta_f + center
            } else {
                f / g.delta_f
            }
        })
        .collect();
    if pos.iter().any(|&p| p < 0.0 || p > (g.q - 1) as f64) {
        return Err(Error::Validation(format!(
            "tensor band ({} x {} Hz) does not cover the {} Hz OFDM signal",
            g.q, g.delta_f, phy.bandwidth
        )));
    }
    Ok(pos)
}

fn channel_at(tensor: &ChannelTensor, link: usize, m: usize, pos: &[f64], out: &mut Vec<Complex64>) {
    let row = tensor.snapshot(link, m);
    let q_max = row.len() - 1;
    for &p in pos {
        let i = (p.floor() as usize).min(q_max);
        let j = (i + 1).min(q_max);
        let w = p - i as f64;
        let a = Complex64::new(f64::from(row[i].re), f64::from(row[i].im));
        let b = Complex64::new(f64::from(row[j].re), f64::from(row[j].im));
        out.push(a * (1.0 - w) + b * w);
    }
}

/// Time-variant PER of `link` of `tensor`. Packet `i` starts at
/// `i / packet_rate`; each OFDM symbol sees the snapshot active at its
/// midpoint.
pub fn run_link(tensor: &ChannelTensor, link: usize, phy: &PhyConfig, seed: u64) -> Result<PerSeries> {
    let trx = Transceiver::new(phy.clone())?;
    if link >= tensor.links.len() {
        return Err(Error::Validation(format!("link index {link} out of range")));
    }
    let g = &tensor.grid;
    let duration = g.duration();
    let windows = (duration / phy.window_s + 1e-9).floor() as usize;
    if windows == 0 {
        return Err(Error::Validation(format!(
            "tensor of {duration} s is shorter than one PER window of {} s",
            phy.window_s
        )));
    }
    let pos = subcarrier_positions(phy, tensor)?;
    let airtime = phy.airtime();
    let t_sym = phy.symbol_duration();
    let mut starts = Vec::new();
    for i in 0.. {
        let t0 = i as f64 / phy.packet_rate;
        if t0 + airtime > duration || (t0 / phy.window_s).floor() as usize >= windows {
            break;
        }
        starts.push(t0);
    }
    let n0 = phy.noise_variance();
    let errors = map_packets(starts.len(), |i| {
        let mut h = Vec::with_capacity(trx.n_sym * DATA_SUBCARRIERS.len());
        for s in 0..trx.n_sym {
            let t = starts[i] + phy.preamble + (s as f64 + 0.5) * t_sym;
            let m = ((t / g.t_sys).floor() as usize).min(g.t - 1);
            channel_at(tensor, link, m, &pos, &mut h);
        }
        let (mut p, mut z) = packet_rngs(seed, i as u64);
        trx.packet_error(&h, n0, &mut p, &mut z)
    });
    let mut err = vec![0usize; windows];
    let mut packets = vec![0usize; windows];
    for (t0, e) in starts.iter().zip(&errors) {
        let k = (t0 / phy.window_s).floor() as usize;
        packets[k] += 1;
        err[k] += usize::from(*e);
    }
    let per = err
        .iter()
        .zip(&packets)
        .map(|(&e, &n)| if n == 0 { f64::NAN } else { e as f64 / n as f64 })
        .collect();
    Ok(PerSeries {
        window_s: phy.window_s,
        per,
        packets,
    })
}

/// PER series of the same link over several tensors, one link-level seed
/// per tensor.
pub fn run_ensemble(tensors: &[ChannelTensor], link: usize, phy: &PhyConfig, seeds: &[u64]) -> Result<Vec<PerSeries>> {
    if tensors.is_empty() || tensors.len() != seeds.len() {
        return Err(Error::Validation("need one seed per tensor and at least one tensor".into()));
    }
    tensors.iter().zip(seeds).map(|(t, &s)| run_link(t, link, phy, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linksim::{Mcs, NoiseModel};

    #[test]
    fn data_subcarrier_layout() {
        assert!(!DATA_SUBCARRIERS.iter().any(|k| [0, 7, -7, 21, -21].contains(k)));
        let mut v = DATA_SUBCARRIERS.to_vec();
        v.dedup();
        assert_eq!(v.len(), 48);
    }

    #[test]
    fn noiseless_and_deep_noise() {
        for mcs in [Mcs::Qpsk12, Mcs::Qam64_34, Mcs::UncodedQpsk] {
            let mut phy = PhyConfig {
                mcs,
                noise: NoiseModel::None,
                ..Default::default()
            };
            assert_eq!(run_awgn(&phy, 200, 1).unwrap().errors, 0);
            phy.noise = NoiseModel::Snr { db: -10.0 };
            assert_eq!(run_awgn(&phy, 200, 1).unwrap().errors, 200);
        }
    }
}
