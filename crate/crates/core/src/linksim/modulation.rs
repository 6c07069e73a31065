//! Gray-mapped QPSK and 64-QAM with max-log LLR demapping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Qpsk,
    Qam64,
}

// Per-axis Gray labels: index = label bits (MSB first), value = level.
const PAM2: [f64; 2] = [-1.0, 1.0];
const PAM8: [f64; 8] = [-7.0, -5.0, -1.0, -3.0, 7.0, 5.0, 1.0, 3.0];

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam64 => 6,
        }
    }

    fn axis(self) -> (&'static [f64], f64) {
        match self {
            Modulation::Qpsk => (&PAM2, std::f64::consts::FRAC_1_SQRT_2),
            Modulation::Qam64 => (&PAM8, 1.0 / 42f64.sqrt()),
        }
    }

    /// Unit average energy symbols from `bits` (length a multiple of the
    /// bits per symbol).
    pub fn map(self, bits: &[u8]) -> Vec<Complex64> {
        let k = self.bits_per_symbol() / 2;
        let (levels, scale) = self.axis();
        let label = |b: &[u8]| b.iter().fold(0usize, |acc, &x| (acc << 1) | usize::from(x));
        bits.chunks_exact(2 * k)
            .map(|c| Complex64::new(levels[label(&c[..k])], levels[label(&c[k..])]) * scale)
            .collect()
    }

    /// Max-log LLRs of `r = h s + n`, `n ~ CN(0, n0)`.
    pub fn demap(self, r: Complex64, h: Complex64, n0: f64, out: &mut Vec<f64>) {
        let k = self.bits_per_symbol() / 2;
        let (levels, scale) = self.axis();
        let g = h.norm_sqr();
        if g == 0.0 {
            out.extend(std::iter::repeat_n(0.0, 2 * k));
            return;
        }
        let z = r / h;
        let w = g / n0.max(1e-12);
        for x in [z.re, z.im] {
            for bit in 0..k {
                let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                for (label, &lv) in levels.iter().enumerate() {
                    let d = (x - lv * scale).powi(2);
                    if (label >> (k - 1 - bit)) & 1 == 0 {
                        d0 = d0.min(d);
                    } else {
                        d1 = d1.min(d);
                    }
                }
                out.push((d1 - d0) * w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam64] {
            let n = m.bits_per_symbol();
            let all: Vec<u8> = (0..1usize << n).flat_map(|v| (0..n).rev().map(move |i| ((v >> i) & 1) as u8)).collect();
            let s = m.map(&all);
            let e: f64 = s.iter().map(|x| x.norm_sqr()).sum::<f64>() / s.len() as f64;
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_neighbors_differ_by_one_bit() {
        let mut by_level: Vec<(f64, usize)> = PAM8.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        by_level.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in by_level.windows(2) {
            assert_eq!((w[0].1 ^ w[1].1).count_ones(), 1);
        }
    }

    #[test]
    fn noiseless_hard_decisions() {
        let bits: Vec<u8> = (0..60).map(|i| ((i * 5 + 1) % 7 < 3) as u8).collect();
        let h = Complex64::from_polar(0.3, 1.1);
        for m in [Modulation::Qpsk, Modulation::Qam64] {
            let mut llr = Vec::new();
            for s in m.map(&bits) {
                m.demap(h * s, h, 1e-3, &mut llr);
            }
            let dec: Vec<u8> = llr.iter().map(|&l| (l < 0.0) as u8).collect();
            assert_eq!(dec, bits);
        }
    }
}
