//! Scrambler, K=7 convolutional code (133/171 octal), puncturing and a
//! soft-decision Viterbi decoder.
//!
//! LLRs are `log P(b=0) / P(b=1)`: positive values favor a zero bit.

/// Default scrambler seed (all ones).
pub const SCRAMBLER_SEED: u8 = 0x7f;

const G0: u32 = 0o133;
const G1: u32 = 0o171;
const STATES: usize = 64;

/// Self-synchronizing sequence `x^7 + x^4 + 1` XORed onto `bits`.
/// Applying it twice with the same seed restores the input.
pub fn scramble(bits: &mut [u8], seed: u8) {
    let mut state = seed & 0x7f;
    for b in bits.iter_mut() {
        let fb = ((state >> 6) ^ (state >> 3)) & 1;
        state = ((state << 1) | fb) & 0x7f;
        *b ^= fb;
    }
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

#[inline]
fn outputs(state: usize, bit: u8) -> (u8, u8) {
    let reg = (u32::from(bit) << 6) | state as u32;
    (parity(reg & G0), parity(reg & G1))
}

#[inline]
fn next_state(state: usize, bit: u8) -> usize {
    ((usize::from(bit) << 6) | state) >> 1
}

/// Rate 1/2 encoding starting from the all-zero state; output is
/// `a0 b0 a1 b1 …`.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * bits.len());
    let mut state = 0;
    for &b in bits {
        let (a, c) = outputs(state, b);
        out.push(a);
        out.push(c);
        state = next_state(state, b);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeRate {
    Half,
    ThreeQuarters,
}

impl CodeRate {
    /// Keep-mask over one puncturing period of mother-code output.
    fn pattern(self) -> &'static [bool] {
        match self {
            CodeRate::Half => &[true, true],
            // a0 b0 a1 (b1) (a2) b2
            CodeRate::ThreeQuarters => &[true, true, true, false, false, true],
        }
    }

    /// Coded bits per `n` data bits.
    pub fn coded_len(self, n: usize) -> usize {
        match self {
            CodeRate::Half => 2 * n,
            CodeRate::ThreeQuarters => n * 4 / 3,
        }
    }
}

pub fn puncture(coded: &[u8], rate: CodeRate) -> Vec<u8> {
    let p = rate.pattern();
    coded.iter().enumerate().filter(|(i, _)| p[i % p.len()]).map(|(_, &b)| b).collect()
}

/// Re-inserts zero LLRs at punctured positions; `n` is the mother-code
/// length.
pub fn depuncture(llr: &[f64], rate: CodeRate, n: usize) -> Vec<f64> {
    let p = rate.pattern();
    let mut out = Vec::with_capacity(n);
    let mut it = llr.iter();
    for i in 0..n {
        out.push(if p[i % p.len()] { *it.next().unwrap_or(&0.0) } else { 0.0 });
    }
    out
}

/// Maximum-likelihood sequence estimate from mother-code LLRs
/// (`2 * n_bits` values). The trellis starts in state zero; the survivor
/// of the best final state is traced back.
pub fn viterbi_decode(llr: &[f64]) -> Vec<u8> {
    let n = llr.len() / 2;
    // Per next state and predecessor choice j: output signs (+1 for a zero
    // bit). The predecessor is ((ns << 1) & 63) | j, the input bit ns >> 5.
    let mut signs = [[(0.0, 0.0); 2]; STATES];
    for (ns, entry) in signs.iter_mut().enumerate() {
        for (j, e) in entry.iter_mut().enumerate() {
            let (a, b) = outputs(((ns << 1) & (STATES - 1)) | j, (ns >> 5) as u8);
            *e = (1.0 - 2.0 * f64::from(a), 1.0 - 2.0 * f64::from(b));
        }
    }
    // Unreachable start states get a large finite penalty.
    let mut metric = [-1e300; STATES];
    metric[0] = 0.0;
    let mut next = [0.0; STATES];
    // Bit s of decisions[t]: which predecessor won for state s.
    let mut decisions = vec![0u64; n];
    for t in 0..n {
        let (la, lb) = (llr[2 * t], llr[2 * t + 1]);
        let mut dec = 0u64;
        for ns in 0..STATES {
            let p0 = (ns << 1) & (STATES - 1);
            let [(a0, b0), (a1, b1)] = signs[ns];
            let m0 = metric[p0] + a0 * la + b0 * lb;
            let m1 = metric[p0 | 1] + a1 * la + b1 * lb;
            if m1 > m0 {
                next[ns] = m1;
                dec |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        decisions[t] = dec;
        metric = next;
    }
    let mut state = (0..STATES)
        .max_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut bits = vec![0u8; n];
    for t in (0..n).rev() {
        bits[t] = (state >> 5) as u8;
        let j = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | j;
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scrambler_is_involution() {
        let orig: Vec<u8> = (0..200).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let mut b = orig.clone();
        scramble(&mut b, SCRAMBLER_SEED);
        assert_ne!(b, orig);
        scramble(&mut b, SCRAMBLER_SEED);
        assert_eq!(b, orig);
    }

    #[test]
    fn scrambler_period_127() {
        let mut z = vec![0u8; 254];
        scramble(&mut z, SCRAMBLER_SEED);
        assert_eq!(z[..127], z[127..]);
        assert_eq!(z.iter().take(127).filter(|&&b| b == 1).count(), 64);
    }

    #[test]
    fn impulse_response_matches_generators() {
        let mut bits = vec![0u8; 7];
        bits[0] = 1;
        let c = conv_encode(&bits);
        let a: Vec<u8> = c.iter().step_by(2).copied().collect();
        let b: Vec<u8> = c.iter().skip(1).step_by(2).copied().collect();
        // Register input sits at the generator MSB.
        let bits_of = |g: u32| (0..7).map(|i| ((g >> (6 - i)) & 1) as u8).collect::<Vec<_>>();
        assert_eq!(a, bits_of(G0));
        assert_eq!(b, bits_of(G1));
    }

    #[test]
    fn viterbi_clean_and_punctured() {
        let mut bits: Vec<u8> = (0..300).map(|i| ((i * 13 + i / 7) % 5 < 2) as u8).collect();
        bits.extend([0; 6]);
        let coded = conv_encode(&bits);
        let llr: Vec<f64> = coded.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(viterbi_decode(&llr), bits);
        let p = puncture(&coded, CodeRate::ThreeQuarters);
        assert_eq!(p.len(), CodeRate::ThreeQuarters.coded_len(bits.len()));
        let pl: Vec<f64> = p.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(viterbi_decode(&depuncture(&pl, CodeRate::ThreeQuarters, coded.len())), bits);
    }

    #[test]
    fn viterbi_corrects_sparse_errors() {
        let mut bits: Vec<u8> = (0..200).map(|i| (i % 3 == 1) as u8).collect();
        bits.extend([0; 6]);
        let coded = conv_encode(&bits);
        let mut llr: Vec<f64> = coded.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        for i in [10, 60, 140, 250, 330] {
            llr[i] = -llr[i];
        }
        assert_eq!(viterbi_decode(&llr), bits);
    }
}
