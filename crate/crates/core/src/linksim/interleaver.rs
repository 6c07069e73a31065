//! Two-step block interleaver over one OFDM symbol of coded bits.

/// `perm[k]` is the output position of input bit `k`.
pub fn permutation(n_cbps: usize, n_bpsc: usize) -> Vec<usize> {
    let s = (n_bpsc / 2).max(1);
    (0..n_cbps)
        .map(|k| {
            let i = (n_cbps / 16) * (k % 16) + k / 16;
            s * (i / s) + (i + n_cbps - (16 * i / n_cbps)) % s
        })
        .collect()
}

pub fn interleave<T: Copy + Default>(input: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); input.len()];
    for (k, &j) in perm.iter().enumerate() {
        out[j] = input[k];
    }
    out
}

pub fn deinterleave<T: Copy + Default>(input: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&j| input[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_bijective() {
        for (n, b) in [(48, 1), (96, 2), (192, 4), (288, 6)] {
            let mut p = permutation(n, b);
            p.sort_unstable();
            assert_eq!(p, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn adjacent_bits_spread() {
        let p = permutation(96, 2);
        assert_eq!(&p[..4], &[0, 6, 12, 18]);
        let x: Vec<u32> = (0..96).collect();
        assert_eq!(deinterleave(&interleave(&x, &p), &p), x);
    }
}
