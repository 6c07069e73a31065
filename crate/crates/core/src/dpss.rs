//! Discrete prolate spheroidal (Slepian) sequences.
//!
//! The sequences are the eigenvectors of the symmetric tridiagonal matrix
//! that commutes with the sinc kernel, found by Sturm bisection and inverse
//! iteration. Concentration ratios are evaluated against the kernel itself.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Real Slepian family for the band `[-w, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dpss {
    pub len: usize,
    pub half_bandwidth: f64,
    /// `sequences[k][m]`, unit norm.
    pub sequences: Vec<Vec<f64>>,
    /// Energy concentration in the band, non-increasing.
    pub concentrations: Vec<f64>,
}

/// Complex family concentrated on the band `[lo, hi]` (cycles per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedDpss {
    pub len: usize,
    pub band: (f64, f64),
    pub sequences: Vec<Vec<Complex64>>,
    pub concentrations: Vec<f64>,
}

/// First `d` Slepian sequences of length `m` with half-bandwidth `w`.
pub fn slepian(m: usize, w: f64, d: usize) -> Result<Dpss> {
    if m == 0 || d > m {
        return Err(Error::Validation(format!("need 0 < D <= M (M = {m}, D = {d})")));
    }
    if !(w > 0.0 && w < 0.5) {
        return Err(Error::Validation(format!("half-bandwidth {w} outside (0, 0.5)")));
    }
    let n = m as f64;
    let diag: Vec<f64> = (0..m)
        .map(|i| {
            let c = (n - 1.0 - 2.0 * i as f64) / 2.0;
            c * c * (TAU * w).cos()
        })
        .collect();
    let off: Vec<f64> = (1..m).map(|i| i as f64 * (n - i as f64) / 2.0).collect();
    let eig = largest_eigenvalues(&diag, &off, d);
    let mut sequences: Vec<Vec<f64>> = Vec::with_capacity(d);
    for (k, &lambda) in eig.iter().enumerate() {
        let mut v = inverse_iteration(&diag, &off, lambda, k, &sequences)?;
        fix_sign(&mut v, k);
        sequences.push(v);
    }
    let concentrations = sequences.iter().map(|v| concentration(v, w)).collect();
    Ok(Dpss {
        len: m,
        half_bandwidth: w,
        sequences,
        concentrations,
    })
}

/// First `d` sequences concentrated on `[lo, hi]`: the Slepian family of
/// half-bandwidth `(hi - lo) / 2` modulated to the band center.
pub fn generalized(m: usize, lo: f64, hi: f64, d: usize) -> Result<GeneralizedDpss> {
    if !(lo < hi && lo >= -0.5 && hi <= 0.5) {
        return Err(Error::Validation(format!("band [{lo}, {hi}] is not inside [-0.5, 0.5]")));
    }
    let base = slepian(m, 0.5 * (hi - lo), d)?;
    let center = 0.5 * (lo + hi);
    let sequences = base
        .sequences
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(i, &x)| Complex64::from_polar(x, TAU * center * i as f64))
                .collect()
        })
        .collect();
    Ok(GeneralizedDpss {
        len: m,
        band: (lo, hi),
        sequences,
        concentrations: base.concentrations,
    })
}

/// Band-limiting kernel entry `K[m, n]` for the band `[lo, hi]`.
pub fn kernel_entry(lo: f64, hi: f64, k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(hi - lo, 0.0);
    }
    let k = k as f64;
    let j = Complex64::new(0.0, 1.0);
    ((j * TAU * hi * k).exp() - (j * TAU * lo * k).exp()) / (j * TAU * k)
}

/// Fraction of the energy of `v` inside `[-w, w]`: `vᵀ K v` via the
/// autocorrelation of `v`.
pub fn concentration(v: &[f64], w: f64) -> f64 {
    let m = v.len();
    let n = (2 * m).next_power_of_two();
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf.iter_mut().for_each(|x| *x = Complex64::new(x.norm_sqr(), 0.0));
    planner.plan_fft_inverse(n).process(&mut buf);
    let r = |l: usize| buf[l].re / n as f64;
    let mut total = 2.0 * w * r(0);
    for l in 1..m {
        total += 2.0 * r(l) * (TAU * w * l as f64).sin() / (PI * l as f64);
    }
    total
}

/// Number of eigenvalues of the tridiagonal matrix smaller than `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn largest_eigenvalues(diag: &[f64], off: &[f64], d: usize) -> Vec<f64> {
    let m = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < m { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    (0..d)
        .map(|k| {
            // The k-th largest eigenvalue has exactly m - 1 - k eigenvalues below it.
            let target = m - 1 - k;
            let (mut a, mut b) = (lo - 1.0, hi + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if sturm_count(diag, off, mid) > target {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 4.0 * f64::EPSILON * scale {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Solves `(T - shift I) x = rhs` with partial pivoting.
fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, rhs: &mut [f64]) {
    let m = diag.len();
    if m == 1 {
        let p = diag[0] - shift;
        rhs[0] /= if p == 0.0 { f64::EPSILON } else { p };
        return;
    }
    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut dl = off.to_vec();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0; m.saturating_sub(2)];
    for i in 0..m - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = f64::EPSILON;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            rhs[i + 1] -= f * rhs[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 2 < m {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            rhs.swap(i, i + 1);
            rhs[i + 1] -= f * rhs[i];
        }
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = f64::EPSILON;
    }
    rhs[m - 1] /= d[m - 1];
    rhs[m - 2] = (rhs[m - 2] - du[m - 2] * rhs[m - 1]) / d[m - 2];
    for i in (0..m.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) / d[i];
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, k: usize, previous: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = diag.len();
    let scale = diag.iter().chain(off).fold(1.0f64, |a, x| a.max(x.abs()));
    let shift = lambda + 1e-12 * scale;
    // Deterministic start vector with components along every sequence.
    let mut v: Vec<f64> = (0..m)
        .map(|i| 1.0 + 0.5 * ((i * 7 + k * 13) % 17) as f64 / 17.0)
        .collect();
    normalize(&mut v);
    for _ in 0..4 {
        solve_shifted(diag, off, shift, &mut v);
        for p in previous {
            let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(p).for_each(|(x, y)| *x -= dot * y);
        }
        if !(normalize(&mut v) > 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("inverse iteration failed for sequence {k}")));
        }
    }
    Ok(v)
}

/// Symmetric sequences sum to a positive value; antisymmetric sequences
/// start positive.
fn fix_sign(v: &mut [f64], k: usize) {
    let flip = if k % 2 == 0 {
        v.iter().sum::<f64>() < 0.0
    } else {
        let thresh = (1.0 / v.len() as f64).max(1e-7);
        v.iter().find(|x| x.abs() > thresh).is_some_and(|&x| x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn sinc_kernel(m: usize, w: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |i, j| kernel_entry(-w, w, i as i64 - j as i64).re)
    }

    #[test]
    fn matches_dense_eigensolver() {
        let (m, w, d) = (48, 0.08, 10);
        let s = slepian(m, w, d).unwrap();
        let eig = SymmetricEigen::new(sinc_kernel(m, w));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for k in 0..d {
            let col = eig.eigenvectors.column(order[k]);
            let dot: f64 = col.iter().zip(&s.sequences[k]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-9, "k={k} dot={dot}");
            assert!((s.concentrations[k] - eig.eigenvalues[order[k]]).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_and_ordered() {
        let s = slepian(64, 0.1, 16).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let dot: f64 = s.sequences[i].iter().zip(&s.sequences[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "({i},{j}) {dot}");
            }
        }
        assert!(s.concentrations.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn eigenvalue_falloff() {
        // Reference ratios (scipy.signal.windows.dpss, M=64, NW=6.4):
        // 0.99999 at k=7, 0.99796 at k=9, 0.8938 at k=11, 0.24682 at k=13,
        // 0.00799 at k=15.
        let s = slepian(64, 0.1, 16).unwrap();
        let c = &s.concentrations;
        assert!(c[..10].iter().all(|&x| x > 0.99), "{c:?}");
        assert!((c[9] - 0.99796).abs() < 1e-5);
        assert!((c[11] - 0.8938).abs() < 1e-4);
        assert!(c[13] < 0.25 && c[15] < 0.01);
    }

    #[test]
    fn small_case_reference() {
        // scipy: M=8, NW=2 concentration ratios.
        let s = slepian(8, 0.25, 3).unwrap();
        let expect = [0.999_983_85, 0.998_861_86, 0.971_451_89];
        for (a, b) in s.concentrations.iter().zip(expect) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        assert!(s.sequences[0].iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn generalized_band_eigenvectors() {
        let (m, lo, hi) = (40, -0.2, 0.05);
        let g = generalized(m, lo, hi, 6).unwrap();
        let k = DMatrix::from_fn(m, m, |i, j| kernel_entry(lo, hi, i as i64 - j as i64));
        for (v, &lambda) in g.sequences.iter().zip(&g.concentrations) {
            let x = nalgebra::DVector::from_column_slice(v);
            let kx = &k * &x;
            let err = (kx - x * Complex64::new(lambda, 0.0)).norm();
            assert!(err < 1e-9, "{err}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(slepian(8, 0.6, 2).is_err());
        assert!(slepian(8, 0.1, 9).is_err());
        assert!(generalized(8, 0.2, 0.1, 2).is_err());
        let one = slepian(1, 0.2, 1).unwrap();
        assert_eq!(one.sequences[0], vec![1.0]);
    }
}
