//! Resampling of channel tensors from the sounding grid onto an emulation
//! grid by projection onto a two-dimensional DPS subspace.
//!
//! Both grids are embedded in a common interpolation lattice with spacings
//! `T_i = gcd(T_s, T_e)` and `F_i = gcd(F_s, F_e)`. Per block of
//! `M_s + 2Δ` sounding snapshots the response is modeled as
//! `g[m, c] = Σ_ℓ Σ_k u_ℓ[m] v_k[c] ψ_{ℓ,k}` with time sequences
//! concentrated on `[-ν_max, ν_max]` and frequency sequences on
//! `[-θ_max, 0]` (delays enter as `exp(-j2π f τ)`). The least-squares
//! estimate factorizes into a time and a frequency projector because the
//! sampling indicator is a Kronecker product.

use nalgebra::DMatrix;
use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::dpss::{generalized, slepian};
use crate::mnct::{ChannelTensor, FreqConvention, TensorGrid};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Lattice quanta: 1 ns in time, 1 Hz in frequency.
const TIME_QUANTUM: f64 = 1e-9;
const FREQ_QUANTUM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub t_s: f64,
    pub t_e: f64,
    pub t_i: f64,
    pub f_s: f64,
    pub f_e: f64,
    pub f_i: f64,
    pub r_t_s: usize,
    pub r_t_e: usize,
    pub r_f_s: usize,
    pub r_f_e: usize,
    pub m_s: usize,
    pub n_s: usize,
    pub m_i: usize,
    pub n_i: usize,
    pub m_e: usize,
    pub n_e: usize,
    pub overlap: usize,
}

fn to_lattice(x: f64, quantum: f64, name: &str) -> Result<u64> {
    let v = x / quantum;
    let r = v.round();
    if !(r >= 1.0) || (v - r).abs() > 1e-6 * r.max(1.0) || r > 1e15 {
        return Err(Error::Validation(format!(
            "{name} = {x} is not a positive integer multiple of the {quantum} lattice quantum"
        )));
    }
    Ok(r as u64)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Common interpolation lattice of the sounding and emulation grids.
/// `M_e` is the number of emulation samples covering the `M_s` interior
/// sounding snapshots of a block.
pub fn plan_grids(
    t_s: f64,
    t_e: f64,
    f_s: f64,
    f_e: f64,
    m_s: usize,
    n_s: usize,
    n_e: usize,
    overlap: usize,
) -> Result<GridPlan> {
    let ts = to_lattice(t_s, TIME_QUANTUM, "T_s")?;
    let te = to_lattice(t_e, TIME_QUANTUM, "T_e")?;
    let fs = to_lattice(f_s, FREQ_QUANTUM, "F_s")?;
    let fe = to_lattice(f_e, FREQ_QUANTUM, "F_e")?;
    if m_s == 0 || n_s == 0 || n_e == 0 {
        return Err(Error::Validation("block sizes must be positive".into()));
    }
    let ti = gcd(ts, te);
    let fi = gcd(fs, fe);
    let (r_t_s, r_t_e) = ((ts / ti) as usize, (te / ti) as usize);
    let (r_f_s, r_f_e) = ((fs / fi) as usize, (fe / fi) as usize);
    if (m_s * r_t_s) % r_t_e != 0 {
        return Err(Error::Validation("emulation spacing does not tile the block".into()));
    }
    Ok(GridPlan {
        t_s,
        t_e,
        t_i: ti as f64 * TIME_QUANTUM,
        f_s,
        f_e,
        f_i: fi as f64 * FREQ_QUANTUM,
        r_t_s,
        r_t_e,
        r_f_s,
        r_f_e,
        m_s,
        n_s,
        m_i: (m_s + 2 * overlap) * r_t_s,
        n_i: n_s * r_f_s,
        m_e: m_s * r_t_s / r_t_e,
        n_e,
        overlap,
    })
}

impl GridPlan {
    /// Sounding snapshots per block window.
    pub fn window(&self) -> usize {
        self.m_s + 2 * self.overlap
    }

    /// Replaces `N_i` by a smaller lattice size; sounding subcarriers that
    /// fall outside are dropped.
    pub fn truncate_n_i(&mut self, n_i: usize) -> Result<()> {
        if n_i == 0 || n_i > self.n_i {
            return Err(Error::Validation(format!("cannot truncate N_i = {} to {n_i}", self.n_i)));
        }
        self.n_i = n_i;
        Ok(())
    }

    /// Lattice column of sounding subcarrier `q` (centered axis), if inside.
    pub fn sounding_column(&self, q: usize) -> Option<usize> {
        let c = (q as i64 - (self.n_s / 2) as i64) * self.r_f_s as i64 + (self.n_i / 2) as i64;
        (0..self.n_i as i64).contains(&c).then_some(c as usize)
    }

    /// Lattice column of emulation subcarrier `q` (centered axis).
    pub fn emulation_column(&self, q: usize) -> Option<usize> {
        let c = (q as i64 - (self.n_e / 2) as i64) * self.r_f_e as i64 + (self.n_i / 2) as i64;
        (0..self.n_i as i64).contains(&c).then_some(c as usize)
    }
}

/// Band region of the channel on the interpolation lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRegion {
    pub nu_max: f64,
    pub theta_max: f64,
}

impl BandRegion {
    pub fn new(plan: &GridPlan, f_c: f64, v_max: f64, tau_max: f64) -> Result<Self> {
        let nu_max = plan.t_i * f_c * v_max / SPEED_OF_LIGHT;
        let theta_max = plan.f_i * tau_max;
        if !(nu_max > 0.0 && nu_max < 0.5) {
            return Err(Error::Validation(format!("normalized Doppler bandwidth {nu_max} outside (0, 0.5)")));
        }
        if !(theta_max > 0.0 && theta_max < 1.0) {
            return Err(Error::Validation(format!("normalized delay {theta_max} outside (0, 1)")));
        }
        Ok(Self { nu_max, theta_max })
    }

    /// Frequency-domain band in cycles per lattice index.
    pub fn freq_band(&self) -> (f64, f64) {
        (-self.theta_max, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpConfig {
    pub plan: GridPlan,
    pub f_c: f64,
    pub v_max: f64,
    pub tau_max: f64,
    /// Time subspace dimension; default `ceil(2 ν_max M_i) + 1`.
    pub d_t: Option<usize>,
    /// Frequency subspace dimension; default `ceil(θ_max N_i)`.
    pub d_f: Option<usize>,
}

impl InterpConfig {
    pub fn band(&self) -> Result<BandRegion> {
        BandRegion::new(&self.plan, self.f_c, self.v_max, self.tau_max)
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        let band = self.band()?;
        let d_t = self
            .d_t
            .unwrap_or_else(|| (2.0 * band.nu_max * self.plan.m_i as f64).ceil() as usize + 1);
        let d_f = self
            .d_f
            .unwrap_or_else(|| (band.theta_max * self.plan.n_i as f64).ceil() as usize);
        Ok((d_t, d_f))
    }
}

/// Time and frequency DPS families on the interpolation lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DpsBasis {
    /// `M_i x D_t`.
    pub time: DMatrix<Complex64>,
    /// `N_i x D_f`.
    pub freq: DMatrix<Complex64>,
    pub time_concentrations: Vec<f64>,
    pub freq_concentrations: Vec<f64>,
}

/// First `d` sequences of length `m` concentrated on `band` (cycles per
/// sample) as columns.
pub fn make_basis(m: usize, band: (f64, f64), d: usize) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    let (lo, hi) = band;
    if (lo + hi).abs() < 1e-15 {
        let s = slepian(m, hi, d)?;
        let mat = DMatrix::from_fn(m, d, |i, k| Complex64::new(s.sequences[k][i], 0.0));
        Ok((mat, s.concentrations))
    } else {
        let g = generalized(m, lo, hi, d)?;
        let mat = DMatrix::from_fn(m, d, |i, k| g.sequences[k][i]);
        Ok((mat, g.concentrations))
    }
}

impl DpsBasis {
    pub fn new(config: &InterpConfig) -> Result<Self> {
        let band = config.band()?;
        let (d_t, d_f) = config.dims()?;
        let (time, time_concentrations) = make_basis(config.plan.m_i, (-band.nu_max, band.nu_max), d_t)?;
        let (freq, freq_concentrations) = make_basis(config.plan.n_i, band.freq_band(), d_f)?;
        Ok(Self {
            time,
            freq,
            time_concentrations,
            freq_concentrations,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.time.ncols(), self.freq.ncols())
    }

    fn rows(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
        DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
    }

    pub fn time_rows(&self, idx: &[usize]) -> DMatrix<Complex64> {
        Self::rows(&self.time, idx)
    }

    pub fn freq_rows(&self, idx: &[usize]) -> DMatrix<Complex64> {
        Self::rows(&self.freq, idx)
    }
}

/// `(AᴴA)⁻¹Aᴴ` via Cholesky.
pub fn projector(a: &DMatrix<Complex64>, what: &str) -> Result<DMatrix<Complex64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::Numerical(format!(
            "{what}: {} observations for {} basis functions (rank deficient)",
            a.nrows(),
            a.ncols()
        )));
    }
    let ah = a.adjoint();
    let gram = &ah * a;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Numerical(format!("{what}: Gram matrix of the sampled basis is rank deficient"))
    })?;
    let p = chol.solve(&ah);
    // Reject numerically singular Gram matrices.
    let diag_max = (0..a.ncols()).map(|i| chol.l()[(i, i)].norm()).fold(0.0, f64::max);
    let diag_min = (0..a.ncols()).map(|i| chol.l()[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(diag_min > 1e-7 * diag_max) || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what}: sampled basis is numerically rank deficient")));
    }
    Ok(p)
}

/// Separable least-squares estimator for fixed observation positions.
#[derive(Debug, Clone)]
pub struct Estimator {
    p_t: DMatrix<Complex64>,
    p_f: DMatrix<Complex64>,
}

impl Estimator {
    /// `time_idx` and `freq_idx` are the lattice positions of the observed
    /// rows and columns.
    pub fn new(basis: &DpsBasis, time_idx: &[usize], freq_idx: &[usize]) -> Result<Self> {
        Ok(Self {
            p_t: projector(&basis.time_rows(time_idx), "time")?,
            p_f: projector(&basis.freq_rows(freq_idx), "frequency")?,
        })
    }

    /// Coefficients `Ψ[ℓ, k]` from observations `y` (`time_idx x freq_idx`).
    pub fn estimate(&self, y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.p_t * y * self.p_f.transpose()
    }
}

/// Coefficient vector stacked as `[ψ_0ᵀ … ψ_{D_t-1}ᵀ]ᵀ`.
pub fn stack(psi: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (dt, df) = psi.shape();
    (0..dt).flat_map(|l| (0..df).map(move |k| psi[(l, k)])).collect()
}

/// Least-squares coefficients for observations `y` at lattice rows
/// `time_idx` and columns `freq_idx`.
pub fn estimate_coefficients(
    y: &DMatrix<Complex64>,
    basis: &DpsBasis,
    time_idx: &[usize],
    freq_idx: &[usize],
) -> Result<DMatrix<Complex64>> {
    if y.shape() != (time_idx.len(), freq_idx.len()) {
        return Err(Error::Validation("observation matrix does not match the sampling positions".into()));
    }
    Ok(Estimator::new(basis, time_idx, freq_idx)?.estimate(y))
}

/// Evaluates the subspace model at lattice rows `time_idx` and columns
/// `freq_idx`.
pub fn reconstruct(psi: &DMatrix<Complex64>, basis: &DpsBasis, time_idx: &[usize], freq_idx: &[usize]) -> DMatrix<Complex64> {
    basis.time_rows(time_idx) * psi * basis.freq_rows(freq_idx).transpose()
}

/// Block-wise resampling of a whole tensor.
pub struct Interpolator {
    pub config: InterpConfig,
    pub basis: DpsBasis,
    estimator: Estimator,
    /// Tensor subcarriers used, with their lattice columns.
    obs_cols: Vec<(usize, usize)>,
    out_time: Vec<usize>,
    out_cols: Vec<usize>,
    first_q: usize,
}

impl Interpolator {
    /// Prepares the projectors for tensors with `q` subcarriers on a
    /// centered axis; the central `N_s` subcarriers are used.
    pub fn new(config: InterpConfig, q: usize) -> Result<Self> {
        let plan = &config.plan;
        if q < plan.n_s {
            return Err(Error::Validation(format!("tensor has {q} subcarriers, plan needs {}", plan.n_s)));
        }
        let basis = DpsBasis::new(&config)?;
        let first_q = q / 2 - plan.n_s / 2;
        let obs_cols: Vec<(usize, usize)> = (0..plan.n_s)
            .filter_map(|qs| plan.sounding_column(qs).map(|c| (first_q + qs, c)))
            .collect();
        let time_idx: Vec<usize> = (0..plan.window()).map(|m| m * plan.r_t_s).collect();
        let freq_idx: Vec<usize> = obs_cols.iter().map(|&(_, c)| c).collect();
        let estimator = Estimator::new(&basis, &time_idx, &freq_idx)?;
        let out_cols = (0..plan.n_e)
            .map(|q| {
                plan.emulation_column(q).ok_or_else(|| {
                    Error::Validation(format!("emulation subcarrier {q} falls outside the interpolation band"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out_time = (0..plan.m_e).map(|e| e * plan.r_t_e).collect();
        Ok(Self {
            config,
            basis,
            estimator,
            obs_cols,
            out_time,
            out_cols,
            first_q,
        })
    }

    /// Window start (in sounding snapshots) of block `b` for a tensor of
    /// `t` snapshots.
    pub fn window_start(&self, b: usize, t: usize) -> usize {
        let plan = &self.config.plan;
        let w = plan.window();
        (b * plan.m_s).saturating_sub(plan.overlap).min(t - w)
    }

    pub fn block_count(&self, t: usize) -> usize {
        if t < self.config.plan.window() {
            0
        } else {
            t / self.config.plan.m_s
        }
    }

    /// Emulation-grid samples (`M_e x N_e`) for block `b` of `link`.
    pub fn block(&self, tensor: &ChannelTensor, link: usize, b: usize) -> DMatrix<Complex64> {
        let plan = &self.config.plan;
        let t = tensor.grid.t;
        let start = self.window_start(b, t);
        let y = DMatrix::from_fn(plan.window(), self.obs_cols.len(), |r, c| {
            let v = tensor.at(link, start + r, self.obs_cols[c].0);
            Complex64::new(f64::from(v.re), f64::from(v.im))
        });
        let psi = self.estimator.estimate(&y);
        let shift = (b * plan.m_s - start) * plan.r_t_s;
        let rows: Vec<usize> = self.out_time.iter().map(|&m| m + shift).collect();
        reconstruct(&psi, &self.basis, &rows, &self.out_cols)
    }

    /// Resamples every link of `tensor` onto the emulation grid.
    pub fn run(&self, tensor: &ChannelTensor) -> Result<ChannelTensor> {
        let plan = &self.config.plan;
        let g = &tensor.grid;
        if !g.convention.centered {
            return Err(Error::Validation("interpolation needs a centered frequency axis".into()));
        }
        if (g.t_sys - plan.t_s).abs() > 1e-9 * plan.t_s || (g.delta_f - plan.f_s).abs() > 1e-6 * plan.f_s {
            return Err(Error::Validation(format!(
                "tensor grid ({} s, {} Hz) does not match the plan ({} s, {} Hz)",
                g.t_sys, g.delta_f, plan.t_s, plan.f_s
            )));
        }
        if g.q / 2 - plan.n_s / 2 != self.first_q {
            return Err(Error::Validation("tensor subcarrier count differs from the prepared interpolator".into()));
        }
        let blocks = self.block_count(g.t);
        if blocks == 0 {
            return Err(Error::Validation(format!(
                "tensor has {} snapshots, fewer than one window of {}",
                g.t,
                plan.window()
            )));
        }
        let grid = TensorGrid {
            nodes: g.nodes,
            t: blocks * plan.m_e,
            q: plan.n_e,
            f_c: g.f_c,
            delta_f: plan.f_e,
            t_sys: plan.t_e,
            convention: FreqConvention {
                centered: true,
                ..g.convention
            },
        };
        let mut out = ChannelTensor::zeros(grid, tensor.links.clone())?;
        for link in 0..tensor.links.len() {
            let work = |b: usize| self.block(tensor, link, b);
            #[cfg(feature = "parallel")]
            let results: Vec<DMatrix<Complex64>> = {
                use rayon::prelude::*;
                (0..blocks).into_par_iter().map(work).collect()
            };
            #[cfg(not(feature = "parallel"))]
            let results: Vec<DMatrix<Complex64>> = (0..blocks).map(work).collect();
            for (b, block) in results.iter().enumerate() {
                for e in 0..plan.m_e {
                    let row = out.snapshot_mut(link, b * plan.m_e + e);
                    for (q, v) in row.iter_mut().enumerate() {
                        let x = block[(e, q)];
                        *v = Complex32::new(x.re as f32, x.im as f32);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Normalized mean squared error in dB.
pub fn nmse_db(estimate: &[Complex64], reference: &[Complex64]) -> f64 {
    let err: f64 = estimate.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    let pow: f64 = reference.iter().map(|b| b.norm_sqr()).sum();
    10.0 * (err / pow).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table6_ratios() {
        let p = plan_grids(500e-6, 50e-9, 250e3, 156.25e3, 64, 601, 128, 4).unwrap();
        assert_eq!((p.r_t_s, p.r_t_e, p.r_f_s, p.r_f_e), (10000, 1, 8, 5));
        assert!((p.t_i - 50e-9).abs() < 1e-18);
        assert!((p.f_i - 31.25e3).abs() < 1e-9);
        assert_eq!(p.n_i, 4808);
        // (64 + 2 * 4) * 10000.
        assert_eq!(p.m_i, 720_000);
        assert_eq!(p.m_e, 640_000);
    }

    #[test]
    fn incommensurate_rejected() {
        assert!(plan_grids(500e-6, 0.3e-9, 250e3, 156.25e3, 64, 601, 128, 4).is_err());
        assert!(plan_grids(500e-6, 50e-9, 250e3, 0.5, 64, 601, 128, 4).is_err());
    }

    #[test]
    fn sounding_columns() {
        let mut p = plan_grids(500e-6, 50e-9, 250e3, 156.25e3, 64, 601, 128, 4).unwrap();
        assert_eq!(p.sounding_column(0), Some(4));
        assert_eq!(p.sounding_column(600), Some(4804));
        p.truncate_n_i(4800).unwrap();
        assert_eq!(p.sounding_column(0), Some(0));
        assert_eq!(p.sounding_column(600), None);
        assert_eq!(p.emulation_column(64), Some(2400));
    }

    #[test]
    fn full_grid_projection_is_exact() {
        let plan = plan_grids(500e-6, 100e-6, 250e3, 125e3, 4, 9, 8, 1).unwrap();
        let cfg = InterpConfig {
            plan,
            f_c: 5.9e9,
            v_max: 30.0,
            tau_max: 2e-6,
            d_t: Some(4),
            d_f: Some(3),
        };
        let basis = DpsBasis::new(&cfg).unwrap();
        let (dt, df) = basis.dims();
        let psi = DMatrix::from_fn(dt, df, |l, k| Complex64::new(l as f64 - 0.3 * k as f64, 0.1 * (l * k) as f64));
        let rows: Vec<usize> = (0..cfg.plan.m_i).collect();
        let cols: Vec<usize> = (0..cfg.plan.n_i).collect();
        let y = reconstruct(&psi, &basis, &rows, &cols);
        let est = estimate_coefficients(&y, &basis, &rows, &cols).unwrap();
        assert!((&est - &psi).norm() / psi.norm() < 1e-9);
    }
}
