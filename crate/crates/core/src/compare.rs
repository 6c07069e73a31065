//! Offsets between a reference run and simulated ensembles.

use std::io::Write;

use serde::Serialize;

use crate::chstats::{csv_err, StatsRow};
use crate::{Error, Result};

/// Compared statistics, as `(name, accessor)`.
pub const QUANTITIES: [(&str, fn(&StatsRow) -> f64); 5] = [
    ("path_loss_db", |r| r.path_loss_db),
    ("rms_delay_ns", |r| r.rms_delay_ns),
    ("rms_doppler_hz", |r| r.rms_doppler_hz),
    ("mean_delay_ns", |r| r.mean_delay_ns),
    ("mean_doppler_hz", |r| r.mean_doppler_hz),
];

/// Sorted absolute offsets of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetCdf {
    pub quantity: String,
    pub offsets: Vec<f64>,
}

impl OffsetCdf {
    pub fn percentile(&self, p: f64) -> f64 {
        nearest_rank(&self.offsets, p)
    }
}

/// Nearest-rank percentile of sorted data, `p` in percent.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn check_aligned(reference: &[StatsRow], sims: &[Vec<StatsRow>]) -> Result<()> {
    if sims.is_empty() {
        return Err(Error::Validation("no simulated statistics given".into()));
    }
    for (i, s) in sims.iter().enumerate() {
        if s.len() != reference.len() || s.iter().zip(reference).any(|(a, b)| a.k != b.k) {
            return Err(Error::Validation(format!(
                "simulated set {i} covers regions that differ from the reference"
            )));
        }
    }
    Ok(())
}

/// `|mean over sims - reference|` per region and quantity. Regions where
/// the reference or every simulation is undefined are skipped.
pub fn compare_stats(reference: &[StatsRow], sims: &[Vec<StatsRow>]) -> Result<Vec<OffsetCdf>> {
    check_aligned(reference, sims)?;
    Ok(QUANTITIES
        .iter()
        .map(|(name, get)| {
            let mut offsets: Vec<f64> = reference
                .iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let vals: Vec<f64> = sims.iter().map(|s| get(&s[i])).filter(|v| v.is_finite()).collect();
                    let rv = get(r);
                    if vals.is_empty() || !rv.is_finite() {
                        return None;
                    }
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    Some((mean - rv).abs())
                })
                .collect();
            offsets.sort_by(f64::total_cmp);
            OffsetCdf {
                quantity: name.to_string(),
                offsets,
            }
        })
        .collect())
}

/// Long-format CDF: `quantity,offset,cdf`.
pub fn write_offset_csv<W: Write>(cdfs: &[OffsetCdf], w: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        quantity: &'a str,
        offset: f64,
        cdf: f64,
    }
    let mut wr = csv::Writer::from_writer(w);
    for c in cdfs {
        let n = c.offsets.len() as f64;
        for (i, &offset) in c.offsets.iter().enumerate() {
            wr.serialize(Row {
                quantity: &c.quantity,
                offset,
                cdf: (i + 1) as f64 / n,
            })
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Fraction of points with `min <= reference <= max`; undefined points
/// are skipped. `None` when nothing is comparable.
pub fn time_in_envelope(reference: &[f64], min: &[f64], max: &[f64]) -> Result<Option<f64>> {
    if reference.len() != min.len() || reference.len() != max.len() {
        return Err(Error::Validation("series and envelope differ in length".into()));
    }
    let mut inside = 0usize;
    let mut total = 0usize;
    for ((&r, &lo), &hi) in reference.iter().zip(min).zip(max) {
        if !(r.is_finite() && lo.is_finite() && hi.is_finite()) {
            continue;
        }
        total += 1;
        if lo <= r && r <= hi {
            inside += 1;
        }
    }
    Ok((total > 0).then(|| inside as f64 / total as f64))
}

/// Per-quantity fraction of regions where the reference lies inside the
/// `[min, max]` range of the simulations.
pub fn stats_in_envelope(reference: &[StatsRow], sims: &[Vec<StatsRow>]) -> Result<Vec<(String, Option<f64>)>> {
    check_aligned(reference, sims)?;
    QUANTITIES
        .iter()
        .map(|(name, get)| {
            let (mut lo, mut hi, mut r) = (Vec::new(), Vec::new(), Vec::new());
            for (i, row) in reference.iter().enumerate() {
                let vals: Vec<f64> = sims.iter().map(|s| get(&s[i])).filter(|v| v.is_finite()).collect();
                r.push(get(row));
                lo.push(vals.iter().copied().fold(f64::NAN, f64::min));
                hi.push(vals.iter().copied().fold(f64::NAN, f64::max));
            }
            Ok((name.to_string(), time_in_envelope(&r, &lo, &hi)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, pl: f64) -> StatsRow {
        StatsRow {
            k,
            t_center_s: 0.06 + 0.12 * k as f64,
            path_loss_db: pl,
            rms_delay_ns: 10.0,
            rms_doppler_hz: 5.0,
            mean_delay_ns: 1.0,
            mean_doppler_hz: 0.0,
        }
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 80.0), 8.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&v, 100.0), 10.0);
    }

    #[test]
    fn offsets() {
        let r: Vec<StatsRow> = (0..5).map(|k| row(k, 60.0)).collect();
        let plus: Vec<StatsRow> = (0..5).map(|k| row(k, 61.0)).collect();
        let minus: Vec<StatsRow> = (0..5).map(|k| row(k, 59.0)).collect();
        let c = compare_stats(&r, &[plus.clone()]).unwrap();
        assert_eq!(c[0].percentile(80.0), 1.0);
        let c = compare_stats(&r, &[plus, minus]).unwrap();
        assert!(c.iter().all(|q| q.percentile(80.0) == 0.0));
        assert!(compare_stats(&r, &[r[..4].to_vec()]).is_err());
    }

    #[test]
    fn envelope_fraction() {
        let lo = vec![0.0; 50];
        let hi = vec![1.0; 50];
        let mut r = vec![0.5; 50];
        assert_eq!(time_in_envelope(&r, &lo, &hi).unwrap(), Some(1.0));
        for v in r.iter_mut().take(7) {
            *v = 1.5;
        }
        assert_eq!(time_in_envelope(&r, &lo, &hi).unwrap(), Some(0.86));
        let above: Vec<f64> = hi.iter().map(|h| h + 1e-9).collect();
        assert_eq!(time_in_envelope(&above, &lo, &hi).unwrap(), Some(0.0));
    }
}
