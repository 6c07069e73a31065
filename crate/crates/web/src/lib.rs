//! wasm-bindgen entry points for the demo page in `www/`.
//!
//! Every function returns a JSON string; the page parses it with
//! `JSON.parse`. Errors come back as `{"error": "..."}`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use vehchan::chstats::{estimate_noise_floor, pdp_dsd, rms_spreads, LsfEstimator, StatsConfig};
use vehchan::dpss::slepian;
use vehchan::geom::{OrientedRect, Point2};
use vehchan::gscm::{obstruct_los, select_reflection_point, ObstructionProfile, ReflectionCase, ALPHA_BUS_PER_M};

fn reply(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Reflection case and obstruction of a Tx/Rx pair around a bus centered at
/// the origin. `heading_deg` is measured from the x axis.
#[wasm_bindgen]
pub fn bus_geometry(tx_x: f64, tx_y: f64, rx_x: f64, rx_y: f64, heading_deg: f64, length: f64, width: f64) -> String {
    reply((|| {
        let a = heading_deg.to_radians();
        let pose = OrientedRect {
            center: Point2::new(0.0, 0.0),
            heading: Point2::new(a.cos(), a.sin()),
            length,
            width,
        };
        let (tx, rx) = (Point2::new(tx_x, tx_y), Point2::new(rx_x, rx_y));
        let st = select_reflection_point(tx, rx, &pose).map_err(|e| e.to_string())?;
        let profile = ObstructionProfile::builtin("bus_default");
        let obstruction = obstruct_los(tx, rx, &pose, profile.as_ref(), ALPHA_BUS_PER_M);
        let case = match st.case {
            ReflectionCase::Front => "front",
            ReflectionCase::Back => "back",
            ReflectionCase::Center => "center",
        };
        let md = pose.axis_point(st.x_md);
        let corners: Vec<[f64; 2]> = pose.corners().iter().map(|c| [c.x, c.y]).collect();
        Ok(json!({
            "case": case,
            "x_md": st.x_md,
            "md_point": [md.x, md.y],
            "olos": st.olos,
            "extra_loss_db": obstruction.map(|o| o.0),
            "alpha": obstruction.map(|o| o.1),
            "d_los": st.d_los,
            "corners": corners,
        }))
    })())
}

/// First `count` Slepian sequences of length `len` with half-bandwidth `w`
/// (cycles per sample).
#[wasm_bindgen]
pub fn dps_sequences(len: usize, w: f64, count: usize) -> String {
    reply(
        slepian(len, w, count)
            .map(|s| json!({ "sequences": s.sequences, "concentrations": s.concentrations }))
            .map_err(|e| e.to_string()),
    )
}

/// PDP, DSD and spreads of a synthetic region: paths given as flat
/// `[delay_s, doppler_hz, power_db, ...]` triples on a grid of `m`
/// snapshots (`t_sys`) by `q` subcarriers (`delta_f`), with white noise of
/// `snr_db` below the total power.
#[wasm_bindgen]
pub fn region_stats(paths: Vec<f64>, m: usize, q: usize, t_sys: f64, delta_f: f64, snr_db: f64) -> String {
    reply((|| {
        if paths.len() % 3 != 0 || paths.is_empty() {
            return Err("paths must be delay, Doppler, power triples".to_string());
        }
        let config = StatsConfig::new(m, q, t_sys, delta_f);
        config.validate().map_err(|e| e.to_string())?;
        let taps: Vec<(f64, f64, f64)> = paths
            .chunks_exact(3)
            .map(|c| (c[0], c[1], 10f64.powf(c[2] / 20.0)))
            .collect();
        let total: f64 = taps.iter().map(|t| t.2 * t.2).sum();
        let sigma = (total * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        // Small xorshift for the noise; the demo needs no statistical rigor.
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut uniform = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut gauss = move || {
            let (u1, u2) = (uniform().max(1e-300), uniform());
            (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
        };
        let block: Vec<Complex64> = (0..m * q)
            .map(|i| {
                let (t, f) = ((i / q) as f64 * t_sys, ((i % q) as f64 - (q / 2) as f64) * delta_f);
                let h: Complex64 = taps
                    .iter()
                    .map(|&(tau, nu, a)| Complex64::from_polar(a, TAU * (nu * t - f * tau)))
                    .sum();
                h + Complex64::new(sigma * gauss(), sigma * gauss())
            })
            .collect();
        let lsf = LsfEstimator::new(&config).map_err(|e| e.to_string())?.estimate(&block);
        let (pdp, dsd) = pdp_dsd(&lsf);
        let floor = estimate_noise_floor(&pdp);
        let s = rms_spreads(&pdp, &dsd, &config, floor);
        let db = |v: &[f64]| v.iter().map(|x| 10.0 * x.max(1e-30).log10()).collect::<Vec<_>>();
        Ok(json!({
            "tau_s": config.tau_s,
            "nu_s": config.nu_s,
            "pdp_db": db(&pdp),
            "dsd_db": db(&dsd),
            "noise_floor_db": 10.0 * floor.max(1e-30).log10(),
            "rms_delay_ns": s.rms_delay.map(|x| x * 1e9),
            "mean_delay_ns": s.mean_delay.map(|x| x * 1e9),
            "rms_doppler_hz": s.rms_doppler,
            "mean_doppler_hz": s.mean_doppler,
        }))
    })())
}
