use serde_json::Value;

use vehchan_web::{bus_geometry, dps_sequences, region_stats};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn bus_cases() {
    // Both nodes ahead of the bus (front along +x).
    let v = parse(bus_geometry(20.0, 5.0, 30.0, -5.0, 0.0, 12.0, 2.5));
    assert_eq!(v["case"], "front");
    assert_eq!(v["x_md"], 6.0);
    assert_eq!(v["olos"], false);
    assert!(v["extra_loss_db"].is_null());

    // LOS straight through the bus along its axis.
    let v = parse(bus_geometry(-20.0, 0.0, 20.0, 0.0, 0.0, 12.0, 2.5));
    assert_eq!(v["olos"], true);
    assert!((v["alpha"].as_f64().unwrap() - 0.008 * 40.0).abs() < 1e-12);

    // Crossing the sides at the middle of the bus.
    let v = parse(bus_geometry(0.0, -20.0, 0.0, 20.0, 0.0, 12.0, 2.5));
    assert_eq!(v["case"], "center");
    assert!((v["extra_loss_db"].as_f64().unwrap() - 18.6).abs() < 1e-9);
    assert_eq!(v["alpha"], 0.0);

    let v = parse(bus_geometry(1.0, 1.0, 1.0, 1.0, 0.0, 12.0, 2.5));
    assert!(v["error"].is_string());
}

#[test]
fn dps_family() {
    let v = parse(dps_sequences(32, 0.1, 4));
    let seqs = v["sequences"].as_array().unwrap();
    assert_eq!(seqs.len(), 4);
    assert_eq!(seqs[0].as_array().unwrap().len(), 32);
    let lambda: Vec<f64> = v["concentrations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(lambda.windows(2).all(|w| w[0] >= w[1]));
    assert!(parse(dps_sequences(8, 0.7, 2))["error"].is_string());
}

#[test]
fn single_path_region() {
    let (m, q) = (64, 64);
    let (t_sys, delta_f) = (500e-6, 250e3);
    let tau_s = 1.0 / (q as f64 * delta_f);
    let nu_s = 1.0 / (m as f64 * t_sys);
    let v = parse(region_stats(vec![12.0 * tau_s, 10.0 * nu_s, 0.0], m, q, t_sys, delta_f, 30.0));
    let mean_delay = v["mean_delay_ns"].as_f64().unwrap() * 1e-9;
    let mean_doppler = v["mean_doppler_hz"].as_f64().unwrap();
    assert!((mean_delay - 12.0 * tau_s).abs() < 0.5 * tau_s, "{mean_delay}");
    assert!((mean_doppler - 10.0 * nu_s).abs() < 0.5 * nu_s, "{mean_doppler}");
    assert_eq!(v["pdp_db"].as_array().unwrap().len(), q);
    assert!(parse(region_stats(vec![1.0, 2.0], m, q, t_sys, delta_f, 30.0))["error"].is_string());
}
