//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rofsim::link::{build_testbed_scenario, qos_payload, run_default, Scenario};
use rofsim::metrics::{evm_rms, qam_ber};
use rofsim::modem::{
    bits_per_symbol, pulse_shape, qam_demap, qam_map, recover_symbols, ModemConfig, SymbolStream,
    SymbolTiming,
};
use rofsim::oil_vcsel::{lock_state, VcselParams};
use rofsim::photonics::{dispersion_factor, dispersion_penalty_db, FiberParams};
use rofsim::signals::{add_awgn, gaussian_pair, psd_estimate, RngHandle};
use rofsim::Run;
use rofsim_cli::{
    cmd_calibrate, run_scenario, sweep_csv, CalibrationSpec, Exit, RunFlags, SweepOptions,
    SweepSpec,
};
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bits(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn calibrated(dir: &Path) -> Scenario {
    let (exit, outcome) =
        cmd_calibrate(None, &CalibrationSpec::default(), dir, None).expect("calibration runs");
    assert_eq!(
        exit,
        Exit::Success,
        "calibration residual {}",
        outcome.residual_rms
    );
    Scenario::load(&dir.join("fitted.json")).expect("fitted scenario loads")
}

fn back_to_back(fitted: &Scenario) -> Outcome {
    let mut dl = Vec::new();
    let mut ul = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in 1001..1011 {
        let mut s = fitted.clone();
        s.seed = seed;
        s.symbols = 100_000;
        let t = Instant::now();
        let r: Run = run_default(&s).expect("run");
        slowest = slowest.max(t.elapsed().as_secs_f64());
        dl.push(r.downlink_evm.evm_rms_percent);
        ul.push(r.uplink_evm.evm_rms_percent);
    }
    let (d, u) = (mean(&dl), mean(&ul));
    outcome(
        (d - 3.2).abs() <= 0.3 && (u - 4.3).abs() <= 0.4 && slowest < 10.0,
        format!("downlink {d:.3}%, uplink {u:.3}%, slowest run {slowest:.2} s"),
    )
}

fn threshold_distance(fitted: &Scenario) -> Outcome {
    let spec = SweepSpec::default();
    let (csv, failed) = sweep_csv(fitted, &spec, &SweepOptions::default()).expect("sweep");
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .filter(|l| l.starts_with("summary,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[6].parse().unwrap())
        })
        .collect();
    let crossing = rows.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (y0 < 8.0 && y1 >= 8.0).then(|| x0 + (8.0 - y0) * (x1 - x0) / (y1 - y0))
    });
    match crossing {
        Some(km) => outcome(
            !failed && (4.5..=5.5).contains(&km),
            format!("uplink mean EVM crosses 8% at {km:.3} km (calibration-consistency check)"),
        ),
        None => outcome(false, "uplink mean EVM never crosses 8% on the sweep grid"),
    }
}

fn evm_snr_law() -> Outcome {
    let cfg = ModemConfig::default();
    let n = 100_000;
    let s = qam_map::<f64>(&bits(6 * n, 3), 64).unwrap();
    let shaped = pulse_shape(&s, &cfg).unwrap();
    let timing = SymbolTiming {
        first_symbol_sample: shaped.delay_samples,
        count: n,
    };
    let mut worst: f64 = 0.0;
    for (i, snr) in [15.0, 20.0, 25.0, 30.0, 35.0].into_iter().enumerate() {
        let density = 10f64.powf(-snr / 10.0) / cfg.noise_bandwidth_hz();
        let noisy = add_awgn(
            &shaped.waveform,
            density * cfg.sample_rate_hz(),
            RngHandle::new(9, i as u64),
        )
        .unwrap();
        let z = recover_symbols(&noisy, &cfg, Some(&timing), Some(&s)).unwrap();
        let evm = evm_rms(&z, &s).unwrap();
        worst = worst.max((evm / (100.0 * 10f64.powf(-snr / 20.0)) - 1.0).abs());
    }
    outcome(
        worst < 0.02,
        format!("worst relative deviation {:.3}%", 100.0 * worst),
    )
}

fn transparency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut qos_ok = true;
    for km in [0.0, 5.0, 10.0] {
        let s = build_testbed_scenario([
            ("of1.length_km", json!(km)),
            ("noise.enabled", json!(false)),
            ("noise.penalty", json!(false)),
        ])
        .unwrap();
        let r: Run = run_default(&s).unwrap();
        worst = worst
            .max(r.downlink_evm.evm_rms_percent)
            .max(r.uplink_evm.evm_rms_percent);
        qos_ok &= r
            .qos
            .as_ref()
            .is_some_and(|q| q.crc_ok && q.delivered(&qos_payload(&s)));
    }
    outcome(
        worst < 0.1 && qos_ok,
        format!("worst EVM {worst:.4}%, QoS payload exact: {qos_ok}"),
    )
}

fn q_oracle(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function by composite Simpson integration.
fn erfc(x: f64) -> f64 {
    let (a, b, n) = (x, x + 10.0, 20_000);
    let h = (b - a) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 / std::f64::consts::PI.sqrt() * acc * h / 3.0
}

fn measured_ber(snr_db: f64, m: u32, n_bits: usize, seed: u64) -> f64 {
    let k = bits_per_symbol(m).unwrap();
    let n_bits = n_bits.div_ceil(k) * k;
    let tx = bits(n_bits, seed);
    let s = qam_map::<f64>(&tx, m).unwrap();
    let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let noisy = s
        .symbols
        .iter()
        .map(|&x| {
            let (a, b) = gaussian_pair(&mut rng);
            x + Complex::new(a, b) * sigma
        })
        .collect();
    let rx = qam_demap(&SymbolStream::new(noisy, m)).unwrap();
    tx.iter().zip(&rx).filter(|(a, b)| a != b).count() as f64 / n_bits as f64
}

fn ber_oracle() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (snr, m, n, expect) in [
        (21.94, 64, 1_200_000, Some(1.9e-3)),
        (16.5, 16, 1_200_000, None),
        (9.8, 4, 2_000_000, None),
    ] {
        let mc = measured_ber(snr, m, n, 21);
        let k = (m as f64).log2();
        let snr_lin = 10f64.powf(snr / 10.0);
        let oracle = 4.0 / k
            * (1.0 - 1.0 / (m as f64).sqrt())
            * q_oracle((3.0 * snr_lin / (m as f64 - 1.0)).sqrt());
        let analytic = qam_ber(snr_lin, m).unwrap();
        pass &= (mc / oracle - 1.0).abs() <= 0.3 && (analytic / oracle - 1.0).abs() < 1e-6;
        if let Some(e) = expect {
            pass &= (mc / e - 1.0).abs() <= 0.3;
        }
        notes.push(format!("M={m}: MC {mc:.3e} vs {oracle:.3e}"));
    }
    outcome(pass, notes.join("; "))
}

fn dispersion_closed_form() -> Outcome {
    let (f, lambda_nm, d) = (5e9, 1560.0, 17.0);
    let mut worst: f64 = 0.0;
    for km in [1.0, 5.0, 100.0, 1e5] {
        let fiber = FiberParams {
            length_km: km,
            dispersion_ps_nm_km: d,
            ..FiberParams::default()
        };
        let lambda = lambda_nm * 1e-9;
        let theta = std::f64::consts::PI * lambda * lambda * (d * 1e-6) * (km * 1e3) * f * f
            / 299_792_458.0;
        let want = theta.cos();
        let got = dispersion_factor(f, lambda_nm, &fiber);
        worst = worst.max(((got - want) / want).abs());
    }
    let five = FiberParams {
        length_km: 5.0,
        dispersion_ps_nm_km: d,
        ..FiberParams::default()
    };
    let penalty = dispersion_penalty_db(f, lambda_nm, &five);
    outcome(
        worst < 1e-9 && penalty < 1e-6,
        format!("closed-form relative error {worst:.1e}; 5 km penalty {penalty:.4e} dB (required < 1e-6 dB)"),
    )
}

fn link_budget() -> Outcome {
    let mut worst: f64 = 0.0;
    // default, high-gain EDFA, lossy circulator
    for extra in [
        None,
        Some(("edfa.gain_db", json!(15.0))),
        Some(("circulator.insertion_loss_db", json!(3.0))),
    ] {
        let mut o = vec![
            ("noise.enabled", json!(false)),
            ("noise.penalty", json!(false)),
            ("symbols", json!(20_000)),
            ("taps", json!(["cu_tx", "mso1", "mso2"])),
        ];
        o.extend(extra);
        let s = build_testbed_scenario(o).unwrap();
        let r: Run = run_default(&s).unwrap();
        let circ = s.circulator.insertion_loss_db;
        let incident = s.source.power_dbm - db(2.0) - s.mzm.insertion_loss_db + s.edfa.gain_db
            - s.of1_fiber.atten_db_per_km * s.of1_fiber.length_km
            - circ;
        let ru = incident + s.vcsel.reflection_gain_db
            - circ
            - s.of2_fiber.atten_db_per_km * s.of2_fiber.length_km;
        let cu = s.uplink_tx.power_dbm - s.of1_fiber.atten_db_per_km * s.of1_fiber.length_km;
        let w = |dbm: f64| 1e-3 * 10f64.powf(dbm / 10.0);
        let m_dl = std::f64::consts::FRAC_PI_2 * s.mzm.half_wave_drive_ratio;
        let drive = r.tap_waveforms["cu_tx"].power();
        let of2 = dispersion_factor(
            s.modem.rf_subcarrier_hz,
            s.source.wavelength_nm,
            &s.of2_fiber,
        );
        let mso1 =
            db(drive * (s.pin.responsivity_a_w * w(ru) * m_dl * of2).powi(2) * s.pin.load_ohm)
                + s.lna_ru.gain_db;
        let mso2 =
            db((s.pin.responsivity_a_w * w(cu) * s.uplink_tx.mod_index).powi(2) * s.pin.load_ohm)
                + s.lna_cu.gain_db;
        let b = &r.budget;
        let errs = [
            b.vcsel_incident_dbm - incident,
            b.ru_pin_dbm - ru,
            b.cu_pin_dbm - cu,
            db(r.tap_waveforms["mso1"].power()) - mso1,
            db(r.tap_waveforms["mso2"].power()) - mso2,
        ];
        worst = errs.iter().fold(worst, |a, x| a.max(x.abs()));
    }
    outcome(
        worst < 0.05,
        format!("worst deviation {worst:.4} dB over 3 scenarios"),
    )
}

fn lock_behavior(dir: &Path) -> Outcome {
    let p = VcselParams::default();
    let reference = lock_state(p.injection_ref_dbm, p.free_running_power_dbm, &p);
    let starved = lock_state(p.injection_ref_dbm - 30.0, p.free_running_power_dbm, &p);
    let grid: Vec<f64> = (0..20)
        .map(|i| lock_state(-30.0 + 2.0 * i as f64, p.free_running_power_dbm, &p).margin_ghz)
        .collect();
    let monotone = grid.windows(2).all(|w| w[1] > w[0]);
    let s = build_testbed_scenario([
        ("source.power_dbm", json!(-24.0)),
        ("symbols", json!(20_000)),
    ])
    .unwrap();
    let exit = run_scenario(&s, dir, &RunFlags::default()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    let reported = report["status"] == "lock_error" && report["lock_error"]["stage"] == "du";
    outcome(
        reference.locked && !starved.locked && monotone && exit == Exit::Failed && reported,
        format!(
            "margin {:.2} GHz at reference, {:.2} GHz 30 dB below; cmd_run exit {}",
            reference.margin_ghz,
            starved.margin_ghz,
            exit.code()
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let s = build_testbed_scenario([("symbols", json!(20_000)), ("of1.length_km", json!(2.0))])
        .unwrap();
    let flags = RunFlags {
        iq_dump: true,
        ..RunFlags::default()
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    run_scenario(&s, &a, &flags).unwrap();
    run_scenario(&s, &b, &flags).unwrap();
    let mut same = true;
    for name in [
        "run.json",
        "iq_mso1.rfiq",
        "iq_mso2.rfiq",
        "downlink_constellation.csv",
    ] {
        same &= std::fs::read(a.join(name)).unwrap() == std::fs::read(b.join(name)).unwrap();
    }
    let spec = SweepSpec {
        values: vec![0.0, 3.0, 6.0],
        seeds: vec![4, 5],
        symbols_per_point: 20_000,
        ..SweepSpec::default()
    };
    let sweep = |threads| {
        sweep_csv(
            &s,
            &spec,
            &SweepOptions {
                threads: Some(threads),
                ..SweepOptions::default()
            },
        )
        .unwrap()
        .0
    };
    let serial = sweep(1);
    let sweeps_same = serial == sweep(4) && serial == sweep(1);
    outcome(
        same && sweeps_same,
        format!("run artifacts identical: {same}; sweep serial/parallel identical: {sweeps_same}"),
    )
}

fn spectrum() -> Outcome {
    let s = build_testbed_scenario([("taps", json!(["cu_tx", "du_detected", "du_uplink_drive"]))])
        .unwrap();
    let r: Run = run_default(&s).unwrap();
    let rs = s.modem.symbol_rate_hz;
    let half_fs = s.modem.sample_rate_hz() / 2.0;
    let tx = psd_estimate(&r.tap_waveforms["cu_tx"], 4096, 0.5).unwrap();
    let centered = r.tap_waveforms["cu_tx"].envelope_ref_hz() == s.modem.rf_subcarrier_hz
        && tx.centroid(-half_fs, half_fs).abs() < 0.01 * rs;
    let obw = tx.occupied_bandwidth(40.0, -half_fs, half_fs);
    let want = rs * (1.0 + s.modem.rolloff);
    let obw_ok = (obw / want - 1.0).abs() <= 0.1;

    let det = psd_estimate(&r.tap_waveforms["du_detected"], 4096, 0.5).unwrap();
    let drive = psd_estimate(&r.tap_waveforms["du_uplink_drive"], 4096, 0.5).unwrap();
    let off = s.qos.subcarrier_offset_hz;
    let (lo, hi) = (off - 5e6, off + 5e6);
    let qos_power = drive.band_power(lo, hi) - det.band_power(lo, hi);
    let rel = db(qos_power / r.tap_waveforms["du_detected"].power());
    let qos_hz = drive.centroid(lo, hi);
    let at_offset = (qos_hz - off).abs() <= s.qos.bit_rate_bps;
    let rel_ok = (rel - s.qos.relative_power_db).abs() <= 0.5;
    outcome(
        centered && obw_ok && at_offset && rel_ok,
        format!(
            "-40 dB bandwidth {:.1} MHz (Rs(1+b) = {:.1} MHz); QoS at {:.2} MHz, {rel:.2} dB relative",
            obw / 1e6,
            want / 1e6,
            qos_hz / 1e6
        ),
    )
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let fitted = calibrated(&tmp.path().join("calibration"));
    let checks: Vec<(&str, Check)> = vec![
        (
            "back-to-back EVM after calibration",
            Box::new(|| back_to_back(&fitted)),
        ),
        (
            "uplink threshold distance",
            Box::new(|| threshold_distance(&fitted)),
        ),
        ("EVM-SNR law", Box::new(evm_snr_law)),
        ("noiseless transparency", Box::new(transparency)),
        ("BER oracle equivalence", Box::new(ber_oracle)),
        ("dispersion closed form", Box::new(dispersion_closed_form)),
        ("link-budget ledger", Box::new(link_budget)),
        (
            "lock behavior",
            Box::new(|| lock_behavior(&tmp.path().join("lock"))),
        ),
        (
            "determinism",
            Box::new(|| determinism(&tmp.path().join("determinism"))),
        ),
        ("spectrum sanity", Box::new(spectrum)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {}: {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
