//! Configuration and export round trips: what goes into a scenario file
//! must come back out of the run artifacts at full precision, and every
//! config knob must leave a visible mark in the manifest.

use std::path::Path;

use anc_core::acoustics::save_center_filters;
use anc_core::harness::{
    apply_override, config_from_table, export_trace, parse_config_table, run_scenario, RunTrace,
    ScenarioConfig,
};

fn base_table() -> toml::Table {
    parse_config_table(
        r#"
            [scenario]
            nodes = 2
            algorithm = "sb-wcfxlms"
            duration_s = 0.4
            sample_rate_hz = 4000
            control_taps = 48
            model_taps = 24
            mu_bar = 0.05
            alpha = 60.0
            boost_interval_s = 0.1

            [noise]
            kind = "multitone"
            frequencies_hz = [350.0, 450.0]

            [paths]
            source = "synth"
            primary_len = 20
            secondary_len = 20
            delay_min = 2
            delay_max = 5
            coupling_gain = 0.4
            seed = 13

            [output]
            anse_block_s = 0.1
        "#,
    )
    .unwrap()
}

fn run_table(table: toml::Table) -> (RunTrace, ScenarioConfig) {
    let cfg = config_from_table(table).unwrap();
    let trace = run_scenario(&cfg, Path::new(".")).unwrap();
    (trace, cfg)
}

#[test]
fn every_config_knob_changes_the_manifest() {
    let out = tempfile::tempdir().unwrap();
    let write_manifest = |table: toml::Table, name: &str| -> Vec<u8> {
        let (trace, cfg) = run_table(table);
        let dir = out.path().join(name);
        export_trace(&trace, &cfg, &dir).unwrap();
        std::fs::read(dir.join("manifest.json")).unwrap()
    };
    let base = write_manifest(base_table(), "base");

    let tweaks: Vec<(&str, toml::Value)> = vec![
        ("scenario.mu_bar", toml::Value::Float(0.04)),
        ("scenario.alpha", toml::Value::Float(61.0)),
        ("scenario.boost_interval_s", toml::Value::Float(0.2)),
        ("scenario.sensor_snr_db", toml::Value::Float(30.0)),
        ("scenario.control_taps", toml::Value::Integer(50)),
        ("scenario.rnl_interval_s", toml::Value::Float(0.2)),
        ("noise.frequencies_hz", toml::Value::Array(vec![
            toml::Value::Float(350.0),
            toml::Value::Float(500.0),
        ])),
        ("paths.seed", toml::Value::Integer(14)),
        ("paths.coupling_gain", toml::Value::Float(0.5)),
        ("paths.delay_max", toml::Value::Integer(6)),
        ("estimates.mismatch", toml::Value::Float(0.01)),
        ("output.anse_block_s", toml::Value::Float(0.2)),
    ];
    for (key, value) in tweaks {
        let mut table = base_table();
        apply_override(&mut table, key, value).unwrap();
        let tweaked = write_manifest(table, &key.replace('.', "_"));
        assert_ne!(base, tweaked, "changing {key} left the manifest identical");
    }
}

#[test]
fn exported_csv_values_reparse_to_the_exact_trace_values() {
    let mut table = base_table();
    apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
    let (trace, cfg) = run_table(table);
    let out = tempfile::tempdir().unwrap();
    export_trace(&trace, &cfg, out.path()).unwrap();

    let read_rows = |name: &str| -> Vec<Vec<String>> {
        std::fs::read_to_string(out.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| line.split(',').map(str::to_owned).collect())
            .collect()
    };

    let anse_rows = read_rows("anse.csv");
    assert_eq!(anse_rows.len(), trace.anse.len());
    for (row, fields) in trace.anse.iter().zip(&anse_rows) {
        assert_eq!(fields[0].parse::<usize>().unwrap(), row.block_index);
        assert_eq!(fields[2].parse::<f64>().unwrap(), row.anse_db, "mean suppression drifted");
        for (k, value) in row.per_node_db.iter().enumerate() {
            assert_eq!(fields[3 + k].parse::<f64>().unwrap(), *value);
        }
    }

    let event_rows = read_rows("events.csv");
    assert_eq!(event_rows.len(), trace.boosts.len());
    for (event, fields) in trace.boosts.iter().zip(&event_rows) {
        assert_eq!(fields[0].parse::<usize>().unwrap(), event.sample);
        // Nodes are numbered from 1 in the exports.
        assert_eq!(fields[1].parse::<usize>().unwrap(), event.node + 1);
        let old: f64 = fields[2].parse().unwrap();
        assert!(old == event.old_eta_min || (old.is_infinite() && event.old_eta_min.is_infinite()));
        assert_eq!(fields[3].parse::<f64>().unwrap(), event.new_eta_min);
    }

    let sample_rows = read_rows("samples.csv");
    let log = trace.samples.as_ref().unwrap();
    assert_eq!(sample_rows.len(), trace.simulated_samples);
    let k = trace.nodes;
    for (n, fields) in sample_rows.iter().enumerate() {
        for node in 0..k {
            assert_eq!(fields[2 + node].parse::<f64>().unwrap(), log.x[node][n]);
            assert_eq!(fields[2 + k + node].parse::<f64>().unwrap(), log.d[node][n]);
            assert_eq!(fields[2 + 2 * k + node].parse::<f64>().unwrap(), log.e[node][n]);
            assert_eq!(fields[2 + 3 * k + node].parse::<f64>().unwrap(), log.y[node][n]);
        }
    }
}

#[test]
fn spectrum_export_is_skipped_when_the_tail_is_too_short() {
    // 0.4 s at 4 kHz leaves a 1600-sample tail, shorter than the default
    // 4096-sample segment: no spectrum file should appear.
    let (trace, cfg) = run_table(base_table());
    let out = tempfile::tempdir().unwrap();
    let written = export_trace(&trace, &cfg, out.path()).unwrap();
    assert!(written.iter().all(|p| !p.ends_with("spectrum.csv")));
    assert!(!out.path().join("spectrum.csv").exists());
    assert!(out.path().join("anse.csv").exists());
}

#[test]
fn center_file_reaches_the_controllers_and_is_validated() {
    // Weights start at zero; the loaded centers are the attraction
    // targets, so from the very first update the pull toward a nonzero
    // center must bend the control trajectory away from the default
    // zero-center run.
    let dir = tempfile::tempdir().unwrap();
    let taps = 48;
    let centers: Vec<Vec<f64>> = (0..2)
        .map(|k| (0..taps).map(|i| ((i + k) as f64 * 0.37).sin() * 0.05).collect())
        .collect();
    save_center_filters(&centers, &dir.path().join("centers.txt")).unwrap();

    let mut table = base_table();
    apply_override(&mut table, "scenario.algorithm", toml::Value::String("wcfxlms".into()))
        .unwrap();
    apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
    let plain = run_scenario(&config_from_table(table.clone()).unwrap(), dir.path()).unwrap();
    apply_override(&mut table, "scenario.center_file", toml::Value::String("centers.txt".into()))
        .unwrap();
    let centered = run_scenario(&config_from_table(table.clone()).unwrap(), dir.path()).unwrap();

    let (a, b) = (plain.samples.as_ref().unwrap(), centered.samples.as_ref().unwrap());
    assert_eq!(a.y[0][0], 0.0, "first output predates any update");
    assert_ne!(a.y[0][1..], b.y[0][1..], "the loaded centers left no trace on node 0");
    assert_ne!(a.y[1][1..], b.y[1][1..], "the loaded centers left no trace on node 1");

    // One center per node and one tap per weight, or the file is refused.
    save_center_filters(&centers[..1], &dir.path().join("short.txt")).unwrap();
    apply_override(&mut table, "scenario.center_file", toml::Value::String("short.txt".into()))
        .unwrap();
    run_scenario(&config_from_table(table.clone()).unwrap(), dir.path())
        .expect_err("node-count mismatch must be rejected");

    let stubby: Vec<Vec<f64>> = vec![vec![0.01; taps - 1]; 2];
    save_center_filters(&stubby, &dir.path().join("stubby.txt")).unwrap();
    apply_override(&mut table, "scenario.center_file", toml::Value::String("stubby.txt".into()))
        .unwrap();
    run_scenario(&config_from_table(table).unwrap(), dir.path())
        .expect_err("tap-count mismatch must be rejected");
}

#[test]
fn wave_file_references_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let fs = 4000u32;
    let samples: Vec<f32> =
        (0..2400).map(|n| 0.4 * (n as f32 * 0.7).sin() + 0.1 * (n as f32 * 0.13).cos()).collect();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let wav_path = dir.path().join("ref.wav");
    let mut writer = hound::WavWriter::create(&wav_path, spec).unwrap();
    for &s in &samples {
        writer.write_sample(s).unwrap();
    }
    writer.finalize().unwrap();

    let mut table = base_table();
    apply_override(&mut table, "noise.kind", toml::Value::String("wavefile".into())).unwrap();
    apply_override(&mut table, "noise.file", toml::Value::String("ref.wav".into())).unwrap();
    apply_override(&mut table, "scenario.mu_bar", toml::Value::Float(0.0)).unwrap();
    apply_override(&mut table, "output.store_samples", toml::Value::Boolean(true)).unwrap();
    // Drop the multitone-only key so the wavefile spec stands alone.
    let noise = table.get_mut("noise").unwrap().as_table_mut().unwrap();
    noise.remove("frequencies_hz");

    let cfg = config_from_table(table).unwrap();
    let trace = run_scenario(&cfg, dir.path()).unwrap();
    let log = trace.samples.as_ref().unwrap();
    assert_eq!(log.x[0].len(), 1600, "0.4 s at 4 kHz");
    for (n, &x) in log.x[0].iter().enumerate() {
        assert_eq!(x, f64::from(samples[n]), "sample {n} altered in transit");
    }
    assert_eq!(log.x[0], log.x[1], "wave file references are shared across nodes");
}

#[test]
fn malformed_configs_are_rejected_with_config_errors() {
    let reject = |mutate: &dyn Fn(&mut toml::Table)| {
        let mut table = base_table();
        mutate(&mut table);
        config_from_table(table).expect_err("config should have been rejected")
    };

    reject(&|t| {
        apply_override(t, "scenario.nodes", toml::Value::Integer(0)).unwrap();
    });
    reject(&|t| {
        apply_override(
            t,
            "scenario.alpha",
            toml::Value::Array(vec![toml::Value::Float(1.0); 3]),
        )
        .unwrap();
    });
    reject(&|t| {
        apply_override(t, "scenario.mu_bar", toml::Value::Float(-0.1)).unwrap();
    });
    reject(&|t| {
        apply_override(t, "scenario.sensor_snr_db", toml::Value::Float(f64::NAN)).unwrap();
    });
    reject(&|t| {
        apply_override(t, "scenario.no_such_knob", toml::Value::Boolean(true)).unwrap();
    });
    reject(&|t| {
        apply_override(t, "scenario.center_file", toml::Value::String("c.txt".into())).unwrap();
        apply_override(t, "scenario.algorithm", toml::Value::String("leaky".into())).unwrap();
    });
    reject(&|t| {
        apply_override(t, "scenario.algorithm", toml::Value::String("centralized".into()))
            .unwrap();
        apply_override(t, "scenario.reference_mode", toml::Value::String("per-node".into()))
            .unwrap();
    });
    reject(&|t| {
        apply_override(t, "paths.delay_min", toml::Value::Integer(9)).unwrap();
        apply_override(t, "paths.delay_max", toml::Value::Integer(3)).unwrap();
    });

    // A tone at or above Nyquist parses but fails at generation time.
    let mut table = base_table();
    apply_override(
        &mut table,
        "noise.frequencies_hz",
        toml::Value::Array(vec![toml::Value::Float(2000.0)]),
    )
    .unwrap();
    let cfg = config_from_table(table).unwrap();
    run_scenario(&cfg, Path::new(".")).expect_err("Nyquist-violating tone must not run");
}
