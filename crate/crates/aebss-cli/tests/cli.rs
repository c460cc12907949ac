//! Black-box tests of the `aebss` binary: exit codes, diagnostics,
//! determinism and the small spec'd behaviors of each subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aebss_core::io;
use aebss_core::signal::MultichannelRecord;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_aebss")
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/aluminum-band.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary launches")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is valid JSON")
}

fn band_geometry_json() -> serde_json::Value {
    serde_json::json!({
        "sensor_1_pos_m": -1.2,
        "sensor_2_pos_m": 1.2,
        "testing_range_m": [-1.1, 1.1],
        "wave_speed_m_per_s": 5000.0,
        "sample_rate_hz": 1000000.0
    })
}

/// A small, fast variant of the band scenario.
fn short_scenario_json() -> serde_json::Value {
    let mut scenario: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario_path()).unwrap()).unwrap();
    scenario["duration_samples"] = serde_json::json!(8192);
    scenario
}

#[test]
fn missing_scenario_field_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = short_scenario_json();
    scenario.as_object_mut().unwrap().remove("tap_length");
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();

    let output = run(&[
        "synth",
        "--scenario",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("tap_length"),
        "diagnostic does not name the missing field: {stderr}"
    );
}

#[test]
fn unknown_flag_exits_2() {
    let output = run(&["synth", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn divergent_learning_config_exits_3_and_suggests_a_smaller_rate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        serde_json::to_string_pretty(&short_scenario_json()).unwrap(),
    )
    .unwrap();
    let synth_out = dir.path().join("synth");
    let output = run(&[
        "synth",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out-dir",
        synth_out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{ "fft_size": 256, "hop": 256, "learning_rate": 5.0, "momentum": 0.9, "max_passes": 50 }"#,
    )
    .unwrap();
    let output = run(&[
        "separate",
        "--record",
        synth_out.join("record.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("sep").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{}", stderr_of(&output));
    let stderr = stderr_of(&output);
    assert!(
        stderr.contains("learning rate"),
        "divergence diagnostic gives no remediation hint: {stderr}"
    );
}

#[test]
fn synth_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        serde_json::to_string_pretty(&short_scenario_json()).unwrap(),
    )
    .unwrap();

    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let output = run(&[
            "synth",
            "--scenario",
            scenario.to_str().unwrap(),
            "--seed",
            "3",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
        outputs.push((output.stdout, out_dir));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "synth stdout differs");
    for name in ["record.json", "record.raw", "sources.raw", "truth.json"] {
        let a = std::fs::read(outputs[0].1.join(name)).unwrap();
        let b = std::fs::read(outputs[1].1.join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between identical synth runs");
    }
}

#[test]
fn zero_delay_locates_the_sensor_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();
    let delays = dir.path().join("delays.json");
    std::fs::write(&delays, r#"{ "delays_s": [0.0] }"#).unwrap();

    let output = run(&[
        "locate",
        "--delays",
        delays.to_str().unwrap(),
        "--geometry",
        geometry.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    let coordinate = report["sources"][0]["coordinate_m"].as_f64().unwrap();
    assert!(
        coordinate.abs() < 1e-9,
        "zero delay located at {coordinate} m, not the midpoint"
    );
    assert_eq!(report["sources"][0]["flags"].as_array().unwrap().len(), 0);
}

#[test]
fn locate_needs_exactly_one_input_kind() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();

    let output = run(&["locate", "--geometry", geometry.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--filters"));
}

#[test]
fn far_out_delay_is_clamped_to_the_boundary_and_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();
    // The prototype delays span roughly ±4.4e-4 s; this is far outside.
    let delays = dir.path().join("delays.json");
    std::fs::write(&delays, r#"{ "delays_s": [0.002] }"#).unwrap();

    let output = run(&[
        "locate",
        "--delays",
        delays.to_str().unwrap(),
        "--geometry",
        geometry.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    let coordinate = report["sources"][0]["coordinate_m"].as_f64().unwrap();
    let flags: Vec<String> = report["sources"][0]["flags"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    assert!(
        (coordinate - (-1.1)).abs() < 1e-9,
        "large positive delay should pin to the -1.1 m boundary, got {coordinate}"
    );
    assert!(
        flags.iter().any(|f| f == "out_of_range"),
        "missing out_of_range flag: {flags:?}"
    );
}

#[test]
fn identical_channels_give_zero_delay_and_midpoint_location() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();

    // A deterministic, noise-like channel duplicated onto both sensors.
    let mut state = 0x2545F4914F6CDD1Du64;
    let channel: Vec<f64> = (0..4096)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let record =
        MultichannelRecord::new(1e6, vec![channel.clone(), channel]).unwrap();
    let record_path = dir.path().join("record.json");
    io::save_record(&record, &record_path).unwrap();

    let output = run(&[
        "ccf",
        "--record",
        record_path.to_str().unwrap(),
        "--geometry",
        geometry.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    assert_eq!(report["delay"]["delay_samples"].as_i64().unwrap(), 0);
    let coordinate = report["coordinate_m"].as_f64().unwrap();
    assert!(coordinate.abs() < 1e-9, "midpoint expected, got {coordinate}");
    for name in ["r11.csv", "r22.csv", "r12.csv", "r21.csv"] {
        assert!(
            dir.path().join("out").join(name).exists(),
            "correlation file {name} missing"
        );
    }
}

#[test]
fn csv_records_are_accepted_with_geometry_sample_rate() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();

    let mut csv = String::from("ch1,ch2\n");
    for t in 0..2048 {
        let v = ((t * 37) % 101) as f64 / 101.0 - 0.5;
        let w = ((t * 17) % 89) as f64 / 89.0 - 0.5;
        csv.push_str(&format!("{v},{w}\n"));
    }
    let record_path = dir.path().join("record.csv");
    std::fs::write(&record_path, csv).unwrap();

    let output = run(&[
        "ccf",
        "--record",
        record_path.to_str().unwrap(),
        "--geometry",
        geometry.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    assert!(report["delay"]["delay_seconds"].is_f64());
}

#[test]
fn separate_writes_filters_sources_and_convergence_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        serde_json::to_string_pretty(&short_scenario_json()).unwrap(),
    )
    .unwrap();
    let synth_out = dir.path().join("synth");
    let output = run(&[
        "synth",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out-dir",
        synth_out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));

    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{ "max_passes": 5 }"#).unwrap();
    let sep_out = dir.path().join("sep");
    let output = run(&[
        "separate",
        "--record",
        synth_out.join("record.json").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        sep_out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    assert_eq!(report["passes_used"].as_u64().unwrap(), 5);
    for name in [
        "unmixing.json",
        "mixing.json",
        "sources_estimated.json",
        "sources_estimated.raw",
        "convergence.csv",
    ] {
        assert!(sep_out.join(name).exists(), "output file {name} missing");
    }
    let convergence = std::fs::read_to_string(sep_out.join("convergence.csv")).unwrap();
    assert_eq!(convergence.lines().count(), 6, "header plus one line per pass");

    // The written mixing filters feed straight back into locate.
    let output = run(&[
        "locate",
        "--filters",
        sep_out.join("mixing.json").to_str().unwrap(),
        "--geometry",
        scenario_path().to_str().unwrap(),
    ]);
    // The scenario file is not a geometry file; this must fail cleanly.
    assert_eq!(output.status.code(), Some(2));

    let geometry = dir.path().join("geometry.json");
    std::fs::write(&geometry, band_geometry_json().to_string()).unwrap();
    let output = run(&[
        "locate",
        "--filters",
        sep_out.join("mixing.json").to_str().unwrap(),
        "--geometry",
        geometry.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let report = stdout_json(&output);
    assert_eq!(report["sources"].as_array().unwrap().len(), 2);
}
