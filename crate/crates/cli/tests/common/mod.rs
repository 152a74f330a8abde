#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    pub fn json(&self) -> Value {
        serde_json::from_str(self.stdout.trim()).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

pub fn more(args: &[&str]) -> Output {
    more_with_env(args, &[])
}

pub fn more_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_more"));
    cmd.args(args).env_remove("MORE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Fronto-parallel plane at depth 4 seen from two cameras 0.5 apart, with
/// focal length equal to the image width so disparities are whole pixels.
pub fn plane_spec(width: usize, height: usize, noise: f64, outliers: f64, distortion: [(f64, [f64; 3]); 2]) -> Value {
    let f = width as f64;
    let k = json!([f, 0, width as f64 / 2.0, 0, f, height as f64 / 2.0, 0, 0, 1]);
    json!({
        "surface": {"type": "plane", "normal": [0, 0, 1], "offset": 4},
        "width": width,
        "height": height,
        "cameras": [{"intrinsics": k}, {"intrinsics": k, "translation": [0.5, 0, 0]}],
        "noise_sigma": noise,
        "outlier_fraction": outliers,
        "distortion": [
            {"scale": distortion[0].0, "shift": distortion[0].1},
            {"scale": distortion[1].0, "shift": distortion[1].1},
        ],
        "seed": 7,
    })
}

pub const IDENTITY: (f64, [f64; 3]) = (1.0, [0.0, 0.0, 0.0]);

pub fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Writes a spec and synthesizes its bundle into `dir/bundle`.
pub fn synth_bundle(dir: &Path, spec: &Value) -> std::path::PathBuf {
    let spec_path = dir.join("spec.json");
    write_json(&spec_path, spec);
    let bundle = dir.join("bundle");
    let out = more(&["synth", p(&spec_path), "--out", p(&bundle)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    bundle
}
