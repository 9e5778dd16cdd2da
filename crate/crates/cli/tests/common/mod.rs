#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn ttsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttsa"))
        .args(args)
        .output()
        .expect("spawn ttsa")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs with `--json` and parses stdout; panics with stderr on failure.
pub fn ttsa_json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = ttsa(&full);
    assert_eq!(code(&out), 0, "ttsa {args:?} failed: {}", stderr(&out));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Reads a tensor dump: u32 rank, u32 dims, little-endian f32 data.
pub fn read_dump(path: &Path) -> (Vec<usize>, Vec<f32>) {
    let bytes = std::fs::read(path).unwrap();
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let rank = u32_at(0);
    let shape: Vec<usize> = (0..rank).map(|k| u32_at(4 + 4 * k)).collect();
    let start = 4 + 4 * rank;
    let data: Vec<f32> = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(data.len(), shape.iter().product::<usize>());
    (shape, data)
}

pub const SYSTEMS: [(&str, &str); 3] = [("RO-F5TTS", "candidate"), ("MMS-TTS-RON", "candidate"), ("LOWANCHOR", "low_anchor")];

pub const SENTENCES: [&str; 3] = [
    "Mă duc să iau o cafea de la cafenea și revin imediat.",
    "Nu sunt sigur dacă are sens, dar hai să încercăm oricum.",
    "Poți să-mi trimiți și mie documentul respectiv?",
];

/// Writes dummy audio plus a naturalness campaign manifest; returns its path.
pub fn campaign_manifest(dir: &Path, id: &str, seed: u64) -> std::path::PathBuf {
    std::fs::create_dir_all(dir.join("audio")).unwrap();
    let systems: Vec<Value> = SYSTEMS
        .iter()
        .map(|(name, role)| {
            let files: serde_json::Map<String, Value> = (0..SENTENCES.len())
                .map(|i| {
                    let rel = format!("audio/{name}_{i}.wav");
                    std::fs::write(dir.join(&rel), format!("RIFF{name}{i}")).unwrap();
                    (i.to_string(), Value::from(rel))
                })
                .collect();
            json!({ "name": name, "role": role, "files": files })
        })
        .collect();
    let manifest = json!({
        "id": id,
        "task": "naturalness",
        "sentences": SENTENCES,
        "systems": systems,
        "seed": seed,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}
