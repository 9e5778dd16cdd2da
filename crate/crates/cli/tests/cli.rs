//! End-to-end runs of the `ttsa` binary.

mod common;

use common::*;
use serde_json::Value;

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = ttsa(&["frobnicate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        vec!["gen-corpus"],
        vec!["train"],
        vec!["embed"],
        vec!["merge-cs"],
        vec!["synth"],
        vec!["eval-wer"],
        vec!["eval-sim"],
        vec!["campaign", "build"],
        vec!["campaign", "serve"],
        vec!["campaign", "report"],
    ] {
        let mut args = cmd.clone();
        args.push("--help");
        let out = ttsa(&args);
        assert_eq!(code(&out), 0, "{cmd:?}");
        assert!(stdout(&out).contains("Usage"), "{cmd:?}");
    }
}

#[test]
fn missing_required_flag_exits_one() {
    let out = ttsa(&["synth", "--text", "salut"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn dry_run_echoes_default_hyperparameters() {
    let v = ttsa_json(&["train", "--dry-run"]);
    let c = &v["config"];
    assert_eq!(c["learning_rate"], 1e-4);
    assert_eq!(c["warmup_updates"], 50);
    assert_eq!(c["frame_budget"], 16384);
    assert_eq!(c["max_samples_per_batch"], 128);
    assert_eq!(c["max_steps"], 40500);

    let human = stdout(&ttsa(&["train", "--dry-run"]));
    assert!(human.contains("learning_rate 0.0001"), "{human}");
    assert!(human.contains("frame_budget 16384"), "{human}");
}

#[test]
fn flags_override_config_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.json");
    std::fs::write(&cfg, r#"{"learning_rate": 0.0005, "warmup_updates": 7}"#).unwrap();
    let v = ttsa_json(&["train", "--dry-run", "--config", p(&cfg), "--lr", "0.002"]);
    let c = &v["config"];
    assert_eq!(c["learning_rate"], 0.002);
    assert_eq!(c["warmup_updates"], 7);
    assert_eq!(c["frame_budget"], 16384);

    std::fs::write(&cfg, r#"{"learning_rate": 0.0005, "learnin_rate": 1}"#).unwrap();
    assert_eq!(code(&ttsa(&["train", "--dry-run", "--config", p(&cfg)])), 1);
    assert_eq!(code(&ttsa(&["train", "--dry-run", "--lr", "-1"])), 1);
}

#[test]
fn identical_transcripts_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = "bună ziua\nce mai faci astăzi\n";
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    std::fs::write(&r, text).unwrap();
    std::fs::write(&h, text).unwrap();
    let out = ttsa(&["eval-wer", "--ref", p(&r), "--hyp", p(&h)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("WER 0.00%"), "{}", stdout(&out));
}

#[test]
fn wer_report_and_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h, csv) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"), dir.path().join("out/wer.csv"));
    std::fs::write(&r, "a b c\nd e\n").unwrap();
    std::fs::write(&h, "a x c\nd e f\n").unwrap();
    let v = ttsa_json(&["eval-wer", "--ref", p(&r), "--hyp", p(&h), "--system", "demo", "--out", p(&csv)]);
    // Corpus counts: H=4, S=1, D=0, I=1, N_ref=5, N_hyp=6.
    assert_eq!(v["counts"]["hits"], 4);
    assert_eq!(v["counts"]["insertions"], 1);
    let wer = v["report"]["wer"].as_f64().unwrap();
    assert!((wer - 2.0 / 5.0).abs() < 1e-15);
    let wip = v["report"]["wip"].as_f64().unwrap();
    assert!((wip - 16.0 / 30.0).abs() < 1e-15);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table, "Metric (%),demo\nWER,40.00\nMER,33.33\nWIL,46.67\nWIP,53.33\n");
}

#[test]
fn wer_normalization_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    std::fs::write(&r, "Bună ziua, Ana!\n").unwrap();
    std::fs::write(&h, "bună ziua ana\n").unwrap();
    let raw = ttsa_json(&["eval-wer", "--ref", p(&r), "--hyp", p(&h)]);
    assert!(raw["report"]["wer"].as_f64().unwrap() > 0.0);
    let norm = ttsa_json(&["eval-wer", "--ref", p(&r), "--hyp", p(&h), "--normalize"]);
    assert_eq!(norm["report"]["wer"], 0.0);
}

#[test]
fn wer_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    std::fs::write(&r, "a\nb\n").unwrap();
    std::fs::write(&h, "a\n").unwrap();
    let out = ttsa(&["eval-wer", "--ref", p(&r), "--hyp", p(&h)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("2 reference lines but 1"));

    std::fs::write(&r, "\n").unwrap();
    std::fs::write(&h, "x\n").unwrap();
    assert_eq!(code(&ttsa(&["eval-wer", "--ref", p(&r), "--hyp", p(&h)])), 1);

    let missing = dir.path().join("nope.txt");
    assert_eq!(code(&ttsa(&["eval-wer", "--ref", p(&missing), "--hyp", p(&h)])), 2);
}

#[test]
fn json_errors_are_machine_readable() {
    let out = ttsa(&["--json", "eval-wer", "--ref", "/nonexistent/a", "--hyp", "/nonexistent/b"]);
    assert_eq!(code(&out), 2);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["code"], 2);
    assert!(v["error"].as_str().unwrap().contains("/nonexistent/a"));
}

#[test]
fn similarity_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    let csv = dir.path().join("sim.csv");
    // Cosines: 1, 0, 0.6.
    std::fs::write(
        &pairs,
        concat!(
            "{\"ref_embedding\":[1,0],\"gen_embedding\":[2,0]}\n",
            "{\"ref_embedding\":[1,0],\"gen_embedding\":[0,3]}\n",
            "\n",
            "{\"ref_embedding\":[1,0],\"gen_embedding\":[3,4]}\n",
        ),
    )
    .unwrap();
    let v = ttsa_json(&["eval-sim", "--pairs", p(&pairs), "--out", p(&csv)]);
    assert_eq!(v["pairs"], 3);
    let s = &v["stats"];
    assert!((s["mean"].as_f64().unwrap() - 1.6 / 3.0).abs() < 1e-12);
    assert!((s["median"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(s["min"], 0.0);
    assert_eq!(s["max"], 1.0);
    // Sample std: deviations 7/15, -8/15, 1/15 → sqrt((49+64+1)/225/2).
    let std = (114.0f64 / 450.0).sqrt();
    assert!((s["std"].as_f64().unwrap() - std).abs() < 1e-12);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("Statistic,system\nMean,0.5333\n"), "{table}");

    std::fs::write(&pairs, "{\"ref_embedding\":[1,0],\"gen_embedding\":[1,0,0]}\n").unwrap();
    let out = ttsa(&["eval-sim", "--pairs", p(&pairs)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 1"));
}

#[test]
fn corpus_train_embed_merge_synth() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let run = dir.path().join("run");
    let g = ttsa_json(&["gen-corpus", "--out", p(&corpus), "--n-sentences", "4", "--seed", "3"]);
    assert_eq!(g["sentences"], 4);
    let manifest = corpus.join("manifest.jsonl");
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 4);

    let t = ttsa_json(&[
        "train", "--corpus", p(&manifest), "--out", p(&run), "--max-steps", "6", "--lr", "0.003", "--warmup", "2",
        "--checkpoint-every", "3",
    ]);
    assert_eq!(t["steps"], 6);
    assert_eq!(t["backbone_hash"].as_str().unwrap().len(), 64);
    let ckpt = run.join("checkpoint.ckpt");
    assert!(ckpt.is_file());
    assert!(run.join("checkpoints/step-000003.ckpt").is_file());
    assert!(run.join("checkpoints/step-000006.ckpt").is_file());
    let loss = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 7);
    assert!(loss.starts_with("step,loss\n1,"));

    let h = run.join("h.bin");
    ttsa_json(&["embed", "--ckpt", p(&ckpt), "--text", "salut", "--out", p(&h)]);
    let (shape, data) = read_dump(&h);
    assert_eq!(shape, vec![5, 32]);
    assert!(data.iter().all(|x| x.is_finite()));

    let m = run.join("hcs.bin");
    let v = ttsa_json(&["merge-cs", "--ckpt", p(&ckpt), "--text", "un call~ with ~ea", "--out", p(&m)]);
    assert_eq!(v["provenance"], "RRRRRRREEEEEERR");
    assert_eq!(read_dump(&m).0, vec![15, 32]);

    let mel = run.join("mel.bin");
    let v = ttsa_json(&["synth", "--ckpt", p(&ckpt), "--text", "salut", "--out", p(&mel), "--seed", "7", "--steps", "4"]);
    assert_eq!(v["frames"], 10);
    assert_eq!(read_dump(&mel).0, vec![10, 16]);

    // English characters outside the adapter vocabulary are fine inside `~`.
    let out = ttsa(&["synth", "--ckpt", p(&ckpt), "--text", "~Wow!~ bine", "--out", p(&mel), "--steps", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // Characters neither vocabulary knows become filler rows.
    let v = ttsa_json(&["synth", "--ckpt", p(&ckpt), "--text", "bine ☃", "--out", p(&mel), "--steps", "2"]);
    assert_eq!(v["frames"], 12);
    let out = ttsa(&["synth", "--ckpt", p(&ckpt), "--text", "~~", "--out", p(&mel)]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn bad_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("m.bin");
    let missing = dir.path().join("missing.ckpt");
    let out = ttsa(&["synth", "--ckpt", p(&missing), "--text", "a", "--out", p(&out_path)]);
    assert_eq!(code(&out), 2);
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let out = ttsa(&["synth", "--ckpt", p(&junk), "--text", "a", "--out", p(&out_path)]);
    assert_ne!(code(&out), 0);
    assert!(!out_path.exists());
}

#[test]
fn train_rejects_oversized_samples() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ttsa_json(&["gen-corpus", "--out", p(&corpus), "--n-sentences", "2", "--min-chars", "30", "--max-chars", "30"]);
    let out = ttsa(&[
        "train", "--corpus", p(&corpus.join("manifest.jsonl")), "--out", p(&dir.path().join("run")), "--frame-budget", "10",
        "--max-steps", "1",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("syn0000") || stderr(&out).contains("syn0001"), "{}", stderr(&out));
}

#[test]
fn campaign_build_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = campaign_manifest(dir.path(), "nat", 4);
    let built = dir.path().join("out/campaign.json");
    let v = ttsa_json(&["campaign", "build", "--manifest", p(&manifest), "--out", p(&built)]);
    assert_eq!(v["trials"], 3);
    let campaign: Value = serde_json::from_str(&std::fs::read_to_string(&built).unwrap()).unwrap();
    assert_eq!(campaign["seed"], 4);
    ttsa_json(&["campaign", "build", "--manifest", p(&manifest), "--out", p(&built), "--seed", "9"]);
    let campaign: Value = serde_json::from_str(&std::fs::read_to_string(&built).unwrap()).unwrap();
    assert_eq!(campaign["seed"], 9);

    // A log with one listener rating trial t01.
    let log = dir.path().join("ratings.jsonl");
    let scores: Vec<Value> = SYSTEMS
        .iter()
        .enumerate()
        .map(|(i, (name, _))| serde_json::json!({ "key": format!("k{i}"), "system": name, "score": 10 * (i + 1) }))
        .collect();
    let record = serde_json::json!({
        "type": "ratings", "campaign": "nat", "listener_id": "x-1", "trial_id": "t01",
        "scores": scores, "timestamp_ms": 1,
    });
    std::fs::write(&log, format!("{record}\n")).unwrap();
    let csv_path = dir.path().join("report.csv");
    let out = ttsa(&["campaign", "report", "--campaign", p(&built), "--log", p(&log)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("t01,RO-F5TTS,candidate,1,10.0000,10.0000"), "{}", stdout(&out));
    ttsa_json(&["campaign", "report", "--campaign", p(&built), "--log", p(&log), "--out", p(&csv_path)]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("trial_id,system,role,n,mean,median\n"));
    assert!(csv.contains("LOWANCHOR,low_anchor,1,30.0000,30.0000"), "{csv}");
}

#[test]
fn campaign_build_reports_missing_audio() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = campaign_manifest(dir.path(), "nat", 0);
    std::fs::remove_file(dir.path().join("audio/MMS-TTS-RON_1.wav")).unwrap();
    let out = ttsa(&["campaign", "build", "--manifest", p(&manifest), "--out", p(&dir.path().join("c.json"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sentence 1, system MMS-TTS-RON"), "{}", stderr(&out));
}
