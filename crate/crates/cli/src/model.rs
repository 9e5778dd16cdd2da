//! Corpus, training and synthesis commands.

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use tts_adapter::checkpoint::{write_tensor, Checkpoint, TrainRecord};
use tts_adapter::codeswitch::{merge, synthesize_cs, Vocabs};
use tts_adapter::model::{Adapter, AdapterConfig, BackboneConfig, FrozenBackbone};
use tts_adapter::text::{parse_code_switch, Vocab};
use tts_adapter::train::{make_synthetic_corpus, CorpusManifest, SyntheticCorpusSpec, TrainConfig, TrainingSet};

use crate::failure::Failure;
use crate::{out_parent, Output};

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    n_sentences: usize,
    #[arg(long, default_value_t = 16)]
    d_mel: usize,
    #[arg(long, default_value_t = 2)]
    frames_per_char: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    min_chars: usize,
    #[arg(long, default_value_t = 24)]
    max_chars: usize,
    /// Characters to draw sentences from (default: lowercase Romanian letters and space).
    #[arg(long)]
    charset: Option<String>,
}

pub fn gen_corpus(a: GenCorpusArgs, out: Output) -> Result<(), Failure> {
    let defaults = SyntheticCorpusSpec::default();
    let spec = SyntheticCorpusSpec {
        n_sentences: a.n_sentences,
        charset: a.charset.map(|c| c.chars().collect()).unwrap_or(defaults.charset),
        d_mel: a.d_mel,
        frames_per_char: a.frames_per_char,
        noise_std: a.noise_std,
        seed: a.seed,
        min_chars: a.min_chars,
        max_chars: a.max_chars,
        template_std: defaults.template_std,
    };
    let manifest = make_synthetic_corpus(&spec, &a.out)?;
    let frames: usize = manifest.entries.iter().map(|e| e.n_frames).sum();
    out.emit(
        json!({
            "manifest": a.out.join("manifest.jsonl"),
            "sentences": manifest.entries.len(),
            "frames": frames,
            "seed": spec.seed,
        }),
        || format!("wrote {} sentences ({frames} frames) to {}", manifest.entries.len(), a.out.display()),
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TrainConfig JSON file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus manifest (JSON lines).
    #[arg(long, required_unless_present = "dry_run")]
    corpus: Option<PathBuf>,
    /// Output directory for checkpoints and the loss log.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    /// Adapter vocabulary JSON (default: built-in Romanian).
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    frame_budget: Option<usize>,
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn effective_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut c: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.lr {
        c.learning_rate = v;
    }
    if let Some(v) = a.max_steps {
        c.max_steps = v;
    }
    if let Some(v) = a.warmup {
        c.warmup_updates = v;
    }
    if let Some(v) = a.frame_budget {
        c.frame_budget = v;
    }
    if let Some(v) = a.max_samples {
        c.max_samples_per_batch = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.checkpoint_every {
        c.checkpoint_every = v;
    }
    c.validate()?;
    Ok(c)
}

/// Frames per character if every entry uses the same integral ratio.
fn corpus_frames_per_char(manifest: &CorpusManifest) -> Option<usize> {
    let mut ratio = None;
    for e in &manifest.entries {
        let chars = e.text.chars().count();
        if chars == 0 || e.n_frames % chars != 0 {
            return None;
        }
        let r = e.n_frames / chars;
        if *ratio.get_or_insert(r) != r {
            return None;
        }
    }
    ratio
}

pub fn train(a: TrainArgs, out: Output) -> Result<(), Failure> {
    let config = effective_config(&a)?;
    let config_json = serde_json::to_value(&config).expect("config serializes");
    if a.dry_run {
        out.emit(json!({ "config": config_json, "dry_run": true }), || {
            format!(
                "learning_rate {}\nwarmup_updates {}\nframe_budget {}\nmax_samples_per_batch {}\nmax_steps {}\nseed {}",
                config.learning_rate,
                config.warmup_updates,
                config.frame_budget,
                config.max_samples_per_batch,
                config.max_steps,
                config.seed
            )
        });
        return Ok(());
    }
    let (corpus, out_dir) = (a.corpus.expect("required by clap"), a.out.expect("required by clap"));
    let vocab = match &a.vocab {
        Some(p) => Vocab::load(p)?,
        None => Vocab::romanian(),
    };
    let manifest = CorpusManifest::read(&corpus)?;
    if manifest.entries.is_empty() {
        return Err(Failure::usage(format!("{}: manifest has no entries", corpus.display())));
    }
    let set = TrainingSet::load(&manifest, &vocab)?;
    let mel_dim = set.mel_dim().expect("non-empty set");
    let frames_per_char = corpus_frames_per_char(&manifest).unwrap_or(2);

    let adapter_config = AdapterConfig {
        seed: config.seed,
        ..AdapterConfig::desk(vocab.len())
    };
    let mut adapter = Adapter::new(adapter_config)?;
    let tts_vocab = Vocab::ascii();
    let backbone_config = BackboneConfig {
        mel_dim,
        ..BackboneConfig::desk(tts_vocab.len(), adapter.config().hidden_dim)
    };
    let backbone = FrozenBackbone::from_seed(backbone_config)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| Failure::runtime(format!("{}: {e}", out_dir.display())))?;
    let record = |step: usize, history: &[f32]| TrainRecord {
        config: config.clone(),
        step,
        loss_history: history.to_vec(),
        frames_per_char,
    };
    let history = tts_adapter::train::train(&config, &set, &mut adapter, &backbone, |p| {
        if config.checkpoint_every > 0 && p.step % config.checkpoint_every == 0 {
            let ckpt = Checkpoint::new(record(p.step, p.loss_history), vocab.clone(), p.adapter.clone(), &backbone, &tts_vocab);
            let path = out_dir.join(format!("checkpoints/step-{:06}.ckpt", p.step));
            ckpt.save(&path)
                .map_err(|e| tts_adapter::train::TrainError::Format(e.to_string()))?;
        }
        Ok(())
    })?;

    let final_path = out_dir.join("checkpoint.ckpt");
    Checkpoint::new(record(history.len(), &history), vocab.clone(), adapter, &backbone, &tts_vocab).save(&final_path)?;
    let mut loss_csv = String::from("step,loss\n");
    for (i, l) in history.iter().enumerate() {
        loss_csv.push_str(&format!("{},{l}\n", i + 1));
    }
    let write = |name: &str, body: String| -> Result<(), Failure> {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(|e| Failure::runtime(format!("{}: {e}", p.display())))
    };
    write("loss.csv", loss_csv)?;
    write("train_config.json", serde_json::to_string_pretty(&config_json).expect("serializes"))?;

    let first = history.first().copied().unwrap_or(f32::NAN);
    let last = history.last().copied().unwrap_or(f32::NAN);
    out.emit(
        json!({
            "checkpoint": final_path,
            "steps": history.len(),
            "first_loss": first,
            "final_loss": last,
            "backbone_hash": backbone.content_hash(),
            "config": config_json,
        }),
        || format!("{} steps, loss {first:.4} -> {last:.4}; checkpoint {}", history.len(), final_path.display()),
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    text: String,
    /// Output tensor dump.
    #[arg(long)]
    out: PathBuf,
}

pub fn embed(a: EmbedArgs, out: Output) -> Result<(), Failure> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let seq = ckpt.vocab.encode(&a.text)?;
    let h = ckpt.adapter.forward(&seq, None)?;
    out_parent(&a.out)?;
    write_tensor(&a.out, &h)?;
    out.emit(json!({ "out": a.out, "shape": h.shape() }), || {
        format!("h_ctx {:?} -> {}", h.shape(), a.out.display())
    });
    Ok(())
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Text with `~` toggling between Romanian and English.
    #[arg(long)]
    text: String,
    #[arg(long)]
    out: PathBuf,
    /// Pad to this many rows per character (1 = no padding).
    #[arg(long, default_value_t = 1)]
    frames_per_char: usize,
}

pub fn merge_cs(a: MergeArgs, out: Output) -> Result<(), Failure> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let backbone = ckpt.backbone()?;
    let tts_vocab = ckpt.backbone_vocab()?;
    let parsed = parse_code_switch(&a.text, &ckpt.vocab, &tts_vocab)?;
    let n = parsed.len() * a.frames_per_char.max(1);
    let padded = parsed.pad_to_frames(n, &ckpt.vocab, &tts_vocab)?;
    let merged = merge(&padded, &ckpt.adapter, &backbone)?;
    out_parent(&a.out)?;
    write_tensor(&a.out, &merged.h_cs)?;
    let provenance: String = merged
        .provenance
        .iter()
        .map(|l| match l {
            tts_adapter::text::Language::Romanian => 'R',
            tts_adapter::text::Language::English => 'E',
        })
        .collect();
    out.emit(
        json!({ "out": a.out, "shape": merged.h_cs.shape(), "provenance": provenance }),
        || format!("h_cs {:?} -> {}\n{provenance}", merged.h_cs.shape(), a.out.display()),
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Text to speak; `~` toggles into and out of English.
    #[arg(long)]
    text: String,
    /// Output tensor dump (frames × mel channels).
    #[arg(long)]
    out: PathBuf,
    /// Seed for the initial noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Euler integration steps.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Override the checkpoint's frames per character.
    #[arg(long)]
    frames_per_char: Option<usize>,
}

pub fn synth(a: SynthArgs, out: Output) -> Result<(), Failure> {
    if a.steps == 0 {
        return Err(Failure::usage("--steps must be at least 1"));
    }
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let backbone = ckpt.backbone()?;
    let tts_vocab = ckpt.backbone_vocab()?;
    let fpc = a.frames_per_char.unwrap_or(ckpt.train.frames_per_char);
    let vocabs = Vocabs {
        romanian: &ckpt.vocab,
        english: &tts_vocab,
    };
    let mel = synthesize_cs(&a.text, vocabs, &ckpt.adapter, &backbone, fpc, a.steps, a.seed)?;
    out_parent(&a.out)?;
    write_tensor(&a.out, &mel.frames)?;
    out.emit(
        json!({
            "out": a.out,
            "frames": mel.n_frames(),
            "channels": mel.channels(),
            "seed": a.seed,
            "steps": a.steps,
        }),
        || format!("{} frames x {} channels -> {}", mel.n_frames(), mel.channels(), a.out.display()),
    );
    Ok(())
}
