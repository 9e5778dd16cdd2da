//! Objective metrics commands.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use serde_json::json;
use tts_adapter::metrics::{align, cosine, normalize, report, summarize, tokenize, AlignmentCounts};

use crate::failure::Failure;
use crate::{out_parent, Output};

#[derive(Args, Debug)]
pub struct WerArgs {
    /// Reference transcripts, one utterance per line.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis transcripts, line-aligned with the reference.
    #[arg(long)]
    hyp: PathBuf,
    /// Lowercase and strip punctuation before scoring.
    #[arg(long)]
    normalize: bool,
    /// Column label for the CSV table.
    #[arg(long, default_value = "system")]
    system: String,
    /// Write the percentage table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn write_csv(path: &PathBuf, body: &str) -> Result<(), Failure> {
    out_parent(path)?;
    std::fs::write(path, body).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

pub fn wer(a: WerArgs, out: Output) -> Result<(), Failure> {
    let refs = read(&a.reference)?;
    let hyps = read(&a.hyp)?;
    let (refs, hyps): (Vec<&str>, Vec<&str>) = (refs.lines().collect(), hyps.lines().collect());
    if refs.len() != hyps.len() {
        return Err(Failure::usage(format!(
            "{} reference lines but {} hypothesis lines",
            refs.len(),
            hyps.len()
        )));
    }
    let prep = |s: &str| if a.normalize { normalize(s) } else { s.to_string() };
    let counts: AlignmentCounts = refs
        .iter()
        .zip(&hyps)
        .map(|(r, h)| {
            let (r, h) = (prep(r), prep(h));
            align(&tokenize(&r), &tokenize(&h))
        })
        .sum();
    let rep = report(&counts)?;
    let rows = [("WER", rep.wer), ("MER", rep.mer), ("WIL", rep.wil), ("WIP", rep.wip)];
    if let Some(path) = &a.out {
        let mut csv = format!("Metric (%),{}\n", a.system);
        for (name, v) in rows {
            csv.push_str(&format!("{name},{:.2}\n", v * 100.0));
        }
        write_csv(path, &csv)?;
    }
    out.emit(
        json!({ "lines": refs.len(), "counts": counts, "report": rep }),
        || {
            rows.iter()
                .map(|(n, v)| format!("{n} {:.2}%", v * 100.0))
                .collect::<Vec<_>>()
                .join("\n")
        },
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimArgs {
    /// JSON lines of {"ref_embedding": [...], "gen_embedding": [...]}.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value = "system")]
    system: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Pair {
    ref_embedding: Vec<f64>,
    gen_embedding: Vec<f64>,
}

pub fn sim(a: SimArgs, out: Output) -> Result<(), Failure> {
    let raw = read(&a.pairs)?;
    let mut values = Vec::new();
    for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let pair: Pair = serde_json::from_str(line)
            .map_err(|e| Failure::usage(format!("{} line {}: {e}", a.pairs.display(), i + 1)))?;
        let c = cosine(&pair.ref_embedding, &pair.gen_embedding)
            .map_err(|e| Failure::usage(format!("{} line {}: {e}", a.pairs.display(), i + 1)))?;
        values.push(c);
    }
    let stats = summarize(&values)?;
    let rows = [
        ("Mean", stats.mean),
        ("Standard Deviation", stats.std),
        ("Minimum", stats.min),
        ("Maximum", stats.max),
        ("Median", stats.median),
    ];
    if let Some(path) = &a.out {
        let mut csv = format!("Statistic,{}\n", a.system);
        for (name, v) in rows {
            csv.push_str(&format!("{name},{v:.4}\n"));
        }
        write_csv(path, &csv)?;
    }
    out.emit(json!({ "pairs": values.len(), "stats": stats }), || {
        rows.iter()
            .map(|(n, v)| format!("{n} {v:.4}"))
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(())
}
