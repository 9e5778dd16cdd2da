mod common;

use common::{manifest, NATURALNESS_SENTENCES, SYSTEMS};
use listening_test::campaign::build_campaign;
use listening_test::service::assignment;
use listening_test::{EvalError, Role, Task};

#[test]
fn naturalness_campaign_has_one_trial_per_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), Task::Naturalness, &NATURALNESS_SENTENCES, &SYSTEMS, 1);
    let c = build_campaign(&m, dir.path()).unwrap();
    assert_eq!(c.trials.len(), 9);
    assert!(c.trials.iter().all(|t| t.stimuli.len() == 3 && t.reference.is_none()));
    assert_eq!(
        c.prompt,
        "Please rate each audio sample based on the pronunciation of the words and how natural it sounds"
    );
}

#[test]
fn canonical_prompts_are_verbatim() {
    assert_eq!(
        Task::SpeakerSimilarity.canonical_prompt(),
        "Please rate each audio sample according to how similar the speaker sounds to the reference speaker"
    );
    assert_eq!(
        Task::CodeSwitching.canonical_prompt(),
        "Please rate each audio sample based on how natural the transition between Romanian and English is"
    );
}

#[test]
fn similarity_trials_include_the_original_and_a_reference() {
    let dir = tempfile::tempdir().unwrap();
    let systems = [
        ("RO-F5TTS", Role::Candidate),
        ("F5-TTS-FULL-FT", Role::Candidate),
        ("LOWANCHOR", Role::LowAnchor),
        ("ORIGINAL", Role::Natural),
    ];
    let sentences: Vec<String> = (0..10).map(|i| format!("Propoziția numărul {i}.")).collect();
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let m = manifest(dir.path(), Task::SpeakerSimilarity, &refs, &systems, 2);
    let c = build_campaign(&m, dir.path()).unwrap();
    assert_eq!(c.trials.len(), 10);
    for t in &c.trials {
        assert_eq!(t.stimuli.len(), 4);
        assert!(t.stimuli.iter().any(|s| s.system == "ORIGINAL"));
        assert!(t.reference.as_ref().unwrap().is_file());
    }

    let mut no_refs = m.clone();
    no_refs.references = None;
    assert!(matches!(build_campaign(&no_refs, dir.path()), Err(EvalError::Manifest(_))));
    let mut no_natural = m;
    no_natural.systems[3].role = Role::HighAnchor;
    assert!(matches!(build_campaign(&no_natural, dir.path()), Err(EvalError::Manifest(_))));
}

#[test]
fn stimulus_count_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), Task::Naturalness, &NATURALNESS_SENTENCES[..2], &SYSTEMS[..2], 1);
    assert!(matches!(build_campaign(&m, dir.path()), Err(EvalError::Manifest(_))));
    let five = [
        ("S1", Role::Candidate),
        ("S2", Role::Candidate),
        ("S3", Role::Candidate),
        ("S4", Role::Candidate),
        ("S5", Role::LowAnchor),
    ];
    let m = manifest(dir.path(), Task::Naturalness, &NATURALNESS_SENTENCES[..2], &five, 1);
    assert!(matches!(build_campaign(&m, dir.path()), Err(EvalError::Manifest(_))));
}

#[test]
fn missing_audio_lists_sentence_and_system() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), Task::Naturalness, &NATURALNESS_SENTENCES[..3], &SYSTEMS, 1);
    std::fs::remove_file(dir.path().join("audio/MMS-TTS-RON_2.wav")).unwrap();
    let mut m2 = m.clone();
    m2.systems[2].files.remove("0");
    match build_campaign(&m2, dir.path()) {
        Err(EvalError::MissingAudio(missing)) => {
            assert_eq!(missing, vec![(0, "LOWANCHOR".to_string()), (2, "MMS-TTS-RON".to_string())]);
            let msg = EvalError::MissingAudio(missing).to_string();
            assert!(msg.contains("(sentence 2, system MMS-TTS-RON)"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn system_name_in_listener_text_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let sentences = ["Acesta este RO-F5TTS vorbind.", "Alta."];
    let m = manifest(dir.path(), Task::Naturalness, &sentences, &SYSTEMS, 1);
    assert!(matches!(build_campaign(&m, dir.path()), Err(EvalError::Manifest(_))));
    let mut m = manifest(dir.path(), Task::Naturalness, &sentences[1..], &SYSTEMS, 1);
    m.prompt_override = Some("Rate LOWANCHOR".into());
    assert!(matches!(build_campaign(&m, dir.path()), Err(EvalError::Manifest(_))));
}

#[test]
fn prompt_override_replaces_canonical_text() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = manifest(dir.path(), Task::CodeSwitching, &NATURALNESS_SENTENCES[..1], &SYSTEMS, 1);
    m.prompt_override = Some("Custom instruction".into());
    assert_eq!(build_campaign(&m, dir.path()).unwrap().prompt, "Custom instruction");
}

#[test]
fn orders_differ_between_listeners_and_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let four = [
        ("S1", Role::Candidate),
        ("S2", Role::Candidate),
        ("S3", Role::HighAnchor),
        ("S4", Role::LowAnchor),
    ];
    let mut differing = 0;
    let seeds = 200;
    for seed in 0..seeds {
        let m = manifest(dir.path(), Task::Naturalness, &NATURALNESS_SENTENCES[..1], &four, seed);
        let c = build_campaign(&m, dir.path()).unwrap();
        let a = assignment(&c, "alice-1", 0);
        let b = assignment(&c, "bob-2", 0);
        assert_eq!(a, assignment(&c, "alice-1", 0));
        let mut sorted = a.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert!(a.keys.iter().all(|k| b.keys.iter().all(|o| o != k)));
        if a.order != b.order {
            differing += 1;
        }
    }
    // Two independent uniform permutations of 4 agree with probability 1/24.
    assert!(differing > seeds * 85 / 100, "{differing}/{seeds}");
}
