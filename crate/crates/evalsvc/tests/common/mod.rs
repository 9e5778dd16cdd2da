#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use listening_test::{CampaignManifest, Role, SystemEntry, Task};

pub const NATURALNESS_SENTENCES: [&str; 9] = [
    "Am avut astăzi o întâlnire foarte lungă cu clientul, care a durat aproape două ore, și am discutat multe detalii importante despre proiect.",
    "Poți să-mi trimiți și mie, te rog, documentul respectiv, ca să pot verifica toate informațiile înainte de întâlnirea de mâine?",
    "Săptămâna aceasta vreau să mă relaxez acasă, să citesc ceva și poate să vizionez un film sau să mă uit la un serial interesant.",
    "Este extrem de enervant când oamenii nu răspund la mesajele pe care le trimiți, mai ales dacă ai nevoie urgentă de informații.",
    "Îți voi trimite un raport complet mâine dimineață, imediat după ce reușesc să vorbesc cu toți colegii implicați în proiect.",
    "Nu sunt sigur dacă are sens, dar hai să încercăm oricum, chiar dacă există riscul să nu funcționeze perfect.",
    "A spus că termenul limită este vineri, dar sincer, nu cred că va termina tot ce și-a propus până atunci, așa că trebuie să verificăm împreună progresul.",
    "Mă duc să iau o cafea de la cafenea și revin imediat, ca să putem continua discuția fără întreruperi.",
    "Am avut o întâlnire foarte devreme dimineața și nu am avut timp nici măcar să mănânc, așa că am plecat de acasă cu stomacul gol.",
];

pub const SYSTEMS: [(&str, Role); 3] = [
    ("RO-F5TTS", Role::Candidate),
    ("MMS-TTS-RON", Role::Candidate),
    ("LOWANCHOR", Role::LowAnchor),
];

/// Writes dummy audio for every (sentence, system) and returns a manifest
/// with relative paths.
pub fn manifest(dir: &Path, task: Task, sentences: &[&str], systems: &[(&str, Role)], seed: u64) -> CampaignManifest {
    std::fs::create_dir_all(dir.join("audio")).unwrap();
    let mut entries = Vec::new();
    for (name, role) in systems {
        let mut files = BTreeMap::new();
        for i in 0..sentences.len() {
            let rel = format!("audio/{name}_{i}.wav");
            std::fs::write(dir.join(&rel), format!("RIFF{name}{i}")).unwrap();
            files.insert(i.to_string(), rel.into());
        }
        entries.push(SystemEntry {
            name: name.to_string(),
            role: *role,
            files,
        });
    }
    let references = (task == Task::SpeakerSimilarity).then(|| {
        (0..sentences.len())
            .map(|i| {
                let rel = format!("audio/reference_{i}.wav");
                std::fs::write(dir.join(&rel), b"RIFFref").unwrap();
                rel.into()
            })
            .collect()
    });
    CampaignManifest {
        id: Some("nat".into()),
        task,
        prompt_override: None,
        sentences: sentences.iter().map(|s| s.to_string()).collect(),
        systems: entries,
        seed,
        references,
    }
}
