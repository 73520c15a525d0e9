//! Replays the fuzz corpus, plus deterministic mutations of it, through
//! the same entry points and assertions as the fuzz targets.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use glsphere_cli::config::ExperimentConfig;
use glsphere_cli::snapshot::{decode, encode};

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus at {}", dir.display());
    files.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn mutations(seed: &[u8], rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<u8>> {
    (0..count)
        .map(|_| {
            let mut v = seed.to_vec();
            match rng.gen_range(0..3) {
                0 if !v.is_empty() => {
                    let i = rng.gen_range(0..v.len());
                    v[i] ^= 1 << rng.gen_range(0..8);
                }
                1 if !v.is_empty() => v.truncate(rng.gen_range(0..v.len())),
                _ => v.extend((0..rng.gen_range(1..16)).map(|_| rng.gen::<u8>())),
            }
            v
        })
        .collect()
}

fn check_snapshot(data: &[u8]) {
    if let Ok(snap) = decode(data) {
        assert_eq!(encode(&snap), data);
    }
}

fn check_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let again = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&again).unwrap(), cfg);
    }
}

#[test]
fn snapshot_corpus_and_mutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let seeds = corpus("snapshot_decode");
    assert!(seeds.iter().any(|s| decode(s).is_ok()));
    for seed in &seeds {
        check_snapshot(seed);
        for m in mutations(seed, &mut rng, 200) {
            check_snapshot(&m);
        }
    }
}

#[test]
fn config_corpus_and_mutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let seeds = corpus("config_parse");
    assert!(seeds.iter().any(|s| ExperimentConfig::from_toml_str(std::str::from_utf8(s).unwrap()).is_ok()));
    for seed in &seeds {
        check_config(seed);
        for m in mutations(seed, &mut rng, 200) {
            check_config(&m);
        }
    }
}
