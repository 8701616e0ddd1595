//! Replays the checked-in fuzz seeds, plus random byte mutations of them,
//! through the same round-trip properties the fuzz targets assert.

use std::path::PathBuf;

use forcecast::config::RunConfig;
use forcecast::io::image::{decode_pgm16, decode_ppm, encode_pgm16, encode_ppm};
use forcecast::io::manifest::parse_manifest;
use forcecast::nn::Checkpoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MUTATIONS: usize = 2000;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds for {target}");
    files.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn mutate(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..4) {
        match rng.random_range(0..3) {
            0 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                v[i] = rng.random();
            }
            1 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                v.truncate(i);
            }
            _ => {
                let i = rng.random_range(0..=v.len());
                v.insert(i, rng.random());
            }
        }
    }
    v
}

fn replay(target: &str, check: impl Fn(&[u8])) -> usize {
    let seeds = seeds(target);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for s in &seeds {
        check(s);
    }
    for k in 0..MUTATIONS {
        check(&mutate(&seeds[k % seeds.len()], &mut rng));
    }
    seeds.len()
}

#[test]
fn ppm_seeds() {
    replay("ppm", |data| {
        if let Ok(img) = decode_ppm(data) {
            assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }
    });
    assert!(seeds("ppm").iter().all(|s| decode_ppm(s).is_ok()));
}

#[test]
fn pgm16_seeds() {
    replay("pgm16", |data| {
        if let Ok(img) = decode_pgm16(data) {
            assert_eq!(decode_pgm16(&encode_pgm16(&img)).unwrap(), img);
        }
    });
    assert!(seeds("pgm16").iter().all(|s| decode_pgm16(s).is_ok()));
}

#[test]
fn manifest_seeds() {
    replay("manifest", |data| {
        if let Ok(text) = std::str::from_utf8(data) {
            if let Ok(streams) = parse_manifest(text) {
                assert_eq!(parse_manifest(&streams.to_jsonl()).unwrap(), streams);
            }
        }
    });
}

#[test]
fn config_seeds() {
    replay("config", |data| {
        if let Ok(text) = std::str::from_utf8(data) {
            if let Ok(cfg) = RunConfig::parse(text) {
                assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
                let _ = forcecast::config::net_config(&cfg);
                let _ = forcecast::config::train_config(&cfg, true);
            }
        }
    });
    assert!(seeds("config").iter().all(|s| RunConfig::parse(std::str::from_utf8(s).unwrap()).is_ok()));
}

#[test]
fn checkpoint_seeds() {
    replay("checkpoint", |data| {
        if let Ok(ck) = Checkpoint::decode(data) {
            let bytes = ck.encode().unwrap();
            assert_eq!(Checkpoint::decode(&bytes).unwrap().encode().unwrap(), bytes);
        }
    });
    assert!(seeds("checkpoint").iter().all(|s| Checkpoint::decode(s).is_ok()));
}
