use std::fs;

use qksd::bases::Family;
use qksd::bench::{self, ModelSet};
use qksd::exact::{cache_key, decode_cache, diagonalise, encode_cache};
use qksd::lattice::LatticeKind;
use qksd::models::{ModelConfig, ModelKind};

fn heisenberg6() -> ModelConfig {
    bench::standard_config(ModelKind::Heisenberg, LatticeKind::Chain, 6, None)
}

#[test]
fn cache_directory_reproduces_spectrum() {
    let dir = std::env::temp_dir().join(format!("qksd-cache-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    let fresh = bench::prepare_model(&heisenberg6(), None).unwrap();
    let first = bench::prepare_model(&heisenberg6(), Some(&dir)).unwrap();
    let files: Vec<_> = fs::read_dir(&dir).unwrap().collect();
    assert_eq!(files.len(), 1);
    let second = bench::prepare_model(&heisenberg6(), Some(&dir)).unwrap();
    assert_eq!(fresh.sd, first.sd);
    assert_eq!(first.sd, second.sd);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn corrupt_cache_is_recomputed() {
    let dir = std::env::temp_dir().join(format!("qksd-corrupt-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    let good = bench::prepare_model(&heisenberg6(), Some(&dir)).unwrap();
    for entry in fs::read_dir(&dir).unwrap() {
        fs::write(entry.unwrap().path(), b"QKSDSPEC garbage").unwrap();
    }
    let again = bench::prepare_model(&heisenberg6(), Some(&dir)).unwrap();
    assert_eq!(good.sd, again.sd);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn encoded_spectrum_round_trips() {
    let model = heisenberg6().build().unwrap();
    let sd = diagonalise(&model.hamiltonian, &model.reference).unwrap();
    let key = cache_key("heisenberg6");
    let bytes = encode_cache(key, &sd);
    assert_eq!(decode_cache(&bytes).unwrap(), (key, sd));
    assert!(decode_cache(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn distribution_is_deterministic_in_seed() {
    let sets = vec![ModelSet { model: ModelKind::Hubbard, lattice: LatticeKind::RandomGraph, size: 3, d_min: 2, d_max: 4, graphs: 2 }];
    let families = [Family::P, Family::GP, Family::F];
    let a = bench::distribution(&sets, &families, 0.1, 7, None).unwrap();
    let b = bench::distribution(&sets, &families, 0.1, 7, None).unwrap();
    assert_eq!(a, b);
    for r in &a.0 {
        assert!(r.identities_ok, "{r:?}");
        assert!(r.gamma >= 1.0 - 1e-9 || r.family == Family::GP, "{r:?}");
    }
}

#[test]
fn summaries_cover_each_family() {
    let pm = bench::prepare_model(&heisenberg6(), None).unwrap();
    let adm = bench::admit(&pm, 3).unwrap();
    assert!(adm.admitted);
    let setup = bench::configure_family(Family::GP, &pm, 3, None).unwrap();
    let rec = bench::run_record("h6", &setup, &pm, 2.0 * adm.epsilon_k_p, adm.epsilon_k_p, 0.1);
    assert_eq!(rec.status, "ok");
    let s = bench::summarise(&[rec.clone(), rec], &[Family::GP, Family::F]);
    assert_eq!(s[0].instances, 2);
    assert_eq!(s[1].instances, 0);
}

#[test]
fn monte_carlo_entries_track_exact_values() {
    let pm = bench::prepare_model(&heisenberg6(), None).unwrap();
    let rows = bench::mc_rows(&pm, 1.0, 4000, 2, 11).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r.deviation < 5.0, "{r:?}");
        assert!(r.variance_ratio <= 1.0 + 1e-9, "{r:?}");
    }
    assert_eq!(rows, bench::mc_rows(&pm, 1.0, 4000, 2, 11).unwrap());
}

#[test]
fn model_json_matches_builder() {
    let text = r#"{"model": "hubbard", "lattice": {"kind": "ladder", "size": 4}, "J": 1.0, "U": 1.0}"#;
    let cfg = ModelConfig::from_json(text).unwrap();
    let model = cfg.build().unwrap();
    let standard = bench::standard_config(ModelKind::Hubbard, LatticeKind::Ladder, 4, None).build().unwrap();
    assert_eq!(model.hamiltonian, standard.hamiltonian);
    assert_eq!(model.hamiltonian.n_qubits(), 8);
}

#[test]
fn fuzz_corpus_seeds_are_accepted() {
    let corpus = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for entry in fs::read_dir(corpus.join("model_config")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        ModelConfig::from_json(&text).unwrap().lattice().unwrap();
    }
    for entry in fs::read_dir(corpus.join("bench_config")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        qksd::bench_config::BenchConfig::from_json(&text).unwrap();
    }
    for entry in fs::read_dir(corpus.join("spectral_cache")).unwrap() {
        let path = entry.unwrap().path();
        let decoded = decode_cache(&fs::read(&path).unwrap());
        assert_eq!(decoded.is_ok(), !path.ends_with("truncated.spec"), "{path:?}");
    }
}
