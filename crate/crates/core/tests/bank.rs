mod common;

use std::fs;
use std::path::Path;

use common::*;
use proptest::prelude::*;
use streambank::bank::{
    BankMeta, MemoryBank, BASIS_FILE, COORDS_FILE, FORMAT_VERSION, META_FILE, SVALS_FILE,
};
use streambank::linalg::{Matrix, Precision};
use streambank::pipeline::{train_matrix, TrainConfig};
use streambank::rate::SampleRate;
use streambank::reducer::FinalBasis;
use streambank::Error;

fn random_bank(m: usize, k: usize, size: usize, seed: u64) -> MemoryBank {
    let mut r = rng(seed);
    let u = orthonormal(m, k, &mut r);
    let s: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
    let coords = gaussian(k, size, &mut r);
    let meta = BankMeta {
        format_version: FORMAT_VERSION,
        k,
        k_effective: k,
        m,
        precision: Precision::Double,
        n_b: 16,
        rate: 0.1,
        buffer_policy: "all".into(),
        vectors_seen: size * 10,
    };
    MemoryBank::new(FinalBasis::new(u, s).unwrap(), coords, meta).unwrap()
}

/// Projects with explicit loops and scans every entry.
fn brute_force(bank: &MemoryBank, queries: &Matrix) -> Vec<(f64, usize)> {
    let u = &bank.basis().u;
    queries
        .columns()
        .map(|y| {
            let p: Vec<f64> = (0..u.cols())
                .map(|c| (0..u.rows()).map(|i| u.get(i, c) * y[i]).sum())
                .collect();
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, e) in bank.coords().columns().enumerate() {
                let d = p
                    .iter()
                    .zip(e)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best
        })
        .collect()
}

fn trained(precision: Precision) -> MemoryBank {
    let mut r = rng(60);
    let x = gaussian(12, 96, &mut r).with_precision(precision);
    let cfg = TrainConfig::new(4, 32, SampleRate::new(1, 8).unwrap());
    train_matrix(&x, &cfg).unwrap().bank
}

fn files(dir: &Path) -> Vec<Vec<u8>> {
    [BASIS_FILE, SVALS_FILE, COORDS_FILE, META_FILE]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn save_load_save_is_byte_identical() {
    for precision in [Precision::Single, Precision::Double] {
        let bank = trained(precision);
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        bank.save(&a).unwrap();
        let loaded = MemoryBank::load(&a).unwrap();
        assert_eq!(loaded, bank);
        loaded.save(&b).unwrap();
        assert_eq!(files(&a), files(&b));
        assert!(fs::read_dir(&a).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .ends_with(".partial")));
    }
}

#[test]
fn saved_arrays_use_natural_orientation() {
    let bank = trained(Precision::Double);
    let tmp = tempfile::tempdir().unwrap();
    bank.save(tmp.path()).unwrap();
    let basis = streambank::array_io::read_npy_header(&tmp.path().join(BASIS_FILE)).unwrap();
    let coords = streambank::array_io::read_npy_header(&tmp.path().join(COORDS_FILE)).unwrap();
    assert_eq!(basis.shape, vec![12, bank.basis().k_effective()]);
    assert_eq!(coords.shape, vec![bank.basis().k_effective(), bank.len()]);
}

#[test]
fn damaged_bank_directories_are_rejected() {
    let bank = trained(Precision::Double);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let reset = || {
        bank.save(dir).unwrap();
    };

    reset();
    let coords = dir.join(COORDS_FILE);
    let bytes = fs::read(&coords).unwrap();
    fs::write(&coords, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Data(_))));

    reset();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).unwrap();
    let k_eff = bank.meta().k_effective;
    fs::write(
        &meta_path,
        text.replace(
            &format!("\"k_effective\": {k_eff}"),
            &format!("\"k_effective\": {}", k_eff - 1),
        ),
    )
    .unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Consistency(_))));

    reset();
    fs::write(
        &meta_path,
        text.replace("\"format_version\": 1", "\"format_version\": 2"),
    )
    .unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Version { .. })));

    reset();
    fs::write(
        &meta_path,
        text.replace("\"precision\": \"double\"", "\"precision\": \"single\""),
    )
    .unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Consistency(_))));

    reset();
    fs::write(&meta_path, text.replace('{', "{\"extra\": 1,")).unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Format(_))));

    reset();
    fs::remove_file(dir.join(SVALS_FILE)).unwrap();
    assert!(matches!(MemoryBank::load(dir), Err(Error::Io { .. })));
}

#[test]
fn scoring_matches_brute_force() {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let bank = random_bank(10, 4, 30, 1000 + seed);
        let mut r = rng(2000 + seed);
        let queries = gaussian(10, 100, &mut r);
        let report = bank.score(&queries).unwrap();
        for ((got, idx), (want, widx)) in report
            .per_vector_scores
            .iter()
            .zip(&report.nearest_index)
            .zip(brute_force(&bank, &queries))
        {
            worst = worst.max((got - want).abs());
            assert_eq!(*idx, widx);
        }
    }
    assert!(worst <= 1e-6, "max diff {worst}");
}

#[test]
fn bank_entries_score_zero() {
    let bank = random_bank(8, 3, 12, 61);
    let embedded = bank.basis().u.matmul(bank.coords()).unwrap();
    let report = bank.score(&embedded).unwrap();
    assert!(report.per_vector_scores.iter().all(|&s| s <= 1e-12));
    assert_eq!(report.nearest_index, (0..12).collect::<Vec<_>>());
}

#[test]
fn wrong_feature_count_is_rejected() {
    let bank = random_bank(8, 3, 12, 62);
    let q = Matrix::zeros(7, 2, Precision::Double);
    assert!(matches!(bank.score(&q), Err(Error::Consistency(_))));
}

#[test]
fn empty_query_set_has_no_image_score() {
    let bank = random_bank(8, 3, 12, 63);
    let report = bank.score(&Matrix::zeros(8, 0, Precision::Double)).unwrap();
    assert!(report.per_vector_scores.is_empty());
    assert_eq!(report.image_score, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn more_entries_never_raise_scores(seed in any::<u64>(), extra in 1usize..20) {
        let big = random_bank(9, 3, 10 + extra, seed);
        let small_coords = big.coords().column_range(0, 10).unwrap();
        let small = MemoryBank::new(big.basis().clone(), small_coords, big.meta().clone()).unwrap();
        let mut r = rng(seed ^ 1);
        let q = gaussian(9, 25, &mut r);
        let a = small.score(&q).unwrap();
        let b = big.score(&q).unwrap();
        for (s, l) in a.per_vector_scores.iter().zip(&b.per_vector_scores) {
            prop_assert!(l <= s);
        }
    }

    #[test]
    fn off_basis_components_are_ignored(seed in any::<u64>()) {
        let bank = random_bank(9, 3, 15, seed);
        let mut r = rng(seed ^ 2);
        let q = gaussian(9, 20, &mut r);
        let u = &bank.basis().u;
        let in_span = u.matmul(&u.tr_matmul(&q).unwrap()).unwrap();
        let a = bank.score(&q).unwrap();
        let b = bank.score(&in_span).unwrap();
        for (x, y) in a.per_vector_scores.iter().zip(&b.per_vector_scores) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x));
        }
        prop_assert_eq!(a.nearest_index, b.nearest_index);
    }

    #[test]
    fn scores_scale_with_the_data(seed in any::<u64>(), c in 0.01f64..100.0) {
        let bank = random_bank(7, 2, 11, seed);
        let scaled = MemoryBank::new(bank.basis().clone(), bank.coords().scaled(c), bank.meta().clone()).unwrap();
        let mut r = rng(seed ^ 3);
        let q = gaussian(7, 20, &mut r);
        let a = bank.score(&q).unwrap();
        let b = scaled.score(&q.scaled(c)).unwrap();
        for (x, y) in a.per_vector_scores.iter().zip(&b.per_vector_scores) {
            prop_assert!((c * x - y).abs() <= 1e-10 * (1.0 + y));
        }
        prop_assert_eq!(a.image_score.map(|s| s * c).is_some(), b.image_score.is_some());
    }
}
