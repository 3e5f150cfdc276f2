mod common;

use proptest::prelude::*;
use rand::Rng;

use slimdex::corpus::EmbeddingMatrix;
use slimdex::error::Error;
use slimdex::index::*;

use common::{brute_force, random_matrix, rows_of};

/// Value of a finite half-precision bit pattern, decoded by hand.
fn half_value(bits: u16) -> f64 {
    let sign = if bits & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((bits >> 10) & 0x1f) as i32;
    let man = (bits & 0x3ff) as f64;
    let mag = if exp == 0 { man * 2f64.powi(-24) } else { (1.0 + man / 1024.0) * 2f64.powi(exp - 15) };
    sign * mag
}

/// Nearest finite half to `v` (clamped to ±65504), ties to even mantissa.
fn half_oracle(positives: &[(f64, u16)], v: f32) -> u16 {
    let v = v as f64;
    let sign = if v.is_sign_negative() { 0x8000 } else { 0 };
    let a = v.abs().min(65504.0);
    let i = positives.partition_point(|(x, _)| *x < a);
    let pick = if i == positives.len() {
        positives[i - 1].1
    } else if positives[i].0 == a || i == 0 {
        positives[i].1
    } else {
        let (lo, hi) = (positives[i - 1], positives[i]);
        let (dl, dh) = (a - lo.0, hi.0 - a);
        if dl < dh || (dl == dh && lo.1 % 2 == 0) { lo.1 } else { hi.1 }
    };
    pick | sign
}

fn positive_halves() -> Vec<(f64, u16)> {
    (0u16..0x7c00).map(|b| (half_value(b), b)).collect()
}

#[test]
fn f16_cast_matches_enumerated_oracle() {
    let table = positive_halves();
    let mut r = common::rng(16);
    let mut probes: Vec<f32> = vec![1.0, 0.1, 65520.0, -65520.0, 65504.0, 1e-8, 5.9604645e-8, 2.9802322e-8, 0.0, -0.0, 3.0e5];
    for _ in 0..20_000 {
        let e = r.random_range(-26i32..17);
        probes.push(r.random_range(-1.0f32..1.0) * 2f32.powi(e));
    }
    // exact midpoints between neighbouring halves
    for b in (0u16..0x7bff).step_by(97) {
        probes.push(((half_value(b) + half_value(b + 1)) / 2.0) as f32);
    }
    for v in probes {
        assert_eq!(f32_to_f16_bits(v), half_oracle(&table, v), "value {v:e}");
    }
    assert_eq!(f32_to_f16_bits(1.0), 0x3c00);
    assert_eq!(f16_bits_to_f32(f32_to_f16_bits(65520.0)), 65504.0);
    assert_eq!(f32_to_f16_bits(0.1), 0x2e66);
    assert_eq!(half_value(0x2e66), 0.0999755859375);
}

#[test]
fn flat16_payload_is_the_rounded_input() {
    let x = random_matrix(40, 6, 3);
    let ix = build_index(&x, &IndexConfig::flat16()).unwrap();
    let table = positive_halves();
    let bits = ix.f16_bits().unwrap();
    for (b, v) in bits.iter().zip(x.data()) {
        assert_eq!(*b, half_oracle(&table, *v));
    }
    let r = ix.size_report();
    assert_eq!(r.section("vectors") * 2, IndexLayout::flat(StorageMode::Flat32, 40, 6).report(0).section("vectors"));
}

#[test]
fn flat16_on_exact_values_equals_flat32() {
    let mut r = common::rng(8);
    let rows: Vec<Vec<f32>> = (0..50).map(|_| (0..4).map(|_| r.random_range(-64i32..64) as f32 / 16.0).collect()).collect();
    let x = EmbeddingMatrix::from_rows(&rows, (0..50).map(|i| format!("p{i:02}")).collect()).unwrap();
    let a = build_index(&x, &IndexConfig::flat32()).unwrap();
    let b = build_index(&x, &IndexConfig::flat16()).unwrap();
    for _ in 0..20 {
        let q: Vec<f32> = (0..4).map(|_| r.random_range(-8i32..8) as f32 / 4.0).collect();
        assert_eq!(a.search(&q, 10).unwrap(), b.search(&q, 10).unwrap());
    }
}

#[test]
fn unit_vectors() {
    let x = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec!["e1".into(), "e2".into()]).unwrap();
    let ix = build_index(&x, &IndexConfig::flat32()).unwrap();
    let hits = ix.search(&[1.0, 0.0], 1).unwrap();
    assert_eq!((hits[0].id.as_str(), hits[0].score), ("e1", 1.0));
    assert!(matches!(ix.search(&[1.0], 1), Err(Error::DimensionMismatch { expected: 2, actual: 1 })));
}

#[test]
fn ties_break_on_smaller_id() {
    let x = EmbeddingMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], vec!["c".into(), "a".into(), "b".into()]).unwrap();
    let ix = build_index(&x, &IndexConfig::flat32()).unwrap();
    let ids: Vec<String> = ix.search(&[2.0], 3).unwrap().into_iter().map(|h| h.id).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

fn configs() -> Vec<IndexConfig> {
    vec![
        IndexConfig::flat32(),
        IndexConfig::flat16(),
        IndexConfig::pq(4, 8),
        IndexConfig::pq(8, 1),
        IndexConfig::pq(4, 4).with_d_r(8),
        IndexConfig::flat32().with_d_r(6).with_normalize(true),
        IndexConfig::pq(2, 16).with_d_r(4).with_normalize(true),
    ]
}

#[test]
fn serialization_preserves_search_and_size() {
    let x = random_matrix(150, 16, 10);
    let dir = tempfile::tempdir().unwrap();
    for (ci, cfg) in configs().into_iter().enumerate() {
        let ix = build_index(&x, &cfg.with_seed(ci as u64)).unwrap();
        let path = dir.path().join(format!("{ci}.pqix"));
        save_index(&ix, &path).unwrap();
        let file_len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(file_len, ix.size_report().total_bytes, "config {ci}");
        let back = load_index(&path).unwrap();
        assert_eq!(back.size_report(), ix.size_report());
        assert_eq!(back.params(), ix.params());
        let mut r = common::rng(ci as u64);
        for _ in 0..100 {
            let q = common::random_vector(16, &mut r);
            assert_eq!(back.search(&q, 10).unwrap(), ix.search(&q, 10).unwrap());
        }
        let report = ix.size_report();
        assert_eq!(report.total_bytes, report.breakdown.values().sum::<u64>());
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let x = random_matrix(20, 4, 1);
    let bytes = build_index(&x, &IndexConfig::pq(2, 4)).unwrap().to_bytes();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(IndexArtifact::from_bytes(&bad_magic), Err(Error::Format { offset: 0, .. })));
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    assert!(matches!(IndexArtifact::from_bytes(&bad_version), Err(Error::Format { offset: 4, .. })));
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(IndexArtifact::from_bytes(&flipped).is_err());
    assert!(IndexArtifact::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(IndexArtifact::from_bytes(&bytes[..bytes.len() - 8]).is_err());
}

#[test]
fn config_errors() {
    let x = random_matrix(20, 16, 1);
    let err = build_index(&x, &IndexConfig::pq(3, 8)).unwrap_err();
    assert!(err.to_string().contains("does not divide"));
    assert!(build_index(&x, &IndexConfig::flat32().with_d_r(17)).is_err());
    let mut c = IndexConfig::flat32();
    c.n_v = Some(4);
    assert!(build_index(&x, &c).is_err());
    assert!(build_index(&x, &IndexConfig::pq(4, 3)).is_err());
}

#[test]
fn full_corpus_size_arithmetic() {
    let n = 26_000_000;
    let flat = IndexLayout::flat(StorageMode::Flat32, n, 768).report(0);
    assert_eq!(flat.section("vectors"), 79_872_000_000);
    assert_eq!(IndexLayout::pq(n, 768, 64, 8).report(0).section("codes"), 1_664_000_000);
    assert_eq!(IndexLayout::pq(n, 768, 16, 8).report(0).section("codes"), 416_000_000);
    let half = IndexLayout::flat(StorageMode::Flat16, n, 768).report(0);
    assert_eq!(flat.section("vectors"), 2 * half.section("vectors"));
    let pq2 = IndexLayout::pq(n, 768, 384, 8);
    assert_eq!(pq2.bits_per_dim(), 4.0);
    assert_eq!(flat.section("vectors") as f64 / pq2.report(0).section("codes") as f64, 8.0);
}

#[test]
fn monotone_degradation_on_synthetic_corpus() {
    use slimdex::corpus::{generate_synthetic, SyntheticSpec};
    use slimdex::eval::recall_vs_exact;
    let c = generate_synthetic(&SyntheticSpec::new(1500, 32, 15, 0.1, 3)).unwrap();
    let oracle: Vec<_> = c.queries.rows().map(|q| exact_oracle_search(&c.passages, q, 10)).collect();
    let recall = |cfg: IndexConfig| {
        let ix = build_index(&c.passages, &cfg.with_seed(2)).unwrap();
        let got: Vec<_> = c.queries.rows().map(|q| ix.search(q, 10).unwrap()).collect();
        recall_vs_exact(&got, &oracle, 10)
    };
    let chain = [
        recall(IndexConfig::flat32()),
        recall(IndexConfig::flat16()),
        recall(IndexConfig::pq(32, 8)),
        recall(IndexConfig::pq(8, 8)),
        recall(IndexConfig::pq(4, 8)),
    ];
    assert_eq!(chain[0], 1.0);
    for w in chain.windows(2) {
        assert!(w[1] <= w[0] + 0.01, "{chain:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat32_equals_oracle(seed in 0u64..1_000_000, n in 1usize..200, d in 1usize..32, k in 1usize..30) {
        let x = random_matrix(n, d, seed);
        let ix = build_index(&x, &IndexConfig::flat32()).unwrap();
        let mut r = common::rng(seed ^ 1);
        let q = common::random_vector(d, &mut r);
        let got: Vec<(String, f64)> = ix.search(&q, k).unwrap().into_iter().map(|h| (h.id, h.score)).collect();
        prop_assert_eq!(got, brute_force(x.ids(), &rows_of(&x), &q, k));
        let oracle: Vec<String> = exact_oracle_search(&x, &q, k).into_iter().map(|h| h.id).collect();
        let ids: Vec<String> = ix.search(&q, k).unwrap().into_iter().map(|h| h.id).collect();
        prop_assert_eq!(ids, oracle);
    }
}
