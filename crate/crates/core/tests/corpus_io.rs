mod common;

use slimdex::corpus::*;
use slimdex::error::Error;

use common::{brute_force, rows_of};

#[test]
fn synthetic_ground_truth_matches_exhaustive_search() {
    let c = generate_synthetic(&SyntheticSpec::new(1000, 16, 10, 0.1, 1)).unwrap();
    assert_eq!(c.passages.len(), 1000);
    assert_eq!(c.passages.dim(), 16);
    let rows = rows_of(&c.passages);
    for (i, qid) in c.queries.ids().iter().enumerate() {
        let best = brute_force(c.passages.ids(), &rows, c.queries.row(i), 1);
        assert_eq!(c.ground_truth[qid], best[0].0, "query {qid}");
    }
}

#[test]
fn zero_noise_queries_find_their_source() {
    let c = generate_synthetic(&SyntheticSpec::new(4, 2, 4, 0.0, 7)).unwrap();
    for (q, gt) in &c.ground_truth {
        assert_eq!(gt, &c.gold[q]);
    }
}

#[test]
fn synthetic_is_deterministic() {
    let spec = SyntheticSpec::new(300, 8, 6, 0.2, 42);
    let a = generate_synthetic(&spec).unwrap();
    let b = generate_synthetic(&spec).unwrap();
    assert_eq!(a.passages.to_bytes(), b.passages.to_bytes());
    assert_eq!(a.queries.to_bytes(), b.queries.to_bytes());
    assert_eq!(a.ground_truth, b.ground_truth);
    assert_eq!(to_jsonl(&a.passage_records), to_jsonl(&b.passage_records));
    let other = generate_synthetic(&SyntheticSpec::new(300, 8, 6, 0.2, 43)).unwrap();
    assert_ne!(a.passages.to_bytes(), other.passages.to_bytes());
}

#[test]
fn too_many_clusters() {
    assert!(matches!(
        generate_synthetic(&SyntheticSpec::new(3, 2, 4, 0.0, 0)),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn embedding_file_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.emb");
    let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec!["a".into(), "b".into()]).unwrap();
    save_embeddings(&m, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    // header (28) + ids (4+1, 4+1) + 6 floats
    assert_eq!(bytes.len(), 28 + 10 + 24);
    assert_eq!(&bytes[..4], b"EMB1");
    let back = load_embeddings(&path).unwrap();
    assert_eq!(back, m);
    let again = dir.path().join("y.emb");
    save_embeddings(&back, &again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), bytes);
}

#[test]
fn truncated_embedding_file_reports_lengths() {
    let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], vec!["a".into(), "b".into()]).unwrap();
    let bytes = m.to_bytes();
    let cut = &bytes[..bytes.len() - 6];
    match EmbeddingMatrix::from_bytes(cut) {
        Err(Error::Format { offset, message }) => {
            assert_eq!(offset, 38);
            assert!(message.contains("24") && message.contains("18"), "{message}");
        }
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn passage_loader_contracts() {
    let one = r#"{"id":"p1","article_id":"a1","title":"T","text":"w","categories":[]}"#;
    let recs = parse_passages(one).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].id, "p1");
    assert!(parse_passages("").unwrap().is_empty());
    match parse_passages(&format!("{one}\n{one}\n")) {
        Err(Error::Line { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    match parse_passages(r#"{"id":"p1","title":"T","text":"w","categories":[]}"#) {
        Err(Error::Line { line, message }) => {
            assert_eq!(line, 1);
            assert!(message.contains("article_id"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn query_loader_rejects_empty_answers() {
    let ok = r#"{"id":"q1","question":"?","answers":["x"]}"#;
    assert_eq!(parse_queries(ok).unwrap()[0].answers, vec!["x"]);
    let bad = r#"{"id":"q2","question":"?","answers":[]}"#;
    assert!(matches!(parse_queries(&format!("{ok}\n{bad}")), Err(Error::Line { line: 2, .. })));
}
