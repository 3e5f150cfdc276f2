use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use slimdex::corpus::{EmbeddingMatrix, PassageRecord};
use slimdex::filter::{self, FeatureHasher, LogRegParams};
use slimdex::index::{self, IndexConfig};
use slimdex_ffi::*;

fn last_error() -> String {
    let p = slimdex_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixture() -> (Vec<f32>, Vec<String>) {
    let (n, d) = (40usize, 8usize);
    let data: Vec<f32> = (0..n * d).map(|i| (((i * 37 + 11) % 101) as f32 / 50.0) - 1.0).collect();
    let ids = (0..n).map(|i| format!("p{i:03}")).collect();
    (data, ids)
}

unsafe fn build(data: &[f32], ids: &[String], d: usize, config: SlimdexBuildConfig) -> (SlimdexStatus, *mut SlimdexIndex) {
    let c_ids: Vec<CString> = ids.iter().map(|s| CString::new(s.as_str()).unwrap()).collect();
    let ptrs: Vec<*const c_char> = c_ids.iter().map(|c| c.as_ptr()).collect();
    let mut h = ptr::null_mut();
    let st = slimdex_index_build(data.as_ptr(), ids.len(), d, ptrs.as_ptr(), &config, &mut h);
    (st, h)
}

unsafe fn search(h: *const SlimdexIndex, q: &[f32], k: usize) -> Vec<(String, f64)> {
    let mut pos = vec![0usize; k];
    let mut scores = vec![0f64; k];
    let mut count = 0;
    let st = slimdex_index_search(h, q.as_ptr(), q.len(), k, pos.as_mut_ptr(), scores.as_mut_ptr(), &mut count);
    assert_eq!(st, SlimdexStatus::Ok, "{}", last_error());
    (0..count)
        .map(|i| {
            let mut buf = [0 as c_char; 32];
            let mut len = 0;
            let st = slimdex_index_id(h, pos[i], buf.as_mut_ptr(), buf.len(), &mut len);
            assert_eq!(st, SlimdexStatus::Ok);
            let id = CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned();
            assert_eq!(id.len(), len);
            (id, scores[i])
        })
        .collect()
}

fn pq_config() -> SlimdexBuildConfig {
    SlimdexBuildConfig {
        mode: SlimdexMode::Pq,
        d_r: 0,
        n_v: 4,
        n_b: 4,
        normalize: false,
        seed: 7,
    }
}

#[test]
fn build_and_search_match_the_library() {
    let (data, ids) = fixture();
    let (st, h) = unsafe { build(&data, &ids, 8, pq_config()) };
    assert_eq!(st, SlimdexStatus::Ok);
    assert_eq!(unsafe { slimdex_index_len(h) }, 40);
    assert_eq!(unsafe { slimdex_index_dim(h) }, 8);

    let x = EmbeddingMatrix::new(8, data.clone(), ids.clone()).unwrap();
    let direct = index::build_index(&x, &IndexConfig::pq(4, 4).with_seed(7)).unwrap();
    for qi in [0usize, 5, 17] {
        let q = x.row(qi);
        let via_ffi = unsafe { search(h, q, 5) };
        let expected: Vec<(String, f64)> = direct.search(q, 5).unwrap().into_iter().map(|h| (h.id, h.score)).collect();
        assert_eq!(via_ffi, expected);
    }
    let mut bytes = 0;
    assert_eq!(unsafe { slimdex_index_size_bytes(h, &mut bytes) }, SlimdexStatus::Ok);
    assert_eq!(bytes, direct.size_report().total_bytes);
    unsafe { slimdex_index_free(h) };
}

#[test]
fn save_and_load_round_trip() {
    let (data, ids) = fixture();
    let cfg = SlimdexBuildConfig {
        mode: SlimdexMode::Flat16,
        d_r: 4,
        n_v: 0,
        n_b: 0,
        normalize: true,
        seed: 1,
    };
    let (st, h) = unsafe { build(&data, &ids, 8, cfg) };
    assert_eq!(st, SlimdexStatus::Ok, "{}", last_error());
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.pqix").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { slimdex_index_save(h, path.as_ptr()) }, SlimdexStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { slimdex_index_load(path.as_ptr(), &mut loaded) }, SlimdexStatus::Ok);
    let q = &data[8..16];
    assert_eq!(unsafe { search(h, q, 7) }, unsafe { search(loaded, q, 7) });
    unsafe {
        slimdex_index_free(h);
        slimdex_index_free(loaded);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let (data, ids) = fixture();
    let bad = SlimdexBuildConfig { n_v: 3, ..pq_config() };
    let (st, h) = unsafe { build(&data, &ids, 8, bad) };
    assert_eq!(st, SlimdexStatus::InvalidParameter);
    assert!(h.is_null());
    assert!(last_error().contains("does not divide"), "{}", last_error());

    let missing = CString::new("/nonexistent/dir/x.pqix").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { slimdex_index_load(missing.as_ptr(), &mut h) }, SlimdexStatus::Io);
    assert!(last_error().contains("/nonexistent/dir/x.pqix"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk");
    std::fs::write(&junk, b"PQIX garbage").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { slimdex_index_load(junk.as_ptr(), &mut h) }, SlimdexStatus::Format);

    assert_eq!(unsafe { slimdex_index_load(ptr::null(), &mut h) }, SlimdexStatus::NullPointer);
    let mut bytes = 0;
    assert_eq!(unsafe { slimdex_index_size_bytes(ptr::null(), &mut bytes) }, SlimdexStatus::NullPointer);
    assert_eq!(unsafe { slimdex_index_len(ptr::null()) }, 0);
    unsafe { slimdex_index_free(ptr::null_mut()) };
}

#[test]
fn search_rejects_wrong_dimension() {
    let (data, ids) = fixture();
    let (_, h) = unsafe { build(&data, &ids, 8, pq_config()) };
    let (mut pos, mut scores, mut count) = ([0usize; 3], [0f64; 3], 0usize);
    let q = [0.5f32; 5];
    let st = unsafe { slimdex_index_search(h, q.as_ptr(), 5, 3, pos.as_mut_ptr(), scores.as_mut_ptr(), &mut count) };
    assert_eq!(st, SlimdexStatus::DimensionMismatch);
    unsafe { slimdex_index_free(h) };
}

#[test]
fn id_buffer_too_small() {
    let (data, ids) = fixture();
    let (_, h) = unsafe { build(&data, &ids, 8, pq_config()) };
    let mut buf = [0 as c_char; 4];
    let mut len = 0;
    let st = unsafe { slimdex_index_id(h, 3, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, SlimdexStatus::BufferTooSmall);
    assert_eq!(len, 4);
    let st = unsafe { slimdex_index_id(h, 40, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, SlimdexStatus::InvalidParameter);
    unsafe { slimdex_index_free(h) };
}

#[test]
fn layout_size_matches_full_corpus_arithmetic() {
    let mut bytes = 0;
    let st = unsafe { slimdex_layout_size_bytes(SlimdexMode::Pq, 26_000_000, 768, 64, 8, &mut bytes) };
    assert_eq!(st, SlimdexStatus::Ok);
    assert_eq!(bytes, index::IndexLayout::pq(26_000_000, 768, 64, 8).report(0).total_bytes);
    let st = unsafe { slimdex_layout_size_bytes(SlimdexMode::Pq, 10, 768, 7, 8, &mut bytes) };
    assert_eq!(st, SlimdexStatus::InvalidParameter);
}

#[test]
fn filter_scores_match_the_library() {
    let passages: Vec<PassageRecord> = (0..12)
        .map(|i| PassageRecord {
            id: format!("p{i}"),
            article_id: format!("a{i}"),
            title: if i % 2 == 0 { format!("Battle of River {i}") } else { format!("List of stubs {i}") },
            text: "x".into(),
            categories: vec![if i % 2 == 0 { "History".into() } else { "Lists".into() }],
        })
        .collect();
    let articles = filter::articles_from_passages(&passages);
    let positives = vec!["a0".to_string(), "a2".to_string(), "a4".to_string()];
    let hasher = FeatureHasher::new(1 << 12, 3).unwrap();
    let model = filter::self_train(&articles, &positives, 2, 3, 3, hasher, &LogRegParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    filter::save_filter(&model, &path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { slimdex_filter_load(c_path.as_ptr(), &mut h) }, SlimdexStatus::Ok);
    for a in &articles {
        let title = CString::new(a.title.as_str()).unwrap();
        let cats: Vec<CString> = a.categories.iter().map(|c| CString::new(c.as_str()).unwrap()).collect();
        let ptrs: Vec<*const c_char> = cats.iter().map(|c| c.as_ptr()).collect();
        let mut score = 0.0;
        let st = unsafe { slimdex_filter_score(h, title.as_ptr(), ptrs.as_ptr(), ptrs.len(), &mut score) };
        assert_eq!(st, SlimdexStatus::Ok);
        assert_eq!(score, model.score(a));
    }
    unsafe { slimdex_filter_free(h) };
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "slimdex.h"

int main(void) {
    float data[4 * 2] = {1, 0, 0, 1, -1, 0, 0.6f, 0.8f};
    const char *ids[4] = {"east", "north", "west", "northeast"};
    SlimdexBuildConfig cfg = {SLIMDEX_MODE_FLAT32, 0, 0, 0, false, 0};
    SlimdexIndex *ix = NULL;
    if (slimdex_index_build(data, 4, 2, ids, &cfg, &ix) != SLIMDEX_STATUS_OK) return 10;
    float q[2] = {0.7f, 0.7f};
    size_t pos[2];
    double scores[2];
    size_t count = 0;
    if (slimdex_index_search(ix, q, 2, 2, pos, scores, &count) != SLIMDEX_STATUS_OK) return 11;
    for (size_t i = 0; i < count; i++) {
        char buf[16];
        size_t len;
        if (slimdex_index_id(ix, pos[i], buf, sizeof buf, &len) != SLIMDEX_STATUS_OK) return 12;
        printf("%s %.4f\n", buf, scores[i]);
    }
    SlimdexIndex *missing = NULL;
    SlimdexStatus st = slimdex_index_load("/nonexistent.pqix", &missing);
    printf("load=%d %s\n", (int)st, slimdex_last_error_message() ? "msg" : "none");
    slimdex_index_free(ix);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let lib = target_dir().join("libslimdex_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(
        String::from_utf8(run.stdout).unwrap(),
        "northeast 0.9800\neast 0.7000\nload=3 msg\n"
    );
}
