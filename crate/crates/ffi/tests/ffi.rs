use std::ffi::{CStr, CString};
use std::ptr;

use knowtype::corpus::{write_jsonl, Corpus, Document, KnowledgeType, LabelSet};
use knowtype::model::{fit, ClassifierSpec, OvrSvmSpec};
use knowtype::persist::save_classifier;
use knowtype::text::Stopwords;
use knowtype_ffi::*;

fn last_error() -> String {
    let p = kt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn docs() -> Vec<Document> {
    let pairs = [
        (KnowledgeType::Directive, "must call close before exit"),
        (KnowledgeType::Example, "example snippet shows usage"),
        (KnowledgeType::Directive, "must never pass null"),
        (KnowledgeType::Example, "example code listing below"),
    ];
    (0..24)
        .map(|i| {
            let (t, text) = pairs[i % pairs.len()];
            let labels: LabelSet = [t].into_iter().collect();
            Document::new(format!("d{i}"), "Elem", format!("{text} item{}", i % 3), labels)
        })
        .collect()
}

fn model_file(dir: &std::path::Path) -> CString {
    let corpus = Corpus::new("train", docs()).unwrap();
    let spec = ClassifierSpec::OvrSvm(OvrSvmSpec::default());
    let (clf, _) = fit(&spec, "OvRSVM", &corpus, &Stopwords::english(), 3).unwrap();
    let path = dir.join("model.bin");
    save_classifier(&path, &clf).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn model_round_trip_through_the_c_interface() {
    let dir = tempfile::tempdir().unwrap();
    let path = model_file(dir.path());
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { kt_model_load(path.as_ptr(), &mut model) }, KtStatus::Ok);
    assert!(!model.is_null());
    assert!(kt_last_error().is_null());

    let label = unsafe { kt_model_label(model) };
    assert_eq!(unsafe { CStr::from_ptr(label) }.to_str().unwrap(), "OvRSVM");
    unsafe { kt_string_free(label) };

    let text = CString::new("you must call close").unwrap();
    let mut prob = [f64::NAN; KT_NUM_TYPES];
    let mut rank = [f64::NAN; KT_NUM_TYPES];
    let st = unsafe { kt_model_predict(model, text.as_ptr(), prob.as_mut_ptr(), rank.as_mut_ptr()) };
    assert_eq!(st, KtStatus::Ok);
    assert!(prob.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(rank.iter().all(|v| v.is_finite()));
    let d = KnowledgeType::Directive.index();
    let e = KnowledgeType::Example.index();
    assert!(prob[d] > prob[e]);

    // ranking buffer is optional
    let mut again = [0.0; KT_NUM_TYPES];
    let st = unsafe { kt_model_predict(model, text.as_ptr(), again.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, KtStatus::Ok);
    assert_eq!(again, prob);

    unsafe { kt_model_free(model) };
}

#[test]
fn null_and_bad_arguments_report_status_codes() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { kt_model_load(ptr::null(), &mut model) }, KtStatus::NullPointer);
    assert!(model.is_null());
    assert!(last_error().contains("path"));

    let missing = CString::new("/nonexistent/dir/model.bin").unwrap();
    assert_eq!(unsafe { kt_model_load(missing.as_ptr(), ptr::null_mut()) }, KtStatus::NullPointer);
    assert_eq!(unsafe { kt_model_load(missing.as_ptr(), &mut model) }, KtStatus::Io);
    assert!(model.is_null());

    let bad = [0x66u8, 0xff, 0x00];
    let st = unsafe { kt_model_load(bad.as_ptr().cast(), &mut model) };
    assert_eq!(st, KtStatus::InvalidUtf8);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a model").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { kt_model_load(junk.as_ptr(), &mut model) }, KtStatus::ModelFormat);

    let mut prob = [0.0; KT_NUM_TYPES];
    let text = CString::new("x").unwrap();
    let st = unsafe { kt_model_predict(ptr::null(), text.as_ptr(), prob.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, KtStatus::NullPointer);
    assert!(unsafe { kt_model_label(ptr::null()) }.is_null());

    unsafe {
        kt_model_free(ptr::null_mut());
        kt_string_free(ptr::null_mut());
    }
}

#[test]
fn metrics_match_hand_computed_values() {
    // descending scores give truth 1,0,1: precision 1 at rank 1, 2/3 at rank 3
    let scores = [0.9, 0.6, 0.3];
    let truth = [1u8, 0, 1];
    let mut ap = 0.0;
    assert_eq!(unsafe { kt_auprc(scores.as_ptr(), truth.as_ptr(), 3, &mut ap) }, KtStatus::Ok);
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    let mut auc = 0.0;
    assert_eq!(unsafe { kt_roc_auc(scores.as_ptr(), truth.as_ptr(), 3, &mut auc) }, KtStatus::Ok);
    assert!((auc - 0.5).abs() < 1e-12);

    let none = [0u8; 3];
    assert_eq!(unsafe { kt_auprc(scores.as_ptr(), none.as_ptr(), 3, &mut ap) }, KtStatus::Undefined);
    assert_eq!(unsafe { kt_roc_auc(scores.as_ptr(), none.as_ptr(), 3, &mut auc) }, KtStatus::Undefined);
    let nan = [f64::NAN, 0.1, 0.2];
    assert_eq!(unsafe { kt_auprc(nan.as_ptr(), truth.as_ptr(), 3, &mut ap) }, KtStatus::NonFinite);
    assert_eq!(unsafe { kt_auprc(ptr::null(), truth.as_ptr(), 3, &mut ap) }, KtStatus::NullPointer);
}

#[test]
fn scumble_of_a_corpus_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_jsonl(std::fs::File::create(&path).unwrap(), &docs()).unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut s = f64::NAN;
    assert_eq!(unsafe { kt_corpus_scumble(p.as_ptr(), &mut s) }, KtStatus::Ok);
    assert_eq!(s, 0.0);

    std::fs::write(&path, "{not json\n").unwrap();
    assert_eq!(unsafe { kt_corpus_scumble(p.as_ptr(), &mut s) }, KtStatus::Data);
}

#[test]
fn static_strings() {
    let v = unsafe { CStr::from_ptr(kt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    for (i, t) in KnowledgeType::ALL.iter().enumerate() {
        let n = unsafe { CStr::from_ptr(kt_type_name(i)) }.to_str().unwrap();
        assert_eq!(n, t.name());
    }
    assert!(kt_type_name(KT_NUM_TYPES).is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/knowtype.h")).unwrap();
    for f in [
        "kt_version", "kt_last_error", "kt_string_free", "kt_type_name", "kt_model_load", "kt_model_free",
        "kt_model_label", "kt_model_predict", "kt_auprc", "kt_roc_auc", "kt_corpus_scumble",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("#define KT_NUM_TYPES 12"));
}
