//! Labeled API-documentation corpora: loading, label statistics, splitting
//! and imbalance-driven resampling.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of knowledge types in the taxonomy.
pub const NUM_TYPES: usize = 12;

/// The twelve knowledge types found in API reference documentation.
///
/// Ordinals are stable: they index every per-type array in this crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KnowledgeType {
    Functionality,
    Concept,
    Directive,
    Purpose,
    Quality,
    Control,
    Structure,
    Pattern,
    Example,
    Environment,
    Reference,
    NonInformation,
}

impl KnowledgeType {
    pub const ALL: [KnowledgeType; NUM_TYPES] = [
        KnowledgeType::Functionality,
        KnowledgeType::Concept,
        KnowledgeType::Directive,
        KnowledgeType::Purpose,
        KnowledgeType::Quality,
        KnowledgeType::Control,
        KnowledgeType::Structure,
        KnowledgeType::Pattern,
        KnowledgeType::Example,
        KnowledgeType::Environment,
        KnowledgeType::Reference,
        KnowledgeType::NonInformation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Canonical, case-sensitive name used in corpus files.
    pub fn name(self) -> &'static str {
        match self {
            KnowledgeType::Functionality => "Functionality",
            KnowledgeType::Concept => "Concept",
            KnowledgeType::Directive => "Directive",
            KnowledgeType::Purpose => "Purpose",
            KnowledgeType::Quality => "Quality",
            KnowledgeType::Control => "Control",
            KnowledgeType::Structure => "Structure",
            KnowledgeType::Pattern => "Pattern",
            KnowledgeType::Example => "Example",
            KnowledgeType::Environment => "Environment",
            KnowledgeType::Reference => "Reference",
            KnowledgeType::NonInformation => "NonInformation",
        }
    }

    /// Name as printed in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            KnowledgeType::NonInformation => "Non-information",
            other => other.name(),
        }
    }
}

impl fmt::Display for KnowledgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KnowledgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Set of knowledge types, stored as a 12-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelSet(u16);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_bits(bits: u16) -> Self {
        LabelSet(bits & 0x0fff)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, t: KnowledgeType) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn insert(&mut self, t: KnowledgeType) {
        self.0 |= 1 << t.index();
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: LabelSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> impl Iterator<Item = KnowledgeType> {
        KnowledgeType::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// Indicator vector in ordinal order.
    pub fn indicator(self) -> [bool; NUM_TYPES] {
        let mut out = [false; NUM_TYPES];
        for t in self.iter() {
            out[t.index()] = true;
        }
        out
    }
}

impl FromIterator<KnowledgeType> for LabelSet {
    fn from_iter<I: IntoIterator<Item = KnowledgeType>>(iter: I) -> Self {
        let mut set = LabelSet::EMPTY;
        for t in iter {
            set.insert(t);
        }
        set
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// One API reference page.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    /// Name of the documented API element (class, method, property, module).
    pub element_name: String,
    pub text: String,
    pub labels: LabelSet,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        element_name: impl Into<String>,
        text: impl Into<String>,
        labels: LabelSet,
    ) -> Self {
        Document {
            id: id.into(),
            element_name: element_name.into(),
            text: text.into(),
            labels,
        }
    }
}

/// Where a corpus came from in an experiment pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitRole {
    Full,
    Train,
    Test,
}

/// Ordered document collection with cached per-type label counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    name: String,
    documents: Vec<Document>,
    label_counts: [usize; NUM_TYPES],
    role: SplitRole,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let label_counts = count_labels(&documents);
        Ok(Corpus {
            name: name.into(),
            documents,
            label_counts,
            role: SplitRole::Full,
        })
    }

    pub fn with_role(mut self, role: SplitRole) -> Self {
        self.role = role;
        self
    }

    /// Sub-corpus made of the documents at `indices`, in the given order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize], role: SplitRole) -> Corpus {
        let documents: Vec<Document> = indices.iter().map(|&i| self.documents[i].clone()).collect();
        let label_counts = count_labels(&documents);
        Corpus {
            name: name.into(),
            documents,
            label_counts,
            role,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> SplitRole {
        self.role
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label_counts(&self) -> &[usize; NUM_TYPES] {
        &self.label_counts
    }

    /// True when the cached counts agree with a fresh recount.
    pub fn counts_consistent(&self) -> bool {
        count_labels(&self.documents) == self.label_counts
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }
}

fn count_labels(documents: &[Document]) -> [usize; NUM_TYPES] {
    let mut counts = [0usize; NUM_TYPES];
    for d in documents {
        for t in d.labels.iter() {
            counts[t.index()] += 1;
        }
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Loading options. A labeled corpus requires non-empty text and at least
/// one label per document; an unlabeled one (inference input) does not.
#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    pub labeled: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { labeled: true }
    }
}

#[derive(Deserialize)]
struct JsonDocument {
    id: String,
    #[serde(default)]
    element: String,
    text: String,
    #[serde(default)]
    labels: Vec<String>,
}

/// JSONL record shape, shared with writers elsewhere in the crate.
#[derive(Serialize)]
pub(crate) struct JsonDocumentOut<'a> {
    pub id: &'a str,
    pub element: &'a str,
    pub text: &'a str,
    pub labels: Vec<&'static str>,
}

impl<'a> From<&'a Document> for JsonDocumentOut<'a> {
    fn from(d: &'a Document) -> Self {
        JsonDocumentOut {
            id: &d.id,
            element: &d.element_name,
            text: &d.text,
            labels: d.labels.iter().map(KnowledgeType::name).collect(),
        }
    }
}

/// Writes documents as JSONL in the loader's schema.
pub fn write_jsonl<W: Write>(w: W, documents: &[Document]) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for d in documents {
        serde_json::to_writer(&mut w, &JsonDocumentOut::from(d))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    load_corpus_with(path, format, LoadOptions::default())
}

pub fn load_corpus_with(path: &Path, format: CorpusFormat, opts: LoadOptions) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let documents = match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), opts)?,
        CorpusFormat::Csv => read_csv(file, opts)?,
    };
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    Corpus::new(name, documents)
}

fn check_document(doc: &Document, line: usize, opts: LoadOptions) -> Result<()> {
    if opts.labeled {
        if doc.text.trim().is_empty() {
            return Err(Error::EmptyText(doc.id.clone()));
        }
        if doc.labels.is_empty() {
            return Err(Error::parse(line, format!("document `{}` has no labels", doc.id)));
        }
    }
    Ok(())
}

pub(crate) fn read_jsonl<R: BufRead>(reader: R, opts: LoadOptions) -> Result<Vec<Document>> {
    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let mut labels = LabelSet::EMPTY;
        for name in &raw.labels {
            let t = name
                .parse::<KnowledgeType>()
                .map_err(|_| Error::parse(lineno, format!("unknown label `{name}`")))?;
            labels.insert(t);
        }
        let doc = Document::new(raw.id, raw.element, raw.text, labels);
        check_document(&doc, lineno, opts)?;
        documents.push(doc);
    }
    Ok(documents)
}

fn read_csv<R: std::io::Read>(reader: R, opts: LoadOptions) -> Result<Vec<Document>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();

    let mut id_col = None;
    let mut element_col = None;
    let mut text_col = None;
    let mut label_cols: Vec<(usize, KnowledgeType)> = Vec::new();
    for (col, name) in headers.iter().enumerate() {
        match name {
            "id" => id_col = Some(col),
            "element" => element_col = Some(col),
            "text" => text_col = Some(col),
            other => label_cols.push((col, other.parse::<KnowledgeType>()?)),
        }
    }
    let (Some(id_col), Some(text_col)) = (id_col, text_col) else {
        return Err(Error::parse(1, "header must contain `id` and `text` columns"));
    };
    let present: HashSet<KnowledgeType> = label_cols.iter().map(|(_, t)| *t).collect();
    if let Some(missing) = KnowledgeType::ALL.iter().find(|t| !present.contains(t)) {
        return Err(Error::parse(1, format!("missing label column `{missing}`")));
    }

    let mut documents = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let lineno = i + 2;
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(lineno);
            Error::parse(line, e.to_string())
        })?;
        let lineno = record.position().map(|p| p.line() as usize).unwrap_or(lineno);
        let field = |col: usize| record.get(col).unwrap_or("").to_string();
        let mut labels = LabelSet::EMPTY;
        for &(col, t) in &label_cols {
            match record.get(col).map(str::trim) {
                Some("1") => labels.insert(t),
                Some("0") | Some("") if !opts.labeled => {}
                Some("0") => {}
                other => {
                    return Err(Error::parse(
                        lineno,
                        format!("label `{t}` must be 0 or 1, got `{}`", other.unwrap_or("")),
                    ))
                }
            }
        }
        let doc = Document::new(
            field(id_col),
            element_col.map(field).unwrap_or_default(),
            field(text_col),
            labels,
        );
        check_document(&doc, lineno, opts)?;
        documents.push(doc);
    }
    Ok(documents)
}

/// Per-document SCUMBLE scores plus the per-type imbalance ratios they rest on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScumbleReport {
    pub per_document: Vec<f64>,
    pub mean: f64,
    /// `None` for types that never occur.
    pub irlbl: [Option<f64>; NUM_TYPES],
}

/// Imbalance ratio per label: count of the most frequent label over this label's count.
pub fn irlbl(counts: &[usize; NUM_TYPES]) -> [Option<f64>; NUM_TYPES] {
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let mut out = [None; NUM_TYPES];
    for (slot, &c) in out.iter_mut().zip(counts) {
        if c > 0 {
            *slot = Some(max / c as f64);
        }
    }
    out
}

/// Concurrence of rare and frequent labels, averaged over documents.
///
/// For document `i` with labels `Y_i`, the score is one minus the ratio of the
/// geometric to the arithmetic mean of `IRLbl` over `Y_i`. Unlabeled
/// documents score 0.
pub fn scumble(corpus: &Corpus) -> Result<ScumbleReport> {
    if corpus.documents().iter().all(|d| d.labels.is_empty()) {
        return Err(Error::Degenerate("SCUMBLE needs at least one labeled document".into()));
    }
    let ratios = irlbl(corpus.label_counts());
    let per_document: Vec<f64> = corpus
        .documents()
        .iter()
        .map(|d| {
            let values: Vec<f64> = d.labels.iter().filter_map(|t| ratios[t.index()]).collect();
            // equal ratios (including a lone label) score exactly 0
            if values.iter().all(|&v| v == values[0]) {
                return 0.0;
            }
            let n = values.len() as f64;
            let log_mean = values.iter().map(|v| v.ln()).sum::<f64>() / n;
            let arith = values.iter().sum::<f64>() / n;
            (1.0 - log_mean.exp() / arith).clamp(0.0, 1.0)
        })
        .collect();
    let mean = per_document.iter().sum::<f64>() / per_document.len() as f64;
    Ok(ScumbleReport {
        per_document,
        mean,
        irlbl: ratios,
    })
}

fn labels_of(types: &[KnowledgeType]) -> LabelSet {
    types.iter().copied().collect()
}

/// Random under-sampling of the dominant types followed by over-sampling of
/// the rarest ones, applied to a training split only.
///
/// 30% (floored) of the documents labeled Functionality or NonInformation are
/// dropped, then 50% (floored) of the surviving documents labeled Environment
/// or Quality are appended again with id `<id>#dup1`.
pub fn resample_training_set(train: &Corpus, seed: u64) -> Result<Corpus> {
    if train.role() == SplitRole::Test {
        return Err(Error::InvalidArgument("refusing to resample a test split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let remove_targets = labels_of(&[KnowledgeType::Functionality, KnowledgeType::NonInformation]);
    let candidates: Vec<usize> = (0..train.len())
        .filter(|&i| train.documents()[i].labels.intersects(remove_targets))
        .collect();
    let n_remove = candidates.len() * 3 / 10;
    let removed: HashSet<usize> = index::sample(&mut rng, candidates.len(), n_remove)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    let mut documents: Vec<Document> = train
        .documents()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, d)| d.clone())
        .collect();

    let dup_targets = labels_of(&[KnowledgeType::Environment, KnowledgeType::Quality]);
    let candidates: Vec<usize> = (0..documents.len())
        .filter(|&i| documents[i].labels.intersects(dup_targets))
        .collect();
    let n_dup = candidates.len() / 2;
    let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), n_dup)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    picked.sort_unstable();
    for i in picked {
        let mut copy = documents[i].clone();
        copy.id = format!("{}#dup1", copy.id);
        documents.push(copy);
    }

    Ok(Corpus::new(train.name(), documents)?.with_role(train.role()))
}

/// Random train/test partition; the test side receives `round(test_fraction * n)`
/// documents, clamped so both sides are non-empty. Document order is preserved
/// within each side.
pub fn split_holdout(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(Error::InvalidArgument("holdout split needs at least 2 documents".into()));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test_set: HashSet<usize> = index::sample(&mut rng, n, n_test).into_iter().collect();
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| test_set.contains(i));
    Ok((
        corpus.subset(format!("{}-train", corpus.name()), &train_idx, SplitRole::Train),
        corpus.subset(format!("{}-test", corpus.name()), &test_idx, SplitRole::Test),
    ))
}

/// `k` train/test pairs whose test sides partition the corpus. The first
/// `n mod k` folds hold one extra document.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<(Corpus, Corpus)>> {
    let n = corpus.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds corpus size {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = index::sample(&mut rng, n, n).into_vec();
    let (q, r) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = q + usize::from(f < r);
        let in_test: HashSet<usize> = perm[start..start + size].iter().copied().collect();
        start += size;
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| in_test.contains(i));
        folds.push((
            corpus.subset(format!("{}-fold{f}-train", corpus.name()), &train_idx, SplitRole::Train),
            corpus.subset(format!("{}-fold{f}-test", corpus.name()), &test_idx, SplitRole::Test),
        ));
    }
    Ok(folds)
}

/// Largest-remainder apportionment of `n` seats over strata of the given sizes.
/// Ties in the remainder go to the earlier stratum.
pub fn apportion(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut seats: Vec<usize> = sizes.iter().map(|&s| s * n / total).collect();
    let remainders: Vec<usize> = sizes.iter().map(|&s| s * n % total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    let left = n - seats.iter().sum::<usize>();
    for &s in order.iter().take(left) {
        seats[s] += 1;
    }
    seats
}

/// Proportional stratified random sample of size `n`. Strata are ordered by
/// first appearance; the output keeps corpus order.
pub fn stratified_sample<K, F>(corpus: &Corpus, strata_key: F, n: usize, seed: u64) -> Result<Corpus>
where
    K: Eq + std::hash::Hash,
    F: Fn(&Document) -> K,
{
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot sample from an empty corpus".into()));
    }
    if n > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {n} exceeds corpus size {}",
            corpus.len()
        )));
    }
    let mut slot: HashMap<K, usize> = HashMap::new();
    let mut strata: Vec<Vec<usize>> = Vec::new();
    for (i, d) in corpus.documents().iter().enumerate() {
        let next = strata.len();
        let s = *slot.entry(strata_key(d)).or_insert(next);
        if s == strata.len() {
            strata.push(Vec::new());
        }
        strata[s].push(i);
    }
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let seats = apportion(&sizes, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for (members, &take) in strata.iter().zip(&seats) {
        chosen.extend(index::sample(&mut rng, members.len(), take).into_iter().map(|k| members[k]));
    }
    chosen.sort_unstable();
    Ok(corpus.subset(format!("{}-sample", corpus.name()), &chosen, corpus.role()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    use KnowledgeType::*;

    fn doc(id: &str, labels: &[KnowledgeType]) -> Document {
        Document::new(id, "Elem", format!("text of {id}"), labels.iter().copied().collect())
    }

    fn corpus(docs: Vec<Document>) -> Corpus {
        Corpus::new("t", docs).unwrap()
    }

    #[test]
    fn ordinals_follow_taxonomy_order() {
        for (i, t) in KnowledgeType::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(t.name().parse::<KnowledgeType>().unwrap(), *t);
        }
        assert_eq!(NonInformation.index(), 11);
        assert!("functionality".parse::<KnowledgeType>().is_err());
    }

    #[test]
    fn jsonl_single_line() {
        let line = r#"{"id":"d1","element":"Foo.bar","text":"Returns the index.","labels":["Functionality"]}"#;
        let docs = read_jsonl(line.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].element_name, "Foo.bar");
        assert_eq!(docs[0].labels, LabelSet::from_iter([Functionality]));
    }

    #[test]
    fn jsonl_errors_name_the_line() {
        let input = "{\"id\":\"a\",\"element\":\"\",\"text\":\"x\",\"labels\":[\"Concept\"]}\n{not json";
        match read_jsonl(input.as_bytes(), LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let input = r#"{"id":"a","element":"","text":"x","labels":["Bogus"]}"#;
        assert!(matches!(read_jsonl(input.as_bytes(), LoadOptions::default()), Err(Error::Parse { line: 1, .. })));
        let input = r#"{"id":"a","element":"","text":"  ","labels":["Concept"]}"#;
        assert!(matches!(read_jsonl(input.as_bytes(), LoadOptions::default()), Err(Error::EmptyText(_))));
    }

    fn csv_header() -> String {
        let mut h = String::from("id,element,text");
        for t in KnowledgeType::ALL {
            h.push(',');
            h.push_str(t.name());
        }
        h
    }

    fn write_tmp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_roundtrip_and_label_value_check() {
        let ok = format!(
            "{}\nd1,Foo,\"Returns, quoted \"\"text\"\"\",1,0,0,0,0,0,0,0,0,0,0,1\n",
            csv_header()
        );
        let f = write_tmp(&ok, ".csv");
        let c = load_corpus(f.path(), CorpusFormat::from_path(f.path())).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.documents()[0].text, "Returns, quoted \"text\"");
        assert_eq!(c.documents()[0].labels, LabelSet::from_iter([Functionality, NonInformation]));

        let bad = format!(
            "{}\nd1,Foo,ok,1,0,0,0,0,0,0,0,0,0,0,0\nd2,Bar,ok,2,0,0,0,0,0,0,0,0,0,0,0\n",
            csv_header()
        );
        let f = write_tmp(&bad, ".csv");
        match load_corpus(f.path(), CorpusFormat::Csv) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("Functionality"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_unknown_column_rejected() {
        let content = format!("{},Extra\nd1,F,t,1,0,0,0,0,0,0,0,0,0,0,0,1\n", csv_header());
        let f = write_tmp(&content, ".csv");
        assert!(matches!(load_corpus(f.path(), CorpusFormat::Csv), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Corpus::new("t", vec![doc("a", &[Concept]), doc("a", &[Purpose])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn scumble_single_label_and_balanced_are_zero() {
        let c = corpus(vec![doc("a", &[Concept]), doc("b", &[Purpose]), doc("c", &[Concept])]);
        let r = scumble(&c).unwrap();
        assert!(r.per_document.iter().all(|&s| s == 0.0));
        assert_eq!(r.mean, 0.0);

        let c = corpus(vec![doc("a", &[Concept, Purpose]), doc("b", &[Purpose, Concept])]);
        assert_eq!(scumble(&c).unwrap().mean, 0.0);
    }

    #[test]
    fn scumble_three_document_hand_case() {
        // counts: Concept 3, Purpose 1 -> IRLbl 1 and 3.
        let c = corpus(vec![
            doc("d1", &[Concept]),
            doc("d2", &[Concept]),
            doc("d3", &[Concept, Purpose]),
        ]);
        let r = scumble(&c).unwrap();
        assert_eq!(r.irlbl[Concept.index()], Some(1.0));
        assert_eq!(r.irlbl[Purpose.index()], Some(3.0));
        let d3 = 1.0 - 3f64.sqrt() / 2.0;
        assert!((r.per_document[2] - d3).abs() < 1e-12);
        assert!((r.mean - d3 / 3.0).abs() < 1e-12);
        assert!((r.per_document[2] - 0.133975).abs() < 1e-6);
    }

    #[test]
    fn scumble_needs_labels() {
        let c = corpus(vec![doc("a", &[])]);
        assert!(scumble(&c).is_err());
    }

    #[test]
    fn resample_noop_without_targets() {
        let c = corpus(vec![doc("a", &[Concept]), doc("b", &[Purpose])]).with_role(SplitRole::Train);
        let out = resample_training_set(&c, 7).unwrap();
        assert_eq!(out.documents(), c.documents());
    }

    #[test]
    fn resample_removes_floor_thirty_percent() {
        let docs = (0..10).map(|i| doc(&format!("d{i}"), &[Functionality])).collect();
        let c = corpus(docs).with_role(SplitRole::Train);
        for seed in 0..5 {
            let out = resample_training_set(&c, seed).unwrap();
            assert_eq!(out.len(), 7);
            // survivors keep their relative order
            let pos: Vec<usize> = out
                .documents()
                .iter()
                .map(|d| d.id[1..].parse::<usize>().unwrap())
                .collect();
            assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn resample_duplicates_with_traceable_ids() {
        let docs = (0..5)
            .map(|i| doc(&format!("d{i}"), &[Environment, Quality]))
            .collect();
        let c = corpus(docs).with_role(SplitRole::Train);
        let out = resample_training_set(&c, 3).unwrap();
        assert_eq!(out.len(), 7);
        let dups: Vec<&Document> = out.documents()[5..].iter().collect();
        for d in dups {
            let orig = d.id.strip_suffix("#dup1").unwrap();
            assert!(c.documents().iter().any(|o| o.id == orig && o.text == d.text));
        }
        assert!(out.counts_consistent());
    }

    #[test]
    fn resample_refuses_test_split() {
        let c = corpus(vec![doc("a", &[Functionality]), doc("b", &[Concept])]);
        let (_, test) = split_holdout(&c, 0.5, 1).unwrap();
        assert!(resample_training_set(&test, 1).is_err());
    }

    #[test]
    fn holdout_sizes_and_determinism() {
        let docs = (0..100).map(|i| doc(&format!("d{i}"), &[Concept])).collect();
        let c = corpus(docs);
        let (train, test) = split_holdout(&c, 0.10, 42).unwrap();
        assert_eq!((train.len(), test.len()), (90, 10));
        let ids: HashSet<&str> = train.documents().iter().map(|d| d.id.as_str()).collect();
        assert!(test.documents().iter().all(|d| !ids.contains(d.id.as_str())));
        assert_eq!(split_holdout(&c, 0.10, 42).unwrap(), (train, test));

        let small = corpus(vec![doc("a", &[Concept]), doc("b", &[Concept]), doc("c", &[Concept])]);
        let (tr, te) = split_holdout(&small, 0.5, 0).unwrap();
        // round(1.5) = 2, half away from zero
        assert_eq!((tr.len(), te.len()), (1, 2));
        assert!(split_holdout(&corpus(vec![doc("a", &[Concept])]), 0.5, 0).is_err());
    }

    #[test]
    fn fold_sizes() {
        let docs = (0..103).map(|i| doc(&format!("d{i}"), &[Concept])).collect();
        let c = corpus(docs);
        let folds = make_folds(&c, 10, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
        let mut all: Vec<String> = folds
            .iter()
            .flat_map(|(_, t)| t.documents().iter().map(|d| d.id.clone()))
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 103);
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), 103);
        }
        assert!(make_folds(&c, 104, 0).is_err());
        assert!(make_folds(&c, 1, 0).is_err());
    }

    #[test]
    fn apportionment_rules() {
        assert_eq!(apportion(&[80, 20], 10), vec![8, 2]);
        assert_eq!(apportion(&[7, 3], 5), vec![4, 1]);
        assert_eq!(apportion(&[10], 4), vec![4]);
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
    }

    #[test]
    fn stratified_sample_respects_apportionment() {
        let docs: Vec<Document> = (0..10)
            .map(|i| {
                let mut d = doc(&format!("d{i}"), &[Concept]);
                d.element_name = if i < 7 { "os".into() } else { "re".into() };
                d
            })
            .collect();
        let c = corpus(docs);
        let s = stratified_sample(&c, |d| d.element_name.clone(), 5, 11).unwrap();
        let os = s.documents().iter().filter(|d| d.element_name == "os").count();
        assert_eq!((os, s.len() - os), (4, 1));
        assert!(stratified_sample(&c, |d| d.element_name.clone(), 11, 0).is_err());
        let empty = corpus(vec![]);
        assert!(stratified_sample(&empty, |_| 0, 0, 0).is_err());
    }
}
