//! Binary model containers.
//!
//! Traditional models use magic `KTM1`: version, kind tag, a JSON header,
//! then little-endian payloads with `f64` weights, so a round trip is
//! bit-exact. Networks use magic `KTN1`: version, architecture header, a JSON
//! text-pipeline block, then `f32` parameter blocks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::embeddings::{EmbeddingTable, OovPolicy};
use crate::error::{Error, Result};
use crate::model::{Classifier, TrainedModel};
use crate::neural::{Dense, LstmParams, NetworkParams};
use crate::text::{NgramSpace, SparseCountVector, Stopwords, Vocabulary};
use crate::traditional::{BaselineKind, BaselineModel, KnnModel, MlknnModel, OvrSvm, Platt, SvmModel, TypeModel};

pub const TRADITIONAL_MAGIC: &[u8; 4] = b"KTM1";
pub const NETWORK_MAGIC: &[u8; 4] = b"KTN1";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on any single length field, to fail fast on corrupt input.
const MAX_LEN: u64 = 1 << 32;

const TAG_MF1: u8 = 0;
const TAG_MF2: u8 = 1;
const TAG_RAND: u8 = 2;
const TAG_KNN: u8 = 3;
const TAG_MLKNN: u8 = 4;
const TAG_SVM: u8 = 5;
const TAG_OVR_SVM: u8 = 6;

#[derive(Serialize, Deserialize)]
struct Header {
    label: String,
    stopwords: Vec<String>,
    vocab_hash: String,
}

#[derive(Serialize, Deserialize)]
struct PipelineBlock {
    label: String,
    stopwords: Vec<String>,
    vocab_hash: String,
    vocabulary: Vec<String>,
    max_len: usize,
    policy: OovPolicy,
    /// Embedding rows that came from a vector source.
    known_rows: Vec<usize>,
    trainable_rows: Vec<usize>,
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::ModelFormat(format!("truncated or unreadable model: {e}"))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let n = r.read_u64::<LE>().map_err(fmt_err)?;
    if n > MAX_LEN {
        return Err(Error::ModelFormat(format!("length field {n} is implausible")));
    }
    Ok(n as usize)
}

fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    let bytes = serde_json::to_vec(value).map_err(std::io::Error::other)?;
    w.write_u64::<LE>(bytes.len() as u64)?;
    w.write_all(&bytes)
}

fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R) -> Result<T> {
    let n = read_len(r)?;
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf).map_err(fmt_err)?;
    if buf.len() != n {
        return Err(Error::ModelFormat("truncated JSON block".into()));
    }
    serde_json::from_slice(&buf).map_err(|e| Error::ModelFormat(format!("bad JSON block: {e}")))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u64::<LE>(s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = read_len(r)?;
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf).map_err(fmt_err)?;
    if buf.len() != n {
        return Err(Error::ModelFormat("truncated string".into()));
    }
    String::from_utf8(buf).map_err(|_| Error::ModelFormat("string is not UTF-8".into()))
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LE>(v.len() as u64)?;
    v.iter().try_for_each(|&x| w.write_f64::<LE>(x))
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_len(r)?;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(r.read_f64::<LE>().map_err(fmt_err)?);
    }
    Ok(out)
}

fn write_f32s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LE>(v.len() as u64)?;
    v.iter().try_for_each(|&x| w.write_f32::<LE>(x as f32))
}

fn read_f32s<R: Read>(r: &mut R, expected: usize, what: &str) -> Result<Vec<f64>> {
    let n = read_len(r)?;
    if n != expected {
        return Err(Error::ModelFormat(format!("{what}: expected {expected} values, found {n}")));
    }
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(r.read_f32::<LE>().map_err(fmt_err)? as f64);
    }
    Ok(out)
}

fn write_space<W: Write>(w: &mut W, space: &NgramSpace) -> std::io::Result<()> {
    w.write_u8(space.max_order() as u8)?;
    w.write_u64::<LE>(space.dim() as u64)?;
    space.features().iter().try_for_each(|f| write_str(w, f))
}

fn read_space<R: Read>(r: &mut R) -> Result<NgramSpace> {
    let order = r.read_u8().map_err(fmt_err)? as usize;
    let n = read_len(r)?;
    let mut features = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        features.push(read_str(r)?);
    }
    Ok(NgramSpace::from_features(order, features))
}

fn write_knn<W: Write>(w: &mut W, m: &KnnModel) -> std::io::Result<()> {
    w.write_u64::<LE>(m.k() as u64)?;
    w.write_u64::<LE>(m.len() as u64)?;
    for (v, y) in m.vectors().iter().zip(m.labels()) {
        w.write_u16::<LE>(y.bits())?;
        w.write_u64::<LE>(v.nnz() as u64)?;
        for &(i, c) in v.entries() {
            w.write_u32::<LE>(i)?;
            w.write_u32::<LE>(c)?;
        }
    }
    Ok(())
}

fn read_knn<R: Read>(r: &mut R) -> Result<KnnModel> {
    let k = read_len(r)?;
    let n = read_len(r)?;
    let mut vectors = Vec::with_capacity(n.min(1 << 20));
    let mut labels = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        labels.push(LabelSet::from_bits(r.read_u16::<LE>().map_err(fmt_err)?));
        let nnz = read_len(r)?;
        let mut pairs = Vec::with_capacity(nnz.min(1 << 16));
        for _ in 0..nnz {
            let i = r.read_u32::<LE>().map_err(fmt_err)?;
            let c = r.read_u32::<LE>().map_err(fmt_err)?;
            pairs.push((i, c));
        }
        vectors.push(SparseCountVector::from_pairs(pairs));
    }
    KnnModel::new(vectors, labels, k).map_err(|e| Error::ModelFormat(e.to_string()))
}

fn write_type_model<W: Write>(w: &mut W, m: &TypeModel) -> std::io::Result<()> {
    match m {
        TypeModel::Constant(p) => {
            w.write_u8(0)?;
            w.write_f64::<LE>(*p)
        }
        TypeModel::Svm(s) => {
            w.write_u8(1)?;
            w.write_f64::<LE>(s.c)?;
            w.write_f64::<LE>(s.bias)?;
            match s.platt {
                Some(p) => {
                    w.write_u8(1)?;
                    w.write_f64::<LE>(p.a)?;
                    w.write_f64::<LE>(p.b)?;
                }
                None => w.write_u8(0)?,
            }
            write_f64s(w, &s.weights)?;
            write_f64s(w, &s.objective_history)
        }
    }
}

fn read_type_model<R: Read>(r: &mut R) -> Result<TypeModel> {
    match r.read_u8().map_err(fmt_err)? {
        0 => Ok(TypeModel::Constant(r.read_f64::<LE>().map_err(fmt_err)?)),
        1 => {
            let c = r.read_f64::<LE>().map_err(fmt_err)?;
            let bias = r.read_f64::<LE>().map_err(fmt_err)?;
            let platt = match r.read_u8().map_err(fmt_err)? {
                0 => None,
                _ => Some(Platt {
                    a: r.read_f64::<LE>().map_err(fmt_err)?,
                    b: r.read_f64::<LE>().map_err(fmt_err)?,
                }),
            };
            let weights = read_f64s(r)?;
            let objective_history = read_f64s(r)?;
            Ok(TypeModel::Svm(SvmModel {
                weights,
                bias,
                c,
                platt,
                objective_history,
            }))
        }
        t => Err(Error::ModelFormat(format!("unknown per-type model tag {t}"))),
    }
}

fn write_traditional<W: Write>(w: &mut W, clf: &Classifier) -> std::io::Result<()> {
    w.write_all(TRADITIONAL_MAGIC)?;
    w.write_u32::<LE>(FORMAT_VERSION)?;
    let tag = match &clf.model {
        TrainedModel::Baseline(b) => match b.kind() {
            BaselineKind::Mf1 => TAG_MF1,
            BaselineKind::Mf2 => TAG_MF2,
            BaselineKind::Rand => TAG_RAND,
        },
        TrainedModel::Knn { .. } => TAG_KNN,
        TrainedModel::Mlknn { .. } => TAG_MLKNN,
        TrainedModel::Svm { grid_searched: true, .. } => TAG_SVM,
        TrainedModel::Svm { grid_searched: false, .. } => TAG_OVR_SVM,
        TrainedModel::Rnn { .. } => unreachable!("networks use the KTN1 container"),
    };
    w.write_u8(tag)?;
    write_json(
        w,
        &Header {
            label: clf.label.clone(),
            stopwords: clf.stopwords.to_sorted_vec(),
            vocab_hash: clf.vocab_hash.clone(),
        },
    )?;
    match &clf.model {
        TrainedModel::Baseline(b) => {
            for t in b.ranking() {
                w.write_u8(t.index() as u8)?;
            }
            w.write_u64::<LE>(b.seed())
        }
        TrainedModel::Knn { space, model } => {
            write_space(w, space)?;
            write_knn(w, model)
        }
        TrainedModel::Mlknn { space, model } => {
            write_space(w, space)?;
            write_knn(w, model.knn())?;
            w.write_f64::<LE>(model.smoothing())?;
            model.prior().iter().try_for_each(|&p| w.write_f64::<LE>(p))?;
            for table in [model.likelihood_pos(), model.likelihood_neg()] {
                for row in table {
                    write_f64s(w, row)?;
                }
            }
            Ok(())
        }
        TrainedModel::Svm { space, model, .. } => {
            write_space(w, space)?;
            model.models().iter().try_for_each(|m| write_type_model(w, m))
        }
        TrainedModel::Rnn { .. } => unreachable!(),
    }
}

fn read_traditional<R: Read>(r: &mut R) -> Result<Classifier> {
    let tag = r.read_u8().map_err(fmt_err)?;
    let header: Header = read_json(r)?;
    let model = match tag {
        TAG_MF1 | TAG_MF2 | TAG_RAND => {
            let kind = match tag {
                TAG_MF1 => BaselineKind::Mf1,
                TAG_MF2 => BaselineKind::Mf2,
                _ => BaselineKind::Rand,
            };
            let mut ranking = [KnowledgeType::Functionality; NUM_TYPES];
            for slot in &mut ranking {
                let i = r.read_u8().map_err(fmt_err)? as usize;
                *slot = KnowledgeType::from_index(i).ok_or_else(|| Error::ModelFormat(format!("type index {i}")))?;
            }
            let seed = r.read_u64::<LE>().map_err(fmt_err)?;
            TrainedModel::Baseline(BaselineModel::from_parts(kind, ranking, seed)?)
        }
        TAG_KNN => {
            let space = read_space(r)?;
            TrainedModel::Knn {
                space,
                model: read_knn(r)?,
            }
        }
        TAG_MLKNN => {
            let space = read_space(r)?;
            let knn = read_knn(r)?;
            let smoothing = r.read_f64::<LE>().map_err(fmt_err)?;
            let mut prior = [0.0; NUM_TYPES];
            for p in &mut prior {
                *p = r.read_f64::<LE>().map_err(fmt_err)?;
            }
            let mut tables = Vec::new();
            for _ in 0..2 {
                let mut rows = Vec::with_capacity(NUM_TYPES);
                for _ in 0..NUM_TYPES {
                    rows.push(read_f64s(r)?);
                }
                tables.push(rows);
            }
            let neg = tables.pop().unwrap_or_default();
            let pos = tables.pop().unwrap_or_default();
            TrainedModel::Mlknn {
                space,
                model: MlknnModel::from_parts(knn, smoothing, prior, pos, neg)?,
            }
        }
        TAG_SVM | TAG_OVR_SVM => {
            let space = read_space(r)?;
            let mut models = Vec::with_capacity(NUM_TYPES);
            for _ in 0..NUM_TYPES {
                models.push(read_type_model(r)?);
            }
            TrainedModel::Svm {
                space,
                model: OvrSvm::from_models(models)?,
                grid_searched: tag == TAG_SVM,
            }
        }
        t => return Err(Error::ModelFormat(format!("unknown model kind tag {t}"))),
    };
    Ok(Classifier {
        label: header.label,
        stopwords: Stopwords::from_words(header.stopwords),
        vocab_hash: header.vocab_hash,
        model,
    })
}

fn network_groups(net: &NetworkParams) -> [&[f64]; 10] {
    [
        net.embedding.matrix(),
        &net.lstm.w,
        &net.lstm.u,
        &net.lstm.b,
        &net.dense1.w,
        &net.dense1.b,
        &net.dense2.w,
        &net.dense2.b,
        &net.output.w,
        &net.output.b,
    ]
}

fn write_network<W: Write>(w: &mut W, clf: &Classifier) -> std::io::Result<()> {
    let TrainedModel::Rnn { max_len, net } = &clf.model else {
        unreachable!("traditional models use the KTM1 container")
    };
    w.write_all(NETWORK_MAGIC)?;
    w.write_u32::<LE>(FORMAT_VERSION)?;
    for v in [net.dim(), net.hidden(), net.dense1.n_out, net.dense2.n_out, net.output.n_out] {
        w.write_u32::<LE>(v as u32)?;
    }
    w.write_f64::<LE>(net.dropout)?;
    let table = &net.embedding;
    write_json(
        w,
        &PipelineBlock {
            label: clf.label.clone(),
            stopwords: clf.stopwords.to_sorted_vec(),
            vocab_hash: clf.vocab_hash.clone(),
            vocabulary: table.vocab().tokens().to_vec(),
            max_len: *max_len,
            policy: table.policy(),
            known_rows: (0..table.rows()).filter(|&r| table.known()[r]).collect(),
            trainable_rows: table.trainable_rows(),
        },
    )?;
    network_groups(net).iter().try_for_each(|g| write_f32s(w, g))
}

fn read_network<R: Read>(r: &mut R) -> Result<Classifier> {
    let mut arch = [0usize; 5];
    for a in &mut arch {
        *a = r.read_u32::<LE>().map_err(fmt_err)? as usize;
    }
    let [dim, hidden, d1, d2, out] = arch;
    let dropout = r.read_f64::<LE>().map_err(fmt_err)?;
    let block: PipelineBlock = read_json(r)?;
    let vocab = Vocabulary::from_tokens(&block.vocabulary);
    if vocab.size() != block.vocabulary.len() {
        return Err(Error::ModelFormat("vocabulary contains duplicates".into()));
    }
    let rows = vocab.size() + 2;
    let flags = |list: &[usize]| -> Result<Vec<bool>> {
        let mut v = vec![false; rows];
        for &i in list {
            *v.get_mut(i).ok_or_else(|| Error::ModelFormat(format!("row {i} out of range")))? = true;
        }
        Ok(v)
    };
    let known = flags(&block.known_rows)?;
    let trainable = flags(&block.trainable_rows)?;
    let matrix = read_f32s(r, rows * dim, "embedding")?;
    let embedding = EmbeddingTable::from_parts(vocab, dim, matrix, known, trainable, block.policy)?;
    let lstm = LstmParams {
        input_dim: dim,
        hidden,
        w: read_f32s(r, 4 * hidden * dim, "lstm.w")?,
        u: read_f32s(r, 4 * hidden * hidden, "lstm.u")?,
        b: read_f32s(r, 4 * hidden, "lstm.b")?,
    };
    let mut dense = |n_in: usize, n_out: usize, name: &str| -> Result<Dense> {
        Ok(Dense {
            n_in,
            n_out,
            w: read_f32s(r, n_in * n_out, name)?,
            b: read_f32s(r, n_out, name)?,
        })
    };
    let dense1 = dense(hidden, d1, "dense1")?;
    let dense2 = dense(d1, d2, "dense2")?;
    let output = dense(d2, out, "output")?;
    let net = NetworkParams {
        embedding,
        lstm,
        dense1,
        dense2,
        output,
        dropout,
    };
    net.check_shapes().map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(Classifier {
        label: block.label,
        stopwords: Stopwords::from_words(block.stopwords),
        vocab_hash: block.vocab_hash,
        model: TrainedModel::Rnn {
            max_len: block.max_len,
            net,
        },
    })
}

pub fn write_classifier<W: Write>(mut w: W, clf: &Classifier) -> std::io::Result<()> {
    match clf.model {
        TrainedModel::Rnn { .. } => write_network(&mut w, clf),
        _ => write_traditional(&mut w, clf),
    }?;
    w.flush()
}

pub fn read_classifier<R: Read>(mut r: R) -> Result<Classifier> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(fmt_err)?;
    let version = r.read_u32::<LE>().map_err(fmt_err)?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported format version {version}")));
    }
    match &magic {
        m if m == TRADITIONAL_MAGIC => read_traditional(&mut r),
        m if m == NETWORK_MAGIC => read_network(&mut r),
        _ => Err(Error::ModelFormat("not a model file (bad magic)".into())),
    }
}

pub fn save_classifier(path: &Path, clf: &Classifier) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_classifier(BufWriter::new(file), clf).map_err(|e| Error::io(path, e))
}

pub fn load_classifier(path: &Path) -> Result<Classifier> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_classifier(BufReader::new(file))
}
