use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "MF1")]
    Mf1,
    #[serde(rename = "MF2")]
    Mf2,
    #[serde(rename = "RAND")]
    Rand,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Mf1 => "MF1",
            BaselineKind::Mf2 => "MF2",
            BaselineKind::Rand => "RAND",
        }
    }
}

/// One-hot naive predictors. The per-document draw of MF2 and RAND depends
/// only on the seed and the document text, so repeated calls agree.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    kind: BaselineKind,
    ranking: [KnowledgeType; NUM_TYPES],
    seed: u64,
}

impl BaselineModel {
    /// Ranks types by training frequency, most frequent first; equal counts
    /// keep the canonical type order.
    pub fn fit(kind: BaselineKind, labels: &[LabelSet], seed: u64) -> Self {
        let mut counts = [0usize; NUM_TYPES];
        for y in labels {
            for t in y.iter() {
                counts[t.index()] += 1;
            }
        }
        let mut ranking = KnowledgeType::ALL;
        ranking.sort_by_key(|t| std::cmp::Reverse(counts[t.index()]));
        BaselineModel { kind, ranking, seed }
    }

    pub fn from_parts(kind: BaselineKind, ranking: [KnowledgeType; NUM_TYPES], seed: u64) -> Result<Self> {
        let bits: LabelSet = ranking.iter().copied().collect();
        if bits.len() != NUM_TYPES {
            return Err(Error::ModelFormat("baseline ranking must list every type once".into()));
        }
        Ok(BaselineModel { kind, ranking, seed })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn ranking(&self) -> &[KnowledgeType; NUM_TYPES] {
        &self.ranking
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn document_rng(&self, text: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(text.as_bytes());
        let mut key = [0u8; 8];
        key.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_le_bytes(key))
    }

    pub fn choose(&self, text: &str) -> KnowledgeType {
        match self.kind {
            BaselineKind::Mf1 => self.ranking[0],
            BaselineKind::Mf2 => self.ranking[self.document_rng(text).gen_range(0..2)],
            BaselineKind::Rand => KnowledgeType::ALL[self.document_rng(text).gen_range(0..NUM_TYPES)],
        }
    }

    pub fn predict(&self, text: &str) -> [f64; NUM_TYPES] {
        let mut out = [0.0; NUM_TYPES];
        out[self.choose(text).index()] = 1.0;
        out
    }
}

pub fn baseline_predict(model: &BaselineModel, text: &str) -> [f64; NUM_TYPES] {
    model.predict(text)
}
