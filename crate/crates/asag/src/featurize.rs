//! Rubric-phrase featurization.
//!
//! Each feature is one rubric phrase or keyword. A response's value for a
//! feature is the largest cosine similarity between the phrase embedding
//! and the embedding of any n-gram (n = 1..5 by default) of the tokenized
//! response. Embeddings come from an [`EmbeddingProvider`]; the built-in
//! [`FallbackEmbedder`] hashes character trigrams so the pipeline runs with
//! no external model, and [`CachedEmbeddings`] layers precomputed vectors
//! (JSONL, one `{"text":…,"vector":[…]}` per line) on top of any provider.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::{Error, Result};

pub const DEFAULT_NGRAM_MIN: usize = 1;
pub const DEFAULT_NGRAM_MAX: usize = 5;
pub const FALLBACK_DIM: usize = 64;

/// A rubric phrase or keyword used as one feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricPhrase {
    pub text: String,
    pub kind: PhraseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseKind {
    Phrase,
    Keyword,
}

/// Fixed-length real embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Deterministic text-to-vector mapping with a fixed dimension.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// N×D feature matrix with aligned feature names and response ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub response_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.feature_names.len()
    }

    /// Column `j` min/max over all rows.
    pub fn column_range(&self, j: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &self.values {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        (lo, hi)
    }

    /// Sub-matrix of the rows whose index is in `keep`, preserving order.
    pub fn select_rows(&self, keep: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: keep.iter().map(|&i| self.values[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            response_ids: keep.iter().map(|&i| self.response_ids[i].clone()).collect(),
        }
    }
}

/// Lowercases, strips every non-alphanumeric character, and splits on
/// whitespace. `"don't"` becomes `dont`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|chunk| {
            let token: String = chunk
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(|c| c.to_lowercase())
                .collect();
            if token.is_empty() {
                None
            } else {
                Some(token)
            }
        })
        .collect()
}

/// All contiguous n-grams for each n in `[n_min, min(n_max, len)]`, joined
/// by single spaces, ordered by n ascending then position.
pub fn extract_ngrams(tokens: &[String], n_min: usize, n_max: usize) -> Vec<String> {
    assert!(1 <= n_min && n_min <= n_max, "need 1 <= n_min <= n_max");
    let mut out = Vec::new();
    for n in n_min..=n_max.min(tokens.len()) {
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Cosine of the angle between two embeddings, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm {
            text: String::new(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hashed-character-trigram embedding: counts of trigrams of the padded
/// lowercase text land in 64 buckets, L2-normalized. Empty text maps to a
/// fixed sentinel with first coordinate 1.
pub fn fallback_embed(text: &str) -> EmbeddingVector {
    let lower = text.to_lowercase();
    let trimmed = lower.trim();
    let mut values = vec![0.0f64; FALLBACK_DIM];
    if trimmed.is_empty() {
        values[0] = 1.0;
        return EmbeddingVector { values };
    }
    let padded: Vec<char> = std::iter::once(' ')
        .chain(trimmed.chars())
        .chain(std::iter::once(' '))
        .collect();
    for tri in padded.windows(3) {
        let s: String = tri.iter().collect();
        let bucket = (fnv1a(s.as_bytes()) % FALLBACK_DIM as u64) as usize;
        values[bucket] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut values {
        *v /= norm;
    }
    EmbeddingVector { values }
}

/// The built-in embedder backed by [`fallback_embed`].
#[derive(Debug, Default, Clone, Copy)]
pub struct FallbackEmbedder;

impl EmbeddingProvider for FallbackEmbedder {
    fn dim(&self) -> usize {
        FALLBACK_DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(fallback_embed(text))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    text: String,
    vector: Vec<f64>,
}

/// Precomputed embeddings loaded from JSONL, falling back to an inner
/// provider for texts not in the cache. Misses are recorded so callers can
/// report which texts would need a real embedding pass.
pub struct CachedEmbeddings<P: EmbeddingProvider> {
    cache: HashMap<String, EmbeddingVector>,
    dim: usize,
    inner: P,
    misses: Mutex<Vec<String>>,
}

impl<P: EmbeddingProvider> CachedEmbeddings<P> {
    pub fn load(path: &Path, inner: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut cache = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CacheLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                row: i + 1,
                msg: format!("embedding cache: {e}"),
            })?;
            match dim {
                None => dim = Some(parsed.vector.len()),
                Some(d) if d != parsed.vector.len() => {
                    return Err(Error::DimMismatch {
                        expected: d,
                        actual: parsed.vector.len(),
                    })
                }
                _ => {}
            }
            cache.insert(parsed.text, EmbeddingVector { values: parsed.vector });
        }
        // A cache dimension different from the inner provider's is allowed
        // only if every requested text is cached; embed() enforces this when
        // a miss occurs.
        let dim = dim.unwrap_or_else(|| inner.dim());
        Ok(Self {
            cache,
            dim,
            inner,
            misses: Mutex::new(Vec::new()),
        })
    }

    /// Texts that were requested but absent from the cache, in request order.
    pub fn misses(&self) -> Vec<String> {
        self.misses.lock().unwrap().clone()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbeddings<P> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if let Some(v) = self.cache.get(text) {
            return Ok(v.clone());
        }
        self.misses.lock().unwrap().push(text.to_string());
        let v = self.inner.embed(text)?;
        if v.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: v.dim(),
            });
        }
        Ok(v)
    }
}

/// Max cosine similarity between the phrase and any n-gram of the response.
/// Empty responses score 0.0 ("idea absent").
pub fn phrase_feature<P: EmbeddingProvider + ?Sized>(
    response_text: &str,
    phrase: &RubricPhrase,
    provider: &P,
) -> Result<f64> {
    phrase_feature_with_ngrams(response_text, phrase, provider, DEFAULT_NGRAM_MIN, DEFAULT_NGRAM_MAX)
}

pub fn phrase_feature_with_ngrams<P: EmbeddingProvider + ?Sized>(
    response_text: &str,
    phrase: &RubricPhrase,
    provider: &P,
    n_min: usize,
    n_max: usize,
) -> Result<f64> {
    let tokens = tokenize(response_text);
    if tokens.is_empty() {
        return Ok(0.0);
    }
    // The phrase goes through the same normalization as response n-grams so
    // a verbatim inclusion compares identical strings.
    let phrase_normalized = tokenize(&phrase.text).join(" ");
    let phrase_vec = provider.embed(&phrase_normalized).map_err(|e| Error::EmbedFailed {
        ngram: phrase_normalized.clone(),
        source: Box::new(e),
    })?;
    let mut best = f64::NEG_INFINITY;
    for ngram in extract_ngrams(&tokens, n_min, n_max) {
        let v = provider.embed(&ngram).map_err(|e| Error::EmbedFailed {
            ngram: ngram.clone(),
            source: Box::new(e),
        })?;
        let sim = cosine_similarity(&v, &phrase_vec).map_err(|e| Error::EmbedFailed {
            ngram,
            source: Box::new(e),
        })?;
        best = best.max(sim);
    }
    Ok(best)
}

/// Row i, column j = `phrase_feature(response_i, phrase_j)`. Column order
/// follows the phrase list, row order the corpus.
pub fn featurize_corpus<P: EmbeddingProvider + ?Sized>(
    corpus: &Corpus,
    phrases: &[RubricPhrase],
    provider: &P,
) -> Result<FeatureMatrix> {
    featurize_corpus_with_ngrams(corpus, phrases, provider, DEFAULT_NGRAM_MIN, DEFAULT_NGRAM_MAX)
}

pub fn featurize_corpus_with_ngrams<P: EmbeddingProvider + ?Sized>(
    corpus: &Corpus,
    phrases: &[RubricPhrase],
    provider: &P,
    n_min: usize,
    n_max: usize,
) -> Result<FeatureMatrix> {
    if phrases.is_empty() {
        return Err(Error::InvalidConfig("phrase list is empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for p in phrases {
        if !seen.insert(p.text.as_str()) {
            return Err(Error::DuplicatePhrase(p.text.clone()));
        }
    }
    let mut values = Vec::with_capacity(corpus.len());
    for response in &corpus.responses {
        let mut row = Vec::with_capacity(phrases.len());
        for phrase in phrases {
            row.push(phrase_feature_with_ngrams(
                &response.text,
                phrase,
                provider,
                n_min,
                n_max,
            )?);
        }
        values.push(row);
    }
    Ok(FeatureMatrix {
        values,
        feature_names: phrases.iter().map(|p| p.text.clone()).collect(),
        response_ids: corpus.responses.iter().map(|r| r.id.clone()).collect(),
    })
}

/// Loads a phrase file: a JSON array of `{"text": …, "kind": "phrase"|"keyword"}`.
pub fn load_phrases(path: &Path) -> Result<Vec<RubricPhrase>> {
    let data = std::fs::read_to_string(path)?;
    let phrases: Vec<RubricPhrase> = serde_json::from_str(&data)?;
    for p in &phrases {
        if p.text.trim().is_empty() {
            return Err(Error::Data("phrase with empty text".into()));
        }
    }
    Ok(phrases)
}

/// Writes a feature matrix as CSV: `response_id` then one column per feature.
pub fn save_feature_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["response_id".to_string()];
    header.extend(matrix.feature_names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::Data(e.to_string()))?;
    for (id, row) in matrix.response_ids.iter().zip(&matrix.values) {
        let mut record = vec![id.clone()];
        record.extend(row.iter().map(|v| format!("{v}")));
        writer
            .write_record(&record)
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes texts missed by an embedding cache, one per line.
pub fn save_cache_misses(misses: &[String], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for text in misses {
        writeln!(file, "{}", serde_json::to_string(&serde_json::json!({ "text": text }))?)?;
    }
    Ok(())
}
