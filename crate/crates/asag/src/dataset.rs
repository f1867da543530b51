//! Graded response corpora and deterministic stratified fold plans.
//!
//! A [`Corpus`] is loaded from CSV (`id,text,rating` header, RFC-4180
//! quoting). [`make_5x2_folds`] produces five independent stratified 50/50
//! splits for the twofold cross-validation protocol; identical seeds give
//! byte-identical plans.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{derive_seed, Error, Result};

/// One student answer with its human rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub text: String,
    pub rating: i32,
}

/// A rated response collection with an inclusive rating range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub responses: Vec<Response>,
    pub rating_min: i32,
    pub rating_max: i32,
}

impl Corpus {
    pub fn new(responses: Vec<Response>, rating_min: i32, rating_max: i32) -> Result<Self> {
        if rating_max - rating_min + 1 < 2 {
            return Err(Error::InvalidConfig(format!(
                "rating range [{rating_min}, {rating_max}] has fewer than 2 classes"
            )));
        }
        if responses.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for (i, r) in responses.iter().enumerate() {
            if r.text.trim().is_empty() {
                return Err(Error::EmptyText { row: i + 1 });
            }
            if r.rating < rating_min || r.rating > rating_max {
                return Err(Error::RatingOutOfRange {
                    row: i + 1,
                    rating: r.rating,
                    min: rating_min,
                    max: rating_max,
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId {
                    row: i + 1,
                    id: r.id.clone(),
                });
            }
        }
        Ok(Self {
            responses,
            rating_min,
            rating_max,
        })
    }

    /// Number of rating classes, `rating_max - rating_min + 1`.
    pub fn num_classes(&self) -> usize {
        (self.rating_max - self.rating_min + 1) as usize
    }

    /// Zero-based class labels aligned with `responses`.
    pub fn labels(&self) -> Vec<usize> {
        self.responses
            .iter()
            .map(|r| (r.rating - self.rating_min) as usize)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// One twofold split: two disjoint id sets covering the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPair {
    pub fold_a: Vec<String>,
    pub fold_b: Vec<String>,
}

/// Five stratified twofold splits derived from one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub iterations: Vec<FoldPair>,
}

/// Parses a `id,text,rating` CSV into a corpus. Row order is preserved;
/// every malformed row is reported with its 1-based data row number.
pub fn load_corpus(path: &Path, rating_min: i32, rating_max: i32) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers().map_err(|e| Error::MalformedRow {
        row: 0,
        msg: e.to_string(),
    })?;
    let expected = ["id", "text", "rating"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::MalformedRow {
            row: 0,
            msg: format!("header must be `id,text,rating`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut responses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let rating: i32 = record[2].trim().parse().map_err(|_| Error::MalformedRow {
            row,
            msg: format!("rating `{}` is not an integer", &record[2]),
        })?;
        if rating < rating_min || rating > rating_max {
            return Err(Error::RatingOutOfRange {
                row,
                rating,
                min: rating_min,
                max: rating_max,
            });
        }
        responses.push(Response {
            id: record[0].to_string(),
            text: record[1].to_string(),
            rating,
        });
    }
    Corpus::new(responses, rating_min, rating_max)
}

/// Writes a corpus back out in the same CSV schema.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer
        .write_record(["id", "text", "rating"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for r in &corpus.responses {
        writer
            .write_record([r.id.as_str(), r.text.as_str(), &r.rating.to_string()])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Builds five stratified 50/50 splits. Iteration `i` draws from an RNG
/// stream derived from `(seed, i)`, so iterations are independent but the
/// whole plan is reproducible from the seed alone.
pub fn make_5x2_folds(corpus: &Corpus, seed: u64) -> Result<FoldPlan> {
    // Group ids per rating class, in corpus order.
    let mut by_class: Vec<(i32, Vec<&str>)> = (corpus.rating_min..=corpus.rating_max)
        .map(|c| (c, Vec::new()))
        .collect();
    for r in &corpus.responses {
        by_class[(r.rating - corpus.rating_min) as usize]
            .1
            .push(r.id.as_str());
    }
    for (class, ids) in &by_class {
        if !ids.is_empty() && ids.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: *class,
                count: ids.len(),
            });
        }
    }

    let mut iterations = Vec::with_capacity(5);
    for iter in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, iter));
        let mut fold_a = Vec::new();
        let mut fold_b = Vec::new();
        for (_, ids) in &by_class {
            let mut shuffled: Vec<&str> = ids.clone();
            shuffled.shuffle(&mut rng);
            // Alternate the rounding direction per class so neither fold
            // systematically collects the odd leftovers.
            let half = shuffled.len() / 2;
            let cut = if shuffled.len() % 2 == 1 && fold_a.len() > fold_b.len() {
                half
            } else {
                shuffled.len() - half
            };
            for (k, id) in shuffled.iter().enumerate() {
                if k < cut {
                    fold_a.push(id.to_string());
                } else {
                    fold_b.push(id.to_string());
                }
            }
        }
        fold_a.sort_unstable();
        fold_b.sort_unstable();
        iterations.push(FoldPair { fold_a, fold_b });
    }
    Ok(FoldPlan { seed, iterations })
}
