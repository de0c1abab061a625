//! N-gram tf-idf featurization.
//!
//! Documents are bags of unigram/bigram counts. A [`Vocabulary`] fixes the
//! feature space: the `max_features` terms with highest document frequency,
//! smoothed inverse document frequencies, and a stable term-to-index map.
//! [`vectorize`] turns a document into an L2-normalized tf-idf
//! [`SparseVector`].
//!
//! The exact variant is pinned so tests can assert values:
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over `N` documents, term weight
//! `count(t) * idf(t)`, then L2 document normalization. Term selection is by
//! document frequency with lexicographic tie-break.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::data::SparseVector;
use crate::error::{Error, Result};

/// A document as a bag of token counts. `BTreeMap` keeps iteration order
/// deterministic.
pub type TokenCounts = BTreeMap<String, u32>;

/// N-gram range used throughout: unigrams and bigrams.
pub const NGRAM_RANGE: (usize, usize) = (1, 2);

/// Fixed tf-idf feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    term_to_index: HashMap<String, usize>,
    /// Term for each index; parallel to `idf`.
    terms: Vec<String>,
    idf: Vec<f64>,
    max_features: usize,
    ngram_range: (usize, usize),
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }
}

/// Lowercased whitespace tokens followed by adjacent bigrams joined with an
/// underscore, in document order.
///
/// `"a b c"` tokenizes to `[a, b, c, a_b, b_c]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let unigrams: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let bigrams: Vec<String> = unigrams
        .windows(2)
        .map(|w| format!("{}_{}", w[0], w[1]))
        .collect();
    let mut tokens = unigrams;
    tokens.extend(bigrams);
    tokens
}

/// Token counts of raw text, via [`tokenize`].
pub fn counts_from_text(text: &str) -> TokenCounts {
    let mut counts = TokenCounts::new();
    for tok in tokenize(text) {
        *counts.entry(tok).or_insert(0) += 1;
    }
    counts
}

/// Build a vocabulary from a corpus of token-count documents.
///
/// Selects the `max_features` terms with highest document frequency, ties
/// broken by lexicographic term order; indices follow the selection order.
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn build_vocab(corpus: &[TokenCounts], max_features: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidData("empty corpus".into()));
    }
    if max_features == 0 {
        return Err(Error::InvalidData("max_features must be at least 1".into()));
    }

    // Document frequency; BTreeMap gives term-ascending iteration, so a
    // stable sort by descending df leaves ties lexicographic.
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for term in doc.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by_key(|&(_, df)| std::cmp::Reverse(df));
    ranked.truncate(max_features);

    let n = corpus.len() as f64;
    let mut term_to_index = HashMap::with_capacity(ranked.len());
    let mut terms = Vec::with_capacity(ranked.len());
    let mut idf = Vec::with_capacity(ranked.len());
    for (i, (term, dfreq)) in ranked.into_iter().enumerate() {
        term_to_index.insert(term.to_string(), i);
        terms.push(term.to_string());
        idf.push(((1.0 + n) / (1.0 + dfreq as f64)).ln() + 1.0);
    }

    Ok(Vocabulary {
        term_to_index,
        terms,
        idf,
        max_features,
        ngram_range: NGRAM_RANGE,
    })
}

/// Tf-idf vector of a document: `count(t) * idf(t)` for in-vocabulary terms,
/// L2-normalized when nonzero. Out-of-vocabulary terms are dropped.
pub fn vectorize(doc: &TokenCounts, vocab: &Vocabulary) -> SparseVector {
    let mut entries: Vec<(usize, f64)> = doc
        .iter()
        .filter_map(|(term, &count)| {
            vocab
                .index_of(term)
                .map(|i| (i, count as f64 * vocab.idf(i)))
        })
        .collect();
    entries.sort_unstable_by_key(|&(i, _)| i);

    let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    SparseVector::new(entries).expect("tf-idf entries are sorted, distinct, and positive")
}

/// Persist a vocabulary as `term<TAB>index<TAB>idf` lines, one per term in
/// index order, with idf printed at nine significant digits.
pub fn save_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..vocab.len() {
        let term = vocab.term(i);
        if term.contains('\t') || term.contains('\n') {
            return Err(Error::InvalidData(format!(
                "term {term:?} contains separator characters"
            )));
        }
        out.push_str(&format!("{}\t{}\t{:.8e}\n", term, i, vocab.idf(i)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a vocabulary written by [`save_vocabulary`].
pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut terms = Vec::new();
    let mut idf = Vec::new();
    let mut term_to_index = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut parts = line.split('\t');
        let (term, index, value) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(i), Some(v), None) => (t, i, v),
            _ => return Err(Error::parse(path, lineno, "expected term<TAB>index<TAB>idf")),
        };
        let index: usize = index
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid index {index:?}")))?;
        if index != terms.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("index {index} out of order, expected {}", terms.len()),
            ));
        }
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("invalid idf {value:?}")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::parse(path, lineno, "idf must be finite and nonnegative"));
        }
        term_to_index.insert(term.to_string(), index);
        terms.push(term.to_string());
        idf.push(value);
    }
    if terms.is_empty() {
        return Err(Error::parse(path, 0, "empty vocabulary file"));
    }
    let max_features = terms.len();
    Ok(Vocabulary {
        term_to_index,
        terms,
        idf,
        max_features,
        ngram_range: NGRAM_RANGE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(pairs: &[(&str, u32)]) -> TokenCounts {
        pairs.iter().map(|&(t, c)| (t.to_string(), c)).collect()
    }

    #[test]
    fn tokenize_unigrams_then_bigrams() {
        assert_eq!(tokenize("Good movie"), vec!["good", "movie", "good_movie"]);
        assert_eq!(tokenize("a b c"), vec!["a", "b", "c", "a_b", "b_c"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn single_document_idf_is_one() {
        // N = 1 and df = 1 force idf = ln(2/2) + 1 = 1 for every term.
        let vocab = build_vocab(&[doc(&[("a", 3), ("b", 1)])], 10).unwrap();
        for i in 0..vocab.len() {
            assert_eq!(vocab.idf(i), 1.0);
        }
    }

    #[test]
    fn two_document_idf_values() {
        let corpus = vec![doc(&[("both", 1), ("one", 2)]), doc(&[("both", 5)])];
        let vocab = build_vocab(&corpus, 10).unwrap();
        let idf_both = vocab.idf(vocab.index_of("both").unwrap());
        let idf_one = vocab.idf(vocab.index_of("one").unwrap());
        assert!((idf_both - 1.0).abs() < 1e-12);
        let expected = (3.0f64 / 2.0).ln() + 1.0; // ≈ 1.405465
        assert!((idf_one - expected).abs() < 1e-12);
        assert!((idf_one - 1.405465).abs() < 1e-6);
    }

    #[test]
    fn vocabulary_capped_at_max_features() {
        // 7000 distinct terms across the corpus, cap at 5000.
        let corpus: Vec<TokenCounts> = (0..70)
            .map(|d| {
                (0..100)
                    .map(|t| (format!("term{:05}", d * 100 + t), 1u32))
                    .collect()
            })
            .collect();
        let vocab = build_vocab(&corpus, 5000).unwrap();
        assert_eq!(vocab.len(), 5000);
        // All df ties at 1, so selection is the lexicographically first 5000.
        assert_eq!(vocab.term(0), "term00000");
        assert!(vocab.index_of("term04999").is_some());
        assert!(vocab.index_of("term05000").is_none());
    }

    #[test]
    fn selection_prefers_document_frequency() {
        let corpus = vec![
            doc(&[("rare", 10), ("common", 1)]),
            doc(&[("common", 1)]),
            doc(&[("common", 1)]),
        ];
        let vocab = build_vocab(&corpus, 1).unwrap();
        // df(common) = 3 beats df(rare) = 1 despite the counts.
        assert_eq!(vocab.len(), 1);
        assert!(vocab.index_of("common").is_some());
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_vocab(&[], 5).is_err());
    }

    #[test]
    fn vectorize_drops_oov_and_normalizes() {
        let vocab = build_vocab(&[doc(&[("a", 1), ("b", 1)])], 10).unwrap();

        let empty = vectorize(&doc(&[("zzz", 4)]), &vocab);
        assert!(empty.entries().is_empty());

        let unit = vectorize(&doc(&[("a", 1)]), &vocab);
        assert_eq!(unit.entries().len(), 1);
        assert!((unit.entries()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vectorize_matches_hand_normalization() {
        // idf(a) = 1 (in both docs), idf(b) = ln(3/2) + 1 (in one doc).
        let corpus = vec![doc(&[("a", 1), ("b", 1)]), doc(&[("a", 2)])];
        let vocab = build_vocab(&corpus, 10).unwrap();
        let v = vectorize(&doc(&[("a", 2), ("b", 1)]), &vocab);

        let wa = 2.0 * 1.0;
        let wb = 1.0 * ((3.0f64 / 2.0).ln() + 1.0);
        let norm = (wa * wa + wb * wb).sqrt();
        let mut got: Vec<(usize, f64)> = v.entries().to_vec();
        got.sort_by(|x, y| y.1.total_cmp(&x.1)); // weight-descending: a then b
        assert!((got[0].1 - wa / norm).abs() < 1e-12);
        assert!((got[1].1 - wb / norm).abs() < 1e-12);
        assert!((got[0].1 - 0.818200).abs() < 1e-3);
        assert!((got[1].1 - 0.574934).abs() < 1e-3);
    }

    #[test]
    fn build_is_deterministic_and_order_independent() {
        let a = doc(&[("x", 1), ("y", 2)]);
        let b = doc(&[("y", 1), ("z", 3)]);
        let v1 = build_vocab(&[a.clone(), b.clone()], 10).unwrap();
        let v2 = build_vocab(&[a.clone(), b.clone()], 10).unwrap();
        assert_eq!(v1, v2);

        let v3 = build_vocab(&[b, a.clone()], 10).unwrap();
        // Same selection and idf values regardless of corpus order.
        for i in 0..v1.len() {
            let t = v1.term(i);
            let j = v3.index_of(t).unwrap();
            assert_eq!(v1.idf(i), v3.idf(j));
        }
        assert_eq!(vectorize(&a, &v1).entries().len(), vectorize(&a, &v3).entries().len());
    }

    #[test]
    fn vectorize_output_is_unit_norm_or_empty() {
        use proptest::prelude::*;
        let term = |i: u64| format!("t{i}");
        proptest!(ProptestConfig::with_cases(64), |(
            corpus_terms in proptest::collection::vec(0u64..30, 1..20),
            doc_terms in proptest::collection::vec((0u64..40, 1u32..5), 0..15),
        )| {
            let corpus: Vec<TokenCounts> = corpus_terms
                .chunks(3)
                .map(|c| c.iter().map(|&t| (term(t), 1u32)).collect())
                .collect();
            let vocab = build_vocab(&corpus, 10).unwrap();
            let doc: TokenCounts = doc_terms.iter().map(|&(t, c)| (term(t), c)).collect();
            let v = vectorize(&doc, &vocab);
            if v.entries().is_empty() {
                prop_assert_eq!(v.l2_norm(), 0.0);
            } else {
                prop_assert!((v.l2_norm() - 1.0).abs() < 1e-9);
            }
        });
    }

    #[test]
    fn vocabulary_round_trip_is_stable() {
        let corpus = vec![doc(&[("alpha", 2), ("beta", 1)]), doc(&[("alpha", 1)])];
        let vocab = build_vocab(&corpus, 10).unwrap();
        let dir = std::env::temp_dir().join(format!("triboot-vocab-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("vocab.tsv");

        save_vocabulary(&vocab, &path).unwrap();
        let loaded = load_vocabulary(&path).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();
        save_vocabulary(&loaded, &path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2, "second save must be byte-identical");

        // Vectorization under the loaded vocabulary is bit-stable across
        // further round trips.
        let reloaded = load_vocabulary(&path).unwrap();
        let d = doc(&[("alpha", 3), ("beta", 2)]);
        assert_eq!(vectorize(&d, &loaded), vectorize(&d, &reloaded));
        std::fs::remove_dir_all(&dir).ok();
    }
}
