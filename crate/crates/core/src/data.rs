//! Datasets for domain-adaptation experiments: sparse feature vectors,
//! labeled/unlabeled collections, corpus ingestion, splitting, bootstrap
//! sampling, and a synthetic two-domain generator.
//!
//! A [`Dataset`] is either fully labeled or fully unlabeled; mixed
//! collections are rejected at construction so the bootstrapping strategies
//! can rely on the distinction. Datasets are immutable once built, and every
//! sampling operation here is a pure function of its inputs and a seed.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{vectorize, TokenCounts, Vocabulary};
use crate::rng::{tags, Rng};

/// Sparse feature vector: strictly increasing indices, no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        for (k, &(idx, w)) in entries.iter().enumerate() {
            if w == 0.0 {
                return Err(Error::InvalidData(format!(
                    "zero-valued entry at feature {idx}"
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite weight at feature {idx}"
                )));
            }
            if k > 0 && entries[k - 1].0 >= idx {
                return Err(Error::InvalidData(
                    "feature indices must be strictly increasing".into(),
                ));
            }
        }
        Ok(SparseVector { entries })
    }

    pub fn empty() -> Self {
        SparseVector { entries: vec![] }
    }

    /// Dense slice to sparse, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        SparseVector::new(
            values
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Largest feature index, or `None` when empty.
    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// One example: features, optional class label, and (for ingested corpora)
/// the original line for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: Option<usize>,
    pub source_text: Option<String>,
}

impl Example {
    pub fn new(features: SparseVector, label: Option<usize>) -> Self {
        Example {
            features,
            label,
            source_text: None,
        }
    }
}

/// Immutable collection of examples sharing a feature space and label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    num_classes: usize,
    dimensionality: usize,
    domain: String,
}

impl Dataset {
    /// Validates dimensionality, label range, and the all-or-none labeling
    /// rule.
    pub fn new(
        examples: Vec<Example>,
        num_classes: usize,
        dimensionality: usize,
        domain: impl Into<String>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidData("num_classes must be positive".into()));
        }
        if dimensionality == 0 {
            return Err(Error::InvalidData("dimensionality must be positive".into()));
        }
        let mut labeled = 0usize;
        for (i, ex) in examples.iter().enumerate() {
            if let Some(max) = ex.features.max_index() {
                if max >= dimensionality {
                    return Err(Error::Shape {
                        what: format!("example {i}"),
                        expected: dimensionality,
                        got: max + 1,
                    });
                }
            }
            match ex.label {
                Some(l) if l >= num_classes => {
                    return Err(Error::InvalidData(format!(
                        "example {i} has label {l}, but dataset has {num_classes} classes"
                    )));
                }
                Some(_) => labeled += 1,
                None => {}
            }
        }
        if labeled != 0 && labeled != examples.len() {
            return Err(Error::InvalidData(format!(
                "mixed dataset: {labeled} of {} examples labeled",
                examples.len()
            )));
        }
        Ok(Dataset {
            examples,
            num_classes,
            dimensionality,
            domain: domain.into(),
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    /// True when every example carries a label (vacuously true when empty).
    pub fn is_labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    /// True when no example carries a label (vacuously true when empty).
    pub fn is_unlabeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_none())
    }

    /// Gold labels of a fully labeled dataset.
    pub fn gold_labels(&self) -> Result<Vec<usize>> {
        self.examples
            .iter()
            .map(|e| {
                e.label
                    .ok_or_else(|| Error::InvalidData("dataset is not labeled".into()))
            })
            .collect()
    }

    fn subset(&self, indices: &[usize], strip_labels: bool, domain: &str) -> Dataset {
        let examples = indices
            .iter()
            .map(|&i| {
                let mut ex = self.examples[i].clone();
                if strip_labels {
                    ex.label = None;
                }
                ex
            })
            .collect();
        Dataset {
            examples,
            num_classes: self.num_classes,
            dimensionality: self.dimensionality,
            domain: domain.to_string(),
        }
    }
}

/// Sizes and seed for carving experiment splits out of a source and a target
/// dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub n_labeled_source: usize,
    pub n_unlabeled_target: usize,
    pub n_validation_target: usize,
    pub seed: u64,
}

/// Index-level split membership; useful when featurization has to happen
/// after the split is known (vocabulary building must not see validation or
/// test text).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub source_labeled: Vec<usize>,
    pub target_unlabeled: Vec<usize>,
    pub target_validation: Vec<usize>,
    pub target_test: Vec<usize>,
}

/// Compute split membership for `n_source` source and `n_target` target
/// examples. Sampling is uniform without replacement under `spec.seed`; the
/// three target splits partition `0..n_target`.
pub fn split_indices(n_source: usize, n_target: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    if spec.n_labeled_source == 0 || spec.n_unlabeled_target == 0 || spec.n_validation_target == 0
    {
        return Err(Error::InvalidData("split counts must be at least 1".into()));
    }
    if spec.n_labeled_source > n_source {
        return Err(Error::Sizing {
            what: "labeled source split".into(),
            required: spec.n_labeled_source,
            available: n_source,
        });
    }
    let target_needed = spec.n_unlabeled_target + spec.n_validation_target;
    if target_needed > n_target {
        return Err(Error::Sizing {
            what: "target splits".into(),
            required: target_needed,
            available: n_target,
        });
    }

    let source_labeled = Rng::from_stream(spec.seed, &[tags::SPLIT_SOURCE])
        .sample_without_replacement(n_source, spec.n_labeled_source);

    let perm = Rng::from_stream(spec.seed, &[tags::SPLIT_TARGET]).permutation(n_target);
    let mut target_unlabeled: Vec<usize> = perm[..spec.n_unlabeled_target].to_vec();
    let mut target_validation: Vec<usize> =
        perm[spec.n_unlabeled_target..target_needed].to_vec();
    let mut target_test: Vec<usize> = perm[target_needed..].to_vec();
    target_unlabeled.sort_unstable();
    target_validation.sort_unstable();
    target_test.sort_unstable();

    Ok(SplitIndices {
        source_labeled,
        target_unlabeled,
        target_validation,
        target_test,
    })
}

/// Carve the experiment splits: labeled source, unlabeled target (labels
/// stripped), labeled target validation, and the remaining target examples as
/// test set.
pub fn make_splits(
    source: &Dataset,
    target: &Dataset,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset, Dataset, Dataset)> {
    if !source.is_labeled() || source.is_empty() {
        return Err(Error::InvalidData(
            "make_splits requires a fully labeled source dataset".into(),
        ));
    }
    if !target.is_labeled() || target.is_empty() {
        return Err(Error::InvalidData(
            "make_splits requires a fully labeled target dataset".into(),
        ));
    }
    let idx = split_indices(source.len(), target.len(), spec)?;
    Ok((
        source.subset(&idx.source_labeled, false, source.domain()),
        target.subset(&idx.target_unlabeled, true, target.domain()),
        target.subset(&idx.target_validation, false, target.domain()),
        target.subset(&idx.target_test, false, target.domain()),
    ))
}

/// Draw `|dataset|` examples uniformly with replacement; deterministic under
/// `seed`.
pub fn bootstrap_sample(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::InvalidData("cannot bootstrap an empty dataset".into()));
    }
    if !dataset.is_labeled() {
        return Err(Error::InvalidData(
            "bootstrap_sample requires a labeled dataset".into(),
        ));
    }
    let mut rng = Rng::from_stream(seed, &[tags::BOOTSTRAP]);
    let n = dataset.len();
    let examples = (0..n)
        .map(|_| dataset.examples[rng.index(n)].clone())
        .collect();
    Ok(Dataset {
        examples,
        num_classes: dataset.num_classes,
        dimensionality: dataset.dimensionality,
        domain: dataset.domain.clone(),
    })
}

/// Class means of the synthetic generator after rotating the target domain by
/// `rotation_degrees` about the origin. Class 0 sits at `(-1, 0)` and class 1
/// at `(+1, 0)` before rotation.
pub fn synth_class_means(rotation_degrees: f64) -> [[f64; 2]; 2] {
    let theta = rotation_degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let rotate = |x: f64, y: f64| [x * cos - y * sin, x * sin + y * cos];
    [rotate(-1.0, 0.0), rotate(1.0, 0.0)]
}

/// Generate a two-class, two-dimensional source/target pair with a controlled
/// domain shift: Gaussian clusters with standard deviation `noise_sigma`
/// around class means at `(±1, 0)`, with the target means rotated about the
/// origin by `rotation_degrees`. Example `i` belongs to class `i % 2`; both
/// datasets come out fully labeled.
pub fn synth_domain_shift(
    n_source: usize,
    n_target: usize,
    rotation_degrees: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_source < 2 || n_target < 2 {
        return Err(Error::InvalidData(
            "synthetic domains need at least 2 examples each".into(),
        ));
    }
    if noise_sigma < 0.0 {
        return Err(Error::InvalidData("noise_sigma must be nonnegative".into()));
    }

    let gen = |n: usize, means: [[f64; 2]; 2], mut rng: Rng, domain: &str| -> Result<Dataset> {
        let examples = (0..n)
            .map(|i| {
                let class = i % 2;
                let x = means[class][0] + noise_sigma * rng.normal();
                let y = means[class][1] + noise_sigma * rng.normal();
                Ok(Example::new(SparseVector::from_dense(&[x, y])?, Some(class)))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(examples, 2, 2, domain)
    };

    let source = gen(
        n_source,
        synth_class_means(0.0),
        Rng::from_stream(seed, &[tags::SYNTH_SOURCE]),
        "synth-source",
    )?;
    let target = gen(
        n_target,
        synth_class_means(rotation_degrees),
        Rng::from_stream(seed, &[tags::SYNTH_TARGET]),
        "synth-target",
    )?;
    Ok((source, target))
}

/// Sentiment label token closing every line of the processed review format.
pub const LABEL_TOKEN: &str = "#label#";
pub const LABEL_NEGATIVE: usize = 0;
pub const LABEL_POSITIVE: usize = 1;

fn parse_processed_line(line: &str) -> std::result::Result<(TokenCounts, usize), String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let (&label_field, token_fields) = fields
        .split_last()
        .ok_or_else(|| "missing label token".to_string())?;

    let label = match label_field.split_once(':') {
        Some((LABEL_TOKEN, "positive")) => LABEL_POSITIVE,
        Some((LABEL_TOKEN, "negative")) => LABEL_NEGATIVE,
        Some((LABEL_TOKEN, other)) => return Err(format!("unknown label {other:?}")),
        _ => return Err("missing label token".to_string()),
    };

    let mut counts = TokenCounts::new();
    for field in token_fields {
        let mut parts = field.split(':');
        let (token, count) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(c), None) => (t, c),
            _ => return Err(format!("malformed token {field:?}")),
        };
        if token.starts_with(LABEL_TOKEN) {
            return Err("label token before end of line".to_string());
        }
        if token.is_empty() {
            return Err(format!("malformed token {field:?}"));
        }
        let count: u32 = count
            .parse()
            .map_err(|_| format!("non-numeric count in {field:?}"))?;
        if count == 0 {
            return Err(format!("zero count in {field:?}"));
        }
        *counts.entry(token.to_string()).or_insert(0) += count;
    }
    Ok((counts, label))
}

fn read_processed(path: &Path) -> Result<(Vec<TokenCounts>, Vec<usize>, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    let mut lines = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let (counts, label) =
            parse_processed_line(line).map_err(|msg| Error::parse(path, lineno + 1, msg))?;
        docs.push(counts);
        labels.push(label);
        lines.push(line.to_string());
    }
    if docs.is_empty() {
        return Err(Error::InvalidData(format!(
            "no examples in {}",
            path.display()
        )));
    }
    Ok((docs, labels, lines))
}

/// Parse a processed review file into token-count documents and labels,
/// without committing to a feature space. Line format: whitespace-separated
/// `token:count` pairs ending with `#label#:positive` or `#label#:negative`.
pub fn load_processed_docs(path: &Path) -> Result<(Vec<TokenCounts>, Vec<usize>)> {
    let (docs, labels, _) = read_processed(path)?;
    Ok((docs, labels))
}

/// Load a processed review file as a labeled dataset.
///
/// With a vocabulary, features are projected into it as L2-normalized tf-idf
/// vectors. Without one, tokens are collected verbatim in first-appearance
/// order and features hold the raw counts; the original line is retained as
/// `source_text` so a vocabulary can be built later.
pub fn load_blitzer_processed(path: &Path, vocab: Option<&Vocabulary>) -> Result<Dataset> {
    let (docs, labels, lines) = read_processed(path)?;
    let domain = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".to_string());

    match vocab {
        Some(vocab) => {
            let examples = docs
                .iter()
                .zip(&labels)
                .map(|(doc, &label)| Example::new(vectorize(doc, vocab), Some(label)))
                .collect();
            Dataset::new(examples, 2, vocab.len().max(1), domain)
        }
        None => {
            let mut token_index: HashMap<&str, usize> = HashMap::new();
            for doc in &docs {
                for token in doc.keys() {
                    let next = token_index.len();
                    token_index.entry(token.as_str()).or_insert(next);
                }
            }
            let dim = token_index.len().max(1);
            let examples = docs
                .iter()
                .zip(&labels)
                .zip(&lines)
                .map(|((doc, &label), line)| {
                    let mut entries: Vec<(usize, f64)> = doc
                        .iter()
                        .map(|(t, &c)| (token_index[t.as_str()], c as f64))
                        .collect();
                    entries.sort_unstable_by_key(|&(i, _)| i);
                    let mut ex = Example::new(SparseVector::new(entries)?, Some(label));
                    ex.source_text = Some(line.clone());
                    Ok(ex)
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::new(examples, 2, dim, domain)
        }
    }
}

/// Persist a dataset as line-delimited records: a header carrying the class
/// count and dimensionality, then one `domain<TAB>label<TAB>index:weight ...`
/// record per example (`-` for missing labels). Weights use the shortest
/// round-trippable float form, so save/load/save is byte-identical.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    if dataset.domain.contains(['\t', '\n']) {
        return Err(Error::InvalidData(format!(
            "domain tag {:?} contains separator characters",
            dataset.domain
        )));
    }
    let mut out = String::new();
    out.push_str(&format!(
        "#dataset\tnum_classes={}\tdimensionality={}\n",
        dataset.num_classes, dataset.dimensionality
    ));
    for ex in &dataset.examples {
        let label = match ex.label {
            Some(l) => l.to_string(),
            None => "-".to_string(),
        };
        let feats = ex
            .features
            .entries()
            .iter()
            .map(|&(i, w)| format!("{i}:{w}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!("{}\t{}\t{}\n", dataset.domain, label, feats));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a dataset written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header record"))?;
    let mut num_classes = None;
    let mut dimensionality = None;
    let mut header_parts = header.split('\t');
    if header_parts.next() != Some("#dataset") {
        return Err(Error::parse(path, 1, "expected #dataset header"));
    }
    for part in header_parts {
        match part.split_once('=') {
            Some(("num_classes", v)) => {
                num_classes = Some(v.parse::<usize>().map_err(|_| {
                    Error::parse(path, 1, format!("invalid num_classes {v:?}"))
                })?);
            }
            Some(("dimensionality", v)) => {
                dimensionality = Some(v.parse::<usize>().map_err(|_| {
                    Error::parse(path, 1, format!("invalid dimensionality {v:?}"))
                })?);
            }
            _ => return Err(Error::parse(path, 1, format!("unexpected header field {part:?}"))),
        }
    }
    let num_classes =
        num_classes.ok_or_else(|| Error::parse(path, 1, "header missing num_classes"))?;
    let dimensionality =
        dimensionality.ok_or_else(|| Error::parse(path, 1, "header missing dimensionality"))?;

    let mut domain: Option<String> = None;
    let mut examples = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let mut parts = line.split('\t');
        let (dom, label, feats) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(l), Some(f), None) => (d, l, f),
            _ => return Err(Error::parse(path, lineno, "expected domain<TAB>label<TAB>features")),
        };
        match &domain {
            None => domain = Some(dom.to_string()),
            Some(d) if d != dom => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("domain {dom:?} differs from {d:?}"),
                ));
            }
            Some(_) => {}
        }
        let label = match label {
            "-" => None,
            l => Some(l.parse::<usize>().map_err(|_| {
                Error::parse(path, lineno, format!("invalid label {l:?}"))
            })?),
        };
        let mut entries = Vec::new();
        for pair in feats.split(' ').filter(|p| !p.is_empty()) {
            let (i, w) = pair
                .split_once(':')
                .ok_or_else(|| Error::parse(path, lineno, format!("malformed entry {pair:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("invalid index {i:?}")))?;
            let w: f64 = w
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("invalid weight {w:?}")))?;
            entries.push((i, w));
        }
        let features = SparseVector::new(entries)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        examples.push(Example::new(features, label));
    }
    Dataset::new(
        examples,
        num_classes,
        dimensionality,
        domain.unwrap_or_default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_labeled(n: usize, domain: &str) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                Example::new(
                    SparseVector::new(vec![(0, (i + 1) as f64)]).unwrap(),
                    Some(i % 2),
                )
            })
            .collect();
        Dataset::new(examples, 2, 2, domain).unwrap()
    }

    #[test]
    fn sparse_vector_rejects_bad_entries() {
        assert!(SparseVector::new(vec![(0, 1.0), (0, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(1, 1.0), (0, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(0, 0.0)]).is_err());
        assert!(SparseVector::new(vec![(0, f64::NAN)]).is_err());
        assert!(SparseVector::new(vec![(0, 1.0), (3, -2.0)]).is_ok());
    }

    #[test]
    fn dataset_rejects_mixed_labels_and_bad_dims() {
        let ex = |label| Example::new(SparseVector::new(vec![(0, 1.0)]).unwrap(), label);
        assert!(Dataset::new(vec![ex(Some(0)), ex(None)], 2, 1, "d").is_err());
        assert!(Dataset::new(vec![ex(Some(5))], 2, 1, "d").is_err());
        let wide = Example::new(SparseVector::new(vec![(9, 1.0)]).unwrap(), Some(0));
        assert!(Dataset::new(vec![wide], 2, 4, "d").is_err());
    }

    #[test]
    fn parse_line_matches_documented_format() {
        let (counts, label) = parse_processed_line("great:2 movie:1 #label#:positive").unwrap();
        assert_eq!(label, LABEL_POSITIVE);
        assert_eq!(counts.len(), 2);
        assert_eq!(counts["great"], 2);
        assert_eq!(counts["movie"], 1);
    }

    #[test]
    fn parse_line_rejects_corruption() {
        assert!(parse_processed_line("").is_err());
        assert!(parse_processed_line("great:2 movie:1").is_err());
        assert!(parse_processed_line("great:two #label#:negative").is_err());
        assert!(parse_processed_line("a:b:2 #label#:negative").is_err());
        assert!(parse_processed_line("great:2 #label#:maybe").is_err());
        assert!(parse_processed_line("#label#:positive great:2 #label#:positive").is_err());
        assert!(parse_processed_line("great:0 #label#:positive").is_err());
    }

    #[test]
    fn load_processed_file_counts_and_errors() {
        let dir = std::env::temp_dir().join(format!("triboot-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();

        let empty = dir.join("empty.processed");
        std::fs::write(&empty, "").unwrap();
        let err = load_processed_docs(&empty).unwrap_err();
        assert!(err.to_string().contains("no examples"));

        // A domain file with 2,000 review lines loads as 2,000 labeled examples.
        let big = dir.join("book.processed");
        let mut text = String::new();
        for i in 0..2000 {
            let label = if i % 2 == 0 { "positive" } else { "negative" };
            text.push_str(&format!("tok{i}:1 shared:2 #label#:{label}\n"));
        }
        std::fs::write(&big, text).unwrap();
        let ds = load_blitzer_processed(&big, None).unwrap();
        assert_eq!(ds.len(), 2000);
        assert!(ds.is_labeled());
        assert_eq!(ds.num_classes(), 2);

        let corrupt = dir.join("corrupt.processed");
        std::fs::write(&corrupt, "ok:1 #label#:positive\nbad line\n").unwrap();
        match load_processed_docs(&corrupt).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn load_with_vocab_projects_features() {
        let dir = std::env::temp_dir().join(format!("triboot-proj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.processed");
        std::fs::write(&path, "good:1 bad:1 #label#:positive\ngood:2 #label#:negative\n").unwrap();

        let (docs, _) = load_processed_docs(&path).unwrap();
        let vocab = crate::features::build_vocab(&docs, 10).unwrap();
        let ds = load_blitzer_processed(&path, Some(&vocab)).unwrap();
        assert_eq!(ds.dimensionality(), vocab.len());
        for ex in ds.examples() {
            assert!((ex.features.l2_norm() - 1.0).abs() < 1e-9);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn splits_have_requested_sizes() {
        let source = tiny_labeled(2000, "src");
        let target = tiny_labeled(6000, "tgt");
        let spec = SplitSpec {
            n_labeled_source: 2000,
            n_unlabeled_target: 2000,
            n_validation_target: 200,
            seed: 5,
        };
        let (l, u, v, t) = make_splits(&source, &target, &spec).unwrap();
        assert_eq!((l.len(), u.len(), v.len(), t.len()), (2000, 2000, 200, 3800));
        assert!(l.is_labeled());
        assert!(u.is_unlabeled());
        assert!(v.is_labeled());
        assert!(t.is_labeled());
    }

    #[test]
    fn splits_deterministic_under_seed() {
        let spec = SplitSpec {
            n_labeled_source: 10,
            n_unlabeled_target: 20,
            n_validation_target: 5,
            seed: 77,
        };
        let a = split_indices(50, 60, &spec).unwrap();
        let b = split_indices(50, 60, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_split_is_sizing_error() {
        let spec = SplitSpec {
            n_labeled_source: 5000,
            n_unlabeled_target: 10,
            n_validation_target: 5,
            seed: 0,
        };
        match split_indices(2000, 100, &spec).unwrap_err() {
            Error::Sizing {
                required,
                available,
                ..
            } => {
                assert_eq!(required, 5000);
                assert_eq!(available, 2000);
            }
            other => panic!("expected sizing error, got {other}"),
        }
    }

    proptest! {
        #[test]
        fn target_splits_partition_indices(
            n_target in 10usize..200,
            seed in 0u64..1000,
        ) {
            let n_u = n_target / 3;
            let n_v = n_target / 4;
            prop_assume!(n_u >= 1 && n_v >= 1);
            let spec = SplitSpec {
                n_labeled_source: 1,
                n_unlabeled_target: n_u,
                n_validation_target: n_v,
                seed,
            };
            let idx = split_indices(10, n_target, &spec).unwrap();
            let mut all: Vec<usize> = idx
                .target_unlabeled
                .iter()
                .chain(&idx.target_validation)
                .chain(&idx.target_test)
                .copied()
                .collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n_target).collect::<Vec<_>>());
        }

        #[test]
        fn bootstrap_preserves_size_and_membership(n in 1usize..60, seed in 0u64..500) {
            let ds = tiny_labeled(n, "d");
            let sample = bootstrap_sample(&ds, seed).unwrap();
            prop_assert_eq!(sample.len(), n);
            for ex in sample.examples() {
                prop_assert!(ds.examples().contains(ex));
            }
        }
    }

    #[test]
    fn bootstrap_of_singleton_repeats_it() {
        let ds = tiny_labeled(1, "d");
        let sample = bootstrap_sample(&ds, 9).unwrap();
        assert_eq!(sample.len(), 1);
        assert_eq!(sample.examples()[0], ds.examples()[0]);
    }

    #[test]
    fn bootstrap_of_2000_keeps_size() {
        let ds = tiny_labeled(2000, "book");
        assert_eq!(bootstrap_sample(&ds, 1).unwrap().len(), 2000);
    }

    #[test]
    fn bootstrap_matches_reference_sampler() {
        // Independent reimplementation of the documented stream: the
        // generator state is derive(seed, BOOTSTRAP), and each draw is
        // next_u64 % n.
        const GOLDEN: u64 = 0x9E3779B97F4A7C15;
        fn mix(mut z: u64) -> u64 {
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        }
        let seed = 424242u64;
        let mut state = mix(seed.wrapping_add(GOLDEN).wrapping_add(mix(tags::BOOTSTRAP)));
        let mut expected = Vec::new();
        for _ in 0..5 {
            state = state.wrapping_add(GOLDEN);
            expected.push((mix(state) % 5) as usize);
        }

        let ds = tiny_labeled(5, "d");
        let sample = bootstrap_sample(&ds, seed).unwrap();
        let got: Vec<usize> = sample
            .examples()
            .iter()
            .map(|ex| ex.features.entries()[0].1 as usize - 1)
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn synth_means_respect_rotation() {
        let base = synth_class_means(0.0);
        assert_eq!(base, [[-1.0, 0.0], [1.0, 0.0]]);

        let flipped = synth_class_means(180.0);
        for c in 0..2 {
            for d in 0..2 {
                assert!((flipped[c][d] + base[c][d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synth_rejects_bad_parameters() {
        assert!(synth_domain_shift(1, 10, 0.0, 0.1, 0).is_err());
        assert!(synth_domain_shift(10, 1, 0.0, 0.1, 0).is_err());
        assert!(synth_domain_shift(10, 10, 0.0, -0.5, 0).is_err());
    }

    #[test]
    fn synth_datasets_are_labeled_2d() {
        let (src, tgt) = synth_domain_shift(10, 14, 30.0, 0.3, 3).unwrap();
        assert_eq!((src.len(), tgt.len()), (10, 14));
        assert!(src.is_labeled() && tgt.is_labeled());
        assert_eq!(src.dimensionality(), 2);
        let (src2, _) = synth_domain_shift(10, 14, 30.0, 0.3, 3).unwrap();
        assert_eq!(src, src2);
    }

    #[test]
    fn rotated_target_degrades_a_source_probe() {
        // Brute-force probe: logistic regression fit by plain gradient
        // descent on dense 2-D points, independent of the model module.
        let (src, tgt) = synth_domain_shift(500, 500, 30.0, 0.3, 11).unwrap();
        let dense = |ds: &Dataset| -> Vec<([f64; 2], usize)> {
            ds.examples()
                .iter()
                .map(|ex| {
                    let mut p = [0.0; 2];
                    for &(i, w) in ex.features.entries() {
                        p[i] = w;
                    }
                    (p, ex.label.unwrap())
                })
                .collect()
        };
        let strain: Vec<_> = dense(&src)[..250].to_vec();
        let sheld: Vec<_> = dense(&src)[250..].to_vec();
        let tall = dense(&tgt);

        let (mut w, mut b) = ([0.0f64; 2], 0.0f64);
        for _ in 0..400 {
            let (mut gw, mut gb) = ([0.0f64; 2], 0.0f64);
            for &(x, y) in &strain {
                let z = w[0] * x[0] + w[1] * x[1] + b;
                let p = 1.0 / (1.0 + (-z).exp());
                let d = p - y as f64;
                gw[0] += d * x[0];
                gw[1] += d * x[1];
                gb += d;
            }
            let lr = 0.1 / strain.len() as f64;
            w[0] -= lr * gw[0];
            w[1] -= lr * gw[1];
            b -= lr * gb;
        }
        let acc = |pts: &[([f64; 2], usize)]| {
            pts.iter()
                .filter(|&&(x, y)| {
                    let p = 1.0 / (1.0 + (-(w[0] * x[0] + w[1] * x[1] + b)).exp());
                    (p > 0.5) == (y == 1)
                })
                .count() as f64
                / pts.len() as f64
        };
        let source_acc = acc(&sheld);
        let target_acc = acc(&tall);
        assert!(
            target_acc < source_acc,
            "expected shift to hurt: source {source_acc}, target {target_acc}"
        );
    }

    #[test]
    fn dataset_round_trip_is_byte_exact() {
        let dir = std::env::temp_dir().join(format!("triboot-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round.ds");

        let examples = vec![
            Example::new(SparseVector::new(vec![(0, 0.25), (3, -1.5)]).unwrap(), Some(1)),
            Example::new(SparseVector::empty(), Some(0)),
            Example::new(
                SparseVector::new(vec![(2, 0.1234567890123)]).unwrap(),
                Some(1),
            ),
        ];
        let ds = Dataset::new(examples, 2, 4, "round").unwrap();
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(ds, loaded);

        let bytes1 = std::fs::read(&path).unwrap();
        save_dataset(&loaded, &path).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);

        // Unlabeled datasets survive too.
        let u = ds.subset(&[0, 1, 2], true, "round");
        let upath = dir.join("u.ds");
        save_dataset(&u, &upath).unwrap();
        assert!(load_dataset(&upath).unwrap().is_unlabeled());
        std::fs::remove_dir_all(&dir).ok();
    }
}
