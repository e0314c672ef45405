//! Document ingestion: sentence splitting, embedding-table parsing, span
//! embedding, and pairwise cost construction.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::CostMatrix;

/// Tokens that end with a period without ending a sentence. Compared
/// lowercase against the token ending at a candidate boundary.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "no.", "vs.",
    "etc.", "e.g.", "i.e.", "cf.", "fig.", "al.", "u.s.", "u.k.", "inc.",
    "ltd.", "co.",
];

/// An ordered set of text spans (sentences) from one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanSet {
    spans: Vec<String>,
    source_id: String,
}

impl SpanSet {
    pub fn new(spans: Vec<String>, source_id: impl Into<String>) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::InvalidInput("span set needs at least one span".into()));
        }
        if spans.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::InvalidInput("spans must be non-empty after trimming".into()));
        }
        Ok(SpanSet {
            spans,
            source_id: source_id.into(),
        })
    }

    pub fn spans(&self) -> &[String] {
        &self.spans
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// True when position `i` (holding `.`, `!` or `?`) ends a sentence:
/// followed by whitespace and then an uppercase letter, digit, or opening
/// quote; for periods, the token ending here must not be a known
/// abbreviation or a single-letter initial.
fn is_sentence_boundary(chars: &[char], i: usize) -> bool {
    let mut j = i + 1;
    if j >= chars.len() || !chars[j].is_whitespace() {
        return false;
    }
    while j < chars.len() && chars[j].is_whitespace() {
        j += 1;
    }
    let Some(&next) = chars.get(j) else {
        return false;
    };
    let opens_sentence = next.is_uppercase()
        || next.is_numeric()
        || matches!(next, '"' | '\'' | '\u{201C}' | '\u{2018}' | '«');
    if !opens_sentence {
        return false;
    }
    if chars[i] == '.' {
        let mut s = i;
        while s > 0 && (chars[s - 1].is_alphanumeric() || chars[s - 1] == '.') {
            s -= 1;
        }
        let token: String = chars[s..=i].iter().collect::<String>().to_lowercase();
        if ABBREVIATIONS.contains(&token.as_str()) {
            return false;
        }
        // Single-letter initials: "J. Smith".
        let mut token_chars = token.chars();
        if let (Some(first), Some('.'), None) =
            (token_chars.next(), token_chars.next(), token_chars.next())
        {
            if first.is_alphabetic() {
                return false;
            }
        }
    }
    true
}

/// Rule-based sentence splitting: breaks after `.`, `!` or `?` when
/// followed by whitespace and a sentence opener, with an abbreviation
/// guard on periods. Text without any such boundary is one span.
pub fn split_sentences(text: &str, source_id: &str) -> Result<SpanSet> {
    if text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "document {source_id:?} is empty or whitespace-only"
        )));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if (c == '.' || c == '!' || c == '?') && is_sentence_boundary(&chars, i) {
            let span: String = chars[start..=i].iter().collect();
            let span = span.trim();
            if !span.is_empty() {
                spans.push(span.to_string());
            }
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            start = j;
            i = j;
            continue;
        }
        i += 1;
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let tail = tail.trim();
        if !tail.is_empty() {
            spans.push(tail.to_string());
        }
    }
    if spans.is_empty() {
        spans.push(text.trim().to_string());
    }
    SpanSet::new(spans, source_id)
}

/// A token -> vector lookup with a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dimension,
            entries: HashMap::new(),
        })
    }

    /// Inserts a vector; an already-present token keeps its first vector.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Format(format!(
                "vector of length {} in a dimension-{} table",
                vector.len(),
                self.dimension
            )));
        }
        self.entries.entry(token.into()).or_insert(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }
}

/// Parses the common text vector format: an optional `count dim` header
/// line, then one `token v1 ... vd` line per word. The dimension comes
/// from the header or the first row; duplicate tokens keep their first
/// occurrence. Errors carry 1-based line numbers.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut dimension: Option<usize> = None;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_count), Ok(dim)) =
                (fields[0].parse::<usize>(), fields[1].parse::<usize>())
            {
                if dim == 0 {
                    return Err(Error::Format("header declares dimension 0".into()));
                }
                dimension = Some(dim);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: "expected a token followed by vector components".into(),
            });
        }
        let token = fields[0];
        let mut vector = Vec::with_capacity(fields.len() - 1);
        for comp in &fields[1..] {
            let v: f64 = comp.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad float {comp:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite component {comp:?}"),
                });
            }
            vector.push(v);
        }
        match dimension {
            None => dimension = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::Format(format!(
                    "line {line_no}: vector of length {} in a dimension-{d} table",
                    vector.len()
                )));
            }
            Some(_) => {}
        }
        entries.entry(token.to_string()).or_insert(vector);
    }

    let Some(dimension) = dimension else {
        return Err(Error::Format("no embedding rows".into()));
    };
    if entries.is_empty() {
        return Err(Error::Format("no embedding rows".into()));
    }
    Ok(EmbeddingTable { dimension, entries })
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    parse_embeddings(&fs::read_to_string(path)?)
}

/// Mean of in-vocabulary token vectors; `all_oov` marks spans with no
/// vocabulary hit, which embed to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanEmbedding {
    pub vector: Vec<f64>,
    pub all_oov: bool,
}

/// Lowercases, splits on non-alphanumeric characters, and averages the
/// in-vocabulary token vectors. Out-of-vocabulary tokens are skipped; a
/// span with no hits at all yields the zero vector with `all_oov` set.
pub fn embed_span(span: &str, table: &EmbeddingTable) -> SpanEmbedding {
    let mut vector = vec![0.0; table.dimension()];
    let mut hits = 0usize;
    let lowered = span.to_lowercase();
    for word in lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if let Some(v) = table.get(word) {
            for (acc, x) in vector.iter_mut().zip(v) {
                *acc += x;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return SpanEmbedding {
            vector,
            all_oov: true,
        };
    }
    for x in &mut vector {
        *x /= hits as f64;
    }
    SpanEmbedding {
        vector,
        all_oov: false,
    }
}

/// Pairwise cost functions over span vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    /// `1 - cos(x, y)`, in [0, 2].
    CosineDistance,
    /// `-cos(x, y)`, in [-1, 1]; the mixed-sign metric for relaxed one-to-k.
    NegativeCosine,
    /// `||x - y||_2`.
    Euclidean,
    /// `-<x, y>`.
    DotNegative,
}

impl CostMetric {
    pub fn name(&self) -> &'static str {
        match self {
            CostMetric::CosineDistance => "cosine_distance",
            CostMetric::NegativeCosine => "negative_cosine",
            CostMetric::Euclidean => "euclidean",
            CostMetric::DotNegative => "dot_negative",
        }
    }
}

impl std::str::FromStr for CostMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_distance" => Ok(CostMetric::CosineDistance),
            "negative_cosine" => Ok(CostMetric::NegativeCosine),
            "euclidean" => Ok(CostMetric::Euclidean),
            "dot_negative" => Ok(CostMetric::DotNegative),
            other => Err(Error::InvalidInput(format!(
                "unknown metric {other:?} \
                 (expected cosine_distance, negative_cosine, euclidean, or dot_negative)"
            ))),
        }
    }
}

/// Cosine similarity, with zero vectors defined as similarity 0 so that
/// all-OOV spans are maximally uninformative rather than an error.
fn cosine_similarity(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny)
    }
}

fn pair_cost(x: &[f64], y: &[f64], metric: CostMetric) -> f64 {
    match metric {
        CostMetric::CosineDistance => 1.0 - cosine_similarity(x, y),
        CostMetric::NegativeCosine => -cosine_similarity(x, y),
        CostMetric::Euclidean => x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        CostMetric::DotNegative => -x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
    }
}

/// Pairwise costs between two vector sets under the chosen metric.
pub fn cost_matrix(xs: &[Vec<f64>], ys: &[Vec<f64>], metric: CostMetric) -> Result<CostMatrix> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidInput(
            "cost matrix needs at least one vector per side".into(),
        ));
    }
    let dim = xs[0].len();
    for (side, vecs) in [("x", xs), ("y", ys)] {
        for (i, v) in vecs.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "{side}[{i}] has dimension {}, expected {dim}",
                    v.len()
                )));
            }
        }
    }
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for x in xs {
        for y in ys {
            values.push(pair_cost(x, y, metric));
        }
    }
    CostMatrix::new(xs.len(), ys.len(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_the_documented_examples() {
        let one = split_sentences("Hello world.", "d").unwrap();
        assert_eq!(one.spans(), &["Hello world.".to_string()]);

        let three = split_sentences("A? B! C.", "d").unwrap();
        assert_eq!(three.len(), 3);
        assert_eq!(three.spans()[1], "B!");

        let guarded = split_sentences("Dr. Smith left. He returned.", "d").unwrap();
        assert_eq!(
            guarded.spans(),
            &["Dr. Smith left.".to_string(), "He returned.".to_string()]
        );
    }

    #[test]
    fn splitter_edge_cases() {
        // Initials and mid-number periods do not split.
        let s = split_sentences("J. Smith paid 3.50 dollars. Then left.", "d").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.spans()[0], "J. Smith paid 3.50 dollars.");

        // No terminator at all: one span.
        let s = split_sentences("no terminator here", "d").unwrap();
        assert_eq!(s.len(), 1);

        // Lowercase after the period: treated as a continuation.
        let s = split_sentences("see e.g. the appendix. also this.", "d").unwrap();
        assert_eq!(s.len(), 1);

        // Quote openers count as sentence starts.
        let s = split_sentences("He spoke. \"Quoted reply.\"", "d").unwrap();
        assert_eq!(s.len(), 2);

        assert!(split_sentences("   \n\t ", "d").is_err());
    }

    #[test]
    fn span_set_rejects_degenerate_content() {
        assert!(SpanSet::new(vec![], "d").is_err());
        assert!(SpanSet::new(vec!["  ".into()], "d").is_err());
        let ok = SpanSet::new(vec!["a".into()], "doc-7").unwrap();
        assert_eq!(ok.source_id(), "doc-7");
    }

    #[test]
    fn parses_headered_and_headerless_tables() {
        let t = parse_embeddings("2 3\na 1 0 0\nb 0 1 0").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some([1.0, 0.0, 0.0].as_slice()));

        let t = parse_embeddings("a 1 0\nb 0 1").unwrap();
        assert_eq!(t.dimension(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_embeddings("2 3\na 1 0 0\nb 0 x 0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let err = parse_embeddings("a 1 0\nb 1").unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");

        let err = parse_embeddings("lonely").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

        assert!(parse_embeddings("").is_err());
        assert!(parse_embeddings("a inf 0").is_err());
    }

    #[test]
    fn duplicate_tokens_keep_the_first_vector() {
        let t = parse_embeddings("a 1 0\na 0 1").unwrap();
        assert_eq!(t.get("a"), Some([1.0, 0.0].as_slice()));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn embed_span_averages_and_flags_oov() {
        let t = parse_embeddings("a 1 0\nb 0 1").unwrap();
        let e = embed_span("a", &t);
        assert_eq!(e.vector, vec![1.0, 0.0]);
        assert!(!e.all_oov);

        let e = embed_span("A b!", &t);
        assert_eq!(e.vector, vec![0.5, 0.5]);

        let e = embed_span("zzz qqq", &t);
        assert_eq!(e.vector, vec![0.0, 0.0]);
        assert!(e.all_oov);
    }

    #[test]
    fn metric_values_on_unit_vectors() {
        let ex = vec![1.0, 0.0];
        let ey = vec![0.0, 1.0];
        let neg_x = vec![-1.0, 0.0];

        let same = cost_matrix(std::slice::from_ref(&ex), std::slice::from_ref(&ex), CostMetric::CosineDistance).unwrap();
        assert!(same.value(0, 0).abs() < 1e-15);

        let orth = cost_matrix(std::slice::from_ref(&ex), std::slice::from_ref(&ey), CostMetric::CosineDistance).unwrap();
        assert!((orth.value(0, 0) - 1.0).abs() < 1e-15);
        let orth_neg = cost_matrix(std::slice::from_ref(&ex), &[ey], CostMetric::NegativeCosine).unwrap();
        assert!(orth_neg.value(0, 0).abs() < 1e-15);

        let anti = cost_matrix(std::slice::from_ref(&ex), std::slice::from_ref(&neg_x), CostMetric::NegativeCosine).unwrap();
        assert!((anti.value(0, 0) - 1.0).abs() < 1e-15);
        let anti_dist = cost_matrix(std::slice::from_ref(&ex), &[neg_x], CostMetric::CosineDistance).unwrap();
        assert!((anti_dist.value(0, 0) - 2.0).abs() < 1e-15);

        let eucl = cost_matrix(std::slice::from_ref(&ex), &[vec![4.0, 4.0]], CostMetric::Euclidean).unwrap();
        assert!((eucl.value(0, 0) - 5.0).abs() < 1e-15);
        let dot = cost_matrix(&[ex], &[vec![3.0, 7.0]], CostMetric::DotNegative).unwrap();
        assert!((dot.value(0, 0) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_metrics_ignore_positive_scaling_and_zero_vectors() {
        let x = vec![0.3, 0.4];
        let y = vec![0.5, 0.1];
        let base = cost_matrix(std::slice::from_ref(&x), std::slice::from_ref(&y), CostMetric::CosineDistance).unwrap();
        let scaled_x: Vec<f64> = x.iter().map(|v| v * 17.0).collect();
        let scaled = cost_matrix(&[scaled_x], std::slice::from_ref(&y), CostMetric::CosineDistance).unwrap();
        assert!((base.value(0, 0) - scaled.value(0, 0)).abs() < 1e-12);

        let zero = cost_matrix(&[vec![0.0, 0.0]], std::slice::from_ref(&y), CostMetric::CosineDistance).unwrap();
        assert_eq!(zero.value(0, 0), 1.0);
        let zero_neg = cost_matrix(&[vec![0.0, 0.0]], &[y], CostMetric::NegativeCosine).unwrap();
        assert_eq!(zero_neg.value(0, 0), 0.0);
    }

    #[test]
    fn distance_and_negative_cosine_differ_by_one() {
        let xs = vec![vec![0.2, 0.9], vec![1.0, 0.1]];
        let ys = vec![vec![0.4, 0.4], vec![0.0, 1.0], vec![0.7, 0.2]];
        let dist = cost_matrix(&xs, &ys, CostMetric::CosineDistance).unwrap();
        let neg = cost_matrix(&xs, &ys, CostMetric::NegativeCosine).unwrap();
        for (d, n) in dist.values().iter().zip(neg.values()) {
            assert!((d - (n + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_metrics_transpose_cleanly() {
        let xs = vec![vec![0.2, 0.9], vec![1.0, 0.1]];
        let ys = vec![vec![0.4, 0.4], vec![0.0, 1.0], vec![0.7, 0.2]];
        for metric in [
            CostMetric::CosineDistance,
            CostMetric::NegativeCosine,
            CostMetric::Euclidean,
            CostMetric::DotNegative,
        ] {
            let fwd = cost_matrix(&xs, &ys, metric).unwrap();
            let bwd = cost_matrix(&ys, &xs, metric).unwrap();
            assert_eq!(fwd.transpose().values(), bwd.values());
        }
    }

    #[test]
    fn cost_matrix_rejects_mixed_dimensions() {
        let err = cost_matrix(
            &[vec![1.0, 0.0]],
            &[vec![1.0, 0.0, 0.0]],
            CostMetric::Euclidean,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
        assert!(cost_matrix(&[], &[vec![1.0]], CostMetric::Euclidean).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for (name, metric) in [
            ("cosine_distance", CostMetric::CosineDistance),
            ("negative_cosine", CostMetric::NegativeCosine),
            ("euclidean", CostMetric::Euclidean),
            ("dot_negative", CostMetric::DotNegative),
        ] {
            assert_eq!(name.parse::<CostMetric>().unwrap(), metric);
            assert_eq!(metric.name(), name);
            let json = serde_json::to_string(&metric).unwrap();
            assert_eq!(json, format!("\"{name}\""));
        }
        assert!("manhattan".parse::<CostMetric>().is_err());
    }
}
