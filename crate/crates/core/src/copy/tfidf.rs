use std::collections::HashMap;

use crate::corpus::{tokenize, Corpus};

/// L2-normalized sparse vector, entries sorted by term id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dot product by merge join. On unit vectors this is the cosine similarity.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Term ids by descending weight, ties broken by term id.
    pub fn terms_by_weight(&self) -> Vec<(u32, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        v
    }
}

/// Per-article TF-IDF vectors over article bodies, aligned with `corpus.articles()`.
#[derive(Debug, Clone)]
pub struct TfIdfVectors {
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub vectors: Vec<SparseVector>,
}

/// Raw term counts, smoothed idf `ln((1 + N) / (1 + df)) + 1`, then L2 normalization.
///
/// Bodies without tokens get the zero vector, which matches nothing.
pub fn vectorize_articles(corpus: &Corpus) -> TfIdfVectors {
    let mut term_ids: HashMap<String, u32> = HashMap::new();
    let mut vocabulary = Vec::new();
    let mut counts: Vec<Vec<(u32, u32)>> = Vec::with_capacity(corpus.len());
    let mut df: Vec<u32> = Vec::new();

    for article in corpus.articles() {
        let mut local: HashMap<u32, u32> = HashMap::new();
        for tok in tokenize(&article.body) {
            let id = *term_ids.entry(tok).or_insert_with_key(|k| {
                vocabulary.push(k.clone());
                df.push(0);
                (vocabulary.len() - 1) as u32
            });
            *local.entry(id).or_insert(0) += 1;
        }
        let mut local: Vec<(u32, u32)> = local.into_iter().collect();
        local.sort_unstable();
        for &(id, _) in &local {
            df[id as usize] += 1;
        }
        counts.push(local);
    }

    let n = corpus.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let vectors = counts
        .into_iter()
        .map(|local| {
            let mut entries: Vec<(u32, f64)> =
                local.into_iter().map(|(id, c)| (id, c as f64 * idf[id as usize])).collect();
            let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for e in &mut entries {
                    e.1 /= norm;
                }
            }
            SparseVector { entries }
        })
        .collect();
    TfIdfVectors { vocabulary, idf, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::article;

    #[test]
    fn identical_and_disjoint_bodies() {
        let c = Corpus::from_articles(vec![
            article("1", "a", "masks work well", 1),
            article("2", "b", "masks work well", 2),
            article("3", "c", "vaccine trial results", 3),
        ])
        .unwrap();
        let v = vectorize_articles(&c);
        assert!((v.vectors[0].dot(&v.vectors[1]) - 1.0).abs() < 1e-12);
        assert_eq!(v.vectors[0].dot(&v.vectors[2]), 0.0);
    }

    #[test]
    fn hand_computed_two_document_case() {
        // N = 2, df(a) = df(b) = 2, so idf = ln(3/3) + 1 = 1 for both terms.
        // "a a b" -> (2, 1) / sqrt(5); "a b" -> (1, 1) / sqrt(2).
        // cos = (2 + 1) / (sqrt(5) * sqrt(2)) = 3 / sqrt(10).
        let expected = 3.0 / 10f64.sqrt();
        let c = Corpus::from_articles(vec![article("1", "x", "a a b", 1), article("2", "y", "a b", 2)]).unwrap();
        let v = vectorize_articles(&c);
        assert!((v.vectors[0].dot(&v.vectors[1]) - expected).abs() < 1e-9);
        assert_eq!(v.idf, vec![1.0, 1.0]);
    }

    #[test]
    fn hand_computed_idf_with_rare_term() {
        // three docs, "c" only in doc 1: idf(c) = ln(4/2) + 1, idf(a) = ln(4/4) + 1 = 1
        let c = Corpus::from_articles(vec![
            article("1", "x", "a c", 1),
            article("2", "y", "a", 2),
            article("3", "z", "a", 3),
        ])
        .unwrap();
        let v = vectorize_articles(&c);
        let wc = 2f64.ln() + 1.0;
        let norm = (1.0 + wc * wc).sqrt();
        let expected = 1.0 / norm;
        assert!((v.vectors[0].dot(&v.vectors[1]) - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_body_is_zero_vector() {
        let c = Corpus::from_articles(vec![article("1", "x", "", 1), article("2", "y", "a", 2)]).unwrap();
        let v = vectorize_articles(&c);
        assert!(v.vectors[0].is_zero());
        assert_eq!(v.vectors[0].dot(&v.vectors[1]), 0.0);
    }
}
