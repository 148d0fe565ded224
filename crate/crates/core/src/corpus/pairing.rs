use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::query::distinct_terms;
use crate::head::toy::stable_hash;
use crate::text::normalize_token;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Query-context similarity used by the relevance strategies.
pub trait RelevanceScorer: Sync {
    fn score(&self, query: &[String], docs: &[&[String]]) -> Vec<f64>;
}

/// Okapi BM25 with the document collection being the candidate contexts.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bm25;

impl RelevanceScorer for Bm25 {
    fn score(&self, query: &[String], docs: &[&[String]]) -> Vec<f64> {
        bm25(query, docs)
    }
}

/// BM25 scores with k1 = 1.2, b = 0.75 and idf = ln((n - df + 0.5)/(df + 0.5) + 1),
/// summed over distinct normalized query terms.
pub fn bm25(query: &[String], docs: &[&[String]]) -> Vec<f64> {
    if docs.is_empty() {
        return Vec::new();
    }
    let terms = distinct_terms(query);
    let bags: Vec<HashMap<String, usize>> = docs
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in d.iter() {
                *m.entry(normalize_token(t)).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let idf: Vec<f64> = terms
        .iter()
        .map(|t| {
            let df = bags.iter().filter(|b| b.contains_key(t)).count() as f64;
            ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
        })
        .collect();
    docs.iter()
        .zip(&bags)
        .map(|(d, bag)| {
            let norm = if avgdl > 0.0 { d.len() as f64 / avgdl } else { 0.0 };
            terms
                .iter()
                .zip(&idf)
                .map(|(t, idf)| {
                    let f = *bag.get(t).unwrap_or(&0) as f64;
                    idf * f * (BM25_K1 + 1.0) / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
                })
                .sum()
        })
        .collect()
}

/// Indices of the top `k` scores, ties to the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// `k` distinct indices below `n`, uniformly at random.
pub fn sample_indices(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(rng, k.min(n));
    chosen.to_vec()
}

/// Visits `0..n` in uniformly random order without materializing it,
/// stopping once `accept` has taken `k` items.
pub fn sample_filtered(n: usize, k: usize, rng: &mut ChaCha8Rng, mut accept: impl FnMut(usize) -> bool) -> Vec<usize> {
    let mut swaps: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::new();
    for i in 0..n {
        if out.len() == k {
            break;
        }
        let j = rng.random_range(i..n);
        let vj = *swaps.get(&j).unwrap_or(&j);
        let vi = *swaps.get(&i).unwrap_or(&i);
        swaps.insert(j, vi);
        if accept(vj) {
            out.push(vj);
        }
    }
    out
}

/// L2-normalized hashed bag of words.
pub fn hashed_bow(tokens: &[String], dim: usize) -> Vec<f64> {
    let dim = dim.max(1);
    let mut v = vec![0.0; dim];
    for t in tokens {
        let n = normalize_token(t);
        if !n.is_empty() {
            v[(stable_hash(&n) % dim as u64) as usize] += 1.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub const KMEANS_ITERATIONS: usize = 50;

/// Lloyd's k-means from `k` seeded distinct starting points. Returns the
/// cluster of every vector; empty clusters keep their previous centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<f64>>) {
    let k = k.min(vectors.len());
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut centroids: Vec<Vec<f64>> =
        sample_indices(vectors.len(), k, rng).into_iter().map(|i| vectors[i].clone()).collect();
    let nearest = |v: &[f64], cs: &[Vec<f64>]| {
        (0..cs.len()).min_by(|&a, &b| sq_dist(v, &cs[a]).total_cmp(&sq_dist(v, &cs[b])).then(a.cmp(&b))).unwrap()
    };
    let mut assign: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
    for _ in 0..KMEANS_ITERATIONS {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> =
                vectors.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(v, _)| v).collect();
            if members.is_empty() {
                continue;
            }
            for (d, x) in centroid.iter_mut().enumerate() {
                *x = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            }
        }
        let next: Vec<usize> = vectors.iter().map(|v| nearest(v, &centroids)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    (assign, centroids)
}

/// One representative per non-empty cluster: the member nearest its centroid.
pub fn cluster_representatives(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (assign, centroids) = kmeans(vectors, k, rng);
    (0..centroids.len())
        .filter_map(|c| {
            (0..vectors.len()).filter(|&i| assign[i] == c).min_by(|&a, &b| {
                sq_dist(&vectors[a], &centroids[c]).total_cmp(&sq_dist(&vectors[b], &centroids[c])).then(a.cmp(&b))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bm25_by_hand() {
        let docs: Vec<Vec<String>> = ["a b", "a a c", "c d e f", "b b b", "e"].iter().map(|s| toks(s)).collect();
        let refs: Vec<&[String]> = docs.iter().map(|d| d.as_slice()).collect();
        let s = bm25(&toks("a b"), &refs);
        // n = 5, avgdl = 13/5; df(a) = 2, df(b) = 2
        let idf = (3.5f64 / 2.5 + 1.0).ln();
        let part = |f: f64, dl: f64| idf * f * 2.2 / (f + 1.2 * (0.25 + 0.75 * dl / 2.6));
        let want = [part(1.0, 2.0) * 2.0, part(2.0, 3.0), 0.0, part(3.0, 3.0), 0.0];
        for (g, w) in s.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert_eq!(top_k(&s, 10), vec![0, 3, 1, 2, 4]);
    }

    #[test]
    fn sampling_is_seeded_and_distinct() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = sample_indices(25, 10, &mut r1);
        assert_eq!(a, sample_indices(25, 10, &mut r2));
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 10);
        assert_eq!(sample_indices(4, 10, &mut r1).len(), 4);
    }

    #[test]
    fn filtered_sampling_visits_everything_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut all = sample_filtered(30, 100, &mut rng, |_| true);
        all.sort();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        let evens = sample_filtered(30, 10, &mut rng, |i| i % 2 == 0);
        assert_eq!(evens.len(), 10);
        assert!(evens.iter().all(|i| i % 2 == 0));
        assert!(sample_filtered(30, 10, &mut rng, |_| false).is_empty());
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut vs = Vec::new();
        for k in 0..5 {
            vs.push(vec![0.0 + k as f64 * 0.01, 0.0]);
            vs.push(vec![10.0 + k as f64 * 0.01, 10.0]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = cluster_representatives(&vs, 2, &mut rng);
        assert_eq!(reps.len(), 2);
        assert_ne!(vs[reps[0]][0] < 5.0, vs[reps[1]][0] < 5.0);
    }

    #[test]
    fn hashed_bow_is_unit_length() {
        let v = hashed_bow(&toks("a b c a"), 16);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(hashed_bow(&toks(". ,"), 16).iter().all(|&x| x == 0.0));
    }
}
