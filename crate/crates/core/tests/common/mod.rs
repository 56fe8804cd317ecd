//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use compgen::embedding::EmbeddingMatrix;
use compgen::index::IndexBuilder;
use compgen::{ConceptId, ConceptIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random corpus as plain concept lists, one per sample.
pub fn random_corpus<R: Rng>(rng: &mut R, n: usize, v: usize, max_per_sample: usize) -> Vec<Vec<u32>> {
    let ids: Vec<u32> = (0..v as u32).collect();
    (0..n)
        .map(|_| {
            let k = rng.gen_range(0..=max_per_sample.min(v));
            let mut s: Vec<u32> = ids.choose_multiple(rng, k).copied().collect();
            s.sort_unstable();
            s
        })
        .collect()
}

pub fn build_index(corpus: &[Vec<u32>], v: usize) -> ConceptIndex {
    let mut b = IndexBuilder::new(v);
    for (i, sample) in corpus.iter().enumerate() {
        let ids: Vec<ConceptId> = sample.iter().map(|&c| ConceptId(c)).collect();
        b.add(&format!("s{i}"), &ids).unwrap().expect("unique id");
    }
    b.finish()
}

/// Number of samples containing every queried concept, by direct scan.
pub fn scan_count(corpus: &[Vec<u32>], query: &[u32]) -> u64 {
    corpus
        .iter()
        .filter(|s| query.iter().all(|q| s.contains(q)))
        .count() as u64
}

/// Rank by sorting the whole gallery: descending similarity, ascending row
/// on ties; best position over the ground-truth rows.
pub fn full_sort_rank(query: &[f32], gallery: &[Vec<f32>], gt: &[usize]) -> usize {
    let sims: Vec<f64> = gallery
        .iter()
        .map(|g| g.iter().zip(query).map(|(&a, &b)| a as f64 * b as f64).sum())
        .collect();
    let mut order: Vec<usize> = (0..gallery.len()).collect();
    order.sort_by(|&i, &j| sims[j].partial_cmp(&sims[i]).unwrap().then(i.cmp(&j)));
    order
        .iter()
        .position(|r| gt.contains(r))
        .map(|p| p + 1)
        .unwrap()
}

pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Gallery of random unit rows and queries that are noisy copies of the
/// matching gallery row.
pub fn paired_embeddings(seed: u64, rows: usize, dim: usize, noise: f32) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let mut r = rng(seed);
    let gallery: Vec<Vec<f32>> = (0..rows).map(|_| unit_vector(&mut r, dim)).collect();
    let queries: Vec<Vec<f32>> = gallery
        .iter()
        .map(|g| g.iter().map(|&x| x + noise * r.gen_range(-1.0f32..1.0)).collect())
        .collect();
    (
        EmbeddingMatrix::from_rows(&queries).unwrap(),
        EmbeddingMatrix::from_rows(&gallery).unwrap(),
    )
}

/// Mean log-likelihood of a logistic model.
fn mean_ll(x: &[f64], y: &[bool], b0: f64, b1: f64) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let z = b0 + b1 * xi;
            let log1pexp = z.max(0.0) + (-z.abs()).exp().ln_1p();
            if yi {
                z - log1pexp
            } else {
                -log1pexp
            }
        })
        .sum::<f64>()
        / n
}

/// Reference logistic fit: Nelder-Mead on the mean negative log-likelihood
/// of the standardized feature, mapped back to the raw scale.
pub fn reference_logistic(x: &[f64], y: &[bool]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let f = |p: [f64; 2]| -mean_ll(&z, y, p[0], p[1]);
    let mut simplex = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut values = simplex.map(f);
    for _ in 0..5000 {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() < 1e-15 {
            break;
        }
        let c = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let r = along(-1.0);
        let fr = f(r);
        if fr < values[0] {
            let e = along(-2.0);
            let fe = f(e);
            (simplex[2], values[2]) = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (r, fr);
        } else {
            let k = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fk = f(k);
            if fk < values[2].min(fr) {
                (simplex[2], values[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        (simplex[0][0] + simplex[i][0]) / 2.0,
                        (simplex[0][1] + simplex[i][1]) / 2.0,
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let [a, b] = simplex[0];
    (a - b * mean / sd, b / sd)
}

/// Spearman correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
