#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rubsynth::{distance, Fragment, Vec2};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_fragments(rng: &mut ChaCha8Rng, n: usize) -> Vec<Fragment> {
    (0..n)
        .map(|i| {
            let velocity = Vec2::new(
                rng.random_range(-300.0..300.0),
                rng.random_range(-300.0..300.0),
            );
            let loudness: f64 = rng.random_range(0.0..0.2);
            Fragment {
                index: i * 3 + 1,
                velocity,
                loudness,
                ratio: loudness / velocity.norm_sq(),
            }
        })
        .collect()
}

/// Linear scan: distance to every fragment, sorted by (distance, id).
pub fn brute_force_knn(
    fragments: &[Fragment],
    mean_ratio: f64,
    v_in: Vec2,
    k: usize,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = fragments
        .iter()
        .map(|f| (f.index, distance(v_in, f, mean_ratio)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Reference percentile: linear interpolation between closest ranks,
/// inclusive endpoints, written as a weighted average.
pub fn reference_percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let below = h.floor();
    let i = below as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    if sorted[i] == sorted[i + 1] {
        // (1 - w) x + w x can round away from x
        return sorted[i];
    }
    let w = h - below;
    (1.0 - w) * sorted[i] + w * sorted[i + 1]
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
