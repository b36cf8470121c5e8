//! Naive reference implementations used as test oracles. Written from the
//! definitions, without sharing code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// A stream drawn around a few random centres, so cosines spread over the
/// whole range instead of clustering near zero.
pub fn clustered_stream(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Vec<Vec<f64>> {
    let centres: Vec<Vec<f64>> = (0..rng.random_range(1..=6))
        .map(|_| gaussian(rng, dim))
        .collect();
    (0..len)
        .map(|_| {
            let c = &centres[rng.random_range(0..centres.len())];
            let spread: f64 = rng.random_range(0.05..1.5);
            c.iter()
                .map(|x| x + spread * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn activations(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let u = unit(x);
    rows.iter()
        .map(|r| {
            let d: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
            d.clamp(-1.0, 1.0)
        })
        .collect()
}

/// Quadratic novelty-gated build.
pub fn build(stream: &[Vec<f64>], theta: f64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in stream {
        let best = activations(&rows, x)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if rows.is_empty() || best < theta {
            rows.push(unit(x));
        }
    }
    rows
}

/// `w[c][n]` summed over records with the +1/-1 target coding.
pub fn train(
    rows: &[Vec<f64>],
    records: &[(Vec<f64>, usize)],
    classes: usize,
    temperature: f64,
) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; rows.len()]; classes];
    for (x, answer) in records {
        let h = activations(rows, x);
        for (c, wc) in w.iter_mut().enumerate() {
            let target = if c == *answer { 1.0 } else { -1.0 };
            for (n, hn) in h.iter().enumerate() {
                wc[n] += (-(1.0 - hn.min(1.0)) / temperature).exp() * target;
            }
        }
    }
    w
}

/// Likelihoods over the `top_a` most active nodes (ties to the lower index).
pub fn likelihood(w: &[Vec<f64>], rows: &[Vec<f64>], x: &[f64], top_a: usize) -> Vec<f64> {
    let h = activations(rows, x);
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[b].partial_cmp(&h[a]).unwrap().then(a.cmp(&b)));
    order.truncate(top_a);
    w.iter()
        .map(|wc| order.iter().map(|&n| wc[n] * h[n]).sum())
        .collect()
}

pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of (normal, adversarial) pairs ordered correctly, ties half.
pub fn pairwise_auroc(normal: &[f64], adversarial: &[f64]) -> f64 {
    let mut wins = 0.0;
    for n in normal {
        for a in adversarial {
            if n > a {
                wins += 1.0;
            } else if n == a {
                wins += 0.5;
            }
        }
    }
    wins / (normal.len() * adversarial.len()) as f64
}
