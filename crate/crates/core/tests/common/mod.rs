//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use coxdac::{validate_dataset, Dataset, Record};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Direct O(n^2) evaluation of the log partial likelihood and its first two
/// derivatives, scanning every row for every event.
pub struct Brute {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub info: DMatrix<f64>,
}

pub fn brute_pl(data: &Dataset, beta: &DVector<f64>) -> Brute {
    let recs = data.to_records();
    let p = data.p();
    let eta: Vec<f64> = recs.iter().map(|r| r.covariates.iter().zip(beta.iter()).map(|(z, b)| z * b).sum()).collect();
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for (i, ri) in recs.iter().enumerate() {
        if !ri.event {
            continue;
        }
        let t = ri.stop;
        let (mut s0, mut s1, mut s2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
        for (j, rj) in recs.iter().enumerate() {
            if rj.start < t && t <= rj.stop {
                let w = eta[j].exp();
                let z = DVector::from_column_slice(&rj.covariates);
                s0 += w;
                s1 += &z * w;
                s2 += &z * z.transpose() * w;
            }
        }
        let zi = DVector::from_column_slice(&ri.covariates);
        let mean = &s1 / s0;
        loglik += eta[i] - s0.ln();
        score += zi - &mean;
        info += s2 / s0 - &mean * mean.transpose();
    }
    let n = data.n_subjects() as f64;
    Brute { loglik: loglik / n, score: score / n, info: info / n }
}

pub fn loglik(data: &Dataset, beta: &DVector<f64>) -> f64 {
    brute_pl(data, beta).loglik
}

/// Central-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        a[j] += h;
        b[j] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector-valued `g`.
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let p = x.len();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut a = x.clone();
        let mut b = x.clone();
        a[j] += h;
        b[j] -= h;
        out.set_column(j, &((g(&a) - g(&b)) / (2.0 * h)));
    }
    out
}

/// Plain Newton on the brute-force oracle.
pub fn brute_mple(data: &Dataset, iters: usize) -> DVector<f64> {
    let mut beta = DVector::zeros(data.p());
    for _ in 0..iters {
        let b = brute_pl(data, &beta);
        beta += b.info.lu().solve(&b.score).expect("invertible");
    }
    beta
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Small deterministic pseudo-random stream for hand-built datasets.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let (u, v) = (self.next_f64(), self.next_f64());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

/// Right-censored data with exponential-ish times; `ties` rounds times to a grid.
pub fn random_right_censored(seed: u64, n: usize, p: usize, ties: bool) -> Dataset {
    let mut rng = Lcg(seed);
    let beta: Vec<f64> = (0..p).map(|j| 0.5 / (j + 1) as f64).collect();
    let recs = (0..n as u64)
        .map(|i| {
            let z: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
            let eta: f64 = z.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mut t = -rng.next_f64().ln() / eta.exp() + 1e-3;
            if ties {
                t = (t * 4.0).ceil() / 4.0;
            }
            let c = -rng.next_f64().ln() * 1.5;
            Record::new(i, t.min(c.max(1e-3)), t <= c, z)
        })
        .collect();
    validate_dataset(recs).unwrap()
}

/// Start-stop data: each subject has 1 to 3 contiguous intervals with fresh
/// covariates, some subjects entering late.
pub fn random_counting_process(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = Lcg(seed);
    let mut recs = Vec::new();
    for i in 0..n as u64 {
        let mut start = if rng.next_f64() < 0.3 { rng.next_f64() } else { 0.0 };
        let pieces = 1 + (rng.next_f64() * 3.0) as usize;
        let event = rng.next_f64() < 0.6;
        for k in 0..pieces {
            let stop = start + 0.05 + rng.next_f64();
            let z: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
            recs.push(Record::interval(i, start, stop, event && k + 1 == pieces, z));
            start = stop;
        }
    }
    validate_dataset(recs).unwrap()
}

/// Proptest strategy over both data kinds: (dataset, beta).
pub fn dataset_and_beta(max_n: usize, max_p: usize) -> impl Strategy<Value = (Dataset, DVector<f64>)> {
    (any::<u64>(), 5..=max_n, 1..=max_p, any::<bool>(), any::<bool>()).prop_flat_map(
        move |(seed, n, p, counting, ties)| {
            let data = if counting {
                random_counting_process(seed, n, p)
            } else {
                random_right_censored(seed, n, p, ties)
            };
            let beta = proptest::collection::vec(-0.5..0.5f64, p).prop_map(DVector::from_vec);
            (Just(data), beta)
        },
    )
}

/// Time-independent dataset generated under given true coefficients.
pub fn with_beta(seed: u64, n: usize, beta: &[f64]) -> Dataset {
    let mut rng = Lcg(seed);
    let recs = (0..n as u64)
        .map(|i| {
            let z: Vec<f64> = beta.iter().map(|_| rng.normal()).collect();
            let eta: f64 = z.iter().zip(beta).map(|(a, b)| a * b).sum();
            let t = (-rng.next_f64().ln() / (0.5 * eta.exp())).sqrt();
            let c = -rng.next_f64().ln() / 0.5f64.exp();
            Record::new(i, t.min(c), t <= c, z)
        })
        .collect();
    validate_dataset(recs).unwrap()
}
