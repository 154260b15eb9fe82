//! Gauss–Legendre quadrature and deterministic parallel reductions.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial, seeded with the
    /// Chebyshev-like asymptotic roots. Accurate to machine precision
    /// for the orders used here (n <= 4096).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                // evaluate P_n and P_n' by the recurrence
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / pp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n == 1 {
            nodes[0] = 0.0;
            weights[0] = 2.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate f over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

static RULES: Lazy<Mutex<HashMap<usize, &'static GaussLegendre>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Shared rule cache; rules are leaked once and reused for the whole run.
pub fn rule(n: usize) -> &'static GaussLegendre {
    let mut map = RULES.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
}

/// Integrate a smooth function over [a, b], doubling the node count from
/// `start` until the relative change drops below `tol` (or `cap` is hit).
pub fn integrate_doubling(
    a: f64,
    b: f64,
    start: usize,
    cap: usize,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut n = start.max(2);
    let mut prev = rule(n).integrate(a, b, &f);
    while n < cap {
        n *= 2;
        let next = rule(n).integrate(a, b, &f);
        let scale = next.abs().max(1.0);
        if (next - prev).abs() <= tol * scale {
            return next;
        }
        prev = next;
    }
    prev
}

/// Vector-valued variant of `integrate_doubling`: all components share the
/// node set and the convergence check, so a value and its gradient can be
/// integrated in one pass.
pub fn integrate_doubling_array<const K: usize>(
    a: f64,
    b: f64,
    start: usize,
    cap: usize,
    tol: f64,
    f: impl Fn(f64) -> [f64; K],
) -> [f64; K] {
    if a == b {
        return [0.0; K];
    }
    let eval = |n: usize| -> [f64; K] {
        let r = rule(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; K];
        for (x, w) in r.nodes.iter().zip(&r.weights) {
            let v = f(mid + half * x);
            for k in 0..K {
                acc[k] += w * v[k];
            }
        }
        for item in &mut acc {
            *item *= half;
        }
        acc
    };
    let mut n = start.max(2);
    let mut prev = eval(n);
    while n < cap {
        n *= 2;
        let next = eval(n);
        let converged = (0..K).all(|k| {
            let scale = next[k].abs().max(1.0);
            (next[k] - prev[k]).abs() <= tol * scale
        });
        if converged {
            return next;
        }
        prev = next;
    }
    prev
}

const CHUNK: usize = 4096;

/// Deterministic parallel sum of f(0..n): fixed-size chunks are reduced in
/// parallel and combined in index order, so the result is bit-stable for any
/// thread count.
pub fn par_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    chunks.iter().sum()
}

/// Deterministic parallel sum producing a small fixed-size accumulator per
/// index (used to fuse several integrals into one sweep).
pub fn par_sum_array<const K: usize>(n: usize, f: impl Fn(usize) -> [f64; K] + Sync) -> [f64; K] {
    let chunks: Vec<[f64; K]> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = [0.0; K];
            for i in lo..hi {
                let v = f(i);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for c in chunks {
        for k in 0..K {
            total[k] += c[k];
        }
    }
    total
}

pub fn par_sum_complex(n: usize, f: impl Fn(usize) -> Complex64 + Sync) -> Complex64 {
    let parts = par_sum_array::<2>(n, |i| {
        let v = f(i);
        [v.re, v.im]
    });
    Complex64::new(parts[0], parts[1])
}
