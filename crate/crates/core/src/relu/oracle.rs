//! Brute-force search for `α* = (1/N) max_w λ_max(Σᵢ a(xᵢ,w) a(xᵢ,w)ᵀ)`.
//!
//! The Hessian only depends on `w` through the activation pattern
//! `sᵢⱼ = 𝟙{xᵢᵀwʲ ≥ 0}`. Each neuron's column of the pattern is a sign vector
//! of the central hyperplane arrangement `{v : xᵢᵀv = 0}`, and neurons are
//! independent, so the search runs over per-neuron patterns.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{accumulate_active_blocks, ReluDataset, Weights};
use crate::eigen::{self, dot, SymMatrix};
use crate::error::{Error, Result};

/// Largest number of neuron-pattern multisets pattern enumeration will visit.
pub const PATTERN_ENUM_MAX_COMBINATIONS: u128 = 2_000_000;

/// Size limits for [`OracleStrategy::PatternEnum`].
pub const PATTERN_ENUM_MAX_POINTS: usize = 12;
pub const PATTERN_ENUM_MAX_DIM: usize = 3;

const SPHERE_GRID_POINTS: usize = 20_000;
const CIRCLE_GRID_POINTS: usize = 720;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleStrategy {
    /// Every realizable activation pattern (N ≤ 12, d ≤ 3).
    PatternEnum,
    /// `budget` Gaussian weight draws from `ChaCha8Rng::seed_from_u64(seed)`.
    RandomSearch { budget: usize, seed: u64 },
}

/// Searches activation patterns for the largest `(1/N) λ_max` of the masked Gram sum.
///
/// Random search returns a lower bound on `α*`. Pattern enumeration includes
/// `w = 0` (all neurons active), so it attains `α₂`.
pub fn alpha_oracle(data: &ReluDataset, k: usize, strategy: OracleStrategy) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    match strategy {
        OracleStrategy::PatternEnum => pattern_enum(data, k),
        OracleStrategy::RandomSearch { budget, seed } => random_search(data, k, budget, seed),
    }
}

fn random_search(data: &ReluDataset, k: usize, budget: usize, seed: u64) -> Result<f64> {
    if budget == 0 {
        return Err(Error::invalid("random search needs a budget of at least 1"));
    }
    let d = data.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Weights> = (0..budget).map(|_| Weights::gaussian(k, d, &mut rng)).collect();
    let scale = 1.0 / data.len() as f64;
    draws
        .par_iter()
        .map_init(
            || Scratch::new(k * d),
            |scratch, w| {
                scratch.fill(data, k, |x, j| dot(x, w.block(j)) >= 0.0);
                scratch.top_eigenvalue().map(|v| v * scale)
            },
        )
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

fn pattern_enum(data: &ReluDataset, k: usize) -> Result<f64> {
    let (n, d) = (data.len(), data.d());
    if n > PATTERN_ENUM_MAX_POINTS || d > PATTERN_ENUM_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "pattern enumeration is limited to N <= {PATTERN_ENUM_MAX_POINTS} and d <= {PATTERN_ENUM_MAX_DIM} (got N={n}, d={d})"
        )));
    }
    let patterns: Vec<u16> = neuron_patterns(data).into_iter().collect();
    let combos = multiset_count(patterns.len() as u128, k as u128);
    if combos > PATTERN_ENUM_MAX_COMBINATIONS {
        return Err(Error::Unsupported(format!(
            "{combos} pattern combinations for k={k} exceed the limit of {PATTERN_ENUM_MAX_COMBINATIONS}"
        )));
    }

    let scale = 1.0 / n as f64;
    let mut scratch = Scratch::new(k * d);
    let mut best = f64::NEG_INFINITY;
    // non-decreasing index tuples: neuron order does not change the spectrum
    let mut idx = vec![0usize; k];
    loop {
        scratch.fill_indexed(data, k, |i, j| patterns[idx[j]] & (1 << i) != 0);
        best = best.max(scratch.top_eigenvalue()? * scale);

        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            if idx[pos] + 1 < patterns.len() {
                let next = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = next;
                }
                break;
            }
        }
    }
}

/// Realizable sign vectors `{𝟙{xᵢᵀv ≥ 0}}ᵢ` as bitmasks over the points.
fn neuron_patterns(data: &ReluDataset) -> BTreeSet<u16> {
    let d = data.d();
    let points: Vec<&[f64]> = data.points().collect();
    let mut out = BTreeSet::new();
    // Points in `free` sit on the boundary at `v`; every on/off combination
    // for them is realized arbitrarily close to `v`.
    let mut add = |v: &[f64], on_boundary: &[usize], free: &[usize]| {
        let mut mask = 0u16;
        for (i, x) in points.iter().enumerate() {
            if !free.contains(&i) && (on_boundary.contains(&i) || dot(x, v) >= 0.0) {
                mask |= 1 << i;
            }
        }
        for combo in 0u16..(1 << free.len()) {
            let mut m = mask;
            for (b, &i) in free.iter().enumerate() {
                if combo & (1 << b) != 0 {
                    m |= 1 << i;
                }
            }
            out.insert(m);
        }
    };

    // w = 0 activates everything
    add(&vec![0.0; d], &[], &[]);

    let nonzero: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].iter().any(|&c| c != 0.0))
        .collect();

    match d {
        1 => {
            add(&[1.0], &[], &[]);
            add(&[-1.0], &[], &[]);
        }
        2 => {
            // Every face of the arrangement on the circle: the rays orthogonal
            // to each xᵢ plus one direction inside each open arc between them.
            let mut critical: Vec<(f64, usize)> = Vec::new();
            for &i in &nonzero {
                let x = points[i];
                let t = (-x[0]).atan2(x[1]);
                critical.push((t, i));
                critical.push((wrap_angle(t + std::f64::consts::PI), i));
            }
            if critical.is_empty() {
                add(&[1.0, 0.0], &[], &[]);
            }
            critical.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (c, &(t, i)) in critical.iter().enumerate() {
                let on: Vec<usize> = critical
                    .iter()
                    .filter(|(u, _)| (u - t).abs() < 1e-12)
                    .map(|&(_, j)| j)
                    .collect();
                debug_assert!(on.contains(&i));
                add(&[t.cos(), t.sin()], &on, &[]);
                let next = if c + 1 < critical.len() {
                    critical[c + 1].0
                } else {
                    critical[0].0 + 2.0 * std::f64::consts::PI
                };
                if next - t > 1e-12 {
                    let m = 0.5 * (t + next);
                    add(&[m.cos(), m.sin()], &[], &[]);
                }
            }
        }
        _ => {
            // Every cell of the arrangement on the sphere has a vertex ±xᵢ×xⱼ,
            // and all four sides of planes i and j meet there. The sphere and
            // great-circle grids only matter for degenerate inputs.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for s in 0..SPHERE_GRID_POINTS {
                let z = 1.0 - 2.0 * (s as f64 + 0.5) / SPHERE_GRID_POINTS as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * s as f64;
                add(&[r * phi.cos(), r * phi.sin(), z], &[], &[]);
            }
            for &i in &nonzero {
                let (u, w) = orthonormal_complement(points[i]);
                for s in 0..CIRCLE_GRID_POINTS {
                    let t = 2.0 * std::f64::consts::PI * (s as f64 + 0.5) / CIRCLE_GRID_POINTS as f64;
                    let v: Vec<f64> = (0..3).map(|c| t.cos() * u[c] + t.sin() * w[c]).collect();
                    add(&v, &[i], &[]);
                }
            }
            for (a, &i) in nonzero.iter().enumerate() {
                for &j in &nonzero[a + 1..] {
                    let c = cross(points[i], points[j]);
                    if c.iter().any(|&v| v != 0.0) {
                        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                        add(&c, &[], &[i, j]);
                        add(&neg, &[], &[i, j]);
                    }
                }
            }
        }
    }
    out
}

/// Reusable buffers for masked Gram assembly and its eigen-solve.
struct Scratch {
    gram: SymMatrix,
    on: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            gram: SymMatrix::zeros(n),
            on: Vec::new(),
        }
    }

    fn fill(&mut self, data: &ReluDataset, k: usize, mut active: impl FnMut(&[f64], usize) -> bool) {
        self.fill_indexed(data, k, |i, j| active(data.point(i), j));
    }

    /// Unscaled `Σᵢ a aᵀ`; the caller applies `1/N`.
    fn fill_indexed(&mut self, data: &ReluDataset, k: usize, mut active: impl FnMut(usize, usize) -> bool) {
        self.gram.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let d = data.d();
        for (i, x) in data.points().enumerate() {
            self.on.clear();
            self.on.extend((0..k).filter(|&j| active(i, j)));
            accumulate_active_blocks(&mut self.gram, d, x, &self.on);
        }
        self.gram.mirror_upper();
    }

    fn top_eigenvalue(&self) -> Result<f64> {
        let r = eigen::power_iteration(&self.gram)?;
        if !r.converged {
            return Err(Error::Numerical(format!(
                "masked Gram eigen-solve did not converge in {} iterations",
                r.iterations
            )));
        }
        Ok(r.value)
    }
}

fn multiset_count(n: u128, k: u128) -> u128 {
    // C(n + k - 1, k), saturating
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n + i) / (i + 1);
        if acc > PATTERN_ENUM_MAX_COMBINATIONS * 1000 {
            return u128::MAX;
        }
    }
    acc
}

fn wrap_angle(t: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = t % two_pi;
    if t > std::f64::consts::PI {
        t -= two_pi;
    } else if t <= -std::f64::consts::PI {
        t += two_pi;
    }
    t
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn orthonormal_complement(x: &[f64]) -> ([f64; 3], [f64; 3]) {
    let n = eigen::norm2(x);
    let e = [x[0] / n, x[1] / n, x[2] / n];
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut u = cross(&e, &helper);
    let un = eigen::norm2(&u);
    u.iter_mut().for_each(|c| *c /= un);
    let w = cross(&e, &u);
    (u, w)
}
