//! Dense symmetric matrices and estimates of their largest eigenvalue.
//!
//! Three estimates are provided: power iteration (tight), the Gershgorin
//! circle bound, and the Brauer ovals-of-Cassini bound. For every symmetric
//! matrix `λ_max ≤ brauer_cassini_upper(standard) ≤ gershgorin_upper`.

use crate::error::{Error, Result};

/// Relative tolerance used when validating symmetry of user-supplied entries.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense symmetric `n × n` matrix, stored row-major.
///
/// Symmetry is checked (or guaranteed by construction) when the matrix is built,
/// so every routine in this module can rely on `m[i][j] == m[j][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Validates a row-major buffer. Entries must be finite and satisfy
    /// `|m_ij − m_ji| ≤ 1e-10·max(1, |m_ij|)`; the stored matrix is the exact
    /// symmetrization `(m_ij + m_ji) / 2`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                bad / n.max(1),
                bad % n.max(1)
            )));
        }
        let mut m = SymMatrix { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                let a = m.data[i * n + j];
                let b = m.data[j * n + i];
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access; callers must leave the matrix symmetric.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `R_i(M) = Σ_{j≠i} |m_ij|`, the Gershgorin radius of row `i`.
    pub fn off_diagonal_radius(&self, i: usize) -> f64 {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs())
            .sum()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.off_diagonal_radius(i)).collect()
    }

    /// `out = M v`.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    /// `M += scale · v vᵀ`. Keeps the matrix exactly symmetric.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        assert_eq!(v.len(), self.n, "outer product dimension mismatch");
        let n = self.n;
        for i in 0..n {
            let si = scale * v[i];
            if si == 0.0 {
                continue;
            }
            for (m, vj) in self.data[i * n + i..(i + 1) * n].iter_mut().zip(&v[i..]) {
                *m += si * vj;
            }
        }
        self.mirror_upper();
    }

    /// Accumulates `scale · v vᵀ` into the upper triangle only. Callers batching
    /// many updates must finish with [`SymMatrix::mirror_upper`].
    pub(crate) fn add_outer_upper(&mut self, v: &[f64], scale: f64) {
        let n = self.n;
        for i in 0..n {
            let si = scale * v[i];
            if si == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += si * v[j];
            }
        }
    }

    pub(crate) fn mirror_upper(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `J_k ⊗ self`, where `J_k` is the `k × k` all-ones matrix.
    ///
    /// Block `(a, b)` of the result is a copy of `self` for every `a, b < k`.
    pub fn kron_allones(&self, k: usize) -> SymMatrix {
        let d = self.n;
        let n = k * d;
        let mut out = SymMatrix::zeros(n);
        for bi in 0..k {
            for i in 0..d {
                let src = self.row(i);
                let r = bi * d + i;
                for bj in 0..k {
                    out.data[r * n + bj * d..r * n + (bj + 1) * d].copy_from_slice(src);
                }
            }
        }
        out
    }
}

/// Outcome of an eigenvalue iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub value: f64,
    /// Unit-norm witness. Sign is fixed so the largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EigenResult {
    /// `‖M v − λ v‖`.
    pub fn residual(&self, m: &SymMatrix) -> f64 {
        let mv = m.mul_vec(&self.vector);
        mv.iter()
            .zip(&self.vector)
            .map(|(a, b)| (a - self.value * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct PowerIterationOptions {
    /// Stop when the Rayleigh quotient changes by less than `rq_tol·max(1,|λ|)`...
    pub rq_tol: f64,
    /// ...and the residual is below `residual_tol·max(1,|λ|)`.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        PowerIterationOptions {
            rq_tol: 1e-10,
            residual_tol: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Deterministic start vector: all-ones normalized, first coordinate nudged by 1e-6.
pub fn default_start_vector(n: usize) -> Vec<f64> {
    let mut v = vec![1.0; n];
    if n > 0 {
        v[0] += 1e-6;
    }
    normalize(&mut v);
    v
}

/// Largest-magnitude eigenvalue of `m` and its eigenvector, using the default
/// options and start vector. For positive semidefinite matrices this is `λ_max`.
pub fn power_iteration(m: &SymMatrix) -> Result<EigenResult> {
    power_iteration_with(m, &PowerIterationOptions::default(), None)
}

/// Power iteration with explicit options and an optional warm start.
pub fn power_iteration_with(
    m: &SymMatrix,
    opts: &PowerIterationOptions,
    start: Option<&[f64]>,
) -> Result<EigenResult> {
    let n = m.size();
    if n == 0 {
        return Err(Error::invalid("power iteration on an empty matrix"));
    }
    let mut v = match start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::dim_mismatch("power iteration start vector", n, s.len()));
            }
            let mut v = s.to_vec();
            if normalize(&mut v) == 0.0 {
                v = default_start_vector(n);
            }
            v
        }
        None => default_start_vector(n),
    };

    let mut w = vec![0.0; n];
    m.mul_vec_into(&v, &mut w);
    let mut lambda = dot(&v, &w);
    if residual_norm(&w, &v, lambda) <= opts.residual_tol * lambda.abs().max(1.0) {
        return Ok(finish(v, lambda, 0, true));
    }

    for it in 1..=opts.max_iterations {
        let norm = norm2(&w);
        if norm == 0.0 {
            // v lies in the null space: M v = 0 exactly.
            return Ok(finish(v, 0.0, it, true));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        m.mul_vec_into(&v, &mut w);
        let next = dot(&v, &w);
        let scale = next.abs().max(1.0);
        let rq_done = (next - lambda).abs() <= opts.rq_tol * scale;
        lambda = next;
        if rq_done && residual_norm(&w, &v, lambda) <= opts.residual_tol * scale {
            return Ok(finish(v, lambda, it, true));
        }
    }
    Ok(finish(v, lambda, opts.max_iterations, false))
}

/// `λ_max` of an arbitrary symmetric matrix.
///
/// Power iteration runs on `M + σI` with `σ = max(0, max_i(R_i − m_ii))`, which is
/// positive semidefinite by Gershgorin, so its dominant eigenvalue is `λ_max + σ`.
pub fn lambda_max(m: &SymMatrix) -> Result<EigenResult> {
    let n = m.size();
    if n == 0 {
        return Err(Error::invalid("lambda_max of an empty matrix"));
    }
    let shift = (0..n)
        .map(|i| m.off_diagonal_radius(i) - m.get(i, i))
        .fold(0.0_f64, f64::max);
    if shift == 0.0 {
        return power_iteration(m);
    }
    let mut shifted = m.clone();
    for i in 0..n {
        shifted.data[i * n + i] += shift;
    }
    let mut res = power_iteration(&shifted)?;
    res.value -= shift;
    Ok(res)
}

/// Gershgorin upper bound on the spectrum: `max_i (m_ii + R_i(M))`.
pub fn gershgorin_upper(m: &SymMatrix) -> f64 {
    (0..m.size())
        .map(|i| m.get(i, i) + m.off_diagonal_radius(i))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Which form of the Cassini-oval bound to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CassiniVariant {
    /// Classical bound with `((m_ii − m_jj)/2)²` under the root. Never looser than Gershgorin.
    #[default]
    Standard,
    /// `(m_ii − m_jj)²` unhalved under the root. Can exceed the Gershgorin bound.
    Unhalved,
}

impl CassiniVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CassiniVariant::Standard => "standard",
            CassiniVariant::Unhalved => "paper",
        }
    }
}

impl std::fmt::Display for CassiniVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CassiniVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(CassiniVariant::Standard),
            "paper" | "unhalved" => Ok(CassiniVariant::Unhalved),
            other => Err(Error::invalid(format!(
                "unknown alpha4 variant '{other}' (expected standard or paper)"
            ))),
        }
    }
}

/// Brauer ovals-of-Cassini upper bound:
/// `max_{i≠j} [(m_ii + m_jj)/2 + sqrt(δ_ij² + R_i R_j)]`
/// with `δ_ij = (m_ii − m_jj)/2` (standard) or `m_ii − m_jj` (unhalved).
pub fn brauer_cassini_upper(m: &SymMatrix, variant: CassiniVariant) -> Result<f64> {
    let n = m.size();
    if n < 2 {
        return Err(Error::invalid(format!(
            "Cassini bound needs at least two rows, got {n}"
        )));
    }
    let diag = m.diagonal();
    let radii = m.radii();
    let half = match variant {
        CassiniVariant::Standard => 0.5,
        CassiniVariant::Unhalved => 1.0,
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = half * (diag[i] - diag[j]);
            let v = 0.5 * (diag[i] + diag[j]) + (delta * delta + radii[i] * radii[j]).sqrt();
            best = best.max(v);
        }
    }
    Ok(best)
}

/// `λ_max(J_k ⊗ S) = k · λ_max(S)` for a positive semidefinite `S`.
///
/// With `S = (1/N) Σ x_i x_iᵀ` this is the top eigenvalue of
/// `(1/N) Σ ā(x_i) ā(x_i)ᵀ`, computed on the `d × d` matrix instead of `kd × kd`.
pub fn kron_allones_structure_lambda(s: &SymMatrix, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let res = power_iteration(s)?;
    if !res.converged {
        return Err(Error::Numerical(format!(
            "power iteration did not converge in {} iterations",
            res.iterations
        )));
    }
    Ok(k as f64 * res.value)
}

fn finish(mut v: Vec<f64>, value: f64, iterations: usize, converged: bool) -> EigenResult {
    normalize(&mut v);
    let lead = v
        .iter()
        .copied()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    EigenResult {
        value,
        vector: v,
        iterations,
        converged,
    }
}

fn residual_norm(mv: &[f64], v: &[f64], lambda: f64) -> f64 {
    mv.iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit norm in place and returns the original norm.
pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        // within tolerance is accepted and symmetrized
        let ok = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-12, 1.0]]).unwrap();
        assert_eq!(ok.get(0, 1), ok.get(1, 0));
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn power_iteration_diag() {
        let r = power_iteration(&SymMatrix::from_diagonal(&[2.0, 1.0])).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.vector[0].abs(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.vector[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn power_iteration_all_ones() {
        let r = power_iteration(&m(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-9);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(r.vector[0], s, epsilon = 1e-6);
        assert_abs_diff_eq!(r.vector[1], s, epsilon = 1e-6);
    }

    #[test]
    fn power_iteration_two_one() {
        let mat = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = power_iteration(&mat).unwrap();
        assert_abs_diff_eq!(r.value, 3.0, epsilon = 1e-9);
        assert!(r.residual(&mat) <= 1e-8 * 3.0);
    }

    #[test]
    fn power_iteration_empty_is_error() {
        assert!(matches!(
            power_iteration(&SymMatrix::zeros(0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn power_iteration_zero_matrix() {
        let r = power_iteration(&SymMatrix::zeros(3)).unwrap();
        assert!(r.converged);
        assert_eq!(r.value, 0.0);
        assert_abs_diff_eq!(norm2(&r.vector), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn power_iteration_negative_dominant() {
        let r = power_iteration(&SymMatrix::from_diagonal(&[-4.0, 1.0])).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, -4.0, epsilon = 1e-9);
        // lambda_max picks the algebraically largest one
        let top = lambda_max(&SymMatrix::from_diagonal(&[-4.0, 1.0])).unwrap();
        assert_abs_diff_eq!(top.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gershgorin_examples() {
        assert_eq!(gershgorin_upper(&m(&[&[2.0, 1.0], &[1.0, 2.0]])), 3.0);
        assert_eq!(gershgorin_upper(&SymMatrix::from_diagonal(&[5.0, 1.0])), 5.0);
        assert_eq!(gershgorin_upper(&m(&[&[0.0, 1.0], &[1.0, 0.0]])), 1.0);
    }

    #[test]
    fn cassini_examples() {
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_abs_diff_eq!(
            brauer_cassini_upper(&a, CassiniVariant::Standard).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            brauer_cassini_upper(&a, CassiniVariant::Unhalved).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        // 3 + sqrt(4) vs 3 + sqrt(16)
        let d = SymMatrix::from_diagonal(&[5.0, 1.0]);
        assert_eq!(brauer_cassini_upper(&d, CassiniVariant::Standard).unwrap(), 5.0);
        assert_eq!(brauer_cassini_upper(&d, CassiniVariant::Unhalved).unwrap(), 7.0);
    }

    #[test]
    fn cassini_needs_two_rows() {
        let one = SymMatrix::from_diagonal(&[1.0]);
        assert!(matches!(
            brauer_cassini_upper(&one, CassiniVariant::Standard),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn kron_fast_path_matches_explicit() {
        // oracle: explicit 6x6 J_3 ⊗ diag(0.5, 2) through power iteration
        let s = SymMatrix::from_diagonal(&[0.5, 2.0]);
        let explicit = power_iteration(&s.kron_allones(3)).unwrap();
        assert_abs_diff_eq!(explicit.value, 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(kron_allones_structure_lambda(&s, 3).unwrap(), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn kron_identity_cases() {
        let s = SymMatrix::from_diagonal(&[0.5, 2.0]);
        assert_abs_diff_eq!(kron_allones_structure_lambda(&s, 1).unwrap(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            kron_allones_structure_lambda(&SymMatrix::identity(4), 5).unwrap(),
            5.0,
            epsilon = 1e-9
        );
        assert!(kron_allones_structure_lambda(&s, 0).is_err());
    }

    #[test]
    fn kron_layout() {
        let s = m(&[&[1.0, 2.0], &[2.0, 3.0]]);
        let big = s.kron_allones(2);
        assert_eq!(big.size(), 4);
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(big.get(a * 2 + i, b * 2 + j), s.get(i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn add_outer_is_symmetric() {
        let mut a = SymMatrix::zeros(3);
        a.add_outer(&[1.0, -2.0, 0.5], 2.0);
        assert_eq!(a.get(0, 1), -4.0);
        assert_eq!(a.get(1, 0), -4.0);
        assert_eq!(a.get(2, 2), 0.5);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("standard".parse::<CassiniVariant>().unwrap(), CassiniVariant::Standard);
        assert_eq!("paper".parse::<CassiniVariant>().unwrap(), CassiniVariant::Unhalved);
        assert!("other".parse::<CassiniVariant>().is_err());
    }
}
