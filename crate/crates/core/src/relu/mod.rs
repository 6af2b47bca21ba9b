//! Single-hidden-layer ReLU network in the teacher–student setting.
//!
//! The network is `f(x, w) = Σ_j max(0, xᵀwʲ)` with `w = (w¹, …, wᵏ) ∈ R^{kd}`
//! and no biases or output weights. Data are `xᵢ ~ N(0, I_d)` with targets
//! produced by a Gaussian teacher `w*`. Away from activation kinks the loss
//! Hessian is `(1/N) Σ a(xᵢ,w) a(xᵢ,w)ᵀ`, which yields the concavifier
//! bounds α₁–α₄ computed here.

mod oracle;

pub use oracle::{
    alpha_oracle, OracleStrategy, PATTERN_ENUM_MAX_COMBINATIONS, PATTERN_ENUM_MAX_DIM,
    PATTERN_ENUM_MAX_POINTS,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigen::{self, dot, CassiniVariant, SymMatrix};
use crate::error::{Error, Result};
use crate::objective::Objective;

/// Network and data sizes plus the generation seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NetConfig {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl NetConfig {
    pub fn new(d: usize, k: usize, n: usize, seed: u64) -> Result<Self> {
        let c = NetConfig { d, k, n, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::invalid(format!(
                "d, k and N must be at least 1 (got d={}, k={}, N={})",
                self.d, self.k, self.n
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        NetConfig { seed, ..self }
    }
}

/// Stacked hidden-layer weights; block `j` holds `wʲ ∈ R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    k: usize,
    d: usize,
    flat: Vec<f64>,
}

impl Weights {
    pub fn new(k: usize, d: usize, flat: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid("weights need k >= 1 and d >= 1"));
        }
        if flat.len() != k * d {
            return Err(Error::dim_mismatch("weights", k * d, flat.len()));
        }
        Ok(Weights { k, d, flat })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Weights {
            k,
            d,
            flat: vec![0.0; k * d],
        }
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let k = blocks.len();
        let d = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != d) {
            return Err(Error::invalid("weight blocks have different lengths"));
        }
        Self::new(k, d, blocks.concat())
    }

    /// Standard Gaussian entries drawn from `rng`.
    pub fn gaussian<R: rand::Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Self {
        let flat = (0..k * d).map(|_| StandardNormal.sample(rng)).collect();
        Weights { k, d, flat }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.flat[j * self.d..(j + 1) * self.d]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.flat.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.flat
    }
}

/// Teacher-generated training data.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluDataset {
    d: usize,
    /// `N × d`, row-major.
    inputs: Vec<f64>,
    targets: Vec<f64>,
    teacher: Weights,
    seed: u64,
}

impl ReluDataset {
    /// Builds a dataset from explicit inputs, labelling them with `teacher`.
    pub fn from_inputs(inputs: &[Vec<f64>], teacher: Weights, seed: u64) -> Result<Self> {
        let d = teacher.d();
        if inputs.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        let mut flat = Vec::with_capacity(inputs.len() * d);
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != d {
                return Err(Error::dim_mismatch(&format!("input {i}"), d, x.len()));
            }
            flat.extend_from_slice(x);
        }
        let targets = flat
            .chunks_exact(d)
            .map(|x| forward_unchecked(x, &teacher))
            .collect();
        Ok(ReluDataset {
            d,
            inputs: flat,
            targets,
            teacher,
            seed,
        })
    }

    /// Reassembles a dataset and verifies `yᵢ = forward(xᵢ, teacher)` bit for bit.
    pub fn from_parts(
        d: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        teacher: Weights,
        seed: u64,
    ) -> Result<Self> {
        if teacher.d() != d {
            return Err(Error::dim_mismatch("teacher block", d, teacher.d()));
        }
        if targets.is_empty() || inputs.len() != targets.len() * d {
            return Err(Error::invalid(format!(
                "{} input values do not form {} points of dimension {d}",
                inputs.len(),
                targets.len()
            )));
        }
        for (i, (x, &y)) in inputs.chunks_exact(d).zip(&targets).enumerate() {
            let expect = forward_unchecked(x, &teacher);
            if expect.to_bits() != y.to_bits() {
                return Err(Error::invalid(format!(
                    "target {i} is {y}, but the teacher outputs {expect}"
                )));
            }
        }
        Ok(ReluDataset {
            d,
            inputs,
            targets,
            teacher,
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.d)
    }

    pub fn inputs_flat(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn teacher(&self) -> &Weights {
        &self.teacher
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> NetConfig {
        NetConfig {
            d: self.d,
            k: self.teacher.k(),
            n: self.len(),
            seed: self.seed,
        }
    }
}

/// Draws `w* ~ N(0, I_{kd})` and then `xᵢ ~ N(0, I_d)` row by row from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn generate_dataset(config: &NetConfig) -> Result<ReluDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let teacher = Weights::gaussian(config.k, config.d, &mut rng);
    let inputs: Vec<f64> = (0..config.n * config.d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let targets = inputs
        .chunks_exact(config.d)
        .map(|x| forward_unchecked(x, &teacher))
        .collect();
    Ok(ReluDataset {
        d: config.d,
        inputs,
        targets,
        teacher,
        seed: config.seed,
    })
}

/// How the student weights are initialized before descent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StudentInit {
    /// `w₀ = 0`. Every neuron starts active, so the local Hessian is the all-active matrix.
    #[default]
    Zero,
    /// `w₀ ~ N(0, I)` from stream 1 of `ChaCha8Rng::seed_from_u64(seed)`.
    Gaussian,
    /// Start at the teacher (zero loss).
    Teacher,
}

impl std::str::FromStr for StudentInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(StudentInit::Zero),
            "gaussian" => Ok(StudentInit::Gaussian),
            "teacher" => Ok(StudentInit::Teacher),
            other => Err(Error::invalid(format!(
                "unknown init '{other}' (expected zero, gaussian or teacher)"
            ))),
        }
    }
}

impl std::fmt::Display for StudentInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudentInit::Zero => "zero",
            StudentInit::Gaussian => "gaussian",
            StudentInit::Teacher => "teacher",
        })
    }
}

pub fn initial_weights(data: &ReluDataset, init: StudentInit) -> Weights {
    let (k, d) = (data.teacher.k(), data.d);
    match init {
        StudentInit::Zero => Weights::zeros(k, d),
        StudentInit::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(data.seed);
            rng.set_stream(1);
            Weights::gaussian(k, d, &mut rng)
        }
        StudentInit::Teacher => data.teacher.clone(),
    }
}

/// `Σ_j max(0, xᵀwʲ)`.
pub fn forward(x: &[f64], w: &Weights) -> Result<f64> {
    if x.len() != w.d() {
        return Err(Error::dim_mismatch("input", w.d(), x.len()));
    }
    Ok(forward_unchecked(x, w))
}

#[inline]
fn forward_unchecked(x: &[f64], w: &Weights) -> f64 {
    w.blocks().map(|wj| dot(x, wj).max(0.0)).sum()
}

/// `(1/2N) Σᵢ (f(xᵢ, w) − yᵢ)²`.
pub fn loss(w: &Weights, data: &ReluDataset) -> Result<f64> {
    check_weights(w, data)?;
    Ok(loss_unchecked(w.as_slice(), w.k(), data))
}

fn loss_unchecked(w: &[f64], k: usize, data: &ReluDataset) -> f64 {
    let d = data.d;
    let mut acc = 0.0;
    for (x, &y) in data.points().zip(&data.targets) {
        let out: f64 = (0..k).map(|j| dot(x, &w[j * d..(j + 1) * d]).max(0.0)).sum();
        let r = out - y;
        acc += r * r;
    }
    acc / (2.0 * data.len() as f64)
}

/// Block `j` is `𝟙{xᵀwʲ ≥ 0}·x`; a zero pre-activation counts as active.
pub fn a_vector(x: &[f64], w: &Weights) -> Result<Vec<f64>> {
    if x.len() != w.d() {
        return Err(Error::dim_mismatch("input", w.d(), x.len()));
    }
    let mut out = Vec::with_capacity(w.k() * w.d());
    for wj in w.blocks() {
        if dot(x, wj) >= 0.0 {
            out.extend_from_slice(x);
        } else {
            out.extend(std::iter::repeat_n(0.0, x.len()));
        }
    }
    Ok(out)
}

/// `k` stacked copies of `x`.
pub fn abar_vector(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(x.repeat(k))
}

/// `(1/N) Σᵢ (f(xᵢ, w) − yᵢ) a(xᵢ, w)`.
pub fn gradient(w: &Weights, data: &ReluDataset) -> Result<Vec<f64>> {
    check_weights(w, data)?;
    Ok(gradient_unchecked(w.as_slice(), w.k(), data))
}

fn gradient_unchecked(w: &[f64], k: usize, data: &ReluDataset) -> Vec<f64> {
    let d = data.d;
    let mut g = vec![0.0; k * d];
    let mut pre = vec![0.0; k];
    for (x, &y) in data.points().zip(&data.targets) {
        let mut out = 0.0;
        for (j, p) in pre.iter_mut().enumerate() {
            *p = dot(x, &w[j * d..(j + 1) * d]);
            out += p.max(0.0);
        }
        let r = out - y;
        if r == 0.0 {
            continue;
        }
        for (j, &p) in pre.iter().enumerate() {
            if p >= 0.0 {
                for (gi, xi) in g[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *gi += r * xi;
                }
            }
        }
    }
    let inv = 1.0 / data.len() as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    g
}

/// `(1/N) Σᵢ a(xᵢ,w) a(xᵢ,w)ᵀ`, the loss Hessian away from kinks
/// (the ReLU second derivative is taken as zero everywhere).
pub fn hessian(w: &Weights, data: &ReluDataset) -> Result<SymMatrix> {
    check_weights(w, data)?;
    Ok(masked_gram(data, w.k(), |x, j| dot(x, w.block(j)) >= 0.0))
}

/// True when every pre-activation satisfies `|xᵢᵀwʲ| > rel·‖xᵢ‖‖wʲ‖`.
pub fn is_kink_free(w: &Weights, data: &ReluDataset, rel: f64) -> bool {
    let wn: Vec<f64> = w.blocks().map(eigen::norm2).collect();
    data.points().all(|x| {
        let xn = eigen::norm2(x);
        w.blocks()
            .zip(&wn)
            .all(|(wj, &n)| dot(x, wj).abs() > rel * xn * n)
    })
}

/// The ReLU training loss as an [`Objective`] over the flat weight vector.
#[derive(Clone, Copy, Debug)]
pub struct ReluLoss<'a> {
    data: &'a ReluDataset,
    k: usize,
}

impl<'a> ReluLoss<'a> {
    pub fn new(data: &'a ReluDataset) -> Self {
        ReluLoss {
            data,
            k: data.teacher().k(),
        }
    }

    pub fn with_k(data: &'a ReluDataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(ReluLoss { data, k })
    }

    pub fn data(&self) -> &ReluDataset {
        self.data
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Objective for ReluLoss<'_> {
    fn dim(&self) -> usize {
        self.k * self.data.d
    }

    fn value(&self, w: &[f64]) -> f64 {
        loss_unchecked(w, self.k, self.data)
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        gradient_unchecked(w, self.k, self.data)
    }

    fn hessian(&self, w: &[f64]) -> Option<SymMatrix> {
        let d = self.data.d;
        Some(masked_gram(self.data, self.k, |x, j| {
            dot(x, &w[j * d..(j + 1) * d]) >= 0.0
        }))
    }
}

/// `S = (1/N) Σᵢ xᵢ xᵢᵀ`.
pub fn second_moment(data: &ReluDataset) -> SymMatrix {
    let mut s = SymMatrix::zeros(data.d);
    for x in data.points() {
        s.add_outer_upper(x, 1.0);
    }
    s.mirror_upper();
    s.scale(1.0 / data.len() as f64);
    s
}

/// `M = (1/N) Σᵢ ā(xᵢ) ā(xᵢ)ᵀ`, assembled as `J_k ⊗ S`.
pub fn allactive_gram(data: &ReluDataset, k: usize) -> Result<SymMatrix> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(second_moment(data).kron_allones(k))
}

/// `(1/N) Σᵢ a aᵀ` where neuron `j` is active on point `x` iff `active(x, j)`.
pub(crate) fn masked_gram(
    data: &ReluDataset,
    k: usize,
    mut active: impl FnMut(&[f64], usize) -> bool,
) -> SymMatrix {
    let d = data.d;
    let n = k * d;
    let mut g = SymMatrix::zeros(n);
    let mut on = Vec::with_capacity(k);
    for x in data.points() {
        on.clear();
        on.extend((0..k).filter(|&j| active(x, j)));
        accumulate_active_blocks(&mut g, d, x, &on);
    }
    g.mirror_upper();
    g.scale(1.0 / data.len() as f64);
    g
}

/// Adds `x xᵀ` to the upper triangle of every block `(a, b)`, `a ≤ b`, with `a, b ∈ on`.
pub(crate) fn accumulate_active_blocks(g: &mut SymMatrix, d: usize, x: &[f64], on: &[usize]) {
    let n = g.size();
    let data = g.data_mut();
    for (ai, &a) in on.iter().enumerate() {
        for &b in &on[ai..] {
            for p in 0..d {
                let xp = x[p];
                if xp == 0.0 {
                    continue;
                }
                let row = (a * d + p) * n + b * d;
                let q0 = if a == b { p } else { 0 };
                for q in q0..d {
                    data[row + q] += xp * x[q];
                }
            }
        }
    }
}

/// Exact concavifier `k‖x‖²` of a single-point dataset.
pub fn alpha_single_point(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(k as f64 * dot(x, x))
}

/// `α₁ = (k/N) Σᵢ ‖xᵢ‖²`.
pub fn bound_alpha1(data: &ReluDataset, k: usize) -> Result<f64> {
    check_k(data, k)?;
    let total: f64 = data.points().map(|x| dot(x, x)).sum();
    Ok(k as f64 * total / data.len() as f64)
}

/// `α₂ = (1/N) λ_max(Σᵢ ā(xᵢ) ā(xᵢ)ᵀ) = k·λ_max(S)`.
pub fn bound_alpha2(data: &ReluDataset, k: usize) -> Result<f64> {
    check_k(data, k)?;
    eigen::kron_allones_structure_lambda(&second_moment(data), k)
}

/// `α₃`: Gershgorin bound on the explicit `kd × kd` all-active matrix.
pub fn bound_alpha3(data: &ReluDataset, k: usize) -> Result<f64> {
    check_k(data, k)?;
    Ok(eigen::gershgorin_upper(&allactive_gram(data, k)?))
}

/// `α₄`: Cassini-oval bound on the same matrix as `α₃`.
pub fn bound_alpha4(data: &ReluDataset, k: usize, variant: CassiniVariant) -> Result<f64> {
    check_k(data, k)?;
    if k * data.d < 2 {
        return Err(Error::invalid("alpha4 needs kd >= 2"));
    }
    eigen::brauer_cassini_upper(&allactive_gram(data, k)?, variant)
}

/// The four concavifier bounds (and optionally the oracle) for one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub config: NetConfig,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// `None` when `kd < 2`.
    pub alpha4: Option<f64>,
    pub alpha_oracle: Option<f64>,
    pub alpha4_variant: CassiniVariant,
}

impl BoundReport {
    /// Violations of `oracle ≤ α₂ ≤ α₁`, `α₂ ≤ α₃`, `α₂ ≤ α₄ ≤ α₃` (the last two only
    /// for the standard variant) at relative slack `rel`.
    pub fn ordering_violations(&self, rel: f64) -> Vec<String> {
        let le = |a: f64, b: f64| a <= b + rel * b.abs().max(1.0);
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        check(le(self.alpha2, self.alpha1), format!("alpha2 {} > alpha1 {}", self.alpha2, self.alpha1));
        check(le(self.alpha2, self.alpha3), format!("alpha2 {} > alpha3 {}", self.alpha2, self.alpha3));
        if let (Some(a4), CassiniVariant::Standard) = (self.alpha4, self.alpha4_variant) {
            check(le(self.alpha2, a4), format!("alpha2 {} > alpha4 {a4}", self.alpha2));
            check(le(a4, self.alpha3), format!("alpha4 {a4} > alpha3 {}", self.alpha3));
        }
        if let Some(o) = self.alpha_oracle {
            check(le(o, self.alpha2), format!("oracle {o} > alpha2 {}", self.alpha2));
        }
        out
    }
}

/// Computes α₁–α₄ for `data` with `k` neurons. The oracle is left empty.
pub fn compute_bounds(data: &ReluDataset, k: usize, variant: CassiniVariant) -> Result<BoundReport> {
    check_k(data, k)?;
    let m = allactive_gram(data, k)?;
    let alpha4 = if m.size() >= 2 {
        Some(eigen::brauer_cassini_upper(&m, variant)?)
    } else {
        None
    };
    Ok(BoundReport {
        config: NetConfig { k, ..data.config() },
        alpha1: bound_alpha1(data, k)?,
        alpha2: bound_alpha2(data, k)?,
        alpha3: eigen::gershgorin_upper(&m),
        alpha4,
        alpha_oracle: None,
        alpha4_variant: variant,
    })
}

fn check_k(data: &ReluDataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(())
}

fn check_weights(w: &Weights, data: &ReluDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if w.d() != data.d {
        return Err(Error::dim_mismatch("weight block", data.d, w.d()));
    }
    Ok(())
}
