//! Dense complex matrix helpers shared by the geometric modules.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::tol;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    CMat::zeros(n, m)
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative deviation, safe near zero.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    frob(&(a - b)) / frob(a).max(frob(b)).max(1.0)
}

pub fn inverse(m: &CMat) -> CMat {
    m.clone().try_inverse().expect("matrix must be invertible")
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Complex-bilinear trace pairing `tr(ab)`.
pub fn trace_form(a: &CMat, b: &CMat) -> C64 {
    (a * b).trace()
}

pub fn random_gaussian(n: usize, m: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(n, m, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Gaussian invertible matrix, re-sampled while the condition number exceeds
/// the cap.
pub fn random_invertible(n: usize, rng: &mut impl Rng) -> CMat {
    loop {
        let m = random_gaussian(n, n, rng);
        if condition_number(&m) < tol::MAX_CONDITION {
            return m;
        }
    }
}

/// Matrix exponential by scaling and squaring with a Taylor tail.
pub fn expm(a: &CMat) -> CMat {
    let norm = frob(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a * c(0.5f64.powi(squarings as i32), 0.0);
    let mut result = eye(a.nrows());
    let mut term = eye(a.nrows());
    for k in 1..=30 {
        term = (&term * &scaled) * c(1.0 / k as f64, 0.0);
        result += &term;
        if frob(&term) < 1e-18 * frob(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Logarithm of a unipotent matrix: the Mercator series in `u - 1`, which
/// terminates because `u - 1` is nilpotent.
pub fn log_unipotent(u: &CMat) -> CMat {
    let n = u.nrows();
    let nil = u - eye(n);
    let mut result = zeros(n, n);
    let mut power = nil.clone();
    for k in 1..=n {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        result += &power * c(sign / k as f64, 0.0);
        power = &power * &nil;
        if frob(&power) == 0.0 {
            break;
        }
    }
    result
}

/// Numerical rank with the relative singular-value cutoff.
pub fn rank_with_tol(m: &CMat) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol::RANK * max).count()
}

/// Row-major JSON encoding of a complex matrix as `[re, im]` pairs.
pub fn mat_to_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|i| {
            let row: Vec<serde_json::Value> =
                (0..m.ncols()).map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im])).collect();
            serde_json::Value::Array(row)
        })
        .collect();
    serde_json::Value::Array(rows)
}

pub fn mat_from_json(v: &serde_json::Value) -> Option<CMat> {
    let rows = v.as_array()?;
    let nrows = rows.len();
    let ncols = rows.first()?.as_array()?.len();
    let mut m = zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != ncols {
            return None;
        }
        for (j, entry) in row.iter().enumerate() {
            let pair = entry.as_array()?;
            m[(i, j)] = c(pair.first()?.as_f64()?, pair.get(1)?.as_f64()?);
        }
    }
    Some(m)
}

/// Partition of `{0..n}` into contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> BlockStructure {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        BlockStructure { sizes, offsets, n: acc }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn dim_diagonal(&self) -> usize {
        self.sizes.iter().map(|s| s * s).sum()
    }

    pub fn block(&self, m: &CMat, i: usize, j: usize) -> CMat {
        m.view((self.offsets[i], self.offsets[j]), (self.sizes[i], self.sizes[j])).into_owned()
    }

    pub fn set_block(&self, m: &mut CMat, i: usize, j: usize, val: &CMat) {
        let mut view = m.view_mut((self.offsets[i], self.offsets[j]), (self.sizes[i], self.sizes[j]));
        view.copy_from(val);
    }

    /// Largest off-diagonal-block entry relative to the matrix scale.
    pub fn off_diagonal_defect(&self, m: &CMat) -> f64 {
        let scale = frob(m).max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j {
                    worst = worst.max(frob(&self.block(m, i, j)));
                }
            }
        }
        worst / scale
    }

    pub fn is_block_diagonal(&self, m: &CMat, tol: f64) -> bool {
        self.off_diagonal_defect(m) < tol
    }

    pub fn random_block_diagonal(&self, rng: &mut impl Rng) -> CMat {
        let mut m = zeros(self.n, self.n);
        for i in 0..self.len() {
            let b = random_invertible(self.sizes[i], rng);
            self.set_block(&mut m, i, i, &b);
        }
        m
    }

    /// Random block-diagonal Lie algebra element (no invertibility needed).
    pub fn random_diagonal_lie(&self, rng: &mut impl Rng) -> CMat {
        let mut m = zeros(self.n, self.n);
        for i in 0..self.len() {
            let b = random_gaussian(self.sizes[i], self.sizes[i], rng);
            self.set_block(&mut m, i, i, &b);
        }
        m
    }

    /// Identity blocks placed at the given `(row, col)` block positions.
    pub fn permutation_matrix(&self, support: &[(usize, usize)]) -> CMat {
        let mut m = zeros(self.n, self.n);
        for &(i, j) in support {
            assert_eq!(self.sizes[i], self.sizes[j], "permuted blocks must have equal sizes");
            self.set_block(&mut m, i, j, &eye(self.sizes[i]));
        }
        m
    }

    /// Elementary-matrix basis of one `(row, col)` block.
    pub fn block_basis(&self, i: usize, j: usize) -> Vec<CMat> {
        let mut out = Vec::with_capacity(self.sizes[i] * self.sizes[j]);
        for a in 0..self.sizes[i] {
            for b in 0..self.sizes[j] {
                let mut m = zeros(self.n, self.n);
                m[(self.offsets[i] + a, self.offsets[j] + b)] = c(1.0, 0.0);
                out.push(m);
            }
        }
        out
    }
}
