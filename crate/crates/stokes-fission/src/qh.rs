//! Generic twisted quasi-Hamiltonian verification machinery.
//!
//! A space exposes its tangent calculus, group actions, moment components and
//! two-form through [`QhSpace`]; the residual evaluators here check the three
//! axioms, equivariance and invariance numerically. Fused spaces implement
//! the same trait, so one residual suite certifies everything.

use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{
    c, commutator, frob, rank_with_tol, rel_err, trace_form, zeros, BlockStructure, C64, CMat,
};
use crate::tol;
use crate::twisted::{Automorphism, TwistedElement};

/// Sign and normalisation conventions, calibrated once on the untwisted
/// double `D(G) = G x G` and frozen. `convention::tests` re-derives them.
pub mod convention {
    /// QH1: `d omega = QH1_COEFF * mu^*(chi_raw)` with
    /// `chi_raw(x,y,z) = tr(x [y,z])` in left trivialisation.
    pub const QH1_COEFF: f64 = 0.5;
    /// QH2: `omega(v_X, u) = QH2_COEFF * <mu^*(theta + theta_bar)(u), X>`.
    pub const QH2_COEFF: f64 = -0.5;
    /// Fusion: `omega = omega_1 + omega_2 + FUSION_COEFF * <mu_1^* theta ^ mu_2^* theta_bar>`.
    pub const FUSION_COEFF: f64 = -0.5;
}

/// A point is one matrix per manifold slot; a tangent holds the curve
/// coefficient `xi_k` per slot, flowing as `exp(t xi_k) . X_k`.
pub type Point = Vec<CMat>;
pub type Tangent = Vec<CMat>;

/// One acting group factor together with its Lie data and the twist of the
/// corresponding moment target.
pub struct ActionFactor {
    pub name: String,
    pub size: usize,
    pub lie_basis: Vec<CMat>,
    pub twist: Automorphism,
    /// Levi constraint on group elements; `None` means all of `GL_size`.
    pub blocks: Option<BlockStructure>,
}

impl ActionFactor {
    /// Well-conditioned group element `exp(x/2)` for a random Lie element;
    /// such elements generate the group, so acting with them is enough to
    /// probe equivariance and invariance numerically.
    pub fn sample_group(&self, rng: &mut StdRng) -> CMat {
        crate::linalg::expm(&(self.sample_lie(rng) * crate::linalg::c(0.5, 0.0)))
    }

    pub fn sample_lie(&self, rng: &mut StdRng) -> CMat {
        let mut x = zeros(self.size, self.size);
        for b in &self.lie_basis {
            let z = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
            x += b * (z / c((self.lie_basis.len() as f64).sqrt(), 0.0));
        }
        x
    }
}

pub trait QhSpace: Sync {
    fn name(&self) -> String;
    /// Number of matrix slots in a point.
    fn slots(&self) -> usize;
    /// Complex dimension of the tangent space.
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut StdRng) -> Point;
    fn tangent_basis(&self, p: &Point) -> Vec<Tangent>;
    /// Flows every slot along its curve for time `t`.
    fn flow(&self, p: &Point, u: &Tangent, t: f64) -> Point;
    /// Bracket of the translation-extended fields of two tangents. For all
    /// spaces here the extended fields have constant coefficients, so the
    /// bracket is again a constant tangent.
    fn bracket(&self, u: &Tangent, v: &Tangent) -> Tangent;
    fn omega(&self, p: &Point, u: &Tangent, v: &Tangent) -> C64;
    fn actions(&self) -> Vec<ActionFactor>;
    fn act(&self, p: &Point, factor: usize, k: &CMat) -> Point;
    /// Fundamental vector field of `X` in the factor's Lie algebra.
    fn fundamental(&self, p: &Point, factor: usize, x: &CMat) -> Tangent;
    /// Pushforward of a tangent under the action of `k` in a factor.
    fn push_tangent(&self, factor: usize, k: &CMat, u: &Tangent) -> Tangent;
    fn moment(&self, p: &Point, factor: usize) -> TwistedElement;
    /// Left-trivialised moment derivative `mu^(-1) d mu (u)` (matrix part).
    fn moment_dleft(&self, p: &Point, factor: usize, u: &Tangent) -> CMat;
}

pub fn tangent_add(a: &Tangent, b: &Tangent) -> Tangent {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

pub fn tangent_scale(a: &Tangent, z: C64) -> Tangent {
    a.iter().map(|x| x * z).collect()
}

pub fn tangent_norm(a: &Tangent) -> f64 {
    a.iter().map(|x| frob(x).powi(2)).sum::<f64>().sqrt()
}

/// Random unit-scale tangent: a Gaussian combination of the basis.
pub fn random_tangent(space: &dyn QhSpace, p: &Point, rng: &mut StdRng) -> Tangent {
    let basis = space.tangent_basis(p);
    let mut out: Tangent = p.iter().map(|m| zeros(m.nrows(), m.ncols())).collect();
    let scale = 1.0 / (basis.len() as f64).sqrt();
    for b in &basis {
        let z = c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * c(scale, 0.0);
        out = tangent_add(&out, &tangent_scale(b, z));
    }
    out
}

/// Exterior derivative of the two-form on translation-extended fields:
/// `d w(U,V,W) = U w(V,W) - V w(U,W) + W w(U,V)
///             - w([U,V],W) + w([U,W],V) - w([V,W],U)`,
/// directional derivatives by central differences along the flows.
pub fn d_omega(space: &dyn QhSpace, p: &Point, u: &Tangent, v: &Tangent, w: &Tangent) -> C64 {
    let h = tol::FD_STEP_DOMEGA;
    // Fourth-order five-point stencil; the two-form itself is analytic, so
    // this is the only discretisation in the axiom checks.
    let deriv = |along: &Tangent, a: &Tangent, b: &Tangent| -> C64 {
        let f = |t: f64| space.omega(&space.flow(p, along, t), a, b);
        (f(-2.0 * h) - f(2.0 * h) + (f(h) - f(-h)) * c(8.0, 0.0)) / c(12.0 * h, 0.0)
    };
    let term1 = deriv(u, v, w) - deriv(v, u, w) + deriv(w, u, v);
    let term2 = space.omega(p, &space.bracket(u, v), w) - space.omega(p, &space.bracket(u, w), v)
        + space.omega(p, &space.bracket(v, w), u);
    term1 - term2
}

/// Pullback of the bi-invariant 3-form `chi_raw(x,y,z) = tr(x [y,z])` on the
/// product moment target, in left trivialisation. The twist drops out of the
/// pairing because the bilinear form is invariant under the automorphisms in
/// play.
pub fn pullback_cartan(
    space: &dyn QhSpace,
    p: &Point,
    u: &Tangent,
    v: &Tangent,
    w: &Tangent,
) -> C64 {
    let mut total = c(0.0, 0.0);
    let factors = space.actions().len();
    for a in 0..factors {
        let x = space.moment_dleft(p, a, u);
        let y = space.moment_dleft(p, a, v);
        let z = space.moment_dleft(p, a, w);
        total += trace_form(&x, &commutator(&y, &z));
    }
    total
}

/// QH1 residual `|d omega - QH1_COEFF * mu^* chi_raw|`, normalised by the
/// magnitude of the compared terms so the threshold is scale-free.
pub fn qh1_residual(space: &dyn QhSpace, p: &Point, u: &Tangent, v: &Tangent, w: &Tangent) -> f64 {
    let lhs = d_omega(space, p, u, v, w);
    let rhs = pullback_cartan(space, p, u, v, w) * c(convention::QH1_COEFF, 0.0);
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
}

/// QH2 residual `|omega(v_X, u) - QH2_COEFF * <mu^*(theta+theta_bar)(u), X>|`
/// for `X = (X_a)` over the acting factors.
pub fn qh2_residual(space: &dyn QhSpace, p: &Point, xs: &[CMat], u: &Tangent) -> f64 {
    let actions = space.actions();
    assert_eq!(xs.len(), actions.len());
    let mut v_x: Tangent = p.iter().map(|m| zeros(m.nrows(), m.ncols())).collect();
    for (a, x) in xs.iter().enumerate() {
        v_x = tangent_add(&v_x, &space.fundamental(p, a, x));
    }
    let lhs = space.omega(p, &v_x, u);
    let mut rhs = c(0.0, 0.0);
    for (a, x) in xs.iter().enumerate() {
        let m = space.moment(p, a);
        let raw = space.moment_dleft(p, a, u);
        let theta = m.phi.inverse().apply_lie(&raw);
        let theta_bar = &m.g * &raw * crate::linalg::inverse(&m.g);
        rhs += trace_form(&(theta + theta_bar), x);
    }
    let rhs = rhs * c(convention::QH2_COEFF, 0.0);
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
}

/// QH3 data at a point: ranks of the two-form matrix and of the stacked
/// system `[omega; d mu]` over the tangent basis.
pub struct KernelReport {
    pub dim: usize,
    pub omega_rank: usize,
    pub kernel_dim: usize,
}

pub fn qh3_kernel(space: &dyn QhSpace, p: &Point) -> KernelReport {
    let basis = space.tangent_basis(p);
    let dim = basis.len();
    let mut omega_mat = zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let val = space.omega(p, &basis[i], &basis[j]);
            omega_mat[(i, j)] = val;
            omega_mat[(j, i)] = -val;
        }
    }
    let actions = space.actions();
    let moment_rows: usize = actions.iter().map(|a| a.size * a.size).sum();
    let mut stacked = zeros(dim + moment_rows, dim);
    stacked.view_mut((0, 0), (dim, dim)).copy_from(&omega_mat);
    for (jcol, b) in basis.iter().enumerate() {
        let mut row = dim;
        for a in 0..actions.len() {
            let d = space.moment_dleft(p, a, b);
            for val in d.iter() {
                stacked[(row, jcol)] = *val;
                row += 1;
            }
        }
    }
    let omega_rank = rank_with_tol(&omega_mat);
    let kernel_dim = dim - rank_with_tol(&stacked);
    KernelReport { dim, omega_rank, kernel_dim }
}

/// Componentwise twisted conjugation of a moment value by a group element.
pub fn moment_conjugate(m: &TwistedElement, k: &CMat) -> TwistedElement {
    m.twisted_conjugate(k).expect("sizes agree")
}

/// Equivariance: acting with a random element of one factor conjugates that
/// factor's moment and fixes the others. Returns the max relative deviation.
pub fn equivariance_residual(space: &dyn QhSpace, p: &Point, rng: &mut StdRng) -> f64 {
    let actions = space.actions();
    let mut worst: f64 = 0.0;
    for a in 0..actions.len() {
        let k = actions[a].sample_group(rng);
        let moved = space.act(p, a, &k);
        for b in 0..actions.len() {
            let before = space.moment(p, b);
            let after = space.moment(&moved, b);
            let expected = if a == b { moment_conjugate(&before, &k).g } else { before.g };
            worst = worst.max(rel_err(&after.g, &expected));
        }
    }
    worst
}

/// Invariance of the two-form under the action, with pushed-forward tangents.
pub fn invariance_residual(
    space: &dyn QhSpace,
    p: &Point,
    u: &Tangent,
    v: &Tangent,
    rng: &mut StdRng,
) -> f64 {
    let actions = space.actions();
    let before = space.omega(p, u, v);
    let mut worst: f64 = 0.0;
    for (a, factor) in actions.iter().enumerate() {
        let k = factor.sample_group(rng);
        let moved = space.act(p, a, &k);
        let pu = space.push_tangent(a, &k, u);
        let pv = space.push_tangent(a, &k, v);
        let after = space.omega(&moved, &pu, &pv);
        let scale = before.norm().max(after.norm()).max(1.0);
        worst = worst.max((before - after).norm() / scale);
    }
    worst
}

/// Aggregated residuals of a verification sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AxiomReport {
    pub space: String,
    pub seeds: u64,
    pub qh1_max: f64,
    pub qh1_mean: f64,
    pub qh2_max: f64,
    pub qh2_mean: f64,
    pub equivariance_max: f64,
    pub equivariance_mean: f64,
    pub invariance_max: f64,
    pub invariance_mean: f64,
    pub qh3_kernel_max: usize,
    pub omega_rank_min: usize,
    pub tangent_dim: usize,
    pub pass: bool,
    pub qh_tolerance: f64,
    pub equivariance_tolerance: f64,
}

struct SeedOutcome {
    qh1: f64,
    qh2: f64,
    equiv: f64,
    invar: f64,
    kernel: usize,
    omega_rank: usize,
}

fn run_seed(space: &dyn QhSpace, seed: u64, with_kernel: bool) -> SeedOutcome {
    use rand::SeedableRng;
    let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let p = space.sample(&mut rng);
    let u = random_tangent(space, &p, &mut rng);
    let v = random_tangent(space, &p, &mut rng);
    let w = random_tangent(space, &p, &mut rng);
    let xs: Vec<CMat> = space.actions().iter().map(|a| a.sample_lie(&mut rng)).collect();
    let qh1 = qh1_residual(space, &p, &u, &v, &w);
    let qh2 = qh2_residual(space, &p, &xs, &u);
    let equiv = equivariance_residual(space, &p, &mut rng);
    let invar = invariance_residual(space, &p, &u, &v, &mut rng);
    let (kernel, omega_rank) = if with_kernel {
        let k = qh3_kernel(space, &p);
        (k.kernel_dim, k.omega_rank)
    } else {
        (0, usize::MAX)
    };
    SeedOutcome { qh1, qh2, equiv, invar, kernel, omega_rank }
}

/// Runs the full residual suite over `seeds` random points in parallel.
pub fn verify_space(space: &dyn QhSpace, seeds: u64, qh_tolerance: f64) -> AxiomReport {
    let outcomes: Vec<SeedOutcome> =
        (0..seeds).into_par_iter().map(|s| run_seed(space, s, true)).collect();
    let n = outcomes.len().max(1) as f64;
    let qh1_max = outcomes.iter().map(|o| o.qh1).fold(0.0, f64::max);
    let qh2_max = outcomes.iter().map(|o| o.qh2).fold(0.0, f64::max);
    let report = AxiomReport {
        space: space.name(),
        seeds,
        qh1_max,
        qh1_mean: outcomes.iter().map(|o| o.qh1).sum::<f64>() / n,
        qh2_max,
        qh2_mean: outcomes.iter().map(|o| o.qh2).sum::<f64>() / n,
        equivariance_max: outcomes.iter().map(|o| o.equiv).fold(0.0, f64::max),
        equivariance_mean: outcomes.iter().map(|o| o.equiv).sum::<f64>() / n,
        invariance_max: outcomes.iter().map(|o| o.invar).fold(0.0, f64::max),
        invariance_mean: outcomes.iter().map(|o| o.invar).sum::<f64>() / n,
        qh3_kernel_max: outcomes.iter().map(|o| o.kernel).max().unwrap_or(0),
        omega_rank_min: outcomes.iter().map(|o| o.omega_rank).min().unwrap_or(0),
        tangent_dim: space.dim(),
        pass: false,
        qh_tolerance,
        equivariance_tolerance: tol::EQUIVARIANCE,
    };
    finalize(report)
}

fn finalize(mut r: AxiomReport) -> AxiomReport {
    r.pass = r.qh1_max < r.qh_tolerance
        && r.qh2_max < r.qh_tolerance
        && r.equivariance_max < r.equivariance_tolerance
        && r.invariance_max < r.equivariance_tolerance
        && r.qh3_kernel_max == 0;
    r
}

/// Negative control: the same space with the sign of its two-form flipped.
/// Both differential axioms must then fail loudly.
pub struct SignCorrupted<S: QhSpace>(pub S);

impl<S: QhSpace> QhSpace for SignCorrupted<S> {
    fn name(&self) -> String {
        format!("{} [corrupted sign]", self.0.name())
    }
    fn slots(&self) -> usize {
        self.0.slots()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn sample(&self, rng: &mut StdRng) -> Point {
        self.0.sample(rng)
    }
    fn tangent_basis(&self, p: &Point) -> Vec<Tangent> {
        self.0.tangent_basis(p)
    }
    fn flow(&self, p: &Point, u: &Tangent, t: f64) -> Point {
        self.0.flow(p, u, t)
    }
    fn bracket(&self, u: &Tangent, v: &Tangent) -> Tangent {
        self.0.bracket(u, v)
    }
    fn omega(&self, p: &Point, u: &Tangent, v: &Tangent) -> C64 {
        -self.0.omega(p, u, v)
    }
    fn actions(&self) -> Vec<ActionFactor> {
        self.0.actions()
    }
    fn act(&self, p: &Point, factor: usize, k: &CMat) -> Point {
        self.0.act(p, factor, k)
    }
    fn fundamental(&self, p: &Point, factor: usize, x: &CMat) -> Tangent {
        self.0.fundamental(p, factor, x)
    }
    fn push_tangent(&self, factor: usize, k: &CMat, u: &Tangent) -> Tangent {
        self.0.push_tangent(factor, k, u)
    }
    fn moment(&self, p: &Point, factor: usize) -> TwistedElement {
        self.0.moment(p, factor)
    }
    fn moment_dleft(&self, p: &Point, factor: usize, u: &Tangent) -> CMat {
        self.0.moment_dleft(p, factor, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::twisted_double;
    use rand::SeedableRng;

    /// Re-derives the frozen convention constants on the untwisted double
    /// `D(G)`: the calibration space. If this test fails the constants in
    /// [`convention`] were tampered with.
    #[test]
    fn conventions_match_the_calibration_space() {
        let d = twisted_double(2, &Automorphism::Identity, &Automorphism::Identity);
        let mut rng = StdRng::seed_from_u64(2024);
        let p = d.sample(&mut rng);
        let u = random_tangent(&d, &p, &mut rng);
        let v = random_tangent(&d, &p, &mut rng);
        let w = random_tangent(&d, &p, &mut rng);
        // QH1 coefficient: d omega / chi_raw.
        let ratio = d_omega(&d, &p, &u, &v, &w) / pullback_cartan(&d, &p, &u, &v, &w);
        assert!((ratio.re - convention::QH1_COEFF).abs() < 1e-4, "qh1 ratio {}", ratio);
        assert!(ratio.im.abs() < 1e-4);
        // QH2 coefficient: omega(v_X, u) / <mu*(theta+theta_bar)u, X>.
        let xs: Vec<CMat> = d.actions().iter().map(|a| a.sample_lie(&mut rng)).collect();
        let mut v_x: Tangent = p.iter().map(|m| zeros(m.nrows(), m.ncols())).collect();
        for (a, x) in xs.iter().enumerate() {
            v_x = tangent_add(&v_x, &d.fundamental(&p, a, x));
        }
        let lhs = d.omega(&p, &v_x, &u);
        let mut rhs = c(0.0, 0.0);
        for (a, x) in xs.iter().enumerate() {
            let m = d.moment(&p, a);
            let raw = d.moment_dleft(&p, a, &u);
            let theta = m.phi.inverse().apply_lie(&raw);
            let theta_bar = &m.g * &raw * crate::linalg::inverse(&m.g);
            rhs += trace_form(&(theta + theta_bar), x);
        }
        let ratio = lhs / rhs;
        assert!((ratio.re - convention::QH2_COEFF).abs() < 1e-9, "qh2 ratio {}", ratio);
        // The fused double passing QH1 pins the fusion coefficient: flipping
        // it must break the axiom.
        let r_ok = qh1_residual(&d, &p, &u, &v, &w);
        assert!(r_ok < tol::QH_AXIOM);
        let bad = SignCorrupted(d);
        let r_bad = qh1_residual(&bad, &p, &u, &v, &w);
        assert!(r_bad > 1e-2, "sign corruption must be detected, got {}", r_bad);
    }
}
