//! The twisted fission space `A(Q) = G x H(del) x prod_d Sto_d` as an
//! explicit matrix manifold: points, tangents, the action of `G x H`, the
//! moment map, the algebraic two-form and the quasi-Hamiltonian residuals.

use rand::rngs::StdRng;

use crate::linalg::{
    c, commutator, expm, eye, frob, inverse, log_unipotent, random_gaussian, random_invertible,
    trace_form, zeros, BlockStructure, C64, CMat,
};
use crate::qh::{ActionFactor, KernelReport, Point, QhSpace, Tangent};
use crate::stokes::{invert_permutation, IrregularClass, StokesStructure};
use crate::tol;
use crate::twisted::{in_twist_coset, Automorphism, TwistedElement};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("the k-factor of the action must lie in the Levi H (block diagonal)")]
    NotInLevi,
    #[error("Stokes directions are not nilpotent: root cycle through branch {0}")]
    NotNilpotent(usize),
    #[error("one-level operation on a model with levels {0}")]
    MultiLevel(String),
    #[error("model has no singular directions")]
    NoDirections,
}

/// Matrix model of a fission space built from the Stokes data of an
/// irregular class.
pub struct FissionModel {
    name: String,
    n: usize,
    blocks: BlockStructure,
    sigma: Vec<usize>,
    p_mat: CMat,
    stokes: StokesStructure,
    /// Elementary-matrix basis of each `sto_d`.
    dir_bases: Vec<Vec<CMat>>,
    /// Root pairs per direction, for membership tests.
    root_sets: Vec<Vec<(usize, usize)>>,
}

impl FissionModel {
    pub fn from_class(name: &str, class: &IrregularClass) -> Result<FissionModel, ModelError> {
        let stokes = class.singular_directions();
        FissionModel::from_stokes(name, stokes)
    }

    pub fn from_stokes(name: &str, stokes: StokesStructure) -> Result<FissionModel, ModelError> {
        if stokes.directions.is_empty() {
            return Err(ModelError::NoDirections);
        }
        let blocks = BlockStructure::new(stokes.blocks.clone());
        let inv = invert_permutation(&stokes.sigma);
        let support: Vec<(usize, usize)> = (0..blocks.len()).map(|col| (inv[col], col)).collect();
        let p_mat = blocks.permutation_matrix(&support);
        let root_sets = stokes.root_sets();
        // Each sto_d must exponentiate to a unipotent group: the root pairs
        // viewed as edges col -> row may not close a directed cycle, and the
        // composite of two roots at d is again a root at d.
        for set in &root_sets {
            check_nilpotent(set, blocks.len())?;
            for &(i, j) in set {
                for &(k, l) in set {
                    if j == k {
                        assert!(set.contains(&(i, l)), "root sets close under composition");
                    }
                }
            }
        }
        let dir_bases = root_sets
            .iter()
            .map(|set| {
                let mut basis = Vec::new();
                for &(i, j) in set {
                    basis.extend(blocks.block_basis(i, j));
                }
                basis
            })
            .collect();
        Ok(FissionModel {
            name: name.to_string(),
            n: stokes.n,
            blocks,
            sigma: stokes.sigma.clone(),
            p_mat,
            stokes,
            dir_bases,
            root_sets,
        })
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn directions(&self) -> usize {
        self.dir_bases.len()
    }

    pub fn stokes(&self) -> &StokesStructure {
        &self.stokes
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    pub fn permutation_matrix(&self) -> &CMat {
        &self.p_mat
    }

    pub fn stokes_dim(&self, d: usize) -> usize {
        self.dir_bases[d].len()
    }

    /// `dim A(Q) = dim G + dim H + sum_d dim sto_d`.
    pub fn dimension(&self) -> usize {
        self.n * self.n
            + self.blocks.dim_diagonal()
            + self.dir_bases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Topological order of the branches adapted to direction `d`: the root
    /// pairs become strictly block-triangular in this order.
    pub fn adapted_order(&self, d: usize) -> Vec<usize> {
        topological_order(&self.root_sets[d], self.blocks.len())
    }

    pub fn sample_point(&self, rng: &mut StdRng) -> FissionPoint {
        let c_mat = random_invertible(self.n, rng);
        let h = self.blocks.random_block_diagonal(rng) * &self.p_mat;
        let s = (0..self.directions())
            .map(|d| expm(&self.random_stokes_lie(d, rng)))
            .collect();
        FissionPoint { c: c_mat, h, s }
    }

    /// Random element of `sto_d`, capped at unit Frobenius norm so that
    /// products of Stokes factors stay well scaled.
    pub fn random_stokes_lie(&self, d: usize, rng: &mut StdRng) -> CMat {
        let mut x = zeros(self.n, self.n);
        for b in &self.dir_bases[d] {
            let z = c(
                rand::Rng::sample(rng, rand_distr::StandardNormal),
                rand::Rng::sample(rng, rand_distr::StandardNormal),
            );
            x += b * z;
        }
        let scale = frob(&x).max(1.0);
        x * c(1.0 / scale, 0.0)
    }

    /// Projects onto the span of `sto_d` and reports the residual mass left
    /// outside (zero iff the matrix lies in `sto_d`).
    pub fn stokes_defect(&self, d: usize, x: &CMat) -> f64 {
        let mut outside = x.clone();
        for &(i, j) in &self.root_sets[d] {
            let zero = zeros(self.blocks.size(i), self.blocks.size(j));
            self.blocks.set_block(&mut outside, i, j, &zero);
        }
        frob(&outside) / frob(x).max(1.0)
    }

    /// Validates a point: `h` in the coset `H P`, each `S_d` unipotent with
    /// `log(S_d)` in `sto_d`.
    pub fn is_valid_point(&self, p: &FissionPoint) -> bool {
        if !in_twist_coset(&p.h, &self.blocks, &self.p_mat) {
            return false;
        }
        p.s.iter().enumerate().all(|(d, s)| {
            let log = log_unipotent(s);
            self.stokes_defect(d, &log) < 1e-8
        })
    }

    /// The action `(g, k): (C, S, h) -> (k C g^(-1), k S k^(-1), k h k^(-1))`.
    pub fn action(&self, g: &CMat, k: &CMat, p: &FissionPoint) -> Result<FissionPoint, ModelError> {
        if !self.blocks.is_block_diagonal(k, tol::COSET) {
            return Err(ModelError::NotInLevi);
        }
        let k_inv = inverse(k);
        Ok(FissionPoint {
            c: k * &p.c * inverse(g),
            h: k * &p.h * &k_inv,
            s: p.s.iter().map(|s| k * s * &k_inv).collect(),
        })
    }

    /// Moment map `mu(C, S, h) = (C^(-1) h S_s ... S_1 C, h^(-1))`, the first
    /// component in `G(del)`, the second in the opposite coset `H(del-bar)`.
    pub fn moment_map(&self, p: &FissionPoint) -> (TwistedElement, TwistedElement) {
        let mut prod = p.c.clone();
        for s in &p.s {
            prod = s * prod;
        }
        let mu_g = inverse(&p.c) * &p.h * prod;
        (TwistedElement::untwisted(mu_g), TwistedElement::untwisted(inverse(&p.h)))
    }

    /// Chains `C_i = S_i ... S_1 C` for `i = 0..s` and their differentials
    /// along a tangent, by the product rule for the curve convention.
    fn chains(&self, p: &FissionPoint) -> Vec<CMat> {
        let mut out = Vec::with_capacity(p.s.len() + 1);
        out.push(p.c.clone());
        for s in &p.s {
            let last = out.last().unwrap();
            out.push(s * last);
        }
        out
    }

    fn chain_differentials(&self, p: &FissionPoint, chains: &[CMat], u: &FissionTangent) -> Vec<CMat> {
        let mut out = Vec::with_capacity(chains.len());
        out.push(&u.c * &p.c);
        for (i, s) in p.s.iter().enumerate() {
            let prev = &out[i];
            out.push(&u.sigmas[i] * &chains[i + 1] + s * prev);
        }
        out
    }

    /// The two-form of the fission space:
    /// `2 w = (gbar, Ad_b gbar) + (gbar, bbar) + (gbar_s, eta_hat)
    ///        - sum_i (g_i, g_(i-1))`
    /// with `g_i = C_i^(-1) dC_i`, `gbar_i = dC_i C_i^(-1)`, `b = h S_s...S_1`,
    /// `bbar = db b^(-1)`, `eta_hat = h^(-1) dh`, and the wedge pairing
    /// `(a, b)(u, v) = tr(a(u) b(v)) - tr(a(v) b(u))`.
    pub fn two_form(&self, p: &FissionPoint, u: &FissionTangent, v: &FissionTangent) -> C64 {
        let chains = self.chains(p);
        let s = p.s.len();
        let b = &p.h * &chains[s] * inverse(&p.c);
        let b_inv = inverse(&b);
        let h_inv = inverse(&p.h);
        let inv_chains: Vec<CMat> = chains.iter().map(inverse).collect();

        let du = self.chain_differentials(p, &chains, u);
        let dv = self.chain_differentials(p, &chains, v);

        let gbar = |d: &[CMat], i: usize| -> CMat { &d[i] * &inv_chains[i] };
        let gamma = |d: &[CMat], i: usize| -> CMat { &inv_chains[i] * &d[i] };

        // db = eta h T + h dT with T = S_s...S_1 = C_s C^(-1); reuse the
        // chain differentials: d(T C) = dC_s, so dT = (dC_s - T dC) C^(-1).
        let t_mat = &chains[s] * &inv_chains[0];
        let db = |d: &[CMat], eta: &CMat| -> CMat {
            let dt = (&d[s] - &t_mat * &d[0]) * &inv_chains[0];
            eta * &p.h * &t_mat + &p.h * dt
        };
        let bbar_u = db(&du, &u.eta) * &b_inv;
        let bbar_v = db(&dv, &v.eta) * &b_inv;
        let eta_hat_u = &h_inv * &u.eta * &p.h;
        let eta_hat_v = &h_inv * &v.eta * &p.h;

        let wedge = |au: &CMat, av: &CMat, bu: &CMat, bv: &CMat| -> C64 {
            trace_form(au, bv) - trace_form(av, bu)
        };

        let gbar0_u = gbar(&du, 0);
        let gbar0_v = gbar(&dv, 0);
        let ad_b = |x: &CMat| -> CMat { &b * x * &b_inv };
        let mut two_omega = wedge(&gbar0_u, &gbar0_v, &ad_b(&gbar0_u), &ad_b(&gbar0_v));
        two_omega += wedge(&gbar0_u, &gbar0_v, &bbar_u, &bbar_v);
        two_omega += wedge(&gbar(&du, s), &gbar(&dv, s), &eta_hat_u, &eta_hat_v);
        for i in 1..=s {
            two_omega -= wedge(&gamma(&du, i), &gamma(&dv, i), &gamma(&du, i - 1), &gamma(&dv, i - 1));
        }
        two_omega * c(0.5, 0.0)
    }

    /// Left-trivialised derivative of both moment components along `u`.
    pub fn d_moment(&self, p: &FissionPoint, u: &FissionTangent) -> (CMat, CMat) {
        let chains = self.chains(p);
        let s = p.s.len();
        let du = self.chain_differentials(p, &chains, u);
        let c_inv = inverse(&p.c);
        let t_mat = &chains[s] * &c_inv;
        let b = &p.h * &t_mat;
        let b_inv = inverse(&b);
        // mu_G = C^(-1) b C: mu^(-1) d mu = C^(-1) b^(-1) [-c b + db + b c] C
        // with c the curve coefficient of the C slot.
        let dt = (&du[s] - &t_mat * &du[0]) * &c_inv;
        let db = &u.eta * &b + &p.h * dt;
        let inner = -(&u.c) * &b + db + &b * &u.c;
        let d_mu_g = &c_inv * &b_inv * inner * &p.c;
        // mu_H = h^(-1): mu^(-1) d mu = -eta.
        let d_mu_h = -u.eta.clone();
        (d_mu_g, d_mu_h)
    }

    /// Tangent basis in the `(c, eta, sigma)` trivialisation.
    pub fn tangent_basis_points(&self) -> Vec<FissionTangent> {
        let mut out = Vec::with_capacity(self.dimension());
        let full = BlockStructure::new(vec![self.n]);
        for b in full.block_basis(0, 0) {
            out.push(self.tangent_from_parts(Some(b), None, None));
        }
        for i in 0..self.blocks.len() {
            for b in self.blocks.block_basis(i, i) {
                out.push(self.tangent_from_parts(None, Some(b), None));
            }
        }
        for d in 0..self.directions() {
            for b in &self.dir_bases[d] {
                out.push(self.tangent_from_parts(None, None, Some((d, b.clone()))));
            }
        }
        out
    }

    fn tangent_from_parts(
        &self,
        c_part: Option<CMat>,
        eta: Option<CMat>,
        sigma: Option<(usize, CMat)>,
    ) -> FissionTangent {
        let mut t = FissionTangent {
            c: zeros(self.n, self.n),
            eta: zeros(self.n, self.n),
            sigmas: vec![zeros(self.n, self.n); self.directions()],
        };
        if let Some(x) = c_part {
            t.c = x;
        }
        if let Some(x) = eta {
            t.eta = x;
        }
        if let Some((d, x)) = sigma {
            t.sigmas[d] = x;
        }
        t
    }

    pub fn random_tangent(&self, rng: &mut StdRng) -> FissionTangent {
        FissionTangent {
            c: random_gaussian(self.n, self.n, rng) * c(1.0 / (self.n as f64), 0.0),
            eta: self.blocks.random_diagonal_lie(rng) * c(1.0 / (self.n as f64), 0.0),
            sigmas: (0..self.directions())
                .map(|d| self.random_stokes_lie(d, rng) * c(0.3, 0.0))
                .collect(),
        }
    }

    /// QH1 residual at `(p, u, v, w)` (see [`crate::qh::qh1_residual`]).
    pub fn qh1_residual(
        &self,
        p: &FissionPoint,
        u: &FissionTangent,
        v: &FissionTangent,
        w: &FissionTangent,
    ) -> f64 {
        crate::qh::qh1_residual(
            self,
            &p.to_point(),
            &u.to_tangent(),
            &v.to_tangent(),
            &w.to_tangent(),
        )
    }

    /// QH2 residual for `X = (X_G, X_H)` in `Lie(G x H)`.
    pub fn qh2_residual(&self, p: &FissionPoint, x_g: &CMat, x_h: &CMat, u: &FissionTangent) -> f64 {
        crate::qh::qh2_residual(
            self,
            &p.to_point(),
            &[x_g.clone(), x_h.clone()],
            &u.to_tangent(),
        )
    }

    /// Dimension of `ker(omega) cap ker(d mu)` at a point (expected zero).
    pub fn qh3_kernel(&self, p: &FissionPoint) -> KernelReport {
        crate::qh::qh3_kernel(self, &p.to_point())
    }

    /// One-level check: the `l` consecutive Stokes groups after any index
    /// directly span the unipotent radical of a parabolic with Levi `H`,
    /// where `l` is detected as half the minimal period of the extended
    /// root-set sequence.
    pub fn parabolic_span_check(&self) -> Result<ParabolicReport, ModelError> {
        let levels = self.stokes.levels_present();
        if levels.len() != 1 {
            let list = levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
            return Err(ModelError::MultiLevel(list));
        }
        let s = self.directions();
        let order = permutation_order(&self.sigma);
        let horizon = s * order;
        let period = (1..=horizon)
            .find(|&p2| {
                (1..=horizon).all(|j| {
                    self.stokes.extended_root_set(j + 2 * p2) == self.stokes.extended_root_set(j)
                })
            })
            .expect("extended root sets are periodic");
        let l = period;
        let half = (self.n * self.n - self.blocks.dim_diagonal()) / 2;
        let mut ok = true;
        for j in 0..2 * l {
            let mut union: Vec<(usize, usize)> = Vec::new();
            let mut dims = 0usize;
            for m in (j + 1)..=(j + l) {
                let set = self.stokes.extended_root_set(m);
                for pair in &set {
                    if union.contains(pair) {
                        ok = false;
                    }
                }
                dims += set.iter().map(|&(a, b)| self.blocks.size(a) * self.blocks.size(b)).sum::<usize>();
                union.extend(set);
            }
            if dims != half {
                ok = false;
            }
            // The union must be one-sided: no pair together with its
            // transpose, which makes it the radical of a parabolic with
            // Levi H once composition closure holds.
            for &(a, b) in &union {
                if union.contains(&(b, a)) {
                    ok = false;
                }
                for &(x, y) in &union {
                    if b == x && !union.contains(&(a, y)) {
                        ok = false;
                    }
                }
            }
        }
        Ok(ParabolicReport { l, half_dimension: half, ok })
    }

    /// Root-set periodicity under the formal twist: transporting the
    /// sequence once around the circle permutes it, with period dividing
    /// `2l * order(sigma)`.
    pub fn periodicity_check(&self) -> bool {
        let s = self.directions();
        let order = permutation_order(&self.sigma);
        (1..=s).all(|j| self.stokes.extended_root_set(j + s * order) == self.stokes.extended_root_set(j))
    }
}

fn check_nilpotent(set: &[(usize, usize)], branches: usize) -> Result<(), ModelError> {
    // Edges col -> row; a directed cycle would make products non-nilpotent.
    topological_order_checked(set, branches).map(|_| ())
}

fn topological_order(set: &[(usize, usize)], branches: usize) -> Vec<usize> {
    topological_order_checked(set, branches).expect("root sets are acyclic")
}

fn topological_order_checked(set: &[(usize, usize)], branches: usize) -> Result<Vec<usize>, ModelError> {
    // Kahn's algorithm on the branch graph with an edge j -> i per root (i, j).
    let mut indeg = vec![0usize; branches];
    for &(i, _) in set {
        indeg[i] += 1;
    }
    let mut queue: Vec<usize> = (0..branches).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(branches);
    while let Some(v) = queue.pop() {
        order.push(v);
        for &(i, j) in set {
            if j == v {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    queue.push(i);
                }
            }
        }
    }
    if order.len() != branches {
        let stuck = (0..branches).find(|&v| indeg[v] > 0).unwrap_or(0);
        return Err(ModelError::NotNilpotent(stuck));
    }
    Ok(order)
}

fn permutation_order(sigma: &[usize]) -> usize {
    let mut order = 1usize;
    let mut seen = vec![false; sigma.len()];
    for start in 0..sigma.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut cur = start;
        loop {
            seen[cur] = true;
            len += 1;
            cur = sigma[cur];
            if cur == start {
                break;
            }
        }
        order = num::Integer::lcm(&order, &len);
    }
    order
}

#[derive(Clone, Debug)]
pub struct ParabolicReport {
    pub l: usize,
    pub half_dimension: usize,
    pub ok: bool,
}

/// A point `(C, h, S)` of the fission space.
#[derive(Clone, Debug)]
pub struct FissionPoint {
    pub c: CMat,
    pub h: CMat,
    pub s: Vec<CMat>,
}

impl FissionPoint {
    pub fn to_point(&self) -> Point {
        let mut p = vec![self.c.clone(), self.h.clone()];
        p.extend(self.s.iter().cloned());
        p
    }

    pub fn from_point(p: &Point) -> FissionPoint {
        FissionPoint { c: p[0].clone(), h: p[1].clone(), s: p[2..].to_vec() }
    }
}

/// Tangent data `(c, eta, sigma_1..sigma_s)` in the curve convention
/// `t -> exp(t xi) X` on each factor; `eta` block diagonal, `sigma_d` in
/// `sto_d`.
#[derive(Clone, Debug)]
pub struct FissionTangent {
    pub c: CMat,
    pub eta: CMat,
    pub sigmas: Vec<CMat>,
}

impl FissionTangent {
    pub fn to_tangent(&self) -> Tangent {
        let mut t = vec![self.c.clone(), self.eta.clone()];
        t.extend(self.sigmas.iter().cloned());
        t
    }

    pub fn from_tangent(t: &Tangent) -> FissionTangent {
        FissionTangent { c: t[0].clone(), eta: t[1].clone(), sigmas: t[2..].to_vec() }
    }
}

impl QhSpace for FissionModel {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn slots(&self) -> usize {
        2 + self.directions()
    }

    fn dim(&self) -> usize {
        self.dimension()
    }

    fn sample(&self, rng: &mut StdRng) -> Point {
        self.sample_point(rng).to_point()
    }

    fn tangent_basis(&self, _p: &Point) -> Vec<Tangent> {
        self.tangent_basis_points().iter().map(|t| t.to_tangent()).collect()
    }

    fn flow(&self, p: &Point, u: &Tangent, t: f64) -> Point {
        p.iter()
            .zip(u.iter())
            .map(|(x, xi)| expm(&(xi * c(t, 0.0))) * x)
            .collect()
    }

    fn bracket(&self, u: &Tangent, v: &Tangent) -> Tangent {
        u.iter().zip(v.iter()).map(|(a, b)| -commutator(a, b)).collect()
    }

    fn omega(&self, p: &Point, u: &Tangent, v: &Tangent) -> C64 {
        self.two_form(
            &FissionPoint::from_point(p),
            &FissionTangent::from_tangent(u),
            &FissionTangent::from_tangent(v),
        )
    }

    fn actions(&self) -> Vec<ActionFactor> {
        let full = BlockStructure::new(vec![self.n]);
        vec![
            ActionFactor {
                name: "G".to_string(),
                size: self.n,
                lie_basis: full.block_basis(0, 0),
                twist: Automorphism::Identity,
                blocks: None,
            },
            ActionFactor {
                name: "H".to_string(),
                size: self.n,
                lie_basis: (0..self.blocks.len())
                    .flat_map(|i| self.blocks.block_basis(i, i))
                    .collect(),
                twist: Automorphism::Identity,
                blocks: Some(self.blocks.clone()),
            },
        ]
    }

    fn act(&self, p: &Point, factor: usize, k: &CMat) -> Point {
        let fp = FissionPoint::from_point(p);
        let moved = match factor {
            0 => self.action(k, &eye(self.n), &fp),
            1 => self.action(&eye(self.n), k, &fp),
            _ => unreachable!("two action factors"),
        }
        .expect("sampled group elements satisfy the preconditions");
        moved.to_point()
    }

    fn fundamental(&self, p: &Point, factor: usize, x: &CMat) -> Tangent {
        let fp = FissionPoint::from_point(p);
        match factor {
            0 => {
                // (C, S, h) -> (C exp(-tX), S, h): c = -C X C^(-1).
                let t = FissionTangent {
                    c: -(&fp.c * x * inverse(&fp.c)),
                    eta: zeros(self.n, self.n),
                    sigmas: vec![zeros(self.n, self.n); self.directions()],
                };
                t.to_tangent()
            }
            1 => {
                // (C, S, h) -> (exp(tX) C, exp(tX) S exp(-tX), ...):
                // eta = X - Ad_h X, sigma_d = X - Ad_(S_d) X.
                let t = FissionTangent {
                    c: x.clone(),
                    eta: x - &fp.h * x * inverse(&fp.h),
                    sigmas: fp.s.iter().map(|s| x - s * x * inverse(s)).collect(),
                };
                t.to_tangent()
            }
            _ => unreachable!(),
        }
    }

    fn push_tangent(&self, factor: usize, k: &CMat, u: &Tangent) -> Tangent {
        match factor {
            0 => u.clone(),
            1 => {
                let k_inv = inverse(k);
                u.iter().map(|x| k * x * &k_inv).collect()
            }
            _ => unreachable!(),
        }
    }

    fn moment(&self, p: &Point, factor: usize) -> TwistedElement {
        let fp = FissionPoint::from_point(p);
        let (mu_g, mu_h) = self.moment_map(&fp);
        match factor {
            0 => mu_g,
            1 => mu_h,
            _ => unreachable!(),
        }
    }

    fn moment_dleft(&self, p: &Point, factor: usize, u: &Tangent) -> CMat {
        let fp = FissionPoint::from_point(p);
        let fu = FissionTangent::from_tangent(u);
        let (dg, dh) = self.d_moment(&fp, &fu);
        match factor {
            0 => dg,
            1 => dh,
            _ => unreachable!(),
        }
    }
}
