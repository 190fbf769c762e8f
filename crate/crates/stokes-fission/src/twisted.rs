//! Concrete matrix model of `G x| Aut(G)`: automorphisms, twisted elements
//! `(g, phi)` in `G(phi)`, twisted conjugation, and membership tests for the
//! twist cosets `H(del) = H P`.

use crate::linalg::{c, eye, inverse, rel_err, BlockStructure, CMat};
use crate::tol;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum TwistError {
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// Automorphism of `GL_N`: identity, inner (conjugation by `P`), the outer
/// involution `g -> J g^(-T) J^(-1)`, or a composite chain.
#[derive(Clone, Debug)]
pub enum Automorphism {
    Identity,
    Inner(CMat),
    Outer(CMat),
    /// Applied right to left: `Composite([a, b])` is `a o b`.
    Composite(Vec<Automorphism>),
}

impl Automorphism {
    pub fn apply(&self, g: &CMat) -> CMat {
        match self {
            Automorphism::Identity => g.clone(),
            Automorphism::Inner(p) => p * g * inverse(p),
            Automorphism::Outer(j) => j * inverse(&g.transpose()) * inverse(j),
            Automorphism::Composite(parts) => {
                let mut out = g.clone();
                for part in parts.iter().rev() {
                    out = part.apply(&out);
                }
                out
            }
        }
    }

    /// Differential at the identity, acting on the Lie algebra.
    pub fn apply_lie(&self, x: &CMat) -> CMat {
        match self {
            Automorphism::Identity => x.clone(),
            Automorphism::Inner(p) => p * x * inverse(p),
            Automorphism::Outer(j) => -(j * x.transpose() * inverse(j)),
            Automorphism::Composite(parts) => {
                let mut out = x.clone();
                for part in parts.iter().rev() {
                    out = part.apply_lie(&out);
                }
                out
            }
        }
    }

    pub fn inverse(&self) -> Automorphism {
        match self {
            Automorphism::Identity => Automorphism::Identity,
            Automorphism::Inner(p) => Automorphism::Inner(inverse(p)),
            Automorphism::Outer(j) => Automorphism::Outer(j.transpose()),
            Automorphism::Composite(parts) => {
                Automorphism::Composite(parts.iter().rev().map(|p| p.inverse()).collect())
            }
        }
    }

    /// Composition `self o other` (apply `other` first).
    pub fn compose(&self, other: &Automorphism) -> Automorphism {
        match (self, other) {
            (Automorphism::Identity, x) | (x, Automorphism::Identity) => x.clone(),
            (Automorphism::Inner(p), Automorphism::Inner(q)) => Automorphism::Inner(p * q),
            (a, b) => Automorphism::Composite(vec![a.clone(), b.clone()]),
        }
    }

    /// Canonical form `(flip, B)` acting as `g -> B g^(-T if flip) B^(-1)`.
    /// Every automorphism built from the variants above normalises this way.
    pub fn normal_form(&self, n: usize) -> (bool, CMat) {
        match self {
            Automorphism::Identity => (false, eye(n)),
            Automorphism::Inner(p) => (false, p.clone()),
            Automorphism::Outer(j) => (true, j.clone()),
            Automorphism::Composite(parts) => {
                let mut flip = false;
                let mut b = eye(n);
                // Fold right to left: (f1,B1) o (f2,B2) = (f1 xor f2, B')
                // with B' = B1 B2^(-T) when f1, else B1 B2.
                for part in parts.iter().rev() {
                    let (f1, b1) = part.normal_form(n);
                    b = if f1 { &b1 * inverse(&b.transpose()) } else { &b1 * &b };
                    flip ^= f1;
                }
                (flip, b)
            }
        }
    }

    /// Structural equality up to normalisation, checked to machine precision.
    pub fn equivalent(&self, other: &Automorphism, n: usize) -> bool {
        let (f1, b1) = self.normal_form(n);
        let (f2, b2) = other.normal_form(n);
        if f1 != f2 {
            return false;
        }
        // Inner automorphisms agree iff the matrices differ by a scalar.
        let ratio = &b2 * inverse(&b1);
        let lambda = ratio.trace() / c(n as f64, 0.0);
        rel_err(&ratio, &(eye(n) * lambda)) < 1e-9
    }
}

/// An element `(g, phi)` of the twist `G(phi)` inside `G x| Aut(G)`.
#[derive(Clone, Debug)]
pub struct TwistedElement {
    pub g: CMat,
    pub phi: Automorphism,
}

impl TwistedElement {
    pub fn new(g: CMat, phi: Automorphism) -> TwistedElement {
        TwistedElement { g, phi }
    }

    pub fn untwisted(g: CMat) -> TwistedElement {
        TwistedElement { g, phi: Automorphism::Identity }
    }

    pub fn size(&self) -> usize {
        self.g.nrows()
    }

    /// Semidirect product: `(g1, phi1)(g2, phi2) = (g1 phi1(g2), phi1 phi2)`.
    pub fn compose(&self, other: &TwistedElement) -> Result<TwistedElement, TwistError> {
        if self.size() != other.size() {
            return Err(TwistError::SizeMismatch(self.size(), other.size()));
        }
        Ok(TwistedElement {
            g: &self.g * self.phi.apply(&other.g),
            phi: self.phi.compose(&other.phi),
        })
    }

    pub fn inverse(&self) -> TwistedElement {
        let phi_inv = self.phi.inverse();
        TwistedElement { g: phi_inv.apply(&inverse(&self.g)), phi: phi_inv }
    }

    /// Twisted conjugation by `h in G`: `(g, phi) -> (h g phi(h)^(-1), phi)`.
    pub fn twisted_conjugate(&self, h: &CMat) -> Result<TwistedElement, TwistError> {
        if h.nrows() != self.size() {
            return Err(TwistError::SizeMismatch(h.nrows(), self.size()));
        }
        Ok(TwistedElement {
            g: h * &self.g * inverse(&self.phi.apply(h)),
            phi: self.phi.clone(),
        })
    }

    /// Left Maurer-Cartan form of the ambient group restricted to the twist
    /// component, applied to a tangent vector `v` at `g`:
    /// `theta(v) = dphi^(-1)(g^(-1) v)`.
    pub fn maurer_cartan_left(&self, v: &CMat) -> CMat {
        self.phi.inverse().apply_lie(&(inverse(&self.g) * v))
    }

    /// Right Maurer-Cartan form: `theta_bar(v) = v g^(-1)`.
    pub fn maurer_cartan_right(&self, v: &CMat) -> CMat {
        v * inverse(&self.g)
    }
}

/// True iff `m` lies in the coset `H P`, i.e. `m P^(-1)` is block-diagonal
/// for the Levi blocks and invertible.
pub fn in_twist_coset(m: &CMat, blocks: &BlockStructure, p: &CMat) -> bool {
    let candidate = m * inverse(p);
    if !blocks.is_block_diagonal(&candidate, tol::COSET) {
        return false;
    }
    (0..blocks.len()).all(|i| {
        let b = blocks.block(&candidate, i, i);
        b.determinant().norm() > 1e-12
    })
}
