//! Ramified exponents `q = sum a_i z^(-i/r)`, their Galois orbits, and the
//! direction geometry (points of maximal decay) of the circles they span.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, Integer, One, ToPrimitive, Zero};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cyclo::{rat_mod_one, rat_to_f64, turn_distance, Cyclo};
use crate::tol;

pub type Rat = num::BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ExponentError {
    #[error("term z^(-e) with e = {0} is not a valid exponent: e must be positive")]
    NonPositiveExponent(String),
    #[error("the zero class <0> has no points of maximal decay")]
    ZeroClassApples,
    #[error("failed to parse rational {0:?}")]
    BadRational(String),
}

/// Coefficient of a single term: exact cyclotomic in exact mode, complex
/// double in numeric mode. Mixing the two demotes the result to numeric.
#[derive(Clone, Debug)]
pub enum Coeff {
    Exact(Cyclo),
    Numeric(Complex64),
}

impl Coeff {
    pub fn from_int(v: i64) -> Coeff {
        Coeff::Exact(Cyclo::from_int(1, v))
    }

    pub fn from_rat(v: Rat) -> Coeff {
        Coeff::Exact(Cyclo::from_rat(1, v))
    }

    /// `c * zeta_m^k` as an exact coefficient.
    pub fn root_of_unity(m: u32, k: i64) -> Coeff {
        Coeff::Exact(Cyclo::root_of_unity(m, k))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coeff::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Exact(c) => c.is_zero(),
            Coeff::Numeric(z) => z.norm() < tol::NUMERIC_EQ,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Coeff::Exact(c) => c.to_complex(),
            Coeff::Numeric(z) => *z,
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a.add(b)),
            _ => Coeff::Numeric(self.to_complex() + other.to_complex()),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(a.neg()),
            Coeff::Numeric(z) => Coeff::Numeric(-z),
        }
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => Coeff::Exact(a.mul(b)),
            _ => Coeff::Numeric(self.to_complex() * other.to_complex()),
        }
    }

    pub fn scale_rat(&self, f: &Rat) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(a.scale(f)),
            Coeff::Numeric(z) => Coeff::Numeric(z * rat_to_f64(f)),
        }
    }

    /// Multiplies by `zeta_m^k`.
    pub fn mul_root_of_unity(&self, m: u32, k: i64) -> Coeff {
        match self {
            Coeff::Exact(a) => Coeff::Exact(a.mul(&Cyclo::root_of_unity(m, k))),
            Coeff::Numeric(z) => {
                let t = 2.0 * std::f64::consts::PI * (k as f64) / (m as f64);
                Coeff::Numeric(z * Complex64::new(t.cos(), t.sin()))
            }
        }
    }

    pub fn approx_eq(&self, other: &Coeff) -> bool {
        match (self, other) {
            (Coeff::Exact(a), Coeff::Exact(b)) => a.eq_exact(b),
            _ => (self.to_complex() - other.to_complex()).norm() < tol::NUMERIC_EQ,
        }
    }

    /// Argument as an exact fraction of a turn when available.
    pub fn arg_turns_exact(&self) -> Option<Rat> {
        match self {
            Coeff::Exact(c) => c.arg_turns(),
            Coeff::Numeric(_) => None,
        }
    }

    pub fn arg_turns_f64(&self) -> f64 {
        (self.to_complex().arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0)
    }
}

/// Canonical ramified exponent: a finite sum of terms `a_e z^(-e)` with
/// `e > 0` rational and `a_e` nonzero. The empty sum is the zero exponent.
#[derive(Clone, Debug, Default)]
pub struct Exponent {
    terms: BTreeMap<Rat, Coeff>,
}

impl Exponent {
    pub fn zero() -> Exponent {
        Exponent { terms: BTreeMap::new() }
    }

    /// Canonicalises a raw term list: merges duplicate exponents, drops zero
    /// coefficients, rejects non-positive exponents.
    pub fn normalize(raw: impl IntoIterator<Item = (Rat, Coeff)>) -> Result<Exponent, ExponentError> {
        let mut terms: BTreeMap<Rat, Coeff> = BTreeMap::new();
        for (e, c) in raw {
            let merged = match terms.remove(&e) {
                Some(prev) => prev.add(&c),
                None => c,
            };
            if merged.is_zero() {
                continue;
            }
            if e <= Rat::zero() {
                return Err(ExponentError::NonPositiveExponent(e.to_string()));
            }
            terms.insert(e, merged);
        }
        Ok(Exponent { terms })
    }

    /// Single-term exponent `c * z^(-e)`.
    pub fn monomial(e: Rat, c: Coeff) -> Result<Exponent, ExponentError> {
        Exponent::normalize([(e, c)])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(|c| c.is_exact())
    }

    /// Terms in descending exponent order (canonical presentation).
    pub fn terms_desc(&self) -> impl Iterator<Item = (&Rat, &Coeff)> {
        self.terms.iter().rev()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Minimal `r >= 1` with all exponents in `(1/r) Z`.
    pub fn ramification(&self) -> u32 {
        let mut r = BigInt::one();
        for e in self.terms.keys() {
            r = r.lcm(e.denom());
        }
        r.to_u32().expect("ramification fits in u32")
    }

    /// `(deg, level)`: `deg = max e * ram` as an integer, `level = deg/ram`.
    pub fn degree_level(&self) -> (i64, Rat) {
        if self.is_zero() {
            return (0, Rat::zero());
        }
        let r = self.ramification();
        let emax = self.terms.keys().next_back().unwrap();
        let deg = (emax * Rat::from_integer(BigInt::from(r)))
            .to_integer()
            .to_i64()
            .expect("degree fits in i64");
        (deg, emax.clone())
    }

    /// Leading term (largest exponent).
    pub fn leading(&self) -> Option<(&Rat, &Coeff)> {
        self.terms.iter().next_back()
    }

    /// Applies `j` steps of the Galois substitution
    /// `z^(-e) -> zeta_r^(-e r j) z^(-e)` with `r = ram(self)`.
    pub fn galois_translate(&self, j: i64) -> Exponent {
        let r = self.ramification();
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let k = (e * Rat::from_integer(BigInt::from(r)))
                .to_integer()
                .to_i64()
                .expect("e*ram fits in i64");
            terms.insert(e.clone(), c.mul_root_of_unity(r, -(k * j)));
        }
        Exponent { terms }
    }

    /// The full Galois orbit, of length exactly `ram(self)`.
    pub fn galois_orbit(&self) -> Vec<Exponent> {
        let r = self.ramification();
        let orbit: Vec<Exponent> = (0..r as i64).map(|j| self.galois_translate(j)).collect();
        for (a, qa) in orbit.iter().enumerate() {
            for qb in orbit.iter().skip(a + 1) {
                debug_assert!(!qa.approx_eq(qb), "galois orbit must have ram distinct elements");
            }
        }
        orbit
    }

    /// True iff the two exponents generate the same circle (lie in one orbit).
    pub fn same_circle(&self, other: &Exponent) -> bool {
        if self.ramification() != other.ramification() {
            return false;
        }
        if self.terms.len() != other.terms.len() {
            return false;
        }
        self.galois_orbit().iter().any(|q| q.approx_eq(other))
    }

    pub fn neg(&self) -> Exponent {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect();
        Exponent { terms }
    }

    /// Canonical difference `self - other` (possibly the zero exponent).
    pub fn difference(&self, other: &Exponent) -> Exponent {
        let mut raw: Vec<(Rat, Coeff)> = self.terms.iter().map(|(e, c)| (e.clone(), c.clone())).collect();
        raw.extend(other.terms.iter().map(|(e, c)| (e.clone(), c.neg())));
        Exponent::normalize(raw).expect("difference of canonical exponents is canonical")
    }

    pub fn approx_eq(&self, other: &Exponent) -> bool {
        if self.terms.len() != other.terms.len() {
            return false;
        }
        self.terms.iter().zip(other.terms.iter()).all(|((e1, c1), (e2, c2))| e1 == e2 && c1.approx_eq(c2))
    }

    /// Pullback along `z = w^r`: every exponent is multiplied by `r`, making
    /// the result unramified when `ram(self)` divides `r`.
    pub fn lift_to_cover(&self, r: u32) -> Exponent {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e * Rat::from_integer(BigInt::from(r)), c.clone()))
            .collect();
        Exponent { terms }
    }

    pub fn scale_coeffs(&self, f: &Rat) -> Exponent {
        let terms: BTreeMap<Rat, Coeff> = self
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.scale_rat(f)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Exponent { terms }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms_desc() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let z = c.to_complex();
            match c {
                Coeff::Exact(cy) => match cy.as_rational() {
                    Some(r) => write!(f, "({})", r)?,
                    None => write!(f, "({:.4}{:+.4}i)", z.re, z.im)?,
                },
                Coeff::Numeric(_) => write!(f, "({:.4}{:+.4}i)", z.re, z.im)?,
            }
            write!(f, "z^(-{})", e)?;
        }
        Ok(())
    }
}

/// Angle on (a cover of) the direction circle, exact when known as a rational
/// number of turns.
#[derive(Clone, Debug)]
pub enum Angle {
    Turns(Rat),
    Radians(f64),
}

impl Angle {
    pub fn is_exact(&self) -> bool {
        matches!(self, Angle::Turns(_))
    }

    pub fn turns_f64(&self) -> f64 {
        match self {
            Angle::Turns(t) => rat_to_f64(t),
            Angle::Radians(r) => r / (2.0 * std::f64::consts::PI),
        }
    }

    pub fn radians(&self) -> f64 {
        self.turns_f64() * 2.0 * std::f64::consts::PI
    }

    /// Equality on the base circle; exact when both angles are exact.
    pub fn same_base_direction(&self, other: &Angle) -> bool {
        match (self, other) {
            (Angle::Turns(a), Angle::Turns(b)) => rat_mod_one(a) == rat_mod_one(b),
            _ => {
                let tol_turns = tol::NUMERIC_EQ / (2.0 * std::f64::consts::PI);
                turn_distance(self.turns_f64(), other.turns_f64()) < tol_turns
            }
        }
    }
}

/// A marked direction: base angle plus the sheet index on the covering circle
/// it came from.
#[derive(Clone, Debug)]
pub struct Direction {
    pub angle: Angle,
    pub sheet: i64,
}

impl Direction {
    /// Angle on the covering circle, in turns in `[0, ram)`.
    pub fn cover_turns_f64(&self) -> f64 {
        self.angle.turns_f64() + self.sheet as f64
    }
}

/// A circle `<q>`: the Galois orbit of a canonical exponent together with its
/// discrete invariants.
#[derive(Clone, Debug)]
pub struct CircleClass {
    representative: Exponent,
    ram: u32,
    deg: i64,
    level: Rat,
    exact: bool,
}

impl CircleClass {
    pub fn new(q: Exponent) -> CircleClass {
        let ram = q.ramification();
        let (deg, _) = q.degree_level();
        let level = if ram == 0 { Rat::zero() } else { rat(deg, ram as i64) };
        let exact = q.is_exact();
        CircleClass { representative: q, ram, deg, level, exact }
    }

    pub fn representative(&self) -> &Exponent {
        &self.representative
    }

    pub fn ram(&self) -> u32 {
        self.ram
    }

    pub fn deg(&self) -> i64 {
        self.deg
    }

    pub fn level(&self) -> Rat {
        self.level.clone()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn is_zero(&self) -> bool {
        self.representative.is_zero()
    }

    pub fn same_circle(&self, other: &CircleClass) -> bool {
        self.representative.same_circle(&other.representative)
    }

    /// Points of maximal decay on the covering circle: the `deg` solutions of
    /// `arg(a) - (k/r) theta = pi (mod 2 pi)` over `theta in [0, 2 pi r)`,
    /// where `a z^(-k/r)` is the leading term. Returned sorted by cover angle;
    /// each carries its base projection and sheet.
    pub fn apples(&self) -> Result<Vec<Direction>, ExponentError> {
        if self.is_zero() {
            return Err(ExponentError::ZeroClassApples);
        }
        let (_, lead) = self.representative.leading().unwrap();
        let r = self.ram as i64;
        let k = self.deg;
        let mut out = Vec::with_capacity(k as usize);
        match lead.arg_turns_exact() {
            Some(at) => {
                // t_n = (r/k)(at - 1/2 + n) mod r, n = 0..k-1.
                let rk = rat(r, k);
                for n in 0..k {
                    let t = &rk * (&at - rat(1, 2) + rat(n, 1));
                    let t = rat_mod(&t, r);
                    let sheet = t.floor().to_integer().to_i64().unwrap();
                    let base = rat_mod_one(&t);
                    out.push(Direction { angle: Angle::Turns(base), sheet });
                }
            }
            None => {
                let at = lead.arg_turns_f64();
                for n in 0..k {
                    let t = ((r as f64) / (k as f64) * (at - 0.5 + n as f64)).rem_euclid(r as f64);
                    let sheet = t.floor() as i64;
                    let base = (t - sheet as f64) * 2.0 * std::f64::consts::PI;
                    out.push(Direction { angle: Angle::Radians(base), sheet });
                }
            }
        }
        out.sort_by(|a, b| a.cover_turns_f64().partial_cmp(&b.cover_turns_f64()).unwrap());
        debug_assert_eq!(out.len(), k as usize);
        Ok(out)
    }
}

/// Reduces a rational into `[0, m)`.
fn rat_mod(t: &Rat, m: i64) -> Rat {
    let m = rat(m, 1);
    let q = (t / &m).floor();
    t - q * m
}

// --- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ExponentJson {
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: String,
    coeff: CoeffJson,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffJson {
    Exact { cyclo_order: u32, coords: Vec<String> },
    Numeric { re: f64, im: f64 },
}

pub fn parse_rat(s: &str) -> Result<Rat, ExponentError> {
    s.trim().parse::<Rat>().map_err(|_| ExponentError::BadRational(s.to_string()))
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let terms = self
            .terms_desc()
            .map(|(e, c)| TermJson {
                exp: e.to_string(),
                coeff: match c {
                    Coeff::Exact(cy) => CoeffJson::Exact {
                        cyclo_order: cy.order(),
                        coords: cy.coords().iter().map(|x| x.to_string()).collect(),
                    },
                    Coeff::Numeric(z) => CoeffJson::Numeric { re: z.re, im: z.im },
                },
            })
            .collect();
        ExponentJson { terms }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = ExponentJson::deserialize(deserializer)?;
        let mut terms = Vec::new();
        for t in raw.terms {
            let e = parse_rat(&t.exp).map_err(serde::de::Error::custom)?;
            let c = match t.coeff {
                CoeffJson::Exact { cyclo_order, coords } => {
                    let mut v = Vec::with_capacity(coords.len());
                    for s in coords {
                        v.push(parse_rat(&s).map_err(serde::de::Error::custom)?);
                    }
                    Coeff::Exact(Cyclo::new(cyclo_order, v))
                }
                CoeffJson::Numeric { re, im } => Coeff::Numeric(Complex64::new(re, im)),
            };
            terms.push((e, c));
        }
        Exponent::normalize(terms).map_err(serde::de::Error::custom)
    }
}
