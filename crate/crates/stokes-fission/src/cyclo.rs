//! Exact arithmetic in cyclotomic fields.
//!
//! An element of the `m`-th cyclotomic field is stored as a length-`m` vector
//! of rationals: the coefficients of `1, z, z^2, ..., z^(m-1)` where
//! `z = exp(2*pi*i/m)`. Arithmetic happens in `Q[x]/(x^m - 1)` (cyclic
//! convolution); every result is reduced modulo the `m`-th cyclotomic
//! polynomial, so equality of canonical forms is equality in the field.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num::{BigInt, Integer, One, Signed, Zero};
use num_complex::Complex64;

use crate::exponent::Rat;

/// Monic cyclotomic polynomial `Phi_m`, ascending coefficients.
fn cyclotomic_polynomial(m: u32) -> Vec<BigInt> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Vec<BigInt>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&m) {
        return p.clone();
    }
    // x^m - 1 divided by Phi_d for every proper divisor d of m.
    let mut f = vec![BigInt::zero(); (m + 1) as usize];
    f[0] = -BigInt::one();
    f[m as usize] = BigInt::one();
    for d in 1..m {
        if m.is_multiple_of(d) {
            f = poly_div_exact(&f, &cyclotomic_polynomial(d));
        }
    }
    cache.lock().unwrap().insert(m, f.clone());
    f
}

/// Exact division of integer polynomials with monic divisor.
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let dn = den.len() - 1;
    assert!(den[dn].is_one(), "divisor must be monic");
    let mut rem: Vec<BigInt> = num.to_vec();
    let mut quot = vec![BigInt::zero(); num.len() - dn];
    for k in (dn..num.len()).rev() {
        let c = rem[k].clone();
        if c.is_zero() {
            continue;
        }
        quot[k - dn] = c.clone();
        for (i, dc) in den.iter().enumerate() {
            rem[k - dn + i] -= &c * dc;
        }
    }
    assert!(rem.iter().all(|c| c.is_zero()), "inexact polynomial division");
    quot
}

/// Element of the `order`-th cyclotomic field in canonical (reduced) form.
#[derive(Clone, PartialEq, Eq)]
pub struct Cyclo {
    order: u32,
    coords: Vec<Rat>,
}

impl Cyclo {
    /// Builds an element from power-basis coordinates and reduces it.
    pub fn new(order: u32, coords: Vec<Rat>) -> Self {
        assert!(order >= 1);
        let mut c = coords;
        c.resize(order as usize, Rat::zero());
        let mut el = Cyclo { order, coords: c };
        el.reduce();
        el
    }

    pub fn zero(order: u32) -> Self {
        Cyclo::new(order, vec![])
    }

    pub fn one(order: u32) -> Self {
        Cyclo::from_rat(order, Rat::one())
    }

    pub fn from_rat(order: u32, value: Rat) -> Self {
        Cyclo::new(order, vec![value])
    }

    pub fn from_int(order: u32, value: i64) -> Self {
        Cyclo::from_rat(order, Rat::from_integer(BigInt::from(value)))
    }

    /// `exp(2 pi i k / m)` as an element of the `m`-th cyclotomic field.
    pub fn root_of_unity(m: u32, k: i64) -> Self {
        let k = k.rem_euclid(m as i64) as usize;
        let mut coords = vec![Rat::zero(); m as usize];
        coords[k] = Rat::one();
        Cyclo::new(m, coords)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Rational value if the element lies in `Q`.
    pub fn as_rational(&self) -> Option<Rat> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(self.coords[0].clone())
        } else {
            None
        }
    }

    fn reduce(&mut self) {
        let m = self.order as usize;
        let phi: Vec<Rat> = cyclotomic_polynomial(self.order)
            .into_iter()
            .map(Rat::from_integer)
            .collect();
        let deg = phi.len() - 1;
        // Remainder of the coordinate polynomial modulo Phi_m.
        for k in (deg..m).rev() {
            let c = self.coords[k].clone();
            if c.is_zero() {
                continue;
            }
            for (i, pc) in phi.iter().enumerate() {
                let v = &c * pc;
                self.coords[k - deg + i] -= v;
            }
        }
        debug_assert!(self.coords[deg..].iter().all(|c| c.is_zero()));
    }

    /// Re-expresses the element in a field of order `target` (a multiple of
    /// the current order).
    pub fn lift(&self, target: u32) -> Self {
        assert!(target.is_multiple_of(self.order), "target order must be a multiple");
        let step = (target / self.order) as usize;
        let mut coords = vec![Rat::zero(); target as usize];
        for (k, c) in self.coords.iter().enumerate() {
            coords[k * step] = c.clone();
        }
        Cyclo::new(target, coords)
    }

    fn unified(&self, other: &Cyclo) -> (Cyclo, Cyclo) {
        let m = self.order.lcm(&other.order);
        (self.lift(m), other.lift(m))
    }

    pub fn add(&self, other: &Cyclo) -> Cyclo {
        let (mut a, b) = self.unified(other);
        for (x, y) in a.coords.iter_mut().zip(b.coords.iter()) {
            *x += y;
        }
        a.reduce();
        a
    }

    pub fn neg(&self) -> Cyclo {
        let coords = self.coords.iter().map(|c| -c.clone()).collect();
        Cyclo { order: self.order, coords }
    }

    pub fn sub(&self, other: &Cyclo) -> Cyclo {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Cyclo) -> Cyclo {
        let (a, b) = self.unified(other);
        let m = a.order as usize;
        let mut coords = vec![Rat::zero(); m];
        for (i, x) in a.coords.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coords.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                coords[(i + j) % m] += x * y;
            }
        }
        Cyclo::new(a.order, coords)
    }

    pub fn scale(&self, factor: &Rat) -> Cyclo {
        let coords = self.coords.iter().map(|c| c * factor).collect();
        Cyclo { order: self.order, coords }
    }

    /// Complex conjugate (`z -> z^(m-1)` on the power basis).
    pub fn conj(&self) -> Cyclo {
        let m = self.order as usize;
        let mut coords = vec![Rat::zero(); m];
        for (k, c) in self.coords.iter().enumerate() {
            coords[(m - k) % m] = c.clone();
        }
        Cyclo::new(self.order, coords)
    }

    pub fn eq_exact(&self, other: &Cyclo) -> bool {
        let (a, b) = self.unified(other);
        a.coords == b.coords
    }

    pub fn to_complex(&self) -> Complex64 {
        let m = self.order as f64;
        let mut z = Complex64::new(0.0, 0.0);
        for (k, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let t = 2.0 * std::f64::consts::PI * (k as f64) / m;
            z += rat_to_f64(c) * Complex64::new(t.cos(), t.sin());
        }
        z
    }

    /// Argument as an exact fraction of a turn in `[0, 1)`, when the argument
    /// is a rational multiple of pi. This holds exactly when `a / conj(a)` is
    /// a root of unity in the field.
    pub fn arg_turns(&self) -> Option<Rat> {
        if self.is_zero() {
            return None;
        }
        let big = 2 * self.order.lcm(&2);
        let z = self.lift(big);
        let zc = z.conj();
        let numeric = self.to_complex().arg() / (2.0 * std::f64::consts::PI);
        for j in 0..big {
            if z.eq_exact(&Cyclo::root_of_unity(big, j as i64).mul(&zc)) {
                // a / conj(a) = exp(2 i arg a) = zeta_big^j, so
                // arg(a) in turns is j/(2 big) up to a half turn.
                let half = Rat::new(BigInt::from(j), BigInt::from(2 * big));
                for cand in [half.clone(), half + Rat::new(BigInt::one(), BigInt::from(2))] {
                    let c = rat_mod_one(&cand);
                    if turn_distance(rat_to_f64(&c), numeric) < 1e-6 {
                        return Some(c);
                    }
                }
            }
        }
        None
    }
}

impl fmt::Debug for Cyclo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclo(m={}, {:?})", self.order, self.coords)
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // Good enough for the magnitudes appearing here.
    bigint_to_f64(num) / bigint_to_f64(den)
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    x.to_string().parse::<f64>().unwrap_or(if x.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Reduces a rational into `[0, 1)`.
pub fn rat_mod_one(r: &Rat) -> Rat {
    let f = r.floor();
    r - f
}

/// Distance between two angles measured in turns, accounting for wrap-around.
pub fn turn_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}
