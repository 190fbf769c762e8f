//! Irregular classes for `GL_N` and their combinatorial Stokes data: branch
//! systems, the adjoint cover, singular directions with root-pair data, the
//! Levi `H` and the twist coset `H(del)`, and the untwisting cross-check on
//! the `w`-disc (`z = w^r`).

use num::{BigInt, Integer, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::cyclo::{rat_mod_one, rat_to_f64, turn_distance};
use crate::exponent::{rat, Angle, CircleClass, Direction, Exponent, Rat};
use crate::tol;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ClassError {
    #[error("multiplicity must be positive")]
    ZeroMultiplicity,
    #[error("circles must be pairwise distinct, {0} repeats an earlier orbit")]
    DuplicateCircle(String),
    #[error("direction index {0} is not a singular direction of this structure")]
    UnknownDirection(usize),
    #[error("unsupported twist tag {0:?}: general linear computations require \"id\"")]
    UnsupportedTwist(String),
}

/// One circle with its multiplicity.
#[derive(Clone, Debug)]
pub struct ClassEntry {
    pub circle: CircleClass,
    pub mult: u32,
}

/// A `GL_N` irregular class: a multiplicity for each covering circle, with
/// `N = sum mult * ram`.
#[derive(Clone, Debug)]
pub struct IrregularClass {
    entries: Vec<ClassEntry>,
    twist: String,
}

impl IrregularClass {
    pub fn new(entries: Vec<(Exponent, u32)>) -> Result<IrregularClass, ClassError> {
        IrregularClass::with_twist(entries, "id")
    }

    pub fn with_twist(entries: Vec<(Exponent, u32)>, twist: &str) -> Result<IrregularClass, ClassError> {
        if twist != "id" {
            return Err(ClassError::UnsupportedTwist(twist.to_string()));
        }
        let mut built: Vec<ClassEntry> = Vec::with_capacity(entries.len());
        for (q, mult) in entries {
            if mult == 0 {
                return Err(ClassError::ZeroMultiplicity);
            }
            let circle = CircleClass::new(q);
            if built.iter().any(|e| e.circle.same_circle(&circle)) {
                return Err(ClassError::DuplicateCircle(circle.representative().to_string()));
            }
            built.push(ClassEntry { circle, mult });
        }
        Ok(IrregularClass { entries: built, twist: twist.to_string() })
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn twist(&self) -> &str {
        &self.twist
    }

    /// Total rank `N = sum mult * ram`.
    pub fn rank(&self) -> usize {
        self.entries.iter().map(|e| (e.mult * e.circle.ram()) as usize).sum()
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(|e| e.circle.is_exact())
    }

    /// Concatenated Galois orbits with block sizes; `sigma` cyclically
    /// permutes each orbit in monodromy order (branch -> next translate).
    pub fn branches(&self) -> BranchSystem {
        let mut branches = Vec::new();
        let mut sigma = Vec::new();
        for (ci, entry) in self.entries.iter().enumerate() {
            let orbit = entry.circle.representative().galois_orbit();
            let r = orbit.len();
            let base = branches.len();
            for (sheet, q) in orbit.into_iter().enumerate() {
                branches.push(Branch {
                    exponent: q,
                    block: entry.mult,
                    circle: ci,
                    sheet: sheet as u32,
                });
                sigma.push(base + (sheet + 1) % r);
            }
        }
        BranchSystem { branches, sigma }
    }

    /// Circles of the differences `q_i - q_j` over all ordered branch pairs
    /// (including `i = j`), grouped into Galois orbits, with multiplicities.
    /// The weighted pair count of each orbit is divisible by its ramification.
    pub fn adjoint_cover(&self) -> Vec<(CircleClass, u32)> {
        let bs = self.branches();
        let n = bs.branches.len();
        let mut groups: Vec<(CircleClass, u64)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let f = bs.branches[i].exponent.difference(&bs.branches[j].exponent);
                let w = (bs.branches[i].block as u64) * (bs.branches[j].block as u64);
                let circle = CircleClass::new(f);
                match groups.iter_mut().find(|(c, _)| c.same_circle(&circle)) {
                    Some((_, count)) => *count += w,
                    None => groups.push((circle, w)),
                }
            }
        }
        let out: Vec<(CircleClass, u32)> = groups
            .into_iter()
            .map(|(c, w)| {
                let r = c.ram() as u64;
                assert_eq!(w % r, 0, "pair count of an orbit must be divisible by ram");
                (c, (w / r) as u32)
            })
            .collect();
        debug_assert_eq!(
            out.iter().map(|(c, m)| (c.ram() as usize) * (*m as usize)).sum::<usize>(),
            self.rank() * self.rank()
        );
        out
    }

    /// All singular (anti-Stokes) directions with their root pairs, Stokes
    /// dimensions and level data.
    ///
    /// Directions are enumerated positively from the basepoint at angle 0,
    /// i.e. over the half-open window `(0, 1]` in turns; a direction sitting
    /// exactly at the basepoint angle is reached at the end of the turn and
    /// its root pairs are those of the once-transported grading.
    pub fn singular_directions(&self) -> StokesStructure {
        let bs = self.branches();
        let adjoint = self.adjoint_cover();
        let n = bs.branches.len();
        let mut dirs: Vec<SingularDirection> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let f = bs.branches[i].exponent.difference(&bs.branches[j].exponent);
                assert!(!f.is_zero(), "distinct branches have distinct exponents");
                let (e, c) = f.leading().map(|(e, c)| (e.clone(), c.clone())).unwrap();
                let level = e.clone();
                let dim = (bs.branches[i].block as usize) * (bs.branches[j].block as usize);
                let circle_index = adjoint
                    .iter()
                    .position(|(circ, _)| circ.representative().same_circle(&f))
                    .expect("difference circle occurs in the adjoint cover");
                let piece = RootPiece { row: i, col: j, level: level.clone(), dim, circle: circle_index };
                for angle in decay_directions(&e, &c) {
                    merge_direction(&mut dirs, angle, piece.clone());
                }
            }
        }
        dirs.sort_by(|a, b| a.enumeration.turns_f64().partial_cmp(&b.enumeration.turns_f64()).unwrap());
        for d in &mut dirs {
            d.roots.sort_by_key(|p| (p.row, p.col));
            d.dim = d.roots.iter().map(|p| p.dim).sum();
            d.levels = level_list(&d.roots);
            debug_assert!(d.dim > 0);
        }
        StokesStructure {
            n: self.rank(),
            blocks: bs.branches.iter().map(|b| b.block as usize).collect(),
            sigma: bs.sigma.clone(),
            exact: dirs.iter().all(|d| d.enumeration.is_exact()),
            directions: dirs,
            adjoint,
        }
    }

    /// The Levi `H` (block-diagonal per branch) and the coset `H(del)`.
    pub fn formal_group(&self) -> FormalGroup {
        let bs = self.branches();
        FormalGroup {
            blocks: bs.branches.iter().map(|b| b.block as usize).collect(),
            sigma: bs.sigma,
        }
    }

    /// Pulls the class back along `z = w^r`, `r = lcm` of the ramifications,
    /// recomputes the singular directions upstairs by the unramified rule and
    /// cross-checks them against the base directions.
    pub fn untwist(&self) -> UntwistReport {
        let r = self.entries.iter().fold(1u32, |acc, e| acc.lcm(&e.circle.ram()));
        let bs = self.branches();
        let lifted_entries: Vec<(Exponent, u32)> = bs
            .branches
            .iter()
            .map(|b| (b.exponent.lift_to_cover(r), b.block))
            .collect();
        let lifted_class = IrregularClass::new(lifted_entries).expect("lifted branches are pairwise distinct");
        for e in lifted_class.entries() {
            debug_assert_eq!(e.circle.ram(), 1, "lifted circles are unramified");
        }
        let base = self.singular_directions();
        let lifted = lifted_class.singular_directions();

        // A' = preimage of A: every lifted direction must sit over a base one
        // and the counts must match exactly.
        let mut preimage_match = lifted.directions.len() == r as usize * base.directions.len();
        if preimage_match {
            for ld in &lifted.directions {
                let t = (ld.enumeration.turns_f64() * r as f64 - 1.0).rem_euclid(1.0) + 1.0; // into (0, 1]
                let hit = base
                    .directions
                    .iter()
                    .any(|bd| turn_distance(bd.enumeration.turns_f64(), t) < 1e-9);
                if !hit {
                    preimage_match = false;
                    break;
                }
            }
        }

        // First sheet: lifted directions with turns in (0, 1/r] reproduce the
        // base dimensions direction by direction.
        let mut first_sheet = Vec::new();
        let mut k = 0usize;
        for ld in &lifted.directions {
            let t = ld.enumeration.turns_f64();
            if t <= 1.0 / r as f64 + 1e-12 {
                let base_dim = base.directions.get(k).map(|d| d.dim).unwrap_or(0);
                let base_turn = base.directions.get(k).map(|d| d.enumeration.turns_f64()).unwrap_or(f64::NAN);
                let matches = base_dim == ld.dim && turn_distance(base_turn, t * r as f64) < 1e-9;
                first_sheet.push(FirstSheetMatch { lifted_turns: t, dim: ld.dim, matches });
                k += 1;
            }
        }
        let ok = preimage_match && k == base.directions.len() && first_sheet.iter().all(|m| m.matches);
        UntwistReport { r, lifted_class, base, lifted, first_sheet, preimage_match, ok }
    }

    /// Descent condition for the lifted diagonal exponent matrix: with
    /// `Q'(w) = diag(q'_1, ..., q'_n)` and `P` the block permutation matrix of
    /// `sigma`, checks `Q'(zeta w) = P Q'(w) P^(-1)` termwise exactly.
    pub fn check_descent(&self) -> bool {
        let bs = self.branches();
        self.check_descent_with_sigma(&bs.sigma)
    }

    /// Same check against an arbitrary permutation (used as a negative
    /// control: a corrupted permutation must fail).
    pub fn check_descent_with_sigma(&self, sigma: &[usize]) -> bool {
        let r = self.entries.iter().fold(1u32, |acc, e| acc.lcm(&e.circle.ram()));
        let bs = self.branches();
        if sigma.len() != bs.branches.len() {
            return false;
        }
        // P has its invertible blocks at positions (sigma^(-1)(i), i), so
        // conjugation by P sends diagonal entry j to position sigma^(-1)(j);
        // equivalently (P Q' P^(-1))_jj = q'_(sigma(j)).
        bs.branches.iter().enumerate().all(|(j, b)| {
            let lhs = substitute_zeta_w(&b.exponent.lift_to_cover(r), r);
            let rhs = bs.branches[sigma[j]].exponent.lift_to_cover(r);
            lhs.approx_eq(&rhs)
        })
    }
}

/// `q'(zeta w)` for an unramified exponent `q'`: each coefficient of `w^(-k)`
/// is multiplied by `zeta_r^(-k)`.
fn substitute_zeta_w(q: &Exponent, r: u32) -> Exponent {
    let terms: Vec<_> = q
        .terms_desc()
        .map(|(e, c)| {
            let k = e.to_integer().to_i64().expect("lifted exponents are integers");
            (e.clone(), c.mul_root_of_unity(r, -k))
        })
        .collect();
    Exponent::normalize(terms).expect("substitution preserves canonical form")
}

/// Decay directions of `exp(f)` over one positive turn `(0, 1]` from the
/// basepoint, for leading term `c z^(-e)`: solutions of
/// `arg(c) - e * t = 1/2 (mod 1)` in turns.
fn decay_directions(e: &Rat, c: &crate::exponent::Coeff) -> Vec<Angle> {
    let mut out = Vec::new();
    match c.arg_turns_exact() {
        Some(at) => {
            // t = (at - 1/2 + m)/e, 0 < t <= 1.
            let lo = rat(1, 2) - &at; // m > 1/2 - at
            let hi = e + rat(1, 2) - &at; // m <= e + 1/2 - at
            let mut m = lo.floor().to_integer() + BigInt::from(1);
            while Rat::from_integer(m.clone()) <= hi {
                let t = (&at - rat(1, 2) + Rat::from_integer(m.clone())) / e;
                debug_assert!(t > rat(0, 1) && t <= rat(1, 1));
                out.push(Angle::Turns(t));
                m += 1;
            }
        }
        None => {
            let at = c.arg_turns_f64();
            let ef = rat_to_f64(e);
            let m_lo = (0.5 - at).floor() as i64 - 1;
            let m_hi = (ef + 0.5 - at).ceil() as i64 + 1;
            for m in m_lo..=m_hi {
                let t = (at - 0.5 + m as f64) / ef;
                if t > 1e-12 && t <= 1.0 + 1e-12 {
                    out.push(Angle::Radians(t.min(1.0) * 2.0 * std::f64::consts::PI));
                }
            }
        }
    }
    out
}

fn merge_direction(dirs: &mut Vec<SingularDirection>, angle: Angle, piece: RootPiece) {
    for d in dirs.iter_mut() {
        let same = match (&d.enumeration, &angle) {
            (Angle::Turns(a), Angle::Turns(b)) => a == b,
            (a, b) => turn_distance(a.turns_f64(), b.turns_f64()) < tol::NUMERIC_EQ / (2.0 * std::f64::consts::PI),
        };
        if same {
            d.roots.push(piece);
            return;
        }
    }
    let direction = Direction {
        angle: match &angle {
            Angle::Turns(t) => Angle::Turns(rat_mod_one(t)),
            Angle::Radians(r) => Angle::Radians(r.rem_euclid(2.0 * std::f64::consts::PI)),
        },
        sheet: 0,
    };
    dirs.push(SingularDirection {
        enumeration: angle,
        direction,
        roots: vec![piece],
        dim: 0,
        levels: Vec::new(),
    });
}

fn level_list(roots: &[RootPiece]) -> Vec<Rat> {
    let mut levels: Vec<Rat> = Vec::new();
    for p in roots {
        if !levels.contains(&p.level) {
            levels.push(p.level.clone());
        }
    }
    levels.sort();
    levels
}

/// One branch of the covering: a single-valued exponent on one sheet.
#[derive(Clone, Debug)]
pub struct Branch {
    pub exponent: Exponent,
    pub block: u32,
    pub circle: usize,
    pub sheet: u32,
}

/// The ordered list of branches together with the monodromy permutation.
#[derive(Clone, Debug)]
pub struct BranchSystem {
    pub branches: Vec<Branch>,
    /// `sigma[i]`: index of the branch whose exponent is the next Galois
    /// translate of branch `i`.
    pub sigma: Vec<usize>,
}

/// One graded piece of a Stokes group: the `(row, col)` block of `End(V)`.
#[derive(Clone, Debug)]
pub struct RootPiece {
    pub row: usize,
    pub col: usize,
    pub level: Rat,
    pub dim: usize,
    /// Index into the adjoint cover of the circle this apple came from.
    pub circle: usize,
}

#[derive(Clone, Debug)]
pub struct SingularDirection {
    /// Position in `(0, 1]` turns, enumerated positively from the basepoint.
    pub enumeration: Angle,
    /// The same direction normalised to the base circle.
    pub direction: Direction,
    pub roots: Vec<RootPiece>,
    pub dim: usize,
    pub levels: Vec<Rat>,
}

/// Levi blocks, monodromy permutation, and the singular-direction data of an
/// irregular class.
#[derive(Clone, Debug)]
pub struct StokesStructure {
    pub n: usize,
    pub directions: Vec<SingularDirection>,
    /// Block size of each branch (the Levi `H = prod GL(blocks[i])`).
    pub blocks: Vec<usize>,
    pub sigma: Vec<usize>,
    pub exact: bool,
    pub adjoint: Vec<(CircleClass, u32)>,
}

impl StokesStructure {
    pub fn dim_levi(&self) -> usize {
        self.blocks.iter().map(|b| b * b).sum()
    }

    /// Root pairs at a direction, partitioned by level in ascending order.
    pub fn level_filtration(&self, d: usize) -> Result<Vec<(Rat, Vec<RootPiece>)>, ClassError> {
        let dir = self.directions.get(d).ok_or(ClassError::UnknownDirection(d))?;
        let mut out: Vec<(Rat, Vec<RootPiece>)> = Vec::new();
        for level in &dir.levels {
            let roots = dir.roots.iter().filter(|p| &p.level == level).cloned().collect();
            out.push((level.clone(), roots));
        }
        Ok(out)
    }

    /// The root set of each direction as `(row, col)` branch pairs.
    pub fn root_sets(&self) -> Vec<Vec<(usize, usize)>> {
        self.directions
            .iter()
            .map(|d| d.roots.iter().map(|p| (p.row, p.col)).collect())
            .collect()
    }

    /// Root set of the extended sequence `Sto_1, Sto_2, ...` where indices
    /// beyond one turn are obtained by transporting once more around the
    /// circle: `Sto_(m+s) = pi(Sto_m)` with `pi = sigma^(-1)` the block
    /// permutation of the formal monodromy.
    pub fn extended_root_set(&self, index: usize) -> Vec<(usize, usize)> {
        let s = self.directions.len();
        assert!(s > 0 && index >= 1);
        let wraps = (index - 1) / s;
        let base = (index - 1) % s;
        let mut set: Vec<(usize, usize)> = self.root_sets()[base].clone();
        let inv = invert_permutation(&self.sigma);
        for _ in 0..wraps {
            set = set.iter().map(|&(i, j)| (inv[i], inv[j])).collect();
        }
        set.sort_unstable();
        set
    }

    /// Extended Stokes dimension (block sizes are permutation invariant).
    pub fn extended_dim(&self, index: usize) -> usize {
        self.extended_root_set(index)
            .iter()
            .map(|&(i, j)| self.blocks[i] * self.blocks[j])
            .sum()
    }

    /// Total Stokes dimension over one turn.
    pub fn total_dim(&self) -> usize {
        self.directions.iter().map(|d| d.dim).sum()
    }

    pub fn levels_present(&self) -> Vec<Rat> {
        let mut all = Vec::new();
        for d in &self.directions {
            for l in &d.levels {
                if !all.contains(l) {
                    all.push(l.clone());
                }
            }
        }
        all.sort();
        all
    }
}

pub fn invert_permutation(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (i, &s) in sigma.iter().enumerate() {
        inv[s] = i;
    }
    inv
}

/// Block description of the Levi `H` and the coset `H(del) = H P`.
#[derive(Clone, Debug)]
pub struct FormalGroup {
    pub blocks: Vec<usize>,
    pub sigma: Vec<usize>,
}

impl FormalGroup {
    pub fn dim_levi(&self) -> usize {
        self.blocks.iter().map(|b| b * b).sum()
    }

    /// Nonzero block positions `(row, col)` of the permutation matrix `P`:
    /// the coset `H(del) = H P` is supported exactly there. The convention
    /// `row = sigma^(-1)(col)` makes the descent condition
    /// `Q'(zeta w) = P Q'(w) P^(-1)` hold with the chosen orbit enumeration.
    pub fn coset_support(&self) -> Vec<(usize, usize)> {
        let inv = invert_permutation(&self.sigma);
        (0..self.blocks.len()).map(|col| (inv[col], col)).collect()
    }

    /// Textual shape of `H`, e.g. `GL_2 x GL_2`.
    pub fn levi_shape(&self) -> String {
        self.blocks.iter().map(|b| format!("GL_{}", b)).collect::<Vec<_>>().join(" x ")
    }
}

/// Result of the untwisting cross-check.
#[derive(Clone, Debug)]
pub struct UntwistReport {
    pub r: u32,
    pub lifted_class: IrregularClass,
    pub base: StokesStructure,
    pub lifted: StokesStructure,
    pub first_sheet: Vec<FirstSheetMatch>,
    pub preimage_match: bool,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct FirstSheetMatch {
    pub lifted_turns: f64,
    pub dim: usize,
    pub matches: bool,
}

// --- serialization ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ClassJson {
    entries: Vec<EntryJson>,
    #[serde(default = "default_twist")]
    twist: String,
}

fn default_twist() -> String {
    "id".to_string()
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    circle: Exponent,
    mult: u32,
}

impl Serialize for IrregularClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries = self
            .entries
            .iter()
            .map(|e| EntryJson { circle: e.circle.representative().clone(), mult: e.mult })
            .collect();
        ClassJson { entries, twist: self.twist.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IrregularClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = ClassJson::deserialize(deserializer)?;
        IrregularClass::with_twist(
            raw.entries.into_iter().map(|e| (e.circle, e.mult)).collect(),
            &raw.twist,
        )
        .map_err(serde::de::Error::custom)
    }
}
