//! Per-stage family data: Weyl-group orders, invariant generators of the
//! character ring, parabolic (block) generators, and the action of simple
//! reflections.
//!
//! Supported families per stage:
//! * `A` — m fiber characters with the symmetric group acting by permutation;
//!   arbitrary parabolic blocks are allowed.
//! * `C` — the hyperoctahedral group acting by permutations and inversions
//!   `y -> y^-1`; full flags only.
//! * `B_spin` — same group action, but the character lattice also contains the
//!   half character `w[j,1]*...*w[j,m]`; full flags only.

use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{KflagError, Result};
use crate::laurent::{elementary_symmetric, LaurentPoly, Mode, Monomial, VarId, VarKind};

/// Stage family label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    A,
    C,
    BSpin,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        match s {
            "A" => Ok(Family::A),
            "C" => Ok(Family::C),
            "B_spin" => Ok(Family::BSpin),
            other => Err(KflagError::Validation(format!(
                "unknown family \"{other}\" (expected \"A\", \"C\" or \"B_spin\")"
            ))),
        }
    }

    /// True when the stage carries half characters (w variables).
    pub fn is_spin(self) -> bool {
        matches!(self, Family::BSpin)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::C => "C",
            Family::BSpin => "B_spin",
        };
        write!(f, "{s}")
    }
}

/// One stage of a tower: a family, the number of fiber characters, and an
/// optional parabolic block structure (family A only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub family: Family,
    pub m: usize,
    pub blocks: Option<Vec<usize>>,
}

fn factorial(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

impl Stage {
    pub fn new(family: Family, m: usize, blocks: Option<Vec<usize>>) -> Result<Stage> {
        if m == 0 {
            return Err(KflagError::Validation(
                "a stage needs at least one variable".to_string(),
            ));
        }
        if let Some(b) = &blocks {
            if b.is_empty() || b.contains(&0) {
                return Err(KflagError::Validation(
                    "blocks must be a nonempty list of positive sizes".to_string(),
                ));
            }
            let total: usize = b.iter().sum();
            if total != m {
                return Err(KflagError::Validation(format!(
                    "block sizes sum to {total} but the stage has {m} variables"
                )));
            }
            if family != Family::A && b.iter().any(|&x| x > 1) {
                return Err(KflagError::Unsupported(format!(
                    "non-trivial blocks are only supported for family A, not {family}"
                )));
            }
        }
        Ok(Stage { family, m, blocks })
    }

    /// True when the stage is a full flag (trivial block structure).
    pub fn is_borel(&self) -> bool {
        match &self.blocks {
            None => true,
            Some(b) => b.iter().all(|&x| x == 1),
        }
    }

    /// Block sizes, with the Borel case spelled out as all-ones.
    pub fn block_sizes(&self) -> Vec<usize> {
        match &self.blocks {
            Some(b) => b.clone(),
            None => vec![1; self.m],
        }
    }

    /// Order of the stage Weyl group.
    pub fn weyl_order(&self) -> BigInt {
        let perm = factorial(self.m);
        match self.family {
            Family::A => perm,
            Family::C | Family::BSpin => perm * BigInt::from(2u32).pow(self.m as u32),
        }
    }

    /// Order of the parabolic subgroup cut out by the blocks.
    pub fn parabolic_order(&self) -> BigInt {
        match &self.blocks {
            None => BigInt::one(),
            Some(b) => b.iter().map(|&x| factorial(x)).product(),
        }
    }

    /// Number of parabolic cosets; this is the rank of the stage fiber.
    pub fn coset_rank(&self) -> BigInt {
        self.weyl_order() / self.parabolic_order()
    }
}

fn yvars(stage_no: u32, m: usize) -> Vec<Monomial> {
    (1..=m as u32)
        .map(|i| Monomial::var(VarId::y(stage_no, i)))
        .collect()
}

/// The half character w[j,1]*...*w[j,m] of a spin stage.
pub fn spin_half_character(stage_no: u32, m: usize) -> Monomial {
    Monomial::from_exps((1..=m as u32).map(|i| (VarId::w(stage_no, i), 1)))
}

/// Generators of the full Weyl-invariant subring of the stage character ring,
/// in the order their defining relations are listed.
pub fn invariant_generators(stage: &Stage, stage_no: u32) -> Vec<LaurentPoly> {
    let m = stage.m;
    match stage.family {
        Family::A => {
            let vars = yvars(stage_no, m);
            (1..=m)
                .map(|k| elementary_symmetric(&vars, k).expect("k <= m"))
                .collect()
        }
        Family::C => {
            // e_k of the 2m characters {y_i, y_i^-1}, k = 1..m.
            let mut vars = Vec::with_capacity(2 * m);
            for v in yvars(stage_no, m) {
                vars.push(v.clone());
                vars.push(v.inv());
            }
            (1..=m)
                .map(|k| elementary_symmetric(&vars, k).expect("k <= 2m"))
                .collect()
        }
        Family::BSpin => {
            // e_i of the 2m+1 characters {1, y_i, y_i^-1} for i = 1..m-1,
            // then the spin generator prod_i (w_i + w_i^-1).
            let mut vars = Vec::with_capacity(2 * m + 1);
            vars.push(Monomial::one());
            for v in yvars(stage_no, m) {
                vars.push(v.clone());
                vars.push(v.inv());
            }
            let mut gens: Vec<LaurentPoly> = (1..m)
                .map(|k| elementary_symmetric(&vars, k).expect("k <= 2m+1"))
                .collect();
            let mut delta = LaurentPoly::one(Mode::Int);
            for i in 1..=m as u32 {
                let wv = Monomial::var(VarId::w(stage_no, i));
                let factor = LaurentPoly::monomial(wv.clone())
                    .add(&LaurentPoly::monomial(wv.inv()))
                    .expect("int mode");
                delta = delta.mul(&factor).expect("int mode");
            }
            gens.push(delta);
            gens
        }
    }
}

/// Generators of the parabolic-invariant subring: the ring generators of a
/// stage's contribution to a presentation. For full flags these are the
/// variables themselves (plus the half character on spin stages); for a
/// blocked A stage they are the per-block elementary symmetric polynomials.
pub fn parabolic_generators(stage: &Stage, stage_no: u32) -> Result<Vec<LaurentPoly>> {
    if stage.is_borel() {
        let mut gens: Vec<LaurentPoly> = yvars(stage_no, stage.m)
            .into_iter()
            .map(LaurentPoly::monomial)
            .collect();
        if stage.family.is_spin() {
            gens.push(LaurentPoly::monomial(spin_half_character(stage_no, stage.m)));
        }
        return Ok(gens);
    }
    // blocked stage: family A guaranteed by Stage::new
    let mut gens = Vec::new();
    let mut start = 1u32;
    for &b in stage.blocks.as_ref().expect("blocked") {
        let vars: Vec<Monomial> = (start..start + b as u32)
            .map(|i| Monomial::var(VarId::y(stage_no, i)))
            .collect();
        for k in 1..=b {
            gens.push(elementary_symmetric(&vars, k)?);
        }
        start += b as u32;
    }
    Ok(gens)
}

/// Applies the k-th simple reflection of the stage Weyl group to a polynomial.
/// For k < m this swaps the characters at positions k and k+1; for k = m on a
/// C or B_spin stage it inverts the last character. Base-side variables are
/// fixed. Variables of other stages pass through untouched.
pub fn apply_simple_reflection(
    stage: &Stage,
    stage_no: u32,
    k: usize,
    p: &LaurentPoly,
) -> Result<LaurentPoly> {
    let m = stage.m;
    let max_k = match stage.family {
        Family::A => m - 1,
        Family::C | Family::BSpin => m,
    };
    if k < 1 || k > max_k {
        return Err(KflagError::Argument(format!(
            "reflection index {k} out of range 1..={max_k} for family {}",
            stage.family
        )));
    }
    let mut map = std::collections::BTreeMap::new();
    if k < m {
        let (a, b) = (k as u32, k as u32 + 1);
        for kind in [VarKind::Y, VarKind::W] {
            map.insert(
                VarId::new(kind, stage_no, a),
                LaurentPoly::monomial(Monomial::var(VarId::new(kind, stage_no, b))),
            );
            map.insert(
                VarId::new(kind, stage_no, b),
                LaurentPoly::monomial(Monomial::var(VarId::new(kind, stage_no, a))),
            );
        }
    } else {
        let i = m as u32;
        for kind in [VarKind::Y, VarKind::W] {
            map.insert(
                VarId::new(kind, stage_no, i),
                LaurentPoly::monomial(Monomial::var(VarId::new(kind, stage_no, i)).inv()),
            );
        }
    }
    p.substitute_monomials(&map)
}
