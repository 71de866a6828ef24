//! Exact sparse Laurent-polynomial arithmetic over the character variables of
//! a tower.
//!
//! Variables come in four kinds: fiber characters `y[j,i]`, base characters
//! `u[j,i]`, and their square roots `w[j,i]` (w^2 = y) and `v[j,i]` (v^2 = u)
//! on spin stages. Internally every (stage, index) pair tracks its exponent in
//! half-units of the whole character, so `w^2` collapses to `y` automatically
//! and each character has exactly one stored form.
//!
//! Coefficients are arbitrary-precision rationals. Every polynomial carries a
//! mode flag pinning it to the integer subring or the full rational ring; in
//! integer mode all coefficients have denominator one. No floating point is
//! used anywhere.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{KflagError, Result};

// ==================== variables ====================

/// Variable kind; the declaration order is the canonical serialization order
/// within one (stage, index) slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    /// Fiber character y[j,i].
    Y,
    /// Equivariant base character u[j,i].
    U,
    /// Spin square root w[j,i], w^2 = y.
    W,
    /// Base-side spin square root v[j,i], v^2 = u.
    V,
}

impl VarKind {
    pub fn letter(self) -> char {
        match self {
            VarKind::Y => 'y',
            VarKind::U => 'u',
            VarKind::W => 'w',
            VarKind::V => 'v',
        }
    }
}

/// Which side of the tower a variable lives on: fiber (y/w) or base (u/v).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Fiber,
    Base,
}

impl Side {
    /// Whole-character and half-character kinds for this side.
    pub fn kinds(self) -> (VarKind, VarKind) {
        match self {
            Side::Fiber => (VarKind::Y, VarKind::W),
            Side::Base => (VarKind::U, VarKind::V),
        }
    }
}

/// One tower variable: 1-based stage and index plus a kind. Ordering groups
/// a stage's variables by kind (fiber classes before base characters) and
/// then by index, which fixes both the canonical term order and the variable
/// order inside a rendered monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VarId {
    pub stage: u32,
    pub kind: VarKind,
    pub index: u32,
}

impl VarId {
    pub fn new(kind: VarKind, stage: u32, index: u32) -> VarId {
        debug_assert!(stage >= 1 && index >= 1);
        VarId { stage, index, kind }
    }
    pub fn y(stage: u32, index: u32) -> VarId {
        VarId::new(VarKind::Y, stage, index)
    }
    pub fn u(stage: u32, index: u32) -> VarId {
        VarId::new(VarKind::U, stage, index)
    }
    pub fn w(stage: u32, index: u32) -> VarId {
        VarId::new(VarKind::W, stage, index)
    }
    pub fn v(stage: u32, index: u32) -> VarId {
        VarId::new(VarKind::V, stage, index)
    }
    pub fn side(&self) -> Side {
        match self.kind {
            VarKind::Y | VarKind::W => Side::Fiber,
            VarKind::U | VarKind::V => Side::Base,
        }
    }
    pub fn render(&self) -> String {
        format!("{}[{},{}]", self.kind.letter(), self.stage, self.index)
    }
}

// ==================== monomials ====================

/// A Laurent monomial: a finite map variable -> nonzero integer exponent.
///
/// Canonical form: for each (stage, index, side) the half-unit count
/// t = 2*whole + half is split so the stored half exponent is in {-1, 0, 1}.
/// Multiplication therefore folds w^2 into y (and v^2 into u) on the fly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Monomial {
    exps: BTreeMap<VarId, i64>,
}

fn add_exp(acc: &mut BTreeMap<(u32, u32, bool), i64>, v: &VarId, e: i64) {
    let base = matches!(v.side(), Side::Base);
    let half = matches!(v.kind, VarKind::W | VarKind::V);
    let units = if half {
        e
    } else {
        e.checked_mul(2).expect("exponent overflow")
    };
    let slot = acc.entry((v.stage, v.index, base)).or_insert(0);
    *slot = slot.checked_add(units).expect("exponent overflow");
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: VarId) -> Monomial {
        Monomial::from_exps([(v, 1)])
    }

    /// Builds a monomial from (variable, exponent) pairs, accumulating repeats
    /// and normalizing half exponents.
    pub fn from_exps<I: IntoIterator<Item = (VarId, i64)>>(pairs: I) -> Monomial {
        let mut acc: BTreeMap<(u32, u32, bool), i64> = BTreeMap::new();
        for (v, e) in pairs {
            add_exp(&mut acc, &v, e);
        }
        let mut exps = BTreeMap::new();
        for ((stage, index, base), t) in acc {
            let side = if base { Side::Base } else { Side::Fiber };
            let (whole_kind, half_kind) = side.kinds();
            let whole = if t.rem_euclid(2) == 0 {
                t / 2
            } else {
                let half = if t > 0 { 1 } else { -1 };
                exps.insert(VarId::new(half_kind, stage, index), half);
                (t - half) / 2
            };
            if whole != 0 {
                exps.insert(VarId::new(whole_kind, stage, index), whole);
            }
        }
        Monomial { exps }
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exps(&self) -> impl Iterator<Item = (&VarId, &i64)> {
        self.exps.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.exps.keys()
    }

    /// Stored exponent of one variable (0 if absent). Note this sees the
    /// canonical split form: `w^3` is stored as `y*w`.
    pub fn exp(&self, v: &VarId) -> i64 {
        self.exps.get(v).copied().unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_exps(
            self.exps
                .iter()
                .chain(other.exps.iter())
                .map(|(v, e)| (*v, *e)),
        )
    }

    pub fn inv(&self) -> Monomial {
        self.pow(-1)
    }

    pub fn pow(&self, k: i64) -> Monomial {
        if k == 0 {
            return Monomial::one();
        }
        Monomial::from_exps(
            self.exps
                .iter()
                .map(|(v, e)| (*v, e.checked_mul(k).expect("exponent overflow"))),
        )
    }

    /// Half-unit exponents t_i = 2*whole_i + half_i for indices 1..=m of one
    /// stage and side.
    pub fn side_half_units(&self, stage: u32, m: usize, side: Side) -> Vec<i64> {
        let (whole_kind, half_kind) = side.kinds();
        (1..=m as u32)
            .map(|i| {
                2 * self.exp(&VarId::new(whole_kind, stage, i))
                    + self.exp(&VarId::new(half_kind, stage, i))
            })
            .collect()
    }

    /// Builds the stage part of a monomial from half-unit exponents.
    /// Odd half units require `spin` (they produce w/v variables).
    pub fn from_side_half_units(stage: u32, side: Side, units: &[i64], spin: bool) -> Result<Monomial> {
        let (whole_kind, half_kind) = side.kinds();
        let mut pairs = Vec::new();
        for (idx, &t) in units.iter().enumerate() {
            let i = idx as u32 + 1;
            if t.rem_euclid(2) == 0 {
                pairs.push((VarId::new(whole_kind, stage, i), t / 2));
            } else if spin {
                pairs.push((VarId::new(half_kind, stage, i), t));
            } else {
                return Err(KflagError::Internal(format!(
                    "half character escaped to non-spin stage {stage}"
                )));
            }
        }
        Ok(Monomial::from_exps(pairs))
    }

    /// True when the monomial touches any variable of the given stage.
    pub fn mentions_stage(&self, stage: u32) -> bool {
        self.exps.keys().any(|v| v.stage == stage)
    }

    pub fn render(&self) -> String {
        if self.exps.is_empty() {
            return "1".to_string();
        }
        let parts: Vec<String> = self
            .exps
            .iter()
            .map(|(v, e)| {
                if *e == 1 {
                    v.render()
                } else {
                    format!("{}^{}", v.render(), e)
                }
            })
            .collect();
        parts.join("*")
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Monomial) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical term order: the empty monomial is minimal; otherwise compare
/// exponents along the variable sequence sorted by (stage, index, kind), and
/// the first difference decides, larger exponent first. This keeps rendered
/// constants last and makes serialization deterministic.
impl Ord for Monomial {
    fn cmp(&self, other: &Monomial) -> Ordering {
        match (self.exps.is_empty(), other.exps.is_empty()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            (false, false) => {}
        }
        let mut a = self.exps.iter();
        let mut b = other.exps.iter();
        let mut na = a.next();
        let mut nb = b.next();
        loop {
            match (na, nb) {
                (None, None) => return Ordering::Equal,
                (Some((_, ea)), None) => return ea.cmp(&0),
                (None, Some((_, eb))) => return 0.cmp(eb),
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        na = a.next();
                        nb = b.next();
                    }
                    Ordering::Less => return ea.cmp(&0),
                    Ordering::Greater => return 0.cmp(eb),
                },
            }
        }
    }
}

// ==================== polynomials ====================

/// Coefficient mode: the integer subring or the full rational ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Int,
    Rat,
}

/// Sparse exact Laurent polynomial: finite map monomial -> nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentPoly {
    mode: Mode,
    terms: BTreeMap<Monomial, BigRational>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl LaurentPoly {
    pub fn zero(mode: Mode) -> LaurentPoly {
        LaurentPoly {
            mode,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(mode: Mode) -> LaurentPoly {
        LaurentPoly::constant(mode, BigRational::one()).expect("1 is integral")
    }

    /// Constant polynomial; rejects a fractional constant in integer mode.
    pub fn constant(mode: Mode, c: BigRational) -> Result<LaurentPoly> {
        if mode == Mode::Int && !c.is_integer() {
            return Err(KflagError::Mode(format!(
                "constant {c} is not integral in integer mode"
            )));
        }
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Ok(LaurentPoly { mode, terms })
    }

    pub fn int_const(n: i64) -> LaurentPoly {
        LaurentPoly::constant(Mode::Int, big(n)).expect("integral")
    }

    pub fn var(v: VarId) -> LaurentPoly {
        LaurentPoly::monomial(Monomial::var(v))
    }

    /// Single monomial with coefficient one, integer mode.
    pub fn monomial(m: Monomial) -> LaurentPoly {
        let mut terms = BTreeMap::new();
        terms.insert(m, BigRational::one());
        LaurentPoly {
            mode: Mode::Int,
            terms,
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigRational)>>(
        mode: Mode,
        items: I,
    ) -> Result<LaurentPoly> {
        let mut p = LaurentPoly::zero(mode);
        for (m, c) in items {
            if mode == Mode::Int && !c.is_integer() {
                return Err(KflagError::Mode(format!(
                    "coefficient {c} is not integral in integer mode"
                )));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff_of(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Widens to rational mode (no-op on coefficients).
    pub fn to_rat(&self) -> LaurentPoly {
        LaurentPoly {
            mode: Mode::Rat,
            terms: self.terms.clone(),
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_mode(&self, other: &LaurentPoly) -> Result<Mode> {
        if self.mode != other.mode {
            return Err(KflagError::Mode(
                "operands carry different coefficient modes".to_string(),
            ));
        }
        Ok(self.mode)
    }

    pub fn add(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        let mode = self.check_mode(other)?;
        let mut out = LaurentPoly {
            mode,
            terms: self.terms.clone(),
        };
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            mode: self.mode,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.add(&other.neg())
    }

    /// Exact product; errors on mixed coefficient modes.
    pub fn mul(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        let mode = self.check_mode(other)?;
        let mut out = LaurentPoly::zero(mode);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn mul_monomial(&self, m: &Monomial) -> LaurentPoly {
        LaurentPoly {
            mode: self.mode,
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> LaurentPoly {
        if c.is_zero() {
            return LaurentPoly::zero(self.mode);
        }
        LaurentPoly {
            mode: self.mode,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Result<LaurentPoly> {
        let mut out = LaurentPoly::one(self.mode);
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// If the polynomial is a single monomial with coefficient +-1, returns it
    /// with its sign.
    pub fn as_unit(&self) -> Option<(Monomial, i8)> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if c.abs().is_one() {
            Some((m.clone(), if c.is_negative() { -1 } else { 1 }))
        } else {
            None
        }
    }

    /// Substitutes unit images for variables; unmapped variables pass through.
    /// Every image must be a single monomial with coefficient +-1.
    pub fn substitute_monomials(&self, map: &BTreeMap<VarId, LaurentPoly>) -> Result<LaurentPoly> {
        let mut units: BTreeMap<VarId, (Monomial, i8)> = BTreeMap::new();
        for (v, img) in map {
            let unit = img.as_unit().ok_or_else(|| {
                KflagError::Unit(format!(
                    "image of {} is not a single monomial with coefficient +-1",
                    v.render()
                ))
            })?;
            units.insert(*v, unit);
        }
        let mut out = LaurentPoly::zero(self.mode);
        for (m, c) in &self.terms {
            let mut mono = Monomial::one();
            let mut passthrough = Vec::new();
            let mut sign = 1i8;
            for (v, e) in m.exps() {
                match units.get(v) {
                    Some((img, s)) => {
                        mono = mono.mul(&img.pow(*e));
                        if *s < 0 && e.rem_euclid(2) == 1 {
                            sign = -sign;
                        }
                    }
                    None => passthrough.push((*v, *e)),
                }
            }
            mono = mono.mul(&Monomial::from_exps(passthrough));
            let coeff = if sign < 0 { -c } else { c.clone() };
            out.add_term(mono, coeff);
        }
        Ok(out)
    }

    /// Exact evaluation at a point; every variable present must be assigned a
    /// nonzero rational.
    pub fn eval_point(&self, assignment: &BTreeMap<VarId, BigRational>) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut val = c.clone();
            for (v, e) in m.exps() {
                let x = assignment.get(v).ok_or_else(|| {
                    KflagError::Evaluation(format!("no value assigned to {}", v.render()))
                })?;
                if x.is_zero() {
                    return Err(KflagError::Evaluation(format!(
                        "{} assigned zero",
                        v.render()
                    )));
                }
                let e32 = i32::try_from(*e).map_err(|_| {
                    KflagError::Argument("exponent too large for evaluation".to_string())
                })?;
                val *= num_traits::pow::Pow::pow(x, e32);
            }
            total += val;
        }
        Ok(total)
    }

    /// Sets every base-side variable (u and v kinds) to one.
    pub fn specialize_base_to_one(&self) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.mode);
        for (m, c) in &self.terms {
            let kept = Monomial::from_exps(
                m.exps()
                    .filter(|(v, _)| v.side() == Side::Fiber)
                    .map(|(v, e)| (*v, *e)),
            );
            out.add_term(kept, c.clone());
        }
        out
    }

    /// Canonical text rendering: terms in descending canonical order,
    /// variables as `y[j,i]^k`; the joiner around a sign gets spaces exactly
    /// when one of its neighbors is a bare constant.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        let mut prev_const = false;
        for (pos, (m, c)) in self.terms.iter().rev().enumerate() {
            let is_const = m.is_one();
            let negative = c.is_negative();
            let abs = c.abs();
            let body = if is_const {
                abs.to_string()
            } else if abs.is_one() {
                m.render()
            } else {
                format!("{}*{}", abs, m.render())
            };
            if pos == 0 {
                if negative {
                    out.push('-');
                }
            } else {
                let sign = if negative { '-' } else { '+' };
                if prev_const || is_const {
                    out.push(' ');
                    out.push(sign);
                    out.push(' ');
                } else {
                    out.push(sign);
                }
            }
            out.push_str(&body);
            prev_const = is_const;
        }
        out
    }
}

/// Elementary symmetric polynomial e_k of an ordered list of monomials.
pub fn elementary_symmetric(vars: &[Monomial], k: usize) -> Result<LaurentPoly> {
    if k > vars.len() {
        return Err(KflagError::Argument(format!(
            "elementary symmetric index {k} exceeds variable count {}",
            vars.len()
        )));
    }
    // DP over prefixes: e[d] after processing a prefix of the list.
    let mut e: Vec<LaurentPoly> = (0..=k)
        .map(|d| {
            if d == 0 {
                LaurentPoly::one(Mode::Int)
            } else {
                LaurentPoly::zero(Mode::Int)
            }
        })
        .collect();
    for m in vars {
        for d in (1..=k).rev() {
            let bumped = e[d - 1].mul_monomial(m);
            e[d] = e[d].add(&bumped)?;
        }
    }
    Ok(e.pop().unwrap())
}

// ==================== tests ====================

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn y(j: u32, i: u32) -> LaurentPoly {
        LaurentPoly::var(VarId::y(j, i))
    }
    fn w(j: u32, i: u32) -> LaurentPoly {
        LaurentPoly::var(VarId::w(j, i))
    }

    #[test]
    fn product_identity() {
        let p = y(1, 1).add(&y(1, 2)).unwrap();
        assert_eq!(p.mul(&LaurentPoly::one(Mode::Int)).unwrap(), p);
    }

    #[test]
    fn difference_of_squares() {
        let a = y(1, 1).sub(&y(1, 2)).unwrap();
        let b = y(1, 1).add(&y(1, 2)).unwrap();
        let prod = a.mul(&b).unwrap();
        let expect = LaurentPoly::from_terms(
            Mode::Int,
            [
                (Monomial::from_exps([(VarId::y(1, 1), 2)]), super::big(1)),
                (Monomial::from_exps([(VarId::y(1, 2), 2)]), super::big(-1)),
            ],
        )
        .unwrap();
        assert_eq!(prod, expect);
    }

    #[test]
    fn half_exponents_square_to_whole() {
        // (w + w^-1)^2 = y + 2 + y^-1
        let s = w(1, 1)
            .add(&LaurentPoly::monomial(Monomial::var(VarId::w(1, 1)).inv()))
            .unwrap();
        let sq = s.mul(&s).unwrap();
        let expect = LaurentPoly::from_terms(
            Mode::Int,
            [
                (Monomial::var(VarId::y(1, 1)), super::big(1)),
                (Monomial::one(), super::big(2)),
                (Monomial::var(VarId::y(1, 1)).inv(), super::big(1)),
            ],
        )
        .unwrap();
        assert_eq!(sq, expect);
        // no w survives in the square
        assert!(sq.terms().all(|(m, _)| m.vars().all(|v| v.kind == VarKind::Y)));
    }

    #[test]
    fn odd_half_exponents_split_canonically() {
        let m = Monomial::from_exps([(VarId::w(1, 1), 3)]);
        assert_eq!(m.render(), "y[1,1]*w[1,1]");
        let m = Monomial::from_exps([(VarId::w(1, 1), -3)]);
        assert_eq!(m.render(), "y[1,1]^-1*w[1,1]^-1");
        let m = Monomial::from_exps([(VarId::w(1, 1), -1)]);
        assert_eq!(m.render(), "w[1,1]^-1");
    }

    #[test]
    fn elementary_symmetric_examples() {
        let vars: Vec<Monomial> = (1..=3).map(|i| Monomial::var(VarId::y(1, i))).collect();
        let e2 = elementary_symmetric(&vars, 2).unwrap();
        assert_eq!(e2.render(), "y[1,1]*y[1,2]+y[1,1]*y[1,3]+y[1,2]*y[1,3]");
        let pair = [Monomial::var(VarId::y(1, 1)), Monomial::var(VarId::y(1, 1)).inv()];
        assert_eq!(elementary_symmetric(&pair, 2).unwrap(), LaurentPoly::one(Mode::Int));
        assert_eq!(elementary_symmetric(&pair, 0).unwrap(), LaurentPoly::one(Mode::Int));
        assert!(elementary_symmetric(&pair, 3).is_err());
    }

    #[test]
    fn substitution_examples() {
        let p = y(2, 1).add(&y(2, 2)).unwrap();
        let mut map = BTreeMap::new();
        map.insert(VarId::y(2, 1), y(1, 1));
        map.insert(VarId::y(2, 2), y(1, 2));
        assert_eq!(
            p.substitute_monomials(&map).unwrap(),
            y(1, 1).add(&y(1, 2)).unwrap()
        );

        let p = y(2, 1).mul(&y(2, 2)).unwrap();
        let mut map = BTreeMap::new();
        map.insert(VarId::y(2, 1), y(1, 1));
        map.insert(VarId::y(2, 2), LaurentPoly::one(Mode::Int));
        assert_eq!(p.substitute_monomials(&map).unwrap(), y(1, 1));

        // inverse of a unit image
        let p = LaurentPoly::monomial(Monomial::var(VarId::y(1, 1)).inv());
        let mut map = BTreeMap::new();
        map.insert(
            VarId::y(1, 1),
            LaurentPoly::monomial(Monomial::from_exps([(VarId::y(2, 1), 2)])),
        );
        let img = p.substitute_monomials(&map).unwrap();
        assert_eq!(img.render(), "y[2,1]^-2");

        // non-unit image is rejected
        let mut bad = BTreeMap::new();
        bad.insert(VarId::y(1, 1), y(1, 1).add(&LaurentPoly::one(Mode::Int)).unwrap());
        assert!(matches!(
            y(1, 1).substitute_monomials(&bad),
            Err(KflagError::Unit(_))
        ));
    }

    #[test]
    fn eval_examples() {
        let p = y(1, 1)
            .add(&LaurentPoly::monomial(Monomial::var(VarId::y(1, 1)).inv()))
            .unwrap();
        let mut asg = BTreeMap::new();
        asg.insert(VarId::y(1, 1), super::big(2));
        assert_eq!(p.eval_point(&asg).unwrap(), BigRational::new(BigInt::from(5), BigInt::from(2)));

        // e2(y1, y2) - 1 vanishes when the product is 1
        let vars = [Monomial::var(VarId::y(1, 1)), Monomial::var(VarId::y(1, 2))];
        let p = elementary_symmetric(&vars, 2)
            .unwrap()
            .sub(&LaurentPoly::one(Mode::Int))
            .unwrap();
        let mut asg = BTreeMap::new();
        asg.insert(VarId::y(1, 1), super::big(3));
        asg.insert(VarId::y(1, 2), BigRational::new(BigInt::from(1), BigInt::from(3)));
        assert!(p.eval_point(&asg).unwrap().is_zero());

        assert!(LaurentPoly::zero(Mode::Int)
            .eval_point(&BTreeMap::new())
            .unwrap()
            .is_zero());

        // missing assignment and zero value are rejected
        assert!(y(1, 1).eval_point(&BTreeMap::new()).is_err());
        let mut zero = BTreeMap::new();
        zero.insert(VarId::y(1, 1), BigRational::zero());
        assert!(y(1, 1).eval_point(&zero).is_err());
    }

    #[test]
    fn mode_mismatch_is_an_error() {
        let a = LaurentPoly::one(Mode::Int);
        let b = LaurentPoly::one(Mode::Rat);
        assert!(matches!(a.mul(&b), Err(KflagError::Mode(_))));
        assert!(matches!(a.add(&b), Err(KflagError::Mode(_))));
    }

    #[test]
    fn rendering_examples() {
        let p = LaurentPoly::from_terms(
            Mode::Int,
            [
                (
                    Monomial::from_exps([(VarId::y(1, 1), 2), (VarId::y(2, 1), -1)]),
                    super::big(1),
                ),
                (Monomial::one(), super::big(3)),
            ],
        )
        .unwrap();
        assert_eq!(p.render(), "y[1,1]^2*y[2,1]^-1 + 3");

        let p = y(1, 1)
            .add(&y(1, 2))
            .unwrap()
            .sub(&LaurentPoly::int_const(2))
            .unwrap();
        assert_eq!(p.render(), "y[1,1]+y[1,2] - 2");

        let p = y(1, 1)
            .mul(&y(1, 2))
            .unwrap()
            .sub(&LaurentPoly::one(Mode::Int))
            .unwrap();
        assert_eq!(p.render(), "y[1,1]*y[1,2] - 1");

        assert_eq!(LaurentPoly::zero(Mode::Int).render(), "0");
        assert_eq!(y(1, 1).neg().render(), "-y[1,1]");
        let p = LaurentPoly::int_const(2).sub(&y(1, 1)).unwrap();
        assert_eq!(p.render(), "-y[1,1] + 2");
    }

    fn random_poly(rng: &mut ChaCha8Rng, mode: Mode) -> LaurentPoly {
        let nterms = rng.gen_range(0..5);
        let mut p = LaurentPoly::zero(mode);
        for _ in 0..nterms {
            let mut pairs = Vec::new();
            for (j, i) in [(1u32, 1u32), (1, 2), (2, 1)] {
                let e = rng.gen_range(-2i64..=2);
                if e != 0 {
                    pairs.push((VarId::y(j, i), e));
                }
            }
            let c = match mode {
                Mode::Int => super::big(rng.gen_range(-5i64..=5)),
                Mode::Rat => BigRational::new(
                    BigInt::from(rng.gen_range(-5i64..=5)),
                    BigInt::from(rng.gen_range(1i64..=4)),
                ),
            };
            p = p
                .add(&LaurentPoly::from_terms(mode, [(Monomial::from_exps(pairs), c)]).unwrap())
                .unwrap();
        }
        p
    }

    #[test]
    fn ring_axioms_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mode = if rng.gen_bool(0.5) { Mode::Int } else { Mode::Rat };
            let a = random_poly(&mut rng, mode);
            let b = random_poly(&mut rng, mode);
            let c = random_poly(&mut rng, mode);
            let ab = a.mul(&b).unwrap();
            assert_eq!(ab, b.mul(&a).unwrap());
            assert_eq!(ab.mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
            let dist = a.mul(&b.add(&c).unwrap()).unwrap();
            assert_eq!(dist, ab.add(&a.mul(&c).unwrap()).unwrap());
        }
    }

    #[test]
    fn eval_is_a_ring_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_poly(&mut rng, Mode::Int);
            let b = random_poly(&mut rng, Mode::Int);
            let mut asg = BTreeMap::new();
            for (j, i) in [(1u32, 1u32), (1, 2), (2, 1)] {
                let n = rng.gen_range(1i64..=5);
                let d = rng.gen_range(1i64..=5);
                let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                asg.insert(
                    VarId::y(j, i),
                    BigRational::new(BigInt::from(sign * n), BigInt::from(d)),
                );
            }
            let ea = a.eval_point(&asg).unwrap();
            let eb = b.eval_point(&asg).unwrap();
            assert_eq!(a.mul(&b).unwrap().eval_point(&asg).unwrap(), &ea * &eb);
            assert_eq!(a.add(&b).unwrap().eval_point(&asg).unwrap(), &ea + &eb);
        }
    }

    #[test]
    fn substitution_commutes_with_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut map = BTreeMap::new();
        map.insert(
            VarId::y(2, 1),
            LaurentPoly::monomial(Monomial::from_exps([
                (VarId::y(1, 1), 1),
                (VarId::y(1, 2), -1),
            ])),
        );
        map.insert(VarId::y(1, 2), y(1, 1).neg());
        for _ in 0..100 {
            let a = random_poly(&mut rng, Mode::Int);
            let b = random_poly(&mut rng, Mode::Int);
            let lhs = a.mul(&b).unwrap().substitute_monomials(&map).unwrap();
            let rhs = a
                .substitute_monomials(&map)
                .unwrap()
                .mul(&b.substitute_monomials(&map).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn canonical_order_reads_left_to_right() {
        // y[1,1] > y[1,2] > inverses > constant in the rendered order
        let p = LaurentPoly::from_terms(
            Mode::Int,
            [
                (Monomial::one(), super::big(5)),
                (Monomial::var(VarId::y(1, 1)), super::big(1)),
                (Monomial::var(VarId::y(1, 1)).inv(), super::big(1)),
                (Monomial::var(VarId::y(1, 2)), super::big(1)),
            ],
        )
        .unwrap();
        assert_eq!(p.render(), "y[1,1]+y[1,2]+y[1,1]^-1 + 5");
    }
}
