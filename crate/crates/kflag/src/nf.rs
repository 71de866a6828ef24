//! Exact normal forms in the quotient ring of a full-flag type-A tower.
//!
//! The stage relations identify each elementary symmetric polynomial of the
//! stage variables with its (possibly twisted) image c_{j,k} from lower
//! stages, so over the quotient the variables y[j,1..m] are exactly the roots
//! of the monic polynomial f_j(t) = t^m - c_{j,1} t^{m-1} + ... +
//! (-1)^m c_{j,m}. Synthetic division peels off one root per variable and
//! yields a triangular division system whose leading terms are the pure
//! powers y[j,i]^{m-i+1}; the monomials below those caps form an exact module
//! basis (over the integers, or over the base-character ring in equivariant
//! mode).

use std::collections::BTreeMap;

use num_traits::One;
use serde_json::Value;

use crate::error::{KflagError, Result};
use crate::laurent::{elementary_symmetric, LaurentPoly, Mode, Monomial, VarId, VarKind};
use crate::tower::{equivariant_presentation, ordinary_presentation, PresMode, TowerSpec};
use crate::weyl::Family;

/// Default cap on the basis size accepted by `mult_table`.
pub const DEFAULT_MULT_CAP: usize = 720;

/// Exponent-vector key in the division order: entries list the stage
/// variables with the top stage first and, within a stage, the highest index
/// first, so plain lexicographic comparison of the vectors is the division
/// order and every row's designated leading power is its true maximum.
type DivKey = Vec<i64>;

#[derive(Debug, Clone)]
struct EngineRow {
    poly: LaurentPoly,
    lm_exp: i64,
    /// Non-leading terms grouped by stage-variable exponents; coefficients
    /// are polynomials in the base characters (constants in ordinary mode).
    tail: Vec<(DivKey, LaurentPoly)>,
}

/// Coordinates of a residue class over the standard-monomial basis.
/// Coefficients are integers in ordinary mode and polynomials in the base
/// characters in equivariant mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisVector {
    coords: BTreeMap<Monomial, LaurentPoly>,
}

impl BasisVector {
    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> impl Iterator<Item = (&Monomial, &LaurentPoly)> {
        self.coords.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&LaurentPoly> {
        self.coords.get(m)
    }

    /// The represented polynomial: sum of coefficient times basis monomial.
    pub fn expansion(&self) -> LaurentPoly {
        let mut out = LaurentPoly::zero(Mode::Int);
        for (m, c) in &self.coords {
            out = out.add(&c.mul_monomial(m)).expect("int mode");
        }
        out
    }

    /// JSON map from canonical monomial string to coefficient string.
    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        for (m, c) in &self.coords {
            obj.insert(m.render(), Value::String(c.render()));
        }
        Value::Object(obj)
    }
}

/// Structure constants of the quotient: coordinates of every product of two
/// basis monomials.
#[derive(Debug, Clone)]
pub struct MultTable {
    pub basis: Vec<Monomial>,
    pub table: Vec<Vec<BasisVector>>,
}

impl MultTable {
    pub fn to_json(&self) -> Value {
        let basis: Vec<Value> = self
            .basis
            .iter()
            .map(|m| Value::String(m.render()))
            .collect();
        let table: Vec<Value> = self
            .table
            .iter()
            .map(|row| Value::Array(row.iter().map(|v| v.to_json()).collect()))
            .collect();
        serde_json::json!({ "basis": basis, "table": table })
    }
}

/// Triangular division engine for one tower and mode.
#[derive(Debug, Clone)]
pub struct QuotientEngine {
    tower: TowerSpec,
    mode: PresMode,
    /// Variable of each division-order position, top stage / high index first.
    positions: Vec<(u32, u32)>,
    pos_index: BTreeMap<(u32, u32), usize>,
    /// Largest standard exponent per position (m_j - i).
    caps: Vec<i64>,
    rows: Vec<Option<EngineRow>>,
    /// Per stage, the monomial image of the stage determinant prod_i y[j,i].
    unit_dets: Vec<Monomial>,
    basis: Vec<Monomial>,
}

/// Builds the division system for a full-flag type-A tower, bottom stage
/// first, and self-checks that every presentation relation reduces to zero.
pub fn build_engine(tower: &TowerSpec, mode: PresMode) -> Result<QuotientEngine> {
    for (idx, s) in tower.stages().iter().enumerate() {
        if s.family != Family::A || !s.is_borel() {
            return Err(KflagError::Unsupported(format!(
                "the exact engine handles full-flag family-A stages only; stage {} is family \
                 {} with blocks {:?}",
                idx + 1,
                s.family,
                s.block_sizes()
            )));
        }
    }
    let r = tower.num_stages();
    let mut positions = Vec::new();
    for j in (1..=r).rev() {
        for i in (1..=tower.stage(j).m as u32).rev() {
            positions.push((j as u32, i));
        }
    }
    let pos_index: BTreeMap<(u32, u32), usize> = positions
        .iter()
        .enumerate()
        .map(|(p, v)| (*v, p))
        .collect();
    let caps: Vec<i64> = positions
        .iter()
        .map(|(j, i)| (tower.stage(*j as usize).m as i64) - (*i as i64))
        .collect();
    let n = positions.len();
    let mut engine = QuotientEngine {
        tower: tower.clone(),
        mode,
        positions,
        pos_index,
        caps,
        rows: vec![None; n],
        unit_dets: Vec::new(),
        basis: Vec::new(),
    };

    for j in 1..=r {
        let m = engine.tower.stage(j).m;
        let yvars: Vec<Monomial> = (1..=m as u32)
            .map(|i| Monomial::var(VarId::y(j as u32, i)))
            .collect();
        let pull = |p: &LaurentPoly| -> Result<LaurentPoly> {
            match mode {
                PresMode::Ordinary => engine.tower.psi_pullback(j, p),
                PresMode::Equivariant => engine.tower.twisted_pullback(j, p),
            }
        };

        // stage determinant image, kept unreduced for inverse elimination
        let det = LaurentPoly::monomial(Monomial::from_exps(
            (1..=m as u32).map(|i| (VarId::y(j as u32, i), 1)),
        ));
        let det_image = pull(&det)?;
        let (unit, sign) = det_image.as_unit().ok_or_else(|| {
            KflagError::Internal("stage determinant image is not a unit monomial".to_string())
        })?;
        debug_assert_eq!(sign, 1);
        engine.unit_dets.push(unit);

        // f_j(t) coefficients: 1, -c_1, +c_2, ... with c_k the reduced image
        // of the k-th elementary symmetric polynomial
        let mut f: Vec<LaurentPoly> = vec![LaurentPoly::one(Mode::Int)];
        for k in 1..=m {
            let image = pull(&elementary_symmetric(&yvars, k)?)?;
            let c = engine.normal_form(&image)?.expansion();
            f.push(if k % 2 == 1 { c.neg() } else { c });
        }

        // peel one root per variable: g_{j,i} = f_{j,i-1}(y[j,i]), then
        // divide f synthetically by (t - y[j,i])
        for i in 1..=m as u32 {
            let yv = VarId::y(j as u32, i);
            let deg = f.len() - 1;
            let mut g = LaurentPoly::zero(Mode::Int);
            for (k, coeff) in f.iter().enumerate() {
                let term = coeff.mul_monomial(&Monomial::from_exps([(yv, (deg - k) as i64)]));
                g = g.add(&term)?;
            }
            engine.set_row(j as u32, i, g)?;
            let ypoly = LaurentPoly::var(yv);
            let mut b: Vec<LaurentPoly> = vec![f[0].clone()];
            for k in 1..deg {
                b.push(f[k].add(&b[k - 1].mul(&ypoly)?)?);
            }
            f = b;
        }
    }

    engine.basis = engine.enumerate_basis();

    // self-check: every presentation relation reduces to zero
    let pres = match mode {
        PresMode::Ordinary => ordinary_presentation(tower)?,
        PresMode::Equivariant => equivariant_presentation(tower)?,
    };
    for rel in &pres.relations {
        if !build_self_check(&engine, rel)? {
            return Err(KflagError::Internal(format!(
                "presentation relation {} does not reduce to zero",
                rel.render()
            )));
        }
    }
    Ok(engine)
}

fn build_self_check(engine: &QuotientEngine, rel: &LaurentPoly) -> Result<bool> {
    Ok(engine.normal_form(rel)?.is_zero())
}

impl QuotientEngine {
    pub fn mode(&self) -> PresMode {
        self.mode
    }

    pub fn tower(&self) -> &TowerSpec {
        &self.tower
    }

    /// Standard-monomial basis in increasing canonical order.
    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    /// Number of division rows (one per stage variable).
    pub fn num_rows(&self) -> usize {
        self.positions.len()
    }

    /// The division row for variable y[j,i].
    pub fn row_poly(&self, stage: u32, index: u32) -> Option<&LaurentPoly> {
        let p = *self.pos_index.get(&(stage, index))?;
        self.rows[p].as_ref().map(|r| &r.poly)
    }

    fn set_row(&mut self, stage: u32, index: u32, poly: LaurentPoly) -> Result<()> {
        let p = self.pos_index[&(stage, index)];
        let lm_exp = self.caps[p] + 1;
        let mut tail: BTreeMap<DivKey, LaurentPoly> = BTreeMap::new();
        let mut lead_seen = false;
        for (m, c) in poly.terms() {
            let (key, upart) = self.split_key(m)?;
            let is_lead = key
                .iter()
                .enumerate()
                .all(|(q, &e)| if q == p { e == lm_exp } else { e == 0 })
                && upart.is_one();
            if is_lead {
                if !c.is_one() {
                    return Err(KflagError::Internal(
                        "division row is not monic".to_string(),
                    ));
                }
                lead_seen = true;
                continue;
            }
            let piece = LaurentPoly::from_terms(Mode::Int, [(upart, c.clone())])?;
            match tail.entry(key) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(piece);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = e.get().add(&piece)?;
                    if sum.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = sum;
                    }
                }
            }
        }
        if !lead_seen {
            return Err(KflagError::Internal(format!(
                "division row for y[{stage},{index}] lacks its leading power"
            )));
        }
        self.rows[p] = Some(EngineRow {
            poly,
            lm_exp,
            tail: tail.into_iter().collect(),
        });
        Ok(())
    }

    fn validate_universe(&self, p: &LaurentPoly) -> Result<()> {
        if p.mode() != Mode::Int {
            return Err(KflagError::Mode(
                "the exact engine works over integer coefficients".to_string(),
            ));
        }
        let r = self.tower.num_stages();
        for (m, _) in p.terms() {
            for v in m.vars() {
                if v.stage as usize > r {
                    return Err(KflagError::Argument(format!(
                        "variable {}: the tower has {r} stages",
                        v.render()
                    )));
                }
                if v.index as usize > self.tower.stage(v.stage as usize).m {
                    return Err(KflagError::Argument(format!(
                        "variable {} exceeds the stage width",
                        v.render()
                    )));
                }
                match v.kind {
                    VarKind::Y => {}
                    VarKind::U => {
                        if self.mode != PresMode::Equivariant {
                            return Err(KflagError::Argument(format!(
                                "variable {} exists only in equivariant mode",
                                v.render()
                            )));
                        }
                    }
                    VarKind::W | VarKind::V => {
                        return Err(KflagError::Argument(format!(
                            "half character {} in a type-A engine",
                            v.render()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn split_key(&self, m: &Monomial) -> Result<(DivKey, Monomial)> {
        let mut key = vec![0i64; self.positions.len()];
        let mut upart = Vec::new();
        for (v, e) in m.exps() {
            match v.kind {
                VarKind::Y => key[self.pos_index[&(v.stage, v.index)]] = *e,
                VarKind::U => upart.push((*v, *e)),
                _ => {
                    return Err(KflagError::Internal(format!(
                        "unexpected variable {} in the engine",
                        v.render()
                    )))
                }
            }
        }
        Ok((key, Monomial::from_exps(upart)))
    }

    fn monomial_of_key(&self, key: &DivKey) -> Monomial {
        Monomial::from_exps(
            key.iter()
                .enumerate()
                .filter(|(_, &e)| e != 0)
                .map(|(p, &e)| {
                    let (j, i) = self.positions[p];
                    (VarId::y(j, i), e)
                }),
        )
    }

    /// Rewrites the polynomial to an equal residue class without negative
    /// stage-variable exponents: each inverse is traded for the complementary
    /// product over the stage determinant identity, swept from the top stage
    /// down. Base-character inverses remain.
    pub fn clear_inverses(&self, p: &LaurentPoly) -> Result<LaurentPoly> {
        self.validate_universe(p)?;
        let mut out = LaurentPoly::zero(Mode::Int);
        for (m, c) in p.terms() {
            let mut mono = m.clone();
            for j in (1..=self.unit_dets.len()).rev() {
                let mj = self.tower.stage(j).m;
                let mut total: i64 = 0;
                for i in 1..=mj as u32 {
                    let e = mono.exp(&VarId::y(j as u32, i));
                    if e < 0 {
                        total = total.checked_add(-e).ok_or_else(|| {
                            KflagError::Size("exponent overflow while clearing inverses".into())
                        })?;
                    }
                }
                if total == 0 {
                    continue;
                }
                let ydet = Monomial::from_exps(
                    (1..=mj as u32).map(|i| (VarId::y(j as u32, i), total)),
                );
                mono = mono.mul(&ydet).mul(&self.unit_dets[j - 1].pow(-total));
            }
            out = out.add(&LaurentPoly::from_terms(Mode::Int, [(mono, c.clone())])?)?;
        }
        Ok(out)
    }

    /// Coordinates of the residue class of `p` over the standard basis.
    pub fn normal_form(&self, p: &LaurentPoly) -> Result<BasisVector> {
        let cleared = self.clear_inverses(p)?;
        let mut work: BTreeMap<DivKey, LaurentPoly> = BTreeMap::new();
        for (m, c) in cleared.terms() {
            let (key, upart) = self.split_key(m)?;
            let piece = LaurentPoly::from_terms(Mode::Int, [(upart, c.clone())])?;
            insert_add(&mut work, key, &piece)?;
        }
        self.divide(&mut work)?;
        let mut coords = BTreeMap::new();
        for (key, coeff) in work {
            coords.insert(self.monomial_of_key(&key), coeff);
        }
        Ok(BasisVector { coords })
    }

    fn divide(&self, work: &mut BTreeMap<DivKey, LaurentPoly>) -> Result<()> {
        let mut upper: Option<DivKey> = None;
        loop {
            let next = match &upper {
                None => work.iter().next_back().map(|(k, _)| k.clone()),
                Some(u) => work
                    .range(..u.clone())
                    .next_back()
                    .map(|(k, _)| k.clone()),
            };
            let Some(key) = next else { break };
            let hit = (0..key.len()).find(|&p| key[p] > self.caps[p]);
            match hit {
                None => upper = Some(key),
                Some(p) => {
                    let coeff = work.remove(&key).expect("present");
                    let row = self.rows[p].as_ref().ok_or_else(|| {
                        KflagError::Internal("division row missing".to_string())
                    })?;
                    let mut quotient = key.clone();
                    quotient[p] -= row.lm_exp;
                    for (gkey, gpoly) in &row.tail {
                        let target: DivKey = quotient
                            .iter()
                            .zip(gkey)
                            .map(|(a, b)| a + b)
                            .collect();
                        let delta = coeff.mul(gpoly)?.neg();
                        insert_add(work, target, &delta)?;
                    }
                    upper = Some(key);
                }
            }
        }
        Ok(())
    }

    fn enumerate_basis(&self) -> Vec<Monomial> {
        let mut out = Vec::new();
        let n = self.caps.len();
        let mut current = vec![0i64; n];
        loop {
            out.push(self.monomial_of_key(&current));
            let mut p = 0;
            loop {
                if p == n {
                    out.sort();
                    return out;
                }
                if current[p] < self.caps[p] {
                    current[p] += 1;
                    break;
                }
                current[p] = 0;
                p += 1;
            }
        }
    }

    /// Structure constants nf(a*b) for every pair of basis monomials.
    pub fn mult_table(&self, cap: usize) -> Result<MultTable> {
        if self.basis.len() > cap {
            return Err(KflagError::Size(format!(
                "basis size {} exceeds the structure-constant cap {cap}",
                self.basis.len()
            )));
        }
        let n = self.basis.len();
        let mut table: Vec<Vec<Option<BasisVector>>> = vec![vec![None; n]; n];
        #[allow(clippy::needless_range_loop)]
        for a in 0..n {
            for b in a..n {
                let prod = LaurentPoly::monomial(self.basis[a].mul(&self.basis[b]));
                let nf = self.normal_form(&prod)?;
                table[b][a] = Some(nf.clone());
                table[a][b] = Some(nf);
            }
        }
        Ok(MultTable {
            basis: self.basis.clone(),
            table: table
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.expect("filled")).collect())
                .collect(),
        })
    }
}

fn insert_add(
    map: &mut BTreeMap<DivKey, LaurentPoly>,
    key: DivKey,
    delta: &LaurentPoly,
) -> Result<()> {
    if delta.is_zero() {
        return Ok(());
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(delta.clone());
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let sum = e.get().add(delta)?;
            if sum.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = sum;
            }
        }
    }
    Ok(())
}
