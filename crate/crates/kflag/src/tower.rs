//! Tower descriptions and their quotient-ring presentations.
//!
//! A tower is an ordered list of stages plus one integer twist matrix
//! `A_l^(j)` (shape m_j x m_l) for each pair of stages l < j; absent matrices
//! are the zero matrix. The matrices define the character maps
//! `psi_j: y[j,i] -> prod_{l<j} prod_s y[l,s]^{A_l^(j)(i,s)}` (for j = 1 the
//! map sends every character to 1), and the presentations list one relation
//! `g - psi_j(g)` (ordinary) or `g - twisted psi_j(g)` (equivariant) per
//! invariant generator g per stage.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{KflagError, Result};
use crate::laurent::{LaurentPoly, Monomial, Side, VarId, VarKind};
use crate::weyl::{invariant_generators, parabolic_generators, spin_half_character, Stage};

/// A validated tower: stages plus materialized twist matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerSpec {
    stages: Vec<Stage>,
    maps: BTreeMap<(usize, usize), Vec<Vec<i64>>>,
}

impl TowerSpec {
    /// Validates stage/matrix shapes and the spin parity conditions, then
    /// materializes absent matrices as zero.
    pub fn new(
        stages: Vec<Stage>,
        maps: BTreeMap<(usize, usize), Vec<Vec<i64>>>,
    ) -> Result<TowerSpec> {
        if stages.is_empty() {
            return Err(KflagError::Validation(
                "a tower needs at least one stage".to_string(),
            ));
        }
        let r = stages.len();
        for (j, l) in maps.keys() {
            if !(1 <= *l && l < j && *j <= r) {
                return Err(KflagError::Validation(format!(
                    "twist matrix key ({j},{l}) is out of range for a tower of {r} stages"
                )));
            }
        }
        let mut full = BTreeMap::new();
        for j in 2..=r {
            for l in 1..j {
                let mj = stages[j - 1].m;
                let ml = stages[l - 1].m;
                let mat = match maps.get(&(j, l)) {
                    Some(mat) => {
                        if mat.len() != mj || mat.iter().any(|row| row.len() != ml) {
                            return Err(KflagError::Validation(format!(
                                "twist matrix ({j},{l}) must have shape {mj}x{ml}"
                            )));
                        }
                        mat.clone()
                    }
                    None => vec![vec![0; ml]; mj],
                };
                full.insert((j, l), mat);
            }
        }
        let tower = TowerSpec { stages, maps: full };
        // spin parity: images of a spin stage's half character must land on
        // the lower stage's character lattice
        for j in 2..=r {
            if !tower.stages[j - 1].family.is_spin() {
                continue;
            }
            for l in 1..j {
                let mat = &tower.maps[&(j, l)];
                let ml = tower.stages[l - 1].m;
                let col_sum =
                    |s: usize| mat.iter().map(|row| row[s]).sum::<i64>().rem_euclid(2);
                if tower.stages[l - 1].family.is_spin() {
                    let first = col_sum(0);
                    for s in 1..ml {
                        if col_sum(s) != first {
                            return Err(KflagError::Validation(format!(
                                "spin stage {j} over spin stage {l}: column {} sum parity \
                                 differs from column 1",
                                s + 1
                            )));
                        }
                    }
                } else {
                    for s in 0..ml {
                        if col_sum(s) != 0 {
                            return Err(KflagError::Validation(format!(
                                "spin stage {j} over stage {l}: column {} of the twist \
                                 matrix has an odd sum",
                                s + 1
                            )));
                        }
                    }
                }
            }
        }
        // twist rows are characters of the lower stage's parabolic subgroup,
        // so they must be constant within each source block
        for j in 2..=r {
            for l in 1..j {
                let src = &tower.stages[l - 1];
                if src.is_borel() {
                    continue;
                }
                let mat = &tower.maps[&(j, l)];
                for (i, row) in mat.iter().enumerate() {
                    let mut start = 0usize;
                    for (b, width) in src.block_sizes().iter().enumerate() {
                        let block = &row[start..start + width];
                        if block.iter().any(|&e| e != block[0]) {
                            return Err(KflagError::Validation(format!(
                                "twist matrix ({j},{l}) row {} is not constant on block {} \
                                 of stage {l}",
                                i + 1,
                                b + 1
                            )));
                        }
                        start += width;
                    }
                }
            }
        }
        Ok(tower)
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Stage by 1-based index.
    pub fn stage(&self, j: usize) -> &Stage {
        &self.stages[j - 1]
    }

    /// Twist matrix A_l^(j) (1 <= l < j), always materialized.
    pub fn matrix(&self, j: usize, l: usize) -> &Vec<Vec<i64>> {
        &self.maps[&(j, l)]
    }

    fn check_stage_index(&self, j: usize) -> Result<()> {
        if j < 1 || j > self.stages.len() {
            return Err(KflagError::Argument(format!(
                "stage index {j} out of range 1..={}",
                self.stages.len()
            )));
        }
        Ok(())
    }

    /// Character map of stage j applied coefficient-wise: each stage-j fiber
    /// monomial maps to its image in the lower-stage variables (j = 1 maps
    /// every character to 1).
    pub fn psi_pullback(&self, j: usize, p: &LaurentPoly) -> Result<LaurentPoly> {
        self.pullback_impl(j, p, false)
    }

    /// Equivariant character map: like `psi_pullback` but each image picks up
    /// the mirror base character of its stage-j part (y[j,i] contributes
    /// u[j,i], half characters contribute v[j,i]).
    pub fn twisted_pullback(&self, j: usize, p: &LaurentPoly) -> Result<LaurentPoly> {
        self.pullback_impl(j, p, true)
    }

    fn pullback_impl(&self, j: usize, p: &LaurentPoly, twist: bool) -> Result<LaurentPoly> {
        self.check_stage_index(j)?;
        let stage = self.stage(j);
        let spin_j = stage.family.is_spin();
        for (m, _) in p.terms() {
            for v in m.vars() {
                if v.stage as usize != j || v.side() != Side::Fiber {
                    return Err(KflagError::Argument(format!(
                        "stage-{j} pullback applies to stage-{j} fiber variables only, found {}",
                        v.render()
                    )));
                }
                if v.index as usize > stage.m {
                    return Err(KflagError::Argument(format!(
                        "variable {} exceeds the {} variables of stage {j}",
                        v.render(),
                        stage.m
                    )));
                }
                if v.kind == VarKind::W && !spin_j {
                    return Err(KflagError::Argument(format!(
                        "half character {} on non-spin stage {j}",
                        v.render()
                    )));
                }
            }
        }
        let mut out = LaurentPoly::zero(p.mode());
        for (m, c) in p.terms() {
            let t = m.side_half_units(j as u32, stage.m, Side::Fiber);
            if spin_j {
                let parity = t[0].rem_euclid(2);
                if t.iter().any(|x| x.rem_euclid(2) != parity) {
                    return Err(KflagError::Argument(format!(
                        "monomial {} is off the spin character lattice of stage {j}",
                        m.render()
                    )));
                }
            }
            let mut img = Monomial::one();
            if twist {
                img = img.mul(&Monomial::from_side_half_units(
                    j as u32,
                    Side::Base,
                    &t,
                    spin_j,
                )?);
            }
            for l in 1..j {
                let mat = self.matrix(j, l);
                let ml = self.stage(l).m;
                let mut units = vec![0i64; ml];
                for (i, ti) in t.iter().enumerate() {
                    if *ti == 0 {
                        continue;
                    }
                    for (s, unit) in units.iter_mut().enumerate() {
                        let add = ti.checked_mul(mat[i][s]).ok_or_else(|| {
                            KflagError::Size("exponent overflow in character map".to_string())
                        })?;
                        *unit = unit.checked_add(add).ok_or_else(|| {
                            KflagError::Size("exponent overflow in character map".to_string())
                        })?;
                    }
                }
                let spin_l = self.stage(l).family.is_spin();
                if spin_l && !units.is_empty() {
                    let parity = units[0].rem_euclid(2);
                    if units.iter().any(|x| x.rem_euclid(2) != parity) {
                        return Err(KflagError::Internal(format!(
                            "character image left the spin lattice of stage {l}"
                        )));
                    }
                }
                img = img.mul(&Monomial::from_side_half_units(
                    l as u32,
                    Side::Fiber,
                    &units,
                    spin_l,
                )?);
            }
            out = out.add(&LaurentPoly::from_terms(p.mode(), [(img, c.clone())])?)?;
        }
        Ok(out)
    }

    /// Product over stages of the parabolic coset count: the module rank of
    /// the quotient.
    pub fn expected_rank(&self) -> BigInt {
        self.stages
            .iter()
            .map(|s| s.coset_rank())
            .product::<BigInt>()
            .max(BigInt::one())
    }

    /// Canonical JSON form (sorted keys, zero matrices omitted).
    pub fn to_json(&self) -> Value {
        let stages: Vec<Value> = self
            .stages
            .iter()
            .map(|s| {
                let mut obj = serde_json::Map::new();
                obj.insert("family".to_string(), json!(s.family.to_string()));
                obj.insert("vars".to_string(), json!(s.m));
                if let Some(b) = &s.blocks {
                    obj.insert("blocks".to_string(), json!(b));
                }
                Value::Object(obj)
            })
            .collect();
        let mut maps = serde_json::Map::new();
        for ((j, l), mat) in &self.maps {
            if mat.iter().all(|row| row.iter().all(|&x| x == 0)) {
                continue;
            }
            let outer = maps
                .entry(j.to_string())
                .or_insert_with(|| Value::Object(serde_json::Map::new()));
            outer
                .as_object_mut()
                .expect("object")
                .insert(l.to_string(), json!(mat));
        }
        let mut root = serde_json::Map::new();
        root.insert("version".to_string(), json!(1));
        root.insert("stages".to_string(), Value::Array(stages));
        if !maps.is_empty() {
            root.insert("maps".to_string(), Value::Object(maps));
        }
        Value::Object(root)
    }

    /// Content hash of the canonical JSON form; identifies the tower in
    /// verification reports.
    pub fn spec_hash(&self) -> String {
        let bytes = self.to_json().to_string();
        let mut hasher = Sha256::new();
        hasher.update(bytes.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Presentation flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresMode {
    Ordinary,
    Equivariant,
}

impl fmt::Display for PresMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PresMode::Ordinary => write!(f, "ordinary"),
            PresMode::Equivariant => write!(f, "equivariant"),
        }
    }
}

/// A finite presentation of the quotient ring: generators of the ambient
/// subring and the relation list, ordered stage-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presentation {
    pub mode: PresMode,
    pub ring_generators: Vec<LaurentPoly>,
    pub relations: Vec<LaurentPoly>,
}

impl Presentation {
    pub fn to_json(&self) -> Value {
        json!({
            "mode": self.mode.to_string(),
            "generators": self.ring_generators.iter().map(|g| g.render()).collect::<Vec<_>>(),
            "relations": self.relations.iter().map(|g| g.render()).collect::<Vec<_>>(),
        })
    }
}

/// Ordinary presentation: per stage, the parabolic generators and one
/// relation g - psi_j(g) per invariant generator g.
pub fn ordinary_presentation(tower: &TowerSpec) -> Result<Presentation> {
    let mut ring_generators = Vec::new();
    let mut relations = Vec::new();
    for (idx, stage) in tower.stages().iter().enumerate() {
        let j = idx + 1;
        ring_generators.extend(parabolic_generators(stage, j as u32)?);
        for g in invariant_generators(stage, j as u32) {
            let image = tower.psi_pullback(j, &g)?;
            relations.push(g.sub(&image)?);
        }
    }
    Ok(Presentation {
        mode: PresMode::Ordinary,
        ring_generators,
        relations,
    })
}

/// Equivariant presentation: ring generators gain the base characters
/// (u variables, plus the base half character on spin stages), and each
/// relation twists the character image by its mirror base character.
pub fn equivariant_presentation(tower: &TowerSpec) -> Result<Presentation> {
    let mut ring_generators = Vec::new();
    let mut relations = Vec::new();
    for (idx, stage) in tower.stages().iter().enumerate() {
        let j = idx + 1;
        ring_generators.extend(parabolic_generators(stage, j as u32)?);
        for g in invariant_generators(stage, j as u32) {
            let image = tower.twisted_pullback(j, &g)?;
            relations.push(g.sub(&image)?);
        }
    }
    for (idx, stage) in tower.stages().iter().enumerate() {
        let j = idx as u32 + 1;
        for i in 1..=stage.m as u32 {
            ring_generators.push(LaurentPoly::var(VarId::u(j, i)));
        }
        if stage.family.is_spin() {
            let half = spin_half_character(j, stage.m);
            let mirrored = Monomial::from_exps(
                half.exps()
                    .map(|(v, e)| (VarId::new(VarKind::V, v.stage, v.index), *e)),
            );
            ring_generators.push(LaurentPoly::monomial(mirrored));
        }
    }
    Ok(Presentation {
        mode: PresMode::Equivariant,
        ring_generators,
        relations,
    })
}

/// Sets every base character to 1 in an equivariant presentation, recovering
/// the ordinary presentation of the same tower relation-for-relation.
pub fn specialize_u1(pres: &Presentation) -> Result<Presentation> {
    if pres.mode != PresMode::Equivariant {
        return Err(KflagError::Mode(
            "specialization applies to equivariant presentations".to_string(),
        ));
    }
    let one = LaurentPoly::one(crate::laurent::Mode::Int);
    let ring_generators = pres
        .ring_generators
        .iter()
        .map(|g| g.specialize_base_to_one())
        .filter(|g| *g != one)
        .collect();
    let relations = pres
        .relations
        .iter()
        .map(|g| g.specialize_base_to_one())
        .collect();
    Ok(Presentation {
        mode: PresMode::Ordinary,
        ring_generators,
        relations,
    })
}

/// The twisted base-character monomials c[j,i] of a rank-one (m = 2, full
/// flag, family A) stage: c[j,i] = u[j,i] * psi_j(y[j,i]).
pub fn c_classes(tower: &TowerSpec, j: usize) -> Result<Vec<LaurentPoly>> {
    tower.check_stage_index(j)?;
    let stage = tower.stage(j);
    if stage.family != crate::weyl::Family::A || !stage.is_borel() {
        return Err(KflagError::Argument(format!(
            "c-classes are defined for full-flag family-A stages, stage {j} is {}",
            stage.family
        )));
    }
    (1..=stage.m as u32)
        .map(|i| tower.twisted_pullback(j, &LaurentPoly::var(VarId::y(j as u32, i))))
        .collect()
}
