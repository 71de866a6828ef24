//! Independent rational-coefficient rank verification via Buchberger's
//! algorithm, plus a division oracle for cross-checking the exact engine.
//!
//! Laurent relations are turned polynomial by a localization trick: every
//! character variable receives an inverse companion with relation x*xbar - 1
//! (spin stages are written in their half characters, so y = w^2). Non-Borel
//! type-A stages are encoded in block elementary symmetric variables instead;
//! there only the block determinants are units, so only they get companions.
//! The monomial order is degrevlex block by block, top stage first; inside a
//! stage the companion slots form their own block above the originals (an
//! elimination split), and within each block higher indices outrank lower
//! ones. Division therefore eliminates upper stages first, then inverse
//! companions, then high-index variables — the same variables the triangular
//! engine rewrites, which is what makes the two standard bases coincide.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::Value;

use crate::error::{KflagError, Result};
use crate::laurent::{elementary_symmetric, LaurentPoly, Monomial, VarId, VarKind};
use crate::tower::TowerSpec;
use crate::weyl::invariant_generators;

/// Resource ceilings for a Buchberger run.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    /// Total terms across the working basis (and during one reduction).
    pub max_monomials: usize,
    /// S-pair queue length.
    pub max_pairs: usize,
}

impl Default for Caps {
    fn default() -> Caps {
        Caps {
            max_monomials: 1_000_000,
            max_pairs: 100_000,
        }
    }
}

/// Caps optionally overridden by the KFLAG_RESOURCE_CAP environment variable
/// (a positive integer v, giving v pairs and 10v monomials).
pub fn caps_from_env() -> Result<Caps> {
    match std::env::var("KFLAG_RESOURCE_CAP") {
        Err(_) => Ok(Caps::default()),
        Ok(s) => caps_from_override(&s),
    }
}

fn caps_from_override(s: &str) -> Result<Caps> {
    let v: usize = s.trim().parse().map_err(|_| {
        KflagError::Validation(format!(
            "KFLAG_RESOURCE_CAP must be a positive integer, got {s:?}"
        ))
    })?;
    if v == 0 {
        return Err(KflagError::Validation(
            "KFLAG_RESOURCE_CAP must be a positive integer, got \"0\"".to_string(),
        ));
    }
    Ok(Caps {
        max_monomials: v.saturating_mul(10),
        max_pairs: v,
    })
}

/// Encoded polynomial: map from order key to rational coefficient. Order
/// keys are built so that plain lexicographic comparison of the vectors is
/// the block degrevlex order; see `Encoding`.
pub type EncPoly = BTreeMap<Vec<i64>, BigRational>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum StageSlots {
    /// One slot per character-lattice basis element plus one inverse
    /// companion each. Non-spin stages use the characters themselves; spin
    /// stages use lattice coordinates instead — the relative squares
    /// a_i = (t_i - t_m)/2 for i < m and the half character (index m) —
    /// because the spin lattice only holds same-parity half-unit vectors.
    Chars { m: usize, spin: bool },
    /// Block elementary symmetric slots z_{B,1..b} per block, then one
    /// inverse companion per block determinant.
    Blocks { sizes: Vec<usize> },
}

#[derive(Debug, Clone)]
struct StageLayout {
    stage: usize,
    slots: StageSlots,
    raw_start: usize,
    width: usize,
}

impl StageLayout {
    /// Leading slots of the stage holding the inverse companions.
    fn comp_len(&self) -> usize {
        match &self.slots {
            StageSlots::Chars { m, .. } => *m,
            StageSlots::Blocks { sizes } => sizes.len(),
        }
    }
}

/// Polynomial encoding of a tower's ordinary presentation.
///
/// Raw exponent vectors list the slots stage by stage, top stage first; the
/// order key of a monomial splits every stage into its companion group and
/// its original group and prefixes each with the group degree sum, negating
/// the slot exponents in reverse. `Vec<i64>` ordering is then degrevlex
/// within each group and an elimination order across groups and stages.
#[derive(Debug, Clone)]
pub struct Encoding {
    layouts: Vec<StageLayout>,
    raw_len: usize,
}

impl Encoding {
    /// Encoding for a validated tower: character slots for Borel stages,
    /// block elementary symmetric slots for non-Borel type-A stages.
    pub fn for_tower(t: &TowerSpec) -> Encoding {
        let mut layouts = Vec::new();
        let mut raw_start = 0;
        for j in (1..=t.num_stages()).rev() {
            let stage = t.stage(j);
            let (slots, width) = if stage.is_borel() {
                (
                    StageSlots::Chars {
                        m: stage.m,
                        spin: stage.family.is_spin(),
                    },
                    2 * stage.m,
                )
            } else {
                let sizes = stage.block_sizes();
                let width = stage.m + sizes.len();
                (StageSlots::Blocks { sizes }, width)
            };
            layouts.push(StageLayout {
                stage: j,
                slots,
                raw_start,
                width,
            });
            raw_start += width;
        }
        Encoding {
            layouts,
            raw_len: raw_start,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.raw_len
    }

    fn layout(&self, stage: usize) -> Result<&StageLayout> {
        self.layouts
            .iter()
            .find(|l| l.stage == stage)
            .ok_or_else(|| {
                KflagError::Argument(format!(
                    "stage {stage} is outside the encoded tower"
                ))
            })
    }

    /// Raw slot of a character variable. Inverse companions take the leading
    /// slots (so they are eliminated first), then the originals; each group
    /// lists the highest index first.
    fn char_slot(&self, layout: &StageLayout, index: u32, bar: bool) -> usize {
        let m = match layout.slots {
            StageSlots::Chars { m, .. } => m,
            StageSlots::Blocks { .. } => unreachable!("char slot in block layout"),
        };
        let offset = m - index as usize;
        layout.raw_start + if bar { offset } else { m + offset }
    }

    /// Raw slot of z_{block,k}; blocks and in-block degrees both descend, and
    /// the determinant companions take the leading slots.
    fn block_slot(&self, layout: &StageLayout, block: usize, k: usize) -> usize {
        let sizes = match &layout.slots {
            StageSlots::Blocks { sizes } => sizes,
            StageSlots::Chars { .. } => unreachable!("block slot in char layout"),
        };
        let t = sizes.len();
        let m: usize = sizes.iter().sum();
        let pre: usize = sizes[..block].iter().sum();
        layout.raw_start + t + m - pre - k
    }

    fn block_companion_slot(&self, layout: &StageLayout, block: usize) -> usize {
        let t = match &layout.slots {
            StageSlots::Blocks { sizes } => sizes.len(),
            StageSlots::Chars { .. } => unreachable!("block slot in char layout"),
        };
        layout.raw_start + (t - 1 - block)
    }

    /// Raw slot exponents of a Laurent monomial. Spin-stage exponents are
    /// counted in half-units (w carries 1, y carries 2); block-stage
    /// exponents must be constant on each block and land on the block
    /// determinant slot or its companion.
    pub fn encode_monomial(&self, m: &Monomial) -> Result<Vec<i64>> {
        let mut raw = vec![0i64; self.raw_len];
        // combined per-(stage, index) exponents, in half-units on spin stages
        let mut combined: BTreeMap<(usize, u32), i64> = BTreeMap::new();
        for (v, e) in m.exps() {
            let layout = self.layout(v.stage as usize)?;
            let spin = matches!(layout.slots, StageSlots::Chars { spin: true, .. });
            match v.kind {
                VarKind::Y => {
                    let step = if spin { 2 } else { 1 };
                    *combined.entry((v.stage as usize, v.index)).or_insert(0) += step * e;
                }
                VarKind::W => {
                    if !spin {
                        return Err(KflagError::Argument(format!(
                            "variable {} needs a spin stage",
                            v.render()
                        )));
                    }
                    *combined.entry((v.stage as usize, v.index)).or_insert(0) += e;
                }
                VarKind::U | VarKind::V => {
                    return Err(KflagError::Argument(format!(
                        "variable {}: the rational verifier encodes ordinary presentations \
                         only",
                        v.render()
                    )));
                }
            }
        }
        // char stages: split by sign into original and companion slots
        let mut block_exps: BTreeMap<usize, BTreeMap<u32, i64>> = BTreeMap::new();
        let mut spin_exps: BTreeMap<usize, BTreeMap<u32, i64>> = BTreeMap::new();
        for ((stage, index), e) in combined {
            let layout = self.layout(stage)?;
            match &layout.slots {
                StageSlots::Chars { m, spin } => {
                    if index as usize > *m {
                        return Err(KflagError::Argument(format!(
                            "index {index} exceeds the width of stage {stage}"
                        )));
                    }
                    if *spin {
                        spin_exps.entry(stage).or_default().insert(index, e);
                    } else if e >= 0 {
                        raw[self.char_slot(layout, index, false)] += e;
                    } else {
                        raw[self.char_slot(layout, index, true)] += -e;
                    }
                }
                StageSlots::Blocks { .. } => {
                    block_exps.entry(stage).or_default().insert(index, e);
                }
            }
        }
        // spin stages: convert half-unit vectors to lattice coordinates
        for (stage, exps) in spin_exps {
            let layout = self.layout(stage)?;
            let m = match layout.slots {
                StageSlots::Chars { m, .. } => m,
                StageSlots::Blocks { .. } => unreachable!(),
            };
            let d = exps.get(&(m as u32)).copied().unwrap_or(0);
            for i in 1..=m as u32 {
                let t = exps.get(&i).copied().unwrap_or(0);
                if (t - d).rem_euclid(2) != 0 {
                    return Err(KflagError::Argument(format!(
                        "monomial leaves the spin character lattice of stage {stage}"
                    )));
                }
            }
            if d >= 0 {
                raw[self.char_slot(layout, m as u32, false)] += d;
            } else {
                raw[self.char_slot(layout, m as u32, true)] += -d;
            }
            for i in 1..m as u32 {
                let a = (exps.get(&i).copied().unwrap_or(0) - d) / 2;
                if a >= 0 {
                    raw[self.char_slot(layout, i, false)] += a;
                } else {
                    raw[self.char_slot(layout, i, true)] += -a;
                }
            }
        }
        for (stage, exps) in block_exps {
            let layout = self.layout(stage)?;
            let sizes = match &layout.slots {
                StageSlots::Blocks { sizes } => sizes.clone(),
                StageSlots::Chars { .. } => unreachable!(),
            };
            let mut index = 1u32;
            for (b, width) in sizes.iter().enumerate() {
                let first = exps.get(&index).copied().unwrap_or(0);
                for s in 0..*width as u32 {
                    let e = exps.get(&(index + s)).copied().unwrap_or(0);
                    if e != first {
                        return Err(KflagError::Argument(format!(
                            "monomial is not constant on block {} of stage {stage}, so it \
                             has no block-symmetric encoding",
                            b + 1
                        )));
                    }
                }
                if first > 0 {
                    raw[self.block_slot(layout, b, *width)] += first;
                } else if first < 0 {
                    raw[self.block_companion_slot(layout, b)] += -first;
                }
                index += *width as u32;
            }
            for idx in exps.keys() {
                if *idx as usize > sizes.iter().sum::<usize>() {
                    return Err(KflagError::Argument(format!(
                        "index {idx} exceeds the width of stage {stage}"
                    )));
                }
            }
        }
        Ok(raw)
    }

    /// Laurent monomial of a raw vector; defined for character slots only.
    fn decode_raw(&self, raw: &[i64]) -> Result<Monomial> {
        let mut pairs: Vec<(VarId, i64)> = Vec::new();
        for layout in &self.layouts {
            match &layout.slots {
                StageSlots::Chars { m, spin } => {
                    let net = |index: u32| {
                        raw[self.char_slot(layout, index, false)]
                            - raw[self.char_slot(layout, index, true)]
                    };
                    if *spin {
                        let d = net(*m as u32);
                        for index in 1..=*m as u32 {
                            let t = if (index as usize) < *m {
                                2 * net(index) + d
                            } else {
                                d
                            };
                            if t != 0 {
                                pairs.push((VarId::w(layout.stage as u32, index), t));
                            }
                        }
                    } else {
                        for index in 1..=*m as u32 {
                            let e = net(index);
                            if e != 0 {
                                pairs.push((VarId::y(layout.stage as u32, index), e));
                            }
                        }
                    }
                }
                StageSlots::Blocks { .. } => {
                    if raw[layout.raw_start..layout.raw_start + layout.width]
                        .iter()
                        .any(|&e| e != 0)
                    {
                        return Err(KflagError::Unsupported(
                            "block-symmetric classes have no single-monomial form"
                                .to_string(),
                        ));
                    }
                }
            }
        }
        Ok(Monomial::from_exps(pairs))
    }

    /// Order key of a raw vector: per stage (top stage first), first the
    /// companion group then the original group, each written as its degree
    /// sum followed by the negated slot exponents in reverse.
    pub fn okey(&self, raw: &[i64]) -> Vec<i64> {
        let mut key = Vec::with_capacity(self.raw_len + 2 * self.layouts.len());
        for layout in &self.layouts {
            let split = layout.raw_start + layout.comp_len();
            let end = layout.raw_start + layout.width;
            for group in [&raw[layout.raw_start..split], &raw[split..end]] {
                key.push(group.iter().sum());
                for e in group.iter().rev() {
                    key.push(-e);
                }
            }
        }
        key
    }

    fn okey_to_raw(&self, okey: &[i64]) -> Vec<i64> {
        let mut raw = vec![0i64; self.raw_len];
        let mut pos = 0;
        for layout in &self.layouts {
            let cl = layout.comp_len();
            for (group_start, group_len) in
                [(layout.raw_start, cl), (layout.raw_start + cl, layout.width - cl)]
            {
                pos += 1; // skip the degree sum
                for offset in (0..group_len).rev() {
                    raw[group_start + offset] = -okey[pos];
                    pos += 1;
                }
            }
        }
        raw
    }

    fn okey_one(&self) -> Vec<i64> {
        vec![0; self.raw_len + 2 * self.layouts.len()]
    }

    /// Componentwise: does the monomial of `a` divide the monomial of `b`?
    fn okey_divides(&self, a: &[i64], b: &[i64]) -> bool {
        let mut pos = 0;
        for layout in &self.layouts {
            let cl = layout.comp_len();
            for group_len in [cl, layout.width - cl] {
                pos += 1;
                for _ in 0..group_len {
                    // entries store negated exponents
                    if a[pos] < b[pos] {
                        return false;
                    }
                    pos += 1;
                }
            }
        }
        true
    }

    fn okey_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn okey_div(a: &[i64], b: &[i64]) -> Vec<i64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    fn okey_lcm(&self, a: &[i64], b: &[i64]) -> Vec<i64> {
        let mut out = vec![0i64; a.len()];
        let mut pos = 0;
        for layout in &self.layouts {
            let cl = layout.comp_len();
            for group_len in [cl, layout.width - cl] {
                let sum_pos = pos;
                pos += 1;
                let mut total = 0;
                for _ in 0..group_len {
                    let v = a[pos].min(b[pos]); // min of negated = max exponent
                    out[pos] = v;
                    total -= v;
                    pos += 1;
                }
                out[sum_pos] = total;
            }
        }
        out
    }

    /// Encodes a Laurent polynomial with rational coefficients.
    pub fn encode_poly(&self, p: &LaurentPoly) -> Result<EncPoly> {
        let mut out = EncPoly::new();
        for (m, c) in p.terms() {
            let key = self.okey(&self.encode_monomial(m)?);
            let entry = out.entry(key).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                // cancellations cannot happen on injective encodings, but
                // stay safe
                let key = self.okey(&self.encode_monomial(m)?);
                out.remove(&key);
            }
        }
        Ok(out)
    }
}

fn lead(p: &EncPoly) -> (&Vec<i64>, &BigRational) {
    p.iter().next_back().expect("nonzero polynomial")
}

fn make_monic(p: &mut EncPoly) {
    let lc = lead(p).1.clone();
    if lc.is_one() {
        return;
    }
    for c in p.values_mut() {
        *c /= lc.clone();
    }
}

fn add_scaled(dst: &mut EncPoly, src: &EncPoly, factor: &BigRational, shift: &[i64]) {
    for (k, c) in src {
        let key = Encoding::okey_mul(k, shift);
        let entry = dst.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += factor * c;
        if entry.is_zero() {
            dst.remove(&key);
        }
    }
}

fn reduce_full(
    enc: &Encoding,
    p: EncPoly,
    basis: &[EncPoly],
    caps: &Caps,
    pairs_done: usize,
) -> Result<EncPoly> {
    let mut work = p;
    let mut remainder = EncPoly::new();
    while let Some((t, c)) = work.iter().next_back().map(|(k, v)| (k.clone(), v.clone())) {
        if work.len() + remainder.len() > caps.max_monomials {
            return Err(KflagError::Resource {
                pairs_done,
                basis_len: basis.len(),
                detail: format!(
                    "the working term count exceeded {} during reduction",
                    caps.max_monomials
                ),
            });
        }
        let divisor = basis
            .iter()
            .find(|g| enc.okey_divides(lead(g).0, &t));
        match divisor {
            Some(g) => {
                let shift = Encoding::okey_div(&t, lead(g).0);
                add_scaled(&mut work, g, &-c, &shift);
            }
            None => {
                work.remove(&t);
                remainder.insert(t, c);
            }
        }
    }
    Ok(remainder)
}

fn spoly(enc: &Encoding, f: &EncPoly, g: &EncPoly) -> EncPoly {
    let lcm = enc.okey_lcm(lead(f).0, lead(g).0);
    let mut s = EncPoly::new();
    add_scaled(&mut s, f, &BigRational::one(), &Encoding::okey_div(&lcm, lead(f).0));
    add_scaled(
        &mut s,
        g,
        &-BigRational::one(),
        &Encoding::okey_div(&lcm, lead(g).0),
    );
    s
}

/// Reduced Groebner basis of the ideal generated by `gens`, deterministic
/// for a fixed input order (normal strategy: smallest lcm first).
pub fn buchberger(enc: &Encoding, gens: Vec<EncPoly>, caps: &Caps) -> Result<Vec<EncPoly>> {
    let mut basis: Vec<EncPoly> = Vec::new();
    for mut g in gens {
        if g.is_empty() {
            continue;
        }
        make_monic(&mut g);
        basis.push(g);
    }
    let mut queue: std::collections::BTreeSet<(Vec<i64>, usize, usize)> =
        std::collections::BTreeSet::new();
    let mut pairs_done = 0usize;
    let mut term_count: usize = basis.iter().map(|g| g.len()).sum();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            queue.insert((enc.okey_lcm(lead(&basis[i]).0, lead(&basis[j]).0), i, j));
        }
    }
    if queue.len() > caps.max_pairs {
        return Err(KflagError::Resource {
            pairs_done: 0,
            basis_len: basis.len(),
            detail: format!("the S-pair queue exceeded {} entries", caps.max_pairs),
        });
    }
    while let Some((lcm, i, j)) = queue.pop_first() {
        pairs_done += 1;
        // product criterion: coprime leading monomials reduce to zero
        if lcm == Encoding::okey_mul(lead(&basis[i]).0, lead(&basis[j]).0) {
            continue;
        }
        let s = spoly(enc, &basis[i], &basis[j]);
        let mut r = reduce_full(enc, s, &basis, caps, pairs_done)?;
        if r.is_empty() {
            continue;
        }
        make_monic(&mut r);
        term_count += r.len();
        if term_count > caps.max_monomials {
            return Err(KflagError::Resource {
                pairs_done,
                basis_len: basis.len(),
                detail: format!(
                    "the working basis exceeded {} terms",
                    caps.max_monomials
                ),
            });
        }
        let new_idx = basis.len();
        basis.push(r);
        for k in 0..new_idx {
            queue.insert((enc.okey_lcm(lead(&basis[k]).0, lead(&basis[new_idx]).0), k, new_idx));
        }
        if queue.len() > caps.max_pairs {
            return Err(KflagError::Resource {
                pairs_done,
                basis_len: basis.len(),
                detail: format!("the S-pair queue exceeded {} entries", caps.max_pairs),
            });
        }
    }
    // interreduce to the unique reduced basis
    loop {
        let mut changed = false;
        let mut idx = 0;
        while idx < basis.len() {
            let g = basis.remove(idx);
            let mut r = reduce_full(enc, g.clone(), &basis, caps, pairs_done)?;
            if r.is_empty() {
                changed = true;
                continue;
            }
            make_monic(&mut r);
            if r != g {
                changed = true;
            }
            basis.insert(idx, r);
            idx += 1;
        }
        if !changed {
            break;
        }
    }
    basis.sort_by(|a, b| lead(a).0.cmp(lead(b).0));
    Ok(basis)
}

/// Monomials outside the leading-term ideal: the quotient's vector-space
/// basis when finite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StandardSet {
    Finite(Vec<Vec<i64>>),
    Infinite,
}

impl StandardSet {
    pub fn dimension(&self) -> Option<usize> {
        match self {
            StandardSet::Finite(v) => Some(v.len()),
            StandardSet::Infinite => None,
        }
    }
}

/// Enumerates the standard monomials of a reduced basis (finite exactly when
/// every slot has a pure leading power).
pub fn standard_monomials(
    enc: &Encoding,
    gb: &[EncPoly],
    caps: &Caps,
) -> Result<StandardSet> {
    if gb.iter().any(|g| lead(g).0 == &enc.okey_one()) {
        return Ok(StandardSet::Finite(Vec::new()));
    }
    let lms: Vec<Vec<i64>> = gb.iter().map(|g| enc.okey_to_raw(lead(g).0)).collect();
    // pure-power bound per slot
    let mut bounds = vec![None; enc.raw_len];
    for lm in &lms {
        let support: Vec<usize> = (0..enc.raw_len).filter(|&s| lm[s] != 0).collect();
        if let [s] = support[..] {
            let b = bounds[s].get_or_insert(lm[s]);
            *b = (*b).min(lm[s]);
        }
    }
    let mut box_size: u128 = 1;
    let mut caps_vec = Vec::with_capacity(enc.raw_len);
    for b in &bounds {
        match b {
            None => return Ok(StandardSet::Infinite),
            Some(c) => {
                caps_vec.push(*c - 1);
                box_size = box_size.saturating_mul(*c as u128);
            }
        }
    }
    if box_size > caps.max_monomials as u128 {
        return Err(KflagError::Resource {
            pairs_done: 0,
            basis_len: gb.len(),
            detail: format!(
                "standard-monomial enumeration needs {box_size} candidates, over the cap {}",
                caps.max_monomials
            ),
        });
    }
    let mut out = Vec::new();
    let mut current = vec![0i64; enc.raw_len];
    loop {
        let divisible = lms
            .iter()
            .any(|lm| (0..enc.raw_len).all(|s| lm[s] <= current[s]));
        if !divisible {
            out.push(enc.okey(&current));
        }
        let mut s = 0;
        loop {
            if s == enc.raw_len {
                out.sort();
                return Ok(StandardSet::Finite(out));
            }
            if current[s] < caps_vec[s] {
                current[s] += 1;
                break;
            }
            current[s] = 0;
            s += 1;
        }
    }
}

/// Rational verifier for one tower: encoded ordinary presentation, its
/// reduced Groebner basis, and the standard monomials.
#[derive(Debug, Clone)]
pub struct Verifier {
    enc: Encoding,
    gb: Vec<EncPoly>,
    standard: StandardSet,
    caps: Caps,
}

impl Verifier {
    pub fn new(t: &TowerSpec, caps: &Caps) -> Result<Verifier> {
        let enc = Encoding::for_tower(t);
        let rels = tower_relations(t, &enc)?;
        let gb = buchberger(&enc, rels, caps)?;
        let standard = standard_monomials(&enc, &gb, caps)?;
        Ok(Verifier {
            enc,
            gb,
            standard,
            caps: *caps,
        })
    }

    pub fn encoding(&self) -> &Encoding {
        &self.enc
    }

    pub fn basis_len(&self) -> usize {
        self.gb.len()
    }

    pub fn dimension(&self) -> Option<BigInt> {
        self.standard.dimension().map(BigInt::from)
    }

    /// Decoded standard monomials (full-flag towers only), ascending.
    pub fn standard_basis(&self) -> Result<Vec<Monomial>> {
        match &self.standard {
            StandardSet::Infinite => Err(KflagError::Unsupported(
                "the quotient has infinitely many standard monomials".to_string(),
            )),
            StandardSet::Finite(keys) => keys
                .iter()
                .map(|k| self.enc.decode_raw(&self.enc.okey_to_raw(k)))
                .collect(),
        }
    }

    /// Rational coordinates of the residue class of `p` over the standard
    /// monomials, via full division by the reduced basis.
    pub fn nf_oracle(&self, p: &LaurentPoly) -> Result<BTreeMap<Monomial, BigRational>> {
        for layout in &self.enc.layouts {
            if matches!(layout.slots, StageSlots::Blocks { .. }) {
                return Err(KflagError::Unsupported(
                    "the division oracle needs full-flag stages".to_string(),
                ));
            }
        }
        let encoded = self.enc.encode_poly(p)?;
        let r = reduce_full(&self.enc, encoded, &self.gb, &self.caps, 0)?;
        let mut out = BTreeMap::new();
        for (key, c) in &r {
            out.insert(self.enc.decode_raw(&self.enc.okey_to_raw(key))?, c.clone());
        }
        Ok(out)
    }
}

/// Encoded relations of the ordinary presentation plus the companion
/// relations that make every unit invertible.
fn tower_relations(t: &TowerSpec, enc: &Encoding) -> Result<Vec<EncPoly>> {
    let mut rels = Vec::new();
    for j in 1..=t.num_stages() {
        let stage = t.stage(j);
        if stage.is_borel() {
            for g in invariant_generators(stage, j as u32) {
                let image = t.psi_pullback(j, &g)?;
                let rel = g.sub(&image)?;
                rels.push(enc.encode_poly(&rel)?);
            }
        } else {
            let layout = enc.layout(j)?;
            let sizes = stage.block_sizes();
            let m = stage.m;
            let yvars: Vec<Monomial> = (1..=m as u32)
                .map(|i| Monomial::var(VarId::y(j as u32, i)))
                .collect();
            for k in 1..=m {
                let mut lhs = block_convolution(enc, layout, &sizes, k);
                let image = t.psi_pullback(j, &elementary_symmetric(&yvars, k)?)?;
                let rhs = enc.encode_poly(&image)?;
                add_scaled(
                    &mut lhs,
                    &rhs,
                    &-BigRational::one(),
                    &enc.okey_one(),
                );
                rels.push(lhs);
            }
        }
    }
    // companions
    for layout in &enc.layouts {
        match &layout.slots {
            StageSlots::Chars { m, .. } => {
                for index in 1..=*m as u32 {
                    let mut raw = vec![0i64; enc.raw_len];
                    raw[enc.char_slot(layout, index, false)] = 1;
                    raw[enc.char_slot(layout, index, true)] = 1;
                    rels.push(companion_relation(enc, raw));
                }
            }
            StageSlots::Blocks { sizes } => {
                for (b, width) in sizes.iter().enumerate() {
                    let mut raw = vec![0i64; enc.raw_len];
                    raw[enc.block_slot(layout, b, *width)] = 1;
                    raw[enc.block_companion_slot(layout, b)] = 1;
                    rels.push(companion_relation(enc, raw));
                }
            }
        }
    }
    Ok(rels)
}

fn companion_relation(enc: &Encoding, raw: Vec<i64>) -> EncPoly {
    let mut rel = EncPoly::new();
    rel.insert(enc.okey(&raw), BigRational::one());
    rel.insert(enc.okey_one(), -BigRational::one());
    rel
}

/// e_k of the whole stage as a convolution of block elementary symmetric
/// slot variables: sum over k_1 + ... + k_t = k of prod_B z_{B,k_B}.
fn block_convolution(
    enc: &Encoding,
    layout: &StageLayout,
    sizes: &[usize],
    k: usize,
) -> EncPoly {
    let mut out = EncPoly::new();
    let mut parts = vec![0usize; sizes.len()];
    fn rec(
        enc: &Encoding,
        layout: &StageLayout,
        sizes: &[usize],
        b: usize,
        remaining: usize,
        parts: &mut Vec<usize>,
        out: &mut EncPoly,
    ) {
        if b == sizes.len() {
            if remaining != 0 {
                return;
            }
            let mut raw = vec![0i64; enc.raw_len];
            for (blk, kb) in parts.iter().enumerate() {
                if *kb > 0 {
                    raw[enc.block_slot(layout, blk, *kb)] += 1;
                }
            }
            out.insert(enc.okey(&raw), BigRational::one());
            return;
        }
        for kb in 0..=sizes[b].min(remaining) {
            parts[b] = kb;
            rec(enc, layout, sizes, b + 1, remaining - kb, parts, out);
        }
        parts[b] = 0;
    }
    rec(enc, layout, sizes, 0, k, &mut parts, &mut out);
    out
}

/// Expected-versus-computed rank report for one tower.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub tower_hash: String,
    pub expected: BigInt,
    pub computed: Option<BigInt>,
    pub pass: bool,
    pub basis_size: usize,
    pub elapsed_ms: u128,
}

impl VerifyReport {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "tower": self.tower_hash,
            "expected": bigint_json(&self.expected),
            "computed": match &self.computed {
                Some(n) => bigint_json(n),
                None => Value::String("infinite".to_string()),
            },
            "pass": self.pass,
            "basis_size": self.basis_size,
            "elapsed_ms": u64::try_from(self.elapsed_ms).unwrap_or(u64::MAX),
        })
    }
}

fn bigint_json(n: &BigInt) -> Value {
    match u64::try_from(n) {
        Ok(v) => Value::Number(v.into()),
        Err(_) => Value::String(n.to_string()),
    }
}

/// Runs the rational rank check for a tower's ordinary presentation.
pub fn verify_rank(t: &TowerSpec, caps: &Caps) -> Result<VerifyReport> {
    let start = Instant::now();
    let verifier = Verifier::new(t, caps)?;
    let expected = t.expected_rank();
    let computed = verifier.dimension();
    let pass = computed.as_ref() == Some(&expected);
    Ok(VerifyReport {
        tower_hash: t.spec_hash(),
        expected,
        computed,
        pass,
        basis_size: verifier.basis_len(),
        elapsed_ms: start.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::{LaurentPoly, Mode};
    use crate::nf::build_engine;
    use crate::tower::PresMode;
    use crate::weyl::{Family, Stage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stage(family: Family, m: usize) -> Stage {
        Stage::new(family, m, None).unwrap()
    }

    #[allow(clippy::type_complexity)]
    fn tower(stages: Vec<Stage>, maps: Vec<((usize, usize), Vec<Vec<i64>>)>) -> TowerSpec {
        TowerSpec::new(stages, maps.into_iter().collect()).unwrap()
    }

    fn sp1() -> TowerSpec {
        tower(vec![stage(Family::C, 1)], vec![])
    }

    /// EncPoly from (coefficient, sparse raw slots).
    fn mk(enc: &Encoding, terms: &[(i64, &[(usize, i64)])]) -> EncPoly {
        let mut out = EncPoly::new();
        for (c, slots) in terms {
            let mut raw = vec![0i64; enc.num_slots()];
            for (s, e) in *slots {
                raw[*s] = *e;
            }
            out.insert(enc.okey(&raw), BigRational::from_integer((*c).into()));
        }
        out
    }

    #[test]
    fn pinned_buchberger_example() {
        // Sp(1) shape: slots ybar (0) and y (1), companion first
        let enc = Encoding::for_tower(&sp1());
        assert_eq!(enc.num_slots(), 2);
        let r1 = mk(&enc, &[(1, &[(1, 1)]), (1, &[(0, 1)]), (-2, &[])]);
        let r2 = mk(&enc, &[(1, &[(0, 1), (1, 1)]), (-1, &[])]);
        let gb = buchberger(&enc, vec![r1.clone(), r2], &Caps::default()).unwrap();
        // ybar + y - 2 (lead ybar) and y^2 - 2y + 1 (lead y^2); the companion
        // group outranks the originals, so the pure-y row sorts first
        let want_g2 = mk(&enc, &[(1, &[(1, 2)]), (-2, &[(1, 1)]), (1, &[])]);
        assert_eq!(gb, vec![want_g2, r1]);
        let std = standard_monomials(&enc, &gb, &Caps::default()).unwrap();
        match &std {
            StandardSet::Finite(keys) => {
                assert_eq!(keys.len(), 2);
                let one = enc.okey(&[0, 0]);
                let y = enc.okey(&[0, 1]);
                assert_eq!(keys, &vec![one, y]);
            }
            StandardSet::Infinite => panic!("expected finite set"),
        }
    }

    #[test]
    fn zero_and_unit_ideals() {
        let enc = Encoding::for_tower(&sp1());
        let gb = buchberger(&enc, vec![], &Caps::default()).unwrap();
        assert!(gb.is_empty());
        assert_eq!(
            standard_monomials(&enc, &gb, &Caps::default()).unwrap(),
            StandardSet::Infinite
        );

        let one = mk(&enc, &[(7, &[])]);
        let gb = buchberger(&enc, vec![one], &Caps::default()).unwrap();
        assert_eq!(gb, vec![mk(&enc, &[(1, &[])])]);
        assert_eq!(
            standard_monomials(&enc, &gb, &Caps::default())
                .unwrap()
                .dimension(),
            Some(0)
        );
    }

    #[test]
    fn rank_suite_dimensions() {
        let cases: Vec<(TowerSpec, u64)> = vec![
            (tower(vec![stage(Family::A, 2)], vec![]), 2),
            (tower(vec![stage(Family::A, 3)], vec![]), 6),
            (
                tower(
                    vec![Stage::new(Family::A, 3, Some(vec![2, 1])).unwrap()],
                    vec![],
                ),
                3,
            ),
            (
                tower(
                    vec![stage(Family::A, 2), stage(Family::A, 2)],
                    vec![((2, 1), vec![vec![2, -1], vec![1, 1]])],
                ),
                4,
            ),
            (sp1(), 2),
            (tower(vec![stage(Family::C, 2)], vec![]), 8),
            (tower(vec![stage(Family::BSpin, 1)], vec![]), 2),
            (tower(vec![stage(Family::BSpin, 2)], vec![]), 8),
            (
                tower(
                    vec![stage(Family::A, 2), stage(Family::C, 1)],
                    vec![((2, 1), vec![vec![1, -1]])],
                ),
                4,
            ),
        ];
        for (t, want) in cases {
            let report = verify_rank(&t, &Caps::default()).unwrap();
            assert_eq!(report.expected, BigInt::from(want), "{}", t.spec_hash());
            assert_eq!(report.computed, Some(BigInt::from(want)));
            assert!(report.pass);
        }
    }

    #[test]
    fn blocked_towers() {
        // blocked top stage over a full flag
        let t = tower(
            vec![
                stage(Family::A, 2),
                Stage::new(Family::A, 3, Some(vec![2, 1])).unwrap(),
            ],
            vec![((2, 1), vec![vec![1, 0], vec![1, 0], vec![0, 2]])],
        );
        let report = verify_rank(&t, &Caps::default()).unwrap();
        assert_eq!(report.computed, Some(BigInt::from(6u32)));
        assert!(report.pass);

        // full flag over a blocked source (twist rows constant per block)
        let t = tower(
            vec![
                Stage::new(Family::A, 3, Some(vec![2, 1])).unwrap(),
                stage(Family::A, 2),
            ],
            vec![((2, 1), vec![vec![1, 1, 0], vec![0, 0, 2]])],
        );
        let report = verify_rank(&t, &Caps::default()).unwrap();
        assert_eq!(report.computed, Some(BigInt::from(6u32)));
        assert!(report.pass);
    }

    #[test]
    fn oracle_examples() {
        let t = tower(vec![stage(Family::A, 2)], vec![]);
        let v = Verifier::new(&t, &Caps::default()).unwrap();
        // standard monomials match the engine basis {1, y[1,1]}
        let basis: Vec<String> = v
            .standard_basis()
            .unwrap()
            .iter()
            .map(|m| m.render())
            .collect();
        assert_eq!(basis, vec!["1", "y[1,1]"]);

        let nf = v.nf_oracle(&LaurentPoly::var(VarId::y(1, 2))).unwrap();
        let got: Vec<(String, String)> = nf
            .iter()
            .map(|(m, c)| (m.render(), c.to_string()))
            .collect();
        assert_eq!(
            got,
            vec![("1".into(), "2".into()), ("y[1,1]".into(), "-1".into())]
        );

        let prod = LaurentPoly::var(VarId::y(1, 1))
            .mul(&LaurentPoly::var(VarId::y(1, 2)))
            .unwrap();
        let nf = v.nf_oracle(&prod).unwrap();
        let got: Vec<(String, String)> = nf
            .iter()
            .map(|(m, c)| (m.render(), c.to_string()))
            .collect();
        assert_eq!(got, vec![("1".into(), "1".into())]);

        assert!(v.nf_oracle(&LaurentPoly::zero(Mode::Int)).unwrap().is_empty());
    }

    #[test]
    fn companion_classes_reduce_to_one() {
        let t = tower(vec![stage(Family::C, 2)], vec![]);
        let v = Verifier::new(&t, &Caps::default()).unwrap();
        for index in [1u32, 2] {
            let layout = v.enc.layout(1).unwrap();
            let mut raw = vec![0i64; v.enc.num_slots()];
            raw[v.enc.char_slot(layout, index, false)] = 1;
            raw[v.enc.char_slot(layout, index, true)] = 1;
            let mut p = EncPoly::new();
            p.insert(v.enc.okey(&raw), BigRational::one());
            let r = reduce_full(&v.enc, p, &v.gb, &v.caps, 0).unwrap();
            assert_eq!(r, mk(&v.enc, &[(1, &[])]));
        }
    }

    #[test]
    fn oracle_agrees_with_engine() {
        let towers = vec![
            tower(vec![stage(Family::A, 2)], vec![]),
            tower(
                vec![stage(Family::A, 2), stage(Family::A, 2)],
                vec![((2, 1), vec![vec![1, -1], vec![0, 1]])],
            ),
        ];
        for t in towers {
            let v = Verifier::new(&t, &Caps::default()).unwrap();
            let e = build_engine(&t, PresMode::Ordinary).unwrap();
            // oracle coordinates of every engine basis monomial
            let oracle_of = |p: &LaurentPoly| v.nf_oracle(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(59);
            for _ in 0..60 {
                let mut p = LaurentPoly::zero(Mode::Int);
                for _ in 0..rng.gen_range(1..=4) {
                    let mut pairs = Vec::new();
                    for (jdx, s) in t.stages().iter().enumerate() {
                        for i in 1..=s.m as u32 {
                            let e = rng.gen_range(-1i64..=1);
                            if e != 0 {
                                pairs.push((VarId::y(jdx as u32 + 1, i), e));
                            }
                        }
                    }
                    let c = rng.gen_range(-5i64..=5);
                    if c == 0 {
                        continue;
                    }
                    p = p
                        .add(
                            &LaurentPoly::from_terms(
                                Mode::Int,
                                [(
                                    Monomial::from_exps(pairs),
                                    BigRational::from_integer(c.into()),
                                )],
                            )
                            .unwrap(),
                        )
                        .unwrap();
                }
                // linear extension: oracle(p) = sum coeff_b * oracle(b)
                let engine_nf = e.normal_form(&p).unwrap();
                let mut combined: BTreeMap<Monomial, BigRational> = BTreeMap::new();
                for (b, coeff) in engine_nf.coords() {
                    let c = coeff.coeff_of(&Monomial::one());
                    for (m, oc) in oracle_of(&LaurentPoly::monomial(b.clone())) {
                        let entry = combined.entry(m).or_insert_with(BigRational::zero);
                        *entry += &c * &oc;
                    }
                }
                combined.retain(|_, c| !c.is_zero());
                assert_eq!(oracle_of(&p), combined);
            }
        }
    }

    #[test]
    fn oracle_is_linear_and_kills_relations() {
        let t = tower(
            vec![stage(Family::A, 2), stage(Family::C, 1)],
            vec![((2, 1), vec![vec![1, -1]])],
        );
        let v = Verifier::new(&t, &Caps::default()).unwrap();
        let pres = crate::tower::ordinary_presentation(&t).unwrap();
        for rel in &pres.relations {
            assert!(v.nf_oracle(rel).unwrap().is_empty(), "{}", rel.render());
        }
        let p = LaurentPoly::var(VarId::y(2, 1));
        let q = LaurentPoly::var(VarId::y(1, 2));
        let sum_nf = v.nf_oracle(&p.add(&q).unwrap()).unwrap();
        let mut merged = v.nf_oracle(&p).unwrap();
        for (m, c) in v.nf_oracle(&q).unwrap() {
            let entry = merged.entry(m).or_insert_with(BigRational::zero);
            *entry += c;
        }
        merged.retain(|_, c| !c.is_zero());
        assert_eq!(sum_nf, merged);
    }

    #[test]
    fn determinism_rerun() {
        let t = tower(
            vec![stage(Family::A, 2), stage(Family::A, 2)],
            vec![((2, 1), vec![vec![2, -1], vec![1, 1]])],
        );
        let a = Verifier::new(&t, &Caps::default()).unwrap();
        let b = Verifier::new(&t, &Caps::default()).unwrap();
        assert_eq!(a.gb, b.gb);
        assert_eq!(a.standard, b.standard);
        let ra = verify_rank(&t, &Caps::default()).unwrap().to_json();
        let rb = verify_rank(&t, &Caps::default()).unwrap().to_json();
        let strip = |v: &Value| {
            let mut v = v.clone();
            v.as_object_mut().unwrap().remove("elapsed_ms");
            v
        };
        assert_eq!(strip(&ra), strip(&rb));
    }

    #[test]
    fn resource_caps_trip() {
        let t = tower(vec![stage(Family::A, 3)], vec![]);
        let tight = Caps {
            max_monomials: 10,
            max_pairs: 2,
        };
        match Verifier::new(&t, &tight) {
            Err(KflagError::Resource { detail, .. }) => {
                assert!(detail.contains("exceeded"), "{detail}");
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn caps_override_parsing() {
        let caps = caps_from_override("500").unwrap();
        assert_eq!(caps.max_pairs, 500);
        assert_eq!(caps.max_monomials, 5000);
        assert!(matches!(
            caps_from_override("0"),
            Err(KflagError::Validation(_))
        ));
        assert!(matches!(
            caps_from_override("abc"),
            Err(KflagError::Validation(_))
        ));
    }

    #[test]
    fn report_json_shape() {
        let t = tower(vec![stage(Family::A, 2)], vec![]);
        let report = verify_rank(&t, &Caps::default()).unwrap();
        let json = report.to_json();
        let obj = json.as_object().unwrap();
        let keys: Vec<&String> = obj.keys().collect();
        assert_eq!(
            keys,
            vec![
                "basis_size",
                "computed",
                "elapsed_ms",
                "expected",
                "pass",
                "tower"
            ]
        );
        assert_eq!(obj["expected"], Value::Number(2u64.into()));
        assert_eq!(obj["computed"], Value::Number(2u64.into()));
        assert_eq!(obj["pass"], Value::Bool(true));
        assert_eq!(obj["tower"], Value::String(t.spec_hash()));
    }

    #[test]
    fn spin_lattice_encoding() {
        let t = tower(vec![stage(Family::BSpin, 2)], vec![]);
        let enc = Encoding::for_tower(&t);
        // w2 alone has half-unit vector (0,1): parities differ, off lattice
        let off = Monomial::from_exps([(VarId::w(1, 2), 1)]);
        assert!(matches!(
            enc.encode_monomial(&off),
            Err(KflagError::Argument(_))
        ));
        // the half character w1*w2 and plain squares are on the lattice
        for m in [
            Monomial::from_exps([(VarId::w(1, 1), 1), (VarId::w(1, 2), 1)]),
            Monomial::from_exps([(VarId::y(1, 2), 1)]),
            Monomial::from_exps([(VarId::w(1, 1), 1), (VarId::w(1, 2), -3)]),
        ] {
            let raw = enc.encode_monomial(&m).unwrap();
            assert_eq!(enc.decode_raw(&raw).unwrap(), m, "{}", m.render());
        }

        // dimension 2 quotient for a single Spin(3) stage: classes {1, w}
        let t3 = tower(vec![stage(Family::BSpin, 1)], vec![]);
        let v = Verifier::new(&t3, &Caps::default()).unwrap();
        let basis: Vec<String> = v
            .standard_basis()
            .unwrap()
            .iter()
            .map(|m| m.render())
            .collect();
        assert_eq!(basis, vec!["1", "w[1,1]"]);
        let nf = v.nf_oracle(&LaurentPoly::var(VarId::y(1, 1))).unwrap();
        let got: Vec<(String, String)> = nf
            .iter()
            .map(|(m, c)| (m.render(), c.to_string()))
            .collect();
        assert_eq!(
            got,
            vec![("1".into(), "-1".into()), ("w[1,1]".into(), "2".into())]
        );
    }

    #[test]
    fn block_encoding_rejects_uneven_monomials() {
        let t = tower(
            vec![Stage::new(Family::A, 3, Some(vec![2, 1])).unwrap()],
            vec![],
        );
        let enc = Encoding::for_tower(&t);
        let uneven = Monomial::from_exps([(VarId::y(1, 1), 1)]);
        assert!(matches!(
            enc.encode_monomial(&uneven),
            Err(KflagError::Argument(_))
        ));
        let even = Monomial::from_exps([(VarId::y(1, 1), 2), (VarId::y(1, 2), 2)]);
        let raw = enc.encode_monomial(&even).unwrap();
        assert_eq!(raw.iter().sum::<i64>(), 2);
    }
}

