//! Expression parsing and tower-spec files.
//!
//! Grammar (whitespace insensitive, left associative, `^` > `*` > `+`/`-`):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' SIGNED_INT)?
//! base   := SIGNED_INT | VAR | '(' expr ')'
//! VAR    := ('y'|'u'|'w'|'v') '[' INT ',' INT ']'
//! ```
//!
//! A leading `-` before the first term is accepted so canonical renderings
//! re-parse. Negative powers are only allowed on bases that are products of
//! variables (unit monomials).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Deserialize;

use crate::error::{KflagError, Result};
use crate::laurent::{LaurentPoly, Mode, VarId, VarKind};
use crate::tower::{PresMode, TowerSpec};
use crate::weyl::{Family, Stage};

// ==================== AST ====================

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprAst {
    Int(BigInt),
    Var { kind: VarKind, stage: u32, index: u32 },
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, i64),
}

// ==================== lexer ====================

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Letter(VarKind),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "{n}"),
            Tok::Letter(k) => write!(f, "{}", k.letter()),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Caret => write!(f, "'^'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::Comma => write!(f, "','"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if c.is_whitespace() {
            chars.next();
            bump(c, &mut line, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_ascii_digit() {
                    digits.push(d);
                    chars.next();
                    bump(d, &mut line, &mut col);
                } else {
                    break;
                }
            }
            let n: BigInt = digits.parse().expect("digits");
            out.push(Token {
                tok: Tok::Int(n),
                line: tline,
                col: tcol,
            });
            continue;
        }
        let tok = match c {
            'y' => Tok::Letter(VarKind::Y),
            'u' => Tok::Letter(VarKind::U),
            'w' => Tok::Letter(VarKind::W),
            'v' => Tok::Letter(VarKind::V),
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            other => {
                return Err(KflagError::Parse {
                    line: tline,
                    col: tcol,
                    expected: vec!["integer".into(), "variable".into(), "operator".into()],
                    found: format!("'{other}'"),
                })
            }
        };
        chars.next();
        bump(c, &mut line, &mut col);
        out.push(Token {
            tok,
            line: tline,
            col: tcol,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

// ==================== parser ====================

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> KflagError {
        let t = self.peek();
        KflagError::Parse {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<Token> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            Err(self.error(&[label]))
        }
    }

    fn parse_expr(&mut self) -> Result<ExprAst> {
        let mut acc = if self.peek().tok == Tok::Minus {
            self.advance();
            ExprAst::Neg(Box::new(self.parse_term()?))
        } else {
            self.parse_term()?
        };
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.advance();
                    acc = ExprAst::Add(Box::new(acc), Box::new(self.parse_term()?));
                }
                Tok::Minus => {
                    self.advance();
                    acc = ExprAst::Sub(Box::new(acc), Box::new(self.parse_term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self) -> Result<ExprAst> {
        let mut acc = self.parse_factor()?;
        while self.peek().tok == Tok::Star {
            self.advance();
            acc = ExprAst::Mul(Box::new(acc), Box::new(self.parse_factor()?));
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<ExprAst> {
        let base = self.parse_base()?;
        if self.peek().tok == Tok::Caret {
            self.advance();
            let e = self.parse_signed_int()?;
            let e = e.to_i64().ok_or_else(|| {
                KflagError::Size("power exponent out of machine range".to_string())
            })?;
            return Ok(ExprAst::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn parse_signed_int(&mut self) -> Result<BigInt> {
        let negative = match self.peek().tok {
            Tok::Minus => {
                self.advance();
                true
            }
            Tok::Plus => {
                self.advance();
                false
            }
            _ => false,
        };
        match self.peek().tok.clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(if negative { -n } else { n })
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn parse_index(&mut self, what: &str) -> Result<u32> {
        let t = self.peek().clone();
        let n = self.parse_signed_int()?;
        if n < BigInt::from(1) {
            return Err(KflagError::Binding(format!(
                "{what} must be >= 1 at {}:{} (got {n})",
                t.line, t.col
            )));
        }
        n.to_u32().ok_or_else(|| {
            KflagError::Binding(format!("{what} too large at {}:{}", t.line, t.col))
        })
    }

    fn parse_base(&mut self) -> Result<ExprAst> {
        match self.peek().tok.clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(ExprAst::Int(n))
            }
            Tok::Minus | Tok::Plus => {
                // signed integer literal
                Ok(ExprAst::Int(self.parse_signed_int()?))
            }
            Tok::Letter(kind) => {
                self.advance();
                self.expect(Tok::LBracket, "'['")?;
                let stage = self.parse_index("stage index")?;
                self.expect(Tok::Comma, "','")?;
                let index = self.parse_index("variable index")?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(ExprAst::Var { kind, stage, index })
            }
            Tok::LParen => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => Err(self.error(&["integer", "variable", "'('"])),
        }
    }
}

/// Parses one expression; the whole input must be consumed.
pub fn parse_expr(src: &str) -> Result<ExprAst> {
    let tokens = lex(src)?;
    let mut parser = Parser { tokens, pos: 0 };
    let ast = parser.parse_expr()?;
    if parser.peek().tok != Tok::Eof {
        return Err(parser.error(&["'+'", "'-'", "'*'", "'^'", "end of input"]));
    }
    Ok(ast)
}

// ==================== lowering ====================

/// Largest exponent allowed when expanding a power of a composite base.
const MAX_COMPOSITE_POWER: i64 = 4096;

fn is_monomial_base(ast: &ExprAst) -> bool {
    match ast {
        ExprAst::Var { .. } => true,
        ExprAst::Mul(a, b) => is_monomial_base(a) && is_monomial_base(b),
        ExprAst::Pow(a, _) => is_monomial_base(a),
        _ => false,
    }
}

fn check_var(tower: &TowerSpec, mode: PresMode, kind: VarKind, stage: u32, index: u32) -> Result<()> {
    let r = tower.num_stages();
    if stage as usize > r {
        return Err(KflagError::Binding(format!(
            "variable {}[{stage},{index}]: the tower has {r} stages",
            kind.letter()
        )));
    }
    let st = tower.stage(stage as usize);
    if index as usize > st.m {
        return Err(KflagError::Binding(format!(
            "variable {}[{stage},{index}]: stage {stage} has {} variables",
            kind.letter(),
            st.m
        )));
    }
    if matches!(kind, VarKind::W | VarKind::V) && !st.family.is_spin() {
        return Err(KflagError::Binding(format!(
            "variable {}[{stage},{index}]: stage {stage} (family {}) has no half characters",
            kind.letter(),
            st.family
        )));
    }
    if matches!(kind, VarKind::U | VarKind::V) && mode != PresMode::Equivariant {
        return Err(KflagError::Binding(format!(
            "variable {}[{stage},{index}] exists only in equivariant mode",
            kind.letter()
        )));
    }
    Ok(())
}

/// Lowers a parsed expression to an exact polynomial over the tower's
/// variables, checking every variable reference against the tower and mode.
pub fn lower_expr(ast: &ExprAst, tower: &TowerSpec, mode: PresMode) -> Result<LaurentPoly> {
    match ast {
        ExprAst::Int(n) => {
            LaurentPoly::constant(Mode::Int, num_rational::BigRational::from_integer(n.clone()))
        }
        ExprAst::Var { kind, stage, index } => {
            check_var(tower, mode, *kind, *stage, *index)?;
            Ok(LaurentPoly::var(VarId::new(*kind, *stage, *index)))
        }
        ExprAst::Neg(a) => Ok(lower_expr(a, tower, mode)?.neg()),
        ExprAst::Add(a, b) => lower_expr(a, tower, mode)?.add(&lower_expr(b, tower, mode)?),
        ExprAst::Sub(a, b) => lower_expr(a, tower, mode)?.sub(&lower_expr(b, tower, mode)?),
        ExprAst::Mul(a, b) => lower_expr(a, tower, mode)?.mul(&lower_expr(b, tower, mode)?),
        ExprAst::Pow(a, k) => {
            let base = lower_expr(a, tower, mode)?;
            if is_monomial_base(a) {
                let (m, sign) = base.as_unit().ok_or_else(|| {
                    KflagError::Internal("variable product lowered to a non-unit".to_string())
                })?;
                let powered = LaurentPoly::monomial(m.pow(*k));
                return Ok(if sign < 0 && k.rem_euclid(2) == 1 {
                    powered.neg()
                } else {
                    powered
                });
            }
            if *k < 0 {
                return Err(KflagError::Unit(format!(
                    "negative power of a non-monomial base (exponent {k})"
                )));
            }
            if *k > MAX_COMPOSITE_POWER {
                return Err(KflagError::Size(format!(
                    "power {k} of a composite base exceeds the cap {MAX_COMPOSITE_POWER}"
                )));
            }
            base.pow(*k as u32)
        }
    }
}

/// Convenience: parse then lower.
pub fn parse_and_lower(src: &str, tower: &TowerSpec, mode: PresMode) -> Result<LaurentPoly> {
    lower_expr(&parse_expr(src)?, tower, mode)
}

// ==================== tower-spec files ====================

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    family: String,
    vars: usize,
    #[serde(default)]
    blocks: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTower {
    #[serde(default)]
    version: Option<u64>,
    stages: Vec<RawStage>,
    #[serde(default)]
    maps: BTreeMap<String, BTreeMap<String, Vec<Vec<i64>>>>,
}

fn parse_stage_key(key: &str, what: &str) -> Result<usize> {
    let n: usize = key.parse().map_err(|_| {
        KflagError::Validation(format!("maps: {what} \"{key}\" is not a 1-based stage index"))
    })?;
    if n == 0 {
        return Err(KflagError::Validation(format!(
            "maps: {what} \"{key}\" is not a 1-based stage index"
        )));
    }
    Ok(n)
}

/// Builds a validated tower from JSON text.
pub fn tower_from_json_str(src: &str) -> Result<TowerSpec> {
    let raw: RawTower = serde_json::from_str(src)
        .map_err(|e| KflagError::Validation(format!("tower spec: {e}")))?;
    if let Some(v) = raw.version {
        if v != 1 {
            return Err(KflagError::Validation(format!(
                "unsupported tower spec version {v} (expected 1)"
            )));
        }
    }
    let mut stages = Vec::with_capacity(raw.stages.len());
    for s in raw.stages {
        stages.push(Stage::new(Family::parse(&s.family)?, s.vars, s.blocks)?);
    }
    let mut maps = BTreeMap::new();
    for (jkey, inner) in raw.maps {
        let j = parse_stage_key(&jkey, "stage key")?;
        for (lkey, mat) in inner {
            let l = parse_stage_key(&lkey, "base stage key")?;
            maps.insert((j, l), mat);
        }
    }
    TowerSpec::new(stages, maps)
}

/// Reads and validates a tower-spec file.
pub fn load_tower_spec(path: &str) -> Result<TowerSpec> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| KflagError::Io(format!("{path}: {e}")))?;
    tower_from_json_str(&src)
}
