//! Exact K-ring presentations of flag Bott towers.

pub mod cli;
pub mod error;
pub mod expr;
pub mod groebner;
pub mod laurent;
pub mod nf;
pub mod tower;
pub mod weyl;

pub use error::{KflagError, Result};
pub use expr::{load_tower_spec, lower_expr, parse_and_lower, parse_expr, tower_from_json_str, ExprAst};
pub use groebner::{
    buchberger, caps_from_env, standard_monomials, verify_rank, Caps, EncPoly, Encoding,
    StandardSet, Verifier, VerifyReport,
};
pub use laurent::{elementary_symmetric, LaurentPoly, Mode, Monomial, Side, VarId, VarKind};
pub use nf::{build_engine, BasisVector, MultTable, QuotientEngine, DEFAULT_MULT_CAP};
pub use tower::{
    c_classes, equivariant_presentation, ordinary_presentation, specialize_u1, PresMode,
    Presentation, TowerSpec,
};
pub use weyl::{
    apply_simple_reflection, invariant_generators, parabolic_generators, Family, Stage,
};

// Every Rust snippet in the guide runs as a doc-test, so the book and the
// crate cannot drift apart.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/laurent.md")]
    mod laurent {}
    #[doc = include_str!("../../../book/src/weyl.md")]
    mod weyl {}
    #[doc = include_str!("../../../book/src/towers.md")]
    mod towers {}
    #[doc = include_str!("../../../book/src/normal_forms.md")]
    mod normal_forms {}
    #[doc = include_str!("../../../book/src/groebner.md")]
    mod groebner {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
