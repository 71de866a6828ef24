//! Command-line front end: subcommand dispatch, output rendering, exit codes.
//!
//! Exit codes: 0 success, 1 input/validation error, 2 computation/resource
//! error, 3 verification failure. Identical inputs produce byte-identical
//! output except for the elapsed_ms field of verify reports.

use std::ffi::OsString;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use serde_json::Value;

use crate::error::{KflagError, Result};
use crate::expr::{load_tower_spec, parse_and_lower};
use crate::groebner::{caps_from_env, verify_rank, VerifyReport};
use crate::laurent::LaurentPoly;
use crate::nf::{build_engine, DEFAULT_MULT_CAP};
use crate::tower::{
    equivariant_presentation, ordinary_presentation, PresMode, Presentation, TowerSpec,
};
use crate::weyl::{invariant_generators, Family, Stage};

#[derive(Parser)]
#[command(
    name = "kflag",
    version,
    about = "Exact K-ring presentations of flag Bott towers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct OutputOpts {
    /// Machine-readable output; errors become JSON on standard error
    #[arg(long)]
    json: bool,
    /// Write the output to a file instead of standard output
    #[arg(short = 'o', long = "output", value_name = "FILE")]
    output: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the generators and relations of a tower's quotient presentation
    Present {
        /// Tower spec JSON file
        tower: String,
        /// Torus-equivariant presentation instead of the ordinary one
        #[arg(long)]
        equivariant: bool,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Check the quotient rank against the expected cell count
    Verify {
        /// Tower spec JSON file
        tower: String,
        /// Use only the exact triangular engine (type-A full-flag towers)
        #[arg(long = "typeA", conflicts_with = "groebner")]
        type_a: bool,
        /// Use only the rational division oracle
        #[arg(long)]
        groebner: bool,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Normal form of an expression in the quotient basis
    Nf {
        /// Tower spec JSON file
        tower: String,
        /// Polynomial expression, e.g. "y[1,2]^2 - 3"
        expr: String,
        /// Reduce in the torus-equivariant presentation
        #[arg(long)]
        equivariant: bool,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Multiplication table of the quotient basis
    Mult {
        /// Tower spec JSON file
        tower: String,
        /// Structure constants of the torus-equivariant quotient
        #[arg(long)]
        equivariant: bool,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Weyl data of one stage: group order, coset rank, invariant generators
    Weyl {
        /// Stage family: A, C or B_spin
        family: String,
        /// Number of fiber characters
        vars: usize,
        /// Parabolic block sizes (family A; omit for the full flag)
        blocks: Vec<usize>,
        #[command(flatten)]
        out: OutputOpts,
    },
}

/// Parses argv and runs one subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (json, outcome) = dispatch(cli.cmd);
    match outcome {
        Ok((text, out, code)) => match deliver(&out, &text) {
            Ok(()) => code,
            Err(e) => {
                emit_error(&e, json);
                e.exit_code()
            }
        },
        Err(e) => {
            emit_error(&e, json);
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd) -> (bool, Result<(String, OutputOpts, i32)>) {
    match cmd {
        Cmd::Present {
            tower,
            equivariant,
            out,
        } => {
            let json = out.json;
            let res = (|| {
                let t = load_tower_spec(&tower)?;
                let pres = presentation(&t, equivariant)?;
                let text = if json {
                    compact(&pres.to_json())
                } else {
                    present_human(&pres)
                };
                Ok((text, out, 0))
            })();
            (json, res)
        }
        Cmd::Verify {
            tower,
            type_a,
            groebner,
            out,
        } => {
            let json = out.json;
            let res = (|| {
                let t = load_tower_spec(&tower)?;
                let report = if type_a {
                    engine_report(&t)?
                } else if groebner {
                    verify_rank(&t, &caps_from_env()?)?
                } else {
                    cross_checked_report(&t)?
                };
                let text = if json {
                    compact(&report.to_json())
                } else {
                    verify_human(&report)
                };
                let code = if report.pass { 0 } else { 3 };
                Ok((text, out, code))
            })();
            (json, res)
        }
        Cmd::Nf {
            tower,
            expr,
            equivariant,
            out,
        } => {
            let json = out.json;
            let res = (|| {
                let t = load_tower_spec(&tower)?;
                let mode = pres_mode(equivariant);
                let p = parse_and_lower(&expr, &t, mode)?;
                let engine = build_engine(&t, mode)?;
                let coords = engine.normal_form(&p)?.to_json();
                let text = if json {
                    compact(&coords)
                } else {
                    spaced_flat_object(&coords)
                };
                Ok((text, out, 0))
            })();
            (json, res)
        }
        Cmd::Mult {
            tower,
            equivariant,
            out,
        } => {
            let json = out.json;
            let res = (|| {
                let t = load_tower_spec(&tower)?;
                let engine = build_engine(&t, pres_mode(equivariant))?;
                let table = engine.mult_table(DEFAULT_MULT_CAP)?;
                let text = if json {
                    compact(&table.to_json())
                } else {
                    mult_human(&table)
                };
                Ok((text, out, 0))
            })();
            (json, res)
        }
        Cmd::Weyl {
            family,
            vars,
            blocks,
            out,
        } => {
            let json = out.json;
            let res = (|| {
                let family = Family::parse(&family)?;
                let blocks = if blocks.is_empty() {
                    None
                } else {
                    Some(blocks)
                };
                let stage = Stage::new(family, vars, blocks)?;
                let text = if json {
                    compact(&weyl_json(&stage))
                } else {
                    weyl_human(&stage)
                };
                Ok((text, out, 0))
            })();
            (json, res)
        }
    }
}

fn pres_mode(equivariant: bool) -> PresMode {
    if equivariant {
        PresMode::Equivariant
    } else {
        PresMode::Ordinary
    }
}

fn presentation(t: &TowerSpec, equivariant: bool) -> Result<Presentation> {
    if equivariant {
        equivariant_presentation(t)
    } else {
        ordinary_presentation(t)
    }
}

/// Default verify: rational oracle, cross-checked against the exact engine
/// whenever the tower qualifies for it.
fn cross_checked_report(t: &TowerSpec) -> Result<VerifyReport> {
    let caps = caps_from_env()?;
    let start = Instant::now();
    let mut report = verify_rank(t, &caps)?;
    match build_engine(t, PresMode::Ordinary) {
        Ok(engine) => {
            let engine_rank = BigInt::from(engine.basis().len());
            if engine_rank != report.expected
                || report.computed.as_ref() != Some(&engine_rank)
            {
                report.pass = false;
            }
        }
        Err(KflagError::Unsupported(_)) => {}
        Err(e) => return Err(e),
    }
    report.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Engine-only verify: the computed rank is the monomial-basis size and
/// basis_size counts the division rows.
fn engine_report(t: &TowerSpec) -> Result<VerifyReport> {
    let start = Instant::now();
    let engine = build_engine(t, PresMode::Ordinary)?;
    let expected = t.expected_rank();
    let computed = BigInt::from(engine.basis().len());
    Ok(VerifyReport {
        tower_hash: t.spec_hash(),
        pass: computed == expected,
        expected,
        computed: Some(computed),
        basis_size: t.stages().iter().map(|s| s.m).sum(),
        elapsed_ms: start.elapsed().as_millis(),
    })
}

fn compact(v: &Value) -> String {
    serde_json::to_string(v).expect("JSON values serialize")
}

/// Renders a flat {string: string} object with a space after ':' and ','.
fn spaced_flat_object(v: &Value) -> String {
    let obj = v.as_object().expect("flat object");
    let inner: Vec<String> = obj
        .iter()
        .map(|(k, val)| format!("{}: {}", Value::String(k.clone()), val))
        .collect();
    format!("{{{}}}", inner.join(", "))
}

fn present_human(pres: &Presentation) -> String {
    let mut lines = vec![format!("mode: {}", pres.mode)];
    lines.push("generators:".to_string());
    for g in &pres.ring_generators {
        lines.push(format!("  {}", g.render()));
    }
    lines.push("relations:".to_string());
    for r in &pres.relations {
        lines.push(format!("  {}", r.render()));
    }
    lines.join("\n")
}

fn verify_human(report: &VerifyReport) -> String {
    let computed = match &report.computed {
        Some(n) => n.to_string(),
        None => "infinite".to_string(),
    };
    [
        format!("tower: {}", report.tower_hash),
        format!("expected: {}", report.expected),
        format!("computed: {computed}"),
        format!("basis size: {}", report.basis_size),
        format!("pass: {}", report.pass),
    ]
    .join("\n")
}

fn mult_human(table: &crate::nf::MultTable) -> String {
    let rendered: Vec<String> = table.basis.iter().map(|b| b.render()).collect();
    let mut lines = vec![format!("basis: {}", rendered.join(", "))];
    for (i, row) in table.table.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            lines.push(format!(
                "{} * {} = {}",
                rendered[i],
                rendered[j],
                cell.expansion().render()
            ));
        }
    }
    lines.join("\n")
}

fn weyl_json(stage: &Stage) -> Value {
    let gens: Vec<String> = invariant_generators(stage, 1)
        .iter()
        .map(LaurentPoly::render)
        .collect();
    serde_json::json!({
        "family": stage.family.to_string(),
        "vars": stage.m,
        "blocks": stage.block_sizes(),
        "weyl_order": bigint_value(&stage.weyl_order()),
        "coset_rank": bigint_value(&stage.coset_rank()),
        "invariant_generators": gens,
    })
}

fn bigint_value(n: &BigInt) -> Value {
    match u64::try_from(n) {
        Ok(v) => Value::Number(v.into()),
        Err(_) => Value::String(n.to_string()),
    }
}

fn weyl_human(stage: &Stage) -> String {
    let blocks: Vec<String> = stage
        .block_sizes()
        .iter()
        .map(|b| b.to_string())
        .collect();
    let mut lines = vec![
        format!("family: {}", stage.family),
        format!("vars: {}", stage.m),
        format!("blocks: {}", blocks.join(",")),
        format!("weyl order: {}", stage.weyl_order()),
        format!("coset rank: {}", stage.coset_rank()),
        "invariant generators:".to_string(),
    ];
    for g in invariant_generators(stage, 1) {
        lines.push(format!("  {}", g.render()));
    }
    lines.join("\n")
}

fn deliver(out: &OutputOpts, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| KflagError::Io(format!("{path}: {e}"))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_error(e: &KflagError, json: bool) {
    if json {
        let payload = serde_json::json!({
            "error": {
                "class": e.class(),
                "code": e.exit_code(),
                "message": e.to_string(),
            }
        });
        eprintln!("{payload}");
    } else {
        eprintln!("error: {e}");
    }
}
