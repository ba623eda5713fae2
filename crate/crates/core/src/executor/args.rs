//! Decoding of the textual (LiteralText) arguments shared by the executor
//! and the brute-force oracle. Only text handling lives here; each
//! evaluator applies the decoded conditions itself.

use chrono::NaiveDate;

use crate::kb::literal::{parse_date, parse_quantity, parse_year};
use crate::kb::CompareOp;
use crate::program::{split_parts, FunctionKind};

/// A typed comparison against a literal.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Str(String),
    Num { value: f64, unit: String, op: CompareOp },
    Year { value: i32, op: CompareOp },
    Date { value: NaiveDate, op: CompareOp },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

/// Decoded arguments for one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    None,
    Filter { key: String, cond: Condition },
    QueryKey { key: String },
    UnderCondition { key: String, qkey: String, qvalue: String },
    Select { key: String, extreme: Extreme },
    Verify(Condition),
    AttrQualifier { key: String, value: String, qkey: String },
    RelQualifier { pred: String, qkey: String },
}

fn need<'a>(parts: &[&'a str], n: usize) -> Result<Vec<&'a str>, String> {
    if parts.len() != n || parts.iter().any(|p| p.is_empty()) {
        Err(format!("expected {n} non-empty '|'-separated part(s), got {}", parts.len()))
    } else {
        Ok(parts.to_vec())
    }
}

fn op(text: &str) -> Result<CompareOp, String> {
    CompareOp::parse(text).ok_or_else(|| format!("unknown comparison operator '{text}'"))
}

fn condition(function: FunctionKind, value: &str, op_text: Option<&str>) -> Result<Condition, String> {
    use FunctionKind::*;
    match function {
        FilterStr | QFilterStr | VerifyStr => Ok(Condition::Str(value.to_string())),
        FilterNum | QFilterNum | VerifyNum => {
            let (v, unit) = parse_quantity(value).ok_or_else(|| format!("'{value}' is not a quantity"))?;
            Ok(Condition::Num { value: v, unit, op: op(op_text.unwrap_or_default())? })
        }
        FilterYear | QFilterYear | VerifyYear => {
            let v = parse_year(value).ok_or_else(|| format!("'{value}' is not a year"))?;
            Ok(Condition::Year { value: v, op: op(op_text.unwrap_or_default())? })
        }
        FilterDate | QFilterDate | VerifyDate => {
            let v = parse_date(value).ok_or_else(|| format!("'{value}' is not a YYYY-MM-DD date"))?;
            Ok(Condition::Date { value: v, op: op(op_text.unwrap_or_default())? })
        }
        _ => unreachable!("no condition for {function}"),
    }
}

/// Decodes the LiteralText argument of `function`. Functions whose
/// argument names a KB element (or nothing) decode to [`Decoded::None`].
pub fn decode(function: FunctionKind, argument: &str) -> Result<Decoded, String> {
    use FunctionKind::*;
    let parts = split_parts(argument);
    Ok(match function {
        FilterStr | QFilterStr => {
            let p = need(&parts, 2)?;
            Decoded::Filter { key: p[0].to_string(), cond: condition(function, p[1], None)? }
        }
        FilterNum | FilterYear | FilterDate | QFilterNum | QFilterYear | QFilterDate => {
            let p = need(&parts, 3)?;
            Decoded::Filter { key: p[0].to_string(), cond: condition(function, p[1], Some(p[2]))? }
        }
        QueryAttr => Decoded::QueryKey { key: need(&parts, 1)?[0].to_string() },
        QueryAttrUnderCondition => {
            let p = need(&parts, 3)?;
            Decoded::UnderCondition { key: p[0].into(), qkey: p[1].into(), qvalue: p[2].into() }
        }
        SelectBetween | SelectAmong => {
            let p = need(&parts, 2)?;
            let extreme = match (function, p[1].to_lowercase().as_str()) {
                (SelectBetween, "greater") | (SelectAmong, "largest") => Extreme::Max,
                (SelectBetween, "less") | (SelectAmong, "smallest") => Extreme::Min,
                (_, other) => return Err(format!("unknown selection direction '{other}'")),
            };
            Decoded::Select { key: p[0].to_string(), extreme }
        }
        VerifyStr => Decoded::Verify(condition(function, need(&parts, 1)?[0], None)?),
        VerifyNum | VerifyYear | VerifyDate => {
            let p = need(&parts, 2)?;
            Decoded::Verify(condition(function, p[0], Some(p[1]))?)
        }
        QueryAttrQualifier => {
            let p = need(&parts, 3)?;
            Decoded::AttrQualifier { key: p[0].into(), value: p[1].into(), qkey: p[2].into() }
        }
        QueryRelationQualifier => {
            let p = need(&parts, 2)?;
            Decoded::RelQualifier { pred: p[0].into(), qkey: p[1].into() }
        }
        _ => Decoded::None,
    })
}
