use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Attribute or qualifier value attached to a fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Literal {
    String { value: String },
    Quantity { value: f64, unit: String },
    Year { value: i32 },
    Date { value: NaiveDate },
}

impl Literal {
    pub fn string(value: impl Into<String>) -> Self {
        Literal::String { value: value.into() }
    }

    pub fn quantity(value: f64, unit: impl Into<String>) -> Self {
        Literal::Quantity { value, unit: unit.into() }
    }

    pub fn year(value: i32) -> Self {
        Literal::Year { value }
    }

    pub fn date(value: NaiveDate) -> Self {
        Literal::Date { value }
    }

    /// Rendering used for answers and for textual equality tests.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Numeric projection used by superlative/comparative selection.
    /// Strings have none.
    pub fn magnitude(&self) -> Option<f64> {
        match self {
            Literal::String { .. } => None,
            Literal::Quantity { value, .. } => Some(*value),
            Literal::Year { value } => Some(f64::from(*value)),
            Literal::Date { value } => Some(f64::from(value.num_days_from_ce())),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Literal::Quantity { value, .. } => value.is_finite(),
            _ => true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::String { value } => f.write_str(value),
            Literal::Quantity { value, unit } if unit.is_empty() => write!(f, "{value}"),
            Literal::Quantity { value, unit } => write!(f, "{value} {unit}"),
            Literal::Year { value } => write!(f, "{value}"),
            Literal::Date { value } => write!(f, "{}", value.format("%Y-%m-%d")),
        }
    }
}

/// Comparison operator carried in filter/verify arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CompareOp {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "=" => Some(CompareOp::Eq),
            "!=" => Some(CompareOp::Ne),
            "<" => Some(CompareOp::Lt),
            ">" => Some(CompareOp::Gt),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Gt => ord == Ordering::Greater,
        }
    }
}

/// `"200 centimetres"` -> `(200.0, "centimetres")`; a bare number has an empty unit.
pub fn parse_quantity(text: &str) -> Option<(f64, String)> {
    let text = text.trim();
    let (num, unit) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let value: f64 = num.replace(',', "").parse().ok()?;
    value.is_finite().then(|| (value, unit.to_string()))
}

pub fn parse_year(text: &str) -> Option<i32> {
    text.trim().parse().ok()
}

pub fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").ok()
}
