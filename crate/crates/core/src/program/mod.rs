//! The program language: the function vocabulary, argument categories,
//! and the linearized postfix representation of sketches and programs.
//!
//! Each function pops its functional-input arity from a value stack and
//! pushes one output; a well-formed sketch leaves exactly one value.

mod text;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use text::ProgramParseError;

/// Separator between the textual inputs of functions that take several.
pub const ARG_SEPARATOR: char = '|';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionKind {
    FindAll,
    Find,
    FilterConcept,
    FilterStr,
    FilterNum,
    FilterYear,
    FilterDate,
    QFilterStr,
    QFilterNum,
    QFilterYear,
    QFilterDate,
    Relate,
    And,
    Or,
    QueryName,
    Count,
    QueryAttr,
    QueryAttrUnderCondition,
    QueryRelation,
    SelectBetween,
    SelectAmong,
    VerifyStr,
    VerifyNum,
    VerifyYear,
    VerifyDate,
    QueryAttrQualifier,
    QueryRelationQualifier,
    #[serde(rename = "START")]
    Start,
    #[serde(rename = "END")]
    End,
}

/// What kind of KB element (if any) a function's argument names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgumentCategory {
    Entity,
    Concept,
    Relation,
    Empty,
    LiteralText,
}

/// Kind of value a function pushes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputKind {
    Entities,
    EntitiesWithFacts,
    Literals,
    Text,
    Number,
    Boolean,
}

impl FunctionKind {
    pub const COUNT: usize = 29;

    pub const ALL: [FunctionKind; Self::COUNT] = {
        use FunctionKind::*;
        [
            FindAll, Find, FilterConcept, FilterStr, FilterNum, FilterYear, FilterDate, QFilterStr,
            QFilterNum, QFilterYear, QFilterDate, Relate, And, Or, QueryName, Count, QueryAttr,
            QueryAttrUnderCondition, QueryRelation, SelectBetween, SelectAmong, VerifyStr, VerifyNum,
            VerifyYear, VerifyDate, QueryAttrQualifier, QueryRelationQualifier, Start, End,
        ]
    };

    /// Dense index, also the row of the function embedding matrix.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_control(self) -> bool {
        matches!(self, FunctionKind::Start | FunctionKind::End)
    }

    pub fn name(self) -> &'static str {
        use FunctionKind::*;
        match self {
            FindAll => "FindAll",
            Find => "Find",
            FilterConcept => "FilterConcept",
            FilterStr => "FilterStr",
            FilterNum => "FilterNum",
            FilterYear => "FilterYear",
            FilterDate => "FilterDate",
            QFilterStr => "QFilterStr",
            QFilterNum => "QFilterNum",
            QFilterYear => "QFilterYear",
            QFilterDate => "QFilterDate",
            Relate => "Relate",
            And => "And",
            Or => "Or",
            QueryName => "QueryName",
            Count => "Count",
            QueryAttr => "QueryAttr",
            QueryAttrUnderCondition => "QueryAttrUnderCondition",
            QueryRelation => "QueryRelation",
            SelectBetween => "SelectBetween",
            SelectAmong => "SelectAmong",
            VerifyStr => "VerifyStr",
            VerifyNum => "VerifyNum",
            VerifyYear => "VerifyYear",
            VerifyDate => "VerifyDate",
            QueryAttrQualifier => "QueryAttrQualifier",
            QueryRelationQualifier => "QueryRelationQualifier",
            Start => "START",
            End => "END",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name().eq_ignore_ascii_case(name.trim()))
    }

    /// Number of values popped from the stack.
    pub fn arity(self) -> usize {
        use FunctionKind::*;
        match self {
            FindAll | Find | Start | End => 0,
            And | Or | QueryRelation | SelectBetween | QueryRelationQualifier => 2,
            _ => 1,
        }
    }

    pub fn category(self) -> ArgumentCategory {
        use FunctionKind::*;
        match self {
            Find => ArgumentCategory::Entity,
            FilterConcept => ArgumentCategory::Concept,
            Relate | QueryRelation => ArgumentCategory::Relation,
            FindAll | And | Or | QueryName | Count | Start | End => ArgumentCategory::Empty,
            _ => ArgumentCategory::LiteralText,
        }
    }

    pub fn output(self) -> Option<OutputKind> {
        use FunctionKind::*;
        Some(match self {
            FindAll | Find | FilterConcept | And | Or => OutputKind::Entities,
            FilterStr | FilterNum | FilterYear | FilterDate | QFilterStr | QFilterNum | QFilterYear
            | QFilterDate | Relate => OutputKind::EntitiesWithFacts,
            QueryAttr | QueryAttrUnderCondition | QueryAttrQualifier | QueryRelationQualifier => {
                OutputKind::Literals
            }
            QueryName | QueryRelation | SelectBetween | SelectAmong => OutputKind::Text,
            Count => OutputKind::Number,
            VerifyStr | VerifyNum | VerifyYear | VerifyDate => OutputKind::Boolean,
            Start | End => return None,
        })
    }

    pub fn takes_kb_argument(self) -> bool {
        matches!(
            self.category(),
            ArgumentCategory::Entity | ArgumentCategory::Concept | ArgumentCategory::Relation
        )
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("position {position}: {function} needs {needed} input(s), stack holds {available}")]
    Underflow { position: usize, function: FunctionKind, needed: usize, available: usize },
    #[error("{remaining} values remain on the stack at END, expected exactly one")]
    Leftover { remaining: usize },
    #[error("no value on the stack at END")]
    NoResult,
    #[error("position {0}: START may not appear inside a sketch")]
    StrayStart(usize),
    #[error("position {0}: token after END")]
    AfterEnd(usize),
    #[error("sketch is not terminated by END")]
    MissingEnd,
}

/// Simulates the value stack over `tokens`, which must end with END.
pub fn validate(tokens: &[FunctionKind]) -> Result<(), Violation> {
    let mut depth = 0usize;
    for (position, &function) in tokens.iter().enumerate() {
        match function {
            FunctionKind::Start => return Err(Violation::StrayStart(position)),
            FunctionKind::End => {
                if position + 1 != tokens.len() {
                    return Err(Violation::AfterEnd(position + 1));
                }
                return match depth {
                    1 => Ok(()),
                    0 => Err(Violation::NoResult),
                    remaining => Err(Violation::Leftover { remaining }),
                };
            }
            _ => {
                let needed = function.arity();
                if depth < needed {
                    return Err(Violation::Underflow { position, function, needed, available: depth });
                }
                depth = depth - needed + 1;
            }
        }
    }
    Err(Violation::MissingEnd)
}

/// Stack depth after a prefix of non-control tokens, or `None` on underflow.
pub fn prefix_depth(tokens: &[FunctionKind]) -> Option<usize> {
    tokens.iter().try_fold(0usize, |depth, f| {
        if f.is_control() || depth < f.arity() {
            None
        } else {
            Some(depth - f.arity() + 1)
        }
    })
}

/// Whether `next` may extend a valid prefix with stack depth `depth`.
pub fn can_extend(depth: usize, next: FunctionKind) -> bool {
    match next {
        FunctionKind::Start => false,
        FunctionKind::End => depth == 1,
        f => depth >= f.arity(),
    }
}

/// A function sequence without arguments. END is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sketch {
    functions: Vec<FunctionKind>,
}

impl Sketch {
    pub fn new(functions: Vec<FunctionKind>) -> Self {
        debug_assert!(functions.iter().all(|f| !f.is_control()));
        Sketch { functions }
    }

    pub fn functions(&self) -> &[FunctionKind] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Function tokens followed by END.
    pub fn tokens(&self) -> Vec<FunctionKind> {
        let mut t = self.functions.clone();
        t.push(FunctionKind::End);
        t
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate(&self.tokens())
    }
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.functions.iter().map(|f| f.name()).collect();
        write!(f, "{}", names.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub function: FunctionKind,
    #[serde(default)]
    pub argument: String,
}

impl Step {
    pub fn new(function: FunctionKind, argument: impl Into<String>) -> Self {
        Step { function, argument: argument.into() }
    }
}

/// A sketch with one textual argument per function (empty for the
/// Empty category).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    pub steps: Vec<Step>,
}

impl Program {
    pub fn new(steps: Vec<Step>) -> Self {
        Program { steps }
    }

    pub fn sketch(&self) -> Sketch {
        Sketch::new(self.steps.iter().map(|s| s.function).collect())
    }

    pub fn validate(&self) -> Result<(), Violation> {
        if let Some(i) = self.steps.iter().position(|s| s.function.is_control()) {
            return Err(if self.steps[i].function == FunctionKind::Start {
                Violation::StrayStart(i)
            } else {
                Violation::AfterEnd(i + 1)
            });
        }
        self.sketch().validate()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Splits a multi-part textual argument on [`ARG_SEPARATOR`].
pub fn split_parts(argument: &str) -> Vec<&str> {
    argument.split(ARG_SEPARATOR).map(str::trim).collect()
}

pub fn join_parts(parts: &[&str]) -> String {
    parts.join(&ARG_SEPARATOR.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Candidate readings of a Relate argument: the whole text as a relation
/// label going forward, then the text with a trailing direction word (or
/// `|direction` part) stripped.
pub fn relation_readings(argument: &str) -> Vec<(&str, Direction)> {
    let arg = argument.trim();
    let mut out = vec![(arg, Direction::Forward)];
    for dir in [Direction::Forward, Direction::Backward] {
        for sep in [' ', ARG_SEPARATOR] {
            if let Some(head) = arg.strip_suffix(dir.name()) {
                if let Some(label) = head.strip_suffix(sep) {
                    out.push((label.trim(), dir));
                }
            }
        }
    }
    out
}
