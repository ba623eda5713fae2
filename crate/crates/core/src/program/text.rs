use std::fmt;
use std::str::FromStr;

use super::{FunctionKind, Program, Step};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramParseError {
    #[error("step {step}: unknown function '{name}'")]
    UnknownFunction { step: usize, name: String },
    #[error("step {step}: malformed argument in '{text}'")]
    MalformedArgument { step: usize, text: String },
    #[error("step {step}: control token {name} is not allowed in program text")]
    ControlToken { step: usize, name: String },
}

/// Splits on unescaped `sep`, keeping escapes in the pieces.
fn split_unescaped(text: &str, sep: char) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            pieces.push(&text[start..i]);
            start = i + c.len_utf8();
        }
    }
    pieces.push(&text[start..]);
    pieces
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(next) = chars.next() {
                out.push(next);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if matches!(c, '\\' | ';' | '(' | ')') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn parse_step(step: usize, raw: &str) -> Result<Step, ProgramParseError> {
    let raw = raw.trim();
    let malformed = || ProgramParseError::MalformedArgument { step, text: raw.to_string() };
    let (name, argument) = match first_unescaped(raw, '(') {
        None => (raw, String::new()),
        Some(open) => {
            let body = raw[open + 1..].strip_suffix(')').ok_or_else(malformed)?;
            if body.chars().rev().take_while(|&c| c == '\\').count() % 2 == 1 {
                return Err(malformed());
            }
            if first_unescaped(body, '(').is_some() || first_unescaped(body, ')').is_some() {
                return Err(malformed());
            }
            (&raw[..open], unescape(body).trim().to_string())
        }
    };
    let function = FunctionKind::from_name(name)
        .ok_or_else(|| ProgramParseError::UnknownFunction { step, name: name.trim().to_string() })?;
    if function.is_control() {
        return Err(ProgramParseError::ControlToken { step, name: function.name().to_string() });
    }
    Ok(Step { function, argument })
}

fn first_unescaped(text: &str, target: char) -> Option<usize> {
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == target {
            return Some(i);
        }
    }
    None
}

impl Program {
    /// Parses `Func(arg);Func(arg);...`. Blank steps are ignored.
    pub fn parse(text: &str) -> Result<Program, ProgramParseError> {
        let steps = split_unescaped(text, ';')
            .into_iter()
            .filter(|piece| !piece.trim().is_empty())
            .enumerate()
            .map(|(i, piece)| parse_step(i, piece))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Program { steps })
    }
}

impl FromStr for Program {
    type Err = ProgramParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Program::parse(s)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}({})", step.function.name(), escape(&step.argument))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::FunctionKind::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_one_program() {
        let text = "Find(FC Barcelona);Relate(arena stadium);FilterConcept(sports facility)";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.steps[0], Step::new(Find, "FC Barcelona"));
        assert_eq!(p.steps[1], Step::new(Relate, "arena stadium"));
        assert_eq!(p.steps[2], Step::new(FilterConcept, "sports facility"));
        assert_eq!(p.to_string(), text);
    }

    #[test]
    fn unknown_function() {
        assert_eq!(
            Program::parse("Frob(x)"),
            Err(ProgramParseError::UnknownFunction { step: 0, name: "Frob".into() })
        );
    }

    #[test]
    fn malformed_arguments() {
        assert!(matches!(Program::parse("Find(x"), Err(ProgramParseError::MalformedArgument { .. })));
        assert!(matches!(Program::parse("Find(a(b))"), Err(ProgramParseError::MalformedArgument { .. })));
        assert!(matches!(Program::parse("END()"), Err(ProgramParseError::ControlToken { .. })));
    }

    #[test]
    fn bare_and_spaced_forms() {
        let p = Program::parse(" FindAll ; Count() ").unwrap();
        assert_eq!(p.steps, vec![Step::new(FindAll, ""), Step::new(Count, "")]);
    }

    #[test]
    fn escapes_survive() {
        let p = Program::new(vec![Step::new(Find, "Paris (France); city"), Step::new(QueryAttr, "a\\b")]);
        assert_eq!(Program::parse(&p.to_string()).unwrap(), p);
    }

    fn arb_step() -> impl Strategy<Value = Step> {
        let function = (0..27usize).prop_map(|i| FunctionKind::from_index(i).unwrap());
        (function, "[a-zA-Z0-9 ;()|\\\\,.-]{0,12}")
            .prop_map(|(function, arg)| Step::new(function, arg.trim().to_string()))
    }

    proptest! {
        #[test]
        fn text_round_trip(steps in prop::collection::vec(arb_step(), 0..8)) {
            let p = Program::new(steps);
            let text = p.to_string();
            prop_assert_eq!(Program::parse(&text).unwrap(), p.clone());
            prop_assert_eq!(Program::parse(&text).unwrap().to_string(), text);
        }
    }
}
