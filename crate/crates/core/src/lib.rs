//! Program transfer for complex question answering over knowledge bases.
//!
//! A question is parsed in two stages: a sketch parser emits the function
//! skeleton of a program, and an argument parser fills each function's
//! argument from a candidate pool that shrinks as earlier arguments are
//! chosen, following the KB ontology. Parsers are pretrained on a source
//! domain with gold programs and finetuned on a target domain from
//! question/answer pairs only.

pub mod argument;
pub mod executor;
pub mod harness;
pub mod kb;
pub mod nn;
pub mod program;
pub mod pruning;
pub mod sketch;
pub mod train;
