//! The security metamorphic relation language: parsing, static checks,
//! pretty-printing and direct interpretation.

pub mod ast;
pub mod check;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{RelationAst, RelationFile};
pub use check::{check_relation, extract_source_input_types, CheckError};
pub use eval::{evaluate_relation, EvalContext, EvalError, Verdict, ViolationContext};
pub use parser::{parse_file, ParseError};
pub use printer::{print_file, print_relation};
