//! A workbench for abstract knowledge bases: databases with open- and
//! closed-world predicates, positive-existential queries, a dovetailing
//! closure engine over a bytecode machine substrate, a canonical universal
//! formalism with padding and recursion fixpoints, reductions and
//! back-and-forth isomorphism construction, and circumscription compilation.
//! Everything is checkable at desk scale against brute-force oracles.

pub mod bits;
pub mod circ;
pub mod closure;
pub mod formalisms;
pub mod isolab;
pub mod kr;
pub mod machine;
pub mod oracle;
pub mod query;
pub mod theta;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("arity mismatch for {pred}: expected {expected}, got {got}")]
    Arity {
        pred: String,
        expected: usize,
        got: usize,
    },
    #[error("renaming not applicable: constant {0} collides")]
    NotApplicable(String),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("normal form exceeds {cap} disjuncts")]
    BlowupCap { cap: usize },
    #[error("decode error at bit offset {offset}: {msg}")]
    DecodeError { offset: usize, msg: String },
    #[error("malformed machine table: {0}")]
    MalformedTable(String),
    #[error("not a valid theory")]
    InvalidTheory,
    #[error("domain bound {bound} below constant count {constants}")]
    UnaInfeasible { bound: usize, constants: usize },
    #[error("padding provider exhausted after {0} elements")]
    PaddingExhausted(usize),
    #[error("chain revisited an element: {0}")]
    ChainInvariantViolation(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
