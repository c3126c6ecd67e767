//! The canonical universal formalism: theory strings are a tag byte followed
//! by an encoded machine, query answering runs the closure engine of that
//! machine, padding produces distinct observationally equal theories, and
//! the recursion construction yields fixpoints of effective theory maps.

use std::rc::Rc;

use crate::bits::Bits;
use crate::closure::{run_engine, ClosureOutcome, Engine};
use crate::kr::{Database, World};
use crate::machine::{
    self, encode_program, mk_theory, pad, quote, theory_program, Instr, Program, QUOTE_REG,
};
use crate::query::Query;
use crate::{Error, Result};

/// Is the bit string a theory of the canonical formalism? Total.
pub fn is_theory(b: &Bits) -> bool {
    theory_program(b).is_ok()
}

/// Answer a query under a theory: run the closure engine of the inner
/// machine on the pair for at most `fuel` iterations.
pub fn qa(
    t: &Bits,
    db: &Database,
    q: &Query,
    world: Rc<World>,
    fuel: u64,
) -> Result<ClosureOutcome> {
    let mut e = engine(t, db, q, world)?;
    run_engine(&mut e, fuel)
}

/// The engine behind `qa`, for callers that want the trace.
pub fn engine(t: &Bits, db: &Database, q: &Query, world: Rc<World>) -> Result<Engine> {
    let inner = theory_program(t)?;
    Ok(Engine::new(world, Rc::new(inner), db.clone(), Rc::new(q.clone())))
}

/// `count` pairwise distinct theories, none equal to `t`, all with the same
/// answers: the i-th wraps the inner machine padded by i trailing no-ops.
/// Longer prefixes extend shorter ones.
pub fn padding_set(t: &Bits, count: usize) -> Result<Vec<Bits>> {
    let inner = theory_program(t)?;
    Ok((1..=count).map(|i| mk_theory(&pad(&inner, i))).collect())
}

/// The theory that accepts nothing itself, so answers only what the closure
/// grants every theory.
pub fn omega0() -> Bits {
    mk_theory(&Program::new(vec![Instr::Reject]))
}

/// Template of the self-referential machine: with its own index in the
/// quote register, simulate that index's program on the index itself; if it
/// halts accepting, treat the output as a theory and defer to its engine on
/// the input pair.
pub fn sim_template() -> Program {
    Program::new(vec![
        Instr::Input(1),
        Instr::Run { code: QUOTE_REG, input: QUOTE_REG, out: 3, flag: 4 },
        Instr::JumpIf(4, 4),
        Instr::Loop,
        Instr::OracleQa { theory: 3, input: 1 },
        Instr::Accept,
    ])
}

/// The effective map kappa -> theory of the self-referential machine for
/// kappa, applied directly.
pub fn q_map(data: &Bits) -> Bits {
    quote(&sim_template(), data)
}

/// The same map as a program, for building self-applicable compositions.
pub fn q_map_program() -> Program {
    Program::new(vec![
        Instr::Input(0),
        Instr::LoadC(1, encode_program(&sim_template())),
        Instr::Quote { template: 1, data: 0, out: 2 },
        Instr::LoadC(3, Bits::new()),
        Instr::Concat(2, 3, 0),
        Instr::Accept,
    ])
}

/// A program computing p after the q map: kappa -> p(q(kappa)). Diverges
/// where p rejects, which keeps non-total maps honest at qa time.
fn compose_after_q(p: &Program) -> Program {
    Program::new(vec![
        Instr::Input(0),
        Instr::LoadC(1, encode_program(&sim_template())),
        Instr::Quote { template: 1, data: 0, out: 2 },
        Instr::LoadC(4, encode_program(p)),
        Instr::Run { code: 4, input: 2, out: 0, flag: 5 },
        Instr::JumpIf(5, 7),
        Instr::Loop,
        Instr::Accept,
    ])
}

/// A theory pi with the same answers as p(pi), for any program p computing
/// a total map between theories: pi = q(u) where u encodes the program for
/// p after q, so pi's machine simulates exactly p(pi)'s engine.
pub fn fixpoint(p: &Program) -> Bits {
    let u = encode_program(&compose_after_q(p));
    q_map(&u)
}

/// Run a theory-to-theory map program on a theory string.
pub fn apply_map(p: &Program, t: &Bits, world: Rc<World>, fuel: u64) -> Result<Bits> {
    match machine::run(p, t, world, fuel)? {
        machine::Outcome::AcceptedWith { output, .. } => Ok(output),
        machine::Outcome::Rejected { .. } => Err(Error::Invalid("map rejected its input".into())),
        machine::Outcome::Exhausted => Err(Error::Invalid("map ran out of fuel".into())),
    }
}

/// p-programs for the fixpoint experiments.
pub fn identity_map() -> Program {
    Program::new(vec![Instr::Input(0), Instr::Accept])
}

/// Appends one encoded no-op to the inner machine: theory -> theory of the
/// once-padded machine.
pub fn pad1_map() -> Program {
    let nop = {
        let mut p = Vec::new();
        machine::encode_instr(&Instr::Nop, &mut p);
        Bits::from_bytes(&p)
    };
    Program::new(vec![
        Instr::Input(2),
        Instr::LoadC(3, nop),
        Instr::Concat(2, 3, 0),
        Instr::Accept,
    ])
}

pub fn const_map(t: &Bits) -> Program {
    Program::new(vec![Instr::Input(1), Instr::LoadC(0, t.clone()), Instr::Accept])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::star_accepts;
    use crate::kr::{sig_pe, Constant, Fact, Positivity};
    use crate::query::parse_query;

    fn world() -> Rc<World> {
        World::new(sig_pe(), Positivity::All)
    }

    fn db(facts: &[(&str, &[u32], i8)]) -> Database {
        let mut d = Database::new(sig_pe(), Positivity::All);
        for (p, args, v) in facts {
            let f = Fact { pred: (*p).into(), args: args.iter().map(|&a| Constant(a)).collect() };
            d.set(f, *v).unwrap();
        }
        d
    }

    fn q(s: &str) -> Query {
        parse_query(s, &sig_pe()).unwrap()
    }

    #[test]
    fn theory_recognition() {
        assert!(is_theory(&omega0()));
        assert!(is_theory(&mk_theory(&identity_map())));
        assert!(!is_theory(&Bits::new()));
        // chopping a byte out of a trailing literal leaves a dangling LOADC
        let lit = Program::new(vec![Instr::LoadC(0, Bits::from_bytes(&[0xff, 0xff]))]);
        let mut truncated = mk_theory(&lit);
        truncated.truncate(truncated.len() - 8);
        assert!(!is_theory(&truncated));
        // and a ragged bit length is never a theory
        let mut ragged = mk_theory(&identity_map());
        ragged.truncate(ragged.len() - 3);
        assert!(!is_theory(&ragged));
        assert!(!is_theory(&Bits::from_str01("1010").unwrap()));
    }

    #[test]
    fn qa_matches_the_engine() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = {
            let input = machine::pair_input(&d, &phi).unwrap();
            machine::accept_exactly(&[input])
        };
        let t = mk_theory(&m);
        for query in ["P(c0)", "TRUE", "P(c1)", "EX x. P(x)"] {
            let via_theory = qa(&t, &d, &q(query), world(), 3000).unwrap();
            let direct = star_accepts(&m, &d, &q(query), world(), 3000).unwrap();
            assert_eq!(via_theory, direct, "{query}");
        }
    }

    #[test]
    fn empty_theory_answers_tautologies_only() {
        let d = db(&[("P", &[0], 1)]);
        assert!(qa(&omega0(), &d, &q("TRUE"), world(), 100).unwrap().accepted());
        assert!(!qa(&omega0(), &d, &q("P(c0)"), world(), 2000).unwrap().accepted());
    }

    #[test]
    fn padding_is_distinct_and_agreeing() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let input = machine::pair_input(&d, &phi).unwrap();
        let t = mk_theory(&machine::accept_exactly(&[input]));
        let pads = padding_set(&t, 4).unwrap();
        for (i, a) in pads.iter().enumerate() {
            assert!(is_theory(a));
            assert_ne!(a, &t);
            for b in &pads[i + 1..] {
                assert_ne!(a, b);
            }
        }
        // the shorter set is a prefix of the longer
        assert_eq!(&padding_set(&t, 2).unwrap()[..], &pads[..2]);
        // same verdicts at equal fuel
        for query in ["P(c0)", "P(c1)", "TRUE"] {
            let want = qa(&t, &d, &q(query), world(), 2000).unwrap().accepted();
            for p in &pads {
                assert_eq!(qa(p, &d, &q(query), world(), 2000).unwrap().accepted(), want);
            }
        }
    }

    #[test]
    fn fixpoint_of_identity_is_syntactic() {
        let p = identity_map();
        let pi = fixpoint(&p);
        assert!(is_theory(&pi));
        let p_pi = apply_map(&p, &pi, world(), 100).unwrap();
        assert_eq!(p_pi, pi);
    }

    #[test]
    fn fixpoint_of_padding_agrees() {
        let p = pad1_map();
        let pi = fixpoint(&p);
        let p_pi = apply_map(&p, &pi, world(), 1000).unwrap();
        assert!(is_theory(&pi));
        assert!(is_theory(&p_pi));
        assert_ne!(pi, p_pi);
        // the fixpoint defers to its own padded self, so simulation nests
        // and the per-iteration cost grows exponentially; keep the fuel low
        let d = db(&[("P", &[0], 1)]);
        for query in ["TRUE", "P(c0)", "EX x. P(x)"] {
            let a = qa(&pi, &d, &q(query), world(), 60).unwrap().accepted();
            let b = qa(&p_pi, &d, &q(query), world(), 60).unwrap().accepted();
            assert_eq!(a, b, "{query}");
        }
    }

    #[test]
    fn fixpoint_of_constant_map_mirrors_its_target() {
        let w0 = omega0();
        let p = const_map(&w0);
        let pi = fixpoint(&p);
        let d = db(&[("P", &[0], 1)]);
        for query in ["TRUE", "P(c0)", "EX x. TRUE"] {
            let a = qa(&pi, &d, &q(query), world(), 600).unwrap().accepted();
            let b = qa(&w0, &d, &q(query), world(), 600).unwrap().accepted();
            assert_eq!(a, b, "{query}");
        }
        // a target that answers a non-tautology: the fixpoint answers it too
        let phi = q("P(c0)");
        let input = machine::pair_input(&d, &phi).unwrap();
        let t = mk_theory(&machine::accept_exactly(&[input]));
        let pi = fixpoint(&const_map(&t));
        assert!(qa(&t, &d, &phi, world(), 3000).unwrap().accepted());
        assert!(qa(&pi, &d, &phi, world(), 30_000).unwrap().accepted());
        assert!(!qa(&pi, &d, &q("P(c1)"), world(), 3000).unwrap().accepted());
    }
}

