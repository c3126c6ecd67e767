//! A second, decidable formalism next to the canonical one: monotone rule
//! theories with chase-based query answering, the formalism abstraction
//! (a recognizer for valid theory strings plus a semidecider for membership),
//! and the linear-time reduction wrapping any such formalism into the
//! canonical one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use crate::bits::Bits;
use crate::kr::{Constant, Database, FiniteStructure, World};
use crate::machine::{self, Asm, Instr, Program};
use crate::query::{satisfies_sentence, Query};
use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum DTerm {
    Var(String),
    Const(Constant),
}

impl fmt::Display for DTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DTerm::Var(v) => write!(f, "{v}"),
            DTerm::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct DAtom {
    pub pred: String,
    pub args: Vec<DTerm>,
}

impl fmt::Display for DAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// `head <- body`; an empty body makes a ground fact rule.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Rule {
    pub head: DAtom,
    pub body: Vec<DAtom>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " <- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        write!(f, ".")
    }
}

/// A finite set of monotone rules. Rule order and duplicates are preserved
/// as parsed, so distinct texts stay distinct theories; `canonical` gives
/// the sorted, deduplicated representative.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DatalogTheory {
    pub rules: Vec<Rule>,
}

impl fmt::Display for DatalogTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl DatalogTheory {
    pub fn new(rules: Vec<Rule>) -> Result<DatalogTheory> {
        let t = DatalogTheory { rules };
        t.validate()?;
        Ok(t)
    }

    /// Parse the one-rule-per-line text form, e.g.
    /// `Head(x,y) <- Body1(x), Body2(y,c0).` Blank lines and `#` comments
    /// are allowed.
    pub fn parse(text: &str) -> Result<DatalogTheory> {
        let mut rules = Vec::new();
        let mut pos = 0;
        for line in text.split('\n') {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                rules.push(parse_rule(trimmed, pos)?);
            }
            pos += line.len() + 1;
        }
        DatalogTheory::new(rules)
    }

    fn validate(&self) -> Result<()> {
        let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &self.rules {
            let mut body_vars = BTreeSet::new();
            for a in &r.body {
                for t in &a.args {
                    if let DTerm::Var(v) = t {
                        body_vars.insert(v.clone());
                    }
                }
            }
            for t in &r.head.args {
                if let DTerm::Var(v) = t {
                    if !body_vars.contains(v) {
                        return Err(Error::Invalid(format!(
                            "unsafe rule: head variable {v} not bound in body"
                        )));
                    }
                }
            }
            for a in std::iter::once(&r.head).chain(&r.body) {
                match arity.get(a.pred.as_str()) {
                    None => {
                        arity.insert(&a.pred, a.args.len());
                    }
                    Some(&n) if n != a.args.len() => {
                        return Err(Error::Arity {
                            pred: a.pred.clone(),
                            expected: n,
                            got: a.args.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Sorted and deduplicated representative of the same rule set.
    pub fn canonical(&self) -> DatalogTheory {
        let mut rules = self.rules.clone();
        rules.sort();
        rules.dedup();
        DatalogTheory { rules }
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            for a in std::iter::once(&r.head).chain(&r.body) {
                for t in &a.args {
                    if let DTerm::Const(c) = t {
                        out.insert(*c);
                    }
                }
            }
        }
        out
    }

    /// The theory string: UTF-8 bytes of the text form.
    pub fn bits(&self) -> Bits {
        Bits::from_bytes(self.to_string().as_bytes())
    }
}

fn parse_rule(line: &str, base: usize) -> Result<Rule> {
    let mut p = RuleParser { s: line.as_bytes(), at: 0, base };
    let head = p.atom()?;
    p.skip_ws();
    let body = if p.eat_str("<-") {
        let mut body = vec![p.atom()?];
        loop {
            p.skip_ws();
            if p.eat(b',') {
                body.push(p.atom()?);
            } else {
                break;
            }
        }
        body
    } else {
        Vec::new()
    };
    p.skip_ws();
    if !p.eat(b'.') {
        return Err(p.err("expected '.'"));
    }
    p.skip_ws();
    if p.at != p.s.len() {
        return Err(p.err("trailing input after rule"));
    }
    Ok(Rule { head, body })
}

struct RuleParser<'a> {
    s: &'a [u8],
    at: usize,
    base: usize,
}

impl RuleParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax { pos: self.base + self.at, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.s.get(self.at).is_some_and(|c| c.is_ascii_whitespace()) {
            self.at += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.at) == Some(&c) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, w: &str) -> bool {
        if self.s[self.at..].starts_with(w.as_bytes()) {
            self.at += w.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        let start = self.at;
        while self.s.get(self.at).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
            self.at += 1;
        }
        if self.at == start {
            return Err(self.err("expected identifier"));
        }
        Ok(String::from_utf8(self.s[start..self.at].to_vec()).unwrap())
    }

    fn atom(&mut self) -> Result<DAtom> {
        self.skip_ws();
        let pred = self.ident()?;
        if !pred.as_bytes()[0].is_ascii_uppercase() {
            return Err(self.err("predicate names start with an uppercase letter"));
        }
        if !self.eat(b'(') {
            return Err(self.err("expected '('"));
        }
        let mut args = Vec::new();
        self.skip_ws();
        if !self.eat(b')') {
            loop {
                self.skip_ws();
                let name = self.ident()?;
                args.push(term_of(&name).ok_or_else(|| self.err("bad term"))?);
                self.skip_ws();
                if self.eat(b')') {
                    break;
                }
                if !self.eat(b',') {
                    return Err(self.err("expected ',' or ')'"));
                }
            }
        }
        Ok(DAtom { pred, args })
    }
}

/// `cN` is the N-th constant; any other lowercase identifier is a variable.
fn term_of(name: &str) -> Option<DTerm> {
    if let Some(digits) = name.strip_prefix('c') {
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            return digits.parse().ok().map(|n| DTerm::Const(Constant(n)));
        }
    }
    if name.as_bytes()[0].is_ascii_lowercase() {
        Some(DTerm::Var(name.into()))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// chase

type GroundFact = (String, Vec<Constant>);

/// Does D together with the rules classically entail q? The chase saturates
/// the positive facts over the active domain; a derived fact contradicting a
/// value-0 fact of D makes the theory inconsistent, which entails everything.
/// Always terminates.
pub fn datalog_qa(t: &DatalogTheory, db: &Database, q: &Query) -> Result<bool> {
    let mut pos: BTreeSet<GroundFact> = BTreeSet::new();
    let mut neg: BTreeSet<GroundFact> = BTreeSet::new();
    let mut domain: BTreeSet<Constant> = BTreeSet::new();
    for (f, v) in db.observed() {
        domain.extend(f.args.iter().copied());
        let gf = (f.pred.clone(), f.args.clone());
        if v == 1 {
            pos.insert(gf);
        } else {
            neg.insert(gf);
        }
    }
    domain.extend(t.constants());
    domain.extend(q.constants());
    let mut domain: Vec<Constant> = domain.into_iter().collect();
    if domain.is_empty() {
        // structures have nonempty domains; one anonymous element carries no
        // facts but witnesses the purely tautological existentials
        domain.push(Constant(0));
    }

    loop {
        let mut grew = false;
        for r in &t.rules {
            let vars: Vec<&str> = {
                let mut vs = BTreeSet::new();
                for a in &r.body {
                    for term in &a.args {
                        if let DTerm::Var(v) = term {
                            vs.insert(v.as_str());
                        }
                    }
                }
                vs.into_iter().collect()
            };
            if domain.is_empty() && !vars.is_empty() {
                continue;
            }
            let mut counters = vec![0usize; vars.len()];
            'assign: loop {
                let env: BTreeMap<&str, Constant> =
                    vars.iter().zip(&counters).map(|(v, &i)| (*v, domain[i])).collect();
                if r.body.iter().all(|a| pos.contains(&ground(a, &env))) {
                    grew |= pos.insert(ground(&r.head, &env));
                }
                for i in 0..counters.len() {
                    counters[i] += 1;
                    if counters[i] < domain.len() {
                        continue 'assign;
                    }
                    counters[i] = 0;
                }
                break;
            }
        }
        if !grew {
            break;
        }
    }

    if pos.iter().any(|f| neg.contains(f)) {
        return Ok(true);
    }

    // evaluate q in the least model
    let constant_map: BTreeMap<Constant, usize> =
        domain.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut relations: BTreeMap<String, BTreeSet<Vec<usize>>> = BTreeMap::new();
    for (p, args) in &pos {
        let tuple = args.iter().map(|c| constant_map[c]).collect();
        relations.entry(p.clone()).or_default().insert(tuple);
    }
    let s = FiniteStructure { domain_size: domain.len(), relations, constant_map };
    satisfies_sentence(&s, q)
}

fn ground(a: &DAtom, env: &BTreeMap<&str, Constant>) -> GroundFact {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            DTerm::Var(v) => env[v.as_str()],
            DTerm::Const(c) => *c,
        })
        .collect();
    (a.pred.clone(), args)
}

// ---------------------------------------------------------------------------
// the formalism abstraction and the reduction into the canonical formalism

/// A knowledge representation formalism given operationally: a total program
/// deciding which strings are theories, and a program accepting exactly the
/// encoded memberships ⟨theory, database, query⟩.
#[derive(Clone)]
pub struct Krf {
    pub domain_recognizer: Program,
    pub qa_semidecider: Program,
}

/// A total map between theory domains, as a program.
#[derive(Clone)]
pub struct Reduction {
    pub map_program: Program,
}

impl Reduction {
    /// Apply the map to one theory string.
    pub fn apply(&self, input: &Bits, world: Rc<World>) -> Result<Bits> {
        let fuel = 64 + 16 * input.len() as u64;
        match machine::run(&self.map_program, input, world, fuel)? {
            machine::Outcome::AcceptedWith { output, .. } => Ok(output),
            _ => Err(Error::Invalid("reduction map did not accept".into())),
        }
    }
}

/// Self-delimiting prefix form: every bit of `a` is preceded by a 1 marker,
/// then a 0 closes the prefix. A machine can peel this off with SPLIT alone.
pub fn delimit_bits(a: &Bits) -> Bits {
    let mut out = Bits::new();
    for b in a.iter() {
        out.push(true);
        out.push(b);
    }
    out.push(false);
    out
}

/// Membership encoding ⟨theory, database, query⟩ fed to qa semideciders.
pub fn triple_input(theory: &Bits, db: &Database, q: &Query) -> Result<Bits> {
    let mut out = delimit_bits(theory);
    out.extend(&machine::pair_input(db, q)?);
    Ok(out)
}

/// The rule-based formalism as a Krf: theory strings are the UTF-8 texts
/// that parse as rule sets. The recognizer probes the oracle against the
/// given world's empty database, so the Krf is tied to that world.
pub fn datalog_krf(world: &World) -> Krf {
    // recognizer: ask the oracle about (empty database, TRUE); any valid
    // theory answers yes, any invalid theory string rejects
    let empty = Database::new(world.sig.clone(), world.mode);
    let tautology_probe = machine::pair_input(&empty, &Query::True).expect("constant probe");
    let domain_recognizer = Program::new(vec![
        Instr::Input(1),
        Instr::LoadC(2, tautology_probe),
        Instr::OracleDatalog { theory: 1, input: 2 },
        Instr::Accept,
    ]);

    // semidecider: peel the delimited theory prefix off the input, then ask
    // the oracle about the remaining (database, query) pair
    let mut a = Asm::new();
    a.emit(Instr::Input(0));
    a.emit(Instr::LoadC(1, Bits::new())); // theory accumulator
    a.emit(Instr::LoadC(3, Bits::from_str01("1").unwrap()));
    a.label("peel");
    a.emit(Instr::Split { src: 0, first: 2, rest: 0 });
    a.emit(Instr::Eq(2, 3, 4));
    a.jump_if(4, "bit");
    a.jump("ask");
    a.label("bit");
    a.emit(Instr::Split { src: 0, first: 5, rest: 0 });
    a.emit(Instr::Concat(1, 5, 1));
    a.jump("peel");
    a.label("ask");
    a.emit(Instr::OracleDatalog { theory: 1, input: 0 });
    a.emit(Instr::Accept);
    let qa_semidecider = a.finish().expect("static labels");

    Krf { domain_recognizer, qa_semidecider }
}

/// The reduction of Theorem-2 shape: maps a theory π of `g` to the canonical
/// theory whose inner machine feeds ⟨π, D, φ⟩ to g's semidecider. The map is
/// literal code concatenation around π, hence linear time.
pub fn reduce_to_theta(g: &Krf) -> Reduction {
    let template = wrapper_template(&g.qa_semidecider);
    let mut m = Asm::new();
    m.emit(Instr::Input(0));
    m.emit(Instr::LoadC(1, machine::encode_program(&template)));
    m.emit(Instr::Quote { template: 1, data: 0, out: 2 });
    m.emit(Instr::LoadC(3, Bits::new()));
    m.emit(Instr::Concat(2, 3, 0)); // output register is r0
    m.emit(Instr::Accept);
    Reduction { map_program: m.finish().expect("static labels") }
}

/// Body of the quoted wrapper: with π preloaded into the quote register,
/// re-delimit it in front of the (database, query) input and run the
/// semidecider, accepting iff it does.
fn wrapper_template(semidecider: &Program) -> Program {
    let mut a = Asm::new();
    a.emit(Instr::Input(1));
    a.emit(Instr::LoadC(2, Bits::new())); // delimited-theory accumulator
    a.emit(Instr::LoadC(3, Bits::from_str01("1").unwrap()));
    a.emit(Instr::LoadC(4, Bits::from_str01("0").unwrap()));
    a.emit(Instr::LoadC(7, Bits::new()));
    a.label("tag");
    a.emit(Instr::Eq(machine::QUOTE_REG, 7, 8));
    a.jump_if(8, "done");
    a.emit(Instr::Split { src: machine::QUOTE_REG, first: 9, rest: machine::QUOTE_REG });
    a.emit(Instr::Concat(2, 3, 2));
    a.emit(Instr::Concat(2, 9, 2));
    a.jump("tag");
    a.label("done");
    a.emit(Instr::Concat(2, 4, 2));
    a.emit(Instr::Concat(2, 1, 2));
    a.emit(Instr::LoadC(10, machine::encode_program(semidecider)));
    a.emit(Instr::Run { code: 10, input: 2, out: 0, flag: 11 });
    a.jump_if(11, "yes");
    a.emit(Instr::Loop);
    a.label("yes");
    a.emit(Instr::Accept);
    a.finish().expect("static labels")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{sig_pe, Fact, Positivity, Signature};
    use crate::machine::{pair_input, run, theory_program, Outcome};
    use crate::query::parse_query;

    fn sig_pq() -> Rc<Signature> {
        use crate::kr::{PredMode, Predicate};
        Rc::new(
            Signature::new(vec![
                Predicate { name: "P".into(), arity: 1, mode: PredMode::Owa },
                Predicate { name: "Q".into(), arity: 1, mode: PredMode::Owa },
                Predicate { name: "R".into(), arity: 1, mode: PredMode::Owa },
            ])
            .unwrap(),
        )
    }

    fn db(sig: &Rc<Signature>, facts: &[(&str, &[u32], i8)]) -> Database {
        let mut d = Database::new(sig.clone(), Positivity::All);
        for (p, args, v) in facts {
            let f = Fact { pred: (*p).into(), args: args.iter().map(|&a| Constant(a)).collect() };
            d.set(f, *v).unwrap();
        }
        d
    }

    #[test]
    fn parse_and_print_roundtrip() {
        let text = "Q(x) <- P(x).\nR(c0).\nP(x) <- Q(x), E(x,y).\n";
        let t = DatalogTheory::parse(text).unwrap();
        assert_eq!(t.to_string(), text);
        assert_eq!(DatalogTheory::parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn rejects_unsafe_and_inconsistent_arity() {
        assert!(DatalogTheory::parse("Q(x) <- P(y).").is_err());
        assert!(DatalogTheory::parse("Q(x) <- P(x).\nP(x,y) <- Q(x), Q(y).").is_err());
        assert!(DatalogTheory::parse("Q(x)").is_err());
        assert!(DatalogTheory::parse("q(x) <- P(x).").is_err());
    }

    #[test]
    fn canonical_sorts_and_dedups() {
        let t = DatalogTheory::parse("R(c0).\nQ(x) <- P(x).\nR(c0).").unwrap();
        assert_eq!(t.rules.len(), 3);
        let c = t.canonical();
        assert_eq!(c.rules.len(), 2);
        assert_eq!(c.to_string(), "Q(x) <- P(x).\nR(c0).\n");
    }

    #[test]
    fn qa_examples() {
        let sig = sig_pq();
        let t = DatalogTheory::parse("Q(x) <- P(x).").unwrap();
        let d = db(&sig, &[("P", &[0], 1)]);
        let q = |s: &str| parse_query(s, &sig).unwrap();
        assert!(datalog_qa(&t, &d, &q("EX x. Q(x)")).unwrap());
        assert!(datalog_qa(&t, &d, &q("Q(c0)")).unwrap());
        assert!(!datalog_qa(&t, &d, &q("Q(c1)")).unwrap());
        let empty = DatalogTheory::parse("").unwrap();
        assert!(datalog_qa(&empty, &d, &q("TRUE")).unwrap());
        assert!(!datalog_qa(&empty, &d, &q("Q(c0)")).unwrap());
        // derived Q(c0) contradicts the value-0 fact: everything follows
        let incons = db(&sig, &[("P", &[0], 1), ("Q", &[0], 0)]);
        assert!(datalog_qa(&t, &incons, &q("R(c2)")).unwrap());
    }

    #[test]
    fn qa_transitive_closure() {
        let sig = sig_pe();
        let t = DatalogTheory::parse("P(y) <- P(x), E(x,y).").unwrap();
        let d = db(&sig, &[("P", &[0], 1), ("E", &[0, 1], 1), ("E", &[1, 2], 1)]);
        let q = |s: &str| parse_query(s, &sig).unwrap();
        assert!(datalog_qa(&t, &d, &q("P(c2)")).unwrap());
        assert!(!datalog_qa(&t, &d, &q("P(c3)")).unwrap());
    }

    #[test]
    fn recognizer_decides_theory_strings() {
        let world = World::new(sig_pq(), Positivity::All);
        let krf = datalog_krf(&world);
        let good = DatalogTheory::parse("Q(x) <- P(x).").unwrap().bits();
        let bad = Bits::from_bytes(b"Q(x <- P(x).");
        let r = run(&krf.domain_recognizer, &good, world.clone(), 100).unwrap();
        assert!(r.accepted());
        let r = run(&krf.domain_recognizer, &bad, world.clone(), 100).unwrap();
        assert!(matches!(r, Outcome::Rejected { .. }));
        let r = run(&krf.domain_recognizer, &Bits::from_str01("101").unwrap(), world, 100).unwrap();
        assert!(matches!(r, Outcome::Rejected { .. }));
    }

    #[test]
    fn semidecider_matches_qa() {
        let sig = sig_pq();
        let world = World::new(sig.clone(), Positivity::All);
        let krf = datalog_krf(&world);
        let t = DatalogTheory::parse("Q(x) <- P(x).").unwrap();
        let d = db(&sig, &[("P", &[0], 1)]);
        let q = |s: &str| parse_query(s, &sig).unwrap();
        for (query, want) in [("EX x. Q(x)", true), ("Q(c1)", false)] {
            let input = triple_input(&t.bits(), &d, &q(query)).unwrap();
            let out = run(&krf.qa_semidecider, &input, world.clone(), 100_000).unwrap();
            assert_eq!(out.accepted(), want, "{query}");
        }
    }

    #[test]
    fn reduction_produces_equivalent_theory() {
        let sig = sig_pq();
        let world = World::new(sig.clone(), Positivity::All);
        let krf = datalog_krf(&world);
        let red = reduce_to_theta(&krf);
        let t = DatalogTheory::parse("Q(x) <- P(x).").unwrap();
        let theory = red.apply(&t.bits(), world.clone()).unwrap();
        let inner = theory_program(&theory).expect("valid theory");
        let d = db(&sig, &[("P", &[0], 1)]);
        let q = |s: &str| parse_query(s, &sig).unwrap();
        // the inner machine itself decides the relation
        for (query, want) in [("Q(c0)", true), ("EX x. Q(x)", true), ("Q(c1)", false)] {
            let input = pair_input(&d, &q(query)).unwrap();
            let out = run(&inner, &input, world.clone(), 200_000).unwrap();
            assert_eq!(out.accepted(), want, "{query}");
        }
        // and through the closure engine as the canonical formalism runs it
        let got = crate::closure::star_accepts(&inner, &d, &q("Q(c0)"), world.clone(), 100_000)
            .unwrap();
        assert!(got.accepted());
        let got = crate::closure::star_accepts(&inner, &d, &q("Q(c1)"), world, 30_000).unwrap();
        assert!(!got.accepted());
    }

    #[test]
    fn reduction_is_linear_in_input() {
        let world = World::new(sig_pq(), Positivity::All);
        let red = reduce_to_theta(&datalog_krf(&world));
        // both inputs sit in the same varint size class, so the wrapper
        // overhead is bit-for-bit identical
        let t1 = DatalogTheory::parse("Q(x) <- P(x).\nR(x) <- Q(x).").unwrap();
        let t2 = DatalogTheory::parse("Q(x) <- P(x).\nR(x) <- Q(x).\nR(x) <- P(x).").unwrap();
        let o1 = red.apply(&t1.bits(), world.clone()).unwrap();
        let o2 = red.apply(&t2.bits(), world.clone()).unwrap();
        let overhead1 = o1.len() as i64 - t1.bits().len() as i64;
        let overhead2 = o2.len() as i64 - t2.bits().len() as i64;
        assert_eq!(overhead1, overhead2);
        assert!(theory_program(&o1).is_ok());
    }
}
