//! Positive-existential sentences: parsing, printing, a canonical
//! self-delimiting bit encoding, UCQ normalization, decidable entailment via
//! the homomorphism criterion, and gap-free length-lex enumeration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::bits::{push_unary, BitReader, Bits};
use crate::kr::{Constant, FiniteStructure, PredMode, Renaming, Signature};
use crate::{Error, Result};

pub const DEFAULT_UCQ_CAP: usize = 4096;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Term {
    Var(String),
    Const(Constant),
}

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum Query {
    True,
    Atom(String, Vec<Term>),
    And(Box<Query>, Box<Query>),
    Or(Box<Query>, Box<Query>),
    Exists(String, Box<Query>),
}

impl Query {
    pub fn and(a: Query, b: Query) -> Query {
        Query::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Query, b: Query) -> Query {
        Query::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, body: Query) -> Query {
        Query::Exists(v.to_string(), Box::new(body))
    }

    pub fn atom(pred: &str, terms: Vec<Term>) -> Query {
        Query::Atom(pred.to_string(), terms)
    }

    /// Free variables; a sentence has none.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn walk(q: &Query, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match q {
                Query::True => {}
                Query::Atom(_, ts) => {
                    for t in ts {
                        if let Term::Var(v) = t {
                            if !bound.iter().any(|b| b == v) {
                                out.insert(v.clone());
                            }
                        }
                    }
                }
                Query::And(a, b) | Query::Or(a, b) => {
                    walk(a, bound, out);
                    walk(b, bound, out);
                }
                Query::Exists(v, body) => {
                    bound.push(v.clone());
                    walk(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        let mut out = BTreeSet::new();
        fn walk(q: &Query, out: &mut BTreeSet<Constant>) {
            match q {
                Query::True => {}
                Query::Atom(_, ts) => {
                    for t in ts {
                        if let Term::Const(c) = t {
                            out.insert(*c);
                        }
                    }
                }
                Query::And(a, b) | Query::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Query::Exists(_, b) => walk(b, out),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Alpha-equivalence, via the canonical encoding.
    pub fn alpha_eq(&self, other: &Query, sig: &Signature) -> bool {
        encode_query(self, sig).ok() == encode_query(other, sig).ok()
    }
}

// ---------------------------------------------------------------------------
// text format

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // parenthesize everything non-atomic below a binary operator; the
        // format is for fixtures, not beauty
        fn go(q: &Query, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            match q {
                Query::True => write!(f, "TRUE"),
                Query::Atom(p, ts) => {
                    write!(f, "{p}(")?;
                    for (i, t) in ts.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        match t {
                            Term::Var(v) => write!(f, "{v}")?,
                            Term::Const(c) => write!(f, "{c}")?,
                        }
                    }
                    write!(f, ")")
                }
                Query::And(a, b) => {
                    paren(a, f)?;
                    write!(f, " & ")?;
                    paren(b, f)
                }
                Query::Or(a, b) => {
                    paren(a, f)?;
                    write!(f, " | ")?;
                    paren(b, f)
                }
                Query::Exists(v, b) => {
                    write!(f, "EX {v}. ")?;
                    go(b, f)
                }
            }
        }
        fn paren(q: &Query, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            match q {
                Query::True | Query::Atom(..) => go(q, f),
                _ => {
                    write!(f, "(")?;
                    go(q, f)?;
                    write!(f, ")")
                }
            }
        }
        go(self, f)
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    sig: &'a Signature,
    allow_cwa: bool,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if end == 0 {
            return None;
        }
        let id = &rest[..end];
        self.pos += end;
        Some(id.to_string())
    }

    fn parse_or(&mut self) -> Result<Query> {
        let mut q = self.parse_and()?;
        while self.eat("|") {
            let r = self.parse_and()?;
            q = Query::or(q, r);
        }
        Ok(q)
    }

    fn parse_and(&mut self) -> Result<Query> {
        let mut q = self.parse_prim()?;
        while self.eat("&") {
            let r = self.parse_prim()?;
            q = Query::and(q, r);
        }
        Ok(q)
    }

    fn parse_prim(&mut self) -> Result<Query> {
        self.skip_ws();
        if self.eat("(") {
            let q = self.parse_or()?;
            if !self.eat(")") {
                return Err(self.err("expected )"));
            }
            return Ok(q);
        }
        let save = self.pos;
        let id = self.ident().ok_or_else(|| self.err("expected query"))?;
        match id.as_str() {
            "TRUE" => Ok(Query::True),
            "EX" => {
                let v = self.ident().ok_or_else(|| self.err("expected variable after EX"))?;
                if Constant::parse(&v).is_some() {
                    return Err(self.err(format!("{v} names a constant, not a variable")));
                }
                if !self.eat(".") {
                    return Err(self.err("expected . after EX variable"));
                }
                let body = self.parse_or()?;
                Ok(Query::exists(&v, body))
            }
            _ => {
                // atom
                let pred = self.sig.lookup(&id).ok_or_else(|| {
                    self.pos = save;
                    self.err(format!("unknown predicate {id}"))
                })?;
                if pred.mode == PredMode::Cwa && !self.allow_cwa {
                    return Err(self.err(format!("CWA predicate {id} not allowed in queries")));
                }
                let (name, arity) = (pred.name.clone(), pred.arity);
                if !self.eat("(") {
                    return Err(self.err("expected ( after predicate"));
                }
                let mut terms = Vec::new();
                if !self.eat(")") {
                    loop {
                        let t = self.ident().ok_or_else(|| self.err("expected term"))?;
                        terms.push(match Constant::parse(&t) {
                            Some(c) => Term::Const(c),
                            None => Term::Var(t),
                        });
                        if self.eat(")") {
                            break;
                        }
                        if !self.eat(",") {
                            return Err(self.err("expected , or )"));
                        }
                    }
                }
                if terms.len() != arity {
                    return Err(Error::Arity { pred: name, expected: arity, got: terms.len() });
                }
                Ok(Query::Atom(name, terms))
            }
        }
    }
}

pub fn parse_query(text: &str, sig: &Signature) -> Result<Query> {
    parse_with(text, sig, false)
}

/// Like `parse_query`, but CWA predicates are allowed; rule heads in the
/// circumscription module live outside the query language proper.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Query> {
    parse_with(text, sig, true)
}

fn parse_with(text: &str, sig: &Signature, allow_cwa: bool) -> Result<Query> {
    let mut p = Parser { text, pos: 0, sig, allow_cwa };
    let q = p.parse_or()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input"));
    }
    Ok(q)
}

/// Parse and insist on a sentence.
pub fn parse_sentence(text: &str, sig: &Signature) -> Result<Query> {
    let q = parse_query(text, sig)?;
    if !q.is_sentence() {
        return Err(Error::Invalid(format!(
            "free variables {:?} in query",
            q.free_vars()
        )));
    }
    Ok(q)
}

// ---------------------------------------------------------------------------
// canonical bit encoding
//
// Prefix-free tags: 00 TRUE, 01 atom, 100 and, 101 or, 11 exists.
// Variables are de Bruijn indices (innermost binder = 0); indices use the
// ones-then-zero code so lexicographic order follows index order. Terms:
// 0+index for a variable, 1+index for a constant.

pub fn encode_query(q: &Query, sig: &Signature) -> Result<Bits> {
    let mut out = Bits::new();
    let mut stack = Vec::new();
    enc(q, sig, &mut stack, &mut out)?;
    Ok(out)
}

fn enc(q: &Query, sig: &Signature, stack: &mut Vec<String>, out: &mut Bits) -> Result<()> {
    match q {
        Query::True => {
            out.push(false);
            out.push(false);
        }
        Query::Atom(p, ts) => {
            out.push(false);
            out.push(true);
            let idx = sig
                .query_pred_index(p)
                .ok_or_else(|| Error::SignatureMismatch(format!("predicate {p} not in query signature")))?;
            push_unary(out, idx as u64);
            for t in ts {
                match t {
                    Term::Var(v) => {
                        let pos = stack
                            .iter()
                            .rev()
                            .position(|s| s == v)
                            .ok_or_else(|| Error::Invalid(format!("free variable {v}")))?;
                        out.push(false);
                        push_unary(out, pos as u64);
                    }
                    Term::Const(c) => {
                        out.push(true);
                        push_unary(out, c.0 as u64);
                    }
                }
            }
        }
        Query::And(a, b) | Query::Or(a, b) => {
            out.push(true);
            out.push(false);
            out.push(matches!(q, Query::Or(..)));
            enc(a, sig, stack, out)?;
            enc(b, sig, stack, out)?;
        }
        Query::Exists(v, body) => {
            out.push(true);
            out.push(true);
            stack.push(v.clone());
            enc(body, sig, stack, out)?;
            stack.pop();
        }
    }
    Ok(())
}

pub fn decode_query(bits: &Bits, sig: &Signature) -> Result<Query> {
    let mut r = BitReader::new(bits);
    let q = dec(&mut r, sig, 0)?;
    if r.remaining() != 0 {
        return Err(Error::DecodeError { offset: r.pos(), msg: "trailing bits".into() });
    }
    Ok(q)
}

fn dec(r: &mut BitReader, sig: &Signature, depth: usize) -> Result<Query> {
    let at = r.pos();
    let err = |offset, msg: &str| Error::DecodeError { offset, msg: msg.into() };
    let b0 = r.read_bit().ok_or_else(|| err(at, "truncated"))?;
    if !b0 {
        let b1 = r.read_bit().ok_or_else(|| err(at, "truncated"))?;
        if !b1 {
            return Ok(Query::True);
        }
        // atom
        let pidx = r.read_unary().ok_or_else(|| err(at, "truncated predicate index"))? as usize;
        let pred = sig
            .query_pred_at(pidx)
            .ok_or_else(|| err(at, "predicate index out of range"))?;
        let (name, arity) = (pred.name.clone(), pred.arity);
        let mut terms = Vec::with_capacity(arity);
        for _ in 0..arity {
            let is_const = r.read_bit().ok_or_else(|| err(r.pos(), "truncated term"))?;
            let idx = r.read_unary().ok_or_else(|| err(r.pos(), "truncated index"))? as usize;
            if is_const {
                terms.push(Term::Const(Constant(
                    u32::try_from(idx).map_err(|_| err(at, "constant index too large"))?,
                )));
            } else {
                if idx >= depth {
                    return Err(err(at, "variable index out of scope"));
                }
                terms.push(Term::Var(var_name(depth - 1 - idx)));
            }
        }
        return Ok(Query::Atom(name, terms));
    }
    let b1 = r.read_bit().ok_or_else(|| err(at, "truncated"))?;
    if b1 {
        let body = dec(r, sig, depth + 1)?;
        return Ok(Query::Exists(var_name(depth), Box::new(body)));
    }
    let b2 = r.read_bit().ok_or_else(|| err(at, "truncated"))?;
    let a = dec(r, sig, depth)?;
    let b = dec(r, sig, depth)?;
    Ok(if b2 { Query::or(a, b) } else { Query::and(a, b) })
}

fn var_name(level: usize) -> String {
    format!("x{level}")
}

// ---------------------------------------------------------------------------
// UCQ normal form

#[derive(Clone, Debug)]
pub struct Cq {
    pub vars: Vec<String>,
    pub atoms: Vec<(String, Vec<Term>)>,
}

#[derive(Clone, Debug)]
pub struct CqNormalForm {
    pub disjuncts: Vec<Cq>,
}

pub fn to_ucq(q: &Query) -> Result<CqNormalForm> {
    to_ucq_capped(q, DEFAULT_UCQ_CAP)
}

pub fn to_ucq_capped(q: &Query, cap: usize) -> Result<CqNormalForm> {
    let mut counter = 0usize;
    let disjuncts = norm(q, &HashMap::new(), &mut counter, cap)?;
    Ok(CqNormalForm { disjuncts })
}

fn norm(
    q: &Query,
    subst: &HashMap<String, String>,
    counter: &mut usize,
    cap: usize,
) -> Result<Vec<Cq>> {
    match q {
        Query::True => Ok(vec![Cq { vars: vec![], atoms: vec![] }]),
        Query::Atom(p, ts) => {
            let ts = ts
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Var(subst.get(v).cloned().unwrap_or_else(|| v.clone())),
                    c => c.clone(),
                })
                .collect();
            Ok(vec![Cq { vars: vec![], atoms: vec![(p.clone(), ts)] }])
        }
        Query::Or(a, b) => {
            let mut out = norm(a, subst, counter, cap)?;
            out.extend(norm(b, subst, counter, cap)?);
            if out.len() > cap {
                return Err(Error::BlowupCap { cap });
            }
            Ok(out)
        }
        Query::And(a, b) => {
            let left = norm(a, subst, counter, cap)?;
            let right = norm(b, subst, counter, cap)?;
            if left.len().saturating_mul(right.len()) > cap {
                return Err(Error::BlowupCap { cap });
            }
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut vars = l.vars.clone();
                    vars.extend(r.vars.iter().cloned());
                    let mut atoms = l.atoms.clone();
                    atoms.extend(r.atoms.iter().cloned());
                    out.push(Cq { vars, atoms });
                }
            }
            Ok(out)
        }
        Query::Exists(v, body) => {
            let fresh = format!("_v{}", *counter);
            *counter += 1;
            let mut subst = subst.clone();
            subst.insert(v.clone(), fresh.clone());
            let mut out = norm(body, &subst, counter, cap)?;
            for cq in &mut out {
                // only record the variable where it is actually used
                if cq.atoms.iter().any(|(_, ts)| ts.contains(&Term::Var(fresh.clone()))) {
                    cq.vars.push(fresh.clone());
                }
            }
            Ok(out)
        }
    }
}

pub fn is_tautology(q: &Query) -> Result<bool> {
    Ok(to_ucq(q)?.disjuncts.iter().any(|d| d.atoms.is_empty()))
}

// ---------------------------------------------------------------------------
// entailment

/// The canonical structure of a CQ: one element per constant and per used
/// variable, atoms as listed.
struct Canonical {
    consts: BTreeMap<Constant, usize>,
    elem_count: usize,
    atoms: BTreeSet<(String, Vec<usize>)>,
}

fn canonical(cq: &Cq) -> Canonical {
    let mut consts = BTreeMap::new();
    let mut vars: BTreeMap<String, usize> = BTreeMap::new();
    let mut n = 0usize;
    let mut atoms = BTreeSet::new();
    for (p, ts) in &cq.atoms {
        let mut tuple = Vec::with_capacity(ts.len());
        for t in ts {
            let id = match t {
                Term::Const(c) => *consts.entry(*c).or_insert_with(|| {
                    n += 1;
                    n - 1
                }),
                Term::Var(v) => *vars.entry(v.clone()).or_insert_with(|| {
                    n += 1;
                    n - 1
                }),
            };
            tuple.push(id);
        }
        atoms.insert((p.clone(), tuple));
    }
    Canonical { consts, elem_count: n, atoms }
}

/// Does some disjunct of `rhs` map homomorphically into the canonical
/// structure of `lhs_cq`, constants fixed?
fn cq_entails(lhs_cq: &Cq, rhs: &CqNormalForm) -> bool {
    let canon = canonical(lhs_cq);
    'outer: for d in &rhs.disjuncts {
        if d.atoms.is_empty() {
            return true;
        }
        // every rhs constant must be an element of the canonical structure
        for (_, ts) in &d.atoms {
            for t in ts {
                if let Term::Const(c) = t {
                    if !canon.consts.contains_key(c) {
                        continue 'outer;
                    }
                }
            }
        }
        if hom_search(d, &canon) {
            return true;
        }
    }
    false
}

fn hom_search(d: &Cq, canon: &Canonical) -> bool {
    // collect rhs variables in first-use order
    let mut vars: Vec<&str> = Vec::new();
    for (_, ts) in &d.atoms {
        for t in ts {
            if let Term::Var(v) = t {
                if !vars.contains(&v.as_str()) {
                    vars.push(v);
                }
            }
        }
    }
    let mut assign: HashMap<&str, usize> = HashMap::new();
    search(d, canon, &vars, 0, &mut assign)
}

fn search<'a>(
    d: &'a Cq,
    canon: &Canonical,
    vars: &[&'a str],
    i: usize,
    assign: &mut HashMap<&'a str, usize>,
) -> bool {
    if i == vars.len() {
        return d.atoms.iter().all(|(p, ts)| {
            let tuple: Vec<usize> = ts
                .iter()
                .map(|t| match t {
                    Term::Const(c) => canon.consts[c],
                    Term::Var(v) => assign[v.as_str()],
                })
                .collect();
            canon.atoms.contains(&(p.clone(), tuple))
        });
    }
    for e in 0..canon.elem_count {
        assign.insert(vars[i], e);
        // prune: atoms fully assigned so far must hold
        let ok = d.atoms.iter().all(|(p, ts)| {
            let mut tuple = Vec::with_capacity(ts.len());
            for t in ts {
                match t {
                    Term::Const(c) => tuple.push(canon.consts[c]),
                    Term::Var(v) => match assign.get(v.as_str()) {
                        Some(&x) => tuple.push(x),
                        None => return true,
                    },
                }
            }
            canon.atoms.contains(&(p.clone(), tuple))
        });
        if ok && search(d, canon, vars, i + 1, assign) {
            return true;
        }
    }
    assign.remove(vars[i]);
    false
}

/// p ⊨ q over all structures: every disjunct of p admits some disjunct of q
/// homomorphically. Exact for this fragment.
pub fn entails(p: &Query, q: &Query) -> Result<bool> {
    let pn = to_ucq(p)?;
    let qn = to_ucq(q)?;
    Ok(pn.disjuncts.iter().all(|d| cq_entails(d, &qn)))
}

pub fn conjoin(p: &Query, q: &Query) -> Query {
    Query::and(p.clone(), q.clone())
}

pub fn rename_query(q: &Query, t: &Renaming) -> Result<Query> {
    t.check_applicable(q.constants().into_iter())?;
    fn walk(q: &Query, t: &Renaming) -> Query {
        match q {
            Query::True => Query::True,
            Query::Atom(p, ts) => Query::Atom(
                p.clone(),
                ts.iter()
                    .map(|x| match x {
                        Term::Const(c) => Term::Const(t.apply(*c)),
                        v => v.clone(),
                    })
                    .collect(),
            ),
            Query::And(a, b) => Query::and(walk(a, t), walk(b, t)),
            Query::Or(a, b) => Query::or(walk(a, t), walk(b, t)),
            Query::Exists(v, b) => Query::Exists(v.clone(), Box::new(walk(b, t))),
        }
    }
    Ok(walk(q, t))
}

// ---------------------------------------------------------------------------
// evaluation over finite structures

/// Evaluate `q` in `s` under `env` (bindings for free variables).
pub fn satisfies(s: &FiniteStructure, q: &Query, env: &mut HashMap<String, usize>) -> Result<bool> {
    match q {
        Query::True => Ok(true),
        Query::Atom(p, ts) => {
            let mut tuple = Vec::with_capacity(ts.len());
            for t in ts {
                match t {
                    Term::Const(c) => tuple.push(s.element_of(*c).ok_or_else(|| {
                        Error::SignatureMismatch(format!("structure does not interpret {c}"))
                    })?),
                    Term::Var(v) => tuple.push(*env.get(v).ok_or_else(|| {
                        Error::Invalid(format!("unbound variable {v}"))
                    })?),
                }
            }
            Ok(s.holds(p, &tuple))
        }
        Query::And(a, b) => Ok(satisfies(s, a, env)? && satisfies(s, b, env)?),
        Query::Or(a, b) => Ok(satisfies(s, a, env)? || satisfies(s, b, env)?),
        Query::Exists(v, body) => {
            let saved = env.get(v).copied();
            for e in 0..s.domain_size {
                env.insert(v.clone(), e);
                if satisfies(s, body, env)? {
                    restore(env, v, saved);
                    return Ok(true);
                }
            }
            restore(env, v, saved);
            Ok(false)
        }
    }
}

fn restore(env: &mut HashMap<String, usize>, v: &str, saved: Option<usize>) {
    match saved {
        Some(x) => {
            env.insert(v.to_string(), x);
        }
        None => {
            env.remove(v);
        }
    }
}

pub fn satisfies_sentence(s: &FiniteStructure, q: &Query) -> Result<bool> {
    satisfies(s, q, &mut HashMap::new())
}

// ---------------------------------------------------------------------------
// enumeration

/// Length-lex enumeration of all sentences over a query signature, by
/// canonical encoding. Index 0 is TRUE. Grows its cache on demand.
pub struct QueryEnum {
    sig: Rc<Signature>,
    items: Vec<Rc<Query>>,
    encodings: Vec<Bits>,
    next_len: usize,
}

impl QueryEnum {
    pub fn new(sig: Rc<Signature>) -> QueryEnum {
        QueryEnum { sig, items: Vec::new(), encodings: Vec::new(), next_len: 2 }
    }

    pub fn sig(&self) -> &Rc<Signature> {
        &self.sig
    }

    pub fn get(&mut self, idx: usize) -> Rc<Query> {
        while self.items.len() <= idx {
            self.grow();
        }
        self.items[idx].clone()
    }

    /// Random access without growing; panics if the index has not been
    /// produced by a prior `get`.
    pub fn get_cached(&self, idx: usize) -> Rc<Query> {
        self.items[idx].clone()
    }

    pub fn encoding(&mut self, idx: usize) -> Bits {
        while self.items.len() <= idx {
            self.grow();
        }
        self.encodings[idx].clone()
    }

    /// All sentences with encoding length <= cap, in enumeration order.
    pub fn up_to_len(&mut self, cap: usize) -> Vec<Rc<Query>> {
        while self.next_len <= cap {
            self.grow();
        }
        self.items
            .iter()
            .zip(&self.encodings)
            .filter(|(_, e)| e.len() <= cap)
            .map(|(q, _)| q.clone())
            .collect()
    }

    fn grow(&mut self) {
        let l = self.next_len;
        self.next_len += 1;
        let mut gen = ExactGen { sig: &self.sig, memo: HashMap::new() };
        let mut batch = gen.queries(0, l);
        batch.sort_by(|a, b| a.0.cmp(&b.0));
        for (bits, q) in batch {
            self.items.push(Rc::new(q));
            self.encodings.push(bits);
        }
    }
}

struct ExactGen<'a> {
    sig: &'a Signature,
    memo: HashMap<(usize, usize), Rc<Vec<(Bits, Query)>>>,
}

impl<'a> ExactGen<'a> {
    fn queries(&mut self, depth: usize, len: usize) -> Vec<(Bits, Query)> {
        self.queries_rc(depth, len).as_ref().clone()
    }

    fn queries_rc(&mut self, depth: usize, len: usize) -> Rc<Vec<(Bits, Query)>> {
        if let Some(v) = self.memo.get(&(depth, len)) {
            return v.clone();
        }
        let mut out: Vec<(Bits, Query)> = Vec::new();
        if len == 2 {
            out.push((Bits::from_str01("00").unwrap(), Query::True));
        }
        // atoms
        let preds: Vec<(usize, String, usize)> = self
            .sig
            .query_preds()
            .enumerate()
            .map(|(i, p)| (i, p.name.clone(), p.arity))
            .collect();
        for (pidx, name, arity) in &preds {
            let fixed = 2 + pidx + 1;
            if len < fixed {
                continue;
            }
            let mut prefix = Bits::from_str01("01").unwrap();
            push_unary(&mut prefix, *pidx as u64);
            for combo in term_combos(depth, len - fixed, *arity) {
                let mut bits = prefix.clone();
                let mut terms = Vec::with_capacity(*arity);
                for t in combo {
                    match t {
                        EncTerm::Var(i) => {
                            bits.push(false);
                            push_unary(&mut bits, i as u64);
                            terms.push(Term::Var(var_name(depth - 1 - i)));
                        }
                        EncTerm::Const(n) => {
                            bits.push(true);
                            push_unary(&mut bits, n as u64);
                            terms.push(Term::Const(Constant(n as u32)));
                        }
                    }
                }
                out.push((bits, Query::Atom(name.clone(), terms)));
            }
        }
        // and / or
        if len >= 3 + 4 {
            for l1 in 2..=len - 3 - 2 {
                let l2 = len - 3 - l1;
                let left = self.queries_rc(depth, l1);
                let right = self.queries_rc(depth, l2);
                for (tag, mk) in [("100", false), ("101", true)] {
                    for (ab, aq) in left.iter() {
                        for (bb, bq) in right.iter() {
                            let mut bits = Bits::from_str01(tag).unwrap();
                            bits.extend(ab);
                            bits.extend(bb);
                            let q = if mk {
                                Query::or(aq.clone(), bq.clone())
                            } else {
                                Query::and(aq.clone(), bq.clone())
                            };
                            out.push((bits, q));
                        }
                    }
                }
            }
        }
        // exists
        if len >= 4 {
            let bodies = self.queries_rc(depth + 1, len - 2);
            for (bb, bq) in bodies.iter() {
                let mut bits = Bits::from_str01("11").unwrap();
                bits.extend(bb);
                out.push((bits, Query::Exists(var_name(depth), Box::new(bq.clone()))));
            }
        }
        let rc = Rc::new(out);
        self.memo.insert((depth, len), rc.clone());
        rc
    }
}

#[derive(Clone, Copy)]
enum EncTerm {
    Var(usize),
    Const(usize),
}

fn term_combos(depth: usize, budget: usize, arity: usize) -> Vec<Vec<EncTerm>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        depth: usize,
        budget: usize,
        remaining: usize,
        cur: &mut Vec<EncTerm>,
        out: &mut Vec<Vec<EncTerm>>,
    ) {
        if remaining == 0 {
            if budget == 0 {
                out.push(cur.clone());
            }
            return;
        }
        // each term costs 2 + index
        for cost in 2..=budget.saturating_sub((remaining - 1) * 2) {
            let idx = cost - 2;
            if idx < depth {
                cur.push(EncTerm::Var(idx));
                rec(depth, budget - cost, remaining - 1, cur, out);
                cur.pop();
            }
            cur.push(EncTerm::Const(idx));
            rec(depth, budget - cost, remaining - 1, cur, out);
            cur.pop();
        }
    }
    rec(depth, budget, arity, &mut cur, &mut out);
    out
}
