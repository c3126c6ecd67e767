//! Compiling finite knowledge-base fragments into circumscription rule sets,
//! answering queries over bounded-domain minimal models, and checking the
//! belief-mapping conditions on extensional tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::kr::{
    satisfies_db, Constant, Database, FiniteStructure, PredMode, Renaming, Signature,
};
use crate::query::{parse_formula, rename_query, satisfies, satisfies_sentence, Query, Term};
use crate::{Error, Result};

/// One body literal of a compiled rule: a possibly negated atom over
/// variables and constants.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Literal {
    pub positive: bool,
    pub pred: String,
    pub args: Vec<Term>,
}

/// A universally quantified implication: body literals plus distinctness
/// guards entail the head formula. Compiled rules guard all variable pairs;
/// hand-written rules may guard fewer.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CircRule {
    pub universal_vars: Vec<String>,
    pub body: Vec<Literal>,
    pub distinct: Vec<(String, String)>,
    pub head: Query,
}

impl fmt::Display for CircRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.universal_vars.is_empty() {
            write!(f, "ALL {}. ", self.universal_vars.join(" "))?;
        }
        if self.body.is_empty() && self.distinct.is_empty() {
            write!(f, "TRUE")?;
        } else {
            let mut first = true;
            for l in &self.body {
                if !first {
                    write!(f, " & ")?;
                }
                first = false;
                if !l.positive {
                    write!(f, "!")?;
                }
                write!(f, "{}(", l.pred)?;
                for (i, t) in l.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match t {
                        Term::Var(v) => write!(f, "{v}")?,
                        Term::Const(c) => write!(f, "{c}")?,
                    }
                }
                write!(f, ")")?;
            }
            for (a, b) in &self.distinct {
                if !first {
                    write!(f, " & ")?;
                }
                first = false;
                write!(f, "{a}!={b}")?;
            }
        }
        write!(f, " -> {}", self.head)
    }
}

fn var_for(c: Constant) -> String {
    format!("v{c}")
}

/// One rule per pair: the database's observed facts as a variabilized body
/// with all constant variables pairwise distinct, and the variabilized
/// query as head.
pub fn compile_kb_fragment(pairs: &[(Database, Query)]) -> Vec<CircRule> {
    pairs
        .iter()
        .map(|(d, q)| {
            let consts: Vec<Constant> = {
                let mut s = d.all_constants();
                s.extend(q.constants());
                s.into_iter().collect()
            };
            let universal_vars: Vec<String> = consts.iter().map(|&c| var_for(c)).collect();
            let body = d
                .observed()
                .map(|(fact, v)| Literal {
                    positive: v == 1,
                    pred: fact.pred.clone(),
                    args: fact.args.iter().map(|&c| Term::Var(var_for(c))).collect(),
                })
                .collect();
            let mut distinct = Vec::new();
            for i in 0..universal_vars.len() {
                for j in i + 1..universal_vars.len() {
                    distinct.push((universal_vars[i].clone(), universal_vars[j].clone()));
                }
            }
            let head = variabilize(q);
            CircRule { universal_vars, body, distinct, head }
        })
        .collect()
}

fn variabilize(q: &Query) -> Query {
    match q {
        Query::True => Query::True,
        Query::Atom(p, ts) => Query::Atom(
            p.clone(),
            ts.iter()
                .map(|t| match t {
                    Term::Const(c) => Term::Var(var_for(*c)),
                    v => v.clone(),
                })
                .collect(),
        ),
        Query::And(a, b) => Query::and(variabilize(a), variabilize(b)),
        Query::Or(a, b) => Query::or(variabilize(a), variabilize(b)),
        Query::Exists(v, b) => Query::exists(v, variabilize(b)),
    }
}

/// Which predicates to minimize and how far to search.
#[derive(Clone, Debug)]
pub struct MinimizationConfig {
    pub minimized: BTreeSet<String>,
    pub domain_bound: usize,
    pub anonymous_elements: usize,
}

/// Does the rule hold in the structure under every assignment of its
/// universal variables that passes the distinctness guards?
pub fn rule_holds(s: &FiniteStructure, r: &CircRule) -> Result<bool> {
    let n = s.domain_size;
    let k = r.universal_vars.len();
    let mut assign = vec![0usize; k];
    loop {
        let env: HashMap<String, usize> =
            r.universal_vars.iter().cloned().zip(assign.iter().copied()).collect();
        let guarded = r.distinct.iter().all(|(a, b)| env[a] != env[b]);
        if guarded && body_holds(s, &r.body, &env)? {
            let mut env = env;
            if !satisfies(s, &r.head, &mut env)? {
                return Ok(false);
            }
        }
        if k == 0 || !bump(&mut assign, n) {
            return Ok(true);
        }
    }
}

fn body_holds(s: &FiniteStructure, body: &[Literal], env: &HashMap<String, usize>) -> Result<bool> {
    for l in body {
        let mut tuple = Vec::with_capacity(l.args.len());
        for t in &l.args {
            match t {
                Term::Var(v) => tuple.push(*env.get(v).ok_or_else(|| {
                    Error::Invalid(format!("rule body variable {v} not quantified"))
                })?),
                Term::Const(c) => tuple.push(s.element_of(*c).ok_or_else(|| {
                    Error::SignatureMismatch(format!("structure does not interpret {c}"))
                })?),
            }
        }
        if s.holds(&l.pred, &tuple) != l.positive {
            return Ok(false);
        }
    }
    Ok(true)
}

fn bump(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// All minimal models of D and the rules among unique-name structures with
/// domain size up to the bounds, constants fixed to the first elements.
pub fn min_models(
    d: &Database,
    rules: &[CircRule],
    cfg: &MinimizationConfig,
) -> Result<Vec<FiniteStructure>> {
    min_models_with(d, rules, cfg, &BTreeSet::new())
}

/// Same, with extra constants (typically the query's) forced into play.
pub fn min_models_with(
    d: &Database,
    rules: &[CircRule],
    cfg: &MinimizationConfig,
    extra: &BTreeSet<Constant>,
) -> Result<Vec<FiniteStructure>> {
    for p in &cfg.minimized {
        match d.sig.lookup(p) {
            Some(pr) if pr.mode == PredMode::Cwa => {}
            _ => {
                return Err(Error::Invalid(format!(
                    "minimized predicate {p} is not a CWA predicate of the signature"
                )))
            }
        }
    }
    let mut consts: BTreeSet<Constant> = d.all_constants();
    consts.extend(extra.iter().copied());
    for r in rules {
        consts.extend(r.head.constants());
        for l in &r.body {
            for t in &l.args {
                if let Term::Const(c) = t {
                    consts.insert(*c);
                }
            }
        }
    }
    if consts.len() > cfg.domain_bound {
        return Err(Error::UnaInfeasible { bound: cfg.domain_bound, constants: consts.len() });
    }
    let constant_map: BTreeMap<Constant, usize> =
        consts.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let lo = consts.len().max(1);
    let hi = cfg.domain_bound.min(consts.len() + cfg.anonymous_elements).max(lo);
    let mut out = Vec::new();
    for n in lo..=hi {
        let models = enumerate_models(d, rules, &constant_map, n)?;
        for a in &models {
            let minimal = !models.iter().any(|b| strictly_below(b, a, &cfg.minimized));
            if minimal {
                out.push(a.clone());
            }
        }
    }
    Ok(out)
}

/// b below a: equal outside the minimized predicates, subset inside, and
/// strictly smaller somewhere.
fn strictly_below(b: &FiniteStructure, a: &FiniteStructure, minimized: &BTreeSet<String>) -> bool {
    if b.domain_size != a.domain_size || b.constant_map != a.constant_map {
        return false;
    }
    let empty = BTreeSet::new();
    let rel = |s: &FiniteStructure, p: &str| -> BTreeSet<Vec<usize>> {
        s.relations.get(p).unwrap_or(&empty).clone()
    };
    let mut names: BTreeSet<&String> = b.relations.keys().collect();
    names.extend(a.relations.keys());
    let mut strict = false;
    for p in names {
        let (rb, ra) = (rel(b, p), rel(a, p));
        if minimized.contains(p.as_str()) {
            if !rb.is_subset(&ra) {
                return false;
            }
            strict |= rb.len() < ra.len();
        } else if rb != ra {
            return false;
        }
    }
    strict
}

fn enumerate_models(
    d: &Database,
    rules: &[CircRule],
    constant_map: &BTreeMap<Constant, usize>,
    n: usize,
) -> Result<Vec<FiniteStructure>> {
    let preds: Vec<(&str, usize)> =
        d.sig.preds().iter().map(|p| (p.name.as_str(), p.arity)).collect();
    let mut out = Vec::new();
    let mut rels: BTreeMap<String, BTreeSet<Vec<usize>>> = BTreeMap::new();
    fill(d, rules, constant_map, n, &preds, 0, &mut rels, &mut out)?;
    Ok(out)
}

fn fill(
    d: &Database,
    rules: &[CircRule],
    constant_map: &BTreeMap<Constant, usize>,
    n: usize,
    preds: &[(&str, usize)],
    i: usize,
    rels: &mut BTreeMap<String, BTreeSet<Vec<usize>>>,
    out: &mut Vec<FiniteStructure>,
) -> Result<()> {
    if i == preds.len() {
        let s = FiniteStructure {
            domain_size: n,
            relations: rels.clone(),
            constant_map: constant_map.clone(),
        };
        if satisfies_db(&s, d)? {
            for r in rules {
                if !rule_holds(&s, r)? {
                    return Ok(());
                }
            }
            out.push(s);
        }
        return Ok(());
    }
    let (name, arity) = preds[i];
    let tuples = all_tuples(n, arity);
    for mask in 0..(1u64 << tuples.len()) {
        let rel: BTreeSet<Vec<usize>> = tuples
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, t)| t.clone())
            .collect();
        rels.insert(name.to_string(), rel);
        fill(d, rules, constant_map, n, preds, i + 1, rels, out)?;
    }
    rels.remove(name);
    Ok(())
}

fn all_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .iter()
            .flat_map(|t| {
                (0..n).map(move |e| {
                    let mut t2 = t.clone();
                    t2.push(e);
                    t2
                })
            })
            .collect();
    }
    out
}

/// True iff every minimal model satisfies q; vacuously true without models.
pub fn circ_qa(
    d: &Database,
    rules: &[CircRule],
    cfg: &MinimizationConfig,
    q: &Query,
) -> Result<bool> {
    let models = min_models_with(d, rules, cfg, &q.constants())?;
    for m in &models {
        if !satisfies_sentence(m, q)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// rule text form

/// `ALL va vb. P(va) & !P(vb) & va!=vb -> <formula>`, one rule per line.
pub fn parse_rules(text: &str, sig: &Signature) -> Result<Vec<CircRule>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_rule(l, sig))
        .collect()
}

pub fn parse_rule(line: &str, sig: &Signature) -> Result<CircRule> {
    let syntax = |msg: &str| Error::Syntax { pos: 0, msg: msg.into() };
    let (quant, rest) = match line.strip_prefix("ALL ") {
        Some(r) => {
            let dot = r.find('.').ok_or_else(|| syntax("expected '.' after ALL variables"))?;
            (&r[..dot], r[dot + 1..].trim())
        }
        None => ("", line.trim()),
    };
    let universal_vars: Vec<String> = quant.split_whitespace().map(String::from).collect();
    let arrow = rest.find("->").ok_or_else(|| syntax("expected '->'"))?;
    let (body_text, head_text) = (rest[..arrow].trim(), rest[arrow + 2..].trim());
    let head = parse_formula(head_text, sig)?;
    let mut body = Vec::new();
    let mut distinct = Vec::new();
    if body_text != "TRUE" {
        for part in body_text.split('&').map(str::trim) {
            if let Some((a, b)) = part.split_once("!=") {
                distinct.push((a.trim().to_string(), b.trim().to_string()));
                continue;
            }
            let (neg, atom_text) = match part.strip_prefix('!') {
                Some(r) => (true, r.trim()),
                None => (false, part),
            };
            let open = atom_text.find('(').ok_or_else(|| syntax("expected '(' in literal"))?;
            let close =
                atom_text.rfind(')').ok_or_else(|| syntax("expected ')' in literal"))?;
            let pred = atom_text[..open].trim().to_string();
            let pr = sig
                .lookup(&pred)
                .ok_or_else(|| Error::SignatureMismatch(format!("unknown predicate {pred}")))?;
            let args: Vec<Term> = atom_text[open + 1..close]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| match Constant::parse(s) {
                    Some(c) => Term::Const(c),
                    None => Term::Var(s.to_string()),
                })
                .collect();
            if args.len() != pr.arity {
                return Err(Error::Arity { pred, expected: pr.arity, got: args.len() });
            }
            body.push(Literal { positive: !neg, pred, args });
        }
    }
    for v in head.free_vars() {
        if !universal_vars.contains(&v) {
            return Err(syntax(&format!("head variable {v} not quantified")));
        }
    }
    Ok(CircRule { universal_vars, body, distinct, head })
}

// ---------------------------------------------------------------------------
// belief mappings

/// An extensional fragment of a belief mapping: finitely many databases,
/// each with its believed structures.
#[derive(Clone, Debug, Default)]
pub struct BeliefTable {
    pub entries: Vec<(Database, Vec<FiniteStructure>)>,
}

impl BeliefTable {
    fn get(&self, d: &Database) -> Option<&Vec<FiniteStructure>> {
        self.entries.iter().find(|(e, _)| e == d).map(|(_, s)| s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportEntry {
    pub check: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status == "ok")
    }

    fn ok(&mut self, check: impl Into<String>) {
        self.entries.push(ReportEntry { check: check.into(), status: "ok", witness: None });
    }

    fn violation(&mut self, check: impl Into<String>, witness: String) {
        self.entries.push(ReportEntry {
            check: check.into(),
            status: "violation",
            witness: Some(witness),
        });
    }
}

/// Does every structure in the entry satisfy phi? None when phi does not
/// even apply (a constant outside the structures).
fn believes(structures: &[FiniteStructure], phi: &Query) -> Option<bool> {
    let mut all = true;
    for s in structures {
        match satisfies_sentence(s, phi) {
            Ok(v) => all &= v,
            Err(_) => return None,
        }
    }
    Some(all)
}

/// Check the three belief-mapping conditions on the supplied samples:
/// every structure satisfies its database; believed answers are invariant
/// under applicable renamings between table entries; and believed answers
/// persist when moving to extending table entries.
pub fn verify_belief_mapping(
    bt: &BeliefTable,
    renamings: &[Renaming],
    sentences: &[Query],
) -> Report {
    let mut report = Report::default();
    for (d, structures) in &bt.entries {
        let key = d.canonical_key();
        let mut bad = None;
        for s in structures {
            match satisfies_db(s, d) {
                Ok(true) => {}
                Ok(false) => bad = Some(format!("structure violates {key}")),
                Err(e) => bad = Some(format!("structure cannot be checked against {key}: {e}")),
            }
        }
        match bad {
            None => report.ok(format!("models({key})")),
            Some(w) => report.violation(format!("models({key})"), w),
        }
    }
    for (d, structures) in &bt.entries {
        for tau in renamings {
            let rd = match d.rename(tau) {
                Ok(rd) => rd,
                Err(_) => continue,
            };
            let Some(rstructs) = bt.get(&rd) else { continue };
            for phi in sentences {
                let Ok(rphi) = rename_query(phi, tau) else { continue };
                let (Some(a), Some(b)) = (believes(structures, phi), believes(rstructs, &rphi))
                else {
                    continue;
                };
                let check = format!("renaming({}, {phi})", d.canonical_key());
                if a == b {
                    report.ok(check);
                } else {
                    report.violation(
                        check,
                        format!("answers differ after renaming to {}", rd.canonical_key()),
                    );
                }
            }
        }
    }
    for (d, structures) in &bt.entries {
        for (d2, structures2) in &bt.entries {
            if d2 == d || !d2.extends(d) {
                continue;
            }
            for phi in sentences {
                let (Some(a), Some(b)) = (believes(structures, phi), believes(structures2, phi))
                else {
                    continue;
                };
                let check = format!("extension({} => {}, {phi})", d.canonical_key(), d2.canonical_key());
                if a && !b {
                    report.violation(check, "answer lost under extension".into());
                } else {
                    report.ok(check);
                }
            }
        }
    }
    report
}

/// The minimal-model belief mapping over a database list, tabulated.
pub fn belief_table_from_min_models(
    dbs: &[Database],
    rules: &[CircRule],
    cfg: &MinimizationConfig,
) -> Result<BeliefTable> {
    let mut entries = Vec::new();
    for d in dbs {
        entries.push((d.clone(), min_models(d, rules, cfg)?));
    }
    Ok(BeliefTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{Fact, Positivity, Predicate};
    use std::rc::Rc;

    fn sig_pq() -> Rc<Signature> {
        Rc::new(
            Signature::new(vec![
                Predicate { name: "P".into(), arity: 1, mode: PredMode::Cwa },
                Predicate { name: "Q".into(), arity: 1, mode: PredMode::Owa },
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

    fn cfg(bound: usize) -> MinimizationConfig {
        MinimizationConfig {
            minimized: ["P".to_string()].into(),
            domain_bound: bound,
            anonymous_elements: bound,
        }
    }

    #[test]
    fn compile_examples() {
        let sig = crate::kr::sig_pe();
        let d = db(&sig, &[("P", &[0], 1), ("P", &[1], 0)]);
        let q = crate::query::parse_query("P(c0)", &sig).unwrap();
        let rules = compile_kb_fragment(&[(d, q)]);
        assert_eq!(
            rules[0].to_string(),
            "ALL vc0 vc1. P(vc0) & !P(vc1) & vc0!=vc1 -> P(vc0)"
        );
        let empty = db(&sig, &[]);
        let rules = compile_kb_fragment(&[(empty, Query::True)]);
        assert_eq!(rules[0].to_string(), "TRUE -> TRUE");
    }

    #[test]
    fn rule_text_roundtrip() {
        let sig = sig_pq();
        for text in [
            "ALL va vb. Q(va) & !Q(vb) & va!=vb -> P(va)",
            "ALL v. Q(v) -> P(v)",
            "TRUE -> EX x. Q(x)",
            "Q(c0) -> P(c1)",
        ] {
            let r = parse_rule(text, &sig).unwrap();
            assert_eq!(r.to_string(), text);
        }
        assert!(parse_rule("ALL v. Q(v) -> P(w)", &sig).is_err());
        assert!(parse_rule("Q(v) > P(v)", &sig).is_err());
    }

    #[test]
    fn minimal_models_example() {
        let sig = sig_pq();
        let d = db(&sig, &[("Q", &[0], 1)]);
        let rule = parse_rule("ALL v. Q(v) -> P(v)", &sig).unwrap();
        let models = min_models(&d, &[rule.clone()], &cfg(1)).unwrap();
        assert_eq!(models.len(), 1);
        let m = &models[0];
        assert!(m.holds("P", &[0]));
        assert!(m.holds("Q", &[0]));
        // without rules the least P is empty
        let models = min_models(&d, &[], &cfg(1)).unwrap();
        assert!(models.iter().all(|m| m.relations.get("P").is_none_or(|r| r.is_empty())));
        // two constants cannot fit in a domain of one
        let d2 = db(&sig, &[("Q", &[0], 1), ("Q", &[1], 1)]);
        assert!(matches!(
            min_models(&d2, &[rule], &cfg(1)),
            Err(Error::UnaInfeasible { .. })
        ));
    }

    #[test]
    fn circ_qa_examples() {
        let sig = sig_pq();
        let d = db(&sig, &[("Q", &[0], 1)]);
        let rule = parse_rule("ALL v. Q(v) -> P(v)", &sig).unwrap();
        let c = cfg(2);
        let q = |s: &str| parse_formula(s, &sig).unwrap();
        assert!(circ_qa(&d, &[rule.clone()], &c, &q("P(c0)")).unwrap());
        assert!(!circ_qa(&d, &[rule.clone()], &c, &q("P(c1)")).unwrap());
        assert!(circ_qa(&d, &[rule], &c, &q("TRUE")).unwrap());
    }

    #[test]
    fn belief_mapping_checks() {
        let sig = sig_pq();
        let dbs = [
            db(&sig, &[]),
            db(&sig, &[("Q", &[0], 1)]),
            db(&sig, &[("Q", &[1], 1)]),
            db(&sig, &[("Q", &[0], 1), ("Q", &[1], 1)]),
        ];
        let rule = parse_rule("ALL v. Q(v) -> P(v)", &sig).unwrap();
        let bt = belief_table_from_min_models(&dbs, &[rule], &cfg(2)).unwrap();
        let swap = Renaming::new([(Constant(0), Constant(1)), (Constant(1), Constant(0))]).unwrap();
        let sentences = [
            parse_formula("EX x. Q(x)", &sig).unwrap(),
            parse_formula("Q(c0)", &sig).unwrap(),
            parse_formula("P(c0)", &sig).unwrap(),
        ];
        let report = verify_belief_mapping(&bt, &[swap], &sentences);
        assert!(report.passed(), "{:?}", report.entries);
        // plant a violation: a structure that ignores its database
        let mut broken = bt.clone();
        broken.entries[1].1[0].relations.get_mut("Q").unwrap().clear();
        let report = verify_belief_mapping(&broken, &[], &sentences);
        assert!(!report.passed());
    }
}
