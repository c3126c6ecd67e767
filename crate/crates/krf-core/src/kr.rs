//! Ground vocabulary: constants, signatures, facts, databases, renamings,
//! finite structures, and the satisfaction relation between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Element of the fixed countable constant pool; printed `c<n>`.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
pub struct Constant(pub u32);

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl Constant {
    pub fn parse(s: &str) -> Option<Constant> {
        let rest = s.strip_prefix('c')?;
        if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
            return None;
        }
        rest.parse().ok().map(Constant)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum PredMode {
    Owa,
    Cwa,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub mode: PredMode,
}

/// Predicate vocabulary in declaration order. The declaration order is part
/// of the identity: canonical query encodings index into it.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Signature {
    preds: Vec<Predicate>,
}

impl Signature {
    pub fn new(preds: Vec<Predicate>) -> Result<Signature> {
        let mut seen = BTreeSet::new();
        for p in &preds {
            if !seen.insert(p.name.clone()) {
                return Err(Error::Invalid(format!("duplicate predicate {}", p.name)));
            }
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Invalid(format!("bad predicate name {:?}", p.name)));
            }
        }
        Ok(Signature { preds })
    }

    pub fn preds(&self) -> &[Predicate] {
        &self.preds
    }

    pub fn lookup(&self, name: &str) -> Option<&Predicate> {
        self.preds.iter().find(|p| p.name == name)
    }

    /// OWA predicates in declaration order; this is the query vocabulary.
    pub fn query_preds(&self) -> impl Iterator<Item = &Predicate> {
        self.preds.iter().filter(|p| p.mode == PredMode::Owa)
    }

    pub fn query_pred_index(&self, name: &str) -> Option<usize> {
        self.query_preds().position(|p| p.name == name)
    }

    pub fn query_pred_at(&self, idx: usize) -> Option<&Predicate> {
        self.query_preds().nth(idx)
    }

    pub fn has_cwa(&self) -> bool {
        self.preds.iter().any(|p| p.mode == PredMode::Cwa)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Fact {
    pub pred: String,
    pub args: Vec<Constant>,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Positivity {
    All,
    Pos,
}

/// A finitely observed database. OWA facts carry explicit values 1 (`true`)
/// or 0 (`false`); unlisted OWA facts are unobserved. CWA facts default to
/// -1 unless listed; -1 does not constrain models.
#[derive(Clone, Debug)]
pub struct Database {
    pub sig: Rc<Signature>,
    pub mode: Positivity,
    owa: BTreeMap<Fact, bool>,
    cwa: BTreeMap<Fact, i8>,
}

impl Database {
    pub fn new(sig: Rc<Signature>, mode: Positivity) -> Database {
        Database {
            sig,
            mode,
            owa: BTreeMap::new(),
            cwa: BTreeMap::new(),
        }
    }

    fn check_fact(&self, fact: &Fact) -> Result<PredMode> {
        let p = self
            .sig
            .lookup(&fact.pred)
            .ok_or_else(|| Error::SignatureMismatch(format!("unknown predicate {}", fact.pred)))?;
        if p.arity != fact.args.len() {
            return Err(Error::Arity {
                pred: fact.pred.clone(),
                expected: p.arity,
                got: fact.args.len(),
            });
        }
        Ok(p.mode)
    }

    pub fn set(&mut self, fact: Fact, value: i8) -> Result<()> {
        let mode = self.check_fact(&fact)?;
        match (mode, value) {
            (PredMode::Owa, 1) => {
                self.owa.insert(fact, true);
            }
            (PredMode::Owa, 0) => {
                if self.mode == Positivity::Pos {
                    return Err(Error::Invalid(format!(
                        "value 0 for {fact} not allowed in positive mode"
                    )));
                }
                self.owa.insert(fact, false);
            }
            (PredMode::Cwa, 1 | 0) => {
                if value == 0 && self.mode == Positivity::Pos {
                    return Err(Error::Invalid(format!(
                        "value 0 for {fact} not allowed in positive mode"
                    )));
                }
                self.cwa.insert(fact, value);
            }
            (PredMode::Cwa, -1) => {
                // explicit form of the default; kept out of the map
                self.cwa.remove(&fact);
            }
            _ => {
                return Err(Error::Invalid(format!("bad value {value} for {fact}")));
            }
        }
        Ok(())
    }

    pub fn owa_facts(&self) -> impl Iterator<Item = (&Fact, bool)> {
        self.owa.iter().map(|(f, v)| (f, *v))
    }

    pub fn cwa_facts(&self) -> impl Iterator<Item = (&Fact, i8)> {
        self.cwa.iter().map(|(f, v)| (f, *v))
    }

    /// Observed facts are those with value 0 or 1.
    pub fn observed(&self) -> impl Iterator<Item = (&Fact, i8)> {
        self.owa
            .iter()
            .map(|(f, v)| (f, i8::from(*v)))
            .chain(self.cwa.iter().filter(|(_, v)| **v >= 0).map(|(f, v)| (f, *v)))
    }

    pub fn owa_count(&self) -> usize {
        self.owa.len()
    }

    /// Constants appearing in at least one observed fact.
    pub fn dc(&self) -> BTreeSet<Constant> {
        self.observed().flat_map(|(f, _)| f.args.iter().copied()).collect()
    }

    /// Does `self` extend `other`: CWA assignments identical, observed OWA
    /// facts of `other` present with equal values.
    pub fn extends(&self, other: &Database) -> bool {
        if self.sig != other.sig || self.mode != other.mode {
            return false;
        }
        if self.cwa != other.cwa {
            return false;
        }
        other
            .owa
            .iter()
            .all(|(f, v)| self.owa.get(f) == Some(v))
    }

    /// All databases `self` extends, by ascending bitmask over the observed
    /// OWA facts in canonical order. The CWA part is held fixed.
    pub fn restrictions(&self) -> impl Iterator<Item = Database> + '_ {
        let facts: Vec<(Fact, bool)> = self.owa.iter().map(|(f, v)| (f.clone(), *v)).collect();
        let total: u64 = 1u64 << facts.len();
        (0..total).map(move |mask| self.restrict_mask(&facts, mask))
    }

    fn restrict_mask(&self, facts: &[(Fact, bool)], mask: u64) -> Database {
        let mut d = Database {
            sig: self.sig.clone(),
            mode: self.mode,
            owa: BTreeMap::new(),
            cwa: self.cwa.clone(),
        };
        for (j, (f, v)) in facts.iter().enumerate() {
            if mask >> j & 1 == 1 {
                d.owa.insert(f.clone(), *v);
            }
        }
        d
    }

    /// The `mask`-th restriction in the canonical order, without
    /// materializing the whole sequence.
    pub fn restriction(&self, mask: u64) -> Database {
        let facts: Vec<(Fact, bool)> = self.owa.iter().map(|(f, v)| (f.clone(), *v)).collect();
        assert!(mask < 1u64 << facts.len());
        self.restrict_mask(&facts, mask)
    }

    pub fn rename(&self, t: &Renaming) -> Result<Database> {
        t.check_applicable(self.all_constants().into_iter())?;
        let mut d = Database::new(self.sig.clone(), self.mode);
        for (f, v) in &self.owa {
            d.owa.insert(t.apply_fact(f), *v);
        }
        for (f, v) in &self.cwa {
            d.cwa.insert(t.apply_fact(f), *v);
        }
        d
            .owa
            .len()
            .eq(&self.owa.len())
            .then_some(())
            .ok_or_else(|| Error::NotApplicable("renaming merged facts".into()))?;
        Ok(d)
    }

    /// Every constant mentioned anywhere, including explicit CWA entries.
    pub fn all_constants(&self) -> BTreeSet<Constant> {
        self.owa
            .keys()
            .chain(self.cwa.keys())
            .flat_map(|f| f.args.iter().copied())
            .collect()
    }

    /// Canonical text form; also the machine-level encoding of the database.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        s.push_str("sig: ");
        for (i, p) in self.sig.preds().iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&format!(
                "{}/{} {}",
                p.name,
                p.arity,
                match p.mode {
                    PredMode::Owa => "owa",
                    PredMode::Cwa => "cwa",
                }
            ));
        }
        s.push_str("; mode: ");
        s.push_str(match self.mode {
            Positivity::All => "all",
            Positivity::Pos => "pos",
        });
        s.push('\n');
        for (f, v) in &self.owa {
            s.push_str(if *v { "+" } else { "-" });
            s.push_str(&f.to_string());
            s.push('\n');
        }
        for (f, v) in &self.cwa {
            s.push_str(match v {
                1 => "+",
                0 => "-",
                _ => "~",
            });
            s.push_str(&f.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Database> {
        let mut pos = 0usize;
        let mut lines = Vec::new();
        for line in text.lines() {
            lines.push((pos, line));
            pos += line.len() + 1;
        }
        let mut it = lines.into_iter().filter(|(_, l)| !l.trim().is_empty());
        let (hpos, header) = it
            .next()
            .ok_or(Error::Syntax { pos: 0, msg: "empty database file".into() })?;
        let header = header.trim();
        let rest = header.strip_prefix("sig:").ok_or(Error::Syntax {
            pos: hpos,
            msg: "expected `sig:` header".into(),
        })?;
        let (sig_part, mode_part) = rest.split_once(';').ok_or(Error::Syntax {
            pos: hpos,
            msg: "expected `; mode:` in header".into(),
        })?;
        let mut preds = Vec::new();
        for decl in sig_part.split(',') {
            let decl = decl.trim();
            if decl.is_empty() {
                continue;
            }
            let mut parts = decl.split_whitespace();
            let name_arity = parts.next().unwrap_or("");
            let mode = match parts.next() {
                Some("owa") => PredMode::Owa,
                Some("cwa") => PredMode::Cwa,
                _ => {
                    return Err(Error::Syntax {
                        pos: hpos,
                        msg: format!("bad predicate declaration {decl:?}"),
                    })
                }
            };
            let (name, arity) = name_arity.split_once('/').ok_or(Error::Syntax {
                pos: hpos,
                msg: format!("bad predicate declaration {decl:?}"),
            })?;
            let arity: usize = arity.parse().map_err(|_| Error::Syntax {
                pos: hpos,
                msg: format!("bad arity in {decl:?}"),
            })?;
            preds.push(Predicate { name: name.to_string(), arity, mode });
        }
        let mode = match mode_part.trim().strip_prefix("mode:").map(str::trim) {
            Some("all") => Positivity::All,
            Some("pos") => Positivity::Pos,
            _ => {
                return Err(Error::Syntax {
                    pos: hpos,
                    msg: "expected `mode: all` or `mode: pos`".into(),
                })
            }
        };
        let sig = Rc::new(Signature::new(preds)?);
        let mut db = Database::new(sig, mode);
        for (lpos, line) in it {
            let line = line.trim();
            let (value, rest) = match line.chars().next() {
                Some('+') => (1, &line[1..]),
                Some('-') => (0, &line[1..]),
                Some('~') => (-1, &line[1..]),
                _ => {
                    return Err(Error::Syntax {
                        pos: lpos,
                        msg: "fact line must start with +, - or ~".into(),
                    })
                }
            };
            let fact = parse_fact(rest).map_err(|msg| Error::Syntax { pos: lpos, msg })?;
            if value == -1 {
                // only CWA predicates may carry an explicit -1
                if db.check_fact(&fact)? != PredMode::Cwa {
                    return Err(Error::Syntax {
                        pos: lpos,
                        msg: format!("~ entry for OWA predicate {}", fact.pred),
                    });
                }
            }
            db.set(fact, value).map_err(|e| Error::Syntax { pos: lpos, msg: e.to_string() })?;
        }
        Ok(db)
    }

    /// Stable key for map storage; two databases get the same key iff they
    /// are semantically equal.
    pub fn canonical_key(&self) -> String {
        self.canonical_text()
    }
}

impl PartialEq for Database {
    fn eq(&self, other: &Self) -> bool {
        self.sig == other.sig
            && self.mode == other.mode
            && self.owa == other.owa
            && self.cwa == other.cwa
    }
}

impl Eq for Database {}

fn parse_fact(s: &str) -> std::result::Result<Fact, String> {
    let s = s.trim();
    let open = s.find('(').ok_or("missing ( in fact")?;
    if !s.ends_with(')') {
        return Err("missing ) in fact".into());
    }
    let pred = s[..open].trim().to_string();
    let inner = &s[open + 1..s.len() - 1];
    let mut args = Vec::new();
    if !inner.trim().is_empty() {
        for a in inner.split(',') {
            let a = a.trim();
            args.push(Constant::parse(a).ok_or_else(|| format!("bad constant {a:?}"))?);
        }
    }
    Ok(Fact { pred, args })
}

/// Finite injective constant map, standing for a total injective renaming
/// of the constant pool that is the identity off its domain.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Renaming {
    map: BTreeMap<Constant, Constant>,
}

impl Renaming {
    pub fn new(pairs: impl IntoIterator<Item = (Constant, Constant)>) -> Result<Renaming> {
        let mut map = BTreeMap::new();
        let mut ran = BTreeSet::new();
        for (a, b) in pairs {
            if let Some(prev) = map.insert(a, b) {
                if prev != b {
                    return Err(Error::Invalid(format!("conflicting images for {a}")));
                }
                continue;
            }
            if !ran.insert(b) {
                return Err(Error::Invalid(format!("renaming not injective at {b}")));
            }
        }
        Ok(Renaming { map })
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Constant, Constant)> + '_ {
        self.map.iter().map(|(a, b)| (*a, *b))
    }

    pub fn apply(&self, c: Constant) -> Constant {
        *self.map.get(&c).unwrap_or(&c)
    }

    pub fn apply_fact(&self, f: &Fact) -> Fact {
        Fact {
            pred: f.pred.clone(),
            args: f.args.iter().map(|c| self.apply(*c)).collect(),
        }
    }

    pub fn inverse(&self) -> Renaming {
        Renaming {
            map: self.map.iter().map(|(a, b)| (*b, *a)).collect(),
        }
    }

    /// A constant of the object outside the domain must not occur in the
    /// range, otherwise no total injective extension treats the object the
    /// way the finite map promises.
    pub fn check_applicable(&self, constants: impl Iterator<Item = Constant>) -> Result<()> {
        let ran: BTreeSet<Constant> = self.map.values().copied().collect();
        for c in constants {
            if !self.map.contains_key(&c) && ran.contains(&c) {
                return Err(Error::NotApplicable(c.to_string()));
            }
        }
        Ok(())
    }
}

/// Finite structure over a database signature. Elements are 0..domain_size.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct FiniteStructure {
    pub domain_size: usize,
    pub relations: BTreeMap<String, BTreeSet<Vec<usize>>>,
    pub constant_map: BTreeMap<Constant, usize>,
}

impl FiniteStructure {
    pub fn holds(&self, pred: &str, tuple: &[usize]) -> bool {
        self.relations.get(pred).is_some_and(|r| r.contains(tuple))
    }

    pub fn una(&self) -> bool {
        let vals: BTreeSet<usize> = self.constant_map.values().copied().collect();
        vals.len() == self.constant_map.len()
    }

    pub fn element_of(&self, c: Constant) -> Option<usize> {
        self.constant_map.get(&c).copied()
    }
}

/// True iff every value-1 fact holds and every value-0 fact fails; -1 facts
/// are unconstrained.
pub fn satisfies_db(s: &FiniteStructure, d: &Database) -> Result<bool> {
    for (f, v) in d.observed() {
        let mut tuple = Vec::with_capacity(f.args.len());
        for c in &f.args {
            tuple.push(s.element_of(*c).ok_or_else(|| {
                Error::SignatureMismatch(format!("structure does not interpret {c}"))
            })?);
        }
        if d.sig.lookup(&f.pred).is_none() {
            return Err(Error::SignatureMismatch(format!("unknown predicate {}", f.pred)));
        }
        let holds = s.holds(&f.pred, &tuple);
        if holds != (v == 1) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The fixed context a closure engine works in: signature and positivity.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct World {
    pub sig: Rc<Signature>,
    pub mode: Positivity,
}

impl World {
    pub fn new(sig: Rc<Signature>, mode: Positivity) -> Rc<World> {
        Rc::new(World { sig, mode })
    }
}

/// The small open-world signature {P/1, E/2} used by the examples and the
/// desk-scale test universes.
pub fn sig_pe() -> Rc<Signature> {
    Rc::new(
        Signature::new(vec![
            Predicate { name: "P".into(), arity: 1, mode: PredMode::Owa },
            Predicate { name: "E".into(), arity: 2, mode: PredMode::Owa },
        ])
        .unwrap(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::sig_pe;

    fn fact(pred: &str, args: &[u32]) -> Fact {
        Fact { pred: pred.into(), args: args.iter().map(|&i| Constant(i)).collect() }
    }

    #[test]
    fn dc_observed_only() {
        let sig = Rc::new(
            Signature::new(vec![
                Predicate { name: "P".into(), arity: 1, mode: PredMode::Owa },
                Predicate { name: "Q".into(), arity: 2, mode: PredMode::Owa },
                Predicate { name: "R".into(), arity: 1, mode: PredMode::Cwa },
            ])
            .unwrap(),
        );
        let mut d = Database::new(sig, Positivity::All);
        d.set(fact("P", &[0]), 1).unwrap();
        d.set(fact("Q", &[1, 2]), 0).unwrap();
        d.set(fact("R", &[3]), -1).unwrap();
        let dc = d.dc();
        assert_eq!(dc, [Constant(0), Constant(1), Constant(2)].into_iter().collect());
    }

    #[test]
    fn extends_and_restrictions() {
        let sig = sig_pe();
        let mut d = Database::new(sig.clone(), Positivity::All);
        d.set(fact("P", &[0]), 1).unwrap();
        d.set(fact("P", &[1]), 0).unwrap();
        let rs: Vec<Database> = d.restrictions().collect();
        assert_eq!(rs.len(), 4);
        assert_eq!(rs[0].owa_count(), 0);
        for r in &rs {
            assert!(d.extends(r));
        }
        assert_eq!(rs[3], d);
        // value conflict blocks extension
        let mut d2 = Database::new(sig, Positivity::All);
        d2.set(fact("P", &[0]), 0).unwrap();
        assert!(!d.extends(&d2));
        assert!(d.extends(&d));
    }

    #[test]
    fn rename_collision_detected() {
        let sig = sig_pe();
        let mut d = Database::new(sig, Positivity::All);
        d.set(fact("P", &[0]), 1).unwrap();
        d.set(fact("P", &[1]), 1).unwrap();
        let t = Renaming::new([(Constant(0), Constant(1))]).unwrap();
        assert!(matches!(d.rename(&t), Err(Error::NotApplicable(_))));
        let swap = Renaming::new([(Constant(0), Constant(1)), (Constant(1), Constant(0))]).unwrap();
        let e = d.rename(&swap).unwrap();
        assert_eq!(e, d);
        let shift = Renaming::new([(Constant(0), Constant(2))]).unwrap();
        let mut d3 = Database::new(sig_pe(), Positivity::All);
        d3.set(fact("P", &[0]), 1).unwrap();
        let r = d3.rename(&shift).unwrap();
        assert_eq!(r.dc(), [Constant(2)].into_iter().collect());
        assert_eq!(r.rename(&shift.inverse()).unwrap(), d3);
    }

    #[test]
    fn kdb_roundtrip() {
        let text = "sig: P/1 owa, E/2 owa, R/1 cwa; mode: all\n-E(c0,c1)\n+P(c0)\n+R(c2)\n";
        let d = Database::parse(text).unwrap();
        assert_eq!(d.canonical_text(), text);
        let again = Database::parse(&d.canonical_text()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn explicit_minus_one_is_default() {
        let a = Database::parse("sig: R/1 cwa; mode: all\n~R(c0)\n").unwrap();
        let b = Database::parse("sig: R/1 cwa; mode: all\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn satisfies_respects_values() {
        let sig = sig_pe();
        let mut d = Database::new(sig, Positivity::All);
        d.set(fact("P", &[0]), 1).unwrap();
        let s = FiniteStructure {
            domain_size: 1,
            relations: [("P".to_string(), BTreeSet::from([vec![0]]))].into(),
            constant_map: [(Constant(0), 0)].into(),
        };
        assert!(satisfies_db(&s, &d).unwrap());
        let mut d0 = Database::new(sig_pe(), Positivity::All);
        d0.set(fact("P", &[0]), 0).unwrap();
        assert!(!satisfies_db(&s, &d0).unwrap());
    }
}
