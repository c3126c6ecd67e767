//! Independent brute-force oracles for the properties the engine is supposed
//! to have. Everything here trades time for obviousness: enumerate, filter,
//! compare. Nothing shares code paths with the engine being checked.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::kr::{Constant, Database, FiniteStructure, Positivity, Renaming, Signature};
use crate::query::{
    is_tautology, rename_query, satisfies_sentence, Query, QueryEnum, Term,
};
use crate::Result;

// ---------------------------------------------------------------------------
// entailment by model enumeration

/// Does p entail q over all structures of domain size at most `max_dom`?
/// Exact for positive-existential p whose canonical witnesses fit in the
/// bound; callers are responsible for respecting that restriction.
pub fn brute_entails(p: &Query, q: &Query, sig: &Signature, max_dom: usize) -> Result<bool> {
    let consts: Vec<Constant> = {
        let mut s = p.constants();
        s.extend(q.constants());
        s.into_iter().collect()
    };
    let preds: Vec<(&str, usize)> =
        sig.query_preds().map(|pr| (pr.name.as_str(), pr.arity)).collect();
    // structures have nonempty domains, as in classical semantics
    for n in 1..=max_dom {
        // all assignments of constants to elements, no unique-name assumption
        let mut cmap = vec![0usize; consts.len()];
        loop {
            let constant_map: BTreeMap<Constant, usize> =
                consts.iter().zip(&cmap).map(|(c, &e)| (*c, e)).collect();
            if !search_relations(p, q, &preds, 0, n, &mut BTreeMap::new(), &constant_map)? {
                return Ok(false);
            }
            if !bump(&mut cmap, n) {
                break;
            }
        }
    }
    Ok(true)
}

/// Iterate every relation assignment for preds[i..]; false iff some
/// completed structure satisfies p but not q.
fn search_relations(
    p: &Query,
    q: &Query,
    preds: &[(&str, usize)],
    i: usize,
    n: usize,
    rels: &mut BTreeMap<String, BTreeSet<Vec<usize>>>,
    constant_map: &BTreeMap<Constant, usize>,
) -> Result<bool> {
    if i == preds.len() {
        let s = FiniteStructure {
            domain_size: n,
            relations: rels.clone(),
            constant_map: constant_map.clone(),
        };
        if satisfies_sentence(&s, p)? && !satisfies_sentence(&s, q)? {
            return Ok(false);
        }
        return Ok(true);
    }
    let (name, arity) = preds[i];
    let tuples = all_tuples(n, arity);
    let total = 1u64 << tuples.len();
    for mask in 0..total {
        let rel: BTreeSet<Vec<usize>> = tuples
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, t)| t.clone())
            .collect();
        rels.insert(name.to_string(), rel);
        if !search_relations(p, q, preds, i + 1, n, rels, constant_map)? {
            return Ok(false);
        }
    }
    rels.remove(name);
    Ok(true)
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

// ---------------------------------------------------------------------------
// closure membership by characterization
//
// Every derivation from a finite base set normalizes: renamings and
// extensions commute upward past entailment and conjunction steps, so a pair
// (D, psi) lies in the closure iff psi is a tautology or the conjunction of
// all renamed member queries whose renamed databases D extends entails psi.
// Renaming targets range over the universe pool plus fresh spare constants,
// which is enough because queries never mention constants outside the pool.

pub struct ClosureOracle {
    members: Vec<(Database, Query)>,
    targets: Vec<Constant>,
    cache: HashMap<String, Vec<Query>>,
}

impl ClosureOracle {
    pub fn new(members: Vec<(Database, Query)>, pool: &[Constant]) -> ClosureOracle {
        let mut targets: BTreeSet<Constant> = pool.iter().copied().collect();
        for (d, q) in &members {
            targets.extend(d.all_constants());
            targets.extend(q.constants());
        }
        let spare_count =
            members.iter().map(|(d, q)| pair_constants(d, q).len()).max().unwrap_or(0);
        let base = targets.iter().next_back().map_or(0, |c| c.0 + 1);
        for i in 0..spare_count as u32 {
            targets.insert(Constant(base + i));
        }
        ClosureOracle { members, targets: targets.into_iter().collect(), cache: HashMap::new() }
    }

    /// Is (db, q) in the closure of the member set?
    pub fn member(&mut self, db: &Database, q: &Query) -> Result<bool> {
        if is_tautology(q)? {
            return Ok(true);
        }
        let conjuncts = self.conjuncts(db)?;
        if conjuncts.is_empty() {
            return Ok(false);
        }
        if let Some(atoms) = all_ground(&conjuncts) {
            return ground_entails(&atoms, q);
        }
        let mut phi = conjuncts[0].clone();
        for c in &conjuncts[1..] {
            phi = Query::and(phi, c.clone());
        }
        crate::query::entails(&phi, q)
    }

    /// All renamed member queries available at db, deduplicated.
    fn conjuncts(&mut self, db: &Database) -> Result<Vec<Query>> {
        let key = db.canonical_key();
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (d0, chi) in &self.members {
            let consts = pair_constants(d0, chi);
            for sigma in injective_maps(&consts, &self.targets) {
                let tau = Renaming::new(sigma).expect("injective by construction");
                let (rd, rq) = match (d0.rename(&tau), rename_query(chi, &tau)) {
                    (Ok(rd), Ok(rq)) => (rd, rq),
                    _ => continue,
                };
                if db.extends(&rd) && seen.insert(rq.to_string()) {
                    out.push(rq);
                }
            }
        }
        self.cache.insert(key, out.clone());
        Ok(out)
    }
}

fn pair_constants(d: &Database, q: &Query) -> Vec<Constant> {
    let mut s = d.all_constants();
    s.extend(q.constants());
    s.into_iter().collect()
}

/// All injective total maps from `from` into `targets`.
fn injective_maps(from: &[Constant], targets: &[Constant]) -> Vec<Vec<(Constant, Constant)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        from: &[Constant],
        targets: &[Constant],
        i: usize,
        used: &mut BTreeSet<Constant>,
        cur: &mut Vec<(Constant, Constant)>,
        out: &mut Vec<Vec<(Constant, Constant)>>,
    ) {
        if i == from.len() {
            out.push(cur.clone());
            return;
        }
        for &t in targets {
            if used.insert(t) {
                cur.push((from[i], t));
                rec(from, targets, i + 1, used, cur, out);
                cur.pop();
                used.remove(&t);
            }
        }
    }
    rec(from, targets, 0, &mut BTreeSet::new(), &mut cur, &mut out);
    out
}

/// Conjuncts that are single ground atoms, if all of them are.
fn all_ground(conjuncts: &[Query]) -> Option<Vec<(String, Vec<Constant>)>> {
    let mut out = Vec::new();
    for c in conjuncts {
        match c {
            Query::Atom(p, ts) => {
                let mut args = Vec::with_capacity(ts.len());
                for t in ts {
                    match t {
                        Term::Const(c) => args.push(*c),
                        Term::Var(_) => return None,
                    }
                }
                out.push((p.clone(), args));
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Entailment from a ground conjunction: evaluate q in its canonical model,
/// with q's own constants as extra isolated elements.
fn ground_entails(atoms: &[(String, Vec<Constant>)], q: &Query) -> Result<bool> {
    let mut consts: BTreeSet<Constant> = q.constants();
    for (_, args) in atoms {
        consts.extend(args.iter().copied());
    }
    let constant_map: BTreeMap<Constant, usize> =
        consts.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut relations: BTreeMap<String, BTreeSet<Vec<usize>>> = BTreeMap::new();
    for (p, args) in atoms {
        let tuple = args.iter().map(|c| constant_map[c]).collect();
        relations.entry(p.clone()).or_default().insert(tuple);
    }
    let s = FiniteStructure { domain_size: consts.len(), relations, constant_map };
    satisfies_sentence(&s, q)
}

// ---------------------------------------------------------------------------
// closure by literal fixpoint on an explicit finite universe

/// Iterate the five closure properties to a fixpoint inside the cartesian
/// universe dbs x queries. `seed` holds (db index, query index) pairs.
/// Semi-naive: each member is processed once, with entailment decisions
/// memoized and extension targets cached per db, so universes of a few
/// hundred thousand pairs stay tractable.
pub fn closure_fixpoint(
    dbs: &[Database],
    queries: &[Rc<Query>],
    seed: &[(usize, usize)],
    pool: &[Constant],
) -> Result<BTreeSet<(usize, usize)>> {
    let qindex: HashMap<String, usize> =
        queries.iter().enumerate().map(|(i, q)| (q.to_string(), i)).collect();
    let dindex: HashMap<String, usize> =
        dbs.iter().enumerate().map(|(i, d)| (d.canonical_key(), i)).collect();
    // membership as one bitset per db
    let words = queries.len().div_ceil(64);
    let mut bits: Vec<Vec<u64>> = vec![vec![0u64; words]; dbs.len()];
    let mut work: Vec<(usize, usize)> = Vec::new();
    let push = |bits: &mut Vec<Vec<u64>>, work: &mut Vec<_>, di: usize, qi: usize| {
        let w = &mut bits[di][qi / 64];
        let m = 1u64 << (qi % 64);
        if *w & m == 0 {
            *w |= m;
            work.push((di, qi));
        }
    };
    for &(di, qi) in seed {
        push(&mut bits, &mut work, di, qi);
    }
    // tautologies hold everywhere
    for (qi, q) in queries.iter().enumerate() {
        if is_tautology(q)? {
            for di in 0..dbs.len() {
                push(&mut bits, &mut work, di, qi);
            }
        }
    }
    // per-query caches: what it entails, where renamings land, which
    // conjunctions fall back inside the universe
    let mut entailed: HashMap<usize, Rc<Vec<usize>>> = HashMap::new();
    let mut conj_memo: HashMap<(usize, usize), Option<usize>> = HashMap::new();
    let mut extensions: HashMap<usize, Rc<Vec<usize>>> = HashMap::new();
    let mut by_db: Vec<Vec<usize>> = vec![Vec::new(); dbs.len()];
    while let Some((di, qi)) = work.pop() {
        // entailment weakening
        let ent = match entailed.get(&qi) {
            Some(v) => v.clone(),
            None => {
                let mut v = Vec::new();
                for (qj, qq) in queries.iter().enumerate() {
                    if crate::query::entails(&queries[qi], qq)? {
                        v.push(qj);
                    }
                }
                let v = Rc::new(v);
                entailed.insert(qi, v.clone());
                v
            }
        };
        for &qj in ent.iter() {
            push(&mut bits, &mut work, di, qj);
        }
        // injective renaming
        let consts = pair_constants(&dbs[di], &queries[qi]);
        for sigma in injective_maps(&consts, pool) {
            let tau = Renaming::new(sigma).expect("injective");
            let (rd, rq) = match (dbs[di].rename(&tau), rename_query(&queries[qi], &tau)) {
                (Ok(rd), Ok(rq)) => (rd, rq),
                _ => continue,
            };
            if let (Some(&dj), Some(&qj)) =
                (dindex.get(&rd.canonical_key()), qindex.get(&rq.to_string()))
            {
                push(&mut bits, &mut work, dj, qj);
            }
        }
        // database extension
        let ext = extensions
            .entry(di)
            .or_insert_with(|| {
                Rc::new(
                    dbs.iter()
                        .enumerate()
                        .filter(|(_, d2)| d2.extends(&dbs[di]))
                        .map(|(dj, _)| dj)
                        .collect(),
                )
            })
            .clone();
        for &dj in ext.iter() {
            push(&mut bits, &mut work, dj, qi);
        }
        // conjunction introduction, in both orders, against every member
        // already known at this db (including the pair with itself)
        by_db[di].push(qi);
        for k in 0..by_db[di].len() {
            let qk = by_db[di][k];
            for (a, b) in [(qi, qk), (qk, qi)] {
                let hit = *conj_memo.entry((a, b)).or_insert_with(|| {
                    let conj = Query::and((*queries[a]).clone(), (*queries[b]).clone());
                    qindex.get(&conj.to_string()).copied()
                });
                if let Some(qj) = hit {
                    push(&mut bits, &mut work, di, qj);
                }
            }
        }
    }
    let mut set = BTreeSet::new();
    for (di, row) in bits.iter().enumerate() {
        for (w, &word) in row.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let b = word.trailing_zeros() as usize;
                set.insert((di, w * 64 + b));
                word &= word - 1;
            }
        }
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// universe builders

/// Every fact over the signature with arguments from `consts`.
pub fn all_facts(sig: &Signature, consts: &[Constant]) -> Vec<crate::kr::Fact> {
    let mut out = Vec::new();
    for p in sig.preds() {
        let mut idx = vec![0usize; p.arity];
        if consts.is_empty() && p.arity > 0 {
            continue;
        }
        loop {
            out.push(crate::kr::Fact {
                pred: p.name.clone(),
                args: idx.iter().map(|&i| consts[i]).collect(),
            });
            if !bump(&mut idx, consts.len()) {
                break;
            }
        }
    }
    out
}

/// Every database over the signature with arguments from `consts`: each
/// fact independently absent, value 1, or (outside positive mode) value 0.
pub fn all_databases(
    sig: &Rc<Signature>,
    mode: Positivity,
    consts: &[Constant],
) -> Vec<Database> {
    let facts = all_facts(sig, consts);
    let values: &[i8] = if mode == Positivity::Pos { &[-1, 1] } else { &[-1, 1, 0] };
    let mut out = Vec::new();
    let mut choice = vec![0usize; facts.len()];
    loop {
        let mut d = Database::new(sig.clone(), mode);
        for (f, &c) in facts.iter().zip(&choice) {
            if values[c] >= 0 {
                d.set(f.clone(), values[c]).expect("facts fit the signature");
            }
        }
        out.push(d);
        if !bump(&mut choice, values.len()) {
            break;
        }
    }
    out
}

/// Every query with encoding length at most `max_bits`, in canonical order.
pub fn all_queries(sig: &Rc<Signature>, max_bits: usize) -> Vec<Rc<Query>> {
    QueryEnum::new(sig.clone()).up_to_len(max_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{sig_pe, Fact};
    use crate::query::{entails, parse_query};

    fn q(s: &str) -> Query {
        parse_query(s, &sig_pe()).unwrap()
    }

    fn db(facts: &[(&str, &[u32], i8)]) -> Database {
        let mut d = Database::new(sig_pe(), Positivity::All);
        for (p, args, v) in facts {
            let f = Fact { pred: (*p).into(), args: args.iter().map(|&a| Constant(a)).collect() };
            d.set(f, *v).unwrap();
        }
        d
    }

    #[test]
    fn brute_entails_matches_hom_check() {
        let sig = sig_pe();
        let cases = [
            ("P(c0)", "EX x. P(x)"),
            ("P(c0)", "P(c1)"),
            ("P(c0) & E(c0,c1)", "EX x. EX y. E(x,y)"),
            ("EX x. P(x)", "P(c0)"),
            ("EX x. E(x,x)", "EX x. EX y. E(x,y)"),
            ("EX x. EX y. E(x,y)", "EX x. E(x,x)"),
            ("P(c0) | P(c1)", "EX x. P(x)"),
            ("TRUE", "EX x. TRUE"),
            ("P(c0)", "P(c0) | E(c0,c0)"),
            ("P(c0) & P(c1)", "P(c1)"),
        ];
        for (a, b) in cases {
            let (pa, pb) = (q(a), q(b));
            assert_eq!(
                brute_entails(&pa, &pb, &sig, 3).unwrap(),
                entails(&pa, &pb).unwrap(),
                "{a} vs {b}"
            );
        }
    }

    #[test]
    fn universe_counts() {
        let consts = [Constant(0), Constant(1)];
        assert_eq!(all_facts(&sig_pe(), &consts).len(), 6);
        assert_eq!(all_databases(&sig_pe(), Positivity::All, &consts).len(), 729);
        assert_eq!(all_databases(&sig_pe(), Positivity::Pos, &consts).len(), 64);
    }

    #[test]
    fn characterization_examples() {
        let d0 = db(&[("P", &[0], 1)]);
        let mut o = ClosureOracle::new(
            vec![(d0.clone(), q("P(c0)"))],
            &[Constant(0), Constant(1)],
        );
        assert!(o.member(&d0, &q("P(c0)")).unwrap());
        assert!(o.member(&d0, &q("EX x. P(x)")).unwrap());
        assert!(o.member(&d0, &q("TRUE")).unwrap());
        // renaming route
        let d1 = db(&[("P", &[1], 1)]);
        assert!(o.member(&d1, &q("P(c1)")).unwrap());
        assert!(!o.member(&d1, &q("P(c0)")).unwrap());
        // extension route
        let big = db(&[("P", &[0], 1), ("E", &[0, 1], 1)]);
        assert!(o.member(&big, &q("P(c0)")).unwrap());
        // not granted anywhere
        assert!(!o.member(&d0, &q("E(c0,c0)")).unwrap());
        let empty = db(&[]);
        assert!(!o.member(&empty, &q("P(c0)")).unwrap());
        assert!(o.member(&empty, &q("TRUE")).unwrap());
    }

    #[test]
    fn conjunction_membership() {
        let d = db(&[("P", &[0], 1), ("P", &[1], 1)]);
        let mut o = ClosureOracle::new(
            vec![(d.clone(), q("P(c0)")), (d.clone(), q("P(c1)"))],
            &[Constant(0), Constant(1)],
        );
        assert!(o.member(&d, &q("P(c0) & P(c1)")).unwrap());
        assert!(o.member(&d, &q("P(c1) & P(c0)")).unwrap());
        assert!(o.member(&d, &q("EX x. P(x) & P(c0)")).unwrap());
    }

    #[test]
    fn fixpoint_agrees_with_characterization() {
        // one-constant universe keeps the literal fixpoint tractable
        let pool = [Constant(0)];
        let dbs = all_databases(&sig_pe(), Positivity::All, &pool);
        assert_eq!(dbs.len(), 9);
        let queries = all_queries(&sig_pe(), 12);
        let d0 = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let di = dbs.iter().position(|d| d == &d0).unwrap();
        let qi = queries.iter().position(|x| **x == phi).unwrap();
        let fixed = closure_fixpoint(&dbs, &queries, &[(di, qi)], &pool).unwrap();
        let mut o = ClosureOracle::new(vec![(d0, phi)], &pool);
        for (i, d) in dbs.iter().enumerate() {
            for (j, qq) in queries.iter().enumerate() {
                assert_eq!(
                    fixed.contains(&(i, j)),
                    o.member(d, qq).unwrap(),
                    "db {} query {}",
                    d.canonical_key(),
                    qq
                );
            }
        }
    }
}
