//! Building recursive isomorphisms between formalisms out of plain
//! reductions: injectivization through padding, inversion through the
//! recursion theorem, and the alternating back-and-forth construction that
//! merges two injective reductions into a bijection prefix.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde::Serialize;

use crate::bits::Bits;
use crate::formalisms::{triple_input, DAtom, DTerm, DatalogTheory, Krf, Reduction, Rule};
use crate::kr::{Constant, Database, World};
use crate::machine::{self, mk_theory, Asm, Instr, Program};
use crate::query::Query;
use crate::theta;
use crate::{Error, Result};

/// A theory-to-theory map, evaluated on demand. Implemented by closures,
/// by `Injectivized`, and by `RecursionInverse`.
pub trait TheoryMap {
    fn apply(&mut self, t: &Bits) -> Result<Bits>;
}

impl<F: FnMut(&Bits) -> Result<Bits>> TheoryMap for F {
    fn apply(&mut self, t: &Bits) -> Result<Bits> {
        self(t)
    }
}

/// Supplies, for a theory t, an unbounded stream of pairwise distinct
/// theories with the same answers as t. Index starts at 1.
pub trait PaddingProvider {
    fn pad(&self, t: &Bits, i: usize) -> Result<Bits>;
}

/// Padding in the canonical formalism: trailing no-ops on the inner machine.
pub struct ThetaPadding;

impl PaddingProvider for ThetaPadding {
    fn pad(&self, t: &Bits, i: usize) -> Result<Bits> {
        let mut set = theta::padding_set(t, i)?;
        Ok(set.pop().expect("padding_set returns i elements"))
    }
}

/// Padding for rule-set theories. The canonical flavor keeps texts sorted
/// and deduplicated, so it pads with inert marker facts over predicates the
/// query language cannot mention; the duplicate-tolerant flavor simply
/// repeats a rule.
pub struct DatalogPad {
    pub canonical: bool,
}

fn marker_rule(j: usize) -> Rule {
    Rule {
        head: DAtom { pred: format!("Pad{j}"), args: vec![DTerm::Const(Constant(0))] },
        body: Vec::new(),
    }
}

fn theory_of_bits(t: &Bits) -> Result<DatalogTheory> {
    let bytes = t
        .as_bytes()
        .ok_or_else(|| Error::Invalid("theory string is not a whole number of bytes".into()))?;
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Invalid("theory string is not UTF-8".into()))?;
    DatalogTheory::parse(text)
}

impl PaddingProvider for DatalogPad {
    fn pad(&self, t: &Bits, i: usize) -> Result<Bits> {
        let th = theory_of_bits(t)?;
        if self.canonical {
            // the i-th marker fact not already present
            let mut fresh = 0;
            let mut j = 0;
            loop {
                let r = marker_rule(j);
                if !th.rules.contains(&r) {
                    fresh += 1;
                    if fresh == i {
                        let mut rules = th.rules.clone();
                        rules.push(r);
                        return Ok(DatalogTheory::new(rules)?.canonical().bits());
                    }
                }
                j += 1;
            }
        } else {
            let extra = th.rules.first().cloned().unwrap_or_else(|| marker_rule(0));
            let mut rules = th.rules.clone();
            rules.extend(std::iter::repeat_n(extra, i));
            Ok(DatalogTheory::new(rules)?.bits())
        }
    }
}

const PAD_SEARCH_CAP: usize = 4096;

/// An injective version of an arbitrary map: outputs are taken verbatim
/// while fresh; a collision is replaced by the least-index unused element of
/// the colliding output's padding set.
pub struct Injectivized<'a> {
    inner: &'a mut dyn TheoryMap,
    pad: &'a dyn PaddingProvider,
    memo: HashMap<Bits, Bits>,
    used: HashSet<Bits>,
    /// (input, padding index) for every entry that needed padding
    pub padded: Vec<(Bits, usize)>,
}

pub fn injectivize<'a>(
    inner: &'a mut dyn TheoryMap,
    pad: &'a dyn PaddingProvider,
) -> Injectivized<'a> {
    Injectivized { inner, pad, memo: HashMap::new(), used: HashSet::new(), padded: Vec::new() }
}

impl TheoryMap for Injectivized<'_> {
    fn apply(&mut self, t: &Bits) -> Result<Bits> {
        if let Some(v) = self.memo.get(t) {
            return Ok(v.clone());
        }
        let raw = self.inner.apply(t)?;
        let out = if self.used.contains(&raw) {
            let mut found = None;
            for j in 1..=PAD_SEARCH_CAP {
                let cand = self.pad.pad(&raw, j)?;
                if cand != raw && !self.used.contains(&cand) {
                    found = Some((cand, j));
                    break;
                }
            }
            let (cand, j) = found.ok_or(Error::PaddingExhausted(PAD_SEARCH_CAP))?;
            self.padded.push((t.clone(), j));
            cand
        } else {
            raw
        };
        self.memo.insert(t.clone(), out.clone());
        self.used.insert(out.clone());
        Ok(out)
    }
}

/// The theory selected by the machine below when its own image is fresh:
/// one with the same answers as `fresh`; on a collision the machine selects
/// `collide` instead. Feeding this through the fixpoint construction yields
/// a theory that settles which branch describes itself.
fn select_program(p: &Reduction, used: &BTreeSet<Bits>, fresh: &Bits, collide: &Bits) -> Program {
    let mut a = Asm::new();
    a.emit(Instr::Input(1));
    a.emit(Instr::LoadC(2, machine::encode_program(&p.map_program)));
    a.emit(Instr::Run { code: 2, input: 1, out: 3, flag: 4 });
    a.jump_if(4, "go");
    a.emit(Instr::Loop);
    a.label("go");
    for u in used {
        a.emit(Instr::LoadC(5, u.clone()));
        a.emit(Instr::Eq(3, 5, 6));
        a.jump_if(6, "collide");
    }
    a.emit(Instr::LoadC(0, fresh.clone()));
    a.emit(Instr::Accept);
    a.label("collide");
    a.emit(Instr::LoadC(0, collide.clone()));
    a.emit(Instr::Accept);
    a.finish().expect("static labels")
}

/// A theory whose answers match `omega`'s whenever its own p-image avoids
/// the used set, and collapse to the empty closure otherwise.
pub fn first_fixpoint(p: &Reduction, omega: &Bits, used: &BTreeSet<Bits>) -> Bits {
    theta::fixpoint(&select_program(p, used, omega, &theta::omega0()))
}

/// The dichotomy theory: answers everything if its own p-image lies in the
/// used set, nothing beyond tautologies otherwise.
pub fn second_fixpoint(p: &Reduction, used: &BTreeSet<Bits>) -> Bits {
    let accept_all = mk_theory(&Program::new(vec![Instr::Input(0), Instr::Accept]));
    theta::fixpoint(&select_program(p, used, &theta::omega0(), &accept_all))
}

/// An injective map built from a plain reduction `p` out of the canonical
/// formalism. Fresh images pass through; a collision is resolved by finding,
/// through the recursion theorem, an equivalent canonical theory whose image
/// is fresh, and taking that image instead.
pub struct RecursionInverse {
    p: Reduction,
    world: Rc<World>,
    memo: HashMap<Bits, Bits>,
    used: BTreeSet<Bits>,
}

impl RecursionInverse {
    pub fn new(p: Reduction, world: Rc<World>) -> Self {
        RecursionInverse { p, world, memo: HashMap::new(), used: BTreeSet::new() }
    }
}

impl TheoryMap for RecursionInverse {
    fn apply(&mut self, t: &Bits) -> Result<Bits> {
        if let Some(v) = self.memo.get(t) {
            return Ok(v.clone());
        }
        let mut out = self.p.apply(t, self.world.clone())?;
        if self.used.contains(&out) {
            let fp = first_fixpoint(&self.p, t, &self.used);
            out = self.p.apply(&fp, self.world.clone())?;
        }
        if self.used.contains(&out) {
            // only reachable when every predecessor answers nothing; the
            // dichotomy theory then has a fresh image, or p is no reduction
            let fp = second_fixpoint(&self.p, &self.used);
            out = self.p.apply(&fp, self.world.clone())?;
            if self.used.contains(&out) {
                return Err(Error::ChainInvariantViolation(
                    "both fixpoint branches collide; the map is not a reduction".into(),
                ));
            }
        }
        self.memo.insert(t.clone(), out.clone());
        self.used.insert(out);
        Ok(self.memo[t].clone())
    }
}

/// Verdict counts from running both sides of an emitted pair on the same
/// membership samples at the same fuel. A pair that accepts on one side
/// while the other is still running is inconclusive, not a violation; a
/// definitive yes against a definitive no is.
#[derive(Clone, Debug, Default, Serialize)]
pub struct AgreementCert {
    pub samples: usize,
    pub agreed: usize,
    pub inconclusive: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub direction: &'static str,
    pub chain_hex: Vec<String>,
    pub agreement: AgreementCert,
}

#[derive(Clone, Debug)]
pub struct IsoPair {
    pub source: Bits,
    pub target: Bits,
    pub certificate: Certificate,
}

/// A finite bijection prefix with per-entry evidence.
#[derive(Clone, Debug, Default)]
pub struct PartialIso {
    pub pairs: Vec<IsoPair>,
    pub rounds: usize,
}

impl PartialIso {
    pub fn forward(&self, t: &Bits) -> Option<&Bits> {
        self.pairs.iter().find(|p| &p.source == t).map(|p| &p.target)
    }

    pub fn is_injective(&self) -> bool {
        let targets: HashSet<&Bits> = self.pairs.iter().map(|p| &p.target).collect();
        let sources: HashSet<&Bits> = self.pairs.iter().map(|p| &p.source).collect();
        targets.len() == self.pairs.len() && sources.len() == self.pairs.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct PairJson<'a> {
            source_hex: String,
            target_hex: String,
            certificate: &'a Certificate,
        }
        let pairs: Vec<PairJson> = self
            .pairs
            .iter()
            .map(|p| PairJson {
                source_hex: p.source.to_hex(),
                target_hex: p.target.to_hex(),
                certificate: &p.certificate,
            })
            .collect();
        serde_json::json!({ "pairs": pairs, "rounds": self.rounds })
    }
}

/// The alternating construction: even rounds place the next enumerated
/// source theory by chasing the forward map until an unused target appears,
/// odd rounds place the next target theory by the mirrored chase. Each chase
/// is a finite chain because both maps are injective; a revisited element or
/// an overlong chain reports the violation instead of looping.
pub fn myhill(
    h1: &mut dyn TheoryMap,
    h2: &mut dyn TheoryMap,
    enum_a: &[Bits],
    enum_b: &[Bits],
    rounds: usize,
    certify: &mut dyn FnMut(&Bits, &Bits) -> Result<AgreementCert>,
) -> Result<PartialIso> {
    let mut iso = PartialIso { pairs: Vec::new(), rounds };
    let mut dom: HashMap<Bits, Bits> = HashMap::new();
    let mut ran: HashMap<Bits, Bits> = HashMap::new();
    for n in 0..rounds {
        let k = n / 2;
        if n % 2 == 0 {
            let Some(pi) = enum_a.get(k) else { continue };
            if dom.contains_key(pi) {
                continue;
            }
            let mut chain = vec![pi.clone()];
            let mut seen_a: HashSet<Bits> = chain.iter().cloned().collect();
            let mut seen_b: HashSet<Bits> = HashSet::new();
            let mut y = h1.apply(pi)?;
            let mut steps = 1usize;
            loop {
                if !seen_b.insert(y.clone()) {
                    return Err(Error::ChainInvariantViolation(format!(
                        "forward chain from {} revisits {}",
                        pi.to_hex(),
                        y.to_hex()
                    )));
                }
                chain.push(y.clone());
                let Some(x) = ran.get(&y) else { break };
                let x = x.clone();
                if !seen_a.insert(x.clone()) {
                    return Err(Error::ChainInvariantViolation(format!(
                        "forward chain from {} revisits {}",
                        pi.to_hex(),
                        x.to_hex()
                    )));
                }
                chain.push(x.clone());
                y = h1.apply(&x)?;
                steps += 1;
                if steps > dom.len() + 2 {
                    return Err(Error::ChainInvariantViolation(format!(
                        "forward chain from {} exceeds {} steps",
                        pi.to_hex(),
                        dom.len() + 2
                    )));
                }
            }
            let cert = Certificate {
                direction: "forward",
                chain_hex: chain.iter().map(Bits::to_hex).collect(),
                agreement: certify(pi, &y)?,
            };
            dom.insert(pi.clone(), y.clone());
            ran.insert(y.clone(), pi.clone());
            iso.pairs.push(IsoPair { source: pi.clone(), target: y, certificate: cert });
        } else {
            let Some(kappa) = enum_b.get(k) else { continue };
            if ran.contains_key(kappa) {
                continue;
            }
            let mut chain = vec![kappa.clone()];
            let mut seen_b: HashSet<Bits> = chain.iter().cloned().collect();
            let mut seen_a: HashSet<Bits> = HashSet::new();
            let mut x = h2.apply(kappa)?;
            let mut steps = 1usize;
            loop {
                if !seen_a.insert(x.clone()) {
                    return Err(Error::ChainInvariantViolation(format!(
                        "backward chain from {} revisits {}",
                        kappa.to_hex(),
                        x.to_hex()
                    )));
                }
                chain.push(x.clone());
                let Some(y) = dom.get(&x) else { break };
                let y = y.clone();
                if !seen_b.insert(y.clone()) {
                    return Err(Error::ChainInvariantViolation(format!(
                        "backward chain from {} revisits {}",
                        kappa.to_hex(),
                        y.to_hex()
                    )));
                }
                chain.push(y.clone());
                x = h2.apply(&y)?;
                steps += 1;
                if steps > ran.len() + 2 {
                    return Err(Error::ChainInvariantViolation(format!(
                        "backward chain from {} exceeds {} steps",
                        kappa.to_hex(),
                        ran.len() + 2
                    )));
                }
            }
            let cert = Certificate {
                direction: "backward",
                chain_hex: chain.iter().map(Bits::to_hex).collect(),
                agreement: certify(&x, kappa)?,
            };
            dom.insert(x.clone(), kappa.clone());
            ran.insert(kappa.clone(), x.clone());
            iso.pairs.push(IsoPair { source: x, target: kappa.clone(), certificate: cert });
        }
    }
    Ok(iso)
}

/// Two equally strong formalisms with padding: injectivize each reduction
/// with the opposite side's padding, then run the alternation.
#[allow(clippy::too_many_arguments)]
pub fn equally_strong_iso(
    map12: &mut dyn TheoryMap,
    map21: &mut dyn TheoryMap,
    pad1: &dyn PaddingProvider,
    pad2: &dyn PaddingProvider,
    enum1: &[Bits],
    enum2: &[Bits],
    rounds: usize,
    certify: &mut dyn FnMut(&Bits, &Bits) -> Result<AgreementCert>,
) -> Result<PartialIso> {
    let mut h1 = injectivize(map12, pad2);
    let mut h2 = injectivize(map21, pad1);
    myhill(&mut h1, &mut h2, enum1, enum2, rounds, certify)
}

/// Agreement counts for one (pi, omega) pair via the two formalisms'
/// semideciders on encoded membership triples.
pub fn krf_agreement(
    g1: &Krf,
    g2: &Krf,
    pi: &Bits,
    omega: &Bits,
    samples: &[(Database, Query)],
    world: Rc<World>,
    fuel: u64,
) -> Result<AgreementCert> {
    let mut cert = AgreementCert { samples: samples.len(), ..Default::default() };
    for (d, q) in samples {
        let in1 = triple_input(pi, d, q)?;
        let in2 = triple_input(omega, d, q)?;
        let a = machine::run(&g1.qa_semidecider, &in1, world.clone(), fuel)?;
        let b = machine::run(&g2.qa_semidecider, &in2, world.clone(), fuel)?;
        classify(&mut cert, a.accepted(), definitive_no(&a), b.accepted(), definitive_no(&b));
    }
    Ok(cert)
}

fn definitive_no(o: &machine::Outcome) -> bool {
    matches!(o, machine::Outcome::Rejected { .. })
}

fn classify(cert: &mut AgreementCert, a_yes: bool, a_no: bool, b_yes: bool, b_no: bool) {
    if a_yes == b_yes {
        cert.agreed += 1;
    } else if (a_yes && b_no) || (b_yes && a_no) {
        cert.violations += 1;
    } else {
        cert.inconclusive += 1;
    }
}

/// Agreement counts for a pair of canonical-formalism theories via the
/// closure engine at equal fuel.
pub fn theta_agreement(
    a: &Bits,
    b: &Bits,
    samples: &[(Database, Query)],
    world: Rc<World>,
    fuel: u64,
) -> Result<AgreementCert> {
    let mut cert = AgreementCert { samples: samples.len(), ..Default::default() };
    for (d, q) in samples {
        let x = theta::qa(a, d, q, world.clone(), fuel)?.accepted();
        let y = theta::qa(b, d, q, world.clone(), fuel)?.accepted();
        // the engine never answers a definitive no
        classify(&mut cert, x, false, y, false);
    }
    Ok(cert)
}

/// Sorted-and-deduplicated representative of a rule-set theory string.
pub fn datalog_canonicalize(t: &Bits) -> Result<Bits> {
    Ok(theory_of_bits(t)?.canonical().bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{sig_pe, Fact, Positivity};
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

    fn theta_theories(n: usize) -> Vec<Bits> {
        (0..n)
            .map(|i| mk_theory(&machine::pad(&Program::new(vec![Instr::Reject]), i)))
            .collect()
    }

    fn no_cert(_: &Bits, _: &Bits) -> Result<AgreementCert> {
        Ok(AgreementCert::default())
    }

    #[test]
    fn injectivize_passes_through_an_injective_map() {
        let mut ident = |t: &Bits| Ok(t.clone());
        let mut h = injectivize(&mut ident, &ThetaPadding);
        for t in theta_theories(5) {
            assert_eq!(h.apply(&t).unwrap(), t);
        }
        assert!(h.padded.is_empty());
    }

    #[test]
    fn injectivize_resolves_collisions_with_padding() {
        let target = theta::omega0();
        let mut constant = |_: &Bits| Ok(target.clone());
        let mut h = injectivize(&mut constant, &ThetaPadding);
        let ts = theta_theories(4);
        let outs: Vec<Bits> = ts.iter().map(|t| h.apply(t).unwrap()).collect();
        assert_eq!(outs[0], target);
        for (i, a) in outs.iter().enumerate() {
            assert!(theta::is_theory(a));
            for b in &outs[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(h.padded.len(), 3);
        // memoized: a second application changes nothing
        assert_eq!(h.apply(&ts[2]).unwrap(), outs[2]);
        // the padded outputs answer like the original
        let d = db(&[("P", &[0], 1)]);
        let cert =
            theta_agreement(&outs[0], &outs[1], &[(d.clone(), q("TRUE")), (d, q("P(c0)"))], world(), 2000)
                .unwrap();
        assert_eq!(cert.agreed, 2);
        assert_eq!(cert.violations, 0);
    }

    #[test]
    fn sabotaged_padding_is_detected() {
        struct Stuck;
        impl PaddingProvider for Stuck {
            fn pad(&self, t: &Bits, _i: usize) -> Result<Bits> {
                Ok(t.clone())
            }
        }
        let target = theta::omega0();
        let mut constant = |_: &Bits| Ok(target.clone());
        let mut h = injectivize(&mut constant, &Stuck);
        let ts = theta_theories(2);
        h.apply(&ts[0]).unwrap();
        assert!(matches!(h.apply(&ts[1]), Err(Error::PaddingExhausted(_))));
    }

    #[test]
    fn recursion_inverse_emits_fresh_images() {
        let p = Reduction { map_program: theta::pad1_map() };
        let mut inv = RecursionInverse::new(p, world());
        let ts = theta_theories(3);
        let outs: Vec<Bits> = ts.iter().map(|t| inv.apply(t).unwrap()).collect();
        for (i, a) in outs.iter().enumerate() {
            for b in &outs[i + 1..] {
                assert_ne!(a, b);
            }
        }
        // injective input: images are the plain p-images
        assert_eq!(outs[0], machine::mk_theory(&machine::pad(&Program::new(vec![Instr::Reject]), 1)));
    }

    #[test]
    fn first_fixpoint_dodges_the_used_set() {
        let p = Reduction { map_program: theta::pad1_map() };
        let w = world();
        let omega = theta::omega0();
        let used: BTreeSet<Bits> = [p.apply(&omega, w.clone()).unwrap()].into();
        let fp = first_fixpoint(&p, &omega, &used);
        assert!(theta::is_theory(&fp));
        let image = p.apply(&fp, w.clone()).unwrap();
        assert!(!used.contains(&image));
        // the replacement answers like the original
        let d = db(&[("P", &[0], 1)]);
        let cert = theta_agreement(
            &fp,
            &omega,
            &[(d.clone(), q("TRUE")), (d, q("P(c0)"))],
            w,
            3000,
        )
        .unwrap();
        assert_eq!(cert.violations, 0);
        assert_eq!(cert.agreed, 2);
    }

    #[test]
    fn collision_resolution_via_a_forked_map() {
        // p sends two designated theories to one target and pads the rest
        let ts = theta_theories(3);
        let target = mk_theory(&Program::new(vec![Instr::Nop, Instr::Reject]));
        let nop = {
            let mut bytes = Vec::new();
            machine::encode_instr(&Instr::Nop, &mut bytes);
            Bits::from_bytes(&bytes)
        };
        let mut a = Asm::new();
        a.emit(Instr::Input(1));
        for t in &ts[..2] {
            a.emit(Instr::LoadC(2, t.clone()));
            a.emit(Instr::Eq(1, 2, 3));
            a.jump_if(3, "collapse");
        }
        a.emit(Instr::LoadC(4, nop));
        a.emit(Instr::Concat(1, 4, 0));
        a.emit(Instr::Accept);
        a.label("collapse");
        a.emit(Instr::LoadC(0, target.clone()));
        a.emit(Instr::Accept);
        let p = Reduction { map_program: a.finish().unwrap() };
        let mut inv = RecursionInverse::new(p, world());
        assert_eq!(inv.apply(&ts[0]).unwrap(), target);
        let second = inv.apply(&ts[1]).unwrap();
        assert_ne!(second, target);
        assert!(theta::is_theory(&second));
    }

    #[test]
    fn dichotomy_theory_accepts_everything_on_collision() {
        let target = theta::omega0();
        let p = Reduction {
            map_program: Program::new(vec![
                Instr::Input(1),
                Instr::LoadC(0, target.clone()),
                Instr::Accept,
            ]),
        };
        let used: BTreeSet<Bits> = [target].into();
        let kappa = second_fixpoint(&p, &used);
        assert!(theta::is_theory(&kappa));
        // p(kappa) is in the used set, so kappa answers every membership
        let d = db(&[("P", &[0], 1)]);
        assert!(theta::qa(&kappa, &d, &q("P(c1)"), world(), 30_000).unwrap().accepted());
    }

    #[test]
    fn myhill_identity_gives_the_identity_prefix() {
        let ts = theta_theories(4);
        let mut i1 = |t: &Bits| Ok(t.clone());
        let mut i2 = |t: &Bits| Ok(t.clone());
        let iso = myhill(&mut i1, &mut i2, &ts, &ts, 2 * ts.len(), &mut no_cert).unwrap();
        assert!(iso.is_injective());
        assert_eq!(iso.pairs.len(), ts.len());
        for t in &ts {
            assert_eq!(iso.forward(t), Some(t));
        }
    }

    #[test]
    fn myhill_between_the_rule_set_variants() {
        let texts = [
            "P(c0).",
            "E(c0,c1).",
            "P(x) <- E(x,y).",
            "P(c1).\nE(c1,c0).",
        ];
        let canon: Vec<Bits> = texts
            .iter()
            .map(|t| DatalogTheory::parse(t).unwrap().canonical().bits())
            .collect();
        // duplicate-tolerant side: same theories plus a duplicated-rule copy
        let mut dup: Vec<Bits> = canon.clone();
        dup.push(DatalogPad { canonical: false }.pad(&canon[0], 1).unwrap());
        let mut incl = |t: &Bits| Ok(t.clone());
        let mut canonize = datalog_canonicalize;
        let w = world();
        let g = crate::formalisms::datalog_krf(&w);
        let samples = [
            (db(&[]), q("TRUE")),
            (db(&[("P", &[0], 1)]), q("P(c0)")),
            (db(&[("P", &[0], 1)]), q("P(c1)")),
            (db(&[("E", &[0, 1], 1)]), q("EX x. P(x)")),
        ];
        let mut certify = |a: &Bits, b: &Bits| {
            krf_agreement(&g, &g, a, b, &samples, w.clone(), 4000)
        };
        let rounds = 2 * dup.len();
        let iso = equally_strong_iso(
            &mut incl,
            &mut canonize,
            &DatalogPad { canonical: true },
            &DatalogPad { canonical: false },
            &canon,
            &dup,
            rounds,
            &mut certify,
        )
        .unwrap();
        assert!(iso.is_injective());
        // every enumerated theory on both sides is placed
        for t in &canon {
            assert!(iso.pairs.iter().any(|p| &p.source == t));
        }
        for t in &dup {
            assert!(iso.pairs.iter().any(|p| &p.target == t));
        }
        for p in &iso.pairs {
            assert_eq!(p.certificate.agreement.violations, 0);
            assert_eq!(p.certificate.agreement.inconclusive, 0);
        }
        let json = iso.to_json();
        assert_eq!(json["rounds"], rounds);
        assert!(json["pairs"][0]["source_hex"].is_string());
    }

    #[test]
    fn non_injective_input_trips_the_chain_check() {
        let ts = theta_theories(3);
        let target = theta::omega0();
        let mut collapse = |_: &Bits| Ok(target.clone());
        let mut back = |t: &Bits| Ok(t.clone());
        let err = myhill(&mut collapse, &mut back, &ts, &ts, 2 * ts.len(), &mut no_cert);
        assert!(matches!(err, Err(Error::ChainInvariantViolation(_))));
    }
}

