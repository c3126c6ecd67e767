//! The dovetailing closure engine. Given a base machine M and a target pair
//! (D, phi), it decides semi-effectively whether the pair lies in the closure
//! of M's acceptance set under tautologies, entailment weakening, injective
//! renamings, database extension, and conjunction introduction.
//!
//! Tasks live in one global array and start strictly sequentially: the task
//! with index j performs its first step at iteration j+1 and one further step
//! each iteration after that, so task i receives its s-th step at iteration
//! i+s while live. A starting task may spawn new tasks; the array always runs
//! ahead of the iteration counter, so the schedule never starves. Unstarted
//! tasks are not materialized; a compact record of each spawn suffices to
//! reconstruct any task body from its index.
//!
//! A task is one atom (a simulation of M, a tautology check) or a chain of
//! two run in sequence: an always-halting entailment or injectivity check,
//! then a simulation of M on the derived pair. The second atom starts only
//! after the first succeeds. A simulation atom's first step generates the
//! batch of closure tasks for its pair; a chain's first step generates the
//! chain for the next element of its enumeration.
//!
//! Success propagates along parent links, gated by cooperation links: the
//! two halves of a conjunction split carry mutual coop links and flag their
//! parent only together. The run accepts when the root task is flagged.

use std::collections::HashMap;
use std::rc::Rc;

use serde::Serialize;

use crate::bits::Bits;
use crate::kr::{Constant, Database, Renaming, World};
use crate::machine::{pair_input, MachineState, Program, Status};
use crate::query::{entails, is_tautology, rename_query, Query, QueryEnum};
use crate::Result;

const NONE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineStep {
    Running,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosureOutcome {
    Accepted { iterations: u64 },
    Exhausted,
}

impl ClosureOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self, ClosureOutcome::Accepted { .. })
    }
}

#[derive(Clone, Serialize)]
pub struct TraceEvent {
    /// outer iteration
    pub k: u64,
    /// task index
    pub i: u64,
    pub event: &'static str,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub payload: String,
}

struct Record {
    first: u64,
    parent: u64,
    count: u64,
    kind: RecordKind,
}

enum RecordKind {
    Root {
        db: Rc<Database>,
        q: Rc<Query>,
    },
    /// Spawned when a simulation atom for (db, psi) performs its first step.
    Batch {
        db: Rc<Database>,
        psi: Rc<Query>,
        conj: Option<(Rc<Query>, Rc<Query>)>,
    },
    /// Rungs `idx..idx+count` of the query-weakening ladder for (db, psi).
    /// Ladders are allocated in blocks so consecutive rungs get consecutive
    /// task ids; the last slot of a block allocates the next one. One rung
    /// per record would place rung k exponentially deep in the id space.
    QChain {
        db: Rc<Database>,
        psi: Rc<Query>,
        idx: u64,
    },
    /// Rungs `idx..idx+count` of the renaming ladder for (db, psi).
    RChain {
        db: Rc<Database>,
        psi: Rc<Query>,
        idx: u64,
    },
}

/// Rungs per ladder block. Large enough that the renamings over a small
/// constant pool and the short entailing queries all sit in the first block.
const CHAIN_BLOCK: u64 = 64;

/// What a task does once started, reconstructed from its spawn record.
enum Spec {
    /// Simulate M on (db, psi).
    Sim { db: Rc<Database>, psi: Rc<Query> },
    /// Succeeds iff psi is a tautology.
    Taut { psi: Rc<Query> },
    /// Chain: check that the idx-th query entails psi, then simulate M on
    /// (db, that query).
    QChain { db: Rc<Database>, psi: Rc<Query>, idx: u64 },
    /// Chain: check that the idx-th candidate renaming is injective, then
    /// simulate M on its image of (db, psi).
    RChain { db: Rc<Database>, psi: Rc<Query>, idx: u64 },
}

enum Body {
    /// Running simulation atom (directly or as second atom of a chain).
    Sim(Box<MachineState>),
    /// Chain whose first atom succeeded; the simulation atom starts on the
    /// next step.
    Pending { db: Rc<Database>, psi: Rc<Query> },
    Done,
}

struct Task {
    parent: u64,
    coop: u64,
    flagged: bool,
    halted: bool,
    body: Body,
}

pub struct Engine {
    world: Rc<World>,
    base: Rc<Program>,
    records: Vec<Record>,
    next_id: u64,
    tasks: Vec<Task>,
    live: Vec<u64>,
    qenum: QueryEnum,
    renum: RenamingEnum,
    iter: u64,
    accepted: bool,
    trace: Option<Vec<TraceEvent>>,
}

impl Engine {
    pub fn new(world: Rc<World>, base: Rc<Program>, db: Database, q: Rc<Query>) -> Engine {
        let root = Record {
            first: 0,
            parent: NONE,
            count: 1,
            kind: RecordKind::Root { db: Rc::new(db), q },
        };
        Engine {
            qenum: QueryEnum::new(world.sig.clone()),
            renum: RenamingEnum::default(),
            world,
            base,
            records: vec![root],
            next_id: 1,
            tasks: Vec::new(),
            live: Vec::new(),
            iter: 0,
            accepted: false,
            trace: None,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.take().unwrap_or_default()
    }

    pub fn iterations(&self) -> u64 {
        self.iter
    }

    pub fn tasks_created(&self) -> u64 {
        self.next_id
    }

    pub fn started_count(&self) -> u64 {
        self.tasks.len() as u64
    }

    fn emit(&mut self, i: u64, event: &'static str, payload: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { k: self.iter, i, event, payload });
        }
    }

    /// Run one dovetailing iteration: one step for every started live task
    /// in index order, then the start of the next unstarted task.
    pub fn step(&mut self) -> Result<EngineStep> {
        if self.accepted {
            return Ok(EngineStep::Accepted);
        }
        self.iter += 1;
        let live = std::mem::take(&mut self.live);
        let mut keep = Vec::with_capacity(live.len() + 1);
        for id in live {
            let t = &self.tasks[id as usize];
            if t.flagged || t.halted {
                continue;
            }
            self.step_task(id)?;
            let t = &self.tasks[id as usize];
            if !t.flagged && !t.halted {
                keep.push(id);
            }
        }
        let start_id = self.tasks.len() as u64;
        if start_id < self.next_id {
            self.start_task(start_id)?;
            let t = &self.tasks[start_id as usize];
            if !t.flagged && !t.halted {
                keep.push(start_id);
            }
        }
        self.live = keep;
        if self.accepted {
            self.emit(0, "accept", String::new());
            Ok(EngineStep::Accepted)
        } else {
            Ok(EngineStep::Running)
        }
    }

    fn step_task(&mut self, id: u64) -> Result<()> {
        let t = &mut self.tasks[id as usize];
        match std::mem::replace(&mut t.body, Body::Done) {
            Body::Done => {
                t.halted = true;
                Ok(())
            }
            Body::Pending { db, psi } => self.begin_sim(id, db, psi),
            Body::Sim(mut state) => {
                match state.step()? {
                    Status::Running => {
                        self.tasks[id as usize].body = Body::Sim(state);
                        Ok(())
                    }
                    Status::Accepted(_) => {
                        self.succeed(id);
                        Ok(())
                    }
                    Status::Rejected => {
                        self.tasks[id as usize].halted = true;
                        self.emit(id, "halt", String::new());
                        Ok(())
                    }
                }
            }
        }
    }

    /// First step of a simulation atom: generate the batch for its pair and
    /// perform the first machine step.
    fn begin_sim(&mut self, id: u64, db: Rc<Database>, psi: Rc<Query>) -> Result<()> {
        self.spawn_batch(id, db.clone(), psi.clone())?;
        let input = pair_input(&db, &psi)?;
        let mut state = MachineState::new(self.base.clone(), self.world.clone(), input);
        match state.step()? {
            Status::Running => {
                self.tasks[id as usize].body = Body::Sim(Box::new(state));
            }
            Status::Accepted(_) => self.succeed(id),
            Status::Rejected => {
                self.tasks[id as usize].halted = true;
                self.emit(id, "halt", String::new());
            }
        }
        Ok(())
    }

    /// Materialize task `id` and perform its first step.
    fn start_task(&mut self, id: u64) -> Result<()> {
        let at = self
            .records
            .partition_point(|r| r.first <= id)
            .checked_sub(1)
            .expect("record for started task");
        let rec = &self.records[at];
        debug_assert!(id < rec.first + rec.count);
        let offset = id - rec.first;
        let parent = rec.parent;
        // chain slots that must allocate the next ladder block when started
        let tail = match &rec.kind {
            RecordKind::Batch { .. } => offset == 1 || offset == 2,
            RecordKind::QChain { .. } | RecordKind::RChain { .. } => offset + 1 == rec.count,
            RecordKind::Root { .. } => false,
        };
        let (spec, coop) = self.resolve(at, offset);
        self.tasks.push(Task { parent, coop, flagged: false, halted: false, body: Body::Done });
        match spec {
            Spec::Sim { db, psi } => {
                self.emit(id, "start", format!("sim {} |= {}", db.canonical_key(), psi));
                self.begin_sim(id, db, psi)?;
            }
            Spec::Taut { psi } => {
                self.emit(id, "start", format!("taut? {psi}"));
                if is_tautology(&psi)? {
                    self.succeed(id);
                } else {
                    self.tasks[id as usize].halted = true;
                    self.emit(id, "halt", String::new());
                }
            }
            Spec::QChain { db, psi, idx } => {
                // keep the ladder ahead of the scheduler, then run the
                // entailment atom
                if tail {
                    self.records.push(Record {
                        first: self.next_id,
                        parent,
                        count: CHAIN_BLOCK,
                        kind: RecordKind::QChain { db: db.clone(), psi: psi.clone(), idx: idx + 1 },
                    });
                    self.next_id += CHAIN_BLOCK;
                }
                let chi = self.qenum.get(idx as usize);
                self.emit(id, "start", format!("chain: {chi} => {psi} ?"));
                if entails(&chi, &psi)? {
                    self.tasks[id as usize].body = Body::Pending { db, psi: chi };
                } else {
                    self.tasks[id as usize].halted = true;
                    self.emit(id, "halt", String::new());
                }
            }
            Spec::RChain { db, psi, idx } => {
                if tail {
                    self.records.push(Record {
                        first: self.next_id,
                        parent,
                        count: CHAIN_BLOCK,
                        kind: RecordKind::RChain { db: db.clone(), psi: psi.clone(), idx: idx + 1 },
                    });
                    self.next_id += CHAIN_BLOCK;
                }
                let consts = pair_constants(&db, &psi);
                let map = self.renum.at(&consts, idx);
                self.emit(id, "start", format!("chain: renaming #{idx} ?"));
                match Renaming::new(map) {
                    Err(_) => {
                        // not injective
                        self.tasks[id as usize].halted = true;
                        self.emit(id, "halt", String::new());
                    }
                    Ok(tau) => match (db.rename(&tau), rename_query(&psi, &tau)) {
                        (Ok(rdb), Ok(rpsi)) => {
                            self.tasks[id as usize].body =
                                Body::Pending { db: Rc::new(rdb), psi: Rc::new(rpsi) };
                        }
                        _ => {
                            // the image collides with an untouched constant
                            self.tasks[id as usize].halted = true;
                            self.emit(id, "halt", String::new());
                        }
                    },
                }
            }
        }
        Ok(())
    }

    /// The task body and coop partner for slot `offset` of record `at`.
    fn resolve(&self, at: usize, offset: u64) -> (Spec, u64) {
        let rec = &self.records[at];
        let b = rec.first;
        match &rec.kind {
            RecordKind::Root { db, q } => (Spec::Sim { db: db.clone(), psi: q.clone() }, NONE),
            RecordKind::Batch { db, psi, conj } => {
                let conj_len = if conj.is_some() { 2 } else { 0 };
                match offset {
                    0 => (Spec::Taut { psi: psi.clone() }, NONE),
                    1 => (Spec::QChain { db: db.clone(), psi: psi.clone(), idx: 0 }, NONE),
                    2 => (Spec::RChain { db: db.clone(), psi: psi.clone(), idx: 0 }, NONE),
                    3 if conj_len == 2 => {
                        let (l, _) = conj.as_ref().unwrap();
                        (Spec::Sim { db: db.clone(), psi: l.clone() }, b + 4)
                    }
                    4 if conj_len == 2 => {
                        let (_, r) = conj.as_ref().unwrap();
                        (Spec::Sim { db: db.clone(), psi: r.clone() }, b + 3)
                    }
                    _ => {
                        let mask = offset - 3 - conj_len;
                        let sub = Rc::new(db.restriction(mask));
                        (Spec::Sim { db: sub, psi: psi.clone() }, NONE)
                    }
                }
            }
            RecordKind::QChain { db, psi, idx } => {
                (Spec::QChain { db: db.clone(), psi: psi.clone(), idx: *idx + offset }, NONE)
            }
            RecordKind::RChain { db, psi, idx } => {
                (Spec::RChain { db: db.clone(), psi: psi.clone(), idx: *idx + offset }, NONE)
            }
        }
    }

    fn spawn_batch(&mut self, parent: u64, db: Rc<Database>, psi: Rc<Query>) -> Result<()> {
        let conj = match psi.as_ref() {
            Query::And(a, b) => Some((Rc::new((**a).clone()), Rc::new((**b).clone()))),
            _ => None,
        };
        let restr = 1u64
            .checked_shl(db.owa_count() as u32)
            .filter(|_| db.owa_count() < 48)
            .ok_or_else(|| {
                crate::Error::Invalid("too many observed facts to enumerate restrictions".into())
            })?;
        let count = 3 + if conj.is_some() { 2 } else { 0 } + restr;
        self.records.push(Record {
            first: self.next_id,
            parent,
            count,
            kind: RecordKind::Batch { db, psi, conj },
        });
        self.next_id += count;
        Ok(())
    }

    /// Flag the task and propagate along parent links, gated by coop links:
    /// starting at j, while j > 0 and (c[j] = -1 or F[c[j]]), move to p[j]
    /// and flag it.
    fn succeed(&mut self, id: u64) {
        self.emit(id, "succeed", String::new());
        let mut j = id;
        self.set_flag(j);
        loop {
            if j == 0 {
                self.accepted = true;
                return;
            }
            let t = &self.tasks[j as usize];
            let coop = t.coop;
            if coop != NONE && !self.is_flagged(coop) {
                return;
            }
            j = t.parent;
            if j == NONE {
                return;
            }
            self.set_flag(j);
        }
    }

    fn set_flag(&mut self, id: u64) {
        let t = &mut self.tasks[id as usize];
        if !t.flagged {
            t.flagged = true;
            t.body = Body::Done;
            self.emit(id, "flag", String::new());
        }
    }

    fn is_flagged(&self, id: u64) -> bool {
        self.tasks.get(id as usize).is_some_and(|t| t.flagged)
    }
}

fn pair_constants(db: &Database, psi: &Query) -> Vec<Constant> {
    let mut set = db.all_constants();
    set.extend(psi.constants());
    set.into_iter().collect()
}

/// Does the closure of M's acceptance set contain (db, q)?
pub fn star_accepts(
    base: &Program,
    db: &Database,
    q: &Query,
    world: Rc<World>,
    fuel: u64,
) -> Result<ClosureOutcome> {
    let mut e = Engine::new(world, Rc::new(base.clone()), db.clone(), Rc::new(q.clone()));
    run_engine(&mut e, fuel)
}

pub fn run_engine(e: &mut Engine, fuel: u64) -> Result<ClosureOutcome> {
    for _ in 0..fuel {
        if let EngineStep::Accepted = e.step()? {
            return Ok(ClosureOutcome::Accepted { iterations: e.iterations() });
        }
    }
    Ok(ClosureOutcome::Exhausted)
}

// ---------------------------------------------------------------------------
// renaming enumeration
//
// Candidate renamings for a pair are maps with strictly increasing sources
// drawn from its constant set, arbitrary targets, ordered length-lex by
// their canonical encoding. Injectivity is the chain atom's check, and maps
// whose application would collide die at the second atom; together the
// ladder covers exactly the applicable injective renamings, in order.

#[derive(Default)]
pub struct RenamingEnum {
    cache: HashMap<Vec<Constant>, Vec<Vec<(Constant, Constant)>>>,
}

impl RenamingEnum {
    pub fn at(&mut self, consts: &[Constant], idx: u64) -> Vec<(Constant, Constant)> {
        if consts.is_empty() {
            // only the empty map exists, at every index
            return Vec::new();
        }
        let entry = self.cache.entry(consts.to_vec()).or_default();
        while entry.len() <= idx as usize {
            grow_renamings(consts, entry);
        }
        entry[idx as usize].clone()
    }
}

/// Extend the cached enumeration by at least one element.
fn grow_renamings(consts: &[Constant], cache: &mut Vec<Vec<(Constant, Constant)>>) {
    // generate everything up to a growing length bound and keep the sorted
    // order; bound growth is geometric in calls, so total work stays small
    let mut bound = 8;
    loop {
        let mut all: Vec<(Bits, Vec<(Constant, Constant)>)> = Vec::new();
        gen_renamings(consts, 0, bound, &mut Bits::new(), &mut Vec::new(), &mut all);
        for (bits, _) in all.iter_mut() {
            bits.push(false); // terminator
        }
        all.sort_by(|a, b| a.0.cmp_len_lex(&b.0));
        if all.len() > cache.len() {
            *cache = all.into_iter().map(|(_, m)| m).collect();
            return;
        }
        bound *= 2;
    }
}

fn gen_renamings(
    consts: &[Constant],
    from: usize,
    budget: usize,
    bits: &mut Bits,
    cur: &mut Vec<(Constant, Constant)>,
    out: &mut Vec<(Bits, Vec<(Constant, Constant)>)>,
) {
    out.push((bits.clone(), cur.clone()));
    for i in from..consts.len() {
        let src = consts[i].0 as usize;
        // pair costs 1 + (src+1) + (target+1) bits
        if 3 + src > budget {
            continue;
        }
        let tmax = budget - 3 - src;
        for t in 0..=tmax {
            let mark = bits.len();
            bits.push(true);
            crate::bits::push_unary(bits, src as u64);
            crate::bits::push_unary(bits, t as u64);
            cur.push((consts[i], Constant(t as u32)));
            let spent = bits.len() - mark;
            gen_renamings(consts, i + 1, budget - spent, bits, cur, out);
            cur.pop();
            bits.truncate(mark);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{Fact, Positivity, Signature};
    use crate::machine::accept_exactly;
    use crate::query::parse_query;

    fn sig() -> Rc<Signature> {
        crate::kr::sig_pe()
    }

    fn world() -> Rc<World> {
        World::new(sig(), Positivity::All)
    }

    fn fact(p: &str, args: &[u32]) -> Fact {
        Fact { pred: p.into(), args: args.iter().map(|&a| Constant(a)).collect() }
    }

    fn db(facts: &[(&str, &[u32], i8)]) -> Database {
        let mut d = Database::new(sig(), Positivity::All);
        for (p, args, v) in facts {
            d.set(fact(p, args), *v).unwrap();
        }
        d
    }

    fn q(s: &str) -> Query {
        parse_query(s, &sig()).unwrap()
    }

    fn accepts(m: &Program, d: &Database, phi: &Query, fuel: u64) -> Option<u64> {
        match star_accepts(m, d, phi, world(), fuel).unwrap() {
            ClosureOutcome::Accepted { iterations } => Some(iterations),
            ClosureOutcome::Exhausted => None,
        }
    }

    fn machine_for(pairs: &[(&Database, &Query)]) -> Program {
        let inputs: Vec<_> = pairs.iter().map(|(d, f)| pair_input(d, f).unwrap()).collect();
        accept_exactly(&inputs)
    }

    #[test]
    fn renaming_enumeration_order() {
        let mut e = RenamingEnum::default();
        let c01 = [Constant(0), Constant(1)];
        // index 0: the empty map; 1: c0->c0; 2: c0->c1; 3: c1->c0
        assert_eq!(e.at(&c01, 0), vec![]);
        assert_eq!(e.at(&c01, 1), vec![(Constant(0), Constant(0))]);
        assert_eq!(e.at(&c01, 2), vec![(Constant(0), Constant(1))]);
        assert_eq!(e.at(&c01, 3), vec![(Constant(1), Constant(0))]);
        // the swap appears at a fixed small index; find and pin it
        let swap = vec![(Constant(0), Constant(1)), (Constant(1), Constant(0))];
        let pos = (0..40).find(|&i| e.at(&c01, i) == swap).unwrap();
        assert_eq!(pos, 12);
        // single-constant domain
        let c0 = [Constant(0)];
        assert_eq!(e.at(&c0, 2), vec![(Constant(0), Constant(1))]);
        // empty domain: only the empty map, repeated
        assert_eq!(e.at(&[], 0), vec![]);
        assert_eq!(e.at(&[], 9), vec![]);
    }

    #[test]
    fn direct_acceptance() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&d, &phi)]);
        let k = accepts(&m, &d, &phi, 1000).expect("direct route");
        assert!(k < 100, "accepted at {k}");
    }

    #[test]
    fn tautology_route() {
        // the machine accepts nothing at all
        let m = Program::new(vec![crate::machine::Instr::Reject]);
        let d = db(&[("P", &[0], 1)]);
        let k = accepts(&m, &d, &q("TRUE"), 1000).expect("taut route");
        assert!(k <= 4, "accepted at {k}");
        assert_eq!(accepts(&m, &d, &q("P(c0)"), 5000), None);
    }

    #[test]
    fn entailment_route() {
        // M accepts (D, P(c0)); P(c0) entails EX x. P(x)
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&d, &phi)]);
        let k = accepts(&m, &d, &q("EX x. P(x)"), 200_000).expect("entailment route");
        assert!(k < 100_000, "accepted at {k}");
    }

    #[test]
    fn extension_route() {
        // M accepts a strict sub-database pair
        let small = db(&[("P", &[0], 1)]);
        let big = db(&[("P", &[0], 1), ("P", &[1], 0)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&small, &phi)]);
        let k = accepts(&m, &big, &phi, 10_000).expect("extension route");
        assert!(k < 1000, "accepted at {k}");
    }

    #[test]
    fn renaming_route() {
        // M accepts ({P(c1)}, P(c1)); asking for ({P(c0)}, P(c0)) needs the
        // renaming c0 -> c1, two rungs into the ladder
        let d1 = db(&[("P", &[1], 1)]);
        let phi1 = q("P(c1)");
        let m = machine_for(&[(&d1, &phi1)]);
        let d0 = db(&[("P", &[0], 1)]);
        let k = accepts(&m, &d0, &q("P(c0)"), 200_000).expect("renaming route");
        assert!(k < 100_000, "accepted at {k}");
    }

    #[test]
    fn conjunction_route() {
        let d = db(&[("P", &[0], 1), ("P", &[1], 1)]);
        let chi = q("P(c0)");
        let eta = q("P(c1)");
        let m = machine_for(&[(&d, &chi), (&d, &eta)]);
        let k = accepts(&m, &d, &q("P(c0) & P(c1)"), 10_000).expect("conjunction route");
        assert!(k < 1000, "accepted at {k}");
    }

    #[test]
    fn soundness_smoke() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&d, &phi)]);
        // E(c0,c0) follows from nothing M accepts
        assert_eq!(accepts(&m, &d, &q("E(c0,c0)"), 20_000), None);
        // neither does P(c1)
        assert_eq!(accepts(&m, &d, &q("P(c1)"), 20_000), None);
    }

    #[test]
    fn acceptance_iteration_is_stable() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&d, &phi)]);
        let k1 = accepts(&m, &d, &phi, 5000).unwrap();
        let k2 = accepts(&m, &d, &phi, 5000).unwrap();
        assert_eq!(k1, k2);
        // more fuel does not change the acceptance point
        let k3 = accepts(&m, &d, &phi, 50_000).unwrap();
        assert_eq!(k1, k3);
    }

    #[test]
    fn trace_has_flip_only_on_accept() {
        let d = db(&[("P", &[0], 1)]);
        let phi = q("P(c0)");
        let m = machine_for(&[(&d, &phi)]);
        let mut e = Engine::new(world(), Rc::new(m.clone()), d.clone(), Rc::new(q("P(c1)")));
        e.enable_trace();
        assert_eq!(run_engine(&mut e, 3000).unwrap(), ClosureOutcome::Exhausted);
        let trace = e.take_trace();
        assert!(trace.iter().all(|ev| ev.event != "accept"));
        assert!(trace
            .iter()
            .all(|ev| !(ev.i == 0 && (ev.event == "flag" || ev.event == "succeed"))));
        let mut e = Engine::new(world(), Rc::new(m), d, Rc::new(phi));
        e.enable_trace();
        assert!(run_engine(&mut e, 3000).unwrap().accepted());
        assert!(e.take_trace().iter().any(|ev| ev.event == "accept"));
    }
}
