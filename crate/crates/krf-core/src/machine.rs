//! The string-register bytecode machine: programs over bit-string registers
//! with stepwise semantics, nested simulation, oracle instructions for the
//! decidable helpers, an injective self-delimiting binary encoding, padding,
//! and import of classical two-way-tape machine tables.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;

use crate::bits::{BitReader, Bits};
use crate::closure;
use crate::kr::{Constant, Database, Renaming, World};
use crate::query::{decode_query, encode_query, entails, Query};
use crate::{Error, Result};

pub type Reg = u32;

/// First byte of every theory string produced by the canonical formalism.
pub const THEORY_TAG: u8 = 0xa5;

/// Register that QUOTE loads the quoted data into, and that the recursion
/// constructions therefore reserve for "my own index".
pub const QUOTE_REG: Reg = 15;

#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub enum Instr {
    /// reg <- literal
    LoadC(Reg, Bits),
    /// reg <- machine input
    Input(Reg),
    /// r3 <- r1 ++ r2
    Concat(Reg, Reg, Reg),
    /// r3 <- "1" if r1 == r2 else "0"
    Eq(Reg, Reg, Reg),
    /// first <- leading bit of src (empty if src empty), rest <- remainder
    Split { src: Reg, first: Reg, rest: Reg },
    /// jump to target iff reg holds exactly "1"
    JumpIf(Reg, u32),
    Jump(u32),
    /// halt accepting; output is r0
    Accept,
    Reject,
    /// diverge
    Loop,
    Nop,
    /// decode code as a program and simulate it on input, one inner step per
    /// outer step; flag <- "1"/"0" for accept/reject, out <- output or empty;
    /// an undecodable code register costs one step and sets flag "0"
    Run { code: Reg, input: Reg, out: Reg, flag: Reg },
    /// out <- theory of the program that loads data into QUOTE_REG and then
    /// behaves as the decoded template; rejects if template does not decode
    Quote { template: Reg, data: Reg, out: Reg },
    /// r3 <- "1" iff r1 and r2 decode as queries and r1 entails r2
    OracleEntails(Reg, Reg, Reg),
    /// r2 <- "1" iff r1 encodes an injective renaming
    OracleRename(Reg, Reg),
    /// run the closure engine of the theory on the (database, query) input
    /// pair, one engine iteration per step; falls through on acceptance,
    /// never halts otherwise; malformed theory or input rejects
    OracleQa { theory: Reg, input: Reg },
    /// decide the Datalog consequence relation on the input pair in one
    /// step; falls through on yes, rejects on no or malformed input
    OracleDatalog { theory: Reg, input: Reg },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Program {
    pub instructions: Vec<Instr>,
}

impl Program {
    pub fn new(instructions: Vec<Instr>) -> Program {
        Program { instructions }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

// ---------------------------------------------------------------------------
// binary encoding
//
// One opcode byte, operands as LEB128 varints, literals as varint bit-length
// plus the bits padded with zeros to a byte boundary. Whole programs are the
// concatenation of their instructions; every program encoding is a whole
// number of bytes.

const OP_LOADC: u8 = 0x01;
const OP_INPUT: u8 = 0x02;
const OP_CONCAT: u8 = 0x03;
const OP_EQ: u8 = 0x04;
const OP_SPLIT: u8 = 0x05;
const OP_JUMPIF: u8 = 0x06;
const OP_JUMP: u8 = 0x07;
const OP_ACCEPT: u8 = 0x08;
const OP_REJECT: u8 = 0x09;
const OP_LOOP: u8 = 0x0a;
const OP_NOP: u8 = 0x0b;
const OP_RUN: u8 = 0x0c;
const OP_QUOTE: u8 = 0x0d;
const OP_ORACLE_ENTAILS: u8 = 0x10;
const OP_ORACLE_RENAME: u8 = 0x11;
const OP_ORACLE_QA: u8 = 0x12;
const OP_ORACLE_DATALOG: u8 = 0x13;

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn put_literal(out: &mut Vec<u8>, lit: &Bits) {
    put_varint(out, lit.len() as u64);
    let mut cur = 0u8;
    for (i, b) in lit.iter().enumerate() {
        cur = (cur << 1) | u8::from(b);
        if i % 8 == 7 {
            out.push(cur);
            cur = 0;
        }
    }
    let rem = lit.len() % 8;
    if rem != 0 {
        out.push(cur << (8 - rem));
    }
}

pub fn encode_instr(i: &Instr, out: &mut Vec<u8>) {
    match i {
        Instr::LoadC(r, lit) => {
            out.push(OP_LOADC);
            put_varint(out, *r as u64);
            put_literal(out, lit);
        }
        Instr::Input(r) => {
            out.push(OP_INPUT);
            put_varint(out, *r as u64);
        }
        Instr::Concat(a, b, c) => {
            out.push(OP_CONCAT);
            for r in [a, b, c] {
                put_varint(out, *r as u64);
            }
        }
        Instr::Eq(a, b, c) => {
            out.push(OP_EQ);
            for r in [a, b, c] {
                put_varint(out, *r as u64);
            }
        }
        Instr::Split { src, first, rest } => {
            out.push(OP_SPLIT);
            for r in [src, first, rest] {
                put_varint(out, *r as u64);
            }
        }
        Instr::JumpIf(r, t) => {
            out.push(OP_JUMPIF);
            put_varint(out, *r as u64);
            put_varint(out, *t as u64);
        }
        Instr::Jump(t) => {
            out.push(OP_JUMP);
            put_varint(out, *t as u64);
        }
        Instr::Accept => out.push(OP_ACCEPT),
        Instr::Reject => out.push(OP_REJECT),
        Instr::Loop => out.push(OP_LOOP),
        Instr::Nop => out.push(OP_NOP),
        Instr::Run { code, input, out: o, flag } => {
            out.push(OP_RUN);
            for r in [code, input, o, flag] {
                put_varint(out, *r as u64);
            }
        }
        Instr::Quote { template, data, out: o } => {
            out.push(OP_QUOTE);
            for r in [template, data, o] {
                put_varint(out, *r as u64);
            }
        }
        Instr::OracleEntails(a, b, c) => {
            out.push(OP_ORACLE_ENTAILS);
            for r in [a, b, c] {
                put_varint(out, *r as u64);
            }
        }
        Instr::OracleRename(a, b) => {
            out.push(OP_ORACLE_RENAME);
            for r in [a, b] {
                put_varint(out, *r as u64);
            }
        }
        Instr::OracleQa { theory, input } => {
            out.push(OP_ORACLE_QA);
            for r in [theory, input] {
                put_varint(out, *r as u64);
            }
        }
        Instr::OracleDatalog { theory, input } => {
            out.push(OP_ORACLE_DATALOG);
            for r in [theory, input] {
                put_varint(out, *r as u64);
            }
        }
    }
}

pub fn encode_program(p: &Program) -> Bits {
    let mut out = Vec::new();
    for i in &p.instructions {
        encode_instr(i, &mut out);
    }
    Bits::from_bytes(&out)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::DecodeError { offset: self.pos * 8, msg: msg.into() }
    }

    fn byte(&mut self) -> Result<u8> {
        let b = *self.bytes.get(self.pos).ok_or_else(|| self.err("truncated"))?;
        self.pos += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        let mut shift = 0u32;
        loop {
            let byte = self.byte()?;
            if shift >= 63 && byte > 1 {
                return Err(self.err("varint overflow"));
            }
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                if byte == 0 && shift > 0 {
                    return Err(self.err("non-minimal varint"));
                }
                return Ok(v);
            }
            shift += 7;
            if shift > 63 {
                return Err(self.err("varint overflow"));
            }
        }
    }

    fn reg(&mut self) -> Result<Reg> {
        let v = self.varint()?;
        Reg::try_from(v).map_err(|_| self.err("register index too large"))
    }

    fn target(&mut self) -> Result<u32> {
        let v = self.varint()?;
        u32::try_from(v).map_err(|_| self.err("jump target too large"))
    }

    fn literal(&mut self) -> Result<Bits> {
        let len = self.varint()? as usize;
        let nbytes = len.div_ceil(8);
        if self.pos + nbytes > self.bytes.len() {
            return Err(self.err("truncated literal"));
        }
        let raw = &self.bytes[self.pos..self.pos + nbytes];
        self.pos += nbytes;
        let mut out = Bits::new();
        for i in 0..len {
            out.push((raw[i / 8] >> (7 - (i % 8))) & 1 == 1);
        }
        // pad bits must be zero so the encoding stays injective
        for i in len..nbytes * 8 {
            if (raw[i / 8] >> (7 - (i % 8))) & 1 == 1 {
                return Err(self.err("nonzero literal padding"));
            }
        }
        Ok(out)
    }
}

pub fn decode_program(bits: &Bits) -> Result<Program> {
    let bytes = bits.as_bytes().ok_or(Error::DecodeError {
        offset: bits.len(),
        msg: "program encoding is not a whole number of bytes".into(),
    })?;
    if bytes.is_empty() {
        return Err(Error::DecodeError { offset: 0, msg: "empty program".into() });
    }
    let mut r = ByteReader { bytes, pos: 0 };
    let mut instructions = Vec::new();
    while r.pos < bytes.len() {
        let op = r.byte()?;
        let i = match op {
            OP_LOADC => Instr::LoadC(r.reg()?, r.literal()?),
            OP_INPUT => Instr::Input(r.reg()?),
            OP_CONCAT => Instr::Concat(r.reg()?, r.reg()?, r.reg()?),
            OP_EQ => Instr::Eq(r.reg()?, r.reg()?, r.reg()?),
            OP_SPLIT => Instr::Split { src: r.reg()?, first: r.reg()?, rest: r.reg()? },
            OP_JUMPIF => Instr::JumpIf(r.reg()?, r.target()?),
            OP_JUMP => Instr::Jump(r.target()?),
            OP_ACCEPT => Instr::Accept,
            OP_REJECT => Instr::Reject,
            OP_LOOP => Instr::Loop,
            OP_NOP => Instr::Nop,
            OP_RUN => Instr::Run { code: r.reg()?, input: r.reg()?, out: r.reg()?, flag: r.reg()? },
            OP_QUOTE => Instr::Quote { template: r.reg()?, data: r.reg()?, out: r.reg()? },
            OP_ORACLE_ENTAILS => Instr::OracleEntails(r.reg()?, r.reg()?, r.reg()?),
            OP_ORACLE_RENAME => Instr::OracleRename(r.reg()?, r.reg()?),
            OP_ORACLE_QA => Instr::OracleQa { theory: r.reg()?, input: r.reg()? },
            OP_ORACLE_DATALOG => Instr::OracleDatalog { theory: r.reg()?, input: r.reg()? },
            _ => return Err(r.err("unknown opcode")),
        };
        instructions.push(i);
    }
    Ok(Program { instructions })
}

/// Append k unreachable NOPs after the end of the program.
pub fn pad(p: &Program, k: usize) -> Program {
    let mut instructions = p.instructions.clone();
    instructions.extend(std::iter::repeat(Instr::Nop).take(k));
    Program { instructions }
}

// ---------------------------------------------------------------------------
// input pairing and auxiliary encodings

/// <a, b> = varint(|a|) ++ a ++ b.
pub fn pair_bits(a: &Bits, b: &Bits) -> Bits {
    let mut out = Bits::new();
    crate::bits::push_varint(&mut out, a.len() as u64);
    out.extend(a);
    out.extend(b);
    out
}

pub fn unpair_bits(p: &Bits) -> Option<(Bits, Bits)> {
    let mut r = BitReader::new(p);
    let n = r.read_varint()? as usize;
    let a = r.read_exact(n)?;
    let b = r.read_exact(r.remaining())?;
    Some((a, b))
}

/// The input string a machine sees for a (database, query) pair.
pub fn pair_input(db: &Database, q: &Query) -> Result<Bits> {
    let db_bits = Bits::from_bytes(db.canonical_text().as_bytes());
    let q_bits = encode_query(q, &db.sig)?;
    Ok(pair_bits(&db_bits, &q_bits))
}

pub fn parse_pair_input(input: &Bits, world: &World) -> Result<(Database, Query)> {
    let bad = |msg: &str| Error::DecodeError { offset: 0, msg: msg.into() };
    let (db_bits, q_bits) = unpair_bits(input).ok_or_else(|| bad("not a pair"))?;
    let db_bytes = db_bits.as_bytes().ok_or_else(|| bad("database part not byte-aligned"))?;
    let text = std::str::from_utf8(db_bytes).map_err(|_| bad("database part not UTF-8"))?;
    let db = Database::parse(text)?;
    if db.sig != world.sig {
        return Err(Error::SignatureMismatch("input database signature differs".into()));
    }
    if db.mode != world.mode {
        return Err(Error::SignatureMismatch("input database positivity differs".into()));
    }
    let q = decode_query(&q_bits, &world.sig)?;
    if !q.is_sentence() {
        return Err(bad("query part has free variables"));
    }
    Ok((db, q))
}

/// Renaming encoding: for each pair, a 1 bit then unary source and target;
/// a 0 bit terminates. Sources must be strictly increasing.
pub fn encode_renaming(t: &Renaming) -> Bits {
    let mut out = Bits::new();
    for (from, to) in t.entries() {
        out.push(true);
        crate::bits::push_unary(&mut out, from.0 as u64);
        crate::bits::push_unary(&mut out, to.0 as u64);
    }
    out.push(false);
    out
}

/// Decode the map; injectivity is not checked here.
pub fn decode_renaming_map(bits: &Bits) -> Option<Vec<(Constant, Constant)>> {
    let mut r = BitReader::new(bits);
    let mut pairs = Vec::new();
    let mut last: Option<u64> = None;
    loop {
        match r.read_bit()? {
            false => break,
            true => {
                let from = r.read_unary()?;
                let to = r.read_unary()?;
                if last.is_some_and(|l| from <= l) {
                    return None;
                }
                last = Some(from);
                pairs.push((
                    Constant(u32::try_from(from).ok()?),
                    Constant(u32::try_from(to).ok()?),
                ));
            }
        }
    }
    if r.remaining() != 0 {
        return None;
    }
    Some(pairs)
}

/// Theory string of a program under the canonical formalism.
pub fn mk_theory(p: &Program) -> Bits {
    let mut out = Bits::new();
    out.push_byte(THEORY_TAG);
    out.extend(&encode_program(p));
    out
}

/// The program of a theory string, if it is one.
pub fn theory_program(theory: &Bits) -> Result<Program> {
    let bytes = theory.as_bytes().ok_or(Error::InvalidTheory)?;
    if bytes.first() != Some(&THEORY_TAG) {
        return Err(Error::InvalidTheory);
    }
    decode_program(&Bits::from_bytes(&bytes[1..])).map_err(|_| Error::InvalidTheory)
}

fn shift_jumps(p: &Program, by: u32) -> Program {
    let instructions = p
        .instructions
        .iter()
        .map(|i| match i {
            Instr::Jump(t) => Instr::Jump(t.saturating_add(by)),
            Instr::JumpIf(r, t) => Instr::JumpIf(*r, t.saturating_add(by)),
            other => other.clone(),
        })
        .collect();
    Program { instructions }
}

/// What QUOTE computes: the theory of "load data into QUOTE_REG, then run
/// the template".
pub fn quote(template: &Program, data: &Bits) -> Bits {
    let mut instructions = vec![Instr::LoadC(QUOTE_REG, data.clone())];
    instructions.extend(shift_jumps(template, 1).instructions);
    mk_theory(&Program { instructions })
}

// ---------------------------------------------------------------------------
// execution

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    AcceptedWith { output: Bits, steps: u64 },
    Rejected { steps: u64 },
    Exhausted,
}

impl Outcome {
    pub fn accepted(&self) -> bool {
        matches!(self, Outcome::AcceptedWith { .. })
    }
}

#[derive(Debug)]
pub enum Status {
    Running,
    Accepted(Bits),
    Rejected,
}

pub struct MachineState {
    program: Rc<Program>,
    world: Rc<World>,
    input: Bits,
    ip: usize,
    regs: HashMap<Reg, Bits>,
    steps: u64,
    frame: Option<Box<Frame>>,
}

enum Frame {
    Run { inner: MachineState, out: Reg, flag: Reg },
    Qa { engine: closure::Engine },
}

impl MachineState {
    pub fn new(program: Rc<Program>, world: Rc<World>, input: Bits) -> MachineState {
        MachineState {
            program,
            world,
            input,
            ip: 0,
            regs: HashMap::new(),
            steps: 0,
            frame: None,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn reg(&self, r: Reg) -> Bits {
        self.regs.get(&r).cloned().unwrap_or_default()
    }

    fn set(&mut self, r: Reg, v: Bits) {
        self.regs.insert(r, v);
    }

    /// Execute exactly one step.
    pub fn step(&mut self) -> Result<Status> {
        self.steps += 1;
        if self.frame.is_some() {
            return self.advance_frame();
        }
        self.exec()
    }

    fn advance_frame(&mut self) -> Result<Status> {
        let mut frame = self.frame.take().expect("frame present");
        match &mut *frame {
            Frame::Run { inner, out, flag } => match inner.advance_inner()? {
                Status::Running => {
                    self.frame = Some(frame);
                    Ok(Status::Running)
                }
                Status::Accepted(output) => {
                    let (out, flag) = (*out, *flag);
                    self.set(out, output);
                    self.set(flag, Bits::from_str01("1").unwrap());
                    self.ip += 1;
                    Ok(Status::Running)
                }
                Status::Rejected => {
                    let (out, flag) = (*out, *flag);
                    self.set(out, Bits::new());
                    self.set(flag, Bits::from_str01("0").unwrap());
                    self.ip += 1;
                    Ok(Status::Running)
                }
            },
            Frame::Qa { engine } => match engine.step()? {
                closure::EngineStep::Accepted => {
                    self.ip += 1;
                    Ok(Status::Running)
                }
                closure::EngineStep::Running => {
                    self.frame = Some(frame);
                    Ok(Status::Running)
                }
            },
        }
    }

    /// One micro-step of a nested simulation; bumps this frame's counter too
    /// so nested step accounting stays 1-for-1 at every depth.
    fn advance_inner(&mut self) -> Result<Status> {
        self.step()
    }

    fn exec(&mut self) -> Result<Status> {
        let Some(instr) = self.program.instructions.get(self.ip).cloned() else {
            // fell off the end
            return Ok(Status::Rejected);
        };
        match instr {
            Instr::LoadC(r, lit) => {
                self.set(r, lit);
                self.ip += 1;
            }
            Instr::Input(r) => {
                let v = self.input.clone();
                self.set(r, v);
                self.ip += 1;
            }
            Instr::Concat(a, b, c) => {
                let v = self.reg(a).concat(&self.reg(b));
                self.set(c, v);
                self.ip += 1;
            }
            Instr::Eq(a, b, c) => {
                let v = self.reg(a) == self.reg(b);
                self.set(c, flag_bits(v));
                self.ip += 1;
            }
            Instr::Split { src, first, rest } => {
                let v = self.reg(src);
                match v.split_first() {
                    Some((head, tail)) => {
                        self.set(first, flag_bits(head));
                        self.set(rest, tail);
                    }
                    None => {
                        self.set(first, Bits::new());
                        self.set(rest, Bits::new());
                    }
                }
                self.ip += 1;
            }
            Instr::JumpIf(r, t) => {
                if self.reg(r) == flag_bits(true) {
                    self.ip = t as usize;
                } else {
                    self.ip += 1;
                }
            }
            Instr::Jump(t) => {
                self.ip = t as usize;
            }
            Instr::Accept => return Ok(Status::Accepted(self.reg(0))),
            Instr::Reject => return Ok(Status::Rejected),
            Instr::Loop => {}
            Instr::Nop => {
                self.ip += 1;
            }
            Instr::Run { code, input, out, flag } => match decode_program(&self.reg(code)) {
                Err(_) => {
                    self.set(out, Bits::new());
                    self.set(flag, flag_bits(false));
                    self.ip += 1;
                }
                Ok(p) => {
                    let inner =
                        MachineState::new(Rc::new(p), self.world.clone(), self.reg(input));
                    self.frame = Some(Box::new(Frame::Run { inner, out, flag }));
                    // the first inner step happens in this same outer step
                    return self.advance_frame();
                }
            },
            Instr::Quote { template, data, out } => {
                match decode_program(&self.reg(template)) {
                    Err(_) => return Ok(Status::Rejected),
                    Ok(p) => {
                        let v = quote(&p, &self.reg(data));
                        self.set(out, v);
                        self.ip += 1;
                    }
                }
            }
            Instr::OracleEntails(a, b, c) => {
                let pa = decode_query(&self.reg(a), &self.world.sig);
                let pb = decode_query(&self.reg(b), &self.world.sig);
                let v = match (pa, pb) {
                    (Ok(x), Ok(y)) if x.is_sentence() && y.is_sentence() => entails(&x, &y)?,
                    _ => false,
                };
                self.set(c, flag_bits(v));
                self.ip += 1;
            }
            Instr::OracleRename(a, b) => {
                let v = decode_renaming_map(&self.reg(a))
                    .is_some_and(|pairs| Renaming::new(pairs).is_ok());
                self.set(b, flag_bits(v));
                self.ip += 1;
            }
            Instr::OracleQa { theory, input } => {
                let Ok(base) = theory_program(&self.reg(theory)) else {
                    return Ok(Status::Rejected);
                };
                let Ok((db, q)) = parse_pair_input(&self.reg(input), &self.world) else {
                    return Ok(Status::Rejected);
                };
                let engine =
                    closure::Engine::new(self.world.clone(), Rc::new(base), db, Rc::new(q));
                self.frame = Some(Box::new(Frame::Qa { engine }));
                // the first engine iteration happens in this same outer step
                return self.advance_frame();
            }
            Instr::OracleDatalog { theory, input } => {
                let Some(bytes) = self.reg(theory).as_bytes().map(|b| b.to_vec()) else {
                    return Ok(Status::Rejected);
                };
                let Ok(text) = String::from_utf8(bytes) else {
                    return Ok(Status::Rejected);
                };
                let Ok(t) = crate::formalisms::DatalogTheory::parse(&text) else {
                    return Ok(Status::Rejected);
                };
                let Ok((db, q)) = parse_pair_input(&self.reg(input), &self.world) else {
                    return Ok(Status::Rejected);
                };
                if !crate::formalisms::datalog_qa(&t, &db, &q)? {
                    return Ok(Status::Rejected);
                }
                self.ip += 1;
            }
        }
        Ok(Status::Running)
    }
}

fn flag_bits(b: bool) -> Bits {
    Bits::from_str01(if b { "1" } else { "0" }).unwrap()
}

pub fn run(p: &Program, input: &Bits, world: Rc<World>, fuel: u64) -> Result<Outcome> {
    let mut s = MachineState::new(Rc::new(p.clone()), world, input.clone());
    run_state(&mut s, fuel)
}

pub fn run_state(s: &mut MachineState, fuel: u64) -> Result<Outcome> {
    for _ in 0..fuel {
        match s.step()? {
            Status::Running => {}
            Status::Accepted(output) => {
                return Ok(Outcome::AcceptedWith { output, steps: s.steps })
            }
            Status::Rejected => return Ok(Outcome::Rejected { steps: s.steps }),
        }
    }
    Ok(Outcome::Exhausted)
}

// ---------------------------------------------------------------------------
// text format

impl std::fmt::Display for Instr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Instr::LoadC(r, lit) => write!(f, "LOADC r{r} {}", lit.to_hex()),
            Instr::Input(r) => write!(f, "INPUT r{r}"),
            Instr::Concat(a, b, c) => write!(f, "CONCAT r{a} r{b} r{c}"),
            Instr::Eq(a, b, c) => write!(f, "EQ r{a} r{b} r{c}"),
            Instr::Split { src, first, rest } => write!(f, "SPLIT r{src} r{first} r{rest}"),
            Instr::JumpIf(r, t) => write!(f, "JUMPIF r{r} {t}"),
            Instr::Jump(t) => write!(f, "JUMP {t}"),
            Instr::Accept => write!(f, "ACCEPT"),
            Instr::Reject => write!(f, "REJECT"),
            Instr::Loop => write!(f, "LOOP"),
            Instr::Nop => write!(f, "NOP"),
            Instr::Run { code, input, out, flag } => {
                write!(f, "RUN r{code} r{input} r{out} r{flag}")
            }
            Instr::Quote { template, data, out } => write!(f, "QUOTE r{template} r{data} r{out}"),
            Instr::OracleEntails(a, b, c) => write!(f, "ORACLE_ENTAILS r{a} r{b} r{c}"),
            Instr::OracleRename(a, b) => write!(f, "ORACLE_RENAME r{a} r{b}"),
            Instr::OracleQa { theory, input } => write!(f, "ORACLE_QA r{theory} r{input}"),
            Instr::OracleDatalog { theory, input } => {
                write!(f, "ORACLE_DATALOG r{theory} r{input}")
            }
        }
    }
}

pub fn print_sbm(p: &Program) -> String {
    let mut s = String::new();
    for i in &p.instructions {
        s.push_str(&i.to_string());
        s.push('\n');
    }
    s
}

/// Parse the one-instruction-per-line text format. A line `Lname:` defines a
/// label; jump targets are labels or absolute instruction indices. Literals
/// are `len:hex`, a plain 01-string, or `-` for the empty string.
pub fn parse_sbm(text: &str) -> Result<Program> {
    enum RawTarget {
        Abs(u32),
        Label(String),
    }
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut raw: Vec<(usize, Vec<String>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_suffix(':') {
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(Error::Syntax { pos: lineno, msg: "bad label".into() });
            }
            if labels.insert(name.to_string(), raw.len() as u32).is_some() {
                return Err(Error::Syntax { pos: lineno, msg: format!("duplicate label {name}") });
            }
            continue;
        }
        raw.push((lineno, line.split_whitespace().map(str::to_string).collect()));
    }
    let reg = |tok: &str, lineno: usize| -> Result<Reg> {
        tok.strip_prefix('r')
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Syntax { pos: lineno, msg: format!("bad register {tok}") })
    };
    let lit = |tok: &str, lineno: usize| -> Result<Bits> {
        if tok == "-" {
            return Ok(Bits::new());
        }
        let parsed = if tok.contains(':') { Bits::from_hex(tok) } else { Bits::from_str01(tok) };
        parsed.ok_or_else(|| Error::Syntax { pos: lineno, msg: format!("bad literal {tok}") })
    };
    let target = |tok: &str| -> RawTarget {
        match tok.parse() {
            Ok(n) => RawTarget::Abs(n),
            Err(_) => RawTarget::Label(tok.to_string()),
        }
    };
    let resolve = |t: RawTarget, lineno: usize| -> Result<u32> {
        match t {
            RawTarget::Abs(n) => Ok(n),
            RawTarget::Label(name) => labels
                .get(&name)
                .copied()
                .ok_or_else(|| Error::Syntax { pos: lineno, msg: format!("unknown label {name}") }),
        }
    };
    let mut instructions = Vec::with_capacity(raw.len());
    for (lineno, toks) in &raw {
        let lineno = *lineno;
        let args = &toks[1..];
        let need = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Syntax {
                    pos: lineno,
                    msg: format!("{} expects {n} operands, got {}", toks[0], args.len()),
                })
            }
        };
        let i = match toks[0].as_str() {
            "LOADC" => {
                need(2)?;
                Instr::LoadC(reg(&args[0], lineno)?, lit(&args[1], lineno)?)
            }
            "INPUT" => {
                need(1)?;
                Instr::Input(reg(&args[0], lineno)?)
            }
            "CONCAT" => {
                need(3)?;
                Instr::Concat(reg(&args[0], lineno)?, reg(&args[1], lineno)?, reg(&args[2], lineno)?)
            }
            "EQ" => {
                need(3)?;
                Instr::Eq(reg(&args[0], lineno)?, reg(&args[1], lineno)?, reg(&args[2], lineno)?)
            }
            "SPLIT" => {
                need(3)?;
                Instr::Split {
                    src: reg(&args[0], lineno)?,
                    first: reg(&args[1], lineno)?,
                    rest: reg(&args[2], lineno)?,
                }
            }
            "JUMPIF" => {
                need(2)?;
                Instr::JumpIf(reg(&args[0], lineno)?, resolve(target(&args[1]), lineno)?)
            }
            "JUMP" => {
                need(1)?;
                Instr::Jump(resolve(target(&args[0]), lineno)?)
            }
            "ACCEPT" => {
                need(0)?;
                Instr::Accept
            }
            "REJECT" => {
                need(0)?;
                Instr::Reject
            }
            "LOOP" => {
                need(0)?;
                Instr::Loop
            }
            "NOP" => {
                need(0)?;
                Instr::Nop
            }
            "RUN" => {
                need(4)?;
                Instr::Run {
                    code: reg(&args[0], lineno)?,
                    input: reg(&args[1], lineno)?,
                    out: reg(&args[2], lineno)?,
                    flag: reg(&args[3], lineno)?,
                }
            }
            "QUOTE" => {
                need(3)?;
                Instr::Quote {
                    template: reg(&args[0], lineno)?,
                    data: reg(&args[1], lineno)?,
                    out: reg(&args[2], lineno)?,
                }
            }
            "ORACLE_ENTAILS" => {
                need(3)?;
                Instr::OracleEntails(
                    reg(&args[0], lineno)?,
                    reg(&args[1], lineno)?,
                    reg(&args[2], lineno)?,
                )
            }
            "ORACLE_RENAME" => {
                need(2)?;
                Instr::OracleRename(reg(&args[0], lineno)?, reg(&args[1], lineno)?)
            }
            "ORACLE_QA" => {
                need(2)?;
                Instr::OracleQa { theory: reg(&args[0], lineno)?, input: reg(&args[1], lineno)? }
            }
            "ORACLE_DATALOG" => {
                need(2)?;
                Instr::OracleDatalog {
                    theory: reg(&args[0], lineno)?,
                    input: reg(&args[1], lineno)?,
                }
            }
            other => {
                return Err(Error::Syntax { pos: lineno, msg: format!("unknown mnemonic {other}") })
            }
        };
        instructions.push(i);
    }
    Ok(Program { instructions })
}

// ---------------------------------------------------------------------------
// common constructions

/// A machine that accepts exactly the listed input strings and rejects all
/// others.
pub fn accept_exactly(inputs: &[Bits]) -> Program {
    let mut instructions = vec![Instr::Input(0)];
    // each case: LOADC, EQ, JUMPIF accept
    let accept_at = (1 + 3 * inputs.len() + 1) as u32;
    for lit in inputs {
        instructions.push(Instr::LoadC(1, lit.clone()));
        instructions.push(Instr::Eq(0, 1, 2));
        instructions.push(Instr::JumpIf(2, accept_at));
    }
    instructions.push(Instr::Reject);
    instructions.push(Instr::Accept);
    Program { instructions }
}

// ---------------------------------------------------------------------------
// classical machine tables

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum TapeSym {
    Zero,
    One,
    Blank,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Move {
    L,
    R,
}

#[derive(Clone, Debug)]
pub struct TmTable {
    pub states: Vec<String>,
    pub start: String,
    pub yes: Vec<String>,
    pub no: Vec<String>,
    pub transitions: HashMap<(String, TapeSym), (String, TapeSym, Move)>,
}

impl TmTable {
    pub fn parse(text: &str) -> Result<TmTable> {
        let mut start = None;
        let mut yes = Vec::new();
        let mut no = Vec::new();
        let mut transitions = HashMap::new();
        let mut states = Vec::new();
        let seen = |s: &str, states: &mut Vec<String>| {
            if !states.iter().any(|x| x == s) {
                states.push(s.to_string());
            }
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::MalformedTable(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix("start:") {
                start = Some(rest.trim().to_string());
                seen(rest.trim(), &mut states);
                continue;
            }
            if let Some(rest) = line.strip_prefix("yes:") {
                for s in rest.split_whitespace() {
                    yes.push(s.to_string());
                    seen(s, &mut states);
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix("no:") {
                for s in rest.split_whitespace() {
                    no.push(s.to_string());
                    seen(s, &mut states);
                }
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| err("expected `q,s -> q',s',L|R`".into()))?;
            let lhs: Vec<&str> = lhs.split(',').map(str::trim).collect();
            let rhs: Vec<&str> = rhs.split(',').map(str::trim).collect();
            if lhs.len() != 2 || rhs.len() != 3 {
                return Err(err("expected `q,s -> q',s',L|R`".into()));
            }
            let sym = |s: &str| match s {
                "0" => Ok(TapeSym::Zero),
                "1" => Ok(TapeSym::One),
                "B" => Ok(TapeSym::Blank),
                other => Err(err(format!("bad symbol {other}"))),
            };
            let mv = match rhs[2] {
                "L" => Move::L,
                "R" => Move::R,
                other => return Err(err(format!("bad move {other}"))),
            };
            seen(lhs[0], &mut states);
            seen(rhs[0], &mut states);
            let key = (lhs[0].to_string(), sym(lhs[1])?);
            if transitions
                .insert(key, (rhs[0].to_string(), sym(rhs[1])?, mv))
                .is_some()
            {
                return Err(err(format!("duplicate transition for ({}, {})", lhs[0], lhs[1])));
            }
        }
        let start = start.ok_or_else(|| Error::MalformedTable("missing start state".into()))?;
        for s in yes.iter().chain(&no) {
            if transitions.keys().any(|(q, _)| q == s) {
                return Err(Error::MalformedTable(format!(
                    "halting state {s} has outgoing transitions"
                )));
            }
        }
        if yes.iter().any(|s| no.contains(s)) {
            return Err(Error::MalformedTable("a state is both yes and no".into()));
        }
        Ok(TmTable { states, start, yes, no, transitions })
    }
}

const SYM_BITS: [(TapeSym, &str); 3] =
    [(TapeSym::Zero, "00"), (TapeSym::One, "01"), (TapeSym::Blank, "10")];

fn sym_bits(s: TapeSym) -> Bits {
    Bits::from_str01(SYM_BITS.iter().find(|(x, _)| *x == s).unwrap().1).unwrap()
}

/// Compile a machine table into a program that simulates it step for step.
/// Tape layout: r2 holds the tape from the head rightward and r1 the tape
/// left of the head nearest-first, two bits per symbol. The output on
/// acceptance is the written tape with blanks dropped.
pub fn compile_tm(t: &TmTable) -> Result<Program> {
    // registers: r0 output accumulator, r1 left, r2 right, r3 raw input,
    // r4/r5 scratch bits, r6 scratch, r7 always empty, r8 symbol scratch
    let mut asm = Asm::new();
    asm.emit(Instr::Input(3));
    asm.emit(Instr::LoadC(7, Bits::new()));
    // convert the 01 input to symbol pairs on the right tape
    asm.label("conv");
    asm.emit(Instr::Eq(3, 7, 4));
    asm.jump_if(4, &format!("state_{}", t.start));
    asm.emit(Instr::Split { src: 3, first: 4, rest: 3 });
    asm.jump_if(4, "conv1");
    asm.emit(Instr::LoadC(8, sym_bits(TapeSym::Zero)));
    asm.jump("convpush");
    asm.label("conv1");
    asm.emit(Instr::LoadC(8, sym_bits(TapeSym::One)));
    asm.label("convpush");
    asm.emit(Instr::Concat(2, 8, 2));
    asm.jump("conv");

    for q in &t.states {
        asm.label(&format!("state_{q}"));
        if t.yes.contains(q) {
            asm.jump("halt_yes");
            continue;
        }
        if t.no.contains(q) || !t.transitions.keys().any(|(s, _)| s == q) {
            asm.jump("halt_no");
            continue;
        }
        // read the head symbol into bits r4 r5, popping it from the right
        asm.emit(Instr::Eq(2, 7, 4));
        asm.jump_if(4, &format!("q_{q}_blank"));
        asm.emit(Instr::Split { src: 2, first: 4, rest: 2 });
        asm.emit(Instr::Split { src: 2, first: 5, rest: 2 });
        asm.jump_if(4, &format!("q_{q}_blankpopped"));
        asm.jump_if(5, &format!("q_{q}_one"));
        asm.dispatch(t, q, TapeSym::Zero);
        asm.label(&format!("q_{q}_one"));
        asm.dispatch(t, q, TapeSym::One);
        // a blank read from the stored tape vs. the infinite blank fringe
        asm.label(&format!("q_{q}_blank"));
        asm.label(&format!("q_{q}_blankpopped"));
        asm.dispatch(t, q, TapeSym::Blank);
    }

    // collect output: unwind the left tape prepending bits, then walk the
    // right tape appending them; blanks contribute nothing
    asm.label("halt_yes");
    asm.label("hy_left");
    asm.emit(Instr::Eq(1, 7, 4));
    asm.jump_if(4, "hy_right");
    asm.emit(Instr::Split { src: 1, first: 4, rest: 1 });
    asm.emit(Instr::Split { src: 1, first: 5, rest: 1 });
    asm.jump_if(4, "hy_left"); // blank
    asm.jump_if(5, "hy_left_one");
    asm.emit(Instr::LoadC(8, Bits::from_str01("0").unwrap()));
    asm.jump("hy_left_push");
    asm.label("hy_left_one");
    asm.emit(Instr::LoadC(8, Bits::from_str01("1").unwrap()));
    asm.label("hy_left_push");
    asm.emit(Instr::Concat(8, 0, 0));
    asm.jump("hy_left");
    asm.label("hy_right");
    asm.emit(Instr::Eq(2, 7, 4));
    asm.jump_if(4, "hy_done");
    asm.emit(Instr::Split { src: 2, first: 4, rest: 2 });
    asm.emit(Instr::Split { src: 2, first: 5, rest: 2 });
    asm.jump_if(4, "hy_right"); // blank
    asm.jump_if(5, "hy_right_one");
    asm.emit(Instr::LoadC(8, Bits::from_str01("0").unwrap()));
    asm.jump("hy_right_push");
    asm.label("hy_right_one");
    asm.emit(Instr::LoadC(8, Bits::from_str01("1").unwrap()));
    asm.label("hy_right_push");
    asm.emit(Instr::Concat(0, 8, 0));
    asm.jump("hy_right");
    asm.label("hy_done");
    asm.emit(Instr::Accept);
    asm.label("halt_no");
    asm.emit(Instr::Reject);

    asm.finish()
}

impl Asm {
    /// Code for state q when the head reads `sym` (already popped off r2).
    fn dispatch(&mut self, t: &TmTable, q: &str, sym: TapeSym) {
        match t.transitions.get(&(q.to_string(), sym)) {
            None => {
                // halt in q with the symbol restored under the head
                self.emit(Instr::LoadC(8, sym_bits(sym)));
                self.emit(Instr::Concat(8, 2, 2));
                self.jump(if t.yes.iter().any(|s| s == q) { "halt_yes" } else { "halt_no" });
            }
            Some((q2, sym2, mv)) => {
                let q2 = q2.clone();
                match mv {
                    Move::R => {
                        // written symbol becomes the nearest left symbol
                        self.emit(Instr::LoadC(8, sym_bits(*sym2)));
                        self.emit(Instr::Concat(8, 1, 1));
                    }
                    Move::L => {
                        // written symbol goes back under-right, then the
                        // nearest left symbol moves under the head
                        self.emit(Instr::LoadC(8, sym_bits(*sym2)));
                        self.emit(Instr::Concat(8, 2, 2));
                        let tag = format!("mvl_{}_{}_{:?}", q, self.fresh(), sym);
                        self.emit(Instr::Eq(1, 7, 4));
                        self.jump_if(4, &format!("{tag}_fringe"));
                        self.emit(Instr::Split { src: 1, first: 4, rest: 1 });
                        self.emit(Instr::Split { src: 1, first: 5, rest: 1 });
                        self.jump_if(4, &format!("{tag}_fringe"));
                        self.jump_if(5, &format!("{tag}_one"));
                        self.emit(Instr::LoadC(8, sym_bits(TapeSym::Zero)));
                        self.jump(&format!("{tag}_push"));
                        self.label(&format!("{tag}_one"));
                        self.emit(Instr::LoadC(8, sym_bits(TapeSym::One)));
                        self.jump(&format!("{tag}_push"));
                        self.label(&format!("{tag}_fringe"));
                        self.emit(Instr::LoadC(8, sym_bits(TapeSym::Blank)));
                        self.label(&format!("{tag}_push"));
                        self.emit(Instr::Concat(8, 2, 2));
                    }
                }
                self.jump(&format!("state_{q2}"));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// label-resolving builder

pub struct Asm {
    instructions: Vec<Instr>,
    labels: HashMap<String, u32>,
    fixups: Vec<(usize, String)>,
    counter: usize,
}

impl Default for Asm {
    fn default() -> Self {
        Asm::new()
    }
}

impl Asm {
    pub fn new() -> Asm {
        Asm { instructions: Vec::new(), labels: HashMap::new(), fixups: Vec::new(), counter: 0 }
    }

    pub fn emit(&mut self, i: Instr) {
        self.instructions.push(i);
    }

    pub fn label(&mut self, name: &str) {
        let at = self.instructions.len() as u32;
        assert!(
            self.labels.insert(name.to_string(), at).is_none(),
            "duplicate label {name}"
        );
    }

    pub fn jump(&mut self, label: &str) {
        self.fixups.push((self.instructions.len(), label.to_string()));
        self.instructions.push(Instr::Jump(u32::MAX));
    }

    pub fn jump_if(&mut self, reg: Reg, label: &str) {
        self.fixups.push((self.instructions.len(), label.to_string()));
        self.instructions.push(Instr::JumpIf(reg, u32::MAX));
    }

    fn fresh(&mut self) -> usize {
        self.counter += 1;
        self.counter
    }

    pub fn finish(mut self) -> Result<Program> {
        for (at, label) in &self.fixups {
            let target = *self
                .labels
                .get(label)
                .ok_or_else(|| Error::Invalid(format!("unresolved label {label}")))?;
            match &mut self.instructions[*at] {
                Instr::Jump(t) | Instr::JumpIf(_, t) => *t = target,
                _ => unreachable!(),
            }
        }
        Ok(Program { instructions: self.instructions })
    }
}

// ---------------------------------------------------------------------------
// program generators

/// Every instruction over a small operand space: registers < `regs`,
/// literals of length <= `lit_len`, jump targets < `targets`.
pub fn bounded_instrs(regs: Reg, lit_len: usize, targets: u32) -> Vec<Instr> {
    let mut lits = vec![Bits::new()];
    for len in 1..=lit_len {
        for v in 0u32..(1 << len) {
            let mut b = Bits::new();
            for i in (0..len).rev() {
                b.push(v >> i & 1 == 1);
            }
            lits.push(b);
        }
    }
    let rs: Vec<Reg> = (0..regs).collect();
    let ts: Vec<u32> = (0..targets).collect();
    let mut out = vec![Instr::Accept, Instr::Reject, Instr::Loop, Instr::Nop];
    for &a in &rs {
        out.push(Instr::Input(a));
        for lit in &lits {
            out.push(Instr::LoadC(a, lit.clone()));
        }
        for &t in &ts {
            out.push(Instr::JumpIf(a, t));
        }
        for &b in &rs {
            out.push(Instr::OracleRename(a, b));
            out.push(Instr::OracleQa { theory: a, input: b });
            out.push(Instr::OracleDatalog { theory: a, input: b });
            for &c in &rs {
                out.push(Instr::Concat(a, b, c));
                out.push(Instr::Eq(a, b, c));
                out.push(Instr::Split { src: a, first: b, rest: c });
                out.push(Instr::Quote { template: a, data: b, out: c });
                out.push(Instr::OracleEntails(a, b, c));
                for &d in &rs {
                    out.push(Instr::Run { code: a, input: b, out: c, flag: d });
                }
            }
        }
    }
    for &t in &ts {
        out.push(Instr::Jump(t));
    }
    out
}

/// All programs of length <= max_len over the bounded instruction space.
pub fn enum_programs(max_len: usize, regs: Reg, lit_len: usize, targets: u32) -> Vec<Program> {
    let instrs = bounded_instrs(regs, lit_len, targets);
    let mut out = Vec::new();
    let mut level: Vec<Vec<Instr>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &level {
            for i in &instrs {
                let mut p = prefix.clone();
                p.push(i.clone());
                out.push(Program { instructions: p.clone() });
                next.push(p);
            }
        }
        level = next;
    }
    out
}

pub fn random_program(rng: &mut impl Rng) -> Program {
    let len = rng.gen_range(1..=8);
    let instructions = (0..len).map(|_| random_instr(rng, len as u32)).collect();
    Program { instructions }
}

fn random_instr(rng: &mut impl Rng, targets: u32) -> Instr {
    let r = |rng: &mut dyn rand::RngCore| -> Reg { rng.gen_range(0..6) };
    match rng.gen_range(0..17) {
        0 => {
            let len = rng.gen_range(0..=12);
            let mut b = Bits::new();
            for _ in 0..len {
                b.push(rng.gen());
            }
            Instr::LoadC(r(rng), b)
        }
        1 => Instr::Input(r(rng)),
        2 => Instr::Concat(r(rng), r(rng), r(rng)),
        3 => Instr::Eq(r(rng), r(rng), r(rng)),
        4 => Instr::Split { src: r(rng), first: r(rng), rest: r(rng) },
        5 => Instr::JumpIf(r(rng), rng.gen_range(0..targets.max(1))),
        6 => Instr::Jump(rng.gen_range(0..targets.max(1))),
        7 => Instr::Accept,
        8 => Instr::Reject,
        9 => Instr::Loop,
        10 => Instr::Nop,
        11 => Instr::Run { code: r(rng), input: r(rng), out: r(rng), flag: r(rng) },
        12 => Instr::Quote { template: r(rng), data: r(rng), out: r(rng) },
        13 => Instr::OracleEntails(r(rng), r(rng), r(rng)),
        14 => Instr::OracleRename(r(rng), r(rng)),
        15 => Instr::OracleQa { theory: rng.gen_range(0..6), input: rng.gen_range(0..6) },
        _ => Instr::OracleDatalog { theory: rng.gen_range(0..6), input: rng.gen_range(0..6) },
    }
}

/// A random program that halts on every input: only forward jumps, no LOOP,
/// RUN or oracle instructions, and a terminator on every fallthrough path.
pub fn random_halting_program(rng: &mut impl Rng) -> Program {
    let body = rng.gen_range(1..=10);
    let len = (body + 1) as u32;
    let mut instructions = Vec::new();
    for at in 0..body {
        let r = |rng: &mut dyn rand::RngCore| -> Reg { rng.gen_range(0..4) };
        let i = match rng.gen_range(0..8) {
            0 => {
                let n = rng.gen_range(0..=4);
                let mut b = Bits::new();
                for _ in 0..n {
                    b.push(rng.gen());
                }
                Instr::LoadC(r(rng), b)
            }
            1 => Instr::Input(r(rng)),
            2 => Instr::Concat(r(rng), r(rng), r(rng)),
            3 => Instr::Eq(r(rng), r(rng), r(rng)),
            4 => Instr::Split { src: r(rng), first: r(rng), rest: r(rng) },
            5 => Instr::JumpIf(r(rng), rng.gen_range(at as u32 + 1..=len)),
            6 => Instr::Accept,
            _ => Instr::Reject,
        };
        instructions.push(i);
    }
    instructions.push(if rng.gen() { Instr::Accept } else { Instr::Reject });
    Program { instructions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::{PredMode, Positivity, Predicate, Signature};

    fn world() -> Rc<World> {
        World::new(
            Rc::new(
                Signature::new(vec![
                    Predicate { name: "P".into(), arity: 1, mode: PredMode::Owa },
                    Predicate { name: "E".into(), arity: 2, mode: PredMode::Owa },
                ])
                .unwrap(),
            ),
            Positivity::All,
        )
    }

    fn b(s: &str) -> Bits {
        Bits::from_str01(s).unwrap()
    }

    #[test]
    fn trivial_runs() {
        let w = world();
        let p = Program::new(vec![Instr::Accept]);
        assert_eq!(
            run(&p, &b("1"), w.clone(), 10).unwrap(),
            Outcome::AcceptedWith { output: Bits::new(), steps: 1 }
        );
        let p = Program::new(vec![Instr::Loop]);
        assert_eq!(run(&p, &Bits::new(), w.clone(), 1000).unwrap(), Outcome::Exhausted);
        let ident = Program::new(vec![Instr::Input(0), Instr::Accept]);
        assert_eq!(
            run(&ident, &b("101"), w, 10).unwrap(),
            Outcome::AcceptedWith { output: b("101"), steps: 2 }
        );
    }

    #[test]
    fn run_is_one_for_one() {
        let w = world();
        let ident = Program::new(vec![Instr::Input(0), Instr::Accept]);
        let outer = Program::new(vec![
            Instr::LoadC(1, encode_program(&ident)),
            Instr::LoadC(2, b("1101")),
            Instr::Run { code: 1, input: 2, out: 3, flag: 4 },
            Instr::Input(0),
            Instr::Eq(3, 2, 0),
            Instr::Accept,
        ]);
        // 2 loads + 2 inner steps + input + eq + accept
        match run(&outer, &Bits::new(), w.clone(), 100).unwrap() {
            Outcome::AcceptedWith { output, steps } => {
                assert_eq!(steps, 7);
                assert_eq!(output, b("1"));
            }
            other => panic!("{other:?}"),
        }
        // undecodable code: one step, flag 0
        let outer = Program::new(vec![
            Instr::LoadC(1, b("111")),
            Instr::Run { code: 1, input: 2, out: 3, flag: 4 },
            Instr::JumpIf(4, 4),
            Instr::Accept,
            Instr::Reject,
        ]);
        assert!(matches!(
            run(&outer, &Bits::new(), w, 100).unwrap(),
            Outcome::AcceptedWith { steps: 4, .. }
        ));
    }

    #[test]
    fn encode_decode_roundtrip() {
        let p = Program::new(vec![
            Instr::LoadC(3, b("10101")),
            Instr::LoadC(200, Bits::new()),
            Instr::Input(0),
            Instr::Split { src: 0, first: 1, rest: 2 },
            Instr::JumpIf(1, 9),
            Instr::Run { code: 3, input: 0, out: 4, flag: 5 },
            Instr::Quote { template: 3, data: 0, out: 6 },
            Instr::OracleEntails(1, 2, 3),
            Instr::OracleQa { theory: 6, input: 0 },
            Instr::Accept,
        ]);
        let bits = encode_program(&p);
        assert_eq!(decode_program(&bits).unwrap(), p);
        assert!(decode_program(&Bits::new()).is_err());
        // nonzero literal padding is rejected
        let mut bytes = bits.as_bytes().unwrap().to_vec();
        // first instruction: opcode, reg, len=5, one literal byte 10101000
        assert_eq!(bytes[3], 0b1010_1000);
        bytes[3] |= 1;
        assert!(decode_program(&Bits::from_bytes(&bytes)).is_err());
    }

    #[test]
    fn sbm_text_roundtrip() {
        let text = "\
INPUT r0
LOADC r1 101
EQ r0 r1 r2
JUMPIF r2 Lyes
REJECT
Lyes:
ACCEPT
";
        let p = parse_sbm(text).unwrap();
        assert_eq!(p.instructions[3], Instr::JumpIf(2, 5));
        let p2 = parse_sbm(&print_sbm(&p)).unwrap();
        assert_eq!(p, p2);
        let w = world();
        assert!(run(&p, &b("101"), w.clone(), 100).unwrap().accepted());
        assert!(!run(&p, &b("100"), w, 100).unwrap().accepted());
    }

    #[test]
    fn padding_distinct_and_inert() {
        let w = world();
        let p = Program::new(vec![Instr::Input(0), Instr::Accept]);
        let mut seen = std::collections::HashSet::new();
        seen.insert(encode_program(&p));
        for k in 1..=10 {
            assert!(seen.insert(encode_program(&pad(&p, k))));
        }
        for k in [1, 5] {
            let q = pad(&p, k);
            for input in ["", "1", "0110"] {
                let i = b(input);
                let a = run(&p, &i, w.clone(), 50).unwrap();
                let bq = run(&q, &i, w.clone(), 50).unwrap();
                assert_eq!(a, bq);
            }
        }
    }

    #[test]
    fn accept_exactly_works() {
        let w = world();
        let p = accept_exactly(&[b("01"), b("111")]);
        assert!(run(&p, &b("01"), w.clone(), 100).unwrap().accepted());
        assert!(run(&p, &b("111"), w.clone(), 100).unwrap().accepted());
        assert!(!run(&p, &b("0"), w.clone(), 100).unwrap().accepted());
        assert!(!run(&p, &Bits::new(), w, 100).unwrap().accepted());
    }

    #[test]
    fn oracle_entails_instr() {
        let w = world();
        let sig = &w.sig;
        let phi = crate::query::parse_query("P(c0)", sig).unwrap();
        let psi = crate::query::parse_query("EX x. P(x)", sig).unwrap();
        let p = Program::new(vec![
            Instr::LoadC(1, encode_query(&phi, sig).unwrap()),
            Instr::LoadC(2, encode_query(&psi, sig).unwrap()),
            Instr::OracleEntails(1, 2, 0),
            Instr::Accept,
        ]);
        match run(&p, &Bits::new(), w.clone(), 10).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("1")),
            other => panic!("{other:?}"),
        }
        let p = Program::new(vec![
            Instr::LoadC(1, encode_query(&psi, sig).unwrap()),
            Instr::LoadC(2, encode_query(&phi, sig).unwrap()),
            Instr::OracleEntails(1, 2, 0),
            Instr::Accept,
        ]);
        match run(&p, &Bits::new(), w, 10).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_rename_instr() {
        let w = world();
        let swap = Renaming::new([(Constant(0), Constant(1)), (Constant(1), Constant(0))]).unwrap();
        let enc = encode_renaming(&swap);
        let got = decode_renaming_map(&enc).unwrap();
        assert_eq!(Renaming::new(got).unwrap(), swap);
        let p = Program::new(vec![Instr::Input(1), Instr::OracleRename(1, 0), Instr::Accept]);
        match run(&p, &enc, w.clone(), 10).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("1")),
            other => panic!("{other:?}"),
        }
        // non-injective map: c0 -> c1, c1 -> c1
        let mut bad = Bits::new();
        bad.push(true);
        crate::bits::push_unary(&mut bad, 0);
        crate::bits::push_unary(&mut bad, 1);
        bad.push(true);
        crate::bits::push_unary(&mut bad, 1);
        crate::bits::push_unary(&mut bad, 1);
        bad.push(false);
        match run(&p, &bad, w, 10).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quote_loads_data() {
        let w = world();
        // template: output QUOTE_REG, accept
        let template = Program::new(vec![
            Instr::Concat(QUOTE_REG, QUOTE_REG, 0),
            Instr::Accept,
        ]);
        let data = b("1011");
        let theory = quote(&template, &data);
        let quoted = theory_program(&theory).unwrap();
        assert_eq!(quoted.instructions[0], Instr::LoadC(QUOTE_REG, data.clone()));
        let out = run(&quoted, &Bits::new(), w, 100).unwrap();
        match out {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, data.concat(&data)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quote_shifts_jumps() {
        let template = Program::new(vec![Instr::Jump(1), Instr::JumpIf(2, 0)]);
        let quoted = theory_program(&quote(&template, &Bits::new())).unwrap();
        assert_eq!(quoted.instructions[1], Instr::Jump(2));
        assert_eq!(quoted.instructions[2], Instr::JumpIf(2, 1));
    }

    #[test]
    fn pair_roundtrip() {
        for (a, s) in [("", ""), ("1", "0"), ("10110", "")] {
            let (a, s) = (b(a), b(s));
            let p = pair_bits(&a, &s);
            assert_eq!(unpair_bits(&p), Some((a, s)));
        }
    }

    #[test]
    fn compile_tm_immediate_yes() {
        let t = TmTable::parse("start: q0\nyes: q0\n").unwrap();
        let p = compile_tm(&t).unwrap();
        let w = world();
        assert!(run(&p, &Bits::new(), w, 1000).unwrap().accepted());
    }

    #[test]
    fn compile_tm_flip_first_bit() {
        let t = TmTable::parse(
            "start: q0\nyes: qy\nno: qn\nq0,0 -> qy,1,R\nq0,1 -> qy,0,R\nq0,B -> qn,B,R\n",
        )
        .unwrap();
        let p = compile_tm(&t).unwrap();
        let w = world();
        match run(&p, &b("0"), w.clone(), 10000).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("1")),
            other => panic!("{other:?}"),
        }
        match run(&p, &b("10"), w.clone(), 10000).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("00")),
            other => panic!("{other:?}"),
        }
        assert!(!run(&p, &Bits::new(), w, 10000).unwrap().accepted());
    }

    #[test]
    fn compile_tm_moves_left() {
        // write a 1, move right twice, come back left and flip the first
        // cell again, accept; checks the left-stack bookkeeping
        let t = TmTable::parse(
            "start: q0\nyes: qy\n\
             q0,B -> q1,1,R\n\
             q1,B -> q2,0,L\n\
             q2,1 -> qy,0,R\n",
        )
        .unwrap();
        let p = compile_tm(&t).unwrap();
        let w = world();
        match run(&p, &Bits::new(), w, 10000).unwrap() {
            Outcome::AcceptedWith { output, .. } => assert_eq!(output, b("00")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn halting_programs_halt() {
        use rand::SeedableRng;
        let w = world();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = random_halting_program(&mut rng);
            for input in ["", "1", "01", "1101"] {
                let out = run(&p, &b(input), w.clone(), 10_000).unwrap();
                assert!(!matches!(out, Outcome::Exhausted), "{p:?}");
            }
        }
    }
}
