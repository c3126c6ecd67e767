//! Experiment runner: file-driven access to query answering, closure
//! traces, padding, fixpoints, reductions, the back-and-forth construction,
//! circumscription, and small verification suites. Results are JSON with a
//! fixed schema; identical inputs, seed and fuel give identical bytes.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use krf_core::bits::Bits;
use krf_core::closure::{run_engine, ClosureOutcome, Engine};
use krf_core::formalisms::{datalog_krf, datalog_qa, reduce_to_theta, DatalogTheory};
use krf_core::isolab::{self, DatalogPad};
use krf_core::kr::{sig_pe, Constant, Database, Fact, Positivity, World};
use krf_core::machine::{self, parse_sbm, random_program};
use krf_core::oracle::brute_entails;
use krf_core::query::{
    entails, parse_formula, parse_sentence, Query, QueryEnum,
};
use krf_core::{circ, theta};

const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "krf", version, about = "knowledge representation workbench")]
struct Cli {
    /// Engine iteration budget; defaults to KRF_FUEL or 1000000
    #[arg(long, global = true)]
    fuel: Option<u64>,
    /// Seed for all sampling in the invocation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the result JSON here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Include wall-clock timing (breaks byte-identical reproducibility)
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Answer a query under a canonical-formalism theory
    Qa {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// Run the closure engine of a machine and emit the event trace
    ClosureTrace {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// Distinct observationally equal variants of a theory
    Padding {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// A theory unchanged (up to answers) by the given map
    Fixpoint {
        #[arg(long, value_enum)]
        map: MapKind,
        /// Target theory, for the constant map
        #[arg(long)]
        target: Option<PathBuf>,
        /// Also write the raw theory bytes here
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Translate a rule-set theory into the canonical formalism
    Reduce {
        #[arg(long)]
        dlg: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Back-and-forth bijection prefix between the two rule-set variants
    Myhill {
        /// Theories of the sorted-and-deduplicated variant, '---' separated
        #[arg(long)]
        canonical: PathBuf,
        /// Theories of the duplicate-tolerant variant, '---' separated
        #[arg(long)]
        duplicated: PathBuf,
        #[arg(long)]
        rounds: usize,
        /// Membership samples per certificate
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Compile (database, query) pairs into circumscription rules
    CircCompile {
        /// Sections separated by '---': .kdb lines, then 'query: <q>'
        #[arg(long)]
        kb: PathBuf,
    },
    /// Answer a query over bounded-domain minimal models
    CircQa {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Minimized predicates, comma separated; default: all CWA predicates
        #[arg(long)]
        minimize: Option<String>,
        #[arg(long, default_value_t = 3)]
        bound: usize,
        /// Extra anonymous domain elements allowed
        #[arg(long, default_value_t = 3)]
        anonymous: usize,
    },
    /// Decide a Datalog consequence directly
    DatalogQa {
        #[arg(long)]
        dlg: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// Print a prefix of a canonical enumeration
    Enum {
        #[arg(long, value_enum)]
        kind: EnumKind,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Constant pool for the renaming enumeration, e.g. "c0,c1"
        #[arg(long, default_value = "c0,c1")]
        consts: String,
    },
    /// Run a built-in property suite
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MapKind {
    Identity,
    Pad1,
    Const,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumKind {
    Queries,
    Renamings,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteKind {
    KbProperties,
    Encoding,
    Entailment,
}

/// 1 = usage, 2 = input format, 3 = internal invariant violation.
struct Failure {
    code: u8,
    msg: String,
}

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, msg: e.to_string() }
}

fn internal_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: 3, msg: e.to_string() }
}

/// Print a line, treating a closed pipe as the reader losing interest.
fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(0);
    }
}

fn read_text(p: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| input_err(format!("{}: {e}", p.display())))
}

fn read_bits(p: &PathBuf) -> Result<Bits, Failure> {
    let bytes = std::fs::read(p).map_err(|e| input_err(format!("{}: {e}", p.display())))?;
    Ok(Bits::from_bytes(&bytes))
}

fn read_db(p: &PathBuf) -> Result<Database, Failure> {
    Database::parse(&read_text(p)?).map_err(input_err)
}

fn read_query(p: &PathBuf, db: &Database) -> Result<Query, Failure> {
    parse_sentence(read_text(p)?.trim(), &db.sig).map_err(input_err)
}

fn world_of(db: &Database) -> Rc<World> {
    World::new(db.sig.clone(), db.mode)
}

fn verdict_str(o: &ClosureOutcome) -> &'static str {
    if o.accepted() {
        "accepted"
    } else {
        "exhausted"
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version itself with success
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            e.print().ok();
            return ExitCode::SUCCESS;
        }
    };
    let fuel = cli.fuel.unwrap_or_else(|| {
        std::env::var("KRF_FUEL").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_FUEL)
    });
    let start = std::time::Instant::now();
    match dispatch(&cli.command, cli.seed, fuel) {
        Ok((name, inputs, payload_key, payload)) => {
            let timing = if cli.timing { start.elapsed().as_millis() as u64 } else { 0 };
            let result = json!({
                "command": name,
                "inputs": inputs,
                "seed": cli.seed,
                "fuel": fuel,
                "version": env!("CARGO_PKG_VERSION"),
                payload_key: payload,
                "timing_ms": timing,
            });
            let text = serde_json::to_string_pretty(&result).expect("serializable result");
            match &cli.out {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, text + "\n") {
                        eprintln!("{}: {e}", p.display());
                        return ExitCode::from(3);
                    }
                }
                None => emit(&text),
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            let err = json!({ "error": f.msg, "exit": f.code });
            eprintln!("{}", serde_json::to_string(&err).expect("serializable error"));
            ExitCode::from(f.code)
        }
    }
}

type Output = (&'static str, Value, &'static str, Value);

fn dispatch(cmd: &Cmd, seed: u64, fuel: u64) -> Result<Output, Failure> {
    match cmd {
        Cmd::Qa { theory, db, query } => {
            let t = read_bits(theory)?;
            let d = read_db(db)?;
            let q = read_query(query, &d)?;
            let mut e = theta::engine(&t, &d, &q, world_of(&d)).map_err(input_err)?;
            let outcome = run_engine(&mut e, fuel).map_err(internal_err)?;
            Ok((
                "qa",
                json!({"theory": theory, "db": db, "query": query}),
                "verdict",
                json!({"verdict": verdict_str(&outcome), "steps": e.iterations()}),
            ))
        }
        Cmd::ClosureTrace { program, db, query } => {
            let p = parse_sbm(&read_text(program)?).map_err(input_err)?;
            let d = read_db(db)?;
            let q = read_query(query, &d)?;
            let mut e = Engine::new(world_of(&d), Rc::new(p), d.clone(), Rc::new(q));
            e.enable_trace();
            let outcome = run_engine(&mut e, fuel).map_err(internal_err)?;
            for ev in e.take_trace() {
                emit(&serde_json::to_string(&ev).expect("serializable event"));
            }
            Ok((
                "closure-trace",
                json!({"program": program, "db": db, "query": query}),
                "verdict",
                json!({
                    "verdict": verdict_str(&outcome),
                    "steps": e.iterations(),
                    "tasks_created": e.tasks_created(),
                    "fuel": fuel,
                }),
            ))
        }
        Cmd::Padding { theory, count } => {
            let t = read_bits(theory)?;
            let set = theta::padding_set(&t, *count).map_err(input_err)?;
            let hex: Vec<String> = set.iter().map(Bits::to_hex).collect();
            Ok((
                "padding",
                json!({"theory": theory, "count": count}),
                "report",
                json!({"theories": hex}),
            ))
        }
        Cmd::Fixpoint { map, target, emit } => {
            let p = match map {
                MapKind::Identity => theta::identity_map(),
                MapKind::Pad1 => theta::pad1_map(),
                MapKind::Const => {
                    let t = target
                        .as_ref()
                        .ok_or_else(|| input_err("the constant map needs --target"))?;
                    theta::const_map(&read_bits(t)?)
                }
            };
            let pi = theta::fixpoint(&p);
            if let Some(path) = emit {
                let bytes = pi.as_bytes().expect("theories are whole bytes").to_vec();
                std::fs::write(path, bytes).map_err(internal_err)?;
            }
            Ok((
                "fixpoint",
                json!({"map": format!("{:?}", map_name(*map)), "target": target}),
                "report",
                json!({"theory_hex": pi.to_hex(), "bits": pi.len()}),
            ))
        }
        Cmd::Reduce { dlg, emit } => {
            let text = read_text(dlg)?;
            let t = DatalogTheory::parse(&text).map_err(input_err)?;
            let world = World::new(sig_pe(), Positivity::All);
            let g = datalog_krf(&world);
            let out = reduce_to_theta(&g).apply(&t.bits(), world).map_err(internal_err)?;
            if let Some(path) = emit {
                let bytes = out.as_bytes().expect("theories are whole bytes").to_vec();
                std::fs::write(path, bytes).map_err(internal_err)?;
            }
            Ok((
                "reduce",
                json!({"dlg": dlg}),
                "report",
                json!({
                    "theory_hex": out.to_hex(),
                    "input_bits": t.bits().len(),
                    "output_bits": out.len(),
                }),
            ))
        }
        Cmd::Myhill { canonical, duplicated, rounds, samples } => {
            let enum_a = read_theory_list(canonical, true)?;
            let enum_b = read_theory_list(duplicated, false)?;
            let world = World::new(sig_pe(), Positivity::All);
            let g = datalog_krf(&world);
            let pairs = sample_pairs(seed, *samples, &world);
            let mut certify = |a: &Bits, b: &Bits| {
                isolab::krf_agreement(&g, &g, a, b, &pairs, world.clone(), fuel)
            };
            let mut incl = |t: &Bits| Ok(t.clone());
            let mut canon = isolab::datalog_canonicalize;
            let iso = isolab::equally_strong_iso(
                &mut incl,
                &mut canon,
                &DatalogPad { canonical: true },
                &DatalogPad { canonical: false },
                &enum_a,
                &enum_b,
                *rounds,
                &mut certify,
            )
            .map_err(internal_err)?;
            Ok((
                "myhill",
                json!({
                    "canonical": canonical,
                    "duplicated": duplicated,
                    "rounds": rounds,
                    "samples": samples,
                }),
                "report",
                iso.to_json(),
            ))
        }
        Cmd::CircCompile { kb } => {
            let pairs = read_kb_sections(kb)?;
            let rules = circ::compile_kb_fragment(&pairs);
            let texts: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
            Ok(("circ-compile", json!({"kb": kb}), "report", json!({"rules": texts})))
        }
        Cmd::CircQa { db, rules, query, minimize, bound, anonymous } => {
            let d = read_db(db)?;
            let rs = circ::parse_rules(&read_text(rules)?, &d.sig).map_err(input_err)?;
            let q = parse_formula(read_text(query)?.trim(), &d.sig).map_err(input_err)?;
            let minimized: BTreeSet<String> = match minimize {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => d
                    .sig
                    .preds()
                    .iter()
                    .filter(|p| p.mode == krf_core::kr::PredMode::Cwa)
                    .map(|p| p.name.clone())
                    .collect(),
            };
            let cfg = circ::MinimizationConfig {
                minimized,
                domain_bound: *bound,
                anonymous_elements: *anonymous,
            };
            let v = circ::circ_qa(&d, &rs, &cfg, &q).map_err(internal_err)?;
            Ok((
                "circ-qa",
                json!({"db": db, "rules": rules, "query": query, "bound": bound}),
                "verdict",
                json!({"verdict": v}),
            ))
        }
        Cmd::DatalogQa { dlg, db, query } => {
            let t = DatalogTheory::parse(&read_text(dlg)?).map_err(input_err)?;
            let d = read_db(db)?;
            let q = read_query(query, &d)?;
            let v = datalog_qa(&t, &d, &q).map_err(internal_err)?;
            Ok((
                "datalog-qa",
                json!({"dlg": dlg, "db": db, "query": query}),
                "verdict",
                json!({"verdict": v}),
            ))
        }
        Cmd::Enum { kind, count, consts } => match kind {
            EnumKind::Queries => {
                let mut e = QueryEnum::new(sig_pe());
                let items: Vec<Value> = (0..*count)
                    .map(|i| json!({"index": i, "query": e.get(i).to_string()}))
                    .collect();
                Ok(("enum", json!({"kind": "queries", "count": count}), "report", json!(items)))
            }
            EnumKind::Renamings => {
                let pool: Vec<Constant> = consts
                    .split(',')
                    .map(|s| Constant::parse(s.trim()).ok_or_else(|| input_err("bad constant")))
                    .collect::<Result<_, _>>()?;
                let mut e = krf_core::closure::RenamingEnum::default();
                let items: Vec<Value> = (0..*count as u64)
                    .map(|i| {
                        let m = e.at(&pool, i);
                        let pairs: Vec<String> =
                            m.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                        json!({"index": i, "map": pairs})
                    })
                    .collect();
                Ok((
                    "enum",
                    json!({"kind": "renamings", "count": count, "consts": consts}),
                    "report",
                    json!(items),
                ))
            }
        },
        Cmd::Verify { suite } => {
            let report = match suite {
                SuiteKind::KbProperties => verify_kb_properties(seed, fuel)?,
                SuiteKind::Encoding => verify_encoding(seed)?,
                SuiteKind::Entailment => verify_entailment(seed)?,
            };
            let passed = report["passed"].as_bool().unwrap_or(false);
            if !passed {
                return Err(internal_err(format!(
                    "suite failed: {}",
                    serde_json::to_string(&report).expect("serializable report")
                )));
            }
            Ok(("verify", json!({"suite": suite_name(*suite)}), "report", report))
        }
    }
}

fn map_name(m: MapKind) -> &'static str {
    match m {
        MapKind::Identity => "identity",
        MapKind::Pad1 => "pad1",
        MapKind::Const => "const",
    }
}

fn suite_name(s: SuiteKind) -> &'static str {
    match s {
        SuiteKind::KbProperties => "kb-properties",
        SuiteKind::Encoding => "encoding",
        SuiteKind::Entailment => "entailment",
    }
}

/// Theory texts separated by lines containing only '---'.
fn read_theory_list(p: &PathBuf, canonical: bool) -> Result<Vec<Bits>, Failure> {
    let text = read_text(p)?;
    let mut out = Vec::new();
    for chunk in text.split("\n---") {
        let chunk = chunk.trim_start_matches("---").trim();
        if chunk.is_empty() {
            continue;
        }
        let t = DatalogTheory::parse(chunk).map_err(input_err)?;
        if canonical && t.bits() != t.canonical().bits() {
            return Err(input_err(format!(
                "theory is not in canonical form: {}",
                chunk.lines().next().unwrap_or("")
            )));
        }
        out.push(t.bits());
    }
    Ok(out)
}

/// Sections separated by '---': database lines, then a 'query:' line.
fn read_kb_sections(p: &PathBuf) -> Result<Vec<(Database, Query)>, Failure> {
    let text = read_text(p)?;
    let mut out = Vec::new();
    for chunk in text.split("\n---") {
        let chunk = chunk.trim_start_matches("---").trim();
        if chunk.is_empty() {
            continue;
        }
        let mut db_lines = Vec::new();
        let mut query_line = None;
        for line in chunk.lines() {
            match line.trim().strip_prefix("query:") {
                Some(q) => query_line = Some(q.trim().to_string()),
                None => db_lines.push(line),
            }
        }
        let d = Database::parse(&db_lines.join("\n")).map_err(input_err)?;
        let q_text = query_line.ok_or_else(|| input_err("section without a 'query:' line"))?;
        let q = parse_sentence(&q_text, &d.sig).map_err(input_err)?;
        out.push((d, q));
    }
    Ok(out)
}

/// Deterministic membership samples over the default world.
fn sample_pairs(seed: u64, n: usize, world: &Rc<World>) -> Vec<(Database, Query)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qe = QueryEnum::new(world.sig.clone());
    let queries: Vec<_> = (0..40).map(|i| qe.get(i)).collect();
    let mut out = Vec::new();
    while out.len() < n {
        let mut d = Database::new(world.sig.clone(), world.mode);
        for a in 0..3u32 {
            if rng.gen_bool(0.4) {
                let v = if rng.gen_bool(0.7) { 1 } else { 0 };
                d.set(Fact { pred: "P".into(), args: vec![Constant(a)] }, v).ok();
            }
        }
        for a in 0..2u32 {
            for b in 0..2u32 {
                if rng.gen_bool(0.25) {
                    d.set(Fact { pred: "E".into(), args: vec![Constant(a), Constant(b)] }, 1)
                        .ok();
                }
            }
        }
        let q = queries[rng.gen_range(0..queries.len())].as_ref().clone();
        out.push((d, q));
    }
    out
}

fn verify_kb_properties(seed: u64, fuel: u64) -> Result<Value, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = World::new(sig_pe(), Positivity::All);
    let pairs = sample_pairs(seed, 12, &world);
    let mut checks = Vec::new();
    let mut passed = true;
    for trial in 0..3 {
        let m = Rc::new(random_program(&mut rng));
        // monotone fuel: anything accepted at half fuel stays accepted
        let mut stable = true;
        for (d, q) in &pairs {
            let lo = krf_core::closure::star_accepts(&m, d, q, world.clone(), fuel / 2)
                .map_err(internal_err)?
                .accepted();
            let hi = krf_core::closure::star_accepts(&m, d, q, world.clone(), fuel)
                .map_err(internal_err)?
                .accepted();
            if lo && !hi {
                stable = false;
            }
            // tautologies are always answered
            if krf_core::query::is_tautology(q).map_err(internal_err)? && !hi {
                stable = false;
            }
        }
        passed &= stable;
        checks.push(json!({
            "check": format!("closure stability, trial {trial}"),
            "status": if stable { "ok" } else { "violation" },
        }));
    }
    Ok(json!({"checks": checks, "passed": passed}))
}

fn verify_encoding(seed: u64) -> Result<Value, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0usize;
    let total = 1000;
    for _ in 0..total {
        let p = random_program(&mut rng);
        let bits = machine::encode_program(&p);
        if machine::decode_program(&bits).map(|d| d == p).unwrap_or(false) {
            ok += 1;
        }
    }
    let passed = ok == total;
    Ok(json!({
        "checks": [{"check": "decode after encode on random programs",
                    "status": if passed { "ok" } else { "violation" },
                    "witness": format!("{ok}/{total}")}],
        "passed": passed,
    }))
}

fn verify_entailment(seed: u64) -> Result<Value, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sig = sig_pe();
    let mut qe = QueryEnum::new(sig.clone());
    let pool: Vec<_> = (0..60).map(|i| qe.get(i)).collect();
    let mut ok = 0usize;
    let mut tried = 0usize;
    while tried < 100 {
        let p = pool[rng.gen_range(0..pool.len())].clone();
        let q = pool[rng.gen_range(0..pool.len())].clone();
        tried += 1;
        let fast = entails(&p, &q).map_err(internal_err)?;
        let slow = brute_entails(&p, &q, &sig, 3).map_err(internal_err)?;
        if fast == slow {
            ok += 1;
        }
    }
    let passed = ok == tried;
    Ok(json!({
        "checks": [{"check": "hom-based entailment vs model enumeration",
                    "status": if passed { "ok" } else { "violation" },
                    "witness": format!("{ok}/{tried}")}],
        "passed": passed,
    }))
}
