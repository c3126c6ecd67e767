//! Randomized invariants over the core types: ordering laws for database
//! extension, renaming round trips, codec injectivity, entailment laws,
//! and engine monotonicity and scheduling order.

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use krf_core::kr::{sig_pe, Constant, Database, Positivity, Renaming, World};
use krf_core::machine::{
    decode_program, encode_program, mk_theory, random_halting_program, random_program,
};
use krf_core::oracle::{all_facts, all_queries};
use krf_core::query::{decode_query, encode_query, entails, rename_query, Query};
use krf_core::{closure, theta};

fn query_pool() -> &'static Vec<Query> {
    static POOL: OnceLock<Vec<Query>> = OnceLock::new();
    POOL.get_or_init(|| all_queries(&sig_pe(), 14).iter().map(|q| (**q).clone()).collect())
}

/// A database over {c0,c1,c2} with at most six observed facts, so the
/// restriction lattice stays enumerable.
fn small_db() -> impl Strategy<Value = Database> {
    let n = all_facts(&sig_pe(), &[Constant(0), Constant(1), Constant(2)]).len();
    prop::collection::vec(
        prop_oneof![4 => Just(-1i8), 1 => Just(0i8), 1 => Just(1i8)],
        n,
    )
    .prop_map(|values| {
        let facts = all_facts(&sig_pe(), &[Constant(0), Constant(1), Constant(2)]);
        let mut d = Database::new(sig_pe(), Positivity::All);
        let mut observed = 0;
        for (f, &v) in facts.iter().zip(&values) {
            if v >= 0 && observed < 6 {
                d.set(f.clone(), v).unwrap();
                observed += 1;
            }
        }
        d
    })
}

fn pool_query() -> impl Strategy<Value = Query> {
    (0..query_pool().len()).prop_map(|i| query_pool()[i].clone())
}

proptest! {
    #[test]
    fn extension_is_a_partial_order(d in small_db(), m1 in any::<u64>(), m2 in any::<u64>()) {
        prop_assert!(d.extends(&d));
        let rs: Vec<Database> = d.restrictions().collect();
        let r = &rs[(m1 as usize) % rs.len()];
        let ss: Vec<Database> = r.restrictions().collect();
        let s = &ss[(m2 as usize) % ss.len()];
        prop_assert!(d.extends(r));
        prop_assert!(r.extends(s));
        prop_assert!(d.extends(s), "extension is not transitive");
        if r.extends(&d) {
            prop_assert_eq!(r, &d, "extension is not antisymmetric");
        }
    }

    #[test]
    fn restrictions_enumerate_the_full_lattice(d in small_db()) {
        let rs: Vec<Database> = d.restrictions().collect();
        prop_assert_eq!(rs.len(), 1usize << d.owa_count());
        for (i, a) in rs.iter().enumerate() {
            prop_assert!(d.extends(a));
            for b in &rs[i + 1..] {
                prop_assert_ne!(a, b, "duplicate restriction");
            }
        }
    }

    #[test]
    fn renaming_round_trips(d in small_db(), q in pool_query(), perm in any::<u64>()) {
        // a permutation of {c0..c3} drawn by repeated selection
        let mut left: Vec<u32> = (0..4).collect();
        let mut images = Vec::new();
        let mut x = perm;
        while !left.is_empty() {
            images.push(left.remove((x % left.len() as u64) as usize));
            x /= 4;
        }
        let t = Renaming::new(
            images.iter().enumerate().map(|(i, &j)| (Constant(i as u32), Constant(j))),
        )
        .unwrap();
        let inv = t.inverse();
        prop_assert_eq!(d.rename(&t).unwrap().rename(&inv).unwrap(), d);
        prop_assert_eq!(rename_query(&rename_query(&q, &t).unwrap(), &inv).unwrap(), q);
    }

    #[test]
    fn program_codec_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng);
        prop_assert_eq!(decode_program(&encode_program(&p)).unwrap(), p);
    }

    #[test]
    fn query_codec_round_trips(q in pool_query()) {
        let sig = sig_pe();
        let bits = encode_query(&q, &sig).unwrap();
        prop_assert_eq!(decode_query(&bits, &sig).unwrap(), q);
    }

    #[test]
    fn entailment_is_reflexive_and_transitive(
        a in pool_query(),
        b in pool_query(),
        c in pool_query(),
    ) {
        prop_assert!(entails(&a, &a).unwrap());
        if entails(&a, &b).unwrap() && entails(&b, &c).unwrap() {
            prop_assert!(entails(&a, &c).unwrap(), "entailment is not transitive");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn acceptance_is_fuel_monotone(seed in any::<u64>(), d in small_db(), q in pool_query()) {
        let world = World::new(sig_pe(), Positivity::All);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = mk_theory(&random_halting_program(&mut rng));
        let lo = theta::qa(&t, &d, &q, world.clone(), 600).unwrap();
        if lo.accepted() {
            for fuel in [1200u64, 2400] {
                let hi = theta::qa(&t, &d, &q, world.clone(), fuel).unwrap();
                prop_assert!(hi.accepted(), "accepted at fuel 600 but not at {fuel}");
            }
        }
    }

    #[test]
    fn scheduler_starts_tasks_in_creation_order(seed in any::<u64>(), d in small_db(), q in pool_query()) {
        let world = World::new(sig_pe(), Positivity::All);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = mk_theory(&random_halting_program(&mut rng));
        let mut e = theta::engine(&t, &d, &q, world).unwrap();
        e.enable_trace();
        closure::run_engine(&mut e, 500).unwrap();
        let starts: Vec<u64> = e
            .take_trace()
            .iter()
            .filter(|ev| ev.event == "start")
            .map(|ev| ev.i)
            .collect();
        for w in starts.windows(2) {
            prop_assert!(w[0] < w[1], "task {} started before task {}", w[1], w[0]);
        }
    }
}
