//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion does.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mekler::classify::{self, ElementKind, DEFAULT_ENUM_CAP};
use mekler::encode::{self, random_hypergraph};
use mekler::graph::{check_nice, NicenessFailure};
use mekler::interpret::{gamma, graphs_isomorphic, DEFAULT_ISO_CAP};
use mekler::shatter::tp2::tp2_path_object;
use mekler::shatter::{
    bilinear_ip_instance, bilinear_structure, build_shattering_hypergraph, check_tp2, tp2_pattern, verify_shatter,
    Structure, Tp2Budget, Value, DEFAULT_MAX_CELLS,
};
use mekler::transversal::{
    build_transversal, check_phi, close_under_handles, decomposition_check, is_partial_transversal,
    verify_derived_invariance, Landscape, Part, Violation,
};
use mekler::{FpVector, Graph, GroupElement, MeklerGroup};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        Err(format!("{what} took {:.2} s, limit {} s", t.as_secs_f64(), limit.as_secs()))
    } else {
        Ok(t)
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// Edge check written against the graph directly, independent of the
/// library's isomorphism routine.
fn maps_edges_exactly(a: &Graph, b: &Graph, map: &[usize]) -> bool {
    let n = a.n();
    let mut hit = vec![false; n];
    for &v in map {
        if v >= n || std::mem::replace(&mut hit[v], true) {
            return false;
        }
    }
    let mut image: Vec<(usize, usize)> = a
        .edges()
        .into_iter()
        .map(|(u, v)| (map[u].min(map[v]), map[u].max(map[v])))
        .collect();
    image.sort();
    let mut target = b.edges();
    target.sort();
    map.len() == n && b.n() == n && image == target
}

fn group_axioms() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, c) in [("C5", Graph::cycle(5)), ("Petersen", Graph::petersen())] {
        let g = MeklerGroup::new(c.clone(), 3).map_err(err)?;
        for _ in 0..1000 {
            let (a, b, d) = (g.random_element(&mut rng), g.random_element(&mut rng), g.random_element(&mut rng));
            let left = g.multiply(&g.multiply(&a, &b).map_err(err)?, &d).map_err(err)?;
            let right = g.multiply(&a, &g.multiply(&b, &d).map_err(err)?).map_err(err)?;
            ensure!(left == right, "{name}: associativity fails on {a:?} {b:?} {d:?}");
        }
        let cube = |x: &GroupElement| -> Result<bool, String> {
            let x2 = g.multiply(x, x).map_err(err)?;
            Ok(g.multiply(&x2, x).map_err(err)?.is_identity())
        };
        for v in 0..c.n() {
            ensure!(cube(&g.generator(v))?, "{name}: x_{v}^3 != 1");
        }
        for _ in 0..1000 {
            let x = g.random_element(&mut rng);
            ensure!(cube(&x)?, "{name}: {x:?}^3 != 1");
        }
        for u in 0..c.n() {
            for v in 0..c.n() {
                let (xu, xv) = (g.generator(u), g.generator(v));
                let closed = g.commutator(&xu, &xv).map_err(err)?;
                let inv = |x: &GroupElement| g.inverse(x).map_err(err);
                let word = [inv(&xu)?, inv(&xv)?, xu.clone(), xv.clone()]
                    .iter()
                    .try_fold(g.identity(), |acc, y| g.multiply(&acc, y))
                    .map_err(err)?;
                ensure!(closed == word, "{name}: closed commutator differs from the word at ({u},{v})");
                ensure!(
                    closed.is_identity() == (u == v || c.adjacent(u, v)),
                    "{name}: [x_{u}, x_{v}] = 1 disagrees with adjacency"
                );
            }
        }
    }
    let t = within(start, Duration::from_secs(5), "group axioms")?;
    Ok(format!("{:.2} s", t.as_secs_f64()))
}

fn c5_invariants() -> Outcome {
    let start = Instant::now();
    let g = MeklerGroup::new(Graph::cycle(5), 3).map_err(err)?;
    ensure!(g.order() == 59049u32.into(), "|G| = {}", g.order());
    let derived = g.derived();
    let nonedges = Graph::cycle(5).non_edges().len();
    ensure!(derived.log_order() == 5 && nonedges == 5, "derived log order {}", derived.log_order());
    let center = g.center();
    ensure!(center.gen_space.dim() == 0, "center gen dimension {}", center.gen_space.dim());
    ensure!(center.com_space == derived.com_space && derived.gen_space.dim() == 0, "Z(G) != G'");
    let t = within(start, Duration::from_secs(1), "structure constants")?;
    Ok(format!("|G| = 3^10, dim G' = {nonedges}, {:.3} s", t.as_secs_f64()))
}

fn gamma_roundtrips() -> Outcome {
    let start = Instant::now();
    for (name, c) in [("C5", Graph::cycle(5)), ("Petersen", Graph::petersen())] {
        let g = MeklerGroup::new(c.clone(), 3).map_err(err)?;
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).map_err(err)?;
        let gm = gamma(&land).map_err(err)?;
        let map = match gm.back_map.iter().copied().collect::<Option<Vec<usize>>>() {
            Some(m) => m,
            None => graphs_isomorphic(&gm.graph, &c, DEFAULT_ISO_CAP)
                .map_err(err)?
                .ok_or(format!("{name}: gamma is not isomorphic"))?,
        };
        ensure!(maps_edges_exactly(&gm.graph, &c, &map), "{name}: map fails edge check");
    }
    let t = within(start, Duration::from_secs(60), "gamma roundtrips")?;
    Ok(format!("C5 and Petersen, {:.2} s", t.as_secs_f64()))
}

fn taxonomy_coherence() -> Outcome {
    let g = MeklerGroup::new(Graph::cycle(5), 3).map_err(err)?;
    let census = classify::census(&g, DEFAULT_ENUM_CAP).map_err(err)?;
    ensure!(
        census.to_json() == classify::census(&g, DEFAULT_ENUM_CAP).map_err(err)?.to_json(),
        "census JSON differs between runs"
    );
    for c in census.noncentral() {
        ensure!(!c.isolated || c.q == 1, "isolated class with q = {}", c.q);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let central = |rng: &mut ChaCha8Rng| {
        g.element(FpVector::zero(3, 5), FpVector::new(3, (0..5).map(|_| rng.gen_range(0..3))))
            .expect("valid central element")
    };
    let mut counts = [0usize; 3];
    for i in 0..10_000 {
        let a = g.random_element(&mut rng);
        // Bias a share of pairs into the finer relations so the
        // implications are exercised.
        let b = match i % 4 {
            0 => g.multiply(&a, &central(&mut rng)).map_err(err)?,
            1 => g.multiply(&g.power(&a, 2).map_err(err)?, &central(&mut rng)).map_err(err)?,
            _ => g.random_element(&mut rng),
        };
        let z = classify::zmod(&g, &a, &b).map_err(err)?;
        let ap = classify::approx(&g, &a, &b).map_err(err)?;
        let s = classify::sim(&g, &a, &b).map_err(err)?;
        ensure!(!z || ap, "≡_Z without ≈ on {a:?}, {b:?}");
        ensure!(!ap || s, "≈ without ∼ on {a:?}, {b:?}");
        counts[0] += z as usize;
        counts[1] += ap as usize;
        counts[2] += s as usize;
    }
    ensure!(counts[0] > 0 && counts[1] > counts[0], "implications not exercised: {counts:?}");

    let mut by_kernel: BTreeMap<Vec<FpVector>, classify::ElementClass> = BTreeMap::new();
    for a in g.enumerate_gen_parts() {
        let x = g.from_gen(a.clone()).map_err(err)?;
        if g.is_central(&x) {
            continue;
        }
        let class = classify::type_of(&g, &x).map_err(err)?;
        let key = classify::centralizer_kernel(&g, &a).basis().to_vec();
        let prev = *by_kernel.entry(key).or_insert(class);
        ensure!(prev == class, "classification varies within a ∼-class at {a:?}");
    }
    ensure!(by_kernel.len() as u64 == census.noncentral_classes, "class count mismatch");
    Ok(format!("10^4 pairs, counts {counts:?}, {} classes", by_kernel.len()))
}

fn transversal_suite() -> Outcome {
    let g = MeklerGroup::new(Graph::cycle(5), 3).map_err(err)?;
    let land = Landscape::new(&g, DEFAULT_ENUM_CAP).map_err(err)?;
    let x = build_transversal(&land, 0).map_err(err)?;
    let phi = check_phi(&land, &x.x_nu, &x.x_p, &x.x_iota, None).map_err(err)?;
    ensure!(phi.satisfied, "built transversal fails phi: {:?}", phi.counterexample);
    ensure!(verify_derived_invariance(&g, &x.all()).map_err(err)?, "derived invariance fails");
    let d = decomposition_check(&g, &x.all()).map_err(err)?;
    ensure!(d.k_dim == Some(0), "k_dim = {:?}", d.k_dim);

    let skip = g.from_gen(FpVector::new(3, [1, 0, 1, 0, 0])).map_err(err)?;
    ensure!(land.kind_of(&skip) == ElementKind::TypeP, "planted element is not type p");
    let r = check_phi(&land, &[], std::slice::from_ref(&skip), &[], None).map_err(err)?;
    ensure!(
        matches!(r.counterexample, Some(Violation::NotProper { part: Part::P, .. })),
        "non-proper entry not detected: {:?}",
        r.counterexample
    );

    let pair = [g.generator(0), g.power(&g.generator(0), 2).map_err(err)?];
    let r = check_phi(&land, &pair, &[], &[], None).map_err(err)?;
    ensure!(
        matches!(r.counterexample, Some(Violation::Equivalent { part: Part::Nu, first: 0, second: 1 })),
        "∼-equivalent pair not detected: {:?}",
        r.counterexample
    );

    // C5 has no proper type-p elements, so the handle test runs on C5 with
    // a pendant vertex.
    let mut c = Graph::cycle(5);
    c.add_vertex();
    c.add_edge(0, 5).map_err(err)?;
    let h = MeklerGroup::new(c, 3).map_err(err)?;
    let hl = Landscape::new(&h, DEFAULT_ENUM_CAP).map_err(err)?;
    let x5 = h.generator(5);
    ensure!(hl.kind_of(&x5) == ElementKind::TypeP, "pendant generator is not type p");
    ensure!(
        !is_partial_transversal(&hl, std::slice::from_ref(&x5)).map_err(err)?,
        "missing handle not detected"
    );
    let closed = close_under_handles(&hl, std::slice::from_ref(&x5)).map_err(err)?;
    ensure!(is_partial_transversal(&hl, &closed).map_err(err)?, "handle closure is not partial transversal");
    Ok(format!("|X| = {}, three planted violations detected", x.len()))
}

fn bilinear_family() -> Outcome {
    let start = Instant::now();
    let b = bilinear_structure(3, 8).map_err(err)?;
    let inst = bilinear_ip_instance(&b, 8).map_err(err)?;
    let r = verify_shatter(&Structure::Bilinear(b), &inst, DEFAULT_MAX_CELLS).map_err(err)?;
    ensure!(r.pass, "violation {:?}", r.violation);
    ensure!(r.subsets_checked == 256 && !r.sample, "checked {} subsets", r.subsets_checked);
    let t = within(start, Duration::from_secs(1), "bilinear family")?;
    Ok(format!("256 subsets, {} evaluations, {:.3} s", r.evaluations, t.as_secs_f64()))
}

fn shattering_hypergraphs() -> Outcome {
    let mut seen = Vec::new();
    for (k, n, patterns) in [(2, 3, 8u64), (3, 2, 16)] {
        let h = build_shattering_hypergraph(k, n).map_err(err)?;
        let r = verify_shatter(&Structure::Relational(h.structure), &h.instance, DEFAULT_MAX_CELLS).map_err(err)?;
        ensure!(r.pass, "({k},{n}) violation {:?}", r.violation);
        ensure!(r.subsets_checked == patterns, "({k},{n}) checked {}", r.subsets_checked);
        seen.push(format!("({k},{n}): {patterns}"));
    }
    Ok(seen.join(", "))
}

fn tp2_suite() -> Outcome {
    let budget = Tp2Budget::default();
    let (s, inst) = tp2_pattern(3, 3).map_err(err)?;
    ensure!(inst.k == 2, "k = {}", inst.k);
    let r = check_tp2(&Structure::Relational(s.clone()), &inst, &budget).map_err(err)?;
    ensure!(r.row_clause && r.path_clause, "pattern fails: {:?} {:?}", r.row_violation, r.path_failure);

    let mut merged = s.clone();
    let keep = tp2_path_object(3, 3, &[0, 0, 0]);
    let absorbed = tp2_path_object(3, 3, &[1, 0, 0]);
    let extra: Vec<Vec<usize>> = merged.relations[0]
        .tuples
        .iter()
        .filter(|t| t[0] == absorbed)
        .map(|t| vec![keep, t[1]])
        .collect();
    for t in extra {
        merged.add_tuple(0, &t).map_err(err)?;
    }
    let r = check_tp2(&Structure::Relational(merged), &inst, &budget).map_err(err)?;
    ensure!(!r.row_clause, "merged objects pass the row clause");
    ensure!(
        r.row_violation.as_ref().is_some_and(|v| v.object == vec![Value::Elem(keep)]),
        "row violation {:?}",
        r.row_violation
    );

    let mut removed = s;
    let gone = tp2_path_object(3, 3, &[2, 0, 1]);
    removed.relations[0].tuples.retain(|t| t[0] != gone);
    let r = check_tp2(&Structure::Relational(removed), &inst, &budget).map_err(err)?;
    ensure!(r.row_clause && !r.path_clause, "removed witness not detected");
    ensure!(r.path_failure == Some(vec![2, 0, 1]), "path failure {:?}", r.path_failure);
    Ok("27 paths, both controls detected".into())
}

fn encoding_roundtrips() -> Outcome {
    let start = Instant::now();
    let mut tuples = 0;
    for seed in 0..100u64 {
        let n = 3 + (seed % 4) as usize;
        let s = random_hypergraph(3, n, 0.5, seed).map_err(err)?;
        let e = encode::encode(&s).map_err(err)?;
        let nice = check_nice(&e.graph);
        ensure!(nice.is_nice, "seed {seed}: encoding is not nice: {:?}", nice.failure);
        let back = encode::decode(&e).map_err(err)?;
        ensure!(back == s, "seed {seed}: decode(encode(A)) != A");
        tuples += s.tuple_count();
    }
    let t = within(start, Duration::from_secs(60), "encoding roundtrips")?;
    Ok(format!("100 structures, {tuples} tuples, {:.2} s", t.as_secs_f64()))
}

fn niceness() -> Outcome {
    for (name, c) in [("C5", Graph::cycle(5)), ("Petersen", Graph::petersen())] {
        let r = check_nice(&c);
        ensure!(r.is_nice && r.witness_holds(&c), "{name} rejected: {:?}", r.failure);
    }
    let k3 = check_nice(&Graph::complete(3));
    ensure!(
        matches!(k3.failure, Some(NicenessFailure::Triangle { .. })) && k3.witness_holds(&Graph::complete(3)),
        "K3: {:?}",
        k3.failure
    );
    let c4 = check_nice(&Graph::cycle(4));
    ensure!(
        matches!(c4.failure, Some(NicenessFailure::Square { .. })) && c4.witness_holds(&Graph::cycle(4)),
        "C4: {:?}",
        c4.failure
    );
    Ok("C5, Petersen accepted; K3, C4 rejected with witnesses".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("group axioms", group_axioms),
        ("G(C5) order, derived subgroup, center", c5_invariants),
        ("gamma round trip", gamma_roundtrips),
        ("taxonomy coherence on C5", taxonomy_coherence),
        ("transversal suite", transversal_suite),
        ("bilinear IP family", bilinear_family),
        ("shattering hypergraphs", shattering_hypergraphs),
        ("TP2 pattern and controls", tp2_suite),
        ("encode/decode on random 3-hypergraphs", encoding_roundtrips),
        ("niceness", niceness),
    ];
    let mut failed = Vec::new();
    // Written straight to stdout so the lines survive output capture.
    let mut out = std::io::stdout();
    writeln!(out).unwrap();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let line = match &outcome {
            Ok(detail) => format!("PASS {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed.push(i + 1);
                format!("FAIL {}: {name} ({why})", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    out.flush().unwrap();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
