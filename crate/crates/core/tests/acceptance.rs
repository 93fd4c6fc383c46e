//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spcf::cex::{build_counterexample, validate, Validation};
use spcf::delta::{delta, DeltaResult};
use spcf::heap::{ArithOp, Heap, LocId, Predicate, Storeable, Term};
use spcf::logic::{smtlib, translate_heap, BoundedSolver, Model, ProofStats, Prover, Verdict};
use spcf::machine::{Flow, Outcome, Search, State};
use spcf::oracle::{check_instantiation, concrete_eval, differential, enumerate, instantiate, ConcreteResult, NoWitness};
use spcf::syntax::{parse, Expr, Label, Op, Program, Type};
use spcf::verify::{verify, Conclusion, Config};

use common::{corpus, run_concrete, ty, Gen};

type Outcome_ = Result<String, String>;

/// Proof statistics gathered from every audited prover the suites use.
#[derive(Default)]
struct Audit {
    queries: u64,
    contradictions: u64,
    concrete_mismatches: u64,
}

impl Audit {
    fn prover(&self) -> Prover<BoundedSolver> {
        Prover::new(BoundedSolver::default()).audited()
    }

    fn absorb(&mut self, s: &ProofStats) {
        self.queries += s.solver_queries;
        self.contradictions += s.contradictions;
        self.concrete_mismatches += s.concrete_mismatches;
    }
}

const WORKED_EXAMPLE: &str = "((• (((int -> int) -> (int -> int)) -> int))
  (λ (g : (int -> int)) (λ (n : int) (div 1 (- 100 (g n))))))";

fn worked_example(audit: &mut Audit) -> Outcome_ {
    let started = Instant::now();
    let p = parse(WORKED_EXAMPLE).unwrap();
    let mut prover = audit.prover();
    let r = verify(&p, &mut prover, &Config::default(), None).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    audit.absorb(prover.stats());

    let Conclusion::Counterexample(c) = &r.conclusion else { return Err(format!("{:?}", r.conclusion)) };
    if c.validation != Validation::Validated || (c.blame, c.op) != (Label(2), Op::Div) {
        return Err(format!("{c}"));
    }
    let heap = r
        .search
        .blames()
        .find_map(|o| match o {
            Outcome::Blame { label: Label(2), heap, .. } => Some(heap),
            _ => None,
        })
        .ok_or("no blame heap")?;
    // The application of g: one case entry input ↦ output.
    let (input, output) = heap
        .iter()
        .find_map(|(_, s)| match s {
            Storeable::Case { entries, .. } if entries.len() == 1 => Some(entries[0]),
            _ => None,
        })
        .ok_or("no case mapping")?;
    let diff = Predicate::Eq(Term::bin(ArithOp::Sub, Term::Const(100), Term::Loc(output)));
    let divisor = heap
        .iter()
        .find_map(|(l, s)| match s {
            Storeable::Opaque { preds, .. } if preds.contains(&diff) => Some(l),
            _ => None,
        })
        .ok_or("no divisor refinement")?;
    if c.model.value(output) != 100 || c.model.value(divisor) != 0 {
        return Err(format!("model {:?}", c.model));
    }
    let k = c.model.value(input);
    let text = c.bindings[&Label(1)].to_string();
    let shape_ok = text.contains(&format!("(f (λ (n : int) (if (= n {k}) 100 "))
        && text.contains(&format!("(f1 {k})"));
    if !shape_ok {
        return Err(format!("binding {text}"));
    }
    match concrete_eval(&c.instantiate(&p), 100_000) {
        Ok(ConcreteResult::Err { label: Label(2), op: Op::Div }) => {}
        other => return Err(format!("re-execution gave {other:?}")),
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("case output = 100, divisor = 0, input = {k}, {} ms", elapsed.as_millis()))
}

fn higher_order_example(audit: &mut Audit) -> Outcome_ {
    let started = Instant::now();
    let mut summary = Vec::new();
    for result in ["int", "int -> int"] {
        let src = format!("((• ((int -> int) -> {result})) (λ (x : int) (div 1 x)))");
        let p = parse(&src).unwrap();
        let mut prover = audit.prover();
        let r = verify(&p, &mut prover, &Config::default(), None).map_err(|e| e.to_string())?;
        audit.absorb(prover.stats());
        if r.search.blames().any(|o| matches!(o, Outcome::Blame { label: Label(1), .. })) {
            return Err(format!("{src}: blamed the opaque"));
        }
        let Conclusion::Counterexample(c) = &r.conclusion else { return Err(format!("{src}: {:?}", r.conclusion)) };
        let text = c.bindings[&Label(1)].to_string();
        if c.blame != Label(2) || c.validation != Validation::Validated || !text.contains("(f 0)") {
            return Err(format!("{src}: {c}"));
        }
        summary.push(text);
    }
    let elapsed = started.elapsed();
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("blames ℓ2 with {}, {} ms", summary[0], elapsed.as_millis()))
}

#[derive(Default)]
struct Soundness {
    programs: usize,
    candidates: usize,
    validated: usize,
    failures: Vec<String>,
    initial_witnesses: usize,
    final_witnesses: usize,
    inconclusive: usize,
    mismatches: Vec<String>,
}

/// Blamed branches checked per site. Opaque functions returning functions
/// can be unrolled indefinitely, each unrolling ending at the same site.
const CANDIDATES_PER_LABEL: usize = 4;

/// Build a counterexample for the first few blamed branches of every site
/// (not just the first one overall) and check each one concretely and
/// against the instantiation relation.
fn check_soundness(p: &Program, audit: &mut Audit, acc: &mut Soundness) {
    acc.programs += 1;
    let mut prover = audit.prover();
    let mut found = Vec::new();
    let mut per_label: BTreeMap<Label, usize> = BTreeMap::new();
    let mut search = Search::new().max_steps(5_000).max_states(2_000);
    let report = search.run_with(p, &mut prover, |o, prover| {
        if let Outcome::Blame { label, op, heap } = o {
            let seen = per_label.entry(*label).or_default();
            *seen += 1;
            if *seen > CANDIDATES_PER_LABEL {
                return Flow::Continue;
            }
            if let Ok(c) = build_counterexample(p, prover, *label, *op, heap) {
                found.push((c, heap.clone()));
            }
        }
        Flow::Continue
    });
    if let Err(e) = report {
        acc.failures.push(format!("{p}: {e}"));
        return;
    }
    let mut concrete = Prover::new(BoundedSolver::default());
    for (c, heap) in found {
        acc.candidates += 1;
        match validate(p, &c, 1_000_000) {
            Validation::Validated => acc.validated += 1,
            v => {
                acc.failures.push(format!("{p}\n{c}{v:?}"));
                continue;
            }
        }
        let mut note = |r: Result<_, NoWitness>, count: &mut usize, what: &str| match r {
            Ok(_) => *count += 1,
            Err(NoWitness::Mismatch(why)) => acc.mismatches.push(format!("{what} {p}\n{c}{why}")),
            Err(_) => acc.inconclusive += 1,
        };
        let start = instantiate(&p.root, &c.bindings);
        let mut initial = 0;
        note(check_instantiation(&start, &State::initial(&p.root), &p.known_labels, 10_000), &mut initial, "initial");
        let mut fin = 0;
        match run_concrete(&mut concrete, start, 1_000_000) {
            Some(end) => {
                let abstract_end = State::new(Expr::Err { label: c.blame, op: c.op }, heap);
                note(check_instantiation(&end, &abstract_end, &p.known_labels, 10_000), &mut fin, "final");
            }
            None => acc.inconclusive += 1,
        }
        acc.initial_witnesses += initial;
        acc.final_witnesses += fin;
    }
    audit.absorb(prover.stats());
}

fn soundness(audit: &mut Audit) -> Outcome_ {
    let mut acc = Soundness::default();
    let hand = corpus(include_str!("data/handwritten.spcf"));
    for p in &hand {
        check_soundness(p, audit, &mut acc);
    }
    let hand_candidates = acc.candidates;
    let mut gen = Gen::new(0x5eed, &["int", "int -> int", "int -> int -> int", "(int -> int) -> int", "(int -> int) -> (int -> int)", "((int -> int) -> int) -> int"]);
    let types = [ty("int"), ty("int"), ty("int -> int")];
    for i in 0..1000 {
        let p = gen.interesting_program(&types[i % types.len()], 4);
        check_soundness(&p, audit, &mut acc);
    }
    let summary = format!(
        "{} hand-written + {} generated programs, {}/{} candidates validated ({} from hand-written), \
         instantiation witnesses: {} initial, {} final, {} inconclusive",
        hand.len(),
        acc.programs - hand.len(),
        acc.validated,
        acc.candidates,
        hand_candidates,
        acc.initial_witnesses,
        acc.final_witnesses,
        acc.inconclusive,
    );
    if hand.len() < 50 || !acc.failures.is_empty() || !acc.mismatches.is_empty() {
        let first = acc.failures.first().or(acc.mismatches.first()).cloned().unwrap_or_default();
        return Err(format!("{summary}; {} failures, {} mismatches; first: {first}", acc.failures.len(), acc.mismatches.len()));
    }
    Ok(summary)
}

/// Every combination of enumerated values for the opaques of `p`, or
/// `None` if there are more than `cap`.
fn instantiations(p: &Program, bound: u32, cap: usize) -> Option<Vec<BTreeMap<Label, Expr>>> {
    let choices: Vec<(Label, Vec<Expr>)> = p.opaque_types.iter().map(|(l, t)| (*l, enumerate(t, bound))).collect();
    let total = choices.iter().try_fold(1usize, |n, (_, c)| n.checked_mul(c.len()))?;
    if total > cap {
        return None;
    }
    let mut out = vec![BTreeMap::new()];
    for (label, values) in &choices {
        out = out
            .into_iter()
            .flat_map(|b| {
                values.iter().map(move |v| {
                    let mut b = b.clone();
                    b.insert(*label, v.clone());
                    b
                })
            })
            .collect();
    }
    Some(out)
}

fn completeness(audit: &mut Audit) -> Outcome_ {
    let mut gen = Gen::new(0xc0de, &["int", "int -> int", "(int -> int) -> int"]);
    let mut programs = 0;
    let mut runs = 0usize;
    let mut reachable_total = 0;
    let mut misses = Vec::new();
    let mut attempts = 0;
    while programs < 500 {
        attempts += 1;
        let p = gen.interesting_program(&Type::Int, 4);
        let Some(all) = instantiations(&p, 8, 50_000) else { continue };
        programs += 1;

        let mut reachable = BTreeSet::new();
        for b in &all {
            runs += 1;
            if let Ok(ConcreteResult::Err { label, op }) = concrete_eval(&p.root.plug_opaques(b), 10_000) {
                if p.known_labels.contains(&label) {
                    reachable.insert((label, op));
                }
            }
        }
        reachable_total += reachable.len();

        let mut prover = audit.prover();
        let mut found = BTreeSet::new();
        let mut search = Search::new().deadline(Instant::now() + Duration::from_secs(20));
        let r = search.run_with(&p, &mut prover, |o, prover| {
            if let Outcome::Blame { label, op, heap } = o {
                if !found.contains(&(*label, *op)) {
                    if let Ok(c) = build_counterexample(&p, prover, *label, *op, heap) {
                        if validate(&p, &c, 1_000_000) == Validation::Validated {
                            found.insert((*label, *op));
                        }
                    }
                }
            }
            Flow::Continue
        });
        audit.absorb(prover.stats());
        if let Err(e) = r {
            misses.push(format!("{p}: {e}"));
            continue;
        }
        for e in reachable.difference(&found) {
            misses.push(format!("{p}: {} at {} reachable but not found", e.1, e.0));
        }
    }
    let summary = format!(
        "{programs} programs ({} skipped as too many instantiations), {runs} concrete runs, \
         {reachable_total} reachable errors",
        attempts - programs
    );
    if misses.is_empty() {
        Ok(format!("{summary}, all found"))
    } else {
        Err(format!("{summary}, {} missed; first: {}", misses.len(), misses[0]))
    }
}

fn differential_determinism(audit: &mut Audit) -> Outcome_ {
    let mut gen = Gen::new(0xd1ff, &[]);
    let types = [ty("int"), ty("int"), ty("int"), ty("int -> int")];
    let mut errors = 0;
    let mut overflows = 0;
    for i in 0..1000 {
        let p = gen.program(&types[i % types.len()], 5);
        let mut prover = audit.prover();
        let d = differential(&p, &mut prover, 100_000, 100_000).map_err(|e| format!("{p}: {e}"))?;
        audit.absorb(prover.stats());
        if !d.agree() {
            return Err(format!("{p}: machine {} but concrete {}", d.machine, d.concrete));
        }
        match d.machine {
            spcf::oracle::Observation::Blame { .. } => errors += 1,
            spcf::oracle::Observation::Overflow => overflows += 1,
            spcf::oracle::Observation::Inconclusive(why) => return Err(format!("{p}: {why}")),
            _ => {}
        }
    }
    Ok(format!("1000 programs agree ({errors} errors, {overflows} overflows)"))
}

/// A small heap of base values: constants and opaques refined by
/// predicates over constants and earlier locations.
fn random_heap(rng: &mut ChaCha8Rng) -> Heap {
    let mut h = Heap::new();
    let n = rng.gen_range(1..=3);
    for i in 0..n {
        let l = if rng.gen_bool(0.3) {
            h.alloc(Storeable::Int(rng.gen_range(-4..=4)))
        } else {
            h.alloc(Storeable::opaque(Type::Int))
        };
        if h.int_at(l).is_some() {
            continue;
        }
        for _ in 0..rng.gen_range(0..=2) {
            let k = Term::Const(rng.gen_range(-4..=4));
            let mut p = match rng.gen_range(0..3) {
                0 => Predicate::IsZero,
                1 => Predicate::Eq(k),
                _ if i > 0 => {
                    let other = Term::Loc(LocId(rng.gen_range(0..i)));
                    let op = *[ArithOp::Add, ArithOp::Sub, ArithOp::Mul].choose(rng).unwrap();
                    Predicate::Eq(Term::bin(op, other, k))
                }
                _ => Predicate::Eq(k),
            };
            if rng.gen_bool(0.5) {
                p = p.negate();
            }
            h.refine(l, p).unwrap();
        }
    }
    h
}

fn assignments(vars: &[LocId], bound: i64) -> Vec<Model> {
    let mut out = vec![Model::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|m| {
                (-bound..=bound).map(move |k| {
                    let mut m = m.clone();
                    m.insert(*v, k);
                    m
                })
            })
            .collect();
    }
    out
}

fn delta_coverage(audit: &mut Audit) -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(0xde17a);
    let mut heaps = 0;
    let mut calls = 0;
    let mut branching = 0;
    while heaps < 200 {
        let h = random_heap(&mut rng);
        let vars: Vec<LocId> = h.base_locs().into_iter().collect();
        let space = assignments(&vars, 16);
        let phi = translate_heap(&h);
        let feasible: Vec<&Model> = space.iter().filter(|m| phi.eval(m) == Some(true)).collect();
        if feasible.is_empty() {
            continue;
        }
        heaps += 1;
        let mut prover = audit.prover();
        for op in Op::ALL {
            let args: Vec<LocId> = (0..op.arity()).map(|_| *vars.choose(&mut rng).unwrap()).collect();
            let results = delta(&mut prover, &h, op, &args).map_err(|e| e.to_string())?;
            calls += 1;
            if results.len() > 1 {
                branching += 1;
            }
            let formulas: Vec<_> = results.iter().map(|r| translate_heap(r.heap())).collect();
            for m in &feasible {
                let holding: Vec<usize> = (0..results.len()).filter(|i| formulas[*i].eval(m) == Some(true)).collect();
                let [i] = holding[..] else {
                    return Err(format!("{op} on {h} at {m:?}: {} results hold", holding.len()));
                };
                // The surviving branch must also describe what actually happens.
                let vals: Vec<i64> = args.iter().map(|a| m.value(*a)).collect();
                let actual = concrete_op(op, &vals);
                let ok = match (&results[i], actual) {
                    (DeltaResult::Error(..), Err(())) => true,
                    (DeltaResult::Val(Storeable::Int(n), _), Ok(v)) => *n == v,
                    (DeltaResult::Val(Storeable::Opaque { preds, .. }, _), Ok(v)) => {
                        preds.iter().all(|p| p.holds(v, &|l| m.get(l)) == Some(true))
                    }
                    _ => false,
                };
                if !ok {
                    return Err(format!("{op} on {h} at {m:?}: branch {:?} does not match {actual:?}", results[i]));
                }
            }
        }
        audit.absorb(prover.stats());
    }
    Ok(format!("{heaps} heaps, {calls} calls ({branching} branching), exactly one branch per assignment in [-16, 16]"))
}

fn concrete_op(op: Op, v: &[i64]) -> Result<i64, ()> {
    Ok(match op {
        Op::IsZero => i64::from(v[0] == 0),
        Op::Add1 => v[0] + 1,
        Op::Sub1 => v[0] - 1,
        Op::Add => v[0] + v[1],
        Op::Sub => v[0] - v[1],
        Op::Mul => v[0] * v[1],
        Op::Div if v[1] == 0 => return Err(()),
        Op::Div => v[0].div_euclid(v[1]),
        Op::NumEq => i64::from(v[0] == v[1]),
    })
}

fn proof_consistency(audit: &mut Audit) -> Outcome_ {
    // Direct check on concrete heaps, on top of the audit counters.
    let mut rng = ChaCha8Rng::seed_from_u64(0x9007);
    let mut prover = audit.prover();
    let mut checked = 0;
    for _ in 0..200 {
        let mut h = Heap::new();
        let locs: Vec<LocId> = (0..3).map(|_| h.alloc(Storeable::Int(rng.gen_range(-5..=5)))).collect();
        let l = *locs.choose(&mut rng).unwrap();
        let other = Term::Loc(*locs.choose(&mut rng).unwrap());
        let p = match rng.gen_range(0..4) {
            0 => Predicate::IsZero,
            1 => Predicate::Eq(Term::Const(rng.gen_range(-5..=5))),
            2 => Predicate::Eq(Term::bin(ArithOp::Add, other, Term::Const(1))),
            _ => Predicate::IsZero.negate(),
        };
        let expected = p.holds(h.int_at(l).unwrap(), &|x| h.int_at(x)).unwrap();
        let v = prover.prove(&h, l, &p).map_err(|e| e.to_string())?;
        if v != if expected { Verdict::Proved } else { Verdict::Refuted } {
            return Err(format!("{p} at {l} in {h}: {v:?}"));
        }
        checked += 1;
    }
    audit.absorb(prover.stats());
    if audit.contradictions > 0 || audit.concrete_mismatches > 0 {
        return Err(format!(
            "{} contradictions, {} concrete mismatches over {} queries",
            audit.contradictions, audit.concrete_mismatches, audit.queries
        ));
    }
    Ok(format!("{} audited solver queries, no contradictions, {checked} concrete verdicts exact", audit.queries))
}

/// Rename locations to `v0, v1, …` in order of first appearance.
fn normalize(script: &str) -> String {
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut out = String::new();
    let mut chars = script.chars().peekable();
    while let Some(c) = chars.next() {
        let starts_loc = c == 'L' && chars.peek().is_some_and(char::is_ascii_digit) && !out.ends_with(|p: char| p.is_alphanumeric());
        if !starts_loc {
            out.push(c);
            continue;
        }
        let mut name = String::from("L");
        while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
            name.push(*d);
            chars.next();
        }
        let fresh = format!("v{}", names.len());
        out.push_str(names.entry(name).or_insert(fresh));
    }
    out
}

fn translation_golden(_audit: &mut Audit) -> Outcome_ {
    // The final heap of the worked example, with the opaque function
    // already solved into a one-entry case mapping.
    let mut h = Heap::new();
    let g = h.alloc(Storeable::opaque(ty("int -> int")));
    let input = h.alloc(Storeable::opaque(Type::Int));
    let output = h.alloc(Storeable::opaque(Type::Int));
    h.extend_case(g, input, output).unwrap();
    h.alloc(Storeable::Opaque {
        ty: Type::Int,
        preds: vec![
            Predicate::Eq(Term::bin(ArithOp::Sub, Term::Const(100), Term::Loc(output))),
            Predicate::Eq(Term::Const(0)),
        ],
    });
    let script = smtlib::script("QF_NIA", &h.base_locs(), &translate_heap(&h));
    let golden = "(set-option :produce-models true)\n\
                  (set-logic QF_NIA)\n\
                  (declare-const v0 Int)\n\
                  (declare-const v1 Int)\n\
                  (declare-const v2 Int)\n\
                  (assert (= v2 (- 100 v1)))\n\
                  (assert (= v2 0))\n\
                  (check-sat)\n\
                  (get-model)\n\
                  (exit)\n";
    let got = normalize(&script);
    if got != golden {
        return Err(format!("snapshot differs:\n{got}"));
    }

    // The heap the engine actually reaches carries the same two facts.
    let p = parse(WORKED_EXAMPLE).unwrap();
    let r = verify(&p, &mut Prover::new(BoundedSolver::default()), &Config::default(), None).map_err(|e| e.to_string())?;
    let heap = r
        .search
        .blames()
        .find_map(|o| match o {
            Outcome::Blame { heap, .. } => Some(heap),
            _ => None,
        })
        .ok_or("no blame")?;
    let text = smtlib::script("QF_NIA", &heap.base_locs(), &translate_heap(heap));
    let facts = text.lines().filter(|l| l.starts_with("(assert")).collect::<Vec<_>>();
    let has_diff = facts.iter().any(|l| l.contains("(- 100 L"));
    let has_zero = facts.iter().any(|l| l.ends_with(" 0))") && l.starts_with("(assert (= L"));
    if !(has_diff && has_zero) {
        return Err(format!("engine heap translation lacks the facts:\n{text}"));
    }
    Ok("3 declarations, (= ℓ5 (- 100 ℓ4)) and (= ℓ5 0) modulo naming".into())
}

fn main() -> ExitCode {
    let mut audit = Audit::default();
    type Criterion = fn(&mut Audit) -> Outcome_;
    let criteria: [(&str, Criterion); 8] = [
        ("worked example", worked_example),
        ("higher-order argument", higher_order_example),
        ("soundness", soundness),
        ("relative completeness", completeness),
        ("differential determinism", differential_determinism),
        ("delta coverage and exclusivity", delta_coverage),
        ("proof consistency", proof_consistency),
        ("translation golden", translation_golden),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = run(&mut audit);
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(summary) => println!("PASS criterion {} ({name}): {summary} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
