//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any blocking
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use publicspeak::corpus::{parse_datetime, serialize_corpus, Arity, Category, LabelRecord, LabelSet, Meeting, Role, Utterance};
use publicspeak::evaluate::{run_experiment, ExperimentConfig, ExperimentReport, LabelLedger, Method, Protocol, Purpose, RunInputs};
use publicspeak::featurize::{serialize_predicate_tables, structural_atoms, PredicateTable};
use publicspeak::learn::{learn_weights, Example, GridPoint, LearnConfig};
use publicspeak::logic::{build_model, default_weights, Model, distance_to_satisfaction, ground, luk_and, luk_implies, luk_not, luk_or, WeightMap};
use publicspeak::pipeline::{observed_atoms, predict_meeting};
use publicspeak::solve::{brute_force_infer, evaluate_objective, map_infer, SolverConfig};
use publicspeak::synth::{default_profiles, frequent_hearings_profile, generate_corpus, random_mrf, SyntheticCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tolerance on the end-to-end synthetic PC-F1 target.
const E2E_TARGET: f64 = 0.90;
const E2E_TOLERANCE: f64 = 0.02;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn inputs(s: &SyntheticCorpus) -> RunInputs<'_> {
    RunInputs { corpus: &s.corpus, tables: &s.tables, locales: &s.locales }
}

fn run(s: &SyntheticCorpus, cfg: &ExperimentConfig) -> ExperimentReport {
    run_experiment(inputs(s), cfg, &LabelLedger::new()).expect("experiment runs")
}

fn mean(report: &ExperimentReport, arity: Arity) -> f64 {
    report.overall_at(arity).expect("arity evaluated").mean_pc_f1
}

fn light(epochs: usize) -> Vec<GridPoint> {
    vec![GridPoint { learn: LearnConfig { epochs, ..Default::default() }, ..Default::default() }]
}

// ---------------------------------------------------------------------------

fn c1_lukasiewicz() -> Verdict {
    let t = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let and_oracle = |v: &[f64]| (v.iter().sum::<f64>() - (v.len() as f64 - 1.0)).max(0.0);
    let mut failures = Vec::new();

    let table: [(&[f64], f64); 3] = [(&[1.0, 1.0], 1.0), (&[0.5, 0.7], 0.2), (&[0.3, 0.4, 0.2], 0.0)];
    for (v, want) in table {
        if !close(luk_and(v), want) {
            failures.push(format!("luk_and({v:?}) = {}", luk_and(v)));
        }
    }
    if luk_and(&[]) != 1.0 {
        failures.push("empty conjunction".into());
    }
    for (v, want) in [(0.0, 1.0), (1.0, 0.0), (0.3, 0.7)] {
        if !close(luk_not(v), want) {
            failures.push(format!("luk_not({v})"));
        }
    }
    for (b, h, want) in [(1.0, 1.0, 0.0), (0.8, 0.3, 0.5), (0.2, 0.9, 0.0)] {
        if !close(distance_to_satisfaction(b, h), want) {
            failures.push(format!("distance({b}, {h})"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=5);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        // Exact endpoints show up often in real groundings.
        if rng.gen_bool(0.2) {
            let i = rng.gen_range(0..n);
            v[i] = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
        }
        let a = luk_and(&v);
        if !close(a, and_oracle(&v)) || !(0.0..=1.0).contains(&a) {
            failures.push(format!("luk_and({v:?}) = {a}"));
        }
        let mut rev = v.clone();
        rev.reverse();
        if !close(luk_and(&rev), a) {
            failures.push(format!("luk_and not symmetric on {v:?}"));
        }
        let mut up = v.clone();
        up[0] = (up[0] + rng.gen::<f64>() * (1.0 - up[0])).min(1.0);
        if luk_and(&up) + 1e-12 < a {
            failures.push(format!("luk_and not monotone on {v:?}"));
        }
        if luk_and(&v[..1]) != v[0] {
            failures.push(format!("luk_and([x]) != x for {}", v[0]));
        }
        let x = v[0];
        if luk_not(x) != 1.0 - x || !close(luk_not(luk_not(x)), x) {
            failures.push(format!("luk_not({x})"));
        }
        let or_dual = luk_not(luk_and(&v.iter().map(|&y| luk_not(y)).collect::<Vec<_>>()));
        if !close(luk_or(&v), or_dual) {
            failures.push(format!("De Morgan on {v:?}"));
        }
        let (b, h) = (rng.gen::<f64>(), if rng.gen_bool(0.1) { v[0] } else { rng.gen::<f64>() });
        let (b, h) = if rng.gen_bool(0.1) { (h, h) } else { (b, h) };
        let d = distance_to_satisfaction(b, h);
        let implication = (1.0 - b + h).min(1.0);
        if d != (b - h).max(0.0) || !close(luk_implies(b, h), implication) || ((d == 0.0) != (implication == 1.0)) {
            failures.push(format!("distance/implication at ({b}, {h})"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 1.0;
    let first = failures.first().cloned().unwrap_or_default();
    verdict(pass, format!("10^4 random inputs, {} identity failures {first}, {secs:.3}s (< 1s)", failures.len()))
}

fn c2_solver_oracle() -> Verdict {
    let t = Instant::now();
    let cfg = SolverConfig::default();
    let (mut worst, mut infeasible, mut above, mut p1, mut p2) = (0.0f64, 0, 0, 0, 0);
    let instances = 60;
    for seed in 1000..1000 + instances {
        let mrf = random_mrf(seed, 8);
        assert!(mrf.num_vars() <= 8);
        p1 += mrf.potentials.iter().filter(|p| p.exponent == 1).count();
        p2 += mrf.potentials.iter().filter(|p| p.exponent == 2).count();
        let admm = map_infer(&mrf, &cfg).expect("admm");
        let brute = brute_force_infer(&mrf, 0.05).expect("brute force");
        if mrf.check_feasible(&admm.values, 1e-4).is_err() {
            infeasible += 1;
        }
        let obj = evaluate_objective(&mrf, &admm.values).unwrap_or(f64::INFINITY);
        if obj > brute.objective + 1e-3 {
            above += 1;
        }
        worst = worst.max((obj - brute.objective).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = infeasible == 0 && above == 0 && worst <= 1e-3 && secs < 60.0 && p1 > 0 && p2 > 0;
    verdict(
        pass,
        format!(
            "{instances} Mrfs ({p1} linear, {p2} squared hinges), max |gap| {worst:.2e} (<= 1e-3), {infeasible} infeasible, {secs:.1}s (< 60s)"
        ),
    )
}

fn counting_meeting(n: usize) -> Meeting {
    let s = n.min(3);
    let utts = (0..n).map(|i| Utterance::new("m", format!("u{i}"), i, format!("s{}", i % s), "some words here")).collect();
    Meeting::new("m", "c", parse_datetime("2024-01-01").unwrap(), utts).unwrap()
}

fn c3_grounding_counts() -> Verdict {
    let mut mismatches = Vec::new();
    for n in [1usize, 5, 50] {
        let s = n.min(3);
        let m = counting_meeting(n);
        for arity in [Arity::Two, Arity::Three] {
            let r = arity.remark_kinds().len();
            let mrf = ground(&build_model(arity, &WeightMap::new()).unwrap(), &m, &structural_atoms(&m), None).unwrap();
            let count = |prefix: &str| -> (usize, usize) {
                let inst = mrf.rules.iter().zip(&mrf.stats).filter(|(ri, _)| ri.id.starts_with(prefix)).map(|(_, st)| st.instantiated).sum();
                let idx: BTreeSet<usize> = mrf.rules.iter().enumerate().filter(|(_, ri)| ri.id.starts_with(prefix)).map(|(i, _)| i).collect();
                (inst, mrf.potentials.iter().filter(|p| idx.contains(&p.rule)).count())
            };
            // Only structural atoms are observed, so every rule whose body
            // needs another observed predicate is dropped.
            let expected = [
                ("open variables", mrf.num_vars(), 3 * n + r * n + 2 * s),
                ("constraint groups", mrf.constraints.len(), 2 * n + s),
                ("section transitions", count("section_transition.").0, 9 * (n - 1)),
                ("section transition potentials", count("section_transition.").1, 9 * (n - 1)),
                ("remark transitions", count("remark_transition.").1, r * r * (n - 1)),
                ("section x role -> remark", count("c2sp.").1, 2 * r * n),
                ("first utterance", count("first_other").1, 1),
                ("role prior", count("negative_prior").1, s),
                ("comment transition", count("comment_transition").1, 0),
                ("all potentials", mrf.potentials.len(), s + 1 + 9 * (n - 1) + r * r * (n - 1) + 2 * r * n),
            ];
            for (what, got, want) in expected {
                if got != want {
                    mismatches.push(format!("n={n} arity {arity}: {what} {got} != {want}"));
                }
            }
        }
    }
    let detail = if mismatches.is_empty() {
        "n in {1, 5, 50} at arity 2 and 3: all counts match the closed forms".to_string()
    } else {
        mismatches.join("; ")
    };
    verdict(mismatches.is_empty(), detail)
}

struct Chrono {
    learned: ExperimentReport,
    uniform: ExperimentReport,
}

fn chrono_runs(seed: u64) -> Chrono {
    let s = generate_corpus(&default_profiles(), 20, seed).unwrap();
    let cfg = ExperimentConfig { seed, ..Default::default() };
    Chrono {
        learned: run(&s, &cfg),
        uniform: run(&s, &ExperimentConfig { learn: false, ..cfg }),
    }
}

fn c4_end_to_end(seed0: &Chrono, secs_seed0: f64) -> Verdict {
    let t = Instant::now();
    let three = mean(&seed0.learned, Arity::Three);
    let two = mean(&seed0.learned, Arity::Two);

    let mut noisy = default_profiles();
    for p in &mut noisy {
        p.phrase_noise = 0.3;
    }
    let s = generate_corpus(&noisy, 20, 0).unwrap();
    let ps = mean(&run(&s, &ExperimentConfig::default()), Arity::Three);
    let pr = mean(&run(&s, &ExperimentConfig { method: Method::PhrasesRoles, ..Default::default() }), Arity::Three);

    let secs = secs_seed0 + t.elapsed().as_secs_f64();
    let floor = E2E_TARGET - E2E_TOLERANCE;
    let pass = three >= floor && ps > pr && secs < 600.0;
    verdict(
        pass,
        format!(
            "140 meetings: 3-class PC-F1 {three:.3} (>= {E2E_TARGET} - {E2E_TOLERANCE}), 2-class {two:.3}; \
             phrase noise 0.3: PublicSpeak {ps:.3} vs Phrases+Roles {pr:.3}; {secs:.0}s (< 600s)"
        ),
    )
}

fn c5_three_vs_two() -> Verdict {
    let mut per_seed = Vec::new();
    for seed in 0..5 {
        let s = generate_corpus(&[frequent_hearings_profile()], 40, seed).unwrap();
        let r = run(&s, &ExperimentConfig { seed, ..Default::default() });
        per_seed.push((mean(&r, Arity::Two), mean(&r, Arity::Three)));
    }
    let two = per_seed.iter().map(|p| p.0).sum::<f64>() / 5.0;
    let three = per_seed.iter().map(|p| p.1).sum::<f64>() / 5.0;
    let wins = per_seed.iter().filter(|p| p.1 >= p.0).count();
    let seeds: Vec<String> = per_seed.iter().map(|(a, b)| format!("{a:.3}/{b:.3}")).collect();
    verdict(
        three >= two,
        format!(
            "frequent-hearings, 5 seeds: mean 3-class {three:.3} vs 2-class {two:.3}; \
             3-class >= 2-class on {wins}/5 seeds (2/3 per seed: {})",
            seeds.join(" ")
        ),
    )
}

fn c6_loco() -> Verdict {
    let s = generate_corpus(&default_profiles(), 10, 0).unwrap();
    let held = "eastbay";
    let held_ids: BTreeSet<String> = s.corpus.meetings.iter().filter(|m| m.city == held).map(|m| m.meeting_id.clone()).collect();
    let cfg = ExperimentConfig { protocol: Protocol::Loco, grid: light(3), ..Default::default() };

    let ledger = LabelLedger::new();
    let one = run_experiment(inputs(&s), &ExperimentConfig { held_out: Some(held.into()), ..cfg.clone() }, &ledger).unwrap();
    let leaked: Vec<(String, Purpose)> = ledger.entries().into_iter().filter(|(id, p)| held_ids.contains(id) && *p != Purpose::Score).collect();
    let scored = ledger.meetings_read_for(Purpose::Score);
    let trained = ledger.meetings_read_for(Purpose::Train);
    let mechanics = leaked.is_empty()
        && !scored.is_empty()
        && scored.is_subset(&held_ids)
        && !trained.is_empty()
        && one.cities.len() == 1
        && one.cities[0].city == held;

    let t = Instant::now();
    let all = run(&s, &cfg);
    let secs = t.elapsed().as_secs_f64();
    let reported: BTreeSet<&str> = all.cities.iter().filter(|c| c.results.len() == 2).map(|c| c.city.as_str()).collect();
    let cities: BTreeSet<&str> = s.corpus.cities.iter().map(String::as_str).collect();
    let pass = mechanics && reported == cities;
    verdict(
        pass,
        format!(
            "held-out {held}: {} non-score reads of its labels, {} scored meetings all from {held}, {} training reads; \
             all-city LOCO reported {}/{} cities (3-class mean {:.3}) in {secs:.0}s",
            leaked.len(),
            scored.len(),
            trained.len(),
            reported.len(),
            cities.len(),
            mean(&all, Arity::Three)
        ),
    )
}

fn all_other_meeting() -> (Meeting, LabelSet) {
    let m = counting_meeting(6);
    let recs: BTreeMap<String, LabelRecord> =
        m.utterances.iter().map(|u| (u.utterance_id.clone(), LabelRecord::new(Category::Other, Role::Other))).collect();
    let l = LabelSet::for_meeting(&m, recs).unwrap();
    (m, l)
}

/// Every rule except the transitions between different kinds, which no
/// labeling can satisfy all at once.
fn jointly_satisfiable(arity: Arity) -> Model {
    let full = build_model(arity, &WeightMap::new()).unwrap();
    let rules = full
        .rules
        .into_iter()
        .filter(|r| {
            let parts: Vec<&str> = r.id.split('.').collect();
            !(matches!(parts[0], "section_transition" | "remark_transition") && parts[1] != parts[2])
        })
        .collect();
    Model { arity, rules }
}

fn c7_learning(seed0: &Chrono) -> Verdict {
    // All-Other gold satisfies every rule of the subset, and it is the only
    // zero-energy state, so both feature totals vanish. Squared hinges are
    // flat near that state: at the default tolerance ADMM stops about 3e-3
    // from the vertex, outside the snapping range, so the exact check uses
    // a tighter solver and the default drift is reported alongside.
    let (m, l) = all_other_meeting();
    let ex = Example { meeting: &m, labels: &l, observed: structural_atoms(&m) };
    let tight = SolverConfig { eps_abs: 1e-7, eps_rel: 1e-7, ..Default::default() };
    let cfg = LearnConfig { epochs: 10, ..Default::default() };
    let mut fixed = true;
    let mut drift = 0.0f64;
    let mut rules = 0;
    for arity in [Arity::Two, Arity::Three] {
        let model = jointly_satisfiable(arity);
        rules += model.soft_rules().count();
        fixed &= learn_weights(&model, &[ex.clone()], &cfg, &tight).unwrap() == model.weights();
        let loose = learn_weights(&model, &[ex.clone()], &cfg, &SolverConfig::default()).unwrap();
        drift = loose.iter().map(|(k, v)| (v - model.weights()[k]).abs()).fold(drift, f64::max);
    }

    let mut rows = Vec::new();
    let mut improves = true;
    for seed in 0..3u64 {
        let owned;
        let c = if seed == 0 {
            seed0
        } else {
            owned = chrono_runs(seed);
            &owned
        };
        for a in [Arity::Two, Arity::Three] {
            let (l, u) = (mean(&c.learned, a), mean(&c.uniform, a));
            improves &= l >= u;
            rows.push(format!("s{seed}/{a}: {l:.3} vs {u:.3}"));
        }
    }
    verdict(
        fixed && improves,
        format!("zero-gradient fixed point exact over {rules} soft rules at eps 1e-7: {fixed} (drift at default eps {drift:.1e}); learned vs uniform PC-F1 {}", rows.join(", ")),
    )
}

fn c8_scale_invariance() -> Verdict {
    let s = generate_corpus(&default_profiles(), 3, 8).unwrap();
    let meetings: Vec<&Meeting> = s.corpus.meetings.iter().take(20).collect();
    let solver = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut changed = 0;
    let mut labels = 0;
    for arity in [Arity::Two, Arity::Three] {
        let base: WeightMap = default_weights(arity).into_iter().map(|(k, v)| (k, v * rng.gen_range(0.5..2.0))).collect();
        for m in &meetings {
            let locale = s.locales[&m.city].compile().unwrap();
            let obs = observed_atoms(m, &locale, s.tables.get(&m.meeting_id), arity).unwrap();
            let predict = |w: &WeightMap| predict_meeting(&build_model(arity, w).unwrap(), m, &obs, &solver).unwrap().0.labels();
            let reference = predict(&base);
            labels += reference.len();
            for c in [0.5, 2.0, 10.0] {
                let scaled: WeightMap = base.iter().map(|(k, v)| (k.clone(), v * c)).collect();
                changed += predict(&scaled).iter().zip(&reference).filter(|(a, b)| a != b).count();
            }
        }
    }
    verdict(
        changed == 0 && meetings.len() == 20,
        format!("{} meetings, {labels} labels x 3 scales at arity 2 and 3: {changed} labels changed", meetings.len()),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_publicspeak")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

const RAW_MEETING: &str = r#"{"meeting_id": "r1", "city": "harborview", "held_at": "2024-05-07T19:00:00", "segments": [
  {"speaker_id": "chair", "text": "Good evening, the meeting will come to order."},
  {"speaker_id": "chair", "text": "Next is general public comment."},
  {"speaker_id": "r1", "text": "My name is Dana and I live on Pine Street. The crosswalk near the school needs a light."},
  {"speaker_id": "chair", "text": "Thank you. Next item."}
]}"#;

/// Every command run twice into separate directories; all outputs compared.
fn c9_determinism() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("light.toml"), "[[grid]]\n[grid.learn]\nepochs = 2\n").unwrap();
    fs::write(d.join("raw.json"), RAW_MEETING).unwrap();
    let mut compared = 0;
    let mut differing = Vec::new();
    let result = (|| -> Result<(), String> {
        for r in ["a", "b"] {
            fs::create_dir_all(d.join(r)).unwrap();
            let data = ["--corpus", "data/corpus.json", "--locales", "data/locales", "--tables", "data/tables.jsonl"];
            let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
                head.iter().chain(data.iter()).chain(tail.iter()).map(|s| s.to_string()).collect()
            };
            let rd = d.join(r);
            let call = |args: Vec<String>| cli(&rd, &args.iter().map(String::as_str).collect::<Vec<_>>());
            call(["--seed", "5", "synth", "--cities", "2", "--meetings", "6", "-o", "data"].map(String::from).to_vec())?;
            fs::write(rd.join("ingest.json"), call(vec!["ingest".into(), "../raw.json".into()])?).unwrap();
            fs::write(
                rd.join("featurize.jsonl"),
                call(vec!["featurize".into(), "--corpus".into(), "data/corpus.json".into(), "--locales".into(), "data/locales".into()])?,
            )
            .unwrap();
            fs::write(rd.join("infer.json"), call(with(&["infer"], &[]))?).unwrap();
            call(with(&["--seed", "5", "learn"], &["--epochs", "2", "--log", "learn.csv", "-o", "weights.json"]))?;
            call(with(&["--seed", "5", "--config", "../light.toml", "eval"], &["-o", "eval"]))?;
            fs::write(rd.join("report.txt"), call(vec!["report".into(), "eval/report.json".into()])?).unwrap();
        }
        Ok(())
    })();
    if let Err(e) = result {
        return verdict(false, format!("command failed: {e}"));
    }
    let files = collect_files(&d.join("a"), &d.join("a"));
    for rel in &files {
        compared += 1;
        let a = fs::read(d.join("a").join(rel)).unwrap();
        let b = fs::read(d.join("b").join(rel)).unwrap_or_default();
        if a != b {
            differing.push(rel.clone());
        }
    }
    verdict(
        differing.is_empty() && compared >= 12,
        format!("synth, ingest, featurize, infer, learn, eval, report run twice: {compared} output files compared, differing: {differing:?}"),
    )
}

fn collect_files(root: &Path, dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            out.extend(collect_files(root, &p));
        } else {
            out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
        }
    }
    out
}

/// A labeled corpus and predicate tables written as plain files, as an
/// external user would supply them, evaluated through the CLI.
fn c10_real_data_shape() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let d = tmp.path();
    let s = generate_corpus(&default_profiles()[..3], 8, 11).unwrap();
    fs::write(d.join("corpus.json"), serialize_corpus(&s.corpus)).unwrap();
    let tables: Vec<PredicateTable> = s.tables.values().cloned().collect();
    fs::write(d.join("tables.jsonl"), serialize_predicate_tables(&tables)).unwrap();
    fs::create_dir(d.join("locales")).unwrap();
    for (city, l) in &s.locales {
        fs::write(d.join("locales").join(format!("{city}.toml")), l.to_toml_string()).unwrap();
    }
    fs::write(d.join("light.toml"), "[[grid]]\n[grid.learn]\nepochs = 3\n").unwrap();
    let args = [
        "--config", "light.toml", "eval", "--corpus", "corpus.json", "--locales", "locales", "--tables", "tables.jsonl", "-o", "out",
    ];
    let table = match cli(d, &args) {
        Ok(out) => String::from_utf8(out).unwrap(),
        Err(e) => return verdict(false, e),
    };
    let lines: Vec<&str> = table.lines().collect();
    let header_ok = lines.get(1).is_some_and(|h| h.starts_with("City") && h.contains("2-Class") && h.contains("3-Class"));
    let rows_ok = s.corpus.cities.iter().all(|c| lines.iter().any(|l| l.starts_with(c.as_str()) && l.split_whitespace().count() == 3));
    let overall_ok = lines.iter().any(|l| l.starts_with("Overall"));
    let saved = fs::read_to_string(d.join("out/report.txt")).unwrap_or_default() == table;
    verdict(
        header_ok && rows_ok && overall_ok && saved,
        format!("{} cities from external files -> per-city 2-Class/3-Class table with overall rows", s.corpus.cities.len()),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let mut lines: Vec<(u8, bool, bool, String)> = Vec::new();
    let mut record = |id: u8, name: &str, blocking: bool, f: &mut dyn FnMut() -> Verdict| {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let status = if v.pass { "PASS" } else { "FAIL" };
        let line = format!("criterion {id:>2} {status} {name}: {}", v.detail);
        println!("{line}");
        lines.push((id, v.pass, blocking, line));
    };

    record(1, "Lukasiewicz suite", true, &mut c1_lukasiewicz);
    record(2, "solver-oracle equivalence", true, &mut c2_solver_oracle);
    record(3, "grounding counts", true, &mut c3_grounding_counts);

    let t = Instant::now();
    let seed0 = chrono_runs(0);
    let secs_seed0 = t.elapsed().as_secs_f64();
    record(4, "end-to-end synthetic", true, &mut || c4_end_to_end(&seed0, secs_seed0));
    record(5, "3-class >= 2-class on frequent hearings", true, &mut c5_three_vs_two);
    record(6, "LOCO mechanics", true, &mut c6_loco);
    record(7, "weight-learning sanity", true, &mut || c7_learning(&seed0));
    record(8, "scale invariance", true, &mut c8_scale_invariance);
    record(9, "determinism", true, &mut c9_determinism);
    record(10, "real-data readiness (non-blocking)", false, &mut c10_real_data_shape);

    let failed = lines.iter().filter(|(_, pass, blocking, _)| !pass && *blocking).count();
    let passed = lines.iter().filter(|l| l.1).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
