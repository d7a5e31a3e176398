//! One pass/fail line per primary acceptance criterion.
//!
//! Exits nonzero only when a criterion fails that is not listed in
//! `KNOWN_FAILURES`; those are printed as FAIL with their analysis.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentiment_cli::run_command;
use sentiment_core::annotate::{AnnotationStore, AnnotatorPolicy, Judgment, Verdict};
use sentiment_core::corpus::{split, SentimentLabel, SplitPlan, SurveyRecord};
use sentiment_core::encoder::{attention, loss_and_grad, EncoderConfig, EncoderParams, Example, CLS, PAD};
use sentiment_core::eval::{class_metrics, confusion, ConfusionMatrix, Overrides, run_approach};
use sentiment_core::published::{reproduce, TableKind, PUBLISHED};
use sentiment_core::synth::separable_corpus;
use sentiment_core::train::{Approach, FitOptions, DESK_LEARNING_RATE};
use sentiment_core::Matrix64;

type Outcome = Result<String, String>;

/// Criteria expected to fail, with the reason printed next to them.
const KNOWN_FAILURES: [(&str, &str); 1] = [(
    "table reproduction",
    "the published third-approach matrix gives positive recall 40/60 = 0.667 against a printed 0.678; \
     no rounding of the printed counts reaches 0.678",
)];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let r = reproduce();
    let elapsed = start.elapsed();
    // independent recount of each printed per-class cell
    for p in &PUBLISHED {
        let c = p.reference_negative;
        let (tp, fp, fneg, tn) = (c.true_pos as f64, c.false_pos as f64, c.false_neg as f64, c.true_neg as f64);
        let n = tp + fp + fneg + tn;
        let f1 = |pr: f64, rc: f64| 2.0 * pr * rc / (pr + rc);
        let neg = [(tp + tn) / n, tp / (tp + fp), tp / (tp + fneg), f1(tp / (tp + fp), tp / (tp + fneg))];
        let pos = [(tp + tn) / n, tn / (tn + fneg), tn / (tn + fp), f1(tn / (tn + fneg), tn / (tn + fp))];
        for (table, want) in [(TableKind::NegativeReference, neg), (TableKind::PositiveReference, pos)] {
            let got: Vec<f64> = r
                .cells
                .iter()
                .filter(|x| x.table == table && x.approach == p.approach)
                .map(|x| x.recomputed.unwrap())
                .collect();
            for (g, w) in got.iter().zip(want) {
                ensure((g - w).abs() < 1e-12, || format!("{:?} {table:?}: engine {g} vs recount {w}", p.approach))?;
            }
        }
    }
    let third_macro: Vec<f64> = r
        .cells
        .iter()
        .filter(|c| c.table == TableKind::Macro && c.approach == Approach::Third)
        .map(|c| c.printed)
        .collect();
    ensure(third_macro == [0.824, 0.824, 0.798, 0.804], || format!("third macro row {third_macro:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    let failures: Vec<String> = r
        .failures()
        .map(|c| {
            format!(
                "approach {} {} ({:?}): {:.4} vs {:.3}, delta {:+.4} > {:.2}",
                c.approach.id(),
                c.metric,
                c.table,
                c.recomputed.unwrap_or(f64::NAN),
                c.printed,
                c.delta().unwrap_or(f64::NAN),
                c.tolerance
            )
        })
        .collect();
    let worst_macro = r
        .cells
        .iter()
        .filter(|c| c.table == TableKind::Macro)
        .filter_map(|c| c.delta())
        .fold(0.0f64, |m, d| m.max(d.abs()));
    if failures.is_empty() {
        Ok(format!("36 cells within tolerance, worst macro delta {worst_macro:.4}, {elapsed:?}"))
    } else {
        Err(format!("{} of 36 cells out of tolerance: {}", failures.len(), failures.join("; ")))
    }
}

fn bag_of_words_accuracy(train: &[SurveyRecord], test: &[SurveyRecord]) -> f64 {
    let mut index = BTreeMap::new();
    for r in train {
        for w in r.text.split_whitespace() {
            let next = index.len();
            index.entry(w.to_owned()).or_insert(next);
        }
    }
    let features = |r: &SurveyRecord| {
        let mut x = vec![0.0; index.len()];
        for w in r.text.split_whitespace() {
            if let Some(&i) = index.get(w) {
                x[i] += 1.0;
            }
        }
        x
    };
    let target = |r: &SurveyRecord| if r.label == Some(SentimentLabel::Positive) { 1.0 } else { 0.0 };
    let xs: Vec<Vec<f64>> = train.iter().map(features).collect();
    let (mut w, mut b) = (vec![0.0; index.len()], 0.0);
    for _ in 0..300 {
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (x, r) in xs.iter().zip(train) {
            let z: f64 = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - target(r);
            gb += err;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
        }
        let n = train.len() as f64;
        b -= 0.5 * gb / n;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= 0.5 * g / n;
        }
    }
    let correct = test
        .iter()
        .filter(|r| {
            let x = features(r);
            let z: f64 = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            (z > 0.0) == (target(r) == 1.0)
        })
        .count();
    correct as f64 / test.len() as f64
}

fn synthetic_accuracy() -> Outcome {
    let seed = 42;
    let corpus = separable_corpus(350, seed);
    ensure(corpus.len() == 700, || format!("corpus has {} records", corpus.len()))?;
    let (train, test) = split(&corpus, &SplitPlan::fractional(0.8, seed)).map_err(|e| e.to_string())?;
    let oracle = bag_of_words_accuracy(&train, &test);
    ensure(oracle >= 0.90, || format!("bag-of-words oracle only {oracle:.3}"))?;
    let start = Instant::now();
    let overrides = Overrides {
        learning_rate: Some(DESK_LEARNING_RATE),
        ..Overrides::default()
    };
    let run = run_approach::<f64>(&corpus, Approach::Second, seed, &FitOptions::default(), &overrides).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let acc = run.report.macro_avg.accuracy.unwrap_or(0.0);
    ensure(acc >= 0.90, || format!("macro accuracy {acc:.3}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "macro accuracy {acc:.3} on {} test records in {:.1}s, bag-of-words oracle {oracle:.3}",
        run.test_size,
        elapsed.as_secs_f64()
    ))
}

fn gradient_check() -> Outcome {
    const EPS: f64 = 1e-4;
    let config = EncoderConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 1,
        d_ff: 16,
        max_len: 6,
        n_classes: 2,
    };
    let batch = vec![
        Example {
            tokens: vec![CLS, 3, 4, 5, PAD, PAD],
            label: SentimentLabel::Positive,
        },
        Example {
            tokens: vec![CLS, 6, 7, 8, 9, 10],
            label: SentimentLabel::Negative,
        },
        Example {
            tokens: vec![CLS, 11, 1, PAD, PAD, PAD],
            label: SentimentLabel::Positive,
        },
    ];
    let loss = |p: &EncoderParams<f64>| loss_and_grad(&batch, p).unwrap().0;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut components = 0;
    for seed in 0..5 {
        let params = EncoderParams::<f64>::init_dense(config, 12, seed, 0.5).map_err(|e| e.to_string())?;
        let (_, grads) = loss_and_grad(&batch, &params).map_err(|e| e.to_string())?;
        for t in 0..params.tensors().len() {
            for i in 0..params.tensors()[t].len() {
                let mut plus = params.clone();
                plus.tensors_mut()[t].as_mut_slice()[i] += EPS;
                let mut minus = params.clone();
                minus.tensors_mut()[t].as_mut_slice()[i] -= EPS;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * EPS);
                let analytic = grads.tensors()[t].as_slice()[i];
                let scale = analytic.abs().max(numeric.abs());
                let rel = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
                worst = worst.max(rel);
                components += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-4, || format!("max relative error {worst:.2e}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{components} components over 5 seeds, max relative error {worst:.2e}, {elapsed:?}"))
}

fn attention_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let l = rng.random_range(1..=5);
        let dk = rng.random_range(1..=8);
        let mut draw = || -> Vec<Vec<f64>> { (0..l).map(|_| (0..dk).map(|_| rng.random_range(-3.0..3.0)).collect()).collect() };
        let (q, k, v) = (draw(), draw(), draw());
        let (out, w) = attention(&Matrix64::from_rows(&q), &Matrix64::from_rows(&k), &Matrix64::from_rows(&v)).map_err(|e| e.to_string())?;
        for i in 0..l {
            let scores: Vec<f64> = k.iter().map(|kj| q[i].iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (dk as f64).sqrt()).collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            let row_sum: f64 = w.row(i).iter().sum();
            ensure((row_sum - 1.0).abs() <= 1e-9, || format!("case {case}: row {i} sums to {row_sum}"))?;
            for j in 0..l {
                let d = (w[(i, j)] - scores[j].exp() / z).abs();
                worst = worst.max(d);
                ensure(d <= 1e-10, || format!("case {case}: weight ({i},{j}) off by {d:e}"))?;
            }
            for c in 0..dk {
                let naive: f64 = (0..l).map(|j| scores[j].exp() / z * v[j][c]).sum();
                let lo = v.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
                let hi = v.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
                let x = out[(i, c)];
                ensure(x >= lo - 1e-12 && x <= hi + 1e-12, || format!("case {case}: output ({i},{c}) outside hull"))?;
                let d = (x - naive).abs();
                worst = worst.max(d);
                ensure(d <= 1e-10, || format!("case {case}: output ({i},{c}) off by {d:e}"))?;
            }
        }
    }
    Ok(format!("1000 instances, max deviation from naive {worst:.1e}"))
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut checked = 0;
    for _ in 0..1000 {
        let mut draw = || if rng.random_bool(0.1) { 0 } else { rng.random_range(0..60u64) };
        let cm = ConfusionMatrix::new(draw(), draw(), draw(), draw());
        if cm.total() == 0 {
            continue;
        }
        // recount from expanded (prediction, truth) pairs for the reference class
        let mut pairs = Vec::new();
        for (n, pred, truth) in [(cm.true_pos, true, true), (cm.false_pos, true, false), (cm.false_neg, false, true), (cm.true_neg, false, false)] {
            pairs.extend(std::iter::repeat_n((pred, truth), n as usize));
        }
        let count = |f: &dyn Fn(&(bool, bool)) -> bool| pairs.iter().filter(|p| f(p)).count() as f64;
        let div = |a: f64, b: f64| if b == 0.0 { None } else { Some(a / b) };
        let precision = div(count(&|p| p.0 && p.1), count(&|p| p.0));
        let recall = div(count(&|p| p.0 && p.1), count(&|p| p.1));
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let want = [div(count(&|p| p.0 == p.1), pairs.len() as f64), precision, recall, f1];
        let m = class_metrics::<f64>(&cm);
        let got = [m.accuracy, m.precision, m.recall, m.f1];
        for (g, w) in got.iter().zip(&want) {
            let ok = match (g, w) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            ensure(ok, || format!("{cm:?}: {got:?} vs {want:?}"))?;
        }
        checked += 1;
    }
    use SentimentLabel::{Negative, Positive};
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let mut pick = || if rng.random_bool(0.5) { Positive } else { Negative };
        let preds: Vec<_> = (0..n).map(|_| pick()).collect();
        let truths: Vec<_> = (0..n).map(|_| pick()).collect();
        let neg = confusion(&preds, &truths, Negative).map_err(|e| e.to_string())?;
        let pos = confusion(&preds, &truths, Positive).map_err(|e| e.to_string())?;
        ensure(pos == neg.swap() && pos.swap() == neg, || format!("swap duality broken for {neg:?} / {pos:?}"))?;
        let (a, b) = (class_metrics::<f64>(&pos), class_metrics::<f64>(&neg.swap()));
        ensure(a == b, || format!("metrics differ after swap: {a:?} vs {b:?}"))?;
    }
    Ok(format!("{checked} matrices match recount to 1e-12, swap duality exact on 1000 prediction sets"))
}

fn split_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let corpus_of = |rng: &mut ChaCha8Rng, n: usize| -> Vec<SurveyRecord> {
        (0..n)
            .map(|i| {
                let label = if rng.random_bool(0.4) { SentimentLabel::Positive } else { SentimentLabel::Negative };
                SurveyRecord::new(format!("r{i}"), format!("TEXT {i}"), "en").with_label(label)
            })
            .collect()
    };
    let ids = |rs: &[SurveyRecord]| rs.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
    let mut balanced_runs = 0;
    for case in 0..500u64 {
        let n = rng.random_range(2..300);
        let corpus = corpus_of(&mut rng, n);
        for f in [0.8, 0.9] {
            let plan = SplitPlan::fractional(f, case);
            let (train, test) = split(&corpus, &plan).map_err(|e| e.to_string())?;
            ensure(train.len() == (f * n as f64).round() as usize, || format!("n={n} f={f}: train {}", train.len()))?;
            let a: HashSet<_> = ids(&train).into_iter().collect();
            let b: HashSet<_> = ids(&test).into_iter().collect();
            ensure(a.is_disjoint(&b) && a.len() + b.len() == n && train.len() + test.len() == n, || format!("n={n} f={f}: not a partition"))?;
            let again = split(&corpus, &plan).map_err(|e| e.to_string())?;
            ensure(ids(&again.0) == ids(&train) && ids(&again.1) == ids(&test), || format!("n={n} f={f}: not deterministic"))?;
        }
        let pos = corpus.iter().filter(|r| r.label == Some(SentimentLabel::Positive)).count();
        let minority = pos.min(n - pos);
        if minority > 0 {
            let k = rng.random_range(1..=minority);
            let plan = SplitPlan::balanced(k, case);
            let (train, test) = split(&corpus, &plan).map_err(|e| e.to_string())?;
            let pool_pos = train.iter().chain(&test).filter(|r| r.label == Some(SentimentLabel::Positive)).count();
            let pool_neg = train.len() + test.len() - pool_pos;
            ensure(pool_pos == k && pool_neg == k, || format!("balanced {k}: pools {pool_pos}/{pool_neg}"))?;
            let again = split(&corpus, &plan).map_err(|e| e.to_string())?;
            ensure(ids(&again.0) == ids(&train) && ids(&again.1) == ids(&test), || format!("balanced {k}: not deterministic"))?;
            balanced_runs += 1;
        }
    }
    Ok(format!("500 corpora at 0.8 and 0.9, {balanced_runs} balanced plans"))
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seed = "11";
    let mut lines = Vec::new();
    for n in ["1", "2", "3"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("a{n}-{run}.json"));
            let path = path.to_str().unwrap();
            let args = ["sentiment", "eval", "--approach", n, "--seed", seed, "--synthetic", "--output", path];
            let code = run_command(args);
            ensure(code == 0, || format!("approach {n} run {run} exited {code}"))?;
            outputs.push(std::fs::read(path).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("approach {n}: reports differ"))?;
        lines.push(format!("approach {n} {} bytes", outputs[0].len()));
    }
    Ok(format!("identical reports at seed {seed}: {}", lines.join(", ")))
}

fn adjudication_properties() -> Outcome {
    let store = || {
        AnnotationStore::new(vec![SurveyRecord::new("r1", "TEXT", "en")], AnnotatorPolicy::AutoRegister).map_err(|e| e.to_string())
    };
    let judgment = |a: usize, label: SentimentLabel| Judgment {
        record_id: "r1".into(),
        annotator_id: format!("a{a}"),
        label,
        timestamp: Utc.timestamp_opt(1_700_000_000 + a as i64, 0).unwrap(),
    };
    let label_of = |bit: u32| if bit == 1 { SentimentLabel::Positive } else { SentimentLabel::Negative };
    for mask in 0u32..16 {
        let mut s = store()?;
        for a in 0..4 {
            s.submit_judgment(judgment(a, label_of(mask >> a & 1))).map_err(|e| e.to_string())?;
        }
        let pos = mask.count_ones();
        let want = match pos.cmp(&(4 - pos)) {
            std::cmp::Ordering::Greater => Verdict::Positive,
            std::cmp::Ordering::Less => Verdict::Negative,
            std::cmp::Ordering::Equal => Verdict::Unresolved,
        };
        let got = s.adjudicate("r1").map_err(|e| e.to_string())?.label;
        ensure(got == want, || format!("pattern {mask:04b}: {got:?}, expected {want:?}"))?;
    }
    let mut perms = 0;
    for mask in [0b0111u32, 0b0011, 0b0001] {
        let set: Vec<Judgment> = (0..4).map(|a| judgment(a, label_of(mask >> a & 1))).collect();
        let mut reference = None;
        for order in permutations(&[0, 1, 2, 3]) {
            let mut s = store()?;
            for i in order {
                s.submit_judgment(set[i].clone()).map_err(|e| e.to_string())?;
            }
            let adj = s.adjudicate("r1").map_err(|e| e.to_string())?;
            match &reference {
                None => reference = Some(adj),
                Some(r) => ensure(*r == adj, || format!("pattern {mask:04b}: order changed the outcome"))?,
            }
            perms += 1;
        }
    }
    Ok(format!("16 vote patterns, {perms} submission orders"))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("table reproduction", table_reproduction),
        ("synthetic accuracy", synthetic_accuracy),
        ("gradient correctness", gradient_check),
        ("attention invariants", attention_invariants),
        ("metric-engine oracle", metric_oracle),
        ("split properties", split_properties),
        ("pipeline determinism", pipeline_determinism),
        ("adjudication properties", adjudication_properties),
    ];
    let mut unexpected = 0;
    for (name, check) in criteria {
        let known = KNOWN_FAILURES.iter().find(|(n, _)| *n == name).map(|(_, why)| *why);
        match (check(), known) {
            (Ok(detail), None) => println!("[PASS] {name}: {detail}"),
            (Ok(detail), Some(_)) => println!("[PASS] {name}: {detail} (listed as a known failure; the list is stale)"),
            (Err(detail), Some(why)) => println!("[FAIL] {name}: {detail} [known: {why}]"),
            (Err(detail), None) => {
                println!("[FAIL] {name}: {detail}");
                unexpected += 1;
            }
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        std::process::exit(1);
    }
}
