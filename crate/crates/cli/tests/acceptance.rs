//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use langconf_core::corpus::{Dataset, Setting};
use langconf_core::decoding::{
    beam_search, cp_aggregate, entropy, frequency_summary, greedy, log_softmax, nucleus,
    nucleus_distribution, sample_step, simulate, softmax_t, BeamConfig, SamplingConfig, ToyLm,
    TraceStep,
};
use langconf_core::detect::{
    DetectionRecord, Detector, EnglishWordDictionary, FlagReason, LineJudgment, LineStatus,
};
use langconf_core::lang::LanguageCode;
use langconf_core::lid::{
    cross_validate, parse_training_corpus, save_model, NGramLidModel, TrainConfig, BUILTIN_CORPUS,
};
use langconf_core::metrics::{aggregate, GroupField, MetricFrame, AVG, WILDCARD};
use langconf_core::par::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = fn() -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const FOX: [f64; 5] = [0.75, 0.20, -0.10, -0.20, -0.30];

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("nucleus math on the five-logit example", c1_nucleus_math),
        ("99 line failures + 1 clean response", c2_one_clean_in_hundred),
        ("confusion-point aggregate over 9 points", c3_cp_aggregate),
        ("known confusion cases", c4_known_cases),
        ("grouped metrics vs brute-force oracle", c5_metric_oracle),
        ("decoding properties", c6_decoding_properties),
        ("determinism", c7_determinism),
        ("LID held-out targets", c8_lid_targets),
        ("intruder rate rises with temperature", c9_temperature_trend),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("PASS criterion {}: {name} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// 1 ------------------------------------------------------------------------

fn c1_nucleus_math() -> Result<(), String> {
    let cfg = |t: f64, p: f64| SamplingConfig { temperature: t, top_p: p, ..Default::default() };
    let d = nucleus_distribution(&FOX, &cfg(1.0, 0.75)).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = d.iter().map(|x| x.0).collect();
    ensure!(idx == [0, 1, 2, 3], "T=1 p=0.75 nucleus {idx:?}");
    for (&(_, got), want) in d.iter().zip([0.418, 0.241, 0.179, 0.162]) {
        ensure!(close(got, want, 1e-3), "T=1 p=0.75: {got} vs {want}");
    }
    let d = nucleus_distribution(&FOX, &cfg(1.0, 0.7)).map_err(|e| e.to_string())?;
    ensure!(d.len() == 3, "T=1 p=0.7 nucleus size {}", d.len());
    for (&(_, got), want) in d.iter().zip([0.499, 0.287, 0.213]) {
        ensure!(close(got, want, 1e-3), "T=1 p=0.7: {got} vs {want}");
    }
    let d = nucleus_distribution(&FOX, &cfg(0.5, 0.75)).map_err(|e| e.to_string())?;
    ensure!(d.iter().all(|x| x.0 != 3), "T=0.5 keeps the 4th token: {d:?}");
    Ok(())
}

// 2 ------------------------------------------------------------------------

fn record(model: &str, lang: LanguageCode, dataset: Dataset, setting: Setting) -> DetectionRecord {
    DetectionRecord {
        response_id: String::new(),
        prompt_id: String::new(),
        model: model.into(),
        dataset,
        setting,
        target: lang,
        line_judgments: vec![],
        word_flags: vec![],
        has_line_error: false,
        has_word_error: false,
        skipped_only: true,
    }
}

fn c2_one_clean_in_hundred() -> Result<(), String> {
    let records: Vec<DetectionRecord> = (0..100)
        .map(|i| DetectionRecord {
            has_line_error: i > 0,
            ..record("m", LanguageCode::Ar, Dataset::Okapi, Setting::Monolingual)
        })
        .collect();
    let f = &aggregate(&records, &[], Execution::Sequential).map_err(|e| e.to_string())?[0];
    ensure!(close(f.lpr, 0.0100, 1e-4), "LPR {}", f.lpr);
    ensure!(close(f.wpr, 1.0, 1e-4), "WPR {}", f.wpr);
    ensure!(close(f.lcpr, 0.0198, 1e-4), "LCPR {}", f.lcpr);
    Ok(())
}

// 3 ------------------------------------------------------------------------

fn uniform_step(k: usize) -> TraceStep {
    TraceStep {
        candidates: (0..k).map(|i| (format!("tok{i}"), 1.0 / k as f64)).collect(),
        sampled: 0,
        truncated: false,
    }
}

fn c3_cp_aggregate() -> Result<(), String> {
    // nine traces with one confusion point each, sizes summing to 32,
    // plus six traces without one
    let sizes = [3, 4, 3, 5, 3, 4, 3, 4, 3];
    ensure!(sizes.iter().sum::<usize>() == 32, "fixture");
    let mut traces = Vec::new();
    let mut cps = Vec::new();
    for (i, &k) in sizes.iter().enumerate() {
        let lead = i % 3;
        let mut t: Vec<TraceStep> = (0..lead).map(|j| uniform_step(1 + j)).collect();
        t.push(uniform_step(k));
        t.push(uniform_step(2));
        traces.push(t);
        cps.push(vec![lead]);
    }
    for i in 0..6 {
        traces.push((0..=i).map(|j| uniform_step(1 + j % 4)).collect());
        cps.push(vec![]);
    }
    let r = cp_aggregate(&traces, &cps, 1.0).map_err(|e| e.to_string())?;
    let at = r.avg_nucleus_size.all.at_cp;
    ensure!(at.count == 9 && at.sum == 32.0, "@CP cell {at:?}");
    let mean = at.mean.ok_or("no mean")?;
    ensure!(close(mean, 3.556, 1e-3), "avg nucleus size @CP {mean}");
    for m in [&r.avg_nucleus_size, &r.avg_entropy] {
        ensure!(m.identity_holds(), "identity fails: {m:?}");
        for row in [m.has_cp, m.no_cp, m.all] {
            let o = row.overall;
            if o.count == 0 {
                continue;
            }
            let weighted = row.at_cp.sum + row.not_at_cp.sum;
            ensure!(weighted == o.sum, "row sums {weighted} vs {}", o.sum);
            let via_means = row.at_cp.mean.unwrap_or(0.0) * row.at_cp.count as f64
                + row.not_at_cp.mean.unwrap_or(0.0) * row.not_at_cp.count as f64;
            ensure!(close(via_means / o.count as f64, o.mean.unwrap(), 1e-12), "weighted mean");
        }
    }
    Ok(())
}

// 4 ------------------------------------------------------------------------

fn c4_known_cases() -> Result<(), String> {
    let lid = NGramLidModel::builtin();
    let d = Detector::new(&lid, EnglishWordDictionary::builtin());
    let failed = |lines: &[LineJudgment]| lines.iter().filter(|j| j.status == LineStatus::Failed).count();

    let en = "**The Effects of Rowing Exercise: A Comprehensive Review**\n\nRowing exercise has gained popularity in recent years due to its numerous benefits for physical and mental health. As a low-impact, full-body workout, rowing has been shown to improve cardiovascular fitness, increase muscle strength and endurance, and enhance overall well-being.";
    let (lines, _) = d.judge("ja", en, LanguageCode::Ja);
    ensure!(failed(&lines) > 0, "English answer to a Japanese prompt passed: {lines:?}");

    let ko = "디지털 시민이란 인터넷과 디지털 기술로 연결된 세상에서 다른 사람들과 상호작용하고, 소통하는 방법을 아는 사람을 말해. 디지털 세상에서 우리는 좋은 친구들이나 가족들처럼 행동해야 해. \n\n교실에서 디지털 시민이 되는 법을 배워보아요! 우리는 먼저 인터넷에서 주의해야 할 점을 알아볼 거야. 디지털 세상에서 우리 would 안전한 웹사이트만 방문하고, 우리 개인정보를 소중히 지켜야 해.";
    let (lines, flags) = d.judge("ko", ko, LanguageCode::Ko);
    ensure!(failed(&lines) == 0, "Korean answer has a failed line: {lines:?}");
    let toks: Vec<&str> = flags.iter().map(|f| f.token.as_str()).collect();
    ensure!(toks == ["would"], "Korean flags {toks:?}");

    let zh = "油在我们的日常生活中有许多用途，主要包括：\n\n1. 烹饪：油是烹饪中不可或缺的一种原料，它可以用来油炸、煎炸、烧烤等 verschiedenen Kochtechniken. Es kann auch als Salatöl oder Dressing verwendet werden.\n";
    let (lines, _) = d.judge("zh", zh, LanguageCode::Zh);
    let bad: Vec<&LineJudgment> = lines.iter().filter(|j| j.status == LineStatus::Failed).collect();
    ensure!(
        bad.len() == 1 && zh[bad[0].start..bad[0].end].contains("Kochtechniken"),
        "Chinese/German lines {lines:?}"
    );

    for (text, target, want) in [
        ("Los epígraf瓦解 también se pueden utilizar para resaltar citas importantes, proporcionar transiciones entre temas o simplemente dividir el texto en secciones más manejables y digeribles.", LanguageCode::Es, "epígraf瓦解"),
        ("Even if such errors occur rarely, they cause a jarring user 经验 (experience).", LanguageCode::En, "经验"),
    ] {
        let (lines, flags) = d.judge("latin", text, target);
        ensure!(failed(&lines) == 0, "{target} line failed: {lines:?}");
        let toks: Vec<&str> = flags.iter().map(|f| f.token.as_str()).collect();
        ensure!(toks == [want], "{target} flags {toks:?}");
        ensure!(flags[0].reason == FlagReason::ForeignScriptLetter, "{target} flag reason");
    }

    let (lines, flags) = d.judge("ja-ai", "AI に関する記事を書きます。", LanguageCode::Ja);
    ensure!(failed(&lines) == 0 && flags.is_empty(), "acronym case: {lines:?} {flags:?}");
    Ok(())
}

// 5 ------------------------------------------------------------------------

const LANGS: [LanguageCode; 5] =
    [LanguageCode::Ar, LanguageCode::Hi, LanguageCode::Fr, LanguageCode::Zh, LanguageCode::Vi];
const FIELDS: [GroupField; 4] =
    [GroupField::Model, GroupField::Language, GroupField::Dataset, GroupField::Setting];

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<DetectionRecord> {
    let n = rng.gen_range(1..=200);
    (0..n)
        .map(|_| {
            let lang = LANGS[rng.gen_range(0..LANGS.len())];
            let statuses: Vec<LineStatus> = (0..rng.gen_range(0..5))
                .map(|_| [LineStatus::Passed, LineStatus::Failed, LineStatus::Skipped][rng.gen_range(0..3)])
                .collect();
            let mut r = record(
                ["alpha", "beta", "gamma"][rng.gen_range(0..3)],
                lang,
                [Dataset::Aya, Dataset::Dolly, Dataset::Complex][rng.gen_range(0..3)],
                [Setting::Monolingual, Setting::Crosslingual][rng.gen_range(0..2)],
            );
            r.has_line_error = statuses.contains(&LineStatus::Failed);
            r.has_word_error = rng.gen_bool(0.3);
            r.skipped_only = statuses.iter().all(|s| *s == LineStatus::Skipped);
            r.line_judgments = statuses
                .into_iter()
                .enumerate()
                .map(|(i, status)| LineJudgment {
                    line_index: i,
                    start: 0,
                    end: 0,
                    status,
                    predicted: lang,
                    confidence: 1.0,
                })
                .collect();
            r
        })
        .collect()
}

/// (n, lpr, wpr or None, line accuracy or None) by plain counting.
fn oracle(rs: &[&DetectionRecord]) -> (usize, f64, Option<f64>, Option<f64>) {
    let mut line_pass = 0;
    let mut both_pass = 0;
    let (mut judged, mut good) = (0, 0);
    for r in rs {
        if !r.has_line_error {
            line_pass += 1;
            if !r.has_word_error {
                both_pass += 1;
            }
        }
        for j in &r.line_judgments {
            match j.status {
                LineStatus::Passed => {
                    judged += 1;
                    good += 1
                }
                LineStatus::Failed => judged += 1,
                LineStatus::Skipped => {}
            }
        }
    }
    (
        rs.len(),
        line_pass as f64 / rs.len() as f64,
        (line_pass > 0).then(|| both_pass as f64 / line_pass as f64),
        (judged > 0).then(|| good as f64 / judged as f64),
    )
}

fn field_of(r: &DetectionRecord, f: GroupField) -> String {
    match f {
        GroupField::Model => r.model.clone(),
        GroupField::Language => r.target.as_str().to_string(),
        GroupField::Dataset => r.dataset.as_str().to_string(),
        GroupField::Setting => r.setting.as_str().to_string(),
    }
}

fn key_of(f: &MetricFrame, field: GroupField) -> &str {
    match field {
        GroupField::Model => &f.group.model,
        GroupField::Language => &f.group.language,
        GroupField::Dataset => &f.group.dataset,
        GroupField::Setting => &f.group.setting,
    }
}

fn compare(f: &MetricFrame, e: (usize, f64, Option<f64>, Option<f64>)) -> Result<(), String> {
    let tol = 1e-12;
    let w = e.2.unwrap_or(1.0);
    let lcpr = if e.1 == 0.0 || w == 0.0 { 0.0 } else { 2.0 * e.1 * w / (e.1 + w) };
    ensure!(f.n_responses == e.0, "{:?}: n {} vs {}", f.group, f.n_responses, e.0);
    ensure!(close(f.lpr, e.1, tol), "{:?}: lpr {} vs {}", f.group, f.lpr, e.1);
    ensure!(f.wpr_defined == e.2.is_some() && close(f.wpr, w, tol), "{:?}: wpr", f.group);
    ensure!(close(f.lcpr, lcpr, tol), "{:?}: lcpr {} vs {lcpr}", f.group, f.lcpr);
    let acc_ok = match (f.line_accuracy, e.3) {
        (Some(a), Some(b)) => close(a, b, tol),
        (None, None) => true,
        _ => false,
    };
    ensure!(acc_ok, "{:?}: line accuracy {:?} vs {:?}", f.group, f.line_accuracy, e.3);
    Ok(())
}

fn c5_metric_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for corpus_no in 0..100 {
        let records = random_corpus(&mut rng);
        for mask in 0..16u8 {
            let fields: Vec<GroupField> =
                (0..4).filter(|b| mask & (1 << b) != 0).map(|b| FIELDS[b]).collect();
            let exec = if corpus_no % 2 == 0 { Execution::Parallel } else { Execution::Sequential };
            let frames = aggregate(&records, &fields, exec).map_err(|e| e.to_string())?;

            // expected regular frames: every distinct combination present
            let mut expected: BTreeMap<Vec<String>, Vec<&DetectionRecord>> = BTreeMap::new();
            for r in &records {
                let key = FIELDS
                    .iter()
                    .map(|&f| if fields.contains(&f) { field_of(r, f) } else { WILDCARD.to_string() })
                    .collect();
                expected.entry(key).or_default().push(r);
            }
            let regular: Vec<&MetricFrame> = frames.iter().filter(|f| f.group.language != AVG).collect();
            ensure!(regular.len() == expected.len(), "corpus {corpus_no}: {} frames vs {}", regular.len(), expected.len());
            for f in &regular {
                let key: Vec<String> = FIELDS.iter().map(|&fl| key_of(f, fl).to_string()).collect();
                let members = expected.get(&key).ok_or_else(|| format!("unexpected frame {:?}", f.group))?;
                compare(f, oracle(members))?;
            }

            let avgs: Vec<&MetricFrame> = frames.iter().filter(|f| f.group.language == AVG).collect();
            if !fields.contains(&GroupField::Language) {
                ensure!(avgs.is_empty(), "avg frames without language grouping");
                continue;
            }
            let rest: Vec<GroupField> = fields.iter().copied().filter(|&f| f != GroupField::Language).collect();
            let mut combos: BTreeMap<Vec<String>, ()> = BTreeMap::new();
            for r in &records {
                combos.insert(rest.iter().map(|&f| field_of(r, f)).collect(), ());
            }
            ensure!(avgs.len() == combos.len(), "avg frame count");
            for a in avgs {
                let per_lang: Vec<_> = LANGS
                    .iter()
                    .map(|l| {
                        records
                            .iter()
                            .filter(|r| r.target == *l && rest.iter().all(|&f| field_of(r, f) == key_of(a, f)))
                            .collect::<Vec<_>>()
                    })
                    .filter(|m| !m.is_empty())
                    .map(|m| oracle(&m))
                    .collect();
                let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
                let e = (
                    per_lang.iter().map(|e| e.0).sum(),
                    mean(per_lang.iter().map(|e| e.1).collect()).unwrap(),
                    mean(per_lang.iter().filter_map(|e| e.2).collect()),
                    mean(per_lang.iter().filter_map(|e| e.3).collect()),
                );
                compare(a, e)?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(())
}

// 6 ------------------------------------------------------------------------

fn random_logits(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(2..=16);
    let scale = rng.gen_range(0.1..6.0);
    (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
}

/// Three tokens, no end token; greedy picks `a` first but the best
/// three-token path starts with `b`.
fn three_by_three() -> ToyLm {
    let t = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let rows = vec![
        (t(&[]), vec![1.0, 0.9, -1.0]),
        (t(&["a"]), vec![0.0, 0.0, 0.0]),
        (t(&["b"]), vec![3.0, -1.0, -1.0]),
        (t(&["c"]), vec![0.0, 0.0, 0.0]),
        (t(&["a", "a"]), vec![0.0, 0.1, 0.0]),
        (t(&["b", "a"]), vec![2.5, -1.0, -1.0]),
    ];
    ToyLm::new(t(&["a", "b", "c"]), None, vec![], &[], rows).expect("valid toy LM")
}

fn exhaustive_best(lm: &ToyLm) -> (Vec<usize>, f64) {
    let v = lm.vocabulary().len();
    let mut best = (vec![], f64::NEG_INFINITY);
    for code in 0..v * v * v {
        let seq = [code / (v * v), (code / v) % v, code % v];
        let mut score = 0.0;
        for d in 0..3 {
            let ctx: Vec<String> = seq[..d].iter().map(|&i| lm.token(i).to_string()).collect();
            score += log_softmax(lm.logits(&ctx).unwrap()).unwrap()[seq[d]];
        }
        if score > best.1 {
            best = (seq.to_vec(), score);
        }
    }
    best
}

fn c6_decoding_properties() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..10_000 {
        let z = random_logits(&mut rng);
        let t1 = rng.gen_range(0.05..3.0);
        let t2 = t1 + rng.gen_range(0.01..3.0);
        let (a, b) = (softmax_t(&z, t1).unwrap(), softmax_t(&z, t2).unwrap());
        let max = |p: &[f64]| p.iter().cloned().fold(f64::MIN, f64::max);
        ensure!(max(&b) <= max(&a) + 1e-12, "case {case}: max prob grew with T");
        ensure!(entropy(&b).unwrap() >= entropy(&a).unwrap() - 1e-9, "case {case}: entropy fell with T");

        let p1 = rng.gen_range(0.01..=1.0);
        let p2 = rng.gen_range(0.01..=1.0);
        let n1 = nucleus(&a, p1).unwrap();
        // minimality: mass reaches p, dropping the last member falls short,
        // and no excluded token beats an included one
        let mass: f64 = n1.iter().map(|&i| a[i]).sum();
        let short: f64 = n1[..n1.len() - 1].iter().map(|&i| a[i]).sum();
        ensure!(mass >= p1 - 1e-9 && short < p1, "case {case}: nucleus not minimal");
        let floor = n1.iter().map(|&i| a[i]).fold(1.0, f64::min);
        ensure!(
            (0..a.len()).filter(|i| !n1.contains(i)).all(|i| a[i] <= floor),
            "case {case}: nucleus is not a top set"
        );
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        ensure!(
            nucleus(&a, lo).unwrap().len() <= nucleus(&a, hi).unwrap().len(),
            "case {case}: nucleus shrank as p grew"
        );
    }

    // chi-square goodness of fit over 10^4 draws
    let cfg = SamplingConfig { temperature: 1.0, top_p: 0.75, ..Default::default() };
    let expected = nucleus_distribution(&FOX, &cfg).unwrap();
    let mut counts = vec![0usize; FOX.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 10_000;
    for _ in 0..draws {
        counts[sample_step(&FOX, &cfg, &mut rng).unwrap().sampled] += 1;
    }
    ensure!(counts[4] == 0, "sampled outside the nucleus");
    let stat: f64 = expected
        .iter()
        .map(|&(i, q)| {
            let e = q * draws as f64;
            (counts[i] as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((expected.len() - 1) as f64).unwrap().cdf(stat);
    ensure!(p_value > 0.001, "chi2 {stat:.2}, p = {p_value:.5}");

    let lm = three_by_three();
    let g = greedy(&lm, &[], 3).unwrap();
    let b1 = beam_search(&lm, &[], &BeamConfig::new(1, 3)).unwrap();
    ensure!(b1[0].tokens == g, "beam 1 {:?} vs greedy {g:?}", b1[0].tokens);
    let (best, score) = exhaustive_best(&lm);
    ensure!(best != g, "fixture should separate greedy from exhaustive");
    let wide = beam_search(&lm, &[], &BeamConfig::new(9, 3)).unwrap();
    ensure!(wide[0].tokens == best, "beam top-1 {:?} vs exhaustive {best:?}", wide[0].tokens);
    ensure!(close(wide[0].log_score, score, 1e-12), "beam score {} vs {score}", wide[0].log_score);
    let fox = ToyLm::quick_brown_fox();
    let g = greedy(&fox, fox.default_prompt(), 5).unwrap();
    let b1 = beam_search(&fox, fox.default_prompt(), &BeamConfig::new(1, 5)).unwrap();
    ensure!(b1[0].tokens == g, "beam 1 vs greedy on the fox model");
    Ok(())
}

// 7 ------------------------------------------------------------------------

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_langconf"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)));
    }
    Ok(o.stdout)
}

/// Runs a command twice, writing to `a` then `b`, and compares stdout and
/// the two output files.
fn twice(dir: &Path, name: &str, args: &[&str], out_flag: Option<&str>) -> Result<Vec<u8>, String> {
    let mut outs = vec![];
    for run in ["a", "b"] {
        let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let path = dir.join(format!("{name}-{run}"));
        if let Some(flag) = out_flag {
            full.push(flag.into());
            full.push(path.to_string_lossy().into_owned());
        }
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let stdout = run_cli(&refs)?;
        let file = if out_flag.is_some() { std::fs::read(&path).map_err(|e| e.to_string())? } else { vec![] };
        outs.push((stdout, file));
    }
    ensure!(outs[0] == outs[1], "{name}: outputs differ between runs");
    let (stdout, file) = outs.pop().unwrap();
    Ok(if out_flag.is_some() { file } else { stdout })
}

fn c7_determinism() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let (prompts, responses) = (fixture("prompts.jsonl"), fixture("responses.jsonl"));

    twice(d, "lid", &["train-lid"], Some("--out"))?;
    let det = twice(d, "det", &["detect", "--prompts", &prompts, "--responses", &responses], Some("--out"))?;
    let det_path = d.join("detections.jsonl");
    std::fs::write(&det_path, det).map_err(|e| e.to_string())?;
    let det_path = det_path.to_string_lossy().into_owned();
    for fmt in ["csv", "md", "json"] {
        twice(d, &format!("score-{fmt}"), &["score", "--detections", &det_path, "--group-by", "model,language", "--format", fmt], None)?;
    }
    twice(d, "sim", &["simulate", "--temperature", "1", "--top-p", "0.75", "--runs", "2000", "--seed", "9"], Some("--traces-out"))?;
    twice(d, "sweep", &["simulate", "--sweep", "T=0.3/1.0,p=0.75/0.9", "--runs", "500", "--format", "md"], None)?;
    twice(d, "amend", &["amend", "--prompts", &fixture("english_prompts.jsonl"), "--targets", "ja,zh,fr", "--seed", "4"], None)?;
    twice(d, "filter", &["filter", "--prompts", &prompts], None)?;
    twice(d, "fewshot", &["fewshot", "--examples", &fixture("examples.jsonl"), "--prompts", &prompts, "--style", "chat_turns"], None)?;

    let trace = d.join("r1.jsonl");
    let steps = [
        TraceStep { candidates: vec![("这".into(), 0.7), ("The".into(), 0.3)], sampled: 0, truncated: false },
        TraceStep { candidates: vec![("个".into(), 0.5), ("called".into(), 0.4), ("是".into(), 0.1)], sampled: 1, truncated: false },
    ];
    langconf_core::decoding::write_trace(&trace, &steps).map_err(|e| e.to_string())?;
    let trace = trace.to_string_lossy().into_owned();
    twice(d, "cps", &["analyze-cps", "--traces", &trace, "--target", "zh"], None)?;

    // generate: first run hits a local echo server, the rerun replays the cache
    let url = echo_server(6);
    let endpoint = d.join("endpoint.json");
    let cfg = serde_json::json!({"base_url": url, "model": "echo", "parallelism": 2, "backoff_ms": 1});
    std::fs::write(&endpoint, cfg.to_string()).map_err(|e| e.to_string())?;
    let (endpoint, run_dir) = (endpoint.to_string_lossy().into_owned(), d.join("run").to_string_lossy().into_owned());
    twice(d, "gen", &["generate", "--endpoint", &endpoint, "--prompts", &prompts, "--run-dir", &run_dir, "--seed", "1"], None)?;

    // LID training does not depend on corpus order
    let corpus = parse_training_corpus(BUILTIN_CORPUS).map_err(|e| e.to_string())?;
    let mut shuffled = corpus.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.gen_range(0..=i));
    }
    let bytes = |c: &[(LanguageCode, String)], name: &str| -> Result<Vec<u8>, String> {
        let m = NGramLidModel::train(c, &TrainConfig::default()).map_err(|e| e.to_string())?;
        let p = d.join(name);
        save_model(&m, &p).map_err(|e| e.to_string())?;
        std::fs::read(p).map_err(|e| e.to_string())
    };
    ensure!(bytes(&corpus, "m1")? == bytes(&shuffled, "m2")?, "LID model depends on corpus order");
    Ok(())
}

/// Serves `n` chat requests, echoing the last message back.
fn echo_server(n: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for _ in 0..n {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut r = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut line) = (0, String::new());
            while r.read_line(&mut line).is_ok() && !line.trim_end().is_empty() {
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                line.clear();
            }
            let mut body = vec![0; len];
            if r.read_exact(&mut body).is_err() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
            let last = v["messages"].as_array().and_then(|m| m.last()).map(|m| m["content"].clone());
            let payload = serde_json::json!({"choices": [{"message": {"content": last}}]}).to_string();
            let mut stream = stream;
            let _ = write!(stream, "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}", payload.len());
        }
    });
    url
}

// 8 ------------------------------------------------------------------------

fn c8_lid_targets() -> Result<(), String> {
    let corpus = parse_training_corpus(BUILTIN_CORPUS).map_err(|e| e.to_string())?;
    let r = cross_validate(&corpus, 5, &TrainConfig::default(), 5, Execution::default())
        .map_err(|e| e.to_string())?;
    ensure!(r.per_language.len() == 15, "{} languages scored", r.per_language.len());
    ensure!(r.accuracy() >= 0.95, "held-out accuracy {:.4}", r.accuracy());
    let romance = r.accuracy_within(&[LanguageCode::Es, LanguageCode::Pt, LanguageCode::It]);
    ensure!(romance >= 0.85, "es/pt/it accuracy {romance:.4}");
    let h = entropy(&[0.25; 4]).map_err(|e| e.to_string())?;
    ensure!(close(h, 4f64.ln(), 1e-9), "entropy {h}");
    Ok(())
}

// 9 ------------------------------------------------------------------------

fn c9_temperature_trend() -> Result<(), String> {
    let t = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let prompt = t(&["我", "喜欢"]);
    let lm = ToyLm::new(
        t(&["猫", "狗", " cat", "鸟", "<eos>"]),
        Some("<eos>"),
        prompt.clone(),
        &[" cat"],
        vec![
            (t(&[]), vec![f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]),
            (prompt.clone(), vec![1.0, 0.8, 0.6, 0.2, f64::NEG_INFINITY]),
        ],
    )
    .map_err(|e| e.to_string())?;
    let rate = |temperature: f64| -> Result<f64, String> {
        let cfg = SamplingConfig { temperature, top_p: 0.75, seed: 1, ..Default::default() };
        let runs = simulate(&lm, &prompt, &cfg, 10_000, Execution::default()).map_err(|e| e.to_string())?;
        Ok(frequency_summary(&lm, &runs).intruder_rate)
    };
    let (cold, hot) = (rate(0.3)?, rate(1.0)?);
    ensure!(hot > cold, "rate at T=1.0 {hot:.4} vs T=0.3 {cold:.4}");
    Ok(())
}
