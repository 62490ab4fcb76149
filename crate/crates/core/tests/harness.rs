mod common;

use std::collections::{HashMap, HashSet};
use std::fs;

use satlab::analysis::{accuracy_vs_alpha, analyze, confusion_matrix, export_results, files, Analyses};
use satlab::encodings::{encode_instance, Claim, Encoding, Message, NamePools, Role, Task};
use satlab::gen::{build_pool, grid_specs, Family, GenSpec, GridKind, InstanceRecord, PoolOptions};
use satlab::harness::{overall_accuracy, run_experiment, EvalRecord, ExperimentConfig};
use satlab::subject::{OracleSubject, Query, RandomSubject, RawAnswer, Subject};
use satlab::{Alpha, Exec, Result, Verdict};

fn pool(ns: std::ops::RangeInclusive<u32>, per_alpha: usize, seed: u64) -> Vec<InstanceRecord> {
    let specs = grid_specs(Family::SAT3, ns, GridKind::Dataset, per_alpha, seed).unwrap();
    build_pool(&specs, &PoolOptions::default()).unwrap()
}

fn run(pool: &[InstanceRecord], subject: &dyn Subject, config: &ExperimentConfig) -> Vec<EvalRecord> {
    run_experiment(config, pool, subject, None, &NamePools::builtin()).unwrap().records
}

#[test]
fn oracle_is_perfect_everywhere() {
    let p = pool(3..=6, 2, 1);
    for encoding in [Encoding::Menu, Encoding::Cnf] {
        for task in [Task::Search, Task::Decision] {
            for shots in [0, 3] {
                let config = ExperimentConfig { shots, ..ExperimentConfig::new(task, encoding) };
                let records = run(&p, &OracleSubject::default(), &config);
                assert_eq!(overall_accuracy(&records), Some(1.0), "{encoding} {task} {shots}");
            }
        }
    }
    let records = run(&p, &OracleSubject::default(), &ExperimentConfig::new(Task::Search, Encoding::Translate));
    assert_eq!(overall_accuracy(&records), Some(1.0));
}

#[test]
fn correct_search_records_carry_satisfying_assignments() {
    let p = pool(4..=6, 2, 2);
    let names = NamePools::builtin();
    let subject = RandomSubject { seed: 3, p_unsat: 0.1 };
    let config = ExperimentConfig::new(Task::Search, Encoding::Menu);
    let records = run(&p, &subject, &config);
    let by_id: HashMap<&str, &InstanceRecord> = p.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut checked = 0;
    for e in records.iter().filter(|e| e.correct) {
        let r = by_id[e.id.as_str()];
        if !r.is_sat() {
            continue;
        }
        let enc = encode_instance(r, Encoding::Menu, &names, 0).unwrap();
        let msgs = [Message::new(Role::User, enc.prompt.user.clone())];
        let q = Query { record: r, encoded: &enc, messages: &msgs, task: Task::Search };
        let Claim::SatWith(a) = enc.decode(&subject.answer(&q).unwrap().text, Task::Search).claim else {
            panic!("{} correct without an assignment", e.id)
        };
        assert_eq!(r.formula().unwrap().evaluate(&a).unwrap(), Verdict::Satisfied);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn interrupted_and_resumed_runs_agree() {
    let p = pool(3..=5, 2, 3);
    let subject = RandomSubject { seed: 9, p_unsat: 0.4 };
    let full_cfg = ExperimentConfig::new(Task::Decision, Encoding::Cnf);
    let full = run(&p, &subject, &full_cfg);
    for j in [1, 17, p.len() / 2] {
        let part = run(&p, &subject, &ExperimentConfig { limit: Some(j), ..full_cfg.clone() });
        assert_eq!(part.len(), j);
        for r in &part {
            assert!(full.contains(r), "{} differs after resume", r.id);
        }
    }
}

#[test]
fn schedule_does_not_change_results() {
    let p = pool(3..=6, 1, 4);
    let subject = RandomSubject { seed: 1, p_unsat: 0.5 };
    let seq = run(&p, &subject, &ExperimentConfig { exec: Exec::Sequential, ..ExperimentConfig::new(Task::Search, Encoding::Menu) });
    let par = run(&p, &subject, &ExperimentConfig { exec: Exec::Parallel, ..ExperimentConfig::new(Task::Search, Encoding::Menu) });
    assert_eq!(seq, par);
}

#[test]
fn random_subject_on_an_all_unsat_slice_matches_its_claim_rate() {
    let specs: Vec<GenSpec> = (6..=10)
        .map(|n| GenSpec { family: Family::SAT3, n, alpha: Alpha::integer(10), seed: 5, count: 200 })
        .collect();
    let mut p = build_pool(&specs, &PoolOptions::default()).unwrap();
    p.retain(|r| !r.is_sat());
    assert!(p.len() > 950);
    let p_unsat = 0.3;
    let records = run(&p, &RandomSubject { seed: 2, p_unsat }, &ExperimentConfig::new(Task::Search, Encoding::Cnf));
    let acc = overall_accuracy(&records).unwrap();
    let sigma = (p_unsat * (1.0 - p_unsat) / p.len() as f64).sqrt();
    assert!((acc - p_unsat).abs() < 4.0 * sigma, "accuracy {acc} vs {p_unsat}");
}

/// Correct everywhere except for about half of the instances with alpha in
/// [3.8, 4.8], which get a garbled answer.
struct Corrupted {
    oracle: OracleSubject,
}

impl Subject for Corrupted {
    fn name(&self) -> String {
        "corrupted".into()
    }

    fn answer(&self, query: &Query) -> Result<RawAnswer> {
        let mut a = self.oracle.answer(query)?;
        let band = (3.8..=4.8).contains(&query.record.alpha);
        let coin = query.record.id.bytes().fold(0u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32)) % 2 == 0;
        if band && coin {
            a.text = "no idea".into();
        }
        Ok(a)
    }
}

#[test]
fn corruption_in_the_hard_band_gives_a_dip() {
    let p = pool(8..=10, 6, 6);
    let records = run(&p, &Corrupted { oracle: OracleSubject::default() }, &ExperimentConfig::new(Task::Search, Encoding::Cnf));
    let curve = accuracy_vs_alpha(&records, &p, 4).unwrap();
    let at = |lo: f64, hi: f64| -> Vec<f64> {
        curve.iter().filter(|c| c.window_lo >= lo && c.window_hi <= hi).map(|c| c.accuracy).collect()
    };
    let inside = at(3.8, 4.8);
    let left = at(0.0, 3.7);
    let right = at(4.9, 100.0);
    assert!(!inside.is_empty() && !left.is_empty() && !right.is_empty());
    assert!(left.iter().chain(&right).all(|&a| a == 1.0));
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    assert!((0.3..0.7).contains(&mean), "dip mean {mean}");
}

#[test]
fn window_one_curve_reweights_to_overall_accuracy() {
    let p = pool(3..=7, 2, 7);
    let records = run(&p, &RandomSubject { seed: 4, p_unsat: 0.5 }, &ExperimentConfig::new(Task::Decision, Encoding::Menu));
    let curve = accuracy_vs_alpha(&records, &p, 1).unwrap();
    let total: usize = curve.iter().map(|c| c.samples).sum();
    let weighted: f64 = curve.iter().map(|c| c.accuracy * c.samples as f64).sum::<f64>() / total as f64;
    assert_eq!(total, records.len());
    assert!((weighted - overall_accuracy(&records).unwrap()).abs() < 1e-12);
}

#[test]
fn regions_are_constant_within_groups() {
    let p = pool(3..=10, 5, 8);
    let mut seen: HashMap<(u32, String), String> = HashMap::new();
    for r in &p {
        let key = (r.n, format!("{:.6}", r.alpha));
        let region = format!("{:?}", r.region);
        assert_eq!(seen.entry(key).or_insert_with(|| region.clone()), &region, "{}", r.id);
    }
    let regions: HashSet<&String> = seen.values().collect();
    assert!(regions.len() >= 2);
}

#[test]
fn coin_flip_confusion_cells_are_near_one_half() {
    let p = common::balanced_pool(10, 1000, 9);
    let records = run(&p, &RandomSubject { seed: 6, p_unsat: 0.5 }, &ExperimentConfig::new(Task::Decision, Encoding::Cnf));
    let norm = confusion_matrix(&records).normalized();
    for row in norm {
        for cell in row {
            let v = cell.unwrap();
            assert!((v - 0.5).abs() <= 0.05, "{norm:?}");
        }
    }
}

#[test]
fn exports_are_idempotent_and_empty_runs_write_headers() {
    let p = pool(3..=5, 2, 10);
    let out = run_experiment(
        &ExperimentConfig::new(Task::Decision, Encoding::Menu),
        &p,
        &RandomSubject::default(),
        None,
        &NamePools::builtin(),
    )
    .unwrap();
    let analyses = analyze(&out.records, &p, 4).unwrap();
    let a = tempfile::tempdir().unwrap();
    export_results(&out.records, &analyses, Some(&out.manifest), a.path()).unwrap();
    let first: Vec<Vec<u8>> = [files::RESULTS, files::ALPHA_CURVE, files::CONFUSION, files::TOKENS]
        .iter()
        .map(|f| fs::read(a.path().join(f)).unwrap())
        .collect();
    export_results(&out.records, &analyses, Some(&out.manifest), a.path()).unwrap();
    for (f, before) in [files::RESULTS, files::ALPHA_CURVE, files::CONFUSION, files::TOKENS].iter().zip(first) {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), before, "{f}");
    }
    let reread = satlab::analysis::read_results(&a.path().join(files::RESULTS)).unwrap();
    assert_eq!(reread, out.records);

    let e = tempfile::tempdir().unwrap();
    export_results(&[], &Analyses::default(), None, e.path()).unwrap();
    let curve = fs::read_to_string(e.path().join(files::ALPHA_CURVE)).unwrap();
    assert_eq!(curve, "alpha_center,window_lo,window_hi,samples,accuracy,region\n");
    assert_eq!(fs::read_to_string(e.path().join(files::RESULTS)).unwrap(), "");
}

#[test]
fn manifest_records_the_run() {
    let p = pool(3..=4, 1, 11);
    let out = run_experiment(
        &ExperimentConfig { shots: 3, seed: 12, ..ExperimentConfig::new(Task::Search, Encoding::Cnf) },
        &p,
        &OracleSubject::default(),
        None,
        &NamePools::builtin(),
    )
    .unwrap();
    let m = &out.manifest;
    assert_eq!((m.shots, m.seed, m.evaluated, m.pool_size), (3, 12, p.len(), p.len()));
    assert_eq!(m.pool_digest, satlab::pool::digest(&p).unwrap());
    assert_eq!(m.accuracy, Some(1.0));
    assert!(!m.template_versions.is_empty());
    assert!(m.finished_ms >= m.started_ms);
}
