//! Subcommand implementations.
//!
//! Commands never mutate their inputs: everything they produce lands under
//! the configured output directory, and result files are written to a
//! temporary name and renamed into place so parallel seeds cannot interleave
//! output.

use std::fs;
use std::path::{Path, PathBuf};

use triboot::data::{
    load_processed_docs, make_splits, save_dataset, split_indices, synth_domain_shift, Dataset,
    Example, SplitSpec,
};
use triboot::eval::{self, paired_bootstrap_test, RunReport};
use triboot::features::{build_vocab, save_vocabulary, vectorize, TokenCounts, Vocabulary};
use triboot::model::DEFAULT_HIDDEN_DIM;
use triboot::ssl::{run_strategy, save_result, SslResult};

use crate::config::ExperimentConfig;
use crate::CliError;

fn tmp_name(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".tmp");
    PathBuf::from(name)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = tmp_name(path);
    fs::write(&tmp, contents)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn prepared_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("prepared")
}

struct PreparedPaths {
    labeled_source: PathBuf,
    unlabeled_target: PathBuf,
    validation_target: PathBuf,
    test_target: PathBuf,
    gold: PathBuf,
    vocab: PathBuf,
}

fn prepared_paths(dir: &Path) -> PreparedPaths {
    PreparedPaths {
        labeled_source: dir.join("source_labeled.ds"),
        unlabeled_target: dir.join("target_unlabeled.ds"),
        validation_target: dir.join("target_validation.ds"),
        test_target: dir.join("target_test.ds"),
        gold: dir.join("test_gold.labels"),
        vocab: dir.join("vocab.tsv"),
    }
}

/// Build and persist the experiment splits (and, for review corpora, the
/// vocabulary). Refuses to overwrite existing artifacts without `--force`.
pub fn prepare(cfg: &ExperimentConfig, force: bool) -> Result<(), CliError> {
    let dir = prepared_dir(cfg);
    let paths = prepared_paths(&dir);
    if paths.labeled_source.exists() && !force {
        return Err(CliError::input(format!(
            "{} already contains prepared artifacts; pass --force to overwrite",
            dir.display()
        )));
    }
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;

    let (labeled, unlabeled, validation, test) = if cfg.synthetic {
        prepare_synthetic(cfg)?
    } else {
        prepare_reviews(cfg, &paths)?
    };

    save_dataset(&labeled, &paths.labeled_source).map_err(input_err)?;
    save_dataset(&unlabeled, &paths.unlabeled_target).map_err(input_err)?;
    save_dataset(&validation, &paths.validation_target).map_err(input_err)?;
    save_dataset(&test, &paths.test_target).map_err(input_err)?;
    let gold = test.gold_labels().map_err(input_err)?;
    let gold_lines: String = gold.iter().map(|l| format!("{l}\n")).collect();
    write_atomic(&paths.gold, &gold_lines)?;

    println!(
        "prepared {}: source_labeled={} target_unlabeled={} target_validation={} target_test={}",
        dir.display(),
        labeled.len(),
        unlabeled.len(),
        validation.len(),
        test.len()
    );
    Ok(())
}

fn input_err(e: triboot::Error) -> CliError {
    CliError::input(e.to_string())
}

fn prepare_synthetic(
    cfg: &ExperimentConfig,
) -> Result<(Dataset, Dataset, Dataset, Dataset), CliError> {
    let (source, target) = synth_domain_shift(
        cfg.synth_n_source,
        cfg.synth_n_target,
        cfg.synth_rotation_degrees,
        cfg.synth_noise_sigma,
        cfg.seed,
    )
    .map_err(input_err)?;
    let spec = SplitSpec {
        n_labeled_source: cfg.n_labeled_source,
        n_unlabeled_target: cfg.n_unlabeled_target,
        n_validation_target: cfg.n_validation_target,
        seed: cfg.seed,
    };
    make_splits(&source, &target, &spec).map_err(input_err)
}

fn prepare_reviews(
    cfg: &ExperimentConfig,
    paths: &PreparedPaths,
) -> Result<(Dataset, Dataset, Dataset, Dataset), CliError> {
    let source_path = cfg.source_path.as_ref().expect("validated");
    let target_path = cfg.target_path.as_ref().expect("validated");
    let (src_docs, src_labels) = load_processed_docs(source_path).map_err(input_err)?;
    let (tgt_docs, tgt_labels) = load_processed_docs(target_path).map_err(input_err)?;

    let spec = SplitSpec {
        n_labeled_source: cfg.n_labeled_source,
        n_unlabeled_target: cfg.n_unlabeled_target,
        n_validation_target: cfg.n_validation_target,
        seed: cfg.seed,
    };
    let idx = split_indices(src_docs.len(), tgt_docs.len(), &spec).map_err(input_err)?;

    // The vocabulary sees training text only: the labeled source sample and
    // the unlabeled target sample, never validation or test documents.
    let mut train_text: Vec<TokenCounts> = Vec::new();
    for &i in &idx.source_labeled {
        train_text.push(src_docs[i].clone());
    }
    for &i in &idx.target_unlabeled {
        train_text.push(tgt_docs[i].clone());
    }
    let vocab = build_vocab(&train_text, cfg.max_features).map_err(input_err)?;
    save_vocabulary(&vocab, &paths.vocab).map_err(input_err)?;

    let featurize = |docs: &[TokenCounts],
                     labels: &[usize],
                     keep: &[usize],
                     strip: bool,
                     vocab: &Vocabulary,
                     domain: &str|
     -> Result<Dataset, CliError> {
        let examples: Vec<Example> = keep
            .iter()
            .map(|&i| {
                Example::new(
                    vectorize(&docs[i], vocab),
                    if strip { None } else { Some(labels[i]) },
                )
            })
            .collect();
        Dataset::new(examples, 2, vocab.len(), domain).map_err(input_err)
    };

    Ok((
        featurize(&src_docs, &src_labels, &idx.source_labeled, false, &vocab, &cfg.source_domain)?,
        featurize(&tgt_docs, &tgt_labels, &idx.target_unlabeled, true, &vocab, &cfg.target_domain)?,
        featurize(&tgt_docs, &tgt_labels, &idx.target_validation, false, &vocab, &cfg.target_domain)?,
        featurize(&tgt_docs, &tgt_labels, &idx.target_test, false, &vocab, &cfg.target_domain)?,
    ))
}

fn load_prepared(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset, Dataset), CliError> {
    let dir = prepared_dir(cfg);
    let paths = prepared_paths(&dir);
    if !paths.labeled_source.exists() {
        return Err(CliError::input(format!(
            "no prepared artifacts in {}; run `prepare` first",
            dir.display()
        )));
    }
    let load = |p: &Path| triboot::data::load_dataset(p).map_err(input_err);
    Ok((
        load(&paths.labeled_source)?,
        load(&paths.unlabeled_target)?,
        load(&paths.validation_target)?,
        load(&paths.test_target)?,
    ))
}

/// Run the configured strategy for seeds `seed .. seed + n_seeds`, write
/// per-seed results and predictions, and aggregate a report.
pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let (labeled, unlabeled, validation, test) = load_prepared(cfg)?;
    let run_dir = cfg.out_dir.join(cfg.strategy.tag());
    fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", run_dir.display())))?;

    let seeds: Vec<u64> = (0..cfg.n_seeds as u64).map(|i| cfg.seed + i).collect();
    let outcomes = run_seeds(cfg, &seeds, &labeled, &unlabeled, &validation, &test)?;

    let mut ok_seeds = Vec::new();
    let mut accs = Vec::new();
    let mut pseudo_totals = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok((result, preds, acc)) => {
                let ssl_path = run_dir.join(format!("seed_{seed}.ssl"));
                let tmp = tmp_name(&ssl_path);
                save_result(&result, &cfg.ssl_config(*seed), &tmp).map_err(input_err)?;
                fs::rename(&tmp, &ssl_path).map_err(|e| {
                    CliError::runtime(format!("cannot write {}: {e}", ssl_path.display()))
                })?;
                let pred_lines: String = preds.iter().map(|p| format!("{p}\n")).collect();
                write_atomic(&run_dir.join(format!("seed_{seed}.preds")), &pred_lines)?;
                ok_seeds.push(*seed);
                accs.push(acc);
                pseudo_totals.push(result.total_pseudo_labels as f64);
            }
            Err(msg) => failures.push((*seed, msg)),
        }
    }

    if ok_seeds.is_empty() {
        let detail = failures
            .iter()
            .map(|(s, m)| format!("seed {s}: {m}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::runtime(format!("all seeds failed: {detail}")));
    }

    let mu_pseudo = pseudo_totals.iter().sum::<f64>() / pseudo_totals.len() as f64;
    let report = RunReport::new(cfg.strategy.tag(), ok_seeds, accs, mu_pseudo)
        .map_err(input_err)?;
    let report_path = run_dir.join("report.txt");
    eval::save_report(&report, &report_path).map_err(input_err)?;
    if !failures.is_empty() {
        let mut text = fs::read_to_string(&report_path)
            .map_err(|e| CliError::runtime(format!("cannot reread report: {e}")))?;
        for (seed, msg) in &failures {
            text.push_str(&format!("# failed seed {seed}: {msg}\n"));
        }
        write_atomic(&report_path, &text)?;
        for (seed, msg) in &failures {
            eprintln!("warning: seed {seed} failed: {msg}");
        }
    }

    println!(
        "{}: accuracy {:.4} ± {:.4} over {} seeds (mu_pseudo {:.1}) -> {}",
        cfg.strategy.tag(),
        report.mean,
        report.std,
        report.seeds.len(),
        report.mu_pseudo,
        report_path.display()
    );
    Ok(())
}

type SeedOutcome = Result<(SslResult, Vec<usize>, f64), String>;

/// Execute the seeds, up to `cfg.jobs` in parallel. Each seed is a pure
/// function of its own derived configuration, so the schedule cannot change
/// results.
fn run_seeds(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    labeled: &Dataset,
    unlabeled: &Dataset,
    validation: &Dataset,
    test: &Dataset,
) -> Result<Vec<SeedOutcome>, CliError> {
    let run_one = |seed: u64| -> SeedOutcome {
        let ssl_cfg = cfg.ssl_config(seed);
        let result = run_strategy(
            cfg.strategy,
            labeled,
            unlabeled,
            validation,
            &ssl_cfg,
            DEFAULT_HIDDEN_DIM,
        )
        .map_err(|e| e.to_string())?;
        let preds = result.predictor.predict_labels(test).map_err(|e| e.to_string())?;
        let gold = test.gold_labels().map_err(|e| e.to_string())?;
        let acc = eval::accuracy(&preds, &gold).map_err(|e| e.to_string())?;
        Ok((result, preds, acc))
    };

    if cfg.jobs <= 1 || seeds.len() <= 1 {
        return Ok(seeds.iter().map(|&s| run_one(s)).collect());
    }

    let mut outcomes: Vec<Option<SeedOutcome>> = (0..seeds.len()).map(|_| None).collect();
    let chunk = seeds.len().div_ceil(cfg.jobs);
    std::thread::scope(|scope| {
        for (slot, seed_chunk) in outcomes.chunks_mut(chunk).zip(seeds.chunks(chunk)) {
            scope.spawn(move || {
                for (out, &seed) in slot.iter_mut().zip(seed_chunk) {
                    *out = Some(run_one(seed));
                }
            });
        }
    });
    Ok(outcomes.into_iter().map(|o| o.expect("all seeds executed")).collect())
}

fn load_labels_file(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| {
                CliError::input(format!("{}:{}: invalid label {l:?}", path.display(), i + 1))
            })
        })
        .collect()
}

/// Paired bootstrap comparison of two run directories, seed by seed.
pub fn compare(
    run_a: &Path,
    run_b: &Path,
    gold: Option<&Path>,
    resamples: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let report_a = eval::load_report(&run_a.join("report.txt")).map_err(input_err)?;
    let report_b = eval::load_report(&run_b.join("report.txt")).map_err(input_err)?;
    if report_a.seeds != report_b.seeds {
        return Err(CliError::input(format!(
            "seed sets differ: {:?} vs {:?}",
            report_a.seeds, report_b.seeds
        )));
    }

    let default_gold = run_a
        .parent()
        .map(|p| p.join("prepared").join("test_gold.labels"))
        .unwrap_or_else(|| PathBuf::from("test_gold.labels"));
    let gold_path = gold.unwrap_or(&default_gold);
    let gold = load_labels_file(gold_path)?;

    let mut lines = Vec::new();
    let mut p_values = Vec::new();
    for &seed in &report_a.seeds {
        let preds_a = load_labels_file(&run_a.join(format!("seed_{seed}.preds")))?;
        let preds_b = load_labels_file(&run_b.join(format!("seed_{seed}.preds")))?;
        if preds_a.len() != gold.len() || preds_b.len() != gold.len() {
            return Err(CliError::input(format!(
                "seed {seed}: prediction files do not match the gold test set"
            )));
        }
        let p = paired_bootstrap_test(&preds_a, &preds_b, &gold, resamples, seed)
            .map_err(input_err)?;
        lines.push(format!("seed\t{seed}\tp={p:.6}"));
        p_values.push(p);
    }

    let mut sorted = p_values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };

    let name = |p: &Path| {
        p.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    };
    let header = format!(
        "#compare\ta={}\tb={}\tresamples={resamples}\tmedian_p={median:.6}",
        name(run_a),
        name(run_b)
    );
    let mut text = header.clone();
    text.push('\n');
    for line in &lines {
        text.push_str(line);
        text.push('\n');
    }

    if let Some(parent) = run_a.parent() {
        let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| parent.join("compare"));
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
        let out_path = out_dir.join(format!("{}_vs_{}.txt", name(run_a), name(run_b)));
        write_atomic(&out_path, &text)?;
    }

    println!("{header}");
    for line in &lines {
        println!("{line}");
    }
    Ok(())
}

/// Print a run report, re-verifying its aggregate from the per-seed records.
pub fn report(run_dir: &Path) -> Result<(), CliError> {
    let report = eval::load_report(&run_dir.join("report.txt")).map_err(input_err)?;
    println!("strategy: {}", report.strategy);
    for (seed, acc) in report.seeds.iter().zip(&report.per_seed_accuracy) {
        println!("seed {seed}: accuracy {acc:.6}");
    }
    println!(
        "mean {:.6} ± {:.6} over {} seeds, mu_pseudo {:.1}",
        report.mean,
        report.std,
        report.seeds.len(),
        report.mu_pseudo
    );
    if let Some(p) = report.p_value_vs_baseline {
        println!("p vs baseline: {p:.6}");
    }
    Ok(())
}
