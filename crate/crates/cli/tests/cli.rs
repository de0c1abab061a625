//! End-to-end runs of the binary: prepare/run/compare/report on a small
//! synthetic experiment and on a handcrafted review corpus, plus the exit
//! code contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

static CASE: AtomicUsize = AtomicUsize::new(0);

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "triboot-cli-{}-{}-{}",
        tag,
        std::process::id(),
        CASE.fetch_add(1, Ordering::SeqCst)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn triboot(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triboot"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, expected: i32) {
    let code = out.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected,
        "exit {code}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_synth_config(dir: &Path, strategy: &str, n_seeds: usize) -> PathBuf {
    let path = dir.join(format!("{strategy}.conf"));
    fs::write(
        &path,
        format!(
            "# synthetic smoke experiment\n\
             synthetic = true\n\
             synth_n_source = 60\n\
             synth_n_target = 160\n\
             synth_rotation_degrees = 30.0\n\
             synth_noise_sigma = 0.3\n\
             n_labeled_source = 60\n\
             n_unlabeled_target = 80\n\
             n_validation_target = 40\n\
             strategy = {strategy}\n\
             n_seeds = {n_seeds}\n\
             seed = 100\n\
             out_dir = out\n\
             outer_epochs = 2\n\
             learning_rate = 0.01\n\
             max_epochs = 10\n\
             patience = 5\n",
        ),
    )
    .unwrap();
    path
}

#[test]
fn synthetic_experiment_end_to_end() {
    let dir = workdir("synth");
    let conf = write_synth_config(&dir, "src_only", 2);

    // Prepare, then refuse to overwrite without --force.
    let out = triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("source_labeled=60"), "{stdout}");
    assert!(stdout.contains("target_unlabeled=80"), "{stdout}");
    assert!(stdout.contains("target_validation=40"), "{stdout}");
    assert!(stdout.contains("target_test=40"), "{stdout}");

    let out = triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir);
    assert_code(&out, 2);
    let out = triboot(&["--config", conf.to_str().unwrap(), "--force", "prepare"], &dir);
    assert_code(&out, 0);

    // Run the baseline and tri-training over the prepared splits.
    let out = triboot(&["--config", conf.to_str().unwrap(), "run"], &dir);
    assert_code(&out, 0);
    for seed in [100, 101] {
        assert!(dir.join(format!("out/src_only/seed_{seed}.ssl")).exists());
        assert!(dir.join(format!("out/src_only/seed_{seed}.preds")).exists());
    }
    assert!(dir.join("out/src_only/report.txt").exists());

    let tri_conf = write_synth_config(&dir, "tri", 2);
    let out = triboot(
        &["--config", tri_conf.to_str().unwrap(), "--jobs", "2", "run"],
        &dir,
    );
    assert_code(&out, 0);

    // Reports print and re-verify.
    let out = triboot(&["report", "out/src_only"], &dir);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean"));

    // Comparing a run with itself yields p = 1 for every seed.
    let out = triboot(&["compare", "out/tri", "out/tri"], &dir);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("median_p=1.000000"), "{stdout}");
    assert_eq!(stdout.matches("\tp=1.000000").count(), 2, "{stdout}");
    assert!(dir.join("out/compare/tri_vs_tri.txt").exists());

    // And tri against the baseline runs the paired test per seed.
    let out = triboot(&["compare", "out/tri", "out/src_only", "--resamples", "500"], &dir);
    assert_code(&out, 0);

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn rerun_with_same_config_is_reproducible() {
    let dir = workdir("repro");
    let conf = write_synth_config(&dir, "self_throttled", 2);

    assert_code(&triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir), 0);
    assert_code(&triboot(&["--config", conf.to_str().unwrap(), "run"], &dir), 0);
    let first = fs::read_to_string(dir.join("out/self_throttled/report.txt")).unwrap();
    let seed_101 = fs::read_to_string(dir.join("out/self_throttled/seed_101.ssl")).unwrap();
    assert_code(&triboot(&["--config", conf.to_str().unwrap(), "run"], &dir), 0);
    let second = fs::read_to_string(dir.join("out/self_throttled/report.txt")).unwrap();
    assert_eq!(first, second);

    // Seed 101 of the two-seed run matches a single-seed run of seed 101.
    assert_code(
        &triboot(
            &["--config", conf.to_str().unwrap(), "--seed", "101", "run"],
            &dir,
        ),
        0,
    );
    let single = fs::read_to_string(dir.join("out/self_throttled/seed_101.ssl")).unwrap();
    assert_eq!(seed_101, single);

    // A single-seed run reports a zero standard deviation.
    let conf1 = write_synth_config(&dir, "src_only", 1);
    assert_code(&triboot(&["--config", conf1.to_str().unwrap(), "run"], &dir), 0);
    let report = fs::read_to_string(dir.join("out/src_only/report.txt")).unwrap();
    assert!(report.contains("std=0.000000"), "{report}");

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn review_corpus_pipeline_and_parse_errors() {
    let dir = workdir("reviews");

    // Handcrafted processed files: 40 lines per domain.
    let write_domain = |name: &str, flavor: &str| -> PathBuf {
        let path = dir.join(format!("{name}.processed"));
        let mut text = String::new();
        for i in 0..40 {
            let label = if i % 2 == 0 { "positive" } else { "negative" };
            let tone = if i % 2 == 0 { "great" } else { "awful" };
            text.push_str(&format!("{tone}:2 {tone}_{flavor}:1 {flavor}{i}:1 #label#:{label}\n"));
        }
        fs::write(&path, text).unwrap();
        path
    };
    let src = write_domain("books", "book");
    let tgt = write_domain("kitchen", "pan");

    let conf = dir.join("reviews.conf");
    fs::write(
        &conf,
        format!(
            "source_domain = books\n\
             target_domain = kitchen\n\
             source_path = {}\n\
             target_path = {}\n\
             strategy = self_threshold\n\
             n_seeds = 1\n\
             seed = 7\n\
             out_dir = out\n\
             n_labeled_source = 30\n\
             n_unlabeled_target = 20\n\
             n_validation_target = 10\n\
             max_features = 50\n\
             outer_epochs = 2\n\
             learning_rate = 0.01\n\
             max_epochs = 10\n\
             patience = 5\n",
            src.display(),
            tgt.display()
        ),
    )
    .unwrap();

    assert_code(&triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir), 0);
    assert!(dir.join("out/prepared/vocab.tsv").exists());
    assert_code(&triboot(&["--config", conf.to_str().unwrap(), "run"], &dir), 0);

    // A corrupt line is an input error naming the line number.
    fs::write(dir.join("books.processed"), "fine:1 #label#:positive\nbroken line\n").unwrap();
    let out = triboot(&["--config", conf.to_str().unwrap(), "--force", "prepare"], &dir);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"), "line number missing");

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_for_bad_inputs() {
    let dir = workdir("codes");

    // Missing config file.
    let out = triboot(&["--config", "missing.conf", "prepare"], &dir);
    assert_code(&out, 2);

    // Unknown strategy in the config.
    let conf = dir.join("bad.conf");
    fs::write(&conf, "synthetic = true\nstrategy = magic\n").unwrap();
    let out = triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir);
    assert_code(&out, 2);

    // Unknown key.
    fs::write(&conf, "synthetic = true\nbanana = 3\n").unwrap();
    let out = triboot(&["--config", conf.to_str().unwrap(), "prepare"], &dir);
    assert_code(&out, 2);

    // Run without prepared artifacts.
    let conf = write_synth_config(&dir, "tri", 1);
    let out = triboot(&["--config", conf.to_str().unwrap(), "run"], &dir);
    assert_code(&out, 2);

    // Compare with a missing prediction/report file.
    let out = triboot(&["compare", "nope_a", "nope_b"], &dir);
    assert_code(&out, 2);

    // Report on a missing directory.
    let out = triboot(&["report", "nope"], &dir);
    assert_code(&out, 2);

    fs::remove_dir_all(&dir).ok();
}
