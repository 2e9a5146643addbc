use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use spark_core::augment::{curriculum_ratio, CurriculumConfig};

const TINY: &str = r#"
seed = 3
threads = 2

[grid]
height = 8
width = 8

[dataset]
generator = "navier_stokes"
params = [[1e-2], [1e-3], [1e-4]]
episodes_per_param = 2

[dataset.ood_rule]
kind = "explicit"
out = [[1e-4]]

[dataset.navier_stokes]
frames = 8
steps_per_frame = 4

[pretrain]
epochs = 2
batch_size = 4
codebook_size = 12
frame_stride = 2

[pretrain.encoder]
attention_hidden = 4
spectral_modes = 2
gnn_hidden = 6
gnn_layers = 1
latent_dim = 4
decoder_hidden = 6

[dynamics]
history = 2
horizon = 2
window_stride = 2
epochs = 4
batch_size = 2
ode_layers = 1
spectral_modes = 2
decoder_hidden = 6
substeps = 1
holdout_every = 2

[augment]
k = 3
"#;

fn spark(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spark"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("SPARK_LOG", "error")
        .output()
        .expect("spawn spark")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn help_documents_config_keys() {
    let out = Command::new(env!("CARGO_BIN_EXE_spark"))
        .arg("--help")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success());
    for key in [
        "episodes_per_param",
        "codebook_size",
        "lambda_reg",
        "max_ratio",
        "latent_dim",
        "Exit codes",
        "SPARK_LOG",
    ] {
        assert!(text.contains(key), "help lacks {key}");
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[dataset]\nepisodes_per_param = 0\n");
    let out = spark(dir.path(), &["--config", &cfg, "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("dataset.sparkds").exists());

    let cfg = write_config(dir.path(), "[dynamics]\nhorizon = 3\nhorizn = 4\n");
    let out = spark(dir.path(), &["--config", &cfg, "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("horizn"), "{err}");

    let out = spark(dir.path(), &["pretrain", "--dataset", "/nonexistent/data.sparkds"]);
    assert_eq!(out.status.code(), Some(2));
    let out = spark(dir.path(), &["train", "--aug-mode", "blend"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let cfg = write_config(root.path(), TINY);
    let a = root.path().join("a");
    let b = root.path().join("b");
    let a_s = a.to_str().unwrap();

    let manifest = ok(&spark(&a, &["--config", &cfg, "gen-data"]));
    assert!(manifest.contains("in-domain parameter values: 2"), "{manifest}");
    assert!(manifest.contains("out-domain parameter values: 1"), "{manifest}");
    assert!(manifest.contains("episodes: 6"), "{manifest}");
    ok(&spark(&b, &["--config", &cfg, "gen-data"]));
    assert!(
        read(a.join("dataset.sparkds")) == read(b.join("dataset.sparkds")),
        "{} differs",
        a.join("dataset.sparkds").display()
    );

    let t0 = Instant::now();
    ok(&spark(&a, &["--config", &cfg, "pretrain"]));
    assert!(t0.elapsed().as_secs() < 60);
    ok(&spark(
        &b,
        &[
            "--config",
            &cfg,
            "pretrain",
            "--dataset",
            &format!("{a_s}/dataset.sparkds"),
        ],
    ));
    assert!(
        read(a.join("pretrain.sparkck")) == read(b.join("pretrain.sparkck")),
        "{} differs",
        a.join("pretrain.sparkck").display()
    );
    let losses = String::from_utf8(read(a.join("pretrain_loss.csv"))).unwrap();
    assert_eq!(losses.lines().count(), 4);

    let plain = root.path().join("plain");
    let out = ok(&spark(
        &plain,
        &[
            "--config",
            &cfg,
            "train",
            "--no-augment",
            "--dataset",
            &format!("{a_s}/dataset.sparkds"),
            "--checkpoint",
            &format!("{a_s}/pretrain.sparkck"),
        ],
    ));
    assert!(out.contains("augmentation calls 0"), "{out}");

    let augmented = ["--config", &cfg, "train", "--curriculum", "1,2,0.6"];
    ok(&spark(&a, &augmented));
    ok(&spark(&b, &augmented));
    assert!(
        read(a.join("dynamics.sparkck")) == read(b.join("dynamics.sparkck")),
        "{} differs",
        a.join("dynamics.sparkck").display()
    );
    assert!(read(a.join("dynamics.sparkck")) != read(plain.join("dynamics.sparkck")));

    let metrics = String::from_utf8(read(a.join("metrics.csv"))).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("epoch,train_mse,val_mse,aug_ratio,wallclock"));
    let schedule = "1,2,0.6".parse::<CurriculumConfig>().unwrap().resolve(4);
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let epoch: usize = f[0].parse().unwrap();
        let logged: f64 = f[3].parse().unwrap();
        assert_eq!(logged, curriculum_ratio(epoch, &schedule), "epoch {epoch}");
        rows += 1;
    }
    assert_eq!(rows, 4);

    let report = ok(&spark(
        &a,
        &["--config", &cfg, "eval", "--split", "out", "--dump-predictions"],
    ));
    assert!(report.contains("out-domain"));
    for f in [
        "eval_out.csv",
        "eval_out.txt",
        "eval_out_steps.csv",
        "spectrum_out.csv",
        "predictions_out.csv",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    // Recompute the reported MSE from the raw dump.
    let dump = String::from_utf8(read(a.join("predictions_out.csv"))).unwrap();
    let (mut sq, mut n) = (0.0, 0usize);
    for line in dump.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        sq += (f[6] - f[7]).powi(2);
        n += 1;
    }
    let csv = String::from_utf8(read(a.join("eval_out.csv"))).unwrap();
    let reported: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let recomputed = sq / n as f64;
    assert!(
        (reported - recomputed).abs() <= 1e-12 * recomputed.max(1e-300),
        "{reported} vs {recomputed}"
    );

    ok(&spark(&a, &["eval", "--split", "in"]));
    assert!(a.join("eval_in.csv").exists());

    let hist = ok(&spark(&a, &["inspect-codebook", "--csv", &format!("{a_s}/usage.csv")]));
    assert!(hist.contains("codes: 12") && hist.contains("perplexity"), "{hist}");
    assert_eq!(
        String::from_utf8(read(a.join("usage.csv"))).unwrap().lines().count(),
        13
    );

    // A config whose latent width disagrees with the checkpoint is refused.
    let wide = write_config(root.path(), &TINY.replace("latent_dim = 4", "latent_dim = 5"));
    let out = spark(&a, &["--config", &wide, "train"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("latent_dim"), "{err}");
}

#[test]
fn out_split_without_ood_episodes_is_an_error() {
    let root = tempfile::tempdir().unwrap();
    let text = TINY
        .replace("params = [[1e-2], [1e-3], [1e-4]]", "params = [[1e-2], [1e-3]]")
        .replace("kind = \"explicit\"\nout = [[1e-4]]", "kind = \"all_in_domain\"");
    let cfg = write_config(root.path(), &text);
    let d = root.path().join("run");
    ok(&spark(&d, &["--config", &cfg, "gen-data"]));
    ok(&spark(&d, &["--config", &cfg, "pretrain"]));
    ok(&spark(&d, &["--config", &cfg, "train", "--no-augment"]));
    let out = spark(&d, &["--config", &cfg, "eval", "--split", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out-domain"));
}

#[test]
fn k_sweep_writes_one_row_per_k() {
    let root = tempfile::tempdir().unwrap();
    let text = TINY.replace("epochs = 4", "epochs = 1");
    let cfg = write_config(root.path(), &text);
    let d = root.path().join("run");
    ok(&spark(&d, &["--config", &cfg, "gen-data"]));
    ok(&spark(&d, &["--config", &cfg, "pretrain"]));
    ok(&spark(&d, &["--config", &cfg, "k-sweep", "--curriculum", "0,0,1"]));
    let csv = String::from_utf8(read(d.join("k_sweep.csv"))).unwrap();
    let ks: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ks, vec![1, 3, 5, 7, 9, 11]);
    assert!(csv.lines().skip(1).all(|l| l.contains("out-domain")));
}
