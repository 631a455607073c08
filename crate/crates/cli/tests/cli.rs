//! End-to-end CLI checks driving the compiled binary.

use std::path::Path;
use std::process::Command;

fn onedconv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onedconv"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn datagen(dir: &Path, train: usize, test: usize) {
    run_ok(onedconv()
        .arg("datagen")
        .arg("--out-dir")
        .arg(dir)
        .arg("--train")
        .arg(train.to_string())
        .arg("--test")
        .arg(test.to_string())
        .arg("--seed")
        .arg("9"));
}

#[test]
fn gradcheck_reports_all_ops() {
    let out = run_ok(onedconv().arg("gradcheck").arg("--seeds").arg("1"));
    for op in ["conv2d", "fc", "batchnorm", "softmax_ce", "onedconv"] {
        let line = out
            .lines()
            .find(|l| l.starts_with(op))
            .unwrap_or_else(|| panic!("missing line for {op}:\n{out}"));
        assert!(line.contains("pass"), "{line}");
        assert!(line.contains("max_rel="), "{line}");
    }
}

#[test]
fn account_csv_totals() {
    let out = run_ok(onedconv()
        .arg("account")
        .arg("--model")
        .arg("resnet18")
        .arg("--variant")
        .arg("onedconv")
        .arg("--csv"));
    assert!(out.lines().next().unwrap().starts_with("layer,kind,params"));
    let total = out.lines().last().unwrap();
    assert!(total.starts_with("total,"), "{total}");
    let fields: Vec<&str> = total.split(',').collect();
    let params: u64 = fields[2].parse().unwrap();
    assert!((params as f64 - 11.24e6).abs() / 11.24e6 < 0.02);
    let overhead: u64 = fields[4].parse().unwrap();
    assert!(overhead > 0);
}

#[test]
fn train_eval_dump_offsets_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path(), 120, 40);

    let ckpt = dir.path().join("model.odc");
    let metrics = dir.path().join("metrics.csv");
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "model = tiny-cnn\nvariant = onedconv\nepochs = 2\nbatch_size = 16\nlr = 0.02\nseed = 3\n\
             train_images = {}\ntrain_labels = {}\ntest_images = {}\ntest_labels = {}\n\
             checkpoint_out = {}\nmetrics_out = {}\nrecord_seconds = false\n",
            dir.path().join("train-images-idx3-ubyte").display(),
            dir.path().join("train-labels-idx1-ubyte").display(),
            dir.path().join("test-images-idx3-ubyte").display(),
            dir.path().join("test-labels-idx1-ubyte").display(),
            ckpt.display(),
            metrics.display(),
        ),
    )
    .unwrap();

    let out = run_ok(onedconv().arg("train").arg("--config").arg(&config));
    assert!(out.starts_with("epoch,split,loss,accuracy,seconds"));
    assert!(ckpt.exists());
    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.contains("offset_dev_conv1"));

    let out = run_ok(onedconv()
        .arg("eval")
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--model")
        .arg("tiny-cnn")
        .arg("--variant")
        .arg("onedconv")
        .arg("--images")
        .arg(dir.path().join("test-images-idx3-ubyte"))
        .arg("--labels")
        .arg(dir.path().join("test-labels-idx1-ubyte")));
    assert!(out.contains("accuracy"), "{out}");

    let offsets = dir.path().join("offsets.csv");
    run_ok(onedconv()
        .arg("dump-offsets")
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--model")
        .arg("tiny-cnn")
        .arg("--variant")
        .arg("onedconv")
        .arg("--images")
        .arg(dir.path().join("test-images-idx3-ubyte"))
        .arg("--labels")
        .arg(dir.path().join("test-labels-idx1-ubyte"))
        .arg("--out")
        .arg(&offsets));
    let text = std::fs::read_to_string(&offsets).unwrap();
    assert!(text.starts_with("layer,mean_abs_dev,max_abs_dev"));
    // two dynamic layers in tiny-cnn
    assert_eq!(text.trim().lines().count(), 3);
}

#[test]
fn dump_offsets_rejects_vanilla() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path(), 40, 20);
    let ckpt = dir.path().join("v.odc");
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "variant = vanilla\nepochs = 0\ntrain_images = {}\ntrain_labels = {}\ncheckpoint_out = {}\n",
            dir.path().join("train-images-idx3-ubyte").display(),
            dir.path().join("train-labels-idx1-ubyte").display(),
            ckpt.display(),
        ),
    )
    .unwrap();
    run_ok(onedconv().arg("train").arg("--config").arg(&config));
    let out = onedconv()
        .arg("dump-offsets")
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--variant")
        .arg("vanilla")
        .arg("--images")
        .arg(dir.path().join("test-images-idx3-ubyte"))
        .arg("--labels")
        .arg(dir.path().join("test-labels-idx1-ubyte"))
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no dynamic layers"));
}

#[test]
fn distort_identity_preserves_bytes() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path(), 30, 10);
    // first pass any file through an identity load/save so the comparison is
    // against the 32x32 container the tool writes
    let src_i = dir.path().join("test-images-idx3-ubyte");
    let src_l = dir.path().join("test-labels-idx1-ubyte");
    let base_i = dir.path().join("base-images");
    let base_l = dir.path().join("base-labels");
    run_ok(onedconv()
        .arg("distort")
        .arg("--mode")
        .arg("identity")
        .arg("--in-images")
        .arg(&src_i)
        .arg("--in-labels")
        .arg(&src_l)
        .arg("--out-images")
        .arg(&base_i)
        .arg("--out-labels")
        .arg(&base_l));
    let out_i = dir.path().join("out-images");
    let out_l = dir.path().join("out-labels");
    run_ok(onedconv()
        .arg("distort")
        .arg("--mode")
        .arg("identity")
        .arg("--in-images")
        .arg(&base_i)
        .arg("--in-labels")
        .arg(&base_l)
        .arg("--out-images")
        .arg(&out_i)
        .arg("--out-labels")
        .arg(&out_l));
    assert_eq!(
        std::fs::read(&base_i).unwrap(),
        std::fs::read(&out_i).unwrap()
    );
    assert_eq!(
        std::fs::read(&base_l).unwrap(),
        std::fs::read(&out_l).unwrap()
    );

    // rotated mode in contrast changes the pixels
    let rot_i = dir.path().join("rot-images");
    let rot_l = dir.path().join("rot-labels");
    run_ok(onedconv()
        .arg("distort")
        .arg("--mode")
        .arg("rotated")
        .arg("--seed")
        .arg("4")
        .arg("--in-images")
        .arg(&base_i)
        .arg("--in-labels")
        .arg(&base_l)
        .arg("--out-images")
        .arg(&rot_i)
        .arg("--out-labels")
        .arg(&rot_l));
    assert_ne!(
        std::fs::read(&base_i).unwrap(),
        std::fs::read(&rot_i).unwrap()
    );
    assert_eq!(
        std::fs::read(&base_l).unwrap(),
        std::fs::read(&rot_l).unwrap()
    );
}
