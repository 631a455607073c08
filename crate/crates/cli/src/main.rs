//! Command line front end: gradient checking, accounting, dataset tooling,
//! training, evaluation, and offset statistics export.

use clap::{Parser, Subcommand};
use onedconv_core::accounting::{
    build_resnet18, build_tiny_cnn, count_flops, count_params, layers, ModelGraph, Variant,
};
use onedconv_core::checkpoint::load_checkpoint;
use onedconv_core::data::{
    distort_dataset, load_idx, save_idx, write_digit_idx, DistortionSpec, LabeledDataset,
};
use onedconv_core::gradcheck::{check, CheckOp};
use onedconv_core::model::Network;
use onedconv_core::train::{
    dump_offsets, evaluate, metrics_csv, offsets_csv, parse_config, train, DataMode, ModelKind,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "onedconv", about = "OneDConv operator toolbox", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference check of every backward implementation.
    Gradcheck {
        /// Base seed for input generation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of seeds per op.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Per-layer parameter and FLOPs table.
    Account {
        #[arg(long, default_value = "resnet18")]
        model: String,
        #[arg(long, default_value = "onedconv")]
        variant: String,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        /// Input channel count (the spatial extents are fixed at 32x32).
        #[arg(long, default_value_t = 3)]
        channels: usize,
        /// Emit machine-readable CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Apply a distortion protocol to an IDX pair and write it back out.
    Distort {
        /// rotated | rts | identity
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        in_images: PathBuf,
        #[arg(long)]
        in_labels: PathBuf,
        #[arg(long)]
        out_images: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate a synthetic digit dataset as IDX pairs.
    Datagen {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "tiny-cnn")]
        model: String,
        #[arg(long, default_value = "onedconv")]
        variant: String,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        /// Distort the dataset first: origin | rotated | rts.
        #[arg(long, default_value = "origin")]
        distort: String,
        #[arg(long, default_value_t = 0)]
        distort_seed: u64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
    },
    /// Export per-layer offset deviation statistics as CSV.
    DumpOffsets {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "tiny-cnn")]
        model: String,
        #[arg(long, default_value = "onedconv")]
        variant: String,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        batch: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn build_graph(model: &str, variant: &str, classes: usize, channels: usize) -> Result<ModelGraph, onedconv_core::Error> {
    let variant: Variant = variant.parse()?;
    let model: ModelKind = model.parse()?;
    Ok(match model {
        ModelKind::TinyCnn => build_tiny_cnn(variant, classes, [channels, 32, 32]),
        ModelKind::Resnet18 => build_resnet18(variant, classes, [channels, 32, 32]),
    })
}

fn load_model(
    checkpoint: &PathBuf,
    model: &str,
    variant: &str,
    classes: usize,
) -> Result<Network, onedconv_core::Error> {
    let graph = build_graph(model, variant, classes, 1)?;
    let mut net = Network::from_graph(&graph, 0)?;
    load_checkpoint(&mut net, checkpoint)?;
    Ok(net)
}

fn load_distorted(
    images: &PathBuf,
    labels: &PathBuf,
    limit: Option<usize>,
    distort: &str,
    seed: u64,
) -> Result<LabeledDataset, onedconv_core::Error> {
    let ds = load_idx(images, labels, limit)?;
    Ok(match distort.parse::<DataMode>()? {
        DataMode::Origin => ds,
        DataMode::Rotated => distort_dataset(&ds, &DistortionSpec::rotated(seed)),
        DataMode::Rts => distort_dataset(&ds, &DistortionSpec::rts(seed)),
    })
}

fn run(cli: Cli) -> Result<ExitCode, onedconv_core::Error> {
    match cli.command {
        Command::Gradcheck { seed, seeds } => {
            let mut all_pass = true;
            for op in CheckOp::ALL {
                let tol = op.default_tol();
                let mut worst = 0.0f64;
                let mut pass = true;
                for s in 0..seeds.max(1) {
                    let report = check(op, seed.wrapping_add(s), tol)?;
                    worst = worst.max(report.max_rel());
                    pass &= report.pass;
                }
                println!(
                    "{:<12} max_rel={:<12.3e} {}",
                    op.name(),
                    worst,
                    if pass { "pass" } else { "FAIL" }
                );
                all_pass &= pass;
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Account {
            model,
            variant,
            classes,
            channels,
            csv,
        } => {
            let graph = build_graph(&model, &variant, classes, channels)?;
            let rows = layers(&graph);
            if csv {
                println!("layer,kind,params,main_flops,overhead_flops");
            } else {
                println!(
                    "{:<24} {:<10} {:>12} {:>14} {:>14}",
                    "layer", "kind", "params", "main_flops", "overhead"
                );
            }
            let mut p_total = 0u64;
            let (mut m_total, mut o_total) = (0u64, 0u64);
            for l in &rows {
                let single = ModelGraph {
                    input: graph.input,
                    classes,
                    nodes: vec![onedconv_core::accounting::GraphNode::Layer((*l).clone())],
                };
                let p = count_params(&single).trainable;
                let (m, o) = count_flops(l);
                p_total += p;
                m_total += m;
                o_total += o;
                let kind = match &l.kind {
                    onedconv_core::accounting::LayerKind::Conv(_) => "conv",
                    onedconv_core::accounting::LayerKind::OneDConv(_) => "onedconv",
                    onedconv_core::accounting::LayerKind::BatchNorm { .. } => "bn",
                    onedconv_core::accounting::LayerKind::Relu => "relu",
                    onedconv_core::accounting::LayerKind::MaxPool { .. } => "maxpool",
                    onedconv_core::accounting::LayerKind::AvgPool { .. } => "avgpool",
                    onedconv_core::accounting::LayerKind::Fc { .. } => "fc",
                };
                if csv {
                    println!("{},{},{},{},{}", l.name, kind, p, m, o);
                } else {
                    println!("{:<24} {:<10} {:>12} {:>14} {:>14}", l.name, kind, p, m, o);
                }
            }
            if csv {
                println!("total,,{},{},{}", p_total, m_total, o_total);
            } else {
                println!(
                    "{:<24} {:<10} {:>12} {:>14} {:>14}",
                    "total", "", p_total, m_total, o_total
                );
                println!(
                    "trainable params: {:.2} M ({} exact)",
                    p_total as f64 / 1e6,
                    p_total
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Distort {
            mode,
            seed,
            in_images,
            in_labels,
            out_images,
            out_labels,
            limit,
        } => {
            let ds = load_idx(&in_images, &in_labels, limit)?;
            let spec = match mode.as_str() {
                "rotated" => DistortionSpec::rotated(seed),
                "rts" => DistortionSpec::rts(seed),
                "identity" => DistortionSpec::identity(seed),
                other => {
                    return Err(onedconv_core::Error::Config(format!(
                        "unknown mode '{}'",
                        other
                    )))
                }
            };
            let out = distort_dataset(&ds, &spec);
            save_idx(&out, &out_images, &out_labels)?;
            println!("wrote {} distorted records", out.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Datagen {
            out_dir,
            train: n_train,
            test: n_test,
            seed,
        } => {
            std::fs::create_dir_all(&out_dir)?;
            write_digit_idx(
                out_dir.join("train-images-idx3-ubyte"),
                out_dir.join("train-labels-idx1-ubyte"),
                n_train,
                seed,
            )?;
            write_digit_idx(
                out_dir.join("test-images-idx3-ubyte"),
                out_dir.join("test-labels-idx1-ubyte"),
                n_test,
                seed.wrapping_add(1),
            )?;
            println!(
                "wrote {} train / {} test records to {}",
                n_train,
                n_test,
                out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = parse_config(&text)?;
            let (_, metrics) = train(&cfg)?;
            print!("{}", metrics_csv(&metrics));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            checkpoint,
            model,
            variant,
            classes,
            images,
            labels,
            limit,
            distort,
            distort_seed,
            batch,
        } => {
            let mut net = load_model(&checkpoint, &model, &variant, classes)?;
            let ds = load_distorted(&images, &labels, limit, &distort, distort_seed)?;
            let rec = evaluate(&mut net, &ds, batch, true)?;
            println!("loss {:.6} accuracy {:.4} ({} samples)", rec.loss, rec.accuracy, ds.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpOffsets {
            checkpoint,
            model,
            variant,
            classes,
            images,
            labels,
            limit,
            out,
            batch,
        } => {
            let mut net = load_model(&checkpoint, &model, &variant, classes)?;
            let ds = load_distorted(&images, &labels, limit, "origin", 0)?;
            let stats = dump_offsets(&mut net, &ds, batch)?;
            std::fs::write(&out, offsets_csv(&stats))?;
            println!("wrote {} layer rows to {}", stats.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
