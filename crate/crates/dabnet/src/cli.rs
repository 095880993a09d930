//! The `dabnet` command line.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dabnet_core::analysis;
use dabnet_core::metrics::{ConfusionMatrix, DEFAULT_IGNORE};
use dabnet_core::net::{dabnet_forward, init_random_weights, predict_labels, NetworkSpec, WeightStore};
use dabnet_core::selfcheck;

use crate::bench::benchmark;
use crate::config::load_config;
use crate::io::{load_image_ppm, load_labels_pgm, load_weights, preprocess, save_labels_pgm, save_tensor};
use crate::report;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dabnet", version, about = "DABNet inference, analysis and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one PPM image and write a PGM label map
    Infer(InferArgs),
    /// Per-layer learnable parameter counts
    Params(TableArgs),
    /// Per-layer multiply-accumulate counts at a given input size
    Flops(FlopsArgs),
    /// Per-layer receptive field and jump
    Rf(TableArgs),
    /// Time forward passes on a seeded random input
    Bench(BenchArgs),
    /// Score a directory of predicted label maps against ground truth
    Eval(EvalArgs),
    /// Run the oracle differential suite and invariant checks
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Network config file (key = value; classes, block1, block2)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of output classes [default: 19]
    #[arg(long, value_name = "N")]
    pub classes: Option<usize>,
    /// Dilations of DAB block 1 [default: 2,2,2]
    #[arg(long, value_name = "d,d,d", value_delimiter = ',')]
    pub block1: Option<Vec<usize>>,
    /// Dilations of DAB block 2 [default: 4,4,8,8,16,16]
    #[arg(long, value_name = "d,d,d,d,d,d", value_delimiter = ',')]
    pub block2: Option<Vec<usize>>,
}

impl NetArgs {
    pub fn spec(&self) -> Result<NetworkSpec> {
        let mut spec = match &self.config {
            Some(path) => load_config(path)?,
            None => NetworkSpec::default(),
        };
        if let Some(c) = self.classes {
            spec.num_classes = c;
        }
        if let Some(b) = &self.block1 {
            spec.block1 = b.clone();
        }
        if let Some(b) = &self.block2 {
            spec.block2 = b.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// `.dabw` weight file; random weights from --seed when omitted
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    /// Seed for random weights
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl WeightArgs {
    fn load(&self, spec: &NetworkSpec) -> Result<WeightStore> {
        match &self.weights {
            Some(path) => load_weights(path, Some(spec)),
            None => Ok(init_random_weights(spec, self.seed)?),
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Input image (binary PPM)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output label map (binary PGM)
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Also write the raw logits as a `.tns` dump
    #[arg(long, value_name = "PATH")]
    pub logits: Option<PathBuf>,
    /// Per-channel means on the [0, 1] scale
    #[arg(long, value_name = "r,g,b", value_parser = parse_means, default_value = "0,0,0")]
    pub mean: [f32; 3],
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Emit CSV instead of an aligned table
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Input size
    #[arg(long, value_name = "HxW", value_parser = parse_size, default_value = "512x1024")]
    pub size: (usize, usize),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, value_name = "HxW", value_parser = parse_size, default_value = "512x1024")]
    pub size: (usize, usize),
    /// Timed iterations
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Untimed iterations before timing starts
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted label maps (PGM)
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Directory of ground-truth label maps with matching file names
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 19)]
    pub classes: usize,
    /// Ground-truth label excluded from scoring
    #[arg(long, value_name = "N", default_value_t = DEFAULT_IGNORE)]
    pub ignore: u8,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Randomized cases per check
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
}

fn parse_size(text: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got '{text}'"))?;
    let dim = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("bad dimension '{s}'"));
    Ok((dim(h)?, dim(w)?))
}

fn parse_means(text: &str) -> std::result::Result<[f32; 3], String> {
    let values: Vec<f32> = text
        .split(',')
        .map(|s| s.trim().parse::<f32>().map_err(|_| format!("bad mean '{s}'")))
        .collect::<std::result::Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f32>| format!("expected 3 means, got {}", v.len()))
}

/// Outcome of a command that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// `selftest` ran but at least one check failed.
    ChecksFailed,
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Infer(a) => infer(a, out),
        Command::Params(a) => {
            let report = analysis::count_params(&a.net.spec()?)?;
            write_out(out, &report::params_table(&report).render(a.csv))?;
            Ok(Status::Success)
        }
        Command::Flops(a) => {
            let (h, w) = a.size;
            let report = analysis::count_macs(&a.table.net.spec()?, h, w)?;
            write_out(out, &report::macs_table(&report).render(a.table.csv))?;
            Ok(Status::Success)
        }
        Command::Rf(a) => {
            let (h, w) = analysis::NOMINAL_INPUT;
            let report = analysis::analyze(&a.net.spec()?, h, w)?;
            write_out(out, &report::rf_table(&report).render(a.csv))?;
            Ok(Status::Success)
        }
        Command::Bench(a) => {
            let spec = a.net.spec()?;
            let weights = a.weights.load(&spec)?;
            let report = benchmark(&spec, &weights, a.size, a.warmup, a.iters)?;
            write_out(out, &format!("{report}\n"))?;
            Ok(Status::Success)
        }
        Command::Eval(a) => eval(a, out),
        Command::Selftest(a) => {
            let outcomes = selfcheck::run_all(a.seed, a.cases);
            let mut text = String::new();
            for o in &outcomes {
                let verdict = if o.passed() { "ok  " } else { "FAIL" };
                text.push_str(&format!("{verdict} {:<28} {:>5} cases", o.name, o.cases));
                if let Some(first) = &o.first_failure {
                    text.push_str(&format!("  {} failed, first: {first}", o.failures));
                }
                text.push('\n');
            }
            let failed = outcomes.iter().filter(|o| !o.passed()).count();
            text.push_str(&format!("{} checks, {failed} failed\n", outcomes.len()));
            write_out(out, &text)?;
            Ok(if failed == 0 { Status::Success } else { Status::ChecksFailed })
        }
    }
}

fn infer(a: InferArgs, out: &mut dyn Write) -> Result<Status> {
    let spec = a.net.spec()?;
    let weights = a.weights.load(&spec)?;
    let image = preprocess(&load_image_ppm(&a.input)?, a.mean)?;
    let logits = dabnet_forward(&image, &spec, &weights)?;
    let labels = predict_labels(&logits)?;
    save_labels_pgm(&labels, &a.output)?;
    if let Some(path) = &a.logits {
        save_tensor(&logits, path)?;
    }
    let (_, h, w) = labels.dims();
    write_out(out, &format!("wrote {}x{} label map to {}\n", h, w, a.output.display()))?;
    Ok(Status::Success)
}

fn pgm_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_owned());
            }
        }
    }
    Ok(names)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<Status> {
    if a.classes == 0 || a.classes > NetworkSpec::MAX_CLASSES {
        return Err(Error::Config(format!("class count must be in 1..=255, got {}", a.classes)));
    }
    let preds = pgm_names(&a.pred)?;
    let gts = pgm_names(&a.gt)?;
    if let Some(name) = preds.symmetric_difference(&gts).next() {
        let side = if gts.contains(name) { &a.pred } else { &a.gt };
        return Err(Error::Eval(format!("{name} has no counterpart in {}", side.display())));
    }
    if preds.is_empty() {
        return Err(Error::Eval(format!("no .pgm files in {}", a.pred.display())));
    }
    let mut cm = ConfusionMatrix::new(a.classes);
    for name in &preds {
        let gt = load_labels_pgm(a.gt.join(name))?;
        let pred = load_labels_pgm(a.pred.join(name))?;
        cm.accumulate(&gt, &pred, a.ignore)
            .map_err(|e| Error::Eval(format!("{name}: {e}")))?;
    }
    let table = report::iou_table(&cm)?;
    write_out(out, &table.render(a.csv))?;
    if a.csv {
        write_out(out, &format!("{}\n", table.summary.join("\n")))?;
    }
    Ok(Status::Success)
}
