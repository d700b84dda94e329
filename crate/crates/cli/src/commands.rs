//! Argument parsing and dispatch for the `neurocorr` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use neurocorr::data::{manifest_for, SyntheticManifest};
use neurocorr::entropy::{EntropyEstimate, DEFAULT_BINS, DEFAULT_K, DEFAULT_WIDTH_MULTIPLE};
use neurocorr::network::read_snapshot;
use neurocorr::{
    entropy_kernel_embedding, entropy_original, load_csv, neuronal_correlation, save_csv,
    structure_correlation_coefficient, weight_correlation, ActivationMatrix, Activation, ConnectivityPattern,
    CorrelationReport, Estimator, KernelEmbeddingConfig, KernelKind, WeightMatrix, WidthChoice,
};
use serde_json::{json, Value};

use crate::experiments::{
    self, Architecture, EpsilonConfig, GeConfig, GroundTruthConfig, LinearConfig, MnistSource, SweepConfig,
};
use crate::report::{Report, SCHEMA_VERSION};
use crate::{resolve_out_dir, CliError, Context};

#[derive(Debug, Parser)]
#[command(name = "neurocorr", version, about = "Correlation and entropy measures for feed-forward networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Neuronal correlation of an activation CSV (rows are samples).
    Nc(NcArgs),
    /// Weight correlation of a weight CSV (rows are inputs, columns are neurons).
    Wc(WcArgs),
    /// Structure-correlation coefficient of a connectivity pattern.
    Gamma(GammaArgs),
    /// Entropy of an activation CSV in the original and/or projected space.
    Entropy(EntropyArgs),
    /// Synthetic data utilities.
    #[command(subcommand)]
    Data(DataCommand),
    /// Print the contents of a CENT network snapshot.
    Inspect(InspectArgs),
    /// Run an experiment and write its report, CSV tables and SVG figures.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct NcArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// The CSV carries a trailing `label` column.
    #[arg(long)]
    pub has_labels: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct WcArgs {
    /// Weight matrix CSV; mutually exclusive with `--snapshot`.
    #[arg(long, conflicts_with = "snapshot", required_unless_present = "snapshot")]
    pub input: Option<PathBuf>,
    /// Take the weights from a CENT snapshot instead.
    #[arg(long, requires = "layer")]
    pub snapshot: Option<PathBuf>,
    /// 1-based layer index within the snapshot.
    #[arg(long)]
    pub layer: Option<usize>,
    /// Average absolute cosines instead of signed ones.
    #[arg(long)]
    pub abs: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
#[group(id = "pattern", required = true, multiple = false)]
pub struct PatternArgs {
    /// Every one of N neurons sees all M previous neurons.
    #[arg(long, num_args = 2, value_names = ["M", "N"])]
    pub fully_connected: Option<Vec<usize>>,
    /// Sliding 1-D window over LEN inputs.
    #[arg(long, num_args = 3, value_names = ["LEN", "WIDTH", "STRIDE"])]
    pub conv1d: Option<Vec<usize>>,
    /// Sliding FH×FW window over an H×W grid.
    #[arg(long, num_args = 5, value_names = ["H", "W", "FH", "FW", "STRIDE"])]
    pub conv2d: Option<Vec<usize>>,
    /// JSON file `{"previous_size": m, "parent_sets": [[...], ...]}`.
    #[arg(long)]
    pub parents: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Original,
    Projected,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Knn,
    Binning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Laplacian,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// The CSV carries a trailing `label` column (needed by `--select-width`).
    #[arg(long)]
    pub has_labels: bool,
    #[arg(long, value_enum, default_value_t = SpaceArg::Both)]
    pub space: SpaceArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Knn)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    /// Fixed kernel width.
    #[arg(long, conflicts_with_all = ["width_multiple", "select_width"])]
    pub sigma: Option<f64>,
    /// Kernel width as a multiple of the median pairwise distance.
    #[arg(long, conflicts_with = "select_width")]
    pub width_multiple: Option<f64>,
    /// Choose the width by kernel alignment with the labels.
    #[arg(long, requires = "has_labels")]
    pub select_width: bool,
    /// Penalty on feature-dimension correlation during width selection.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long)]
    pub max_dims: Option<usize>,
    #[arg(long)]
    pub sample_cap: Option<usize>,
    /// Report bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Sample i.i.d. N(0, variance·I) rows to CSV with a JSON manifest next to it.
    Gaussian(GaussianArgs),
    /// Rebuild a CSV from a manifest written by `data gaussian`.
    Regenerate(RegenerateArgs),
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegenerateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub snapshot: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; defaults to $NEUROCORR_OUT, then ./neurocorr-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Longer runs closer to the original experiment sizes.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// IDX image file (optionally gzipped).
    #[arg(long)]
    pub images: PathBuf,
    /// IDX label file (optionally gzipped).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 5000)]
    pub test_size: usize,
}

impl MnistArgs {
    fn source(&self, test: bool) -> MnistSource {
        MnistSource {
            images: self.images.clone(),
            labels: self.labels.clone(),
            train_size: self.train_size,
            test_size: if test { self.test_size } else { 0 },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Entropy and NC across the layers of an identity-activation network.
    Linear {
        #[command(flatten)]
        data: MnistArgs,
        #[arg(long, default_value = "I-20-20-20-20-20-O")]
        spec: String,
        #[arg(long, default_value = "identity")]
        activation: Activation,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        record_every: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        entropy_samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Entropy estimates of Gaussian samples against the closed form.
    Groundtruth {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7, 1.0])]
        variances: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = DEFAULT_WIDTH_MULTIPLE)]
        width_multiple: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Penultimate NC, WC quartiles and generalization gap across architectures.
    Ge {
        #[command(flatten)]
        data: MnistArgs,
        /// `NAME=NOTATION`, repeatable; defaults to N3, N4 and N5.
        #[arg(long = "arch")]
        architectures: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [Activation::Relu, Activation::Tanh])]
        activations: Vec<Activation>,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        record_every: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Gap between post- and pre-activation NC per layer.
    Epsilon {
        #[command(flatten)]
        data: MnistArgs,
        #[arg(long, default_value = "I-30-30-30-30-O")]
        spec: String,
        #[arg(long, default_value = "tanh")]
        activation: Activation,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
        /// Skip the identity-activation control run.
        #[arg(long)]
        no_control: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Mean |WC| of freshly initialised layers over width and fan-in.
    SweepInit {
        #[arg(long, default_value_t = 100)]
        fixed_m: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100, 200, 350, 500])]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        fixed_n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100, 200, 350, 500])]
        m_values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn measure_json(command: &str, input: &Path, r: &CorrelationReport) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "input": input,
        "measure": r.measure,
        "value": r.value,
        "pair_count": r.pair_count,
        "skipped_pairs": r.skipped_pairs,
    })
}

fn measure_text(name: &str, r: &CorrelationReport) -> String {
    format!("{name} {:.6}\npairs {}\nskipped {}\n", r.value, r.pair_count, r.skipped_pairs)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn cmd_nc(a: &NcArgs) -> Result<String, CliError> {
    let ds = load_csv(&a.input, a.has_labels).during("load_csv")?;
    let t = ActivationMatrix::new(ds.inputs).during("nc")?;
    let r = neuronal_correlation(&t).during("nc")?;
    Ok(if a.json { pretty(&measure_json("nc", &a.input, &r)) } else { measure_text("NC", &r) })
}

fn cmd_wc(a: &WcArgs) -> Result<String, CliError> {
    let (w, source) = match (&a.input, &a.snapshot) {
        (Some(p), _) => {
            let ds = load_csv(p, false).during("load_csv")?;
            (WeightMatrix::new(ds.inputs).during("wc")?, p.clone())
        }
        (None, Some(p)) => {
            let s = read_snapshot(p).during("read_snapshot")?;
            let l = a.layer.unwrap_or(0);
            if l == 0 || l > s.layers() {
                return Err(CliError::Usage(format!("layer {l} is outside 1..={}", s.layers())));
            }
            (s.weights[l - 1].clone(), p.clone())
        }
        (None, None) => return Err(CliError::Usage("wc needs --input or --snapshot".into())),
    };
    let r = weight_correlation(&w, a.abs).during("wc")?;
    let name = if a.abs { "|WC|" } else { "WC" };
    Ok(if a.json {
        let mut v = measure_json("wc", &source, &r);
        v["absolute"] = json!(a.abs);
        pretty(&v)
    } else {
        measure_text(name, &r)
    })
}

#[derive(serde::Deserialize)]
struct ParentFile {
    previous_size: usize,
    parent_sets: Vec<Vec<usize>>,
}

fn cmd_gamma(a: &GammaArgs) -> Result<String, CliError> {
    let p = &a.pattern;
    let (pattern, desc) = if let Some(v) = &p.fully_connected {
        (ConnectivityPattern::fully_connected(v[0], v[1], a.gamma), json!({"fully_connected": v}))
    } else if let Some(v) = &p.conv1d {
        (ConnectivityPattern::conv1d(v[0], v[1], v[2], a.gamma), json!({"conv1d": v}))
    } else if let Some(v) = &p.conv2d {
        (ConnectivityPattern::conv2d(v[0], v[1], (v[2], v[3]), v[4], a.gamma), json!({"conv2d": v}))
    } else if let Some(path) = &p.parents {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let f: ParentFile = serde_json::from_str(&text).map_err(neurocorr::Error::from).during("read parent sets")?;
        (ConnectivityPattern::from_parent_sets(f.parent_sets, f.previous_size, a.gamma), json!({"parents": path}))
    } else {
        return Err(CliError::Usage("gamma needs a connectivity pattern".into()));
    };
    let r = structure_correlation_coefficient(&pattern.during("gamma")?);
    Ok(if a.json {
        pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "gamma",
            "pattern": desc,
            "gamma": a.gamma,
            "measure": r.measure,
            "value": r.value,
            "neurons": r.pair_count,
        }))
    } else {
        format!("Gamma {}\nneurons {}\n", r.value, r.pair_count)
    })
}

fn in_units(mut e: EntropyEstimate, bits: bool) -> EntropyEstimate {
    if bits {
        let c = std::f64::consts::LN_2;
        e.value /= c;
        e.per_dimension.iter_mut().for_each(|v| *v /= c);
    }
    e
}

fn cmd_entropy(a: &EntropyArgs) -> Result<String, CliError> {
    let ds = load_csv(&a.input, a.has_labels).during("load_csv")?;
    let labels = ds.labels.clone();
    let t = ActivationMatrix::new(ds.inputs).during("entropy")?;
    let est = match a.estimator {
        EstimatorArg::Knn => Estimator::Knn { k: a.k },
        EstimatorArg::Binning => Estimator::Binning { bins: a.bins },
    };
    let width = if let Some(sigma) = a.sigma {
        WidthChoice::Fixed { sigma }
    } else if a.select_width {
        WidthChoice::Select {
            labels: labels.ok_or_else(|| CliError::Usage("--select-width needs --has-labels".into()))?,
            beta: a.beta,
            grid: None,
        }
    } else {
        WidthChoice::MedianMultiple {
            multiple: a.width_multiple.unwrap_or(DEFAULT_WIDTH_MULTIPLE),
        }
    };
    let cfg = KernelEmbeddingConfig {
        kind: match a.kernel {
            KernelArg::Gaussian => KernelKind::Gaussian,
            KernelArg::Laplacian => KernelKind::Laplacian,
        },
        width,
        max_dims: a.max_dims,
        sample_cap: a.sample_cap,
    };
    let mut estimates = Vec::new();
    if a.space != SpaceArg::Projected {
        estimates.push(in_units(entropy_original(&t, &est).during("entropy_original")?, a.bits));
    }
    if a.space != SpaceArg::Original {
        estimates.push(in_units(
            entropy_kernel_embedding(&t, &cfg, &est).during("entropy_kernel_embedding")?,
            a.bits,
        ));
    }
    let unit = if a.bits { "bits" } else { "nats" };
    if a.json {
        let mut echo = serde_json::to_value(&cfg).map_err(neurocorr::Error::from)?;
        if let Some(w) = echo.get_mut("width").and_then(Value::as_object_mut) {
            w.remove("labels");
        }
        return Ok(pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "entropy",
            "input": a.input,
            "unit": unit,
            "estimator": est,
            "kernel_embedding": echo,
            "estimates": estimates,
        })));
    }
    let mut out = String::new();
    for e in &estimates {
        match &e.diagnostics {
            None => {
                let _ = writeln!(out, "original {:.6} {unit} ({} dimensions)", e.value, e.per_dimension.len());
            }
            Some(d) => {
                let _ = writeln!(
                    out,
                    "projected {:.6} {unit} (rank {}, sigma {:.6}, NC before {:.4}, after {:.4}, mass {:.4})",
                    e.value, d.retained_rank, d.sigma, d.correlation_before, d.correlation_after, d.retained_mass
                );
                if let Some(sel) = &d.width_selection {
                    let _ = writeln!(out, "width selection (beta {}):", sel.beta);
                    let _ = writeln!(out, "  sigma alignment dim_correlation objective");
                    for c in &sel.grid {
                        let mark = if c.sigma == sel.sigma { " *" } else { "" };
                        let _ = writeln!(
                            out,
                            "  {:.6} {:.6} {:.6} {:.6}{mark}",
                            c.sigma, c.alignment, c.dim_correlation, c.objective
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}

fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn cmd_data(c: &DataCommand) -> Result<String, CliError> {
    let (manifest, output) = match c {
        DataCommand::Gaussian(a) => (manifest_for(a.n, a.d, a.variance, a.seed), &a.output),
        DataCommand::Regenerate(a) => {
            let text = fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
            let m: SyntheticManifest =
                serde_json::from_str(&text).map_err(neurocorr::Error::from).during("read manifest")?;
            (m, &a.output)
        }
    };
    let ds = manifest.regenerate().during("sample_gaussian")?;
    if let Some(dir) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    save_csv(&ds.inputs, None, output).during("save_csv")?;
    let mpath = manifest_path(output);
    let text = serde_json::to_string_pretty(&manifest).map_err(neurocorr::Error::from)?;
    fs::write(&mpath, text).map_err(|e| CliError::io(&mpath, e))?;
    Ok(format!("wrote {}\nwrote {}\n", output.display(), mpath.display()))
}

fn cmd_inspect(a: &InspectArgs) -> Result<String, CliError> {
    let s = read_snapshot(&a.snapshot).during("read_snapshot")?;
    let sizes = s.layer_sizes();
    if a.json {
        return Ok(pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "inspect",
            "epoch": s.epoch,
            "activation": s.activation,
            "layer_sizes": sizes,
            "train_accuracy": s.train_accuracy,
            "test_accuracy": s.test_accuracy,
            "train_loss": s.train_loss,
        })));
    }
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
    let notation: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    Ok(format!(
        "epoch {}\nactivation {}\nlayers {}\ntrain_accuracy {}\ntest_accuracy {}\ntrain_loss {}\n",
        s.epoch,
        s.activation,
        notation.join("-"),
        opt(s.train_accuracy),
        opt(s.test_accuracy),
        opt(s.train_loss)
    ))
}

fn finish(report: Report, out: &OutArgs) -> Result<String, CliError> {
    let dir = resolve_out_dir(out.out.as_deref()).join(&report.experiment);
    let files = report.write_to(&dir)?;
    let mut s = String::new();
    for c in &report.checks {
        let _ = writeln!(s, "[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    for f in files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    Ok(s)
}

fn cmd_experiment(c: &ExperimentCommand) -> Result<String, CliError> {
    match c {
        ExperimentCommand::Linear {
            data,
            spec,
            activation,
            epochs,
            record_every,
            lr,
            batch,
            seed,
            entropy_samples,
            out,
        } => {
            let mut cfg = LinearConfig::new(data.source(false));
            cfg.spec = spec.clone();
            cfg.activation = *activation;
            cfg.epochs = if out.paper_scale { 10_000 } else { *epochs };
            cfg.record_every = if out.paper_scale { 100 } else { *record_every };
            cfg.lr = *lr;
            cfg.batch = *batch;
            cfg.seed = *seed;
            cfg.entropy_samples = *entropy_samples;
            finish(experiments::linear_invariance(&cfg)?, out)
        }
        ExperimentCommand::Groundtruth {
            n,
            d,
            variances,
            seeds,
            epochs,
            lr,
            width_multiple,
            out,
        } => {
            let cfg = GroundTruthConfig {
                n: *n,
                d: *d,
                hidden: *d,
                variances: variances.clone(),
                seeds: if out.paper_scale { (0..5).collect() } else { seeds.clone() },
                epochs: *epochs,
                lr: *lr,
                width_multiple: *width_multiple,
                ..Default::default()
            };
            finish(experiments::ground_truth(&cfg)?, out)
        }
        ExperimentCommand::Ge {
            data,
            architectures,
            activations,
            epochs,
            record_every,
            lr,
            seeds,
            out,
        } => {
            let mut cfg = GeConfig::new(data.source(true));
            if !architectures.is_empty() {
                cfg.architectures = architectures.iter().map(|a| Architecture::parse(a)).collect();
            }
            cfg.activations = activations.clone();
            cfg.epochs = if out.paper_scale { 10_000 } else { *epochs };
            cfg.record_every = if out.paper_scale { 100 } else { *record_every };
            cfg.lr = *lr;
            cfg.seeds = if out.paper_scale { (0..5).collect() } else { seeds.clone() };
            finish(experiments::correlation_vs_generalization(&cfg)?, out)
        }
        ExperimentCommand::Epsilon {
            data,
            spec,
            activation,
            epochs,
            seeds,
            no_control,
            out,
        } => {
            let mut cfg = EpsilonConfig::new(data.source(false));
            cfg.spec = spec.clone();
            cfg.activation = *activation;
            cfg.epochs = if out.paper_scale { 10_000 } else { *epochs };
            cfg.record_every = if out.paper_scale { 100 } else { cfg.record_every };
            cfg.seeds = seeds.clone();
            cfg.control = !no_control;
            finish(experiments::epsilon(&cfg)?, out)
        }
        ExperimentCommand::SweepInit {
            fixed_m,
            n_values,
            fixed_n,
            m_values,
            seeds,
            out,
        } => {
            let cfg = SweepConfig {
                fixed_m: *fixed_m,
                n_values: n_values.clone(),
                fixed_n: *fixed_n,
                m_values: m_values.clone(),
                seeds: (0..if out.paper_scale { 100 } else { *seeds }).collect(),
                ..Default::default()
            };
            finish(experiments::sweep_init(&cfg)?, out)
        }
    }
}

/// Runs one parsed invocation and returns what it prints on stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Nc(a) => cmd_nc(a),
        Command::Wc(a) => cmd_wc(a),
        Command::Gamma(a) => cmd_gamma(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::Data(c) => cmd_data(c),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Experiment(c) => cmd_experiment(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn gamma_fully_connected_parses() {
        let cli = Cli::try_parse_from(["neurocorr", "gamma", "--fully-connected", "784", "30", "--gamma", "1"]).unwrap();
        assert_eq!(run(&cli).unwrap(), "Gamma 784\nneurons 30\n");
    }

    #[test]
    fn gamma_needs_exactly_one_pattern() {
        assert!(Cli::try_parse_from(["neurocorr", "gamma"]).is_err());
        assert!(
            Cli::try_parse_from(["neurocorr", "gamma", "--fully-connected", "4", "2", "--conv1d", "8", "3", "1"])
                .is_err()
        );
    }

    #[test]
    fn select_width_requires_labels() {
        assert!(Cli::try_parse_from(["neurocorr", "entropy", "--input", "x.csv", "--select-width"]).is_err());
    }
}
