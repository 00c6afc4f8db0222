//! The five subcommands and their shared plumbing.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use senns_core::data::{export_features, load_csv_reader, LabeledDataset};
use senns_core::error::SennsError;
use senns_core::eval::{knn_accuracy, knn_loo_accuracy, scatter_ratio, sparsity_metrics, EvalReport};
use senns_core::network::{default_transfers, Network};
use senns_core::objective::objective_value;
use senns_core::pairs::{euclidean, PairList};
use senns_core::trainer::{
    finite_diff_grad, grad_total, train_with, write_telemetry_csv, TrainOptions,
};

use crate::config::{
    parse_transfers, resolve_hyperparams, DataSpec, FileConfig, PairModeChoice,
};
use crate::{EvalArgs, ExtractArgs, GradcheckArgs, PairsArgs, TrainArgs};

/// Errors with an exit-code classification: 2 usage, 3 data, 4 numeric.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(SennsError),
    Numeric(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(err) => write!(f, "{err}"),
            CliError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<SennsError> for CliError {
    fn from(err: SennsError) -> Self {
        match err {
            SennsError::InvalidHyperparams(_) | SennsError::InvalidArchitecture(_) => {
                CliError::Usage(err.to_string())
            }
            SennsError::NonFinite { .. } => CliError::Numeric(err.to_string()),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

/// Writes through a temp file in the target directory and renames on
/// success, so failed runs leave no partial output behind.
fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut std::fs::File) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Core(SennsError::Io(e)))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut()
        .flush()
        .map_err(|e| CliError::Core(SennsError::Io(e)))?;
    tmp.persist(path)
        .map_err(|e| CliError::Core(SennsError::Io(e.error)))?;
    Ok(())
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn build_pairs(
    dataset: &LabeledDataset,
    mode: PairModeChoice,
    k: usize,
    exclude_self_pairs: bool,
) -> Result<PairList, CliError> {
    Ok(match mode {
        PairModeChoice::Full => PairList::full_with_options(dataset, exclude_self_pairs),
        PairModeChoice::Heuristic => PairList::heuristic(dataset, k, euclidean)?,
    })
}

pub fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let hp = resolve_hyperparams(
        &file,
        args.lambda1,
        args.lambda2,
        args.lambda3,
        args.lambda4,
        args.alpha,
        args.tol,
        args.max_iters,
    )?;

    let spec = DataSpec::resolve(&args.data, file.data.as_ref())?;
    let standardize = args.data.standardize || file.standardize.unwrap_or(false);
    let dataset = spec.load(seed, standardize)?;

    let non_input = args
        .layers
        .clone()
        .or_else(|| file.layers.clone())
        .ok_or_else(|| CliError::Usage("no architecture given (--layers or layers)".to_string()))?;
    if non_input.is_empty() {
        return Err(CliError::Usage("--layers needs at least one size".to_string()));
    }
    let mut layer_sizes = vec![dataset.dim()];
    layer_sizes.extend_from_slice(&non_input);
    let transfer = match args.transfer.clone().or_else(|| file.transfer.clone()) {
        Some(names) => parse_transfers(&names)?,
        None => default_transfers(non_input.len()),
    };

    let mode: PairModeChoice = args
        .pair_mode
        .as_deref()
        .or(file.pair_mode.as_deref())
        .unwrap_or("full")
        .parse()?;
    let k = args.k.or(file.k).unwrap_or(3);
    let exclude_self = args.exclude_self_pairs || file.exclude_self_pairs.unwrap_or(false);
    let pairs = build_pairs(&dataset, mode, k, exclude_self)?;

    configure_threads(args.threads.or(file.threads));
    let opts = TrainOptions {
        reproducible: args.reproducible || file.reproducible.unwrap_or(true),
        halve_on_increase: args.halve_on_increase || file.halve_on_increase.unwrap_or(false),
    };

    let net = Network::init_random(&layer_sizes, &transfer, seed)?;
    let report = train_with(net, &dataset, &pairs, &hp, seed, &opts)?;

    let out = file.output.unwrap_or_default();
    let model_path = args
        .out_model
        .clone()
        .or(out.model)
        .unwrap_or_else(|| PathBuf::from("model.senns"));
    let telemetry_path = args
        .out_telemetry
        .clone()
        .or(out.telemetry)
        .unwrap_or_else(|| PathBuf::from("telemetry.csv"));
    write_atomic(&model_path, |w| {
        report
            .network
            .write_model(w)
            .map_err(|e| CliError::Core(SennsError::Io(e)))
    })?;
    write_atomic(&telemetry_path, |w| {
        write_telemetry_csv(&report, w).map_err(|e| CliError::Core(SennsError::Io(e)))
    })?;

    let mut summary = Vec::new();
    let first = &report.history[0];
    let last = report.history.last().unwrap();
    writeln!(
        summary,
        "dataset: m={} d={} classes={}",
        dataset.len(),
        dataset.dim(),
        dataset.num_classes()
    )
    .ok();
    writeln!(
        summary,
        "pairs: {} ({} pairs, m_c={}, m_d={})",
        match mode {
            PairModeChoice::Full => "full",
            PairModeChoice::Heuristic => "heuristic",
        },
        pairs.len(),
        pairs.m_c,
        pairs.m_d
    )
    .ok();
    writeln!(
        summary,
        "network: {} ({})",
        layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        transfer
            .iter()
            .map(|t| t.name())
            .collect::<Vec<_>>()
            .join(" ")
    )
    .ok();
    writeln!(
        summary,
        "initial J={} (J1={} J2={} J3={})",
        first.j_total, first.j1, first.j2, first.j3
    )
    .ok();
    writeln!(
        summary,
        "final   J={} (J1={} J2={} J3={})",
        last.j_total, last.j1, last.j2, last.j3
    )
    .ok();
    writeln!(
        summary,
        "iterations={} converged={} seed={}",
        report.iterations_run, report.converged, report.seed
    )
    .ok();
    writeln!(summary, "model={}", model_path.display()).ok();
    writeln!(summary, "telemetry={}", telemetry_path.display()).ok();
    print!("{}", String::from_utf8_lossy(&summary));
    if let Some(path) = args.out_summary.or(out.summary) {
        write_atomic(&path, |w| {
            w.write_all(&summary)
                .map_err(|e| CliError::Core(SennsError::Io(e)))
        })?;
    }
    Ok(())
}

pub fn run_extract(args: ExtractArgs) -> Result<(), CliError> {
    let net = Network::load(&args.model)?;
    let spec = DataSpec::resolve(&args.data, None)?;
    let dataset = spec.load(args.seed, args.data.standardize)?;
    if dataset.dim() != net.input_dim() {
        return Err(CliError::Core(SennsError::DimensionMismatch {
            expected: net.input_dim(),
            actual: dataset.dim(),
            context: "model input vs dataset dimension",
        }));
    }
    write_atomic(&args.out, |w| {
        export_features(&net, &dataset, w).map_err(CliError::from)
    })?;
    println!(
        "wrote {} feature rows ({} features each) to {}",
        dataset.len(),
        net.output_dim(),
        args.out.display()
    );
    Ok(())
}

/// Loads a feature CSV produced by `extract`: all columns numeric except
/// the trailing label column. Labels come back as their original
/// tokens so separate files can share one vocabulary.
fn load_features(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Core(SennsError::Io(e)))?;
    let width = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .ok_or(CliError::Core(SennsError::EmptyDataset))?;
    let dataset = load_csv_reader(text.as_bytes(), width - 1)?;
    let names: Vec<String> = match dataset.class_names() {
        Some(names) => dataset
            .labels()
            .iter()
            .map(|&id| names[id].clone())
            .collect(),
        None => dataset.labels().iter().map(|id| id.to_string()).collect(),
    };
    Ok((dataset.inputs().to_vec(), names))
}

/// Maps label tokens to dense ids through a shared vocabulary.
fn densify(tokens: &[String], vocabulary: &mut Vec<String>) -> Vec<usize> {
    tokens
        .iter()
        .map(|token| {
            match vocabulary.iter().position(|v| v == token) {
                Some(id) => id,
                None => {
                    vocabulary.push(token.clone());
                    vocabulary.len() - 1
                }
            }
        })
        .collect()
}

pub fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let (features, label_tokens) = load_features(&args.features)?;
    let mut vocabulary = Vec::new();
    let labels = densify(&label_tokens, &mut vocabulary);
    let knn = match &args.test {
        Some(test_path) => {
            let (test_features, test_tokens) = load_features(test_path)?;
            let test_labels = densify(&test_tokens, &mut vocabulary);
            knn_accuracy(&features, &labels, &test_features, &test_labels, args.k)?
        }
        None => knn_loo_accuracy(&features, &labels, args.k)?,
    };
    let ratio = scatter_ratio(&features, &labels)?;
    let (mean_l1, near_zero_fraction) = sparsity_metrics(&features, args.epsilon);
    let report = EvalReport {
        knn_accuracy: knn,
        scatter_ratio: ratio,
        mean_l1,
        near_zero_fraction,
    };
    let mut out = Vec::new();
    report
        .write_text(&mut out)
        .map_err(|e| CliError::Core(SennsError::Io(e)))?;
    print!("{}", String::from_utf8_lossy(&out));
    if let Some(path) = args.csv {
        write_atomic(&path, |w| {
            report
                .write_csv(w)
                .map_err(|e| CliError::Core(SennsError::Io(e)))
        })?;
    }
    Ok(())
}

pub fn run_pairs(args: PairsArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let spec = DataSpec::resolve(&args.data, file.data.as_ref())?;
    let standardize = args.data.standardize || file.standardize.unwrap_or(false);
    let dataset = spec.load(seed, standardize)?;
    let mode: PairModeChoice = args
        .pair_mode
        .as_deref()
        .or(file.pair_mode.as_deref())
        .unwrap_or("full")
        .parse()?;
    let k = args.k.or(file.k).unwrap_or(3);
    let exclude_self = args.exclude_self_pairs || file.exclude_self_pairs.unwrap_or(false);
    let pairs = build_pairs(&dataset, mode, k, exclude_self)?;
    match &args.out {
        Some(path) => write_atomic(path, |w| {
            pairs
                .write_csv(w)
                .map_err(|e| CliError::Core(SennsError::Io(e)))
        })?,
        None => {
            let stdout = std::io::stdout();
            match pairs.write_csv(&mut stdout.lock()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other.map_err(|e| CliError::Core(SennsError::Io(e)))?,
            }
        }
    }
    Ok(())
}

/// Gradient-check threshold: the run fails if the worst per-coordinate
/// relative error exceeds this.
const GRADCHECK_THRESHOLD: f64 = 1e-4;

pub fn run_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let hp = resolve_hyperparams(
        &file,
        args.lambda1,
        args.lambda2,
        args.lambda3,
        args.lambda4,
        None,
        None,
        None,
    )?;
    let non_input = args
        .layers
        .clone()
        .or_else(|| file.layers.clone())
        .unwrap_or_else(|| vec![3, 2]);

    // Random small instance from the seed; resample the network until
    // every output is clear of the sparsity kink so central differences
    // are trustworthy.
    let dataset = senns_core::data::make_gaussians(
        3,
        &[vec![0.0, 0.0], vec![2.0, 1.5]],
        0.8,
        seed,
    )?;
    let mut layer_sizes = vec![dataset.dim()];
    layer_sizes.extend_from_slice(&non_input);
    let transfer = default_transfers(non_input.len());
    let mut net_seed = seed;
    let net = loop {
        let candidate = Network::init_random(&layer_sizes, &transfer, net_seed)?;
        let min_abs = dataset
            .inputs()
            .iter()
            .map(|x| {
                candidate
                    .forward(x)
                    .map(|t| {
                        t.output_activations()
                            .iter()
                            .map(|a| a.abs())
                            .fold(f64::INFINITY, f64::min)
                    })
                    .unwrap_or(0.0)
            })
            .fold(f64::INFINITY, f64::min);
        if min_abs > 1e-3 {
            break candidate;
        }
        net_seed = net_seed.wrapping_add(1);
    };
    let pairs = PairList::full(&dataset);

    let mut analytic = grad_total(&net, &dataset, &pairs, &hp)?;
    if args.sabotage_sign {
        analytic.negate();
    }
    let numeric = finite_diff_grad(&net, &dataset, &pairs, &hp, args.h)?;
    let (err, coord) = analytic.max_relative_error(&numeric, &net);
    let value = objective_value(&net, &dataset, &pairs, &hp)?;
    println!(
        "instance: m={} net={} J={}",
        dataset.len(),
        layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        value.j_total
    );
    println!("max relative error {err:e} at {coord} (h={})", args.h);
    if err <= GRADCHECK_THRESHOLD {
        println!("gradcheck: PASS (<= {GRADCHECK_THRESHOLD:e})");
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradcheck: FAIL, relative error {err:e} at {coord} exceeds {GRADCHECK_THRESHOLD:e}"
        )))
    }
}

