use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use kong_core::classifier::{cross_validate, train, CvOptions, LinearModel, TrainOptions, DEFAULT_EPOCHS};
use kong_core::export::{features_text, gram_text, vocabulary_text, write_output, Format};
use kong_core::generate::{random_dataset, RandomGraphSpec};
use kong_core::oracle::{oracle_check, OracleOptions};
use kong_core::sketch::DEFAULT_ROWS;
use kong_core::stream::{FileEvents, Ordering, StreamState};
use kong_core::{
    feature_maps, gram_from_maps, parse_benchmark_dataset, parse_temporal_edge_list, FeatureConfig, FeatureMatrix,
    GraphDataset, KernelKind, Mode, NodeTable, ParseOptions, TraversalKind,
};

const DEFAULT_SKETCH_SIZE: usize = 1024;

/// Graph kernels for ordered neighborhoods: explicit and sketched feature
/// maps, Gram matrices, streaming and linear SVM evaluation.
#[derive(Debug, Parser)]
#[command(name = "kong", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one feature vector per graph.
    Features {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, value_enum, default_value = "sparse")]
        format: FormatArg,
        /// Also write the k-gram behind every exact column.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the kernel matrix as CSV.
    Gram {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare incremental summaries with explicit strings.
    OracleCheck {
        #[command(flatten)]
        input: InputArgs,
        /// Check this many seeded random graphs instead of a dataset.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// k values to check.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        ks: Vec<usize>,
        /// Depths to check.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        hs: Vec<usize>,
        #[arg(long, hide = true)]
        corrupt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate a linear SVM on the feature maps.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 30)]
        repetitions: usize,
        /// Candidate SVM regularization values.
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        c_grid: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        /// Fit a final model on all graphs and save it.
        #[arg(long)]
        save_model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sketched feature maps from a temporal edge file, one pass per iteration.
    Stream {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        node_labels: PathBuf,
        #[arg(long)]
        graph_classes: Option<PathBuf>,
        /// Number of passes, i.e. the traversal depth h.
        #[arg(long)]
        passes: Option<usize>,
        #[command(flatten)]
        features: FeatureArgs,
        /// Take neighbor order from arrival order (single pass, h <= 1).
        #[arg(long)]
        arrival: bool,
        /// Save the state here after every pass.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume from a saved state.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sparse")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Benchmark dataset directory (`<NAME>_A.txt`, ...).
    #[arg(long, conflicts_with = "edges")]
    dataset: Option<PathBuf>,
    /// Temporal edge list `graph_id,src,dst,order_key`.
    #[arg(long, requires = "node_labels")]
    edges: Option<PathBuf>,
    /// Node labels `graph_id,node,label`.
    #[arg(long)]
    node_labels: Option<PathBuf>,
    /// Graph classes `graph_id,class`.
    #[arg(long)]
    graph_classes: Option<PathBuf>,
    /// Add the reverse of every edge.
    #[arg(long)]
    undirected: bool,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// k-gram length [default: 2]
    #[arg(long)]
    k: Option<usize>,
    /// Traversal depth [default: 2]
    #[arg(long)]
    h: Option<usize>,
    /// Degree of the base kernel [default: 1]
    #[arg(long)]
    p: Option<u32>,
    /// Offset of the polynomial kernel [default: 0]
    #[arg(long)]
    c: Option<f64>,
    /// Base kernel [default: poly]
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Node string generation [default: bfs]
    #[arg(long, value_enum)]
    traversal: Option<TraversalArg>,
    /// One round of order-aware WL relabeling first.
    #[arg(long)]
    relabel: bool,
    /// Kernel shorthand such as poly-rlb-1 or cosine-2.
    #[arg(long)]
    preset: Option<String>,
    /// Exact or sketched feature maps [default: exact, or sketched when --sketch-size is given]
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Sketch table width, a power of two.
    #[arg(long)]
    sketch_size: Option<usize>,
    /// Sketch rows.
    #[arg(long, default_value_t = DEFAULT_ROWS)]
    rows: usize,
    /// Seed for sketches, neighborhood shuffling and cross-validation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shuffle every neighborhood before the traversal.
    #[arg(long)]
    shuffle: bool,
    /// Normalize sketched cosine maps with exact node norms.
    #[arg(long)]
    exact_norms: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Poly,
    Cosine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraversalArg {
    Bfs,
    Wl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Sparse,
    Dense,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Sparse => Format::Sparse,
            FormatArg::Dense => Format::Dense,
        }
    }
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const ORACLE: u8 = 3;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow!(message.into()),
    }
}

trait CoreContext<T> {
    fn during(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T> CoreContext<T> for kong_core::Result<T> {
    fn during(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: if e.is_data_error() { DATA } else { USAGE },
            error: anyhow::Error::new(e).context(what()),
        })
    }
}

impl FeatureArgs {
    fn config(&self, passes: Option<usize>) -> Result<FeatureConfig, Failure> {
        let mut cfg = FeatureConfig::default();
        if let Some(preset) = &self.preset {
            cfg.apply_preset(preset).during(|| "reading --preset".into())?;
        }
        if let Some(kernel) = self.kernel {
            cfg.kernel = match kernel {
                KernelArg::Poly => KernelKind::Poly,
                KernelArg::Cosine => KernelKind::Cosine,
            };
        }
        if cfg.kernel == KernelKind::Cosine && self.c.is_some_and(|c| c != 0.0) {
            return Err(usage("--c applies to the polynomial kernel only; drop it for cosine"));
        }
        if let Some(traversal) = self.traversal {
            cfg.traversal = match traversal {
                TraversalArg::Bfs => TraversalKind::Bfs,
                TraversalArg::Wl => TraversalKind::Wl,
            };
        }
        cfg.k = self.k.unwrap_or(cfg.k);
        cfg.h = match (self.h, passes) {
            (Some(h), Some(p)) if h != p => return Err(usage(format!("--h {h} contradicts --passes {p}"))),
            (h, p) => h.or(p).unwrap_or(cfg.h),
        };
        cfg.p = self.p.unwrap_or(cfg.p);
        cfg.c = self.c.unwrap_or(cfg.c);
        cfg.relabel |= self.relabel;
        cfg.exact_norms = self.exact_norms;
        let sketched = match self.mode {
            Some(ModeArg::Sketched) => true,
            Some(ModeArg::Exact) if self.sketch_size.is_some() => {
                return Err(usage("--sketch-size needs --mode sketched"));
            }
            Some(ModeArg::Exact) => false,
            None => self.sketch_size.is_some(),
        };
        if sketched {
            cfg.mode = Mode::Sketched {
                width: self.sketch_size.unwrap_or(DEFAULT_SKETCH_SIZE),
                rows: self.rows,
                seed: self.seed,
            };
        } else if self.exact_norms {
            return Err(usage("--exact-norms applies to sketched mode only"));
        }
        cfg.validate().during(|| "checking the feature options".into())?;
        Ok(cfg)
    }
}

fn load(input: &InputArgs, shuffle_seed: Option<u64>) -> Result<GraphDataset, Failure> {
    let mut dataset = if let Some(dir) = &input.dataset {
        let options = ParseOptions {
            undirected: input.undirected,
        };
        parse_benchmark_dataset(dir, options).during(|| format!("loading {}", dir.display()))?
    } else if let Some(edges) = &input.edges {
        let labels = input
            .node_labels
            .as_ref()
            .ok_or_else(|| usage("--edges needs --node-labels"))?;
        let ds = parse_temporal_edge_list(edges, labels, input.graph_classes.as_deref())
            .during(|| format!("loading {}", edges.display()))?;
        if input.undirected {
            ds.with_reverse_edges()
        } else {
            ds
        }
    } else {
        return Err(usage(
            "give a dataset with --dataset DIR or --edges FILE --node-labels FILE",
        ));
    };
    info!(
        "loaded {} graphs, {} edges, {} labels",
        dataset.len(),
        dataset.total_edges(),
        dataset.alphabet.len()
    );
    if let Some(seed) = shuffle_seed {
        dataset = dataset.shuffle_neighborhoods(seed);
    }
    Ok(dataset)
}

fn write(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    write_output(out, text).during(|| "writing output".into())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Features {
            input,
            features,
            format,
            vocab,
            out,
        } => {
            let cfg = features.config(None)?;
            let dataset = load(&input, features.shuffle_seed())?;
            let maps = feature_maps(&dataset, &cfg).during(|| "computing feature maps".into())?;
            let matrix = FeatureMatrix::from_maps(&maps).during(|| "collecting features".into())?;
            info!("feature dimension {}", matrix.dim);
            let text = features_text(&matrix, &dataset.classes, format.into()).during(|| "formatting".into())?;
            write(out.as_deref(), &text)?;
            if let Some(path) = vocab {
                write(Some(&path), &vocabulary_text(&matrix, &dataset.alphabet))?;
            }
        }
        Command::Gram { input, features, out } => {
            let cfg = features.config(None)?;
            let dataset = load(&input, features.shuffle_seed())?;
            let maps = feature_maps(&dataset, &cfg).during(|| "computing feature maps".into())?;
            let gram = gram_from_maps(&maps).during(|| "computing the Gram matrix".into())?;
            write(out.as_deref(), &gram_text(&gram))?;
        }
        Command::OracleCheck {
            input,
            random,
            seed,
            ks,
            hs,
            corrupt,
            out,
        } => {
            let dataset = match random {
                Some(n) => {
                    random_dataset(seed, n, &RandomGraphSpec::default()).during(|| "generating graphs".into())?
                }
                None => load(&input, None)?,
            };
            if ks.contains(&0) {
                return Err(usage("--ks values must be at least 1"));
            }
            let options = OracleOptions {
                ks,
                hs,
                corrupt,
                ..OracleOptions::default()
            };
            let report = oracle_check(&dataset, &options).during(|| "running the oracle".into())?;
            write(out.as_deref(), &format!("{report}\n"))?;
            if !report.passed() {
                return Err(Failure {
                    code: ORACLE,
                    error: anyhow!("summary pipeline disagrees with explicit strings"),
                });
            }
        }
        Command::Train {
            input,
            features,
            folds,
            repetitions,
            c_grid,
            epochs,
            save_model,
            out,
        } => {
            let cfg = features.config(None)?;
            let dataset = load(&input, features.shuffle_seed())?;
            let maps = feature_maps(&dataset, &cfg).during(|| "computing feature maps".into())?;
            let matrix = FeatureMatrix::from_maps(&maps).during(|| "collecting features".into())?;
            let options = CvOptions {
                folds,
                repetitions,
                c_grid,
                epochs,
                seed: features.seed,
                ..CvOptions::default()
            };
            let report = cross_validate(&matrix.rows, &dataset.classes, matrix.dim, &options)
                .during(|| "cross-validating".into())?;
            let mut text = format!(
                "accuracy: {:.2} ± {:.2} (mean fold std {:.2}) over {} repetitions of {}-fold cross-validation\n",
                100.0 * report.mean,
                100.0 * report.std,
                100.0 * report.mean_fold_std,
                repetitions,
                folds
            );
            if let Some(path) = save_model {
                let c = most_common(&report.chosen_c);
                let model = train(
                    &matrix.rows,
                    &dataset.classes,
                    matrix.dim,
                    &TrainOptions {
                        c,
                        epochs,
                        seed: features.seed,
                        ..TrainOptions::default()
                    },
                )
                .during(|| "training the final model".into())?;
                model.save(&path).during(|| "saving the model".into())?;
                LinearModel::load(&path).during(|| "re-reading the model".into())?;
                text.push_str(&format!("model (C = {c}) saved to {}\n", path.display()));
            }
            write(out.as_deref(), &text)?;
        }
        Command::Stream {
            edges,
            node_labels,
            graph_classes,
            passes,
            features,
            arrival,
            checkpoint,
            resume,
            format,
            out,
        } => {
            let cfg = features.config(passes)?;
            if !matches!(cfg.mode, Mode::Sketched { .. }) {
                return Err(usage(
                    "stream computes sketched maps; add --sketch-size or --mode sketched",
                ));
            }
            if features.shuffle {
                return Err(usage("--shuffle is not available for streams"));
            }
            let ordering = if arrival {
                if cfg.h > 1 || cfg.relabel {
                    return Err(usage(
                        "--arrival reads the stream once; it needs h <= 1 and no relabeling",
                    ));
                }
                Ordering::Arrival
            } else {
                Ordering::Keyed
            };
            let table = NodeTable::load(&node_labels, graph_classes.as_deref())
                .during(|| format!("loading {}", node_labels.display()))?;
            let mut state =
                StreamState::from_table(&table, &cfg, ordering).during(|| "setting up the stream".into())?;
            let mut source = FileEvents::new(&edges, &table);
            if let Some(path) = &resume {
                state
                    .load_checkpoint(path)
                    .during(|| format!("resuming from {}", path.display()))?;
                info!("resumed after {} passes", state.passes_done());
            } else if cfg.relabel {
                state
                    .relabel_pass(&mut source, Some(&table.alphabet))
                    .during(|| "relabeling pass".into())?;
            }
            while state.passes_done() < cfg.h {
                let next = state.passes_done() + 1;
                state.pass(&mut source).during(|| format!("pass {next}"))?;
                info!("pass {} done", state.passes_done());
                if let Some(path) = &checkpoint {
                    state
                        .save_checkpoint(path)
                        .during(|| format!("saving {}", path.display()))?;
                }
            }
            let stats = state.stats().clone();
            info!(
                "{} events, {} k-gram feeds, peak {} counters",
                stats.events, stats.kgram_feeds, stats.peak_counters
            );
            let maps = state.finalize().during(|| "finalizing".into())?;
            let matrix = FeatureMatrix::from_maps(&maps).during(|| "collecting features".into())?;
            let text = features_text(&matrix, &table.classes, format.into()).during(|| "formatting".into())?;
            write(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn most_common(values: &[f64]) -> f64 {
    let mut best = (0, values.first().copied().unwrap_or(1.0));
    for &v in values {
        let count = values.iter().filter(|&&w| w == v).count();
        if count > best.0 || (count == best.0 && v < best.1) {
            best = (count, v);
        }
    }
    best.1
}

impl FeatureArgs {
    fn shuffle_seed(&self) -> Option<u64> {
        self.shuffle.then_some(self.seed)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
