use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seedpure::config::ExperimentConfig;
use seedpure::dataset::{extract_paths, parse_tap, scan_dir, ExtractRequest};
use seedpure::formats::model_file::{load_model, save_model};
use seedpure::formats::spft::{load_features, save_features};
use seedpure::formats::spwt::{load_weights, save_weights};
use seedpure::formats::{model_file, ppm, spft, spwt};
use seedpure::grid::run_grid;
use seedpure::report::{render_csv, render_markdown};
use seedpure::synth::{default_classes, generate, load_spec};
use seedpure::{Error, Result};
use seedpure_core::classifiers::{fit, MaxFeatures};
use seedpure_core::{accuracy, Algorithm, ConfusionCounts, Geometry, Hyperparameters, ModelKind, Vectorize};

#[derive(Parser)]
#[command(name = "seedpure", version, about = "Seed purity identification from CNN block features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write randomly initialised network weights to an SPWT file.
    GenWeights {
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input size as HEIGHTxWIDTH.
        #[arg(long, default_value = "75x170", value_parser = parse_geometry)]
        geometry: Geometry,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic two-variety PPM dataset.
    GenSynth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        per_class: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file of `[[class]]` entries (name, color, texture_frequency, noise_std).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 75)]
        height: usize,
        #[arg(long, default_value_t = 170)]
        width: usize,
    },
    /// Extract block features from image directories into an SPFT file.
    Extract(ExtractArgs),
    /// Fit a classifier on an SPFT file.
    Train(TrainArgs),
    /// Evaluate a saved classifier on an SPFT file.
    Eval {
        #[arg(long)]
        model_in: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Run the experiment grid described by a TOML config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Describe a weights, features, model or image file, or a network.
    Inspect {
        #[arg(required_unless_present = "model", conflicts_with = "model")]
        file: Option<PathBuf>,
        /// Print the blocks and tap shapes of a network instead.
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
        #[arg(long, default_value = "75x170", value_parser = parse_geometry)]
        geometry: Geometry,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long)]
    weights: PathBuf,
    /// Tap name, e.g. `block3` or `vgg.block3`.
    #[arg(long)]
    tap: String,
    /// Image directory; repeat for several varieties.
    #[arg(long = "input-dir", required = true)]
    input_dirs: Vec<PathBuf>,
    /// The input directory (path or final component) whose images are labelled 1.
    #[arg(long)]
    positive: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    batch_size: u32,
    #[arg(long, value_enum, default_value_t = Pooling::Flatten)]
    pooling: Pooling,
    #[arg(long, default_value = "75x170", value_parser = parse_geometry)]
    geometry: Geometry,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pooling {
    Flatten,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum StandardizeFlag {
    Auto,
    True,
    False,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = StandardizeFlag::Auto)]
    standardize: StandardizeFlag,
    /// Neighbours for knn.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Trees for rf and et.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n_trees: Option<u64>,
    /// Candidate features per split: all, sqrt or a count.
    #[arg(long, value_parser = parse_max_features)]
    max_features: Option<MaxFeatures>,
    /// Grow every rf tree on the full training set.
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iters: Option<u64>,
    /// SVM penalty.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: Option<u64>,
    /// Stopping tolerance for lr and svm.
    #[arg(long)]
    tol: Option<f64>,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::from_str(s).map_err(|e| e.to_string())
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::from_str(s).map_err(|e| e.to_string())
}

fn parse_geometry(s: &str) -> std::result::Result<Geometry, String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HEIGHTxWIDTH, e.g. 75x170")?;
    let dim = |v: &str| v.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or(format!("invalid dimension `{v}`"));
    Ok(Geometry::new(3, dim(h)?, dim(w)?))
}

fn parse_max_features(s: &str) -> std::result::Result<MaxFeatures, String> {
    match s {
        "all" => Ok(MaxFeatures::All),
        "sqrt" => Ok(MaxFeatures::Sqrt),
        n => match n.parse::<usize>() {
            Ok(k) if k > 0 => Ok(MaxFeatures::Count(k)),
            _ => Err("expected all, sqrt or a positive count".into()),
        },
    }
}

fn positive_f64(flag: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Usage(format!("--{flag} must be a positive number"))),
        _ => Ok(v),
    }
}

fn hyperparameters(args: &TrainArgs) -> Result<Hyperparameters> {
    let mut hp = Hyperparameters { knn_k: args.k.map(|k| k as usize), ..Hyperparameters::default() };
    if let Some(n) = args.n_trees {
        hp.forest.n_trees = n as usize;
        hp.extra_trees.n_trees = n as usize;
    }
    if let Some(m) = args.max_features {
        hp.tree.max_features = m;
        hp.forest.max_features = m;
        hp.extra_trees.max_features = m;
    }
    hp.forest.bootstrap = !args.no_bootstrap;
    if let Some(l) = args.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Usage("--lambda must be finite and non-negative".into()));
        }
        hp.lr.lambda = l;
    }
    if let Some(v) = positive_f64("learning-rate", args.learning_rate)? {
        hp.lr.learning_rate = v;
    }
    if let Some(v) = args.max_iters {
        hp.lr.max_iters = v as usize;
    }
    if let Some(v) = positive_f64("c", args.c)? {
        hp.svm.c = v;
    }
    if let Some(v) = args.max_epochs {
        hp.svm.max_epochs = v as usize;
    }
    if let Some(v) = positive_f64("tol", args.tol)? {
        hp.lr.tol = v;
        hp.svm.tol = v;
    }
    Ok(hp)
}

fn extract(args: ExtractArgs) -> Result<()> {
    let tap = parse_tap(&args.tap, Some(args.model)).map_err(|e| Error::Usage(e.to_string()))?;
    let positive = args
        .input_dirs
        .iter()
        .position(|d| d.as_os_str() == args.positive.as_str() || d.file_name().is_some_and(|n| n == args.positive.as_str()))
        .ok_or_else(|| Error::Usage(format!("--positive `{}` matches none of the input directories", args.positive)))?;
    let graph = args.model.build(args.geometry)?;
    let weights = load_weights(&args.weights)?;

    let mut paths = Vec::new();
    let mut labels = Vec::new();
    for (i, dir) in args.input_dirs.iter().enumerate() {
        let files = scan_dir(dir)?;
        labels.extend(std::iter::repeat_n(u8::from(i == positive), files.len()));
        paths.extend(files);
    }
    let req = ExtractRequest {
        graph: &graph,
        weights: &weights,
        taps: &[tap],
        batch_size: args.batch_size as usize,
        mode: match args.pooling {
            Pooling::Flatten => Vectorize::Flatten,
            Pooling::Mean => Vectorize::SpatialMean,
        },
        normalization: None,
    };
    let features = extract_paths(&req, &paths, &labels)?.pop().expect("one tap requested");
    save_features(&features, &args.out)?;
    println!(
        "wrote {}: {} samples x {} features ({} positive)",
        args.out.display(),
        features.n_samples(),
        features.n_features(),
        features.count_label(1)
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let hp = hyperparameters(&args)?;
    let features = load_features(&args.features)?;
    let standardize = match args.standardize {
        StandardizeFlag::Auto => args.algo.standardize_by_default(),
        StandardizeFlag::True => true,
        StandardizeFlag::False => false,
    };
    let clf = fit(args.algo, &features, &hp, args.seed, standardize)?;
    save_model(&clf, &args.model_out)?;
    println!(
        "trained {} on {} samples x {} features -> {}",
        args.algo.label(),
        features.n_samples(),
        features.n_features(),
        args.model_out.display()
    );
    Ok(())
}

fn eval(model_in: &Path, features: &Path) -> Result<()> {
    let clf = load_model(model_in)?;
    let m = load_features(features)?;
    let predicted = clf.predict(&m)?;
    let c = ConfusionCounts::from_predictions(m.labels(), &predicted)?;
    let acc = accuracy(&c)?;
    println!("accuracy: {acc} ({}/{})", c.correct(), c.total());
    println!("tp={} tn={} fp={} fn={}", c.true_pos, c.true_neg, c.false_pos, c.false_neg);
    Ok(())
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn experiment(config_path: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let mut out = run_grid(&config)?;
    if !config.output.timings {
        for r in &mut out.report.records {
            r.train_time = None;
            r.eval_time = None;
        }
    }
    let report = &out.report;
    if let Some(path) = &config.output.csv {
        write_output(path, &render_csv(report)?)?;
    }
    if let Some(path) = &config.output.markdown {
        write_output(path, &render_markdown(report)?)?;
    }
    let failed = report.failures();
    println!("{} cells, {} failed; config digest {}", report.records.len(), failed, config.digest());
    for r in report.records.iter().filter(|r| r.outcome.is_err()) {
        eprintln!("failed: {} {} {}: {}", r.variety, r.tap, r.algorithm, r.outcome.as_ref().unwrap_err());
    }
    if failed == report.records.len() {
        return Err(Error::AllCellsFailed(failed));
    }
    Ok(())
}

/// Writes to stdout, treating a closed pipe (`| head`) as success.
fn emit(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn inspect_file(path: &Path) -> Result<String> {
    let mut out = String::new();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(spwt::MAGIC.as_bytes()) {
        let store = spwt::decode(&bytes).map_err(|e| Error::format(path, e))?;
        let _ = writeln!(out, "SPWT weights: {} tensors, {} values", store.len(), store.num_values());
        for (name, t) in store.iter() {
            let _ = writeln!(out, "  {name} {:?}", t.shape());
        }
    } else if bytes.starts_with(spft::MAGIC.as_bytes()) {
        let m = spft::decode(&bytes).map_err(|e| Error::format(path, e))?;
        let _ = writeln!(
            out,
            "SPFT features: {} samples x {} features, {} positive, {} negative",
            m.n_samples(),
            m.n_features(),
            m.count_label(1),
            m.count_label(0)
        );
    } else if bytes.starts_with(b"P6") {
        let img = ppm::decode(&bytes).map_err(|e| Error::format(path, e))?;
        let [r, g, b] = img.channel_means();
        let _ = writeln!(out, "PPM image: {}x{} (HxW), channel means {r:.1} {g:.1} {b:.1}", img.height(), img.width());
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::ModelFile { path: path.into(), message: "not an SPWT, SPFT, PPM or model file".into() })?;
        let clf = model_file::decode(&text).map_err(|message| Error::ModelFile { path: path.into(), message })?;
        let _ = writeln!(
            out,
            "model: {} over {} features, seed {}, standardized: {}",
            clf.algorithm().label(),
            clf.n_features,
            clf.seed,
            clf.standardizer.is_some()
        );
    }
    Ok(out)
}

fn inspect_model(model: ModelKind, geometry: Geometry) -> Result<String> {
    let mut out = String::new();
    let graph = model.build(geometry)?;
    let params = graph.parameters();
    let values: usize = params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    let _ = writeln!(
        out,
        "{} at {}x{}x{}: {} blocks, {} parameter tensors, {} values",
        model.label(),
        geometry.channels,
        geometry.height,
        geometry.width,
        graph.blocks.len(),
        params.len(),
        values
    );
    for tap in graph.taps() {
        let [c, h, w] = graph.tap_shape(tap)?;
        let _ = writeln!(out, "  {tap}: {c}x{h}x{w} = {} features", c * h * w);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenWeights { model, seed, geometry, out } => {
            let graph = model.build(geometry)?;
            let store = seedpure_core::random_init(&graph, seed);
            save_weights(&store, &out)?;
            println!("wrote {}: {} tensors, {} values", out.display(), store.len(), store.num_values());
            Ok(())
        }
        Command::GenSynth { out_dir, per_class, seed, spec, height, width } => {
            if height < 8 || width < 8 {
                return Err(Error::Usage("--height and --width must be at least 8".into()));
            }
            let classes = match &spec {
                Some(p) => load_spec(p)?,
                None => default_classes(),
            };
            let dirs = generate(&out_dir, &classes, per_class as usize, seed, height, width)?;
            for d in dirs {
                println!("wrote {} images to {}", per_class, d.display());
            }
            Ok(())
        }
        Command::Extract(args) => extract(args),
        Command::Train(args) => train(args),
        Command::Eval { model_in, features } => eval(&model_in, &features),
        Command::Experiment { config } => experiment(&config),
        Command::Inspect { file, model, geometry } => match (file, model) {
            (Some(f), _) => emit(&inspect_file(&f)?),
            (None, Some(m)) => emit(&inspect_model(m, geometry)?),
            (None, None) => unreachable!("clap requires one of them"),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
