use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use denstree::bnet::{fit_gaussian_mixture_baseline, learn_structure, parameterize};
use denstree::data::NoiseKind;
use denstree::harness::{
    decode_model, encode_model, format_report, generate_connected, generate_standin, ingest_csv, preprocess, read_csv,
    run_experiment, write_csv, write_schema, Algorithm, ExperimentConfig, Method, Model, Preprocess, Profile,
    ReportFormat, Task,
};
use denstree::harness::codec::from_json_str;
use denstree::rng::rng_for;
use denstree::{
    ConditionalModel, ConditionalSpec, Dataset, Error, FactoredModel, LeafFamily, Mode, NetworkStructure,
    Result, Schema, SearchConfig,
};

#[derive(Parser)]
#[command(name = "denstree", version, about = "Conditional density trees and tree-structured Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (connected, bio or astro).
    Gen(GenArgs),
    /// Scale continuous columns to [0, 1] and optionally add noise.
    Preprocess(PreprocessArgs),
    /// Learn a model and write it as a model file.
    Train(TrainArgs),
    /// Score a CSV file with a model file.
    Eval(EvalArgs),
    /// k-fold cross-validated test log-likelihood of one or more algorithms.
    Cv(CvArgs),
    /// Learn a Bayesian network structure by tiered hill climbing.
    Structure(StructureArgs),
    /// Draw rows from a network model.
    Sample(SampleArgs),
    /// Time learning and evaluation of one algorithm.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "DENSTREE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON file.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct TargetArgs {
    /// Child variable of a single conditional.
    #[arg(long, conflicts_with = "structure")]
    child: Option<String>,
    /// Comma-separated parent variables of the conditional.
    #[arg(long, value_delimiter = ',', requires = "child")]
    parents: Vec<String>,
    /// Structure JSON file: one tree per family of this network.
    #[arg(long)]
    structure: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    /// cart, stratified, joint, approx, bnet or gmm-baseline.
    #[arg(long)]
    mode: Option<String>,
    /// uniform, gauss, linreg, ili or mli.
    #[arg(long)]
    leaf: Option<String>,
    /// Weight of the uniform component mixed into every conditional.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Map continuous columns onto [0, 1].
    #[arg(long)]
    scale: bool,
    /// uniform or gaussian.
    #[arg(long, value_parser = parse_noise, requires = "noise_mag")]
    noise: Option<NoiseKind>,
    #[arg(long)]
    noise_mag: Option<f64>,
}

#[derive(Args)]
struct GenArgs {
    /// connected, bio or astro.
    dataset: String,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema_out: PathBuf,
    /// Where to write the ground-truth network of a stand-in dataset.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema_out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV file; its header is matched against the schema inside the model.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "tsv", value_parser = parse_format)]
    format: ReportFormat,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Additional algorithms as mode-leaf labels (stratified-ili, bnet, ...).
    #[arg(long = "algo")]
    algos: Vec<String>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Record learning and evaluation wall-times (reports are then not byte-stable).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "tsv", value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct StructureArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 3)]
    max_parents: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also parameterize the structure and write the network model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    tree: TreeArgs,
    /// Evaluation passes over the data.
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[command(flatten)]
    seed: SeedArg,
}

fn parse_noise(s: &str) -> std::result::Result<NoiseKind, String> {
    match s {
        "uniform" => Ok(NoiseKind::Uniform),
        "gaussian" => Ok(NoiseKind::Gaussian),
        _ => Err(format!("unknown noise kind `{s}` (uniform or gaussian)")),
    }
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("unknown format `{s}` (tsv or json)"))
}

fn read_data(args: &DataArgs) -> Result<Dataset> {
    ingest_csv(&args.data, &args.schema)
}

fn var(schema: &Schema, name: &str) -> Result<usize> {
    schema
        .index_of(name)
        .ok_or_else(|| Error::Config(format!("no variable named `{name}`")))
}

fn read_structure(path: &Path, schema: &Schema) -> Result<NetworkStructure> {
    let s: NetworkStructure = from_json_str(&fs::read_to_string(path)?)?;
    // re-validate: deserialization does not check acyclicity
    let s = NetworkStructure::from_parents((0..s.len()).map(|v| s.parents(v).to_vec()).collect(), s.max_parents())?;
    if s.len() != schema.len() {
        return Err(Error::Config(format!(
            "structure has {} variables, schema has {}",
            s.len(),
            schema.len()
        )));
    }
    Ok(s)
}

fn task(args: &TargetArgs, schema: &Schema, joint_only: bool) -> Result<Task> {
    if let Some(child) = &args.child {
        let parents = args.parents.iter().map(|p| var(schema, p)).collect::<Result<_>>()?;
        let spec = ConditionalSpec::new(var(schema, child)?, parents);
        spec.check(schema)?;
        return Ok(Task::Conditional(spec));
    }
    if let Some(path) = &args.structure {
        return Ok(Task::Joint(read_structure(path, schema)?));
    }
    if joint_only {
        return Ok(Task::Joint(NetworkStructure::empty(schema.len(), 3)));
    }
    Err(Error::Config("give --child (with --parents) or --structure".into()))
}

fn algorithm(tree: &TreeArgs) -> Result<Option<Algorithm>> {
    let Some(mode) = &tree.mode else {
        if tree.leaf.is_some() {
            return Err(Error::Config("--leaf needs --mode".into()));
        }
        return Ok(None);
    };
    let mut alg = match mode.as_str() {
        "bnet" => Algorithm::bnet(),
        "gmm-baseline" => Algorithm::gmm_baseline(),
        m => {
            let mode = Mode::parse(m).ok_or_else(|| Error::Config(format!("unknown mode `{m}`")))?;
            let leaf = tree.leaf.as_deref().unwrap_or("uniform");
            let family = LeafFamily::parse(leaf).ok_or_else(|| Error::Config(format!("unknown leaf family `{leaf}`")))?;
            Algorithm::tree(mode, family)
        }
    };
    if let Some(eps) = tree.epsilon {
        match &mut alg.method {
            Method::Tree(c) => c.epsilon = eps,
            Method::Bnet(c) => c.final_tier.epsilon = eps,
            Method::GmmBaseline { .. } => return Err(Error::Config("--epsilon does not apply to gmm-baseline".into())),
        }
    }
    Ok(Some(alg))
}

fn joint_method(alg: &Algorithm) -> bool {
    !matches!(alg.method, Method::Tree(_))
}

fn noise_config(args: &NoiseArgs) -> Result<Preprocess> {
    let noise = match (args.noise, args.noise_mag) {
        (Some(kind), Some(mag)) => Some((kind, mag)),
        (None, Some(_)) => return Err(Error::Config("--noise-mag needs --noise".into())),
        _ => None,
    };
    Ok(Preprocess {
        scale: args.scale,
        noise,
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn learn(alg: &Algorithm, task: &Task, data: &Dataset, seed: u64) -> Result<Model> {
    Ok(match (&alg.method, task) {
        (Method::Tree(c), Task::Conditional(spec)) => {
            Model::Conditional(ConditionalModel::learn(data, spec, &c.clone().with_seed(seed))?)
        }
        (Method::Tree(c), Task::Joint(s)) => Model::Network(FactoredModel::learn(data, s, &c.clone().with_seed(seed))?),
        (Method::Bnet(c), Task::Joint(_)) => {
            let c = c.clone().with_seed(seed);
            Model::Network(parameterize(&learn_structure(data, &c)?.structure, data, &c)?)
        }
        (Method::GmmBaseline { grid, validation_fraction }, Task::Joint(_)) => {
            Model::Mixture(fit_gaussian_mixture_baseline(data, grid, seed, *validation_fraction)?.model)
        }
        _ => return Err(Error::Config(format!("`{}` models a joint distribution; drop --child", alg.label))),
    })
}

/// Total log-likelihood and visited-leaf count of `data` under `model`.
fn score(model: &Model, data: &Dataset) -> (f64, usize, usize) {
    let mut ll = 0.0;
    let (mut visited, mut queries) = (0, 0);
    let mut one = |c: &ConditionalModel, row: &[f64]| {
        let e = c.eval(&c.spec.project(row));
        ll += e.log;
        visited += e.visited;
        queries += 1;
    };
    match model {
        Model::Conditional(c) => data.rows.iter().for_each(|r| one(c, r)),
        Model::Network(n) => data.rows.iter().for_each(|r| n.conditionals.iter().for_each(|c| one(c, r))),
        Model::Mixture(g) => ll = g.log_likelihood(data),
    }
    (ll, visited, queries)
}

fn gen(a: GenArgs) -> Result<()> {
    let seed = a.seed.seed;
    match a.dataset.as_str() {
        "connected" => {
            let d = generate_connected(a.rows.unwrap_or(denstree::harness::generate::CONNECTED_DESK_ROWS), seed)?;
            write_schema(&d.schema, &a.schema_out)?;
            write_csv(&d, &a.out)
        }
        name => {
            let profile = Profile::parse(name)
                .ok_or_else(|| Error::Config(format!("unknown dataset `{name}` (connected, bio or astro)")))?;
            let s = generate_standin(profile, a.rows.unwrap_or(profile.default_rows()), seed)?;
            write_schema(&s.data.schema, &a.schema_out)?;
            if let Some(p) = &a.truth_out {
                fs::write(p, serde_json::to_string(&s.truth).map_err(|e| Error::Internal(e.to_string()))?)?;
            }
            write_csv(&s.data, &a.out)
        }
    }
}

fn run_preprocess(a: PreprocessArgs) -> Result<()> {
    let data = read_data(&a.data)?;
    let out = preprocess(&data, &noise_config(&a.noise)?, a.seed.seed)?;
    write_schema(&out.schema, &a.schema_out)?;
    write_csv(&out, &a.out)
}

fn train(a: TrainArgs) -> Result<()> {
    let data = read_data(&a.data)?;
    let alg = algorithm(&a.tree)?.ok_or_else(|| Error::Config("train needs --mode".into()))?;
    let task = task(&a.target, &data.schema, joint_method(&alg))?;
    let model = learn(&alg, &task, &data, a.seed.seed)?;
    fs::write(&a.out, encode_model(&model, &data.schema)?)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (model, schema) = decode_model(&fs::read_to_string(&a.model)?)?;
    let data = read_csv(&a.data, Arc::new(schema))?;
    let (ll, visited, queries) = score(&model, &data);
    let n = data.len().max(1) as f64;
    let mean_visited = if queries == 0 { 0.0 } else { visited as f64 / queries as f64 };
    let text = match a.format {
        ReportFormat::Tsv => format!(
            "rows\ttotal_ll\tmean_ll\tmean_visited\n{}\t{ll}\t{}\t{mean_visited}\n",
            data.len(),
            ll / n
        ),
        ReportFormat::Json => format!(
            "{}\n",
            serde_json::json!({"rows": data.len(), "total_ll": ll, "mean_ll": ll / n, "mean_visited": mean_visited})
        ),
    };
    write_out(None, &text)
}

fn cv(a: CvArgs) -> Result<()> {
    let data = read_data(&a.data)?;
    let mut algorithms: Vec<Algorithm> = algorithm(&a.tree)?.into_iter().collect();
    for label in &a.algos {
        let mut alg = Algorithm::parse(label)?;
        if let (Some(eps), Method::Tree(c)) = (a.tree.epsilon, &mut alg.method) {
            c.epsilon = eps;
        }
        algorithms.push(alg);
    }
    if algorithms.is_empty() {
        return Err(Error::Config("give --mode/--leaf or at least one --algo".into()));
    }
    let joint_only = algorithms.iter().all(joint_method);
    let mut cfg = ExperimentConfig::new(algorithms, task(&a.target, &data.schema, joint_only)?);
    cfg.folds = a.folds;
    cfg.preprocess = noise_config(&a.noise)?;
    cfg.seed = a.seed.seed;
    cfg.timing = a.timing;
    let rows = run_experiment(&data, &cfg)?;
    write_out(a.out.as_deref(), &format_report(&rows, a.format))
}

fn structure(a: StructureArgs) -> Result<()> {
    let data = read_data(&a.data)?;
    let mut cfg = SearchConfig::default().with_seed(a.seed.seed);
    cfg.max_parents = a.max_parents;
    let outcome = learn_structure(&data, &cfg)?;
    let text = serde_json::to_string_pretty(&outcome.structure).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&a.out, text + "\n")?;
    eprintln!(
        "{} arcs after {} iterations; validation LL {} -> {}",
        outcome.structure.arc_count(),
        outcome.iterations,
        outcome.initial_validation_ll,
        outcome.final_validation_ll()
    );
    if let Some(p) = &a.model_out {
        let model = parameterize(&outcome.structure, &data, &cfg)?;
        fs::write(p, encode_model(&Model::Network(model), &data.schema)?)?;
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let (model, _) = decode_model(&fs::read_to_string(&a.model)?)?;
    let Model::Network(net) = model else {
        return Err(Error::Config("sampling needs a network model".into()));
    };
    write_csv(&net.sample(a.rows, &mut rng_for(a.seed.seed)), &a.out)
}

fn bench(a: BenchArgs) -> Result<()> {
    let data = read_data(&a.data)?;
    let alg = algorithm(&a.tree)?.ok_or_else(|| Error::Config("bench needs --mode".into()))?;
    let task = task(&a.target, &data.schema, joint_method(&alg))?;
    let t0 = Instant::now();
    let model = learn(&alg, &task, &data, a.seed.seed)?;
    let learn_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let mut last = (0.0, 0, 0);
    for _ in 0..a.repeat.max(1) {
        last = score(&model, &data);
    }
    let eval_s = t1.elapsed().as_secs_f64() / a.repeat.max(1) as f64;
    let (ll, visited, queries) = last;
    println!("label\tlearn_s\teval_s\tqueries\tmean_visited\ttotal_ll");
    println!(
        "{}\t{learn_s}\t{eval_s}\t{queries}\t{}\t{ll}",
        alg.label,
        if queries == 0 { 0.0 } else { visited as f64 / queries as f64 }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Preprocess(a) => run_preprocess(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Cv(a) => cv(a),
        Command::Structure(a) => structure(a),
        Command::Sample(a) => sample(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
