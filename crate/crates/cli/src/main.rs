use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gimbal::diagnostics::AdjacencySpec;
use gimbal::engine::{in_sample_residuals, predict_all, residual_knn_correct};
use gimbal::report::{annotate, write_experiment, write_records, write_summary};
use gimbal::simgen::{simulate, Sampling, SimSpec};
use gimbal::summary::summarize;
use gimbal::{fit_all, Dataset, ExperimentRegistry, GimbalConfig, GimbalError, VariantRegistry};

#[derive(Parser)]
#[command(name = "gimbal", version, about = "Geometry-aware local regression with directional weights")]
struct Cli {
    /// Worker threads for per-location fitting (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every location of a dataset and write records.csv and summary.json.
    Fit {
        /// Input CSV with lat, lon, x, y columns.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict test locations from a training pool.
    Predict {
        #[arg(long)]
        train: PathBuf,
        /// Test CSV; the y column is optional.
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add the mean of the k nearest training residuals to each prediction.
        #[arg(long)]
        residual_knn: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with simulation settings; flags override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        flags: SimArgs,
    },
    /// Run one of the registered experiments.
    Experiment {
        /// Experiment id: e71, e72, e73 or e74.
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// List registered weighting variants and experiments.
    List,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta_beta: Option<f64>,
    #[arg(long)]
    c_rad: Option<f64>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Uniform,
    Gaussian,
}

#[derive(Args)]
struct ModelArgs {
    /// TOML file with estimator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weighting variant applied on top of the configuration.
    #[arg(long, default_value = "full")]
    variant: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    n_min: Option<f64>,
    #[arg(long)]
    eta_max: Option<f64>,
    #[arg(long)]
    eps_phi: Option<f64>,
    #[arg(long)]
    eps_theta: Option<f64>,
    #[arg(long)]
    eps_eta: Option<f64>,
    /// Neighbors in the residual Moran adjacency.
    #[arg(long, default_value_t = 8)]
    k_moran: usize,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, GimbalError> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| GimbalError::InvalidConfig(format!("{}: {e}", path.display())))
}

impl ModelArgs {
    fn resolve(&self) -> Result<GimbalConfig, GimbalError> {
        let mut c: GimbalConfig = match &self.config {
            Some(path) => read_toml(path)?,
            None => GimbalConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(k, h, gamma, n0, n_min, eta_max, eps_phi, eps_theta, eps_eta);
        if let Some(u) = self.u {
            c.u = Some(u);
        }
        let c = VariantRegistry::builtin().get(&self.variant)?.configure(&c);
        c.validate()?;
        Ok(c)
    }

    fn adjacency(&self) -> AdjacencySpec {
        AdjacencySpec { k_moran: self.k_moran, ..AdjacencySpec::default() }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_fit(data: &Path, out_dir: &Path, model: &ModelArgs) -> anyhow::Result<()> {
    let config = model.resolve()?;
    let ds = Dataset::read_csv(data)?;
    let records = fit_all(&ds, &config)?;
    let notes = annotate(&ds, &records, model.adjacency())?;
    fs::create_dir_all(out_dir)?;
    write_records(create(&out_dir.join("records.csv"))?, &ds, &records, &notes)?;
    let mut w = create(&out_dir.join("summary.json"))?;
    write_summary(&mut w, &config, &model.variant, &summarize(&records))?;
    w.flush()?;
    let flagged = records.iter().filter(|r| !r.fit.well_posed).count();
    eprintln!("fitted {} locations ({flagged} ill-posed) -> {}", records.len(), out_dir.display());
    Ok(())
}

fn cmd_predict(train: &Path, test: &Path, out: &Path, residual_knn: Option<usize>, model: &ModelArgs) -> anyhow::Result<()> {
    let config = model.resolve()?;
    let training = Dataset::read_csv(train)?;
    let targets = Dataset::read_targets_csv(test)?;
    let predictions = predict_all(&training, &config, &targets)?;
    let records: Vec<_> = predictions.into_iter().map(|p| p.record).collect();
    let mut notes = annotate(&targets, &records, model.adjacency())?;

    if let Some(k) = residual_knn.filter(|&k| k > 0) {
        let train_records = fit_all(&training, &config)?;
        let pool: Vec<(usize, f64)> = in_sample_residuals(&training, &train_records)
            .into_iter()
            .enumerate()
            .filter_map(|(j, r)| r.map(|r| (j, r)))
            .collect();
        let residuals: Vec<f64> = pool.iter().map(|&(_, r)| r).collect();
        let points: Vec<_> = pool.iter().map(|&(j, _)| training.points[j]).collect();
        let corrected = notes
            .fitted
            .iter()
            .zip(&records)
            .map(|(f, r)| match f {
                Some(f) => residual_knn_correct(&residuals, &points, targets.points[r.index], k).map(|c| Some(f + c)),
                None => Ok(None),
            })
            .collect::<Result<Vec<_>, GimbalError>>()?;
        notes.extra = Some(("prediction_corrected".to_string(), corrected));
    }
    write_records(create(out)?, &targets, &records, &notes)?;
    eprintln!("predicted {} targets -> {}", records.len(), out.display());
    Ok(())
}

fn cmd_simulate(out: &Path, spec_file: Option<&Path>, flags: &SimArgs) -> anyhow::Result<()> {
    let mut spec: SimSpec = match spec_file {
        Some(p) => read_toml(p)?,
        None => SimSpec::default(),
    };
    if let Some(v) = flags.n {
        spec.n = v;
    }
    for (slot, v) in [
        (&mut spec.rho, flags.rho),
        (&mut spec.psi, flags.psi),
        (&mut spec.sigma, flags.sigma),
        (&mut spec.delta_beta, flags.delta_beta),
        (&mut spec.c_rad, flags.c_rad),
        (&mut spec.extent, flags.extent),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(s) = flags.sampling {
        spec.sampling = match s {
            SamplingArg::Uniform => Sampling::Uniform,
            SamplingArg::Gaussian => Sampling::Gaussian,
        };
    }
    if let Some(s) = flags.seed {
        spec.seed = s;
    }
    let sim = simulate(&spec)?;
    sim.dataset.write_csv(create(out)?, Some(("beta1_true", &sim.beta1)))?;
    Ok(())
}

fn cmd_experiment(id: &str, seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    let registry = ExperimentRegistry::builtin();
    let experiment = registry.get(id)?;
    let run = experiment.run(seed)?;
    write_experiment(&run, out_dir)?;
    for v in &run.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    Ok(())
}

fn cmd_list() {
    println!("variants:");
    for v in VariantRegistry::builtin().iter() {
        println!("  {:<12} {}", v.name(), v.description());
    }
    println!("experiments:");
    let registry = ExperimentRegistry::builtin();
    for id in registry.ids() {
        println!("  {:<12} {}", id, registry.get(id).map(|e| e.title()).unwrap_or_default());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match &cli.command {
        Command::Fit { data, out_dir, model } => cmd_fit(data, out_dir, model),
        Command::Predict { train, test, out, residual_knn, model } => cmd_predict(train, test, out, *residual_knn, model),
        Command::Simulate { out, spec, flags } => cmd_simulate(out, spec.as_deref(), flags),
        Command::Experiment { id, seed, out_dir } => cmd_experiment(id, *seed, out_dir),
        Command::List => {
            cmd_list();
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<GimbalError>() {
        Some(e) if e.is_input_error() => 2,
        Some(GimbalError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
