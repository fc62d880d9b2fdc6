//! `camel`: fit, evaluate and inspect cross-view projection models.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use camel::data::{
    generate_synthetic, load_features, load_model, save_features, save_model, SyntheticSpec,
};
use camel::eval::{build_split, rank_gallery, Protocol};
use camel::solver::cluster_purity_report;
use camel::{
    camel_fit, camel_fit_supervised, cmel_fit, CamelConfig, CamelError, FeatureSet,
    ProjectionModel, Ridge, Variant,
};

#[derive(Parser)]
#[command(
    name = "camel",
    version,
    about = "Clustering-based asymmetric metric learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn per-view projections from a feature CSV and write a model file.
    Fit(FitArgs),
    /// Rank gallery identities for cross-view probes and report CMC and mAP.
    Eval(EvalArgs),
    /// Write a labelled synthetic cross-view feature CSV.
    Synth(SynthArgs),
    /// Fit, then report the mixed-cluster rate at initialization and convergence.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Camel,
    Cmel,
    Supervised,
    Euclidean,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Camel => Variant::Camel,
            VariantArg::Cmel => Variant::Cmel,
            VariantArg::Supervised => Variant::Supervised,
            VariantArg::Euclidean => Variant::Euclidean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Single,
    Multi,
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected a finite number >= 0, got `{s}`")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a finite number > 0, got `{s}`")),
    }
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Cross-view consistency weight.
    #[arg(long, default_value = "0.01", value_parser = non_negative, allow_hyphen_values = true)]
    lambda: f64,
    /// Number of clusters.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
    k: u64,
    /// Output dimension (defaults to the feature dimension).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: Option<u64>,
    /// Fixed covariance ridge; by default 1% of each view's mean feature energy.
    #[arg(long, value_parser = non_negative, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Stop when the objective decreases by no more than this.
    #[arg(long, default_value = "1e-8", value_parser = positive, allow_hyphen_values = true)]
    epsilon: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "camel")]
    variant: VariantArg,
}

impl TrainArgs {
    fn config(&self) -> CamelConfig {
        let mut cfg = CamelConfig::default()
            .with_lambda(self.lambda)
            .with_clusters(self.k as usize)
            .with_seed(self.seed);
        cfg.out_dim = self.dim.map(|t| t as usize);
        if let Some(a) = self.alpha {
            cfg.ridge = Ridge::Fixed(a);
        }
        cfg.epsilon = self.epsilon;
        cfg.max_iter = self.max_iter as usize;
        cfg
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    features: PathBuf,
    /// Model file to write; the run log goes to `<out>.log`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    features: PathBuf,
    /// Model file, or `identity` for raw Euclidean matching.
    #[arg(long, required_unless_present = "variant")]
    model: Option<String>,
    /// Only `euclidean` is meaningful without a model file.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum, default_value = "single")]
    protocol: ProtocolArg,
    /// Gallery images per identity under the multi-shot protocol.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    shots: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    repetitions: u64,
    /// Repetition `r` draws its split with seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Feature dimension.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    features: PathBuf,
    /// Report file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainArgs,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Numerical(_) => "numerical",
        }
    }
}

impl From<CamelError> for Failure {
    fn from(e: CamelError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

/// Initial and converged cluster assignments.
type Assignments = (Vec<usize>, Vec<usize>);

/// Trains the requested variant; also returns the initial and final assignments for clustered variants.
fn train(
    fs: &FeatureSet,
    args: &TrainArgs,
) -> Result<(ProjectionModel, Option<Assignments>), Failure> {
    let cfg = args.config();
    Ok(match Variant::from(args.variant) {
        Variant::Camel => {
            let (m, st) = camel_fit(fs, &cfg)?;
            (m, Some((st.initial_assignment, st.h.assignment().to_vec())))
        }
        Variant::Cmel => {
            let (m, st) = cmel_fit(fs, &cfg)?;
            (m, Some((st.initial_assignment, st.h.assignment().to_vec())))
        }
        Variant::Supervised => (camel_fit_supervised(fs, &cfg)?, None),
        Variant::Euclidean => {
            let mut m = ProjectionModel::identity(fs.views(), fs.dim());
            m.info.config = cfg;
            (m, None)
        }
    })
}

fn cmd_fit(args: &FitArgs) -> CmdResult {
    let fs = load_features(&args.features)?;
    let (model, _) = train(&fs, &args.train)?;
    save_model(&model, &args.out)?;

    let info = &model.info;
    let mut log = String::new();
    let _ = writeln!(log, "features {}", args.features.display());
    let _ = writeln!(log, "variant {}", info.variant);
    let _ = writeln!(log, "seed {}", info.config.seed);
    let _ = writeln!(log, "samples {}", fs.len());
    let _ = writeln!(log, "views {}", fs.views());
    let _ = writeln!(log, "dim {}", fs.dim());
    let _ = writeln!(log, "iterations {}", info.iterations);
    let _ = writeln!(log, "converged {}", info.converged);
    let _ = writeln!(log, "# iteration objective");
    for (i, f) in info.objective_history.iter().enumerate() {
        let _ = writeln!(log, "{i} {f:.16e}");
    }
    write_text(&log_path(&args.out), &log)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    match (args.model.as_deref(), args.variant) {
        (None, Some(v)) if !matches!(v, VariantArg::Euclidean) => {
            return Err(Failure::Usage(
                "only --variant euclidean can be evaluated without --model".into(),
            ))
        }
        (None, None) => return Err(Failure::Usage("--model or --variant is required".into())),
        _ => {}
    }
    let fs = load_features(&args.features)?;
    let (model, model_label) = match args.model.as_deref() {
        Some(path) if path != "identity" => (load_model(path)?, path.to_string()),
        _ => (
            ProjectionModel::identity(fs.views(), fs.dim()),
            "identity".to_string(),
        ),
    };
    let protocol = match args.protocol {
        ProtocolArg::Single => Protocol::SingleShot,
        ProtocolArg::Multi => Protocol::MultiShot,
    };

    let mut rows = Vec::new();
    let mut cmcs: Vec<Vec<f64>> = Vec::new();
    for rep in 0..args.repetitions {
        let seed = args.seed.wrapping_add(rep);
        let split = build_split(&fs, protocol, args.shots as usize, seed)?;
        let result = rank_gallery(&model, &split, &fs)?;
        if result.rankings.is_empty() {
            return Err(Failure::Data(format!(
                "repetition {rep}: no probe has a cross-view match in the gallery"
            )));
        }
        rows.push((
            rep,
            seed,
            result.rank1(),
            result.map,
            result.rankings.len(),
            result.excluded_probes,
            split.excluded_identities.len(),
        ));
        cmcs.push(result.cmc);
    }

    let ranks = cmcs.iter().map(Vec::len).max().unwrap_or(0);
    let rank1: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let maps: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (r1_mean, r1_std) = mean_std(&rank1);
    let (map_mean, map_std) = mean_std(&maps);

    let mut s = String::new();
    let _ = writeln!(s, "features {}", args.features.display());
    let _ = writeln!(s, "model {model_label}");
    let _ = writeln!(s, "variant {}", model.info.variant);
    let _ = writeln!(s, "protocol {}", protocol);
    let shots = if protocol == Protocol::SingleShot {
        1
    } else {
        args.shots
    };
    let _ = writeln!(s, "shots {shots}");
    let _ = writeln!(s, "repetitions {}", args.repetitions);
    let _ = writeln!(s, "seed {}", args.seed);
    let _ = writeln!(s, "gallery_identities {ranks}");
    let _ = writeln!(s, "rank1_mean {r1_mean:.6}");
    let _ = writeln!(s, "rank1_std {r1_std:.6}");
    let _ = writeln!(s, "map_mean {map_mean:.6}");
    let _ = writeln!(s, "map_std {map_std:.6}");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "# repetition seed rank1 map probes excluded_probes excluded_identities"
    );
    for (rep, seed, r1, map, probes, ex_p, ex_i) in &rows {
        let _ = writeln!(s, "{rep} {seed} {r1:.6} {map:.6} {probes} {ex_p} {ex_i}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "# rank cmc_mean cmc_std");
    for k in 0..ranks {
        // curves shorter than the longest are saturated at their last value
        let at: Vec<f64> = cmcs
            .iter()
            .map(|c| c.get(k).or(c.last()).copied().unwrap_or(0.0))
            .collect();
        let (m, sd) = mean_std(&at);
        let _ = writeln!(s, "{} {m:.6} {sd:.6}", k + 1);
    }
    emit(args.out.as_deref(), &s)
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let defaults = SyntheticSpec::default();
    let dim = args.dim as usize;
    let spec = SyntheticSpec {
        dim,
        latent_dim: defaults.latent_dim.min(dim),
        seed: args.seed,
        ..defaults
    };
    let fs = generate_synthetic(&spec)?;
    save_features(&fs, &args.out)?;
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> CmdResult {
    let fs = load_features(&args.features)?;
    let labels = fs
        .identities()
        .ok_or_else(|| Failure::Data("report needs identity labels in the feature file".into()))?
        .to_vec();
    let (model, assignments) = train(&fs, &args.train)?;
    let (initial, converged) = match assignments {
        Some(a) => a,
        None if matches!(args.train.variant, VariantArg::Supervised) => {
            let (a, _) = camel::solver::identity_assignment(&labels);
            (a.clone(), a)
        }
        None => {
            return Err(Failure::Usage(
                "report needs a clustering variant (camel, cmel or supervised)".into(),
            ))
        }
    };
    let first = cluster_purity_report(&initial, &labels)?;
    let last = cluster_purity_report(&converged, &labels)?;

    let mut s = String::new();
    let _ = writeln!(s, "features {}", args.features.display());
    let _ = writeln!(s, "variant {}", model.info.variant);
    let _ = writeln!(s, "seed {}", args.train.seed);
    let _ = writeln!(s, "clusters {}", args.train.k);
    let _ = writeln!(s, "iterations {}", model.info.iterations);
    let _ = writeln!(s, "converged {}", model.info.converged);
    let _ = writeln!(s);
    let _ = writeln!(s, "# stage rate_mixed nonempty_clusters");
    let _ = writeln!(
        s,
        "initial {:.6} {}",
        first.rate_mixed,
        first.clusters.len()
    );
    let _ = writeln!(
        s,
        "converged {:.6} {}",
        last.rate_mixed,
        last.clusters.len()
    );
    emit(args.out.as_deref(), &s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind(), f.message());
            ExitCode::from(f.code())
        }
    }
}
