//! Command-line front end: analysis of irregular classes, Stokes diagrams,
//! quasi-Hamiltonian verification sweeps, and fusion.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stokes_fission::fission::FissionModel;
use stokes_fission::fusion::{fuse, internally_fused_double};
use stokes_fission::linalg::random_invertible;
use stokes_fission::qh::{verify_space, QhSpace, SignCorrupted};
use stokes_fission::report::{analyze, descriptor_hash, VerifyReport};
use stokes_fission::stokes::IrregularClass;
use stokes_fission::twisted::Automorphism;
use stokes_fission::{diagram, presets, tol};

#[derive(Parser)]
#[command(
    name = "stokes-fission",
    about = "Stokes data of twisted irregular classes and twisted fission spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute ramification, levels, the adjoint cover, singular directions,
    /// the Levi and its twist coset, and the untwisting cross-check.
    Analyze(InputArgs),
    /// Emit the Stokes diagram of a class.
    Diagram {
        #[command(flatten)]
        input: InputArgs,
        /// Output format: svg or json.
        #[arg(long, default_value = "svg")]
        format: String,
    },
    /// Run the twisted quasi-Hamiltonian axiom sweeps on a fission space.
    Verify(VerifyArgs),
    /// Fuse two fission spaces, or build a twisted double, and verify.
    Fuse(FuseArgs),
    /// List the built-in presets or print one as JSON.
    Preset {
        /// Preset name; omit together with --list to see all names.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Path to an irregular-class JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Name of a built-in preset (see `preset --list`).
    #[arg(long)]
    preset: Option<String>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of random points per sweep.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Residual tolerance for QH1/QH2. May only loosen the built-in value;
    /// the effective tolerance is echoed in the report.
    #[arg(long)]
    tol: Option<f64>,
    /// Size of the worker pool for the seed sweep.
    #[arg(long)]
    workers: Option<usize>,
    /// Negative control: flip the sign of the two-form. Verification is then
    /// expected to fail with a nonzero exit status.
    #[arg(long)]
    corrupt_sign: bool,
}

#[derive(Args)]
struct FuseArgs {
    /// First fission-space preset or class file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Second fission-space preset or class file to fuse with.
    #[arg(long)]
    with: Option<String>,
    #[arg(long)]
    with_input: Option<PathBuf>,
    /// Build a twisted internally fused double instead: "id,id", "inner,inner"
    /// or "outer,outer".
    #[arg(long)]
    double: Option<String>,
    /// Rank of the group for --double.
    #[arg(long, default_value_t = 2)]
    rank: usize,
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(thiserror::Error, Debug)]
enum CliError {
    #[error("either --input or --preset is required")]
    MissingInput,
    #[error("unknown preset {0:?}; available: {1}")]
    UnknownPreset(String, String),
    #[error("failed to read {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("parse error in {0}: {1}")]
    Parse(String, String),
    #[error("{0}")]
    Invalid(String),
}

fn load_class(input: &Option<PathBuf>, preset: &Option<String>) -> Result<(String, IrregularClass), CliError> {
    match (input, preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            let class: IrregularClass = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(path.display().to_string(), e.to_string()))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, class))
        }
        (None, Some(name)) => {
            let class = presets::load(name).ok_or_else(|| {
                CliError::UnknownPreset(name.clone(), presets::names().join(", "))
            })?;
            Ok((presets::canonical_name(name), class))
        }
        (None, None) => Err(CliError::MissingInput),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(path.display().to_string(), e)),
        None => {
            println!("{}", content);
            Ok(())
        }
    }
}

/// Effective QH tolerance: overrides may only loosen the built-in threshold.
fn effective_tol(user: Option<f64>) -> f64 {
    match user {
        Some(t) => t.max(tol::QH_AXIOM),
        None => tol::QH_AXIOM,
    }
}

fn run_verify(
    space: &dyn QhSpace,
    descriptor: String,
    hash: String,
    seeds: u64,
    qh_tol: f64,
    workers: Option<usize>,
    negative_control: Option<String>,
) -> (VerifyReport, bool) {
    let report = match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("worker pool");
            pool.install(|| verify_space(space, seeds, qh_tol))
        }
        None => verify_space(space, seeds, qh_tol),
    };
    let pass = report.pass;
    let verify = VerifyReport {
        descriptor,
        descriptor_hash: hash,
        seeds,
        reports: vec![report],
        negative_control,
        pass,
    };
    (verify, pass)
}

fn parse_double(spec: &str, n: usize) -> Result<(Automorphism, Automorphism), CliError> {
    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(7);
    // Near-identity representatives: composed moments condition like
    // cond(J)^4, so ill-conditioned twists drown the residuals in roundoff.
    let sample = |rng: &mut rand::rngs::StdRng| {
        stokes_fission::linalg::expm(&(random_invertible(n, rng) * stokes_fission::linalg::c(0.15, 0.0)))
    };
    let mut mk = |tag: &str| -> Result<Automorphism, CliError> {
        match tag.trim() {
            "id" => Ok(Automorphism::Identity),
            "inner" => Ok(Automorphism::Inner(sample(&mut rng))),
            "outer" => Ok(Automorphism::Outer(sample(&mut rng))),
            other => Err(CliError::Invalid(format!("unknown automorphism tag {:?}", other))),
        }
    };
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Invalid(format!(
            "--double expects two comma-separated tags, got {:?}",
            spec
        )));
    }
    Ok((mk(parts[0])?, mk(parts[1])?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Analyze(args) => {
            let (_, class) = load_class(&args.input, &args.preset)?;
            let report = analyze(&class);
            let json = serde_json::to_string_pretty(&report).expect("report serialises");
            emit(&args.out, &json)?;
            Ok(true)
        }
        Command::Diagram { input, format } => {
            let (_, class) = load_class(&input.input, &input.preset)?;
            let data = diagram::diagram_data(&class);
            match format.as_str() {
                "svg" => emit(&input.out, &diagram::to_svg(&data))?,
                "json" => emit(
                    &input.out,
                    &serde_json::to_string_pretty(&diagram::to_json(&data)).unwrap(),
                )?,
                other => return Err(CliError::Invalid(format!("unknown format {:?}", other))),
            }
            Ok(true)
        }
        Command::Verify(args) => {
            let (name, class) = load_class(&args.input.input, &args.input.preset)?;
            let model = FissionModel::from_class(&name, &class)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            let hash = descriptor_hash(&name, &class);
            let qh_tol = effective_tol(args.tol);
            let (report, pass) = if args.corrupt_sign {
                let bad = SignCorrupted(model);
                let (mut report, _) = run_verify(
                    &bad,
                    name,
                    hash,
                    args.seeds,
                    qh_tol,
                    args.workers,
                    Some("two-form sign flipped; failure below is the expected outcome".into()),
                );
                report.pass = false;
                (report, false)
            } else {
                run_verify(&model, name, hash, args.seeds, qh_tol, args.workers, None)
            };
            let json = serde_json::to_string_pretty(&report).expect("report serialises");
            emit(&args.input.out, &json)?;
            Ok(pass)
        }
        Command::Fuse(args) => {
            let qh_tol = effective_tol(args.tol);
            let (space, descriptor, hash): (Box<dyn QhSpace>, String, String) =
                if let Some(spec) = &args.double {
                    let (phi, psi) = parse_double(spec, args.rank)?;
                    let dd = internally_fused_double(args.rank, &phi, &psi);
                    let name = format!("double({}) rank {}", spec, args.rank);
                    let hash = format!("{:016x}", fnv_tag(&name));
                    (Box::new(dd), name, hash)
                } else {
                    let (name_a, class_a) = load_class(&args.input, &args.preset)?;
                    let with_preset = args.with.clone();
                    let (name_b, class_b) = load_class(&args.with_input, &with_preset)?;
                    let a = FissionModel::from_class(&name_a, &class_a)
                        .map_err(|e| CliError::Invalid(e.to_string()))?;
                    let b = FissionModel::from_class(&name_b, &class_b)
                        .map_err(|e| CliError::Invalid(e.to_string()))?;
                    let fused = fuse(Box::new(a), 0, Box::new(b), 0)
                        .map_err(|e| CliError::Invalid(e.to_string()))?;
                    let name = fused.name();
                    let hash = descriptor_hash(&name_a, &class_a) + &descriptor_hash(&name_b, &class_b);
                    (Box::new(fused), name, hash)
                };
            let (report, pass) =
                run_verify(space.as_ref(), descriptor, hash, args.seeds, qh_tol, args.workers, None);
            let json = serde_json::to_string_pretty(&report).expect("report serialises");
            emit(&args.out, &json)?;
            Ok(pass)
        }
        Command::Preset { name, list, out } => {
            if list || name.is_none() {
                let listing = presets::names().join("\n");
                emit(&out, &listing)?;
                return Ok(true);
            }
            let name = name.unwrap();
            let json = presets::preset_json(&name).ok_or_else(|| {
                CliError::UnknownPreset(name.clone(), presets::names().join(", "))
            })?;
            emit(&out, json)?;
            Ok(true)
        }
    }
}

/// Cheap stable tag for ad-hoc descriptors (doubles have no class JSON).
fn fnv_tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}
