use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wreathlin::basis::{
    burnside_count, commutant_basis, orbit_pattern, pattern_of_structure, projection_residual,
    SharingPattern, DEFAULT_COMMUTANT_MAX_DEGREE,
};
use wreathlin::layer::{equivariance_check, EquivariantLayer};
use wreathlin::perm::{enumeration_limit, PermGroup};
use wreathlin::pointcloud::{
    format_predictions, hierarchy_check, synthetic_blobs, BlobConfig, LayerKind, SegNet,
    SegNetConfig,
};
use wreathlin::train::{sgd_train, Sample, TrainConfig};
use wreathlin::{Error, StructureExpr};

#[derive(Parser)]
#[command(
    name = "wreathlin",
    version,
    about = "Equivariant linear maps for hierarchical permutation symmetries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the parameter-sharing pattern of a structure.
    Pattern {
        #[arg(long)]
        structure: String,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check orbit counts, commutation and equivariance for a structure.
    Verify {
        #[arg(long)]
        structure: String,
        /// Group-order cap for enumeration; defaults to $WREATHLIN_MAX_ORDER or 200000.
        #[arg(long)]
        max_order: Option<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Train a small segmentation network on synthetic point clouds.
    Demo {
        #[arg(long, value_enum, default_value_t = Task::Segnet)]
        task: Task,
        #[arg(long, default_value_t = 4)]
        res: usize,
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        /// Latent classes of the attention block; 0 disables it.
        #[arg(long, default_value_t = 0)]
        attention: usize,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        blobs: usize,
        #[arg(long, default_value_t = 32)]
        points_per_blob: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pgm,
    Summary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Segnet,
}

enum Failure {
    Usage(String),
    Verification,
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidKernel(_)
            | Error::InvalidDegree(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn cmd_pattern(structure: &str, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let expr = StructureExpr::parse(structure)?;
    let pattern = pattern_of_structure(&expr)?;
    let text = match format {
        Format::Csv => pattern.to_csv(),
        Format::Pgm => pattern.to_pgm(),
        Format::Summary => format!("{}\n", pattern.summary(&expr.to_string())),
    };
    match out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

enum Leg {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn invariant_under(pattern: &SharingPattern, group: &PermGroup) -> bool {
    let n = pattern.n();
    group.generators().iter().all(|g| {
        (0..n).all(|i| (0..n).all(|j| pattern.get(g.apply(i), g.apply(j)) == pattern.get(i, j)))
    })
}

fn verify_legs(
    expr: &StructureExpr,
    limit: usize,
    trials: usize,
) -> Result<Vec<(&'static str, Leg)>, Failure> {
    let group = expr.group()?;
    let closed = pattern_of_structure(expr)?;
    let k = closed.num_orbits();
    let mut legs = Vec::new();

    let orbit = orbit_pattern(&group);
    legs.push((
        "orbit count",
        if orbit.num_orbits() == k {
            Leg::Pass(format!("orbits={k}"))
        } else {
            Leg::Fail(format!("orbits={} closed form={k}", orbit.num_orbits()))
        },
    ));

    legs.push((
        "burnside",
        match burnside_count(&group, limit) {
            Ok(b) if b == k as u64 => Leg::Pass(format!("orbits={b}")),
            Ok(b) => Leg::Fail(format!("orbits={b} closed form={k}")),
            Err(Error::EnumerationLimitExceeded { limit }) => {
                eprintln!("warning: group order exceeds {limit}; Burnside leg skipped");
                Leg::Skip(format!("group order exceeds {limit}"))
            }
            Err(e) => return Err(e.into()),
        },
    ));

    legs.push((
        "commutant",
        match commutant_basis(&group) {
            Ok(basis) => {
                let maximal = basis
                    .bases()
                    .iter()
                    .all(|b| projection_residual(&closed, b).is_zero());
                if basis.size() == k && maximal {
                    Leg::Pass(format!("orbits={} residual=0", basis.size()))
                } else {
                    Leg::Fail(format!("dimension={} maximal={maximal}", basis.size()))
                }
            }
            Err(Error::DegreeTooLarge { degree, limit }) => {
                eprintln!("warning: degree {degree} exceeds {limit}; commutant leg skipped");
                Leg::Skip(format!("degree above {DEFAULT_COMMUTANT_MAX_DEGREE}"))
            }
            Err(e) => return Err(e.into()),
        },
    ));

    let same = orbit == closed;
    let counted = !expr.is_transitive() || expr.param_count() == k;
    legs.push((
        "closed form",
        match (same, counted) {
            (true, true) => Leg::Pass(format!("orbits={k}")),
            (false, _) => Leg::Fail("closed-form and generator patterns differ".into()),
            (true, false) => Leg::Fail(format!("param_count={} orbits={k}", expr.param_count())),
        },
    ));

    legs.push((
        "commutation",
        if invariant_under(&closed, &group) {
            Leg::Pass(format!("{} generators", group.generators().len()))
        } else {
            Leg::Fail("tied map does not commute with a generator".into())
        },
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = EquivariantLayer::<f64>::random(expr.clone(), 2, 2, &mut rng)?;
    let report = equivariance_check(&layer, trials, 1)?;
    legs.push((
        "equivariance",
        if report.passed() {
            Leg::Pass(format!("max residual {:.1e}", report.max_residual()))
        } else {
            Leg::Fail(format!("max residual {:.1e}", report.max_residual()))
        },
    ));

    legs.push((
        "associativity",
        if expr.has_nested_wreath() {
            let other = expr.reassociate_wreaths();
            if pattern_of_structure(&other)? == closed {
                Leg::Pass(format!("matches {other}"))
            } else {
                Leg::Fail(format!("differs from {other}"))
            }
        } else {
            Leg::Skip("no nested wreath".into())
        },
    ));
    Ok(legs)
}

fn cmd_verify(structure: &str, max_order: Option<usize>, trials: usize) -> Result<(), Failure> {
    let expr = StructureExpr::parse(structure)?;
    let limit = max_order.unwrap_or_else(enumeration_limit);
    let legs = verify_legs(&expr, limit, trials)?;
    println!("structure={expr} N={}", expr.degree());
    let mut failed = false;
    for (name, leg) in &legs {
        let (status, detail) = match leg {
            Leg::Pass(d) => ("PASS", d),
            Leg::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Leg::Skip(d) => ("SKIP", d),
        };
        println!("{name:<14} {status:<5} {detail}");
    }
    if failed {
        Err(Failure::Verification)
    } else {
        Ok(())
    }
}

struct DemoArgs {
    res: usize,
    blocks: usize,
    attention: usize,
    epochs: usize,
    seed: u64,
    out: PathBuf,
    blobs: BlobConfig,
    lr: f64,
}

fn cmd_demo(a: DemoArgs) -> Result<(), Failure> {
    if a.res == 0 || a.blocks == 0 {
        return Err(Failure::Usage("--res and --blocks must be positive".into()));
    }
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let cloud = synthetic_blobs(&a.blobs, &mut rng)?;
    let sample = Sample::<f64>::from_cloud(&cloud, a.res)?;
    let config = SegNetConfig {
        c_in: cloud.num_features(),
        hidden: 8,
        classes: a.blobs.blobs,
        blocks: a.blocks,
        kernel: if a.res >= 3 { 3 } else { 1 },
        attention: a.attention,
        kind: LayerKind::Wreath,
    };
    let mut net = SegNet::random(&config, &mut rng)?;
    let data = [sample];
    let trace = sgd_train(
        &mut net,
        &data,
        &TrainConfig {
            epochs: a.epochs,
            lr: a.lr,
            seed: a.seed,
        },
    )
    .map_err(|e| match e {
        Error::NonFiniteLoss { .. } => Failure::Runtime(format!("training diverged: {e}")),
        other => other.into(),
    })?;
    let s = &data[0];
    let pred = net.predict(&s.vox, &s.features)?;
    let report = hierarchy_check(|v, x| net.forward(v, x), &s.vox, &s.features, 10, &mut rng)?;

    write_file(&a.out.join("cloud.txt"), &cloud.to_text())?;
    write_file(&a.out.join("trace.csv"), &trace.to_csv())?;
    write_file(&a.out.join("predictions.txt"), &format_predictions(&pred))?;
    write_file(&a.out.join("equivariance.txt"), &report.to_string())?;
    write_file(&a.out.join("model.json"), &net.to_json())?;

    let first = trace.rows.first().expect("initial row");
    let last = trace.rows.last().expect("initial row");
    println!(
        "epochs={} loss {:.4} -> {:.4} accuracy {:.3} -> {:.3} equivariance {}",
        a.epochs,
        first.loss,
        last.loss,
        first.accuracy,
        last.accuracy,
        if report.passed() { "PASS" } else { "FAIL" }
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pattern {
            structure,
            format,
            out,
        } => cmd_pattern(&structure, format, out.as_deref()),
        Command::Verify {
            structure,
            max_order,
            trials,
        } => cmd_verify(&structure, max_order, trials),
        Command::Demo {
            task: Task::Segnet,
            res,
            blocks,
            attention,
            epochs,
            seed,
            out,
            blobs,
            points_per_blob,
            noise,
            lr,
        } => cmd_demo(DemoArgs {
            res,
            blocks,
            attention,
            epochs,
            seed,
            out,
            blobs: BlobConfig {
                blobs,
                points_per_blob,
                noise,
                ..BlobConfig::default()
            },
            lr,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
