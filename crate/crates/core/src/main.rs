use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddr_core::ddr::Ddr;
use ddr_core::export::{element_center_values, write_vtk};
use ddr_core::mesh::{builtin_pattern, Mesh, MeshDocument, Occupancy, OrientationTable};
use ddr_core::verify::{run_all, CheckFamily, RankOptions, VerificationReport, MAX_DEGREE};
use ddr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ddr", version, about = "Discrete de Rham complexes on voxel meshes: cohomology and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or load a mesh, write it as JSON and print its entity counts.
    Mesh {
        #[command(flatten)]
        source: Source,
        /// Edge length of the voxels of builtin and pattern meshes.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cohomology dimensions of the degree-k complex, with optional generators.
    Cohomology {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the verification battery.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated check families, or `all`.
        #[arg(long, default_value = "all")]
        checks: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Mesh JSON file.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Builtin mesh: cube, ring or cavity.
    #[arg(long)]
    builtin: Option<String>,
    /// Voxel occupancy pattern file.
    #[arg(long)]
    pattern: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=MAX_DEGREE as i64))]
    degree: u32,
    /// Report path (JSON); printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// VTK file receiving the lifted generators.
    #[arg(long)]
    generators: Option<PathBuf>,
    /// Relative singular value threshold for rank decisions.
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit wall-clock data so that reports are reproducible byte for byte.
    #[arg(long)]
    no_timestamp: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn load(source: &Source, scale: f64) -> Result<(Mesh, OrientationTable)> {
    let mesh = if let Some(path) = &source.mesh {
        return MeshDocument::parse(&read(path)?)?.to_mesh_and_orientation();
    } else if let Some(name) = &source.builtin {
        builtin_pattern(name)?.build_mesh(scale)?
    } else if let Some(path) = &source.pattern {
        Occupancy::parse(&read(path)?)?.build_mesh(scale)?
    } else {
        return Err(Error::Input("no mesh source given".into()));
    };
    let orientation = OrientationTable::compute(&mesh)?;
    Ok((mesh, orientation))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("DDR_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Input(format!("DDR_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn rank_options(run: &RunArgs) -> Result<RankOptions> {
    if let Some(t) = run.rank_tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Input(format!("--rank-tol must lie in (0, 1), got {t}")));
        }
    }
    Ok(RankOptions {
        relative: run.rank_tol,
        seed: run.seed,
        ..Default::default()
    })
}

fn export_generators(path: &Path, mesh: &Mesh, orientation: &OrientationTable, report: &VerificationReport) -> Result<()> {
    let ddr = Ddr::new(mesh, orientation, report.degree)?;
    let mut fields = Vec::new();
    for set in report.generators.iter().flatten() {
        for (j, single) in set.split().iter().enumerate() {
            fields.push((format!("H{}_generator_{j}", set.index), element_center_values(&ddr, single)?));
        }
    }
    write(path, &write_vtk(mesh, orientation, &fields))
}

fn run(source: &Source, run: &RunArgs, selection: &[CheckFamily]) -> Result<bool> {
    let (mesh, orientation) = load(source, 1.0)?;
    let mut report = run_all(&mesh, &orientation, run.degree as usize, selection, &rank_options(run)?)?;
    if run.no_timestamp {
        report.strip_timing();
    }
    let json = report.to_json();
    match &run.out {
        Some(path) => write(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(path) = &run.generators {
        if report.generators.is_some() {
            export_generators(path, &mesh, &orientation, &report)?;
        }
    }
    for c in report.failed_checks() {
        let what = if c.errored { "ERROR" } else { "FAILED" };
        eprintln!(
            "{what} {}: residual {:.3e}, tolerance {:.1e}{}",
            c.name,
            c.residual,
            c.tolerance,
            c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        );
    }
    if let Some(h) = report.cohomology_ddr {
        eprintln!("cohomology {h:?}, cellular Betti numbers {:?}", report.betti_cw);
    }
    Ok(report.passed)
}

fn execute(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Mesh { source, scale, out } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Input(format!("--scale must be positive, got {scale}")));
            }
            let (mesh, _) = load(&source, scale)?;
            let json = mesh.to_json();
            let c = mesh.counts();
            let counts = format!("vertices {} edges {} faces {} elements {}", c.vertices, c.edges, c.faces, c.elements);
            match out {
                Some(path) => {
                    write(&path, &json)?;
                    println!("{counts}");
                }
                None => {
                    println!("{json}");
                    eprintln!("{counts}");
                }
            }
            Ok(true)
        }
        Command::Cohomology { source, run: args } => {
            let mut selection = vec![CheckFamily::Cohomology];
            if args.generators.is_some() {
                selection.push(CheckFamily::Generators);
            }
            run(&source, &args, &selection)
        }
        Command::Verify { source, run: args, checks } => {
            let selection = CheckFamily::parse_list(&checks)?;
            run(&source, &args, &selection)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input() { 2 } else { 1 })
        }
    }
}
