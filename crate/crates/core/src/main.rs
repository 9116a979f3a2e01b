use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cnc_vem::elasticity::{face_kind_counts, ElasticityError, NeumannMode};
use cnc_vem::harness::{
    compute_errors, exact_vertex_field, rates, run_convergence, solve_case, vertex_field, write_csv, Case, ConvergenceRow,
    HarnessError, MeshSpec, RunOptions,
};
use cnc_vem::mesh::{load_mesh, validate, write_vtk, MeshError};
use cnc_vem::sparse::SolverKind;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Conforming/nonconforming virtual element solver for 3D linear elasticity.
#[derive(Parser, Debug)]
#[command(name = "cncvem", version)]
struct Cli {
    /// TOML file with a `[solve]`, `[converge]` or `[mesh-info]` table mirroring the flags.
    /// Used when no subcommand is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for assembly (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Solve a registered case on one mesh and write errors.csv and solution.vtk.
    Solve(SolveArgs),
    /// Run a convergence study over a mesh sequence.
    Converge(ConvergeArgs),
    /// Print counts, labels and geometric quality of a mesh.
    MeshInfo(MeshInfoArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
enum SolverArg {
    #[default]
    Direct,
    Cg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
enum NeumannArg {
    #[default]
    Face,
    Element,
}

#[derive(Args, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct CommonArgs {
    /// Polynomial degree.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    k: usize,
    /// Comma separated boundary labels to make nonconforming (overrides the case default).
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    nc_tags: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = SolverArg::Direct)]
    #[serde(default)]
    solver: SolverArg,
    /// Form of the Neumann load: face projection or element projection trace.
    #[arg(long, value_enum, default_value_t = NeumannArg::Face)]
    #[serde(default)]
    neumann: NeumannArg,
    /// Override the first Lamé parameter of the case.
    #[arg(long)]
    #[serde(default)]
    lambda: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    #[serde(default = "results_dir")]
    out: PathBuf,
}

fn one() -> usize {
    1
}

fn results_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Args, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SolveArgs {
    /// Mesh file (.json native format or legacy .vtk), or `box:N` / `cyl:NRxNTxNZ`.
    #[arg(long)]
    mesh: PathBuf,
    /// Registered case: cube, cylinder or patch-k.
    #[arg(long)]
    case: String,
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct ConvergeArgs {
    #[arg(long)]
    case: String,
    /// `box:4,6,8,12`, `cyl:2x8x4,3x12x6` or comma separated files; defaults to the case's sequence.
    #[arg(long)]
    #[serde(default)]
    meshes: Option<String>,
    /// Write 0 in the seconds column so repeated runs give identical bytes.
    #[arg(long)]
    #[serde(default)]
    no_timing: bool,
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct MeshInfoArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Faces with h_F < rho_min * h_E are reported as small.
    #[arg(long, default_value_t = 0.1)]
    #[serde(default = "rho_min")]
    rho_min: f64,
}

fn rho_min() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigFile {
    solve: Option<SolveArgs>,
    converge: Option<ConvergeArgs>,
    mesh_info: Option<MeshInfoArgs>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Elasticity(ElasticityError::Solve(s)) => CliError::Solver(s.to_string()),
            HarnessError::Io(e) => CliError::Io(e.to_string()),
            HarnessError::Mesh(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn options(c: &CommonArgs) -> Result<RunOptions, CliError> {
    if !(1..=4).contains(&c.k) {
        return Err(CliError::Validation(format!("unsupported degree k = {}", c.k)));
    }
    let mut opts = RunOptions::new(c.k);
    opts.solver = match c.solver {
        SolverArg::Direct => SolverKind::Direct,
        SolverArg::Cg => SolverKind::Cg,
    };
    opts.neumann = match c.neumann {
        NeumannArg::Face => NeumannMode::Face,
        NeumannArg::Element => NeumannMode::Element,
    };
    opts.nonconforming = c.nc_tags.clone();
    opts.lambda = c.lambda;
    Ok(opts)
}

fn parse_case(name: &str) -> Result<Case, CliError> {
    name.parse().map_err(|e: HarnessError| CliError::Validation(e.to_string()))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// A mesh file, or a single generator spec such as `box:4` or `cyl:2x8x4`.
fn open_mesh(path: &Path) -> Result<cnc_vem::Mesh64, CliError> {
    let text = path.to_string_lossy();
    if text.starts_with("box:") || text.starts_with("cyl:") {
        return match MeshSpec::parse_list(&text)?.as_slice() {
            [one] => Ok(one.build()?),
            _ => Err(CliError::Validation(format!("`{text}` must name exactly one mesh"))),
        };
    }
    Ok(load_mesh(path)?)
}

fn run_solve(args: &SolveArgs) -> Result<(), CliError> {
    let case = parse_case(&args.case)?;
    let opts = options(&args.common)?;
    let start = Instant::now();
    let mesh = open_mesh(&args.mesh)?;
    let report = validate(&mesh, 0.1);
    if !report.degenerate_cells.is_empty() {
        return Err(CliError::Validation(format!("degenerate cells: {:?}", report.degenerate_cells)));
    }
    let h = mesh.max_cell_diameter();
    let sol = solve_case(case, mesh, &opts)?;
    let (e_l2, e_h1) = compute_errors(&sol.disc, &sol.u, sol.exact.as_ref())?;
    let row = ConvergenceRow {
        mesh: args.mesh.display().to_string(),
        h,
        dofs: sol.disc.num_dofs(),
        e_l2,
        e_h1,
        seconds: start.elapsed().as_secs_f64(),
    };
    create_out(&args.common.out)?;
    let mut csv = fs::File::create(args.common.out.join("errors.csv"))?;
    write_csv(std::slice::from_ref(&row), true, &mut csv)?;
    let fields = [vertex_field(&sol.disc, &sol.u), exact_vertex_field(&sol.disc.mesh, sol.exact.as_ref())];
    let mut vtk = io::BufWriter::new(fs::File::create(args.common.out.join("solution.vtk"))?);
    write_vtk(&sol.disc.mesh, &fields, &mut vtk)?;
    vtk.flush()?;
    println!(
        "{} k={} dofs={} e_l2={:.6e} e_h1={:.6e} ({:.2} s)",
        row.mesh, args.common.k, row.dofs, row.e_l2, row.e_h1, row.seconds
    );
    Ok(())
}

fn run_converge(args: &ConvergeArgs) -> Result<(), CliError> {
    let case = parse_case(&args.case)?;
    let opts = options(&args.common)?;
    let meshes = match &args.meshes {
        Some(s) => MeshSpec::parse_list(s)?,
        None => case.default_meshes(),
    };
    let rows = run_convergence(case, &meshes, &opts)?;
    create_out(&args.common.out)?;
    let mut buf = Vec::new();
    write_csv(&rows, !args.no_timing, &mut buf)?;
    fs::write(args.common.out.join("errors.csv"), &buf)?;
    io::stdout().write_all(&buf)?;
    if rows.len() >= 2 {
        let r = rates(&rows);
        eprintln!("fitted slopes: e_h1 {:.3}, e_l2 {:.3}", r.h1, r.l2);
        eprintln!("pairwise e_h1 {:?}", r.pairwise_h1.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
        eprintln!("pairwise e_l2 {:?}", r.pairwise_l2.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}

fn run_mesh_info(args: &MeshInfoArgs) -> Result<(), CliError> {
    let mesh = open_mesh(&args.mesh)?;
    let (conforming, nonconforming) = face_kind_counts(&mesh);
    let curved = (0..mesh.faces().len()).filter(|&f| mesh.is_face_curved(f)).count();
    println!("vertices: {}", mesh.vertices().len());
    println!("edges:    {}", mesh.edges().len());
    println!("faces:    {} ({conforming} conforming, {nonconforming} nonconforming, {curved} curved)", mesh.faces().len());
    println!("cells:    {}", mesh.num_cells());
    for label in mesh.boundary_labels() {
        let n = mesh.boundary_tags()[label].len();
        println!("  boundary `{label}`: {n} faces");
    }
    let report = validate(&mesh, args.rho_min);
    println!("h_E range: [{:.4e}, {:.4e}]", report.min_cell_diameter, report.max_cell_diameter);
    println!("min volume: {:.4e}", report.min_volume);
    println!("min h_F/h_E: {:.4}", report.min_face_ratio);
    if !report.small_face_cells.is_empty() {
        println!("cells with small faces: {:?}", report.small_face_cells);
    }
    if !report.non_star_cells.is_empty() {
        println!("cells failing the star-shape check: {:?}", report.non_star_cells);
    }
    if report.degenerate_cells.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("degenerate cells: {:?}", report.degenerate_cells)))
    }
}

fn load_config(path: &Path) -> Result<Command, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    match (cfg.solve, cfg.converge, cfg.mesh_info) {
        (Some(s), None, None) => Ok(Command::Solve(s)),
        (None, Some(c), None) => Ok(Command::Converge(c)),
        (None, None, Some(m)) => Ok(Command::MeshInfo(m)),
        _ => Err(CliError::Validation(format!(
            "{}: expected exactly one of [solve], [converge], [mesh-info]",
            path.display()
        ))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let command = match (cli.command, &cli.config) {
        (Some(c), _) => c,
        (None, Some(path)) => load_config(path)?,
        (None, None) => return Err(CliError::Validation("no subcommand given (see --help)".into())),
    };
    match &command {
        Command::Solve(a) => run_solve(a),
        Command::Converge(a) => run_converge(a),
        Command::MeshInfo(a) => run_mesh_info(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(CliError::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(CliError::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn config_table_mirrors_flags() {
        let cfg: ConfigFile = toml::from_str(
            "[converge]\ncase = \"cube\"\nk = 2\nmeshes = \"box:2,3\"\nno-timing = true\nnc-tags = [\"z1\"]\n",
        )
        .unwrap();
        let c = cfg.converge.unwrap();
        assert_eq!((c.case.as_str(), c.common.k, c.no_timing), ("cube", 2, true));
        assert_eq!(c.common.nc_tags, Some(vec!["z1".to_string()]));
        assert_eq!(c.common.out, PathBuf::from("results"));
    }
}
