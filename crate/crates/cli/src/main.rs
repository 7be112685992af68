//! `amge`: builds AMGe de Rham hierarchies on tetrahedral meshes and solves
//! H(curl) / H(div) model problems with the configured solver.
//!
//! Exit codes: 1 failed invariant (`--verify`), 2 flag or configuration
//! error, 3 mesh error, 4 hierarchy construction error, 5 solver did not
//! converge, 6 output I/O error.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Curl,
    Div,
}

impl Form {
    pub fn space(self) -> usize {
        match self {
            Form::Curl => 2,
            Form::Div => 3,
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            Form::Curl => "curl",
            Form::Div => "div",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionerArg {
    /// Revert mesh refinements when the mesh has enough of them, otherwise grow.
    Auto,
    Growing,
    Refinement,
}

#[derive(Debug, Parser)]
#[command(
    version,
    about = "Element-agglomeration AMG for H(curl) and H(div) problems"
)]
pub struct Args {
    /// Mesh file in the `amge-mesh v1` text format.
    #[arg(long, value_name = "PATH", conflicts_with = "cube")]
    pub mesh: Option<PathBuf>,
    /// Unit cube split into N³ cells of 6 tets each (default 2).
    #[arg(long, value_name = "N")]
    pub cube: Option<usize>,
    /// Uniform refinements applied to the mesh.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, value_enum, default_value = "div")]
    pub form: Form,
    /// Levels in the hierarchy, including the finest.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Elements per agglomerate for the growing partitioner.
    #[arg(long, default_value_t = 8)]
    pub factor: usize,
    /// Polynomial order of the approximation targets.
    #[arg(long, default_value_t = 1)]
    pub target_order: usize,
    /// Coefficient of the derivative term on an element attribute.
    #[arg(long, value_name = "ATTR:VAL", value_parser = parse_attr)]
    pub alpha: Vec<(u32, f64)>,
    /// Coefficient of the mass term on an element attribute.
    #[arg(long, value_name = "ATTR:VAL", value_parser = parse_attr)]
    pub beta: Vec<(u32, f64)>,
    /// Give elements with centroid in [0.25, 0.75]³ attribute 2.
    #[arg(long)]
    pub inner_box: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub partitioner: PartitionerArg,
    /// One agglomerate per element (identity coarsening).
    #[arg(long)]
    pub trivial_partition: bool,
    /// JSON solver library; the shipped one is used otherwise.
    #[arg(long, value_name = "PATH")]
    pub solver_config: Option<PathBuf>,
    /// Library entry used for the solve.
    #[arg(long, default_value = "main")]
    pub solver: String,
    /// Relative tolerance in the preconditioner norm.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Append the run to this CSV file (header written when new).
    #[arg(long, value_name = "PATH.csv")]
    pub report: Option<PathBuf>,
    /// Leave the timing columns of the report empty.
    #[arg(long)]
    pub omit_timings: bool,
    /// Write the hierarchy's matrices as MatrixMarket files.
    #[arg(long, value_name = "DIR")]
    pub export: Option<PathBuf>,
    /// Write the agglomerated topologies of the coarse levels as text.
    #[arg(long, value_name = "PATH")]
    pub dump_topology: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the invariant checks instead of a solve.
    #[arg(long)]
    pub verify: bool,
    /// Corrupt the first prolongator before verification (tests the checks).
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn parse_attr(s: &str) -> Result<(u32, f64), String> {
    amge::fem::sequence::parse_attr_value(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
