use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use amge::agglomeration::write_topology_dump;
use amge::fem::Coefficient;
use amge::hierarchy::{Hierarchy, HierarchyOptions, Partitioner};
use amge::la::io::write_matrix_market;
use amge::mesh::{in_box, Mesh};
use amge::solvers::SolverLibrary;
use amge::verify::check_hierarchy;
use amge::Error;

use crate::{Args, PartitionerArg};

pub const CSV_HEADER: &str = "form,levels,fine_dofs,iterations,rel_residual,gc,oc,setup_s,solve_s";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn config_error(e: Error) -> Failure {
    Failure::new(2, e.to_string())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(6, format!("{}: {e}", path.display()))
}

fn load_mesh(args: &Args) -> Result<Mesh, Failure> {
    let mut mesh = match &args.mesh {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| Failure::new(3, format!("{}: {e}", path.display())))?;
            Mesh::read(BufReader::new(file))
                .map_err(|e| Failure::new(3, format!("{}: {e}", path.display())))?
        }
        None => {
            let n = args.cube.unwrap_or(2);
            if n == 0 {
                return Err(Failure::new(2, "--cube needs at least one cell per axis"));
            }
            Mesh::cube(n)
        }
    };
    for _ in 0..args.refine {
        mesh = mesh.refine();
    }
    if args.inner_box {
        mesh = mesh.with_region_attribute(|p| in_box(p, 0.25, 0.75), 2);
    }
    Ok(mesh)
}

fn coefficient(args: &Args, mesh: &Mesh) -> Coefficient {
    let mut coef = Coefficient::unit(mesh.element_attrs().iter().copied());
    coef.alpha.extend(args.alpha.iter().copied());
    coef.beta.extend(args.beta.iter().copied());
    coef
}

fn options(args: &Args, mesh: &Mesh) -> HierarchyOptions {
    let partitioner = if args.trivial_partition {
        Partitioner::Trivial
    } else {
        match args.partitioner {
            PartitionerArg::Growing => Partitioner::Growing,
            PartitionerArg::Refinement => Partitioner::Refinement,
            PartitionerArg::Auto if mesh.refinements() + 1 >= args.levels => {
                Partitioner::Refinement
            }
            PartitionerArg::Auto => Partitioner::Growing,
        }
    };
    HierarchyOptions {
        levels: args.levels,
        factor: args.factor,
        target_order: args.target_order,
        seed: args.seed,
        partitioner,
    }
}

fn library(args: &Args) -> Result<SolverLibrary, Failure> {
    match &args.solver_config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
            SolverLibrary::from_json(&text).map_err(config_error)
        }
        None => Ok(SolverLibrary::default_library()),
    }
}

pub fn run(args: &Args) -> Result<(), Failure> {
    if args.levels == 0 {
        return Err(Failure::new(2, "--levels must be at least 1"));
    }
    if args.factor < 2 {
        return Err(Failure::new(2, "--factor must be at least 2"));
    }
    if !(args.tol > 0.0 && args.tol < 1.0) {
        return Err(Failure::new(2, "--tol must lie in (0, 1)"));
    }
    let lib = library(args)?;
    lib.get(&args.solver).map_err(config_error)?;
    let mesh = load_mesh(args)?;
    let coef = coefficient(args, &mesh);
    let opts = options(args, &mesh);

    let t0 = Instant::now();
    let mut h = Hierarchy::build(&mesh, args.form.space(), &coef, &opts).map_err(|e| match e {
        Error::Config(_) | Error::UnknownAttribute(_) => config_error(e),
        e => Failure::new(4, e.to_string()),
    })?;
    let setup = t0.elapsed().as_secs_f64();

    for (l, a) in h.a.iter().enumerate() {
        println!("level {} dofs {} nnz {}", l + 1, a.n_rows(), a.nnz());
    }

    if let Some(dir) = &args.export {
        export(&h, dir)?;
    }
    if let Some(path) = &args.dump_topology {
        let f = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(f);
        write_topology_dump(&h.topologies, &mut w).map_err(|e| io_error(path, e))?;
        w.flush().map_err(|e| io_error(path, e))?;
    }

    if args.verify {
        if args.inject_fault && !h.p.is_empty() {
            let s = args.form.space() - 1;
            h.p[0][s] = h.p[0][s].scale(1.001);
        }
        let checks = check_hierarchy(&h).map_err(|e| Failure::new(4, e.to_string()))?;
        let failed = checks.iter().filter(|c| !c.passed()).count();
        for c in &checks {
            println!("{c}");
        }
        println!("{} checks, {failed} failed", checks.len());
        return if failed == 0 {
            Ok(())
        } else {
            Err(Failure::new(1, format!("{failed} invariant checks failed")))
        };
    }

    let b = h.load_vector(&mesh, |[x, y, z]| {
        let s = std::f64::consts::PI;
        [(s * y).sin() + z, (s * z).sin() + x, (s * x).sin() + y]
    });
    let t1 = Instant::now();
    let res = lib
        .solve(&args.solver, &h, &b, Some(args.tol))
        .map_err(|e| match e {
            Error::Config(_) => config_error(e),
            e => Failure::new(4, e.to_string()),
        })?;
    let solve = t1.elapsed().as_secs_f64();
    let (gc, oc) = h.complexities();
    let timing = |t: f64| {
        if args.omit_timings {
            String::new()
        } else {
            format!("{t:.3}")
        }
    };
    let row = format!(
        "{},{},{},{},{:.6e},{:.6},{:.6},{},{}",
        args.form.name(),
        h.n_levels(),
        h.a[0].n_rows(),
        res.iterations,
        res.rel_residual(),
        gc,
        oc,
        timing(setup),
        timing(solve)
    );
    println!("{CSV_HEADER}");
    println!("{row}");
    if let Some(path) = &args.report {
        append_report(path, &row)?;
    }
    if !res.converged {
        return Err(Failure::new(
            5,
            format!(
                "no convergence after {} iterations (relative residual {:.3e})",
                res.iterations,
                res.rel_residual()
            ),
        ));
    }
    Ok(())
}

fn append_report(path: &Path, row: &str) -> Result<(), Failure> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    if fresh {
        writeln!(f, "{CSV_HEADER}").map_err(|e| io_error(path, e))?;
    }
    writeln!(f, "{row}").map_err(|e| io_error(path, e))
}

/// Writes `A_l{k}`, `D{i}_l{k}` for every level `k` (1 = finest) and
/// `P{s}_l{k}`, `Pi{s}_l{k}` for the transfer between levels `k + 1` and `k`.
fn export(h: &Hierarchy, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let write = |name: String, m: &amge::la::CsrMatrix| -> Result<(), Failure> {
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut w = BufWriter::new(f);
        write_matrix_market(m, &mut w).map_err(|e| io_error(&path, e))?;
        w.flush().map_err(|e| io_error(&path, e))
    };
    for (l, level) in h.levels.iter().enumerate() {
        write(format!("A_l{}.mtx", l + 1), &h.a[l])?;
        for i in 1..=3 {
            write(format!("D{i}_l{}.mtx", l + 1), level.derivative(i))?;
        }
    }
    for (l, (p, pi)) in h.p.iter().zip(&h.pi).enumerate() {
        for s in 0..4 {
            write(format!("P{}_l{}.mtx", s + 1, l + 1), &p[s])?;
            write(format!("Pi{}_l{}.mtx", s + 1, l + 1), &pi[s])?;
        }
    }
    Ok(())
}
