//! Builds a three-level hierarchy on a twice-refined cube and solves the
//! H(div) problem with the shipped solver library.

use amge::fem::Coefficient;
use amge::hierarchy::{Hierarchy, HierarchyOptions, Partitioner};
use amge::mesh::Mesh;
use amge::solvers::SolverLibrary;

fn main() -> Result<(), amge::Error> {
    let mesh = Mesh::cube(2).refine().refine();
    let coef = Coefficient::unit(mesh.element_attrs().iter().copied());
    let opts = HierarchyOptions {
        levels: 3,
        target_order: 0,
        partitioner: Partitioner::Refinement,
        ..Default::default()
    };
    let h = Hierarchy::build(&mesh, 3, &coef, &opts)?;
    for (l, a) in h.a.iter().enumerate() {
        println!("level {l}: {} dofs", a.n_rows());
    }
    let b = h.load_vector(&mesh, |[x, y, z]| [y * z, 1.0 + x, x * y]);
    let lib = SolverLibrary::default_library();
    for name in ["main", "main-primary"] {
        let res = lib.solve(name, &h, &b, None)?;
        println!(
            "{name}: {} iterations, relative residual {:.2e}",
            res.iterations,
            res.rel_residual()
        );
    }
    let (gc, oc) = h.complexities();
    println!("grid complexity {gc:.3}, operator complexity {oc:.3}");
    Ok(())
}
