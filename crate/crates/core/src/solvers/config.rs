//! Named solver library read from a JSON document.
//!
//! ```json
//! { "solvers": {
//!     "main": { "type": "pcg", "max_iterations": 500, "preconditioner": "mg" },
//!     "mg":   { "type": "vcycle", "smoother": "hyb", "coarse": "lu" },
//!     "hyb":  { "type": "hybrid", "sweeps": 2 },
//!     "lu":   { "type": "direct" } } }
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use super::pcg::DEFAULT_REL_TOL;
use super::{
    AuxSpace, Direct, Hybrid, Identity, Jacobi, L1Sgs, Pcg, PcgResult, Solver, VCycle,
    DEFAULT_SWEEPS,
};
use crate::error::{Error, Result};
use crate::hierarchy::{masked_galerkin, Hierarchy};

/// The library shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/solvers.json");

/// Default iteration budget of a `pcg` node.
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub sweeps: Option<usize>,
    pub max_iterations: Option<usize>,
    pub rel_tol: Option<f64>,
    pub smoother: Option<String>,
    pub coarse: Option<String>,
    pub preconditioner: Option<String>,
    pub levels: Option<usize>,
}

const KINDS: [&str; 7] = [
    "jacobi",
    "l1-sgs",
    "hybrid",
    "vcycle",
    "pcg",
    "direct",
    "aux-space",
];

impl SolverSpec {
    fn children(&self) -> impl Iterator<Item = &String> {
        [&self.smoother, &self.coarse, &self.preconditioner]
            .into_iter()
            .flatten()
    }

    fn sweeps(&self) -> usize {
        self.sweeps.unwrap_or(DEFAULT_SWEEPS)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    solvers: BTreeMap<String, SolverSpec>,
}

/// Validated set of named solver specifications.
#[derive(Debug, Clone, Default)]
pub struct SolverLibrary {
    specs: BTreeMap<String, SolverSpec>,
}

impl SolverLibrary {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("solver config: {e}")))?;
        Self::new(doc.solvers)
    }

    pub fn default_library() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("shipped solver config is valid")
    }

    pub fn new(specs: BTreeMap<String, SolverSpec>) -> Result<Self> {
        for (name, spec) in &specs {
            if !KINDS.contains(&spec.kind.as_str()) {
                return Err(Error::Config(format!(
                    "solver '{name}': unknown type '{}'",
                    spec.kind
                )));
            }
            for child in spec.children() {
                if !specs.contains_key(child) {
                    return Err(Error::Config(format!(
                        "solver '{name}' references unknown solver '{child}'"
                    )));
                }
            }
            let needs: &[(&str, &Option<String>)] = match spec.kind.as_str() {
                "vcycle" => &[("smoother", &spec.smoother), ("coarse", &spec.coarse)],
                _ => &[],
            };
            for (key, value) in needs {
                if value.is_none() {
                    return Err(Error::Config(format!(
                        "solver '{name}' of type {} needs '{key}'",
                        spec.kind
                    )));
                }
            }
            if spec.levels == Some(0) {
                return Err(Error::Config(format!(
                    "solver '{name}': levels must be positive"
                )));
            }
        }
        let lib = Self { specs };
        lib.check_acyclic()?;
        Ok(lib)
    }

    fn check_acyclic(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            lib: &'a SolverLibrary,
            name: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<()> {
            match marks.get(name) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => {
                    return Err(Error::Config(format!(
                        "solver reference cycle through '{name}'"
                    )))
                }
                None => {}
            }
            marks.insert(name, Mark::Open);
            for child in lib.specs[name].children() {
                visit(lib, child, marks)?;
            }
            marks.insert(name, Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for name in self.specs.keys() {
            visit(self, name, &mut marks)?;
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<&SolverSpec> {
        self.specs
            .get(name)
            .ok_or_else(|| Error::Config(format!("no solver named '{name}'")))
    }

    /// Instantiates `name` for the system matrix of level `l` of `h`.
    pub fn build(&self, name: &str, h: &Hierarchy, l: usize) -> Result<Box<dyn Solver>> {
        let spec = self.get(name)?;
        let a = h.a[l].clone();
        Ok(match spec.kind.as_str() {
            "jacobi" => Box::new(Jacobi::new(a, spec.sweeps())?),
            "l1-sgs" => Box::new(L1Sgs::new(a, spec.sweeps())?),
            "hybrid" => {
                let d = Arc::new(h.masked_derivative(l, h.form - 1));
                let a_aux = Arc::new(masked_galerkin(&a, &d, h.boundary(l, h.form - 1))?);
                let primary = Box::new(L1Sgs::new(a.clone(), spec.sweeps())?);
                let aux = Box::new(L1Sgs::new(a_aux, spec.sweeps())?);
                Box::new(Hybrid::new(a, primary, d, aux))
            }
            "vcycle" => {
                let n = spec
                    .levels
                    .map_or(h.n_levels() - l, |k| k.min(h.n_levels() - l));
                let last = l + n - 1;
                let smoother = spec.smoother.as_deref().unwrap();
                let smoothers = (l..last)
                    .map(|k| self.build(smoother, h, k))
                    .collect::<Result<Vec<_>>>()?;
                let coarse = self.build(spec.coarse.as_deref().unwrap(), h, last)?;
                Box::new(VCycle::new(
                    h.a[l..=last].to_vec(),
                    h.p_form[l..last].to_vec(),
                    smoothers,
                    coarse,
                ))
            }
            "pcg" => {
                let prec = match &spec.preconditioner {
                    Some(p) => self.build(p, h, l)?,
                    None => Box::new(Identity(a.n_rows())),
                };
                let tol = spec.rel_tol.unwrap_or(DEFAULT_REL_TOL);
                Box::new(Pcg::new(
                    a,
                    prec,
                    tol,
                    spec.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
                ))
            }
            "direct" => Box::new(Direct::new(a)?),
            "aux-space" => Box::new(AuxSpace::for_level(h, l, spec.sweeps())?),
            other => return Err(Error::Config(format!("unknown solver type '{other}'"))),
        })
    }

    /// Solves `A x = b` on the finest level. A `pcg` entry runs with its
    /// own settings; any other entry is used as the preconditioner of a PCG
    /// with default settings. `rel_tol` overrides the configured tolerance.
    pub fn solve(
        &self,
        name: &str,
        h: &Hierarchy,
        b: &[f64],
        rel_tol: Option<f64>,
    ) -> Result<PcgResult> {
        let spec = self.get(name)?;
        let a = h.a[0].clone();
        let (prec, tol, max_it) = if spec.kind == "pcg" {
            let prec: Box<dyn Solver> = match &spec.preconditioner {
                Some(p) => self.build(p, h, 0)?,
                None => Box::new(Identity(a.n_rows())),
            };
            (
                prec,
                spec.rel_tol.unwrap_or(DEFAULT_REL_TOL),
                spec.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            )
        } else {
            (
                self.build(name, h, 0)?,
                DEFAULT_REL_TOL,
                DEFAULT_MAX_ITERATIONS,
            )
        };
        super::pcg(
            &a,
            prec.as_ref(),
            b,
            &vec![0.0; b.len()],
            rel_tol.unwrap_or(tol),
            max_it,
        )
    }
}
