//! The experiment registry. Every experiment reads a merged configuration
//! and returns its output files plus named pass/fail assertions.

mod effective;
mod kinetic;
mod special;
mod sweeps;
mod wellposed;

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: "value <= threshold".into(),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: "value >= threshold".into(),
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
            detail: "value < threshold".into(),
        }
    }

    pub fn equals(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            passed: value == expected,
            value,
            threshold: expected,
            detail: "value == threshold".into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn check(&mut self, a: Assertion) {
        self.assertions.push(a);
    }
}

/// Renders a CSV into memory.
pub(crate) fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    f(&mut out).expect("writing to memory cannot fail");
    out
}

pub(crate) fn text(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = String::new();
    writeln!(s, "{header}").unwrap();
    for r in rows {
        writeln!(s, "{r}").unwrap();
    }
    s.into_bytes()
}

pub(crate) fn seeds(cfg: &Config) -> Result<Vec<u64>, CliError> {
    let s = cfg.u64_list("sweep", "seeds", &[1])?;
    if s.is_empty() {
        return Err(CliError::Validation("sweep.seeds is empty".into()));
    }
    Ok(s)
}

pub struct Experiment {
    pub name: &'static str,
    pub description: &'static str,
    /// Configuration text the user's file is laid over.
    pub defaults: &'static str,
    pub run: fn(&Config) -> Result<Outcome, CliError>,
}

pub static REGISTRY: [Experiment; 12] = [
    Experiment {
        name: "comparison",
        description: "pathwise ordering of solutions from random ordered initial pairs",
        defaults: wellposed::COMPARISON,
        run: wellposed::comparison,
    },
    Experiment {
        name: "contraction",
        description: "weighted L1 contraction in expectation over Monte Carlo paths",
        defaults: wellposed::CONTRACTION,
        run: wellposed::contraction,
    },
    Experiment {
        name: "effective-flux",
        description: "effective flux table against direct periodic averages",
        defaults: effective::EFFECTIVE_FLUX,
        run: effective::effective_flux,
    },
    Experiment {
        name: "eps-sweep-p1-shear",
        description: "transport by a shear flow: weak-* error against the averaged y-family",
        defaults: sweeps::SHEAR,
        run: sweeps::shear,
    },
    Experiment {
        name: "eps-sweep-p2",
        description: "stiff source: weak-* and corrector errors over an eps sweep",
        defaults: sweeps::P2,
        run: sweeps::p2,
    },
    Experiment {
        name: "kinetic-identities",
        description: "quadrature of the chi identities and the two-point rigidity defect",
        defaults: kinetic::KINETIC,
        run: kinetic::identities,
    },
    Experiment {
        name: "kruzkov",
        description: "stochastic Kruzkov residual against special solutions under refinement",
        defaults: wellposed::KRUZKOV,
        run: wellposed::kruzkov,
    },
    Experiment {
        name: "miraculous",
        description: "effective noise coefficients against averaged fine-scale noise",
        defaults: effective::MIRACULOUS,
        run: effective::miraculous,
    },
    Experiment {
        name: "special-invariance-p1",
        description: "transport problem keeps the special solution g(alpha + kappa0 W)",
        defaults: special::P1,
        run: special::invariance,
    },
    Experiment {
        name: "special-invariance-p2",
        description: "stiff-source problem keeps g(V(x/eps) + kappa0 W + alpha)",
        defaults: special::P2,
        run: special::invariance,
    },
    Experiment {
        name: "viscosity-crosscheck",
        description: "vanishing viscosity runs approach the hyperbolic run",
        defaults: wellposed::VISCOSITY,
        run: wellposed::viscosity,
    },
    Experiment {
        name: "young-concentration",
        description: "Young measure of the corrector residual concentrates as eps -> 0",
        defaults: sweeps::YOUNG,
        run: sweeps::young,
    },
];

pub fn find(name: &str) -> Result<&'static Experiment, CliError> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CliError::UnknownExperiment {
            name: name.to_string(),
            valid: REGISTRY.iter().map(|e| e.name).collect(),
        })
}
