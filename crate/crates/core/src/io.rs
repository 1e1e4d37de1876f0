//! File formats.
//!
//! - graph: `{"n": 5, "steps": [[3, [1, 2]], [4, [2, 3]], ...]}`
//! - system: `{"graph": <graph>, "targets": {"1-2": 1.0, ...}, "law": {"family": "inverse_square"}}`
//! - configuration: `{"points": [[x, y], ...]}`

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::control::{build_system, FormationSystem, LawFamily};
use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::graph::{build_from_henneberg, Edge, HennebergStep, TriangulatedLamanGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub steps: Vec<HennebergStep>,
}

impl GraphFile {
    pub fn build(&self) -> Result<TriangulatedLamanGraph> {
        build_from_henneberg(self.n, &self.steps)
    }

    pub fn from_graph(g: &TriangulatedLamanGraph) -> Self {
        GraphFile { n: g.n(), steps: g.steps().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub graph: GraphFile,
    pub targets: BTreeMap<Edge, f64>,
    #[serde(default = "default_law")]
    pub law: LawFamily,
}

fn default_law() -> LawFamily {
    LawFamily::InverseSquare
}

impl SystemFile {
    /// Validated system (targets, triangle inequalities, C1/C2).
    pub fn build(&self) -> Result<FormationSystem> {
        build_system(&self.graph.build()?, &self.targets, self.law)
    }

    pub fn uniform(g: &TriangulatedLamanGraph, dbar: f64) -> Self {
        SystemFile {
            graph: GraphFile::from_graph(g),
            targets: g.edges().iter().map(|&e| (e, dbar)).collect(),
            law: LawFamily::InverseSquare,
        }
    }
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("in-memory values serialize")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_system(path: &Path) -> Result<FormationSystem> {
    read_json::<SystemFile>(path)?.build()
}

pub fn read_configuration(path: &Path) -> Result<Configuration> {
    read_json(path)
}
