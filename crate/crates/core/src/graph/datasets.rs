use std::path::Path;

use super::{io, Graph, Partition};
use crate::error::{Error, Result};

const KARATE_EDGES: &str = include_str!("../../data/karate.edges");
const KARATE_LABELS: &str = include_str!("../../data/karate.labels");

/// A graph with optional ground-truth communities.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub truth: Option<Partition>,
}

impl Dataset {
    pub fn from_files(
        name: &str,
        edges: impl AsRef<Path>,
        labels: Option<&Path>,
    ) -> Result<Self> {
        let graph = io::load_edge_list(edges, None)?;
        let truth = labels.map(|p| io::load_labels(p, graph.n())).transpose()?;
        Ok(Dataset {
            name: name.to_string(),
            graph,
            truth,
        })
    }

    /// Resolves a dataset by name: `karate` is built in, anything else is read
    /// from `<dir>/<name>.edges` and (if present) `<dir>/<name>.labels`.
    pub fn named(name: &str, dir: &Path) -> Result<Self> {
        if name == "karate" {
            return Ok(karate());
        }
        let edges = dir.join(format!("{name}.edges"));
        if !edges.exists() {
            return Err(Error::validation(format!(
                "dataset {name:?} not found: expected {}",
                edges.display()
            )));
        }
        let labels = dir.join(format!("{name}.labels"));
        let labels = labels.exists().then_some(labels);
        Dataset::from_files(name, &edges, labels.as_deref())
    }
}

/// Zachary's karate club (34 nodes, 78 edges) with the two-faction split.
pub fn karate() -> Dataset {
    let graph = io::parse_edge_list(KARATE_EDGES, "karate.edges", Some(34))
        .expect("embedded karate edge list is valid");
    let truth = io::parse_labels(KARATE_LABELS, "karate.labels", 34)
        .expect("embedded karate labels are valid");
    Dataset {
        name: "karate".into(),
        graph,
        truth: Some(truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn karate_shape() {
        let d = karate();
        assert_eq!(d.graph.n(), 34);
        assert_eq!(d.graph.edge_count(), 78);
        assert_eq!(d.truth.as_ref().unwrap().k(), 2);
    }

    #[test]
    fn missing_dataset_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Dataset::named("football", dir.path()).is_err());
    }
}
