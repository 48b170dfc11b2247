//! JSON graph files and loss maps.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::{Dag, Digraph, GraphError, LossFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

/// `{"nodes": [...], "edges": [{"from", "to", "loss"?}], "source"?}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl GraphFile {
    pub fn from_json(text: &str) -> Result<GraphFile, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph files serialize")
    }

    pub fn from_dag(dag: &Dag, losses: Option<&LossFunction>) -> GraphFile {
        let edges = dag
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(a, b))| EdgeEntry {
                from: dag.labels()[a].clone(),
                to: dag.labels()[b].clone(),
                loss: losses.map(|l| l.get(e)),
            })
            .collect();
        GraphFile { nodes: dag.labels().to_vec(), edges, source: None }
    }

    pub fn to_digraph(&self) -> Result<Digraph, GraphError> {
        let pairs: Vec<(&str, &str)> =
            self.edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).collect();
        let nodes: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        Digraph::from_labels(&nodes, &pairs)
    }

    pub fn to_dag(&self) -> Result<Dag, GraphError> {
        Dag::from_digraph(&self.to_digraph()?, self.source.as_deref())
    }

    /// Embedded losses: `None` when no edge carries one, an error when only
    /// some do.
    pub fn losses(&self, dag: &Dag) -> Result<Option<LossFunction>, GraphError> {
        let given = self.edges.iter().filter(|e| e.loss.is_some()).count();
        if given == 0 {
            return Ok(None);
        }
        let map: HashMap<String, f64> = self
            .edges
            .iter()
            .filter_map(|e| e.loss.map(|l| (format!("{}->{}", e.from, e.to), l)))
            .collect();
        LossFunction::from_label_map(dag, &map).map(Some)
    }
}

/// Parses a `{"from->to": loss}` mapping.
pub fn parse_loss_map(text: &str, dag: &Dag) -> Result<LossFunction, GraphError> {
    let map: HashMap<String, f64> =
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
    LossFunction::from_label_map(dag, &map)
}

pub fn loss_map_json(dag: &Dag, losses: &LossFunction) -> BTreeMap<String, f64> {
    losses.to_label_map(dag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_with_losses() {
        let dag = fixtures::fig2();
        let losses = fixtures::fig2_losses(&dag, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let file = GraphFile::from_dag(&dag, Some(&losses));
        let parsed = GraphFile::from_json(&file.to_json_pretty()).unwrap();
        let dag2 = parsed.to_dag().unwrap();
        assert_eq!(dag2, dag);
        assert_eq!(parsed.losses(&dag2).unwrap(), Some(losses));
    }

    #[test]
    fn partial_losses_are_rejected() {
        let text = r#"{"nodes":["s","i","t"],"edges":[{"from":"s","to":"i","loss":1},{"from":"i","to":"t"},{"from":"s","to":"t"}]}"#;
        let file = GraphFile::from_json(text).unwrap();
        let dag = file.to_dag().unwrap();
        assert!(matches!(file.losses(&dag), Err(GraphError::MissingLoss(_))));
    }

    #[test]
    fn loss_maps() {
        let dag = fixtures::shortcut_triangle();
        let losses = parse_loss_map(r#"{"s->i": 1, "i->t": 2.5, "s->t": 0}"#, &dag).unwrap();
        assert_eq!(losses.edge(&dag, dag.source(), dag.node("t").unwrap()), Some(0.0));
        assert!(parse_loss_map(r#"{"s->i": 1, "i->t": 2}"#, &dag).is_err());
        assert!(parse_loss_map(r#"{"s->i": 1, "i->t": 2, "s->t": 0, "t->s": 1}"#, &dag).is_err());
        assert!(parse_loss_map("[1,2]", &dag).is_err());
    }

    #[test]
    fn unknown_fields_and_explicit_source() {
        assert!(GraphFile::from_json(r#"{"nodes":[],"edges":[],"extra":1}"#).is_err());
        let text = r#"{"nodes":["a","b","c","t"],"edges":[{"from":"a","to":"c"},{"from":"b","to":"c"},{"from":"c","to":"t"}],"source":"a"}"#;
        let err = GraphFile::from_json(text).unwrap().to_dag().unwrap_err();
        assert_eq!(err, GraphError::Unreachable("b".into()));
    }
}
