//! JSON documents for processes and gadget maps.
//!
//! Rationals are written as `"num/den"` strings (denominator omitted when it
//! is one) so that a document survives a parse/serialize cycle byte for byte.

use serde::{Deserialize, Serialize};

use crate::mdp::{Edge, Label, Mdp, Vertex, VertexId, VertexKind};
use crate::rational::{self, Rational};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MdpDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
    pub sink: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VertexDoc {
    pub id: usize,
    pub kind: String,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EdgeDoc {
    pub src: usize,
    pub dst: usize,
    #[serde(with = "rational::serde_str")]
    pub payload: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bland: Option<u32>,
}

impl From<&Mdp> for MdpDoc {
    fn from(mdp: &Mdp) -> Self {
        MdpDoc {
            vertices: mdp
                .vertices()
                .iter()
                .enumerate()
                .map(|(id, v)| VertexDoc {
                    id,
                    kind: match v.kind {
                        VertexKind::Agent => "agent".into(),
                        VertexKind::Randomization => "randomization".into(),
                    },
                    label: v.label.to_string(),
                })
                .collect(),
            edges: mdp
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    src: e.source.0,
                    dst: e.target.0,
                    payload: e.payload.clone(),
                    bland: e.bland,
                })
                .collect(),
            sink: mdp.sink().0,
        }
    }
}

impl TryFrom<MdpDoc> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDoc) -> Result<Mdp> {
        let mut vertices = Vec::with_capacity(doc.vertices.len());
        for (i, v) in doc.vertices.into_iter().enumerate() {
            if v.id != i {
                return Err(Error::Parse(format!("vertex ids must be dense and ordered; got {} at {i}", v.id)));
            }
            let kind = match v.kind.as_str() {
                "agent" => VertexKind::Agent,
                "randomization" => VertexKind::Randomization,
                other => return Err(Error::Parse(format!("unknown vertex kind {other:?}"))),
            };
            let label: Label = v.label.parse()?;
            vertices.push(Vertex { kind, label });
        }
        let edges = doc
            .edges
            .into_iter()
            .map(|e| Edge {
                source: VertexId(e.src),
                target: VertexId(e.dst),
                payload: e.payload,
                bland: e.bland,
            })
            .collect();
        Mdp::new(vertices, edges, VertexId(doc.sink))
    }
}

pub fn mdp_to_json(mdp: &Mdp) -> String {
    serde_json::to_string_pretty(&MdpDoc::from(mdp)).expect("serializable")
}

pub fn mdp_from_json(text: &str) -> Result<Mdp> {
    let doc: MdpDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Mdp::try_from(doc)
}
