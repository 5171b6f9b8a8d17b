//! Debug dump: one graph per JSON line, features elided.

use std::io::{self, Write};

use serde::Serialize;

use super::{EdgeType, Graph, NodeType};

#[derive(Serialize)]
struct NodeDump<'a> {
    node_id: usize,
    node_type: NodeType,
    view_id: &'a str,
    segment_index: usize,
    label: usize,
    train_mask: bool,
    eval_mask: bool,
}

#[derive(Serialize)]
struct GraphDump<'a> {
    take_id: &'a str,
    nodes: Vec<NodeDump<'a>>,
    edges: Vec<(usize, usize, EdgeType)>,
}

/// Serialize graphs as JSON lines into `w`.
pub fn write_graph_dump(w: &mut impl Write, graphs: &[Graph]) -> io::Result<()> {
    for g in graphs {
        let dump = GraphDump {
            take_id: &g.take_id,
            nodes: g
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| NodeDump {
                    node_id: i,
                    node_type: n.node_type,
                    view_id: &n.view_id,
                    segment_index: n.segment_index,
                    label: n.label,
                    train_mask: n.train_mask,
                    eval_mask: n.eval_mask,
                })
                .collect(),
            edges: g.edges.iter().map(|e| (e.a, e.b, e.kind)).collect(),
        };
        serde_json::to_writer(&mut *w, &dump)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Dump graphs to a string of JSON lines.
pub fn dump_graphs(graphs: &[Graph]) -> String {
    let mut buf = Vec::new();
    write_graph_dump(&mut buf, graphs).expect("in-memory write cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
