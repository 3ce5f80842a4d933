use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeStatus, Graph, NodeStatus};
use crate::ids::NodeId;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub node_counts: BTreeMap<String, usize>,
    pub edge_counts_by_type: BTreeMap<String, usize>,
    pub edge_counts_by_status: BTreeMap<String, usize>,
    pub weakly_connected_components: usize,
    pub mean_degree: f64,
    pub isolated_expression_ratio: f64,
    /// Fraction of expressions with a path of Accepted edges to some concept.
    pub concept_coverage: f64,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Structural metrics over the undirected view of edges that are neither
/// Rejected nor Superseded.
pub fn connectivity_metrics(graph: &Graph) -> GraphMetrics {
    let mut m = GraphMetrics::default();
    let provisional = graph.expressions().filter(|e| e.status == NodeStatus::Provisional).count();
    m.node_counts.insert("expression".into(), graph.expressions().count());
    m.node_counts.insert("concept".into(), graph.concepts().count());
    m.node_counts.insert("provisional_expression".into(), provisional);
    for e in graph.edges() {
        *m.edge_counts_by_type.entry(format!("{:?}", e.edge_type)).or_default() += 1;
        *m.edge_counts_by_status.entry(format!("{:?}", e.status)).or_default() += 1;
    }

    let ids: Vec<&NodeId> = graph.expressions().map(|e| &e.id).chain(graph.concepts().map(|c| &c.id)).collect();
    let index: HashMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    if n == 0 {
        return m;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut degree = vec![0usize; n];
    let mut active_edges = 0usize;
    let mut accepted_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in graph.edges() {
        if matches!(e.status, EdgeStatus::Rejected | EdgeStatus::Superseded) {
            continue;
        }
        let (a, b) = (index[&e.src], index[&e.dst]);
        active_edges += 1;
        degree[a] += 1;
        degree[b] += 1;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
        if e.status == EdgeStatus::Accepted {
            accepted_adj[a].push(b);
            accepted_adj[b].push(a);
        }
    }
    let roots: HashSet<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    m.weakly_connected_components = roots.len();
    m.mean_degree = 2.0 * active_edges as f64 / n as f64;

    let exprs: Vec<usize> = graph.expressions().map(|e| index[&e.id]).collect();
    if !exprs.is_empty() {
        let isolated = exprs.iter().filter(|&&i| degree[i] == 0).count();
        m.isolated_expression_ratio = isolated as f64 / exprs.len() as f64;

        // Multi-source BFS from every concept over Accepted edges.
        let mut reached = vec![false; n];
        let mut queue: VecDeque<usize> = graph.concepts().map(|c| index[&c.id]).collect();
        for &c in &queue {
            reached[c] = true;
        }
        while let Some(x) = queue.pop_front() {
            for &y in &accepted_adj[x] {
                if !reached[y] {
                    reached[y] = true;
                    queue.push_back(y);
                }
            }
        }
        let covered = exprs.iter().filter(|&&i| reached[i]).count();
        m.concept_coverage = covered as f64 / exprs.len() as f64;
    }
    m
}
