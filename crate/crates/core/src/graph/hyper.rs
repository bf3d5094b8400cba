use super::{FactorGraph, FactorId, VarId};
use crate::Real;

/// One block `I_{a,v}` of a factor, seen as a node of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperNode {
    pub factor: FactorId,
    pub block: usize,
    pub vars: Vec<VarId>,
}

/// The modified factor graph: factors connect only to their hyper-variable
/// nodes, and hyper-variable nodes connect to the variables they contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperView {
    pub nodes: Vec<HyperNode>,
    /// Per factor, indices into `nodes`.
    pub factor_nodes: Vec<Vec<usize>>,
    /// Per variable, indices into `nodes`.
    pub var_nodes: Vec<Vec<usize>>,
}

impl HyperView {
    pub(super) fn new<T: Real>(g: &FactorGraph<T>) -> Self {
        let mut nodes = Vec::new();
        let mut factor_nodes = vec![Vec::new(); g.num_factors()];
        let mut var_nodes = vec![Vec::new(); g.num_variables()];
        for (a, f) in g.factors().iter().enumerate() {
            for (v, block) in g.blocks(a).iter().enumerate() {
                let vars: Vec<VarId> = block.iter().map(|k| f.args[*k]).collect();
                for &i in &vars {
                    var_nodes[i].push(nodes.len());
                }
                factor_nodes[a].push(nodes.len());
                nodes.push(HyperNode {
                    factor: a,
                    block: v,
                    vars,
                });
            }
        }
        Self {
            nodes,
            factor_nodes,
            var_nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Variable-to-hyper-node edges, sorted.
    pub fn edges(&self) -> Vec<(VarId, usize)> {
        let mut out: Vec<_> = self
            .var_nodes
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().map(move |h| (i, *h)))
            .collect();
        out.sort_unstable();
        out
    }
}
