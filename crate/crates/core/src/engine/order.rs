//! Greedy min-fill elimination orders over the interaction (moral) graph.

use std::collections::BTreeSet;

use crate::model::{Network, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder {
    pub order: Vec<VarId>,
    /// Largest clique formed during elimination, minus one.
    pub induced_width: usize,
}

/// Undirected graph over variable ids.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl InteractionGraph {
    pub fn empty(n: usize) -> Self {
        InteractionGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    /// Moral graph: every CPT family becomes a clique.
    pub fn moral(net: &Network) -> Self {
        let scopes: Vec<Vec<VarId>> = net.cpts().iter().map(|c| c.family()).collect();
        Self::from_scopes(net.len(), scopes.iter().map(Vec::as_slice))
    }

    pub fn from_scopes<'a>(n: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> Self {
        let mut g = Self::empty(n);
        for scope in scopes {
            for (i, a) in scope.iter().enumerate() {
                for b in &scope[i + 1..] {
                    g.connect(a.0, b.0);
                }
            }
        }
        g
    }

    fn connect(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn neighbors(&self, v: VarId) -> impl Iterator<Item = VarId> + '_ {
        self.adj[v.0].iter().map(|&i| VarId(i))
    }

    fn fill_in(&self, v: usize) -> usize {
        let nb: Vec<usize> = self.adj[v].iter().copied().collect();
        let mut fill = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !self.adj[a].contains(&b) {
                    fill += 1;
                }
            }
        }
        fill
    }

    /// Removes `v`, cliquing its neighbours; returns its degree at removal.
    fn eliminate(&mut self, v: usize) -> usize {
        let nb: Vec<usize> = std::mem::take(&mut self.adj[v]).into_iter().collect();
        for &a in &nb {
            self.adj[a].remove(&v);
        }
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                self.connect(a, b);
            }
        }
        nb.len()
    }

    /// Eliminates each phase in turn, greedily by fill-in; ties go to the
    /// lowest variable id.
    pub fn min_fill_phases(mut self, phases: &[Vec<VarId>]) -> EliminationOrder {
        let mut order = Vec::new();
        let mut width = 0;
        for phase in phases {
            let mut remaining: BTreeSet<usize> = phase.iter().map(|v| v.0).collect();
            while !remaining.is_empty() {
                let best = *remaining
                    .iter()
                    .min_by_key(|&&v| (self.fill_in(v), v))
                    .expect("non-empty");
                remaining.remove(&best);
                width = width.max(self.eliminate(best));
                order.push(VarId(best));
            }
        }
        EliminationOrder {
            order,
            induced_width: width,
        }
    }

    /// Induced width of eliminating exactly `order`.
    pub fn width_of(mut self, order: &[VarId]) -> usize {
        order.iter().map(|v| self.eliminate(v.0)).max().unwrap_or(0)
    }
}

/// Min-fill order over every variable not in `query`.
pub fn min_fill_order(net: &Network, query: &[VarId]) -> EliminationOrder {
    let rest: Vec<VarId> = net.ids().filter(|v| !query.contains(v)).collect();
    InteractionGraph::moral(net).min_fill_phases(&[rest])
}

/// Min-fill order in which every non-MAP variable is eliminated before any
/// MAP variable. The reported width is the constrained-treewidth estimate.
pub fn constrained_order(net: &Network, map_vars: &[VarId]) -> EliminationOrder {
    let rest: Vec<VarId> = net.ids().filter(|v| !map_vars.contains(v)).collect();
    let mut map: Vec<VarId> = map_vars.to_vec();
    map.sort();
    map.dedup();
    InteractionGraph::moral(net).min_fill_phases(&[rest, map])
}

/// Recomputes the induced width of `order` on the moral graph of `net`.
pub fn induced_width(net: &Network, order: &[VarId]) -> usize {
    InteractionGraph::moral(net).width_of(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn chain_width_is_one() {
        let net = synth::chain_structure(3, 2);
        let o = min_fill_order(&net, &[VarId(2)]);
        assert_eq!(o.induced_width, 1);
        assert_eq!(o.order.len(), 2);
    }

    #[test]
    fn grid_width_recomputes() {
        let net = synth::grid_structure(3, 3, 2);
        let o = min_fill_order(&net, &[]);
        assert!(o.induced_width <= 3);
        assert_eq!(induced_width(&net, &o.order), o.induced_width);
    }

    #[test]
    fn disconnected_nodes_have_width_zero() {
        let net = synth::independent_structure(5, 2);
        assert_eq!(min_fill_order(&net, &[]).induced_width, 0);
    }

    #[test]
    fn constrained_with_no_map_vars_is_plain_min_fill() {
        let net = synth::grid_structure(3, 3, 2);
        assert_eq!(constrained_order(&net, &[]), min_fill_order(&net, &[]));
    }

    #[test]
    fn constrained_puts_map_vars_last() {
        let net = synth::chain_structure(3, 2);
        let o = constrained_order(&net, &[VarId(0), VarId(2)]);
        assert_eq!(o.order[0], VarId(1));
        assert_eq!(induced_width(&net, &o.order), o.induced_width);
        // Eliminating B first connects A and C.
        assert_eq!(o.induced_width, 2);
    }

    #[test]
    fn all_map_vars_matches_unconstrained_width() {
        let net = synth::grid_structure(3, 3, 2);
        let all: Vec<VarId> = net.ids().collect();
        let o = constrained_order(&net, &all);
        assert_eq!(o.order.len(), 9);
        assert_eq!(o.induced_width, min_fill_order(&net, &[]).induced_width);
        assert_eq!(induced_width(&net, &o.order), o.induced_width);
    }

    #[test]
    fn constrained_width_dominates_on_fixtures() {
        for (r, c) in [(3, 3), (4, 4), (3, 5)] {
            let net = synth::grid_structure(r, c, 2);
            let map: Vec<VarId> = (0..c).map(VarId).collect();
            assert!(
                constrained_order(&net, &map).induced_width
                    >= min_fill_order(&net, &[]).induced_width
            );
        }
    }
}
