//! Discrete Bayesian networks: variables, conditional probability tables,
//! evidence, and structural validation.
//!
//! CPT tables use a fixed lexicographic layout: parent states first (first
//! listed parent most significant), child state last and varying fastest.
//! The same layout is used by [`Factor`](crate::factor::Factor) over the
//! scope `parents ++ [child]`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::factor::Factor;

/// Tolerance on CPT row sums.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: S, states: &[&str]) -> Self {
        Variable {
            name: name.into(),
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// A variable with states named `s0, s1, ...`.
    pub fn with_cardinality<S: Into<String>>(name: S, card: usize) -> Self {
        Variable {
            name: name.into(),
            states: (0..card).map(|i| format!("s{i}")).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

impl Cpt {
    pub fn new(child: VarId, parents: Vec<VarId>, table: Vec<f64>) -> Self {
        Cpt {
            child,
            parents,
            table,
        }
    }

    /// `parents ++ [child]`, the scope matching the table layout.
    pub fn family(&self) -> Vec<VarId> {
        let mut f = self.parents.clone();
        f.push(self.child);
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Original,
    Augmented,
    Approximate,
}

/// An equivalence edge `parent -> clone` introduced by augmentation, where
/// `clone` replaced `parent` in the CPT of `child`. Once the equivalence edge
/// is deleted, `soft_evidence` names the observed child added to `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivalenceLink {
    pub parent: VarId,
    pub clone: VarId,
    pub child: VarId,
    pub soft_evidence: Option<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    kind: NetworkKind,
    links: Vec<EquivalenceLink>,
    by_name: HashMap<String, VarId>,
}

impl Network {
    /// Builds an original network. Only the shape needed for safe indexing
    /// is checked here (ids in range, one CPT per variable, table lengths);
    /// semantic rules are reported by [`validate_network`].
    pub fn new(variables: Vec<Variable>, mut cpts: Vec<Cpt>) -> Result<Self> {
        let n = variables.len();
        if cpts.len() != n {
            return Err(Error::Structure(format!(
                "{} variables but {} CPTs",
                n,
                cpts.len()
            )));
        }
        let mut seen = vec![false; n];
        for cpt in &cpts {
            for &v in cpt.parents.iter().chain(std::iter::once(&cpt.child)) {
                if v.0 >= n {
                    return Err(Error::VariableOutOfRange(v.0));
                }
            }
            if std::mem::replace(&mut seen[cpt.child.0], true) {
                return Err(Error::Structure(format!(
                    "variable `{}` has more than one CPT",
                    variables[cpt.child.0].name
                )));
            }
            let expected: usize = cpt
                .family()
                .iter()
                .map(|v| variables[v.0].cardinality())
                .product();
            if cpt.table.len() != expected {
                return Err(Error::Structure(format!(
                    "CPT of `{}` has {} entries, expected {}",
                    variables[cpt.child.0].name,
                    cpt.table.len(),
                    expected
                )));
            }
        }
        cpts.sort_by_key(|c| c.child);
        let by_name = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
        Ok(Network {
            variables,
            cpts,
            kind: NetworkKind::Original,
            links: Vec::new(),
            by_name,
        })
    }

    pub(crate) fn with_kind(mut self, kind: NetworkKind, links: Vec<EquivalenceLink>) -> Self {
        self.kind = kind;
        self.links = links;
        self
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn links(&self) -> &[EquivalenceLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.variables[v.0].name
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn var(&self, name: &str) -> Result<VarId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn card(&self, v: VarId) -> usize {
        self.variables[v.0].cardinality()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, v: VarId) -> &Cpt {
        &self.cpts[v.0]
    }

    pub(crate) fn cpt_mut(&mut self, v: VarId) -> &mut Cpt {
        &mut self.cpts[v.0]
    }

    /// Replaces a CPT table in place, keeping the family.
    pub fn set_table(&mut self, v: VarId, table: Vec<f64>) -> Result<()> {
        if table.len() != self.cpts[v.0].table.len() {
            return Err(Error::Structure(format!(
                "replacement table for `{}` has wrong length",
                self.name(v)
            )));
        }
        self.cpts[v.0].table = table;
        Ok(())
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.cpts[v.0].parents
    }

    pub fn children(&self, v: VarId) -> Vec<VarId> {
        self.cpts
            .iter()
            .filter(|c| c.parents.contains(&v))
            .map(|c| c.child)
            .collect()
    }

    /// All `parent -> child` edges, grouped by child in declaration order and
    /// then by parent position.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        self.cpts
            .iter()
            .flat_map(|c| c.parents.iter().map(move |&p| (p, c.child)))
            .collect()
    }

    pub fn roots(&self) -> Vec<VarId> {
        self.ids().filter(|&v| self.parents(v).is_empty()).collect()
    }

    pub fn leaves(&self) -> Vec<VarId> {
        let mut has_child = vec![false; self.len()];
        for c in &self.cpts {
            for p in &c.parents {
                has_child[p.0] = true;
            }
        }
        self.ids().filter(|v| !has_child[v.0]).collect()
    }

    /// Kahn's algorithm with ties broken by declaration order; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.cpts.iter().map(|c| c.parents.len()).collect();
        let mut children = vec![Vec::new(); n];
        for c in &self.cpts {
            for p in &c.parents {
                children[p.0].push(c.child);
            }
        }
        let mut ready: std::collections::BTreeSet<VarId> =
            self.ids().filter(|v| indegree[v.0] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v.0] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn cpt_factor(&self, v: VarId) -> Factor {
        let cpt = &self.cpts[v.0];
        let scope = cpt.family();
        let cards = scope.iter().map(|&u| self.card(u)).collect();
        Factor::from_parts_unchecked(scope, cards, cpt.table.clone())
    }

    pub fn is_clone(&self, v: VarId) -> bool {
        self.links.iter().any(|l| l.clone == v)
    }

    pub fn is_soft_evidence(&self, v: VarId) -> bool {
        self.links.iter().any(|l| l.soft_evidence == Some(v))
    }

    /// Variables of the original network, i.e. neither clones nor
    /// soft-evidence nodes.
    pub fn original_variables(&self) -> Vec<VarId> {
        self.ids()
            .filter(|&v| !self.is_clone(v) && !self.is_soft_evidence(v))
            .collect()
    }

    /// Largest CPT family size minus one; the induced width of a fully
    /// disconnected approximation.
    pub fn max_family_width(&self) -> usize {
        self.cpts
            .iter()
            .map(|c| c.parents.len())
            .max()
            .unwrap_or(0)
    }
}

/// Observed states keyed by variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, v: VarId, state: usize) {
        self.assignments.insert(v, state);
    }

    pub fn with(mut self, v: VarId, state: usize) -> Self {
        self.set(v, state);
        self
    }

    pub fn remove(&mut self, v: VarId) -> Option<usize> {
        self.assignments.remove(&v)
    }

    pub fn get(&self, v: VarId) -> Option<usize> {
        self.assignments.get(&v).copied()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.assignments.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.assignments.iter().map(|(&v, &s)| (v, s))
    }

    /// Builds evidence from `(variable, state)` labels.
    pub fn from_labels(net: &Network, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut ev = Evidence::new();
        for &(var, state) in pairs {
            let v = net.var(var)?;
            let s = net
                .variable(v)
                .state_index(state)
                .ok_or_else(|| Error::UnknownState {
                    var: var.to_string(),
                    state: state.to_string(),
                })?;
            ev.set(v, s);
        }
        Ok(ev)
    }

    pub fn check(&self, net: &Network) -> Result<()> {
        for (v, s) in self.iter() {
            if v.0 >= net.len() {
                return Err(Error::VariableOutOfRange(v.0));
            }
            if s >= net.card(v) {
                return Err(Error::UnknownState {
                    var: net.name(v).to_string(),
                    state: s.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Dense view indexed by variable id.
    pub fn dense(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (v, s) in self.iter() {
            if v.0 < n {
                out[v.0] = Some(s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    UniqueName,
    UniqueStates,
    Cardinality,
    Probability,
    Normalization,
    Acyclicity,
    Equivalence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub variable: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{:?}]: {}", self.variable, self.rule, self.detail)
    }
}

/// Checks every network and CPT rule; an empty list means the network is
/// well formed.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |v: &str, rule, detail: String| {
        out.push(Violation {
            variable: v.to_string(),
            rule,
            detail,
        })
    };

    let mut names = HashSet::new();
    for var in net.variables() {
        if !names.insert(var.name.as_str()) {
            push(&var.name, Rule::UniqueName, "duplicate variable name".into());
        }
        let mut labels = HashSet::new();
        for s in &var.states {
            if !labels.insert(s.as_str()) {
                push(&var.name, Rule::UniqueStates, format!("duplicate state `{s}`"));
            }
        }
        if var.cardinality() < 2 {
            push(
                &var.name,
                Rule::Cardinality,
                format!("{} states, need at least 2", var.cardinality()),
            );
        }
    }

    for cpt in net.cpts() {
        let name = net.name(cpt.child);
        if cpt.table.iter().any(|&p| !p.is_finite() || !(0.0..=1.0).contains(&p)) {
            push(name, Rule::Probability, "entry outside [0, 1]".into());
        }
        let card = net.card(cpt.child);
        for (row, chunk) in cpt.table.chunks(card.max(1)).enumerate() {
            let s: f64 = chunk.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                push(
                    name,
                    Rule::Normalization,
                    format!("row {row} sums to {s}"),
                );
            }
        }
    }

    if net.topological_order().is_none() {
        let on_cycle = first_cycle_member(net);
        push(net.name(on_cycle), Rule::Acyclicity, "graph has a directed cycle".into());
    }

    for link in net.links() {
        // Deleted links no longer carry an equivalence CPT.
        if link.soft_evidence.is_some() {
            continue;
        }
        let cpt = net.cpt(link.clone);
        let card = net.card(link.parent);
        let exact = cpt.parents == [link.parent]
            && cpt.table.iter().enumerate().all(|(i, &p)| {
                let (u, u2) = (i / card, i % card);
                p == if u == u2 { 1.0 } else { 0.0 }
            });
        if !exact {
            push(
                net.name(link.clone),
                Rule::Equivalence,
                "clone CPT is not the 0/1 identity on its parent".into(),
            );
        }
    }
    out
}

fn first_cycle_member(net: &Network) -> VarId {
    // Peel sources repeatedly; whatever survives lies on or downstream of a cycle.
    let n = net.len();
    let mut indegree: Vec<usize> = net.cpts().iter().map(|c| c.parents.len()).collect();
    let mut removed = vec![false; n];
    loop {
        let Some(v) = (0..n).find(|&i| !removed[i] && indegree[i] == 0) else {
            break;
        };
        removed[v] = true;
        for c in net.cpts() {
            if c.parents.contains(&VarId(v)) {
                indegree[c.child.0] -= c.parents.iter().filter(|&&p| p == VarId(v)).count();
            }
        }
    }
    VarId((0..n).find(|&i| !removed[i]).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Network {
        Network::new(
            vec![Variable::new("A", &["a0", "a1"]), Variable::new("B", &["b0", "b1"])],
            vec![
                Cpt::new(VarId(0), vec![], vec![0.3, 0.7]),
                Cpt::new(VarId(1), vec![VarId(0)], vec![0.9, 0.1, 0.2, 0.8]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn well_formed_chain_has_no_violations() {
        assert!(validate_network(&chain()).is_empty());
    }

    #[test]
    fn short_row_is_a_normalization_violation() {
        let mut net = chain();
        net.set_table(VarId(1), vec![0.8, 0.1, 0.2, 0.8]).unwrap();
        let v = validate_network(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Normalization);
        assert_eq!(v[0].variable, "B");
    }

    #[test]
    fn two_cycle_is_one_acyclicity_violation() {
        let net = Network::new(
            vec![Variable::new("A", &["a0", "a1"]), Variable::new("B", &["b0", "b1"])],
            vec![
                Cpt::new(VarId(0), vec![VarId(1)], vec![0.5, 0.5, 0.5, 0.5]),
                Cpt::new(VarId(1), vec![VarId(0)], vec![0.5, 0.5, 0.5, 0.5]),
            ],
        )
        .unwrap();
        let v = validate_network(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Acyclicity);
    }

    #[test]
    fn wrong_table_length_is_rejected_at_construction() {
        let err = Network::new(
            vec![Variable::new("A", &["a0", "a1"])],
            vec![Cpt::new(VarId(0), vec![], vec![1.0])],
        );
        assert!(matches!(err, Err(Error::Structure(_))));
    }

    #[test]
    fn topology_helpers() {
        let net = chain();
        assert_eq!(net.roots(), vec![VarId(0)]);
        assert_eq!(net.leaves(), vec![VarId(1)]);
        assert_eq!(net.edges(), vec![(VarId(0), VarId(1))]);
        assert_eq!(net.topological_order().unwrap(), vec![VarId(0), VarId(1)]);
    }

    #[test]
    fn evidence_from_labels() {
        let net = chain();
        let ev = Evidence::from_labels(&net, &[("B", "b1")]).unwrap();
        assert_eq!(ev.get(VarId(1)), Some(1));
        assert!(Evidence::from_labels(&net, &[("B", "zz")]).is_err());
        assert!(Evidence::from_labels(&net, &[("Q", "b1")]).is_err());
    }
}
