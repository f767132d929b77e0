//! Network transformations for edge deletion.
//!
//! [`augment`] replaces each chosen edge `U -> X` by a chain `U -> U' -> X`
//! through a 0/1 equivalence CPT; the result has the same distribution over
//! the original variables. [`delete_edges`] then removes equivalence edges
//! `U -> U'`: the clone `U'` becomes a root with prior `PM`, and `U` gains an
//! observed binary child `S'` whose CPT column is `SE`.
//!
//! Variable ids are stable across the pipeline: clones are appended after the
//! original variables and soft-evidence nodes after the clones, so an id
//! refers to the same variable in `N*`, `N` and `N'`.

use std::collections::BTreeMap;

use crate::engine::EngineState;
use crate::error::{Error, Result};
use crate::model::{Cpt, EquivalenceLink, Evidence, Network, NetworkKind, VarId, Variable};

/// Tolerance on `PM` normalization.
pub const PM_TOL: f64 = 1e-12;

/// State labels of soft-evidence nodes; the first one is always observed.
pub const SOFT_EVIDENCE_STATES: [&str; 2] = ["on", "off"];

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeParams {
    /// Prior of the clone, `θ_{u'}`.
    pub pm: Vec<f64>,
    /// Soft-evidence likelihood `θ_{s'|u}` of the observed state.
    pub se: Vec<f64>,
}

impl EdgeParams {
    pub fn uniform(card: usize) -> Self {
        EdgeParams {
            pm: vec![1.0 / card as f64; card],
            se: vec![1.0 / card as f64; card],
        }
    }

    /// Checks the parameter invariants. `se` entries are clamped into
    /// `[0, 1]` so the soft-evidence CPT stays a valid table.
    pub fn new(pm: Vec<f64>, se: Vec<f64>) -> Result<Self> {
        let bad = |reason: &str| Error::EdgeParams {
            edge: "?".into(),
            reason: reason.into(),
        };
        if pm.len() != se.len() || pm.is_empty() {
            return Err(bad("pm and se must have the same positive length"));
        }
        if pm.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(bad("pm entries must be finite and nonnegative"));
        }
        if (pm.iter().sum::<f64>() - 1.0).abs() > PM_TOL {
            return Err(bad("pm must sum to 1"));
        }
        if se.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(bad("se entries must be finite and nonnegative"));
        }
        if se.iter().all(|&x| x == 0.0) {
            return Err(bad("se must not be all zero"));
        }
        let se = se.into_iter().map(|x| x.min(1.0)).collect();
        Ok(EdgeParams { pm, se })
    }

    pub fn card(&self) -> usize {
        self.pm.len()
    }

    /// Largest absolute entry difference.
    pub fn distance(&self, other: &EdgeParams) -> f64 {
        self.pm
            .iter()
            .zip(&other.pm)
            .chain(self.se.iter().zip(&other.se))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One deleted equivalence edge `parent -> clone` of an augmented network.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub parent: VarId,
    pub clone: VarId,
    pub params: EdgeParams,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeletionPlan {
    pub entries: Vec<PlanEntry>,
}

impl DeletionPlan {
    pub fn new(entries: Vec<PlanEntry>) -> Self {
        DeletionPlan { entries }
    }

    /// Uniform parameters for every (undeleted) equivalence edge of `net`.
    pub fn uniform(net: &Network) -> Self {
        DeletionPlan {
            entries: net
                .links()
                .iter()
                .filter(|l| l.soft_evidence.is_none())
                .map(|l| PlanEntry {
                    parent: l.parent,
                    clone: l.clone,
                    params: EdgeParams::uniform(net.card(l.parent)),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest parameter change between two plans over the same edges.
    pub fn distance(&self, other: &DeletionPlan) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.params.distance(&b.params))
            .fold(0.0, f64::max)
    }
}

/// Replaces each edge `U -> X` with `U -> U' -> X`.
pub fn augment(net: &Network, edges: &[(VarId, VarId)]) -> Result<Network> {
    if net.kind() == NetworkKind::Approximate {
        return Err(Error::Structure("cannot augment an approximate network".into()));
    }
    for (i, &(p, c)) in edges.iter().enumerate() {
        if p.0 >= net.len() || c.0 >= net.len() {
            return Err(Error::VariableOutOfRange(p.0.max(c.0)));
        }
        if edges[..i].contains(&(p, c)) {
            return Err(Error::DuplicateEdge {
                parent: net.name(p).into(),
                child: net.name(c).into(),
            });
        }
        if !net.parents(c).contains(&p) {
            return Err(Error::NotAnEdge {
                parent: net.name(p).into(),
                child: net.name(c).into(),
            });
        }
    }
    if edges.is_empty() {
        return Ok(net.clone());
    }

    let mut variables = net.variables().to_vec();
    let mut cpts: Vec<Cpt> = net.cpts().to_vec();
    let mut links = net.links().to_vec();
    for &(p, c) in edges {
        let k = links.len();
        let name = format!("{}__clone{}", net.name(p), k);
        if variables.iter().any(|v| v.name == name) {
            return Err(Error::Structure(format!("generated name `{name}` collides with an existing variable")));
        }
        let clone = VarId(variables.len());
        let card = net.card(p);
        variables.push(Variable {
            name,
            states: net.variable(p).states.clone(),
        });
        let mut identity = vec![0.0; card * card];
        for u in 0..card {
            identity[u * card + u] = 1.0;
        }
        cpts.push(Cpt::new(clone, vec![p], identity));
        let slot = cpts[c.0]
            .parents
            .iter_mut()
            .find(|q| **q == p)
            .expect("edge checked above");
        *slot = clone;
        links.push(EquivalenceLink {
            parent: p,
            clone,
            child: c,
            soft_evidence: None,
        });
    }
    Ok(Network::new(variables, cpts)?.with_kind(NetworkKind::Augmented, links))
}

/// An approximate network `N'` together with its soft-evidence nodes.
#[derive(Debug, Clone)]
pub struct DeletedNetwork {
    pub net: Network,
    /// Soft-evidence node of each plan entry, in plan order.
    pub soft_evidence: Vec<VarId>,
}

impl DeletedNetwork {
    /// `e' = e ∪ {s' = on}` over every deleted edge.
    pub fn evidence(&self, ev: &Evidence) -> Evidence {
        let mut out = ev.clone();
        for &s in &self.soft_evidence {
            out.set(s, 0);
        }
        out
    }

    /// Rewrites the clone priors and soft-evidence tables from `plan`.
    pub fn set_params(&mut self, plan: &DeletionPlan) -> Result<()> {
        if plan.len() != self.soft_evidence.len() {
            return Err(Error::Structure("plan does not match the deleted edges".into()));
        }
        for (entry, &s) in plan.entries.iter().zip(&self.soft_evidence) {
            write_params(&mut self.net, entry, s)?;
        }
        Ok(())
    }

    pub fn with_params(&self, plan: &DeletionPlan) -> Result<DeletedNetwork> {
        let mut out = self.clone();
        out.set_params(plan)?;
        Ok(out)
    }
}

fn write_params(net: &mut Network, entry: &PlanEntry, s: VarId) -> Result<()> {
    let card = net.card(entry.parent);
    let p = &entry.params;
    if p.pm.len() != card || p.se.len() != card {
        return Err(Error::EdgeParams {
            edge: format!("{} -> {}", net.name(entry.parent), net.name(entry.clone)),
            reason: format!("expected {card} entries"),
        });
    }
    net.cpt_mut(entry.clone).table = p.pm.clone();
    net.cpt_mut(s).table = p.se.iter().flat_map(|&x| [x, 1.0 - x]).collect();
    Ok(())
}

/// Deletes the plan's equivalence edges from the augmented network `net`.
pub fn delete_edges(net: &Network, plan: &DeletionPlan) -> Result<DeletedNetwork> {
    if plan.is_empty() {
        return Ok(DeletedNetwork {
            net: net.clone(),
            soft_evidence: Vec::new(),
        });
    }
    let mut links = net.links().to_vec();
    let mut variables = net.variables().to_vec();
    let mut cpts = net.cpts().to_vec();
    let mut soft_evidence = Vec::with_capacity(plan.len());
    for entry in &plan.entries {
        let not_equiv = || Error::NotEquivalenceEdge {
            parent: net.name(entry.parent).into(),
            child: net.name(entry.clone).into(),
        };
        let k = links
            .iter()
            .position(|l| l.parent == entry.parent && l.clone == entry.clone)
            .ok_or_else(not_equiv)?;
        if links[k].soft_evidence.is_some() {
            return Err(not_equiv());
        }
        let name = format!("{}__se{}", net.name(entry.parent), k);
        if variables.iter().any(|v| v.name == name) {
            return Err(Error::Structure(format!("generated name `{name}` collides with an existing variable")));
        }
        let s = VarId(variables.len());
        variables.push(Variable::new(name, &SOFT_EVIDENCE_STATES));
        let card = net.card(entry.parent);
        cpts[entry.clone.0] = Cpt::new(entry.clone, vec![], vec![1.0 / card as f64; card]);
        cpts.push(Cpt::new(s, vec![entry.parent], vec![0.5; 2 * card]));
        links[k].soft_evidence = Some(s);
        soft_evidence.push(s);
    }
    let mut out = DeletedNetwork {
        net: Network::new(variables, cpts)?.with_kind(NetworkKind::Approximate, links),
        soft_evidence,
    };
    out.set_params(plan)?;
    Ok(out)
}

/// Posterior marginals of the original variables, read from a state compiled
/// on `N'` with `e'`. Clones and soft-evidence nodes are left out.
pub fn recover_marginals(nprime: &Network, st: &EngineState) -> Result<BTreeMap<VarId, Vec<f64>>> {
    nprime
        .original_variables()
        .into_iter()
        .map(|v| Ok((v, st.posterior_marginal(v)?)))
        .collect()
}

/// `(U, X)` in the original network for each plan entry.
pub fn original_edges(net: &Network, plan: &DeletionPlan) -> Vec<(VarId, VarId)> {
    plan.entries
        .iter()
        .map(|e| {
            let link = net
                .links()
                .iter()
                .find(|l| l.clone == e.clone)
                .expect("plan entries refer to links");
            (link.parent, link.child)
        })
        .collect()
}

/// Augments `net` with `edges` and deletes all of them with uniform
/// parameters.
pub fn approximate(net: &Network, edges: &[(VarId, VarId)]) -> Result<(Network, DeletionPlan, DeletedNetwork)> {
    let augmented = augment(net, edges)?;
    let plan = DeletionPlan::uniform(&augmented);
    let deleted = delete_edges(&augmented, &plan)?;
    Ok((augmented, plan, deleted))
}
