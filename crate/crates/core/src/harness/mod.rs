//! End-to-end pipeline (select edges, delete, parametrize, measure) and the
//! seeded experiment runner built on it.

mod experiment;

pub use experiment::{
    load_network, run_experiment, run_experiment_with, EvidenceMode, ExperimentSpec, IterationSpec, MapVarsSpec, NetworkSource,
};

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;

use crate::deletion::{approximate, DeletedNetwork, DeletionPlan};
use crate::divergence::{exact_kl, kl_bound_from_parts, mutual_information_scores, score_edges, KlBreakdown};
use crate::engine::{constrained_order, EngineConfig};
use crate::error::{Error, Result};
use crate::map::{approximate_map_quality, MapResult};
use crate::model::{Evidence, Network, VarId};
use crate::netio::PlanLine;
use crate::par::Exec;
use crate::param::{run, Initialization, IterationConfig, RunOutcome, TrueMarginals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Selection {
    Rand,
    Guided,
    Mi,
}

impl Selection {
    pub fn tag(self) -> &'static str {
        match self {
            Selection::Rand => "rand",
            Selection::Guided => "guided",
            Selection::Mi => "mi",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "rand" => Some(Selection::Rand),
            "guided" => Some(Selection::Guided),
            "mi" => Some(Selection::Mi),
            _ => None,
        }
    }
}

/// One ancestral sample of every variable.
pub fn forward_sample<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Vec<usize> {
    let mut states = vec![0; net.len()];
    for v in net.topological_order().expect("validated networks are acyclic") {
        let cpt = net.cpt(v);
        let row = cpt
            .parents
            .iter()
            .fold(0, |acc, &p| acc * net.card(p) + states[p.0]);
        let card = net.card(v);
        let probs = &cpt.table[row * card..(row + 1) * card];
        let mut r: f64 = rng.gen();
        let mut pick = card - 1;
        for (s, &p) in probs.iter().enumerate() {
            if r < p {
                pick = s;
                break;
            }
            r -= p;
        }
        // Never pick a zero-probability state through rounding.
        while probs[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        states[v.0] = pick;
    }
    states
}

/// Evidence on `vars`: drawn jointly from the network, or uniformly and
/// independently per variable.
pub fn sample_evidence_on<R: Rng + ?Sized>(net: &Network, vars: &[VarId], mode: EvidenceMode, rng: &mut R) -> Evidence {
    let mut ev = Evidence::new();
    match mode {
        EvidenceMode::LeavesFromJoint => {
            let w = forward_sample(net, rng);
            for &v in vars {
                ev.set(v, w[v.0]);
            }
        }
        EvidenceMode::Random => {
            for &v in vars {
                ev.set(v, rng.gen_range(0..net.card(v)));
            }
        }
    }
    ev
}

/// Evidence on the leaves of `net`.
pub fn sample_evidence<R: Rng + ?Sized>(net: &Network, mode: EvidenceMode, rng: &mut R) -> Evidence {
    sample_evidence_on(net, &net.leaves(), mode, rng)
}

/// Edge orderings of one network and evidence, computed once and reused for
/// every deletion count.
#[derive(Debug, Clone, Default)]
pub struct Rankings {
    pub guided: Option<Vec<crate::divergence::EdgeScore>>,
    pub mi: Option<Vec<crate::divergence::MiScore>>,
}

impl Rankings {
    pub fn compute(net: &Network, ev: &Evidence, selections: &[Selection], exec: Exec) -> Result<Self> {
        let mut r = Rankings::default();
        if selections.contains(&Selection::Guided) {
            r.guided = Some(score_edges(net, ev, exec)?);
        }
        if selections.contains(&Selection::Mi) {
            r.mi = Some(mutual_information_scores(net, ev)?);
        }
        Ok(r)
    }

    /// All edges in deletion order for a ranked selection.
    pub fn order(&self, selection: Selection) -> Option<Vec<(VarId, VarId)>> {
        match selection {
            Selection::Guided => self.guided.as_ref().map(|s| s.iter().map(|e| e.edge).collect()),
            Selection::Mi => self.mi.as_ref().map(|s| s.iter().map(|e| e.edge).collect()),
            Selection::Rand => None,
        }
    }
}

/// Chooses `k` edges (all of them if `k` is larger). Random choices are kept
/// in edge order.
pub fn select_edges<R: Rng + ?Sized>(
    net: &Network,
    selection: Selection,
    k: usize,
    rankings: &Rankings,
    rng: &mut R,
) -> Result<Vec<(VarId, VarId)>> {
    let edges = net.edges();
    let k = k.min(edges.len());
    match selection {
        Selection::Rand => {
            let mut idx = sample(rng, edges.len(), k).into_vec();
            idx.sort_unstable();
            Ok(idx.into_iter().map(|i| edges[i]).collect())
        }
        s => {
            let order = rankings
                .order(s)
                .ok_or_else(|| Error::Config(format!("no {} ranking computed", s.tag())))?;
            Ok(order.into_iter().take(k).collect())
        }
    }
}

/// Constrained width of `net` after deleting `edges`.
pub fn width_after(net: &Network, edges: &[(VarId, VarId)], map_vars: &[VarId]) -> Result<usize> {
    let (_, _, del) = approximate(net, edges)?;
    Ok(constrained_order(&del.net, map_vars).induced_width)
}

/// Shortest prefix of `order` whose deletion brings the constrained width
/// down to `target`.
pub fn edges_for_target_width(
    net: &Network,
    order: &[(VarId, VarId)],
    map_vars: &[VarId],
    target: usize,
) -> Result<Vec<(VarId, VarId)>> {
    for k in 0..=order.len() {
        if width_after(net, &order[..k], map_vars)? <= target {
            return Ok(order[..k].to_vec());
        }
    }
    let all = net.edges();
    let best = width_after(net, &all, map_vars)?;
    if best <= target {
        // The order did not cover every edge; finish with the rest.
        return Ok(all);
    }
    Err(Error::InfeasibleWidth { target, best })
}

/// How the deleted edges are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum DeletionRequest {
    Count(usize),
    Edges(Vec<PlanLine>),
    TargetWidth(usize),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub iteration: IterationConfig,
    pub selection: Selection,
    /// Start from single-edge scored parameters (guided selection only).
    pub warm_start: bool,
    pub map_vars: Vec<VarId>,
    pub engine: EngineConfig,
    pub exact_kl: bool,
    pub map: bool,
}

impl PipelineConfig {
    pub fn new(iteration: IterationConfig, selection: Selection) -> Self {
        PipelineConfig {
            iteration,
            selection,
            warm_start: false,
            map_vars: Vec::new(),
            engine: EngineConfig::default(),
            exact_kl: true,
            map: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Deleted edges of the original network, in plan order.
    pub edges: Vec<(VarId, VarId)>,
    pub augmented: Network,
    /// Approximate network carrying the final parameters.
    pub approx: DeletedNetwork,
    pub outcome: RunOutcome,
    pub kl: KlBreakdown,
    /// Missing when enumeration is out of reach or disabled.
    pub exact_kl: Option<f64>,
    pub marginals: BTreeMap<VarId, Vec<f64>>,
    pub constrained_width: usize,
    pub map: Option<MapResult>,
}

impl PipelineResult {
    pub fn plan(&self) -> &DeletionPlan {
        &self.outcome.plan
    }
}

/// Runs selection, deletion, the fixed-point search, and every measurement.
pub fn run_pipeline<R: Rng + ?Sized>(
    net: &Network,
    ev: &Evidence,
    request: &DeletionRequest,
    cfg: &PipelineConfig,
    rankings: &Rankings,
    rng: &mut R,
) -> Result<PipelineResult> {
    let mut iteration = cfg.iteration;
    let mut file_params = BTreeMap::new();
    let edges = match request {
        DeletionRequest::Count(k) => select_edges(net, cfg.selection, *k, rankings, rng)?,
        DeletionRequest::Edges(lines) => {
            for l in lines {
                if let Some(p) = &l.params {
                    file_params.insert(l.edge, p.clone());
                }
            }
            lines.iter().map(|l| l.edge).collect()
        }
        DeletionRequest::TargetWidth(w) => {
            let order = match cfg.selection {
                Selection::Rand => select_edges(net, Selection::Rand, usize::MAX, rankings, rng)
                    .map(|mut e| {
                        // A random permutation rather than edge order.
                        for i in (1..e.len()).rev() {
                            e.swap(i, rng.gen_range(0..=i));
                        }
                        e
                    })?,
                s => rankings
                    .order(s)
                    .ok_or_else(|| Error::Config(format!("no {} ranking computed", s.tag())))?,
            };
            edges_for_target_width(net, &order, &cfg.map_vars, *w)?
        }
    };

    let (augmented, mut plan, del) = approximate(net, &edges)?;
    let scored: BTreeMap<_, _> = match (&rankings.guided, cfg.warm_start) {
        (Some(s), true) => s.iter().map(|e| (e.edge, e.params.clone())).collect(),
        _ => BTreeMap::new(),
    };
    let mut warm = false;
    for (entry, edge) in plan.entries.iter_mut().zip(&edges) {
        if let Some(p) = file_params.get(edge).or_else(|| scored.get(edge)) {
            entry.params = p.clone();
            warm = true;
        }
    }
    if warm {
        iteration.initialization = Initialization::WarmStart;
    }

    let ev_prime = del.evidence(ev);
    let truth = TrueMarginals::compute(&augmented, &plan, ev)?;
    let outcome = run(&del, &plan, &ev_prime, &iteration, Some(&truth))?;
    if outcome.state.pr_e() <= 0.0 {
        return Err(Error::InconsistentApproximation);
    }
    let approx = del.with_params(&outcome.plan)?;
    let kl = kl_bound_from_parts(&outcome.plan, &truth, outcome.state.pr_e());
    let exact = if cfg.exact_kl {
        match exact_kl(&augmented, &approx, &outcome.plan, ev, &ev_prime) {
            Ok(x) => Some(x),
            Err(e) if e.is_capacity() => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let marginals = crate::deletion::recover_marginals(&approx.net, &outcome.state)?;
    let constrained_width = constrained_order(&approx.net, &cfg.map_vars).induced_width;
    let map = if cfg.map {
        Some(approximate_map_quality(net, &approx, ev, &cfg.map_vars, cfg.engine)?)
    } else {
        None
    };
    Ok(PipelineResult {
        edges,
        augmented,
        approx,
        outcome,
        kl,
        exact_kl: exact,
        marginals,
        constrained_width,
        map,
    })
}
