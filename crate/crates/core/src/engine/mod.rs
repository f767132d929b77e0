//! Exact inference by variable elimination.
//!
//! [`EngineState::compile`] reduces every CPT by the evidence, picks a
//! min-fill order, and runs bucket elimination followed by a downward pass
//! over the resulting bucket tree. After that, evidence probability,
//! single-variable posteriors, and derivatives with respect to any CPT entry
//! are read off the cached messages without further elimination.
//!
//! CPT derivatives are computed as the probability of evidence with the CPT
//! replaced by an indicator, so they are exact at zero-valued entries.

mod order;

use std::cell::Cell;

pub use order::{
    constrained_order, induced_width, min_fill_order, EliminationOrder, InteractionGraph,
};

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::model::{Cpt, Evidence, Network, VarId};

pub const DEFAULT_WIDTH_CAP: usize = 25;

/// Relative tolerance for treating two MAP values as a tie.
const MAP_TIE_TOL: f64 = 1e-12;

thread_local! {
    static COMPILES: Cell<u64> = const { Cell::new(0) };
}

/// Number of engine compilations performed on the current thread.
pub fn compile_count() -> u64 {
    COMPILES.with(Cell::get)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub width_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            width_cap: DEFAULT_WIDTH_CAP,
        }
    }
}

#[derive(Debug, Clone)]
struct Bucket {
    var: VarId,
    cluster: Vec<VarId>,
    parent: Option<usize>,
    children: Vec<usize>,
    local: Vec<usize>,
}

/// Compiled network + evidence.
#[derive(Debug, Clone)]
pub struct EngineState {
    net: Network,
    evidence: Evidence,
    observed: Vec<Option<usize>>,
    order: EliminationOrder,
    factors: Vec<Factor>,
    /// Bucket holding each factor, `None` for fully observed families.
    home: Vec<Option<usize>>,
    buckets: Vec<Bucket>,
    root_local: Vec<usize>,
    root_children: Vec<usize>,
    up: Vec<Factor>,
    down: Vec<Factor>,
    position: Vec<Option<usize>>,
    pr_e: f64,
    config: EngineConfig,
}

/// `d[parents, child] = ∂Pr(e)/∂θ_{child|parents}` in the CPT layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CptDerivatives {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

impl CptDerivatives {
    /// `Σ θ·d`, which equals `Pr(e)` for any CPT.
    pub fn euler_sum(&self, cpt: &Cpt) -> f64 {
        cpt.table.iter().zip(&self.table).map(|(t, d)| t * d).sum()
    }

    pub fn child_card(&self) -> usize {
        *self.cards.last().expect("family is never empty")
    }

    /// Row of derivatives for one parent configuration (row index in the
    /// CPT layout).
    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.child_card();
        &self.table[row * c..(row + 1) * c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSolution {
    /// States of the MAP variables, in the order they were requested.
    pub assignment: Vec<usize>,
    /// `Pr(m*, e)`.
    pub value: f64,
    /// Set when `Pr(e) = 0`; the assignment is then arbitrary.
    pub degenerate: bool,
}

impl EngineState {
    pub fn compile(net: &Network, ev: &Evidence) -> Result<Self> {
        Self::compile_with(net, ev, EngineConfig::default())
    }

    pub fn compile_with(net: &Network, ev: &Evidence, config: EngineConfig) -> Result<Self> {
        Self::build(net, ev, None, config)
    }

    /// Compiles with a caller-supplied elimination order over the unobserved
    /// variables.
    pub fn compile_with_order(net: &Network, ev: &Evidence, order: &[VarId]) -> Result<Self> {
        Self::build(net, ev, Some(order), EngineConfig::default())
    }

    fn build(
        net: &Network,
        ev: &Evidence,
        order: Option<&[VarId]>,
        config: EngineConfig,
    ) -> Result<Self> {
        COMPILES.with(|c| c.set(c.get() + 1));
        ev.check(net)?;
        let n = net.len();
        let observed = ev.dense(n);
        let factors: Vec<Factor> = net
            .ids()
            .map(|v| net.cpt_factor(v).reduce(&observed))
            .collect();
        let free: Vec<VarId> = net.ids().filter(|v| observed[v.0].is_none()).collect();

        let order = match order {
            Some(o) => {
                let mut sorted = o.to_vec();
                sorted.sort();
                if sorted != free {
                    return Err(Error::Config(
                        "elimination order must cover exactly the unobserved variables".into(),
                    ));
                }
                let g = InteractionGraph::from_scopes(n, factors.iter().map(Factor::scope));
                EliminationOrder {
                    order: o.to_vec(),
                    induced_width: g.width_of(o),
                }
            }
            None => InteractionGraph::from_scopes(n, factors.iter().map(Factor::scope))
                .min_fill_phases(&[free]),
        };
        if order.induced_width > config.width_cap {
            return Err(Error::WidthCap {
                width: order.induced_width,
                cap: config.width_cap,
            });
        }

        let mut position = vec![None; n];
        for (i, v) in order.order.iter().enumerate() {
            position[v.0] = Some(i);
        }
        let first = |scope: &[VarId]| scope.iter().filter_map(|v| position[v.0]).min();

        let m = order.order.len();
        let mut buckets: Vec<Bucket> = order
            .order
            .iter()
            .map(|&var| Bucket {
                var,
                cluster: Vec::new(),
                parent: None,
                children: Vec::new(),
                local: Vec::new(),
            })
            .collect();
        let mut root_local = Vec::new();
        let mut root_children = Vec::new();
        let mut home = vec![None; n];
        for (i, f) in factors.iter().enumerate() {
            match first(f.scope()) {
                Some(b) => {
                    buckets[b].local.push(i);
                    home[i] = Some(b);
                }
                None => root_local.push(i),
            }
        }

        // Symbolic pass: cluster scopes and tree shape.
        for b in 0..m {
            let mut cluster: Vec<VarId> = Vec::new();
            let mut add = |scope: &[VarId]| {
                for v in scope {
                    if !cluster.contains(v) {
                        cluster.push(*v);
                    }
                }
            };
            for &i in &buckets[b].local {
                add(factors[i].scope());
            }
            for c in buckets[b].children.clone() {
                let sep: Vec<VarId> = buckets[c]
                    .cluster
                    .iter()
                    .copied()
                    .filter(|&v| v != buckets[c].var)
                    .collect();
                add(&sep);
            }
            let var = buckets[b].var;
            if !cluster.contains(&var) {
                cluster.push(var);
            }
            let sep: Vec<VarId> = cluster.iter().copied().filter(|&v| v != var).collect();
            buckets[b].cluster = cluster;
            match first(&sep) {
                Some(p) => {
                    debug_assert!(p > b);
                    buckets[b].parent = Some(p);
                    buckets[p].children.push(b);
                }
                None => root_children.push(b),
            }
        }

        let mut state = EngineState {
            net: net.clone(),
            evidence: ev.clone(),
            observed,
            order,
            factors,
            home,
            buckets,
            root_local,
            root_children,
            up: Vec::new(),
            down: Vec::new(),
            position,
            pr_e: 0.0,
            config,
        };
        state.propagate()?;
        Ok(state)
    }

    fn propagate(&mut self) -> Result<()> {
        let m = self.buckets.len();
        let mut up: Vec<Factor> = Vec::with_capacity(m);
        for b in 0..m {
            let mut acc = Factor::scalar(1.0);
            for &i in &self.buckets[b].local {
                acc = acc.product(&self.factors[i])?;
            }
            for &c in &self.buckets[b].children {
                acc = acc.product(&up[c])?;
            }
            up.push(acc.sum_out(self.buckets[b].var));
        }
        let root_locals: f64 = self.root_local.iter().map(|&i| self.factors[i].values()[0]).product();
        let child_ups: Vec<f64> = self.root_children.iter().map(|&c| up[c].values()[0]).collect();
        self.pr_e = root_locals * child_ups.iter().product::<f64>();

        let mut down = vec![Factor::scalar(1.0); m];
        for (k, &c) in self.root_children.iter().enumerate() {
            let others: f64 = child_ups
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, x)| x)
                .product();
            down[c] = Factor::scalar(root_locals * others);
        }
        for p in (0..m).rev() {
            let children = &self.buckets[p].children;
            if children.is_empty() {
                continue;
            }
            let mut base = down[p].clone();
            for &i in &self.buckets[p].local {
                base = base.product(&self.factors[i])?;
            }
            for &c in children {
                let mut acc = base.clone();
                for &o in children {
                    if o != c {
                        acc = acc.product(&up[o])?;
                    }
                }
                let sep: Vec<VarId> = self.buckets[c]
                    .cluster
                    .iter()
                    .copied()
                    .filter(|&v| v != self.buckets[c].var)
                    .collect();
                down[c] = acc.marginalize(&sep);
            }
        }
        self.up = up;
        self.down = down;
        Ok(())
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn order(&self) -> &EliminationOrder {
        &self.order
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    /// Probability of the evidence.
    pub fn pr_e(&self) -> f64 {
        self.pr_e
    }

    fn require_consistent(&self) -> Result<()> {
        if self.pr_e > 0.0 {
            Ok(())
        } else {
            Err(Error::InconsistentEvidence)
        }
    }

    /// Product of everything attached to bucket `b` except local factor `skip`.
    fn bucket_potential(&self, b: usize, skip: Option<usize>) -> Result<Factor> {
        let mut acc = self.down[b].clone();
        for &i in &self.buckets[b].local {
            if Some(i) != skip {
                acc = acc.product(&self.factors[i])?;
            }
        }
        for &c in &self.buckets[b].children {
            acc = acc.product(&self.up[c])?;
        }
        Ok(acc)
    }

    pub fn posterior_marginal(&self, v: VarId) -> Result<Vec<f64>> {
        self.require_consistent()?;
        if let Some(s) = self.observed[v.0] {
            let mut p = vec![0.0; self.net.card(v)];
            p[s] = 1.0;
            return Ok(p);
        }
        let b = self.position[v.0].expect("unobserved variables are eliminated");
        let belief = self.bucket_potential(b, None)?.marginalize(&[v]);
        Ok(normalize(belief.into_values()))
    }

    /// Posterior marginals of every variable, indexed by id.
    pub fn all_marginals(&self) -> Result<Vec<Vec<f64>>> {
        self.net.ids().map(|v| self.posterior_marginal(v)).collect()
    }

    /// Joint posterior over `(a, b)`, row-major with `a` most significant.
    pub fn pairwise_marginal(&self, a: VarId, b: VarId) -> Result<Vec<f64>> {
        self.require_consistent()?;
        let ca = self.net.card(a);
        if a == b {
            let p = self.posterior_marginal(a)?;
            let mut out = vec![0.0; ca * ca];
            for (i, x) in p.iter().enumerate() {
                out[i * ca + i] = *x;
            }
            return Ok(out);
        }
        if self.observed[a.0].is_some() || self.observed[b.0].is_some() {
            let pa = self.posterior_marginal(a)?;
            let pb = self.posterior_marginal(b)?;
            return Ok(pa.iter().flat_map(|x| pb.iter().map(move |y| x * y)).collect());
        }
        let joint = match self
            .buckets
            .iter()
            .position(|bk| bk.cluster.contains(&a) && bk.cluster.contains(&b))
        {
            Some(k) => self.bucket_potential(k, None)?.marginalize(&[a, b]),
            None => self.eliminate_to(&[a, b])?,
        };
        Ok(normalize(joint.permuted(&[a, b])?.into_values()))
    }

    /// Sums every factor down to `keep` with a fresh min-fill order.
    fn eliminate_to(&self, keep: &[VarId]) -> Result<Factor> {
        let rest: Vec<VarId> = self
            .order
            .order
            .iter()
            .copied()
            .filter(|v| !keep.contains(v))
            .collect();
        let g = InteractionGraph::from_scopes(self.net.len(), self.factors.iter().map(Factor::scope));
        let order = g.min_fill_phases(&[rest]);
        if order.induced_width > self.config.width_cap {
            return Err(Error::WidthCap {
                width: order.induced_width,
                cap: self.config.width_cap,
            });
        }
        eliminate(self.factors.clone(), &order.order, &[])
    }

    /// Derivatives of `Pr(e)` with respect to every entry of the CPT of `v`.
    pub fn cpt_derivatives(&self, v: VarId) -> Result<CptDerivatives> {
        let cpt = self.net.cpt(v);
        let family = cpt.family();
        let cards: Vec<usize> = family.iter().map(|&u| self.net.card(u)).collect();
        let len: usize = cards.iter().product();
        let mut table = vec![0.0; len];

        let reduced_scope = self.factors[v.0].scope().to_vec();
        let g = match self.home[v.0] {
            Some(b) => {
                // The rest of the bucket may not mention every family member.
                let reduced_cards = self.factors[v.0].cards().to_vec();
                self.bucket_potential(b, Some(v.0))?
                    .product(&Factor::ones(reduced_scope.clone(), reduced_cards))?
                    .marginalize(&reduced_scope)
                    .permuted(&reduced_scope)?
            },
            None => {
                let mut x: f64 = self
                    .root_local
                    .iter()
                    .filter(|&&i| i != v.0)
                    .map(|&i| self.factors[i].values()[0])
                    .product();
                for &c in &self.root_children {
                    x *= self.up[c].values()[0];
                }
                Factor::scalar(x)
            }
        };

        // Scatter the reduced table back into the full family layout.
        let mut strides = vec![1usize; family.len()];
        for i in (0..family.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        let mut base = 0;
        let mut free_strides = Vec::new();
        let mut free_cards = Vec::new();
        for (i, u) in family.iter().enumerate() {
            match self.observed[u.0] {
                Some(s) => base += s * strides[i],
                None => {
                    free_strides.push(strides[i]);
                    free_cards.push(cards[i]);
                }
            }
        }
        let mut assign = vec![0usize; free_cards.len()];
        let mut k = base;
        for &x in g.values() {
            table[k] = x;
            for l in (0..free_cards.len()).rev() {
                assign[l] += 1;
                if assign[l] < free_cards[l] {
                    k += free_strides[l];
                    break;
                }
                k -= (free_cards[l] - 1) * free_strides[l];
                assign[l] = 0;
            }
        }
        Ok(CptDerivatives {
            child: v,
            parents: cpt.parents.clone(),
            cards,
            table,
        })
    }

    /// Exact MAP over `map_vars` by constrained elimination. Ties resolve to
    /// the lexicographically smallest instantiation (in `map_vars` order).
    pub fn exact_map(&self, map_vars: &[VarId]) -> Result<MapSolution> {
        let free_map: Vec<VarId> = map_vars
            .iter()
            .copied()
            .filter(|v| self.observed[v.0].is_none())
            .collect();
        let rest: Vec<VarId> = self
            .order
            .order
            .iter()
            .copied()
            .filter(|v| !free_map.contains(v))
            .collect();
        let g = InteractionGraph::from_scopes(self.net.len(), self.factors.iter().map(Factor::scope));
        let order = g.min_fill_phases(&[rest.clone(), free_map.clone()]);
        if order.induced_width > self.config.width_cap {
            return Err(Error::WidthCap {
                width: order.induced_width,
                cap: self.config.width_cap,
            });
        }
        let map_order: Vec<VarId> = order.order[rest.len()..].to_vec();

        let value_with = |fixed: &[(VarId, usize)]| -> Result<f64> {
            let mut obs = vec![None; self.net.len()];
            for &(v, s) in fixed {
                obs[v.0] = Some(s);
            }
            let factors: Vec<Factor> = self.factors.iter().map(|f| f.reduce(&obs)).collect();
            let free_map_order: Vec<VarId> = map_order
                .iter()
                .copied()
                .filter(|v| obs[v.0].is_none())
                .collect();
            Ok(eliminate(factors, &rest, &free_map_order)?.values()[0])
        };

        let q = value_with(&[])?;
        let observed_state = |v: VarId| self.observed[v.0];
        if q <= 0.0 {
            return Ok(MapSolution {
                assignment: map_vars.iter().map(|&v| observed_state(v).unwrap_or(0)).collect(),
                value: 0.0,
                degenerate: true,
            });
        }
        let mut fixed: Vec<(VarId, usize)> = Vec::new();
        let mut assignment = Vec::with_capacity(map_vars.len());
        for &v in map_vars {
            if let Some(s) = observed_state(v) {
                assignment.push(s);
                continue;
            }
            if let Some(&(_, s)) = fixed.iter().find(|(u, _)| *u == v) {
                assignment.push(s);
                continue;
            }
            let card = self.net.card(v);
            let mut chosen = None;
            let mut best = (0, f64::NEG_INFINITY);
            for s in 0..card {
                fixed.push((v, s));
                let val = value_with(&fixed)?;
                fixed.pop();
                if val >= q * (1.0 - MAP_TIE_TOL) {
                    chosen = Some(s);
                    break;
                }
                if val > best.1 {
                    best = (s, val);
                }
            }
            let s = chosen.unwrap_or(best.0);
            fixed.push((v, s));
            assignment.push(s);
        }
        Ok(MapSolution {
            assignment,
            value: q,
            degenerate: false,
        })
    }

    /// `Pr(e, extra)` for additional observations on top of the compiled
    /// evidence.
    pub fn probability_with(&self, extra: &Evidence) -> Result<f64> {
        let mut obs = vec![None; self.net.len()];
        for (v, s) in extra.iter() {
            match self.observed[v.0] {
                Some(t) if t != s => return Ok(0.0),
                Some(_) => {}
                None => obs[v.0] = Some(s),
            }
        }
        let factors: Vec<Factor> = self.factors.iter().map(|f| f.reduce(&obs)).collect();
        let rest: Vec<VarId> = self
            .order
            .order
            .iter()
            .copied()
            .filter(|v| obs[v.0].is_none())
            .collect();
        Ok(eliminate(factors, &rest, &[])?.values()[0])
    }
}

/// Sums out `sum_vars` then maxes out `max_vars`, in the given orders, and
/// returns the product of what remains.
fn eliminate(mut factors: Vec<Factor>, sum_vars: &[VarId], max_vars: &[VarId]) -> Result<Factor> {
    let steps = sum_vars
        .iter()
        .map(|&v| (v, false))
        .chain(max_vars.iter().map(|&v| (v, true)));
    for (v, max) in steps {
        let (mine, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(v));
        factors = rest;
        if mine.is_empty() {
            continue;
        }
        let mut acc = Factor::scalar(1.0);
        for f in &mine {
            acc = acc.product(f)?;
        }
        factors.push(if max { acc.max_out(v) } else { acc.sum_out(v) });
    }
    let mut acc = Factor::scalar(1.0);
    for f in &factors {
        acc = acc.product(f)?;
    }
    Ok(acc)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    if z > 0.0 {
        v.iter_mut().for_each(|x| *x /= z);
    }
    v
}

/// Probability of evidence in `net`.
pub fn probability_of_evidence(net: &Network, ev: &Evidence) -> Result<f64> {
    Ok(EngineState::compile(net, ev)?.pr_e())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{enumerate_joint, enumerate_posterior};
    use crate::fixtures;
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn appendix_network_probability_and_marginals() {
        let (net, ev) = fixtures::equivalence_loop();
        let st = EngineState::compile(&net, &ev).unwrap();
        assert_abs_diff_eq!(st.pr_e(), 0.5, epsilon = 1e-15);
        let u1 = net.var("U1").unwrap();
        let p = st.posterior_marginal(u1).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        let x1 = net.var("X1").unwrap();
        assert_eq!(st.posterior_marginal(x1).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn empty_evidence_has_probability_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = synth::random_network(&mut rng, 8, 3, 3);
        let st = EngineState::compile(&net, &Evidence::new()).unwrap();
        assert_abs_diff_eq!(st.pr_e(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn contradictory_evidence() {
        let (net, _) = fixtures::equivalence_loop();
        // X1 = x1 requires U1 = U2; U1 = u1, U2 = not u2 contradicts it.
        let ev = Evidence::from_labels(&net, &[("X1", "x"), ("U1", "u"), ("U2", "not_u")]).unwrap();
        let st = EngineState::compile(&net, &ev).unwrap();
        assert_eq!(st.pr_e(), 0.0);
        assert!(matches!(
            st.posterior_marginal(VarId(0)),
            Err(Error::InconsistentEvidence)
        ));
        let map = st.exact_map(&[VarId(0)]).unwrap();
        assert!(map.degenerate);
        assert_eq!(map.value, 0.0);
    }

    #[test]
    fn marginals_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 10, 3, 3);
            let ev = synth::random_evidence(&mut rng, &net, 3);
            let st = EngineState::compile(&net, &ev).unwrap();
            let joint = enumerate_joint(&net, &ev).unwrap();
            assert_abs_diff_eq!(st.pr_e(), joint.total(), epsilon = 1e-12);
            for v in net.ids() {
                let want = enumerate_posterior(&net, &ev, &[v]).unwrap();
                let got = st.posterior_marginal(v).unwrap();
                for (a, b) in got.iter().zip(want.values()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn pairwise_diagonal_and_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = synth::random_network(&mut rng, 7, 3, 2);
        let st = EngineState::compile(&net, &Evidence::new()).unwrap();
        let a = VarId(2);
        let diag = st.pairwise_marginal(a, a).unwrap();
        let p = st.posterior_marginal(a).unwrap();
        let k = p.len();
        for i in 0..k {
            assert_abs_diff_eq!(diag[i * k + i], p[i], epsilon = 1e-15);
        }
        let b = VarId(5);
        let joint = st.pairwise_marginal(a, b).unwrap();
        let kb = net.card(b);
        for i in 0..k {
            let row: f64 = joint[i * kb..(i + 1) * kb].iter().sum();
            assert_abs_diff_eq!(row, p[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_root_derivatives_are_one() {
        let net = fixtures::single_binary(0.3);
        let st = EngineState::compile(&net, &Evidence::new()).unwrap();
        let d = st.cpt_derivatives(VarId(0)).unwrap();
        assert_eq!(d.table, vec![1.0, 1.0]);
    }

    #[test]
    fn euler_identity_and_observed_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 8, 3, 3);
            let ev = synth::random_evidence(&mut rng, &net, 4);
            let st = EngineState::compile(&net, &ev).unwrap();
            for v in net.ids() {
                let d = st.cpt_derivatives(v).unwrap();
                let s = d.euler_sum(net.cpt(v));
                assert!((s - st.pr_e()).abs() <= 1e-9 * st.pr_e().max(1e-300));
                assert!(d.table.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn order_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = synth::random_network(&mut rng, 8, 2, 3);
        let ev = synth::random_evidence(&mut rng, &net, 2);
        let a = EngineState::compile(&net, &ev).unwrap();
        let mut rev: Vec<VarId> = a.order().order.clone();
        rev.reverse();
        let b = EngineState::compile_with_order(&net, &ev, &rev).unwrap();
        assert_abs_diff_eq!(a.pr_e(), b.pr_e(), epsilon = 1e-12);
        for v in net.ids() {
            for (x, y) in a
                .posterior_marginal(v)
                .unwrap()
                .iter()
                .zip(b.posterior_marginal(v).unwrap())
            {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn width_cap_refuses() {
        let net = synth::grid_structure(4, 4, 2);
        let err = EngineState::compile_with(&net, &Evidence::new(), EngineConfig { width_cap: 1 })
            .unwrap_err();
        assert!(matches!(err, Error::WidthCap { cap: 1, .. }));
    }

    #[test]
    fn single_variable_map_is_posterior_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = synth::random_network(&mut rng, 6, 3, 2);
        let ev = synth::random_evidence(&mut rng, &net, 2);
        let st = EngineState::compile(&net, &ev).unwrap();
        let v = net.ids().find(|v| !ev.contains(*v)).unwrap();
        let p = st.posterior_marginal(v).unwrap();
        let sol = st.exact_map(&[v]).unwrap();
        let argmax = p
            .iter()
            .enumerate()
            .fold((0, -1.0), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
            .0;
        assert_eq!(sol.assignment, vec![argmax]);
        assert_abs_diff_eq!(sol.value, p[argmax] * st.pr_e(), epsilon = 1e-12);
    }

    #[test]
    fn map_ties_break_lexicographically() {
        let (net, ev) = fixtures::equivalence_loop();
        let st = EngineState::compile(&net, &ev).unwrap();
        let sol = st.exact_map(&[VarId(0), VarId(1)]).unwrap();
        assert_eq!(sol.assignment, vec![0, 0]);
        assert_abs_diff_eq!(sol.value, 0.25, epsilon = 1e-15);
    }
}
