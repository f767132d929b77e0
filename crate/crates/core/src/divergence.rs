//! KL divergences between `N` and `N'`, and edge rankings.
//!
//! For an augmented network `N` and its approximation `N'`,
//!
//! ```text
//! KL(Pr(.|e), Pr'(.|e')) = Σ_edges Σ_u Pr(u|e) log 1/(θ_{u'=u} θ_{s'|u})
//!                          + log Pr'(e')/Pr(e)
//! ```
//!
//! over all variables of `N` (clones included). [`exact_kl`] measures the
//! divergence over the original variables only, which never exceeds it.
//!
//! With one deleted edge, `Pr'(e')` and its derivatives are sums over the
//! derivative table `∂Pr(e)/∂θ_{u'|u}` of the augmented network
//! ([`single_edge_evaluate`]), so [`score_edges`] ranks every edge from a
//! single compilation.

use std::cmp::Ordering;

use crate::deletion::{augment, DeletedNetwork, DeletionPlan, EdgeParams};
use crate::engine::{CptDerivatives, EngineState};
use crate::enumerate::DEFAULT_ENUMERATION_CAP;
use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::model::{Evidence, Network, VarId};
use crate::par::{self, Exec};
use crate::param::TrueMarginals;

/// Iteration cap of the single-edge recursion used for scoring.
pub const SCORE_MAX_ITERATIONS: usize = 50;
/// Convergence threshold of the single-edge recursion.
pub const SCORE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct KlBreakdown {
    pub per_edge: Vec<f64>,
    /// `log Pr'(e') / Pr(e)`.
    pub correction: f64,
    pub total: f64,
}

impl KlBreakdown {
    /// Whether some zero parameter meets positive true mass.
    pub fn is_infinite(&self) -> bool {
        self.total == f64::INFINITY
    }
}

/// `Σ_u p(u) log 1/(pm(u) se(u))` with `0 log 0 = 0`.
fn edge_term(truth: &[f64], params: &EdgeParams) -> f64 {
    truth
        .iter()
        .zip(params.pm.iter().zip(&params.se))
        .map(|(&p, (&pm, &se))| {
            if p == 0.0 {
                0.0
            } else if pm * se == 0.0 {
                f64::INFINITY
            } else {
                -p * (pm * se).ln()
            }
        })
        .sum()
}

/// The KL bound from the true marginals of each deleted parent and `Pr'(e')`.
pub fn kl_bound_from_parts(plan: &DeletionPlan, truth: &TrueMarginals, pr_e_prime: f64) -> KlBreakdown {
    let per_edge: Vec<f64> = plan
        .entries
        .iter()
        .zip(&truth.per_edge)
        .map(|(e, t)| edge_term(t, &e.params))
        .collect();
    let correction = (pr_e_prime / truth.pr_e).ln();
    let total = per_edge.iter().sum::<f64>() + correction;
    KlBreakdown {
        per_edge,
        correction,
        total,
    }
}

/// KL between `Pr(.|e)` on the augmented network and `Pr'(.|e')` on the
/// approximation carrying `plan`, over all variables of the augmented network.
pub fn kl_bound(
    augmented: &Network,
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev: &Evidence,
    ev_prime: &Evidence,
) -> Result<KlBreakdown> {
    let st = EngineState::compile(augmented, ev)?;
    if st.pr_e() <= 0.0 {
        return Err(Error::ZeroEvidence("original"));
    }
    let per_edge = plan
        .entries
        .iter()
        .map(|e| {
            let joint = st.pairwise_marginal(e.parent, e.clone)?;
            let c = augmented.card(e.parent);
            Ok((0..c).map(|u| joint[u * c + u]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let truth = TrueMarginals {
        pr_e: st.pr_e(),
        per_edge,
    };
    let st_prime = EngineState::compile(&approx.with_params(plan)?.net, ev_prime)?;
    if st_prime.pr_e() <= 0.0 {
        return Err(Error::ZeroEvidence("approximate"));
    }
    Ok(kl_bound_from_parts(plan, &truth, st_prime.pr_e()))
}

/// Unnormalized joint over `keep` (minus observed variables), with every
/// other variable summed out by elimination.
fn joint_over(net: &Network, ev: &Evidence, keep: &[VarId], cap: u128) -> Result<Factor> {
    ev.check(net)?;
    let free: Vec<VarId> = keep.iter().copied().filter(|v| !ev.contains(*v)).collect();
    let required = free
        .iter()
        .try_fold(1u128, |acc, &v| acc.checked_mul(net.card(v) as u128))
        .unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let obs = ev.dense(net.len());
    let mut factors: Vec<Factor> = net.ids().map(|v| net.cpt_factor(v).reduce(&obs)).collect();
    for v in net.ids().filter(|v| !free.contains(v) && !ev.contains(*v)) {
        let (mine, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(v));
        factors = rest;
        let mut acc = Factor::scalar(1.0);
        for f in &mine {
            acc = acc.product(f)?;
        }
        factors.push(acc.sum_out(v));
    }
    let mut acc = Factor::ones(free.clone(), free.iter().map(|&v| net.card(v)).collect());
    for f in &factors {
        acc = acc.product(f)?;
    }
    acc.permuted(&free)
}

/// `Σ p log p/q` over two aligned tables; `0 log 0 = 0`.
pub fn kl_of_tables(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// KL between the posteriors of `N` and `N'` over the original variables,
/// by enumeration. Refuses when their joint space exceeds `cap`.
pub fn exact_kl_with_cap(
    augmented: &Network,
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev: &Evidence,
    ev_prime: &Evidence,
    cap: u128,
) -> Result<f64> {
    let keep = augmented.original_variables();
    let p = joint_over(augmented, ev, &keep, cap)?;
    let q = joint_over(&approx.with_params(plan)?.net, ev_prime, &keep, cap)?;
    let p = p.normalized().ok_or(Error::ZeroEvidence("original"))?;
    let q = q.normalized().ok_or(Error::ZeroEvidence("approximate"))?;
    Ok(kl_of_tables(p.values(), q.values()))
}

pub fn exact_kl(
    augmented: &Network,
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev: &Evidence,
    ev_prime: &Evidence,
) -> Result<f64> {
    exact_kl_with_cap(augmented, approx, plan, ev, ev_prime, DEFAULT_ENUMERATION_CAP)
}

/// `Pr'(e')` and its derivatives for one deleted equivalence edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleEdge {
    pub pr_e_prime: f64,
    /// `∂Pr'(e')/∂θ_{u'}`.
    pub d_pm: Vec<f64>,
    /// `∂Pr'(e')/∂θ_{s'|u}`.
    pub d_se: Vec<f64>,
}

/// Evaluates the approximation obtained by deleting the single equivalence
/// edge whose derivative table is `derivs`, without any inference.
pub fn single_edge_evaluate(derivs: &CptDerivatives, params: &EdgeParams) -> SingleEdge {
    let c = params.card();
    let d = &derivs.table;
    let mut d_pm = vec![0.0; c];
    let mut d_se = vec![0.0; c];
    let mut pr = 0.0;
    for u in 0..c {
        for v in 0..c {
            let duv = d[u * c + v];
            d_pm[v] += params.se[u] * duv;
            d_se[u] += params.pm[v] * duv;
            pr += params.se[u] * params.pm[v] * duv;
        }
    }
    SingleEdge {
        pr_e_prime: pr,
        d_pm,
        d_se,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScore {
    /// `(U, X)` in the original network.
    pub edge: (VarId, VarId),
    pub params: EdgeParams,
    /// KL bound of deleting this edge alone.
    pub score: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) -> bool {
    let z: f64 = v.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= z);
    true
}

/// Runs the sequential ED-KL recursion on one edge from its derivative table.
fn score_one(derivs: &CptDerivatives) -> (EdgeParams, f64, usize, bool) {
    let c = derivs.child_card();
    let joint: Vec<f64> = (0..c).map(|u| derivs.table[u * c + u]).collect();
    let pr_e: f64 = joint.iter().sum();
    let truth: Vec<f64> = joint.iter().map(|x| x / pr_e).collect();
    let mut params = EdgeParams::uniform(c);
    let update = |p: &EdgeParams, derivs_of: &dyn Fn(&SingleEdge) -> &Vec<f64>| -> Option<Vec<f64>> {
        let s = single_edge_evaluate(derivs, p);
        let d = derivs_of(&s);
        let mut next: Vec<f64> = truth
            .iter()
            .zip(d)
            .map(|(&t, &dv)| {
                if t == 0.0 {
                    0.0
                } else {
                    t * s.pr_e_prime / dv.max(crate::param::DERIVATIVE_FLOOR)
                }
            })
            .collect();
        normalize(&mut next).then_some(next)
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < SCORE_MAX_ITERATIONS {
        iterations += 1;
        let before = params.clone();
        if let Some(pm) = update(&params, &|s| &s.d_pm) {
            params.pm = pm;
        }
        if let Some(se) = update(&params, &|s| &s.d_se) {
            params.se = se;
        }
        if params.distance(&before) < SCORE_TOLERANCE {
            converged = true;
            break;
        }
    }
    let pr_e_prime = single_edge_evaluate(derivs, &params).pr_e_prime;
    let score = edge_term(&truth, &params) + (pr_e_prime / pr_e).ln();
    (params, score, iterations, converged)
}

fn by_score(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

/// Scores every edge of `net` by the KL bound of deleting it alone, with
/// parameters from the single-edge ED-KL recursion. One compilation of the
/// fully augmented network supplies all derivative tables. Sorted ascending;
/// ties keep edge order.
pub fn score_edges(net: &Network, ev: &Evidence, exec: Exec) -> Result<Vec<EdgeScore>> {
    let edges = net.edges();
    let augmented = augment(net, &edges)?;
    let st = EngineState::compile(&augmented, ev)?;
    if st.pr_e() <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    let derivs = augmented
        .links()
        .iter()
        .map(|l| st.cpt_derivatives(l.clone))
        .collect::<Result<Vec<_>>>()?;
    let scored = par::map(exec, &derivs, score_one);
    let mut out: Vec<EdgeScore> = edges
        .into_iter()
        .zip(scored)
        .map(|(edge, (params, score, iterations, converged))| {
            if !converged {
                log::warn!(
                    "edge {} -> {} scored without converging",
                    net.name(edge.0),
                    net.name(edge.1)
                );
            }
            EdgeScore {
                edge,
                params,
                score,
                iterations,
                converged,
            }
        })
        .collect();
    out.sort_by(|a, b| by_score(&a.score, &b.score));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiScore {
    pub edge: (VarId, VarId),
    pub mi: f64,
}

/// Mutual information `MI(U; X | e)` of a joint table laid out `u`-major.
pub fn mutual_information(joint: &[f64], cu: usize, cx: usize) -> f64 {
    let mut pu = vec![0.0; cu];
    let mut px = vec![0.0; cx];
    for u in 0..cu {
        for x in 0..cx {
            pu[u] += joint[u * cx + x];
            px[x] += joint[u * cx + x];
        }
    }
    let mut mi = 0.0;
    for u in 0..cu {
        for x in 0..cx {
            let p = joint[u * cx + x];
            if p > 0.0 {
                mi += p * (p / (pu[u] * px[x])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Ranks edges ascending by `MI(U; X | e)`; ties keep edge order.
pub fn mutual_information_scores(net: &Network, ev: &Evidence) -> Result<Vec<MiScore>> {
    let st = EngineState::compile(net, ev)?;
    let mut out = net
        .edges()
        .into_iter()
        .map(|(u, x)| {
            let joint = st.pairwise_marginal(u, x)?;
            Ok(MiScore {
                edge: (u, x),
                mi: mutual_information(&joint, net.card(u), net.card(x)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| by_score(&a.mi, &b.mi));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deletion::{approximate, delete_edges};
    use crate::enumerate::enumerate_joint;
    use crate::fixtures;
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params<R: Rng>(rng: &mut R, card: usize) -> EdgeParams {
        let pm = synth::SyntheticCptLaw::UniformSimplex.sample_row(rng, card);
        let se = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
        EdgeParams::new(pm, se).unwrap()
    }

    fn enumeration_kl(aug: &Network, del: &DeletedNetwork, ev: &Evidence) -> f64 {
        let p = enumerate_joint(aug, ev).unwrap().normalized().unwrap();
        let q = enumerate_joint(&del.net, &del.evidence(ev)).unwrap().normalized().unwrap();
        kl_of_tables(p.values(), q.values())
    }

    #[test]
    fn empty_plan_has_zero_divergence() {
        let net = fixtures::two_node_chain();
        let ev = Evidence::new().with(VarId(1), 1);
        let (aug, plan, del) = approximate(&net, &[]).unwrap();
        let kl = kl_bound(&aug, &del, &plan, &ev, &ev).unwrap();
        assert_abs_diff_eq!(kl.total, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_kl(&aug, &del, &plan, &ev, &ev).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn appendix_uniform_bound_is_zero_and_skewed_is_positive() {
        let (net, ev) = fixtures::equivalence_loop();
        let (aug, mut plan, del) = approximate(&net, &[(VarId(0), VarId(2))]).unwrap();
        let evp = del.evidence(&ev);
        let kl = kl_bound(&aug, &del, &plan, &ev, &evp).unwrap();
        assert_abs_diff_eq!(kl.total, 0.0, epsilon = 1e-12);
        plan.entries[0].params = EdgeParams::new(vec![0.7, 0.3], vec![0.5, 0.5]).unwrap();
        let bound = kl_bound(&aug, &del, &plan, &ev, &evp).unwrap().total;
        let exact = exact_kl(&aug, &del, &plan, &ev, &evp).unwrap();
        // Pr'(u1 u2 | e') is 0.7 / 0.3 on the two agreeing worlds.
        let want = 0.5 * (0.5f64 / 0.7).ln() + 0.5 * (0.5f64 / 0.3).ln();
        assert_abs_diff_eq!(exact, want, epsilon = 1e-12);
        assert_abs_diff_eq!(bound, want, epsilon = 1e-12);
    }

    #[test]
    fn bound_matches_enumeration_and_dominates_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..15 {
            let net = synth::random_network(&mut rng, 7, 3, 2);
            let edges = net.edges();
            if edges.is_empty() {
                continue;
            }
            let k = rng.gen_range(1..=edges.len().min(3));
            let ev = synth::random_evidence(&mut rng, &net, 3);
            let (aug, mut plan, del) = approximate(&net, &edges[..k]).unwrap();
            for e in &mut plan.entries {
                e.params = random_params(&mut rng, e.params.card());
            }
            let del = del.with_params(&plan).unwrap();
            let evp = del.evidence(&ev);
            let bound = kl_bound(&aug, &del, &plan, &ev, &evp).unwrap();
            let want = enumeration_kl(&aug, &del, &ev);
            assert_abs_diff_eq!(bound.total, want, epsilon = 1e-9);
            let exact = exact_kl(&aug, &del, &plan, &ev, &evp).unwrap();
            assert!(exact <= bound.total + 1e-9);
        }
    }

    #[test]
    fn single_edge_matches_compiled_approximation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 6, 3, 2);
            let Some(&edge) = net.edges().first() else { continue };
            let ev = synth::random_evidence(&mut rng, &net, 2);
            let (aug, mut plan, del) = approximate(&net, &[edge]).unwrap();
            let st = EngineState::compile(&aug, &ev).unwrap();
            let d = st.cpt_derivatives(plan.entries[0].clone).unwrap();
            plan.entries[0].params = random_params(&mut rng, d.child_card());
            let got = single_edge_evaluate(&d, &plan.entries[0].params);
            let sp = EngineState::compile(&del.with_params(&plan).unwrap().net, &del.evidence(&ev)).unwrap();
            assert_abs_diff_eq!(got.pr_e_prime, sp.pr_e(), epsilon = 1e-12);
            let dpm = sp.cpt_derivatives(plan.entries[0].clone).unwrap().table;
            for (a, b) in got.d_pm.iter().zip(&dpm) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            let euler: f64 = got.d_pm.iter().zip(&plan.entries[0].params.pm).map(|(d, t)| d * t).sum();
            assert_abs_diff_eq!(euler, got.pr_e_prime, epsilon = 1e-12);
        }
    }

    #[test]
    fn appendix_edge_scores_zero_with_uniform_params() {
        let (net, ev) = fixtures::equivalence_loop();
        let scores = score_edges(&net, &ev, Exec::Sequential).unwrap();
        assert_eq!(scores.len(), 4);
        for s in &scores {
            assert!(s.score.abs() <= 1e-12, "{s:?}");
            assert_abs_diff_eq!(s.params.pm[0], 0.5, epsilon = 1e-12);
        }
    }

    // Cutting a bridge keeps every node marginal exact, but the clone
    // becomes independent of its parent, so the score is H(U | e).
    #[test]
    fn bridge_edge_score_is_parent_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let (net, bridge) = synth::random_bridged(&mut rng, 3, 3, 3);
            let ev = synth::random_evidence(&mut rng, &net, 3);
            let scores = score_edges(&net, &ev, Exec::Sequential).unwrap();
            let s = scores.iter().find(|s| s.edge == bridge).unwrap();

            let (aug, mut plan, _) = approximate(&net, &[bridge]).unwrap();
            plan.entries[0].params = s.params.clone();
            let del = delete_edges(&aug, &plan).unwrap();
            let ev_prime = del.evidence(&ev);
            assert_abs_diff_eq!(s.score, enumeration_kl(&aug, &del, &ev), epsilon = 1e-8);
            let st = EngineState::compile(&del.net, &ev_prime).unwrap();
            for (v, m) in crate::deletion::recover_marginals(&del.net, &st).unwrap() {
                let want = crate::enumerate::enumerate_posterior(&net, &ev, &[v]).unwrap();
                for (a, b) in m.iter().zip(want.values()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                }
            }

            let post = crate::enumerate::enumerate_posterior(&net, &ev, &[bridge.0]).unwrap();
            let h: f64 = post.values().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
            assert_abs_diff_eq!(s.score, h, epsilon = 1e-8);
            assert!(scores.iter().all(|s| s.score >= -1e-9));
        }
    }

    #[test]
    fn scoring_compiles_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = synth::grid(&mut rng, 3, 3, 2, synth::SyntheticCptLaw::UniformSimplex);
        let before = crate::engine::compile_count();
        score_edges(&net, &Evidence::new(), Exec::Sequential).unwrap();
        assert_eq!(crate::engine::compile_count() - before, 1);
    }

    #[test]
    fn mi_orders_independent_before_copy() {
        let net = Network::new(
            vec![
                crate::model::Variable::with_cardinality("A", 2),
                crate::model::Variable::with_cardinality("B", 2),
                crate::model::Variable::with_cardinality("C", 2),
            ],
            vec![
                crate::model::Cpt::new(VarId(0), vec![], vec![0.4, 0.6]),
                crate::model::Cpt::new(VarId(1), vec![VarId(0)], vec![0.3, 0.7, 0.3, 0.7]),
                crate::model::Cpt::new(VarId(2), vec![VarId(0)], vec![1.0, 0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let mi = mutual_information_scores(&net, &Evidence::new()).unwrap();
        assert_eq!(mi[0].edge, (VarId(0), VarId(1)));
        assert_abs_diff_eq!(mi[0].mi, 0.0, epsilon = 1e-15);
        let h = -(0.4f64 * 0.4f64.ln() + 0.6 * 0.6f64.ln());
        assert_abs_diff_eq!(mi[1].mi, h, epsilon = 1e-12);
    }
}
