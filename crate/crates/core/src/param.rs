//! Fixed-point searches for edge parameters.
//!
//! * ED-BP: `PM(u') ← α ∂Pr'(e')/∂θ_{s'|u}` and `SE(u) ← α ∂Pr'(e')/∂θ_{u'}`.
//! * ED-KL: `PM(u') ← Pr(u|e) Pr'(e') / ∂Pr'(e')/∂θ_{u'}` and
//!   `SE(u) ← Pr(u|e) Pr'(e') / ∂Pr'(e')/∂θ_{s'|u}`, using exact marginals
//!   `Pr(u|e)` of the augmented network.
//!
//! Both vectors are normalized after every update (soft-evidence posteriors
//! only depend on the ratios of `SE`). In the sequential schedule one
//! parameter set (the `PM` or the `SE` of a single edge) is updated at a time
//! and the approximate network is recompiled in between; in the simultaneous
//! schedule every set is updated from one compilation.

use crate::deletion::{DeletedNetwork, DeletionPlan, EdgeParams};
use crate::divergence::kl_bound_from_parts;
use crate::engine::EngineState;
use crate::error::{Error, Result};
use crate::model::{Evidence, Network, VarId};
use crate::par::{self, Exec};

/// Derivatives below this are floored when the true marginal is positive.
pub const DERIVATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    EdBp,
    EdKl,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::EdBp => "ed-bp",
            Method::EdKl => "ed-kl",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "ed-bp" => Some(Method::EdBp),
            "ed-kl" => Some(Method::EdKl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Sequential,
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    #[default]
    Uniform,
    /// Start from the parameters already in the plan.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub method: Method,
    pub max_iterations: usize,
    /// Convergence threshold on the largest parameter change in a sweep.
    pub tolerance: f64,
    /// Weight of the previous value in the geometric interpolation.
    pub damping: f64,
    pub schedule: Schedule,
    pub initialization: Initialization,
}

impl IterationConfig {
    pub fn new(method: Method) -> Self {
        IterationConfig {
            method,
            max_iterations: 200,
            tolerance: 1e-8,
            damping: 0.0,
            schedule: Schedule::Sequential,
            initialization: Initialization::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Config(format!("damping {} not in [0, 1)", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Exact `Pr(u|e)` in the augmented network for every plan entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueMarginals {
    pub pr_e: f64,
    pub per_edge: Vec<Vec<f64>>,
}

impl TrueMarginals {
    pub fn compute(augmented: &Network, plan: &DeletionPlan, ev: &Evidence) -> Result<Self> {
        let st = EngineState::compile(augmented, ev)?;
        Self::from_state(&st, plan)
    }

    pub fn from_state(st: &EngineState, plan: &DeletionPlan) -> Result<Self> {
        if st.pr_e() <= 0.0 {
            return Err(Error::ZeroEvidence("original"));
        }
        let per_edge = plan
            .entries
            .iter()
            .map(|e| st.posterior_marginal(e.parent))
            .collect::<Result<_>>()?;
        Ok(TrueMarginals {
            pr_e: st.pr_e(),
            per_edge,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Set {
    Pm,
    Se,
}

/// Derivatives of `Pr'(e')` with respect to one edge's parameters.
#[derive(Debug, Clone)]
struct EdgeDerivs {
    /// `∂Pr'(e')/∂θ_{u'}`.
    pm: Vec<f64>,
    /// `∂Pr'(e')/∂θ_{s'|u}` for the observed state of `S'`.
    se: Vec<f64>,
}

fn edge_derivs(st: &EngineState, approx: &DeletedNetwork, plan: &DeletionPlan, k: usize) -> Result<EdgeDerivs> {
    let entry = &plan.entries[k];
    let pm = st.cpt_derivatives(entry.clone)?.table;
    let se_table = st.cpt_derivatives(approx.soft_evidence[k])?.table;
    let se = se_table.chunks(2).map(|row| row[0]).collect();
    Ok(EdgeDerivs { pm, se })
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let z: f64 = v.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= z);
    Some(v)
}

fn damp(new: Vec<f64>, old: &[f64], damping: f64) -> Vec<f64> {
    if damping == 0.0 {
        return new;
    }
    let mixed: Vec<f64> = new
        .iter()
        .zip(old)
        .map(|(&a, &b)| a.powf(1.0 - damping) * b.powf(damping))
        .collect();
    normalized(mixed).unwrap_or(new)
}

fn edge_label(net: &Network, plan: &DeletionPlan, k: usize) -> String {
    let e = &plan.entries[k];
    format!("{} -> {}", net.name(e.parent), net.name(e.clone))
}

/// One ED-BP update of one parameter set.
fn edbp_update(d: &EdgeDerivs, set: Set, label: impl Fn() -> String) -> Result<Vec<f64>> {
    // Cross-paired: PM takes the soft-evidence derivative and vice versa.
    let raw = match set {
        Set::Pm => d.se.clone(),
        Set::Se => d.pm.clone(),
    };
    normalized(raw).ok_or_else(|| Error::DegenerateUpdate(label()))
}

/// One ED-KL update of one parameter set.
fn edkl_update(
    d: &EdgeDerivs,
    set: Set,
    truth: &[f64],
    pr_e_prime: f64,
    label: impl Fn() -> String,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    if !(pr_e_prime > 0.0) {
        return Err(Error::InconsistentApproximation);
    }
    let derivs = match set {
        Set::Pm => &d.pm,
        Set::Se => &d.se,
    };
    let raw = truth
        .iter()
        .zip(derivs)
        .enumerate()
        .map(|(u, (&p, &dv))| {
            if p == 0.0 {
                0.0
            } else if dv > 0.0 {
                p * pr_e_prime / dv
            } else {
                warnings.push(format!(
                    "{}: zero derivative at state {u} with positive true mass; floored",
                    label()
                ));
                p * pr_e_prime / DERIVATIVE_FLOOR
            }
        })
        .collect();
    normalized(raw).ok_or_else(|| Error::DegenerateUpdate(label()))
}

fn apply(plan: &mut DeletionPlan, k: usize, set: Set, value: Vec<f64>, damping: f64) {
    let params = &mut plan.entries[k].params;
    match set {
        Set::Pm => params.pm = damp(value, &params.pm, damping),
        Set::Se => params.se = damp(value, &params.se, damping),
    }
}

/// Per-step knobs shared by both methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub schedule: Schedule,
    pub damping: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            schedule: Schedule::Sequential,
            damping: 0.0,
        }
    }
}

enum Rule<'a> {
    EdBp,
    EdKl(&'a TrueMarginals),
}

struct Sweep {
    plan: DeletionPlan,
    /// Compiled on `plan`.
    state: EngineState,
    warnings: Vec<String>,
}

fn sweep(
    approx: &DeletedNetwork,
    start: &DeletionPlan,
    ev_prime: &Evidence,
    state: EngineState,
    rule: &Rule<'_>,
    opts: StepOptions,
) -> Result<Sweep> {
    // Only the structure of `start` is read by the closures below.
    let mut plan = start.clone();
    let mut warnings = Vec::new();
    let compile = |p: &DeletionPlan| -> Result<EngineState> {
        EngineState::compile(&approx.with_params(p)?.net, ev_prime)
    };
    let label = |k: usize| edge_label(&approx.net, start, k);
    let update = |st: &EngineState, k: usize, set: Set, warnings: &mut Vec<String>| -> Result<Vec<f64>> {
        let d = edge_derivs(st, approx, start, k)?;
        match rule {
            Rule::EdBp => edbp_update(&d, set, || label(k)),
            Rule::EdKl(t) => edkl_update(&d, set, &t.per_edge[k], st.pr_e(), || label(k), warnings),
        }
    };

    let state = match opts.schedule {
        Schedule::Sequential => {
            let mut st = state;
            for k in 0..plan.len() {
                for set in [Set::Pm, Set::Se] {
                    let value = update(&st, k, set, &mut warnings)?;
                    apply(&mut plan, k, set, value, opts.damping);
                    st = compile(&plan)?;
                }
            }
            st
        }
        Schedule::Simultaneous => {
            let results = par::map_range(Exec::default(), plan.len(), |k| {
                let mut w = Vec::new();
                let pm = update(&state, k, Set::Pm, &mut w);
                let se = update(&state, k, Set::Se, &mut w);
                (pm, se, w)
            });
            let mut next = plan.clone();
            for (k, (pm, se, w)) in results.into_iter().enumerate() {
                apply(&mut next, k, Set::Pm, pm?, opts.damping);
                apply(&mut next, k, Set::Se, se?, opts.damping);
                warnings.extend(w);
            }
            plan = next;
            compile(&plan)?
        }
    };
    Ok(Sweep {
        plan,
        state,
        warnings,
    })
}

fn initial_state(approx: &DeletedNetwork, plan: &DeletionPlan, ev_prime: &Evidence) -> Result<EngineState> {
    EngineState::compile(&approx.with_params(plan)?.net, ev_prime)
}

/// One ED-BP sweep over every deleted edge.
pub fn edbp_step(
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev_prime: &Evidence,
    opts: StepOptions,
) -> Result<DeletionPlan> {
    let st = initial_state(approx, plan, ev_prime)?;
    Ok(sweep(approx, plan, ev_prime, st, &Rule::EdBp, opts)?.plan)
}

/// One ED-KL sweep over every deleted edge. Returns the updated plan and any
/// derivative-floor warnings.
pub fn edkl_step(
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev_prime: &Evidence,
    truth: &TrueMarginals,
    opts: StepOptions,
) -> Result<(DeletionPlan, Vec<String>)> {
    let st = initial_state(approx, plan, ev_prime)?;
    let s = sweep(approx, plan, ev_prime, st, &Rule::EdKl(truth), opts)?;
    Ok((s.plan, s.warnings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    /// Last parameter change per edge.
    pub residuals: Vec<f64>,
    /// Per edge, `max(|Pr'(u|e') − Pr'(u'|e')|, |Pr'(u|e'∖s') − Pr'(u')|)`.
    pub eq2_gaps: Vec<f64>,
    /// Per edge, `max(|Pr'(u|e') − Pr(u|e)|, |Pr'(u'|e') − Pr(u|e)|)`, when
    /// true marginals are known.
    pub eq4_gaps: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FixedPointReport {
    pub fn max_eq2_gap(&self) -> f64 {
        self.eq2_gaps.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_eq4_gap(&self) -> Option<f64> {
        self.eq4_gaps.as_ref().map(|g| g.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual: f64,
    pub kl_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub plan: DeletionPlan,
    pub report: FixedPointReport,
    pub trace: Vec<TraceEntry>,
    /// Approximate network state compiled on the final plan.
    pub state: EngineState,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gaps(
    st: &EngineState,
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    truth: Option<&TrueMarginals>,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let mut eq2 = Vec::with_capacity(plan.len());
    let mut eq4 = Vec::with_capacity(plan.len());
    for (k, e) in plan.entries.iter().enumerate() {
        let pu = st.posterior_marginal(e.parent)?;
        let pc = st.posterior_marginal(e.clone)?;
        let d = edge_derivs(st, approx, plan, k)?;
        let retracted = normalized(d.se).unwrap_or_else(|| vec![0.0; pu.len()]);
        let prior = normalized(e.params.pm.clone()).unwrap_or_else(|| e.params.pm.clone());
        eq2.push(max_abs_diff(&pu, &pc).max(max_abs_diff(&retracted, &prior)));
        if let Some(t) = truth {
            let exact = &t.per_edge[k];
            eq4.push(max_abs_diff(&pu, exact).max(max_abs_diff(&pc, exact)));
        }
    }
    Ok((eq2, truth.map(|_| eq4)))
}

/// Iterates sweeps until the largest parameter change drops below the
/// tolerance or the iteration budget runs out. Non-convergence is reported,
/// not raised. ED-KL requires `truth`.
pub fn run(
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev_prime: &Evidence,
    cfg: &IterationConfig,
    truth: Option<&TrueMarginals>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let rule = match (cfg.method, truth) {
        (Method::EdBp, _) => Rule::EdBp,
        (Method::EdKl, Some(t)) => Rule::EdKl(t),
        (Method::EdKl, None) => {
            return Err(Error::Config("ED-KL needs exact marginals of the original network".into()))
        }
    };
    if let Some(t) = truth {
        if t.per_edge.len() != plan.len() {
            return Err(Error::Config("true marginals do not match the plan".into()));
        }
    }
    let mut plan = plan.clone();
    if cfg.initialization == Initialization::Uniform {
        for e in &mut plan.entries {
            e.params = EdgeParams::uniform(e.params.card());
        }
    }
    let opts = StepOptions {
        schedule: cfg.schedule,
        damping: cfg.damping,
    };
    let mut state = initial_state(approx, &plan, ev_prime)?;
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut residuals = vec![0.0; plan.len()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let s = sweep(approx, &plan, ev_prime, state, &rule, opts)?;
        iterations += 1;
        residuals = plan
            .entries
            .iter()
            .zip(&s.plan.entries)
            .map(|(a, b)| a.params.distance(&b.params))
            .collect();
        let residual = residuals.iter().copied().fold(0.0, f64::max);
        let kl_bound = match truth {
            Some(t) if s.state.pr_e() > 0.0 => Some(kl_bound_from_parts(&s.plan, t, s.state.pr_e()).total),
            _ => None,
        };
        trace.push(TraceEntry {
            iteration: iterations,
            residual,
            kl_bound,
        });
        warnings.extend(s.warnings);
        plan = s.plan;
        state = s.state;
        if residual < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let (eq2_gaps, eq4_gaps) = if state.pr_e() > 0.0 {
        gaps(&state, approx, &plan, truth)?
    } else {
        (vec![f64::INFINITY; plan.len()], truth.map(|_| vec![f64::INFINITY; plan.len()]))
    };
    Ok(RunOutcome {
        plan,
        report: FixedPointReport {
            residuals,
            eq2_gaps,
            eq4_gaps,
            iterations,
            converged,
            warnings,
        },
        trace,
        state,
    })
}

/// Evaluates both fixed-point conditions for `plan` without iterating.
pub fn check_conditions(
    augmented: &Network,
    approx: &DeletedNetwork,
    plan: &DeletionPlan,
    ev: &Evidence,
    ev_prime: &Evidence,
) -> Result<FixedPointReport> {
    let truth = TrueMarginals::compute(augmented, plan, ev)?;
    let st = initial_state(approx, plan, ev_prime)?;
    if st.pr_e() <= 0.0 {
        return Err(Error::ZeroEvidence("approximate"));
    }
    let (eq2_gaps, eq4_gaps) = gaps(&st, approx, plan, Some(&truth))?;
    Ok(FixedPointReport {
        residuals: vec![0.0; plan.len()],
        eq2_gaps,
        eq4_gaps,
        iterations: 0,
        converged: false,
        warnings: Vec::new(),
    })
}

/// Parent of each plan entry, for callers that want to label results.
pub fn plan_parents(plan: &DeletionPlan) -> Vec<VarId> {
    plan.entries.iter().map(|e| e.parent).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deletion::approximate;
    use crate::enumerate::enumerate_posterior;
    use crate::fixtures;
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn appendix() -> (Network, Evidence, Network, DeletionPlan, DeletedNetwork) {
        let (net, ev) = fixtures::equivalence_loop();
        let (aug, plan, del) = approximate(&net, &[(VarId(0), VarId(2))]).unwrap();
        (net, ev, aug, plan, del)
    }

    #[test]
    fn appendix_uniform_is_an_edbp_fixed_point() {
        let (_, ev, _, plan, del) = appendix();
        let next = edbp_step(&del, &plan, &del.evidence(&ev), StepOptions::default()).unwrap();
        assert!(next.distance(&plan) < 1e-15);
    }

    #[test]
    fn appendix_every_positive_parametrization_satisfies_eq2() {
        let (_, ev, aug, mut plan, del) = appendix();
        for (pm, se) in [(0.7, 0.5), (0.2, 0.9), (0.5, 0.3), (0.95, 0.05)] {
            plan.entries[0].params = EdgeParams::new(vec![pm, 1.0 - pm], vec![se, 1.0 - se]).unwrap();
            let d = del.with_params(&plan).unwrap();
            let r = check_conditions(&aug, &d, &plan, &ev, &d.evidence(&ev)).unwrap();
            assert!(r.max_eq2_gap() <= 1e-12, "eq2 gap {}", r.max_eq2_gap());
            let eq4 = r.max_eq4_gap().unwrap();
            let uniform_product = (pm * se - (1.0 - pm) * (1.0 - se)).abs() < 1e-12;
            assert_eq!(eq4 <= 1e-12, uniform_product, "pm {pm} se {se} eq4 {eq4}");
        }
    }

    #[test]
    fn appendix_edkl_recovers_from_skewed_start() {
        let (_, ev, aug, mut plan, del) = appendix();
        plan.entries[0].params = EdgeParams::new(vec![0.7, 0.3], vec![0.5, 0.5]).unwrap();
        let truth = TrueMarginals::compute(&aug, &plan, &ev).unwrap();
        let mut cfg = IterationConfig::new(Method::EdKl);
        cfg.initialization = Initialization::WarmStart;
        let out = run(&del, &plan, &del.evidence(&ev), &cfg, Some(&truth)).unwrap();
        assert!(out.report.converged);
        let kl = out.trace.last().unwrap().kl_bound.unwrap();
        assert!(kl.abs() <= 1e-10, "kl {kl}");
        assert_abs_diff_eq!(out.plan.entries[0].params.pm[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_plan_is_a_no_op() {
        let net = fixtures::two_node_chain();
        let (aug, plan, del) = approximate(&net, &[]).unwrap();
        let ev = Evidence::new();
        let truth = TrueMarginals::compute(&aug, &plan, &ev).unwrap();
        let (next, w) = edkl_step(&del, &plan, &ev, &truth, StepOptions::default()).unwrap();
        assert!(next.is_empty() && w.is_empty());
    }

    #[test]
    fn zero_iterations_returns_initial_plan() {
        let (_, ev, _, plan, del) = appendix();
        let mut cfg = IterationConfig::new(Method::EdBp);
        cfg.max_iterations = 0;
        let out = run(&del, &plan, &del.evidence(&ev), &cfg, None).unwrap();
        assert!(!out.report.converged);
        assert_eq!(out.report.iterations, 0);
        assert_eq!(out.plan, plan);
    }

    #[test]
    fn converged_plan_takes_one_sweep() {
        let (_, ev, _, plan, del) = appendix();
        let out = run(&del, &plan, &del.evidence(&ev), &IterationConfig::new(Method::EdBp), None).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn edkl_without_truth_is_rejected() {
        let (_, ev, _, plan, del) = appendix();
        let err = run(&del, &plan, &del.evidence(&ev), &IterationConfig::new(Method::EdKl), None);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn bad_damping_is_rejected() {
        let mut cfg = IterationConfig::new(Method::EdBp);
        cfg.damping = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_edge_edkl_gives_exact_parent_and_clone_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        for _ in 0..10 {
            let net = synth::random_network(&mut rng, 7, 3, 3);
            let Some(&edge) = net.edges().last() else { continue };
            let ev = synth::random_evidence(&mut rng, &net, 3);
            let (aug, plan, del) = approximate(&net, &[edge]).unwrap();
            let truth = TrueMarginals::compute(&aug, &plan, &ev).unwrap();
            let mut cfg = IterationConfig::new(Method::EdKl);
            cfg.tolerance = 1e-12;
            cfg.max_iterations = 2000;
            let out = run(&del, &plan, &del.evidence(&ev), &cfg, Some(&truth)).unwrap();
            if !out.report.converged {
                continue;
            }
            checked += 1;
            let want = enumerate_posterior(&net, &ev, &[edge.0]).unwrap();
            let e = &out.plan.entries[0];
            for v in [e.parent, e.clone] {
                for (a, b) in out.state.posterior_marginal(v).unwrap().iter().zip(want.values()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
                }
            }
        }
        assert!(checked >= 8);
    }

    #[test]
    fn sequential_edkl_never_increases_the_kl_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = synth::grid(&mut rng, 3, 3, 2, synth::SyntheticCptLaw::UniformSimplex);
        let edges = net.edges();
        let ev = Evidence::new().with(VarId(8), 1).with(VarId(5), 0);
        let (aug, plan, del) = approximate(&net, &edges[..5]).unwrap();
        let truth = TrueMarginals::compute(&aug, &plan, &ev).unwrap();
        let out = run(&del, &plan, &del.evidence(&ev), &IterationConfig::new(Method::EdKl), Some(&truth)).unwrap();
        let kls: Vec<f64> = out.trace.iter().map(|t| t.kl_bound.unwrap()).collect();
        for w in kls.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{kls:?}");
        }
    }
}
