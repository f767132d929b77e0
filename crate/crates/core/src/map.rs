//! MAP on an approximate network, judged in the original network.

use crate::deletion::DeletedNetwork;
use crate::engine::{EngineConfig, EngineState, MapSolution};
use crate::error::{Error, Result};
use crate::model::{Evidence, Network, VarId};

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub map_vars: Vec<VarId>,
    pub assignment: Vec<usize>,
    /// `Pr'(m, e')`, when the instantiation came from an approximation.
    pub approx_value: Option<f64>,
    /// `Pr(m, e)` in the original network.
    pub p: f64,
    /// `Pr(m*, e)`, omitted when exact MAP is out of reach.
    pub q: Option<f64>,
    /// `p / q`, omitted when `q` is missing or zero.
    pub ratio: Option<f64>,
}

/// MAP variables used when none are given: the unobserved roots.
pub fn default_map_vars(net: &Network, ev: &Evidence) -> Vec<VarId> {
    net.roots()
        .into_iter()
        .filter(|&v| !ev.contains(v) && !net.is_clone(v) && !net.is_soft_evidence(v))
        .collect()
}

fn check_map_vars(net: &Network, map_vars: &[VarId]) -> Result<()> {
    for &v in map_vars {
        if v.0 >= net.len() {
            return Err(Error::VariableOutOfRange(v.0));
        }
        if net.is_clone(v) || net.is_soft_evidence(v) {
            return Err(Error::Config(format!(
                "MAP variable `{}` is not an original variable",
                net.name(v)
            )));
        }
    }
    Ok(())
}

/// Exact MAP over `map_vars` in `N'` given `e'`.
pub fn approximate_map(
    approx: &DeletedNetwork,
    ev_prime: &Evidence,
    map_vars: &[VarId],
    config: EngineConfig,
) -> Result<MapSolution> {
    check_map_vars(&approx.net, map_vars)?;
    EngineState::compile_with(&approx.net, ev_prime, config)?.exact_map(map_vars)
}

/// Scores the instantiation `m` of `map_vars` in `net`. A width-cap refusal
/// while computing the exact MAP leaves `q` and the ratio empty.
pub fn map_quality(
    net: &Network,
    ev: &Evidence,
    map_vars: &[VarId],
    assignment: &[usize],
    config: EngineConfig,
) -> Result<MapResult> {
    check_map_vars(net, map_vars)?;
    if assignment.len() != map_vars.len() {
        return Err(Error::Config("assignment does not match the MAP variables".into()));
    }
    let st = EngineState::compile_with(net, ev, config)?;
    let mut m = Evidence::new();
    for (&v, &s) in map_vars.iter().zip(assignment) {
        m.set(v, s);
    }
    let p = st.probability_with(&m)?;
    // Re-evaluating the exact MAP the same way as `m` makes the ratio exactly
    // 1 whenever the two assignments agree.
    let q = match st.exact_map(map_vars) {
        Ok(sol) if sol.assignment == assignment => Some(p),
        Ok(sol) => Some(sol.value.max(p)),
        Err(Error::WidthCap { width, cap }) => {
            log::info!("exact MAP skipped: constrained width {width} exceeds cap {cap}");
            None
        }
        Err(e) => return Err(e),
    };
    let ratio = match q {
        Some(q) if q > 0.0 => Some((p / q).min(1.0)),
        Some(_) => {
            log::warn!("exact MAP value is zero; ratio undefined");
            None
        }
        None => None,
    };
    Ok(MapResult {
        map_vars: map_vars.to_vec(),
        assignment: assignment.to_vec(),
        approx_value: None,
        p,
        q,
        ratio,
    })
}

/// Approximate MAP in `N'`, scored in `net`.
pub fn approximate_map_quality(
    net: &Network,
    approx: &DeletedNetwork,
    ev: &Evidence,
    map_vars: &[VarId],
    config: EngineConfig,
) -> Result<MapResult> {
    let sol = approximate_map(approx, &approx.evidence(ev), map_vars, config)?;
    let mut r = map_quality(net, ev, map_vars, &sol.assignment, config)?;
    r.approx_value = Some(sol.value);
    Ok(r)
}
