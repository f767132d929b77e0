//! Brute-force joint enumeration. Exponential in the number of unobserved
//! variables; used as the ground-truth oracle for small networks.

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::model::{Evidence, Network, VarId};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

/// Unnormalized joint `Pr(w, e)` over all unobserved variables (declaration
/// order). Summing the table gives `Pr(e)`.
pub fn enumerate_joint(net: &Network, ev: &Evidence) -> Result<Factor> {
    enumerate_joint_with_cap(net, ev, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_joint_with_cap(net: &Network, ev: &Evidence, cap: u128) -> Result<Factor> {
    ev.check(net)?;
    let free: Vec<VarId> = net.ids().filter(|v| !ev.contains(*v)).collect();
    let required: u128 = free.iter().map(|&v| net.card(v) as u128).product();
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let cards: Vec<usize> = free.iter().map(|&v| net.card(v)).collect();

    let mut state: Vec<usize> = ev.dense(net.len()).into_iter().map(|s| s.unwrap_or(0)).collect();
    let families: Vec<(Vec<usize>, Vec<usize>, &[f64])> = net
        .cpts()
        .iter()
        .map(|c| {
            let fam: Vec<usize> = c.family().iter().map(|v| v.0).collect();
            let fcards: Vec<usize> = fam.iter().map(|&i| net.card(VarId(i))).collect();
            let mut st = vec![1; fam.len()];
            for i in (0..fam.len().saturating_sub(1)).rev() {
                st[i] = st[i + 1] * fcards[i + 1];
            }
            (fam, st, c.table.as_slice())
        })
        .collect();

    let len = required as usize;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        let mut p = 1.0;
        for (fam, st, table) in &families {
            let idx: usize = fam.iter().zip(st).map(|(&v, &s)| state[v] * s).sum();
            p *= table[idx];
            if p == 0.0 {
                break;
            }
        }
        values.push(p);
        for l in (0..free.len()).rev() {
            let v = free[l].0;
            state[v] += 1;
            if state[v] < cards[l] {
                break;
            }
            state[v] = 0;
        }
    }
    Ok(Factor::from_parts_unchecked(free, cards, values))
}

/// `Pr(e)` by enumeration.
pub fn enumerate_probability(net: &Network, ev: &Evidence) -> Result<f64> {
    Ok(enumerate_joint(net, ev)?.total())
}

/// Posterior over `keep` by enumeration; observed members are point masses.
pub fn enumerate_posterior(net: &Network, ev: &Evidence, keep: &[VarId]) -> Result<Factor> {
    let joint = enumerate_joint(net, ev)?;
    let mut m = joint.marginalize(keep);
    for &v in keep {
        if let Some(s) = ev.get(v) {
            m = m.product(&Factor::indicator(v, net.card(v), s))?;
        }
    }
    let m = m.permuted(keep)?;
    m.normalized().ok_or(Error::InconsistentEvidence)
}
