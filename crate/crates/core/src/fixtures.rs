//! Small hand-built networks with known answers.

use crate::model::{Cpt, Evidence, Network, VarId, Variable};

/// One binary variable `A` with prior `[p, 1 - p]`.
pub fn single_binary(p: f64) -> Network {
    Network::new(
        vec![Variable::new("A", &["a0", "a1"])],
        vec![Cpt::new(VarId(0), vec![], vec![p, 1.0 - p])],
    )
    .expect("well formed")
}

/// Two uniform roots `U1`, `U2` and two observed children `X1`, `X2`, each
/// in state `x` exactly when `U1` and `U2` agree. Evidence is `X1 = x,
/// X2 = x`, so `Pr(e) = 0.5` and both roots have uniform posteriors.
///
/// Deleting `U1 -> X1` leaves a polytree on which every positive edge
/// parametrization satisfies the IBP-style fixed-point conditions, while only
/// the uniform one gives exact marginals.
pub fn equivalence_loop() -> (Network, Evidence) {
    let agree = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
    let net = Network::new(
        vec![
            Variable::new("U1", &["u", "not_u"]),
            Variable::new("U2", &["u", "not_u"]),
            Variable::new("X1", &["x", "not_x"]),
            Variable::new("X2", &["x", "not_x"]),
        ],
        vec![
            Cpt::new(VarId(0), vec![], vec![0.5, 0.5]),
            Cpt::new(VarId(1), vec![], vec![0.5, 0.5]),
            Cpt::new(VarId(2), vec![VarId(0), VarId(1)], agree.clone()),
            Cpt::new(VarId(3), vec![VarId(0), VarId(1)], agree),
        ],
    )
    .expect("well formed");
    let ev = Evidence::new().with(VarId(2), 0).with(VarId(3), 0);
    (net, ev)
}

/// `A -> B` with asymmetric CPTs.
pub fn two_node_chain() -> Network {
    Network::new(
        vec![Variable::new("A", &["a0", "a1"]), Variable::new("B", &["b0", "b1"])],
        vec![
            Cpt::new(VarId(0), vec![], vec![0.3, 0.7]),
            Cpt::new(VarId(1), vec![VarId(0)], vec![0.9, 0.1, 0.2, 0.8]),
        ],
    )
    .expect("well formed")
}
