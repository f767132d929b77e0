//! Seeded synthetic networks: chains, grids, and random DAGs.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::Exp1;

use crate::model::{Cpt, Evidence, Network, VarId, Variable};

/// How CPT rows are drawn for synthetic networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyntheticCptLaw {
    /// Each row independently uniform on the probability simplex.
    #[default]
    UniformSimplex,
}

impl SyntheticCptLaw {
    /// Tag recorded in experiment output so reports can be matched to the law
    /// that generated them.
    pub fn version(self) -> &'static str {
        match self {
            SyntheticCptLaw::UniformSimplex => "uniform-simplex/v1",
        }
    }

    pub fn sample_row<R: Rng + ?Sized>(self, rng: &mut R, card: usize) -> Vec<f64> {
        match self {
            SyntheticCptLaw::UniformSimplex => {
                // Normalized unit exponentials are Dirichlet(1, ..., 1).
                let mut row: Vec<f64> = (0..card).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= z);
                row
            }
        }
    }

    pub fn sample_table<R: Rng + ?Sized>(self, rng: &mut R, rows: usize, card: usize) -> Vec<f64> {
        (0..rows).flat_map(|_| self.sample_row(rng, card)).collect()
    }
}

fn build(variables: Vec<Variable>, parents: Vec<Vec<VarId>>, mut table: impl FnMut(usize, usize) -> Vec<f64>) -> Network {
    let cards: Vec<usize> = variables.iter().map(Variable::cardinality).collect();
    let cpts = parents
        .into_iter()
        .enumerate()
        .map(|(i, ps)| {
            let rows: usize = ps.iter().map(|p| cards[p.0]).product();
            Cpt::new(VarId(i), ps, table(rows, cards[i]))
        })
        .collect();
    Network::new(variables, cpts).expect("synthetic networks are well formed")
}

fn uniform_table(rows: usize, card: usize) -> Vec<f64> {
    vec![1.0 / card as f64; rows * card]
}

fn chain_parents(n: usize) -> Vec<Vec<VarId>> {
    (0..n)
        .map(|i| if i == 0 { vec![] } else { vec![VarId(i - 1)] })
        .collect()
}

fn grid_parents(rows: usize, cols: usize) -> Vec<Vec<VarId>> {
    let id = |i: usize, j: usize| VarId(i * cols + j);
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut ps = Vec::new();
            if i > 0 {
                ps.push(id(i - 1, j));
            }
            if j > 0 {
                ps.push(id(i, j - 1));
            }
            out.push(ps);
        }
    }
    out
}

fn named(prefix: &str, n: usize, card: usize) -> Vec<Variable> {
    (0..n)
        .map(|i| Variable::with_cardinality(format!("{prefix}{i}"), card))
        .collect()
}

fn grid_vars(rows: usize, cols: usize, card: usize) -> Vec<Variable> {
    (0..rows * cols)
        .map(|k| Variable::with_cardinality(format!("g{}_{}", k / cols, k % cols), card))
        .collect()
}

/// `X0 -> X1 -> ... -> X{n-1}` with uniform CPTs.
pub fn chain_structure(n: usize, card: usize) -> Network {
    build(named("X", n, card), chain_parents(n), uniform_table)
}

/// `rows × cols` grid where node `(i, j)` has parents `(i-1, j)` and
/// `(i, j-1)`; uniform CPTs.
pub fn grid_structure(rows: usize, cols: usize, card: usize) -> Network {
    build(grid_vars(rows, cols, card), grid_parents(rows, cols), uniform_table)
}

pub fn independent_structure(n: usize, card: usize) -> Network {
    build(named("X", n, card), vec![vec![]; n], uniform_table)
}

pub fn chain<R: Rng + ?Sized>(rng: &mut R, n: usize, card: usize, law: SyntheticCptLaw) -> Network {
    build(named("X", n, card), chain_parents(n), |r, c| law.sample_table(rng, r, c))
}

pub fn grid<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, card: usize, law: SyntheticCptLaw) -> Network {
    build(grid_vars(rows, cols, card), grid_parents(rows, cols), |r, c| {
        law.sample_table(rng, r, c)
    })
}

/// Bottom row and right column of a grid, where evidence is placed.
pub fn grid_frontier(rows: usize, cols: usize) -> Vec<VarId> {
    (0..rows * cols)
        .filter(|k| k / cols == rows - 1 || k % cols == cols - 1)
        .map(VarId)
        .collect()
}

/// Top row and left column of a grid.
pub fn grid_top_left(rows: usize, cols: usize) -> Vec<VarId> {
    (0..rows * cols)
        .filter(|k| k / cols == 0 || k % cols == 0)
        .map(VarId)
        .collect()
}

/// Random DAG over `n` variables in declaration order, each with 2 to
/// `max_states` states and up to `max_parents` earlier parents.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, max_states: usize, max_parents: usize) -> Network {
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_states.max(2))).collect();
    let vars = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Variable::with_cardinality(format!("V{i}"), c))
        .collect();
    let parents = (0..n)
        .map(|i| {
            let k = rng.gen_range(0..=max_parents.min(i));
            let mut ps: Vec<VarId> = sample(rng, i, k).into_iter().map(VarId).collect();
            ps.sort();
            ps
        })
        .collect();
    build(vars, parents, |r, c| SyntheticCptLaw::UniformSimplex.sample_table(rng, r, c))
}

/// Two random components joined by the single edge `bridge_parent -> bridge_child`,
/// returned alongside the network.
pub fn random_bridged<R: Rng + ?Sized>(rng: &mut R, left: usize, right: usize, max_states: usize) -> (Network, (VarId, VarId)) {
    let n = left + right;
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=max_states.max(2))).collect();
    let vars = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Variable::with_cardinality(format!("V{i}"), c))
        .collect();
    let pick = |rng: &mut R, lo: usize, hi: usize| -> Vec<VarId> {
        let k = rng.gen_range(0..=2.min(hi - lo));
        let mut ps: Vec<VarId> = sample(rng, hi - lo, k).into_iter().map(|i| VarId(lo + i)).collect();
        ps.sort();
        ps
    };
    let bridge_parent = VarId(rng.gen_range(0..left));
    let bridge_child = VarId(left + rng.gen_range(0..right));
    let mut parents: Vec<Vec<VarId>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut ps = if i < left { pick(rng, 0, i) } else { pick(rng, left, i) };
        if VarId(i) == bridge_child {
            ps.insert(0, bridge_parent);
        }
        parents.push(ps);
    }
    let net = build(vars, parents, |r, c| SyntheticCptLaw::UniformSimplex.sample_table(rng, r, c));
    (net, (bridge_parent, bridge_child))
}

/// Random states on up to `max_observed` random variables.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &Network, max_observed: usize) -> Evidence {
    let k = rng.gen_range(0..=max_observed.min(net.len()));
    let mut ev = Evidence::new();
    for i in sample(rng, net.len(), k) {
        let v = VarId(i);
        ev.set(v, rng.gen_range(0..net.card(v)));
    }
    ev
}
