//! Dense factors over discrete variables.
//!
//! Values are stored lexicographically over the scope with the last variable
//! varying fastest.

use crate::error::{Error, Result};
use crate::model::VarId;

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Reduce {
    Sum,
    Max,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::Factor("scope and cardinality lengths differ".into()));
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::Factor(format!("variable {v} repeated in scope")));
            }
        }
        let len: usize = cards.iter().product();
        if values.len() != len {
            return Err(Error::Factor(format!(
                "table has {} entries, scope needs {len}",
                values.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Factor(format!("entry {x} is not a finite nonnegative value")));
        }
        Ok(Factor {
            scope,
            cards,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Factor {
            scope,
            cards,
            values,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn ones(scope: Vec<VarId>, cards: Vec<usize>) -> Self {
        let len = cards.iter().product();
        Factor {
            scope,
            cards,
            values: vec![1.0; len],
        }
    }

    /// Point mass (indicator) on `state` of `v`.
    pub fn indicator(v: VarId, card: usize, state: usize) -> Self {
        let mut values = vec![0.0; card];
        values[state] = 1.0;
        Factor {
            scope: vec![v],
            cards: vec![card],
            values,
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.scope.contains(&v)
    }

    pub fn card_of(&self, v: VarId) -> Option<usize> {
        self.scope.iter().position(|&u| u == v).map(|i| self.cards[i])
    }

    /// Entry at a full assignment given in scope order.
    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        let idx: usize = assignment
            .iter()
            .zip(strides(&self.cards))
            .map(|(a, s)| a * s)
            .sum();
        self.values[idx]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalized(&self) -> Option<Factor> {
        let z = self.total();
        (z > 0.0).then(|| Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|x| x / z).collect(),
        })
    }

    /// Pointwise product over the union scope (this factor's variables first).
    /// Overflow to infinity is reported as a numerical failure.
    pub fn product(&self, other: &Factor) -> Result<Factor> {
        let out = self.product_unchecked(other)?;
        if out.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("factor product overflowed".into()));
        }
        Ok(out)
    }

    fn product_unchecked(&self, other: &Factor) -> Result<Factor> {
        if other.scope.is_empty() {
            let c = other.values[0];
            return Ok(Factor {
                scope: self.scope.clone(),
                cards: self.cards.clone(),
                values: self.values.iter().map(|x| x * c).collect(),
            });
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (i, v) in other.scope.iter().enumerate() {
            match self.scope.iter().position(|u| u == v) {
                Some(j) if self.cards[j] != other.cards[i] => {
                    return Err(Error::Factor(format!(
                        "variable {v} has cardinality {} and {}",
                        self.cards[j], other.cards[i]
                    )))
                }
                Some(_) => {}
                None => {
                    scope.push(*v);
                    cards.push(other.cards[i]);
                }
            }
        }
        let fs = self.strides_in(&scope);
        let gs = other.strides_in(&scope);
        let len: usize = cards.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut assign = vec![0usize; scope.len()];
        let (mut j, mut k) = (0usize, 0usize);
        for _ in 0..len {
            values.push(self.values[j] * other.values[k]);
            for l in (0..scope.len()).rev() {
                assign[l] += 1;
                if assign[l] < cards[l] {
                    j += fs[l];
                    k += gs[l];
                    break;
                }
                j -= (cards[l] - 1) * fs[l];
                k -= (cards[l] - 1) * gs[l];
                assign[l] = 0;
            }
        }
        Ok(Factor {
            scope,
            cards,
            values,
        })
    }

    /// Stride of each variable of `scope` within this factor's table (zero
    /// for variables this factor does not mention).
    fn strides_in(&self, scope: &[VarId]) -> Vec<usize> {
        let own = strides(&self.cards);
        scope
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|u| u == v)
                    .map_or(0, |i| own[i])
            })
            .collect()
    }

    /// Sums out every variable not in `keep`. The result keeps this factor's
    /// variable order; variables of `keep` outside the scope are ignored.
    pub fn marginalize(&self, keep: &[VarId]) -> Factor {
        self.project(keep, Reduce::Sum)
    }

    pub fn sum_out(&self, v: VarId) -> Factor {
        let keep: Vec<VarId> = self.scope.iter().copied().filter(|&u| u != v).collect();
        self.project(&keep, Reduce::Sum)
    }

    pub fn max_out(&self, v: VarId) -> Factor {
        let keep: Vec<VarId> = self.scope.iter().copied().filter(|&u| u != v).collect();
        self.project(&keep, Reduce::Max)
    }

    fn project(&self, keep: &[VarId], op: Reduce) -> Factor {
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        for (v, c) in self.scope.iter().zip(&self.cards) {
            if keep.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        if scope.len() == self.scope.len() {
            return self.clone();
        }
        let out_strides = strides(&cards);
        let os: Vec<usize> = self
            .scope
            .iter()
            .map(|v| scope.iter().position(|u| u == v).map_or(0, |i| out_strides[i]))
            .collect();
        let len: usize = cards.iter().product();
        let mut values = match op {
            Reduce::Sum => vec![0.0; len],
            Reduce::Max => vec![f64::NEG_INFINITY; len],
        };
        let mut assign = vec![0usize; self.scope.len()];
        let mut k = 0usize;
        for &x in &self.values {
            match op {
                Reduce::Sum => values[k] += x,
                Reduce::Max => {
                    if x > values[k] {
                        values[k] = x
                    }
                }
            }
            for l in (0..self.scope.len()).rev() {
                assign[l] += 1;
                if assign[l] < self.cards[l] {
                    k += os[l];
                    break;
                }
                k -= (self.cards[l] - 1) * os[l];
                assign[l] = 0;
            }
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Restricts observed variables to their observed state and drops them
    /// from the scope.
    pub fn reduce(&self, observed: &[Option<usize>]) -> Factor {
        if !self
            .scope
            .iter()
            .any(|v| observed.get(v.0).copied().flatten().is_some())
        {
            return self.clone();
        }
        let st = strides(&self.cards);
        let mut base = 0;
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        let mut free_strides = Vec::new();
        for (i, v) in self.scope.iter().enumerate() {
            match observed.get(v.0).copied().flatten() {
                Some(s) => base += s * st[i],
                None => {
                    scope.push(*v);
                    cards.push(self.cards[i]);
                    free_strides.push(st[i]);
                }
            }
        }
        let len: usize = cards.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut assign = vec![0usize; scope.len()];
        let mut k = base;
        for _ in 0..len {
            values.push(self.values[k]);
            for l in (0..scope.len()).rev() {
                assign[l] += 1;
                if assign[l] < cards[l] {
                    k += free_strides[l];
                    break;
                }
                k -= (cards[l] - 1) * free_strides[l];
                assign[l] = 0;
            }
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Same factor with its scope reordered to `order` (a permutation of the
    /// scope).
    pub fn permuted(&self, order: &[VarId]) -> Result<Factor> {
        if order.len() != self.scope.len() || order.iter().any(|v| !self.scope.contains(v)) {
            return Err(Error::Factor("permutation does not match scope".into()));
        }
        let cards: Vec<usize> = order
            .iter()
            .map(|&v| self.card_of(v).expect("checked above"))
            .collect();
        Factor::ones(order.to_vec(), cards).product_unchecked(self)
    }
}
