//! Prizes, lotteries, Anscombe–Aumann acts, menus and SEU evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::rational::{fmt_q, Q};

/// Ordered, distinct labels for a finite prize or state space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Labels(Vec<String>);

impl Labels {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invariant("non-empty", "label list is empty"));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::invariant("distinct labels", format!("{labels:?}")));
        }
        Ok(Labels(labels))
    }

    /// Labels "prefix0", "prefix1", ...
    pub fn numbered(prefix: &str, n: usize) -> Self {
        Labels((0..n.max(1)).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    pub fn label(&self, i: usize) -> &str {
        &self.0[i]
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl TryFrom<Vec<String>> for Labels {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Labels::new(v)
    }
}

impl From<Labels> for Vec<String> {
    fn from(l: Labels) -> Self {
        l.0
    }
}

pub type PrizeSpace = Labels;
pub type StateSpace = Labels;

/// A consequence: a prize at the last period, or a prize paired with a continuation menu.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Prize(usize),
    Cont(usize, Arc<Menu>),
}

impl Outcome {
    pub fn prize(&self) -> usize {
        match self {
            Outcome::Prize(z) | Outcome::Cont(z, _) => *z,
        }
    }

    pub fn continuation(&self) -> Option<&Menu> {
        match self {
            Outcome::Prize(_) => None,
            Outcome::Cont(_, m) => Some(m),
        }
    }
}

/// Simple lottery with exact probabilities; zero entries are never stored.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<LotteryEntry>", into = "Vec<LotteryEntry>")]
pub struct Lottery(BTreeMap<Outcome, Q>);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LotteryEntry(pub Outcome, #[serde(with = "crate::rational::serde_q")] pub Q);

impl TryFrom<Vec<LotteryEntry>> for Lottery {
    type Error = Error;
    fn try_from(v: Vec<LotteryEntry>) -> Result<Self> {
        Lottery::new(v.into_iter().map(|e| (e.0, e.1)))
    }
}

impl From<Lottery> for Vec<LotteryEntry> {
    fn from(l: Lottery) -> Self {
        l.0.into_iter().map(|(o, p)| LotteryEntry(o, p)).collect()
    }
}

impl Lottery {
    pub fn new(entries: impl IntoIterator<Item = (Outcome, Q)>) -> Result<Self> {
        let mut map: BTreeMap<Outcome, Q> = BTreeMap::new();
        for (o, p) in entries {
            if p.is_negative() {
                return Err(Error::invariant("probabilities ≥ 0", format!("{} on {:?}", fmt_q(&p), o)));
            }
            *map.entry(o).or_insert_with(Q::zero) += p;
        }
        map.retain(|_, p| !p.is_zero());
        let total = map.values().fold(Q::zero(), |a, p| a + p);
        if !total.is_one() {
            return Err(Error::invariant("probabilities sum to 1", format!("sum is {}", fmt_q(&total))));
        }
        Ok(Lottery(map))
    }

    pub fn degenerate(o: Outcome) -> Self {
        Lottery(BTreeMap::from([(o, Q::one())]))
    }

    pub fn prize(z: usize) -> Self {
        Self::degenerate(Outcome::Prize(z))
    }

    /// Dense probability vector over prizes 0..n.
    pub fn over_prizes(probs: &[Q]) -> Result<Self> {
        Self::new(probs.iter().enumerate().map(|(z, p)| (Outcome::Prize(z), p.clone())))
    }

    pub fn uniform_prizes(n: usize) -> Self {
        let p = Q::new(1.into(), (n as i64).into());
        Lottery((0..n).map(|z| (Outcome::Prize(z), p.clone())).collect())
    }

    pub fn prob(&self, o: &Outcome) -> Q {
        self.0.get(o).cloned().unwrap_or_else(Q::zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Outcome, &Q)> {
        self.0.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Outcome> {
        self.0.keys()
    }

    /// λ·self + (1−λ)·other.
    pub fn mix(&self, lambda: &Q, other: &Lottery) -> Result<Lottery> {
        check_weight(lambda)?;
        let mu = Q::one() - lambda;
        let mut map: BTreeMap<Outcome, Q> = BTreeMap::new();
        for (o, p) in &self.0 {
            *map.entry(o.clone()).or_insert_with(Q::zero) += lambda * p;
        }
        for (o, p) in &other.0 {
            *map.entry(o.clone()).or_insert_with(Q::zero) += &mu * p;
        }
        map.retain(|_, p| !p.is_zero());
        Ok(Lottery(map))
    }

    pub fn expectation(&self, f: impl Fn(&Outcome) -> Q) -> Q {
        self.0.iter().fold(Q::zero(), |acc, (o, p)| acc + p * f(o))
    }

    /// Marginal over prizes.
    pub fn prize_marginal(&self) -> BTreeMap<usize, Q> {
        let mut m = BTreeMap::new();
        for (o, p) in &self.0 {
            *m.entry(o.prize()).or_insert_with(Q::zero) += p;
        }
        m
    }

    /// Marginal over continuation menus (empty at the last period).
    pub fn menu_marginal(&self) -> BTreeMap<Arc<Menu>, Q> {
        let mut m = BTreeMap::new();
        for (o, p) in &self.0 {
            if let Outcome::Cont(_, a) = o {
                *m.entry(a.clone()).or_insert_with(Q::zero) += p;
            }
        }
        m
    }
}

fn check_weight(lambda: &Q) -> Result<()> {
    if lambda.is_negative() || *lambda > Q::one() {
        return Err(Error::Domain(format!("mixture weight {} outside [0,1]", fmt_q(lambda))));
    }
    Ok(())
}

/// Anscombe–Aumann act: one lottery per objective state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Lottery>", into = "Vec<Lottery>")]
pub struct Act(Vec<Lottery>);

impl TryFrom<Vec<Lottery>> for Act {
    type Error = Error;
    fn try_from(v: Vec<Lottery>) -> Result<Self> {
        Act::new(v)
    }
}

impl From<Act> for Vec<Lottery> {
    fn from(a: Act) -> Self {
        a.0
    }
}

impl Act {
    pub fn new(rows: Vec<Lottery>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invariant("one lottery per state", "act has no rows"));
        }
        Ok(Act(rows))
    }

    pub fn constant(l: Lottery, n_states: usize) -> Self {
        Act(vec![l; n_states.max(1)])
    }

    /// Act paying prize `rows[s]` for sure in state s.
    pub fn from_prizes(rows: &[usize]) -> Self {
        Act(rows.iter().map(|&z| Lottery::prize(z)).collect())
    }

    pub fn n_states(&self) -> usize {
        self.0.len()
    }

    pub fn row(&self, s: usize) -> &Lottery {
        &self.0[s]
    }

    pub fn rows(&self) -> &[Lottery] {
        &self.0
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    pub fn mix(&self, lambda: &Q, other: &Act) -> Result<Act> {
        if self.n_states() != other.n_states() {
            return Err(Error::Shape(format!("acts over {} and {} states", self.n_states(), other.n_states())));
        }
        let rows = self.0.iter().zip(&other.0).map(|(a, b)| a.mix(lambda, b)).collect::<Result<Vec<_>>>()?;
        Ok(Act(rows))
    }

    /// Copy with row `s` replaced.
    pub fn with_row(&self, s: usize, l: Lottery) -> Act {
        let mut rows = self.0.clone();
        rows[s] = l;
        Act(rows)
    }
}

/// Finite non-empty set of acts, kept sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Act>", into = "Vec<Act>")]
pub struct Menu(Vec<Act>);

impl TryFrom<Vec<Act>> for Menu {
    type Error = Error;
    fn try_from(v: Vec<Act>) -> Result<Self> {
        Menu::new(v)
    }
}

impl From<Menu> for Vec<Act> {
    fn from(m: Menu) -> Self {
        m.0
    }
}

impl Menu {
    pub fn new(mut acts: Vec<Act>) -> Result<Self> {
        if acts.is_empty() {
            return Err(Error::invariant("non-empty menu", "no acts"));
        }
        let n = acts[0].n_states();
        if acts.iter().any(|a| a.n_states() != n) {
            return Err(Error::Shape("menu mixes acts over different state spaces".into()));
        }
        acts.sort();
        acts.dedup();
        Ok(Menu(acts))
    }

    pub fn singleton(f: Act) -> Self {
        Menu(vec![f])
    }

    pub fn acts(&self) -> &[Act] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.0[0].n_states()
    }

    pub fn index_of(&self, f: &Act) -> Option<usize> {
        self.0.binary_search(f).ok()
    }

    pub fn contains(&self, f: &Act) -> bool {
        self.index_of(f).is_some()
    }

    pub fn is_subset(&self, other: &Menu) -> bool {
        self.0.iter().all(|f| other.contains(f))
    }

    pub fn union(&self, other: &Menu) -> Result<Menu> {
        Menu::new(self.0.iter().chain(&other.0).cloned().collect())
    }

    pub fn with_act(&self, f: Act) -> Result<Menu> {
        let mut v = self.0.clone();
        v.push(f);
        Menu::new(v)
    }

    pub fn without(&self, f: &Act) -> Option<Menu> {
        let v: Vec<Act> = self.0.iter().filter(|g| *g != f).cloned().collect();
        Menu::new(v).ok()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Menu> {
        Menu::new(idx.iter().map(|&i| self.0[i].clone()).collect())
    }

    /// Minkowski mixture {λf + (1−λ)g : f ∈ self, g ∈ other}.
    pub fn mix(&self, lambda: &Q, other: &Menu) -> Result<Menu> {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for f in &self.0 {
            for g in &other.0 {
                out.push(f.mix(lambda, g)?);
            }
        }
        Menu::new(out)
    }

    /// λA + (1−λ){g}.
    pub fn mix_act(&self, lambda: &Q, g: &Act) -> Result<Menu> {
        self.mix(lambda, &Menu::singleton(g.clone()))
    }

    pub fn all_constant(&self) -> bool {
        self.0.iter().all(Act::is_constant)
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(o, p)| match o {
                Outcome::Prize(z) => format!("z{z}:{}", fmt_q(p)),
                Outcome::Cont(z, m) => format!("(z{z},menu[{}]):{}", m.len(), fmt_q(p)),
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "[{}]", parts.join(" | "))
    }
}

impl fmt::Display for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join("; "))
    }
}

/// Probability vector over objective states.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "BeliefRepr", into = "BeliefRepr")]
pub struct Belief(Vec<Q>);

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefRepr(#[serde(with = "crate::rational::serde_qvec")] Vec<Q>);

impl TryFrom<BeliefRepr> for Belief {
    type Error = Error;
    fn try_from(v: BeliefRepr) -> Result<Self> {
        Belief::new(v.0)
    }
}

impl From<Belief> for BeliefRepr {
    fn from(b: Belief) -> Self {
        BeliefRepr(b.0)
    }
}

impl Belief {
    pub fn new(probs: Vec<Q>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invariant("simplex membership", "empty belief"));
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(Error::invariant("simplex membership", "negative entry"));
        }
        let s = probs.iter().fold(Q::zero(), |a, p| a + p);
        if !s.is_one() {
            return Err(Error::invariant("simplex membership", format!("entries sum to {}", fmt_q(&s))));
        }
        Ok(Belief(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![Q::new(1.into(), (n as i64).into()); n])
    }

    pub fn point(n: usize, s: usize) -> Self {
        Belief((0..n).map(|i| if i == s { Q::one() } else { Q::zero() }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, s: usize) -> &Q {
        &self.0[s]
    }

    pub fn probs(&self) -> &[Q] {
        &self.0
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&s| !self.0[s].is_zero()).collect()
    }

    pub fn mix(&self, lambda: &Q, other: &Belief) -> Result<Belief> {
        if self.len() != other.len() {
            return Err(Error::Shape("beliefs over different state spaces".into()));
        }
        check_weight(lambda)?;
        let mu = Q::one() - lambda;
        Ok(Belief(self.0.iter().zip(&other.0).map(|(a, b)| lambda * a + &mu * b).collect()))
    }
}

/// Bernoulli utility: explicit values on listed consequences, `default` elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Utility {
    #[serde(with = "utility_values")]
    values: BTreeMap<Outcome, Q>,
    #[serde(with = "crate::rational::serde_q")]
    default: Q,
}

mod utility_values {
    use super::{Outcome, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Entry(Outcome, #[serde(with = "crate::rational::serde_q")] Q);

    pub fn serialize<S: Serializer>(m: &BTreeMap<Outcome, Q>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry> = m.iter().map(|(o, q)| Entry(o.clone(), q.clone())).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Outcome, Q>, D::Error> {
        let v = Vec::<Entry>::deserialize(d)?;
        Ok(v.into_iter().map(|e| (e.0, e.1)).collect())
    }
}

impl Utility {
    pub fn over_prizes(values: Vec<Q>) -> Self {
        Utility {
            values: values.into_iter().enumerate().map(|(z, v)| (Outcome::Prize(z), v)).collect(),
            default: Q::zero(),
        }
    }

    pub fn table(values: BTreeMap<Outcome, Q>, default: Q) -> Self {
        Utility { values, default }
    }

    pub fn value(&self, o: &Outcome) -> Q {
        self.values.get(o).cloned().unwrap_or_else(|| self.default.clone())
    }

    pub fn listed(&self, o: &Outcome) -> Option<&Q> {
        self.values.get(o)
    }

    pub fn default_value(&self) -> &Q {
        &self.default
    }

    pub fn of_lottery(&self, l: &Lottery) -> Q {
        l.expectation(|o| self.value(o))
    }

    pub fn keys(&self) -> impl Iterator<Item = &Outcome> {
        self.values.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Outcome, &Q)> {
        self.values.iter()
    }

    /// Dense values over prizes 0..n (default for unlisted prizes).
    pub fn prize_vector(&self, n: usize) -> Vec<Q> {
        (0..n).map(|z| self.value(&Outcome::Prize(z))).collect()
    }

    pub fn is_constant(&self) -> bool {
        let mut it = self.values.values();
        match it.next() {
            None => true,
            Some(first) => it.all(|v| v == first),
        }
    }

    /// α·u + β.
    pub fn affine(&self, alpha: &Q, beta: &Q) -> Utility {
        Utility {
            values: self.values.iter().map(|(o, v)| (o.clone(), alpha * v + beta)).collect(),
            default: alpha * &self.default + beta,
        }
    }

    fn basis_with<'a>(&'a self, other: &'a Utility) -> Vec<&'a Outcome> {
        let mut keys: BTreeSet<&Outcome> = self.values.keys().collect();
        keys.extend(other.values.keys());
        keys.into_iter().collect()
    }

    /// Positive affine equivalence on the union of listed consequences.
    pub fn affine_equivalent(&self, other: &Utility) -> bool {
        let basis = self.basis_with(other);
        let a: Vec<Q> = basis.iter().map(|o| self.value(o)).collect();
        let b: Vec<Q> = basis.iter().map(|o| other.value(o)).collect();
        affine_related(&a, &b)
    }

    /// Canonical representative: zero at the last listed consequence, max-abs entry 1.
    pub fn canonical(&self) -> Utility {
        let Some((_, reference)) = self.values.iter().next_back() else {
            return self.clone();
        };
        let reference = reference.clone();
        let shifted: Vec<Q> = self.values.values().map(|v| v - &reference).collect();
        let scale = crate::rational::max_abs(&shifted);
        if scale.is_zero() {
            return self.affine(&Q::one(), &-reference);
        }
        let alpha = Q::one() / &scale;
        self.affine(&alpha, &(-&reference * &alpha))
    }
}

/// Is b = α·a + β for some α > 0 (constant vectors only match constant vectors)?
pub fn affine_related(a: &[Q], b: &[Q]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let pivot = (1..a.len()).find(|&i| a[i] != a[0]);
    match pivot {
        None => b.iter().all(|v| *v == b[0]),
        Some(i) => {
            let alpha = (&b[i] - &b[0]) / (&a[i] - &a[0]);
            if !alpha.is_positive() {
                return false;
            }
            let beta = &b[0] - &alpha * &a[0];
            a.iter().zip(b).all(|(x, y)| *y == &alpha * x + &beta)
        }
    }
}

/// Anything that assigns a value to acts (an SEU pair, a node of a dynamic model).
pub trait Valuation {
    fn value(&self, f: &Act) -> Result<Q>;
}

/// Subjective expected utility: belief q and taste u.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeuPair {
    pub belief: Belief,
    pub utility: Utility,
}

impl SeuPair {
    pub fn new(belief: Belief, utility: Utility) -> Self {
        SeuPair { belief, utility }
    }

    /// Same preference over acts: equal beliefs, affinely equivalent non-constant utilities.
    pub fn same_preference(&self, other: &SeuPair) -> bool {
        self.belief == other.belief && self.utility.affine_equivalent(&other.utility)
    }

    pub fn canonical(&self) -> SeuPair {
        SeuPair { belief: self.belief.clone(), utility: self.utility.canonical() }
    }
}

impl Valuation for SeuPair {
    fn value(&self, f: &Act) -> Result<Q> {
        eval_with(&self.belief, f, |l| self.utility.of_lottery(l))
    }
}

/// Σ_s q(s)·U(f(s)) for an arbitrary lottery valuation U.
pub fn eval_with(q: &Belief, f: &Act, u: impl Fn(&Lottery) -> Q) -> Result<Q> {
    if f.n_states() != q.len() {
        return Err(Error::Shape(format!("act over {} states, belief over {}", f.n_states(), q.len())));
    }
    let mut total = Q::zero();
    for (s, p) in q.probs().iter().enumerate() {
        if !p.is_zero() {
            total += p * u(f.row(s));
        }
    }
    Ok(total)
}

pub fn eval_act(seu: &SeuPair, f: &Act) -> Result<Q> {
    seu.value(f)
}

/// Indices of the maximizers of `v` in `menu`.
pub fn argmax_set<V: Valuation + ?Sized>(menu: &Menu, v: &V) -> Result<Vec<usize>> {
    argmax_among(menu, &(0..menu.len()).collect::<Vec<_>>(), v)
}

/// Maximizers of `v` among the listed indices of `menu`.
pub fn argmax_among<V: Valuation + ?Sized>(menu: &Menu, idx: &[usize], v: &V) -> Result<Vec<usize>> {
    let mut best: Option<Q> = None;
    let mut out = Vec::new();
    for &i in idx {
        let x = v.value(&menu.acts()[i])?;
        match &best {
            Some(b) if x < *b => {}
            Some(b) if x == *b => out.push(i),
            _ => {
                best = Some(x);
                out.clear();
                out.push(i);
            }
        }
    }
    Ok(out)
}

pub fn rationalizes<V: Valuation + ?Sized>(v: &V, menu: &Menu, f: &Act) -> Result<bool> {
    let i = menu.index_of(f).ok_or_else(|| Error::Domain("act is not in the menu".into()))?;
    Ok(argmax_set(menu, v)?.contains(&i))
}

/// Flatten acts of a menu into coordinate vectors over (state, consequence).
fn coordinates(acts: &[&Act]) -> Vec<Vec<Q>> {
    let n = acts.first().map_or(0, |a| a.n_states());
    let mut axes: Vec<(usize, &Outcome)> = Vec::new();
    for s in 0..n {
        let keys: BTreeSet<&Outcome> = acts.iter().flat_map(|a| a.row(s).support()).collect();
        axes.extend(keys.into_iter().map(|o| (s, o)));
    }
    acts.iter().map(|a| axes.iter().map(|(s, o)| a.row(*s).prob(o)).collect()).collect()
}

/// Indices of acts that are extreme points of conv(menu).
pub fn extreme_members(menu: &Menu) -> Vec<usize> {
    extreme_among(menu, &(0..menu.len()).collect::<Vec<_>>())
}

/// Extreme points of the convex hull of the listed acts.
pub fn extreme_among(menu: &Menu, idx: &[usize]) -> Vec<usize> {
    if idx.len() <= 2 {
        return idx.to_vec();
    }
    let acts: Vec<&Act> = idx.iter().map(|&i| &menu.acts()[i]).collect();
    let coords = coordinates(&acts);
    let mut out = Vec::new();
    for k in 0..idx.len() {
        let others: Vec<Vec<Q>> = (0..idx.len()).filter(|&j| j != k).map(|j| coords[j].clone()).collect();
        if lp::convex_weights(&others, &coords[k]).is_none() {
            out.push(idx[k]);
        }
    }
    out
}

/// Ā: all constant acts paying f(s′) for some f ∈ A, s′ ∈ S.
pub fn bar_menu(menu: &Menu) -> Menu {
    let n = menu.n_states();
    let mut acts = Vec::new();
    for f in menu.acts() {
        for l in f.rows() {
            acts.push(Act::constant(l.clone(), n));
        }
    }
    Menu::new(acts).expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn seu(b: Vec<Q>, u: Vec<Q>) -> SeuPair {
        SeuPair::new(Belief::new(b).unwrap(), Utility::over_prizes(u))
    }

    #[test]
    fn constant_act_ignores_beliefs() {
        let f = Act::constant(Lottery::over_prizes(&[q(1, 3), q(2, 3)]).unwrap(), 2);
        for b in [vec![qi(1), qi(0)], vec![q(1, 5), q(4, 5)]] {
            let s = seu(b, vec![qi(3), qi(0)]);
            assert_eq!(eval_act(&s, &f).unwrap(), qi(1));
        }
    }

    #[test]
    fn hire_values() {
        // prizes G=0 (u=1), B=1 (u=-1), N=2 (u=0)
        let h = Act::from_prizes(&[0, 1]);
        let nh = Act::from_prizes(&[2, 2]);
        let menu = Menu::new(vec![h.clone(), nh.clone()]).unwrap();
        let biased = seu(vec![q(3, 4), q(1, 4)], vec![qi(1), qi(-1), qi(0)]);
        assert_eq!(eval_act(&biased, &h).unwrap(), q(1, 2));
        assert_eq!(argmax_set(&menu, &biased).unwrap(), vec![menu.index_of(&h).unwrap()]);
        assert!(rationalizes(&biased, &menu, &h).unwrap());
        assert!(!rationalizes(&biased, &menu, &nh).unwrap());
        let fair = seu(vec![q(1, 2), q(1, 2)], vec![qi(1), qi(-1), qi(0)]);
        assert_eq!(eval_act(&fair, &h).unwrap(), qi(0));
        assert_eq!(argmax_set(&menu, &fair).unwrap().len(), 2);
        assert!(rationalizes(&fair, &menu, &nh).unwrap());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = seu(vec![q(1, 2), q(1, 2)], vec![qi(1), qi(0)]);
        let f = Act::from_prizes(&[0, 1, 0]);
        assert!(matches!(eval_act(&s, &f), Err(Error::Shape(_))));
    }

    #[test]
    fn rationalizes_requires_membership() {
        let s = seu(vec![qi(1)], vec![qi(1), qi(0)]);
        let menu = Menu::singleton(Act::from_prizes(&[0]));
        assert!(matches!(rationalizes(&s, &menu, &Act::from_prizes(&[1])), Err(Error::Domain(_))));
    }

    #[test]
    fn mixing_examples() {
        let a = Lottery::prize(0);
        let b = Lottery::prize(1);
        assert_eq!(a.mix(&qi(1), &b).unwrap(), a);
        assert_eq!(a.mix(&q(1, 2), &b).unwrap(), Lottery::over_prizes(&[q(1, 2), q(1, 2)]).unwrap());
        let f = Act::from_prizes(&[0]);
        let g = Act::from_prizes(&[1]);
        let h = Act::from_prizes(&[2]);
        let m = Menu::singleton(f).mix(&q(1, 2), &Menu::new(vec![g, h]).unwrap()).unwrap();
        assert_eq!(m.len(), 2);
        assert!(Lottery::prize(0).mix(&q(3, 2), &Lottery::prize(1)).is_err());
    }

    #[test]
    fn extreme_members_drops_midpoint() {
        let f = Act::from_prizes(&[0, 1]);
        let g = Act::from_prizes(&[1, 0]);
        let mid = f.mix(&q(1, 2), &g).unwrap();
        let menu = Menu::new(vec![f.clone(), g.clone(), mid]).unwrap();
        let ext: BTreeSet<&Act> = extreme_members(&menu).into_iter().map(|i| &menu.acts()[i]).collect();
        assert_eq!(ext, BTreeSet::from([&f, &g]));
    }

    #[test]
    fn bar_menu_examples() {
        let f = Act::from_prizes(&[0, 1]);
        let g = Act::from_prizes(&[2, 3]);
        let bar = bar_menu(&Menu::new(vec![f, g]).unwrap());
        assert_eq!(bar.len(), 4);
        assert!(bar.all_constant());
        let c = Act::from_prizes(&[1, 1]);
        assert_eq!(bar_menu(&Menu::singleton(c.clone())), Menu::singleton(c));
    }

    #[test]
    fn canonical_matches_affine_equivalence() {
        let u = Utility::over_prizes(vec![qi(3), qi(-1), qi(2)]);
        let v = u.affine(&q(5, 2), &qi(7));
        assert!(u.affine_equivalent(&v));
        assert_eq!(u.canonical(), v.canonical());
        let w = u.affine(&qi(-1), &qi(0));
        assert!(!u.affine_equivalent(&w));
        assert_ne!(u.canonical(), w.canonical());
    }

    #[test]
    fn lottery_invariants() {
        assert!(Lottery::over_prizes(&[q(1, 3), q(1, 3)]).is_err());
        assert!(Lottery::over_prizes(&[q(4, 3), q(-1, 3)]).is_err());
        assert!(Belief::new(vec![q(1, 3), q(1, 3)]).is_err());
    }
}
