//! Dynamic R-SEU: finite θ-trees with transition kernels, history-conditional choice,
//! the extended aSCF and separating histories.
//!
//! Period `t` acts pay lotteries over consequences `Outcome::Cont(z, A_{t+1})` for
//! `t < T` and `Outcome::Prize(z)` at the horizon. A node θ_t = (q_t, u_t, s_t) stores
//! its parent, its kernel probability ψ_t^{θ_{t−1}}(θ_t) and its tie-breaking cascade.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{affine_related, argmax_set, Act, Belief, Labels, Lottery, Menu, Outcome, SeuPair, Utility, Valuation};
use crate::error::{Error, Result};
use crate::rational::{fmt_q, q, to_f64, Q};
use crate::separation::{separating_menu, SeparatingMenu};
use crate::static_model::{cumulative, draw, ModelFlags, TieBreakCascade};

/// How a node values consequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Taste {
    /// u(z, A) = v(z); continuation menus are ignored.
    Prize {
        #[serde(with = "crate::rational::serde_qvec")]
        values: Vec<Q>,
    },
    /// Explicit values on listed consequences.
    Table { utility: Utility },
    /// u(z, A) = v(z) + δ·V^θ(A) with V^θ the kernel-weighted value of the menu.
    Felicity {
        #[serde(with = "crate::rational::serde_qvec")]
        values: Vec<Q>,
    },
    /// α·base + β.
    Scaled {
        #[serde(with = "crate::rational::serde_q")]
        alpha: Q,
        #[serde(with = "crate::rational::serde_q")]
        beta: Q,
        base: Box<Taste>,
    },
}

impl Taste {
    fn table_keys<'a>(&'a self, out: &mut BTreeSet<&'a Outcome>) {
        match self {
            Taste::Table { utility } => out.extend(utility.keys()),
            Taste::Scaled { base, .. } => base.table_keys(out),
            _ => {}
        }
    }

    /// Felicity vector, for Bellman-form tastes.
    pub fn felicity(&self) -> Option<&[Q]> {
        match self {
            Taste::Felicity { values } => Some(values),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    #[default]
    Drseu,
    Evolving,
    Gl,
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::Drseu => "drseu",
            ModelClass::Evolving => "evolving",
            ModelClass::Gl => "gl",
        })
    }
}

impl std::str::FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drseu" => Ok(ModelClass::Drseu),
            "evolving" => Ok(ModelClass::Evolving),
            "gl" => Ok(ModelClass::Gl),
            other => Err(Error::Parse(format!("unknown model class {other:?}"))),
        }
    }
}

/// A subjective state θ_t.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    pub belief: Belief,
    pub taste: Taste,
    pub state: usize,
    /// ψ_t^{parent}(this node); the prior ψ_0 at the root level.
    #[serde(with = "crate::rational::serde_q")]
    pub prob: Q,
    #[serde(default)]
    pub cascade: TieBreakCascade,
}

/// Number of prizes and per-period state counts; enough to build probe menus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n_prizes: usize,
    pub n_states: Vec<usize>,
}

impl Dims {
    pub fn horizon(&self) -> usize {
        self.n_states.len() - 1
    }

    /// Consequence paying z now and the null continuation afterwards.
    pub fn null_outcome(&self, t: usize, z: usize) -> Outcome {
        if t == self.horizon() {
            Outcome::Prize(z)
        } else {
            Outcome::Cont(z, Arc::new(self.null_menu(t + 1)))
        }
    }

    /// {constant act paying prize 0 in every remaining period}
    pub fn null_menu(&self, t: usize) -> Menu {
        Menu::singleton(self.constant(t, self.null_outcome(t, 0)))
    }

    pub fn constant(&self, t: usize, o: Outcome) -> Act {
        Act::constant(Lottery::degenerate(o), self.n_states[t])
    }

    /// Level-t menus used as continuations when materializing period t−1 tastes.
    pub fn probe_menus(&self, t: usize) -> Vec<Menu> {
        let mut out = vec![self.null_menu(t)];
        let singles: Vec<Act> = (0..self.n_prizes).map(|z| self.constant(t, self.null_outcome(t, z))).collect();
        for a in &singles {
            out.push(Menu::singleton(a.clone()));
        }
        if singles.len() > 1 {
            out.push(Menu::new(singles).expect("non-empty"));
        }
        out.sort();
        out.dedup();
        out
    }

    /// Finite set of period-t consequences on which tastes are compared and separated.
    pub fn probe_basis(&self, t: usize) -> Vec<Outcome> {
        if t == self.horizon() {
            return (0..self.n_prizes).map(Outcome::Prize).collect();
        }
        let mut out = Vec::new();
        for m in self.probe_menus(t + 1) {
            let m = Arc::new(m);
            for z in 0..self.n_prizes {
                out.push(Outcome::Cont(z, m.clone()));
            }
        }
        out
    }
}

/// Finite DR-SEU representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicModel {
    prizes: Labels,
    states: Vec<Labels>,
    levels: Vec<Vec<Node>>,
    children: Vec<Vec<Vec<usize>>>,
    delta: Option<Q>,
    class: ModelClass,
    flags: ModelFlags,
}

fn sum_q<'a>(xs: impl IntoIterator<Item = &'a Q>) -> Q {
    xs.into_iter().fold(Q::zero(), |a, x| a + x)
}

impl DynamicModel {
    pub fn new(
        prizes: Labels,
        states: Vec<Labels>,
        levels: Vec<Vec<Node>>,
        delta: Option<Q>,
        class: ModelClass,
        flags: ModelFlags,
    ) -> Result<Self> {
        if levels.is_empty() || levels.len() != states.len() {
            return Err(Error::Shape(format!("{} levels for {} state spaces", levels.len(), states.len())));
        }
        if let Some(d) = &delta {
            if !d.is_positive() || *d >= Q::one() {
                return Err(Error::Precondition(format!("discount factor {} outside (0,1)", fmt_q(d))));
            }
        }
        let nz = prizes.len();
        let mut children = Vec::with_capacity(levels.len());
        for (t, level) in levels.iter().enumerate() {
            if level.is_empty() {
                return Err(Error::invariant("non-empty periods", format!("period {t} has no subjective states")));
            }
            let ns = states[t].len();
            let n_parents = if t == 0 { 1 } else { levels[t - 1].len() };
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_parents];
            for (i, node) in level.iter().enumerate() {
                let where_ = format!("node ({t},{i})");
                match (t, node.parent) {
                    (0, None) => groups[0].push(i),
                    (0, Some(_)) => return Err(Error::invariant("tree shape", format!("{where_}: root with a parent"))),
                    (_, Some(p)) if p < n_parents => groups[p].push(i),
                    _ => return Err(Error::invariant("tree shape", format!("{where_}: missing or invalid parent"))),
                }
                if node.belief.len() != ns {
                    return Err(Error::Shape(format!("{where_}: belief over {} states, period has {ns}", node.belief.len())));
                }
                if node.state >= ns {
                    return Err(Error::Domain(format!("{where_}: state {} out of range", node.state)));
                }
                if node.belief.prob(node.state).is_zero() {
                    return Err(Error::invariant("s_t ∈ supp(q_t)", where_));
                }
                if !node.prob.is_positive() {
                    return Err(Error::invariant("kernel support", format!("{where_}: probability must be positive")));
                }
                node.cascade.validate()?;
                check_taste(&node.taste, nz, t == levels.len() - 1, &delta, &where_)?;
                match class {
                    ModelClass::Drseu => {}
                    _ if matches!(node.taste, Taste::Felicity { .. }) => {}
                    _ => return Err(Error::Class(format!("{where_}: {class} models need felicity tastes"))),
                }
            }
            for (p, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    return Err(Error::invariant("every node has a successor", format!("node ({},{p}) has no successor", t.saturating_sub(1))));
                }
                let total = sum_q(g.iter().map(|&i| &level[i].prob));
                if !total.is_one() {
                    return Err(Error::invariant("kernel sums to 1", format!("successors of ({},{p}) sum to {}", t.saturating_sub(1), fmt_q(&total))));
                }
                for (a, &i) in g.iter().enumerate() {
                    for &j in &g[..a] {
                        let (x, y) = (&level[i], &level[j]);
                        if x.state == y.state && x.belief == y.belief && same_taste(&x.taste, &y.taste) {
                            return Err(Error::invariant("distinct siblings", format!("siblings ({t},{j}) and ({t},{i}) coincide")));
                        }
                    }
                }
                if flags.cib {
                    check_cib_group(level, g, t)?;
                }
            }
            children.push(groups);
        }
        if class != ModelClass::Drseu && delta.is_none() {
            return Err(Error::Schema(format!("{class} model without a discount factor")));
        }
        // children[t][p] lists level-t nodes with parent p; shift so children[t] belongs to level t−1
        let mut kids: Vec<Vec<Vec<usize>>> = Vec::with_capacity(levels.len());
        for t in 0..levels.len() {
            if t + 1 < levels.len() {
                kids.push(children[t + 1].clone());
            } else {
                kids.push(vec![Vec::new(); levels[t].len()]);
            }
        }
        let roots = children[0][0].clone();
        let mut model = DynamicModel { prizes, states, levels, children: kids, delta, class, flags };
        model.children.push(vec![roots]);
        Ok(model)
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn prizes(&self) -> &Labels {
        &self.prizes
    }

    pub fn states(&self, t: usize) -> &Labels {
        &self.states[t]
    }

    pub fn state_spaces(&self) -> &[Labels] {
        &self.states
    }

    pub fn levels(&self) -> &[Vec<Node>] {
        &self.levels
    }

    pub fn node(&self, t: usize, i: usize) -> &Node {
        &self.levels[t][i]
    }

    pub fn delta(&self) -> Option<&Q> {
        self.delta.as_ref()
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    pub fn flags(&self) -> ModelFlags {
        self.flags
    }

    pub fn dims(&self) -> Dims {
        Dims { n_prizes: self.prizes.len(), n_states: self.states.iter().map(Labels::len).collect() }
    }

    /// Level-0 nodes.
    pub fn roots(&self) -> &[usize] {
        &self.children[self.levels.len()][0]
    }

    /// Level-(t+1) successors of node (t, i).
    pub fn children(&self, t: usize, i: usize) -> &[usize] {
        &self.children[t][i]
    }

    /// Nodes of level t sharing the parent of (t, i), including itself.
    pub fn siblings(&self, t: usize, i: usize) -> &[usize] {
        match self.levels[t][i].parent {
            None => self.roots(),
            Some(p) => self.children(t - 1, p),
        }
    }

    /// Root-to-node path of indices.
    pub fn path(&self, t: usize, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut cur = i;
        for k in (1..=t).rev() {
            cur = self.levels[k][cur].parent.expect("non-root");
            out.push(cur);
        }
        out.reverse();
        out
    }

    pub fn view(&self, t: usize, i: usize) -> NodeView<'_> {
        NodeView { model: self, t, i }
    }

    fn outcome_value(&self, t: usize, i: usize, taste: &Taste, o: &Outcome) -> Result<Q> {
        match taste {
            Taste::Prize { values } => Ok(values[o.prize()].clone()),
            Taste::Table { utility } => Ok(utility.value(o)),
            Taste::Felicity { values } => {
                let mut v = values[o.prize()].clone();
                if let (Some(menu), true) = (o.continuation(), t < self.horizon()) {
                    let d = self.delta.as_ref().expect("validated");
                    v += d * self.menu_value(t, i, menu)?;
                }
                Ok(v)
            }
            Taste::Scaled { alpha, beta, base } => Ok(alpha * self.outcome_value(t, i, base, o)? + beta),
        }
    }

    /// u_t(o) at node (t, i).
    pub fn utility_of(&self, t: usize, i: usize, o: &Outcome) -> Result<Q> {
        self.outcome_value(t, i, &self.levels[t][i].taste, o)
    }

    pub fn lottery_value(&self, t: usize, i: usize, l: &Lottery) -> Result<Q> {
        let mut v = Q::zero();
        for (o, p) in l.entries() {
            v += p * self.utility_of(t, i, o)?;
        }
        Ok(v)
    }

    /// q_t·u_t(f) at node (t, i).
    pub fn act_value(&self, t: usize, i: usize, f: &Act) -> Result<Q> {
        let node = &self.levels[t][i];
        if f.n_states() != node.belief.len() {
            return Err(Error::Shape(format!("act over {} states, period {t} has {}", f.n_states(), node.belief.len())));
        }
        let mut v = Q::zero();
        for (s, p) in node.belief.probs().iter().enumerate() {
            if !p.is_zero() {
                v += p * self.lottery_value(t, i, f.row(s))?;
            }
        }
        Ok(v)
    }

    /// V_t^θ(A_{t+1}) = Σ_children ψ·max_{f∈A} q_{t+1}·u_{t+1}(f).
    pub fn menu_value(&self, t: usize, i: usize, menu: &Menu) -> Result<Q> {
        if t >= self.horizon() {
            return Err(Error::Domain(format!("node ({t},{i}) has no continuation")));
        }
        let mut v = Q::zero();
        for &c in self.children(t, i) {
            let mut best: Option<Q> = None;
            for f in menu.acts() {
                let x = self.act_value(t + 1, c, f)?;
                if best.as_ref().is_none_or(|b| x > *b) {
                    best = Some(x);
                }
            }
            v += &self.levels[t + 1][c].prob * best.expect("non-empty menu");
        }
        Ok(v)
    }

    /// τ_θ(·, A) for node (t, i).
    pub fn tie_break(&self, t: usize, i: usize, menu: &Menu) -> Result<Vec<Q>> {
        let m = argmax_set(menu, &self.view(t, i))?;
        self.levels[t][i].cascade.resolve(menu, &m)
    }

    /// The node's preference written out on a finite set of consequences.
    pub fn materialize(&self, t: usize, i: usize, basis: &[Outcome]) -> Result<SeuPair> {
        let mut values = BTreeMap::new();
        for o in basis {
            values.insert(o.clone(), self.utility_of(t, i, o)?);
        }
        Ok(SeuPair::new(self.levels[t][i].belief.clone(), Utility::table(values, Q::zero())))
    }

    /// Probe basis for period t plus every consequence listed by a table taste at that period.
    pub fn basis(&self, t: usize) -> Vec<Outcome> {
        let mut keys: BTreeSet<&Outcome> = BTreeSet::new();
        for n in &self.levels[t] {
            n.taste.table_keys(&mut keys);
        }
        let mut out: BTreeSet<Outcome> = keys.into_iter().cloned().collect();
        out.extend(self.dims().probe_basis(t));
        out.into_iter().collect()
    }

    fn check_history(&self, h: &History) -> Result<()> {
        if h.len() > self.levels.len() {
            return Err(Error::Shape(format!("history of length {} exceeds horizon {}", h.len(), self.horizon())));
        }
        for (k, st) in h.steps().iter().enumerate() {
            if st.menu.n_states() != self.states[k].len() {
                return Err(Error::Shape(format!("period-{k} menu over {} states, expected {}", st.menu.n_states(), self.states[k].len())));
            }
            if st.state >= self.states[k].len() {
                return Err(Error::Domain(format!("period-{k} state {} out of range", st.state)));
            }
        }
        Ok(())
    }

    /// w_k(θ_k) = Π_{j≤k} ψ_j(θ_j)·τ_{θ_j}(f_j, A_j)·[s_j = state(θ_j)] along the path.
    pub fn path_weights(&self, h: &History) -> Result<Vec<Vec<Q>>> {
        self.check_history(h)?;
        let mut out: Vec<Vec<Q>> = Vec::with_capacity(h.len());
        for (k, st) in h.steps().iter().enumerate() {
            let fi = st.menu.index_of(&st.act).ok_or_else(|| Error::Domain(format!("period-{k} act is not in its menu")))?;
            let mut w = vec![Q::zero(); self.levels[k].len()];
            for (i, node) in self.levels[k].iter().enumerate() {
                if node.state != st.state {
                    continue;
                }
                let base = match node.parent {
                    None => Q::one(),
                    Some(p) => out[k - 1][p].clone(),
                };
                if base.is_zero() {
                    continue;
                }
                let tau = self.tie_break(k, i, &st.menu)?.swap_remove(fi);
                if !tau.is_zero() {
                    w[i] = base * &node.prob * tau;
                }
            }
            out.push(w);
        }
        Ok(out)
    }

    /// ρ(h^t): the probability of observing the history.
    pub fn history_prob(&self, h: &History) -> Result<Q> {
        if h.is_empty() {
            return Ok(Q::one());
        }
        let w = self.path_weights(h)?;
        Ok(sum_q(w.last().expect("non-empty")))
    }

    /// ρ_t(f, A_t, s | h^{t−1}) for every act and state of `menu`, indexed [act][state].
    pub fn conditional_menu(&self, h: &History, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        let t = h.len();
        if t > self.horizon() {
            return Err(Error::Shape(format!("no period after a history of length {t}")));
        }
        if menu.n_states() != self.states[t].len() {
            return Err(Error::Shape(format!("period-{t} menu over {} states, expected {}", menu.n_states(), self.states[t].len())));
        }
        let weights = self.path_weights(h)?;
        let denom = weights.last().map_or(Q::one(), sum_q);
        if denom.is_zero() {
            return Err(Error::Conditioning("history has probability 0".into()));
        }
        let mut rows = vec![vec![Q::zero(); self.states[t].len()]; menu.len()];
        for (i, node) in self.levels[t].iter().enumerate() {
            let base = match node.parent {
                None => Q::one(),
                Some(p) => weights[t - 1][p].clone(),
            };
            if base.is_zero() {
                continue;
            }
            let tau = self.tie_break(t, i, menu)?;
            let w = base * &node.prob;
            for (a, p) in tau.iter().enumerate() {
                if !p.is_zero() {
                    rows[a][node.state] += &w * p;
                }
            }
        }
        for r in rows.iter_mut() {
            for x in r.iter_mut() {
                *x /= &denom;
            }
        }
        Ok(rows)
    }

    pub fn conditional_ascf(&self, f: &Act, menu: &Menu, s: usize, h: &History) -> Result<Q> {
        let i = menu.index_of(f).ok_or_else(|| Error::Domain("act is not in the menu".into()))?;
        let rows = self.conditional_menu(h, menu)?;
        rows[i].get(s).cloned().ok_or_else(|| Error::Domain(format!("state {s} out of range")))
    }

    /// Nodes of the last period of `h` that are consistent with it.
    pub fn consistent_states(&self, h: &History) -> Result<Vec<usize>> {
        if h.is_empty() {
            return Err(Error::Precondition("consistency needs a non-empty history".into()));
        }
        let w = self.path_weights(h)?;
        Ok(w.last().expect("non-empty").iter().enumerate().filter(|(_, x)| x.is_positive()).map(|(i, _)| i).collect())
    }

    /// Every SEU that can follow a state consistent with `h` has a unique maximizer in `menu`.
    pub fn menu_without_ties(&self, menu: &Menu, h: &History) -> Result<bool> {
        let t = h.len();
        let candidates: Vec<usize> = if t == 0 {
            self.roots().to_vec()
        } else {
            self.consistent_states(h)?.into_iter().flat_map(|p| self.children(t - 1, p).to_vec()).collect()
        };
        for i in candidates {
            if argmax_set(menu, &self.view(t, i))?.len() != 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// g ⪰_{h} r: every state consistent with `h` weakly prefers g.
    pub fn revealed_geq(&self, h: &History, g: &Act, r: &Act) -> Result<bool> {
        let t = h.len().checked_sub(1).ok_or_else(|| Error::Precondition("revealed preference needs a non-empty history".into()))?;
        let consistent = self.consistent_states(h)?;
        if consistent.is_empty() {
            return Err(Error::Conditioning("history has probability 0".into()));
        }
        for i in consistent {
            if self.act_value(t, i, g)? < self.act_value(t, i, r)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A separating history for node (t, i). With `tail`, the last chosen act also
    /// reaches `tail` as its continuation.
    pub fn separating_history(&self, t: usize, i: usize, tail: Option<&Menu>) -> Result<History> {
        let path = self.path(t, i);
        let mut levels = Vec::with_capacity(t + 1);
        for (k, &node) in path.iter().enumerate() {
            let basis = self.basis(k);
            let mut distinct: Vec<SeuPair> = Vec::new();
            let mut target = None;
            for &j in self.siblings(k, node) {
                let seu = self.materialize(k, j, &basis)?;
                let g = match distinct.iter().position(|d| d.same_preference(&seu)) {
                    Some(g) => g,
                    None => {
                        distinct.push(seu);
                        distinct.len() - 1
                    }
                };
                if j == node {
                    target = Some(g);
                }
            }
            levels.push(SeparationLevel { seus: distinct, target: target.expect("node is its own sibling"), state: self.levels[k][node].state });
        }
        Ok(build_separating_history(&self.dims(), &levels, tail)?.0)
    }
}

fn check_taste(taste: &Taste, nz: usize, terminal: bool, delta: &Option<Q>, where_: &str) -> Result<()> {
    match taste {
        Taste::Prize { values } => {
            if values.len() != nz {
                return Err(Error::Shape(format!("{where_}: {} taste values for {nz} prizes", values.len())));
            }
            if values.iter().all(|v| *v == values[0]) {
                return Err(Error::invariant("non-constant SEU", where_.to_string()));
            }
        }
        Taste::Table { utility } => {
            if utility.is_constant() && utility.keys().next().is_none_or(|k| utility.listed(k) == Some(utility.default_value())) {
                return Err(Error::invariant("non-constant SEU", where_.to_string()));
            }
            if utility.keys().any(|o| o.prize() >= nz) {
                return Err(Error::Domain(format!("{where_}: utility lists an unknown prize")));
            }
        }
        Taste::Felicity { values } => {
            if delta.is_none() {
                return Err(Error::Schema(format!("{where_}: felicity taste without a discount factor")));
            }
            if values.len() != nz {
                return Err(Error::Shape(format!("{where_}: {} felicity values for {nz} prizes", values.len())));
            }
            if terminal && values.iter().all(|v| *v == values[0]) {
                return Err(Error::invariant("non-constant SEU", where_.to_string()));
            }
        }
        Taste::Scaled { alpha, base, .. } => {
            if !alpha.is_positive() {
                return Err(Error::Precondition(format!("{where_}: scale must be positive")));
            }
            check_taste(base, nz, terminal, delta, where_)?;
        }
    }
    Ok(())
}

/// Structural taste comparison; prize tastes up to positive affine maps.
fn same_taste(a: &Taste, b: &Taste) -> bool {
    match (a, b) {
        (Taste::Prize { values: x }, Taste::Prize { values: y }) => affine_related(x, y),
        (Taste::Table { utility: x }, Taste::Table { utility: y }) => x.affine_equivalent(y),
        _ => a == b,
    }
}

fn check_cib_group(level: &[Node], group: &[usize], t: usize) -> Result<()> {
    let mut classes: Vec<(&Node, Vec<usize>)> = Vec::new();
    for &i in group {
        let n = &level[i];
        match classes.iter_mut().find(|(r, _)| r.belief == n.belief && same_taste(&r.taste, &n.taste)) {
            Some((_, v)) => v.push(i),
            None => classes.push((n, vec![i])),
        }
    }
    for (rep, members) in classes {
        let total = sum_q(members.iter().map(|&i| &level[i].prob));
        for s in 0..rep.belief.len() {
            let mass = sum_q(members.iter().filter(|&&i| level[i].state == s).map(|&i| &level[i].prob));
            if mass / &total != *rep.belief.prob(s) {
                return Err(Error::invariant("CIB", format!("period {t}: state distribution given (q,u) differs from q at state {s}")));
            }
        }
    }
    Ok(())
}

/// Valuation of period-t acts by one node.
pub struct NodeView<'a> {
    model: &'a DynamicModel,
    t: usize,
    i: usize,
}

impl Valuation for NodeView<'_> {
    fn value(&self, f: &Act) -> Result<Q> {
        self.model.act_value(self.t, self.i, f)
    }
}

/// One observed period: the menu, the chosen act and the realized objective state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub menu: Menu,
    pub act: Act,
    pub state: usize,
}

impl Step {
    pub fn new(menu: Menu, act: Act, state: usize) -> Result<Self> {
        if !menu.contains(&act) {
            return Err(Error::Domain("chosen act is not in the menu".into()));
        }
        Ok(Step { menu, act, state })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct History(Vec<Step>);

impl History {
    pub fn empty() -> Self {
        History(Vec::new())
    }

    pub fn new(steps: Vec<Step>) -> Result<Self> {
        for (k, st) in steps.iter().enumerate() {
            if !st.menu.contains(&st.act) {
                return Err(Error::Domain(format!("period-{k} act is not in its menu")));
            }
        }
        Ok(History(steps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn prefix(&self, k: usize) -> History {
        History(self.0[..k].to_vec())
    }

    pub fn push(&self, step: Step) -> History {
        let mut v = self.0.clone();
        v.push(step);
        History(v)
    }

    /// Copy with period k replaced.
    pub fn replace(&self, k: usize, step: Step) -> History {
        let mut v = self.0.clone();
        v[k] = step;
        History(v)
    }

    /// Does the last chosen act lead to `menu` with positive probability?
    pub fn reaches(&self, menu: &Menu) -> bool {
        match self.0.last() {
            None => true,
            Some(st) => st.act.row(st.state).menu_marginal().keys().any(|m| **m == *menu),
        }
    }

    /// Every menu after the first is reachable from the preceding choice.
    pub fn is_realizable(&self) -> bool {
        (1..self.0.len()).all(|k| self.prefix(k).reaches(&self.0[k].menu))
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, st) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "({}, {}, s{})", st.menu, st.act, st.state)?;
        }
        Ok(())
    }
}

/// Sibling SEUs at one period of a separating history.
#[derive(Clone, Debug)]
pub struct SeparationLevel {
    /// pairwise distinct preferences
    pub seus: Vec<SeuPair>,
    pub target: usize,
    pub state: usize,
}

/// Chains separating menus into a history. Each period's menu is mixed half-half with
/// a constant act whose continuation is the next period's menu (or `tail`), so the
/// history is realizable and the designated maximizers are unchanged.
pub fn build_separating_history(dims: &Dims, levels: &[SeparationLevel], tail: Option<&Menu>) -> Result<(History, Vec<SeparatingMenu>)> {
    if levels.len() > dims.n_states.len() {
        return Err(Error::Shape("more levels than periods".into()));
    }
    let mut seps = Vec::with_capacity(levels.len());
    for lv in levels {
        seps.push(separating_menu(&lv.seus)?);
    }
    let links: Vec<(&SeparatingMenu, usize, usize)> = seps.iter().zip(levels).map(|(s, lv)| (s, lv.target, lv.state)).collect();
    let h = chain_separating(dims, &links, tail)?;
    Ok((h, seps))
}

/// The history choosing designated act `target` from each separating menu, with state `state`.
pub fn chain_separating(dims: &Dims, links: &[(&SeparatingMenu, usize, usize)], tail: Option<&Menu>) -> Result<History> {
    if links.len() > dims.n_states.len() {
        return Err(Error::Shape("more levels than periods".into()));
    }
    let half = q(1, 2);
    let mut steps: Vec<Step> = Vec::with_capacity(links.len());
    let mut next: Option<Menu> = tail.cloned();
    for (k, &(sep, target, state)) in links.iter().enumerate().rev() {
        let chosen = sep.designated(target).clone();
        let step = match &next {
            Some(m) if k < dims.horizon() => {
                let c = dims.constant(k, Outcome::Cont(0, Arc::new(m.clone())));
                Step::new(sep.menu.mix_act(&half, &c)?, chosen.mix(&half, &c)?, state)?
            }
            _ => Step::new(sep.menu.clone(), chosen, state)?,
        };
        next = Some(step.menu.clone());
        steps.push(step);
    }
    steps.reverse();
    Ok(History(steps))
}

/// λh + (1−λ)d with d a constant-act deterministic history leading to `menu`: the
/// constant act at period k pays prize `z` and the (mixed) menu of period k+1.
pub fn extended_history(h: &History, menu: &Menu, lambda: &Q, z: usize) -> Result<History> {
    if !lambda.is_positive() || *lambda >= Q::one() {
        return Err(Error::Precondition("mixing weight must lie in (0,1)".into()));
    }
    let mut next = menu.clone();
    let mut steps = Vec::with_capacity(h.len());
    for st in h.steps().iter().rev() {
        let d = Act::constant(Lottery::degenerate(Outcome::Cont(z, Arc::new(next.clone()))), st.menu.n_states());
        let m = st.menu.mix_act(lambda, &d)?;
        let f = st.act.mix(lambda, &d)?;
        next = m.clone();
        steps.push(Step { menu: m, act: f, state: st.state });
    }
    steps.reverse();
    Ok(History(steps))
}

/// Anything that answers ρ_t(·, A_t, ·| h^{t−1}).
pub trait DynamicOracle: Sync {
    fn horizon(&self) -> usize;

    fn n_states(&self, t: usize) -> usize;

    /// Indexed [act][state], acts in `menu.acts()` order; the period is `h.len()`.
    fn conditional(&self, h: &History, menu: &Menu) -> Result<Vec<Vec<Q>>>;

    fn as_model(&self) -> Option<&DynamicModel> {
        None
    }
}

impl DynamicOracle for DynamicModel {
    fn horizon(&self) -> usize {
        DynamicModel::horizon(self)
    }

    fn n_states(&self, t: usize) -> usize {
        self.states[t].len()
    }

    fn conditional(&self, h: &History, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.conditional_menu(h, menu)
    }

    fn as_model(&self) -> Option<&DynamicModel> {
        Some(self)
    }
}

/// ρ(h) by the chain rule; 0 as soon as a prefix has probability 0.
pub fn oracle_history_prob<O: DynamicOracle + ?Sized>(oracle: &O, h: &History) -> Result<Q> {
    let mut p = Q::one();
    for (k, st) in h.steps().iter().enumerate() {
        let rows = oracle.conditional(&h.prefix(k), &st.menu)?;
        let i = st.menu.index_of(&st.act).ok_or_else(|| Error::Domain(format!("period-{k} act is not in its menu")))?;
        p *= &rows[i][st.state];
        if p.is_zero() {
            return Ok(p);
        }
    }
    Ok(p)
}

/// ρ_t^{h}(·, A_t, ·): conditional choice after mixing `h` with a deterministic history leading to `menu`.
pub fn extended_ascf<O: DynamicOracle + ?Sized>(oracle: &O, h: &History, menu: &Menu, lambda: &Q, z: usize) -> Result<Vec<Vec<Q>>> {
    if h.is_empty() {
        return oracle.conditional(h, menu);
    }
    oracle.conditional(&extended_history(h, menu, lambda, z)?, menu)
}

/// Tabulated history-conditional choice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DynamicTable {
    n_states: Vec<usize>,
    rows: BTreeMap<History, BTreeMap<Menu, Vec<Vec<Q>>>>,
}

impl DynamicTable {
    pub fn new(n_states: Vec<usize>) -> Result<Self> {
        if n_states.is_empty() {
            return Err(Error::Shape("no periods".into()));
        }
        Ok(DynamicTable { n_states, rows: BTreeMap::new() })
    }

    pub fn insert(&mut self, h: History, menu: Menu, block: Vec<Vec<Q>>) -> Result<()> {
        let t = h.len();
        if t >= self.n_states.len() || block.len() != menu.len() || block.iter().any(|r| r.len() != self.n_states[t]) {
            return Err(Error::Shape("table block does not match the menu or period".into()));
        }
        let total = sum_q(block.iter().flatten());
        if !total.is_one() {
            return Err(Error::invariant("conditional choice sums to 1", fmt_q(&total)));
        }
        self.rows.entry(h).or_default().insert(menu, block);
        Ok(())
    }

    /// Tabulates `oracle` on the given (history, menu) probes; zero-probability histories are skipped.
    pub fn from_oracle<O: DynamicOracle + ?Sized>(oracle: &O, probes: &[(History, Menu)]) -> Result<Self> {
        let mut t = DynamicTable::new((0..=oracle.horizon()).map(|k| oracle.n_states(k)).collect())?;
        for (h, m) in probes {
            match oracle.conditional(h, m) {
                Ok(block) => t.insert(h.clone(), m.clone(), block)?,
                Err(Error::Conditioning(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(t)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&History, &Menu, &Vec<Vec<Q>>)> {
        self.rows.iter().flat_map(|(h, ms)| ms.iter().map(move |(m, b)| (h, m, b)))
    }
}

impl DynamicOracle for DynamicTable {
    fn horizon(&self) -> usize {
        self.n_states.len() - 1
    }

    fn n_states(&self, t: usize) -> usize {
        self.n_states[t]
    }

    fn conditional(&self, h: &History, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.rows
            .get(h)
            .and_then(|m| m.get(menu))
            .cloned()
            .ok_or_else(|| Error::Coverage(format!("menu {menu} after history [{h}]")))
    }
}

/// Counts of simulated full paths; steps are (menu id, act index, state).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCounts {
    pub menus: Vec<Menu>,
    pub paths: BTreeMap<Vec<(usize, usize, usize)>, u64>,
    pub n: u64,
}

impl PathCounts {
    pub fn history(&self, path: &[(usize, usize, usize)]) -> History {
        History(
            path.iter()
                .map(|&(m, a, s)| Step { menu: self.menus[m].clone(), act: self.menus[m].acts()[a].clone(), state: s })
                .collect(),
        )
    }

    /// Counts of every prefix (including the empty one).
    pub fn prefix_counts(&self) -> BTreeMap<Vec<(usize, usize, usize)>, u64> {
        let mut out: BTreeMap<Vec<(usize, usize, usize)>, u64> = BTreeMap::new();
        for (p, c) in &self.paths {
            for k in 0..=p.len() {
                *out.entry(p[..k].to_vec()).or_default() += c;
            }
        }
        out
    }

    /// Counts of (act, state) at each (history, menu) reached; `n_states[t]` sizes period t.
    pub fn step_counts(&self, n_states: &[usize]) -> Vec<(History, Menu, Vec<Vec<u64>>)> {
        let mut blocks: BTreeMap<(Vec<(usize, usize, usize)>, usize), Vec<Vec<u64>>> = BTreeMap::new();
        for (p, c) in &self.paths {
            for (k, &(m, a, s)) in p.iter().enumerate() {
                let b = blocks.entry((p[..k].to_vec(), m)).or_insert_with(|| vec![vec![0; n_states[k]]; self.menus[m].len()]);
                b[a][s] += c;
            }
        }
        blocks.into_iter().map(|((h, m), b)| (self.history(&h), self.menus[m].clone(), b)).collect()
    }
}

struct Sampler<'a> {
    model: &'a DynamicModel,
    menus: Vec<Menu>,
    ids: BTreeMap<Menu, usize>,
    kernel: BTreeMap<(usize, Option<usize>), (Vec<usize>, Vec<f64>)>,
    choice: BTreeMap<(usize, usize, usize), Vec<f64>>,
    cont: BTreeMap<(usize, usize, usize), (Vec<Option<usize>>, Vec<f64>)>,
}

impl Sampler<'_> {
    fn id(&mut self, m: &Menu) -> usize {
        if let Some(&i) = self.ids.get(m) {
            return i;
        }
        self.menus.push(m.clone());
        self.ids.insert(m.clone(), self.menus.len() - 1);
        self.menus.len() - 1
    }

    fn next_node(&mut self, t: usize, parent: Option<usize>, rng: &mut impl Rng) -> usize {
        let model = self.model;
        let (nodes, cum) = self.kernel.entry((t, parent)).or_insert_with(|| {
            let nodes = match parent {
                None => model.roots().to_vec(),
                Some(p) => model.children(t - 1, p).to_vec(),
            };
            let cum = cumulative(nodes.iter().map(|&i| to_f64(&model.levels[t][i].prob)));
            (nodes, cum)
        });
        nodes[draw(cum, rng)]
    }

    fn act(&mut self, t: usize, i: usize, menu: usize, rng: &mut impl Rng) -> Result<usize> {
        if !self.choice.contains_key(&(t, i, menu)) {
            let tau = self.model.tie_break(t, i, &self.menus[menu])?;
            self.choice.insert((t, i, menu), cumulative(tau.iter().map(to_f64)));
        }
        Ok(draw(&self.choice[&(t, i, menu)], rng))
    }

    fn continuation(&mut self, menu: usize, act: usize, s: usize, rng: &mut impl Rng) -> Option<usize> {
        if !self.cont.contains_key(&(menu, act, s)) {
            let row = self.menus[menu].acts()[act].row(s).clone();
            let mut targets: Vec<Option<usize>> = Vec::new();
            let mut weights = Vec::new();
            let marg = row.menu_marginal();
            let cont_mass = sum_q(marg.values());
            for (m, p) in marg {
                let id = self.id(&m);
                targets.push(Some(id));
                weights.push(to_f64(&p));
            }
            let rest = Q::one() - cont_mass;
            if rest.is_positive() {
                targets.push(None);
                weights.push(to_f64(&rest));
            }
            self.cont.insert((menu, act, s), (targets, cumulative(weights)));
        }
        let (targets, cum) = &self.cont[&(menu, act, s)];
        targets[draw(cum, rng)]
    }
}

/// Draws `n` paths of the generative process starting from `root_menu`: θ_0 ~ ψ_0, the
/// cascade picks the act, s_t = state(θ_t), the continuation menu is drawn from the
/// chosen act's row, θ_{t+1} ~ ψ^{θ_t}, and so on until the horizon or a terminal prize.
pub fn simulate_paths(model: &DynamicModel, root_menu: &Menu, n: u64, seed: u64) -> Result<PathCounts> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be at least 1".into()));
    }
    if root_menu.n_states() != model.states[0].len() {
        return Err(Error::Shape("root menu over the wrong state space".into()));
    }
    let mut sm = Sampler {
        model,
        menus: Vec::new(),
        ids: BTreeMap::new(),
        kernel: BTreeMap::new(),
        choice: BTreeMap::new(),
        cont: BTreeMap::new(),
    };
    let root = sm.id(root_menu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths: BTreeMap<Vec<(usize, usize, usize)>, u64> = BTreeMap::new();
    for _ in 0..n {
        let mut path = Vec::with_capacity(model.levels.len());
        let mut menu = Some(root);
        let mut parent = None;
        for t in 0..model.levels.len() {
            let Some(m) = menu else { break };
            let node = sm.next_node(t, parent, &mut rng);
            let a = sm.act(t, node, m, &mut rng)?;
            let s = model.levels[t][node].state;
            path.push((m, a, s));
            parent = Some(node);
            menu = if t < model.horizon() { sm.continuation(m, a, s, &mut rng) } else { None };
        }
        *paths.entry(path).or_default() += 1;
    }
    Ok(PathCounts { menus: sm.menus, paths, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn prize_taste(v: &[i64]) -> Taste {
        Taste::Prize { values: v.iter().map(|&x| qi(x)).collect() }
    }

    /// T = 1, one state per period at t = 0, two at t = 1; two roots with opposite tastes,
    /// each with two children.
    fn two_period() -> DynamicModel {
        let b1 = Belief::uniform(1);
        let roots = vec![
            Node { parent: None, belief: b1.clone(), taste: prize_taste(&[1, 0]), state: 0, prob: q(1, 3), cascade: TieBreakCascade::coin() },
            Node { parent: None, belief: b1, taste: prize_taste(&[0, 1]), state: 0, prob: q(2, 3), cascade: TieBreakCascade::coin() },
        ];
        let bq = Belief::new(vec![q(3, 4), q(1, 4)]).unwrap();
        let level1 = vec![
            Node { parent: Some(0), belief: bq.clone(), taste: prize_taste(&[2, 0]), state: 0, prob: q(1, 2), cascade: TieBreakCascade::coin() },
            Node { parent: Some(0), belief: bq.clone(), taste: prize_taste(&[0, 2]), state: 1, prob: q(1, 2), cascade: TieBreakCascade::coin() },
            Node { parent: Some(1), belief: bq.clone(), taste: prize_taste(&[1, 0]), state: 0, prob: q(1, 4), cascade: TieBreakCascade::coin() },
            Node { parent: Some(1), belief: Belief::uniform(2), taste: prize_taste(&[1, 0]), state: 1, prob: q(3, 4), cascade: TieBreakCascade::coin() },
        ];
        DynamicModel::new(
            Labels::numbered("z", 2),
            vec![Labels::numbered("a", 1), Labels::numbered("b", 2)],
            vec![roots, level1],
            None,
            ModelClass::Drseu,
            ModelFlags::default(),
        )
        .unwrap()
    }

    fn next_menu() -> Menu {
        Menu::new(vec![Act::from_prizes(&[0, 1]), Act::from_prizes(&[1, 0])]).unwrap()
    }

    fn first_menu(next: &Menu) -> Menu {
        let c = |z| Act::constant(Lottery::degenerate(Outcome::Cont(z, Arc::new(next.clone()))), 1);
        Menu::new(vec![c(0), c(1)]).unwrap()
    }

    #[test]
    fn empty_history_has_probability_one() {
        let m = two_period();
        assert_eq!(m.history_prob(&History::empty()).unwrap(), qi(1));
    }

    #[test]
    fn period_zero_reduces_to_static_choice() {
        let m = two_period();
        let a0 = first_menu(&next_menu());
        let rows = m.conditional_menu(&History::empty(), &a0).unwrap();
        // act paying z0 is chosen by the first root only
        let i = a0.index_of(&Act::constant(Lottery::degenerate(Outcome::Cont(0, Arc::new(next_menu()))), 1)).unwrap();
        assert_eq!(rows[i][0], q(1, 3));
        assert_eq!(rows[1 - i][0], q(2, 3));
    }

    #[test]
    fn chain_rule_and_normalization() {
        let m = two_period();
        let a1 = next_menu();
        let a0 = first_menu(&a1);
        for f0 in a0.acts() {
            let h0 = History::new(vec![Step::new(a0.clone(), f0.clone(), 0).unwrap()]).unwrap();
            let p0 = m.history_prob(&h0).unwrap();
            let rows = m.conditional_menu(&h0, &a1).unwrap();
            assert_eq!(sum_q(rows.iter().flatten()), qi(1));
            for (i, f1) in a1.acts().iter().enumerate() {
                for s in 0..2 {
                    let h1 = h0.push(Step::new(a1.clone(), f1.clone(), s).unwrap());
                    assert_eq!(m.history_prob(&h1).unwrap(), &p0 * &rows[i][s]);
                }
            }
        }
    }

    #[test]
    fn separating_history_isolates_each_node() {
        let m = two_period();
        for t in 0..=1 {
            for i in 0..m.levels()[t].len() {
                let h = m.separating_history(t, i, None).unwrap();
                assert!(h.is_realizable());
                assert_eq!(m.consistent_states(&h).unwrap(), vec![i]);
                if t == 0 {
                    assert_eq!(m.history_prob(&h).unwrap(), m.node(0, i).prob);
                }
            }
        }
    }

    #[test]
    fn conditional_after_separating_history_is_node_kernel() {
        let m = two_period();
        let a1 = next_menu();
        for i in 0..2 {
            let h = m.separating_history(0, i, Some(&a1)).unwrap();
            assert!(h.reaches(&a1));
            let rows = m.conditional_menu(&h, &a1).unwrap();
            let mut expect = vec![vec![Q::zero(); 2]; 2];
            for &c in m.children(0, i) {
                let tau = m.tie_break(1, c, &a1).unwrap();
                for a in 0..2 {
                    expect[a][m.node(1, c).state] += &m.node(1, c).prob * &tau[a];
                }
            }
            assert_eq!(rows, expect);
        }
    }

    #[test]
    fn extended_ascf_ignores_construction() {
        let m = two_period();
        let a1 = next_menu();
        let a0 = first_menu(&a1);
        let unreachable = Menu::new(vec![Act::from_prizes(&[0, 0]), Act::from_prizes(&[1, 1])]).unwrap();
        let h0 = History::new(vec![Step::new(a0.clone(), a0.acts()[0].clone(), 0).unwrap()]).unwrap();
        let base = extended_ascf(&m, &h0, &unreachable, &q(1, 2), 0).unwrap();
        for (lam, z) in [(q(1, 3), 0), (q(9, 10), 1), (q(1, 7), 1)] {
            assert_eq!(extended_ascf(&m, &h0, &unreachable, &lam, z).unwrap(), base);
        }
        // reachable menu: agrees with plain conditioning
        assert_eq!(extended_ascf(&m, &h0, &a1, &q(1, 2), 1).unwrap(), m.conditional_menu(&h0, &a1).unwrap());
    }

    #[test]
    fn ties_are_detected() {
        let m = two_period();
        let a1 = next_menu();
        let h0 = m.separating_history(0, 0, Some(&a1)).unwrap();
        assert!(m.menu_without_ties(&a1, &h0).unwrap());
        let h = m.separating_history(0, 1, Some(&a1)).unwrap();
        let tied = Menu::new(vec![Act::from_prizes(&[0, 1]), Act::constant(Lottery::uniform_prizes(2), 2)]).unwrap();
        // node (1,3) has belief (1/2,1/2) and taste (1,0): both acts are worth 1/2
        assert!(!m.menu_without_ties(&tied, &h).unwrap());
        assert!(m.menu_without_ties(&Menu::singleton(Act::from_prizes(&[0, 1])), &h).unwrap());
    }

    #[test]
    fn siblings_must_differ() {
        let b = Belief::uniform(1);
        let n = |p| Node { parent: None, belief: b.clone(), taste: prize_taste(&[1, 0]), state: 0, prob: p, cascade: TieBreakCascade::coin() };
        let r = DynamicModel::new(Labels::numbered("z", 2), vec![Labels::numbered("s", 1)], vec![vec![n(q(1, 2)), n(q(1, 2))]], None, ModelClass::Drseu, ModelFlags::default());
        assert!(matches!(r, Err(Error::Invariant { .. })));
    }

    #[test]
    fn simulation_matches_exact_conditionals() {
        let m = two_period();
        let a0 = first_menu(&next_menu());
        let counts = simulate_paths(&m, &a0, 20_000, 7).unwrap();
        let prefixes = counts.prefix_counts();
        let mut reached: BTreeMap<(&[(usize, usize, usize)], usize), u64> = BTreeMap::new();
        for (p, c) in prefixes.iter().filter(|(p, _)| !p.is_empty()) {
            *reached.entry((&p[..p.len() - 1], p[p.len() - 1].0)).or_default() += c;
        }
        for (p, c) in &prefixes {
            if p.is_empty() {
                continue;
            }
            let parent = reached[&(&p[..p.len() - 1], p[p.len() - 1].0)];
            let h = counts.history(&p[..p.len() - 1]);
            let (mid, a, s) = *p.last().unwrap();
            let exact = m.conditional_menu(&h, &counts.menus[mid]).unwrap()[a][s].clone();
            let freq = *c as f64 / parent as f64;
            assert!((freq - to_f64(&exact)).abs() < 3.0 * crate::static_model::hoeffding_bound(parent, 0.01));
        }
    }

    #[test]
    fn evolving_menu_value_uses_children() {
        let b = Belief::uniform(1);
        let fel = |v: &[i64]| Taste::Felicity { values: v.iter().map(|&x| qi(x)).collect() };
        let root = Node { parent: None, belief: b.clone(), taste: fel(&[0, 0]), state: 0, prob: qi(1), cascade: TieBreakCascade::coin() };
        let kids = vec![
            Node { parent: Some(0), belief: b.clone(), taste: fel(&[1, 0]), state: 0, prob: q(1, 2), cascade: TieBreakCascade::coin() },
            Node { parent: Some(0), belief: b.clone(), taste: fel(&[0, 1]), state: 0, prob: q(1, 2), cascade: TieBreakCascade::coin() },
        ];
        let m = DynamicModel::new(
            Labels::numbered("z", 2),
            vec![Labels::numbered("s", 1), Labels::numbered("s", 1)],
            vec![vec![root], kids],
            Some(q(1, 2)),
            ModelClass::Evolving,
            ModelFlags::default(),
        )
        .unwrap();
        let both = Menu::new(vec![Act::from_prizes(&[0]), Act::from_prizes(&[1])]).unwrap();
        let one = Menu::singleton(Act::from_prizes(&[0]));
        assert_eq!(m.menu_value(0, 0, &both).unwrap(), qi(1));
        assert_eq!(m.menu_value(0, 0, &one).unwrap(), q(1, 2));
        let o = Outcome::Cont(1, Arc::new(both));
        assert_eq!(m.utility_of(0, 0, &o).unwrap(), q(1, 2));
    }
}
