//! Menu preferences: DLR values, Evolving SEU by backward induction, dominance and
//! sophistication checks, gradual learning and the discount factor, speed of learning.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::acts::{affine_related, bar_menu, eval_act, Act, Lottery, Menu, Outcome, SeuPair};
use crate::axioms::{check_c_determinism, ProbeBattery, Verdict, Witness};
use crate::dynamic::{DynamicModel, DynamicOracle, History, ModelClass, Node, Taste};
use crate::error::{Error, Result};
use crate::history_axioms::{revealed_geq_probe, AfterHistory};
use crate::rational::{fmt_q, max_abs, Q};
use crate::static_model::RseuModel;

/// Finite measure over SEU preferences, valuing menus by expected maxima.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DlrMeasure {
    entries: Vec<(SeuPair, Q)>,
}

impl DlrMeasure {
    pub fn new(entries: Vec<(SeuPair, Q)>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::Shape("empty DLR measure".into()));
        };
        let ns = first.0.belief.len();
        let mut total = Q::zero();
        for (k, (seu, w)) in entries.iter().enumerate() {
            if seu.belief.len() != ns {
                return Err(Error::Shape(format!("entry {k}: belief over {} states, expected {ns}", seu.belief.len())));
            }
            if !w.is_positive() {
                return Err(Error::invariant("minimality", format!("entry {k} has weight {}", fmt_q(w))));
            }
            if seu.utility.is_constant() {
                return Err(Error::invariant("non-constant SEU", format!("entry {k}")));
            }
            if entries[..k].iter().any(|(o, _)| o.same_preference(seu)) {
                return Err(Error::invariant("non-redundancy", format!("entry {k} repeats an earlier preference")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::invariant("weights sum to 1", format!("total {}", fmt_q(&total))));
        }
        Ok(DlrMeasure { entries })
    }

    /// Marginal over the support of a static model.
    pub fn from_model(model: &RseuModel) -> Result<Self> {
        DlrMeasure::new(model.support().iter().enumerate().map(|(k, s)| (s.clone(), model.weight(k))).collect())
    }

    pub fn entries(&self) -> &[(SeuPair, Q)] {
        &self.entries
    }

    pub fn n_states(&self) -> usize {
        self.entries[0].0.belief.len()
    }
}

/// V(A) = Σ μ(q,u)·max_{f∈A} q·(u∘f).
pub fn dlr_value(m: &DlrMeasure, menu: &Menu) -> Result<Q> {
    let mut v = Q::zero();
    for (seu, w) in &m.entries {
        let mut best: Option<Q> = None;
        for f in menu.acts() {
            let x = eval_act(seu, f)?;
            if best.as_ref().is_none_or(|b| x > *b) {
                best = Some(x);
            }
        }
        v += w * best.expect("non-empty menu");
    }
    Ok(v)
}

/// V_t^θ(A_{t+1}) with the node checked.
pub fn menu_value(model: &DynamicModel, t: usize, i: usize, menu: &Menu) -> Result<Q> {
    if t > model.horizon() || i >= model.levels()[t].len() {
        return Err(Error::Domain(format!("no node ({t},{i})")));
    }
    model.menu_value(t, i, menu)
}

/// A preference over menus, possibly incomplete (unanimity over several states).
pub trait MenuPreference {
    /// Acts in compared menus are over this many states.
    fn n_states(&self) -> usize;

    /// One value per component of the unanimity ranking; empty when only comparisons are observable.
    fn values(&self, menu: &Menu) -> Result<Vec<Q>>;

    fn geq(&self, a: &Menu, b: &Menu) -> Result<bool> {
        let (x, y) = (self.values(a)?, self.values(b)?);
        Ok(x.iter().zip(&y).all(|(p, q)| p >= q))
    }

    fn strictly_better(&self, a: &Menu, b: &Menu) -> Result<bool> {
        Ok(self.geq(a, b)? && !self.geq(b, a)?)
    }

    fn indifferent(&self, a: &Menu, b: &Menu) -> Result<bool> {
        Ok(self.geq(a, b)? && self.geq(b, a)?)
    }
}

impl MenuPreference for DlrMeasure {
    fn n_states(&self) -> usize {
        DlrMeasure::n_states(self)
    }

    fn values(&self, menu: &Menu) -> Result<Vec<Q>> {
        Ok(vec![dlr_value(self, menu)?])
    }
}

/// ⪰_{h^t} of a dynamic model: (z, A) ⪰ (z, B) at every state consistent with h^t and every prize z.
pub struct ModelMenuPref<'a> {
    model: &'a DynamicModel,
    t: usize,
    states: Vec<usize>,
}

impl<'a> ModelMenuPref<'a> {
    pub fn new(model: &'a DynamicModel, h: &History) -> Result<Self> {
        let t = h.len().checked_sub(1).ok_or_else(|| Error::Precondition("menu preference needs a non-empty history".into()))?;
        if t >= model.horizon() {
            return Err(Error::Domain(format!("period {t} has no continuation menus")));
        }
        let states = model.consistent_states(h)?;
        if states.is_empty() {
            return Err(Error::Conditioning("history has probability 0".into()));
        }
        Ok(ModelMenuPref { model, t, states })
    }

    pub fn period(&self) -> usize {
        self.t
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }
}

impl MenuPreference for ModelMenuPref<'_> {
    fn n_states(&self) -> usize {
        self.model.states(self.t + 1).len()
    }

    fn values(&self, menu: &Menu) -> Result<Vec<Q>> {
        let cont = Arc::new(menu.clone());
        let mut out = Vec::new();
        for &i in &self.states {
            for z in 0..self.model.prizes().len() {
                out.push(self.model.utility_of(self.t, i, &Outcome::Cont(z, cont.clone()))?);
            }
        }
        Ok(out)
    }
}

/// ⪰_{h^t} read off a dynamic oracle with [`revealed_geq_probe`] on constant acts paying (z, A).
pub struct OracleMenuPref<'a, O: ?Sized> {
    pub oracle: &'a O,
    pub history: History,
    pub prize: usize,
    /// strictly ranked period-t acts used to perturb the compared pair
    pub better: Act,
    pub worse: Act,
    pub ladder: u32,
}

impl<O: DynamicOracle + ?Sized> OracleMenuPref<'_, O> {
    fn constant(&self, menu: &Menu) -> Act {
        let t = self.history.len() - 1;
        Act::constant(Lottery::degenerate(Outcome::Cont(self.prize, Arc::new(menu.clone()))), self.oracle.n_states(t))
    }
}

impl<O: DynamicOracle + ?Sized> MenuPreference for OracleMenuPref<'_, O> {
    fn n_states(&self) -> usize {
        self.oracle.n_states(self.history.len())
    }

    fn values(&self, _menu: &Menu) -> Result<Vec<Q>> {
        Ok(Vec::new())
    }

    fn geq(&self, a: &Menu, b: &Menu) -> Result<bool> {
        revealed_geq_probe(self.oracle, &self.history, &self.constant(a), &self.constant(b), &self.better, &self.worse, self.ladder)
    }
}

fn single<P: MenuPreference + ?Sized>(pref: &P, menu: &Menu) -> Result<Option<Q>> {
    let v = pref.values(menu)?;
    Ok(if v.len() == 1 { v.into_iter().next() } else { None })
}

/// Ā ⪰ A on every battery menu.
pub fn check_weak_dominance<P: MenuPreference + ?Sized>(pref: &P, menus: &[Menu]) -> Result<Verdict> {
    for (k, a) in menus.iter().enumerate() {
        let bar = bar_menu(a);
        if !pref.geq(&bar, a)? {
            return Ok(Verdict::fail(
                "WEAK_DOMINANCE",
                k + 1,
                Witness {
                    relation: "Ā ⪰ A".into(),
                    lhs: single(pref, &bar)?,
                    rhs: single(pref, a)?,
                    menu: Some(bar),
                    other_menu: Some(a.clone()),
                    ..Witness::default()
                },
            ));
        }
    }
    Ok(Verdict::pass("WEAK_DOMINANCE", menus.len()))
}

/// An instance of the Strong Dominance hypothesis: f ∈ A and {f(s)} ⪰ {g(s)} for every s.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DominanceInstance {
    pub menu: Menu,
    pub dominant: Act,
    pub dominated: Act,
}

/// Every act whose rows are drawn from `lotteries`, capped at `cap` acts.
pub fn act_lattice(lotteries: &[Lottery], n_states: usize, cap: usize) -> Vec<Act> {
    let mut out: Vec<Vec<Lottery>> = vec![Vec::new()];
    for _ in 0..n_states {
        let mut next = Vec::new();
        for prefix in &out {
            for l in lotteries {
                let mut row = prefix.clone();
                row.push(l.clone());
                next.push(row);
                if next.len() >= cap {
                    break;
                }
            }
        }
        out = next;
    }
    out.into_iter().filter_map(|rows| Act::new(rows).ok()).collect()
}

/// Pairs each battery menu with every pool act g ∉ A state-wise dominated by some f ∈ A.
pub fn strong_dominance_instances<P: MenuPreference + ?Sized>(pref: &P, menus: &[Menu], pool: &[Act]) -> Result<Vec<DominanceInstance>> {
    let n = pref.n_states();
    let singleton = |l: &Lottery| Menu::singleton(Act::constant(l.clone(), n));
    let mut out = Vec::new();
    for a in menus {
        for g in pool {
            if a.contains(g) {
                continue;
            }
            for f in a.acts() {
                let mut dominates = true;
                for s in 0..n {
                    if !pref.geq(&singleton(f.row(s)), &singleton(g.row(s)))? {
                        dominates = false;
                        break;
                    }
                }
                if dominates {
                    out.push(DominanceInstance { menu: a.clone(), dominant: f.clone(), dominated: g.clone() });
                    break;
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Instance("battery realizes no Strong Dominance hypothesis".into()));
    }
    Ok(out)
}

/// A ∼ A ∪ {g} on every instance.
pub fn check_strong_dominance<P: MenuPreference + ?Sized>(pref: &P, instances: &[DominanceInstance]) -> Result<Verdict> {
    if instances.is_empty() {
        return Err(Error::Instance("no Strong Dominance instances".into()));
    }
    for (k, inst) in instances.iter().enumerate() {
        let bigger = inst.menu.with_act(inst.dominated.clone())?;
        if !pref.indifferent(&bigger, &inst.menu)? {
            let relation = if pref.strictly_better(&bigger, &inst.menu)? { "A ∪ {g} ≻ A" } else { "A ∪ {g} ≁ A" };
            return Ok(Verdict::fail(
                "STRONG_DOMINANCE",
                k + 1,
                Witness {
                    relation: relation.into(),
                    lhs: single(pref, &bigger)?,
                    rhs: single(pref, &inst.menu)?,
                    act: Some(inst.dominated.clone()),
                    menu: Some(bigger),
                    other_menu: Some(inst.menu.clone()),
                    ..Witness::default()
                },
            ));
        }
    }
    Ok(Verdict::pass("STRONG_DOMINANCE", instances.len()))
}

/// For A ⊂ B: some act of B∖A is chosen after h^t with positive probability iff B ≻_{h^t} A.
/// Menus with ties are skipped when the oracle is a model; for other oracles the
/// caller supplies tie-free menus.
pub fn check_sophistication<O, P>(oracle: &O, pref: &P, h: &History, pairs: &[(Menu, Menu)]) -> Result<Verdict>
where
    O: DynamicOracle + ?Sized,
    P: MenuPreference + ?Sized,
{
    let mut probes = 0;
    for (a, b) in pairs {
        if !a.is_subset(b) || a == b {
            return Err(Error::Precondition(format!("sophistication pair needs A ⊊ B, got {a} and {b}")));
        }
        if let Some(m) = oracle.as_model() {
            if !m.menu_without_ties(b, h)? {
                continue;
            }
        }
        probes += 1;
        let rows = oracle.conditional(h, b)?;
        let mut mass = Q::zero();
        for (f, row) in b.acts().iter().zip(&rows) {
            if !a.contains(f) {
                for p in row {
                    mass += p;
                }
            }
        }
        let chosen = mass.is_positive();
        let better = pref.strictly_better(b, a)?;
        if chosen != better {
            let relation = if chosen { "B∖A chosen but B ∼ A" } else { "B ≻ A but B∖A never chosen" };
            return Ok(Verdict::fail(
                "SOPHISTICATION",
                probes,
                Witness {
                    relation: relation.into(),
                    menu: Some(b.clone()),
                    other_menu: Some(a.clone()),
                    lhs: Some(mass),
                    history: Some(h.clone()),
                    ..Witness::default()
                },
            ));
        }
    }
    if probes == 0 {
        return Ok(Verdict::inconclusive("SOPHISTICATION", 0, "every probed menu has ties"));
    }
    Ok(Verdict::pass("SOPHISTICATION", probes))
}

fn normalized(v: &[Q]) -> Vec<Q> {
    let mean = v.iter().fold(Q::zero(), |a, x| a + x) / Q::from_integer(v.len().into());
    v.iter().map(|x| x - &mean).collect()
}

/// Felicities per node, a discount factor and the belief/kernel skeleton they live on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvolvingPrimitives {
    skeleton: DynamicModel,
    felicity: Vec<Vec<Vec<Q>>>,
    delta: Q,
    class: ModelClass,
}

impl EvolvingPrimitives {
    /// Felicities are shifted so the uniform lottery has value 0. Skeleton tastes are ignored.
    pub fn new(skeleton: DynamicModel, felicity: Vec<Vec<Vec<Q>>>, delta: Q) -> Result<Self> {
        if !delta.is_positive() || delta >= Q::one() {
            return Err(Error::Precondition(format!("discount factor {} outside (0,1)", fmt_q(&delta))));
        }
        let nz = skeleton.prizes().len();
        if felicity.len() != skeleton.levels().len() {
            return Err(Error::Shape(format!("{} felicity levels for horizon {}", felicity.len(), skeleton.horizon())));
        }
        let mut norm = Vec::with_capacity(felicity.len());
        for (t, level) in felicity.iter().enumerate() {
            if level.len() != skeleton.levels()[t].len() {
                return Err(Error::Shape(format!("period {t}: {} felicities for {} nodes", level.len(), skeleton.levels()[t].len())));
            }
            let mut row = Vec::with_capacity(level.len());
            for (i, v) in level.iter().enumerate() {
                if v.len() != nz {
                    return Err(Error::Shape(format!("node ({t},{i}): {} felicity values for {nz} prizes", v.len())));
                }
                row.push(normalized(v));
            }
            norm.push(row);
        }
        Ok(EvolvingPrimitives { skeleton, felicity: norm, delta, class: ModelClass::Evolving })
    }

    /// Felicities and δ of a model whose nodes all carry felicity tastes.
    pub fn from_model(model: &DynamicModel) -> Result<Self> {
        let delta = model.delta().cloned().ok_or_else(|| Error::Class("model has no discount factor".into()))?;
        let mut fel = Vec::new();
        for (t, level) in model.levels().iter().enumerate() {
            let mut row = Vec::new();
            for (i, n) in level.iter().enumerate() {
                let v = n.taste.felicity().ok_or_else(|| Error::Class(format!("node ({t},{i}) has no felicity")))?;
                row.push(v.to_vec());
            }
            fel.push(row);
        }
        let mut p = EvolvingPrimitives::new(model.clone(), fel, delta)?;
        p.class = model.class();
        Ok(p)
    }

    pub fn skeleton(&self) -> &DynamicModel {
        &self.skeleton
    }

    pub fn felicity(&self, t: usize, i: usize) -> &[Q] {
        &self.felicity[t][i]
    }

    pub fn felicities(&self) -> &[Vec<Vec<Q>>] {
        &self.felicity
    }

    pub fn delta(&self) -> &Q {
        &self.delta
    }

    pub fn class(&self) -> ModelClass {
        self.class
    }

    /// v̂_t = δ^{t−T}·v_t.
    pub fn rescaled(&self) -> EvolvingPrimitives {
        let big_t = self.felicity.len() - 1;
        let mut out = self.clone();
        for (t, level) in out.felicity.iter_mut().enumerate() {
            let mut k = Q::one();
            for _ in t..big_t {
                k /= &self.delta;
            }
            for v in level.iter_mut() {
                for x in v.iter_mut() {
                    *x *= &k;
                }
            }
        }
        out
    }

    /// E[v_{t+1}|θ_t] at node (t, i).
    fn child_mean(&self, t: usize, i: usize) -> Vec<Q> {
        let nz = self.skeleton.prizes().len();
        let mut out = vec![Q::zero(); nz];
        for &c in self.skeleton.children(t, i) {
            let p = &self.skeleton.node(t + 1, c).prob;
            for (o, x) in out.iter_mut().zip(&self.felicity[t + 1][c]) {
                *o += p * x;
            }
        }
        out
    }
}

/// u_T = v_T and u_t(z, A) = v_t(z) + δ·V_t^θ(A). Utilities are felicity tastes, evaluated
/// backwards on whatever consequences are queried.
pub fn bellman_build(p: &EvolvingPrimitives) -> Result<DynamicModel> {
    let sk = &p.skeleton;
    let levels: Vec<Vec<Node>> = sk
        .levels()
        .iter()
        .enumerate()
        .map(|(t, level)| {
            level
                .iter()
                .enumerate()
                .map(|(i, n)| Node { taste: Taste::Felicity { values: p.felicity[t][i].clone() }, ..n.clone() })
                .collect()
        })
        .collect();
    DynamicModel::new(sk.prizes().clone(), sk.state_spaces().to_vec(), levels, Some(p.delta.clone()), p.class, sk.flags())
}

/// Outcome of [`check_bellman`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BellmanFit {
    #[serde(with = "crate::rational::serde_q")]
    pub delta: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub residual: Q,
    /// δ was fitted rather than declared
    pub fitted: bool,
}

/// Residual of u_t(z, A) − v_t(z) − δ·V_t^θ(A) over each period's consequence basis. Declared
/// felicities and δ are used when every node has them; otherwise v_t and a common δ are fitted
/// by least squares.
pub fn check_bellman(model: &DynamicModel, tol: &Q) -> Result<(Verdict, BellmanFit)> {
    let big_t = model.horizon();
    let declared = model.delta().is_some() && model.levels().iter().flatten().all(|n| n.taste.felicity().is_some());
    // per (t, i, z): the (u, W) pairs over continuation menus
    let mut cells: Vec<(usize, usize, usize, Vec<(Q, Q)>)> = Vec::new();
    for t in 0..big_t {
        let basis = model.basis(t);
        for i in 0..model.levels()[t].len() {
            for z in 0..model.prizes().len() {
                let mut pts = Vec::new();
                for o in &basis {
                    if let Outcome::Cont(y, m) = o {
                        if *y == z {
                            pts.push((model.utility_of(t, i, o)?, model.menu_value(t, i, m)?));
                        }
                    }
                }
                cells.push((t, i, z, pts));
            }
        }
    }
    let probes = cells.iter().map(|c| c.3.len()).sum();
    let delta = match model.delta() {
        Some(d) if declared => d.clone(),
        _ => {
            let (mut num, mut den) = (Q::zero(), Q::zero());
            for (_, _, _, pts) in &cells {
                if pts.is_empty() {
                    continue;
                }
                let n = Q::from_integer(pts.len().into());
                let mu = pts.iter().fold(Q::zero(), |a, p| a + &p.0) / &n;
                let mw = pts.iter().fold(Q::zero(), |a, p| a + &p.1) / &n;
                for (u, w) in pts {
                    num += (u - &mu) * (w - &mw);
                    den += (w - &mw) * (w - &mw);
                }
            }
            if den.is_zero() {
                let fit = BellmanFit { delta: Q::zero(), residual: Q::zero(), fitted: true };
                return Ok((Verdict::inconclusive("BELLMAN", probes, "continuation values do not vary; δ is not identified"), fit));
            }
            num / den
        }
    };
    let intercept = |t: usize, i: usize, z: usize, pts: &[(Q, Q)]| -> Q {
        if declared {
            model.node(t, i).taste.felicity().expect("declared")[z].clone()
        } else {
            let n = Q::from_integer(pts.len().into());
            pts.iter().fold(Q::zero(), |a, (u, w)| a + u - &delta * w) / n
        }
    };
    let mut residual = Q::zero();
    let mut worst: Option<Witness> = None;
    for (t, i, z, pts) in &cells {
        if pts.is_empty() {
            continue;
        }
        let v = intercept(*t, *i, *z, pts);
        for (u, w) in pts {
            let fit = &v + &delta * w;
            let r = (u - &fit).abs();
            if r > residual {
                residual = r;
                worst = Some(Witness {
                    relation: format!("u_t(z, A) = v_t(z) + δ·V_t(A) at node ({t},{i}), prize {z}"),
                    lhs: Some(u.clone()),
                    rhs: Some(fit),
                    ..Witness::default()
                });
            }
        }
    }
    let fit = BellmanFit { delta: delta.clone(), residual: residual.clone(), fitted: !declared };
    let note = format!("δ = {}, residual {}", fmt_q(&delta), fmt_q(&residual));
    if residual > *tol {
        return Ok((Verdict::fail("BELLMAN", probes, worst.expect("positive residual")).with_note(note), fit));
    }
    if !declared && (!delta.is_positive() || delta >= Q::one()) {
        return Ok((Verdict::inconclusive("BELLMAN", probes, format!("fitted δ = {} outside (0,1)", fmt_q(&delta))), fit));
    }
    Ok((Verdict::pass("BELLMAN", probes).with_note(note), fit))
}

/// Terminal taste per period-T node, a discount factor and the filtration skeleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlPrimitives {
    pub skeleton: DynamicModel,
    pub terminal: Vec<Vec<Q>>,
    pub delta: Q,
}

/// v_t = E[v | θ_t], computed backwards through the kernel.
pub fn gl_build(p: &GlPrimitives) -> Result<EvolvingPrimitives> {
    let sk = &p.skeleton;
    let big_t = sk.horizon();
    if p.terminal.len() != sk.levels()[big_t].len() {
        return Err(Error::Shape(format!("{} terminal tastes for {} terminal nodes", p.terminal.len(), sk.levels()[big_t].len())));
    }
    let nz = sk.prizes().len();
    let mut fel: Vec<Vec<Vec<Q>>> = vec![Vec::new(); big_t + 1];
    fel[big_t] = p.terminal.clone();
    for t in (0..big_t).rev() {
        let mut level = Vec::with_capacity(sk.levels()[t].len());
        for i in 0..sk.levels()[t].len() {
            let mut v = vec![Q::zero(); nz];
            for &c in sk.children(t, i) {
                let w = &sk.node(t + 1, c).prob;
                if fel[t + 1][c].len() != nz {
                    return Err(Error::Shape(format!("node ({},{c}): taste over {} prizes", t + 1, fel[t + 1][c].len())));
                }
                for (o, x) in v.iter_mut().zip(&fel[t + 1][c]) {
                    *o += w * x;
                }
            }
            level.push(v);
        }
        fel[t] = level;
    }
    let mut out = EvolvingPrimitives::new(sk.clone(), fel, p.delta.clone())?;
    out.class = ModelClass::Gl;
    Ok(out)
}

/// Which martingale identity felicities should satisfy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MartingaleScale {
    /// v_t = E[v_{t+1} | θ_t]
    #[default]
    Filtration,
    /// v_t = (1/δ)·E[v_{t+1} | θ_t], the form taken by δ^{t−T}-rescaled felicities
    AsVersion,
}

pub fn check_martingale_primitives(p: &EvolvingPrimitives, scale: MartingaleScale, tol: &Q) -> Result<Verdict> {
    let sk = &p.skeleton;
    let mut probes = 0;
    let mut residual = Q::zero();
    let mut worst = None;
    for t in 0..sk.horizon() {
        for i in 0..sk.levels()[t].len() {
            probes += 1;
            let mut expect = p.child_mean(t, i);
            if scale == MartingaleScale::AsVersion {
                for x in expect.iter_mut() {
                    *x /= &p.delta;
                }
            }
            let diff: Vec<Q> = p.felicity[t][i].iter().zip(&expect).map(|(a, b)| a - b).collect();
            let r = max_abs(&diff);
            if r > residual {
                let z = diff.iter().position(|d| d.abs() == r).expect("max entry");
                residual = r;
                worst = Some(Witness {
                    relation: format!("felicity martingale at node ({t},{i}), prize {z}"),
                    lhs: Some(p.felicity[t][i][z].clone()),
                    rhs: Some(expect[z].clone()),
                    ..Witness::default()
                });
            }
        }
    }
    let note = format!("residual {}", fmt_q(&residual));
    if residual > *tol {
        return Ok(Verdict::fail("MARTINGALE", probes, worst.expect("positive residual")).with_note(note));
    }
    Ok(Verdict::pass("MARTINGALE", probes).with_note(note))
}

/// Martingale check on a felicity model, after the uniform-lottery normalization.
pub fn check_martingale(model: &DynamicModel, scale: MartingaleScale, tol: &Q) -> Result<Verdict> {
    check_martingale_primitives(&EvolvingPrimitives::from_model(model)?, scale, tol)
}

/// Settings for [`identify_delta`] against oracles that are not models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeltaSearch {
    /// perturbation 2^{-ladder}; comparisons closer than that read as indifference
    pub ladder: u32,
    pub max_steps: usize,
}

impl Default for DeltaSearch {
    fn default() -> Self {
        DeltaSearch { ladder: 48, max_steps: 4096 }
    }
}

/// The period-t lottery paying the stream (l_t, …, l_T): l_t paired with the singleton
/// menu of the rest.
pub fn stream_lottery<O: DynamicOracle + ?Sized>(oracle: &O, t: usize, ls: &[Lottery]) -> Result<Lottery> {
    let big_t = oracle.horizon();
    if ls.len() != big_t + 1 - t {
        return Err(Error::Shape(format!("stream of {} lotteries from period {t} to {big_t}", ls.len())));
    }
    if t == big_t {
        return Ok(ls[0].clone());
    }
    let rest = stream_lottery(oracle, t + 1, &ls[1..])?;
    let menu = Arc::new(Menu::singleton(Act::constant(rest, oracle.n_states(t + 1))));
    Lottery::new(ls[0].entries().map(|(o, p)| (Outcome::Cont(o.prize(), menu.clone()), p.clone())))
}

fn stream_act<O: DynamicOracle + ?Sized>(oracle: &O, t: usize, ls: &[Lottery]) -> Result<Act> {
    Ok(Act::constant(stream_lottery(oracle, t, ls)?, oracle.n_states(t)))
}

/// (head…, n, …, n) up to the horizon.
fn padded(head: &[Lottery], len: usize, n: &Lottery) -> Vec<Lottery> {
    let mut v = head.to_vec();
    v.resize(len, n.clone());
    v
}

/// δ from the η with (l, m, n, …) ∼_{h^t} (ηl+(1−η)m, ηl+(1−η)m, n, …): δ = (1−η)/η.
/// Models are solved exactly; other oracles by Stern–Brocot search over revealed comparisons.
pub fn identify_delta<O: DynamicOracle + ?Sized>(oracle: &O, h: &History, n_prizes: usize, search: DeltaSearch) -> Result<Q> {
    let t = h.len().checked_sub(1).ok_or_else(|| Error::Precondition("identify_delta needs a non-empty history".into()))?;
    if t >= oracle.horizon() {
        return Err(Error::Domain(format!("period {t} leaves no later period to trade off")));
    }
    let len = oracle.horizon() + 1 - t;
    let n = Lottery::uniform_prizes(n_prizes);
    let mix = |l: &Lottery, m: &Lottery, eta: &Q| l.mix(eta, m);
    match oracle.as_model() {
        Some(model) => {
            let states = model.consistent_states(h)?;
            if states.is_empty() {
                return Err(Error::Conditioning("history has probability 0".into()));
            }
            let value = |i: usize, ls: &[Lottery]| -> Result<Q> { model.lottery_value(t, i, &stream_lottery(oracle, t, ls)?) };
            let mut witness = None;
            'pairs: for a in 0..n_prizes {
                for b in 0..n_prizes {
                    if a == b {
                        continue;
                    }
                    let (la, lb) = (padded(&[Lottery::prize(a)], len, &n), padded(&[Lottery::prize(b)], len, &n));
                    let mut ok = true;
                    for &i in &states {
                        if value(i, &la)? <= value(i, &lb)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        witness = Some((Lottery::prize(a), Lottery::prize(b)));
                        break 'pairs;
                    }
                }
            }
            let (l, m) = witness.ok_or_else(|| Error::DegenerateConsumption(format!("no strictly ranked consumption pair after {h}")))?;
            let base = padded(&[l.clone(), m.clone()], len, &n);
            let mut eta: Option<Q> = None;
            for &i in &states {
                let vb = value(i, &base)?;
                let w = |e: &Q| -> Result<Q> {
                    let x = mix(&l, &m, e)?;
                    Ok(value(i, &padded(&[x.clone(), x], len, &n))? - &vb)
                };
                let (w0, w1) = (w(&Q::zero())?, w(&Q::one())?);
                if w0 == w1 {
                    return Err(Error::ModelMisfit(format!("node ({t},{i}): stream comparison does not depend on η")));
                }
                let e = &w0 / (&w0 - &w1);
                match &eta {
                    Some(prev) if *prev != e => {
                        return Err(Error::ModelMisfit(format!("consistent states disagree on η: {} vs {}", fmt_q(prev), fmt_q(&e))));
                    }
                    _ => eta = Some(e),
                }
            }
            finish_eta(eta.expect("non-empty"))
        }
        None => {
            let strict = |a: &Act, b: &Act| -> Result<bool> { revealed_geq_probe(oracle, h, a, b, a, b, search.ladder) };
            let mut witness = None;
            'probe: for a in 0..n_prizes {
                for b in 0..n_prizes {
                    if a == b {
                        continue;
                    }
                    let fa = stream_act(oracle, t, &padded(&[Lottery::prize(a)], len, &n))?;
                    let fb = stream_act(oracle, t, &padded(&[Lottery::prize(b)], len, &n))?;
                    if strict(&fa, &fb)? {
                        witness = Some((Lottery::prize(a), Lottery::prize(b), fa, fb));
                        break 'probe;
                    }
                }
            }
            let (l, m, better, worse) =
                witness.ok_or_else(|| Error::DegenerateConsumption(format!("no strictly ranked consumption pair after {h}")))?;
            let r = stream_act(oracle, t, &padded(&[l.clone(), m.clone()], len, &n))?;
            // Stern–Brocot walk on η ∈ (0,1); the comparison is increasing in η
            let (mut lo, mut hi) = ((0i64, 1i64), (1i64, 1i64));
            for _ in 0..search.max_steps {
                let med = (lo.0 + hi.0, lo.1 + hi.1);
                let eta = Q::new(med.0.into(), med.1.into());
                let x = mix(&l, &m, &eta)?;
                let g = stream_act(oracle, t, &padded(&[x.clone(), x], len, &n))?;
                let ge = revealed_geq_probe(oracle, h, &g, &r, &better, &worse, search.ladder)?;
                let le = revealed_geq_probe(oracle, h, &r, &g, &better, &worse, search.ladder)?;
                match (ge, le) {
                    (true, true) => return finish_eta(eta),
                    (true, false) => hi = med,
                    (false, true) => lo = med,
                    (false, false) => return Err(Error::ModelMisfit(format!("streams incomparable at η = {}", fmt_q(&eta)))),
                }
            }
            Err(Error::ModelMisfit(format!("no indifference point within {} search steps", search.max_steps)))
        }
    }
}

fn finish_eta(eta: Q) -> Result<Q> {
    if !eta.is_positive() || eta > Q::one() {
        return Err(Error::ModelMisfit(format!("indifference weight η = {} outside (0,1]", fmt_q(&eta))));
    }
    Ok((Q::one() - &eta) / eta)
}

fn require_gl(model: &DynamicModel) -> Result<()> {
    if model.class() != ModelClass::Gl {
        return Err(Error::Class(format!("speed of learning needs a GL model, got {}", model.class())));
    }
    Ok(())
}

/// v_{t+1} is the same taste (up to positive affine maps) across the children of (t, i).
fn children_agree(model: &DynamicModel, t: usize, i: usize) -> bool {
    let kids = model.children(t, i);
    let fel = |c: usize| model.node(t + 1, c).taste.felicity().expect("GL nodes carry felicities").to_vec();
    let first = normalized(&fel(kids[0]));
    kids[1..].iter().all(|&c| affine_related(&first, &normalized(&fel(c))))
}

/// The agent knows its period-(t+1) taste after h^t.
pub fn taste_learned(model: &DynamicModel, h: &History) -> Result<bool> {
    require_gl(model)?;
    let t = h.len().checked_sub(1).ok_or_else(|| Error::Precondition("taste_learned needs a non-empty history".into()))?;
    if t >= model.horizon() {
        return Err(Error::Domain(format!("period {t} has no successor taste")));
    }
    let states = model.consistent_states(h)?;
    if states.is_empty() {
        return Err(Error::Conditioning("history has probability 0".into()));
    }
    Ok(states.into_iter().all(|i| children_agree(model, t, i)))
}

/// Data-side version: C-Determinism* of ρ_{t+1}(·|h^t) on constant menus.
pub fn taste_learned_oracle<O: DynamicOracle + ?Sized>(oracle: &O, h: &History, best: &Act, battery: &ProbeBattery) -> Result<bool> {
    let after = AfterHistory { oracle, history: h.clone() };
    Ok(check_c_determinism(&after, best, battery)?.passed())
}

/// Certain at t: learned after every period-t history.
pub fn certain_at(model: &DynamicModel, t: usize) -> Result<bool> {
    require_gl(model)?;
    if t >= model.horizon() {
        return Err(Error::Domain(format!("period {t} has no successor taste")));
    }
    Ok((0..model.levels()[t].len()).all(|i| children_agree(model, t, i)))
}

/// Agent 1 learns faster: whenever agent 2 is certain at t, so is agent 1.
pub fn learns_faster(agent1: &DynamicModel, agent2: &DynamicModel) -> Result<bool> {
    require_gl(agent1)?;
    require_gl(agent2)?;
    if agent1.horizon() != agent2.horizon() {
        return Err(Error::Precondition(format!("horizons differ: {} vs {}", agent1.horizon(), agent2.horizon())));
    }
    for t in 0..agent1.horizon() {
        if certain_at(agent2, t)? && !certain_at(agent1, t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{gl_fixture, learners, random_evolving, random_gl, tree_skeleton as skeleton};
    use crate::acts::{Belief, Labels, Utility};
    use crate::fixtures::{random_dynamic_menu, random_dynamic_model, wsd_acts, wsd_belief, wsd_utilities, wsd_weights, DynShape};
    use crate::rational::{q, qi};
    use crate::static_model::{ModelFlags, TieBreakCascade};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wsd() -> DlrMeasure {
        let (u1, u2) = wsd_utilities();
        let (m1, m2) = wsd_weights();
        DlrMeasure::new(vec![(SeuPair::new(wsd_belief(), u1), m1), (SeuPair::new(wsd_belief(), u2), m2)]).unwrap()
    }

    /// Hand evaluation of Σ_k w_k·max_f Σ_s q(s)·u_k(prize of f in s), prize acts only.
    fn brute(utils: &[Vec<Q>], weights: &[Q], belief: &[Q], menu: &[Vec<usize>]) -> Q {
        let mut total = Q::zero();
        for (u, w) in utils.iter().zip(weights) {
            let vals: Vec<Q> = menu.iter().map(|f| f.iter().zip(belief).map(|(&z, p)| p * &u[z]).fold(Q::zero(), |a, x| a + x)).collect();
            total += w * vals.into_iter().max().unwrap();
        }
        total
    }

    #[test]
    fn wsd_values_match_hand_evaluation() {
        let h = q(1, 2);
        let z = Q::zero();
        let utils = vec![vec![h.clone(), h.clone(), z.clone(), z.clone(), qi(1)], vec![z.clone(), z, h.clone(), h, qi(1)]];
        let weights = [q(2, 3), q(1, 3)];
        let belief = [q(2, 3), q(1, 3)];
        let f_only = brute(&utils, &weights, &belief, &[vec![0, 1]]);
        let both = brute(&utils, &weights, &belief, &[vec![0, 1], vec![2, 3]]);
        assert_eq!(f_only, q(1, 3));
        assert_eq!(both, q(1, 2));

        let (f, g) = wsd_acts();
        let m = wsd();
        assert_eq!(dlr_value(&m, &Menu::singleton(f.clone())).unwrap(), f_only);
        assert_eq!(dlr_value(&m, &Menu::new(vec![f, g]).unwrap()).unwrap(), both);
    }

    #[test]
    fn wsd_fails_strong_but_passes_weak_dominance() {
        let (f, g) = wsd_acts();
        let m = wsd();
        let menus = vec![Menu::singleton(f.clone()), Menu::new(vec![f.clone(), g.clone()]).unwrap()];
        assert!(check_weak_dominance(&m, &menus).unwrap().passed());

        let lotteries: Vec<Lottery> = (0..4).map(Lottery::prize).collect();
        let pool = act_lattice(&lotteries, 2, 64);
        assert_eq!(pool.len(), 16);
        let inst = strong_dominance_instances(&m, &menus[..1], &pool).unwrap();
        assert!(!check_strong_dominance(&m, &inst).unwrap().passed());
        let fg: Vec<DominanceInstance> = inst.into_iter().filter(|i| i.dominated == g).collect();
        assert_eq!(fg.len(), 1);
        let v = check_strong_dominance(&m, &fg).unwrap();
        let w = v.witness.unwrap();
        assert_eq!(w.menu, Some(menus[1].clone()));
        assert_eq!(w.relation, "A ∪ {g} ≻ A");
        assert_eq!(w.lhs, Some(q(1, 2)));
        assert_eq!(w.rhs, Some(q(1, 3)));
    }

    #[test]
    fn singleton_measure_is_the_menu_maximum() {
        let seu = SeuPair::new(Belief::new(vec![q(1, 4), q(3, 4)]).unwrap(), Utility::over_prizes(vec![qi(0), qi(2), qi(5)]));
        let m = DlrMeasure::new(vec![(seu.clone(), qi(1))]).unwrap();
        let menu = Menu::new(vec![Act::from_prizes(&[0, 2]), Act::from_prizes(&[1, 1]), Act::from_prizes(&[2, 0])]).unwrap();
        let best = menu.acts().iter().map(|f| eval_act(&seu, f).unwrap()).max().unwrap();
        assert_eq!(dlr_value(&m, &menu).unwrap(), best);
    }

    #[test]
    fn redundant_or_unweighted_measures_are_rejected() {
        let seu = SeuPair::new(Belief::uniform(2), Utility::over_prizes(vec![qi(0), qi(1)]));
        let scaled = SeuPair::new(Belief::uniform(2), Utility::over_prizes(vec![qi(3), qi(5)]));
        assert!(matches!(DlrMeasure::new(vec![(seu.clone(), q(1, 2)), (scaled, q(1, 2))]), Err(Error::Invariant { .. })));
        assert!(matches!(DlrMeasure::new(vec![(seu, qi(1)), (SeuPair::new(Belief::point(2, 0), Utility::over_prizes(vec![qi(0), qi(1)])), qi(0))]), Err(Error::Invariant { .. })));
    }

    #[test]
    fn one_taste_many_beliefs_satisfies_strong_dominance() {
        let u = Utility::over_prizes(vec![qi(0), qi(1), qi(3)]);
        let m = DlrMeasure::new(vec![
            (SeuPair::new(Belief::new(vec![q(1, 5), q(4, 5)]).unwrap(), u.clone()), q(1, 2)),
            (SeuPair::new(Belief::new(vec![q(2, 3), q(1, 3)]).unwrap(), u), q(1, 2)),
        ])
        .unwrap();
        let lotteries = vec![Lottery::prize(0), Lottery::prize(1), Lottery::prize(2), Lottery::uniform_prizes(3)];
        let pool = act_lattice(&lotteries, 2, 64);
        let menus: Vec<Menu> = pool.chunks(3).map(|c| Menu::new(c.to_vec()).unwrap()).collect();
        let inst = strong_dominance_instances(&m, &menus, &pool).unwrap();
        assert!(check_strong_dominance(&m, &inst).unwrap().passed());
        assert!(check_weak_dominance(&m, &menus).unwrap().passed());
    }

    #[test]
    fn empty_hypothesis_battery_is_an_instance_error() {
        let m = wsd();
        let (f, _) = wsd_acts();
        let top = Act::from_prizes(&[4, 4]);
        let r = strong_dominance_instances(&m, &[Menu::singleton(f)], &[top]);
        assert!(matches!(r, Err(Error::Instance(_))));
    }

    /// Skeleton from (parent, state) lists per period; states per period = max index + 1,
    /// uniform beliefs, given kernel weights.
    #[test]
    fn two_period_bellman_matches_hand_value() {
        // one root, one child over two states with belief (1/3, 2/3)
        let one = Belief::uniform(1);
        let b = Belief::new(vec![q(1, 3), q(2, 3)]).unwrap();
        let taste = Taste::Prize { values: vec![qi(0), qi(1)] };
        let nodes = vec![
            vec![Node { parent: None, belief: one, taste: taste.clone(), state: 0, prob: qi(1), cascade: TieBreakCascade::coin() }],
            vec![Node { parent: Some(0), belief: b, taste, state: 0, prob: qi(1), cascade: TieBreakCascade::coin() }],
        ];
        let sk = DynamicModel::new(Labels::numbered("z", 2), vec![Labels::numbered("s", 1), Labels::numbered("s", 2)], nodes, None, ModelClass::Drseu, ModelFlags::default()).unwrap();
        let p = EvolvingPrimitives::new(sk, vec![vec![vec![qi(2), qi(0)]], vec![vec![qi(0), qi(3)]]], q(1, 2)).unwrap();
        // normalized: v0 = (1, −1), v1 = (−3/2, 3/2)
        assert_eq!(p.felicity(0, 0), &[qi(1), qi(-1)]);
        let m = bellman_build(&p).unwrap();
        let l = Act::from_prizes(&[1, 0]);
        let cont = Arc::new(Menu::singleton(l));
        // q·v1(l) = 1/3·3/2 − 2/3·3/2 = −1/2; u0 = 1 + 1/2·(−1/2)
        assert_eq!(m.utility_of(0, 0, &Outcome::Cont(0, cont.clone())).unwrap(), q(3, 4));
        assert_eq!(m.utility_of(0, 0, &Outcome::Cont(1, cont)).unwrap(), q(-5, 4));
        // T = 0: u_0 = v_0
        let sk0 = skeleton(3, &[&[(None, 0, qi(1))]]);
        let p0 = EvolvingPrimitives::new(sk0, vec![vec![vec![qi(3), qi(0), qi(0)]]], q(1, 2)).unwrap();
        let m0 = bellman_build(&p0).unwrap();
        assert_eq!(m0.utility_of(0, 0, &Outcome::Prize(0)).unwrap(), qi(2));
    }

    #[test]
    fn discount_outside_unit_interval_is_rejected() {
        let sk = skeleton(2, &[&[(None, 0, qi(1))]]);
        for d in [qi(0), qi(1), q(3, 2)] {
            assert!(matches!(EvolvingPrimitives::new(sk.clone(), vec![vec![vec![qi(0), qi(1)]]], d), Err(Error::Precondition(_))));
        }
    }

    /// The same model with every taste written out as a table on its period basis.
    fn tabulated(m: &DynamicModel) -> DynamicModel {
        let levels = m
            .levels()
            .iter()
            .enumerate()
            .map(|(t, lv)| {
                let basis = m.basis(t);
                (0..lv.len()).map(|i| Node { taste: Taste::Table { utility: m.materialize(t, i, &basis).unwrap().utility }, ..lv[i].clone() }).collect()
            })
            .collect();
        DynamicModel::new(m.prizes().clone(), m.state_spaces().to_vec(), levels, None, ModelClass::Drseu, m.flags()).unwrap()
    }

    #[test]
    fn bellman_models_pass_declared_and_fitted_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for delta in [q(1, 2), q(9, 10), q(2, 7)] {
            let m = random_evolving(&mut rng, delta.clone());
            let (v, fit) = check_bellman(&m, &Q::zero()).unwrap();
            assert!(v.passed(), "{v:?}");
            assert!(fit.residual.is_zero() && !fit.fitted && fit.delta == delta);

            let (v, fit) = check_bellman(&tabulated(&m), &Q::zero()).unwrap();
            assert!(v.passed(), "{v:?}");
            assert!(fit.fitted);
            assert_eq!(fit.delta, delta);
        }
    }

    #[test]
    fn prize_only_tastes_fail_the_fitted_bellman_check_or_are_unidentified() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_dynamic_model(&mut rng, DynShape::default());
        let (v, fit) = check_bellman(&m, &Q::zero()).unwrap();
        // u ignores continuations, so W never moves u: δ is not identified
        assert!(!v.passed());
        assert!(fit.fitted);
    }

    #[test]
    fn bellman_models_pass_dominance_and_sophistication() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..6 {
            let m = random_evolving(&mut rng, q(4, 5));
            let dims = m.dims();
            for &r in m.roots() {
                let h = m.separating_history(0, r, None).unwrap();
                let pref = ModelMenuPref::new(&m, &h).unwrap();
                let menus: Vec<Menu> = (0..4).map(|_| random_dynamic_menu(&mut rng, &dims, 1, 3)).collect();
                assert!(check_weak_dominance(&pref, &menus).unwrap().passed());
                let pairs: Vec<(Menu, Menu)> = menus.iter().map(|b| (Menu::singleton(b.acts()[0].clone()), b.clone())).collect();
                let v = check_sophistication(&m, &pref, &h, &pairs).unwrap();
                assert!(v.status != crate::axioms::Status::Fail, "{v:?}");
            }
        }
    }

    #[test]
    fn taste_only_model_is_not_sophisticated() {
        // prize tastes at t = 0 ignore menus, so B ≻ A never shows up while B∖A is chosen
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut failures = 0;
        for _ in 0..6 {
            let m = random_dynamic_model(&mut rng, DynShape::default());
            let dims = m.dims();
            let h = m.separating_history(0, m.roots()[0], None).unwrap();
            let pref = ModelMenuPref::new(&m, &h).unwrap();
            let menus: Vec<Menu> = (0..4).map(|_| random_dynamic_menu(&mut rng, &dims, 1, 3)).collect();
            let pairs: Vec<(Menu, Menu)> = menus.iter().map(|b| (Menu::singleton(b.acts()[0].clone()), b.clone())).collect();
            if check_sophistication(&m, &pref, &h, &pairs).unwrap().status == crate::axioms::Status::Fail {
                failures += 1;
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn gl_felicities_are_martingales() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let (_, e) = random_gl(&mut rng, q(9, 10));
            assert!(check_martingale_primitives(&e, MartingaleScale::Filtration, &Q::zero()).unwrap().passed());
            assert!(check_martingale_primitives(&e.rescaled(), MartingaleScale::AsVersion, &Q::zero()).unwrap().passed());
            assert!(!check_martingale_primitives(&e, MartingaleScale::AsVersion, &Q::zero()).unwrap().passed());
            if let Ok(m) = bellman_build(&e) {
                assert_eq!(m.class(), ModelClass::Gl);
                assert!(check_martingale(&m, MartingaleScale::Filtration, &Q::zero()).unwrap().passed());
            }
        }
    }

    #[test]
    fn constant_terminal_taste_gives_equal_felicities() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let sk = random_dynamic_model(&mut rng, DynShape::default());
        let nz = sk.prizes().len();
        let v: Vec<Q> = (0..nz).map(|z| qi(z as i64)).collect();
        let terminal = vec![v; sk.levels()[sk.horizon()].len()];
        let e = gl_build(&GlPrimitives { skeleton: sk, terminal, delta: q(1, 2) }).unwrap();
        let first = e.felicity(0, 0).to_vec();
        assert!(e.felicities().iter().flatten().all(|v| *v == first));
        let v = check_martingale_primitives(&e, MartingaleScale::Filtration, &Q::zero()).unwrap();
        assert_eq!(v.note.as_deref(), Some("residual 0"));
    }

    #[test]
    fn planted_drift_names_the_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (_, e) = random_gl(&mut rng, q(1, 2));
        let mut fel = e.felicities().to_vec();
        fel[0][0][0] += qi(1);
        let drifted = EvolvingPrimitives::new(e.skeleton().clone(), fel, q(1, 2)).unwrap();
        let v = check_martingale_primitives(&drifted, MartingaleScale::Filtration, &q(1, 1_000_000_000)).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().relation.contains("node (0,0)"));
    }

    /// T = 2, one state per period; two level-1 branches with distinct terminal tastes.
    struct Opaque<'a>(&'a DynamicModel);

    impl DynamicOracle for Opaque<'_> {
        fn horizon(&self) -> usize {
            self.0.horizon()
        }

        fn n_states(&self, t: usize) -> usize {
            self.0.states(t).len()
        }

        fn conditional(&self, h: &History, menu: &Menu) -> Result<Vec<Vec<Q>>> {
            self.0.conditional_menu(h, menu)
        }
    }

    #[test]
    fn discount_is_recovered_exactly() {
        for delta in [q(1, 2), q(9, 10), q(99, 100)] {
            let m = gl_fixture(delta.clone());
            let h0 = m.separating_history(0, 0, None).unwrap();
            assert_eq!(identify_delta(&m, &h0, 3, DeltaSearch::default()).unwrap(), delta);
            let h1 = m.separating_history(1, 1, None).unwrap();
            assert_eq!(identify_delta(&m, &h1, 3, DeltaSearch::default()).unwrap(), delta);
            assert_eq!(identify_delta(&Opaque(&m), &h0, 3, DeltaSearch::default()).unwrap(), delta);
        }
    }

    #[test]
    fn flat_consumption_is_degenerate() {
        // the only terminal taste ranks prizes 0 and 1 equally; still non-constant through prize 2
        let sk = skeleton(2, &[&[(None, 0, qi(1))], &[(Some(0), 0, qi(1))]]);
        let e = gl_build(&GlPrimitives { skeleton: sk, terminal: vec![vec![qi(0), qi(1)]], delta: q(1, 2) }).unwrap();
        let m = bellman_build(&e).unwrap();
        let h = m.separating_history(0, 0, None).unwrap();
        assert_eq!(identify_delta(&m, &h, 2, DeltaSearch::default()).unwrap(), q(1, 2));
        // period T has nothing to trade off against
        let h1 = m.separating_history(1, 0, None).unwrap();
        assert!(matches!(identify_delta(&m, &h1, 2, DeltaSearch::default()), Err(Error::Domain(_))));
    }

    /// Two roots; under root 0 both children share a terminal taste, under root 1 they differ.
    fn split_model() -> DynamicModel {
        let sk = skeleton(3, &[&[(None, 0, q(1, 2)), (None, 1, q(1, 2))], &[(Some(0), 0, q(1, 2)), (Some(0), 1, q(1, 2)), (Some(1), 0, q(1, 2)), (Some(1), 1, q(1, 2))]]);
        let a = vec![qi(3), qi(1), qi(0)];
        let terminal = vec![a.clone(), a.clone(), a, vec![qi(0), qi(2), qi(5)]];
        bellman_build(&gl_build(&GlPrimitives { skeleton: sk, terminal, delta: q(1, 2) }).unwrap()).unwrap()
    }

    #[test]
    fn taste_learned_on_one_branch_only() {
        let m = split_model();
        let h0 = m.separating_history(0, 0, None).unwrap();
        let h1 = m.separating_history(0, 1, None).unwrap();
        assert!(taste_learned(&m, &h0).unwrap());
        assert!(!taste_learned(&m, &h1).unwrap());
        assert!(!certain_at(&m, 0).unwrap());
    }

    #[test]
    fn faster_learner_is_detected() {
        let (one, two) = learners();
        assert!(certain_at(&one, 0).unwrap() && certain_at(&one, 1).unwrap());
        assert!(!certain_at(&two, 0).unwrap() && certain_at(&two, 1).unwrap());
        assert!(learns_faster(&one, &two).unwrap());
        assert!(!learns_faster(&two, &one).unwrap());
        assert!(learns_faster(&two, &two).unwrap());
        assert!(learns_faster(&one, &one).unwrap());
    }

    #[test]
    fn learning_needs_gl_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let m = random_evolving(&mut rng, q(1, 2));
        let (one, _) = learners();
        assert!(matches!(learns_faster(&one, &m), Err(Error::Class(_))));
    }
}
