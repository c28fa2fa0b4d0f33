//! Recovering representations from choice oracles: revealed support and μ over a finite
//! candidate universe, kernels ψ along separating histories, and equivalence up to the
//! affine freedom each model class allows.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acts::{Act, Belief, Labels, Menu, Outcome, SeuPair};
use crate::dynamic::{chain_separating, Dims, DynamicModel, DynamicOracle, History, ModelClass, Node, Taste};
use crate::error::{Error, Result};
use crate::rational::{fmt_q, Q};
use crate::separation::{separating_menu, SeparatingMenu};
use crate::static_model::{ChoiceOracle, ModelFlags, RseuModel, TieBreakCascade};

/// The SEU preferences an analyst entertains.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SeuPair>", into = "Vec<SeuPair>")]
pub struct CandidateUniverse(Vec<SeuPair>);

impl TryFrom<Vec<SeuPair>> for CandidateUniverse {
    type Error = Error;

    fn try_from(v: Vec<SeuPair>) -> Result<Self> {
        CandidateUniverse::new(v)
    }
}

impl From<CandidateUniverse> for Vec<SeuPair> {
    fn from(u: CandidateUniverse) -> Self {
        u.0
    }
}

impl CandidateUniverse {
    pub fn new(seus: Vec<SeuPair>) -> Result<Self> {
        let Some(first) = seus.first() else {
            return Err(Error::Precondition("empty candidate universe".into()));
        };
        let n = first.belief.len();
        for (k, s) in seus.iter().enumerate() {
            if s.belief.len() != n {
                return Err(Error::Shape(format!("candidate {k} has a belief over {} states, expected {n}", s.belief.len())));
            }
            if s.utility.is_constant() {
                return Err(Error::invariant("non-constant SEU", format!("candidate {k}")));
            }
            if let Some(l) = seus[..k].iter().position(|o| o.same_preference(s)) {
                return Err(Error::invariant("distinct preferences", format!("candidates {l} and {k}")));
            }
        }
        Ok(CandidateUniverse(seus))
    }

    /// The model's support followed by every extra candidate that is new.
    pub fn covering(model: &RseuModel, extra: &[SeuPair]) -> Result<Self> {
        let mut seus = model.support().to_vec();
        for s in extra {
            if !seus.iter().any(|o| o.same_preference(s)) {
                seus.push(s.clone());
            }
        }
        CandidateUniverse::new(seus)
    }

    pub fn seus(&self) -> &[SeuPair] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which probe produced a recovered number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub quantity: String,
    pub menu: Menu,
    pub act: Act,
    pub state: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<History>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoveredStatic {
    pub model: RseuModel,
    pub separating: SeparatingMenu,
    pub provenance: Vec<Provenance>,
}

fn scf_mass(rows: &[Vec<Q>], i: usize) -> Q {
    rows[i].iter().fold(Q::zero(), |a, x| a + x)
}

/// Indices of the universe whose designated act is chosen with positive probability on
/// the universe's separating menu and on every pairwise separating menu.
///
/// Exact when the oracle's support is covered by the universe. Each probe is a
/// necessary condition, so candidates outside the support can only survive when some
/// uncovered preference happens to pick their designated acts.
pub fn revealed_support<O: ChoiceOracle + ?Sized>(oracle: &O, universe: &CandidateUniverse) -> Result<Vec<usize>> {
    let seus = universe.seus();
    if oracle.n_states() != seus[0].belief.len() {
        return Err(Error::Shape(format!("oracle has {} states, universe {}", oracle.n_states(), seus[0].belief.len())));
    }
    let sep = separating_menu(seus)?;
    let rows = oracle.choice(&sep.menu)?;
    let mut keep: Vec<usize> = (0..seus.len()).filter(|&k| scf_mass(&rows, sep.assignment[k]).is_positive()).collect();
    if seus.len() > 2 {
        let pairs: Vec<(usize, usize)> = keep.iter().flat_map(|&k| (0..seus.len()).filter(move |&l| l != k).map(move |l| (k, l))).collect();
        let verdicts = pairs
            .par_iter()
            .map(|&(k, l)| {
                let sep = separating_menu(&[seus[k].clone(), seus[l].clone()])?;
                let rows = oracle.choice(&sep.menu)?;
                Ok((k, scf_mass(&rows, sep.assignment[0]).is_positive()))
            })
            .collect::<Result<Vec<_>>>()?;
        keep.retain(|k| verdicts.iter().all(|(j, ok)| j != k || *ok));
    }
    Ok(keep)
}

fn infer_prizes(seus: &[SeuPair]) -> Labels {
    let n = seus.iter().flat_map(|s| s.utility.keys().map(Outcome::prize)).max().map_or(1, |z| z + 1);
    Labels::numbered("z", n)
}

/// μ(q,u,s) read off the separating menu of the revealed support; cascades are left as
/// coins since they are identified only through their action on probed menus.
pub fn recover_static<O: ChoiceOracle + ?Sized>(oracle: &O, universe: &CandidateUniverse) -> Result<RecoveredStatic> {
    let idx = revealed_support(oracle, universe)?;
    if idx.is_empty() {
        return Err(Error::DataInconsistency("no candidate is revealed by the data".into()));
    }
    let seus: Vec<SeuPair> = idx.iter().map(|&k| universe.seus()[k].clone()).collect();
    let sep = separating_menu(&seus)?;
    let rows = oracle.choice(&sep.menu)?;
    let n_states = oracle.n_states();
    let mut joint = Vec::with_capacity(seus.len());
    let mut provenance = Vec::new();
    for (k, &a) in sep.assignment.iter().enumerate() {
        joint.push(rows[a].clone());
        for (s, v) in rows[a].iter().enumerate() {
            provenance.push(Provenance {
                quantity: format!("mu[{k}][{s}]"),
                menu: sep.menu.clone(),
                act: sep.menu.acts()[a].clone(),
                state: s,
                value: v.clone(),
                history: None,
            });
        }
    }
    let designated: BTreeSet<usize> = sep.assignment.iter().copied().collect();
    for (i, r) in rows.iter().enumerate() {
        if !designated.contains(&i) && r.iter().any(|x| !x.is_zero()) {
            return Err(Error::DataInconsistency(format!("act {i} of the separating menu is chosen but designated to no candidate")));
        }
    }
    if let Some(k) = joint.iter().position(|r| r.iter().all(Zero::is_zero)) {
        return Err(Error::DataInconsistency(format!("candidate {} is revealed but has mass 0 on the separating menu", idx[k])));
    }
    let nuc = joint.iter().zip(&seus).all(|(r, s)| r.iter().enumerate().all(|(st, p)| p.is_zero() || !s.belief.prob(st).is_zero()));
    let cib = joint.iter().zip(&seus).all(|(r, s)| {
        let nu = r.iter().fold(Q::zero(), |a, x| a + x);
        r.iter().enumerate().all(|(st, p)| *p == &nu * s.belief.prob(st))
    });
    let (prizes, states) = match oracle.as_model() {
        Some(m) => (m.prizes().clone(), m.states().clone()),
        None => (infer_prizes(&seus), Labels::numbered("s", n_states)),
    };
    let k = seus.len();
    let model = RseuModel::new(prizes, states, seus, joint, vec![TieBreakCascade::coin(); k], ModelFlags { cib, nuc: nuc || cib })?;
    Ok(RecoveredStatic { model, separating: sep, provenance })
}

/// Same support up to positive affine utility maps and the same μ.
pub fn static_equivalent(a: &RseuModel, b: &RseuModel) -> bool {
    if a.support().len() != b.support().len() || a.states().len() != b.states().len() {
        return false;
    }
    a.support().iter().enumerate().all(|(k, s)| match b.support().iter().position(|o| o.same_preference(s)) {
        Some(l) => a.joint()[k] == b.joint()[l],
        None => false,
    })
}

/// Per-period candidate universes over period-t consequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicUniverse {
    pub levels: Vec<CandidateUniverse>,
}

impl DynamicUniverse {
    /// Every node's preference written on the model's period basis.
    pub fn from_model(model: &DynamicModel) -> Result<Self> {
        let mut levels = Vec::with_capacity(model.levels().len());
        for t in 0..model.levels().len() {
            let basis = model.basis(t);
            let mut seus: Vec<SeuPair> = Vec::new();
            for i in 0..model.levels()[t].len() {
                let s = model.materialize(t, i, &basis)?;
                if !seus.iter().any(|o| o.same_preference(&s)) {
                    seus.push(s);
                }
            }
            levels.push(CandidateUniverse::new(seus)?);
        }
        Ok(DynamicUniverse { levels })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoveredDynamic {
    pub model: DynamicModel,
    /// provenance[t][i]: the probe that produced ψ of node (t, i)
    pub provenance: Vec<Vec<Provenance>>,
}

struct Draft {
    parent: Option<usize>,
    cand: usize,
    state: usize,
    prob: Q,
    prov: Provenance,
}

fn read_level(rows: &[Vec<Q>], sep: &SeparatingMenu, parent: Option<usize>, history: Option<&History>, where_: &str) -> Result<Vec<Draft>> {
    let designated: BTreeSet<usize> = sep.assignment.iter().copied().collect();
    if let Some(i) = (0..rows.len()).find(|i| !designated.contains(i) && rows[*i].iter().any(|x| !x.is_zero())) {
        return Err(Error::DataInconsistency(format!("{where_}: act {i} is chosen but designated to no candidate")));
    }
    let mut out = Vec::new();
    for (c, &a) in sep.assignment.iter().enumerate() {
        for (s, p) in rows[a].iter().enumerate() {
            if p.is_positive() {
                out.push(Draft {
                    parent,
                    cand: c,
                    state: s,
                    prob: p.clone(),
                    prov: Provenance {
                        quantity: "psi".into(),
                        menu: sep.menu.clone(),
                        act: sep.menu.acts()[a].clone(),
                        state: s,
                        value: p.clone(),
                        history: history.cloned(),
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Rebuilds the θ-tree: ψ_0 from the period-0 separating menu, then ψ_{t+1}^{θ_t} from the
/// period-(t+1) separating menu after the separating history of θ_t.
pub fn recover_kernels<O: DynamicOracle + ?Sized>(oracle: &O, universe: &DynamicUniverse, prizes: &Labels) -> Result<RecoveredDynamic> {
    let horizon = oracle.horizon();
    if universe.levels.len() != horizon + 1 {
        return Err(Error::Shape(format!("{} universe levels for {} periods", universe.levels.len(), horizon + 1)));
    }
    let dims = Dims { n_prizes: prizes.len(), n_states: (0..=horizon).map(|t| oracle.n_states(t)).collect() };
    let seps: Vec<SeparatingMenu> = universe.levels.par_iter().map(|u| separating_menu(u.seus())).collect::<Result<_>>()?;
    let rows = oracle.conditional(&History::empty(), &seps[0].menu)?;
    let mut drafts: Vec<Vec<Draft>> = vec![read_level(&rows, &seps[0], None, None, "period 0")?];
    // (candidate, state) links of each node's path
    let mut paths: Vec<Vec<(usize, usize)>> = drafts[0].iter().map(|d| vec![(d.cand, d.state)]).collect();
    for t in 0..horizon {
        let level = paths
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let links: Vec<(&SeparatingMenu, usize, usize)> = path.iter().enumerate().map(|(k, &(c, s))| (&seps[k], c, s)).collect();
                let h = chain_separating(&dims, &links, Some(&seps[t + 1].menu))?;
                let rows = oracle.conditional(&h, &seps[t + 1].menu).map_err(|e| match e {
                    Error::Conditioning(m) => Error::Conditioning(format!("separating history of node ({t},{i}): {m}")),
                    e => e,
                })?;
                read_level(&rows, &seps[t + 1], Some(i), Some(&h), &format!("successors of node ({t},{i})"))
            })
            .collect::<Result<Vec<_>>>()?;
        let next: Vec<Draft> = level.into_iter().flatten().collect();
        paths = next
            .iter()
            .map(|d| {
                let mut p = paths[d.parent.expect("non-root")].clone();
                p.push((d.cand, d.state));
                p
            })
            .collect();
        drafts.push(next);
    }
    let mut levels = Vec::with_capacity(drafts.len());
    let mut provenance = Vec::with_capacity(drafts.len());
    for (t, ds) in drafts.into_iter().enumerate() {
        let mut nodes = Vec::with_capacity(ds.len());
        let mut prov = Vec::with_capacity(ds.len());
        for d in ds {
            let seu = &universe.levels[t].seus()[d.cand];
            nodes.push(Node {
                parent: d.parent,
                belief: seu.belief.clone(),
                taste: Taste::Table { utility: seu.utility.clone() },
                state: d.state,
                prob: d.prob,
                cascade: TieBreakCascade::coin(),
            });
            prov.push(d.prov);
        }
        levels.push(nodes);
        provenance.push(prov);
    }
    let states = match oracle.as_model() {
        Some(m) => m.state_spaces().to_vec(),
        None => dims.n_states.iter().map(|&n| Labels::numbered("s", n)).collect(),
    };
    let model = DynamicModel::new(prizes.clone(), states, levels, None, ModelClass::Drseu, ModelFlags { cib: false, nuc: true })?;
    Ok(RecoveredDynamic { model, provenance })
}

/// Every node's taste replaced by the canonical utility of its preference on the period basis.
pub fn canonicalize(model: &DynamicModel) -> Result<DynamicModel> {
    let mut levels = Vec::with_capacity(model.levels().len());
    for t in 0..model.levels().len() {
        let basis = model.basis(t);
        let mut nodes = Vec::with_capacity(model.levels()[t].len());
        for (i, n) in model.levels()[t].iter().enumerate() {
            let seu = model.materialize(t, i, &basis)?;
            nodes.push(Node { taste: Taste::Table { utility: seu.utility.canonical() }, ..n.clone() });
        }
        levels.push(nodes);
    }
    DynamicModel::new(model.prizes().clone(), model.state_spaces().to_vec(), levels, model.delta().cloned(), ModelClass::Drseu, model.flags())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Equivalence {
    pub equivalent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Equivalence {
    fn yes() -> Self {
        Equivalence { equivalent: true, reason: None }
    }

    fn no(reason: String) -> Self {
        Equivalence { equivalent: false, reason: Some(reason) }
    }
}

/// b = α·a + β with α > 0: Some(Some(α)), Some(None) when both are constant, None otherwise.
fn affine_scale(a: &[Q], b: &[Q]) -> Option<Option<Q>> {
    if !crate::acts::affine_related(a, b) {
        return None;
    }
    Some((1..a.len()).find(|&i| a[i] != a[0]).map(|i| (&b[i] - &b[0]) / (&a[i] - &a[0])))
}

struct Matcher<'a> {
    m1: &'a DynamicModel,
    m2: &'a DynamicModel,
    class: ModelClass,
    ratio: Option<Q>,
    bases: Vec<Vec<Outcome>>,
}

impl Matcher<'_> {
    fn values(m: &DynamicModel, t: usize, i: usize, basis: &[Outcome]) -> Result<Vec<Q>> {
        basis.iter().map(|o| m.utility_of(t, i, o)).collect()
    }

    /// `anchor`: the first defined (period, α) on the path, for the Evolving clause.
    fn level(&self, t: usize, a: &[usize], b: &[usize], anchor: Option<(usize, Q)>) -> Result<Option<String>> {
        if a.len() != b.len() {
            return Ok(Some(format!("period {t}: {} vs {} successor nodes", a.len(), b.len())));
        }
        let basis = &self.bases[t];
        let mut used = vec![false; b.len()];
        for &i in a {
            let x = &self.m1.levels()[t][i];
            let ux = Self::values(self.m1, t, i, basis)?;
            let mut found = None;
            for (jj, &j) in b.iter().enumerate() {
                let y = &self.m2.levels()[t][j];
                if used[jj] || x.state != y.state || x.belief != y.belief {
                    continue;
                }
                let uy = Self::values(self.m2, t, j, basis)?;
                // u1 = α·u2 + β
                if let Some(alpha) = affine_scale(&uy, &ux) {
                    found = Some((jj, j, alpha));
                    break;
                }
            }
            let Some((jj, j, alpha)) = found else {
                return Ok(Some(format!("node ({t},{i}) has no counterpart with the same belief, state and preference")));
            };
            used[jj] = true;
            if x.prob != self.m2.levels()[t][j].prob {
                return Ok(Some(format!("node ({t},{i}): probability {} vs {}", fmt_q(&x.prob), fmt_q(&self.m2.levels()[t][j].prob))));
            }
            let mut next_anchor = anchor.clone();
            if let (Some(r), Some(alpha)) = (&self.ratio, alpha) {
                match &anchor {
                    Some((t0, a0)) => {
                        let expect = a0 * pow(r, t - t0);
                        if alpha != expect {
                            return Ok(Some(format!(
                                "node ({t},{i}): utility scale {} breaks the {} discount clause (expected {})",
                                fmt_q(&alpha),
                                self.class,
                                fmt_q(&expect)
                            )));
                        }
                    }
                    None => next_anchor = Some((t, alpha)),
                }
            }
            if t < self.m1.horizon() {
                if let Some(r) = self.level(t + 1, self.m1.children(t, i), self.m2.children(t, j), next_anchor)? {
                    return Ok(Some(r));
                }
            }
        }
        Ok(None)
    }
}

fn pow(r: &Q, n: usize) -> Q {
    (0..n).fold(Q::one(), |a, _| a * r)
}

/// A tree bijection matching ψ, beliefs and states exactly and utilities up to positive
/// affine maps, plus the scale clause of the class: α_t = α_0·(δ₂/δ₁)^t for Evolving,
/// and δ₁ = δ₂ on top of that for GL.
pub fn models_equivalent(m1: &DynamicModel, m2: &DynamicModel, class: ModelClass) -> Result<Equivalence> {
    if m1.horizon() != m2.horizon() {
        return Ok(Equivalence::no(format!("horizons {} and {}", m1.horizon(), m2.horizon())));
    }
    if m1.dims() != m2.dims() {
        return Ok(Equivalence::no("prize or state spaces differ".into()));
    }
    let ratio = match class {
        ModelClass::Drseu => None,
        _ => {
            let (Some(d1), Some(d2)) = (m1.delta(), m2.delta()) else {
                return Err(Error::Class(format!("{class} equivalence needs a discount factor on both models")));
            };
            if class == ModelClass::Gl && d1 != d2 {
                return Ok(Equivalence::no(format!("discount factors {} and {} differ", fmt_q(d1), fmt_q(d2))));
            }
            Some(d2 / d1)
        }
    };
    let bases = (0..=m1.horizon())
        .map(|t| {
            let mut b: BTreeSet<Outcome> = m1.basis(t).into_iter().collect();
            b.extend(m2.basis(t));
            b.into_iter().collect()
        })
        .collect();
    let matcher = Matcher { m1, m2, class, ratio, bases };
    Ok(match matcher.level(0, m1.roots(), m2.roots(), None)? {
        None => Equivalence::yes(),
        Some(r) => Equivalence::no(r),
    })
}

/// Belief the separating menu's designated act reveals: ρ(·|f(q,u), Ā).
pub fn revealed_belief<O: ChoiceOracle + ?Sized>(oracle: &O, sep: &SeparatingMenu, k: usize) -> Result<Belief> {
    let rows = oracle.choice(&sep.menu)?;
    Belief::new(crate::static_model::conditional_states(&rows, sep.assignment[k])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{hire_menu, hire_model, hire_tastes, random_dynamic_model, random_model, random_seu, DynShape, ModelShape};
    use crate::rational::{q, qi};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn static_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..15 {
            let m = random_model(&mut rng, ModelShape::default());
            let n = m.states().len();
            let np = m.prizes().len();
            let alien = random_seu(&mut rng, n, np);
            let u = CandidateUniverse::covering(&m, &[alien]).unwrap();
            let r = recover_static(&m, &u).unwrap();
            assert!(static_equivalent(&m, &r.model));
            assert_eq!(r.model.support().len(), m.support().len());
        }
    }

    #[test]
    fn alien_candidates_are_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, ModelShape { max_support: 3, ..Default::default() });
        let alien = random_seu(&mut rng, m.states().len(), m.prizes().len());
        let u = CandidateUniverse::covering(&m, &[alien]).unwrap();
        let got = revealed_support(&m, &u).unwrap();
        assert_eq!(got, (0..m.support().len()).collect::<Vec<_>>());
    }

    #[test]
    fn cib_recovered_conditional_is_belief() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, ModelShape { cib: true, ..Default::default() });
        let u = CandidateUniverse::covering(&m, &[]).unwrap();
        let r = recover_static(&m, &u).unwrap();
        for (k, seu) in r.model.support().iter().enumerate() {
            assert_eq!(&revealed_belief(&m, &r.separating, k).unwrap(), &seu.belief);
        }
        assert!(r.model.flags().cib);
    }

    #[test]
    fn hire_recovery_keeps_the_gap() {
        let truth = hire_model(q(3, 4), &hire_tastes(false));
        let u = CandidateUniverse::covering(&truth, &[]).unwrap();
        let r = recover_static(&truth, &u).unwrap();
        let menu = hire_menu();
        assert_eq!(r.model.ascf_menu(&menu).unwrap(), truth.ascf_menu(&menu).unwrap());
    }

    #[test]
    fn dynamic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let m = random_dynamic_model(&mut rng, DynShape::default());
            let u = DynamicUniverse::from_model(&m).unwrap();
            let r = recover_kernels(&m, &u, m.prizes()).unwrap();
            let eq = models_equivalent(&m, &r.model, ModelClass::Drseu).unwrap();
            assert!(eq.equivalent, "{:?}", eq.reason);
        }
    }

    fn evolving_base(delta: Q, second: i64) -> DynamicModel {
        let one = Belief::uniform(1);
        let node = |parent, v: &[i64], prob: Q| Node {
            parent,
            belief: one.clone(),
            taste: Taste::Felicity { values: v.iter().map(|&x| qi(x)).collect() },
            state: 0,
            prob,
            cascade: TieBreakCascade::coin(),
        };
        let roots = vec![node(None, &[1, 0], qi(1))];
        let kids = vec![node(Some(0), &[2 * second, 0], q(1, 2)), node(Some(0), &[0, second], q(1, 2))];
        DynamicModel::new(Labels::numbered("z", 2), vec![Labels::numbered("s", 1); 2], vec![roots, kids], Some(delta), ModelClass::Evolving, ModelFlags::default())
            .unwrap()
    }

    /// The same tree with u_t replaced by scales[t]·u_t + 3 on the period basis.
    fn rescaled(a: &DynamicModel, scales: [i64; 2]) -> DynamicModel {
        let mut levels = a.levels().to_vec();
        for (t, l) in levels.iter_mut().enumerate() {
            let basis = a.basis(t);
            for (i, n) in l.iter_mut().enumerate() {
                let u = a.materialize(t, i, &basis).unwrap().utility;
                n.taste = Taste::Table { utility: u.affine(&qi(scales[t]), &qi(3)) };
            }
        }
        DynamicModel::new(a.prizes().clone(), a.state_spaces().to_vec(), levels, a.delta().cloned(), ModelClass::Drseu, ModelFlags::default()).unwrap()
    }

    #[test]
    fn affine_rescaling_is_equivalent() {
        let a = evolving_base(q(1, 2), 1);
        let b = rescaled(&a, [2, 2]);
        assert!(models_equivalent(&a, &b, ModelClass::Drseu).unwrap().equivalent);
        assert!(models_equivalent(&a, &b, ModelClass::Evolving).unwrap().equivalent);
        assert!(models_equivalent(&a, &b, ModelClass::Gl).unwrap().equivalent);
    }

    #[test]
    fn time_varying_scale_breaks_evolving_clause() {
        let a = evolving_base(q(1, 2), 1);
        let b = rescaled(&a, [2, 5]);
        assert!(models_equivalent(&a, &b, ModelClass::Drseu).unwrap().equivalent);
        let e = models_equivalent(&a, &b, ModelClass::Evolving).unwrap();
        assert!(!e.equivalent);
        assert!(e.reason.unwrap().contains("scale"));
    }

    #[test]
    fn discount_and_felicity_trade_off() {
        // halving δ while doubling period-1 felicities leaves every u_t unchanged up to scale
        let a = evolving_base(q(1, 2), 1);
        let b = evolving_base(q(1, 4), 2);
        assert!(models_equivalent(&a, &b, ModelClass::Evolving).unwrap().equivalent);
        assert!(!models_equivalent(&a, &b, ModelClass::Gl).unwrap().equivalent);
    }

    #[test]
    fn gl_needs_equal_discount() {
        let a = evolving_base(q(1, 2), 1);
        let b = evolving_base(q(1, 3), 1);
        assert!(!models_equivalent(&a, &b, ModelClass::Gl).unwrap().equivalent);
    }

    #[test]
    fn zero_mass_history_names_the_node() {
        let m = random_dynamic_model(&mut ChaCha8Rng::seed_from_u64(6), DynShape { horizon: 1, ..Default::default() });
        let mut table = crate::dynamic::DynamicTable::new(vec![m.dims().n_states[0], m.dims().n_states[1]]).unwrap();
        let u = DynamicUniverse::from_model(&m).unwrap();
        let sep = separating_menu(u.levels[0].seus()).unwrap();
        table.insert(History::empty(), sep.menu.clone(), m.conditional_menu(&History::empty(), &sep.menu).unwrap()).unwrap();
        let e = recover_kernels(&table, &u, m.prizes()).unwrap_err();
        assert!(matches!(e, Error::Coverage(_)), "{e:?}");
    }
}
