//! History axioms: Contraction and Linear History Independence, History Continuity,
//! per-period R-SEU, and the probe form of the revealed history preference.

use std::fmt;
use std::str::FromStr;

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acts::{Act, Lottery, Menu, Outcome};
use crate::axioms::{rung, Verdict, Witness};
use crate::dynamic::{oracle_history_prob, DynamicModel, DynamicOracle, History, Step};
use crate::fixtures::random_dynamic_menu;
use crate::error::{Error, Result};
use crate::rational::{q, Q};
use crate::static_model::ChoiceOracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum HistoryAxiom {
    Chi,
    Lhi,
    Hcont,
}

impl HistoryAxiom {
    pub const ALL: [HistoryAxiom; 3] = [HistoryAxiom::Chi, HistoryAxiom::Lhi, HistoryAxiom::Hcont];
}

impl fmt::Display for HistoryAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HistoryAxiom::Chi => "CHI",
            HistoryAxiom::Lhi => "LHI",
            HistoryAxiom::Hcont => "HCONT",
        })
    }
}

impl FromStr for HistoryAxiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CHI" => Ok(HistoryAxiom::Chi),
            "LHI" => Ok(HistoryAxiom::Lhi),
            "HCONT" => Ok(HistoryAxiom::Hcont),
            other => Err(Error::Parse(format!("unknown history axiom {other:?}"))),
        }
    }
}

/// Period `k` of `history` is enlarged to `larger`; the probe is `menu` after the history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChiInstance {
    pub history: History,
    pub k: usize,
    pub larger: Menu,
    pub menu: Menu,
}

/// Period `k` of `history` is mixed: (λA_k + (1−λ)B, λf_k + (1−λ)g, s_k) for every g ∈ B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LhiInstance {
    pub history: History,
    pub k: usize,
    pub lambda: Q,
    pub mixer: Menu,
    pub menu: Menu,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HcontInstance {
    pub history: History,
    pub menu: Menu,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryBattery {
    pub chi: Vec<ChiInstance>,
    pub lhi: Vec<LhiInstance>,
    pub hcont: Vec<HcontInstance>,
    pub ladder: u32,
    /// cap on the number of perturbation directions per continuity instance
    pub max_family: usize,
    pub seed: u64,
}

impl Default for HistoryBattery {
    fn default() -> Self {
        HistoryBattery { chi: Vec::new(), lhi: Vec::new(), hcont: Vec::new(), ladder: 10, max_family: 64, seed: 0 }
    }
}

impl HistoryBattery {
    /// Instances for every (history, probe menu) pair: each period is enlarged by and
    /// mixed with each extra act of that period.
    pub fn generate(histories: &[History], probes: &[Menu], extra: &[Vec<Act>]) -> Result<Self> {
        let mut b = HistoryBattery::default();
        for h in histories {
            for menu in probes.iter().filter(|m| h.len() < extra.len() + 1 && m.n_states() == probe_states(h, extra)) {
                for (k, st) in h.steps().iter().enumerate() {
                    for g in &extra[k] {
                        if !st.menu.contains(g) {
                            b.chi.push(ChiInstance { history: h.clone(), k, larger: st.menu.with_act(g.clone())?, menu: menu.clone() });
                        }
                    }
                    let pair: Vec<Act> = extra[k].iter().take(2).cloned().collect();
                    if !pair.is_empty() {
                        for lambda in [q(1, 2), q(1, 3)] {
                            b.lhi.push(LhiInstance { history: h.clone(), k, lambda, mixer: Menu::new(pair.clone())?, menu: menu.clone() });
                        }
                    }
                }
                b.hcont.push(HcontInstance { history: h.clone(), menu: menu.clone() });
            }
        }
        Ok(b)
    }
}

impl HistoryBattery {
    /// Default battery for a model: period-0 histories through a menu of constant acts that
    /// continue to one random period-1 menu, with two extra acts per period.
    pub fn for_model(model: &DynamicModel, seed: u64) -> Result<Self> {
        let dims = model.dims();
        if dims.horizon() == 0 {
            return Err(Error::Precondition("history axioms need at least two periods".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = random_dynamic_menu(&mut rng, &dims, 1, 3);
        let cont = Arc::new(a1.clone());
        let nz = dims.n_prizes;
        let c = |z: usize| dims.constant(0, Outcome::Cont(z, cont.clone()));
        let a0 = Menu::new(vec![c(0), c(nz - 1)])?;
        let blend = Lottery::new([(Outcome::Cont(0, cont.clone()), q(1, 2)), (Outcome::Cont(nz - 1, cont.clone()), q(1, 2))])?;
        let extra0 = vec![Act::constant(blend, dims.n_states[0])];
        let extra1 = random_dynamic_menu(&mut rng, &dims, 1, 2).acts().to_vec();
        let mut histories = Vec::new();
        for f in a0.acts() {
            for s in 0..dims.n_states[0] {
                let h = History::new(vec![Step::new(a0.clone(), f.clone(), s)?])?;
                if model.history_prob(&h)?.is_positive() {
                    histories.push(h);
                }
            }
        }
        let mut b = Self::generate(&histories, &[a1, Menu::new(extra1.clone())?], &[extra0, extra1])?;
        b.seed = seed;
        Ok(b)
    }
}

fn probe_states(h: &History, extra: &[Vec<Act>]) -> usize {
    extra.get(h.len()).and_then(|v| v.first()).map_or(0, |a| a.n_states())
}

pub fn run_history_axiom<O: DynamicOracle + ?Sized>(id: HistoryAxiom, oracle: &O, battery: &HistoryBattery) -> Result<Verdict> {
    match id {
        HistoryAxiom::Chi => check_chi(oracle, &battery.chi),
        HistoryAxiom::Lhi => check_lhi(oracle, &battery.lhi),
        HistoryAxiom::Hcont => check_hcont(oracle, &battery.hcont, battery.ladder, battery.max_family, battery.seed),
    }
}

/// Conditional choice, or None when the history has probability 0.
fn cond<O: DynamicOracle + ?Sized>(oracle: &O, h: &History, menu: &Menu) -> Result<Option<Vec<Vec<Q>>>> {
    match oracle.conditional(h, menu) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Conditioning(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn first_difference(a: &[Vec<Q>], b: &[Vec<Q>]) -> Option<(usize, usize)> {
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        for (s, (x, y)) in ra.iter().zip(rb).enumerate() {
            if x != y {
                return Some((i, s));
            }
        }
    }
    None
}

fn history_witness(relation: &str, h: &History, menu: &Menu, act: (usize, usize), lhs: &Q, rhs: &Q) -> Witness {
    Witness {
        relation: relation.into(),
        menu: Some(menu.clone()),
        act: Some(menu.acts()[act.0].clone()),
        state: Some(act.1),
        lhs: Some(lhs.clone()),
        rhs: Some(rhs.clone()),
        history: Some(h.clone()),
        ..Default::default()
    }
}

fn check_chi<O: DynamicOracle + ?Sized>(oracle: &O, instances: &[ChiInstance]) -> Result<Verdict> {
    let mut probes = 0;
    for inst in instances {
        let h = &inst.history;
        if inst.k >= h.len() {
            return Err(Error::Instance(format!("period {} outside a history of length {}", inst.k, h.len())));
        }
        let st = &h.steps()[inst.k];
        if !st.menu.is_subset(&inst.larger) {
            return Err(Error::Instance("contraction instance needs A_k ⊆ B_k".into()));
        }
        let pre = h.prefix(inst.k);
        let (Some(ra), Some(rb)) = (cond(oracle, &pre, &st.menu)?, cond(oracle, &pre, &inst.larger)?) else {
            continue;
        };
        let ia = st.menu.index_of(&st.act).expect("validated history");
        let ib = inst.larger.index_of(&st.act).expect("subset");
        if ra[ia][st.state] != rb[ib][st.state] {
            continue; // not contraction equivalent
        }
        let g = h.replace(inst.k, Step { menu: inst.larger.clone(), act: st.act.clone(), state: st.state });
        let (Some(x), Some(y)) = (cond(oracle, h, &inst.menu)?, cond(oracle, &g, &inst.menu)?) else {
            continue;
        };
        probes += 1;
        if let Some((i, s)) = first_difference(&x, &y) {
            return Ok(Verdict::fail("CHI", probes, history_witness("ρ(·|h) = ρ(·|g) for contraction-equivalent g", h, &inst.menu, (i, s), &x[i][s], &y[i][s])));
        }
    }
    Ok(Verdict::pass("CHI", probes))
}

/// ρ(·, A, · | G) = Σ_g ρ(·|g)·ρ(g) / Σ_g ρ(g); None when every history in G has probability 0.
pub fn conditional_on_set<O: DynamicOracle + ?Sized>(oracle: &O, set: &[History], menu: &Menu) -> Result<Option<Vec<Vec<Q>>>> {
    let mut total = Q::zero();
    let mut acc: Option<Vec<Vec<Q>>> = None;
    for g in set {
        let w = oracle_history_prob(oracle, g)?;
        if w.is_zero() {
            continue;
        }
        let rows = oracle.conditional(g, menu)?;
        let acc = acc.get_or_insert_with(|| vec![vec![Q::zero(); rows[0].len()]; rows.len()]);
        for (a, r) in acc.iter_mut().zip(&rows) {
            for (x, y) in a.iter_mut().zip(r) {
                *x += &w * y;
            }
        }
        total += w;
    }
    Ok(acc.map(|mut a| {
        for r in a.iter_mut() {
            for x in r.iter_mut() {
                *x /= &total;
            }
        }
        a
    }))
}

/// The linearly equivalent set G of an instance.
pub fn linear_set(inst: &LhiInstance) -> Result<Vec<History>> {
    let st = inst
        .history
        .steps()
        .get(inst.k)
        .ok_or_else(|| Error::Instance(format!("period {} outside the history", inst.k)))?;
    if inst.lambda.is_zero() || inst.lambda > Q::one() || inst.lambda < Q::zero() {
        return Err(Error::Instance("mixing weight must lie in (0,1]".into()));
    }
    let mixed = st.menu.mix(&inst.lambda, &inst.mixer)?;
    inst.mixer
        .acts()
        .iter()
        .map(|g| Ok(inst.history.replace(inst.k, Step { menu: mixed.clone(), act: st.act.mix(&inst.lambda, g)?, state: st.state })))
        .collect()
}

fn check_lhi<O: DynamicOracle + ?Sized>(oracle: &O, instances: &[LhiInstance]) -> Result<Verdict> {
    let mut probes = 0;
    for inst in instances {
        let set = linear_set(inst)?;
        let Some(x) = cond(oracle, &inst.history, &inst.menu)? else {
            continue;
        };
        let Some(y) = conditional_on_set(oracle, &set, &inst.menu)? else {
            continue;
        };
        probes += 1;
        if let Some((i, s)) = first_difference(&x, &y) {
            return Ok(Verdict::fail("LHI", probes, history_witness("ρ(·|h) = ρ(·|G) for linearly equivalent G", &inst.history, &inst.menu, (i, s), &x[i][s], &y[i][s])));
        }
    }
    Ok(Verdict::pass("LHI", probes))
}

/// One way to perturb a period: rank the acts and push each toward a constant act
/// whose weight on `hi` versus `lo` follows the rank.
#[derive(Clone, Debug)]
struct Direction {
    order: Vec<usize>,
    hi: Lottery,
    lo: Lottery,
}

fn directions(menu: &Menu, rng: &mut ChaCha8Rng) -> Vec<Option<Direction>> {
    let mut rows: Vec<&Lottery> = menu.acts().iter().flat_map(|a| a.rows()).collect();
    rows.sort();
    rows.dedup();
    if menu.len() < 2 || rows.len() < 2 {
        return vec![None];
    }
    let pairs: Vec<(Lottery, Lottery)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, a)| rows[i + 1..].iter().map(move |b| ((*a).clone(), (*b).clone())))
        .take(3)
        .collect();
    let n = menu.len();
    let mut orders: Vec<Vec<usize>> = Vec::new();
    if n <= 4 {
        permutations(&(0..n).collect::<Vec<_>>(), &mut Vec::new(), &mut orders);
    } else {
        let mut base: Vec<usize> = (0..n).collect();
        for _ in 0..24 {
            base.shuffle(rng);
            orders.push(base.clone());
        }
    }
    let mut out = Vec::new();
    for (hi, lo) in pairs {
        for o in &orders {
            out.push(Some(Direction { order: o.clone(), hi: hi.clone(), lo: lo.clone() }));
        }
    }
    out
}

fn permutations(rest: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if rest.is_empty() {
        out.push(cur.clone());
        return;
    }
    for i in 0..rest.len() {
        let mut r = rest.to_vec();
        let x = r.remove(i);
        cur.push(x);
        permutations(&r, cur, out);
        cur.pop();
    }
}

fn perturb(st: &Step, dir: &Option<Direction>, alpha: &Q) -> Result<Step> {
    let Some(d) = dir else { return Ok(st.clone()) };
    let n = st.menu.len();
    let keep = Q::one() - alpha;
    let mut acts = Vec::with_capacity(n);
    let mut chosen = None;
    for (rank, &i) in d.order.iter().enumerate() {
        let w = Q::new((rank as i64).into(), ((n - 1) as i64).into());
        let c = Act::constant(d.hi.mix(&w, &d.lo)?, st.menu.n_states());
        let f = &st.menu.acts()[i];
        let moved = f.mix(&keep, &c)?;
        if *f == st.act {
            chosen = Some(moved.clone());
        }
        acts.push(moved);
    }
    Ok(Step { menu: Menu::new(acts)?, act: chosen.expect("act in menu"), state: st.state })
}

fn check_hcont<O: DynamicOracle + ?Sized>(oracle: &O, instances: &[HcontInstance], ladder: u32, max_family: usize, seed: u64) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = 0;
    let mut unsettled = 0;
    for inst in instances {
        let Some(value) = cond(oracle, &inst.history, &inst.menu)? else {
            continue;
        };
        let per_step: Vec<Vec<Option<Direction>>> = inst.history.steps().iter().map(|st| directions(&st.menu, &mut rng)).collect();
        let total: usize = per_step.iter().map(Vec::len).product();
        let family: Vec<Vec<usize>> = if total <= max_family {
            let mut out = vec![Vec::new()];
            for dirs in &per_step {
                out = out.into_iter().flat_map(|p: Vec<usize>| (0..dirs.len()).map(move |d| [p.clone(), vec![d]].concat())).collect();
            }
            out
        } else {
            (0..max_family).map(|_| per_step.iter().map(|d| rand::Rng::gen_range(&mut rng, 0..d.len())).collect()).collect()
        };
        let mut limits: Vec<Vec<Vec<Q>>> = Vec::new();
        for combo in &family {
            let mut vals: Vec<Vec<Vec<Q>>> = Vec::with_capacity(3);
            for j in ladder.saturating_sub(2).max(1)..=ladder {
                let alpha = rung(j);
                let steps = inst
                    .history
                    .steps()
                    .iter()
                    .zip(combo)
                    .enumerate()
                    .map(|(k, (st, &d))| perturb(st, &per_step[k][d], &alpha))
                    .collect::<Result<Vec<_>>>()?;
                match cond(oracle, &History::new(steps)?, &inst.menu)? {
                    Some(v) => vals.push(v),
                    None => break,
                }
            }
            if vals.len() == 3 && vals.windows(2).all(|w| w[0] == w[1]) {
                limits.push(vals.pop().expect("three rungs"));
            } else if !vals.is_empty() {
                unsettled += 1;
            }
        }
        if limits.is_empty() {
            continue;
        }
        probes += 1;
        for (i, row) in value.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                let lo = limits.iter().map(|l| &l[i][s]).min().expect("non-empty");
                let hi = limits.iter().map(|l| &l[i][s]).max().expect("non-empty");
                if v < lo || v > hi {
                    let bound = if v < lo { lo } else { hi };
                    return Ok(Verdict::fail("HCONT", probes, history_witness("ρ(·|h) ∈ co{limits along perturbed histories}", &inst.history, &inst.menu, (i, s), v, bound)));
                }
            }
        }
    }
    let v = Verdict::pass("HCONT", probes).with_note("pass on probed family");
    Ok(if unsettled > 0 { v.with_note(format!("pass on probed family; {unsettled} ladders did not settle")) } else { v })
}

/// ρ_t(·|h) as a static oracle, for running the static axioms after a history.
pub struct AfterHistory<'a, O: ?Sized> {
    pub oracle: &'a O,
    pub history: History,
}

impl<O: DynamicOracle + ?Sized> ChoiceOracle for AfterHistory<'_, O> {
    fn n_states(&self) -> usize {
        self.oracle.n_states(self.history.len())
    }

    fn choice(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.oracle.conditional(&self.history, menu)
    }
}

/// Data-side g ⪰_{h} r: mixing the last choice with the perturbed r never gets chosen
/// from ½A_t + ½{g^α, r^α}, for the last three ladder rungs.
pub fn revealed_geq_probe<O: DynamicOracle + ?Sized>(oracle: &O, h: &History, g: &Act, r: &Act, better: &Act, worse: &Act, ladder: u32) -> Result<bool> {
    let t = h.len().checked_sub(1).ok_or_else(|| Error::Precondition("revealed preference needs a non-empty history".into()))?;
    let st = &h.steps()[t];
    let pre = h.prefix(t);
    let half = q(1, 2);
    for j in ladder.saturating_sub(2).max(1)..=ladder {
        let keep = Q::one() - rung(j);
        let gn = g.mix(&keep, better)?;
        let rn = r.mix(&keep, worse)?;
        let menu = st.menu.mix(&half, &Menu::new(vec![gn, rn.clone()])?)?;
        let act = st.act.mix(&half, &rn)?;
        let rows = oracle.conditional(&pre, &menu)?;
        let i = menu.index_of(&act).expect("mixed act is in the mixed menu");
        if !rows[i][st.state].is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}
