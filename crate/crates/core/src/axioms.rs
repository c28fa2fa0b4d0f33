//! Probe-based verdicts for the static axioms, CIB/NUC and C-Determinism*.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::acts::{extreme_members, Act, Menu, SeuPair, Valuation};
use crate::error::{Error, Result};
use crate::lp::convex_weights;
use crate::rational::{fmt_q, qi, Q};
use crate::static_model::{scf_bar, ChoiceOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AxiomId {
    Mono,
    Lin,
    Ext,
    StateIndep,
    Finiteness,
}

impl AxiomId {
    pub const ALL: [AxiomId; 5] = [AxiomId::Mono, AxiomId::Lin, AxiomId::Ext, AxiomId::StateIndep, AxiomId::Finiteness];
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxiomId::Mono => "MONO",
            AxiomId::Lin => "LIN",
            AxiomId::Ext => "EXT",
            AxiomId::StateIndep => "STATE_INDEP",
            AxiomId::Finiteness => "FINITENESS",
        })
    }
}

impl FromStr for AxiomId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MONO" => Ok(AxiomId::Mono),
            "LIN" => Ok(AxiomId::Lin),
            "EXT" => Ok(AxiomId::Ext),
            "STATE_INDEP" | "SI" => Ok(AxiomId::StateIndep),
            "FINITENESS" | "FIN" => Ok(AxiomId::Finiteness),
            other => Err(Error::Parse(format!("unknown axiom {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// The instance behind a failed check, with both sides of the violated relation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Witness {
    pub relation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub menu: Option<Menu>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_menu: Option<Menu>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub act: Option<Act>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(with = "crate::rational::serde_opt_q", skip_serializing_if = "Option::is_none")]
    pub lhs: Option<Q>,
    #[serde(with = "crate::rational::serde_opt_q", skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Q>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<crate::dynamic::History>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub probes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn pass(check: impl Into<String>, probes: usize) -> Self {
        Verdict { check: check.into(), status: Status::Pass, witness: None, probes, note: None }
    }

    pub fn fail(check: impl Into<String>, probes: usize, witness: Witness) -> Self {
        Verdict { check: check.into(), status: Status::Fail, witness: Some(witness), probes, note: None }
    }

    pub fn inconclusive(check: impl Into<String>, probes: usize, note: impl Into<String>) -> Self {
        Verdict { check: check.into(), status: Status::Inconclusive, witness: None, probes, note: Some(note.into()) }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Menus to probe, plus the ingredients for the constructed instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeBattery {
    pub menus: Vec<Menu>,
    /// acts g used for λA + (1−λ){g}
    pub mixers: Vec<Act>,
    pub lambdas: Vec<Q>,
    /// ladder length J: weights 1 − 2^{-j}, j = 1..J
    pub ladder: u32,
    /// number of battery menus used for State Independence surgery
    pub surgery_menus: usize,
    pub seed: u64,
}

impl ProbeBattery {
    pub fn new(menus: Vec<Menu>) -> Result<Self> {
        if let Some(first) = menus.first() {
            let n = first.n_states();
            if menus.iter().any(|m| m.n_states() != n) {
                return Err(Error::Shape("battery menus live on different state spaces".into()));
            }
        }
        Ok(ProbeBattery {
            menus,
            mixers: Vec::new(),
            lambdas: vec![Q::new(1.into(), 2.into()), Q::new(1.into(), 3.into())],
            ladder: 10,
            surgery_menus: 12,
            seed: 0,
        })
    }

    /// All menus of size ≤ 4 from the pool (≤ 6 acts), plus ½-mixtures of consecutive menus.
    pub fn from_pool(pool: &[Act]) -> Result<Self> {
        let pool: Vec<Act> = pool.iter().take(6).cloned().collect();
        let mut menus = Vec::new();
        let n = pool.len();
        for mask in 1u32..(1 << n) {
            if mask.count_ones() <= 4 {
                let acts = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pool[i].clone()).collect();
                menus.push(Menu::new(acts)?);
            }
        }
        let half = Q::new(1.into(), 2.into());
        let base = menus.len();
        for i in 0..base.saturating_sub(1) {
            if menus[i].len() * menus[i + 1].len() <= 4 {
                let m = menus[i].mix(&half, &menus[i + 1])?;
                menus.push(m);
            }
        }
        let mut b = Self::new(menus)?;
        b.mixers = pool;
        Ok(b)
    }

    pub fn with_ladder(mut self, j: u32) -> Result<Self> {
        if j < 4 {
            return Err(Error::Precondition("ladder length must be at least 4".into()));
        }
        self.ladder = j;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_states(&self) -> Option<usize> {
        self.menus.first().map(|m| m.n_states())
    }

    pub fn ladder_weights(&self) -> Vec<Q> {
        (1..=self.ladder).map(|j| Q::one() - rung(j)).collect()
    }
}

/// 2^{-j}
pub fn rung(j: u32) -> Q {
    Q::new(1.into(), num_bigint::BigInt::from(1) << j as usize)
}

fn check_shape<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<()> {
    if let Some(n) = battery.n_states() {
        if n != oracle.n_states() {
            return Err(Error::Shape(format!("battery over {n} states, oracle over {}", oracle.n_states())));
        }
    }
    Ok(())
}

/// Memoized oracle lookups for one verdict run.
struct Probe<'a, O: ?Sized> {
    oracle: &'a O,
    cache: BTreeMap<Menu, Vec<Vec<Q>>>,
}

impl<'a, O: ChoiceOracle + ?Sized> Probe<'a, O> {
    fn new(oracle: &'a O) -> Self {
        Probe { oracle, cache: BTreeMap::new() }
    }

    fn rows(&mut self, menu: &Menu) -> Result<&Vec<Vec<Q>>> {
        if !self.cache.contains_key(menu) {
            let r = self.oracle.choice(menu)?;
            self.cache.insert(menu.clone(), r);
        }
        Ok(&self.cache[menu])
    }

    fn rho(&mut self, f: &Act, menu: &Menu) -> Result<Vec<Q>> {
        let i = menu.index_of(f).ok_or_else(|| Error::Domain("act is not in the menu".into()))?;
        Ok(self.rows(menu)?[i].clone())
    }
}

pub fn run_axiom<O: ChoiceOracle + ?Sized>(id: AxiomId, oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    check_shape(oracle, battery)?;
    match id {
        AxiomId::Mono => check_mono(oracle, battery),
        AxiomId::Lin => check_lin(oracle, battery),
        AxiomId::Ext => check_ext(oracle, battery),
        AxiomId::StateIndep => check_state_independence(oracle, battery),
        AxiomId::Finiteness => check_finiteness(oracle, battery),
    }
}

/// Runs several axioms in parallel.
pub fn run_axioms<O: ChoiceOracle + ?Sized>(ids: &[AxiomId], oracle: &O, battery: &ProbeBattery) -> Result<Vec<Verdict>> {
    ids.par_iter().map(|&id| run_axiom(id, oracle, battery)).collect()
}

fn check_mono<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    let mut probe = Probe::new(oracle);
    let mut probes = 0;
    for b in &battery.menus {
        for a in &battery.menus {
            if a.len() >= b.len() || !a.is_subset(b) {
                continue;
            }
            for f in a.acts() {
                let ra = probe.rho(f, a)?;
                let rb = probe.rho(f, b)?;
                for s in 0..ra.len() {
                    probes += 1;
                    if ra[s] < rb[s] {
                        return Ok(Verdict::fail(
                            "MONO",
                            probes,
                            Witness {
                                relation: "ρ(f,A,s) ≥ ρ(f,B,s) for A ⊂ B".into(),
                                menu: Some(a.clone()),
                                other_menu: Some(b.clone()),
                                act: Some(f.clone()),
                                state: Some(s),
                                lhs: Some(ra[s].clone()),
                                rhs: Some(rb[s].clone()),
                                history: None,
                            },
                        ));
                    }
                }
            }
        }
    }
    Ok(Verdict::pass("MONO", probes))
}

fn check_lin<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    let mut probe = Probe::new(oracle);
    let mut probes = 0;
    let mixers: Vec<Act> = if battery.mixers.is_empty() {
        battery.menus.iter().filter_map(|m| m.acts().first().cloned()).take(3).collect()
    } else {
        battery.mixers.clone()
    };
    for a in &battery.menus {
        for g in &mixers {
            for lambda in &battery.lambdas {
                let mixed = a.mix_act(lambda, g)?;
                for f in a.acts() {
                    let fm = f.mix(lambda, g)?;
                    let lhs = probe.rho(&fm, &mixed)?;
                    let rhs = probe.rho(f, a)?;
                    for s in 0..lhs.len() {
                        probes += 1;
                        if lhs[s] != rhs[s] {
                            return Ok(Verdict::fail(
                                "LIN",
                                probes,
                                Witness {
                                    relation: format!("ρ(λf+(1−λ)g, λA+(1−λ){{g}}, s) = ρ(f,A,s), λ = {}", fmt_q(lambda)),
                                    menu: Some(mixed.clone()),
                                    other_menu: Some(a.clone()),
                                    act: Some(f.clone()),
                                    state: Some(s),
                                    lhs: Some(lhs[s].clone()),
                                    rhs: Some(rhs[s].clone()),
                                    history: None,
                                },
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(Verdict::pass("LIN", probes))
}

fn check_ext<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    let mut probes = 0;
    for a in &battery.menus {
        let rows = oracle.choice(a)?;
        let ext: BTreeSet<usize> = extreme_members(a).into_iter().collect();
        let n = rows.first().map_or(0, |r| r.len());
        for s in 0..n {
            probes += 1;
            let on_ext = ext.iter().fold(Q::zero(), |acc, &i| acc + &rows[i][s]);
            let total = rows.iter().fold(Q::zero(), |acc, r| acc + &r[s]);
            if on_ext != total {
                let bad = (0..a.len()).find(|i| !ext.contains(i) && rows[*i][s].is_positive());
                return Ok(Verdict::fail(
                    "EXT",
                    probes,
                    Witness {
                        relation: "ρ(ext(A), A, s) = ρ(A, A, s)".into(),
                        menu: Some(a.clone()),
                        act: bad.map(|i| a.acts()[i].clone()),
                        state: Some(s),
                        lhs: Some(on_ext),
                        rhs: Some(total),
                        ..Witness::default()
                    },
                ));
            }
        }
    }
    Ok(Verdict::pass("EXT", probes))
}

/// Instance of the State Independence hypothesis: f(s1) = f(s2), acts of A_i differ from f only at s_i,
/// and A1(s1) = A2(s2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateIndepInstance {
    pub f: Act,
    pub a1: Menu,
    pub a2: Menu,
    pub s1: usize,
    pub s2: usize,
}

impl StateIndepInstance {
    pub fn validate(&self) -> Result<()> {
        let (f, s1, s2) = (&self.f, self.s1, self.s2);
        let bad = |m: &str| Err(Error::Instance(m.to_string()));
        if s1 == s2 || f.row(s1) != f.row(s2) {
            return bad("f must pay the same lottery in s1 and s2");
        }
        for (menu, si) in [(&self.a1, s1), (&self.a2, s2)] {
            for g in menu.acts() {
                if (0..f.n_states()).any(|s| s != si && g.row(s) != f.row(s)) {
                    return bad("acts of A_i may differ from f only at s_i");
                }
            }
        }
        let r1: BTreeSet<_> = self.a1.acts().iter().map(|g| g.row(s1)).collect();
        let r2: BTreeSet<_> = self.a2.acts().iter().map(|g| g.row(s2)).collect();
        if r1 != r2 {
            return bad("A1(s1) must equal A2(s2)");
        }
        if !self.a1.contains(f) {
            return bad("f must belong to A1");
        }
        Ok(())
    }
}

/// Row surgery: from a battery menu and f ∈ A build (f', A1, A2) for states s1 ≠ s2.
pub fn state_indep_instances(menu: &Menu, s1: usize, s2: usize) -> Vec<StateIndepInstance> {
    let mut out = Vec::new();
    for f in menu.acts() {
        let base = f.with_row(s2, f.row(s1).clone());
        let mut rows: BTreeSet<_> = menu.acts().iter().map(|g| g.row(s1).clone()).collect();
        rows.insert(base.row(s1).clone());
        let a1 = Menu::new(rows.iter().map(|l| base.with_row(s1, l.clone())).collect()).expect("non-empty");
        let a2 = Menu::new(rows.iter().map(|l| base.with_row(s2, l.clone())).collect()).expect("non-empty");
        out.push(StateIndepInstance { f: base, a1, a2, s1, s2 });
    }
    out
}

pub fn check_state_indep_instances<O: ChoiceOracle + ?Sized>(oracle: &O, instances: &[StateIndepInstance]) -> Result<Verdict> {
    let mut probe = Probe::new(oracle);
    let mut probes = 0;
    for inst in instances {
        inst.validate()?;
        let union = inst.a1.union(&inst.a2)?;
        let lhs = probe.rho(&inst.f, &inst.a1)?;
        let rhs = probe.rho(&inst.f, &union)?;
        for s in 0..lhs.len() {
            probes += 1;
            if lhs[s] != rhs[s] {
                return Ok(Verdict::fail(
                    "STATE_INDEP",
                    probes,
                    Witness {
                        relation: format!("ρ(f,A1,s) = ρ(f,A1∪A2,s) with s1 = {}, s2 = {}", inst.s1, inst.s2),
                        menu: Some(inst.a1.clone()),
                        other_menu: Some(union),
                        act: Some(inst.f.clone()),
                        state: Some(s),
                        lhs: Some(lhs[s].clone()),
                        rhs: Some(rhs[s].clone()),
                        history: None,
                    },
                ));
            }
        }
    }
    Ok(Verdict::pass("STATE_INDEP", probes))
}

fn check_state_independence<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    let n = oracle.n_states();
    let mut instances = Vec::new();
    for menu in battery.menus.iter().take(battery.surgery_menus) {
        for s1 in 0..n {
            for s2 in 0..n {
                if s1 != s2 {
                    instances.extend(state_indep_instances(menu, s1, s2));
                }
            }
        }
    }
    check_state_indep_instances(oracle, &instances)
}

/// Distinct seeded jitter acts, one per act of the menu.
fn jitter_acts(menu: &Menu, n_prizes: usize, seed: u64) -> Vec<Act> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    crate::fixtures::random_pool(&mut rng, menu.n_states(), n_prizes, menu.len())
}

fn prize_count(menu: &Menu) -> usize {
    menu.acts()
        .iter()
        .flat_map(|a| a.rows().iter().flat_map(|l| l.support().map(|o| o.prize())))
        .max()
        .map_or(2, |z| (z + 1).max(2))
}

fn check_finiteness<O: ChoiceOracle + ?Sized>(oracle: &O, battery: &ProbeBattery) -> Result<Verdict> {
    let declared = oracle.declared_k();
    let mut probes = 0;
    let mut worst = 0usize;
    for (mi, menu) in battery.menus.iter().enumerate() {
        let jit = jitter_acts(menu, prize_count(menu), battery.seed.wrapping_add(mi as u64));
        let mut counts: Vec<usize> = Vec::new();
        // past J, keep descending until the last three rungs agree
        for j in 1..=4 * battery.ladder {
            if j > battery.ladder && counts[counts.len() - 3..].windows(2).all(|w| w[0] == w[1]) {
                break;
            }
            let w = rung(j);
            let perturbed: Vec<Act> = menu
                .acts()
                .iter()
                .zip(&jit)
                .map(|(f, e)| e.mix(&w, f))
                .collect::<Result<_>>()?;
            let pm = Menu::new(perturbed)?;
            let bar = scf_bar(&oracle.choice(&pm)?);
            counts.push(bar.iter().filter(|p| p.is_positive()).count());
            probes += 1;
        }
        let tail = &counts[counts.len().saturating_sub(3)..];
        if tail.windows(2).any(|w| w[0] != w[1]) {
            return Ok(Verdict::inconclusive("FINITENESS", probes, format!("ladder did not stabilize on menu {menu}: {counts:?}")));
        }
        let c = *tail.last().unwrap_or(&0);
        worst = worst.max(c);
        if let Some(k) = declared {
            if c > k {
                return Ok(Verdict::fail(
                    "FINITENESS",
                    probes,
                    Witness {
                        relation: format!("at most K = {k} acts chosen with positive probability after perturbation"),
                        menu: Some(menu.clone()),
                        lhs: Some(qi(c as i64)),
                        rhs: Some(qi(k as i64)),
                        ..Witness::default()
                    },
                ));
            }
        }
    }
    let note = match declared {
        Some(k) => format!("declared K = {k}; largest stabilized count {worst}"),
        None => format!("no declared K; stabilized counts bounded by {worst} on the probed family"),
    };
    Ok(Verdict::pass("FINITENESS", probes).with_note(note))
}

/// Candidates in `support` that rationalize the act at index `i` of `menu`.
fn rationalizers<'a>(support: &'a [SeuPair], menu: &Menu, i: usize) -> Result<Vec<&'a SeuPair>> {
    let mut out = Vec::new();
    for seu in support {
        if crate::acts::argmax_set(menu, seu)?.contains(&i) {
            out.push(seu);
        }
    }
    Ok(out)
}

/// Correct Interim Beliefs: ρ(·|f,A) ∈ conv{q : (q,u) ∈ N(f,A) ∩ support}.
pub fn check_cib<O: ChoiceOracle + ?Sized>(oracle: &O, support: &[SeuPair], battery: &ProbeBattery) -> Result<Verdict> {
    check_shape(oracle, battery)?;
    let mut probes = 0;
    for menu in &battery.menus {
        let rows = oracle.choice(menu)?;
        let bars = scf_bar(&rows);
        for (i, bar) in bars.iter().enumerate() {
            if bar.is_zero() {
                continue;
            }
            probes += 1;
            let cond: Vec<Q> = rows[i].iter().map(|p| p / bar).collect();
            let rat = rationalizers(support, menu, i)?;
            if rat.is_empty() {
                return Err(Error::SupportMismatch(format!("no candidate rationalizes act {} of menu {menu}", menu.acts()[i])));
            }
            let points: Vec<Vec<Q>> = rat.iter().map(|s| s.belief.probs().to_vec()).collect();
            if convex_weights(&points, &cond).is_none() {
                return Ok(Verdict::fail(
                    "CIB",
                    probes,
                    Witness {
                        relation: "ρ(·|f,A) in the convex hull of rationalizing beliefs".into(),
                        menu: Some(menu.clone()),
                        act: Some(menu.acts()[i].clone()),
                        ..Witness::default()
                    },
                )
                .with_note(format!(
                    "conditional {:?}; rationalizing beliefs {:?}",
                    cond.iter().map(fmt_q).collect::<Vec<_>>(),
                    points.iter().map(|p| p.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>()
                )));
            }
        }
    }
    Ok(Verdict::pass("CIB", probes))
}

/// No Unforeseen Contingencies: supp ρ(·|f,A) ⊆ ∪ supp(q) over rationalizing candidates.
pub fn check_nuc<O: ChoiceOracle + ?Sized>(oracle: &O, support: &[SeuPair], battery: &ProbeBattery) -> Result<Verdict> {
    check_shape(oracle, battery)?;
    let mut probes = 0;
    for menu in &battery.menus {
        let rows = oracle.choice(menu)?;
        let bars = scf_bar(&rows);
        for (i, bar) in bars.iter().enumerate() {
            if bar.is_zero() {
                continue;
            }
            let rat = rationalizers(support, menu, i)?;
            if rat.is_empty() {
                return Err(Error::SupportMismatch(format!("no candidate rationalizes act {} of menu {menu}", menu.acts()[i])));
            }
            for (s, p) in rows[i].iter().enumerate() {
                probes += 1;
                if p.is_positive() && rat.iter().all(|seu| seu.belief.prob(s).is_zero()) {
                    return Ok(Verdict::fail(
                        "NUC",
                        probes,
                        Witness {
                            relation: "realized state lies in the support of a rationalizing belief".into(),
                            menu: Some(menu.clone()),
                            act: Some(menu.acts()[i].clone()),
                            state: Some(s),
                            lhs: Some(p / bar),
                            rhs: Some(Q::zero()),
                            ..Witness::default()
                        },
                    ));
                }
            }
        }
    }
    Ok(Verdict::pass("NUC", probes))
}

/// Checks that `best` is chosen over every other probed act for sure.
pub fn verify_best_act<O: ChoiceOracle + ?Sized>(oracle: &O, best: &Act, acts: &[Act]) -> Result<Option<Witness>> {
    if !best.is_constant() {
        return Err(Error::Domain("the best act must be constant".into()));
    }
    for f in acts {
        if f == best {
            continue;
        }
        let m = Menu::new(vec![f.clone(), best.clone()])?;
        let rows = oracle.choice(&m)?;
        let i = m.index_of(f).expect("member");
        let bar = rows[i].iter().fold(Q::zero(), |a, p| a + p);
        if !bar.is_zero() {
            return Ok(Some(Witness {
                relation: "ρ̄(f, {f, f̄}) = 0".into(),
                menu: Some(m),
                act: Some(f.clone()),
                lhs: Some(bar),
                rhs: Some(Q::zero()),
                ..Witness::default()
            }));
        }
    }
    Ok(None)
}

/// af + (1−a)f̄ replacing f in A.
fn perturbed_menu(menu: &Menu, f: &Act, best: &Act, a: &Q) -> Result<(Act, Menu)> {
    let fa = f.mix(a, best)?;
    let rest = menu.without(f);
    let m = match rest {
        Some(r) => r.with_act(fa.clone())?,
        None => Menu::singleton(fa.clone()),
    };
    Ok((fa, m))
}

/// Every a ∈ (0,1) at which some SEU's ranking of af+(1−a)f̄ against another act of A flips.
fn switch_points(seus: &[&SeuPair], menu: &Menu, f: &Act, best: &Act) -> Result<Vec<Q>> {
    let mut out = Vec::new();
    for seu in seus {
        let uf = seu.value(f)?;
        let ub = seu.value(best)?;
        if uf == ub {
            continue;
        }
        for g in menu.acts() {
            if g == f {
                continue;
            }
            let ug = seu.value(g)?;
            // a·uf + (1−a)·ub = ug
            let a = (&ub - &ug) / (&ub - &uf);
            if a.is_positive() && a < Q::one() {
                out.push(a);
            }
        }
    }
    Ok(out)
}

/// C-Determinism*: for constant menus, lim_{a→1} ρ̄(af+(1−a)f̄, A∖{f} ∪ {af+(1−a)f̄}) ∈ {0,1}.
pub fn check_c_determinism<O: ChoiceOracle + ?Sized>(oracle: &O, best: &Act, battery: &ProbeBattery) -> Result<Verdict> {
    check_shape(oracle, battery)?;
    if battery.menus.iter().any(|m| !m.all_constant()) {
        return Err(Error::Domain("C-Determinism* is probed on constant menus only".into()));
    }
    let pool: BTreeSet<&Act> = battery.menus.iter().flat_map(|m| m.acts()).collect();
    let pool: Vec<Act> = pool.into_iter().cloned().collect();
    if let Some(w) = verify_best_act(oracle, best, &pool)? {
        return Err(Error::Precondition(format!(
            "best act check failed on menu {}",
            w.menu.map(|m| m.to_string()).unwrap_or_default()
        )));
    }
    let mut probes = 0;
    for menu in &battery.menus {
        for f in menu.acts() {
            if f == best {
                continue;
            }
            probes += 1;
            let limit = match oracle.as_model() {
                Some(model) => {
                    let mut seus: Vec<&SeuPair> = model.support().iter().collect();
                    seus.extend(model.cascades().iter().flat_map(|c| c.stages.iter().map(|s| &s.aux)));
                    let last = switch_points(&seus, menu, f, best)?.into_iter().max().unwrap_or_else(Q::zero);
                    let a = (last + Q::one()) / qi(2);
                    let (fa, m) = perturbed_menu(menu, f, best, &a)?;
                    let rows = oracle.choice(&m)?;
                    Some(rows[m.index_of(&fa).expect("member")].iter().fold(Q::zero(), |x, p| x + p))
                }
                None => {
                    let mut vals = Vec::new();
                    for a in battery.ladder_weights() {
                        let (fa, m) = perturbed_menu(menu, f, best, &a)?;
                        let rows = oracle.choice(&m)?;
                        vals.push(rows[m.index_of(&fa).expect("member")].iter().fold(Q::zero(), |x, p| x + p));
                    }
                    let tail = &vals[vals.len().saturating_sub(3)..];
                    if tail.windows(2).all(|w| w[0] == w[1]) {
                        tail.last().cloned()
                    } else {
                        None
                    }
                }
            };
            match limit {
                None => {
                    return Ok(Verdict::inconclusive("C_DETERMINISM", probes, format!("ladder did not stabilize on menu {menu}")));
                }
                Some(v) if !v.is_zero() && !v.is_one() => {
                    return Ok(Verdict::fail(
                        "C_DETERMINISM",
                        probes,
                        Witness {
                            relation: "lim ρ̄(af+(1−a)f̄, A∖{f}∪{af+(1−a)f̄}) ∈ {0,1}".into(),
                            menu: Some(menu.clone()),
                            act: Some(f.clone()),
                            lhs: Some(v),
                            ..Witness::default()
                        },
                    ));
                }
                _ => {}
            }
        }
    }
    Ok(Verdict::pass("C_DETERMINISM", probes))
}
