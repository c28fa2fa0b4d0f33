//! Finite R-SEU representations and forward evaluation of the aSCF.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{argmax_among, argmax_set, extreme_among, Act, Labels, Menu, SeuPair};
use crate::error::{Error, Result};
use crate::rational::{fmt_q, to_f64, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(with = "crate::rational::serde_q")]
    pub weight: Q,
    pub aux: SeuPair,
}

/// Weighted auxiliary SEU pairs refining a tie, then a uniform split over what is left.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreakCascade {
    pub stages: Vec<Stage>,
}

impl TieBreakCascade {
    pub fn coin() -> Self {
        TieBreakCascade { stages: Vec::new() }
    }

    pub fn single(aux: SeuPair) -> Self {
        TieBreakCascade { stages: vec![Stage { weight: Q::one(), aux }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Ok(());
        }
        if self.stages.iter().any(|s| s.weight.is_negative()) {
            return Err(Error::invariant("cascade weights ≥ 0", "negative stage weight"));
        }
        let total = self.stages.iter().fold(Q::zero(), |a, s| a + &s.weight);
        if !total.is_one() {
            return Err(Error::invariant("cascade weights sum to 1", fmt_q(&total)));
        }
        Ok(())
    }

    /// Distribution over the acts of `menu` restricted to the tie set `tied` (indices).
    pub fn resolve(&self, menu: &Menu, tied: &[usize]) -> Result<Vec<Q>> {
        let mut out = vec![Q::zero(); menu.len()];
        if tied.len() == 1 {
            out[tied[0]] = Q::one();
            return Ok(out);
        }
        if self.stages.is_empty() {
            residual_split(menu, tied, &Q::one(), &mut out);
            return Ok(out);
        }
        for stage in &self.stages {
            if stage.weight.is_zero() {
                continue;
            }
            let survivors = argmax_among(menu, tied, &stage.aux)?;
            residual_split(menu, &survivors, &stage.weight, &mut out);
        }
        Ok(out)
    }
}

/// Uniform split over the extreme members of the surviving set.
fn residual_split(menu: &Menu, survivors: &[usize], weight: &Q, out: &mut [Q]) {
    let ext = extreme_among(menu, survivors);
    let share = weight / Q::from_integer((ext.len() as i64).into());
    for i in ext {
        out[i] += &share;
    }
}

/// τ_{q,u}(·, A): probability that each act of `menu` is the final selection.
pub fn tie_break_dist(cascade: &TieBreakCascade, seu: &SeuPair, menu: &Menu) -> Result<Vec<Q>> {
    let m = argmax_set(menu, seu)?;
    cascade.resolve(menu, &m)
}

pub fn tie_break_prob(cascade: &TieBreakCascade, seu: &SeuPair, f: &Act, menu: &Menu) -> Result<Q> {
    let i = menu.index_of(f).ok_or_else(|| Error::Domain("act is not in the menu".into()))?;
    Ok(tie_break_dist(cascade, seu, menu)?.swap_remove(i))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFlags {
    #[serde(default)]
    pub cib: bool,
    #[serde(default)]
    pub nuc: bool,
}

/// Finite R-SEU model: SEU support, joint measure μ(k, s), one cascade per support element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RseuModel {
    prizes: Labels,
    states: Labels,
    support: Vec<SeuPair>,
    joint: Vec<Vec<Q>>,
    cascades: Vec<TieBreakCascade>,
    flags: ModelFlags,
}

impl RseuModel {
    pub fn new(
        prizes: Labels,
        states: Labels,
        support: Vec<SeuPair>,
        joint: Vec<Vec<Q>>,
        cascades: Vec<TieBreakCascade>,
        flags: ModelFlags,
    ) -> Result<Self> {
        let n = states.len();
        if support.is_empty() {
            return Err(Error::invariant("non-empty support", "no SEU pairs"));
        }
        if joint.len() != support.len() || cascades.len() != support.len() {
            return Err(Error::Shape("support, joint and cascades must have equal length".into()));
        }
        for (k, seu) in support.iter().enumerate() {
            if seu.belief.len() != n {
                return Err(Error::Shape(format!("belief {k} has {} entries, expected {n}", seu.belief.len())));
            }
            if seu.utility.is_constant() {
                return Err(Error::invariant("non-constant utility", format!("support element {k}")));
            }
            if joint[k].len() != n {
                return Err(Error::Shape(format!("joint row {k} has {} entries, expected {n}", joint[k].len())));
            }
            cascades[k].validate()?;
            for st in &cascades[k].stages {
                if st.aux.belief.len() != n {
                    return Err(Error::Shape(format!("auxiliary belief in cascade {k} has wrong length")));
                }
            }
        }
        for k in 0..support.len() {
            for l in 0..k {
                if support[k].same_preference(&support[l]) {
                    return Err(Error::invariant("distinct preferences", format!("support elements {l} and {k}")));
                }
            }
        }
        let mut total = Q::zero();
        for (k, row) in joint.iter().enumerate() {
            if row.iter().any(|p| p.is_negative()) {
                return Err(Error::invariant("μ ≥ 0", format!("row {k}")));
            }
            let r = row.iter().fold(Q::zero(), |a, p| a + p);
            if r.is_zero() {
                return Err(Error::invariant("full-support marginal", format!("support element {k} has mass 0")));
            }
            total += r;
        }
        if !total.is_one() {
            return Err(Error::invariant("μ sums to 1", fmt_q(&total)));
        }
        if flags.nuc || flags.cib {
            for (k, row) in joint.iter().enumerate() {
                for (s, p) in row.iter().enumerate() {
                    if !p.is_zero() && support[k].belief.prob(s).is_zero() {
                        return Err(Error::invariant(
                            "no unforeseen contingencies",
                            format!("support element {k} realizes state {} outside supp(q)", states.label(s)),
                        ));
                    }
                }
            }
        }
        if flags.cib {
            for (k, row) in joint.iter().enumerate() {
                let nu = row.iter().fold(Q::zero(), |a, p| a + p);
                for (s, p) in row.iter().enumerate() {
                    if *p != &nu * support[k].belief.prob(s) {
                        return Err(Error::invariant(
                            "correct interim beliefs",
                            format!("μ(·|support {k}) differs from its belief at state {}", states.label(s)),
                        ));
                    }
                }
            }
        }
        Ok(RseuModel { prizes, states, support, joint, cascades, flags })
    }

    /// Model with μ(k, s) = ν(k)·q_k(s).
    pub fn cib(prizes: Labels, states: Labels, support: Vec<SeuPair>, nu: Vec<Q>, cascades: Vec<TieBreakCascade>) -> Result<Self> {
        if nu.len() != support.len() {
            return Err(Error::Shape("ν and support lengths differ".into()));
        }
        let joint = support.iter().zip(&nu).map(|(seu, w)| seu.belief.probs().iter().map(|p| w * p).collect()).collect();
        RseuModel::new(prizes, states, support, joint, cascades, ModelFlags { cib: true, nuc: true })
    }

    pub fn prizes(&self) -> &Labels {
        &self.prizes
    }

    pub fn states(&self) -> &Labels {
        &self.states
    }

    pub fn support(&self) -> &[SeuPair] {
        &self.support
    }

    pub fn joint(&self) -> &[Vec<Q>] {
        &self.joint
    }

    pub fn cascades(&self) -> &[TieBreakCascade] {
        &self.cascades
    }

    pub fn flags(&self) -> ModelFlags {
        self.flags
    }

    /// ν(k) = Σ_s μ(k, s).
    pub fn weight(&self, k: usize) -> Q {
        self.joint[k].iter().fold(Q::zero(), |a, p| a + p)
    }

    pub fn state_marginal(&self) -> Vec<Q> {
        (0..self.states.len()).map(|s| self.joint.iter().fold(Q::zero(), |a, r| a + &r[s])).collect()
    }

    fn check_menu(&self, menu: &Menu) -> Result<()> {
        if menu.n_states() != self.states.len() {
            return Err(Error::Shape(format!("menu over {} states, model over {}", menu.n_states(), self.states.len())));
        }
        Ok(())
    }

    /// τ_k(·, A) for every support element.
    pub fn tie_breaks(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.check_menu(menu)?;
        self.support.iter().zip(&self.cascades).map(|(seu, c)| tie_break_dist(c, seu, menu)).collect()
    }

    /// Full table ρ(f, A, s), indexed [act][state].
    pub fn ascf_menu(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        let taus = self.tie_breaks(menu)?;
        let n = self.states.len();
        let mut out = vec![vec![Q::zero(); n]; menu.len()];
        for (k, tau) in taus.iter().enumerate() {
            for (i, t) in tau.iter().enumerate() {
                if t.is_zero() {
                    continue;
                }
                for s in 0..n {
                    if !self.joint[k][s].is_zero() {
                        out[i][s] += &self.joint[k][s] * t;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn ascf(&self, f: &Act, menu: &Menu, s: usize) -> Result<Q> {
        let i = menu.index_of(f).ok_or_else(|| Error::Domain("act is not in the menu".into()))?;
        if s >= self.states.len() {
            return Err(Error::Domain(format!("state index {s} out of range")));
        }
        Ok(self.ascf_menu(menu)?.swap_remove(i).swap_remove(s))
    }
}

/// ρ̄(f, A) for each act of a table row block.
pub fn scf_bar(rows: &[Vec<Q>]) -> Vec<Q> {
    rows.iter().map(|r| r.iter().fold(Q::zero(), |a, p| a + p)).collect()
}

/// ρ(· | f, A) for the act at `i`.
pub fn conditional_states(rows: &[Vec<Q>], i: usize) -> Result<Vec<Q>> {
    let bar = rows[i].iter().fold(Q::zero(), |a, p| a + p);
    if bar.is_zero() {
        return Err(Error::Conditioning(format!("act {i} is chosen with probability 0")));
    }
    Ok(rows[i].iter().map(|p| p / &bar).collect())
}

/// Anything that answers "what is ρ(·, A, ·)?" for a menu.
pub trait ChoiceOracle: Sync {
    fn n_states(&self) -> usize;

    /// ρ(f, A, s) indexed [act][state], acts in `menu.acts()` order.
    fn choice(&self, menu: &Menu) -> Result<Vec<Vec<Q>>>;

    /// A declared bound for Finiteness, if the oracle knows one.
    fn declared_k(&self) -> Option<usize> {
        None
    }

    fn as_model(&self) -> Option<&RseuModel> {
        None
    }
}

impl ChoiceOracle for RseuModel {
    fn n_states(&self) -> usize {
        self.states.len()
    }

    fn choice(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.ascf_menu(menu)
    }

    fn declared_k(&self) -> Option<usize> {
        Some(self.support.len())
    }

    fn as_model(&self) -> Option<&RseuModel> {
        Some(self)
    }
}

/// Tabulated aSCF on finitely many menus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AscfTable {
    n_states: usize,
    rows: BTreeMap<Menu, Vec<Vec<Q>>>,
    state_marginal: Option<Vec<Q>>,
    declared_k: Option<usize>,
}

impl AscfTable {
    /// Exact table: every menu sums to 1 and all menus share one state marginal.
    pub fn new(rows: BTreeMap<Menu, Vec<Vec<Q>>>) -> Result<Self> {
        let t = Self::empirical(rows)?;
        let mut marginal: Option<Vec<Q>> = None;
        for (menu, r) in &t.rows {
            let m: Vec<Q> = (0..t.n_states).map(|s| r.iter().fold(Q::zero(), |a, row| a + &row[s])).collect();
            match &marginal {
                None => marginal = Some(m),
                Some(prev) if *prev != m => {
                    return Err(Error::invariant("menu-independent state marginal", format!("menu {menu}")));
                }
                _ => {}
            }
        }
        Ok(AscfTable { state_marginal: marginal, ..t })
    }

    /// Table whose menus each sum to 1; state marginals may differ (sampled data).
    pub fn empirical(rows: BTreeMap<Menu, Vec<Vec<Q>>>) -> Result<Self> {
        let n_states = rows.keys().next().map_or(0, |m| m.n_states());
        for (menu, r) in &rows {
            if r.len() != menu.len() || r.iter().any(|x| x.len() != n_states) || menu.n_states() != n_states {
                return Err(Error::Shape(format!("table block for menu {menu} has the wrong shape")));
            }
            if r.iter().flatten().any(|p| p.is_negative()) {
                return Err(Error::invariant("probabilities ≥ 0", format!("menu {menu}")));
            }
            let total = r.iter().flatten().fold(Q::zero(), |a, p| a + p);
            if !total.is_one() {
                return Err(Error::invariant("menu rows sum to 1", format!("menu {menu} sums to {}", fmt_q(&total))));
            }
        }
        Ok(AscfTable { n_states, rows, state_marginal: None, declared_k: None })
    }

    pub fn from_oracle<O: ChoiceOracle + ?Sized>(oracle: &O, menus: &[Menu]) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for m in menus {
            rows.insert(m.clone(), oracle.choice(m)?);
        }
        let mut t = Self::new(rows)?;
        t.declared_k = oracle.declared_k();
        Ok(t)
    }

    pub fn with_declared_k(mut self, k: usize) -> Self {
        self.declared_k = Some(k);
        self
    }

    pub fn menus(&self) -> impl Iterator<Item = &Menu> {
        self.rows.keys()
    }

    pub fn rows(&self) -> &BTreeMap<Menu, Vec<Vec<Q>>> {
        &self.rows
    }

    pub fn state_marginal(&self) -> Option<&[Q]> {
        self.state_marginal.as_deref()
    }

    pub fn insert(&mut self, menu: Menu, block: Vec<Vec<Q>>) {
        self.rows.insert(menu, block);
    }
}

impl ChoiceOracle for AscfTable {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn choice(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
        self.rows.get(menu).cloned().ok_or_else(|| Error::Coverage(menu.to_string()))
    }

    fn declared_k(&self) -> Option<usize> {
        self.declared_k
    }
}

/// Sampled counts of (act, state) for one menu.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalBlock {
    pub menu: Menu,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl EmpiricalBlock {
    pub fn frequencies(&self) -> Vec<Vec<Q>> {
        let n = Q::from_integer((self.n as i64).into());
        self.counts
            .iter()
            .map(|r| r.iter().map(|c| Q::from_integer((*c as i64).into()) / &n).collect())
            .collect()
    }

    /// Largest |frequency − exact| over all cells.
    pub fn max_deviation(&self, exact: &[Vec<Q>]) -> f64 {
        let nf = self.n as f64;
        let mut worst = 0.0f64;
        for (r, e) in self.counts.iter().zip(exact) {
            for (c, p) in r.iter().zip(e) {
                worst = worst.max((*c as f64 / nf - to_f64(p)).abs());
            }
        }
        worst
    }
}

/// Cumulative f64 weights for inverse-cdf sampling.
pub(crate) fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

pub(crate) fn draw(cum: &[f64], rng: &mut impl Rng) -> usize {
    let total = *cum.last().expect("non-empty");
    let x = rng.gen::<f64>() * total;
    // skip zero-width cells so impossible outcomes are never drawn
    cum.iter().position(|&c| x < c).unwrap_or_else(|| {
        let last_positive = cum.len() - 1 - cum.windows(2).rev().take_while(|w| w[0] == w[1]).count();
        last_positive
    })
}

/// Draw n i.i.d. choices from `menu`: (q,u,s) ~ μ, then the cascade picks the act.
pub fn simulate(model: &RseuModel, menu: &Menu, n: u64, seed: u64) -> Result<EmpiricalBlock> {
    if n == 0 {
        return Err(Error::Precondition("sample size must be at least 1".into()));
    }
    let taus = model.tie_breaks(menu)?;
    let ns = model.states.len();
    let cells: Vec<(usize, usize)> = (0..model.support.len()).flat_map(|k| (0..ns).map(move |s| (k, s))).collect();
    let joint_cum = cumulative(cells.iter().map(|&(k, s)| to_f64(&model.joint[k][s])));
    let tau_cum: Vec<Vec<f64>> = taus.iter().map(|t| cumulative(t.iter().map(to_f64))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![vec![0u64; ns]; menu.len()];
    for _ in 0..n {
        let (k, s) = cells[draw(&joint_cum, &mut rng)];
        let i = draw(&tau_cum[k], &mut rng);
        counts[i][s] += 1;
    }
    Ok(EmpiricalBlock { menu: menu.clone(), counts, n })
}

/// Hoeffding half-width: with probability ≥ 1−δ a single frequency is within this of its mean.
pub fn hoeffding_bound(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::{Belief, Utility};
    use crate::rational::{q, qi};

    fn hire_menu() -> (Act, Act, Menu) {
        let h = Act::from_prizes(&[0, 1]);
        let nh = Act::from_prizes(&[2, 2]);
        (h.clone(), nh.clone(), Menu::new(vec![h, nh]).unwrap())
    }

    fn hire_u() -> Utility {
        Utility::over_prizes(vec![qi(1), qi(-1), qi(0)])
    }

    #[test]
    fn coin_splits_a_tie() {
        let (h, nh, menu) = hire_menu();
        let fair = SeuPair::new(Belief::uniform(2), hire_u());
        let c = TieBreakCascade::coin();
        assert_eq!(tie_break_prob(&c, &fair, &h, &menu).unwrap(), q(1, 2));
        assert_eq!(tie_break_prob(&c, &fair, &nh, &menu).unwrap(), q(1, 2));
    }

    #[test]
    fn stage_refines_a_tie() {
        let (h, nh, menu) = hire_menu();
        let fair = SeuPair::new(Belief::uniform(2), hire_u());
        let aux = SeuPair::new(Belief::new(vec![q(3, 4), q(1, 4)]).unwrap(), hire_u());
        let c = TieBreakCascade::single(aux);
        assert_eq!(tie_break_prob(&c, &fair, &h, &menu).unwrap(), qi(1));
        assert_eq!(tie_break_prob(&c, &fair, &nh, &menu).unwrap(), qi(0));
    }

    #[test]
    fn no_tie_means_certain_choice() {
        let (h, _, menu) = hire_menu();
        let biased = SeuPair::new(Belief::new(vec![q(3, 4), q(1, 4)]).unwrap(), hire_u());
        assert_eq!(tie_break_prob(&TieBreakCascade::coin(), &biased, &h, &menu).unwrap(), qi(1));
    }

    fn hire_model() -> RseuModel {
        let biased = SeuPair::new(Belief::new(vec![q(3, 4), q(1, 4)]).unwrap(), hire_u());
        RseuModel::new(
            Labels::new(vec!["G".into(), "B".into(), "N".into()]).unwrap(),
            Labels::new(vec!["g".into(), "b".into()]).unwrap(),
            vec![biased],
            vec![vec![q(1, 2), q(1, 2)]],
            vec![TieBreakCascade::coin()],
            ModelFlags::default(),
        )
        .unwrap()
    }

    #[test]
    fn biased_hire_ascf() {
        let m = hire_model();
        let (h, _, menu) = hire_menu();
        assert_eq!(m.ascf(&h, &menu, 0).unwrap(), q(1, 2));
        let rows = m.ascf_menu(&menu).unwrap();
        let i = menu.index_of(&h).unwrap();
        assert_eq!(conditional_states(&rows, i).unwrap(), vec![q(1, 2), q(1, 2)]);
        let other = 1 - i;
        assert!(matches!(conditional_states(&rows, other), Err(Error::Conditioning(_))));
        let single = Menu::singleton(h.clone());
        assert_eq!(m.ascf(&h, &single, 1).unwrap(), q(1, 2));
    }

    #[test]
    fn cib_flag_is_enforced() {
        let biased = SeuPair::new(Belief::new(vec![q(3, 4), q(1, 4)]).unwrap(), hire_u());
        let err = RseuModel::new(
            Labels::numbered("z", 3),
            Labels::numbered("s", 2),
            vec![biased],
            vec![vec![q(1, 2), q(1, 2)]],
            vec![TieBreakCascade::coin()],
            ModelFlags { cib: true, nuc: true },
        );
        assert!(matches!(err, Err(Error::Invariant { .. })));
    }

    #[test]
    fn simulate_is_seeded_and_rejects_zero() {
        let m = hire_model();
        let (_, _, menu) = hire_menu();
        assert!(simulate(&m, &menu, 0, 1).is_err());
        let a = simulate(&m, &menu, 500, 7).unwrap();
        let b = simulate(&m, &menu, 500, 7).unwrap();
        assert_eq!(a, b);
        let one = simulate(&m, &menu, 1, 3).unwrap();
        let exact = m.ascf_menu(&menu).unwrap();
        for (r, e) in one.counts.iter().zip(&exact) {
            for (c, p) in r.iter().zip(e) {
                assert!(*c == 0 || p.is_positive());
            }
        }
    }

    #[test]
    fn table_requires_coverage() {
        let m = hire_model();
        let (h, _, menu) = hire_menu();
        let t = AscfTable::from_oracle(&m, std::slice::from_ref(&menu)).unwrap();
        assert_eq!(t.choice(&menu).unwrap(), m.choice(&menu).unwrap());
        assert!(matches!(t.choice(&Menu::singleton(h)), Err(Error::Coverage(_))));
    }
}
