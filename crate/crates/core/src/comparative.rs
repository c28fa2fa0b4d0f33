//! Comparative statics: test functions and the associated menu value, belief-bias
//! weights and their recovery, SOSD and informativeness.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::acts::{eval_act, Act, Belief, Labels, Lottery, Menu, SeuPair, Utility};
use crate::axioms::{check_c_determinism, verify_best_act, ProbeBattery, Verdict, Witness};
use crate::error::{Error, Result};
use crate::lp::solve_square;
use crate::rational::{fmt_q, from_f64, to_f64, Q};
use crate::static_model::{scf_bar, ChoiceOracle, RseuModel};

/// Right-continuous step cdf on [0,1]: level `values[k]` on [breakpoints[k], breakpoints[k+1]),
/// 0 before the first breakpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepCdf {
    #[serde(with = "crate::rational::serde_qvec")]
    breakpoints: Vec<Q>,
    #[serde(with = "crate::rational::serde_qvec")]
    values: Vec<Q>,
}

impl StepCdf {
    pub fn new(breakpoints: Vec<Q>, values: Vec<Q>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.is_empty() {
            return Err(Error::Shape("step cdf needs one level per breakpoint".into()));
        }
        for w in breakpoints.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invariant("sorted breakpoints", format!("{} before {}", fmt_q(&w[0]), fmt_q(&w[1]))));
            }
        }
        if breakpoints[0].is_negative() || *breakpoints.last().expect("non-empty") > Q::one() {
            return Err(Error::Domain("breakpoints must lie in [0,1]".into()));
        }
        let mut prev = Q::zero();
        for v in &values {
            if *v < prev || *v > Q::one() {
                return Err(Error::invariant("nondecreasing cdf", format!("level {}", fmt_q(v))));
            }
            prev = v.clone();
        }
        if !values.last().expect("non-empty").is_one() {
            return Err(Error::invariant("cdf reaches 1", format!("final level {}", fmt_q(&prev))));
        }
        let mut out = StepCdf { breakpoints, values };
        out.merge();
        Ok(out)
    }

    /// Cdf of a finite distribution given by (location, mass) pairs in [0,1].
    pub fn from_jumps(jumps: &[(Q, Q)]) -> Result<Self> {
        let mut j: Vec<(Q, Q)> = jumps.iter().filter(|(_, m)| !m.is_zero()).cloned().collect();
        j.sort();
        let mut bps: Vec<Q> = Vec::new();
        let mut vals: Vec<Q> = Vec::new();
        let mut acc = Q::zero();
        for (x, m) in j {
            acc += m;
            if bps.last() == Some(&x) {
                *vals.last_mut().expect("paired") = acc.clone();
            } else {
                bps.push(x);
                vals.push(acc.clone());
            }
        }
        StepCdf::new(bps, vals)
    }

    fn merge(&mut self) {
        let mut b = Vec::new();
        let mut v: Vec<Q> = Vec::new();
        for (x, y) in self.breakpoints.iter().zip(&self.values) {
            if v.last() != Some(y) {
                b.push(x.clone());
                v.push(y.clone());
            }
        }
        self.breakpoints = b;
        self.values = v;
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn eval(&self, a: &Q) -> Q {
        match self.breakpoints.iter().rposition(|b| b <= a) {
            Some(k) => self.values[k].clone(),
            None => Q::zero(),
        }
    }

    /// ∫₀^x F.
    pub fn integral_to(&self, x: &Q) -> Q {
        let mut total = Q::zero();
        for (k, b) in self.breakpoints.iter().enumerate() {
            if b >= x {
                break;
            }
            let end = self.breakpoints.get(k + 1).map_or(x.clone(), |n| if n < x { n.clone() } else { x.clone() });
            total += &self.values[k] * (end - b);
        }
        total
    }

    /// ∫₀¹ F.
    pub fn integral(&self) -> Q {
        self.integral_to(&Q::one())
    }

    /// (a, F(a)) on an even grid of n + 1 points, for plotting.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        (0..=n).map(|k| Q::new((k as i64).into(), (n.max(1) as i64).into())).map(|a| (to_f64(&a), to_f64(&self.eval(&a)))).collect()
    }
}

/// The best and worst constant acts that anchor test acts a·f̲ + (1−a)·f̄.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestActs {
    pub worst: Act,
    pub best: Act,
}

impl TestActs {
    pub fn test_act(&self, a: &Q) -> Result<Act> {
        self.worst.mix(a, &self.best)
    }
}

/// ρ̄(f, {f̲, f}) = 1 and ρ̄(f, {f̄, f}) = 0 for every listed f.
pub fn verify_test_acts<O: ChoiceOracle + ?Sized>(oracle: &O, acts: &TestActs, pool: &[Act]) -> Result<()> {
    if !acts.worst.is_constant() || !acts.best.is_constant() {
        return Err(Error::Precondition("test acts must be constant".into()));
    }
    if verify_best_act(oracle, &acts.best, pool)?.is_some() {
        return Err(Error::Precondition("an act is chosen over the best act".into()));
    }
    for f in pool {
        if *f == acts.worst {
            continue;
        }
        let m = Menu::new(vec![f.clone(), acts.worst.clone()])?;
        let i = m.index_of(f).expect("member");
        let bar = scf_bar(&oracle.choice(&m)?);
        if !bar[i].is_one() {
            return Err(Error::Precondition(format!("worst act chosen over {f} with positive probability")));
        }
    }
    Ok(())
}

/// Normalized utility û = (u − u(f̲))/(u(f̄) − u(f̲)) for one SEU.
fn normalizer(seu: &SeuPair, acts: &TestActs) -> Result<(Q, Q)> {
    let lo = eval_act(seu, &acts.worst)?;
    let hi = eval_act(seu, &acts.best)?;
    if hi <= lo {
        return Err(Error::Precondition("best act is not strictly better than the worst act".into()));
    }
    Ok((lo, hi))
}

fn menu_max(seu: &SeuPair, menu: &Menu) -> Result<Q> {
    let mut best: Option<Q> = None;
    for f in menu.acts() {
        let x = eval_act(seu, f)?;
        if best.as_ref().is_none_or(|b| x > *b) {
            best = Some(x);
        }
    }
    Ok(best.expect("non-empty menu"))
}

fn model_test_function(model: &RseuModel, menu: &Menu, acts: &TestActs) -> Result<StepCdf> {
    let mut jumps = Vec::with_capacity(model.support().len());
    for (k, seu) in model.support().iter().enumerate() {
        let (lo, hi) = normalizer(seu, acts)?;
        let m = (menu_max(seu, menu)? - &lo) / (&hi - &lo);
        let a = (Q::one() - m).max(Q::zero()).min(Q::one());
        jumps.push((a, model.weight(k)));
    }
    StepCdf::from_jumps(&jumps)
}

/// ρ̄(A, A ∪ {a·f̲ + (1−a)·f̄}).
fn menu_wins<O: ChoiceOracle + ?Sized>(oracle: &O, menu: &Menu, acts: &TestActs, a: &Q) -> Result<Q> {
    let x = acts.test_act(a)?;
    if menu.contains(&x) {
        return Ok(Q::one());
    }
    let big = menu.with_act(x.clone())?;
    let bar = scf_bar(&oracle.choice(&big)?);
    let i = big.index_of(&x).expect("member");
    Ok(Q::one() - &bar[i])
}

/// Bisection depth for oracles that are not models: jumps are located to within 2^{-bits}.
pub const TEST_FUNCTION_BITS: u32 = 30;

fn sampled_test_function<O: ChoiceOracle + ?Sized>(oracle: &O, menu: &Menu, acts: &TestActs, bits: u32) -> Result<StepCdf> {
    let min_width = Q::new(1.into(), num_bigint::BigInt::from(1) << bits as usize);
    let mut jumps: Vec<(Q, Q)> = Vec::new();
    let at0 = menu_wins(oracle, menu, acts, &Q::zero())?;
    if !at0.is_zero() {
        jumps.push((Q::zero(), at0.clone()));
    }
    let at1 = menu_wins(oracle, menu, acts, &Q::one())?;
    let mut stack = vec![(Q::zero(), at0, Q::one(), at1)];
    while let Some((lo, flo, hi, fhi)) = stack.pop() {
        if flo == fhi {
            continue;
        }
        if &hi - &lo <= min_width {
            jumps.push((hi, fhi - flo));
            continue;
        }
        let mid = (&lo + &hi) / Q::from_integer(2.into());
        let fm = menu_wins(oracle, menu, acts, &mid)?;
        stack.push((lo, flo, mid.clone(), fm.clone()));
        stack.push((mid, fm, hi, fhi));
    }
    StepCdf::from_jumps(&jumps)
}

/// A_ρ̄(a) = ρ̄(A, A ∪ {a·f̲ + (1−a)·f̄}). Closed form for models; bisection otherwise.
pub fn test_function<O: ChoiceOracle + ?Sized>(oracle: &O, menu: &Menu, acts: &TestActs) -> Result<StepCdf> {
    verify_test_acts(oracle, acts, menu.acts())?;
    if menu.contains(&acts.best) {
        return StepCdf::new(vec![Q::zero()], vec![Q::one()]);
    }
    match oracle.as_model() {
        Some(m) => model_test_function(m, menu, acts),
        None => sampled_test_function(oracle, menu, acts, TEST_FUNCTION_BITS),
    }
}

/// V_ρ̄(A) = ∫₀¹ A_ρ̄(a) da.
pub fn associated_value<O: ChoiceOracle + ?Sized>(oracle: &O, menu: &Menu, acts: &TestActs) -> Result<Q> {
    Ok(test_function(oracle, menu, acts)?.integral())
}

/// Signals ω with prior weights, the true posteriors μ(·|ω), a bias direction q(ω)
/// and weights a(ω).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiasSpec {
    pub prior: Vec<Q>,
    pub truth: Vec<Belief>,
    pub direction: Vec<Belief>,
    pub weights: Vec<Q>,
}

impl BiasSpec {
    pub fn new(prior: Vec<Q>, truth: Vec<Belief>, direction: Vec<Belief>, weights: Vec<Q>) -> Result<Self> {
        let n = prior.len();
        if n == 0 || truth.len() != n || direction.len() != n || weights.len() != n {
            return Err(Error::Shape("bias spec needs one truth, direction and weight per signal".into()));
        }
        Belief::new(prior.clone()).map_err(|_| Error::invariant("signal prior", "must be a probability vector"))?;
        let ns = truth[0].len();
        if truth.iter().chain(&direction).any(|b| b.len() != ns) {
            return Err(Error::Shape("beliefs over different state spaces".into()));
        }
        if weights.iter().any(|a| a.is_negative() || *a > Q::one()) {
            return Err(Error::Domain("bias weights must lie in [0,1]".into()));
        }
        Ok(BiasSpec { prior, truth, direction, weights })
    }

    /// a(ω)·q(ω) + (1−a(ω))·μ(·|ω).
    pub fn belief(&self, w: usize) -> Result<Belief> {
        self.direction[w].mix(&self.weights[w], &self.truth[w])
    }

    pub fn with_weights(&self, weights: Vec<Q>) -> Result<Self> {
        BiasSpec::new(self.prior.clone(), self.truth.clone(), self.direction.clone(), weights)
    }

    /// The static model whose support element ω is (biased belief, u), realizing states by μ(·|ω).
    pub fn model(&self, prizes: Labels, states: Labels, u: &Utility) -> Result<RseuModel> {
        let support = (0..self.prior.len()).map(|w| Ok(SeuPair::new(self.belief(w)?, u.clone()))).collect::<Result<Vec<_>>>()?;
        let joint = self.prior.iter().zip(&self.truth).map(|(p, t)| t.probs().iter().map(|x| p * x).collect()).collect();
        let cascades = vec![crate::static_model::TieBreakCascade::coin(); self.prior.len()];
        RseuModel::new(prizes, states, support, joint, cascades, Default::default())
    }
}

/// V_a(A) = Σ_ω μ(ω)·max_{f∈A} [a(ω)q(ω) + (1−a(ω))μ(·|ω)]·(u∘f).
pub fn biased_value(spec: &BiasSpec, u: &Utility, menu: &Menu) -> Result<Q> {
    let mut v = Q::zero();
    for (w, p) in spec.prior.iter().enumerate() {
        let seu = SeuPair::new(spec.belief(w)?, u.clone());
        v += p * menu_max(&seu, menu)?;
    }
    Ok(v)
}

/// Per signal and menu, the values of every act under q(ω) and μ(·|ω).
struct BiasTable {
    prior: Vec<Q>,
    /// [ω][menu][act] = (q(ω)·û(f), μ(·|ω)·û(f))
    vals: Vec<Vec<Vec<(Q, Q)>>>,
}

impl BiasTable {
    fn new(spec: &BiasSpec, u: &Utility, acts: &TestActs, battery: &[Menu]) -> Result<Self> {
        let probe = SeuPair::new(spec.truth[0].clone(), u.clone());
        let (lo, hi) = normalizer(&probe, acts)?;
        let scale = &hi - &lo;
        let norm = |b: &Belief, f: &Act| -> Result<Q> { Ok((eval_act(&SeuPair::new(b.clone(), u.clone()), f)? - &lo) / &scale) };
        let mut vals = Vec::with_capacity(spec.prior.len());
        for w in 0..spec.prior.len() {
            let mut per = Vec::with_capacity(battery.len());
            for menu in battery {
                per.push(menu.acts().iter().map(|f| Ok((norm(&spec.direction[w], f)?, norm(&spec.truth[w], f)?))).collect::<Result<Vec<_>>>()?);
            }
            vals.push(per);
        }
        Ok(BiasTable { prior: spec.prior.clone(), vals })
    }

    fn value_f64(&self, a: &[f64], m: usize) -> f64 {
        let mut v = 0.0;
        for (w, p) in self.prior.iter().enumerate() {
            let best = self.vals[w][m].iter().map(|(x, y)| a[w] * to_f64(x) + (1.0 - a[w]) * to_f64(y)).fold(f64::NEG_INFINITY, f64::max);
            v += to_f64(p) * best;
        }
        v
    }

    fn argmax(&self, a: &[Q], w: usize, m: usize) -> usize {
        let val = |(x, y): &(Q, Q)| &a[w] * x + (Q::one() - &a[w]) * y;
        let row = &self.vals[w][m];
        (0..row.len()).max_by(|&i, &j| val(&row[i]).cmp(&val(&row[j])).then(j.cmp(&i))).expect("non-empty")
    }

    fn value(&self, a: &[Q], m: usize) -> Q {
        let mut v = Q::zero();
        for w in 0..self.prior.len() {
            let (x, y) = &self.vals[w][m][self.argmax(a, w, m)];
            v += &self.prior[w] * (&a[w] * x + (Q::one() - &a[w]) * y);
        }
        v
    }
}

/// Result of [`invert_bias`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BiasFit {
    #[serde(with = "crate::rational::serde_qvec")]
    pub weights: Vec<Q>,
    /// max over the battery of |V_a(A) − V_ρ̄(A)|
    #[serde(with = "crate::rational::serde_q")]
    pub residual: Q,
}

/// Grid points per coordinate and refinement rounds of the coarse search.
const GRID: usize = 21;
const REFINE: usize = 3;

/// Recovers a(ω) with V_a = V_ρ̄ on the battery: a coarse coordinate search, then an exact
/// least-squares solve on the pieces where V_a is affine in a.
pub fn invert_bias<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    spec: &BiasSpec,
    u: &Utility,
    acts: &TestActs,
    battery: &[Menu],
    tol: &Q,
) -> Result<BiasFit> {
    if battery.is_empty() {
        return Err(Error::Instance("empty menu battery".into()));
    }
    check_common_taste(oracle, acts)?;
    let observed: Vec<Q> = battery.par_iter().map(|m| associated_value(oracle, m, acts)).collect::<Result<_>>()?;
    let table = BiasTable::new(spec, u, acts, battery)?;
    let obs_f: Vec<f64> = observed.iter().map(to_f64).collect();
    let n = spec.prior.len();
    let loss = |a: &[f64]| -> f64 { (0..battery.len()).map(|m| (table.value_f64(a, m) - obs_f[m]).powi(2)).sum() };

    let mut a = vec![0.5; n];
    let mut lo = vec![0.0; n];
    let mut hi = vec![1.0; n];
    for _ in 0..=REFINE {
        for _sweep in 0..3 {
            for w in 0..n {
                let step = (hi[w] - lo[w]) / (GRID - 1) as f64;
                let grid: Vec<f64> = (0..GRID).map(|k| lo[w] + step * k as f64).collect();
                let scores: Vec<f64> = grid
                    .par_iter()
                    .map(|&x| {
                        let mut b = a.clone();
                        b[w] = x;
                        loss(&b)
                    })
                    .collect();
                let k = (0..GRID).min_by(|&i, &j| scores[i].total_cmp(&scores[j])).expect("grid");
                a[w] = grid[k];
            }
        }
        for w in 0..n {
            let step = (hi[w] - lo[w]) / (GRID - 1) as f64;
            lo[w] = (a[w] - step).max(0.0);
            hi[w] = (a[w] + step).min(1.0);
        }
    }

    let mut exact: Vec<Q> = a.iter().map(|&x| from_f64(x)).collect();
    let residual_of = |x: &[Q]| -> Q { (0..battery.len()).map(|m| (table.value(x, m) - &observed[m]).abs()).max().unwrap_or_else(Q::zero) };
    let mut best_res = residual_of(&exact);
    for _ in 0..8 {
        // V_a(A) = Σ_ω μ(ω)·(y + a(ω)·(x − y)) on the active pieces
        let mut rows: Vec<(Vec<Q>, Q)> = Vec::with_capacity(battery.len());
        for m in 0..battery.len() {
            let mut coef = vec![Q::zero(); n];
            let mut rhs = observed[m].clone();
            for w in 0..n {
                let (x, y) = &table.vals[w][m][table.argmax(&exact, w, m)];
                coef[w] = &table.prior[w] * (x - y);
                rhs -= &table.prior[w] * y;
            }
            rows.push((coef, rhs));
        }
        let mut ata = vec![vec![Q::zero(); n]; n];
        let mut atb = vec![Q::zero(); n];
        for (c, r) in &rows {
            for i in 0..n {
                atb[i] += &c[i] * r;
                for j in 0..n {
                    ata[i][j] += &c[i] * &c[j];
                }
            }
        }
        if let Some(w) = (0..n).find(|&w| ata[w][w].is_zero()) {
            return Err(Error::Instance(format!("battery does not move the value of signal {w}")));
        }
        let Some(sol) = solve_square(&ata, &atb) else {
            return Err(Error::Instance("battery does not separate the signal weights".into()));
        };
        let next: Vec<Q> = sol.into_iter().map(|x| x.max(Q::zero()).min(Q::one())).collect();
        let res = residual_of(&next);
        let moved = next != exact;
        if res <= best_res {
            best_res = res;
            exact = next;
        }
        if !moved || best_res.is_zero() {
            break;
        }
    }
    if best_res > *tol {
        return Err(Error::ModelMisfit(format!("no bias weights reproduce the menu values; residual {}", fmt_q(&best_res))));
    }
    Ok(BiasFit { weights: exact, residual: best_res })
}

/// C-Determinism* on constant menus of pairs of prizes: the taste is not stochastic.
fn check_common_taste<O: ChoiceOracle + ?Sized>(oracle: &O, acts: &TestActs) -> Result<()> {
    let n = oracle.n_states();
    let mut lotteries: Vec<Lottery> = vec![acts.worst.row(0).clone(), acts.best.row(0).clone()];
    lotteries.extend([&acts.worst, &acts.best].iter().flat_map(|f| f.row(0).support().cloned().collect::<Vec<_>>()).map(Lottery::degenerate));
    lotteries.sort();
    lotteries.dedup();
    let consts: Vec<Act> = lotteries.iter().map(|l| Act::constant(l.clone(), n)).collect();
    if consts.len() < 2 {
        return Ok(());
    }
    let battery = ProbeBattery::new(vec![Menu::new(consts)?])?;
    if !check_c_determinism(oracle, &acts.best, &battery)?.passed() {
        return Err(Error::Precondition("choice among constant acts is stochastic; taste is not common".into()));
    }
    Ok(())
}

/// How two recovered weight vectors compare.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BiasComparison {
    pub first: BiasFit,
    pub second: BiasFit,
    /// a₁ ≤ a₂ componentwise: agent 1 is uniformly less biased
    pub first_less_biased: bool,
    pub second_less_biased: bool,
}

impl BiasComparison {
    pub fn incomparable(&self) -> bool {
        !self.first_less_biased && !self.second_less_biased
    }
}

pub fn compare_bias<O1, O2>(
    agent1: &O1,
    agent2: &O2,
    spec: &BiasSpec,
    u: &Utility,
    acts: &TestActs,
    battery: &[Menu],
    tol: &Q,
) -> Result<BiasComparison>
where
    O1: ChoiceOracle + ?Sized,
    O2: ChoiceOracle + ?Sized,
{
    let first = invert_bias(agent1, spec, u, acts, battery, tol)?;
    let second = invert_bias(agent2, spec, u, acts, battery, tol)?;
    let le = |x: &[Q], y: &[Q]| x.iter().zip(y).all(|(a, b)| a <= b);
    Ok(BiasComparison {
        first_less_biased: le(&first.weights, &second.weights),
        second_less_biased: le(&second.weights, &first.weights),
        first,
        second,
    })
}

/// The first x at which ∫₀^x F > ∫₀^x G, if any.
pub fn sosd_violation(f: &StepCdf, g: &StepCdf) -> Option<Q> {
    let mut xs: Vec<Q> = f.breakpoints.iter().chain(&g.breakpoints).cloned().chain([Q::one()]).collect();
    xs.sort();
    xs.dedup();
    // both integrals are linear between consecutive breakpoints, so the ends suffice
    xs.into_iter().find(|x| f.integral_to(x) > g.integral_to(x))
}

/// F second-order dominates G: ∫₀^x F ≤ ∫₀^x G for every x ∈ [0,1].
pub fn sosd_compare(f: &StepCdf, g: &StepCdf) -> bool {
    sosd_violation(f, g).is_none()
}

/// Agent 1 is more informative than agent 2 on the battery: after checking that both have
/// the same state marginal, every menu's test function of agent 2 SOSD-dominates agent 1's.
pub fn blackwell_compare<O1, O2>(agent1: &O1, agent2: &O2, acts: &TestActs, battery: &[Menu]) -> Result<Verdict>
where
    O1: ChoiceOracle + ?Sized,
    O2: ChoiceOracle + ?Sized,
{
    let probe = Menu::singleton(acts.best.clone());
    let marginal = |rows: Vec<Vec<Q>>| -> Vec<Q> {
        let n = rows[0].len();
        (0..n).map(|s| rows.iter().fold(Q::zero(), |a, r| a + &r[s])).collect()
    };
    let (m1, m2) = (marginal(agent1.choice(&probe)?), marginal(agent2.choice(&probe)?));
    if m1 != m2 {
        return Err(Error::Precondition("agents do not share the state distribution".into()));
    }
    for (k, menu) in battery.iter().enumerate() {
        let f1 = test_function(agent1, menu, acts)?;
        let f2 = test_function(agent2, menu, acts)?;
        if let Some(x) = sosd_violation(&f2, &f1) {
            return Ok(Verdict::fail(
                "BLACKWELL",
                k + 1,
                Witness {
                    relation: format!("∫₀^x A₂ ≤ ∫₀^x A₁ at x = {}", fmt_q(&x)),
                    menu: Some(menu.clone()),
                    lhs: Some(f2.integral_to(&x)),
                    rhs: Some(f1.integral_to(&x)),
                    ..Witness::default()
                },
            ));
        }
    }
    Ok(Verdict::pass("BLACKWELL", battery.len()).with_note("SOSD on probed family"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{garbling_battery, garbling_pair, hire_bias_battery, hire_bias_spec, hire_employer, hire_single, hire_test_acts, random_belief, random_lottery, GARBLE_HIGH, GARBLE_LOW};
    use crate::rational::{q, qi};
    use crate::static_model::TieBreakCascade;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Static oracle without model access, so test functions go through bisection.
    struct Opaque<'a>(&'a RseuModel);

    impl ChoiceOracle for Opaque<'_> {
        fn n_states(&self) -> usize {
            self.0.states().len()
        }

        fn choice(&self, menu: &Menu) -> Result<Vec<Vec<Q>>> {
            self.0.ascf_menu(menu)
        }
    }

    fn lmh() -> Labels {
        Labels::new(vec!["L".into(), "M".into(), "H".into()]).unwrap()
    }

    fn anchors(ns: usize) -> TestActs {
        TestActs { worst: Act::constant(Lottery::prize(0), ns), best: Act::constant(Lottery::prize(2), ns) }
    }

    fn single(belief: Belief, u: Vec<Q>) -> RseuModel {
        let n = belief.len();
        RseuModel::cib(lmh(), Labels::numbered("s", n), vec![SeuPair::new(belief, Utility::over_prizes(u))], vec![qi(1)], vec![TieBreakCascade::coin()]).unwrap()
    }

    #[test]
    fn single_seu_has_one_jump() {
        let m = single(Belief::uniform(1), vec![qi(0), q(3, 5), qi(1)]);
        let menu = Menu::singleton(Act::from_prizes(&[1]));
        let f = test_function(&m, &menu, &anchors(1)).unwrap();
        assert_eq!(f.breakpoints(), &[q(2, 5)]);
        assert_eq!(f.eval(&q(39, 100)), qi(0));
        assert_eq!(f.eval(&q(2, 5)), qi(1));
        assert_eq!(associated_value(&m, &menu, &anchors(1)).unwrap(), q(3, 5));
    }

    #[test]
    fn extreme_menus() {
        let m = single(Belief::uniform(1), vec![qi(0), q(3, 5), qi(1)]);
        let acts = anchors(1);
        let with_best = Menu::new(vec![Act::from_prizes(&[1]), acts.best.clone()]).unwrap();
        let f = test_function(&m, &with_best, &acts).unwrap();
        assert_eq!(f.eval(&qi(0)), qi(1));
        assert_eq!(associated_value(&m, &Menu::singleton(acts.best.clone()), &acts).unwrap(), qi(1));
        let low = Menu::singleton(acts.worst.clone());
        let f = test_function(&m, &low, &acts).unwrap();
        assert_eq!(f.breakpoints(), &[qi(1)]);
        assert_eq!(f.integral(), qi(0));
    }

    #[test]
    fn unverified_anchors_are_rejected() {
        let m = single(Belief::uniform(1), vec![qi(0), q(3, 5), qi(1)]);
        let swapped = TestActs { worst: anchors(1).best, best: anchors(1).worst };
        let r = test_function(&m, &Menu::singleton(Act::from_prizes(&[1])), &swapped);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    fn lu_value(model: &RseuModel, menu: &Menu, acts: &TestActs) -> Q {
        let mut v = Q::zero();
        for (k, seu) in model.support().iter().enumerate() {
            let lo = eval_act(seu, &acts.worst).unwrap();
            let hi = eval_act(seu, &acts.best).unwrap();
            let best = menu.acts().iter().map(|f| eval_act(seu, f).unwrap()).max().unwrap();
            v += model.weight(k) * (best - &lo) / (hi - &lo);
        }
        v
    }

    fn random_menus(rng: &mut ChaCha8Rng, ns: usize, count: usize) -> Vec<Menu> {
        (0..count)
            .map(|_| {
                let acts: Vec<Act> = (0..3).map(|_| Act::new((0..ns).map(|_| random_lottery(rng, 3)).collect()).unwrap()).collect();
                Menu::new(acts).unwrap()
            })
            .collect()
    }

    #[test]
    fn associated_value_matches_belief_average_and_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = Utility::over_prizes(vec![qi(0), q(2, 5), qi(1)]);
        let support = vec![SeuPair::new(random_belief(&mut rng, 2), u.clone()), SeuPair::new(random_belief(&mut rng, 2), u)];
        let m = RseuModel::cib(lmh(), Labels::numbered("s", 2), support, vec![q(1, 3), q(2, 3)], vec![TieBreakCascade::coin(); 2]).unwrap();
        let acts = anchors(2);
        let tol = Q::new(3.into(), num_bigint::BigInt::from(1) << 30);
        for menu in random_menus(&mut rng, 2, 8) {
            let v = associated_value(&m, &menu, &acts).unwrap();
            assert_eq!(v, lu_value(&m, &menu, &acts));
            let sampled = associated_value(&Opaque(&m), &menu, &acts).unwrap();
            assert!((sampled - &v).abs() <= tol);
        }
    }

    #[test]
    fn test_functions_are_monotone_in_the_menu() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let u = Utility::over_prizes(vec![qi(0), q(1, 3), qi(1)]);
        let support: Vec<SeuPair> = (0..3).map(|_| SeuPair::new(random_belief(&mut rng, 3), u.clone())).collect();
        let m = RseuModel::cib(lmh(), Labels::numbered("s", 3), support, vec![q(1, 2), q(1, 4), q(1, 4)], vec![TieBreakCascade::coin(); 3]).unwrap();
        let acts = anchors(3);
        for big in random_menus(&mut rng, 3, 6) {
            let small = Menu::singleton(big.acts()[0].clone());
            let (fb, fs) = (test_function(&m, &big, &acts).unwrap(), test_function(&m, &small, &acts).unwrap());
            for x in fb.breakpoints().iter().chain(fs.breakpoints()) {
                assert!(fb.eval(x) >= fs.eval(x));
            }
        }
    }

    fn hire_spec(weights: Vec<Q>) -> BiasSpec {
        hire_bias_spec().with_weights(weights).unwrap()
    }

    fn hire_u() -> Utility {
        hire_single(q(1, 2)).support()[0].utility.clone()
    }

    #[test]
    fn bias_endpoints() {
        let u = hire_u();
        for menu in hire_bias_battery() {
            let truth = hire_spec(vec![qi(0), qi(0)]);
            let direct: Q = (0..2).map(|w| q(1, 2) * menu.acts().iter().map(|f| eval_act(&SeuPair::new(truth.truth[w].clone(), u.clone()), f).unwrap()).max().unwrap()).sum();
            assert_eq!(biased_value(&truth, &u, &menu).unwrap(), direct);
            let full = hire_spec(vec![qi(1), qi(1)]);
            let direct: Q = (0..2).map(|w| q(1, 2) * menu.acts().iter().map(|f| eval_act(&SeuPair::new(full.direction[w].clone(), u.clone()), f).unwrap()).max().unwrap()).sum();
            assert_eq!(biased_value(&full, &u, &menu).unwrap(), direct);
        }
    }

    #[test]
    fn hire_weights_follow_the_closed_form() {
        for (q1, q2) in [(q(3, 4), q(1, 4)), (q(2, 3), q(2, 5)), (q(1, 2), q(1, 3))] {
            let m = hire_employer(q1.clone(), q2.clone());
            let fit = invert_bias(&m, &hire_spec(vec![qi(0), qi(0)]), &hire_u(), &hire_test_acts(), &hire_bias_battery(), &q(1, 1_000_000_000)).unwrap();
            let want = [qi(2) * &q1 - qi(1), qi(1) - qi(2) * &q2];
            for (got, w) in fit.weights.iter().zip(&want) {
                assert!((got - w).abs() <= q(1, 1_000_000), "{} vs {}", fmt_q(got), fmt_q(w));
            }
        }
    }

    fn three_signal_spec(rng: &mut ChaCha8Rng, weights: Vec<Q>) -> BiasSpec {
        let truth = vec![Belief::new(vec![q(1, 2), q(1, 4), q(1, 4)]).unwrap(), Belief::new(vec![q(1, 5), q(3, 5), q(1, 5)]).unwrap(), Belief::new(vec![q(1, 3), q(1, 3), q(1, 3)]).unwrap()];
        let direction = (0..3).map(|_| random_belief(rng, 3)).collect();
        BiasSpec::new(vec![q(1, 3), q(1, 3), q(1, 3)], truth, direction, weights).unwrap()
    }

    #[test]
    fn planted_weights_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = Utility::over_prizes(vec![qi(0), q(1, 2), qi(1)]);
        let planted = vec![qi(0), q(3, 10), qi(1)];
        let spec = three_signal_spec(&mut rng, planted.clone());
        let agent = spec.model(lmh(), Labels::numbered("s", 3), &u).unwrap();
        let battery = random_menus(&mut rng, 3, 30);
        let fit = invert_bias(&agent, &spec.with_weights(vec![qi(0); 3]).unwrap(), &u, &anchors(3), &battery, &q(1, 1_000_000_000)).unwrap();
        for (a, b) in fit.weights.iter().zip(&planted) {
            assert!((a - b).abs() <= q(1, 1000), "{} vs {}", fmt_q(a), fmt_q(b));
        }
        // V_a(A) forward equals the model's associated value
        for menu in &battery[..5] {
            assert_eq!(biased_value(&spec, &u, menu).unwrap() - eval_act(&SeuPair::new(Belief::uniform(3), u.clone()), &anchors(3).worst).unwrap(), associated_value(&agent, menu, &anchors(3)).unwrap());
        }
    }

    #[test]
    fn bias_comparison_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let u = Utility::over_prizes(vec![qi(0), q(1, 2), qi(1)]);
        let base = three_signal_spec(&mut rng, vec![qi(0); 3]);
        let battery = random_menus(&mut rng, 3, 30);
        let agent = |w: Vec<Q>| base.with_weights(w).unwrap().model(lmh(), Labels::numbered("s", 3), &u).unwrap();
        let tol = q(1, 1_000_000_000);
        let (lo, hi) = (agent(vec![q(1, 5); 3]), agent(vec![q(1, 2); 3]));
        let c = compare_bias(&lo, &hi, &base, &u, &anchors(3), &battery, &tol).unwrap();
        assert!(c.first_less_biased && !c.second_less_biased);
        let c = compare_bias(&lo, &lo, &base, &u, &anchors(3), &battery, &tol).unwrap();
        assert!(c.first_less_biased && c.second_less_biased);
        let (x, y) = (agent(vec![q(1, 10), q(9, 10), q(1, 2)]), agent(vec![q(9, 10), q(1, 10), q(1, 2)]));
        assert!(compare_bias(&x, &y, &base, &u, &anchors(3), &battery, &tol).unwrap().incomparable());
    }

    #[test]
    fn misfit_data_is_reported() {
        // beliefs of 3/4 lie beyond both bias segments
        let u = hire_u();
        let m = hire_employer(q(3, 4), q(1, 4));
        let direction = vec![Belief::new(vec![q(3, 5), q(2, 5)]).unwrap(), Belief::new(vec![q(2, 5), q(3, 5)]).unwrap()];
        let spec = BiasSpec::new(vec![q(1, 2), q(1, 2)], vec![Belief::uniform(2); 2], direction, vec![qi(0), qi(0)]).unwrap();
        let r = invert_bias(&m, &spec, &u, &hire_test_acts(), &hire_bias_battery(), &q(1, 1_000_000_000));
        assert!(matches!(r, Err(Error::ModelMisfit(_))), "{r:?}");
    }

    #[test]
    fn sosd_is_reflexive_and_finds_breakpoint_witness() {
        let f = StepCdf::from_jumps(&[(q(1, 5), qi(1))]).unwrap();
        let g = StepCdf::from_jumps(&[(q(1, 2), qi(1))]).unwrap();
        assert!(sosd_compare(&f, &f));
        assert!(sosd_compare(&g, &f));
        assert_eq!(sosd_violation(&f, &g), Some(q(1, 2)));
    }

    #[test]
    fn garbled_agent_is_less_informative() {
        let (one, two) = garbling_pair();
        let acts = TestActs { worst: Act::from_prizes(&[GARBLE_LOW, GARBLE_LOW]), best: Act::from_prizes(&[GARBLE_HIGH, GARBLE_HIGH]) };
        let battery = garbling_battery();
        assert!(blackwell_compare(&one, &two, &acts, &battery).unwrap().passed());
        let v = blackwell_compare(&two, &one, &acts, &battery).unwrap();
        assert!(!v.passed());
        assert!(v.witness.unwrap().relation.contains("x = 1/2"));
    }

    #[test]
    fn different_state_marginals_block_comparison() {
        let (one, _) = garbling_pair();
        let u = Utility::over_prizes(vec![qi(0), qi(1)]);
        let skewed = RseuModel::cib(one.prizes().clone(), Labels::numbered("s", 2), vec![SeuPair::new(Belief::new(vec![q(1, 3), q(2, 3)]).unwrap(), u)], vec![qi(1)], vec![TieBreakCascade::coin()]).unwrap();
        let acts = TestActs { worst: Act::from_prizes(&[GARBLE_LOW, GARBLE_LOW]), best: Act::from_prizes(&[GARBLE_HIGH, GARBLE_HIGH]) };
        assert!(matches!(blackwell_compare(&one, &skewed, &acts, &garbling_battery()), Err(Error::Precondition(_))));
    }
}
