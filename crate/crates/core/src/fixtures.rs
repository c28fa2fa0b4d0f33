//! Random generators and the worked-example models (HIRE, WSD) shared by tests, the
//! acceptance suite and the `demo` subcommand.

use std::sync::Arc;

use num_traits::Zero;
use rand::Rng;

use crate::acts::{Act, Belief, Labels, Lottery, Menu, Outcome, SeuPair, Utility};
use crate::comparative::{BiasSpec, TestActs};
use crate::dynamic::{Dims, DynamicModel, ModelClass, Node, Taste};
use crate::rational::{q, qi, Q};
use crate::preferences::{bellman_build, gl_build, EvolvingPrimitives, GlPrimitives};
use crate::static_model::{ModelFlags, RseuModel, Stage, TieBreakCascade};

/// Rational with numerator in ±10^9 over 10^6: ties between distinct draws are vanishingly rare.
pub fn generic_value(rng: &mut impl Rng) -> Q {
    q(rng.gen_range(-1_000_000_000i64..=1_000_000_000), 1_000_000)
}

/// Non-constant utility over `n_prizes` prizes with generic values.
pub fn random_utility(rng: &mut impl Rng, n_prizes: usize) -> Utility {
    loop {
        let v: Vec<Q> = (0..n_prizes).map(|_| generic_value(rng)).collect();
        let u = Utility::over_prizes(v);
        if !u.is_constant() {
            return u;
        }
    }
}

/// Probability vector with positive integer weights drawn from 1..=max_w.
fn random_weights(rng: &mut impl Rng, n: usize, max_w: i64) -> Vec<Q> {
    let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=max_w)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

/// Full-support belief.
pub fn random_belief(rng: &mut impl Rng, n_states: usize) -> Belief {
    Belief::new(random_weights(rng, n_states, 1000)).expect("simplex")
}

pub fn random_seu(rng: &mut impl Rng, n_states: usize, n_prizes: usize) -> SeuPair {
    SeuPair::new(random_belief(rng, n_states), random_utility(rng, n_prizes))
}

/// Lottery over prizes with small denominators (some prizes may get 0).
pub fn random_lottery(rng: &mut impl Rng, n_prizes: usize) -> Lottery {
    loop {
        let w: Vec<i64> = (0..n_prizes).map(|_| rng.gen_range(0..=4)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return Lottery::over_prizes(&w.iter().map(|&x| q(x, total)).collect::<Vec<_>>()).expect("valid");
        }
    }
}

pub fn random_act(rng: &mut impl Rng, n_states: usize, n_prizes: usize) -> Act {
    Act::new((0..n_states).map(|_| random_lottery(rng, n_prizes)).collect()).expect("rows")
}

/// Pool of distinct random acts.
pub fn random_pool(rng: &mut impl Rng, n_states: usize, n_prizes: usize, size: usize) -> Vec<Act> {
    let mut pool: Vec<Act> = Vec::with_capacity(size);
    while pool.len() < size {
        let a = random_act(rng, n_states, n_prizes);
        if !pool.contains(&a) {
            pool.push(a);
        }
    }
    pool
}

pub fn random_menu(rng: &mut impl Rng, n_states: usize, n_prizes: usize, size: usize) -> Menu {
    Menu::new(random_pool(rng, n_states, n_prizes, size)).expect("non-empty")
}

#[derive(Clone, Copy, Debug)]
pub struct ModelShape {
    pub max_states: usize,
    pub max_prizes: usize,
    pub max_support: usize,
    pub cib: bool,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape { max_states: 4, max_prizes: 5, max_support: 6, cib: false }
    }
}

/// `k` pairwise distinct SEU preferences with generic utilities and full-support beliefs.
pub fn random_family(rng: &mut impl Rng, k: usize, n_states: usize, n_prizes: usize) -> Vec<SeuPair> {
    let mut out: Vec<SeuPair> = Vec::with_capacity(k);
    while out.len() < k {
        let s = random_seu(rng, n_states, n_prizes);
        if out.iter().all(|o| !o.same_preference(&s)) {
            out.push(s);
        }
    }
    out
}

/// Random cascade: an unbiased coin, or one or two auxiliary SEUs.
pub fn random_cascade(rng: &mut impl Rng, n_states: usize, n_prizes: usize) -> TieBreakCascade {
    match rng.gen_range(0..3) {
        0 => TieBreakCascade::coin(),
        1 => TieBreakCascade::single(random_seu(rng, n_states, n_prizes)),
        _ => {
            let w = q(rng.gen_range(1..=9), 10);
            let rest = qi(1) - &w;
            TieBreakCascade {
                stages: vec![
                    Stage { weight: w, aux: random_seu(rng, n_states, n_prizes) },
                    Stage { weight: rest, aux: random_seu(rng, n_states, n_prizes) },
                ],
            }
        }
    }
}

pub fn random_model(rng: &mut impl Rng, shape: ModelShape) -> RseuModel {
    let n_states = rng.gen_range(1..=shape.max_states.max(1));
    let n_prizes = rng.gen_range(2..=shape.max_prizes.max(2));
    let mut k = rng.gen_range(1..=shape.max_support.max(1));
    if n_states == 1 && n_prizes == 2 {
        // only "prefers z0" and "prefers z1" exist
        k = k.min(2);
    }
    let support = random_family(rng, k, n_states, n_prizes);
    let cascades = (0..k).map(|_| random_cascade(rng, n_states, n_prizes)).collect();
    let prizes = Labels::numbered("z", n_prizes);
    let states = Labels::numbered("s", n_states);
    if shape.cib {
        let nu = random_weights(rng, k, 100);
        RseuModel::cib(prizes, states, support, nu, cascades).expect("valid random model")
    } else {
        let flat = random_weights(rng, k * n_states, 100);
        let joint = flat.chunks(n_states).map(|c| c.to_vec()).collect();
        RseuModel::new(prizes, states, support, joint, cascades, ModelFlags { cib: false, nuc: true })
            .expect("valid random model")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DynShape {
    pub horizon: usize,
    /// cap on |Θ_t| at every period
    pub max_nodes: usize,
    pub max_states: usize,
    pub max_prizes: usize,
}

impl Default for DynShape {
    fn default() -> Self {
        DynShape { horizon: 2, max_nodes: 4, max_states: 3, max_prizes: 3 }
    }
}

/// Random DR-SEU tree with prize tastes, full-support beliefs and coin tie-breaking.
pub fn random_dynamic_model(rng: &mut impl Rng, shape: DynShape) -> DynamicModel {
    loop {
        if let Some(m) = try_dynamic_model(rng, shape) {
            return m;
        }
    }
}

fn try_dynamic_model(rng: &mut impl Rng, shape: DynShape) -> Option<DynamicModel> {
    let n_prizes = rng.gen_range(2..=shape.max_prizes.max(2));
    let n_states: Vec<usize> = (0..=shape.horizon).map(|_| rng.gen_range(1..=shape.max_states.max(1))).collect();
    let mut levels: Vec<Vec<Node>> = Vec::with_capacity(n_states.len());
    let mut prev = 0usize;
    for (t, &ns) in n_states.iter().enumerate() {
        let lo = prev.max(1);
        let n = rng.gen_range(lo..=shape.max_nodes.max(lo));
        let mut parents: Vec<Option<usize>> = if t == 0 {
            vec![None; n]
        } else {
            let mut p: Vec<Option<usize>> = (0..prev).map(Some).collect();
            p.extend((prev..n).map(|_| Some(rng.gen_range(0..prev))));
            p
        };
        parents.sort();
        let mut nodes: Vec<Node> = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            let end = (start..n).find(|&j| parents[j] != parents[start]).unwrap_or(n);
            let probs = random_weights(rng, end - start, 100);
            for p in probs {
                let mut tries = 0;
                let node = loop {
                    let belief = random_belief(rng, ns);
                    let state = rng.gen_range(0..ns);
                    let values = random_utility(rng, n_prizes).prize_vector(n_prizes);
                    let clash = nodes[start..].iter().any(|o| {
                        o.state == state && o.belief == belief && matches!(&o.taste, Taste::Prize { values: v } if crate::acts::affine_related(v, &values))
                    });
                    if !clash {
                        break Node { parent: parents[start], belief, taste: Taste::Prize { values }, state, prob: p.clone(), cascade: TieBreakCascade::coin() };
                    }
                    tries += 1;
                    if tries > 20 {
                        return None;
                    }
                };
                nodes.push(node);
            }
            start = end;
        }
        levels.push(nodes);
        prev = n;
    }
    Some(
        DynamicModel::new(
            Labels::numbered("z", n_prizes),
            n_states.iter().map(|&n| Labels::numbered("s", n)).collect(),
            levels,
            None,
            ModelClass::Drseu,
            ModelFlags::default(),
        )
        .expect("valid random dynamic model"),
    )
}

/// Random period-t menu; every act pays lotteries over (prize, next menu) pairs drawn
/// from a small pool of random period-(t+1) menus.
pub fn random_dynamic_menu(rng: &mut impl Rng, dims: &Dims, t: usize, n_acts: usize) -> Menu {
    let ns = dims.n_states[t];
    if t == dims.horizon() {
        return random_menu(rng, ns, dims.n_prizes, n_acts);
    }
    let pool: Vec<Arc<Menu>> = (0..2).map(|_| Arc::new(random_dynamic_menu(rng, dims, t + 1, n_acts))).collect();
    let mut acts: Vec<Act> = Vec::with_capacity(n_acts);
    while acts.len() < n_acts {
        let rows = (0..ns)
            .map(|_| {
                let a = Outcome::Cont(rng.gen_range(0..dims.n_prizes), pool[rng.gen_range(0..pool.len())].clone());
                let b = Outcome::Cont(rng.gen_range(0..dims.n_prizes), pool[rng.gen_range(0..pool.len())].clone());
                let w = q(rng.gen_range(0..=4), 4);
                Lottery::new([(a, w.clone()), (b, qi(1) - w)]).expect("valid")
            })
            .collect();
        let f = Act::new(rows).expect("rows");
        if !acts.contains(&f) {
            acts.push(f);
        }
    }
    Menu::new(acts).expect("non-empty")
}

/// HIRE prizes: G (good task outcome), B (bad outcome), N (not hired).
pub const HIRE_G: usize = 0;
pub const HIRE_B: usize = 1;
pub const HIRE_N: usize = 2;

/// Hire pays G in state g and B in state b; not hiring pays N in both.
pub fn hire_acts() -> (Act, Act) {
    (Act::from_prizes(&[HIRE_G, HIRE_B]), Act::from_prizes(&[HIRE_N, HIRE_N]))
}

pub fn hire_menu() -> Menu {
    let (h, nh) = hire_acts();
    Menu::new(vec![h, nh]).expect("two acts")
}

/// Stochastic hiring taste: (g, b) payoffs with weights.
pub fn hire_tastes(prefers: bool) -> Vec<((Q, Q), Q)> {
    let bump = if prefers { q(1, 4) } else { Q::zero() };
    vec![
        ((qi(1) + &bump, qi(-1) + &bump), q(1, 3)),
        ((qi(1) + &bump, qi(-2) + &bump), q(1, 3)),
        ((qi(2) + &bump, qi(-1) + &bump), q(1, 3)),
    ]
}

/// One candidate type: belief q̂ = P(g), tastes as above, true outcome distribution (1/2, 1/2).
pub fn hire_model(q_hat: Q, tastes: &[((Q, Q), Q)]) -> RseuModel {
    let belief = Belief::new(vec![q_hat.clone(), qi(1) - q_hat]).expect("belief");
    let support: Vec<SeuPair> = tastes
        .iter()
        .map(|((g, b), _)| SeuPair::new(belief.clone(), Utility::over_prizes(vec![g.clone(), b.clone(), Q::zero()])))
        .collect();
    let joint = tastes.iter().map(|(_, w)| vec![w / qi(2), w / qi(2)]).collect();
    RseuModel::new(
        Labels::new(vec!["G".into(), "B".into(), "N".into()]).expect("labels"),
        Labels::new(vec!["g".into(), "b".into()]).expect("labels"),
        support,
        joint,
        vec![TieBreakCascade::coin(); tastes.len()],
        ModelFlags::default(),
    )
    .expect("valid HIRE model")
}

/// Single-taste HIRE model (u = (1, −1, 0)) with true outcome distribution (1/2, 1/2).
pub fn hire_single(q_hat: Q) -> RseuModel {
    hire_model(q_hat, &[((qi(1), qi(-1)), qi(1))])
}

/// The employer facing both characteristics: belief q̂₁ after s₀′ and q̂₂ after s₀″, each
/// characteristic with probability 1/2 and fair task outcomes.
pub fn hire_employer(q1: Q, q2: Q) -> RseuModel {
    let u = || Utility::over_prizes(vec![qi(1), qi(-1), Q::zero()]);
    let b = |p: Q| Belief::new(vec![p.clone(), qi(1) - p]).expect("belief");
    RseuModel::new(
        Labels::new(vec!["G".into(), "B".into(), "N".into()]).expect("labels"),
        Labels::new(vec!["g".into(), "b".into()]).expect("labels"),
        vec![SeuPair::new(b(q1), u()), SeuPair::new(b(q2), u())],
        vec![vec![q(1, 4), q(1, 4)]; 2],
        vec![TieBreakCascade::coin(); 2],
        ModelFlags::default(),
    )
    .expect("valid employer model")
}

/// Fair truth after both characteristics, bias directions (1,0) and (0,1), zero weights.
pub fn hire_bias_spec() -> BiasSpec {
    let half = Belief::uniform(2);
    BiasSpec::new(vec![q(1, 2), q(1, 2)], vec![half.clone(), half], vec![Belief::point(2, 0), Belief::point(2, 1)], vec![Q::zero(), Q::zero()]).expect("spec")
}

/// hire, the reverse bet and not hiring, in the menus used for inversion.
pub fn hire_bias_battery() -> Vec<Menu> {
    let (hire, nh) = hire_acts();
    let against = Act::from_prizes(&[HIRE_B, HIRE_G]);
    vec![
        Menu::new(vec![hire.clone(), nh.clone()]).expect("menu"),
        Menu::new(vec![against.clone(), nh]).expect("menu"),
        Menu::singleton(hire.clone()),
        Menu::singleton(against.clone()),
        Menu::new(vec![hire, against]).expect("menu"),
    ]
}

/// B for sure and G for sure.
pub fn hire_test_acts() -> TestActs {
    TestActs { worst: Act::from_prizes(&[HIRE_B, HIRE_B]), best: Act::from_prizes(&[HIRE_G, HIRE_G]) }
}

/// WSD prizes: a, b, c, d and a common best prize.
pub const WSD_TOP: usize = 4;

pub fn wsd_utilities() -> (Utility, Utility) {
    let h = q(1, 2);
    let z = Q::zero();
    (
        Utility::over_prizes(vec![h.clone(), h.clone(), z.clone(), z.clone(), qi(1)]),
        Utility::over_prizes(vec![z.clone(), z, h.clone(), h, qi(1)]),
    )
}

/// f = (δa, δb), g = (δc, δd).
pub fn wsd_acts() -> (Act, Act) {
    (Act::from_prizes(&[0, 1]), Act::from_prizes(&[2, 3]))
}

/// Common belief: P(s2) = 1/3.
pub fn wsd_belief() -> Belief {
    Belief::new(vec![q(2, 3), q(1, 3)]).expect("belief")
}

/// Weights μ1 = 2/3 on u1 and μ2 = 1/3 on u2.
pub fn wsd_weights() -> (Q, Q) {
    (q(2, 3), q(1, 3))
}

/// The WSD measure as a static CIB model.
pub fn wsd_model() -> RseuModel {
    let (u1, u2) = wsd_utilities();
    let b = wsd_belief();
    let (m1, m2) = wsd_weights();
    RseuModel::cib(
        Labels::new(["a", "b", "c", "d", "top"].iter().map(|s| s.to_string()).collect()).expect("labels"),
        Labels::numbered("s", 2),
        vec![SeuPair::new(b.clone(), u1), SeuPair::new(b, u2)],
        vec![m1, m2],
        vec![TieBreakCascade::coin(); 2],
    )
    .expect("valid WSD model")
}

/// Garbling prizes: low and high.
pub const GARBLE_LOW: usize = 0;
pub const GARBLE_HIGH: usize = 1;

/// Two CIB agents over two states with u = (0, 1): agent 1 holds beliefs P(s1) ∈ {1/5, 4/5}
/// with equal weight, agent 2 always holds P(s1) = 1/2.
pub fn garbling_pair() -> (RseuModel, RseuModel) {
    let prizes = || Labels::new(vec!["L".into(), "H".into()]).expect("labels");
    let u = Utility::over_prizes(vec![qi(0), qi(1)]);
    let b = |x: i64| Belief::new(vec![q(x, 5), q(5 - x, 5)]).expect("belief");
    let one = RseuModel::cib(
        prizes(),
        Labels::numbered("s", 2),
        vec![SeuPair::new(b(1), u.clone()), SeuPair::new(b(4), u.clone())],
        vec![q(1, 2), q(1, 2)],
        vec![TieBreakCascade::coin(); 2],
    )
    .expect("valid garbling agent");
    let two = RseuModel::cib(prizes(), Labels::numbered("s", 2), vec![SeuPair::new(Belief::uniform(2), u)], vec![qi(1)], vec![TieBreakCascade::coin()])
        .expect("valid garbling agent");
    (one, two)
}

/// Bets on each state, a sure half-half lottery, and their combinations.
pub fn garbling_battery() -> Vec<Menu> {
    let bet1 = Act::from_prizes(&[GARBLE_HIGH, GARBLE_LOW]);
    let bet2 = Act::from_prizes(&[GARBLE_LOW, GARBLE_HIGH]);
    let safe = Act::constant(Lottery::uniform_prizes(2), 2);
    let tilt = bet1.mix(&q(3, 4), &bet2).expect("same states");
    let m = |acts: Vec<&Act>| Menu::new(acts.into_iter().cloned().collect()).expect("non-empty");
    vec![
        m(vec![&bet1, &bet2]),
        m(vec![&bet1]),
        m(vec![&bet2]),
        m(vec![&bet1, &safe]),
        m(vec![&bet2, &safe]),
        m(vec![&tilt, &safe]),
        m(vec![&bet1, &bet2, &safe]),
    ]
}

/// θ-tree with uniform beliefs and distinct placeholder prize tastes; each level lists
/// (parent, realized state, kernel probability).
pub fn tree_skeleton(nz: usize, levels: &[&[(Option<usize>, usize, Q)]]) -> DynamicModel {
    let mut k = 0i64;
    let nodes: Vec<Vec<Node>> = levels
        .iter()
        .map(|lv| {
            let ns = lv.iter().map(|n| n.1).max().expect("valid skeleton") + 1;
            lv.iter()
                .map(|(p, s, w)| {
                    k += 1;
                    let mut v = vec![qi(0); nz];
                    v[1] = qi(1);
                    v[nz - 1] += qi(k + 1);
                    Node { parent: *p, belief: Belief::uniform(ns), taste: Taste::Prize { values: v }, state: *s, prob: w.clone(), cascade: TieBreakCascade::coin() }
                })
                .collect()
        })
        .collect();
    let states = nodes.iter().map(|lv| Labels::numbered("s", lv.iter().map(|n| n.state).max().expect("valid skeleton") + 1)).collect();
    DynamicModel::new(Labels::numbered("z", nz), states, nodes, None, ModelClass::Drseu, ModelFlags::default()).expect("valid skeleton")
}


/// T = 2 GL model with two terminal tastes over three prizes.
pub fn gl_fixture(delta: Q) -> DynamicModel {
    let sk = tree_skeleton(3, &[&[(None, 0, qi(1))], &[(Some(0), 0, q(2, 3)), (Some(0), 1, q(1, 3))], &[(Some(0), 0, qi(1)), (Some(1), 0, qi(1))]]);
    let terminal = vec![vec![qi(3), qi(1), qi(0)], vec![qi(0), qi(1), qi(3)]];
    bellman_build(&gl_build(&GlPrimitives { skeleton: sk, terminal, delta }).expect("valid GL model")).expect("valid GL model")
}


/// T = 2. Agent 1 shares one terminal taste everywhere; agent 2's level-1 branches differ
/// but each branch's children agree.
pub fn learners() -> (DynamicModel, DynamicModel) {
    let sk = tree_skeleton(
        3,
        &[
            &[(None, 0, qi(1))],
            &[(Some(0), 0, q(1, 2)), (Some(0), 1, q(1, 2))],
            &[(Some(0), 0, q(1, 2)), (Some(0), 1, q(1, 2)), (Some(1), 0, q(1, 2)), (Some(1), 1, q(1, 2))],
        ],
    );
    let a = vec![qi(3), qi(1), qi(0)];
    let b = vec![qi(0), qi(1), qi(3)];
    let build = |terminal: Vec<Vec<Q>>| bellman_build(&gl_build(&GlPrimitives { skeleton: sk.clone(), terminal, delta: q(1, 2) }).expect("valid GL model")).expect("valid GL model");
    (build(vec![a.clone(); 4]), build(vec![a.clone(), a, b.clone(), b]))
}


/// Evolving model with generic felicities on a random tree; redraws until the Bellman
/// build succeeds.
pub fn random_evolving(rng: &mut impl Rng, delta: Q) -> DynamicModel {
    loop {
        let sk = random_dynamic_model(rng, DynShape::default());
        let nz = sk.prizes().len();
        let fel = sk.levels().iter().map(|lv| lv.iter().map(|_| (0..nz).map(|_| generic_value(rng)).collect()).collect()).collect();
        let p = EvolvingPrimitives::new(sk, fel, delta.clone()).expect("valid primitives");
        if let Ok(m) = bellman_build(&p) {
            return m;
        }
    }
}

/// GL primitives with generic terminal tastes on a random tree.
pub fn random_gl(rng: &mut impl Rng, delta: Q) -> (GlPrimitives, EvolvingPrimitives) {
    let sk = random_dynamic_model(rng, DynShape::default());
    let nz = sk.prizes().len();
    let terminal = sk.levels()[sk.horizon()].iter().map(|_| (0..nz).map(|_| generic_value(rng)).collect()).collect();
    let p = GlPrimitives { skeleton: sk, terminal, delta };
    let e = gl_build(&p).expect("valid GL primitives");
    (p, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_models_are_valid_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m1 = random_model(&mut a, ModelShape::default());
            let m2 = random_model(&mut b, ModelShape::default());
            assert_eq!(m1, m2);
        }
    }

    #[test]
    fn random_dynamic_models_respect_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let m = random_dynamic_model(&mut rng, DynShape::default());
            assert_eq!(m.horizon(), 2);
            assert!(m.levels().iter().all(|l| !l.is_empty() && l.len() <= 4));
            let menu = random_dynamic_menu(&mut rng, &m.dims(), 0, 3);
            assert_eq!(m.conditional_menu(&crate::dynamic::History::empty(), &menu).unwrap().iter().flatten().fold(Q::zero(), |a, x| a + x), qi(1));
        }
    }

    #[test]
    fn hire_unbiased_vs_biased() {
        let tastes = hire_tastes(false);
        let menu = hire_menu();
        let (h, _) = hire_acts();
        let hire_rate = |m: &RseuModel| (0..2).map(|s| m.ascf(&h, &menu, s).unwrap()).fold(Q::zero(), |a, x| a + x);
        let fair = hire_rate(&hire_model(q(1, 2), &tastes));
        assert_eq!(fair, q(1, 2));
        let hi = hire_rate(&hire_model(q(3, 4), &tastes));
        let lo = hire_rate(&hire_model(q(1, 4), &tastes));
        assert!(hi > lo);
    }
}
