//! Separating lotteries and menus: every SEU in a family gets an act that it alone ranks first.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::acts::{Act, Lottery, Menu, Outcome, SeuPair, Utility, Valuation};
use crate::error::{Error, Result};
use crate::rational::{dot, max_abs, qi, sqrt_approx, Q};

/// Menu plus the designated act of each input SEU (index into `menu.acts()`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparatingMenu {
    pub menu: Menu,
    pub assignment: Vec<usize>,
    /// min over k ≠ l of V_k(f_k) − V_k(f_l)
    pub margin: Q,
    pub lambda: Q,
    pub halvings: u32,
}

impl SeparatingMenu {
    pub fn designated(&self, k: usize) -> &Act {
        &self.menu.acts()[self.assignment[k]]
    }
}

const MAX_BITS: u32 = 1 << 12;
const MAX_HALVINGS: u32 = 400;

fn outcome_basis(utilities: &[&Utility]) -> Vec<Outcome> {
    let keys: BTreeSet<&Outcome> = utilities.iter().flat_map(|u| u.keys()).collect();
    keys.into_iter().cloned().collect()
}

/// Vectors c_k and approximate unit directions ĉ_k with c_k·ĉ_k > c_k·ĉ_l for all l ≠ k.
fn separated_directions(vectors: &[Vec<Q>]) -> Result<Vec<Vec<Q>>> {
    let mut bits = 16;
    loop {
        let dirs: Vec<Vec<Q>> = vectors
            .iter()
            .map(|c| {
                let r = sqrt_approx(&dot(c, c), bits);
                c.iter().map(|x| x / &r).collect()
            })
            .collect();
        let ok = (0..vectors.len()).all(|k| {
            let own = dot(&vectors[k], &dirs[k]);
            (0..vectors.len()).all(|l| l == k || own > dot(&vectors[k], &dirs[l]))
        });
        if ok {
            return Ok(dirs);
        }
        if bits >= MAX_BITS {
            return Err(Error::Precondition("directions could not be separated (parallel inputs?)".into()));
        }
        bits *= 2;
    }
}

/// p_k = uniform + ε·û_k with û_k the normalized, centred u_k, over the union of listed consequences.
pub fn separating_lotteries(utilities: &[Utility]) -> Result<Vec<Lottery>> {
    let refs: Vec<&Utility> = utilities.iter().collect();
    separating_lotteries_ref(&refs)
}

fn separating_lotteries_ref(utilities: &[&Utility]) -> Result<Vec<Lottery>> {
    if utilities.is_empty() {
        return Ok(Vec::new());
    }
    let basis = outcome_basis(utilities);
    let n = basis.len();
    let vals: Vec<Vec<Q>> = utilities.iter().map(|u| basis.iter().map(|o| u.value(o)).collect()).collect();
    for (k, v) in vals.iter().enumerate() {
        if v.iter().all(|x| *x == v[0]) {
            return Err(Error::Precondition(format!("utility {k} is constant")));
        }
    }
    for k in 0..vals.len() {
        for l in 0..k {
            if crate::acts::affine_related(&vals[l], &vals[k]) {
                return Err(Error::Precondition(format!("utilities {l} and {k} are affinely equivalent")));
            }
        }
    }
    let nq = qi(n as i64);
    let centred: Vec<Vec<Q>> = vals
        .iter()
        .map(|v| {
            let mean = v.iter().fold(Q::zero(), |a, x| a + x) / &nq;
            v.iter().map(|x| x - &mean).collect()
        })
        .collect();
    let dirs = separated_directions(&centred)?;
    let biggest = dirs.iter().map(|d| max_abs(d)).max().expect("non-empty");
    let uniform = Q::one() / &nq;
    let eps = &uniform / (qi(2) * biggest);
    dirs.iter()
        .map(|d| Lottery::new(basis.iter().cloned().zip(d.iter().map(|x| &uniform + &eps * x))))
        .collect()
}

fn value(seu: &SeuPair, f: &Act) -> Q {
    seu.value(f).expect("shapes checked")
}

/// Smallest V_k(f_k) − V_k(f_l) over ordered pairs; `None` for a single SEU.
fn min_gap(seus: &[SeuPair], acts: &[Act]) -> Option<Q> {
    let mut best: Option<Q> = None;
    for (k, seu) in seus.iter().enumerate() {
        let own = value(seu, &acts[k]);
        for (l, g) in acts.iter().enumerate() {
            if l != k {
                let gap = &own - value(seu, g);
                if best.as_ref().is_none_or(|b| gap < *b) {
                    best = Some(gap);
                }
            }
        }
    }
    best
}

/// Menu on which each SEU of the family has a unique designated maximizer.
pub fn separating_menu(seus: &[SeuPair]) -> Result<SeparatingMenu> {
    if seus.is_empty() {
        return Err(Error::Precondition("empty SEU family".into()));
    }
    let n_states = seus[0].belief.len();
    for (k, seu) in seus.iter().enumerate() {
        if seu.belief.len() != n_states {
            return Err(Error::Shape(format!("SEU {k} has a belief over a different state space")));
        }
        if seu.utility.is_constant() {
            return Err(Error::Precondition(format!("SEU {k} has a constant utility")));
        }
        for l in 0..k {
            if seus[l].same_preference(seu) {
                return Err(Error::Precondition(format!("SEUs {l} and {k} represent the same preference")));
            }
        }
    }

    // utility classes, in order of first appearance
    let mut class_of = vec![0usize; seus.len()];
    let mut reps: Vec<usize> = Vec::new();
    for k in 0..seus.len() {
        match reps.iter().position(|&r| seus[r].utility.affine_equivalent(&seus[k].utility)) {
            Some(c) => class_of[k] = c,
            None => {
                class_of[k] = reps.len();
                reps.push(k);
            }
        }
    }

    // Step 1: constant acts separating the classes
    let rep_utils: Vec<&Utility> = reps.iter().map(|&r| &seus[r].utility).collect();
    let lotteries = if reps.len() == 1 {
        vec![uniform_over_keys(rep_utils[0])]
    } else {
        separating_lotteries_ref(&rep_utils)?
    };
    let h: Vec<Act> = lotteries.into_iter().map(|p| Act::constant(p, n_states)).collect();

    // Step 2: within a class, separate beliefs with best/worst bets
    let mut f: Vec<Act> = vec![h[0].clone(); seus.len()];
    for (c, &r) in reps.iter().enumerate() {
        let members: Vec<usize> = (0..seus.len()).filter(|&k| class_of[k] == c).collect();
        if members.len() == 1 {
            f[members[0]] = h[c].clone();
            continue;
        }
        let u = &seus[r].utility;
        let (best, worst) = extremes(u);
        let beliefs: Vec<Vec<Q>> = members.iter().map(|&k| seus[k].belief.probs().to_vec()).collect();
        let dirs = separated_directions(&beliefs)?;
        let biggest = dirs.iter().map(|d| max_abs(d)).max().expect("non-empty");
        let half = Q::new(1.into(), 2.into());
        let eps = &half / biggest;
        for (i, &k) in members.iter().enumerate() {
            let rows = dirs[i]
                .iter()
                .map(|d| {
                    let x = &half + &eps * d;
                    Lottery::new([(best.clone(), x.clone()), (worst.clone(), Q::one() - x)])
                })
                .collect::<Result<Vec<_>>>()?;
            f[k] = Act::new(rows)?;
        }
    }

    // Step 3: shrink toward the class constants until every strict inequality holds
    let mut lambda = if reps.len() == 1 { Q::one() } else { Q::new(1.into(), 2.into()) };
    let mut halvings = 0;
    loop {
        let acts: Vec<Act> = (0..seus.len()).map(|k| f[k].mix(&lambda, &h[class_of[k]])).collect::<Result<_>>()?;
        let gap = min_gap(seus, &acts);
        if gap.as_ref().is_none_or(|g| g.is_positive()) {
            let menu = Menu::new(acts.clone())?;
            let assignment = acts.iter().map(|a| menu.index_of(a).expect("member")).collect();
            return Ok(SeparatingMenu { menu, assignment, margin: gap.unwrap_or_else(Q::one), lambda, halvings });
        }
        if halvings >= MAX_HALVINGS {
            return Err(Error::Precondition("mixture search did not terminate".into()));
        }
        lambda /= qi(2);
        halvings += 1;
    }
}

fn uniform_over_keys(u: &Utility) -> Lottery {
    let keys: Vec<&Outcome> = u.keys().collect();
    let p = Q::one() / qi(keys.len() as i64);
    Lottery::new(keys.into_iter().map(|o| (o.clone(), p.clone()))).expect("uniform")
}

/// Best and worst listed consequences of a non-constant utility.
fn extremes(u: &Utility) -> (Outcome, Outcome) {
    let mut best: Option<(&Outcome, &Q)> = None;
    let mut worst: Option<(&Outcome, &Q)> = None;
    for (o, v) in u.entries() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((o, v));
        }
        if worst.is_none_or(|(_, w)| v < w) {
            worst = Some((o, v));
        }
    }
    (best.expect("listed").0.clone(), worst.expect("listed").0.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::Belief;
    use crate::rational::q;

    #[test]
    fn two_prize_lotteries() {
        let u1 = Utility::over_prizes(vec![qi(1), qi(0)]);
        let u2 = Utility::over_prizes(vec![qi(0), qi(1)]);
        let p = separating_lotteries(&[u1.clone(), u2.clone()]).unwrap();
        let z1 = Outcome::Prize(0);
        assert!(p[0].prob(&z1) > q(1, 2));
        assert!(p[1].prob(&Outcome::Prize(1)) > q(1, 2));
        assert!(u1.of_lottery(&p[0]) > u1.of_lottery(&p[1]));
        assert!(u2.of_lottery(&p[1]) > u2.of_lottery(&p[0]));
    }

    #[test]
    fn equivalent_utilities_are_rejected() {
        let u1 = Utility::over_prizes(vec![qi(1), qi(0), qi(3)]);
        let u2 = u1.affine(&qi(2), &qi(5));
        assert!(matches!(separating_lotteries(&[u1, u2]), Err(Error::Precondition(_))));
        let c = Utility::over_prizes(vec![qi(1), qi(1)]);
        assert!(matches!(separating_lotteries(&[c]), Err(Error::Precondition(_))));
    }

    #[test]
    fn opposite_beliefs_same_taste() {
        let u = Utility::over_prizes(vec![qi(1), qi(0)]);
        let a = SeuPair::new(Belief::point(2, 0), u.clone());
        let b = SeuPair::new(Belief::point(2, 1), u);
        let sep = separating_menu(&[a.clone(), b.clone()]).unwrap();
        assert!(sep.margin.is_positive());
        assert!(a.value(sep.designated(0)).unwrap() > a.value(sep.designated(1)).unwrap());
        assert!(b.value(sep.designated(1)).unwrap() > b.value(sep.designated(0)).unwrap());
    }

    #[test]
    fn different_tastes_give_constant_acts() {
        let a = SeuPair::new(Belief::uniform(2), Utility::over_prizes(vec![qi(1), qi(0)]));
        let b = SeuPair::new(Belief::uniform(2), Utility::over_prizes(vec![qi(0), qi(1)]));
        let sep = separating_menu(&[a, b]).unwrap();
        assert_eq!(sep.menu.len(), 2);
        assert!(sep.menu.all_constant());
    }

    #[test]
    fn affine_but_not_proportional_beliefs() {
        // (3/5,2/5) = ½(7/10,3/10) + ¼ as affine functions of the state
        let u = Utility::over_prizes(vec![qi(1), qi(0)]);
        let a = SeuPair::new(Belief::new(vec![q(3, 5), q(2, 5)]).unwrap(), u.clone());
        let b = SeuPair::new(Belief::new(vec![q(7, 10), q(3, 10)]).unwrap(), u);
        let sep = separating_menu(&[a, b]).unwrap();
        assert!(sep.margin.is_positive());
    }

    #[test]
    fn duplicate_preference_is_rejected() {
        let u = Utility::over_prizes(vec![qi(1), qi(0)]);
        let a = SeuPair::new(Belief::uniform(2), u.clone());
        let b = SeuPair::new(Belief::uniform(2), u.affine(&qi(3), &qi(1)));
        assert!(matches!(separating_menu(&[a, b]), Err(Error::Precondition(_))));
    }
}
