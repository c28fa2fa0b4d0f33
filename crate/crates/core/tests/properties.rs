use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drseu_core::acts::{argmax_set, bar_menu, eval_act, extreme_members, Menu, SeuPair, Utility};
use drseu_core::axioms::{check_cib, check_nuc, ProbeBattery};
use drseu_core::comparative::{sosd_compare, StepCdf};
use drseu_core::dynamic::{simulate_paths, History};
use drseu_core::fixtures::{self, DynShape, ModelShape};
use drseu_core::identify::{revealed_support, CandidateUniverse};
use drseu_core::io::{parse_document, render_document, AnyModel, Format, ModelSpecFile};
use drseu_core::preferences::{check_bellman, dlr_value, DlrMeasure};
use drseu_core::rational::{q, qi, Q};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// λ ∈ (0, 1) with small denominators.
fn lambda() -> impl Strategy<Value = Q> {
    (2i64..12).prop_flat_map(|d| (1..d).prop_map(move |n| q(n, d)))
}

/// δ ∈ (0, 1).
fn discount() -> impl Strategy<Value = Q> {
    lambda()
}

fn dims(r: &mut ChaCha8Rng) -> (usize, usize) {
    (r.gen_range(1..=3), r.gen_range(2..=4))
}

/// Nondecreasing step cdf on [0, 1] with up to four jumps.
fn step_cdf() -> impl Strategy<Value = StepCdf> {
    prop::collection::vec((0i64..=20, 1i64..=5), 1..5).prop_map(|jumps| {
        let total: i64 = jumps.iter().map(|j| j.1).sum();
        let jumps: Vec<(Q, Q)> = jumps.into_iter().map(|(a, w)| (q(a, 20), q(w, total))).collect();
        StepCdf::from_jumps(&jumps).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn eval_act_is_affine_in_mixtures(seed in any::<u64>(), l in lambda()) {
        let mut r = rng(seed);
        let (ns, np) = dims(&mut r);
        let seu = fixtures::random_seu(&mut r, ns, np);
        let f = fixtures::random_act(&mut r, ns, np);
        let g = fixtures::random_act(&mut r, ns, np);
        let mixed = eval_act(&seu, &f.mix(&l, &g).unwrap()).unwrap();
        let split = &l * eval_act(&seu, &f).unwrap() + (qi(1) - &l) * eval_act(&seu, &g).unwrap();
        prop_assert_eq!(mixed, split);
    }

    #[test]
    fn maximizers_commute_with_mixing(seed in any::<u64>(), l in lambda()) {
        let mut r = rng(seed);
        let (ns, np) = dims(&mut r);
        let seu = fixtures::random_seu(&mut r, ns, np);
        let size = r.gen_range(1..=4);
        let a = fixtures::random_menu(&mut r, ns, np, size);
        let g = fixtures::random_act(&mut r, ns, np);
        let mixed = a.mix_act(&l, &g).unwrap();
        let mut lhs: Vec<_> = argmax_set(&mixed, &seu).unwrap().into_iter().map(|i| mixed.acts()[i].clone()).collect();
        let mut rhs: Vec<_> = argmax_set(&a, &seu).unwrap().into_iter().map(|i| a.acts()[i].mix(&l, &g).unwrap()).collect();
        lhs.sort();
        rhs.sort();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn maximizers_ignore_affine_rescaling(seed in any::<u64>(), alpha in 1i64..9, beta in -5i64..5) {
        let mut r = rng(seed);
        let (ns, np) = dims(&mut r);
        let seu = fixtures::random_seu(&mut r, ns, np);
        let scaled = SeuPair::new(seu.belief.clone(), seu.utility.affine(&q(alpha, 3), &qi(beta)));
        let a = fixtures::random_menu(&mut r, ns, np, 4);
        prop_assert_eq!(argmax_set(&a, &seu).unwrap(), argmax_set(&a, &scaled).unwrap());
    }

    #[test]
    fn extreme_members_and_bar_menu_are_stable(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ns, np) = dims(&mut r);
        let a = fixtures::random_menu(&mut r, ns, np, 5);
        let ext = extreme_members(&a);
        prop_assert!(!ext.is_empty() && ext.iter().all(|&i| i < a.len()));
        let trimmed = a.subset(&ext).unwrap();
        prop_assert_eq!(extreme_members(&trimmed).len(), trimmed.len());
        let bar = bar_menu(&a);
        prop_assert_eq!(bar_menu(&bar), bar);
    }

    #[test]
    fn ascf_is_a_distribution_with_a_menu_free_marginal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = fixtures::random_model(&mut r, ModelShape::default());
        let (ns, np) = (m.states().len(), m.prizes().len());
        let marginal = m.state_marginal();
        for size in 1..=4 {
            let menu = fixtures::random_menu(&mut r, ns, np, size);
            let rows = m.ascf_menu(&menu).unwrap();
            let total: Q = rows.iter().flatten().sum();
            prop_assert!(total.is_one());
            for s in 0..ns {
                let col: Q = rows.iter().map(|row| &row[s]).sum();
                prop_assert_eq!(&col, &marginal[s]);
            }
        }
    }

    #[test]
    fn cib_implies_nuc(seed in any::<u64>(), cib in any::<bool>()) {
        let mut r = rng(seed);
        let m = fixtures::random_model(&mut r, ModelShape { max_support: 4, cib, ..Default::default() });
        let pool = fixtures::random_pool(&mut r, m.states().len(), m.prizes().len(), 3);
        let battery = ProbeBattery::from_pool(&pool).unwrap();
        if check_cib(&m, m.support(), &battery).unwrap().passed() {
            prop_assert!(check_nuc(&m, m.support(), &battery).unwrap().passed());
        }
    }

    #[test]
    fn revealed_support_grows_with_the_universe(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = fixtures::random_model(&mut r, ModelShape { max_support: 3, ..Default::default() });
        let (ns, np) = (m.states().len(), m.prizes().len());
        let extra = fixtures::random_seu(&mut r, ns, np);
        let small = CandidateUniverse::covering(&m, &[]).unwrap();
        let big = CandidateUniverse::covering(&m, &[extra]).unwrap();
        let before: Vec<&SeuPair> = revealed_support(&m, &small).unwrap().into_iter().map(|i| &small.seus()[i]).collect();
        let after: Vec<&SeuPair> = revealed_support(&m, &big).unwrap().into_iter().map(|i| &big.seus()[i]).collect();
        prop_assert!(before.iter().all(|s| after.contains(s)));
    }

    #[test]
    fn conditional_choice_sums_to_one_and_chains(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = fixtures::random_dynamic_model(&mut r, DynShape::default());
        let root = fixtures::random_dynamic_menu(&mut r, &m.dims(), 0, 3);
        let counts = simulate_paths(&m, &root, 1, seed).unwrap();
        let (path, _) = counts.paths.iter().next().unwrap();
        let mut prob = qi(1);
        for k in 0..path.len() {
            let h = counts.history(&path[..k]);
            prop_assert_eq!(m.history_prob(&h).unwrap(), prob.clone());
            let (mid, a, s) = path[k];
            let rows = m.conditional_menu(&h, &counts.menus[mid]).unwrap();
            let total: Q = rows.iter().flatten().sum();
            prop_assert!(total.is_one());
            prob *= &rows[a][s];
        }
        prop_assert_eq!(m.history_prob(&counts.history(path)).unwrap(), prob);
        prop_assert!(m.history_prob(&History::empty()).unwrap().is_one());
    }

    #[test]
    fn dlr_value_is_monotone_and_mixture_linear(seed in any::<u64>(), l in lambda()) {
        let mut r = rng(seed);
        let m = fixtures::random_model(&mut r, ModelShape { max_support: 4, ..Default::default() });
        let measure = DlrMeasure::from_model(&m).unwrap();
        let (ns, np) = (m.states().len(), m.prizes().len());
        let a = fixtures::random_menu(&mut r, ns, np, 3);
        let b = fixtures::random_menu(&mut r, ns, np, 2);
        let g = fixtures::random_act(&mut r, ns, np);
        let va = dlr_value(&measure, &a).unwrap();
        prop_assert!(dlr_value(&measure, &a.with_act(g).unwrap()).unwrap() >= va);
        let vb = dlr_value(&measure, &b).unwrap();
        let mixed = dlr_value(&measure, &a.mix(&l, &b).unwrap()).unwrap();
        prop_assert_eq!(mixed, &l * va + (qi(1) - &l) * vb);
    }

    #[test]
    fn sosd_is_a_preorder(f in step_cdf(), g in step_cdf(), h in step_cdf()) {
        prop_assert!(sosd_compare(&f, &f));
        if sosd_compare(&f, &g) && sosd_compare(&g, &h) {
            prop_assert!(sosd_compare(&f, &h));
        }
        if sosd_compare(&f, &g) && sosd_compare(&g, &f) {
            // integrated cdfs agree, so the cdfs agree almost everywhere
            for k in 0..=40 {
                let x = q(k, 40);
                prop_assert_eq!(f.integral_to(&x), g.integral_to(&x));
            }
        }
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>(), toml in any::<bool>()) {
        let mut r = rng(seed);
        let m = if r.gen_bool(0.5) {
            AnyModel::Static(fixtures::random_model(&mut r, ModelShape::default()))
        } else {
            AnyModel::Dynamic(fixtures::random_dynamic_model(&mut r, DynShape::default()))
        };
        let format = if toml { Format::Toml } else { Format::Json };
        let text = render_document(&ModelSpecFile::from_model(&m), format).unwrap();
        let back = parse_document::<ModelSpecFile>(&text, format).unwrap().build().unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn bellman_build_is_a_fixed_point(seed in any::<u64>(), delta in discount()) {
        let mut r = rng(seed);
        let m = fixtures::random_evolving(&mut r, delta.clone());
        let (v, fit) = check_bellman(&m, &Q::zero()).unwrap();
        prop_assert!(v.passed());
        prop_assert!(fit.residual.is_zero());
        prop_assert_eq!(fit.delta, delta);
    }
}

#[test]
fn identical_menus_have_identical_values() {
    let m = fixtures::wsd_model();
    let measure = DlrMeasure::from_model(&m).unwrap();
    let (f, g) = fixtures::wsd_acts();
    let a = Menu::new(vec![f.clone(), g.clone()]).unwrap();
    let b = Menu::new(vec![g, f]).unwrap();
    assert_eq!(dlr_value(&measure, &a).unwrap(), dlr_value(&measure, &b).unwrap());
    let _ = Utility::over_prizes(vec![qi(0), qi(1)]);
}
