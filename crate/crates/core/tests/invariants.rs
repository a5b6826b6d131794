//! Property tests of the graphical construction and the quotient map.

use contact_qsd::field::EventField;
use contact_qsd::lattice::{Configuration, Site};
use contact_qsd::qsd::{yaglom_counts, McConfig, StartLaw};
use contact_qsd::SpaceTimePoint;
use proptest::prelude::*;

const HORIZON: f64 = 4.0;

fn sites_1d() -> impl Strategy<Value = Configuration> {
    prop::collection::vec(-6i32..=6, 1..6).prop_map(|xs| Configuration::new(1, xs.into_iter().map(Site::d1)).unwrap())
}

fn sites_2d() -> impl Strategy<Value = Configuration> {
    prop::collection::vec((-3i32..=3, -3i32..=3), 1..5)
        .prop_map(|xs| Configuration::new(2, xs.into_iter().map(|(x, y)| Site::d2(x, y))).unwrap())
}

fn three_times() -> impl Strategy<Value = (f64, f64, f64)> {
    prop::array::uniform3(0.0..HORIZON).prop_map(|mut t| {
        t.sort_by(f64::total_cmp);
        (t[0], t[1], t[2])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn additive(seed: u64, lambda in 0.2f64..2.5, a in sites_1d(), b in sites_1d(), (s, _, u) in three_times()) {
        let f = EventField::poisson(seed, 1, lambda, HORIZON).unwrap();
        prop_assert_eq!(f.evolve(&a.union(&b), s, u), f.evolve(&a, s, u).union(&f.evolve(&b, s, u)));
    }

    #[test]
    fn monotone(seed: u64, lambda in 0.2f64..2.5, a in sites_2d(), b in sites_2d(), (s, _, u) in three_times()) {
        let f = EventField::poisson(seed, 2, lambda, HORIZON).unwrap();
        prop_assert!(f.evolve(&a, s, u).is_subset(&f.evolve(&a.union(&b), s, u)));
    }

    #[test]
    fn semigroup(seed: u64, lambda in 0.2f64..2.5, a in sites_1d(), (s, t, u) in three_times()) {
        let f = EventField::poisson(seed, 1, lambda, HORIZON).unwrap();
        prop_assert_eq!(f.evolve(&f.evolve(&a, s, t), t, u), f.evolve(&a, s, u));
    }

    #[test]
    fn reachability_matches_forward_and_dual(
        seed: u64,
        lambda in 0.2f64..2.5,
        x in -3i32..=3,
        y in -6i32..=6,
        (s, _, u) in three_times(),
    ) {
        let f = EventField::poisson(seed, 1, lambda, HORIZON).unwrap();
        let (x, y) = (Site::d1(x), Site::d1(y));
        let forward = f.evolve(&Configuration::new(1, [x]).unwrap(), s, u).contains(&y);
        let backward = f.backward_set(&Configuration::new(1, [y]).unwrap(), u, s).contains(&x);
        prop_assert_eq!(f.reaches(SpaceTimePoint::new(x, s), SpaceTimePoint::new(y, u)), forward);
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn canonical_form_ignores_translation(a in sites_2d(), dx in -20i32..20, dy in -20i32..20) {
        let shifted = a.translate(&Site::d2(dx, dy));
        let c = a.canonicalize().alive().unwrap();
        prop_assert_eq!(&c, &shifted.canonicalize().alive().unwrap());
        prop_assert_eq!(c.sites()[0], Site::origin(2));
        prop_assert_eq!(c.diameter(), a.diameter().unwrap());
    }
}

#[test]
fn yaglom_counts_do_not_depend_on_worker_count() {
    let start = StartLaw::fixed(&"0;2".parse().unwrap());
    let one = yaglom_counts(&start, 3.0, &McConfig::new(1.2, 5000, 77)).unwrap();
    for w in [2, 3, 8] {
        assert_eq!(one, yaglom_counts(&start, 3.0, &McConfig::new(1.2, 5000, 77).with_workers(w)).unwrap());
    }
}
