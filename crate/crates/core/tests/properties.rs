use bvlift::curves::{variation_measure, Interval, IntervalKind, pointwise_variation, StepCurve};
use bvlift::space::{first_moment, line_space, DiscreteMeasure, MetricSpace};
use bvlift::transport::{w1, w1_distance, w1_line_oracle};
use proptest::prelude::*;

fn measure(n: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(0u32..=12, n)
        .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| DiscreteMeasure::from_masses(w.into_iter().map(f64::from).collect()).unwrap())
}

fn line(n: usize) -> impl Strategy<Value = MetricSpace> {
    prop::collection::btree_set(0u32..400, n).prop_map(|s| {
        let xs: Vec<f64> = s.into_iter().map(|x| x as f64 / 4.0).collect();
        line_space(&xs).unwrap()
    })
}

fn plane(n: usize) -> impl Strategy<Value = MetricSpace> {
    prop::collection::btree_set((0u32..100, 0u32..100), n).prop_map(|s| {
        let coords: Vec<Vec<f64>> = s.into_iter().map(|(x, y)| vec![x as f64, y as f64]).collect();
        MetricSpace::from_coords((0..coords.len()).map(|i| i.to_string()).collect(), coords).unwrap()
    })
}

fn line_instance() -> impl Strategy<Value = (MetricSpace, DiscreteMeasure, DiscreteMeasure)> {
    (2usize..=12).prop_flat_map(|n| (line(n), measure(n), measure(n)))
}

fn plane_triple() -> impl Strategy<Value = (MetricSpace, DiscreteMeasure, DiscreteMeasure, DiscreteMeasure)> {
    (2usize..=8).prop_flat_map(|n| (plane(n), measure(n), measure(n), measure(n)))
}

fn step_curve(n: usize) -> impl Strategy<Value = StepCurve> {
    (0..n, prop::collection::vec((1u32..=1000, 0..n), 0..8)).prop_map(|(x0, mut steps)| {
        steps.sort();
        StepCurve::normalize(x0, steps.into_iter().map(|(t, x)| (t as f64 / 1000.0, x))).unwrap()
    })
}

proptest! {
    #[test]
    fn w1_agrees_with_line_oracle((space, mu, nu) in line_instance()) {
        let t = w1(&space, &mu, &nu).unwrap();
        let oracle = w1_line_oracle(&space, &mu, &nu).unwrap();
        prop_assert!((t.distance - oracle).abs() <= 1e-8);
        prop_assert!((t.distance - t.certificate.value(&mu, &nu)).abs() <= 1e-9);
        prop_assert!(t.certificate.lipschitz_excess(&space) <= 1e-9);
    }

    #[test]
    fn w1_is_a_metric((space, a, b, c) in plane_triple()) {
        let ab = w1_distance(&space, &a, &b).unwrap();
        let ba = w1_distance(&space, &b, &a).unwrap();
        let bc = w1_distance(&space, &b, &c).unwrap();
        let ac = w1_distance(&space, &a, &c).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(w1_distance(&space, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn first_moment_is_one_lipschitz((space, a, b, _c) in plane_triple(), base in 0usize..8) {
        let base = base % space.len();
        let gap = (first_moment(&space, &a, base).unwrap() - first_moment(&space, &b, base).unwrap()).abs();
        prop_assert!(gap <= w1_distance(&space, &a, &b).unwrap() + 1e-9);
    }

    #[test]
    fn variation_is_additive(curve in step_curve(4), s in 1u32..1000) {
        let space = line_space(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        let s = s as f64 / 1000.0;
        let whole = pointwise_variation(&curve, &space, Interval::open(0.0, 1.0).unwrap());
        let left = pointwise_variation(&curve, &space, Interval::open_closed(0.0, s).unwrap());
        let right = pointwise_variation(&curve, &space, Interval::new(s, 1.0, IntervalKind::ClosedOpen).unwrap());
        prop_assert!((whole - left - right).abs() <= 1e-12);
        let vm = variation_measure(&curve, &space);
        let split = vm.mass(Interval::open_closed(0.0, s).unwrap()) + vm.mass(Interval::open_closed(s, 1.0).unwrap());
        prop_assert!((vm.mass(Interval::open_closed(0.0, 1.0).unwrap()) - split).abs() <= 1e-12);
    }

    #[test]
    fn normalisation_is_idempotent(curve in step_curve(5)) {
        let again = StepCurve::normalize(curve.initial(), curve.jumps().map(|(t, _, y)| (t, y))).unwrap();
        prop_assert_eq!(&again, &curve);
        let json = serde_json::to_string(&curve).unwrap();
        prop_assert_eq!(serde_json::from_str::<StepCurve>(&json).unwrap(), curve);
    }
}
