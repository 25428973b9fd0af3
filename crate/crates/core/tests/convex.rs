use bvdual::convex::grid_legendre;
use bvdual::gen::{random_plq, Family};
use bvdual::{Interval, Plq};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FAMILIES: [Family; 6] = [
    Family::General,
    Family::Quadratic,
    Family::Finite,
    Family::Indicator,
    Family::ZeroPoint,
    Family::Abs,
];

fn plq(seed: u64, family: usize) -> Plq {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_plq(&mut rng, FAMILIES[family], 0.0, 2.0)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Sample points inside, on the boundary of and around the domain.
fn probes(f: &Plq) -> Vec<f64> {
    let d = f.domain();
    let mut xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.125).collect();
    xs.extend(f.breakpoints());
    xs.extend([d.lo, d.hi].iter().filter(|x| x.is_finite()));
    xs
}

fn support(i: Interval, x: f64) -> f64 {
    if x > 0.0 {
        if i.hi.is_finite() { x * i.hi } else { f64::INFINITY }
    } else if x < 0.0 {
        if i.lo.is_finite() { x * i.lo } else { f64::INFINITY }
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn biconjugate_is_the_function(seed in any::<u64>(), family in 0..6usize) {
        let f = plq(seed, family);
        let ff = f.conjugate().unwrap().conjugate().unwrap();
        for x in probes(&f) {
            prop_assert!(close(f.eval(x), ff.eval(x), 1e-9), "x={x}: {} vs {}", f.eval(x), ff.eval(x));
        }
    }

    #[test]
    fn recession_is_support_of_conjugate_domain(seed in any::<u64>(), family in 0..6usize) {
        let f = plq(seed, family);
        let dom = f.conjugate().unwrap().domain();
        let rec = f.recession();
        for x in [-3.0, -1.0, -1e-3, 0.0, 1e-3, 1.0, 3.0] {
            prop_assert!(close(rec.eval(x), support(dom, x), 1e-9), "x={x}");
        }
    }

    #[test]
    fn zero_gap_iff_subgradient(seed in any::<u64>(), family in 0..6usize) {
        let f = plq(seed, family);
        for x in probes(&f).into_iter().filter(|&x| f.in_domain(x)) {
            let sub = f.subdifferential(x);
            if let Some(y) = sub.representative() {
                prop_assert!(f.fenchel_gap(x, y).unwrap().abs() <= 1e-9, "x={x} y={y}");
            }
            for y in [-2.5, -0.5, 0.0, 0.7, 2.5] {
                let gap = f.fenchel_gap(x, y).unwrap();
                prop_assert!(gap >= -1e-9);
                if !sub.contains(y, 0.0) && sub.distance(y) > 1e-6 {
                    prop_assert!(gap > 1e-12, "x={x} y={y} {sub:?}");
                }
            }
        }
    }

    #[test]
    fn conjugate_dominates_sampled_legendre(seed in any::<u64>(), family in 0..6usize) {
        let f = plq(seed, family);
        let dom = f.domain();
        let lo = dom.lo.max(-6.0);
        let hi = dom.hi.min(6.0);
        prop_assume!(hi > lo);
        let samples: Vec<(f64, f64)> = (0..=2000).map(|i| {
            let x = lo + (hi - lo) * i as f64 / 2000.0;
            (x, f.eval(x))
        }).collect();
        let qs = [-1.0, -0.25, 0.0, 0.5, 1.5];
        let lower = grid_legendre(&samples, &qs).unwrap();
        let fs = f.conjugate().unwrap();
        for (q, l) in qs.iter().zip(lower) {
            prop_assert!(fs.eval(*q) >= l - 1e-9 * (1.0 + l.abs()));
        }
    }
}

#[test]
fn quadratic_conjugate_closed_form() {
    let f = Plq::quadratic(2.0, 1.0, -3.0).unwrap();
    let g = f.conjugate().unwrap();
    for y in [-2.0, 0.0, 0.5, 4.0] {
        let want = (y - 1.0f64).powi(2) / 8.0 + 3.0;
        assert!((g.eval(y) - want).abs() < 1e-12);
    }
}

#[test]
fn indicator_and_abs_are_conjugate() {
    let abs = Plq::abs();
    let ind = abs.conjugate().unwrap();
    assert_eq!(ind.domain(), Interval::new(-1.0, 1.0));
    assert_eq!(ind.eval(0.3), 0.0);
    assert_eq!(ind.eval(1.5), f64::INFINITY);
    assert_eq!(abs.recession().eval(-2.0), 2.0);
}
