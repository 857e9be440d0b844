mod support;

use std::f64::consts::PI;

use circdet_core::geometry::{
    box_iou, circle_intersection_area, circle_to_bbox, ciou, BoxAA, Circle, Transform,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{chord_form_area, mc_ciou, naive_box_iou, random_pair};

const FRAME: f64 = 4096.0;

#[test]
fn unit_lens_against_closed_form() {
    let (a, b) = (Circle::new(0.0, 0.0, 1.0), Circle::new(1.0, 0.0, 1.0));
    let (r, d) = (1.0f64, 1.0f64);
    let lens = 2.0 * r * r * (d / (2.0 * r)).acos() - d / 2.0 * (4.0 * r * r - d * d).sqrt();
    let got = circle_intersection_area(&a, &b).unwrap();
    assert!((got - lens).abs() < 1e-14);
    assert!((got - 1.22837).abs() < 1e-5);
    let (mc, union) = mc_ciou(&a, &b, 3200, 11);
    assert!((ciou(&a, &b).unwrap() - mc).abs() < 1e-4, "{mc} {union}");
}

#[test]
fn monte_carlo_agreement_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..200 {
        let (a, b) = random_pair(&mut rng);
        let exact = ciou(&a, &b).unwrap();
        let (mc, _) = mc_ciou(&a, &b, 300, k);
        assert!((exact - mc).abs() <= 1e-3 * 3.0, "{a:?} {b:?}: {exact} vs {mc}");
    }
}

#[test]
fn chord_form_cross_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for _ in 0..5000 {
        let (a, b) = random_pair(&mut rng);
        if let Some(expect) = chord_form_area(&a, &b) {
            let got = circle_intersection_area(&a, &b).unwrap();
            assert!((got - expect).abs() <= 1e-9 * expect.max(1e-300), "{a:?} {b:?} {got} {expect}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn monotone_in_distance() {
    for &(ra, rb) in &[(1.0, 1.0), (5.0, 2.0), (30.0, 31.5), (100.0, 1.0)] {
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let d = i as f64 * (ra + rb) * 1.2 / 2000.0;
            let v = ciou(&Circle::new(0.0, 0.0, ra), &Circle::new(d, 0.0, rb)).unwrap();
            assert!(v <= prev, "r=({ra},{rb}) d={d}");
            prev = v;
        }
        assert_eq!(prev, 0.0);
    }
}

#[test]
fn boundary_cases() {
    assert_eq!(ciou(&Circle::new(0.0, 0.0, 2.0), &Circle::new(0.0, 0.0, 1.0)).unwrap(), 0.25);
    assert_eq!(ciou(&Circle::new(0.0, 0.0, 1.0), &Circle::new(2.0, 0.0, 1.0)).unwrap(), 0.0);
    // internally tangent: containment value
    assert_eq!(ciou(&Circle::new(0.0, 0.0, 2.0), &Circle::new(1.0, 0.0, 1.0)).unwrap(), 0.25);
    assert!(ciou(&Circle::new(0.0, 0.0, 0.0), &Circle::new(0.0, 0.0, 0.0)).is_err());
    assert_eq!(ciou(&Circle::new(0.0, 0.0, 0.0), &Circle::new(0.0, 0.0, 1.0)).unwrap(), 0.0);
}

#[test]
fn box_iou_against_corner_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    use rand::Rng;
    for _ in 0..2000 {
        let mut b = || {
            BoxAA::new(
                rng.random_range(0.0..50.0),
                rng.random_range(0.0..50.0),
                rng.random_range(0.5..30.0),
                rng.random_range(0.5..30.0),
            )
        };
        let (x, y) = (b(), b());
        assert!((box_iou(&x, &y) - naive_box_iou(&x, &y)).abs() < 1e-12);
    }
}

fn dyadic() -> impl Strategy<Value = f64> {
    (0u32..(1 << 20)).prop_map(|v| v as f64 / 256.0)
}

fn circle() -> impl Strategy<Value = Circle> {
    (dyadic(), dyadic(), 256u32..25600).prop_map(|(x, y, r)| Circle::new(x, y, r as f64 / 256.0))
}

proptest! {
    #[test]
    fn symmetric_and_bounded(a in circle(), b in circle()) {
        let ab = ciou(&a, &b).unwrap();
        prop_assert_eq!(ab.to_bits(), ciou(&b, &a).unwrap().to_bits());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
        prop_assert_eq!(ciou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn containment_ratio(cx in -50.0..50.0f64, cy in -50.0..50.0f64, ra in 1.0..100.0f64, frac in 0.05..0.95f64, t in 0.0..1.0f64) {
        let rb = ra * frac;
        let d = (ra - rb) * t;
        let a = Circle::new(cx, cy, ra);
        let b = Circle::new(cx + d, cy, rb);
        let expect = (rb / ra) * (rb / ra);
        prop_assert!((ciou(&a, &b).unwrap() - expect).abs() <= 1e-15);
    }

    #[test]
    fn quarter_turns_preserve_overlap((a, b) in (circle(), circle()), turns in 0u32..4) {
        let ra = a.rotate90(FRAME, FRAME, turns);
        let rb = b.rotate90(FRAME, FRAME, turns);
        prop_assert_eq!(ciou(&ra, &rb).unwrap(), ciou(&a, &b).unwrap());
        let (ba, bb) = (circle_to_bbox(&a), circle_to_bbox(&b));
        prop_assert_eq!(
            box_iou(&ba.rotate90(FRAME, FRAME, turns), &bb.rotate90(FRAME, FRAME, turns)),
            box_iou(&ba, &bb)
        );
        prop_assert_eq!(ra.unrotate90(FRAME, FRAME, turns), a);
    }

    #[test]
    fn scale_invariant(a in circle(), b in circle(), s in 0.01..100.0f64) {
        let base = ciou(&a, &b).unwrap();
        let scaled = ciou(&a.scaled(s), &b.scaled(s)).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-12 * base, "{} vs {}", base, scaled);
    }

    #[test]
    fn shift_round_trip(x in -100.0..100.0f64, y in -100.0..100.0f64, d in 0.0..100.0f64, th in 0.0..(2.0 * PI)) {
        let b = BoxAA::new(x, y, 3.0, 4.0);
        let back = b.shift(d, th).shift(d, th + PI);
        prop_assert!((back.x - b.x).abs() < 1e-12 && (back.y - b.y).abs() < 1e-12);
    }
}
