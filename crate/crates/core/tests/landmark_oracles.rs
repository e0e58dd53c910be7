use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use raf_core::landmarks::*;

mod common;

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    loop {
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
            .collect();
        // Keep the spread comfortably two-dimensional.
        let area = |a: Point, b: Point, c: Point| ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
        if area(pts[0], pts[1], pts[2]) > 200.0 {
            return pts;
        }
    }
}

fn random_transform(rng: &mut ChaCha8Rng) -> AffineTransform {
    loop {
        let t = AffineTransform {
            a11: rng.gen_range(-2.0..2.0),
            a12: rng.gen_range(-2.0..2.0),
            a21: rng.gen_range(-2.0..2.0),
            a22: rng.gen_range(-2.0..2.0),
            tx: rng.gen_range(-100.0..100.0),
            ty: rng.gen_range(-100.0..100.0),
        };
        if t.determinant().abs() > 0.2 {
            return t;
        }
    }
}

fn five(pts: &[Point]) -> FivePointSet {
    FivePointSet::new([pts[0], pts[1], pts[2], pts[3], pts[4]]).unwrap()
}

#[test]
fn exact_affine_pairs_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let src = random_points(&mut rng, 5);
        let truth = random_transform(&mut rng);
        let dst = apply_affine(&truth, &src);
        let t = estimate_affine(&five(&src), &five(&dst)).unwrap();
        for (s, d) in src.iter().zip(&dst) {
            let p = t.apply(*s);
            assert!((p.x - d.x).abs() <= 1e-8 && (p.y - d.y).abs() <= 1e-8);
        }
    }
}

/// Rotation 30°, scale 1.5, translation (2, 7) with Gaussian noise σ = 0.01.
/// The estimate must be within 0.05 of the generators and no point of the
/// ±0.1 parameter grid (5 steps per axis) around the truth may beat it.
#[test]
fn noisy_fit_beats_every_grid_perturbation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let (sin, cos) = 30f64.to_radians().sin_cos();
    let truth = AffineTransform {
        a11: 1.5 * cos,
        a12: 1.5 * sin,
        a21: -1.5 * sin,
        a22: 1.5 * cos,
        tx: 2.0,
        ty: 7.0,
    };
    let steps = [-0.1, -0.05, 0.0, 0.05, 0.1];
    for _ in 0..100 {
        let src = random_points(&mut rng, 5);
        let dst: Vec<Point> = apply_affine(&truth, &src)
            .into_iter()
            .map(|p| Point::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
            .collect();
        let t = estimate_affine(&five(&src), &five(&dst)).unwrap();
        for (a, b) in t.to_array().iter().zip(truth.to_array()) {
            assert!((a - b).abs() < 0.05);
        }
        let fitted = t.residual(&src, &dst);
        let base = truth.to_array();
        let mut grid_min = f64::INFINITY;
        for idx in 0..5usize.pow(6) {
            let mut params = base;
            let mut k = idx;
            for p in params.iter_mut() {
                *p += steps[k % 5];
                k /= 5;
            }
            grid_min = grid_min.min(AffineTransform::from_array(params).residual(&src, &dst));
        }
        assert!(fitted <= grid_min, "fit {fitted} vs grid {grid_min}");
    }
}

#[test]
fn inverse_composes_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let t = random_transform(&mut rng);
        let inv = invert_affine(&t).unwrap();
        for composed in [t.then(&inv), inv.then(&t)] {
            for (a, b) in composed.to_array().iter().zip(AffineTransform::IDENTITY.to_array()) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
        let pts = random_points(&mut rng, 4);
        let back = apply_affine(&inv, &apply_affine(&t, &pts));
        for (p, q) in pts.iter().zip(&back) {
            assert!(p.distance(*q) <= 1e-6);
        }
    }
}

#[test]
fn frontal_fixture_reference_points_match_file_lines() {
    let face = common::fixture_faces().remove(0);
    let text = face.landmarks.to_sidecar_string();
    let lines: Vec<&str> = text.lines().collect();
    let parsed = parse_landmarks(&text).unwrap();
    let five = reference_points(&parsed).unwrap();
    for (slot, line_index) in [36usize, 45, 33, 48, 54].iter().enumerate() {
        let mut it = lines[*line_index].split(' ').map(|t| t.parse::<f64>().unwrap());
        let expected = Point::new(it.next().unwrap(), it.next().unwrap());
        assert_eq!(five.points()[slot], expected);
    }
}

#[test]
fn to_reference_round_trips_fixture_faces() {
    let reference = ReferenceSpace::canonical();
    for face in common::fixture_faces() {
        let (lm_ref, t) = to_reference(&face.landmarks, &reference).unwrap();
        let back = apply_affine_landmarks(&t, &lm_ref);
        for (a, b) in back.points().iter().zip(face.landmarks.points()) {
            assert!(a.distance(*b) <= 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn sidecar_serialization_is_canonical(coords in prop::collection::vec(
        (prop::num::f64::NORMAL | prop::num::f64::ZERO, -1e4f64..1e4), 68)) {
        let pts: Vec<Point> = coords.iter().map(|(x, y)| Point::new(*x, *y)).collect();
        let lm = LandmarkSet::new(pts).unwrap();
        let text = lm.to_sidecar_string();
        let parsed = parse_landmarks(&text).unwrap();
        prop_assert_eq!(&parsed, &lm);
        prop_assert_eq!(parsed.to_sidecar_string(), text);
    }
}
