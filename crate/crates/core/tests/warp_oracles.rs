use raf_core::landmarks::{LandmarkSet, Point, ReferenceSpace, LANDMARK_COUNT};
use raf_core::warp::*;

mod common;
use common::{changed_pixels, fixture_faces, inside_triangle};

/// Hull vertex count including collinear boundary points (monotone chain).
fn hull_size(points: &[Point]) -> usize {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let build = |iter: &mut dyn Iterator<Item = Point>| {
        let mut chain: Vec<Point> = Vec::new();
        for p in iter {
            while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) < 0.0 {
                chain.pop();
            }
            chain.push(p);
        }
        chain.pop();
        chain
    };
    let lower = build(&mut pts.clone().into_iter());
    let upper = build(&mut pts.into_iter().rev());
    lower.len() + upper.len()
}

#[test]
fn mesh_satisfies_euler_bound_and_covers_every_pixel() {
    for face in fixture_faces() {
        let (w, h) = (face.image.width(), face.image.height());
        let mesh = build_warp_mesh(&face.landmarks, &face.landmarks, w, h).unwrap();
        let n = mesh.dst_points().len();
        assert_eq!(n, 76);
        let hull = hull_size(mesh.dst_points());
        assert!(mesh.triangle_count() <= 2 * n - 2 - hull, "{} triangles, hull {hull}", mesh.triangle_count());
        let pts = mesh.dst_points();
        for y in 0..h {
            for x in 0..w {
                let p = Point::new(x as f64, y as f64);
                let covered = mesh
                    .triangles()
                    .iter()
                    .any(|t| inside_triangle(p, pts[t[0]], pts[t[1]], pts[t[2]]));
                assert!(covered, "pixel ({x}, {y}) not covered");
            }
        }
    }
}

#[test]
fn identity_mesh_reproduces_input_exactly() {
    for face in fixture_faces() {
        let mesh = build_warp_mesh(&face.landmarks, &face.landmarks, 128, 128).unwrap();
        assert_eq!(warp_image(&face.image, &mesh).unwrap(), face.image);
    }
}

#[test]
fn translated_triangle_shifts_gradient_exactly() {
    let face = fixture_faces().remove(0);
    let (w, h) = (128u32, 128u32);
    let gradient = Image::from_fn(w, h, 1, |x, _, _| x as f64 / (w - 1) as f64).unwrap();
    let src_mesh = build_warp_mesh(&face.landmarks, &face.landmarks, w, h).unwrap();

    let mut checked = false;
    for tri in src_mesh.triangles().iter().filter(|t| t.iter().all(|&i| i < LANDMARK_COUNT)) {
        let mut pts = *face.landmarks.points();
        for &i in tri {
            pts[i] = pts[i] + Point::new(3.0, 0.0);
        }
        let dst = LandmarkSet::from_array(pts).unwrap();
        let mesh = build_warp_mesh(&face.landmarks, &dst, w, h).unwrap();
        let mut sorted = *tri;
        sorted.sort_unstable();
        let present = mesh.triangles().iter().any(|t| {
            let mut s = *t;
            s.sort_unstable();
            s == sorted
        });
        // Source x must stay inside the image so clamping does not interfere.
        let min_x = tri.iter().map(|&i| pts[i].x).fold(f64::INFINITY, f64::min);
        if !present || min_x < 6.0 {
            continue;
        }
        let out = warp_image(&gradient, &mesh).unwrap();
        let [a, b, c] = tri.map(|i| pts[i]);
        let affected: Vec<[usize; 3]> = mesh
            .triangles()
            .iter()
            .copied()
            .filter(|t| t.iter().any(|v| tri.contains(v)))
            .collect();
        let dp = mesh.dst_points();
        let mut inside_count = 0;
        for y in 0..h {
            for x in 0..w {
                let p = Point::new(x as f64, y as f64);
                if inside_triangle(p, a, b, c) {
                    inside_count += 1;
                    let expect = (x as f64 - 3.0) / (w - 1) as f64;
                    assert!((out.get(x, y, 0) - expect).abs() < 1e-12, "({x}, {y})");
                } else if !affected.iter().any(|t| inside_triangle(p, dp[t[0]], dp[t[1]], dp[t[2]])) {
                    assert_eq!(out.get(x, y, 0), gradient.get(x, y, 0), "({x}, {y}) outside");
                }
            }
        }
        if inside_count >= 5 {
            checked = true;
            break;
        }
    }
    assert!(checked, "no suitable interior triangle found");
}

#[test]
fn constant_image_stays_constant() {
    let face = fixture_faces().remove(1);
    let gray = Image::filled(128, 128, 3, 0.42).unwrap();
    let (out, _) = warp_face(
        &gray,
        &face.landmarks,
        WarpSpec::new(WarpFunction::Chubbify, 0.3).unwrap(),
        &ReferenceSpace::canonical(),
    )
    .unwrap();
    assert!(out.samples().iter().all(|v| (v - 0.42).abs() < 1e-15));
}

#[test]
fn zero_scale_is_byte_identical_for_every_function() {
    let r = ReferenceSpace::canonical();
    for face in fixture_faces() {
        for wf in WarpFunction::ALL {
            let (img, lm) = warp_face(&face.image, &face.landmarks, WarpSpec::new(wf, 0.0).unwrap(), &r).unwrap();
            assert_eq!(img.encode_png().unwrap(), face.image.encode_png().unwrap());
            assert_eq!(img, face.image);
            for (a, b) in lm.points().iter().zip(face.landmarks.points()) {
                assert!(a.distance(*b) <= 1e-6);
            }
        }
    }
}

#[test]
fn changes_stay_near_driven_landmarks() {
    let r = ReferenceSpace::canonical();
    for face in fixture_faces() {
        for wf in WarpFunction::ALL {
            for scale in [0.1, 0.2, 0.3] {
                let (img, dst) = warp_face(&face.image, &face.landmarks, WarpSpec::new(wf, scale).unwrap(), &r).unwrap();
                assert!(img.samples().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
                let mesh = build_warp_mesh(&face.landmarks, &dst, 128, 128).unwrap();
                let region = mesh.one_ring(&mesh.incident_triangles(wf.driven_indices()));
                let dp = mesh.dst_points();
                let changed = changed_pixels(&face.image, &img);
                assert!(!changed.is_empty(), "{wf} at {scale} changed nothing");
                for (x, y) in changed {
                    let p = Point::new(x as f64, y as f64);
                    let ok = region.iter().any(|&t| {
                        let t = mesh.triangles()[t];
                        inside_triangle(p, dp[t[0]], dp[t[1]], dp[t[2]])
                    });
                    assert!(ok, "{wf} at {scale}: pixel ({x}, {y}) changed outside region");
                }
            }
        }
    }
}

#[test]
fn successive_warps_are_deterministic() {
    let r = ReferenceSpace::canonical();
    let face = fixture_faces().remove(0);
    let run = || {
        let (a, lm) = warp_face(&face.image, &face.landmarks, WarpSpec::new(WarpFunction::StretchNose, 0.1).unwrap(), &r).unwrap();
        warp_face(&a, &lm, WarpSpec::new(WarpFunction::Smile, 0.1).unwrap(), &r).unwrap()
    };
    let (first, lm1) = run();
    let (second, lm2) = run();
    assert_eq!(first.encode_png().unwrap(), second.encode_png().unwrap());
    assert_eq!(first, second);
    assert_eq!(lm1, lm2);
    assert_ne!(first, face.image);
}

#[test]
fn landmarks_outside_frame_are_reported() {
    let face = fixture_faces().remove(0);
    let mut pts = *face.landmarks.points();
    pts[0] = Point::new(-0.5 * 128.0, 0.0);
    let dst = LandmarkSet::from_array(pts).unwrap();
    assert!(matches!(
        build_warp_mesh(&face.landmarks, &dst, 128, 128),
        Err(WarpError::OutOfFrame { index: 0, .. })
    ));
}
