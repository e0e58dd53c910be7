#![allow(dead_code)]

use raf_core::landmarks::Point;
use raf_core::synthetic::{frontal_face, posed_face, SyntheticFace};
use raf_core::warp::Image;

pub const FIXTURE_SIZE: u32 = 128;

/// The frontal face plus two posed faces.
pub fn fixture_faces() -> Vec<SyntheticFace> {
    vec![
        frontal_face(1, FIXTURE_SIZE),
        posed_face(2, FIXTURE_SIZE),
        posed_face(3, FIXTURE_SIZE),
    ]
}

/// Independent point-in-triangle test (sign of the three edge functions).
pub fn inside_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let edge = |u: Point, v: Point| (v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x);
    let (e0, e1, e2) = (edge(a, b), edge(b, c), edge(c, a));
    let eps = 1e-9;
    (e0 >= -eps && e1 >= -eps && e2 >= -eps) || (e0 <= eps && e1 <= eps && e2 <= eps)
}

/// Pixels whose samples differ by more than one 8-bit step.
pub fn changed_pixels(a: &Image, b: &Image) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for y in 0..a.height() {
        for x in 0..a.width() {
            let diff = a
                .pixel(x, y)
                .iter()
                .zip(b.pixel(x, y))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            if diff > 1.0 / 255.0 {
                out.push((x, y));
            }
        }
    }
    out
}
