//! Procedurally rendered faces with exact landmarks, for fixtures and
//! demonstrations.
//!
//! A face is drawn in reference coordinates (the frame of
//! [`CANONICAL_LANDMARKS`]) and placed in the image by a similarity
//! transform, which also places the landmarks. Each identity carries its own
//! band-limited texture concentrated around the mid-face.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::landmarks::{
    apply_affine_landmarks, invert_affine, AffineTransform, LandmarkSet, Point, ReferenceSpace,
};
use crate::warp::Image;

#[derive(Clone, Debug)]
pub struct SyntheticFace {
    pub image: Image,
    pub landmarks: LandmarkSet,
    /// Reference → image placement.
    pub placement: AffineTransform,
}

const NOSE_WINDOW_CENTER: f64 = 0.15;
const NOSE_WINDOW_SIGMA: f64 = 0.22;

#[derive(Clone, Debug)]
struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: f64,
}

#[derive(Clone, Debug)]
struct Style {
    skin: f64,
    tint: [f64; 3],
    waves: Vec<Wave>,
}

impl Style {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..8)
            .map(|_| {
                let wavelength = rng.gen_range(0.16..0.3);
                let angle = rng.gen_range(0.0..PI);
                let k = 2.0 * PI / wavelength;
                Wave {
                    kx: k * angle.cos(),
                    ky: k * angle.sin(),
                    phase: rng.gen_range(0.0..2.0 * PI),
                    amp: rng.gen_range(0.06..0.1),
                }
            })
            .collect();
        Style {
            skin: rng.gen_range(0.5..0.6),
            tint: [1.0, rng.gen_range(0.8..0.9), rng.gen_range(0.68..0.8)],
            waves,
        }
    }

    /// Gray level at reference coordinates `q`.
    fn shade(&self, q: Point) -> f64 {
        let face = (q.x / 0.7).powi(2) + ((q.y + 0.2) / 0.82).powi(2);
        let mut v = if face > 1.0 { self.skin - 0.04 } else { self.skin };

        let ellipse = |cx: f64, cy: f64, rx: f64, ry: f64| {
            ((q.x - cx) / rx).powi(2) + ((q.y - cy) / ry).powi(2) <= 1.0
        };
        for side in [-1.0, 1.0] {
            if ellipse(side * 0.36, -0.385, 0.1, 0.045) {
                v -= 0.1;
            }
            if ellipse(side * 0.37, -0.63, 0.22, 0.035) {
                v -= 0.08;
            }
        }
        if ellipse(0.0, 0.37, 0.3, 0.07) {
            v -= 0.06;
        }

        // Identity texture, windowed around the nose.
        let r2 = q.x.powi(2) + (q.y + NOSE_WINDOW_CENTER).powi(2);
        let window = (-r2 / (2.0 * NOSE_WINDOW_SIGMA.powi(2))).exp();
        let texture: f64 = self
            .waves
            .iter()
            .map(|w| w.amp * (w.kx * q.x + w.ky * q.y + w.phase).sin())
            .sum();
        v + window * texture
    }
}

fn placement(scale: f64, angle: f64, center: Point) -> AffineTransform {
    let (s, c) = angle.sin_cos();
    AffineTransform {
        a11: scale * c,
        a12: scale * s,
        a21: -scale * s,
        a22: scale * c,
        tx: center.x,
        ty: center.y,
    }
}

fn render(size: u32, style: &Style, t: &AffineTransform) -> (Image, LandmarkSet) {
    let inv = invert_affine(t).expect("placement is a similarity with nonzero scale");
    let image = Image::from_fn(size, size, 3, |x, y, c| {
        let q = inv.apply(Point::new(x as f64, y as f64));
        style.shade(q) * style.tint[c as usize]
    })
    .expect("shade stays finite");
    let landmarks = apply_affine_landmarks(t, &ReferenceSpace::canonical().canonical_landmarks());
    (image, landmarks)
}

/// Upright, centred face; the same seed always yields the same face.
pub fn frontal_face(seed: u64, size: u32) -> SyntheticFace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style = Style::random(&mut rng);
    let s = size as f64;
    let t = placement(0.36 * s, 0.0, Point::new(s / 2.0, 0.56 * s));
    let (image, landmarks) = render(size, &style, &t);
    SyntheticFace {
        image,
        landmarks,
        placement: t,
    }
}

/// Face with a seed-dependent pose jitter (scale ±5%, roll ±3°, shift ±3 px).
pub fn posed_face(seed: u64, size: u32) -> SyntheticFace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style = Style::random(&mut rng);
    let s = size as f64;
    let scale = 0.36 * s * rng.gen_range(0.95..1.05);
    let angle = rng.gen_range(-3.0f64..3.0).to_radians();
    let center = Point::new(
        s / 2.0 + rng.gen_range(-3.0..3.0),
        0.56 * s + rng.gen_range(-3.0..3.0),
    );
    let t = placement(scale, angle, center);
    let (image, landmarks) = render(size, &style, &t);
    SyntheticFace {
        image,
        landmarks,
        placement: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = posed_face(7, 96);
        let b = posed_face(7, 96);
        assert_eq!(a.image, b.image);
        assert_eq!(a.landmarks, b.landmarks);
        assert_ne!(posed_face(8, 96).image, a.image);
    }

    #[test]
    fn landmarks_follow_placement() {
        let f = frontal_face(1, 128);
        assert_eq!(f.landmarks.point(33), Point::new(64.0, 0.56 * 128.0));
        let eyes = f.landmarks.point(36).distance(f.landmarks.point(45));
        assert!((eyes - 0.36 * 128.0).abs() < 1e-9);
    }
}
