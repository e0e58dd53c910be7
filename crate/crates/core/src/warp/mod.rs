//! Warping functions: landmark displacement recipes in reference space and
//! the dense image warp that realizes them.

mod image;
mod mesh;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::image::Image;
pub use self::mesh::{
    border_anchors, build_warp_mesh, triangulate, warp_image, WarpMesh, BORDER_ANCHORS,
    FRAME_MARGIN,
};
use crate::landmarks::{
    to_reference, LandmarkError, LandmarkSet, Point, ReferenceSpace, LANDMARK_COUNT,
};

/// Largest permitted warp scale, in reference units.
pub const MAX_SCALE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum WarpError {
    #[error("scale {0} outside [0, {MAX_SCALE}]")]
    ScaleOutOfRange(f64),
    #[error("destination landmark {index} at ({x}, {y}) is outside the allowed frame")]
    OutOfFrame { index: usize, x: f64, y: f64 },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("mesh does not match image: {0}")]
    MeshMismatch(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("unknown warping function {0:?}")]
    UnknownFunction(String),
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image I/O: {0}")]
    Io(String),
    #[error(transparent)]
    Landmarks(#[from] LandmarkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WarpFunction {
    RaiseEyebrow,
    Smile,
    StretchNose,
    Chubbify,
    OpenEyes,
}

const EYEBROWS: [usize; 10] = [17, 18, 19, 20, 21, 22, 23, 24, 25, 26];
const SMILE: [usize; 6] = [48, 49, 53, 54, 55, 59];
const NOSE: [usize; 8] = [27, 28, 29, 30, 31, 32, 34, 35];
const NOSE_TIP: usize = 33;
const JAW: [usize; 17] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16];
const UPPER_LIDS: [usize; 4] = [37, 38, 43, 44];
const LOWER_LIDS: [usize; 4] = [40, 41, 46, 47];
const OPEN_EYES: [usize; 18] = [
    37, 38, 43, 44, 40, 41, 46, 47, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26,
];

impl WarpFunction {
    pub const ALL: [WarpFunction; 5] = [
        WarpFunction::RaiseEyebrow,
        WarpFunction::Smile,
        WarpFunction::StretchNose,
        WarpFunction::Chubbify,
        WarpFunction::OpenEyes,
    ];

    /// Landmarks this function can move. Every other index is left untouched.
    pub fn driven_indices(self) -> &'static [usize] {
        match self {
            WarpFunction::RaiseEyebrow => &EYEBROWS,
            WarpFunction::Smile => &SMILE,
            WarpFunction::StretchNose => &NOSE,
            WarpFunction::Chubbify => &JAW,
            WarpFunction::OpenEyes => &OPEN_EYES,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            WarpFunction::RaiseEyebrow => "re",
            WarpFunction::Smile => "smile",
            WarpFunction::StretchNose => "sn",
            WarpFunction::Chubbify => "chubbify",
            WarpFunction::OpenEyes => "oe",
        }
    }
}

impl fmt::Display for WarpFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for WarpFunction {
    type Err = WarpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "re" | "raiseeyebrow" | "raiseeyebrows" => WarpFunction::RaiseEyebrow,
            "smile" => WarpFunction::Smile,
            "sn" | "stretchnose" | "nosestretch" => WarpFunction::StretchNose,
            "chubbify" | "chubby" => WarpFunction::Chubbify,
            "oe" | "openeyes" => WarpFunction::OpenEyes,
            _ => return Err(WarpError::UnknownFunction(s.to_string())),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    pub function: WarpFunction,
    pub scale: f64,
}

impl WarpSpec {
    pub fn new(function: WarpFunction, scale: f64) -> Result<Self, WarpError> {
        check_scale(scale)?;
        Ok(Self { function, scale })
    }
}

impl fmt::Display for WarpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.function, self.scale)
    }
}

fn check_scale(scale: f64) -> Result<(), WarpError> {
    if (0.0..=MAX_SCALE).contains(&scale) {
        Ok(())
    } else {
        Err(WarpError::ScaleOutOfRange(scale))
    }
}

/// Per-landmark displacement vectors (reference units) of `wf` at `scale`.
/// Entries outside `wf.driven_indices()` are exactly zero.
pub fn displacement_vectors(
    lm_ref: &LandmarkSet,
    wf: WarpFunction,
    scale: f64,
) -> Result<[Point; LANDMARK_COUNT], WarpError> {
    check_scale(scale)?;
    let unit = ReferenceSpace::canonical().unit();
    let step = scale * unit;
    let pts = lm_ref.points();
    let mut d = [Point::default(); LANDMARK_COUNT];
    match wf {
        WarpFunction::RaiseEyebrow => {
            for i in EYEBROWS {
                d[i] = Point::new(0.0, -step);
            }
        }
        WarpFunction::Smile => {
            let corner = 0.6 * step;
            d[48] = Point::new(-corner, -corner);
            d[54] = Point::new(corner, -corner);
            for i in [49, 59] {
                d[i] = d[48] * 0.5;
            }
            for i in [53, 55] {
                d[i] = d[54] * 0.5;
            }
        }
        WarpFunction::StretchNose => {
            let tip = pts[NOSE_TIP];
            let reach = NOSE
                .iter()
                .map(|&i| pts[i].distance(tip))
                .fold(0.0, f64::max);
            if reach > 0.0 {
                for i in NOSE {
                    d[i] = (pts[i] - tip) * (step / reach);
                }
            }
        }
        WarpFunction::Chubbify => {
            let tip = pts[NOSE_TIP];
            for i in JAW {
                let r = pts[i] - tip;
                let len = r.x.hypot(r.y);
                if len > 0.0 {
                    d[i] = r * (step / len);
                }
            }
        }
        WarpFunction::OpenEyes => {
            for i in UPPER_LIDS {
                d[i] = Point::new(0.0, -0.5 * step);
            }
            for i in LOWER_LIDS {
                d[i] = Point::new(0.0, 0.5 * step);
            }
            for i in EYEBROWS {
                d[i] = Point::new(0.0, -0.25 * step);
            }
        }
    }
    Ok(d)
}

/// Applies the recipe of `wf` to landmarks expressed in reference space.
pub fn displace_landmarks(
    lm_ref: &LandmarkSet,
    wf: WarpFunction,
    scale: f64,
) -> Result<LandmarkSet, WarpError> {
    let d = displacement_vectors(lm_ref, wf, scale)?;
    let mut pts = *lm_ref.points();
    for i in wf.driven_indices() {
        pts[*i] = pts[*i] + d[*i];
    }
    Ok(LandmarkSet::from_array(pts)?)
}

/// Warps a face image with one warping function.
///
/// The displacement is computed in reference space and carried into image
/// space through the linear part of the reference→image transform, so
/// landmarks that the recipe does not drive keep their exact input
/// coordinates. Returns the warped image and its landmark set.
pub fn warp_face(
    img: &Image,
    lm: &LandmarkSet,
    spec: WarpSpec,
    reference: &ReferenceSpace,
) -> Result<(Image, LandmarkSet), WarpError> {
    check_scale(spec.scale)?;
    let (lm_ref, t) = to_reference(lm, reference)?;
    let d = displacement_vectors(&lm_ref, spec.function, spec.scale)?;
    let mut dst = *lm.points();
    for i in spec.function.driven_indices() {
        dst[*i] = dst[*i] + t.apply_linear(d[*i]);
    }
    let dst = LandmarkSet::from_array(dst)?;
    let mesh = build_warp_mesh(lm, &dst, img.width(), img.height())?;
    let out = warp_image(img, &mesh)?;
    Ok((out, dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon() -> LandmarkSet {
        ReferenceSpace::canonical().canonical_landmarks()
    }

    #[test]
    fn zero_scale_is_identity() {
        for wf in WarpFunction::ALL {
            assert_eq!(displace_landmarks(&canon(), wf, 0.0).unwrap(), canon());
        }
    }

    #[test]
    fn raise_eyebrow_moves_only_brows_up() {
        let lm = canon();
        let out = displace_landmarks(&lm, WarpFunction::RaiseEyebrow, 0.2).unwrap();
        for i in 0..LANDMARK_COUNT {
            let (a, b) = (lm.point(i), out.point(i));
            if (17..=26).contains(&i) {
                assert_eq!(b.x, a.x);
                assert!((b.y - (a.y - 0.2)).abs() < 1e-15, "index {i}");
            } else {
                assert_eq!(a, b, "index {i}");
            }
        }
    }

    #[test]
    fn displacement_is_linear_in_scale() {
        let lm = canon();
        for wf in WarpFunction::ALL {
            let one = displacement_vectors(&lm, wf, 0.1).unwrap();
            let two = displacement_vectors(&lm, wf, 0.2).unwrap();
            for (a, b) in one.iter().zip(&two) {
                assert_eq!(*a * 2.0, *b, "{wf}");
            }
        }
    }

    #[test]
    fn smile_corners_move_out_and_up() {
        let d = displacement_vectors(&canon(), WarpFunction::Smile, 0.5).unwrap();
        assert_eq!(d[48], Point::new(-0.3, -0.3));
        assert_eq!(d[54], Point::new(0.3, -0.3));
        assert_eq!(d[49], Point::new(-0.15, -0.15));
        assert_eq!(d[55], Point::new(0.15, -0.15));
    }

    #[test]
    fn stretch_nose_keeps_tip_and_scales_by_distance() {
        let lm = canon();
        let d = displacement_vectors(&lm, WarpFunction::StretchNose, 0.3).unwrap();
        assert_eq!(d[33], Point::default());
        // 27 is farthest from the tip, so it moves by the full step.
        assert!((d[27].x.hypot(d[27].y) - 0.3).abs() < 1e-12);
        let r = lm.point(31).distance(lm.point(33)) / lm.point(27).distance(lm.point(33));
        assert!((d[31].x.hypot(d[31].y) - 0.3 * r).abs() < 1e-12);
    }

    #[test]
    fn chubbify_moves_jaw_radially_by_full_step() {
        let d = displacement_vectors(&canon(), WarpFunction::Chubbify, 0.2).unwrap();
        for i in JAW {
            assert!((d[i].x.hypot(d[i].y) - 0.2).abs() < 1e-12);
        }
        assert!(d[8].y > 0.0);
    }

    #[test]
    fn driven_sets_are_disjoint_for_schedule_functions() {
        let fs = [WarpFunction::RaiseEyebrow, WarpFunction::Smile, WarpFunction::StretchNose];
        for (i, a) in fs.iter().enumerate() {
            for b in &fs[i + 1..] {
                assert!(
                    a.driven_indices().iter().all(|x| !b.driven_indices().contains(x)),
                    "{a} and {b} overlap"
                );
            }
        }
    }

    #[test]
    fn scale_bounds_are_enforced() {
        assert_eq!(
            displace_landmarks(&canon(), WarpFunction::Smile, 0.51),
            Err(WarpError::ScaleOutOfRange(0.51))
        );
        assert!(WarpSpec::new(WarpFunction::Smile, -0.1).is_err());
        assert!(WarpSpec::new(WarpFunction::Smile, 0.5).is_ok());
    }

    #[test]
    fn function_names_parse() {
        for wf in WarpFunction::ALL {
            assert_eq!(wf.short_name().parse::<WarpFunction>().unwrap(), wf);
            assert_eq!(wf.to_string().parse::<WarpFunction>().unwrap(), wf);
        }
        assert_eq!("raise-eyebrow".parse::<WarpFunction>().unwrap(), WarpFunction::RaiseEyebrow);
        assert!("frown".parse::<WarpFunction>().is_err());
    }
}
