//! 68-point landmark sets and the affine machinery that links each face to a
//! canonical reference frame.
//!
//! Point indices follow the usual 68-point layout: jaw 0-16, eyebrows 17-26,
//! nose 27-35, eyes 36-47, mouth 48-67.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Number of points in a landmark set.
pub const LANDMARK_COUNT: usize = 68;

/// Indices of the five alignment anchors: outer eye corners, nose tip, mouth
/// corners.
pub const ANCHOR_INDICES: [usize; 5] = [36, 45, 33, 48, 54];

/// Determinant threshold below which a (normalized) normal matrix or a linear
/// part is treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LandmarkError {
    #[error("expected {expected} points, found {found}")]
    PointCount { expected: usize, found: usize },
    #[error("line {line}: expected two coordinates \"x y\", found {found} tokens")]
    TokenCount { line: usize, found: usize },
    #[error("line {line}: non-numeric token {token:?}")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: non-finite coordinate {token:?}")]
    NonFinite { line: usize, token: String },
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("degenerate landmarks: anchor points {0} and {1} coincide")]
    Degenerate(usize, usize),
    #[error("source points are collinear; affine fit is rank deficient")]
    RankDeficient,
    #[error("need at least 3 correspondences with matching lengths (got {src} and {dst})")]
    Correspondence { src: usize, dst: usize },
    #[error("affine transform is not invertible (det = {0:e})")]
    NotInvertible(f64),
    #[error("landmark file I/O: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Exactly 68 finite points in pixel (or reference) coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    points: [Point; LANDMARK_COUNT],
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<Self, LandmarkError> {
        let found = points.len();
        let points: [Point; LANDMARK_COUNT] =
            points.try_into().map_err(|_| LandmarkError::PointCount {
                expected: LANDMARK_COUNT,
                found,
            })?;
        Self::from_array(points)
    }

    pub fn from_array(points: [Point; LANDMARK_COUNT]) -> Result<Self, LandmarkError> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(LandmarkError::NonFinitePoint { index });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point; LANDMARK_COUNT] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    /// Renders the sidecar format: one `x y` line per point, shortest
    /// round-trip decimal representation, trailing newline.
    pub fn to_sidecar_string(&self) -> String {
        let mut out = String::with_capacity(LANDMARK_COUNT * 16);
        for p in &self.points {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out
    }

    pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Self, LandmarkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LandmarkError::Io(format!("{}: {e}", path.display())))?;
        parse_landmarks(&text)
    }

    pub fn write_sidecar(&self, path: impl AsRef<Path>) -> Result<(), LandmarkError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_sidecar_string())
            .map_err(|e| LandmarkError::Io(format!("{}: {e}", path.display())))
    }
}

/// Parses a landmark sidecar file. Blank lines and surrounding whitespace are
/// ignored; line numbers in errors are 1-based and refer to the raw text.
pub fn parse_landmarks(text: &str) -> Result<LandmarkSet, LandmarkError> {
    let mut points = Vec::with_capacity(LANDMARK_COUNT);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(LandmarkError::TokenCount {
                line,
                found: tokens.len(),
            });
        }
        let mut coords = [0.0; 2];
        for (slot, token) in coords.iter_mut().zip(&tokens) {
            let value: f64 = token.parse().map_err(|_| LandmarkError::NonNumeric {
                line,
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(LandmarkError::NonFinite {
                    line,
                    token: token.to_string(),
                });
            }
            *slot = value;
        }
        points.push(Point::new(coords[0], coords[1]));
    }
    LandmarkSet::new(points)
}

/// The five alignment anchors of a face, in [`ANCHOR_INDICES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FivePointSet {
    points: [Point; 5],
}

impl FivePointSet {
    pub fn new(points: [Point; 5]) -> Result<Self, LandmarkError> {
        for i in 0..5 {
            if !points[i].is_finite() {
                return Err(LandmarkError::NonFinitePoint { index: i });
            }
            for j in (i + 1)..5 {
                if points[i].distance(points[j]) < SINGULAR_EPS {
                    return Err(LandmarkError::Degenerate(
                        ANCHOR_INDICES[i],
                        ANCHOR_INDICES[j],
                    ));
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point; 5] {
        &self.points
    }
}

pub fn reference_points(lm: &LandmarkSet) -> Result<FivePointSet, LandmarkError> {
    FivePointSet::new(ANCHOR_INDICES.map(|i| lm.point(i)))
}

/// Row-vector affine map `T(p) = p·A + b` with `A = [[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AffineTransform {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            p.x * self.a11 + p.y * self.a21 + self.tx,
            p.x * self.a12 + p.y * self.a22 + self.ty,
        )
    }

    /// Applies only the linear part; maps displacement vectors.
    pub fn apply_linear(&self, v: Point) -> Point {
        Point::new(
            v.x * self.a11 + v.y * self.a21,
            v.x * self.a12 + v.y * self.a22,
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &AffineTransform) -> AffineTransform {
        AffineTransform {
            a11: self.a11 * next.a11 + self.a12 * next.a21,
            a12: self.a11 * next.a12 + self.a12 * next.a22,
            a21: self.a21 * next.a11 + self.a22 * next.a21,
            a22: self.a21 * next.a12 + self.a22 * next.a22,
            tx: self.tx * next.a11 + self.ty * next.a21 + next.tx,
            ty: self.tx * next.a12 + self.ty * next.a22 + next.ty,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            a11: v[0],
            a12: v[1],
            a21: v[2],
            a22: v[3],
            tx: v[4],
            ty: v[5],
        }
    }

    /// Sum of squared residuals `Σ ||dst_i − T(src_i)||²`.
    pub fn residual(&self, src: &[Point], dst: &[Point]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(s, d)| {
                let r = *d - self.apply(*s);
                r.x * r.x + r.y * r.y
            })
            .sum()
    }
}

pub fn apply_affine(t: &AffineTransform, pts: &[Point]) -> Vec<Point> {
    pts.iter().map(|p| t.apply(*p)).collect()
}

pub fn apply_affine_landmarks(t: &AffineTransform, lm: &LandmarkSet) -> LandmarkSet {
    LandmarkSet {
        points: lm.points.map(|p| t.apply(p)),
    }
}

pub fn invert_affine(t: &AffineTransform) -> Result<AffineTransform, LandmarkError> {
    let det = t.determinant();
    if det.is_nan() || det.abs() <= SINGULAR_EPS {
        return Err(LandmarkError::NotInvertible(det));
    }
    let inv = AffineTransform {
        a11: t.a22 / det,
        a12: -t.a12 / det,
        a21: -t.a21 / det,
        a22: t.a11 / det,
        tx: 0.0,
        ty: 0.0,
    };
    let b = inv.apply_linear(Point::new(t.tx, t.ty));
    Ok(AffineTransform {
        tx: -b.x,
        ty: -b.y,
        ..inv
    })
}

/// Least-squares affine fit over any number (≥ 3) of correspondences.
///
/// The source points are centred and scaled to unit RMS radius before the
/// normal equations are formed, so the singularity test on the normal matrix
/// does not depend on the pixel scale of the input. The two output
/// coordinates decouple into two 3×3 systems sharing one normal matrix; after
/// centring, the translation column separates and only a 2×2 solve remains.
pub fn fit_affine(src: &[Point], dst: &[Point]) -> Result<AffineTransform, LandmarkError> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(LandmarkError::Correspondence {
            src: src.len(),
            dst: dst.len(),
        });
    }
    let n = src.len() as f64;
    let centroid = |pts: &[Point]| {
        let s = pts.iter().fold(Point::default(), |acc, p| acc + *p);
        s * (1.0 / n)
    };
    let cs = centroid(src);
    let cd = centroid(dst);
    let rms = (src
        .iter()
        .map(|p| {
            let d = *p - cs;
            d.x * d.x + d.y * d.y
        })
        .sum::<f64>()
        / n)
        .sqrt();
    if rms.is_nan() || rms <= 0.0 {
        return Err(LandmarkError::RankDeficient);
    }
    let scale = 1.0 / rms;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let u = (*s - cs) * scale;
        let v = *d - cd;
        sxx += u.x * u.x;
        sxy += u.x * u.y;
        syy += u.y * u.y;
        sxu += u.x * v.x;
        syu += u.y * v.x;
        sxv += u.x * v.y;
        syv += u.y * v.y;
    }
    // Normal matrix of the normalized system is diag-block [[sxx, sxy, 0], [sxy, syy, 0], [0, 0, n]].
    let det2 = sxx * syy - sxy * sxy;
    if !(det2 * n).is_finite() || (det2 * n).abs() <= SINGULAR_EPS {
        return Err(LandmarkError::RankDeficient);
    }
    let solve = |bx: f64, by: f64| ((syy * bx - sxy * by) / det2, (sxx * by - sxy * bx) / det2);
    let (a11, a21) = solve(sxu, syu);
    let (a12, a22) = solve(sxv, syv);
    let linear = AffineTransform {
        a11: a11 * scale,
        a12: a12 * scale,
        a21: a21 * scale,
        a22: a22 * scale,
        tx: 0.0,
        ty: 0.0,
    };
    let shift = cd - linear.apply_linear(cs);
    Ok(AffineTransform {
        tx: shift.x,
        ty: shift.y,
        ..linear
    })
}

pub fn estimate_affine(
    src: &FivePointSet,
    dst: &FivePointSet,
) -> Result<AffineTransform, LandmarkError> {
    fit_affine(src.points(), dst.points())
}

/// Canonical face template in reference units: nose tip (33) at the origin,
/// outer eye corners (36, 45) one unit apart, y pointing down.
#[rustfmt::skip]
pub const CANONICAL_LANDMARKS: [[f64; 2]; LANDMARK_COUNT] = [
    // jaw 0-16 (lower half-ellipse from the right temple to the left)
    [-0.62, -0.38], [-0.6081, -0.1947], [-0.5728, -0.0165], [-0.5155, 0.1478],
    [-0.4384, 0.2918], [-0.3444, 0.4099], [-0.2373, 0.4977], [-0.1210, 0.5518],
    [0.0, 0.57], [0.1210, 0.5518], [0.2373, 0.4977], [0.3444, 0.4099],
    [0.4384, 0.2918], [0.5155, 0.1478], [0.5728, -0.0165], [0.6081, -0.1947],
    [0.62, -0.38],
    // eyebrows 17-26
    [-0.62, -0.58], [-0.5, -0.64], [-0.37, -0.66], [-0.25, -0.64], [-0.13, -0.6],
    [0.13, -0.6], [0.25, -0.64], [0.37, -0.66], [0.5, -0.64], [0.62, -0.58],
    // nose bridge 27-30, lower nose 31-35
    [0.0, -0.4], [0.0, -0.29], [0.0, -0.18], [0.0, -0.07],
    [-0.16, -0.02], [-0.08, 0.01], [0.0, 0.0], [0.08, 0.01], [0.16, -0.02],
    // right eye 36-41 (image left), left eye 42-47
    [-0.5, -0.38], [-0.42, -0.43], [-0.3, -0.43], [-0.22, -0.38], [-0.3, -0.34], [-0.42, -0.34],
    [0.22, -0.38], [0.3, -0.43], [0.42, -0.43], [0.5, -0.38], [0.42, -0.34], [0.3, -0.34],
    // outer lip 48-59
    [-0.3, 0.36], [-0.2, 0.31], [-0.08, 0.28], [0.0, 0.29], [0.08, 0.28], [0.2, 0.31],
    [0.3, 0.36], [0.2, 0.43], [0.1, 0.46], [0.0, 0.47], [-0.1, 0.46], [-0.2, 0.43],
    // inner lip 60-67
    [-0.25, 0.36], [-0.1, 0.34], [0.0, 0.34], [0.1, 0.34], [0.25, 0.36], [0.1, 0.39],
    [0.0, 0.39], [-0.1, 0.39],
];

/// Canonical frame in which warp recipes are expressed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSpace {
    canonical_five: FivePointSet,
    unit: f64,
}

impl ReferenceSpace {
    pub fn canonical() -> Self {
        let five = ANCHOR_INDICES.map(|i| {
            let [x, y] = CANONICAL_LANDMARKS[i];
            Point::new(x, y)
        });
        let unit = five[0].distance(five[1]);
        Self {
            canonical_five: FivePointSet { points: five },
            unit,
        }
    }

    pub fn canonical_five(&self) -> &FivePointSet {
        &self.canonical_five
    }

    /// Inter-outer-eye distance in reference units.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn canonical_landmarks(&self) -> LandmarkSet {
        LandmarkSet {
            points: CANONICAL_LANDMARKS.map(|[x, y]| Point::new(x, y)),
        }
    }
}

impl Default for ReferenceSpace {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Maps a face into reference space. Returns the landmarks in reference
/// coordinates and the reference→input transform `t`.
pub fn to_reference(
    lm: &LandmarkSet,
    reference: &ReferenceSpace,
) -> Result<(LandmarkSet, AffineTransform), LandmarkError> {
    let t = estimate_affine(reference.canonical_five(), &reference_points(lm)?)?;
    let inv = invert_affine(&t)?;
    Ok((apply_affine_landmarks(&inv, lm), t))
}
