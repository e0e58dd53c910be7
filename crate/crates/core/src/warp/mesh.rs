//! Piecewise-affine realization of a landmark displacement: a Delaunay mesh
//! over the destination points plus a backward-mapping dense warp.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::image::Image;
use super::WarpError;
use crate::landmarks::{LandmarkSet, Point, LANDMARK_COUNT};

/// Landmarks may sit at most this fraction of the image size outside the frame.
pub const FRAME_MARGIN: f64 = 0.25;

/// Number of fixed border anchors appended to the landmark list.
pub const BORDER_ANCHORS: usize = 8;

const INSIDE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct WarpMesh {
    width: u32,
    height: u32,
    src_points: Vec<Point>,
    dst_points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

/// Corners and edge midpoints of the pixel rectangle, half a pixel outside the
/// outermost pixel centres so that every centre is strictly inside the hull.
pub fn border_anchors(width: u32, height: u32) -> [Point; BORDER_ANCHORS] {
    let (l, t) = (-0.5, -0.5);
    let r = width as f64 - 0.5;
    let b = height as f64 - 0.5;
    let cx = (l + r) / 2.0;
    let cy = (t + b) / 2.0;
    [
        Point::new(l, t),
        Point::new(cx, t),
        Point::new(r, t),
        Point::new(r, cy),
        Point::new(r, b),
        Point::new(cx, b),
        Point::new(l, b),
        Point::new(l, cy),
    ]
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)) / 2.0
}

pub fn build_warp_mesh(
    src_lm: &LandmarkSet,
    dst_lm: &LandmarkSet,
    width: u32,
    height: u32,
) -> Result<WarpMesh, WarpError> {
    if width == 0 || height == 0 {
        return Err(WarpError::InvalidImage(format!("empty image {width}x{height}")));
    }
    let (w, h) = (width as f64, height as f64);
    for (index, p) in dst_lm.points().iter().enumerate() {
        let inside_x = p.x >= -FRAME_MARGIN * w && p.x <= (1.0 + FRAME_MARGIN) * w;
        let inside_y = p.y >= -FRAME_MARGIN * h && p.y <= (1.0 + FRAME_MARGIN) * h;
        if !(inside_x && inside_y) {
            return Err(WarpError::OutOfFrame { index, x: p.x, y: p.y });
        }
    }

    let anchors = border_anchors(width, height);
    let mut src_points: Vec<Point> = src_lm.points().to_vec();
    let mut dst_points: Vec<Point> = dst_lm.points().to_vec();
    src_points.extend_from_slice(&anchors);
    dst_points.extend_from_slice(&anchors);

    let triangles = triangulate(&dst_points)?;
    Ok(WarpMesh {
        width,
        height,
        src_points,
        dst_points,
        triangles,
    })
}

/// Delaunay triangulation of `points`, each triangle returned counter-clockwise
/// in image coordinates (y down) with its smallest index first, sorted.
pub fn triangulate(points: &[Point]) -> Result<Vec<[usize; 3]>, WarpError> {
    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_to_index = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let handle = dt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| WarpError::Triangulation(format!("point {index}: {e:?}")))?;
        if handle.index() < handle_to_index.len() {
            return Err(WarpError::Triangulation(format!(
                "point {index} coincides with point {}",
                handle_to_index[handle.index()]
            )));
        }
        handle_to_index.push(index);
    }
    let mut triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|face| {
            let [a, b, c] = face.vertices().map(|v| handle_to_index[v.fix().index()]);
            let tri = if signed_area(points[a], points[b], points[c]) < 0.0 {
                [a, c, b]
            } else {
                [a, b, c]
            };
            let m = (0..3).min_by_key(|&i| tri[i]).unwrap();
            [tri[m], tri[(m + 1) % 3], tri[(m + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();
    Ok(triangles)
}

impl WarpMesh {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn src_points(&self) -> &[Point] {
        &self.src_points
    }

    pub fn dst_points(&self) -> &[Point] {
        &self.dst_points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Builds a mesh from explicit point lists and triangles. Used for
    /// hand-constructed meshes; no Delaunay property is assumed.
    pub fn from_parts(
        width: u32,
        height: u32,
        src_points: Vec<Point>,
        dst_points: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, WarpError> {
        if src_points.len() != dst_points.len() {
            return Err(WarpError::MeshMismatch(format!(
                "{} source points vs {} destination points",
                src_points.len(),
                dst_points.len()
            )));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= dst_points.len())) {
            return Err(WarpError::MeshMismatch(format!("triangle {t:?} index out of range")));
        }
        Ok(Self {
            width,
            height,
            src_points,
            dst_points,
            triangles,
        })
    }

    /// Barycentric coordinates of `p` in destination triangle `tri`.
    pub fn barycentric(&self, tri: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[tri].map(|i| self.dst_points[i]);
        let area = signed_area(a, b, c);
        let l0 = signed_area(p, b, c) / area;
        let l1 = signed_area(a, p, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Index of the first destination triangle (in mesh order) containing `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.triangles.len()).find(|&t| self.barycentric(t, p).iter().all(|l| *l >= -INSIDE_EPS))
    }

    /// Triangles (mesh indices) having any vertex in `indices`.
    pub fn incident_triangles(&self, indices: &[usize]) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].iter().any(|v| indices.contains(v)))
            .collect()
    }

    /// Triangles sharing a vertex with any triangle of `tris` (including `tris`).
    pub fn one_ring(&self, tris: &[usize]) -> Vec<usize> {
        let mut verts: Vec<usize> = tris.iter().flat_map(|&t| self.triangles[t]).collect();
        verts.sort_unstable();
        verts.dedup();
        self.incident_triangles(&verts)
    }

    /// Landmark-only view of the destination points.
    pub fn dst_landmarks(&self) -> &[Point] {
        &self.dst_points[..LANDMARK_COUNT.min(self.dst_points.len())]
    }
}

struct TriangleMap {
    identity: bool,
    valid: bool,
    centroid: Point,
    // src = origin + l1 * e1 + l2 * e2 where (l1, l2) from dst barycentrics
    dst: [Point; 3],
    src: [Point; 3],
}

impl TriangleMap {
    fn map(&self, p: Point) -> Point {
        let [a, b, c] = self.dst;
        let area = signed_area(a, b, c);
        let l0 = signed_area(p, b, c) / area;
        let l1 = signed_area(a, p, c) / area;
        let l2 = 1.0 - l0 - l1;
        let [s0, s1, s2] = self.src;
        Point::new(
            l0 * s0.x + l1 * s1.x + l2 * s2.x,
            l0 * s0.y + l1 * s1.y + l2 * s2.y,
        )
    }
}

/// Backward piecewise-affine warp. Each output pixel centre is located in the
/// destination triangulation, mapped to source coordinates through that
/// triangle's affine map, and sampled bilinearly with edge clamping.
///
/// A triangle whose source image has flipped (or zero) orientation is folded;
/// its pixels are mapped with the nearest non-folded triangle instead.
pub fn warp_image(img: &Image, mesh: &WarpMesh) -> Result<Image, WarpError> {
    if img.width() != mesh.width || img.height() != mesh.height {
        return Err(WarpError::MeshMismatch(format!(
            "mesh built for {}x{}, image is {}x{}",
            mesh.width,
            mesh.height,
            img.width(),
            img.height()
        )));
    }
    if mesh.src_points.len() != mesh.dst_points.len() {
        return Err(WarpError::MeshMismatch("source/destination point counts differ".into()));
    }

    let maps: Vec<TriangleMap> = mesh
        .triangles
        .iter()
        .map(|tri| {
            let dst = tri.map(|i| mesh.dst_points[i]);
            let src = tri.map(|i| mesh.src_points[i]);
            let dst_area = signed_area(dst[0], dst[1], dst[2]);
            let src_area = signed_area(src[0], src[1], src[2]);
            TriangleMap {
                identity: dst == src,
                valid: dst_area.abs() > 0.0 && src_area * dst_area.signum() > 0.0,
                centroid: Point::new(
                    (dst[0].x + dst[1].x + dst[2].x) / 3.0,
                    (dst[0].y + dst[1].y + dst[2].y) / 3.0,
                ),
                dst,
                src,
            }
        })
        .collect();

    let folded = maps.iter().filter(|m| !m.valid).count();
    if folded > 0 {
        log::warn!("{folded} folded triangle(s) in warp mesh; using nearest valid triangle");
        if folded == maps.len() {
            return Err(WarpError::Triangulation("every triangle of the mesh is folded".into()));
        }
    }

    let (w, h) = (mesh.width as usize, mesh.height as usize);
    let mut owner = vec![usize::MAX; w * h];
    for (t, m) in maps.iter().enumerate() {
        let [a, b, c] = m.dst;
        let area = signed_area(a, b, c);
        if area == 0.0 {
            continue;
        }
        let min_x = a.x.min(b.x).min(c.x).ceil().max(0.0) as usize;
        let max_x = a.x.max(b.x).max(c.x).floor().min((w - 1) as f64);
        let min_y = a.y.min(b.y).min(c.y).ceil().max(0.0) as usize;
        let max_y = a.y.max(b.y).max(c.y).floor().min((h - 1) as f64);
        if max_x < 0.0 || max_y < 0.0 {
            continue;
        }
        for y in min_y..=max_y as usize {
            for x in min_x..=max_x as usize {
                let slot = &mut owner[y * w + x];
                if *slot != usize::MAX {
                    continue;
                }
                let p = Point::new(x as f64, y as f64);
                let l0 = signed_area(p, b, c) / area;
                let l1 = signed_area(a, p, c) / area;
                let l2 = 1.0 - l0 - l1;
                if l0 >= -INSIDE_EPS && l1 >= -INSIDE_EPS && l2 >= -INSIDE_EPS {
                    *slot = t;
                }
            }
        }
    }

    let nearest_valid = |p: Point| -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for (t, m) in maps.iter().enumerate().filter(|(_, m)| m.valid) {
            let d = (m.centroid - p).x.powi(2) + (m.centroid - p).y.powi(2);
            if d < best.0 {
                best = (d, t);
            }
        }
        best.1
    };

    let mut out = img.clone();
    let mut buf = vec![0.0; img.channels() as usize];
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(x as f64, y as f64);
            let mut t = owner[y * w + x];
            if t == usize::MAX || !maps[t].valid {
                t = nearest_valid(p);
            }
            let m = &maps[t];
            if m.identity {
                continue;
            }
            let s = m.map(p);
            img.sample_bilinear(s.x, s.y, &mut buf);
            out.pixel_mut(x as u32, y as u32).copy_from_slice(&buf);
        }
    }
    Ok(out)
}
