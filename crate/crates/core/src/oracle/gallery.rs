use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{OracleError, OracleResponse};
use crate::warp::Image;

/// Side of the square grid the default extractor downsamples to.
pub const EMBEDDING_SIDE: usize = 32;

pub const DEFAULT_EXTRACTOR_ID: &str = "gray32-zero-mean-l2";

/// Similarity a probe must reach to be reported as recognized.
pub const DEFAULT_THRESHOLD: f64 = 0.95;

const ZERO_NORM: f64 = 1e-12;

/// Face descriptor; unit norm, or all zeros for a constant image.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Scales to unit norm; a (near-)zero vector becomes exactly zero.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n < ZERO_NORM {
            self.0.iter_mut().for_each(|v| *v = 0.0);
        } else {
            self.0.iter_mut().for_each(|v| *v /= n);
        }
        self
    }
}

/// Overlap weights of source cells `[k, k+1)` with output cell `out` when `src`
/// cells are spread evenly over `dst` outputs.
fn area_weights(src: usize, dst: usize, out: usize) -> Vec<(usize, f64)> {
    let ratio = src as f64 / dst as f64;
    let lo = out as f64 * ratio;
    let hi = (out + 1) as f64 * ratio;
    let first = lo.floor() as usize;
    let last = (hi.ceil() as usize).min(src);
    (first..last)
        .filter_map(|k| {
            let overlap = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
            (overlap > 0.0).then_some((k, overlap))
        })
        .collect()
}

/// Default extractor: luma, area-average resample to 32×32, subtract the mean,
/// divide by the Euclidean norm. Gain-invariant; constant images map to zero.
pub fn extract_embedding(img: &Image) -> Embedding {
    let gray = img.to_gray();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let samples = gray.samples();
    let cols: Vec<_> = (0..EMBEDDING_SIDE).map(|i| area_weights(w, EMBEDDING_SIDE, i)).collect();
    let rows: Vec<_> = (0..EMBEDDING_SIDE).map(|j| area_weights(h, EMBEDDING_SIDE, j)).collect();

    let mut cells = Vec::with_capacity(EMBEDDING_SIDE * EMBEDDING_SIDE);
    for row in &rows {
        for col in &cols {
            let mut acc = 0.0;
            let mut area = 0.0;
            for &(y, wy) in row {
                for &(x, wx) in col {
                    acc += samples[y * w + x] * wx * wy;
                    area += wx * wy;
                }
            }
            cells.push(acc / area);
        }
    }
    let mean = cells.iter().sum::<f64>() / cells.len() as f64;
    cells.iter_mut().for_each(|v| *v -= mean);
    Embedding(cells).normalized()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GalleryEntry {
    pub label: String,
    pub embedding: Embedding,
}

/// Enrolled identities with a fixed recognition threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Gallery {
    entries: Vec<GalleryEntry>,
    threshold: f64,
    extractor_id: String,
}

impl Gallery {
    pub fn new(threshold: f64) -> Result<Self, OracleError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(OracleError::InvalidThreshold(threshold));
        }
        Ok(Self {
            entries: Vec::new(),
            threshold,
            extractor_id: DEFAULT_EXTRACTOR_ID.to_string(),
        })
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn extractor_id(&self) -> &str {
        &self.extractor_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.label == label)
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.embedding.dim())
    }

    /// Adds a precomputed embedding (normalized on entry).
    pub fn enroll_embedding(
        self,
        label: impl Into<String>,
        embedding: Embedding,
    ) -> Result<Self, OracleError> {
        self.insert(label.into(), embedding.normalized())
    }

    fn insert(mut self, label: String, embedding: Embedding) -> Result<Self, OracleError> {
        if self.contains(&label) {
            return Err(OracleError::DuplicateLabel(label));
        }
        if let Some(expected) = self.dim() {
            if embedding.dim() != expected {
                return Err(OracleError::DimensionMismatch {
                    expected,
                    found: embedding.dim(),
                });
            }
        }
        if embedding.norm() == 0.0 {
            return Err(OracleError::DegenerateEmbedding(label));
        }
        self.entries.push(GalleryEntry { label, embedding });
        Ok(self)
    }

    /// Enrolls `label` with the normalized mean of its images' embeddings.
    pub fn enroll(self, label: impl Into<String>, images: &[Image]) -> Result<Self, OracleError> {
        let label = label.into();
        let embedding = match images {
            [] => return Err(OracleError::NoImages(label)),
            // A single embedding is already unit norm (or zero).
            [only] => extract_embedding(only),
            _ => {
                let mut sum = vec![0.0; EMBEDDING_SIDE * EMBEDDING_SIDE];
                for img in images {
                    for (s, v) in sum.iter_mut().zip(extract_embedding(img).as_slice()) {
                        *s += v;
                    }
                }
                let n = images.len() as f64;
                sum.iter_mut().for_each(|v| *v /= n);
                Embedding(sum).normalized()
            }
        };
        self.insert(label, embedding)
    }

    /// Loads a manifest and enrolls every identity; image paths are resolved
    /// relative to the manifest's directory.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let path = path.as_ref();
        let manifest = GalleryManifest::read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut gallery = Gallery::new(manifest.threshold)?;
        for identity in &manifest.identities {
            let images = identity
                .images
                .iter()
                .map(|p| {
                    let full = resolve(&base, p);
                    Image::read_png(&full).map_err(|e| OracleError::Manifest(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            gallery = gallery.enroll(identity.label.clone(), &images)?;
        }
        Ok(gallery)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Gallery manifest file: `{"threshold": τ, "identities": [{"label", "images"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalleryManifest {
    pub threshold: f64,
    pub identities: Vec<ManifestIdentity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestIdentity {
    pub label: String,
    pub images: Vec<PathBuf>,
}

impl GalleryManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, OracleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Manifest(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| OracleError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), OracleError> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| OracleError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.identities.iter().map(|i| i.label.as_str())
    }
}

/// Nearest-identity lookup. Similarities are cosines clamped at zero; ties go
/// to the lexicographically smallest label. Below the threshold the hard label
/// is withheld but the best similarity is still reported.
pub fn match_embedding(embedding: &Embedding, gallery: &Gallery) -> Result<OracleResponse, OracleError> {
    let expected = gallery.dim().ok_or(OracleError::EmptyGallery)?;
    if embedding.dim() != expected {
        return Err(OracleError::DimensionMismatch {
            expected,
            found: embedding.dim(),
        });
    }
    let probe_norm = embedding.norm();
    let mut best: Option<(&str, f64)> = None;
    for entry in &gallery.entries {
        let denom = probe_norm * entry.embedding.norm();
        let cos = if denom > 0.0 {
            embedding.dot(&entry.embedding) / denom
        } else {
            0.0
        };
        let sim = cos.clamp(0.0, 1.0);
        best = match best {
            Some((label, s)) if s > sim || (s == sim && label <= entry.label.as_str()) => {
                Some((label, s))
            }
            _ => Some((entry.label.as_str(), sim)),
        };
    }
    let (label, sim) = best.expect("gallery is non-empty");
    if sim >= gallery.threshold {
        Ok(OracleResponse::recognized(label, sim))
    } else {
        Ok(OracleResponse::unrecognized(sim))
    }
}
