//! The bundled synthetic corpus: six posed faces enrolled as their own
//! gallery, with τ = 0.8.

use std::path::{Path, PathBuf};

use raf_core::oracle::{GalleryManifest, ManifestIdentity};
use raf_core::synthetic::posed_face;

use crate::HarnessError;

pub const FIXTURE_LABELS: [&str; 6] = ["ada", "bela", "cyrus", "dara", "emil", "faye"];
pub const FIXTURE_SIZE: u32 = 128;
pub const FIXTURE_THRESHOLD: f64 = 0.8;
pub const MANIFEST_NAME: &str = "manifest.json";

/// Directory of the copy committed with the crate.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("synthetic6")
}

/// Writes `<label>.png`, `<label>.lms` and `manifest.json` into `dir` and
/// returns the manifest path.
pub fn write_synthetic_corpus(dir: impl AsRef<Path>) -> Result<PathBuf, HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let mut identities = Vec::new();
    for (seed, label) in (1u64..).zip(FIXTURE_LABELS) {
        let face = posed_face(seed, FIXTURE_SIZE);
        let png = format!("{label}.png");
        face.image.write_png(dir.join(&png))?;
        face.landmarks.write_sidecar(dir.join(format!("{label}.lms")))?;
        identities.push(ManifestIdentity {
            label: label.to_string(),
            images: vec![PathBuf::from(png)],
        });
    }
    let manifest = GalleryManifest {
        threshold: FIXTURE_THRESHOLD,
        identities,
    };
    let path = dir.join(MANIFEST_NAME);
    manifest.write(&path)?;
    Ok(path)
}
