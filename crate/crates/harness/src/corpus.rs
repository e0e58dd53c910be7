use std::path::{Path, PathBuf};

use raf_core::oracle::GalleryManifest;

use crate::HarnessError;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusItem {
    pub stem: String,
    pub image: PathBuf,
    pub landmarks: PathBuf,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub manifest: PathBuf,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Label for a probe stem: the identity listing an image with the same file
/// stem, else the identity named by the stem (or its prefix before `__`).
fn label_for<'a>(stem: &str, manifest: &'a GalleryManifest) -> Option<&'a str> {
    let by_image = manifest.identities.iter().find(|id| {
        id.images
            .iter()
            .any(|p| p.file_stem().and_then(|s| s.to_str()) == Some(stem))
    });
    if let Some(id) = by_image {
        return Some(&id.label);
    }
    let prefix = stem.split("__").next().unwrap_or(stem);
    manifest.labels().find(|l| *l == stem || *l == prefix)
}

/// Pairs every `<stem>.png` under `root` with `<stem>.lms`, labels each item
/// from the gallery manifest, and sorts by stem.
pub fn ingest_corpus(root: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<Corpus, HarnessError> {
    let root = root.as_ref();
    let manifest_path = manifest.as_ref().to_path_buf();
    if !root.is_dir() {
        return Err(HarnessError::Corpus(format!("{} is not a directory", root.display())));
    }
    let manifest = GalleryManifest::read(&manifest_path)?;

    let mut stems = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| HarnessError::Io(format!("{}: {e}", root.display())))? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push((stem.to_string(), path.clone()));
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        return Err(HarnessError::Corpus(format!("no images found in {}", root.display())));
    }

    let items = stems
        .into_iter()
        .map(|(stem, image)| {
            let landmarks = image.with_extension("lms");
            if !landmarks.is_file() {
                return Err(HarnessError::Corpus(format!("missing landmark sidecar for {stem:?}")));
            }
            let label = label_for(&stem, &manifest)
                .ok_or_else(|| HarnessError::Corpus(format!("no gallery label for {stem:?}")))?
                .to_string();
            Ok(CorpusItem {
                stem,
                image,
                landmarks,
                label,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus {
        items,
        manifest: manifest_path,
    })
}
