//! Regenerates the bundled synthetic corpus.
//!
//! `cargo run -p raf-harness --example gen_fixtures [dir]`

use std::path::PathBuf;

use raf_harness::fixtures::{bundled_dir, write_synthetic_corpus};

fn main() {
    let dir = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(bundled_dir);
    let manifest = write_synthetic_corpus(&dir).expect("write fixtures");
    println!("wrote {}", manifest.display());
}
