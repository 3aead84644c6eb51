//! Deterministic synthetic scenes and glyph datasets.

pub mod corpus;
pub mod font;

pub use corpus::{
    generate_corpus, glyph_samples, read_manifest, render_corpus_image, write_glyph_dataset, Brightness,
    CorpusSpec, ManifestRow, Scene, SynthError, MANIFEST,
};
pub use font::ALPHABET;
