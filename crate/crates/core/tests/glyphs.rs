use std::collections::HashSet;
use std::path::Path;

use securexam::attestation::{GLYPH_COUNT, GLYPH_NAMES};

#[derive(serde::Deserialize)]
struct Entry {
    index: usize,
    name: String,
    asset: String,
}

#[test]
fn catalog_index_matches_glyph_names() {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let index: Vec<Entry> = serde_json::from_slice(&std::fs::read(assets.join("glyphs.json")).unwrap()).unwrap();
    assert_eq!(index.len(), GLYPH_COUNT);
    let mut bodies = HashSet::new();
    for (i, e) in index.iter().enumerate() {
        assert_eq!(e.index, i);
        assert_eq!(e.name, GLYPH_NAMES[i]);
        let svg = std::fs::read_to_string(assets.join(&e.asset)).unwrap();
        assert!(svg.starts_with("<svg"), "{}", e.asset);
        assert!(bodies.insert(svg), "duplicate glyph {}", e.asset);
    }
}
