//! Writes an embedding set and its labels to disk, reads them back, and
//! checks the vectors survive bit-for-bit.
//!
//! ```bash
//! cargo run -p flick --example flke_roundtrip
//! ```

use flick::ingestion::{self, EmbeddingSet, LabelTable};

fn main() -> flick::Result<()> {
    let dir = std::env::temp_dir().join("flick-flke-example");
    std::fs::create_dir_all(&dir).map_err(|e| flick::FlickError::io(&dir, e))?;

    let ids: Vec<String> = (0..4).map(|i| format!("doc{i}")).collect();
    let rows = vec![
        vec![0.1, -2.5, 3.0],
        vec![1e-30, 7.25, -0.0],
        vec![f32::MAX, f32::MIN_POSITIVE, 1.0],
        vec![0.0, 0.5, -0.5],
    ];
    let set = EmbeddingSet::from_rows(ids.clone(), &rows)?;
    let labels = LabelTable::from_pairs(ids.iter().zip(["spam", "ham", "spam", "ham"]).map(|(i, l)| (i.clone(), l)))?;

    let emb_path = dir.join("docs.flke");
    let label_path = dir.join("docs.jsonl");
    ingestion::write_embeddings(&set, &emb_path)?;
    ingestion::write_labels(&labels, &label_path)?;

    let back = ingestion::load_embeddings(&emb_path)?;
    let back_labels = ingestion::load_labels(&label_path)?;
    let exact = back.vectors().iter().zip(set.vectors()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("{} rows x {} dims, bit-exact: {exact}", back.len(), back.dim());
    println!("classes {:?}, doc2 -> {}", back_labels.class_names(), back_labels.class_names()[back_labels.class_of("doc2").unwrap()]);
    Ok(())
}
