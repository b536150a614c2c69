//! Parses NTU RGB+D `.skeleton` files into a canonical JSON dataset.
//!
//! cargo run --release --example ntu_ingest -- [dir] [out.json]
//!
//! Defaults to the bundled fixtures under tests/fixtures/ntu.

use std::path::PathBuf;

use csta::cli::ingest_ntu;
use csta::skeleton::{parse_ntu_file_name, write_canonical_json};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ntu"));

    let dataset = ingest_ntu(&dir)?;
    println!("classes {:?}", dataset.class_names);
    for s in &dataset.samples {
        let meta = parse_ntu_file_name(&s.source).expect("ingested names parse");
        println!(
            "{}  label {}  subject {}  view {}  frames {}  setup {}",
            s.source,
            s.label,
            s.subject_id,
            s.view_id,
            s.len(),
            meta.setup
        );
    }
    let (train, test) = dataset.partition();
    println!("cross-subject split: {} train, {} test", train.len(), test.len());
    if let Some(out) = args.next() {
        std::fs::write(&out, write_canonical_json(&dataset)?)?;
        println!("wrote {out}");
    }
    Ok(())
}
