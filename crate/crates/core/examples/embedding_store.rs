//! Round-trip embeddings through the EMB1 format and load a manifest.

use interneg::store::{load, EmbeddingFile};
use interneg::synth::{generate, WorldSpec, MANIFEST_FILE};

fn main() -> interneg::Result<()> {
    let dir = std::env::temp_dir().join("interneg-store-example");

    let file = EmbeddingFile::from_rows(3, &[[1.0, 0.0, 0.0], [0.0, 0.5, 0.5]])?;
    let path = dir.join("two.emb");
    std::fs::create_dir_all(&dir).expect("temp dir");
    file.write(&path)?;
    let back = EmbeddingFile::read(&path)?;
    println!(
        "{} rows of dim {}, {} bytes",
        back.count(),
        back.dim(),
        file.to_bytes().len()
    );
    assert_eq!(back, file);

    // a whole session: labels, ID images, corpus and test split
    let spec = WorldSpec {
        dim: 8,
        classes: 3,
        images_per_class: 5,
        corpus_far: 12,
        corpus_trap: 3,
        n_test_id: 10,
        n_test_ood: 10,
        ..WorldSpec::reference()
    };
    generate(&spec)?.write(dir.join("world"))?;
    let session = load(dir.join("world").join(MANIFEST_FILE))?;
    for (name, imgs) in session.labels.class_names.iter().zip(&session.id_images) {
        println!("{name}: {} images", imgs.len());
    }
    println!(
        "first corpus id {}, first test id {}",
        session.corpus[0].id, session.test[0].id
    );
    Ok(())
}
