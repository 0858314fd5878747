//! Generate the reference synthetic world and write it to disk.
//!
//! cargo run --example synth_world -- /tmp/fixture

use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixture".into());
    let spec = WorldSpec::reference();
    let world = generate(&spec)?;
    world.write(&dir)?;

    let session = world.session()?;
    println!("dim {}, {} classes", session.dim, session.labels.len());
    println!(
        "{} corpus texts, {} of them traps",
        session.corpus.len(),
        world.trap_indices.len()
    );
    println!("{} test images", session.test.len());
    println!("written to {dir}");
    Ok(())
}
