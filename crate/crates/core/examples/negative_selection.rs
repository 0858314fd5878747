//! Inter-modal negative selection against the intra-modal baseline on the
//! reference world. Trap texts sit next to the ID images. The inter-modal
//! rule rejects all of them; the intra-modal ranking keeps them, though low.

use interneg::proxy::ProxySet;
use interneg::selection::{evaluate_text, select, SelectionConfig, SelectionMode};
use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    let world = generate(&WorldSpec::reference())?;
    let s = world.session()?;
    let proxies = ProxySet::build(&s.labels, &s.id_images, 16, 0)?;
    println!("base distances: {:.3?}", proxies.base_distances);

    for mode in [SelectionMode::InterModal, SelectionMode::IntraModalBaseline] {
        let cfg = SelectionConfig {
            mode,
            ..SelectionConfig::default()
        };
        let set = select(&s.corpus, &s.labels, &proxies, &cfg)?;
        let ranks: Vec<usize> = set
            .corpus_indices()
            .iter()
            .enumerate()
            .filter(|(_, i)| world.trap_indices.contains(i))
            .map(|(rank, _)| rank)
            .collect();
        println!("{mode:?}: {} selected, {} traps", set.len(), ranks.len());
        if let Some(best) = ranks.first() {
            println!("  highest-ranked trap at position {best}");
        }
    }

    let trap = &s.corpus[world.trap_indices[0]];
    let far = (0..s.corpus.len())
        .find(|i| !world.trap_indices.contains(i))
        .unwrap();
    println!(
        "trap passes filter: {}",
        evaluate_text(trap, &proxies)?.is_some()
    );
    if let Some((_, dev)) = evaluate_text(&s.corpus[far], &proxies)? {
        println!("far text deviation {dev:.4}");
    }
    Ok(())
}
