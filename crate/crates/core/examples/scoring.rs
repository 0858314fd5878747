//! Score test images against labels and negatives, classify ID samples and
//! threshold the score.

use interneg::proxy::ProxySet;
use interneg::scorer::{classify, detect, score, ScorerConfig};
use interneg::selection::{select, SelectionConfig};
use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    let world = generate(&WorldSpec::reference())?;
    let s = world.session()?;
    let proxies = ProxySet::build(&s.labels, &s.id_images, 16, 0)?;
    let negatives =
        select(&s.corpus, &s.labels, &proxies, &SelectionConfig::default())?.embeddings();

    let cfg = ScorerConfig {
        temperature: 0.05,
        threshold: 0.5,
    };
    for (h, class) in s.test.iter().zip(&world.test_classes).take(8) {
        let r = score(h, &s.labels, &negatives, [], &cfg)?;
        let truth = class.map_or("OOD".to_string(), |c| format!("class {c}"));
        println!(
            "{}  S={:.4}  {:?}  predicted class {}  (truth: {truth})",
            h.id,
            r.score,
            detect(&r, cfg.threshold),
            classify(h, &s.labels)?
        );
    }
    Ok(())
}
