//! Stream the test split through the dynamic extra-negative pool with a
//! small capacity so eviction happens.

use interneg::pipeline::{prepare, RunConfig};
use interneg::pool::{process_stream, PoolConfig, StreamContext};
use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    let world = generate(&WorldSpec::reference())?;
    let s = world.session()?;
    let cfg = RunConfig::reference_fixture();
    let prepared = prepare(&cfg, &s)?;
    let negatives = prepared.negatives.embeddings();
    let encoder = cfg.encoder.build(s.dim, cfg.inversion.prefix_weight)?;

    let ctx = StreamContext {
        labels: &s.labels,
        negatives: &negatives,
        proxies: &prepared.proxies,
        scorer: cfg.scorer(),
        pool: PoolConfig {
            beta: cfg.beta,
            capacity: 32,
        },
        encoder: &encoder,
        inversion: cfg.inversion,
    };
    let out = process_stream(&s.test, &ctx)?;

    let triggered = out.trace.iter().filter(|t| t.triggered).count();
    let admitted = out.trace.iter().filter(|t| t.admitted).count();
    println!(
        "{triggered} inversions, {admitted} admitted, {} evicted",
        out.pool.evicted()
    );
    println!(
        "min retained deviation {:.4}, max evicted {:.4}",
        out.pool.min_retained_deviation().unwrap_or(f64::NAN),
        out.pool.max_evicted_deviation()
    );
    for e in out.pool_state().iter().take(5) {
        println!(
            "  {} from {}  deviation {:.4}",
            e.embedding.id, e.origin_sample, e.deviation
        );
    }
    Ok(())
}
