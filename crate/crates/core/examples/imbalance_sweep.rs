//! Evaluate the reference world at several ID:OOD ratios.

use interneg::pipeline::{evaluate_imbalance, Ratio, RunConfig};
use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    let world = generate(&WorldSpec::reference())?;
    let s = world.session()?;
    let cfg = RunConfig::reference_fixture();
    for (ratio, eval) in evaluate_imbalance(&cfg, &s, &Ratio::standard(), "reference")? {
        let r = eval.report;
        println!(
            "{ratio:>7}  n_id {:>4}  n_ood {:>4}  AUROC {:.4}  FPR95 {:.4}",
            r.n_id, r.n_ood, r.auroc, r.fpr95
        );
    }
    Ok(())
}
