//! AUROC, FPR95 and the ID error taxonomy on the reference world.

use interneg::metrics::{auroc, fpr95};
use interneg::pipeline::{evaluate_session, RunConfig};
use interneg::synth::{generate, WorldSpec};

fn main() -> interneg::Result<()> {
    println!("toy AUROC {}", auroc(&[0.9, 0.6], &[0.8, 0.7])?);
    println!("toy FPR95 {}", fpr95(&[0.9, 0.8], &[0.85, 0.1])?);

    let world = generate(&WorldSpec::reference())?;
    let s = world.session()?;
    let eval = evaluate_session(&RunConfig::reference_fixture(), &s, "reference")?;
    let r = &eval.report;
    println!(
        "AUROC {:.4}  FPR95 {:.4}  ({} ID / {} OOD)",
        r.auroc, r.fpr95, r.n_id, r.n_ood
    );
    print!("{}", r.eval().taxonomy_tsv());
    Ok(())
}
