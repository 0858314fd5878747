//! Selection mode and extra negatives, on the far-OOD reference world and a
//! near-OOD variant.

use interneg::pipeline::{evaluate_session, RunConfig};
use interneg::selection::SelectionMode;
use interneg::synth::{generate, OodMode, WorldSpec};

fn main() -> interneg::Result<()> {
    for ood_mode in [OodMode::Far, OodMode::Near] {
        let world = generate(&WorldSpec {
            ood_mode,
            ..WorldSpec::reference()
        })?;
        let s = world.session()?;
        println!("{ood_mode:?} OOD");
        for (name, mode, stream) in [
            ("intra SNT", SelectionMode::IntraModalBaseline, false),
            ("inter SNT", SelectionMode::InterModal, false),
            ("inter SNT + ENT", SelectionMode::InterModal, true),
        ] {
            let cfg = RunConfig {
                mode,
                stream,
                ..RunConfig::reference_fixture()
            };
            let r = evaluate_session(&cfg, &s, "ablation")?.report;
            println!("  {name:<16} AUROC {:.4}  FPR95 {:.4}", r.auroc, r.fpr95);
        }
    }
    Ok(())
}
