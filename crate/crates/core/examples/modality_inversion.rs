//! Invert an image embedding into the text space of the toy encoder and
//! check the analytic gradient against finite differences.

use interneg::inversion::{
    finite_difference_gradient, invert, max_relative_error, InversionConfig, Matrix, ToyEncoder,
};
use interneg::{cosine, Embedding};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> interneg::Result<()> {
    let dim = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = Embedding::image("img", Matrix::gaussian(1, dim, 1.0, &mut rng).as_slice())?;

    let cfg = InversionConfig::default();
    let encoder = ToyEncoder::seeded(dim, dim, 3, cfg.prefix_weight, 0)?;
    let inv = invert(&h, &encoder, &cfg)?;
    for step in [0, 10, 50, 100, 200] {
        println!("step {step:>3}: loss {:.6}", inv.losses[step]);
    }
    println!(
        "best loss {:.6}, cos {:.6}",
        inv.best_loss,
        cosine(inv.embedding.values(), h.values())?
    );

    // gradient check at a random point
    let tokens = Matrix::gaussian(3, dim, 0.5, &mut rng);
    let (_, g) = encoder.loss_and_gradient(&tokens, h.values())?;
    let fd = finite_difference_gradient(&encoder, &tokens, h.values(), 1e-5)?;
    println!(
        "max relative gradient error {:e}",
        max_relative_error(&g, &fd, 1e-8)
    );
    Ok(())
}
