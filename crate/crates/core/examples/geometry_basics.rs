//! Cosine similarity and the inter-modal distance between a text and an
//! image proxy.

use interneg::{cosine, inter_modal_distance, normalize, Embedding};

fn main() -> interneg::Result<()> {
    let a = [1.0, 0.0, 0.0];
    let b = [1.0, 1.0, 0.0];
    println!("cos(a, b) = {:.6}", cosine(&a, &b)?);
    println!("normalize(b) = {:?}", normalize(&b)?);

    let text = Embedding::text("dog", &[0.0, 3.0, 4.0])?;
    // proxies need not be unit length
    let proxy = [0.0, 6.0, 8.0];
    println!(
        "d(text, proxy) = {:.6}",
        inter_modal_distance(&text, &proxy)?
    );

    let far = [0.0, -4.0, 3.0];
    println!(
        "d(text, orthogonal) = {:.6}",
        inter_modal_distance(&text, &far)?
    );

    match cosine(&a, &[0.0, 0.0, 0.0]) {
        Err(e) => println!("zero vector: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
