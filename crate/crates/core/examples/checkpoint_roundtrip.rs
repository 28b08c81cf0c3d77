//! Save a network, read the header back without the payload, reload and
//! compare bit patterns.
//!
//!     cargo run --example checkpoint_roundtrip

use kws::checkpoint::{self, Metadata};
use kws::Network;

fn main() -> kws::Result<()> {
    let net = Network::<f32>::reference(42);
    let meta = Metadata {
        epochs_completed: 0,
        best_val_accuracy: None,
        seed: 42,
    };
    let bytes = checkpoint::to_bytes(&net, &meta);
    let (header, offset) = checkpoint::read_header(&bytes)?;
    println!("{} bytes, header {} bytes, {} tensors:", bytes.len(), offset, header.tensors.len());
    for t in &header.tensors {
        println!("  {:<18} {:?}", t.name, t.shape);
    }

    let (back, _) = checkpoint::from_bytes(&bytes)?;
    let same = net
        .tensors()
        .iter()
        .zip(back.tensors())
        .all(|(a, b)| a.2.iter().zip(b.2).all(|(x, y)| x.to_bits() == y.to_bits()));
    println!("bitwise identical after reload: {same}");
    Ok(())
}
