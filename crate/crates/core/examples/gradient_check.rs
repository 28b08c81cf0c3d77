//! Finite-difference check of the full network in f64 on one random batch.
//! Takes a few seconds to a minute depending on the machine.
//!
//!     cargo run --release --example gradient_check -- [seed]

use kws::nn::{Network, NetworkSpec, Tensor3};
use kws::train::gradient_check;
use rand::{Rng, SeedableRng};

fn main() -> kws::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let net = Network::<f64>::new(NetworkSpec::reference(), seed)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let batch: Vec<Tensor3<f64>> = (0..2)
        .map(|_| Tensor3::from_vec(129, 71, 1, (0..129 * 71).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();

    let report = gradient_check(&net, &batch, &[3, 7], 1e-5)?;
    for g in &report.groups {
        println!("{:<18} {:.2e}  (analytic {:.3e}, numeric {:.3e})", g.name, g.max_rel_error, g.analytic, g.numeric);
    }
    println!(
        "worst {:.2e} at {} over {} parameters ({} refined, {} unresolved)",
        report.max_rel_error, report.worst, report.checked, report.refined, report.unresolved
    );
    Ok(())
}
