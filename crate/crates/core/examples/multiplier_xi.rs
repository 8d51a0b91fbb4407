//! The sector multiplier of one agent and its frequency-dependent blocks.

use netiqc::multiplier::{iqc_residual, sector_multiplier, xi_eval};
use netiqc::StateSpace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (alpha, beta) = (-2.0, 0.15);
    let mult = sector_multiplier(2, alpha, beta)?;
    println!("Φ for an agent with two links, sector [{alpha}, {beta}] =\n{}", mult.assembled());

    // any gains inside the sector satisfy the quadratic constraint
    for deltas in [[alpha, beta], [0.0, 0.1], [-1.0, -1.5]] {
        println!("δ = {deltas:?}: residual = {:.4}", iqc_residual(&mult, 0.7, &deltas));
    }

    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0])?.with_shared_inputs(2)?;
    for w in [0.0, 5.0, 100.0] {
        let xi = xi_eval(&h, &mult, w)?;
        println!("ω = {w}: Ξ1 =\n{:.4}", xi.xi1);
    }
    Ok(())
}
