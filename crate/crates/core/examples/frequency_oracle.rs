//! Grid sweep of the link-wise frequency inequalities on the path graph:
//! the largest eigenvalue of each condition's Hermitian form over ω.

use netiqc::certificate::{linkwise_fdi, monolithic_fdi};
use netiqc::kyp::{default_grid, frequency_grid_check};
use netiqc::multiplier::NetworkMultiplier;
use netiqc::{NetworkGraph, StateSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = NetworkGraph::path(6)?;
    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0])?;
    let agents = (0..6).map(|i| h.with_shared_inputs(g.degree(i))).collect::<Result<Vec<_>, _>>()?;
    let mult = NetworkMultiplier::sector(&g, -2.0, 0.15)?;
    let grid = default_grid();

    let mono = monolithic_fdi(&g, &agents, &mult)?;
    let c = frequency_grid_check(&mono, &grid, 0.0);
    println!("{:<12} max λ = {:>11.4e} at ω = {}", mono.label.to_string(), c.max_eig, c.argmax);
    for k in 0..g.edge_count() {
        let fdi = linkwise_fdi(&g, &agents, &mult, k)?;
        let c = frequency_grid_check(&fdi, &grid, 0.0);
        println!("{:<12} max λ = {:>11.4e} at ω = {}", fdi.label.to_string(), c.max_eig, c.argmax);
    }
    Ok(())
}
