//! Sample link gains from the sector, close the loop and integrate a pulse
//! response; also checks a batch of samples for stability.

use netiqc::sim::{closed_loop_ss, monte_carlo_hurwitz, sample_links, simulate, Disturbance};
use netiqc::{NetworkGraph, StateSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = NetworkGraph::path(10)?;
    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0])?;
    let agents = (0..10).map(|i| h.with_shared_inputs(g.degree(i))).collect::<Result<Vec<_>, _>>()?;
    let (alpha, beta) = (-2.0, 0.15);

    let links = sample_links(&g, alpha, beta, 42)?;
    println!("δ = {:.3?}", links.deltas);
    let cl = closed_loop_ss(&g, &agents, &links)?;
    println!("closed-loop spectral abscissa {:.3}", cl.spectral_abscissa());

    let dt = 1e-3;
    let res = simulate(&cl, &Disturbance::Pulse { channel: 0, area: 1.0, width: 0.01 }, 1.0, dt)?;
    let last = res.y.last().unwrap();
    println!("bounded: {}, energy ratio {:.3e}, |y(1)|∞ = {:.2e}", res.bounded, res.energy_ratio.unwrap(), last.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let sectors = vec![(alpha, beta); g.agent_count()];
    let stable = monte_carlo_hurwitz(&g, &agents, &sectors, 0..200)?.iter().filter(|(_, ok)| *ok).count();
    println!("{stable}/200 sampled closed loops are Hurwitz");
    Ok(())
}
