//! The path-graph experiment: ten agents `1/(s+25)`, link sector [−2, 0.15],
//! checked with all three methods.

use netiqc::kyp::{certify_network, KypOptions, Method};
use netiqc::multiplier::NetworkMultiplier;
use netiqc::{NetworkGraph, StateSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = NetworkGraph::path(10)?;
    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0])?;
    let agents = (0..10)
        .map(|i| h.with_shared_inputs(g.degree(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mult = NetworkMultiplier::sector(&g, -2.0, 0.15)?;

    let start = std::time::Instant::now();
    let report = certify_network(&g, &agents, &mult, &Method::ALL, &KypOptions::default())?;
    println!(
        "nominal loop: well-posed {}, stable {} (max Re λ = {:.3})",
        report.assumption1.well_posed, report.assumption1.nominal_stable, report.assumption1.max_real_eig
    );
    for m in &report.methods {
        println!("\n{} → {:?}", m.method, m.overall);
        for c in &m.conditions {
            println!(
                "  {:<12} {:<13} t* = {:>10.3e}  ε = {:>9.2e}  λ_max(LMI) = {:>10.3e}  grid = {:>10.3e} @ {}",
                c.label.to_string(),
                format!("{:?}", c.status),
                c.t_opt,
                c.eps_achieved,
                c.lmi_residual,
                c.grid_max_eig,
                c.grid_argmax
            );
        }
    }
    println!("\n{:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}
