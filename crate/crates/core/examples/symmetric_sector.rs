//! A sector centred at −1 (α + β = −2). There the gains `−1 ± c` route each
//! link's signal back with a sign flip, and the neighbourhood condition's
//! cross terms vanish; compare the three methods as the width grows.

use netiqc::kyp::{certify_network, KypOptions, Method};
use netiqc::multiplier::NetworkMultiplier;
use netiqc::{NetworkGraph, StateSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = NetworkGraph::path(6)?;
    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0])?;
    let agents = (0..6).map(|i| h.with_shared_inputs(g.degree(i))).collect::<Result<Vec<_>, _>>()?;
    let opts = KypOptions::default();

    println!("{:>6}  {:<14} {:<14} {:<14}", "c", "monolithic", "neighborhood", "linkwise");
    for c in [1.0, 1.075, 1.5, 5.0, 20.0] {
        let mult = NetworkMultiplier::sector(&g, -1.0 - c, -1.0 + c)?;
        let r = certify_network(&g, &agents, &mult, &Method::ALL, &opts)?;
        let v: Vec<String> = r.methods.iter().map(|m| format!("{:?}", m.overall)).collect();
        println!("{c:>6}  {:<14} {:<14} {:<14}", v[0], v[1], v[2]);
    }
    Ok(())
}
