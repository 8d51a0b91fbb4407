//! Structural matrices of a small ring and the identities tying them together.

use netiqc::{NetworkGraph, StructuralMatrices};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = NetworkGraph::ring(4)?;
    let s = StructuralMatrices::new(&g);

    println!("ring of 4: {} edges, {} link coordinates", g.edge_count(), g.coord_count());
    println!("incidence B =\n{}", s.incidence.to_dense());
    println!("subsystem Laplacian L =\n{}", s.laplacian.to_dense());
    println!("routing permutation P = I − L =\n{}", s.permutation.to_dense());

    // L is the sum of the link Laplacians, and P swaps the two ends of every link
    let sum = s.link_laplacians.iter().fold(s.laplacian.to_dense() * 0.0, |acc, l| acc + l.to_dense());
    println!("Σ L_k == L: {}", sum == s.laplacian.to_dense());
    let p = s.permutation.to_dense();
    println!("P² == I: {}", &p * &p == nalgebra::DMatrix::identity(p.nrows(), p.ncols()));
    for k in 0..g.edge_count() {
        let (a, b) = g.edge_coords(k);
        let [i, j] = g.edge_endpoints(k);
        println!("link {}: agents {}–{}, coordinates {} and {}", k + 1, i + 1, j + 1, a + 1, b + 1);
    }
    Ok(())
}
