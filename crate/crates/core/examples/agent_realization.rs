//! A second-order agent realized in controllable canonical form and copied
//! onto three link inputs with a single shared state.

use netiqc::StateSpace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // H(s) = (s + 3) / (s² + 4s + 20)
    let h = StateSpace::from_transfer_function(&[1.0, 3.0], &[1.0, 4.0, 20.0])?;
    println!("A =\n{}B =\n{}C =\n{}D =\n{}", h.a, h.b, h.c, h.d);
    println!("poles: {:?}", h.eigenvalues());

    let h3 = h.with_shared_inputs(3)?;
    println!("shared-input copy: {} states, {} inputs", h3.nx(), h3.nu());
    for w in [0.0, 1.0, 10.0] {
        let siso = h.eval(w)?[(0, 0)];
        let row = h3.eval(w)?;
        println!("H(j{w}) = {siso:.4}, row sum over inputs = {:.4}", row.row(0).sum());
    }
    println!("H(∞) = {}", h.eval(f64::INFINITY)?[(0, 0)]);
    Ok(())
}
