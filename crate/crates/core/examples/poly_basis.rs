//! Hyperbolic truncation of polynomial bases: how the q-norm prunes
//! interaction terms, and evaluating a basis at a point.

use mnarx::poly::{evaluate_basis, generate_hyperbolic_set};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("terms for 10 features");
    println!("degree   q=1.0   q=0.8   q=0.5");
    for degree in 1..=4 {
        let sizes: Vec<usize> = [1.0, 0.8, 0.5]
            .iter()
            .map(|&q| generate_hyperbolic_set(10, degree, q).map(|s| s.len()))
            .collect::<Result<_, _>>()?;
        println!("{degree:>6} {:>7} {:>7} {:>7}", sizes[0], sizes[1], sizes[2]);
    }

    let set = generate_hyperbolic_set(2, 3, 0.8)?;
    let point = [0.5, -2.0];
    let values = evaluate_basis(&point, &set)?;
    println!("\ndegree 3, q 0.8, two features at {point:?}");
    for (alpha, v) in set.indices.iter().zip(values) {
        println!("  x^{:?} = {v}", alpha.0);
    }
    Ok(())
}
