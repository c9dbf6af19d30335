//! The three dependence measures used to rank candidate features, on a
//! monotone but nonlinear relation and on noise.

use mnarx::mnarx::{kendall_tau, pearson, spearman};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..2000).map(|_| rng.random_range(-3.0..3.0)).collect();
    let cubic: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
    let rounded: Vec<f64> = x.iter().map(|v| v.round()).collect();
    let noise: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();

    println!("{:<18} {:>9} {:>9} {:>9}", "pair", "pearson", "spearman", "kendall");
    for (name, y) in [("x vs x^3", &cubic), ("x vs round(x)", &rounded), ("x vs noise", &noise)] {
        println!(
            "{name:<18} {:>9.4} {:>9.4} {:>9.4}",
            pearson(&x, y)?.value,
            spearman(&x, y)?.value,
            kendall_tau(&x, y)?.value
        );
    }
    let flat = kendall_tau(&x, &vec![1.0; x.len()])?;
    println!("constant input: value {} degenerate {}", flat.value, flat.degenerate);
    Ok(())
}
