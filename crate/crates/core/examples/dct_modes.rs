//! Spatial DCT of a gridded field. Low modes carry the mean and the large
//! scale gradients; keeping every mode reconstructs the field exactly.

use mnarx::features::dct::all_modes;
use mnarx::features::{dct2_modes, dct2_reconstruct};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (rows, cols) = (19, 19);
    let field = DMatrix::from_fn(rows, cols, |i, j| {
        let (y, x) = (i as f64 / rows as f64, j as f64 / cols as f64);
        8.0 + 1.5 * y + 0.6 * (3.0 * x).sin() * (2.0 * y).cos()
    });

    let low = [(0, 0), (1, 0), (0, 1), (1, 1)];
    for (mode, c) in low.iter().zip(dct2_modes(&field, &low)?) {
        println!("mode {mode:?}: {c:+.4}");
    }

    let modes = all_modes(rows, cols);
    let coefficients = dct2_modes(&field, &modes)?;
    let back = dct2_reconstruct(rows, cols, &modes, &coefficients)?;
    println!("full reconstruction error {:.2e}", (&back - &field).amax());

    let few: Vec<(usize, usize)> = modes.iter().copied().filter(|(k, l)| k + l <= 2).collect();
    let kept = dct2_modes(&field, &few)?;
    let approx = dct2_reconstruct(rows, cols, &few, &kept)?;
    println!("{} low modes: reconstruction error {:.2e}", few.len(), (&approx - &field).amax());
    Ok(())
}
