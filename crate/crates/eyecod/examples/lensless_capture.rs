//! Coded-mask capture and Tikhonov reconstruction of a synthetic eye at
//! several noise levels.

use eyecod::optics::{generate_mask, reconstruct, simulate_capture, MaskFamily, ReconSettings};
use eyecod::roi::{mask_scene, synth_eye_mask, SynthEye};

fn psnr(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    let mse = (a - b).norm_squared() / a.len() as f64;
    10.0 * (1.0 / mse).log10()
}

fn main() -> eyecod::error::Result<()> {
    let scene = mask_scene(&synth_eye_mask(&SynthEye::centered(64, 64), 1)?);
    for family in [MaskFamily::Mls, MaskFamily::Bernoulli] {
        let (masks, cond) = generate_mask(family, 127, 64, 7)?;
        println!("{family:?}: condition numbers {:.1} / {:.1}", cond.left, cond.right);
        for sigma in [0.0, 1e-3, 1e-2] {
            let y = simulate_capture(&scene, &masks, sigma, 42)?;
            for eps in [1e-6, 1e-3, 1e-1] {
                let x = reconstruct(&y.channels[0], &masks, ReconSettings::new(eps)?)?;
                println!("  sigma {sigma:<6} eps {eps:<6} PSNR {:6.2} dB", psnr(&x.values, &scene.values));
            }
        }
    }
    Ok(())
}
