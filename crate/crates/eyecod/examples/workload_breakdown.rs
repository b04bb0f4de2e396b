//! MAC budget of the shipped pipeline: per-network totals, amortized
//! per-frame shares and what moving the first layer into the optics saves.

use eyecod::networks::{lens_pipeline, shipped_pipeline};
use eyecod::workload::{amortized_breakdown, amortized_frame_macs, apply_optical_first_layer};

fn main() -> eyecod::error::Result<()> {
    let p = shipped_pipeline();
    println!("segmentation {:.1} M MACs, gaze {:.3} G MACs, reconstruction {:.1} M MACs",
        p.seg_net.total_macs()? as f64 / 1e6,
        p.gaze_net.total_macs()? as f64 / 1e9,
        p.recon_macs()? as f64 / 1e6);
    for (k, f) in amortized_breakdown(&p)?.fractions() {
        println!("  {k:<16} {:6.3}%", 100.0 * f);
    }
    let lens = lens_pipeline();
    println!("per frame: {:.3} G MACs (lens camera on 256x256: {:.3} G)",
        amortized_frame_macs(&p)? / 1e9,
        amortized_frame_macs(&lens)? / 1e9);
    let (_, s) = apply_optical_first_layer(&p.seg_net, Some([256, 256, 1]), 8)?;
    println!("optical first layer: -{} MACs, sensor traffic x{:.2}", s.removed_macs, s.traffic_ratio);
    Ok(())
}
