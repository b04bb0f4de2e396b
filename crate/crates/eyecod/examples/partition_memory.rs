//! Activation memory: whole-layer peaks and the input feature-wise
//! partition that fits both networks into the on-chip buffers.

use eyecod::mapper::{plan_with_grid, HaloMode};
use eyecod::networks::shipped_pipeline;
use eyecod::sim::{plan_pipeline, HardwareConfig};

fn mib(b: u64) -> f64 {
    b as f64 / (1024.0 * 1024.0)
}

fn main() -> eyecod::error::Result<()> {
    let p = shipped_pipeline();
    let cfg = HardwareConfig::default();
    for g in [[1, 1], [2, 2], [4, 4]] {
        let plan = plan_with_grid(&p.seg_net, g, HaloMode::Recompute, cfg.precision_bits)?;
        println!("segmentation grid {g:?}: peak {:.3} MiB at {}", mib(plan.peak_bytes), plan.peak_layer);
    }
    let plans = plan_pipeline(&p, &cfg)?;
    let (seg, gaze) = (&plans.seg, &plans.gaze);
    let whole = seg.unpartitioned_peak_bytes + gaze.unpartitioned_peak_bytes;
    let tiled = seg.peak_bytes + gaze.peak_bytes;
    println!("budget {:.3} MiB", mib(cfg.act_storage_bytes()));
    println!("segmentation {:?} grid: {:.3} -> {:.3} MiB", seg.grid, mib(seg.unpartitioned_peak_bytes), mib(seg.peak_bytes));
    println!("gaze {:?} grid: {:.3} -> {:.3} MiB", gaze.grid, mib(gaze.unpartitioned_peak_bytes), mib(gaze.peak_bytes));
    println!("total {:.3} -> {:.3} MiB ({:.1}%)", mib(whole), mib(tiled), 100.0 * tiled as f64 / whole as f64);
    Ok(())
}
