//! The three ways of sharing the array between segmentation and gaze
//! estimation, and where lanes sit idle.

use eyecod::networks::shipped_pipeline;
use eyecod::sim::{self, utilization_trace, HardwareConfig, OrchestrationMode, Stream};

fn main() -> eyecod::error::Result<()> {
    let p = shipped_pipeline();
    let cfg = HardwareConfig::default();
    for mode in [OrchestrationMode::TimeMultiplexing, OrchestrationMode::concurrent(), OrchestrationMode::partial()] {
        let r = sim::run(&p, mode, &cfg, 100)?;
        let low = utilization_trace(&r, 0.8).iter().filter(|u| u.stream == Stream::Gaze && u.below_threshold).count();
        println!(
            "{:<4} fps {:7.2} (mean {:7.2})  utilization {:.3}  peak co-run x{:.2}  gaze intervals under 0.8: {low}",
            mode.short(), r.fps, r.fps_average, r.utilization, r.peak_corun_speedup
        );
    }
    println!("static split gives segmentation {} of {} MACs", sim::concurrent_split(&p, cfg.total_macs())?, cfg.total_macs());
    Ok(())
}
