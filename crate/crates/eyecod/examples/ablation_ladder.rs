//! Adds one capability at a time, starting from a lens camera running gaze
//! estimation on full frames.

use eyecod::networks::{lens_pipeline, shipped_pipeline};
use eyecod::sim::{self, HardwareConfig};

fn main() -> eyecod::error::Result<()> {
    let rows = sim::ladder(&shipped_pipeline(), &lens_pipeline(), &HardwareConfig::default(), 100)?;
    println!("{:<20} {:>4} {:>9} {:>7} {:>8}", "row", "mode", "fps", "step", "eff");
    for r in &rows {
        println!("{:<20} {:>4} {:9.2} {:7.3} {:8.3}", r.name, r.mode, r.fps, r.step_ratio, r.norm_energy_eff);
    }
    print!("{}", sim::ladder_csv(&rows));
    Ok(())
}
