//! Replays random small layers through their mapping and partition plans
//! and compares against direct execution.

use eyecod::oracle::{check_case, random_case};
use eyecod::sim::HardwareConfig;
use eyecod::workload::LayerKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> eyecod::error::Result<()> {
    let cfg = HardwareConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for kind in LayerKind::ALL {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let case = random_case(kind, &mut rng);
            worst = worst.max(check_case(&case, &cfg)?);
        }
        println!("{kind:<16} 20 cases, max |replay - dense| = {worst:.2e}");
    }
    Ok(())
}
