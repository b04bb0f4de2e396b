//! How each layer kind lands on the MAC lanes, and what intra-channel
//! reuse does for depth-wise layers.

use eyecod::mapper::{bandwidth_requirement, map_depthwise, map_layer, ReuseScheme};
use eyecod::sim::HardwareConfig;
use eyecod::workload::{LayerKind as K, LayerSpec};

fn main() -> eyecod::error::Result<()> {
    let cfg = HardwareConfig::default();
    let layers = [
        LayerSpec::conv("stem", K::GenericConv, [96, 160, 1], 48, 3, 2),
        LayerSpec::conv("expand", K::PointwiseConv, [24, 40, 64], 384, 1, 1),
        LayerSpec::conv("dw", K::DepthwiseConv, [24, 40, 384], 384, 5, 1),
        LayerSpec::new("fc", K::FullyConnected, [1, 1, 1280], 3),
    ];
    for l in &layers {
        let m = map_layer(l, cfg.lanes, &cfg)?;
        println!("{:<7} {:>8} cycles  utilization {:.3}  reuse {:.1}", l.id, m.cycles(), m.utilization(), m.reuse);
    }
    let dw = &layers[2];
    for scheme in ReuseScheme::ALL {
        let m = map_depthwise(dw, cfg.lanes, scheme, &cfg)?;
        let bw = bandwidth_requirement(dw, scheme, &cfg)?;
        println!("dw {scheme:<18?} {:>7} cycles  {:>3} lanes busy  {bw:6.1} act words/cycle", m.cycles(), m.busy_lanes);
    }
    Ok(())
}
