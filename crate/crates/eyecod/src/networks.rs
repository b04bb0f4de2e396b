//! Builders for the shipped workloads: a RITNet-style dense U-Net for
//! segmentation, an FBNet-C-style search-space net for gaze estimation and
//! the assembled pipelines.

use crate::error::Result;
use crate::workload::{lens_baseline, LayerKind as K, LayerSpec, NetworkSpec, Padding, PipelineSpec, ReconDims};

struct Builder {
    layers: Vec<LayerSpec>,
}

/// A produced tensor: layer id and its output shape.
#[derive(Clone)]
struct T {
    id: String,
    dims: [usize; 3],
}

impl Builder {
    fn new() -> Self {
        Builder { layers: Vec::new() }
    }

    fn push(&mut self, l: LayerSpec) -> T {
        let dims = l.output().expect("builder layers are valid");
        let id = l.id.clone();
        self.layers.push(l);
        T { id, dims }
    }

    fn preds(x: Option<&T>) -> Vec<String> {
        x.map(|t| vec![t.id.clone()]).unwrap_or_default()
    }

    fn conv(&mut self, id: &str, kind: K, x: Option<&T>, input: [usize; 3], out_c: usize, k: usize, s: usize) -> T {
        let l = LayerSpec::conv(id, kind, input, out_c, k, s).with_pred(Self::preds(x));
        self.push(l)
    }

    fn on(&mut self, id: &str, kind: K, x: &T, out_c: usize, k: usize, s: usize) -> T {
        self.conv(id, kind, Some(x), x.dims, out_c, k, s)
    }

    fn concat(&mut self, id: &str, xs: &[&T]) -> T {
        let c: usize = xs.iter().map(|t| t.dims[2]).sum();
        let [h, w, _] = xs[0].dims;
        let l = LayerSpec::new(id, K::Concat, [h, w, c], c).with_pred(xs.iter().map(|t| t.id.clone()));
        self.push(l)
    }

    fn pool(&mut self, id: &str, x: &T, k: usize, s: usize) -> T {
        let mut l = LayerSpec::conv(id, K::Downsample, x.dims, x.dims[2], k, s).with_pred([x.id.clone()]);
        l.pad = Padding::Valid;
        self.push(l)
    }

    fn upsample(&mut self, id: &str, x: &T, f: usize) -> T {
        let l = LayerSpec::conv(id, K::Upsample, x.dims, x.dims[2], 1, f).with_pred([x.id.clone()]);
        self.push(l)
    }

    fn add(&mut self, id: &str, a: &T, b: &T) -> T {
        let l = LayerSpec::new(id, K::Elementwise, a.dims, a.dims[2]).with_pred([a.id.clone(), b.id.clone()]);
        self.push(l)
    }

    fn finish(self, name: &str) -> NetworkSpec {
        NetworkSpec::new(name, self.layers)
    }
}

/// Dense block: each 3x3 conv sees the concatenation of everything
/// produced before it in the block.
fn dense_block(b: &mut Builder, p: &str, x: &T, c: usize, k1: usize) -> T {
    let kind = if k1 == 1 { K::PointwiseConv } else { K::GenericConv };
    let x1 = b.on(&format!("{p}_conv1"), kind, x, c, k1, 1);
    let x21 = b.concat(&format!("{p}_cat1"), &[x, &x1]);
    let y = b.on(&format!("{p}_conv21"), K::PointwiseConv, &x21, c, 1, 1);
    let x22 = b.on(&format!("{p}_conv22"), K::GenericConv, &y, c, 3, 1);
    let x31 = b.concat(&format!("{p}_cat2"), &[&x21, &x22]);
    let y = b.on(&format!("{p}_conv31"), K::PointwiseConv, &x31, c, 1, 1);
    b.on(&format!("{p}_conv32"), K::GenericConv, &y, c, 3, 1)
}

fn up_block(b: &mut Builder, p: &str, x: &T, skip: &T, c: usize, out_c: usize) -> T {
    let up = b.upsample(&format!("{p}_up"), x, 2);
    let x0 = b.concat(&format!("{p}_cat0"), &[skip, &up]);
    let y = b.on(&format!("{p}_conv11"), K::PointwiseConv, &x0, c, 1, 1);
    let x1 = b.on(&format!("{p}_conv12"), K::GenericConv, &y, c, 3, 1);
    let x21 = b.concat(&format!("{p}_cat1"), &[&x0, &x1]);
    let y = b.on(&format!("{p}_conv21"), K::PointwiseConv, &x21, c, 1, 1);
    b.on(&format!("{p}_conv22"), K::GenericConv, &y, out_c, 3, 1)
}

/// RITNet-style segmentation net: a full-resolution stem, four dense
/// down blocks, three dense up blocks and a full-resolution 4-class head.
pub fn ritnet_like(h: usize, w: usize) -> NetworkSpec {
    let mut b = Builder::new();
    let stem = b.conv("stem", K::GenericConv, None, [h, w, 1], 32, 3, 1);
    let p0 = b.pool("pool0", &stem, 2, 2);
    let d1 = dense_block(&mut b, "down1", &p0, 16, 1);
    let p1 = b.pool("pool1", &d1, 2, 2);
    let d2 = dense_block(&mut b, "down2", &p1, 32, 3);
    let p2 = b.pool("pool2", &d2, 2, 2);
    let d3 = dense_block(&mut b, "down3", &p2, 32, 3);
    let p3 = b.pool("pool3", &d3, 2, 2);
    let d4 = dense_block(&mut b, "down4", &p3, 32, 3);
    let u3 = up_block(&mut b, "up3", &d4, &d3, 32, 32);
    let u2 = up_block(&mut b, "up2", &u3, &d2, 32, 32);
    let u1 = up_block(&mut b, "up1", &u2, &d1, 16, 32);
    let up = b.upsample("head_up", &u1, 2);
    let cat = b.concat("head_cat", &[&stem, &up]);
    b.on("head", K::PointwiseConv, &cat, 4, 1, 1);
    b.finish("ritnet_128")
}

/// One searched block: `expand -> depthwise -> project`, with a residual
/// add when shapes allow.
fn mb_block(b: &mut Builder, p: &str, x: &T, k: usize, e: usize, c: usize, s: usize) -> T {
    let hidden = x.dims[2] * e;
    let y = if e == 1 {
        x.clone()
    } else {
        b.on(&format!("{p}_expand"), K::PointwiseConv, x, hidden, 1, 1)
    };
    let y = b.on(&format!("{p}_dw"), K::DepthwiseConv, &y, hidden, k, s);
    let y = b.on(&format!("{p}_project"), K::PointwiseConv, &y, c, 1, 1);
    if s == 1 && x.dims[2] == c {
        b.add(&format!("{p}_add"), x, &y)
    } else {
        y
    }
}

/// A stage of identical blocks; the first one strides.
#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub blocks: usize,
    pub kernel: usize,
    pub expansion: usize,
    pub channels: usize,
    pub stride: usize,
}

const fn stage(blocks: usize, kernel: usize, expansion: usize, channels: usize, stride: usize) -> Stage {
    Stage {
        blocks,
        kernel,
        expansion,
        channels,
        stride,
    }
}

/// Stage table of the shipped gaze net. Depth sits at the middle
/// resolutions, which keeps depthwise work near a tenth of the MACs.
pub const GAZE_STAGES: &[Stage] = &[
    stage(1, 3, 1, 16, 1),
    stage(3, 3, 6, 64, 2),
    stage(3, 5, 6, 64, 1),
    stage(9, 5, 6, 128, 2),
    stage(8, 5, 6, 160, 2),
    stage(3, 5, 6, 256, 2),
];

/// FBNet-style gaze net on an `h x w` gray ROI: a two-layer 3x3 stem,
/// searched blocks, a 1x1 head, global pooling and a 3-way gaze regressor.
pub fn fbnet_like(h: usize, w: usize, stages: &[Stage]) -> NetworkSpec {
    let mut b = Builder::new();
    let x = b.conv("stem1", K::GenericConv, None, [h, w, 1], 48, 3, 2);
    let mut x = b.on("stem2", K::GenericConv, &x, 64, 3, 1);
    let mut n = 0;
    for st in stages {
        for i in 0..st.blocks {
            n += 1;
            let s = if i == 0 { st.stride } else { 1 };
            x = mb_block(&mut b, &format!("b{n}"), &x, st.kernel, st.expansion, st.channels, s);
        }
    }
    let x = b.on("head_conv", K::PointwiseConv, &x, 1280, 1, 1);
    let k = x.dims[0].min(x.dims[1]);
    let x = b.pool("pool", &x, k, k);
    b.conv("fc", K::FullyConnected, Some(&x), x.dims, 3, 1, 1);
    b.finish(&format!("fbnet_c100_{h}x{w}"))
}

pub fn segmentation_net() -> NetworkSpec {
    ritnet_like(128, 128)
}

pub fn gaze_net() -> NetworkSpec {
    fbnet_like(96, 160, GAZE_STAGES)
}

/// Full frame the lens-camera baseline runs gaze estimation on.
pub const LENS_FRAME: [usize; 2] = [256, 256];

/// Sensor and scene sizes of the reconstruction stage.
pub const RECON_DIMS: ReconDims = ReconDims {
    scene: [256, 256],
    measurement: [640, 640],
};

/// Predict-then-focus pipeline: segmentation every 50 frames, ROI gaze
/// estimation and reconstruction every frame.
pub fn shipped_pipeline() -> PipelineSpec {
    let mut p = PipelineSpec::new(segmentation_net(), gaze_net(), Some(RECON_DIMS), 50);
    p.name = "predict_then_focus".into();
    p
}

/// Lens-camera baseline: no reconstruction, gaze on the full 256x256 frame.
pub fn lens_pipeline() -> PipelineSpec {
    lens_baseline(&shipped_pipeline(), LENS_FRAME).expect("shipped pipeline resizes")
}

/// Validates both shipped networks.
pub fn validate_shipped() -> Result<()> {
    shipped_pipeline().validate()?;
    lens_pipeline().validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::network_macs;

    #[test]
    fn shipped_networks_validate() {
        validate_shipped().unwrap();
    }

    #[test]
    fn lens_gaze_is_the_same_net_at_full_frame() {
        let lens = lens_pipeline();
        let direct = fbnet_like(256, 256, GAZE_STAGES);
        assert_eq!(lens.gaze_net.layers, direct.layers);
        assert_eq!(lens.gaze_net.name, direct.name);
        assert!(lens.recon.is_none());
    }

    #[test]
    fn totals_are_near_targets() {
        let seg = segmentation_net().total_macs().unwrap() as f64;
        let gaze = gaze_net().total_macs().unwrap() as f64;
        assert!((seg / 140e6 - 1.0).abs() < 0.1, "seg {seg}");
        assert!((gaze / 1.06e9 - 1.0).abs() < 0.1, "gaze {gaze}");
    }

    #[test]
    fn gaze_net_uses_every_searched_kind() {
        let b = network_macs(&gaze_net()).unwrap();
        for k in [K::GenericConv, K::PointwiseConv, K::DepthwiseConv, K::FullyConnected] {
            assert!(b.get(k) > 0.0, "{k}");
        }
    }

    #[test]
    fn stage_table_strides_to_a_small_map() {
        let net = gaze_net();
        let head = net.layer("head_conv").unwrap();
        assert_eq!([head.in_h(), head.in_w()], [3, 5]);
    }
}
