//! Typed layer graphs for the segmentation net, the gaze net and the
//! reconstruction stage, plus MAC accounting.
//!
//! Operation counts follow the convention that a reported "FLOP" is one
//! multiply-accumulate. Every count in this crate is a MAC count.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    GenericConv,
    PointwiseConv,
    DepthwiseConv,
    FullyConnected,
    Matmul,
    Elementwise,
    Upsample,
    Downsample,
    Concat,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::GenericConv,
        LayerKind::PointwiseConv,
        LayerKind::DepthwiseConv,
        LayerKind::FullyConnected,
        LayerKind::Matmul,
        LayerKind::Elementwise,
        LayerKind::Upsample,
        LayerKind::Downsample,
        LayerKind::Concat,
    ];

    pub fn is_conv(self) -> bool {
        matches!(
            self,
            LayerKind::GenericConv | LayerKind::PointwiseConv | LayerKind::DepthwiseConv
        )
    }

    /// Kinds that occupy MAC lanes.
    pub fn is_compute(self) -> bool {
        !matches!(
            self,
            LayerKind::Upsample | LayerKind::Downsample | LayerKind::Concat
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::GenericConv => "generic_conv",
            LayerKind::PointwiseConv => "pointwise_conv",
            LayerKind::DepthwiseConv => "depthwise_conv",
            LayerKind::FullyConnected => "fully_connected",
            LayerKind::Matmul => "matmul",
            LayerKind::Elementwise => "elementwise",
            LayerKind::Upsample => "upsample",
            LayerKind::Downsample => "downsample",
            LayerKind::Concat => "concat",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

/// One node of a workload graph.
///
/// `input` is `[h, w, c]`. For `upsample` the stride field holds the
/// upsampling factor. A `matmul` of `(m x n)·(n x p)` is written with
/// `input = [1, m, n]` and `out_c = p`, i.e. a point-wise layer whose
/// batch runs along the width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    #[serde(rename = "in")]
    pub input: [usize; 3],
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: Padding,
    #[serde(default)]
    pub pred: Vec<String>,
}

impl LayerSpec {
    pub fn new(id: impl Into<String>, kind: LayerKind, input: [usize; 3], out_c: usize) -> Self {
        LayerSpec {
            id: id.into(),
            kind,
            input,
            out_c,
            k: 1,
            stride: 1,
            pad: Padding::Same,
            pred: Vec::new(),
        }
    }

    pub fn conv(
        id: impl Into<String>,
        kind: LayerKind,
        input: [usize; 3],
        out_c: usize,
        k: usize,
        stride: usize,
    ) -> Self {
        LayerSpec {
            k,
            stride,
            ..LayerSpec::new(id, kind, input, out_c)
        }
    }

    pub fn with_pred<S: Into<String>>(mut self, pred: impl IntoIterator<Item = S>) -> Self {
        self.pred = pred.into_iter().map(Into::into).collect();
        self
    }

    pub fn in_h(&self) -> usize {
        self.input[0]
    }
    pub fn in_w(&self) -> usize {
        self.input[1]
    }
    pub fn in_c(&self) -> usize {
        self.input[2]
    }

    /// Output `[h, w, c]`.
    pub fn output(&self) -> Result<[usize; 3]> {
        let [h, w, c] = self.input;
        let bad = |msg: String| Error::validation(format!("layer {}", self.id), msg);
        if h == 0 || w == 0 || c == 0 || self.out_c == 0 {
            return Err(bad("dimensions must be positive".into()));
        }
        for (field, v) in [("k", self.k), ("stride", self.stride)] {
            if v == 0 {
                let path = format!("layer {} field {field}", self.id);
                return Err(Error::validation(path, "kernel and stride must be >= 1"));
            }
        }
        let window = |n: usize| -> Result<usize> {
            match self.pad {
                Padding::Same => Ok(n.div_ceil(self.stride)),
                Padding::Valid if n >= self.k => Ok((n - self.k) / self.stride + 1),
                Padding::Valid => Err(bad(format!("input extent {n} smaller than kernel {}", self.k))),
            }
        };
        let out = match self.kind {
            LayerKind::GenericConv | LayerKind::PointwiseConv | LayerKind::DepthwiseConv => {
                [window(h)?, window(w)?, self.out_c]
            }
            LayerKind::Downsample => [window(h)?, window(w)?, self.out_c],
            LayerKind::Upsample => [h * self.stride, w * self.stride, self.out_c],
            LayerKind::FullyConnected => [1, 1, self.out_c],
            LayerKind::Matmul | LayerKind::Elementwise | LayerKind::Concat => [h, w, self.out_c],
        };
        Ok(out)
    }

    /// Checks the per-kind invariants that do not depend on the graph.
    pub fn validate_local(&self) -> Result<()> {
        let out = self.output()?;
        let bad = |field: &str, msg: String| {
            Error::validation(format!("layer {} field {field}", self.id), msg)
        };
        match self.kind {
            LayerKind::DepthwiseConv if self.out_c != self.in_c() => {
                return Err(bad("out_c", format!("depthwise requires out_c == in_c ({} != {})", self.out_c, self.in_c())));
            }
            LayerKind::PointwiseConv if self.k != 1 => {
                return Err(bad("k", format!("pointwise requires k == 1, got {}", self.k)));
            }
            LayerKind::PointwiseConv | LayerKind::FullyConnected | LayerKind::Matmul
                if self.k != 1 =>
            {
                return Err(bad("k", format!("{} requires k == 1, got {}", self.kind, self.k)));
            }
            LayerKind::Matmul | LayerKind::Elementwise | LayerKind::Concat | LayerKind::FullyConnected
                if self.stride != 1 =>
            {
                return Err(bad("stride", format!("{} requires stride 1", self.kind)));
            }
            LayerKind::Elementwise | LayerKind::Upsample | LayerKind::Downsample
                if self.out_c != self.in_c() =>
            {
                return Err(bad("out_c", format!("{} preserves channels", self.kind)));
            }
            LayerKind::Concat if self.pred.len() < 2 => {
                return Err(bad("pred", "concat needs at least two predecessors".into()));
            }
            LayerKind::Concat if self.out_c != self.in_c() => {
                return Err(bad("out_c", "concat out_c must equal the summed input channels".into()));
            }
            LayerKind::Upsample if self.k != 1 => {
                return Err(bad("k", "upsample uses k = 1".into()));
            }
            _ => {}
        }
        if out.contains(&0) {
            return Err(bad("in", "output dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        self.output().map(|o| o[0]).unwrap_or(0)
    }
    pub fn out_w(&self) -> usize {
        self.output().map(|o| o[1]).unwrap_or(0)
    }
}

/// MAC count of a single layer. Data-movement kinds count zero.
pub fn layer_macs(layer: &LayerSpec) -> Result<u64> {
    layer.validate_local()?;
    let [ho, wo, _] = layer.output()?;
    let (ho, wo) = (ho as u64, wo as u64);
    let [h, w, c] = layer.input.map(|d| d as u64);
    let out_c = layer.out_c as u64;
    let k2 = (layer.k * layer.k) as u64;
    Ok(match layer.kind {
        LayerKind::GenericConv => ho * wo * out_c * c * k2,
        LayerKind::PointwiseConv => ho * wo * out_c * c,
        LayerKind::DepthwiseConv => ho * wo * c * k2,
        LayerKind::FullyConnected => h * w * c * out_c,
        LayerKind::Matmul => h * w * c * out_c,
        LayerKind::Elementwise => ho * wo * c,
        LayerKind::Upsample | LayerKind::Downsample | LayerKind::Concat => 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec {
            name: name.into(),
            layers,
        }
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self::new(name, Vec::new())
    }

    pub fn layer(&self, id: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    /// Validates ids, ordering (predecessors must appear earlier, which makes
    /// the list a topological order) and shape chaining.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, [usize; 3]> = HashMap::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let ptr = |field: &str| format!("/layers/{i}/{field}");
            if layer.id.is_empty() {
                return Err(Error::validation(ptr("id"), "empty layer id"));
            }
            if seen.contains_key(layer.id.as_str()) {
                return Err(Error::validation(ptr("id"), format!("duplicate layer id {:?}", layer.id)));
            }
            layer.validate_local().map_err(|e| match e {
                Error::Validation { msg, path } => {
                    let field = path.rsplit(' ').next().unwrap_or("in").to_string();
                    let field = if path.contains("field") { field } else { "in".to_string() };
                    Error::validation(ptr(&field), format!("layer {:?}: {msg}", layer.id))
                }
                other => other,
            })?;
            let mut pred_out = Vec::with_capacity(layer.pred.len());
            for (j, p) in layer.pred.iter().enumerate() {
                match seen.get(p.as_str()) {
                    Some(o) => pred_out.push(*o),
                    None => {
                        return Err(Error::validation(
                            format!("/layers/{i}/pred/{j}"),
                            format!("layer {:?} references unknown predecessor {:?}", layer.id, p),
                        ))
                    }
                }
            }
            match layer.kind {
                LayerKind::Concat => {
                    let [h, w, _] = layer.input;
                    if pred_out.iter().any(|o| o[0] != h || o[1] != w) {
                        return Err(Error::validation(
                            ptr("in"),
                            format!("layer {:?}: concat inputs must share spatial dims", layer.id),
                        ));
                    }
                    let c: usize = pred_out.iter().map(|o| o[2]).sum();
                    if c != layer.in_c() {
                        return Err(Error::validation(
                            ptr("in"),
                            format!("layer {:?}: concat channels {} != sum of inputs {c}", layer.id, layer.in_c()),
                        ));
                    }
                }
                LayerKind::FullyConnected => {
                    for o in &pred_out {
                        if o[0] * o[1] * o[2] != layer.input.iter().product::<usize>() {
                            return Err(Error::validation(
                                ptr("in"),
                                format!("layer {:?}: input size does not match predecessor", layer.id),
                            ));
                        }
                    }
                }
                _ => {
                    for o in &pred_out {
                        if *o != layer.input {
                            return Err(Error::validation(
                                ptr("in"),
                                format!(
                                    "layer {:?}: input {:?} does not match predecessor output {:?}",
                                    layer.id, layer.input, o
                                ),
                            ));
                        }
                    }
                }
            }
            seen.insert(layer.id.as_str(), layer.output()?);
        }
        Ok(())
    }

    pub fn total_macs(&self) -> Result<u64> {
        self.layers.iter().map(layer_macs).sum()
    }
}

/// Total MACs and their split over layer kinds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MacBreakdown {
    pub total: f64,
    pub by_kind: BTreeMap<LayerKind, f64>,
}

impl MacBreakdown {
    pub fn add(&mut self, kind: LayerKind, macs: f64) {
        self.total += macs;
        *self.by_kind.entry(kind).or_insert(0.0) += macs;
    }

    pub fn merge_scaled(&mut self, other: &MacBreakdown, scale: f64) {
        for (k, v) in &other.by_kind {
            self.add(*k, v * scale);
        }
    }

    pub fn get(&self, kind: LayerKind) -> f64 {
        self.by_kind.get(&kind).copied().unwrap_or(0.0)
    }

    /// Fractions over compute kinds; empty when the total is zero.
    pub fn fractions(&self) -> BTreeMap<LayerKind, f64> {
        if self.total <= 0.0 {
            return BTreeMap::new();
        }
        self.by_kind
            .iter()
            .filter(|(k, _)| k.is_compute())
            .map(|(k, v)| (*k, v / self.total))
            .collect()
    }
}

pub fn network_macs(net: &NetworkSpec) -> Result<MacBreakdown> {
    net.validate()?;
    layers_breakdown(&net.layers)
}

fn layers_breakdown(layers: &[LayerSpec]) -> Result<MacBreakdown> {
    let mut b = MacBreakdown::default();
    for l in layers {
        let m = layer_macs(l)?;
        if l.kind.is_compute() {
            b.add(l.kind, m as f64);
        }
    }
    Ok(b)
}

/// Scene and sensor sizes of the reconstruction stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconDims {
    pub scene: [usize; 2],
    pub measurement: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolutions {
    pub seg: [usize; 2],
    pub gaze_roi: [usize; 2],
}

/// The predict-then-focus workload: segmentation every `seg_period` frames,
/// gaze estimation and reconstruction every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub name: String,
    pub seg_file: String,
    pub gaze_file: String,
    pub seg_net: NetworkSpec,
    pub gaze_net: NetworkSpec,
    pub recon: Option<ReconDims>,
    pub recon_layers: Vec<LayerSpec>,
    pub seg_period_frames: usize,
    pub resolutions: Resolutions,
    pub optical_first_layer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineFile {
    name: String,
    seg_net: String,
    gaze_net: String,
    recon: Option<ReconDims>,
    seg_period: usize,
    resolutions: Resolutions,
    optical_first_layer: bool,
}

impl PipelineSpec {
    pub fn new(seg_net: NetworkSpec, gaze_net: NetworkSpec, recon: Option<ReconDims>, seg_period: usize) -> Self {
        let recon_layers = recon.map(crate::optics::recon_layer_specs).unwrap_or_default();
        PipelineSpec {
            name: "pipeline".into(),
            seg_file: format!("{}.json", seg_net.name),
            gaze_file: format!("{}.json", gaze_net.name),
            seg_net,
            gaze_net,
            recon,
            recon_layers,
            seg_period_frames: seg_period,
            resolutions: Resolutions {
                seg: [128, 128],
                gaze_roi: [96, 160],
            },
            optical_first_layer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seg_period_frames == 0 {
            return Err(Error::validation("/seg_period", "seg_period must be >= 1"));
        }
        let r = self.resolutions;
        if r.seg.iter().chain(r.gaze_roi.iter()).any(|&d| d == 0) {
            return Err(Error::validation("/resolutions", "resolutions must be positive"));
        }
        self.seg_net.validate()?;
        self.gaze_net.validate()?;
        for l in &self.recon_layers {
            l.validate_local()?;
        }
        Ok(())
    }

    /// Networks as actually executed, with the optical first layer removed
    /// from the segmentation net when enabled.
    pub fn effective_seg(&self) -> Result<NetworkSpec> {
        if self.optical_first_layer && !self.seg_net.layers.is_empty() {
            Ok(apply_optical_first_layer(&self.seg_net, None, 8)?.0)
        } else {
            Ok(self.seg_net.clone())
        }
    }

    pub fn recon_macs(&self) -> Result<u64> {
        self.recon_layers.iter().map(layer_macs).sum()
    }
}

/// Per-frame MACs with segmentation amortized over its period.
pub fn amortized_frame_macs(p: &PipelineSpec) -> Result<f64> {
    Ok(amortized_breakdown(p)?.total)
}

/// Per-kind split of the amortized per-frame MACs.
pub fn amortized_breakdown(p: &PipelineSpec) -> Result<MacBreakdown> {
    p.validate()?;
    let n = p.seg_period_frames as f64;
    let mut b = MacBreakdown::default();
    b.merge_scaled(&network_macs(&p.gaze_net)?, 1.0);
    b.merge_scaled(&layers_breakdown(&p.recon_layers)?, 1.0);
    b.merge_scaled(&network_macs(&p.effective_seg()?)?, 1.0 / n);
    Ok(b)
}

/// What moving the first convolution into the optics saves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpticalSavings {
    pub removed_layer: String,
    pub removed_macs: u64,
    /// Bytes sent camera -> processor without the optical layer.
    pub raw_bytes: u64,
    /// Bytes sent with it: the first layer's output feature map.
    pub encoded_bytes: u64,
    /// `encoded_bytes / raw_bytes`.
    pub traffic_ratio: f64,
}

/// Moves the first layer of `net` (which must be a convolution on the
/// network input) into the optics: it becomes a zero-MAC pass-through of
/// the encoded frame the sensor now delivers.
///
/// `raw_input` is the raw sensor frame `[h, w, c]`; it defaults to the
/// layer's own input when the camera already delivers that resolution.
pub fn apply_optical_first_layer(
    net: &NetworkSpec,
    raw_input: Option<[usize; 3]>,
    precision_bits: u32,
) -> Result<(NetworkSpec, OpticalSavings)> {
    let first = net
        .layers
        .first()
        .ok_or_else(|| Error::validation("/layers", "network has no layers"))?;
    if !first.kind.is_conv() || !first.pred.is_empty() {
        return Err(Error::validation(
            "/layers/0/kind",
            format!("first layer {:?} is not an input convolution", first.id),
        ));
    }
    let removed_macs = layer_macs(first)?;
    let out = first.output()?;
    let raw = raw_input.unwrap_or(first.input);
    let bits = precision_bits as u64;
    let raw_bytes = (raw.iter().product::<usize>() as u64 * bits).div_ceil(8);
    let encoded_bytes = (out.iter().product::<usize>() as u64 * bits).div_ceil(8);

    // the sensor now delivers the encoded feature map; a zero-MAC
    // pass-through keeps the layer id so every consumer stays wired
    let sensor = LayerSpec::conv(first.id.clone(), LayerKind::Upsample, out, out[2], 1, 1);
    let layers = std::iter::once(sensor).chain(net.layers[1..].iter().cloned()).collect();
    let savings = OpticalSavings {
        removed_layer: first.id.clone(),
        removed_macs,
        raw_bytes,
        encoded_bytes,
        traffic_ratio: encoded_bytes as f64 / raw_bytes as f64,
    };
    Ok((NetworkSpec::new(net.name.clone(), layers), savings))
}

/// Re-derives every layer's input shape for a new network input size.
/// A global pool (a downsample whose window spans the smaller input side)
/// keeps spanning it.
pub fn resize_network(net: &NetworkSpec, h: usize, w: usize) -> Result<NetworkSpec> {
    net.validate()?;
    let mut out: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    let mut layers = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        let mut l = l.clone();
        let input = if l.pred.is_empty() {
            [h, w, l.in_c()]
        } else {
            let first = out[&l.pred[0]];
            let c = if l.kind == LayerKind::Concat {
                l.pred.iter().map(|p| out[p][2]).sum()
            } else {
                first[2]
            };
            [first[0], first[1], c]
        };
        let global = l.kind == LayerKind::Downsample && l.k == l.stride && l.k == l.in_h().min(l.in_w());
        l.input = input;
        if global {
            l.k = input[0].min(input[1]);
            l.stride = l.k;
        }
        if l.kind == LayerKind::Concat {
            l.out_c = input[2];
        }
        l.validate_local()?;
        out.insert(l.id.clone(), l.output()?);
        layers.push(l);
    }
    let name = net.name.clone();
    let old = net.layers.first().map(|l| format!("{}x{}", l.in_h(), l.in_w()));
    let name = match old {
        Some(o) if name.contains(&o) => name.replace(&o, &format!("{h}x{w}")),
        _ => format!("{name}_{h}x{w}"),
    };
    Ok(NetworkSpec::new(name, layers))
}

/// Lens-camera baseline of a pipeline: no reconstruction and gaze estimation
/// on the full `frame` instead of the ROI.
pub fn lens_baseline(p: &PipelineSpec, frame: [usize; 2]) -> Result<PipelineSpec> {
    let gaze = resize_network(&p.gaze_net, frame[0], frame[1])?;
    let mut lens = PipelineSpec::new(p.seg_net.clone(), gaze, None, p.seg_period_frames);
    lens.name = format!("{}_lens", p.name);
    lens.resolutions = Resolutions {
        seg: p.resolutions.seg,
        gaze_roi: frame,
    };
    lens.optical_first_layer = false;
    lens.seg_file = p.seg_file.clone();
    Ok(lens)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    crate::io::write_atomic(path, text.as_bytes())
}

/// Parses a network from a JSON value, reporting schema errors with a
/// JSON pointer.
pub fn network_from_value(v: &Value) -> Result<NetworkSpec> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::validation("", "expected an object"))?;
    for key in obj.keys() {
        if key != "name" && key != "layers" {
            return Err(Error::validation(format!("/{key}"), "unknown field"));
        }
    }
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::validation("/name", "missing or non-string name"))?;
    let layers_v = obj
        .get("layers")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::validation("/layers", "missing or non-array layers"))?;
    let mut layers = Vec::with_capacity(layers_v.len());
    for (i, lv) in layers_v.iter().enumerate() {
        let id = lv.get("id").and_then(Value::as_str).unwrap_or("?");
        let layer: LayerSpec = serde_json::from_value(lv.clone()).map_err(|e| {
            let field = schema_field(lv);
            Error::validation(format!("/layers/{i}{field}"), format!("layer {id:?}: {e}"))
        })?;
        layers.push(layer);
    }
    let net = NetworkSpec::new(name, layers);
    net.validate()?;
    Ok(net)
}

// Best-effort pointer suffix for the first malformed field of a layer object.
fn schema_field(lv: &Value) -> String {
    let Some(obj) = lv.as_object() else {
        return String::new();
    };
    let usize_field = |k: &str| obj.get(k).map(|v| v.as_u64().is_some()).unwrap_or(false);
    for k in ["out_c", "k", "stride"] {
        if !usize_field(k) {
            return format!("/{k}");
        }
    }
    match obj.get("in").and_then(Value::as_array) {
        Some(a) if a.len() == 3 && a.iter().all(|x| x.as_u64().is_some()) => {}
        _ => return "/in".into(),
    }
    for k in obj.keys() {
        if !["id", "kind", "in", "out_c", "k", "stride", "pad", "pred"].contains(&k.as_str()) {
            return format!("/{k}");
        }
    }
    if serde_json::from_value::<LayerKind>(obj.get("kind").cloned().unwrap_or(Value::Null)).is_err() {
        return "/kind".into();
    }
    if serde_json::from_value::<Padding>(obj.get("pad").cloned().unwrap_or(Value::Null)).is_err() {
        return "/pad".into();
    }
    String::new()
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let v = read_json(path)?;
    network_from_value(&v).map_err(|e| match e {
        Error::Validation { path: p, msg } => Error::Validation {
            path: format!("{}#{p}", path.display()),
            msg,
        },
        other => other,
    })
}

pub fn network_to_json(net: &NetworkSpec) -> String {
    let mut s = serde_json::to_string_pretty(net).expect("network serializes");
    s.push('\n');
    s
}

pub fn save_network(net: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &network_to_json(net))
}

/// Loads a pipeline file; network paths inside it are resolved relative to
/// the pipeline file's directory.
pub fn load_workload(path: impl AsRef<Path>) -> Result<PipelineSpec> {
    let path = path.as_ref();
    let v = read_json(path)?;
    let file: PipelineFile = serde_json::from_value(v).map_err(|e| Error::Validation {
        path: format!("{}#/", path.display()),
        msg: e.to_string(),
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let seg_net = load_network(dir.join(&file.seg_net))?;
    let gaze_net = load_network(dir.join(&file.gaze_net))?;
    let recon_layers = file.recon.map(crate::optics::recon_layer_specs).unwrap_or_default();
    let p = PipelineSpec {
        name: file.name,
        seg_file: file.seg_net,
        gaze_file: file.gaze_net,
        seg_net,
        gaze_net,
        recon: file.recon,
        recon_layers,
        seg_period_frames: file.seg_period,
        resolutions: file.resolutions,
        optical_first_layer: file.optical_first_layer,
    };
    p.validate().map_err(|e| match e {
        Error::Validation { path: p, msg } => Error::Validation {
            path: format!("{}#{p}", path.display()),
            msg,
        },
        other => other,
    })?;
    Ok(p)
}

pub fn pipeline_to_json(p: &PipelineSpec) -> String {
    let file = PipelineFile {
        name: p.name.clone(),
        seg_net: p.seg_file.clone(),
        gaze_net: p.gaze_file.clone(),
        recon: p.recon,
        seg_period: p.seg_period_frames,
        resolutions: p.resolutions,
        optical_first_layer: p.optical_first_layer,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("pipeline serializes");
    s.push('\n');
    s
}

/// Writes the pipeline file and both network files next to it.
pub fn save_workload(p: &PipelineSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    save_network(&p.seg_net, dir.join(&p.seg_file))?;
    save_network(&p.gaze_net, dir.join(&p.gaze_file))?;
    write_atomic(path, &pipeline_to_json(p))
}
