//! Layer-to-lane mapping, reuse schemes for depth-wise layers, input
//! feature-wise partition and the activation buffer address layout.
//!
//! Timing unit is the round: `K` cycles during which every busy lane streams
//! one input row segment against one weight row, keeping its 8 MACs busy on
//! up to 8 adjacent output pixels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::HardwareConfig;
use crate::tensor::DenseTensor;
use crate::workload::{layer_macs, LayerKind, LayerSpec, NetworkSpec, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReuseScheme {
    RowWise,
    ColumnWise,
    DeeperRowWise,
    ColumnPlusDeeper,
}

impl ReuseScheme {
    pub const ALL: [ReuseScheme; 4] = [
        ReuseScheme::RowWise,
        ReuseScheme::ColumnWise,
        ReuseScheme::DeeperRowWise,
        ReuseScheme::ColumnPlusDeeper,
    ];

    pub fn column(self) -> bool {
        matches!(self, ReuseScheme::ColumnWise | ReuseScheme::ColumnPlusDeeper)
    }

    pub fn deeper(self) -> bool {
        matches!(self, ReuseScheme::DeeperRowWise | ReuseScheme::ColumnPlusDeeper)
    }
}

/// Geometry the mapper needs; either a whole layer or one partition tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapShape {
    pub kind: LayerKind,
    pub ho: usize,
    pub wo: usize,
    /// Flattened input size for fully-connected layers.
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub n_inputs: usize,
}

impl MapShape {
    pub fn from_layer(layer: &LayerSpec) -> Result<Self> {
        layer.validate_local()?;
        let [ho, wo, _] = layer.output()?;
        let in_c = match layer.kind {
            LayerKind::FullyConnected => layer.input.iter().product(),
            _ => layer.in_c(),
        };
        Ok(MapShape {
            kind: layer.kind,
            ho,
            wo,
            in_c,
            out_c: layer.out_c,
            k: layer.k,
            stride: layer.stride,
            n_inputs: layer.pred.len().max(1),
        })
    }

    /// Same layer restricted to an `ho x wo` output region.
    pub fn with_output(mut self, ho: usize, wo: usize) -> Self {
        if self.kind != LayerKind::FullyConnected {
            self.ho = ho;
            self.wo = wo;
        }
        self
    }

    /// MACs of this shape under the layer-count convention.
    pub fn macs(&self) -> u64 {
        let (ho, wo) = (self.ho as u64, self.wo as u64);
        let (ci, co, k2) = (self.in_c as u64, self.out_c as u64, (self.k * self.k) as u64);
        match self.kind {
            LayerKind::GenericConv => ho * wo * co * ci * k2,
            LayerKind::PointwiseConv | LayerKind::Matmul => ho * wo * co * ci,
            LayerKind::DepthwiseConv => ho * wo * ci * k2,
            LayerKind::FullyConnected => ci * co,
            LayerKind::Elementwise => ho * wo * ci,
            _ => 0,
        }
    }

    fn round_cycles(&self) -> usize {
        match self.kind {
            LayerKind::GenericConv | LayerKind::DepthwiseConv => self.k,
            _ => 1,
        }
    }

    fn positions_flattened(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::PointwiseConv | LayerKind::Matmul | LayerKind::FullyConnected | LayerKind::Elementwise
        )
    }

    /// Output row segments of `macs_per_lane` pixels.
    pub fn row_units(&self, p: usize) -> usize {
        match self.kind {
            LayerKind::FullyConnected => 1,
            _ if self.positions_flattened() => (self.ho * self.wo).div_ceil(p),
            _ => self.ho * self.wo.div_ceil(p),
        }
    }

    fn segments_per_row(&self, p: usize) -> usize {
        if self.positions_flattened() {
            self.row_units(p)
        } else {
            self.wo.div_ceil(p)
        }
    }
}

/// Lanes given to a layer and how they are organized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneAssignment {
    pub layer: String,
    pub lane_start: usize,
    pub lanes: usize,
    /// Lanes of one replica group; a multiple of 16 whenever 16 lanes exist.
    pub channel_tile: usize,
    pub replicas: usize,
    pub rows_per_round: usize,
    pub scheme: ReuseScheme,
}

impl LaneAssignment {
    pub fn lane_indices(&self) -> std::ops::Range<usize> {
        self.lane_start..self.lane_start + self.lanes
    }
}

/// Steady-state cost of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundProfile {
    pub cycles_per_round: usize,
    pub act_rows_fetched: usize,
    pub weight_words: usize,
    pub busy_macs: usize,
}

/// One sweep over a slice of output channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub channel_start: usize,
    /// Lanes per replica group (one output channel per lane).
    pub group: usize,
    pub replicas: usize,
    pub rounds: u64,
}

/// One lane's work in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unit {
    /// Output channel (the channel itself for depth-wise and element-wise).
    pub ch: usize,
    /// Index of the output row segment.
    pub row_unit: usize,
    pub in_ch: usize,
    pub kh: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMapping {
    pub assignment: LaneAssignment,
    pub profile: RoundProfile,
    pub shape: MapShape,
    pub lanes: usize,
    pub macs_per_lane: usize,
    pub passes: Vec<Pass>,
    pub rounds: u64,
    /// Lanes served by one fetched act row.
    pub reuse: f64,
    /// Exact act rows fetched per full round.
    pub rows_per_round: f64,
    pub macs: u64,
    /// Total lane-rounds, the work units of the layer.
    pub units: u64,
    /// Lanes that are busy in a full round.
    pub busy_lanes: usize,
}

impl LayerMapping {
    pub fn cycles(&self) -> u64 {
        self.rounds * self.shape.round_cycles() as u64
    }

    pub fn round_cycles(&self) -> usize {
        self.shape.round_cycles()
    }

    /// Busy MACs over the MACs of the lanes assigned.
    pub fn utilization(&self) -> f64 {
        let c = self.cycles();
        if c == 0 {
            return 0.0;
        }
        self.macs as f64 / (c as f64 * (self.lanes * self.macs_per_lane) as f64)
    }

    fn empty(layer: &str, shape: MapShape, lanes: usize, cfg: &HardwareConfig) -> Self {
        LayerMapping {
            assignment: LaneAssignment {
                layer: layer.to_string(),
                lane_start: 0,
                lanes: 0,
                channel_tile: cfg.channel_tile,
                replicas: 1,
                rows_per_round: 0,
                scheme: ReuseScheme::RowWise,
            },
            profile: RoundProfile {
                cycles_per_round: shape.round_cycles(),
                act_rows_fetched: 0,
                weight_words: 0,
                busy_macs: 0,
            },
            shape,
            lanes,
            macs_per_lane: cfg.macs_per_lane,
            passes: Vec::new(),
            rounds: 0,
            reuse: 1.0,
            rows_per_round: 0.0,
            macs: 0,
            units: 0,
            busy_lanes: 0,
        }
    }

    /// Visits every lane-round in execution order.
    pub fn for_each_unit(&self, mut f: impl FnMut(u64, usize, Unit)) {
        let s = &self.shape;
        let p = self.macs_per_lane;
        match s.kind {
            LayerKind::GenericConv | LayerKind::PointwiseConv | LayerKind::Matmul | LayerKind::FullyConnected => {
                let ru = s.row_units(p);
                let kk = s.round_cycles();
                let mut round = 0u64;
                for pass in &self.passes {
                    let steps = ru.div_ceil(pass.replicas);
                    for step in 0..steps {
                        for ci in 0..s.in_c {
                            for kh in 0..kk {
                                for lane in 0..pass.group * pass.replicas {
                                    let rep = lane / pass.group;
                                    let ch = pass.channel_start + lane % pass.group;
                                    let row_unit = step * pass.replicas + rep;
                                    if ch < s.out_c && row_unit < ru {
                                        f(round, lane, Unit { ch, row_unit, in_ch: ci, kh });
                                    }
                                }
                                round += 1;
                            }
                        }
                    }
                }
            }
            LayerKind::DepthwiseConv | LayerKind::Elementwise => {
                let b = self.busy_lanes as u64;
                let mut u = 0u64;
                self.for_each_channel_unit(|unit| {
                    f(u / b, (u % b) as usize, unit);
                    u += 1;
                });
            }
            _ => {}
        }
    }

    fn for_each_channel_unit(&self, mut f: impl FnMut(Unit)) {
        let s = &self.shape;
        let p = self.macs_per_lane;
        if s.kind == LayerKind::Elementwise {
            for ch in 0..s.in_c {
                for row_unit in 0..s.row_units(p) {
                    f(Unit { ch, row_unit, in_ch: ch, kh: 0 });
                }
            }
            return;
        }
        let segs = s.segments_per_row(p);
        if self.assignment.scheme.column() {
            // group the weight rows that consume the same fetched input row
            let k = s.k as isize;
            let st = s.stride as isize;
            let span = (s.ho as isize - 1) * st + k;
            for ch in 0..s.in_c {
                for r in 0..span {
                    for kh in 0..k {
                        let o = r - kh;
                        if o >= 0 && o % st == 0 && ((o / st) as usize) < s.ho {
                            for seg in 0..segs {
                                let row_unit = (o / st) as usize * segs + seg;
                                f(Unit { ch, row_unit, in_ch: ch, kh: kh as usize });
                            }
                        }
                    }
                }
            }
        } else {
            for ch in 0..s.in_c {
                for row_unit in 0..s.ho * segs {
                    for kh in 0..s.k {
                        f(Unit { ch, row_unit, in_ch: ch, kh });
                    }
                }
            }
        }
    }
}

/// Act rows the input side may deliver per round in the planned design
/// (the two interleaved buffer groups).
pub fn planned_rows(cfg: &HardwareConfig) -> usize {
    2 * cfg.rows_per_fetch
}

fn check_lanes(lanes: usize) -> Result<()> {
    if lanes == 0 {
        return Err(Error::Parameter("zero lanes available".into()));
    }
    Ok(())
}

/// Output-channel tiling with spatial replication for generic, point-wise,
/// matmul and fully-connected layers.
pub fn map_generic_pointwise(layer: &LayerSpec, lanes: usize, cfg: &HardwareConfig) -> Result<LayerMapping> {
    let shape = MapShape::from_layer(layer)?;
    map_generic_shape(&layer.id, shape, lanes, cfg)
}

pub fn map_generic_shape(id: &str, s: MapShape, lanes: usize, cfg: &HardwareConfig) -> Result<LayerMapping> {
    check_lanes(lanes)?;
    if !matches!(
        s.kind,
        LayerKind::GenericConv | LayerKind::PointwiseConv | LayerKind::Matmul | LayerKind::FullyConnected
    ) {
        return Err(Error::Parameter(format!("{} is not a generic/point-wise kind", s.kind)));
    }
    let p = cfg.macs_per_lane;
    let t = cfg.channel_tile;
    let ru = s.row_units(p);
    let in_iter = (s.in_c * s.round_cycles()) as u64;
    if ru == 0 || s.out_c == 0 {
        return Ok(LayerMapping::empty(id, s, lanes, cfg));
    }
    let rep_cap = if s.kind == LayerKind::GenericConv && s.k > 1 {
        cfg.max_spatial_replicas.max(1)
    } else {
        usize::MAX
    };
    let mut passes = Vec::new();
    if lanes >= t {
        let tiles = s.out_c.div_ceil(t);
        let per_pass = lanes / t;
        let mut done = 0;
        while done < tiles {
            let tt = per_pass.min(tiles - done);
            let g = rep_cap.min(lanes / (t * tt)).min(ru).max(1);
            passes.push(Pass {
                channel_start: done * t,
                group: t * tt,
                replicas: g,
                rounds: ru.div_ceil(g) as u64 * in_iter,
            });
            done += tt;
        }
    } else {
        let mut start = 0;
        while start < s.out_c {
            passes.push(Pass {
                channel_start: start,
                group: lanes,
                replicas: 1,
                rounds: ru as u64 * in_iter,
            });
            start += lanes;
        }
    }
    let rounds = passes.iter().map(|x| x.rounds).sum::<u64>();
    let first = passes[0].clone();
    let busy_lanes = first.group * first.replicas;
    let units = passes
        .iter()
        .map(|x| (x.group.min(s.out_c - x.channel_start) * ru) as u64 * in_iter)
        .sum::<u64>();
    let macs = s.macs();
    let cycles = rounds * s.round_cycles() as u64;
    let rows = first.replicas as f64;
    Ok(LayerMapping {
        assignment: LaneAssignment {
            layer: id.to_string(),
            lane_start: 0,
            lanes: busy_lanes,
            channel_tile: first.group,
            replicas: first.replicas,
            rows_per_round: first.replicas,
            scheme: ReuseScheme::RowWise,
        },
        profile: RoundProfile {
            cycles_per_round: s.round_cycles(),
            act_rows_fetched: first.replicas,
            weight_words: first.group * s.round_cycles(),
            busy_macs: (macs / cycles.max(1)) as usize,
        },
        shape: s,
        lanes,
        macs_per_lane: p,
        passes,
        rounds,
        reuse: first.group as f64,
        rows_per_round: rows,
        macs,
        units,
        busy_lanes,
    })
}

/// Lanes served per fetched row under a depth-wise scheme.
pub fn reuse_factor(s: &MapShape, scheme: ReuseScheme, p: usize) -> f64 {
    let mut f = 1.0;
    if scheme.column() {
        f *= (s.k.min(s.ho) as f64 / s.stride as f64).max(1.0);
    }
    // a single-segment row cannot be split without idling half of both lanes
    if scheme.deeper() && s.segments_per_row(p) >= 2 {
        f *= 2.0;
    }
    f
}

pub fn map_depthwise(layer: &LayerSpec, lanes: usize, scheme: ReuseScheme, cfg: &HardwareConfig) -> Result<LayerMapping> {
    if layer.kind != LayerKind::DepthwiseConv {
        return Err(Error::Parameter(format!(
            "scheme {scheme:?} applies to depthwise layers, {} is {}",
            layer.id, layer.kind
        )));
    }
    map_depthwise_shape(&layer.id, MapShape::from_layer(layer)?, lanes, scheme, cfg)
}

pub fn map_depthwise_shape(
    id: &str,
    s: MapShape,
    lanes: usize,
    scheme: ReuseScheme,
    cfg: &HardwareConfig,
) -> Result<LayerMapping> {
    check_lanes(lanes)?;
    let p = cfg.macs_per_lane;
    let f = match s.kind {
        LayerKind::DepthwiseConv => reuse_factor(&s, scheme, p),
        LayerKind::Elementwise if scheme == ReuseScheme::RowWise => 1.0 / s.n_inputs as f64,
        _ => {
            return Err(Error::Parameter(format!("scheme {scheme:?} does not apply to {}", s.kind)));
        }
    };
    let per_channel = match s.kind {
        LayerKind::Elementwise => s.row_units(p),
        _ => s.ho * s.segments_per_row(p) * s.k,
    } as u64;
    let units = s.in_c as u64 * per_channel;
    if units == 0 {
        return Ok(LayerMapping::empty(id, s, lanes, cfg));
    }
    let busy = ((planned_rows(cfg) as f64 * f).floor() as usize).clamp(1, lanes);
    let rounds = units.div_ceil(busy as u64);
    let rows = busy as f64 / f;
    let macs = s.macs();
    let cycles = rounds * s.round_cycles() as u64;
    Ok(LayerMapping {
        assignment: LaneAssignment {
            layer: id.to_string(),
            lane_start: 0,
            lanes: busy,
            channel_tile: cfg.channel_tile,
            replicas: 1,
            rows_per_round: rows.ceil() as usize,
            scheme,
        },
        profile: RoundProfile {
            cycles_per_round: s.round_cycles(),
            act_rows_fetched: rows.ceil() as usize,
            weight_words: busy * s.round_cycles(),
            busy_macs: (macs / cycles.max(1)) as usize,
        },
        shape: s,
        lanes,
        macs_per_lane: p,
        passes: vec![Pass {
            channel_start: 0,
            group: busy,
            replicas: 1,
            rounds,
        }],
        rounds,
        reuse: f,
        rows_per_round: rows,
        macs,
        units,
        busy_lanes: busy,
    })
}

/// Scheme with the fewest cycles; ties go to the earlier scheme.
pub fn choose_scheme(layer: &LayerSpec, cfg: &HardwareConfig) -> Result<ReuseScheme> {
    choose_scheme_shape(&layer.id, MapShape::from_layer(layer)?, cfg.lanes, cfg)
}

pub fn choose_scheme_shape(id: &str, s: MapShape, lanes: usize, cfg: &HardwareConfig) -> Result<ReuseScheme> {
    if s.kind != LayerKind::DepthwiseConv || !cfg.depthwise_reuse {
        return Ok(ReuseScheme::RowWise);
    }
    let mut best = (u64::MAX, ReuseScheme::RowWise);
    for scheme in ReuseScheme::ALL {
        let c = map_depthwise_shape(id, s, lanes, scheme, cfg)?.cycles();
        if c < best.0 {
            best = (c, scheme);
        }
    }
    Ok(best.1)
}

/// Maps any layer kind; data-movement layers map to zero rounds.
pub fn map_shape(id: &str, s: MapShape, lanes: usize, scheme: Option<ReuseScheme>, cfg: &HardwareConfig) -> Result<LayerMapping> {
    match s.kind {
        LayerKind::DepthwiseConv => {
            let scheme = match scheme {
                Some(x) => x,
                None => choose_scheme_shape(id, s, lanes, cfg)?,
            };
            map_depthwise_shape(id, s, lanes, scheme, cfg)
        }
        LayerKind::Elementwise => map_depthwise_shape(id, s, lanes, ReuseScheme::RowWise, cfg),
        LayerKind::Upsample | LayerKind::Downsample | LayerKind::Concat => {
            check_lanes(lanes)?;
            Ok(LayerMapping::empty(id, s, lanes, cfg))
        }
        _ => map_generic_shape(id, s, lanes, cfg),
    }
}

pub fn map_layer(layer: &LayerSpec, lanes: usize, cfg: &HardwareConfig) -> Result<LayerMapping> {
    map_shape(&layer.id, MapShape::from_layer(layer)?, lanes, None, cfg)
}

/// Activations in one fetched row window.
fn row_words(s: &MapShape, p: usize) -> f64 {
    ((p - 1) * s.stride + s.k) as f64
}

/// Act GB words per cycle needed to keep every lane of the mapping busy
/// without read stalls.
pub fn bandwidth_requirement(layer: &LayerSpec, scheme: ReuseScheme, cfg: &HardwareConfig) -> Result<f64> {
    let s = MapShape::from_layer(layer)?;
    let p = cfg.macs_per_lane;
    let rows = match s.kind {
        LayerKind::DepthwiseConv => cfg.lanes as f64 / reuse_factor(&s, scheme, p),
        LayerKind::Elementwise => (cfg.lanes * s.n_inputs) as f64,
        LayerKind::Upsample | LayerKind::Downsample | LayerKind::Concat => 0.0,
        _ => map_generic_shape(&layer.id, s, cfg.lanes, cfg)?.rows_per_round,
    };
    Ok(rows * row_words(&s, p) / s.round_cycles() as f64)
}

// ---------------------------------------------------------------------------
// Input feature-wise partition

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaloMode {
    /// Each tile recomputes the border its fused consumers need.
    Recompute,
    /// Border pixels are read back from neighbouring tiles.
    Store,
}

/// Half-open `[start, end)` rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub rows: [usize; 2],
    pub cols: [usize; 2],
}

impl Region {
    pub fn full(h: usize, w: usize) -> Self {
        Region {
            rows: [0, h],
            cols: [0, w],
        }
    }

    pub fn height(&self) -> usize {
        self.rows[1].saturating_sub(self.rows[0])
    }

    pub fn width(&self) -> usize {
        self.cols[1].saturating_sub(self.cols[0])
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    fn hull(&self, o: &Region) -> Region {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Region {
            rows: [self.rows[0].min(o.rows[0]), self.rows[1].max(o.rows[1])],
            cols: [self.cols[0].min(o.cols[0]), self.cols[1].max(o.cols[1])],
        }
    }

    pub fn contains(&self, h: usize, w: usize) -> bool {
        (self.rows[0]..self.rows[1]).contains(&h) && (self.cols[0]..self.cols[1]).contains(&w)
    }
}

/// Top/left zero padding of a window op.
pub fn pad_before(n_in: usize, n_out: usize, k: usize, stride: usize, pad: Padding) -> usize {
    match pad {
        Padding::Valid => 0,
        Padding::Same => ((n_out.saturating_sub(1)) * stride + k).saturating_sub(n_in) / 2,
    }
}

/// Input region of `layer` needed to produce output region `out`.
pub fn input_region(layer: &LayerSpec, out: &Region) -> Result<Region> {
    let [h, w, _] = layer.input;
    if out.is_empty() {
        return Ok(Region { rows: [0, 0], cols: [0, 0] });
    }
    let [ho, wo, _] = layer.output()?;
    let window = |range: [usize; 2], n_in: usize, n_out: usize| -> [usize; 2] {
        let p = pad_before(n_in, n_out, layer.k, layer.stride, layer.pad) as isize;
        let s = layer.stride as isize;
        let a = range[0] as isize * s - p;
        let b = (range[1] as isize - 1) * s - p + layer.k as isize;
        [a.max(0) as usize, (b.max(0) as usize).min(n_in)]
    };
    Ok(match layer.kind {
        LayerKind::GenericConv | LayerKind::PointwiseConv | LayerKind::DepthwiseConv | LayerKind::Downsample => Region {
            rows: window(out.rows, h, ho),
            cols: window(out.cols, w, wo),
        },
        LayerKind::Upsample => {
            let s = layer.stride;
            Region {
                rows: [out.rows[0] / s, out.rows[1].div_ceil(s)],
                cols: [out.cols[0] / s, out.cols[1].div_ceil(s)],
            }
        }
        LayerKind::FullyConnected => Region::full(h, w),
        LayerKind::Matmul | LayerKind::Elementwise | LayerKind::Concat => *out,
    })
}

/// Tile `index` of an `n`-way equal split of `[0, len)`.
fn split(len: usize, n: usize, index: usize) -> [usize; 2] {
    [index * len / n, (index + 1) * len / n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRegion {
    /// Disjoint share of the layer output owned by this tile.
    pub owned: Region,
    /// Output actually computed, owned share plus recomputed halo.
    pub computed: Region,
    /// Input read to compute it.
    pub input: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTiles {
    pub layer: String,
    pub tiles: Vec<TileRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub network: String,
    /// Tiles per dimension `[rows, cols]`.
    pub grid: [usize; 2],
    pub halo: HaloMode,
    /// Tiles over the network input feature map, row-major.
    pub tiles: Vec<Region>,
    /// Fused layer chains; a tile runs a whole chain before the next.
    /// Chains whose whole footprint stays under the tiled peak run as one
    /// tile.
    pub chains: Vec<Vec<String>>,
    pub layers: Vec<LayerTiles>,
    pub peak_bytes: u64,
    pub peak_layer: String,
    pub unpartitioned_peak_bytes: u64,
}

impl PartitionPlan {
    pub fn tile_count(&self) -> usize {
        self.grid[0] * self.grid[1]
    }

    pub fn layer_tiles(&self, id: &str) -> Option<&LayerTiles> {
        self.layers.iter().find(|l| l.layer == id)
    }
}

fn consumers(net: &NetworkSpec) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in net.layers.iter().enumerate() {
        for p in &l.pred {
            if let Some(j) = net.index_of(p) {
                m.entry(j).or_default().push(i);
            }
        }
    }
    m
}

fn spatial(kind: LayerKind) -> bool {
    !matches!(kind, LayerKind::FullyConnected | LayerKind::Concat)
}

/// Maximal linear runs: a layer joins its predecessor's chain when it is the
/// sole consumer of a sole predecessor.
pub fn fused_chains(net: &NetworkSpec) -> Vec<Vec<usize>> {
    let cons = consumers(net);
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut chain_of = vec![usize::MAX; net.layers.len()];
    for (i, l) in net.layers.iter().enumerate() {
        let joined = if l.pred.len() == 1 && spatial(l.kind) {
            let p = net.index_of(&l.pred[0]).unwrap_or(usize::MAX);
            let sole = cons.get(&p).map(|c| c.len() == 1).unwrap_or(false);
            if p != usize::MAX && sole && spatial(net.layers[p].kind) && chains[chain_of[p]].last() == Some(&p) {
                Some(chain_of[p])
            } else {
                None
            }
        } else {
            None
        };
        match joined {
            Some(c) => {
                chains[c].push(i);
                chain_of[i] = c;
            }
            None => {
                chain_of[i] = chains.len();
                chains.push(vec![i]);
            }
        }
    }
    chains
}

fn layer_tile_regions(net: &NetworkSpec, grid: [usize; 2], halo: HaloMode) -> Result<Vec<Vec<TileRegion>>> {
    let n = net.layers.len();
    let chains = fused_chains(net);
    let mut next_in_chain = vec![None; n];
    for c in &chains {
        for w in c.windows(2) {
            next_in_chain[w[0]] = Some(w[1]);
        }
    }
    let tiles = grid[0] * grid[1];
    let mut out: Vec<Vec<TileRegion>> = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let l = &net.layers[i];
        let [ho, wo, _] = l.output()?;
        let mut regions = Vec::with_capacity(tiles);
        for t in 0..tiles {
            let (ti, tj) = (t / grid[1], t % grid[1]);
            let owned = if l.kind == LayerKind::FullyConnected {
                if t + 1 == tiles {
                    Region::full(ho, wo)
                } else {
                    Region { rows: [0, 0], cols: [0, 0] }
                }
            } else {
                Region {
                    rows: split(ho, grid[0], ti),
                    cols: split(wo, grid[1], tj),
                }
            };
            let mut computed = owned;
            if halo == HaloMode::Recompute {
                if let Some(c) = next_in_chain[i] {
                    let need = &out[c][t];
                    if !need.computed.is_empty() {
                        computed = computed.hull(&need.input);
                    }
                }
            }
            let input = input_region(l, &computed)?;
            regions.push(TileRegion { owned, computed, input });
        }
        out[i] = regions;
    }
    Ok(out)
}

fn bytes(elems: usize, bits: u32) -> u64 {
    (elems as u64 * bits as u64).div_ceil(8)
}

/// Bytes a tile of `layer` keeps live: all inputs plus its output.
pub fn tile_footprint(layer: &LayerSpec, r: &TileRegion, bits: u32) -> u64 {
    let in_mult = if layer.kind == LayerKind::Elementwise {
        layer.pred.len().max(1)
    } else {
        1
    };
    let in_elems = if layer.kind == LayerKind::FullyConnected {
        layer.input.iter().product()
    } else {
        r.input.area() * layer.in_c() * in_mult
    };
    if r.computed.is_empty() {
        return 0;
    }
    bytes(in_elems, bits) + bytes(r.computed.area() * layer.out_c, bits)
}

/// Plan for a fixed grid.
pub fn plan_with_grid(net: &NetworkSpec, grid: [usize; 2], halo: HaloMode, bits: u32) -> Result<PartitionPlan> {
    net.validate()?;
    if grid[0] == 0 || grid[1] == 0 {
        return Err(Error::Parameter("grid must be at least 1x1".into()));
    }
    let mut regions = layer_tile_regions(net, grid, halo)?;
    let mut whole = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        let [ho, wo, _] = l.output()?;
        let full = Region::full(ho, wo);
        whole.push(TileRegion {
            owned: full,
            computed: full,
            input: Region::full(l.in_h(), l.in_w()),
        });
    }
    let whole_bytes: Vec<u64> = net.layers.iter().zip(&whole).map(|(l, r)| tile_footprint(l, r, bits)).collect();
    let tiled_peak = net
        .layers
        .iter()
        .zip(&regions)
        .flat_map(|(l, rs)| rs.iter().map(move |r| tile_footprint(l, r, bits)))
        .max()
        .unwrap_or(0);
    let chain_list = fused_chains(net);
    if grid != [1, 1] {
        for c in &chain_list {
            if c.iter().all(|&i| whole_bytes[i] <= tiled_peak) {
                for &i in c {
                    regions[i] = vec![whole[i].clone()];
                }
            }
        }
    }
    let mut peak = (0u64, String::new());
    for (l, rs) in net.layers.iter().zip(&regions) {
        for r in rs {
            let b = tile_footprint(l, r, bits);
            if b > peak.0 {
                peak = (b, l.id.clone());
            }
        }
    }
    let unpart = whole_bytes.iter().copied().max().unwrap_or(0);
    let (h, w) = net
        .layers
        .first()
        .map(|l| (l.in_h(), l.in_w()))
        .unwrap_or((0, 0));
    let tiles = (0..grid[0] * grid[1])
        .map(|t| Region {
            rows: split(h, grid[0], t / grid[1]),
            cols: split(w, grid[1], t % grid[1]),
        })
        .collect();
    let chains = chain_list
        .into_iter()
        .map(|c| c.into_iter().map(|i| net.layers[i].id.clone()).collect())
        .collect();
    let layers = net
        .layers
        .iter()
        .zip(regions)
        .map(|(l, tiles)| LayerTiles {
            layer: l.id.clone(),
            tiles,
        })
        .collect();
    Ok(PartitionPlan {
        network: net.name.clone(),
        grid,
        halo,
        tiles,
        chains,
        layers,
        peak_bytes: peak.0,
        peak_layer: peak.1,
        unpartitioned_peak_bytes: unpart,
    })
}

fn splits(net: &NetworkSpec, grid: [usize; 2]) -> Vec<[usize; 2]> {
    let (h, w) = net
        .layers
        .first()
        .map(|l| (l.in_h(), l.in_w()))
        .unwrap_or((1, 1));
    let mut c = Vec::new();
    if grid[0] * 2 <= h {
        c.push([grid[0] * 2, grid[1]]);
    }
    if grid[1] * 2 <= w {
        c.push([grid[0], grid[1] * 2]);
    }
    c
}

/// Greedy split (1, 2, 4, ... tiles per dimension) until the per-tile peak
/// fits `budget_bytes`.
pub fn partition_plan(net: &NetworkSpec, budget_bytes: u64, cfg: &HardwareConfig) -> Result<PartitionPlan> {
    Ok(partition_pipeline(&[net], budget_bytes, cfg)?.remove(0))
}

/// Joint greedy split of networks that share the activation buffer: each
/// step doubles the one dimension of one network that most reduces the
/// summed per-tile peak.
pub fn partition_pipeline(nets: &[&NetworkSpec], budget_bytes: u64, cfg: &HardwareConfig) -> Result<Vec<PartitionPlan>> {
    if budget_bytes == 0 {
        return Err(Error::Parameter("activation budget must be > 0".into()));
    }
    let bits = cfg.precision_bits;
    let halo = cfg.halo;
    let mut plans = nets
        .iter()
        .map(|n| plan_with_grid(n, [1, 1], halo, bits))
        .collect::<Result<Vec<_>>>()?;
    loop {
        let total: u64 = plans.iter().map(|p| p.peak_bytes).sum();
        if total <= budget_bytes {
            return Ok(plans);
        }
        let mut best: Option<(u64, usize, PartitionPlan)> = None;
        for (i, net) in nets.iter().enumerate() {
            for g in splits(net, plans[i].grid) {
                let cand = plan_with_grid(net, g, halo, bits)?;
                let t = total - plans[i].peak_bytes + cand.peak_bytes;
                if best.as_ref().map(|b| t < b.0).unwrap_or(true) {
                    best = Some((t, i, cand));
                }
            }
        }
        match best {
            Some((t, i, cand)) if t < total || cand.peak_bytes < plans[i].peak_bytes => plans[i] = cand,
            _ => {
                return Err(Error::Infeasible(format!(
                    "activation peak {total} B cannot be split below the {budget_bytes} B budget"
                )))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Activation buffer layout

/// Channel-tiled, bank-interleaved layout: each address holds 16 channels of
/// one pixel, `addr = (ct·H + h)·W + w`, `bank = addr mod banks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActLayout {
    pub banks: usize,
    pub word_channels: usize,
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActAddress {
    pub bank: usize,
    pub bank_addr: usize,
    /// Channel position inside the word.
    pub lane: usize,
}

impl ActLayout {
    pub fn new(dims: [usize; 3], cfg: &HardwareConfig) -> Self {
        ActLayout {
            banks: cfg.act_gb_banks,
            word_channels: cfg.channel_tile,
            dims,
        }
    }

    pub fn channel_tiles(&self) -> usize {
        self.dims[2].div_ceil(self.word_channels)
    }

    /// Words occupied, `H·W·ceil(C/16)`.
    pub fn entries(&self) -> usize {
        self.dims[0] * self.dims[1] * self.channel_tiles()
    }

    pub fn addresses_per_bank(&self) -> usize {
        self.entries().div_ceil(self.banks)
    }

    pub fn linear(&self, h: usize, w: usize, ct: usize) -> usize {
        (ct * self.dims[0] + h) * self.dims[1] + w
    }
}

pub fn act_address(layout: &ActLayout, h: usize, w: usize, c: usize) -> Result<ActAddress> {
    let [hh, ww, cc] = layout.dims;
    if h >= hh || w >= ww || c >= cc {
        return Err(Error::OutOfRange(format!("({h},{w},{c}) outside {:?}", layout.dims)));
    }
    let addr = layout.linear(h, w, c / layout.word_channels);
    Ok(ActAddress {
        bank: addr % layout.banks,
        bank_addr: addr / layout.banks,
        lane: c % layout.word_channels,
    })
}

pub fn act_index(layout: &ActLayout, a: ActAddress) -> Result<[usize; 3]> {
    let [hh, ww, cc] = layout.dims;
    let addr = a.bank_addr * layout.banks + a.bank;
    if a.bank >= layout.banks || a.lane >= layout.word_channels || addr >= layout.entries() {
        return Err(Error::OutOfRange(format!("address {a:?} outside layout")));
    }
    let w = addr % ww;
    let h = (addr / ww) % hh;
    let ct = addr / (ww * hh);
    let c = ct * layout.word_channels + a.lane;
    if c >= cc {
        return Err(Error::OutOfRange(format!("address {a:?} is channel padding")));
    }
    Ok([h, w, c])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    Zeros,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum ReshapeOp {
    Partition { region: Region },
    /// Physical channel offset of every input; each must be a multiple of 16.
    Concatenate { channel_offsets: Vec<usize> },
    Downsample { stride: usize },
    Upsample { factor: usize, mode: UpsampleMode },
}

/// Channel offsets that place each input on its own channel tiles.
pub fn aligned_concat_offsets(channels: &[usize], word: usize) -> Vec<usize> {
    let mut off = 0;
    channels
        .iter()
        .map(|c| {
            let o = off;
            off += c.div_ceil(word) * word;
            o
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Zero,
    Element { input: usize, addr: ActAddress },
}

/// Address-level gather: for every destination word lane, where it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ReshapeMap {
    /// Logical output dims.
    pub dims: [usize; 3],
    /// Destination layout; channels may include concat padding.
    pub layout: ActLayout,
    /// Logical channel to physical channel.
    pub channel_map: Vec<usize>,
    pub input_layouts: Vec<ActLayout>,
    /// Indexed by destination `(bank_addr·banks + bank)·word + lane`.
    pub sources: Vec<Source>,
}

pub fn reshape_map(layout: &ActLayout, inputs: &[[usize; 3]], op: &ReshapeOp) -> Result<ReshapeMap> {
    let first = *inputs
        .first()
        .ok_or_else(|| Error::Parameter("reshape needs at least one input".into()))?;
    let in_layouts: Vec<ActLayout> = inputs
        .iter()
        .map(|&d| ActLayout { dims: d, ..*layout })
        .collect();
    let [h, w, c] = first;
    let word = layout.word_channels;
    // (dims, physical channels, channel map, gather fn over logical dst index)
    let (dims, phys_c, channel_map, input_offsets): ([usize; 3], usize, Vec<usize>, Vec<usize>) = match op {
        ReshapeOp::Partition { region } => {
            if region.is_empty() || region.rows[1] > h || region.cols[1] > w {
                return Err(Error::OutOfRange(format!("partition {region:?} outside {h}x{w}")));
            }
            ([region.height(), region.width(), c], c, (0..c).collect(), vec![0])
        }
        ReshapeOp::Concatenate { channel_offsets } => {
            if channel_offsets.len() != inputs.len() || inputs.len() < 2 {
                return Err(Error::Parameter("one channel offset per input, at least two inputs".into()));
            }
            if let Some(o) = channel_offsets.iter().find(|o| *o % word != 0) {
                return Err(Error::Parameter(format!("concat channel offset {o} is not a multiple of {word}")));
            }
            let mut map = Vec::new();
            let mut end = 0;
            for (d, &o) in inputs.iter().zip(channel_offsets) {
                if d[0] != h || d[1] != w {
                    return Err(Error::Shape("concat inputs differ in spatial dims".into()));
                }
                if o < end {
                    return Err(Error::Parameter(format!("concat offset {o} overlaps previous input")));
                }
                map.extend((0..d[2]).map(|x| o + x));
                end = o + d[2];
            }
            let total = map.len();
            ([h, w, total], end, map, channel_offsets.clone())
        }
        ReshapeOp::Downsample { stride } => {
            if *stride == 0 {
                return Err(Error::Parameter("stride must be >= 1".into()));
            }
            ([h.div_ceil(*stride), w.div_ceil(*stride), c], c, (0..c).collect(), vec![0])
        }
        ReshapeOp::Upsample { factor, .. } => {
            if *factor == 0 {
                return Err(Error::Parameter("factor must be >= 1".into()));
            }
            ([h * factor, w * factor, c], c, (0..c).collect(), vec![0])
        }
    };
    let dst = ActLayout {
        dims: [dims[0], dims[1], phys_c],
        ..*layout
    };
    let slots = dst.addresses_per_bank() * dst.banks * word;
    let mut sources = vec![Source::Zero; slots];
    for oh in 0..dims[0] {
        for ow in 0..dims[1] {
            for oc in 0..dims[2] {
                let (input, ih, iw, ic) = match op {
                    ReshapeOp::Partition { region } => (0, oh + region.rows[0], ow + region.cols[0], oc),
                    ReshapeOp::Concatenate { .. } => {
                        let pc = channel_map[oc];
                        let i = input_offsets.iter().rposition(|&o| o <= pc).unwrap_or(0);
                        (i, oh, ow, pc - input_offsets[i])
                    }
                    ReshapeOp::Downsample { stride } => (0, oh * stride, ow * stride, oc),
                    ReshapeOp::Upsample { factor, mode } => {
                        let aligned = oh % factor == 0 && ow % factor == 0;
                        if *mode == UpsampleMode::Zeros && !aligned {
                            continue;
                        }
                        (0, oh / factor, ow / factor, oc)
                    }
                };
                let d = act_address(&dst, oh, ow, channel_map[oc])?;
                let s = act_address(&in_layouts[input], ih, iw, ic)?;
                sources[(d.bank_addr * dst.banks + d.bank) * word + d.lane] = Source::Element { input, addr: s };
            }
        }
    }
    Ok(ReshapeMap {
        dims,
        layout: dst,
        channel_map,
        input_layouts: in_layouts,
        sources,
    })
}

fn store(layout: &ActLayout, t: &DenseTensor) -> Result<Vec<f64>> {
    let word = layout.word_channels;
    let mut mem = vec![0.0; layout.addresses_per_bank() * layout.banks * word];
    for h in 0..t.dims[0] {
        for w in 0..t.dims[1] {
            for c in 0..t.dims[2] {
                let a = act_address(layout, h, w, c)?;
                mem[(a.bank_addr * layout.banks + a.bank) * word + a.lane] = t.get(h, w, c);
            }
        }
    }
    Ok(mem)
}

impl ReshapeMap {
    /// Runs the gather over banked memory images of the inputs and reads
    /// the logical result back out of the destination layout.
    pub fn apply(&self, inputs: &[DenseTensor]) -> Result<DenseTensor> {
        if inputs.len() != self.input_layouts.len() {
            return Err(Error::Shape(format!("{} inputs for a {}-input map", inputs.len(), self.input_layouts.len())));
        }
        let word = self.layout.word_channels;
        let mut mems = Vec::with_capacity(inputs.len());
        for (t, l) in inputs.iter().zip(&self.input_layouts) {
            if t.dims != l.dims {
                return Err(Error::Shape(format!("input {:?} does not match {:?}", t.dims, l.dims)));
            }
            mems.push(store(l, t)?);
        }
        let dst_mem: Vec<f64> = self
            .sources
            .iter()
            .map(|s| match s {
                Source::Zero => 0.0,
                Source::Element { input, addr } => {
                    let l = &self.input_layouts[*input];
                    mems[*input][(addr.bank_addr * l.banks + addr.bank) * word + addr.lane]
                }
            })
            .collect();
        let mut out = DenseTensor::zeros(self.dims);
        for h in 0..self.dims[0] {
            for w in 0..self.dims[1] {
                for c in 0..self.dims[2] {
                    let a = act_address(&self.layout, h, w, self.channel_map[c])?;
                    out.set(h, w, c, dst_mem[(a.bank_addr * self.layout.banks + a.bank) * word + a.lane]);
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Serialized plans

/// Inspectable per-layer plan as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub layer: String,
    pub lanes: usize,
    pub scheme: ReuseScheme,
    pub channel_tile: usize,
    pub tiles: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPlan {
    pub network: String,
    pub grid: [usize; 2],
    pub halo: HaloMode,
    pub layers: Vec<PlanEntry>,
}

/// Whole-layer mappings plus the partition, in the JSON form used for
/// inspection and replay.
pub fn network_plan(net: &NetworkSpec, partition: &PartitionPlan, cfg: &HardwareConfig) -> Result<NetworkPlan> {
    let layers = net
        .layers
        .iter()
        .map(|l| {
            let m = map_layer(l, cfg.lanes, cfg)?;
            let tiles = partition
                .layer_tiles(&l.id)
                .map(|t| t.tiles.iter().map(|r| r.computed).collect())
                .unwrap_or_default();
            Ok(PlanEntry {
                layer: l.id.clone(),
                lanes: m.assignment.lanes,
                scheme: m.assignment.scheme,
                channel_tile: m.assignment.channel_tile,
                tiles,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkPlan {
        network: net.name.clone(),
        grid: partition.grid,
        halo: partition.halo,
        layers,
    })
}

/// Sanity total used by tests: MACs of every tile's computed region.
pub fn partitioned_macs(net: &NetworkSpec, plan: &PartitionPlan) -> Result<u64> {
    let mut total = 0;
    for l in &net.layers {
        let s = MapShape::from_layer(l)?;
        let tiles = plan
            .layer_tiles(&l.id)
            .ok_or_else(|| Error::Plan { index: 0, msg: format!("layer {} missing from plan", l.id) })?;
        if l.kind == LayerKind::FullyConnected {
            total += layer_macs(l)?;
            continue;
        }
        for t in &tiles.tiles {
            total += s.with_output(t.computed.height(), t.computed.width()).macs();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::LayerKind as K;

    fn cfg() -> HardwareConfig {
        HardwareConfig::default()
    }

    fn conv(kind: K, input: [usize; 3], out_c: usize, k: usize, stride: usize) -> LayerSpec {
        LayerSpec::conv("l", kind, input, out_c, k, stride)
    }

    #[test]
    fn pointwise_perfect_tiling() {
        let m = map_generic_pointwise(&conv(K::PointwiseConv, [4, 4, 8], 128, 1, 1), 128, &cfg()).unwrap();
        assert_eq!(m.busy_lanes, 128);
        assert_eq!(m.assignment.channel_tile, 128);
        assert_eq!(m.cycles(), 2 * 8);
        assert!((m.utilization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_channel_generic_occupancy() {
        let c = HardwareConfig {
            max_spatial_replicas: 1,
            ..cfg()
        };
        let m = map_generic_pointwise(&conv(K::GenericConv, [16, 16, 8], 16, 3, 1), 128, &c).unwrap();
        assert_eq!(m.busy_lanes, 16);
        let m = map_generic_pointwise(&conv(K::GenericConv, [16, 16, 8], 16, 3, 1), 128, &cfg()).unwrap();
        assert_eq!(m.busy_lanes, 16 * cfg().max_spatial_replicas);
        assert_eq!(m.assignment.channel_tile % 16, 0);
    }

    #[test]
    fn matmul_maps_like_pointwise() {
        let mm = LayerSpec::new("mm", K::Matmul, [1, 64, 32], 64);
        let pw = conv(K::PointwiseConv, [8, 8, 32], 64, 1, 1);
        let a = map_generic_pointwise(&mm, 128, &cfg()).unwrap();
        let b = map_generic_pointwise(&pw, 128, &cfg()).unwrap();
        assert_eq!(a.cycles(), b.cycles());
        assert_eq!(a.macs, b.macs);
    }

    #[test]
    fn column_wise_scales_by_kernel() {
        for k in [3, 5] {
            let l = conv(K::DepthwiseConv, [32, 32, 64], 64, k, 1);
            let row = map_depthwise(&l, 128, ReuseScheme::RowWise, &cfg()).unwrap();
            let col = map_depthwise(&l, 128, ReuseScheme::ColumnWise, &cfg()).unwrap();
            let expect = (k as f64 * row.busy_lanes as f64).min(128.0);
            assert_eq!(col.busy_lanes as f64, expect.floor());
            assert!(col.utilization() <= 1.0);
        }
    }

    #[test]
    fn deeper_doubles_busy_macs() {
        let l = conv(K::DepthwiseConv, [20, 40, 48], 48, 3, 1);
        let row = map_depthwise(&l, 128, ReuseScheme::RowWise, &cfg()).unwrap();
        let deep = map_depthwise(&l, 128, ReuseScheme::DeeperRowWise, &cfg()).unwrap();
        assert_eq!(deep.busy_lanes, 2 * row.busy_lanes);
        assert_eq!(row.units, deep.units);
        assert_eq!(deep.rounds, row.rounds.div_ceil(2));
    }

    #[test]
    fn scheme_choice() {
        let big = conv(K::DepthwiseConv, [48, 80, 96], 96, 3, 1);
        assert_eq!(choose_scheme(&big, &cfg()).unwrap(), ReuseScheme::ColumnPlusDeeper);
        let late = conv(K::DepthwiseConv, [7, 7, 256], 256, 3, 2);
        assert_eq!(choose_scheme(&late, &cfg()).unwrap(), ReuseScheme::ColumnWise);
        let off = HardwareConfig {
            depthwise_reuse: false,
            ..cfg()
        };
        assert_eq!(choose_scheme(&big, &off).unwrap(), ReuseScheme::RowWise);
    }

    #[test]
    fn depthwise_scheme_on_pointwise_rejected() {
        let l = conv(K::PointwiseConv, [4, 4, 8], 8, 1, 1);
        assert!(map_depthwise(&l, 128, ReuseScheme::ColumnWise, &cfg()).is_err());
        assert!(map_generic_pointwise(&l, 0, &cfg()).is_err());
    }

    #[test]
    fn bandwidth_ratios() {
        let dw = conv(K::DepthwiseConv, [24, 40, 64], 64, 3, 1);
        let row = bandwidth_requirement(&dw, ReuseScheme::RowWise, &cfg()).unwrap();
        let col = bandwidth_requirement(&dw, ReuseScheme::ColumnWise, &cfg()).unwrap();
        assert!((row / col - 3.0).abs() < 1e-12);
        let pw = conv(K::PointwiseConv, [24, 40, 64], 256, 1, 1);
        let m = map_generic_pointwise(&pw, 128, &cfg()).unwrap();
        assert_eq!(m.profile.act_rows_fetched, 1);
    }

    #[test]
    fn layout_examples() {
        let l = ActLayout::new([6, 6, 24], &cfg());
        assert_eq!(l.channel_tiles(), 2);
        assert_eq!(l.entries(), 72);
        assert_eq!(l.addresses_per_bank(), 18);
        let a = act_address(&l, 0, 0, 0).unwrap();
        assert_eq!((a.bank, a.bank_addr), (0, 0));
        assert!(act_address(&l, 6, 0, 0).is_err());
    }

    #[test]
    fn layout_bijection_5x3x17() {
        let l = ActLayout::new([5, 3, 17], &cfg());
        let mut seen = std::collections::HashSet::new();
        for h in 0..5 {
            for w in 0..3 {
                for c in 0..17 {
                    let a = act_address(&l, h, w, c).unwrap();
                    assert!(seen.insert((a.bank, a.bank_addr, a.lane)));
                    assert_eq!(act_index(&l, a).unwrap(), [h, w, c]);
                }
            }
        }
    }

    #[test]
    fn downsample_keeps_even_positions() {
        let l = ActLayout::new([6, 6, 4], &cfg());
        let m = reshape_map(&l, &[[6, 6, 4]], &ReshapeOp::Downsample { stride: 2 }).unwrap();
        assert_eq!(&m.dims[..2], &[3, 3]);
    }

    #[test]
    fn concat_offsets() {
        assert_eq!(aligned_concat_offsets(&[16, 16], 16), vec![0, 16]);
        let l = ActLayout::new([2, 2, 16], &cfg());
        let bad = reshape_map(&l, &[[2, 2, 8], [2, 2, 8]], &ReshapeOp::Concatenate { channel_offsets: vec![0, 8] });
        assert!(bad.is_err());
        let m = reshape_map(&l, &[[2, 2, 16], [2, 2, 16]], &ReshapeOp::Concatenate { channel_offsets: vec![0, 16] }).unwrap();
        assert_eq!(m.channel_map[16] / 16, 1);
    }

    #[test]
    fn toy_partition_bytes() {
        let net = NetworkSpec::new("toy", vec![conv(K::DepthwiseConv, [64, 64, 16], 16, 3, 1)]);
        let one = plan_with_grid(&net, [1, 1], HaloMode::Recompute, 8).unwrap();
        assert_eq!(one.peak_bytes, 2 * 64 * 64 * 16);
        let four = plan_with_grid(&net, [2, 2], HaloMode::Recompute, 8).unwrap();
        let halo = 2 * 33 * 33 * 16 - 2 * 32 * 32 * 16;
        assert!(four.peak_bytes <= (2 * 32 * 32 * 16 + halo) as u64);
        assert!(four.peak_bytes < one.peak_bytes / 2);
    }

    #[test]
    fn infeasible_budget() {
        let net = NetworkSpec::new("toy", vec![conv(K::PointwiseConv, [2, 2, 64], 64, 1, 1)]);
        assert!(matches!(partition_plan(&net, 8, &cfg()), Err(Error::Infeasible(_))));
        assert!(partition_plan(&net, 0, &cfg()).is_err());
    }
}
