//! Round-level accelerator simulator: orchestration modes, input buffer,
//! ping-pong weight loads, stalls, utilization, energy and throughput.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{map_shape, partition_pipeline, HaloMode, MapShape, PartitionPlan, TileRegion};
use crate::workload::{network_macs, LayerKind, LayerSpec, NetworkSpec, PipelineSpec};

/// Relative energy per access class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCoefficients {
    pub mac: f64,
    pub local: f64,
    pub gb: f64,
    pub offchip: f64,
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        EnergyCoefficients {
            mac: 1.0,
            local: 2.0,
            gb: 6.0,
            offchip: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub lanes: usize,
    pub macs_per_lane: usize,
    /// Activations per act GB word; also the channel tile.
    pub channel_tile: usize,
    pub act_gb_bytes: u64,
    pub act_gb_count: usize,
    pub act_gb_banks: usize,
    pub weight_buffer_bytes: u64,
    pub weight_buffer_count: usize,
    pub weight_gb_bytes: u64,
    pub index_sram_bytes: u64,
    pub instr_sram_bytes: u64,
    pub freq_hz: f64,
    pub precision_bits: u32,
    /// Rows written into one input buffer group per round (M).
    pub rows_per_fetch: usize,
    /// Sequential-write-parallel-read input buffer present.
    pub input_buffer: bool,
    /// Act GB read width relative to the design point.
    pub act_read_scale: f64,
    /// Output words the act GB accepts per cycle.
    pub write_words_per_cycle: usize,
    pub weight_gb_bytes_per_cycle: f64,
    /// Output-row replicas a K > 1 generic conv may spread over spare lanes.
    pub max_spatial_replicas: usize,
    /// Column-wise and deeper row-wise reuse for depth-wise layers.
    pub depthwise_reuse: bool,
    pub halo: HaloMode,
    pub link_bytes_per_cycle: f64,
    pub link_latency_cycles: u64,
    pub energy: EnergyCoefficients,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            lanes: 128,
            macs_per_lane: 8,
            channel_tile: 16,
            act_gb_bytes: 512 * 1024,
            act_gb_count: 2,
            act_gb_banks: 4,
            weight_buffer_bytes: 64 * 1024,
            weight_buffer_count: 2,
            weight_gb_bytes: 512 * 1024,
            index_sram_bytes: 20 * 1024,
            instr_sram_bytes: 4 * 1024,
            freq_hz: 370e6,
            precision_bits: 8,
            rows_per_fetch: 16,
            input_buffer: true,
            act_read_scale: 1.0,
            write_words_per_cycle: 8,
            weight_gb_bytes_per_cycle: 64.0,
            max_spatial_replicas: 2,
            depthwise_reuse: true,
            halo: HaloMode::Recompute,
            link_bytes_per_cycle: 16.0,
            link_latency_cycles: 1000,
            energy: EnergyCoefficients::default(),
        }
    }
}

pub fn default_config() -> HardwareConfig {
    HardwareConfig::default()
}

impl HardwareConfig {
    pub fn total_macs(&self) -> usize {
        self.lanes * self.macs_per_lane
    }

    pub fn peak_macs_per_second(&self) -> f64 {
        self.total_macs() as f64 * self.freq_hz
    }

    pub fn act_storage_bytes(&self) -> u64 {
        self.act_gb_bytes * self.act_gb_count as u64
    }

    /// Act rows the input side can deliver per round.
    pub fn act_rows_per_round(&self) -> usize {
        let groups = if self.input_buffer { 2.0 } else { 1.0 };
        (self.rows_per_fetch as f64 * groups * self.act_read_scale + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lanes", self.lanes as f64),
            ("macs_per_lane", self.macs_per_lane as f64),
            ("channel_tile", self.channel_tile as f64),
            ("act_gb_bytes", self.act_gb_bytes as f64),
            ("act_gb_count", self.act_gb_count as f64),
            ("act_gb_banks", self.act_gb_banks as f64),
            ("weight_buffer_bytes", self.weight_buffer_bytes as f64),
            ("weight_buffer_count", self.weight_buffer_count as f64),
            ("weight_gb_bytes", self.weight_gb_bytes as f64),
            ("index_sram_bytes", self.index_sram_bytes as f64),
            ("instr_sram_bytes", self.instr_sram_bytes as f64),
            ("freq_hz", self.freq_hz),
            ("precision_bits", self.precision_bits as f64),
            ("rows_per_fetch", self.rows_per_fetch as f64),
            ("act_read_scale", self.act_read_scale),
            ("write_words_per_cycle", self.write_words_per_cycle as f64),
            ("weight_gb_bytes_per_cycle", self.weight_gb_bytes_per_cycle),
            ("max_spatial_replicas", self.max_spatial_replicas as f64),
            ("link_bytes_per_cycle", self.link_bytes_per_cycle),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("/{name}"), "must be positive"));
            }
        }
        let e = self.energy;
        for (name, v) in [("mac", e.mac), ("local", e.local), ("gb", e.gb), ("offchip", e.offchip)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("/energy/{name}"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<HardwareConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: HardwareConfig = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &HardwareConfig, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    crate::io::write_atomic(path.as_ref(), text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum OrchestrationMode {
    TimeMultiplexing,
    /// Static split; `seg_macs` defaults to [`concurrent_split`].
    Concurrent { seg_macs: Option<usize> },
    PartialTimeMultiplexing { threshold: f64 },
}

impl OrchestrationMode {
    pub fn partial() -> Self {
        OrchestrationMode::PartialTimeMultiplexing { threshold: 0.8 }
    }

    pub fn concurrent() -> Self {
        OrchestrationMode::Concurrent { seg_macs: None }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tm" | "time_multiplexing" => Some(OrchestrationMode::TimeMultiplexing),
            "cc" | "concurrent" => Some(Self::concurrent()),
            "ptm" | "partial" | "partial_time_multiplexing" => Some(Self::partial()),
            _ => None,
        }
    }

    pub fn short(&self) -> &'static str {
        match self {
            OrchestrationMode::TimeMultiplexing => "tm",
            OrchestrationMode::Concurrent { .. } => "cc",
            OrchestrationMode::PartialTimeMultiplexing { .. } => "ptm",
        }
    }
}

/// The input buffer: a temp buffer writing M rows per round into whichever
/// of G0/G1 is idle while the lanes read the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferModel {
    pub rows_per_fetch: usize,
    pub groups: usize,
    pub present: bool,
}

impl BufferModel {
    pub fn from_config(cfg: &HardwareConfig) -> Self {
        BufferModel {
            rows_per_fetch: cfg.rows_per_fetch,
            groups: 2,
            present: cfg.input_buffer,
        }
    }

    /// Rows readable in one round.
    pub fn readable_rows(&self, cfg: &HardwareConfig) -> usize {
        cfg.act_rows_per_round()
    }

    /// Extra cycles a round needing `rows` pays when the readable group is
    /// short: one more round length per extra refill.
    pub fn stall_per_round(&self, rows: usize, round_cycles: usize, cfg: &HardwareConfig) -> u64 {
        let cap = self.readable_rows(cfg).max(1);
        (rows.div_ceil(cap).saturating_sub(1) * round_cycles) as u64
    }
}

/// Fraction of act GB read bandwidth the input buffer saves on a `k`-cycle
/// round: a lane otherwise reads 8 fresh activations every cycle, with the
/// buffer it reads one `8 + k - 1` window per round.
pub fn buffer_bandwidth_saving(k: usize, cfg: &HardwareConfig) -> Result<f64> {
    if k == 0 {
        return Err(Error::Parameter("kernel size must be >= 1".into()));
    }
    let p = cfg.macs_per_lane as f64;
    let with = (p + k as f64 - 1.0) / k as f64;
    Ok(1.0 - with / p)
}

/// Per-frame MACs of segmentation amortized over its period, and of the
/// per-frame work.
fn amortized_split(p: &PipelineSpec) -> Result<(f64, f64)> {
    let seg = network_macs(&p.effective_seg()?)?.total / p.seg_period_frames as f64;
    let mut rest = network_macs(&p.gaze_net)?.total;
    rest += p.recon_macs()? as f64;
    Ok((seg, rest))
}

/// MACs given to segmentation under a static split, rounded up to a
/// multiple of 4.
pub fn concurrent_split(p: &PipelineSpec, total_macs: usize) -> Result<usize> {
    if total_macs < 8 {
        return Err(Error::Parameter(format!("total MACs {total_macs} < 8")));
    }
    let (seg, rest) = amortized_split(p)?;
    if seg == 0.0 {
        return Ok(0);
    }
    let raw = total_macs as f64 * seg / (seg + rest);
    Ok(((raw / 4.0).ceil() as usize * 4).min(total_macs))
}

/// Partition plans for both networks, sharing the activation buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelinePlans {
    pub seg: PartitionPlan,
    pub gaze: PartitionPlan,
}

pub fn plan_pipeline(p: &PipelineSpec, cfg: &HardwareConfig) -> Result<PipelinePlans> {
    cfg.validate()?;
    p.validate()?;
    let seg = p.effective_seg()?;
    let mut v = partition_pipeline(&[&seg, &p.gaze_net], cfg.act_storage_bytes(), cfg)?;
    let gaze = v.pop().expect("two plans");
    let seg = v.pop().expect("two plans");
    Ok(PipelinePlans { seg, gaze })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Recon,
    Seg,
    Gaze,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Recon => "recon",
            Stream::Seg => "seg",
            Stream::Gaze => "gaze",
        }
    }
}

/// Cost of one layer executed over all its tiles on a fixed lane count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerExec {
    pub stream: Stream,
    pub layer: String,
    pub kind: LayerKind,
    pub macs: u64,
    pub compute_cycles: u64,
    pub act_stall: u64,
    pub weight_stall: u64,
    pub write_stall: u64,
    pub busy_lanes: usize,
    pub lanes: usize,
    /// Compute-only mapped utilization.
    pub utilization: f64,
    pub rows_per_round: f64,
    pub round_cycles: usize,
    /// Lane-rounds of work.
    pub units: u64,
    /// Lanes served per fetched row.
    pub units_per_row: f64,
    pub act_words: u64,
    pub out_words: u64,
    pub weight_bytes: u64,
    pub preds: Vec<String>,
}

impl LayerExec {
    pub fn cycles(&self) -> u64 {
        self.compute_cycles + self.act_stall + self.weight_stall + self.write_stall
    }

    fn gb_words(&self, cfg: &HardwareConfig) -> f64 {
        let wbytes = (cfg.channel_tile as u64 * cfg.precision_bits as u64).div_ceil(8).max(1);
        (self.act_words + self.out_words) as f64 + self.weight_bytes as f64 / wbytes as f64
    }
}

fn weight_count(l: &LayerSpec) -> u64 {
    let (ci, co, k2) = (l.in_c() as u64, l.out_c as u64, (l.k * l.k) as u64);
    match l.kind {
        LayerKind::GenericConv => co * ci * k2,
        LayerKind::PointwiseConv | LayerKind::Matmul => co * ci,
        LayerKind::DepthwiseConv => ci * k2,
        LayerKind::FullyConnected => l.input.iter().product::<usize>() as u64 * co,
        _ => 0,
    }
}

/// Ping-pong weight loading: chunk `i + 1` loads while chunk `i` computes.
/// The first chunk overlaps the previous layer's last chunk.
fn weight_stall(bytes: u64, compute: u64, prev_tail: f64, cfg: &HardwareConfig) -> (u64, f64) {
    if bytes == 0 {
        return (0, prev_tail);
    }
    let chunk = cfg.weight_buffer_bytes;
    let n = bytes.div_ceil(chunk);
    let per_cycle = cfg.weight_gb_bytes_per_cycle;
    let mut stall = 0.0;
    let mut prev = prev_tail;
    for i in 0..n {
        let b = (bytes - i * chunk).min(chunk);
        let load = b as f64 / per_cycle;
        stall += (load - prev).max(0.0);
        prev = compute as f64 * b as f64 / bytes as f64;
    }
    (stall.round() as u64, prev)
}

fn exec_layer(
    stream: Stream,
    l: &LayerSpec,
    tiles: &[TileRegion],
    lanes: usize,
    cfg: &HardwareConfig,
    prev_tail: &mut f64,
) -> Result<LayerExec> {
    let base = MapShape::from_layer(l)?;
    let buffer = BufferModel::from_config(cfg);
    let p = cfg.macs_per_lane;
    let mut e = LayerExec {
        stream,
        layer: l.id.clone(),
        kind: l.kind,
        macs: 0,
        compute_cycles: 0,
        act_stall: 0,
        weight_stall: 0,
        write_stall: 0,
        busy_lanes: 0,
        lanes,
        utilization: 0.0,
        rows_per_round: 0.0,
        round_cycles: 1,
        units: 0,
        units_per_row: 1.0,
        act_words: 0,
        out_words: 0,
        weight_bytes: 0,
        preds: l.pred.clone(),
    };
    let wbytes = (weight_count(l) * cfg.precision_bits as u64).div_ceil(8);
    let mut first = true;
    for t in tiles {
        if t.computed.is_empty() {
            continue;
        }
        let s = base.with_output(t.computed.height(), t.computed.width());
        let m = map_shape(&l.id, s, lanes, None, cfg)?;
        let compute = m.cycles();
        e.macs += m.macs;
        e.compute_cycles += compute;
        e.units += m.units;
        if compute == 0 {
            continue;
        }
        let rows = m.rows_per_round.ceil() as usize;
        e.act_stall += m.rounds * buffer.stall_per_round(rows, m.round_cycles(), cfg);
        let (ws, tail) = weight_stall(wbytes, compute, *prev_tail, cfg);
        *prev_tail = tail;
        e.weight_stall += ws;
        e.weight_bytes += wbytes;
        let out_words = (t.computed.area() * l.out_c.div_ceil(cfg.channel_tile)) as u64;
        e.out_words += out_words;
        e.write_stall += out_words.div_ceil(cfg.write_words_per_cycle as u64).saturating_sub(compute);
        let window = ((p - 1) * s.stride + s.k) as f64;
        e.act_words += (m.rounds as f64 * m.rows_per_round * window / cfg.channel_tile as f64).ceil() as u64;
        if first {
            e.busy_lanes = m.busy_lanes;
            e.rows_per_round = m.rows_per_round;
            e.round_cycles = m.round_cycles();
            e.units_per_row = if m.rows_per_round > 0.0 {
                m.busy_lanes as f64 / m.rows_per_round
            } else {
                1.0
            };
            first = false;
        }
    }
    if e.compute_cycles > 0 {
        e.utilization = e.macs as f64 / (e.compute_cycles as f64 * (lanes * p) as f64);
    }
    Ok(e)
}

fn whole_layer_tiles(l: &LayerSpec) -> Result<Vec<TileRegion>> {
    let [ho, wo, _] = l.output()?;
    let full = crate::mapper::Region::full(ho, wo);
    Ok(vec![TileRegion {
        owned: full,
        computed: full,
        input: crate::mapper::Region::full(l.in_h(), l.in_w()),
    }])
}

fn exec_network(stream: Stream, net: &NetworkSpec, plan: Option<&PartitionPlan>, lanes: usize, cfg: &HardwareConfig) -> Result<Vec<LayerExec>> {
    let mut tail = 0.0;
    net.layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let tiles = match plan {
                Some(p) => p
                    .layer_tiles(&l.id)
                    .ok_or_else(|| Error::Plan {
                        index: i,
                        msg: format!("plan for {} has no entry for layer {}", p.network, l.id),
                    })?
                    .tiles
                    .clone(),
                None => whole_layer_tiles(l)?,
            };
            exec_layer(stream, l, &tiles, lanes, cfg, &mut tail)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StallCycles {
    pub act_read: u64,
    pub weight_load: u64,
    pub output_write: u64,
}

/// One contiguous execution of a layer (or a slice of one) on the timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub frame: usize,
    pub stream: Stream,
    /// Frame that launched this network instance.
    pub instance: usize,
    pub layer: String,
    pub kind: LayerKind,
    pub start: u64,
    pub cycles: u64,
    pub macs: u64,
    /// MACs of segmentation work run alongside on idle lanes.
    pub corun_macs: u64,
    pub lanes: usize,
    /// True for work that shares cycles with another interval.
    pub shadow: bool,
}

impl Interval {
    pub fn end(&self) -> u64 {
        self.start + self.cycles
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerStat {
    pub stream: Option<Stream>,
    pub layer: String,
    pub executions: u64,
    /// Exclusive timeline cycles.
    pub cycles: u64,
    /// Cycles run in the shadow of other work.
    pub shadow_cycles: u64,
    pub macs: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameStat {
    pub cycles: u64,
    pub main_macs: u64,
    pub seg_macs: u64,
    /// MACs the schedule assigned to this frame.
    pub scheduled_macs: u64,
    pub link_cycles: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mac_ops: f64,
    pub local_accesses: f64,
    pub gb_words: f64,
    pub offchip_words: f64,
    pub total: f64,
    pub per_frame: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: OrchestrationMode,
    pub frames: usize,
    pub total_cycles: u64,
    pub idle_cycles: u64,
    pub frame_stats: Vec<FrameStat>,
    pub layers: Vec<LayerStat>,
    pub stalls: StallCycles,
    pub trace: Vec<Interval>,
    pub macs_executed: u64,
    pub seg_pending_macs: u64,
    pub act_words_read: u64,
    pub act_words_per_cycle: f64,
    pub energy: EnergyReport,
    /// Frequency over the slowest frame.
    pub fps: f64,
    pub fps_average: f64,
    pub utilization: f64,
    /// Largest co-run gain over running the same work serially, taken over
    /// convolution layers of the main stream.
    pub peak_corun_speedup: f64,
    /// Busy MACs over available MACs across co-run intervals.
    pub corun_utilization: Option<f64>,
    pub seg_lanes: usize,
    pub freq_hz: f64,
    pub total_macs_per_cycle: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

struct SegJob {
    trigger: usize,
    layer: usize,
    done: u64,
}

struct Timeline<'a> {
    cfg: &'a HardwareConfig,
    now: u64,
    trace: Vec<Interval>,
    frame_main: u64,
    frame_seg: u64,
    stalls: StallCycles,
    energy: EnergyReport,
    act_words: f64,
}

impl<'a> Timeline<'a> {
    fn charge(&mut self, e: &LayerExec, fraction: f64) {
        let m = e.macs as f64 * fraction;
        self.energy.mac_ops += m;
        self.energy.local_accesses += 2.0 * m;
        self.energy.gb_words += e.gb_words(self.cfg) * fraction;
        self.act_words += e.act_words as f64 * fraction;
    }

    fn push(&mut self, frame: usize, instance: usize, e: &LayerExec, cycles: u64, macs: u64, shadow: bool, start: u64) {
        self.trace.push(Interval {
            frame,
            stream: e.stream,
            instance,
            layer: e.layer.clone(),
            kind: e.kind,
            start,
            cycles,
            macs,
            corun_macs: 0,
            lanes: e.lanes,
            shadow,
        });
    }

    /// Runs a layer exclusively on its lanes.
    fn run(&mut self, frame: usize, instance: usize, e: &LayerExec) {
        let c = e.cycles();
        self.stalls.act_read += e.act_stall;
        self.stalls.weight_load += e.weight_stall;
        self.stalls.output_write += e.write_stall;
        self.charge(e, 1.0);
        let start = self.now;
        self.push(frame, instance, e, c, e.macs, false, start);
        self.now += c;
    }

    /// Finishes the rest of a segmentation layer exclusively.
    fn run_remainder(&mut self, frame: usize, instance: usize, e: &LayerExec, done: u64) {
        if done == 0 {
            self.run(frame, instance, e);
            self.frame_seg += e.macs;
            return;
        }
        let rest = e.macs - done;
        let frac = rest as f64 / e.macs as f64;
        let c = (e.cycles() as f64 * frac).ceil() as u64;
        self.charge(e, frac);
        let start = self.now;
        self.push(frame, instance, e, c, rest, false, start);
        self.now += c;
        self.frame_seg += rest;
    }
}

fn link_cycles(p: &PipelineSpec, cfg: &HardwareConfig) -> Result<(u64, f64)> {
    let pixels = match p.recon {
        Some(r) => r.measurement[0] * r.measurement[1],
        None => p.gaze_net.layers.first().map(|l| l.input.iter().product()).unwrap_or(0),
    };
    let mut bytes = (pixels as u64 * cfg.precision_bits as u64).div_ceil(8) as f64;
    if p.optical_first_layer && !p.seg_net.layers.is_empty() {
        let (_, s) = crate::workload::apply_optical_first_layer(&p.seg_net, None, cfg.precision_bits)?;
        bytes *= s.traffic_ratio;
    }
    Ok((cfg.link_latency_cycles + (bytes / cfg.link_bytes_per_cycle).ceil() as u64, bytes))
}

/// Co-runs pending segmentation work beside one main-stream layer.
/// Returns the TM-equivalent cycles of the segmentation work completed.
#[allow(clippy::too_many_arguments)]
fn corun(
    tl: &mut Timeline,
    frame: usize,
    main: &LayerExec,
    start: u64,
    seg: &[LayerExec],
    job: &mut SegJob,
    lanes: usize,
) -> (f64, u64) {
    let cfg = tl.cfg;
    let cap = cfg.act_rows_per_round() as f64;
    let idle = lanes.saturating_sub(main.busy_lanes);
    let spare_rows_per_cycle = (cap - main.rows_per_round.ceil()).max(0.0) / main.round_cycles as f64;
    let mut dt = main.cycles() as f64;
    let mut t = start as f64;
    let mut tm_equiv = 0.0;
    let mut macs_total = 0;
    while dt > 0.0 && job.layer < seg.len() {
        let s = &seg[job.layer];
        if s.macs == 0 {
            tl.push(frame, job.trigger, s, 0, 0, true, t.ceil() as u64);
            job.layer += 1;
            job.done = 0;
            continue;
        }
        let k = s.round_cycles as f64;
        let by_rows = (spare_rows_per_cycle * s.units_per_row * k + 1e-9).floor() as usize;
        let u = idle.min(by_rows);
        if u == 0 {
            break;
        }
        let rate = u as f64 * (s.macs as f64 / s.units as f64) / k;
        let rest = s.macs - job.done;
        let finish = rest as f64 / rate;
        let (m, used) = if finish <= dt {
            (rest, finish)
        } else {
            (((rate * dt).floor() as u64).min(rest - 1), dt)
        };
        if m > 0 {
            tl.charge(s, m as f64 / s.macs as f64);
            // both edges round up so back-to-back intervals abut exactly
            let (a, b) = (t.ceil() as u64, (t + used).ceil() as u64);
            tl.push(frame, job.trigger, s, b - a, m, true, a);
            tm_equiv += m as f64 * s.cycles() as f64 / s.macs as f64;
            macs_total += m;
        }
        job.done += m;
        tl.frame_seg += m;
        t += used;
        dt -= used;
        if job.done == s.macs {
            job.layer += 1;
            job.done = 0;
        } else {
            break;
        }
    }
    (tm_equiv, macs_total)
}

/// Runs `frames` frames of the pipeline.
pub fn simulate(
    p: &PipelineSpec,
    plans: &PipelinePlans,
    mode: OrchestrationMode,
    cfg: &HardwareConfig,
    frames: usize,
) -> Result<SimReport> {
    cfg.validate()?;
    p.validate()?;
    if frames == 0 {
        return Err(Error::Parameter("frames must be >= 1".into()));
    }
    let peak = plans.seg.peak_bytes + plans.gaze.peak_bytes;
    if peak > cfg.act_storage_bytes() {
        return Err(Error::Simulation(format!(
            "activation buffer overflow: {peak} B live exceeds {} B",
            cfg.act_storage_bytes()
        )));
    }
    let seg_net = p.effective_seg()?;
    let lanes = cfg.lanes;
    let p_macs = cfg.macs_per_lane;
    let (main_lanes, seg_lanes, seg_scale) = match mode {
        OrchestrationMode::Concurrent { seg_macs } => {
            let split = match seg_macs {
                Some(s) => s,
                None => concurrent_split(p, cfg.total_macs())?,
            };
            let sl = split.div_ceil(p_macs);
            if split == 0 && !seg_net.layers.is_empty() || sl >= lanes {
                return Err(Error::Infeasible(format!(
                    "static split of {split} MACs leaves no lanes for one of the networks"
                )));
            }
            (lanes - sl, sl, split as f64 / (sl.max(1) * p_macs) as f64)
        }
        OrchestrationMode::PartialTimeMultiplexing { threshold } => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Error::Parameter(format!("threshold {threshold} not in (0, 1]")));
            }
            (lanes, lanes, 1.0)
        }
        OrchestrationMode::TimeMultiplexing => (lanes, lanes, 1.0),
    };
    let recon_net = NetworkSpec::new("recon", p.recon_layers.clone());
    let mut main = exec_network(Stream::Recon, &recon_net, None, main_lanes, cfg)?;
    main.extend(exec_network(Stream::Gaze, &p.gaze_net, Some(&plans.gaze), main_lanes, cfg)?);
    let seg = exec_network(Stream::Seg, &seg_net, Some(&plans.seg), seg_lanes.max(1), cfg)?;
    let seg_total: u64 = seg.iter().map(|e| e.macs).sum();
    let main_total: u64 = main.iter().map(|e| e.macs).sum();
    let n = p.seg_period_frames;
    let (link, link_bytes) = link_cycles(p, cfg)?;

    let mut tl = Timeline {
        cfg,
        now: 0,
        trace: Vec::new(),
        frame_main: 0,
        frame_seg: 0,
        stalls: StallCycles::default(),
        energy: EnergyReport::default(),
        act_words: 0.0,
    };
    let mut frame_stats = Vec::with_capacity(frames);
    let mut job: Option<SegJob> = None;
    let mut peak_speedup: f64 = 1.0;
    let mut corun_busy = 0u128;
    let mut corun_avail = 0u128;
    let mut idle_total = 0u64;
    // concurrent mode: cycles of segmentation work still owed in the current layer
    let mut cc_layer_left = 0.0f64;
    for f in 0..frames {
        let frame_start = tl.now;
        tl.frame_main = 0;
        tl.frame_seg = 0;
        let trigger = seg_total > 0 && f % n == 0;
        if trigger {
            if let Some(j) = &job {
                return Err(Error::Simulation(format!(
                    "segmentation deadline miss: instance from frame {} unfinished at frame {f}",
                    j.trigger
                )));
            }
            job = Some(SegJob {
                trigger: f,
                layer: 0,
                done: 0,
            });
            cc_layer_left = seg.first().map(|e| e.cycles() as f64 / seg_scale).unwrap_or(0.0);
        }
        let mut scheduled = main_total;
        if let (OrchestrationMode::TimeMultiplexing, Some(j)) = (mode, &job) {
            for e in &seg {
                tl.run(f, j.trigger, e);
            }
            tl.frame_seg += seg_total;
            scheduled += seg_total;
            job = None;
        }
        for e in &main {
            let start = tl.now;
            tl.run(f, f, e);
            tl.frame_main += e.macs;
            if let OrchestrationMode::PartialTimeMultiplexing { threshold } = mode {
                if let Some(j) = job.as_mut() {
                    if e.cycles() > 0 && e.utilization < threshold {
                        let (tm_equiv, m) = corun(&mut tl, f, e, start, &seg, j, lanes);
                        scheduled += m;
                        if m > 0 {
                            let idx = tl
                                .trace
                                .iter()
                                .rposition(|x| !x.shadow && x.start == start && x.layer == e.layer)
                                .expect("main interval recorded");
                            tl.trace[idx].corun_macs += m;
                            if e.kind.is_conv() {
                                peak_speedup = peak_speedup.max((e.cycles() as f64 + tm_equiv) / e.cycles() as f64);
                            }
                            corun_busy += (e.macs + m) as u128;
                            corun_avail += (e.cycles() as u128) * (lanes * p_macs) as u128;
                        }
                        if j.layer == seg.len() {
                            job = None;
                        }
                    }
                }
            }
        }
        // concurrent segmentation advances in the shadow of the frame
        if let (OrchestrationMode::Concurrent { .. }, Some(j)) = (mode, job.as_mut()) {
            let mut budget = (tl.now - frame_start) as f64;
            let mut t = frame_start;
            while budget > 0.0 && j.layer < seg.len() {
                let s = &seg[j.layer];
                let used = cc_layer_left.min(budget);
                let m = if used >= cc_layer_left {
                    s.macs - j.done
                } else {
                    let total = s.cycles() as f64 / seg_scale;
                    (((s.macs as f64) * used / total).floor() as u64).min(s.macs - j.done)
                };
                tl.charge(s, m as f64 / s.macs.max(1) as f64);
                tl.push(f, j.trigger, s, used.ceil() as u64, m, true, t);
                t += used.ceil() as u64;
                j.done += m;
                tl.frame_seg += m;
                scheduled += m;
                budget -= used;
                cc_layer_left -= used;
                if cc_layer_left <= 1e-9 {
                    j.layer += 1;
                    j.done = 0;
                    cc_layer_left = seg.get(j.layer).map(|e| e.cycles() as f64 / seg_scale).unwrap_or(0.0);
                }
            }
            if j.layer == seg.len() {
                job = None;
            } else if f + 1 == j.trigger + n {
                return Err(Error::Simulation(format!(
                    "segmentation deadline miss: {seg_lanes}-lane split cannot finish within {n} frames"
                )));
            }
        }
        // partial mode: whatever did not fit beside the gaze net runs before the deadline
        if let (OrchestrationMode::PartialTimeMultiplexing { .. }, Some(j)) = (mode, job.as_mut()) {
            if f + 1 == j.trigger + n {
                while j.layer < seg.len() {
                    let before = tl.frame_seg;
                    tl.run_remainder(f, j.trigger, &seg[j.layer], j.done);
                    scheduled += tl.frame_seg - before;
                    j.layer += 1;
                    j.done = 0;
                }
                job = None;
            }
        }
        let compute = tl.now - frame_start;
        if link > compute {
            idle_total += link - compute;
            tl.now += link - compute;
        }
        frame_stats.push(FrameStat {
            cycles: tl.now - frame_start,
            main_macs: tl.frame_main,
            seg_macs: tl.frame_seg,
            scheduled_macs: scheduled,
            link_cycles: link,
        });
    }
    let seg_pending_macs = job
        .map(|j| seg[j.layer..].iter().map(|e| e.macs).sum::<u64>() - j.done)
        .unwrap_or(0);

    let total_cycles = tl.now;
    let macs_executed: u64 = frame_stats.iter().map(|f| f.main_macs + f.seg_macs).sum();
    let mut layers: BTreeMap<(Stream, String), LayerStat> = BTreeMap::new();
    for i in &tl.trace {
        let s = layers.entry((i.stream, i.layer.clone())).or_insert_with(|| LayerStat {
            stream: Some(i.stream),
            layer: i.layer.clone(),
            ..Default::default()
        });
        s.executions += 1;
        s.macs += i.macs;
        if i.shadow {
            s.shadow_cycles += i.cycles;
        } else {
            s.cycles += i.cycles;
        }
    }
    let mut energy = tl.energy.clone();
    energy.offchip_words = link_bytes * frames as f64 / cfg.channel_tile as f64;
    let c = cfg.energy;
    energy.total = c.mac * energy.mac_ops + c.local * energy.local_accesses + c.gb * energy.gb_words + c.offchip * energy.offchip_words;
    energy.per_frame = energy.total / frames as f64;
    let worst = frame_stats.iter().map(|f| f.cycles).max().unwrap_or(0);
    if worst == 0 {
        return Err(Error::Simulation("empty workload: zero cycles".into()));
    }
    Ok(SimReport {
        mode,
        frames,
        total_cycles,
        idle_cycles: idle_total,
        frame_stats,
        layers: layers.into_values().collect(),
        stalls: tl.stalls,
        trace: tl.trace,
        macs_executed,
        seg_pending_macs,
        act_words_read: tl.act_words.round() as u64,
        act_words_per_cycle: tl.act_words / total_cycles as f64,
        energy,
        fps: cfg.freq_hz / worst as f64,
        fps_average: cfg.freq_hz * frames as f64 / total_cycles as f64,
        utilization: macs_executed as f64 / (total_cycles as f64 * cfg.total_macs() as f64),
        peak_corun_speedup: peak_speedup,
        corun_utilization: (corun_avail > 0).then(|| corun_busy as f64 / corun_avail as f64),
        seg_lanes: if matches!(mode, OrchestrationMode::Concurrent { .. }) { seg_lanes } else { lanes },
        freq_hz: cfg.freq_hz,
        total_macs_per_cycle: cfg.total_macs(),
        manifest: None,
    })
}

/// Utilization of one exclusive layer interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilPoint {
    pub frame: usize,
    pub stream: Stream,
    pub layer: String,
    pub kind: LayerKind,
    pub utilization: f64,
    pub below_threshold: bool,
}

/// Busy over available MACs per exclusive interval, co-run work included.
pub fn utilization_trace(r: &SimReport, threshold: f64) -> Vec<UtilPoint> {
    r.trace
        .iter()
        .filter(|i| !i.shadow)
        .map(|i| {
            let u = if i.cycles == 0 {
                0.0
            } else {
                ((i.macs + i.corun_macs) as f64 / (i.cycles as f64 * r.total_macs_per_cycle as f64)).min(1.0)
            };
            UtilPoint {
                frame: i.frame,
                stream: i.stream,
                layer: i.layer.clone(),
                kind: i.kind,
                utilization: u,
                below_threshold: u < threshold,
            }
        })
        .collect()
}

/// Frames per second over the slowest frame.
pub fn throughput(r: &SimReport) -> Result<f64> {
    if r.total_cycles == 0 {
        return Err(Error::Simulation("empty report".into()));
    }
    Ok(r.fps)
}

/// Energy per frame and efficiency relative to `baseline`; power is held
/// constant so efficiency follows throughput.
pub fn energy(r: &SimReport, baseline: Option<&SimReport>) -> Result<(f64, f64)> {
    if r.frames == 0 || r.total_cycles == 0 {
        return Err(Error::Simulation("empty report".into()));
    }
    let eff = match baseline {
        Some(b) if b.fps > 0.0 => r.fps / b.fps,
        Some(_) => return Err(Error::Simulation("baseline with zero throughput".into())),
        None => 1.0,
    };
    Ok((r.energy.per_frame, eff))
}

/// Checks from the trace that no layer of an instance starts before its
/// predecessors in that instance have finished.
pub fn check_dependencies(r: &SimReport, p: &PipelineSpec) -> Result<()> {
    let seg = p.effective_seg()?;
    let nets: [(Stream, &[LayerSpec]); 3] = [
        (Stream::Recon, &p.recon_layers),
        (Stream::Seg, &seg.layers),
        (Stream::Gaze, &p.gaze_net.layers),
    ];
    let mut spans: BTreeMap<(Stream, usize, &str), (u64, u64)> = BTreeMap::new();
    for i in &r.trace {
        let e = spans.entry((i.stream, i.instance, i.layer.as_str())).or_insert((i.start, i.end()));
        e.0 = e.0.min(i.start);
        e.1 = e.1.max(i.end());
    }
    for (idx, i) in r.trace.iter().enumerate() {
        let layers = nets.iter().find(|(s, _)| *s == i.stream).map(|x| x.1).unwrap_or(&[]);
        let Some(pos) = layers.iter().position(|l| l.id == i.layer) else { continue };
        // intrinsic order within a stream stands in for implicit predecessors
        let mut preds: Vec<&str> = layers[pos].pred.iter().map(String::as_str).collect();
        if pos > 0 {
            preds.push(&layers[pos - 1].id);
        }
        for pr in preds {
            if let Some(&(_, end)) = spans.get(&(i.stream, i.instance, pr)) {
                if i.start < end && i.macs > 0 && !(i.shadow && end == i.start) {
                    let first = spans.get(&(i.stream, i.instance, i.layer.as_str())).map(|s| s.0).unwrap_or(0);
                    if first < end {
                        return Err(Error::Plan {
                            index: idx,
                            msg: format!("{} starts at {first} before {pr} ends at {end}", i.layer),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Extra MACs beyond the configured array needed for `target_fps` under
/// time multiplexing, scaling the slowest frame linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraMacs {
    pub worst_frame_cycles: u64,
    pub required_macs: usize,
    pub extra_macs: usize,
    pub extra_fraction: f64,
}

pub fn extra_macs_for_target(p: &PipelineSpec, cfg: &HardwareConfig, target_fps: f64) -> Result<ExtraMacs> {
    if !(target_fps > 0.0) {
        return Err(Error::Parameter("target fps must be > 0".into()));
    }
    let plans = plan_pipeline(p, cfg)?;
    let r = simulate(p, &plans, OrchestrationMode::TimeMultiplexing, cfg, p.seg_period_frames)?;
    let worst = r.frame_stats.iter().map(|f| f.cycles).max().unwrap_or(0);
    let need = cfg.total_macs() as f64 * worst as f64 * target_fps / cfg.freq_hz;
    let required = need.ceil() as usize;
    let extra = required.saturating_sub(cfg.total_macs());
    Ok(ExtraMacs {
        worst_frame_cycles: worst,
        required_macs: required,
        extra_macs: extra,
        extra_fraction: extra as f64 / cfg.total_macs() as f64,
    })
}

/// One row of the optimization ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub name: String,
    pub mode: String,
    pub fps: f64,
    pub fps_average: f64,
    /// FPS over the previous row's FPS.
    pub step_ratio: f64,
    pub norm_energy_eff: f64,
    pub energy_per_frame: f64,
    pub utilization: f64,
    pub peak_corun_speedup: f64,
}

/// Configurations of the five ladder rows, each adding one capability.
pub fn ladder_configs(base: &HardwareConfig) -> Vec<(&'static str, bool, OrchestrationMode, HardwareConfig)> {
    let plain = HardwareConfig {
        input_buffer: false,
        depthwise_reuse: false,
        act_read_scale: 1.0,
        ..base.clone()
    };
    let buffered = HardwareConfig {
        input_buffer: true,
        ..plain.clone()
    };
    let partial = HardwareConfig {
        act_read_scale: 1.1,
        ..buffered.clone()
    };
    let reuse = HardwareConfig {
        depthwise_reuse: true,
        ..partial.clone()
    };
    vec![
        ("lens", true, OrchestrationMode::TimeMultiplexing, plain.clone()),
        ("+predict_then_focus", false, OrchestrationMode::TimeMultiplexing, plain),
        ("+input_buffer", false, OrchestrationMode::TimeMultiplexing, buffered),
        ("+partial_tm", false, OrchestrationMode::partial(), partial),
        ("+depthwise_reuse", false, OrchestrationMode::partial(), reuse),
    ]
}

/// Simulates one pipeline under one configuration.
pub fn run(p: &PipelineSpec, mode: OrchestrationMode, cfg: &HardwareConfig, frames: usize) -> Result<SimReport> {
    let plans = plan_pipeline(p, cfg)?;
    simulate(p, &plans, mode, cfg, frames)
}

/// Simulates the ladder; `lens` is the full-frame baseline pipeline.
pub fn ladder(main: &PipelineSpec, lens: &PipelineSpec, base: &HardwareConfig, frames: usize) -> Result<Vec<LadderRow>> {
    let mut reports = Vec::new();
    for (name, is_lens, mode, cfg) in ladder_configs(base) {
        let p = if is_lens { lens } else { main };
        let r = run(p, mode, &cfg, frames).map_err(|e| Error::Simulation(format!("ladder row {name}: {e}")))?;
        reports.push((name, r));
    }
    Ok(ladder_rows(&reports))
}

/// Ladder rows from per-row reports in ladder order; ratios are taken
/// against the previous and the first row.
pub fn ladder_rows(reports: &[(&str, SimReport)]) -> Vec<LadderRow> {
    let mut rows: Vec<LadderRow> = Vec::new();
    for (name, r) in reports {
        let (prev_fps, base_fps) = match (rows.last(), rows.first()) {
            (Some(a), Some(b)) => (a.fps, b.fps),
            _ => (r.fps, r.fps),
        };
        rows.push(LadderRow {
            name: name.to_string(),
            mode: r.mode.short().to_string(),
            fps: r.fps,
            fps_average: r.fps_average,
            step_ratio: r.fps / prev_fps,
            norm_energy_eff: r.fps / base_fps,
            energy_per_frame: r.energy.per_frame,
            utilization: r.utilization,
            peak_corun_speedup: r.peak_corun_speedup,
        });
    }
    rows
}

/// Flat per-interval CSV of a report.
pub fn report_csv(r: &SimReport) -> String {
    let mut s = String::from("frame,stream,instance,layer,kind,start,cycles,macs,corun_macs,lanes,shadow,utilization\n");
    for i in &r.trace {
        let u = if i.cycles == 0 {
            0.0
        } else {
            ((i.macs + i.corun_macs) as f64 / (i.cycles as f64 * r.total_macs_per_cycle as f64)).min(1.0)
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.6}\n",
            i.frame,
            i.stream.as_str(),
            i.instance,
            i.layer,
            i.kind,
            i.start,
            i.cycles,
            i.macs,
            i.corun_macs,
            i.lanes,
            i.shadow,
            u
        ));
    }
    s
}

pub fn ladder_csv(rows: &[LadderRow]) -> String {
    let mut s = String::from("row,name,mode,fps,fps_average,step_ratio,norm_energy_eff,energy_per_frame,utilization,peak_corun_speedup\n");
    for (i, r) in rows.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{:.2},{:.2},{:.4},{:.4},{:.6e},{:.4},{:.4}\n",
            i + 1,
            r.name,
            r.mode,
            r.fps,
            r.fps_average,
            r.step_ratio,
            r.norm_energy_eff,
            r.energy_per_frame,
            r.utilization,
            r.peak_corun_speedup
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::LayerKind as K;

    fn single(layer: LayerSpec) -> PipelineSpec {
        let gaze = NetworkSpec::new("g", vec![layer]);
        PipelineSpec::new(NetworkSpec::empty("s"), gaze, None, 1)
    }

    fn quiet() -> HardwareConfig {
        HardwareConfig {
            link_latency_cycles: 0,
            link_bytes_per_cycle: 1e9,
            weight_gb_bytes_per_cycle: 1e9,
            ..HardwareConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = default_config();
        assert_eq!(c.total_macs(), 1024);
        assert_eq!(c.peak_macs_per_second(), 1024.0 * 370e6);
        assert_eq!(c.act_storage_bytes(), 1 << 20);
        assert_eq!(c.act_rows_per_round(), 32);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<HardwareConfig>(&text).unwrap(), c);
    }

    #[test]
    fn ideal_pointwise_roofline() {
        let p = single(LayerSpec::conv("pw", K::PointwiseConv, [16, 16, 64], 128, 1, 1));
        let cfg = quiet();
        let plans = plan_pipeline(&p, &cfg).unwrap();
        let r = simulate(&p, &plans, OrchestrationMode::TimeMultiplexing, &cfg, 1).unwrap();
        assert_eq!(r.total_cycles, 16 * 16 * 64 * 128 / 1024);
        assert!((r.utilization - 1.0).abs() < 1e-12);
        assert_eq!(r.stalls, StallCycles::default());
    }

    #[test]
    fn buffer_saving_values() {
        let c = default_config();
        let s3 = buffer_bandwidth_saving(3, &c).unwrap();
        assert!((0.5..=0.6).contains(&s3));
        assert_eq!(buffer_bandwidth_saving(1, &c).unwrap(), 0.0);
        assert!(buffer_bandwidth_saving(0, &c).is_err());
    }

    #[test]
    fn split_symmetric_and_gaze_only() {
        let l = LayerSpec::conv("a", K::PointwiseConv, [8, 8, 16], 16, 1, 1);
        let seg = NetworkSpec::new("s", vec![l.clone()]);
        let gaze = NetworkSpec::new("g", vec![l]);
        let p = PipelineSpec::new(seg, gaze.clone(), None, 1);
        assert_eq!(concurrent_split(&p, 1024).unwrap(), 512);
        let p = PipelineSpec::new(NetworkSpec::empty("s"), gaze, None, 1);
        assert_eq!(concurrent_split(&p, 1024).unwrap(), 0);
        assert!(concurrent_split(&p, 4).is_err());
    }

    #[test]
    fn freq_scales_fps_not_energy() {
        let p = single(LayerSpec::conv("c", K::GenericConv, [16, 16, 8], 32, 3, 1));
        let a = quiet();
        let b = HardwareConfig { freq_hz: 2.0 * a.freq_hz, ..a.clone() };
        let plans = plan_pipeline(&p, &a).unwrap();
        let ra = simulate(&p, &plans, OrchestrationMode::TimeMultiplexing, &a, 2).unwrap();
        let rb = simulate(&p, &plans, OrchestrationMode::TimeMultiplexing, &b, 2).unwrap();
        assert!((rb.fps / ra.fps - 2.0).abs() < 1e-12);
        assert_eq!(ra.energy.per_frame, rb.energy.per_frame);
    }

    #[test]
    fn idle_interval_zero_utilization() {
        let p = single(LayerSpec::conv("c", K::GenericConv, [8, 8, 8], 16, 3, 1));
        let cfg = HardwareConfig {
            link_latency_cycles: 1_000_000,
            ..quiet()
        };
        let plans = plan_pipeline(&p, &cfg).unwrap();
        let r = simulate(&p, &plans, OrchestrationMode::TimeMultiplexing, &cfg, 1).unwrap();
        assert!(r.idle_cycles > 0);
        let layer_sum: u64 = r.layers.iter().map(|l| l.cycles).sum();
        assert_eq!(layer_sum + r.idle_cycles, r.total_cycles);
    }

    #[test]
    fn zero_frames_rejected() {
        let p = single(LayerSpec::conv("c", K::GenericConv, [8, 8, 8], 16, 3, 1));
        let cfg = quiet();
        let plans = plan_pipeline(&p, &cfg).unwrap();
        assert!(simulate(&p, &plans, OrchestrationMode::TimeMultiplexing, &cfg, 0).is_err());
    }

    #[test]
    fn weight_stall_ping_pong() {
        let c = default_config();
        // one chunk, nothing to overlap: load time exposed
        assert_eq!(weight_stall(6400, 1000, 0.0, &c).0, 100);
        // two chunks, second hidden behind a long first compute
        assert_eq!(weight_stall(2 * 65536, 1 << 20, 1e9, &c).0, 0);
    }
}
