//! Acceptance suite. Prints one PASS/FAIL line per criterion, followed by
//! its individual checks, and exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use eyecod::mapper::{act_address, act_index, ActLayout};
use eyecod::networks::LENS_FRAME;
use eyecod::optics::{objective_value, reconstruct, simulate_capture, MaskKind, MaskPair, ReconSettings, SceneImage};
use eyecod::oracle::{check_case, finite_diff_grad, random_case, tikhonov_bruteforce};
use eyecod::roi::{roi_for_frame, seg_macs_per_frame, RoiPolicy, RoiSource};
use eyecod::sim::{
    self, buffer_bandwidth_saving, check_dependencies, concurrent_split, ladder_configs, plan_pipeline,
    HardwareConfig, OrchestrationMode, SimReport, Stream,
};
use eyecod::workload::{amortized_breakdown, lens_baseline, load_workload, LayerKind, PipelineSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRAMES: usize = 100;
const MIB: f64 = 1024.0 * 1024.0;

struct Check {
    name: String,
    pass: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, pass: bool, name: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass });
    }

    /// `|got/want - 1| <= rel`.
    fn rel(&mut self, what: &str, got: f64, want: f64, rel: f64) {
        let pass = (got / want - 1.0).abs() <= rel;
        self.check(pass, format!("{what}: {got:.4} vs {want} +-{:.0}%", rel * 100.0));
    }

    /// `|got - want| <= abs`.
    fn abs(&mut self, what: &str, got: f64, want: f64, abs: f64) {
        // slack for values that land exactly on a rounding step
        let pass = (got - want).abs() <= abs + 1e-9;
        self.check(pass, format!("{what}: {got:.4} vs {want} +-{abs}"));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn shipped() -> PipelineSpec {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../eyecod/data");
    load_workload(dir.join("pipeline.json")).expect("shipped pipeline loads")
}

fn row(i: usize) -> (OrchestrationMode, HardwareConfig) {
    let (_, _, mode, cfg) = ladder_configs(&HardwareConfig::default()).remove(i);
    (mode, cfg)
}

fn simulate_row(p: &PipelineSpec, i: usize) -> SimReport {
    let (mode, cfg) = row(i);
    sim::run(p, mode, &cfg, FRAMES).expect("ladder row simulates")
}

/// Exclusive timeline cycles of gaze layers, split into depthwise and all.
fn gaze_cycles(r: &SimReport, p: &PipelineSpec) -> (u64, u64) {
    let mut dw = 0;
    let mut all = 0;
    for l in r.layers.iter().filter(|l| l.stream == Some(Stream::Gaze)) {
        all += l.cycles;
        if p.gaze_net.layer(&l.layer).map(|s| s.kind) == Some(LayerKind::DepthwiseConv) {
            dw += l.cycles;
        }
    }
    (dw, all)
}

fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn optics() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut max_err, mut max_grad) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n1 = rng.random_range(1..=6);
        let n2 = rng.random_range(1..=6);
        let m1 = rng.random_range(n1..=n1 + 3);
        let m2 = rng.random_range(n2..=n2 + 3);
        let masks = MaskPair::new(random_matrix(m1, n1, &mut rng), random_matrix(m2, n2, &mut rng), MaskKind::Real)
            .expect("random masks are valid");
        let y = random_matrix(m1, m2, &mut rng);
        let eps = 10f64.powf(rng.random_range(-3.0..0.0));
        let fast = reconstruct(&y, &masks, ReconSettings::new(eps).unwrap()).unwrap().values;
        let slow = tikhonov_bruteforce(&y, &masks, eps).unwrap();
        max_err = max_err.max((&fast - &slow).abs().max());
        let f = |x: &DMatrix<f64>| objective_value(x, &y, &masks, eps).unwrap();
        let g = finite_diff_grad(f, &fast, 1e-6).unwrap().abs().max();
        let g0 = finite_diff_grad(f, &DMatrix::zeros(n1, n2), 1e-6).unwrap().abs().max();
        max_grad = max_grad.max(g / g0.max(f64::MIN_POSITIVE));
    }
    c.check(max_err <= 1e-8, format!("closed form vs Kronecker solve, 50 cases: max err {max_err:.2e} <= 1e-8"));
    c.check(max_grad <= 1e-4, format!("relative gradient at the minimizer {max_grad:.2e} <= 1e-4"));

    let n = 6;
    let phi = DMatrix::identity(n, n) * 2.0 + random_matrix(n, n, &mut rng) * 0.2;
    let masks = MaskPair::new(phi.clone(), phi.transpose(), MaskKind::Real).unwrap();
    let scene = SceneImage::new(random_matrix(n, n, &mut rng).abs()).unwrap();
    let y = simulate_capture(&scene, &masks, 0.0, 0).unwrap();
    let back = reconstruct(&y.channels[0], &masks, ReconSettings::new(1e-12).unwrap()).unwrap();
    let err = (&back.values - &scene.values).abs().max();
    c.check(err <= 1e-6, format!("invertible noiseless round trip: err {err:.2e} <= 1e-6"));
    c
}

fn calibration() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let f = amortized_breakdown(&p).unwrap().fractions();
    let share = |k: LayerKind| 100.0 * f.get(&k).copied().unwrap_or(0.0);
    c.abs("generic conv share %", share(LayerKind::GenericConv), 8.8, 3.0);
    c.abs("point-wise share %", share(LayerKind::PointwiseConv), 68.8, 3.0);
    c.abs("depth-wise share %", share(LayerKind::DepthwiseConv), 7.9, 3.0);
    c.abs("fully-connected share %", share(LayerKind::FullyConnected), 0.001, 3.0);
    c.abs("matmul share %", share(LayerKind::Matmul), 14.5, 3.0);
    c.rel("segmentation MACs", p.seg_net.total_macs().unwrap() as f64, 140e6, 0.10);
    c.rel("gaze MACs", p.gaze_net.total_macs().unwrap() as f64, 1.06e9, 0.10);
    c
}

fn depthwise_baseline() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let (dw, all) = gaze_cycles(&simulate_row(&p, 2), &p);
    let share = 100.0 * dw as f64 / all as f64;
    c.abs("depth-wise % of gaze time without reuse", share, 33.6, 5.0);
    c
}

fn intra_channel_reuse() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let (before, _) = gaze_cycles(&simulate_row(&p, 3), &p);
    let (after, _) = gaze_cycles(&simulate_row(&p, 4), &p);
    let cut = 100.0 * (1.0 - after as f64 / before as f64);
    c.abs("depth-wise time reduction %", cut, 71.0, 10.0);
    c
}

fn orchestration() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let partial = simulate_row(&p, 3);
    c.rel("peak co-run speedup", partial.peak_corun_speedup, 2.31, 0.15);
    let split = concurrent_split(&p, HardwareConfig::default().total_macs()).unwrap();
    c.check(split == 4, format!("concurrent split gives segmentation {split} MACs == 4"));
    let full = simulate_row(&p, 4);
    c.check(full.utilization > 0.9, format!("partial-mode utilization {:.3} > 0.9", full.utilization));
    let total = full.total_macs_per_cycle as f64;
    let (macs, cycles) = full
        .trace
        .iter()
        .filter(|i| i.stream == Stream::Gaze && i.kind.is_conv())
        .fold((0u64, 0u64), |(m, cy), i| (m + i.macs, cy + i.cycles));
    let gaze = macs as f64 / (cycles as f64 * total);
    c.check(gaze < 0.8, format!("gaze convolution utilization on its own {gaze:.3} < 0.8"));
    c
}

fn memory() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let plans = plan_pipeline(&p, &HardwareConfig::default()).unwrap();
    let seg = plans.seg.unpartitioned_peak_bytes as f64;
    let gaze = plans.gaze.unpartitioned_peak_bytes as f64;
    c.rel("unpartitioned peak MiB", (seg + gaze) / MIB, 2.78, 0.10);
    c.rel("segmentation peak MiB", seg / MIB, 2.08, 0.10);
    c.rel("gaze peak MiB", gaze / MIB, 0.70, 0.10);
    let tiled = (plans.seg.peak_bytes + plans.gaze.peak_bytes) as f64;
    c.abs("partitioned peak % of unpartitioned", 100.0 * tiled / (seg + gaze), 36.0, 8.0);
    c
}

fn buffering() -> Criterion {
    let mut c = Criterion::default();
    let cfg = HardwareConfig::default();
    let saving = 100.0 * buffer_bandwidth_saving(3, &cfg).unwrap();
    c.check((50.0..=60.0).contains(&saving), format!("K=3 read bandwidth saving {saving:.1}% in [50, 60]"));
    let p = shipped();
    for i in [2, 4] {
        let r = simulate_row(&p, i);
        let name = ladder_configs(&cfg)[i].0;
        c.check(r.stalls.act_read == 0, format!("{name}: act read stalls {} == 0", r.stalls.act_read));
    }
    c
}

fn ladder() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let lens = lens_baseline(&p, LENS_FRAME).unwrap();
    let rows = sim::ladder(&p, &lens, &HardwareConfig::default(), FRAMES).unwrap();
    let fps = [96.34, 191.94, 233.64, 299.04, 385.66];
    let steps = [1.99, 1.22, 1.28, 1.29];
    for (r, want) in rows[1..].iter().zip(steps) {
        c.rel(&format!("{} step ratio", r.name), r.step_ratio, want, 0.15);
    }
    for (r, want) in rows.iter().zip(fps) {
        c.rel(&format!("{} FPS", r.name), r.fps, want, 0.20);
    }
    let monotone = rows.windows(2).all(|w| w[1].fps > w[0].fps);
    c.check(monotone, "FPS increases at every row");
    let last = rows.last().unwrap().fps;
    c.check(last > 240.0, format!("final configuration {last:.1} FPS > 240"));
    c
}

fn functional_equivalence() -> Criterion {
    let mut c = Criterion::default();
    let cfg = HardwareConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut int_bad, mut real_max, mut errors) = (0, 0.0f64, Vec::new());
    for i in 0..200 {
        let kind = LayerKind::ALL[i % LayerKind::ALL.len()];
        let case = random_case(kind, &mut rng);
        match check_case(&case, &cfg) {
            Ok(d) if case.integer => int_bad += usize::from(d != 0.0),
            Ok(d) => real_max = real_max.max(d),
            Err(e) => errors.push(format!("case {i} ({kind}): {e}")),
        }
    }
    c.check(errors.is_empty(), format!("200 random layers replay without error {errors:?}"));
    c.check(int_bad == 0, format!("integer cases exact: {int_bad} mismatches"));
    c.check(real_max <= 1e-6, format!("real cases max diff {real_max:.2e} <= 1e-6"));

    let mut bad = 0;
    for _ in 0..50 {
        let dims = [rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=32)];
        let layout = ActLayout::new(dims, &cfg);
        let mut seen = HashSet::new();
        for h in 0..dims[0] {
            for w in 0..dims[1] {
                for ch in 0..dims[2] {
                    let a = act_address(&layout, h, w, ch).unwrap();
                    let ok = seen.insert((a.bank, a.bank_addr, a.lane)) && act_index(&layout, a).unwrap() == [h, w, ch];
                    bad += usize::from(!ok);
                }
            }
        }
    }
    c.check(bad == 0, format!("address maps bijective on 50 layouts: {bad} collisions"));
    c
}

fn pipeline_properties() -> Criterion {
    let mut c = Criterion::default();
    let p = shipped();
    let cfg = HardwareConfig::default();
    let (mut conserved, mut bounded, mut ordered) = (true, true, true);
    for m in [OrchestrationMode::TimeMultiplexing, OrchestrationMode::concurrent(), OrchestrationMode::partial()] {
        let r = sim::run(&p, m, &cfg, FRAMES).unwrap();
        for f in &r.frame_stats {
            conserved &= f.main_macs + f.seg_macs == f.scheduled_macs;
            bounded &= f.cycles * r.total_macs_per_cycle as u64 >= f.main_macs + f.seg_macs;
        }
        ordered &= check_dependencies(&r, &p).is_ok();
    }
    c.check(conserved, "executed MACs equal scheduled MACs in every frame, all modes");
    c.check(bounded, "frame cycles at or above the ideal MAC bound");
    c.check(ordered, "no layer starts before its predecessors finish");

    let policy = RoiPolicy::default();
    let stale = (policy.pipeline_delay_frames..2000).all(|t| match roi_for_frame(t, &policy) {
        RoiSource::Generation { staleness, .. } => (50..100).contains(&staleness),
        RoiSource::Bootstrap => false,
    });
    c.check(stale, "ROI staleness in [50, 100) for every frame after the first segmentation");

    let seg = p.seg_net.total_macs().unwrap();
    let at50 = seg_macs_per_frame(seg, 50).unwrap();
    for (n, table) in [(25, 2.5), (50, 1.3), (100, 0.7)] {
        let scaled = seg_macs_per_frame(seg, n).unwrap() / at50 * 1.3;
        c.abs(&format!("segmentation M/frame at N={n}, scaled to the N=50 entry"), scaled, table, 0.1);
    }
    c
}

type CriterionFn = fn() -> Criterion;

fn main() {
    let criteria: [(&str, CriterionFn); 10] = [
        ("optics correctness", optics),
        ("workload calibration", calibration),
        ("depth-wise baseline", depthwise_baseline),
        ("intra-channel reuse", intra_channel_reuse),
        ("orchestration", orchestration),
        ("memory", memory),
        ("buffering", buffering),
        ("system ladder", ladder),
        ("functional equivalence", functional_equivalence),
        ("pipeline properties", pipeline_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let c = run();
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!("criterion {:2} {name:24} {verdict} ({:.1} s)", i + 1, t.elapsed().as_secs_f64());
        for ch in &c.checks {
            println!("    [{}] {}", if ch.pass { "ok" } else { "xx" }, ch.name);
        }
        failed += usize::from(!c.passed());
    }
    println!("\nacceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
