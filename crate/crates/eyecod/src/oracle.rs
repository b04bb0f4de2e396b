//! Slow, independent references: direct layer execution, a Kronecker
//! normal-equation solve, central differences and functional replay of
//! mapping and partition plans.
//!
//! Weight layouts: generic `[o][ci][kh][kw]`; point-wise, matmul and
//! fully-connected `[o][ci]` (flattened `h, w, c` input for the latter);
//! depth-wise `[c][kh][kw]`; single-input element-wise `[c]` scales, while
//! multi-input element-wise layers add their inputs and take no weights.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use rand::Rng;

use crate::mapper::{
    act_address, aligned_concat_offsets, fused_chains, map_shape, plan_with_grid, reshape_map, ActLayout, HaloMode,
    MapShape, PartitionPlan, Region, ReshapeOp, ReuseScheme, TileRegion, UpsampleMode,
};
use crate::optics::MaskPair;
use crate::sim::HardwareConfig;
use crate::tensor::DenseTensor;
use crate::workload::{LayerKind, LayerSpec, NetworkSpec, Padding};

/// Number of weights `dense_layer` expects.
pub fn weight_len(layer: &LayerSpec) -> usize {
    let (ci, co, k2) = (layer.in_c(), layer.out_c, layer.k * layer.k);
    match layer.kind {
        LayerKind::GenericConv => co * ci * k2,
        LayerKind::PointwiseConv | LayerKind::Matmul => co * ci,
        LayerKind::FullyConnected => co * layer.input.iter().product::<usize>(),
        LayerKind::DepthwiseConv => ci * k2,
        LayerKind::Elementwise if layer.pred.len() <= 1 => ci,
        _ => 0,
    }
}

fn leading_pad(n: usize, n_out: usize, k: usize, s: usize, pad: Padding) -> isize {
    if pad == Padding::Valid {
        return 0;
    }
    let total = ((n_out - 1) * s + k) as isize - n as isize;
    total.max(0) / 2
}

fn check_inputs(layer: &LayerSpec, inputs: &[DenseTensor], weights: &[f64]) -> Result<()> {
    layer.validate_local()?;
    let want = layer.pred.len().max(1);
    if inputs.len() != want {
        return Err(Error::Shape(format!("{} expects {want} inputs, got {}", layer.id, inputs.len())));
    }
    let [h, w, c] = layer.input;
    let mut csum = 0;
    for t in inputs {
        let ok = match layer.kind {
            LayerKind::Concat => t.dims[0] == h && t.dims[1] == w,
            _ => t.dims == layer.input,
        };
        if !ok {
            return Err(Error::Shape(format!("{}: input {:?} vs declared {:?}", layer.id, t.dims, layer.input)));
        }
        csum += t.dims[2];
    }
    if layer.kind == LayerKind::Concat && csum != c {
        return Err(Error::Shape(format!("{}: concat channels {csum} != {c}", layer.id)));
    }
    if weights.len() != weight_len(layer) {
        return Err(Error::Shape(format!(
            "{}: {} weights, expected {}",
            layer.id,
            weights.len(),
            weight_len(layer)
        )));
    }
    Ok(())
}

/// Textbook execution of one layer.
pub fn dense_layer(layer: &LayerSpec, inputs: &[DenseTensor], weights: &[f64]) -> Result<DenseTensor> {
    check_inputs(layer, inputs, weights)?;
    let [h, w, c] = layer.input;
    let [ho, wo, co] = layer.output()?;
    let k = layer.k;
    let s = layer.stride;
    let x = &inputs[0];
    let pt = leading_pad(h, ho, k, s, layer.pad);
    let pl = leading_pad(w, wo, k, s, layer.pad);
    let at = |oh: usize, kh: usize| oh as isize * s as isize - pt + kh as isize;
    let al = |ow: usize, kw: usize| ow as isize * s as isize - pl + kw as isize;
    let mut out = DenseTensor::zeros([ho, wo, co]);
    match layer.kind {
        LayerKind::GenericConv => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for o in 0..co {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for kh in 0..k {
                                for kw in 0..k {
                                    let wv = weights[((o * c + ci) * k + kh) * k + kw];
                                    acc += wv * x.get_padded(at(oh, kh), al(ow, kw), ci);
                                }
                            }
                        }
                        out.set(oh, ow, o, acc);
                    }
                }
            }
        }
        LayerKind::PointwiseConv | LayerKind::Matmul => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for o in 0..co {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            acc += weights[o * c + ci] * x.get_padded(at(oh, 0), al(ow, 0), ci);
                        }
                        out.set(oh, ow, o, acc);
                    }
                }
            }
        }
        LayerKind::FullyConnected => {
            let n = h * w * c;
            for o in 0..co {
                let acc: f64 = (0..n).map(|i| weights[o * n + i] * x.data[i]).sum();
                out.set(0, 0, o, acc);
            }
        }
        LayerKind::DepthwiseConv => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for ch in 0..c {
                        let mut acc = 0.0;
                        for kh in 0..k {
                            for kw in 0..k {
                                acc += weights[(ch * k + kh) * k + kw] * x.get_padded(at(oh, kh), al(ow, kw), ch);
                            }
                        }
                        out.set(oh, ow, ch, acc);
                    }
                }
            }
        }
        LayerKind::Elementwise => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for ch in 0..c {
                        let v = if inputs.len() == 1 {
                            weights[ch] * x.get(oh, ow, ch)
                        } else {
                            inputs.iter().map(|t| t.get(oh, ow, ch)).sum()
                        };
                        out.set(oh, ow, ch, v);
                    }
                }
            }
        }
        LayerKind::Downsample => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for ch in 0..c {
                        out.set(oh, ow, ch, x.get(oh * s, ow * s, ch));
                    }
                }
            }
        }
        LayerKind::Upsample => {
            for oh in 0..ho {
                for ow in 0..wo {
                    for ch in 0..c {
                        out.set(oh, ow, ch, x.get(oh / s, ow / s, ch));
                    }
                }
            }
        }
        LayerKind::Concat => {
            let mut base = 0;
            for t in inputs {
                for oh in 0..ho {
                    for ow in 0..wo {
                        for ch in 0..t.dims[2] {
                            out.set(oh, ow, base + ch, t.get(oh, ow, ch));
                        }
                    }
                }
                base += t.dims[2];
            }
        }
    }
    Ok(out)
}

/// Kronecker operator `A` with `vec(Φ_L X Φ_Rᵀ) = A vec(X)`, column-major vec.
fn kronecker(masks: &MaskPair) -> DMatrix<f64> {
    let (l, r) = (&masks.phi_left, &masks.phi_right);
    let (m1, n1) = l.shape();
    let (m2, n2) = r.shape();
    let mut a = DMatrix::zeros(m1 * m2, n1 * n2);
    for i in 0..m2 {
        for j in 0..n2 {
            for p in 0..m1 {
                for q in 0..n1 {
                    a[(i * m1 + p, j * n1 + q)] = r[(i, j)] * l[(p, q)];
                }
            }
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: DMatrix<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .expect("non-empty");
        if a[(piv, col)].abs() < 1e-300 {
            return Err(Error::Parameter("normal equations are singular".into()));
        }
        a.swap_rows(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[(row, col)] / a[(col, col)];
            if f != 0.0 {
                for k in col..n {
                    a[(row, k)] -= f * a[(col, k)];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[(row, k)] * x[k]).sum();
        x[row] = (b[row] - s) / a[(row, row)];
    }
    Ok(x)
}

/// Solves `(AᵀA + εI) vec(X) = Aᵀ vec(y)` directly.
pub fn tikhonov_bruteforce(y: &DMatrix<f64>, masks: &MaskPair, epsilon: f64) -> Result<DMatrix<f64>> {
    let (n1, n2) = (masks.phi_left.ncols(), masks.phi_right.ncols());
    if n1 > 6 || n2 > 6 {
        return Err(Error::Parameter(format!("scene {n1}x{n2} too large for brute force (max 6)")));
    }
    if y.shape() != (masks.phi_left.nrows(), masks.phi_right.nrows()) {
        return Err(Error::Shape(format!("measurement {:?} does not match masks", y.shape())));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter("epsilon must be finite and >= 0".into()));
    }
    let a = kronecker(masks);
    let n = n1 * n2;
    let mut normal = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            normal[(i, j)] = (0..a.nrows()).map(|r| a[(r, i)] * a[(r, j)]).sum::<f64>();
        }
        normal[(i, i)] += epsilon;
    }
    let yv: Vec<f64> = y.iter().copied().collect();
    let rhs: Vec<f64> = (0..n).map(|i| (0..a.nrows()).map(|r| a[(r, i)] * yv[r]).sum()).collect();
    let x = solve_dense(normal, rhs)?;
    Ok(DMatrix::from_column_slice(n1, n2, &x))
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_grad(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::Parameter("step must be > 0".into()));
    }
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    let mut p = x.clone();
    for i in 0..x.len() {
        let v = x[i];
        p[i] = v + h;
        let fp = f(&p);
        p[i] = v - h;
        let fm = f(&p);
        p[i] = v;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Activations of one layer known inside one tile.
struct Known<'a> {
    t: &'a DenseTensor,
    region: Region,
}

impl Known<'_> {
    fn read(&self, h: usize, w: usize, c: usize, index: usize) -> Result<f64> {
        if !self.region.contains(h, w) {
            return Err(Error::Plan {
                index,
                msg: format!("read of ({h},{w}) outside available region {:?}", self.region),
            });
        }
        Ok(self.t.get(h, w, c))
    }
}

/// Executes one tile of a compute layer in the mapper's lane-round order.
#[allow(clippy::too_many_arguments)]
fn replay_tile(
    layer: &LayerSpec,
    tile: &TileRegion,
    ins: &[Known],
    weights: &[f64],
    lanes: usize,
    scheme: Option<ReuseScheme>,
    cfg: &HardwareConfig,
    out: &mut DenseTensor,
) -> Result<()> {
    let r = tile.computed;
    let [h, w, c] = layer.input;
    let [ho, wo, _] = layer.output()?;
    let k = layer.k;
    let s = layer.stride as isize;
    let pt = leading_pad(h, ho, k, layer.stride, layer.pad);
    let pl = leading_pad(w, wo, k, layer.stride, layer.pad);
    let shape = MapShape::from_layer(layer)?.with_output(r.height(), r.width());
    let m = map_shape(&layer.id, shape, lanes, scheme, cfg)?;
    let p = m.macs_per_lane;
    let (th, tw) = (r.height(), r.width());
    let segs = if matches!(layer.kind, LayerKind::GenericConv | LayerKind::DepthwiseConv) {
        tw.div_ceil(p)
    } else {
        1
    };
    let expect = match layer.kind {
        LayerKind::GenericConv => c * k,
        LayerKind::PointwiseConv | LayerKind::Matmul => c,
        LayerKind::FullyConnected => h * w * c,
        LayerKind::DepthwiseConv => k,
        _ => 1,
    };
    let co = out.dims[2];
    let mut hits = vec![0usize; th * tw * co];
    let mut acc = vec![0.0f64; th * tw * co];
    let in_region = tile.input;
    let mut err: Option<Error> = None;
    let mut count = 0usize;
    let read = |idx: usize, ih: isize, iw: isize, ch: usize, count: usize| -> Result<f64> {
        if ih < 0 || iw < 0 || ih as usize >= h || iw as usize >= w {
            return Ok(0.0);
        }
        let (ih, iw) = (ih as usize, iw as usize);
        if !in_region.contains(ih, iw) {
            return Err(Error::Plan {
                index: count,
                msg: format!("{} reads ({ih},{iw}) outside tile input {:?}", layer.id, in_region),
            });
        }
        ins[idx].read(ih, iw, ch, count)
    };
    m.for_each_unit(|_round, _lane, u| {
        if err.is_some() {
            return;
        }
        count += 1;
        let mut body = || -> Result<()> {
            match layer.kind {
                LayerKind::GenericConv | LayerKind::DepthwiseConv => {
                    let (lh, seg) = (u.row_unit / segs, u.row_unit % segs);
                    for i in 0..p {
                        let lw = seg * p + i;
                        if lw >= tw {
                            break;
                        }
                        let (oh, ow) = (r.rows[0] + lh, r.cols[0] + lw);
                        let mut sum = 0.0;
                        for kw in 0..k {
                            let wv = if layer.kind == LayerKind::GenericConv {
                                weights[((u.ch * c + u.in_ch) * k + u.kh) * k + kw]
                            } else {
                                weights[(u.ch * k + u.kh) * k + kw]
                            };
                            let ih = oh as isize * s - pt + u.kh as isize;
                            let iw = ow as isize * s - pl + kw as isize;
                            sum += wv * read(0, ih, iw, u.in_ch, count)?;
                        }
                        let o = (lh * tw + lw) * co + u.ch;
                        acc[o] += sum;
                        hits[o] += 1;
                    }
                }
                LayerKind::PointwiseConv | LayerKind::Matmul | LayerKind::Elementwise => {
                    for i in 0..p {
                        let pos = u.row_unit * p + i;
                        if pos >= th * tw {
                            break;
                        }
                        let (lh, lw) = (pos / tw, pos % tw);
                        let (oh, ow) = (r.rows[0] + lh, r.cols[0] + lw);
                        let ih = oh as isize * s - pt;
                        let iw = ow as isize * s - pl;
                        let v = match layer.kind {
                            LayerKind::Elementwise if ins.len() == 1 => weights[u.ch] * read(0, ih, iw, u.ch, count)?,
                            LayerKind::Elementwise => {
                                let mut t = 0.0;
                                for j in 0..ins.len() {
                                    t += read(j, ih, iw, u.ch, count)?;
                                }
                                t
                            }
                            _ => weights[u.ch * c + u.in_ch] * read(0, ih, iw, u.in_ch, count)?,
                        };
                        let o = (lh * tw + lw) * co + u.ch;
                        acc[o] += v;
                        hits[o] += 1;
                    }
                }
                LayerKind::FullyConnected => {
                    let n = h * w * c;
                    let (ih, rest) = (u.in_ch / (w * c), u.in_ch % (w * c));
                    let v = read(0, ih as isize, (rest / c) as isize, rest % c, count)?;
                    acc[u.ch] += weights[u.ch * n + u.in_ch] * v;
                    hits[u.ch] += 1;
                }
                _ => {}
            }
            Ok(())
        };
        if let Err(e) = body() {
            err = Some(e);
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    for lh in 0..th {
        for lw in 0..tw {
            for ch in 0..co {
                let o = (lh * tw + lw) * co + ch;
                if hits[o] != expect {
                    return Err(Error::Plan {
                        index: o,
                        msg: format!(
                            "{}: output ({},{},{ch}) covered {} times, expected {expect}",
                            layer.id,
                            r.rows[0] + lh,
                            r.cols[0] + lw,
                            hits[o]
                        ),
                    });
                }
                out.set(r.rows[0] + lh, r.cols[0] + lw, ch, acc[o]);
            }
        }
    }
    Ok(())
}

/// Cuts `region` out of a known tensor through the partition address map.
fn partition(t: &Known, region: Region, cfg: &HardwareConfig, index: usize) -> Result<DenseTensor> {
    if region.is_empty() {
        return Ok(DenseTensor::zeros([0, 0, t.t.dims[2]]));
    }
    if !(t.region.contains(region.rows[0], region.cols[0]) && t.region.contains(region.rows[1] - 1, region.cols[1] - 1)) {
        return Err(Error::Plan {
            index,
            msg: format!("partition {region:?} outside available {:?}", t.region),
        });
    }
    let layout = ActLayout::new(t.t.dims, cfg);
    reshape_map(&layout, &[t.t.dims], &ReshapeOp::Partition { region })?.apply(std::slice::from_ref(t.t))
}

/// Executes one tile of a data-movement layer through address maps.
fn replay_movement(layer: &LayerSpec, tile: &TileRegion, ins: &[Known], cfg: &HardwareConfig, out: &mut DenseTensor, index: usize) -> Result<()> {
    let r = tile.computed;
    let s = layer.stride;
    let local = match layer.kind {
        LayerKind::Downsample => {
            let start = Region {
                rows: [r.rows[0] * s, (r.rows[1] - 1) * s + 1],
                cols: [r.cols[0] * s, (r.cols[1] - 1) * s + 1],
            };
            let part = partition(&ins[0], start, cfg, index)?;
            let layout = ActLayout::new(part.dims, cfg);
            reshape_map(&layout, &[part.dims], &ReshapeOp::Downsample { stride: s })?.apply(&[part])?
        }
        LayerKind::Upsample => {
            let src = Region {
                rows: [r.rows[0] / s, r.rows[1].div_ceil(s)],
                cols: [r.cols[0] / s, r.cols[1].div_ceil(s)],
            };
            let part = partition(&ins[0], src, cfg, index)?;
            let layout = ActLayout::new(part.dims, cfg);
            let up = reshape_map(
                &layout,
                &[part.dims],
                &ReshapeOp::Upsample {
                    factor: s,
                    mode: UpsampleMode::Duplicate,
                },
            )?
            .apply(&[part])?;
            let off = Region {
                rows: [r.rows[0] - src.rows[0] * s, r.rows[1] - src.rows[0] * s],
                cols: [r.cols[0] - src.cols[0] * s, r.cols[1] - src.cols[0] * s],
            };
            let whole = Known {
                t: &up,
                region: Region::full(up.dims[0], up.dims[1]),
            };
            partition(&whole, off, cfg, index)?
        }
        LayerKind::Concat => {
            let parts = ins.iter().map(|k| partition(k, r, cfg, index)).collect::<Result<Vec<_>>>()?;
            let dims: Vec<[usize; 3]> = parts.iter().map(|p| p.dims).collect();
            let chans: Vec<usize> = dims.iter().map(|d| d[2]).collect();
            let offsets = aligned_concat_offsets(&chans, cfg.channel_tile);
            let layout = ActLayout::new(dims[0], cfg);
            reshape_map(&layout, &dims, &ReshapeOp::Concatenate { channel_offsets: offsets })?.apply(&parts)?
        }
        _ => unreachable!("compute kinds replay through lanes"),
    };
    for lh in 0..r.height() {
        for lw in 0..r.width() {
            for c in 0..local.dims[2] {
                out.set(r.rows[0] + lh, r.cols[0] + lw, c, local.get(lh, lw, c));
            }
        }
    }
    Ok(())
}

/// Writes the owned region of a tile result into the layer's banked
/// output memory.
fn store_owned(mem: &mut [f64], layout: &ActLayout, t: &DenseTensor, owned: &Region) -> Result<()> {
    let word = layout.word_channels;
    for h in owned.rows[0]..owned.rows[1] {
        for w in owned.cols[0]..owned.cols[1] {
            for c in 0..layout.dims[2] {
                let a = act_address(layout, h, w, c)?;
                mem[(a.bank_addr * layout.banks + a.bank) * word + a.lane] = t.get(h, w, c);
            }
        }
    }
    Ok(())
}

fn load_all(mem: &[f64], layout: &ActLayout) -> Result<DenseTensor> {
    let word = layout.word_channels;
    let mut t = DenseTensor::zeros(layout.dims);
    for h in 0..layout.dims[0] {
        for w in 0..layout.dims[1] {
            for c in 0..layout.dims[2] {
                let a = act_address(layout, h, w, c)?;
                t.set(h, w, c, mem[(a.bank_addr * layout.banks + a.bank) * word + a.lane]);
            }
        }
    }
    Ok(t)
}

/// Functionally executes `net` the way the plan schedules it: chain by
/// chain, tile by tile, each compute layer in lane-round order, data
/// movement through address maps, tile results stored through the
/// activation layout. `external` supplies the network input under
/// `"input"` and any predecessor not produced inside `net`.
pub fn replay_network(
    net: &NetworkSpec,
    plan: &PartitionPlan,
    weights: &HashMap<String, Vec<f64>>,
    external: &HashMap<String, DenseTensor>,
    lanes: usize,
    cfg: &HardwareConfig,
) -> Result<HashMap<String, DenseTensor>> {
    let mut done: HashMap<String, DenseTensor> = HashMap::new();
    let no_weights = Vec::new();
    for (ci, chain) in fused_chains(net).into_iter().enumerate() {
        let ids: Vec<&str> = chain.iter().map(|&i| net.layers[i].id.as_str()).collect();
        let mut mems: Vec<(ActLayout, Vec<f64>)> = chain
            .iter()
            .map(|&i| {
                let l = &net.layers[i];
                let layout = ActLayout::new(l.output()?, cfg);
                let n = layout.addresses_per_bank() * layout.banks * layout.word_channels;
                Ok((layout, vec![0.0; n]))
            })
            .collect::<Result<_>>()?;
        let chain_tiles = plan
            .layer_tiles(ids[0])
            .map(|t| t.tiles.len())
            .unwrap_or(plan.tile_count());
        for t in 0..chain_tiles {
            let mut local: HashMap<&str, (DenseTensor, Region)> = HashMap::new();
            for (pos, &li) in chain.iter().enumerate() {
                let l = &net.layers[li];
                let tiles = plan.layer_tiles(&l.id).ok_or_else(|| Error::Plan {
                    index: li,
                    msg: format!("layer {} missing from plan", l.id),
                })?;
                let tile = tiles.tiles.get(t).ok_or_else(|| Error::Plan {
                    index: t,
                    msg: format!("layer {} has no tile {t}", l.id),
                })?;
                let mut out = DenseTensor::zeros(l.output()?);
                if !tile.computed.is_empty() {
                    let srcs: Vec<String> = if l.pred.is_empty() { vec!["input".into()] } else { l.pred.clone() };
                    let mut ins = Vec::with_capacity(srcs.len());
                    for sname in &srcs {
                        let k = if let Some((tt, reg)) = local.get(sname.as_str()) {
                            Known { t: tt, region: *reg }
                        } else if let Some(tt) = done.get(sname).or_else(|| external.get(sname)) {
                            Known {
                                t: tt,
                                region: Region::full(tt.dims[0], tt.dims[1]),
                            }
                        } else {
                            return Err(Error::Plan {
                                index: li,
                                msg: format!("{} reads {sname}, which is not available", l.id),
                            });
                        };
                        ins.push(k);
                    }
                    let w = weights.get(&l.id).unwrap_or(&no_weights);
                    if ins.iter().any(|k| k.t.dims != l.input && l.kind != LayerKind::Concat) {
                        return Err(Error::Shape(format!("{}: input dims mismatch", l.id)));
                    }
                    if l.kind.is_compute() {
                        if w.len() != weight_len(l) {
                            return Err(Error::Shape(format!("{}: {} weights, expected {}", l.id, w.len(), weight_len(l))));
                        }
                        let scheme = None;
                        replay_tile(l, tile, &ins, w, lanes, scheme, cfg, &mut out)?;
                    } else {
                        replay_movement(l, tile, &ins, cfg, &mut out, ci)?;
                    }
                }
                let (layout, mem) = &mut mems[pos];
                store_owned(mem, layout, &out, &tile.owned)?;
                local.insert(ids[pos], (out, tile.computed));
            }
        }
        for (pos, &li) in chain.iter().enumerate() {
            let (layout, mem) = &mems[pos];
            done.insert(net.layers[li].id.clone(), load_all(mem, layout)?);
        }
    }
    Ok(done)
}

/// Replays a single layer under a lane count, tile grid and optional
/// depth-wise scheme, reading its inputs from `inputs` in predecessor order.
pub fn replay_plan(
    layer: &LayerSpec,
    inputs: &[DenseTensor],
    weights: &[f64],
    lanes: usize,
    plan: &PartitionPlan,
    scheme: Option<ReuseScheme>,
    cfg: &HardwareConfig,
) -> Result<DenseTensor> {
    check_inputs(layer, inputs, weights)?;
    let tiles = &plan
        .layer_tiles(&layer.id)
        .ok_or_else(|| Error::Plan {
            index: 0,
            msg: format!("layer {} missing from plan", layer.id),
        })?
        .tiles;
    let mut out = DenseTensor::zeros(layer.output()?);
    let layout = ActLayout::new(out.dims, cfg);
    let mut mem = vec![0.0; layout.addresses_per_bank() * layout.banks * layout.word_channels];
    let ins: Vec<Known> = inputs
        .iter()
        .map(|t| Known {
            t,
            region: Region::full(t.dims[0], t.dims[1]),
        })
        .collect();
    for (i, tile) in tiles.iter().enumerate() {
        let mut part = DenseTensor::zeros(out.dims);
        if !tile.computed.is_empty() {
            if layer.kind.is_compute() {
                replay_tile(layer, tile, &ins, weights, lanes, scheme, cfg, &mut part)?;
            } else {
                replay_movement(layer, tile, &ins, cfg, &mut part, i)?;
            }
        }
        store_owned(&mut mem, &layout, &part, &tile.owned)?;
    }
    out = load_all(&mem, &layout)?;
    Ok(out)
}

/// A randomized single-layer replay case.
#[derive(Debug, Clone)]
pub struct ReplayCase {
    /// Producers of the inputs followed by the layer under test.
    pub net: NetworkSpec,
    pub inputs: Vec<DenseTensor>,
    pub weights: Vec<f64>,
    pub grid: [usize; 2],
    pub halo: HaloMode,
    pub lanes: usize,
    pub scheme: Option<ReuseScheme>,
    /// Integer-valued data, where replay must be exact.
    pub integer: bool,
}

impl ReplayCase {
    pub fn layer(&self) -> &LayerSpec {
        self.net.layers.last().expect("case has a layer")
    }
}

/// Draws a small layer of `kind` (spatial dims <= 16, channels <= 32) with
/// inputs, weights and a mapping configuration.
pub fn random_case(kind: LayerKind, rng: &mut impl Rng) -> ReplayCase {
    let integer = rng.random_bool(0.5);
    let value = |rng: &mut dyn rand::RngCore| -> f64 {
        if integer {
            rng.random_range(-4i32..=4) as f64
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    let h = rng.random_range(1..=16);
    let w = rng.random_range(1..=16);
    let c = rng.random_range(1..=32);
    let k = [1, 3, 5][rng.random_range(0..3)].min(h.min(w).max(1));
    let s = rng.random_range(1..=2);
    let mut layer = match kind {
        LayerKind::GenericConv => LayerSpec::conv("x", kind, [h, w, c], rng.random_range(1..=32), k, s),
        LayerKind::DepthwiseConv => LayerSpec::conv("x", kind, [h, w, c], c, k, s),
        LayerKind::PointwiseConv => LayerSpec::conv("x", kind, [h, w, c], rng.random_range(1..=32), 1, s),
        LayerKind::Matmul => LayerSpec::new("x", kind, [h, w, c], rng.random_range(1..=32)),
        LayerKind::FullyConnected => {
            LayerSpec::new("x", kind, [h.min(4), w.min(4), c], rng.random_range(1..=16))
        }
        LayerKind::Elementwise => LayerSpec::new("x", kind, [h, w, c], c),
        LayerKind::Concat => LayerSpec::new("x", kind, [h, w, c.max(2)], c.max(2)),
        LayerKind::Upsample => LayerSpec::conv("x", kind, [h, w, c], c, 1, s.max(2)),
        LayerKind::Downsample => {
            let mut l = LayerSpec::conv("x", kind, [h.max(2), w.max(2), c], c, 2, 2);
            l.pad = Padding::Valid;
            l
        }
    };
    if rng.random_bool(0.3) && matches!(kind, LayerKind::GenericConv | LayerKind::DepthwiseConv) && h.min(w) >= k {
        layer.pad = Padding::Valid;
    }
    let in_dims: Vec<[usize; 3]> = match kind {
        LayerKind::Elementwise if rng.random_bool(0.5) => vec![layer.input; 2],
        LayerKind::Concat => {
            let [h, w, c] = layer.input;
            let a = rng.random_range(1..c);
            vec![[h, w, a], [h, w, c - a]]
        }
        _ => vec![layer.input],
    };
    let mut layers: Vec<LayerSpec> = in_dims
        .iter()
        .enumerate()
        .map(|(i, d)| LayerSpec::new(format!("in{i}"), LayerKind::Elementwise, *d, d[2]))
        .collect();
    layer = layer.with_pred(layers.iter().map(|l| l.id.clone()));
    layers.push(layer);
    let net = NetworkSpec::new("case", layers);
    let inputs = in_dims
        .iter()
        .map(|&d| DenseTensor::from_fn(d, |_, _, _| value(rng)))
        .collect();
    let weights = (0..weight_len(net.layers.last().expect("layer"))).map(|_| value(rng)).collect();
    let grid = [rng.random_range(1..=2), rng.random_range(1..=2)];
    let halo = if rng.random_bool(0.5) { HaloMode::Recompute } else { HaloMode::Store };
    let lanes = [8, 16, 32, 64, 128][rng.random_range(0..5)];
    let scheme = (kind == LayerKind::DepthwiseConv && rng.random_bool(0.75))
        .then(|| ReuseScheme::ALL[rng.random_range(0..4)]);
    ReplayCase {
        net,
        inputs,
        weights,
        grid,
        halo,
        lanes,
        scheme,
        integer,
    }
}

/// Replays `case` through its plan and compares with [`dense_layer`];
/// returns the max abs difference.
pub fn check_case(case: &ReplayCase, cfg: &HardwareConfig) -> Result<f64> {
    let plan = plan_with_grid(&case.net, case.grid, case.halo, cfg.precision_bits)?;
    let l = case.layer();
    let got = replay_plan(l, &case.inputs, &case.weights, case.lanes, &plan, case.scheme, cfg)?;
    let want = dense_layer(l, &case.inputs, &case.weights)?;
    Ok(got.max_abs_diff(&want))
}
