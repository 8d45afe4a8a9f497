//! Recorded tensor operations and their backward rules.
//!
//! Every rule follows the split-real convention: a complex operation is a
//! composite of real operations on the two planes, so each backward derives
//! `(∂L/∂re, ∂L/∂im)` for the operands from the output's gradient planes.
//! Gradient correctness of each rule is pinned by the finite-difference
//! suite rather than asserted here.

use super::gemm::gemm;
use super::tape::{BackwardCtx, GradPlanes, NodeId, Tape, TapeOp};
use super::{broadcast_shapes, elementwise, matmul, CTensor, Cplx, ElemOp};
use crate::error::{Error, Result};

/// Batch statistics produced by a training-mode batch-norm node, needed by
/// the caller to maintain running estimates.
#[derive(Debug, Clone)]
pub struct BnBatchStats {
    pub mean_re: Vec<f64>,
    pub mean_im: Vec<f64>,
    pub var_re: Vec<f64>,
    pub var_im: Vec<f64>,
}

/// Normalization statistics source for batch norm.
#[derive(Debug, Clone)]
pub enum BnMode {
    /// Normalize with statistics of the current batch (requires batch ≥ 2).
    Train,
    /// Normalize with frozen running statistics.
    Infer {
        mean_re: Vec<f64>,
        mean_im: Vec<f64>,
        var_re: Vec<f64>,
        var_im: Vec<f64>,
    },
}

// ── elementwise ─────────────────────────────────────────────────────────

struct AddSubOp {
    a: NodeId,
    b: NodeId,
    a_scalar: bool,
    b_scalar: bool,
    negate_b: bool,
}

impl TapeOp for AddSubOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let sign = if self.negate_b { -1.0 } else { 1.0 };
        if ctx.wants(self.a) {
            let (gr, gi) = ctx.grad_mut(self.a);
            if self.a_scalar {
                gr[0] += g.re.iter().sum::<f64>();
                gi[0] += g.im.iter().sum::<f64>();
            } else {
                for i in 0..g.re.len() {
                    gr[i] += g.re[i];
                    gi[i] += g.im[i];
                }
            }
        }
        if ctx.wants(self.b) {
            let (gr, gi) = ctx.grad_mut(self.b);
            if self.b_scalar {
                gr[0] += sign * g.re.iter().sum::<f64>();
                gi[0] += sign * g.im.iter().sum::<f64>();
            } else {
                for i in 0..g.re.len() {
                    gr[i] += sign * g.re[i];
                    gi[i] += sign * g.im[i];
                }
            }
        }
    }
}

struct MulOp {
    a: NodeId,
    b: NodeId,
    a_scalar: bool,
    b_scalar: bool,
}

impl TapeOp for MulOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let n = g.re.len();
        // y = a·b ⇒ yr = ar·br − ai·bi, yi = ar·bi + ai·br
        if ctx.wants(self.a) {
            let b = ctx.value(self.b).clone();
            let (gr, gi) = ctx.grad_mut(self.a);
            for i in 0..n {
                let bi_ = if self.b_scalar { 0 } else { i };
                let (br, bim) = (b.re()[bi_], b.im()[bi_]);
                let (dr, di) = (g.re[i] * br + g.im[i] * bim, -g.re[i] * bim + g.im[i] * br);
                if self.a_scalar {
                    gr[0] += dr;
                    gi[0] += di;
                } else {
                    gr[i] += dr;
                    gi[i] += di;
                }
            }
        }
        if ctx.wants(self.b) {
            let a = ctx.value(self.a).clone();
            let (gr, gi) = ctx.grad_mut(self.b);
            for i in 0..n {
                let ai_ = if self.a_scalar { 0 } else { i };
                let (ar, aim) = (a.re()[ai_], a.im()[ai_]);
                let (dr, di) = (g.re[i] * ar + g.im[i] * aim, -g.re[i] * aim + g.im[i] * ar);
                if self.b_scalar {
                    gr[0] += dr;
                    gi[0] += di;
                } else {
                    gr[i] += dr;
                    gi[i] += di;
                }
            }
        }
    }
}

// ── matrix product ──────────────────────────────────────────────────────

struct MatMulOp {
    a: NodeId,
    b: NodeId,
    m: usize,
    k: usize,
    n: usize,
}

impl TapeOp for MatMulOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let (m, k, n) = (self.m, self.k, self.n);
        if ctx.wants(self.a) {
            let b = ctx.value(self.b).clone();
            let (gr, gi) = ctx.grad_mut(self.a);
            // dAr = dCr·Bᵀr + dCi·Bᵀi ; dAi = −dCr·Bᵀi + dCi·Bᵀr
            gemm(gr, &g.re, b.re(), m, n, k, false, true, 1.0, true);
            gemm(gr, &g.im, b.im(), m, n, k, false, true, 1.0, true);
            gemm(gi, &g.re, b.im(), m, n, k, false, true, -1.0, true);
            gemm(gi, &g.im, b.re(), m, n, k, false, true, 1.0, true);
        }
        if ctx.wants(self.b) {
            let a = ctx.value(self.a).clone();
            let (gr, gi) = ctx.grad_mut(self.b);
            // dBr = Aᵀr·dCr + Aᵀi·dCi ; dBi = −Aᵀi·dCr + Aᵀr·dCi
            gemm(gr, a.re(), &g.re, k, m, n, true, false, 1.0, true);
            gemm(gr, a.im(), &g.im, k, m, n, true, false, 1.0, true);
            gemm(gi, a.im(), &g.re, k, m, n, true, false, -1.0, true);
            gemm(gi, a.re(), &g.im, k, m, n, true, false, 1.0, true);
        }
    }
}

// ── bias row broadcast ──────────────────────────────────────────────────

struct AddRowsOp {
    a: NodeId,
    bias: NodeId,
    rows: usize,
    cols: usize,
}

impl TapeOp for AddRowsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if ctx.wants(self.a) {
            let (gr, gi) = ctx.grad_mut(self.a);
            for i in 0..g.re.len() {
                gr[i] += g.re[i];
                gi[i] += g.im[i];
            }
        }
        if ctx.wants(self.bias) {
            let (gr, gi) = ctx.grad_mut(self.bias);
            for r in 0..self.rows {
                for c in 0..self.cols {
                    gr[c] += g.re[r * self.cols + c];
                    gi[c] += g.im[r * self.cols + c];
                }
            }
        }
    }
}

// ── 1-D complex convolution (cross-correlation over the last axis) ──────

struct Conv1dOp {
    x: NodeId,
    w: NodeId,
    b: NodeId,
    batch: usize,
    c_in: usize,
    l_in: usize,
    c_out: usize,
    ksize: usize,
    stride: usize,
    pad: usize,
    l_out: usize,
    // im2col of the input, saved for the weight gradient
    col_re: Vec<f64>,
    col_im: Vec<f64>,
}

impl Conv1dOp {
    fn rows(&self) -> usize {
        self.batch * self.l_out
    }

    fn cols(&self) -> usize {
        self.c_in * self.ksize
    }
}

impl TapeOp for Conv1dOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let (rows, cols) = (self.rows(), self.cols());
        // output grad as a (B·Lout, Cout) matrix
        let mut gy_re = vec![0.0; rows * self.c_out];
        let mut gy_im = vec![0.0; rows * self.c_out];
        for b in 0..self.batch {
            for co in 0..self.c_out {
                for p in 0..self.l_out {
                    let src = (b * self.c_out + co) * self.l_out + p;
                    let dst = (b * self.l_out + p) * self.c_out + co;
                    gy_re[dst] = g.re[src];
                    gy_im[dst] = g.im[src];
                }
            }
        }

        if ctx.wants(self.b) {
            let (gr, gi) = ctx.grad_mut(self.b);
            for r in 0..rows {
                for co in 0..self.c_out {
                    gr[co] += gy_re[r * self.c_out + co];
                    gi[co] += gy_im[r * self.c_out + co];
                }
            }
        }

        if ctx.wants(self.w) {
            // dWm (CinK × Cout) = colᵀ·dY with split-real signs, then
            // scattered into the (Cout, Cin, K) parameter layout.
            let mut dw_re = vec![0.0; cols * self.c_out];
            let mut dw_im = vec![0.0; cols * self.c_out];
            gemm(&mut dw_re, &self.col_re, &gy_re, cols, rows, self.c_out, true, false, 1.0, false);
            gemm(&mut dw_re, &self.col_im, &gy_im, cols, rows, self.c_out, true, false, 1.0, true);
            gemm(&mut dw_im, &self.col_im, &gy_re, cols, rows, self.c_out, true, false, -1.0, false);
            gemm(&mut dw_im, &self.col_re, &gy_im, cols, rows, self.c_out, true, false, 1.0, true);

            let (gr, gi) = ctx.grad_mut(self.w);
            for co in 0..self.c_out {
                for ck in 0..cols {
                    gr[co * cols + ck] += dw_re[ck * self.c_out + co];
                    gi[co * cols + ck] += dw_im[ck * self.c_out + co];
                }
            }
        }

        if ctx.wants(self.x) {
            // dcol (B·Lout × CinK) = dY·W with split-real signs, then col2im.
            let w = ctx.value(self.w).clone();
            let mut dc_re = vec![0.0; rows * cols];
            let mut dc_im = vec![0.0; rows * cols];
            gemm(&mut dc_re, &gy_re, w.re(), rows, self.c_out, cols, false, false, 1.0, false);
            gemm(&mut dc_re, &gy_im, w.im(), rows, self.c_out, cols, false, false, 1.0, true);
            gemm(&mut dc_im, &gy_re, w.im(), rows, self.c_out, cols, false, false, -1.0, false);
            gemm(&mut dc_im, &gy_im, w.re(), rows, self.c_out, cols, false, false, 1.0, true);

            let (gr, gi) = ctx.grad_mut(self.x);
            for b in 0..self.batch {
                for p in 0..self.l_out {
                    let row = (b * self.l_out + p) * cols;
                    for ci in 0..self.c_in {
                        for t in 0..self.ksize {
                            let src = (p * self.stride + t) as isize - self.pad as isize;
                            if src < 0 || src as usize >= self.l_in {
                                continue;
                            }
                            let dst = (b * self.c_in + ci) * self.l_in + src as usize;
                            gr[dst] += dc_re[row + ci * self.ksize + t];
                            gi[dst] += dc_im[row + ci * self.ksize + t];
                        }
                    }
                }
            }
        }
    }
}

// ── complex batch norm ──────────────────────────────────────────────────

struct BatchNormOp {
    x: NodeId,
    scale: NodeId,
    shift: NodeId,
    batch: usize,
    channels: usize,
    length: usize,
    training: bool,
    mean_re: Vec<f64>,
    mean_im: Vec<f64>,
    istd_re: Vec<f64>,
    istd_im: Vec<f64>,
}

impl TapeOp for BatchNormOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let x = ctx.value(self.x).clone();
        let scale = ctx.value(self.scale).clone();
        let n = (self.batch * self.length) as f64;

        for c in 0..self.channels {
            // gather per-channel reductions over (batch, length)
            let mut sum_g_re = 0.0;
            let mut sum_g_im = 0.0;
            let mut sum_gx_re = 0.0;
            let mut sum_gx_im = 0.0;
            for b in 0..self.batch {
                let base = (b * self.channels + c) * self.length;
                for l in 0..self.length {
                    let i = base + l;
                    let xh_re = (x.re()[i] - self.mean_re[c]) * self.istd_re[c];
                    let xh_im = (x.im()[i] - self.mean_im[c]) * self.istd_im[c];
                    sum_g_re += g.re[i];
                    sum_g_im += g.im[i];
                    sum_gx_re += g.re[i] * xh_re;
                    sum_gx_im += g.im[i] * xh_im;
                }
            }

            if ctx.wants(self.scale) {
                let (gr, gi) = ctx.grad_mut(self.scale);
                gr[c] += sum_gx_re;
                gi[c] += sum_gx_im;
            }
            if ctx.wants(self.shift) {
                let (gr, gi) = ctx.grad_mut(self.shift);
                gr[c] += sum_g_re;
                gi[c] += sum_g_im;
            }
            if ctx.wants(self.x) {
                let (sr, si) = (scale.re()[c], scale.im()[c]);
                let (gr, gi) = ctx.grad_mut(self.x);
                for b in 0..self.batch {
                    let base = (b * self.channels + c) * self.length;
                    for l in 0..self.length {
                        let i = base + l;
                        let xh_re = (x.re()[i] - self.mean_re[c]) * self.istd_re[c];
                        let xh_im = (x.im()[i] - self.mean_im[c]) * self.istd_im[c];
                        if self.training {
                            gr[i] += self.istd_re[c]
                                * sr
                                * (g.re[i] - sum_g_re / n - xh_re * (sum_gx_re / n));
                            gi[i] += self.istd_im[c]
                                * si
                                * (g.im[i] - sum_g_im / n - xh_im * (sum_gx_im / n));
                        } else {
                            gr[i] += g.re[i] * sr * self.istd_re[c];
                            gi[i] += g.im[i] * si * self.istd_im[c];
                        }
                    }
                }
            }
        }
    }
}

// ── activation, pooling, reshaping ──────────────────────────────────────

struct CReluOp {
    x: NodeId,
}

impl TapeOp for CReluOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let x = ctx.value(self.x).clone();
        let (gr, gi) = ctx.grad_mut(self.x);
        for i in 0..g.re.len() {
            // subgradient 0 on the axes: strict positivity required
            if x.re()[i] > 0.0 && x.im()[i] > 0.0 {
                gr[i] += g.re[i];
                gi[i] += g.im[i];
            }
        }
    }
}

struct AvgPool1dOp {
    x: NodeId,
    batch_ch: usize,
    l_in: usize,
    window: usize,
    l_out: usize,
}

impl TapeOp for AvgPool1dOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let scale = 1.0 / self.window as f64;
        let (gr, gi) = ctx.grad_mut(self.x);
        for bc in 0..self.batch_ch {
            for t in 0..self.l_out {
                let go_re = g.re[bc * self.l_out + t] * scale;
                let go_im = g.im[bc * self.l_out + t] * scale;
                let base = bc * self.l_in + t * self.window;
                for s in 0..self.window {
                    gr[base + s] += go_re;
                    gi[base + s] += go_im;
                }
            }
        }
    }
}

struct ChannelsToTokensOp {
    x: NodeId,
    batch: usize,
    channels: usize,
    t: usize,
}

impl TapeOp for ChannelsToTokensOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        for b in 0..self.batch {
            for c in 0..self.channels {
                for t in 0..self.t {
                    let src = (b * self.t + t) * self.channels + c;
                    let dst = (b * self.channels + c) * self.t + t;
                    gr[dst] += g.re[src];
                    gi[dst] += g.im[src];
                }
            }
        }
    }
}

struct RealifyOp {
    x: NodeId,
    half: usize,
    rows: usize,
}

impl TapeOp for RealifyOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        let w = 2 * self.half;
        for r in 0..self.rows {
            for c in 0..self.half {
                gr[r * self.half + c] += g.re[r * w + c];
                gi[r * self.half + c] += g.re[r * w + self.half + c];
            }
        }
    }
}

struct SliceRowsOp {
    x: NodeId,
    r0: usize,
    cols: usize,
}

impl TapeOp for SliceRowsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        let off = self.r0 * self.cols;
        for i in 0..g.re.len() {
            gr[off + i] += g.re[i];
            gi[off + i] += g.im[i];
        }
    }
}

struct ConcatRowsOp {
    parts: Vec<NodeId>,
    rows: Vec<usize>,
    cols: usize,
}

impl TapeOp for ConcatRowsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let mut row0 = 0usize;
        for (idx, &p) in self.parts.iter().enumerate() {
            let nrows = self.rows[idx];
            if ctx.wants(p) {
                let (gr, gi) = ctx.grad_mut(p);
                let off = row0 * self.cols;
                for i in 0..nrows * self.cols {
                    gr[i] += g.re[off + i];
                    gi[i] += g.im[off + i];
                }
            }
            row0 += nrows;
        }
    }
}

struct SliceColsOp {
    x: NodeId,
    c0: usize,
    src_cols: usize,
    rows: usize,
    cols: usize,
}

impl TapeOp for SliceColsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let dst = r * self.src_cols + self.c0 + c;
                gr[dst] += g.re[r * self.cols + c];
                gi[dst] += g.im[r * self.cols + c];
            }
        }
    }
}

struct ConcatColsOp {
    parts: Vec<NodeId>,
    cols: Vec<usize>,
    rows: usize,
    total_cols: usize,
}

impl TapeOp for ConcatColsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        let mut col0 = 0usize;
        for (idx, &p) in self.parts.iter().enumerate() {
            let ncols = self.cols[idx];
            if ctx.wants(p) {
                let (gr, gi) = ctx.grad_mut(p);
                for r in 0..self.rows {
                    for c in 0..ncols {
                        let src = r * self.total_cols + col0 + c;
                        gr[r * ncols + c] += g.re[src];
                        gi[r * ncols + c] += g.im[src];
                    }
                }
            }
            col0 += ncols;
        }
    }
}

struct Transpose2dOp {
    x: NodeId,
    m: usize,
    n: usize,
}

impl TapeOp for Transpose2dOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        // out is n×m; grad of x[i][j] is g[j][i]
        for i in 0..self.m {
            for j in 0..self.n {
                gr[i * self.n + j] += g.re[j * self.m + i];
                gi[i * self.n + j] += g.im[j * self.m + i];
            }
        }
    }
}

struct SoftmaxRowsOp {
    x: NodeId,
    rows: usize,
    cols: usize,
}

impl TapeOp for SoftmaxRowsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let p = out.re();
        let (gr, _gi) = ctx.grad_mut(self.x);
        for r in 0..self.rows {
            let base = r * self.cols;
            let dot: f64 = (0..self.cols)
                .map(|c| g.re[base + c] * p[base + c])
                .sum();
            for c in 0..self.cols {
                gr[base + c] += p[base + c] * (g.re[base + c] - dot);
            }
        }
    }
}

struct MeanPoolRowsOp {
    x: NodeId,
    group: usize,
    out_rows: usize,
    cols: usize,
}

impl TapeOp for MeanPoolRowsOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let scale = 1.0 / self.group as f64;
        let (gr, gi) = ctx.grad_mut(self.x);
        for o in 0..self.out_rows {
            for c in 0..self.cols {
                let gre = g.re[o * self.cols + c] * scale;
                let gim = g.im[o * self.cols + c] * scale;
                for s in 0..self.group {
                    gr[(o * self.group + s) * self.cols + c] += gre;
                    gi[(o * self.group + s) * self.cols + c] += gim;
                }
            }
        }
    }
}

struct RePartOp {
    x: NodeId,
}

impl TapeOp for RePartOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, _gi) = ctx.grad_mut(self.x);
        for i in 0..g.re.len() {
            gr[i] += g.re[i];
        }
    }
}

struct ImPartOp {
    x: NodeId,
}

impl TapeOp for ImPartOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (_gr, gi) = ctx.grad_mut(self.x);
        for i in 0..g.re.len() {
            gi[i] += g.re[i];
        }
    }
}

struct MagSqOp {
    x: NodeId,
}

impl TapeOp for MagSqOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let x = ctx.value(self.x).clone();
        let (gr, gi) = ctx.grad_mut(self.x);
        for i in 0..g.re.len() {
            gr[i] += 2.0 * x.re()[i] * g.re[i];
            gi[i] += 2.0 * x.im()[i] * g.re[i];
        }
    }
}

struct SumAllOp {
    x: NodeId,
    len: usize,
}

impl TapeOp for SumAllOp {
    fn backward(&self, ctx: &mut BackwardCtx<'_>, g: &GradPlanes, _out: &CTensor) {
        if !ctx.wants(self.x) {
            return;
        }
        let (gr, gi) = ctx.grad_mut(self.x);
        for i in 0..self.len {
            gr[i] += g.re[0];
            gi[i] += g.im[0];
        }
    }
}

// ── builder methods ─────────────────────────────────────────────────────

impl Tape {
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.add_sub(a, b, false)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.add_sub(a, b, true)
    }

    fn add_sub(&mut self, a: NodeId, b: NodeId, negate: bool) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let (_, a_scalar, b_scalar) = broadcast_shapes("elementwise", av, bv)?;
        let out = elementwise(if negate { ElemOp::Sub } else { ElemOp::Add }, av, bv)?;
        Ok(self.push_op(
            out,
            Box::new(AddSubOp {
                a,
                b,
                a_scalar,
                b_scalar,
                negate_b: negate,
            }),
            &[a, b],
        ))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        let (_, a_scalar, b_scalar) = broadcast_shapes("elementwise", av, bv)?;
        let out = elementwise(ElemOp::Mul, av, bv)?;
        Ok(self.push_op(
            out,
            Box::new(MulOp {
                a,
                b,
                a_scalar,
                b_scalar,
            }),
            &[a, b],
        ))
    }

    /// Multiply by a constant complex scalar.
    pub fn scale(&mut self, x: NodeId, c: Cplx) -> Result<NodeId> {
        let s = self.constant_scalar(c);
        self.mul(x, s)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = matmul(self.value(a), self.value(b))?;
        let m = self.value(a).shape()[0];
        let k = self.value(a).shape()[1];
        let n = self.value(b).shape()[1];
        Ok(self.push_op(out, Box::new(MatMulOp { a, b, m, k, n }), &[a, b]))
    }

    /// Broadcast-add a length-N bias to every row of an (M, N) tensor.
    pub fn add_rows(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        let bv = self.value(bias);
        if av.rank() != 2 {
            return Err(Error::usage("add_rows requires a rank-2 left operand"));
        }
        let (rows, cols) = (av.shape()[0], av.shape()[1]);
        if bv.len() != cols {
            return Err(Error::ShapeMismatch {
                op: "add_rows",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut out = av.clone();
        for r in 0..rows {
            for c in 0..cols {
                out.re_mut()[r * cols + c] += bv.re()[c];
                out.im_mut()[r * cols + c] += bv.im()[c];
            }
        }
        Ok(self.push_op(out, Box::new(AddRowsOp { a, bias, rows, cols }), &[a, bias]))
    }

    /// Complex 1-D convolution over the last axis.
    ///
    /// `x` is (B, Cin, L), `w` is (Cout, Cin, K), `b` is (Cout). Each output
    /// element is the complex cross-correlation over the receptive field
    /// plus the channel bias.
    pub fn conv1d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        if xv.rank() != 3 || wv.rank() != 3 {
            return Err(Error::usage("conv1d requires rank-3 input and kernels"));
        }
        if stride == 0 {
            return Err(Error::usage("conv1d stride must be >= 1"));
        }
        let (batch, c_in, l_in) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (c_out, wc_in, ksize) = (wv.shape()[0], wv.shape()[1], wv.shape()[2]);
        if wc_in != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                left: xv.shape().to_vec(),
                right: wv.shape().to_vec(),
            });
        }
        if bv.len() != c_out {
            return Err(Error::ShapeMismatch {
                op: "conv1d bias",
                left: vec![c_out],
                right: bv.shape().to_vec(),
            });
        }
        if l_in + 2 * pad < ksize {
            return Err(Error::usage(format!(
                "conv1d kernel {ksize} larger than padded input {}",
                l_in + 2 * pad
            )));
        }
        let l_out = (l_in + 2 * pad - ksize) / stride + 1;

        let rows = batch * l_out;
        let cols = c_in * ksize;
        let mut col_re = vec![0.0; rows * cols];
        let mut col_im = vec![0.0; rows * cols];
        for bi in 0..batch {
            for p in 0..l_out {
                let row = (bi * l_out + p) * cols;
                for ci in 0..c_in {
                    let src_base = (bi * c_in + ci) * l_in;
                    for t in 0..ksize {
                        let src = (p * stride + t) as isize - pad as isize;
                        if src >= 0 && (src as usize) < l_in {
                            col_re[row + ci * ksize + t] = xv.re()[src_base + src as usize];
                            col_im[row + ci * ksize + t] = xv.im()[src_base + src as usize];
                        }
                    }
                }
            }
        }

        // Y2 (rows × Cout) = col · Wᵀ_storage; w rows are (Cout, CinK)
        let mut y_re = vec![0.0; rows * c_out];
        let mut y_im = vec![0.0; rows * c_out];
        super::gemm::cgemm(
            &mut y_re, &mut y_im, &col_re, &col_im, wv.re(), wv.im(), rows, cols, c_out, false,
            true, false,
        );

        let mut out = CTensor::zeros(&[batch, c_out, l_out]);
        for bi in 0..batch {
            for co in 0..c_out {
                let (br, bim) = (bv.re()[co], bv.im()[co]);
                for p in 0..l_out {
                    let src = (bi * l_out + p) * c_out + co;
                    let dst = (bi * c_out + co) * l_out + p;
                    out.re_mut()[dst] = y_re[src] + br;
                    out.im_mut()[dst] = y_im[src] + bim;
                }
            }
        }

        Ok(self.push_op(
            out,
            Box::new(Conv1dOp {
                x,
                w,
                b,
                batch,
                c_in,
                l_in,
                c_out,
                ksize,
                stride,
                pad,
                l_out,
                col_re,
                col_im,
            }),
            &[x, w, b],
        ))
    }

    /// Complex batch norm: the real and imaginary planes are normalized
    /// independently per channel, then scaled and shifted. `scale.re`
    /// multiplies the real plane and `scale.im` the imaginary plane.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        scale: NodeId,
        shift: NodeId,
        eps: f64,
        mode: BnMode,
    ) -> Result<(NodeId, Option<BnBatchStats>)> {
        let xv = self.value(x);
        if xv.rank() != 3 {
            return Err(Error::usage("batch_norm expects a (batch, channels, length) tensor"));
        }
        let (batch, channels, length) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let sv = self.value(scale);
        let hv = self.value(shift);
        if sv.len() != channels || hv.len() != channels {
            return Err(Error::ShapeMismatch {
                op: "batch_norm",
                left: vec![channels],
                right: sv.shape().to_vec(),
            });
        }
        let training = matches!(mode, BnMode::Train);
        if training && batch < 2 {
            return Err(Error::usage(
                "batch_norm in training mode requires batch size >= 2 (variance undefined)",
            ));
        }

        let n = (batch * length) as f64;
        let (mean_re, mean_im, var_re, var_im) = match &mode {
            BnMode::Train => {
                let mut m_re = vec![0.0; channels];
                let mut m_im = vec![0.0; channels];
                let mut v_re = vec![0.0; channels];
                let mut v_im = vec![0.0; channels];
                for c in 0..channels {
                    let mut sr = 0.0;
                    let mut si = 0.0;
                    for b in 0..batch {
                        let base = (b * channels + c) * length;
                        for l in 0..length {
                            sr += xv.re()[base + l];
                            si += xv.im()[base + l];
                        }
                    }
                    m_re[c] = sr / n;
                    m_im[c] = si / n;
                    let mut qr = 0.0;
                    let mut qi = 0.0;
                    for b in 0..batch {
                        let base = (b * channels + c) * length;
                        for l in 0..length {
                            qr += (xv.re()[base + l] - m_re[c]).powi(2);
                            qi += (xv.im()[base + l] - m_im[c]).powi(2);
                        }
                    }
                    v_re[c] = qr / n;
                    v_im[c] = qi / n;
                }
                (m_re, m_im, v_re, v_im)
            }
            BnMode::Infer {
                mean_re,
                mean_im,
                var_re,
                var_im,
            } => {
                if mean_re.len() != channels {
                    return Err(Error::usage("running statistics length mismatch"));
                }
                (mean_re.clone(), mean_im.clone(), var_re.clone(), var_im.clone())
            }
        };

        let istd_re: Vec<f64> = var_re.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let istd_im: Vec<f64> = var_im.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

        let mut out = CTensor::zeros(xv.shape());
        for b in 0..batch {
            for c in 0..channels {
                let base = (b * channels + c) * length;
                let (sr, si) = (sv.re()[c], sv.im()[c]);
                let (hr, hi) = (hv.re()[c], hv.im()[c]);
                for l in 0..length {
                    let i = base + l;
                    out.re_mut()[i] = (xv.re()[i] - mean_re[c]) * istd_re[c] * sr + hr;
                    out.im_mut()[i] = (xv.im()[i] - mean_im[c]) * istd_im[c] * si + hi;
                }
            }
        }

        let stats = if training {
            Some(BnBatchStats {
                mean_re: mean_re.clone(),
                mean_im: mean_im.clone(),
                var_re: var_re.clone(),
                var_im: var_im.clone(),
            })
        } else {
            None
        };

        let id = self.push_op(
            out,
            Box::new(BatchNormOp {
                x,
                scale,
                shift,
                batch,
                channels,
                length,
                training,
                mean_re,
                mean_im,
                istd_re,
                istd_im,
            }),
            &[x, scale, shift],
        );
        Ok((id, stats))
    }

    /// Complex ReLU: z is kept only when both Re(z) ≥ 0 and Im(z) ≥ 0.
    pub fn crelu(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let mut out = CTensor::zeros(xv.shape());
        for i in 0..xv.len() {
            if xv.re()[i] >= 0.0 && xv.im()[i] >= 0.0 {
                out.re_mut()[i] = xv.re()[i];
                out.im_mut()[i] = xv.im()[i];
            }
        }
        Ok(self.push_op(out, Box::new(CReluOp { x }), &[x]))
    }

    /// Mean over non-overlapping windows of the last axis (floor rule:
    /// a ragged tail is dropped).
    pub fn avg_pool1d(&mut self, x: NodeId, window: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() < 1 || window == 0 {
            return Err(Error::usage("avg_pool1d requires window >= 1"));
        }
        let l_in = *xv.shape().last().unwrap();
        let l_out = l_in / window;
        if l_out == 0 {
            return Err(Error::usage(format!(
                "avg_pool1d window {window} larger than axis length {l_in}"
            )));
        }
        let batch_ch = xv.len() / l_in;
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = l_out;
        let mut out = CTensor::zeros(&shape);
        let inv = 1.0 / window as f64;
        for bc in 0..batch_ch {
            for t in 0..l_out {
                let mut sr = 0.0;
                let mut si = 0.0;
                let base = bc * l_in + t * window;
                for s in 0..window {
                    sr += xv.re()[base + s];
                    si += xv.im()[base + s];
                }
                out.re_mut()[bc * l_out + t] = sr * inv;
                out.im_mut()[bc * l_out + t] = si * inv;
            }
        }
        Ok(self.push_op(
            out,
            Box::new(AvgPool1dOp {
                x,
                batch_ch,
                l_in,
                window,
                l_out,
            }),
            &[x],
        ))
    }

    /// (B, C, T) → (B·T, C): one row per retained spatial position.
    pub fn channels_to_tokens(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 3 {
            return Err(Error::usage("channels_to_tokens expects (batch, channels, positions)"));
        }
        let (batch, channels, t) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let mut out = CTensor::zeros(&[batch * t, channels]);
        for b in 0..batch {
            for c in 0..channels {
                for ti in 0..t {
                    let src = (b * channels + c) * t + ti;
                    let dst = (b * t + ti) * channels + c;
                    out.re_mut()[dst] = xv.re()[src];
                    out.im_mut()[dst] = xv.im()[src];
                }
            }
        }
        Ok(self.push_op(
            out,
            Box::new(ChannelsToTokensOp {
                x,
                batch,
                channels,
                t,
            }),
            &[x],
        ))
    }

    /// (M, D) complex → (M, 2D) real: all real parts then all imaginary
    /// parts, with a zero imaginary plane.
    pub fn realify(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::usage("realify expects a rank-2 tensor"));
        }
        let (rows, half) = (xv.shape()[0], xv.shape()[1]);
        let w = 2 * half;
        let mut re = vec![0.0; rows * w];
        for r in 0..rows {
            for c in 0..half {
                re[r * w + c] = xv.re()[r * half + c];
                re[r * w + half + c] = xv.im()[r * half + c];
            }
        }
        let out = CTensor::from_real(&[rows, w], re)?;
        Ok(self.push_op(out, Box::new(RealifyOp { x, half, rows }), &[x]))
    }

    pub fn slice_rows(&mut self, x: NodeId, r0: usize, r1: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 || r1 > xv.shape()[0] || r0 >= r1 {
            return Err(Error::usage(format!(
                "slice_rows [{r0},{r1}) out of bounds for shape {:?}",
                xv.shape()
            )));
        }
        let cols = xv.shape()[1];
        let re = xv.re()[r0 * cols..r1 * cols].to_vec();
        let im = xv.im()[r0 * cols..r1 * cols].to_vec();
        let out = CTensor::from_planes(&[r1 - r0, cols], re, im)?;
        Ok(self.push_op(out, Box::new(SliceRowsOp { x, r0, cols }), &[x]))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::usage("concat_rows needs at least one part"));
        }
        let cols = self.value(parts[0]).shape()[1];
        let mut rows = Vec::with_capacity(parts.len());
        let mut re = Vec::new();
        let mut im = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 2 || v.shape()[1] != cols {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    left: vec![cols],
                    right: v.shape().to_vec(),
                });
            }
            rows.push(v.shape()[0]);
            re.extend_from_slice(v.re());
            im.extend_from_slice(v.im());
        }
        let total: usize = rows.iter().sum();
        let out = CTensor::from_planes(&[total, cols], re, im)?;
        Ok(self.push_op(
            out,
            Box::new(ConcatRowsOp {
                parts: parts.to_vec(),
                rows,
                cols,
            }),
            parts,
        ))
    }

    pub fn slice_cols(&mut self, x: NodeId, c0: usize, c1: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 || c1 > xv.shape()[1] || c0 >= c1 {
            return Err(Error::usage(format!(
                "slice_cols [{c0},{c1}) out of bounds for shape {:?}",
                xv.shape()
            )));
        }
        let (rows, src_cols) = (xv.shape()[0], xv.shape()[1]);
        let cols = c1 - c0;
        let mut out = CTensor::zeros(&[rows, cols]);
        for r in 0..rows {
            for c in 0..cols {
                out.re_mut()[r * cols + c] = xv.re()[r * src_cols + c0 + c];
                out.im_mut()[r * cols + c] = xv.im()[r * src_cols + c0 + c];
            }
        }
        Ok(self.push_op(
            out,
            Box::new(SliceColsOp {
                x,
                c0,
                src_cols,
                rows,
                cols,
            }),
            &[x],
        ))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::usage("concat_cols needs at least one part"));
        }
        let rows = self.value(parts[0]).shape()[0];
        let mut cols = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 2 || v.shape()[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    left: vec![rows],
                    right: v.shape().to_vec(),
                });
            }
            cols.push(v.shape()[1]);
        }
        let total_cols: usize = cols.iter().sum();
        let mut out = CTensor::zeros(&[rows, total_cols]);
        let mut col0 = 0usize;
        for (idx, &p) in parts.iter().enumerate() {
            let v = self.value(p);
            for r in 0..rows {
                for c in 0..cols[idx] {
                    out.re_mut()[r * total_cols + col0 + c] = v.re()[r * cols[idx] + c];
                    out.im_mut()[r * total_cols + col0 + c] = v.im()[r * cols[idx] + c];
                }
            }
            col0 += cols[idx];
        }
        let out_id = self.push_op(
            out,
            Box::new(ConcatColsOp {
                parts: parts.to_vec(),
                cols,
                rows,
                total_cols,
            }),
            parts,
        );
        Ok(out_id)
    }

    pub fn transpose2d(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let out = xv.transposed()?;
        let (m, n) = (xv.shape()[0], xv.shape()[1]);
        Ok(self.push_op(out, Box::new(Transpose2dOp { x, m, n }), &[x]))
    }

    /// Row-wise softmax of the real plane; the imaginary plane of the
    /// output is zero and contributes no gradient.
    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::usage("softmax_rows expects a rank-2 tensor"));
        }
        let (rows, cols) = (xv.shape()[0], xv.shape()[1]);
        let mut re = vec![0.0; rows * cols];
        for r in 0..rows {
            let base = r * cols;
            let m = xv.re()[base..base + cols]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for c in 0..cols {
                let e = (xv.re()[base + c] - m).exp();
                re[base + c] = e;
                denom += e;
            }
            for c in 0..cols {
                re[base + c] /= denom;
            }
        }
        let out = CTensor::from_real(&[rows, cols], re)?;
        Ok(self.push_op(out, Box::new(SoftmaxRowsOp { x, rows, cols }), &[x]))
    }

    /// Mean over consecutive groups of `group` rows: (G·g, D) → (G, D).
    pub fn mean_pool_rows(&mut self, x: NodeId, group: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rank() != 2 || group == 0 || xv.shape()[0] % group != 0 {
            return Err(Error::usage(format!(
                "mean_pool_rows: group {group} does not divide rows {:?}",
                xv.shape()
            )));
        }
        let (rows, cols) = (xv.shape()[0], xv.shape()[1]);
        let out_rows = rows / group;
        let inv = 1.0 / group as f64;
        let mut out = CTensor::zeros(&[out_rows, cols]);
        for o in 0..out_rows {
            for c in 0..cols {
                let mut sr = 0.0;
                let mut si = 0.0;
                for s in 0..group {
                    sr += xv.re()[(o * group + s) * cols + c];
                    si += xv.im()[(o * group + s) * cols + c];
                }
                out.re_mut()[o * cols + c] = sr * inv;
                out.im_mut()[o * cols + c] = si * inv;
            }
        }
        Ok(self.push_op(
            out,
            Box::new(MeanPoolRowsOp {
                x,
                group,
                out_rows,
                cols,
            }),
            &[x],
        ))
    }

    /// Real part as a real-valued tensor.
    pub fn real_part(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let out = CTensor::from_real(xv.shape(), xv.re().to_vec())?;
        Ok(self.push_op(out, Box::new(RePartOp { x }), &[x]))
    }

    /// Imaginary part as a real-valued tensor.
    pub fn imag_part(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let out = CTensor::from_real(xv.shape(), xv.im().to_vec())?;
        Ok(self.push_op(out, Box::new(ImPartOp { x }), &[x]))
    }

    /// |z|² elementwise, as a real-valued tensor.
    pub fn mag_sq(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let re: Vec<f64> = xv
            .re()
            .iter()
            .zip(xv.im())
            .map(|(&r, &i)| r * r + i * i)
            .collect();
        let out = CTensor::from_real(xv.shape(), re)?;
        Ok(self.push_op(out, Box::new(MagSqOp { x }), &[x]))
    }

    /// Sum of all elements, as a complex scalar node.
    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let len = xv.len();
        let out = CTensor::scalar(Cplx::new(
            xv.re().iter().sum::<f64>(),
            xv.im().iter().sum::<f64>(),
        ));
        Ok(self.push_op(out, Box::new(SumAllOp { x, len }), &[x]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_of_re_product_gives_split_real_partials() {
        // L = Re(w·x) with w = a+jb, x = c+jd gives ∂L/∂a = c, ∂L/∂b = −d
        let (c, d) = (3.0, -4.0);
        let mut tape = Tape::new();
        let w = tape.param(CTensor::scalar(Cplx::new(1.5, 0.5)));
        let x = tape.leaf(CTensor::scalar(Cplx::new(c, d)));
        let p = tape.mul(w, x).unwrap();
        let l = tape.real_part(p).unwrap();
        let grads = tape.backward(l).unwrap();
        let g = grads.get(w).unwrap();
        assert!((g.re[0] - c).abs() < 1e-15);
        assert!((g.im[0] - (-d)).abs() < 1e-15);
    }

    #[test]
    fn backward_through_identity_chain_is_unit_seed() {
        let mut tape = Tape::new();
        let x = tape.param(CTensor::scalar(Cplx::new(2.0, 0.0)));
        let one = tape.constant_scalar(Cplx::ONE);
        let y = tape.mul(x, one).unwrap();
        let z = tape.real_part(y).unwrap();
        let grads = tape.backward(z).unwrap();
        let g = grads.get(x).unwrap();
        assert_eq!(g.re[0], 1.0);
        assert_eq!(g.im[0], 0.0);
    }

    #[test]
    fn backward_rejects_non_scalar_and_complex_nodes() {
        let mut tape = Tape::new();
        let x = tape.param(CTensor::zeros(&[2, 2]));
        assert!(tape.backward(x).is_err());

        let c = tape.param(CTensor::scalar(Cplx::new(1.0, 0.5)));
        assert!(tape.backward(c).is_err());
    }

    #[test]
    fn backward_is_bit_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        let vals: Vec<Cplx> = (0..12)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let run = || {
            let mut tape = Tape::new();
            let a = tape.param(CTensor::from_cplx(&[3, 4], &vals[..]).unwrap());
            let at = tape.value(a).transposed().unwrap();
            let at = tape.leaf(at);
            let b = tape.matmul(a, at).unwrap();
            let m = tape.mag_sq(b).unwrap();
            let s = tape.sum_all(m).unwrap();
            let grads = tape.backward(s).unwrap();
            let g = grads.get(a).unwrap();
            (g.re.clone(), g.im.clone())
        };
        let (r1, i1) = run();
        let (r2, i2) = run();
        assert_eq!(r1, r2);
        assert_eq!(i1, i2);
    }

    #[test]
    fn crelu_value_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(
            CTensor::from_cplx(
                &[3],
                &[
                    Cplx::new(1.0, 1.0),
                    Cplx::new(-1.0, 2.0),
                    Cplx::new(3.0, -0.5),
                ],
            )
            .unwrap(),
        );
        let y = tape.crelu(x).unwrap();
        let v = tape.value(y);
        assert_eq!(v.at(0), Cplx::new(1.0, 1.0));
        assert_eq!(v.at(1), Cplx::ZERO);
        assert_eq!(v.at(2), Cplx::ZERO);
    }

    #[test]
    fn crelu_is_idempotent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        let vals: Vec<Cplx> = (0..64)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut tape = Tape::new();
        let x = tape.leaf(CTensor::from_cplx(&[64], &vals).unwrap());
        let once = tape.crelu(x).unwrap();
        let twice = tape.crelu(once).unwrap();
        assert_eq!(tape.value(once), tape.value(twice));
    }

    #[test]
    fn avg_pool_means_windows() {
        let mut tape = Tape::new();
        let x = tape.leaf(
            CTensor::from_cplx(&[1, 1, 2], &[Cplx::new(1.0, 1.0), Cplx::new(3.0, 3.0)]).unwrap(),
        );
        let y = tape.avg_pool1d(x, 2).unwrap();
        assert_eq!(tape.value(y).at(0), Cplx::new(2.0, 2.0));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(17);
        let re: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut tape = Tape::new();
        let x = tape.leaf(CTensor::from_real(&[5, 8], re).unwrap());
        let p = tape.softmax_rows(x).unwrap();
        let v = tape.value(p);
        for r in 0..5 {
            let s: f64 = (0..8).map(|c| v.re()[r * 8 + c]).sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn slice_and_concat_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let vals: Vec<Cplx> = (0..24)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let t = CTensor::from_cplx(&[4, 6], &vals).unwrap();

        let mut tape = Tape::new();
        let x = tape.leaf(t.clone());
        let top = tape.slice_rows(x, 0, 2).unwrap();
        let bot = tape.slice_rows(x, 2, 4).unwrap();
        let back = tape.concat_rows(&[top, bot]).unwrap();
        assert_eq!(tape.value(back), &t);

        let left = tape.slice_cols(x, 0, 3).unwrap();
        let right = tape.slice_cols(x, 3, 6).unwrap();
        let back2 = tape.concat_cols(&[left, right]).unwrap();
        assert_eq!(tape.value(back2), &t);
    }
}
