//! Dense f64 matrix multiply used by every heavy operation in the crate.
//!
//! `C = alpha·A·B (+ C)` with optional logical transposition of either input.
//! The blocked path packs panels and runs a 4×8 microkernel (AVX2+FMA when
//! the CPU supports it, portable scalar otherwise). Work is split across
//! threads by fixed row blocks of C, so results are bit-identical regardless
//! of thread count or scheduling.

use rayon::prelude::*;

const MR: usize = 4;
const NR: usize = 8;
const KC: usize = 320;
const MC: usize = 96;
const NC: usize = 2048;

/// Below this flop count the naive loop wins over pack-and-kernel overhead.
const SMALL_FLOPS: usize = 24 * 24 * 24;

/// General matrix multiply on row-major storage.
///
/// Logical `A` is `m×k` (stored `k×m` when `ta`), logical `B` is `k×n`
/// (stored `n×k` when `tb`). Writes `c = alpha·A·B`, or accumulates
/// `c += alpha·A·B` when `accumulate`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    c: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    alpha: f64,
    accumulate: bool,
) {
    assert_eq!(c.len(), m * n, "C buffer size");
    assert_eq!(a.len(), m * k, "A buffer size");
    assert_eq!(b.len(), k * n, "B buffer size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }

    if m * n * k <= SMALL_FLOPS {
        naive(c, a, b, m, k, n, ta, tb, alpha, accumulate);
        return;
    }

    let mut bp = vec![0.0f64; KC * NC.min(next_multiple(n, NR))];
    for jc in (0..n).step_by(NC) {
        let nc = NC.min(n - jc);
        for pc in (0..k).step_by(KC) {
            let kc = KC.min(k - pc);
            pack_b(&mut bp, b, k, n, pc, jc, kc, nc, tb);
            let first = pc == 0 && !accumulate;

            c.par_chunks_mut(MC * n)
                .enumerate()
                .for_each(|(ci, c_chunk)| {
                    let ic = ci * MC;
                    let mc = MC.min(m - ic);
                    let mut ap = vec![0.0f64; next_multiple(mc, MR) * kc];
                    pack_a(&mut ap, a, m, k, ic, pc, mc, kc, ta);

                    let n_ip = mc.div_ceil(MR);
                    let n_jp = nc.div_ceil(NR);
                    for ip in 0..n_ip {
                        let mr_eff = MR.min(mc - ip * MR);
                        let a_panel = &ap[ip * MR * kc..(ip + 1) * MR * kc];
                        for jp in 0..n_jp {
                            let nr_eff = NR.min(nc - jp * NR);
                            let b_panel = &bp[jp * NR * kc..(jp + 1) * NR * kc];
                            let c_off = (ip * MR) * n + jc + jp * NR;
                            kernel_dispatch(
                                a_panel,
                                b_panel,
                                kc,
                                &mut c_chunk[c_off..],
                                n,
                                alpha,
                                first,
                                mr_eff,
                                nr_eff,
                            );
                        }
                    }
                });
        }
    }
}

/// Complex matrix multiply on split planes: `C = A·B` with the product
/// expanded into four real multiplies.
#[allow(clippy::too_many_arguments)]
pub fn cgemm(
    cr: &mut [f64],
    ci: &mut [f64],
    ar: &[f64],
    ai: &[f64],
    br: &[f64],
    bi: &[f64],
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    accumulate: bool,
) {
    gemm(cr, ar, br, m, k, n, ta, tb, 1.0, accumulate);
    gemm(cr, ai, bi, m, k, n, ta, tb, -1.0, true);
    gemm(ci, ar, bi, m, k, n, ta, tb, 1.0, accumulate);
    gemm(ci, ai, br, m, k, n, ta, tb, 1.0, true);
}

fn next_multiple(x: usize, f: usize) -> usize {
    x.div_ceil(f) * f
}

#[inline]
fn a_at(a: &[f64], m: usize, k: usize, i: usize, p: usize, ta: bool) -> f64 {
    if ta {
        a[p * m + i]
    } else {
        a[i * k + p]
    }
}

#[inline]
fn b_at(b: &[f64], k: usize, n: usize, p: usize, j: usize, tb: bool) -> f64 {
    if tb {
        b[j * k + p]
    } else {
        b[p * n + j]
    }
}

#[allow(clippy::too_many_arguments)]
fn naive(
    c: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    ta: bool,
    tb: bool,
    alpha: f64,
    accumulate: bool,
) {
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a_at(a, m, k, i, p, ta) * b_at(b, k, n, p, j, tb);
            }
            let v = alpha * acc;
            if accumulate {
                c[i * n + j] += v;
            } else {
                c[i * n + j] = v;
            }
        }
    }
}

/// Pack rows `[ic, ic+mc)` × cols `[pc, pc+kc)` of A into MR-tall k-major
/// panels, zero-padding the ragged last panel.
#[allow(clippy::too_many_arguments)]
fn pack_a(
    ap: &mut [f64],
    a: &[f64],
    m: usize,
    k: usize,
    ic: usize,
    pc: usize,
    mc: usize,
    kc: usize,
    ta: bool,
) {
    let n_ip = mc.div_ceil(MR);
    for ip in 0..n_ip {
        let base = ip * MR * kc;
        for p in 0..kc {
            for r in 0..MR {
                let i = ip * MR + r;
                ap[base + p * MR + r] = if i < mc {
                    a_at(a, m, k, ic + i, pc + p, ta)
                } else {
                    0.0
                };
            }
        }
    }
}

/// Pack rows `[pc, pc+kc)` × cols `[jc, jc+nc)` of B into NR-wide k-major
/// panels, zero-padding the ragged last panel.
#[allow(clippy::too_many_arguments)]
fn pack_b(
    bp: &mut [f64],
    b: &[f64],
    k: usize,
    n: usize,
    pc: usize,
    jc: usize,
    kc: usize,
    nc: usize,
    tb: bool,
) {
    let n_jp = nc.div_ceil(NR);
    for jp in 0..n_jp {
        let base = jp * NR * kc;
        for p in 0..kc {
            for jj in 0..NR {
                let j = jp * NR + jj;
                bp[base + p * NR + jj] = if j < nc {
                    b_at(b, k, n, pc + p, jc + j, tb)
                } else {
                    0.0
                };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn kernel_dispatch(
    a_panel: &[f64],
    b_panel: &[f64],
    kc: usize,
    c: &mut [f64],
    ldc: usize,
    alpha: f64,
    first: bool,
    mr_eff: usize,
    nr_eff: usize,
) {
    #[cfg(target_arch = "x86_64")]
    {
        if mr_eff == MR && nr_eff == NR && simd_available() {
            // SAFETY: feature presence checked at runtime.
            unsafe {
                kern_4x8_avx2(
                    a_panel.as_ptr(),
                    b_panel.as_ptr(),
                    kc,
                    c.as_mut_ptr(),
                    ldc,
                    alpha,
                    first,
                );
            }
            return;
        }
    }
    kern_scalar(a_panel, b_panel, kc, c, ldc, alpha, first, mr_eff, nr_eff);
}

#[cfg(target_arch = "x86_64")]
fn simd_available() -> bool {
    use std::sync::OnceLock;
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
    })
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2", enable = "fma")]
unsafe fn kern_4x8_avx2(
    ap: *const f64,
    bp: *const f64,
    kc: usize,
    c: *mut f64,
    ldc: usize,
    alpha: f64,
    first: bool,
) {
    use core::arch::x86_64::*;

    let mut acc = [_mm256_setzero_pd(); 8];
    let mut a = ap;
    let mut b = bp;
    for _ in 0..kc {
        let b0 = _mm256_loadu_pd(b);
        let b1 = _mm256_loadu_pd(b.add(4));
        let a0 = _mm256_set1_pd(*a);
        acc[0] = _mm256_fmadd_pd(a0, b0, acc[0]);
        acc[1] = _mm256_fmadd_pd(a0, b1, acc[1]);
        let a1 = _mm256_set1_pd(*a.add(1));
        acc[2] = _mm256_fmadd_pd(a1, b0, acc[2]);
        acc[3] = _mm256_fmadd_pd(a1, b1, acc[3]);
        let a2 = _mm256_set1_pd(*a.add(2));
        acc[4] = _mm256_fmadd_pd(a2, b0, acc[4]);
        acc[5] = _mm256_fmadd_pd(a2, b1, acc[5]);
        let a3 = _mm256_set1_pd(*a.add(3));
        acc[6] = _mm256_fmadd_pd(a3, b0, acc[6]);
        acc[7] = _mm256_fmadd_pd(a3, b1, acc[7]);
        a = a.add(MR);
        b = b.add(NR);
    }

    let va = _mm256_set1_pd(alpha);
    for r in 0..MR {
        let ptr = c.add(r * ldc);
        let lo = _mm256_mul_pd(acc[2 * r], va);
        let hi = _mm256_mul_pd(acc[2 * r + 1], va);
        if first {
            _mm256_storeu_pd(ptr, lo);
            _mm256_storeu_pd(ptr.add(4), hi);
        } else {
            _mm256_storeu_pd(ptr, _mm256_add_pd(_mm256_loadu_pd(ptr), lo));
            _mm256_storeu_pd(
                ptr.add(4),
                _mm256_add_pd(_mm256_loadu_pd(ptr.add(4)), hi),
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn kern_scalar(
    a_panel: &[f64],
    b_panel: &[f64],
    kc: usize,
    c: &mut [f64],
    ldc: usize,
    alpha: f64,
    first: bool,
    mr_eff: usize,
    nr_eff: usize,
) {
    let mut acc = [[0.0f64; NR]; MR];
    for p in 0..kc {
        let bb = &b_panel[p * NR..p * NR + NR];
        for r in 0..MR {
            let av = a_panel[p * MR + r];
            for j in 0..NR {
                acc[r][j] += av * bb[j];
            }
        }
    }
    for r in 0..mr_eff {
        for j in 0..nr_eff {
            let v = alpha * acc[r][j];
            if first {
                c[r * ldc + j] = v;
            } else {
                c[r * ldc + j] += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn reference(
        a: &[f64],
        b: &[f64],
        m: usize,
        k: usize,
        n: usize,
        ta: bool,
        tb: bool,
        alpha: f64,
    ) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a_at(a, m, k, i, p, ta) * b_at(b, k, n, p, j, tb);
                }
                c[i * n + j] = alpha * acc;
            }
        }
        c
    }

    #[test]
    fn blocked_gemm_matches_reference() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
        for &(m, k, n) in &[
            (1usize, 1usize, 1usize),
            (3, 7, 5),
            (4, 8, 8),
            (17, 33, 9),
            (96, 320, 32),
            (130, 71, 140),
            (200, 513, 23),
        ] {
            for &ta in &[false, true] {
                for &tb in &[false, true] {
                    for &acc in &[false, true] {
                        let a: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let b: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let c0: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let alpha = if acc { -0.5 } else { 1.25 };

                        let mut c = c0.clone();
                        gemm(&mut c, &a, &b, m, k, n, ta, tb, alpha, acc);

                        let r = reference(&a, &b, m, k, n, ta, tb, alpha);
                        for i in 0..m * n {
                            let expect = if acc { c0[i] + r[i] } else { r[i] };
                            assert!(
                                (c[i] - expect).abs() < 1e-10,
                                "m={m} k={k} n={n} ta={ta} tb={tb} acc={acc} i={i}: {} vs {}",
                                c[i],
                                expect
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cgemm_matches_complex_reference() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
        let (m, k, n) = (9, 14, 6);
        let ar: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ai: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let br: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bi: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut cr = vec![0.0; m * n];
        let mut ci = vec![0.0; m * n];
        cgemm(&mut cr, &mut ci, &ar, &ai, &br, &bi, m, k, n, false, false, false);
        for i in 0..m {
            for j in 0..n {
                let mut er = 0.0;
                let mut ei = 0.0;
                for p in 0..k {
                    let (x, y) = (ar[i * k + p], ai[i * k + p]);
                    let (u, v) = (br[p * n + j], bi[p * n + j]);
                    er += x * u - y * v;
                    ei += x * v + y * u;
                }
                assert!((cr[i * n + j] - er).abs() < 1e-12);
                assert!((ci[i * n + j] - ei).abs() < 1e-12);
            }
        }
    }
}
