//! Complex-valued tensors with reverse-mode differentiation.
//!
//! The tensor core is deliberately small: it provides exactly the operations
//! the network and both loss terms need, on n-dimensional complex arrays
//! stored as separate real/imaginary planes of `f64`. Differentiation uses
//! the split-real convention — the real and imaginary components of every
//! value are treated as independent real variables, and a recorded [`Tape`]
//! propagates a real-valued scalar loss backwards to `(d/d re, d/d im)`
//! gradient planes for every parameter.

mod fft;
mod gemm;
mod gradcheck;
mod ops;
mod tape;

pub use gemm::{cgemm, gemm};
pub use gradcheck::finite_diff_check;
pub use ops::{BnBatchStats, BnMode};
pub use tape::{BackwardCtx, GradPlanes, Grads, NodeId, Tape, TapeOp};

use crate::error::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// A complex scalar with `f64` components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cplx {
    pub re: f64,
    pub im: f64,
}

impl Cplx {
    pub const ZERO: Cplx = Cplx { re: 0.0, im: 0.0 };
    pub const ONE: Cplx = Cplx { re: 1.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Cplx { re, im }
    }

    /// Unit-magnitude rotation `exp(j·angle)` scaled by `mag`.
    pub fn from_polar(mag: f64, angle: f64) -> Self {
        Cplx::new(mag * angle.cos(), mag * angle.sin())
    }

    pub fn conj(self) -> Self {
        Cplx::new(self.re, -self.im)
    }

    pub fn abs_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn scale(self, s: f64) -> Self {
        Cplx::new(self.re * s, self.im * s)
    }
}

impl Add for Cplx {
    type Output = Cplx;
    fn add(self, rhs: Cplx) -> Cplx {
        Cplx::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for Cplx {
    type Output = Cplx;
    fn sub(self, rhs: Cplx) -> Cplx {
        Cplx::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for Cplx {
    type Output = Cplx;
    fn mul(self, rhs: Cplx) -> Cplx {
        Cplx::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl Neg for Cplx {
    type Output = Cplx;
    fn neg(self) -> Cplx {
        Cplx::new(-self.re, -self.im)
    }
}

/// An n-dimensional complex tensor stored row-major as two `f64` planes.
///
/// Values are immutable once handed to a [`Tape`]; plain value arithmetic
/// (no differentiation record) is available directly on the type.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Elementwise operation selector for [`elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

impl CTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        CTensor {
            shape: shape.to_vec(),
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn from_planes(shape: &[usize], re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if re.len() != n || im.len() != n {
            return Err(Error::usage(format!(
                "plane length {}/{} does not match shape {:?} (expected {})",
                re.len(),
                im.len(),
                shape,
                n
            )));
        }
        Ok(CTensor {
            shape: shape.to_vec(),
            re,
            im,
        })
    }

    /// Real-valued tensor: imaginary plane all zero.
    pub fn from_real(shape: &[usize], re: Vec<f64>) -> Result<Self> {
        let n = re.len();
        Self::from_planes(shape, re, vec![0.0; n])
    }

    pub fn scalar(v: Cplx) -> Self {
        CTensor {
            shape: vec![1],
            re: vec![v.re],
            im: vec![v.im],
        }
    }

    pub fn from_cplx(shape: &[usize], values: &[Cplx]) -> Result<Self> {
        let re = values.iter().map(|c| c.re).collect();
        let im = values.iter().map(|c| c.im).collect();
        Self::from_planes(shape, re, im)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut [f64] {
        &mut self.im
    }

    pub fn at(&self, flat: usize) -> Cplx {
        Cplx::new(self.re[flat], self.im[flat])
    }

    pub fn set(&mut self, flat: usize, v: Cplx) {
        self.re[flat] = v.re;
        self.im[flat] = v.im;
    }

    /// Element access by multi-index. Total for any in-bounds index.
    pub fn get(&self, index: &[usize]) -> Result<Cplx> {
        if index.len() != self.shape.len() {
            return Err(Error::usage(format!(
                "index rank {} does not match tensor rank {}",
                index.len(),
                self.shape.len()
            )));
        }
        let mut flat = 0usize;
        for (d, (&i, &ext)) in index.iter().zip(&self.shape).enumerate() {
            if i >= ext {
                return Err(Error::usage(format!(
                    "index {} out of bounds for extent {} in dimension {}",
                    i, ext, d
                )));
            }
            flat = flat * ext + i;
        }
        Ok(self.at(flat))
    }

    pub fn iter(&self) -> impl Iterator<Item = Cplx> + '_ {
        self.re
            .iter()
            .zip(self.im.iter())
            .map(|(&r, &i)| Cplx::new(r, i))
    }

    pub fn all_finite(&self) -> bool {
        self.re.iter().all(|v| v.is_finite()) && self.im.iter().all(|v| v.is_finite())
    }

    /// Reinterpret the same data under a new shape with equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<CTensor> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape.to_vec(),
            });
        }
        Ok(CTensor {
            shape: shape.to_vec(),
            re: self.re.clone(),
            im: self.im.clone(),
        })
    }

    /// Sum of |z|² over all elements.
    pub fn energy(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| r * r + i * i)
            .sum()
    }

    /// Rank-2 transpose.
    pub fn transposed(&self) -> Result<CTensor> {
        if self.rank() != 2 {
            return Err(Error::usage("transpose requires a rank-2 tensor"));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = CTensor::zeros(&[n, m]);
        for i in 0..m {
            for j in 0..n {
                out.re[j * m + i] = self.re[i * n + j];
                out.im[j * m + i] = self.im[i * n + j];
            }
        }
        Ok(out)
    }

    /// One-dimensional DFT along the last axis, applied independently per
    /// leading index: `S[k] = Σ_t s[t]·exp(−j2πkt/N)`. Exact for arbitrary N.
    pub fn dft_1d(&self) -> Result<CTensor> {
        if self.rank() == 0 || self.shape.is_empty() {
            return Err(Error::usage("dft_1d requires rank >= 1"));
        }
        let n = *self.shape.last().unwrap();
        if n == 0 {
            return Err(Error::usage("dft_1d requires a non-empty last axis"));
        }
        let rows = self.len() / n;
        let mut out = CTensor::zeros(&self.shape);
        // Channels are independent; rows are transformed in place one by one.
        for r in 0..rows {
            let s = r * n;
            let (fre, fim) = fft::dft_forward(&self.re[s..s + n], &self.im[s..s + n]);
            out.re[s..s + n].copy_from_slice(&fre);
            out.im[s..s + n].copy_from_slice(&fim);
        }
        Ok(out)
    }
}

/// Elementwise `a ∘ b` for `∘ ∈ {+, −, ×}`. Shapes must match exactly, or
/// one side may be a scalar (length-1 tensor) broadcast against the other.
pub fn elementwise(op: ElemOp, a: &CTensor, b: &CTensor) -> Result<CTensor> {
    let (out_shape, a_scalar, b_scalar) = broadcast_shapes("elementwise", a, b)?;
    let n: usize = out_shape.iter().product();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for idx in 0..n {
        let x = a.at(if a_scalar { 0 } else { idx });
        let y = b.at(if b_scalar { 0 } else { idx });
        let v = match op {
            ElemOp::Add => x + y,
            ElemOp::Sub => x - y,
            ElemOp::Mul => x * y,
        };
        re[idx] = v.re;
        im[idx] = v.im;
    }
    CTensor::from_planes(&out_shape, re, im)
}

pub(crate) fn broadcast_shapes(
    op: &'static str,
    a: &CTensor,
    b: &CTensor,
) -> Result<(Vec<usize>, bool, bool)> {
    if a.shape() == b.shape() {
        return Ok((a.shape().to_vec(), false, false));
    }
    if a.is_scalar() {
        return Ok((b.shape().to_vec(), true, false));
    }
    if b.is_scalar() {
        return Ok((a.shape().to_vec(), false, true));
    }
    Err(Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    })
}

/// Standard complex matrix product of two rank-2 tensors.
pub fn matmul(a: &CTensor, b: &CTensor) -> Result<CTensor> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::usage("matmul requires rank-2 tensors"));
    }
    let (m, ka) = (a.shape[0], a.shape[1]);
    let (kb, n) = (b.shape[0], b.shape[1]);
    if ka != kb {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = CTensor::zeros(&[m, n]);
    cgemm(
        &mut out.re, &mut out.im, &a.re, &a.im, &b.re, &b.im, m, ka, n, false, false, false,
    );
    Ok(out)
}

impl Add for &CTensor {
    type Output = Result<CTensor>;
    fn add(self, rhs: &CTensor) -> Result<CTensor> {
        elementwise(ElemOp::Add, self, rhs)
    }
}

impl Sub for &CTensor {
    type Output = Result<CTensor>;
    fn sub(self, rhs: &CTensor) -> Result<CTensor> {
        elementwise(ElemOp::Sub, self, rhs)
    }
}

impl Mul for &CTensor {
    type Output = Result<CTensor>;
    fn mul(self, rhs: &CTensor) -> Result<CTensor> {
        elementwise(ElemOp::Mul, self, rhs)
    }
}

/// Deterministic stream derivation for seeding sub-generators.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn complex_product_expands_by_hand() {
        // (1+2j)(3+4j) = 3+4j+6j+8j² = −5+10j
        let p = Cplx::new(1.0, 2.0) * Cplx::new(3.0, 4.0);
        assert_eq!(p, Cplx::new(-5.0, 10.0));

        let a = CTensor::from_cplx(&[1], &[Cplx::new(1.0, 2.0)]).unwrap();
        let b = CTensor::from_cplx(&[1], &[Cplx::new(3.0, 4.0)]).unwrap();
        let c = elementwise(ElemOp::Mul, &a, &b).unwrap();
        assert_eq!(c.at(0), Cplx::new(-5.0, 10.0));
    }

    #[test]
    fn additive_and_multiplicative_identities() {
        let x = CTensor::from_cplx(
            &[2, 2],
            &[
                Cplx::new(1.0, -2.0),
                Cplx::new(0.5, 0.25),
                Cplx::new(-3.0, 1.0),
                Cplx::new(2.0, 2.0),
            ],
        )
        .unwrap();
        let zero = CTensor::zeros(&[2, 2]);
        let one = CTensor::from_cplx(&[2, 2], &[Cplx::ONE; 4]).unwrap();
        assert_eq!(elementwise(ElemOp::Add, &x, &zero).unwrap(), x);
        assert_eq!(elementwise(ElemOp::Mul, &x, &one).unwrap(), x);
    }

    #[test]
    fn scalar_broadcast_against_tensor() {
        let x = CTensor::from_cplx(&[3], &[Cplx::new(1.0, 0.0); 3]).unwrap();
        let s = CTensor::scalar(Cplx::new(0.0, 1.0));
        let y = elementwise(ElemOp::Mul, &x, &s).unwrap();
        assert_eq!(y.shape(), &[3]);
        for v in y.iter() {
            assert_eq!(v, Cplx::new(0.0, 1.0));
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = CTensor::zeros(&[2, 3]);
        let b = CTensor::zeros(&[3, 2]);
        assert!(elementwise(ElemOp::Add, &a, &b).is_err());
    }

    #[test]
    fn matmul_identity_and_scalar_cases() {
        // I · M = M
        let mut ident = CTensor::zeros(&[3, 3]);
        for i in 0..3 {
            ident.set(i * 3 + i, Cplx::ONE);
        }
        let m = CTensor::from_cplx(
            &[3, 3],
            &(0..9)
                .map(|i| Cplx::new(i as f64, -(i as f64) * 0.5))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let p = matmul(&ident, &m).unwrap();
        for i in 0..9 {
            approx(p.at(i).re, m.at(i).re, 1e-15);
            approx(p.at(i).im, m.at(i).im, 1e-15);
        }

        // 1×1 reduces to the complex scalar product
        let a = CTensor::from_cplx(&[1, 1], &[Cplx::new(1.0, 2.0)]).unwrap();
        let b = CTensor::from_cplx(&[1, 1], &[Cplx::new(3.0, 4.0)]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.at(0), Cplx::new(-5.0, 10.0));
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let a = CTensor::from_cplx(
            &[5, 4],
            &(0..20)
                .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let b = CTensor::from_cplx(
            &[4, 3],
            &(0..12)
                .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let c = matmul(&a, &b).unwrap();

        // independent naive oracle
        for i in 0..5 {
            for j in 0..3 {
                let mut acc = Cplx::ZERO;
                for p in 0..4 {
                    acc = acc + a.at(i * 4 + p) * b.at(p * 3 + j);
                }
                let got = c.at(i * 3 + j);
                approx(got.re, acc.re, 1e-12);
                approx(got.im, acc.im, 1e-12);
            }
        }
    }

    #[test]
    fn matmul_inner_extent_mismatch_rejected() {
        let a = CTensor::zeros(&[2, 3]);
        let b = CTensor::zeros(&[4, 2]);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn dft_of_constant_signal_is_dc_only() {
        let n = 100;
        let x = CTensor::from_real(&[n], vec![1.0; n]).unwrap();
        let s = x.dft_1d().unwrap();
        approx(s.at(0).re, 100.0, 1e-9);
        approx(s.at(0).im, 0.0, 1e-9);
        for k in 1..n {
            assert!(s.at(k).abs() < 1e-9, "bin {k} leaked: {}", s.at(k).abs());
        }
    }

    #[test]
    fn dft_of_single_exponential_is_impulse() {
        let n = 100;
        let vals: Vec<Cplx> = (0..n)
            .map(|t| Cplx::from_polar(1.0, 2.0 * std::f64::consts::PI * 7.0 * t as f64 / n as f64))
            .collect();
        let x = CTensor::from_cplx(&[n], &vals).unwrap();
        let s = x.dft_1d().unwrap();
        approx(s.at(7).abs(), 100.0, 1e-9);
        for k in 0..n {
            if k != 7 {
                assert!(s.at(k).abs() < 1e-8, "bin {k}: {}", s.at(k).abs());
            }
        }
    }

    #[test]
    fn dft_matches_direct_sum_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
        let n = 100;
        let vals: Vec<Cplx> = (0..n)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = CTensor::from_cplx(&[n], &vals).unwrap();
        let s = x.dft_1d().unwrap();

        let mut max_err = 0.0f64;
        for k in 0..n {
            // direct O(N²) sum, independent of the transform engine
            let mut acc = Cplx::ZERO;
            for (t, &v) in vals.iter().enumerate() {
                let w = Cplx::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64,
                );
                acc = acc + v * w;
            }
            max_err = max_err.max((s.at(k) - acc).abs());
        }
        assert!(max_err <= 1e-9, "max abs err {max_err}");
    }

    #[test]
    fn dft_engine_handles_arbitrary_lengths() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 4, 5, 6, 7, 8, 9, 12, 16, 17, 25, 31, 37, 64, 97, 100, 128, 211] {
            let vals: Vec<Cplx> = (0..n)
                .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let x = CTensor::from_cplx(&[n], &vals).unwrap();
            let s = x.dft_1d().unwrap();
            for k in 0..n {
                let mut acc = Cplx::ZERO;
                for (t, &v) in vals.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    acc = acc + v * Cplx::from_polar(1.0, ang);
                }
                assert!(
                    (s.at(k) - acc).abs() <= 1e-9 * (n as f64).max(1.0),
                    "n={n} k={k}: {} vs {}",
                    s.at(k).re,
                    acc.re
                );
            }
        }
    }

    #[test]
    fn dft_applies_per_channel_on_rank2() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let (ch, n) = (4, 25);
        let vals: Vec<Cplx> = (0..ch * n)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = CTensor::from_cplx(&[ch, n], &vals).unwrap();
        let s = x.dft_1d().unwrap();
        for c in 0..ch {
            let row = CTensor::from_cplx(&[n], &vals[c * n..(c + 1) * n]).unwrap();
            let sr = row.dft_1d().unwrap();
            for k in 0..n {
                assert_eq!(s.at(c * n + k), sr.at(k));
            }
        }
    }

    #[test]
    fn parseval_energy_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        let n = 100;
        let vals: Vec<Cplx> = (0..n)
            .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = CTensor::from_cplx(&[n], &vals).unwrap();
        let s = x.dft_1d().unwrap();
        let lhs = x.energy();
        let rhs = s.energy() / n as f64;
        assert!((lhs - rhs).abs() / lhs.abs() <= 1e-9);
    }

    #[test]
    fn dft_is_linear() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let n = 100;
        let mk = |rng: &mut rand_chacha::ChaCha20Rng| {
            CTensor::from_cplx(
                &[n],
                &(0..n)
                    .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let alpha = CTensor::scalar(Cplx::new(0.7, -0.3));
        let beta = CTensor::scalar(Cplx::new(-1.2, 0.4));

        let ax = elementwise(ElemOp::Mul, &x, &alpha).unwrap();
        let by = elementwise(ElemOp::Mul, &y, &beta).unwrap();
        let combo = elementwise(ElemOp::Add, &ax, &by).unwrap();
        let lhs = combo.dft_1d().unwrap();

        let sx = x.dft_1d().unwrap();
        let sy = y.dft_1d().unwrap();
        let asx = elementwise(ElemOp::Mul, &sx, &alpha).unwrap();
        let bsy = elementwise(ElemOp::Mul, &sy, &beta).unwrap();
        let rhs = elementwise(ElemOp::Add, &asx, &bsy).unwrap();

        for k in 0..n {
            assert!((lhs.at(k) - rhs.at(k)).abs() <= 1e-9);
        }
    }

    #[test]
    fn multiplication_algebra_properties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(13);
        for _ in 0..200 {
            let a = Cplx::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = Cplx::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let c = Cplx::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            // commutative
            assert_eq!(a * b, b * a);
            // associative within reassociation drift
            let l = (a * b) * c;
            let r = a * (b * c);
            assert!((l - r).abs() <= 1e-12);
            // distributes over addition
            let l2 = a * (b + c);
            let r2 = a * b + a * c;
            assert!((l2 - r2).abs() <= 1e-12);
        }
    }

    #[test]
    fn element_access_is_total_in_bounds() {
        let t = CTensor::zeros(&[2, 3, 4]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert!(t.get(&[i, j, k]).is_ok());
                }
            }
        }
        assert!(t.get(&[2, 0, 0]).is_err());
        assert!(t.get(&[0, 0]).is_err());
    }
}
