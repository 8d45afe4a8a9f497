//! Arbitrary-length DFT engine.
//!
//! Composite lengths are handled by recursive mixed-radix Cooley–Tukey
//! splitting on the smallest prime factor; small prime lengths fall back to
//! the direct sum; large prime lengths use Bluestein's chirp-z algorithm on
//! a power-of-two convolution. The radar pipeline only ever asks for N = 100,
//! but the engine is exact for any N ≥ 1.

use std::f64::consts::PI;

/// Largest prime length evaluated by the direct O(N²) sum.
const DIRECT_PRIME_LIMIT: usize = 61;

/// Forward DFT of one signal: `S[k] = Σ_t s[t]·exp(−j2πkt/N)`.
pub fn dft_forward(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut out_re = re.to_vec();
    let mut out_im = im.to_vec();
    transform(&mut out_re, &mut out_im, false);
    (out_re, out_im)
}

/// In-place transform; `inverse` applies the conjugate kernel and 1/N scale.
fn transform(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    if inverse {
        // conj → forward → conj, then scale
        for v in im.iter_mut() {
            *v = -*v;
        }
        transform(re, im, false);
        let s = 1.0 / n as f64;
        for (r, i) in re.iter_mut().zip(im.iter_mut()) {
            *r *= s;
            *i = -*i * s;
        }
        return;
    }

    let p = smallest_prime_factor(n);
    if p == n {
        if n <= DIRECT_PRIME_LIMIT {
            direct(re, im);
        } else {
            bluestein(re, im);
        }
    } else {
        cooley_tukey(re, im, p);
    }
}

fn smallest_prime_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n % f == 0 {
            return f;
        }
        f += 2;
    }
    n
}

/// Direct O(N²) evaluation for small prime lengths.
fn direct(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let mut out_re = vec![0.0; n];
    let mut out_im = vec![0.0; n];
    for k in 0..n {
        let mut ar = 0.0;
        let mut ai = 0.0;
        for t in 0..n {
            let ang = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
            let (s, c) = ang.sin_cos();
            ar += re[t] * c - im[t] * s;
            ai += re[t] * s + im[t] * c;
        }
        out_re[k] = ar;
        out_im[k] = ai;
    }
    re.copy_from_slice(&out_re);
    im.copy_from_slice(&out_im);
}

/// Decimation-in-time split N = p·m: transform the p strided subsequences,
/// then combine with twiddles.
fn cooley_tukey(re: &mut [f64], im: &mut [f64], p: usize) {
    let n = re.len();
    let m = n / p;

    let mut sub_re = vec![0.0; n];
    let mut sub_im = vec![0.0; n];
    for b in 0..p {
        for a in 0..m {
            sub_re[b * m + a] = re[a * p + b];
            sub_im[b * m + a] = im[a * p + b];
        }
        let s = b * m;
        transform(&mut sub_re[s..s + m], &mut sub_im[s..s + m], false);
    }

    // X[k] = Σ_b ω_N^{b·k} · S_b[k mod m]
    let (tw_re, tw_im) = twiddles(n);
    for k in 0..n {
        let mut ar = 0.0;
        let mut ai = 0.0;
        let km = k % m;
        for b in 0..p {
            let w = (b * k) % n;
            let (wr, wi) = (tw_re[w], tw_im[w]);
            let (sr, si) = (sub_re[b * m + km], sub_im[b * m + km]);
            ar += sr * wr - si * wi;
            ai += sr * wi + si * wr;
        }
        re[k] = ar;
        im[k] = ai;
    }
}

/// ω_N^j = exp(−j2πj/N) for j in 0..N.
fn twiddles(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut tw_re = vec![0.0; n];
    let mut tw_im = vec![0.0; n];
    for (j, (r, i)) in tw_re.iter_mut().zip(tw_im.iter_mut()).enumerate() {
        let ang = -2.0 * PI * j as f64 / n as f64;
        let (s, c) = ang.sin_cos();
        *r = c;
        *i = s;
    }
    (tw_re, tw_im)
}

/// Bluestein chirp-z: expresses the length-N DFT as a cyclic convolution of
/// length ≥ 2N−1, evaluated with power-of-two transforms.
fn bluestein(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let m = (2 * n - 1).next_power_of_two();

    // chirp c[j] = exp(−jπ j²/N), with j² reduced mod 2N to keep angles small
    let mut ch_re = vec![0.0; n];
    let mut ch_im = vec![0.0; n];
    for j in 0..n {
        let q = (j * j) % (2 * n);
        let ang = -PI * q as f64 / n as f64;
        let (s, c) = ang.sin_cos();
        ch_re[j] = c;
        ch_im[j] = s;
    }

    // a = x ⊙ chirp, zero-padded
    let mut a_re = vec![0.0; m];
    let mut a_im = vec![0.0; m];
    for j in 0..n {
        a_re[j] = re[j] * ch_re[j] - im[j] * ch_im[j];
        a_im[j] = re[j] * ch_im[j] + im[j] * ch_re[j];
    }

    // b = conj(chirp), wrapped for cyclic convolution
    let mut b_re = vec![0.0; m];
    let mut b_im = vec![0.0; m];
    for j in 0..n {
        b_re[j] = ch_re[j];
        b_im[j] = -ch_im[j];
        if j != 0 {
            b_re[m - j] = ch_re[j];
            b_im[m - j] = -ch_im[j];
        }
    }

    transform(&mut a_re, &mut a_im, false);
    transform(&mut b_re, &mut b_im, false);
    for j in 0..m {
        let (ar, ai) = (a_re[j], a_im[j]);
        a_re[j] = ar * b_re[j] - ai * b_im[j];
        a_im[j] = ar * b_im[j] + ai * b_re[j];
    }
    transform(&mut a_re, &mut a_im, true);

    for k in 0..n {
        re[k] = a_re[k] * ch_re[k] - a_im[k] * ch_im[k];
        im[k] = a_re[k] * ch_im[k] + a_im[k] * ch_re[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        for n in [2usize, 5, 16, 67, 100] {
            let re: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let im: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (mut fr, mut fi) = dft_forward(&re, &im);
            transform(&mut fr, &mut fi, true);
            for t in 0..n {
                assert!((fr[t] - re[t]).abs() < 1e-10);
                assert!((fi[t] - im[t]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn large_prime_uses_bluestein_and_matches_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
        let n = 127; // prime above the direct-evaluation limit
        let re: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let im: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (fr, fi) = dft_forward(&re, &im);
        for k in 0..n {
            let mut ar = 0.0;
            let mut ai = 0.0;
            for t in 0..n {
                let ang = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                let (s, c) = ang.sin_cos();
                ar += re[t] * c - im[t] * s;
                ai += re[t] * s + im[t] * c;
            }
            assert!((fr[k] - ar).abs() < 1e-9, "k={k}");
            assert!((fi[k] - ai).abs() < 1e-9, "k={k}");
        }
    }
}
