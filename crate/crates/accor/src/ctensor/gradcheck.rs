//! Finite-difference verification of recorded gradients.

use super::tape::{NodeId, Tape};
use super::CTensor;
use crate::error::{Error, Result};

/// Compare the recorded gradient of a scalar-valued function against
/// central finite differences.
///
/// `f` rebuilds the computation from a fresh tape and the given input node
/// and returns the scalar output node; it must be a pure function of the
/// input value. The return value is the maximum over all real components
/// (both planes) of `|analytic − numeric| / max(1, |numeric|)`.
pub fn finite_diff_check<F>(f: F, input: &CTensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    if step <= 0.0 {
        return Err(Error::usage("finite_diff_check requires step > 0"));
    }

    let eval = |x: &CTensor| -> Result<f64> {
        let mut tape = Tape::new();
        let id = tape.leaf(x.clone());
        let out = f(&mut tape, id)?;
        let v = tape.value(out);
        if !v.is_scalar() {
            return Err(Error::usage(
                "finite_diff_check requires a scalar-valued function",
            ));
        }
        if v.im()[0] != 0.0 {
            return Err(Error::usage(
                "finite_diff_check requires a real-valued function output",
            ));
        }
        Ok(v.re()[0])
    };

    // analytic gradient from one recorded pass
    let mut tape = Tape::new();
    let id = tape.param(input.clone());
    let out = f(&mut tape, id)?;
    let grads = tape.backward(out)?;
    let g = grads
        .get(id)
        .ok_or_else(|| Error::usage("input did not receive a gradient"))?;
    let (g_re, g_im) = (g.re.clone(), g.im.clone());

    let n = input.len();
    let mut max_rel: f64 = 0.0;
    for comp in 0..2 * n {
        let (plane_is_re, idx) = (comp < n, comp % n);
        let mut plus = input.clone();
        let mut minus = input.clone();
        if plane_is_re {
            plus.re_mut()[idx] += step;
            minus.re_mut()[idx] -= step;
        } else {
            plus.im_mut()[idx] += step;
            minus.im_mut()[idx] -= step;
        }
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * step);
        let analytic = if plane_is_re { g_re[idx] } else { g_im[idx] };
        let rel = (analytic - numeric).abs() / numeric.abs().max(1.0);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctensor::Cplx;
    use rand::{Rng, SeedableRng};

    fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> CTensor {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let vals: Vec<Cplx> = (0..n)
            .map(|_| Cplx::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi)))
            .collect();
        CTensor::from_cplx(shape, &vals).unwrap()
    }

    #[test]
    fn linear_function_is_exact_up_to_rounding() {
        let x = random_tensor(&[6], 1, -1.0, 1.0);
        let err = finite_diff_check(
            |tape, id| {
                let s = tape.sum_all(id)?;
                tape.real_part(s)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err <= 1e-10, "linear map error {err}");
    }

    #[test]
    fn crelu_checks_away_from_the_axes() {
        // inputs bounded away from the axes by > 10·step
        let mut x = random_tensor(&[8], 2, 0.1, 1.0);
        for i in 0..4 {
            x.re_mut()[i] = -x.re()[i] - 0.1;
            x.im_mut()[i * 2] = -x.im()[i * 2] - 0.1;
        }
        let err = finite_diff_check(
            |tape, id| {
                let r = tape.crelu(id)?;
                let m = tape.mag_sq(r)?;
                let s = tape.sum_all(m)?;
                tape.real_part(s)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "crelu error {err}");
    }

    #[test]
    fn matmul_and_magnitude_composite_passes() {
        let x = random_tensor(&[3, 4], 3, -1.0, 1.0);
        let w = random_tensor(&[4, 2], 4, -1.0, 1.0);
        let err = finite_diff_check(
            |tape, id| {
                let wn = tape.leaf(w.clone());
                let y = tape.matmul(id, wn)?;
                let m = tape.mag_sq(y)?;
                let s = tape.sum_all(m)?;
                tape.real_part(s)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err <= 1e-4, "matmul error {err}");

        // and with respect to the weight operand
        let err_w = finite_diff_check(
            |tape, id| {
                let xn = tape.leaf(x.clone());
                let y = tape.matmul(xn, id)?;
                let m = tape.mag_sq(y)?;
                let s = tape.sum_all(m)?;
                tape.real_part(s)
            },
            &w,
            1e-4,
        )
        .unwrap();
        assert!(err_w <= 1e-4, "matmul weight error {err_w}");
    }

    #[test]
    fn non_real_output_is_a_usage_error() {
        let x = random_tensor(&[2], 5, 0.5, 1.0);
        let res = finite_diff_check(|tape, id| tape.sum_all(id), &x, 1e-4);
        assert!(res.is_err());
    }
}
