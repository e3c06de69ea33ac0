//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 20_000;

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> Result<f64>>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(center - half * x)?;
        let f2 = f(center + half * x)?;
        kronrod += w * (f1 + f2);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[lo, hi]` until the summed error estimate falls below
/// `rel_tol * |integral|` (or an absolute floor of `abs_tol`).
pub(crate) fn integrate<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if hi <= lo {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&mut f, lo, hi)?;
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut segments = 1;
    loop {
        let tolerance = (rel_tol * total.abs()).max(abs_tol);
        if error <= tolerance {
            return Ok(total);
        }
        if segments >= MAX_SEGMENTS {
            return Err(Error::Quadrature { estimate: error, tolerance });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Segment cannot be split further in floating point.
            return Err(Error::Quadrature { estimate: error, tolerance });
        }
        let left = kronrod(&mut f, worst.lo, mid)?;
        let right = kronrod(&mut f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        segments += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| Ok(x.powi(5) - 3.0 * x * x + 1.0), -1.0, 2.0, 1e-12, 1e-15).unwrap();
        // 64/6 - 1/6 - (8 + 1) + 3 = 21/2 - 9 + 3
        assert!((v - 4.5).abs() < 1e-13, "{v}");
    }

    #[test]
    fn step_discontinuity_converges() {
        let f = |x: f64| Ok(if (0.2..=0.5).contains(&x) { 1.0 - x } else { 0.0 });
        let v = integrate(f, 0.0, 1.0, 1e-10, 1e-15).unwrap();
        assert!((v - 0.195).abs() < 1e-10, "{v}");
    }

    #[test]
    fn smooth_transcendental() {
        let v = integrate(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-12, 1e-15).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }
}
