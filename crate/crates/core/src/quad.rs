//! One-dimensional quadrature: adaptive Gauss–Kronrod and Gauss–Legendre rules.

// Nodes and weights are printed to 20 digits as tabulated.
#![allow(clippy::excessive_precision)]

use crate::error::{PhysicsError, Result};
use crate::scalar::{lit, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod estimate and its difference to the embedded 7-point Gauss rule.
fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half: T = lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * lit(WGK[j]);
        if j % 2 == 1 {
            gauss += (f1 + f2) * lit(WG[j / 2]);
        }
    }
    (kronrod * half_len, ((kronrod - gauss) * half_len).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate drops below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (value, err) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, value, err)];
    let mut total = value;
    let mut total_err = err;
    const MAX_INTERVALS: usize = 4000;
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if intervals.len() >= MAX_INTERVALS {
            return Err(PhysicsError::Quadrature {
                tol: abs_tol.max(rel_tol * total.abs()).to_f64(),
                estimate: total_err.to_f64(),
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::zero()), |best, (i, iv)| if iv.3 > best.1 { (i, iv.3) } else { best });
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = (lo + hi) * lit(0.5);
        if !(mid > lo && mid < hi) {
            // interval no longer representable; accept what we have
            intervals.push((lo, hi, v, T::zero()));
            total_err -= e;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        // keep the running error honest against cancellation drift
        if total_err < T::zero() {
            total_err = intervals.iter().fold(T::zero(), |s, iv| s + iv.3);
        }
    }
    Ok(total)
}

/// Iterated adaptive integral `∫_{a0}^{b0} ∫_{a1}^{b1} f(x, y) dy dx`.
///
/// The inner integrals run at a tolerance a hundred times tighter than the
/// outer one so that their noise does not stall the outer bisection.
pub fn integrate_2d<T: Real, F: FnMut(T, T) -> T>(
    mut f: F,
    (a0, b0): (T, T),
    (a1, b1): (T, T),
    abs_tol: T,
    rel_tol: T,
) -> Result<T> {
    let inner_scale: T = lit(0.01);
    let mut failure = None;
    let value = integrate(
        |x| match integrate(|y| f(x, y), a1, b1, abs_tol * inner_scale, rel_tol * inner_scale) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        a0,
        b0,
        abs_tol,
        rel_tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    assert!(n > 0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((lit(x), lit(w)));
    }
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}
