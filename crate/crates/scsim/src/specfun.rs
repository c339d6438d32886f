//! Associated Laguerre polynomials, their roots, and the sphere deformation
//! factor. Everything here is generic over the float type; the rest of the
//! crate instantiates these with `f64`.

use num_traits::{Float, FromPrimitive};

use crate::{Error, Result};

fn cast<T: FromPrimitive>(v: usize) -> T {
    T::from_usize(v).expect("usize fits in float")
}

/// Associated Laguerre polynomial `L_n^m(x)` by the stable three-term
/// upward recurrence
/// `(k+1) L_{k+1}^m = (2k + m + 1 - x) L_k^m - (k + m) L_{k-1}^m`.
pub fn laguerre<T: Float + FromPrimitive>(n: usize, m: usize, x: T) -> T {
    let one = T::one();
    if n == 0 {
        return one;
    }
    let mf: T = cast(m);
    let mut prev = one;
    let mut cur = one + mf - x;
    for k in 1..n {
        let kf: T = cast(k);
        let next = ((cast::<T>(2 * k + m + 1) - x) * cur - (kf + mf) * prev) / (kf + one);
        prev = cur;
        cur = next;
    }
    cur
}

/// Derivative `d/dx L_n(x) = -L_{n-1}^1(x)` of the plain Laguerre polynomial.
fn laguerre_prime<T: Float + FromPrimitive>(n: usize, x: T) -> T {
    if n == 0 {
        return T::zero();
    }
    -laguerre(n - 1, 1, x)
}

/// The `index`-th positive root of `L_n(x)`, counted from the smallest
/// (`index = 0`). Roots are located by a sign-change scan over `(0, 4n + 2)`
/// followed by bisection and a Newton polish.
///
/// All `n` roots of `L_n` are real, simple, and lie below `4n + 2`, so the
/// scan step `2.4 / (4n + 2)` stays well under the minimal root spacing for
/// any practical order.
pub fn laguerre_root<T: Float + FromPrimitive>(n: usize, index: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain("L_0 has no roots".into()));
    }
    if index >= n {
        return Err(Error::Domain(format!(
            "L_{n} has {n} roots, index {index} out of range"
        )));
    }

    let upper: T = cast(4 * n + 2);
    let step = T::from(2.4).unwrap() / upper;

    // Scan for the (index+1)-th sign change. L_n(0) = 1 > 0 always.
    let mut found = 0usize;
    let mut a = T::zero();
    let mut fa = T::one();
    let mut bracket = None;
    let mut x = step;
    while x < upper + step {
        let fx = laguerre(n, 0, x);
        if fx == T::zero() {
            // Landed on the root exactly; widen to a degenerate bracket.
            if found == index {
                bracket = Some((x, x));
                break;
            }
            found += 1;
        } else if (fa > T::zero()) != (fx > T::zero()) {
            if found == index {
                bracket = Some((a, x));
                break;
            }
            found += 1;
        }
        a = x;
        fa = fx;
        x = x + step;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Convergence(format!("root scan of L_{n} missed root {index}"))
    })?;

    if lo < hi {
        let mut flo = laguerre(n, 0, lo);
        for _ in 0..200 {
            let mid = (lo + hi) / cast(2);
            if mid <= lo || mid >= hi {
                break;
            }
            let fmid = laguerre(n, 0, mid);
            if fmid == T::zero() {
                lo = mid;
                hi = mid;
                break;
            }
            if (flo > T::zero()) != (fmid > T::zero()) {
                hi = mid;
            } else {
                lo = mid;
                flo = fmid;
            }
        }
    }

    // Newton polish, clamped to the bracket.
    let mut r = (lo + hi) / cast(2);
    for _ in 0..4 {
        let f = laguerre(n, 0, r);
        let fp = laguerre_prime(n, r);
        if fp == T::zero() {
            break;
        }
        let next = r - f / fp;
        if next > lo && next < hi {
            r = next;
        } else {
            break;
        }
    }
    Ok(r)
}

/// Smallest positive root of `L_n(x)`.
pub fn laguerre_smallest_root<T: Float + FromPrimitive>(n: usize) -> Result<T> {
    laguerre_root(n, 0)
}

/// Sphere deformation factor
/// `g(lambda, n) = sqrt((lambda (N + 1 - n) + s)(lambda n + s))` with
/// `s = sqrt(1 + lambda^2 / 4)` on the ladder `0..=N+1` of an `N + 1`
/// level family.
///
/// `lambda = 0` gives `g = 1` for every level, which collapses the family to
/// plain binomial states. The factor is symmetric under `n -> N + 1 - n`.
pub fn g_value<T: Float + FromPrimitive>(lambda: T, n_top: usize, n: usize) -> Result<T> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "deformation curvature must be finite and >= 0, got {:?}",
            lambda.to_f64()
        )));
    }
    if n > n_top + 1 {
        return Err(Error::Domain(format!(
            "level {n} outside ladder 0..={} of the N = {n_top} family",
            n_top + 1
        )));
    }
    let four = cast::<T>(4);
    let s = (T::one() + lambda * lambda / four).sqrt();
    let a = lambda * cast::<T>(n_top + 1 - n) + s;
    let b = lambda * cast::<T>(n) + s;
    Ok((a * b).sqrt())
}

/// Deformation factorial `[g(lambda, n)]! = g(lambda, 1) g(lambda, 2) ... g(lambda, n)`
/// with the empty product `[g(lambda, 0)]! = 1`.
pub fn g_factorial<T: Float + FromPrimitive>(lambda: T, n_top: usize, n: usize) -> Result<T> {
    let mut acc = T::one();
    for k in 1..=n {
        acc = acc * g_value(lambda, n_top, k)?;
    }
    Ok(acc)
}

/// Binomial coefficient as a float, by the overflow-safe multiplicative form.
pub fn binomial<T: Float + FromPrimitive>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 1..=k {
        acc = acc * cast::<T>(n - k + i) / cast::<T>(i);
    }
    acc
}

/// `ln(n!)` summed directly. Accurate to a few ulps for the modest orders a
/// truncated Fock space needs.
pub fn ln_factorial<T: Float + FromPrimitive>(n: usize) -> T {
    let mut acc = T::zero();
    for k in 2..=n {
        acc = acc + cast::<T>(k).ln();
    }
    acc
}
