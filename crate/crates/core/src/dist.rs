//! Scalar distribution samplers used by the Gibbs sweeps.
//!
//! These are the pieces the conditional updates are built from:
//!
//! * [`sample_inverse_gaussian`] — transformation-with-root-selection,
//!   exact, O(1) per draw. Drives the Laplace scale-mixture updates.
//! * [`sample_gig`] — generalized inverse Gaussian via rejection from a
//!   three-piece hat on the log-concave log-density (Devroye's construction);
//!   the expected number of proposals is bounded by ~1.6 uniformly in the
//!   parameters (center piece has acceptance e^{-1} at worst on a region of
//!   hat mass ≤ (t⁺−t⁻)/M, tails are exact exponentials of the tangents).
//!   Drives the precision-matrix diagonal updates.
//! * [`sample_truncnorm_lower`] — one-sided truncated standard normal:
//!   survival-function inversion for bounds ≤ 5, exponential-rejection
//!   (Robert's method) in the far tail where inversion loses precision.
//!   Drives the probit latent updates.
//!
//! All samplers consume a caller-supplied RNG and perform a deterministic
//! sequence of draws, so chains built on them replay bit-for-bit.

use crate::error::{Error, Result};
use rand::Rng;

/// Standard normal cumulative distribution function.
///
/// Hart/West double-precision rational approximation; absolute error below
/// 1e-15 over the full range, no cancellation in either tail.
pub fn norm_cdf(x: f64) -> f64 {
    let z = x.abs();
    if z > 37.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let e = (-z * z / 2.0).exp();
    let nc = if z < 7.071_067_811_865_475 {
        let b = ((((((3.526_249_659_989_11e-2 * z + 0.700_383_064_443_688) * z
            + 6.373_962_203_531_65)
            * z
            + 33.912_866_078_383)
            * z
            + 112.079_291_497_871)
            * z
            + 221.213_596_169_931)
            * z
            + 220.206_867_912_376)
            * e;
        let c = ((((((8.838_834_764_831_84e-2 * z + 1.755_667_163_182_64) * z
            + 16.064_177_579_207)
            * z
            + 86.780_732_202_946_1)
            * z
            + 296.564_248_779_674)
            * z
            + 637.333_633_378_831)
            * z
            + 793.826_512_519_948)
            * z
            + 440.413_735_824_752;
        b / c
    } else {
        let b = z + 0.65;
        let b = z + 4.0 / b;
        let b = z + 3.0 / b;
        let b = z + 2.0 / b;
        let b = z + 1.0 / b;
        e / (b * 2.506_628_274_631_000_5)
    };
    if x > 0.0 {
        1.0 - nc
    } else {
        nc
    }
}

/// Standard normal quantile function (inverse CDF).
///
/// Acklam's rational approximation refined by one Halley step against
/// [`norm_cdf`]; relative error ~1e-15 including the deep tails.
pub fn norm_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "norm_quantile needs p in (0,1), got {p}"
    );
    const A: [f64; 6] = [
        -3.969_683_028_665_376e+01,
        2.209_460_984_245_205e+02,
        -2.759_285_104_469_687e+02,
        1.383_577_518_672_69e+02,
        -3.066_479_806_614_716e+01,
        2.506_628_277_459_239e+00,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e+01,
        1.615_858_368_580_409e+02,
        -1.556_989_798_598_866e+02,
        6.680_131_188_771_972e+01,
        -1.328_068_155_288_572e+01,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-03,
        -3.223_964_580_411_365e-01,
        -2.400_758_277_161_838e+00,
        -2.549_732_539_343_734e+00,
        4.374_664_141_464_968e+00,
        2.938_163_982_698_783e+00,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-03,
        3.224_671_290_700_398e-01,
        2.445_134_137_142_996e+00,
        3.754_408_661_907_416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley refinement.
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Draw from the inverse Gaussian distribution IG(mean, shape).
///
/// Density f(x) ∝ x^{-3/2} exp(-shape·(x-mean)²/(2·mean²·x)), x > 0.
/// Uses the transformation method: a single chi-square variate gives the two
/// roots of the defining quadratic and one root is selected with probability
/// mean/(mean+root).
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, shape: f64) -> Result<f64> {
    if mean <= 0.0 || !mean.is_finite() {
        return Err(Error::DomainError {
            what: "inverse_gaussian",
            detail: format!("mean must be positive and finite, got {mean}"),
        });
    }
    if shape <= 0.0 || !shape.is_finite() {
        return Err(Error::DomainError {
            what: "inverse_gaussian",
            detail: format!("shape must be positive and finite, got {shape}"),
        });
    }
    let v: f64 = rng.sample(rand_distr::StandardNormal);
    let y = v * v;
    let x = mean + (mean * mean * y) / (2.0 * shape)
        - (mean / (2.0 * shape)) * (4.0 * mean * shape * y + mean * mean * y * y).sqrt();
    let u: f64 = rng.gen();
    let out = if u <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    };
    // The small root can round to zero when mean/shape is extreme; keep the
    // draw inside the support.
    Ok(out.max(f64::MIN_POSITIVE))
}

/// Draw from the generalized inverse Gaussian GIG(p, a, b).
///
/// Density f(x) ∝ x^{p-1} exp(-(a·x + b/x)/2), x > 0. Requires a > 0 and
/// b ≥ 0; b = 0 needs p > 0 and reduces to Gamma(p, rate a/2), which is
/// sampled directly.
pub fn sample_gig<R: Rng + ?Sized>(rng: &mut R, p: f64, a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || !a.is_finite() || b < 0.0 || !b.is_finite() || !p.is_finite() {
        return Err(Error::DomainError {
            what: "gig",
            detail: format!("need a > 0, b >= 0, all finite; got p={p}, a={a}, b={b}"),
        });
    }
    // Relative cutoff: below it the 1/x term is numerically invisible next to
    // the Gamma part and the exact-Gamma branch is both faster and safer.
    if b <= 1e-14 * a.max(1.0) {
        if p <= 0.0 {
            return Err(Error::DomainError {
                what: "gig",
                detail: format!("b = 0 needs p > 0, got p={p}"),
            });
        }
        let g = rand_distr::Gamma::new(p, 2.0 / a).map_err(|e| Error::DomainError {
            what: "gig",
            detail: e.to_string(),
        })?;
        return Ok(rng.sample(g).max(f64::MIN_POSITIVE));
    }
    if p < 0.0 {
        // X ~ GIG(p,a,b)  ⇔  1/X ~ GIG(-p,b,a)
        return Ok(1.0 / sample_gig(rng, -p, b, a)?);
    }

    // Standardize: x = sqrt(b/a)·y with y ~ f(y) ∝ y^{p-1} e^{-ω(y+1/y)/2}.
    let omega = (a * b).sqrt();
    let scale = (b / a).sqrt();

    // Log-density of t = ln y (up to a constant): h(t) = p·t − ω·cosh t,
    // strictly log-concave, mode at t0 = asinh(p/ω).
    let t0 = (p / omega).asinh();
    let h0 = p * t0 - omega * t0.cosh();
    let psi = |s: f64| p * (t0 + s) - omega * (t0 + s).cosh() - h0;
    let dpsi = |s: f64| p - omega * (t0 + s).sinh();

    // Solve ψ(s) = −1 on each side by bisection (ψ is monotone away from 0).
    let solve = |dir: f64| -> f64 {
        let mut hi = dir;
        while psi(hi) > -1.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0f64;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) > -1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let s_plus = solve(1.0);
    let s_minus = solve(-1.0);
    let d_plus = -dpsi(s_plus); // > 0
    let d_minus = dpsi(s_minus); // > 0

    let m_center = s_plus - s_minus;
    let m_right = (-1.0f64).exp() / d_plus;
    let m_left = (-1.0f64).exp() / d_minus;
    let total = m_center + m_right + m_left;

    for _ in 0..10_000 {
        let u: f64 = rng.gen::<f64>() * total;
        let (s, log_hat) = if u < m_center {
            (s_minus + rng.gen::<f64>() * m_center, 0.0)
        } else if u < m_center + m_right {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let s = s_plus + e / d_plus;
            (s, -1.0 - d_plus * (s - s_plus))
        } else {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let s = s_minus - e / d_minus;
            (s, -1.0 - d_minus * (s_minus - s))
        };
        let v: f64 = rng.gen();
        if v.ln() <= psi(s) - log_hat {
            return Ok(scale * (t0 + s).exp());
        }
    }
    Err(Error::breakdown(format!(
        "gig rejection sampler failed to accept (p={p}, a={a}, b={b})"
    )))
}

/// Draw Z ~ N(0,1) conditioned on Z ≥ lower.
///
/// For lower ≤ 5 the survival function is inverted directly:
/// S(z) = U·S(lower) ⇒ z = −Φ⁻¹(U·S(lower)), which is exact and loses no
/// precision because the small quantity stays in survival space. Past 5 the
/// acceptance region is so deep in the tail that inversion runs out of ulps,
/// so Robert's shifted-exponential rejection takes over (acceptance ≥ 0.84
/// at lower = 5, increasing with the bound).
pub fn sample_truncnorm_lower<R: Rng + ?Sized>(rng: &mut R, lower: f64) -> f64 {
    if lower <= 5.0 {
        let s = norm_cdf(-lower); // survival at the bound
        let u: f64 = rng.gen();
        let q = (u * s).max(f64::MIN_POSITIVE);
        -norm_quantile(q.min(1.0 - f64::EPSILON))
    } else {
        let alpha = (lower + (lower * lower + 4.0).sqrt()) / 2.0;
        loop {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let z = lower + e / alpha;
            let u: f64 = rng.gen();
            if u <= (-(z - alpha) * (z - alpha) / 2.0).exp() {
                return z;
            }
        }
    }
}

/// Draw from N(mean, sd²) truncated to (0, ∞) when `positive`, else (−∞, 0].
pub fn sample_truncnorm_sign<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    positive: bool,
) -> f64 {
    if positive {
        mean + sd * sample_truncnorm_lower(rng, -mean / sd)
    } else {
        mean - sd * sample_truncnorm_lower(rng, mean / sd)
    }
}
