//! Error function family: `erf`, `erfc`, and the scaled complement
//! `erfcx(x) = exp(x^2) * erfc(x)`.
//!
//! Rational approximations after W. J. Cody's CALERF (SPECFUN), accurate to
//! a few ulp across the real line. The scaled form matters here: the random
//! layout analysis multiplies `1 - erf(z)` by `exp(z^2)` where `z` can reach
//! ~60 at sparse densities, far past the point where either factor is
//! representable on its own.

const SQRT_PI_INV: f64 = 0.56418958354775628695;
const THRESH: f64 = 0.46875;
const X_SMALL: f64 = 5.96e-8;
// beyond this, erfc underflows to 0 in f64
const X_BIG: f64 = 26.543;
// beyond this, 1/x^2 in the large-x expansion underflows; use the leading term
const X_HUGE: f64 = 6.71e7;

const A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// erf on [-THRESH, THRESH].
fn erf_small(x: f64) -> f64 {
    let ysq = if x.abs() > X_SMALL { x * x } else { 0.0 };
    let mut num = A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + A[i]) * ysq;
        den = (den + B[i]) * ysq;
    }
    x * (num + A[3]) / (den + B[3])
}

/// erfcx on [THRESH, 4].
fn erfcx_mid(y: f64) -> f64 {
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    (num + C[7]) / (den + D[7])
}

/// erfcx on (4, inf).
fn erfcx_large(y: f64) -> f64 {
    if y >= X_HUGE {
        return SQRT_PI_INV / y;
    }
    let ysq = 1.0 / (y * y);
    let mut num = P[5] * ysq;
    let mut den = ysq;
    for i in 0..4 {
        num = (num + P[i]) * ysq;
        den = (den + Q[i]) * ysq;
    }
    let r = ysq * (num + P[4]) / (den + Q[4]);
    (SQRT_PI_INV - r) / y
}

/// `exp(-y^2)` split to preserve relative accuracy for large `y`.
fn exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for x >= 0; for
/// negative x the unscaled reflection `2 exp(x^2) - erfcx(-x)` applies and
/// may overflow to infinity.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let y = x.abs();
    let pos = if y <= THRESH {
        (y * y).exp() * (1.0 - erf_small(y))
    } else if y <= 4.0 {
        erfcx_mid(y)
    } else {
        erfcx_large(y)
    };
    if x >= 0.0 {
        pos
    } else {
        2.0 * (x * x).exp() - pos
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let y = x.abs();
    let pos = if y <= THRESH {
        1.0 - erf_small(y)
    } else if y <= X_BIG {
        exp_neg_sq(y) * erfcx(y)
    } else {
        0.0
    };
    if x >= 0.0 {
        pos
    } else {
        2.0 - pos
    }
}

/// Gauss error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let y = x.abs();
    let pos = if y <= THRESH {
        erf_small(y)
    } else if y <= 5.9 {
        1.0 - erfc(y)
    } else {
        1.0
    };
    if x >= 0.0 {
        pos
    } else {
        -pos
    }
}
