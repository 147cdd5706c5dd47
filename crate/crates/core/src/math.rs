//! Scalar helpers over `libm` so the crate builds without `std`.

pub use core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut e = n.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Volume of the unit ball in `R^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    let half = k as f64 / 2.0;
    powf(PI, half) / gamma(half + 1.0)
}

/// Standard normal draw by Box-Muller.
pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    sqrt(-2.0 * ln(u1)) * cos(2.0 * PI * u2)
}

/// Uniform draw from the ball of radius `radius` in `R^n`.
pub fn uniform_in_ball<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> alloc::vec::Vec<f64> {
    let mut v: alloc::vec::Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
    let len = sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(f64::MIN_POSITIVE);
    let r = radius * powf(rng.gen::<f64>(), 1.0 / n as f64);
    for x in v.iter_mut() {
        *x *= r / len;
    }
    v
}

/// Determinant by partial-pivot elimination of a row-major `k x k` buffer.
pub fn det(mut a: alloc::vec::Vec<f64>, k: usize) -> f64 {
    let mut d = 1.0;
    for c in 0..k {
        let mut p = c;
        for r in (c + 1)..k {
            if a[r * k + c].abs() > a[p * k + c].abs() {
                p = r;
            }
        }
        let piv = a[p * k + c];
        if piv == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..k {
                a.swap(p * k + j, c * k + j);
            }
            d = -d;
        }
        d *= piv;
        for r in (c + 1)..k {
            let f = a[r * k + c] / piv;
            if f != 0.0 {
                for j in c..k {
                    a[r * k + j] -= f * a[c * k + j];
                }
            }
        }
    }
    d
}
