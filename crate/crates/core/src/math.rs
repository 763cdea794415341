//! Float math routed through `std` intrinsics or `libm`, so the crate
//! builds without `std`.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline]
    pub fn round(x: f64) -> f64 {
        x.round()
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline]
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
}

pub use imp::{abs, cos, exp, floor, ln, powf, round, sqrt};

/// `ln(sum_i exp(xs_i))`, stabilized against overflow. Entries of `-inf`
/// contribute nothing; an empty or all`-inf` slice yields `-inf`.
pub fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut buf: alloc::vec::Vec<f64> = alloc::vec::Vec::new();
    for x in xs {
        if x > max {
            max = x;
        }
        buf.push(x);
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for x in buf {
        sum += exp(x - max);
    }
    max + ln(sum)
}

/// Generalized (unnormalized) KL divergence `sum x ln(x/y) - x + y` with
/// the conventions `0 ln 0 = 0` and `x > 0, y = 0 => +inf`.
pub fn generalized_kl(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut total = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        if xi == 0.0 {
            total += yi;
        } else if yi == 0.0 {
            return f64::INFINITY;
        } else {
            total += xi * ln(xi / yi) - xi + yi;
        }
    }
    total
}
