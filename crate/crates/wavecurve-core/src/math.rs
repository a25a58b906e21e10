//! Float math that works both with `std` and with `libm` under `no_std`.
//!
//! Under `std` the inherent `f64` methods are used directly; importing the
//! trait is a no-op there because inherent methods win method resolution.

// Which methods fall back to the shim depends on what `core` already
// provides inherently, and that set grows across toolchains.
#[allow(dead_code)]
#[cfg(not(feature = "std"))]
pub(crate) trait F64Math {
    fn abs(self) -> f64;
    fn sqrt(self) -> f64;
    fn ln(self) -> f64;
    fn log10(self) -> f64;
    fn exp(self) -> f64;
    fn powi(self, n: i32) -> f64;
    fn powf(self, p: f64) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn round(self) -> f64;
    fn sin(self) -> f64;
    fn cos(self) -> f64;
    fn hypot(self, other: f64) -> f64;
}

#[cfg(not(feature = "std"))]
impl F64Math for f64 {
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    fn ln(self) -> f64 {
        libm::log(self)
    }
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    fn powi(self, n: i32) -> f64 {
        libm::pow(self, n as f64)
    }
    fn powf(self, p: f64) -> f64 {
        libm::pow(self, p)
    }
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    fn round(self) -> f64 {
        libm::round(self)
    }
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
}
