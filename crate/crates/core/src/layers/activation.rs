use std::f64::consts::{PI, SQRT_2};

/// Pointwise nonlinearity applied to `v = b - (I * K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    /// Unnormalised Gaussian `exp(-v^2 / 2 sigma^2)`; the soft histogram bin.
    GaussBell,
    /// `1 / (1 + exp(-v / sigma))`.
    LogisticSigmoid,
    /// Integral of the bell from minus infinity: `sigma sqrt(2 pi) Phi(v / sigma)`.
    IntegratedBell,
    /// `max(0, v)`; has no width parameter.
    Relu,
}

/// Value of an activation with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub value: f64,
    pub d_v: f64,
    pub d_sigma: f64,
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Beyond this exponent the bell is flushed to 0 rather than computed as a
/// subnormal, which is both meaningless and slow.
const BELL_CUTOFF: f64 = 700.0;

#[inline]
fn bell(v: f64, sigma: f64) -> f64 {
    let a = v * v / (2.0 * sigma * sigma);
    if a > BELL_CUTOFF {
        0.0
    } else {
        (-a).exp()
    }
}

#[inline]
fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else if t < -BELL_CUTOFF {
        0.0
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn has_width(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::GaussBell => "gauss-bell",
            Activation::LogisticSigmoid => "sigmoid",
            Activation::IntegratedBell => "integrated-bell",
            Activation::Relu => "relu",
        }
    }

    #[inline]
    pub fn eval(self, v: f64, sigma: f64) -> f64 {
        match self {
            Activation::GaussBell => bell(v, sigma),
            Activation::LogisticSigmoid => logistic(v / sigma),
            Activation::IntegratedBell => sigma * (2.0 * PI).sqrt() * normal_cdf(v / sigma),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivatives given the already-computed `value = self.eval(v, sigma)`.
    #[inline]
    pub fn derivatives_from(self, v: f64, sigma: f64, value: f64) -> (f64, f64) {
        match self {
            Activation::GaussBell => {
                let s2 = sigma * sigma;
                (-v / s2 * value, v * v / (s2 * sigma) * value)
            }
            Activation::LogisticSigmoid => {
                let ds = value * (1.0 - value);
                (ds / sigma, -v / (sigma * sigma) * ds)
            }
            Activation::IntegratedBell => {
                // g' = f, and d/dsigma [sigma sqrt(2pi) Phi(v/sigma)] = g/sigma - (v/sigma) f
                let f = bell(v, sigma);
                (f, value / sigma - v / sigma * f)
            }
            // subgradient at 0 is 0
            Activation::Relu => (if v > 0.0 { 1.0 } else { 0.0 }, 0.0),
        }
    }

    pub fn respond(self, v: f64, sigma: f64) -> Response {
        let value = self.eval(v, sigma);
        let (d_v, d_sigma) = self.derivatives_from(v, sigma, value);
        Response { value, d_v, d_sigma }
    }
}
