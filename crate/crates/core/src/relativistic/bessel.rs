//! Modified Bessel functions of the third kind for integer and half-integer
//! orders.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between the power series and the integral representation.
const SERIES_CROSSOVER: f64 = 2.0;

/// Step of the trapezoidal rule on `int_0^inf e^{-z cosh t} cosh(nu t) dt`.
const TRAPEZOID_STEP: f64 = 0.1;

/// A Bessel order `nu` with `2 nu` a nonnegative integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BesselOrder {
    twice: u32,
}

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        if !(nu >= 0.0) || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(Error::Parameter(format!(
                "Bessel order must be a nonnegative integer or half-integer, got {nu}"
            )));
        }
        Ok(Self { twice: twice as u32 })
    }

    pub fn integer(n: u32) -> Self {
        Self { twice: 2 * n }
    }

    /// `k + 1/2`.
    pub fn half_integer(k: u32) -> Self {
        Self { twice: 2 * k + 1 }
    }

    /// The order `(d + 1)/2` of the relativistic kernel in dimension `d`.
    pub fn for_dimension(d: usize) -> Self {
        Self { twice: d as u32 + 1 }
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_half_integer(&self) -> bool {
        self.twice % 2 == 1
    }
}

impl fmt::Display for BesselOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half_integer() {
            write!(f, "{}/2", self.twice)
        } else {
            write!(f, "{}", self.twice / 2)
        }
    }
}

/// `K_nu(z)` for `z > 0`.
pub fn bessel_k(nu: BesselOrder, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("K_nu(z) needs finite z > 0, got {z}")));
    }
    Ok(if nu.is_half_integer() {
        half_integer(nu.twice / 2, z)
    } else {
        integer(nu.twice / 2, z)
    })
}

/// Forward recurrence `K_{nu+1} = K_{nu-1} + (2 nu / z) K_nu` from two seeds.
fn recur(mut prev: f64, mut cur: f64, nu0: f64, steps: u32, z: f64) -> f64 {
    let mut nu = nu0;
    for _ in 0..steps {
        let next = prev + 2.0 * nu / z * cur;
        prev = cur;
        cur = next;
        nu += 1.0;
    }
    cur
}

/// `K_{k + 1/2}(z)` from `K_{1/2}(z) = sqrt(pi / 2z) e^{-z}` and
/// `K_{-1/2} = K_{1/2}`.
fn half_integer(k: u32, z: f64) -> f64 {
    let k_half = (PI / (2.0 * z)).sqrt() * (-z).exp();
    recur(k_half, k_half, 0.5, k, z)
}

fn integer(n: u32, z: f64) -> f64 {
    let (k0, k1) = if z <= SERIES_CROSSOVER {
        (k0_series(z), k1_series(z))
    } else {
        (integral(0.0, z), integral(1.0, z))
    };
    match n {
        0 => k0,
        _ => recur(k0, k1, 1.0, n - 1, z),
    }
}

fn k0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut harmonic = 0.0;
    let mut tail = 0.0;
    for k in 1..40 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += harmonic * term;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -((0.5 * z).ln() + EULER_GAMMA) * i0 + tail
}

fn k1_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    // term_k = q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut i1_sum = 1.0;
    let mut psi_k1 = -EULER_GAMMA;
    let mut psi_k2 = 1.0 - EULER_GAMMA;
    let mut tail = psi_k1 + psi_k2;
    for k in 1..40 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        i1_sum += term;
        tail += (psi_k1 + psi_k2) * term;
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * z * i1_sum;
    1.0 / z + (0.5 * z).ln() * i1 - 0.25 * z * tail
}

/// `e^{-z} int_0^inf e^{-z (cosh t - 1)} cosh(nu t) dt` by the trapezoidal
/// rule, which converges geometrically for this analytic, rapidly decaying
/// integrand.
fn integral(nu: f64, z: f64) -> f64 {
    let h = TRAPEZOID_STEP;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = (-z * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    h * sum * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn half_integer_closed_forms() {
        let k_half = bessel_k(BesselOrder::half_integer(0), 1.0).unwrap();
        assert!((k_half - 0.461068).abs() < 1e-6);
        assert!((k_half - (PI / 2.0).sqrt() * (-1.0f64).exp()).abs() < 1e-15);
        let k32 = bessel_k(BesselOrder::half_integer(1), 2.0).unwrap();
        assert!((k32 - 0.179906).abs() < 1e-6);
        assert!(rel(k32, (PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5) < 1e-15);
    }

    #[test]
    fn integer_orders_match_reference_values() {
        // Independent high-precision references.
        let cases = [
            (0, 1.0, 0.421_024_438_240_708_3),
            (1, 1.0, 0.601_907_230_197_234_6),
            (0, 2.0, 0.113_893_872_749_533_44),
            (1, 2.0, 0.139_865_881_816_522_43),
            (0, 0.1, 2.427_069_024_702_017),
            (1, 5.0, 0.004_044_613_445_452_164),
            (2, 3.0, 0.061_510_458_471_742_61),
        ];
        for (n, z, expected) in cases {
            let v = bessel_k(BesselOrder::integer(n), z).unwrap();
            assert!(rel(v, expected) < 1e-10, "K_{n}({z}) = {v}, expected {expected}");
        }
    }

    #[test]
    fn series_and_integral_agree_at_the_crossover() {
        for z in [1.5, 2.0, 2.5] {
            assert!(rel(k0_series(z), integral(0.0, z)) < 1e-11);
            assert!(rel(k1_series(z), integral(1.0, z)) < 1e-11);
        }
    }

    #[test]
    fn recurrence_residual_is_small() {
        for twice in 1..8 {
            let nu = BesselOrder { twice };
            let below = BesselOrder {
                twice: twice.saturating_sub(2),
            };
            let above = BesselOrder { twice: twice + 2 };
            for k in 0..200 {
                let z = 0.1 + k as f64 * 0.0995;
                let kp = bessel_k(above, z).unwrap();
                // K_{-1/2} = K_{1/2}
                let km = if twice == 1 {
                    bessel_k(nu, z).unwrap()
                } else {
                    bessel_k(below, z).unwrap()
                };
                let kn = bessel_k(nu, z).unwrap();
                let residual = (kp - km - 2.0 * nu.value() / z * kn).abs();
                assert!(residual < 1e-12 * kp, "order {nu}, z = {z}");
            }
        }
    }

    #[test]
    fn positive_and_decreasing() {
        for twice in 0..6 {
            let nu = BesselOrder { twice };
            let mut last = f64::INFINITY;
            for k in 1..100 {
                let v = bessel_k(nu, 0.2 * k as f64).unwrap();
                assert!(v > 0.0 && v < last);
                last = v;
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(bessel_k(BesselOrder::integer(0), 0.0).is_err());
        assert!(bessel_k(BesselOrder::integer(0), -1.0).is_err());
        assert!(BesselOrder::new(0.3).is_err());
        assert!(BesselOrder::new(-0.5).is_err());
        assert_eq!(BesselOrder::new(1.5).unwrap(), BesselOrder::half_integer(1));
        assert_eq!(BesselOrder::for_dimension(2).to_string(), "3/2");
    }
}
