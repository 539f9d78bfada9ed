//! Kato-class estimates `sup_x int_0^t (p_s * W)(x) ds` on a grid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bessel::{bessel_k, BesselOrder};
#[cfg(test)]
use super::kernel::kernel_pt;
use crate::error::{csv_string, Error, Result};
use crate::grid::Grid;
use crate::quadrature::GaussLegendre;

/// Gauss–Legendre order of the time integral.
pub const KATO_TIME_ORDER: usize = 16;

/// Gauss–Legendre order (per axis) of the cell integrals of the kernel.
pub const KATO_CELL_ORDER: usize = 8;

/// Cell-integrated kernel `int_{cell(r)} p_s(z) dz` for every displacement
/// index `r`, stored with offset `n - 1` per axis.
struct CellWeights {
    side: usize,
    values: Vec<f64>,
}

impl CellWeights {
    fn new(s: f64, grid: &Grid, rule: &GaussLegendre) -> Result<Self> {
        let n = grid.points();
        let h = grid.spacing();
        let d = grid.dim();
        let side = 2 * n - 1;
        let count = side.pow(d as u32);
        let values: Result<Vec<f64>> = (0..count)
            .into_par_iter()
            .map(|idx| {
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                let mut rest = idx;
                for a in (0..d).rev() {
                    let r = (rest % side) as f64 - (n - 1) as f64;
                    rest /= side;
                    lo[a] = (r - 0.5) * h;
                    hi[a] = (r + 0.5) * h;
                }
                cell_integral(s, &lo[..d], &hi[..d], rule)
            })
            .collect();
        Ok(Self { side, values: values? })
    }

    fn get(&self, r: [usize; 2], d: usize) -> f64 {
        if d == 1 {
            self.values[r[0]]
        } else {
            self.values[r[0] * self.side + r[1]]
        }
    }
}

/// `int_cell p_s`, with the leading small-distance singularity integrated in
/// closed form and the bounded remainder by Gauss–Legendre.
fn cell_integral(s: f64, lo: &[f64], hi: &[f64], rule: &GaussLegendre) -> Result<f64> {
    match lo.len() {
        1 => {
            // p_s = s/(pi rho^2) + (s/(pi rho^2)) (rho K_1(rho) - 1)
            let lorentz = ((hi[0] / s).atan() - (lo[0] / s).atan()) / PI;
            let mut rem = 0.0;
            for (z, w) in rule.on_interval(lo[0], hi[0]) {
                let rho2 = z * z + s * s;
                let rho = rho2.sqrt();
                let k1 = bessel_k(BesselOrder::integer(1), rho)?;
                rem += w * s / (PI * rho2) * (rho * k1 - 1.0);
            }
            Ok(lorentz + rem)
        }
        _ => {
            // p_s = s/(2 pi rho^3) + (s/(2 pi rho^3)) (e^{-rho}(1 + rho) - 1)
            let f = |x: f64, y: f64| (x * y / (s * (x * x + y * y + s * s).sqrt())).atan() / (2.0 * PI);
            let poisson = f(hi[0], hi[1]) - f(lo[0], hi[1]) - f(hi[0], lo[1]) + f(lo[0], lo[1]);
            // Split at the origin so the 1/rho remainder sits on a corner.
            let mut rem = 0.0;
            for (a0, b0) in split(lo[0], hi[0]) {
                for (a1, b1) in split(lo[1], hi[1]) {
                    for (x, wx) in rule.on_interval(a0, b0) {
                        for (y, wy) in rule.on_interval(a1, b1) {
                            let rho = (x * x + y * y + s * s).sqrt();
                            let g = (-rho).exp_m1() * (1.0 + rho) + rho;
                            rem += wx * wy * s / (2.0 * PI * rho.powi(3)) * g;
                        }
                    }
                }
            }
            Ok(poisson + rem)
        }
    }
}

fn split(a: f64, b: f64) -> Vec<(f64, f64)> {
    if a < 0.0 && b > 0.0 {
        vec![(a, 0.0), (0.0, b)]
    } else {
        vec![(a, b)]
    }
}

fn check_weights(w: &[f64], grid: &Grid) -> Result<()> {
    if w.len() != grid.size() {
        return Err(Error::DimensionMismatch {
            expected: grid.size(),
            found: w.len(),
        });
    }
    if let Some((j, v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!(
            "potential must be finite and nonnegative at every node, found {v} at node {j}"
        )));
    }
    Ok(())
}

/// `sup_j int_0^t sum_k w_s(x_j - x_k) W_k ds` where `w_s` is `p_s`
/// integrated over a grid cell. `w` holds node values or cell averages.
pub fn kato_estimate(w: &[f64], t: f64, grid: &Grid) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Kato time must be positive, got {t}")));
    }
    check_weights(w, grid)?;
    if w.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let d = grid.dim();
    let n = grid.points();
    let size = grid.size();
    let cell_rule = GaussLegendre::new(KATO_CELL_ORDER);
    let time_rule: Vec<(f64, f64)> = GaussLegendre::new(KATO_TIME_ORDER).on_interval(0.0, t).collect();
    let support: Vec<usize> = (0..size).filter(|&k| w[k] != 0.0).collect();
    let mut acc = vec![0.0; size];
    for &(s, ws) in &time_rule {
        let table = CellWeights::new(s, grid, &cell_rule)?;
        acc.par_iter_mut().enumerate().for_each(|(j, slot)| {
            let jj = grid.unflatten(j);
            let mut sum = 0.0;
            for &k in &support {
                let kk = grid.unflatten(k);
                let mut r = [0usize; 2];
                for a in 0..d {
                    r[a] = jj[a] + n - 1 - kk[a];
                }
                sum += table.get(r, d) * w[k];
            }
            *slot += ws * sum;
        });
    }
    Ok(acc.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoScan {
    /// `(t, sup value)` with `t` decreasing.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log value` against `log t`.
    pub log_slope: f64,
    /// Values nondecreasing in `t`.
    pub monotone: bool,
}

impl KatoScan {
    /// Columns `t, sup_value`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "sup_value"])?;
        for (t, v) in &self.rows {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        csv_string(w)
    }
}

/// [`kato_estimate`] at `t0 / 2^k` for `k = 0..levels`.
pub fn kato_limit_scan(w: &[f64], t0: f64, levels: usize, grid: &Grid) -> Result<KatoScan> {
    if levels < 2 {
        return Err(Error::Parameter("a Kato scan needs at least 2 levels".into()));
    }
    let rows: Vec<(f64, f64)> = (0..levels)
        .map(|k| {
            let t = t0 / 2f64.powi(k as i32);
            kato_estimate(w, t, grid).map(|v| (t, v))
        })
        .collect::<Result<_>>()?;
    let monotone = rows.windows(2).all(|p| p[1].1 <= p[0].1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let log_slope = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(KatoScan {
        rows,
        log_slope,
        monotone,
    })
}

/// `int_{R^d} p_s` over the grid box computed from the pointwise kernel, for
/// comparison with the cell-integrated weights.
#[cfg(test)]
fn pointwise_mass(s: f64, grid: &Grid) -> f64 {
    let d = grid.dim();
    (0..grid.size())
        .map(|j| kernel_pt(s, &grid.position(j)[..d]).unwrap())
        .sum::<f64>()
        * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_gives_zero() {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        assert_eq!(kato_estimate(&vec![0.0; 64], 1.0, &grid).unwrap(), 0.0);
    }

    #[test]
    fn unit_potential_gives_the_normalization_integral() {
        let grid = Grid::new(1, 30.0, 256).unwrap();
        for t in [1.0, 0.25] {
            let v = kato_estimate(&vec![1.0; 256], t, &grid).unwrap();
            assert!((v - (1.0 - (-t).exp())).abs() < 1e-6, "t = {t}: {v}");
        }
    }

    #[test]
    fn cell_weights_sum_to_the_kernel_mass() {
        let rule = GaussLegendre::new(KATO_CELL_ORDER);
        for s in [1e-3, 0.1, 1.0] {
            let grid = Grid::new(2, 6.0, 24).unwrap();
            let table = CellWeights::new(s, &grid, &rule).unwrap();
            let total: f64 = table.values.iter().sum();
            // The displacement cells tile [-2L + h/2, 2L - h/2]^2, which
            // holds all but an e^{-11} sliver of the mass e^{-s}.
            assert!((total - (-s).exp()).abs() < 1e-3, "s = {s}: {total}");
        }
        let grid = Grid::new(1, 30.0, 512).unwrap();
        assert!((pointwise_mass(1.0, &grid) - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn bounded_bump_scan_tends_to_zero() {
        let grid = Grid::new(1, 10.0, 128).unwrap();
        let w: Vec<f64> = grid.nodes().iter().map(|x| (-x * x).exp()).collect();
        let scan = kato_limit_scan(&w, 1.0, 5, &grid).unwrap();
        assert!(scan.monotone);
        assert!(scan.rows.last().unwrap().1 < 0.1);
        assert!((scan.log_slope - 1.0).abs() < 0.3, "slope {}", scan.log_slope);
    }

    #[test]
    fn rejects_bad_input() {
        let grid = Grid::new(1, 1.0, 4).unwrap();
        assert!(kato_estimate(&[1.0, f64::NAN, 0.0, 0.0], 1.0, &grid).is_err());
        assert!(kato_estimate(&[1.0; 3], 1.0, &grid).is_err());
        assert!(kato_estimate(&[1.0; 4], 0.0, &grid).is_err());
    }
}
