//! Nearest vector with prescribed energy and bounded peak-to-average ratio.
//!
//! With the phases fixed to those of the input, the nearest point of
//! `{x : ||x||^2 = P, K |x_k|^2 / P <= gamma}` has magnitudes
//! `min(sigma, rho |a_k|)`, `sigma = sqrt(P gamma / K)`, with `rho` chosen to
//! meet the energy. Entries are clipped largest-first until the scaled
//! remainder fits under `sigma`.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec, C64};

/// Relative tolerance of the membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParFeasibleSet {
    pub p_r: f64,
    pub gamma: f64,
    pub k: usize,
}

impl ParFeasibleSet {
    pub fn new(p_r: f64, gamma: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("PAR set needs K >= 1".into()));
        }
        if !(p_r > 0.0) {
            return Err(Error::Argument(format!("column power must be positive, got {p_r}")));
        }
        let kf = k as f64;
        if !(gamma >= 1.0 - 1e-12 && gamma <= kf + 1e-12) {
            return Err(Error::Argument(format!("PAR bound {gamma} outside [1, {k}]")));
        }
        Ok(ParFeasibleSet { p_r, gamma: gamma.clamp(1.0, kf), k })
    }

    /// Peak amplitude allowed by the PAR bound.
    pub fn peak(&self) -> f64 {
        (self.p_r * self.gamma / self.k as f64).sqrt()
    }

    pub fn contains(&self, a: &CVec) -> bool {
        a.len() == self.k
            && (a.norm_squared() - self.p_r).abs() <= MEMBERSHIP_TOL * self.p_r
            && par(a, self.p_r) <= self.gamma + MEMBERSHIP_TOL
    }
}

/// `K max_k |a_k|^2 / P`.
pub fn par(a: &CVec, p_r: f64) -> f64 {
    let peak = a.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    a.len() as f64 * peak / p_r
}

/// Project `a` onto the set. An all-zero input maps to the constant-modulus
/// vector with zero phases.
pub fn par_project(a: &CVec, set: &ParFeasibleSet) -> Result<CVec> {
    let k = set.k;
    if a.len() != k {
        return Err(Error::Shape(format!("vector of length {} for a PAR set of length {k}", a.len())));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite entry in PAR projection input".into()));
    }
    let sigma = set.peak();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&x, &y| a[y].norm().total_cmp(&a[x].norm()));

    let mut out = CVec::zeros(k);
    for c in 0..=k {
        let energy = (set.p_r - c as f64 * sigma * sigma).max(0.0);
        let rest = &idx[c..];
        let s: f64 = rest.iter().map(|&n| a[n].norm_sqr()).sum();
        let fits = if rest.is_empty() {
            true
        } else if s == 0.0 {
            // every remaining entry is zero: spread the energy evenly
            (energy / rest.len() as f64).sqrt() <= sigma * (1.0 + 1e-12)
        } else {
            let rho = (energy / s).sqrt();
            rho * a[rest[0]].norm() <= sigma * (1.0 + 1e-12)
        };
        if !fits {
            continue;
        }
        for &n in &idx[..c] {
            out[n] = clip(a[n], sigma);
        }
        if !rest.is_empty() {
            if s == 0.0 {
                let m = (energy / rest.len() as f64).sqrt();
                for &n in rest {
                    out[n] = c64(m, 0.0);
                }
            } else {
                let rho = c64((energy / s).sqrt(), 0.0);
                for &n in rest {
                    out[n] = a[n] * rho;
                }
            }
        }
        return Ok(out);
    }
    Err(Error::Numerical("PAR projection found no consistent clipping set".into()))
}

fn clip(z: C64, sigma: f64) -> C64 {
    if z.norm() > 0.0 {
        z * (sigma / z.norm())
    } else {
        c64(sigma, 0.0)
    }
}

/// Column-wise projection of the code matrix onto the power and PAR sets.
pub fn project_code_matrix(a: &CMat, cfg: &SystemConfig) -> Result<CMat> {
    if a.shape() != (cfg.k, cfg.m_r) {
        return Err(Error::Shape(format!("code matrix {:?}, expected {:?}", a.shape(), (cfg.k, cfg.m_r))));
    }
    let mut out = a.clone();
    for m in 0..cfg.m_r {
        let set = ParFeasibleSet::new(cfg.p_r[m], cfg.gamma[m], cfg.k)?;
        let col: CVec = a.column(m).into_owned();
        let n = col.norm();
        let unit = if n > 0.0 { col.unscale(n) } else { col };
        out.set_column(m, &par_project(&unit, &set)?);
    }
    Ok(out)
}

/// Whether every column of `a` satisfies its power and PAR constraint.
pub fn code_matrix_feasible(a: &CMat, cfg: &SystemConfig) -> bool {
    (0..cfg.m_r).all(|m| match ParFeasibleSet::new(cfg.p_r[m], cfg.gamma[m], cfg.k) {
        Ok(set) => set.contains(&a.column(m).into_owned()),
        Err(_) => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(x.len(), x.iter().map(|&(r, i)| c64(r, i)))
    }

    #[test]
    fn feasible_constant_modulus_unchanged() {
        let set = ParFeasibleSet::new(4.0, 1.0, 4).unwrap();
        let a = v(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.6, 0.8)]);
        let p = par_project(&a, &set).unwrap();
        assert!((p - &a).norm() < 1e-15);
    }

    #[test]
    fn gamma_one_forces_constant_modulus() {
        let set = ParFeasibleSet::new(2.0, 1.0, 2).unwrap();
        let a = v(&[(3.0, 4.0), (0.0, -0.1)]);
        let p = par_project(&a, &set).unwrap();
        for n in 0..2 {
            assert!((p[n].norm() - 1.0).abs() < 1e-12);
            assert!((p[n].arg() - a[n].arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_k_is_pure_scaling() {
        let set = ParFeasibleSet::new(3.0, 3.0, 3).unwrap();
        let a = v(&[(1.0, 1.0), (0.2, 0.0), (0.0, -0.5)]);
        let p = par_project(&a, &set).unwrap();
        let s = (3.0 / a.norm_squared()).sqrt();
        assert!((p - a * c64(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_input_convention() {
        let set = ParFeasibleSet::new(8.0, 1.5, 2).unwrap();
        let p = par_project(&CVec::zeros(2), &set).unwrap();
        assert!(p.iter().all(|z| (z - c64(2.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn bad_gamma_rejected() {
        assert!(ParFeasibleSet::new(1.0, 0.5, 4).is_err());
        assert!(ParFeasibleSet::new(1.0, 4.5, 4).is_err());
    }
}
