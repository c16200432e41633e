//! Generalized Sylvester equations `A P + sum_t F_t P B_t = C`, solved through
//! the vectorised system `(I (x) A + sum_t B_t^T (x) F_t) vec(P) = vec(C)`.

use crate::error::{Error, Result};
use crate::linalg::{eye, frob, kron, solve, unvec, vec_of, CMat};

#[derive(Debug, Clone)]
pub struct SylvesterSystem {
    pub a: CMat,
    /// `(F_t, B_t)` pairs.
    pub terms: Vec<(CMat, CMat)>,
    pub c: CMat,
}

impl SylvesterSystem {
    pub fn new(a: CMat, terms: Vec<(CMat, CMat)>, c: CMat) -> Result<Self> {
        let (n, d) = c.shape();
        if a.shape() != (n, n) {
            return Err(Error::Shape(format!("A is {:?}, C is {:?}", a.shape(), c.shape())));
        }
        for (f, b) in &terms {
            if f.shape() != (n, n) || b.shape() != (d, d) {
                return Err(Error::Shape(format!(
                    "term with F {:?} and B {:?} does not fit C {:?}",
                    f.shape(),
                    b.shape(),
                    c.shape()
                )));
            }
        }
        Ok(SylvesterSystem { a, terms, c })
    }

    /// The `nd x nd` Kronecker operator.
    pub fn kron_matrix(&self) -> CMat {
        let d = self.c.ncols();
        let mut k = kron(&eye(d), &self.a);
        for (f, b) in &self.terms {
            k += kron(&b.transpose(), f);
        }
        k
    }

    pub fn solve(&self) -> Result<CMat> {
        let k = self.kron_matrix();
        let v = solve(&k, &vec_of(&self.c)).map_err(|_| {
            Error::Numerical(format!(
                "singular Kronecker system of size {} (max |entry| {:.3e})",
                k.nrows(),
                k.iter().map(|z| z.norm()).fold(0.0, f64::max)
            ))
        })?;
        Ok(unvec(&v, self.c.nrows(), self.c.ncols()))
    }

    /// `A P + sum F P B`.
    pub fn apply(&self, p: &CMat) -> CMat {
        let mut out = &self.a * p;
        for (f, b) in &self.terms {
            out += f * p * b;
        }
        out
    }

    /// `||A P + sum F P B - C||_F / ||C||_F` (absolute when `C = 0`).
    pub fn relative_residual(&self, p: &CMat) -> f64 {
        let r = frob(&(self.apply(p) - &self.c));
        let n = frob(&self.c);
        if n > 0.0 {
            r / n
        } else {
            r
        }
    }
}
