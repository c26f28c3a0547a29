//! Pointwise tensor calculus on metric 2-jets.
//!
//! Sign conventions used throughout the crate:
//!
//! * `δ` is the formal adjoint of the exterior derivative, so on vector fields
//!   `δX = -div X` and on symmetric 2-tensors `(δT)_j = -∇^i T_ij`;
//! * `(δ)^*X = ½(∇_i X_j + ∇_j X_i)`, whose trace is `-δX`;
//! * `Δ = δd = -tr Hess` is the non-negative Laplacian, so that
//!   `(D Scal)^*V = Hess V + (ΔV) g - V Ric` has the affine functions as flat
//!   kernel and `Hess V = V b` as hyperbolic kernel.
//!
//! All tensors are stored with lower indices; indices are raised with an
//! inverse obtained by a fresh Cholesky solve.

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::expr::HyperDual;
use crate::{Arr1, Arr2, Arr3, Arr4, MAX_DIM};

pub(crate) const ZERO1: Arr1 = [0.0; MAX_DIM];
pub(crate) const ZERO2: Arr2 = [[0.0; MAX_DIM]; MAX_DIM];
pub(crate) const ZERO3: Arr3 = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
pub(crate) const ZERO4: Arr4 = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// Metric components with exact first and second coordinate derivatives.
///
/// `dg[k][i][j] = ∂_k g_ij`, `ddg[k][l][i][j] = ∂_k ∂_l g_ij`.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub n: usize,
    pub at: ChartPoint,
    pub g: Arr2,
    pub dg: Arr3,
    pub ddg: Arr4,
}

/// Value, coordinate gradient and coordinate Hessian of a function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarJet {
    pub n: usize,
    pub value: f64,
    pub gradient: Arr1,
    pub hessian: Arr2,
}

/// Components `X^i` of a vector field and `jacobian[i][j] = ∂_j X^i`.
#[derive(Clone, Debug)]
pub struct VectorJet {
    pub n: usize,
    pub at: ChartPoint,
    pub components: Arr1,
    pub jacobian: Arr2,
}

/// A symmetric 2-tensor field with first derivatives, `dt[k][i][j] = ∂_k T_ij`.
#[derive(Clone, Debug)]
pub struct SymTensorJet {
    pub n: usize,
    pub at: ChartPoint,
    pub t: Arr2,
    pub dt: Arr3,
}

/// Connection and Ricci-level curvature at a point.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub n: usize,
    /// `christoffel[k][i][j] = Γ^k_ij`.
    pub christoffel: Arr3,
    pub ricci: Arr2,
    pub scal: f64,
    /// `Ric - ½ Scal g`.
    pub einstein: Arr2,
    /// `Ric - ½ Scal g - ((n-1)(n-2)/2) g`; vanishes on hyperbolic space.
    pub modified_einstein: Arr2,
}

/// `(δ)^*X` and its trace-free part.
#[derive(Clone, Copy, Debug)]
pub struct KillingParts {
    pub full: Arr2,
    pub trace_free: Arr2,
}

impl ScalarJet {
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            value,
            gradient: ZERO1,
            hessian: ZERO2,
        }
    }

    pub fn from_dual(v: &HyperDual, n: usize) -> Self {
        let mut out = Self::constant(n, v.value);
        for i in 0..n {
            out.gradient[i] = v.grad[i];
            for j in 0..n {
                out.hessian[i][j] = v.hess[i][j];
            }
        }
        out
    }
}

impl VectorJet {
    pub fn from_duals(at: ChartPoint, comps: &[HyperDual]) -> Self {
        let n = comps.len();
        let mut components = ZERO1;
        let mut jacobian = ZERO2;
        for i in 0..n {
            components[i] = comps[i].value;
            for j in 0..n {
                jacobian[i][j] = comps[i].grad[j];
            }
        }
        Self {
            n,
            at,
            components,
            jacobian,
        }
    }
}

impl MetricJet {
    /// Builds a jet from hyper-dual metric components seeded at `at`.
    pub fn from_duals(at: ChartPoint, comps: &[[HyperDual; MAX_DIM]; MAX_DIM]) -> Self {
        let n = at.dim();
        let mut jet = Self {
            n,
            at,
            g: ZERO2,
            dg: ZERO3,
            ddg: ZERO4,
        };
        for i in 0..n {
            for j in 0..n {
                let c = &comps[i][j];
                jet.g[i][j] = c.value;
                for k in 0..n {
                    jet.dg[k][i][j] = c.grad[k];
                    for l in 0..n {
                        jet.ddg[k][l][i][j] = c.hess[k][l];
                    }
                }
            }
        }
        jet
    }

    /// Checks the symmetries and positive definiteness of the jet.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let tol = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        for i in 0..n {
            for j in 0..n {
                let sym = tol(self.g[i][j], self.g[j][i])
                    && (0..n).all(|k| tol(self.dg[k][i][j], self.dg[k][j][i]))
                    && (0..n).all(|k| {
                        (0..n).all(|l| {
                            tol(self.ddg[k][l][i][j], self.ddg[k][l][j][i])
                                && tol(self.ddg[k][l][i][j], self.ddg[l][k][i][j])
                        })
                    });
                if !sym {
                    return Err(self.degenerate("jet is not symmetric"));
                }
            }
        }
        self.inverse().map(|_| ())
    }

    fn degenerate(&self, reason: &str) -> Error {
        Error::DegenerateMetric {
            point: self.at.coords.clone(),
            reason: reason.to_string(),
        }
    }

    /// Inverse metric and `√det g`.
    pub fn inverse(&self) -> Result<(Arr2, f64)> {
        invert_spd(&self.g, self.n).ok_or_else(|| self.degenerate("metric is not positive definite"))
    }

    pub fn sqrt_det(&self) -> Result<f64> {
        Ok(self.inverse()?.1)
    }

    fn check_point(&self, other: &ChartPoint, what: &str) -> Result<()> {
        if self.at.same_as(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch(format!(
                "metric jet at {:?} ({}) but {what} at {:?} ({})",
                self.at.coords,
                self.at.kind.name(),
                other.coords,
                other.kind.name()
            )))
        }
    }

    /// `Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)`.
    fn christoffel_first_kind(&self) -> Arr3 {
        let n = self.n;
        let mut out = ZERO3;
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5 * (self.dg[i][j][l] + self.dg[j][i][l] - self.dg[l][i][j]);
                    out[l][i][j] = v;
                    out[l][j][i] = v;
                }
            }
        }
        out
    }
}

/// Cholesky inverse of a symmetric positive-definite matrix; also returns `√det`.
pub(crate) fn invert_spd(a: &Arr2, n: usize) -> Option<(Arr2, f64)> {
    let mut l = ZERO2;
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let sqrt_det: f64 = (0..n).map(|i| l[i][i]).product();
    // L^{-1}
    let mut linv = ZERO2;
    for i in 0..n {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i][k] * linv[k][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = ZERO2;
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (i..n).map(|k| linv[k][i] * linv[k][j]).sum();
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    Some((inv, sqrt_det))
}

/// Levi-Civita connection `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il - ∂_l g_ij)`.
pub fn christoffel(jet: &MetricJet) -> Result<Arr3> {
    let (ginv, _) = jet.inverse()?;
    Ok(raise_first(&ginv, &jet.christoffel_first_kind(), jet.n))
}

fn raise_first(ginv: &Arr2, lower: &Arr3, n: usize) -> Arr3 {
    let mut out = ZERO3;
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|l| ginv[k][l] * lower[l][i][j]).sum();
                out[k][i][j] = v;
                out[k][j][i] = v;
            }
        }
    }
    out
}

/// `dgamma[m][k][i][j] = ∂_m Γ^k_ij`.
fn christoffel_derivative(jet: &MetricJet, ginv: &Arr2, gamma: &Arr3) -> Arr4 {
    let n = jet.n;
    // ∂_m Γ^k_ij = g^{kl} (∂_m Γ_{l,ij} - ∂_m g_{la} Γ^a_ij)
    let mut dgamma = ZERO4;
    for m in 0..n {
        let mut inner = ZERO3; // inner[l][i][j]
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let d_first = 0.5
                        * (jet.ddg[m][i][j][l] + jet.ddg[m][j][i][l] - jet.ddg[m][l][i][j]);
                    let corr: f64 = (0..n).map(|a| jet.dg[m][l][a] * gamma[a][i][j]).sum();
                    inner[l][i][j] = d_first - corr;
                    inner[l][j][i] = d_first - corr;
                }
            }
        }
        dgamma[m] = raise_first(ginv, &inner, n);
    }

    dgamma
}

/// Christoffel symbols, Ricci tensor, scalar curvature and Einstein tensors.
pub fn curvature(jet: &MetricJet) -> Result<CurvatureBundle> {
    let n = jet.n;
    let (ginv, _) = jet.inverse()?;
    let first = jet.christoffel_first_kind();
    let gamma = raise_first(&ginv, &first, n);

    let dgamma = christoffel_derivative(jet, &ginv, &gamma);

    let mut ricci = ZERO2;
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                v += dgamma[k][k][i][j] - dgamma[i][k][k][j];
                for l in 0..n {
                    v += gamma[k][k][l] * gamma[l][i][j] - gamma[k][i][l] * gamma[l][k][j];
                }
            }
            ricci[i][j] = v;
        }
    }
    // symmetric only up to rounding
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (ricci[i][j] + ricci[j][i]);
            ricci[i][j] = v;
            ricci[j][i] = v;
        }
    }
    let scal = contract(&ginv, &ricci, n);
    let nf = n as f64;
    let shift = 0.5 * (nf - 1.0) * (nf - 2.0);
    let mut einstein = ZERO2;
    let mut modified_einstein = ZERO2;
    for i in 0..n {
        for j in 0..n {
            einstein[i][j] = ricci[i][j] - 0.5 * scal * jet.g[i][j];
            modified_einstein[i][j] = einstein[i][j] - shift * jet.g[i][j];
        }
    }
    Ok(CurvatureBundle {
        n,
        christoffel: gamma,
        ricci,
        scal,
        einstein,
        modified_einstein,
    })
}

/// `G - ½(n-1)(n-2)g` of `g = b + h`, for a background with `Ric_b = -(n-1)b`.
///
/// Computing it from the full curvature of `g` subtracts two tensors of the
/// size of `b`, which grows like `e^{2s}` in polar charts. Here it is built
/// from `h` and the difference tensor `C = Γ_g - Γ_b`:
/// `E = (n-1)h + D - ½((n-1) tr_g h + tr_g D) g` with `D = Ric_g - Ric_b`.
pub fn modified_einstein_from_deviation(b: &MetricJet, h: &MetricJet) -> Result<Arr2> {
    b.check_point(&h.at, "deviation")?;
    let n = b.n;
    let mut g = b.clone();
    for i in 0..n {
        for j in 0..n {
            g.g[i][j] += h.g[i][j];
            for m in 0..n {
                g.dg[m][i][j] += h.dg[m][i][j];
            }
        }
    }
    let (ginv, _) = g.inverse()?;
    let (binv, _) = b.inverse()?;
    let gb = raise_first(&binv, &b.christoffel_first_kind(), n);
    let dgb = christoffel_derivative(b, &binv, &gb);

    // C^k_ij = g^{kl} A_lij, A_lij = ½(∂_i h_jl + ∂_j h_il - ∂_l h_ij) - h_lp Γb^p_ij
    let mut a = ZERO3;
    let mut da = ZERO4; // da[m][l][i][j]
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.5 * (h.dg[i][j][l] + h.dg[j][i][l] - h.dg[l][i][j]);
                for p in 0..n {
                    v -= h.g[l][p] * gb[p][i][j];
                }
                a[l][i][j] = v;
                for m in 0..n {
                    let mut d = 0.5 * (h.ddg[m][i][j][l] + h.ddg[m][j][i][l] - h.ddg[m][l][i][j]);
                    for p in 0..n {
                        d -= h.dg[m][l][p] * gb[p][i][j] + h.g[l][p] * dgb[m][p][i][j];
                    }
                    da[m][l][i][j] = d;
                }
            }
        }
    }
    let c = raise_first(&ginv, &a, n);
    let mut dc = ZERO4; // dc[m][k][i][j] = ∂_m C^k_ij
    for m in 0..n {
        // ∂_m g^{kl} = -g^{ka} ∂_m g_ab g^{bl}
        let mut dginv = ZERO2;
        for k in 0..n {
            for l in 0..n {
                let mut v = 0.0;
                for x in 0..n {
                    for y in 0..n {
                        v -= ginv[k][x] * g.dg[m][x][y] * ginv[y][l];
                    }
                }
                dginv[k][l] = v;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    dc[m][k][i][j] = (0..n).map(|l| dginv[k][l] * a[l][i][j] + ginv[k][l] * da[m][l][i][j]).sum();
                }
            }
        }
    }
    let mut d = ZERO2;
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                v += dc[k][k][i][j] - dc[j][k][i][k];
                for l in 0..n {
                    v += gb[k][k][l] * c[l][i][j] + c[k][k][l] * gb[l][i][j] + c[k][k][l] * c[l][i][j];
                    v -= gb[k][j][l] * c[l][i][k] + c[k][j][l] * gb[l][i][k] + c[k][j][l] * c[l][i][k];
                }
            }
            d[i][j] = v;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (d[i][j] + d[j][i]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let nf = n as f64;
    let trace = 0.5 * ((nf - 1.0) * contract(&ginv, &h.g, n) + contract(&ginv, &d, n));
    let mut e = ZERO2;
    for i in 0..n {
        for j in 0..n {
            e[i][j] = (nf - 1.0) * h.g[i][j] + d[i][j] - trace * g.g[i][j];
        }
    }
    Ok(e)
}

/// `g^{ij} T_ij`.
pub fn contract(ginv: &Arr2, t: &Arr2, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ginv[i][j] * t[i][j];
        }
    }
    s
}

/// Trace of a symmetric 2-tensor with respect to the jet's metric.
pub fn trace(jet: &MetricJet, t: &Arr2) -> Result<f64> {
    let (ginv, _) = jet.inverse()?;
    Ok(contract(&ginv, t, jet.n))
}

/// Pointwise norm `|T|_g` of a symmetric 2-tensor.
pub fn tensor_norm(jet: &MetricJet, t: &Arr2) -> Result<f64> {
    let n = jet.n;
    let (ginv, _) = jet.inverse()?;
    // raise both indices: U = g^{-1} T g^{-1}
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut u = 0.0;
            for a in 0..n {
                for b in 0..n {
                    u += ginv[i][a] * t[a][b] * ginv[b][j];
                }
            }
            s += u * t[i][j];
        }
    }
    Ok(s.max(0.0).sqrt())
}

/// `δ^g X = -(∂_i X^i + Γ^i_ik X^k)`.
pub fn divergence_vector(jet: &MetricJet, x: &VectorJet) -> Result<f64> {
    jet.check_point(&x.at, "vector field")?;
    let n = jet.n;
    let (ginv, _) = jet.inverse()?;
    let mut div = 0.0;
    for i in 0..n {
        div += x.jacobian[i][i];
    }
    for k in 0..n {
        // Γ^i_ik = ½ g^{ij} ∂_k g_ij
        let trace_k = 0.5 * contract(&ginv, &jet.dg[k], n);
        div += trace_k * x.components[k];
    }
    Ok(-div)
}

/// `(δ^g T)_j = -g^{ik} ∇_k T_ij`.
pub fn divergence_symmetric2(jet: &MetricJet, t: &SymTensorJet) -> Result<Arr1> {
    jet.check_point(&t.at, "tensor field")?;
    let n = jet.n;
    let (ginv, _) = jet.inverse()?;
    let gamma = raise_first(&ginv, &jet.christoffel_first_kind(), n);
    let mut out = ZERO1;
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                let mut cov = t.dt[k][i][j];
                for l in 0..n {
                    cov -= gamma[l][k][i] * t.t[l][j] + gamma[l][k][j] * t.t[i][l];
                }
                s += ginv[i][k] * cov;
            }
        }
        out[j] = -s;
    }
    Ok(out)
}

/// `(δ^g)^*X = ½(∇_i X_j + ∇_j X_i)` and its trace-free part
/// `(δ^g)^*X + (1/n)(δ^g X) g`.
pub fn killing_operator(jet: &MetricJet, x: &VectorJet) -> Result<KillingParts> {
    jet.check_point(&x.at, "vector field")?;
    let n = jet.n;
    let gamma = christoffel(jet)?;
    // ∇_i X^l
    let mut nabla = ZERO2;
    for i in 0..n {
        for l in 0..n {
            let mut v = x.jacobian[l][i];
            for k in 0..n {
                v += gamma[l][i][k] * x.components[k];
            }
            nabla[i][l] = v;
        }
    }
    // lower: ∇_i X_j = g_jl ∇_i X^l
    let mut lowered = ZERO2;
    for i in 0..n {
        for j in 0..n {
            lowered[i][j] = (0..n).map(|l| jet.g[j][l] * nabla[i][l]).sum();
        }
    }
    let mut full = ZERO2;
    for i in 0..n {
        for j in 0..n {
            full[i][j] = 0.5 * (lowered[i][j] + lowered[j][i]);
        }
    }
    let div = divergence_vector(jet, x)?;
    let mut trace_free = full;
    for i in 0..n {
        for j in 0..n {
            trace_free[i][j] += div / n as f64 * jet.g[i][j];
        }
    }
    Ok(KillingParts { full, trace_free })
}

/// `Hess V_ij = ∂_i∂_j V - Γ^k_ij ∂_k V`.
pub fn hessian(jet: &MetricJet, v: &ScalarJet) -> Result<Arr2> {
    let n = jet.n;
    let gamma = christoffel(jet)?;
    let mut out = ZERO2;
    for i in 0..n {
        for j in 0..n {
            let mut h = v.hessian[i][j];
            for k in 0..n {
                h -= gamma[k][i][j] * v.gradient[k];
            }
            out[i][j] = h;
        }
    }
    Ok(out)
}

/// Non-negative Laplacian `ΔV = -tr_g Hess V`.
pub fn laplacian(jet: &MetricJet, v: &ScalarJet) -> Result<f64> {
    let h = hessian(jet, v)?;
    Ok(-trace(jet, &h)?)
}

/// `(D Scal)^*_g V = Hess V + (ΔV) g - V Ric`.
pub fn dscal_adjoint(jet: &MetricJet, v: &ScalarJet, curvature: &CurvatureBundle) -> Result<Arr2> {
    let n = jet.n;
    let hess = hessian(jet, v)?;
    let (ginv, _) = jet.inverse()?;
    let lap = -contract(&ginv, &hess, n);
    let mut out = ZERO2;
    for i in 0..n {
        for j in 0..n {
            out[i][j] = hess[i][j] + lap * jet.g[i][j] - v.value * curvature.ricci[i][j];
        }
    }
    Ok(out)
}

/// Raises the index of a covector: `g^{ij} ξ_j`.
pub fn raise(jet: &MetricJet, covector: &Arr1) -> Result<Arr1> {
    let n = jet.n;
    let (ginv, _) = jet.inverse()?;
    let mut out = ZERO1;
    for i in 0..n {
        out[i] = (0..n).map(|j| ginv[i][j] * covector[j]).sum();
    }
    Ok(out)
}

/// `T(X, Y)` for a covariant 2-tensor.
pub fn pair(t: &Arr2, x: &Arr1, y: &Arr1, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += t[i][j] * x[i] * y[j];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartKind;
    use crate::expr::{seed, Scalar};

    fn jet_from<F>(at: ChartPoint, f: F) -> MetricJet
    where
        F: Fn(&[HyperDual]) -> [[HyperDual; MAX_DIM]; MAX_DIM],
    {
        let x = seed(&at.coords);
        MetricJet::from_duals(at, &f(&x))
    }

    fn euclid(at: ChartPoint) -> MetricJet {
        let n = at.dim();
        jet_from(at, |_| {
            let mut g = [[HyperDual::constant(n, 0.0); MAX_DIM]; MAX_DIM];
            for (i, row) in g.iter_mut().enumerate().take(n) {
                row[i] = HyperDual::constant(n, 1.0);
            }
            g
        })
    }

    fn hyperbolic3(at: ChartPoint) -> MetricJet {
        jet_from(at, |x| {
            let z = HyperDual::constant(3, 0.0);
            let mut g = [[z; MAX_DIM]; MAX_DIM];
            let s = x[0].sinh();
            g[0][0] = HyperDual::constant(3, 1.0);
            g[1][1] = s * s;
            g[2][2] = s * s * x[1].sin() * x[1].sin();
            g
        })
    }

    #[test]
    fn euclidean_is_flat() {
        let jet = euclid(ChartPoint::cartesian(vec![1.0, 2.0, 3.0, 4.0]));
        let c = curvature(&jet).unwrap();
        assert!(c.christoffel.iter().flatten().flatten().all(|v| *v == 0.0));
        assert_eq!(c.scal, 0.0);
    }

    #[test]
    fn hyperbolic_polar_christoffel_and_curvature() {
        let r = 1.3;
        let jet = hyperbolic3(ChartPoint::polar(ChartKind::PolarGeodesic, r, &[0.8, 0.2]));
        let c = curvature(&jet).unwrap();
        assert!((c.christoffel[0][1][1] + r.sinh() * r.cosh()).abs() < 1e-13);
        assert!((c.scal + 6.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.ricci[i][j] + 2.0 * jet.g[i][j]).abs() < 1e-12);
                assert!(c.modified_einstein[i][j].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_metric_is_rejected() {
        let at = ChartPoint::cartesian(vec![1.0, 0.0, 0.0]);
        let jet = jet_from(at, |_| [[HyperDual::constant(3, 1.0); MAX_DIM]; MAX_DIM]);
        assert!(matches!(curvature(&jet), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn flat_divergences_of_conformal_fields() {
        let p = vec![0.7, -1.1, 2.0];
        let at = ChartPoint::cartesian(p.clone());
        let jet = euclid(at.clone());
        let x = seed(&p);
        let dil = VectorJet::from_duals(at.clone(), &x);
        assert!((divergence_vector(&jet, &dil).unwrap() + 3.0).abs() < 1e-14);
        let kp = killing_operator(&jet, &dil).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((kp.full[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                assert!(kp.trace_free[i][j].abs() < 1e-14);
            }
        }
        // X = (x1², 0, 0): ∇_1 X_1 = 2 x1, trace-free part diag(2x1(1-1/3), -2x1/3, -2x1/3)
        let z = HyperDual::constant(3, 0.0);
        let nk = VectorJet::from_duals(at.clone(), &[x[0] * x[0], z, z]);
        let kp = killing_operator(&jet, &nk).unwrap();
        let a = 2.0 * p[0];
        assert!((kp.trace_free[0][0] - a * 2.0 / 3.0).abs() < 1e-14);
        assert!((kp.trace_free[1][1] + a / 3.0).abs() < 1e-14);
        assert!((kp.trace_free[2][2] + a / 3.0).abs() < 1e-14);
        assert!(kp.trace_free[0][1].abs() < 1e-14);
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let jet = euclid(ChartPoint::cartesian(vec![1.0, 2.0, 3.0]));
        let other = ChartPoint::cartesian(vec![1.0, 2.0, 3.5]);
        let x = seed(&other.coords);
        let v = VectorJet::from_duals(other, &x);
        assert!(matches!(divergence_vector(&jet, &v), Err(Error::ChartMismatch(_))));
    }

    #[test]
    fn hessian_and_laplacian_conventions() {
        let jet = euclid(ChartPoint::cartesian(vec![0.5, 1.5, -2.0]));
        let x = seed(&[0.5, 1.5, -2.0]);
        let half_r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).scale(0.5);
        let v = ScalarJet::from_dual(&half_r2, 3);
        let h = hessian(&jet, &v).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(laplacian(&jet, &v).unwrap(), -3.0);
        let affine = ScalarJet::from_dual(&x[1], 3);
        let c = curvature(&jet).unwrap();
        let d = dscal_adjoint(&jet, &affine, &c).unwrap();
        assert!(d.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn hyperbolic_kernel_function() {
        let r = 0.9;
        let at = ChartPoint::polar(ChartKind::PolarGeodesic, r, &[1.1, 0.3]);
        let jet = hyperbolic3(at);
        let x = seed(&[r, 1.1, 0.3]);
        let v = ScalarJet::from_dual(&x[0].cosh(), 3);
        let h = hessian(&jet, &v).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[i][j] - r.cosh() * jet.g[i][j]).abs() < 1e-13);
            }
        }
        let c = curvature(&jet).unwrap();
        let d = dscal_adjoint(&jet, &v, &c).unwrap();
        assert!(tensor_norm(&jet, &d).unwrap() < 1e-12);
    }

    #[test]
    fn symmetric_divergence_flat_conformal() {
        // T = (1 + f) δ with f = x1 x2² ⇒ (δT)_j = -∂_j f
        let p = [0.4, 1.2, -0.6];
        let at = ChartPoint::cartesian(p.to_vec());
        let jet = euclid(at.clone());
        let x = seed(&p);
        let f = x[0] * x[1] * x[1];
        let mut t = SymTensorJet {
            n: 3,
            at,
            t: ZERO2,
            dt: ZERO3,
        };
        for i in 0..3 {
            t.t[i][i] = 1.0 + f.value;
            for k in 0..3 {
                t.dt[k][i][i] = f.grad[k];
            }
        }
        let d = divergence_symmetric2(&jet, &t).unwrap();
        for j in 0..3 {
            assert!((d[j] + f.grad[j]).abs() < 1e-14);
        }
    }
}
