//! Coordinate charts and the hyperspherical parametrization of the unit sphere.
//!
//! Polar charts use coordinates `(r, θ1, …, θ_{n-2}, φ)` with the embedding
//!
//! ```text
//! x1     = cos θ1
//! x2     = sin θ1 cos θ2
//! …
//! x_{n-1} = sin θ1 ⋯ sin θ_{n-2} cos φ
//! x_n     = sin θ1 ⋯ sin θ_{n-2} sin φ
//! ```
//!
//! so that the round metric is `dθ1² + sin²θ1 dθ2² + … + (∏ sin²θ_k) dφ²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Scalar;
use crate::{Arr1, MAX_DIM};

/// Largest dimension supported by the polar charts.
pub const MAX_POLAR_DIM: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// Cartesian coordinates `x1..xn` on the complement of a ball in ℝⁿ.
    Cartesian,
    /// `(r, angles)` with `r` the geodesic distance of the hyperbolic background.
    PolarGeodesic,
    /// `(ρ, angles)` with `ρ = sinh r` the area radius of the hyperbolic background.
    PolarArea,
}

impl ChartKind {
    pub fn is_polar(self) -> bool {
        !matches!(self, ChartKind::Cartesian)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartKind::Cartesian => "cartesian",
            ChartKind::PolarGeodesic => "polar_geodesic",
            ChartKind::PolarArea => "polar_area",
        }
    }
}

/// Validated ambient dimension, `3 ≤ n ≤ MAX_DIM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if (3..=MAX_DIM).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::UnsupportedDimension {
                n,
                reason: format!("dimension must lie in 3..={MAX_DIM}"),
            })
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Checks that a chart of the given kind can be built in this dimension.
    pub fn check_chart(self, kind: ChartKind) -> Result<()> {
        if kind.is_polar() && self.0 > MAX_POLAR_DIM {
            return Err(Error::UnsupportedDimension {
                n: self.0,
                reason: format!("polar charts are parametrized for n ≤ {MAX_POLAR_DIM}"),
            });
        }
        Ok(())
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// A point in a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub kind: ChartKind,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(kind: ChartKind, coords: Vec<f64>) -> Result<Self> {
        let p = Self { kind, coords };
        p.validate()?;
        Ok(p)
    }

    pub fn cartesian(coords: Vec<f64>) -> Self {
        Self {
            kind: ChartKind::Cartesian,
            coords,
        }
    }

    pub fn polar(kind: ChartKind, r: f64, angles: &[f64]) -> Self {
        let mut coords = Vec::with_capacity(angles.len() + 1);
        coords.push(r);
        coords.extend_from_slice(angles);
        Self { kind, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate radius: `|x|` for cartesian charts, the first coordinate otherwise.
    pub fn radius(&self) -> f64 {
        match self.kind {
            ChartKind::Cartesian => self.coords.iter().map(|x| x * x).sum::<f64>().sqrt(),
            _ => self.coords[0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coords.len();
        Dimension::new(n)?.check_chart(self.kind)?;
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(self.domain("non-finite coordinate"));
        }
        if self.kind.is_polar() {
            if self.coords[0] <= 0.0 {
                return Err(self.domain("radial coordinate must be positive"));
            }
            for &theta in &self.coords[1..n - 1] {
                if theta <= 0.0 || theta >= std::f64::consts::PI {
                    return Err(self.domain("polar angles must lie strictly inside (0, π)"));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self, reason: &str) -> Error {
        Error::Domain {
            point: self.coords.clone(),
            reason: reason.to_string(),
        }
    }

    pub fn same_as(&self, other: &ChartPoint) -> bool {
        self.kind == other.kind && self.coords == other.coords
    }
}

/// Unit-sphere embedding `(x1, …, xn)` of the angles `(θ1, …, θ_{n-2}, φ)`.
pub fn sphere_embedding<T: Scalar>(angles: &[T]) -> Vec<T> {
    let m = angles.len();
    let n = m + 1;
    let mut out = Vec::with_capacity(n);
    let mut prod = T::one();
    for (k, &a) in angles.iter().enumerate() {
        if k + 1 < m {
            out.push(prod * a.cos());
            prod = prod * a.sin();
        } else {
            out.push(prod * a.cos());
            out.push(prod * a.sin());
        }
    }
    out
}

/// Diagonal of the round metric in the angle coordinates.
pub fn round_metric_diagonal<T: Scalar>(angles: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prod = T::one();
    for &a in angles {
        out.push(prod);
        let s = a.sin();
        prod = prod * s * s;
    }
    out
}

/// Density `√det` of the round metric: `∏_k sin^{n-1-k} θ_k`.
pub fn angular_density(angles: &[f64]) -> f64 {
    let m = angles.len();
    angles[..m - 1]
        .iter()
        .enumerate()
        .map(|(k, a)| a.sin().powi((m - 1 - k) as i32))
        .product()
}

/// Derivatives `∂x^α/∂(angle_a)` of the embedding, indexed `[alpha][a]`.
pub fn sphere_embedding_jacobian<T: Scalar>(angles: &[T]) -> Vec<Vec<T>> {
    let m = angles.len();
    let n = m + 1;
    let sines: Vec<T> = angles.iter().map(|a| a.sin()).collect();
    let cosines: Vec<T> = angles.iter().map(|a| a.cos()).collect();
    // prefix product of sines, skipping one index
    let prod_except = |upto: usize, skip: usize| {
        let mut p = T::one();
        for (k, &s) in sines.iter().enumerate().take(upto) {
            if k != skip {
                p = p * s;
            }
        }
        p
    };
    let mut jac = vec![vec![T::zero(); m]; n];
    for (alpha, row) in jac.iter_mut().enumerate() {
        // x^alpha = (∏_{k<j} sin) · trig(angle_j), with j = min(alpha, m-1)
        let j = alpha.min(m - 1);
        let last = alpha == n - 1;
        let trig = if last { sines[j] } else { cosines[j] };
        let dtrig = if last { cosines[j] } else { -sines[j] };
        for (a, entry) in row.iter_mut().enumerate() {
            if a < j {
                *entry = prod_except(j, a) * cosines[a] * trig;
            } else if a == j {
                *entry = prod_except(j, usize::MAX) * dtrig;
            }
        }
    }
    jac
}

/// Conversion of a polar point to its cartesian image (used for diagnostics).
pub fn polar_to_cartesian(r: f64, angles: &[f64]) -> Arr1 {
    let mut out = [0.0; MAX_DIM];
    for (o, x) in out.iter_mut().zip(sphere_embedding(angles)) {
        *o = r * x;
    }
    out
}

/// Angles of a unit vector in the hyperspherical parametrization.
pub fn angles_of_unit_vector(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut angles = Vec::with_capacity(n - 1);
    for k in 0..n - 2 {
        let tail: f64 = x[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        angles.push(tail.atan2(x[k]));
    }
    angles.push(x[n - 1].atan2(x[n - 2]));
    angles
}
