use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, Func, Var};
use super::dual::{seed, HyperDual, Scalar};
use crate::chart::{sphere_embedding, ChartKind, ChartPoint};
use crate::error::{Error, Result};
use crate::geometry::ScalarJet;

pub type Params = BTreeMap<String, f64>;

/// Chart variables at one point, in a generic scalar type.
pub struct Vars<T: Scalar> {
    chart: ChartKind,
    coords: Vec<T>,
    embedding: Option<Vec<T>>,
    radius: Option<T>,
}

impl<T: Scalar> Vars<T> {
    pub fn new(chart: ChartKind, coords: Vec<T>) -> Result<Self> {
        let (embedding, radius) = match chart {
            ChartKind::Cartesian => {
                let r2 = coords.iter().fold(T::zero(), |acc, &x| acc + x * x);
                let r = if r2.re() > 0.0 {
                    Some(r2.sqrt())
                } else {
                    None
                };
                (None, r)
            }
            _ => (Some(sphere_embedding(&coords[1..])), Some(coords[0])),
        };
        Ok(Self {
            chart,
            coords,
            embedding,
            radius,
        })
    }

    fn get(&self, var: Var) -> Result<T> {
        match (var, self.chart) {
            (Var::X(i), ChartKind::Cartesian) => Ok(self.coords[i]),
            (Var::X(i), _) => Ok(self.embedding.as_ref().expect("polar")[i]),
            (Var::R, ChartKind::Cartesian) => match self.radius {
                Some(r) => Ok(r),
                // |x| is not differentiable at the origin
                None if T::HAS_DERIVATIVES => Err(Error::ExprDomain {
                    node: "r".into(),
                    reason: "r = |x| is not differentiable at the origin".into(),
                }),
                None => Ok(T::zero()),
            },
            (Var::R, _) => Ok(self.coords[0]),
            (Var::Theta(k), _) => Ok(self.coords[1 + k]),
            (Var::Phi, _) => Ok(*self.coords.last().expect("non-empty")),
        }
    }
}

fn domain(node: &Expr, reason: &str) -> Error {
    Error::ExprDomain {
        node: node.to_string(),
        reason: reason.to_string(),
    }
}

/// Evaluates a constant subtree (no chart variables) in plain `f64`.
fn eval_constant(e: &Expr, params: &Params) -> Result<f64> {
    let vars = Vars::<f64> {
        chart: ChartKind::Cartesian,
        coords: vec![],
        embedding: None,
        radius: None,
    };
    eval(e, &vars, params)
}

pub fn eval<T: Scalar>(e: &Expr, vars: &Vars<T>, params: &Params) -> Result<T> {
    let out = match e {
        Expr::Num(v) => T::cst(*v),
        Expr::Param(p) => T::cst(
            *params
                .get(p)
                .ok_or_else(|| domain(e, &format!("parameter `{p}` has no value")))?,
        ),
        Expr::Var(v) => vars.get(*v)?,
        Expr::Unary(func, a) => {
            let x = eval(a, vars, params)?;
            let v = x.re();
            match func {
                Func::Neg => -x,
                Func::Sqrt => {
                    if v < 0.0 || (v == 0.0 && T::HAS_DERIVATIVES) {
                        return Err(domain(e, "sqrt of a non-positive value"));
                    }
                    x.sqrt()
                }
                Func::Exp => x.exp(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain(e, "log of a non-positive value"));
                    }
                    x.ln()
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    if v.cos() == 0.0 {
                        return Err(domain(e, "tan at a pole"));
                    }
                    x.tan()
                }
                Func::Sinh => x.sinh(),
                Func::Cosh => x.cosh(),
                Func::Tanh => x.tanh(),
            }
        }
        Expr::Binary(op, a, b) => {
            if *op == BinOp::Pow && b.is_constant() {
                let base = eval(a, vars, params)?;
                let p = eval_constant(b, params)?;
                return power_const(e, base, p);
            }
            let x = eval(a, vars, params)?;
            let y = eval(b, vars, params)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.re() == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    x / y
                }
                BinOp::Pow => {
                    if x.re() <= 0.0 {
                        return Err(domain(e, "variable exponent needs a positive base"));
                    }
                    (y * x.ln()).exp()
                }
            }
        }
    };
    if !out.re().is_finite() {
        return Err(domain(e, "non-finite value"));
    }
    Ok(out)
}

fn power_const<T: Scalar>(e: &Expr, base: T, p: f64) -> Result<T> {
    let v = base.re();
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        if v == 0.0 && p < 0.0 {
            return Err(domain(e, "zero raised to a negative power"));
        }
        return Ok(base.powi(p as i32));
    }
    if v < 0.0 || (v == 0.0 && (p < 2.0 && T::HAS_DERIVATIVES || p < 0.0)) {
        return Err(domain(e, "non-integer power of a non-positive value"));
    }
    Ok(base.powf(p))
}

/// Value at a point.
pub fn eval_value(e: &Expr, p: &ChartPoint, params: &Params) -> Result<f64> {
    let vars = Vars::new(p.kind, p.coords.clone())?;
    eval(e, &vars, params)
}

/// Exact value, gradient and Hessian in the chart coordinates.
pub fn eval_jet(e: &Expr, p: &ChartPoint, params: &Params) -> Result<ScalarJet> {
    let vars = Vars::new(p.kind, seed(&p.coords))?;
    let v: HyperDual = eval(e, &vars, params)?;
    Ok(ScalarJet::from_dual(&v, p.dim()))
}
