#![allow(dead_code)]

use asyminv::chart::ChartPoint;
use asyminv::expr::{eval_jet, eval_value, BinOp, Expr, Func, Params, Var};
use rand::Rng;

fn num(v: f64) -> Box<Expr> {
    Box::new(Expr::Num(v))
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn un(f: Func, a: Expr) -> Expr {
    Expr::Unary(f, Box::new(a))
}

/// `1.5 + b²`, bounded away from zero.
fn positive(b: Expr) -> Expr {
    Expr::Binary(BinOp::Add, num(1.5), Box::new(bin(BinOp::Mul, b.clone(), b)))
}

fn leaf<R: Rng>(rng: &mut R, n: usize) -> Expr {
    match rng.gen_range(0..4) {
        0 => Expr::Num((rng.gen_range(0.1..3.0f64) * 100.0).round() / 100.0),
        1 => Expr::Param("a".into()),
        2 => Expr::Var(Var::R),
        _ => Expr::Var(Var::X(rng.gen_range(0..n))),
    }
}

/// Random smooth expression in cartesian coordinates, built so that every
/// function is evaluated inside its domain on `|x| ≥ 1`.
pub fn random_expr<R: Rng>(rng: &mut R, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, n);
    }
    let sub = |rng: &mut R| random_expr(rng, n, depth - 1);
    match rng.gen_range(0..14) {
        0 => bin(BinOp::Add, sub(rng), sub(rng)),
        1 => bin(BinOp::Sub, sub(rng), sub(rng)),
        2 | 3 => bin(BinOp::Mul, sub(rng), sub(rng)),
        4 => {
            let a = sub(rng);
            bin(BinOp::Div, a, positive(sub(rng)))
        }
        5 => {
            let k = rng.gen_range(2..4) as f64;
            Expr::Binary(BinOp::Pow, Box::new(un(Func::Tanh, sub(rng))), num(k))
        }
        6 => bin(BinOp::Pow, positive(sub(rng)), un(Func::Sin, sub(rng))),
        7 => un(Func::Neg, sub(rng)),
        8 => un(Func::Sqrt, positive(sub(rng))),
        9 => un(Func::Log, positive(sub(rng))),
        10 => un(Func::Exp, un(Func::Sin, sub(rng))),
        11 => un(if rng.gen_bool(0.5) { Func::Sin } else { Func::Cos }, sub(rng)),
        12 => un(Func::Tan, un(Func::Tanh, sub(rng))),
        _ => un(
            if rng.gen_bool(0.5) { Func::Sinh } else { Func::Cosh },
            un(Func::Tanh, sub(rng)),
        ),
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> ChartPoint {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.5..2.5)).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= 1.0 {
            return ChartPoint::cartesian(x);
        }
    }
}

/// Largest relative discrepancy between the AD jet and central differences
/// of values (Richardson-extrapolated), relative to the jet's scale.
pub fn ad_vs_fd(e: &Expr, p: &ChartPoint, params: &Params) -> f64 {
    let n = p.dim();
    let jet = eval_jet(e, p, params).expect("jet");
    let f = |shift: &[(usize, f64)]| {
        let mut x = p.coords.clone();
        for &(i, d) in shift {
            x[i] += d;
        }
        eval_value(e, &ChartPoint::cartesian(x), params).expect("value")
    };
    let grad = |i: usize, h: f64| (f(&[(i, h)]) - f(&[(i, -h)])) / (2.0 * h);
    let hess = |i: usize, j: usize, h: f64| {
        if i == j {
            (f(&[(i, h)]) - 2.0 * jet.value + f(&[(i, -h)])) / (h * h)
        } else {
            (f(&[(i, h), (j, h)]) - f(&[(i, h), (j, -h)]) - f(&[(i, -h), (j, h)]) + f(&[(i, -h), (j, -h)]))
                / (4.0 * h * h)
        }
    };
    let rich = |d1: f64, d2: f64| (4.0 * d2 - d1) / 3.0;
    let h = 2e-3;
    let mut scale: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        scale = scale.max(jet.gradient[i].abs());
        for j in 0..n {
            scale = scale.max(jet.hessian[i][j].abs());
        }
    }
    for i in 0..n {
        worst = worst.max((rich(grad(i, h), grad(i, h / 2.0)) - jet.gradient[i]).abs());
        for j in 0..n {
            worst = worst.max((rich(hess(i, j, h), hess(i, j, h / 2.0)) - jet.hessian[i][j]).abs());
        }
    }
    worst / scale
}

/// Γ(h/2) for a positive integer h.
pub fn gamma_half(h: u32) -> f64 {
    let mut v = if h % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if h % 2 == 0 { 1.0 } else { 0.5 };
    while x < h as f64 / 2.0 {
        v *= x;
        x += 1.0;
    }
    v
}

/// ∮_{S^{n-1}} x^a dσ.
pub fn monomial_moment(a: &[u32]) -> f64 {
    if a.iter().any(|e| e % 2 == 1) {
        return 0.0;
    }
    let num: f64 = a.iter().map(|e| gamma_half(e + 1)).product();
    let total: u32 = a.iter().map(|e| e + 1).sum();
    2.0 * num / gamma_half(total)
}
