use std::fmt;

/// Built-in unary functions. `Neg` is the prefix minus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Neg,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Neg => "-",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Chart variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// `x1..xn`: chart coordinates in cartesian charts, unit-sphere embedding
    /// coordinates in polar charts (0-based index).
    X(usize),
    /// `r`: `|x|` in cartesian charts, the radial coordinate in polar charts.
    R,
    /// `theta1..theta{n-2}` (0-based index).
    Theta(usize),
    /// `phi`, the azimuth of polar charts.
    Phi,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(String),
    Var(Var),
    Unary(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Param(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// True when no chart variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => true,
            Expr::Var(_) => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Structural zero: the literal `0`.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Unary(_, a) => a.params(out),
            Expr::Binary(_, a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::R => write!(f, "r"),
            Var::Theta(k) => write!(f, "theta{}", k + 1),
            Var::Phi => write!(f, "phi"),
        }
    }
}

/// Fully parenthesized rendering; reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(Func::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
