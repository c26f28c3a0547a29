//! Metric component expressions: parsing, printing and exact 2-jet evaluation.

mod ast;
mod dual;
mod eval;
mod parse;

pub use ast::{BinOp, Expr, Func, Var};
pub use dual::{seed, HyperDual, Scalar};
pub use eval::{eval, eval_jet, eval_value, Params, Vars};
pub use parse::{parse, ParseError, ParseErrorKind, Scope};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartKind, ChartPoint};

    fn cart(text: &str, params: &[&str]) -> Expr {
        let names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        parse(
            text,
            &Scope {
                n: 3,
                chart: ChartKind::Cartesian,
                params: &names,
            },
        )
        .unwrap()
    }

    #[test]
    fn quadratic_has_constant_hessian() {
        let e = cart("x1^2 + x2^2", &[]);
        let p = ChartPoint::cartesian(vec![0.3, -1.2, 4.0]);
        let jet = eval_jet(&e, &p, &Params::new()).unwrap();
        assert_eq!(jet.hessian[0][0], 2.0);
        assert_eq!(jet.hessian[1][1], 2.0);
        assert_eq!(jet.hessian[2][2], 0.0);
        assert_eq!(jet.hessian[0][1], 0.0);
    }

    #[test]
    fn schwarzschild_factor_jet() {
        // d/dx1 of m/(2r) is -m x1/(2 r^3), i.e. -1/8 at (2,0,0).
        let e = cart("1 + m/(2*r)", &["m"]);
        let params = Params::from([("m".to_string(), 1.0)]);
        let jet = eval_jet(&e, &ChartPoint::cartesian(vec![2.0, 0.0, 0.0]), &params).unwrap();
        assert!((jet.value - 1.25).abs() < 1e-15);
        assert!((jet.gradient[0] + 0.125).abs() < 1e-15);
        let h = 1e-5;
        let at = |x: f64| eval_value(&e, &ChartPoint::cartesian(vec![x, 0.0, 0.0]), &params).unwrap();
        let fd = (at(2.0 + h) - at(2.0 - h)) / (2.0 * h);
        assert!((fd - jet.gradient[0]).abs() < 1e-9);
        assert!(jet.gradient[1].abs() < 1e-15 && jet.gradient[2].abs() < 1e-15);
    }

    #[test]
    fn cosh_in_polar_chart() {
        let e = parse(
            "cosh(r)",
            &Scope {
                n: 3,
                chart: ChartKind::PolarGeodesic,
                params: &[],
            },
        )
        .unwrap();
        let p = ChartPoint::polar(ChartKind::PolarGeodesic, 0.5, &[1.0, 2.0]);
        let jet = eval_jet(&e, &p, &Params::new()).unwrap();
        assert!((jet.value - 0.5f64.cosh()).abs() < 1e-15);
        assert!((jet.gradient[0] - 0.5f64.sinh()).abs() < 1e-15);
        assert!((jet.hessian[0][0] - 0.5f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let p = ChartPoint::cartesian(vec![0.0, 0.0, 0.0]);
        let err = eval_jet(&cart("log(x1)", &[]), &p, &Params::new()).unwrap_err();
        assert!(matches!(err, crate::Error::ExprDomain { ref node, .. } if node == "log(x1)"));
        let err = eval_jet(&cart("1/x2", &[]), &p, &Params::new()).unwrap_err();
        assert!(matches!(err, crate::Error::ExprDomain { .. }));
        let err = eval_jet(&cart("r", &[]), &p, &Params::new()).unwrap_err();
        assert!(matches!(err, crate::Error::ExprDomain { .. }));
        // value-only evaluation of r at the origin is fine
        assert_eq!(eval_value(&cart("r", &[]), &p, &Params::new()).unwrap(), 0.0);
        let q = ChartPoint::cartesian(vec![-1.0, 0.0, 0.0]);
        assert!(eval_jet(&cart("sqrt(x1)", &[]), &q, &Params::new()).is_err());
        assert!(eval_jet(&cart("x1^0.5", &[]), &q, &Params::new()).is_err());
        // integer powers of negative bases are fine
        let v = eval_value(&cart("x1^3", &[]), &q, &Params::new()).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn variable_exponent_uses_exp_log() {
        let e = cart("x1^x2", &[]);
        let p = ChartPoint::cartesian(vec![2.0, 3.0, 0.0]);
        let jet = eval_jet(&e, &p, &Params::new()).unwrap();
        assert!((jet.value - 8.0).abs() < 1e-14);
        assert!((jet.gradient[0] - 12.0).abs() < 1e-13);
        assert!((jet.gradient[1] - 8.0 * 2f64.ln()).abs() < 1e-13);
    }
}
