use super::{Expr, PolyError, Polynomial};
use crate::dynamics::VectorField;

/// `sum_i (dp/dx_i) * f_i`.
pub fn lie_derivative(p: &Polynomial, field: &VectorField) -> Result<Polynomial, PolyError> {
    let mut out = Polynomial::zero();
    for v in p.variables() {
        let fv = field
            .component(&v)
            .ok_or_else(|| PolyError::UnknownVariable(v.clone()))?;
        out = out + &p.derivative(&v) * fv;
    }
    Ok(out)
}

/// Lie derivative of an expression: chain rule through `sin`/`cos`/`sqrt`,
/// quotient rule for divisions. `pi` is a constant.
pub fn lie_derivative_expr(x: &Expr, field: &VectorField) -> Result<Expr, PolyError> {
    let var_rate = |v: &super::Symbol| {
        field
            .component(v)
            .cloned()
            .map(Expr::Poly)
            .ok_or_else(|| PolyError::UnknownVariable(v.clone()))
    };
    Ok(match x {
        Expr::Poly(p) => Expr::Poly(lie_derivative(p, field)?),
        Expr::Pi(_) => Expr::zero(),
        Expr::Sin(v) => Expr::mul(Expr::Cos(v.clone()), var_rate(v)?),
        Expr::Cos(v) => Expr::neg(Expr::mul(Expr::Sin(v.clone()), var_rate(v)?)),
        Expr::Sqrt(a) => {
            let da = lie_derivative_expr(a, field)?;
            if da.is_zero() {
                return Ok(Expr::zero());
            }
            Expr::div(da, Expr::mul(Expr::int(2), x.clone()))?
        }
        Expr::Neg(a) => Expr::neg(lie_derivative_expr(a, field)?),
        Expr::Pow(a, n) => Expr::mul(
            Expr::mul(Expr::int(*n as i64), Expr::pow((**a).clone(), n - 1)),
            lie_derivative_expr(a, field)?,
        ),
        Expr::Sum(v) => {
            let mut acc = Expr::zero();
            for t in v {
                acc = Expr::add(acc, lie_derivative_expr(t, field)?);
            }
            acc
        }
        Expr::Prod(v) => {
            let mut acc = Expr::zero();
            for i in 0..v.len() {
                let di = lie_derivative_expr(&v[i], field)?;
                if di.is_zero() {
                    continue;
                }
                let mut term = di;
                for (j, t) in v.iter().enumerate() {
                    if j != i {
                        term = Expr::mul(term, t.clone());
                    }
                }
                acc = Expr::add(acc, term);
            }
            acc
        }
        Expr::Quot(n, d) => {
            let dn = lie_derivative_expr(n, field)?;
            let dd = lie_derivative_expr(d, field)?;
            let num = Expr::sub(
                Expr::mul(dn, (**d).clone()),
                Expr::mul((**n).clone(), dd),
            );
            if num.is_zero() {
                return Ok(Expr::zero());
            }
            Expr::div(num, Expr::pow((**d).clone(), 2))?
        }
    })
}
