use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Index of a declared real variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Real-valued expression over declared variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarId),
    Sum(Vec<Expr>),
    Scale(f64, Box<Expr>),
    Prod(Box<Expr>, Box<Expr>),
    /// Square root of a non-negative subexpression (clamped at zero).
    Sqrt(Box<Expr>),
}

/// Lower clamp for square-root arguments so gradients stay finite.
const SQRT_FLOOR: f64 = 1e-18;

impl Expr {
    pub fn var(v: VarId) -> Expr {
        Expr::Var(v)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(Box::new(self))
    }

    /// `sum(coef * var) + constant`.
    pub fn linear(terms: &[(VarId, f64)], constant: f64) -> Expr {
        let mut parts: Vec<Expr> = terms
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|&(v, c)| {
                if c == 1.0 {
                    Expr::Var(v)
                } else {
                    Expr::Scale(c, Box::new(Expr::Var(v)))
                }
            })
            .collect();
        if constant != 0.0 || parts.is_empty() {
            parts.push(Expr::Const(constant));
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Expr::Sum(parts)
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => x[v.0],
            Expr::Sum(parts) => parts.iter().map(|p| p.eval(x)).sum(),
            Expr::Scale(c, e) => c * e.eval(x),
            Expr::Prod(a, b) => a.eval(x) * b.eval(x),
            Expr::Sqrt(e) => e.eval(x).max(SQRT_FLOOR).sqrt(),
        }
    }

    /// Adds `seed * d(self)/dx` into `grad` and returns the value.
    pub fn accumulate_grad(&self, x: &[f64], seed: f64, grad: &mut [f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => {
                grad[v.0] += seed;
                x[v.0]
            }
            Expr::Sum(parts) => parts
                .iter()
                .map(|p| p.accumulate_grad(x, seed, grad))
                .sum(),
            Expr::Scale(c, e) => c * e.accumulate_grad(x, seed * c, grad),
            Expr::Prod(a, b) => {
                let va = a.eval(x);
                let vb = b.eval(x);
                a.accumulate_grad(x, seed * vb, grad);
                b.accumulate_grad(x, seed * va, grad);
                va * vb
            }
            Expr::Sqrt(e) => {
                let inner = e.eval(x);
                let clamped = inner.max(SQRT_FLOOR);
                let root = clamped.sqrt();
                if inner > SQRT_FLOOR {
                    e.accumulate_grad(x, seed * 0.5 / root, grad);
                }
                root
            }
        }
    }

    /// Collects every variable the expression mentions.
    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Sum(parts) => parts.iter().for_each(|p| p.vars(out)),
            Expr::Scale(_, e) | Expr::Sqrt(e) => e.vars(out),
            Expr::Prod(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Linear form `(terms, constant)` when the expression is affine.
    pub fn as_linear(&self) -> Option<(Vec<(VarId, f64)>, f64)> {
        fn walk(e: &Expr, scale: f64, terms: &mut Vec<(VarId, f64)>, c: &mut f64) -> bool {
            match e {
                Expr::Const(k) => {
                    *c += scale * k;
                    true
                }
                Expr::Var(v) => {
                    terms.push((*v, scale));
                    true
                }
                Expr::Sum(parts) => parts.iter().all(|p| walk(p, scale, terms, c)),
                Expr::Scale(k, inner) => walk(inner, scale * k, terms, c),
                Expr::Prod(a, b) => {
                    if let Expr::Const(k) = **a {
                        walk(b, scale * k, terms, c)
                    } else if let Expr::Const(k) = **b {
                        walk(a, scale * k, terms, c)
                    } else {
                        false
                    }
                }
                Expr::Sqrt(_) => false,
            }
        }
        let mut terms = Vec::new();
        let mut c = 0.0;
        if !walk(self, 1.0, &mut terms, &mut c) {
            return None;
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, k) in terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += k,
                _ => merged.push((v, k)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Some((merged, c))
    }

    /// Rewrites variable references through `map`.
    pub fn remap(&self, map: &[usize]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => Expr::Var(VarId(map[v.0])),
            Expr::Sum(parts) => Expr::Sum(parts.iter().map(|p| p.remap(map)).collect()),
            Expr::Scale(c, e) => Expr::Scale(*c, Box::new(e.remap(map))),
            Expr::Prod(a, b) => Expr::Prod(Box::new(a.remap(map)), Box::new(b.remap(map))),
            Expr::Sqrt(e) => Expr::Sqrt(Box::new(e.remap(map))),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

impl From<VarId> for Expr {
    fn from(v: VarId) -> Self {
        Expr::Var(v)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Sum(mut a), Expr::Sum(b)) => {
                a.extend(b);
                Expr::Sum(a)
            }
            (Expr::Sum(mut a), b) => {
                a.push(b);
                Expr::Sum(a)
            }
            (a, b) => Expr::Sum(vec![a, b]),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Scale(c, e) => Expr::Scale(-c, e),
            e => Expr::Scale(-1.0, Box::new(e)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (Expr::Const(a), e) | (e, Expr::Const(a)) => Expr::Scale(a, Box::new(e)),
            (a, b) => Expr::Prod(Box::new(a), Box::new(b)),
        }
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, rhs: f64) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c * rhs),
            Expr::Scale(c, e) => Expr::Scale(c * rhs, e),
            e => Expr::Scale(rhs, Box::new(e)),
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names;
        match self.expr {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => match names.get(v.0) {
                Some(n) => f.write_str(n),
                None => write!(f, "v{}", v.0),
            },
            Expr::Sum(parts) => {
                f.write_str("(")?;
                for (k, p) in parts.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{}", p.display(names))?;
                }
                f.write_str(")")
            }
            Expr::Scale(c, e) => write!(f, "{c}*{}", e.display(names)),
            Expr::Prod(a, b) => write!(f, "{}*{}", a.display(names), b.display(names)),
            Expr::Sqrt(e) => write!(f, "sqrt({})", e.display(names)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_difference() {
        let (a, b, c) = (VarId(0), VarId(1), VarId(2));
        let e = (Expr::var(a) * Expr::var(b) + Expr::var(c) * 3.0).sqrt() - Expr::var(a) * 0.5;
        let x = [1.3, 2.1, 0.7];
        let mut g = [0.0; 3];
        let v = e.accumulate_grad(&x, 1.0, &mut g);
        assert!((v - e.eval(&x)).abs() < 1e-15);
        for k in 0..3 {
            let mut xp = x;
            xp[k] += 1e-7;
            let fd = (e.eval(&xp) - e.eval(&x)) / 1e-7;
            assert!((fd - g[k]).abs() < 1e-5, "component {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn linear_extraction_merges_terms() {
        let (a, b) = (VarId(0), VarId(1));
        let e = Expr::var(a) * 2.0 - Expr::var(b) + Expr::var(a) + Expr::constant(4.0);
        let (terms, c) = e.as_linear().unwrap();
        assert_eq!(terms, vec![(a, 3.0), (b, -1.0)]);
        assert_eq!(c, 4.0);
        assert!((Expr::var(a) * Expr::var(b)).as_linear().is_none());
    }
}
