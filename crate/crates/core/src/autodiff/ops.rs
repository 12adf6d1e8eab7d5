//! Differentiable primitives on [`Var`].

use std::f64::consts::LN_10;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::Var;

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sums a gradient down to the shape of a broadcast operand.
fn reduce_to(len: usize, g: Vec<f64>) -> Vec<f64> {
    if len == 1 && g.len() != 1 {
        vec![g.iter().sum()]
    } else {
        g
    }
}

fn broadcast_len(a: usize, b: usize, op: &str) -> usize {
    match (a, b) {
        _ if a == b => a,
        (1, n) | (n, 1) => n,
        _ => panic!("{op}: incompatible lengths {a} and {b}"),
    }
}

/// Primitive ops whose partials a [`Fault`](super::Fault) can scale.
pub const FAULTABLE_OPS: [&str; 9] = [
    "abs", "atan", "exp", "ln", "log10", "max", "recip", "sigmoid", "softplus",
];

#[inline]
fn at(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

impl<'t> Var<'t> {
    /// Elementwise map with partials `df(x, f(x))`.
    fn unary(
        self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64,
    ) -> Var<'t> {
        let x = self.value();
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let factor = self.tape.fault_factor(op);
        let partial: Vec<f64> = x.iter().zip(&y).map(|(&a, &b)| factor * df(a, b)).collect();
        self.tape.custom(
            op,
            y,
            &[self],
            Box::new(move |g, _| vec![g.iter().zip(&partial).map(|(a, b)| a * b).collect()]),
        )
    }

    pub fn atan(self) -> Var<'t> {
        self.unary("atan", f64::atan, |x, _| 1.0 / (1.0 + x * x))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary("exp", f64::exp, |_, y| y)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary("ln", f64::ln, |x, _| 1.0 / x)
    }

    pub fn log10(self) -> Var<'t> {
        self.unary("log10", f64::log10, |x, _| 1.0 / (x * LN_10))
    }

    /// Subgradient 0 at the origin.
    pub fn abs(self) -> Var<'t> {
        self.unary("abs", f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// `max(x, c)`; the partial is 1 where `x > c`.
    pub fn max_scalar(self, c: f64) -> Var<'t> {
        self.unary("max", move |x| x.max(c), move |x, _| if x > c { 1.0 } else { 0.0 })
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary("softplus", softplus, |x, _| sigmoid(x))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn recip(self) -> Var<'t> {
        self.unary("recip", |x| 1.0 / x, |x, _| -1.0 / (x * x))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let y = self.value().iter().map(|v| v * c).collect();
        self.tape.custom(
            "scale",
            y,
            &[self],
            Box::new(move |g, _| vec![g.iter().map(|v| v * c).collect()]),
        )
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        let y = self.value().iter().map(|v| v + c).collect();
        self.tape
            .custom("offset", y, &[self], Box::new(|g, _| vec![g.to_vec()]))
    }

    /// Elementwise product with a fixed vector.
    pub fn mul_const(self, c: Vec<f64>) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), c.len(), "mul_const: length mismatch");
        let y = x.iter().zip(&c).map(|(a, b)| a * b).collect();
        self.tape.custom(
            "mul_const",
            y,
            &[self],
            Box::new(move |g, _| vec![g.iter().zip(&c).map(|(a, b)| a * b).collect()]),
        )
    }

    pub fn sum(self) -> Var<'t> {
        let n = self.len();
        let s = self.value().iter().sum();
        self.tape
            .custom("sum", vec![s], &[self], Box::new(move |g, _| vec![vec![g[0]; n]]))
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.len();
        let s = self.value().iter().sum::<f64>() / n as f64;
        self.tape.custom(
            "mean",
            vec![s],
            &[self],
            Box::new(move |g, _| vec![vec![g[0] / n as f64; n]]),
        )
    }

    pub fn slice(self, start: usize, len: usize) -> Var<'t> {
        let n = self.len();
        let y = self.value()[start..start + len].to_vec();
        self.tape.custom(
            "slice",
            y,
            &[self],
            Box::new(move |g, _| {
                let mut out = vec![0.0; n];
                out[start..start + len].copy_from_slice(g);
                vec![out]
            }),
        )
    }

    pub fn index(self, i: usize) -> Var<'t> {
        self.slice(i, 1)
    }

    fn binary(
        self,
        other: Var<'t>,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        da: impl Fn(f64, f64) -> f64 + 'static,
        db: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'t> {
        let a = self.value();
        let b = other.value();
        let n = broadcast_len(a.len(), b.len(), op);
        let y = (0..n).map(|i| f(at(&a, i), at(&b, i))).collect();
        let (la, lb) = (a.len(), b.len());
        self.tape.custom(
            op,
            y,
            &[self, other],
            Box::new(move |g, needs| {
                let ga = if needs[0] {
                    reduce_to(la, (0..n).map(|i| g[i] * da(at(&a, i), at(&b, i))).collect())
                } else {
                    Vec::new()
                };
                let gb = if needs[1] {
                    reduce_to(lb, (0..n).map(|i| g[i] * db(at(&a, i), at(&b, i))).collect())
                } else {
                    Vec::new()
                };
                vec![ga, gb]
            }),
        )
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "div", |a, b| a / b, |_, b| 1.0 / b, |a, b| -a / (b * b))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.offset(rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.offset(-rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.scale(rhs)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs.scale(self)
    }
}
