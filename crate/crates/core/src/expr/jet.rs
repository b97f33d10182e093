//! Second-order jets (value, gradient, symmetric Hessian) over a generic
//! scalar, with the arithmetic kernels shared by the expression evaluator
//! and the field combinators.

use super::scalar::JetScalar;

/// How much of a jet a computation is asked to populate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Grad,
    Hess,
}

/// Symmetric matrix stored as the packed upper triangle; `m == 0` encodes an
/// absent Hessian (order below `Hess`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<S = f64> {
    m: usize,
    data: Vec<S>,
}

impl<S: JetScalar> SymMat<S> {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![S::zero(); m * (m + 1) / 2],
        }
    }

    pub fn empty() -> Self {
        Self { m: 0, data: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.m - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_assign_scaled(&mut self, other: &SymMat<S>, c: S) {
        debug_assert_eq!(self.m, other.m);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + c * *b;
        }
    }

    /// Matrix-vector product H w.
    pub fn apply(&self, w: &[S]) -> Vec<S> {
        debug_assert_eq!(w.len(), self.m);
        (0..self.m)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.m {
                    acc = acc + self.get(i, j) * w[j];
                }
                acc
            })
            .collect()
    }

    /// Quadratic form w^T H w.
    pub fn quad(&self, w: &[S]) -> S {
        let hw = self.apply(w);
        dot(w, &hw)
    }
}

pub fn dot<S: JetScalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Order-2 jet of a scalar quantity in `m` variables. The gradient is empty
/// below `Order::Grad` and the Hessian below `Order::Hess`; all kernels
/// require both operands to be populated to the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2<S = f64> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: SymMat<S>,
}

impl<S: JetScalar> Jet2<S> {
    pub fn constant(value: S, m: usize, ord: Order) -> Self {
        Self {
            value,
            grad: if ord >= Order::Grad {
                vec![S::zero(); m]
            } else {
                Vec::new()
            },
            hess: if ord >= Order::Hess {
                SymMat::zeros(m)
            } else {
                SymMat::empty()
            },
        }
    }

    /// Jet of the coordinate projection onto slot `pos`.
    pub fn coordinate(value: S, pos: usize, m: usize, ord: Order) -> Self {
        let mut j = Self::constant(value, m, ord);
        if ord >= Order::Grad {
            j.grad[pos] = S::one();
        }
        j
    }

    pub fn order(&self) -> Order {
        if !self.hess.is_empty() {
            Order::Hess
        } else if !self.grad.is_empty() {
            Order::Grad
        } else {
            Order::Value
        }
    }

    pub fn m(&self) -> usize {
        self.grad.len()
    }
}

pub fn jadd<S: JetScalar>(a: &Jet2<S>, b: &Jet2<S>) -> Jet2<S> {
    let mut out = a.clone();
    out.value = a.value + b.value;
    for (g, h) in out.grad.iter_mut().zip(&b.grad) {
        *g = *g + *h;
    }
    if !out.hess.is_empty() {
        out.hess.add_assign_scaled(&b.hess, S::one());
    }
    out
}

pub fn jsub<S: JetScalar>(a: &Jet2<S>, b: &Jet2<S>) -> Jet2<S> {
    jadd(a, &jscale(b, -S::one()))
}

pub fn jscale<S: JetScalar>(a: &Jet2<S>, c: S) -> Jet2<S> {
    let mut out = a.clone();
    out.value = c * out.value;
    for g in out.grad.iter_mut() {
        *g = c * *g;
    }
    for k in 0..out.hess.data.len() {
        out.hess.data[k] = c * out.hess.data[k];
    }
    out
}

pub fn jneg<S: JetScalar>(a: &Jet2<S>) -> Jet2<S> {
    jscale(a, -S::one())
}

pub fn jmul<S: JetScalar>(a: &Jet2<S>, b: &Jet2<S>) -> Jet2<S> {
    let m = a.grad.len();
    let mut out = Jet2 {
        value: a.value * b.value,
        grad: Vec::with_capacity(m),
        hess: SymMat::empty(),
    };
    for i in 0..m {
        out.grad.push(a.grad[i] * b.value + a.value * b.grad[i]);
    }
    if !a.hess.is_empty() {
        let mut h = SymMat::zeros(m);
        for i in 0..m {
            for j in i..m {
                h.set(
                    i,
                    j,
                    a.hess.get(i, j) * b.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i]
                        + a.value * b.hess.get(i, j),
                );
            }
        }
        out.hess = h;
    }
    out
}

pub fn jdiv<S: JetScalar>(a: &Jet2<S>, b: &Jet2<S>) -> Jet2<S> {
    let m = a.grad.len();
    let q = a.value / b.value;
    let mut grad = Vec::with_capacity(m);
    for i in 0..m {
        grad.push((a.grad[i] - q * b.grad[i]) / b.value);
    }
    let mut hess = SymMat::empty();
    if !a.hess.is_empty() {
        let mut h = SymMat::zeros(m);
        for i in 0..m {
            for j in i..m {
                let num = a.hess.get(i, j)
                    - grad[i] * b.grad[j]
                    - grad[j] * b.grad[i]
                    - q * b.hess.get(i, j);
                h.set(i, j, num / b.value);
            }
        }
        hess = h;
    }
    Jet2 { value: q, grad, hess }
}

/// Chain rule for a unary map with value `u`, derivative `du`, second
/// derivative `ddu` at `a.value`.
pub fn jchain<S: JetScalar>(a: &Jet2<S>, u: S, du: S, ddu: S) -> Jet2<S> {
    let m = a.grad.len();
    let grad: Vec<S> = a.grad.iter().map(|g| du * *g).collect();
    let mut hess = SymMat::empty();
    if !a.hess.is_empty() {
        let mut h = SymMat::zeros(m);
        for i in 0..m {
            for j in i..m {
                h.set(i, j, du * a.hess.get(i, j) + ddu * a.grad[i] * a.grad[j]);
            }
        }
        hess = h;
    }
    Jet2 { value: u, grad, hess }
}

/// Integer power by repeated multiplication; `a^0 = 1`.
pub fn jpowi<S: JetScalar>(a: &Jet2<S>, k: i32, m: usize, ord: Order) -> Jet2<S> {
    if k == 0 {
        return Jet2::constant(S::one(), m, ord);
    }
    if k < 0 {
        let one = Jet2::constant(S::one(), m, ord);
        return jdiv(&one, &jpowi(a, -k, m, ord));
    }
    let mut acc = a.clone();
    for _ in 1..k {
        acc = jmul(&acc, a);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: f64, pos: usize, m: usize) -> Jet2<f64> {
        Jet2::coordinate(v, pos, m, Order::Hess)
    }

    #[test]
    fn product_rule_in_two_variables() {
        // f = x * y at (2, 3)
        let x = var(2.0, 0, 2);
        let y = var(3.0, 1, 2);
        let f = jmul(&x, &y);
        assert_eq!(f.value, 6.0);
        assert_eq!(f.grad, vec![3.0, 2.0]);
        assert_eq!(f.hess.get(0, 1), 1.0);
        assert_eq!(f.hess.get(0, 0), 0.0);
    }

    #[test]
    fn quotient_rule_matches_closed_form() {
        // f = x / y at (1, 2): fx = 1/y, fy = -x/y^2, fyy = 2x/y^3, fxy = -1/y^2
        let x = var(1.0, 0, 2);
        let y = var(2.0, 1, 2);
        let f = jdiv(&x, &y);
        assert!((f.value - 0.5).abs() < 1e-15);
        assert!((f.grad[0] - 0.5).abs() < 1e-15);
        assert!((f.grad[1] + 0.25).abs() < 1e-15);
        assert!((f.hess.get(1, 1) - 0.25).abs() < 1e-15);
        assert!((f.hess.get(0, 1) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn powers_unroll_exactly() {
        let x = var(-2.0, 0, 1);
        let f = jpowi(&x, 3, 1, Order::Hess);
        assert_eq!(f.value, -8.0);
        assert_eq!(f.grad[0], 12.0);
        assert_eq!(f.hess.get(0, 0), -12.0);
        let g = jpowi(&x, -1, 1, Order::Hess);
        assert!((g.value + 0.5).abs() < 1e-15);
        assert!((g.grad[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn orders_propagate_sizes() {
        let x = Jet2::coordinate(1.5, 0, 3, Order::Grad);
        let f = jmul(&x, &x);
        assert_eq!(f.grad.len(), 3);
        assert!(f.hess.is_empty());
        let v = Jet2::<f64>::constant(2.0, 3, Order::Value);
        assert!(v.grad.is_empty());
    }
}
