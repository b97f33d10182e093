//! Scalar and vector fields on T^r M, closed under the lift operations.
//!
//! Fields are combinator trees evaluated through order-2 jets over a generic
//! scalar. Compositions that need third-order data at order 2 (complete
//! lifts, quadratic spray coefficients, Euler-Lagrange coefficients) obtain
//! it by re-running their base jets over dual numbers in one direction; that
//! promotion is available exactly once, so such fields expose order 2 over
//! `f64` but refuse order 2 over duals with `DerivativeDepth`.

use std::sync::Arc;

use crate::chart::{kappa_permutation, BundlePoint};
use crate::error::{Error, Result};
use crate::expr::{dot, jadd, jdiv, jmul, jscale, Dual, Expr, Jet2, JetScalar, Node, Order};
use crate::linalg::{lu_factor, PIVOT_TOL};

/// Scalars that field jets can be evaluated over. `jet2_with_dir` returns the
/// order-2 jet together with its directional derivative along `dir`; over
/// `f64` it is realized with duals, over duals it is refused.
pub(crate) trait FieldScalar: JetScalar {
    fn jet2_with_dir(
        f: &ScalarField,
        c: &[Self],
        dir: &[Self],
    ) -> Result<(Jet2<Self>, Jet2<Self>)>;
}

pub(crate) fn split_dual_jet(j: &Jet2<Dual>) -> (Jet2<f64>, Jet2<f64>) {
    let m = j.m();
    let mut re = Jet2::constant(j.value.re, m, j.order());
    let mut eps = Jet2::constant(j.value.eps, m, j.order());
    for i in 0..m {
        re.grad[i] = j.grad[i].re;
        eps.grad[i] = j.grad[i].eps;
    }
    if !j.hess.is_empty() {
        for i in 0..m {
            for k in i..m {
                re.hess.set(i, k, j.hess.get(i, k).re);
                eps.hess.set(i, k, j.hess.get(i, k).eps);
            }
        }
    }
    (re, eps)
}

impl FieldScalar for f64 {
    fn jet2_with_dir(
        f: &ScalarField,
        c: &[f64],
        dir: &[f64],
    ) -> Result<(Jet2<f64>, Jet2<f64>)> {
        let duals: Vec<Dual> = c
            .iter()
            .zip(dir.iter())
            .map(|(&v, &d)| Dual::new(v, d))
            .collect();
        let jd = f.jet_gen::<Dual>(&duals, Order::Hess)?;
        Ok(split_dual_jet(&jd))
    }
}

impl FieldScalar for Dual {
    fn jet2_with_dir(
        _f: &ScalarField,
        _c: &[Dual],
        _dir: &[Dual],
    ) -> Result<(Jet2<Dual>, Jet2<Dual>)> {
        Err(Error::DerivativeDepth)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum FieldKind {
    Const(f64),
    Coord(usize),
    Expr(Arc<Expr>),
    Sum(Vec<ScalarField>),
    Scale(f64, Arc<ScalarField>),
    Product(Arc<ScalarField>, Arc<ScalarField>),
    /// f^v of a field one level down.
    VLift(Arc<ScalarField>),
    /// f^c of a field one level down.
    CLift(Arc<ScalarField>),
    /// f compose pi_{r-1}, for a field one level down.
    ProjPullback(Arc<ScalarField>),
    /// f compose kappa_r at the same level.
    KappaPullback(Arc<ScalarField>),
    /// A(f) for a vector field and scalar at the same level.
    VApply(Arc<VectorField>, Arc<ScalarField>),
    /// Component `k` of [A, B].
    BracketComp(Arc<VectorField>, Arc<VectorField>, usize),
    /// Quadratic geodesic coefficient of a metric: fields live at twice the
    /// entry dimension, entries are `m x m` row-major functions of the
    /// position half.
    Christoffel {
        entries: Arc<Vec<ScalarField>>,
        m: usize,
        index: usize,
    },
    /// Semispray coefficient of a regular Lagrangian (fiber Hessian solve).
    EulerLagrange {
        lagrangian: Arc<ScalarField>,
        index: usize,
    },
    /// Pointwise quotient nums[k] / fiber_k at the largest fiber slot;
    /// realizes a recovered projective factor.
    FiberQuotient { nums: Arc<Vec<ScalarField>> },
}

/// A scalar field on T^level M with base dimension n (so `2^level * n`
/// coordinates).
#[derive(Debug, Clone)]
pub struct ScalarField {
    level: u8,
    n: usize,
    smooth_at_zero: bool,
    kind: FieldKind,
}

fn node_is_everywhere_smooth(node: &Node) -> bool {
    match node {
        Node::Lit(_) | Node::Var(_) => true,
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
            node_is_everywhere_smooth(a) && node_is_everywhere_smooth(b)
        }
        Node::Neg(a) => node_is_everywhere_smooth(a),
        Node::PowInt(a, k) => *k >= 0 && node_is_everywhere_smooth(a),
        Node::Call(f, a) => {
            matches!(f, crate::expr::Func::Sin | crate::expr::Func::Cos | crate::expr::Func::Exp)
                && node_is_everywhere_smooth(a)
        }
        Node::AbsSmooth(a, delta) => *delta > 0.0 && node_is_everywhere_smooth(a),
        // Division stays smooth only when the denominator is a constant.
        Node::Div(a, b) => {
            matches!(**b, Node::Lit(c) if c != 0.0) && node_is_everywhere_smooth(a)
        }
        Node::Pow(..) => false,
    }
}

impl ScalarField {
    fn from_parts(level: u8, n: usize, smooth_at_zero: bool, kind: FieldKind) -> Self {
        Self {
            level,
            n,
            smooth_at_zero,
            kind,
        }
    }

    pub fn constant(level: u8, n: usize, v: f64) -> Self {
        Self::from_parts(level, n, true, FieldKind::Const(v))
    }

    pub fn coord(level: u8, n: usize, index: usize) -> Result<Self> {
        let dim = (1usize << level) * n;
        if index >= dim {
            return Err(Error::Input(format!(
                "coordinate index {index} out of range for dimension {dim}"
            )));
        }
        Ok(Self::from_parts(level, n, true, FieldKind::Coord(index)))
    }

    /// Parses `source` over the coordinate names of the given level.
    /// Smoothness across the zero section is auto-detected conservatively
    /// from the syntax; override with [`with_smooth_at_zero`] if needed.
    ///
    /// [`with_smooth_at_zero`]: ScalarField::with_smooth_at_zero
    pub fn from_source(level: u8, n: usize, source: &str) -> Result<Self> {
        let names = crate::chart::coord_names(level, n);
        let expr = crate::expr::parse(source, &names)?;
        Ok(Self::from_expr(level, n, expr))
    }

    pub fn from_expr(level: u8, n: usize, expr: Expr) -> Self {
        let smooth = node_is_everywhere_smooth(expr.node_ref());
        Self::from_parts(level, n, smooth, FieldKind::Expr(Arc::new(expr)))
    }

    pub fn with_smooth_at_zero(mut self, smooth: bool) -> Self {
        self.smooth_at_zero = smooth;
        self
    }

    pub fn sum(fields: Vec<ScalarField>) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::Input("sum of zero fields".into()))?;
        let (level, n) = (first.level, first.n);
        if fields.iter().any(|f| f.level != level || f.n != n) {
            return Err(Error::LevelMismatch("sum over mixed field levels".into()));
        }
        let smooth = fields.iter().all(|f| f.smooth_at_zero);
        Ok(Self::from_parts(level, n, smooth, FieldKind::Sum(fields)))
    }

    pub fn scale(c: f64, f: ScalarField) -> Self {
        let smooth = f.smooth_at_zero;
        Self::from_parts(f.level, f.n, smooth, FieldKind::Scale(c, Arc::new(f)))
    }

    pub fn product(a: ScalarField, b: ScalarField) -> Result<Self> {
        if a.level != b.level || a.n != b.n {
            return Err(Error::LevelMismatch("product over mixed field levels".into()));
        }
        let smooth = a.smooth_at_zero && b.smooth_at_zero;
        Ok(Self::from_parts(
            a.level,
            a.n,
            smooth,
            FieldKind::Product(Arc::new(a), Arc::new(b)),
        ))
    }

    pub fn difference(a: ScalarField, b: ScalarField) -> Result<Self> {
        Self::sum(vec![a, Self::scale(-1.0, b)])
    }

    fn lift_checked(&self, what: &'static str) -> Result<u8> {
        if self.level >= crate::chart::MAX_LEVEL {
            return Err(Error::Level {
                level: self.level,
                context: what,
            });
        }
        Ok(self.level + 1)
    }

    /// Vertical lift f^v = f compose pi_r compose kappa_{r+1}.
    pub fn vlift(&self) -> Result<Self> {
        let level = self.lift_checked("vertical lift would exceed level 3")?;
        Ok(Self::from_parts(
            level,
            self.n,
            self.smooth_at_zero,
            FieldKind::VLift(Arc::new(self.clone())),
        ))
    }

    /// Complete lift f^c: the derivative of f along the tangent half of the
    /// kappa-split argument.
    pub fn clift(&self) -> Result<Self> {
        let level = self.lift_checked("complete lift would exceed level 3")?;
        Ok(Self::from_parts(
            level,
            self.n,
            self.smooth_at_zero,
            FieldKind::CLift(Arc::new(self.clone())),
        ))
    }

    /// Pullback along the bundle projection, f compose pi_r.
    pub fn proj_pullback(&self) -> Result<Self> {
        let level = self.lift_checked("projection pullback would exceed level 3")?;
        Ok(Self::from_parts(
            level,
            self.n,
            self.smooth_at_zero,
            FieldKind::ProjPullback(Arc::new(self.clone())),
        ))
    }

    /// Pullback along kappa_r at the same level.
    pub fn kappa_pullback(&self) -> Result<Self> {
        if self.level == 0 {
            return Err(Error::Level {
                level: 0,
                context: "kappa pullback needs level >= 1",
            });
        }
        Ok(Self::from_parts(
            self.level,
            self.n,
            self.smooth_at_zero,
            FieldKind::KappaPullback(Arc::new(self.clone())),
        ))
    }

    pub(crate) fn christoffel(
        entries: Arc<Vec<ScalarField>>,
        entry_level: u8,
        n: usize,
        m: usize,
        index: usize,
        smooth: bool,
    ) -> Self {
        Self::from_parts(
            entry_level + 1,
            n,
            smooth,
            FieldKind::Christoffel { entries, m, index },
        )
    }

    pub(crate) fn euler_lagrange(lagrangian: Arc<ScalarField>, index: usize) -> Self {
        let (level, n, smooth) = (
            lagrangian.level,
            lagrangian.n,
            lagrangian.smooth_at_zero,
        );
        Self::from_parts(level, n, smooth, FieldKind::EulerLagrange { lagrangian, index })
    }

    pub(crate) fn fiber_quotient(nums: Vec<ScalarField>) -> Result<Self> {
        let first = nums
            .first()
            .ok_or_else(|| Error::Input("fiber quotient of zero fields".into()))?;
        let (level, n) = (first.level, first.n);
        if nums.len() != (1usize << level) * n / 2 {
            return Err(Error::Dimension {
                expected: (1usize << level) * n / 2,
                got: nums.len(),
            });
        }
        Ok(Self::from_parts(
            level,
            n,
            false,
            FieldKind::FiberQuotient { nums: Arc::new(nums) },
        ))
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        (1usize << self.level) * self.n
    }

    pub fn smooth_at_zero(&self) -> bool {
        self.smooth_at_zero
    }

    fn check_point(&self, p: &BundlePoint) -> Result<()> {
        if p.level() != self.level || p.n() != self.n {
            return Err(Error::LevelMismatch(format!(
                "field lives at level {} (n = {}), point at level {} (n = {})",
                self.level,
                self.n,
                p.level(),
                p.n()
            )));
        }
        Ok(())
    }

    pub fn value(&self, p: &BundlePoint) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.jet_gen::<f64>(p.coords(), Order::Value)?.value)
    }

    /// Value and gradient.
    pub fn jet1(&self, p: &BundlePoint) -> Result<Jet2<f64>> {
        self.check_point(p)?;
        self.jet_gen::<f64>(p.coords(), Order::Grad)
    }

    /// Value, gradient and Hessian.
    pub fn jet2(&self, p: &BundlePoint) -> Result<Jet2<f64>> {
        self.check_point(p)?;
        self.jet_gen::<f64>(p.coords(), Order::Hess)
    }

    pub(crate) fn value_slice(&self, c: &[f64]) -> Result<f64> {
        Ok(self.jet_gen::<f64>(c, Order::Value)?.value)
    }

    pub(crate) fn jet_gen<S: FieldScalar>(&self, c: &[S], ord: Order) -> Result<Jet2<S>> {
        let dim = self.dim();
        if c.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: c.len(),
            });
        }
        match &self.kind {
            FieldKind::Const(v) => Ok(Jet2::constant(S::from_f64(*v), dim, ord)),
            FieldKind::Coord(i) => Ok(Jet2::coordinate(c[*i], *i, dim, ord)),
            FieldKind::Expr(e) => e.jet_gen(c, ord),
            FieldKind::Sum(fs) => {
                let mut acc = fs[0].jet_gen(c, ord)?;
                for f in &fs[1..] {
                    acc = jadd(&acc, &f.jet_gen(c, ord)?);
                }
                Ok(acc)
            }
            FieldKind::Scale(k, f) => Ok(jscale(&f.jet_gen(c, ord)?, S::from_f64(*k))),
            FieldKind::Product(a, b) => Ok(jmul(&a.jet_gen(c, ord)?, &b.jet_gen(c, ord)?)),
            FieldKind::VLift(base) => self.vlift_jet(base, c, ord),
            FieldKind::CLift(base) => self.clift_jet(base, c, ord),
            FieldKind::ProjPullback(base) => {
                let half = dim / 2;
                let jb = base.jet_gen(&c[..half], ord)?;
                let slots: Vec<usize> = (0..half).collect();
                Ok(embed_jet(&jb, &slots, dim, ord))
            }
            FieldKind::KappaPullback(base) => {
                let perm = kappa_permutation(self.level, self.n)?;
                let pc: Vec<S> = perm.iter().map(|&i| c[i]).collect();
                let jb = base.jet_gen(&pc, ord)?;
                Ok(embed_jet(&jb, &perm, dim, ord))
            }
            FieldKind::VApply(a, f) => self.vapply_jet(a, f, c, ord),
            FieldKind::BracketComp(a, b, k) => bracket_comp_jet(a, b, *k, c, ord),
            FieldKind::Christoffel { entries, m, index } => {
                christoffel_jet(entries, *m, *index, c, ord)
            }
            FieldKind::EulerLagrange { lagrangian, index } => {
                euler_lagrange_jet(lagrangian, *index, c, ord)
            }
            FieldKind::FiberQuotient { nums } => {
                let half = dim / 2;
                let mut k = 0;
                for i in 1..half {
                    if c[half + i].re().abs() > c[half + k].re().abs() {
                        k = i;
                    }
                }
                let num = nums[k].jet_gen(c, ord)?;
                let den = Jet2::coordinate(c[half + k], half + k, dim, ord);
                Ok(jdiv(&num, &den))
            }
        }
    }

    fn vlift_jet<S: FieldScalar>(
        &self,
        base: &ScalarField,
        c: &[S],
        ord: Order,
    ) -> Result<Jet2<S>> {
        let dim = self.dim();
        let half = dim / 2;
        let perm = kappa_permutation(self.level, self.n)?;
        let p: Vec<S> = (0..half).map(|i| c[perm[i]]).collect();
        let jb = base.jet_gen(&p, ord)?;
        Ok(embed_jet(&jb, &perm[..half], dim, ord))
    }

    fn clift_jet<S: FieldScalar>(
        &self,
        base: &ScalarField,
        c: &[S],
        ord: Order,
    ) -> Result<Jet2<S>> {
        let dim = self.dim();
        let half = dim / 2;
        let perm = kappa_permutation(self.level, self.n)?;
        let p: Vec<S> = (0..half).map(|i| c[perm[i]]).collect();
        let w: Vec<S> = (0..half).map(|i| c[perm[half + i]]).collect();
        match ord {
            Order::Value => {
                let jb = base.jet_gen(&p, Order::Grad)?;
                Ok(Jet2::constant(dot(&jb.grad, &w), dim, ord))
            }
            Order::Grad => {
                let jb = base.jet_gen(&p, Order::Hess)?;
                let mut out = Jet2::constant(dot(&jb.grad, &w), dim, ord);
                let hw = jb.hess.apply(&w);
                for i in 0..half {
                    out.grad[perm[i]] = hw[i];
                    out.grad[perm[half + i]] = jb.grad[i];
                }
                Ok(out)
            }
            Order::Hess => {
                let (jb, djb) = S::jet2_with_dir(base, &p, &w)?;
                let mut out = Jet2::constant(dot(&jb.grad, &w), dim, ord);
                let hw = jb.hess.apply(&w);
                for i in 0..half {
                    out.grad[perm[i]] = hw[i];
                    out.grad[perm[half + i]] = jb.grad[i];
                }
                for i in 0..half {
                    for j in i..half {
                        out.hess.set(perm[i], perm[j], djb.hess.get(i, j));
                    }
                }
                for i in 0..half {
                    for j in 0..half {
                        out.hess.set(perm[i], perm[half + j], jb.hess.get(i, j));
                    }
                }
                Ok(out)
            }
        }
    }

    fn vapply_jet<S: FieldScalar>(
        &self,
        a: &VectorField,
        f: &ScalarField,
        c: &[S],
        ord: Order,
    ) -> Result<Jet2<S>> {
        let dim = self.dim();
        match ord {
            Order::Value => {
                let jf = f.jet_gen(c, Order::Grad)?;
                let av = a.value_slice_gen(c, Order::Value)?;
                let vals: Vec<S> = av.iter().map(|j| j.value).collect();
                Ok(Jet2::constant(dot(&vals, &jf.grad), dim, ord))
            }
            Order::Grad => {
                let jf = f.jet_gen(c, Order::Hess)?;
                let aj = a.value_slice_gen(c, Order::Grad)?;
                let vals: Vec<S> = aj.iter().map(|j| j.value).collect();
                let mut out = Jet2::constant(dot(&vals, &jf.grad), dim, ord);
                for b in 0..dim {
                    let mut acc = S::zero();
                    for k in 0..dim {
                        acc = acc + aj[k].grad[b] * jf.grad[k] + vals[k] * jf.hess.get(k, b);
                    }
                    out.grad[b] = acc;
                }
                Ok(out)
            }
            Order::Hess => {
                let jf = f.jet_gen(c, Order::Hess)?;
                let aj = a.value_slice_gen(c, Order::Hess)?;
                let vals: Vec<S> = aj.iter().map(|j| j.value).collect();
                let (_, djf) = S::jet2_with_dir(f, c, &vals)?;
                let mut out = Jet2::constant(dot(&vals, &jf.grad), dim, ord);
                for b in 0..dim {
                    let mut acc = S::zero();
                    for k in 0..dim {
                        acc = acc + aj[k].grad[b] * jf.grad[k] + vals[k] * jf.hess.get(k, b);
                    }
                    out.grad[b] = acc;
                }
                for b in 0..dim {
                    for d in b..dim {
                        let mut acc = djf.hess.get(b, d);
                        for k in 0..dim {
                            acc = acc
                                + aj[k].hess.get(b, d) * jf.grad[k]
                                + aj[k].grad[b] * jf.hess.get(k, d)
                                + aj[k].grad[d] * jf.hess.get(k, b);
                        }
                        out.hess.set(b, d, acc);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Embeds a jet over a sub/permuted variable list into `dim` slots;
/// `slots[i]` is the output index of input variable `i`.
fn embed_jet<S: JetScalar>(jb: &Jet2<S>, slots: &[usize], dim: usize, ord: Order) -> Jet2<S> {
    let mut out = Jet2::constant(jb.value, dim, ord);
    if ord >= Order::Grad {
        for (i, &s) in slots.iter().enumerate() {
            out.grad[s] = jb.grad[i];
        }
    }
    if ord >= Order::Hess {
        for (i, &si) in slots.iter().enumerate() {
            for (j, &sj) in slots.iter().enumerate().skip(i) {
                out.hess.set(si, sj, jb.hess.get(i, j));
            }
        }
    }
    out
}

fn bracket_comp_jet<S: FieldScalar>(
    a: &VectorField,
    b: &VectorField,
    k: usize,
    c: &[S],
    ord: Order,
) -> Result<Jet2<S>> {
    let dim = c.len();
    match ord {
        Order::Value => {
            let av = a.value_slice_gen(c, Order::Value)?;
            let bv = b.value_slice_gen(c, Order::Value)?;
            let jak = a.comps[k].jet_gen(c, Order::Grad)?;
            let jbk = b.comps[k].jet_gen(c, Order::Grad)?;
            let mut acc = S::zero();
            for j in 0..dim {
                acc = acc + av[j].value * jbk.grad[j] - bv[j].value * jak.grad[j];
            }
            Ok(Jet2::constant(acc, dim, ord))
        }
        Order::Grad => {
            let aj = a.value_slice_gen(c, Order::Grad)?;
            let bj = b.value_slice_gen(c, Order::Grad)?;
            let jak = a.comps[k].jet_gen(c, Order::Hess)?;
            let jbk = b.comps[k].jet_gen(c, Order::Hess)?;
            let mut value = S::zero();
            for j in 0..dim {
                value = value + aj[j].value * jbk.grad[j] - bj[j].value * jak.grad[j];
            }
            let mut out = Jet2::constant(value, dim, ord);
            for d in 0..dim {
                let mut acc = S::zero();
                for j in 0..dim {
                    acc = acc
                        + aj[j].grad[d] * jbk.grad[j]
                        + aj[j].value * jbk.hess.get(j, d)
                        - bj[j].grad[d] * jak.grad[j]
                        - bj[j].value * jak.hess.get(j, d);
                }
                out.grad[d] = acc;
            }
            Ok(out)
        }
        Order::Hess => Err(Error::DerivativeDepth),
    }
}

fn christoffel_jet<S: FieldScalar>(
    entries: &[ScalarField],
    m: usize,
    index: usize,
    c: &[S],
    ord: Order,
) -> Result<Jet2<S>> {
    let dim = c.len();
    debug_assert_eq!(dim, 2 * m);
    let q = &c[..m];
    let w = &c[m..];
    let entry_ord = if ord == Order::Value { Order::Grad } else { Order::Hess };
    let mut js: Vec<Jet2<S>> = Vec::with_capacity(m * m);
    for e in entries.iter() {
        js.push(e.jet_gen(q, entry_ord)?);
    }
    // dirs[b][i*m+j] carries d/ds of the jet of g_ij along q-direction b;
    // its Hessian holds the third derivatives d3_{k l b} g_ij.
    let mut dirs: Vec<Vec<Jet2<S>>> = Vec::new();
    if ord == Order::Hess {
        for bdir in 0..m {
            let mut eb = vec![S::zero(); m];
            eb[bdir] = S::one();
            let mut col = Vec::with_capacity(m * m);
            for e in entries.iter() {
                let (_, d) = S::jet2_with_dir(e, q, &eb)?;
                col.push(d);
            }
            dirs.push(col);
        }
    }
    let g = |i: usize, j: usize| js[i * m + j].value;
    let dg = |k: usize, i: usize, j: usize| js[i * m + j].grad[k];
    let ddg = |k: usize, l: usize, i: usize, j: usize| js[i * m + j].hess.get(k, l);
    let dddg =
        |k: usize, l: usize, b: usize, i: usize, j: usize| dirs[b][i * m + j].hess.get(k, l);

    let mut gmat = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            gmat.push(g(i, j));
        }
    }
    let lu = lu_factor(gmat, m, PIVOT_TOL)
        .map_err(|e| singular_to_metric(e))?;

    // B_l = sum_jk d_k g_lj w_j w_k - 1/2 sum_jk d_l g_jk w_j w_k;
    // g * (2 G-vector) = B.
    let mut bvec = vec![S::zero(); m];
    for l in 0..m {
        let mut acc = S::zero();
        for j in 0..m {
            for k in 0..m {
                acc = acc + dg(k, l, j) * w[j] * w[k]
                    - S::from_f64(0.5) * dg(l, j, k) * w[j] * w[k];
            }
        }
        bvec[l] = acc;
    }
    let u = lu.solve(&bvec);
    let half = S::from_f64(0.5);
    let mut out = Jet2::constant(half * u[index], dim, ord);
    if ord == Order::Value {
        return Ok(out);
    }

    // w-derivatives: g u_wb = dB/dw_b.
    let mut u_w: Vec<Vec<S>> = Vec::with_capacity(m);
    for b in 0..m {
        let mut rhs = vec![S::zero(); m];
        for l in 0..m {
            let mut acc = S::zero();
            for k in 0..m {
                acc = acc + dg(k, l, b) * w[k] + dg(b, l, k) * w[k] - dg(l, k, b) * w[k];
            }
            rhs[l] = acc;
        }
        let sol = lu.solve(&rhs);
        out.grad[m + b] = half * sol[index];
        u_w.push(sol);
    }
    // q-derivatives: g u_qa = dB/dq_a - (d_a g) u.
    let mut u_q: Vec<Vec<S>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut rhs = vec![S::zero(); m];
        for l in 0..m {
            let mut acc = S::zero();
            for j in 0..m {
                for k in 0..m {
                    acc = acc + ddg(k, a, l, j) * w[j] * w[k]
                        - S::from_f64(0.5) * ddg(l, a, j, k) * w[j] * w[k];
                }
            }
            for i in 0..m {
                acc = acc - dg(a, l, i) * u[i];
            }
            rhs[l] = acc;
        }
        let sol = lu.solve(&rhs);
        out.grad[a] = half * sol[index];
        u_q.push(sol);
    }
    if ord == Order::Grad {
        return Ok(out);
    }

    // ww block: g u_{wb wc} = d2B/dw_b dw_c.
    for b in 0..m {
        for cidx in b..m {
            let mut rhs = vec![S::zero(); m];
            for l in 0..m {
                rhs[l] = dg(cidx, l, b) + dg(b, l, cidx) - dg(l, b, cidx);
            }
            let sol = lu.solve(&rhs);
            out.hess.set(m + b, m + cidx, half * sol[index]);
        }
    }
    // qw block: g u_{qa wb} = d2B/dq_a dw_b - (d_a g) u_wb.
    for a in 0..m {
        for b in 0..m {
            let mut rhs = vec![S::zero(); m];
            for l in 0..m {
                let mut acc = S::zero();
                for k in 0..m {
                    acc = acc + ddg(k, a, l, b) * w[k] + ddg(b, a, l, k) * w[k]
                        - ddg(l, a, k, b) * w[k];
                }
                for i in 0..m {
                    acc = acc - dg(a, l, i) * u_w[b][i];
                }
                rhs[l] = acc;
            }
            let sol = lu.solve(&rhs);
            out.hess.set(a, m + b, half * sol[index]);
        }
    }
    // qq block: g u_{qa qb} = d2B/dq_a dq_b - (d2_ab g) u - (d_a g) u_qb - (d_b g) u_qa.
    for a in 0..m {
        for b in a..m {
            let mut rhs = vec![S::zero(); m];
            for l in 0..m {
                let mut acc = S::zero();
                for j in 0..m {
                    for k in 0..m {
                        acc = acc + dddg(k, a, b, l, j) * w[j] * w[k]
                            - S::from_f64(0.5) * dddg(l, a, b, j, k) * w[j] * w[k];
                    }
                }
                for i in 0..m {
                    acc = acc
                        - ddg(a, b, l, i) * u[i]
                        - dg(a, l, i) * u_q[b][i]
                        - dg(b, l, i) * u_q[a][i];
                }
                rhs[l] = acc;
            }
            let sol = lu.solve(&rhs);
            out.hess.set(a, b, half * sol[index]);
        }
    }
    Ok(out)
}

fn singular_to_metric(e: Error) -> Error {
    match e {
        Error::SingularMatrix { pivot } => Error::SingularMetric { pivot },
        other => other,
    }
}

fn singular_to_lagrangian(e: Error) -> Error {
    match e {
        Error::SingularMatrix { pivot } => Error::DegenerateLagrangian { pivot },
        other => other,
    }
}

fn euler_lagrange_jet<S: FieldScalar>(
    l: &ScalarField,
    index: usize,
    c: &[S],
    ord: Order,
) -> Result<Jet2<S>> {
    let dim = c.len();
    let m = dim / 2;
    if ord == Order::Hess {
        return Err(Error::DerivativeDepth);
    }
    let jl = l.jet_gen(c, Order::Hess)?;
    // 2 L_{fiber fiber} G = L_{fiber base} . fiber - L_base.
    let mut mat = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            mat.push(S::from_f64(2.0) * jl.hess.get(m + i, m + j));
        }
    }
    let lu = lu_factor(mat, m, PIVOT_TOL).map_err(singular_to_lagrangian)?;
    let mut rhs = vec![S::zero(); m];
    for i in 0..m {
        let mut acc = -jl.grad[i];
        for j in 0..m {
            acc = acc + jl.hess.get(m + i, j) * c[m + j];
        }
        rhs[i] = acc;
    }
    let u = lu.solve(&rhs);
    let mut out = Jet2::constant(u[index], dim, ord);
    if ord == Order::Value {
        return Ok(out);
    }
    for a in 0..dim {
        let mut dir = vec![S::zero(); dim];
        dir[a] = S::one();
        let (_, djl) = S::jet2_with_dir(l, c, &dir)?;
        // d_a rhs_i = sum_j d_a H_{fi, j} fiber_j + [a >= m] H_{fi, a-m} - d_a L_{base_i}
        // d_a M_{ij} = 2 d_a H_{fi, fj}
        let mut drhs = vec![S::zero(); m];
        for i in 0..m {
            let mut acc = -djl.grad[i];
            for j in 0..m {
                acc = acc + djl.hess.get(m + i, j) * c[m + j];
            }
            if a >= m {
                acc = acc + jl.hess.get(m + i, a - m);
            }
            drhs[i] = acc;
        }
        for i in 0..m {
            let mut acc = drhs[i];
            for j in 0..m {
                acc = acc - S::from_f64(2.0) * djl.hess.get(m + i, m + j) * u[j];
            }
            drhs[i] = acc;
        }
        let du = lu.solve(&drhs);
        out.grad[a] = du[index];
    }
    Ok(out)
}

/// A vector field on T^level M: one scalar component per coordinate.
#[derive(Debug, Clone)]
pub struct VectorField {
    level: u8,
    n: usize,
    comps: Vec<ScalarField>,
    slashed_only: bool,
}

impl VectorField {
    pub fn new(level: u8, n: usize, comps: Vec<ScalarField>) -> Result<Self> {
        let dim = (1usize << level) * n;
        if comps.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: comps.len(),
            });
        }
        if comps.iter().any(|f| f.level() != level || f.n() != n) {
            return Err(Error::LevelMismatch(
                "vector field components must live at the field's level".into(),
            ));
        }
        let slashed_only = comps.iter().any(|f| !f.smooth_at_zero());
        Ok(Self {
            level,
            n,
            comps,
            slashed_only,
        })
    }

    pub fn from_sources(level: u8, n: usize, sources: &[&str]) -> Result<Self> {
        let comps = sources
            .iter()
            .map(|s| ScalarField::from_source(level, n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(level, n, comps)
    }

    /// The Liouville (Euler) field of the fibration one level down:
    /// level 1: y d/dy, level 2: X d/dX + Y d/dY.
    pub fn liouville(level: u8, n: usize) -> Result<Self> {
        if !(1..=3).contains(&level) {
            return Err(Error::Level {
                level,
                context: "the Liouville field needs level 1 to 3",
            });
        }
        let dim = (1usize << level) * n;
        let half = dim / 2;
        let mut comps = Vec::with_capacity(dim);
        for _ in 0..half {
            comps.push(ScalarField::constant(level, n, 0.0));
        }
        for i in half..dim {
            comps.push(ScalarField::coord(level, n, i)?);
        }
        Self::new(level, n, comps)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        (1usize << self.level) * self.n
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn slashed_only(&self) -> bool {
        self.slashed_only
    }

    fn check_point(&self, p: &BundlePoint) -> Result<()> {
        if p.level() != self.level || p.n() != self.n {
            return Err(Error::LevelMismatch(format!(
                "vector field lives at level {} (n = {}), point at level {} (n = {})",
                self.level,
                self.n,
                p.level(),
                p.n()
            )));
        }
        Ok(())
    }

    /// Component values at a point.
    pub fn value(&self, p: &BundlePoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.comps.iter().map(|f| f.value_slice(p.coords())).collect()
    }

    pub(crate) fn value_slice(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.comps.iter().map(|f| f.value_slice(c)).collect()
    }

    pub(crate) fn value_slice_gen<S: FieldScalar>(
        &self,
        c: &[S],
        ord: Order,
    ) -> Result<Vec<Jet2<S>>> {
        self.comps.iter().map(|f| f.jet_gen(c, ord)).collect()
    }

    /// Applies the field to a scalar as a derivation, A(f).
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.level() != self.level || f.n() != self.n {
            return Err(Error::LevelMismatch(
                "can only apply a vector field to a scalar at its own level".into(),
            ));
        }
        let smooth = f.smooth_at_zero() && !self.slashed_only;
        Ok(ScalarField::from_parts(
            self.level,
            self.n,
            smooth,
            FieldKind::VApply(Arc::new(self.clone()), Arc::new(f.clone())),
        ))
    }

    /// Vertical lift to the next level. Defined for levels 0 and 1.
    pub fn vlift(&self) -> Result<VectorField> {
        self.vector_lift(false)
    }

    /// Complete lift to the next level. Defined for levels 0 and 1.
    pub fn clift(&self) -> Result<VectorField> {
        self.vector_lift(true)
    }

    fn vector_lift(&self, complete: bool) -> Result<VectorField> {
        if self.level > 1 {
            return Err(Error::Level {
                level: self.level,
                context: "vector lifts are defined from levels 0 and 1",
            });
        }
        let out_level = self.level + 1;
        let dim = self.dim();
        let perm = kappa_permutation(out_level, self.n)?;
        // Components in kappa-ordered slots: vertical (0 | A^v), complete
        // (A^v | A^c); output component j reads slot perm[j].
        let mut pre: Vec<ScalarField> = Vec::with_capacity(2 * dim);
        if complete {
            for f in &self.comps {
                pre.push(f.vlift()?);
            }
            for f in &self.comps {
                pre.push(f.clift()?);
            }
        } else {
            for _ in 0..dim {
                pre.push(ScalarField::constant(out_level, self.n, 0.0));
            }
            for f in &self.comps {
                pre.push(f.vlift()?);
            }
        }
        let comps: Vec<ScalarField> = perm.iter().map(|&s| pre[s].clone()).collect();
        VectorField::new(out_level, self.n, comps)
    }
}

/// Lie bracket [A, B] at a common level.
pub fn lie_bracket(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    if a.level() != b.level() || a.n() != b.n() {
        return Err(Error::LevelMismatch("bracket over mixed levels".into()));
    }
    let (level, n) = (a.level(), a.n());
    let aa = Arc::new(a.clone());
    let bb = Arc::new(b.clone());
    let smooth = !a.slashed_only() && !b.slashed_only();
    let comps = (0..a.dim())
        .map(|k| {
            ScalarField::from_parts(
                level,
                n,
                smooth,
                FieldKind::BracketComp(aa.clone(), bb.clone(), k),
            )
        })
        .collect();
    VectorField::new(level, n, comps)
}

/// Positive fiber scaling: multiplies the second coordinate half by lambda.
pub fn scale_fiber(p: &BundlePoint, lambda: f64) -> BundlePoint {
    let mut coords = p.coords().to_vec();
    let half = coords.len() / 2;
    for c in coords.iter_mut().skip(half) {
        *c *= lambda;
    }
    BundlePoint::new(p.level(), p.n(), coords).expect("same shape")
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HomogeneityReport {
    pub degree: f64,
    pub max_euler_residual: f64,
    /// Scaling-law residual; `None` for vector fields, where only the
    /// bracket (Euler) criterion applies.
    pub max_scaling_residual: Option<f64>,
    pub pass: bool,
}

const SCALING_FACTORS: [f64; 3] = [0.5, 2.0, 3.0];

/// Positive fiber homogeneity of degree `degree` for a scalar field, via the
/// Euler criterion C_r(f) = degree * f and the scaling law
/// f(h_lambda(p)) = lambda^degree f(p).
pub fn check_homogeneous_scalar(
    f: &ScalarField,
    degree: f64,
    samples: &[BundlePoint],
    tol: f64,
) -> Result<HomogeneityReport> {
    if f.level() == 0 {
        return Err(Error::Level {
            level: 0,
            context: "homogeneity is about the fiber; needs level >= 1",
        });
    }
    let dim = f.dim();
    let half = dim / 2;
    let mut max_euler = 0.0f64;
    let mut max_scaling = 0.0f64;
    for p in samples {
        let j = f.jet1(p)?;
        let c = p.coords();
        let mut euler = 0.0;
        for i in half..dim {
            euler += c[i] * j.grad[i];
        }
        let denom = 1.0f64.max(j.value.abs()).max(euler.abs());
        max_euler = max_euler.max((euler - degree * j.value).abs() / denom);
        for lam in SCALING_FACTORS {
            let scaled = scale_fiber(p, lam);
            let fs = f.value(&scaled)?;
            let expect = lam.powf(degree) * j.value;
            let denom = 1.0f64.max(expect.abs());
            max_scaling = max_scaling.max((fs - expect).abs() / denom);
        }
    }
    Ok(HomogeneityReport {
        degree,
        max_euler_residual: max_euler,
        max_scaling_residual: Some(max_scaling),
        pass: max_euler < tol && max_scaling < tol,
    })
}

/// Positive fiber homogeneity of degree `degree` for a vector field, via the
/// bracket criterion [C_r, A] = (degree - 1) A.
pub fn check_homogeneous_vector(
    a: &VectorField,
    degree: f64,
    samples: &[BundlePoint],
    tol: f64,
) -> Result<HomogeneityReport> {
    let c_field = VectorField::liouville(a.level(), a.n())?;
    let bracket = lie_bracket(&c_field, a)?;
    let mut max_euler = 0.0f64;
    for p in samples {
        let bv = bracket.value(p)?;
        let av = a.value(p)?;
        for k in 0..a.dim() {
            let denom = 1.0f64.max(av[k].abs());
            max_euler = max_euler.max((bv[k] - (degree - 1.0) * av[k]).abs() / denom);
        }
    }
    Ok(HomogeneityReport {
        degree,
        max_euler_residual: max_euler,
        max_scaling_residual: None,
        pass: max_euler < tol,
    })
}
