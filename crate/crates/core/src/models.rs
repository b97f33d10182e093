//! Geometric models that induce semisprays: semi-Riemannian metrics,
//! regular Lagrangians and affine connections, together with their
//! complete lifts one level up.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{lu_factor, PIVOT_TOL};
use crate::sampling::sample_points;
use crate::semispray::Semispray;

const VALIDATION_SEED: u64 = 77;
const CERTIFICATE_POINTS: usize = 32;

/// A symmetric m x m metric whose entries are scalar fields in the base
/// coordinates of `entry_level` (0 for a metric on M, 1 for a lifted metric
/// on TM). Entries are stored row-major.
#[derive(Debug, Clone)]
pub struct Metric {
    entry_level: u8,
    n: usize,
    m: usize,
    entries: Arc<Vec<ScalarField>>,
}

impl Metric {
    pub fn new(entry_level: u8, n: usize, entries: Vec<ScalarField>) -> Result<Self> {
        if entry_level > 1 {
            return Err(Error::Level {
                level: entry_level,
                context: "metric entries live at level 0 or 1",
            });
        }
        let m = (1usize << entry_level) * n;
        if entries.len() != m * m {
            return Err(Error::Dimension {
                expected: m * m,
                got: entries.len(),
            });
        }
        if entries.iter().any(|f| f.level() != entry_level || f.n() != n) {
            return Err(Error::LevelMismatch(
                "metric entries must share the declared level".into(),
            ));
        }
        let metric = Self {
            entry_level,
            n,
            m,
            entries: Arc::new(entries),
        };
        metric.validate()?;
        Ok(metric)
    }

    /// Base metric (level-0 entries) from expression sources in x1..xn.
    pub fn from_sources(n: usize, sources: &[&str]) -> Result<Self> {
        let entries = sources
            .iter()
            .map(|s| ScalarField::from_source(0, n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(0, n, entries)
    }

    /// Symmetry and invertibility at a fixed seeded point set.
    fn validate(&self) -> Result<()> {
        let pts = sample_points(
            self.entry_level,
            self.n,
            8,
            VALIDATION_SEED,
            -1.5,
            1.5,
            0.5,
        );
        for p in &pts {
            let vals = self.values(p.coords())?;
            for i in 0..self.m {
                for j in (i + 1)..self.m {
                    let (a, b) = (vals[i * self.m + j], vals[j * self.m + i]);
                    if (a - b).abs() > 1e-12 * 1.0f64.max(a.abs()) {
                        return Err(Error::Input(format!(
                            "metric entries are not symmetric: g[{i}][{j}] = {a}, g[{j}][{i}] = {b}"
                        )));
                    }
                }
            }
            lu_factor(vals, self.m, PIVOT_TOL).map_err(|e| match e {
                Error::SingularMatrix { pivot } => Error::SingularMetric { pivot },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn entry_level(&self) -> u8 {
        self.entry_level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Matrix size.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// Entry values at base coordinates, row-major.
    pub fn values(&self, base: &[f64]) -> Result<Vec<f64>> {
        self.entries.iter().map(|f| f.value_slice(base)).collect()
    }

    fn smooth(&self) -> bool {
        self.entries.iter().all(|f| f.smooth_at_zero())
    }

    /// The geodesic semispray: coefficients solve the metric's geodesic
    /// equations via first jets of the entries and a linear solve.
    pub fn geodesic_spray(&self) -> Result<Semispray> {
        let level = self.entry_level + 1;
        let smooth = self.smooth();
        let coeffs = (0..self.m)
            .map(|index| {
                ScalarField::christoffel(
                    self.entries.clone(),
                    self.entry_level,
                    self.n,
                    self.m,
                    index,
                    smooth,
                )
            })
            .collect();
        Semispray::new(level, self.n, coeffs)
    }

    /// Complete lift to a 2m x 2m metric on the next level, in blocks
    /// [[g^c, g^v], [g^v, 0]] entrywise.
    pub fn complete_lift(&self) -> Result<Metric> {
        if self.entry_level != 0 {
            return Err(Error::Level {
                level: self.entry_level,
                context: "metric complete lift starts from level-0 entries",
            });
        }
        let m2 = 2 * self.m;
        let mut entries = Vec::with_capacity(m2 * m2);
        for i in 0..m2 {
            for j in 0..m2 {
                let field = match (i < self.m, j < self.m) {
                    (true, true) => self.entries[i * self.m + j].clift()?,
                    (true, false) => self.entries[i * self.m + (j - self.m)].vlift()?,
                    (false, true) => self.entries[(i - self.m) * self.m + j].vlift()?,
                    (false, false) => ScalarField::constant(1, self.n, 0.0),
                };
                entries.push(field);
            }
        }
        Metric::new(1, self.n, entries)
    }

    /// The quadratic energy Lagrangian g_ij(base) fiber^i fiber^j one level
    /// above the entries.
    pub fn energy_lagrangian(&self) -> Result<Lagrangian> {
        let level = self.entry_level + 1;
        let mut terms = Vec::with_capacity(self.m * self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                let wi = ScalarField::coord(level, self.n, self.m + i)?;
                let wj = ScalarField::coord(level, self.n, self.m + j)?;
                let pulled = self.entries[i * self.m + j].proj_pullback()?;
                terms.push(ScalarField::product(ScalarField::product(pulled, wi)?, wj)?);
            }
        }
        Lagrangian::new(ScalarField::sum(terms)?)
    }
}

/// Record of a fiber-Hessian rank check over a seeded point set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RegularityCertificate {
    pub samples: usize,
    pub min_pivot: f64,
    pub full_rank: bool,
}

fn fiber_hessian_certificate(field: &ScalarField) -> Result<RegularityCertificate> {
    let half = field.dim() / 2;
    let pts = sample_points(
        field.level(),
        field.n(),
        CERTIFICATE_POINTS,
        VALIDATION_SEED,
        -1.5,
        1.5,
        0.5,
    );
    let mut min_pivot = f64::INFINITY;
    let mut full_rank = true;
    for p in &pts {
        let j = field.jet2(p)?;
        let mut h = Vec::with_capacity(half * half);
        for a in 0..half {
            for b in 0..half {
                h.push(0.5 * j.hess.get(half + a, half + b));
            }
        }
        match lu_factor(h, half, PIVOT_TOL) {
            Ok(lu) => min_pivot = min_pivot.min(lu.min_pivot),
            Err(Error::SingularMatrix { pivot }) => {
                min_pivot = min_pivot.min(pivot);
                full_rank = false;
            }
            Err(other) => return Err(other),
        }
    }
    Ok(RegularityCertificate {
        samples: pts.len(),
        min_pivot,
        full_rank,
    })
}

/// A Lagrangian with a regularity certificate: the fiber Hessian
/// (1/2) d2L/dfiber dfiber has full rank at the certified samples.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    field: ScalarField,
    certificate: RegularityCertificate,
}

impl Lagrangian {
    /// Certifies regularity on construction; a rank drop at any sampled
    /// point is a `DegenerateLagrangian` error.
    pub fn new(field: ScalarField) -> Result<Self> {
        if !(1..=2).contains(&field.level()) {
            return Err(Error::Level {
                level: field.level(),
                context: "Lagrangians live at level 1 or 2",
            });
        }
        let certificate = fiber_hessian_certificate(&field)?;
        if !certificate.full_rank {
            return Err(Error::DegenerateLagrangian {
                pivot: certificate.min_pivot,
            });
        }
        Ok(Self { field, certificate })
    }

    pub fn from_source(n: usize, source: &str) -> Result<Self> {
        Self::new(ScalarField::from_source(1, n, source)?)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn certificate(&self) -> &RegularityCertificate {
        &self.certificate
    }

    pub fn level(&self) -> u8 {
        self.field.level()
    }

    pub fn n(&self) -> usize {
        self.field.n()
    }

    /// The Euler-Lagrange semispray, evaluated pointwise through second
    /// jets of L and a fiber-Hessian solve.
    pub fn semispray(&self) -> Result<Semispray> {
        let half = self.field.dim() / 2;
        let shared = Arc::new(self.field.clone());
        let coeffs = (0..half)
            .map(|index| ScalarField::euler_lagrange(shared.clone(), index))
            .collect();
        Semispray::new(self.field.level(), self.field.n(), coeffs)
    }

    /// Complete lift L^c one level up. The lift of a regular Lagrangian is
    /// regular; the refreshed certificate records the numerical check.
    pub fn complete_lift(&self) -> Result<Lagrangian> {
        let lifted = self.field.clift()?;
        let certificate = fiber_hessian_certificate(&lifted)?;
        Ok(Self {
            field: lifted,
            certificate,
        })
    }

    /// Energy E_L: the Liouville derivative of L minus L.
    pub fn energy(&self) -> Result<ScalarField> {
        let c = crate::fields::VectorField::liouville(self.field.level(), self.field.n())?;
        ScalarField::difference(c.apply(&self.field)?, self.field.clone())
    }
}

/// An affine connection: n^3 coefficient fields gamma^i_jk(x) stored as
/// [i][j][k] row-major, symmetric in (j, k).
#[derive(Debug, Clone)]
pub struct Connection {
    n: usize,
    gammas: Vec<ScalarField>,
}

impl Connection {
    pub fn new(n: usize, gammas: Vec<ScalarField>) -> Result<Self> {
        if gammas.len() != n * n * n {
            return Err(Error::Dimension {
                expected: n * n * n,
                got: gammas.len(),
            });
        }
        if gammas.iter().any(|f| f.level() != 0 || f.n() != n) {
            return Err(Error::LevelMismatch(
                "connection coefficients are level-0 fields".into(),
            ));
        }
        let conn = Self { n, gammas };
        conn.validate_symmetry()?;
        Ok(conn)
    }

    pub fn from_sources(n: usize, sources: &[&str]) -> Result<Self> {
        let gammas = sources
            .iter()
            .map(|s| ScalarField::from_source(0, n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, gammas)
    }

    fn validate_symmetry(&self) -> Result<()> {
        let pts = sample_points(0, self.n, 8, VALIDATION_SEED, -1.5, 1.5, 0.5);
        for p in &pts {
            for i in 0..self.n {
                for j in 0..self.n {
                    for k in (j + 1)..self.n {
                        let a = self.gamma(i, j, k).value(p)?;
                        let b = self.gamma(i, k, j).value(p)?;
                        if (a - b).abs() > 1e-12 * 1.0f64.max(a.abs()) {
                            return Err(Error::Input(format!(
                                "connection coefficients are not symmetric in the lower \
                                 indices: gamma^{i}_{j}{k} = {a}, gamma^{i}_{k}{j} = {b}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self, i: usize, j: usize, k: usize) -> &ScalarField {
        &self.gammas[(i * self.n + j) * self.n + k]
    }

    /// The affine spray 2G^i = gamma^i_jk y^j y^k, built from combinators;
    /// globally smooth.
    pub fn spray(&self) -> Result<Semispray> {
        let n = self.n;
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let mut terms = Vec::with_capacity(n * n);
            for j in 0..n {
                for k in 0..n {
                    let yj = ScalarField::coord(1, n, n + j)?;
                    let yk = ScalarField::coord(1, n, n + k)?;
                    let pulled = self.gamma(i, j, k).proj_pullback()?;
                    terms.push(ScalarField::scale(
                        0.5,
                        ScalarField::product(ScalarField::product(pulled, yj)?, yk)?,
                    ));
                }
            }
            coeffs.push(ScalarField::sum(terms)?);
        }
        Semispray::new(1, n, coeffs)
    }

    /// The level-2 spray induced by the lifted connection, realized as the
    /// complete lift of the affine spray.
    pub fn complete_lift_spray(&self) -> Result<Semispray> {
        self.spray()?.complete_lift()
    }
}

/// Max relative coefficient difference of two semisprays over sample points.
pub fn max_coeff_difference(
    a: &Semispray,
    b: &Semispray,
    samples: &[crate::chart::BundlePoint],
) -> Result<f64> {
    if a.level() != b.level() || a.n() != b.n() {
        return Err(Error::LevelMismatch(
            "coefficient comparison needs matching semispray levels".into(),
        ));
    }
    let mut worst = 0.0f64;
    for p in samples {
        for (ga, gb) in a.coeffs().iter().zip(b.coeffs()) {
            let va = ga.value(p)?;
            let vb = gb.value(p)?;
            worst = worst.max((va - vb).abs() / 1.0f64.max(va.abs()).max(vb.abs()));
        }
    }
    Ok(worst)
}

/// Max relative difference between a Lagrangian-style scalar and another
/// scalar field at sample points.
pub fn max_scalar_difference(
    a: &ScalarField,
    b: &ScalarField,
    samples: &[crate::chart::BundlePoint],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        let va = a.value(p)?;
        let vb = b.value(p)?;
        worst = worst.max((va - vb).abs() / 1.0f64.max(va.abs()).max(vb.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::BundlePoint;
    use crate::sampling::sample_slashed;

    fn pt(level: u8, n: usize, coords: &[f64]) -> BundlePoint {
        BundlePoint::new(level, n, coords.to_vec()).unwrap()
    }

    fn diag_metric() -> Metric {
        Metric::from_sources(2, &["1", "0", "0", "x1^2 + 1"]).unwrap()
    }

    #[test]
    fn identity_metric_is_flat() {
        let g = Metric::from_sources(2, &["1", "0", "0", "1"]).unwrap();
        let s = g.geodesic_spray().unwrap();
        for p in sample_slashed(1, 2, 10, 5) {
            for c in s.coeffs() {
                assert!(c.value(&p).unwrap().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diag_metric_hand_values() {
        let s = diag_metric().geodesic_spray().unwrap();
        let p = pt(1, 2, &[1.0, 0.0, 0.0, 1.0]);
        let g1 = s.coeffs()[0].value(&p).unwrap();
        let g2 = s.coeffs()[1].value(&p).unwrap();
        assert!((g1 - (-0.5)).abs() < 1e-14, "G1 = {g1}");
        assert!(g2.abs() < 1e-14, "G2 = {g2}");
        // Christoffel coefficients are invariant under constant rescaling.
        let doubled = Metric::from_sources(2, &["2", "0", "0", "2*(x1^2 + 1)"]).unwrap();
        let sd = doubled.geodesic_spray().unwrap();
        for q in sample_slashed(1, 2, 20, 6) {
            for (a, b) in s.coeffs().iter().zip(sd.coeffs()) {
                assert!((a.value(&q).unwrap() - b.value(&q).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_metric_is_rejected() {
        let r = Metric::from_sources(2, &["1", "0", "0", "0"]);
        assert!(matches!(r, Err(Error::SingularMetric { .. })));
        let asym = Metric::from_sources(2, &["1", "x1", "0", "1"]);
        assert!(matches!(asym, Err(Error::Input(_))));
    }

    #[test]
    fn metric_complete_lift_blocks() {
        let id = Metric::from_sources(2, &["1", "0", "0", "1"]).unwrap();
        let lifted = id.complete_lift().unwrap();
        assert_eq!(lifted.m(), 4);
        let p = pt(1, 2, &[0.3, -0.7, 1.1, 0.4]);
        let vals = lifted.values(p.coords()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i < 2) != (j < 2) && i % 2 == j % 2 { 1.0 } else { 0.0 };
                assert_eq!(vals[i * 4 + j], expect, "entry ({i},{j})");
            }
        }
        // diag metric: upper-left block of the lift at y = (1, 0) is
        // diag(0, 2 x1).
        let dl = diag_metric().complete_lift().unwrap();
        let q = pt(1, 2, &[1.3, 0.9, 1.0, 0.0]);
        let v = dl.values(q.coords()).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[4], 0.0);
        assert!((v[5] - 2.0 * 1.3).abs() < 1e-14);
    }

    #[test]
    fn metric_lift_commutes_with_spray_lift() {
        let g = diag_metric();
        let lhs = g.geodesic_spray().unwrap().complete_lift().unwrap();
        let rhs = g.complete_lift().unwrap().geodesic_spray().unwrap();
        let samples = sample_slashed(2, 2, 60, 9);
        let d = max_coeff_difference(&lhs, &rhs, &samples).unwrap();
        assert!(d < 1e-9, "residual {d}");
    }

    #[test]
    fn lagrangian_sprays() {
        let osc = Lagrangian::from_source(1, "y1^2 - x1^2").unwrap();
        assert!(osc.certificate().full_rank);
        let s = osc.semispray().unwrap();
        let p = pt(1, 1, &[1.0, 0.3]);
        assert!((s.coeffs()[0].value(&p).unwrap() - 0.5).abs() < 1e-12);
        // Indefinite fiber Hessian, still regular.
        let cross = Lagrangian::from_source(2, "y1*y2").unwrap();
        let sc = cross.semispray().unwrap();
        for q in sample_slashed(1, 2, 10, 12) {
            for c in sc.coeffs() {
                assert!(c.value(&q).unwrap().abs() < 1e-12);
            }
        }
        // Degenerate Lagrangian is rejected.
        assert!(matches!(
            Lagrangian::from_source(1, "y1"),
            Err(Error::DegenerateLagrangian { .. })
        ));
    }

    #[test]
    fn energy_lagrangian_matches_christoffel_route() {
        let g = diag_metric();
        let lg = g.energy_lagrangian().unwrap();
        let from_l = lg.semispray().unwrap();
        let from_g = g.geodesic_spray().unwrap();
        let samples = sample_slashed(1, 2, 40, 13);
        let d = max_coeff_difference(&from_l, &from_g, &samples).unwrap();
        assert!(d < 1e-10, "residual {d}");
    }

    #[test]
    fn lagrangian_lift_commutes_with_spray_lift() {
        let osc = Lagrangian::from_source(1, "y1^2 - x1^2").unwrap();
        let lhs = osc.semispray().unwrap().complete_lift().unwrap();
        let rhs = osc.complete_lift().unwrap().semispray().unwrap();
        let samples = sample_slashed(2, 1, 60, 14);
        let d = max_coeff_difference(&lhs, &rhs, &samples).unwrap();
        assert!(d < 1e-8, "residual {d}");
        // The lifted oscillator Lagrangian in closed form: -2xy + 2XY.
        let xi = pt(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        let v = rhs.coeffs();
        assert_eq!(v.len(), 2);
        let lc = osc.complete_lift().unwrap();
        assert!((lc.field().value(&xi).unwrap() - (-2.0 * 1.0 * 2.0 + 2.0 * 3.0 * 4.0)).abs() < 1e-12);
        assert!(lc.certificate().full_rank);
    }

    #[test]
    fn lifted_energy_lagrangian_is_lift_of_energy_lagrangian() {
        let g = diag_metric();
        let lhs = g.energy_lagrangian().unwrap().complete_lift().unwrap();
        let rhs = g.complete_lift().unwrap().energy_lagrangian().unwrap();
        let samples = sample_slashed(2, 2, 60, 15);
        let d = max_scalar_difference(lhs.field(), rhs.field(), &samples).unwrap();
        assert!(d < 1e-10, "residual {d}");
    }

    #[test]
    fn connection_sprays() {
        let log = Connection::from_sources(1, &["1"]).unwrap();
        let s = log.spray().unwrap();
        let p = pt(1, 1, &[0.0, 1.0]);
        assert!((s.coeffs()[0].value(&p).unwrap() - 0.5).abs() < 1e-15);
        assert!(s
            .is_spray(&sample_slashed(1, 1, 16, 17), 1e-9)
            .unwrap()
            .pass);
        // Lifted coefficients at the pinned point.
        let lifted = log.complete_lift_spray().unwrap();
        let xi = pt(2, 1, &[0.0, 1.0, 2.0, 3.0]);
        assert!((lifted.coeffs()[0].value(&xi).unwrap() - 2.0).abs() < 1e-15);
        assert!((lifted.coeffs()[1].value(&xi).unwrap() - 6.0).abs() < 1e-15);
        // Hand-computed Christoffels of the diag metric as a connection
        // reproduce the metric spray exactly.
        let conn = Connection::from_sources(
            2,
            &[
                "0", "0", "0", "-x1",
                "0", "x1/(x1^2 + 1)", "x1/(x1^2 + 1)", "0",
            ],
        )
        .unwrap();
        let via_conn = conn.spray().unwrap();
        let via_metric = diag_metric().geodesic_spray().unwrap();
        let samples = sample_slashed(1, 2, 30, 18);
        let d = max_coeff_difference(&via_conn, &via_metric, &samples).unwrap();
        assert!(d < 1e-12, "residual {d}");
        // Asymmetric lower indices are rejected.
        let bad = Connection::from_sources(2, &["0", "1", "0", "0", "0", "0", "0", "0"]);
        assert!(matches!(bad, Err(Error::Input(_))));
    }
}
