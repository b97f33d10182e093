//! Built-in model catalog: a small set of semisprays, metrics,
//! Lagrangians, and connections with known closed-form behavior, usable
//! by name from the command line and the self-check suite.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::models::{Connection, Lagrangian, Metric};
use crate::semispray::Semispray;

/// A named model, in whichever geometric form it is naturally given.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Semispray(Semispray),
    Metric(Metric),
    Lagrangian(Lagrangian),
    Connection(Connection),
}

impl ModelSpec {
    /// The canonical level-1 semispray this model induces.
    pub fn semispray(&self) -> Result<Semispray> {
        match self {
            ModelSpec::Semispray(s) => Ok(s.clone()),
            ModelSpec::Metric(m) => m.geodesic_spray(),
            ModelSpec::Lagrangian(l) => l.semispray(),
            ModelSpec::Connection(c) => c.spray(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Semispray(s) => s.n(),
            ModelSpec::Metric(m) => m.n(),
            ModelSpec::Lagrangian(l) => l.n(),
            ModelSpec::Connection(c) => c.n(),
        }
    }
}

/// Flat semispray with vanishing coefficients: geodesics are straight
/// lines and Jacobi fields are affine in time.
pub fn euclidean(n: usize) -> Result<Semispray> {
    let coeffs = (0..n).map(|_| ScalarField::constant(1, n, 0.0)).collect();
    Semispray::new(1, n, coeffs)
}

/// Harmonic oscillator semispray on the line: the geodesic equation is
/// x'' + x = 0.
pub fn oscillator() -> Result<Semispray> {
    Semispray::from_sources(1, 1, &["x1/2"])
}

/// Lagrangian whose extremals are the oscillator's trajectories, with
/// energy x^2 + y^2.
pub fn oscillator_lagrangian() -> Result<Lagrangian> {
    Lagrangian::from_source(1, "y1^2 - x1^2")
}

/// Positively 2-homogeneous spray with coefficients |y| y^i; smooth only
/// on the slashed bundle.
pub fn funk(n: usize) -> Result<Semispray> {
    if n == 0 {
        return Err(Error::Input("spray needs at least one dimension".into()));
    }
    let norm_sq = (1..=n)
        .map(|i| format!("y{i}^2"))
        .collect::<Vec<_>>()
        .join(" + ");
    let sources: Vec<String> = (1..=n)
        .map(|i| format!("sqrt({norm_sq}) * y{i}"))
        .collect();
    let refs: Vec<&str> = sources.iter().map(|s| s.as_str()).collect();
    Semispray::from_sources(1, n, &refs)
}

/// Diagonal surface metric diag(1, 1 + x1^2): curved but with polynomial
/// Christoffel data, convenient for convergence measurements.
pub fn diag_metric() -> Result<Metric> {
    Metric::from_sources(2, &["1", "0", "0", "1 + x1^2"])
}

/// Affine connection on the line with gamma = 1: the geodesic from the
/// origin with unit speed is x(t) = log(1 + t).
pub fn log_affine() -> Result<Connection> {
    Connection::from_sources(1, &["1"])
}

/// All builtin names, sorted.
pub fn builtin_names() -> Vec<&'static str> {
    vec![
        "diag-metric",
        "euclidean-1",
        "euclidean-2",
        "euclidean-3",
        "funk-1",
        "funk-2",
        "funk-3",
        "log-affine",
        "oscillator",
        "oscillator-lagrangian",
    ]
}

/// Looks a builtin model up by name.
pub fn builtin(name: &str) -> Result<ModelSpec> {
    match name {
        "euclidean-1" => euclidean(1).map(ModelSpec::Semispray),
        "euclidean-2" => euclidean(2).map(ModelSpec::Semispray),
        "euclidean-3" => euclidean(3).map(ModelSpec::Semispray),
        "oscillator" => oscillator().map(ModelSpec::Semispray),
        "oscillator-lagrangian" => oscillator_lagrangian().map(ModelSpec::Lagrangian),
        "funk-1" => funk(1).map(ModelSpec::Semispray),
        "funk-2" => funk(2).map(ModelSpec::Semispray),
        "funk-3" => funk(3).map(ModelSpec::Semispray),
        "diag-metric" => diag_metric().map(ModelSpec::Metric),
        "log-affine" => log_affine().map(ModelSpec::Connection),
        other => Err(Error::Input(format!(
            "unknown builtin model `{other}`; available: {}",
            builtin_names().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::BundlePoint;

    #[test]
    fn every_builtin_constructs_and_induces_a_semispray() {
        for name in builtin_names() {
            let spec = builtin(name).unwrap();
            let s = spec.semispray().unwrap();
            assert_eq!(s.level(), 1, "{name}");
            assert_eq!(s.n(), spec.n(), "{name}");
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn catalog_hand_values() {
        let p = BundlePoint::new(1, 2, vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        let f = funk(2).unwrap();
        assert!((f.coeffs()[0].value(&p).unwrap() - 15.0).abs() < 1e-12);
        assert!((f.coeffs()[1].value(&p).unwrap() - 20.0).abs() < 1e-12);
        assert!(f.as_vector_field().slashed_only());

        let m = diag_metric().unwrap().geodesic_spray().unwrap();
        let q = BundlePoint::new(1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((m.coeffs()[0].value(&q).unwrap() + 0.5).abs() < 1e-12);
        assert!(m.coeffs()[1].value(&q).unwrap().abs() < 1e-12);

        let a = log_affine().unwrap().spray().unwrap();
        let r = BundlePoint::new(1, 1, vec![0.0, 1.0]).unwrap();
        assert!((a.coeffs()[0].value(&r).unwrap() - 0.5).abs() < 1e-12);

        let o = oscillator_lagrangian().unwrap().semispray().unwrap();
        let w = BundlePoint::new(1, 1, vec![1.0, 2.0]).unwrap();
        assert!((o.coeffs()[0].value(&w).unwrap() - 0.5).abs() < 1e-12);
    }
}
