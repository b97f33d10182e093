//! Semisprays on T^r M (r = 1, 2): the coefficient data model, complete and
//! tangent lifts, spray (homogeneity) reports, and projective-relation
//! detection with factor recovery.

use crate::chart::{kappa, BundlePoint};
use crate::error::{Error, Result};
use crate::fields::{
    check_homogeneous_scalar, lie_bracket, HomogeneityReport, ScalarField, VectorField,
};

/// A semispray at level 1 or 2: the vector field
/// `fiber^i d/dbase^i - 2 G^i d/dfiber^i` determined by its coefficients.
/// Level 1 stores n coefficients G^i(x,y); level 2 stores the 2n paired
/// coefficients (G^i, H^i)(x,y,X,Y).
#[derive(Debug, Clone)]
pub struct Semispray {
    level: u8,
    n: usize,
    coeffs: Vec<ScalarField>,
}

impl Semispray {
    pub fn new(level: u8, n: usize, coeffs: Vec<ScalarField>) -> Result<Self> {
        if !(1..=2).contains(&level) {
            return Err(Error::Level {
                level,
                context: "semisprays live at levels 1 and 2",
            });
        }
        let half = (1usize << level) * n / 2;
        if coeffs.len() != half {
            return Err(Error::Dimension {
                expected: half,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|f| f.level() != level || f.n() != n) {
            return Err(Error::LevelMismatch(
                "semispray coefficients must live at the semispray's level".into(),
            ));
        }
        Ok(Self { level, n, coeffs })
    }

    pub fn from_sources(level: u8, n: usize, sources: &[&str]) -> Result<Self> {
        let coeffs = sources
            .iter()
            .map(|s| ScalarField::from_source(level, n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(level, n, coeffs)
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

    pub fn coeffs(&self) -> &[ScalarField] {
        &self.coeffs
    }

    pub fn smooth_at_zero(&self) -> bool {
        self.coeffs.iter().all(|f| f.smooth_at_zero())
    }

    /// The semispray as a vector field: base-block components copy the fiber
    /// coordinates, fiber-block components are -2 G^i.
    pub fn as_vector_field(&self) -> VectorField {
        let dim = self.dim();
        let half = dim / 2;
        let mut comps = Vec::with_capacity(dim);
        for i in 0..half {
            comps.push(ScalarField::coord(self.level, self.n, half + i).expect("in range"));
        }
        for g in &self.coeffs {
            comps.push(ScalarField::scale(-2.0, g.clone()));
        }
        VectorField::new(self.level, self.n, comps).expect("shapes agree")
    }

    /// Complete lift: the level-2 semispray with coefficients
    /// ((G^i)^v, (G^i)^c). Defined for level-1 semisprays.
    pub fn complete_lift(&self) -> Result<Semispray> {
        if self.level != 1 {
            return Err(Error::Level {
                level: self.level,
                context: "complete lift of a semispray starts from level 1",
            });
        }
        let mut coeffs = Vec::with_capacity(2 * self.n);
        for g in &self.coeffs {
            coeffs.push(g.vlift()?);
        }
        for g in &self.coeffs {
            coeffs.push(g.clift()?);
        }
        Semispray::new(2, self.n, coeffs)
    }

    /// Tangent lift S^T: the level-2 vector field whose value at (z, w) is
    /// (S(z), DS(z) w). Not a semispray for nonlinear sprays.
    pub fn tangent_lift(&self) -> Result<VectorField> {
        if self.level != 1 {
            return Err(Error::Level {
                level: self.level,
                context: "tangent lift of a semispray starts from level 1",
            });
        }
        let n = self.n;
        let mut comps = Vec::with_capacity(4 * n);
        for i in 0..n {
            comps.push(ScalarField::coord(2, n, n + i)?);
        }
        for g in &self.coeffs {
            comps.push(ScalarField::scale(-2.0, g.proj_pullback()?));
        }
        for i in 0..n {
            comps.push(ScalarField::coord(2, n, 3 * n + i)?);
        }
        for g in &self.coeffs {
            comps.push(ScalarField::scale(-2.0, g.clift()?.kappa_pullback()?));
        }
        VectorField::new(2, n, comps)
    }

    /// Spray report: bracket criterion [C_r, S] = S and positive
    /// 2-homogeneity of every coefficient, both evaluated at `samples`.
    pub fn is_spray(&self, samples: &[BundlePoint], tol: f64) -> Result<SprayReport> {
        let vf = self.as_vector_field();
        let c = VectorField::liouville(self.level, self.n)?;
        let bracket = lie_bracket(&c, &vf)?;
        let mut bracket_residual = 0.0f64;
        for p in samples {
            let bv = bracket.value(p)?;
            let sv = vf.value(p)?;
            for k in 0..vf.dim() {
                let denom = 1.0f64.max(sv[k].abs());
                bracket_residual = bracket_residual.max((bv[k] - sv[k]).abs() / denom);
            }
        }
        let mut euler = 0.0f64;
        let mut scaling = 0.0f64;
        let mut coeffs_pass = true;
        for g in &self.coeffs {
            let rep = check_homogeneous_scalar(g, 2.0, samples, tol)?;
            euler = euler.max(rep.max_euler_residual);
            scaling = scaling.max(rep.max_scaling_residual.unwrap_or(0.0));
            coeffs_pass &= rep.pass;
        }
        Ok(SprayReport {
            bracket_residual,
            coefficient_euler_residual: euler,
            coefficient_scaling_residual: scaling,
            pass: bracket_residual < tol && coeffs_pass,
        })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SprayReport {
    pub bracket_residual: f64,
    pub coefficient_euler_residual: f64,
    pub coefficient_scaling_residual: f64,
    pub pass: bool,
}

/// Structural semispray test for a vector field: base-block components must
/// equal the fiber coordinates at every sample.
pub fn is_semispray(v: &VectorField, samples: &[BundlePoint], tol: f64) -> Result<bool> {
    let half = v.dim() / 2;
    for p in samples {
        let vals = v.value(p)?;
        let c = p.coords();
        for i in 0..half {
            if (vals[i] - c[half + i]).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Max residual of kappa_{r+1} applied to the full map xi -> (xi, V(xi));
/// zero exactly when V is a semispray.
pub fn kappa_conjugation_residual(v: &VectorField, samples: &[BundlePoint]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        let mut full: Vec<f64> = p.coords().to_vec();
        full.extend(v.value(p)?);
        let graph = BundlePoint::new(v.level() + 1, v.n(), full.clone())?;
        let fixed = kappa(&graph)?;
        for (a, b) in full.iter().zip(fixed.coords()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// A recovered projective factor P with G2^i = G1^i + P * fiber^i.
#[derive(Debug, Clone)]
pub struct ProjectiveFactor {
    pub field: ScalarField,
    pub max_cross_residual: f64,
    pub homogeneity: HomogeneityReport,
}

/// Detects proportionality of the coefficient difference to the fiber:
/// returns the factor P = (G2 - G1)^k / fiber^k (k = argmax |fiber^k|) when
/// all cross-residuals |Delta^i fiber^j - Delta^j fiber^i| stay below `tol`
/// relative to |Delta| |fiber|, and none otherwise.
pub fn projective_factor(
    s1: &Semispray,
    s2: &Semispray,
    samples: &[BundlePoint],
    tol: f64,
) -> Result<Option<ProjectiveFactor>> {
    if s1.level() != s2.level() || s1.n() != s2.n() {
        return Err(Error::Input(
            "projective comparison needs semisprays of one level and dimension".into(),
        ));
    }
    let half = s1.dim() / 2;
    let diffs: Vec<ScalarField> = s1
        .coeffs()
        .iter()
        .zip(s2.coeffs())
        .map(|(g1, g2)| ScalarField::difference(g2.clone(), g1.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut max_cross = 0.0f64;
    for p in samples {
        let c = p.coords();
        let fiber = &c[half..];
        let dvals: Vec<f64> = diffs
            .iter()
            .map(|d| d.value(p))
            .collect::<Result<Vec<_>>>()?;
        let dnorm = dvals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let fnorm = fiber.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let denom = 1.0f64.max(dnorm * fnorm);
        for i in 0..half {
            for j in (i + 1)..half {
                let cross = (dvals[i] * fiber[j] - dvals[j] * fiber[i]).abs();
                max_cross = max_cross.max(cross / denom);
            }
        }
    }
    if max_cross >= tol {
        return Ok(None);
    }
    let field = ScalarField::fiber_quotient(diffs)?;
    let homogeneity = check_homogeneous_scalar(&field, 1.0, samples, tol.max(1e-8))?;
    Ok(Some(ProjectiveFactor {
        field,
        max_cross_residual: max_cross,
        homogeneity,
    }))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RigidityReport {
    /// Cross-residual of the lifted coefficient difference against the
    /// level-2 fiber; `None` when no factor was recovered.
    pub lifted_factor_residual: Option<f64>,
    pub lifted_related: bool,
    pub max_base_coeff_diff: f64,
    pub base_coeffs_equal: bool,
    pub pass: bool,
}

/// Lifted-level rigidity: the complete lifts are projectively related
/// exactly when the base semisprays coincide.
pub fn projective_rigidity_check(
    s1: &Semispray,
    s2: &Semispray,
    base_samples: &[BundlePoint],
    lifted_samples: &[BundlePoint],
    tol: f64,
) -> Result<RigidityReport> {
    let factor = projective_factor(
        &s1.complete_lift()?,
        &s2.complete_lift()?,
        lifted_samples,
        tol,
    )?;
    let mut max_diff = 0.0f64;
    for p in base_samples {
        for (g1, g2) in s1.coeffs().iter().zip(s2.coeffs()) {
            let a = g1.value(p)?;
            let b = g2.value(p)?;
            max_diff = max_diff.max((a - b).abs() / 1.0f64.max(a.abs()).max(b.abs()));
        }
    }
    let base_coeffs_equal = max_diff < tol;
    let lifted_related = factor.is_some();
    Ok(RigidityReport {
        lifted_factor_residual: factor.as_ref().map(|f| f.max_cross_residual),
        lifted_related,
        max_base_coeff_diff: max_diff,
        base_coeffs_equal,
        pass: lifted_related == base_coeffs_equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::kappa_permutation;
    use crate::sampling::sample_slashed;

    fn pt(level: u8, n: usize, coords: &[f64]) -> BundlePoint {
        BundlePoint::new(level, n, coords.to_vec()).unwrap()
    }

    fn euclidean(n: usize) -> Semispray {
        let coeffs = (0..n).map(|_| ScalarField::constant(1, n, 0.0)).collect();
        Semispray::new(1, n, coeffs).unwrap()
    }

    fn oscillator() -> Semispray {
        Semispray::from_sources(1, 1, &["x1/2"]).unwrap()
    }

    fn funk(n: usize) -> Semispray {
        let norm = (1..=n).map(|i| format!("y{i}^2")).collect::<Vec<_>>().join(" + ");
        let sources: Vec<String> = (1..=n)
            .map(|i| format!("sqrt({norm}) * y{i}"))
            .collect();
        let refs: Vec<&str> = sources.iter().map(|s| s.as_str()).collect();
        Semispray::from_sources(1, n, &refs).unwrap()
    }

    #[test]
    fn vector_field_form_matches_hand_values() {
        let e = euclidean(2).as_vector_field();
        assert_eq!(
            e.value(&pt(1, 2, &[0.0, 0.0, 1.0, 2.0])).unwrap(),
            vec![1.0, 2.0, 0.0, 0.0]
        );
        let o = oscillator().as_vector_field();
        assert_eq!(o.value(&pt(1, 1, &[1.0, 2.0])).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn semispray_structure_detection() {
        let samples = sample_slashed(1, 2, 16, 21);
        let e = euclidean(2).as_vector_field();
        assert!(is_semispray(&e, &samples, 1e-12).unwrap());
        let c1 = VectorField::liouville(1, 2).unwrap();
        assert!(!is_semispray(&c1, &samples, 1e-12).unwrap());
        // The tangent lift of a nonlinear spray is not a semispray.
        let st = funk(2).tangent_lift().unwrap();
        let up = sample_slashed(2, 2, 16, 22);
        assert!(!is_semispray(&st, &up, 1e-12).unwrap());
        // But the complete lift always is, and kappa fixes its full map.
        let sc = funk(2).complete_lift().unwrap().as_vector_field();
        assert!(is_semispray(&sc, &up, 1e-12).unwrap());
        assert!(kappa_conjugation_residual(&sc, &up).unwrap() == 0.0);
    }

    #[test]
    fn complete_lift_coefficients_at_hand_point() {
        // G = x/2 lifts to (G)^v(x,y,X,Y) = x/2 and (G)^c = y/2.
        let sc = oscillator().complete_lift().unwrap();
        let xi = pt(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(sc.coeffs()[0].value(&xi).unwrap(), 0.5);
        assert_eq!(sc.coeffs()[1].value(&xi).unwrap(), 1.0);
    }

    #[test]
    fn tangent_lift_is_kappa_conjugate_of_complete_lift() {
        for s in [oscillator(), funk(2)] {
            let n = s.n();
            let sc = s.complete_lift().unwrap().as_vector_field();
            let st = s.tangent_lift().unwrap();
            let perm = kappa_permutation(2, n).unwrap();
            for p in sample_slashed(2, n, 15, 31) {
                // S^c(xi) = Dkappa_2(S^T(kappa_2(xi))) componentwise.
                let swapped = kappa(&p).unwrap();
                let at_swapped = st.value(&swapped).unwrap();
                let lhs = sc.value(&p).unwrap();
                for j in 0..4 * n {
                    let rhs = at_swapped[perm[j]];
                    assert!(
                        (lhs[j] - rhs).abs() < 1e-12,
                        "component {j}: {} vs {}",
                        lhs[j],
                        rhs
                    );
                }
            }
        }
    }

    #[test]
    fn spray_reports() {
        let samples = sample_slashed(1, 2, 32, 41);
        assert!(euclidean(2).is_spray(&samples, 1e-9).unwrap().pass);
        assert!(funk(2).is_spray(&samples, 1e-9).unwrap().pass);
        let one = sample_slashed(1, 1, 32, 42);
        assert!(!oscillator().is_spray(&one, 1e-9).unwrap().pass);
        // Quadratic coefficients form an affine spray.
        let affine = Semispray::from_sources(1, 1, &["y1^2/2"]).unwrap();
        assert!(affine.is_spray(&one, 1e-9).unwrap().pass);
        // Complete lifts of sprays are sprays.
        let up = sample_slashed(2, 2, 32, 43);
        assert!(funk(2)
            .complete_lift()
            .unwrap()
            .is_spray(&up, 1e-9)
            .unwrap()
            .pass);
    }

    #[test]
    fn projective_factor_recovery() {
        let samples = sample_slashed(1, 2, 40, 51);
        let e = euclidean(2);
        let f = funk(2);
        let factor = projective_factor(&e, &f, &samples, 1e-8).unwrap().unwrap();
        let p = factor
            .field
            .value(&pt(1, 2, &[0.0, 0.0, 3.0, 4.0]))
            .unwrap();
        assert!((p - 5.0).abs() < 1e-12);
        assert!(factor.homogeneity.pass);
        // Antisymmetry of the recovered factor.
        let back = projective_factor(&f, &e, &samples, 1e-8).unwrap().unwrap();
        for q in &samples {
            let a = factor.field.value(q).unwrap();
            let b = back.field.value(q).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
        // Identical semisprays: related with factor zero.
        let same = projective_factor(&e, &e, &samples, 1e-8).unwrap().unwrap();
        for q in &samples {
            assert_eq!(same.field.value(q).unwrap(), 0.0);
        }
        // Non-proportional difference: no factor.
        let odd = Semispray::from_sources(1, 2, &["y2^2", "0"]).unwrap();
        assert!(projective_factor(&e, &odd, &samples, 1e-8).unwrap().is_none());
    }

    #[test]
    fn rigidity_of_lifted_sprays() {
        let base = sample_slashed(1, 2, 40, 61);
        let lifted = sample_slashed(2, 2, 40, 62);
        let e = euclidean(2);
        let f = funk(2);
        // Projectively related but distinct: lifts are not related.
        let rep = projective_rigidity_check(&e, &f, &base, &lifted, 1e-8).unwrap();
        assert!(rep.pass && !rep.lifted_related && !rep.base_coeffs_equal);
        // Equal semisprays: lifts related with factor ~ 0.
        let rep = projective_rigidity_check(&e, &e, &base, &lifted, 1e-8).unwrap();
        assert!(rep.pass && rep.lifted_related && rep.base_coeffs_equal);
        // Scaled coefficients (non-projective change): factor none.
        let f11 = Semispray::new(
            1,
            2,
            f.coeffs().iter().map(|g| ScalarField::scale(1.1, g.clone())).collect(),
        )
        .unwrap();
        let rep = projective_rigidity_check(&f, &f11, &base, &lifted, 1e-8).unwrap();
        assert!(rep.pass && !rep.lifted_related && !rep.base_coeffs_equal);
    }
}
