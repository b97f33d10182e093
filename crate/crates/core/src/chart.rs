//! Points of the iterated tangent bundles T^r M for r <= 3 over a single
//! global chart, together with the canonical involutions kappa_r and the
//! bundle projections.
//!
//! A point of T^r M is stored as a flat coordinate vector of length 2^r * n
//! in block order:
//!
//! - level 0: (x)
//! - level 1: (x, y)
//! - level 2: (x, y, X, Y)
//! - level 3: (x, y, X, Y, u, v, U, V)
//!
//! where each block has length n. A level-(r+1) point is the pair
//! (p, dp) of a level-r point and a tangent increment, concatenated.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_LEVEL: u8 = 3;

/// A point of T^r M in the global chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundlePoint {
    level: u8,
    n: usize,
    coords: Vec<f64>,
}

impl BundlePoint {
    /// Builds a point at the given level; `coords.len()` must be `2^level * n`.
    pub fn new(level: u8, n: usize, coords: Vec<f64>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Level {
                level,
                context: "bundle points are supported up to level 3",
            });
        }
        if n == 0 {
            return Err(Error::Input("base dimension must be at least 1".into()));
        }
        let expected = (1usize << level) * n;
        if coords.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: coords.len(),
            });
        }
        Ok(Self { level, n, coords })
    }

    /// A base point (level 0).
    pub fn base(coords: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        Self::new(0, n, coords)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Global chart data: base dimension plus an optional open box that flows are
/// confined to (checked on the base block only).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSpec {
    pub n: usize,
    /// Open box (lower, upper) in the base coordinates; `None` means all of R^n.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl ChartSpec {
    pub fn unbounded(n: usize) -> Self {
        Self { n, bounds: None }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Input(
                "chart bounds must be nonempty vectors of equal length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Input("chart bounds must satisfy lower < upper".into()));
        }
        Ok(Self {
            n: lower.len(),
            bounds: Some((lower, upper)),
        })
    }

    /// Whether the base block of `p` lies inside the (open) box.
    pub fn contains(&self, p: &BundlePoint) -> bool {
        match &self.bounds {
            None => true,
            Some((lo, hi)) => {
                let x = &p.coords()[..p.n()];
                x.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(xi, (l, u))| l < xi && xi < u)
            }
        }
    }
}

/// Index permutation realizing kappa_r at the given level: the output point
/// has `out[j] = in[perm[j]]`.
///
/// kappa_1 = id, kappa_2 (x,y,X,Y) = (x,X,y,Y),
/// kappa_3 (x,y,X,Y,u,v,U,V) = (x,y,u,v,X,Y,U,V).
pub fn kappa_permutation(level: u8, n: usize) -> Result<Vec<usize>> {
    let blocks: &[usize] = match level {
        1 => &[0, 1],
        2 => &[0, 2, 1, 3],
        3 => &[0, 1, 4, 5, 2, 3, 6, 7],
        _ => {
            return Err(Error::Level {
                level,
                context: "kappa is defined for levels 1 through 3",
            })
        }
    };
    let mut perm = Vec::with_capacity(blocks.len() * n);
    for &b in blocks {
        for k in 0..n {
            perm.push(b * n + k);
        }
    }
    Ok(perm)
}

/// The canonical involution kappa_r on T^r M. Errors with `Level` at level 0.
pub fn kappa(p: &BundlePoint) -> Result<BundlePoint> {
    let perm = kappa_permutation(p.level(), p.n())?;
    let src = p.coords();
    let coords = perm.iter().map(|&i| src[i]).collect();
    BundlePoint::new(p.level(), p.n(), coords)
}

/// The bundle projection pi_{r-1}: T^r M -> T^{r-1} M (drop the second half).
pub fn project(p: &BundlePoint) -> Result<BundlePoint> {
    if p.level() == 0 {
        return Err(Error::Level {
            level: 0,
            context: "a base point cannot be projected further",
        });
    }
    let half = p.dim() / 2;
    BundlePoint::new(p.level() - 1, p.n(), p.coords()[..half].to_vec())
}

/// The tangent map D pi_{r-2}: T^r M -> T^{r-1} M, realized through the
/// identity D pi_{r-2} = pi_{r-1} compose kappa_r. Requires level >= 2.
pub fn dprojection(p: &BundlePoint) -> Result<BundlePoint> {
    if p.level() < 2 {
        return Err(Error::Level {
            level: p.level(),
            context: "dprojection needs a point of level 2 or 3",
        });
    }
    project(&kappa(p)?)
}

/// Membership in the slashed bundle: at level 1 the fiber block must have
/// Euclidean norm above `eps_reg`; at higher levels the condition is the
/// recursive one on the dprojected point.
///
/// Level-0 points are never slashed (there is no fiber).
pub fn in_slashed(p: &BundlePoint, eps_reg: f64) -> bool {
    match p.level() {
        0 => false,
        1 => {
            let y = &p.coords()[p.n()..];
            norm(y) > eps_reg
        }
        _ => match dprojection(p) {
            Ok(q) => in_slashed(&q, eps_reg),
            Err(_) => false,
        },
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Coordinate names for a given level, in storage order; used for expression
/// variables and CSV headers.
///
/// Level 0: x1..xn; level 1 appends y1..yn; level 2 appends X1..Xn, Y1..Yn;
/// level 3 appends u1..un, v1..vn, U1..Un, V1..Vn.
pub fn coord_names(level: u8, n: usize) -> Vec<String> {
    let prefixes: &[&str] = match level {
        0 => &["x"],
        1 => &["x", "y"],
        2 => &["x", "y", "X", "Y"],
        _ => &["x", "y", "X", "Y", "u", "v", "U", "V"],
    };
    let mut names = Vec::with_capacity(prefixes.len() * n);
    for p in prefixes {
        for k in 1..=n {
            names.push(format!("{p}{k}"));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(level: u8, n: usize, coords: &[f64]) -> BundlePoint {
        BundlePoint::new(level, n, coords.to_vec()).unwrap()
    }

    #[test]
    fn kappa_level1_is_identity() {
        let p = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kappa(&p).unwrap(), p);
    }

    #[test]
    fn kappa_level2_swaps_middle_blocks() {
        let p = pt(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kappa(&p).unwrap().coords(), &[1.0, 3.0, 2.0, 4.0]);

        let q = pt(2, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(
            kappa(&q).unwrap().coords(),
            &[0.0, 1.0, 4.0, 5.0, 2.0, 3.0, 6.0, 7.0]
        );
    }

    #[test]
    fn kappa_level3_swaps_quarter_blocks() {
        let p = pt(3, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(
            kappa(&p).unwrap().coords(),
            &[1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]
        );
    }

    #[test]
    fn kappa_rejects_base_points() {
        let p = pt(0, 2, &[1.0, 2.0]);
        assert!(matches!(kappa(&p), Err(Error::Level { level: 0, .. })));
    }

    #[test]
    fn projections_drop_trailing_blocks() {
        let p = pt(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(project(&p).unwrap(), pt(1, 1, &[1.0, 2.0]));
        assert_eq!(dprojection(&p).unwrap(), pt(1, 1, &[1.0, 3.0]));

        let q = pt(3, 1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(project(&q).unwrap(), pt(2, 1, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(dprojection(&q).unwrap(), pt(2, 1, &[1.0, 2.0, 5.0, 6.0]));
    }

    #[test]
    fn dprojection_needs_level_two() {
        let p = pt(1, 1, &[1.0, 2.0]);
        assert!(matches!(dprojection(&p), Err(Error::Level { .. })));
    }

    #[test]
    fn slashed_checks_the_right_block() {
        let eps = 1e-12;
        assert!(in_slashed(&pt(1, 2, &[0.0, 0.0, 0.1, 0.0]), eps));
        assert!(!in_slashed(&pt(1, 2, &[5.0, 5.0, 0.0, 0.0]), eps));
        // Level 2: the X block decides, the y block does not.
        assert!(in_slashed(&pt(2, 1, &[0.0, 0.0, 1.0, 0.0]), eps));
        assert!(!in_slashed(&pt(2, 1, &[0.0, 7.0, 0.0, 7.0]), eps));
        // Level 3: the u block decides.
        assert!(in_slashed(
            &pt(3, 1, &[0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]),
            eps
        ));
        assert!(!in_slashed(
            &pt(3, 1, &[1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0]),
            eps
        ));
        // Base points have no fiber.
        assert!(!in_slashed(&pt(0, 1, &[1.0]), eps));
    }

    #[test]
    fn slashed_is_preserved_by_dprojection() {
        let p = pt(3, 2, &[0.0; 16]);
        assert!(!in_slashed(&p, 1e-12));
        let mut c = vec![0.0; 16];
        c[8] = 3.0; // u1
        let q = pt(3, 2, &c);
        assert!(in_slashed(&q, 1e-12));
        assert!(in_slashed(&dprojection(&q).unwrap(), 1e-12));
    }

    #[test]
    fn chart_bounds_check_base_block() {
        let chart = ChartSpec::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(chart.contains(&pt(1, 2, &[0.5, -0.5, 99.0, 99.0])));
        assert!(!chart.contains(&pt(1, 2, &[1.5, 0.0, 0.0, 0.0])));
        // Boundary is excluded (open box).
        assert!(!chart.contains(&pt(0, 2, &[1.0, 0.0])));
    }

    #[test]
    fn coord_names_follow_block_order() {
        assert_eq!(coord_names(1, 2), vec!["x1", "x2", "y1", "y2"]);
        assert_eq!(coord_names(2, 1), vec!["x1", "y1", "X1", "Y1"]);
        assert_eq!(coord_names(3, 1).len(), 8);
    }

    #[test]
    fn dimension_checks_reject_bad_lengths() {
        assert!(matches!(
            BundlePoint::new(2, 2, vec![0.0; 7]),
            Err(Error::Dimension {
                expected: 8,
                got: 7
            })
        ));
        assert!(BundlePoint::new(4, 1, vec![0.0; 16]).is_err());
    }

    /// D of a linear block map sends (p, dp) to (map p, map dp); for the
    /// level-2 dprojection this realizes DD pi_0 on level-3 points.
    fn ddproj(p: &BundlePoint) -> BundlePoint {
        assert_eq!(p.level(), 3);
        let half = p.dim() / 2;
        let dp2 = |c: &[f64]| {
            let q = BundlePoint::new(2, p.n(), c.to_vec()).unwrap();
            dprojection(&q).unwrap().into_coords()
        };
        let mut out = dp2(&p.coords()[..half]);
        out.extend(dp2(&p.coords()[half..]));
        BundlePoint::new(2, p.n(), out).unwrap()
    }

    proptest! {
        #[test]
        fn kappa_is_an_involution(
            level in 1u8..=3,
            n in 1usize..=3,
            seed in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            let dim = (1usize << level) * n;
            let p = pt(level, n, &seed[..dim]);
            prop_assert_eq!(kappa(&kappa(&p).unwrap()).unwrap(), p);
        }

        #[test]
        fn dprojection_commutes_with_kappa(
            level in 2u8..=3,
            n in 1usize..=3,
            seed in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            // D pi_{r-2} = pi_{r-1} compose kappa_r, exercised bit-exactly.
            let dim = (1usize << level) * n;
            let p = pt(level, n, &seed[..dim]);
            prop_assert_eq!(dprojection(&p).unwrap(), project(&kappa(&p).unwrap()).unwrap());
        }

        #[test]
        fn double_projection_intertwines_kappa(
            n in 1usize..=3,
            seed in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            // DD pi_0 compose kappa_3 = kappa_2 compose DD pi_0 on T^3 M.
            let p = pt(3, n, &seed[..8 * n]);
            let lhs = ddproj(&kappa(&p).unwrap());
            let rhs = kappa(&ddproj(&p)).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
