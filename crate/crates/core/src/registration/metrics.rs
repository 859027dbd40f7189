use serde::{Deserialize, Serialize};

use super::transform::{Axis, RigidTransform};
use super::PointSet;
use crate::error::{Error, Result};

/// Index pairs `(model, scene)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correspondence {
    pairs: Vec<(usize, usize)>,
    bijective: bool,
}

impl Correspondence {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        let n = pairs.len();
        let mut seen_m = vec![false; n];
        let mut seen_s = vec![false; n];
        let mut bijective = true;
        for &(m, s) in &pairs {
            if m >= n || s >= n || seen_m[m] || seen_s[s] {
                bijective = false;
                break;
            }
            seen_m[m] = true;
            seen_s[s] = true;
        }
        Correspondence { pairs, bijective }
    }

    pub fn identity(n: usize) -> Self {
        Correspondence {
            pairs: (0..n).map(|i| (i, i)).collect(),
            bijective: true,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_bijective(&self) -> bool {
        self.bijective
    }
}

/// Where the translation-resolved sets are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterTarget {
    /// Mass centres at the origin (Gaussian-kernel pipeline).
    Origin,
    /// Mass centres at `(0.5, ..., 0.5)` inside the unit cube (quantum-kernel
    /// pipeline).
    UnitCube,
}

impl CenterTarget {
    pub fn point(self, dim: usize) -> Vec<f64> {
        match self {
            CenterTarget::Origin => vec![0.0; dim],
            CenterTarget::UnitCube => vec![0.5; dim],
        }
    }
}

/// Result of centring a model/scene pair.
#[derive(Clone, Debug)]
pub struct Centered {
    pub model: PointSet,
    pub scene: PointSet,
    /// Offset added to every model point.
    pub model_offset: Vec<f64>,
    /// Offset added to every scene point.
    pub scene_offset: Vec<f64>,
}

pub fn resolve_translation(m: &PointSet, s: &PointSet, target: CenterTarget) -> Result<Centered> {
    if m.dim() != s.dim() {
        return Err(Error::Shape("model and scene dimensions differ".into()));
    }
    let goal = target.point(m.dim());
    let offset = |ps: &PointSet| -> Result<Vec<f64>> {
        Ok(ps
            .centroid()?
            .iter()
            .zip(&goal)
            .map(|(c, g)| g - c)
            .collect())
    };
    let (model_offset, scene_offset) = (offset(m)?, offset(s)?);
    Ok(Centered {
        model: m.translated(&model_offset),
        scene: s.translated(&scene_offset),
        model_offset,
        scene_offset,
    })
}

/// Closed-form least-squares angle about `axis` for paired, centred points.
pub fn solve_transform_given_correspondence(
    m: &PointSet,
    s: &PointSet,
    c: &Correspondence,
    axis: Option<Axis>,
) -> Result<RigidTransform> {
    if !c.is_bijective() || c.pairs().len() != m.len() || m.len() != s.len() {
        return Err(Error::Shape(
            "correspondence must be a bijection between equal-size sets".into(),
        ));
    }
    if m.dim() != s.dim() {
        return Err(Error::Shape("model and scene dimensions differ".into()));
    }
    if m.dim() == 2 && axis.is_some() {
        return Err(Error::Config("rotation axis given for 2D sets".into()));
    }
    let (u, v) = axis.unwrap_or(Axis::Z).plane();
    let (mut cross, mut dot, mut mass) = (0.0, 0.0, 0.0);
    for &(i, j) in c.pairs() {
        let (a, b) = (m.point(i), s.point(j));
        cross += a[u] * b[v] - a[v] * b[u];
        dot += a[u] * b[u] + a[v] * b[v];
        mass += a[u] * a[u] + a[v] * a[v];
    }
    if mass == 0.0 || (cross == 0.0 && dot == 0.0) {
        return Err(Error::Degenerate(
            "all points lie on the rotation axis".into(),
        ));
    }
    Ok(RigidTransform::rotation(cross.atan2(dot), axis, m.dim()))
}

fn frobenius(ps: &PointSet) -> f64 {
    ps.coords().iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `||T M - S||_F / ||M||_F` with index-aligned correspondence.
pub fn alignment_error(m: &PointSet, s: &PointSet, estimated: &RigidTransform) -> Result<f64> {
    if m.len() != s.len() || m.dim() != s.dim() {
        return Err(Error::Shape(format!(
            "alignment error needs equal sizes, got {} and {}",
            m.len(),
            s.len()
        )));
    }
    let moved = super::apply_transform(estimated, m)?;
    let residual: f64 = moved
        .coords()
        .iter()
        .zip(s.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = frobenius(m);
    if norm == 0.0 {
        return Err(Error::Degenerate("model has zero Frobenius norm".into()));
    }
    Ok(residual / norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleRecord {
    pub gt_angle: f64,
    pub est_angle: Option<f64>,
    pub e: Option<f64>,
    pub e_r: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub e: f64,
    pub sigma: f64,
    #[serde(rename = "e_R")]
    pub e_r: f64,
    #[serde(rename = "sigma_R")]
    pub sigma_r: f64,
    pub per_angle: Vec<AngleRecord>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn from_records(per_angle: Vec<AngleRecord>) -> Self {
        let es: Vec<f64> = per_angle.iter().filter_map(|r| r.e).collect();
        let ers: Vec<f64> = per_angle.iter().filter_map(|r| r.e_r).collect();
        let (e, sigma) = mean_std(&es);
        let (e_r, sigma_r) = mean_std(&ers);
        EvalReport {
            e,
            sigma,
            e_r,
            sigma_r,
            per_angle,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::{apply_transform, make_polygon};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn cloud() -> PointSet {
        PointSet::from_points(&[[1.0, 0.2], [-0.4, 0.9], [0.3, -1.1], [-0.9, 0.0]]).unwrap()
    }

    #[test]
    fn recovers_synthesis_angle() {
        let m = resolve_translation(&cloud(), &cloud(), CenterTarget::Origin)
            .unwrap()
            .model;
        let s = apply_transform(&RigidTransform::rotation(FRAC_PI_3, None, 2), &m).unwrap();
        let t = solve_transform_given_correspondence(&m, &s, &Correspondence::identity(4), None)
            .unwrap();
        assert!((t.angle() - FRAC_PI_3).abs() < 1e-10);
        let t0 = solve_transform_given_correspondence(&m, &m, &Correspondence::identity(4), None)
            .unwrap();
        assert!(t0.angle().abs() < 1e-12);
    }

    #[test]
    fn permuted_square_gives_quarter_turn() {
        // a point on side k of the rotated square lands on side k+1 of the original
        let sq = make_polygon(4, 4).unwrap();
        let n = sq.len();
        let rotated = apply_transform(&RigidTransform::rotation(FRAC_PI_2, None, 2), &sq).unwrap();
        let pairs = (0..n).map(|i| (i, (i + n / 4) % n)).collect();
        let c = Correspondence::new(pairs);
        assert!(c.is_bijective());
        for i in 0..n {
            let j = (i + n / 4) % n;
            assert!((rotated.point(i)[0] - sq.point(j)[0]).abs() < 1e-12);
        }
        let t = solve_transform_given_correspondence(&sq, &sq, &c, None).unwrap();
        assert!((t.angle() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_on_axis() {
        let m = PointSet::from_points(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        let r = solve_transform_given_correspondence(
            &m,
            &m,
            &Correspondence::identity(2),
            Some(Axis::Z),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn non_bijective_rejected() {
        let c = Correspondence::new(vec![(0, 0), (1, 0)]);
        assert!(!c.is_bijective());
        let m = PointSet::from_points(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(solve_transform_given_correspondence(&m, &m, &c, None).is_err());
    }

    #[test]
    fn translation_offsets() {
        let m = PointSet::from_points(&[[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        let s = m.translated(&[1.0, 2.0]);
        let c = resolve_translation(&m, &s, CenterTarget::Origin).unwrap();
        assert_eq!(c.model_offset, vec![0.0, 0.0]);
        assert_eq!(c.scene_offset, vec![-1.0, -2.0]);
        let q = resolve_translation(&m, &s, CenterTarget::UnitCube).unwrap();
        assert_eq!(q.scene.centroid().unwrap(), vec![0.5, 0.5]);
        let empty = PointSet::new(2, vec![]).unwrap();
        assert!(matches!(
            resolve_translation(&empty, &s, CenterTarget::Origin),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn alignment_error_cases() {
        let m = cloud();
        let t = RigidTransform::rotation(0.7, None, 2);
        let s = apply_transform(&t, &m).unwrap();
        assert!(alignment_error(&m, &s, &t).unwrap() < 1e-12);
        assert!(alignment_error(&m, &s, &RigidTransform::identity(2)).unwrap() > 0.1);
        assert!(matches!(
            alignment_error(&m, &m.head(2), &t),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn report_aggregates() {
        let rec = |e| AngleRecord {
            gt_angle: 0.0,
            est_angle: Some(0.0),
            e: Some(e),
            e_r: Some(0.0),
            error: None,
        };
        let failed = AngleRecord {
            gt_angle: 1.0,
            est_angle: None,
            e: None,
            e_r: None,
            error: Some("x".into()),
        };
        let r = EvalReport::from_records(vec![rec(1.0), rec(3.0), failed]);
        assert_eq!((r.e, r.sigma, r.e_r, r.sigma_r), (2.0, 1.0, 0.0, 0.0));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("e_R").is_some() && json.get("sigma_R").is_some());
    }
}
