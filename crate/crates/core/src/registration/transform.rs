use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::PointSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Coordinate indices `(u, v)` of the plane rotated by this axis, ordered so
    /// that a positive angle maps `u` towards `v`.
    pub fn plane(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (2, 0),
            Axis::Z => (0, 1),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis '{other}'"))),
        }
    }
}

/// Single-axis rotation followed by a translation: `T m = R m + t`.
///
/// `axis` is `None` for planar transforms; a planar transform applied to 3D
/// points rotates about z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    angle: f64,
    axis: Option<Axis>,
    translation: Vec<f64>,
}

impl RigidTransform {
    pub fn identity(dim: usize) -> Self {
        RigidTransform {
            angle: 0.0,
            axis: None,
            translation: vec![0.0; dim],
        }
    }

    /// Rotation about the origin; the angle is wrapped into `[0, 2pi)`.
    pub fn rotation(angle: f64, axis: Option<Axis>, dim: usize) -> Self {
        RigidTransform {
            angle: angle.rem_euclid(TAU),
            axis,
            translation: vec![0.0; dim],
        }
    }

    pub fn with_translation(mut self, translation: Vec<f64>) -> Self {
        self.translation = translation;
        self
    }

    /// Rotation about `pivot`: `T m = R (m - pivot) + pivot`.
    pub fn about_pivot(angle: f64, axis: Option<Axis>, pivot: &[f64]) -> Self {
        let rot = RigidTransform::rotation(angle, axis, pivot.len());
        let r = rot.matrix(pivot.len());
        let translation = (0..pivot.len())
            .map(|i| pivot[i] - (0..pivot.len()).map(|j| r[i][j] * pivot[j]).sum::<f64>())
            .collect();
        rot.with_translation(translation)
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn axis(&self) -> Option<Axis> {
        self.axis
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    /// `dim x dim` rotation matrix.
    pub fn matrix(&self, dim: usize) -> Vec<Vec<f64>> {
        let (s, c) = self.angle.sin_cos();
        let mut r = vec![vec![0.0; dim]; dim];
        if dim == 2 {
            r[0] = vec![c, -s];
            r[1] = vec![s, c];
            return r;
        }
        let (u, v) = self.axis.unwrap_or(Axis::Z).plane();
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        r[u][u] = c;
        r[u][v] = -s;
        r[v][u] = s;
        r[v][v] = c;
        r
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim == 2 && self.axis.is_some() {
            return Err(Error::Config(
                "rotation axis given for a 2D transform".into(),
            ));
        }
        if self.translation.len() != dim {
            return Err(Error::Shape(format!(
                "{}D translation applied to {dim}D points",
                self.translation.len()
            )));
        }
        Ok(())
    }

    pub fn apply_point(&self, p: &[f64], r: &[Vec<f64>], out: &mut Vec<f64>) {
        for (i, row) in r.iter().enumerate() {
            let rotated: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
            out.push(rotated + self.translation[i]);
        }
    }
}

pub fn apply_transform(t: &RigidTransform, ps: &PointSet) -> Result<PointSet> {
    let dim = ps.dim();
    t.check(dim)?;
    let r = t.matrix(dim);
    let mut coords = Vec::with_capacity(ps.coords().len());
    for p in ps.iter() {
        t.apply_point(p, &r, &mut coords);
    }
    Ok(PointSet::new(dim, coords)?.with_label(ps.label.clone()))
}

/// Frobenius norm of `I - R R^T` for an arbitrary square matrix.
pub fn orthogonality_defect(r: &[Vec<f64>]) -> f64 {
    let n = r.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let rrt: f64 = (0..n).map(|k| r[i][k] * r[j][k]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            sum += (target - rrt).powi(2);
        }
    }
    sum.sqrt()
}

/// `||I - R R^T||_F` for the rotation part of `t`.
pub fn transformation_discrepancy(t: &RigidTransform) -> f64 {
    let dim = if t.axis.is_some() || t.translation.len() == 3 {
        3
    } else {
        2
    };
    orthogonality_defect(&t.matrix(dim))
}
