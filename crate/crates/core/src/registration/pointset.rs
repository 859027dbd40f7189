use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;

/// Ordered 2D or 3D point collection stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    pub label: String,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Shape(format!(
                "point dimension must be 2 or 3, got {dim}"
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} coordinates do not form {dim}D points",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invariant("point coordinates must be finite".into()));
        }
        Ok(PointSet {
            dim,
            coords,
            label: String::new(),
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.as_ref().len())
            .ok_or_else(|| Error::EmptyInput("point list".into()))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "mixed point dimensions {dim} and {}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        PointSet::new(dim, coords)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn centroid(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyInput(format!("point set '{}'", self.label)));
        }
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        Ok(c)
    }

    pub fn translated(&self, offset: &[f64]) -> PointSet {
        let coords = self
            .iter()
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        PointSet {
            dim: self.dim,
            coords,
            label: self.label.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * factor).collect(),
            label: self.label.clone(),
        }
    }

    /// Largest distance from `center` to any point.
    pub fn radius_about(&self, center: &[f64]) -> f64 {
        self.iter()
            .map(|p| {
                p.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Concatenation `self ++ other`.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(Error::Shape(
                "cannot concatenate 2D and 3D point sets".into(),
            ));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(PointSet {
            dim: self.dim,
            coords,
            label: self.label.clone(),
        })
    }

    /// First `n` points.
    pub fn head(&self, n: usize) -> PointSet {
        PointSet {
            dim: self.dim,
            coords: self.coords[..n.min(self.len()) * self.dim].to_vec(),
            label: self.label.clone(),
        }
    }

    /// Parses `x,y[,z]` rows; a non-numeric first line is treated as a header.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match fields {
                Ok(v) => rows.push(v),
                Err(_) if rows.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(Error::parse(origin, format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(origin.display().to_string()));
        }
        PointSet::from_points(&rows).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        PointSet::from_points(&rows).map_err(|e| Error::parse(origin, e.to_string()))
    }

    /// Loads `.csv`, `.json` or `.off` (vertices only; see
    /// [`super::shapes::sample_mesh`] for surface sampling).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        let ps = match ext.as_str() {
            "json" => PointSet::from_json_str(&text, path)?,
            "off" => super::shapes::Mesh::from_off_str(&text, path)?.vertices,
            _ => PointSet::from_csv_str(&text, path)?,
        };
        Ok(ps.with_label(label))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = if self.dim == 2 { "x,y" } else { "x,y,z" };
        writeln!(out, "{header}")?;
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|v| num(*v)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}
