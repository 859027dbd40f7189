//! Synthetic shapes, noise models and mesh ingestion.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::PointSet;
use crate::error::{Error, Result};

/// Regular polygon inscribed in the unit circle and centred at the origin,
/// `points_per_side` evenly spaced points per edge with shared vertices
/// stored once (a square with 10 per side has 36 points).
pub fn make_polygon(sides: usize, points_per_side: usize) -> Result<PointSet> {
    if sides < 3 || points_per_side < 2 {
        return Err(Error::Config(format!(
            "polygon needs >= 3 sides and >= 2 points per side, got {sides}/{points_per_side}"
        )));
    }
    let phase = PI / sides as f64;
    let vertex = |k: usize| {
        let a = phase + TAU * k as f64 / sides as f64;
        [a.cos(), a.sin()]
    };
    let mut pts = Vec::with_capacity(sides * (points_per_side - 1));
    for k in 0..sides {
        let (a, b) = (vertex(k), vertex((k + 1) % sides));
        for j in 0..points_per_side - 1 {
            let t = j as f64 / (points_per_side - 1) as f64;
            pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    Ok(PointSet::from_points(&pts)?.with_label(format!("{sides}-gon")))
}

/// Non-canonical stand-in for the fish benchmark shape: a 91-point closed
/// fish outline with a dorsal fin, centred and scaled to unit radius. It has
/// no rotational symmetry.
pub fn fish_fallback() -> PointSet {
    const N: usize = 91;
    let pts: Vec<[f64; 2]> = (0..N)
        .map(|k| {
            let t = TAU * k as f64 / N as f64;
            let x = t.cos() - t.sin().powi(2) / std::f64::consts::SQRT_2;
            let fin = 0.18 * (-(t - 1.2).powi(2) / 0.08).exp();
            let y = t.cos() * t.sin() + fin;
            [x, y]
        })
        .collect();
    let ps = PointSet::from_points(&pts).expect("finite fish outline");
    normalize_unit_sphere(&ps)
        .expect("nonempty")
        .with_label("fish-synthetic")
}

/// Centres at the centroid and scales so the farthest point has norm 1.
pub fn normalize_unit_sphere(ps: &PointSet) -> Result<PointSet> {
    let c = ps.centroid()?;
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    let centred = ps.translated(&neg);
    let r = centred.radius_about(&vec![0.0; ps.dim()]);
    if r == 0.0 {
        return Ok(centred);
    }
    Ok(centred.scaled(1.0 / r))
}

/// Appends `ceil(ratio * N)` outliers drawn iid from an isotropic Gaussian
/// with standard deviation `sigma_noise` around the centroid.
pub fn add_noise(ps: &PointSet, ratio: f64, sigma_noise: f64, seed: u64) -> Result<PointSet> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(Error::Config(format!(
            "noise ratio {ratio} outside [0, 0.5]"
        )));
    }
    if !(sigma_noise > 0.0) {
        return Err(Error::Config("noise sigma must be positive".into()));
    }
    let count = outlier_count(ratio, ps.len());
    if count == 0 {
        return Ok(ps.clone());
    }
    let center = ps.centroid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_noise).expect("positive sigma");
    let coords: Vec<f64> = (0..count)
        .flat_map(|_| {
            center
                .iter()
                .map(|c| c + normal.sample(&mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    ps.concat(&PointSet::new(ps.dim(), coords)?)
}

pub(crate) fn outlier_count(ratio: f64, n: usize) -> usize {
    // guard against 0.05 * 100 landing a hair above 5
    (ratio * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Perturbs every coordinate with iid Gaussian noise of standard deviation
/// `ratio * scale` (the amplitude reading of a noise ratio).
pub fn jitter(ps: &PointSet, ratio: f64, scale: f64, seed: u64) -> Result<PointSet> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(Error::Config(format!(
            "noise ratio {ratio} outside [0, 0.5]"
        )));
    }
    if ratio == 0.0 {
        return Ok(ps.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal =
        Normal::new(0.0, ratio * scale).map_err(|e| Error::Config(format!("jitter scale: {e}")))?;
    let coords = ps
        .coords()
        .iter()
        .map(|c| c + normal.sample(&mut rng))
        .collect();
    Ok(PointSet::new(ps.dim(), coords)?.with_label(ps.label.clone()))
}

/// Triangle mesh read from an OFF file. Polygonal faces are fan-triangulated.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: PointSet,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn from_off_str(text: &str, origin: &Path) -> Result<Mesh> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .peekable();
        let bad = |msg: &str| Error::parse(origin, msg.to_string());
        // Some ModelNet files glue the counts onto the header ("OFF490 518 0").
        let header = tokens.next().ok_or_else(|| bad("empty file"))?;
        let rest = header
            .strip_prefix("OFF")
            .ok_or_else(|| bad("missing OFF header"))?;
        let next_usize = |tokens: &mut dyn Iterator<Item = &str>| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| bad("unexpected end of file"))?
                .parse::<usize>()
                .map_err(|e| bad(&e.to_string()))
        };
        let mut counts_src: Box<dyn Iterator<Item = &str>> = if rest.is_empty() {
            Box::new(std::iter::empty())
        } else {
            Box::new(std::iter::once(rest))
        };
        let n_vertices = match counts_src.next() {
            Some(tok) => tok.parse::<usize>().map_err(|e| bad(&e.to_string()))?,
            None => next_usize(&mut tokens)?,
        };
        let n_faces = next_usize(&mut tokens)?;
        let _n_edges = next_usize(&mut tokens)?;
        let mut coords = Vec::with_capacity(n_vertices * 3);
        for _ in 0..n_vertices * 3 {
            let tok = tokens.next().ok_or_else(|| bad("truncated vertex list"))?;
            coords.push(tok.parse::<f64>().map_err(|e| bad(&e.to_string()))?);
        }
        let mut triangles = Vec::new();
        for _ in 0..n_faces {
            let k = next_usize(&mut tokens)?;
            let idx: Vec<usize> = (0..k)
                .map(|_| next_usize(&mut tokens))
                .collect::<Result<_>>()?;
            if idx.iter().any(|&i| i >= n_vertices) {
                return Err(bad("face references a missing vertex"));
            }
            for w in 1..k.saturating_sub(1) {
                triangles.push([idx[0], idx[w], idx[w + 1]]);
            }
        }
        Ok(Mesh {
            vertices: PointSet::new(3, coords).map_err(|e| bad(&e.to_string()))?,
            triangles,
        })
    }

    pub fn load(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mesh::from_off_str(&text, path)
    }

    fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        let (a, b, c) = (
            self.vertices.point(t[0]),
            self.vertices.point(t[1]),
            self.vertices.point(t[2]),
        );
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
    }
}

/// Uniform-by-area surface sampling.
pub fn sample_mesh(mesh: &Mesh, count: usize, seed: u64) -> Result<PointSet> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let areas: Vec<f64> = mesh
        .triangles
        .iter()
        .map(|t| mesh.triangle_area(t))
        .collect();
    let picker = WeightedIndex::new(&areas)
        .map_err(|e| Error::Degenerate(format!("mesh has no usable area: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(count * 3);
    for _ in 0..count {
        let t = mesh.triangles[picker.sample(&mut rng)];
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let (a, b, c) = (
            mesh.vertices.point(t[0]),
            mesh.vertices.point(t[1]),
            mesh.vertices.point(t[2]),
        );
        for d in 0..3 {
            coords.push(wa * a[d] + wb * b[d] + wc * c[d]);
        }
    }
    PointSet::new(3, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::transform::{apply_transform, RigidTransform};

    #[test]
    fn square_has_36_points() {
        assert_eq!(make_polygon(4, 10).unwrap().len(), 36);
        assert_eq!(make_polygon(5, 10).unwrap().len(), 45);
        assert!(make_polygon(2, 10).is_err());
        assert!(make_polygon(4, 1).is_err());
    }

    #[test]
    fn triangle_vertices_on_unit_circle() {
        let tri = make_polygon(3, 5).unwrap();
        for k in 0..3 {
            let p = tri.point(k * 4);
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_symmetric_under_its_rotation() {
        for k in 3..=7 {
            let poly = make_polygon(k, 6).unwrap();
            let rotated =
                apply_transform(&RigidTransform::rotation(TAU / k as f64, None, 2), &poly).unwrap();
            for p in rotated.iter() {
                let best = poly
                    .iter()
                    .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9, "{k}-gon point unmatched by {best}");
            }
        }
    }

    #[test]
    fn noise_counts_and_determinism() {
        let base = PointSet::new(2, (0..200).map(|i| i as f64 * 0.01).collect()).unwrap();
        assert_eq!(add_noise(&base, 0.0, 0.3, 1).unwrap(), base);
        let noisy = add_noise(&base, 0.5, 0.3, 1).unwrap();
        assert_eq!(noisy.len(), 150);
        assert_eq!(noisy.head(100), base);
        assert_eq!(noisy, add_noise(&base, 0.5, 0.3, 1).unwrap());
        assert_ne!(noisy, add_noise(&base, 0.5, 0.3, 2).unwrap());
        assert_eq!(add_noise(&base, 0.05, 0.3, 1).unwrap().len(), 105);
        assert!(add_noise(&base, 0.6, 0.3, 1).is_err());
    }

    #[test]
    fn fish_is_unit_and_centred() {
        let f = fish_fallback();
        assert_eq!(f.len(), 91);
        let c = f.centroid().unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-12));
        assert!((f.radius_about(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_parsing_and_sampling() {
        let text = "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n3 0 1 2\n";
        let mesh = Mesh::from_off_str(text, Path::new("quad.off")).unwrap();
        assert_eq!(mesh.triangles.len(), 3);
        let pts = sample_mesh(&mesh, 500, 3).unwrap();
        assert_eq!(pts.len(), 500);
        assert!(pts
            .iter()
            .all(|p| p[2] == 0.0 && (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])));
        assert_eq!(pts, sample_mesh(&mesh, 500, 3).unwrap());

        let glued = "OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert_eq!(
            Mesh::from_off_str(glued, Path::new("g.off"))
                .unwrap()
                .triangles
                .len(),
            1
        );
        assert!(Mesh::from_off_str("PLY\n", Path::new("bad.off")).is_err());
    }
}
