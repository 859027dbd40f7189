//! The QAOA_{p=1} Ising Born machine: circuit output distribution, the
//! bitstring-to-angle binning and the parameter-shift rule.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::num;
use crate::statevector::{
    apply_ising_evolution, apply_measurement_layer, born_probabilities, prepare_plus_state,
    BitString, CircuitParams, OutputDistribution,
};

/// Fixed measurement-layer angle used when none is configured.
pub const DEFAULT_GAMMA: f64 = FRAC_PI_4;

/// Magnitude of the parameter shift. Every trainable gate is `exp(i theta P)`
/// with `P^2 = I`, for which `dp/dtheta = p(theta + pi/4) - p(theta - pi/4)`
/// holds exactly.
pub const SHIFT: f64 = FRAC_PI_4;

/// Partition of `[0, 2pi)` into `2^n` equal bins, one per bitstring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleBinning {
    n_qubits: usize,
}

impl AngleBinning {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::statevector::MAX_QUBITS {
            return Err(Error::Size(n_qubits));
        }
        Ok(AngleBinning { n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn bin_count(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.bin_count() as f64
    }

    /// Median of bin `index`: `(2 index + 1) pi / 2^n`.
    pub fn angle(&self, index: usize) -> f64 {
        (2 * index + 1) as f64 * PI / self.bin_count() as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.bin_count()).map(|k| self.angle(k)).collect()
    }

    /// Bin containing `angle` (wrapped into `[0, 2pi)`).
    pub fn bin_of(&self, angle: f64) -> usize {
        let wrapped = angle.rem_euclid(TAU);
        let k = (wrapped / self.bin_width()).floor() as usize;
        k.min(self.bin_count() - 1)
    }
}

pub fn bitstring_to_angle(x: &BitString, binning: &AngleBinning) -> Result<f64> {
    if x.n_qubits() != binning.n_qubits {
        return Err(Error::Shape(format!(
            "{}-bit string for a {}-qubit binning",
            x.n_qubits(),
            binning.n_qubits
        )));
    }
    Ok(binning.angle(x.index()))
}

/// Circuit output distribution viewed as a distribution over bin medians.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleDistribution {
    binning: AngleBinning,
    probs: Vec<f64>,
}

impl AngleDistribution {
    pub fn new(binning: AngleBinning, probs: Vec<f64>) -> Result<Self> {
        let dist = OutputDistribution::new(binning.n_qubits, probs)?;
        Ok(AngleDistribution {
            binning,
            probs: dist.into_probs(),
        })
    }

    pub fn binning(&self) -> &AngleBinning {
        &self.binning
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn output_distribution(&self) -> OutputDistribution {
        OutputDistribution::new(self.binning.n_qubits, self.probs.clone())
            .expect("angle distribution is always a valid output distribution")
    }

    /// Total probability of the given bins.
    pub fn mass_on(&self, bins: &[usize]) -> f64 {
        bins.iter().map(|&k| self.probs[k]).sum()
    }

    /// CSV with header `bin,angle_rad,prob`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,angle_rad,prob")?;
        for (k, p) in self.probs.iter().enumerate() {
            writeln!(out, "{k},{},{}", num(self.binning.angle(k)), num(*p))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Argmax bin, lowest index on ties.
    pub fn mode_index(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }
}

pub fn circuit_probabilities(params: &CircuitParams) -> Result<Vec<f64>> {
    if !params.is_qaoa() {
        return Err(Error::Unsupported(
            "forward requires delta = sigma = 0".into(),
        ));
    }
    let state = prepare_plus_state(params.n_qubits())?;
    let state = apply_ising_evolution(state, params)?;
    let state = apply_measurement_layer(state, params)?;
    Ok(born_probabilities(&state)?.into_probs())
}

pub fn forward(params: &CircuitParams) -> Result<AngleDistribution> {
    let binning = AngleBinning::new(params.n_qubits())?;
    Ok(AngleDistribution {
        binning,
        probs: circuit_probabilities(params)?,
    })
}

pub fn mode_angle(dist: &AngleDistribution) -> f64 {
    dist.binning.angle(dist.mode_index())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDirection {
    Plus,
    Minus,
}

/// One of the two shifted circuits for trainable parameter `index`
/// (ordering as in [`CircuitParams::trainable`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParameterShift {
    pub index: usize,
    pub direction: ShiftDirection,
}

impl ParameterShift {
    pub fn plus(index: usize) -> Self {
        ParameterShift {
            index,
            direction: ShiftDirection::Plus,
        }
    }

    pub fn minus(index: usize) -> Self {
        ParameterShift {
            index,
            direction: ShiftDirection::Minus,
        }
    }

    pub fn offset(&self) -> f64 {
        match self.direction {
            ShiftDirection::Plus => SHIFT,
            ShiftDirection::Minus => -SHIFT,
        }
    }
}

/// Copy of `params` with trainable entry `index` moved by `delta`.
pub fn offset_params(params: &CircuitParams, index: usize, delta: f64) -> Result<CircuitParams> {
    let count = params.trainable_count();
    let mut out = params.clone();
    let slot = out
        .trainable_mut(index)
        .ok_or(Error::Index { index, count })?;
    *slot += delta;
    Ok(out)
}

pub fn shifted_params(params: &CircuitParams, shift: ParameterShift) -> Result<CircuitParams> {
    offset_params(params, shift.index, shift.offset())
}

/// `dp(x)/dtheta_index` for every bitstring via the parameter-shift rule.
pub fn probability_gradient(params: &CircuitParams, index: usize) -> Result<Vec<f64>> {
    let plus = circuit_probabilities(&shifted_params(params, ParameterShift::plus(index))?)?;
    let minus = circuit_probabilities(&shifted_params(params, ParameterShift::minus(index))?)?;
    Ok(plus.iter().zip(&minus).map(|(p, m)| p - m).collect())
}

/// JSON checkpoint `{n_qubits, gamma, b, J}` with `J` a full symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n_qubits: usize,
    pub gamma: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
}

impl From<&CircuitParams> for Checkpoint {
    fn from(p: &CircuitParams) -> Self {
        let n = p.n_qubits();
        Checkpoint {
            n_qubits: n,
            gamma: p.gamma().to_vec(),
            b: p.biases().to_vec(),
            j: (0..n)
                .map(|i| (0..n).map(|j| p.coupling(i, j)).collect())
                .collect(),
        }
    }
}

impl TryFrom<Checkpoint> for CircuitParams {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        let n = c.n_qubits;
        if c.j.len() != n || c.j.iter().any(|row| row.len() != n) {
            return Err(Error::Shape(format!("J must be {n}x{n}")));
        }
        let mut couplings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let (upper, lower) = (c.j[i][j], c.j[j][i]);
                if lower != 0.0 && lower != upper {
                    return Err(Error::Invariant(format!(
                        "J[{i}][{j}] = {upper} but J[{j}][{i}] = {lower}"
                    )));
                }
                couplings.push(upper);
            }
        }
        CircuitParams::new(n, couplings, c.b, c.gamma)
    }
}

pub fn checkpoint_to_json(params: &CircuitParams) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Checkpoint::from(params))?)
}

pub fn checkpoint_from_json(text: &str) -> Result<CircuitParams> {
    let c: Checkpoint = serde_json::from_str(text)?;
    c.try_into()
}

pub fn save_checkpoint(params: &CircuitParams, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<CircuitParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_csv_rows() {
        let d = forward(&CircuitParams::zeros(2, DEFAULT_GAMMA).unwrap()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin,angle_rad,prob");
        assert_eq!(lines.len(), 5);
        let row: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0, 3.0 * PI / 4.0, 0.25]);
    }
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn worked_example_bin() {
        let b = AngleBinning::new(4).unwrap();
        let x = BitString::from_bits(&[0, 1, 0, 1]).unwrap();
        assert_eq!(bitstring_to_angle(&x, &b).unwrap(), 11.0 * PI / 16.0);
        let zero = BitString::from_bits(&[0, 0, 0, 0]).unwrap();
        assert_eq!(bitstring_to_angle(&zero, &b).unwrap(), PI / 16.0);
    }

    #[test]
    fn six_qubit_last_bin() {
        let b = AngleBinning::new(6).unwrap();
        let x = BitString::from_bits(&[1; 6]).unwrap();
        let expected = (63.0 * 2.0 + 1.0) / 128.0 * TAU;
        assert!((bitstring_to_angle(&x, &b).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 127.0 * PI / 64.0).abs() < 1e-15);
    }

    #[test]
    fn one_qubit_bins() {
        let b = AngleBinning::new(1).unwrap();
        assert_eq!(b.angles(), vec![FRAC_PI_2, 3.0 * FRAC_PI_2]);
    }

    #[test]
    fn binning_length_mismatch() {
        let b = AngleBinning::new(4).unwrap();
        let x = BitString::from_bits(&[0, 1]).unwrap();
        assert!(matches!(bitstring_to_angle(&x, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_init_forward_is_uniform() {
        let p = CircuitParams::zeros(4, DEFAULT_GAMMA).unwrap();
        let d = forward(&p).unwrap();
        for &q in d.probs() {
            assert!((q - 1.0 / 16.0).abs() < 1e-15);
        }
        let medians: Vec<f64> = (0..16).map(|k| (2 * k + 1) as f64 * PI / 16.0).collect();
        assert_eq!(d.binning().angles(), medians);
    }

    #[test]
    fn shift_roundtrip_and_single_entry() {
        let p =
            CircuitParams::new(3, vec![0.1, 0.2, 0.3], vec![0.0, 0.5, -0.5], vec![0.3; 3]).unwrap();
        for idx in 0..p.trainable_count() {
            let up = offset_params(&p, idx, FRAC_PI_2).unwrap();
            let back = offset_params(&up, idx, -FRAC_PI_2).unwrap();
            for (a, b) in back.trainable().iter().zip(p.trainable()) {
                assert!((a - b).abs() < 1e-15);
            }
            let diffs: Vec<usize> = up
                .trainable()
                .iter()
                .zip(p.trainable())
                .enumerate()
                .filter(|(_, (a, b))| *a != b)
                .map(|(k, _)| k)
                .collect();
            assert_eq!(diffs, vec![idx]);
        }
        let b1 = offset_params(&p, 0, FRAC_PI_2).unwrap();
        assert_eq!(b1.biases()[0], FRAC_PI_2);
        assert!(matches!(
            shifted_params(&p, ParameterShift::plus(6)),
            Err(Error::Index { index: 6, count: 6 })
        ));
    }

    #[test]
    fn shifted_circuits_differ_on_coupling() {
        let p = CircuitParams::new(2, vec![0.4], vec![0.3, -0.2], vec![DEFAULT_GAMMA; 2]).unwrap();
        let grad = probability_gradient(&p, 2).unwrap();
        assert!(grad.iter().any(|g| g.abs() > 1e-6));
        // the gradient of a normalized distribution sums to zero
        assert!(grad.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn mode_angle_ties_and_point_mass() {
        let b = AngleBinning::new(4).unwrap();
        let mut probs = vec![0.0; 16];
        probs[5] = 1.0;
        let d = AngleDistribution::new(b, probs).unwrap();
        assert_eq!(mode_angle(&d), 11.0 * PI / 16.0);
        let u = AngleDistribution::new(b, vec![1.0 / 16.0; 16]).unwrap();
        assert_eq!(mode_angle(&u), PI / 16.0);
    }

    #[test]
    fn checkpoint_rejects_asymmetric_couplings() {
        let text = r#"{"n_qubits":2,"gamma":[0.1,0.1],"b":[0,0],"J":[[0,1.0],[2.0,0]]}"#;
        assert!(matches!(
            checkpoint_from_json(text),
            Err(Error::Invariant(_))
        ));
        let upper_only = r#"{"n_qubits":2,"gamma":[0.1,0.1],"b":[0,0],"J":[[0,1.0],[0,0]]}"#;
        assert_eq!(
            checkpoint_from_json(upper_only).unwrap().coupling(0, 1),
            1.0
        );
    }

    proptest! {
        #[test]
        fn checkpoint_roundtrip_is_bit_exact(
            vals in prop::collection::vec(-10.0f64..10.0, 10),
            gamma in -3.0f64..3.0,
        ) {
            let mut p = CircuitParams::zeros(4, gamma).unwrap();
            p.set_trainable(&vals).unwrap();
            let back = checkpoint_from_json(&checkpoint_to_json(&p).unwrap()).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn mode_is_scale_invariant(
            weights in prop::collection::vec(0.01f64..1.0, 8),
            scale in 0.1f64..10.0,
        ) {
            let b = AngleBinning::new(3).unwrap();
            let total: f64 = weights.iter().sum();
            let d = AngleDistribution::new(b, weights.iter().map(|w| w / total).collect()).unwrap();
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let total_s: f64 = scaled.iter().sum();
            let ds = AngleDistribution::new(b, scaled.iter().map(|w| w / total_s).collect()).unwrap();
            prop_assert_eq!(d.mode_index(), ds.mode_index());
        }

        #[test]
        fn binning_is_bijective(n in 1usize..=10) {
            let b = AngleBinning::new(n).unwrap();
            let angles = b.angles();
            for (k, a) in angles.iter().enumerate() {
                prop_assert!(*a >= 0.0 && *a < TAU);
                prop_assert_eq!(b.bin_of(*a), k);
            }
            for w in angles.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }
    }
}
