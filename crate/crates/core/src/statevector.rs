//! Dense state-vector simulation of the shallow QAOA/IQP circuit family:
//! a Hadamard layer, a diagonal Ising phase layer and single-qubit X
//! rotations, followed by Z-basis measurement.
//!
//! Basis index convention: qubit `k` (0-based) is bit `n - 1 - k` of the
//! basis index, so `x_1` is the most significant bit. A bit value of 0 maps
//! to the Pauli-Z eigenvalue +1 and a bit value of 1 to -1.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

/// Tolerance used when validating that a state or distribution is normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Size(n));
    }
    Ok(())
}

/// Z eigenvalue (+1 / -1) of qubit `qubit` in basis state `index`.
#[inline]
pub(crate) fn z_eigenvalue(index: usize, qubit: usize, n: usize) -> f64 {
    if (index >> (n - 1 - qubit)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`
    pub fn zero_state(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. Only the length is validated here; normalization
    /// is checked by the consumers that depend on it.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n)?;
        if amplitudes.len() != 1 << n {
            return Err(Error::Shape(format!(
                "expected {} amplitudes for {} qubits, got {}",
                1usize << n,
                n,
                amplitudes.len()
            )));
        }
        Ok(StateVector {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Shape(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies amplitude `x` by `exp(i * phase(x))`.
    pub fn apply_diagonal_phase(mut self, phase: impl Fn(usize) -> f64) -> Self {
        for (x, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= Complex64::from_polar(1.0, phase(x));
        }
        self
    }

    /// Applies a 2x2 unitary `[[a, b], [c, d]]` to `qubit`.
    pub fn apply_single_qubit(mut self, qubit: usize, gate: [[Complex64; 2]; 2]) -> Self {
        let stride = 1usize << (self.n_qubits - 1 - qubit);
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for lo in base..base + stride {
                let hi = lo + stride;
                let (a0, a1) = (self.amplitudes[lo], self.amplitudes[hi]);
                self.amplitudes[lo] = gate[0][0] * a0 + gate[0][1] * a1;
                self.amplitudes[hi] = gate[1][0] * a0 + gate[1][1] * a1;
            }
            base += 2 * stride;
        }
        self
    }

    pub fn apply_hadamard_layer(self) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let gate = [[h, h], [h, -h]];
        (0..self.n_qubits).fold(self, |s, q| s.apply_single_qubit(q, gate))
    }
}

/// Ising couplings and fields plus the measurement-layer angles of one
/// QAOA_{p=1} / IQP circuit. Couplings are stored packed in the order
/// `(0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    n_qubits: usize,
    couplings: Vec<f64>,
    biases: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    sigma: Vec<f64>,
}

impl CircuitParams {
    /// QAOA-mode parameters with all trainable entries zero and a uniform
    /// fixed measurement angle.
    pub fn zeros(n: usize, gamma: f64) -> Result<Self> {
        check_qubits(n)?;
        Ok(CircuitParams {
            n_qubits: n,
            couplings: vec![0.0; n * (n - 1) / 2],
            biases: vec![0.0; n],
            gamma: vec![gamma; n],
            delta: vec![0.0; n],
            sigma: vec![0.0; n],
        })
    }

    /// `couplings` is the packed strict upper triangle.
    pub fn new(n: usize, couplings: Vec<f64>, biases: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        check_qubits(n)?;
        if couplings.len() != n * (n - 1) / 2 || biases.len() != n || gamma.len() != n {
            return Err(Error::Shape(format!(
                "{n}-qubit params need {} couplings and {n} biases/gammas, got {}/{}/{}",
                n * (n - 1) / 2,
                couplings.len(),
                biases.len(),
                gamma.len()
            )));
        }
        Ok(CircuitParams {
            n_qubits: n,
            couplings,
            biases,
            gamma,
            delta: vec![0.0; n],
            sigma: vec![0.0; n],
        })
    }

    /// Sets the Y/Z measurement-layer angles. Only zero values are simulated.
    pub fn with_general_measurement(mut self, delta: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if delta.len() != self.n_qubits || sigma.len() != self.n_qubits {
            return Err(Error::Shape(
                "delta/sigma length must equal n_qubits".into(),
            ));
        }
        self.delta = delta;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn couplings_packed(&self) -> &[f64] {
        &self.couplings
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn is_qaoa(&self) -> bool {
        self.delta.iter().chain(&self.sigma).all(|&v| v == 0.0)
    }

    pub(crate) fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_qubits);
        let n = self.n_qubits;
        i * (2 * n - i - 1) / 2 + (j - i - 1)
    }

    /// `J_ij` for `i != j` (symmetric); 0 on the diagonal.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.couplings[self.pair_index(i, j)],
            std::cmp::Ordering::Greater => self.couplings[self.pair_index(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn set_coupling(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let k = self.pair_index(i, j);
        self.couplings[k] = value;
    }

    /// `n(n+1)/2`
    pub fn trainable_count(&self) -> usize {
        self.n_qubits * (self.n_qubits + 1) / 2
    }

    /// Trainable vector ordered `b_1..b_n, J_12, J_13, ..., J_{n-1,n}`.
    pub fn trainable(&self) -> Vec<f64> {
        self.biases.iter().chain(&self.couplings).copied().collect()
    }

    pub fn set_trainable(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.trainable_count() {
            return Err(Error::Shape(format!(
                "expected {} trainable values, got {}",
                self.trainable_count(),
                values.len()
            )));
        }
        let n = self.n_qubits;
        self.biases.copy_from_slice(&values[..n]);
        self.couplings.copy_from_slice(&values[n..]);
        Ok(())
    }

    pub(crate) fn trainable_mut(&mut self, index: usize) -> Option<&mut f64> {
        let n = self.n_qubits;
        if index < n {
            self.biases.get_mut(index)
        } else {
            self.couplings.get_mut(index - n)
        }
    }

    /// Ising energy `sum_{i<j} J_ij z_i z_j + sum_k b_k z_k` of basis state `x`.
    pub fn ising_phase(&self, x: usize) -> f64 {
        let n = self.n_qubits;
        let z: Vec<f64> = (0..n).map(|q| z_eigenvalue(x, q, n)).collect();
        let mut phase: f64 = self.biases.iter().zip(&z).map(|(b, z)| b * z).sum();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                phase += self.couplings[k] * z[i] * z[j];
                k += 1;
            }
        }
        phase
    }
}

/// Measured bitstring `(x_1, ..., x_n)`, `x_1` most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n_qubits: usize,
    value: usize,
}

impl BitString {
    pub fn from_index(n_qubits: usize, value: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if value >= 1 << n_qubits {
            return Err(Error::Shape(format!(
                "value {value} does not fit in {n_qubits} bits"
            )));
        }
        Ok(BitString { n_qubits, value })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_qubits(bits.len())?;
        let mut value = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::Shape(format!("bit value {b} is not 0 or 1")));
            }
            value = (value << 1) | b as usize;
        }
        Ok(BitString {
            n_qubits: bits.len(),
            value,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn index(&self) -> usize {
        self.value
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.n_qubits)
            .map(|k| ((self.value >> (self.n_qubits - 1 - k)) & 1) as u8)
            .collect()
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Exact Born-rule probabilities over all `2^n` bitstrings.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputDistribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl OutputDistribution {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if probs.len() != 1 << n_qubits {
            return Err(Error::Shape(format!(
                "expected {} probabilities, got {}",
                1usize << n_qubits,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Invariant(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Invariant(format!("probabilities sum to {total}")));
        }
        Ok(OutputDistribution { n_qubits, probs })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}

pub fn prepare_plus_state(n: usize) -> Result<StateVector> {
    check_qubits(n)?;
    let amp = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
    Ok(StateVector {
        n_qubits: n,
        amplitudes: vec![amp; 1 << n],
    })
}

fn check_dims(state: &StateVector, params: &CircuitParams) -> Result<()> {
    if state.n_qubits != params.n_qubits {
        return Err(Error::Shape(format!(
            "{}-qubit state with {}-qubit parameters",
            state.n_qubits, params.n_qubits
        )));
    }
    Ok(())
}

/// `exp(i H_z)` with `H_z = sum_{i<j} J_ij Z_i Z_j + sum_k b_k Z_k`.
pub fn apply_ising_evolution(state: StateVector, params: &CircuitParams) -> Result<StateVector> {
    check_dims(&state, params)?;
    Ok(state.apply_diagonal_phase(|x| params.ising_phase(x)))
}

/// `exp(-i sum_k Gamma_k X_k)` as a product of single-qubit X rotations.
pub fn apply_measurement_layer(state: StateVector, params: &CircuitParams) -> Result<StateVector> {
    check_dims(&state, params)?;
    if !params.is_qaoa() {
        return Err(Error::Unsupported(
            "measurement layer with nonzero delta/sigma is not simulated".into(),
        ));
    }
    let mut state = state;
    for (q, &g) in params.gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let c = Complex64::new(g.cos(), 0.0);
        let s = Complex64::new(0.0, -g.sin());
        state = state.apply_single_qubit(q, [[c, s], [s, c]]);
    }
    Ok(state)
}

pub fn born_probabilities(state: &StateVector) -> Result<OutputDistribution> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Invariant(format!(
            "state norm^2 is {norm}, expected 1"
        )));
    }
    Ok(OutputDistribution {
        n_qubits: state.n_qubits,
        probs: state.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
    })
}

/// Draws `count` basis indices from `dist` using the caller's generator.
pub fn sample_indices<R: Rng + ?Sized>(
    dist: &OutputDistribution,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let sampler = WeightedIndex::new(&dist.probs)
        .map_err(|e| Error::Invariant(format!("cannot sample distribution: {e}")))?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

/// Seeded measurement emulation: `count` bitstrings drawn iid from `dist`.
pub fn sample_bitstrings(
    dist: &OutputDistribution,
    count: usize,
    seed: u64,
) -> Result<Vec<BitString>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dist.n_qubits;
    Ok(sample_indices(dist, count, &mut rng)?
        .into_iter()
        .map(|value| BitString { n_qubits: n, value })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn plus_state_amplitudes() {
        let s = prepare_plus_state(1).unwrap();
        for a in s.amplitudes() {
            assert!(close(*a, Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-15));
        }
        let s = prepare_plus_state(2).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| *a == Complex64::new(0.5, 0.0)));
        let s = prepare_plus_state(4).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| *a == Complex64::new(0.25, 0.0)));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plus_state_matches_hadamard_layer() {
        let h = StateVector::zero_state(5).unwrap().apply_hadamard_layer();
        let p = prepare_plus_state(5).unwrap();
        for (a, b) in h.amplitudes().iter().zip(p.amplitudes()) {
            assert!(close(*a, *b, 1e-14));
        }
    }

    #[test]
    fn qubit_count_bounds() {
        assert!(matches!(prepare_plus_state(0), Err(Error::Size(0))));
        assert!(matches!(prepare_plus_state(21), Err(Error::Size(21))));
    }

    #[test]
    fn zero_ising_is_identity() {
        let params = CircuitParams::zeros(3, FRAC_PI_4).unwrap();
        let s = prepare_plus_state(3).unwrap();
        let out = apply_ising_evolution(s.clone(), &params).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn single_bias_phase() {
        let params = CircuitParams::new(1, vec![], vec![FRAC_PI_2], vec![0.0]).unwrap();
        let out = apply_ising_evolution(prepare_plus_state(1).unwrap(), &params).unwrap();
        let amp = out.amplitudes();
        assert!(close(amp[0], Complex64::new(0.0, FRAC_1_SQRT_2), 1e-15));
        assert!(close(amp[1], Complex64::new(0.0, -FRAC_1_SQRT_2), 1e-15));
        let p = born_probabilities(&out).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let params = CircuitParams::zeros(2, 0.0).unwrap();
        let s = prepare_plus_state(3).unwrap();
        assert!(matches!(
            apply_ising_evolution(s.clone(), &params),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            apply_measurement_layer(s, &params),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn measurement_layer_identity_and_eigenstate() {
        let params = CircuitParams::zeros(2, 0.0).unwrap();
        let s = prepare_plus_state(2).unwrap();
        assert_eq!(apply_measurement_layer(s.clone(), &params).unwrap(), s);

        let params = CircuitParams::zeros(1, FRAC_PI_4).unwrap();
        let out = apply_measurement_layer(prepare_plus_state(1).unwrap(), &params).unwrap();
        let p = born_probabilities(&out).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-15);
        // |+> up to the global phase exp(-i pi/4)
        let phase = Complex64::from_polar(1.0, -FRAC_PI_4);
        for a in out.amplitudes() {
            assert!(close(*a, phase * FRAC_1_SQRT_2, 1e-15));
        }
    }

    #[test]
    fn general_measurement_rejected() {
        let params = CircuitParams::zeros(2, FRAC_PI_4)
            .unwrap()
            .with_general_measurement(vec![0.1, 0.0], vec![0.0, 0.0])
            .unwrap();
        let s = prepare_plus_state(2).unwrap();
        assert!(matches!(
            apply_measurement_layer(s, &params),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn born_rejects_unnormalized() {
        let s = StateVector::from_amplitudes(1, vec![Complex64::new(1.0, 0.0); 2]).unwrap();
        assert!(matches!(born_probabilities(&s), Err(Error::Invariant(_))));
    }

    #[test]
    fn ising_does_not_change_probabilities() {
        let params =
            CircuitParams::new(3, vec![0.3, -1.1, 0.7], vec![0.2, 0.9, -0.4], vec![0.5; 3])
                .unwrap();
        let s = prepare_plus_state(3).unwrap().apply_single_qubit(1, {
            let c = Complex64::new(0.6, 0.0);
            let s = Complex64::new(0.0, -0.8);
            [[c, s], [s, c]]
        });
        let before = born_probabilities(&s).unwrap();
        let after = born_probabilities(&apply_ising_evolution(s, &params).unwrap()).unwrap();
        for (a, b) in before.probs().iter().zip(after.probs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn packed_coupling_indices() {
        let mut p = CircuitParams::zeros(4, 0.0).unwrap();
        let mut k = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                assert_eq!(p.pair_index(i, j), k);
                k += 1;
            }
        }
        p.set_coupling(3, 1, 2.5);
        assert_eq!(p.coupling(1, 3), 2.5);
        assert_eq!(p.coupling(3, 1), 2.5);
        assert_eq!(p.trainable_count(), 10);
        assert_eq!(p.trainable()[4 + p.pair_index(1, 3)], 2.5);
    }

    #[test]
    fn bitstring_msb_first() {
        let b = BitString::from_bits(&[0, 1, 0, 1]).unwrap();
        assert_eq!(b.index(), 5);
        assert_eq!(b.to_string(), "0101");
        assert_eq!(
            BitString::from_index(4, 5).unwrap().bits(),
            vec![0, 1, 0, 1]
        );
        assert!(BitString::from_bits(&[0, 2]).is_err());
        assert!(BitString::from_index(2, 4).is_err());
    }

    #[test]
    fn sampling_point_mass_and_determinism() {
        let mut probs = vec![0.0; 16];
        probs[5] = 1.0;
        let dist = OutputDistribution::new(4, probs).unwrap();
        let xs = sample_bitstrings(&dist, 200, 9).unwrap();
        assert!(xs.iter().all(|x| x.bits() == vec![0, 1, 0, 1]));

        let uniform = OutputDistribution::new(3, vec![0.125; 8]).unwrap();
        let a = sample_bitstrings(&uniform, 500, 42).unwrap();
        let b = sample_bitstrings(&uniform, 500, 42).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            sample_bitstrings(&uniform, 0, 1),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        // Binomial(16000, 1/16): mean 1000, sd sqrt(16000 * 1/16 * 15/16) ~ 30.6
        let dist = OutputDistribution::new(4, vec![1.0 / 16.0; 16]).unwrap();
        let xs = sample_bitstrings(&dist, 16_000, 2024).unwrap();
        let mut counts = [0usize; 16];
        for x in xs {
            counts[x.index()] += 1;
        }
        let sd = (16_000.0f64 / 16.0 * 15.0 / 16.0).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 4.0 * sd, "count {c}");
        }
    }
}
