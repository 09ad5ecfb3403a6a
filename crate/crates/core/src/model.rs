//! The phase-retrieval problem: loss family, instances, gradients.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm};

/// Name of the generator behind every seeded draw, recorded in artifacts.
pub const RNG_ID: &str = "ChaCha20 (rand_chacha 0.9, StandardNormal from rand_distr 0.5)";

/// Independent ChaCha20 streams carved out of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Signal = 0,
    Sensing = 1,
    Init = 2,
    SpectralReference = 3,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Rescales `v` in place to Euclidean norm `sqrt(n)`.
pub fn rescale_to_sphere(v: &mut [f64]) -> Result<()> {
    let nv = norm(v);
    if !(nv > 0.0 && nv.is_finite()) {
        return Err(Error::InvalidArgument("cannot rescale a zero or non-finite vector".into()));
    }
    let s = (v.len() as f64).sqrt() / nv;
    v.iter_mut().for_each(|x| *x *= s);
    Ok(())
}

/// The normalized intensity loss `l_a(y, yhat) = (y^2 - yhat^2)^2 / (a + y^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub a: f64,
}

impl LossSpec {
    pub fn new(a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "loss parameter a must be finite and nonnegative, got {a}"
            )));
        }
        Ok(LossSpec { a })
    }

    fn denom(&self, y: f64) -> Result<f64> {
        let d = self.a + y * y;
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::DivisionByZero { y })
        }
    }

    pub fn loss(&self, y: f64, yhat: f64) -> Result<f64> {
        let d = self.denom(y)?;
        let r = y * y - yhat * yhat;
        Ok(r * r / d)
    }

    /// First derivative in `yhat`: `4 yhat (yhat^2 - y^2) / (a + y^2)`.
    pub fn dloss(&self, y: f64, yhat: f64) -> Result<f64> {
        let d = self.denom(y)?;
        Ok(4.0 * yhat * (yhat * yhat - y * y) / d)
    }

    /// Second derivative in `yhat`: `(12 yhat^2 - 4 y^2) / (a + y^2)`.
    pub fn curvature(&self, y: f64, yhat: f64) -> Result<f64> {
        let d = self.denom(y)?;
        Ok((12.0 * yhat * yhat - 4.0 * y * y) / d)
    }

    // Unchecked forms for inner loops over validated labels.
    #[inline]
    pub(crate) fn dloss_unchecked(&self, y2: f64, yhat: f64) -> f64 {
        4.0 * yhat * (yhat * yhat - y2) / (self.a + y2)
    }

    #[inline]
    pub(crate) fn curvature_unchecked(&self, y2: f64, yhat: f64) -> f64 {
        (12.0 * yhat * yhat - 4.0 * y2) / (self.a + y2)
    }

    /// Checks that every label can be evaluated.
    pub fn validate_labels(&self, labels: &[f64]) -> Result<()> {
        for &y in labels {
            self.denom(y)?;
        }
        Ok(())
    }
}

/// How sensing vectors are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingNorm {
    /// Entries i.i.d. N(0, 1/N); unit norm in expectation.
    #[default]
    Variance,
    /// Each vector rescaled to exactly unit norm.
    ExactUnit,
}

/// One planted phase-retrieval problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    m: usize,
    seed: u64,
    norm_mode: SensingNorm,
    signal: Vec<f64>,
    /// Row-major `m x n`.
    sensing: Vec<f64>,
    labels: Vec<f64>,
}

impl Instance {
    pub fn generate(n: usize, alpha: f64, seed: u64) -> Result<Self> {
        Self::generate_with(n, alpha, seed, SensingNorm::Variance)
    }

    pub fn generate_with(n: usize, alpha: f64, seed: u64, norm_mode: SensingNorm) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(alloc::format!("N must be at least 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("alpha must be positive, got {alpha}")));
        }
        let m = (alpha * n as f64).round() as usize;
        if m < 1 {
            return Err(Error::InvalidArgument("round(alpha N) must be at least 1".into()));
        }
        let mut signal = gaussian_vector(&mut rng_for(seed, Stream::Signal), n);
        rescale_to_sphere(&mut signal)?;
        let mut rng = rng_for(seed, Stream::Sensing);
        let sd = 1.0 / (n as f64).sqrt();
        let mut sensing = vec![0.0; m * n];
        for row in sensing.chunks_exact_mut(n) {
            for x in row.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *x = sd * g;
            }
            if norm_mode == SensingNorm::ExactUnit {
                let r = norm(row);
                row.iter_mut().for_each(|x| *x /= r);
            }
        }
        Self::assemble(n, m, seed, norm_mode, signal, sensing)
    }

    /// Builds an instance from explicit tensors; labels are recomputed.
    pub fn from_parts(n: usize, signal: Vec<f64>, sensing: Vec<f64>, seed: u64) -> Result<Self> {
        check_len(n, &signal)?;
        if n == 0 || sensing.is_empty() || sensing.len() % n != 0 {
            return Err(Error::InvalidArgument("sensing length must be a positive multiple of N".into()));
        }
        let m = sensing.len() / n;
        Self::assemble(n, m, seed, SensingNorm::Variance, signal, sensing)
    }

    fn assemble(
        n: usize,
        m: usize,
        seed: u64,
        norm_mode: SensingNorm,
        signal: Vec<f64>,
        sensing: Vec<f64>,
    ) -> Result<Self> {
        let labels = sensing.chunks_exact(n).map(|x| dot(x, &signal).abs()).collect();
        Ok(Instance {
            n,
            m,
            seed,
            norm_mode,
            signal,
            sensing,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sensing_norm(&self) -> SensingNorm {
        self.norm_mode
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn sensing(&self) -> &[f64] {
        &self.sensing
    }

    pub fn sensing_row(&self, i: usize) -> &[f64] {
        &self.sensing[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Predicted labels `x_i . w`.
    pub fn predictions(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, w)?;
        Ok(self.sensing.chunks_exact(self.n).map(|x| dot(x, w)).collect())
    }

    /// `(|y_i|, x_i . w)` for every sample.
    pub fn label_pairs(&self, w: &[f64]) -> Result<Vec<(f64, f64)>> {
        let p = self.predictions(w)?;
        Ok(self.labels.iter().copied().zip(p).collect())
    }
}

/// `L(w) = 1/2 sum_i l_a(y_i, x_i . w)`.
pub fn total_loss(spec: &LossSpec, inst: &Instance, w: &[f64]) -> Result<f64> {
    let p = inst.predictions(w)?;
    let mut s = 0.0;
    for (&y, yh) in inst.labels.iter().zip(p) {
        s += spec.loss(y, yh)?;
    }
    Ok(0.5 * s)
}

/// Gradient of [`total_loss`].
pub fn gradient(spec: &LossSpec, inst: &Instance, w: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; inst.n];
    loss_and_gradient_into(spec, inst, w, &mut g)?;
    Ok(g)
}

/// Loss and gradient in one pass over the sensing matrix; `g` is overwritten.
pub fn loss_and_gradient_into(spec: &LossSpec, inst: &Instance, w: &[f64], g: &mut [f64]) -> Result<f64> {
    check_len(inst.n, w)?;
    check_len(inst.n, g)?;
    spec.validate_labels(&inst.labels)?;
    g.iter_mut().for_each(|x| *x = 0.0);
    let mut loss = 0.0;
    for (x, &y) in inst.sensing.chunks_exact(inst.n).zip(&inst.labels) {
        let yh = dot(x, w);
        let y2 = y * y;
        let r = y2 - yh * yh;
        loss += r * r / (spec.a + y2);
        axpy(0.5 * spec.dloss_unchecked(y2, yh), x, g);
    }
    Ok(0.5 * loss)
}

/// Curvature weights `f_i = d^2 l / d yhat^2` at state `w`.
pub fn curvature_weights(spec: &LossSpec, inst: &Instance, w: &[f64]) -> Result<Vec<f64>> {
    spec.validate_labels(&inst.labels)?;
    let p = inst.predictions(w)?;
    Ok(inst
        .labels
        .iter()
        .zip(p)
        .map(|(&y, yh)| spec.curvature_unchecked(y * y, yh))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let s = LossSpec::new(1.0).unwrap();
        assert_eq!(s.loss(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(s.loss(1.0, -1.0).unwrap(), 0.0);
        assert_eq!(s.loss(1.0, 0.0).unwrap(), 0.5);
        assert_eq!(s.curvature(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(s.curvature(0.0, 1.0).unwrap(), 12.0);
        assert_eq!(s.curvature(1.0, 0.0).unwrap(), -2.0);
    }

    #[test]
    fn zero_a_guard() {
        let s = LossSpec::new(0.0).unwrap();
        assert_eq!(s.loss(0.0, 1.0), Err(Error::DivisionByZero { y: 0.0 }));
        assert!(s.loss(2.0, 1.0).is_ok());
        assert!(LossSpec::new(-1.0).is_err());
    }

    #[test]
    fn tiny_instance_shape() {
        let inst = Instance::generate(2, 0.5, 7).unwrap();
        assert_eq!(inst.m(), 1);
        assert!((norm(inst.signal()) - 2f64.sqrt()).abs() < 1e-12 * 2f64.sqrt());
        let inst = Instance::generate(1024, 3.1, 1).unwrap();
        assert_eq!(inst.m(), 3174);
    }

    #[test]
    fn exact_unit_rows() {
        let inst = Instance::generate_with(16, 2.0, 3, SensingNorm::ExactUnit).unwrap();
        for i in 0..inst.m() {
            assert!((norm(inst.sensing_row(i)) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_vanishes_at_signal() {
        let inst = Instance::generate(32, 3.0, 5).unwrap();
        let spec = LossSpec::new(0.01).unwrap();
        let g = gradient(&spec, &inst, inst.signal()).unwrap();
        assert!(norm(&g) < 1e-10);
        assert!(total_loss(&spec, &inst, inst.signal()).unwrap() < 1e-20);
    }
}
