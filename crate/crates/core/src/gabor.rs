//! Gabor kernels and the fixed filter bank used as the network stem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaborPart {
    #[default]
    Real,
    Imag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Wavelength of the sinusoid, pixels.
    pub lambda: f64,
    /// Orientation, radians.
    pub theta: f64,
    /// Phase offset, radians.
    pub phi: f64,
    /// Gaussian envelope standard deviation, pixels.
    pub sigma: f64,
    /// Spatial aspect ratio.
    pub gamma: f64,
    /// Odd kernel side length.
    pub ksize: usize,
}

/// Every violated constraint, with the offending value. Empty means valid.
pub fn validate_gabor_params(p: &GaborParams) -> Vec<String> {
    let mut v = Vec::new();
    if !(p.theta >= 0.0 && p.theta <= 2.0 * PI) {
        v.push(format!("theta {} out of [0, 2π]", p.theta));
    }
    if !(p.lambda >= 2.0) {
        v.push(format!("lambda < 2 (got {})", p.lambda));
    }
    if !(p.gamma > 0.0 && p.gamma <= 1.0) {
        v.push(format!("gamma out of (0,1] (got {})", p.gamma));
    }
    if !(p.phi >= -PI && p.phi <= PI) {
        v.push(format!("phi {} out of [-π, π]", p.phi));
    }
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        v.push(format!("sigma must be > 0 (got {})", p.sigma));
    }
    if p.ksize < 3 || p.ksize.is_multiple_of(2) {
        v.push(format!("ksize must be odd and ≥ 3 (got {})", p.ksize));
    }
    v
}

/// Value of the Gabor function at continuous offset `(x, y)` from the centre.
pub fn gabor_value(p: &GaborParams, part: GaborPart, x: f64, y: f64) -> f64 {
    let (s, c) = p.theta.sin_cos();
    let xr = x * c + y * s;
    let yr = -x * s + y * c;
    let envelope = (-(xr * xr + p.gamma * p.gamma * yr * yr) / (2.0 * p.sigma * p.sigma)).exp();
    let arg = 2.0 * PI * xr / p.lambda + p.phi;
    match part {
        GaborPart::Real => envelope * arg.cos(),
        GaborPart::Imag => envelope * arg.sin(),
    }
}

/// ksize×ksize kernel; entry `[row, col]` sits at offset
/// `(x, y) = (col − r, row − r)` with `r = ksize / 2`.
pub fn gabor_kernel(p: &GaborParams, part: GaborPart) -> Result<Tensor> {
    let violations = validate_gabor_params(p);
    if !violations.is_empty() {
        return Err(Error::InvalidGabor(violations));
    }
    let r = (p.ksize / 2) as isize;
    Tensor::from_fn(&[p.ksize, p.ksize], |i| {
        let y = i[0] as isize - r;
        let x = i[1] as isize - r;
        gabor_value(p, part, x as f64, y as f64)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub n_orientations: usize,
    pub wavelengths: Vec<f64>,
    pub phi: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub ksize: usize,
    pub part: GaborPart,
    /// Scale every kernel to unit L2 norm.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for BankSpec {
    fn default() -> Self {
        BankSpec {
            n_orientations: 8,
            wavelengths: vec![2.0, 4.0],
            phi: 0.0,
            sigma: 2.0,
            gamma: 0.5,
            ksize: 3,
            part: GaborPart::Real,
            normalize: false,
        }
    }
}

impl BankSpec {
    pub fn n_filters(&self) -> usize {
        self.n_orientations * self.wavelengths.len()
    }

    /// Parameters of each filter, orientation-major.
    pub fn params(&self) -> Vec<GaborParams> {
        let mut out = Vec::with_capacity(self.n_filters());
        for j in 0..self.n_orientations {
            let theta = j as f64 * PI / self.n_orientations as f64;
            for &lambda in &self.wavelengths {
                out.push(GaborParams {
                    lambda,
                    theta,
                    phi: self.phi,
                    sigma: self.sigma,
                    gamma: self.gamma,
                    ksize: self.ksize,
                });
            }
        }
        out
    }
}

/// ksize×ksize×1×(n_orientations·|wavelengths|) bank with orientations
/// `θ_j = j·π/n` and one output channel per (orientation, wavelength).
pub fn build_filter_bank(spec: &BankSpec) -> Result<Tensor> {
    if spec.n_orientations == 0 {
        return Err(Error::invalid("n_orientations", "must be ≥ 1"));
    }
    if spec.wavelengths.is_empty() {
        return Err(Error::invalid("wavelengths", "at least one wavelength required"));
    }
    let params = spec.params();
    let m = params.len();
    let k = spec.ksize;
    let mut kernels = Vec::with_capacity(m);
    for p in &params {
        let mut g = gabor_kernel(p, spec.part)?;
        if spec.normalize {
            let norm = g.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                g.data_mut().iter_mut().for_each(|v| *v /= norm);
            }
        }
        kernels.push(g);
    }
    Tensor::from_fn(&[k, k, 1, m], |i| kernels[i[3]].get(&[i[0], i[1]]))
}
