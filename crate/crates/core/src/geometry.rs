//! Stimulus vectors, Jacobians and the perceived-distance quadratic form.
//!
//! Images are flattened row-major everywhere: pixel `(x, y)` of a `w × h`
//! image is dimension `y * w + x`. All distances are squared quantities; use
//! [`root`] when a non-squared value is wanted for display.

use crate::error::{Error, Result};

/// Grayscale image with real-valued luminance, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite luminance at pixel {i}"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        GrayImage::new(width, height, values)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels, the dimensionality of image space.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Top-left `width × height` region.
    pub fn crop(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width > self.width || height > self.height {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} image to {width}x{height}",
                self.width, self.height
            )));
        }
        GrayImage::from_fn(width, height, |x, y| self.get(x, y))
    }
}

/// Per-pixel luminance change `s' − s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DifferenceField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Shape(format!(
                "difference field {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(DifferenceField {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Squared Euclidean norm of the field.
    pub fn euclidean_sq(&self) -> f64 {
        euclidean_distance_sq(self)
    }
}

pub fn difference(reference: &GrayImage, degraded: &GrayImage) -> Result<DifferenceField> {
    if reference.width != degraded.width || reference.height != degraded.height {
        return Err(Error::Shape(format!(
            "reference is {}x{} but degraded is {}x{}",
            reference.width, reference.height, degraded.width, degraded.height
        )));
    }
    let values = degraded
        .values
        .iter()
        .zip(&reference.values)
        .map(|(d, r)| d - r)
        .collect();
    Ok(DifferenceField {
        width: reference.width,
        height: reference.height,
        values,
    })
}

pub fn euclidean_distance_sq(delta: &DifferenceField) -> f64 {
    delta.values.iter().map(|v| v * v).sum()
}

/// Square root of a squared distance, for reporting.
pub fn root(distance_sq: f64) -> f64 {
    distance_sq.max(0.0).sqrt()
}

fn check_square(dim: usize, entries: &[f64], what: &str) -> Result<()> {
    if dim == 0 {
        return Err(Error::Shape(format!("{what} dimension must be positive")));
    }
    if entries.len() != dim * dim {
        return Err(Error::Shape(format!(
            "{what} of dimension {dim} needs {} entries, got {}",
            dim * dim,
            entries.len()
        )));
    }
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what} entry ({}, {}) is not finite",
            i / dim,
            i % dim
        )));
    }
    Ok(())
}

/// `J` (equivalently the perceptual operator `P`) as an explicit `D × D` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseJacobian {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseJacobian {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_square(dim, &entries, "jacobian")?;
        Ok(DenseJacobian { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        DenseJacobian { dim, entries }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        DenseJacobian::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self.get(i, i) == 1.0)
    }

    /// `J v`, accumulated left to right along each row.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `(∇ū)ᵀ = P − I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementGradient {
    dim: usize,
    entries: Vec<f64>,
}

impl DisplacementGradient {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }
}

/// Symmetric first-order metric distortion, `ε = sym(J) − I`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainTensor {
    dim: usize,
    entries: Vec<f64>,
}

impl StrainTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `Δᵀ ε Δ`.
    pub fn quadratic_form(&self, delta: &[f64]) -> Result<f64> {
        if delta.len() != self.dim {
            return Err(Error::Shape(format!(
                "strain tensor of dimension {} applied to {} values",
                self.dim,
                delta.len()
            )));
        }
        Ok(self
            .entries
            .chunks_exact(self.dim)
            .zip(delta)
            .map(|(row, di)| di * row.iter().zip(delta).map(|(e, dj)| e * dj).sum::<f64>())
            .sum())
    }
}

pub fn displacement_gradient(p: &DenseJacobian) -> DisplacementGradient {
    let dim = p.dim;
    let mut entries = p.entries.clone();
    for i in 0..dim {
        entries[i * dim + i] -= 1.0;
    }
    DisplacementGradient { dim, entries }
}

pub fn strain_tensor(j: &DenseJacobian) -> StrainTensor {
    let dim = j.dim;
    let mut entries = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            // a + b == b + a in IEEE arithmetic, so the result is exactly symmetric
            let sym = (j.get(r, c) + j.get(c, r)) / 2.0;
            entries[r * dim + c] = if r == c { sym - 1.0 } else { sym };
        }
    }
    StrainTensor { dim, entries }
}

/// `‖JΔ‖² = Δᵀ JᵀJ Δ` with `Δ` flattened row-major.
pub fn perceived_distance_sq_dense(delta: &DifferenceField, j: &DenseJacobian) -> Result<f64> {
    perceived_distance_sq_vec(delta.values(), j)
}

pub(crate) fn perceived_distance_sq_vec(delta: &[f64], j: &DenseJacobian) -> Result<f64> {
    if delta.len() != j.dim {
        return Err(Error::Shape(format!(
            "jacobian of dimension {} applied to {} pixels",
            j.dim,
            delta.len()
        )));
    }
    Ok(j.apply(delta).iter().map(|v| v * v).sum())
}

/// Linearised distance `d_E² + 2 Δᵀ ε Δ`, dropping the second-order term.
pub fn first_order_distance_sq(delta: &DifferenceField, eps: &StrainTensor) -> Result<f64> {
    Ok(euclidean_distance_sq(delta) + 2.0 * eps.quadratic_form(delta.values())?)
}
