//! Jacobians generated by fixed connectivity profiles.
//!
//! A translation-invariant perceptual operator is a stencil: `J[i][j] =
//! w(d(i, j))` where `d` is the Euclidean distance between pixel positions and
//! `w` a Gaussian or difference-of-Gaussians profile with the center forced
//! to 1. Scoring a pair convolves the difference field with that stencil
//! (pixels outside the image contribute nothing) and sums the squares, which is
//! exactly `‖JΔ‖²` for the dense `J` restricted to the image.

use rayon::prelude::*;

use crate::corpus::{self, FoldAssignment, LoadedPair};
use crate::error::{Error, Result};
use crate::geometry::{self, DifferenceField, GrayImage};
use crate::stats::Correlation;

/// Default absolute truncation threshold for kernel weights.
pub const DEFAULT_TRUNCATION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    sigma: f64,
}

impl GaussianProfile {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gaussian sigma must be positive, got {sigma}")));
        }
        Ok(GaussianProfile { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weight(&self, d: f64) -> f64 {
        (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Center-surround profile: narrow positive Gaussian minus a broad one,
/// heights in ratio `1 : α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogProfile {
    sigma_center: f64,
    sigma_surround: f64,
    alpha: f64,
}

impl DogProfile {
    pub fn new(sigma_center: f64, sigma_surround: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("sigma_center", sigma_center), ("sigma_surround", sigma_surround), ("alpha", alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(DogProfile {
            sigma_center,
            sigma_surround,
            alpha,
        })
    }

    pub fn sigma_center(&self) -> f64 {
        self.sigma_center
    }

    pub fn sigma_surround(&self) -> f64 {
        self.sigma_surround
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Heights `(1/(1+α), −α/(1+α))` of the two Gaussians.
    fn heights(&self) -> (f64, f64) {
        (1.0 / (1.0 + self.alpha), -self.alpha / (1.0 + self.alpha))
    }

    pub fn weight(&self, d: f64) -> f64 {
        let (a, b) = self.heights();
        let d2 = d * d;
        a * (-d2 / (2.0 * self.sigma_center * self.sigma_center)).exp()
            + b * (-d2 / (2.0 * self.sigma_surround * self.sigma_surround)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Gaussian(GaussianProfile),
    Dog(DogProfile),
}

impl Profile {
    pub fn weight(&self, d: f64) -> f64 {
        match self {
            Profile::Gaussian(g) => g.weight(d),
            Profile::Dog(p) => p.weight(d),
        }
    }

    /// Width of a unit-height Gaussian that bounds `|weight|` everywhere.
    fn envelope_sigma(&self) -> f64 {
        match self {
            Profile::Gaussian(g) => g.sigma,
            Profile::Dog(p) => p.sigma_center.max(p.sigma_surround),
        }
    }
}

impl From<GaussianProfile> for Profile {
    fn from(g: GaussianProfile) -> Self {
        Profile::Gaussian(g)
    }
}

impl From<DogProfile> for Profile {
    fn from(p: DogProfile) -> Self {
        Profile::Dog(p)
    }
}

pub fn gauss_profile(d: f64, sigma: f64) -> Result<f64> {
    if d < 0.0 {
        return Err(Error::InvalidParameter(format!("distance must be non-negative, got {d}")));
    }
    Ok(GaussianProfile::new(sigma)?.weight(d))
}

pub fn dog_profile(d: f64, profile: &DogProfile) -> Result<f64> {
    if d < 0.0 {
        return Err(Error::InvalidParameter(format!("distance must be non-negative, got {d}")));
    }
    Ok(profile.weight(d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusCap {
    /// `⌈4σ⌉`, with σ the wider of the profile's Gaussians.
    FourSigma,
    Fixed(usize),
    /// Radius determined by the threshold alone.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub truncation_threshold: f64,
    pub radius_cap: RadiusCap,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            truncation_threshold: DEFAULT_TRUNCATION,
            radius_cap: RadiusCap::FourSigma,
        }
    }
}

/// Square stencil of side `2·radius + 1` with disk support `dx² + dy² ≤ radius²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityKernel {
    profile: Profile,
    radius: usize,
    weights: Vec<f64>,
}

pub fn build_kernel(profile: impl Into<Profile>, truncation_threshold: f64) -> Result<ConnectivityKernel> {
    build_kernel_with(
        profile,
        &KernelOptions {
            truncation_threshold,
            ..KernelOptions::default()
        },
    )
}

pub fn build_kernel_with(profile: impl Into<Profile>, opts: &KernelOptions) -> Result<ConnectivityKernel> {
    let profile = profile.into();
    let thr = opts.truncation_threshold;
    if !(thr > 0.0 && thr.is_finite()) {
        return Err(Error::InvalidParameter(format!("truncation threshold must be positive, got {thr}")));
    }
    let env = profile.envelope_sigma();
    // |w(d)| ≤ exp(−d²/2σ_env²) < thr for every d beyond this bound
    let by_threshold = if thr >= 1.0 {
        0
    } else {
        (env * (2.0 * (1.0 / thr).ln()).sqrt()).ceil() as usize
    };
    let radius = match opts.radius_cap {
        RadiusCap::FourSigma => by_threshold.min((4.0 * env).ceil() as usize),
        RadiusCap::Fixed(cap) => by_threshold.min(cap),
        RadiusCap::Unbounded => by_threshold,
    };

    let side = 2 * radius + 1;
    let r2 = (radius * radius) as i64;
    let mut weights = vec![0.0; side * side];
    for ky in 0..side {
        for kx in 0..side {
            let (dx, dy) = (kx as i64 - radius as i64, ky as i64 - radius as i64);
            let d2 = dx * dx + dy * dy;
            weights[ky * side + kx] = if d2 == 0 {
                1.0
            } else if d2 <= r2 {
                profile.weight((d2 as f64).sqrt())
            } else {
                0.0
            };
        }
    }
    Ok(ConnectivityKernel {
        profile,
        radius,
        weights,
    })
}

impl ConnectivityKernel {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the center; zero outside the support.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.weights[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }

    /// `‖JΔ‖²` for this kernel's Jacobian.
    pub fn score_delta(&self, delta: &DifferenceField) -> f64 {
        let strained = self.strain(delta.values(), delta.width(), delta.height());
        strained.iter().map(|v| v * v).sum()
    }

    /// The strained field `JΔ`.
    pub fn strain(&self, field: &[f64], width: usize, height: usize) -> Vec<f64> {
        match self.profile {
            Profile::Gaussian(g) => disk_gaussian(field, width, height, g.sigma, self.radius),
            Profile::Dog(p) => {
                let (a, b) = p.heights();
                let gc = disk_gaussian(field, width, height, p.sigma_center, self.radius);
                let gs = disk_gaussian(field, width, height, p.sigma_surround, self.radius);
                // a + b is the profile's own center value; the rest restores the unit diagonal
                let c = 1.0 - a - b;
                gc.iter()
                    .zip(&gs)
                    .zip(field)
                    .map(|((u, v), d)| a * u + b * v + c * d)
                    .collect()
            }
        }
    }

    /// `JΔ` by direct stencil summation over every in-image tap.
    pub fn strain_direct(&self, field: &[f64], width: usize, height: usize) -> Vec<f64> {
        let r = self.radius as isize;
        let (w, h) = (width as isize, height as isize);
        let mut out = vec![0.0; field.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in (-r).max(-y)..=r.min(h - 1 - y) {
                    let row = ((y + dy) * w) as usize;
                    for dx in (-r).max(-x)..=r.min(w - 1 - x) {
                        acc += self.weight(dx, dy) * field[row + (x + dx) as usize];
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    /// The explicit `D × D` Jacobian for a `width × height` image.
    pub fn to_dense(&self, width: usize, height: usize) -> geometry::DenseJacobian {
        let n = width * height;
        geometry::DenseJacobian::from_fn(n, |i, j| {
            let (xi, yi) = ((i % width) as isize, (i / width) as isize);
            let (xj, yj) = ((j % width) as isize, (j / width) as isize);
            self.weight(xj - xi, yj - yi)
        })
        .expect("kernel weights are finite")
    }
}

/// Convolution with `exp(−(dx²+dy²)/2σ²)` restricted to `dx² + dy² ≤ r²`,
/// zero outside the image.
///
/// The weight factors as `g(dx)·g(dy)`, so the disk is evaluated as a sum over
/// rows `dy` of horizontal partial sums with half-width `⌊√(r² − dy²)⌋`; those
/// partial sums are built incrementally for every half-width `0..=r`.
fn disk_gaussian(field: &[f64], width: usize, height: usize, sigma: f64, radius: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let half_width: Vec<usize> = (0..=radius)
        .map(|dy| {
            let rem = radius * radius - dy * dy;
            let mut m = (rem as f64).sqrt() as usize;
            while m * m > rem {
                m -= 1;
            }
            while (m + 1) * (m + 1) <= rem {
                m += 1;
            }
            m
        })
        .collect();

    let mut partial: Vec<Vec<f64>> = Vec::with_capacity(radius + 1);
    partial.push(field.to_vec());
    for m in 1..=radius {
        let prev = &partial[m - 1];
        let mut next = prev.clone();
        for y in 0..height {
            let row = &field[y * width..(y + 1) * width];
            for x in 0..width {
                let mut s = 0.0;
                if x + m < width {
                    s += row[x + m];
                }
                if x >= m {
                    s += row[x - m];
                }
                next[y * width + x] += g[m] * s;
            }
        }
        partial.push(next);
    }

    let mut out = vec![0.0; field.len()];
    for y in 0..height {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(height - 1);
        let dst = &mut out[y * width..(y + 1) * width];
        for sy in lo..=hi {
            let dy = sy.abs_diff(y);
            let src = &partial[half_width[dy]][sy * width..(sy + 1) * width];
            let gy = g[dy];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += gy * s;
            }
        }
    }
    out
}

/// Perceived squared distance under a connectivity kernel, over the full image.
pub fn score_pair(reference: &GrayImage, degraded: &GrayImage, kernel: &ConnectivityKernel) -> Result<f64> {
    Ok(kernel.score_delta(&geometry::difference(reference, degraded)?))
}

/// Sensitivity variant: each `tile_side × tile_side` tile is strained on its
/// own (zero outside the tile) and tile scores are summed.
pub fn score_pair_tiled(
    reference: &GrayImage,
    degraded: &GrayImage,
    kernel: &ConnectivityKernel,
    tile_side: usize,
) -> Result<f64> {
    let delta = geometry::difference(reference, degraded)?;
    let tiles = crate::regression::tile_field(&delta, tile_side, false)?;
    Ok(tiles
        .iter()
        .map(|t| kernel.strain_direct(t, tile_side, tile_side).iter().map(|v| v * v).sum::<f64>())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub truncation_threshold: f64,
    pub correlation: Correlation,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            truncation_threshold: DEFAULT_TRUNCATION,
            correlation: Correlation::Pearson,
        }
    }
}

/// Error curves of a cross-validated parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param_names: Vec<&'static str>,
    /// Evaluated parameter tuples, in grid order.
    pub grid: Vec<Vec<f64>>,
    pub folds: FoldAssignment,
    /// `train_error[fold][point]`: `1 − correlation` over pairs whose
    /// reference is outside `fold`.
    pub train_error: Vec<Vec<f64>>,
    /// Same statistic over the pairs of `fold` itself.
    pub test_error: Vec<Vec<f64>>,
    /// Set where scores (or DMOS) had zero variance on the training pairs.
    pub degenerate: Vec<Vec<bool>>,
    /// Grid index minimizing `train_error`, per fold (first on ties).
    pub best: Vec<usize>,
}

impl SweepResult {
    pub fn best_params(&self, fold: usize) -> &[f64] {
        &self.grid[self.best[fold]]
    }

    /// For a 3-parameter (center, surround, α) sweep: the error surface with α
    /// eliminated by taking its best value at each (center, surround).
    /// Returns `(center, surround, best α, error)` in first-appearance order.
    pub fn reduce_last_axis(&self, fold: usize) -> Vec<(f64, f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64, f64)> = Vec::new();
        for (point, params) in self.grid.iter().enumerate() {
            let err = self.train_error[fold][point];
            match out.iter_mut().find(|e| e.0 == params[0] && e.1 == params[1]) {
                Some(e) if err < e.3 => *e = (params[0], params[1], params[2], err),
                Some(_) => {}
                None => out.push((params[0], params[1], params[2], err)),
            }
        }
        out
    }

    /// One row per fold × grid point: `fold,<params>,train_error,test_error,degenerate`.
    pub fn render_table(&self) -> String {
        let mut out = String::from("fold");
        for n in &self.param_names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",train_error,test_error,degenerate\n");
        for fold in 0..self.train_error.len() {
            for (point, params) in self.grid.iter().enumerate() {
                out.push_str(&fold.to_string());
                for p in params {
                    out.push_str(&format!(",{}", crate::cli::fmt_num(*p)));
                }
                out.push_str(&format!(
                    ",{},{},{}\n",
                    crate::cli::fmt_num(self.train_error[fold][point]),
                    crate::cli::fmt_num(self.test_error[fold][point]),
                    self.degenerate[fold][point]
                ));
            }
        }
        out
    }
}

/// Inclusive arithmetic grid `start, start+step, …, end`, rounded to 12 decimals.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || end < start {
        return Err(Error::InvalidParameter(format!("bad grid {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub fn default_gaussian_grid() -> Vec<f64> {
    grid(0.4, 3.0, 0.1).expect("static grid")
}

pub fn default_dog_grids() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        grid(0.6, 5.0, 0.2).expect("static grid"),
        grid(0.6, 5.6, 0.2).expect("static grid"),
        grid(0.5, 1.5, 0.1).expect("static grid"),
    )
}

fn fold_errors(
    scores: &[Vec<f64>],
    pairs: &[LoadedPair],
    folds: &FoldAssignment,
    correlation: Correlation,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>, Vec<usize>)> {
    let fold_of: Vec<usize> = pairs
        .iter()
        .map(|p| folds.fold_of(&p.reference_id).expect("every reference was assigned"))
        .collect();
    let mut train = vec![Vec::with_capacity(scores.len()); folds.k];
    let mut test = vec![Vec::with_capacity(scores.len()); folds.k];
    let mut degenerate = vec![Vec::with_capacity(scores.len()); folds.k];
    for fold in 0..folds.k {
        let in_fold: Vec<usize> = (0..pairs.len()).filter(|&i| fold_of[i] == fold).collect();
        let out_fold: Vec<usize> = (0..pairs.len()).filter(|&i| fold_of[i] != fold).collect();
        if in_fold.is_empty() || out_fold.is_empty() {
            return Err(Error::InvalidParameter(format!("fold {fold} leaves an empty partition")));
        }
        for s in scores {
            let (e_train, deg) = error_on(s, pairs, &out_fold, correlation);
            let (e_test, _) = error_on(s, pairs, &in_fold, correlation);
            train[fold].push(e_train);
            test[fold].push(e_test);
            degenerate[fold].push(deg);
        }
    }
    let best = train
        .iter()
        .map(|errs| {
            let mut best = 0;
            for (i, &e) in errs.iter().enumerate() {
                if e < errs[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok((train, test, degenerate, best))
}

fn error_on(scores: &[f64], pairs: &[LoadedPair], idx: &[usize], correlation: Correlation) -> (f64, bool) {
    let x: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| pairs[i].dmos).collect();
    match correlation.compute(&x, &y) {
        Ok(r) => (1.0 - r, false),
        Err(_) => (1.0, true),
    }
}

fn deltas(pairs: &[LoadedPair]) -> Result<Vec<DifferenceField>> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one pair".into()));
    }
    pairs.par_iter().map(LoadedPair::delta).collect()
}

/// Cross-validated sweep of the Gaussian width.
pub fn sweep_gaussian(
    pairs: &[LoadedPair],
    sigma_grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if sigma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty sigma grid".into()));
    }
    let assignment = corpus::stratified_folds_for(corpus::references_of(pairs), folds, seed)?;
    let deltas = deltas(pairs)?;
    let scores: Vec<Vec<f64>> = sigma_grid
        .iter()
        .map(|&sigma| {
            let kernel = build_kernel(GaussianProfile::new(sigma)?, opts.truncation_threshold)?;
            Ok(deltas.par_iter().map(|d| kernel.score_delta(d)).collect())
        })
        .collect::<Result<_>>()?;
    let (train_error, test_error, degenerate, best) = fold_errors(&scores, pairs, &assignment, opts.correlation)?;
    Ok(SweepResult {
        param_names: vec!["sigma"],
        grid: sigma_grid.iter().map(|&s| vec![s]).collect(),
        folds: assignment,
        train_error,
        test_error,
        degenerate,
        best,
    })
}

/// Cross-validated sweep over (center width, surround width, α).
///
/// For fixed widths the strained field is `a·Gc + b·Gs + c·Δ` with `a, b, c`
/// depending only on α, so each pair's score is a quadratic in those heights
/// and the α axis costs nothing beyond six inner products.
pub fn sweep_dog(
    pairs: &[LoadedPair],
    center_grid: &[f64],
    surround_grid: &[f64],
    alpha_grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if center_grid.is_empty() || surround_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidParameter("empty DOG grid axis".into()));
    }
    for &a in alpha_grid {
        DogProfile::new(1.0, 1.0, a)?;
    }
    let assignment = corpus::stratified_folds_for(corpus::references_of(pairs), folds, seed)?;
    let deltas = deltas(pairs)?;

    let mut grid = Vec::new();
    let mut scores = Vec::new();
    for &sc in center_grid {
        for &ss in surround_grid {
            let probe = DogProfile::new(sc, ss, 1.0)?;
            let radius = build_kernel(probe, opts.truncation_threshold)?.radius();
            // ⟨Δ,Δ⟩ ⟨Gc,Gc⟩ ⟨Gs,Gs⟩ ⟨Δ,Gc⟩ ⟨Δ,Gs⟩ ⟨Gc,Gs⟩ per pair
            let moments: Vec<[f64; 6]> = deltas
                .par_iter()
                .map(|d| {
                    let (w, h) = (d.width(), d.height());
                    let f = d.values();
                    let gc = disk_gaussian(f, w, h, sc, radius);
                    let gs = disk_gaussian(f, w, h, ss, radius);
                    let mut m = [0.0; 6];
                    for i in 0..f.len() {
                        m[0] += f[i] * f[i];
                        m[1] += gc[i] * gc[i];
                        m[2] += gs[i] * gs[i];
                        m[3] += f[i] * gc[i];
                        m[4] += f[i] * gs[i];
                        m[5] += gc[i] * gs[i];
                    }
                    m
                })
                .collect();
            for &alpha in alpha_grid {
                let (a, b) = DogProfile::new(sc, ss, alpha)?.heights();
                let c = 1.0 - a - b;
                grid.push(vec![sc, ss, alpha]);
                scores.push(
                    moments
                        .iter()
                        .map(|m| {
                            c * c * m[0] + a * a * m[1] + b * b * m[2]
                                + 2.0 * (a * c * m[3] + b * c * m[4] + a * b * m[5])
                        })
                        .collect(),
                );
            }
        }
    }
    let (train_error, test_error, degenerate, best) = fold_errors(&scores, pairs, &assignment, opts.correlation)?;
    Ok(SweepResult {
        param_names: vec!["sigma_center", "sigma_surround", "alpha"],
        grid,
        folds: assignment,
        train_error,
        test_error,
        degenerate,
        best,
    })
}
