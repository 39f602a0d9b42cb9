//! A single 64×64 Jacobian applied to every 8×8 tile, fitted to
//! human ratings by random-walk coordinate descent.
//!
//! The fitted Jacobian is symmetric with a unit diagonal and off-diagonal
//! cells in `[-1, 1]`. Each proposal picks one of the 2016 lower-triangle cells
//! and tries it `± step`; the better candidate is kept if it lowers
//! `1 − pearson(distance, dmos)` on the training pairs.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::LoadedPair;
use crate::error::{Error, Result};
use crate::geometry::{self, DenseJacobian, DifferenceField, GrayImage};

pub const TILE_SIDE: usize = 8;
pub const TILE_DIM: usize = TILE_SIDE * TILE_SIDE;
/// Free cells of a symmetric unit-diagonal 64×64 matrix.
pub const FREE_CELLS: usize = TILE_DIM * (TILE_DIM - 1) / 2;

const FORMAT_HEADER: &str = "strain-iqa tile-jacobian";
const FORMAT_VERSION: u32 = 1;

/// Non-overlapping tiles in row-major tile order, each flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tiles {
    pub side: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Original dimensions when crop mode discarded a right/bottom margin.
    pub cropped_from: Option<(usize, usize)>,
}

fn tiled_extent(width: usize, height: usize, side: usize, crop: bool) -> Result<(usize, usize, bool)> {
    if side == 0 {
        return Err(Error::InvalidParameter("tile side must be positive".into()));
    }
    let (tw, th) = (width / side * side, height / side * side);
    if (tw, th) != (width, height) {
        if !crop {
            return Err(Error::Shape(format!(
                "{width}x{height} image is not divisible into {side}x{side} tiles (enable crop mode to use the top-left {tw}x{th} region)"
            )));
        }
        if tw == 0 || th == 0 {
            return Err(Error::Shape(format!("{width}x{height} image is smaller than one {side}x{side} tile")));
        }
    }
    Ok((tw, th, (tw, th) != (width, height)))
}

fn tiles_of(values: &[f64], width: usize, height: usize, side: usize, crop: bool) -> Result<Tiles> {
    let (tw, th, cropped) = tiled_extent(width, height, side, crop)?;
    let mut vectors = Vec::with_capacity((tw / side) * (th / side));
    for ty in 0..th / side {
        for tx in 0..tw / side {
            let mut v = Vec::with_capacity(side * side);
            for y in 0..side {
                let start = (ty * side + y) * width + tx * side;
                v.extend_from_slice(&values[start..start + side]);
            }
            vectors.push(v);
        }
    }
    Ok(Tiles {
        side,
        vectors,
        cropped_from: cropped.then_some((width, height)),
    })
}

pub fn tile_image(img: &GrayImage, tile_side: usize, crop: bool) -> Result<Tiles> {
    tiles_of(img.values(), img.width(), img.height(), tile_side, crop)
}

pub fn tile_field(delta: &DifferenceField, tile_side: usize, crop: bool) -> Result<Vec<Vec<f64>>> {
    Ok(tiles_of(delta.values(), delta.width(), delta.height(), tile_side, crop)?.vectors)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JacobianMetadata {
    pub dataset_id: String,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub step: f64,
    pub final_error: Option<f64>,
}

/// Symmetric 64×64 Jacobian with unit diagonal and off-diagonals in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TileJacobian {
    entries: Vec<f64>,
    pub metadata: JacobianMetadata,
}

impl TileJacobian {
    pub fn identity() -> Self {
        let mut entries = vec![0.0; TILE_DIM * TILE_DIM];
        for i in 0..TILE_DIM {
            entries[i * TILE_DIM + i] = 1.0;
        }
        TileJacobian {
            entries,
            metadata: JacobianMetadata::default(),
        }
    }

    pub fn from_entries(entries: Vec<f64>, metadata: JacobianMetadata) -> Result<Self> {
        validate_entries(&entries)?;
        Ok(TileJacobian { entries, metadata })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * TILE_DIM + col]
    }

    pub fn to_dense(&self) -> DenseJacobian {
        DenseJacobian::new(TILE_DIM, self.entries.clone()).expect("validated 64x64 matrix")
    }

    fn tile_distance(&self, tile: &[f64]) -> f64 {
        self.entries
            .chunks_exact(TILE_DIM)
            .map(|row| {
                let y: f64 = row.iter().zip(tile).map(|(a, b)| a * b).sum();
                y * y
            })
            .sum()
    }
}

fn validate_entries(entries: &[f64]) -> Result<()> {
    if entries.len() != TILE_DIM * TILE_DIM {
        return Err(Error::Invariant(format!(
            "tile jacobian needs {} entries, got {}",
            TILE_DIM * TILE_DIM,
            entries.len()
        )));
    }
    for i in 0..TILE_DIM {
        for j in 0..TILE_DIM {
            let v = entries[i * TILE_DIM + j];
            if !v.is_finite() {
                return Err(Error::Invariant(format!("entry ({i}, {j}) is not finite")));
            }
            if i == j && v != 1.0 {
                return Err(Error::Invariant(format!("diagonal entry ({i}, {i}) is {v}, expected 1")));
            }
            if i != j && !(-1.0..=1.0).contains(&v) {
                return Err(Error::Invariant(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
            }
            if j < i && v != entries[j * TILE_DIM + i] {
                return Err(Error::Invariant(format!(
                    "asymmetric pair ({i}, {j}) = {v} vs ({j}, {i}) = {}",
                    entries[j * TILE_DIM + i]
                )));
            }
        }
    }
    Ok(())
}

/// `Σ_t Δ_tᵀ JᵀJ Δ_t` over the 8×8 tiles of the difference field.
pub fn tiled_distance(reference: &GrayImage, degraded: &GrayImage, j: &TileJacobian) -> Result<f64> {
    tiled_distance_with(reference, degraded, j, false)
}

pub fn tiled_distance_with(reference: &GrayImage, degraded: &GrayImage, j: &TileJacobian, crop: bool) -> Result<f64> {
    let delta = geometry::difference(reference, degraded)?;
    Ok(tile_field(&delta, TILE_SIDE, crop)?.iter().map(|t| j.tile_distance(t)).sum())
}

/// How the per-pair distance enters the correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceForm {
    #[default]
    Squared,
    Root,
}

impl DistanceForm {
    fn apply(self, d: f64) -> f64 {
        match self {
            DistanceForm::Squared => d,
            DistanceForm::Root => d.max(0.0).sqrt(),
        }
    }
}

/// Objective value with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorValue {
    pub error: f64,
    pub degenerate: bool,
}

const DEGENERATE: ErrorValue = ErrorValue {
    error: 1.0,
    degenerate: true,
};

/// `1 − pearson(tiled distance, dmos)`; 1 with a flag when either side is constant.
pub fn training_error(j: &TileJacobian, pairs: &[LoadedPair]) -> Result<ErrorValue> {
    training_error_with(j, pairs, false, DistanceForm::Squared)
}

pub fn training_error_with(j: &TileJacobian, pairs: &[LoadedPair], crop: bool, form: DistanceForm) -> Result<ErrorValue> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!("training error needs at least 3 pairs, got {}", pairs.len())));
    }
    let d: Vec<f64> = pairs
        .par_iter()
        .map(|p| tiled_distance_with(&p.reference, &p.degraded, j, crop))
        .collect::<Result<_>>()?;
    let objective = Objective::new(pairs.iter().map(|p| p.dmos).collect(), form);
    Ok(objective.evaluate(d.iter().copied()))
}

/// Pearson against fixed ratings, with the ratings pre-centered.
struct Objective {
    centered: Vec<f64>,
    norm: f64,
    form: DistanceForm,
}

impl Objective {
    fn new(dmos: Vec<f64>, form: DistanceForm) -> Self {
        let m = dmos.iter().sum::<f64>() / dmos.len() as f64;
        let centered: Vec<f64> = dmos.iter().map(|v| v - m).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        Objective { centered, norm, form }
    }

    fn evaluate(&self, scores: impl Iterator<Item = f64> + Clone) -> ErrorValue {
        if self.norm == 0.0 {
            return DEGENERATE;
        }
        let n = self.centered.len() as f64;
        let mean = scores.clone().map(|s| self.form.apply(s)).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (s, y) in scores.zip(&self.centered) {
            let dx = self.form.apply(s) - mean;
            sxy += dx * y;
            sxx += dx * dx;
        }
        if !(sxx > 0.0) || !sxx.is_finite() {
            return DEGENERATE;
        }
        let r = (sxy / (sxx.sqrt() * self.norm)).clamp(-1.0, 1.0);
        ErrorValue {
            error: 1.0 - r,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Number of proposals.
    pub iterations: usize,
    pub step: f64,
    pub seed: u64,
    pub cell_bound: f64,
    /// Proposals between full objective recomputations; 0 disables them.
    pub checkpoint_every: usize,
    /// Use the top-left tileable region of non-divisible images.
    pub crop: bool,
    pub form: DistanceForm,
    pub dataset_id: String,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            iterations: 10_000,
            step: 0.1,
            seed: 0,
            cell_bound: 1.0,
            checkpoint_every: 500,
            crop: false,
            form: DistanceForm::Squared,
            dataset_id: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub incremental: f64,
    pub recomputed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    /// `(iteration, error)`: the initial error at 0, every accepted move,
    /// and the final error at `iterations`.
    pub points: Vec<(usize, f64)>,
    pub initial_error: f64,
    pub final_error: f64,
    pub accepted: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainingTrace {
    /// Largest `|incremental − recomputed|` seen at any checkpoint.
    pub fn max_checkpoint_drift(&self) -> f64 {
        self.checkpoints
            .iter()
            .map(|c| (c.incremental - c.recomputed).abs())
            .fold(0.0, f64::max)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::from("iteration,error\n");
        for (it, e) in &self.points {
            let _ = writeln!(out, "{it},{}", crate::cli::fmt_num(*e));
        }
        out
    }
}

// Per-pair training state: raw tiles, Gram matrix G = Σ ΔΔᵀ, cache M = J·G,
// and the current distance.
struct PairState {
    tiles: Vec<f64>,
    gram: Vec<f64>,
    cache: Vec<f64>,
    distance: f64,
}

impl PairState {
    fn new(tiles: Vec<Vec<f64>>) -> Self {
        let mut gram = vec![0.0; TILE_DIM * TILE_DIM];
        for t in &tiles {
            for a in 0..TILE_DIM {
                let ta = t[a];
                let row = &mut gram[a * TILE_DIM..(a + 1) * TILE_DIM];
                for (g, tb) in row.iter_mut().zip(t) {
                    *g += ta * tb;
                }
            }
        }
        let distance = (0..TILE_DIM).map(|a| gram[a * TILE_DIM + a]).sum();
        PairState {
            tiles: tiles.concat(),
            cache: gram.clone(),
            gram,
            distance,
        }
    }

    fn proposal_terms(&self, a: usize, b: usize) -> (f64, f64) {
        (
            self.cache[a * TILE_DIM + b] + self.cache[b * TILE_DIM + a],
            self.gram[a * TILE_DIM + a] + self.gram[b * TILE_DIM + b],
        )
    }

    fn accept(&mut self, a: usize, b: usize, delta: f64) {
        let (linear, quadratic) = self.proposal_terms(a, b);
        self.distance += 2.0 * delta * linear + delta * delta * quadratic;
        for k in 0..TILE_DIM {
            self.cache[a * TILE_DIM + k] += delta * self.gram[b * TILE_DIM + k];
        }
        for k in 0..TILE_DIM {
            self.cache[b * TILE_DIM + k] += delta * self.gram[a * TILE_DIM + k];
        }
    }

    fn recompute(&self, j: &TileJacobian) -> f64 {
        self.tiles.chunks_exact(TILE_DIM).map(|t| j.tile_distance(t)).sum()
    }
}

fn lower_triangle_cells() -> Vec<(usize, usize)> {
    (1..TILE_DIM).flat_map(|a| (0..a).map(move |b| (a, b))).collect()
}

/// Fits a tile Jacobian to the pairs' DMOS. Deterministic for a given
/// `(pairs, cfg)`: cells are drawn from a ChaCha8 stream seeded by `cfg.seed`.
pub fn train_jacobian(pairs: &[LoadedPair], cfg: &TrainingConfig) -> Result<(TileJacobian, TrainingTrace)> {
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", cfg.step)));
    }
    if !(cfg.cell_bound > 0.0 && cfg.cell_bound <= 1.0) {
        return Err(Error::InvalidParameter(format!("cell bound must be in (0, 1], got {}", cfg.cell_bound)));
    }
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!("training needs at least 3 pairs, got {}", pairs.len())));
    }

    let mut states: Vec<PairState> = pairs
        .par_iter()
        .map(|p| {
            let delta = p.delta()?;
            Ok(PairState::new(tile_field(&delta, TILE_SIDE, cfg.crop)?))
        })
        .collect::<Result<_>>()?;
    let objective = Objective::new(pairs.iter().map(|p| p.dmos).collect(), cfg.form);

    let cells = lower_triangle_cells();
    debug_assert_eq!(cells.len(), FREE_CELLS);
    // off-diagonals are lattice multiples of the step
    let mut lattice = vec![0i64; TILE_DIM * TILE_DIM];
    let mut jac = TileJacobian::identity();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut current = objective.evaluate(states.iter().map(|s| s.distance));
    let mut trace = TrainingTrace {
        points: vec![(0, current.error)],
        initial_error: current.error,
        ..TrainingTrace::default()
    };
    let in_bounds = |k: i64| (k as f64 * cfg.step).abs() <= cfg.cell_bound + 1e-12;

    let mut terms = vec![(0.0, 0.0); states.len()];
    for iteration in 1..=cfg.iterations {
        let (a, b) = cells[rng.gen_range(0..FREE_CELLS)];
        let k = lattice[a * TILE_DIM + b];
        let cur_value = jac.get(a, b);
        for (t, s) in terms.iter_mut().zip(&states) {
            *t = s.proposal_terms(a, b);
        }

        let mut best: Option<(f64, i64)> = None;
        for dir in [1i64, -1] {
            if !in_bounds(k + dir) {
                continue;
            }
            let delta = value_at(k + dir, cfg) - cur_value;
            let candidate = objective.evaluate(
                states
                    .iter()
                    .zip(&terms)
                    .map(|(s, (lin, quad))| s.distance + 2.0 * delta * lin + delta * delta * quad),
            );
            if candidate.degenerate {
                continue;
            }
            // strict `<` keeps +step on ties
            if best.is_none_or(|(e, _)| candidate.error < e) {
                best = Some((candidate.error, dir));
            }
        }

        if let Some((err, dir)) = best.filter(|&(e, _)| e < current.error) {
            let new_k = k + dir;
            let delta = value_at(new_k, cfg) - cur_value;
            states.par_iter_mut().for_each(|s| s.accept(a, b, delta));
            lattice[a * TILE_DIM + b] = new_k;
            lattice[b * TILE_DIM + a] = new_k;
            let v = value_at(new_k, cfg);
            jac.entries[a * TILE_DIM + b] = v;
            jac.entries[b * TILE_DIM + a] = v;
            current = ErrorValue {
                error: err,
                degenerate: false,
            };
            trace.accepted += 1;
            trace.points.push((iteration, err));
        }

        if cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0 {
            let incremental = objective.evaluate(states.iter().map(|s| s.distance)).error;
            let fresh: Vec<f64> = states.par_iter().map(|s| s.recompute(&jac)).collect();
            let recomputed = objective.evaluate(fresh.iter().copied()).error;
            trace.checkpoints.push(Checkpoint {
                iteration,
                incremental,
                recomputed,
            });
        }
    }

    trace.final_error = current.error;
    trace.points.push((cfg.iterations, current.error));
    jac.metadata = JacobianMetadata {
        dataset_id: cfg.dataset_id.clone(),
        seed: Some(cfg.seed),
        iterations: cfg.iterations,
        step: cfg.step,
        final_error: Some(current.error),
    };
    debug_assert!(validate_entries(&jac.entries).is_ok());
    Ok((jac, trace))
}

fn value_at(k: i64, cfg: &TrainingConfig) -> f64 {
    (k as f64 * cfg.step).clamp(-cfg.cell_bound, cfg.cell_bound)
}

pub fn render_jacobian(j: &TileJacobian) -> String {
    let m = &j.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    let _ = writeln!(out, "format_version: {FORMAT_VERSION}");
    let _ = writeln!(out, "dim: {TILE_DIM}");
    let _ = writeln!(out, "tile_side: {TILE_SIDE}");
    let _ = writeln!(out, "dataset_id: {}", m.dataset_id.replace('\n', " "));
    let _ = writeln!(out, "seed: {}", m.seed.map(|s| s.to_string()).unwrap_or_default());
    let _ = writeln!(out, "iterations: {}", m.iterations);
    let _ = writeln!(out, "step: {}", crate::cli::fmt_num(m.step));
    let _ = writeln!(
        out,
        "final_error: {}",
        m.final_error.map(crate::cli::fmt_num).unwrap_or_default()
    );
    let _ = writeln!(out, "entries:");
    for row in j.entries.chunks_exact(TILE_DIM) {
        let line: Vec<String> = row.iter().map(|v| crate::cli::fmt_num(*v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn save_jacobian(j: &TileJacobian, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_jacobian(j)).map_err(|e| Error::io(path, e))
}

pub fn load_jacobian(path: impl AsRef<Path>) -> Result<TileJacobian> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jacobian(&text, path)
}

pub fn parse_jacobian(text: &str, source: &Path) -> Result<TileJacobian> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l.trim_end()));
    let bad = |line: u64, msg: String| Error::parse(source, line, msg);

    match lines.next() {
        Some((_, FORMAT_HEADER)) => {}
        Some((n, other)) => return Err(bad(n, format!("expected `{FORMAT_HEADER}`, found `{other}`"))),
        None => return Err(bad(0, "empty jacobian file".into())),
    }

    let mut field = |key: &str| -> Result<(u64, String)> {
        match lines.next() {
            Some((n, l)) => match l.split_once(':') {
                Some((k, v)) if k.trim() == key => Ok((n, v.trim().to_string())),
                _ => Err(bad(n, format!("expected `{key}:`, found `{l}`"))),
            },
            None => Err(bad(0, format!("missing `{key}:`"))),
        }
    };
    let num = |(n, v): (u64, String), key: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| bad(n, format!("{key} `{v}` is not a number")))
    };

    let (n, version) = field("format_version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(bad(n, format!("unsupported format version {version}")));
    }
    let (n, dim) = field("dim")?;
    if dim != TILE_DIM.to_string() {
        return Err(bad(n, format!("dim must be {TILE_DIM}, found {dim}")));
    }
    let (n, side) = field("tile_side")?;
    if side != TILE_SIDE.to_string() {
        return Err(bad(n, format!("tile_side must be {TILE_SIDE}, found {side}")));
    }
    let (_, dataset_id) = field("dataset_id")?;
    let (n, seed) = field("seed")?;
    let seed = if seed.is_empty() {
        None
    } else {
        Some(seed.parse().map_err(|_| bad(n, format!("seed `{seed}` is not an integer")))?)
    };
    let (n, iterations) = field("iterations")?;
    let iterations = iterations
        .parse()
        .map_err(|_| bad(n, format!("iterations `{iterations}` is not an integer")))?;
    let step = num(field("step")?, "step")?;
    let final_error = match field("final_error")? {
        (_, v) if v.is_empty() => None,
        f => Some(num(f, "final_error")?),
    };
    let (n, rest) = field("entries")?;
    if !rest.is_empty() {
        return Err(bad(n, "unexpected text after `entries:`".into()));
    }

    let mut entries = Vec::with_capacity(TILE_DIM * TILE_DIM);
    for row in 0..TILE_DIM {
        let (n, l) = lines.next().ok_or_else(|| bad(0, format!("expected {TILE_DIM} entry rows, found {row}")))?;
        let values: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(n, format!("entry `{t}` is not a number"))))
            .collect::<Result<_>>()?;
        if values.len() != TILE_DIM {
            return Err(bad(n, format!("row {row} has {} values, expected {TILE_DIM}", values.len())));
        }
        entries.extend(values);
    }
    if let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(bad(n, format!("trailing content `{l}`")));
    }

    TileJacobian::from_entries(
        entries,
        JacobianMetadata {
            dataset_id,
            seed,
            iterations,
            step,
            final_error,
        },
    )
}
