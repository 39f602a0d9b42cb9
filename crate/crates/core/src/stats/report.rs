//! Model comparison against DMOS: per-model score columns, correlation
//! cells per row (overall and per category), and pairwise Fisher tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use super::{fisher_rz_two_sample, mean, pearson, permutation_test_corr, spearman, Correlation, ScoreSeries};
use crate::cli::fmt_num;
use crate::corpus::{DmosConvention, FoldAssignment, LoadedPair};
use crate::error::{Error, Result};
use crate::metric::{MetricSpec, Orientation, PairScorer, Trainer};

#[derive(Clone)]
pub enum ModelKind {
    Fixed(Arc<dyn PairScorer>),
    Trained(Arc<dyn Trainer>),
}

#[derive(Clone)]
pub struct Model {
    pub label: String,
    pub orientation: Orientation,
    pub kind: ModelKind,
}

impl Model {
    pub fn fixed(scorer: Arc<dyn PairScorer>) -> Self {
        Model {
            label: scorer.label(),
            orientation: scorer.orientation(),
            kind: ModelKind::Fixed(scorer),
        }
    }

    /// Trained models produce distances.
    pub fn trained(trainer: Arc<dyn Trainer>) -> Self {
        Model {
            label: trainer.label(),
            orientation: Orientation::Distance,
            kind: ModelKind::Trained(trainer),
        }
    }

    pub fn from_spec(spec: &MetricSpec) -> Result<Self> {
        Ok(match spec.trainer() {
            Some(t) => Model::trained(t),
            None => Model::fixed(spec.scorer()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub dataset_id: String,
    /// Trained models fit on all folds but one and score the held-out fold.
    pub folds: Option<FoldAssignment>,
    /// Model index pairs to test for equal correlation.
    pub comparisons: Vec<(usize, usize)>,
    /// Multiplier applied to comparison p-values; `None` leaves them raw.
    pub bonferroni: Option<usize>,
    pub alpha: f64,
    /// Permutation count for per-cell significance; `None` skips the test.
    pub permutations: Option<usize>,
    pub seed: u64,
    pub dmos_convention: DmosConvention,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            dataset_id: String::new(),
            folds: None,
            comparisons: Vec::new(),
            bonferroni: None,
            alpha: 0.05,
            permutations: None,
            seed: 0,
            dmos_convention: DmosConvention::Printed,
        }
    }
}

/// One model's score column aligned with the pair list.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelColumn {
    pub label: String,
    pub orientation: Orientation,
    pub scores: Option<Vec<f64>>,
    pub error: Option<String>,
    /// Trained on the same pairs it scored (no folds supplied).
    pub in_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellStats {
    pub n: usize,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    /// Per-fold Spearman values in fold order; empty without folds.
    pub fold_spearman: Vec<f64>,
    pub fold_pearson: Vec<f64>,
    pub fold_n: Vec<usize>,
    pub permutation_p: Option<f64>,
    pub note: Option<String>,
}

impl CellStats {
    pub fn fold_mean_spearman(&self) -> Option<f64> {
        (!self.fold_spearman.is_empty()).then(|| mean(&self.fold_spearman))
    }

    pub fn fold_mean_pearson(&self) -> Option<f64> {
        (!self.fold_pearson.is_empty()).then(|| mean(&self.fold_pearson))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// Pair indices belonging to the row.
    pub pairs: Vec<usize>,
    /// Aligned with the model columns.
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub row: String,
    pub model_a: usize,
    pub model_b: usize,
    /// Orientation-adjusted Spearman values.
    pub r_a: f64,
    pub r_b: f64,
    pub n: usize,
    pub p: Option<f64>,
    pub fold_mean_p: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub significant: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_references: Vec<String>,
    pub test_pairs: usize,
    pub train_pairs: usize,
}

/// Which references a trained model saw and which pairs it then scored.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub model: usize,
    pub fold: Option<usize>,
    pub train_references: BTreeSet<String>,
    pub scored_pairs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_id: String,
    pub dmos_convention: DmosConvention,
    pub pair_count: usize,
    pub models: Vec<ModelColumn>,
    pub rows: Vec<ReportRow>,
    pub comparisons: Vec<Comparison>,
    pub folds: Vec<FoldSummary>,
    pub fold_seed: Option<u64>,
    pub training: Vec<TrainingRecord>,
    pub bonferroni: Option<usize>,
    pub alpha: f64,
    pub permutations: Option<usize>,
    pub warnings: Vec<String>,
}

fn score_all(scorer: &dyn PairScorer, pairs: &[LoadedPair], indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .par_iter()
        .map(|&i| {
            let p = &pairs[i];
            scorer.score(&p.reference, &p.degraded).and_then(|s| {
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::Degenerate(format!("non-finite score {s}")))
                }
            })
            .map_err(|e| Error::InvalidParameter(format!("pair {} (reference {}): {e}", i + 1, p.reference_id)))
        })
        .collect()
}

fn fold_indices(pairs: &[LoadedPair], folds: &FoldAssignment) -> Result<Vec<usize>> {
    pairs
        .iter()
        .map(|p| {
            folds
                .fold_of(&p.reference_id)
                .ok_or_else(|| Error::InvalidParameter(format!("reference {} has no fold", p.reference_id)))
        })
        .collect()
}

/// Scores every model and assembles the report.
///
/// Fixed models score all pairs. Trained models with folds are fitted once
/// per fold on the other folds' pairs (seed `opts.seed + fold`) and score only
/// that fold; the held-out scores are pooled. Without folds they are fitted
/// and scored in-sample.
pub fn evaluate_models(pairs: &[LoadedPair], models: &[Model], opts: &EvalOptions) -> Result<EvalReport> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!("evaluation needs at least 3 pairs, got {}", pairs.len())));
    }
    if models.is_empty() {
        return Err(Error::InvalidParameter("no models to evaluate".into()));
    }
    for &(a, b) in &opts.comparisons {
        if a >= models.len() || b >= models.len() || a == b {
            return Err(Error::InvalidParameter(format!("invalid comparison ({a}, {b}) for {} models", models.len())));
        }
    }
    if opts.bonferroni == Some(0) {
        return Err(Error::InvalidParameter("bonferroni factor must be at least 1".into()));
    }

    let pair_fold = opts.folds.as_ref().map(|f| fold_indices(pairs, f)).transpose()?;
    let k = opts.folds.as_ref().map_or(0, |f| f.k);
    let mut warnings = opts.folds.as_ref().map(|f| f.warnings.clone()).unwrap_or_default();

    let fold_members = |fold: usize| -> (Vec<usize>, Vec<usize>) {
        let pf = pair_fold.as_ref().expect("folds present");
        (0..pairs.len()).partition(|&i| pf[i] != fold)
    };

    let folds: Vec<FoldSummary> = (0..k)
        .map(|fold| {
            let (train, test) = fold_members(fold);
            let test_references: BTreeSet<String> = test.iter().map(|&i| pairs[i].reference_id.clone()).collect();
            FoldSummary {
                fold,
                test_references: test_references.into_iter().collect(),
                test_pairs: test.len(),
                train_pairs: train.len(),
            }
        })
        .collect();

    let all: Vec<usize> = (0..pairs.len()).collect();
    let mut columns = Vec::with_capacity(models.len());
    let mut training = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let outcome: Result<(Vec<f64>, bool)> = match &model.kind {
            ModelKind::Fixed(scorer) => score_all(scorer.as_ref(), pairs, &all).map(|s| (s, false)),
            ModelKind::Trained(trainer) if k > 0 => (|| {
                let mut scores = vec![f64::NAN; pairs.len()];
                for fold in 0..k {
                    let (train, test) = fold_members(fold);
                    let train_pairs: Vec<LoadedPair> = train.iter().map(|&i| pairs[i].clone()).collect();
                    let scorer = trainer.fit(&train_pairs, opts.seed.wrapping_add(fold as u64))?;
                    for (i, s) in test.iter().zip(score_all(scorer.as_ref(), pairs, &test)?) {
                        scores[*i] = s;
                    }
                    training.push(TrainingRecord {
                        model: mi,
                        fold: Some(fold),
                        train_references: train.iter().map(|&i| pairs[i].reference_id.clone()).collect(),
                        scored_pairs: test,
                    });
                }
                Ok((scores, false))
            })(),
            ModelKind::Trained(trainer) => (|| {
                let scorer = trainer.fit(pairs, opts.seed)?;
                training.push(TrainingRecord {
                    model: mi,
                    fold: None,
                    train_references: pairs.iter().map(|p| p.reference_id.clone()).collect(),
                    scored_pairs: all.clone(),
                });
                warnings.push(format!("{} was trained and scored on the same pairs (no folds)", model.label));
                Ok((score_all(scorer.as_ref(), pairs, &all)?, true))
            })(),
        };
        columns.push(match outcome {
            Ok((scores, in_sample)) => ModelColumn {
                label: model.label.clone(),
                orientation: model.orientation,
                scores: Some(scores),
                error: None,
                in_sample,
            },
            Err(e) => ModelColumn {
                label: model.label.clone(),
                orientation: model.orientation,
                scores: None,
                error: Some(e.to_string()),
                in_sample: false,
            },
        });
    }

    let dmos: Vec<f64> = pairs.iter().map(|p| p.dmos).collect();
    let mut row_defs: Vec<(String, Vec<usize>)> = vec![("all".into(), all.clone())];
    let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        if let Some(c) = &p.category {
            by_category.entry(c.as_str()).or_default().push(i);
        }
    }
    if by_category.len() > 1 {
        row_defs.extend(by_category.into_iter().map(|(c, idx)| (c.to_string(), idx)));
    }

    let rows: Vec<ReportRow> = row_defs
        .into_iter()
        .map(|(label, idx)| {
            let cells = columns
                .iter()
                .map(|col| cell_stats(col, &idx, &dmos, pair_fold.as_deref(), k, opts))
                .collect();
            ReportRow { label, pairs: idx, cells }
        })
        .collect();

    let comparisons = rows
        .iter()
        .flat_map(|row| opts.comparisons.iter().map(move |&(a, b)| (row, a, b)))
        .map(|(row, a, b)| compare(row, a, b, &columns, opts))
        .collect();

    Ok(EvalReport {
        dataset_id: opts.dataset_id.clone(),
        dmos_convention: opts.dmos_convention,
        pair_count: pairs.len(),
        models: columns,
        rows,
        comparisons,
        folds,
        fold_seed: opts.folds.as_ref().map(|f| f.seed),
        training,
        bonferroni: opts.bonferroni,
        alpha: opts.alpha,
        permutations: opts.permutations,
        warnings,
    })
}

fn cell_stats(
    col: &ModelColumn,
    idx: &[usize],
    dmos: &[f64],
    pair_fold: Option<&[usize]>,
    k: usize,
    opts: &EvalOptions,
) -> CellStats {
    let mut cell = CellStats {
        n: idx.len(),
        ..CellStats::default()
    };
    let Some(scores) = &col.scores else {
        cell.note = Some("model failed".into());
        return cell;
    };
    let x: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| dmos[i]).collect();
    let mut notes = Vec::new();
    match (spearman(&x, &y), pearson(&x, &y)) {
        (Ok(s), Ok(p)) => {
            cell.spearman = Some(s);
            cell.pearson = Some(p);
        }
        (Err(e), _) | (_, Err(e)) => notes.push(e.to_string()),
    }
    if let (Some(pf), Some(_)) = (pair_fold, cell.spearman) {
        for fold in 0..k {
            let (fx, fy): (Vec<f64>, Vec<f64>) = idx
                .iter()
                .filter(|&&i| pf[i] == fold)
                .map(|&i| (scores[i], dmos[i]))
                .unzip();
            match (spearman(&fx, &fy), pearson(&fx, &fy)) {
                (Ok(s), Ok(p)) => {
                    cell.fold_spearman.push(s);
                    cell.fold_pearson.push(p);
                    cell.fold_n.push(fx.len());
                }
                (Err(e), _) | (_, Err(e)) => {
                    notes.push(format!("fold {fold}: {e}"));
                    cell.fold_spearman.clear();
                    cell.fold_pearson.clear();
                    cell.fold_n.clear();
                    break;
                }
            }
        }
    }
    if let (Some(n_perm), Some(_)) = (opts.permutations, cell.spearman) {
        match permutation_test_corr(&x, &y, n_perm, opts.seed, Correlation::Spearman) {
            Ok(p) => cell.permutation_p = Some(p),
            Err(e) => notes.push(e.to_string()),
        }
    }
    if !notes.is_empty() {
        cell.note = Some(notes.join("; "));
    }
    cell
}

// Equal correlations give a zero statistic, so p = 1 even at |r| = 1.
fn fisher_or_equal(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<f64> {
    if r1 == r2 && n1 == n2 {
        return Ok(1.0);
    }
    fisher_rz_two_sample(r1, n1, r2, n2)
}

fn compare(row: &ReportRow, a: usize, b: usize, columns: &[ModelColumn], opts: &EvalOptions) -> Comparison {
    let (ca, cb) = (&row.cells[a], &row.cells[b]);
    let mut cmp = Comparison {
        row: row.label.clone(),
        model_a: a,
        model_b: b,
        r_a: f64::NAN,
        r_b: f64::NAN,
        n: row.pairs.len(),
        p: None,
        fold_mean_p: None,
        adjusted_p: None,
        significant: None,
        note: None,
    };
    let (Some(ra), Some(rb)) = (ca.spearman, cb.spearman) else {
        cmp.note = Some("correlation unavailable".into());
        return cmp;
    };
    let (sa, sb) = (columns[a].orientation.sign(), columns[b].orientation.sign());
    cmp.r_a = sa * ra;
    cmp.r_b = sb * rb;
    match fisher_or_equal(cmp.r_a, cmp.n, cmp.r_b, cmp.n) {
        Ok(p) => {
            let adjusted = (p * opts.bonferroni.unwrap_or(1) as f64).min(1.0);
            cmp.p = Some(p);
            cmp.adjusted_p = Some(adjusted);
            cmp.significant = Some(adjusted < opts.alpha);
        }
        Err(e) => cmp.note = Some(e.to_string()),
    }
    if !ca.fold_spearman.is_empty() && ca.fold_spearman.len() == cb.fold_spearman.len() {
        let ps: Result<Vec<f64>> = ca
            .fold_spearman
            .iter()
            .zip(&cb.fold_spearman)
            .zip(&ca.fold_n)
            .map(|((x, y), &n)| fisher_or_equal(sa * x, n, sb * y, n))
            .collect();
        cmp.fold_mean_p = ps.ok().map(|ps| mean(&ps));
    }
    cmp
}

impl EvalReport {
    pub fn score_series(&self) -> Vec<ScoreSeries> {
        self.models
            .iter()
            .filter_map(|m| {
                m.scores.as_ref().map(|s| ScoreSeries {
                    label: m.label.clone(),
                    scores: s.clone(),
                })
            })
            .collect()
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.models.iter().position(|m| m.label == label)
    }

    pub fn cell(&self, row: &str, model: &str) -> Option<&CellStats> {
        let m = self.column(model)?;
        self.rows.iter().find(|r| r.label == row).map(|r| &r.cells[m])
    }

    /// Aligned plain-text table, one line per row.
    pub fn render_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        let _ = writeln!(out, "dataset: {}", if self.dataset_id.is_empty() { "-" } else { &self.dataset_id });
        let _ = writeln!(out, "pairs: {}", self.pair_count);
        let _ = writeln!(out, "dmos convention: {}", self.dmos_convention.label());
        match self.fold_seed {
            Some(seed) => {
                let _ = writeln!(out, "folds: {} (seed {seed}); trained models score held-out folds only", self.folds.len());
            }
            None => {
                let _ = writeln!(out, "folds: none");
            }
        }
        let _ = writeln!(
            out,
            "bonferroni factor: {}; alpha: {}",
            self.bonferroni.map(|b| b.to_string()).unwrap_or_else(|| "none".into()),
            fmt_num(self.alpha)
        );
        let _ = writeln!(out, "similarity metrics (marked *) correlate negatively with dmos when they agree with it");
        let headers: Vec<String> = self
            .models
            .iter()
            .map(|m| match m.orientation {
                Orientation::Similarity => format!("{}*", m.label),
                Orientation::Distance => m.label.clone(),
            })
            .collect();

        let mut sections: Vec<(&str, Box<dyn Fn(&CellStats) -> Option<f64>>)> = vec![
            ("spearman (pooled)", Box::new(|c: &CellStats| c.spearman)),
            ("pearson (pooled)", Box::new(|c: &CellStats| c.pearson)),
        ];
        if self.fold_seed.is_some() {
            sections.push(("spearman (mean across folds)", Box::new(|c: &CellStats| c.fold_mean_spearman())));
            sections.push(("pearson (mean across folds)", Box::new(|c: &CellStats| c.fold_mean_pearson())));
        }
        if self.permutations.is_some() {
            sections.push(("permutation p (spearman)", Box::new(|c: &CellStats| c.permutation_p)));
        }
        for (title, get) in &sections {
            let _ = writeln!(out, "\n{title}");
            let mut table = vec![{
                let mut h = vec!["row".to_string(), "n".to_string()];
                h.extend(headers.iter().cloned());
                h
            }];
            for row in &self.rows {
                let mut line = vec![row.label.clone(), row.pairs.len().to_string()];
                line.extend(row.cells.iter().map(|c| opt(get(c))));
                table.push(line);
            }
            out.push_str(&align(&table));
        }

        if !self.comparisons.is_empty() {
            let _ = writeln!(out, "\ncomparisons (fisher r-to-z on orientation-adjusted spearman)");
            let mut table = vec![["row", "a", "b", "r_a", "r_b", "n", "p", "p_adjusted", "significant", "p_fold_mean"]
                .map(String::from)
                .to_vec()];
            for c in &self.comparisons {
                table.push(vec![
                    c.row.clone(),
                    self.models[c.model_a].label.clone(),
                    self.models[c.model_b].label.clone(),
                    fmt_num(c.r_a),
                    fmt_num(c.r_b),
                    c.n.to_string(),
                    opt(c.p),
                    opt(c.adjusted_p),
                    c.significant.map(|s| if s { "yes" } else { "no" }.to_string()).unwrap_or_else(|| "-".into()),
                    opt(c.fold_mean_p),
                ]);
            }
            out.push_str(&align(&table));
        }

        let mut notes: Vec<String> = self
            .models
            .iter()
            .filter_map(|m| m.error.as_ref().map(|e| format!("{} failed: {e}", m.label)))
            .collect();
        for row in &self.rows {
            for (m, c) in self.models.iter().zip(&row.cells) {
                if let (Some(n), None) = (&c.note, &m.error) {
                    notes.push(format!("{} / {}: {n}", row.label, m.label));
                }
            }
        }
        notes.extend(self.comparisons.iter().filter_map(|c| {
            c.note.as_ref().map(|n| {
                format!("{} / {} vs {}: {n}", c.row, self.models[c.model_a].label, self.models[c.model_b].label)
            })
        }));
        notes.extend(self.warnings.iter().cloned());
        if !notes.is_empty() {
            let _ = writeln!(out, "\nnotes");
            for n in notes {
                let _ = writeln!(out, "  {n}");
            }
        }
        out
    }

    /// Long-format CSV: one line per (row, model) cell.
    pub fn render_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let mut out = String::from(
            "row,model,orientation,n,spearman,pearson,oriented_spearman,spearman_fold_mean,pearson_fold_mean,permutation_p,dmos_convention,note\n",
        );
        for row in &self.rows {
            for (m, c) in self.models.iter().zip(&row.cells) {
                let note = m.error.as_ref().or(c.note.as_ref()).cloned().unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    csv_field(&row.label),
                    csv_field(&m.label),
                    m.orientation.name(),
                    c.n,
                    opt(c.spearman),
                    opt(c.pearson),
                    opt(c.spearman.map(|s| s * m.orientation.sign())),
                    opt(c.fold_mean_spearman()),
                    opt(c.fold_mean_pearson()),
                    opt(c.permutation_p),
                    csv_field(self.dmos_convention.label()),
                    csv_field(&note),
                );
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn align(table: &[Vec<String>]) -> String {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| table.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in table {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }
    out
}
