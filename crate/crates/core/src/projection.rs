//! Logarithmic trend of repetition percentage against corpus size.
//!
//! The model is `y = a·ln(x) + b`, fitted by ordinary least squares on
//! `(ln x, y)`. Inverting it gives the corpus size at which a target
//! percentage would be reached; such volumes overflow nothing here because
//! they are carried as base-10 logarithms.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, CorpusMetrics};
use crate::store::{DocumentId, Repository, Scope};
use crate::validation::RuleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrendPoint {
    pub text_characters: f64,
    pub repetition_pct: f64,
}

impl TrendPoint {
    pub fn new(text_characters: f64, repetition_pct: f64) -> Self {
        Self {
            text_characters,
            repetition_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogTrend {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub point_count: usize,
    pub x_min: f64,
    pub x_max: f64,
}

/// A positive number as mantissa in `[1, 10)` and integer exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Magnitude {
    pub mantissa: f64,
    pub exponent: i64,
    pub decimal_string: String,
}

impl Magnitude {
    pub fn from_log10(log10: f64) -> Self {
        let mut exponent = log10.floor();
        let mut mantissa = 10f64.powf(log10 - exponent);
        if mantissa >= 10.0 {
            mantissa /= 10.0;
            exponent += 1.0;
        }
        let exponent = exponent as i64;
        Magnitude {
            mantissa,
            exponent,
            decimal_string: format!("{mantissa:.4}e{exponent}"),
        }
    }

    pub fn log10(&self) -> f64 {
        self.mantissa.log10() + self.exponent as f64
    }

    /// `None` beyond the range of `f64`.
    pub fn to_f64(&self) -> Option<f64> {
        let v = self.mantissa * 10f64.powi(self.exponent.clamp(-400, 400) as i32);
        v.is_finite().then_some(v)
    }

    /// Spreadsheet style, `3.77E+13`.
    pub fn to_e_notation(&self, decimals: usize) -> String {
        let mut m = self.mantissa;
        let mut e = self.exponent;
        let scale = 10f64.powi(decimals as i32);
        if (m * scale).round() / scale >= 10.0 {
            m /= 10.0;
            e += 1;
        }
        let sign = if e < 0 { '-' } else { '+' };
        format!("{m:.decimals$}E{sign}{:02}", e.abs())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Simple regression of `y` on `u`: slope, intercept.
fn ols(u: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mu, my) = (mean(u), mean(y));
    let sxx: f64 = u.iter().map(|x| (x - mu).powi(2)).sum();
    if sxx <= f64::EPSILON * u.iter().map(|x| x * x).sum::<f64>() {
        return None;
    }
    let sxy: f64 = u.iter().zip(y).map(|(x, y)| (x - mu) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mu))
}

fn r_squared(y: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let my = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(predicted).map(|(v, p)| (v - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res <= f64::EPSILON { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

fn check_points(points: &[TrendPoint]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.text_characters > 0.0) || !p.text_characters.is_finite()) {
        return Err(Error::Domain(format!("text characters must be positive, got {}", p.text_characters)));
    }
    if let Some(p) = points.iter().find(|p| !p.repetition_pct.is_finite()) {
        return Err(Error::Domain(format!("percentage must be finite, got {}", p.repetition_pct)));
    }
    Ok(())
}

pub fn fit_log_trend(points: &[TrendPoint]) -> Result<LogTrend> {
    check_points(points)?;
    let u: Vec<f64> = points.iter().map(|p| p.text_characters.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.repetition_pct).collect();
    let (a, b) = ols(&u, &y).ok_or_else(|| Error::DegenerateFit("all x values are equal".into()))?;
    let r2 = r_squared(&y, u.iter().map(|u| a * u + b));
    let xs = points.iter().map(|p| p.text_characters);
    Ok(LogTrend {
        a,
        b,
        r2,
        point_count: points.len(),
        x_min: xs.clone().fold(f64::INFINITY, f64::min),
        x_max: xs.fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    pub text_characters: f64,
    pub repetition_pct: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Volume {
    pub target_pct: f64,
    pub text_characters: Magnitude,
    pub extrapolated: bool,
}

impl LogTrend {
    pub fn predict(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("text characters must be positive, got {x}")));
        }
        Ok(self.a * x.ln() + self.b)
    }

    pub fn prediction(&self, x: f64) -> Result<Prediction> {
        Ok(Prediction {
            text_characters: x,
            repetition_pct: self.predict(x)?,
            extrapolated: !self.in_range(x),
        })
    }

    fn in_range(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// `log10` of the corpus size at which the trend reaches `target_pct`.
    pub fn required_volume_log10(&self, target_pct: f64) -> Result<f64> {
        if !(self.a > 0.0) {
            return Err(Error::NonInvertibleTrend { slope: self.a });
        }
        Ok((target_pct - self.b) / self.a / std::f64::consts::LN_10)
    }

    pub fn required_volume(&self, target_pct: f64) -> Result<Volume> {
        let log10 = self.required_volume_log10(target_pct)?;
        let in_range = log10 >= self.x_min.log10() && log10 <= self.x_max.log10();
        Ok(Volume {
            target_pct,
            text_characters: Magnitude::from_log10(log10),
            extrapolated: !in_range,
        })
    }
}

/// Projection rows shaped like a target-percentage table.
pub fn projection_table(trend: &LogTrend, targets: &[f64]) -> Result<Vec<Volume>> {
    targets.iter().map(|t| trend.required_volume(*t)).collect()
}

pub const DEFAULT_TARGETS: &[f64] = &[5.0, 10.0, 25.0, 50.0, 75.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    pub trend: LogTrend,
    pub points: Vec<TrendPoint>,
    pub projections: Vec<Volume>,
    pub families: Vec<FamilyFit>,
    pub warnings: Vec<String>,
}

pub fn fit_report(points: &[TrendPoint], targets: &[f64]) -> Result<FitReport> {
    let trend = fit_log_trend(points)?;
    let projections = projection_table(&trend, targets)?;
    let mut warnings = Vec::new();
    for v in projections.iter().filter(|v| v.extrapolated) {
        warnings.push(format!(
            "{:.2}% lies outside the fitted range ({:.4e}..{:.4e} characters); the projection {} is an extrapolation",
            v.target_pct,
            trend.x_min,
            trend.x_max,
            v.text_characters.to_e_notation(2)
        ));
    }
    let families = compare_families(points);
    if let Some(best) = families.first() {
        if best.family != CurveFamily::Logarithmic && best.r2 > Some(trend.r2) {
            warnings.push(format!("{:?} fits better than the logarithmic trend", best.family));
        }
    }
    Ok(FitReport {
        trend,
        points: points.to_vec(),
        projections,
        families,
        warnings,
    })
}

impl FitReport {
    pub fn render(&self) -> String {
        let t = &self.trend;
        let mut out = format!(
            "y = {:.6}·ln(x) {} {:.6}\nR² = {:.6} over {} points, x in [{:.4e}, {:.4e}]\n\n",
            t.a,
            if t.b < 0.0 { '-' } else { '+' },
            t.b.abs(),
            t.r2,
            t.point_count,
            t.x_min,
            t.x_max
        );
        let _ = writeln!(out, "{:>10}  {:>12}", "target %", "characters");
        for v in &self.projections {
            let mark = if v.extrapolated { "  (extrapolated)" } else { "" };
            let _ = writeln!(out, "{:>9.2}%  {:>12}{mark}", v.target_pct, v.text_characters.to_e_notation(2));
        }
        out.push('\n');
        for f in &self.families {
            let r2 = f.r2.map_or_else(|| "n/a".to_string(), |r| format!("{r:.6}"));
            let _ = writeln!(out, "{:<12} R² {r2}", format!("{:?}", f.family).to_lowercase());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CurveFamily {
    Logarithmic,
    Linear,
    Exponential,
    Power,
    Quadratic,
}

/// R² of a family, measured on the original `y`. `None` when the family
/// cannot be fitted (non-positive `y` for exponential and power curves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyFit {
    pub family: CurveFamily,
    pub r2: Option<f64>,
}

fn family_r2(family: CurveFamily, x: &[f64], y: &[f64]) -> Option<f64> {
    let ln = |v: &[f64]| v.iter().map(|v| v.ln()).collect::<Vec<_>>();
    let positive_y = y.iter().all(|v| *v > 0.0);
    match family {
        CurveFamily::Logarithmic => {
            let u = ln(x);
            let (a, b) = ols(&u, y)?;
            Some(r_squared(y, u.iter().map(|u| a * u + b)))
        }
        CurveFamily::Linear => {
            let (a, b) = ols(x, y)?;
            Some(r_squared(y, x.iter().map(|x| a * x + b)))
        }
        CurveFamily::Exponential if positive_y => {
            let (a, b) = ols(x, &ln(y))?;
            Some(r_squared(y, x.iter().map(|x| (a * x + b).exp())))
        }
        CurveFamily::Power if positive_y => {
            let (a, b) = ols(&ln(x), &ln(y))?;
            Some(r_squared(y, x.iter().map(|x| (a * x.ln() + b).exp())))
        }
        CurveFamily::Quadratic => {
            let [c0, c1, c2, scale] = quadratic(x, y)?;
            Some(r_squared(
                y,
                x.iter().map(|x| {
                    let s = x / scale;
                    c0 + c1 * s + c2 * s * s
                }),
            ))
        }
        _ => None,
    }
}

/// Least-squares parabola in `x / max|x|`, via the 3×3 normal equations.
fn quadratic(x: &[f64], y: &[f64]) -> Option<[f64; 4]> {
    let distinct: BTreeSet<u64> = x.iter().map(|v| v.to_bits()).collect();
    if distinct.len() < 3 {
        return None;
    }
    let scale = x.iter().fold(0f64, |m, v| m.max(v.abs()));
    let mut m = [[0f64; 4]; 3];
    for (xi, yi) in x.iter().zip(y) {
        let s = xi / scale;
        let pow = [1.0, s, s * s];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += pow[r] * pow[c];
            }
            m[r][3] += pow[r] * yi;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|a, b| m[*a][col].abs().total_cmp(&m[*b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2], scale])
}

/// Comparative fits, best first.
pub fn compare_families(points: &[TrendPoint]) -> Vec<FamilyFit> {
    let x: Vec<f64> = points.iter().map(|p| p.text_characters).collect();
    let y: Vec<f64> = points.iter().map(|p| p.repetition_pct).collect();
    let mut fits: Vec<FamilyFit> = [
        CurveFamily::Logarithmic,
        CurveFamily::Linear,
        CurveFamily::Exponential,
        CurveFamily::Power,
        CurveFamily::Quadratic,
    ]
    .into_iter()
    .map(|family| FamilyFit {
        family,
        r2: if points.len() >= 2 && x.iter().all(|v| *v > 0.0) {
            family_r2(family, &x, &y)
        } else {
            None
        },
    })
    .collect();
    fits.sort_by(|a, b| b.r2.unwrap_or(-1.0).total_cmp(&a.r2.unwrap_or(-1.0)));
    fits
}

/// Parses `x<TAB>y` lines; blank lines and `#` comments are skipped, and a
/// first line whose fields are not numbers is taken as a header.
pub fn parse_points_tsv(text: &str) -> Result<Vec<TrendPoint>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [x, y] => x
                .replace(',', "")
                .parse::<f64>()
                .ok()
                .zip(y.trim_end_matches('%').parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((x, y)) => points.push(TrendPoint::new(x, y)),
            None if points.is_empty() && i == 0 => continue,
            None => {
                return Err(Error::Validation(format!(
                    "line {}: expected `x<TAB>y`, got {line:?}",
                    i + 1
                )))
            }
        }
    }
    Ok(points)
}

/// A labelled group of documents in a snapshot plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotGroup {
    pub label: String,
    pub documents: Vec<DocumentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotPoint {
    pub label: String,
    pub point: TrendPoint,
    pub metrics: CorpusMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotSeries {
    pub points: Vec<SnapshotPoint>,
    pub warnings: Vec<String>,
}

impl SnapshotSeries {
    pub fn trend_points(&self) -> Vec<TrendPoint> {
        self.points.iter().map(|p| p.point).collect()
    }
}

/// Metrics over cumulative unions of the groups: the first group, the first
/// two, and so on. Empty subsets are skipped with a warning.
pub fn snapshot_series(repo: &dyn Repository, groups: &[SnapshotGroup], rules: Option<&RuleSet>) -> Result<SnapshotSeries> {
    let mut series = SnapshotSeries {
        points: Vec::new(),
        warnings: Vec::new(),
    };
    let mut cumulative: BTreeSet<DocumentId> = BTreeSet::new();
    for g in groups {
        cumulative.extend(g.documents.iter().copied());
        if cumulative.is_empty() {
            let w = format!("snapshot {:?} is empty; skipped", g.label);
            tracing::warn!("{w}");
            series.warnings.push(w);
            continue;
        }
        let scope = Scope::Documents(cumulative.iter().copied().collect());
        let metrics = compute_metrics(repo, &scope, rules)?;
        let Some(y) = metrics.with_repetitions_pct else {
            let w = format!("snapshot {:?} has no sentences; skipped", g.label);
            tracing::warn!("{w}");
            series.warnings.push(w);
            continue;
        };
        series.points.push(SnapshotPoint {
            label: g.label.clone(),
            point: TrendPoint::new(metrics.text_characters as f64, y),
            metrics,
        });
    }
    Ok(series)
}

/// Splits the documents of a scope, in id order, into `n` groups of nearly
/// equal size for use with [`snapshot_series`].
pub fn even_groups(repo: &dyn Repository, source: Option<&str>, n: usize) -> Result<Vec<SnapshotGroup>> {
    if n == 0 {
        return Err(Error::Validation("snapshot count must be at least 1".into()));
    }
    let docs: Vec<DocumentId> = repo
        .document_refs()?
        .into_iter()
        .filter(|d| source.map_or(true, |s| d.source_tag == s))
        .map(|d| d.id)
        .collect();
    if let Some(s) = source {
        if docs.is_empty() {
            return Err(Error::UnknownSource(s.to_string()));
        }
    }
    let len = docs.len();
    Ok((0..n)
        .map(|i| SnapshotGroup {
            label: format!("{}/{n}", i + 1),
            documents: docs[i * len / n..(i + 1) * len / n].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ingest_document, MemoryStore, NewDocument};
    use crate::tokenizer::Tokenizer;
    use proptest::prelude::*;

    fn line(a: f64, b: f64, xs: &[f64]) -> Vec<TrendPoint> {
        xs.iter().map(|x| TrendPoint::new(*x, a * x.ln() + b)).collect()
    }

    #[test]
    fn exact_fit() {
        let t = fit_log_trend(&line(2.0, 1.0, &[1.0, 10.0, 100.0, 5000.0])).unwrap();
        assert!((t.a - 2.0).abs() < 1e-12 && (t.b - 1.0).abs() < 1e-12);
        assert!((t.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_fit_exactly() {
        let t = fit_log_trend(&[TrendPoint::new(10.0, 1.0), TrendPoint::new(100.0, 3.0)]).unwrap();
        assert_eq!(t.r2, 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_log_trend(&[TrendPoint::new(1.0, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(
            fit_log_trend(&[TrendPoint::new(5.0, 1.0), TrendPoint::new(5.0, 2.0)]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_log_trend(&[TrendPoint::new(0.0, 1.0), TrendPoint::new(5.0, 2.0)]),
            Err(Error::Domain(_))
        ));
        let flat = fit_log_trend(&[TrendPoint::new(1.0, 2.0), TrendPoint::new(5.0, 2.0)]).unwrap();
        assert!(matches!(flat.required_volume(3.0), Err(Error::NonInvertibleTrend { .. })));
        assert!(flat.predict(-1.0).is_err());
    }

    #[test]
    fn inversion() {
        let t = fit_log_trend(&line(2.0, 0.0, &[10.0, 100.0, 10000.0])).unwrap();
        let v = t.required_volume(2.0 * 1000f64.ln()).unwrap();
        assert!((v.text_characters.to_f64().unwrap() - 1000.0).abs() < 1e-6);
        assert!(!v.extrapolated);
        let far = t.required_volume(2000.0).unwrap();
        assert!(far.extrapolated);
        assert!(far.text_characters.to_f64().is_none());
        assert!(far.text_characters.exponent > 400);
    }

    #[test]
    fn magnitude_rendering() {
        let m = Magnitude::from_log10(13.0 + 3.77f64.log10());
        assert_eq!(m.to_e_notation(2), "3.77E+13");
        assert_eq!(Magnitude::from_log10(2.0).to_e_notation(2), "1.00E+02");
        assert_eq!(Magnitude::from_log10(9.99999_f64.log10()).to_e_notation(2), "1.00E+01");
    }

    #[test]
    fn tsv_parsing() {
        let pts = parse_points_tsv("x\ty\n# note\n100\t1.5\n1,000\t2.5%\n\n").unwrap();
        assert_eq!(pts, vec![TrendPoint::new(100.0, 1.5), TrendPoint::new(1000.0, 2.5)]);
        assert!(parse_points_tsv("1\t2\nbad line\n").is_err());
    }

    #[test]
    fn family_comparison_prefers_true_model() {
        let pts = line(0.5, -2.0, &[1e3, 1e4, 1e5, 1e6, 1e7]);
        let fits = compare_families(&pts);
        assert_eq!(fits[0].family, CurveFamily::Logarithmic);
        let quad: Vec<TrendPoint> = [1.0, 2.0, 3.0, 4.0, 5.0]
            .iter()
            .map(|x| TrendPoint::new(*x, 3.0 * x * x - x + 2.0))
            .collect();
        let fits = compare_families(&quad);
        assert_eq!(fits[0].family, CurveFamily::Quadratic);
        assert!((fits[0].r2.unwrap() - 1.0).abs() < 1e-9);
        let neg = [TrendPoint::new(1.0, -1.0), TrendPoint::new(2.0, 1.0)];
        assert!(compare_families(&neg)
            .iter()
            .any(|f| f.family == CurveFamily::Exponential && f.r2.is_none()));
    }

    #[test]
    fn report_warns_on_extrapolation() {
        let pts = line(0.3, -3.0, &[1e9, 2e9, 4e9]);
        let r = fit_report(&pts, DEFAULT_TARGETS).unwrap();
        assert_eq!(r.projections.len(), DEFAULT_TARGETS.len());
        assert!(!r.warnings.is_empty());
        assert!(r.render().contains("extrapolated"));
    }

    #[test]
    fn snapshots_are_cumulative() {
        let repo = MemoryStore::new();
        let t = Tokenizer::default();
        let mut groups = Vec::new();
        // Group i adds one document with the shared sentence and i + 1 new ones.
        for i in 0..5 {
            let mut text = String::from("Shared sentence here.");
            for j in 0..=i {
                text.push_str(&format!(" Fresh {i} {j}."));
            }
            let (id, _) = ingest_document(&repo, &t, &NewDocument::text("s", format!("d{i}"), &text)).unwrap();
            groups.push(SnapshotGroup {
                label: format!("g{i}"),
                documents: vec![id],
            });
        }
        groups.insert(
            2,
            SnapshotGroup {
                label: "nothing new".into(),
                documents: vec![],
            },
        );
        let series = snapshot_series(&repo, &groups, None).unwrap();
        assert_eq!(series.points.len(), 6);
        let xs: Vec<f64> = series.points.iter().map(|p| p.point.text_characters).collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        // Hand-computed: k documents give 1 + k(k+1)/2 distinct sentences, of
        // which only the shared one repeats once k >= 2.
        let ys: Vec<f64> = series.points.iter().map(|p| p.point.repetition_pct).collect();
        assert_eq!(ys[0], 0.0);
        assert!((ys[1] - 100.0 / 4.0).abs() < 1e-12);
        assert!((ys[5] - 100.0 / 16.0).abs() < 1e-12);

        let first_empty = [SnapshotGroup {
            label: "e".into(),
            documents: vec![],
        }];
        let s = snapshot_series(&repo, &first_empty, None).unwrap();
        assert!(s.points.is_empty());
        assert_eq!(s.warnings.len(), 1);

        let even = even_groups(&repo, Some("s"), 5).unwrap();
        assert!(even.iter().all(|g| g.documents.len() == 1));
        assert!(even_groups(&repo, Some("x"), 5).is_err());
    }

    proptest! {
        #[test]
        fn fit_properties(
            xs in proptest::collection::btree_set(1u64..10_000_000_000, 3..12),
            noise in proptest::collection::vec(-1.0f64..1.0, 12),
            a in 0.05f64..3.0,
            b in -10.0f64..10.0,
            k in 0.1f64..10.0,
            c in 0.01f64..100.0,
        ) {
            let pts: Vec<TrendPoint> = xs
                .iter()
                .zip(&noise)
                .map(|(x, n)| TrendPoint::new(*x as f64, a * (*x as f64).ln() + b + n))
                .collect();
            let t = fit_log_trend(&pts).unwrap();
            prop_assert!((0.0..=1.0).contains(&t.r2));

            // Residuals are orthogonal to the regressors.
            let res: Vec<f64> = pts.iter().map(|p| p.repetition_pct - t.predict(p.text_characters).unwrap()).collect();
            let scale = pts.iter().map(|p| p.repetition_pct.abs() + 1.0).sum::<f64>();
            prop_assert!(res.iter().sum::<f64>().abs() < 1e-9 * scale);
            let dot: f64 = res.iter().zip(&pts).map(|(r, p)| r * p.text_characters.ln()).sum();
            prop_assert!(dot.abs() < 1e-8 * scale * 25.0);

            // Scaling y scales a and b; r2 is unchanged.
            let scaled: Vec<TrendPoint> = pts.iter().map(|p| TrendPoint::new(p.text_characters, k * p.repetition_pct)).collect();
            let ts = fit_log_trend(&scaled).unwrap();
            prop_assert!((ts.a - k * t.a).abs() < 1e-7 * (1.0 + (k * t.a).abs()));
            prop_assert!((ts.b - k * t.b).abs() < 1e-7 * (1.0 + (k * t.b).abs()));
            prop_assert!((ts.r2 - t.r2).abs() < 1e-9);

            // Rescaling x shifts b by a·ln c.
            let shifted: Vec<TrendPoint> = pts.iter().map(|p| TrendPoint::new(c * p.text_characters, p.repetition_pct)).collect();
            let tc = fit_log_trend(&shifted).unwrap();
            prop_assert!((tc.a - t.a).abs() < 1e-7 * (1.0 + t.a.abs()));
            prop_assert!((tc.b - (t.b - t.a * c.ln())).abs() < 1e-6 * (1.0 + t.b.abs()));
            prop_assert!((tc.r2 - t.r2).abs() < 1e-9);

            // Inversion round trip.
            if t.a > 0.0 {
                let y0 = t.predict(xs.iter().next().copied().unwrap() as f64 * 3.0).unwrap();
                let v = t.required_volume(y0).unwrap();
                let back = t.predict(v.text_characters.to_f64().unwrap()).unwrap();
                prop_assert!((back - y0).abs() < 1e-8 * (1.0 + y0.abs()));
            }
        }
    }
}
