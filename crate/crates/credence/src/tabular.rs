//! Dataset representation, CSV ingestion, standardization, and bootstrap
//! resampling.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Observed data: covariates, binary treatment, and one outcome per unit.
#[derive(Debug, Clone)]
pub struct ObservationalSample {
    pub x: Array2<f64>,
    pub z: Array1<f64>,
    pub y: Array1<f64>,
    pub column_names: Vec<String>,
    pub binary_columns: BTreeSet<usize>,
}

impl ObservationalSample {
    pub fn new(
        x: Array2<f64>,
        z: Array1<f64>,
        y: Array1<f64>,
        column_names: Vec<String>,
        binary_columns: BTreeSet<usize>,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::data("sample must contain at least one row"));
        }
        if z.len() != n || y.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: z.len().min(y.len()),
                context: "z/y length vs covariate rows",
            });
        }
        if column_names.len() != x.ncols() {
            return Err(Error::Dimension {
                expected: x.ncols(),
                got: column_names.len(),
                context: "column names vs covariate columns",
            });
        }
        if let Some(&j) = binary_columns.iter().find(|&&j| j >= x.ncols()) {
            return Err(Error::data(format!("binary column index {j} out of range")));
        }
        for &v in z.iter() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::data(format!("non-binary treatment value {v}")));
            }
        }
        if x.iter().any(|v| !v.is_finite())
            || y.iter().any(|v| !v.is_finite())
        {
            return Err(Error::data("non-finite value in covariates or outcome"));
        }
        Ok(Self { x, z, y, column_names, binary_columns })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// Indices of rows in the given arm.
    pub fn arm_indices(&self, treated: bool) -> Vec<usize> {
        let target = if treated { 1.0 } else { 0.0 };
        self.z
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == target)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of this sample with covariate column `j` removed.
    pub fn drop_column(&self, j: usize) -> Result<Self> {
        if j >= self.p() {
            return Err(Error::data(format!("column index {j} out of range")));
        }
        let keep: Vec<usize> = (0..self.p()).filter(|&k| k != j).collect();
        let x = self.x.select(Axis(1), &keep);
        let names = keep.iter().map(|&k| self.column_names[k].clone()).collect();
        let binary = self
            .binary_columns
            .iter()
            .filter(|&&b| b != j)
            .map(|&b| if b > j { b - 1 } else { b })
            .collect();
        Self::new(x, self.z.clone(), self.y.clone(), names, binary)
    }
}

/// Sample with ground truth attached: both potential outcomes are known.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub x: Array2<f64>,
    pub z: Array1<f64>,
    pub y0: Array1<f64>,
    pub y1: Array1<f64>,
    pub y: Array1<f64>,
    pub column_names: Vec<String>,
    pub binary_columns: BTreeSet<usize>,
}

impl GeneratedSample {
    /// Builds a sample; `y` is recomputed from the consistency identity
    /// `y_i = z_i*y1_i + (1-z_i)*y0_i`.
    pub fn new(
        x: Array2<f64>,
        z: Array1<f64>,
        y0: Array1<f64>,
        y1: Array1<f64>,
        column_names: Vec<String>,
        binary_columns: BTreeSet<usize>,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::data("sample must contain at least one row"));
        }
        if z.len() != n || y0.len() != n || y1.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: z.len().min(y0.len()).min(y1.len()),
                context: "z/y0/y1 length vs covariate rows",
            });
        }
        for &v in z.iter() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::data(format!("non-binary treatment value {v}")));
            }
        }
        let y = Array1::from_iter(
            z.iter()
                .zip(y0.iter().zip(y1.iter()))
                .map(|(&zi, (&y0i, &y1i))| if zi == 1.0 { y1i } else { y0i }),
        );
        Ok(Self { x, z, y0, y1, y, column_names, binary_columns })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Observational view: potential outcomes stripped, ground truth withheld.
    pub fn to_observational(&self) -> ObservationalSample {
        ObservationalSample {
            x: self.x.clone(),
            z: self.z.clone(),
            y: self.y.clone(),
            column_names: self.column_names.clone(),
            binary_columns: self.binary_columns.clone(),
        }
    }
}

/// Affine standardization parameters for covariates and outcome.
///
/// Constant columns are recorded with mean 0 and scale 1 so the map stays
/// invertible and leaves them untouched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub x_mean: Array1<f64>,
    pub x_scale: Array1<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, bool) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if min == max || n < 2 {
        return (mean, 1.0, true);
    }
    // n-1 denominator
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt(), false)
}

/// Centers and scales each covariate column and the outcome to mean 0, sd 1
/// (sample sd, n-1 denominator). Constant columns are left unchanged with
/// scale 1 recorded. Treatment is untouched.
pub fn standardize(
    sample: &ObservationalSample,
) -> Result<(ObservationalSample, StandardizationStats)> {
    if sample.n() < 2 {
        return Err(Error::data("standardize requires at least two rows"));
    }
    let p = sample.p();
    let mut x_mean = Array1::zeros(p);
    let mut x_scale = Array1::ones(p);
    let mut x = sample.x.clone();
    for j in 0..p {
        let (m, s, constant) = mean_sd(sample.x.column(j).iter().copied());
        if constant {
            continue;
        }
        x_mean[j] = m;
        x_scale[j] = s;
        x.column_mut(j).mapv_inplace(|v| (v - m) / s);
    }
    let (ym, ys, y_constant) = mean_sd(sample.y.iter().copied());
    let (y_mean, y_scale) = if y_constant { (0.0, 1.0) } else { (ym, ys) };
    let y = sample.y.mapv(|v| (v - y_mean) / y_scale);
    let stats = StandardizationStats { x_mean, x_scale, y_mean, y_scale };
    let out = ObservationalSample {
        x,
        z: sample.z.clone(),
        y,
        column_names: sample.column_names.clone(),
        binary_columns: sample.binary_columns.clone(),
    };
    Ok((out, stats))
}

/// Inverse affine map for a generated sample; `y` is recomputed from the
/// consistency identity. Binary-flagged columns are thresholded at 0.5 after
/// inversion when `round_binary` is set.
pub fn destandardize(
    generated: &GeneratedSample,
    stats: &StandardizationStats,
    round_binary: bool,
) -> Result<GeneratedSample> {
    if stats.x_mean.len() != generated.p() {
        return Err(Error::Dimension {
            expected: generated.p(),
            got: stats.x_mean.len(),
            context: "standardization stats vs covariate columns",
        });
    }
    let mut x = generated.x.clone();
    for j in 0..generated.p() {
        let (m, s) = (stats.x_mean[j], stats.x_scale[j]);
        x.column_mut(j).mapv_inplace(|v| v * s + m);
        if round_binary && generated.binary_columns.contains(&j) {
            x.column_mut(j).mapv_inplace(|v| if v >= 0.5 { 1.0 } else { 0.0 });
        }
    }
    let y0 = generated.y0.mapv(|v| v * stats.y_scale + stats.y_mean);
    let y1 = generated.y1.mapv(|v| v * stats.y_scale + stats.y_mean);
    GeneratedSample::new(
        x,
        generated.z.clone(),
        y0,
        y1,
        generated.column_names.clone(),
        generated.binary_columns.clone(),
    )
}

/// Inverse of [`standardize`] for an observational sample (used in tests and
/// diagnostics; generation goes through [`destandardize`]).
pub fn destandardize_observational(
    sample: &ObservationalSample,
    stats: &StandardizationStats,
) -> ObservationalSample {
    let mut x = sample.x.clone();
    for j in 0..sample.p() {
        let (m, s) = (stats.x_mean[j], stats.x_scale[j]);
        x.column_mut(j).mapv_inplace(|v| v * s + m);
    }
    let y = sample.y.mapv(|v| v * stats.y_scale + stats.y_mean);
    ObservationalSample {
        x,
        z: sample.z.clone(),
        y,
        column_names: sample.column_names.clone(),
        binary_columns: sample.binary_columns.clone(),
    }
}

/// Draws `n` rows i.i.d. uniformly with replacement. Deterministic given seed.
pub fn bootstrap_resample(sample: &ObservationalSample, seed: u64) -> ObservationalSample {
    let n = sample.n();
    let mut rng = stream_rng(seed, "bootstrap");
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    resample_rows(sample, &idx)
}

pub(crate) fn resample_rows(sample: &ObservationalSample, idx: &[usize]) -> ObservationalSample {
    ObservationalSample {
        x: sample.x.select(Axis(0), idx),
        z: sample.z.select(Axis(0), idx),
        y: sample.y.select(Axis(0), idx),
        column_names: sample.column_names.clone(),
        binary_columns: sample.binary_columns.clone(),
    }
}

/// Loads an observational sample from a headered CSV file.
///
/// Covariates are all columns except the treatment and outcome columns, in
/// header order. The treatment column must parse to {0,1}. Missing values are
/// rejected.
pub fn load_observational_csv(
    path: impl AsRef<Path>,
    treatment_col: &str,
    outcome_col: &str,
    binary_cols: Option<&[String]>,
) -> Result<ObservationalSample> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.is_empty() {
        return Err(Error::data("empty csv file"));
    }
    let t_idx = headers
        .iter()
        .position(|h| h == treatment_col)
        .ok_or_else(|| Error::data(format!("missing treatment column '{treatment_col}'")))?;
    let o_idx = headers
        .iter()
        .position(|h| h == outcome_col)
        .ok_or_else(|| Error::data(format!("missing outcome column '{outcome_col}'")))?;
    if t_idx == o_idx {
        return Err(Error::data("treatment and outcome columns must differ"));
    }
    let cov_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != t_idx && i != o_idx).collect();
    let column_names: Vec<String> = cov_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut x_rows: Vec<f64> = Vec::new();
    let mut z = Vec::new();
    let mut y = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "row {}: expected {} fields, got {}",
                row_no + 2,
                headers.len(),
                record.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::data(format!(
                    "row {}: missing value in column '{}'",
                    row_no + 2,
                    headers[i]
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                Error::data(format!(
                    "row {}: non-numeric value '{}' in column '{}'",
                    row_no + 2,
                    raw,
                    headers[i]
                ))
            })
        };
        let t = parse(t_idx)?;
        if t != 0.0 && t != 1.0 {
            return Err(Error::data(format!(
                "row {}: non-binary treatment value '{}'",
                row_no + 2,
                t
            )));
        }
        z.push(t);
        y.push(parse(o_idx)?);
        for &i in &cov_idx {
            x_rows.push(parse(i)?);
        }
    }
    let n = z.len();
    if n == 0 {
        return Err(Error::data("csv file has no data rows"));
    }
    let x = Array2::from_shape_vec((n, cov_idx.len()), x_rows)
        .map_err(|e| Error::data(format!("shape error: {e}")))?;

    let mut binary = BTreeSet::new();
    if let Some(cols) = binary_cols {
        for name in cols {
            let j = column_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::data(format!("missing binary column '{name}'")))?;
            binary.insert(j);
        }
    }
    ObservationalSample::new(x, Array1::from(z), Array1::from(y), column_names, binary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::io::Write;

    fn toy_sample() -> ObservationalSample {
        ObservationalSample::new(
            array![[1.0], [3.0], [2.0], [4.0]],
            array![1.0, 1.0, 0.0, 0.0],
            array![2.0, 4.0, 1.0, 3.0],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap()
    }

    #[test]
    fn load_small_csv() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,treat,y\n0.5,1,2.0\n1.5,1,3.0\n-0.5,0,1.0\n0.0,0,1.5").unwrap();
        let s = load_observational_csv(f.path(), "treat", "y", None).unwrap();
        assert_eq!(s.n(), 4);
        assert_eq!(s.p(), 1);
        assert_eq!(s.z, array![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.column_names, vec!["x1"]);
    }

    #[test]
    fn load_rejects_non_binary_treatment() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,treat,y\n0.5,2,2.0").unwrap();
        let err = load_observational_csv(f.path(), "treat", "y", None).unwrap_err();
        assert!(err.to_string().contains("non-binary treatment"));
    }

    #[test]
    fn load_rejects_missing_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,treat,y\n0.5,1,2.0").unwrap();
        assert!(load_observational_csv(f.path(), "nope", "y", None).is_err());
    }

    #[test]
    fn load_rejects_missing_file() {
        let err = load_observational_csv("/no/such/file.csv", "treat", "y", None).unwrap_err();
        assert!(matches!(err, Error::FileNotFound(_)));
    }

    #[test]
    fn load_rejects_non_numeric_cell() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,treat,y\nabc,1,2.0").unwrap();
        let err = load_observational_csv(f.path(), "treat", "y", None).unwrap_err();
        assert!(err.to_string().contains("non-numeric"));
    }

    #[test]
    fn standardize_two_point_column() {
        let s = ObservationalSample::new(
            array![[1.0], [3.0]],
            array![1.0, 0.0],
            array![0.0, 1.0],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let (std, stats) = standardize(&s).unwrap();
        let sd = std::f64::consts::SQRT_2; // sample sd of [1,3]
        assert_abs_diff_eq!(std.x[[0, 0]], -1.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(std.x[[1, 0]], 1.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(std.x.column(0).sum(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.x_mean[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_constant_column_untouched() {
        let s = ObservationalSample::new(
            array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]],
            array![1.0, 0.0, 1.0],
            array![1.0, 2.0, 3.0],
            vec!["c".into(), "x".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let (std, stats) = standardize(&s).unwrap();
        assert_eq!(std.x.column(0).to_vec(), vec![5.0, 5.0, 5.0]);
        assert_eq!(stats.x_scale[0], 1.0);
        assert_eq!(stats.x_mean[0], 0.0);
    }

    #[test]
    fn standardize_round_trips() {
        let s = toy_sample();
        let (std, stats) = standardize(&s).unwrap();
        let back = destandardize_observational(&std, &stats);
        for (a, b) in s.x.iter().zip(back.x.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        for (a, b) in s.y.iter().zip(back.y.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn destandardize_identity_stats() {
        let g = GeneratedSample::new(
            array![[0.3], [-0.2]],
            array![1.0, 0.0],
            array![0.1, 0.2],
            array![1.1, 1.2],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let stats = StandardizationStats {
            x_mean: array![0.0],
            x_scale: array![1.0],
            y_mean: 0.0,
            y_scale: 1.0,
        };
        let out = destandardize(&g, &stats, false).unwrap();
        assert_eq!(out.x, g.x);
        assert_eq!(out.y0, g.y0);
        assert_eq!(out.y1, g.y1);
    }

    #[test]
    fn destandardize_affine_map() {
        let g = GeneratedSample::new(
            array![[0.0]],
            array![0.0],
            array![0.0],
            array![1.0],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let stats = StandardizationStats {
            x_mean: array![0.0],
            x_scale: array![1.0],
            y_mean: 10.0,
            y_scale: 2.0,
        };
        let out = destandardize(&g, &stats, false).unwrap();
        assert_abs_diff_eq!(out.y0[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.y1[0], 12.0, epsilon = 1e-12);
        // consistency: z=0 picks y0
        assert_abs_diff_eq!(out.y[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn binary_rounding_thresholds_at_half() {
        let mut binary = BTreeSet::new();
        binary.insert(0);
        let g = GeneratedSample::new(
            array![[0.49], [0.51]],
            array![0.0, 1.0],
            array![0.0, 0.0],
            array![0.0, 0.0],
            vec!["b".into()],
            binary,
        )
        .unwrap();
        let stats = StandardizationStats {
            x_mean: array![0.0],
            x_scale: array![1.0],
            y_mean: 0.0,
            y_scale: 1.0,
        };
        let out = destandardize(&g, &stats, true).unwrap();
        assert_eq!(out.x[[0, 0]], 0.0);
        assert_eq!(out.x[[1, 0]], 1.0);
    }

    #[test]
    fn bootstrap_n1_is_identity() {
        let s = ObservationalSample::new(
            array![[7.0]],
            array![1.0],
            array![3.0],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let r = bootstrap_resample(&s, 42);
        assert_eq!(r.x, s.x);
        assert_eq!(r.y, s.y);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let s = toy_sample();
        let a = bootstrap_resample(&s, 9);
        let b = bootstrap_resample(&s, 9);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn bootstrap_rows_come_from_input() {
        let s = toy_sample();
        let r = bootstrap_resample(&s, 5);
        for i in 0..r.n() {
            let found = (0..s.n()).any(|k| {
                s.x[[k, 0]] == r.x[[i, 0]] && s.y[k] == r.y[i] && s.z[k] == r.z[i]
            });
            assert!(found, "resampled row {i} not in input");
        }
    }

    #[test]
    fn bootstrap_inclusion_counts_binomial() {
        // over many resamples of n=5, each row appears on average once per draw
        let s = ObservationalSample::new(
            array![[0.0], [1.0], [2.0], [3.0], [4.0]],
            array![1.0, 0.0, 1.0, 0.0, 1.0],
            array![0.0, 1.0, 2.0, 3.0, 4.0],
            vec!["x1".into()],
            BTreeSet::new(),
        )
        .unwrap();
        let reps = 10_000usize;
        let mut counts = [0usize; 5];
        for r in 0..reps {
            let b = bootstrap_resample(&s, r as u64);
            for i in 0..b.n() {
                counts[b.x[[i, 0]] as usize] += 1;
            }
        }
        // each of 5 rows drawn Binomial(reps*5, 1/5): mean reps, sd ~ sqrt(reps*5*0.2*0.8)
        let sd = (reps as f64 * 5.0 * 0.2 * 0.8).sqrt();
        for &c in &counts {
            assert!((c as f64 - reps as f64).abs() < 3.0 * sd, "count {c} outside band");
        }
    }

    #[test]
    fn drop_column_shifts_binary_flags() {
        let mut binary = BTreeSet::new();
        binary.insert(2);
        let s = ObservationalSample::new(
            array![[1.0, 2.0, 1.0], [3.0, 4.0, 0.0]],
            array![1.0, 0.0],
            array![0.0, 1.0],
            vec!["a".into(), "b".into(), "c".into()],
            binary,
        )
        .unwrap();
        let d = s.drop_column(1).unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.column_names, vec!["a", "c"]);
        assert!(d.binary_columns.contains(&1));
    }
}
