use super::NumericsError;

/// Least-squares fit. Coefficients are intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// Set when the design was the univariate polynomial basis `1, x, …, x^d`.
    pub basis_degree: Option<usize>,
    pub residual_sum_squares: f64,
}

impl LinearFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.coefficients.iter().zip(row).map(|(c, v)| c * v).sum()
    }

    /// Evaluates the coefficients as a polynomial in `x`.
    pub fn predict(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

pub fn polynomial_basis(x: f64, degree: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(degree + 1);
    let mut p = 1.0;
    for _ in 0..=degree {
        row.push(p);
        p *= x;
    }
    row
}

pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize) -> Result<LinearFit, NumericsError> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| polynomial_basis(x, degree)).collect();
    let mut fit = fit_ols(&rows, ys)?;
    fit.basis_degree = Some(degree);
    Ok(fit)
}

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Ordinary least squares via the normal equations.
///
/// Columns are equilibrated to roughly unit norm before a Cholesky factorisation;
/// a pivot below `1e-12` times the largest pivot means collinear columns.
/// One step of iterative refinement follows the initial solve.
pub fn fit_ols<R: AsRef<[f64]>>(design_rows: &[R], responses: &[f64]) -> Result<LinearFit, NumericsError> {
    let rows = design_rows.len();
    if rows != responses.len() {
        return Err(NumericsError::DimensionMismatch(format!("{rows} design rows vs {} responses", responses.len())));
    }
    let cols = design_rows.first().map_or(0, |r| r.as_ref().len());
    if cols == 0 {
        return Err(NumericsError::DimensionMismatch("design has no columns".into()));
    }
    if let Some(i) = design_rows.iter().position(|r| r.as_ref().len() != cols) {
        return Err(NumericsError::DimensionMismatch(format!(
            "row {i} has {} columns, expected {cols}",
            design_rows[i].as_ref().len()
        )));
    }
    if rows < cols {
        return Err(NumericsError::RankDeficient { column: rows });
    }
    if design_rows.iter().flat_map(|r| r.as_ref()).chain(responses).any(|v| !v.is_finite()) {
        return Err(NumericsError::InvalidParameter("non-finite value in least-squares input".into()));
    }

    let mut scale = vec![0.0; cols];
    for r in design_rows {
        for (s, v) in scale.iter_mut().zip(r.as_ref()) {
            *s += v * v;
        }
    }
    for (j, s) in scale.iter_mut().enumerate() {
        if *s == 0.0 {
            return Err(NumericsError::RankDeficient { column: j });
        }
        // power-of-two scale: equilibrates without rounding
        *s = (-(s.sqrt().log2().round())).exp2();
    }
    let scaled: Vec<Vec<f64>> =
        design_rows.iter().map(|r| r.as_ref().iter().zip(&scale).map(|(v, s)| v * s).collect()).collect();

    let mut gram = vec![vec![0.0; cols]; cols];
    for r in &scaled {
        for i in 0..cols {
            for j in 0..=i {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    let chol = cholesky(&gram)?;

    let xt = |residual: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; cols];
        for (r, e) in scaled.iter().zip(residual) {
            for (vj, rj) in v.iter_mut().zip(r) {
                *vj += rj * e;
            }
        }
        v
    };
    let mut beta = cholesky_solve(&chol, &xt(responses));
    let residuals = |beta: &[f64]| -> Vec<f64> {
        scaled.iter().zip(responses).map(|(r, y)| y - r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).collect()
    };
    let correction = cholesky_solve(&chol, &xt(&residuals(&beta)));
    for (b, c) in beta.iter_mut().zip(&correction) {
        *b += c;
    }
    let rss = residuals(&beta).iter().map(|e| e * e).sum();
    let coefficients = beta.iter().zip(&scale).map(|(b, s)| b * s).collect();
    Ok(LinearFit { coefficients, basis_degree: None, residual_sum_squares: rss })
}

/// Lower-triangular factor of a symmetric positive-definite matrix given
/// by its lower triangle.
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NumericsError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut max_pivot: f64 = 0.0;
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        max_pivot = max_pivot.max(a[j][j]);
        if !(d > PIVOT_TOLERANCE * max_pivot) {
            return Err(NumericsError::RankDeficient { column: j });
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (z[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}
