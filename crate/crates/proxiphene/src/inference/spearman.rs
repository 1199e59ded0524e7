//! Spearman rank correlation with average ranks for ties.

use crate::error::{Error, Result};

/// Average (fractional) ranks, 1-based; tied values share the mean of the
/// ranks they span.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("non-finite value in rank input"));
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) tie; mean 1-based rank is (i+j)/2 + 1.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    Ok(ranks)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Spearman correlation of two equal-length columns; `None` when either
/// column is constant. Requires at least 3 rows.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid_argument("column length mismatch"));
    }
    if a.len() < 3 {
        return Err(Error::invalid_argument("spearman needs at least 3 rows"));
    }
    let ra = average_ranks(a)?;
    let rb = average_ranks(b)?;
    Ok(pearson(&ra, &rb))
}

/// Pairwise Spearman matrix over the columns of a row-major table.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpearmanMatrix {
    pub names: Vec<String>,
    /// Row-major p x p matrix; diagonal 1, constant-column pairs 0.
    pub values: Vec<Vec<f64>>,
    /// Names of constant columns, whose correlations were zeroed.
    pub constant_columns: Vec<String>,
}

pub fn spearman_matrix(columns: &[Vec<f64>], names: &[String]) -> Result<SpearmanMatrix> {
    let p = columns.len();
    if names.len() != p {
        return Err(Error::invalid_argument("one name per column required"));
    }
    if p == 0 {
        return Ok(SpearmanMatrix { names: vec![], values: vec![], constant_columns: vec![] });
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::invalid_argument("ragged column lengths"));
    }
    if n < 3 {
        return Err(Error::invalid_argument("spearman matrix needs at least 3 rows"));
    }
    let ranks: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| average_ranks(c))
        .collect::<Result<_>>()?;
    let constant: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|v| *v == c[0]))
        .collect();

    let mut values = vec![vec![0.0f64; p]; p];
    for i in 0..p {
        values[i][i] = 1.0;
        for j in (i + 1)..p {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                pearson(&ranks[i], &ranks[j]).unwrap_or(0.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    let constant_columns = names
        .iter()
        .zip(constant.iter())
        .filter(|(_, c)| **c)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(SpearmanMatrix { names: names.to_vec(), values, constant_columns })
}
