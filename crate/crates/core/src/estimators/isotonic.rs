use crate::error::{Error, Result};

/// Weighted least-squares projection of `y` onto nondecreasing sequences
/// (pool adjacent violators).
pub fn isotonic_regression(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if y.len() != w.len() {
        return Err(Error::LengthMismatch(y.len(), w.len()));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("isotonic regression of an empty sequence".into()));
    }
    if let Some(i) = w.iter().position(|&wi| !(wi > 0.0 && wi.is_finite())) {
        return Err(Error::NonPositiveWeight(i));
    }
    Ok(pava(y, w))
}

/// Blocks are kept as (weighted mean, total weight, length).
pub(crate) fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = (yi, wi, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let total = bw + cur.1;
            cur = ((m * bw + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}
