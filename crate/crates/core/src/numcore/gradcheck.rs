//! Central finite-difference verification of analytic gradients.
//!
//! The check only evaluates the function; it never looks at the tape's
//! backward pass, so it stays an independent witness for it.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Result of one function evaluation: the scalar value and the max-pool
/// argmax signature of the evaluation (empty if the function has no kinks).
pub struct Probe {
    pub value: f64,
    pub signature: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct CheckOutcome {
    pub checked: usize,
    /// Entries whose ±h probes crossed a max-pool switch, where the function
    /// is not differentiable within the probe interval.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// (tensor, entry, analytic, numeric) of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl CheckOutcome {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-8)
}

/// Compares `analytic[t]` to `(f(θ + h·e) - f(θ - h·e)) / 2h` for every
/// entry of every tensor in `params`.
pub fn check<F>(params: &[Matrix], analytic: &[Matrix], h: f64, mut eval: F) -> Result<CheckOutcome>
where
    F: FnMut(&[Matrix]) -> Result<Probe>,
{
    if params.len() != analytic.len() {
        return Err(Error::Invalid("one analytic gradient per tensor required".into()));
    }
    for (p, g) in params.iter().zip(analytic) {
        p.check_same_shape(g, "gradcheck")?;
    }
    let base = eval(params)?;
    let mut work = params.to_vec();
    let mut out = CheckOutcome::default();
    for t in 0..params.len() {
        for e in 0..params[t].len() {
            let orig = work[t].as_slice()[e];
            work[t].as_mut_slice()[e] = orig + h;
            let plus = eval(&work)?;
            work[t].as_mut_slice()[e] = orig - h;
            let minus = eval(&work)?;
            work[t].as_mut_slice()[e] = orig;

            if plus.signature != base.signature || minus.signature != base.signature {
                out.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus.value - minus.value) / (2.0 * h);
            let a = analytic[t].as_slice()[e];
            let err = relative_error(a, numeric);
            out.checked += 1;
            if err > out.max_rel_error || out.worst.is_none() {
                out.max_rel_error = out.max_rel_error.max(err);
                if err >= out.max_rel_error {
                    out.worst = Some((t, e, a, numeric));
                }
            }
        }
    }
    Ok(out)
}
