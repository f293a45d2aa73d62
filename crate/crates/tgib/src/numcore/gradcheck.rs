//! Central finite-difference gradient checker.
//!
//! Works against any loss closure: the caller supplies analytic gradients
//! (from a backward pass), a way to nudge one parameter entry, and a way to
//! re-evaluate the loss. Stochastic layers must be frozen (replayed noise)
//! so every evaluation sees identical randomness.

use std::collections::HashMap;

use super::NumError;

/// Worst-case comparison for one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub checks: Vec<ParamCheck>,
    pub step: f64,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_rel_err)
            .fold(0.0, f64::max)
    }

    /// One line per parameter, worst entry first.
    pub fn summary(&self) -> String {
        let mut rows: Vec<&ParamCheck> = self.checks.iter().collect();
        rows.sort_by(|a, b| b.max_rel_err.total_cmp(&a.max_rel_err));
        rows.iter()
            .map(|c| {
                format!(
                    "{:<24} max_rel_err {:.3e} (analytic {:.6e}, numeric {:.6e} at [{}])",
                    c.name, c.max_rel_err, c.analytic, c.numeric, c.worst_index
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Relative error with an absolute floor so near-zero gradients do not
/// explode the ratio.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Checks every entry of every listed parameter with central differences of
/// width `step`. `nudge(name, i, delta)` must add `delta` to entry `i` of
/// the named parameter; `loss()` re-runs the frozen forward pass.
pub fn gradcheck(
    sizes: &[(String, usize)],
    analytic: &HashMap<String, Vec<f64>>,
    mut nudge: impl FnMut(&str, usize, f64),
    mut loss: impl FnMut() -> f64,
    step: f64,
) -> Result<GradReport, NumError> {
    let mut checks = Vec::with_capacity(sizes.len());
    for (name, len) in sizes {
        let grads = analytic.get(name).ok_or_else(|| NumError::MissingGrad {
            name: name.clone(),
        })?;
        if grads.len() != *len {
            return Err(NumError::LengthMismatch {
                op: "gradcheck",
                len: grads.len(),
                shape: [1, *len],
            });
        }
        let mut check = ParamCheck {
            name: name.clone(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..*len {
            nudge(name, i, step);
            let up = loss();
            nudge(name, i, -2.0 * step);
            let down = loss();
            nudge(name, i, step);
            let fd = (up - down) / (2.0 * step);
            let err = rel_err(grads[i], fd);
            if err > check.max_rel_err {
                check.max_rel_err = err;
                check.worst_index = i;
                check.analytic = grads[i];
                check.numeric = fd;
            }
        }
        checks.push(check);
    }
    Ok(GradReport { checks, step })
}
