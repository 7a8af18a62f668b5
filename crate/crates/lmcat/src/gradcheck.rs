//! Central finite-difference gradient checking.
//!
//! The numerical side recomputes the loss through fresh forward passes only,
//! so it stays independent of the backward implementation it is checking.
//! Checks are meant to run in `f64`; `f32` accumulates too much rounding for
//! the tolerances used here.

use crate::error::Result;
use crate::tensor::{Graph, Scalar, Tensor, Var};

/// Step size and tolerances for a finite-difference check.
#[derive(Debug, Clone, Copy)]
pub struct CheckSettings {
    /// Central-difference step.
    pub step: f64,
    /// Relative tolerance on each gradient entry.
    pub rel_tol: f64,
    /// Absolute floor below which differences are ignored.
    pub abs_tol: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-8,
        }
    }
}

/// Worst deviation found by [`check_gradients`].
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<WorstEntry>,
}

#[derive(Debug, Clone)]
pub struct WorstEntry {
    pub leaf: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.worst.is_none()
    }
}

/// Compares analytic gradients of `build` against central finite differences.
///
/// `build` receives a graph plus the leaf tensors and must return the scalar
/// loss var along with the vars of the leaves to check, in the same order as
/// `leaves`. It is invoked `2·n + 1` times for `n` checked elements.
pub fn check_gradients<T, F>(
    leaves: &[Tensor<T>],
    settings: CheckSettings,
    mut build: F,
) -> Result<CheckReport>
where
    T: Scalar,
    F: FnMut(&mut Graph<T>, &[Tensor<T>]) -> Result<(Var, Vec<Var>)>,
{
    // Analytic pass.
    let mut g = Graph::new();
    let (loss, vars) = build(&mut g, leaves)?;
    g.backward(loss)?;
    let analytic: Vec<Tensor<T>> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();

    let eval = |ls: &[Tensor<T>], build: &mut F| -> Result<f64> {
        let mut g = Graph::new();
        let (loss, _) = build(&mut g, ls)?;
        Ok(g.value(loss).item().as_f64())
    };

    let mut report = CheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let mut work: Vec<Tensor<T>> = leaves.to_vec();
    for (li, leaf) in leaves.iter().enumerate() {
        for idx in 0..leaf.numel() {
            let orig = leaf.data()[idx].as_f64();
            work[li].data_mut()[idx] = T::from_f64(orig + settings.step);
            let up = eval(&work, &mut build)?;
            work[li].data_mut()[idx] = T::from_f64(orig - settings.step);
            let down = eval(&work, &mut build)?;
            work[li].data_mut()[idx] = T::from_f64(orig);

            let numeric = (up - down) / (2.0 * settings.step);
            let a = analytic[li].data()[idx].as_f64();
            let diff = (a - numeric).abs();
            let denom = a.abs().max(numeric.abs());
            let rel = if denom > 0.0 { diff / denom } else { 0.0 };
            report.checked += 1;
            if rel > report.max_rel_err && diff > settings.abs_tol {
                report.max_rel_err = rel;
            }
            if diff > settings.abs_tol && rel > settings.rel_tol {
                report.worst = Some(WorstEntry {
                    leaf: li,
                    index: idx,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}
