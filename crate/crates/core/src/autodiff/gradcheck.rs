use alloc::vec::Vec;

use super::{Matrix, Tape, Var};
use crate::error::Result;

/// Denominator floor of the relative error, so that entries whose true
/// gradient is ~0 are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    /// `(input, element)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub passed: bool,
}

/// Compares supplied analytic gradients against central differences of
/// `eval` around `inputs`, at every element.
pub fn compare_gradients<F>(
    eval: F,
    analytic: &[Vec<f64>],
    inputs: &[Matrix],
    h: f64,
    tol: f64,
) -> Result<GradcheckReport>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    let coords: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(i, m)| (0..m.data.len()).map(move |k| (i, k))).collect();
    compare_gradients_at(eval, analytic, inputs, &coords, h, tol)
}

/// As [`compare_gradients`], restricted to the `(input, element)` pairs in
/// `coords`.
pub fn compare_gradients_at<F>(
    mut eval: F,
    analytic: &[Vec<f64>],
    inputs: &[Matrix],
    coords: &[(usize, usize)],
    h: f64,
    tol: f64,
) -> Result<GradcheckReport>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    let mut probe: Vec<Matrix> = inputs.to_vec();
    let mut report = GradcheckReport { max_rel_error: 0.0, worst: None, checked: 0, passed: true };
    for &(i, k) in coords {
        let orig = probe[i].data[k];
        probe[i].data[k] = orig + h;
        let plus = eval(&probe)?;
        probe[i].data[k] = orig - h;
        let minus = eval(&probe)?;
        probe[i].data[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i][k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel;
            report.worst = Some((i, k));
        }
    }
    report.passed = report.max_rel_error <= tol;
    Ok(report)
}

/// Builds `f` on a fresh tape with every input as a parameter, runs the
/// reverse pass and checks the result with [`compare_gradients`].
pub fn gradcheck<F>(f: F, inputs: &[Matrix], h: f64, tol: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let run = |ms: &[Matrix]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut t = Tape::new();
        let vars: Vec<Var> = ms.iter().map(|m| t.param(m)).collect();
        let out = f(&mut t, &vars)?;
        Ok((t, vars, out))
    };
    let (mut tape, vars, out) = run(inputs)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
    compare_gradients(
        |ms| {
            let (t, _, o) = run(ms)?;
            Ok(t.scalar(o))
        },
        &analytic,
        inputs,
        h,
        tol,
    )
}
