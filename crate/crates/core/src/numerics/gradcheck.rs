//! Central finite-difference checks against the tape gradients.

use crate::error::Result;
use crate::numerics::mat::Mat;
use crate::numerics::tape::{ParamStore, Tape, Var};

/// Worst disagreement found by [`check_params`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Over entries where the function is smooth at the probe scale.
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
    /// Entries whose stencil straddles a kink (a relu or clamp boundary):
    /// the central differences at `h` and `h / 100` disagree. These are
    /// compared against the finer stencil instead.
    pub nonsmooth: usize,
    pub max_rel_error_nonsmooth: f64,
}

impl GradCheckReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_error <= rel_tol && self.max_rel_error_nonsmooth <= rel_tol
    }
}

/// Relative error with an absolute floor: differences below `abs_floor`
/// count as exact agreement.
pub fn rel_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= abs_floor {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

/// Relative disagreement above which two central differences of the same
/// entry are taken to straddle a kink. Smooth functions agree to roughly
/// `h²` at the probe scales used here.
const SMOOTHNESS_TOL: f64 = 1e-6;

/// Compares the analytic gradient of the scalar built by `build` against
/// central differences with step `h`, over every entry of every parameter.
pub fn check_params<F>(store: &ParamStore, h: f64, abs_floor: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut analytic_store = store.clone();
    analytic_store.zero_grads();
    let mut tape = Tape::new();
    let loss = build(&analytic_store, &mut tape)?;
    tape.backward(loss)?.accumulate_into(&tape, &mut analytic_store);

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = build(s, &mut t)?;
        Ok(t.value(l).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
        nonsmooth: 0,
        max_rel_error_nonsmooth: 0.0,
    };
    let mut probe = store.clone();
    for id in store.ids() {
        let len = store.value(id).len();
        for k in 0..len {
            let orig = store.value(id).as_slice()[k];
            let mut central = |step: f64| -> Result<f64> {
                probe.get_mut(id).value.as_mut_slice()[k] = orig + step;
                let up = eval(&probe)?;
                probe.get_mut(id).value.as_mut_slice()[k] = orig - step;
                let down = eval(&probe)?;
                probe.get_mut(id).value.as_mut_slice()[k] = orig;
                Ok((up - down) / (2.0 * step))
            };
            let numeric = central(h)?;
            let analytic = analytic_store.get(id).grad.as_slice()[k];
            report.entries_checked += 1;
            let err = rel_error(analytic, numeric, abs_floor);
            if err > SMOOTHNESS_TOL {
                let fine = central(h / 100.0)?;
                if rel_error(numeric, fine, abs_floor) > SMOOTHNESS_TOL {
                    report.nonsmooth += 1;
                    let fine_err = rel_error(analytic, fine, abs_floor);
                    report.max_rel_error_nonsmooth = report.max_rel_error_nonsmooth.max(fine_err);
                    continue;
                }
            }
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = k;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Finite-difference gradient of a scalar function of one matrix.
pub fn numeric_gradient(x: &Mat, h: f64, f: impl Fn(&Mat) -> Result<f64>) -> Result<Mat> {
    let mut probe = x.clone();
    let mut out = Mat::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let orig = x.as_slice()[k];
        probe.as_mut_slice()[k] = orig + h;
        let up = f(&probe)?;
        probe.as_mut_slice()[k] = orig - h;
        let down = f(&probe)?;
        probe.as_mut_slice()[k] = orig;
        out.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    Ok(out)
}
