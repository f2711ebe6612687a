//! Central finite-difference checks of tape gradients.

use super::{Matrix, NumericError, Tape, Var};

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Number of scalar coordinates compared.
    pub checked: usize,
}

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of the scalar `f(inputs)` with central
/// differences of step `h` in every coordinate of every input.
///
/// `f` receives a tape and one variable per input, recorded as parameters,
/// and must return a 1×1 variable.
pub fn check_gradients<E>(
    inputs: &[Matrix],
    h: f64,
    floor: f64,
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var, E>,
) -> Result<GradCheck, E>
where
    E: From<NumericError>,
{
    let eval = |values: &[Matrix]| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.param(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.scalar(out)?)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let mut work = inputs.to_vec();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (k, &var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(var, &inputs[k]);
        for idx in 0..inputs[k].len() {
            let orig = inputs[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + h;
            let up = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig - h;
            let down = eval(&work)?;
            work[k].as_mut_slice()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic.as_slice()[idx], numeric, floor));
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}
