use super::{NnError, Tape, Tensor, Var};

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// max over coordinates of `|analytic − numeric| / (|numeric| + 1e-8)`
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Tensor<f64>,
    pub numeric: Tensor<f64>,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Central differences of a scalar function around `point`.
pub fn numeric_gradient<E: From<NnError>>(
    mut value_at: impl FnMut(&Tensor<f64>) -> Result<f64, E>,
    point: &Tensor<f64>,
    step: f64,
) -> Result<Tensor<f64>, E> {
    let mut probe = point.clone();
    let mut out = Vec::with_capacity(point.numel());
    for i in 0..point.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = value_at(&probe)?;
        probe.data_mut()[i] = orig - step;
        let minus = value_at(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite { coordinate: i }.into());
        }
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(Tensor::from_parts(point.shape().to_vec(), out))
}

pub fn compare_gradients(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> Result<GradCheck, NnError> {
    if analytic.shape() != numeric.shape() {
        return Err(NnError::ShapeMismatch {
            op: "compare_gradients",
            left: analytic.shape().to_vec(),
            right: numeric.shape().to_vec(),
        });
    }
    let mut worst = (0.0f64, 0usize);
    for (i, (a, n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        if !a.is_finite() {
            return Err(NnError::NonFinite { coordinate: i });
        }
        let err = (a - n).abs() / (n.abs() + 1e-8);
        if err > worst.0 {
            worst = (err, i);
        }
    }
    Ok(GradCheck {
        max_rel_error: worst.0,
        worst_index: worst.1,
        analytic: analytic.clone(),
        numeric: numeric.clone(),
    })
}

/// Checks the tape gradient of `f` at `point` against central differences.
///
/// `f` receives a fresh tape and a leaf holding the point; it must return a
/// scalar node and be deterministic.
pub fn grad_check<E, F>(f: F, point: &Tensor<f64>, step: f64) -> Result<GradCheck, E>
where
    E: From<NnError>,
    F: Fn(&mut Tape<f64>, Var) -> Result<Var, E>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone(), true);
    let loss = f(&mut tape, x)?;
    let analytic = tape.backward(loss)?.wrt(x);
    let numeric = numeric_gradient(
        |p: &Tensor<f64>| -> Result<f64, E> {
            let mut tape = Tape::new();
            let x = tape.constant(p.clone());
            let loss = f(&mut tape, x)?;
            Ok(tape.value(loss).item()?)
        },
        point,
        step,
    )?;
    Ok(compare_gradients(&analytic, &numeric)?)
}
