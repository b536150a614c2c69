use super::{Tape, Tensor, TensorError, Var};

/// `|analytic − numeric| / max(1, |numeric|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Central-difference gradient of a scalar function at `point`.
///
/// With `coords = None` every coordinate is perturbed; otherwise only the
/// listed flat indices, and the result has one entry per listed index.
pub fn numeric_gradient<F>(
    mut f: F,
    point: &Tensor,
    eps: f64,
    coords: Option<&[usize]>,
) -> Result<Vec<f64>, TensorError>
where
    F: FnMut(&Tensor) -> Result<f64, TensorError>,
{
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..point.len()).collect();
            &all
        }
    };
    let mut probe = point.clone();
    let mut out = Vec::with_capacity(coords.len());
    for &i in coords {
        let x = point.data()[i];
        probe.data_mut()[i] = x + eps;
        let up = f(&probe)?;
        probe.data_mut()[i] = x - eps;
        let down = f(&probe)?;
        probe.data_mut()[i] = x;
        out.push((up - down) / (2.0 * eps));
    }
    Ok(out)
}

/// Compares the tape gradient of `f` at `point` with central differences and
/// returns the maximum [`relative_error`] over all coordinates.
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64, TensorError>
where
    F: for<'a> Fn(&mut Tape<'a>, Var) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone(), true);
    let y = f(&mut tape, x)?;
    if tape.value(y).len() != 1 {
        return Err(TensorError::Contract(format!(
            "grad_check needs a scalar function, got shape {:?}",
            tape.shape(y)
        )));
    }
    tape.backward(y)?;
    let analytic = tape
        .grad(x)
        .unwrap_or_else(|| Tensor::zeros(point.shape()));

    let numeric = numeric_gradient(
        |p| {
            let mut tape = Tape::new();
            let x = tape.leaf(p.clone(), false);
            let y = f(&mut tape, x)?;
            Ok(tape.value(y).data()[0])
        },
        point,
        eps,
        None,
    )?;
    Ok(analytic
        .data()
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear_function() {
        let p = Tensor::from_fn(&[3, 4], |i| i as f64 * 0.37 - 2.0);
        let err = grad_check(|t, x| t.sum(x), &p, 1e-5).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn rejects_non_scalar_function() {
        let p = Tensor::zeros(&[3]);
        let err = grad_check(|t, x| t.sigmoid(x), &p, 1e-5);
        assert!(matches!(err, Err(TensorError::Contract(_))));
    }

    #[test]
    fn numeric_gradient_subset() {
        let p = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let g = numeric_gradient(
            |t| Ok(t.data().iter().map(|v| v * v).sum()),
            &p,
            1e-5,
            Some(&[2, 0]),
        )
        .unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }
}
