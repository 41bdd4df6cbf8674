//! Classical fourth-order Runge-Kutta step.

/// Advances `y` by one step of size `h` under `y' = f(y)`.
pub fn rk4_step<const N: usize, E, F>(f: &mut F, y: [f64; N], h: f64) -> Result<[f64; N], E>
where
    F: FnMut([f64; N]) -> Result<[f64; N], E>,
{
    let k1 = f(y)?;
    let k2 = f(axpy(y, 0.5 * h, &k1))?;
    let k3 = f(axpy(y, 0.5 * h, &k2))?;
    let k4 = f(axpy(y, h, &k3))?;
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn axpy<const N: usize>(y: [f64; N], a: f64, x: &[f64; N]) -> [f64; N] {
    let mut out = y;
    for i in 0..N {
        out[i] += a * x[i];
    }
    out
}
