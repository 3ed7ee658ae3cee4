//! Uniform-grid cubic splines: periodic, and clamped with given end slopes.
//! Both return the second derivatives at the knots.

/// Solves the cyclic tridiagonal system `x[i-1] + 4 x[i] + x[i+1] = rhs[i]`.
fn solve_cyclic_141(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3);
    // Sherman-Morrison on the tridiagonal part with corners folded in.
    let (alpha, beta) = (1.0, 1.0);
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(1.0, &diag, 1.0, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let zv = solve_tridiagonal(1.0, &diag, 1.0, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + zv[0] + beta * zv[n - 1] / gamma);
    x.iter().zip(&zv).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Thomas algorithm with constant off-diagonals.
fn solve_tridiagonal(lower: f64, diag: &[f64], upper: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower * c[i - 1];
        c[i] = upper / m;
        d[i] = (rhs[i] - lower * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Second derivatives of the periodic spline through `y` (knot spacing `h`).
pub fn periodic_second_derivs(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let k = 6.0 / (h * h);
    let rhs: Vec<f64> = (0..n).map(|i| k * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n])).collect();
    solve_cyclic_141(&rhs)
}

/// Second derivatives of the spline through `y` with end slopes `s0`, `s1`.
pub fn clamped_second_derivs(y: &[f64], h: f64, s0: f64, s1: f64) -> Vec<f64> {
    let n = y.len();
    let k = 6.0 / (h * h);
    let mut diag = vec![4.0; n];
    diag[0] = 2.0;
    diag[n - 1] = 2.0;
    let mut rhs = vec![0.0; n];
    rhs[0] = 6.0 * ((y[1] - y[0]) / h - s0) / h;
    rhs[n - 1] = 6.0 * (s1 - (y[n - 1] - y[n - 2]) / h) / h;
    for i in 1..n - 1 {
        rhs[i] = k * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    }
    solve_tridiagonal(1.0, &diag, 1.0, &rhs)
}

/// Value and derivative of the cubic on one interval, `a ∈ [0, 1]` the
/// fractional position from the left knot.
#[inline]
pub fn eval_segment(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, a: f64) -> (f64, f64) {
    let bl = 1.0 - a;
    let h2 = h * h / 6.0;
    let val = bl * y0 + a * y1 + ((bl * bl * bl - bl) * m0 + (a * a * a - a) * m1) * h2;
    let der = (y1 - y0) / h - (3.0 * bl * bl - 1.0) * h / 6.0 * m0 + (3.0 * a * a - 1.0) * h / 6.0 * m1;
    (val, der)
}
