//! Small deterministic quadrature helpers: Gauss–Legendre nodes/weights and
//! composite integration on an interval.

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre polynomial from the
/// Chebyshev initial guess; converges to machine precision in a handful of
/// iterations for the small orders used here.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_m(x) and P'_m(x).
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // The cosine initial guesses give descending nodes; flip to ascending.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Composite Gauss–Legendre integral of `f` over [a, b] with `panels`
/// subintervals and `order` points per panel. Fixed evaluation order, so the
/// result is bit-reproducible.
pub fn integrate_composite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in xs.iter().zip(ws.iter()) {
            panel += w * f(mid + half * x);
        }
        total += panel * half;
    }
    total
}

/// Cumulative antiderivative table of `f` on [a, b]: panel boundaries plus
/// partial-panel Gauss evaluation, giving a smooth, deterministic
/// `x -> ∫_a^x f` evaluator.
pub struct CumulativeIntegral {
    a: f64,
    h: f64,
    cum: Vec<f64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl CumulativeIntegral {
    pub fn build<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gl_nodes, gl_weights) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let half = 0.5 * h;
            let mut panel = 0.0;
            for (x, w) in gl_nodes.iter().zip(gl_weights.iter()) {
                panel += w * f(mid + half * x);
            }
            acc += panel * half;
            cum.push(acc);
        }
        CumulativeIntegral { a, h, cum, gl_nodes, gl_weights }
    }

    /// ∫_a^x f, for x inside the tabulated interval (clamped outside).
    pub fn eval<F: Fn(f64) -> f64>(&self, f: &F, x: f64) -> f64 {
        let panels = self.cum.len() - 1;
        let pos = (x - self.a) / self.h;
        let idx = (pos.floor() as isize).clamp(0, panels as isize - 1) as usize;
        let lo = self.a + idx as f64 * self.h;
        let mid = 0.5 * (lo + x);
        let half = 0.5 * (x - lo);
        let mut partial = 0.0;
        for (xn, w) in self.gl_nodes.iter().zip(self.gl_weights.iter()) {
            partial += w * f(mid + half * xn);
        }
        self.cum[idx] + partial * half
    }
}
