//! Gaussian quadrature on the reference triangle and the unit interval.
//!
//! The 7-point triangle rule integrates degree 5 exactly, which covers every
//! bilinear/trilinear form in the system (the convection integrand, quadratic
//! velocity times its gradient times a quadratic test function, is degree 5).
//! Arbitrary-function loads use a collapsed tensor rule built from
//! Gauss-Legendre points so no hand-typed high-order table is needed.

/// One quadrature point on the reference triangle {x,y >= 0, x+y <= 1}.
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub xi: f64,
    pub eta: f64,
    /// Weight including the reference-triangle area; sums to 1/2 over a rule.
    pub w: f64,
}

/// Degree-5 exact 7-point rule.
pub fn tri_rule_deg5() -> Vec<TriPoint> {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 + s15) / 21.0;
    let a2 = (6.0 - s15) / 21.0;
    let w0 = 9.0 / 80.0;
    let w1 = (155.0 + s15) / 2400.0;
    let w2 = (155.0 - s15) / 2400.0;
    let mut pts = vec![TriPoint {
        xi: 1.0 / 3.0,
        eta: 1.0 / 3.0,
        w: w0,
    }];
    for (a, w) in [(a1, w1), (a2, w2)] {
        // permutations of barycentric (a, a, 1-2a)
        let b = 1.0 - 2.0 * a;
        for (l2, l3) in [(a, a), (b, a), (a, b)] {
            pts.push(TriPoint {
                xi: l2,
                eta: l3,
                w,
            });
        }
    }
    pts
}

/// Collapsed (Duffy) tensor rule from `n`-point Gauss-Legendre per direction;
/// exact for total degree `2n - 3` and accurate for smooth integrands.
pub fn tri_rule_collapsed(n: usize) -> Vec<TriPoint> {
    let gl = gauss_legendre_01(n);
    let mut pts = Vec::with_capacity(n * n);
    for &(x, wx) in &gl {
        for &(y, wy) in &gl {
            pts.push(TriPoint {
                xi: x,
                eta: y * (1.0 - x),
                w: wx * wy * (1.0 - x),
            });
        }
    }
    pts
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre polynomial; deterministic to the last bit for fixed `n`.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) * 0.5, w * 0.5));
    }
    out
}

/// Legendre polynomial P_n and derivative at `x` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
