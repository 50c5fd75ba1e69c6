//! Taylor-Hood shape functions on the reference triangle.
//!
//! Velocity: quadratic Lagrange (6 nodes: 3 vertices then midpoints of
//! edges 01, 12, 20). Pressure: linear Lagrange on the vertices. Edge traces
//! are parametrized by s in [0, 1] with nodes (end0, end1, midpoint).

/// P2 basis values at reference point (xi, eta).
pub fn p2_values(xi: f64, eta: f64) -> [f64; 6] {
    let l1 = 1.0 - xi - eta;
    let (l2, l3) = (xi, eta);
    [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l3,
        4.0 * l3 * l1,
    ]
}

/// P2 reference gradients (d/dxi, d/deta) at (xi, eta).
pub fn p2_grads(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let l1 = 1.0 - xi - eta;
    let (l2, l3) = (xi, eta);
    [
        [1.0 - 4.0 * l1, 1.0 - 4.0 * l1],
        [4.0 * l2 - 1.0, 0.0],
        [0.0, 4.0 * l3 - 1.0],
        [4.0 * (l1 - l2), -4.0 * l2],
        [4.0 * l3, 4.0 * l2],
        [-4.0 * l3, 4.0 * (l1 - l3)],
    ]
}

/// P1 basis values at (xi, eta).
pub fn p1_values(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

/// P1 reference gradients (constant).
pub const P1_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Quadratic edge-trace values at s in [0, 1]: nodes (end0, end1, midpoint).
pub fn p2_edge_values(s: f64) -> [f64; 3] {
    [
        (1.0 - s) * (1.0 - 2.0 * s),
        s * (2.0 * s - 1.0),
        4.0 * s * (1.0 - s),
    ]
}

/// d/ds of the quadratic edge trace.
pub fn p2_edge_derivs(s: f64) -> [f64; 3] {
    [4.0 * s - 3.0, 4.0 * s - 1.0, 4.0 - 8.0 * s]
}
