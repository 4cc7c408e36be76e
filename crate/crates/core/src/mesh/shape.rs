//! Reference shape functions on the bi-unit square.
//!
//! Local node order follows the VTK quadratic-quad convention: corners
//! counter-clockwise from (-1,-1), then edge midpoints starting on the
//! bottom edge, then the centre node for the 9-node element.

/// Reference coordinates of the local nodes (first 4 are the corners).
pub const REFERENCE_NODES: [[f64; 2]; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Piecewise constant (one function per cell).
    Constant,
    /// 4-node bilinear.
    Bilinear,
    /// 8-node serendipity ("incomplete Q2").
    Serendipity8,
    /// 9-node Lagrange (full Q2).
    Lagrange9,
}

impl BasisKind {
    pub fn len(self) -> usize {
        match self {
            BasisKind::Constant => 1,
            BasisKind::Bilinear => 4,
            BasisKind::Serendipity8 => 8,
            BasisKind::Lagrange9 => 9,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

/// Values, reference gradients and reference second derivatives
/// `[d2/dxi2, d2/dxideta, d2/deta2]` of every basis function at one point.
#[derive(Debug, Clone, Default)]
pub struct ReferenceShape {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

fn lagrange_1d(i: usize, s: f64) -> (f64, f64, f64) {
    // nodes -1, 0, 1 at i = 0, 1, 2
    match i {
        0 => (0.5 * s * (s - 1.0), s - 0.5, 1.0),
        1 => (1.0 - s * s, -2.0 * s, -2.0),
        _ => (0.5 * s * (s + 1.0), s + 0.5, 1.0),
    }
}

fn index_1d(c: f64) -> usize {
    if c < -0.5 {
        0
    } else if c > 0.5 {
        2
    } else {
        1
    }
}

pub fn reference_shape(kind: BasisKind, xi: f64, eta: f64) -> ReferenceShape {
    let n = kind.len();
    let mut out = ReferenceShape {
        values: vec![0.0; n],
        grads: vec![[0.0; 2]; n],
        hessians: vec![[0.0; 3]; n],
    };
    match kind {
        BasisKind::Constant => {
            out.values[0] = 1.0;
        }
        BasisKind::Bilinear => {
            for (k, node) in REFERENCE_NODES[..4].iter().enumerate() {
                let a = 1.0 + xi * node[0];
                let b = 1.0 + eta * node[1];
                out.values[k] = 0.25 * a * b;
                out.grads[k] = [0.25 * node[0] * b, 0.25 * node[1] * a];
                out.hessians[k] = [0.0, 0.25 * node[0] * node[1], 0.0];
            }
        }
        BasisKind::Serendipity8 => {
            for (k, node) in REFERENCE_NODES[..8].iter().enumerate() {
                let (xk, yk) = (node[0], node[1]);
                if k < 4 {
                    let a = xi * xk;
                    let b = eta * yk;
                    out.values[k] = 0.25 * (1.0 + a) * (1.0 + b) * (a + b - 1.0);
                    out.grads[k] = [
                        0.25 * xk * (1.0 + b) * (2.0 * a + b),
                        0.25 * yk * (1.0 + a) * (a + 2.0 * b),
                    ];
                    out.hessians[k] = [
                        0.5 * (1.0 + b),
                        0.25 * xk * yk * (2.0 * a + 2.0 * b + 1.0),
                        0.5 * (1.0 + a),
                    ];
                } else if xk == 0.0 {
                    let b = eta * yk;
                    out.values[k] = 0.5 * (1.0 - xi * xi) * (1.0 + b);
                    out.grads[k] = [-xi * (1.0 + b), 0.5 * (1.0 - xi * xi) * yk];
                    out.hessians[k] = [-(1.0 + b), -xi * yk, 0.0];
                } else {
                    let a = xi * xk;
                    out.values[k] = 0.5 * (1.0 + a) * (1.0 - eta * eta);
                    out.grads[k] = [0.5 * xk * (1.0 - eta * eta), -eta * (1.0 + a)];
                    out.hessians[k] = [0.0, -eta * xk, -(1.0 + a)];
                }
            }
        }
        BasisKind::Lagrange9 => {
            for (k, node) in REFERENCE_NODES.iter().enumerate() {
                let (fx, dfx, ddfx) = lagrange_1d(index_1d(node[0]), xi);
                let (fy, dfy, ddfy) = lagrange_1d(index_1d(node[1]), eta);
                out.values[k] = fx * fy;
                out.grads[k] = [dfx * fy, fx * dfy];
                out.hessians[k] = [ddfx * fy, dfx * dfy, fx * ddfy];
            }
        }
    }
    out
}

/// Quadratic Lagrange trace basis on a facet, nodes at s = -1, 0, 1.
pub fn facet_shape(s: f64) -> [f64; 3] {
    [0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)]
}
