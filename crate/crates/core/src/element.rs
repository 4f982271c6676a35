//! 8-node serendipity quadrilateral and its Gauss rule.
//!
//! Local node order: corners counter-clockwise from (−1,−1), then midsides
//! (0,−1), (1,0), (0,1), (−1,0). This is also the VTK_QUADRATIC_QUAD order.

pub const NODES: usize = 8;

/// Reference coordinates of the local nodes.
pub const REF_NODES: [[f64; 2]; NODES] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
];

/// Local edges as (corner, midside, corner).
pub const EDGES: [[usize; 3]; 4] = [[0, 4, 1], [1, 5, 2], [2, 6, 3], [3, 7, 0]];

pub fn shape(xi: f64, eta: f64) -> [f64; NODES] {
    let mut n = [0.0; NODES];
    for (i, &[xa, ea]) in REF_NODES.iter().enumerate() {
        n[i] = if i < 4 {
            0.25 * (1.0 + xi * xa) * (1.0 + eta * ea) * (xi * xa + eta * ea - 1.0)
        } else if xa == 0.0 {
            0.5 * (1.0 - xi * xi) * (1.0 + eta * ea)
        } else {
            0.5 * (1.0 + xi * xa) * (1.0 - eta * eta)
        };
    }
    n
}

/// Derivatives with respect to (ξ, η).
pub fn shape_derivs(xi: f64, eta: f64) -> [[f64; 2]; NODES] {
    let mut d = [[0.0; 2]; NODES];
    for (i, &[xa, ea]) in REF_NODES.iter().enumerate() {
        d[i] = if i < 4 {
            [
                0.25 * xa * (1.0 + eta * ea) * (2.0 * xi * xa + eta * ea),
                0.25 * ea * (1.0 + xi * xa) * (xi * xa + 2.0 * eta * ea),
            ]
        } else if xa == 0.0 {
            [-xi * (1.0 + eta * ea), 0.5 * ea * (1.0 - xi * xi)]
        } else {
            [0.5 * xa * (1.0 - eta * eta), -eta * (1.0 + xi * xa)]
        };
    }
    d
}

/// Gauss point in the reference square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

pub const QP_PER_ELEM: usize = 9;

/// 3×3 Gauss–Legendre rule on [−1,1]².
pub fn quadrature_rule() -> [QuadPoint; QP_PER_ELEM] {
    let a = (0.6_f64).sqrt();
    let pts = [-a, 0.0, a];
    let w = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut out = [QuadPoint {
        xi: 0.0,
        eta: 0.0,
        weight: 0.0,
    }; QP_PER_ELEM];
    for j in 0..3 {
        for i in 0..3 {
            out[3 * j + i] = QuadPoint {
                xi: pts[i],
                eta: pts[j],
                weight: w[i] * w[j],
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_kronecker() {
        for &(x, e) in &[(0.3, -0.7), (-0.9, 0.1), (0.0, 0.0), (0.77, 0.77)] {
            let n = shape(x, e);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let d = shape_derivs(x, e);
            assert!(d.iter().map(|g| g[0]).sum::<f64>().abs() < 1e-14);
            assert!(d.iter().map(|g| g[1]).sum::<f64>().abs() < 1e-14);
        }
        for (i, p) in REF_NODES.iter().enumerate() {
            let n = shape(p[0], p[1]);
            for (j, v) in n.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-7;
        let (x, e) = (0.21, -0.43);
        let d = shape_derivs(x, e);
        let (np, nm) = (shape(x + h, e), shape(x - h, e));
        let (ep, em) = (shape(x, e + h), shape(x, e - h));
        for i in 0..NODES {
            assert!(((np[i] - nm[i]) / (2.0 * h) - d[i][0]).abs() < 1e-8);
            assert!(((ep[i] - em[i]) / (2.0 * h) - d[i][1]).abs() < 1e-8);
        }
    }

    #[test]
    fn rule_integrates_reference_square() {
        let q = quadrature_rule();
        let area: f64 = q.iter().map(|p| p.weight).sum();
        assert!((area - 4.0).abs() < 1e-15);
        // ∫∫ x²y² over [−1,1]² = (2/3)² = 4/9.
        let m: f64 = q.iter().map(|p| p.weight * p.xi.powi(2) * p.eta.powi(2)).sum();
        assert!((m - 4.0 / 9.0).abs() < 1e-15);
        // Degree-5 exactness: ∫∫ x⁴y⁴ = (2/5)².
        let m4: f64 = q.iter().map(|p| p.weight * p.xi.powi(4) * p.eta.powi(4)).sum();
        assert!((m4 - 0.16).abs() < 1e-14);
    }
}
