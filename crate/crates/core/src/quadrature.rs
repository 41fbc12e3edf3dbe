//! Globally adaptive Gauss–Legendre quadrature.
//!
//! Each panel is integrated with an `n`-point Gauss–Legendre rule and with
//! the same rule on its two halves; the difference is the panel's error
//! estimate. The panel with the largest estimate is bisected until the
//! summed estimate falls below the absolute tolerance.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Maximum number of panels before giving up.
pub const MAX_PANELS: usize = 1 << 14;

const ORDER: usize = 15;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w)
        .map(|(&xi, &wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let coarse = fixed(f, a, b);
    let m = 0.5 * (a + b);
    let fine = fixed(f, a, m) + fixed(f, m, b);
    Panel {
        a,
        b,
        value: fine,
        error: (fine - coarse).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute accuracy `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut heap = BinaryHeap::new();
    let first = panel(&f, lo, hi);
    let mut total_err = first.error;
    heap.push(first);

    while total_err > tol {
        if heap.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                tol,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        if !worst.value.is_finite() {
            return Err(Error::Quadrature {
                tol,
                panels: heap.len(),
            });
        }
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Panel too narrow to split further in floating point.
            return Err(Error::Quadrature {
                tol,
                panels: heap.len() + 1,
            });
        }
        let left = panel(&f, worst.a, m);
        let right = panel(&f, m, worst.b);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if total_err <= tol {
            break;
        }
        // Guard against drift in the running sum.
        if heap.len() % 256 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let mut values: Vec<f64> = heap.iter().map(|p| p.value).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(sign * values.iter().sum::<f64>())
}
