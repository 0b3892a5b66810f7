//! Fourth-order finite differences on uniform grids.
//!
//! Interior nodes use the five-point central stencils; the two nodes at each
//! end use one-sided stencils of the same order so the whole grid is covered.

/// Weights of one stencil row: `value = scale * sum(w[j] * f[start + j])`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub start: usize,
    pub w: [f64; 6],
    pub len: usize,
}

const D1_LEFT0: [f64; 6] = [-25.0, 48.0, -36.0, 16.0, -3.0, 0.0];
const D1_LEFT1: [f64; 6] = [-3.0, -10.0, 18.0, -6.0, 1.0, 0.0];
const D1_CENTRAL: [f64; 6] = [1.0, -8.0, 0.0, 8.0, -1.0, 0.0];
const D2_LEFT0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_LEFT1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
const D2_CENTRAL: [f64; 6] = [-1.0, 16.0, -30.0, 16.0, -1.0, 0.0];

/// Smallest grid the stencils support.
pub const MIN_POINTS: usize = 6;

fn mirror(w: &[f64; 6], len: usize, sign: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for j in 0..len {
        out[j] = sign * w[len - 1 - j];
    }
    out
}

/// First-derivative stencil at node `i` of an `n`-point grid (weights in units of 1/(12h)).
pub fn d1_stencil(i: usize, n: usize) -> Stencil {
    assert!(n >= MIN_POINTS && i < n);
    match i {
        0 => Stencil { start: 0, w: D1_LEFT0, len: 5 },
        1 => Stencil { start: 0, w: D1_LEFT1, len: 5 },
        _ if i == n - 1 => Stencil { start: n - 5, w: mirror(&D1_LEFT0, 5, -1.0), len: 5 },
        _ if i == n - 2 => Stencil { start: n - 5, w: mirror(&D1_LEFT1, 5, -1.0), len: 5 },
        _ => Stencil { start: i - 2, w: D1_CENTRAL, len: 5 },
    }
}

/// Second-derivative stencil at node `i` (weights in units of 1/(12h²)).
pub fn d2_stencil(i: usize, n: usize) -> Stencil {
    assert!(n >= MIN_POINTS && i < n);
    match i {
        0 => Stencil { start: 0, w: D2_LEFT0, len: 6 },
        1 => Stencil { start: 0, w: D2_LEFT1, len: 6 },
        _ if i == n - 1 => Stencil { start: n - 6, w: mirror(&D2_LEFT0, 6, 1.0), len: 6 },
        _ if i == n - 2 => Stencil { start: n - 6, w: mirror(&D2_LEFT1, 6, 1.0), len: 6 },
        _ => Stencil { start: i - 2, w: D2_CENTRAL, len: 5 },
    }
}

fn apply(s: &Stencil, f: &[f64], scale: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..s.len {
        acc += s.w[j] * f[s.start + j];
    }
    acc * scale
}

/// First and second derivatives of uniformly spaced samples.
pub fn derivatives(f: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let s1 = 1.0 / (12.0 * h);
    let s2 = 1.0 / (12.0 * h * h);
    let d1 = (0..n).map(|i| apply(&d1_stencil(i, n), f, s1)).collect();
    let d2 = (0..n).map(|i| apply(&d2_stencil(i, n), f, s2)).collect();
    (d1, d2)
}

/// Discrete `c2 w'' + c1 w' + c0 w` using the stencils above.
pub fn apply_second_order(c2: &[f64], c1: &[f64], c0: &[f64], w: &[f64], h: f64) -> Vec<f64> {
    let (d1, d2) = derivatives(w, h);
    (0..w.len()).map(|i| c2[i] * d2[i] + c1[i] * d1[i] + c0[i] * w[i]).collect()
}
