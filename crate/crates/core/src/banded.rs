//! Banded LU with partial pivoting and a uniform-grid two-point BVP assembler.

use crate::error::{Error, Result};
use crate::fd;

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage keeps `kl`
/// extra super-diagonals for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = rhs`, leaving `self` untouched.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-14;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..=last {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularSystem { row: k, pivot: best });
            }
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (sk, sp) = (a.slot(k, j), a.slot(p, j));
                    a.data.swap(sk, sp);
                }
                b.swap(k, p);
            }
            let pivot = a.get(k, k);
            for i in k + 1..=last {
                let factor = a.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in k..=jmax {
                    let akj = a.get(k, j);
                    let s = a.slot(i, j);
                    a.data[s] -= factor * akj;
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let jmax = (k + reach).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=jmax {
                acc -= a.get(k, j) * x[j];
            }
            x[k] = acc / a.get(k, k);
        }
        Ok(x)
    }
}

/// Which end of the grid a boundary condition sits on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum End {
    Left,
    Right,
}

/// A boundary condition for the second-order problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Value(End, f64),
    Slope(End, f64),
}

/// Solves `c2 w'' + c1 w' + c0 w = rhs` on a uniform grid with two boundary
/// conditions, using the fourth-order stencils of [`fd`]. The interior rows are
/// exactly the rows of [`fd::apply_second_order`], so the discrete operator
/// applied to the solution reproduces `rhs` at interior nodes.
pub fn solve_two_point(
    c2: &[f64],
    c1: &[f64],
    c0: &[f64],
    rhs: &[f64],
    h: f64,
    conditions: [Condition; 2],
) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n < fd::MIN_POINTS || c2.len() != n || c1.len() != n || c0.len() != n {
        return Err(Error::GridMismatch(format!("bvp needs matching grids of at least {} points", fd::MIN_POINTS)));
    }
    let left = conditions.iter().filter(|c| end_of(c) == End::Left).count();
    // Equation for node i lives in row i + shift; boundary rows fill the gaps.
    let (first_eq, shift): (usize, isize) = match left {
        1 => (1, 0),
        2 => (1, 1),
        _ => (1, -1),
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = vec![0.0; n];
    let s1 = 1.0 / (12.0 * h);
    let s2 = 1.0 / (12.0 * h * h);
    for i in first_eq..n - 1 {
        let row = (i as isize + shift) as usize;
        let mut entries = Vec::with_capacity(7);
        let st2 = fd::d2_stencil(i, n);
        for j in 0..st2.len {
            entries.push((st2.start + j, c2[i] * st2.w[j] * s2));
        }
        let st1 = fd::d1_stencil(i, n);
        for j in 0..st1.len {
            entries.push((st1.start + j, c1[i] * st1.w[j] * s1));
        }
        entries.push((i, c0[i]));
        rows[row] = entries;
        b[row] = rhs[i];
    }
    let mut free_rows: Vec<usize> = (0..n).filter(|r| rows[*r].is_empty()).collect();
    free_rows.sort_unstable();
    let mut conds: Vec<Condition> = conditions.to_vec();
    conds.sort_by_key(|c| match end_of(c) {
        End::Left => 0,
        End::Right => 1,
    });
    for (row, cond) in free_rows.into_iter().zip(conds) {
        let (entries, value) = condition_row(cond, n, s1);
        rows[row] = entries;
        b[row] = value;
    }
    let mut kl = 0;
    let mut ku = 0;
    for (i, r) in rows.iter().enumerate() {
        for &(j, _) in r {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
    }
    let mut m = BandedMatrix::zeros(n, kl, ku);
    for (i, r) in rows.iter().enumerate() {
        for &(j, v) in r {
            m.add(i, j, v);
        }
    }
    m.solve(&b)
}

fn end_of(c: &Condition) -> End {
    match *c {
        Condition::Value(e, _) | Condition::Slope(e, _) => e,
    }
}

fn condition_row(c: Condition, n: usize, s1: f64) -> (Vec<(usize, f64)>, f64) {
    match c {
        Condition::Value(End::Left, v) => (vec![(0, 1.0)], v),
        Condition::Value(End::Right, v) => (vec![(n - 1, 1.0)], v),
        Condition::Slope(end, v) => {
            let i = if end == End::Left { 0 } else { n - 1 };
            let st = fd::d1_stencil(i, n);
            ((0..st.len).map(|j| (st.start + j, st.w[j] * s1)).collect(), v)
        }
    }
}
