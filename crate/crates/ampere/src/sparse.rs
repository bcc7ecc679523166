//! Compressed sparse rows with preconditioned Krylov solvers.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Row-by-row builder; duplicate columns within a row are summed.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder { n, rows: vec![Vec::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(self) -> Csr {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in self.rows {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let c = r[k].0;
                let mut s = 0.0;
                while k < r.len() && r[k].0 == c {
                    s += r[k].1;
                    k += 1;
                }
                cols.push(c);
                vals.push(s);
            }
            row_ptr.push(cols.len());
        }
        Csr { n: self.n, row_ptr, cols, vals }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual norm ‖b − Ax‖₂.
    pub residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Csr {
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.mul(x, &mut ax);
        norm2(&ax.iter().zip(b).map(|(a, bb)| bb - a).collect::<Vec<_>>())
    }

    /// Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.
    pub fn cg(&self, b: &[f64], x: &mut [f64], rel_tol: f64, abs_tol: f64, max_iter: usize) -> Result<SolveStats> {
        let n = self.n;
        let d: Vec<f64> = self.diag().iter().map(|&v| if v != 0.0 { 1.0 / v } else { 1.0 }).collect();
        let mut r = vec![0.0; n];
        self.mul(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let target = rel_tol * norm2(b) + abs_tol;
        let mut z: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dotv(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 0..max_iter {
            let rn = norm2(&r);
            if rn <= target {
                return Ok(SolveStats { iterations: it, residual: rn });
            }
            self.mul(&p, &mut ap);
            let pap = dotv(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NoConvergence { iterations: it, residual: rn });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * d[i];
            }
            let rz_new = dotv(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let rn = norm2(&r);
        if rn <= target {
            Ok(SolveStats { iterations: max_iter, residual: rn })
        } else {
            Err(Error::NoConvergence { iterations: max_iter, residual: rn })
        }
    }

    /// Restarted GMRES with right ILU(0) preconditioning.
    pub fn gmres(
        &self,
        b: &[f64],
        x: &mut [f64],
        rel_tol: f64,
        abs_tol: f64,
        max_iter: usize,
        restart: usize,
    ) -> Result<SolveStats> {
        let n = self.n;
        let ilu = Ilu0::new(self);
        let target = rel_tol * norm2(b) + abs_tol;
        let m = restart.max(1);
        let mut total = 0;
        let mut r = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        loop {
            self.mul(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            let beta = norm2(&r);
            if beta <= target {
                return Ok(SolveStats { iterations: total, residual: beta });
            }
            if total >= max_iter {
                return Err(Error::NoConvergence { iterations: total, residual: beta });
            }
            let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
            v.push(r.iter().map(|a| a / beta).collect());
            let mut h = vec![vec![0.0; m]; m + 1];
            let mut cs = vec![0.0; m];
            let mut sn = vec![0.0; m];
            let mut g = vec![0.0; m + 1];
            g[0] = beta;
            let mut k_used = 0;
            for k in 0..m {
                ilu.solve(&v[k], &mut tmp);
                self.mul(&tmp, &mut w);
                for j in 0..=k {
                    h[j][k] = dotv(&w, &v[j]);
                    for i in 0..n {
                        w[i] -= h[j][k] * v[j][i];
                    }
                }
                // second orthogonalization pass for stability
                for j in 0..=k {
                    let c = dotv(&w, &v[j]);
                    h[j][k] += c;
                    for i in 0..n {
                        w[i] -= c * v[j][i];
                    }
                }
                h[k + 1][k] = norm2(&w);
                for j in 0..k {
                    let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                    h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                    h[j][k] = t;
                }
                let den = h[k][k].hypot(h[k + 1][k]);
                if den == 0.0 {
                    k_used = k;
                    break;
                }
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
                let hk1 = h[k + 1][k];
                h[k][k] = cs[k] * h[k][k] + sn[k] * hk1;
                h[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
                k_used = k + 1;
                total += 1;
                let next: Vec<f64> = {
                    let nrm = norm2(&w);
                    if nrm > 0.0 {
                        w.iter().map(|a| a / nrm).collect()
                    } else {
                        vec![0.0; n]
                    }
                };
                v.push(next);
                if g[k + 1].abs() <= 0.5 * target || total >= max_iter {
                    break;
                }
            }
            // back substitution
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for j in i + 1..k_used {
                    s -= h[i][j] * y[j];
                }
                y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
            }
            let mut upd = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                for i in 0..n {
                    upd[i] += yj * v[j][i];
                }
            }
            ilu.solve(&upd, &mut tmp);
            for i in 0..n {
                x[i] += tmp[i];
            }
            if k_used == 0 {
                let res = self.residual(x, b);
                if res <= target {
                    return Ok(SolveStats { iterations: total, residual: res });
                }
                return Err(Error::NoConvergence { iterations: total, residual: res });
            }
        }
    }
}

/// Incomplete LU factorization with the sparsity of the matrix.
struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Ilu0 {
    fn new(a: &Csr) -> Self {
        let n = a.n;
        let mut vals = a.vals.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[k] == i {
                    diag_pos[i] = k;
                }
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                pos[a.cols[k]] = k;
            }
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                if j >= i {
                    break;
                }
                let dj = diag_pos[j];
                if dj == usize::MAX || vals[dj] == 0.0 {
                    continue;
                }
                let l = vals[k] / vals[dj];
                vals[k] = l;
                for kk in dj + 1..a.row_ptr[j + 1] {
                    let c = a.cols[kk];
                    let p = pos[c];
                    if p != usize::MAX && p >= a.row_ptr[i] && p < a.row_ptr[i + 1] {
                        vals[p] -= l * vals[kk];
                    }
                }
            }
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                pos[a.cols[k]] = usize::MAX;
            }
        }
        Ilu0 { n, row_ptr: a.row_ptr.clone(), cols: a.cols.clone(), vals }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j >= i {
                    break;
                }
                s -= self.vals[k] * x[j];
            }
            x[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            let mut d = 1.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j > i {
                    s -= self.vals[k] * x[j];
                } else if j == i {
                    d = self.vals[k];
                }
            }
            x[i] = if d != 0.0 { s / d } else { s };
        }
    }
}
