//! Linear solves for the Newton steps: cyclic tridiagonal in 1D, BiCGSTAB in 2D.

/// Solves `lower_i x_{i−1} + diag_i x_i + upper_i x_{i+1} = rhs_i` with periodic wrap.
///
/// Requires strict diagonal dominance; uses the Sherman–Morrison correction of the
/// corner entries.
pub fn cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = upper[n - 1]; // row n−1, column 0
    let beta = lower[0]; // row 0, column n−1
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(lower, &b, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &b, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// A periodic stencil operator: `diag_i x_i + Σ_k off[k]_i x_{nbr[k](i)}`.
pub struct Stencil<'a> {
    pub diag: &'a [f64],
    pub off: &'a [Vec<f64>],
    pub nbr: &'a [Vec<usize>],
}

impl Stencil<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let mut s = self.diag[i] * x[i];
            for k in 0..self.off.len() {
                s += self.off[k][i] * x[self.nbr[k][i]];
            }
            out[i] = s;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Jacobi-preconditioned BiCGSTAB; stops at `‖r‖∞ ≤ rtol·‖b‖∞`.
pub fn bicgstab(a: &Stencil<'_>, b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let inv: Vec<f64> = a.diag.iter().map(|d| 1.0 / d).collect();
    let mut x: Vec<f64> = b.iter().zip(&inv).map(|(bi, di)| bi * di).collect();
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let target = rtol * norm_inf(b).max(f64::MIN_POSITIVE);
    if norm_inf(&r) <= target {
        return x;
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv[i] * p[i];
        }
        a.apply(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm_inf(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return x;
        }
        for i in 0..n {
            z[i] = inv[i] * s[i];
        }
        a.apply(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm_inf(&r) <= target || omega == 0.0 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_solve_matches_product() {
        let n = 17;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 1.5 + 0.1 * (i % 3) as f64).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| lower[i] * x_true[(i + n - 1) % n] + diag[i] * x_true[i] + upper[i] * x_true[(i + 1) % n])
            .collect();
        let x = cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_periodic_laplacian_shift() {
        let n = 8;
        let len = n * n;
        let diag = vec![4.5; len];
        let off = vec![vec![-1.0; len]; 4];
        let nbr: Vec<Vec<usize>> = (0..4)
            .map(|k| {
                (0..len)
                    .map(|idx| {
                        let (i, j) = (idx % n, idx / n);
                        match k {
                            0 => (i + 1) % n + n * j,
                            1 => (i + n - 1) % n + n * j,
                            2 => i + n * ((j + 1) % n),
                            _ => i + n * ((j + n - 1) % n),
                        }
                    })
                    .collect()
            })
            .collect();
        let a = Stencil { diag: &diag, off: &off, nbr: &nbr };
        let x_true: Vec<f64> = (0..len).map(|i| (i as f64).cos()).collect();
        let mut b = vec![0.0; len];
        a.apply(&x_true, &mut b);
        let x = bicgstab(&a, &b, 1e-13, 500);
        for i in 0..len {
            assert!((x[i] - x_true[i]).abs() < 1e-10);
        }
    }
}
