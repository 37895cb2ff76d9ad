//! Harmonic-oscillator eigenbases of arbitrary length.
//!
//! Lengths are dimensionless (units of 1/K). The `m`-th eigenstate of length
//! `xi` has wavefunction `h_m(x / xi) / sqrt(xi)`, where `h_m` is the
//! normalized Hermite function.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest quadrature order supported before the Gaussian factor underflows.
const MAX_QUADRATURE_NODES: usize = 600;

/// Normalized Hermite functions `h_0(y) ..= h_n_max(y)` at a single point.
pub fn hermite_functions(n_max: usize, y: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp());
    if n_max >= 1 {
        h.push(std::f64::consts::SQRT_2 * y * h[0]);
    }
    for k in 1..n_max {
        let next = (2.0 / (k + 1) as f64).sqrt() * y * h[k]
            - (k as f64 / (k + 1) as f64).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Gauss–Hermite rule in the Hermite-function form.
///
/// Returns nodes `y_i` and weights `W_i` such that
/// `∫ f(y) dy ≈ Σ W_i f(y_i)`, exact whenever `f = e^{-y²} · poly` of degree
/// `≤ 2n - 1`. The weights already contain the `e^{y²}` factor.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_QUADRATURE_NODES {
        return Err(Error::config(format!(
            "Gauss–Hermite order must be in 1..={MAX_QUADRATURE_NODES}, got {n}"
        )));
    }
    // Golub–Welsch: eigenvalues of the Jacobi matrix of the Hermite recurrence.
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    // Newton polish on h_n, whose roots are the nodes.
    for y in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_functions(n, *y);
            // h_n'(y) = sqrt(2n) h_{n-1}(y) - y h_n(y)
            let deriv = (2.0 * n as f64).sqrt() * h[n - 1] - *y * h[n];
            if deriv == 0.0 {
                break;
            }
            let step = h[n] / deriv;
            *y -= step;
            if step.abs() < 1e-15 * y.abs().max(1.0) {
                break;
            }
        }
    }
    let weights = nodes
        .iter()
        .map(|&y| {
            let h = hermite_functions(n - 1, y);
            1.0 / (n as f64 * h[n - 1] * h[n - 1])
        })
        .collect();
    Ok((nodes, weights))
}

/// Overlap matrix `O[j][k] = ⟨j, xi | k, xi_prime⟩` for `j < rows`, `k < cols`.
///
/// Expressing the lowering operator of the primed basis through the ladder
/// operators of the unprimed one gives `c' = μ c + ν c†` with
/// `μ = (r + 1/r)/2`, `ν = (r − 1/r)/2`, `r = xi/xi'`. Taking `⟨j|c'|k'⟩` two
/// ways yields the row recurrence
///
/// `μ √(j+1) O[j+1][k] = √k O[j][k−1] − ν √j O[j−1][k]`,
///
/// which only ever divides by `μ ≥ 1`. Accurate to ~1e−11 for length ratios
/// up to ~3 and a few dozen levels; it degrades beyond ~80 levels at large ratios.
pub fn ho_overlap_matrix(rows: usize, cols: usize, xi: f64, xi_prime: f64) -> Result<DMatrix<f64>> {
    if !(xi > 0.0 && xi_prime > 0.0 && xi.is_finite() && xi_prime.is_finite()) {
        return Err(Error::config(format!(
            "oscillator lengths must be positive, got {xi} and {xi_prime}"
        )));
    }
    let mut out = DMatrix::zeros(rows, cols);
    if rows == 0 || cols == 0 {
        return Ok(out);
    }
    let r = xi / xi_prime;
    let mu = 0.5 * (r + 1.0 / r);
    let nu = 0.5 * (r - 1.0 / r);

    // ground state of the unprimed basis expanded in the primed one
    out[(0, 0)] = mu.powf(-0.5);
    for k in (2..cols).step_by(2) {
        out[(0, k)] = (nu / mu) * ((k - 1) as f64 / k as f64).sqrt() * out[(0, k - 2)];
    }
    for j in 0..rows - 1 {
        let denom = mu * ((j + 1) as f64).sqrt();
        for k in 0..cols {
            if (j + 1 + k) % 2 == 1 {
                continue;
            }
            let from_left = if k > 0 { (k as f64).sqrt() * out[(j, k - 1)] } else { 0.0 };
            let from_above = if j > 0 { nu * (j as f64).sqrt() * out[(j - 1, k)] } else { 0.0 };
            out[(j + 1, k)] = (from_left - from_above) / denom;
        }
    }
    Ok(out)
}

/// Overlap `⟨m, xi | m_prime, xi_prime⟩` of two real oscillator eigenfunctions.
pub fn ho_overlap(m: usize, xi: f64, m_prime: usize, xi_prime: f64) -> Result<f64> {
    if (m + m_prime) % 2 == 1 {
        // Still validate lengths so bad input is never silently accepted.
        ho_overlap_matrix(1, 1, xi, xi_prime)?;
        return Ok(0.0);
    }
    Ok(ho_overlap_matrix(m + 1, m_prime + 1, xi, xi_prime)?[(m, m_prime)])
}

/// A truncated oscillator eigenbasis of length `xi`, possibly restricted to a
/// subset of levels (e.g. even parity).
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorBasis {
    xi: f64,
    levels: Vec<usize>,
}

impl OscillatorBasis {
    /// The first `count` levels `0, 1, …, count − 1`.
    pub fn full(count: usize, xi: f64) -> Result<Self> {
        Self::new((0..count).collect(), xi)
    }

    /// The first `count` even levels `0, 2, …, 2(count − 1)`.
    pub fn even(count: usize, xi: f64) -> Result<Self> {
        Self::new((0..count).map(|k| 2 * k).collect(), xi)
    }

    pub fn new(levels: Vec<usize>, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::config(format!("oscillator length must be positive, got {xi}")));
        }
        if levels.is_empty() {
            return Err(Error::config("oscillator basis needs at least one level"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("oscillator levels must be strictly increasing"));
        }
        Ok(Self { xi, levels })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn max_level(&self) -> usize {
        *self.levels.last().expect("non-empty basis")
    }

    /// Position of oscillator level `m` inside this basis.
    pub fn position_of(&self, m: usize) -> Option<usize> {
        self.levels.binary_search(&m).ok()
    }

    /// Exact matrix of `x²` (no truncation artefacts at the top level).
    pub fn x_squared(&self) -> DMatrix<f64> {
        let s = self.xi * self.xi;
        self.quadratic(|m| s * (m as f64 + 0.5), |m| 0.5 * s * (((m + 1) * (m + 2)) as f64).sqrt())
    }

    /// Exact matrix of `p²` in units where `[x, p] = i`.
    pub fn p_squared(&self) -> DMatrix<f64> {
        let s = 1.0 / (self.xi * self.xi);
        self.quadratic(|m| s * (m as f64 + 0.5), |m| -0.5 * s * (((m + 1) * (m + 2)) as f64).sqrt())
    }

    fn quadratic(&self, diag: impl Fn(usize) -> f64, off2: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            let (a, b) = (self.levels[i], self.levels[j]);
            if a == b {
                diag(a)
            } else if b == a + 2 {
                off2(a)
            } else if a == b + 2 {
                off2(b)
            } else {
                0.0
            }
        })
    }

    /// Diagonal parity operator `(−1)^m`.
    pub fn parity(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.levels.iter().map(|&m| if m % 2 == 0 { 1.0 } else { -1.0 }),
        ))
    }

    /// Matrix elements `⟨j|f(x)|k⟩` by Gauss–Hermite quadrature with
    /// `nodes_per_level` nodes per level of the highest retained index.
    pub fn potential_matrix(&self, nodes_per_level: usize, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
        let n_nodes = (nodes_per_level * (self.max_level() + 1)).clamp(1, MAX_QUADRATURE_NODES);
        let (nodes, weights) = gauss_hermite(n_nodes)?;
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (&y, &w) in nodes.iter().zip(&weights) {
            let h = hermite_functions(self.max_level(), y);
            let fw = w * f(self.xi * y);
            for i in 0..d {
                let hi = h[self.levels[i]] * fw;
                for j in i..d {
                    out[(i, j)] += hi * h[self.levels[j]];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        Ok(out)
    }

    /// Coefficients of `|m, xi_target⟩` in this basis and the weight that
    /// falls outside it (`1 − Σ|c|²`).
    pub fn embed(&self, m: usize, xi_target: f64) -> Result<(Vec<f64>, f64)> {
        let overlaps = ho_overlap_matrix(self.max_level() + 1, m + 1, self.xi, xi_target)?;
        let coeffs: Vec<f64> = self.levels.iter().map(|&k| overlaps[(k, m)]).collect();
        let kept: f64 = coeffs.iter().map(|c| c * c).sum();
        Ok((coeffs, (1.0 - kept).max(0.0)))
    }
}
