//! Monte-Carlo wave-function (quantum-jump) trajectories and seeded ensembles.
//!
//! A trajectory evolves the unnormalized state under the non-Hermitian
//! generator `H − iΓ` until its squared norm falls below a uniform random
//! threshold; the crossing time is located by bisection on the dense output,
//! the jump operator is applied and the state renormalized.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra_sparse::CsrMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CVector, DensityMatrix, Operator, ProductDims, QuantumState, SpaceTag, I};
use crate::integrate::{check_grid, Dopri5, Tolerances};

/// Squared norms below this between grid points abort the trajectory.
pub const NORM_FLOOR: f64 = 1e-14;
/// Jump-time localization accuracy as a fraction of the step.
pub const JUMP_BISECTION_TOL: f64 = 1e-6;

const CHUNK: usize = 64;

#[derive(Clone)]
enum ObservableKind {
    Operator(Arc<CsrMatrix<C64>>),
    Function(Arc<dyn Fn(&CVector) -> f64 + Send + Sync>),
}

/// A real-valued quantity recorded on the normalized state at grid times.
#[derive(Clone)]
pub struct Observable {
    name: String,
    kind: ObservableKind,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Observable {
    /// `Re ⟨ψ|op|ψ⟩`.
    pub fn operator(name: impl Into<String>, op: &Operator) -> Self {
        Self { name: name.into(), kind: ObservableKind::Operator(Arc::new(op.to_csr())) }
    }

    pub fn function(name: impl Into<String>, f: impl Fn(&CVector) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), kind: ObservableKind::Function(Arc::new(f)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, psi: &CVector) -> f64 {
        match &self.kind {
            ObservableKind::Operator(op) => {
                let mut out = C64::new(0.0, 0.0);
                for (row, lane) in op.row_iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (&c, v) in lane.col_indices().iter().zip(lane.values()) {
                        acc += v * psi[c];
                    }
                    out += psi[row].conj() * acc;
                }
                out.re
            }
            ObservableKind::Function(f) => f(psi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryOptions {
    pub tolerances: Tolerances,
    /// Keep the normalized state at every grid time.
    pub keep_states: bool,
    /// Keep the squared norm after every accepted step, one segment per
    /// no-jump interval.
    pub record_norm: bool,
}


#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub times: Vec<f64>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub jump_times: Vec<f64>,
    pub final_state: QuantumState,
    pub states: Option<Vec<CVector>>,
    pub norm_segments: Option<Vec<Vec<f64>>>,
}

fn spmv(op: &CsrMatrix<C64>, x: &CMatrix, out: &mut CMatrix, scale: C64) {
    for (row, lane) in op.row_iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (&c, v) in lane.col_indices().iter().zip(lane.values()) {
            acc += v * x[c];
        }
        out[row] = scale * acc;
    }
}

fn squared_norm(y: &CMatrix) -> f64 {
    y.iter().map(|z| z.norm_sqr()).sum()
}

fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            return r;
        }
    }
}

fn check_operands(generator: &Operator, jump: &Operator, psi0: &QuantumState) -> Result<()> {
    if generator.space() != psi0.space() || jump.space() != psi0.space() {
        return Err(Error::usage("generator, jump operator and state live on different spaces"));
    }
    if generator.dim() != psi0.dim() || jump.dim() != psi0.dim() {
        return Err(Error::usage(format!(
            "dimension mismatch: generator {}, jump {}, state {}",
            generator.dim(),
            jump.dim(),
            psi0.dim()
        )));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::usage(format!("initial state has norm {}", psi0.norm())));
    }
    Ok(())
}

/// Runs a single quantum-jump trajectory.
///
/// `generator` is the non-Hermitian `H − iΓ`; `jump` the (single) collapse
/// operator, already carrying its rate.
pub fn evolve_trajectory(
    generator: &Operator,
    jump: &Operator,
    psi0: &QuantumState,
    times: &[f64],
    seed: u64,
    observables: &[Observable],
    options: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    check_operands(generator, jump, psi0)?;
    check_grid(times)?;
    let gen = generator.to_csr();
    let jump_csr = jump.to_csr();
    evolve_csr(&gen, &jump_csr, psi0, times, seed, observables, options)
}

fn evolve_csr(
    gen: &CsrMatrix<C64>,
    jump: &CsrMatrix<C64>,
    psi0: &QuantumState,
    times: &[f64],
    seed: u64,
    observables: &[Observable],
    options: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let dim = psi0.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rhs = |_t: f64, y: &CMatrix, dy: &mut CMatrix| spmv(gen, y, dy, -I);
    let mut solver = Dopri5::new((dim, 1), options.tolerances);
    let mut y = CMatrix::from_column_slice(dim, 1, psi0.amplitudes().as_slice());
    let mut t = times[0];
    let mut threshold = draw_threshold(&mut rng);

    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut states = options.keep_states.then(|| Vec::with_capacity(times.len()));
    let mut norms = options.record_norm.then(|| vec![vec![1.0]]);
    let mut jump_times = Vec::new();
    let mut scratch = CMatrix::zeros(dim, 1);

    let record = |y: &CMatrix, series: &mut Vec<Vec<f64>>, states: &mut Option<Vec<CVector>>| {
        let nrm = squared_norm(y).sqrt();
        let psi = CVector::from_iterator(dim, y.iter().map(|z| z / nrm));
        for (s, obs) in series.iter_mut().zip(observables) {
            s.push(obs.evaluate(&psi));
        }
        if let Some(states) = states {
            states.push(psi);
        }
    };
    record(&y, &mut series, &mut states);

    for &tg in &times[1..] {
        while t < tg {
            let step = solver.step(&mut rhs, &mut t, &mut y, tg)?;
            let n2 = squared_norm(&y);
            if n2 > threshold {
                if n2 < NORM_FLOOR {
                    return Err(Error::Integration(format!("norm underflow ({n2:e}) at t = {t}")));
                }
                if let Some(norms) = norms.as_mut() {
                    norms.last_mut().unwrap().push(n2);
                }
                continue;
            }
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            while hi - lo > JUMP_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if squared_norm(&solver.dense_output(mid, &y)?) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let pre_jump = if hi < 1.0 { solver.dense_output(hi, &y)? } else { y.clone() };
            if hi < 1.0 {
                t = step.t_start + hi * step.h;
            }
            spmv(jump, &pre_jump, &mut scratch, C64::new(1.0, 0.0));
            let jn = squared_norm(&scratch).sqrt();
            if !(jn > 0.0) || jn * jn < NORM_FLOOR * squared_norm(&pre_jump) {
                return Err(Error::Integration(format!("jump annihilated the state at t = {t}")));
            }
            y.copy_from(&scratch);
            y /= C64::from(jn);
            jump_times.push(t);
            solver.reset();
            threshold = draw_threshold(&mut rng);
            if let Some(norms) = norms.as_mut() {
                norms.push(vec![1.0]);
            }
        }
        record(&y, &mut series, &mut states);
    }

    let nrm = squared_norm(&y).sqrt();
    let final_amps = CVector::from_iterator(dim, y.iter().map(|z| z / nrm));
    Ok(TrajectoryRecord {
        seed,
        times: times.to_vec(),
        observables: observables.iter().map(|o| o.name.clone()).zip(series).collect(),
        jump_times,
        final_state: psi0.with_amplitudes(final_amps)?,
        states,
        norm_segments: norms,
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in an ensemble with the given master seed.
pub fn trajectory_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(index as u64))
}

/// Everything an ensemble needs besides its size and seed.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub generator: Operator,
    pub jump: Operator,
    pub psi0: QuantumState,
    pub times: Vec<f64>,
    pub options: TrajectoryOptions,
    /// Accumulate the ensemble-averaged density matrix at every grid time.
    pub average_density: bool,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub master_seed: u64,
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub averaged_density: Option<Vec<DensityMatrix>>,
    pub jump_counts: Vec<usize>,
}

impl EnsembleResult {
    pub fn series(&self, name: &str) -> Option<(&[f64], &[f64])> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((&self.mean[i], &self.stderr[i]))
    }
}

/// Running mean and sum of squared deviations, merged pairwise.
#[derive(Debug, Clone)]
struct Moments {
    n: usize,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl Moments {
    fn single(series: Vec<Vec<f64>>) -> Self {
        let m2 = series.iter().map(|s| vec![0.0; s.len()]).collect();
        Self { n: 1, mean: series, m2 }
    }

    fn merge(self, other: Self) -> Self {
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut mean = self.mean;
        let mut m2 = self.m2;
        for k in 0..mean.len() {
            for j in 0..mean[k].len() {
                let delta = other.mean[k][j] - mean[k][j];
                mean[k][j] += delta * nb / n;
                m2[k][j] += other.m2[k][j] + delta * delta * na * nb / n;
            }
        }
        Self { n: self.n + other.n, mean, m2 }
    }

    fn pairwise(mut items: Vec<Moments>) -> Option<Moments> {
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut it = items.into_iter();
            while let Some(a) = it.next() {
                next.push(match it.next() {
                    Some(b) => a.merge(b),
                    None => a,
                });
            }
            items = next;
        }
        items.pop()
    }
}

/// Runs `n_traj` trajectories in parallel and aggregates them.
///
/// Trajectory `i` uses [`trajectory_seed`]`(master_seed, i)`. Trajectories are
/// processed in fixed chunks and reduced in index order, so the result does
/// not depend on the thread count.
pub fn run_ensemble(
    config: &EnsembleConfig,
    n_traj: usize,
    master_seed: u64,
    observables: &[Observable],
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::config("n_traj must be at least 1"));
    }
    check_operands(&config.generator, &config.jump, &config.psi0)?;
    check_grid(&config.times)?;
    let gen = config.generator.to_csr();
    let jump = config.jump.to_csr();
    let dim = config.psi0.dim();
    let n_times = config.times.len();
    let mut options = config.options;
    options.keep_states = config.average_density;

    let mut moments: Option<Moments> = None;
    let mut density: Option<Vec<CMatrix>> =
        config.average_density.then(|| vec![CMatrix::zeros(dim, dim); n_times]);
    let mut jump_counts = Vec::with_capacity(n_traj);

    for start in (0..n_traj).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_traj);
        let results: Vec<Result<TrajectoryRecord>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let seed = trajectory_seed(master_seed, i);
                evolve_csr(&gen, &jump, &config.psi0, &config.times, seed, observables, &options)
                    .map_err(|e| Error::Trajectory { index: i, source: Box::new(e) })
            })
            .collect();
        let mut records = Vec::with_capacity(results.len());
        for r in results {
            records.push(r?);
        }
        if let Some(density) = density.as_mut() {
            let cols = records.len();
            density.par_iter_mut().enumerate().for_each(|(j, acc)| {
                let mut psi = CMatrix::zeros(dim, cols);
                for (c, rec) in records.iter().enumerate() {
                    psi.set_column(c, &rec.states.as_ref().unwrap()[j]);
                }
                acc.gemm(C64::new(1.0, 0.0), &psi, &psi.adjoint(), C64::new(1.0, 0.0));
            });
        }
        let chunk_moments: Vec<Moments> = records
            .into_iter()
            .map(|mut rec| {
                jump_counts.push(rec.jump_times.len());
                Moments::single(observables.iter().map(|o| rec.observables.remove(&o.name).unwrap()).collect())
            })
            .collect();
        let chunk = Moments::pairwise(chunk_moments).expect("chunk is non-empty");
        moments = Some(match moments {
            None => chunk,
            Some(m) => m.merge(chunk),
        });
    }

    let moments = moments.expect("n_traj >= 1");
    let n = moments.n as f64;
    let stderr = moments
        .m2
        .iter()
        .map(|row| {
            row.iter()
                .map(|&m2| if moments.n > 1 { (m2 / (n - 1.0)).max(0.0).sqrt() / n.sqrt() } else { 0.0 })
                .collect()
        })
        .collect();

    let averaged_density = match density {
        None => None,
        Some(sums) => {
            let dims: Option<ProductDims> = config.psi0.dims();
            let space: SpaceTag = config.psi0.space();
            let mut out = Vec::with_capacity(sums.len());
            for s in sums {
                let m = s / C64::from(n);
                let m = (&m + m.adjoint()) * C64::from(0.5);
                out.push(DensityMatrix::unchecked(m, space, dims)?);
            }
            Some(out)
        }
    };

    Ok(EnsembleResult {
        n_traj,
        master_seed,
        times: config.times.clone(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        mean: moments.mean,
        stderr,
        averaged_density,
        jump_counts,
    })
}
