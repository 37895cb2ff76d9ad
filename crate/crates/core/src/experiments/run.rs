//! Dispatch of a [`RunConfig`] to the physics modules and assembly of the
//! results into tables, grids and basis exports.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{coherent_state, fock_ops, tensor, CVector, Operator, QuantumState, SpaceTag};
use crate::liouville::Superoperator;
use crate::mcwf::{run_ensemble, EnsembleConfig, Observable, TrajectoryOptions};
use crate::model::{
    build_effective_hamiltonian, build_hamiltonian, build_liouvillean_jump, non_hermitian_generator, particle_basis,
    photon_number_operator, reference_length, resonance_detuning_about, ModelOptions, SystemParams,
};
use crate::observables::{
    axis, coherent_fit_fidelity, field_reduced, negativity, photon_stats, squeezing, wigner, WignerGrid,
};
use crate::subspace::{
    branch_steady_spectrum, build_coherent_subspace, build_effective_subspace, default_m_list, BasisExport,
    SubspaceBasis,
};

use super::config::{ExperimentKind, FieldState, InitialState, LengthSpec, ObservableKind, Resonance, RunConfig};
use super::output::{
    wigner_to_text, write_atomic, ConvergenceReport, FileList, Manifest, ScalesReport, Table,
};

/// Weight a constructed initial state may lose to either cutoff.
pub const INITIAL_TAIL_TOL: f64 = 1e-6;

const SELF_CONSISTENT_TOL: f64 = 1e-9;
const SELF_CONSISTENT_MAX_ITER: usize = 500;

/// Everything a run computes, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table: Table,
    pub columns: BTreeMap<String, String>,
    /// `(label, grid)`, one per branch.
    pub wigner: Vec<(String, WignerGrid)>,
    /// `(label, export)`
    pub bases: Vec<(String, BasisExport)>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub scales: ScalesReport,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })
}

fn eps_label(eps: f64) -> String {
    format!("{eps:e}")
}

/// Initial product state with the field tail and particle embedding loss.
pub fn initial_state(
    init: &InitialState,
    params: &SystemParams,
    model: &ModelOptions,
) -> Result<(QuantumState, f64, f64)> {
    let n_fock = model.trunc.n_fock;
    let (field, tail) = match init.field {
        FieldState::Vacuum => (QuantumState::basis(n_fock, 0, SpaceTag::Field)?, 0.0),
        FieldState::Fock { n } => {
            if n >= n_fock {
                return Err(Error::Truncation(format!("Fock state |{n}⟩ needs n_fock > {n}, have {n_fock}")));
            }
            (QuantumState::basis(n_fock, n, SpaceTag::Field)?, 0.0)
        }
        FieldState::Coherent { re, im } => coherent_state(n_fock, C64::new(re, im))?,
    };
    if tail >= INITIAL_TAIL_TOL {
        return Err(Error::Truncation(format!(
            "initial coherent state loses {tail:.2e} beyond n_fock = {n_fock}; increase n_fock"
        )));
    }

    let basis = particle_basis(params, model)?;
    let xi = match init.particle.xi {
        LengthSpec::Photons(n) => params.scales().xi_of(n),
        LengthSpec::Value(v) => v,
    };
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::config(format!("initial particle length is degenerate ({xi})")));
    }
    let mut amps = CVector::zeros(basis.dim());
    for c in &init.particle.components {
        let (coeffs, _) = basis.embed(c.m, xi)?;
        let w = C64::new(c.re, c.im);
        for (a, k) in amps.iter_mut().zip(coeffs) {
            *a += w * k;
        }
    }
    let norm_before: f64 = init.particle.components.iter().map(|c| c.re * c.re + c.im * c.im).sum();
    if !(norm_before > 0.0) {
        return Err(Error::config("initial particle superposition has zero weight"));
    }
    // Loss relative to the same superposition in an untruncated basis; the
    // |m, ξ⟩ are orthonormal for a common ξ.
    let residual = (1.0 - amps.norm_squared() / norm_before).max(0.0);
    if residual >= INITIAL_TAIL_TOL || amps.norm() == 0.0 {
        return Err(Error::Truncation(format!(
            "initial particle state loses {residual:.2e} outside the {}-level basis; increase m_levels",
            basis.dim()
        )));
    }
    let particle = QuantumState::new(amps, SpaceTag::Particle)?.normalized()?;
    Ok((QuantumState::product(&field, &particle)?, tail, residual))
}

fn scales_report(cfg: &RunConfig) -> ScalesReport {
    let s = cfg.params.scales();
    let particle_dim = particle_basis(&cfg.params, &cfg.model).map(|b| b.dim()).unwrap_or(0);
    ScalesReport {
        field_dim: cfg.model.trunc.n_fock,
        particle_dim,
        xi_ref: reference_length(&cfg.params, &cfg.model.trunc).ok(),
        xi_0: s.xi_of(0.0),
        omega_0: s.omega_of(0.0),
        pump_photons: if cfg.params.kappa > 0.0 { (cfg.params.eta / cfg.params.kappa).powi(2) } else { 0.0 },
    }
}

fn projector(name: String, basis: Vec<QuantumState>) -> Observable {
    let vecs: Vec<CVector> = basis.into_iter().map(QuantumState::into_amplitudes).collect();
    Observable::function(name, move |psi| vecs.iter().map(|u| u.dotc(psi).norm_sqr()).sum())
}

fn record_basis(out: &mut RunOutcome, label: String, basis: &SubspaceBasis, export: bool) {
    for (m, n) in &basis.n_m {
        out.diagnostics.insert(format!("{label}_n_m{m}"), *n as f64);
    }
    let worst = basis.raw.iter().map(|v| v.embedding_residual).fold(0.0, f64::max);
    out.diagnostics.insert(format!("{label}_max_embedding_residual"), worst);
    if export {
        out.bases.push((label, basis.to_export()));
    }
}

fn trajectory_run(cfg: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let times = cfg.time_grid()?;
    let ph = stage("hamiltonian", build_hamiltonian(&cfg.params, &cfg.model))?;
    let dims = ph.dims();
    let loss = build_liouvillean_jump(&cfg.params, dims)?;
    let generator = non_hermitian_generator(&ph.hamiltonian, &loss.decay)?;
    let init = cfg.initial_state.as_ref().ok_or_else(|| Error::config("initial_state missing"))?;
    let (psi0, tail, residual) = stage("initial state", initial_state(init, &cfg.params, &cfg.model))?;
    out.diagnostics.insert("initial_field_tail".into(), tail);
    out.diagnostics.insert("initial_particle_residual".into(), residual);

    let mut observables = Vec::new();
    let mut density_cols = Vec::new();
    let wants = |k: ObservableKind| cfg.observables.contains(&k);
    let m_list = cfg.subspace.as_ref().map(|s| default_m_list(s.m_max, cfg.model.parity)).unwrap_or_default();
    let export = cfg.subspace.as_ref().is_some_and(|s| s.export);

    if wants(ObservableKind::PhotonNumber) {
        observables.push(Observable::operator("n", &photon_number_operator(dims)?));
        out.columns.insert("n".into(), "mean photon number".into());
    }
    if wants(ObservableKind::FieldAmplitude) {
        let a = fock_ops(dims.field)?.a;
        let one = Operator::identity(dims.particle, SpaceTag::Particle)?;
        observables.push(Observable::operator("re_a", &tensor(&a, &one)?));
        observables.push(Observable::operator("im_a", &tensor(&a.scale(C64::new(0.0, -1.0)), &one)?));
        out.columns.insert("re_a".into(), "Re<a>".into());
        out.columns.insert("im_a".into(), "Im<a>".into());
    }
    if wants(ObservableKind::ParticleX2) {
        let x2 = Operator::from_real(&ph.basis.x_squared(), SpaceTag::Particle)?;
        observables.push(Observable::operator("x2", &tensor(&Operator::identity(dims.field, SpaceTag::Field)?, &x2)?));
        out.columns.insert("x2".into(), "particle <x^2> in units of 1/K^2".into());
    }
    if wants(ObservableKind::CoherentProjector) || wants(ObservableKind::CoherentBranches) {
        let coh = stage("coherent subspace", build_coherent_subspace(&cfg.params, &m_list, &cfg.model))?;
        for b in &coh.raw {
            out.diagnostics.insert(format!("coherent_alpha_abs2_m{}", b.m), b.photon_number);
        }
        if wants(ObservableKind::CoherentProjector) {
            observables.push(projector("p_coh".into(), coh.ortho.clone()));
            out.columns.insert("p_coh".into(), "projector onto the coherent separable subspace".into());
        }
        if wants(ObservableKind::CoherentBranches) {
            for &m in &cfg.subspace.as_ref().map(|s| s.branches.clone()).unwrap_or_default() {
                let name = format!("p_coh_m{m}");
                observables.push(projector(name.clone(), coh.branch_basis(m)?));
                out.columns.insert(name, format!("projector onto the coherent branch m = {m}"));
            }
        }
        record_basis(out, "coherent".into(), &coh, export);
    }
    if wants(ObservableKind::EffectiveProjectors) {
        for &eps in &cfg.subspace.as_ref().map(|s| s.epsilons.clone()).unwrap_or_default() {
            let label = format!("eps_{}", eps_label(eps));
            let basis = stage(&format!("subspace {label}"), build_effective_subspace(&cfg.params, &m_list, eps, &cfg.model))?;
            let name = format!("p_{label}");
            observables.push(projector(name.clone(), basis.ortho.clone()));
            out.columns.insert(name, format!("projector onto the effective subspace with cutoff {eps:e}"));
            record_basis(out, label, &basis, export);
        }
    }
    if wants(ObservableKind::Squeezing) {
        density_cols.push(ObservableKind::Squeezing);
        out.columns.insert("squeezing".into(), "-ln(lambda_s) of the ensemble field state".into());
        out.columns.insert("lambda_s".into(), "smaller eigenvalue of the vacuum-normalized quadrature covariance".into());
    }
    if wants(ObservableKind::Negativity) {
        density_cols.push(ObservableKind::Negativity);
        out.columns.insert("negativity".into(), "negativity of the partial transpose of the ensemble state".into());
    }

    let ens_cfg = EnsembleConfig {
        generator,
        jump: loss.jump,
        psi0,
        times: times.clone(),
        options: TrajectoryOptions { tolerances: cfg.tolerances, ..TrajectoryOptions::default() },
        average_density: !density_cols.is_empty(),
    };
    let ens = stage("trajectory ensemble", run_ensemble(&ens_cfg, cfg.n_traj, cfg.master_seed, &observables))?;

    let mut table = Table::new("time", times.clone());
    for (i, name) in ens.names.iter().enumerate() {
        table.push(name.clone(), ens.mean[i].clone(), Some(ens.stderr[i].clone()));
    }
    if let Some(rhos) = &ens.averaged_density {
        let mut sq = Vec::new();
        let mut lam = Vec::new();
        let mut neg = Vec::new();
        for rho in rhos {
            if density_cols.contains(&ObservableKind::Squeezing) {
                let s = squeezing(&field_reduced(rho)?)?;
                sq.push(s.measure);
                lam.push(s.lambda_s);
            }
            if density_cols.contains(&ObservableKind::Negativity) {
                neg.push(negativity(rho)?);
            }
        }
        if !sq.is_empty() {
            table.push("squeezing", sq, None);
            table.push("lambda_s", lam, None);
        }
        if !neg.is_empty() {
            table.push("negativity", neg, None);
        }
    }
    let mean_jumps = ens.jump_counts.iter().sum::<usize>() as f64 / ens.n_traj as f64;
    out.diagnostics.insert("mean_jumps".into(), mean_jumps);
    if let Some(t0) = cfg.window_start {
        let rows: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= t0).collect();
        if !rows.is_empty() {
            for c in &table.columns {
                let vals: Vec<f64> = rows.iter().map(|&k| c.values[k]).collect();
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                out.diagnostics.insert(format!("window_min_{}", c.name), min);
                out.diagnostics.insert(format!("window_mean_{}", c.name), mean);
            }
        }
    }
    out.table = table;
    Ok(())
}

fn steady_detuning(params: &SystemParams, m: usize, n_fock: usize, res: &Resonance) -> Result<(f64, usize)> {
    if !res.self_consistent {
        return Ok((resonance_detuning_about(params, m, res.n0)?, 0));
    }
    let num = fock_ops(n_fock)?.num;
    let mut n0 = res.n0;
    let mut prev = n0;
    for it in 1..=SELF_CONSISTENT_MAX_ITER {
        let delta = resonance_detuning_about(params, m, n0)?;
        let p = SystemParams { delta_c: delta, ..*params };
        let rho = Superoperator::assemble(&build_effective_hamiltonian(&p, m, n_fock)?, p.kappa)?.steady_state()?;
        let n_new = rho.expectation(&num)?.re;
        if (n_new - n0).abs() < SELF_CONSISTENT_TOL {
            return Ok((resonance_detuning_about(params, m, n_new)?, it));
        }
        prev = n0;
        n0 = 0.5 * (n0 + n_new);
    }
    Err(Error::NoConvergence {
        m,
        iterations: SELF_CONSISTENT_MAX_ITER,
        last: C64::from(n0),
        previous: C64::from(prev),
    })
}

fn steady_run(cfg: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let sc = cfg.steady.as_ref().ok_or_else(|| Error::config("steady section missing"))?;
    let n_fock = cfg.model.trunc.n_fock;
    let mut rows: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &m in &sc.m_list {
        let wrap = |e| Error::Branch { m, source: Box::new(e) };
        let (delta, iterations) = match &sc.resonance {
            Some(r) => steady_detuning(&cfg.params, m, n_fock, r).map_err(wrap)?,
            None => (cfg.params.delta_c, 0),
        };
        let p = SystemParams { delta_c: delta, ..cfg.params };
        let rho = build_effective_hamiltonian(&p, m, n_fock)
            .and_then(|h| Superoperator::assemble(&h, p.kappa))
            .and_then(|l| l.steady_state())
            .map_err(wrap)?;
        let (mean, var) = photon_stats(&rho)?;
        let sq = squeezing(&rho)?;
        let tail = rho.matrix()[(n_fock - 1, n_fock - 1)].re;
        rows.entry("delta_c").or_default().push(delta);
        rows.entry("n").or_default().push(mean);
        rows.entry("mandel_q").or_default().push(if mean > 0.0 { var / mean - 1.0 } else { 0.0 });
        rows.entry("fidelity").or_default().push(coherent_fit_fidelity(&rho)?);
        rows.entry("squeezing").or_default().push(sq.measure);
        rows.entry("purity").or_default().push(rho.purity());
        out.diagnostics.insert(format!("top_fock_population_m{m}"), tail);
        if iterations > 0 {
            out.diagnostics.insert(format!("self_consistent_iterations_m{m}"), iterations as f64);
        }
        if let Some(w) = &sc.wigner {
            let grid = wigner(&rho, &axis(w.x_min, w.x_max, w.points), &axis(w.p_min, w.p_max, w.points))?;
            if grid.tail_warning || grid.coverage_warning {
                out.warnings.push(format!(
                    "wigner grid m = {m}: tail {:.2e}, integral {:.6}",
                    grid.max_tail, grid.integral
                ));
            }
            out.wigner.push((format!("m{m}"), grid));
        }
    }
    let mut table = Table::new("m", sc.m_list.iter().map(|&m| m as f64).collect());
    for (name, doc) in [
        ("delta_c", "cavity detuning used for the branch"),
        ("n", "stationary mean photon number"),
        ("mandel_q", "Mandel Q parameter"),
        ("fidelity", "fidelity to the coherent state with the same <a>"),
        ("squeezing", "-ln(lambda_s)"),
        ("purity", "Tr rho^2"),
    ] {
        table.push(name, rows.remove(name).unwrap_or_default(), None);
        out.columns.insert(name.into(), doc.into());
    }
    out.table = table;
    Ok(())
}

fn subspace_run(cfg: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let sc = cfg.subspace.as_ref().ok_or_else(|| Error::config("subspace section missing"))?;
    let mut opts = cfg.model;
    if let Some(n) = sc.n_fock {
        opts.trunc.n_fock = n;
    }
    let m_list = default_m_list(sc.m_max, opts.parity);
    let mut table = Table::new("m", m_list.iter().map(|&m| m as f64).collect());

    let coh = stage("coherent subspace", build_coherent_subspace(&cfg.params, &m_list, &opts))?;
    table.push("alpha_abs2", coh.raw.iter().map(|v| v.photon_number).collect(), None);
    table.push("xi", coh.raw.iter().map(|v| v.xi).collect(), None);
    out.columns.insert("alpha_abs2".into(), "|alpha_m|^2 of the self-consistent coherent branch".into());
    out.columns.insert("xi".into(), "oscillator length of the coherent branch".into());
    record_basis(out, "coherent".into(), &coh, sc.export);

    let spectra: Vec<Vec<f64>> = m_list
        .iter()
        .map(|&m| branch_steady_spectrum(&cfg.params, m, opts.trunc.n_fock).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    for k in 0..4 {
        let name = format!("eig_{}", k + 1);
        table.push(name.clone(), spectra.iter().map(|v| v.get(k).copied().unwrap_or(0.0)).collect(), None);
        out.columns.insert(name, format!("eigenvalue {} of the branch's stationary field state", k + 1));
    }
    for &eps in &sc.epsilons {
        let label = format!("eps_{}", eps_label(eps));
        let basis = stage(&format!("subspace {label}"), build_effective_subspace(&cfg.params, &m_list, eps, &opts))?;
        let name = format!("n_m_{label}");
        table.push(name.clone(), m_list.iter().map(|m| basis.n_m.get(m).copied().unwrap_or(0) as f64).collect(), None);
        out.columns.insert(name, format!("retained eigenvectors per branch at cutoff {eps:e}"));
        record_basis(out, label, &basis, sc.export);
    }
    out.table = table;
    Ok(())
}

/// Compute a run without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut out = RunOutcome {
        table: Table::new("time", Vec::new()),
        columns: BTreeMap::new(),
        wigner: Vec::new(),
        bases: Vec::new(),
        diagnostics: BTreeMap::new(),
        warnings: Vec::new(),
        scales: scales_report(cfg),
    };
    match cfg.experiment {
        ExperimentKind::TrajectoryEnsemble | ExperimentKind::DecaySqueezing | ExperimentKind::Custom => {
            trajectory_run(cfg, &mut out)?
        }
        ExperimentKind::EffectiveSteady => steady_run(cfg, &mut out)?,
        ExperimentKind::SubspaceDiagnostic => subspace_run(cfg, &mut out)?,
    }
    let key = out.table.key.clone();
    out.columns.insert(key.clone(), if key == "time" { "time in the unit of the rates" } else { "branch index" }.into());
    for c in &out.table.columns {
        if c.stderr.is_some() {
            out.columns.insert(format!("{}_stderr", c.name), format!("standard error of {}", c.name));
        }
    }
    Ok(out)
}

/// Largest absolute change per shared column between two tables.
pub fn compare_tables(base: &Table, other: &Table) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if base.keys != other.keys {
        return out;
    }
    for c in &base.columns {
        if let Some(o) = other.column(&c.name) {
            let d = c
                .values
                .iter()
                .zip(&o.values)
                .filter(|(a, b)| !(a.is_nan() && b.is_nan()))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, |acc: f64, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) });
            out.insert(c.name.clone(), d);
        }
    }
    out
}

fn convergence(cfg: &RunConfig, base: &RunOutcome) -> Result<ConvergenceReport> {
    let tol = cfg.convergence.tolerance;
    if !cfg.convergence.enabled {
        return Ok(ConvergenceReport {
            checked: false,
            converged: None,
            tolerance: tol,
            n_fock: None,
            m_levels: None,
            max_deviation: BTreeMap::new(),
        });
    }
    let big = cfg.enlarged();
    let other = stage("convergence rerun", execute(&big))?;
    let dev = compare_tables(&base.table, &other.table);
    let converged = !dev.is_empty() && dev.values().all(|d| *d <= tol);
    Ok(ConvergenceReport {
        checked: true,
        converged: Some(converged),
        tolerance: tol,
        n_fock: Some(big.model.trunc.n_fock),
        m_levels: Some(big.model.trunc.m_levels),
        max_deviation: dev,
    })
}

pub fn table_file_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::EffectiveSteady => "steady.csv",
        ExperimentKind::SubspaceDiagnostic => "subspace.csv",
        _ => "series.csv",
    }
}

/// Execute `cfg`, run the truncation check if enabled, and write all
/// artifacts into `out_dir`. The manifest is written last.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let mut outcome = execute(cfg)?;
    let conv = convergence(cfg, &outcome)?;
    if conv.converged == Some(false) {
        outcome.warnings.push(format!(
            "unconverged: means moved by more than {} under n_fock = {:?}, m_levels = {:?}",
            conv.tolerance, conv.n_fock, conv.m_levels
        ));
    }

    let table_name = table_file_name(cfg.experiment);
    write_atomic(&out_dir.join(table_name), outcome.table.to_csv()?.as_bytes())?;
    let mut files = FileList { table: table_name.to_string(), wigner: Vec::new(), bases: Vec::new() };
    for (label, grid) in &outcome.wigner {
        let name = format!("wigner_{label}.txt");
        let title = format!("{} wigner function of the stationary field state, branch {label}", cfg.name);
        write_atomic(&out_dir.join(&name), wigner_to_text(grid, &title).as_bytes())?;
        files.wigner.push(name);
    }
    for (label, export) in &outcome.bases {
        let name = format!("basis_{label}.json");
        let json = serde_json::to_string_pretty(export).map_err(|e| Error::usage(e.to_string()))?;
        write_atomic(&out_dir.join(&name), json.as_bytes())?;
        files.bases.push(name);
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        name: cfg.name.clone(),
        experiment: cfg.experiment,
        master_seed: cfg.master_seed,
        warnings: outcome.warnings,
        scales: outcome.scales,
        files,
        columns: outcome.columns,
        diagnostics: outcome.diagnostics,
        convergence: conv,
        config: cfg.clone(),
    };
    write_atomic(&out_dir.join("manifest.toml"), manifest.to_toml()?.as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{Component, ParticleState};
    use crate::experiments::presets;
    use crate::hilbert::{partial_trace, DensityMatrix, Factor};
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_ground_state() {
        let (_, cfg) = presets::preset("fig2").unwrap().remove(0);
        let (psi, tail, res) = initial_state(cfg.initial_state.as_ref().unwrap(), &cfg.params, &cfg.model).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(tail, 0.0);
        assert!(res < INITIAL_TAIL_TOL);
        let n = photon_number_operator(psi.dims().unwrap()).unwrap();
        assert_abs_diff_eq!(n.expectation(&psi).unwrap().re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn superposition_has_equal_branch_weights() {
        let (_, cfg) = presets::preset("fig2").unwrap().remove(1);
        let (psi, _, _) = initial_state(cfg.initial_state.as_ref().unwrap(), &cfg.params, &cfg.model).unwrap();
        let xi0 = cfg.params.scales().xi_of(0.0);
        let basis = particle_basis(&cfg.params, &cfg.model).unwrap();
        let rho_p = partial_trace(&DensityMatrix::from_pure(&psi), Factor::Particle).unwrap();
        for m in [0, 2] {
            let (c, _) = basis.embed(m, xi0).unwrap();
            let v = CVector::from_iterator(c.len(), c.iter().map(|&x| C64::from(x)));
            let w = (v.adjoint() * rho_p.matrix() * &v)[(0, 0)].re;
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn coherent_initial_photon_number() {
        let (_, cfg) = presets::preset("fig4").unwrap().remove(0);
        let (psi, tail, _) = initial_state(cfg.initial_state.as_ref().unwrap(), &cfg.params, &cfg.model).unwrap();
        // Poisson oracle for the truncated, renormalized mean
        let (mut z, mut mean, mut w) = (0.0, 0.0, (-4.0f64).exp());
        for k in 0..22 {
            if k > 0 {
                w *= 4.0 / k as f64;
            }
            z += w;
            mean += k as f64 * w;
        }
        let n = photon_number_operator(psi.dims().unwrap()).unwrap();
        assert_abs_diff_eq!(n.expectation(&psi).unwrap().re, mean / z, epsilon = 1e-12);
        assert_abs_diff_eq!(mean / z, 4.0, epsilon = 1e-6);
        assert!(tail < 1e-6);
    }

    #[test]
    fn truncation_violations_are_errors() {
        let (_, mut cfg) = presets::preset("fig4").unwrap().remove(0);
        cfg.model.trunc.n_fock = 8;
        let err = initial_state(cfg.initial_state.as_ref().unwrap(), &cfg.params, &cfg.model).unwrap_err();
        assert!(err.to_string().contains("increase n_fock"), "{err}");
        let (_, mut cfg) = presets::preset("fig2").unwrap().remove(1);
        cfg.model.trunc.m_levels = 4;
        let err = initial_state(cfg.initial_state.as_ref().unwrap(), &cfg.params, &cfg.model).unwrap_err();
        assert!(err.to_string().contains("increase m_levels"), "{err}");
        let init = InitialState {
            field: FieldState::Vacuum,
            particle: ParticleState { xi: LengthSpec::Photons(0.0), components: vec![Component { m: 1, re: 1.0, im: 0.0 }] },
        };
        assert!(initial_state(&init, &cfg.params, &cfg.model).is_err());
    }

    #[test]
    fn compare_tables_reports_max_change() {
        let mut a = Table::new("time", vec![0.0, 1.0]);
        a.push("n", vec![1.0, 2.0], None);
        let mut b = a.clone();
        b.columns[0].values[1] = 2.5;
        assert_eq!(compare_tables(&a, &b)["n"], 0.5);
    }
}
