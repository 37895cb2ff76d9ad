//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! (written straight to stderr so it survives output capture) and then
//! asserts.
//!
//! The trajectory criteria run the canonical presets at full ensemble size
//! and take tens of minutes on a single core.

use std::io::Write;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cavnl::experiments::{execute, presets, RunConfig, RunOutcome};
use cavnl::hilbert::oscillator::hermite_functions;
use cavnl::hilbert::{
    coherent_state, eigh_sorted, fock_ops, ho_overlap, ho_overlap_matrix, partial_trace, tensor, tensor_density,
    CMatrix, CVector, DensityMatrix, Factor, Operator, ProductDims, QuantumState, SpaceTag,
};
use cavnl::liouville::Superoperator;
use cavnl::mcwf::{run_ensemble, EnsembleConfig, Observable, TrajectoryOptions};
use cavnl::model::{
    build_effective_hamiltonian, build_hamiltonian, build_liouvillean_jump, non_hermitian_generator, parity_operator,
    ModelOptions, Parity, SystemParams,
};
use cavnl::observables::{axis, coherent_fit_fidelity, field_reduced, negativity, squeezing, wigner};
use cavnl::subspace::{build_effective_subspace, default_m_list};

struct Checks {
    items: Vec<(String, bool)>,
}

impl Checks {
    fn new() -> Self {
        Self { items: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.items.push((label.into(), ok));
    }

    fn finish(self, criterion: &str) {
        let pass = self.items.iter().all(|(_, ok)| *ok);
        let failed: Vec<&str> = self.items.iter().filter(|(_, ok)| !ok).map(|(l, _)| l.as_str()).collect();
        let detail: Vec<&str> = self.items.iter().map(|(l, _)| l.as_str()).collect();
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{} {criterion}: {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
        drop(err);
        assert!(pass, "{criterion} failed: {}", failed.join("; "));
    }
}

fn run_preset(name: &str, n_traj: Option<usize>) -> Vec<(String, RunOutcome)> {
    presets::preset(name)
        .unwrap()
        .into_iter()
        .map(|(label, mut cfg): (String, RunConfig)| {
            cfg.convergence.enabled = false;
            if let Some(n) = n_traj {
                cfg.n_traj = n;
            }
            (label, execute(&cfg).unwrap())
        })
        .collect()
}

fn window(outcome: &RunOutcome, start: f64, column: &str) -> Vec<f64> {
    let t = &outcome.table.keys;
    let v = outcome.table.values(column).unwrap_or_else(|| panic!("missing column {column}"));
    t.iter().zip(v).filter(|(t, _)| **t >= start - 1e-12).map(|(_, v)| *v).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn linear_alpha(eta: f64, kappa: f64, delta: f64) -> C64 {
    C64::from(eta) / C64::new(kappa, -delta)
}

fn field_fidelity_to_coherent(rho: &DensityMatrix, alpha: C64) -> f64 {
    let field = field_reduced(rho).unwrap();
    let (coh, _) = coherent_state(field.dim(), alpha).unwrap();
    field.fidelity_with_pure(&coh).unwrap()
}

#[test]
fn linear_limits() {
    let mut c = Checks::new();

    // no light shift: the particle decouples and the field relaxes to the
    // driven-damped coherent state
    let p = SystemParams { kappa: 10.0, v0: -100.0, u0: 0.0, delta_c: 7.0, eta: 25.0, omega_rec: 1.0 };
    let model = build_hamiltonian(&p, &ModelOptions::harmonic(24, 4)).unwrap();
    let dims = model.dims();
    let sup = Superoperator::assemble(&model.hamiltonian, p.kappa).unwrap();
    let psi0 = QuantumState::product(
        &QuantumState::basis(dims.field, 0, SpaceTag::Field).unwrap(),
        &QuantumState::basis(dims.particle, 0, SpaceTag::Particle).unwrap(),
    )
    .unwrap();
    let rho = sup.integrate_master(&DensityMatrix::from_pure(&psi0), &[0.0, 2.0]).unwrap();
    let f = field_fidelity_to_coherent(&rho[1], linear_alpha(p.eta, p.kappa, p.delta_c));
    c.check(format!("U0 = 0 fidelity 1 - {:.1e}", 1.0 - f), f > 1.0 - 1e-6);

    // frozen particle: with no kinetic term a position-squared eigenstate
    // stays put and only shifts the cavity detuning
    let p = SystemParams { kappa: 10.0, v0: -100.0, u0: -50.0, delta_c: 5.0, eta: 20.0, omega_rec: 0.0 };
    let opts = ModelOptions::harmonic(24, 4).with_xi_ref(0.3);
    let model = build_hamiltonian(&p, &opts).unwrap();
    let dims = model.dims();
    let x2 = model.basis.x_squared().map(C64::from);
    let (s, vecs) = eigh_sorted(&x2);
    let sup = Superoperator::assemble(&model.hamiltonian, p.kappa).unwrap();
    let vacuum = QuantumState::basis(dims.field, 0, SpaceTag::Field).unwrap();
    let mut worst = 0.0f64;
    for j in [0, s.len() - 1] {
        let particle = QuantumState::new(vecs.column(j).into_owned(), SpaceTag::Particle).unwrap();
        let psi0 = QuantumState::product(&vacuum, &particle).unwrap();
        let rho = sup.integrate_master(&DensityMatrix::from_pure(&psi0), &[0.0, 2.0]).unwrap();
        let delta_eff = p.delta_c - p.u0.abs() * s[j];
        let f = field_fidelity_to_coherent(&rho[1], linear_alpha(p.eta, p.kappa, delta_eff));
        worst = worst.max(1.0 - f);
    }
    c.check(format!("frozen particle fidelity 1 - {worst:.1e}"), worst < 1e-6);

    // without drive the photon number decays exactly, coupling or not
    let p = presets::light_particle();
    let opts = ModelOptions::harmonic(14, 5).with_xi_ref(p.scales().xi_of(2.0));
    let model = build_hamiltonian(&p, &opts).unwrap();
    let dims = model.dims();
    let (field, _) = coherent_state(dims.field, C64::new(1.4, 0.3)).unwrap();
    let particle = QuantumState::basis(dims.particle, 0, SpaceTag::Particle).unwrap();
    let psi0 = QuantumState::product(&field, &particle).unwrap();
    let num = tensor(&fock_ops(dims.field).unwrap().num, &Operator::identity(dims.particle, SpaceTag::Particle).unwrap())
        .unwrap();
    let times = axis(0.0, 20.0, 11);
    let sup = Superoperator::assemble(&model.hamiltonian, p.kappa).unwrap();
    let rhos = sup.integrate_master(&DensityMatrix::from_pure(&psi0), &times).unwrap();
    let n0 = rhos[0].expectation(&num).unwrap().re;
    let rel = times
        .iter()
        .zip(&rhos)
        .map(|(t, r)| {
            let exact = n0 * (-2.0 * p.kappa * t).exp();
            (r.expectation(&num).unwrap().re - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    c.check(format!("master decay rel err {rel:.1e}"), rel < 1e-6);

    // the uncoupled coherent state is a deterministic trajectory
    let p0 = SystemParams { u0: 0.0, ..p };
    let model = build_hamiltonian(&p0, &opts).unwrap();
    let loss = build_liouvillean_jump(&p0, dims).unwrap();
    let cfg = EnsembleConfig {
        generator: non_hermitian_generator(&model.hamiltonian, &loss.decay).unwrap(),
        jump: loss.jump,
        psi0,
        times: times.clone(),
        options: TrajectoryOptions::default(),
        average_density: false,
    };
    let ens = run_ensemble(&cfg, 8, 5, &[Observable::operator("n", &num)]).unwrap();
    let (n_mean, _) = ens.series("n").unwrap();
    let rel = times
        .iter()
        .zip(n_mean)
        .map(|(t, n)| (n - n0 * (-2.0 * p.kappa * t).exp()).abs() / (n0 * (-2.0 * p.kappa * t).exp()))
        .fold(0.0, f64::max);
    c.check(format!("trajectory decay rel err {rel:.1e}"), rel < 1e-6);

    c.finish("linear limits");
}

#[test]
fn oracle_equivalence() {
    let mut c = Checks::new();
    let p = presets::moderate_coupling();
    let model = build_hamiltonian(&p, &ModelOptions::harmonic(4, 3)).unwrap();
    let dims = model.dims();
    let loss = build_liouvillean_jump(&p, dims).unwrap();
    let psi0 = QuantumState::product(
        &QuantumState::basis(dims.field, 0, SpaceTag::Field).unwrap(),
        &QuantumState::basis(dims.particle, 0, SpaceTag::Particle).unwrap(),
    )
    .unwrap();
    let times = axis(0.0, 0.5, 6);
    let oracle = Superoperator::assemble(&model.hamiltonian, p.kappa)
        .unwrap()
        .integrate_master(&DensityMatrix::from_pure(&psi0), &times)
        .unwrap();
    let cfg = EnsembleConfig {
        generator: non_hermitian_generator(&model.hamiltonian, &loss.decay).unwrap(),
        jump: loss.jump,
        psi0,
        times: times.clone(),
        options: TrajectoryOptions::default(),
        average_density: true,
    };
    let batches: Vec<Vec<DensityMatrix>> = (0..4u64)
        .map(|b| run_ensemble(&cfg, 2500, 1000 + b, &[]).unwrap().averaged_density.unwrap())
        .collect();
    let mut small = 0.0;
    let mut full = 0.0;
    let mut worst = 0.0f64;
    for j in 1..times.len() {
        let mut sum = CMatrix::zeros(dims.total(), dims.total());
        for batch in &batches {
            small += batch[j].trace_distance(&oracle[j]).unwrap() / 4.0;
            sum += batch[j].matrix();
        }
        let merged = DensityMatrix::unchecked(sum * C64::from(0.25), SpaceTag::Product, Some(dims)).unwrap();
        let d = merged.trace_distance(&oracle[j]).unwrap();
        worst = worst.max(d);
        full += d;
    }
    let ratio = small / full;
    c.check(format!("max trace distance at 1e4 trajectories {worst:.4}"), worst < 0.05);
    c.check(format!("error ratio 2500 -> 1e4 trajectories {ratio:.3}"), (1.44..=2.56).contains(&ratio));
    c.finish("oracle equivalence");
}

#[test]
fn recoil_free_limit() {
    let mut c = Checks::new();
    let mut worst = 0.0f64;
    for (delta_c, eta) in [(0.0, 25.0), (-15.0, 20.0), (8.0, 12.0)] {
        let p = SystemParams { kappa: 10.0, v0: -100.0, u0: -100.0, delta_c, eta, omega_rec: 0.0 };
        for m in [0, 2, 4] {
            let h = build_effective_hamiltonian(&p, m, 30).unwrap();
            let rho = Superoperator::assemble(&h, p.kappa).unwrap().steady_state().unwrap();
            let (coh, _) = coherent_state(30, linear_alpha(eta, p.kappa, delta_c)).unwrap();
            worst = worst.max(1.0 - rho.fidelity_with_pure(&coh).unwrap());
        }
    }
    c.check(format!("worst infidelity {worst:.1e}"), worst < 1e-8);
    c.finish("recoil-free effective steady state");
}

#[test]
fn moderate_coupling_trajectories() {
    let mut c = Checks::new();
    for (label, out) in run_preset("fig2", None) {
        let start = 0.5;
        let n = out.table.values("n").unwrap();
        let n_win = window(&out, start, "n");
        let plateau = mean(&n_win);
        let spread = n_win.iter().map(|v| (v - plateau).abs()).fold(0.0, f64::max) / plateau;
        c.check(format!("{label} n(0) = {:.1e}", n[0]), n[0].abs() < 1e-9);
        c.check(format!("{label} plateau n = {plateau:.3} (spread {spread:.3})"), n[1] < plateau && spread < 0.25);
        let p = window(&out, start, "p_coh");
        c.check(format!("{label} min P_coh over window {:.4}", min(&p)), min(&p) >= 0.9);
        if label == "fig2b" {
            let m0 = mean(&window(&out, start, "p_coh_m0"));
            let m2 = mean(&window(&out, start, "p_coh_m2"));
            c.check(format!("{label} branch weights m=0 {m0:.3} > m=2 {m2:.3}"), m0 > m2);
        }
    }
    c.finish("moderate coupling trajectories");
}

#[test]
fn strong_coupling_subspaces() {
    let mut c = Checks::new();
    let (_, cfg) = presets::preset("overlaps").unwrap().remove(0);
    let m_list = default_m_list(8, Parity::EvenOnly);
    let coarse = build_effective_subspace(&cfg.params, &m_list, 1e-1, &cfg.model).unwrap();
    let fine = build_effective_subspace(&cfg.params, &m_list, 1e-4, &cfg.model).unwrap();
    let fmt = |b: &cavnl::subspace::SubspaceBasis| format!("{:?}", b.n_m.values().collect::<Vec<_>>());
    c.check(format!("counts eps=1e-1 {}", fmt(&coarse)), coarse.n_m.values().all(|&n| n == 1));
    let expected = |m: usize| match m {
        0 => 3,
        2 => 2,
        _ => 1,
    };
    c.check(format!("counts eps=1e-4 {}", fmt(&fine)), fine.n_m.iter().all(|(&m, &n)| n == expected(m)));

    // the preset runs 300 trajectories; 100 keep this under a quarter hour
    let mut cfg = cfg;
    cfg.n_traj = 100;
    cfg.convergence.enabled = false;
    let out = execute(&cfg).unwrap();
    let start = cfg.window_start.unwrap();
    let pc = window(&out, start, "p_coh");
    let p1 = window(&out, start, "p_eps_1e-1");
    let p4 = window(&out, start, "p_eps_1e-4");
    let ordered = (0..pc.len()).all(|i| p4[i] >= p1[i] - 1e-12 && p1[i] >= pc[i]);
    c.check(
        format!("P_1e-4 >= P_1e-1 >= P_coh pointwise (window means {:.4}, {:.4}, {:.4})", mean(&p4), mean(&p1), mean(&pc)),
        ordered,
    );
    c.check(format!("window mean P_1e-4 {:.4}", mean(&p4)), mean(&p4) >= 0.95);
    c.finish("strong coupling subspaces");
}

#[test]
fn conditional_steady_states() {
    let mut c = Checks::new();
    let (_, out) = run_preset("fig3", None).remove(0);
    let f = out.table.values("fidelity").unwrap();
    let ms = &out.table.keys;
    let listed: Vec<String> = ms.iter().zip(f).map(|(m, f)| format!("m={m}: {f:.5}")).collect();
    c.check(format!("m=0 fidelity {:.5}", f[0]), f[0] > 0.95);
    c.check(format!("decreasing in m ({})", listed.join(", ")), f.windows(2).all(|w| w[1] < w[0]));
    c.finish("conditional steady states");
}

// first full run of the preset at the default seed (300 trajectories)
const SQUEEZING_PEAK: f64 = 0.315557;
const NEGATIVITY_PEAK: f64 = 0.058693;

#[test]
fn light_particle_decay() {
    let mut c = Checks::new();
    let (_, out) = run_preset("fig4", None).remove(0);
    for (col, reference) in [("squeezing", SQUEEZING_PEAK), ("negativity", NEGATIVITY_PEAK)] {
        let v = out.table.values(col).unwrap();
        let peak = max(v);
        let last = *v.last().unwrap();
        c.check(format!("{col}(0) = {:.1e}", v[0]), v[0].abs() < 1e-6);
        c.check(format!("{col} peak {peak:.6} (reference {reference:.6})"), peak > 0.0 && (peak - reference).abs() < 1e-3 * reference);
        c.check(format!("{col} final {last:.2e}"), last < 0.25 * peak);
    }
    c.finish("light particle decay");
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> CVector {
    CVector::from_fn(dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).normalize()
}

fn random_density(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for _ in 0..rank {
        let v = random_state(rng, dim);
        m += &v * v.adjoint() * C64::from(1.0 / rank as f64);
    }
    m
}

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).qr().q()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn invariant_suites() {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let adjoint_exact = (2..=40).all(|n| {
        let ops = fock_ops(n).unwrap();
        ops.a_dag.matrix() == &ops.a.matrix().adjoint()
    });
    c.check("a_dag is the exact adjoint of a", adjoint_exact);

    let mut ortho = 0.0f64;
    for xi in [0.3, 1.0, 2.5] {
        for m in 0..=30 {
            for mp in 0..=30 {
                let delta = if m == mp { 1.0 } else { 0.0 };
                ortho = ortho.max((ho_overlap(m, xi, mp, xi).unwrap() - delta).abs());
            }
        }
    }
    c.check(format!("same-length overlaps orthonormal to {ortho:.1e}"), ortho < 1e-12);

    let defect = |rows: usize| {
        let o = ho_overlap_matrix(rows, 5, 0.5, 0.8).unwrap();
        (o.transpose() * &o - nalgebra::DMatrix::<f64>::identity(5, 5)).abs().max()
    };
    let (d10, d20, d40) = (defect(10), defect(20), defect(40));
    c.check(format!("overlap truncation defect {d10:.1e} > {d20:.1e} > {d40:.1e}"), d10 > d20 && d20 > d40);

    let f = DensityMatrix::new(random_density(&mut rng, 5, 2), SpaceTag::Field, None).unwrap();
    let g = DensityMatrix::new(random_density(&mut rng, 4, 3), SpaceTag::Particle, None).unwrap();
    let joint = tensor_density(&f, &g).unwrap();
    let back_f = partial_trace(&joint, Factor::Field).unwrap();
    let back_g = partial_trace(&joint, Factor::Particle).unwrap();
    let pt_err = max_abs(&(back_f.matrix() - f.matrix())).max(max_abs(&(back_g.matrix() - g.matrix())));
    c.check(format!("partial trace recovers factors to {pt_err:.1e}"), pt_err < 1e-12);

    let p = presets::moderate_coupling();
    let full = build_hamiltonian(&p, &ModelOptions::harmonic(8, 8).with_parity(Parity::Full)).unwrap();
    let herm = full.hamiltonian.hermiticity_defect();
    let parity = parity_operator(&full).unwrap();
    let comm = max_abs(full.hamiltonian.commutator(&parity).unwrap().matrix());
    c.check(format!("hamiltonian hermitian to {herm:.1e}, parity commutator {comm:.1e}"), herm == 0.0 && comm < 1e-12);

    let model = build_hamiltonian(&p, &ModelOptions::harmonic(4, 3)).unwrap();
    let dims = model.dims();
    let sup = Superoperator::assemble(&model.hamiltonian, p.kappa).unwrap();
    let mut trace_err = 0.0f64;
    let mut herm_err = 0.0f64;
    for _ in 0..100 {
        let raw = CMatrix::from_fn(dims.total(), dims.total(), |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let rho = &raw + raw.adjoint();
        let out = sup.apply(&rho);
        trace_err = trace_err.max(out.trace().norm());
        herm_err = herm_err.max(max_abs(&(&out - out.adjoint())));
    }
    c.check(format!("liouvillian trace {trace_err:.1e}, hermiticity {herm_err:.1e}"), trace_err < 1e-12 && herm_err < 1e-12);

    let ss = sup.steady_state().unwrap();
    let later = sup.integrate_master(&ss, &[0.0, 1.0, 5.0]).unwrap();
    let drift = later.iter().map(|r| r.trace_distance(&ss).unwrap()).fold(0.0, f64::max);
    c.check(format!("steady state drifts by {drift:.1e}"), drift < 1e-8);

    let opts = ModelOptions::harmonic(16, 8).with_xi_ref(p.scales().xi_of(1.0));
    let m_list = [0, 2, 4];
    let coarse = build_effective_subspace(&p, &m_list, 1e-2, &opts).unwrap();
    let fine = build_effective_subspace(&p, &m_list, 1e-4, &opts).unwrap();
    let mut monotone = true;
    for _ in 0..50 {
        let psi = QuantumState::product_vector(random_state(&mut rng, coarse.dims.total()), coarse.dims).unwrap();
        monotone &= fine.projector_expectation(&psi).unwrap() >= coarse.projector_expectation(&psi).unwrap() - 1e-12;
    }
    c.check("projector expectations grow as epsilon shrinks", monotone);

    let mut v = CVector::zeros(10);
    for (k, amp) in [(0, C64::new(0.6, 0.0)), (1, C64::new(0.3, 0.4)), (3, C64::new(-0.2, 0.5)), (5, C64::new(0.1, -0.2))] {
        v[k] = amp;
    }
    let rho = DensityMatrix::from_pure(&QuantumState::new(v.normalize(), SpaceTag::Field).unwrap());
    let xs = axis(-5.0, 5.0, 101);
    let w = wigner(&rho, &xs, &xs).unwrap();
    let quadrature = |x: f64, phase: bool| {
        let psi = hermite_functions(rho.dim() - 1, std::f64::consts::SQRT_2 * x);
        let m = rho.matrix();
        let ph = |k: usize| if phase { C64::new(0.0, -1.0).powi(k as i32) } else { C64::from(1.0) };
        let mut s = C64::new(0.0, 0.0);
        for a in 0..rho.dim() {
            for b in 0..rho.dim() {
                s += ph(a) * m[(a, b)] * ph(b).conj() * psi[a] * psi[b];
            }
        }
        std::f64::consts::SQRT_2 * s.re
    };
    let marg = xs
        .iter()
        .zip(w.x_marginal())
        .map(|(x, mx)| (mx - quadrature(*x, false)).abs())
        .chain(xs.iter().zip(w.p_marginal()).map(|(p, mp)| (mp - quadrature(*p, true)).abs()))
        .fold(0.0, f64::max);
    c.check(format!("wigner integral {:.5}, marginal error {marg:.1e}", w.integral), (w.integral - 1.0).abs() < 2e-3 && marg < 2e-3);

    let dims = ProductDims { field: 4, particle: 3 };
    let rho = DensityMatrix::new(random_density(&mut rng, dims.total(), 2), SpaceTag::Product, Some(dims)).unwrap();
    let n0 = negativity(&rho).unwrap();
    let local = tensor(
        &Operator::new(random_unitary(&mut rng, 4), SpaceTag::Field).unwrap(),
        &Operator::new(random_unitary(&mut rng, 3), SpaceTag::Particle).unwrap(),
    )
    .unwrap();
    let u = local.matrix();
    let rotated = DensityMatrix::unchecked(u * rho.matrix() * u.adjoint(), SpaceTag::Product, Some(dims)).unwrap();
    let dn = (negativity(&rotated).unwrap() - n0).abs();
    c.check(format!("negativity {n0:.4} moves {dn:.1e} under local unitaries"), n0 > 0.0 && dn < 1e-8);

    let field = field_reduced(&DensityMatrix::from_pure(
        &QuantumState::new(random_state(&mut rng, 12), SpaceTag::Field).unwrap(),
    ))
    .unwrap();
    let s0 = squeezing(&field).unwrap().measure;
    let theta = 0.7;
    let rot = CMatrix::from_fn(12, 12, |i, j| if i == j { C64::from_polar(1.0, -theta * i as f64) } else { C64::from(0.0) });
    let turned = DensityMatrix::new(&rot * field.matrix() * rot.adjoint(), SpaceTag::Field, None).unwrap();
    let ds = (squeezing(&turned).unwrap().measure - s0).abs();
    c.check(format!("squeezing moves {ds:.1e} under phase rotation"), ds < 1e-10);

    let fit = coherent_fit_fidelity(&DensityMatrix::from_pure(&coherent_state(30, C64::new(1.2, -0.4)).unwrap().0)).unwrap();
    c.check(format!("coherent fit of a coherent state 1 - {:.1e}", 1.0 - fit), 1.0 - fit < 1e-10);

    c.finish("invariant suites");
}
