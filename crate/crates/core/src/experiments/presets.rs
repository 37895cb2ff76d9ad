//! Canonical parameter sets.
//!
//! Rates and energies are in recoil units. Horizons are chosen to cover the
//! visible transient and a stretch of the quasi-steady regime.

use crate::error::{Error, Result};
use crate::integrate::Tolerances;
use crate::model::{ModelOptions, SystemParams};

use super::config::{
    Component, ConvergenceConfig, ExperimentKind, FieldState, InitialState, LengthSpec, ObservableKind, ParticleState,
    Resonance, RunConfig, SteadyConfig, SubspaceConfig, TimeGrid, WignerConfig,
};

pub const NAMES: [&str; 4] = ["fig2", "overlaps", "fig3", "fig4"];

pub const DEFAULT_SEED: u64 = 20_080_417;

/// `(κ, V0) = (10, −100)`, `(Δ_C, η, U0) = (0, 2.5, −10)κ`
pub fn moderate_coupling() -> SystemParams {
    SystemParams::from_kappa_units(10.0, -100.0, 0.0, 2.5, -10.0)
}

/// `(κ, V0) = (10, −100)`, `(Δ_C, η, U0) = (0, 2.5, −100)κ`
pub fn strong_coupling() -> SystemParams {
    SystemParams::from_kappa_units(10.0, -100.0, 0.0, 2.5, -100.0)
}

/// `(κ, V0) = (0.1, −60)`, `(Δ_C, η, U0) = (0, 0, −100)κ`
pub fn light_particle() -> SystemParams {
    SystemParams::from_kappa_units(0.1, -60.0, 0.0, 0.0, -100.0)
}

fn base(name: &str, experiment: ExperimentKind, params: SystemParams, model: ModelOptions) -> RunConfig {
    RunConfig {
        name: name.to_string(),
        experiment,
        master_seed: DEFAULT_SEED,
        n_traj: 0,
        notes: String::new(),
        window_start: None,
        params,
        model,
        times: None,
        initial_state: None,
        observables: Vec::new(),
        subspace: None,
        steady: None,
        tolerances: Tolerances::default(),
        convergence: ConvergenceConfig::default(),
        output_dir: None,
    }
}

fn fig2(superposed: bool) -> RunConfig {
    let name = if superposed { "fig2b" } else { "fig2a" };
    let params = moderate_coupling();
    let model = ModelOptions::harmonic(22, 12).with_xi_ref(params.scales().xi_of(1.0));
    let mut cfg = base(name, ExperimentKind::TrajectoryEnsemble, params, model);
    cfg.n_traj = 300;
    cfg.times = Some(TimeGrid { start: 0.0, end: 3.0, points: 61 });
    cfg.window_start = Some(0.5);
    let mut components = vec![Component { m: 0, re: 1.0, im: 0.0 }];
    if superposed {
        components.push(Component { m: 2, re: 1.0, im: 0.0 });
    }
    cfg.initial_state = Some(InitialState {
        field: FieldState::Vacuum,
        particle: ParticleState { xi: LengthSpec::Photons(0.0), components },
    });
    cfg.observables = vec![
        ObservableKind::PhotonNumber,
        ObservableKind::CoherentProjector,
        ObservableKind::CoherentBranches,
    ];
    cfg.subspace = Some(SubspaceConfig { m_max: 12, epsilons: Vec::new(), branches: vec![0, 2], n_fock: None, export: true });
    cfg.notes = "horizon 3/omega_rec (30/kappa); quasi-steady window from t = 0.5".to_string();
    cfg
}

fn overlaps() -> RunConfig {
    let params = strong_coupling();
    // Every branch above m = 0 is nearly empty, so the particle basis sits
    // at the empty-cavity length.
    let model = ModelOptions::harmonic(24, 10).with_xi_ref(params.scales().xi_of(0.0));
    let mut cfg = base("overlaps", ExperimentKind::TrajectoryEnsemble, params, model);
    cfg.n_traj = 300;
    cfg.times = Some(TimeGrid { start: 0.0, end: 3.0, points: 61 });
    cfg.window_start = Some(0.5);
    cfg.initial_state = Some(InitialState::vacuum_ground(LengthSpec::Photons(0.0)));
    cfg.observables = vec![
        ObservableKind::PhotonNumber,
        ObservableKind::CoherentProjector,
        ObservableKind::EffectiveProjectors,
    ];
    cfg.subspace = Some(SubspaceConfig {
        m_max: 8,
        epsilons: vec![1e-1, 1e-4],
        branches: Vec::new(),
        n_fock: None,
        export: true,
    });
    cfg.notes = "horizon 3/omega_rec (30/kappa); quasi-steady window from t = 0.5".to_string();
    cfg
}

fn fig3() -> RunConfig {
    let mut cfg = base("fig3", ExperimentKind::EffectiveSteady, moderate_coupling(), ModelOptions::harmonic(24, 1));
    cfg.steady = Some(SteadyConfig {
        m_list: vec![0, 2, 4, 8],
        resonance: Some(Resonance { n0: 0.0, self_consistent: false }),
        wigner: Some(WignerConfig { x_min: -5.0, x_max: 5.0, p_min: -5.0, p_max: 5.0, points: 101 }),
    });
    cfg
}

fn fig4() -> RunConfig {
    let params = light_particle();
    let model = ModelOptions::harmonic(22, 10).with_xi_ref(params.scales().xi_of(4.0));
    let mut cfg = base("fig4", ExperimentKind::DecaySqueezing, params, model);
    cfg.n_traj = 300;
    cfg.times = Some(TimeGrid { start: 0.0, end: 40.0, points: 81 });
    cfg.initial_state = Some(InitialState {
        field: FieldState::Coherent { re: 2.0, im: 0.0 },
        particle: ParticleState { xi: LengthSpec::Photons(4.0), components: vec![Component { m: 0, re: 1.0, im: 0.0 }] },
    });
    cfg.observables = vec![ObservableKind::PhotonNumber, ObservableKind::Squeezing, ObservableKind::Negativity];
    cfg.notes = "horizon 40/omega_rec (4/kappa); particle starts in the ground state of the potential at n = |alpha|^2".to_string();
    cfg
}

/// The runs behind a preset, each with a short label used as its
/// sub-directory.
pub fn preset(name: &str) -> Result<Vec<(String, RunConfig)>> {
    let runs = match name {
        "fig2" => vec![fig2(false), fig2(true)],
        "overlaps" => vec![overlaps()],
        "fig3" => vec![fig3()],
        "fig4" => vec![fig4()],
        other => {
            return Err(Error::Parse {
                path: "preset".into(),
                message: format!("unknown preset `{other}` (expected one of {})", NAMES.join(", ")),
            })
        }
    };
    Ok(runs.into_iter().map(|c| (c.name.clone(), c)).collect())
}
