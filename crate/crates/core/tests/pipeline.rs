//! Library-level runs: outputs agree with each other across modules.

use proptest::prelude::*;
use quasikin::collision::CollisionConfig;
use quasikin::euler::InitialVelocity;
use quasikin::monge_ampere::FieldMode;
use quasikin::snapshot;
use quasikin::vlasov::{run, DensityProfile, Discard, Observer, Schedule, SimulationParams, WellPreparedIC};
use quasikin::{PhaseField, Result};

fn params(eps: f64, mode: FieldMode, collision: CollisionConfig) -> SimulationParams {
    SimulationParams {
        dim: 1,
        n_x: 16,
        n_v: 48,
        v_max: 0.5 + 8.0 * eps.sqrt(),
        eps,
        dt: 0.002,
        t_end: 0.02,
        field_mode: mode,
        collision,
        ic: WellPreparedIC {
            u0: InitialVelocity::Uniform { value: vec![0.5] },
            delta: Schedule { coeff: 1.0, power: 1.5 },
            theta: Schedule::LINEAR,
            profile: DensityProfile::CosX,
        },
        snapshot_every: 0,
        cfl: 1.0,
        euler_reference: true,
        field_tol: None,
    }
}

struct Keep(Vec<PhaseField>);

impl Observer for Keep {
    fn on_snapshot(
        &mut self,
        _: usize,
        f: &PhaseField,
        _: &quasikin::monge_ampere::Potential,
        _: Option<&quasikin::euler::EulerState>,
    ) -> Result<()> {
        self.0.push(f.clone());
        Ok(())
    }
}

#[test]
fn snapshot_round_trip_matches_final_state_and_mass() {
    let p = params(0.2, FieldMode::MongeAmpere, CollisionConfig::Bgk { tau: 0.05 });
    let mut keep = Keep(Vec::new());
    let traj = run(&p, &mut keep).unwrap();
    let last = keep.0.last().unwrap();
    assert_eq!(last, traj.final_state.as_ref().unwrap());
    assert!((last.mass() - traj.records.last().unwrap().mass).abs() < 1e-14);

    let dir = tempfile::tempdir().unwrap();
    snapshot::write_phase(dir.path(), "f", last).unwrap();
    let (meta, values) = snapshot::read(dir.path(), "f").unwrap();
    assert_eq!(values, last.values);
    assert_eq!(meta.time, traj.records.last().unwrap().t);
}

#[test]
fn poisson_and_monge_ampere_coincide_in_one_dimension() {
    let a = run(&params(0.2, FieldMode::Poisson, CollisionConfig::None), &mut Discard).unwrap();
    let b = run(&params(0.2, FieldMode::MongeAmpere, CollisionConfig::None), &mut Discard).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.e_total - y.e_total).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The inequality chain and the mass balance hold along random runs.
    #[test]
    fn runs_keep_h_below_modulated_energy(eps in 0.1f64..0.5, tau in 0.01f64..1.0, u in -0.5f64..0.5) {
        let mut p = params(eps, FieldMode::MongeAmpere, CollisionConfig::Bgk { tau });
        p.ic.u0 = InitialVelocity::Uniform { value: vec![u] };
        p.v_max = u.abs() + 8.0 * eps.sqrt();
        let traj = run(&p, &mut Discard).unwrap();
        let m0 = traj.records[0].mass;
        for r in &traj.records {
            prop_assert!(r.h_eps.unwrap() <= r.h_mod.unwrap() + 1e-12);
            prop_assert!((r.mass - m0).abs() <= 1e-8 * m0);
        }
    }
}
