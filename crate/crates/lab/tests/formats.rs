use proptest::prelude::*;
use sse_decay::ensemble::{Engine, ExperimentPlan, Observable};
use sse_decay::linalg::CMatrix;
use sse_decay::system::build_flat_bath;
use sse_decay::{Complex64, NoiseParams, SystemSpec};
use sse_lab::config::{parse_config, system_from_toml, system_to_toml};
use sse_lab::formats::{table_from_csv, table_to_csv, Provenance};
use sse_lab::parallel::run_ensemble_parallel;

fn small_plan(n_traj: u64) -> ExperimentPlan {
    let bath = build_flat_bath(0.2, 9, 0.1, 0.0).unwrap().value;
    let mut plan = ExperimentPlan::new(bath.spec, NoiseParams::new(0.8).unwrap(), 0.05, 1.0, n_traj, 3);
    plan.observables = vec![Observable::Survival, Observable::Occupations, Observable::DensityMatrix];
    plan.record_every = 4;
    plan
}

#[test]
fn worker_count_does_not_change_results() {
    for engine in Engine::ALL {
        let one = run_ensemble_parallel(small_plan(200), engine, 1).unwrap();
        let eight = run_ensemble_parallel(small_plan(200), engine, 8).unwrap();
        assert_eq!(one, eight, "{}", engine.name());
        let sequential = sse_decay::ensemble::run_ensemble(small_plan(200), engine).unwrap();
        assert_eq!(one, sequential);
    }
}

#[test]
fn csv_round_trip_of_a_real_table() {
    let table = run_ensemble_parallel(small_plan(40), Engine::NonlinearSse, 2).unwrap();
    let prov = Provenance::new(3, "deadbeef");
    let back = table_from_csv(&table_to_csv(&table, &prov)).unwrap();
    assert_eq!(back.provenance, Some(prov));
    assert_eq!(back.times, table.times);
    assert_eq!(back.columns, table.columns);
    assert_eq!(back.rows, table.rows);
}

#[test]
fn config_file_drives_the_same_plan() {
    let text = "[bath]\ngamma = 0.2\nlevels = 9\nspacing = 0.1\n\n[noise]\nsigma = 0.8\n\n[run]\ndt = 0.05\nhorizon = 1.0\nn_traj = 200\nrecord_every = 4\nmaster_seed = 3\nobservables = [\"survival\", \"occupations\", \"density\"]\n";
    let cfg = parse_config(text).unwrap();
    let from_file = run_ensemble_parallel(cfg.plan, Engine::ImaginaryNoise, 0).unwrap();
    let direct = run_ensemble_parallel(small_plan(200), Engine::ImaginaryNoise, 0).unwrap();
    assert_eq!(from_file, direct);
}

fn arb_system() -> impl Strategy<Value = SystemSpec> {
    (2usize..6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n),
                Just(n),
            )
        })
        .prop_filter_map("valid system", |(energies, raw, n)| {
            let v = CMatrix::from_fn(n, n, |i, j| {
                let (a, b) = raw[i.min(j) * n + i.max(j)];
                if i == j {
                    Complex64::new(a, 0.0)
                } else if i < j {
                    Complex64::new(a, b)
                } else {
                    Complex64::new(a, -b)
                }
            });
            SystemSpec::new(energies, v, vec![0], 0).ok()
        })
}

proptest! {
    #[test]
    fn system_toml_round_trip(spec in arb_system()) {
        let text = system_to_toml(&spec);
        let back = system_from_toml(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}
