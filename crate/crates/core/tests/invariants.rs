//! End-to-end invariants of the public API.

use phasefront::evolve::{self, EvolveConfig, InitialData, Integrator, Scheme};
use phasefront::fronts::{front_theta, front_x};
use phasefront::io::{format_fronts, format_snapshot, parse_fronts, parse_snapshot};
use phasefront::trajectory::Trajectory;
use phasefront::{Field, GridSpec, ModelParams, Reaction};
use proptest::prelude::*;

fn small_grid() -> GridSpec {
    GridSpec::new(-10.0, 30.0, 81, 1.0, 9.0, 33).unwrap()
}

fn config(amplitude: f64, x_edge: f64) -> EvolveConfig {
    let mut cfg = EvolveConfig::new(
        Scheme::Imex,
        6.0,
        InitialData::Indicator {
            lambda: 3.0,
            x_edge,
            amplitude,
        },
    );
    cfg.dt = Some(0.05);
    cfg.snapshot_every = 2.0;
    cfg.fronts_every = 0.5;
    cfg.level = 0.3;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_data_gives_fronts_ahead(shift in 0.5f64..4.0, amp in 0.6f64..1.0) {
        let f = Reaction::CubicBistable { alpha: 0.1 };
        let lo = evolve::run(&config(amp, 0.0), small_grid(), f).unwrap();
        let hi = evolve::run(&config(1.0, shift), small_grid(), f).unwrap();
        for (a, b) in lo.fronts.front_x.iter().zip(&hi.fronts.front_x) {
            prop_assert!(a <= b, "{a} > {b}");
        }
        for (a, b) in lo.snapshots.iter().zip(&hi.snapshots) {
            prop_assert!(a.values.iter().zip(&b.values).all(|(p, q)| p <= &(q + 1e-12)));
        }
    }

    #[test]
    fn front_positions_respect_pointwise_order(
        values in prop::collection::vec(0.0f64..1.0, 7 * 5),
        lift in prop::collection::vec(0.0f64..0.5, 7 * 5),
        m in 0.05f64..0.95,
    ) {
        let spec = GridSpec::new(0.0, 6.0, 7, 1.0, 5.0, 5).unwrap();
        let u = Field::from_values(spec, values.clone(), 0.0).unwrap();
        let v = Field::from_values(
            spec,
            values.iter().zip(&lift).map(|(a, b)| (a + b).min(1.0)).collect(),
            0.0,
        ).unwrap();
        prop_assert!(front_x(&u, m) <= front_x(&v, m));
        prop_assert!(front_theta(&u, m) <= front_theta(&v, m));
    }

    #[test]
    fn snapshots_round_trip(
        values in prop::collection::vec(prop_oneof![Just(0.0), 1e-300f64..1e-3, -1.0f64..1.0], 4 * 3),
        time in 0.0f64..1e4,
    ) {
        let spec = GridSpec::new(-1.0, 2.0, 4, 1.0, 2.0, 3).unwrap();
        let f = Field::from_values(spec, values, time).unwrap();
        let back = parse_snapshot(&format_snapshot(&f)).unwrap();
        prop_assert_eq!(back.checksum(), f.checksum());
        prop_assert_eq!(back.time.to_bits(), f.time.to_bits());
    }

    #[test]
    fn frame_change_is_invertible(
        c in 0.01f64..2.0,
        t in 0.0f64..1.0,
        x in -50.0f64..50.0,
        theta in 1.0f64..40.0,
    ) {
        let traj = Trajectory::new(c, 20.0, 1.0, 30.0).unwrap();
        let p = traj.eval(t * 30.0).unwrap();
        let (y, eta) = p.to_frame(x, theta);
        let (x2, th2) = p.from_frame(y, eta);
        prop_assert!((x2 - x).abs() < 1e-9 * (1.0 + x.abs()));
        prop_assert!((th2 - theta).abs() < 1e-9 * theta);
    }
}

#[test]
fn fronts_file_round_trips_a_real_run() {
    let out = evolve::run(
        &config(1.0, 0.0),
        small_grid(),
        Reaction::CubicBistable { alpha: 0.1 },
    )
    .unwrap();
    let back = parse_fronts(&format_fronts(&out.fronts), 0.3).unwrap();
    assert_eq!(back.times, out.fronts.times);
    assert_eq!(back.front_x, out.fronts.front_x);
    assert_eq!(back.front_theta, out.fronts.front_theta);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let spec = GridSpec::new(-20.0, 60.0, 257, 1.0, 21.0, 65).unwrap();
    let initial = InitialData::indicator(10.0).build(&spec).unwrap();
    let f = Reaction::CubicBistable { alpha: 0.1 };
    let sums: Vec<(u64, u64)> = [1, 3, 4]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            pool.install(|| {
                let mut a = initial.clone();
                let mut b = initial.clone();
                let mut ia = Integrator::new(spec, f, false, &a);
                let mut ib = Integrator::new(spec, f, false, &b);
                let dt = ia.cfl();
                for _ in 0..10 {
                    ia.step_explicit(&mut a, dt).unwrap();
                    ib.step_imex(&mut b, 0.05).unwrap();
                }
                (a.checksum(), b.checksum())
            })
        })
        .collect();
    assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");
}

#[test]
fn frozen_trait_rows_agree() {
    // With the trait frozen every row solves the same 1D problem, so rows of
    // θ-independent data stay identical.
    let spec = GridSpec::new(-20.0, 40.0, 121, 1.0, 3.0, 5).unwrap();
    let mut cfg = EvolveConfig::new(
        Scheme::Imex,
        10.0,
        InitialData::Field(Field::from_fn(
            spec,
            |x, _| {
                if x <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            },
        )),
    );
    cfg.dt = Some(0.05);
    cfg.freeze_trait = true;
    cfg.abort_cells = 0;
    let out = evolve::run(&cfg, spec, Reaction::CubicBistable { alpha: 0.1 }).unwrap();
    let last = out.snapshots.last().unwrap();
    for j in 1..spec.ntheta {
        assert_eq!(last.row(j), last.row(0));
    }
    assert!(front_x(last, 0.5) > 1.0);
}

#[test]
fn parameter_problems_are_listed_together() {
    let good = ModelParams {
        alpha: 0.25,
        theta_min: 2.0,
        lambda: 64.0,
        r: ModelParams::default_r(0.25, 0.3),
        traj_speed: 0.05,
        bump_radius: 16.0,
        horizon: 40.0,
        level: 0.3,
    };
    assert!(good.problems().is_empty(), "{:?}", good.problems());
    assert_eq!(good.r, 0.75);
    let bad = ModelParams {
        alpha: 0.6,
        level: 1.5,
        theta_min: -1.0,
        ..good
    };
    assert!(bad.problems().len() >= 3, "{:?}", bad.problems());
    assert!(bad.validate().is_err());
}
