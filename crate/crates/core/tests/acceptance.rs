//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run with `cargo test -p swapsched-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swapsched_core::experiments::{
    build_scenario, run_sweep, Axis, NamedPolicy, ScenarioConfig, SweepResults, SweepSpec,
    TopologySource, HINDSIGHT,
};
use swapsched_core::forecast::ForecasterSpec;
use swapsched_core::scheduler::Integerization;
use swapsched_core::simulate::SimWindow;
use swapsched_core::traffic::SeriesKind;
use swapsched_core::{
    brute_force_schedule, hindsight_optimum, run_simulation, solve_schedule, MovePlan,
    PolicyConfig, SchedulingInstance, StationId, Topology, TrafficSeries,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Connected random topology: a random spanning tree plus a few extra links.
fn random_topology(rng: &mut ChaCha8Rng, n: usize) -> Topology {
    let names: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
    let mut links = Vec::new();
    for i in 1..n {
        links.push((rng.random_range(0..i), i));
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            links.push((a, b));
        }
    }
    Topology::new(names, &links).expect("valid random topology")
}

struct Guard {
    topo: Topology,
    initial: Vec<u32>,
    fixed: Vec<u32>,
    demand: Vec<Vec<u32>>,
}

impl Guard {
    fn instance(&self) -> SchedulingInstance<'_> {
        SchedulingInstance::new(
            &self.topo,
            self.initial.clone(),
            self.fixed.clone(),
            self.demand.clone(),
        )
        .expect("valid instance")
    }
}

/// ≤4 stations, T ≤ 4, ΣQ ≤ 3, D entries ≤ 3.
fn random_guard(rng: &mut ChaCha8Rng) -> Guard {
    let n = rng.random_range(1..=4);
    let horizon = rng.random_range(1..=4);
    let topo = random_topology(rng, n);
    let mut initial = vec![0u32; n];
    for _ in 0..rng.random_range(0..=3) {
        initial[rng.random_range(0..n)] += 1;
    }
    let fixed = (0..n).map(|_| rng.random_range(0..=1)).collect();
    let demand = (0..horizon)
        .map(|_| (0..n).map(|_| rng.random_range(0..=3)).collect())
        .collect();
    Guard {
        topo,
        initial,
        fixed,
        demand,
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cases = 600;
    let mut mismatches = Vec::new();
    for case in 0..cases {
        let g = random_guard(&mut rng);
        let inst = g.instance();
        let flow = solve_schedule(&inst).expect("flow solve").objective;
        let brute = brute_force_schedule(&inst).expect("brute force").objective;
        if flow != brute {
            mismatches.push(format!("case {case}: flow {flow} vs brute {brute}"));
        }
    }
    let detail = match mismatches.first() {
        None => format!("{cases} guard instances, objectives identical"),
        Some(first) => format!("{} of {cases} mismatched, first {first}", mismatches.len()),
    };
    outcome(mismatches.is_empty(), detail)
}

/// Checks a plan against the scheduling model directly from its move counts.
/// Returns the first violated constraint.
fn check_constraints(inst: &SchedulingInstance, plan: &MovePlan) -> Result<(), String> {
    let n = inst.station_count();
    let horizon = inst.horizon();
    let z = |t: usize, i: usize, j: usize| plan.moves_at(t, StationId::from(i), StationId::from(j));
    if plan.moves.len() != horizon || plan.lost.len() != horizon {
        return Err("plan horizon differs from instance".into());
    }
    for (t, period) in plan.moves.iter().enumerate() {
        for (&(i, j), &c) in period {
            if i.index() >= n || j.index() >= n {
                return Err(format!("period {t}: station out of range"));
            }
            if c > 0 && i != j && !inst.topo.are_adjacent(i, j) {
                return Err(format!(
                    "period {t}: move {i}->{j} between non-adjacent stations"
                ));
            }
        }
    }
    for i in 0..n {
        let out: u32 = (0..n).map(|j| z(0, i, j)).sum();
        if out != inst.initial[i] {
            return Err(format!(
                "station {i}: first-period departures {out} != Q {}",
                inst.initial[i]
            ));
        }
    }
    for t in 1..horizon {
        for i in 0..n {
            let arrivals: u32 = (0..n).map(|j| z(t - 1, j, i)).sum();
            let departures: u32 = (0..n).map(|j| z(t, i, j)).sum();
            if arrivals != departures {
                return Err(format!(
                    "period {t} station {i}: arrivals {arrivals} != departures {departures}"
                ));
            }
        }
    }
    let mut total = 0u64;
    for t in 0..horizon {
        for i in 0..n {
            let available = if t + 1 < horizon {
                z(t, i, i)
            } else if t == 0 {
                inst.initial[i]
            } else {
                (0..n).map(|j| z(t - 1, j, i)).sum()
            };
            let want = inst.demand[t][i].saturating_sub(inst.fixed[i] + available);
            if plan.lost[t][i] != want {
                return Err(format!(
                    "period {t} station {i}: L {} != {want}",
                    plan.lost[t][i]
                ));
            }
            total += u64::from(want);
        }
    }
    if plan.objective != total {
        return Err(format!("objective {} != sum of L {total}", plan.objective));
    }
    Ok(())
}

fn constraint_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cases = 1200;
    for case in 0..cases {
        let n = rng.random_range(1..=20);
        let horizon = rng.random_range(1..=6);
        let topo = random_topology(&mut rng, n);
        let q_max = rng.random_range(0..=4);
        let initial: Vec<u32> = (0..n).map(|_| rng.random_range(0..=q_max)).collect();
        let fixed: Vec<u32> = (0..n).map(|_| rng.random_range(0..=3)).collect();
        let d_max = rng.random_range(0..=10);
        let demand: Vec<Vec<u32>> = (0..horizon)
            .map(|_| (0..n).map(|_| rng.random_range(0..=d_max)).collect())
            .collect();
        let inst = SchedulingInstance::new(&topo, initial, fixed, demand).expect("valid instance");
        let plan = match solve_schedule(&inst) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("case {case}: solver error {e}")),
        };
        if let Err(msg) = check_constraints(&inst, &plan) {
            return outcome(false, format!("case {case}: {msg}"));
        }
    }
    outcome(
        true,
        format!("{cases} instances up to 20 stations, T<=6, all constraints hold"),
    )
}

fn policy_zoo() -> Vec<ForecasterSpec> {
    vec![
        ForecasterSpec::Oracle,
        ForecasterSpec::NoisyOracle {
            noise: 0.15,
            noise_growth: 0.0,
            seed: 3,
        },
        ForecasterSpec::NoisyOracle {
            noise: 0.09,
            noise_growth: 0.25,
            seed: 4,
        },
        ForecasterSpec::SeasonalNaive { period: 24 },
        ForecasterSpec::HistoricalAverage {
            period: 24,
            window: None,
        },
    ]
}

fn hindsight_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let scenarios = 100;
    let mut runs = 0usize;
    for s in 0..scenarios {
        let cfg = ScenarioConfig {
            seed: 1000 + s,
            topology: TopologySource::Grid {
                rows: rng.random_range(1..=3),
                cols: rng.random_range(2..=3),
            },
            history_hours: 48,
            test_hours: 12,
            fleet: swapsched_core::FleetConfig {
                inventory_level: rng.random_range(0.4..1.0),
                mobile_ratio: rng.random_range(0.0..0.6),
            },
            ..Default::default()
        };
        let sc = build_scenario(&cfg).expect("scenario");
        let best = hindsight_optimum(&sc.topo, &sc.demand, &sc.fixed, &sc.initial, sc.window)
            .expect("hindsight");
        for spec in policy_zoo() {
            for h in 1..=6 {
                let policy = PolicyConfig {
                    h,
                    forecaster: spec.clone(),
                    integerization: Integerization::HalfUp,
                };
                let trace = run_simulation(
                    &sc.topo,
                    &sc.demand,
                    &sc.fixed,
                    &sc.initial,
                    &policy,
                    sc.window,
                )
                .expect("simulation");
                runs += 1;
                if trace.total_lost < best {
                    return outcome(
                        false,
                        format!(
                            "scenario {s} {} h={h}: realized {} < hindsight {best}",
                            spec.name(),
                            trace.total_lost
                        ),
                    );
                }
            }
        }
    }

    // Equality for the oracle forecaster planning over the whole window.
    let guard_cases = 200;
    for case in 0..guard_cases {
        let g = random_guard(&mut rng);
        let n = g.topo.station_count();
        let hours = g.demand.len();
        let series =
            TrafficSeries::new(SeriesKind::StationDemand, g.demand.clone()).expect("series");
        let window = SimWindow { start: 0, hours };
        let policy = PolicyConfig {
            h: hours,
            forecaster: ForecasterSpec::Oracle,
            integerization: Integerization::HalfUp,
        };
        let best =
            hindsight_optimum(&g.topo, &series, &g.fixed, &g.initial, window).expect("hindsight");
        let realized = run_simulation(&g.topo, &series, &g.fixed, &g.initial, &policy, window)
            .expect("simulation")
            .total_lost;
        let brute = brute_force_schedule(&g.instance())
            .expect("brute")
            .objective;
        if realized != best || best != brute {
            return outcome(
                false,
                format!("guard case {case} ({n} stations): realized {realized}, hindsight {best}, brute {brute}"),
            );
        }
    }
    outcome(
        true,
        format!("{runs} runs over {scenarios} scenarios bounded below; {guard_cases} guard scenarios with equality"),
    )
}

fn noisy_only() -> Vec<NamedPolicy> {
    vec![NamedPolicy {
        name: "noisy-oracle".into(),
        forecaster: ForecasterSpec::NoisyOracle {
            noise: 0.15,
            noise_growth: 0.0,
            seed: 0,
        },
    }]
}

const SEEDS: usize = 20;

fn horizon_trend() -> Outcome {
    let base = ScenarioConfig {
        policies: noisy_only(),
        ..Default::default()
    };
    let values = vec![1.0, 2.0, 3.0, 4.0, 6.0];
    let spec = SweepSpec {
        axis: Axis::Horizon,
        values: values.clone(),
        repetitions: SEEDS,
    };
    let res = run_sweep(&spec, &base).expect("horizon sweep");
    let means: Vec<f64> = values
        .iter()
        .map(|&v| res.mean_lost_ratio("noisy-oracle", v))
        .collect();
    let increases: Vec<f64> = means
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .collect();
    let pass = increases.len() <= 1 && increases.iter().all(|d| *d <= 0.01);
    outcome(
        pass,
        format!(
            "mean lost ratio by h {{1,2,3,4,6}}: {}; {} increase(s)",
            fmt_list(&means),
            increases.len()
        ),
    )
}

fn relative_bound() -> Outcome {
    let base = ScenarioConfig {
        policies: noisy_only(),
        ..Default::default()
    };
    let spec = SweepSpec {
        axis: Axis::MobileRatio,
        values: vec![0.3],
        repetitions: SEEDS,
    };
    let res = run_sweep(&spec, &base).expect("ratio sweep");
    let rel: Vec<f64> = res
        .cell("noisy-oracle", 0.3)
        .map(|r| r.relative_to_oracle)
        .collect();
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    let max = rel.iter().cloned().fold(f64::MIN, f64::max);
    outcome(
        rel.len() >= SEEDS && mean <= 1.25,
        format!(
            "mean relative-to-oracle {mean:.4} over {} seeds (max {max:.4}, bound 1.25)",
            rel.len()
        ),
    )
}

fn mean_hindsight_lost(res: &SweepResults, axis_value: f64) -> f64 {
    let lost: Vec<f64> = res
        .cell(HINDSIGHT, axis_value)
        .map(|r| r.total_lost as f64)
        .collect();
    lost.iter().sum::<f64>() / lost.len() as f64
}

fn shift_trend() -> Outcome {
    let shifts = vec![0.0, 4.0, 8.0];
    let run = |ratio: f64| {
        let mut base = ScenarioConfig {
            policies: Vec::new(),
            ..Default::default()
        };
        base.fleet.mobile_ratio = ratio;
        base.shift.fraction = 0.3;
        let spec = SweepSpec {
            axis: Axis::Shift,
            values: shifts.clone(),
            repetitions: SEEDS,
        };
        run_sweep(&spec, &base).expect("shift sweep")
    };
    let fixed_only = run(0.0);
    let mixed = run(0.3);
    let gaps: Vec<f64> = shifts
        .iter()
        .map(|&s| mean_hindsight_lost(&fixed_only, s) - mean_hindsight_lost(&mixed, s))
        .collect();
    let pass = gaps.windows(2).all(|w| w[1] > w[0]);
    outcome(
        pass,
        format!(
            "hindsight lost gap (ratio 0.0 minus 0.3) at shift 0/4/8: {}",
            fmt_list(&gaps)
        ),
    )
}

fn scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let cases = 150;
    for case in 0..cases {
        let g = random_guard(&mut rng);
        let base = brute_force_schedule(&g.instance())
            .expect("brute")
            .objective;
        for k in [2u32, 3] {
            let scale = |v: &[u32]| v.iter().map(|x| x * k).collect::<Vec<u32>>();
            let demand: Vec<Vec<u32>> = g.demand.iter().map(|r| scale(r)).collect();
            let series = TrafficSeries::new(SeriesKind::StationDemand, demand).expect("series");
            let window = SimWindow {
                start: 0,
                hours: g.demand.len(),
            };
            let scaled = hindsight_optimum(
                &g.topo,
                &series,
                &scale(&g.fixed),
                &scale(&g.initial),
                window,
            )
            .expect("hindsight");
            if scaled != u64::from(k) * base {
                return outcome(
                    false,
                    format!("case {case}, k={k}: {scaled} != {k} x {base}"),
                );
            }
        }
    }
    outcome(
        true,
        format!("{cases} guard instances scale exactly for k in {{2,3}}"),
    )
}

fn determinism() -> Outcome {
    let base = ScenarioConfig {
        topology: TopologySource::Grid { rows: 2, cols: 3 },
        history_hours: 48,
        test_hours: 24,
        ..Default::default()
    };
    let spec = SweepSpec {
        axis: Axis::Inventory,
        values: vec![0.6, 0.75, 0.9],
        repetitions: 3,
    };
    let first = run_sweep(&spec, &base).expect("sweep").to_csv();
    let second = run_sweep(&spec, &base).expect("sweep").to_csv();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(|| run_sweep(&spec, &base).expect("sweep").to_csv());

    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    std::fs::write(&a, &first).expect("write");
    std::fs::write(&b, &single).expect("write");
    let same_files = std::fs::read(&a).expect("read") == std::fs::read(&b).expect("read");
    outcome(
        first == second && same_files,
        format!(
            "{} bytes, identical across reruns and thread counts",
            first.len()
        ),
    )
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 oracle-equivalence", oracle_equivalence),
        ("2 constraint-suite", constraint_suite),
        ("3 hindsight-lower-bound", hindsight_bound),
        ("4 horizon-trend", horizon_trend),
        ("5 relative-to-oracle", relative_bound),
        ("6 shift-trend", shift_trend),
        ("7 scaling", scaling),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed += 1;
        }
        println!(
            "{status} criterion {name}: {} [{:.1?}]",
            out.detail,
            start.elapsed()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
