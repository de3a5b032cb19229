//! Acceptance gate: every criterion runs at its pinned tolerance and prints
//! one pass/fail line. The thresholds come from the built-in scenario
//! configurations; nothing here is tuned at test time.

use coverlab_cli::report::Outcome;
use coverlab_cli::scenarios::*;

use coverlab_core::dyadic::DyadicSet;
use coverlab_core::energy::EnergyEngine;
use coverlab_core::gamma::{gamma, GAP_TARGET};
use coverlab_core::gauge::Gauge;
use coverlab_core::sim::trial_seed;

const JOBS: usize = 2;

fn report(criterion: &str, outcome: &Outcome) {
    let verdict = if outcome.passed() { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {verdict}");
    for c in &outcome.checks {
        println!("    [{}] {}: {:.6} {} {:.6}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.op, c.threshold);
    }
    assert!(outcome.passed(), "criterion {criterion} failed: {:?}", outcome.checks);
}

#[test]
fn criterion_01_shrinking_ball_dimension() {
    let outcome = ShrinkingBalls::default().run(JOBS).unwrap();
    report("01 (shrinking-ball dimension ±0.15)", &outcome);
}

#[test]
fn criterion_02_critical_exponent() {
    let outcome = CriticalExponent::default().run(JOBS).unwrap();
    report("02 (critical exponent ±0.02)", &outcome);
}

#[test]
fn criterion_03_packing_saturation() {
    let outcome = PackingSaturation::default().run(JOBS).unwrap();
    report("03 (packing saturation ≥95%, stage slope ≥ d−0.1)", &outcome);
}

#[test]
fn criterion_04_ball_energy_law() {
    let outcome = BallEnergy::default().run(JOBS).unwrap();
    report("04 (ball energy scaling within 3%)", &outcome);
}

#[test]
fn criterion_05_rectangle_comparabilities() {
    let outcome = Rectangles::default().run(JOBS).unwrap();
    report("05 (rectangle G comparability ≤ factor 4)", &outcome);
}

#[test]
fn criterion_06_two_cubes_amplification() {
    let outcome = TwoCubes::default().run(JOBS).unwrap();
    report("06 (G>g amplification monotone, ≥ linear)", &outcome);
}

#[test]
fn criterion_07_content_dominates_g() {
    let outcome = ContentDominatesG::default().run(JOBS).unwrap();
    report("07 (content·d^{t/2} ≥ G on 200 sets, zero violations)", &outcome);
}

#[test]
fn criterion_08_leb_split_suite() {
    let outcome = EnergySplit::default().run(JOBS).unwrap();
    report("08 (split: measure ±1 cell, I ≤ 2p²I·1.05)", &outcome);
}

/// Dense active-set QP oracle for the simplex-constrained quadratic
/// `min wᵀKw`, independent of the conditional-gradient path.
fn qp_oracle(kernel: &[f64], support: &[usize], n: usize) -> (f64, Vec<f64>) {
    use nalgebra::{DMatrix, DVector};
    let m = support.len();
    let k = DMatrix::from_fn(m, m, |i, j| {
        let diff = (support[i] + n - support[j]) % n;
        kernel[diff]
    });
    let mut active: Vec<usize> = (0..m).collect();
    loop {
        let a = active.len();
        // KKT system for equality-constrained minimization on the active set
        let mut sys = DMatrix::zeros(a + 1, a + 1);
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                sys[(r, c)] = 2.0 * k[(i, j)];
            }
            sys[(r, a)] = 1.0;
            sys[(a, r)] = 1.0;
        }
        let mut rhs = DVector::zeros(a + 1);
        rhs[a] = 1.0;
        let sol = sys.lu().solve(&rhs).expect("KKT system solvable");
        let (worst, worst_val) = active
            .iter()
            .enumerate()
            .map(|(r, _)| (r, sol[r]))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if worst_val < -1e-12 {
            active.remove(worst);
            continue;
        }
        let mut w = vec![0.0; m];
        for (r, &i) in active.iter().enumerate() {
            w[i] = sol[r].max(0.0);
        }
        let total: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= total;
        }
        let value = {
            let wv = DVector::from_vec(w.clone());
            (wv.transpose() * &k * &wv)[(0, 0)]
        };
        return (value, w);
    }
}

#[test]
fn criterion_09_gamma_suite_with_qp_oracle() {
    let outcome = GammaSuite::default().run(JOBS).unwrap();
    report("09a (Γ suite: positivity, monotонicity, chain bounds)", &outcome);
    // solver vs dense QP oracle within the duality gap on 10 sets at ℓ ≤ 6
    use rand::{Rng, SeedableRng};
    let engine = EnergyEngine::new(Gauge::power(1, 0.5).unwrap());
    let level = 6u8;
    let n = 1usize << level;
    let kernel = engine.kernel_grid(1, level).unwrap();
    let mut all_ok = true;
    for case in 0..10u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(trial_seed(0xACCE97, case));
        let cells: Vec<[u32; 1]> =
            (0..n as u32).filter(|_| rng.gen::<f64>() < 0.4).map(|i| [i]).collect();
        if cells.is_empty() {
            continue;
        }
        let set = DyadicSet::from_indices(1, level, cells).unwrap();
        let solver = gamma(&set, &engine, 100_000).unwrap();
        let support: Vec<usize> =
            set.iter_indices().map(|idx| idx[0] as usize).collect();
        let (oracle_value, _) = qp_oracle(&kernel, &support, n);
        let slack = solver.duality_gap + 1e-9 * oracle_value;
        let ok = solver.value <= oracle_value + slack && solver.value >= oracle_value - slack;
        all_ok &= ok;
        println!(
            "    [{}] case {case}: solver {:.9e} oracle {:.9e} gap {:.3e}",
            if ok { "ok" } else { "FAIL" },
            solver.value,
            oracle_value,
            solver.duality_gap
        );
        assert!(ok, "case {case}: solver {} vs oracle {} (gap {})", solver.value, oracle_value, solver.duality_gap);
    }
    println!("acceptance 09b (Γ matches dense QP oracle within gap): {}", if all_ok { "PASS" } else { "FAIL" });
    // uniform minimizer on the symmetric torus within 1e-3
    let full = DyadicSet::full(1, level).unwrap();
    let r = gamma(&full, &engine, 100_000).unwrap();
    let expect = 1.0 / full.cell_count() as f64;
    let max_dev = r
        .minimizer
        .weights()
        .iter()
        .map(|w| (w - expect).abs() / expect)
        .fold(0.0f64, f64::max);
    println!(
        "acceptance 09c (symmetric minimizer uniform within 1e-3): {}",
        if max_dev < 1e-3 { "PASS" } else { "FAIL" }
    );
    assert!(max_dev < 1e-3, "weight deviation {max_dev}");
    assert!(r.duality_gap <= GAP_TARGET * r.value);
}

#[test]
fn criterion_10_gauge_ball_comparability() {
    let outcome = GaugeBall::default().run(JOBS).unwrap();
    report("10 (gauge-ball G vs h(r)/|log r| ≤ factor 4)", &outcome);
}

#[test]
fn criterion_11_nonlinear_consistency() {
    let outcome = NonlinearConsistency::default().run(JOBS).unwrap();
    report("11 (nonlinear shift ≤ 0.05, inverse error < 1e-10)", &outcome);
}

#[test]
fn criterion_12_determinism() {
    use coverlab_cli::runner::run_to_dir;
    let scenarios: Vec<Scenario> = vec![
        Scenario::ShrinkingBalls(ShrinkingBalls {
            alphas: vec![2.0],
            seeds: 4,
            n_max: 20_000,
            ..ShrinkingBalls::default()
        }),
        Scenario::GammaSuite(GammaSuite { random_sets: 3, nested_pairs: 3, ..GammaSuite::default() }),
    ];
    for sc in &scenarios {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        // different worker counts must not change a single byte
        let run_a = run_to_dir(sc, 1, dir_a.path()).unwrap();
        let run_b = run_to_dir(sc, 4, dir_b.path()).unwrap();
        let manifest_a: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(run_a.dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        let manifest_b: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(run_b.dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest_a["config_sha256"], manifest_b["config_sha256"]);
        assert_eq!(manifest_a["files"], manifest_b["files"], "scenario {}", sc.name());
        for (name, _) in manifest_a["files"].as_object().unwrap() {
            let a = std::fs::read(run_a.dir.join(name)).unwrap();
            let b = std::fs::read(run_b.dir.join(name)).unwrap();
            assert_eq!(a, b, "file {name} differs between reruns of {}", sc.name());
        }
    }
    println!("acceptance 12 (byte-identical reruns across job counts): PASS");
}
