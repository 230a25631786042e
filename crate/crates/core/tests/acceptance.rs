//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed and every
//! check runs even when an earlier one fails. Non-flag arguments select
//! checks by substring, e.g. `cargo test --test acceptance -- criterion_6`.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ssh_lindblad::experiments::SweepPlan;
use ssh_lindblad::lindblad::{covariance_evolve_with, evolve_master_observed, run_ensemble};
use ssh_lindblad::prelude::*;
use ssh_lindblad::spectral::LabelStatus;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} ({name}): {detail}");
    std::io::Write::flush(&mut std::io::stdout()).ok();
}

fn params(n: usize, theta: f64, gamma: f64) -> ModelParams {
    ModelParams::new(n, 1.0, 0.3, theta, gamma).unwrap()
}

fn desk_grid() -> TimeGrid {
    TimeGrid::new(2500.0, 0.05, 1000).unwrap()
}

fn criterion_1_zak_phase_transition() -> bool {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 2..=18 {
        if k == 10 {
            continue;
        }
        let theta = 0.05 * k as f64 * PI;
        let want = if k < 10 { PI } else { 0.0 };
        let z = zak_phase(&params(100, theta, 0.0), 1024).unwrap();
        worst = worst.max((z.zak_phase - want).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-6 && elapsed < Duration::from_secs(1);
    report(
        1,
        "Zak phase pi below pi/2, 0 above",
        pass,
        format!("max deviation {worst:.2e}, runtime {elapsed:.2?}"),
    );
    pass
}

fn criterion_2_pt_breaking_count() -> bool {
    let start = Instant::now();
    let count = |theta: f64| {
        let p = params(200, theta, 0.1);
        let r = eigendecompose_general(&build_pt_hamiltonian(&p).to_complex()).unwrap();
        let r = classify_edge_states(&r, &p, &EdgeCriteria::default()).unwrap();
        let pt = pt_breaking_report(&r, 1e-8);
        let broken_edge_weights: Vec<f64> = r
            .labels
            .iter()
            .filter(|l| l.is_pt_broken)
            .map(|l| l.edge_weight_left + l.edge_weight_right)
            .collect();
        (pt.n_complex_pairs, broken_edge_weights)
    };
    let (pairs_tnp, weights) = count(0.1 * PI);
    let (pairs_ttp, _) = count(0.9 * PI);
    let elapsed = start.elapsed();
    let pass = pairs_tnp == 1
        && weights.len() == 2
        && weights.iter().all(|&w| w > 0.9)
        && pairs_ttp == 0
        && elapsed < Duration::from_secs(10);
    report(
        2,
        "one PT-broken pair in the nontrivial phase only",
        pass,
        format!(
            "pairs at 0.1pi = {pairs_tnp} (edge weights {weights:.4?}), pairs at 0.9pi = {pairs_ttp}, runtime {elapsed:.2?}"
        ),
    );
    pass
}

/// γ = 0 sweep on 41 points plus windows {1,3,5,20} and 10.
struct ClosedSweep {
    result: SweepResult,
    ratios: Vec<f64>,
    window10_curvature: f64,
    elapsed: Duration,
}

fn closed_sweep() -> &'static ClosedSweep {
    static CELL: OnceLock<ClosedSweep> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let template = params(100, 0.1 * PI, 0.0);
        let spec = InitialStateSpec::edge_right();
        let settings = EngineSettings::default();
        let grid = desk_grid();
        let plan = SweepPlan::new(SweepPlan::default_thetas(), vec![1, 3, 5, 20]);
        let result = run_theta_sweep(&template, &plan, &spec, &grid, Engine::Spectral, &settings).unwrap();
        // 0.3π and 0.7π are not on the 41-point grid; evaluate them directly
        let probe = SweepPlan::new(vec![0.3 * PI, 0.7 * PI], vec![1, 3, 5, 20]);
        let probe = run_theta_sweep(&template, &probe, &spec, &grid, Engine::Spectral, &settings).unwrap();
        let ratios = (0..4)
            .map(|w| probe.rows[0].edge_occ[w] / probe.rows[1].edge_occ[w])
            .collect();
        let elapsed = start.elapsed();
        let ten = SweepPlan::new(SweepPlan::default_thetas(), vec![10]);
        let ten = run_theta_sweep(&template, &ten, &spec, &grid, Engine::Spectral, &settings).unwrap();
        ClosedSweep {
            result,
            ratios,
            window10_curvature: ten.curvature_by_window[0].unwrap(),
            elapsed,
        }
    })
}

fn criterion_3_closed_system_kink() -> bool {
    let s = closed_sweep();
    let kink = s.result.kink_estimate.unwrap();
    let ratio_ok = s.ratios.iter().all(|&r| r > 5.0);
    let kink_ok = (0.45 * PI..=0.55 * PI).contains(&kink);
    let pass = ratio_ok && kink_ok && s.elapsed < Duration::from_secs(120);
    let per_window: Vec<String> = s
        .result
        .kink_by_window
        .iter()
        .map(|k| format!("{:.4}pi", k.unwrap() / PI))
        .collect();
    report(
        3,
        "closed-system kink",
        pass,
        format!(
            "edge_occ(0.3pi)/edge_occ(0.7pi) for windows [1,3,5,20] = {:.3?}, kink_estimate = {:.4}pi (per window {per_window:?}), runtime {:.2?}",
            s.ratios,
            kink / PI,
            s.elapsed
        ),
    );
    pass
}

fn open_snapshots(theta: f64) -> Vec<SnapshotResult> {
    let p = params(100, theta, 0.1);
    let grid = desk_grid();
    let settings = EngineSettings::with_trajectories(200, 2024);
    [
        InitialStateSpec::edge_right(),
        InitialStateSpec::edge_left(),
        InitialStateSpec::bulk(),
    ]
    .iter()
    .map(|spec| run_snapshot_experiment(spec, &p, &grid, Engine::Trajectories, &settings).unwrap())
    .collect()
}

fn criterion_4_open_system_edge_dominance() -> bool {
    let start = Instant::now();
    let snaps = open_snapshots(0.1 * PI);
    let elapsed = start.elapsed();
    let argmax: Vec<usize> = snaps.iter().map(|s| s.final_profile.argmax_site()).collect();
    let max_ok = argmax.iter().all(|&k| k == 100);

    let mut worst_z = 0.0f64;
    let mut violations = 0usize;
    for a in 0..3 {
        for b in a + 1..3 {
            let (pa, pb) = (&snaps[a].final_profile, &snaps[b].final_profile);
            let (sa, sb) = (pa.stderr.as_ref().unwrap(), pb.stderr.as_ref().unwrap());
            for i in 0..100 {
                let diff = (pa.per_site[i] - pb.per_site[i]).abs();
                let se = (sa[i] * sa[i] + sb[i] * sb[i]).sqrt();
                if diff >= 4.0 * se {
                    violations += 1;
                }
                if se > 0.0 {
                    worst_z = worst_z.max(diff / se);
                } else if diff > 0.0 {
                    worst_z = f64::INFINITY;
                }
            }
        }
    }
    let right10: Vec<f64> = snaps
        .iter()
        .map(|s| edge_occupation(&s.final_profile, 10, Side::Right))
        .collect();
    let pass = max_ok && violations == 0 && elapsed < Duration::from_secs(600);
    report(
        4,
        "open-system right-edge dominance",
        pass,
        format!(
            "argmax sites (R, L, bulk) = {argmax:?}, right-10 weights = {right10:.4?}, pairwise 4-SE violations = {violations}/300 (max z = {worst_z:.1}), runtime {elapsed:.2?}"
        ),
    );
    pass
}

fn criterion_5_open_system_trivial_phase() -> bool {
    let snaps = open_snapshots(0.9 * PI);
    let mut worst_asym = 0.0f64;
    let mut worst_share = 0.0f64;
    for s in &snaps {
        let p = &s.final_profile;
        let asym = (edge_occupation(p, 10, Side::Left) - edge_occupation(p, 10, Side::Right)).abs();
        let share = p.per_site.iter().copied().fold(0.0, f64::max) / p.total();
        worst_asym = worst_asym.max(asym);
        worst_share = worst_share.max(share);
    }
    let pass = worst_asym < 0.05 && worst_share < 0.05;
    report(
        5,
        "open-system trivial phase is broad and symmetric",
        pass,
        format!("max |L10 - R10| = {worst_asym:.4}, max single-site share = {worst_share:.4}"),
    );
    pass
}

fn criterion_6_sharper_open_system_kink() -> bool {
    let start = Instant::now();
    // T = 2500 still carries the edge_right transient; the open sweep runs
    // to T = 10000 with an order-8 step at dt = 0.1
    let grid = TimeGrid::new(10_000.0, 0.1, 1000).unwrap();
    let plan = SweepPlan::new(SweepPlan::default_thetas(), vec![10]);
    let sweep = |gamma: f64, engine: Engine| {
        run_theta_sweep(
            &params(100, 0.1 * PI, gamma),
            &plan,
            &InitialStateSpec::edge_right(),
            &grid,
            engine,
            &EngineSettings::default(),
        )
        .unwrap()
    };
    let open = sweep(0.1, Engine::Master);
    let elapsed = start.elapsed();
    let same_t = sweep(0.0, Engine::Spectral);
    let open_curv = open.curvature_by_window[0].unwrap();
    let closed_curv = closed_sweep().window10_curvature;
    let same_t_curv = same_t.curvature_by_window[0].unwrap();
    let kink = open.kink_estimate.unwrap();
    let factor = open_curv / closed_curv;
    let same_t_factor = open_curv / same_t_curv;
    let pass = factor >= 2.0 && same_t_factor >= 2.0 && kink <= PI / 2.0;
    report(
        6,
        "sharper open-system kink",
        pass,
        format!(
            "max second difference (window 10) open = {open_curv:.4}, closed at T=2500 = {closed_curv:.4} (factor {factor:.2}), closed at T=10000 = {same_t_curv:.4} (factor {same_t_factor:.2}), kink_estimate = {:.4}pi, runtime {elapsed:.2?}",
            kink / PI
        ),
    );
    pass
}

fn criterion_7_engine_oracle_equivalence() -> bool {
    let p = params(6, 0.1 * PI, 0.1);
    let grid = TimeGrid::new(100.0, 0.05, 200).unwrap();
    let psi = FockState::site(6, 1).unwrap();
    let model = build_truncated_lindblad(&p);
    let traj = sample_trajectories(&psi, &model, &grid, 5000, 7).unwrap();
    // a rank-one start sits on the positivity boundary; dt = 0.05 aborts there
    let fine = TimeGrid::new(100.0, 0.01, 200).unwrap();
    let master = evolve_master_rk4(&DensityMatrix::from_pure(&psi), &model, &fine).unwrap();
    let total = traj.per_site_mean.len();
    let within = traj
        .per_site_mean
        .iter()
        .zip(master.per_site_mean.iter())
        .zip(traj.per_site_stderr.iter())
        .filter(|((a, b), se)| (*a - *b).abs() <= 3.0 * **se)
        .count();
    let fraction = within as f64 / total as f64;

    let layout = ChannelLayout::standard(6).without_gain();
    let gainless = ssh_lindblad::model::TruncatedLindbladModel::with_layout(&p, layout).unwrap();
    let m = evolve_master_rk4(&DensityMatrix::from_pure(&psi), &gainless, &fine).unwrap();
    let c = covariance_evolve_with(&CovarianceMatrix::from_state(&psi), &p, layout, &fine).unwrap();
    let cov_dev = (&c.per_site_mean - &m.per_site_mean).amax();

    let pass = fraction >= 0.99 && cov_dev < 1e-8;
    report(
        7,
        "engine oracle equivalence",
        pass,
        format!(
            "trajectories within 3 SE of master at {within}/{total} samples ({:.2}%), gain-free covariance vs master max deviation {cov_dev:.2e}",
            100.0 * fraction
        ),
    );
    pass
}

fn criterion_8_structure_and_conservation() -> bool {
    let mut notes = Vec::new();
    let mut pass = true;

    // chiral symmetry of the Hermitian spectrum
    let mut chiral = 0.0f64;
    for theta in [0.1 * PI, 0.37 * PI, 0.8 * PI] {
        let p = params(200, theta, 0.0);
        let r = eigendecompose_hermitian(build_ssh_hamiltonian(&p).as_real().unwrap()).unwrap();
        let n = r.dim();
        for k in 0..n {
            chiral = chiral.max((r.eigenvalues[k].re + r.eigenvalues[n - 1 - k].re).abs());
        }
    }
    pass &= chiral < 1e-10;
    notes.push(format!("chiral {chiral:.1e}"));

    // conjugate closure of the PT spectrum
    let mut closure = 0.0f64;
    for theta in [0.1 * PI, 0.9 * PI] {
        let p = params(200, theta, 0.1);
        let r = eigendecompose_general(&build_pt_hamiltonian(&p).to_complex()).unwrap();
        for e in &r.eigenvalues {
            let d = r
                .eigenvalues
                .iter()
                .map(|f| (f - e.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            closure = closure.max(d);
        }
    }
    pass &= closure < 1e-8;
    notes.push(format!("PT closure {closure:.1e}"));

    // trace, Hermiticity, positivity of ρ(t)
    let p = params(20, 0.2 * PI, 0.1);
    let model = build_truncated_lindblad(&p);
    let psi = prepare_initial_state(&InitialStateSpec::edge_left(), &p).unwrap();
    let grid = TimeGrid::new(200.0, 0.01, 100).unwrap();
    let (mut trace, mut herm, mut neg) = (0.0f64, 0.0f64, 0.0f64);
    let master = evolve_master_observed(&DensityMatrix::from_pure(&psi), &model, &grid, 4, |_, _, rho| {
        let tr: C64 = rho.diagonal().iter().sum();
        trace = trace.max((tr.re - 1.0).abs());
        herm = herm.max((rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let d = DensityMatrix::new(rho.clone()).unwrap();
        neg = neg.min(d.min_eigenvalue());
    })
    .unwrap();
    pass &= trace < 1e-6 && herm < 1e-10 && neg > -1e-8;
    notes.push(format!("trace {trace:.1e}, hermiticity {herm:.1e}, min eigenvalue {neg:.1e}"));

    // completeness for every truncated-model engine
    let traj = sample_trajectories(&psi, &model, &grid, 64, 3).unwrap();
    let closed_p = params(20, 0.2 * PI, 0.0);
    let closed = evolve_closed_spectral(&psi, &closed_p, &grid).unwrap();
    let completeness = [master.completeness_error(), traj.completeness_error(), closed.completeness_error()]
        .into_iter()
        .fold(0.0, f64::max);
    pass &= completeness < 1e-8;
    notes.push(format!("completeness {completeness:.1e}"));

    // Monte Carlo error shrinks as 1/sqrt(n_traj)
    let p6 = params(6, 0.1 * PI, 0.1);
    let m6 = build_truncated_lindblad(&p6);
    let g6 = TimeGrid::new(40.0, 0.05, 80).unwrap();
    let psi6 = FockState::site(6, 1).unwrap();
    let exact = evolve_master_rk4(
        &DensityMatrix::from_pure(&psi6),
        &m6,
        &TimeGrid::new(40.0, 0.01, 80).unwrap(),
    )
    .unwrap();
    let rms = |n: usize, seed: u64| {
        let s = sample_trajectories(&psi6, &m6, &g6, n, seed).unwrap();
        let d = &s.per_site_mean - &exact.per_site_mean;
        (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt()
    };
    let ratio = rms(500, 11) / rms(2000, 12);
    pass &= (2.0 / 1.5..=2.0 * 1.5).contains(&ratio);
    notes.push(format!("rms(500)/rms(2000) = {ratio:.3}"));

    // bit-identical reruns across worker counts
    let run = |threads| {
        let opts = TrajectoryOptions {
            threads: Some(threads),
            ..TrajectoryOptions::new(100, 99)
        };
        run_ensemble(&psi6, &m6, &g6, &opts).unwrap()
    };
    let identical = run(1) == run(4) && run(1) == run(1);
    pass &= identical;
    notes.push(format!("bit-identical across workers: {identical}"));

    // sanity: the edge-state labels were computed at a gapped reference
    let r = classify_edge_states(
        &eigendecompose_hermitian(build_ssh_hamiltonian(&p).as_real().unwrap()).unwrap(),
        &p,
        &EdgeCriteria::default(),
    )
    .unwrap();
    pass &= r.status == LabelStatus::Classified;

    report(8, "structure and conservation", pass, notes.join("; "));
    pass
}

fn main() {
    let checks: [(&str, fn() -> bool); 8] = [
        ("criterion_1_zak_phase_transition", criterion_1_zak_phase_transition),
        ("criterion_2_pt_breaking_count", criterion_2_pt_breaking_count),
        ("criterion_3_closed_system_kink", criterion_3_closed_system_kink),
        ("criterion_4_open_system_edge_dominance", criterion_4_open_system_edge_dominance),
        ("criterion_5_open_system_trivial_phase", criterion_5_open_system_trivial_phase),
        ("criterion_6_sharper_open_system_kink", criterion_6_sharper_open_system_kink),
        ("criterion_7_engine_oracle_equivalence", criterion_7_engine_oracle_equivalence),
        ("criterion_8_structure_and_conservation", criterion_8_structure_and_conservation),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        if !check() {
            failed.push(name);
        }
    }
    println!("acceptance: {} of {ran} checks passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
