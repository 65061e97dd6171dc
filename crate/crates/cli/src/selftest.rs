//! The acceptance suite: nine fixed-seed criteria exercising the whole
//! toolkit against its exact oracles, each with pinned tolerances.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use rfim_core::blocks::{
    block_dynamics_gap_check, block_geometry_report, block_update_stationarity_drift,
    build_blocks, classify, GoodBadParams,
};
use rfim_core::exact::ExactGibbs;
use rfim_core::glauber::{CouplingMode, CouplingState};
use rfim_core::lattice::Domain;
use rfim_core::mixing::{
    all_pairs, cov_delta_domination, wsm_scan, DeltaMethod, EllRule,
};
use rfim_core::rfim::{sample_field, FieldKind, FieldSpec, RfimInstance};
use rfim_core::rng::{derive_seed, replica_stream, stream, StreamTag};
use rfim_core::sampler::{
    plant_griffiths_field, planted_region, relaxation_probe, validate_incremental_with_order,
    warm_start_bound, warm_start_ratio_with_order, PlantSpec, ProbeSettings, SamplerConfig,
    ZetaPattern,
};
use rfim_core::sloc::{
    bayes_posterior_probs, martingale_check, sl_trajectory, supermartingale_checks,
    variance_decay_check, SigmaStarSource,
};
use rfim_core::stats::{mean, stderr};

use crate::experiments::{gap_fixture, side_box};

const MASTER: u64 = 20240817;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} ({}): {} - {} [{:.1}s]",
            self.index,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.seconds
        )
    }
}

fn outcome(
    index: usize,
    name: &'static str,
    started: Instant,
    pass: bool,
    detail: String,
) -> CriterionOutcome {
    CriterionOutcome { index, name, pass, detail, seconds: started.elapsed().as_secs_f64() }
}

/// Random small instance: rectangular sub-box of Z^d with gaussian field.
fn random_instance(index: u64, max_n: usize, max_d: usize, beta_max: f64) -> RfimInstance {
    let mut rng = stream(MASTER, StreamTag::Probe, 1000 + index, 0, 0);
    let d = 1 + (index as usize % max_d);
    let sides: Vec<i64> = match d {
        1 => vec![rng.random_range(2..=max_n as i64)],
        2 => {
            let a = rng.random_range(2..=3i64);
            let b_max = (max_n as i64 / a).clamp(2, 4);
            vec![a, rng.random_range(2..=b_max)]
        }
        _ => {
            if max_n >= 12 {
                vec![2, 2, rng.random_range(2..=3i64)]
            } else {
                vec![2, 2, 2]
            }
        }
    };
    let mut rows: Vec<Vec<i64>> = vec![vec![]];
    for &s in &sides {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (0..s).map(move |x| {
                    let mut r2 = r.clone();
                    r2.push(x);
                    r2
                })
            })
            .collect();
    }
    let dom = Arc::new(Domain::from_coords(d, rows).unwrap());
    let field =
        sample_field(&FieldSpec::gaussian(1.0, derive_seed(MASTER, StreamTag::Field, index, 9)), &dom)
            .unwrap();
    let beta = beta_max * rng.random::<f64>();
    RfimInstance::new(dom, beta, field).unwrap()
}

/// Criterion 1: table normalization, detailed balance, and the
/// variational characterization of the spectral gap.
pub fn criterion_1() -> CriterionOutcome {
    let start = Instant::now();
    let results: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(i, 12, 3, 1.5);
            let g = ExactGibbs::enumerate(&inst).unwrap();
            let norm = (g.probs().iter().sum::<f64>() - 1.0).abs();
            (norm, g.detailed_balance_residual())
        })
        .collect();
    let worst_norm = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_db = results.iter().map(|r| r.1).fold(0.0, f64::max);

    let gap_errs: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(500 + i, 8, 3, 1.5);
            let g = ExactGibbs::enumerate(&inst).unwrap();
            let spec = g.generator_spectrum().unwrap();
            // the eigenfunction achieves the variational value
            let achieved =
                g.dirichlet_form(&spec.gap_function) / g.variance_table(&spec.gap_function);
            let mut err = (achieved - spec.gap).abs();
            // random test functions never undercut it
            let m = g.num_configs();
            let weights = g.dirichlet_pair_weights();
            let mut rng = replica_stream(MASTER, StreamTag::TestFunction, 40 + i);
            let mut phi = vec![0.0f64; m];
            for _ in 0..100_000 {
                for slot in phi.iter_mut() {
                    *slot = rng.random();
                }
                let var = g.variance_table(&phi);
                if var > 1e-9 {
                    let dirichlet: f64 = weights
                        .iter()
                        .map(|&(a, b, w)| {
                            let df = phi[a] - phi[b];
                            w * df * df
                        })
                        .sum();
                    let ratio = dirichlet / var;
                    if ratio < spec.gap {
                        err = err.max(spec.gap - ratio);
                    }
                }
            }
            err
        })
        .collect();
    let worst_gap = gap_errs.iter().cloned().fold(0.0, f64::max);

    let pass = worst_norm < 1e-12 && worst_db < 1e-12 && worst_gap <= 1e-9;
    outcome(
        1,
        "exactness core",
        start,
        pass,
        format!(
            "max |sum(p)-1| = {worst_norm:.2e}, max detailed-balance residual = {worst_db:.2e}, \
             max variational gap error = {worst_gap:.2e} (200 tables, 20 spectra)"
        ),
    )
}

/// Criterion 2: grand-coupling order preservation and FKG covariances.
pub fn criterion_2() -> CriterionOutcome {
    let start = Instant::now();
    let violation_counts: Vec<u64> = (0..50u64)
        .into_par_iter()
        .map(|rep| {
            let inst = random_instance(2000 + rep, 9, 2, 1.0);
            let rng = replica_stream(MASTER, StreamTag::Coupling, 60 + rep);
            let mut c = CouplingState::extreme(inst, CouplingMode::Monotone, rng).unwrap();
            c.run_events(20_000);
            c.order_violations()
        })
        .collect();
    let total_events = 50u64 * 20_000;
    let violations: u64 = violation_counts.iter().sum();

    // monotone-pair covariances under the exact table
    let min_cov: f64 = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(3000 + i, 8, 3, 1.0);
            let g = ExactGibbs::enumerate(&inst).unwrap();
            let n = inst.len();
            let m = g.num_configs();
            let mut rng = stream(MASTER, StreamTag::TestFunction, 70, i, 0);
            // increasing family: site spins plus random monotone min/max
            let mut family: Vec<Vec<f64>> = (0..n)
                .map(|v| (0..m).map(|c| if c >> v & 1 == 1 { 1.0 } else { -1.0 }).collect())
                .collect();
            for _ in 0..8 {
                let subset: Vec<usize> =
                    (0..n).filter(|_| rng.random::<bool>()).collect();
                if subset.is_empty() {
                    continue;
                }
                let take_min: bool = rng.random();
                family.push(
                    (0..m)
                        .map(|c| {
                            let vals =
                                subset.iter().map(|&v| if c >> v & 1 == 1 { 1.0 } else { -1.0 });
                            if take_min {
                                vals.fold(1.0f64, f64::min)
                            } else {
                                vals.fold(-1.0f64, f64::max)
                            }
                        })
                        .collect(),
                );
            }
            let mut min_cov = f64::INFINITY;
            for a in 0..family.len() {
                for b in a..family.len() {
                    let mean_a = g.mean_table(&family[a]);
                    let mean_b = g.mean_table(&family[b]);
                    let cov = (0..m)
                        .map(|c| g.prob(c) * (family[a][c] - mean_a) * (family[b][c] - mean_b))
                        .sum::<f64>();
                    min_cov = min_cov.min(cov);
                }
            }
            min_cov
        })
        .reduce(|| f64::INFINITY, f64::min);

    let pass = violations == 0 && min_cov >= -1e-12;
    outcome(
        2,
        "FKG / monotonicity",
        start,
        pass,
        format!(
            "{violations} order violations in {total_events} coupled events, \
             min increasing-pair covariance = {min_cov:.2e}"
        ),
    )
}

/// Criterion 3: covariance dominated by boundary influence.
pub fn criterion_3() -> CriterionOutcome {
    let start = Instant::now();
    let reports: Vec<(bool, f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(4000 + 2 * i, 12, 2, 1.0);
            let pairs = all_pairs(&inst);
            let rep =
                cov_delta_domination(&inst, &pairs, &EllRule::AllSeparating, 1e-12).unwrap();
            (rep.ok, rep.min_covariance, rep.worst_margin)
        })
        .collect();
    let all_ok = reports.iter().all(|r| r.0);
    let min_cov = reports.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let worst_margin = reports.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    outcome(
        3,
        "covariance-delta domination",
        start,
        all_ok,
        format!(
            "200 instances, min covariance = {min_cov:.2e}, worst delta margin = {worst_margin:.2e}"
        ),
    )
}

/// Criterion 4: stochastic-localization structure.
pub fn criterion_4() -> CriterionOutcome {
    let start = Instant::now();
    let replicas = 10_000;
    let times = [0.0, 0.5, 1.0, 2.0];

    // 2x2 square for the martingale and variance checks
    let square = Arc::new(
        Domain::from_coords(2, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap(),
    );
    let field = sample_field(
        &FieldSpec::gaussian(1.0, derive_seed(MASTER, StreamTag::Field, 11, 0)),
        &square,
    )
    .unwrap();
    let inst = RfimInstance::new(Arc::clone(&square), 0.5, field).unwrap();
    let event: Vec<usize> = vec![0, 3, 5, 6, 9, 12, 15];
    let mart = martingale_check(&inst, &event, &times, replicas, MASTER + 1).unwrap();
    let mut rng = replica_stream(MASTER, StreamTag::TestFunction, 80);
    let phi16: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
    let var = variance_decay_check(&inst, &phi16, &times, replicas, MASTER + 2).unwrap();

    // 3x3 box for the delta and Dirichlet supermartingales
    let box3 = Arc::new(Domain::make_box(1, 2).unwrap());
    let field3 = sample_field(
        &FieldSpec::gaussian(1.0, derive_seed(MASTER, StreamTag::Field, 12, 0)),
        &box3,
    )
    .unwrap();
    let inst3 = RfimInstance::new(Arc::clone(&box3), 0.6, field3).unwrap();
    let o = box3.id_of(&[0, 0]).unwrap();
    let phi512: Vec<f64> = (0..512).map(|_| rng.random::<f64>()).collect();
    let sup =
        supermartingale_checks(&inst3, o, 1, &phi512, &times, replicas, MASTER + 3).unwrap();

    // exact tilt-versus-Bayes identity on N <= 6
    let mut tilt_tv = 0.0f64;
    for (di, rows) in [
        (1usize, (0..5i64).map(|x| vec![x]).collect::<Vec<_>>()),
        (2, (0..2i64).flat_map(|x| (0..3).map(move |y| vec![x, y])).collect()),
    ] {
        let dom = Arc::new(Domain::from_coords(di, rows).unwrap());
        let f = sample_field(
            &FieldSpec::gaussian(1.0, derive_seed(MASTER, StreamTag::Field, 13 + di as u64, 0)),
            &dom,
        )
        .unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.7, f).unwrap();
        let base = ExactGibbs::enumerate(&inst).unwrap();
        for rep in 0..50u64 {
            let mut rng = stream(MASTER + 4, StreamTag::Localization, rep, di as u64, 0);
            let traj =
                sl_trajectory(&inst, &[0.0, 0.8, 2.5], SigmaStarSource::Exact, &mut rng).unwrap();
            for k in 0..traj.times.len() {
                let tilted = ExactGibbs::enumerate(&traj.instance_at(k).unwrap()).unwrap();
                let posterior = bayes_posterior_probs(&base, &traj.tilts[k], traj.times[k]);
                let tv: f64 = 0.5
                    * (0..base.num_configs())
                        .map(|c| (tilted.prob(c) - posterior[c]).abs())
                        .sum::<f64>();
                tilt_tv = tilt_tv.max(tv);
            }
        }
    }

    let pass = mart.max_abs_z <= 3.0
        && var.nonincreasing
        && sup.delta_ok
        && sup.dirichlet_ok
        && tilt_tv < 1e-10;
    outcome(
        4,
        "stochastic localization structure",
        start,
        pass,
        format!(
            "martingale max |z| = {:.2}, variance nonincreasing = {}, delta supermartingale = {}, \
             dirichlet supermartingale = {}, tilt-vs-Bayes TV = {tilt_tv:.2e} ({replicas} replicas)",
            mart.max_abs_z, var.nonincreasing, sup.delta_ok, sup.dirichlet_ok
        ),
    )
}

/// Criterion 5: incremental sampler validation and warm-start ratios.
pub fn criterion_5() -> CriterionOutcome {
    let start = Instant::now();
    let runs = 100_000;
    let beta = 0.5;
    let mut details = Vec::new();
    let mut pass = true;
    for (label, side) in [("2x2", 2i64), ("3x3", 3)] {
        let (domain, order) = side_box(side, 2).unwrap();
        let d = 2;
        for draw in 0..3u64 {
            let spec = FieldSpec::gaussian(
                1.0,
                derive_seed(MASTER, StreamTag::Field, 20 + draw, side as u64),
            );
            let field = sample_field(&spec, &domain).unwrap();
            let cfg = SamplerConfig {
                c_star: 4.0,
                step_override: None,
                seed: derive_seed(MASTER, StreamTag::Sampler, draw, side as u64),
            };
            let reports = validate_incremental_with_order(
                &domain,
                beta,
                &field,
                &cfg,
                order.clone(),
                runs,
            )
            .unwrap();
            let last = reports.last().unwrap();
            if last.empirical_tv >= 0.02 {
                pass = false;
            }
            details.push(format!("{label}#{draw} TV={:.4}", last.empirical_tv));
            let bound = warm_start_bound(d, beta);
            for i in 2..=order.len() {
                let r =
                    warm_start_ratio_with_order(&domain, beta, &field, &order, i).unwrap();
                if r > bound + 1e-9 {
                    pass = false;
                    details.push(format!("{label}#{draw} stage {i} ratio {r:.3} > {bound:.3}"));
                }
            }
        }
    }
    outcome(5, "incremental sampler", start, pass, details.join(", "))
}

/// Criterion 6: block-dynamics machinery.
pub fn criterion_6() -> CriterionOutcome {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();

    // gap inequality on the three dense-spectrum fixtures
    for name in ["interval3", "path4", "box2x3"] {
        let (inst, blocks) =
            gap_fixture(name, 0.6, derive_seed(MASTER, StreamTag::Field, 30, 0)).unwrap();
        let rep = block_dynamics_gap_check(&inst, &blocks).unwrap();
        if !rep.ok {
            pass = false;
        }
        details.push(format!("{name}: gap {:.4} >= rhs {:.4}", rep.gap_single, rep.rhs));
    }

    // exact stationarity of randomized block updates
    let mut worst_drift = 0.0f64;
    for i in 0..3u64 {
        let inst = random_instance(6000 + i, 8, 2, 1.0);
        let n = inst.len();
        let blocks: Vec<Vec<usize>> = vec![
            (0..n / 2 + 1).collect(),
            (n / 2..n).collect(),
            (0..n).filter(|v| v % 2 == 0).collect(),
        ];
        let drift = block_update_stationarity_drift(&inst, &blocks).unwrap();
        worst_drift = worst_drift.max(drift);
    }
    if worst_drift >= 1e-10 {
        pass = false;
    }
    details.push(format!("block-update drift {worst_drift:.2e}"));

    // geometry ratio bound on classified instances
    let geo: Vec<(bool, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let r_coarse = [8u32, 12, 16][i as usize % 3];
            let n = r_coarse as i64;
            let dom = Arc::new(Domain::make_box(n, 2).unwrap());
            let mut field = sample_field(
                &FieldSpec::two_point(10.0, derive_seed(MASTER, StreamTag::Field, 31, i)),
                &dom,
            )
            .unwrap();
            // plant a weak-field square to force Bad sites on some draws
            if i % 2 == 0 {
                let mut rng = stream(MASTER, StreamTag::Probe, 32, i, 0);
                let half = r_coarse as i64 / 2;
                let cx = rng.random_range(-(n - half)..=(n - half));
                let cy = rng.random_range(-(n - half)..=(n - half));
                for v in 0..dom.len() {
                    let c = dom.coords_of(v);
                    if (c[0] - cx).abs() <= half && (c[1] - cy).abs() <= half {
                        field[v] = 0.0;
                    }
                }
            }
            let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field).unwrap();
            let params = GoodBadParams::anticoncentration(
                5.0,
                r_coarse,
                1024,
                derive_seed(MASTER, StreamTag::Classify, i, 0),
            );
            let grid = classify(&inst, &params).unwrap();
            let blocks = build_blocks(&dom, &grid).unwrap();
            let rep = block_geometry_report(&dom, &blocks).unwrap();
            (rep.ok, rep.max_ratio, rep.ratio_bound)
        })
        .collect();
    let geo_ok = geo.iter().all(|g| g.0);
    if !geo_ok {
        pass = false;
    }
    let worst = geo.iter().map(|g| g.1 / g.2).fold(0.0f64, f64::max);
    details.push(format!("50 classified geometries ok = {geo_ok} (worst ratio/bound {worst:.2})"));

    outcome(6, "block machinery", start, pass, details.join("; "))
}

/// Criterion 7: weak-spatial-mixing decay trends.
pub fn criterion_7() -> CriterionOutcome {
    let start = Instant::now();
    let exact = wsm_scan(
        2,
        0.3,
        &FieldKind::Fixed { values: vec![0.0; 81] },
        &[1, 2, 3],
        1,
        DeltaMethod::Exact,
        0.0,
        MASTER + 7,
    )
    .unwrap();
    let means: Vec<f64> = exact.rows.iter().map(|r| r.mean).collect();
    let strictly_decreasing = means[0] > means[1] && means[1] > means[2];
    let exact_fit = exact.fit.unwrap();

    let mc = wsm_scan(
        2,
        1.0,
        &FieldKind::Gaussian { sigma2: 25.0 },
        &[1, 2, 3],
        600,
        DeltaMethod::CoupledMc,
        30.0,
        MASTER + 8,
    )
    .unwrap();
    let mc_means: Vec<f64> = mc.rows.iter().map(|r| r.mean).collect();
    let mc_decreasing = mc_means[0] > mc_means[1] && mc_means[1] > mc_means[2];
    let mc_fit = mc.fit.unwrap();
    let mc_significant = mc_fit.slope + 3.0 * mc_fit.slope_stderr < 0.0;

    let pass = strictly_decreasing && exact_fit.slope < -0.2 && mc_decreasing && mc_significant;
    outcome(
        7,
        "WSM decay trend",
        start,
        pass,
        format!(
            "exact means {:?} slope {:.3}; mc means {:?} slope {:.3} +- {:.3}",
            means.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            exact_fit.slope,
            mc_means.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            mc_fit.slope,
            mc_fit.slope_stderr
        ),
    )
}

/// Criterion 8: planted-field Griffiths slowdown.
pub fn criterion_8() -> CriterionOutcome {
    let start = Instant::now();
    let d = 2;
    let n = 8;
    let beta = 1.0;
    let m = 3;
    let pairs = 200usize;
    let domain = Arc::new(Domain::make_box(n, d).unwrap());
    let log_ratios: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|rep| {
            let base = sample_field(
                &FieldSpec::gaussian(
                    1.0,
                    derive_seed(MASTER, StreamTag::Field, 40 + rep as u64, 0),
                ),
                &domain,
            )
            .unwrap();
            let plant = PlantSpec::centered(
                m,
                d,
                ZetaPattern::Quadrant,
                derive_seed(MASTER, StreamTag::Field, 41, rep as u64),
            );
            let planted_field = plant_griffiths_field(&domain, &plant, &base).unwrap();
            let region = planted_region(&domain, &plant);
            let settings = ProbeSettings {
                dt: 1.0,
                run_time: 4000.0,
                burn_in: 400.0,
                replicas: 1,
                seed: derive_seed(MASTER, StreamTag::Probe, 42, rep as u64),
            };
            let typical = relaxation_probe(
                &RfimInstance::new(Arc::clone(&domain), beta, base).unwrap(),
                &region,
                &settings,
            )
            .unwrap();
            let planted = relaxation_probe(
                &RfimInstance::new(Arc::clone(&domain), beta, planted_field).unwrap(),
                &region,
                &settings,
            )
            .unwrap();
            (planted.tau_mean / typical.tau_mean).ln()
        })
        .collect();
    let m_log = mean(&log_ratios);
    let se_log = stderr(&log_ratios);
    let threshold = 5f64.ln();
    let pass = m_log - 3.0 * se_log >= threshold;
    outcome(
        8,
        "Griffiths slowdown witness",
        start,
        pass,
        format!(
            "mean log tau-ratio = {m_log:.3} (ratio {:.1}x), 3-sigma lower bound {:.3} vs log 5 = {threshold:.3} ({pairs} pairs)",
            m_log.exp(),
            m_log - 3.0 * se_log
        ),
    )
}

/// Criterion 9: identical artifacts across worker counts.
pub fn criterion_9() -> CriterionOutcome {
    let start = Instant::now();
    let config_text = "\
[experiment]
name = wsm-scan

[model]
d = 2
beta = 0.4
field = gaussian
sigma2 = 1.0

[method]
radii = 1,2
replicas = 24
method = exact
";
    let run = |workers: usize, dir: &std::path::Path| -> Result<Vec<u8>, String> {
        let config = crate::config::Config::parse(config_text).map_err(|e| e.to_string())?;
        let opts = crate::experiments::RunOptions {
            seed: Some(MASTER + 9),
            workers: Some(workers),
            out: Some(dir.to_path_buf()),
        };
        crate::experiments::run_experiment(&config, &opts).map_err(|e| e.to_string())?;
        let mut all = Vec::new();
        for name in ["scan.csv", "fit.txt"] {
            all.extend(std::fs::read(dir.join(name)).map_err(|e| e.to_string())?);
        }
        Ok(all)
    };
    let base = std::env::temp_dir().join(format!("rfim-selftest-{}", std::process::id()));
    let dir1 = base.join("w1");
    let dir2 = base.join("w2");
    let result = (|| -> Result<bool, String> {
        let a = run(1, &dir1)?;
        let b = run(2, &dir2)?;
        Ok(a == b)
    })();
    let _ = std::fs::remove_dir_all(&base);
    match result {
        Ok(identical) => outcome(
            9,
            "reproducibility across workers",
            start,
            identical,
            format!("artifacts byte-identical across 1 and 2 workers: {identical}"),
        ),
        Err(e) => outcome(9, "reproducibility across workers", start, false, e),
    }
}

pub fn run_criterion(index: usize) -> Option<CriterionOutcome> {
    match index {
        1 => Some(criterion_1()),
        2 => Some(criterion_2()),
        3 => Some(criterion_3()),
        4 => Some(criterion_4()),
        5 => Some(criterion_5()),
        6 => Some(criterion_6()),
        7 => Some(criterion_7()),
        8 => Some(criterion_8()),
        9 => Some(criterion_9()),
        _ => None,
    }
}

/// Run the whole suite, printing one line per criterion.
pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=9)
        .map(|i| {
            let out = run_criterion(i).unwrap();
            println!("{}", out.line());
            out
        })
        .collect()
}
