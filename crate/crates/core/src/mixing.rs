//! Spatial-mixing functionals: the boundary-influence total variation
//! `delta(u, l)`, weak/strong spatial mixing scans over quenched
//! disorder, and the covariance-versus-delta domination check.
//!
//! Exact values come from two routes: full Gibbs tables when the pinned
//! ball is small, and a sequential variable-elimination sweep over the
//! vertex order otherwise. The elimination keeps a table over the active
//! frontier (processed vertices that still have unprocessed neighbors),
//! so planar balls of radius 3 are exact in microseconds where a full
//! table would need 2^49 states.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::glauber::{CouplingMode, CouplingState};
use crate::lattice::{linf_dist, VertexId};
use crate::rfim::{RfimInstance, SpinConfig};
use crate::rng::{derive_seed, stream, StreamTag};
use crate::stats::{binomial_stderr, mean, ols_fit, stderr};

/// Frontier tables are capped at 2^22 states.
const FRONTIER_MAX_BITS: usize = 22;

/// Exact `P(sigma_target = +1)` by sequential variable elimination in
/// vertex-id order. Works on any instance whose elimination frontier
/// stays below 2^22 states; lexicographic ids keep the
/// frontier at one hyperplane for boxes and balls.
pub fn exact_plus_marginal(inst: &RfimInstance, target: VertexId) -> Result<f64> {
    let n = inst.len();
    if target >= n {
        return Err(Error::VertexNotInDomain(vec![target as i64]));
    }
    // last position at which each vertex is still needed
    let mut last_use: Vec<usize> = (0..n)
        .map(|v| inst.domain.neighbor_ids(v).into_iter().max().unwrap_or(v).max(v))
        .collect();
    last_use[target] = usize::MAX;

    let mut frontier: Vec<VertexId> = Vec::new();
    let mut table: Vec<f64> = vec![1.0];
    let beta = inst.beta;

    for v in 0..n {
        if frontier.len() + 1 > FRONTIER_MAX_BITS {
            return Err(Error::FrontierTooWide(1 << (frontier.len() + 1)));
        }
        // positions of earlier neighbors in the frontier
        let nbr_positions: Vec<usize> = inst
            .domain
            .neighbor_ids(v)
            .into_iter()
            .filter(|&w| w < v)
            .map(|w| frontier.iter().position(|&f| f == w).expect("neighbor retired too early"))
            .collect();
        let h_v = inst.field()[v];
        let f = frontier.len();
        let mut next = vec![0.0f64; 1 << (f + 1)];
        for (mask, &weight) in table.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let mut env = 0.0;
            for &pos in &nbr_positions {
                env += if mask >> pos & 1 == 1 { 1.0 } else { -1.0 };
            }
            let m_v = beta * env + h_v;
            next[mask] += weight * (-m_v).exp();
            next[mask | 1 << f] += weight * m_v.exp();
        }
        frontier.push(v);
        table = next;

        // retire frontier vertices whose neighbors are all processed
        loop {
            let done = frontier.iter().position(|&u| last_use[u] <= v);
            match done {
                None => break,
                Some(j) => {
                    let f = frontier.len();
                    let mut reduced = vec![0.0f64; 1 << (f - 1)];
                    for (mask, r) in reduced.iter_mut().enumerate() {
                        let low = mask & ((1 << j) - 1);
                        let high = (mask >> j) << (j + 1);
                        *r = table[high | low] + table[high | low | 1 << j];
                    }
                    frontier.remove(j);
                    table = reduced;
                }
            }
        }

        // rescale to keep weights in range; scale factors cancel in the
        // final ratio
        let max = table.iter().cloned().fold(0.0f64, f64::max);
        if max > 1e100 || (max > 0.0 && max < 1e-100) {
            let inv = 1.0 / max;
            for w in table.iter_mut() {
                *w *= inv;
            }
        }
    }
    debug_assert_eq!(frontier, vec![target]);
    let z_minus = table[0];
    let z_plus = table[1];
    Ok(z_plus / (z_plus + z_minus))
}

/// How a delta estimate was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    Exact,
    CoupledMc,
}

impl DeltaMethod {
    pub fn name(self) -> &'static str {
        match self {
            DeltaMethod::Exact => "exact",
            DeltaMethod::CoupledMc => "coupled-mc",
        }
    }
}

/// Monte-Carlo settings for the coupled estimator.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub burn_in: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct DeltaEstimate {
    pub site: VertexId,
    pub radius: i64,
    pub value: f64,
    pub stderr: f64,
    pub method: DeltaMethod,
}

/// Boundary-influence TV at `u` for the ball of radius `l`: the distance
/// between the site marginals under all-plus and all-minus pinning of
/// the ball's exterior boundary.
///
/// The exact route eliminates variables; the coupled route runs the
/// monotone grand coupling between the two pinned instances from extreme
/// starts, whose disagreement frequency at `u` upper-bounds the exact
/// value at any burn-in.
pub fn delta(
    inst: &RfimInstance,
    u: VertexId,
    ell: i64,
    method: DeltaMethod,
    mc: Option<McSettings>,
) -> Result<DeltaEstimate> {
    if u >= inst.len() {
        return Err(Error::VertexNotInDomain(vec![u as i64]));
    }
    let center = inst.domain.coords_of(u).to_vec();
    let ball: Vec<VertexId> = (0..inst.len())
        .filter(|&w| linf_dist(inst.domain.coords_of(w), &center) <= ell)
        .collect();
    if ball.is_empty() {
        return Err(Error::VertexNotInDomain(center));
    }
    if inst.domain.boundary_of(&ball).is_empty() {
        // free boundary: the two pinned instances coincide
        return Ok(DeltaEstimate { site: u, radius: ell, value: 0.0, stderr: 0.0, method });
    }
    let (minus_inst, ids) = inst.pin_uniform(&ball, -1)?;
    let (plus_inst, _) = inst.pin_uniform(&ball, 1)?;
    let u_local = ids.iter().position(|&w| w == u).unwrap();
    match method {
        DeltaMethod::Exact => {
            let p_plus = exact_plus_marginal(&plus_inst, u_local)?;
            let p_minus = exact_plus_marginal(&minus_inst, u_local)?;
            Ok(DeltaEstimate {
                site: u,
                radius: ell,
                value: (p_plus - p_minus).abs(),
                stderr: 0.0,
                method,
            })
        }
        DeltaMethod::CoupledMc => {
            let mc = mc.ok_or_else(|| Error::invalid("coupled-mc requires settings"))?;
            let nb = minus_inst.len();
            let disagreements: usize = (0..mc.replicas)
                .into_par_iter()
                .map(|rep| {
                    let rng =
                        stream(mc.seed, StreamTag::Coupling, rep as u64, u as u64, ell as u64);
                    let mut c = CouplingState::new(
                        minus_inst.clone(),
                        plus_inst.clone(),
                        SpinConfig::all_minus(nb),
                        SpinConfig::all_plus(nb),
                        CouplingMode::Monotone,
                        rng,
                    )
                    .expect("pinned pair is ordered");
                    c.run_coupled(mc.burn_in);
                    usize::from(c.sigma_lo().get(u_local) != c.sigma_hi().get(u_local))
                })
                .sum();
            let p = disagreements as f64 / mc.replicas as f64;
            Ok(DeltaEstimate {
                site: u,
                radius: ell,
                value: p,
                stderr: binomial_stderr(p, mc.replicas),
                method,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub radius: i64,
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub method: DeltaMethod,
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `-1/slope`, the fitted decay constant.
    pub c_hat: f64,
}

/// Per-radius means of a decay functional over quenched field replicas,
/// with a log-linear least-squares fit.
#[derive(Debug, Clone)]
pub struct DecayScan {
    pub rows: Vec<ScanRow>,
    pub fit: Option<DecayFit>,
}

impl DecayScan {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,mean,stderr,replicas,method")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{}",
                row.radius,
                row.mean,
                row.stderr,
                row.replicas,
                row.method.name()
            )?;
        }
        Ok(())
    }

    pub fn write_fit<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.fit {
            Some(f) => {
                writeln!(w, "slope={:.16e}", f.slope)?;
                writeln!(w, "slope_stderr={:.16e}", f.slope_stderr)?;
                writeln!(w, "intercept={:.16e}", f.intercept)?;
                writeln!(w, "r2={:.16e}", f.r2)?;
                writeln!(w, "C_hat={:.16e}", f.c_hat)?;
            }
            None => writeln!(w, "slope=undefined")?,
        }
        Ok(())
    }
}

fn fit_decay(rows: &[ScanRow]) -> Option<DecayFit> {
    const EPS_FLOOR: f64 = 1e-12;
    let pts: Vec<&ScanRow> = rows.iter().filter(|r| r.mean > 0.0).collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|r| r.radius as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|r| (r.mean + EPS_FLOOR).ln()).collect();
    let fit = ols_fit(&xs, &ys)?;
    // error propagation through the log and the OLS weights
    let mx = mean(&xs);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let var_slope: f64 = pts
        .iter()
        .zip(&xs)
        .map(|(r, x)| {
            let dlog = r.stderr / (r.mean + EPS_FLOOR);
            ((x - mx) / sxx * dlog).powi(2)
        })
        .sum();
    Some(DecayFit {
        slope: fit.slope,
        slope_stderr: var_slope.sqrt(),
        intercept: fit.intercept,
        r2: fit.r2,
        c_hat: -1.0 / fit.slope,
    })
}

/// Weak-spatial-mixing scan: for each radius, the mean over fresh field
/// draws of `delta(o, r)` on the origin-centered ball, with the decay
/// fit over radii. Field draws are independent across replicas.
#[allow(clippy::too_many_arguments)]
pub fn wsm_scan(
    d: usize,
    beta: f64,
    field_kind: &crate::rfim::FieldKind,
    radii: &[i64],
    replicas: usize,
    method: DeltaMethod,
    mc_burn_in: f64,
    master_seed: u64,
) -> Result<DecayScan> {
    let n = radii.iter().max().copied().unwrap_or(1) + 1;
    let domain = std::sync::Arc::new(crate::lattice::Domain::make_box(n, d)?);
    let o = domain.id_of(&vec![0i64; d]).unwrap();
    let cells: Vec<(usize, usize)> = radii
        .iter()
        .enumerate()
        .flat_map(|(ri, _)| (0..replicas).map(move |rep| (ri, rep)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(ri, rep)| {
            let spec = crate::rfim::FieldSpec {
                kind: field_kind.clone(),
                seed: derive_seed(master_seed, StreamTag::Field, rep as u64, 0),
            };
            let field = crate::rfim::sample_field(&spec, &domain)?;
            let inst = RfimInstance::new(std::sync::Arc::clone(&domain), beta, field)?;
            let mc = McSettings {
                burn_in: mc_burn_in,
                replicas: 1,
                seed: derive_seed(master_seed, StreamTag::Coupling, rep as u64, ri as u64),
            };
            // one coupling draw per field replica: the field replicas carry
            // the averaging, matching the quenched expectation
            let est = delta(&inst, o, radii[ri], method, Some(mc))?;
            Ok(est.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let vals: Vec<f64> = cells
            .iter()
            .zip(&values)
            .filter(|((i, _), _)| *i == ri)
            .map(|(_, &v)| v)
            .collect();
        rows.push(ScanRow { radius: r, mean: mean(&vals), stderr: stderr(&vals), replicas, method });
    }
    let fit = fit_decay(&rows);
    Ok(DecayScan { rows, fit })
}

/// Policy for the max over boundary configurations in the SSM
/// functional: exhaustive below the threshold, otherwise a candidate set
/// (all-plus, all-minus, field signs, random draws) reported as a lower
/// bound on the max.
#[derive(Debug, Clone, Copy)]
pub struct XiPolicy {
    pub exhaustive_max: usize,
    pub n_random: usize,
    pub seed: u64,
}

impl Default for XiPolicy {
    fn default() -> Self {
        XiPolicy { exhaustive_max: 16, n_random: 32, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SsmEstimate {
    /// Max (or candidate-set lower bound) over xi of the TV at the origin.
    pub max_tv: f64,
    /// Whether the max was exhaustive over all boundary configurations.
    pub exhaustive: bool,
    /// Number of xi configurations evaluated.
    pub evaluated: usize,
    /// Distance from the origin to the flipped boundary site.
    pub ell: i64,
}

/// Strong-spatial-mixing functional for a box `B = w + B_r(o)` and a
/// boundary site `z`: max over pinnings of the rest of the boundary of
/// the TV between the origin marginals when `z` is flipped.
pub fn ssm_functional(
    inst: &RfimInstance,
    offset: &[i64],
    r: i64,
    z_coords: &[i64],
    policy: &XiPolicy,
) -> Result<SsmEstimate> {
    let origin = vec![0i64; inst.domain.dim()];
    ssm_functional_at(inst, &origin, offset, r, z_coords, policy)
}

/// As [`ssm_functional`] but measured at an arbitrary center vertex:
/// the box is `center + offset + B_r` and the TV is at `center`.
pub fn ssm_functional_at(
    inst: &RfimInstance,
    center: &[i64],
    offset: &[i64],
    r: i64,
    z_coords: &[i64],
    policy: &XiPolicy,
) -> Result<SsmEstimate> {
    let d = inst.domain.dim();
    if offset.len() != d || offset.iter().any(|&w| w.abs() > r - 1) {
        return Err(Error::invalid("box offset must keep the center interior"));
    }
    let box_center: Vec<i64> = center.iter().zip(offset).map(|(c, w)| c + w).collect();
    let members: Vec<VertexId> = (0..inst.len())
        .filter(|&v| {
            inst.domain
                .coords_of(v)
                .iter()
                .zip(&box_center)
                .all(|(x, w)| (x - w).abs() <= r)
        })
        .collect();
    let bd = inst.domain.boundary_of(&members);
    let z = inst
        .domain
        .id_of(z_coords)
        .filter(|id| bd.contains(id))
        .ok_or_else(|| Error::invalid("z must lie on the box boundary"))?;
    let rest: Vec<VertexId> = bd.iter().copied().filter(|&w| w != z).collect();
    let ell = linf_dist(center, z_coords);

    let exhaustive = rest.len() <= policy.exhaustive_max;
    let mut xis: Vec<Vec<i8>> = Vec::new();
    if exhaustive {
        for code in 0..(1usize << rest.len()) {
            xis.push((0..rest.len()).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect());
        }
    } else {
        xis.push(vec![1; rest.len()]);
        xis.push(vec![-1; rest.len()]);
        xis.push(rest.iter().map(|&w| if inst.field()[w] >= 0.0 { 1 } else { -1 }).collect());
        let mut rng = stream(policy.seed, StreamTag::Probe, z as u64, r as u64, 0);
        for _ in 0..policy.n_random {
            xis.push(
                (0..rest.len())
                    .map(|_| if rand::Rng::random::<bool>(&mut rng) { 1 } else { -1 })
                    .collect(),
            );
        }
    }

    let o_local = {
        let (_, ids) = inst.pin_uniform(&members, 1)?;
        let o_parent = inst
            .domain
            .id_of(center)
            .ok_or_else(|| Error::invalid("center must be a domain vertex"))?;
        ids.iter()
            .position(|&w| w == o_parent)
            .ok_or_else(|| Error::invalid("center must lie inside the box"))?
    };

    let evaluated = xis.len();
    let max_tv = xis
        .par_iter()
        .map(|xi| {
            let mut tau: std::collections::HashMap<VertexId, i8> =
                rest.iter().copied().zip(xi.iter().copied()).collect();
            tau.insert(z, 1);
            let (plus_inst, _) = inst.pin(&members, &tau)?;
            tau.insert(z, -1);
            let (minus_inst, _) = inst.pin(&members, &tau)?;
            let p = exact_plus_marginal(&plus_inst, o_local)?;
            let q = exact_plus_marginal(&minus_inst, o_local)?;
            Ok((p - q).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok(SsmEstimate { max_tv, exhaustive, evaluated, ell })
}

/// SSM decay scan over flip distances: for each `l`, the box is shifted
/// so its far boundary face sits at distance `l` from the origin, and
/// the functional is averaged over fresh field draws.
#[allow(clippy::too_many_arguments)]
pub fn ssm_scan(
    d: usize,
    beta: f64,
    field_kind: &crate::rfim::FieldKind,
    r: i64,
    ells: &[i64],
    replicas: usize,
    policy: &XiPolicy,
    master_seed: u64,
) -> Result<DecayScan> {
    let n = 2 * r;
    let domain = std::sync::Arc::new(crate::lattice::Domain::make_box(n, d)?);
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        if !(2..=2 * r).contains(&ell) {
            return Err(Error::invalid("flip distance must satisfy 2 <= l <= 2r"));
        }
        let mut offset = vec![0i64; d];
        offset[0] = ell - r - 1;
        let mut z = vec![0i64; d];
        z[0] = ell;
        let vals: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|rep| {
                let spec = crate::rfim::FieldSpec {
                    kind: field_kind.clone(),
                    seed: derive_seed(master_seed, StreamTag::Field, rep as u64, 1),
                };
                let field = crate::rfim::sample_field(&spec, &domain)?;
                let inst = RfimInstance::new(std::sync::Arc::clone(&domain), beta, field)?;
                Ok(ssm_functional(&inst, &offset, r, &z, policy)?.max_tv)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(ScanRow {
            radius: ell,
            mean: mean(&vals),
            stderr: stderr(&vals),
            replicas,
            method: DeltaMethod::Exact,
        });
    }
    let fit = fit_decay(&rows);
    Ok(DecayScan { rows, fit })
}

/// Admissible separation radii for a pair `(u, v)`.
#[derive(Debug, Clone)]
pub enum EllRule {
    /// All `l` with `0 <= l < d_inf(u, v)`, so the pinned ring separates
    /// `u` from `v` (the largest admissible `l` is the boundary case).
    AllSeparating,
    Fixed(Vec<i64>),
}

#[derive(Debug, Clone)]
pub struct DominationReport {
    pub pairs_checked: usize,
    pub comparisons: usize,
    /// Most negative covariance entry seen (FKG says >= 0).
    pub min_covariance: f64,
    /// Minimum of `delta + tol - cov` over all comparisons (>= 0 iff ok).
    pub worst_margin: f64,
    pub ok: bool,
    pub failures: Vec<(VertexId, VertexId, i64, f64, f64)>,
}

/// Checks `0 <= Cov(u, v) <= delta(u, l) + tol` for each pair and each
/// admissible separation radius, with both sides exact.
pub fn cov_delta_domination(
    inst: &RfimInstance,
    pairs: &[(VertexId, VertexId)],
    rule: &EllRule,
    tol: f64,
) -> Result<DominationReport> {
    let gibbs = crate::exact::ExactGibbs::enumerate(inst)?;
    let cov = gibbs.covariance();
    let n = inst.len();
    let mut report = DominationReport {
        pairs_checked: 0,
        comparisons: 0,
        min_covariance: f64::INFINITY,
        worst_margin: f64::INFINITY,
        ok: true,
        failures: Vec::new(),
    };
    for &(u, v) in pairs {
        if u >= n || v >= n || u == v {
            return Err(Error::invalid("pairs must be distinct member vertices"));
        }
        report.pairs_checked += 1;
        let c_uv = cov[u * n + v];
        report.min_covariance = report.min_covariance.min(c_uv);
        if c_uv < -tol {
            report.ok = false;
            report.failures.push((u, v, -1, c_uv, f64::NAN));
        }
        let dist = linf_dist(inst.domain.coords_of(u), inst.domain.coords_of(v));
        let ells: Vec<i64> = match rule {
            EllRule::AllSeparating => (0..dist).collect(),
            EllRule::Fixed(list) => list.clone(),
        };
        for ell in ells {
            let est = delta(inst, u, ell, DeltaMethod::Exact, None)?;
            let margin = est.value + tol - c_uv;
            report.comparisons += 1;
            report.worst_margin = report.worst_margin.min(margin);
            if margin < 0.0 {
                report.ok = false;
                report.failures.push((u, v, ell, c_uv, est.value));
            }
        }
    }
    Ok(report)
}

/// All ordered pairs of distinct vertices (u as the conditioned site).
pub fn all_pairs(inst: &RfimInstance) -> Vec<(VertexId, VertexId)> {
    let n = inst.len();
    (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactGibbs;
    use crate::lattice::Domain;
    use crate::rfim::{sample_field, FieldKind, FieldSpec};
    use std::sync::Arc;

    fn gaussian_instance(n: i64, d: usize, beta: f64, sigma2: f64, seed: u64) -> RfimInstance {
        let dom = Arc::new(Domain::make_box(n, d).unwrap());
        let field = sample_field(&FieldSpec::gaussian(sigma2, seed), &dom).unwrap();
        RfimInstance::new(dom, beta, field).unwrap()
    }

    #[test]
    fn elimination_matches_full_table() {
        for seed in 0..8u64 {
            let inst = gaussian_instance(1, 2, 0.6, 1.0, 40 + seed);
            let g = ExactGibbs::enumerate(&inst).unwrap();
            for v in 0..9 {
                let elim = exact_plus_marginal(&inst, v).unwrap();
                let table = g.site_plus_prob(v);
                assert!(
                    (elim - table).abs() < 1e-12,
                    "site {v}: elimination {elim} vs table {table}"
                );
            }
        }
        // also on an irregular subset
        let dom = Domain::from_coords(
            2,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![2, 0], vec![2, 1], vec![1, 2]],
        )
        .unwrap();
        let field = sample_field(&FieldSpec::gaussian(0.5, 77), &dom).unwrap();
        let inst = RfimInstance::new(Arc::new(dom), 0.9, field).unwrap();
        let g = ExactGibbs::enumerate(&inst).unwrap();
        for v in 0..6 {
            assert!((exact_plus_marginal(&inst, v).unwrap() - g.site_plus_prob(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_trivial_cases() {
        // beta = 0: pinning has no influence
        let dom = Arc::new(Domain::make_box(2, 2).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 50), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.0, field).unwrap();
        let o = dom.id_of(&[0, 0]).unwrap();
        let est = delta(&inst, o, 1, DeltaMethod::Exact, None).unwrap();
        assert_eq!(est.value, 0.0);

        // ball covering the whole domain: free boundary, delta = 0
        let inst2 = gaussian_instance(1, 2, 0.8, 1.0, 51);
        let o2 = inst2.domain.id_of(&[0, 0]).unwrap();
        let est2 = delta(&inst2, o2, 5, DeltaMethod::Exact, None).unwrap();
        assert_eq!(est2.value, 0.0);
    }

    #[test]
    fn delta_low_temperature_order() {
        // d=2, beta=1, zero field, l=2: pinned 5x5 ball is strongly ordered
        let dom = Arc::new(Domain::make_box(3, 2).unwrap());
        let inst = RfimInstance::new(Arc::clone(&dom), 1.0, vec![0.0; dom.len()]).unwrap();
        let o = dom.id_of(&[0, 0]).unwrap();
        let est = delta(&inst, o, 2, DeltaMethod::Exact, None).unwrap();
        assert!(est.value > 0.9, "delta {}", est.value);
    }

    #[test]
    fn delta_monotone_in_radius() {
        let inst = gaussian_instance(3, 2, 0.45, 0.5, 52);
        let o = inst.domain.id_of(&[0, 0]).unwrap();
        let mut prev = f64::INFINITY;
        for ell in 0..=2 {
            let est = delta(&inst, o, ell, DeltaMethod::Exact, None).unwrap();
            assert!(est.value <= prev + 1e-12, "delta must be nonincreasing in l");
            prev = est.value;
        }
    }

    #[test]
    fn coupled_mc_upper_bounds_exact() {
        let inst = gaussian_instance(2, 2, 0.5, 1.0, 53);
        let o = inst.domain.id_of(&[0, 0]).unwrap();
        let exact = delta(&inst, o, 1, DeltaMethod::Exact, None).unwrap();
        let mc = delta(
            &inst,
            o,
            1,
            DeltaMethod::CoupledMc,
            Some(McSettings { burn_in: 8.0, replicas: 4000, seed: 54 }),
        )
        .unwrap();
        assert!(
            mc.value >= exact.value - 3.0 * mc.stderr,
            "mc {} should dominate exact {}",
            mc.value,
            exact.value
        );
    }

    #[test]
    fn wsm_scan_beta_zero_flags_fit() {
        let scan = wsm_scan(
            2,
            0.0,
            &FieldKind::Gaussian { sigma2: 1.0 },
            &[1, 2],
            5,
            DeltaMethod::Exact,
            0.0,
            60,
        )
        .unwrap();
        assert!(scan.rows.iter().all(|r| r.mean == 0.0));
        assert!(scan.fit.is_none());
    }

    #[test]
    fn wsm_scan_subcritical_decays() {
        // d=2, beta=0.3 < beta_c, zero field: exact scan over r in {1,2,3}
        let scan = wsm_scan(
            2,
            0.3,
            &FieldKind::Fixed { values: vec![0.0; 81] },
            &[1, 2, 3],
            1,
            DeltaMethod::Exact,
            0.0,
            61,
        )
        .unwrap();
        let means: Vec<f64> = scan.rows.iter().map(|r| r.mean).collect();
        assert!(means[0] > means[1] && means[1] > means[2], "means {means:?}");
        let fit = scan.fit.unwrap();
        assert!(fit.slope < -0.2, "slope {}", fit.slope);
    }

    #[test]
    fn wsm_scan_is_deterministic() {
        let run = || {
            wsm_scan(
                1,
                0.4,
                &FieldKind::Gaussian { sigma2: 1.0 },
                &[1, 2],
                8,
                DeltaMethod::Exact,
                0.0,
                62,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        }
    }

    #[test]
    fn ssm_exhaustive_interval() {
        // d=1 three-site interval: boundary has two sites; exhaustive max
        // over the single free site, checked against a table oracle
        let dom = Arc::new(Domain::make_box(2, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 63), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.7, field.clone()).unwrap();
        let est = ssm_functional(&inst, &[0], 1, &[2], &XiPolicy::default()).unwrap();
        assert!(est.exhaustive);
        assert_eq!(est.evaluated, 2);
        assert_eq!(est.ell, 2);

        let members: Vec<usize> = vec![1, 2, 3];
        let mut best = 0.0f64;
        for xi in [-1i8, 1] {
            let mut tau = std::collections::HashMap::new();
            tau.insert(dom.id_of(&[-2]).unwrap(), xi);
            tau.insert(dom.id_of(&[2]).unwrap(), 1);
            let (plus, ids) = inst.pin(&members, &tau).unwrap();
            tau.insert(dom.id_of(&[2]).unwrap(), -1);
            let (minus, _) = inst.pin(&members, &tau).unwrap();
            let o_local = ids.iter().position(|&w| w == dom.id_of(&[0]).unwrap()).unwrap();
            let gp = ExactGibbs::enumerate(&plus).unwrap();
            let gm = ExactGibbs::enumerate(&minus).unwrap();
            best = best.max(gp.tv_site_marginal(&gm, o_local).unwrap());
        }
        assert!((est.max_tv - best).abs() < 1e-12);
    }

    #[test]
    fn ssm_beta_zero_is_null() {
        let dom = Arc::new(Domain::make_box(2, 2).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 64), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.0, field).unwrap();
        let est = ssm_functional(&inst, &[0, 0], 1, &[2, 0], &XiPolicy::default()).unwrap();
        assert_eq!(est.max_tv, 0.0);
    }

    #[test]
    fn ssm_strong_fields_screen() {
        // two-point field with |h| >> beta: influence decays fast in l
        let scan = ssm_scan(
            2,
            0.5,
            &FieldKind::TwoPoint { a: 4.0 },
            1,
            &[2],
            6,
            &XiPolicy::default(),
            65,
        )
        .unwrap();
        assert!(scan.rows[0].mean < 0.05, "screened TV {}", scan.rows[0].mean);
    }

    #[test]
    fn domination_beta_zero() {
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 66), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.0, field).unwrap();
        let pairs = all_pairs(&inst);
        let rep = cov_delta_domination(&inst, &pairs, &EllRule::AllSeparating, 1e-12).unwrap();
        assert!(rep.ok, "failures: {:?}", rep.failures);
    }

    #[test]
    fn domination_random_instances() {
        // includes the boundary case l = d_inf(u,v) - 1
        for seed in 0..6u64 {
            let inst = gaussian_instance(1, 2, 0.5, 1.0, 70 + seed);
            let pairs = all_pairs(&inst);
            let rep =
                cov_delta_domination(&inst, &pairs, &EllRule::AllSeparating, 1e-12).unwrap();
            assert!(rep.ok, "seed {seed} failures: {:?}", rep.failures);
            assert!(rep.min_covariance >= -1e-12);
        }
    }

    #[test]
    fn scan_csv_format() {
        let scan = wsm_scan(
            1,
            0.3,
            &FieldKind::Gaussian { sigma2: 1.0 },
            &[1, 2],
            3,
            DeltaMethod::Exact,
            0.0,
            67,
        )
        .unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,mean,stderr,replicas,method\n1,"));
        let mut fit_buf = Vec::new();
        scan.write_fit(&mut fit_buf).unwrap();
        assert!(String::from_utf8(fit_buf).unwrap().contains("slope"));
    }
}
