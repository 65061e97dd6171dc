//! Incremental-domain sampling with warm starts, its validation against
//! exact Gibbs laws, and the planted slow-mixing construction.
//!
//! The sampler grows the box one vertex at a time along the nucleation
//! order; each stage runs the discrete uniform-site chain for
//! `k* = N^{C*}` steps from the previous stage's output concatenated
//! with an independent single-site draw. Stages are sequential by
//! construction; replicated runs parallelize over replicas.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactGibbs;
use crate::lattice::{nucleation_order, Domain, VertexId};
use crate::rfim::{conditional_split, RfimInstance, SpinConfig};
use crate::rng::{stream, StreamTag};
use crate::stats::{iat_batch_means, mean, stderr};

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Exponent in `k* = N^{C*}`.
    pub c_star: f64,
    /// Per-stage step override; recorded in reports when present.
    pub step_override: Option<u64>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { c_star: 4.0, step_override: None, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn steps_per_stage(&self, n_total: usize) -> u64 {
        self.step_override
            .unwrap_or_else(|| (n_total as f64).powf(self.c_star).ceil() as u64)
    }
}

struct Stage {
    inst: RfimInstance,
    /// Local index of each previous-stage vertex in this stage.
    carry: Vec<usize>,
    /// Local index of the newly added vertex.
    new_local: usize,
    /// Field at the new vertex (for the independent single-site draw).
    new_field: f64,
}

/// Precomputed per-stage instances for one `(domain, beta, field)`
/// triple, reusable across replicated runs.
pub struct IncrementalPlan {
    pub k_star: u64,
    pub order: Vec<VertexId>,
    /// Parent vertex id of each final-stage local id.
    pub parents: Vec<VertexId>,
    stages: Vec<Stage>,
    first_field: f64,
}

impl IncrementalPlan {
    /// Plan on an origin-centered box, nucleating from the center.
    pub fn new(
        domain: &Arc<Domain>,
        beta: f64,
        field: &[f64],
        cfg: &SamplerConfig,
    ) -> Result<Self> {
        let order = nucleation_order(domain)?;
        Self::with_order(domain, beta, field, cfg, order)
    }

    /// Plan along an explicit enumeration (e.g. a shell order anchored
    /// at a corner for even-sided boxes).
    pub fn with_order(
        domain: &Arc<Domain>,
        beta: f64,
        field: &[f64],
        cfg: &SamplerConfig,
        order: Vec<VertexId>,
    ) -> Result<Self> {
        if field.len() != domain.len() {
            return Err(Error::IndexMismatch { expected: domain.len(), got: field.len() });
        }
        if order.len() != domain.len() {
            return Err(Error::IndexMismatch { expected: domain.len(), got: order.len() });
        }
        let n = order.len();
        let k_star = cfg.steps_per_stage(n);
        let mut stages = Vec::with_capacity(n.saturating_sub(1));
        let mut prev_sorted: Vec<VertexId> = vec![order[0]];
        for i in 2..=n {
            let mut prefix: Vec<VertexId> = order[..i].to_vec();
            prefix.sort_unstable();
            let rows: Vec<Vec<i64>> =
                prefix.iter().map(|&v| domain.coords_of(v).to_vec()).collect();
            let sub = Domain::from_coords(domain.dim(), rows)?;
            // lexicographic coordinate order matches sorted parent ids
            let sub_field: Vec<f64> = prefix.iter().map(|&v| field[v]).collect();
            let inst = RfimInstance::new(Arc::new(sub), beta, sub_field)?;
            let carry: Vec<usize> = prev_sorted
                .iter()
                .map(|&p| prefix.binary_search(&p).expect("prefix grows monotonically"))
                .collect();
            let new_local = prefix.binary_search(&order[i - 1]).unwrap();
            stages.push(Stage { inst, carry, new_local, new_field: field[order[i - 1]] });
            prev_sorted = prefix;
        }
        Ok(IncrementalPlan {
            k_star,
            order: order.clone(),
            parents: prev_sorted,
            stages,
            first_field: field[order[0]],
        })
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len() + 1
    }

    /// One full run; the returned configuration is indexed by the final
    /// stage's local ids (see `parents` for the parent mapping).
    pub fn sample(&self, rng: &mut impl Rng) -> SpinConfig {
        self.run(rng, |_, _| {})
    }

    /// As `sample`, invoking `observe(stage_index, state)` after every
    /// completed stage.
    pub fn run<F>(&self, rng: &mut impl Rng, mut observe: F) -> SpinConfig
    where
        F: FnMut(usize, &SpinConfig),
    {
        let draw_site = |rng: &mut dyn rand::RngCore, h: f64| -> i8 {
            let (p, _) = conditional_split(h);
            if rand::Rng::random::<f64>(rng) < p {
                1
            } else {
                -1
            }
        };
        let mut state = SpinConfig::new(vec![draw_site(rng, self.first_field)]);
        observe(0, &state);
        let mut nbuf: Vec<usize> = Vec::with_capacity(8);
        for (si, stage) in self.stages.iter().enumerate() {
            let n_i = stage.carry.len() + 1;
            let mut next = SpinConfig::all_minus(n_i);
            for (prev_local, &cur_local) in stage.carry.iter().enumerate() {
                next.set(cur_local, state.get(prev_local));
            }
            next.set(stage.new_local, draw_site(rng, stage.new_field));
            // k* discrete uniform-site heat-bath steps with free boundary
            let inst = &stage.inst;
            for _ in 0..self.k_star {
                let site = rng.random_range(0..n_i);
                let u: f64 = rng.random();
                let mut m = inst.field()[site];
                inst.domain.neighbors_into(site, &mut nbuf);
                for &w in &nbuf {
                    m += inst.beta * next.get(w) as f64;
                }
                next.set(site, if u < conditional_split(m).0 { 1 } else { -1 });
            }
            state = next;
            observe(si + 1, &state);
        }
        state
    }
}

/// Convenience wrapper: one incremental sample on a box.
pub fn incremental_sample(
    domain: &Arc<Domain>,
    beta: f64,
    field: &[f64],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<SpinConfig> {
    Ok(IncrementalPlan::new(domain, beta, field, cfg)?.sample(rng))
}

/// Exact max over configurations of the warm-start density
/// `(mu_{prefix} x mu_{v_i}) / mu_{prefix + v_i}` at stage `i >= 2`
/// of the nucleation order.
pub fn warm_start_ratio(
    domain: &Arc<Domain>,
    beta: f64,
    field: &[f64],
    stage_index: usize,
) -> Result<f64> {
    let order = nucleation_order(domain)?;
    warm_start_ratio_with_order(domain, beta, field, &order, stage_index)
}

/// As [`warm_start_ratio`], along an explicit enumeration.
pub fn warm_start_ratio_with_order(
    domain: &Arc<Domain>,
    beta: f64,
    field: &[f64],
    order: &[VertexId],
    stage_index: usize,
) -> Result<f64> {
    if stage_index < 2 || stage_index > order.len() {
        return Err(Error::invalid("stage index must satisfy 2 <= i <= N"));
    }
    let build = |prefix: &mut Vec<VertexId>| -> Result<(ExactGibbs, Vec<VertexId>)> {
        prefix.sort_unstable();
        let rows: Vec<Vec<i64>> =
            prefix.iter().map(|&v| domain.coords_of(v).to_vec()).collect();
        let sub = Domain::from_coords(domain.dim(), rows)?;
        let sub_field: Vec<f64> = prefix.iter().map(|&v| field[v]).collect();
        let inst = RfimInstance::new(Arc::new(sub), beta, sub_field)?;
        Ok((ExactGibbs::enumerate(&inst)?, prefix.clone()))
    };
    let mut prev: Vec<VertexId> = order[..stage_index - 1].to_vec();
    let (g_prev, prev_sorted) = build(&mut prev)?;
    let mut cur: Vec<VertexId> = order[..stage_index].to_vec();
    let (g_cur, cur_sorted) = build(&mut cur)?;
    let v_new = order[stage_index - 1];
    let new_local = cur_sorted.binary_search(&v_new).unwrap();
    let carry: Vec<usize> = prev_sorted
        .iter()
        .map(|&p| cur_sorted.binary_search(&p).unwrap())
        .collect();
    let h_new = field[v_new];
    let log_z_site = (2.0 * h_new.cosh()).ln();
    let mut worst = f64::NEG_INFINITY;
    for c in 0..g_cur.num_configs() {
        let mut c_prev = 0usize;
        for (prev_local, &cur_local) in carry.iter().enumerate() {
            if c >> cur_local & 1 == 1 {
                c_prev |= 1 << prev_local;
            }
        }
        let s_new = if c >> new_local & 1 == 1 { 1.0 } else { -1.0 };
        let log_num = g_prev.log_prob(c_prev) + h_new * s_new - log_z_site;
        worst = worst.max(log_num - g_cur.log_prob(c));
    }
    Ok(worst.exp())
}

/// The `e^{4 d beta}` warm-start density bound.
pub fn warm_start_bound(d: usize, beta: f64) -> f64 {
    (4.0 * d as f64 * beta).exp()
}

/// Exact TV trajectory of the discrete chain from an initial law.
pub fn tv_decay_from_warm_start(
    inst: &RfimInstance,
    pi0: &[f64],
    k_grid: &[u64],
) -> Result<Vec<(u64, f64)>> {
    let gibbs = ExactGibbs::enumerate(inst)?;
    let m = gibbs.num_configs();
    if pi0.len() != m {
        return Err(Error::IndexMismatch { expected: m, got: pi0.len() });
    }
    let n = inst.len();
    let mut rates = Vec::with_capacity(m * n);
    for c in 0..m {
        for v in 0..n {
            rates.push(gibbs.flip_rate(c, v));
        }
    }
    let mut grid: Vec<u64> = k_grid.to_vec();
    grid.sort_unstable();
    let mut out = Vec::with_capacity(grid.len());
    let mut pi = pi0.to_vec();
    let mut k_done = 0u64;
    let tv_now = |pi: &[f64]| -> f64 {
        0.5 * pi.iter().zip(gibbs.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>()
    };
    for &k in &grid {
        while k_done < k {
            let mut next = vec![0.0f64; m];
            for c in 0..m {
                let pc = pi[c];
                if pc == 0.0 {
                    continue;
                }
                let mut stay = 1.0;
                for v in 0..n {
                    let r = rates[c * n + v] / n as f64;
                    stay -= r;
                    next[c ^ (1 << v)] += pc * r;
                }
                next[c] += pc * stay;
            }
            pi = next;
            k_done += 1;
        }
        out.push((k, tv_now(&pi)));
    }
    Ok(out)
}

/// The warm-start mixing envelope `M (A^{2p} log k / k)^{1/(2p-1)}`.
pub fn warm_start_envelope(m_density: f64, a: f64, p: f64, k: u64) -> f64 {
    if k < 2 {
        return f64::INFINITY;
    }
    let kf = k as f64;
    m_density * (a.powf(2.0 * p) * kf.ln() / kf).powf(1.0 / (2.0 * p - 1.0))
}

/// Boundary sign pattern for the planted box.
#[derive(Debug, Clone)]
pub enum ZetaPattern {
    /// Plus on the top and bottom rows of the surrounding ring, minus on
    /// the remaining sides (the two-dimensional construction).
    Quadrant,
    /// Minus everywhere except a plus strip of relative width epsilon
    /// along the last coordinate (the higher-dimensional construction).
    MinusWithPlusStrip { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct PlantSpec {
    /// Planted box side length; the box occupies `corner + [0, m)^d`.
    pub m: u32,
    pub pattern: ZetaPattern,
    /// Boundary-ring field magnitude, at least `m^d`.
    pub strong: f64,
    /// Interior field magnitude cap, at most `1 / m^d`.
    pub weak: f64,
    pub corner: Vec<i64>,
    pub seed: u64,
}

impl PlantSpec {
    pub fn centered(m: u32, d: usize, pattern: ZetaPattern, seed: u64) -> Self {
        let md = (m as f64).powi(d as i32);
        PlantSpec {
            m,
            pattern,
            strong: md,
            weak: 1.0 / md,
            corner: vec![-((m as i64) / 2); d],
            seed,
        }
    }

    fn in_box(&self, coords: &[i64]) -> bool {
        coords
            .iter()
            .zip(&self.corner)
            .all(|(x, c)| *x >= *c && *x < *c + self.m as i64)
    }

    fn on_ring(&self, coords: &[i64]) -> bool {
        if self.in_box(coords) {
            return false;
        }
        coords
            .iter()
            .zip(&self.corner)
            .all(|(x, c)| *x >= *c - 1 && *x <= *c + self.m as i64)
    }

    fn ring_sign(&self, coords: &[i64]) -> i8 {
        match &self.pattern {
            ZetaPattern::Quadrant => {
                let y = coords[coords.len() - 1];
                let c = self.corner[coords.len() - 1];
                if y == c - 1 || y == c + self.m as i64 {
                    1
                } else {
                    -1
                }
            }
            ZetaPattern::MinusWithPlusStrip { epsilon } => {
                let width = ((epsilon * self.m as f64).round() as i64).max(1);
                let lo = self.corner[coords.len() - 1] + (self.m as i64 - width) / 2;
                let x = coords[coords.len() - 1];
                if x >= lo && x < lo + width {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

/// Overwrite a base field with the planted construction: signed strong
/// fields on the ring around the box, near-zero fields inside it.
pub fn plant_griffiths_field(
    domain: &Domain,
    spec: &PlantSpec,
    base: &[f64],
) -> Result<Vec<f64>> {
    let d = domain.dim();
    if spec.corner.len() != d || base.len() != domain.len() {
        return Err(Error::IndexMismatch { expected: domain.len(), got: base.len() });
    }
    let md = (spec.m as f64).powi(d as i32);
    if spec.strong < md || spec.weak > 1.0 / md {
        return Err(Error::invalid("magnitudes must satisfy strong >= m^d, weak <= 1/m^d"));
    }
    // box plus its ring must sit inside the domain
    let mut probe = spec.corner.clone();
    for k in 0..d {
        probe[k] -= 1;
    }
    let mut far = spec.corner.clone();
    for k in 0..d {
        far[k] += spec.m as i64;
    }
    if !domain.contains(&probe) || !domain.contains(&far) {
        return Err(Error::PlantedBoxDoesNotFit { m: spec.m });
    }
    let mut field = base.to_vec();
    for v in 0..domain.len() {
        let coords = domain.coords_of(v);
        if spec.in_box(coords) {
            let u = crate::rng::uniform_hash(spec.seed, StreamTag::Field, v as u64, 1, 0);
            field[v] = (2.0 * u - 1.0) * spec.weak;
        } else if spec.on_ring(coords) {
            field[v] = spec.ring_sign(coords) as f64 * spec.strong;
        }
    }
    Ok(field)
}

/// Vertex ids of the planted box interior.
pub fn planted_region(domain: &Domain, spec: &PlantSpec) -> Vec<VertexId> {
    (0..domain.len()).filter(|&v| spec.in_box(domain.coords_of(v))).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeSettings {
    /// Spacing of magnetization samples (continuous time units).
    pub dt: f64,
    /// Recording length per replica after burn-in.
    pub run_time: f64,
    pub burn_in: f64,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RelaxationSummary {
    pub tau_mean: f64,
    pub tau_stderr: f64,
    pub replicas: usize,
    pub per_replica: Vec<f64>,
}

/// Integrated autocorrelation time of the region magnetization from
/// equilibrated runs, batch means per replica.
pub fn relaxation_probe(
    inst: &RfimInstance,
    region: &[VertexId],
    settings: &ProbeSettings,
) -> Result<RelaxationSummary> {
    if region.is_empty() {
        return Err(Error::invalid("region must be nonempty"));
    }
    let taus: Vec<f64> = (0..settings.replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(settings.seed, StreamTag::Probe, rep as u64, 0, 0);
            // product-law start from the single-site fields
            let n = inst.len();
            let mut start = SpinConfig::all_minus(n);
            for v in 0..n {
                if rand::Rng::random::<f64>(&mut rng) < conditional_split(inst.field()[v]).0 {
                    start.set(v, 1);
                }
            }
            let chain_rng = rand::SeedableRng::from_seed({
                let mut seed = [0u8; 32];
                rng.fill(&mut seed[..]);
                seed
            });
            let mut chain = crate::glauber::ChainState::new(inst.clone(), start, chain_rng)?;
            chain.run_until(settings.burn_in);
            let samples = (settings.run_time / settings.dt).floor() as usize;
            let mut series = Vec::with_capacity(samples);
            let mut t = settings.burn_in;
            for _ in 0..samples {
                t += settings.dt;
                chain.run_until(t);
                let mag: f64 =
                    region.iter().map(|&v| chain.sigma().get(v) as f64).sum::<f64>()
                        / region.len() as f64;
                series.push(mag);
            }
            Ok(iat_batch_means(&series, settings.dt).tau)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RelaxationSummary {
        tau_mean: mean(&taus),
        tau_stderr: stderr(&taus),
        replicas: settings.replicas,
        per_replica: taus,
    })
}

/// Per-stage validation row of the incremental sampler.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: usize,
    pub n_i: usize,
    pub k_star: u64,
    /// Plug-in TV between the empirical stage law and exact Gibbs.
    pub empirical_tv: f64,
    /// Expected plug-in TV for a perfect sampler at this run count.
    pub sampling_bias: f64,
    /// 3-sigma concentration half-width of the TV estimate.
    pub ci: f64,
}

pub fn write_stage_csv<W: std::io::Write>(rows: &[StageReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "stage,N_i,k-star,empirical-TV,sampling-bias,ci")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            r.stage, r.n_i, r.k_star, r.empirical_tv, r.sampling_bias, r.ci
        )?;
    }
    Ok(())
}

/// Run the sampler `runs` times and compare every stage's output law to
/// the exact Gibbs law on its prefix domain.
pub fn validate_incremental(
    domain: &Arc<Domain>,
    beta: f64,
    field: &[f64],
    cfg: &SamplerConfig,
    runs: usize,
) -> Result<Vec<StageReport>> {
    let order = nucleation_order(domain)?;
    validate_incremental_with_order(domain, beta, field, cfg, order, runs)
}

/// As [`validate_incremental`], along an explicit enumeration.
pub fn validate_incremental_with_order(
    domain: &Arc<Domain>,
    beta: f64,
    field: &[f64],
    cfg: &SamplerConfig,
    order: Vec<VertexId>,
    runs: usize,
) -> Result<Vec<StageReport>> {
    if domain.len() > crate::exact::N_MAX {
        return Err(Error::TooLarge { n: domain.len(), cap: crate::exact::N_MAX });
    }
    let plan = IncrementalPlan::with_order(domain, beta, field, cfg, order)?;
    let n_stages = plan.num_stages();
    let chunk_counts: Vec<Vec<Vec<usize>>> = (0..runs)
        .into_par_iter()
        .fold(
            || (0..n_stages).map(|s| vec![0usize; 1 << (s + 1)]).collect::<Vec<Vec<usize>>>(),
            |mut acc, rep| {
                let mut rng = stream(cfg.seed, StreamTag::Sampler, rep as u64, 0, 0);
                plan.run(&mut rng, |stage, state| {
                    acc[stage][state.to_code()] += 1;
                });
                acc
            },
        )
        .collect();
    let mut counts: Vec<Vec<usize>> =
        (0..n_stages).map(|s| vec![0usize; 1 << (s + 1)]).collect();
    for chunk in chunk_counts {
        for (s, stage_counts) in chunk.into_iter().enumerate() {
            for (c, k) in stage_counts.into_iter().enumerate() {
                counts[s][c] += k;
            }
        }
    }
    let order = &plan.order;
    let mut reports = Vec::with_capacity(n_stages);
    for (s, stage_counts) in counts.iter().enumerate() {
        let mut prefix: Vec<VertexId> = order[..s + 1].to_vec();
        prefix.sort_unstable();
        let rows: Vec<Vec<i64>> = prefix.iter().map(|&v| domain.coords_of(v).to_vec()).collect();
        let sub = Domain::from_coords(domain.dim(), rows)?;
        let sub_field: Vec<f64> = prefix.iter().map(|&v| field[v]).collect();
        let gibbs = ExactGibbs::enumerate(&RfimInstance::new(Arc::new(sub), beta, sub_field)?)?;
        let mut tv = 0.0;
        let mut bias = 0.0;
        for c in 0..gibbs.num_configs() {
            let p = gibbs.prob(c);
            let f = stage_counts[c] as f64 / runs as f64;
            tv += (f - p).abs();
            bias += (2.0 * p * (1.0 - p) / (std::f64::consts::PI * runs as f64)).sqrt();
        }
        reports.push(StageReport {
            stage: s + 1,
            n_i: s + 1,
            k_star: plan.k_star,
            empirical_tv: 0.5 * tv,
            sampling_bias: 0.5 * bias,
            ci: 3.0 * (0.5 / runs as f64).sqrt(),
        });
    }
    Ok(reports)
}

/// Spin snapshot file: header `d N`, then `coords spin` rows.
pub fn write_spin_snapshot<W: std::io::Write>(
    domain: &Domain,
    sigma: &SpinConfig,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{} {}", domain.dim(), domain.len())?;
    for v in 0..domain.len() {
        let row: Vec<String> = domain.coords_of(v).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{} {}", row.join(" "), sigma.get(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfim::{sample_field, FieldSpec};
    use crate::rng::replica_stream;

    #[test]
    fn single_vertex_sampler_is_exact() {
        let dom = Arc::new(Domain::make_box(0, 1).unwrap());
        let cfg = SamplerConfig::default();
        let mut plus = 0usize;
        let runs = 1_000_000;
        let plan = IncrementalPlan::new(&dom, 1.0, &[0.6], &cfg).unwrap();
        for rep in 0..runs {
            let mut rng = replica_stream(150, StreamTag::Sampler, rep as u64);
            if plan.sample(&mut rng).get(0) == 1 {
                plus += 1;
            }
        }
        let expect = conditional_split(0.6).0;
        let freq = plus as f64 / runs as f64;
        assert!(
            (freq - expect).abs() < 3.0 * (expect * (1.0 - expect) / runs as f64).sqrt(),
            "freq {freq} vs {expect}"
        );
    }

    #[test]
    fn beta_zero_output_is_product_law() {
        // the stage dynamics preserves the product law exactly, so the
        // output is the product of single-site laws at any k*
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = vec![0.3, -0.5, 0.8];
        let cfg = SamplerConfig { step_override: Some(2), ..Default::default() };
        let plan = IncrementalPlan::new(&dom, 0.0, &field, &cfg).unwrap();
        let runs = 1_000_000usize;
        let mut counts = vec![0usize; 8];
        for rep in 0..runs {
            let mut rng = replica_stream(151, StreamTag::Sampler, rep as u64);
            counts[plan.sample(&mut rng).to_code()] += 1;
        }
        for c in 0..8usize {
            let mut p = 1.0;
            for (v, parent) in plan.parents.iter().enumerate() {
                let (pp, pm) = conditional_split(field[*parent]);
                p *= if c >> v & 1 == 1 { pp } else { pm };
            }
            let freq = counts[c] as f64 / runs as f64;
            assert!(
                (freq - p).abs() < 4.0 * (p * (1.0 - p) / runs as f64).sqrt() + 1e-4,
                "config {c}: freq {freq} vs product {p}"
            );
        }
    }

    #[test]
    fn small_interval_matches_gibbs() {
        // 3-site interval; acceptance covers the 2x2 and 3x3 boxes
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 152), &dom).unwrap();
        let cfg = SamplerConfig { step_override: Some(512), ..Default::default() };
        let plan = IncrementalPlan::new(&dom, 0.5, &field, &cfg).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field.clone()).unwrap();
        let gibbs = ExactGibbs::enumerate(&inst).unwrap();
        let runs = 200_000usize;
        let mut counts = vec![0usize; 8];
        for rep in 0..runs {
            let mut rng = replica_stream(153, StreamTag::Sampler, rep as u64);
            let out = plan.sample(&mut rng);
            // final stage parents are 0..n in order for a full box
            counts[out.to_code()] += 1;
        }
        let tv: f64 = 0.5
            * (0..8).map(|c| (counts[c] as f64 / runs as f64 - gibbs.prob(c)).abs()).sum::<f64>();
        assert!(tv < 0.02, "TV {tv}");
    }

    #[test]
    fn validate_reports_all_stages() {
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 154), &dom).unwrap();
        let cfg = SamplerConfig { step_override: Some(256), seed: 155, ..Default::default() };
        let reports = validate_incremental(&dom, 0.5, &field, &cfg, 40_000).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert!(
                r.empirical_tv < r.sampling_bias + 0.02,
                "stage {} TV {} bias {}",
                r.stage,
                r.empirical_tv,
                r.sampling_bias
            );
        }
        let mut buf = Vec::new();
        write_stage_csv(&reports, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("stage,N_i,k-star"));
    }

    #[test]
    fn warm_start_ratio_cases() {
        // beta = 0: the product law is the target, ratio 1
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 156), &dom).unwrap();
        for i in 2..=3 {
            let r = warm_start_ratio(&dom, 0.0, &field, i).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "stage {i} ratio {r}");
        }

        // single-edge stage: closed form
        let beta = 0.7;
        let r = warm_start_ratio(&dom, beta, &field, 2).unwrap();
        let order = nucleation_order(&dom).unwrap();
        let (h1, h2) = (field[order[0]], field[order[1]]);
        let z_joint = (beta + h1 + h2).exp()
            + (-beta + h1 - h2).exp()
            + (-beta - h1 + h2).exp()
            + (beta - h1 - h2).exp();
        let z_prod = 4.0 * h1.cosh() * h2.cosh();
        // max over the 4 configs of exp(-beta s1 s2) * z_joint / z_prod
        let closed = z_joint / z_prod * beta.exp();
        assert!((r - closed).abs() < 1e-12, "ratio {r} vs closed form {closed}");

        // the e^{4 d beta} bound holds across dimensions and stages
        for (d, n) in [(1usize, 2i64), (2, 1), (3, 1)] {
            let dom = Arc::new(Domain::make_box(n, d).unwrap());
            let field = sample_field(&FieldSpec::gaussian(1.0, 157), &dom).unwrap();
            let order = nucleation_order(&dom).unwrap();
            let bound = warm_start_bound(d, 0.6);
            for i in 2..=order.len().min(12) {
                let r = warm_start_ratio(&dom, 0.6, &field, i).unwrap();
                assert!(r <= bound + 1e-9, "d={d} stage {i}: ratio {r} > bound {bound}");
            }
        }
    }

    #[test]
    fn tv_decay_curve_is_monotone() {
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 158), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.6, field).unwrap();
        let gibbs = ExactGibbs::enumerate(&inst).unwrap();

        // pi_0 = stationary law: identically zero
        let grid: Vec<u64> = vec![0, 1, 2, 4, 8, 16, 32];
        let flat = tv_decay_from_warm_start(&inst, gibbs.probs(), &grid).unwrap();
        assert!(flat.iter().all(|&(_, tv)| tv < 1e-12));

        // worst-case point start: monotone decay, k=0 exact
        let mut pi0 = vec![0.0; 8];
        pi0[0] = 1.0;
        let curve = tv_decay_from_warm_start(&inst, &pi0, &grid).unwrap();
        assert!((curve[0].1 - (1.0 - gibbs.prob(0))).abs() < 1e-12);
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12, "TV must be nonincreasing: {curve:?}");
        }
        // descriptive envelope is finite and positive for k >= 2
        assert!(warm_start_envelope(warm_start_bound(1, 0.6), 2.0, 1.5, 16) > 0.0);
    }

    #[test]
    fn planted_field_shape() {
        let dom = Domain::make_box(4, 2).unwrap();
        let base = vec![0.5; dom.len()];
        let spec = PlantSpec::centered(2, 2, ZetaPattern::Quadrant, 159);
        let field = plant_griffiths_field(&dom, &spec, &base).unwrap();

        let mut ring_plus = 0;
        let mut ring_minus = 0;
        for v in 0..dom.len() {
            let c = dom.coords_of(v);
            if spec.in_box(c) {
                assert!(field[v].abs() <= spec.weak + 1e-15, "interior magnitude");
            } else if spec.on_ring(c) {
                assert!(field[v].abs() >= spec.strong - 1e-15, "ring magnitude");
                if field[v] > 0.0 {
                    ring_plus += 1;
                } else {
                    ring_minus += 1;
                }
            } else {
                assert_eq!(field[v], 0.5);
            }
        }
        // 12-site ring around a 2x2 box: two full rows of 4 are plus,
        // the remaining 4 side sites are minus
        assert_eq!(ring_plus + ring_minus, 12);
        assert_eq!(ring_plus, 8);
        assert_eq!(ring_minus, 4);
        assert_eq!(planted_region(&dom, &spec).len(), 4);

        // box too close to the edge is rejected
        let bad = PlantSpec { corner: vec![3, 3], ..spec.clone() };
        assert!(matches!(
            plant_griffiths_field(&dom, &bad, &base),
            Err(Error::PlantedBoxDoesNotFit { .. })
        ));

        // magnitude constraints are enforced
        let weak_violation = PlantSpec { weak: 1.0, ..spec.clone() };
        assert!(plant_griffiths_field(&dom, &weak_violation, &base).is_err());
    }

    #[test]
    fn strip_pattern_covers_expected_fraction() {
        let dom = Domain::make_box(5, 3).unwrap();
        let spec =
            PlantSpec::centered(3, 3, ZetaPattern::MinusWithPlusStrip { epsilon: 0.34 }, 160);
        let base = vec![0.0; dom.len()];
        let field = plant_griffiths_field(&dom, &spec, &base).unwrap();
        let ring: Vec<usize> =
            (0..dom.len()).filter(|&v| spec.on_ring(dom.coords_of(v))).collect();
        let plus = ring.iter().filter(|&&v| field[v] > 0.0).count();
        assert!(plus > 0 && plus < ring.len());
    }

    #[test]
    fn relaxation_probe_beta_zero() {
        // free spins refresh at rate 1: tau ~ 1
        let dom = Arc::new(Domain::make_box(2, 2).unwrap());
        let inst = RfimInstance::new(Arc::clone(&dom), 0.0, vec![0.0; 25]).unwrap();
        let region: Vec<usize> = (0..25).collect();
        let settings = ProbeSettings {
            dt: 0.25,
            run_time: 2000.0,
            burn_in: 10.0,
            replicas: 8,
            seed: 161,
        };
        let summary = relaxation_probe(&inst, &region, &settings).unwrap();
        assert!(
            (summary.tau_mean - 1.0).abs() < 3.0 * summary.tau_stderr + 0.25,
            "tau {} +- {}",
            summary.tau_mean,
            summary.tau_stderr
        );
    }

    #[test]
    fn relaxation_probe_pinned_site_is_fast() {
        let dom = Arc::new(Domain::make_box(2, 2).unwrap());
        let mut field = vec![0.5; 25];
        let strong_site = dom.id_of(&[0, 0]).unwrap();
        field[strong_site] = 8.0;
        let inst = RfimInstance::new(Arc::clone(&dom), 1.0, field).unwrap();
        let settings = ProbeSettings {
            dt: 0.25,
            run_time: 1500.0,
            burn_in: 20.0,
            replicas: 6,
            seed: 162,
        };
        let summary = relaxation_probe(&inst, &[strong_site], &settings).unwrap();
        assert!(summary.tau_mean < 2.0, "pinned-site tau {}", summary.tau_mean);
    }

    #[test]
    fn snapshot_format() {
        let dom = Domain::make_box(0, 2).unwrap();
        let sigma = SpinConfig::all_plus(1);
        let mut buf = Vec::new();
        write_spin_snapshot(&dom, &sigma, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2 1\n0 0 1\n");
    }
}
