//! Field-dependent coarse-graining into Good/Bad coarse sites, bad
//! cluster statistics, construction of block-dynamics blocks, the block
//! dynamics itself, and desk-scale checks of its spectral-gap bound.
//!
//! Distance thresholds like R/8 or 3R/4 are compared in exact integer
//! arithmetic (`8 d <= R` instead of `d <= R/8`), so no rounding policy
//! leaks into the block geometry.
//!
//! Per-block relaxation is measured with exact dense spectra at desk
//! scale; the cut-width bound that controls it asymptotically (mixing at
//! most exponential in the surface area of a block) is not implemented.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactGibbs;
use crate::lattice::{coarse_lattice, linf_dist, CoarseGrid, Domain, Label, VertexId};
use crate::mixing::{ssm_functional_at, XiPolicy};
use crate::rfim::{RfimInstance, SpinConfig};
use crate::rng::{uniform_hash, StreamTag};
use crate::stats::wilson_upper;

/// Smallest coarse radius with a nonempty cluster-scale range.
pub const R_MIN: u32 = 8;

/// Good/Bad classification variant.
#[derive(Debug, Clone)]
pub enum Variant {
    /// Tail condition on weak-field clusters after sprinkling.
    AntiConcentration,
    /// Exact boundary-influence condition on small inscribed boxes.
    Ssm { c_star: f64, policy: XiPolicy, r_cap: i64 },
}

#[derive(Debug, Clone)]
pub struct GoodBadParams {
    /// Field-strength cutoff K.
    pub k_cut: f64,
    /// Coarse radius R.
    pub r_coarse: u32,
    pub variant: Variant,
    /// Sprinkling replicas per classification.
    pub mc_replicas: usize,
    pub seed: u64,
}

impl GoodBadParams {
    pub fn anticoncentration(k_cut: f64, r_coarse: u32, mc_replicas: usize, seed: u64) -> Self {
        GoodBadParams { k_cut, r_coarse, variant: Variant::AntiConcentration, mc_replicas, seed }
    }

    /// Sprinkling density `rho = e^{2 d beta - K} / (e^{2 d beta - K} + e^{-2 d beta + K})`.
    pub fn rho(&self, beta: f64, d: usize) -> f64 {
        let x = 2.0 * d as f64 * beta - self.k_cut;
        let (plus, _) = crate::rfim::conditional_split(x);
        plus
    }

    /// Whether the density is below the 1/(40 d) smallness requirement.
    pub fn density_small_enough(&self, beta: f64, d: usize) -> bool {
        self.rho(beta, d) < 1.0 / (40.0 * d as f64)
    }
}

/// Cluster scales probed by the anticoncentration variant: nominally
/// `(log R)^2 <= r <= R/8` (natural logs, lower end rounded up, upper
/// rounded down); at desk-scale R the lower end is clamped to R/8 so the
/// range stays nonempty. R < 8 leaves no scale at all and is an error.
pub fn cluster_scale_range(r_coarse: u32) -> Result<(usize, usize)> {
    let hi = (r_coarse / 8) as usize;
    if hi < 1 {
        return Err(Error::EmptyScaleRange(r_coarse, R_MIN));
    }
    let nominal_lo = (r_coarse as f64).ln().powi(2).ceil() as usize;
    Ok((nominal_lo.min(hi).max(1), hi))
}

/// Classify every coarse site as Good or Bad from the field realization.
///
/// The instance's stored field is used as the quenched disorder, so
/// classification is meant for free-boundary instances (a pinned
/// instance's effective field mixes in the boundary fold).
///
/// Anticoncentration variant: a site is Good when, for every vertex of
/// its R-ball and every admissible cluster scale r, the Wilson upper
/// confidence bound (3 sigma) on `P(|C_w| >= r | field)` under Ber(rho)
/// sprinkling stays below `e^{-r}`. The margin stored per site is the
/// worst slack of that comparison.
///
/// SSM variant: Good when the exact boundary-influence functional on
/// every admissible inscribed box stays below `e^{-l/C*}`; only boxes of
/// radius up to `r_cap` are evaluated (exactly computable ones).
pub fn classify(inst: &RfimInstance, params: &GoodBadParams) -> Result<CoarseGrid> {
    let domain = &inst.domain;
    let d = domain.dim();
    let mut grid = coarse_lattice(domain, params.r_coarse)?;
    let r = params.r_coarse as i64;
    let rho = params.rho(inst.beta, d);
    let weak: Vec<bool> = inst.field().iter().map(|h| h.abs() <= params.k_cut).collect();

    let site_results: Vec<(Label, f64)> = match &params.variant {
        Variant::AntiConcentration => {
            let (r_lo, r_hi) = cluster_scale_range(params.r_coarse)?;
            (0..grid.len())
                .into_par_iter()
                .map(|site| {
                    classify_site_anticoncentration(
                        inst, &weak, &grid, site, r, rho, r_lo, r_hi, params,
                    )
                })
                .collect()
        }
        Variant::Ssm { c_star, policy, r_cap } => {
            // admissible box radii: 2 r_box <= R/4 and r_box <= r_cap,
            // with the flip distance l = r_box + 1
            let max_r_box = (r / 8).min(*r_cap);
            if max_r_box < 1 {
                return Err(Error::EmptyScaleRange(params.r_coarse, R_MIN));
            }
            (0..grid.len())
                .into_par_iter()
                .map(|site| {
                    classify_site_ssm(inst, &grid, site, r, max_r_box, *c_star, policy)
                })
                .collect::<Result<Vec<(Label, f64)>>>()?
        }
    };
    for (site, (label, margin)) in site_results.into_iter().enumerate() {
        grid.set_label(site, label, margin);
    }
    Ok(grid)
}

#[allow(clippy::too_many_arguments)]
fn classify_site_anticoncentration(
    inst: &RfimInstance,
    weak: &[bool],
    grid: &CoarseGrid,
    site: usize,
    r: i64,
    rho: f64,
    r_lo: usize,
    r_hi: usize,
    params: &GoodBadParams,
) -> (Label, f64) {
    let domain = &inst.domain;
    let center = grid.site_coords(site).to_vec();
    let ball: Vec<VertexId> = (0..domain.len())
        .filter(|&w| linf_dist(domain.coords_of(w), &center) <= r)
        .collect();
    // per ball vertex, counts of |C_w| >= r over sprinkling draws
    let mut counts: HashMap<VertexId, Vec<usize>> =
        ball.iter().map(|&w| (w, vec![0usize; r_hi - r_lo + 1])).collect();
    let mut visited = vec![0u64; domain.len()];
    let mut stamp = 0u64;
    let mut nbuf = Vec::with_capacity(2 * domain.dim());
    for draw in 0..params.mc_replicas {
        let open = |x: VertexId| -> bool {
            weak[x]
                || uniform_hash(params.seed, StreamTag::Classify, site as u64, draw as u64, x as u64)
                    < rho
        };
        for &w in &ball {
            if !open(w) {
                continue;
            }
            // size-capped component search: only thresholds up to r_hi matter
            stamp += 1;
            let mut stack = vec![w];
            visited[w] = stamp;
            let mut size = 0usize;
            while let Some(x) = stack.pop() {
                size += 1;
                if size > r_hi {
                    break;
                }
                domain.neighbors_into(x, &mut nbuf);
                for &y in &nbuf {
                    if visited[y] != stamp && open(y) {
                        visited[y] = stamp;
                        stack.push(y);
                    }
                }
            }
            let c = counts.get_mut(&w).unwrap();
            for (i, thr) in (r_lo..=r_hi).enumerate() {
                if size >= thr {
                    c[i] += 1;
                }
            }
        }
    }
    let mut margin = f64::INFINITY;
    for c in counts.values() {
        for (i, thr) in (r_lo..=r_hi).enumerate() {
            let upper = wilson_upper(c[i], params.mc_replicas, 3.0);
            margin = margin.min((-(thr as f64)).exp() - upper);
        }
    }
    (if margin >= 0.0 { Label::Good } else { Label::Bad }, margin)
}

fn classify_site_ssm(
    inst: &RfimInstance,
    grid: &CoarseGrid,
    site: usize,
    r: i64,
    max_r_box: i64,
    c_star: f64,
    policy: &XiPolicy,
) -> Result<(Label, f64)> {
    let domain = &inst.domain;
    let d = domain.dim();
    let center = grid.site_coords(site).to_vec();
    let ball: Vec<VertexId> = (0..domain.len())
        .filter(|&w| linf_dist(domain.coords_of(w), &center) <= r)
        .collect();
    let mut margin = f64::INFINITY;
    for &w in &ball {
        let w_coords = domain.coords_of(w).to_vec();
        for r_box in 1..=max_r_box {
            let ell = r_box + 1;
            let threshold = (-(ell as f64) / c_star).exp();
            // all box offsets keeping w interior, all boundary sites at
            // flip distance l from w; skip boxes leaving the domain
            for offset_code in 0..(2 * r_box - 1).pow(d as u32) {
                let mut offset = vec![0i64; d];
                let mut code = offset_code;
                for o in offset.iter_mut() {
                    *o = code % (2 * r_box - 1) - (r_box - 1);
                    code /= 2 * r_box - 1;
                }
                let box_center: Vec<i64> =
                    w_coords.iter().zip(&offset).map(|(a, b)| a + b).collect();
                let members: Vec<VertexId> = (0..domain.len())
                    .filter(|&v| linf_dist(domain.coords_of(v), &box_center) <= r_box)
                    .collect();
                if members.len() != (2 * r_box + 1).pow(d as u32) as usize {
                    continue; // box clipped by the domain edge
                }
                let bd = domain.boundary_of(&members);
                for &z in &bd {
                    let z_coords = domain.coords_of(z).to_vec();
                    if linf_dist(&w_coords, &z_coords) != ell {
                        continue;
                    }
                    let est =
                        ssm_functional_at(inst, &w_coords, &offset, r_box, &z_coords, policy)?;
                    margin = margin.min(threshold - est.max_tv);
                }
            }
        }
    }
    Ok((if margin >= 0.0 { Label::Good } else { Label::Bad }, margin))
}

/// Size statistics of the Bad R-*-clusters.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    /// `(size, count)` pairs, ascending in size.
    pub histogram: Vec<(usize, usize)>,
    pub max_size: usize,
}

pub fn bad_cluster_stats(grid: &CoarseGrid) -> Result<ClusterStats> {
    let clusters = grid.r_star_clusters(Label::Bad)?;
    let mut hist: HashMap<usize, usize> = HashMap::new();
    let mut max_size = 0;
    for c in &clusters {
        *hist.entry(c.len()).or_insert(0) += 1;
        max_size = max_size.max(c.len());
    }
    let mut histogram: Vec<(usize, usize)> = hist.into_iter().collect();
    histogram.sort_unstable();
    Ok(ClusterStats { histogram, max_size })
}

#[derive(Debug, Clone)]
pub enum BlockKind {
    /// Ball of radius R/8 around a vertex near the Good region.
    Type1 { center: VertexId },
    /// Translate of a Bad-cluster envelope.
    Type2 { cluster_index: usize, shift: Vec<i64> },
}

#[derive(Debug, Clone)]
pub struct Block {
    pub vertices: Vec<VertexId>,
    pub kind: BlockKind,
}

#[derive(Debug, Clone)]
pub struct BlockSet {
    pub blocks: Vec<Block>,
    pub r_coarse: u32,
    /// Bad clusters the type-2 blocks were generated from.
    pub bad_clusters: Vec<Vec<usize>>,
}

impl BlockSet {
    pub fn vertex_lists(&self) -> Vec<Vec<VertexId>> {
        self.blocks.iter().map(|b| b.vertices.clone()).collect()
    }

    pub fn max_volume(&self) -> usize {
        self.blocks.iter().map(|b| b.vertices.len()).max().unwrap_or(0)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "block-id,type,provenance,volume")?;
        for (i, b) in self.blocks.iter().enumerate() {
            let (ty, prov) = match &b.kind {
                BlockKind::Type1 { center } => ("1", format!("center={center}")),
                BlockKind::Type2 { cluster_index, shift } => {
                    let s: Vec<String> = shift.iter().map(|x| x.to_string()).collect();
                    ("2", format!("cluster={cluster_index};shift={}", s.join(";")))
                }
            };
            writeln!(w, "{i},{ty},{prov},{}", b.vertices.len())?;
        }
        Ok(())
    }
}

/// Build the block-dynamics blocks from a labeled coarse grid.
///
/// Type 1: for every vertex within 3R/4 of a Good coarse site, the ball
/// of radius R/8 around it. Type 2: for every Bad R-*-cluster C, the set
/// of vertices within R of C and at least R/2 away from every Good site,
/// together with all its translates by up to R/8 per coordinate.
pub fn build_blocks(domain: &Domain, grid: &CoarseGrid) -> Result<BlockSet> {
    if !grid.is_labeled() {
        return Err(Error::UnlabeledGrid);
    }
    let r = grid.coarse_radius() as i64;
    let d = domain.dim();
    let n = domain.len();
    let good_sites = grid.sites_with(Label::Good);
    // min distance from each vertex to the Good coarse region
    let good_dist: Vec<i64> = (0..n)
        .map(|v| {
            good_sites
                .iter()
                .map(|&g| linf_dist(domain.coords_of(v), grid.site_coords(g)))
                .min()
                .unwrap_or(i64::MAX)
        })
        .collect();

    let mut blocks = Vec::new();
    // type 1: centers within 3R/4 of Good(h)
    let ball_radius = r / 8;
    for w in 0..n {
        if good_dist[w] != i64::MAX && 4 * good_dist[w] <= 3 * r {
            let center = domain.coords_of(w).to_vec();
            let vertices: Vec<VertexId> = (0..n)
                .filter(|&v| linf_dist(domain.coords_of(v), &center) <= ball_radius)
                .collect();
            blocks.push(Block { vertices, kind: BlockKind::Type1 { center: w } });
        }
    }
    // type 2: envelope of each Bad cluster and its translates
    let bad_clusters = grid.r_star_clusters(Label::Bad)?;
    for (ci, cluster) in bad_clusters.iter().enumerate() {
        let envelope: Vec<VertexId> = (0..n)
            .filter(|&v| {
                let vc = domain.coords_of(v);
                let near_bad =
                    cluster.iter().any(|&s| linf_dist(vc, grid.site_coords(s)) <= r);
                // at least R/2 from Good: 2 dist >= R (vacuous with no Good)
                let far_from_good = good_dist[v] == i64::MAX || 2 * good_dist[v] >= r;
                near_bad && far_from_good
            })
            .collect();
        if envelope.is_empty() {
            continue;
        }
        let envelope_coords: Vec<Vec<i64>> =
            envelope.iter().map(|&v| domain.coords_of(v).to_vec()).collect();
        let shift_range = r / 8;
        let side = 2 * shift_range + 1;
        for shift_code in 0..side.pow(d as u32) {
            let mut shift = vec![0i64; d];
            let mut code = shift_code;
            for s in shift.iter_mut() {
                *s = code % side - shift_range;
                code /= side;
            }
            let vertices: Vec<VertexId> = envelope_coords
                .iter()
                .filter_map(|c| {
                    let moved: Vec<i64> = c.iter().zip(&shift).map(|(x, s)| x + s).collect();
                    domain.id_of(&moved)
                })
                .collect();
            if !vertices.is_empty() {
                let mut vertices = vertices;
                vertices.sort_unstable();
                blocks.push(Block {
                    vertices,
                    kind: BlockKind::Type2 { cluster_index: ci, shift: shift.clone() },
                });
            }
        }
    }
    Ok(BlockSet { blocks, r_coarse: grid.coarse_radius(), bad_clusters })
}

/// Per-vertex block-membership counts and the boundary/interior ratio.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    /// `(interior count, boundary count)` per vertex.
    pub per_vertex: Vec<(usize, usize)>,
    pub max_ratio: f64,
    /// Max number of blocks containing one vertex.
    pub chi: usize,
    /// The `32 d 2^d / R` bound the ratio is compared against.
    pub ratio_bound: f64,
    pub ok: bool,
}

impl GeometryReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertex-id,interior-count,boundary-count")?;
        for (v, (i, b)) in self.per_vertex.iter().enumerate() {
            writeln!(w, "{v},{i},{b}")?;
        }
        Ok(())
    }
}

/// Count, for every vertex, the blocks containing it and the blocks
/// whose exterior boundary contains it; a vertex in no block is a
/// construction error.
pub fn block_geometry_report(domain: &Domain, bs: &BlockSet) -> Result<GeometryReport> {
    let n = domain.len();
    let mut interior = vec![0usize; n];
    let mut boundary = vec![0usize; n];
    for b in &bs.blocks {
        for &v in &b.vertices {
            interior[v] += 1;
        }
        for v in domain.boundary_of(&b.vertices) {
            boundary[v] += 1;
        }
    }
    if let Some(v) = (0..n).find(|&v| interior[v] == 0) {
        return Err(Error::UncoveredVertex(v));
    }
    let mut max_ratio = 0.0f64;
    let mut chi = 0usize;
    for v in 0..n {
        max_ratio = max_ratio.max(boundary[v] as f64 / interior[v] as f64);
        chi = chi.max(interior[v]);
    }
    let d = domain.dim() as f64;
    let ratio_bound = 32.0 * d * 2f64.powf(d) / bs.r_coarse as f64;
    Ok(GeometryReport {
        per_vertex: interior.into_iter().zip(boundary).collect(),
        max_ratio,
        chi,
        ratio_bound,
        ok: max_ratio <= ratio_bound,
    })
}

/// How a block is resampled.
#[derive(Debug, Clone, Copy)]
pub enum BlockSampler {
    /// Exact conditional draw through the Gibbs table.
    Exact,
    /// Nested Glauber run of the given number of events.
    Glauber { events: u64 },
}

/// Resample the configuration on `block` conditional on the rest.
pub fn block_update(
    inst: &RfimInstance,
    block: &[VertexId],
    sigma: &SpinConfig,
    sampler: BlockSampler,
    rng: &mut impl Rng,
) -> Result<SpinConfig> {
    let (pinned, ids) = inst.pin_from_config(block, sigma)?;
    let local = match sampler {
        BlockSampler::Exact => {
            let gibbs = ExactGibbs::enumerate(&pinned)?;
            gibbs.sample(rng)
        }
        BlockSampler::Glauber { events } => {
            let mut start = SpinConfig::all_minus(pinned.len());
            for (i, &parent) in ids.iter().enumerate() {
                start.set(i, sigma.get(parent));
            }
            let chain_rng = rand::SeedableRng::from_seed({
                let mut seed = [0u8; 32];
                rng.fill(&mut seed[..]);
                seed
            });
            let mut chain = crate::glauber::ChainState::new(pinned, start, chain_rng)?;
            for _ in 0..events {
                chain.step_discrete();
            }
            chain.sigma().clone()
        }
    };
    let mut out = sigma.clone();
    for (i, &parent) in ids.iter().enumerate() {
        out.set(parent, local.get(i));
    }
    Ok(out)
}

/// Explicit single-block resampling kernel on the full configuration
/// space: `Q(c, c')` resamples the block conditionally, exact from the
/// Gibbs table.
fn block_kernel(gibbs: &ExactGibbs, block: &[VertexId]) -> DMatrix<f64> {
    let m = gibbs.num_configs();
    let bmask: usize = block.iter().fold(0, |acc, &v| acc | 1 << v);
    let rest_mask = !bmask & (m - 1);
    let mut q = DMatrix::<f64>::zeros(m, m);
    // enumerate outside assignments as submasks of rest_mask
    let mut out = rest_mask;
    loop {
        // conditional distribution over block configs given the outside
        let mut total = 0.0;
        let mut sub = bmask;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        loop {
            let c = out | sub;
            let p = gibbs.prob(c);
            entries.push((c, p));
            total += p;
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & bmask;
        }
        for &(from, _) in &entries {
            for &(to, p) in &entries {
                q[(from, to)] = p / total;
            }
        }
        if out == 0 {
            break;
        }
        out = (out - 1) & rest_mask;
    }
    q
}

/// Stationarity drift of randomized block updates: TV between `mu K` and
/// `mu` for the uniform-block one-step kernel, computed by explicit
/// kernel composition.
pub fn block_update_stationarity_drift(
    inst: &RfimInstance,
    blocks: &[Vec<VertexId>],
) -> Result<f64> {
    let gibbs = ExactGibbs::enumerate(inst)?;
    let m = gibbs.num_configs();
    let mut mixed = vec![0.0f64; m];
    for block in blocks {
        let q = block_kernel(&gibbs, block);
        for c in 0..m {
            let p = gibbs.prob(c);
            for c2 in 0..m {
                mixed[c2] += p * q[(c, c2)] / blocks.len() as f64;
            }
        }
    }
    Ok(0.5 * mixed.iter().zip(gibbs.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Spectral-gap comparison for the block dynamics.
#[derive(Debug, Clone)]
pub struct GapCheckReport {
    /// Gap of single-site Glauber dynamics.
    pub gap_single: f64,
    /// Gap of the continuous-time block dynamics (rate 1 per block).
    pub gap_block: f64,
    /// Gap of the discrete uniform-block chain times the block count
    /// (equals `gap_block` exactly).
    pub gap_block_discrete_scaled: f64,
    /// Worst conditional single-site gap over blocks and boundaries.
    pub min_conditional_gap: f64,
    /// Max number of blocks containing one vertex.
    pub chi: usize,
    /// `gap_block * min_conditional_gap / chi`.
    pub rhs: f64,
    pub ok: bool,
}

/// Verify `gap_single >= chi^{-1} gap_block min_i min_phi gap_{B_i}^phi`
/// with dense spectra throughout.
pub fn block_dynamics_gap_check(
    inst: &RfimInstance,
    blocks: &[Vec<VertexId>],
) -> Result<GapCheckReport> {
    let n = inst.len();
    if n > 10 {
        return Err(Error::TooLarge { n, cap: 10 });
    }
    if blocks.is_empty() {
        return Err(Error::invalid("need at least one block"));
    }
    let mut covered = vec![false; n];
    for b in blocks {
        for &v in b {
            covered[v] = true;
        }
    }
    if let Some(v) = (0..n).find(|&v| !covered[v]) {
        return Err(Error::UncoveredVertex(v));
    }
    let gibbs = ExactGibbs::enumerate(inst)?;
    let m = gibbs.num_configs();
    let gap_single = gibbs.generator_spectrum()?.gap;

    // block-dynamics generator L = sum_i (Q_i - I)
    let mut lb = DMatrix::<f64>::zeros(m, m);
    for block in blocks {
        let q = block_kernel(&gibbs, block);
        lb += q;
    }
    for c in 0..m {
        lb[(c, c)] -= blocks.len() as f64;
    }
    // symmetrize in the mu-weighted inner product and take the spectrum
    let mut sym = DMatrix::<f64>::zeros(m, m);
    for c in 0..m {
        for c2 in 0..m {
            sym[(c, c2)] =
                ((gibbs.log_prob(c) - gibbs.log_prob(c2)) / 2.0).exp() * lb[(c, c2)];
        }
    }
    for c in 0..m {
        for c2 in (c + 1)..m {
            let avg = 0.5 * (sym[(c, c2)] + sym[(c2, c)]);
            sym[(c, c2)] = avg;
            sym[(c2, c)] = avg;
        }
    }
    let eig = sym.symmetric_eigen();
    let mut evals: Vec<f64> = eig.eigenvalues.iter().map(|l| -l).collect();
    evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gap_block = evals[1.min(m - 1)];
    // the discrete uniform-block chain differs by the block count factor
    let gap_block_discrete_scaled = gap_block; // L = k (K - I) identically

    // worst conditional single-site gap over blocks and boundary configs
    let mut min_conditional_gap = f64::INFINITY;
    for block in blocks {
        let bmask: usize = block.iter().fold(0, |acc, &v| acc | 1 << v);
        let rest_mask = !bmask & (m - 1);
        let mut out = rest_mask;
        loop {
            let sigma_out = SpinConfig::from_code(out, n);
            let (pinned, _) = inst.pin_from_config(block, &sigma_out)?;
            let gap = ExactGibbs::enumerate(&pinned)?.generator_spectrum()?.gap;
            min_conditional_gap = min_conditional_gap.min(gap);
            if out == 0 {
                break;
            }
            out = (out - 1) & rest_mask;
        }
    }

    let mut chi = 0usize;
    for v in 0..n {
        chi = chi.max(blocks.iter().filter(|b| b.contains(&v)).count());
    }
    let rhs = gap_block * min_conditional_gap / chi as f64;
    Ok(GapCheckReport {
        gap_single,
        gap_block,
        gap_block_discrete_scaled,
        min_conditional_gap,
        chi,
        rhs,
        ok: gap_single >= rhs - 1e-9,
    })
}

/// Hamming-distance response to a single boundary flip.
#[derive(Debug, Clone)]
pub struct HammingReport {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    /// Descriptive comparison value `(log R)^2 + |B| e^{-R/8} + slack`.
    pub reference: f64,
}

/// Monotone coupling of the block measure under boundary conditions
/// differing at one site `y`: reports the expected Hamming distance
/// between the coupled samples.
#[allow(clippy::too_many_arguments)]
pub fn hamming_coupling_probe(
    inst: &RfimInstance,
    block: &[VertexId],
    sigma_outside: &SpinConfig,
    y: VertexId,
    r_coarse: u32,
    slack: f64,
    replicas: usize,
    seed: u64,
) -> Result<HammingReport> {
    let bd = inst.domain.boundary_of(block);
    if !bd.contains(&y) {
        return Err(Error::invalid("y must lie on the block boundary"));
    }
    let mut lo_sigma = sigma_outside.clone();
    lo_sigma.set(y, -1);
    let mut hi_sigma = sigma_outside.clone();
    hi_sigma.set(y, 1);
    let (lo_inst, _) = inst.pin_from_config(block, &lo_sigma)?;
    let (hi_inst, _) = inst.pin_from_config(block, &hi_sigma)?;
    let g_lo = ExactGibbs::enumerate(&lo_inst)?;
    let g_hi = ExactGibbs::enumerate(&hi_inst)?;
    let dists: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng =
                crate::rng::stream(seed, StreamTag::SequentialSampler, rep as u64, y as u64, 0);
            let (a, b) = crate::glauber::monotone_sample_pair(&g_lo, &g_hi, &mut rng)?;
            assert!(a.le(&b), "monotone block coupling must stay ordered");
            let dh = (0..block.len()).filter(|&i| a.get(i) != b.get(i)).count();
            Ok(dh as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = crate::stats::mean(&dists);
    let reference = (r_coarse as f64).ln().powi(2)
        + block.len() as f64 * (-(r_coarse as f64) / 8.0).exp()
        + slack;
    Ok(HammingReport { mean, stderr: crate::stats::stderr(&dists), replicas, reference })
}

/// Coarse-grid dump: CSV `coarse-coords,label,margin`.
pub fn write_grid_csv<W: std::io::Write>(grid: &CoarseGrid, mut w: W) -> std::io::Result<()> {
    writeln!(w, "coarse-coords,label,margin")?;
    for i in 0..grid.len() {
        let coords: Vec<String> = grid.site_coords(i).iter().map(|x| x.to_string()).collect();
        let label = match grid.label(i) {
            Some(Label::Good) => "Good",
            Some(Label::Bad) => "Bad",
            None => "unset",
        };
        writeln!(w, "{},{},{:.16e}", coords.join(";"), label, grid.margin(i))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfim::{sample_field, FieldSpec};
    use crate::rng::replica_stream;
    use std::sync::Arc;

    fn strong_field_instance(n: i64, d: usize, beta: f64, seed: u64) -> RfimInstance {
        let dom = Arc::new(Domain::make_box(n, d).unwrap());
        let field = sample_field(&FieldSpec::two_point(10.0, seed), &dom).unwrap();
        RfimInstance::new(dom, beta, field).unwrap()
    }

    #[test]
    fn rho_formula() {
        let p = GoodBadParams::anticoncentration(5.0, 8, 16, 1);
        // e^{2 d beta - K} / (e^{2 d beta - K} + e^{-2 d beta + K})
        let x: f64 = 2.0 * 2.0 * 0.5 - 5.0;
        let expect = x.exp() / (x.exp() + (-x).exp());
        assert!((p.rho(0.5, 2) - expect).abs() < 1e-15);
        assert!(p.density_small_enough(0.5, 2));
    }

    #[test]
    fn scale_range_clamps() {
        assert!(matches!(cluster_scale_range(7), Err(Error::EmptyScaleRange(7, 8))));
        assert_eq!(cluster_scale_range(8).unwrap(), (1, 1));
        assert_eq!(cluster_scale_range(16).unwrap(), (2, 2));
        // the nominal (log R)^2 lower end takes over for very large R
        let (lo, hi) = cluster_scale_range(256).unwrap();
        assert_eq!(hi, 32);
        assert_eq!(lo, 31); // ceil(ln(256)^2)
    }

    #[test]
    fn classify_strong_fields_all_good() {
        // P(|h| <= K) = 0: the weak-field process is empty and the
        // sprinkling alone stays far below the tail threshold
        let inst = strong_field_instance(8, 2, 0.5, 120);
        let params = GoodBadParams::anticoncentration(5.0, 8, 1024, 121);
        let grid = classify(&inst, &params).unwrap();
        assert!(grid.is_labeled());
        assert!(grid.sites_with(Label::Bad).is_empty());
        assert!((0..grid.len()).all(|i| grid.margin(i) > 0.0));
    }

    #[test]
    fn classify_weak_island_is_bad() {
        // zero field everywhere: every site has |h| <= K, clusters are
        // the whole ball, every site must be Bad
        let dom = Arc::new(Domain::make_box(8, 2).unwrap());
        let inst = RfimInstance::new(Arc::clone(&dom), 0.5, vec![0.0; dom.len()]).unwrap();
        let params = GoodBadParams::anticoncentration(5.0, 8, 64, 122);
        let grid = classify(&inst, &params).unwrap();
        assert!(grid.sites_with(Label::Good).is_empty());
    }

    #[test]
    fn classify_is_deterministic() {
        let inst = strong_field_instance(8, 2, 0.5, 123);
        let params = GoodBadParams::anticoncentration(5.0, 8, 256, 124);
        let a = classify(&inst, &params).unwrap();
        let b = classify(&inst, &params).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.label(i), b.label(i));
            assert_eq!(a.margin(i).to_bits(), b.margin(i).to_bits());
        }
    }

    #[test]
    fn classify_bad_frequency_small() {
        // Bernoulli-domination shape: with strong two-point fields the
        // empirical Bad frequency stays at zero across field draws
        let dom = Arc::new(Domain::make_box(8, 2).unwrap());
        let mut bad = 0usize;
        let mut total = 0usize;
        for fseed in 0..20u64 {
            let field = sample_field(&FieldSpec::two_point(10.0, 500 + fseed), &dom).unwrap();
            let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field).unwrap();
            let params = GoodBadParams::anticoncentration(5.0, 8, 256, 125);
            let grid = classify(&inst, &params).unwrap();
            bad += grid.sites_with(Label::Bad).len();
            total += grid.len();
        }
        let freq = bad as f64 / total as f64;
        let r5 = (8f64).powi(-5);
        let sigma = (freq.max(r5) / total as f64).sqrt();
        assert!(freq <= r5 + 3.0 * sigma, "bad frequency {freq}");
    }

    #[test]
    fn classify_ssm_variant_strong_fields() {
        let inst = strong_field_instance(8, 2, 0.5, 126);
        let params = GoodBadParams {
            k_cut: 5.0,
            r_coarse: 8,
            variant: Variant::Ssm {
                c_star: 1.0,
                policy: XiPolicy { exhaustive_max: 4, n_random: 8, seed: 9 },
                r_cap: 1,
            },
            mc_replicas: 0,
            seed: 127,
        };
        let grid = classify(&inst, &params).unwrap();
        assert!(grid.is_labeled());
        // strong fields screen the boundary flip: everything Good
        assert!(grid.sites_with(Label::Bad).is_empty(), "margins: {:?}",
            (0..grid.len()).map(|i| grid.margin(i)).collect::<Vec<_>>());
    }

    #[test]
    fn cluster_stats_cases() {
        let dom = Domain::make_box(8, 2).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid.len() {
            grid.set_label(i, Label::Good, 0.0);
        }
        assert_eq!(bad_cluster_stats(&grid).unwrap().max_size, 0);

        // single Bad site
        grid.set_label(0, Label::Bad, 0.0);
        assert_eq!(bad_cluster_stats(&grid).unwrap().max_size, 1);

        // planted 2x2 coarse Bad square
        let mut grid2 = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid2.len() {
            let c = grid2.site_coords(i);
            let bad = (c[0] == 0 || c[0] == 8) && (c[1] == 0 || c[1] == 8);
            grid2.set_label(i, if bad { Label::Bad } else { Label::Good }, 0.0);
        }
        let stats = bad_cluster_stats(&grid2).unwrap();
        assert_eq!(stats.max_size, 4);
        assert_eq!(stats.histogram, vec![(4, 1)]);
    }

    #[test]
    fn blocks_all_good_cover_with_type1() {
        let dom = Domain::make_box(8, 2).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid.len() {
            grid.set_label(i, Label::Good, 0.0);
        }
        let bs = build_blocks(&dom, &grid).unwrap();
        assert!(bs.blocks.iter().all(|b| matches!(b.kind, BlockKind::Type1 { .. })));
        // volume bound (R/4 + 1)^d for radius-R/8 balls
        assert!(bs.max_volume() <= (8 / 4 + 1) * (8 / 4 + 1));
        let report = block_geometry_report(&dom, &bs).unwrap();
        assert!(report.ok, "ratio {} bound {}", report.max_ratio, report.ratio_bound);
        // interior count deep inside is at least (R/4)^d
        let deep = dom.id_of(&[0, 0]).unwrap();
        assert!(report.per_vertex[deep].0 >= 4);
    }

    #[test]
    fn blocks_all_bad_cover_with_type2() {
        let dom = Domain::make_box(8, 2).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid.len() {
            grid.set_label(i, Label::Bad, 0.0);
        }
        let bs = build_blocks(&dom, &grid).unwrap();
        assert!(bs.blocks.iter().all(|b| matches!(b.kind, BlockKind::Type2 { .. })));
        let report = block_geometry_report(&dom, &bs).unwrap();
        assert!(report.chi > 0);
        // the envelope covers everything when there is no Good site
        let full: Vec<usize> = bs
            .blocks
            .iter()
            .find(|b| matches!(b.kind, BlockKind::Type2 { ref shift, .. } if shift.iter().all(|&s| s == 0)))
            .unwrap()
            .vertices
            .clone();
        assert_eq!(full.len(), dom.len());
    }

    #[test]
    fn blocks_mixed_cover_and_volume_bound() {
        let dom = Domain::make_box(16, 2).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        // one Bad cluster in the corner
        for i in 0..grid.len() {
            let c = grid.site_coords(i);
            let bad = c[0] <= -8 && c[1] <= -8;
            grid.set_label(i, if bad { Label::Bad } else { Label::Good }, 0.0);
        }
        let bs = build_blocks(&dom, &grid).unwrap();
        let stats = bad_cluster_stats(&grid).unwrap();
        // max block volume <= R^d * L for the largest Bad cluster size L
        let bound = 8usize.pow(2) * stats.max_size;
        let type2_max = bs
            .blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::Type2 { .. }))
            .map(|b| b.vertices.len())
            .max()
            .unwrap();
        assert!(type2_max <= bound, "type2 volume {type2_max} > bound {bound}");
        let report = block_geometry_report(&dom, &bs).unwrap();
        assert!(report.ok, "ratio {} bound {}", report.max_ratio, report.ratio_bound);
    }

    #[test]
    fn type2_blocks_from_distinct_clusters_are_far_apart() {
        let dom = Domain::make_box(16, 2).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid.len() {
            let c = grid.site_coords(i);
            let bad = (c[0] == -16 && c[1] == -16) || (c[0] == 16 && c[1] == 16);
            grid.set_label(i, if bad { Label::Bad } else { Label::Good }, 0.0);
        }
        let bs = build_blocks(&dom, &grid).unwrap();
        assert_eq!(bs.bad_clusters.len(), 2);
        let r = 8i64;
        for a in &bs.blocks {
            for b in &bs.blocks {
                if let (
                    BlockKind::Type2 { cluster_index: ca, .. },
                    BlockKind::Type2 { cluster_index: cb, .. },
                ) = (&a.kind, &b.kind)
                {
                    if ca != cb {
                        let mut dist = i64::MAX;
                        for &u in &a.vertices {
                            for &v in &b.vertices {
                                dist = dist.min(linf_dist(dom.coords_of(u), dom.coords_of(v)));
                            }
                        }
                        assert!(4 * dist >= 3 * r, "type-2 separation {dist} < 3R/4");
                    }
                }
            }
        }
    }

    #[test]
    fn unlabeled_grid_is_rejected() {
        let dom = Domain::make_box(8, 2).unwrap();
        let grid = coarse_lattice(&dom, 8).unwrap();
        assert!(matches!(build_blocks(&dom, &grid), Err(Error::UnlabeledGrid)));
    }

    #[test]
    fn block_update_single_site_and_full_domain() {
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 130), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field).unwrap();
        let g = ExactGibbs::enumerate(&inst).unwrap();
        let mut rng = replica_stream(131, StreamTag::SequentialSampler, 0);

        // single site: one heat-bath update in law
        let mut plus = 0usize;
        let runs = 60_000;
        let sigma = SpinConfig::all_minus(3);
        for _ in 0..runs {
            let out = block_update(&inst, &[1], &sigma, BlockSampler::Exact, &mut rng).unwrap();
            if out.get(1) == 1 {
                plus += 1;
            }
            assert_eq!(out.get(0), -1);
            assert_eq!(out.get(2), -1);
        }
        let expect = inst.conditional_plus_prob(&sigma, 1);
        let freq = plus as f64 / runs as f64;
        assert!((freq - expect).abs() < 3.0 * (expect * (1.0 - expect) / runs as f64).sqrt());

        // whole domain: perfect Gibbs sampling
        let all: Vec<usize> = (0..3).collect();
        let mut counts = vec![0usize; 8];
        for _ in 0..runs {
            let out = block_update(&inst, &all, &sigma, BlockSampler::Exact, &mut rng).unwrap();
            counts[out.to_code()] += 1;
        }
        let tv: f64 = 0.5
            * (0..8).map(|c| (counts[c] as f64 / runs as f64 - g.prob(c)).abs()).sum::<f64>();
        assert!(tv < 0.02, "TV {tv}");
    }

    #[test]
    fn block_updates_preserve_gibbs_exactly() {
        // kernel-level check: mu K = mu to near machine precision
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 132), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.7, field).unwrap();
        let blocks = vec![vec![0, 1], vec![1, 2], vec![2]];
        let drift = block_update_stationarity_drift(&inst, &blocks).unwrap();
        assert!(drift < 1e-10, "stationarity drift {drift}");
    }

    #[test]
    fn gap_check_single_block_is_tight() {
        let dom = Arc::new(Domain::make_box(1, 1).unwrap());
        let field = sample_field(&FieldSpec::gaussian(0.5, 133), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.4, field).unwrap();
        let all: Vec<usize> = (0..3).collect();
        let rep = block_dynamics_gap_check(&inst, &[all]).unwrap();
        // one block covering the domain: block gap 1, chi 1, conditional
        // gap equals the single-site gap, so the bound is met with equality
        assert!((rep.gap_block - 1.0).abs() < 1e-9);
        assert_eq!(rep.chi, 1);
        assert!((rep.min_conditional_gap - rep.gap_single).abs() < 1e-9);
        assert!(rep.ok);
    }

    #[test]
    fn gap_check_overlapping_path_blocks() {
        let dom = Arc::new(
            Domain::from_coords(1, vec![vec![0], vec![1], vec![2], vec![3]]).unwrap(),
        );
        let field = sample_field(&FieldSpec::gaussian(1.0, 134), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.6, field).unwrap();
        let rep = block_dynamics_gap_check(&inst, &[vec![0, 1, 2], vec![1, 2, 3]]).unwrap();
        assert!(rep.ok, "gap {} rhs {}", rep.gap_single, rep.rhs);
        assert_eq!(rep.chi, 2);
    }

    #[test]
    fn gap_check_two_by_three_box() {
        let rows: Vec<Vec<i64>> =
            (0..2).flat_map(|x| (0..3).map(move |y| vec![x, y])).collect();
        let dom = Arc::new(Domain::from_coords(2, rows).unwrap());
        let field = sample_field(&FieldSpec::gaussian(1.0, 135), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field).unwrap();
        // two overlapping 2x2 blocks covering the box
        let block_a: Vec<usize> = vec![
            dom.id_of(&[0, 0]).unwrap(),
            dom.id_of(&[0, 1]).unwrap(),
            dom.id_of(&[1, 0]).unwrap(),
            dom.id_of(&[1, 1]).unwrap(),
        ];
        let block_b: Vec<usize> = vec![
            dom.id_of(&[0, 1]).unwrap(),
            dom.id_of(&[0, 2]).unwrap(),
            dom.id_of(&[1, 1]).unwrap(),
            dom.id_of(&[1, 2]).unwrap(),
        ];
        let rep = block_dynamics_gap_check(&inst, &[block_a, block_b]).unwrap();
        assert!(rep.ok, "gap {} rhs {}", rep.gap_single, rep.rhs);
        assert!((rep.gap_block_discrete_scaled - rep.gap_block).abs() < 1e-12);
    }

    #[test]
    fn hamming_probe_cases() {
        let dom = Arc::new(Domain::make_box(1, 2).unwrap());
        let block: Vec<usize> = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|c| dom.id_of(&[c[0], c[1]]).unwrap())
            .collect();
        let y = dom.id_of(&[-1, 0]).unwrap();
        let outside = SpinConfig::all_minus(9);

        // beta = 0: flipping a boundary spin changes nothing
        let inst0 =
            RfimInstance::new(Arc::clone(&dom), 0.0, vec![0.2; 9]).unwrap();
        let rep =
            hamming_coupling_probe(&inst0, &block, &outside, y, 8, 1.0, 2000, 140).unwrap();
        assert_eq!(rep.mean, 0.0);

        // strong fields screen the flip
        let field = sample_field(&FieldSpec::two_point(6.0, 141), &dom).unwrap();
        let inst = RfimInstance::new(Arc::clone(&dom), 0.5, field).unwrap();
        let rep =
            hamming_coupling_probe(&inst, &block, &outside, y, 8, 1.0, 10_000, 142).unwrap();
        assert!(rep.mean < 0.1, "screened block response {}", rep.mean);

        // exact identity: E[d_H] equals the sum of site-marginal TVs
        let field2 = sample_field(&FieldSpec::gaussian(1.0, 143), &dom).unwrap();
        let inst2 = RfimInstance::new(Arc::clone(&dom), 0.8, field2).unwrap();
        let rep2 =
            hamming_coupling_probe(&inst2, &block, &outside, y, 8, 1.0, 60_000, 144).unwrap();
        let mut lo_sigma = outside.clone();
        lo_sigma.set(y, -1);
        let mut hi_sigma = outside.clone();
        hi_sigma.set(y, 1);
        let (lo_inst, _) = inst2.pin_from_config(&block, &lo_sigma).unwrap();
        let (hi_inst, _) = inst2.pin_from_config(&block, &hi_sigma).unwrap();
        let g_lo = ExactGibbs::enumerate(&lo_inst).unwrap();
        let g_hi = ExactGibbs::enumerate(&hi_inst).unwrap();
        let tv_sum: f64 =
            (0..4).map(|v| g_lo.tv_site_marginal(&g_hi, v).unwrap()).sum();
        assert!(
            (rep2.mean - tv_sum).abs() < 4.0 * rep2.stderr + 1e-3,
            "E[d_H] {} vs sum of TVs {tv_sum}",
            rep2.mean
        );
        assert!(rep2.mean >= 0.0);

        // y off the boundary is rejected
        assert!(hamming_coupling_probe(&inst2, &block, &outside, 0, 8, 1.0, 10, 145).is_err());
    }

    #[test]
    fn grid_csv_format() {
        let dom = Domain::make_box(8, 1).unwrap();
        let mut grid = coarse_lattice(&dom, 8).unwrap();
        for i in 0..grid.len() {
            grid.set_label(i, Label::Good, 0.5);
        }
        let mut buf = Vec::new();
        write_grid_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("coarse-coords,label,margin"));
        assert!(text.contains("Good"));
    }
}
