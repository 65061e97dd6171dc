//! Continuous-time Glauber dynamics, grand and monotone couplings,
//! coalescence-based TV upper bounds, and monotone exact sampling pairs.
//!
//! Continuous time is realized by the superposition construction: one
//! exponential holding time at total rate N plus a uniform site choice,
//! which is exact in law for rate-1 clocks per site. Coupled chains share
//! the full `(time, site, uniform)` event triple; since the heat-bath
//! conditional is monotone in the neighborhood, this is the grand
//! coupling and preserves the vertexwise order.
//!
//! There is no separate discrete-time engine: the discrete uniform-site
//! chain is the unit-rate embedding ([`ChainState::step_discrete`]), and
//! the two mixing times are equivalent up to a factor of the volume.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::ExactGibbs;
use crate::lattice::VertexId;
use crate::rfim::{RfimInstance, SpinConfig};
use crate::rng::{stream, StreamTag};

/// One applied dynamics event.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub index: u64,
    pub time: f64,
    pub site: VertexId,
    pub new_spin: i8,
}

/// A single Glauber chain with its own event stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub inst: RfimInstance,
    sigma: SpinConfig,
    t: f64,
    events: u64,
    rng: ChaCha8Rng,
    nbuf: Vec<usize>,
}

impl ChainState {
    pub fn new(inst: RfimInstance, sigma0: SpinConfig, rng: ChaCha8Rng) -> Result<Self> {
        if sigma0.len() != inst.len() {
            return Err(Error::IndexMismatch { expected: inst.len(), got: sigma0.len() });
        }
        let nbuf = Vec::with_capacity(2 * inst.domain.dim());
        Ok(ChainState { inst, sigma: sigma0, t: 0.0, events: 0, rng, nbuf })
    }

    #[inline]
    fn plus_prob_at(&mut self, site: VertexId) -> f64 {
        let mut m = self.inst.field()[site];
        self.inst.domain.neighbors_into(site, &mut self.nbuf);
        for &w in &self.nbuf {
            m += self.inst.beta * self.sigma.get(w) as f64;
        }
        crate::rfim::conditional_split(m).0
    }

    pub fn sigma(&self) -> &SpinConfig {
        &self.sigma
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    /// Advance one event: exponential holding at rate N, uniform site,
    /// heat-bath resample with one uniform.
    pub fn step(&mut self) -> Event {
        let n = self.inst.len();
        let dt = -(1.0 - self.rng.random::<f64>()).ln() / n as f64;
        self.t += dt;
        let site = self.rng.random_range(0..n);
        let u: f64 = self.rng.random();
        let p_plus = self.plus_prob_at(site);
        let new_spin = if u < p_plus { 1 } else { -1 };
        self.sigma.set(site, new_spin);
        self.events += 1;
        Event { index: self.events, time: self.t, site, new_spin }
    }

    /// Run to `t_end`; an overshooting holding time is discarded, which
    /// is exact by memorylessness.
    pub fn run_until(&mut self, t_end: f64) {
        let n = self.inst.len() as f64;
        while self.t < t_end {
            let dt = -(1.0 - self.rng.random::<f64>()).ln() / n;
            if self.t + dt > t_end {
                self.t = t_end;
                return;
            }
            self.t += dt;
            let site = self.rng.random_range(0..self.inst.len());
            let u: f64 = self.rng.random();
            let p_plus = self.plus_prob_at(site);
            self.sigma.set(site, if u < p_plus { 1 } else { -1 });
            self.events += 1;
        }
    }

    /// One uniform-site discrete heat-bath step (unit-rate embedding of
    /// the same kernel; the k-step sampler stages use this).
    pub fn step_discrete(&mut self) {
        let site = self.rng.random_range(0..self.inst.len());
        let u: f64 = self.rng.random();
        let p_plus = self.plus_prob_at(site);
        self.sigma.set(site, if u < p_plus { 1 } else { -1 });
        self.events += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Grand,
    Monotone,
}

/// Two chains driven by one `(time, site, uniform)` event stream.
#[derive(Debug)]
pub struct CouplingState {
    pub lo: RfimInstance,
    pub hi: RfimInstance,
    sigma_lo: SpinConfig,
    sigma_hi: SpinConfig,
    mode: CouplingMode,
    t: f64,
    events: u64,
    order_violations: u64,
    updated: Vec<bool>,
    rng: ChaCha8Rng,
}

impl CouplingState {
    /// Both chains must share the domain and beta; fields may differ
    /// (that is how ordered boundary conditions enter after folding).
    /// Monotone mode requires `lo.field <= hi.field` vertexwise and
    /// ordered initial states.
    pub fn new(
        lo: RfimInstance,
        hi: RfimInstance,
        sigma_lo: SpinConfig,
        sigma_hi: SpinConfig,
        mode: CouplingMode,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n
            || lo.beta != hi.beta
            || (0..n).any(|v| lo.domain.coords_of(v) != hi.domain.coords_of(v))
        {
            return Err(Error::MismatchedDomains);
        }
        if sigma_lo.len() != n || sigma_hi.len() != n {
            return Err(Error::IndexMismatch { expected: n, got: sigma_lo.len() });
        }
        if mode == CouplingMode::Monotone {
            let fields_ordered = lo.field().iter().zip(hi.field()).all(|(a, b)| a <= b);
            if !fields_ordered || !sigma_lo.le(&sigma_hi) {
                return Err(Error::UnorderedBoundaries);
            }
        }
        Ok(CouplingState {
            lo,
            hi,
            sigma_lo,
            sigma_hi,
            mode,
            t: 0.0,
            events: 0,
            order_violations: 0,
            updated: vec![false; n],
            rng,
        })
    }

    /// All-minus / all-plus extreme starts on a shared instance.
    pub fn extreme(inst: RfimInstance, mode: CouplingMode, rng: ChaCha8Rng) -> Result<Self> {
        let n = inst.len();
        CouplingState::new(
            inst.clone(),
            inst,
            SpinConfig::all_minus(n),
            SpinConfig::all_plus(n),
            mode,
            rng,
        )
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn order_violations(&self) -> u64 {
        self.order_violations
    }

    pub fn sigma_lo(&self) -> &SpinConfig {
        &self.sigma_lo
    }

    pub fn sigma_hi(&self) -> &SpinConfig {
        &self.sigma_hi
    }

    pub fn updated_sites(&self) -> &[bool] {
        &self.updated
    }

    pub fn disagreement_count(&self) -> usize {
        (0..self.lo.len()).filter(|&v| self.sigma_lo.get(v) != self.sigma_hi.get(v)).count()
    }

    pub fn agree_everywhere(&self) -> bool {
        self.disagreement_count() == 0
    }

    fn apply_event(&mut self, site: VertexId, u: f64) {
        let p_lo = self.lo.conditional_plus_prob(&self.sigma_lo, site);
        // identical fields and neighborhoods give identical conditionals;
        // skip the second evaluation then
        let same_env = self.lo.field()[site] == self.hi.field()[site]
            && self
                .lo
                .domain
                .neighbor_ids(site)
                .iter()
                .all(|&w| self.sigma_lo.get(w) == self.sigma_hi.get(w));
        let p_hi =
            if same_env { p_lo } else { self.hi.conditional_plus_prob(&self.sigma_hi, site) };
        let s_lo = if u < p_lo { 1 } else { -1 };
        let s_hi = if u < p_hi { 1 } else { -1 };
        self.sigma_lo.set(site, s_lo);
        self.sigma_hi.set(site, s_hi);
        self.updated[site] = true;
        self.events += 1;
        if self.mode == CouplingMode::Monotone && s_lo > s_hi {
            self.order_violations += 1;
        }
    }

    /// Advance both chains with shared event triples until `t_end`.
    pub fn run_coupled(&mut self, t_end: f64) {
        let n = self.lo.len() as f64;
        while self.t < t_end {
            let dt = -(1.0 - self.rng.random::<f64>()).ln() / n;
            if self.t + dt > t_end {
                self.t = t_end;
                return;
            }
            self.t += dt;
            let site = self.rng.random_range(0..self.lo.len());
            let u: f64 = self.rng.random();
            self.apply_event(site, u);
        }
    }

    /// Advance a fixed number of shared events (discrete embedding).
    pub fn run_events(&mut self, events: u64) {
        for _ in 0..events {
            let site = self.rng.random_range(0..self.lo.len());
            let u: f64 = self.rng.random();
            self.apply_event(site, u);
        }
    }
}

/// Scope of the coalescence bound: one coupling on the full domain, or
/// per-site couplings on pinned balls of the given radius.
#[derive(Debug, Clone, Copy)]
pub enum CouplingScope {
    FullDomain,
    BallRestricted { radius: i64 },
}

/// Per-site disagreement counts and the union-bound TV estimate.
#[derive(Debug, Clone)]
pub struct CoalescenceReport {
    pub t: f64,
    pub replicas: usize,
    /// `(site, disagree count)` per vertex.
    pub per_site: Vec<(VertexId, usize)>,
    /// Mean over replicas of the number of disagreeing sites.
    pub bound: f64,
    pub bound_stderr: f64,
}

impl CoalescenceReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "site-id,disagree-count,replicas")?;
        for (v, c) in &self.per_site {
            writeln!(w, "{v},{c},{}", self.replicas)?;
        }
        Ok(())
    }
}

/// Estimate the worst-start TV upper bound `sum_v P(Y+_t(v) != Y-_t(v))`
/// under the monotone grand coupling from the two extreme starts.
pub fn coalescence_tv_bound(
    inst: &RfimInstance,
    t: f64,
    replicas: usize,
    scope: CouplingScope,
    master_seed: u64,
) -> Result<CoalescenceReport> {
    let n = inst.len();
    let mut counts = vec![0usize; n];
    let mut per_replica_sums = Vec::with_capacity(replicas);
    match scope {
        CouplingScope::FullDomain => {
            for rep in 0..replicas {
                let rng = stream(master_seed, StreamTag::Coupling, rep as u64, 0, 0);
                let mut c = CouplingState::extreme(inst.clone(), CouplingMode::Monotone, rng)?;
                c.run_coupled(t);
                let mut disagreeing = 0usize;
                for v in 0..n {
                    if c.sigma_lo.get(v) != c.sigma_hi.get(v) {
                        counts[v] += 1;
                        disagreeing += 1;
                    }
                }
                per_replica_sums.push(disagreeing as f64);
            }
        }
        CouplingScope::BallRestricted { radius } => {
            for rep in 0..replicas {
                let mut disagreeing = 0usize;
                for v in 0..n {
                    let center = inst.domain.coords_of(v).to_vec();
                    let ball: Vec<VertexId> = (0..n)
                        .filter(|&w| {
                            crate::lattice::linf_dist(inst.domain.coords_of(w), &center) <= radius
                        })
                        .collect();
                    let (lo, ids) = inst.pin_uniform(&ball, -1)?;
                    let (hi, _) = inst.pin_uniform(&ball, 1)?;
                    let v_local = ids.iter().position(|&w| w == v).unwrap();
                    let rng = stream(master_seed, StreamTag::Coupling, rep as u64, v as u64, 1);
                    let nb = lo.len();
                    let mut c = CouplingState::new(
                        lo,
                        hi,
                        SpinConfig::all_minus(nb),
                        SpinConfig::all_plus(nb),
                        CouplingMode::Monotone,
                        rng,
                    )?;
                    c.run_coupled(t);
                    if c.sigma_lo.get(v_local) != c.sigma_hi.get(v_local) {
                        counts[v] += 1;
                        disagreeing += 1;
                    }
                }
                per_replica_sums.push(disagreeing as f64);
            }
        }
    }
    let bound = crate::stats::mean(&per_replica_sums);
    let bound_stderr = crate::stats::stderr(&per_replica_sums);
    Ok(CoalescenceReport {
        t,
        replicas,
        per_site: (0..n).map(|v| (v, counts[v])).collect(),
        bound,
        bound_stderr,
    })
}

/// Draw an ordered pair of exact samples from two pinned instances with
/// ordered boundary conditions, via sequential sampling with shared
/// uniforms. Each marginal is the exact pinned Gibbs law.
pub fn monotone_sample_pair(
    gibbs_lo: &ExactGibbs,
    gibbs_hi: &ExactGibbs,
    rng: &mut impl Rng,
) -> Result<(SpinConfig, SpinConfig)> {
    let n = gibbs_lo.num_sites();
    if gibbs_hi.num_sites() != n {
        return Err(Error::MismatchedDomains);
    }
    let ordered =
        gibbs_lo.inst.field().iter().zip(gibbs_hi.inst.field()).all(|(a, b)| a <= b);
    if !ordered {
        return Err(Error::UnorderedBoundaries);
    }
    let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let lo = gibbs_lo.sample_sequential(&mut |v| uniforms[v]);
    let hi = gibbs_hi.sample_sequential(&mut |v| uniforms[v]);
    debug_assert!(lo.le(&hi));
    Ok((lo, hi))
}

pub fn write_trajectory_csv<W: std::io::Write>(events: &[Event], mut w: W) -> std::io::Result<()> {
    writeln!(w, "event-index,time,site-id,new-spin")?;
    for e in events {
        writeln!(w, "{},{:.16e},{},{}", e.index, e.time, e.site, e.new_spin)?;
    }
    Ok(())
}
