//! Brute-force oracle for small systems: full Gibbs table, marginals,
//! total-variation distances, covariance, Dirichlet form, and the
//! generator spectrum of heat-bath Glauber dynamics.
//!
//! Configuration code convention: bit `i` set means spin `+1` at vertex
//! id `i`, so test vectors are portable across implementations. Tables
//! are built in log space with log-sum-exp normalization.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::VertexId;
use crate::rfim::{conditional_split, RfimInstance, SpinConfig};
use crate::stats::log_sum_exp;

/// Hard cap for full probability tables.
pub const N_MAX: usize = 20;
/// Hard cap for dense generator spectra.
pub const N_SPEC: usize = 14;

#[inline]
fn spin_of(code: usize, v: usize) -> f64 {
    if code >> v & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Full Gibbs table for an instance with at most [`N_MAX`] vertices.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    pub inst: RfimInstance,
    log_probs: Vec<f64>,
    probs: Vec<f64>,
    log_z: f64,
    /// Neighbor ids per vertex, flattened for the hot loops.
    nbr_offsets: Vec<u32>,
    nbrs: Vec<u32>,
}

impl ExactGibbs {
    /// Enumerate all `2^N` configurations of the instance.
    pub fn enumerate(inst: &RfimInstance) -> Result<ExactGibbs> {
        let n = inst.len();
        if n > N_MAX {
            return Err(Error::TooLarge { n, cap: N_MAX });
        }
        let m = 1usize << n;
        let mut nbr_offsets = Vec::with_capacity(n + 1);
        let mut nbrs = Vec::new();
        nbr_offsets.push(0u32);
        for v in 0..n {
            for w in inst.domain.neighbor_ids(v) {
                nbrs.push(w as u32);
            }
            nbr_offsets.push(nbrs.len() as u32);
        }
        // Gray-code walk: one spin flip per step, energy updated locally.
        let mut sigma = SpinConfig::all_minus(n);
        let mut energy = inst.hamiltonian(&sigma)?;
        let mut log_w = vec![0.0f64; m];
        log_w[0] = -energy;
        for i in 1..m {
            let v = i.trailing_zeros() as usize;
            let sv = sigma.get(v) as f64;
            let mut mv = inst.field()[v];
            for &w in &nbrs[nbr_offsets[v] as usize..nbr_offsets[v + 1] as usize] {
                mv += inst.beta * sigma.get(w as usize) as f64;
            }
            energy += 2.0 * sv * mv;
            sigma.flip(v);
            log_w[gray(i)] = -energy;
        }
        let log_z = log_sum_exp(&log_w);
        let log_probs: Vec<f64> = log_w.iter().map(|w| w - log_z).collect();
        let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
        Ok(ExactGibbs { inst: inst.clone(), log_probs, probs, log_z, nbr_offsets, nbrs })
    }

    pub fn num_sites(&self) -> usize {
        self.inst.len()
    }

    pub fn num_configs(&self) -> usize {
        self.probs.len()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, code: usize) -> f64 {
        self.probs[code]
    }

    pub fn log_prob(&self, code: usize) -> f64 {
        self.log_probs[code]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Expectation of a function table over configurations.
    pub fn mean_table(&self, phi: &[f64]) -> f64 {
        self.probs.iter().zip(phi).map(|(p, f)| p * f).sum()
    }

    /// Variance of a function table.
    pub fn variance_table(&self, phi: &[f64]) -> f64 {
        let m = self.mean_table(phi);
        self.probs.iter().zip(phi).map(|(p, f)| p * (f - m) * (f - m)).sum()
    }

    pub fn site_plus_prob(&self, v: VertexId) -> f64 {
        (0..self.num_configs()).filter(|&c| c >> v & 1 == 1).map(|c| self.probs[c]).sum()
    }

    pub fn site_mean(&self, v: VertexId) -> f64 {
        (0..self.num_configs()).map(|c| self.probs[c] * spin_of(c, v)).sum()
    }

    pub fn mean_spins(&self) -> Vec<f64> {
        (0..self.num_sites()).map(|v| self.site_mean(v)).collect()
    }

    /// Exact spin covariance matrix, row-major `N x N`.
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.num_sites();
        let a = self.mean_spins();
        let mut second = vec![0.0f64; n * n];
        for (c, &p) in self.probs.iter().enumerate() {
            for u in 0..n {
                let su = spin_of(c, u);
                for v in u..n {
                    second[u * n + v] += p * su * spin_of(c, v);
                }
            }
        }
        let mut cov = vec![0.0f64; n * n];
        for u in 0..n {
            for v in u..n {
                let x = second[u * n + v] - a[u] * a[v];
                cov[u * n + v] = x;
                cov[v * n + u] = x;
            }
        }
        cov
    }

    /// Total variation over the full table.
    pub fn tv_full(&self, other: &ExactGibbs) -> Result<f64> {
        if self.num_configs() != other.num_configs() {
            return Err(Error::MismatchedDomains);
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// `|P_1(sigma_v = +1) - P_2(sigma_v = +1)|` for a shared vertex.
    pub fn tv_site_marginal(&self, other: &ExactGibbs, v: VertexId) -> Result<f64> {
        if self.num_sites() != other.num_sites()
            || self.inst.domain.coords_of(v) != other.inst.domain.coords_of(v)
        {
            return Err(Error::MismatchedDomains);
        }
        Ok((self.site_plus_prob(v) - other.site_plus_prob(v)).abs())
    }

    /// Heat-bath Dirichlet form: sum over unordered single-flip pairs of
    /// `mu(s) mu(s') / (mu(s) + mu(s'))` times the squared increment.
    pub fn dirichlet_form(&self, phi: &[f64]) -> f64 {
        let n = self.num_sites();
        let mut e = 0.0;
        for c in 0..self.num_configs() {
            for v in 0..n {
                if c >> v & 1 == 0 {
                    let c2 = c | 1 << v;
                    let lw = self.log_probs[c] + self.log_probs[c2]
                        - lse2(self.log_probs[c], self.log_probs[c2]);
                    let df = phi[c] - phi[c2];
                    e += lw.exp() * df * df;
                }
            }
        }
        e
    }

    /// The single-flip pair weights of the Dirichlet form, for callers
    /// evaluating many test functions on one table.
    pub fn dirichlet_pair_weights(&self) -> Vec<(usize, usize, f64)> {
        let n = self.num_sites();
        let mut out = Vec::with_capacity(self.num_configs() / 2 * n);
        for c in 0..self.num_configs() {
            for v in 0..n {
                if c >> v & 1 == 0 {
                    let c2 = c | 1 << v;
                    let lw = self.log_probs[c] + self.log_probs[c2]
                        - lse2(self.log_probs[c], self.log_probs[c2]);
                    out.push((c, c2, lw.exp()));
                }
            }
        }
        out
    }

    /// Rate of flipping vertex `v` from configuration `c`: the heat-bath
    /// conditional probability of the flipped value, computed from the
    /// local field (independent of the table path).
    pub fn flip_rate(&self, c: usize, v: usize) -> f64 {
        let mut mv = self.inst.field()[v];
        for &w in &self.nbrs[self.nbr_offsets[v] as usize..self.nbr_offsets[v + 1] as usize] {
            mv += self.inst.beta * spin_of(c, w as usize);
        }
        let (plus, minus) = conditional_split(mv);
        if c >> v & 1 == 1 {
            minus
        } else {
            plus
        }
    }

    /// Max residual of `mu(s) L(s,s') = mu(s') L(s',s)` over single-flip
    /// pairs; rates come from local fields, the measure from the table,
    /// so a wrong rate choice shows up here.
    pub fn detailed_balance_residual(&self) -> f64 {
        let n = self.num_sites();
        let mut worst = 0.0f64;
        for c in 0..self.num_configs() {
            for v in 0..n {
                if c >> v & 1 == 0 {
                    let c2 = c | 1 << v;
                    let fwd = self.probs[c] * self.flip_rate(c, v);
                    let bwd = self.probs[c2] * self.flip_rate(c2, v);
                    worst = worst.max((fwd - bwd).abs());
                }
            }
        }
        worst
    }

    /// Dirichlet form evaluated through the generator rates,
    /// `sum mu(s) L(s,s') (phi(s)-phi(s'))^2` over unordered pairs.
    pub fn generator_dirichlet(&self, phi: &[f64]) -> f64 {
        let n = self.num_sites();
        let mut e = 0.0;
        for c in 0..self.num_configs() {
            for v in 0..n {
                if c >> v & 1 == 0 {
                    let c2 = c | 1 << v;
                    let df = phi[c] - phi[c2];
                    e += self.probs[c] * self.flip_rate(c, v) * df * df;
                }
            }
        }
        e
    }

    /// Dense spectrum of the negated generator in the mu-weighted inner
    /// product, via the symmetrized matrix `D^{1/2} L D^{-1/2}`.
    pub fn generator_spectrum(&self) -> Result<GeneratorSpectrum> {
        let n = self.num_sites();
        if n > N_SPEC {
            return Err(Error::TooLarge { n, cap: N_SPEC });
        }
        let m = self.num_configs();
        let mut s = DMatrix::<f64>::zeros(m, m);
        for c in 0..m {
            let mut total = 0.0;
            for v in 0..n {
                let c2 = c ^ (1 << v);
                let rate = self.flip_rate(c, v);
                total += rate;
                let sym = ((self.log_probs[c] - self.log_probs[c2]) / 2.0).exp() * rate;
                s[(c, c2)] = sym;
            }
            s[(c, c)] = -total;
        }
        // enforce exact symmetry before the eigensolve
        for c in 0..m {
            for c2 in (c + 1)..m {
                let avg = 0.5 * (s[(c, c2)] + s[(c2, c)]);
                s[(c, c2)] = avg;
                s[(c2, c)] = avg;
            }
        }
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| (-eig.eigenvalues[a]).partial_cmp(&(-eig.eigenvalues[b])).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| -eig.eigenvalues[i]).collect();
        let gap = eigenvalues[1.min(m - 1)];
        let gap_col = order[1.min(m - 1)];
        let gap_function: Vec<f64> = (0..m)
            .map(|c| eig.eigenvectors[(c, gap_col)] * (-self.log_probs[c] / 2.0).exp())
            .collect();
        Ok(GeneratorSpectrum { eigenvalues, gap, gap_function })
    }

    /// Evolve a probability vector under the continuous-time kernel for
    /// time `t`, by uniformization with Poisson weights in log space.
    pub fn evolve_measure(&self, x0: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.num_sites();
        if n > N_SPEC {
            return Err(Error::TooLarge { n, cap: N_SPEC });
        }
        let m = self.num_configs();
        if x0.len() != m {
            return Err(Error::IndexMismatch { expected: m, got: x0.len() });
        }
        let rates: Vec<f64> =
            (0..m).flat_map(|c| (0..n).map(move |v| self.flip_rate(c, v))).collect();
        let lambda = n as f64;
        let lt = lambda * t;
        let k_max = (lt + 12.0 * lt.sqrt() + 40.0).ceil() as usize;
        let mut x = x0.to_vec();
        let mut acc = vec![0.0f64; m];
        let mut log_w = -lt;
        let mut covered = 0.0;
        for k in 0..=k_max {
            if k > 0 {
                // one uniformized step of the measure
                let mut y = vec![0.0f64; m];
                for c in 0..m {
                    let xc = x[c];
                    if xc == 0.0 {
                        continue;
                    }
                    let mut stay = 1.0;
                    for v in 0..n {
                        let r = rates[c * n + v] / lambda;
                        stay -= r;
                        y[c ^ (1 << v)] += xc * r;
                    }
                    y[c] += xc * stay;
                }
                x = y;
                log_w += lt.ln() - (k as f64).ln();
            }
            let w = log_w.exp();
            if w > 0.0 {
                covered += w;
                for c in 0..m {
                    acc[c] += w * x[c];
                }
                if covered > 1.0 - 1e-13 {
                    break;
                }
            }
        }
        // spread truncated tail mass proportionally to keep the vector stochastic
        if covered < 1.0 {
            let scale = 1.0 / covered;
            for a in acc.iter_mut() {
                *a *= scale;
            }
        }
        Ok(acc)
    }

    /// Worst-start total variation to stationarity at time `t`.
    pub fn tv_worst_start(&self, t: f64) -> Result<f64> {
        let m = self.num_configs();
        let mut worst = 0.0f64;
        let mut x0 = vec![0.0f64; m];
        for start in 0..m {
            x0[start] = 1.0;
            let at_t = self.evolve_measure(&x0, t)?;
            x0[start] = 0.0;
            let tv =
                0.5 * at_t.iter().zip(&self.probs).map(|(a, p)| (a - p).abs()).sum::<f64>();
            worst = worst.max(tv);
        }
        Ok(worst)
    }

    /// Perfect sample via sequential prefix conditionals in vertex-id
    /// order, consuming one uniform per vertex from `uniforms`.
    pub fn sample_sequential(&self, uniforms: &mut impl FnMut(usize) -> f64) -> SpinConfig {
        let n = self.num_sites();
        let mut active: Vec<usize> = (0..self.num_configs()).collect();
        let mut out = SpinConfig::all_minus(n);
        for v in 0..n {
            let mut plus = 0.0;
            let mut total = 0.0;
            for &c in &active {
                let p = self.probs[c];
                total += p;
                if c >> v & 1 == 1 {
                    plus += p;
                }
            }
            let take_plus = uniforms(v) < plus / total;
            if take_plus {
                out.set(v, 1);
            }
            active.retain(|&c| (c >> v & 1 == 1) == take_plus);
        }
        out
    }

    /// Perfect sample driven by an RNG.
    pub fn sample(&self, rng: &mut impl Rng) -> SpinConfig {
        self.sample_sequential(&mut |_| rng.random::<f64>())
    }

    /// Gibbs-table dump: CSV `config-code,log-prob`.
    pub fn write_table_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "config-code,log-prob")?;
        for (c, lp) in self.log_probs.iter().enumerate() {
            writeln!(w, "{c},{lp:.16e}")?;
        }
        Ok(())
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Sorted spectrum of the negated generator.
#[derive(Debug, Clone)]
pub struct GeneratorSpectrum {
    /// Eigenvalues of `-L`, ascending; the first is 0 up to rounding.
    pub eigenvalues: Vec<f64>,
    /// Second-smallest eigenvalue of `-L`.
    pub gap: f64,
    /// A test function achieving the gap in the variational form.
    pub gap_function: Vec<f64>,
}

impl GeneratorSpectrum {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eigenvalue")?;
        for ev in &self.eigenvalues {
            writeln!(w, "{ev:.16e}")?;
        }
        Ok(())
    }
}
