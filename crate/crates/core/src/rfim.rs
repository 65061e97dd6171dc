//! The RFIM Gibbs measure: Hamiltonian, quenched field generation,
//! pinned/conditional instances, and single-site conditional laws.
//!
//! Boundary conditions are folded into an effective per-site field at pin
//! time, so a pinned system is again a plain [`RfimInstance`] and every
//! downstream operation works on it unchanged. All-plus/all-minus
//! pinnings are represented by explicit spins, never by infinite fields.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lattice::{Domain, VertexId};
use crate::rng::{stream, StreamTag};

/// Quenched-field law; all random kinds are symmetric about 0.
#[derive(Debug, Clone)]
pub enum FieldKind {
    /// Centered normal with the given variance.
    Gaussian { sigma2: f64 },
    /// `±a` with equal probability.
    TwoPoint { a: f64 },
    /// Uniform on `[-a, a]`.
    UniformSymmetric { a: f64 },
    /// Deterministic per-vertex values (flagged non-random).
    Fixed { values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub seed: u64,
}

impl FieldSpec {
    pub fn gaussian(sigma2: f64, seed: u64) -> Self {
        FieldSpec { kind: FieldKind::Gaussian { sigma2 }, seed }
    }

    pub fn two_point(a: f64, seed: u64) -> Self {
        FieldSpec { kind: FieldKind::TwoPoint { a }, seed }
    }

    pub fn uniform(a: f64, seed: u64) -> Self {
        FieldSpec { kind: FieldKind::UniformSymmetric { a }, seed }
    }

    pub fn fixed(values: Vec<f64>) -> Self {
        FieldSpec { kind: FieldKind::Fixed { values }, seed: 0 }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self.kind, FieldKind::Fixed { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FieldKind::Gaussian { .. } => "gaussian",
            FieldKind::TwoPoint { .. } => "two-point",
            FieldKind::UniformSymmetric { .. } => "uniform",
            FieldKind::Fixed { .. } => "fixed",
        }
    }
}

/// I.i.d. field draw, deterministic per `(seed, vertex id)` so the result
/// does not depend on iteration or thread order.
pub fn sample_field(spec: &FieldSpec, domain: &Domain) -> Result<Vec<f64>> {
    let n = domain.len();
    match &spec.kind {
        FieldKind::Fixed { values } => {
            if values.len() != n {
                return Err(Error::IndexMismatch { expected: n, got: values.len() });
            }
            Ok(values.clone())
        }
        kind => {
            let mut out = Vec::with_capacity(n);
            for v in 0..n {
                let mut rng = stream(spec.seed, StreamTag::Field, v as u64, 0, 0);
                let x = match kind {
                    FieldKind::Gaussian { sigma2 } => {
                        Normal::new(0.0, sigma2.sqrt()).unwrap().sample(&mut rng)
                    }
                    FieldKind::TwoPoint { a } => {
                        if rng.random::<bool>() {
                            *a
                        } else {
                            -*a
                        }
                    }
                    FieldKind::UniformSymmetric { a } => rng.random_range(-*a..=*a),
                    FieldKind::Fixed { .. } => unreachable!(),
                };
                out.push(x);
            }
            Ok(out)
        }
    }
}

/// A spin configuration indexed by a domain; entries are `±1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        SpinConfig { spins }
    }

    pub fn all_plus(n: usize) -> Self {
        SpinConfig { spins: vec![1; n] }
    }

    pub fn all_minus(n: usize) -> Self {
        SpinConfig { spins: vec![-1; n] }
    }

    /// Decode a configuration code: bit i set means spin +1 at vertex i.
    pub fn from_code(code: usize, n: usize) -> Self {
        SpinConfig { spins: (0..n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect() }
    }

    pub fn to_code(&self) -> usize {
        self.spins.iter().enumerate().fold(0, |acc, (i, &s)| acc | ((s == 1) as usize) << i)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, v: VertexId) -> i8 {
        self.spins[v]
    }

    pub fn set(&mut self, v: VertexId, s: i8) {
        debug_assert!(s == 1 || s == -1);
        self.spins[v] = s;
    }

    pub fn flip(&mut self, v: VertexId) {
        self.spins[v] = -self.spins[v];
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    /// Vertexwise partial order.
    pub fn le(&self, other: &SpinConfig) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a <= b)
    }
}

/// Boundary spin record kept for provenance after folding.
#[derive(Debug, Clone)]
pub struct BoundarySpin {
    pub coords: Vec<i64>,
    pub spin: i8,
}

/// An RFIM `(Λ, β, h, τ)`; the stored field is the effective one with any
/// boundary condition already folded in.
#[derive(Debug, Clone)]
pub struct RfimInstance {
    pub domain: Arc<Domain>,
    pub beta: f64,
    field: Vec<f64>,
    boundary: Vec<BoundarySpin>,
}

impl RfimInstance {
    pub fn new(domain: Arc<Domain>, beta: f64, field: Vec<f64>) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::invalid("beta must be >= 0 (ferromagnetic)"));
        }
        if field.len() != domain.len() {
            return Err(Error::IndexMismatch { expected: domain.len(), got: field.len() });
        }
        if field.iter().any(|h| !h.is_finite()) {
            return Err(Error::invalid("field entries must be finite"));
        }
        Ok(RfimInstance { domain, beta, field, boundary: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn boundary(&self) -> &[BoundarySpin] {
        &self.boundary
    }

    /// Copy with the field replaced (same domain, beta, boundary record).
    pub fn with_field(&self, field: Vec<f64>) -> Result<Self> {
        if field.len() != self.len() {
            return Err(Error::IndexMismatch { expected: self.len(), got: field.len() });
        }
        Ok(RfimInstance {
            domain: Arc::clone(&self.domain),
            beta: self.beta,
            field,
            boundary: self.boundary.clone(),
        })
    }

    /// Copy with `tilt` added to the field (the stochastic-localization
    /// tilted instance).
    pub fn tilted(&self, tilt: &[f64]) -> Result<Self> {
        if tilt.len() != self.len() {
            return Err(Error::IndexMismatch { expected: self.len(), got: tilt.len() });
        }
        self.with_field(self.field.iter().zip(tilt).map(|(h, y)| h + y).collect())
    }

    /// Energy of a configuration: minus beta times the edge agreement sum,
    /// minus the field term (boundary interactions are inside the field).
    pub fn hamiltonian(&self, sigma: &SpinConfig) -> Result<f64> {
        if sigma.len() != self.len() {
            return Err(Error::IndexMismatch { expected: self.len(), got: sigma.len() });
        }
        let mut e = 0.0;
        let mut buf = Vec::with_capacity(2 * self.domain.dim());
        for v in 0..self.len() {
            let sv = sigma.get(v) as f64;
            self.domain.neighbors_into(v, &mut buf);
            for &w in &buf {
                if v < w {
                    e -= self.beta * sv * sigma.get(w) as f64;
                }
            }
            e -= self.field[v] * sv;
        }
        Ok(e)
    }

    /// Local field `m_v = beta * sum of neighbor spins + h_v`.
    pub fn local_field(&self, sigma: &SpinConfig, v: VertexId) -> f64 {
        let mut m = self.field[v];
        let mut buf = Vec::with_capacity(2 * self.domain.dim());
        self.domain.neighbors_into(v, &mut buf);
        for &w in &buf {
            m += self.beta * sigma.get(w) as f64;
        }
        m
    }

    /// Heat-bath conditional `P(sigma_v = +1 | rest)`.
    pub fn conditional_plus_prob(&self, sigma: &SpinConfig, v: VertexId) -> f64 {
        conditional_split(self.local_field(sigma, v)).0
    }

    /// Complement computed by the symmetric formula, not subtraction.
    pub fn conditional_minus_prob(&self, sigma: &SpinConfig, v: VertexId) -> f64 {
        conditional_split(self.local_field(sigma, v)).1
    }

    /// Restrict to `A` with boundary spins `tau` on the exterior boundary
    /// of `A`; `tau` must cover the whole boundary. Returns the pinned
    /// instance and the parent ids of its vertices.
    pub fn pin(&self, set: &[VertexId], tau: &HashMap<VertexId, i8>) -> Result<(Self, Vec<VertexId>)> {
        let mut members = vec![false; self.len()];
        for &v in set {
            if v >= self.len() {
                return Err(Error::VertexNotInDomain(vec![v as i64]));
            }
            members[v] = true;
        }
        let bd = self.domain.exterior_boundary(&members);
        let missing = bd.iter().filter(|v| !tau.contains_key(v)).count();
        if missing > 0 {
            return Err(Error::BoundaryNotCovered(missing));
        }
        let ids: Vec<VertexId> = (0..self.len()).filter(|&v| members[v]).collect();
        if ids.len() == self.len() {
            return Ok((self.clone(), ids));
        }
        let rows: Vec<Vec<i64>> = ids.iter().map(|&v| self.domain.coords_of(v).to_vec()).collect();
        let sub = Domain::from_coords(self.domain.dim(), rows)?;
        // fold tau into the effective field of boundary-adjacent vertices
        let mut field: Vec<f64> = ids.iter().map(|&v| self.field[v]).collect();
        let mut buf = Vec::with_capacity(2 * self.domain.dim());
        for (new_id, &old_id) in ids.iter().enumerate() {
            self.domain.neighbors_into(old_id, &mut buf);
            for &w in &buf {
                if !members[w] {
                    field[new_id] += self.beta * tau[&w] as f64;
                }
            }
        }
        let mut boundary = self.boundary.clone();
        boundary.extend(bd.iter().map(|&w| BoundarySpin {
            coords: self.domain.coords_of(w).to_vec(),
            spin: tau[&w],
        }));
        let inst =
            RfimInstance { domain: Arc::new(sub), beta: self.beta, field, boundary };
        Ok((inst, ids))
    }

    /// Pin with a uniform boundary spin.
    pub fn pin_uniform(&self, set: &[VertexId], spin: i8) -> Result<(Self, Vec<VertexId>)> {
        let tau: HashMap<VertexId, i8> =
            self.domain.boundary_of(set).into_iter().map(|v| (v, spin)).collect();
        self.pin(set, &tau)
    }

    /// Pin with boundary spins read from a full configuration.
    pub fn pin_from_config(&self, set: &[VertexId], sigma: &SpinConfig) -> Result<(Self, Vec<VertexId>)> {
        let tau: HashMap<VertexId, i8> =
            self.domain.boundary_of(set).into_iter().map(|v| (v, sigma.get(v))).collect();
        self.pin(set, &tau)
    }

    /// Field snapshot: header `d N seed kind params`, one
    /// `coords h-value` row per vertex with 17 significant digits.
    pub fn write_field_snapshot<W: Write>(&self, spec: &FieldSpec, mut w: W) -> std::io::Result<()> {
        let params = match &spec.kind {
            FieldKind::Gaussian { sigma2 } => format!("{sigma2:.16e}"),
            FieldKind::TwoPoint { a } | FieldKind::UniformSymmetric { a } => format!("{a:.16e}"),
            FieldKind::Fixed { .. } => "-".to_string(),
        };
        writeln!(
            w,
            "{} {} {} {} {}",
            self.domain.dim(),
            self.len(),
            spec.seed,
            spec.kind_name(),
            params
        )?;
        for v in 0..self.len() {
            let row: Vec<String> =
                self.domain.coords_of(v).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{} {:.16e}", row.join(" "), self.field[v])?;
        }
        Ok(())
    }
}

/// Read back a field snapshot; returns `(d, coords rows, field values)`.
pub fn read_field_snapshot<R: BufRead>(r: R) -> Result<(usize, Vec<Vec<i64>>, Vec<f64>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty field snapshot"))?
        .map_err(|e| Error::invalid(e.to_string()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 {
        return Err(Error::invalid("bad field snapshot header"));
    }
    let d: usize = toks[0].parse().map_err(|_| Error::invalid("bad dimension"))?;
    let n: usize = toks[1].parse().map_err(|_| Error::invalid("bad count"))?;
    let mut rows = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for line in lines.take(n) {
        let line = line.map_err(|e| Error::invalid(e.to_string()))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(Error::invalid("bad field row"));
        }
        let row: Vec<i64> =
            toks[..d].iter().map(|t| t.parse().map_err(|_| Error::invalid("bad coord"))).collect::<Result<_>>()?;
        values.push(toks[d].parse::<f64>().map_err(|_| Error::invalid("bad field value"))?);
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::invalid("field snapshot truncated"));
    }
    Ok((d, rows, values))
}

/// `(P(+1), P(-1))` for local field m: `1/(1+e^{-2m})` and its mirror,
/// evaluated in the overflow-safe branch.
pub fn conditional_split(m: f64) -> (f64, f64) {
    if m >= 0.0 {
        let t = (-2.0 * m).exp();
        (1.0 / (1.0 + t), t / (1.0 + t))
    } else {
        let t = (2.0 * m).exp();
        (t / (1.0 + t), 1.0 / (1.0 + t))
    }
}
