//! Finite subdomains of `Z^d`: boxes, balls, boundaries, the nucleation
//! enumeration used by the incremental sampler, and coarse lattices for
//! the Good/Bad percolation process.
//!
//! Vertices are identified by dense ids assigned in lexicographic
//! coordinate order; every iteration order in the crate derives from
//! these ids so results are seed-reproducible. Boxes keep their
//! adjacency implicit (coordinate arithmetic); irregular vertex sets
//! carry an explicit adjacency list.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type VertexId = usize;

/// ell-infinity distance between coordinate tuples.
pub fn linf_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// ell-1 distance between coordinate tuples.
pub fn l1_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone)]
enum Shape {
    /// `[-n, n]^d` with implicit nearest-neighbor adjacency.
    Box { radius: i64 },
    /// Arbitrary vertex set with explicit induced adjacency (CSR).
    Subset { index: HashMap<Vec<i64>, VertexId>, adj_offsets: Vec<u32>, adj: Vec<u32> },
}

/// A finite vertex subset of `Z^d` with nearest-neighbor adjacency.
#[derive(Debug, Clone)]
pub struct Domain {
    d: usize,
    /// Flattened N x d coordinate rows in lexicographic order.
    coords: Vec<i64>,
    shape: Shape,
}

impl Domain {
    /// The box `[-n, n]^d` with `(2n+1)^d` vertices.
    pub fn make_box(n: i64, d: usize) -> Result<Domain> {
        if n < 0 || d == 0 {
            return Err(Error::invalid("make_box requires n >= 0 and d >= 1"));
        }
        let side = 2 * n as u128 + 1;
        let mut vol: u128 = 1;
        for _ in 0..d {
            vol = vol
                .checked_mul(side)
                .filter(|&v| v <= usize::MAX as u128 / 16)
                .ok_or(Error::IndexOverflow { n, d })?;
        }
        let nvert = vol as usize;
        let mut coords = Vec::with_capacity(nvert * d);
        let mut cur = vec![-n; d];
        loop {
            coords.extend_from_slice(&cur);
            // lexicographic increment, least-significant coordinate last
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(Domain { d, coords, shape: Shape::Box { radius: n } });
                }
                k -= 1;
                if cur[k] < n {
                    cur[k] += 1;
                    for c in cur.iter_mut().skip(k + 1) {
                        *c = -n;
                    }
                    break;
                }
            }
        }
    }

    /// Build an irregular domain from explicit coordinates.
    /// Rows are sorted lexicographically and must be duplicate-free.
    pub fn from_coords(d: usize, mut rows: Vec<Vec<i64>>) -> Result<Domain> {
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("coordinate rows must all have length d >= 1"));
        }
        rows.sort();
        if rows.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate vertices in domain"));
        }
        let mut index = HashMap::with_capacity(rows.len());
        let mut coords = Vec::with_capacity(rows.len() * d);
        for (id, row) in rows.iter().enumerate() {
            index.insert(row.clone(), id);
            coords.extend_from_slice(row);
        }
        // induced nearest-neighbor adjacency
        let n = rows.len();
        let mut adj_offsets = Vec::with_capacity(n + 1);
        let mut adj = Vec::new();
        adj_offsets.push(0u32);
        let mut probe = vec![0i64; d];
        for row in rows.iter() {
            for k in 0..d {
                for s in [-1i64, 1] {
                    probe.copy_from_slice(row);
                    probe[k] += s;
                    if let Some(&j) = index.get(&probe) {
                        adj.push(j as u32);
                    }
                }
            }
            adj_offsets.push(adj.len() as u32);
        }
        Ok(Domain { d, coords, shape: Shape::Subset { index, adj_offsets, adj } })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of vertices N.
    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Box radius when the domain is a full box.
    pub fn box_radius(&self) -> Option<i64> {
        match self.shape {
            Shape::Box { radius } => Some(radius),
            Shape::Subset { .. } => None,
        }
    }

    pub fn coords_of(&self, v: VertexId) -> &[i64] {
        &self.coords[v * self.d..(v + 1) * self.d]
    }

    /// Dense id of a coordinate tuple, if the vertex is a member.
    pub fn id_of(&self, pt: &[i64]) -> Option<VertexId> {
        debug_assert_eq!(pt.len(), self.d);
        match &self.shape {
            Shape::Box { radius } => {
                let n = *radius;
                let side = (2 * n + 1) as usize;
                let mut id = 0usize;
                for &x in pt {
                    if x < -n || x > n {
                        return None;
                    }
                    id = id * side + (x + n) as usize;
                }
                Some(id)
            }
            Shape::Subset { index, .. } => index.get(pt).copied(),
        }
    }

    pub fn contains(&self, pt: &[i64]) -> bool {
        self.id_of(pt).is_some()
    }

    /// Nearest-neighbor ids of `v`, pushed into `out` (cleared first).
    pub fn neighbors_into(&self, v: VertexId, out: &mut Vec<VertexId>) {
        out.clear();
        match &self.shape {
            Shape::Box { radius } => {
                let n = *radius;
                let side = (2 * n + 1) as usize;
                // Strides are side^(d-1-k); walk coordinates from the id.
                let mut rem = v;
                let mut stride = side.pow(self.d as u32 - 1);
                for _ in 0..self.d {
                    let xk = (rem / stride) as i64 - n;
                    if xk > -n {
                        out.push(v - stride);
                    }
                    if xk < n {
                        out.push(v + stride);
                    }
                    rem %= stride;
                    stride /= side.max(1);
                    if stride == 0 {
                        break;
                    }
                }
            }
            Shape::Subset { adj_offsets, adj, .. } => {
                let lo = adj_offsets[v] as usize;
                let hi = adj_offsets[v + 1] as usize;
                out.extend(adj[lo..hi].iter().map(|&x| x as usize));
            }
        }
    }

    pub fn neighbor_ids(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(2 * self.d);
        self.neighbors_into(v, &mut out);
        out
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbor_ids(v).len()
    }

    /// Edges (u, v) with u < v, each unordered pair once.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        let mut buf = Vec::with_capacity(2 * self.d);
        for v in 0..self.len() {
            self.neighbors_into(v, &mut buf);
            for &w in &buf {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }

    /// `B_r(o)` intersected with the domain, as an induced subdomain.
    /// The second return value maps new ids to parent ids.
    pub fn ball(&self, o: VertexId, r: i64) -> Result<(Domain, Vec<VertexId>)> {
        if o >= self.len() {
            return Err(Error::VertexNotInDomain(vec![o as i64]));
        }
        if r < 0 {
            return Err(Error::invalid("ball radius must be >= 0"));
        }
        let center = self.coords_of(o).to_vec();
        let member_ids: Vec<VertexId> =
            (0..self.len()).filter(|&v| linf_dist(self.coords_of(v), &center) <= r).collect();
        let rows: Vec<Vec<i64>> = member_ids.iter().map(|&v| self.coords_of(v).to_vec()).collect();
        let sub = Domain::from_coords(self.d, rows)?;
        // from_coords sorts lexicographically, which matches parent id order
        Ok((sub, member_ids))
    }

    /// Exterior vertex boundary of `A` within this domain: members of the
    /// domain outside `A` with at least one nearest neighbor in `A`.
    pub fn exterior_boundary(&self, members: &[bool]) -> Vec<VertexId> {
        assert_eq!(members.len(), self.len());
        let mut out = Vec::new();
        let mut buf = Vec::with_capacity(2 * self.d);
        for v in 0..self.len() {
            if members[v] {
                continue;
            }
            self.neighbors_into(v, &mut buf);
            if buf.iter().any(|&w| members[w]) {
                out.push(v);
            }
        }
        out
    }

    /// Convenience form of [`Domain::exterior_boundary`] on an id list.
    pub fn boundary_of(&self, set: &[VertexId]) -> Vec<VertexId> {
        let mut members = vec![false; self.len()];
        for &v in set {
            members[v] = true;
        }
        self.exterior_boundary(&members)
    }

    /// Serialize as a header line `d N` followed by coordinate rows.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.d, self.len())?;
        for v in 0..self.len() {
            let row: Vec<String> = self.coords_of(v).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Domain> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty domain snapshot"))?
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut it = header.split_whitespace();
        let d: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::invalid("bad domain header"))?;
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::invalid("bad domain header"))?;
        let mut rows = Vec::with_capacity(n);
        for line in lines.take(n) {
            let line = line.map_err(|e| Error::invalid(e.to_string()))?;
            let row: Vec<i64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if row.len() != d {
                return Err(Error::invalid("coordinate row has wrong arity"));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::invalid("domain snapshot truncated"));
        }
        Domain::from_coords(d, rows)
    }
}

/// Origin-centered nucleation order for a box: vertex ids listed shell by
/// shell, so every prefix `A` satisfies `B_r(o) ⊆ A ⊆ B_{r+1}(o)` for
/// some radius r (the cube-like family used by the incremental sampler).
pub fn nucleation_order(domain: &Domain) -> Result<Vec<VertexId>> {
    let origin = vec![0i64; domain.dim()];
    let o = match domain.box_radius() {
        Some(_) => domain.id_of(&origin).ok_or(Error::NotABox)?,
        None => return Err(Error::NotABox),
    };
    shell_order(domain, o)
}

/// Shell order anchored at an arbitrary nucleus: vertices sorted by
/// ell-infinity distance from `o`, lexicographic within a shell. Every
/// prefix lies between consecutive balls `B_r(o) ∩ Λ`.
pub fn shell_order(domain: &Domain, o: VertexId) -> Result<Vec<VertexId>> {
    if o >= domain.len() {
        return Err(Error::VertexNotInDomain(vec![o as i64]));
    }
    let center = domain.coords_of(o).to_vec();
    let max_r = (0..domain.len())
        .map(|v| linf_dist(domain.coords_of(v), &center))
        .max()
        .unwrap_or(0) as usize;
    let mut by_shell: Vec<Vec<VertexId>> = vec![Vec::new(); max_r + 1];
    for v in 0..domain.len() {
        let r = linf_dist(domain.coords_of(v), &center);
        by_shell[r as usize].push(v);
    }
    // ids are already lexicographic in coordinates
    let mut order = Vec::with_capacity(domain.len());
    for shell in by_shell {
        order.extend(shell);
    }
    Ok(order)
}

/// True iff `A` lies between consecutive origin-centered balls:
/// there is `r <= n-1` with `B_r(o) ⊆ A ⊆ B_{r+1}(o)`.
pub fn is_cube_like(domain: &Domain, set: &[VertexId], n: i64) -> bool {
    let origin = vec![0i64; domain.dim()];
    let o = match domain.id_of(&origin) {
        Some(id) => id,
        None => return false,
    };
    let mut members = vec![false; domain.len()];
    for &v in set {
        members[v] = true;
    }
    if !members[o] {
        return false;
    }
    let r_out = set.iter().map(|&v| linf_dist(domain.coords_of(v), &origin)).max().unwrap_or(0);
    // largest radius whose full ball is contained in the set
    let mut r_in = 0i64;
    'grow: while r_in < n {
        let r = r_in + 1;
        for v in 0..domain.len() {
            if linf_dist(domain.coords_of(v), &origin) <= r && !members[v] {
                break 'grow;
            }
        }
        r_in = r;
    }
    r_out <= r_in.min(n - 1) + 1
}

/// Good/Bad label of a coarse site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Good,
    Bad,
}

/// The coarse lattice `Λ_n ∩ R Z^d` with optional Good/Bad labels.
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    d: usize,
    n: i64,
    r_coarse: u32,
    /// Flattened coarse-site coordinates in lexicographic order.
    coords: Vec<i64>,
    labels: Vec<Option<Label>>,
    /// Estimator margin recorded per site by the classifier (0 if unset).
    margins: Vec<f64>,
}

impl CoarseGrid {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn box_radius(&self) -> i64 {
        self.n
    }

    pub fn coarse_radius(&self) -> u32 {
        self.r_coarse
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn site_coords(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.labels[i]
    }

    pub fn margin(&self, i: usize) -> f64 {
        self.margins[i]
    }

    pub fn set_label(&mut self, i: usize, label: Label, margin: f64) {
        self.labels[i] = Some(label);
        self.margins[i] = margin;
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.iter().all(|l| l.is_some())
    }

    pub fn sites_with(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == Some(label)).collect()
    }

    /// R-adjacency: ell-2 distance exactly R (one axis step).
    pub fn r_adjacent(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.site_coords(i), self.site_coords(j));
        let r = self.r_coarse as i64;
        let mut axis = 0usize;
        for (x, y) in a.iter().zip(b) {
            match (x - y).abs() {
                0 => {}
                dv if dv == r => axis += 1,
                _ => return false,
            }
        }
        axis == 1
    }

    /// R-*-adjacency: ell-infinity distance exactly R.
    pub fn r_star_adjacent(&self, i: usize, j: usize) -> bool {
        i != j && linf_dist(self.site_coords(i), self.site_coords(j)) == self.r_coarse as i64
    }

    /// Maximal R-*-connected components among sites of the given label.
    pub fn r_star_clusters(&self, label: Label) -> Result<Vec<Vec<usize>>> {
        if !self.is_labeled() {
            return Err(Error::UnlabeledGrid);
        }
        let sites = self.sites_with(label);
        let mut seen = vec![false; self.len()];
        let mut clusters = Vec::new();
        for &start in &sites {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &sites {
                    if !seen[w] && self.r_star_adjacent(v, w) {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            clusters.push(comp);
        }
        clusters.sort();
        Ok(clusters)
    }
}

/// Coarse lattice `Λ_n ∩ R Z^d`, labels unset. A radius larger than the
/// box leaves just the origin site.
pub fn coarse_lattice(domain: &Domain, r_coarse: u32) -> Result<CoarseGrid> {
    let n = domain.box_radius().ok_or(Error::NotABox)?;
    if r_coarse < 2 {
        return Err(Error::CoarseRadiusTooSmall(r_coarse));
    }
    let d = domain.dim();
    let r = r_coarse as i64;
    let mut axis = Vec::new();
    let mut x = -(n / r) * r;
    while x <= n {
        axis.push(x);
        x += r;
    }
    let mut coords = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        for k in 0..d {
            coords.push(axis[idx[k]]);
        }
        let mut k = d;
        loop {
            if k == 0 {
                let nsites = coords.len() / d;
                return Ok(CoarseGrid {
                    d,
                    n,
                    r_coarse,
                    coords,
                    labels: vec![None; nsites],
                    margins: vec![0.0; nsites],
                });
            }
            k -= 1;
            if idx[k] + 1 < axis.len() {
                idx[k] += 1;
                for i in idx.iter_mut().skip(k + 1) {
                    *i = 0;
                }
                break;
            }
        }
    }
}
