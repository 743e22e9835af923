//! Lattice connectivity of an n-per-axis cage and its per-corner stencils.

/// One differential-coordinate term: `vertex` is predicted from `neighbors`.
/// In 2D only the first two neighbors are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CornerTerm {
    pub neighbors: [usize; 3],
    pub vertex: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CageTopology {
    n: usize,
    ndim: usize,
    terms: Vec<CornerTerm>,
}

impl CageTopology {
    pub fn new(n: usize, ndim: usize) -> Self {
        assert!(n >= 1, "cage needs at least one cell per axis");
        assert!(ndim == 2 || ndim == 3, "cage dimension must be 2 or 3");
        let mut topo = Self {
            n,
            ndim,
            terms: Vec::new(),
        };
        topo.terms = topo.build_terms();
        topo
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Vertex count `(n+1)^d`.
    pub fn vertex_count(&self) -> usize {
        (self.n + 1).pow(self.ndim as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.ndim as u32)
    }

    pub fn terms(&self) -> &[CornerTerm] {
        &self.terms
    }

    pub fn vertex(&self, i: usize, j: usize, k: usize) -> usize {
        let s = self.n + 1;
        i + s * (j + s * k)
    }

    pub fn lattice(&self, v: usize) -> [usize; 3] {
        let s = self.n + 1;
        [v % s, (v / s) % s, v / (s * s)]
    }

    /// Cells as lattice index triples (k = 0 in 2D).
    pub fn cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.n;
        let nz = if self.ndim == 3 { n } else { 1 };
        (0..nz).flat_map(move |k| (0..n).flat_map(move |j| (0..n).map(move |i| [i, j, k])))
    }

    /// Corner vertices of a cell in bit order: bit 0 = +x, bit 1 = +y, bit 2 = +z.
    pub fn cell_vertices(&self, cell: [usize; 3]) -> Vec<usize> {
        let corners = 1usize << self.ndim;
        (0..corners)
            .map(|b| {
                self.vertex(
                    cell[0] + (b & 1),
                    cell[1] + ((b >> 1) & 1),
                    cell[2] + ((b >> 2) & 1),
                )
            })
            .collect()
    }

    /// Edge-adjacent vertices.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let l = self.lattice(v);
        let mut out = Vec::with_capacity(2 * self.ndim);
        for a in 0..self.ndim {
            if l[a] > 0 {
                let mut q = l;
                q[a] -= 1;
                out.push(self.vertex(q[0], q[1], q[2]));
            }
            if l[a] < self.n {
                let mut q = l;
                q[a] += 1;
                out.push(self.vertex(q[0], q[1], q[2]));
            }
        }
        out
    }

    fn build_terms(&self) -> Vec<CornerTerm> {
        let mut terms = Vec::with_capacity(self.cell_count() << self.ndim);
        let cells: Vec<[usize; 3]> = self.cells().collect();
        for cell in cells {
            for b in 0..(1usize << self.ndim) {
                let corner = [b & 1, (b >> 1) & 1, (b >> 2) & 1];
                let at = |c: [usize; 3]| self.vertex(cell[0] + c[0], cell[1] + c[1], cell[2] + c[2]);
                let flip = |a: usize| {
                    let mut c = corner;
                    c[a] ^= 1;
                    c
                };
                // Step direction from the corner toward each in-cell neighbor.
                let s: Vec<f64> = (0..3).map(|a| if corner[a] == 0 { 1.0 } else { -1.0 }).collect();
                let vertex = at(corner);
                let neighbors = if self.ndim == 3 {
                    // Order so that (v1-v0) x (v2-v0) points away from the corner.
                    if s[0] * s[1] * s[2] > 0.0 {
                        [at(flip(0)), at(flip(1)), at(flip(2))]
                    } else {
                        [at(flip(0)), at(flip(2)), at(flip(1))]
                    }
                } else if s[0] * s[1] > 0.0 {
                    // Counter-clockwise around the corner: cross(v0-v3, v1-v3) > 0.
                    [at(flip(0)), at(flip(1)), usize::MAX]
                } else {
                    [at(flip(1)), at(flip(0)), usize::MAX]
                };
                terms.push(CornerTerm { neighbors, vertex });
            }
        }
        terms
    }
}
