use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A permitted collaboration link: transmitter `row` may use the measurement of sensor `col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub row: usize,
    pub col: usize,
}

/// Zero-one topology matrix `A` (M x N) together with its column-major link enumeration.
///
/// Link `l` is the `l`-th nonzero of `A` when the matrix is scanned column by column,
/// which is the order in which the entries of a collaboration matrix `W_k` are stacked
/// into the collaboration vector `w_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollaborationTopology {
    num_sensors: usize,
    num_transmitters: usize,
    adjacency: Vec<bool>, // row-major M x N
    links: Vec<Link>,
}

impl CollaborationTopology {
    /// Build from a row-major zero-one matrix with `num_transmitters` rows.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidParameter("topology needs at least one row".into()));
        }
        let n = rows[0].len();
        if n == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "topology must be M x N with 1 <= M <= N, got {m} x {n}"
            )));
        }
        let mut adjacency = Vec::with_capacity(m * n);
        for row in rows {
            check_dim("topology row length", n, row.len())?;
            for &v in row {
                match v {
                    0 => adjacency.push(false),
                    1 => adjacency.push(true),
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "topology entries must be 0 or 1, found {other}"
                        )))
                    }
                }
            }
        }
        Ok(Self::from_mask(m, n, adjacency))
    }

    fn from_mask(m: usize, n: usize, adjacency: Vec<bool>) -> Self {
        let mut links = Vec::new();
        for col in 0..n {
            for row in 0..m {
                if adjacency[row * n + col] {
                    links.push(Link { row, col });
                }
            }
        }
        Self {
            num_sensors: n,
            num_transmitters: m,
            adjacency,
            links,
        }
    }

    /// Amplify-and-forward topology: only self-links.
    pub fn diagonal(n: usize) -> Self {
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        Self::from_mask(n, n, adjacency)
    }

    /// Truncated adjacency from sensor positions: `A_mn = 1` iff `m = n` or the two
    /// sensors are within distance `radius` (inclusive). Only the first
    /// `num_transmitters` sensors talk to the fusion center.
    pub fn from_positions(positions: &[[f64; 2]], radius: f64, num_transmitters: usize) -> Self {
        let n = positions.len();
        let m = num_transmitters.min(n);
        let mut adjacency = vec![false; m * n];
        for row in 0..m {
            for col in 0..n {
                adjacency[row * n + col] = row == col || distance(positions[row], positions[col]) <= radius;
            }
        }
        Self::from_mask(m, n, adjacency)
    }

    /// Diagonal links plus the `extra` closest ordered sensor pairs (both directions of a
    /// pair are added together, so `extra` is rounded down to an even number).
    ///
    /// Useful for building topologies with a prescribed link count.
    pub fn nearest_pairs(positions: &[[f64; 2]], extra: usize) -> Self {
        let n = positions.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((distance(positions[i], positions[j]), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for &(_, i, j) in pairs.iter().take(extra / 2) {
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        Self::from_mask(n, n, adjacency)
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn num_transmitters(&self) -> usize {
        self.num_transmitters
    }

    /// Number of collaboration links `L` (ones in `A`).
    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn is_linked(&self, row: usize, col: usize) -> bool {
        self.adjacency[row * self.num_sensors + col]
    }

    /// Row-major zero-one rows, the serialized form of `A`.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.num_transmitters)
            .map(|r| {
                (0..self.num_sensors)
                    .map(|c| u8::from(self.is_linked(r, c)))
                    .collect()
            })
            .collect()
    }

    /// Embedding `B` (L x N) of a length-M coefficient vector `b`:
    /// `B_{l,n} = b_{m_l}` when `n = n_l`, zero otherwise, so that `b^T W = w^T B`
    /// for every `W` supported on `A`.
    pub fn embedding(&self, b: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim("embedding coefficient vector", self.num_transmitters, b.len())?;
        let mut out = DMatrix::zeros(self.num_links(), self.num_sensors);
        for (l, link) in self.links.iter().enumerate() {
            out[(l, link.col)] = b[link.row];
        }
        Ok(out)
    }

    /// Scatter a length-L collaboration vector into the M x N collaboration matrix.
    pub fn scatter(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("collaboration vector", self.num_links(), w.len())?;
        let mut out = DMatrix::zeros(self.num_transmitters, self.num_sensors);
        for (link, &v) in self.links.iter().zip(w) {
            out[(link.row, link.col)] = v;
        }
        Ok(out)
    }

    /// Gather the entries of `W` on the support of `A` in link order.
    pub fn gather(&self, w: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_dim("collaboration matrix rows", self.num_transmitters, w.nrows())?;
        check_dim("collaboration matrix cols", self.num_sensors, w.ncols())?;
        Ok(DVector::from_iterator(
            self.num_links(),
            self.links.iter().map(|l| w[(l.row, l.col)]),
        ))
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `n` sensor positions drawn uniformly on the unit square.
pub fn deploy_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Random geometric graph `RGG(n, d)` on the unit square with self-links, `M = N = n`.
pub fn generate_rgg<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    rng: &mut R,
) -> Result<(CollaborationTopology, Vec<[f64; 2]>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("RGG needs at least one sensor".into()));
    }
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(Error::InvalidParameter(format!(
            "RGG radius must lie in (0, sqrt 2], got {radius}"
        )));
    }
    let positions = deploy_uniform(n, rng);
    Ok((CollaborationTopology::from_positions(&positions, radius, n), positions))
}
