use crate::raster::ImageBuffer;

use super::{BlendError, BlendRegion};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; columns must be ascending.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Discrete Poisson problem over a blend region.
///
/// Unknown `k` is pixel `unknowns[k]` (raster order). For each unknown `p`
/// and channel `c` the row reads
/// `4 f_p - sum_{q in N_p, q interior} f_q
///   = sum_{q in N_p, q boundary} target_q + sum_{q in N_p} (source_p - source_q)`.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    pub unknowns: Vec<(u32, u32)>,
    pub matrix: CsrMatrix,
    /// One right-hand side per channel.
    pub rhs: Vec<Vec<f64>>,
}

const NONE: u32 = u32::MAX;

pub fn assemble(target: &ImageBuffer, source: &ImageBuffer, region: &BlendRegion) -> Result<PoissonSystem, BlendError> {
    if !target.same_shape(source) {
        return Err(BlendError::DimensionMismatch {
            expected: (target.width(), target.height(), target.channels()),
            actual: (source.width(), source.height(), source.channels()),
        });
    }
    if region.width() != target.width() || region.height() != target.height() {
        return Err(BlendError::DimensionMismatch {
            expected: (target.width(), target.height(), target.channels()),
            actual: (region.width(), region.height(), target.channels()),
        });
    }
    let w = target.width();
    let mut index = vec![NONE; region.mask().len()];
    let mut unknowns = Vec::with_capacity(region.interior_count());
    if let Some(b) = region.bbox() {
        for y in b.y0..=b.y1 {
            for x in b.x0..=b.x1 {
                if region.contains(x, y) {
                    index[y as usize * w as usize + x as usize] = unknowns.len() as u32;
                    unknowns.push((x, y));
                }
            }
        }
    }

    let channels = target.channels();
    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = vec![vec![0.0; unknowns.len()]; channels as usize];
    for (k, &(x, y)) in unknowns.iter().enumerate() {
        // Raster order keeps columns ascending: up, left, self, right, down.
        let neighbors = [(x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)];
        let mut row = Vec::with_capacity(5);
        for (i, &(nx, ny)) in neighbors.iter().enumerate() {
            if i == 2 {
                row.push((k, 4.0));
            }
            let j = index[ny as usize * w as usize + nx as usize];
            if j != NONE {
                row.push((j as usize, -1.0));
            }
        }
        rows.push(row);

        for c in 0..channels {
            let sp = source.get(x, y, c) as f64;
            let mut b = 0.0;
            for &(nx, ny) in &neighbors {
                b += sp - source.get(nx, ny, c) as f64;
                if index[ny as usize * w as usize + nx as usize] == NONE {
                    b += target.get(nx, ny, c) as f64;
                }
            }
            rhs[c as usize][k] = b;
        }
    }
    Ok(PoissonSystem { unknowns, matrix: CsrMatrix::from_rows(rows), rhs })
}
