use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::linalg::{Mat, MAX_DIM};

use super::{cell_layout, DiscretizeError, TensorGrid};

/// Rows handled per parallel task; fixed so the output does not depend on the
/// thread count.
const ROW_CHUNK: usize = 4096;

/// Sparse symmetric system in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `true` for rows that carry a Dirichlet value.
    pub dirichlet: Vec<bool>,
    /// Length of the contiguous vertical node blocks (1 when there are none).
    pub column_len: usize,
}

impl LinearSystem {
    /// Builds a system from explicit rows (sorted or not); no Dirichlet rows.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>) -> Self {
        assert_eq!(rows.len(), rhs.len());
        let mut sys = LinearSystem {
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
            dirichlet: vec![false; rhs.len()],
            rhs,
            column_len: 1,
        };
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                sys.cols.push(c as u32);
                sys.vals.push(v);
            }
            sys.row_ptr.push(sys.cols.len());
        }
        sys
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&(j as u32)) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&j, a)| a * x[j as usize]).sum()
    }

    /// `y = A x`; each entry is computed identically in serial and parallel mode.
    pub fn matvec(&self, x: &[f64], y: &mut [f64], parallel: bool) {
        if parallel {
            y.par_chunks_mut(ROW_CHUNK)
                .enumerate()
                .for_each(|(k, chunk)| {
                    let base = k * ROW_CHUNK;
                    for (o, yi) in chunk.iter_mut().enumerate() {
                        *yi = self.row_dot(base + o, x);
                    }
                });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    /// `max |A_ij − A_ji| / max |A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.size() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                scale = scale.max(a.abs());
                worst = worst.max((a - self.get(j as usize, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Text header, then little-endian `row_ptr` (u64), `cols` (u32), `vals` (f64), `rhs` (f64).
    pub fn dump(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "gapfield-csr v1")?;
        writeln!(f, "rows {}", self.size())?;
        writeln!(f, "nnz {}", self.nnz())?;
        writeln!(
            f,
            "dirichlet {}",
            self.dirichlet.iter().filter(|d| **d).count()
        )?;
        writeln!(f, "column_len {}", self.column_len)?;
        writeln!(f, "---")?;
        for v in &self.row_ptr {
            f.write_all(&(*v as u64).to_le_bytes())?;
        }
        for v in &self.cols {
            f.write_all(&v.to_le_bytes())?;
        }
        for v in self.vals.iter().chain(&self.rhs) {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()
    }
}

struct Stencil<'a> {
    grid: &'a TensorGrid,
    cells: &'a [Mat],
    cell_strides: [usize; MAX_DIM],
    dirichlet: &'a [Option<f64>],
    center: usize,
}

impl Stencil<'_> {
    fn slot(&self, d: &[i64; MAX_DIM]) -> usize {
        let n = self.grid.dim();
        (0..n).fold(0, |acc, a| acc * 3 + (d[a] + 1) as usize)
    }

    fn row(&self, p: usize, cols: &mut Vec<u32>, vals: &mut Vec<f64>) -> f64 {
        if let Some(g) = self.dirichlet[p] {
            cols.push(p as u32);
            vals.push(1.0);
            return g;
        }
        let grid = self.grid;
        let n = grid.dim();
        let m = grid.multi_index(p);
        let mut acc = [0.0f64; 27];
        let mut touched = [false; 27];
        let edge_share = 1.0 / (1u32 << (n - 1)) as f64;
        let plane_share = 1.0 / (1u32 << (n - 2)) as f64;

        for combo in 0..(1usize << n) {
            let mut cell = 0;
            let mut beta = [0usize; MAX_DIM];
            let mut delta = [0.0f64; MAX_DIM];
            let mut valid = true;
            for a in 0..n {
                let s = (combo >> a) & 1;
                if m[a] + s == 0 || m[a] + s > grid.len(a) - 1 {
                    valid = false;
                    break;
                }
                let c = m[a] + s - 1;
                cell += c * self.cell_strides[a];
                beta[a] = 1 - s;
                delta[a] = grid.axis(a)[c + 1] - grid.axis(a)[c];
            }
            if !valid {
                continue;
            }
            let b = &self.cells[cell];
            let volume: f64 = delta[..n].iter().product();

            for a in 0..n {
                let w = volume * edge_share * b.get(a, a) / (delta[a] * delta[a]);
                let mut d = [0i64; MAX_DIM];
                d[a] = if beta[a] == 0 { 1 } else { -1 };
                let q = self.slot(&d);
                acc[self.center] += w;
                touched[self.center] = true;
                acc[q] -= w;
                touched[q] = true;
            }

            let g = |axis: usize, bit: usize| (2.0 * bit as f64 - 1.0) / (2.0 * delta[axis]);
            for a in 0..n {
                for c in a + 1..n {
                    let bac = b.get(a, c);
                    if bac == 0.0 {
                        continue;
                    }
                    let w = volume * plane_share * bac;
                    for qa in 0..2 {
                        for qc in 0..2 {
                            let mut d = [0i64; MAX_DIM];
                            d[a] = qa as i64 - beta[a] as i64;
                            d[c] = qc as i64 - beta[c] as i64;
                            let q = self.slot(&d);
                            acc[q] += w * (g(a, beta[a]) * g(c, qc) + g(c, beta[c]) * g(a, qa));
                            touched[q] = true;
                        }
                    }
                }
            }
        }

        let mut rhs = 0.0;
        let slots = 3usize.pow(n as u32);
        for k in 0..slots {
            if !touched[k] {
                continue;
            }
            let mut rem = k;
            let mut q = p as i64;
            for a in (0..n).rev() {
                let d = (rem % 3) as i64 - 1;
                rem /= 3;
                q += d * grid.stride(a) as i64;
            }
            let q = q as usize;
            match self.dirichlet[q] {
                Some(gq) => rhs -= acc[k] * gq,
                None => {
                    cols.push(q as u32);
                    vals.push(acc[k]);
                }
            }
        }
        rhs
    }
}

/// Assembles the system for per-cell coefficients `cells` and Dirichlet data
/// `dirichlet` (`None` for free nodes).
pub fn assemble(
    grid: &TensorGrid,
    cells: &[Mat],
    dirichlet: &[Option<f64>],
    parallel: bool,
) -> Result<LinearSystem, DiscretizeError> {
    let n = grid.dim();
    if n < 2 {
        return Err(DiscretizeError::Grid(
            "assembly needs at least two axes".into(),
        ));
    }
    let (cell_count, cell_strides) = cell_layout(grid);
    if cells.len() != cell_count || dirichlet.len() != grid.node_count() {
        return Err(DiscretizeError::Grid(format!(
            "expected {cell_count} cell coefficients and {} nodal values",
            grid.node_count()
        )));
    }
    if grid.node_count() > u32::MAX as usize {
        return Err(DiscretizeError::Grid(
            "too many nodes for 32-bit column indices".into(),
        ));
    }
    let stencil = Stencil {
        grid,
        cells,
        cell_strides,
        dirichlet,
        center: (3usize.pow(n as u32) - 1) / 2,
    };
    let rows = grid.node_count();

    let build = |k: usize| {
        let lo = k * ROW_CHUNK;
        let hi = (lo + ROW_CHUNK).min(rows);
        let mut cols = Vec::with_capacity((hi - lo) * 19);
        let mut vals = Vec::with_capacity((hi - lo) * 19);
        let mut lens = Vec::with_capacity(hi - lo);
        let mut rhs = Vec::with_capacity(hi - lo);
        for p in lo..hi {
            let before = cols.len();
            rhs.push(stencil.row(p, &mut cols, &mut vals));
            lens.push(cols.len() - before);
        }
        (cols, vals, lens, rhs)
    };
    let chunks = rows.div_ceil(ROW_CHUNK);
    let parts: Vec<_> = if parallel {
        (0..chunks).into_par_iter().map(build).collect()
    } else {
        (0..chunks).map(build).collect()
    };

    let nnz = parts.iter().map(|p| p.0.len()).sum();
    let mut sys = LinearSystem {
        row_ptr: Vec::with_capacity(rows + 1),
        cols: Vec::with_capacity(nnz),
        vals: Vec::with_capacity(nnz),
        rhs: Vec::with_capacity(rows),
        dirichlet: dirichlet.iter().map(Option::is_some).collect(),
        column_len: grid.column_len(),
    };
    sys.row_ptr.push(0);
    for (cols, vals, lens, rhs) in parts {
        for l in lens {
            let last = *sys.row_ptr.last().unwrap();
            sys.row_ptr.push(last + l);
        }
        sys.cols.extend_from_slice(&cols);
        sys.vals.extend_from_slice(&vals);
        sys.rhs.extend_from_slice(&rhs);
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{cell_layout, dirichlet_from_fn, uniform_axis, BoundaryFaces};
    use proptest::prelude::*;

    fn constant_cells(grid: &TensorGrid, b: Mat) -> Vec<Mat> {
        vec![b; cell_layout(grid).0]
    }

    fn stretched(lo: f64, hi: f64, cells: usize, power: f64) -> Vec<f64> {
        (0..=cells)
            .map(|i| lo + (hi - lo) * (i as f64 / cells as f64).powf(power))
            .collect()
    }

    fn sample_b3() -> Mat {
        Mat::from_row_major(&[2.0, 0.3, -0.2, 0.3, 1.5, 0.4, -0.2, 0.4, 1.0]).unwrap()
    }

    #[test]
    fn neumann_rows_sum_to_zero() {
        let grid = TensorGrid::new(vec![
            stretched(0.0, 1.0, 5, 1.3),
            uniform_axis(-0.3, 0.5, 4),
            stretched(-1.0, 1.0, 6, 1.1),
        ])
        .unwrap();
        let dir = vec![None; grid.node_count()];
        let sys = assemble(&grid, &constant_cells(&grid, sample_b3()), &dir, false).unwrap();
        let scale = sys.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..sys.size() {
            let s: f64 = sys.row(i).1.iter().sum();
            assert!(s.abs() < 1e-13 * scale, "row {i} sums to {s}");
        }
        assert!(sys.symmetry_defect() < 1e-13);
        assert!(sys.row(grid.index(&[2, 2, 3])).0.len() == 19);
    }

    #[test]
    fn constant_data_is_reproduced() {
        let grid = TensorGrid::new(vec![
            uniform_axis(-1.0, 1.0, 6),
            stretched(-1.0, 1.0, 8, 1.2),
        ])
        .unwrap();
        let faces = BoundaryFaces::gap(2);
        let dir = dirichlet_from_fn(&grid, &faces, |_| 3.5);
        let b = Mat::from_row_major(&[1.0, 0.4, 0.4, 2.0]).unwrap();
        let sys = assemble(&grid, &constant_cells(&grid, b), &dir, false).unwrap();
        let u = vec![3.5; sys.size()];
        let mut au = vec![0.0; sys.size()];
        sys.matvec(&u, &mut au, false);
        for i in 0..sys.size() {
            assert!((au[i] - sys.rhs[i]).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn mixed_stencil_matches_the_classical_nine_point_form() {
        let grid =
            TensorGrid::new(vec![uniform_axis(-1.0, 1.0, 4), uniform_axis(-1.0, 1.0, 4)]).unwrap();
        let b = Mat::from_row_major(&[1.0, 0.25, 0.25, 1.0]).unwrap();
        let sys = assemble(&grid, &constant_cells(&grid, b), &vec![None; 25], false).unwrap();
        let p = grid.index(&[2, 2]);
        // −∂11 − ∂22 − 2·0.25 ∂12 scaled by the dual volume h² = 0.25
        assert!((sys.get(p, p) - 4.0).abs() < 1e-14);
        assert!((sys.get(p, grid.index(&[3, 2])) + 1.0).abs() < 1e-14);
        assert!((sys.get(p, grid.index(&[3, 3])) + 0.125).abs() < 1e-14);
        assert!((sys.get(p, grid.index(&[1, 3])) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn serial_and_parallel_assembly_agree_bitwise() {
        let grid = TensorGrid::new(vec![
            stretched(-1.0, 1.0, 40, 1.2),
            stretched(-1.0, 1.0, 30, 1.1),
            uniform_axis(-1.0, 1.0, 8),
        ])
        .unwrap();
        let faces = BoundaryFaces::gap(3);
        let dir = dirichlet_from_fn(&grid, &faces, |x| x[0] + x[1] * x[2]);
        let (count, _) = cell_layout(&grid);
        let cells: Vec<Mat> = (0..count)
            .map(|c| {
                let s = 1.0 + 0.1 * (c as f64).sin();
                sample_b3().scale(s)
            })
            .collect();
        let a = assemble(&grid, &cells, &dir, false).unwrap();
        let b = assemble(&grid, &cells, &dir, true).unwrap();
        assert_eq!(a, b);
        assert!(a.symmetry_defect() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn linear_functions_are_discrete_solutions(
            c in prop::array::uniform3(-2.0f64..2.0),
            off in prop::array::uniform3(-0.45f64..0.45),
            p0 in 0.8f64..1.4, p1 in 0.8f64..1.4, p2 in 0.8f64..1.4,
        ) {
            let b = Mat::from_row_major(&[1.0, off[0], off[1], off[0], 1.0, off[2], off[1], off[2], 1.0]).unwrap();
            prop_assume!(b.min_eigenvalue() > 0.05);
            let grid = TensorGrid::new(vec![stretched(0.0, 1.0, 5, p0), stretched(-1.0, 0.5, 6, p1), stretched(-1.0, 1.0, 5, p2)]).unwrap();
            let faces = BoundaryFaces::all_dirichlet(3);
            let f = |x: &[f64]| c[0] * x[0] + c[1] * x[1] + c[2] * x[2] + 0.7;
            let dir = dirichlet_from_fn(&grid, &faces, f);
            let sys = assemble(&grid, &constant_cells(&grid, b), &dir, false).unwrap();
            let u: Vec<f64> = (0..grid.node_count()).map(|p| f(&grid.coords(p))).collect();
            let mut au = vec![0.0; u.len()];
            sys.matvec(&u, &mut au, false);
            for i in 0..u.len() {
                prop_assert!((au[i] - sys.rhs[i]).abs() < 1e-11, "row {} residual {}", i, au[i] - sys.rhs[i]);
            }
        }
    }
}
