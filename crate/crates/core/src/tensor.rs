//! Dense N-way tensor storage and the multilinear kernels shared by every
//! solver: mode-n matricization, Khatri-Rao products, MTTKRP and norms.
//!
//! Values are stored in column-major linear order with the mode-0 index
//! varying fastest, matching the Kolda-Bader unfolding convention.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{CpdError, Result};

/// Hard cap on dense tensor size; larger requests get a capacity error.
pub const MAX_ELEMS: u128 = 100_000_000;
/// Highest supported tensor order.
pub const MAX_ORDER: usize = 8;

/// Dense real tensor of order N with extents `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from extents and column-major values.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected = checked_len(&dims)?;
        if values.len() != expected {
            return Err(CpdError::ShapeMismatch(format!(
                "expected {} values for dims {:?}, got {}",
                expected,
                dims,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CpdError::InvalidParameter(
                "tensor values must be finite".into(),
            ));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = checked_len(&dims)?;
        Ok(Self {
            dims,
            values: vec![0.0; len],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries K.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[linear_index(&self.dims, index)]
    }

    /// sqrt of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mode-n unfolding: row i holds the mode-n fibers at index i, columns
    /// enumerate the remaining indices with the smallest mode fastest.
    pub fn matricize(&self, mode: usize) -> Result<Array2<f64>> {
        self.check_mode(mode)?;
        let i_n = self.dims[mode];
        let kbar = self.len() / i_n;
        let k_left: usize = self.dims[..mode].iter().product();
        let mut out = Array2::<f64>::zeros((i_n, kbar));
        // linear index = jl + k_left * (i + i_n * jr); column = jl + k_left * jr
        let mut idx = 0;
        let jr_count = self.len() / (k_left * i_n);
        for jr in 0..jr_count {
            for i in 0..i_n {
                let col_base = jr * k_left;
                for jl in 0..k_left {
                    out[[i, col_base + jl]] = self.values[idx];
                    idx += 1;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`matricize`]: folds a mode-n unfolding back into a tensor.
    pub fn from_matricized(mat: &ArrayView2<f64>, dims: &[usize], mode: usize) -> Result<Self> {
        let len = checked_len(dims)?;
        if mode >= dims.len() {
            return Err(CpdError::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let i_n = dims[mode];
        let kbar = len / i_n;
        if mat.nrows() != i_n || mat.ncols() != kbar {
            return Err(CpdError::ShapeMismatch(format!(
                "unfolding of dims {:?} at mode {} must be {}x{}, got {}x{}",
                dims,
                mode,
                i_n,
                kbar,
                mat.nrows(),
                mat.ncols()
            )));
        }
        let k_left: usize = dims[..mode].iter().product();
        let mut values = vec![0.0; len];
        let mut idx = 0;
        let jr_count = len / (k_left * i_n);
        for jr in 0..jr_count {
            for i in 0..i_n {
                let col_base = jr * k_left;
                for jl in 0..k_left {
                    values[idx] = mat[[i, col_base + jl]];
                    idx += 1;
                }
            }
        }
        Self::new(dims.to_vec(), values)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            Err(CpdError::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }

    /// Reads the text format: `dims: I1 .. IN` then K whitespace-separated
    /// values in column-major order; `#` starts a comment line.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut dims: Option<Vec<usize>> = None;
        let mut values = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("dims:") {
                if dims.is_some() {
                    return Err(CpdError::Parse("duplicate dims line".into()));
                }
                let parsed: std::result::Result<Vec<usize>, _> =
                    rest.split_whitespace().map(str::parse).collect();
                dims = Some(parsed.map_err(|e| CpdError::Parse(format!("bad dims: {e}")))?);
            } else {
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|e| CpdError::Parse(format!("bad value {tok:?}: {e}")))?;
                    values.push(v);
                }
            }
        }
        let dims = dims.ok_or_else(|| CpdError::Parse("missing dims line".into()))?;
        Self::new(dims, values)
    }

    pub fn read_text_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file))
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "dims:")?;
        for d in &self.dims {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        for chunk in self.values.chunks(8) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn write_text_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(file))
    }
}

/// Column-major linear index with the mode-0 coordinate varying fastest.
pub fn linear_index(dims: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), index.len());
    let mut idx = 0;
    for n in (0..dims.len()).rev() {
        debug_assert!(index[n] < dims[n]);
        idx = idx * dims[n] + index[n];
    }
    idx
}

pub(crate) fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(CpdError::InvalidParameter(
            "tensor order must be at least 1".into(),
        ));
    }
    if dims.len() > MAX_ORDER {
        return Err(CpdError::InvalidParameter(format!(
            "tensor order {} exceeds the supported maximum {}",
            dims.len(),
            MAX_ORDER
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(CpdError::InvalidParameter(
            "every tensor extent must be at least 1".into(),
        ));
    }
    let elems: u128 = dims.iter().map(|&d| d as u128).product();
    if elems > MAX_ELEMS {
        return Err(CpdError::CapacityExceeded {
            elems,
            limit: MAX_ELEMS,
        });
    }
    Ok(elems as usize)
}

/// Khatri-Rao (columnwise Kronecker) product. Column r of the result is the
/// Kronecker product of column r of each input, first input varying slowest.
pub fn khatri_rao(mats: &[ArrayView2<f64>]) -> Result<Array2<f64>> {
    if mats.is_empty() {
        return Err(CpdError::EmptyInput("khatri_rao needs at least one matrix".into()));
    }
    let r = mats[0].ncols();
    for m in mats {
        if m.ncols() != r {
            return Err(CpdError::ColumnCountMismatch {
                left: r,
                right: m.ncols(),
            });
        }
    }
    let mut out = mats[0].to_owned();
    for m in &mats[1..] {
        out = kr_pair(&out.view(), m);
    }
    Ok(out)
}

fn kr_pair(slow: &ArrayView2<f64>, fast: &ArrayView2<f64>) -> Array2<f64> {
    let (rs, rf, r) = (slow.nrows(), fast.nrows(), slow.ncols());
    let mut out = Array2::<f64>::zeros((rs * rf, r));
    for c in 0..r {
        for i in 0..rs {
            let s = slow[[i, c]];
            for j in 0..rf {
                out[[i * rf + j, c]] = s * fast[[j, c]];
            }
        }
    }
    out
}

/// Khatri-Rao product of the listed modes in descending order so that the
/// smallest mode varies fastest; the empty selection yields a 1xR row of ones.
fn partial_kr(factors: &[Array2<f64>], modes: std::ops::Range<usize>, rank: usize) -> Array2<f64> {
    let views: Vec<ArrayView2<f64>> = modes.rev().map(|m| factors[m].view()).collect();
    if views.is_empty() {
        Array2::ones((1, rank))
    } else {
        khatri_rao(&views).expect("column counts validated by caller")
    }
}

/// Matricized-tensor times Khatri-Rao product for mode n, without forming
/// the unfolding. Equals `matricize(t, n) . khatri_rao(A(N-1)..A(0) \ n)`.
pub fn mttkrp(t: &DenseTensor, factors: &[Array2<f64>], mode: usize) -> Result<Array2<f64>> {
    if factors.len() != t.order() {
        return Err(CpdError::ShapeMismatch(format!(
            "expected {} factor matrices, got {}",
            t.order(),
            factors.len()
        )));
    }
    if mode >= t.order() {
        return Err(CpdError::ModeOutOfRange {
            mode,
            order: t.order(),
        });
    }
    let rank = factors[0].ncols();
    for (n, f) in factors.iter().enumerate() {
        if f.ncols() != rank {
            return Err(CpdError::ColumnCountMismatch {
                left: rank,
                right: f.ncols(),
            });
        }
        if f.nrows() != t.dims()[n] {
            return Err(CpdError::ShapeMismatch(format!(
                "factor {} has {} rows but mode extent is {}",
                n,
                f.nrows(),
                t.dims()[n]
            )));
        }
    }

    let i_n = t.dims()[mode];
    let left = partial_kr(factors, 0..mode, rank);
    let right = partial_kr(factors, mode + 1..t.order(), rank);
    let k_left = left.nrows();
    let k_right = right.nrows();

    let mut out = Array2::<f64>::zeros((i_n, rank));
    let values = t.values();
    let mut acc = vec![0.0; rank];
    let mut idx = 0;
    for jr in 0..k_right {
        for i in 0..i_n {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for jl in 0..k_left {
                let x = values[idx];
                idx += 1;
                if x != 0.0 {
                    for (a, l) in acc.iter_mut().zip(left.row(jl)) {
                        *a += x * l;
                    }
                }
            }
            for r in 0..rank {
                out[[i, r]] += acc[r] * right[[jr, r]];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cube012() -> DenseTensor {
        DenseTensor::new(vec![2, 2, 2], (0..8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn matricize_mode0_of_counting_cube() {
        let t = cube012();
        let m = t.matricize(0).unwrap();
        assert_eq!(m, array![[0.0, 2.0, 4.0, 6.0], [1.0, 3.0, 5.0, 7.0]]);
    }

    #[test]
    fn matricize_mode2_of_counting_cube() {
        let t = cube012();
        let m = t.matricize(2).unwrap();
        assert_eq!(m, array![[0.0, 1.0, 2.0, 3.0], [4.0, 5.0, 6.0, 7.0]]);
    }

    #[test]
    fn matricize_order_one_is_column() {
        let t = DenseTensor::new(vec![3], vec![5.0, -1.0, 2.0]).unwrap();
        let m = t.matricize(0).unwrap();
        assert_eq!(m, array![[5.0], [-1.0], [2.0]]);
    }

    #[test]
    fn matricize_rejects_bad_mode() {
        let t = cube012();
        assert!(matches!(
            t.matricize(3),
            Err(CpdError::ModeOutOfRange { mode: 3, order: 3 })
        ));
    }

    #[test]
    fn fold_round_trip() {
        let t = cube012();
        for mode in 0..3 {
            let m = t.matricize(mode).unwrap();
            let back = DenseTensor::from_matricized(&m.view(), t.dims(), mode).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn khatri_rao_two_by_two() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[0.0, 1.0], [1.0, 0.0]];
        let kr = khatri_rao(&[a.view(), b.view()]).unwrap();
        assert_eq!(
            kr,
            array![[0.0, 2.0], [1.0, 0.0], [0.0, 4.0], [3.0, 0.0]]
        );
    }

    #[test]
    fn khatri_rao_single_matrix_is_identity_case() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(khatri_rao(&[a.view()]).unwrap(), a);
    }

    #[test]
    fn khatri_rao_zero_column_stays_zero() {
        let a = array![[0.0, 2.0], [0.0, 4.0]];
        let b = array![[5.0, 1.0], [1.0, 7.0]];
        let kr = khatri_rao(&[a.view(), b.view()]).unwrap();
        assert!(kr.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn khatri_rao_rejects_mismatched_columns() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[1.0], [2.0]];
        assert!(matches!(
            khatri_rao(&[a.view(), b.view()]),
            Err(CpdError::ColumnCountMismatch { .. })
        ));
    }

    #[test]
    fn mttkrp_counting_cube_ones_factors() {
        let t = cube012();
        let factors = vec![
            Array2::zeros((2, 1)),
            array![[1.0], [1.0]],
            array![[1.0], [1.0]],
        ];
        let m = mttkrp(&t, &factors, 0).unwrap();
        assert_eq!(m, array![[12.0], [16.0]]);
    }

    #[test]
    fn mttkrp_zero_tensor() {
        let t = DenseTensor::zeros(vec![3, 2, 2]).unwrap();
        let factors = vec![
            Array2::ones((3, 2)),
            Array2::ones((2, 2)),
            Array2::ones((2, 2)),
        ];
        let m = mttkrp(&t, &factors, 1).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frobenius_norm_all_ones() {
        let t = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        assert!((t.frobenius_norm() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(DenseTensor::zeros(vec![4, 3]).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn capacity_and_order_limits() {
        assert!(matches!(
            DenseTensor::zeros(vec![100_000, 100_000]),
            Err(CpdError::CapacityExceeded { .. })
        ));
        assert!(DenseTensor::zeros(vec![1; 9]).is_err());
        assert!(DenseTensor::new(vec![2], vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = cube012();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = DenseTensor::read_text(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn text_reader_skips_comments() {
        let src = "# test tensor\ndims: 2 2\n1 2\n# half way\n3 4\n";
        let t = DenseTensor::read_text(src.as_bytes()).unwrap();
        assert_eq!(t.values(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
