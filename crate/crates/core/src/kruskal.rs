//! Rank-R factored tensor representation: factor matrices plus component
//! weights, reconstruction, even weight normalization and the flattened
//! vector form used by the line-search solvers.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CpdError, Result};
use crate::tensor::DenseTensor;

/// Factored tensor: N factor matrices of shape I_n x R and a length-R
/// nonnegative weight vector (all ones by default).
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel {
    factors: Vec<Array2<f64>>,
    weights: Array1<f64>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Array2<f64>>, weights: Array1<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(CpdError::EmptyInput("model needs at least one factor".into()));
        }
        let rank = factors[0].ncols();
        if rank == 0 {
            return Err(CpdError::InvalidParameter("rank must be at least 1".into()));
        }
        for f in &factors {
            if f.ncols() != rank {
                return Err(CpdError::ColumnCountMismatch {
                    left: rank,
                    right: f.ncols(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(CpdError::InvalidParameter(
                    "factor entries must be finite".into(),
                ));
            }
        }
        if weights.len() != rank {
            return Err(CpdError::RankMismatch {
                left: rank,
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CpdError::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { factors, weights })
    }

    /// Model with all-ones weights.
    pub fn from_factors(factors: Vec<Array2<f64>>) -> Result<Self> {
        let rank = factors.first().map(|f| f.ncols()).unwrap_or(0);
        Self::new(factors, Array1::ones(rank))
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Reconstructs the dense tensor: entry = sum_r w_r prod_n A(n)[i_n, r].
    pub fn full(&self) -> Result<DenseTensor> {
        let dims = self.dims();
        let len = crate::tensor::checked_len(&dims)?;
        let rank = self.rank();
        let order = self.order();
        let mut data = vec![0.0; len];
        let mut index = vec![0usize; order];
        for slot in data.iter_mut() {
            let mut acc = 0.0;
            for r in 0..rank {
                let mut p = self.weights[r];
                for (n, &i) in index.iter().enumerate() {
                    p *= self.factors[n][[i, r]];
                }
                acc += p;
            }
            *slot = acc;
            // advance the column-major multi-index (mode 0 fastest)
            for (i, d) in index.iter_mut().zip(&dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        DenseTensor::new(dims, data)
    }

    /// Rebalances component magnitudes so every factor's column r has the
    /// same norm and the weight vector becomes all ones. Components with a
    /// zero column (or zero weight) are zeroed out and reported as degenerate.
    pub fn normalize_even(&self) -> (KruskalModel, Vec<usize>) {
        let order = self.order();
        let rank = self.rank();
        let mut factors = self.factors.clone();
        let mut weights = Array1::<f64>::ones(rank);
        let mut degenerate = Vec::new();
        for r in 0..rank {
            let norms: Vec<f64> = (0..order)
                .map(|n| self.factors[n].column(r).dot(&self.factors[n].column(r)).sqrt())
                .collect();
            let magnitude = self.weights[r] * norms.iter().product::<f64>();
            if magnitude == 0.0 {
                for f in factors.iter_mut() {
                    f.column_mut(r).fill(0.0);
                }
                weights[r] = 0.0;
                degenerate.push(r);
                continue;
            }
            let target = magnitude.powf(1.0 / order as f64);
            for (n, f) in factors.iter_mut().enumerate() {
                let scale = target / norms[n];
                f.column_mut(r).mapv_inplace(|v| v * scale);
            }
        }
        let model = KruskalModel { factors, weights };
        (model, degenerate)
    }

    /// Vectorizes the factors (factor-major, each column-major). Requires
    /// all-ones weights so the mapping is a bijection.
    pub fn flatten(&self) -> Result<FlatPoint> {
        if self.weights.iter().any(|&w| w != 1.0) {
            return Err(CpdError::InvalidParameter(
                "flatten requires all-ones weights; normalize or fold weights first".into(),
            ));
        }
        Ok(FlatPoint::from_factors(&self.factors))
    }

    /// Text format: `kruskal: N R`, `dims: ...`, `lambda: ...`, then one
    /// factor block per mode written column by column.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kruskal: {} {}", self.order(), self.rank())?;
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        writeln!(w, "dims: {}", dims.join(" "))?;
        let lambda: Vec<String> = self.weights.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "lambda: {}", lambda.join(" "))?;
        for f in &self.factors {
            for r in 0..f.ncols() {
                let col: Vec<String> = f.column(r).iter().map(|v| format!("{v}")).collect();
                writeln!(w, "{}", col.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn write_text_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(file))
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens: Vec<String> = Vec::new();
        let mut header: Option<(usize, usize)> = None;
        let mut dims: Option<Vec<usize>> = None;
        let mut lambda: Option<Vec<f64>> = None;
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("kruskal:") {
                let parts: Vec<usize> = rest
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| CpdError::Parse(format!("bad kruskal header: {e}")))?;
                if parts.len() != 2 {
                    return Err(CpdError::Parse("kruskal header needs N and R".into()));
                }
                header = Some((parts[0], parts[1]));
            } else if let Some(rest) = line.strip_prefix("dims:") {
                dims = Some(
                    rest.split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| CpdError::Parse(format!("bad dims: {e}")))?,
                );
            } else if let Some(rest) = line.strip_prefix("lambda:") {
                lambda = Some(
                    rest.split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| CpdError::Parse(format!("bad lambda: {e}")))?,
                );
            } else {
                tokens.extend(line.split_whitespace().map(str::to_owned));
            }
        }
        let (order, rank) = header.ok_or_else(|| CpdError::Parse("missing kruskal header".into()))?;
        let dims = dims.ok_or_else(|| CpdError::Parse("missing dims line".into()))?;
        let lambda = lambda.ok_or_else(|| CpdError::Parse("missing lambda line".into()))?;
        if dims.len() != order {
            return Err(CpdError::Parse("dims length does not match header".into()));
        }
        let expected: usize = dims.iter().map(|d| d * rank).sum();
        if tokens.len() != expected {
            return Err(CpdError::Parse(format!(
                "expected {expected} factor values, got {}",
                tokens.len()
            )));
        }
        let mut it = tokens.iter();
        let mut factors = Vec::with_capacity(order);
        for &d in &dims {
            let mut f = Array2::<f64>::zeros((d, rank));
            for r in 0..rank {
                for i in 0..d {
                    let tok = it.next().expect("length checked above");
                    f[[i, r]] = tok
                        .parse()
                        .map_err(|e| CpdError::Parse(format!("bad value {tok:?}: {e}")))?;
                }
            }
            factors.push(f);
        }
        Self::new(factors, Array1::from_vec(lambda))
    }

    pub fn read_text_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file))
    }
}

/// Vectorized factor matrices: the optimization variable for the
/// line-search solvers. Layout is factor-major, each factor column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPoint {
    values: Array1<f64>,
    dims: Vec<usize>,
    rank: usize,
}

impl FlatPoint {
    pub fn new(values: Array1<f64>, dims: Vec<usize>, rank: usize) -> Result<Self> {
        let expected: usize = dims.iter().map(|d| d * rank).sum();
        if values.len() != expected {
            return Err(CpdError::ShapeMismatch(format!(
                "flat point needs {expected} values for dims {dims:?} rank {rank}, got {}",
                values.len()
            )));
        }
        Ok(Self { values, dims, rank })
    }

    /// Packs factor matrices into the flat layout; weights are not involved.
    pub fn from_factors(factors: &[Array2<f64>]) -> Self {
        let rank = factors[0].ncols();
        let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let len: usize = dims.iter().map(|d| d * rank).sum();
        let mut values = Vec::with_capacity(len);
        for f in factors {
            for r in 0..rank {
                values.extend(f.column(r).iter());
            }
        }
        Self {
            values: Array1::from_vec(values),
            dims,
            rank,
        }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebuilds the factor matrices (weights all ones).
    pub fn unflatten(&self) -> KruskalModel {
        let mut factors = Vec::with_capacity(self.dims.len());
        let mut offset = 0;
        for &d in &self.dims {
            let mut f = Array2::<f64>::zeros((d, self.rank));
            for r in 0..self.rank {
                for i in 0..d {
                    f[[i, r]] = self.values[offset];
                    offset += 1;
                }
            }
            factors.push(f);
        }
        KruskalModel {
            factors,
            weights: Array1::ones(self.rank),
        }
    }
}
