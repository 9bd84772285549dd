use super::model::ModelBlocks;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LuFactorization, LuOptions, SparseMatrix, TripletBuilder};

/// Sparse pencil `s E - A` in semi-implicit layout: the first `n_states`
/// columns of `E` carry `[T; R]`, the trailing columns are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    pub e: SparseMatrix,
    pub a: SparseMatrix,
    pub n_states: usize,
}

impl Pencil {
    pub fn new(e: SparseMatrix, a: SparseMatrix, n_states: usize) -> Result<Self> {
        if !e.is_square() || e.nrows() != a.nrows() || e.ncols() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "E is {}x{}, A is {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if n_states > e.ncols() {
            return Err(Error::DimensionMismatch("more states than pencil columns".into()));
        }
        Ok(Self { e, a, n_states })
    }

    /// Infers the state count from the last structurally nonzero column of `E`.
    pub fn infer(e: SparseMatrix, a: SparseMatrix) -> Result<Self> {
        let n = (0..e.ncols())
            .rev()
            .find(|&j| !e.column_is_structurally_zero(j))
            .map_or(0, |j| j + 1);
        Self::new(e, a, n)
    }

    /// Dimension `r` of the pencil.
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn n_algebraic(&self) -> usize {
        self.dim() - self.n_states
    }

    /// Splits back into `T, R, f_x, f_y, g_x, g_y`.
    pub fn blocks(&self) -> Result<ModelBlocks> {
        let (n, r) = (self.n_states, self.dim());
        if (n..r).any(|j| !self.e.column_is_structurally_zero(j)) {
            return Err(Error::DimensionMismatch(
                "E has entries in its algebraic columns".into(),
            ));
        }
        Ok(ModelBlocks {
            t: self.e.submatrix(0, n, 0, n),
            r: self.e.submatrix(n, r, 0, n),
            fx: self.a.submatrix(0, n, 0, n),
            fy: self.a.submatrix(0, n, n, r),
            gx: self.a.submatrix(n, r, 0, n),
            gy: self.a.submatrix(n, r, n, r),
        })
    }

    /// Dense state matrix and algebraic lift of the reduced form.
    pub fn reduce(&self) -> Result<ReducedSystem> {
        reduce_with_lift(&self.blocks()?)
    }

    /// Rank of `E` by maximum matching on its pattern.
    pub fn structural_rank_e(&self) -> usize {
        self.e.structural_rank()
    }
}

/// `E = [[T, 0], [R, 0]]`, `A = [[f_x, f_y], [g_x, g_y]]`.
pub fn assemble_pencil(blocks: &ModelBlocks) -> Result<Pencil> {
    blocks.validate()?;
    let (n, m) = (blocks.n(), blocks.m());
    let r = n + m;
    let mut e = TripletBuilder::with_capacity(r, r, blocks.t.nnz() + blocks.r.nnz());
    e.push_block(0, 0, &blocks.t, 1.0);
    e.push_block(n, 0, &blocks.r, 1.0);
    let mut a = TripletBuilder::with_capacity(
        r,
        r,
        blocks.fx.nnz() + blocks.fy.nnz() + blocks.gx.nnz() + blocks.gy.nnz(),
    );
    a.push_block(0, 0, &blocks.fx, 1.0);
    a.push_block(0, n, &blocks.fy, 1.0);
    a.push_block(n, 0, &blocks.gx, 1.0);
    a.push_block(n, n, &blocks.gy, 1.0);
    Pencil::new(e.build(), a.build(), n)
}

/// Reduced state matrix together with the map from state to algebraic
/// eigenvector components, `phi_y = -lift * phi_x`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub state_matrix: DenseMatrix,
    /// `(g_y - R T^-1 f_y)^-1 (g_x - R T^-1 f_x)`, size `m x n`.
    pub lift: DenseMatrix,
}

/// `T^-1 (f_x - f_y (g_y - R T^-1 f_y)^-1 (g_x - R T^-1 f_x))`.
pub fn reduce_state_matrix(blocks: &ModelBlocks) -> Result<DenseMatrix> {
    Ok(reduce_with_lift(blocks)?.state_matrix)
}

pub fn reduce_with_lift(blocks: &ModelBlocks) -> Result<ReducedSystem> {
    blocks.validate()?;
    let (n, m) = (blocks.n(), blocks.m());
    let t_lu = LuFactorization::new(&blocks.t, LuOptions::default())
        .map_err(|_| Error::SingularStateMatrix)?;
    let tinv_fx = solve_columns(&t_lu, &blocks.fx.to_dense())?;
    if m == 0 {
        return Ok(ReducedSystem {
            state_matrix: tinv_fx,
            lift: DenseMatrix::zeros(0, n),
        });
    }
    let fy = blocks.fy.to_dense();
    let tinv_fy = solve_columns(&t_lu, &fy)?;

    let (schur, coupling) = if blocks.r.nnz() == 0 {
        (blocks.gy.clone(), blocks.gx.to_dense())
    } else {
        let r = blocks.r.to_dense();
        let s = blocks.gy.to_dense().sub(&r.matmul(&tinv_fy)?)?;
        let c = blocks.gx.to_dense().sub(&r.matmul(&tinv_fx)?)?;
        (SparseMatrix::from_dense(&s, 0.0), c)
    };
    let s_lu = LuFactorization::new(&schur, LuOptions::default())
        .map_err(|_| Error::SingularSchurComplement)?;
    let lift = solve_columns(&s_lu, &coupling)?;
    let state_matrix = tinv_fx.sub(&tinv_fy.matmul(&lift)?)?;
    Ok(ReducedSystem { state_matrix, lift })
}

fn solve_columns(lu: &LuFactorization, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(rhs.nrows(), rhs.ncols());
    for j in 0..rhs.ncols() {
        let col = rhs.column(j);
        if col.iter().all(|&v| v == 0.0) {
            continue;
        }
        out.set_column(j, &lu.solve(&col)?);
    }
    Ok(out)
}
