//! Block extended and rational Krylov spaces with deflation.
//!
//! A [`KrylovBasis`] stores the blocks `𝒱_1, …, 𝒱_{m+1}` of an orthonormal
//! basis together with `VᵀAV` over all stored blocks. The leading `m`
//! blocks form the projection space `V_m`; the last block is the boundary
//! that carries the residual information. For rational spaces the basis
//! also keeps the pencil `(K̲, L̲)` with `A V_{m+1} K̲ = V_{m+1} L̲`, from
//! which the component of `A V_m` outside the space is recovered.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::OnceCell;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{self, DenseBlock, DenseError, C64};
use crate::sparse::{self, Factorization, SmwSolver, SparseError, SparseOperator};

/// Failures while building or expanding a basis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KrylovError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("starting block has numerical rank zero")]
    RankCollapse,
    #[error("invariant subspace reached at dimension {0}")]
    InvariantSubspace(usize),
    #[error("rational pencil coefficients are singular")]
    SingularPencil,
    #[error("shift {re:e}{im:+e}i rejected: {reason}")]
    BadShift { re: f64, im: f64, reason: &'static str },
    #[error("shift candidate set is empty")]
    EmptyHull,
    #[error("every shift candidate coincides with a used shift")]
    NoShiftCandidate,
    #[error("operation needs a{0} space")]
    WrongKind(&'static str),
}

pub type Result<T> = core::result::Result<T, KrylovError>;

/// The coefficient matrix as seen by the space builders.
pub trait KrylovOperator {
    fn n(&self) -> usize;
    fn is_symmetric(&self) -> bool;
    fn norm1(&self) -> f64;
    /// `A X`.
    fn apply(&self, x: &DenseBlock) -> Result<DenseBlock>;
    /// `Aᵀ X`.
    fn apply_transpose(&self, x: &DenseBlock) -> Result<DenseBlock>;
    /// `A⁻¹ X`.
    fn solve(&self, x: &DenseBlock) -> Result<DenseBlock>;
    /// `(A − sI)⁻¹ X` for real `s`.
    fn solve_shifted(&self, s: f64, x: &DenseBlock) -> Result<DenseBlock>;
    /// `(A − sI)⁻¹ X` for complex `s`.
    fn solve_shifted_complex(&self, s: C64, x: &DenseBlock) -> Result<DMatrix<C64>>;
}

/// A sparse matrix with a cached fill-reducing ordering and a lazily
/// computed zero-shift factorization.
pub struct SparseSystem<'a> {
    a: &'a SparseOperator,
    order: Vec<usize>,
    base: OnceCell<Factorization<'a>>,
    norm1: f64,
}

impl<'a> SparseSystem<'a> {
    pub fn new(a: &'a SparseOperator) -> Self {
        Self {
            a,
            order: a.fill_reducing_ordering(),
            base: OnceCell::new(),
            norm1: a.norm1(),
        }
    }

    pub fn operator(&self) -> &'a SparseOperator {
        self.a
    }

    pub fn ordering(&self) -> &[usize] {
        &self.order
    }

    /// The factorization of `A` itself, computed on first use.
    pub fn factorization(&self) -> Result<&Factorization<'a>> {
        if let Some(f) = self.base.get() {
            return Ok(f);
        }
        let f = sparse::factorize_with_ordering(self.a, C64::new(0.0, 0.0), &self.order)?;
        Ok(self.base.get_or_init(|| f))
    }
}

impl KrylovOperator for SparseSystem<'_> {
    fn n(&self) -> usize {
        self.a.n()
    }

    fn is_symmetric(&self) -> bool {
        self.a.is_symmetric()
    }

    fn norm1(&self) -> f64 {
        self.norm1
    }

    fn apply(&self, x: &DenseBlock) -> Result<DenseBlock> {
        Ok(sparse::spmm(self.a, x)?)
    }

    fn apply_transpose(&self, x: &DenseBlock) -> Result<DenseBlock> {
        if self.a.is_symmetric() {
            return self.apply(x);
        }
        Ok(sparse::spmm_transpose(self.a, x)?)
    }

    fn solve(&self, x: &DenseBlock) -> Result<DenseBlock> {
        Ok(self.factorization()?.solve(x)?)
    }

    fn solve_shifted(&self, s: f64, x: &DenseBlock) -> Result<DenseBlock> {
        if s == 0.0 {
            return self.solve(x);
        }
        let f = sparse::factorize_with_ordering(self.a, C64::new(s, 0.0), &self.order)?;
        Ok(f.solve(x)?)
    }

    fn solve_shifted_complex(&self, s: C64, x: &DenseBlock) -> Result<DMatrix<C64>> {
        let f = sparse::factorize_with_ordering(self.a, s, &self.order)?;
        Ok(f.solve_complex(&x.map(|v| C64::new(v, 0.0)))?)
    }
}

/// `A − U Vt` with solves through the Sherman–Morrison–Woodbury identity.
///
/// Only the unshifted solve is available.
pub struct UpdatedSystem<'f, 'a> {
    smw: SmwSolver<'f, 'a>,
    norm1: f64,
}

impl<'f, 'a> UpdatedSystem<'f, 'a> {
    pub fn new(base: &'f Factorization<'a>, u: &DenseBlock, vt: &DenseBlock) -> Result<Self> {
        let smw = SmwSolver::new(base, u, vt)?;
        let col_sums = |m: &DenseBlock| {
            m.column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let norm1 = base.operator().norm1() + col_sums(u) * col_sums(vt);
        Ok(Self { smw, norm1 })
    }
}

impl KrylovOperator for UpdatedSystem<'_, '_> {
    fn n(&self) -> usize {
        self.smw.n()
    }

    fn is_symmetric(&self) -> bool {
        false
    }

    fn norm1(&self) -> f64 {
        self.norm1
    }

    fn apply(&self, x: &DenseBlock) -> Result<DenseBlock> {
        Ok(self.smw.apply(x)?)
    }

    fn apply_transpose(&self, x: &DenseBlock) -> Result<DenseBlock> {
        Ok(self.smw.apply_transpose(x)?)
    }

    fn solve(&self, x: &DenseBlock) -> Result<DenseBlock> {
        Ok(self.smw.solve(x)?)
    }

    fn solve_shifted(&self, s: f64, x: &DenseBlock) -> Result<DenseBlock> {
        if s == 0.0 {
            return self.solve(x);
        }
        Err(KrylovError::BadShift {
            re: s,
            im: 0.0,
            reason: "updated operator supports only the zero shift",
        })
    }

    fn solve_shifted_complex(&self, s: C64, _x: &DenseBlock) -> Result<DMatrix<C64>> {
        Err(KrylovError::BadShift {
            re: s.re,
            im: s.im,
            reason: "updated operator supports only the zero shift",
        })
    }
}

/// Which family of spaces a basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Generated by `A` and `A⁻¹`; block size `2q`.
    Extended,
    /// Generated by shifted inverses `(A − s_i I)⁻¹`; block size `q`.
    Rational,
}

/// Generator of an extended-space column: `A` or `A⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Columns dropped while orthonormalizing one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeflationEvent {
    /// One-based index of the block being built.
    pub block: usize,
    pub requested: usize,
    pub kept: usize,
}

/// Result of [`deflate_block`].
#[derive(Debug, Clone)]
pub struct Deflated {
    /// Orthonormal columns orthogonal to the reference basis.
    pub q: DenseBlock,
    pub rank: usize,
    /// Columns of the input that contributed a new direction.
    pub kept: Vec<usize>,
}

/// Orthonormalizes `w` against `against` and within itself.
///
/// Two block Gram–Schmidt passes against `against` are followed by
/// column-wise Gram–Schmidt with reorthogonalization. A column is dropped
/// when what is left of it falls below `tol·‖w‖_F`.
pub fn deflate_block(w: &DenseBlock, against: &DenseBlock, tol: f64) -> Deflated {
    let n = w.nrows();
    let scale = w.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Deflated {
            q: DenseBlock::zeros(n, 0),
            rank: 0,
            kept: Vec::new(),
        };
    }
    let mut x = w.clone();
    if against.ncols() > 0 {
        for _ in 0..2 {
            let c = against.tr_mul(&x);
            x -= against * c;
        }
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.ncols() {
        let mut col = x.column(j).into_owned();
        let norm0 = col.norm();
        for _ in 0..2 {
            if against.ncols() > 0 {
                let c = against.tr_mul(&col);
                col -= against * c;
            }
            for q in &cols {
                let c = q.dot(&col);
                col -= q * c;
            }
        }
        let norm = col.norm();
        if norm > tol * scale && norm > f64::EPSILON * norm0 {
            col /= norm;
            cols.push(col);
            kept.push(j);
        }
    }
    let rank = cols.len();
    let mut q = DenseBlock::zeros(n, rank);
    for (j, c) in cols.iter().enumerate() {
        q.column_mut(j).copy_from(c);
    }
    Deflated { q, rank, kept }
}

/// Rational-space data describing `(I − V_mV_mᵀ) A V_m = Ŵ Θᵀ`.
#[derive(Debug, Clone)]
struct RationalFrame {
    w_hat: DenseBlock,
    theta: DenseBlock,
}

/// Orthonormal block Krylov basis with its projected quantities.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    kind: SpaceKind,
    v: DenseBlock,
    offsets: Vec<usize>,
    directions: Vec<Direction>,
    t: DenseBlock,
    a_last: DenseBlock,
    b: DenseBlock,
    b_proj: DenseBlock,
    gamma: DenseBlock,
    defl_tol: f64,
    deflations: Vec<DeflationEvent>,
    invariant: bool,
    shifts: Vec<C64>,
    k_bar: DenseBlock,
    l_bar: DenseBlock,
    last_step: (usize, usize),
    /// Columns the next rational step is applied to.
    carry: (usize, usize),
    frame: Option<RationalFrame>,
}

/// Default relative deflation tolerance.
pub const DEFAULT_DEFLATION_TOL: f64 = 1e-12;

impl KrylovBasis {
    fn start<O: KrylovOperator>(
        kind: SpaceKind,
        op: &O,
        ct: &DenseBlock,
        extra: Option<&DenseBlock>,
        tol: f64,
    ) -> Result<Self> {
        let n = op.n();
        if ct.nrows() != n || extra.is_some_and(|s| s.nrows() != n) {
            return Err(KrylovError::Dimension("starting block rows"));
        }
        let start = match extra {
            Some(s) => {
                let mut m = DenseBlock::zeros(n, ct.ncols() + s.ncols());
                m.columns_mut(0, ct.ncols()).copy_from(ct);
                m.columns_mut(ct.ncols(), s.ncols()).copy_from(s);
                m
            }
            None => ct.clone(),
        };
        let (w, dirs) = match kind {
            SpaceKind::Extended => {
                let inv = op.solve(&start)?;
                let k = start.ncols();
                let mut w = DenseBlock::zeros(n, 2 * k);
                w.columns_mut(0, k).copy_from(&start);
                w.columns_mut(k, k).copy_from(&inv);
                let mut dirs = vec![Direction::Forward; k];
                dirs.extend(core::iter::repeat(Direction::Inverse).take(k));
                (w, dirs)
            }
            SpaceKind::Rational => {
                let k = start.ncols();
                (start, vec![Direction::Forward; k])
            }
        };
        let d = deflate_block(&w, &DenseBlock::zeros(n, 0), tol);
        if d.rank == 0 {
            return Err(KrylovError::RankCollapse);
        }
        let gamma = d.q.tr_mul(ct);
        let aq = op.apply(&d.q)?;
        let t = d.q.tr_mul(&aq);
        let mut deflations = Vec::new();
        if d.rank < w.ncols() {
            deflations.push(DeflationEvent {
                block: 1,
                requested: w.ncols(),
                kept: d.rank,
            });
        }
        let directions = d.kept.iter().map(|&j| dirs[j]).collect();
        Ok(Self {
            kind,
            offsets: vec![0, d.rank],
            directions,
            t,
            a_last: aq,
            b: DenseBlock::zeros(n, 0),
            b_proj: DenseBlock::zeros(d.rank, 0),
            gamma,
            defl_tol: tol,
            deflations,
            invariant: false,
            shifts: Vec::new(),
            k_bar: DenseBlock::zeros(d.rank, 0),
            l_bar: DenseBlock::zeros(d.rank, 0),
            last_step: (0, 0),
            carry: (0, d.rank),
            frame: None,
            v: d.q,
        })
    }

    /// Records `B` so that `VᵀB` is kept up to date.
    pub fn attach_b(&mut self, b: &DenseBlock) -> Result<()> {
        if b.nrows() != self.n() {
            return Err(KrylovError::Dimension("B rows"));
        }
        self.b = b.clone();
        self.b_proj = self.v.tr_mul(b);
        Ok(())
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Number of blocks in the projection space `V_m`.
    pub fn m(&self) -> usize {
        self.offsets.len() - 2
    }

    /// Number of stored blocks, `m + 1` once the basis has been expanded.
    pub fn blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Columns of `V_m`.
    pub fn dim(&self) -> usize {
        self.offsets[self.offsets.len() - 2]
    }

    /// Columns of all stored blocks.
    pub fn total_dim(&self) -> usize {
        self.v.ncols()
    }

    /// Column dimension of the first `blocks` blocks.
    pub fn dim_of(&self, blocks: usize) -> usize {
        self.offsets[blocks]
    }

    /// Column range `[start, end)` of block `j` (one-based).
    pub fn block_range(&self, j: usize) -> (usize, usize) {
        (self.offsets[j - 1], self.offsets[j])
    }

    /// All stored columns.
    pub fn v_all(&self) -> &DenseBlock {
        &self.v
    }

    /// `V_m`, the projection space.
    pub fn v_m(&self) -> DenseBlock {
        self.v.columns(0, self.dim()).into_owned()
    }

    /// `VᵀAV` over all stored blocks.
    pub fn t_all(&self) -> &DenseBlock {
        &self.t
    }

    /// `T_m = V_mᵀ A V_m`.
    pub fn t(&self) -> DenseBlock {
        let d = self.dim();
        self.t.view((0, 0), (d, d)).into_owned()
    }

    /// `E_{m+1}ᵀ T̲_m`, the coupling of `V_m` to the boundary block.
    pub fn boundary(&self) -> DenseBlock {
        let (s, e) = self.block_range(self.blocks());
        self.t.view((s, 0), (e - s, self.dim())).into_owned()
    }

    /// `V_mᵀ B`.
    pub fn b_proj(&self) -> DenseBlock {
        self.b_proj.rows(0, self.dim()).into_owned()
    }

    /// `VᵀB` over all stored blocks.
    pub fn b_proj_all(&self) -> &DenseBlock {
        &self.b_proj
    }

    /// `γ` with `Cᵀ = V_1 γ`.
    pub fn gamma(&self) -> &DenseBlock {
        &self.gamma
    }

    pub fn deflation_tol(&self) -> f64 {
        self.defl_tol
    }

    pub fn deflations(&self) -> &[DeflationEvent] {
        &self.deflations
    }

    /// Whether the last expansion found no new direction.
    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    /// Shifts used so far, conjugates included.
    pub fn shifts(&self) -> &[C64] {
        &self.shifts
    }

    /// The pencil `(K̲, L̲)` over all stored blocks.
    pub fn pencil(&self) -> (&DenseBlock, &DenseBlock) {
        (&self.k_bar, &self.l_bar)
    }

    /// `(Ŵ, Θ)` with `(I − V_mV_mᵀ) A V_m = Ŵ Θᵀ`, rational spaces only.
    pub fn rational_frame(&self) -> Result<(&DenseBlock, &DenseBlock)> {
        match &self.frame {
            Some(f) => Ok((&f.w_hat, &f.theta)),
            None => Err(KrylovError::WrongKind(" rational, expanded")),
        }
    }

    /// `T_m` through the rational recurrence `(L_top − V_mᵀA𝒱_{m+1} K_bot) K_top⁺`.
    pub fn rational_recurrence_t(&self) -> Result<DenseBlock> {
        if self.kind != SpaceKind::Rational || self.blocks() < 2 {
            return Err(KrylovError::WrongKind(" rational, expanded"));
        }
        let d = self.dim();
        let total = self.total_dim();
        let p = right_inverse(&self.k_bar.rows(0, d).into_owned())?;
        let k_bot = self.k_bar.rows(d, total - d);
        let vt_aq = self.t.view((0, d), (d, total - d));
        let l_top = self.l_bar.rows(0, d);
        Ok((l_top - vt_aq * k_bot) * p)
    }

    /// Appends `q` and updates `T`, `VᵀB` and the cached `A q`.
    fn append<O: KrylovOperator>(&mut self, op: &O, q: &DenseBlock) -> Result<()> {
        let old = self.total_dim();
        let r = q.ncols();
        let total = old + r;
        let aq = op.apply(q)?;
        let v = core::mem::replace(&mut self.v, DenseBlock::zeros(0, 0));
        let mut v = v.resize_horizontally(total, 0.0);
        v.columns_mut(old, r).copy_from(q);
        self.v = v;
        let col = self.v.tr_mul(&aq);
        let row = if op.is_symmetric() {
            col.rows(0, old).transpose()
        } else {
            let atq = op.apply_transpose(q)?;
            atq.tr_mul(&self.v.columns(0, old))
        };
        let t = core::mem::replace(&mut self.t, DenseBlock::zeros(0, 0));
        let mut t = t.resize(total, total, 0.0);
        t.columns_mut(old, r).copy_from(&col);
        t.view_mut((old, 0), (r, old)).copy_from(&row);
        self.t = t;
        let bq = q.tr_mul(&self.b);
        let bp = core::mem::replace(&mut self.b_proj, DenseBlock::zeros(0, 0));
        let mut bp = bp.resize_vertically(total, 0.0);
        bp.rows_mut(old, r).copy_from(&bq);
        self.b_proj = bp;
        self.a_last = aq;
        self.offsets.push(total);
        Ok(())
    }

    fn mark_invariant(&mut self) {
        let total = self.total_dim();
        self.offsets.push(total);
        self.a_last = DenseBlock::zeros(self.n(), 0);
        self.invariant = true;
    }
}

/// Starts an extended space on `[Cᵀ, A⁻¹Cᵀ]`.
pub fn ek_init<O: KrylovOperator>(op: &O, ct: &DenseBlock, tol: f64) -> Result<KrylovBasis> {
    KrylovBasis::start(SpaceKind::Extended, op, ct, None, tol)
}

/// Starts an extended space on `[Cᵀ, S, A⁻¹Cᵀ, A⁻¹S]`; `γ` still refers to `Cᵀ`.
pub fn ek_init_augmented<O: KrylovOperator>(op: &O, ct: &DenseBlock, s: &DenseBlock, tol: f64) -> Result<KrylovBasis> {
    KrylovBasis::start(SpaceKind::Extended, op, ct, Some(s), tol)
}

/// Starts a rational space on `Cᵀ`.
pub fn rk_init<O: KrylovOperator>(op: &O, ct: &DenseBlock, tol: f64) -> Result<KrylovBasis> {
    KrylovBasis::start(SpaceKind::Rational, op, ct, None, tol)
}

/// Starts a rational space on `[Cᵀ, S]`.
pub fn rk_init_augmented<O: KrylovOperator>(op: &O, ct: &DenseBlock, s: &DenseBlock, tol: f64) -> Result<KrylovBasis> {
    KrylovBasis::start(SpaceKind::Rational, op, ct, Some(s), tol)
}

/// Adds the next extended block, built from `A` applied to the forward
/// columns and `A⁻¹` applied to the inverse columns of the last block.
pub fn ek_expand<O: KrylovOperator>(basis: &mut KrylovBasis, op: &O) -> Result<()> {
    if basis.kind != SpaceKind::Extended {
        return Err(KrylovError::WrongKind("n extended"));
    }
    if basis.invariant {
        return Err(KrylovError::InvariantSubspace(basis.total_dim()));
    }
    let n = basis.n();
    let (s, e) = basis.block_range(basis.blocks());
    let fwd: Vec<usize> = (s..e).filter(|&j| basis.directions[j] == Direction::Forward).collect();
    let inv: Vec<usize> = (s..e).filter(|&j| basis.directions[j] == Direction::Inverse).collect();
    let mut w = DenseBlock::zeros(n, fwd.len() + inv.len());
    for (c, &j) in fwd.iter().enumerate() {
        w.column_mut(c).copy_from(&basis.a_last.column(j - s));
    }
    if !inv.is_empty() {
        let mut rhs = DenseBlock::zeros(n, inv.len());
        for (c, &j) in inv.iter().enumerate() {
            rhs.column_mut(c).copy_from(&basis.v.column(j));
        }
        let sol = op.solve(&rhs)?;
        w.columns_mut(fwd.len(), inv.len()).copy_from(&sol);
    }
    let dirs: Vec<Direction> = fwd
        .iter()
        .map(|_| Direction::Forward)
        .chain(inv.iter().map(|_| Direction::Inverse))
        .collect();
    let d = deflate_block(&w, &basis.v, basis.defl_tol);
    let block = basis.blocks() + 1;
    if d.rank < w.ncols() {
        basis.deflations.push(DeflationEvent {
            block,
            requested: w.ncols(),
            kept: d.rank,
        });
    }
    if d.rank == 0 {
        basis.mark_invariant();
        return Err(KrylovError::InvariantSubspace(basis.total_dim()));
    }
    basis.append(op, &d.q)?;
    basis.directions.extend(d.kept.iter().map(|&j| dirs[j]));
    Ok(())
}

/// Adds the next rational block `(A − sI)⁻¹ 𝒱_last`.
///
/// A non-real shift is paired with its conjugate: the real and imaginary
/// parts of the complex solve are added together, so the basis stays real,
/// and the next step continues from the imaginary part alone.
pub fn rk_expand<O: KrylovOperator>(basis: &mut KrylovBasis, op: &O, shift: C64) -> Result<()> {
    if basis.kind != SpaceKind::Rational {
        return Err(KrylovError::WrongKind(" rational"));
    }
    if basis.invariant {
        return Err(KrylovError::InvariantSubspace(basis.total_dim()));
    }
    if !(shift.re.is_finite() && shift.im.is_finite()) {
        return Err(KrylovError::BadShift {
            re: shift.re,
            im: shift.im,
            reason: "not finite",
        });
    }
    let n = basis.n();
    let (ls, le) = basis.carry;
    let last = basis.v.columns(ls, le - ls).into_owned();
    let c = last.ncols();
    let real = shift.im == 0.0;
    let w = if real {
        op.solve_shifted(shift.re, &last)?
    } else {
        let z = op.solve_shifted_complex(shift, &last)?;
        let mut w = DenseBlock::zeros(n, 2 * c);
        w.columns_mut(0, c).copy_from(&z.map(|v| v.re));
        w.columns_mut(c, c).copy_from(&z.map(|v| v.im));
        w
    };
    let d = deflate_block(&w, &basis.v, basis.defl_tol);
    let block = basis.blocks() + 1;
    if d.rank < w.ncols() {
        basis.deflations.push(DeflationEvent {
            block,
            requested: w.ncols(),
            kept: d.rank,
        });
    }
    let old = basis.total_dim();
    let total = old + d.rank;
    let mut coeff = DenseBlock::zeros(total, w.ncols());
    coeff.rows_mut(0, old).copy_from(&basis.v.tr_mul(&w));
    if d.rank > 0 {
        coeff.rows_mut(old, d.rank).copy_from(&d.q.tr_mul(&w));
    }
    let mut lcols = if real {
        &coeff * shift.re
    } else {
        let (sr, si) = (shift.re, shift.im);
        let cr = coeff.columns(0, c);
        let ci = coeff.columns(c, c);
        let mut l = DenseBlock::zeros(total, 2 * c);
        l.columns_mut(0, c).copy_from(&(cr * sr - ci * si));
        l.columns_mut(c, c).copy_from(&(cr * si + ci * sr));
        l
    };
    for j in 0..c {
        lcols[(ls + j, j)] += 1.0;
    }
    let ncols = basis.k_bar.ncols();
    let grow = |m: &DenseBlock, add: &DenseBlock| {
        let mut out = DenseBlock::zeros(total, ncols + add.ncols());
        out.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        out.columns_mut(ncols, add.ncols()).copy_from(add);
        out
    };
    basis.k_bar = grow(&basis.k_bar, &coeff);
    basis.l_bar = grow(&basis.l_bar, &lcols);
    basis.last_step = (ncols, ncols + w.ncols());
    basis.shifts.push(shift);
    if !real {
        basis.shifts.push(shift.conj());
    }
    if d.rank == 0 {
        basis.mark_invariant();
        let dim = basis.dim();
        basis.frame = Some(RationalFrame {
            w_hat: DenseBlock::zeros(n, 0),
            theta: DenseBlock::zeros(dim, 0),
        });
        return Err(KrylovError::InvariantSubspace(basis.total_dim()));
    }
    basis.append(op, &d.q)?;
    let imag = d.kept.iter().filter(|&&j| j >= c).count();
    basis.carry = if real || imag == 0 {
        (old, total)
    } else {
        (total - imag, total)
    };
    update_frame(basis)
}

/// Recomputes `Ŵ` and `Θ` for the current `m`.
fn update_frame(basis: &mut KrylovBasis) -> Result<()> {
    let d = basis.dim();
    let total = basis.total_dim();
    let r = total - d;
    let (s0, s1) = basis.last_step;
    let p = right_inverse(&basis.k_bar.rows(0, d).into_owned())?;
    let k_bot = basis.k_bar.view((d, s0), (r, s1 - s0));
    let l_bot = basis.l_bar.view((d, s0), (r, s1 - s0));
    let q = basis.v.columns(d, r);
    let vt_aq = basis.t.view((0, d), (d, r));
    let out_aq = &basis.a_last - basis.v.columns(0, d) * vt_aq;
    let w_hat = q * l_bot - out_aq * k_bot;
    let theta = p.rows(s0, s1 - s0).transpose();
    basis.frame = Some(RationalFrame { w_hat, theta });
    Ok(())
}

/// Right inverse of a full-row-rank matrix.
fn right_inverse(k: &DenseBlock) -> Result<DenseBlock> {
    let (rows, cols) = k.shape();
    if rows == 0 {
        return Ok(DenseBlock::zeros(cols, 0));
    }
    if rows > cols {
        return Err(KrylovError::SingularPencil);
    }
    let svd = k.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e3 * f64::EPSILON * smax) {
        return Err(KrylovError::SingularPencil);
    }
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(KrylovError::SingularPencil);
    };
    let sinv = DenseBlock::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    Ok(vt.transpose() * sinv * u.transpose())
}

/// Shift bookkeeping for adaptive rational spaces.
#[derive(Debug, Clone)]
pub struct ShiftPool {
    /// Rough bounds of the mirrored spectral region.
    pub s0: [C64; 2],
    used: Vec<C64>,
    /// Boundary samples per hull edge.
    pub samples_per_edge: usize,
}

impl ShiftPool {
    pub fn new(s0: [C64; 2]) -> Self {
        Self {
            s0,
            used: Vec::new(),
            samples_per_edge: 2000,
        }
    }

    /// Bounds from a few power and inverse iterations on the operator.
    pub fn estimate<O: KrylovOperator>(op: &O, iterations: usize) -> Result<Self> {
        let (lo, hi) = spectral_bounds(op, iterations)?;
        Ok(Self::new([C64::new(lo, 0.0), C64::new(hi, 0.0)]))
    }

    pub fn used(&self) -> &[C64] {
        &self.used
    }

    /// Marks `s` (and its conjugate, if not real) as used.
    pub fn record(&mut self, s: C64) {
        self.used.push(s);
        if s.im != 0.0 {
            self.used.push(s.conj());
        }
    }
}

/// Magnitude estimates `(smallest, largest)` of the spectrum of `A`.
pub fn spectral_bounds<O: KrylovOperator>(op: &O, iterations: usize) -> Result<(f64, f64)> {
    let n = op.n();
    let start = DenseBlock::from_fn(n, 1, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    let mut x = &start / start.norm();
    let mut hi = 0.0;
    for _ in 0..iterations.max(1) {
        let y = op.apply(&x)?;
        hi = y.norm();
        if hi == 0.0 {
            break;
        }
        x = y / hi;
    }
    let mut x = &start / start.norm();
    let mut inv = 0.0;
    for _ in 0..iterations.max(1) {
        let y = op.solve(&x)?;
        inv = y.norm();
        if inv == 0.0 {
            break;
        }
        x = y / inv;
    }
    let lo = if inv > 0.0 { 1.0 / inv } else { hi };
    Ok((lo.min(hi), hi.max(lo)))
}

/// Objective `−log|r_m(s)|` of the adaptive shift rule.
pub fn shift_objective(s: C64, ritz: &[C64], used: &[C64]) -> f64 {
    let poles: f64 = used.iter().map(|&p| (s - p).norm().ln()).sum();
    let zeros: f64 = ritz.iter().map(|&l| (s - l).norm().ln()).sum();
    poles - zeros
}

/// Vertices of the convex hull of the mirrored Ritz values and bounds,
/// counterclockwise.
pub fn shift_hull(ritz: &[C64], pool: &ShiftPool) -> Vec<C64> {
    let mut pts: Vec<C64> = ritz.iter().map(|l| C64::new(l.re.abs(), -l.im)).collect();
    for s in pool.s0 {
        pts.push(s);
        pts.push(s.conj());
    }
    pts.retain(|p| p.re.is_finite() && p.im.is_finite());
    convex_hull(pts)
}

fn convex_hull(mut pts: Vec<C64>) -> Vec<C64> {
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.norm()));
    let eps = 1e-14 * scale * scale;
    let mut hull: Vec<C64> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        // Collinear input: keep the two extreme points.
        let first = pts[0];
        let last = pts[pts.len() - 1];
        return vec![first, last];
    }
    hull
}

/// Next shift: the maximizer of `1/|r_m(s)|` on the boundary of the hull of
/// `{−λ_j} ∪ {s₀, s̄₀}`, where `λ_j` are the eigenvalues of `closed_loop`.
pub fn adaptive_shift(closed_loop: &DenseBlock, pool: &ShiftPool) -> Result<C64> {
    let ritz = dense::eigenvalues(closed_loop)?;
    adaptive_shift_from(&ritz, pool)
}

/// [`adaptive_shift`] with the eigenvalues given.
pub fn adaptive_shift_from(ritz: &[C64], pool: &ShiftPool) -> Result<C64> {
    let hull = shift_hull(ritz, pool);
    if hull.is_empty() {
        return Err(KrylovError::EmptyHull);
    }
    let used = pool.used();
    let scale = hull.iter().fold(0.0f64, |m, p| m.max(p.norm()));
    let admissible = |s: C64| {
        used.iter()
            .all(|&u| (s - u).norm() > 1e-14 * s.norm().max(u.norm()).max(scale * 1e-300))
    };
    let f = |s: C64| {
        let v = shift_objective(s, ritz, used);
        if v.is_finite() && admissible(s) {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    if hull.len() == 1 {
        let s = hull[0];
        return if f(s) > f64::NEG_INFINITY {
            Ok(tidy(s, scale))
        } else {
            Err(KrylovError::NoShiftCandidate)
        };
    }
    let samples = pool.samples_per_edge.max(2);
    let edges = hull.len();
    let point = |e: usize, t: f64| {
        let a = hull[e];
        let b = hull[(e + 1) % edges];
        a + (b - a) * t
    };
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0f64);
    for e in 0..edges {
        for i in 0..samples {
            let t = i as f64 / samples as f64;
            let v = f(point(e, t));
            if v > best.0 {
                best = (v, e, t);
            }
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(KrylovError::NoShiftCandidate);
    }
    // Golden-section refinement on the neighbouring sample interval.
    let (_, e, t) = best;
    let h = 1.0 / samples as f64;
    let (mut lo, mut hi) = ((t - h).max(0.0), (t + h).min(1.0));
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(point(e, x1));
    let mut f2 = f(point(e, x2));
    for _ in 0..60 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(point(e, x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(point(e, x2));
        }
    }
    let (fr, tr) = if f1 >= f2 { (f1, x1) } else { (f2, x2) };
    let s = if fr > best.0 { point(e, tr) } else { point(e, t) };
    Ok(tidy(s, scale))
}

/// Snaps a numerically real shift to the real axis and picks the upper
/// member of a conjugate pair.
fn tidy(s: C64, scale: f64) -> C64 {
    if s.im.abs() <= 1e-12 * scale.max(s.norm()) {
        C64::new(s.re, 0.0)
    } else {
        C64::new(s.re, s.im.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{laplacian3d, negdef_sparse, random};

    fn orth_err(v: &DenseBlock) -> f64 {
        (v.tr_mul(v) - DenseBlock::identity(v.ncols(), v.ncols())).norm()
    }

    fn arnoldi_residual(basis: &KrylovBasis, a: &SparseOperator) -> f64 {
        let vm = basis.v_m();
        let av = sparse::spmm(a, &vm).unwrap();
        let (s, e) = basis.block_range(basis.blocks());
        let next = basis.v_all().columns(s, e - s).into_owned();
        (av - &vm * basis.t() - next * basis.boundary()).norm()
    }

    #[test]
    fn ek_init_deflates_parallel_inverse_direction() {
        let a = SparseOperator::from_dense(&(-DenseBlock::identity(6, 6))).unwrap();
        let sys = SparseSystem::new(&a);
        let c = random(6, 1, 1);
        let basis = ek_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        assert_eq!(basis.total_dim(), 1);
        assert_eq!(basis.deflations().len(), 1);
    }

    #[test]
    fn ek_init_orthonormal_and_reconstructs() {
        let a = laplacian3d(3);
        let sys = SparseSystem::new(&a);
        let c = random(27, 1, 2);
        let basis = ek_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        assert_eq!(basis.total_dim(), 2);
        assert!(orth_err(basis.v_all()) <= 1e-12);
        assert!((basis.v_all() * basis.gamma() - &c).norm() <= 1e-12 * c.norm());
    }

    #[test]
    fn ek_init_rejects_zero_block() {
        let a = laplacian3d(2);
        let sys = SparseSystem::new(&a);
        assert_eq!(
            ek_init(&sys, &DenseBlock::zeros(8, 1), 1e-12).unwrap_err(),
            KrylovError::RankCollapse
        );
    }

    #[test]
    fn ek_expand_matches_direct_projection_symmetric() {
        let a = laplacian3d(4);
        let ad = a.to_dense();
        let sys = SparseSystem::new(&a);
        let c = random(64, 2, 3);
        let mut basis = ek_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        basis.attach_b(&random(64, 1, 4)).unwrap();
        for _ in 0..6 {
            match ek_expand(&mut basis, &sys) {
                Ok(()) => {}
                Err(KrylovError::InvariantSubspace(_)) => break,
                Err(e) => panic!("{e}"),
            }
            let v = basis.v_all();
            assert!(basis.total_dim() <= 64);
            assert!(orth_err(v) <= 1e-10 * basis.total_dim() as f64);
            let direct = v.transpose() * &ad * v;
            assert!((&direct - basis.t_all()).norm() <= 1e-10 * direct.norm());
            assert!(arnoldi_residual(&basis, &a) <= 1e-8 * a.norm1());
        }
    }

    #[test]
    fn ek_expand_nonsymmetric_and_invariant_subspace() {
        let a = negdef_sparse(40, 5);
        let ad = a.to_dense();
        let sys = SparseSystem::new(&a);
        let c = random(40, 1, 6);
        let mut basis = ek_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        basis.attach_b(&random(40, 2, 7)).unwrap();
        let mut hit_invariant = false;
        for _ in 0..30 {
            match ek_expand(&mut basis, &sys) {
                Ok(()) => {}
                Err(KrylovError::InvariantSubspace(d)) => {
                    hit_invariant = true;
                    assert_eq!(d, 40);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
            let v = basis.v_all();
            let direct = v.transpose() * &ad * v;
            assert!((&direct - basis.t_all()).norm() <= 1e-10 * direct.norm());
            if basis.total_dim() <= 20 {
                assert!(arnoldi_residual(&basis, &a) <= 1e-8 * a.norm1());
            }
            let bp = v.transpose() * random(40, 2, 7);
            assert!((bp.rows(0, basis.dim()) - basis.b_proj()).norm() <= 1e-12 * bp.norm());
        }
        assert!(hit_invariant);
        assert!(basis.boundary().is_empty());
        assert!(arnoldi_residual(&basis, &a) <= 1e-8 * a.norm1());
        assert!(ek_expand(&mut basis, &sys).is_err());
    }

    fn rational_residual(basis: &KrylovBasis, a: &SparseOperator) -> f64 {
        let vm = basis.v_m();
        let av = sparse::spmm(a, &vm).unwrap();
        let (w, th) = basis.rational_frame().unwrap();
        (av - &vm * basis.t() - w * th.transpose()).norm()
    }

    fn pencil_residual(basis: &KrylovBasis, a: &SparseOperator) -> f64 {
        let v = basis.v_all();
        let (k, l) = basis.pencil();
        (sparse::spmm(a, &(v * k)).unwrap() - v * l).norm()
    }

    #[test]
    fn rk_init_keeps_orthonormal_input() {
        let a = laplacian3d(3);
        let sys = SparseSystem::new(&a);
        let mut e = DenseBlock::zeros(27, 2);
        e[(0, 0)] = 1.0;
        e[(5, 1)] = 1.0;
        let basis = rk_init(&sys, &e, DEFAULT_DEFLATION_TOL).unwrap();
        assert!((basis.v_all() - &e).norm() <= 1e-15);
        let c = random(27, 2, 8);
        let basis = rk_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        assert!(orth_err(basis.v_all()) <= 1e-12);
        assert!((basis.v_all() * basis.gamma() - &c).norm() <= 1e-12 * c.norm());
    }

    #[test]
    fn rk_expand_real_shifts_satisfy_rational_relation() {
        let a = laplacian3d(4);
        let ad = a.to_dense();
        let sys = SparseSystem::new(&a);
        let c = random(64, 1, 9);
        let mut basis = rk_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        for s in [10.0, 300.0, 40.0, 120.0, 25.0, 600.0] {
            let before = basis.total_dim();
            rk_expand(&mut basis, &sys, C64::new(s, 0.0)).unwrap();
            assert_eq!(basis.total_dim(), before + 1);
            let v = basis.v_all();
            assert!(orth_err(v) <= 1e-10 * basis.total_dim() as f64);
            let direct = v.transpose() * &ad * v;
            assert!((&direct - basis.t_all()).norm() <= 1e-10 * direct.norm());
            assert!(rational_residual(&basis, &a) <= 1e-8 * a.norm1());
            assert!(pencil_residual(&basis, &a) <= 1e-8 * a.norm1());
            let rec = basis.rational_recurrence_t().unwrap();
            assert!((rec - basis.t()).norm() <= 1e-8 * a.norm1());
        }
    }

    #[test]
    fn rk_expand_complex_pair_keeps_real_basis() {
        let a = negdef_sparse(50, 10);
        let sys = SparseSystem::new(&a);
        let c = random(50, 2, 11);
        let mut basis = rk_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        rk_expand(&mut basis, &sys, C64::new(3.0, 0.0)).unwrap();
        let before = basis.total_dim();
        let s = C64::new(2.0, 1.5);
        let (ls, le) = basis.block_range(basis.blocks());
        let last = basis.v_all().columns(ls, le - ls).into_owned();
        rk_expand(&mut basis, &sys, s).unwrap();
        assert_eq!(basis.total_dim(), before + 4);
        assert_eq!(basis.shifts().len(), 3);
        let z = sys.solve_shifted_complex(s, &last).unwrap();
        let v = basis.v_all();
        let vc = v.map(|x| C64::new(x, 0.0));
        let out = &z - &vc * (vc.adjoint() * &z);
        assert!(out.norm() <= 1e-10 * z.norm());
        assert!(orth_err(v) <= 1e-10 * basis.total_dim() as f64);
        assert!(rational_residual(&basis, &a) <= 1e-8 * a.norm1());
        assert!(pencil_residual(&basis, &a) <= 1e-8 * a.norm1());
        rk_expand(&mut basis, &sys, C64::new(8.0, 0.0)).unwrap();
        assert!(rational_residual(&basis, &a) <= 1e-8 * a.norm1());
    }

    #[test]
    fn consecutive_pairs_grow_by_two_blocks_and_span_the_chain() {
        let a = negdef_sparse(60, 21);
        let sys = SparseSystem::new(&a);
        let c = random(60, 2, 22);
        let mut basis = rk_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        let shifts = [
            C64::new(2.0, 1.5),
            C64::new(0.7, 3.0),
            C64::new(4.0, 0.0),
            C64::new(1.2, 0.4),
        ];
        let mut chain = vec![c.map(|x| C64::new(x, 0.0))];
        for s in shifts {
            let before = basis.total_dim();
            rk_expand(&mut basis, &sys, s).unwrap();
            let step = if s.im == 0.0 { vec![s] } else { vec![s, s.conj()] };
            assert_eq!(basis.total_dim(), before + 2 * step.len());
            for t in step {
                let prev = chain.last().unwrap();
                let re = sys.solve_shifted_complex(t, &prev.map(|z| z.re)).unwrap();
                let im = sys.solve_shifted_complex(t, &prev.map(|z| z.im)).unwrap();
                chain.push(re + im * C64::new(0.0, 1.0));
            }
            assert!(rational_residual(&basis, &a) <= 1e-8 * a.norm1());
        }
        let vc = basis.v_all().map(|x| C64::new(x, 0.0));
        for z in &chain {
            let out = z - &vc * (vc.adjoint() * z);
            assert!(out.norm() <= 1e-9 * z.norm());
        }
    }

    #[test]
    fn rk_invariant_subspace_has_empty_frame() {
        let a = negdef_sparse(6, 12);
        let sys = SparseSystem::new(&a);
        let c = random(6, 1, 13);
        let mut basis = rk_init(&sys, &c, DEFAULT_DEFLATION_TOL).unwrap();
        let shifts = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let mut done = false;
        for s in shifts {
            match rk_expand(&mut basis, &sys, C64::new(s, 0.0)) {
                Ok(()) => {}
                Err(KrylovError::InvariantSubspace(d)) => {
                    assert_eq!(d, 6);
                    done = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(done);
        assert!(rational_residual(&basis, &a) <= 1e-8 * a.norm1());
    }

    #[test]
    fn deflate_block_examples() {
        let v = dense::qr_economy(&random(30, 4, 14)).unwrap().0;
        let inside = &v * random(4, 2, 15);
        assert_eq!(deflate_block(&inside, &v, 1e-12).rank, 0);
        let w = random(30, 3, 16);
        let d = deflate_block(&w, &v, 1e-12);
        assert_eq!(d.rank, 3);
        assert!(orth_err(&d.q) <= 1e-12);
        assert!(v.tr_mul(&d.q).norm() <= 1e-12);
        let mut dup = random(30, 3, 17);
        let c0 = dup.column(0).into_owned();
        dup.column_mut(2).copy_from(&c0);
        let d = deflate_block(&dup, &v, 1e-12);
        assert_eq!(d.rank, 2);
        assert_eq!(d.kept, vec![0, 1]);
    }

    fn grid_best(ritz: &[C64], pool: &ShiftPool, per_edge: usize) -> (C64, f64) {
        let hull = shift_hull(ritz, pool);
        let mut best = (hull[0], f64::NEG_INFINITY);
        let edges = hull.len();
        for e in 0..edges {
            let a = hull[e];
            let b = hull[(e + 1) % edges];
            for i in 0..=per_edge {
                let s = a + (b - a) * (i as f64 / per_edge as f64);
                let v = shift_objective(s, ritz, pool.used());
                if v.is_finite() && v > best.1 {
                    best = (s, v);
                }
            }
        }
        best
    }

    #[test]
    fn real_spectrum_gives_real_shift_in_interval() {
        let ritz: Vec<C64> = [-1.0, -4.0, -9.0, -30.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut pool = ShiftPool::new([C64::new(0.5, 0.0), C64::new(50.0, 0.0)]);
        pool.record(C64::new(0.5, 0.0));
        pool.record(C64::new(50.0, 0.0));
        let s = adaptive_shift_from(&ritz, &pool).unwrap();
        assert_eq!(s.im, 0.0);
        assert!(s.re >= 0.5 && s.re <= 50.0);
        assert!(pool.used().iter().all(|&u| (u - s).norm() > 1e-14 * u.norm()));
    }

    #[test]
    fn adaptive_shift_matches_grid_search() {
        let mut r = crate::testutil::lcg(18);
        for trial in 0..10 {
            let mut t = random(8, 8, 100 + trial) * 3.0;
            for i in 0..8 {
                t[(i, i)] -= 6.0 + r().abs() * 10.0;
            }
            let ritz = dense::eigenvalues(&t).unwrap();
            let mut pool = ShiftPool::new([C64::new(1.0, 0.0), C64::new(40.0, 2.0)]);
            pool.record(C64::new(5.0, 0.0));
            pool.record(C64::new(12.0, 1.0));
            let s = adaptive_shift(&t, &pool).unwrap();
            let got = shift_objective(s, &ritz, pool.used());
            let hull = shift_hull(&ritz, &pool);
            let per_edge = 10_000 / hull.len();
            let (_, grid) = grid_best(&ritz, &pool, per_edge);
            assert!(
                got >= grid - 1e-6 * grid.abs().max(1.0),
                "trial {trial}: {got} vs {grid}"
            );
            assert!(pool.used().iter().all(|&u| (u - s).norm() > 1e-14 * u.norm()));
        }
    }

    #[test]
    fn spectral_bounds_on_laplacian() {
        let a = laplacian3d(5);
        let sys = SparseSystem::new(&a);
        let (lo, hi) = spectral_bounds(&sys, 30).unwrap();
        let h2 = 16.0;
        let s = (core::f64::consts::PI / 12.0).sin();
        let exact_lo = 3.0 * 4.0 * s * s * h2;
        assert!((lo - exact_lo).abs() <= 0.05 * exact_lo);
        assert!(hi <= 12.0 * h2 && hi >= 6.0 * h2);
    }
}
