//! Small dense SVD helpers: numerical rank, null spaces, ranges.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative reconstruction error above which an SVD is recomputed.
const RECONSTRUCTION_TOL: f64 = 1e-13;

struct Factors {
    u: DMatrix<f64>,
    sv: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

fn reconstruction_error(m: &DMatrix<f64>, f: &Factors) -> f64 {
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(f.sv.clone()));
    (&f.u * sigma * &f.v_t - m).norm()
}

/// Thin SVD, retried on a few fixed column rotations when the plain
/// factorisation does not reproduce `m`. nalgebra's bidiagonal QR
/// occasionally stalls short of full accuracy on structured inputs.
fn factor(m: &DMatrix<f64>) -> Factors {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let plain = |a: DMatrix<f64>| {
        let svd = a.svd(true, true);
        Factors {
            u: svd.u.expect("u requested"),
            sv: svd.singular_values.iter().copied().collect(),
            v_t: svd.v_t.expect("v_t requested"),
        }
    };
    let mut best = plain(m.clone());
    let mut best_err = reconstruction_error(m, &best);
    for seed in 1..=4u64 {
        if best_err <= RECONSTRUCTION_TOL * scale {
            break;
        }
        let g = random_orthogonal(m.ncols(), seed);
        let mut f = plain(m * &g);
        f.v_t = &f.v_t * g.transpose();
        let err = reconstruction_error(m, &f);
        if err < best_err {
            best = f;
            best_err = err;
        }
    }
    best
}

/// Singular-value summary of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankInfo {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Smallest kept singular value over the largest.
    pub smallest_kept_ratio: f64,
    /// First dropped singular value over the largest (0 when nothing drops).
    pub first_dropped_ratio: f64,
}

impl RankInfo {
    fn from_values(mut sv: Vec<f64>, rel_tol: f64) -> Self {
        sv.sort_by(|a, b| b.total_cmp(a));
        let top = sv.first().copied().unwrap_or(0.0);
        let rank = if top > 0.0 {
            sv.iter().filter(|&&s| s > rel_tol * top).count()
        } else {
            0
        };
        let smallest_kept_ratio = if rank > 0 { sv[rank - 1] / top } else { 0.0 };
        let first_dropped_ratio = if rank < sv.len() && top > 0.0 {
            sv[rank] / top
        } else {
            0.0
        };
        Self {
            rank,
            singular_values: sv,
            smallest_kept_ratio,
            first_dropped_ratio,
        }
    }

    /// Ratio between the smallest kept and the first dropped singular value.
    pub fn gap(&self) -> f64 {
        if self.first_dropped_ratio > 0.0 {
            self.smallest_kept_ratio / self.first_dropped_ratio
        } else {
            f64::INFINITY
        }
    }
}

pub fn rank_complex(m: &DMatrix<Complex64>, rel_tol: f64) -> RankInfo {
    let sv = m.clone().singular_values();
    RankInfo::from_values(sv.iter().copied().collect(), rel_tol)
}

pub fn rank_real(m: &DMatrix<f64>, rel_tol: f64) -> RankInfo {
    let sv = m.clone().singular_values();
    RankInfo::from_values(sv.iter().copied().collect(), rel_tol)
}

/// Orthonormal bases read off one SVD.
#[derive(Debug, Clone)]
pub struct SvdSplit {
    /// Columns span the null space.
    pub null: DMatrix<f64>,
    /// Columns span the orthogonal complement of the null space.
    pub row: DMatrix<f64>,
    /// Columns span the range.
    pub range: DMatrix<f64>,
    pub rank: RankInfo,
}

/// SVD split with singular values below `rel_tol * s_max` treated as zero.
/// If every singular value is below `abs_floor` the matrix counts as zero.
pub fn svd_split(m: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> SvdSplit {
    let (rows, cols) = m.shape();
    // Pad wide matrices so that V is square and carries the full null space.
    let work = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let Factors { u, sv, v_t } = factor(&work);

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let top = sv.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = if top <= abs_floor {
        Vec::new()
    } else {
        order.iter().copied().filter(|&k| sv[k] > rel_tol * top).collect()
    };
    let dropped: Vec<usize> = order.iter().copied().filter(|k| !kept.contains(k)).collect();

    let v_cols = |idx: &[usize]| {
        let mut out = DMatrix::zeros(cols, idx.len());
        for (c, &k) in idx.iter().enumerate() {
            out.set_column(c, &v_t.row(k).transpose());
        }
        out
    };
    let mut range = DMatrix::zeros(rows, kept.len());
    for (c, &k) in kept.iter().enumerate() {
        range.set_column(c, &u.column(k).rows(0, rows).into_owned());
    }
    let rank_info = if top <= abs_floor {
        RankInfo {
            rank: 0,
            singular_values: order.iter().map(|&k| sv[k]).collect(),
            smallest_kept_ratio: 0.0,
            first_dropped_ratio: 0.0,
        }
    } else {
        RankInfo::from_values(sv.clone(), rel_tol)
    };
    SvdSplit {
        null: v_cols(&dropped),
        row: v_cols(&kept),
        range,
        rank: rank_info,
    }
}

/// Orthonormal basis of the column span.
pub fn orthonormalize(cols: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if cols.ncols() == 0 {
        return cols.clone();
    }
    svd_split(cols, rel_tol, 1e-300).range
}

/// `‖v − B Bᵀ v‖` for a matrix `B` with orthonormal columns.
pub fn projection_defect(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm()
}

/// Moore-Penrose least-squares solution `x = A⁺ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let f = factor(a);
    let top = f.sv.iter().copied().fold(0.0, f64::max);
    let eps = rel_tol * top;
    let ub = f.u.transpose() * b;
    let mut y = DVector::zeros(f.sv.len());
    for (k, &s) in f.sv.iter().enumerate() {
        if s > eps {
            y[k] = ub[k] / s;
        }
    }
    f.v_t.transpose() * y
}
