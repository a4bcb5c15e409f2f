//! Solve the small symmetric auxiliary system that determines the
//! order-t residual-update coefficients from cached moments.

use crate::dense::{jacobi_eigen, DenseMatrix};
use crate::error::{Result, SolverError};
use crate::krylov::KrylovCache;

/// Outcome of an auxiliary solve.
#[derive(Debug, Clone)]
pub struct AuxSolution {
    /// Coefficients α₁..α_t (index 0 holds α₁).
    pub alpha: Vec<f64>,
    /// Numerical rank of the moment matrix at the chosen cutoff.
    pub rank: usize,
}

/// Assemble and solve the order-t moment system in minimum-norm sense.
///
/// With `shift = 0` the system is M[i][j] = φ_{i+j+2}, β[i] = φ_{i+1}
/// (0-based indices into the cached moment sequence). `shift = 1` moves
/// every moment index up by one, which is the variant used when iterating
/// on the normal-equation residual through the same cache.
pub fn solve_aux(cache: &KrylovCache, t: usize, shift: usize) -> Result<AuxSolution> {
    if t == 0 {
        return Err(SolverError::InvalidOption("auxiliary order must be at least 1".into()));
    }
    let needed = 2 * t + shift;
    if cache.num_moments() <= needed {
        return Err(SolverError::InvalidOption(format!(
            "cache holds {} moments, order {} with shift {} needs {}",
            cache.num_moments(),
            t,
            shift,
            needed + 1
        )));
    }
    let mut m = DenseMatrix::zeros(t, t);
    let mut beta = vec![0.0; t];
    for i in 0..t {
        beta[i] = cache.moment(i + 1 + shift);
        for j in 0..t {
            m.set(i, j, cache.moment(i + j + 2 + shift));
        }
    }
    // scale-relative zero test: if the quadratic moments vanish against the
    // residual norm, H annihilates the residual and no update exists
    let phi0 = cache.moment(shift).abs().max(f64::MIN_POSITIVE);
    let mfro: f64 = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    if mfro <= f64::MIN_POSITIVE.sqrt() * phi0 {
        return Err(SolverError::HAnnihilatedResidual);
    }

    let (vals, vecs) = jacobi_eigen(&m)?;
    let lam_max = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if lam_max <= 0.0 {
        return Err(SolverError::HAnnihilatedResidual);
    }
    let cutoff = (t as f64) * f64::EPSILON * lam_max;
    let mut alpha = vec![0.0; t];
    let mut rank = 0usize;
    for k in 0..t {
        let lam = vals[k];
        if lam.abs() <= cutoff {
            continue;
        }
        rank += 1;
        let mut vb = 0.0;
        for i in 0..t {
            vb += vecs.get(i, k) * beta[i];
        }
        let coef = vb / lam;
        for i in 0..t {
            alpha[i] += coef * vecs.get(i, k);
        }
    }
    if !alpha.iter().all(|x| x.is_finite()) {
        return Err(SolverError::NonFinite("auxiliary solve produced non-finite coefficients".into()));
    }
    Ok(AuxSolution { alpha, rank })
}

/// Solve the same order-t problem as [`solve_aux`] (shift 0) directly as a
/// least-squares fit of the cached Krylov columns to the anchor residual:
/// min_α ‖c₀ − Σ αᵢ cᵢ‖. Identical minimizer in exact arithmetic, but the
/// conditioning is the square root of the moment system's, which matters
/// when t approaches the minimal-polynomial degree.
pub fn solve_aux_ls(cache: &KrylovCache, t: usize) -> Result<AuxSolution> {
    if t == 0 {
        return Err(SolverError::InvalidOption("auxiliary order must be at least 1".into()));
    }
    if cache.order() < t {
        return Err(SolverError::InvalidOption(format!(
            "cache holds order {}, least-squares solve needs {}",
            cache.order(),
            t
        )));
    }
    let n = cache.column(0).len();
    // modified Gram-Schmidt QR with column pivoting on [c1 .. ct]
    let mut cols: Vec<Vec<f64>> = (1..=t).map(|i| cache.column(i).to_vec()).collect();
    let mut target = cache.column(0).to_vec();
    let mut perm: Vec<usize> = (0..t).collect();
    let mut r = DenseMatrix::zeros(t, t);
    let mut qtb = vec![0.0; t];
    let norm0: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let scale = norm0.iter().cloned().fold(0.0f64, f64::max);
    if scale <= f64::MIN_POSITIVE.sqrt() * (n as f64).sqrt() {
        return Err(SolverError::HAnnihilatedResidual);
    }
    let mut rank = 0usize;
    for k in 0..t {
        // pivot on the largest remaining column
        let (pk, pnorm) = (k..t)
            .map(|j| (j, cols[j].iter().map(|x| x * x).sum::<f64>().sqrt()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pnorm <= (t as f64) * f64::EPSILON * scale {
            break;
        }
        cols.swap(k, pk);
        perm.swap(k, pk);
        for i in 0..k {
            let (ri_k, ri_pk) = (r.get(i, k), r.get(i, pk));
            r.set(i, k, ri_pk);
            r.set(i, pk, ri_k);
        }
        rank += 1;
        let rkk = pnorm;
        r.set(k, k, rkk);
        let qk: Vec<f64> = cols[k].iter().map(|x| x / rkk).collect();
        for j in (k + 1)..t {
            let proj: f64 = qk.iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            r.set(k, j, proj);
            for (cj, &qi) in cols[j].iter_mut().zip(&qk) {
                *cj -= proj * qi;
            }
        }
        let proj: f64 = qk.iter().zip(&target).map(|(a, b)| a * b).sum();
        qtb[k] = proj;
        for (ti, &qi) in target.iter_mut().zip(&qk) {
            *ti -= proj * qi;
        }
        cols[k] = qk;
    }
    if rank == 0 {
        return Err(SolverError::HAnnihilatedResidual);
    }
    let mut y = vec![0.0; t];
    for k in (0..rank).rev() {
        let mut s = qtb[k];
        for j in (k + 1)..rank {
            s -= r.get(k, j) * y[j];
        }
        y[k] = s / r.get(k, k);
    }
    let mut alpha = vec![0.0; t];
    for k in 0..rank {
        alpha[perm[k]] = y[k];
    }
    if !alpha.iter().all(|x| x.is_finite()) {
        return Err(SolverError::NonFinite("auxiliary solve produced non-finite coefficients".into()));
    }
    Ok(AuxSolution { alpha, rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{HMode, OperatorH};
    use crate::sparse::SparseMatrix;

    fn cache_for(diag: &[f64], r: &[f64], t: usize, shift: usize) -> KrylovCache {
        let a = SparseMatrix::from_diag(diag);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(r.to_vec()).unwrap();
        // shift=1 needs one extra moment pair
        c.extend(&h, t + shift).unwrap();
        c
    }

    #[test]
    fn order_one_matches_rayleigh_ratio() {
        // α₁ = φ₁/φ₂ for t = 1
        let c = cache_for(&[1.0, 2.0, 5.0], &[1.0, 1.0, 1.0], 1, 0);
        let sol = solve_aux(&c, 1, 0).unwrap();
        let expect = c.moment(1) / c.moment(2);
        assert!((sol.alpha[0] - expect).abs() < 1e-14);
        assert_eq!(sol.rank, 1);
    }

    #[test]
    fn exact_termination_on_two_eigenvalues() {
        // diag(2,5) has minimal polynomial degree 2: order-2 update must
        // reproduce the residual exactly, i.e. sum α_i H^i r = r
        let r = vec![1.0, 1.0];
        let c = cache_for(&[2.0, 5.0], &r, 2, 0);
        let sol = solve_aux(&c, 2, 0).unwrap();
        // residual after update: r - α₁ H r - α₂ H² r, componentwise for diag
        for (k, &d) in [2.0f64, 5.0].iter().enumerate() {
            let rem = r[k] - sol.alpha[0] * d * r[k] - sol.alpha[1] * d * d * r[k];
            assert!(rem.abs() < 1e-12, "component {k} remainder {rem}");
        }
    }

    #[test]
    fn rank_deficiency_on_single_eigenvalue() {
        // one distinct eigenvalue: order-2 moment matrix has rank 1 and the
        // min-norm solve must still annihilate the residual
        let r = vec![1.0, -2.0];
        let c = cache_for(&[3.0, 3.0], &r, 2, 0);
        let sol = solve_aux(&c, 2, 0).unwrap();
        assert_eq!(sol.rank, 1);
        for &x in &r {
            let rem = x - sol.alpha[0] * 3.0 * x - sol.alpha[1] * 9.0 * x;
            assert!(rem.abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_solve_uses_higher_moments() {
        let c = cache_for(&[1.0, 4.0], &[1.0, 1.0], 1, 1);
        let sol = solve_aux(&c, 1, 1).unwrap();
        // shifted order-1 coefficient is φ₂/φ₃
        let expect = c.moment(2) / c.moment(3);
        assert!((sol.alpha[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn annihilated_residual_detected() {
        // A has a null vector; residual in the kernel gives zero moments
        let a = SparseMatrix::from_diag(&[0.0, 1.0]);
        let h = OperatorH::new(&a, HMode::SymmetricPsd).unwrap();
        let mut c = KrylovCache::new(vec![1.0, 0.0]).unwrap();
        c.extend(&h, 1).unwrap();
        match solve_aux(&c, 1, 0) {
            Err(SolverError::HAnnihilatedResidual) => {}
            other => panic!("expected annihilation, got {other:?}"),
        }
    }
}
