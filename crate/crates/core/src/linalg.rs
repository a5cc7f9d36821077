//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

/// The standard complex structure J₀ on interleaved coordinates, (x,y) ↦ (−y,x) per pair.
pub fn j0(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for p in 0..n {
        j[(2 * p, 2 * p + 1)] = -1.0;
        j[(2 * p + 1, 2 * p)] = 1.0;
    }
    j
}

/// Applies J₀ to a vector without forming the matrix.
pub fn apply_j0(v: &[f64], out: &mut [f64]) {
    for p in 0..v.len() / 2 {
        out[2 * p] = -v[2 * p + 1];
        out[2 * p + 1] = v[2 * p];
    }
}

/// Whether MᵀJ₀M = J₀ holds entrywise within `tol`.
pub fn is_symplectic(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) {
        return false;
    }
    let j = j0(m.nrows() / 2);
    let d = m.transpose() * &j * m - j;
    d.amax() <= tol
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&i| e.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(a.nrows(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sorted_eigen(a);
    let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    &vecs * d * vecs.transpose()
}

/// One symplectic eigenmode of a positive-definite quadratic form S:
/// J₀S v = iω v with v = re + i·im.
#[derive(Debug, Clone)]
pub struct SymplecticMode {
    pub omega: f64,
    pub re: DVector<f64>,
    pub im: DVector<f64>,
}

/// Williamson normal form data of a symmetric positive-definite S, sorted by
/// decreasing ω (so increasing 2π/ω).
pub fn symplectic_modes(s: &DMatrix<f64>) -> Vec<SymplecticMode> {
    let dim = s.nrows();
    let n = dim / 2;
    let root = sym_sqrt(s);
    let k = &root * j0(n) * &root;
    let k2 = -(&k * &k);
    let (vals, vecs) = sorted_eigen(&k2);
    let inv_root = root
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::identity(dim, dim));
    let mut used: Vec<DVector<f64>> = Vec::new();
    let mut modes = Vec::new();
    for c in (0..dim).rev() {
        if modes.len() == n {
            break;
        }
        let mut u = vecs.column(c).into_owned();
        for w in &used {
            let d = w.dot(&u);
            u -= w * d;
        }
        let nu = u.norm();
        if nu < 0.5 {
            continue;
        }
        u /= nu;
        let omega = vals[c].max(0.0).sqrt();
        let mut u2 = &k * &u / omega;
        for w in &used {
            let d = w.dot(&u2);
            u2 -= w * d;
        }
        let d = u.dot(&u2);
        u2 -= &u * d;
        u2 /= u2.norm();
        modes.push(SymplecticMode {
            omega,
            re: &inv_root * &u,
            im: -(&inv_root * &u2),
        });
        used.push(u);
        used.push(u2);
    }
    modes
}

/// Random symplectic matrix built from elementary factors: plane dilations,
/// shears, symmetric coupling shears and unitary plane mixings.
pub fn random_symplectic<R: Rng>(n: usize, rng: &mut R, strength: f64) -> DMatrix<f64> {
    let dim = 2 * n;
    let mut m = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..2 {
        for p in 0..n {
            let lam = (strength * rng.gen_range(-1.0..1.0f64)).exp();
            let mut f = DMatrix::identity(dim, dim);
            f[(2 * p, 2 * p)] = lam;
            f[(2 * p + 1, 2 * p + 1)] = 1.0 / lam;
            m = f * m;

            let mut f = DMatrix::identity(dim, dim);
            f[(2 * p + 1, 2 * p)] = strength * rng.gen_range(-1.0..1.0);
            m = f * m;

            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut f = DMatrix::identity(dim, dim);
            f[(2 * p, 2 * p)] = th.cos();
            f[(2 * p, 2 * p + 1)] = -th.sin();
            f[(2 * p + 1, 2 * p)] = th.sin();
            f[(2 * p + 1, 2 * p + 1)] = th.cos();
            m = f * m;
        }
        for p in 0..n {
            for q in p + 1..n {
                let c = strength * rng.gen_range(-1.0..1.0);
                let mut f = DMatrix::identity(dim, dim);
                f[(2 * p + 1, 2 * q)] = c;
                f[(2 * q + 1, 2 * p)] = c;
                m = f * m;

                // real rotation mixing the two planes, applied to x and y alike
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                let mut f = DMatrix::identity(dim, dim);
                for off in 0..2 {
                    f[(2 * p + off, 2 * p + off)] = th.cos();
                    f[(2 * p + off, 2 * q + off)] = -th.sin();
                    f[(2 * q + off, 2 * p + off)] = th.sin();
                    f[(2 * q + off, 2 * q + off)] = th.cos();
                }
                m = f * m;
            }
        }
    }
    m
}

/// Random unitary matrix (commutes with J₀) built from plane rotations and mixings.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let dim = 2 * n;
    let mut m = DMatrix::<f64>::identity(dim, dim);
    for p in 0..n {
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut f = DMatrix::identity(dim, dim);
        f[(2 * p, 2 * p)] = th.cos();
        f[(2 * p, 2 * p + 1)] = -th.sin();
        f[(2 * p + 1, 2 * p)] = th.sin();
        f[(2 * p + 1, 2 * p + 1)] = th.cos();
        m = f * m;
        for q in p + 1..n {
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut f = DMatrix::identity(dim, dim);
            for off in 0..2 {
                f[(2 * p + off, 2 * p + off)] = th.cos();
                f[(2 * p + off, 2 * q + off)] = -th.sin();
                f[(2 * q + off, 2 * p + off)] = th.sin();
                f[(2 * q + off, 2 * q + off)] = th.cos();
            }
            m = f * m;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn j0_convention() {
        let j = j0(2);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!((j * v).as_slice(), &[-2.0, 1.0, -4.0, 3.0]);
    }

    #[test]
    fn random_factors_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            assert!(is_symplectic(&random_symplectic(n, &mut rng, 0.4), 1e-10));
            let u = random_unitary(n, &mut rng);
            assert!(is_symplectic(&u, 1e-10));
            assert!((&u * j0(n) - j0(n) * &u).amax() < 1e-12);
        }
    }

    #[test]
    fn williamson_of_diagonal_form() {
        // S = diag(2π/a_i) per plane has ω_i = 2π/a_i
        let a = [1.0, 2.0];
        let mut s = DMatrix::zeros(4, 4);
        for p in 0..2 {
            s[(2 * p, 2 * p)] = std::f64::consts::TAU / a[p];
            s[(2 * p + 1, 2 * p + 1)] = std::f64::consts::TAU / a[p];
        }
        let modes = symplectic_modes(&s);
        assert_eq!(modes.len(), 2);
        for (m, ai) in modes.iter().zip(a) {
            assert!((std::f64::consts::TAU / m.omega - ai).abs() < 1e-12);
        }
    }

    #[test]
    fn williamson_invariant_under_symplectic_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_symplectic(2, &mut rng, 0.4);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.3, 0.3]));
        let s2 = m.transpose() * &s * &m;
        let om: Vec<f64> = symplectic_modes(&s2).iter().map(|m| m.omega).collect();
        assert!((om[0] - 1.0).abs() < 1e-9 && (om[1] - 0.3).abs() < 1e-9);
        let j = j0(2);
        for md in symplectic_modes(&s2) {
            // J₀S(re + i im) = iω(re + i im)
            let lhs_re = &j * &s2 * &md.re;
            let lhs_im = &j * &s2 * &md.im;
            assert!((lhs_re + &md.im * md.omega).amax() < 1e-8);
            assert!((lhs_im - &md.re * md.omega).amax() < 1e-8);
        }
    }
}
