//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection, smallest
//! singular values of bidiagonal matrices, and the Thomas solver.

/// A real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.dim(), "eigenvalue index out of range");
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * scale.min(mid.abs().max(1e-300)) || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.eigenvalue(k)).collect()
    }
}

/// Smallest singular value of an upper bidiagonal matrix with diagonal `d`
/// and superdiagonal `e`, where `e.len()` is `d.len()` (one extra column) or
/// `d.len() - 1` (square).
///
/// Works on the zero-diagonal Golub–Kahan form, whose Sturm counts keep
/// high relative accuracy for tiny singular values. Returns 0 when the
/// answer is below `1e-200`.
pub fn smallest_singular_value(d: &[f64], e: &[f64]) -> f64 {
    assert!(!d.is_empty(), "empty bidiagonal");
    assert!(e.len() == d.len() || e.len() + 1 == d.len(), "inconsistent bidiagonal shape");
    let mut t = Vec::with_capacity(d.len() + e.len());
    for i in 0..d.len() {
        t.push(d[i]);
        if i < e.len() {
            t.push(e[i]);
        }
    }
    let t2: Vec<f64> = t.iter().map(|v| v * v).collect();
    let tgk_dim = t.len() + 1;
    let offset = tgk_dim - d.len();
    // Singular values below `sigma`.
    let count = |sigma: f64| -> usize {
        let mut neg = 0usize;
        let mut q = -sigma;
        if q < 0.0 {
            neg += 1;
        }
        for &s2 in &t2 {
            q = -sigma - s2 / q;
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                neg += 1;
            }
        }
        neg - offset
    };
    let mut hi = 0.0f64;
    for i in 0..t.len() {
        let left = if i > 0 { t[i - 1].abs() } else { 0.0 };
        hi = hi.max(left + t[i].abs());
    }
    hi = hi.max(t.last().map_or(0.0, |v| v.abs())) * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let floor = 1e-200;
    if count(floor) >= 1 {
        return 0.0;
    }
    let mut lo = floor;
    for _ in 0..3000 {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if hi - lo <= 2.0 * f64::EPSILON * hi || mid <= lo || mid >= hi {
            break;
        }
        if count(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the tridiagonal system with sub-diagonal `sub`, diagonal `diag`
/// and super-diagonal `sup`. Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(rhs.len() == n && sub.len() + 1 == n.max(1) && sup.len() + 1 == n.max(1));
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return None;
    }
    x[0] = rhs[0] / denom;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / denom;
        denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}
