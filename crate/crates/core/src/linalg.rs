//! Dense complex matrices and overflow-safe determinants.
//!
//! The secular matrices built here are very sparse (at most four entries per
//! row before elimination), so the LU sweep only touches the nonzero columns
//! of each pivot row and skips rows whose multiplier is exactly zero. The
//! arithmetic performed is identical to a dense partial-pivoting LU; only
//! multiplications by exact zeros are omitted.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from nested rows; panics if the rows are ragged or not square.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        CMatrix { n, data }
    }

    /// Resize to `n × n` and zero every entry, reusing the allocation.
    pub fn reset(&mut self, n: usize) {
        self.n = n;
        self.data.clear();
        self.data.resize(n * n, ZERO);
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn nonzeros_in_row(&self, i: usize) -> usize {
        self.row(i).iter().filter(|z| **z != ZERO).count()
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant stored as `ln|det|` and `arg det ∈ (−π, π]`.
///
/// A singular matrix has `log_magnitude == -inf` and phase 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogDet {
    pub fn singular() -> Self {
        LogDet {
            log_magnitude: f64::NEG_INFINITY,
            phase: 0.0,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    /// `det` as a complex number, `None` when it over- or underflows.
    pub fn to_complex(&self) -> Option<Complex64> {
        if self.is_singular() {
            return Some(ZERO);
        }
        let m = self.log_magnitude.exp();
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        Some(Complex64::from_polar(m, self.phase))
    }

    /// `det · e^{−ln_scale}` as a complex number.
    pub fn scaled(&self, ln_scale: f64) -> Complex64 {
        if self.is_singular() {
            return ZERO;
        }
        Complex64::from_polar((self.log_magnitude - ln_scale).exp(), self.phase)
    }

    /// Multiply by `e^{iφ}`.
    pub fn rotated(&self, angle: f64) -> LogDet {
        if self.is_singular() {
            return *self;
        }
        LogDet {
            log_magnitude: self.log_magnitude,
            phase: wrap_phase(self.phase + angle),
        }
    }
}

/// Wrap into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Result of a partial-pivoting LU sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuSummary {
    pub log_det: LogDet,
    /// Smallest and largest pivot modulus. The smallest is 0 for an exactly
    /// singular matrix.
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl LuSummary {
    /// Rank deficiency by the pivot-ratio criterion `min < rel · max`.
    pub fn is_rank_deficient(&self, rel: f64) -> bool {
        self.min_pivot < rel * self.max_pivot
    }

    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }
}

/// LU factorization with partial pivoting, consuming the matrix.
pub fn lu_summary(mut a: CMatrix) -> Result<LuSummary> {
    let n = a.n;
    let pattern: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| a.data[i * n + j] != ZERO).collect())
        .collect();
    lu_sparse(&mut a, &pattern, &mut LuWorkspace::default())
}

/// Reusable buffers for [`lu_sparse`].
#[derive(Debug, Default, Clone)]
pub struct LuWorkspace {
    row_end: Vec<usize>,
    col_rows: Vec<Vec<usize>>,
    nz: Vec<usize>,
    below: Vec<usize>,
}

/// LU sweep over a matrix whose nonzeros lie within `pattern` (per row, the
/// columns that may be nonzero). Entries outside the pattern must be zero.
///
/// The factors are not kept: on return `a` is all zero, ready to be refilled
/// without a full reset.
///
/// `row_end[i]` is one past the last nonzero column of row `i` and
/// `col_rows[j]` lists the rows at or below the current step that may hold a
/// nonzero in column `j`. Both are maintained under fill-in and row swaps, so
/// the pivot search and the elimination only visit structurally nonzero
/// entries.
pub fn lu_sparse(a: &mut CMatrix, pattern: &[Vec<usize>], ws: &mut LuWorkspace) -> Result<LuSummary> {
    let n = a.n;
    assert_eq!(pattern.len(), n, "pattern must have one entry per row");
    let LuWorkspace {
        row_end,
        col_rows,
        nz,
        below,
    } = ws;
    row_end.clear();
    row_end.resize(n, 0);
    col_rows.resize_with(n, Vec::new);
    for c in col_rows.iter_mut() {
        c.clear();
    }
    for (i, cols) in pattern.iter().enumerate() {
        for &j in cols {
            let z = a.data[i * n + j];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            if z != ZERO {
                row_end[i] = row_end[i].max(j + 1);
                col_rows[j].push(i);
            }
        }
    }

    let mut log_mag = 0.0;
    let mut unit = Complex64::new(1.0, 0.0);
    let mut odd = false;
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;

    for k in 0..n {
        let mut p = k;
        let mut best = 0.0;
        for &i in col_rows[k].iter().filter(|&&i| i >= k) {
            let v = a.data[i * n + k].norm_sqr();
            if v > best || (v == best && v > 0.0 && i < p) {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            let rest = max_remaining(a, k);
            a.data.fill(ZERO);
            return Ok(LuSummary {
                log_det: LogDet::singular(),
                min_pivot: 0.0,
                max_pivot: max_pivot.max(rest),
            });
        }
        if p != k {
            let width = row_end[k].max(row_end[p]);
            for j in k..width {
                let (x, y) = (a.data[k * n + j], a.data[p * n + j]);
                if x == ZERO && y == ZERO {
                    continue;
                }
                a.data[k * n + j] = y;
                a.data[p * n + j] = x;
                for r in col_rows[j].iter_mut() {
                    if *r == k {
                        *r = p;
                    } else if *r == p {
                        *r = k;
                    }
                }
            }
            row_end.swap(k, p);
            odd = !odd;
        }
        let pivot = a.data[k * n + k];
        let modulus = pivot.norm();
        min_pivot = min_pivot.min(modulus);
        max_pivot = max_pivot.max(modulus);
        log_mag += modulus.ln();
        unit *= pivot / modulus;
        // keep the running phase on the unit circle
        unit /= unit.norm();

        let pivot_end = row_end[k];
        nz.clear();
        nz.extend((k + 1..pivot_end).filter(|&j| a.data[k * n + j] != ZERO));
        below.clear();
        below.extend(col_rows[k].iter().copied().filter(|&i| i > k));
        for &i in below.iter() {
            let lead = a.data[i * n + k];
            if lead == ZERO {
                continue;
            }
            let l = lead / pivot;
            a.data[i * n + k] = ZERO;
            for &j in nz.iter() {
                let slot = i * n + j;
                if a.data[slot] == ZERO {
                    col_rows[j].push(i);
                }
                let u = a.data[k * n + j];
                a.data[slot] -= l * u;
            }
            if row_end[i] < pivot_end {
                row_end[i] = pivot_end;
            }
        }
        // rows at or above k never matter again for later columns
        for &j in nz.iter() {
            col_rows[j].retain(|&i| i != k);
        }
    }

    // only the upper band [i, row_end[i]) of each row can still be nonzero
    for (i, &end) in row_end.iter().enumerate() {
        if end > i {
            a.data[i * n + i..i * n + end].fill(ZERO);
        }
    }

    if odd {
        unit = -unit;
    }
    let mut phase = unit.im.atan2(unit.re);
    if phase <= -PI {
        phase = PI;
    }
    Ok(LuSummary {
        log_det: LogDet {
            log_magnitude: log_mag,
            phase,
        },
        min_pivot: if n == 0 { 0.0 } else { min_pivot },
        max_pivot,
    })
}

fn max_remaining(a: &CMatrix, k: usize) -> f64 {
    let n = a.n;
    (k..n)
        .flat_map(|i| (k..n).map(move |j| (i, j)))
        .map(|(i, j)| a.data[i * n + j].norm())
        .fold(0.0, f64::max)
}

/// Complex number in double-double arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedComplex {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl ExtendedComplex {
    pub fn from_complex(z: Complex64) -> Self {
        ExtendedComplex {
            re: TwoFloat::from(z.re),
            im: TwoFloat::from(z.im),
        }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(f64::from(self.re), f64::from(self.im))
    }

    fn magnitude_hint(self) -> f64 {
        self.re.hi().abs().max(self.im.hi().abs())
    }

    fn scale(self, s: f64) -> Self {
        ExtendedComplex {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn add(self, o: Self) -> Self {
        ExtendedComplex {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    pub fn sub(self, o: Self) -> Self {
        ExtendedComplex {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }

    pub fn mul(self, o: Self) -> Self {
        ExtendedComplex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    pub fn div(self, o: Self) -> Self {
        let d = o.re * o.re + o.im * o.im;
        ExtendedComplex {
            re: quotient(self.re * o.re + self.im * o.im, d),
            im: quotient(self.im * o.re - self.re * o.im, d),
        }
    }
}

/// `x / y` to double-double accuracy. The library quotient is only good to
/// about 2⁻⁶⁰, so one Newton correction follows.
fn quotient(x: TwoFloat, y: TwoFloat) -> TwoFloat {
    let q = x / y;
    q + (x - q * y) / y
}

/// Determinant as `mantissa · 2^exponent`, computed in double-double
/// arithmetic from the double-precision entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedDet {
    pub mantissa: ExtendedComplex,
    pub exponent: i32,
}

impl ExtendedDet {
    /// `self / other`, or `None` when either determinant vanishes.
    pub fn ratio(&self, other: &ExtendedDet) -> Option<ExtendedComplex> {
        if other.mantissa.magnitude_hint() == 0.0 || self.mantissa.magnitude_hint() == 0.0 {
            return None;
        }
        let shift = (self.exponent - other.exponent).clamp(-1000, 1000);
        Some(self.mantissa.div(other.mantissa).scale(2f64.powi(shift)))
    }
}

/// Dense partial-pivoting LU in double-double arithmetic. Much slower than
/// [`log_det`]; meant for the few evaluations where double precision cancels.
pub fn extended_det(m: &CMatrix) -> Result<ExtendedDet> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.n;
    let mut a: Vec<ExtendedComplex> = m.data.iter().map(|&z| ExtendedComplex::from_complex(z)).collect();
    let mut det = ExtendedComplex::from_complex(Complex64::new(1.0, 0.0));
    let mut exponent = 0i32;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x * n + c].magnitude_hint().total_cmp(&a[y * n + c].magnitude_hint()))
            .expect("non-empty column");
        let pivot = a[p * n + c];
        if pivot.magnitude_hint() == 0.0 {
            return Ok(ExtendedDet {
                mantissa: ExtendedComplex::from_complex(ZERO),
                exponent: 0,
            });
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            det = det.scale(-1.0);
        }
        det = det.mul(pivot);
        // keep the running product near one; powers of two scale exactly
        let e = det.magnitude_hint().log2().floor() as i32;
        det = det.scale(2f64.powi(-e));
        exponent += e;
        for r in c + 1..n {
            if a[r * n + c].magnitude_hint() == 0.0 {
                continue;
            }
            let l = a[r * n + c].div(pivot);
            for j in c + 1..n {
                let t = a[c * n + j];
                if t.magnitude_hint() != 0.0 {
                    a[r * n + j] = a[r * n + j].sub(l.mul(t));
                }
            }
        }
    }
    Ok(ExtendedDet {
        mantissa: det,
        exponent,
    })
}

/// `ln|det M|` and `arg det M` via LU with partial pivoting.
pub fn log_det(m: &CMatrix) -> Result<LogDet> {
    lu_summary(m.clone()).map(|s| s.log_det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn extended_det_agrees_with_log_det() {
        let m = CMatrix::from_rows(&[
            vec![c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0)],
            vec![c(1e3, 0.0), c(0.5, -0.5), c(3.0, 1.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(1e-3, 2.0)],
        ]);
        let want = log_det(&m).unwrap().to_complex().unwrap();
        let d = extended_det(&m).unwrap();
        let got = d.mantissa.to_complex() * 2f64.powi(d.exponent);
        assert!((got - want).norm() < 1e-13 * want.norm());
        let one = d.ratio(&d).unwrap().to_complex();
        assert_eq!(one, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn extended_det_resolves_cancellation() {
        // det = (1 + h)(1 − h) − 1 = −h², lost entirely in double precision
        let h = 2f64.powi(-30);
        let m = CMatrix::from_rows(&[vec![c(1.0 + h, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0 - h, 0.0)]]);
        let d = extended_det(&m).unwrap();
        let got = d.mantissa.to_complex() * 2f64.powi(d.exponent);
        assert!((got.re + h * h).abs() < 1e-12 * h * h, "{got}");
    }

    #[test]
    fn identity_has_zero_log_det() {
        for n in [1, 3, 17] {
            let d = log_det(&CMatrix::identity(n)).unwrap();
            assert_eq!(d.log_magnitude, 0.0);
            assert_eq!(d.phase, 0.0);
        }
    }

    #[test]
    fn one_by_one_imaginary() {
        let d = log_det(&CMatrix::from_rows(&[vec![c(0.0, 2.0)]])).unwrap();
        assert!((d.log_magnitude - 2f64.ln()).abs() < 1e-15);
        assert!((d.phase - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn row_swap_has_phase_pi() {
        let m = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let d = log_det(&m).unwrap();
        assert_eq!(d.log_magnitude, 0.0);
        assert_eq!(d.phase, PI);
    }

    #[test]
    fn singular_matrix() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 1.0), c(2.0, 2.0)], vec![c(0.5, 0.5), c(1.0, 1.0)]]);
        let s = lu_summary(m).unwrap();
        assert!(s.log_det.is_singular());
        assert!(s.is_rank_deficient(1e-10));
    }

    #[test]
    fn non_finite_rejected() {
        let m = CMatrix::from_rows(&[vec![c(f64::NAN, 0.0)]]);
        assert_eq!(log_det(&m), Err(Error::NonFinite));
    }

    #[test]
    fn huge_determinant_does_not_overflow() {
        let mut m = CMatrix::zeros(200);
        for i in 0..200 {
            m[(i, i)] = c(0.0, 1e10);
        }
        let d = log_det(&m).unwrap();
        assert!((d.log_magnitude - 200.0 * 1e10f64.ln()).abs() < 1e-9);
        // i^200 = 1
        assert!(wrap_phase(d.phase).abs() < 1e-9);
        assert!(d.to_complex().is_none());
    }

    #[test]
    fn sparse_sweep_leaves_matrix_zeroed() {
        let mut m = CMatrix::zeros(4);
        let entries = [(0, 1, c(1.0, 2.0)), (1, 0, c(3.0, 0.0)), (2, 3, c(0.0, 1.0)), (3, 2, c(-1.0, 1.0)), (3, 0, c(2.0, 2.0))];
        for &(i, j, v) in &entries {
            m[(i, j)] = v;
        }
        let dense = lu_summary(m.clone()).unwrap();
        let pattern = vec![vec![1], vec![0], vec![3], vec![0, 2]];
        let mut ws = LuWorkspace::default();
        let sparse = lu_sparse(&mut m, &pattern, &mut ws).unwrap();
        assert_eq!(dense, sparse);
        assert!((0..4).all(|i| m.nonzeros_in_row(i) == 0));
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }
}
