//! Flux, quasimomentum and the circulant vertex coupling.
//!
//! Units: ħ = 2m = e = c = 1, unit edge length, coupling length scale ℓ = 1,
//! flux quantum Φ₀ = 2π. A flux ratio p/q per plaquette corresponds to the
//! field B = 2πp/q.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced rational flux per plaquette.
///
/// The field is kept as the exact pair `(p, q)`; `2πp/q` is only formed where
/// a phase is evaluated. The non-magnetic lattice is the sentinel `0/1`,
/// available through [`FluxRatio::baseline`] and never produced by
/// [`make_flux`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FluxRatio {
    q: u32,
    p: u32,
}

impl FluxRatio {
    /// The non-magnetic lattice, `p/q = 0/1`.
    pub const fn baseline() -> Self {
        FluxRatio { p: 0, q: 1 }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Number of vertices in the unit-flux cell.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn is_baseline(&self) -> bool {
        self.p == 0
    }

    /// Magnetic field B = 2πp/q.
    pub fn field(&self) -> f64 {
        2.0 * PI * self.p as f64 / self.q as f64
    }

    /// Half of the vertical gauge phase `v·B/2` at vertex `v`, reduced mod 2π
    /// in integer arithmetic before converting to radians.
    pub fn half_gauge_phase(&self, vertex: u32) -> f64 {
        let two_q = 2 * self.q as u64;
        let m = (vertex as u64 * self.p as u64) % two_q;
        PI * m as f64 / self.q as f64
    }
}

impl fmt::Display for FluxRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

/// Validate and reduce-check a magnetic flux ratio `p/q`.
pub fn make_flux(p: i64, q: i64) -> Result<FluxRatio> {
    if q < 2 || p < 1 || p >= q || q > u32::MAX as i64 {
        return Err(Error::OutOfRange { p, q });
    }
    if p.gcd(&q) != 1 {
        return Err(Error::NotReduced { p, q });
    }
    Ok(FluxRatio {
        p: p as u32,
        q: q as u32,
    })
}

/// All reduced ratios `p/q` with `2 <= q <= qmax`, ordered by `(q, p)`.
pub fn coprime_fluxes(qmax: u32) -> Vec<FluxRatio> {
    (2..=qmax)
        .flat_map(|q| {
            (1..q)
                .filter(move |p| p.gcd(&q) == 1)
                .map(move |p| FluxRatio { p, q })
        })
        .collect()
}

/// Quasimomentum `(θ1, θ2)` labelling a Floquet-Bloch fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quasimomentum {
    theta1: f64,
    theta2: f64,
}

impl Quasimomentum {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for t in [theta1, theta2] {
            if !(-PI..PI).contains(&t) {
                return Err(Error::QuasimomentumOutOfRange(t));
            }
        }
        Ok(Quasimomentum { theta1, theta2 })
    }

    /// Wrap arbitrary angles into the Brillouin zone `[-π, π)`.
    pub fn wrapped(theta1: f64, theta2: f64) -> Self {
        fn wrap(t: f64) -> f64 {
            let w = (t + PI).rem_euclid(2.0 * PI) - PI;
            if w >= PI {
                -PI
            } else {
                w
            }
        }
        Quasimomentum {
            theta1: wrap(theta1),
            theta2: wrap(theta2),
        }
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// Representative with Θ_q = +2.
    pub fn upper_extremal() -> Self {
        Quasimomentum {
            theta1: 0.0,
            theta2: 0.0,
        }
    }

    /// Representative with Θ_q = −2: `(−π, −π/q)`. The combination
    /// `θ1 + qθ2` is a multiple of 2π, same as for the upper one.
    pub fn lower_extremal(q: u32) -> Self {
        Quasimomentum {
            theta1: -PI,
            theta2: -PI / q as f64,
        }
    }
}

/// Θ_q = cos qθ2 + cos θ1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ThetaQ(pub f64);

impl ThetaQ {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn theta_q(qm: Quasimomentum, q: u32) -> ThetaQ {
    ThetaQ((q as f64 * qm.theta2).cos() + qm.theta1.cos())
}

/// The single-cycle shift permutation used as the vertex scattering matrix:
/// entry `(j, j+1 mod n)` equals one.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

pub fn coupling_matrix(n: usize) -> Result<CouplingMatrix> {
    if n < 3 {
        return Err(Error::DegreeTooSmall(n));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        entries[j * n + (j + 1) % n] = Complex64::new(1.0, 0.0);
    }
    Ok(CouplingMatrix { n, entries })
}

impl CouplingMatrix {
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.n + col]
    }

    pub fn transpose(&self) -> CouplingMatrix {
        let n = self.n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        CouplingMatrix { n, entries }
    }

    pub fn adjoint(&self) -> CouplingMatrix {
        let mut t = self.transpose();
        t.entries.iter_mut().for_each(|z| *z = z.conj());
        t
    }

    pub fn mul(&self, other: &CouplingMatrix) -> CouplingMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        CouplingMatrix { n, entries }
    }

    pub fn pow(&self, exponent: u32) -> CouplingMatrix {
        let mut acc = CouplingMatrix::identity(self.n);
        for _ in 0..exponent {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn identity(n: usize) -> CouplingMatrix {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        CouplingMatrix { n, entries }
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_deviation(&self, other: &CouplingMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.max_deviation(&self.transpose()) == 0.0
    }
}
