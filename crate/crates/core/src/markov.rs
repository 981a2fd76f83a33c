//! Four-state spectrum-utilization chain.
//!
//! States, in order: S0 (PU idle, SU silent: wasted hole), S1 (PU busy, SU
//! silent), S2 (PU idle, SU active), S3 (PU busy, SU active: collision).
//! The transition matrix is column-stochastic: `psi[i][j]` is the
//! probability of moving from state `j` to state `i`.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::sensing::ErrorProfile;
use crate::traffic::TransitionProbs;

const COLUMN_TOL: f64 = 1e-9;
const DENOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    psi: [[f64; 4]; 4],
}

impl TransitionMatrix {
    /// Builds from explicit columns, checking stochasticity.
    pub fn from_columns(cols: [[f64; 4]; 4]) -> Result<Self> {
        let mut psi = [[0.0; 4]; 4];
        for (j, col) in cols.iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > COLUMN_TOL || col.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::ColumnSumViolation { column: j, sum });
            }
            for (i, &v) in col.iter().enumerate() {
                psi[i][j] = v;
            }
        }
        Ok(Self { psi })
    }

    /// `psi[to][from]`.
    pub fn entries(&self) -> &[[f64; 4]; 4] {
        &self.psi
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.psi[to][from]
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.psi[i][j])
    }
}

pub fn build_transition_matrix(e: &ErrorProfile, t: &TransitionProbs) -> Result<TransitionMatrix> {
    let (mu, nu) = (t.mu(), t.nu());
    // From an idle slot the SU stays silent after a false alarm; the PU
    // then arrives with probability mu.
    let idle_col = |pf: f64| [pf * (1.0 - mu), pf * mu, (1.0 - pf) * (1.0 - mu), (1.0 - pf) * mu];
    // From a busy slot the SU stays silent after a correct detection; the
    // PU then leaves with probability nu.
    let busy_col = |pm: f64| [(1.0 - pm) * nu, (1.0 - pm) * (1.0 - nu), pm * nu, pm * (1.0 - nu)];
    TransitionMatrix::from_columns([
        idle_col(e.pf0()),
        busy_col(e.pm0()),
        idle_col(e.pf1()),
        busy_col(e.pm1()),
    ])
}

/// Stationary distribution over [S0, S1, S2, S3].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub p: [f64; 4],
}

impl SteadyState {
    pub fn p0(&self) -> f64 {
        self.p[0]
    }

    pub fn p1(&self) -> f64 {
        self.p[1]
    }

    pub fn p2(&self) -> f64 {
        self.p[2]
    }

    pub fn p3(&self) -> f64 {
        self.p[3]
    }

    pub fn busy(&self) -> f64 {
        self.p[1] + self.p[3]
    }

    pub fn idle(&self) -> f64 {
        self.p[0] + self.p[2]
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &SteadyState) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `psi p = p` with `sum p = 1` by LU on the augmented system.
pub fn steady_state_numeric(m: &TransitionMatrix) -> Result<SteadyState> {
    let mut a = m.to_matrix() - Matrix4::identity();
    for j in 0..4 {
        a[(3, j)] = 1.0;
    }
    let b = Vector4::new(0.0, 0.0, 0.0, 1.0);
    let lu = a.lu();
    let scale = a.abs().max();
    if lu.determinant().abs() <= f64::EPSILON * scale.powi(4) {
        return Err(Error::SingularSystem);
    }
    let x = lu.solve(&b).ok_or(Error::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    // Round-off can leave tiny negative entries for near-absorbing states.
    let mut p = [0.0; 4];
    for (dst, &v) in p.iter_mut().zip(x.iter()) {
        *dst = v.max(0.0);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(SteadyState { p })
}

/// `(1 - xi*delta)*zeta + xi*r`, the shared denominator of the closed forms.
fn denominator(e: &ErrorProfile, t: &TransitionProbs) -> Result<f64> {
    let g = (1.0 - e.xi() * t.delta()) * e.zeta() + e.xi() * t.r();
    if g.is_nan() || g.abs() <= DENOM_TOL {
        return Err(Error::DegenerateDenominator { value: g });
    }
    Ok(g)
}

pub fn steady_state_closed_form(e: &ErrorProfile, t: &TransitionProbs) -> Result<SteadyState> {
    let g = denominator(e, t)?;
    let (r, delta) = (t.r(), t.delta());
    let (xi, zeta) = (e.xi(), e.zeta());
    let (pf0, pm0, pf1, pm1) = (e.pf0(), e.pm0(), e.pf1(), e.pm1());
    let scale = 1.0 / ((r + 1.0) * g);
    Ok(SteadyState {
        p: [
            scale * r * (pf1 * (r - zeta * delta) + 1.0 - pm1),
            scale * ((1.0 - pm1) * (1.0 - xi * delta) + pf1 * r),
            scale * r * ((1.0 - pf0) * (r - zeta * delta) + pm0),
            scale * (pm0 * (1.0 - xi * delta) + (1.0 - pf0) * r),
        ],
    })
}

/// Fraction of the PU's airtime overlapped by SU transmission, including
/// the half slot lost on average when the PU arrives mid-slot.
pub fn collision_ratio(e: &ErrorProfile, t: &TransitionProbs) -> Result<f64> {
    let g = denominator(e, t)?;
    Ok(t.nu() / 2.0 + (e.pm0() * (1.0 - e.xi() * t.delta()) + (1.0 - e.pf0()) * t.r()) / g)
}

/// Fraction of the PU's idle time left unused by the SU, including the half
/// slot lost on average when the PU leaves mid-slot.
pub fn waste_ratio(e: &ErrorProfile, t: &TransitionProbs) -> Result<f64> {
    let g = denominator(e, t)?;
    Ok(t.mu() / 2.0 + (e.pf1() * (t.r() - e.zeta() * t.delta()) + 1.0 - e.pm1()) / g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationReport {
    pub pc: f64,
    pub pw: f64,
    pub steady: SteadyState,
}

pub fn utilization(e: &ErrorProfile, t: &TransitionProbs) -> Result<UtilizationReport> {
    Ok(UtilizationReport {
        pc: collision_ratio(e, t)?,
        pw: waste_ratio(e, t)?,
        steady: steady_state_closed_form(e, t)?,
    })
}
