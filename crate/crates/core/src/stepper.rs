//! Backward-Euler time stepping of the mixed heat equation.
//!
//! Each step solves
//! `[[-M_sigma, B^T], [B, M_u/dt + K]] (sigma^n; u^n) = (0; F(t^n) + M_u u^{n-1}/dt)`
//! with one factorization reused for every step.

use std::sync::Arc;

use crate::assembly::load_vector;
use crate::assembly::sparse::{dot, norm2};
use crate::elements::Field;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::hodge::{dstar_h, elliptic_projection, HarmonicBasis, MixedPair};
use crate::linsolve::SaddleSolver;

pub type SourceFn = Arc<dyn Fn(&Vec3, f64) -> Vec3 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// How `u_h^0` is chosen.
#[derive(Clone)]
pub enum InitialData {
    Zero,
    /// Elliptic projection of `u(., 0)` given `u` and `L u` at `t = 0`.
    EllipticProjection { u: FieldFn, lu: FieldFn },
    Coefficients(Vec<f64>),
}

impl std::fmt::Debug for InitialData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::EllipticProjection { .. } => write!(f, "EllipticProjection"),
            Self::Coefficients(c) => write!(f, "Coefficients(len {})", c.len()),
        }
    }
}

#[derive(Clone)]
pub struct TransientConfig {
    pub dt: f64,
    pub t_final: f64,
    pub f: SourceFn,
    pub u0: InitialData,
}

impl std::fmt::Debug for TransientConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransientConfig")
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("u0", &self.u0)
            .finish()
    }
}

impl TransientConfig {
    pub fn new(dt: f64, t_final: f64, f: SourceFn, u0: InitialData) -> Result<Self> {
        let cfg = Self { dt, t_final, f, u0 };
        cfg.num_steps()?;
        Ok(cfg)
    }

    /// `M = T / dt`, which must be an integer to within half an ulp.
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be nonnegative, got {}",
                self.t_final
            )));
        }
        let ratio = self.t_final / self.dt;
        let m = ratio.round();
        // m*dt and the division each round, so allow a few ulps
        if (ratio - m).abs() > 8.0 * f64::EPSILON * m.max(1.0) || m > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "final time {} is not an integer multiple of the time step {}",
                self.t_final, self.dt
            )));
        }
        Ok(m as usize)
    }
}

#[derive(Debug, Clone)]
pub struct TransientState {
    pub n: usize,
    /// `n * dt`
    pub t: f64,
    pub sigma: Field,
    pub u: Field,
}

/// A factorized backward-Euler scheme for one `(pair, dt)`.
pub struct Stepper<'a> {
    pair: &'a MixedPair,
    config: TransientConfig,
    steps: usize,
    solver: SaddleSolver,
}

impl std::fmt::Debug for Stepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("config", &self.config)
            .field("steps", &self.steps)
            .finish()
    }
}

impl<'a> Stepper<'a> {
    pub fn new(pair: &'a MixedPair, config: TransientConfig) -> Result<Self> {
        let steps = config.num_steps()?;
        let c = pair.m_u.linear_combination(1.0 / config.dt, &pair.k, 1.0)?;
        let solver = pair.saddle(c, Vec::new())?.factor()?;
        Ok(Self {
            pair,
            config,
            steps,
            solver,
        })
    }

    pub fn config(&self) -> &TransientConfig {
        &self.config
    }

    pub fn num_steps(&self) -> usize {
        self.steps
    }

    /// `u_h^0` from the configuration and `sigma_h^0 = d*_h u_h^0`.
    /// Elliptic-projection data needs the harmonic basis.
    pub fn init_state(&self, harmonic: Option<&HarmonicBasis>) -> Result<TransientState> {
        let pair = self.pair;
        let u = match &self.config.u0 {
            InitialData::Zero => Field::zeros(&pair.u_space),
            InitialData::Coefficients(c) => Field::from_coeffs(&pair.u_space, c.clone())?,
            InitialData::EllipticProjection { u, lu } => {
                let h = harmonic.ok_or_else(|| {
                    Error::InvalidParameter("elliptic projection initial data needs a harmonic basis".into())
                })?;
                elliptic_projection(pair, h, &|x| u(x), &|x| lu(x))?.u
            }
        };
        let sigma = dstar_h(pair, &u)?;
        Ok(TransientState { n: 0, t: 0.0, sigma, u })
    }

    /// Advances one step.
    pub fn step(&self, state: &TransientState) -> Result<TransientState> {
        let pair = self.pair;
        let n = state.n + 1;
        let t = n as f64 * self.config.dt;
        let mut g = load_vector(&pair.u_space, &*self.config.f, t)?;
        let mu = pair.m_u.mul_vec(&state.u.coeffs);
        g.iter_mut().zip(&mu).for_each(|(a, b)| *a += b / self.config.dt);
        let sol = self.solver.solve(&vec![0.0; pair.n_sigma()], &g, &[])?;
        if !(sol.relative_residual <= 1e-10) {
            return Err(Error::Solver(format!(
                "step {n}: relative residual {:e}",
                sol.relative_residual
            )));
        }
        Ok(TransientState {
            n,
            t,
            sigma: Field::from_coeffs(&pair.sigma_space, sol.sigma)?,
            u: Field::from_coeffs(&pair.u_space, sol.u)?,
        })
    }

    /// Runs all `M` steps from `init`, calling `observer` after each step.
    pub fn run(
        &self,
        init: TransientState,
        mut observer: impl FnMut(&TransientState) -> Result<()>,
    ) -> Result<TransientState> {
        let mut state = init;
        while state.n < self.steps {
            state = self.step(&state)?;
            observer(&state)?;
        }
        Ok(state)
    }
}

/// Relative residual of `<sigma, tau> - <d tau, u> = 0` for a state.
pub fn codifferential_residual(pair: &MixedPair, state: &TransientState) -> f64 {
    let ms = pair.m_sigma.mul_vec(&state.sigma.coeffs);
    let btu = pair.b.mul_vec_transposed(&state.u.coeffs);
    let r: Vec<f64> = ms.iter().zip(&btu).map(|(a, b)| a - b).collect();
    let scale = norm2(&btu).max(norm2(&ms));
    if scale > 0.0 {
        norm2(&r) / scale
    } else {
        norm2(&r)
    }
}

/// `||u||_M^2` of a state's 1-form.
pub fn energy(pair: &MixedPair, state: &TransientState) -> f64 {
    dot(&state.u.coeffs, &pair.m_u.mul_vec(&state.u.coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_square_annulus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_source() -> SourceFn {
        Arc::new(|_, _| [0.0; 3])
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(TransientConfig::new(1e-4, 0.01, zero_source(), InitialData::Zero).unwrap().num_steps().unwrap(), 100);
        assert_eq!(TransientConfig::new(1e-3, 0.0, zero_source(), InitialData::Zero).unwrap().num_steps().unwrap(), 0);
        assert!(TransientConfig::new(3e-3, 0.01, zero_source(), InitialData::Zero).is_err());
        assert!(TransientConfig::new(0.0, 0.01, zero_source(), InitialData::Zero).is_err());
        assert!(TransientConfig::new(-1e-3, 0.01, zero_source(), InitialData::Zero).is_err());
    }

    #[test]
    fn zero_data_stays_zero_and_time_is_exact() {
        let pair = MixedPair::new(Arc::new(build_square_annulus(4).unwrap()), 1).unwrap();
        let cfg = TransientConfig::new(1e-4, 0.01, zero_source(), InitialData::Zero).unwrap();
        let st = Stepper::new(&pair, cfg).unwrap();
        let init = st.init_state(None).unwrap();
        assert!(init.u.coeffs.iter().chain(&init.sigma.coeffs).all(|&v| v == 0.0));
        let mut count = 0;
        let last = st
            .run(init, |s| {
                count += 1;
                assert!(s.u.coeffs.iter().all(|&v| v == 0.0));
                Ok(())
            })
            .unwrap();
        assert_eq!(count, 100);
        assert_eq!(last.n, 100);
        assert_eq!(last.t, 0.01);
    }

    #[test]
    fn no_steps_returns_initial_state() {
        let pair = MixedPair::new(Arc::new(build_square_annulus(4).unwrap()), 1).unwrap();
        let c: Vec<f64> = (0..pair.n_u()).map(|i| i as f64).collect();
        let cfg = TransientConfig::new(1e-2, 0.0, zero_source(), InitialData::Coefficients(c.clone())).unwrap();
        let st = Stepper::new(&pair, cfg).unwrap();
        let last = st.run(st.init_state(None).unwrap(), |_| Ok(())).unwrap();
        assert_eq!(last.n, 0);
        assert_eq!(last.u.coeffs, c);
    }

    #[test]
    fn energy_decays_from_random_data() {
        let pair = MixedPair::new(Arc::new(build_square_annulus(8).unwrap()), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c: Vec<f64> = (0..pair.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = TransientConfig::new(1e-3, 0.05, zero_source(), InitialData::Coefficients(c)).unwrap();
        let st = Stepper::new(&pair, cfg).unwrap();
        let init = st.init_state(None).unwrap();
        assert!(codifferential_residual(&pair, &init) <= 1e-10);
        let mut prev = energy(&pair, &init);
        st.run(init, |s| {
            let e = energy(&pair, s);
            assert!(e <= prev * (1.0 + 1e-13), "{e} > {prev}");
            assert!(codifferential_residual(&pair, s) <= 1e-9);
            prev = e;
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn projection_initialization_needs_harmonic_basis() {
        let pair = MixedPair::new(Arc::new(build_square_annulus(4).unwrap()), 1).unwrap();
        let zero: FieldFn = Arc::new(|_| [0.0; 3]);
        let cfg = TransientConfig::new(
            1e-2,
            0.02,
            zero_source(),
            InitialData::EllipticProjection { u: zero.clone(), lu: zero },
        )
        .unwrap();
        let st = Stepper::new(&pair, cfg).unwrap();
        assert!(matches!(st.init_state(None), Err(Error::InvalidParameter(_))));
        let h = crate::hodge::harmonic_basis(&pair, 1).unwrap();
        let init = st.init_state(Some(&h)).unwrap();
        assert!(init.u.coeffs.iter().all(|&v| v == 0.0));
    }
}
