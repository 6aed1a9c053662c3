//! Manufactured solutions, error norms, and convergence studies.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::load_degree;
use crate::assembly::quadrature::quadrature;
use crate::elements::{BasisValues, Field};
use crate::error::{Error, Result};
use crate::geometry::{dot, sub, Vec3};
use crate::hodge::{expected_harmonic_dim, harmonic_basis, MixedPair};
use crate::mesh::{Generator, MeshFamily};
use crate::stepper::{FieldFn, InitialData, SourceFn, Stepper, TransientConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseName {
    Annulus2d,
    Cube3d,
    Square2dSteady,
}

impl CaseName {
    pub const ALL: [CaseName; 3] = [CaseName::Annulus2d, CaseName::Cube3d, CaseName::Square2dSteady];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Annulus2d => "annulus2d",
            Self::Cube3d => "cube3d",
            Self::Square2dSteady => "square2d_steady",
        }
    }
}

impl std::str::FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown case '{s}'")))
    }
}

impl std::fmt::Display for CaseName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An exact solution of `u_t + L u = f` with natural boundary conditions.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub name: CaseName,
    pub dim: usize,
    pub generator: Generator,
    /// Cells per axis of the level-0 mesh.
    pub base_resolution: usize,
    pub exact_u: fn(&Vec3, f64) -> Vec3,
    /// `sigma = -div u`
    pub exact_sigma: fn(&Vec3, f64) -> f64,
    pub grad_sigma: fn(&Vec3, f64) -> Vec3,
    /// `L u = curl rot u - grad div u` (2D) or `curl curl u - grad div u` (3D).
    pub hodge_laplacian_u: fn(&Vec3, f64) -> Vec3,
    pub source_f: fn(&Vec3, f64) -> Vec3,
}

impl ManufacturedCase {
    pub fn by_name(name: CaseName) -> Self {
        match name {
            CaseName::Annulus2d => case_annulus2d(),
            CaseName::Cube3d => case_cube3d(),
            CaseName::Square2dSteady => case_square2d_steady(),
        }
    }

    pub fn family(&self) -> MeshFamily {
        MeshFamily::builtin(self.generator, self.base_resolution)
    }

    pub fn with_base_resolution(mut self, n: usize) -> Self {
        self.base_resolution = n;
        self
    }
}

// q(s) = s(s-1)(s-1/4)(s-3/4) = w(w + 3/16) with w = s^2 - s
fn q(s: f64) -> f64 {
    let w = s * s - s;
    w * (w + 0.1875)
}

fn dq(s: f64) -> f64 {
    let w = s * s - s;
    (2.0 * w + 0.1875) * (2.0 * s - 1.0)
}

fn d2q(s: f64) -> f64 {
    let w = s * s - s;
    2.0 * (2.0 * s - 1.0).powi(2) + 4.0 * w + 0.375
}

/// `u = 100 t (q(x), q(y))` on the square annulus; `rot u = 0`.
pub fn case_annulus2d() -> ManufacturedCase {
    ManufacturedCase {
        name: CaseName::Annulus2d,
        dim: 2,
        generator: Generator::SquareAnnulus,
        base_resolution: 4,
        exact_u: |x, t| [100.0 * t * q(x[0]), 100.0 * t * q(x[1]), 0.0],
        exact_sigma: |x, t| -100.0 * t * (dq(x[0]) + dq(x[1])),
        grad_sigma: |x, t| [-100.0 * t * d2q(x[0]), -100.0 * t * d2q(x[1]), 0.0],
        hodge_laplacian_u: |x, t| [-100.0 * t * d2q(x[0]), -100.0 * t * d2q(x[1]), 0.0],
        source_f: |x, t| {
            [
                100.0 * q(x[0]) - 100.0 * t * d2q(x[0]),
                100.0 * q(x[1]) - 100.0 * t * d2q(x[1]),
                0.0,
            ]
        },
    }
}

fn sines(x: &Vec3) -> Vec3 {
    [(PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin()]
}

/// `u = t (sin pi x_1, sin pi x_2, sin pi x_3)` on the unit cube; `curl u = 0`.
pub fn case_cube3d() -> ManufacturedCase {
    ManufacturedCase {
        name: CaseName::Cube3d,
        dim: 3,
        generator: Generator::UnitCube,
        base_resolution: 4,
        exact_u: |x, t| {
            let s = sines(x);
            [t * s[0], t * s[1], t * s[2]]
        },
        exact_sigma: |x, t| -PI * t * ((PI * x[0]).cos() + (PI * x[1]).cos() + (PI * x[2]).cos()),
        grad_sigma: |x, t| {
            let s = sines(x);
            let c = PI * PI * t;
            [c * s[0], c * s[1], c * s[2]]
        },
        hodge_laplacian_u: |x, t| {
            let s = sines(x);
            let c = PI * PI * t;
            [c * s[0], c * s[1], c * s[2]]
        },
        source_f: |x, t| {
            let s = sines(x);
            let c = 1.0 + PI * PI * t;
            [c * s[0], c * s[1], c * s[2]]
        },
    }
}

/// Steady `u = (sin pi x_1, sin pi x_2)` on the unit square with `L u = pi^2 u`.
pub fn case_square2d_steady() -> ManufacturedCase {
    ManufacturedCase {
        name: CaseName::Square2dSteady,
        dim: 2,
        generator: Generator::UnitSquare,
        base_resolution: 4,
        exact_u: |x, _| [(PI * x[0]).sin(), (PI * x[1]).sin(), 0.0],
        exact_sigma: |x, _| -PI * ((PI * x[0]).cos() + (PI * x[1]).cos()),
        grad_sigma: |x, _| [PI * PI * (PI * x[0]).sin(), PI * PI * (PI * x[1]).sin(), 0.0],
        hodge_laplacian_u: |x, _| [PI * PI * (PI * x[0]).sin(), PI * PI * (PI * x[1]).sin(), 0.0],
        source_f: |x, _| [PI * PI * (PI * x[0]).sin(), PI * PI * (PI * x[1]).sin(), 0.0],
    }
}

/// `(||sigma - sigma_h||, ||grad(sigma - sigma_h)||, ||u - u_h||)` in L2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub sigma: f64,
    pub dsigma: f64,
    pub u: f64,
}

pub fn error_norms(sigma: &Field, u: &Field, case: &ManufacturedCase, t: f64) -> Result<ErrorNorms> {
    if !sigma.space.same_mesh(&u.space) {
        return Err(Error::MeshMismatch);
    }
    let mesh = sigma.space.mesh();
    let degree = load_degree(&sigma.space).max(load_degree(&u.space));
    let rule = quadrature(mesh.dim(), degree)?;
    let mut sb = BasisValues::with_len(sigma.space.local_dim());
    let mut ub = BasisValues::with_len(u.space.local_dim());
    let mut acc = [0.0; 3];
    for c in 0..mesh.num_cells() {
        let g = mesh.cell_geometry(c);
        let mut cell = [0.0; 3];
        for (p, w) in rule.normalized() {
            let x = g.point(p);
            let (sv, sd) = sigma.eval(c, &g, p, &mut sb);
            let (uv, _) = u.eval(c, &g, p, &mut ub);
            let es = sv[0] - (case.exact_sigma)(&x, t);
            let ed = sub(&sd, &(case.grad_sigma)(&x, t));
            let eu = sub(&uv, &(case.exact_u)(&x, t));
            cell[0] += w * es * es;
            cell[1] += w * dot(&ed, &ed);
            cell[2] += w * dot(&eu, &eu);
        }
        for k in 0..3 {
            acc[k] += cell[k] * g.volume;
        }
    }
    Ok(ErrorNorms {
        sigma: acc[0].max(0.0).sqrt(),
        dsigma: acc[1].max(0.0).sqrt(),
        u: acc[2].max(0.0).sqrt(),
    })
}

/// `log2(e_prev / e)` per norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub sigma: f64,
    pub dsigma: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub errors: ErrorNorms,
    /// Empty for the first level.
    pub rates: Option<Rates>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: CaseName,
    pub r: usize,
    pub dt: f64,
    pub t_final: f64,
    pub base_resolution: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Builds rows with rates from consecutive `(level, h, errors)` entries.
    pub fn from_errors(
        case: CaseName,
        r: usize,
        dt: f64,
        t_final: f64,
        base_resolution: usize,
        entries: Vec<(usize, f64, ErrorNorms)>,
    ) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(entries.len());
        for (level, h, errors) in entries {
            let rates = rows.last().map(|prev| Rates {
                sigma: (prev.errors.sigma / errors.sigma).log2(),
                dsigma: (prev.errors.dsigma / errors.dsigma).log2(),
                u: (prev.errors.u / errors.u).log2(),
            });
            rows.push(ConvergenceRow { level, h, errors, rates });
        }
        Self {
            case,
            r,
            dt,
            t_final,
            base_resolution,
            rows,
        }
    }

    /// Rates between rows `i - 1` and `i`.
    pub fn rates_at(&self, i: usize) -> Option<Rates> {
        self.rows.get(i).and_then(|r| r.rates)
    }

    pub fn final_rates(&self) -> Option<Rates> {
        self.rows.last().and_then(|r| r.rates)
    }
}

/// Choice of `u_h^0` in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitKind {
    Zero,
    /// Elliptic projection of the exact `u(., 0)`.
    #[default]
    EllipticProjection,
}

/// Outcome of one transient solve on one mesh level.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub level: usize,
    pub h: f64,
    pub steps: usize,
    pub n_sigma: usize,
    pub n_u: usize,
    pub harmonic_dim: Option<usize>,
    pub errors: ErrorNorms,
    /// Largest relative residual of the codifferential equation over all steps.
    pub max_codifferential_residual: f64,
    pub sigma: Field,
    pub u: Field,
}

/// Solves the case on `level` of its mesh family up to `t_final` and
/// measures the final-time errors.
pub fn run_level(
    case: &ManufacturedCase,
    r: usize,
    level: usize,
    dt: f64,
    t_final: f64,
    init: InitKind,
) -> Result<LevelRun> {
    let family = case.family();
    let mesh = Arc::new(family.mesh(level)?);
    let h = family.mesh_size(level)?;
    let pair = MixedPair::new(mesh.clone(), r)?;
    let f = case.source_f;
    let source: SourceFn = Arc::new(move |x, t| f(x, t));
    let (u0, harmonic) = match init {
        InitKind::Zero => (InitialData::Zero, None),
        InitKind::EllipticProjection => {
            let (u, lu) = (case.exact_u, case.hodge_laplacian_u);
            let u: FieldFn = Arc::new(move |x| u(x, 0.0));
            let lu: FieldFn = Arc::new(move |x| lu(x, 0.0));
            let hb = harmonic_basis(&pair, expected_harmonic_dim(&mesh))?;
            (InitialData::EllipticProjection { u, lu }, Some(hb))
        }
    };
    let config = TransientConfig::new(dt, t_final, source, u0)?;
    let stepper = Stepper::new(&pair, config)?;
    let state0 = stepper.init_state(harmonic.as_ref())?;
    let mut worst = crate::stepper::codifferential_residual(&pair, &state0);
    let last = stepper.run(state0, |s| {
        worst = worst.max(crate::stepper::codifferential_residual(&pair, s));
        Ok(())
    })?;
    let errors = error_norms(&last.sigma, &last.u, case, last.t)?;
    Ok(LevelRun {
        level,
        h,
        steps: stepper.num_steps(),
        n_sigma: pair.n_sigma(),
        n_u: pair.n_u(),
        harmonic_dim: harmonic.as_ref().map(|hb| hb.dim()),
        errors,
        max_codifferential_residual: worst,
        sigma: last.sigma,
        u: last.u,
    })
}

/// Runs levels `0..levels` (concurrently) and tabulates final-time errors and rates.
pub fn convergence_study(
    case: &ManufacturedCase,
    r: usize,
    levels: usize,
    dt: f64,
    t_final: f64,
    init: InitKind,
) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!("a study needs at least 2 levels, got {levels}")));
    }
    let results: Vec<Result<LevelRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..levels)
            .map(|level| scope.spawn(move || run_level(case, r, level, dt, t_final, init)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Solver("level worker panicked".into()))))
            .collect()
    });
    let mut entries = Vec::with_capacity(levels);
    for res in results {
        let run = res?;
        entries.push((run.level, run.h, run.errors));
    }
    Ok(ConvergenceTable::from_errors(
        case.name,
        r,
        dt,
        t_final,
        case.base_resolution,
        entries,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::canonical_interpolate;
    use crate::elements::interpolate_scalar;
    use crate::mesh::build_unit_cube;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central-difference oracle for `u_t + curl curl u - grad div u` with
    /// `curl curl u - grad div u = -Laplacian u` componentwise.
    fn fd_residual(case: &ManufacturedCase, x: &Vec3, t: f64) -> Vec3 {
        let h = 1e-4;
        let u = case.exact_u;
        let ut = {
            let a = u(x, t + h);
            let b = u(x, t - h);
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h), (a[2] - b[2]) / (2.0 * h)]
        };
        let u0 = u(x, t);
        let mut lap = [0.0; 3];
        for k in 0..case.dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let (a, b) = (u(&xp, t), u(&xm, t));
            for c in 0..3 {
                lap[c] += (a[c] - 2.0 * u0[c] + b[c]) / (h * h);
            }
        }
        let f = (case.source_f)(x, t);
        [ut[0] - lap[0] - f[0], ut[1] - lap[1] - f[1], ut[2] - lap[2] - f[2]]
    }

    #[test]
    fn sources_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in CaseName::ALL.map(ManufacturedCase::by_name) {
            for _ in 0..20 {
                let mut x = [0.0; 3];
                for c in x.iter_mut().take(case.dim) {
                    *c = rng.random_range(0.0..1.0);
                }
                let t = rng.random_range(0.0..1.0);
                let r = fd_residual(&case, &x, t);
                let f = (case.source_f)(&x, t);
                let scale = 1.0 + f.iter().map(|v| v.abs()).fold(0.0, f64::max);
                for v in r {
                    assert!(v.abs() <= 1e-6 * scale, "{} at {x:?}, t={t}: {v}", case.name);
                }
            }
        }
    }

    #[test]
    fn sigma_is_minus_divergence() {
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for case in CaseName::ALL.map(ManufacturedCase::by_name) {
            for _ in 0..10 {
                let x = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), if case.dim == 3 { 0.4 } else { 0.0 }];
                let t = 0.3;
                let mut div = 0.0;
                for k in 0..case.dim {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    div += ((case.exact_u)(&xp, t)[k] - (case.exact_u)(&xm, t)[k]) / (2.0 * h);
                }
                assert!(((case.exact_sigma)(&x, t) + div).abs() < 1e-6);
                let mut g = [0.0; 3];
                for k in 0..case.dim {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    g[k] = ((case.exact_sigma)(&xp, t) - (case.exact_sigma)(&xm, t)) / (2.0 * h);
                }
                let gs = (case.grad_sigma)(&x, t);
                for k in 0..3 {
                    assert!((g[k] - gs[k]).abs() < 1e-5 * (1.0 + gs[k].abs()));
                }
            }
        }
    }

    #[test]
    fn boundary_conditions_hold() {
        let a = case_annulus2d();
        assert_eq!((a.exact_u)(&[0.3, 0.7, 0.0], 0.0), [0.0; 3]);
        for y in [0.3, 0.5, 0.7] {
            assert!((a.exact_u)(&[0.25, y, 0.0], 0.5)[0].abs() < 1e-15);
            assert!((a.exact_u)(&[0.75, y, 0.0], 0.5)[0].abs() < 1e-15);
        }
        let c = case_cube3d();
        assert!((c.exact_u)(&[1.0, 0.3, 0.2], 0.4)[0].abs() < 1e-15);
    }

    #[test]
    fn cube_sigma_norm() {
        let mesh = Arc::new(build_unit_cube(8).unwrap());
        let pair = MixedPair::new(mesh, 1).unwrap();
        let case = case_cube3d();
        let t = 0.01;
        let zero_s = Field::zeros(&pair.sigma_space);
        let zero_u = Field::zeros(&pair.u_space);
        let e = error_norms(&zero_s, &zero_u, &case, t).unwrap();
        let exact = PI * t * 1.5f64.sqrt();
        assert!((e.sigma - exact).abs() < 1e-8, "{} vs {exact}", e.sigma);
        let zero = ManufacturedCase {
            exact_u: |_, _| [0.0; 3],
            exact_sigma: |_, _| 0.0,
            grad_sigma: |_, _| [0.0; 3],
            ..case
        };
        assert_eq!(error_norms(&zero_s, &zero_u, &zero, t).unwrap(), ErrorNorms { sigma: 0.0, dsigma: 0.0, u: 0.0 });
        let s = interpolate_scalar(&pair.sigma_space, |x| (case.exact_sigma)(x, t));
        let u = canonical_interpolate(&pair.u_space, &|x| (case.exact_u)(x, t));
        let e = error_norms(&s, &u, &case, t).unwrap();
        assert!(e.sigma > 0.0 && e.sigma < 0.05 * exact);
    }

    #[test]
    fn table_rates() {
        let e = |s: f64| ErrorNorms { sigma: s, dsigma: 2.0 * s, u: s * s };
        let t = ConvergenceTable::from_errors(CaseName::Cube3d, 1, 1e-4, 0.01, 4, vec![(0, 0.25, e(1.0)), (1, 0.125, e(0.25))]);
        assert!(t.rows[0].rates.is_none());
        let r = t.final_rates().unwrap();
        assert_eq!((r.sigma, r.dsigma, r.u), (2.0, 2.0, 4.0));
    }

    #[test]
    fn small_study_converges() {
        let case = case_annulus2d();
        let table = convergence_study(&case, 1, 3, 1e-3, 0.01, InitKind::EllipticProjection).unwrap();
        for w in table.rows.windows(2) {
            assert!(w[1].errors.sigma < w[0].errors.sigma);
            assert!(w[1].errors.u < w[0].errors.u);
        }
        assert!(convergence_study(&case, 1, 1, 1e-3, 0.01, InitKind::Zero).is_err());
    }
}
