//! Structural invariants of the discretization, runnable as one suite.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::sparse::{dot, norm2};
use crate::assembly::quadrature::quadrature;
use crate::assembly::bilinear_degree;
use crate::elements::{BasisValues, Field};
use crate::error::Result;
use crate::hodge::{
    dstar_h, elliptic_projection, harmonic_basis, hodge_decomposition, lh_form, MixedPair,
};
use crate::linsolve::factor_spd;
use crate::mesh::{build_square_annulus, build_unit_cube, build_unit_square, SimplicialMesh};
use crate::mms::{case_square2d_steady, error_norms};
use crate::stepper::{energy, InitialData, Stepper, TransientConfig};

pub const DD_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-12;
pub const ADJOINT_TOL: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-13;
pub const HARMONIC_RESIDUAL_TOL: f64 = 1e-8;
pub const DECOMPOSITION_TOL: f64 = 1e-10;
pub const PROJECTION_RESIDUAL_TOL: f64 = 1e-9;
pub const RATE_TOL: f64 = 0.2;

const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn pair(mesh: SimplicialMesh, r: usize) -> Result<MixedPair> {
    MixedPair::new(Arc::new(mesh), r)
}

/// Test meshes with their names: small annulus, square and cube.
fn small_pairs() -> Result<Vec<(String, MixedPair)>> {
    Ok(vec![
        ("annulus n=4 r=1".into(), pair(build_square_annulus(4)?, 1)?),
        ("annulus n=4 r=2".into(), pair(build_square_annulus(4)?, 2)?),
        ("square n=4 r=1".into(), pair(build_unit_square(4)?, 1)?),
        ("square n=4 r=2".into(), pair(build_unit_square(4)?, 2)?),
        ("cube n=2 r=1".into(), pair(build_unit_cube(2)?, 1)?),
    ])
}

/// Largest `|curl d tau_j|` over cells, quadrature points and 0-form basis
/// functions, relative to the largest 1-form basis curl on the cell.
pub fn dd_residual(pair: &MixedPair) -> Result<f64> {
    let mesh = pair.mesh();
    let (s, u) = (&pair.sigma_space, &pair.u_space);
    let rule = quadrature(mesh.dim(), bilinear_degree(u).max(1))?;
    let mut vals = BasisValues::with_len(u.local_dim());
    let mut worst = 0.0f64;
    for c in 0..mesh.num_cells() {
        let g = mesh.cell_geometry(c);
        let (udofs, sdofs) = (u.cell_dofs(c), s.cell_dofs(c));
        for p in &rule.points {
            u.eval_into(&g, u.cell_signs(c), p, &mut vals);
            let scale = vals.derivatives.iter().map(|d| norm2(d)).fold(0.0, f64::max);
            for &gj in sdofs {
                let mut curl = [0.0; 3];
                for (i, &gi) in udofs.iter().enumerate() {
                    let a = pair.d.get(gi, gj);
                    for k in 0..3 {
                        curl[k] += a * vals.derivatives[i][k];
                    }
                }
                worst = worst.max(norm2(&curl) / scale);
            }
        }
    }
    Ok(worst)
}

/// `(min x^T K x / (max|K| |x|^2)` over random `x`, `max|K D| / (max|K| max|D|)`).
pub fn stiffness_psd_measures(pair: &MixedPair, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let kmax = pair.k.max_abs();
    let mut min_q = f64::INFINITY;
    for _ in 0..20 {
        let x = random_vec(rng, pair.n_u());
        min_q = min_q.min(pair.k.bilinear(&x, &x) / (kmax * dot(&x, &x)));
    }
    let kd = pair.k.matmul(&pair.d).map(|m| m.max_abs()).unwrap_or(f64::INFINITY);
    (min_q, kd / (kmax * pair.d.max_abs()))
}

/// `|<d*_h v, tau> - <v, d tau>|` relative to `||v|| ||d tau||`, worst over random pairs.
pub fn adjointness_defect(pair: &MixedPair, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let v = Field::from_coeffs(&pair.u_space, random_vec(rng, pair.n_u()))?;
        let tau = random_vec(rng, pair.n_sigma());
        let s = dstar_h(pair, &v)?;
        let lhs = pair.m_sigma.bilinear(&s.coeffs, &tau);
        let dtau = pair.d.mul_vec(&tau);
        let rhs = pair.m_u.bilinear(&v.coeffs, &dtau);
        let scale = pair.norm_u(&v.coeffs) * pair.norm_u(&dtau);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

/// Largest relative energy increase over `steps` unforced backward-Euler
/// steps from random data (nonpositive when the energy never grows).
pub fn energy_growth(pair: &MixedPair, dt: f64, steps: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let u0 = random_vec(rng, pair.n_u());
    let config = TransientConfig::new(
        dt,
        dt * steps as f64,
        Arc::new(|_, _| [0.0; 3]),
        InitialData::Coefficients(u0),
    )?;
    let stepper = Stepper::new(pair, config)?;
    let init = stepper.init_state(None)?;
    let mut prev = energy(pair, &init);
    let mut worst = f64::NEG_INFINITY;
    stepper.run(init, |s| {
        let e = energy(pair, s);
        worst = worst.max((e - prev) / prev);
        prev = e;
        Ok(())
    })?;
    Ok(worst)
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> PropertyResult {
    match f() {
        Ok((passed, detail)) => PropertyResult { name, passed, detail },
        Err(e) => PropertyResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn prop_dd_zero(pairs: &[(String, MixedPair)]) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (_, p) in pairs {
        worst = worst.max(dd_residual(p)?);
    }
    Ok((worst <= DD_TOL, format!("max relative curl of d tau = {worst:.3e} (tol {DD_TOL:e})")))
}

fn prop_spd(pairs: &[(String, MixedPair)], rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    let (mut min_q, mut kd) = (f64::INFINITY, 0.0f64);
    for (name, p) in pairs {
        if factor_spd(&p.m_sigma).is_err() || factor_spd(&p.m_u).is_err() {
            ok = false;
            notes.push(format!("{name}: mass Cholesky failed"));
        }
        let (q, k) = stiffness_psd_measures(p, rng);
        min_q = min_q.min(q);
        kd = kd.max(k);
    }
    ok &= min_q >= -KERNEL_TOL && kd <= KERNEL_TOL;
    notes.push(format!("min Rayleigh quotient of K {min_q:.3e}, max|K D| {kd:.3e} (tol {KERNEL_TOL:e})"));
    Ok((ok, notes.join("; ")))
}

fn prop_adjoint(pairs: &[(String, MixedPair)], rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (_, p) in pairs {
        worst = worst.max(adjointness_defect(p, rng)?);
    }
    Ok((worst <= ADJOINT_TOL, format!("max defect {worst:.3e} (tol {ADJOINT_TOL:e})")))
}

fn prop_energy(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let p = pair(build_square_annulus(8)?, 1)?;
    let g = energy_growth(&p, 1e-3, 50, rng)?;
    Ok((g <= ENERGY_TOL, format!("max relative step growth {g:.3e} over 50 steps (tol {ENERGY_TOL:e})")))
}

fn prop_harmonic(pairs: &[(String, MixedPair)]) -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    let extra = pair(build_unit_cube(4)?, 1)?;
    let all = pairs.iter().map(|(n, p)| (n.as_str(), p)).chain(std::iter::once(("cube n=4 r=1", &extra)));
    for (name, p) in all {
        // b1 of the domain: the annulus has one hole
        let topo = usize::from(name.starts_with("annulus"));
        let betti = p.mesh().betti_numbers()[1];
        let hb = harmonic_basis(p, betti)?;
        let res = hb.residuals.iter().map(|&(a, b)| a.max(b)).fold(0.0, f64::max);
        let good = betti == topo && hb.dim() == topo && res <= HARMONIC_RESIDUAL_TOL;
        ok &= good;
        notes.push(format!("{name}: dim {} b1 {betti} residual {res:.1e}", hb.dim()));
    }
    Ok((ok, notes.join("; ")))
}

fn prop_decomposition(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    // reassembly, pairwise orthogonality, K exact, d*_h coexact, L_h symmetry
    let mut worst = [0.0f64; 5];
    for r in [1, 2] {
        let p = pair(build_square_annulus(4)?, r)?;
        let hb = harmonic_basis(&p, 1)?;
        let v = random_vec(rng, p.n_u());
        let w = random_vec(rng, p.n_u());
        let dec = hodge_decomposition(&p, &hb, &v)?;
        let sum: Vec<f64> = (0..v.len()).map(|i| v[i] - dec.exact[i] - dec.harmonic[i] - dec.coexact[i]).collect();
        let nv = p.norm_u(&v);
        worst[0] = worst[0].max(p.norm_u(&sum) / nv);
        let parts = [&dec.exact, &dec.harmonic, &dec.coexact];
        for i in 0..3 {
            for j in i + 1..3 {
                worst[1] = worst[1].max(p.m_u.bilinear(parts[i], parts[j]).abs() / (nv * nv));
            }
        }
        // |K e| rather than sqrt(e^T K e), which has a cancellation floor near sqrt(eps)
        worst[2] = worst[2].max(norm2(&p.k.mul_vec(&dec.exact)) / (p.k.max_abs() * norm2(&dec.exact)));
        let z = Field::from_coeffs(&p.u_space, dec.coexact.clone())?;
        let dz = dstar_h(&p, &z)?;
        worst[3] = worst[3].max(p.m_sigma.bilinear(&dz.coeffs, &dz.coeffs).max(0.0).sqrt() / nv);
        let (a, b) = (lh_form(&p, &v, &w)?, lh_form(&p, &w, &v)?);
        let scale = (lh_form(&p, &v, &v)? * lh_form(&p, &w, &w)?).sqrt();
        worst[4] = worst[4].max((a - b).abs() / scale);
    }
    let ok = worst.iter().all(|&x| x <= DECOMPOSITION_TOL);
    Ok((
        ok,
        format!(
            "reassembly {:.1e}, orthogonality {:.1e}, |K exact| {:.1e}, |d* coexact| {:.1e}, L_h symmetry {:.1e} (tol {DECOMPOSITION_TOL:e})",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    ))
}

/// `log2` ratios of consecutive `||u - u_hat||` on the square at n = 4, 8, 16,
/// and the largest block residual of the projection systems.
pub fn square_projection_rates(r: usize) -> Result<(Vec<f64>, f64)> {
    let case = case_square2d_steady();
    let mut errs = Vec::new();
    let mut worst = 0.0f64;
    for n in [4, 8, 16] {
        let p = pair(build_unit_square(n)?, r)?;
        let hb = harmonic_basis(&p, 0)?;
        let ep = elliptic_projection(&p, &hb, &|x| (case.exact_u)(x, 0.0), &|x| {
            (case.hodge_laplacian_u)(x, 0.0)
        })?;
        worst = ep.residuals.iter().fold(worst, |m, &v| m.max(v));
        errs.push(error_norms(&ep.sigma, &ep.u, &case, 0.0)?.u);
    }
    Ok((errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect(), worst))
}

fn prop_projection() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    let annulus = pair(build_square_annulus(4)?, 1)?;
    let hb = harmonic_basis(&annulus, 1)?;
    let ep = elliptic_projection(&annulus, &hb, &|x| [x[1], -x[0], 0.0], &|_| [0.0; 3])?;
    let mut worst = ep.residuals.iter().fold(0.0f64, |m, &v| m.max(v));
    for r in [1, 2] {
        let (rates, res) = square_projection_rates(r)?;
        worst = worst.max(res);
        let good = rates.iter().all(|&q| (q - r as f64).abs() <= RATE_TOL);
        ok &= good;
        notes.push(format!("r={r} rates {:?}", rates.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>()));
    }
    ok &= worst <= PROJECTION_RESIDUAL_TOL;
    notes.push(format!("max residual {worst:.1e} (tol {PROJECTION_RESIDUAL_TOL:e})"));
    Ok((ok, notes.join("; ")))
}

/// Runs every property; never panics, failures are reported per property.
pub fn run_property_suite() -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let pairs = match small_pairs() {
        Ok(p) => p,
        Err(e) => {
            return vec![PropertyResult {
                name: "setup",
                passed: false,
                detail: format!("error: {e}"),
            }]
        }
    };
    vec![
        check("d_d_zero", || prop_dd_zero(&pairs)),
        check("mass_spd_stiffness_psd", || prop_spd(&pairs, &mut rng)),
        check("codifferential_adjoint", || prop_adjoint(&pairs, &mut rng)),
        check("energy_decay", || prop_energy(&mut rng)),
        check("harmonic_dimensions", || prop_harmonic(&pairs)),
        check("hodge_decomposition", || prop_decomposition(&mut rng)),
        check("elliptic_projection", prop_projection),
    ]
}
