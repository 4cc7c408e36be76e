//! Thermo-elastic neo-Hookean material with SIMP/ersatz interpolation.
//!
//! Plane strain is handled by embedding the in-plane deformation gradient in
//! a 3x3 tensor with `F33 = 1`. The stress is linear in the interpolated
//! coefficients `(K, Kα, G)` at fixed kinematics and the flux is linear in
//! `κ`, so design derivatives reuse the same kernels with the coefficient
//! derivatives substituted.

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseMaterial {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Thermal conductivity (W/mK).
    pub conductivity: f64,
    /// Thermal expansion coefficient (1/K).
    pub expansion: f64,
    /// Reference temperature (°C).
    pub reference_temperature: f64,
}

impl Default for BaseMaterial {
    fn default() -> Self {
        Self {
            youngs_modulus: 1.0e6,
            poisson_ratio: 0.4,
            conductivity: 10.0,
            expansion: 1.0e-4,
            reference_temperature: 20.0,
        }
    }
}

impl BaseMaterial {
    pub fn bulk_modulus(&self) -> f64 {
        self.youngs_modulus / (3.0 * (1.0 - 2.0 * self.poisson_ratio))
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::invalid("Young's modulus must be positive"));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::invalid("Poisson's ratio must lie in [0, 0.5)"));
        }
        if !(self.conductivity > 0.0) {
            return Err(Error::invalid("conductivity must be positive"));
        }
        if !self.expansion.is_finite() || !self.reference_temperature.is_finite() {
            return Err(Error::invalid("expansion and reference temperature must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErsatzScaling {
    pub delta_e: f64,
    pub delta_kappa: f64,
    /// SIMP exponent.
    pub penalty: f64,
    /// Dimensionless regularization weight; `k_r = kr_bar * h_char^2 * K_o`.
    pub kr_bar: f64,
    /// Characteristic domain height (m).
    pub h_char: f64,
}

impl Default for ErsatzScaling {
    fn default() -> Self {
        Self {
            delta_e: 1.0e-6,
            delta_kappa: 1.0e-3,
            penalty: 3.0,
            kr_bar: 1.0e-6,
            h_char: 1.0,
        }
    }
}

impl ErsatzScaling {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_e > 0.0 && self.delta_e <= 1.0) {
            return Err(Error::invalid("delta_e must lie in (0, 1]"));
        }
        if !(self.delta_kappa > 0.0 && self.delta_kappa <= 1.0) {
            return Err(Error::invalid("delta_kappa must lie in (0, 1]"));
        }
        if !(self.penalty >= 0.0) {
            return Err(Error::invalid("SIMP exponent must be non-negative"));
        }
        if !(self.kr_bar >= 0.0 && self.h_char > 0.0) {
            return Err(Error::invalid("regularization weight and height must be non-negative/positive"));
        }
        Ok(())
    }

    pub fn regularization_stiffness(&self, base: &BaseMaterial) -> f64 {
        self.kr_bar * self.h_char * self.h_char * base.bulk_modulus()
    }
}

/// Interpolated coefficients at one point (or their density derivatives).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaterialPoint {
    pub bulk: f64,
    pub shear: f64,
    pub conductivity: f64,
    /// Coupling coefficient `Kα` (Pa/K).
    pub k_alpha: f64,
    pub kr: f64,
}

/// Returns the interpolated coefficients and their derivative w.r.t. `rho`.
pub fn interpolate(
    rho: f64,
    base: &BaseMaterial,
    ersatz: &ErsatzScaling,
) -> Result<(MaterialPoint, MaterialPoint)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("projected density {rho} outside [0, 1]")));
    }
    let p = ersatz.penalty;
    let rp = rho.powf(p);
    let drp = if p == 0.0 {
        0.0
    } else if rho == 0.0 {
        if p < 1.0 {
            f64::INFINITY
        } else if p == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        p * rho.powf(p - 1.0)
    };
    let (k0, g0, c0) = (base.bulk_modulus(), base.shear_modulus(), base.conductivity);
    let fe = ersatz.delta_e + (1.0 - ersatz.delta_e) * rp;
    let dfe = (1.0 - ersatz.delta_e) * drp;
    let fk = ersatz.delta_kappa + (1.0 - ersatz.delta_kappa) * rp;
    let dfk = (1.0 - ersatz.delta_kappa) * drp;
    let bulk = fe * k0;
    let value = MaterialPoint {
        bulk,
        shear: fe * g0,
        conductivity: fk * c0,
        k_alpha: rp * bulk * base.expansion,
        kr: ersatz.regularization_stiffness(base),
    };
    let deriv = MaterialPoint {
        bulk: dfe * k0,
        shear: dfe * g0,
        conductivity: dfk * c0,
        k_alpha: (drp * bulk + rp * dfe * k0) * base.expansion,
        kr: 0.0,
    };
    Ok((value, deriv))
}

/// Embeds the in-plane displacement gradient as a plane-strain `F`.
pub fn deformation_gradient(grad_u: &Matrix2<f64>) -> Matrix3<f64> {
    Matrix3::new(
        1.0 + grad_u[(0, 0)],
        grad_u[(0, 1)],
        0.0,
        grad_u[(1, 0)],
        1.0 + grad_u[(1, 1)],
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

fn inverse_transpose(f: &Matrix3<f64>, j: f64) -> Result<Matrix3<f64>> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvertedElement {
            element: usize::MAX,
            point: usize::MAX,
            jacobian: j,
        });
    }
    f.try_inverse()
        .map(|inv| inv.transpose())
        .ok_or(Error::InvertedElement {
            element: usize::MAX,
            point: usize::MAX,
            jacobian: j,
        })
}

/// Strain energy density; `dtheta = θ − θ_o`.
pub fn strain_energy(f: &Matrix3<f64>, dtheta: f64, mp: &MaterialPoint) -> Result<f64> {
    let j = f.determinant();
    inverse_transpose(f, j)?;
    let ln_j = j.ln();
    let alpha = mp.k_alpha / mp.bulk;
    let vol = 0.5 * mp.bulk * (ln_j * ln_j - 6.0 * alpha * dtheta * ln_j + 9.0 * alpha * alpha * dtheta * dtheta);
    let iso = 0.5 * mp.shear * (j.powf(-2.0 / 3.0) * f.norm_squared() - 3.0);
    Ok(vol + iso)
}

/// First Piola-Kirchhoff stress.
pub fn pk1_stress(f: &Matrix3<f64>, dtheta: f64, mp: &MaterialPoint) -> Result<Matrix3<f64>> {
    let j = f.determinant();
    let h = inverse_transpose(f, j)?;
    let i1 = f.norm_squared();
    let s = mp.bulk * j.ln() - 3.0 * mp.k_alpha * dtheta;
    Ok(h * s + (f - h * (i1 / 3.0)) * (mp.shear * j.powf(-2.0 / 3.0)))
}

/// Full 3x3x3x3 tangent `∂P_iJ/∂F_kL`, stored at `[((i*3+J)*3+k)*3+L]`.
#[derive(Debug, Clone)]
pub struct Tangents {
    pub dp_df: [f64; 81],
    /// `∂P/∂θ`.
    pub dp_dtheta: Matrix3<f64>,
}

impl Tangents {
    #[inline]
    pub fn a(&self, i: usize, jj: usize, k: usize, l: usize) -> f64 {
        self.dp_df[((i * 3 + jj) * 3 + k) * 3 + l]
    }
}

pub fn material_tangents(f: &Matrix3<f64>, dtheta: f64, mp: &MaterialPoint) -> Result<Tangents> {
    let j = f.determinant();
    let h = inverse_transpose(f, j)?;
    let i1 = f.norm_squared();
    let s = mp.bulk * j.ln() - 3.0 * mp.k_alpha * dtheta;
    let gj = mp.shear * j.powf(-2.0 / 3.0);
    let mut dp_df = [0.0; 81];
    for i in 0..3 {
        for jj in 0..3 {
            let dev_ij = f[(i, jj)] - i1 / 3.0 * h[(i, jj)];
            for k in 0..3 {
                for l in 0..3 {
                    let cross = h[(i, l)] * h[(k, jj)];
                    let vol = mp.bulk * h[(k, l)] * h[(i, jj)] - s * cross;
                    let delta = if i == k && jj == l { 1.0 } else { 0.0 };
                    let iso = gj
                        * (-2.0 / 3.0 * h[(k, l)] * dev_ij + delta - 2.0 / 3.0 * f[(k, l)] * h[(i, jj)]
                            + i1 / 3.0 * cross);
                    dp_df[((i * 3 + jj) * 3 + k) * 3 + l] = vol + iso;
                }
            }
        }
    }
    Ok(Tangents {
        dp_df,
        dp_dtheta: h * (-3.0 * mp.k_alpha),
    })
}

/// Referential heat flux with its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct HeatFlux {
    pub q: Vector2<f64>,
    /// `∂q/∂∇θ`.
    pub dq_dgrad: Matrix2<f64>,
    /// `∂q_I/∂F_kL` stored as `dq_df[I][k][L]` for in-plane indices.
    pub dq_df: [[[f64; 2]; 2]; 2],
}

/// `q = −κ J F⁻¹F⁻ᵀ ∇θ`, restricted to the in-plane block (`F33 = 1`).
pub fn heat_flux(f: &Matrix3<f64>, grad_theta: &Vector2<f64>, mp: &MaterialPoint) -> Result<HeatFlux> {
    let f2 = f.fixed_view::<2, 2>(0, 0).into_owned();
    let j = f2.determinant();
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvertedElement {
            element: usize::MAX,
            point: usize::MAX,
            jacobian: j,
        });
    }
    let finv = f2.try_inverse().ok_or(Error::InvertedElement {
        element: usize::MAX,
        point: usize::MAX,
        jacobian: j,
    })?;
    let h = finv.transpose();
    let cinv = finv * h;
    let w = h * grad_theta;
    let v = cinv * grad_theta;
    let kj = mp.conductivity * j;
    let q = -kj * v;
    let mut dq_df = [[[0.0; 2]; 2]; 2];
    for (ii, row) in dq_df.iter_mut().enumerate() {
        for (k, col) in row.iter_mut().enumerate() {
            for (l, d) in col.iter_mut().enumerate() {
                *d = -kj * (h[(k, l)] * v[ii] - finv[(ii, k)] * v[l] - cinv[(ii, l)] * w[k]);
            }
        }
    }
    Ok(HeatFlux {
        q,
        dq_dgrad: -kj * cinv,
        dq_df,
    })
}

/// `(k_r/2) Σ_c Σ_ab (∂²u_c/∂X_a∂X_b)²` for the two displacement components.
pub fn regularization_energy(hessians: &[[[f64; 2]; 2]; 2], kr: f64) -> f64 {
    let sum: f64 = hessians.iter().flatten().flatten().map(|v| v * v).sum();
    0.5 * kr * sum
}

/// Element stiffness of the Hessian regularization for one scalar
/// component: `k_r Σ_q w_q Σ_ab H^i_ab H^j_ab`. The vector version is block
/// diagonal with this matrix on each component.
pub fn regularization_matrix(hessians: &[Vec<[[f64; 2]; 2]>], weights: &[f64], kr: f64) -> Vec<f64> {
    let n = hessians.first().map_or(0, |h| h.len());
    let mut out = vec![0.0; n * n];
    for (hq, w) in hessians.iter().zip(weights) {
        for a in 0..n {
            for b in 0..n {
                let mut dot = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        dot += hq[a][r][c] * hq[b][r][c];
                    }
                }
                out[a * n + b] += kr * w * dot;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn full() -> MaterialPoint {
        interpolate(1.0, &BaseMaterial::default(), &ErsatzScaling::default()).unwrap().0
    }

    fn random_f(rng: &mut impl Rng) -> Matrix3<f64> {
        loop {
            let g = Matrix2::from_fn(|_, _| rng.gen_range(-0.6..0.6));
            let f = deformation_gradient(&g);
            let j = f.determinant();
            if (0.2..=2.0).contains(&j) {
                return f;
            }
        }
    }

    fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(1e-300)
    }

    #[test]
    fn interpolation_examples() {
        let base = BaseMaterial::default();
        let ers = ErsatzScaling::default();
        let k0 = base.bulk_modulus();
        let (void, _) = interpolate(0.0, &base, &ers).unwrap();
        assert!((void.bulk / k0 - 1e-6).abs() < 1e-18);
        let (solid, _) = interpolate(1.0, &base, &ers).unwrap();
        assert!((solid.bulk - k0).abs() < 1e-9);
        assert!((solid.shear - base.shear_modulus()).abs() < 1e-9);
        assert!((solid.conductivity - 10.0).abs() < 1e-14);
        assert!((solid.k_alpha - k0 * 1e-4).abs() < 1e-9);
        let (half, _) = interpolate(0.5, &base, &ers).unwrap();
        assert!((half.bulk / k0 - (1e-6 + (1.0 - 1e-6) * 0.125)).abs() < 1e-15);
        assert!((half.bulk / k0 - 0.125001).abs() < 1e-6);
        assert!(interpolate(1.2, &base, &ers).is_err());
        assert!(interpolate(-0.1, &base, &ers).is_err());
    }

    #[test]
    fn interpolation_derivatives_and_monotonicity() {
        let base = BaseMaterial::default();
        let ers = ErsatzScaling::default();
        let mut prev = interpolate(0.0, &base, &ers).unwrap().0;
        for i in 1..=100 {
            let r = i as f64 / 100.0;
            let (mp, d) = interpolate(r, &base, &ers).unwrap();
            assert!(mp.bulk >= prev.bulk && mp.shear >= prev.shear);
            assert!(mp.conductivity >= prev.conductivity && mp.k_alpha >= prev.k_alpha);
            prev = mp;
            if r < 1.0 {
                let h = 1e-7;
                let p = interpolate(r + h, &base, &ers).unwrap().0;
                let m = interpolate(r - h, &base, &ers).unwrap().0;
                for (dv, pv, mv) in [
                    (d.bulk, p.bulk, m.bulk),
                    (d.shear, p.shear, m.shear),
                    (d.conductivity, p.conductivity, m.conductivity),
                    (d.k_alpha, p.k_alpha, m.k_alpha),
                ] {
                    let fd = (pv - mv) / (2.0 * h);
                    assert!(rel_err(fd, dv, dv.abs()) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn reference_state_is_stress_free() {
        let mp = full();
        let f = Matrix3::identity();
        assert!(strain_energy(&f, 0.0, &mp).unwrap().abs() < 1e-12);
        assert!(pk1_stress(&f, 0.0, &mp).unwrap().norm() < 1e-9);
    }

    #[test]
    fn heated_reference_state() {
        let mp = full();
        let f = Matrix3::identity();
        // (K_o/2) * 9 α² Δθ² with K_o = 1e6/0.6, α = 1e-4, Δθ = 100
        let expected = 0.5 * (1.0e6 / 0.6) * 9.0 * 1e-8 * 1e4;
        let psi = strain_energy(&f, 100.0, &mp).unwrap();
        assert!((psi - expected).abs() < 1e-9 * expected);
        assert!((psi - 750.0).abs() < 1e-6);
        let p = pk1_stress(&f, 100.0, &mp).unwrap();
        let sigma: f64 = -3.0 * (1.0e6 / 0.6) * 1e-4 * 100.0;
        assert!((sigma + 50_000.0).abs() < 1e-6);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { sigma } else { 0.0 };
                assert!((p[(i, j)] - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn energy_matches_path_integral_of_stress() {
        // F(t) = diag(1 - 0.1 t, 1, 1); Ψ(1) = ∫ P_11 dF_11 (Simpson, fine)
        let mp = full();
        let n = 2000;
        let mut acc = 0.0;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let f = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 - 0.1 * t, 1.0, 1.0));
            let p = pk1_stress(&f, 0.0, &mp).unwrap()[(0, 0)] * -0.1;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * p;
        }
        acc /= 3.0 * n as f64;
        let f = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.9, 1.0, 1.0));
        let psi = strain_energy(&f, 0.0, &mp).unwrap();
        assert!(rel_err(acc, psi, psi) < 1e-9);
    }

    #[test]
    fn stress_is_energy_gradient() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let base = BaseMaterial::default();
        let ers = ErsatzScaling::default();
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let dt = rng.gen_range(-200.0..400.0);
            let mp = interpolate(rng.gen_range(0.0..1.0), &base, &ers).unwrap().0;
            let p = pk1_stress(&f, dt, &mp).unwrap();
            let h = 1e-6;
            for i in 0..2 {
                for j in 0..2 {
                    let mut fp = f;
                    fp[(i, j)] += h;
                    let mut fm = f;
                    fm[(i, j)] -= h;
                    let fd = (strain_energy(&fp, dt, &mp).unwrap() - strain_energy(&fm, dt, &mp).unwrap()) / (2.0 * h);
                    assert!(rel_err(fd, p[(i, j)], p.norm()) < 1e-6, "{fd} vs {}", p[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn tangent_matches_fd_of_stress() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let mp = full();
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let dt = rng.gen_range(-200.0..400.0);
            let t = material_tangents(&f, dt, &mp).unwrap();
            let scale = t.dp_df.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let h = 1e-6;
            for k in 0..3 {
                for l in 0..3 {
                    let mut fp = f;
                    fp[(k, l)] += h;
                    let mut fm = f;
                    fm[(k, l)] -= h;
                    let d = (pk1_stress(&fp, dt, &mp).unwrap() - pk1_stress(&fm, dt, &mp).unwrap()) / (2.0 * h);
                    for i in 0..3 {
                        for j in 0..3 {
                            assert!(rel_err(d[(i, j)], t.a(i, j, k, l), scale) < 1e-6);
                        }
                    }
                }
            }
            let dp = (pk1_stress(&f, dt + 1e-3, &mp).unwrap() - pk1_stress(&f, dt - 1e-3, &mp).unwrap()) / 2e-3;
            assert!((dp - t.dp_dtheta).norm() <= 1e-6 * t.dp_dtheta.norm());
        }
    }

    #[test]
    fn thermal_tangent_at_identity() {
        let mp = full();
        let t = material_tangents(&Matrix3::identity(), 0.0, &mp).unwrap();
        assert!((t.dp_dtheta - Matrix3::identity() * (-3.0 * mp.k_alpha)).norm() < 1e-9);
    }

    #[test]
    fn tangent_scales_with_stiffness_interpolation() {
        let base = BaseMaterial {
            expansion: 0.0,
            ..Default::default()
        };
        let ers = ErsatzScaling::default();
        let (solid, _) = interpolate(1.0, &base, &ers).unwrap();
        let (void, _) = interpolate(0.0, &base, &ers).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let f = random_f(&mut rng);
        let a = material_tangents(&f, 0.0, &solid).unwrap();
        let b = material_tangents(&f, 0.0, &void).unwrap();
        for (x, y) in a.dp_df.iter().zip(&b.dp_df) {
            assert!((y - 1e-6 * x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn frame_indifference() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mp = full();
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0);
            let dt = rng.gen_range(-50.0..50.0);
            let e1 = strain_energy(&f, dt, &mp).unwrap();
            let e2 = strain_energy(&(r * f), dt, &mp).unwrap();
            assert!((e1 - e2).abs() <= 1e-10 * e1.abs().max(1.0));
        }
    }

    #[test]
    fn inverted_state_rejected() {
        let mp = full();
        let f = Matrix3::from_diagonal(&nalgebra::Vector3::new(-0.5, 1.0, 1.0));
        assert!(matches!(strain_energy(&f, 0.0, &mp), Err(Error::InvertedElement { .. })));
        assert!(pk1_stress(&f, 0.0, &mp).is_err());
        assert!(heat_flux(&f, &Vector2::new(1.0, 0.0), &mp).is_err());
    }

    #[test]
    fn flux_identity_and_compression() {
        let mp = full();
        let g = Vector2::new(3.0, -2.0);
        let q = heat_flux(&Matrix3::identity(), &g, &mp).unwrap();
        assert!((q.q + 10.0 * g).norm() < 1e-12);
        let mut prev = None;
        for s in [1.0, 0.5, 0.1, 0.01, 0.001] {
            let f = Matrix3::from_diagonal(&nalgebra::Vector3::new(s, 1.0, 1.0));
            let q = heat_flux(&f, &Vector2::new(7.0, 0.0), &mp).unwrap();
            assert!((q.q[0] + 10.0 / s * 7.0).abs() < 1e-9 / s);
            if let Some((ps, pq)) = prev {
                let exponent = (q.q[0] / pq as f64).abs().ln() / (s / ps as f64).ln();
                assert!((exponent + 1.0).abs() < 1e-10);
            }
            prev = Some((s, q.q[0]));
        }
    }

    #[test]
    fn flux_under_rotation() {
        let mp = full();
        let a = 0.7f64;
        let r2 = Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos());
        let f = Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0);
        let g = Vector2::new(1.0, 2.0);
        let q = heat_flux(&f, &g, &mp).unwrap().q;
        // rigid rotation: F⁻¹F⁻ᵀ = I, so the referential flux is unchanged
        assert!((q + 10.0 * g).norm() < 1e-12);
        assert!((q.norm() - 10.0 * g.norm()).abs() < 1e-12);
        // spatial flux R q is the rotated Fourier flux of the spatial gradient
        let spatial = r2 * q;
        let spatial_grad = r2 * g;
        assert!((spatial + 10.0 * spatial_grad).norm() < 1e-12);
    }

    #[test]
    fn flux_derivatives_match_fd() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        let mp = full();
        for _ in 0..100 {
            let f = random_f(&mut rng);
            let g = Vector2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let hf = heat_flux(&f, &g, &mp).unwrap();
            let scale = hf.q.norm();
            let h = 1e-6;
            for k in 0..2 {
                for l in 0..2 {
                    let mut fp = f;
                    fp[(k, l)] += h;
                    let mut fm = f;
                    fm[(k, l)] -= h;
                    let d = (heat_flux(&fp, &g, &mp).unwrap().q - heat_flux(&fm, &g, &mp).unwrap().q) / (2.0 * h);
                    for i in 0..2 {
                        assert!(rel_err(d[i], hf.dq_df[i][k][l], scale) < 1e-6);
                    }
                }
                let mut gp = g;
                gp[k] += 1e-3;
                let mut gm = g;
                gm[k] -= 1e-3;
                let d = (heat_flux(&f, &gp, &mp).unwrap().q - heat_flux(&f, &gm, &mp).unwrap().q) / 2e-3;
                for i in 0..2 {
                    assert!(rel_err(d[i], hf.dq_dgrad[(i, k)], hf.dq_dgrad.norm()) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn regularization_energy_examples() {
        let zero = [[[0.0; 2]; 2]; 2];
        assert_eq!(regularization_energy(&zero, 2.0), 0.0);
        // u_x = x²: only ∂²u_x/∂x² = 2 is nonzero
        let h = [[[2.0, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]];
        assert!((regularization_energy(&h, 2.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn regularization_matrix_is_energy_hessian() {
        use crate::mesh::{build_structured_mesh, quadrature, ElementBasis, QuadratureKind};
        let m = build_structured_mesh(1, 1, 0.7, 0.4, &[]).unwrap();
        let basis = ElementBasis::new(&m, &quadrature(QuadratureKind::GaussLobatto3x3));
        let kr = 3.0;
        let km = regularization_matrix(&basis.hessians, &basis.weights, kr);
        let n = basis.num_basis;
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy = |u: &[f64]| -> f64 {
            let mut e = 0.0;
            for q in 0..basis.num_points {
                let mut hs = [[[0.0; 2]; 2]; 2];
                for a in 0..n {
                    for r in 0..2 {
                        for c in 0..2 {
                            hs[0][r][c] += basis.hessians[q][a][r][c] * u[a];
                        }
                    }
                }
                e += basis.weights[q] * regularization_energy(&hs, kr);
            }
            e
        };
        // residual = K u must match the FD gradient of the energy
        let h = 1e-6;
        for a in 0..n {
            let r: f64 = (0..n).map(|b| km[a * n + b] * u[b]).sum();
            let mut up = u.clone();
            up[a] += h;
            let mut um = u.clone();
            um[a] -= h;
            let fd = (energy(&up) - energy(&um)) / (2.0 * h);
            assert!(rel_err(fd, r, r.abs().max(1.0)) < 1e-8);
        }
        // linear fields carry no regularization energy
        let lin: Vec<f64> = m.element_nodes(0).iter().map(|&k| 1.0 + 2.0 * m.coords[k][0] - m.coords[k][1]).collect();
        assert!(energy(&lin).abs() < 1e-18);
    }
}
