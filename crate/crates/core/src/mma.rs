//! Method of Moving Asymptotes for `min f0(x)` subject to `f_i(x) ≤ 0` and
//! box bounds, in the standard form with artificial variables
//! (`a0 = 1`, `a_i = 0`, `c_i = c`, `d_i = d`). The convex separable
//! subproblem is solved through its dual with a safeguarded Newton iteration
//! on the multipliers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ASY_MIN_GAP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmaSettings {
    pub asy_init: f64,
    pub asy_incr: f64,
    pub asy_decr: f64,
    /// Largest change of a variable per update, as a fraction of its range.
    pub move_limit: f64,
    /// Bounds on the distance between an iterate and its asymptotes, as
    /// fractions of the variable range.
    pub asy_min_gap: f64,
    pub asy_max_gap: f64,
    pub albefa: f64,
    pub raa0: f64,
    /// Penalty on the constraint relaxation variables.
    pub c: f64,
    pub d: f64,
    /// Tolerance on the KKT residual of the subproblem.
    pub dual_tol: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            asy_init: 0.5,
            asy_incr: 1.2,
            asy_decr: 0.7,
            move_limit: 0.2,
            asy_min_gap: ASY_MIN_GAP,
            asy_max_gap: 10.0,
            albefa: 0.1,
            raa0: 1e-5,
            c: 1000.0,
            d: 1.0,
            dual_tol: 1e-10,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.asy_init > 0.0
            && self.asy_incr >= 1.0
            && self.asy_decr > 0.0
            && self.asy_decr <= 1.0
            && self.move_limit > 0.0
            && self.asy_min_gap > 0.0
            && self.asy_min_gap < self.asy_max_gap
            && self.albefa > 0.0
            && self.albefa < 1.0
            && self.raa0 > 0.0
            && self.c > 0.0
            && self.d >= 0.0
            && self.dual_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("invalid MMA settings"))
        }
    }
}

/// Result of one design update.
#[derive(Debug, Clone)]
pub struct MmaStep {
    pub x: Vec<f64>,
    /// Constraint multipliers of the normalized subproblem.
    pub lambda: Vec<f64>,
    /// Largest unperturbed KKT residual of the subproblem at `x`.
    pub kkt_residual: f64,
    pub subproblem_iterations: usize,
}

/// Optimizer state carried between design iterations.
#[derive(Debug, Clone)]
pub struct Mma {
    pub settings: MmaSettings,
    n: usize,
    m: usize,
    xmin: Vec<f64>,
    xmax: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    iteration: usize,
    objective_scale: f64,
}

/// Separable convex approximation data of one subproblem.
struct Subproblem<'a> {
    low: &'a [f64],
    upp: &'a [f64],
    alfa: Vec<f64>,
    beta: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: f64,
    d: f64,
}

impl Mma {
    pub fn new(n: usize, m: usize, xmin: Vec<f64>, xmax: Vec<f64>, settings: MmaSettings) -> Result<Self> {
        settings.validate()?;
        if xmin.len() != n || xmax.len() != n {
            return Err(Error::invalid("MMA bounds have the wrong length"));
        }
        if xmin.iter().zip(&xmax).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("MMA lower bounds must be below upper bounds"));
        }
        Ok(Self {
            settings,
            n,
            m,
            low: xmin.clone(),
            upp: xmax.clone(),
            xmin,
            xmax,
            xold1: Vec::new(),
            xold2: Vec::new(),
            iteration: 0,
            objective_scale: 0.0,
        })
    }

    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Computes the next design from values and gradients at `x`.
    ///
    /// Objective derivatives are divided by the running maximum of their
    /// peak magnitude, and every constraint by the peak magnitude of its
    /// derivatives at `x`. Iterates are then invariant to positive scalings
    /// of either, and the multipliers stay well below the artificial-variable
    /// penalty `c` unless the subproblem is infeasible.
    pub fn update(&mut self, x: &[f64], df0: &[f64], g: &[f64], dg: &[Vec<f64>]) -> Result<MmaStep> {
        let (n, m) = (self.n, self.m);
        if x.len() != n || df0.len() != n || g.len() != m || dg.len() != m || dg.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("MMA input dimensions do not match the problem"));
        }
        let finite = df0.iter().chain(g).chain(dg.iter().flatten()).chain(x).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Optimizer("non-finite objective or constraint data".into()));
        }
        let s = &self.settings;
        self.iteration += 1;
        let range: Vec<f64> = self.xmin.iter().zip(&self.xmax).map(|(l, u)| u - l).collect();
        if self.iteration <= 2 {
            for j in 0..n {
                self.low[j] = x[j] - s.asy_init * range[j];
                self.upp[j] = x[j] + s.asy_init * range[j];
            }
        } else {
            for j in 0..n {
                let osc = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if osc > 0.0 {
                    s.asy_incr
                } else if osc < 0.0 {
                    s.asy_decr
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                let (gmin, gmax) = (s.asy_min_gap * range[j], s.asy_max_gap * range[j]);
                self.low[j] = low.clamp(x[j] - gmax, x[j] - gmin);
                self.upp[j] = upp.clamp(x[j] + gmin, x[j] + gmax);
            }
        }

        let peak = |v: &[f64]| v.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.objective_scale = self.objective_scale.max(peak(df0));
        let scale = if self.objective_scale > 0.0 { self.objective_scale } else { 1.0 };
        let gscale: Vec<f64> = dg.iter().map(|r| peak(r)).map(|p| if p > 0.0 { p } else { 1.0 }).collect();
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut p = vec![vec![0.0; n]; m];
        let mut q = vec![vec![0.0; n]; m];
        let mut b: Vec<f64> = g.iter().zip(&gscale).map(|(v, s)| -v / s).collect();
        for j in 0..n {
            alfa[j] = (self.low[j] + s.albefa * (x[j] - self.low[j]))
                .max(x[j] - s.move_limit * range[j])
                .max(self.xmin[j]);
            beta[j] = (self.upp[j] - s.albefa * (self.upp[j] - x[j]))
                .min(x[j] + s.move_limit * range[j])
                .min(self.xmax[j]);
            let ux1 = self.upp[j] - x[j];
            let xl1 = x[j] - self.low[j];
            let (ux2, xl2) = (ux1 * ux1, xl1 * xl1);
            let xmami = range[j].max(1e-5);
            let f = df0[j] / scale;
            let (pp, qq) = (f.max(0.0), (-f).max(0.0));
            let pq = 0.001 * (pp + qq) + s.raa0 / xmami;
            p0[j] = (pp + pq) * ux2;
            q0[j] = (qq + pq) * xl2;
            for i in 0..m {
                let d = dg[i][j] / gscale[i];
                let (pp, qq) = (d.max(0.0), (-d).max(0.0));
                let pq = 0.001 * (pp + qq) + s.raa0 / xmami;
                p[i][j] = (pp + pq) * ux2;
                q[i][j] = (qq + pq) * xl2;
                b[i] += p[i][j] / ux1 + q[i][j] / xl1;
            }
        }
        let sub = Subproblem {
            low: &self.low,
            upp: &self.upp,
            alfa,
            beta,
            p0,
            q0,
            p,
            q,
            b,
            c: s.c,
            d: s.d,
        };
        let (x_new, lambda, kkt, iterations) = dual_solve(&sub, s.dual_tol)?;

        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
        if self.xold2.is_empty() {
            self.xold2 = x.to_vec();
        }
        Ok(MmaStep {
            x: x_new,
            lambda,
            kkt_residual: kkt,
            subproblem_iterations: iterations,
        })
    }
}

impl Subproblem<'_> {
    fn n(&self) -> usize {
        self.alfa.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    /// Minimizer over `[α, β]` of the Lagrangian term of variable `j`.
    fn x_of(&self, j: usize, lam: &[f64]) -> (f64, bool) {
        let mut pp = self.p0[j];
        let mut qq = self.q0[j];
        for (i, l) in lam.iter().enumerate() {
            pp += l * self.p[i][j];
            qq += l * self.q[i][j];
        }
        let (sp, sq) = (pp.sqrt(), qq.sqrt());
        let x = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
        if x <= self.alfa[j] {
            (self.alfa[j], false)
        } else if x >= self.beta[j] {
            (self.beta[j], false)
        } else {
            (x, true)
        }
    }

    fn y_of(&self, l: f64) -> f64 {
        if l <= self.c {
            0.0
        } else if self.d > 0.0 {
            (l - self.c) / self.d
        } else {
            f64::INFINITY
        }
    }

    /// Primal point, dual gradient `h(x) − y − b` and dual Hessian.
    fn dual(&self, lam: &[f64]) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let (n, m) = (self.n(), self.m());
        let mut x = vec![0.0; n];
        let mut grad: Vec<f64> = (0..m).map(|i| -self.b[i] - self.y_of(lam[i])).collect();
        let mut hess = DMatrix::<f64>::zeros(m, m);
        let mut gcol = vec![0.0; m];
        for j in 0..n {
            let (xj, free) = self.x_of(j, lam);
            x[j] = xj;
            let (ux, xl) = (self.upp[j] - xj, xj - self.low[j]);
            for i in 0..m {
                grad[i] += self.p[i][j] / ux + self.q[i][j] / xl;
                gcol[i] = self.p[i][j] / (ux * ux) - self.q[i][j] / (xl * xl);
            }
            if free {
                let mut pp = self.p0[j];
                let mut qq = self.q0[j];
                for (i, l) in lam.iter().enumerate() {
                    pp += l * self.p[i][j];
                    qq += l * self.q[i][j];
                }
                let curv = 2.0 * pp / (ux * ux * ux) + 2.0 * qq / (xl * xl * xl);
                for i in 0..m {
                    for k in 0..m {
                        hess[(i, k)] -= gcol[i] * gcol[k] / curv;
                    }
                }
            }
        }
        for i in 0..m {
            if lam[i] > self.c && self.d > 0.0 {
                hess[(i, i)] -= 1.0 / self.d;
            }
        }
        (x, grad, hess)
    }

    fn dual_value(&self, lam: &[f64]) -> f64 {
        let (x, _, _) = self.dual(lam);
        let mut v = 0.0;
        for j in 0..self.n() {
            let (ux, xl) = (self.upp[j] - x[j], x[j] - self.low[j]);
            v += self.p0[j] / ux + self.q0[j] / xl;
            for (i, l) in lam.iter().enumerate() {
                v += l * (self.p[i][j] / ux + self.q[i][j] / xl);
            }
        }
        for (i, l) in lam.iter().enumerate() {
            let y = self.y_of(*l);
            v += self.c * y + 0.5 * self.d * y * y - l * (self.b[i] + y);
        }
        v
    }

    /// Largest violation of the KKT conditions of the subproblem at `(x, λ)`.
    fn kkt_residual(&self, lam: &[f64], grad: &[f64]) -> f64 {
        lam.iter()
            .zip(grad)
            .map(|(l, g)| (l * g).abs().max(g.max(0.0)))
            .fold(0.0, f64::max)
    }
}

/// Maximizes the concave dual over `λ ≥ 0`. Stationarity in `x` holds in
/// closed form, so only the multipliers are iterated.
fn dual_solve(sub: &Subproblem<'_>, tol: f64) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    let m = sub.m();
    if m == 0 {
        let (x, _, _) = sub.dual(&[]);
        return Ok((x, Vec::new(), 0.0, 0));
    }
    if m == 1 {
        return dual_solve_scalar(sub, tol);
    }
    let mut lam = vec![0.0; m];
    for it in 1..=200 {
        let (x, grad, hess) = sub.dual(&lam);
        let res = sub.kkt_residual(&lam, &grad);
        if res <= tol {
            return Ok((x, lam, res, it));
        }
        // projected Newton on the free set, gradient ascent on the rest
        let active: Vec<bool> = (0..m).map(|i| lam[i] <= 0.0 && grad[i] < 0.0).collect();
        let mut h = -hess;
        let mut rhs = DVector::from_vec(grad.clone());
        for i in 0..m {
            h[(i, i)] += 1e-12 * (1.0 + h[(i, i)].abs());
            if active[i] {
                for k in 0..m {
                    h[(i, k)] = 0.0;
                    h[(k, i)] = 0.0;
                }
                h[(i, i)] = 1.0;
                rhs[i] = 0.0;
            }
        }
        let dir = h
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Optimizer("singular MMA dual Hessian".into()))?;
        let f0 = sub.dual_value(&lam);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = (0..m).map(|i| (lam[i] + t * dir[i]).max(0.0)).collect();
            let slope: f64 = (0..m).map(|i| grad[i] * (trial[i] - lam[i])).sum();
            if sub.dual_value(&trial) >= f0 + 1e-4 * slope || t < 1e-12 {
                lam = trial;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Optimizer("MMA dual solve did not converge".into()))
}

fn dual_solve_scalar(sub: &Subproblem<'_>, tol: f64) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    let eval = |l: f64| {
        let (x, g, h) = sub.dual(&[l]);
        (x, g[0], h[(0, 0)])
    };
    let (x0, g0, _) = eval(0.0);
    if g0 <= 0.0 {
        return Ok((x0, vec![0.0], 0.0, 1));
    }
    // bracket the root of the decreasing dual derivative
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut count = 1;
    while eval(hi).1 > 0.0 {
        lo = hi;
        hi *= 2.0;
        count += 1;
        if hi > 1e30 {
            return Err(Error::Optimizer("MMA dual multiplier unbounded".into()));
        }
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..300 {
        count += 1;
        let (x, g, h) = eval(l);
        let res = (l * g).abs().max(g.max(0.0));
        if res <= tol || hi - lo <= 1e-15 * hi {
            return Ok((x, vec![l], res, count));
        }
        if g > 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        let newton = if h < 0.0 { l - g / h } else { f64::NAN };
        l = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::Optimizer("MMA dual solve did not converge".into()))
}
