//! Small dense least-squares problems over the unit simplex and the
//! nonnegative orthant, solved exactly with primal active-set iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `min ‖y − G a‖² + τ ‖a − c‖²  s.t.  a ≥ 0, 1ᵀa = 1`.
#[derive(Debug, Clone)]
pub struct SimplexQpProblem {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub ridge: f64,
    pub ridge_center: DVector<f64>,
}

impl SimplexQpProblem {
    pub fn new(design: DMatrix<f64>, target: DVector<f64>, ridge: f64) -> Self {
        let p = design.ncols();
        Self {
            design,
            target,
            ridge,
            ridge_center: DVector::zeros(p),
        }
    }

    pub fn with_center(mut self, center: DVector<f64>) -> Self {
        self.ridge_center = center;
        self
    }

    fn validate(&self) -> Result<()> {
        let (l, p) = self.design.shape();
        if p == 0 {
            return Err(Error::InvalidInput("problem has no unknowns (P = 0)".into()));
        }
        if self.target.len() != l || self.ridge_center.len() != p {
            return Err(Error::Shape(format!(
                "design is {l}×{p}, target has {} rows, ridge center has {}",
                self.target.len(),
                self.ridge_center.len()
            )));
        }
        let finite = self.design.iter().all(|v| v.is_finite())
            && self.target.iter().all(|v| v.is_finite())
            && self.ridge_center.iter().all(|v| v.is_finite())
            && self.ridge.is_finite();
        if !finite {
            return Err(Error::InvalidInput("problem has non-finite inputs".into()));
        }
        if self.ridge < 0.0 {
            return Err(Error::InvalidInput("ridge must be nonnegative".into()));
        }
        Ok(())
    }

    /// Returns `(H, f)` of the equivalent form `aᵀHa − 2fᵀa`.
    pub fn normal_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut h = self.design.tr_mul(&self.design);
        for i in 0..h.nrows() {
            h[(i, i)] += self.ridge;
        }
        let f = self.design.tr_mul(&self.target) + &self.ridge_center * self.ridge;
        (h, f)
    }

    pub fn objective(&self, a: &DVector<f64>) -> f64 {
        (&self.target - &self.design * a).norm_squared()
            + self.ridge * (a - &self.ridge_center).norm_squared()
    }
}

pub fn solve_fcls(problem: &SimplexQpProblem) -> Result<DVector<f64>> {
    problem.validate()?;
    let (h, f) = problem.normal_form();
    simplex_qp(&h, &f)
}

/// `min ‖y − G a‖² + τ‖a‖²  s.t.  a + s ≥ 0, 1ᵀa = 0` with `1ᵀs = 1`.
///
/// Substituting `u = a + s` gives a simplex problem in `u` with target
/// `y + G s` and ridge center `s`.
pub fn solve_shifted_fcls(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    ridge: f64,
    shift: &DVector<f64>,
) -> Result<DVector<f64>> {
    let sum: f64 = shift.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "shift must sum to one, got {sum}"
        )));
    }
    if shift.len() != design.ncols() || target.len() != design.nrows() {
        return Err(Error::Shape("shifted problem dimensions disagree".into()));
    }
    let problem = SimplexQpProblem {
        design: design.clone(),
        target: target + design * shift,
        ridge,
        ridge_center: shift.clone(),
    };
    let u = solve_fcls(&problem)?;
    Ok(u - shift)
}

fn ties_lowest_min(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    values.fold(None, |best, (i, v)| match best {
        Some((_, bv)) if bv <= v => best,
        _ => Some((i, v)),
    })
}

/// Solves `H_FF x − η 1 = f_F, 1ᵀx = 1` on the index set `free`.
fn equality_qp(h: &DMatrix<f64>, f: &DVector<f64>, free: &[usize]) -> Result<DVector<f64>> {
    let k = free.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = h[(i, j)];
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
        rhs[a] = f[i];
    }
    rhs[k] = 1.0;
    let sol = kkt
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular KKT system in simplex QP".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite simplex QP iterate".into()));
    }
    Ok(sol.rows(0, k).into_owned())
}

/// Primal active-set method for `min xᵀHx − 2fᵀx  s.t.  x ≥ 0, 1ᵀx = 1`.
///
/// Starts from the barycenter with every coordinate free. Blocking
/// constraints are added one at a time; the bound with the most negative
/// multiplier is released (ties to the lowest index).
pub fn simplex_qp(h: &DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    let p = f.len();
    if p == 0 {
        return Err(Error::InvalidInput("problem has no unknowns (P = 0)".into()));
    }
    if p == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let scale = h.amax().max(f.amax()).max(1e-300);
    let dual_tol = 1e-13 * scale;
    let primal_tol = 1e-14;

    let mut x = DVector::from_element(p, 1.0 / p as f64);
    let mut is_free = vec![true; p];
    for _ in 0..(200 + 50 * p) {
        let free: Vec<usize> = (0..p).filter(|&i| is_free[i]).collect();
        let xf = equality_qp(h, f, &free)?;

        if xf.iter().all(|&v| v >= -primal_tol) {
            x.fill(0.0);
            for (a, &i) in free.iter().enumerate() {
                x[i] = xf[a].max(0.0);
            }
            let g = h * &x - f;
            let eta = free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64;
            let release = ties_lowest_min((0..p).filter(|&i| !is_free[i]).map(|i| (i, g[i] - eta)));
            match release {
                Some((i, mu)) if mu < -dual_tol => is_free[i] = true,
                _ => {
                    let s: f64 = x.iter().sum();
                    return Ok(x / s);
                }
            }
        } else {
            let step = ties_lowest_min(free.iter().enumerate().filter_map(|(a, &i)| {
                (xf[a] < -primal_tol).then(|| (i, x[i] / (x[i] - xf[a])))
            }));
            let (block, alpha) = step.expect("an infeasible coordinate exists");
            for (a, &i) in free.iter().enumerate() {
                x[i] += alpha * (xf[a] - x[i]);
            }
            x[block] = 0.0;
            is_free[block] = false;
        }
    }
    Err(Error::Numerical("simplex active set did not terminate".into()))
}

/// Scaled violation of the optimality conditions of a simplex problem at `a`.
pub fn kkt_residual(problem: &SimplexQpProblem, a: &DVector<f64>) -> f64 {
    let (h, f) = problem.normal_form();
    simplex_kkt_residual(&h, &f, a)
}

pub fn simplex_kkt_residual(h: &DMatrix<f64>, f: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let scale = h.amax().max(f.amax()).max(1.0);
    let g = h * a - f;
    let support: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 1e-12).collect();
    let eta = if support.is_empty() {
        g.min()
    } else {
        support.iter().map(|&i| g[i]).sum::<f64>() / support.len() as f64
    };
    let mut r = (a.sum() - 1.0).abs();
    for i in 0..a.len() {
        r = r.max((-a[i]).max(0.0));
        if a[i] > 1e-12 {
            r = r.max((g[i] - eta).abs() / scale);
        } else {
            r = r.max((eta - g[i]).max(0.0) / scale);
        }
    }
    r
}

/// Lawson–Hanson nonnegative least squares: `min ‖y − G b‖²  s.t.  b ≥ 0`.
pub fn solve_nnls(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let (l, p) = design.shape();
    if p == 0 {
        return Err(Error::InvalidInput("problem has no unknowns (P = 0)".into()));
    }
    if target.len() != l {
        return Err(Error::Shape("nnls target length differs from design rows".into()));
    }
    let h = design.tr_mul(design);
    let f = design.tr_mul(target);
    let tol = 1e-12 * h.amax().max(f.amax()).max(1e-300);

    let solve_passive = |passive: &[usize]| -> Result<DVector<f64>> {
        let k = passive.len();
        let hp = DMatrix::from_fn(k, k, |a, b| h[(passive[a], passive[b])]);
        let fp = DVector::from_fn(k, |a, _| f[passive[a]]);
        let z = match hp.clone().cholesky() {
            Some(c) => c.solve(&fp),
            None => hp
                .full_piv_lu()
                .solve(&fp)
                .ok_or_else(|| Error::Numerical("singular nnls subproblem".into()))?,
        };
        Ok(z)
    };

    let mut x = DVector::zeros(p);
    let mut passive = vec![false; p];
    for _ in 0..(30 * p + 30) {
        let w = &f - &h * &x;
        let enter = (0..p)
            .filter(|&j| !passive[j] && w[j] > tol)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if w[b] >= w[j] => Some(b),
                _ => Some(j),
            });
        let Some(j) = enter else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..p).filter(|&i| passive[i]).collect();
            let z = solve_passive(&idx)?;
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (a, &i) in idx.iter().enumerate() {
                    x[i] = z[a];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (a, &i) in idx.iter().enumerate() {
                if z[a] <= 0.0 {
                    let t = x[i] / (x[i] - z[a]);
                    if t < alpha {
                        alpha = t;
                    }
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[a] - x[i]);
            }
            for &i in &idx {
                if x[i] <= tol.max(0.0) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    Err(Error::Numerical("nnls did not terminate".into()))
}
