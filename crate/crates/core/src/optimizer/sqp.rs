use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};
use nalgebra::{DMatrix, DVector};

use super::{fitness, OptimizationProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct SqpOptions {
    /// Forward finite-difference step for constraint gradients.
    pub fd_step: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step is shorter than this.
    pub step_tolerance: f64,
    /// Linearized constraints are asked to clear `π` by this much so that
    /// accepted iterates land on the feasible side.
    pub margin: f64,
    /// Cost per unit of constraint violation in the QP subproblem.
    pub elastic_weight: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-6,
            max_iterations: 100,
            step_tolerance: 1e-8,
            margin: 1e-7,
            elastic_weight: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpResult {
    pub dwells: Vec<f64>,
    pub iterations: usize,
    /// Set when no feasible iterate was found and the start was returned.
    pub warning: bool,
}

/// Restriction of the problem to the support of the starting vector.
struct Reduced<'a> {
    problem: &'a OptimizationProblem,
    start: &'a [f64],
    support: Vec<usize>,
    purity: Vec<f64>,
}

impl Reduced<'_> {
    fn expand(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut x = vec![0.0; self.start.len()];
        for (k, &i) in self.support.iter().enumerate() {
            x[i] = v[k];
        }
        x
    }

    /// `ζ_s − π_s` per scenario; `None` if a trace fails.
    fn slack(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let z = self.problem.purities(&self.expand(v)).ok()?;
        Some(DVector::from_iterator(z.len(), z.iter().zip(&self.purity).map(|(z, p)| z - p)))
    }

    fn jacobian(&self, v: &DVector<f64>, c: &DVector<f64>, h: f64) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(c.len(), v.len());
        for k in 0..v.len() {
            let mut w = v.clone();
            w[k] += h;
            let ck = self.slack(&w)?;
            jac.set_column(k, &((ck - c) / h));
        }
        Some(jac)
    }
}

fn violation(c: &DVector<f64>) -> f64 {
    c.iter().map(|s| (-s).max(0.0)).sum()
}

struct QpStep {
    d: DVector<f64>,
    multipliers: DVector<f64>,
}

/// `min ½dᵀBd + Σd + M·Σt` subject to `c + Jd + t ≥ margin`, `t ≥ 0`,
/// `v + d ≥ 0` and `|d_i| ≤ radius`.
fn solve_qp(
    b: &DMatrix<f64>,
    v: &DVector<f64>,
    c: &DVector<f64>,
    jac: &DMatrix<f64>,
    radius: f64,
    opts: &SqpOptions,
) -> Option<QpStep> {
    let k = v.len();
    let m = c.len();
    let nvar = k + m;
    let mut p = vec![vec![0.0; nvar]; nvar];
    for i in 0..k {
        for j in i..k {
            p[i][j] = b[(i, j)];
        }
    }
    let mut q = vec![1.0; k];
    q.extend(std::iter::repeat_n(opts.elastic_weight, m));

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for s in 0..m {
        let mut row = vec![0.0; nvar];
        for i in 0..k {
            row[i] = -jac[(s, i)];
        }
        row[k + s] = -1.0;
        rows.push(row);
        rhs.push(c[s] - opts.margin);
    }
    for s in 0..m {
        let mut row = vec![0.0; nvar];
        row[k + s] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for i in 0..k {
        let mut lower = vec![0.0; nvar];
        lower[i] = -1.0;
        rows.push(lower);
        rhs.push(v[i].min(radius));
        let mut upper = vec![0.0; nvar];
        upper[i] = 1.0;
        rows.push(upper);
        rhs.push(radius);
    }

    let p = CscMatrix::from(&p);
    let a = CscMatrix::from(&rows);
    let cones = [NonnegativeConeT(rows.len())];
    let settings = DefaultSettings {
        verbose: false,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings).ok()?;
    solver.solve();
    if !matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return None;
    }
    let x = &solver.solution.x;
    Some(QpStep {
        d: DVector::from_iterator(k, x[..k].iter().copied()),
        multipliers: DVector::from_iterator(m, solver.solution.z[..m].iter().map(|z| z.max(0.0))),
    })
}

/// Powell-damped BFGS update keeping `b` positive definite.
fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let y = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    } else {
        y.clone()
    };
    let sy = s.dot(&y);
    if !(sy > 1e-300) {
        return;
    }
    *b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
}

/// Local minimization of total time over the positive entries of `start`,
/// subject to every scenario meeting its purity. Zero entries stay zero. The
/// result is never worse than `start` under [`fitness`].
pub fn sqp_refine(problem: &OptimizationProblem, start: &[f64], penalty_weight: f64, opts: &SqpOptions) -> SqpResult {
    let fallback = |iterations| SqpResult {
        dwells: start.to_vec(),
        iterations,
        warning: true,
    };
    let support: Vec<usize> = start.iter().enumerate().filter(|(_, d)| **d > 0.0).map(|(i, _)| i).collect();
    let start_fitness = fitness(start, problem, penalty_weight);
    if support.is_empty() || !start_fitness.is_finite() {
        return SqpResult {
            dwells: start.to_vec(),
            iterations: 0,
            warning: !problem.purities(start).map(|z| problem.is_feasible(&z)).unwrap_or(false),
        };
    }
    let red = Reduced {
        problem,
        start,
        purity: problem.constraints().scenarios().iter().map(|s| s.purity).collect(),
        support,
    };
    let k = red.support.len();
    let mut v = DVector::from_iterator(k, red.support.iter().map(|&i| start[i]));
    let Some(mut c) = red.slack(&v) else {
        return fallback(0);
    };
    let Some(mut jac) = red.jacobian(&v, &c, opts.fd_step) else {
        return fallback(0);
    };
    let mut b = DMatrix::<f64>::identity(k, k);
    let mut radius = v.amax().max(1.0);
    let mut mu = 1.0_f64;
    let mut best: Option<(f64, DVector<f64>)> = (violation(&c) == 0.0).then(|| (v.sum(), v.clone()));
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let Some(qp) = solve_qp(&b, &v, &c, &jac, radius, opts) else {
            break;
        };
        mu = mu.max(1.5 * qp.multipliers.max()).max(1.0);
        let merit = |v: &DVector<f64>, c: &DVector<f64>| v.sum() + mu * violation(c);
        let phi0 = merit(&v, &c);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = (&v + &qp.d * alpha).map(|x| x.max(0.0));
            if let Some(ct) = red.slack(&trial) {
                if merit(&trial, &ct) < phi0 {
                    accepted = Some((trial, ct));
                    break;
                }
            }
            alpha *= 0.5;
            if (&qp.d * alpha).norm() < opts.step_tolerance {
                break;
            }
        }
        let Some((v_new, c_new)) = accepted else {
            radius *= 0.25;
            if radius < opts.step_tolerance || qp.d.norm() < opts.step_tolerance {
                break;
            }
            continue;
        };

        let step = &v_new - &v;
        if alpha == 1.0 {
            radius = (radius * 2.0).min(1e3);
        }
        let Some(jac_new) = red.jacobian(&v_new, &c_new, opts.fd_step) else {
            break;
        };
        // ∇L = 1 − Jᵀλ, so the gradient change comes from the constraints only.
        let y = -(jac_new.transpose() - jac.transpose()) * &qp.multipliers;
        bfgs_update(&mut b, &step, &y);
        v = v_new;
        c = c_new;
        jac = jac_new;
        if violation(&c) == 0.0 && best.as_ref().is_none_or(|(t, _)| v.sum() < *t) {
            best = Some((v.sum(), v.clone()));
        }
        if step.norm() < opts.step_tolerance {
            break;
        }
    }

    match best {
        Some((_, v)) => {
            let x = red.expand(&v);
            if fitness(&x, problem, penalty_weight) <= start_fitness {
                SqpResult {
                    dwells: x,
                    iterations,
                    warning: false,
                }
            } else {
                SqpResult {
                    dwells: start.to_vec(),
                    iterations,
                    warning: false,
                }
            }
        }
        None => fallback(iterations),
    }
}
