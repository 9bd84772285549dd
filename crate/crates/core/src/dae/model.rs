use serde::{Deserialize, Serialize};

use super::newton::{fd_perturb, newton_solve, norm_inf, NewtonOptions};
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};

/// Name and sweep range of the continuation parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub p_init: f64,
    pub p_fin: f64,
}

/// Operating point of a model at parameter value `p`.
///
/// `setpoints` holds model-specific quantities frozen at the operating point
/// (e.g. internal machine voltages and governor references fixed by a power
/// flow). They enter `f` and `g` but are not differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
    pub setpoints: Vec<f64>,
}

/// Semi-implicit DAE `[T 0; R 0] [x'; y'] = [f(x, y, p); g(x, y, p)]`.
///
/// Implementations must be stateless with respect to calls so that several
/// trackers can evaluate the same model concurrently.
pub trait DaeModel: Send + Sync {
    fn n_states(&self) -> usize;
    fn n_algebraic(&self) -> usize;

    fn f(&self, x: &[f64], y: &[f64], p: f64, setpoints: &[f64]) -> Vec<f64>;
    fn g(&self, x: &[f64], y: &[f64], p: f64, setpoints: &[f64]) -> Vec<f64>;

    fn t_matrix(&self, p: f64) -> SparseMatrix;

    fn r_matrix(&self, _p: f64) -> SparseMatrix {
        SparseMatrix::zeros(self.n_algebraic(), self.n_states())
    }

    fn parameter(&self) -> ParamDescriptor;

    fn initial_guess(&self, _p: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.n_states()], vec![0.0; self.n_algebraic()])
    }

    /// Equilibrium at `p`, warm-started from `warm` when given.
    fn equilibrium(&self, p: f64, warm: Option<&Equilibrium>) -> Result<Equilibrium> {
        let (gx, gy) = match warm {
            Some(eq) => (eq.x.clone(), eq.y.clone()),
            None => self.initial_guess(p),
        };
        solve_equilibrium(self, p, &gx, &gy)
    }

    /// Exact Jacobian blocks, when the model provides them.
    fn analytic_jacobians(&self, _eq: &Equilibrium) -> Option<Result<ModelBlocks>> {
        None
    }

    /// True when `E(p)` and `A(p)` are affine in `p`.
    fn affine_in_parameter(&self) -> bool {
        false
    }
}

/// Linearization blocks of a model at an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlocks {
    pub t: SparseMatrix,
    pub r: SparseMatrix,
    pub fx: SparseMatrix,
    pub fy: SparseMatrix,
    pub gx: SparseMatrix,
    pub gy: SparseMatrix,
}

impl ModelBlocks {
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn m(&self) -> usize {
        self.gy.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let checks = [
            ("T", &self.t, n, n),
            ("R", &self.r, m, n),
            ("f_x", &self.fx, n, n),
            ("f_y", &self.fy, n, m),
            ("g_x", &self.gx, m, n),
            ("g_y", &self.gy, m, m),
        ];
        for (name, mat, r, c) in checks {
            if mat.nrows() != r || mat.ncols() != c {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    /// Relative step; the absolute step for component `v` is `h_x * (1 + |v|)`.
    pub h_x: f64,
    pub central: bool,
    /// Entries at or below this magnitude are dropped.
    pub drop_tol: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            h_x: 1e-7,
            central: false,
            drop_tol: 1e-12,
        }
    }
}

/// Newton solve of `[f; g] = 0` at fixed `p` with empty setpoints.
pub fn solve_equilibrium<M: DaeModel + ?Sized>(
    model: &M,
    p: f64,
    guess_x: &[f64],
    guess_y: &[f64],
) -> Result<Equilibrium> {
    let n = model.n_states();
    let m = model.n_algebraic();
    if guess_x.len() != n || guess_y.len() != m {
        return Err(Error::DimensionMismatch("equilibrium guess".into()));
    }
    let z0: Vec<f64> = guess_x.iter().chain(guess_y).copied().collect();
    let residual = |z: &[f64]| {
        let mut r = model.f(&z[..n], &z[n..], p, &[]);
        r.extend(model.g(&z[..n], &z[n..], p, &[]));
        r
    };
    let z = newton_solve(residual, &z0, &NewtonOptions::default(), "equilibrium Newton")?;
    Ok(Equilibrium {
        x: z[..n].to_vec(),
        y: z[n..].to_vec(),
        p,
        setpoints: Vec::new(),
    })
}

/// Largest residual component of `[f; g]` at an equilibrium.
pub fn equilibrium_residual<M: DaeModel + ?Sized>(model: &M, eq: &Equilibrium) -> f64 {
    let f = model.f(&eq.x, &eq.y, eq.p, &eq.setpoints);
    let g = model.g(&eq.x, &eq.y, eq.p, &eq.setpoints);
    norm_inf(&f).max(norm_inf(&g))
}

/// Finite-difference approximations of `f_x, f_y, g_x, g_y` at `eq`.
pub fn fd_jacobians<M: DaeModel + ?Sized>(model: &M, eq: &Equilibrium, opts: &FdOptions) -> ModelBlocks {
    let n = model.n_states();
    let m = model.n_algebraic();
    let sp = &eq.setpoints;
    let f0 = model.f(&eq.x, &eq.y, eq.p, sp);
    let g0 = model.g(&eq.x, &eq.y, eq.p, sp);
    let mut fx = TripletBuilder::new(n, n);
    let mut fy = TripletBuilder::new(n, m);
    let mut gx = TripletBuilder::new(m, n);
    let mut gy = TripletBuilder::new(m, m);
    let eval = |j: usize, v: f64| {
        let (mut x, mut y) = (eq.x.clone(), eq.y.clone());
        if j < n {
            x[j] = v;
        } else {
            y[j - n] = v;
        }
        (model.f(&x, &y, eq.p, sp), model.g(&x, &y, eq.p, sp))
    };
    let diff = |a: &[f64], b: &[f64], w: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(u, v)| (u - v) / w).collect()
    };

    for j in 0..n + m {
        let base = if j < n { eq.x[j] } else { eq.y[j - n] };
        let (vp, h) = fd_perturb(base, opts.h_x);
        let (f1, g1) = eval(j, vp);
        let (df, dg) = if opts.central {
            let (fb, gb) = eval(j, base - h);
            (diff(&f1, &fb, 2.0 * h), diff(&g1, &gb, 2.0 * h))
        } else {
            (diff(&f1, &f0, h), diff(&g1, &g0, h))
        };
        for (i, v) in df.into_iter().enumerate() {
            if v.abs() > opts.drop_tol {
                if j < n {
                    fx.push(i, j, v)
                } else {
                    fy.push(i, j - n, v)
                }
            }
        }
        for (i, v) in dg.into_iter().enumerate() {
            if v.abs() > opts.drop_tol {
                if j < n {
                    gx.push(i, j, v)
                } else {
                    gy.push(i, j - n, v)
                }
            }
        }
    }
    ModelBlocks {
        t: model.t_matrix(eq.p),
        r: model.r_matrix(eq.p),
        fx: fx.build(),
        fy: fy.build(),
        gx: gx.build(),
        gy: gy.build(),
    }
}

/// Analytic blocks when available, finite differences otherwise.
pub fn linearize<M: DaeModel + ?Sized>(model: &M, eq: &Equilibrium, opts: &FdOptions) -> Result<ModelBlocks> {
    match model.analytic_jacobians(eq) {
        Some(blocks) => blocks,
        None => Ok(fd_jacobians(model, eq, opts)),
    }
}
