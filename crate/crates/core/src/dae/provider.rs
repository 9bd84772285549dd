use std::sync::{Arc, Mutex};

use super::model::{linearize, DaeModel, Equilibrium, FdOptions};
use super::pencil::{assemble_pencil, Pencil};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Pencil and its parameter derivatives at one value of `p`.
#[derive(Debug, Clone)]
pub struct PencilSample {
    pub e: SparseMatrix,
    pub a: SparseMatrix,
    pub edot: SparseMatrix,
    pub adot: SparseMatrix,
    pub p: f64,
    pub n_states: usize,
}

impl PencilSample {
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }
}

/// Source of pencils `(E(p), A(p))` along a parameter sweep.
pub trait PencilProvider: Send + Sync {
    fn pencil(&self, p: f64) -> Result<Pencil>;

    /// `(dE/dp, dA/dp)` at `p`, given the already evaluated pencil there.
    fn derivatives(&self, p: f64, base: &Pencil, h_p: Option<f64>) -> Result<(SparseMatrix, SparseMatrix)> {
        fd_derivatives_from(self, p, base, h_p, false)
    }

    fn sample(&self, p: f64, h_p: Option<f64>) -> Result<PencilSample> {
        let pencil = self.pencil(p)?;
        let (edot, adot) = self.derivatives(p, &pencil, h_p)?;
        Ok(PencilSample {
            e: pencil.e,
            a: pencil.a,
            edot,
            adot,
            p,
            n_states: pencil.n_states,
        })
    }

    /// Declares `E` and `A` affine in `p`, so derivatives are constant.
    fn is_affine(&self) -> bool {
        false
    }

    fn parameter_name(&self) -> String {
        "p".to_string()
    }

    /// Closed interval on which the provider can be evaluated, if bounded.
    fn domain(&self) -> Option<(f64, f64)> {
        None
    }

    /// Parameter values at which the provider can be evaluated, when it is
    /// restricted to a discrete set.
    fn grid(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<P: PencilProvider + ?Sized> PencilProvider for Arc<P> {
    fn pencil(&self, p: f64) -> Result<Pencil> {
        (**self).pencil(p)
    }
    fn derivatives(&self, p: f64, base: &Pencil, h_p: Option<f64>) -> Result<(SparseMatrix, SparseMatrix)> {
        (**self).derivatives(p, base, h_p)
    }
    fn sample(&self, p: f64, h_p: Option<f64>) -> Result<PencilSample> {
        (**self).sample(p, h_p)
    }
    fn is_affine(&self) -> bool {
        (**self).is_affine()
    }
    fn parameter_name(&self) -> String {
        (**self).parameter_name()
    }
    fn domain(&self) -> Option<(f64, f64)> {
        (**self).domain()
    }
    fn grid(&self) -> Option<Vec<f64>> {
        (**self).grid()
    }
}

pub fn default_h_p(p: f64) -> f64 {
    1e-6 * p.abs().max(1.0)
}

/// Forward-difference `(dE/dp, dA/dp)` with the union sparsity pattern of the
/// two samples.
pub fn fd_matrix_derivatives<P: PencilProvider + ?Sized>(
    provider: &P,
    p: f64,
    h_p: Option<f64>,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let base = provider.pencil(p)?;
    fd_derivatives_from(provider, p, &base, h_p, false)
}

/// Central-difference variant of [`fd_matrix_derivatives`].
pub fn fd_matrix_derivatives_central<P: PencilProvider + ?Sized>(
    provider: &P,
    p: f64,
    h_p: Option<f64>,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let base = provider.pencil(p)?;
    fd_derivatives_from(provider, p, &base, h_p, true)
}

pub(crate) fn fd_derivatives_from<P: PencilProvider + ?Sized>(
    provider: &P,
    p: f64,
    base: &Pencil,
    h_p: Option<f64>,
    central: bool,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let h = h_p.unwrap_or_else(|| default_h_p(p));
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("h_p must be positive, got {h}")));
    }
    // Step back instead of forward when p + h would leave the domain.
    let h = match provider.domain() {
        Some((lo, hi)) if !central && p + h > hi && p - h >= lo => -h,
        _ => h,
    };
    let pp = p + h;
    let hp = pp - p;
    let fwd = provider.pencil(pp)?;
    if central {
        let pm = p - h;
        let hm = p - pm;
        let bwd = provider.pencil(pm)?;
        let width = hp + hm;
        let edot = fwd.e.add_scaled(1.0 / width, &bwd.e, -1.0 / width)?;
        let adot = fwd.a.add_scaled(1.0 / width, &bwd.a, -1.0 / width)?;
        return Ok((edot, adot));
    }
    let edot = fwd.e.add_scaled(1.0 / hp, &base.e, -1.0 / hp)?;
    let adot = fwd.a.add_scaled(1.0 / hp, &base.a, -1.0 / hp)?;
    Ok((edot, adot))
}

type PencilFn = dyn Fn(f64) -> Result<Pencil> + Send + Sync;

/// Provider backed by a closure, convenient for hand-built pencils.
#[derive(Clone)]
pub struct FnProvider {
    f: Arc<PencilFn>,
    affine: bool,
    name: String,
}

impl FnProvider {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> Result<Pencil> + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            affine: false,
            name: "p".to_string(),
        }
    }

    pub fn affine(mut self, affine: bool) -> Self {
        self.affine = affine;
        self
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

impl PencilProvider for FnProvider {
    fn pencil(&self, p: f64) -> Result<Pencil> {
        (self.f)(p)
    }
    fn is_affine(&self) -> bool {
        self.affine
    }
    fn parameter_name(&self) -> String {
        self.name.clone()
    }
}

/// Provider that solves the model equilibrium and linearizes at each `p`.
///
/// The last equilibrium is kept as the warm start for the next solve.
/// Cloning copies the cached equilibrium into an independent cache, so each
/// tracker should own its clone.
pub struct ModelProvider<M: DaeModel> {
    model: Arc<M>,
    fd: FdOptions,
    warm: Mutex<Option<Equilibrium>>,
}

impl<M: DaeModel> Clone for ModelProvider<M> {
    fn clone(&self) -> Self {
        let warm = self.warm.lock().map(|w| w.clone()).unwrap_or(None);
        Self {
            model: Arc::clone(&self.model),
            fd: self.fd,
            warm: Mutex::new(warm),
        }
    }
}

impl<M: DaeModel> ModelProvider<M> {
    pub fn new(model: M) -> Self {
        Self::from_arc(Arc::new(model))
    }

    pub fn from_arc(model: Arc<M>) -> Self {
        Self {
            model,
            fd: FdOptions::default(),
            warm: Mutex::new(None),
        }
    }

    pub fn with_fd_options(mut self, fd: FdOptions) -> Self {
        self.fd = fd;
        self
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Equilibrium at `p`, warm-started from the cached one.
    pub fn equilibrium(&self, p: f64) -> Result<Equilibrium> {
        let warm = self.warm.lock().ok().and_then(|w| w.clone());
        let eq = self.model.equilibrium(p, warm.as_ref())?;
        if let Ok(mut w) = self.warm.lock() {
            *w = Some(eq.clone());
        }
        Ok(eq)
    }
}

impl<M: DaeModel> PencilProvider for ModelProvider<M> {
    fn pencil(&self, p: f64) -> Result<Pencil> {
        let eq = self.equilibrium(p)?;
        let blocks = linearize(self.model.as_ref(), &eq, &self.fd)?;
        assemble_pencil(&blocks)
    }

    fn is_affine(&self) -> bool {
        self.model.affine_in_parameter()
    }

    fn parameter_name(&self) -> String {
        self.model.parameter().name
    }
}

/// Wraps a provider and exposes the reduced explicit pencil `(I, A_red)`.
#[derive(Clone)]
pub struct ReducedProvider<P> {
    inner: P,
}

impl<P: PencilProvider> ReducedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: PencilProvider> PencilProvider for ReducedProvider<P> {
    fn pencil(&self, p: f64) -> Result<Pencil> {
        let reduced = self.inner.pencil(p)?.reduce()?;
        let n = reduced.state_matrix.nrows();
        Pencil::new(
            SparseMatrix::identity(n),
            SparseMatrix::from_dense(&reduced.state_matrix, 0.0),
            n,
        )
    }

    fn parameter_name(&self) -> String {
        self.inner.parameter_name()
    }

    fn domain(&self) -> Option<(f64, f64)> {
        self.inner.domain()
    }
}
