use crate::error::{invalid, numerical, Result};
use crate::math::dot;
use crate::model::{project_in_place, DomainSpec, ModelParams, OfflineData};

/// Projected gradient step `Pi(w - eta grad)`.
pub fn uogd_step(w: &ModelParams, grad: &ModelParams, eta: f64, domain: &DomainSpec) -> Result<ModelParams> {
    if !(eta > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    if !w.same_shape(grad) {
        return Err(invalid("gradient shape does not match the model"));
    }
    if !grad.is_finite() {
        return Err(numerical("non-finite gradient"));
    }
    let mut out = w.clone();
    out.axpy(-eta, grad);
    project_in_place(&mut out, domain);
    Ok(out)
}

/// A differentiable function of the parameters.
pub trait Objective {
    fn value_grad(&self, w: &ModelParams) -> Result<(f64, ModelParams)>;
}

/// `H(w) = sum_k h[k] R_k(w)` over the offline per-class risks.
#[derive(Debug, Clone, Copy)]
pub struct HintObjective<'a> {
    pub hint: &'a [f64],
    pub offline: &'a OfflineData,
}

impl Objective for HintObjective<'_> {
    fn value_grad(&self, w: &ModelParams) -> Result<(f64, ModelParams)> {
        let (v, g) = self.offline.weighted_risk(w, self.hint, true)?;
        Ok((v, g.expect("gradient requested")))
    }
}

impl<F> Objective for F
where
    F: Fn(&ModelParams) -> Result<(f64, ModelParams)>,
{
    fn value_grad(&self, w: &ModelParams) -> Result<(f64, ModelParams)> {
        self(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConfig {
    /// Stop once the gradient-mapping norm drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutcome {
    pub w: ModelParams,
    /// `eta H(w) + ||w - w_hat||^2 / 2` at the output.
    pub objective: f64,
    /// Objective at `w_hat`.
    pub start_objective: f64,
    /// Final gradient-mapping norm.
    pub residual: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Last accepted backtracking step.
    pub step: f64,
}

/// `argmin_{w in W} eta H(w) + ||w - w_hat||^2 / 2` by projected gradient
/// descent with backtracking, started at `w_hat`. The objective never
/// increases across iterations.
pub fn prox_solve<O: Objective + ?Sized>(
    w_hat: &ModelParams,
    hint: &O,
    eta: f64,
    domain: &DomainSpec,
    config: &ProxConfig,
) -> Result<ProxOutcome> {
    prox_solve_from(w_hat, hint, eta, domain, config, 1.0)
}

/// [`prox_solve`] with the line search starting at `initial_step`, capped
/// at 1.
pub fn prox_solve_from<O: Objective + ?Sized>(
    w_hat: &ModelParams,
    hint: &O,
    eta: f64,
    domain: &DomainSpec,
    config: &ProxConfig,
    initial_step: f64,
) -> Result<ProxOutcome> {
    if !(eta > 0.0) {
        return Err(invalid("step size must be positive"));
    }
    if !(initial_step > 0.0) {
        return Err(invalid("initial step must be positive"));
    }
    let mut w = w_hat.clone();
    let (hv, hg) = hint.value_grad(&w)?;
    let mut evaluations = 1;
    let mut phi = eta * hv;
    let start_objective = phi;
    // Gradient of the prox objective; the quadratic term vanishes at w_hat.
    let mut g = hg;
    g.scale(eta);
    let mut step = initial_step.min(1.0);
    let mut iterations = 0;
    let mut residual;
    loop {
        let mut probe = w.clone();
        probe.axpy(-1.0, &g);
        project_in_place(&mut probe, domain);
        residual = probe.distance(&w);
        if residual < config.tol || iterations >= config.max_iters {
            break;
        }
        let (cand, phi_c, g_c) = loop {
            let mut cand = w.clone();
            cand.axpy(-step, &g);
            project_in_place(&mut cand, domain);
            let (cv, cg) = hint.value_grad(&cand)?;
            evaluations += 1;
            let mut diff = cand.clone();
            diff.axpy(-1.0, &w);
            let mut to_hat = cand.clone();
            to_hat.axpy(-1.0, w_hat);
            let phi_c = eta * cv + 0.5 * dot(to_hat.as_slice(), to_hat.as_slice());
            let bound = phi + dot(g.as_slice(), diff.as_slice())
                + dot(diff.as_slice(), diff.as_slice()) / (2.0 * step);
            if phi_c <= bound + 1e-12 * phi.abs().max(1.0) {
                let mut g_c = cg;
                g_c.scale(eta);
                g_c.axpy(1.0, &to_hat);
                break (cand, phi_c, g_c);
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(numerical("prox line search failed"));
            }
        };
        if !(phi_c <= phi + 1e-10 * phi.abs().max(1.0)) {
            return Err(numerical("prox objective increased"));
        }
        w = cand;
        phi = phi_c;
        g = g_c;
        iterations += 1;
    }
    if !w.is_finite() {
        return Err(numerical("prox produced non-finite parameters"));
    }
    Ok(ProxOutcome {
        w,
        objective: phi,
        start_objective,
        residual,
        iterations,
        evaluations,
        step,
    })
}

/// One base update of the optimistic ensemble:
/// `w_hat' = Pi(w_hat - eta grad_prev)` and
/// `w' = argmin_{w in W} eta H(w) + ||w - w_hat'||^2 / 2`.
pub fn implicit_base_step<O: Objective + ?Sized>(
    w_hat: &ModelParams,
    grad_prev: &ModelParams,
    hint: &O,
    eta: f64,
    domain: &DomainSpec,
    config: &ProxConfig,
) -> Result<(ModelParams, ModelParams)> {
    let w_hat_next = uogd_step(w_hat, grad_prev, eta, domain)?;
    let out = prox_solve(&w_hat_next, hint, eta, domain, config)?;
    Ok((w_hat_next, out.w))
}
