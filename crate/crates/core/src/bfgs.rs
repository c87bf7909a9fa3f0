//! BFGS descent of the energy of one movable group, with an exact
//! (bracket + golden-section) line search.

use crate::energy::{norm, GroupEnergy};
use crate::error::{Error, Result};
use crate::instance::{GroupSelection, Instance, Layout};

/// Below this the run counts as an overlap-free layout.
pub const ENERGY_THRESHOLD: f64 = 1e-20;
pub const GRADIENT_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Relative curvature floor; updates with `u.v` at or below it are skipped.
const CURVATURE_FLOOR: f64 = 1e-12;
const DISPLACEMENT: f64 = 1e-9;
const MAX_PERTURBATIONS: usize = 16;
const MAX_GOLDEN_STEPS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchSpec {
    /// First probe of the bracketing phase.
    pub initial_step: f64,
    pub alpha_max: f64,
    pub epsilon: f64,
    pub max_expansions: u32,
}

impl Default for LineSearchSpec {
    fn default() -> Self {
        LineSearchSpec {
            initial_step: 1.0,
            alpha_max: 1e6,
            epsilon: 1e-8,
            max_expansions: 64,
        }
    }
}

impl LineSearchSpec {
    pub fn new(alpha_max: f64, epsilon: f64, max_expansions: u32) -> Result<Self> {
        if !(epsilon > 0.0) || !(alpha_max >= epsilon) || !alpha_max.is_finite() || max_expansions == 0 {
            return Err(Error::Domain(format!(
                "line search needs 0 < epsilon <= alpha_max and at least one expansion \
                 (got epsilon {epsilon}, alpha_max {alpha_max}, expansions {max_expansions})"
            )));
        }
        Ok(LineSearchSpec {
            initial_step: 1.0f64.min(alpha_max),
            alpha_max,
            epsilon,
            max_expansions,
        })
    }
}

/// Inverse-Hessian approximation, stored dense and row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BfgsState {
    dim: usize,
    h: Vec<f64>,
    pub gradient: Vec<f64>,
    pub iteration: usize,
}

impl BfgsState {
    pub fn identity(dim: usize) -> Self {
        let mut h = vec![0.0; dim * dim];
        for i in 0..dim {
            h[i * dim + i] = 1.0;
        }
        BfgsState {
            dim,
            h,
            gradient: vec![0.0; dim],
            iteration: 0,
        }
    }

    /// Panics unless `h` is `dim * dim` long.
    pub fn from_matrix(dim: usize, h: Vec<f64>) -> Self {
        assert_eq!(h.len(), dim * dim, "matrix must be dim x dim");
        BfgsState {
            dim,
            h,
            gradient: vec![0.0; dim],
            iteration: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.h
    }

    pub fn reset(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            self.h[i * self.dim + i] = 1.0;
        }
    }

    /// `max |H_ab - H_ba|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in a + 1..self.dim {
                worst = worst.max((self.h[a * self.dim + b] - self.h[b * self.dim + a]).abs());
            }
        }
        worst
    }

    /// `-H g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        self.h
            .chunks_exact(self.dim)
            .map(|row| -dot(row, g))
            .collect()
    }

    /// Applies `H <- (I - rho v u^T)^T H (I - rho v u^T) + rho u u^T` with
    /// `rho = 1 / u^T v`, expanded so it costs O(dim^2). Returns false (and
    /// leaves `H` alone) when the curvature condition fails.
    pub fn update(&mut self, u: &[f64], v: &[f64]) -> bool {
        assert_eq!(u.len(), self.dim);
        assert_eq!(v.len(), self.dim);
        let uv = dot(u, v);
        if !(uv > CURVATURE_FLOOR * norm(u) * norm(v)) {
            return false;
        }
        let rho = 1.0 / uv;
        let hv: Vec<f64> = self.h.chunks_exact(self.dim).map(|row| dot(row, v)).collect();
        let vhv = dot(v, &hv);
        let outer = rho * rho * vhv + rho;
        for a in 0..self.dim {
            let row = &mut self.h[a * self.dim..(a + 1) * self.dim];
            let (ua, wa) = (u[a], hv[a]);
            for b in 0..row.len() {
                row[b] += outer * (ua * u[b]) - rho * (ua * hv[b] + wa * u[b]);
            }
        }
        true
    }
}

pub fn bfgs_update(mut state: BfgsState, u: &[f64], v: &[f64]) -> BfgsState {
    state.update(u, v);
    state
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `phi` over `alpha > 0`, given `phi(0)`.
///
/// Doubles a probe from `initial_step` until the value stops decreasing (or
/// `alpha_max` is hit), then narrows the last bracket by golden section until
/// it is at most `epsilon` wide. Starting far below the natural quasi-Newton
/// step of 1 puts the first probes under floating-point resolution once the
/// direction gets small, so the default starts at 1.
///
/// The result never has a larger value than `phi(0)`; it is zero only when no
/// probe improved on the start.
pub(crate) fn exact_step(mut phi: impl FnMut(f64) -> f64, phi0: f64, spec: &LineSearchSpec) -> f64 {
    let mut best = (0.0, phi0);
    let mut probe = |alpha: f64, best: &mut (f64, f64)| {
        let value = phi(alpha);
        if value < best.1 {
            *best = (alpha, value);
        }
        value
    };

    let (mut lo, mut mid, mut f_mid) = (0.0, 0.0, phi0);
    let mut hi = spec.initial_step.clamp(spec.epsilon, spec.alpha_max);
    let mut f_hi = probe(hi, &mut best);
    let mut expansions = 0;
    while f_hi < f_mid {
        if hi >= spec.alpha_max || expansions >= spec.max_expansions {
            return hi;
        }
        lo = mid;
        mid = hi;
        f_mid = f_hi;
        hi = (2.0 * hi).min(spec.alpha_max);
        f_hi = probe(hi, &mut best);
        expansions += 1;
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = probe(c, &mut best);
    let mut fd = probe(d, &mut best);
    let mut steps = 0;
    while b - a > spec.epsilon && steps < MAX_GOLDEN_STEPS {
        // Ties move left so flat valleys resolve to their nearest edge.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = probe(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = probe(d, &mut best);
        }
        steps += 1;
    }
    let center = 0.5 * (a + b);
    let f_center = probe(center, &mut best);
    if f_center <= best.1 {
        center
    } else {
        best.0
    }
}

/// Bisection on the sign of `phi'`, for when values alone no longer resolve
/// the minimizer: near a minimum with positive energy the decrease left is
/// below the rounding of `phi` long before the gradient is small.
/// `slope` returns `None` if `phi'` cannot be evaluated, and so does this.
pub(crate) fn slope_step(mut slope: impl FnMut(f64) -> Option<f64>, spec: &LineSearchSpec) -> Option<f64> {
    let mut hi = spec.initial_step.clamp(spec.epsilon, spec.alpha_max);
    let mut lo = 0.0;
    let mut expansions = 0;
    while slope(hi)? < 0.0 && hi < spec.alpha_max && expansions < spec.max_expansions {
        lo = hi;
        hi = (2.0 * hi).min(spec.alpha_max);
        expansions += 1;
    }
    let mut steps = 0;
    while hi - lo > spec.epsilon * hi && steps < MAX_GOLDEN_STEPS {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Some(0.5 * (lo + hi))
}

/// Exact step length along `direction` for the selected circles.
///
/// `direction` is laid out like the flattened selection (`[dx_0, dy_0, ...]`).
/// Fails with [`Error::NotDescent`] unless the directional derivative of the
/// subset energy is negative.
pub fn line_search(
    layout: &Layout,
    selection: &GroupSelection,
    instance: &Instance,
    direction: &[f64],
    spec: &LineSearchSpec,
) -> Result<f64> {
    instance.check_layout(layout)?;
    selection.check_against(instance)?;
    let mut eval = GroupEnergy::new(layout.centers(), selection.indices(), instance.radius());
    if direction.len() != eval.dim() {
        return Err(Error::Domain(format!(
            "direction has length {}, expected {}",
            direction.len(),
            eval.dim()
        )));
    }
    let x = eval.gather();
    let mut g = vec![0.0; x.len()];
    let f0 = eval.energy_and_gradient(&x, &mut g)?;
    let slope = dot(&g, direction);
    if !(slope < 0.0) {
        return Err(Error::NotDescent { slope });
    }
    let mut trial = x.clone();
    Ok(exact_step(
        |alpha| {
            axpy_into(&mut trial, &x, alpha, direction);
            eval.energy(&trial)
        },
        f0,
        spec,
    ))
}

fn axpy_into(out: &mut [f64], x: &[f64], alpha: f64, d: &[f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
        *o = xi + alpha * di;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBfgsOptions {
    pub max_iter: usize,
    pub energy_threshold: f64,
    pub gradient_threshold: f64,
    pub line_search: LineSearchSpec,
}

impl Default for LocalBfgsOptions {
    fn default() -> Self {
        LocalBfgsOptions {
            max_iter: DEFAULT_MAX_ITER,
            energy_threshold: ENERGY_THRESHOLD,
            gradient_threshold: GRADIENT_THRESHOLD,
            line_search: LineSearchSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    EnergyThreshold,
    GradientThreshold,
    MaxIterations,
    /// Neither the quasi-Newton nor the steepest-descent direction yields any
    /// decrease at line-search resolution.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalBfgsResult {
    /// Whole layout; only the selected circles differ from the input.
    pub layout: Layout,
    pub entry_energy: f64,
    pub final_energy: f64,
    pub final_gradient_norm: f64,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    /// Subset energy at entry and after every step.
    pub energy_trace: Vec<f64>,
    /// Coincident-center displacements applied along the way.
    pub perturbations: usize,
    /// Largest `|H_ab - H_ba|` seen after any update.
    pub max_asymmetry: f64,
}

pub(crate) struct GroupDescent {
    pub x: Vec<f64>,
    pub entry_energy: f64,
    pub final_energy: f64,
    pub final_gradient_norm: f64,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    pub energy_trace: Vec<f64>,
    pub perturbations: usize,
    pub max_asymmetry: f64,
}

/// BFGS on the selected circles with everything else frozen.
pub fn local_bfgs(
    layout: &Layout,
    selection: &GroupSelection,
    instance: &Instance,
    options: &LocalBfgsOptions,
) -> Result<LocalBfgsResult> {
    instance.check_layout(layout)?;
    selection.check_against(instance)?;
    if options.max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    let run = descend_group(layout, selection.indices(), instance.radius(), options)?;
    let mut out = layout.clone();
    scatter(&mut out, selection.indices(), &run.x);
    Ok(LocalBfgsResult {
        layout: out,
        entry_energy: run.entry_energy,
        final_energy: run.final_energy,
        final_gradient_norm: run.final_gradient_norm,
        iterations_used: run.iterations_used,
        stop_reason: run.stop_reason,
        energy_trace: run.energy_trace,
        perturbations: run.perturbations,
        max_asymmetry: run.max_asymmetry,
    })
}

pub(crate) fn scatter(layout: &mut Layout, selection: &[usize], x: &[f64]) {
    let centers = layout.centers_mut();
    for (k, &i) in selection.iter().enumerate() {
        centers[i].x = x[2 * k];
        centers[i].y = x[2 * k + 1];
    }
}

/// Energy and gradient at `x`, nudging coincident overlapping circles apart
/// first if needed.
fn evaluate_regular(
    eval: &mut GroupEnergy<'_>,
    selection: &[usize],
    n: usize,
    x: &mut [f64],
    grad: &mut [f64],
    perturbations: &mut usize,
) -> Result<f64> {
    let mut attempts = 0;
    loop {
        match eval.energy_and_gradient(x, grad) {
            Err(Error::Singular { first, second, .. }) if attempts < MAX_PERTURBATIONS => {
                let moved = match selection.binary_search(&second) {
                    Ok(slot) => (second, slot),
                    Err(_) => (first, selection.binary_search(&first).expect("one side is selected")),
                };
                let angle = std::f64::consts::TAU * (moved.0 + 1) as f64 / n as f64;
                x[2 * moved.1] += DISPLACEMENT * angle.cos();
                x[2 * moved.1 + 1] += DISPLACEMENT * angle.sin();
                *perturbations += 1;
                attempts += 1;
            }
            other => return other,
        }
    }
}

pub(crate) fn descend_group(
    layout: &Layout,
    selection: &[usize],
    radius: f64,
    options: &LocalBfgsOptions,
) -> Result<GroupDescent> {
    let n = layout.len();
    let mut eval = GroupEnergy::new(layout.centers(), selection, radius);
    let dim = eval.dim();
    let mut x = eval.gather();
    let mut g = vec![0.0; dim];
    let mut perturbations = 0;
    evaluate_regular(&mut eval, selection, n, &mut x, &mut g, &mut perturbations)?;
    let mut f = eval.precise_energy(&x);
    let entry_energy = f;
    let mut trace = vec![f];
    let mut g_norm = norm(&g);

    let finish = |x: Vec<f64>, f: f64, g_norm: f64, iterations: usize, stop: StopReason, trace: Vec<f64>, perturbations: usize, asym: f64| GroupDescent {
        x,
        entry_energy,
        final_energy: f,
        final_gradient_norm: g_norm,
        iterations_used: iterations,
        stop_reason: stop,
        energy_trace: trace,
        perturbations,
        max_asymmetry: asym,
    };

    if f <= options.energy_threshold {
        return Ok(finish(x, f, g_norm, 0, StopReason::EnergyThreshold, trace, perturbations, 0.0));
    }
    if g_norm <= options.gradient_threshold {
        return Ok(finish(x, f, g_norm, 0, StopReason::GradientThreshold, trace, perturbations, 0.0));
    }

    let mut state = BfgsState::identity(dim);
    let mut fresh = true;
    let mut max_asymmetry: f64 = 0.0;
    let mut trial = vec![0.0; dim];
    let mut x_next = vec![0.0; dim];
    let mut g_next = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];

    let stop = loop {
        if state.iteration >= options.max_iter {
            break StopReason::MaxIterations;
        }
        let mut d = state.direction(&g);
        if !(dot(&g, &d) < 0.0) {
            state.reset();
            fresh = true;
            d = g.iter().map(|gi| -gi).collect();
        }
        let alpha = exact_step(
            |alpha| {
                axpy_into(&mut trial, &x, alpha, &d);
                eval.energy(&trial)
            },
            f,
            &options.line_search,
        );
        // Steps are judged by the precise energy; when the line search finds
        // nothing there, the slope still may.
        axpy_into(&mut x_next, &x, alpha, &d);
        let mut accepted = improves(&mut eval, &x, &x_next, f);
        if accepted.is_none() {
            let refined = slope_step(
                |alpha| {
                    axpy_into(&mut trial, &x, alpha, &d);
                    eval.energy_and_gradient(&trial, &mut g_next).ok()?;
                    Some(dot(&g_next, &d))
                },
                &options.line_search,
            );
            if let Some(alpha) = refined {
                axpy_into(&mut x_next, &x, alpha, &d);
                accepted = improves(&mut eval, &x, &x_next, f);
            }
        }
        let Some(mut f_next) = accepted else {
            if fresh {
                break StopReason::Stalled;
            }
            state.reset();
            fresh = true;
            continue;
        };
        let before = perturbations;
        evaluate_regular(&mut eval, selection, n, &mut x_next, &mut g_next, &mut perturbations)?;
        if perturbations != before {
            f_next = eval.precise_energy(&x_next);
        }
        state.iteration += 1;
        trace.push(f_next);
        for k in 0..dim {
            u[k] = x_next[k] - x[k];
            v[k] = g_next[k] - g[k];
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut g, &mut g_next);
        f = f_next;
        g_norm = norm(&g);
        if f <= options.energy_threshold {
            break StopReason::EnergyThreshold;
        }
        if g_norm <= options.gradient_threshold {
            break StopReason::GradientThreshold;
        }
        if state.update(&u, &v) {
            fresh = false;
            max_asymmetry = max_asymmetry.max(state.asymmetry_if_small());
        }
    };
    state.gradient.copy_from_slice(&g);
    let iterations = state.iteration;
    Ok(finish(x, f, g_norm, iterations, stop, trace, perturbations, max_asymmetry))
}

/// Precise energy at `next` if it moved and did not go up.
fn improves(eval: &mut GroupEnergy<'_>, x: &[f64], next: &[f64], f: f64) -> Option<f64> {
    if next == x {
        return None;
    }
    let value = eval.precise_energy(next);
    (value <= f).then_some(value)
}

impl BfgsState {
    /// Asymmetry check is O(dim^2); only done for small groups in the hot loop.
    fn asymmetry_if_small(&self) -> f64 {
        if self.dim <= 64 {
            self.asymmetry()
        } else {
            0.0
        }
    }
}
