//! Block updates. Each one leaves every other block untouched; with
//! `guard_updates` none of them increases the tracked objective.

use nalgebra::LU;

use super::config::{FitConfig, ImputationRule};
use super::graph::{column_objective, smooth_costs, solve_column, SparseGraph};
use super::objective::{graph_gram, laplacian_energy, orthogonality_penalty};
use super::state::{row_reweighting, Components, ModelState};
use crate::dataset::MaskMatrix;
use crate::error::{ClimError, Result};
use crate::numkit::{
    ensure_finite, l1_norm, l21_norm, laplacian, negative_part, positive_part, shrink, simplex_qp,
    solve_scaled_sylvester, Matrix, NumError, Vector,
};

const FSTAR_DAMPING_STEPS: usize = 12;
const FV_BACKTRACK_STEPS: usize = 30;
const CG_MAX_ITER: usize = 1000;
const CG_REL_TOL: f64 = 1e-12;

fn view_fit(x: &Matrix, w: &Matrix, f: &Matrix) -> f64 {
    (x - w * f.transpose()).norm_squared()
}

/// Sylvester step on every `W^v`, then refreshes `D^v`.
pub fn update_w(state: &mut ModelState, cfg: &FitConfig) -> Result<()> {
    for v in 0..state.n_views() {
        let f = state.factor(v);
        let g = f.transpose() * &f;
        let c = &state.xhat[v] * &f;
        let cand = solve_scaled_sylvester(&state.drow[v], cfg.lambda, &g, &c)?;
        ensure_finite(&cand, "W")?;
        let accept = !cfg.guard_updates || {
            let old = view_fit(&state.xhat[v], &state.w[v], &f) + cfg.lambda * l21_norm(&state.w[v]);
            let new = view_fit(&state.xhat[v], &cand, &f) + cfg.lambda * l21_norm(&cand);
            new <= old
        };
        if accept {
            state.w[v] = cand;
        }
        state.drow[v] = row_reweighting(&state.w[v], cfg.eps_dv);
    }
    Ok(())
}

/// Proximal Adam steps on every `F^v` with backtracking on the step scale.
pub fn update_fv(state: &mut ModelState, cfg: &FitConfig, comps: &Components) -> Result<()> {
    if !comps.view_specific {
        return Ok(());
    }
    for v in 0..state.n_views() {
        let x = &state.xhat[v];
        let w = &state.w[v];
        let u = w.transpose() * w;
        let xtw = x.transpose() * w;
        let objective = |fv: &Matrix| view_fit(x, w, &(fv + &state.fstar)) + cfg.beta * l1_norm(fv);
        let mut fv = state.fv[v].clone();
        let mut current = objective(&fv);
        for _ in 0..cfg.inner_fv_steps {
            let grad = ((&fv + &state.fstar) * &u - &xtw) * 2.0;
            let step = state.adam[v].step(grad.as_slice())?;
            let sizes = state.adam[v].step_sizes();
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..FV_BACKTRACK_STEPS {
                let mut cand = fv.clone();
                for (i, e) in cand.as_mut_slice().iter_mut().enumerate() {
                    *e = shrink(*e - scale * step[i], scale * cfg.beta * sizes[i]);
                }
                let val = objective(&cand);
                if !val.is_finite() {
                    return Err(NumError::NonFinite("F^v objective").into());
                }
                if !cfg.guard_updates || val <= current {
                    fv = cand;
                    current = val;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        state.fv[v] = fv;
    }
    Ok(())
}

/// Consensus-factor subproblem value: reconstruction + cluster Laplacian + orthogonality.
pub fn fstar_objective(state: &ModelState, fstar: &Matrix, cfg: &FitConfig, comps: &Components) -> f64 {
    let mut val = orthogonality_penalty(fstar, cfg.rho);
    for v in 0..state.n_views() {
        val += view_fit(&state.xhat[v], &state.w[v], &(&state.fv[v] + fstar));
    }
    if comps.cluster_structure {
        val += laplacian_energy(&fstar.transpose(), &state.h, cfg.symmetrize_laplacians);
    }
    val
}

/// Numerator and denominator of the multiplicative `F*` rule.
pub fn fstar_ratio_parts(state: &ModelState, cfg: &FitConfig, comps: &Components) -> (Matrix, Matrix) {
    let f = &state.fstar;
    let (n, c) = f.shape();
    let mut num = f * (2.0 * cfg.rho);
    let mut den = f * (f.transpose() * f) * (2.0 * cfg.rho);
    for v in 0..state.n_views() {
        let w = &state.w[v];
        let j = state.xhat[v].transpose() * w;
        let u = w.transpose() * w;
        let m = &state.fv[v] * &u;
        num += positive_part(&j) + negative_part(&m) + f * negative_part(&u);
        den += negative_part(&j) + positive_part(&m) + f * positive_part(&u);
    }
    if comps.cluster_structure {
        let h = if cfg.symmetrize_laplacians {
            (&state.h + state.h.transpose()) * 0.5
        } else {
            state.h.clone()
        };
        num += &h * f;
        let deg = Matrix::from_fn(n, c, |i, k| h.column(i).sum() * f[(i, k)]);
        den += deg;
    }
    (num, den)
}

/// Multiplicative update of `F*` (damped by powers of 1/2 when it would increase its subproblem).
pub fn update_fstar(state: &mut ModelState, cfg: &FitConfig, comps: &Components) -> Result<()> {
    let (num, den) = fstar_ratio_parts(state, cfg, comps);
    let ratio = num.zip_map(&den, |a, b| a / b.max(1e-12));
    ensure_finite(&ratio, "F* ratio")?;
    if !cfg.guard_updates {
        state.fstar = state.fstar.component_mul(&ratio);
        return Ok(());
    }
    let current = fstar_objective(state, &state.fstar, cfg, comps);
    let mut eta = 1.0;
    for _ in 0..FSTAR_DAMPING_STEPS {
        let cand = state.fstar.zip_map(&ratio, |f, r| f * r.powf(eta));
        if fstar_objective(state, &cand, cfg, comps) <= current {
            state.fstar = cand;
            return Ok(());
        }
        eta *= 0.5;
    }
    Ok(())
}

/// Column-wise closed-form update of every `S^v` (Gauss–Seidel over views).
pub fn update_s(state: &mut ModelState, cfg: &FitConfig, comps: &Components) -> Result<()> {
    if !comps.graph_learning {
        return Ok(());
    }
    let n = state.n_samples();
    let nv = state.n_views();
    let mut q = vec![0.0; n];
    for v in 0..nv {
        let av = state.alpha[v];
        let dist = smooth_costs(&state.xhat[v], cfg.symmetrize_laplacians);
        let mut others = Matrix::zeros(n, n);
        for m in (0..nv).filter(|&m| m != v) {
            others += &state.s[m] * (2.0 * av * state.alpha[m]);
        }
        let cost = dist - &state.h * av + others;
        for j in 0..n {
            q.copy_from_slice(cost.column(j).as_slice());
            q[j] = f64::INFINITY;
            let old_a = state.xi[v][j] + av * av;
            let sol = solve_column(&q, cfg.k)?;
            let new_a = sol.coefficient.unwrap_or(old_a);
            let accept = !cfg.guard_updates || {
                let old = column_objective(&q, state.s[v].column(j).as_slice(), old_a);
                column_objective(&q, &sol.weights, new_a) <= old
            };
            if accept {
                state.s[v].column_mut(j).copy_from_slice(&sol.weights);
                state.xi[v][j] = new_a - av * av;
            }
        }
    }
    Ok(())
}

/// Column-wise closed-form update of the consensus graph `H`.
pub fn update_h(state: &mut ModelState, cfg: &FitConfig, comps: &Components) -> Result<()> {
    if !comps.graph_learning {
        return Ok(());
    }
    let n = state.n_samples();
    let p = state.weighted_graph();
    let cost = if comps.cluster_structure {
        smooth_costs(&state.fstar.transpose(), cfg.symmetrize_laplacians) - p
    } else {
        -p
    };
    let mut b = vec![0.0; n];
    for j in 0..n {
        b.copy_from_slice(cost.column(j).as_slice());
        b[j] = f64::INFINITY;
        let old_a = state.gamma[j];
        let sol = solve_column(&b, cfg.k)?;
        let new_a = sol.coefficient.unwrap_or(old_a);
        let accept = !cfg.guard_updates || {
            let old = column_objective(&b, state.h.column(j).as_slice(), old_a);
            column_objective(&b, &sol.weights, new_a) <= old
        };
        if accept {
            state.h.column_mut(j).copy_from_slice(&sol.weights);
            state.gamma[j] = new_a;
        }
    }
    Ok(())
}

/// Exact simplex-QP update of the view weights.
pub fn update_alpha(state: &mut ModelState, cfg: &FitConfig, comps: &Components) -> Result<()> {
    if !comps.graph_learning {
        return Ok(());
    }
    let q = graph_gram(&state.s);
    let c = Vector::from_iterator(state.n_views(), state.s.iter().map(|s| -state.h.dot(s)));
    let cand = simplex_qp(&q, &c)?;
    let value = |a: &Vector| (a.transpose() * &q * a)[(0, 0)] + c.dot(a);
    if !cfg.guard_updates || value(&cand) <= value(&state.alpha) {
        state.alpha = cand;
    }
    Ok(())
}

fn missing_positions(mask: &nalgebra::DMatrix<bool>) -> Vec<usize> {
    mask.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &o)| !o)
        .map(|(i, _)| i)
        .collect()
}

/// Re-estimates the missing entries of every view; observed entries are left untouched.
pub fn update_xhat(state: &mut ModelState, masks: &MaskMatrix, cfg: &FitConfig, comps: &Components) -> Result<()> {
    if !comps.imputation {
        return Ok(());
    }
    if masks.n_views() != state.n_views() {
        return Err(ClimError::Shape("mask count differs from view count".into()));
    }
    for v in 0..state.n_views() {
        let missing = missing_positions(masks.view(v));
        if missing.is_empty() {
            continue;
        }
        let c = state.reconstruction(v);
        if !comps.graph_learning {
            let xs = state.xhat[v].as_mut_slice();
            for &i in &missing {
                xs[i] = c.as_slice()[i];
            }
            continue;
        }
        match cfg.imputation {
            ImputationRule::Masked => {
                let graph = SparseGraph::symmetrized(&state.s[v]);
                masked_cg(&mut state.xhat[v], &c, &graph, &missing);
            }
            ImputationRule::ClosedForm => {
                let l = laplacian(&state.s[v], cfg.symmetrize_laplacians)?;
                let n = l.nrows();
                let a = Matrix::identity(n, n) + &l;
                let r = LU::new(a.transpose())
                    .solve(&c.transpose())
                    .ok_or(NumError::SingularPencil(0.0))?
                    .transpose();
                let mut cand = state.xhat[v].clone();
                for &i in &missing {
                    cand.as_mut_slice()[i] = r.as_slice()[i];
                }
                ensure_finite(&cand, "X^")?;
                let sub = |x: &Matrix| {
                    (x - &c).norm_squared() + laplacian_energy(x, &state.s[v], cfg.symmetrize_laplacians)
                };
                if !cfg.guard_updates || sub(&cand) <= sub(&state.xhat[v]) {
                    state.xhat[v] = cand;
                }
            }
        }
    }
    Ok(())
}

/// Minimizes `‖X − C‖² + Tr(X L Xᵀ)` over the entries listed in `missing` by conjugate
/// gradients, starting from the current `x`.
fn masked_cg(x: &mut Matrix, c: &Matrix, graph: &SparseGraph, missing: &[usize]) {
    let apply = |full: &Matrix, tmp: &mut Matrix, out: &mut Vec<f64>| {
        graph.right_apply(full, tmp);
        let (fs, ts) = (full.as_slice(), tmp.as_slice());
        out.clear();
        out.extend(missing.iter().map(|&i| fs[i] + ts[i]));
    };
    let (d, n) = x.shape();
    let mut tmp = Matrix::zeros(d, n);
    let mut ax = Vec::with_capacity(missing.len());
    apply(x, &mut tmp, &mut ax);
    let cs = c.as_slice();
    let mut r: Vec<f64> = missing.iter().zip(&ax).map(|(&i, a)| cs[i] - a).collect();
    let scale = missing.iter().map(|&i| cs[i] * cs[i]).sum::<f64>().sqrt().max(1.0);
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|e| e * e).sum();
    let mut pfull = Matrix::zeros(d, n);
    let mut ap = Vec::with_capacity(missing.len());
    for _ in 0..CG_MAX_ITER {
        if rr.sqrt() <= CG_REL_TOL * scale {
            break;
        }
        for (&i, &pi) in missing.iter().zip(&p) {
            pfull.as_mut_slice()[i] = pi;
        }
        apply(&pfull, &mut tmp, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let step = rr / pap;
        let xs = x.as_mut_slice();
        for (k, &i) in missing.iter().enumerate() {
            xs[i] += step * p[k];
            r[k] -= step * ap[k];
        }
        let rr_new: f64 = r.iter().map(|e| e * e).sum();
        let beta = rr_new / rr;
        for (pk, rk) in p.iter_mut().zip(&r) {
            *pk = rk + beta * *pk;
        }
        rr = rr_new;
    }
}
