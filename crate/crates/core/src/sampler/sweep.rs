//! One Gibbs sweep: coefficients and scalar parameters of every sub-model,
//! missing values, random effects and their covariance matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::graph::Family;

use super::density as dens;
use super::engine::{Engine, ImpKind};
use super::linalg::{mvn_canonical, std_normal, wishart};
use super::mh::accept;
use super::state::{ChainState, Steps};

/// The shared ridge precision has a fixed Gamma(0.01, 0.01) prior.
const RIDGE_SHAPE: f64 = 0.01;
const RIDGE_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug)]
enum Scalar {
    Tau,
    Shape,
    Gamma1,
    Delta(usize),
}

struct Ctx {
    iter: usize,
    n_adapt: usize,
}

fn model_message(e: Error) -> String {
    match e {
        Error::Model(m) => m,
        e => e.to_string(),
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters").sample(rng)
}

impl Engine {
    /// Runs one full sweep at iteration `iter` (1-based, adaptation first).
    pub fn sweep(&self, st: &mut ChainState, iter: usize, n_adapt: usize) -> Result<()> {
        let ctx = Ctx { iter, n_adapt };
        for m in 0..self.models.len() {
            self.update_model(m, st, &ctx)?;
        }
        for t in 0..self.imps.len() {
            self.update_imputation(t, st, &ctx)?;
        }
        for m in 0..self.models.len() {
            if self.models[m].ranef.is_some() {
                self.update_ranef(m, st, &ctx)?;
            }
        }
        for m in 0..self.models.len() {
            if self.models[m].ranef.is_some() {
                self.update_covariance(m, st, &ctx)?;
            }
        }
        Ok(())
    }

    fn sampler_error(&self, st: &ChainState, ctx: &Ctx, node: String, message: &str) -> Error {
        Error::Sampler {
            chain: st.chain + 1,
            iteration: ctx.iter,
            node,
            message: message.to_string(),
        }
    }

    /// Fixed part of the linear predictor(s) at every unit.
    fn eta_fixed(&self, m: usize, st: &ChainState) -> Vec<f64> {
        let cm = &self.models[m];
        let ms = &st.models[m];
        let (p, n_lp) = (cm.p, cm.n_lp);
        let mut eta = vec![0.0; cm.n_units() * n_lp];
        for u in 0..cm.n_units() {
            let x = &ms.x[u * p..(u + 1) * p];
            for k in 0..n_lp {
                let b = &ms.beta[k * p..(k + 1) * p];
                eta[u * n_lp + k] = x.iter().zip(b).map(|(a, b)| a * b).sum();
            }
        }
        eta
    }

    fn ranef_offset(&self, m: usize, st: &ChainState, u: usize) -> f64 {
        let cm = &self.models[m];
        match &cm.ranef {
            Some(r) => {
                let g = r.group_of_unit[u];
                (0..r.q).map(|l| r.z[u * r.q + l] * st.models[m].b[g * r.q + l]).sum()
            }
            None => 0.0,
        }
    }

    fn eta_full(&self, m: usize, st: &ChainState) -> Vec<f64> {
        let mut eta = self.eta_fixed(m, st);
        let n_lp = self.models[m].n_lp;
        if self.models[m].ranef.is_some() {
            for u in 0..self.models[m].n_units() {
                eta[u * n_lp] += self.ranef_offset(m, st, u);
            }
        }
        eta
    }

    fn loglik_units(&self, m: usize, st: &ChainState, eta: &[f64]) -> Vec<f64> {
        let n_lp = self.models[m].n_lp;
        (0..self.models[m].n_units())
            .map(|u| self.unit_loglik(m, st, u, &eta[u * n_lp..(u + 1) * n_lp]))
            .collect()
    }

    fn response(&self, m: usize, st: &ChainState, u: usize) -> f64 {
        let cm = &self.models[m];
        let y = st.values[cm.var][cm.design.unit_rows[u]];
        if cm.family == Family::Lognormal {
            y.ln()
        } else {
            y
        }
    }

    fn prior_precision(&self, m: usize, st: &ChainState) -> f64 {
        if self.models[m].ridge {
            st.models[m].ridge
        } else {
            self.models[m].prior.tau_reg
        }
    }

    fn update_model(&self, m: usize, st: &mut ChainState, ctx: &Ctx) -> Result<()> {
        let cm = &self.models[m];
        if cm.ridge {
            let mu = cm.prior.mu_reg;
            let ss: f64 = st.models[m].beta.iter().map(|b| (b - mu).powi(2)).sum();
            let n = cm.n_coef() as f64;
            st.models[m].ridge = gamma_draw(RIDGE_SHAPE + 0.5 * n, RIDGE_RATE + 0.5 * ss, &mut st.rng);
        }
        if cm.conjugate {
            self.conjugate_beta(m, st, ctx)?;
            self.conjugate_tau(m, st);
            return Ok(());
        }
        let mut eta = self.eta_full(m, st);
        let mut ll = self.loglik_units(m, st, &eta);
        self.mh_coefficients(m, st, ctx, &mut eta, &mut ll)?;
        match cm.family {
            Family::Gaussian => self.gaussian_tau(m, st, &eta),
            Family::Gamma | Family::Beta => self.mh_scalar(m, st, ctx, Scalar::Tau, &eta, &mut ll)?,
            Family::Weibull => self.mh_scalar(m, st, ctx, Scalar::Shape, &eta, &mut ll)?,
            Family::Ordinal => {
                self.mh_scalar(m, st, ctx, Scalar::Gamma1, &eta, &mut ll)?;
                for k in 0..st.models[m].delta.len() {
                    self.mh_scalar(m, st, ctx, Scalar::Delta(k), &eta, &mut ll)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn conjugate_beta(&self, m: usize, st: &mut ChainState, ctx: &Ctx) -> Result<()> {
        let cm = &self.models[m];
        let p = cm.p;
        let tau = st.models[m].tau;
        let mut q = DMatrix::<f64>::zeros(p, p);
        let mut r = DVector::<f64>::zeros(p);
        for u in 0..cm.n_units() {
            let x = &st.models[m].x[u * p..(u + 1) * p];
            let resid = self.response(m, st, u) - self.ranef_offset(m, st, u);
            for a in 0..p {
                r[a] += tau * x[a] * resid;
                for b in 0..=a {
                    q[(a, b)] += tau * x[a] * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                q[(b, a)] = q[(a, b)];
            }
            let prec = self.prior_precision(m, st);
            q[(a, a)] += prec;
            r[a] += prec * cm.prior.mu_reg;
        }
        let draw = mvn_canonical(q, &r, &mut st.rng)
            .map_err(|e| self.sampler_error(st, ctx, format!("coefficients of '{}'", cm.name()), &model_message(e)))?;
        st.models[m].beta.copy_from_slice(draw.as_slice());
        Ok(())
    }

    fn conjugate_tau(&self, m: usize, st: &mut ChainState) {
        let cm = &self.models[m];
        let eta = self.eta_full(m, st);
        let ssr: f64 = (0..cm.n_units())
            .map(|u| (self.response(m, st, u) - eta[u]).powi(2))
            .sum();
        let n = cm.n_units() as f64;
        st.models[m].tau = gamma_draw(cm.prior.shape_tau + 0.5 * n, cm.prior.rate_tau + 0.5 * ssr, &mut st.rng);
    }

    fn gaussian_tau(&self, m: usize, st: &mut ChainState, eta: &[f64]) {
        let cm = &self.models[m];
        let ssr: f64 = (0..cm.n_units())
            .map(|u| (self.response(m, st, u) - cm.link.inverse(eta[u])).powi(2))
            .sum();
        let n = cm.n_units() as f64;
        st.models[m].tau = gamma_draw(cm.prior.shape_tau + 0.5 * n, cm.prior.rate_tau + 0.5 * ssr, &mut st.rng);
    }

    fn mh_coefficients(
        &self,
        m: usize,
        st: &mut ChainState,
        ctx: &Ctx,
        eta: &mut [f64],
        ll: &mut [f64],
    ) -> Result<()> {
        let cm = &self.models[m];
        let (p, n_lp) = (cm.p, cm.n_lp);
        let mu = cm.prior.mu_reg;
        let mut buf = vec![0.0; n_lp];
        let mut changed: Vec<(usize, f64)> = Vec::new();
        for k in 0..n_lp {
            for j in 0..p {
                let idx = k * p + j;
                let old = st.models[m].beta[idx];
                let new = old + st.steps[m].beta[idx].scale() * std_normal(&mut st.rng);
                let prec = self.prior_precision(m, st);
                let mut lr = -0.5 * prec * ((new - mu).powi(2) - (old - mu).powi(2));
                let d = new - old;
                changed.clear();
                st.models[m].beta[idx] = new;
                for u in 0..cm.n_units() {
                    let x = st.models[m].x[u * p + j];
                    if x == 0.0 {
                        continue;
                    }
                    buf.copy_from_slice(&eta[u * n_lp..(u + 1) * n_lp]);
                    buf[k] += d * x;
                    let nl = self.unit_loglik(m, st, u, &buf);
                    lr += nl - ll[u];
                    changed.push((u, nl));
                    if lr == f64::NEG_INFINITY {
                        break;
                    }
                }
                if lr.is_nan() {
                    return Err(self.sampler_error(st, ctx, format!("{}[{}]", cm.name(), idx + 1), "log acceptance ratio is NaN"));
                }
                let ok = accept(lr, st.rng.random());
                if ok {
                    for &(u, nl) in &changed {
                        eta[u * n_lp + k] += d * st.models[m].x[u * p + j];
                        ll[u] = nl;
                    }
                } else {
                    st.models[m].beta[idx] = old;
                }
                st.steps[m].beta[idx].record(ok, ctx.iter, ctx.n_adapt);
            }
        }
        Ok(())
    }

    fn mh_scalar(
        &self,
        m: usize,
        st: &mut ChainState,
        ctx: &Ctx,
        which: Scalar,
        eta: &[f64],
        ll: &mut Vec<f64>,
    ) -> Result<()> {
        let cm = &self.models[m];
        let step = |s: &mut Steps| -> f64 {
            match which {
                Scalar::Tau => s.tau.scale(),
                Scalar::Shape => s.shape.scale(),
                Scalar::Gamma1 => s.gamma1.scale(),
                Scalar::Delta(k) => s.delta[k].scale(),
            }
        };
        let scale = step(&mut st.steps[m]);
        let z = std_normal(&mut st.rng);
        let ms = &mut st.models[m];
        let (old, new, log_prior_ratio) = match which {
            Scalar::Tau | Scalar::Shape => {
                let old = if matches!(which, Scalar::Tau) { ms.tau } else { ms.shape };
                let new = old * (scale * z).exp();
                // Gamma prior for precisions, exponential prior for the
                // Weibull shape, plus the log-scale Jacobian
                let lp = |v: f64| match which {
                    Scalar::Tau => dens::gamma_prior(v, cm.prior.shape_tau, cm.prior.rate_tau) + v.ln(),
                    _ => -cm.rate_shape * v + v.ln(),
                };
                (old, new, lp(new) - lp(old))
            }
            Scalar::Gamma1 => {
                let old = ms.gamma1;
                let new = old + scale * z;
                let t = cm.prior.tau_reg;
                let mu = cm.prior.mu_reg;
                (old, new, -0.5 * t * ((new - mu).powi(2) - (old - mu).powi(2)))
            }
            Scalar::Delta(k) => {
                let old = ms.delta[k];
                let new = old + scale * z;
                let t = cm.tau_delta;
                let mu = cm.mu_delta;
                (old, new, -0.5 * t * ((new - mu).powi(2) - (old - mu).powi(2)))
            }
        };
        let set = |ms: &mut super::state::ModelState, v: f64| match which {
            Scalar::Tau => ms.tau = v,
            Scalar::Shape => ms.shape = v,
            Scalar::Gamma1 => {
                ms.gamma1 = v;
                ms.set_thresholds();
            }
            Scalar::Delta(k) => {
                ms.delta[k] = v;
                ms.set_thresholds();
            }
        };
        set(&mut st.models[m], new);
        let n_lp = cm.n_lp;
        let new_ll: Vec<f64> = (0..cm.n_units())
            .map(|u| self.unit_loglik(m, st, u, &eta[u * n_lp..(u + 1) * n_lp]))
            .collect();
        let lr = new_ll.iter().sum::<f64>() - ll.iter().sum::<f64>() + log_prior_ratio;
        if lr.is_nan() {
            let node = match which {
                Scalar::Tau => format!("tau_{}", cm.name()),
                Scalar::Shape => format!("shape_{}", cm.name()),
                Scalar::Gamma1 => format!("gamma_{}[1]", cm.name()),
                Scalar::Delta(k) => format!("delta_{}[{}]", cm.name(), k + 1),
            };
            return Err(self.sampler_error(st, ctx, node, "log acceptance ratio is NaN"));
        }
        let ok = accept(lr, st.rng.random());
        if ok {
            *ll = new_ll;
        } else {
            set(&mut st.models[m], old);
        }
        let s = &mut st.steps[m];
        let a = match which {
            Scalar::Tau => &mut s.tau,
            Scalar::Shape => &mut s.shape,
            Scalar::Gamma1 => &mut s.gamma1,
            Scalar::Delta(k) => &mut s.delta[k],
        };
        a.record(ok, ctx.iter, ctx.n_adapt);
        Ok(())
    }

    /// Models whose likelihood involves missing value `t`, with the units
    /// affected.
    fn imputation_blanket(&self, t: usize) -> Vec<(usize, Vec<usize>)> {
        let target = &self.imps[t];
        let mut out = Vec::new();
        if let Some(m) = self.own[target.var] {
            out.push((m, self.units_touching(m, &target.rows)));
        }
        for &m in &self.users[target.var] {
            if out.iter().all(|(o, _)| *o != m) {
                out.push((m, self.units_touching(m, &target.rows)));
            }
        }
        out
    }

    fn blanket_loglik(&self, st: &ChainState, blanket: &[(usize, Vec<usize>)], buf: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for (m, units) in blanket {
            for &u in units {
                total += self.unit_loglik_fresh(*m, st, u, buf);
                if total == f64::NEG_INFINITY {
                    return total;
                }
            }
        }
        total
    }

    fn set_value(&self, st: &mut ChainState, t: usize, v: f64) {
        let target = &self.imps[t];
        for &r in &target.rows {
            st.values[target.var][r] = v;
        }
    }

    fn update_imputation(&self, t: usize, st: &mut ChainState, ctx: &Ctx) -> Result<()> {
        let target = &self.imps[t];
        let blanket = self.imputation_blanket(t);
        let mut buf = vec![0.0; self.models.iter().map(|c| c.n_lp).max().unwrap_or(1)];
        let old = st.values[target.var][target.rows[0]];
        let node = || {
            let name = &self.vt.metas[target.var].name;
            format!("imp_{name}[{}]", target.rows[0] + 1)
        };
        if let ImpKind::Categorical(k) = target.kind {
            let mut lp = Vec::with_capacity(k);
            for c in 0..k {
                self.set_value(st, t, c as f64);
                lp.push(self.blanket_loglik(st, &blanket, &mut buf));
            }
            let top = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top.is_nan() || top == f64::NEG_INFINITY {
                return Err(self.sampler_error(st, ctx, node(), "no category has positive probability"));
            }
            let w: Vec<f64> = lp.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut u = st.rng.random::<f64>() * total;
            let mut pick = k - 1;
            for (c, wc) in w.iter().enumerate() {
                if u < *wc {
                    pick = c;
                    break;
                }
                u -= wc;
            }
            self.set_value(st, t, pick as f64);
            self.refresh_design(st, target.var, &target.rows);
            return Ok(());
        }

        let scale = st.imp_steps[t].scale();
        let z = std_normal(&mut st.rng);
        let (new, log_jac) = match target.kind {
            ImpKind::Real => (old + scale * z, 0.0),
            ImpKind::Positive => {
                let new = old * (scale * z).exp();
                (new, new.ln() - old.ln())
            }
            ImpKind::Unit => {
                let lo = (old / (1.0 - old)).ln() + scale * z;
                let new = dens::sigmoid(lo);
                (new, (new * (1.0 - new)).ln() - (old * (1.0 - old)).ln())
            }
            ImpKind::Count => (old + if z < 0.0 { -1.0 } else { 1.0 }, 0.0),
            ImpKind::Categorical(_) => unreachable!(),
        };
        let in_support = match target.kind {
            ImpKind::Count => new >= 0.0,
            ImpKind::Positive => new > 0.0 && new.is_finite(),
            ImpKind::Unit => new > 0.0 && new < 1.0,
            _ => new.is_finite(),
        } && target.trunc.is_none_or(|tr| tr.contains(new));
        let ok = if in_support {
            let cur = self.blanket_loglik(st, &blanket, &mut buf);
            self.set_value(st, t, new);
            let prop = self.blanket_loglik(st, &blanket, &mut buf);
            let lr = prop - cur + log_jac;
            if lr.is_nan() {
                return Err(self.sampler_error(st, ctx, node(), "log acceptance ratio is NaN"));
            }
            let ok = accept(lr, st.rng.random());
            if !ok {
                self.set_value(st, t, old);
            }
            ok
        } else {
            false
        };
        if ok {
            self.refresh_design(st, target.var, &target.rows);
        }
        if target.kind != ImpKind::Count {
            st.imp_steps[t].record(ok, ctx.iter, ctx.n_adapt);
        }
        Ok(())
    }

    fn update_ranef(&self, m: usize, st: &mut ChainState, ctx: &Ctx) -> Result<()> {
        let cm = &self.models[m];
        let r = cm.ranef.as_ref().expect("mixed model");
        let q = r.q;
        if cm.model_type.is_gaussian_identity() {
            let eta = self.eta_fixed(m, st);
            let tau = st.models[m].tau;
            for g in 0..r.n_groups() {
                let mut prec = st.models[m].inv_d.clone();
                let mut rhs = DVector::<f64>::zeros(q);
                for &u in &r.units_of_group[g] {
                    let z = &r.z[u * q..(u + 1) * q];
                    let resid = self.response(m, st, u) - eta[u];
                    for a in 0..q {
                        rhs[a] += tau * z[a] * resid;
                        for b in 0..q {
                            prec[(a, b)] += tau * z[a] * z[b];
                        }
                    }
                }
                let draw = mvn_canonical(prec, &rhs, &mut st.rng)
                    .map_err(|e| self.sampler_error(st, ctx, format!("b_{}[{}]", cm.name(), g + 1), &model_message(e)))?;
                st.models[m].b[g * q..(g + 1) * q].copy_from_slice(draw.as_slice());
            }
            return Ok(());
        }

        let mut eta = self.eta_full(m, st);
        let n_lp = cm.n_lp;
        let mut buf = vec![0.0; n_lp];
        for g in 0..r.n_groups() {
            let scale = st.steps[m].b[g].scale();
            let old: Vec<f64> = st.models[m].b[g * q..(g + 1) * q].to_vec();
            let d: Vec<f64> = (0..q).map(|_| scale * std_normal(&mut st.rng)).collect();
            let new: Vec<f64> = old.iter().zip(&d).map(|(a, b)| a + b).collect();
            let inv_d = &st.models[m].inv_d;
            let quad = |b: &[f64]| -> f64 {
                let mut s = 0.0;
                for a in 0..q {
                    for c in 0..q {
                        s += b[a] * inv_d[(a, c)] * b[c];
                    }
                }
                s
            };
            let mut lr = -0.5 * (quad(&new) - quad(&old));
            let mut changed = Vec::new();
            for &u in &r.units_of_group[g] {
                let shift: f64 = (0..q).map(|l| r.z[u * q + l] * d[l]).sum();
                buf.copy_from_slice(&eta[u * n_lp..(u + 1) * n_lp]);
                let cur = self.unit_loglik(m, st, u, &buf);
                buf[0] += shift;
                let nl = self.unit_loglik(m, st, u, &buf);
                lr += nl - cur;
                changed.push((u, shift));
            }
            if lr.is_nan() {
                return Err(self.sampler_error(st, ctx, format!("b_{}_{}[{}]", cm.name(), cm.sm.group.as_deref().unwrap_or(""), g + 1), "log acceptance ratio is NaN"));
            }
            let ok = accept(lr, st.rng.random());
            if ok {
                st.models[m].b[g * q..(g + 1) * q].copy_from_slice(&new);
                for (u, shift) in changed {
                    eta[u * n_lp] += shift;
                }
            }
            st.steps[m].b[g].record(ok, ctx.iter, ctx.n_adapt);
        }
        Ok(())
    }

    fn update_covariance(&self, m: usize, st: &mut ChainState, ctx: &Ctx) -> Result<()> {
        let cm = &self.models[m];
        let r = cm.ranef.as_ref().expect("mixed model");
        let q = r.q;
        let n = r.n_groups() as f64;
        let b = &st.models[m].b;
        if q == 1 {
            let ss: f64 = b.iter().map(|v| v * v).sum();
            let rate = 0.5 * st.models[m].rinv_d[0] + 0.5 * ss;
            let v = gamma_draw(0.5 * r.kinvd + 0.5 * n, rate, &mut st.rng);
            st.models[m].inv_d[(0, 0)] = v;
        } else {
            let mut s = DMatrix::<f64>::zeros(q, q);
            for j in 0..q {
                s[(j, j)] = st.models[m].rinv_d[j];
            }
            for g in 0..r.n_groups() {
                let bg = &b[g * q..(g + 1) * q];
                for a in 0..q {
                    for c in 0..q {
                        s[(a, c)] += bg[a] * bg[c];
                    }
                }
            }
            let scale = s
                .try_inverse()
                .ok_or_else(|| self.sampler_error(st, ctx, format!("invD_{}", cm.name()), "random-effects scatter matrix is singular"))?;
            let scale = (&scale + scale.transpose()) * 0.5;
            st.models[m].inv_d = wishart(r.kinvd + n, &scale, &mut st.rng)
                .map_err(|e| self.sampler_error(st, ctx, format!("invD_{}", cm.name()), &model_message(e)))?;
        }
        for j in 0..q {
            let d = st.models[m].inv_d[(j, j)];
            st.models[m].rinv_d[j] = gamma_draw(r.shape_rinvd + 0.5 * r.kinvd, r.rate_rinvd + 0.5 * d, &mut st.rng);
        }
        Ok(())
    }
}
