//! Transport chains, the Goldstein-stationarity proxy, holonomy defects and
//! empirical rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::optimizer::EpochTrace;

/// Ordered points `x_0, ..., x_t`. Transport along the chain composes the
/// geodesic transports `x_0 -> x_1`, ..., `x_{t-1} -> x_t` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportChain {
    points: Vec<Point>,
}

impl TransportChain {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("transport chain needs at least one point"));
        }
        Ok(TransportChain { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn start(&self) -> &Point {
        &self.points[0]
    }

    pub fn end(&self) -> &Point {
        &self.points[self.points.len() - 1]
    }

    pub fn reversed(&self) -> TransportChain {
        let mut points = self.points.clone();
        points.reverse();
        TransportChain { points }
    }

    /// Sum of geodesic segment lengths.
    pub fn length<M: Manifold + ?Sized>(&self, manifold: &M) -> Result<f64> {
        self.points
            .windows(2)
            .map(|w| manifold.dist(&w[0], &w[1]))
            .sum()
    }
}

/// Transports `v` (anchored at the chain start) to the chain end.
pub fn chain_transport<M: Manifold + ?Sized>(
    manifold: &M,
    chain: &TransportChain,
    v: &Tangent,
) -> Result<Tangent> {
    if v.base().coords() != chain.start().coords() {
        return Err(Error::Numerical("vector is not anchored at the chain start".into()));
    }
    let mut out = v.clone();
    for w in chain.points.windows(2) {
        out = manifold.parallel_transport(&w[0], &w[1], &out)?;
    }
    Ok(out)
}

/// Inverse of [`chain_transport`]: moves `v` from the chain end back to its
/// start.
pub fn chain_transport_inverse<M: Manifold + ?Sized>(
    manifold: &M,
    chain: &TransportChain,
    v: &Tangent,
) -> Result<Tangent> {
    chain_transport(manifold, &chain.reversed(), v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    /// 1-based epoch index.
    pub epoch: usize,
    pub proxy: f64,
    pub clip_radius: f64,
    /// `clip_radius * terms`.
    pub delta: f64,
    pub terms: usize,
}

/// Relative tolerance on `|Gamma v| - |v|` for single transports.
const SUMMAND_ISOMETRY_TOL: f64 = 1e-9;

/// Stationarity proxy of one epoch,
///
/// ```text
/// || (1/T) sum_{t<T} (Gamma_{S_{t+1}})^{-1} Gamma_{w_t -> x_{t+1}} (grad_t) ||
/// ```
///
/// with `grad_t = grad_fn(w_t)` and `S_{t+1} = {x_0, ..., x_{t+1}}`. Every
/// summand is pulled back to `x_0` explicitly, so the cost is quadratic in
/// `T`; the optimizer uses [`ProxyAccumulator`] instead.
pub fn goldstein_proxy<M, F>(
    manifold: &M,
    trace: &EpochTrace,
    epoch: usize,
    clip_radius: f64,
    mut grad_fn: F,
) -> Result<ProxyReport>
where
    M: Manifold + ?Sized,
    F: FnMut(&Point) -> Result<Tangent>,
{
    let terms = trace.ws.len();
    if terms == 0 || trace.xs.len() != terms + 1 {
        return Err(Error::MissingTrace(format!(
            "epoch {epoch} has {} points and {} gradient anchors",
            trace.xs.len(),
            terms
        )));
    }
    let x0 = &trace.xs[0];
    let mut sum = Tangent::zero(x0.clone());
    for t in 0..terms {
        let grad = grad_fn(&trace.ws[t])?;
        let at_next = manifold.parallel_transport(&trace.ws[t], &trace.xs[t + 1], &grad)?;
        let chain = TransportChain::new(trace.xs[..=t + 1].to_vec())?;
        let summand = chain_transport_inverse(manifold, &chain, &at_next)?;
        let (a, b) = (summand.norm(), grad.norm());
        if (a - b).abs() > SUMMAND_ISOMETRY_TOL * b.max(1.0) * (t + 2) as f64 {
            return Err(Error::Numerical(format!(
                "transported summand {t} changed norm: {a} vs {b}"
            )));
        }
        sum = sum.axpy(1.0, &summand)?;
    }
    Ok(ProxyReport {
        epoch,
        proxy: sum.norm() / terms as f64,
        clip_radius,
        delta: clip_radius * terms as f64,
        terms,
    })
}

/// Streaming form of the epoch proxy.
///
/// Holds `A_t = sum_{s<t} Gamma_{x_{s+1} -> ... -> x_t}(v_s)` anchored at
/// `x_t`. Because every transport is an isometry, `|A_T|` equals the norm of
/// the same sum pulled back to `x_0`, at linear cost in `T`.
#[derive(Debug, Clone)]
pub struct ProxyAccumulator {
    acc: Tangent,
    terms: usize,
}

impl ProxyAccumulator {
    pub fn new(x0: &Point) -> Self {
        ProxyAccumulator {
            acc: Tangent::zero(x0.clone()),
            terms: 0,
        }
    }

    /// Advances the anchor from `x` to `x_next` and adds `v` (anchored at
    /// `x_next`).
    pub fn push<M: Manifold + ?Sized>(
        &mut self,
        manifold: &M,
        x: &Point,
        x_next: &Point,
        v: &Tangent,
    ) -> Result<()> {
        let moved = manifold.parallel_transport(x, x_next, &self.acc)?;
        self.acc = moved.axpy(1.0, v)?;
        self.terms += 1;
        Ok(())
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn value(&self) -> f64 {
        if self.terms == 0 {
            0.0
        } else {
            self.acc.norm() / self.terms as f64
        }
    }
}

/// `||v - Gamma_loop(v)||` for a closed chain.
pub fn holonomy_defect<M: Manifold + ?Sized>(
    manifold: &M,
    chain: &TransportChain,
    v: &Tangent,
) -> Result<f64> {
    let gap = (chain.start().coords() - chain.end().coords()).norm();
    if gap > 1e-12 {
        return Err(Error::config(format!("loop does not close (endpoint gap {gap:e})")));
    }
    let back = chain_transport(manifold, chain, v)?;
    Ok((v.coords() - back.coords()).norm())
}

/// Least-squares slope of `log(proxy)` against `log(n)`.
///
/// Needs at least three points, strictly positive values, and `n` spanning at
/// least two decades.
pub fn rate_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::config(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, p)| !(n > 0.0) || !(p > 0.0)) {
        return Err(Error::config("rate fit needs positive N and proxy values"));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::config(format!(
            "rate fit needs N spanning two decades, got {lo}..{hi}"
        )));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
