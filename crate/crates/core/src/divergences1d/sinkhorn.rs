//! Entropic optimal transport between 1D uniform empirical measures and the
//! debiased Sinkhorn divergence.
//!
//! The solver works in the log domain on the semi-dual: for potentials `f`
//! on `x`, the potentials on `y` are the soft c-transform
//!
//! ```text
//! g_j = -λ log Σ_i a_i exp((f_i - C_ij) / λ)
//! ```
//!
//! so column marginals are exact and only the row marginal violation
//! `max_i |r_i - a_i|` has to be driven below the tolerance. Starting from
//! the exact (unregularized) transport potentials of the monotone coupling,
//! each step is either a Newton step on the semi-dual, whose Hessian is
//! banded once samples are sorted, or a plain Sinkhorn update `f <- T(g)`
//! when the Newton step is unavailable or fails the line search. Both steps
//! share the same fixed point.
//!
//! Log-sum-exp reductions skip terms more than `LSE_CUT` below the running
//! maximum (relative contribution `< e^-50` each). For `p = 2` the summands
//! along a row are unimodal whenever the potential on the other side is a
//! soft c-transform, which lets the reduction stop after leaving the band.

use super::{canonical, pow_p, sorted, DivergenceSpec, Projected1D};
use crate::error::{invalid, Error, Result};

const LSE_CUT: f64 = 40.0;
/// Largest `n * bandwidth^2` for which a banded factorization is used;
/// wider systems are solved by preconditioned conjugate gradients.
const MAX_BAND_WORK: f64 = 2e6;
/// Relative residual at which the conjugate gradient solve stops.
const CG_RTOL: f64 = 1e-2;
const CG_MAX_ITER: usize = 500;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

/// Result of one entropic transport solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropicSolution {
    /// Transport cost plus `λ KL(γ | a ⊗ b)` of the returned plan.
    pub value: f64,
    pub iterations: usize,
    /// Final L∞ violation of the row marginal (columns are exact).
    pub violation: f64,
}

trait Cost {
    const UNIMODAL: bool;
    fn at(&self, i: usize, j: usize) -> f64;
}

struct Squared<'a>(&'a [f64], &'a [f64]);

impl Cost for Squared<'_> {
    const UNIMODAL: bool = true;
    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        let d = self.0[i] - self.1[j];
        d * d
    }
}

struct Absolute<'a>(&'a [f64], &'a [f64]);

impl Cost for Absolute<'_> {
    const UNIMODAL: bool = false;
    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        (self.0[i] - self.1[j]).abs()
    }
}

/// Row-major `n x m` cost matrix.
struct Table {
    vals: Vec<f64>,
    m: usize,
}

impl Cost for Table {
    const UNIMODAL: bool = false;
    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.vals[i * self.m + j]
    }
}

struct Problem<'a, C> {
    x: &'a [f64],
    y: &'a [f64],
    lam: f64,
    inv_lam: f64,
    cost: C,
}

impl<C: Cost> Problem<'_, C> {
    #[inline(always)]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost.at(i, j)
    }

    fn unimodal(&self) -> bool {
        C::UNIMODAL
    }
}

struct Lse {
    max: f64,
    sum: f64,
    arg: usize,
}

impl Lse {
    fn log(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

#[inline(always)]
fn lse_push(acc: &mut Lse, t: f64, k: usize) {
    if t > acc.max {
        acc.sum = acc.sum * (acc.max - t).exp() + 1.0;
        acc.max = t;
        acc.arg = k;
    } else if t > acc.max - LSE_CUT {
        acc.sum += (t - acc.max).exp();
    }
}

/// Log-sum-exp over all `len` terms, visiting from `start` outwards.
fn lse_full(len: usize, start: usize, term: impl Fn(usize) -> f64) -> Lse {
    let mut acc = Lse {
        max: term(start),
        sum: 1.0,
        arg: start,
    };
    for k in start + 1..len {
        lse_push(&mut acc, term(k), k);
    }
    for k in (0..start).rev() {
        lse_push(&mut acc, term(k), k);
    }
    acc
}

/// Log-sum-exp of a unimodal sequence: climb to the peak, then widen until
/// terms fall below the cut.
fn lse_unimodal(len: usize, start: usize, term: impl Fn(usize) -> f64) -> Lse {
    let mut k = start;
    let mut tk = term(k);
    while k + 1 < len {
        let t = term(k + 1);
        if t >= tk {
            k += 1;
            tk = t;
        } else {
            break;
        }
    }
    while k > 0 {
        let t = term(k - 1);
        if t > tk {
            k -= 1;
            tk = t;
        } else {
            break;
        }
    }
    let mut acc = Lse {
        max: tk,
        sum: 1.0,
        arg: k,
    };
    let mut j = k + 1;
    while j < len {
        let t = term(j);
        if t < acc.max - LSE_CUT {
            break;
        }
        lse_push(&mut acc, t, j);
        j += 1;
    }
    let mut j = k;
    while j > 0 {
        let t = term(j - 1);
        if t < acc.max - LSE_CUT {
            break;
        }
        lse_push(&mut acc, t, j - 1);
        j -= 1;
    }
    acc
}

/// For `p = 2`, whether `x_i^2 - f_i` is (numerically) convex in `x_i`,
/// which makes every column of `f_i - C_ij` unimodal in `i`.
fn c_concave_p2(x: &[f64], f: &[f64], lam: f64) -> bool {
    let span = (x[x.len() - 1] - x[0]).max(f64::MIN_POSITIVE);
    // total ripple this tolerance can introduce stays far below LSE_CUT
    let slack = 1e-3 * lam / span;
    let mut prev: Option<f64> = None;
    for i in 0..x.len().saturating_sub(1) {
        let dx = x[i + 1] - x[i];
        let dphi = (x[i + 1] * x[i + 1] - f[i + 1]) - (x[i] * x[i] - f[i]);
        if dx == 0.0 {
            if dphi != 0.0 {
                return false;
            }
            continue;
        }
        let slope = dphi / dx;
        if let Some(p) = prev {
            if slope < p - slack * (1.0 + p.abs()) {
                return false;
            }
        }
        prev = Some(slope);
    }
    true
}

/// Soft c-transform onto the `y` side: `g_j = -λ log Σ_i (1/n) exp((f_i - C_ij)/λ)`.
fn col_transform<C: Cost>(pb: &Problem<C>, f: &[f64]) -> Vec<f64> {
    let (n, m) = (pb.x.len(), pb.y.len());
    let (lam, inv_lam) = (pb.lam, pb.inv_lam);
    let ln_n = (n as f64).ln();
    let banded = pb.unimodal() && c_concave_p2(pb.x, f, lam);
    let mut g = Vec::with_capacity(m);
    let mut start = 0;
    for j in 0..m {
        let term = |i: usize| (f[i] - pb.cost(i, j)) * inv_lam;
        let acc = if banded {
            lse_unimodal(n, start, term)
        } else {
            lse_full(n, start, term)
        };
        start = acc.arg;
        g.push(-lam * (acc.log() - ln_n));
    }
    g
}

/// Soft c-transform onto the `x` side (a plain Sinkhorn update of `f`).
fn row_transform<C: Cost>(pb: &Problem<C>, g: &[f64]) -> Vec<f64> {
    let (n, m) = (pb.x.len(), pb.y.len());
    let (lam, inv_lam) = (pb.lam, pb.inv_lam);
    let ln_m = (m as f64).ln();
    let mut f = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let term = |j: usize| (g[j] - pb.cost(i, j)) * inv_lam;
        // g is always a soft c-transform here
        let acc = if pb.unimodal() {
            lse_unimodal(m, start, term)
        } else {
            lse_full(m, start, term)
        };
        start = acc.arg;
        f.push(-lam * (acc.log() - ln_m));
    }
    f
}

/// Plan rows restricted to their significant band.
struct Band {
    lo: Vec<usize>,
    hi: Vec<usize>,
    offset: Vec<usize>,
    vals: Vec<f64>,
}

impl Band {
    fn row(&self, i: usize) -> &[f64] {
        &self.vals[self.offset[i]..self.offset[i + 1]]
    }
}

struct State {
    f: Vec<f64>,
    g: Vec<f64>,
    r: Vec<f64>,
    band: Band,
    psi: f64,
    violation: f64,
}

fn evaluate<C: Cost>(pb: &Problem<C>, f: Vec<f64>) -> State {
    let (n, m) = (pb.x.len(), pb.y.len());
    let inv_lam = pb.inv_lam;
    let g = col_transform(pb, &f);
    let log_ab = -((n as f64).ln() + (m as f64).ln());
    let mut r = Vec::with_capacity(n);
    let mut band = Band {
        lo: Vec::with_capacity(n),
        hi: Vec::with_capacity(n),
        offset: vec![0],
        vals: Vec::new(),
    };
    let mut terms = Vec::new();
    let mut start = 0;
    for i in 0..n {
        let fi = f[i];
        let term = |j: usize| (fi + g[j] - pb.cost(i, j)) * inv_lam;
        // exponents of row i over [lo, hi], collected in `terms`
        terms.clear();
        let (lo, peak) = if pb.unimodal() {
            let mut k = start;
            let mut tk = term(k);
            while k + 1 < m {
                let t = term(k + 1);
                if t < tk {
                    break;
                }
                k += 1;
                tk = t;
            }
            while k > 0 {
                let t = term(k - 1);
                if t <= tk {
                    break;
                }
                k -= 1;
                tk = t;
            }
            let floor = tk - LSE_CUT;
            let mut lo = k;
            while lo > 0 {
                let t = term(lo - 1);
                if t < floor {
                    break;
                }
                terms.push(t);
                lo -= 1;
            }
            terms.reverse();
            terms.push(tk);
            for j in k + 1..m {
                let t = term(j);
                if t < floor {
                    break;
                }
                terms.push(t);
            }
            start = k;
            (lo, tk)
        } else {
            terms.extend((0..m).map(term));
            let peak = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let floor = peak - LSE_CUT;
            let lo = terms.iter().position(|&t| t >= floor).unwrap_or(0);
            let hi = terms.iter().rposition(|&t| t >= floor).unwrap_or(m - 1);
            terms.truncate(hi + 1);
            terms.drain(..lo);
            (lo, peak)
        };
        let floor = peak - LSE_CUT;
        let mut ri = 0.0;
        for &t in &terms {
            let v = if t >= floor { (t + log_ab).exp() } else { 0.0 };
            ri += v;
            band.vals.push(v);
        }
        let hi = lo + terms.len() - 1;
        r.push(ri);
        band.lo.push(lo);
        band.hi.push(hi);
        band.offset.push(band.vals.len());
    }
    let a = 1.0 / n as f64;
    let violation = r.iter().fold(0.0f64, |v, ri| v.max((ri - a).abs()));
    let psi = f.iter().sum::<f64>() / n as f64 + g.iter().sum::<f64>() / m as f64;
    State {
        f,
        g,
        r,
        band,
        psi,
        violation,
    }
}

/// Newton direction `δ = λ S^{-1} (a - r)` with `S = diag(r) - m Γ Γᵀ`, the
/// negated semi-dual Hessian scaled by `λ`. `None` when the solve breaks down.
fn newton_direction<C: Cost>(pb: &Problem<C>, st: &State) -> Option<Vec<f64>> {
    let (n, m) = (pb.x.len(), pb.y.len());
    let band = &st.band;
    // suffix minimum of row band starts
    let mut suffmin = band.lo.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        suffmin[i] = suffmin[i].min(suffmin[i + 1]);
    }
    let mut bw = 0;
    for i in 0..n {
        // largest k with suffmin[k] <= hi_i; suffmin is nondecreasing
        let k = suffmin.partition_point(|&lo| lo <= band.hi[i]);
        if k > i + 1 {
            bw = bw.max(k - 1 - i);
        }
    }
    if n as f64 * (bw as f64).powi(2) > MAX_BAND_WORK {
        return conjugate_gradient(pb, st);
    }
    let w = bw + 1;
    // lower band storage: s[k * w + (k - i)] = S_{k,i}, i <= k
    let mut s = vec![0.0; n * w];
    let mf = m as f64;
    for i in 0..n {
        let ri = band.row(i);
        for k in i..(i + w).min(n) {
            let lo = band.lo[i].max(band.lo[k]);
            let hi = band.hi[i].min(band.hi[k]);
            let mut acc = 0.0;
            if lo <= hi {
                let rk = band.row(k);
                for j in lo..=hi {
                    acc += ri[j - band.lo[i]] * rk[j - band.lo[k]];
                }
            }
            s[k * w + (k - i)] = -mf * acc;
        }
        s[i * w] += st.r[i];
    }
    let max_diag = (0..n).map(|i| s[i * w]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let ridge = 1e-12 * max_diag;
    for i in 0..n {
        s[i * w] += ridge;
    }
    // in-place banded Cholesky
    for i in 0..n {
        let j0 = i.saturating_sub(bw);
        for j in j0..=i {
            let mut sum = s[i * w + (i - j)];
            for k in j0.max(j.saturating_sub(bw))..j {
                sum -= s[i * w + (i - k)] * s[j * w + (j - k)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                s[i * w] = sum.sqrt();
            } else {
                s[i * w + (i - j)] = sum / s[j * w];
            }
        }
    }
    let a = 1.0 / n as f64;
    let mut z: Vec<f64> = st.r.iter().map(|ri| pb.lam * (a - ri)).collect();
    for i in 0..n {
        let mut sum = z[i];
        for k in i.saturating_sub(bw)..i {
            sum -= s[i * w + (i - k)] * z[k];
        }
        z[i] = sum / s[i * w];
    }
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..(i + w).min(n) {
            sum -= s[k * w + (k - i)] * z[k];
        }
        z[i] = sum / s[i * w];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// `S v` using the stored plan band.
fn hessian_apply(st: &State, m: usize, v: &[f64], w: &mut [f64], out: &mut [f64]) {
    let band = &st.band;
    w.iter_mut().for_each(|x| *x = 0.0);
    for (i, vi) in v.iter().enumerate() {
        let lo = band.lo[i];
        for (wj, gij) in w[lo..].iter_mut().zip(band.row(i)) {
            *wj += gij * vi;
        }
    }
    let mf = m as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let lo = band.lo[i];
        let dot: f64 = w[lo..].iter().zip(band.row(i)).map(|(a, b)| a * b).sum();
        *o = st.r[i] * v[i] - mf * dot;
    }
}

/// Preconditioner `D^{-1} + T^+`: the Jacobi part handles rough vectors and
/// `T`, the path-graph Laplacian closest to `S` on slowly varying vectors,
/// handles smooth ones. `S` is the Laplacian of the weights
/// `W_ab = m Σ_j Γ_aj Γ_bj`; a pair `(a, b)` is spread over the `b - a` edges
/// between them with weight `W_ab` each.
struct Preconditioner {
    inv_diag: Vec<f64>,
    chain: Vec<f64>,
}

impl Preconditioner {
    fn new(st: &State, m: usize) -> Option<Self> {
        let band = &st.band;
        let n = st.r.len();
        let mf = m as f64;
        let diag: Vec<f64> = (0..n)
            .map(|i| st.r[i] - mf * band.row(i).iter().map(|v| v * v).sum::<f64>())
            .collect();
        let floor = 1e-12 * diag.iter().cloned().fold(0.0f64, f64::max);
        if !(floor > 0.0) {
            return None;
        }
        let inv_diag = diag.iter().map(|d| 1.0 / d.max(floor)).collect();
        // per column: total mass and first moment in the row index
        let (mut tot0, mut tot1) = (vec![0.0; m], vec![0.0; m]);
        for i in 0..n {
            let lo = band.lo[i];
            for (k, v) in band.row(i).iter().enumerate() {
                tot0[lo + k] += v;
                tot1[lo + k] += v * i as f64;
            }
        }
        let (mut run0, mut run1) = (vec![0.0; m], vec![0.0; m]);
        let mut chain = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n.saturating_sub(1) {
            let lo = band.lo[i];
            let mut c = 0.0;
            for (k, v) in band.row(i).iter().enumerate() {
                let j = lo + k;
                run0[j] += v;
                run1[j] += v * i as f64;
                c += run0[j] * (tot1[j] - run1[j]) - run1[j] * (tot0[j] - run0[j]);
            }
            chain.push(mf * c.max(0.0));
        }
        Some(Self { inv_diag, chain })
    }

    fn apply(&self, res: &[f64], out: &mut [f64]) {
        let mut v = 0.0;
        let mut cum = 0.0;
        out[0] = 0.0;
        for (i, c) in self.chain.iter().enumerate() {
            cum += res[i];
            if *c > 0.0 {
                v -= cum / c;
            }
            out[i + 1] = v;
        }
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        for ((o, r), d) in out.iter_mut().zip(res).zip(&self.inv_diag) {
            *o += r * d - mean;
        }
    }
}

/// Preconditioned conjugate gradients for the Newton system. `S` is
/// positive semidefinite with the constants as its kernel, and the right-hand
/// side sums to zero, so the iteration stays in the range of `S`.
fn conjugate_gradient<C: Cost>(pb: &Problem<C>, st: &State) -> Option<Vec<f64>> {
    let (n, m) = (pb.x.len(), pb.y.len());
    let pre = Preconditioner::new(st, m)?;
    let a = 1.0 / n as f64;
    let mut res: Vec<f64> = st.r.iter().map(|ri| pb.lam * (a - ri)).collect();
    let mean = res.iter().sum::<f64>() / n as f64;
    res.iter_mut().for_each(|v| *v -= mean);
    let norm0 = res.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if norm0 == 0.0 {
        return Some(x);
    }
    let mut z = vec![0.0; n];
    pre.apply(&res, &mut z);
    let mut dir = z.clone();
    let mut rz: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut w = vec![0.0; m];
    let mut sd = vec![0.0; n];
    for _ in 0..CG_MAX_ITER {
        hessian_apply(st, m, &dir, &mut w, &mut sd);
        let curv: f64 = dir.iter().zip(&sd).map(|(a, b)| a * b).sum();
        if !(curv > 0.0) {
            break;
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * dir[i];
            res[i] -= alpha * sd[i];
        }
        if res.iter().map(|v| v * v).sum::<f64>().sqrt() <= CG_RTOL * norm0 {
            break;
        }
        pre.apply(&res, &mut z);
        let rz_next: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    (x.iter().all(|v| v.is_finite()) && x.iter().any(|v| *v != 0.0)).then_some(x)
}

/// Dual potentials of the monotone (north-west corner) coupling of the
/// unregularized problem, used as a warm start between distinct samples.
fn monotone_potentials<C: Cost>(pb: &Problem<C>) -> Vec<f64> {
    let (n, m) = (pb.x.len(), pb.y.len());
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let (mut i, mut j) = (0usize, 0usize);
    g[0] = pb.cost(0, 0);
    while i + 1 < n || j + 1 < m {
        let advance_i = if i + 1 == n {
            false
        } else if j + 1 == m {
            true
        } else {
            (i as u64 + 1) * m as u64 <= (j as u64 + 1) * n as u64
        };
        if advance_i {
            i += 1;
            f[i] = pb.cost(i, j) - g[j];
        } else {
            j += 1;
            g[j] = pb.cost(i, j) - f[i];
        }
    }
    f
}

fn solve_sorted(
    x: &[f64],
    y: &[f64],
    p: f64,
    lam: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EntropicSolution> {
    fn run<C: Cost>(
        x: &[f64],
        y: &[f64],
        lam: f64,
        cost: C,
        tol: f64,
        max_iter: usize,
    ) -> Result<EntropicSolution> {
        let pb = Problem {
            x,
            y,
            lam,
            inv_lam: 1.0 / lam,
            cost,
        };
        solve(&pb, tol, max_iter)
    }
    if p == 2.0 {
        run(x, y, lam, Squared(x, y), tol, max_iter)
    } else if p == 1.0 {
        run(x, y, lam, Absolute(x, y), tol, max_iter)
    } else {
        let mut vals = Vec::with_capacity(x.len() * y.len());
        for &xi in x {
            vals.extend(y.iter().map(|&yj| pow_p((xi - yj).abs(), p)));
        }
        run(x, y, lam, Table { vals, m: y.len() }, tol, max_iter)
    }
}

fn solve<C: Cost>(pb: &Problem<C>, tol: f64, max_iter: usize) -> Result<EntropicSolution> {
    let (x, y) = (pb.x, pb.y);
    let (n, m) = (x.len(), y.len());
    let start = if x == y {
        vec![0.0; n]
    } else {
        monotone_potentials(pb)
    };
    let mut st = evaluate(pb, start);
    let mut iterations = 0;
    while st.violation >= tol {
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: st.violation,
            });
        }
        iterations += 1;
        let mut next = None;
        if let Some(dir) = newton_direction(pb, &st) {
            let a = 1.0 / n as f64;
            let slope: f64 = st.r.iter().zip(&dir).map(|(ri, d)| (a - ri) * d).sum();
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let f: Vec<f64> = st.f.iter().zip(&dir).map(|(fi, d)| fi + t * d).collect();
                let cand = evaluate(pb, f);
                let ok = cand.psi.is_finite()
                    && (cand.psi >= st.psi + ARMIJO * t * slope || cand.violation < st.violation);
                if ok {
                    next = Some(cand);
                    break;
                }
                t *= 0.5;
            }
        }
        st = match next {
            Some(cand) => cand,
            None => evaluate(pb, row_transform(pb, &st.g)),
        };
    }
    // primal value Σ γ_ij (C_ij + λ log(γ_ij / (a_i b_j))) = Σ γ_ij (f_i + g_j)
    let value = st.f.iter().zip(&st.r).map(|(f, r)| f * r).sum::<f64>()
        + st.g.iter().sum::<f64>() / m as f64;
    Ok(EntropicSolution {
        value,
        iterations,
        violation: st.violation,
    })
}

/// Entropic transport cost `W_{p,λ}^p(x, y)`: the minimum over couplings of
/// `Σ γ_ij |x_i - y_j|^p + λ KL(γ | a ⊗ b)` with uniform marginals.
pub fn entropic_ot_1d(
    x: &Projected1D,
    y: &Projected1D,
    spec: &DivergenceSpec,
) -> Result<EntropicSolution> {
    check(spec)?;
    let xs = sorted(x.as_slice());
    let ys = sorted(y.as_slice());
    let (a, b) = canonical(&xs, &ys);
    solve_sorted(
        a,
        b,
        spec.p,
        spec.sinkhorn_lambda,
        spec.sinkhorn_tol,
        spec.sinkhorn_max_iter,
    )
}

fn check(spec: &DivergenceSpec) -> Result<()> {
    if !(spec.sinkhorn_lambda > 0.0 && spec.sinkhorn_lambda.is_finite()) {
        return Err(invalid(format!(
            "sinkhorn lambda must be > 0, got {}",
            spec.sinkhorn_lambda
        )));
    }
    if !(spec.p >= 1.0 && spec.p.is_finite()) {
        return Err(invalid(format!("order p must be >= 1, got {}", spec.p)));
    }
    if !(spec.sinkhorn_tol > 0.0) || spec.sinkhorn_max_iter == 0 {
        return Err(invalid("sinkhorn tolerance and max_iter must be positive"));
    }
    Ok(())
}

/// Debiased Sinkhorn divergence
/// `W_{p,λ}^p(x, y) - ½ W_{p,λ}^p(x, x) - ½ W_{p,λ}^p(y, y)`.
///
/// Small negative values (above `-10 tol`) from finite convergence are
/// clamped to zero; anything lower is an error.
pub fn sinkhorn_divergence_1d(
    x: &Projected1D,
    y: &Projected1D,
    spec: &DivergenceSpec,
) -> Result<f64> {
    check(spec)?;
    let xs = sorted(x.as_slice());
    let ys = sorted(y.as_slice());
    let (a, b) = canonical(&xs, &ys);
    let solve = |u: &[f64], v: &[f64]| {
        solve_sorted(
            u,
            v,
            spec.p,
            spec.sinkhorn_lambda,
            spec.sinkhorn_tol,
            spec.sinkhorn_max_iter,
        )
        .map(|s| s.value)
    };
    let wab = solve(a, b)?;
    let waa = solve(a, a)?;
    let wbb = if a == b { waa } else { solve(b, b)? };
    let skd = wab - 0.5 * waa - 0.5 * wbb;
    let threshold = -10.0 * spec.sinkhorn_tol;
    if skd < threshold {
        return Err(Error::NegativeDivergence {
            value: skd,
            threshold,
        });
    }
    Ok(skd.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences1d::wasserstein_1d;
    use crate::rng::RngStream;

    fn p1(v: &[f64]) -> Projected1D {
        Projected1D::new(v.to_vec()).unwrap()
    }

    /// Plain dense log-domain Sinkhorn, iterated to a tight tolerance.
    fn reference(x: &[f64], y: &[f64], p: f64, lam: f64) -> f64 {
        let (n, m) = (x.len(), y.len());
        let c = |i: usize, j: usize| (x[i] - y[j]).abs().powf(p);
        let lse = |v: &[f64]| {
            let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            mx + v.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
        };
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        for _ in 0..200_000 {
            for i in 0..n {
                let t: Vec<f64> = (0..m).map(|j| (g[j] - c(i, j)) / lam).collect();
                f[i] = -lam * (lse(&t) - (m as f64).ln());
            }
            for j in 0..m {
                let t: Vec<f64> = (0..n).map(|i| (f[i] - c(i, j)) / lam).collect();
                g[j] = -lam * (lse(&t) - (n as f64).ln());
            }
        }
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..m {
                let e = (f[i] + g[j] - c(i, j)) / lam;
                let gam = e.exp() / (n * m) as f64;
                v += gam * (c(i, j) + lam * e);
            }
        }
        v
    }

    #[test]
    fn identical_inputs_vanish() {
        let x = p1(&[0.0, 1.0, 2.0]);
        for lam in [0.01, 0.1, 1.0] {
            let spec = DivergenceSpec::sinkhorn(2.0, lam);
            let v = sinkhorn_divergence_1d(&x, &x, &spec).unwrap();
            assert!(v.abs() < 10.0 * spec.sinkhorn_tol, "{lam}: {v}");
        }
    }

    #[test]
    fn small_lambda_recovers_wasserstein() {
        let x = p1(&[0.0, 1.0]);
        let y = p1(&[1.0, 2.0]);
        let spec = DivergenceSpec::sinkhorn(2.0, 0.001);
        let v = sinkhorn_divergence_1d(&x, &y, &spec).unwrap();
        let w = wasserstein_1d(&x, &y, 2.0).unwrap();
        assert!((v - w).abs() < 0.05, "{v} vs {w}");
    }

    #[test]
    fn matches_dense_reference() {
        let s = RngStream::new(17);
        for (k, (n, m, p, lam)) in [
            (7, 7, 2.0, 0.5),
            (6, 9, 2.0, 0.3),
            (8, 5, 1.0, 0.4),
            (6, 6, 1.5, 0.6),
        ]
        .into_iter()
        .enumerate()
        {
            let x: Vec<f64> = s.child(k as u64).standard_normals(n);
            let y: Vec<f64> = s
                .child(100 + k as u64)
                .standard_normals(m)
                .iter()
                .map(|v| v + 0.5)
                .collect();
            let spec = DivergenceSpec::sinkhorn(p, lam);
            let got = entropic_ot_1d(&p1(&x), &p1(&y), &spec).unwrap();
            let want = reference(&x, &y, p, lam);
            assert!(
                (got.value - want).abs() < 1e-8,
                "case {k}: {} vs {want}",
                got.value
            );
            assert!(got.violation < spec.sinkhorn_tol);
        }
    }

    #[test]
    fn converges_at_default_lambda_on_spread_data() {
        let s = RngStream::new(5);
        let x: Vec<f64> = s
            .child(0)
            .standard_normals(400)
            .iter()
            .map(|v| 3.2 * v + 1.0)
            .collect();
        let y: Vec<f64> = s
            .child(1)
            .standard_normals(400)
            .iter()
            .map(|v| 3.2 * v)
            .collect();
        let spec = DivergenceSpec::sinkhorn(2.0, 0.1);
        let sol = entropic_ot_1d(&p1(&x), &p1(&y), &spec).unwrap();
        assert!(sol.violation < 1e-9);
        let w = wasserstein_1d(&p1(&x), &p1(&y), 2.0).unwrap();
        // entropic cost exceeds the exact cost by at most λ log n
        assert!(
            sol.value >= w - 1e-9 && sol.value <= w + 0.1 * (400f64).ln(),
            "{} vs {w}",
            sol.value
        );
    }

    #[test]
    fn symmetric_and_permutation_invariant() {
        let s = RngStream::new(8);
        let x = s.child(0).standard_normals(60);
        let y = s.child(1).standard_normals(45);
        let spec = DivergenceSpec::sinkhorn(2.0, 0.1);
        let a = sinkhorn_divergence_1d(&p1(&x), &p1(&y), &spec).unwrap();
        let b = sinkhorn_divergence_1d(&p1(&y), &p1(&x), &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let mut xr = x.clone();
        xr.reverse();
        let c = sinkhorn_divergence_1d(&p1(&xr), &p1(&y), &spec).unwrap();
        assert_eq!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn rejects_bad_lambda_and_reports_non_convergence() {
        let x = p1(&[0.0, 1.0]);
        assert!(sinkhorn_divergence_1d(&x, &x, &DivergenceSpec::sinkhorn(2.0, 0.0)).is_err());
        assert!(sinkhorn_divergence_1d(&x, &x, &DivergenceSpec::sinkhorn(2.0, -1.0)).is_err());
        let s = RngStream::new(3);
        let a = s.child(0).standard_normals(50);
        let b: Vec<f64> = s
            .child(1)
            .standard_normals(50)
            .iter()
            .map(|v| v + 3.0)
            .collect();
        let spec = DivergenceSpec {
            sinkhorn_max_iter: 1,
            sinkhorn_tol: 1e-300,
            ..DivergenceSpec::sinkhorn(2.0, 0.1)
        };
        match entropic_ot_1d(&p1(&a), &p1(&b), &spec) {
            Err(Error::NotConverged {
                iterations,
                violation,
            }) => {
                assert_eq!(iterations, 1);
                assert!(violation > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
