//! Markov noise kernels and the operators they induce on measures.
//!
//! A kernel sends a point x to a discrete measure p(dy|x); the induced
//! operator integrates the kernel against a measure, which for finite
//! support is the weighted union of the kernel atoms. The operator is convex
//! linear by construction and its deviation from the underlying
//! deterministic map is measured by the noise level
//! sup_x w_p(p(dy|x), delta_f(x)).
//!
//! Kernel families:
//!
//! - `det(MAP)`: no noise, the push-forward itself.
//! - `gauss(MAP, sigma, n)`: additive Gaussian noise discretized at the n
//!   midpoint quantiles per axis (deterministic, symmetric, and convergent
//!   in w_1 as n grows).
//! - `ball(MAP, r, n)`: n points of a low-discrepancy pattern inside the
//!   closed ball of radius r (bounded noise, level exactly at most r in
//!   every order).
//! - `collapse(MAP, x0, eps, p)`: moves the state-dependent fraction
//!   a(x) = eps^p / (1 + |f(x) - x0|^p) of the mass to the fixed anchor x0.
//!   Its noise level is at most eps in order p, yet the anchor Dirac is the
//!   unique invariant measure and every orbit converges to it -- small
//!   unbounded noise can destroy an attractor.
//! - `mix(K1@w1, K2@w2, ...)`: convex mixture of kernels.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{self, MapSpec};
use crate::measure::{merge_duplicates, pow_dist, validate_order, DiscreteMeasure, Point};
use crate::{Error, Result};

/// Atom budget of a single kernel expansion (caps product quantile grids in
/// higher dimensions).
const KERNEL_ATOM_BUDGET: usize = 4096;

/// Support-size limit for the exact operator-gap computation.
pub const OPERATOR_GAP_LIMIT: usize = 1400;

/// A Markov kernel x -> p(dy|x) given as a parameterized family of discrete
/// measures over a base map.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Deterministic {
        map: MapSpec,
    },
    Gaussian {
        map: MapSpec,
        sigma: f64,
        n_quantiles: usize,
    },
    BoundedUniform {
        map: MapSpec,
        radius: f64,
        n_points: usize,
    },
    Collapse {
        map: MapSpec,
        anchor: Point,
        epsilon: f64,
        order: f64,
    },
    Mixture(Vec<(KernelSpec, f64)>),
}

impl KernelSpec {
    pub fn deterministic(map: MapSpec) -> Self {
        KernelSpec::Deterministic { map }
    }

    pub fn gaussian(map: MapSpec, sigma: f64, n_quantiles: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma {sigma} must be positive"
            )));
        }
        if n_quantiles < 2 {
            return Err(Error::InvalidParameter(
                "gaussian kernel needs at least 2 quantiles".into(),
            ));
        }
        Ok(KernelSpec::Gaussian {
            map,
            sigma,
            n_quantiles,
        })
    }

    pub fn bounded_uniform(map: MapSpec, radius: f64, n_points: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius {radius} must be positive"
            )));
        }
        if n_points == 0 {
            return Err(Error::InvalidParameter(
                "ball kernel needs at least 1 point".into(),
            ));
        }
        Ok(KernelSpec::BoundedUniform {
            map,
            radius,
            n_points,
        })
    }

    pub fn collapse(map: MapSpec, anchor: Point, epsilon: f64, order: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "collapse epsilon {epsilon} must be positive"
            )));
        }
        validate_order(order)?;
        if map.dim() != anchor.dim() {
            return Err(Error::DimensionMismatch {
                left: map.dim(),
                right: anchor.dim(),
            });
        }
        Ok(KernelSpec::Collapse {
            map,
            anchor,
            epsilon,
            order,
        })
    }

    /// Convex mixture; weights must be positive and are normalized.
    pub fn mixture(components: Vec<(KernelSpec, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        let dim = components[0].0.dim();
        let mut total = 0.0;
        for (k, w) in &components {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: k.dim(),
                });
            }
            if !(w > &0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {w} must be positive"
                )));
            }
            total += w;
        }
        let normalized = components
            .into_iter()
            .map(|(k, w)| (k, w / total))
            .collect();
        Ok(KernelSpec::Mixture(normalized))
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Deterministic { map } => map.dim(),
            KernelSpec::Gaussian { map, .. } => map.dim(),
            KernelSpec::BoundedUniform { map, .. } => map.dim(),
            KernelSpec::Collapse { map, .. } => map.dim(),
            KernelSpec::Mixture(list) => list[0].0.dim(),
        }
    }

    /// The base map the kernel perturbs (none for heterogeneous mixtures).
    pub fn base_map(&self) -> Option<&MapSpec> {
        match self {
            KernelSpec::Deterministic { map }
            | KernelSpec::Gaussian { map, .. }
            | KernelSpec::BoundedUniform { map, .. }
            | KernelSpec::Collapse { map, .. } => Some(map),
            KernelSpec::Mixture(list) => {
                let first = list[0].0.base_map()?;
                for (k, _) in &list[1..] {
                    if k.base_map() != Some(first) {
                        return None;
                    }
                }
                Some(first)
            }
        }
    }

    /// The scalar noise parameter of the family (used by sweep experiments).
    pub fn noise_parameter(&self) -> Option<f64> {
        match self {
            KernelSpec::Deterministic { .. } => Some(0.0),
            KernelSpec::Gaussian { sigma, .. } => Some(*sigma),
            KernelSpec::BoundedUniform { radius, .. } => Some(*radius),
            KernelSpec::Collapse { epsilon, .. } => Some(*epsilon),
            KernelSpec::Mixture(_) => None,
        }
    }

    /// Uniform analytic bound on w_p(p(dy|x), delta_f(x)) relative to the
    /// given reference map, when the family provides one.
    pub fn analytic_noise_bound(&self, p: f64, reference: &MapSpec) -> Option<f64> {
        match self {
            KernelSpec::Deterministic { map } => {
                if map == reference {
                    Some(0.0)
                } else {
                    None
                }
            }
            KernelSpec::Gaussian { map, sigma, .. } => {
                if map == reference {
                    // One independent Gaussian coordinate per axis: the
                    // radial p-th moment is bounded by d^(1/p) * m_p in any
                    // fixed dimension; dimension one needs no adjustment.
                    let d = map.dim() as f64;
                    let m_p = gaussian_abs_moment(p);
                    Some(sigma * m_p * d.powf(1.0 / p))
                } else {
                    None
                }
            }
            KernelSpec::BoundedUniform { map, radius, .. } => {
                if map == reference {
                    Some(*radius)
                } else {
                    None
                }
            }
            KernelSpec::Collapse {
                map,
                epsilon,
                order,
                ..
            } => {
                if map == reference && (*order - p).abs() < 1e-12 {
                    Some(*epsilon)
                } else {
                    None
                }
            }
            KernelSpec::Mixture(list) => {
                let mut acc = 0.0;
                for (k, w) in list {
                    let b = k.analytic_noise_bound(p, reference)?;
                    acc += w * pow_dist(b, p);
                }
                Some(acc.powf(1.0 / p))
            }
        }
    }

    /// Parses the kernel grammar: `det(MAP)`, `gauss(MAP,sigma=S,n=N)`,
    /// `ball(MAP,r=R,n=N)`, `collapse(MAP,x0=...,eps=E,p=P)`,
    /// `mix(K1@w1,K2@w2,...)`.
    pub fn parse(src: &str) -> Result<Self> {
        let src = src.trim();
        let open = src.find('(').ok_or_else(|| {
            Error::InvalidParameter(format!("kernel spec `{src}` is missing `(`"))
        })?;
        if !src.ends_with(')') {
            return Err(Error::InvalidParameter(format!(
                "kernel spec `{src}` is missing the closing `)`"
            )));
        }
        let name = src[..open].trim();
        let body = &src[open + 1..src.len() - 1];
        match name {
            "det" => Ok(KernelSpec::deterministic(MapSpec::parse(body)?)),
            "gauss" => {
                let (map_src, kv) = split_kernel_args(body)?;
                let map = MapSpec::parse(&map_src)?;
                let sigma = require_num(&kv, "sigma", src)?;
                let n = require_num(&kv, "n", src)? as usize;
                KernelSpec::gaussian(map, sigma, n)
            }
            "ball" => {
                let (map_src, kv) = split_kernel_args(body)?;
                let map = MapSpec::parse(&map_src)?;
                let r = require_num(&kv, "r", src)?;
                let n = require_num(&kv, "n", src)? as usize;
                KernelSpec::bounded_uniform(map, r, n)
            }
            "collapse" => {
                let (map_src, kv) = split_kernel_args(body)?;
                let map = MapSpec::parse(&map_src)?;
                let x0_text = kv
                    .get("x0")
                    .ok_or_else(|| missing_arg("x0", src))?
                    .clone();
                let coords: Vec<f64> = x0_text
                    .split(|c: char| c == ';' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| {
                            Error::InvalidParameter(format!("bad anchor coordinate `{s}`"))
                        })
                    })
                    .collect::<Result<_>>()?;
                let eps = require_num(&kv, "eps", src)?;
                let p = require_num(&kv, "p", src)?;
                KernelSpec::collapse(map, Point::new(coords)?, eps, p)
            }
            "mix" => {
                let parts = split_top_level(body);
                let mut components = Vec::new();
                for part in parts {
                    let (kernel_src, weight_src) = part.rsplit_once('@').ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "mixture component `{part}` is missing `@weight`"
                        ))
                    })?;
                    let weight: f64 = weight_src.trim().parse().map_err(|_| {
                        Error::InvalidParameter(format!("bad mixture weight `{weight_src}`"))
                    })?;
                    components.push((KernelSpec::parse(kernel_src)?, weight));
                }
                KernelSpec::mixture(components)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel `{other}` (expected det, gauss, ball, collapse, mix)"
            ))),
        }
    }
}

fn missing_arg(key: &str, src: &str) -> Error {
    Error::InvalidParameter(format!("kernel spec `{src}` is missing `{key}=`"))
}

fn require_num(kv: &HashMap<String, String>, key: &str, src: &str) -> Result<f64> {
    let text = kv.get(key).ok_or_else(|| missing_arg(key, src))?;
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value `{text}` for `{key}` in `{src}`")))
}

/// Splits a kernel argument list at top-level commas; leading segments that
/// are not `key=value` pairs belong to the MAP (which may itself contain
/// commas, e.g. multi-component expressions).
fn split_kernel_args(body: &str) -> Result<(String, HashMap<String, String>)> {
    let parts = split_top_level(body);
    let mut map_parts: Vec<&str> = Vec::new();
    let mut kv = HashMap::new();
    for part in parts {
        let trimmed = part.trim();
        if let Some((key, value)) = trimmed.split_once('=') {
            let key_clean = key.trim();
            if !key_clean.is_empty()
                && key_clean
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                kv.insert(key_clean.to_string(), value.trim().to_string());
                continue;
            }
        }
        map_parts.push(part);
    }
    if map_parts.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "kernel arguments `{body}` are missing the MAP"
        )));
    }
    Ok((map_parts.join(","), kv))
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(body: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in body.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&body[start..]);
    parts
}

/// The operator induced by a kernel: order p plus an optional support cap
/// applied after each application.
#[derive(Clone, Debug)]
pub struct MwOperator {
    pub kernel: KernelSpec,
    pub order: f64,
    pub compression_cap: Option<usize>,
}

impl MwOperator {
    pub fn new(kernel: KernelSpec, order: f64) -> Result<Self> {
        validate_order(order)?;
        Ok(MwOperator {
            kernel,
            order,
            compression_cap: None,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.compression_cap = Some(cap);
        self
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }
}

/// The kernel evaluated at a single point.
pub fn kernel_atom(kernel: &KernelSpec, x: &Point) -> Result<DiscreteMeasure> {
    if kernel.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: kernel.dim(),
            right: x.dim(),
        });
    }
    match kernel {
        KernelSpec::Deterministic { map } => Ok(DiscreteMeasure::dirac(dynamics::eval_map(map, x)?)),
        KernelSpec::Gaussian {
            map,
            sigma,
            n_quantiles,
        } => {
            let fx = dynamics::eval_map(map, x)?;
            let d = fx.dim();
            // Cap the per-axis count so the product grid stays within budget.
            let mut n = *n_quantiles;
            while d > 1 && n.pow(d as u32) > KERNEL_ATOM_BUDGET && n > 2 {
                n -= 1;
            }
            let offsets = quantile_table(n);
            let mut atoms: Vec<(Point, f64)> = Vec::new();
            let total = n.pow(d as u32);
            let w = 1.0 / total as f64;
            for flat in 0..total {
                let mut idx = flat;
                let mut coords = Vec::with_capacity(d);
                for axis in 0..d {
                    let q = idx % n;
                    idx /= n;
                    coords.push(fx.coords()[axis] + sigma * offsets[q]);
                }
                atoms.push((Point::new(coords)?, w));
            }
            DiscreteMeasure::new(atoms)
        }
        KernelSpec::BoundedUniform {
            map,
            radius,
            n_points,
        } => {
            let fx = dynamics::eval_map(map, x)?;
            let d = fx.dim();
            let w = 1.0 / *n_points as f64;
            let mut atoms = Vec::with_capacity(*n_points);
            for offset in ball_pattern(d, *n_points) {
                let coords: Vec<f64> = fx
                    .coords()
                    .iter()
                    .zip(&offset)
                    .map(|(c, o)| c + radius * o)
                    .collect();
                atoms.push((Point::new(coords)?, w));
            }
            DiscreteMeasure::new(atoms)
        }
        KernelSpec::Collapse {
            map,
            anchor,
            epsilon,
            order,
        } => {
            let fx = dynamics::eval_map(map, x)?;
            let dist = fx.dist(anchor);
            let a = (pow_dist(*epsilon, *order) / (1.0 + pow_dist(dist, *order))).min(1.0);
            DiscreteMeasure::new(vec![(fx, 1.0 - a), (anchor.clone(), a)])
        }
        KernelSpec::Mixture(list) => {
            let mut atoms: Vec<(Point, f64)> = Vec::new();
            for (component, weight) in list {
                let part = kernel_atom(component, x)?;
                for a in part.atoms() {
                    atoms.push((a.location.clone(), weight * a.weight));
                }
            }
            DiscreteMeasure::new(atoms)
        }
    }
}

/// Applies the operator: the weighted union of kernel atoms, merged and, if
/// the operator carries a cap, compressed.
pub fn apply_kernel(op: &MwOperator, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    Ok(apply_kernel_traced(op, mu)?.0)
}

/// Same as [`apply_kernel`] but also returns the compression cost bound of
/// this application (zero when no compression happened).
pub fn apply_kernel_traced(
    op: &MwOperator,
    mu: &DiscreteMeasure,
) -> Result<(DiscreteMeasure, f64)> {
    if op.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            left: op.dim(),
            right: mu.dim(),
        });
    }
    let mut atoms: Vec<(Point, f64)> = Vec::new();
    for a in mu.atoms() {
        let part = kernel_atom(&op.kernel, &a.location)?;
        for pa in part.atoms() {
            atoms.push((pa.location.clone(), a.weight * pa.weight));
        }
    }
    let mut merged = merge_duplicates(atoms);
    let mut bound = 0.0;
    if let Some(cap) = op.compression_cap {
        let cost_p = crate::measure::greedy_compress(&mut merged, cap.max(1), op.order);
        bound = cost_p.powf(1.0 / op.order);
    }
    Ok((DiscreteMeasure::new(merged)?, bound))
}

/// Measured and analytic noise level of the operator relative to `map`.
#[derive(Clone, Debug)]
pub struct NoiseLevel {
    /// Max over the sample points of w_p(p(dy|x), delta_f(x)).
    pub estimate: f64,
    /// Uniform bound from the kernel family, when available.
    pub analytic_bound: Option<f64>,
}

/// Estimates sup_x w_p(p(dy|x), delta_f(x)) over the given sample points.
///
/// Each per-point distance is the p-th root of the kernel atom's p-th moment
/// about f(x) (couplings to a Dirac are unique, no solver needed).
pub fn noise_level(
    op: &MwOperator,
    map: &MapSpec,
    sample_points: &[Point],
) -> Result<NoiseLevel> {
    if sample_points.is_empty() {
        return Err(Error::Empty("noise level sample points"));
    }
    let mut estimate = 0.0f64;
    for x in sample_points {
        let atom = kernel_atom(&op.kernel, x)?;
        let fx = dynamics::eval_map(map, x)?;
        let dist = atom.moment(&fx, op.order)?.powf(1.0 / op.order);
        if dist > estimate {
            estimate = dist;
        }
    }
    Ok(NoiseLevel {
        estimate,
        analytic_bound: op.kernel.analytic_noise_bound(op.order, map),
    })
}

/// w_p(P(mu), f_* mu) via the exact solver, with compression disabled.
///
/// Fails with a subsampling hint when either support would exceed the exact
/// solver's practical limit.
pub fn operator_gap(op: &MwOperator, map: &MapSpec, mu: &DiscreteMeasure) -> Result<f64> {
    let uncapped = MwOperator {
        kernel: op.kernel.clone(),
        order: op.order,
        compression_cap: None,
    };
    let image = apply_kernel(&uncapped, mu)?;
    let pushed = dynamics::push_forward(mu, map)?;
    if image.support_size() > OPERATOR_GAP_LIMIT || pushed.support_size() > OPERATOR_GAP_LIMIT {
        return Err(Error::SupportTooLarge {
            size: image.support_size().max(pushed.support_size()),
            limit: OPERATOR_GAP_LIMIT,
        });
    }
    Ok(crate::transport::wasserstein_exact(&image, &pushed, op.order)?.0)
}

/// The p-th absolute moment of the standard normal distribution, computed
/// once per order by adaptive quadrature (relative error 1e-10) and cached.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&p.to_bits()) {
        return v;
    }
    let density = |z: f64| (2.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp();
    let integrand = |z: f64| pow_dist(z, p) * density(z);
    // The integrand is negligible beyond 40 standard deviations.
    let value = adaptive_simpson(&integrand, 0.0, 40.0, 1e-10);
    cache.lock().unwrap().insert(p.to_bits(), value);
    value
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, fa, m, fm, flm);
        let right = simpson(f, m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(f, a, fa, b, fb, fm);
    let scale = whole.abs().max(1e-3);
    recurse(f, a, fa, b, fb, fm, whole, rel_tol * scale, 48)
}

/// Midpoint quantiles of the standard normal, cached per count.
fn quantile_table(n: usize) -> Vec<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<f64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&n) {
        return v.clone();
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let table: Vec<f64> = (1..=n)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64))
        .collect();
    cache.lock().unwrap().insert(n, table.clone());
    table
}

/// Deterministic low-discrepancy pattern inside the closed unit ball.
///
/// Dimension one uses symmetric midpoints; higher dimensions filter the
/// Kronecker sequence built from the generalized golden ratio through the
/// ball.
fn ball_pattern(dim: usize, n: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return (0..n)
            .map(|i| vec![2.0 * ((i as f64 + 0.5) / n as f64) - 1.0])
            .collect();
    }
    // Generalized golden ratio: the root of x^(d+1) = x + 1.
    let mut g = 1.5f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
    }
    let alphas: Vec<f64> = (1..=dim)
        .map(|k| (1.0 / g.powi(k as i32)) % 1.0)
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut k = 0u64;
    while out.len() < n {
        k += 1;
        let coords: Vec<f64> = alphas
            .iter()
            .map(|a| 2.0 * ((0.5 + a * k as f64) % 1.0) - 1.0)
            .collect();
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if norm2 <= 1.0 {
            out.push(coords);
        }
        if k > 1_000_000 {
            // The acceptance ratio of the unit ball makes this unreachable
            // for the dimensions this crate targets.
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn deterministic_kernel_is_dirac_image() {
        let k = KernelSpec::deterministic(MapSpec::affine_1d(2.0, 1.0));
        let atom = kernel_atom(&k, &Point::scalar(3.0)).unwrap();
        assert_eq!(atom.support_size(), 1);
        assert_abs_diff_eq!(atom.atoms()[0].location.coords()[0], 7.0);
        assert_abs_diff_eq!(atom.atoms()[0].weight, 1.0);
    }

    #[test]
    fn collapse_kernel_masses() {
        // Identity base map, anchor 0, eps = 1, p = 1 at x = 2:
        // a = 1 / (1 + 2) = 1/3.
        let k = KernelSpec::collapse(MapSpec::identity(1), Point::scalar(0.0), 1.0, 1.0).unwrap();
        let atom = kernel_atom(&k, &Point::scalar(2.0)).unwrap();
        assert_eq!(atom.support_size(), 2);
        assert_abs_diff_eq!(atom.atoms()[0].weight, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(atom.atoms()[0].location.coords()[0], 0.0);
        assert_abs_diff_eq!(atom.atoms()[1].weight, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn collapse_exact_noise_formula() {
        let eps = 0.7;
        for p in [1.0, 2.0] {
            let k =
                KernelSpec::collapse(MapSpec::identity(1), Point::scalar(0.0), eps, p).unwrap();
            for x in [0.1, 1.0, 2.5, -4.0] {
                let atom = kernel_atom(&k, &Point::scalar(x)).unwrap();
                let measured_p = atom.moment(&Point::scalar(x), p).unwrap();
                let d_p = pow_dist(x.abs(), p);
                let expected = pow_dist(eps, p) * d_p / (1.0 + d_p);
                assert_abs_diff_eq!(measured_p, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_kernel_first_moment() {
        // w_1 of the quantile atom to its center converges to sigma * m_1.
        let sigma = 0.1;
        let k = KernelSpec::gaussian(MapSpec::identity(1), sigma, 64).unwrap();
        let atom = kernel_atom(&k, &Point::scalar(0.5)).unwrap();
        let w1 = atom.moment(&Point::scalar(0.5), 1.0).unwrap();
        let m1 = (2.0 / std::f64::consts::PI).sqrt();
        assert!((w1 - sigma * m1).abs() / (sigma * m1) < 0.02, "w1={w1}");
    }

    #[test]
    fn gaussian_moment_quadrature_matches_closed_forms() {
        let m1 = gaussian_abs_moment(1.0);
        let m2 = gaussian_abs_moment(2.0);
        assert_abs_diff_eq!(m1, (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(m2, 1.0, epsilon = 1e-10);
        // E|Z|^3 = 2 sqrt(2/pi).
        assert_abs_diff_eq!(
            gaussian_abs_moment(3.0),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn ball_kernel_stays_inside_radius() {
        for dim in [1usize, 2, 3] {
            let k = KernelSpec::bounded_uniform(MapSpec::identity(dim), 0.3, 37).unwrap();
            let x = Point::new(vec![0.25; dim]).unwrap();
            let atom = kernel_atom(&k, &x).unwrap();
            assert_eq!(atom.support_size(), 37);
            for a in atom.atoms() {
                assert!(a.location.dist(&x) <= 0.3 + 1e-12);
            }
        }
    }

    #[test]
    fn apply_deterministic_equals_push_forward() {
        let mu = DiscreteMeasure::new(vec![
            (Point::scalar(-1.0), 0.25),
            (Point::scalar(0.5), 0.75),
        ])
        .unwrap();
        let map = MapSpec::affine_1d(0.5, 0.0);
        let op = MwOperator::new(KernelSpec::deterministic(map.clone()), 1.0).unwrap();
        let lhs = apply_kernel(&op, &mu).unwrap();
        let rhs = dynamics::push_forward(&mu, &map).unwrap();
        assert_eq!(lhs.support_size(), rhs.support_size());
        for (a, b) in lhs.atoms().iter().zip(rhs.atoms()) {
            assert_eq!(a.location, b.location);
            assert_abs_diff_eq!(a.weight, b.weight, epsilon = 1e-15);
        }
    }

    #[test]
    fn apply_collapse_to_dirac() {
        let k = KernelSpec::collapse(MapSpec::identity(1), Point::scalar(0.0), 1.0, 1.0).unwrap();
        let op = MwOperator::new(k, 1.0).unwrap();
        let out = apply_kernel(&op, &DiscreteMeasure::dirac(Point::scalar(2.0))).unwrap();
        let w1 = out.moment(&Point::scalar(2.0), 1.0).unwrap();
        assert_abs_diff_eq!(w1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_levels_respect_bounds() {
        let samples: Vec<Point> = (-10..=10).map(|i| Point::scalar(i as f64 * 0.5)).collect();
        let map = MapSpec::identity(1);

        let det = MwOperator::new(KernelSpec::deterministic(map.clone()), 1.0).unwrap();
        let nl = noise_level(&det, &map, &samples).unwrap();
        assert_eq!(nl.estimate, 0.0);
        assert_eq!(nl.analytic_bound, Some(0.0));

        let collapse = MwOperator::new(
            KernelSpec::collapse(map.clone(), Point::scalar(0.0), 0.25, 2.0).unwrap(),
            2.0,
        )
        .unwrap();
        let nl = noise_level(&collapse, &map, &samples).unwrap();
        assert_eq!(nl.analytic_bound, Some(0.25));
        assert!(nl.estimate <= 0.25 + 1e-9);

        let ball = MwOperator::new(
            KernelSpec::bounded_uniform(map.clone(), 0.3, 16).unwrap(),
            1.0,
        )
        .unwrap();
        let nl = noise_level(&ball, &map, &samples).unwrap();
        assert_eq!(nl.analytic_bound, Some(0.3));
        assert!(nl.estimate <= 0.3 + 1e-9);
    }

    #[test]
    fn operator_gap_zero_for_deterministic() {
        let map = MapSpec::pitchfork();
        let op = MwOperator::new(KernelSpec::deterministic(map.clone()), 1.0).unwrap();
        let mu = DiscreteMeasure::new(vec![
            (Point::scalar(2.0), 0.5),
            (Point::scalar(-1.0), 0.5),
        ])
        .unwrap();
        let gap = operator_gap(&op, &map, &mu).unwrap();
        assert!(gap <= 1e-12);
    }

    #[test]
    fn operator_gap_collapse_on_dirac() {
        // On a Dirac the gap is exactly the kernel's own deviation.
        let map = MapSpec::identity(1);
        let k = KernelSpec::collapse(map.clone(), Point::scalar(0.0), 1.0, 2.0).unwrap();
        let op = MwOperator::new(k.clone(), 2.0).unwrap();
        let x = Point::scalar(3.0);
        let gap = operator_gap(&op, &map, &DiscreteMeasure::dirac(x.clone())).unwrap();
        let atom = kernel_atom(&k, &x).unwrap();
        let direct = atom.moment(&x, 2.0).unwrap().sqrt();
        assert_abs_diff_eq!(gap, direct, epsilon = 1e-10);
    }

    #[test]
    fn kernel_grammar_round_trip() {
        let k = KernelSpec::parse("det(pitchfork)").unwrap();
        assert_eq!(k, KernelSpec::deterministic(MapSpec::pitchfork()));

        let k = KernelSpec::parse("gauss(pitchfork, sigma=0.1, n=64)").unwrap();
        assert_eq!(
            k,
            KernelSpec::gaussian(MapSpec::pitchfork(), 0.1, 64).unwrap()
        );

        let k = KernelSpec::parse("ball(affine:0.5,0, r=0.1, n=8)").unwrap();
        match &k {
            KernelSpec::BoundedUniform { radius, n_points, .. } => {
                assert_eq!(*radius, 0.1);
                assert_eq!(*n_points, 8);
            }
            other => panic!("unexpected kernel {other:?}"),
        }

        let k = KernelSpec::parse("collapse(pitchfork, x0=0, eps=0.1, p=1)").unwrap();
        match &k {
            KernelSpec::Collapse { epsilon, order, .. } => {
                assert_eq!(*epsilon, 0.1);
                assert_eq!(*order, 1.0);
            }
            other => panic!("unexpected kernel {other:?}"),
        }

        let k = KernelSpec::parse("mix(det(sqneg)@1, gauss(sqneg, sigma=0.2, n=8)@3)").unwrap();
        match &k {
            KernelSpec::Mixture(list) => {
                assert_eq!(list.len(), 2);
                assert_abs_diff_eq!(list[0].1, 0.25);
                assert_abs_diff_eq!(list[1].1, 0.75);
            }
            other => panic!("unexpected kernel {other:?}"),
        }

        assert!(KernelSpec::parse("gauss(pitchfork, n=4)").is_err());
        assert!(KernelSpec::parse("wavelet(x)").is_err());
        assert!(KernelSpec::parse("det(pitchfork").is_err());
    }

    #[test]
    fn mixture_kernel_convex_combination() {
        let map = MapSpec::identity(1);
        let k = KernelSpec::mixture(vec![
            (KernelSpec::deterministic(map.clone()), 0.5),
            (
                KernelSpec::collapse(map, Point::scalar(0.0), 1.0, 1.0).unwrap(),
                0.5,
            ),
        ])
        .unwrap();
        let atom = kernel_atom(&k, &Point::scalar(2.0)).unwrap();
        // Half the mass stays deterministic at 2; the collapse half splits
        // 1/3 to the anchor: weights : {2: 0.5 + 0.5*2/3, 0: 0.5/3}.
        assert_eq!(atom.support_size(), 2);
        assert_abs_diff_eq!(atom.atoms()[0].weight, 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(atom.atoms()[1].weight, 5.0 / 6.0, epsilon = 1e-12);
    }
}
