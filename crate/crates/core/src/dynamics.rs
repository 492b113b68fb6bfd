//! Deterministic self-maps of R^d and their action on discrete measures.
//!
//! Besides affine maps and parsed expressions there are two builtins: the
//! time-1 map of the cubic flow dx/dt = x - x^3 (two stable equilibria at
//! +-1, an unstable one at 0, global attractor [-1, 1]) and the piecewise
//! map x >= 0 -> 0, x < 0 -> x^2 whose second iterate is identically zero
//! yet whose push-forward is not continuous in any Wasserstein order.

use crate::expr::{self, ExprAst};
use crate::measure::{DiscreteMeasure, Point};
use crate::{Error, Result};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default integration step of the cubic-flow time-1 map.
pub const DEFAULT_PITCHFORK_STEP: f64 = 1.0 / 64.0;

/// Stability target for the integrator: substeps shrink so that
/// |1 - 3x^2| * h never exceeds this (classical RK4 is stable on the real
/// axis up to about 2.79).
const STABILITY_TARGET: f64 = 2.5;

/// Fixed seed for the optional random samples of the scan routines, so the
/// profiles are reproducible without threading a seed through every call.
const SCAN_SEED: u64 = 0x5eed_5ca1;

/// A deterministic self-map of R^d: same input bits, same output bits.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    /// Time-1 map of dx/dt = x - x^3, integrated by classical 4th-order
    /// steps of at most `step` (dimension 1).
    PitchforkTime1 { step: f64 },
    /// x >= 0 -> 0; x < 0 -> x^2 (dimension 1).
    SquareNegative,
    /// x -> A x + b with a row-major d x d matrix.
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
    /// One parsed component expression per output coordinate.
    Expression { components: Vec<ExprAst> },
    /// Applies the listed maps left to right.
    Composition(Vec<MapSpec>),
}

impl MapSpec {
    pub fn pitchfork() -> Self {
        MapSpec::PitchforkTime1 {
            step: DEFAULT_PITCHFORK_STEP,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        MapSpec::Affine {
            matrix,
            offset: vec![0.0; dim],
        }
    }

    /// 1-D affine map x -> a x + b.
    pub fn affine_1d(a: f64, b: f64) -> Self {
        MapSpec::Affine {
            matrix: vec![a],
            offset: vec![b],
        }
    }

    pub fn expression(src: &str) -> Result<Self> {
        Ok(MapSpec::Expression {
            components: expr::parse_map_components(src)?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            MapSpec::PitchforkTime1 { .. } | MapSpec::SquareNegative => 1,
            MapSpec::Affine { offset, .. } => offset.len(),
            MapSpec::Expression { components } => components.len(),
            MapSpec::Composition(list) => list.first().map_or(0, MapSpec::dim),
        }
    }

    /// Parses the builtin grammar used by the CLI and kernel specs:
    /// `pitchfork[:STEP]`, `sqneg`, `id[:D]`, `affine:a,b`, `expr:...`.
    pub fn parse(src: &str) -> Result<Self> {
        let src = src.trim();
        let (head, rest) = match src.find(':') {
            Some(idx) => (&src[..idx], Some(src[idx + 1..].trim())),
            None => (src, None),
        };
        match head {
            "pitchfork" => {
                let step = match rest {
                    None | Some("") => DEFAULT_PITCHFORK_STEP,
                    Some(text) => parse_step(text)?,
                };
                if !(step > 0.0 && step <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "pitchfork step {step} must lie in (0, 1]"
                    )));
                }
                Ok(MapSpec::PitchforkTime1 { step })
            }
            "sqneg" => Ok(MapSpec::SquareNegative),
            "id" | "identity" => {
                let dim = match rest {
                    None | Some("") => 1,
                    Some(text) => text.parse::<usize>().map_err(|_| {
                        Error::InvalidParameter(format!("bad identity dimension `{text}`"))
                    })?,
                };
                if dim == 0 {
                    return Err(Error::InvalidParameter("identity dimension 0".into()));
                }
                Ok(MapSpec::identity(dim))
            }
            "affine" => {
                let body = rest.unwrap_or("");
                let parts: Vec<&str> = body.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::InvalidParameter(format!(
                        "affine expects `affine:a,b`, got `{src}`"
                    )));
                }
                let a: f64 = parts[0].parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad affine coefficient `{}`", parts[0]))
                })?;
                let b: f64 = parts[1].parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad affine offset `{}`", parts[1]))
                })?;
                Ok(MapSpec::affine_1d(a, b))
            }
            "expr" => match rest {
                Some(body) if !body.is_empty() => MapSpec::expression(body),
                _ => Err(Error::InvalidParameter("empty expr map".into())),
            },
            other => Err(Error::InvalidParameter(format!(
                "unknown map `{other}` (expected pitchfork, sqneg, id, affine:a,b, expr:...)"
            ))),
        }
    }
}

fn parse_step(text: &str) -> Result<f64> {
    if let Some((num, den)) = text.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| bad_step(text))?;
        let d: f64 = den.trim().parse().map_err(|_| bad_step(text))?;
        if d == 0.0 {
            return Err(bad_step(text));
        }
        return Ok(n / d);
    }
    text.parse().map_err(|_| bad_step(text))
}

fn bad_step(text: &str) -> Error {
    Error::InvalidParameter(format!("bad step `{text}`"))
}

/// Evaluates the map at a point.
pub fn eval_map(map: &MapSpec, x: &Point) -> Result<Point> {
    if map.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: map.dim(),
            right: x.dim(),
        });
    }
    match map {
        MapSpec::PitchforkTime1 { step } => {
            Point::new(vec![pitchfork_time1(x.coords()[0], *step)])
        }
        MapSpec::SquareNegative => {
            let v = x.coords()[0];
            Point::new(vec![if v >= 0.0 { 0.0 } else { v * v }])
        }
        MapSpec::Affine { matrix, offset } => {
            let d = offset.len();
            let mut out = offset.clone();
            for i in 0..d {
                for (j, xv) in x.coords().iter().enumerate() {
                    out[i] += matrix[i * d + j] * xv;
                }
            }
            Point::new(out)
        }
        MapSpec::Expression { components } => {
            let mut out = Vec::with_capacity(components.len());
            for c in components {
                out.push(expr::eval_ast(c, x.coords())?);
            }
            Point::new(out)
        }
        MapSpec::Composition(list) => {
            let mut current = x.clone();
            for f in list {
                current = eval_map(f, &current)?;
            }
            Ok(current)
        }
    }
}

/// Time-1 map of dx/dt = x - x^3 by classical 4th-order steps.
///
/// The nominal step is subdivided wherever |1 - 3x^2| * h would exceed the
/// RK4 stability target, so evaluation stays finite for arbitrarily large
/// |x0| (the cubic transient is integrated with proportionally finer steps).
fn pitchfork_time1(x0: f64, nominal_step: f64) -> f64 {
    let f = |x: f64| x - x * x * x;
    let mut x = x0;
    let mut t = 0.0;
    while 1.0 - t > 1e-14 {
        let stiffness = (1.0 - 3.0 * x * x).abs().max(1.0);
        let h = nominal_step.min(STABILITY_TARGET / stiffness).min(1.0 - t);
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// Push-forward of a measure: each atom (x, w) maps to (f(x), w) and
/// coincident images merge.
pub fn push_forward(mu: &DiscreteMeasure, map: &MapSpec) -> Result<DiscreteMeasure> {
    let mut atoms = Vec::with_capacity(mu.support_size());
    for a in mu.atoms() {
        atoms.push((eval_map(map, &a.location)?, a.weight));
    }
    DiscreteMeasure::new(atoms)
}

/// Anchor grid over the cubic flow's global attractor [-1, 1].
pub fn pitchfork_attractor_anchors(spacing: f64) -> Vec<Point> {
    let mut anchors = Vec::new();
    let mut x = -1.0;
    while x < 1.0 - 1e-12 {
        anchors.push(Point::scalar(x));
        x += spacing;
    }
    anchors.push(Point::scalar(1.0));
    anchors
}

/// One row of a growth-ratio profile.
#[derive(Clone, Debug)]
pub struct GrowthRow {
    pub radius: f64,
    pub max_ratio: f64,
}

/// Scan of sup |f(x) - x0| / (1 + |x - x0|) over balls of growing radius.
///
/// A bounded profile is the numeric signature of the criterion under which a
/// map acts continuously on every Wasserstein order; the verdict is a
/// heuristic flag (a finite scan can never prove the supremum finite).
#[derive(Clone, Debug)]
pub struct GrowthProfile {
    pub rows: Vec<GrowthRow>,
    pub unbounded_suspect: bool,
}

/// Evaluates the growth ratio over a deterministic shell lattice (2d+1
/// points per shell at 32 log-spaced norms per radius) plus optional seeded
/// uniform samples, and flags the profile unbounded-suspect when it grows by
/// more than a factor of 2 over the last three radii.
pub fn growth_ratio_profile(
    map: &MapSpec,
    x0: &Point,
    radii: &[f64],
    samples_per_radius: usize,
) -> Result<GrowthProfile> {
    validate_radii(radii)?;
    if map.dim() != x0.dim() {
        return Err(Error::DimensionMismatch {
            left: map.dim(),
            right: x0.dim(),
        });
    }
    let mut rows = Vec::with_capacity(radii.len());
    for (ridx, &radius) in radii.iter().enumerate() {
        let mut max_ratio = 0.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(SCAN_SEED.wrapping_add(ridx as u64));
        for x in ball_scan(x0, radius, samples_per_radius, &mut rng) {
            let fx = eval_map(map, &x)?;
            let ratio = fx.dist(x0) / (1.0 + x.dist(x0));
            if ratio > max_ratio {
                max_ratio = ratio;
            }
        }
        rows.push(GrowthRow { radius, max_ratio });
    }
    let unbounded_suspect = if rows.len() >= 3 {
        let base = rows[rows.len() - 3].max_ratio;
        rows[rows.len() - 1].max_ratio > 2.0 * base
    } else if rows.len() == 2 {
        rows[1].max_ratio > 2.0 * rows[0].max_ratio
    } else {
        false
    };
    Ok(GrowthProfile {
        rows,
        unbounded_suspect,
    })
}

/// One radius of a contraction scan.
#[derive(Clone, Debug)]
pub struct ContractionRow {
    pub radius: f64,
    /// Max |f^m(x) - x0| over the scanned points of the ball.
    pub max_image_norm: f64,
    /// Whether the ball contracted into the c-scaled ball.
    pub contracted: bool,
    /// Whether the image stayed inside the original ball.
    pub within_fixed: bool,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    pub iterations: usize,
    pub contraction_factor: f64,
    pub rows: Vec<ContractionRow>,
    pub all_contracted: bool,
    /// Max image norm over every scanned radius (finite-time bound witness).
    pub sup_image_norm: f64,
}

/// Iterates the map `m` times over scanned balls and reports whether
/// f^m(B_R) lands inside B_{cR} (and inside B_R itself).
pub fn contraction_check(
    map: &MapSpec,
    x0: &Point,
    iterations: usize,
    radii: &[f64],
    contraction_factor: f64,
    samples_per_radius: usize,
) -> Result<ContractionReport> {
    validate_radii(radii)?;
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "contraction check needs at least one iteration".into(),
        ));
    }
    if !(0.0..1.0).contains(&contraction_factor) {
        return Err(Error::InvalidParameter(format!(
            "contraction factor {contraction_factor} must lie in [0, 1)"
        )));
    }
    if map.dim() != x0.dim() {
        return Err(Error::DimensionMismatch {
            left: map.dim(),
            right: x0.dim(),
        });
    }
    let mut rows = Vec::with_capacity(radii.len());
    let mut sup_image_norm = 0.0f64;
    for (ridx, &radius) in radii.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(SCAN_SEED.wrapping_add(1000 + ridx as u64));
        let mut max_norm = 0.0f64;
        for start in ball_scan(x0, radius, samples_per_radius, &mut rng) {
            let mut x = start;
            for _ in 0..iterations {
                x = eval_map(map, &x)?;
            }
            let norm = x.dist(x0);
            if norm > max_norm {
                max_norm = norm;
            }
        }
        sup_image_norm = sup_image_norm.max(max_norm);
        rows.push(ContractionRow {
            radius,
            max_image_norm: max_norm,
            contracted: max_norm <= contraction_factor * radius + 1e-12,
            within_fixed: max_norm <= radius + 1e-12,
        });
    }
    let all_contracted = rows.iter().all(|r| r.contracted);
    Ok(ContractionReport {
        iterations,
        contraction_factor,
        rows,
        all_contracted,
        sup_image_norm,
    })
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Empty("radii"));
    }
    if radii[0] <= 0.0 {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    for w in radii.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "radii must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Deterministic ball lattice: 2d+1 shell points (axis pairs plus the
/// normalized diagonal) at each of 32 log-spaced norms up to the radius,
/// plus `extra` seeded uniform samples.
fn ball_scan(x0: &Point, radius: f64, extra: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let d = x0.dim();
    let mut points = Vec::with_capacity(32 * (2 * d + 1) + extra + 1);
    points.push(x0.clone());
    for k in 0..32 {
        let r = radius * 1e-3f64.powf(1.0 - k as f64 / 31.0);
        for axis in 0..d {
            for sign in [-1.0, 1.0] {
                let mut coords = x0.coords().to_vec();
                coords[axis] += sign * r;
                points.push(Point::new(coords).expect("finite lattice point"));
            }
        }
        let diag = r / (d as f64).sqrt();
        let coords: Vec<f64> = x0.coords().iter().map(|c| c + diag).collect();
        points.push(Point::new(coords).expect("finite lattice point"));
    }
    let mut accepted = 0usize;
    while accepted < extra {
        let coords: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if norm2 <= 1.0 {
            let coords: Vec<f64> = x0
                .coords()
                .iter()
                .zip(&coords)
                .map(|(c, u)| c + radius * u)
                .collect();
            points.push(Point::new(coords).expect("finite sample point"));
            accepted += 1;
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed-form solution of dx/dt = x - x^3 (test oracle).
    fn cubic_flow(x0: f64, t: f64) -> f64 {
        x0 * t.exp() / (1.0 - x0 * x0 + x0 * x0 * (2.0 * t).exp()).sqrt()
    }

    #[test]
    fn pitchfork_fixed_points_are_exact() {
        let map = MapSpec::pitchfork();
        for x in [-1.0, 0.0, 1.0] {
            let y = eval_map(&map, &Point::scalar(x)).unwrap();
            assert_abs_diff_eq!(y.coords()[0], x, epsilon = 1e-15);
        }
    }

    #[test]
    fn pitchfork_matches_closed_form_at_two() {
        let map = MapSpec::pitchfork();
        let y = eval_map(&map, &Point::scalar(2.0)).unwrap().coords()[0];
        // Frozen from the closed form x0 e / sqrt(1 - x0^2 + x0^2 e^2).
        assert_abs_diff_eq!(y, 1.0549729219451953, epsilon = 1e-6);
    }

    #[test]
    fn pitchfork_fourth_order_convergence() {
        // Halving the step must cut the closed-form error by at least 8x.
        for &x0 in &[0.3, 0.8, 1.2, 1.7, 2.0, 2.5] {
            let exact = cubic_flow(x0, 1.0);
            let coarse = (eval_map(
                &MapSpec::PitchforkTime1 { step: 1.0 / 64.0 },
                &Point::scalar(x0),
            )
            .unwrap()
            .coords()[0]
                - exact)
                .abs();
            let fine = (eval_map(
                &MapSpec::PitchforkTime1 { step: 1.0 / 128.0 },
                &Point::scalar(x0),
            )
            .unwrap()
            .coords()[0]
                - exact)
                .abs();
            assert!(
                coarse >= 8.0 * fine,
                "order check failed at x0={x0}: coarse={coarse:.3e} fine={fine:.3e}"
            );
        }
    }

    #[test]
    fn pitchfork_stays_finite_far_out() {
        let map = MapSpec::pitchfork();
        for &x0 in &[50.0, -300.0, 1000.0] {
            let y = eval_map(&map, &Point::scalar(x0)).unwrap().coords()[0];
            assert!(y.is_finite());
            // All large starts funnel to just above the attracting equilibrium.
            assert!((y.abs() - 1.075).abs() < 0.01, "x0={x0} gave {y}");
        }
    }

    #[test]
    fn square_negative_values() {
        let map = MapSpec::SquareNegative;
        assert_abs_diff_eq!(
            eval_map(&map, &Point::scalar(-3.0)).unwrap().coords()[0],
            9.0
        );
        assert_abs_diff_eq!(
            eval_map(&map, &Point::scalar(5.0)).unwrap().coords()[0],
            0.0
        );
        // Second iterate vanishes identically.
        for x in [-7.3, -0.5, 0.0, 2.0] {
            let once = eval_map(&map, &Point::scalar(x)).unwrap();
            let twice = eval_map(&map, &once).unwrap();
            assert_eq!(twice.coords()[0], 0.0);
        }
    }

    #[test]
    fn push_forward_maps_atoms() {
        let mu = DiscreteMeasure::new(vec![
            (Point::scalar(-1.0), 0.5),
            (Point::scalar(1.0), 0.5),
        ])
        .unwrap();
        let out = push_forward(&mu, &MapSpec::SquareNegative).unwrap();
        assert_eq!(out.support_size(), 2);
        let locs: Vec<f64> = out.atoms().iter().map(|a| a.location.coords()[0]).collect();
        assert_eq!(locs, vec![0.0, 1.0]);
        assert_abs_diff_eq!(out.total_weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn push_forward_merges_coincident_images() {
        let mu = DiscreteMeasure::new(vec![
            (Point::scalar(1.0), 0.25),
            (Point::scalar(2.0), 0.25),
            (Point::scalar(3.0), 0.5),
        ])
        .unwrap();
        // Everything nonnegative collapses onto 0.
        let out = push_forward(&mu, &MapSpec::SquareNegative).unwrap();
        assert_eq!(out.support_size(), 1);
        assert_abs_diff_eq!(out.atoms()[0].weight, 1.0);
    }

    #[test]
    fn composition_is_sequential_application() {
        let comp = MapSpec::Composition(vec![
            MapSpec::affine_1d(2.0, 0.0),
            MapSpec::affine_1d(1.0, 3.0),
        ]);
        let y = eval_map(&comp, &Point::scalar(5.0)).unwrap();
        assert_abs_diff_eq!(y.coords()[0], 13.0);
    }

    #[test]
    fn growth_profile_identity_bounded() {
        let profile = growth_ratio_profile(
            &MapSpec::identity(1),
            &Point::scalar(0.0),
            &[10.0, 100.0, 1000.0],
            8,
        )
        .unwrap();
        assert!(!profile.unbounded_suspect);
        for row in &profile.rows {
            assert!(row.max_ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn growth_profile_flags_square_negative() {
        let profile = growth_ratio_profile(
            &MapSpec::SquareNegative,
            &Point::scalar(0.0),
            &[10.0, 100.0, 1000.0],
            0,
        )
        .unwrap();
        assert!(profile.unbounded_suspect);
        // Max ratio at radius R is R^2 / (1 + R), attained at x = -R.
        let expect = [100.0 / 11.0, 10_000.0 / 101.0, 1_000_000.0 / 1001.0];
        for (row, e) in profile.rows.iter().zip(expect) {
            assert_abs_diff_eq!(row.max_ratio, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn growth_profile_pitchfork_bounded() {
        let profile = growth_ratio_profile(
            &MapSpec::pitchfork(),
            &Point::scalar(0.0),
            &[10.0, 100.0, 1000.0],
            8,
        )
        .unwrap();
        assert!(!profile.unbounded_suspect);
        for row in &profile.rows {
            assert!(row.max_ratio <= 1.08, "ratio {}", row.max_ratio);
        }
    }

    #[test]
    fn contraction_affine_half() {
        let report = contraction_check(
            &MapSpec::affine_1d(0.5, 0.0),
            &Point::scalar(0.0),
            1,
            &[1.0, 10.0, 100.0],
            0.5,
            16,
        )
        .unwrap();
        assert!(report.all_contracted);
    }

    #[test]
    fn contraction_square_negative_two_steps() {
        let report = contraction_check(
            &MapSpec::SquareNegative,
            &Point::scalar(0.0),
            2,
            &[1.0, 5.0, 25.0],
            0.5,
            16,
        )
        .unwrap();
        assert_eq!(report.sup_image_norm, 0.0);
        assert!(report.rows.iter().all(|r| r.within_fixed));
    }

    #[test]
    fn contraction_pitchfork_three_steps() {
        let report = contraction_check(
            &MapSpec::pitchfork(),
            &Point::scalar(0.0),
            3,
            &[10.0],
            0.5,
            16,
        )
        .unwrap();
        assert!(report.all_contracted);
        assert!(report.sup_image_norm <= 1.01);
    }

    #[test]
    fn map_parsing() {
        assert_eq!(MapSpec::parse("pitchfork").unwrap(), MapSpec::pitchfork());
        assert_eq!(
            MapSpec::parse("pitchfork:1/128").unwrap(),
            MapSpec::PitchforkTime1 { step: 1.0 / 128.0 }
        );
        assert_eq!(MapSpec::parse("sqneg").unwrap(), MapSpec::SquareNegative);
        assert_eq!(
            MapSpec::parse("affine:0.5,1").unwrap(),
            MapSpec::affine_1d(0.5, 1.0)
        );
        assert_eq!(MapSpec::parse("id").unwrap(), MapSpec::identity(1));
        assert_eq!(MapSpec::parse("id:3").unwrap(), MapSpec::identity(3));
        let m = MapSpec::parse("expr:x - x^3").unwrap();
        assert_eq!(m.dim(), 1);
        assert!(MapSpec::parse("nope").is_err());
        assert!(MapSpec::parse("affine:1").is_err());
    }

    #[test]
    fn anchors_cover_attractor() {
        let anchors = pitchfork_attractor_anchors(0.05);
        assert_eq!(anchors.first().unwrap().coords()[0], -1.0);
        assert_eq!(anchors.last().unwrap().coords()[0], 1.0);
        assert!(anchors.len() >= 40);
    }
}
