//! Floating-point ground truth for the lattice map: direct iteration, Newton
//! period-2 orbits and heteroclinic traces. Nothing here is rigorous.

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polyalg::{rat, Rational};
use crate::rdt_app::{BoxLambda, RdtSystem};

/// Forward orbits are "at the origin" below this max-norm.
pub const ORIGIN_TOL: f64 = 1e-10;
/// Backward orbits have reached the period-2 pair below this distance.
pub const PAIR_TOL: f64 = 1e-8;
pub const PERIOD2_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    Forward,
    Backward,
    Period2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitPoint {
    /// `(u_{n−1}, u_n)`
    pub u: [f64; 2],
    pub xy: [f64; 2],
    /// `‖F(p_k) − p_{k+1}‖_∞` for forward and backward orbits, `‖F²(p) − p‖_∞` for period-2.
    pub residual: f64,
}

impl OrbitPoint {
    fn new(u: [f64; 2], residual: f64) -> Self {
        Self { u, xy: RdtSystem::to_xy_f64(u), residual }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Orbit {
    pub lambda: f64,
    pub kind: OrbitKind,
    pub points: Vec<OrbitPoint>,
    pub residual: f64,
}

impl Orbit {
    fn from_points(lambda: f64, kind: OrbitKind, points: Vec<OrbitPoint>) -> Self {
        let residual = points.iter().map(|p| p.residual).fold(0.0, f64::max);
        Self { lambda, kind, points, residual }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,u_prev,u_n,x,y,residual\n");
        for (k, p) in self.points.iter().enumerate() {
            let r = if p.residual.is_nan() { String::new() } else { format!("{:e}", p.residual) };
            out.push_str(&format!("{k},{:e},{:e},{:e},{:e},{r}\n", p.u[0], p.u[1], p.xy[0], p.xy[1]));
        }
        out
    }
}

/// Long orbits get exact residuals on at most this many evenly spaced steps; the rest are NaN.
pub const EXACT_RESIDUAL_SAMPLES: usize = 10_000;

fn residual_stride(n: usize) -> usize {
    n.div_ceil(EXACT_RESIDUAL_SAMPLES).max(1)
}

fn norm(p: [f64; 2]) -> f64 {
    p[0].abs().max(p[1].abs())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

fn to_rat(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

fn rat_point(p: [f64; 2]) -> Result<[Rational; 2]> {
    Ok([to_rat(p[0])?, to_rat(p[1])?])
}

/// `‖F(p) − q‖_∞` with `F` evaluated exactly.
pub fn exact_step_residual(lambda: &Rational, p: [f64; 2], q: [f64; 2]) -> Result<f64> {
    let fp = RdtSystem { lambda: lambda.clone() }.u_map(&rat_point(p)?);
    let q = rat_point(q)?;
    let d0 = (&fp[0] - &q[0]).to_f64().unwrap_or(f64::INFINITY).abs();
    let d1 = (&fp[1] - &q[1]).to_f64().unwrap_or(f64::INFINITY).abs();
    Ok(d0.max(d1))
}

/// `F²(p) − p`, evaluated exactly and rounded to the nearest doubles.
pub fn exact_period2_defect(lambda: &Rational, p: [f64; 2]) -> Result<[f64; 2]> {
    let sys = RdtSystem { lambda: lambda.clone() };
    let r = rat_point(p)?;
    let f2 = sys.u_map(&sys.u_map(&r));
    let d = |i: usize| (&f2[i] - &r[i]).to_f64().unwrap_or(f64::INFINITY);
    Ok([d(0), d(1)])
}

/// Inverse of the map: `u_{n−1}` is linear in the second component, so no root finding is needed.
pub fn inverse_u_map_f64(lambda: f64, q: [f64; 2]) -> [f64; 2] {
    let b = q[0];
    let a = (-(3.0 + lambda) * b - 3.0 * b * b + b * b * b - q[1]) / 2.0;
    [a, b]
}

fn jacobian(lambda: f64, p: [f64; 2]) -> [[f64; 2]; 2] {
    let b = p[1];
    [[0.0, 1.0], [-2.0, -(3.0 + lambda) - 6.0 * b + 3.0 * b * b]]
}

fn matmul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([(r[0] * m[1][1] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det])
}

fn eig2(m: [[f64; 2]; 2]) -> Option<[f64; 2]> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some([tr / 2.0 - r, tr / 2.0 + r])
}

pub fn iterate_map(lambda: &Rational, p0: [f64; 2], n: usize, direction: Direction) -> Result<Orbit> {
    let lf = lambda.to_f64().unwrap_or(0.0);
    let mut pts = vec![p0];
    for _ in 0..n {
        let p = *pts.last().expect("nonempty");
        let q = match direction {
            Direction::Forward => RdtSystem::u_map_f64(lf, p),
            Direction::Backward => inverse_u_map_f64(lf, p),
        };
        if !(q[0].is_finite() && q[1].is_finite()) {
            return Err(Error::Domain("orbit left the floating-point range".into()));
        }
        pts.push(q);
    }
    let mut out = Vec::with_capacity(pts.len());
    let stride = residual_stride(n);
    for k in 0..pts.len() {
        let r = match direction {
            _ if k % stride != 0 && k + 1 < pts.len() => f64::NAN,
            Direction::Forward if k + 1 < pts.len() => exact_step_residual(lambda, pts[k], pts[k + 1])?,
            Direction::Backward if k + 1 < pts.len() => exact_step_residual(lambda, pts[k + 1], pts[k])?,
            _ => 0.0,
        };
        out.push(OrbitPoint::new(pts[k], r));
    }
    let kind = match direction {
        Direction::Forward => OrbitKind::Forward,
        Direction::Backward => OrbitKind::Backward,
    };
    Ok(Orbit::from_points(lf, kind, out))
}

/// Center-manifold image of a center coordinate, `(ξ + (3/2)ξ², P_K(λ, ξ))` in the `(x, y)` chart.
pub fn k_image_xy(lambda: f64, xi: f64) -> [f64; 2] {
    [xi + 1.5 * xi * xi, -2.0 * lambda * xi - 2.0 * xi * xi + 8.0 * xi * xi * xi]
}

/// Local inverse of `ξ ↦ ξ + (3/2)ξ²` near 0.
pub fn center_coordinate(x: f64) -> f64 {
    2.0 * x / (1.0 + (1.0 + 6.0 * x).sqrt())
}

/// Default Newton seed: `ξ = √λ/2` pushed through the center-manifold jet.
pub fn default_seed(lambda: f64) -> [f64; 2] {
    RdtSystem::to_u_f64(k_image_xy(lambda, lambda.max(0.0).sqrt() / 2.0))
}

/// Newton on `F²(p) − p`. Below `λ = 10⁻⁶` the defect is evaluated exactly
/// (iterative refinement), since the problem conditioning degrades like `λ`.
pub fn find_period2(lambda: &Rational, seed: [f64; 2]) -> Result<Orbit> {
    let lf = lambda.to_f64().unwrap_or(0.0);
    if lf <= 0.0 {
        return Err(Error::Precondition("a nontrivial period-2 orbit needs λ > 0".into()));
    }
    let refine = lf < 1e-6;
    let defect = |p: [f64; 2]| -> Result<[f64; 2]> {
        if refine {
            exact_period2_defect(lambda, p)
        } else {
            let q = RdtSystem::u_map_f64(lf, RdtSystem::u_map_f64(lf, p));
            Ok([q[0] - p[0], q[1] - p[1]])
        }
    };
    let mut p = seed;
    let mut converged = false;
    for _ in 0..100 {
        let d = defect(p)?;
        let q = RdtSystem::u_map_f64(lf, p);
        let mut j = matmul(jacobian(lf, q), jacobian(lf, p));
        j[0][0] -= 1.0;
        j[1][1] -= 1.0;
        let step = solve2(j, [-d[0], -d[1]]).ok_or_else(|| Error::Newton("singular Jacobian of F² − id".into()))?;
        p = [p[0] + step[0], p[1] + step[1]];
        if !(p[0].is_finite() && p[1].is_finite()) || norm(p) > 10.0 {
            return Err(Error::Newton("iterates diverged".into()));
        }
        if norm(step) <= 1e-17 * norm(p).max(1e-300) {
            converged = true;
            break;
        }
    }
    let scale = lf.sqrt() / 2.0;
    if norm(p) < 1e-3 * scale {
        return Err(Error::Newton("converged to the trivial fixed point at the origin".into()));
    }
    let q = RdtSystem::u_map_f64(lf, p);
    if dist(p, q) < 1e-3 * scale {
        return Err(Error::Newton("converged to a fixed point, not a period-2 orbit".into()));
    }
    let rp = norm(exact_period2_defect(lambda, p)?);
    let rq = norm(exact_period2_defect(lambda, q)?);
    if !converged && rp.max(rq) > PERIOD2_TOL {
        return Err(Error::Newton(format!("no convergence; residual {:e}", rp.max(rq))));
    }
    if rp.max(rq) > PERIOD2_TOL {
        return Err(Error::Newton(format!("residual {:e} above {PERIOD2_TOL:e}", rp.max(rq))));
    }
    // order the pair so that the point with positive center coordinate comes first
    let mut pts = vec![OrbitPoint::new(p, rp), OrbitPoint::new(q, rq)];
    if pts[0].xy[0] < pts[1].xy[0] {
        pts.swap(0, 1);
    }
    Ok(Orbit::from_points(lf, OrbitKind::Period2, pts))
}

/// Eigenvalues of `DF²` at the first point of a period-2 orbit, sorted by modulus.
pub fn period2_multipliers(orbit: &Orbit) -> Option<[f64; 2]> {
    let p = orbit.points.first()?.u;
    let q = RdtSystem::u_map_f64(orbit.lambda, p);
    let mut e = eig2(matmul(jacobian(orbit.lambda, q), jacobian(orbit.lambda, p)))?;
    e.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    Some(e)
}

/// Inner margin of a phase point in the `(x, y)` chart: positive iff it lies in `B_λ`
/// for every value inside the enclosing intervals.
pub fn box_margin(b: &BoxLambda, xy: [f64; 2]) -> f64 {
    (xy[0] - b.c_minus.hi)
        .min(b.c_plus.lo - xy[0])
        .min(xy[1] - b.u_minus.hi)
        .min(b.u_plus.lo - xy[1])
}

#[derive(Clone, Debug, Serialize)]
pub struct PointCheck {
    pub xy: [f64; 2],
    pub center: f64,
    pub box_margin: f64,
    /// Margin of the center coordinate in its `W` interval.
    pub w_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnclosureCheck {
    pub points: Vec<PointCheck>,
    pub min_margin: f64,
    pub pass: bool,
}

/// Checks both orbit points against `B_λ` and their center coordinates against `W_±`.
pub fn verify_enclosure(orbit: &Orbit, report: &crate::rdt_app::EnclosureReport) -> Result<EnclosureCheck> {
    if orbit.kind != OrbitKind::Period2 {
        return Err(Error::Precondition("verify_enclosure expects a period-2 orbit".into()));
    }
    if !report.lambda.contains(orbit.lambda) {
        return Err(Error::Precondition(format!("orbit at λ = {:e} but report at λ = {}", orbit.lambda, report.lambda)));
    }
    let w_margin = |xi: f64| {
        let w = if xi >= 0.0 { report.w_plus } else { report.w_minus };
        (xi - w.lo).min(w.hi - xi)
    };
    let points: Vec<PointCheck> = orbit
        .points
        .iter()
        .map(|p| {
            let center = center_coordinate(p.xy[0]);
            PointCheck { xy: p.xy, center, box_margin: box_margin(&report.box_lambda, p.xy), w_margin: w_margin(center) }
        })
        .collect();
    let min_margin = points.iter().map(|p| p.box_margin.min(p.w_margin)).fold(f64::INFINITY, f64::min);
    // at λ = 0 the orbit, the box and the W intervals all collapse to the origin
    let degenerate = report.lambda.hi == 0.0 && points.iter().all(|p| norm(p.xy) == 0.0);
    Ok(EnclosureCheck { pass: degenerate || min_margin > 0.0, points, min_margin })
}

/// Trivial orbit used when `λ = 0`: the pair collapses to the origin.
pub fn origin_orbit() -> Orbit {
    Orbit::from_points(0.0, OrbitKind::Period2, vec![OrbitPoint::new([0.0, 0.0], 0.0); 2])
}

/// Forward orbit on the center manifold. Plain iteration would leave the manifold
/// (the transverse multiplier is −2), so the orbit is obtained from alternating
/// sweeps: `x` forward with `y` frozen, then `y` backward from the manifold value at
/// the last step with `x` frozen. `x₀` stays fixed.
pub fn center_forward_orbit(lambda: &Rational, xy0: [f64; 2], n: usize) -> Result<Orbit> {
    let lf = lambda.to_f64().unwrap_or(0.0);
    let w = |s: f64| s * s * s - 3.0 * s * s - lf * s;
    let dw = |s: f64| 3.0 * s * s - 6.0 * s - lf;
    let mut x = vec![xy0[0]; n + 1];
    let mut y = vec![xy0[1]; n + 1];
    for _ in 0..200 {
        for k in 0..n {
            x[k + 1] = -x[k] - w(x[k] + y[k]);
        }
        let last_y = k_image_xy(lf, center_coordinate(x[n]))[1];
        let mut change = (y[n] - last_y).abs();
        y[n] = last_y;
        for k in (0..n).rev() {
            // solve −2y + 2w(x_k + y) = y_{k+1}
            let mut v = y[k];
            for _ in 0..20 {
                let f = -2.0 * v + 2.0 * w(x[k] + v) - y[k + 1];
                let step = f / (-2.0 + 2.0 * dw(x[k] + v));
                v -= step;
                if step.abs() <= 1e-18 * v.abs().max(1e-300) {
                    break;
                }
            }
            change = change.max((v - y[k]).abs());
            y[k] = v;
        }
        if change <= 1e-19 * norm(xy0).max(1e-300) {
            break;
        }
    }
    for k in 0..n {
        x[k + 1] = -x[k] - w(x[k] + y[k]);
    }
    let us: Vec<[f64; 2]> = (0..=n).map(|k| RdtSystem::to_u_f64([x[k], y[k]])).collect();
    let mut pts = Vec::with_capacity(n + 1);
    let stride = residual_stride(n);
    for k in 0..=n {
        let r = if k < n && k % stride != 0 {
            f64::NAN
        } else if k < n { exact_step_residual(lambda, us[k], us[k + 1])? } else { 0.0 };
        pts.push(OrbitPoint::new(us[k], r));
    }
    Ok(Orbit::from_points(lf, OrbitKind::Forward, pts))
}

#[derive(Clone, Debug, Serialize)]
pub struct HeteroclinicTrace {
    pub lambda: f64,
    /// Center coordinate of the start, half of the positive orbit coordinate.
    pub start_center: f64,
    pub period2: Orbit,
    pub forward: Orbit,
    pub backward: Orbit,
    /// First step with `‖p‖_∞ < 10⁻¹⁰`.
    pub forward_hit: Option<usize>,
    pub forward_final_norm: f64,
    /// First step within `10⁻⁸` of the period-2 pair.
    pub backward_hit: Option<usize>,
    pub backward_final_distance: f64,
    /// Smallest inner margin in `B_λ` over both orbits (positive means inside).
    pub min_box_margin: f64,
    /// Fitted per-step contraction of `‖p‖` over the last half of the forward orbit.
    pub forward_rate: f64,
}

impl HeteroclinicTrace {
    pub fn converged(&self) -> bool {
        self.forward_hit.is_some() && self.backward_hit.is_some() && self.min_box_margin > 0.0
    }

    pub fn require_converged(&self) -> Result<()> {
        if self.converged() {
            return Ok(());
        }
        Err(Error::Budget(format!(
            "forward ‖p‖ = {:e} (target {ORIGIN_TOL:e}), backward distance = {:e} (target {PAIR_TOL:e}), box margin = {:e}",
            self.forward_final_norm, self.backward_final_distance, self.min_box_margin
        )))
    }
}

/// Traces the connection from the period-2 orbit to the origin through the center point
/// halfway between 0 and the positive orbit coordinate, `steps` iterates each way.
pub fn trace_heteroclinic(lambda: &Rational, b: &BoxLambda, steps: usize) -> Result<HeteroclinicTrace> {
    let lf = lambda.to_f64().unwrap_or(0.0);
    if lf <= 0.0 {
        return Err(Error::Precondition("the heteroclinic trace needs λ > 0".into()));
    }
    let period2 = find_period2(lambda, default_seed(lf))?;
    let start_center = center_coordinate(period2.points[0].xy[0]) / 2.0;
    let xy0 = k_image_xy(lf, start_center);
    let forward = center_forward_orbit(lambda, xy0, steps)?;
    let start_u = forward.points[0].u;
    let backward = iterate_map(lambda, start_u, steps, Direction::Backward)?;
    let pair = [period2.points[0].u, period2.points[1].u];
    let to_pair = |p: [f64; 2]| dist(p, pair[0]).min(dist(p, pair[1]));
    let forward_hit = forward.points.iter().position(|p| norm(p.u) < ORIGIN_TOL);
    let backward_hit = backward.points.iter().position(|p| to_pair(p.u) < PAIR_TOL);
    let forward_final_norm = norm(forward.points.last().expect("nonempty").u);
    let backward_final_distance = to_pair(backward.points.last().expect("nonempty").u);
    let min_box_margin = forward
        .points
        .iter()
        .chain(backward.points.iter())
        .map(|p| box_margin(b, p.xy))
        .fold(f64::INFINITY, f64::min);
    let half = steps / 2;
    let forward_rate = if steps >= 4 {
        let a = norm(forward.points[half].u).max(1e-300);
        let z = forward_final_norm.max(1e-300);
        (z / a).powf(1.0 / (steps - half) as f64)
    } else {
        f64::NAN
    };
    Ok(HeteroclinicTrace {
        lambda: lf,
        start_center,
        period2,
        forward,
        backward,
        forward_hit,
        forward_final_norm,
        backward_hit,
        backward_final_distance,
        min_box_margin,
        forward_rate,
    })
}

/// Steps a forward orbit decaying no faster than `(1 − λ)` per step needs to shrink by `ratio`.
pub fn linear_rate_steps(lambda: f64, ratio: f64) -> f64 {
    ratio.ln() / -(1.0 - lambda).ln()
}

/// `λ = 10⁻⁵·2^k`, `k = 0..count`.
pub fn dyadic_lambdas(count: u32) -> Vec<Rational> {
    (0..count).map(|k| rat(1, 100_000) * rat(1i64 << k, 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::Interval;
    use crate::rdt_app::{build_box, enclosure_report};
    use rand::{Rng, SeedableRng};

    fn lam(s: &str) -> Rational {
        crate::polyalg::parse_rational(s).unwrap()
    }

    fn default_e(lambda_max: f64) -> (Interval, Interval) {
        let r = Interval::point(lambda_max).sqrt().unwrap();
        (Interval::point(57.1) * r, Interval::point(61.9) * r)
    }

    #[test]
    fn origin_is_constant() {
        for d in [Direction::Forward, Direction::Backward] {
            let o = iterate_map(&lam("5e-5"), [0.0, 0.0], 10, d).unwrap();
            assert!(o.points.iter().all(|p| p.u == [0.0, 0.0]) && o.residual == 0.0);
        }
    }

    #[test]
    fn forward_backward_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let l = lam("5e-5");
        for _ in 0..50 {
            // generic points grow like 2ⁿ along the unstable direction
            let p0 = [rng.gen_range(-1e-4..1e-4), rng.gen_range(-1e-4..1e-4)];
            let f = iterate_map(&l, p0, 10, Direction::Forward).unwrap();
            let b = iterate_map(&l, f.points.last().unwrap().u, 10, Direction::Backward).unwrap();
            assert!(dist(b.points.last().unwrap().u, p0) < 1e-10);
        }
    }

    #[test]
    fn period2_at_reference_lambda() {
        let l = lam("5e-5");
        let o = find_period2(&l, default_seed(5e-5)).unwrap();
        assert!(o.residual <= PERIOD2_TOL);
        // the pair maps to each other
        let q = RdtSystem::u_map_f64(5e-5, o.points[0].u);
        assert!(dist(q, o.points[1].u) < 1e-14);
        // re-inserted exactly, the defect matches the recorded residual
        let exact = norm(exact_period2_defect(&l, o.points[0].u).unwrap());
        assert!(exact <= 10.0 * o.residual.max(1e-300));
        let (e_r, e_k) = default_e(7.6e-5);
        let rep = enclosure_report(Interval::point(5e-5), e_r, e_k, "test").unwrap();
        let check = verify_enclosure(&o, &rep).unwrap();
        assert!(check.pass && check.min_margin > 0.0, "{check:?}");
    }

    #[test]
    fn shrunk_box_is_a_negative_control() {
        let o = find_period2(&lam("5e-5"), default_seed(5e-5)).unwrap();
        let rep = enclosure_report(Interval::point(5e-5), Interval::ZERO, Interval::ZERO, "test").unwrap();
        let check = verify_enclosure(&o, &rep).unwrap();
        assert!(!check.pass && check.min_margin < 0.0);
    }

    #[test]
    fn degenerate_lambda_zero() {
        assert!(find_period2(&lam("0"), [1e-3, 0.0]).is_err());
        let rep = enclosure_report(Interval::ZERO, Interval::ZERO, Interval::ZERO, "test").unwrap();
        assert!(verify_enclosure(&origin_orbit(), &rep).unwrap().pass);
    }

    #[test]
    fn seed_at_origin_is_rejected() {
        let e = find_period2(&lam("5e-5"), [0.0, 0.0]).unwrap_err();
        assert!(e.to_string().contains("trivial"));
    }

    #[test]
    fn amplitude_scales_like_sqrt_lambda() {
        for l in dyadic_lambdas(4) {
            let lf = l.to_f64().unwrap();
            let o = find_period2(&l, default_seed(lf)).unwrap();
            for p in &o.points {
                let rel = (center_coordinate(p.xy[0]).abs() / (lf.sqrt() / 2.0) - 1.0).abs();
                assert!(rel < 0.05, "λ = {lf}: {rel}");
            }
        }
        let tiny = lam("1e-8");
        let o = find_period2(&tiny, default_seed(1e-8)).unwrap();
        assert!((center_coordinate(o.points[0].xy[0]) / 5e-5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn orbit_is_repelling_along_the_center() {
        let o = find_period2(&lam("5e-5"), default_seed(5e-5)).unwrap();
        let [c, u] = period2_multipliers(&o).unwrap();
        // R'(±√λ/2) ≈ −1 − 2λ, so the center multiplier of F² is about 1 + 4λ
        assert!((c - (1.0 + 4.0 * 5e-5)).abs() < 1e-5, "{c}");
        assert!(u > 3.0);
    }

    #[test]
    fn period2_point_stays_periodic() {
        let l = lam("5e-5");
        let o = find_period2(&l, default_seed(5e-5)).unwrap();
        let f = center_forward_orbit(&l, o.points[0].xy, 1000).unwrap();
        for (k, p) in f.points.iter().enumerate() {
            assert!(dist(p.u, o.points[k % 2].u) < 1e-10, "step {k}");
        }
    }

    #[test]
    fn center_forward_orbit_is_a_true_orbit() {
        let l = lam("5e-5");
        let o = center_forward_orbit(&l, k_image_xy(5e-5, 1e-3), 2000).unwrap();
        assert!(o.residual < 1e-17, "{}", o.residual);
        let n0 = norm(o.points[0].u);
        assert!(norm(o.points.last().unwrap().u) < n0);
        let plain = iterate_map(&l, o.points[0].u, 2000, Direction::Forward);
        // plain iteration leaves the manifold
        assert!(plain.map(|p| norm(p.points.last().unwrap().u) > 1.0).unwrap_or(true));
    }

    #[test]
    fn short_trace_stays_in_box() {
        let l = lam("5e-5");
        let (e_r, e_k) = default_e(7.6e-5);
        let b = build_box(Interval::point(5e-5), e_r, e_k).unwrap();
        let t = trace_heteroclinic(&l, &b, 3000).unwrap();
        assert!(t.min_box_margin > 0.0);
        assert!(t.forward_rate < 1.0 && t.forward_rate > 1.0 - 10.0 * 5e-5);
        assert!(t.backward_final_distance < dist(t.backward.points[0].u, t.period2.points[0].u));
        assert!(trace_heteroclinic(&lam("0"), &b, 10).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let o = iterate_map(&lam("5e-5"), [1e-3, 0.0], 3, Direction::Forward).unwrap();
        let csv = o.to_csv();
        assert!(csv.starts_with("step,u_prev,u_n,x,y,residual\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
