use super::SolveReport;

/// `|bound − incumbent| / (1e−9 + |incumbent|)`; `+∞` without an incumbent.
pub fn optimality_gap(best_bound: f64, best_integer: Option<f64>) -> f64 {
    match best_integer {
        Some(z) if best_bound.is_finite() => (best_bound - z).abs() / (1e-9 + z.abs()),
        Some(_) => f64::INFINITY,
        None => f64::INFINITY,
    }
}

/// Primal gap of an objective value against the reference.
pub fn primal_gap(objective: f64, reference: f64) -> f64 {
    let denom = objective.abs().max(reference.abs()).max(1e-9);
    (objective - reference).abs() / denom
}

/// Integral of the primal gap over `[0, horizon]`.
///
/// The gap is 1 until the first incumbent and piecewise constant between
/// incumbents afterwards.
pub fn primal_integral(report: &SolveReport, reference: f64, horizon: f64) -> f64 {
    let mut total = 0.0;
    let mut t_prev = 0.0;
    let mut gap = 1.0;
    for inc in &report.incumbents {
        let t = inc.time.clamp(0.0, horizon);
        total += (t - t_prev) * gap;
        t_prev = t;
        gap = primal_gap(inc.objective, reference);
    }
    total + (horizon - t_prev).max(0.0) * gap
}
