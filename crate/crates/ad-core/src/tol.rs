//! Pinned comparison tolerances, shared by unit tests, the check command and
//! the acceptance suite. All derivative comparisons use
//! [`rel_discrepancy`]: infinity-norm difference over `max(1, ||.||_inf)`.

/// Pairwise agreement of the exact engines (manual, forward, reverse).
pub const EXACT_PAIRWISE_REL: f64 = 1e-10;

/// Forward vs reverse on the same function: both are exact chain-rule
/// evaluations and differ only in accumulation order.
pub const FORWARD_REVERSE_REL: f64 = 1e-12;

/// Any exact engine vs central finite differences.
pub const FD_REL: f64 = 1e-6;

/// Objective-variant equivalence (standard / split / vectorized GMM) and
/// split-accumulated gradient vs whole-objective reverse gradient.
pub const VARIANT_REL: f64 = 1e-10;

/// Structural identities evaluated in f64 (decompression vs dense oracle,
/// densified sparse vs dense Jacobian).
pub const STRUCTURAL_REL: f64 = 1e-12;

/// Infinity-norm relative discrepancy between two vectors:
/// `max_i |a_i - b_i| / max(1, ||a||_inf, ||b||_inf)`.
///
/// Any non-finite entry yields infinity: a NaN derivative never verifies.
pub fn rel_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_discrepancy: length mismatch");
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for (&x, &y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() {
            return f64::INFINITY;
        }
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    diff / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrepancy_uses_unit_floor() {
        // Small vectors are compared absolutely, not relatively.
        assert_eq!(rel_discrepancy(&[0.0, 1e-12], &[0.0, 0.0]), 1e-12);
    }

    #[test]
    fn discrepancy_scales_by_largest_entry() {
        let d = rel_discrepancy(&[1e8, 0.0], &[1e8 + 1.0, 0.0]);
        assert!((d - 1e-8).abs() < 1e-15);
    }
}
