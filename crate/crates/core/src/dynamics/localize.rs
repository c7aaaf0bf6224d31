use crate::error::Result;
use crate::operator::LocalOperator;
use crate::pauli::Site;
use crate::states::{conditional_expectation, ProductGibbsState};

/// Π_{Λ_r}(A) for Λ_r the sites within distance `r` of `base_support`, together with the
/// measured error ‖Π_{Λ_r}(A) − A‖.
pub fn localize(
    a: &LocalOperator,
    base_support: &[Site],
    r: u64,
    rho: &ProductGibbsState,
) -> Result<(LocalOperator, f64)> {
    let r = r as Site;
    let region: Vec<Site> = a
        .support()
        .iter()
        .copied()
        .filter(|s| base_support.iter().any(|b| (s - b).abs() <= r))
        .collect();
    let local = conditional_expectation(a, &region, rho);
    let err = (&local - a).operator_norm()?;
    Ok((local, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases_are_exact() {
        let rho = ProductGibbsState::new(0.2);
        let a = &LocalOperator::sz(0) * &LocalOperator::sx(2) + LocalOperator::sy(1);
        let (l, e) = localize(&a, &[0], 5, &rho).unwrap();
        assert_eq!((l, e), (a.clone(), 0.0));
        let (l, e) = localize(&LocalOperator::sz(0), &[0], 0, &rho).unwrap();
        assert_eq!((l, e), (LocalOperator::sz(0), 0.0));
        let (_, e) = localize(&a, &[0], 0, &rho).unwrap();
        assert!(e > 0.5);
    }
}
