//! Pure rule helpers shared by the sub-steps.

/// Cells before the link end over which turn-motivated lane changes become
/// progressively less demanding.
pub const DESPERATION_CELLS: u32 = 10;

/// Unprotected-turn check: `window` lists the occupancy of the priority
/// lane starting with the cell nearest the conflict point and moving
/// upstream. Accepts iff the first `required_gap` cells are all empty.
pub fn gap_acceptance(window: &[bool], required_gap: usize) -> bool {
    window.iter().take(required_gap).all(|&occupied| !occupied)
}

/// Required (forward, backward) gaps for a turn-motivated lane change at
/// `dist_to_end` cells before the link end. Full requirements are
/// `(min(v + 1, v_max), v_max)`; inside the last [`DESPERATION_CELLS`] they
/// fall linearly to `(1, 1)`.
pub fn desperation_gaps(velocity: u8, v_max: u8, dist_to_end: u32) -> (u8, u8) {
    let full_f = (velocity + 1).min(v_max) as u32;
    let full_b = v_max as u32;
    if dist_to_end >= DESPERATION_CELLS {
        return (full_f as u8, full_b as u8);
    }
    let scale = |full: u32| (1 + (full.saturating_sub(1)) * dist_to_end / DESPERATION_CELLS) as u8;
    (scale(full_f), scale(full_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Vehicle `k` cells upstream of the conflict point.
    fn window_with(k: usize, len: usize) -> Vec<bool> {
        (1..=len).map(|i| i == k).collect()
    }

    #[test]
    fn gap_acceptance_cases() {
        assert!(gap_acceptance(&[false; 8], 5));
        assert!(!gap_acceptance(&window_with(2, 8), 5));
        assert!(gap_acceptance(&window_with(6, 8), 5));
        assert!(!gap_acceptance(&window_with(5, 8), 5));
        assert!(gap_acceptance(&[], 0));
    }

    #[test]
    fn desperation_schedule_is_monotone() {
        assert_eq!(desperation_gaps(3, 5, 50), (4, 5));
        assert_eq!(desperation_gaps(3, 5, 10), (4, 5));
        assert_eq!(desperation_gaps(3, 5, 0), (1, 1));
        assert_eq!(desperation_gaps(5, 5, 5), (3, 3));
        let mut prev = (0, 0);
        for d in 0..=12 {
            let g = desperation_gaps(4, 5, d);
            assert!(g.0 >= prev.0 && g.1 >= prev.1);
            prev = g;
        }
    }
}
