//! Pair losses and their derivatives.

/// Default margins of the embedding loss for positive and negative pairs.
pub const ALPHA_P: f64 = 0.0;
pub const ALPHA_N: f64 = 0.7;

/// `y = 1` for matching pairs, `-1` otherwise.
pub fn hinge_embedding(dist: f64, y: i8, alpha_p: f64, alpha_n: f64) -> f64 {
    if y > 0 {
        (alpha_p + dist).max(0.0)
    } else {
        (alpha_n - dist).max(0.0)
    }
}

/// Derivative with respect to the distance; zero on the flat side of the hinge
/// and at the kink.
pub fn hinge_embedding_grad(dist: f64, y: i8, alpha_p: f64, alpha_n: f64) -> f64 {
    if y > 0 {
        if alpha_p + dist > 0.0 {
            1.0
        } else {
            0.0
        }
    } else if alpha_n - dist > 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hinge loss on a decision score `s`.
pub fn hinge(score: f64, y: i8) -> f64 {
    (1.0 - f64::from(y.signum()) * score).max(0.0)
}

pub fn hinge_grad(score: f64, y: i8) -> f64 {
    let ys = f64::from(y.signum());
    if 1.0 - ys * score > 0.0 {
        -ys
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_matches_hand_values() {
        assert_eq!(hinge_embedding(0.3, 1, ALPHA_P, ALPHA_N), 0.3);
        assert_eq!(hinge_embedding(0.5, -1, 0.0, 0.75), 0.25);
        assert_eq!(hinge_embedding(0.9, -1, ALPHA_P, ALPHA_N), 0.0);
        assert_eq!(hinge_embedding_grad(0.9, -1, ALPHA_P, ALPHA_N), 0.0);
        assert_eq!(hinge_embedding_grad(0.2, -1, ALPHA_P, ALPHA_N), -1.0);
    }

    #[test]
    fn hinge_matches_hand_values() {
        assert_eq!(hinge(0.25, 1), 0.75);
        assert_eq!(hinge(0.25, -1), 1.25);
        assert_eq!(hinge(2.0, 1), 0.0);
        assert_eq!(hinge_grad(2.0, 1), 0.0);
        assert_eq!(hinge_grad(0.0, -1), 1.0);
    }
}
