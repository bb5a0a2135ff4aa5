//! Shared test fixtures: the fixed 6-point hinge-loss corpus and an
//! independent brute-force optimum for it.

#![allow(dead_code)]

/// One 1-D binary dataset with its regularization weight.
pub struct HingeCase {
    pub name: &'static str,
    pub x: [f64; 6],
    pub y: [f64; 6],
}

pub const HINGE_LAMBDAS: [f64; 3] = [0.01, 0.1, 1.0];

pub const HINGE_CORPUS: [HingeCase; 9] = [
    HingeCase {
        name: "separable_symmetric",
        x: [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
        y: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    },
    HingeCase {
        name: "separable_offset",
        x: [0.5, 1.0, 1.5, 3.0, 3.5, 4.0],
        y: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    },
    HingeCase {
        name: "overlapping",
        x: [-2.0, -1.0, 0.5, -0.5, 1.0, 2.0],
        y: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    },
    HingeCase {
        name: "imbalanced",
        x: [-1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
        y: [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
    },
    HingeCase {
        name: "reversed",
        x: [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
        y: [1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
    },
    HingeCase {
        name: "interleaved",
        x: [-1.2, 0.3, -0.1, 0.8, -0.6, 1.5],
        y: [-1.0, -1.0, 1.0, 1.0, -1.0, 1.0],
    },
    HingeCase {
        name: "duplicated_inputs",
        x: [1.0, 1.0, 1.0, 2.0, 2.0, 2.0],
        y: [-1.0, -1.0, 1.0, 1.0, 1.0, -1.0],
    },
    HingeCase {
        name: "wide_scale",
        x: [-30.0, -10.0, -5.0, 5.0, 10.0, 30.0],
        y: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    },
    HingeCase {
        name: "noisy_pam4_boundary",
        x: [-3.1, -1.2, -0.7, 0.9, 1.3, 2.8],
        y: [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    },
];

/// `lambda/2 w^2 + mean hinge`, bias unregularized.
pub fn hinge_1d(w: f64, b: f64, case: &HingeCase, lambda: f64) -> f64 {
    let loss: f64 = case
        .x
        .iter()
        .zip(&case.y)
        .map(|(x, y)| (1.0 - y * (w * x + b)).max(0.0))
        .sum();
    0.5 * lambda * w * w + loss / case.x.len() as f64
}

/// Coarse-to-fine grid search for the minimum of the convex objective.
///
/// `(0, 0)` scores 1, so the optimum has `|w| <= sqrt(2 / lambda)`; moving
/// the bias beyond `1 + |w| max|x|` cannot lower any hinge term.
pub fn hinge_grid_optimum(case: &HingeCase, lambda: f64) -> f64 {
    let w_max = (2.0 / lambda).sqrt();
    let x_max = case.x.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let b_max = 1.0 + w_max * x_max;
    let (mut cw, mut cb, mut hw, mut hb) = (0.0, 0.0, w_max, b_max);
    let steps = 400;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let (mut bw, mut bb) = (cw, cb);
        for i in 0..=steps {
            let w = cw - hw + 2.0 * hw * i as f64 / steps as f64;
            for j in 0..=steps {
                let b = cb - hb + 2.0 * hb * j as f64 / steps as f64;
                let f = hinge_1d(w, b, case, lambda);
                if f < best {
                    best = f;
                    bw = w;
                    bb = b;
                }
            }
        }
        cw = bw;
        cb = bb;
        hw *= 8.0 / steps as f64;
        hb *= 8.0 / steps as f64;
    }
    best
}
