//! Analytic gradients against central finite differences.

use fairtrip_core::embedder::{
    backward, backward_batch, forward, forward_batch, init_params, ActivationKind, MlpParams, Mode, ParamGrads,
};
use fairtrip_core::triplet::{lambda_indicator, triplet_grads, triplet_loss};
use fairtrip_core::{seeded_rng, Rng, Vec3};
use rand::Rng as _;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

/// Relative error with an absolute floor, so exact zeros compare against
/// finite-difference roundoff (about 1e-10) without blowing up.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Flat views over the trainable parameters, in a fixed order.
fn param_count(p: &MlpParams) -> usize {
    p.w1.len() + p.b1.len() + p.w2.len() + p.b2.len()
}

fn param_mut(p: &mut MlpParams, k: usize) -> &mut f64 {
    let (a, b, c) = (p.w1.len(), p.b1.len(), p.w2.len());
    if k < a {
        &mut p.w1[k]
    } else if k < a + b {
        &mut p.b1[k - a]
    } else if k < a + b + c {
        &mut p.w2[k - a - b]
    } else {
        &mut p.b2[k - a - b - c]
    }
}

fn grad_at(g: &ParamGrads, k: usize) -> f64 {
    g.iter().nth(k).copied().unwrap()
}

fn random_params(rng: &mut Rng, k: usize) -> MlpParams {
    let mut p = init_params(k, rng.gen()).unwrap();
    for b in p.b1.iter_mut().chain(p.b2.iter_mut()) {
        *b = rng.gen_range(-0.5..0.5);
    }
    for w in p.w2.iter_mut() {
        *w *= 2.0;
    }
    p.running_mean = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    p.running_var = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
    p
}

fn random_vec3(rng: &mut Rng) -> Vec3 {
    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
}

/// Rejects configurations sitting within `margin` of a ReLU or |·| kink,
/// where central differences are not meaningful.
fn away_from_kinks(p: &MlpParams, rows: &[Vec<f64>], kind: ActivationKind, margin: f64) -> bool {
    rows.iter().all(|x| {
        let (_, t) = forward(p, x, kind).unwrap();
        t.h1.iter().all(|h| h.abs() > margin) && (kind != ActivationKind::L1Norm || t.v.iter().all(|v| v.abs() > margin))
    })
}

fn objective(p: &MlpParams, x: &[f64], kind: ActivationKind, g: &Vec3) -> f64 {
    let (z, _) = forward(p, x, kind).unwrap();
    z.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Checks every parameter of 100 random single-sample configurations.
fn check_single(kind: ActivationKind, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let k = rng.gen_range(1..7);
        let p = random_params(&mut rng, k);
        let x: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        if !away_from_kinks(&p, std::slice::from_ref(&x), kind, 1e-3) {
            continue;
        }
        let g = random_vec3(&mut rng);
        let (_, trace) = forward(&p, &x, kind).unwrap();
        let analytic = backward(&trace, &p, &g).unwrap();
        for idx in 0..param_count(&p) {
            let mut plus = p.clone();
            *param_mut(&mut plus, idx) += STEP;
            let mut minus = p.clone();
            *param_mut(&mut minus, idx) -= STEP;
            let numeric = (objective(&plus, &x, kind, &g) - objective(&minus, &x, kind, &g)) / (2.0 * STEP);
            worst = worst.max(rel_err(grad_at(&analytic, idx), numeric));
        }
        done += 1;
    }
    worst
}

#[test]
fn single_sample_backward_matches_finite_differences() {
    for (i, kind) in ActivationKind::ALL.into_iter().enumerate() {
        let worst = check_single(kind, 100 + i as u64);
        assert!(worst < REL_TOL, "{kind}: worst relative error {worst:e}");
    }
}

fn batch_objective(p: &MlpParams, rows: &[Vec<f64>], g: &[Vec3]) -> f64 {
    let b = forward_batch(p, rows, ActivationKind::BatchNorm, Mode::Train).unwrap();
    b.outputs().zip(g).map(|(z, g)| z.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()).sum()
}

#[test]
fn batchnorm_training_backward_matches_finite_differences() {
    let mut rng = seeded_rng(7);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 100 {
        let k = rng.gen_range(1..6);
        let n = rng.gen_range(3..8);
        let p = random_params(&mut rng, k);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        if !away_from_kinks(&p, &rows, ActivationKind::BatchNorm, 1e-3) {
            continue;
        }
        let g: Vec<Vec3> = (0..n).map(|_| random_vec3(&mut rng)).collect();
        let batch = forward_batch(&p, &rows, ActivationKind::BatchNorm, Mode::Train).unwrap();
        // skip batches whose per-unit variance is tiny: the objective is
        // then dominated by the epsilon floor and badly conditioned
        if batch.stats.unwrap().var.iter().any(|&v| v < 1e-3) {
            continue;
        }
        let mut analytic = ParamGrads::zeros_like(&p);
        backward_batch(&batch, &p, &g, &mut analytic).unwrap();
        for idx in 0..param_count(&p) {
            let mut plus = p.clone();
            *param_mut(&mut plus, idx) += STEP;
            let mut minus = p.clone();
            *param_mut(&mut minus, idx) -= STEP;
            let numeric = (batch_objective(&plus, &rows, &g) - batch_objective(&minus, &rows, &g)) / (2.0 * STEP);
            worst = worst.max(rel_err(grad_at(&analytic, idx), numeric));
        }
        done += 1;
    }
    assert!(worst < REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn linear_network_closed_form() {
    // K = 4, H = 2, both hidden units active, no output activation:
    // ∂(z·g)/∂b2 = g, ∂/∂W2[j][o] = a1_j g_o, ∂/∂b1 = W2 g, ∂/∂W1[i][j] = x_i (W2 g)_j
    let p = MlpParams::from_parts(
        4,
        2,
        vec![0.1, 0.2, 0.3, -0.1, 0.5, 0.5, -0.2, 0.4],
        vec![0.05, 0.1],
        vec![1.0, -1.0, 0.5, 0.2, 0.3, -0.4],
        [0.0; 3],
        [0.0; 3],
        [1.0; 3],
    )
    .unwrap();
    let x = [1.0, 0.5, 0.0, 0.25];
    let g = [1.0, 2.0, -1.0];
    let (_, t) = forward(&p, &x, ActivationKind::None).unwrap();
    for (got, want) in t.h1.iter().zip([0.25, 0.35]) {
        assert!((got - want).abs() < 1e-12);
    }
    let grads = backward(&t, &p, &g).unwrap();
    let close = |got: &[f64], want: &[f64]| {
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    };
    close(&grads.b2, &[1.0, 2.0, -1.0]);
    close(&grads.w2, &[0.25, 0.5, -0.25, 0.35, 0.7, -0.35]);
    close(&grads.b1, &[-1.5, 1.2]);
    close(&grads.w1, &[-1.5, 1.2, -0.75, 0.6, 0.0, 0.0, -0.375, 0.3]);
}

fn loss_fd(za: &Vec3, zp: &Vec3, zn: &Vec3, alpha: f64, step: f64) -> [Vec3; 3] {
    let mut out = [[0.0; 3]; 3];
    for role in 0..3 {
        for i in 0..3 {
            let mut pts = [*za, *zp, *zn];
            pts[role][i] += step;
            let up = triplet_loss(&pts[0], &pts[1], &pts[2], alpha);
            pts[role][i] -= 2.0 * step;
            let down = triplet_loss(&pts[0], &pts[1], &pts[2], alpha);
            out[role][i] = (up - down) / (2.0 * step);
        }
    }
    out
}

#[test]
fn triplet_grads_example_matches_finite_differences() {
    let (za, zp, zn) = ([0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]);
    let fd = loss_fd(&za, &zp, &zn, 2.0, 1e-6);
    let g = triplet_grads(&za, &zp, &zn, 2.0);
    for (analytic, numeric) in [g.anchor, g.positive, g.negative].iter().zip(&fd) {
        for i in 0..3 {
            assert!((analytic[i] - numeric[i]).abs() <= 1e-5 * numeric[i].abs().max(1e-6));
        }
    }
    assert_eq!(g.anchor, [2.0, 0.0, 0.0]);
}

#[test]
fn triplet_grads_match_finite_differences_where_indicator_is_constant() {
    let mut rng = seeded_rng(11);
    let mut checked = 0;
    while checked < 1000 {
        let (za, zp, zn) = (random_vec3(&mut rng), random_vec3(&mut rng), random_vec3(&mut rng));
        let alpha = rng.gen_range(0.0..2.0);
        let gap = alpha - (fairtrip_core_sq(&za, &zn) - fairtrip_core_sq(&za, &zp));
        if gap.abs() < 1e-3 {
            continue;
        }
        let fd = loss_fd(&za, &zp, &zn, alpha, 1e-6);
        let g = triplet_grads(&za, &zp, &zn, alpha);
        assert_eq!(g.is_zero(), !lambda_indicator(&za, &zp, &zn, alpha) || (za == zp && za == zn));
        for (analytic, numeric) in [g.anchor, g.positive, g.negative].iter().zip(&fd) {
            for i in 0..3 {
                assert!(rel_err(analytic[i], numeric[i]) < 1e-5, "{analytic:?} vs {numeric:?}");
            }
        }
        checked += 1;
    }
}

fn fairtrip_core_sq(a: &Vec3, b: &Vec3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
