//! End-to-end behavior of the t-SNE and silhouette pipeline.

use brain_infomax::analysis::{silhouette, tsne, TsneConfig};
use brain_infomax::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// 80 + 80 points from unit Gaussians whose centers are 10 apart.
fn blobs(dim: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..160).map(|i| u8::from(i >= 80)).collect();
    let points = Matrix::from_fn(160, dim, |i, j| {
        let center = if labels[i] == 1 && j == 0 { 10.0 } else { 0.0 };
        let z: f64 = StandardNormal.sample(&mut rng);
        center + z
    });
    (points, labels)
}

#[test]
fn separated_blobs_stay_separated() {
    let (points, labels) = blobs(8, 1);
    let out = tsne(
        &points,
        &TsneConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();
    let s = silhouette(&out.coords, &labels).unwrap();
    assert!(s >= 0.5, "silhouette {s}");
    assert!(silhouette(&points, &labels).unwrap() > 0.5);
}

#[test]
fn objective_decreases_after_exaggeration() {
    let (points, _) = blobs(8, 3);
    let out = tsne(
        &points,
        &TsneConfig::default(),
        &mut ChaCha8Rng::seed_from_u64(4),
    )
    .unwrap();
    assert_eq!(out.kl.len(), 1000);
    assert!(
        out.kl[999] < out.kl[49],
        "{} vs {}",
        out.kl[999],
        out.kl[49]
    );
    assert!(out.kl[999] < out.kl[299]);
}

#[test]
fn silhouette_is_invariant_to_rigid_motion_and_label_swap() {
    let (points, labels) = blobs(2, 5);
    let base = silhouette(&points, &labels).unwrap();
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let moved = Matrix::from_fn(160, 2, |i, j| {
        let (x, y) = (points.get(i, 0), points.get(i, 1));
        if j == 0 {
            c * x - s * y + 7.0
        } else {
            s * x + c * y - 3.0
        }
    });
    assert!((silhouette(&moved, &labels).unwrap() - base).abs() < 1e-10);
    let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
    assert!((silhouette(&points, &swapped).unwrap() - base).abs() < 1e-12);
}
