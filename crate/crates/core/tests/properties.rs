use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use design_eval::content::{
    content_distance, proxy_content_encoding, ContentEmbedding, EncoderTag,
};
use design_eval::edges::{canny, sobel_gradients, CannyParams};
use design_eval::fid::{
    frechet_distance, gaussian_stats, FeatureMatrix, FeatureSource, GaussianStats,
};
use design_eval::imaging::{dct_descriptor, gaussian_blur, resize_bilinear};
use design_eval::ssim::{ssim, SsimParams};
use design_eval::stats::{regularized_incomplete_beta, welch_t_test};
use design_eval::GrayImage;

fn image(w: std::ops::Range<usize>, h: std::ops::Range<usize>) -> impl Strategy<Value = GrayImage> {
    (w, h).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0..=1.0f64, w * h)
            .prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn image_pair(side: std::ops::Range<usize>) -> impl Strategy<Value = (GrayImage, GrayImage)> {
    (side.clone(), side).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(0.0..=1.0f64, w * h),
            prop::collection::vec(0.0..=1.0f64, w * h),
        )
            .prop_map(move |(a, b)| {
                (
                    GrayImage::new(w, h, a).unwrap(),
                    GrayImage::new(w, h, b).unwrap(),
                )
            })
    })
}

fn sample(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, n)
}

fn stats(d: usize) -> impl Strategy<Value = GaussianStats> {
    (
        prop::collection::vec(-5.0..5.0f64, d),
        prop::collection::vec(-1.0..1.0f64, d * d),
    )
        .prop_map(move |(mu, a)| {
            let a = DMatrix::from_row_slice(d, d, &a);
            GaussianStats::new(DVector::from_vec(mu), &a * a.transpose(), 50).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ssim_is_symmetric_and_bounded((a, b) in image_pair(11..24)) {
        let p = SsimParams::default();
        let ab = ssim(&a, &b, &p).unwrap();
        prop_assert_eq!(ab, ssim(&b, &a, &p).unwrap());
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn frechet_is_symmetric_and_sees_mean_shift(g1 in stats(3), g2 in stats(3), shift in prop::collection::vec(-3.0..3.0f64, 3)) {
        let d12 = frechet_distance(&g1, &g2, 1e-6).unwrap();
        let d21 = frechet_distance(&g2, &g1, 1e-6).unwrap();
        prop_assert!(d12 >= 0.0);
        prop_assert!((d12 - d21).abs() <= 1e-8 * (1.0 + d12));
        let v = DVector::from_vec(shift);
        let moved = GaussianStats::new(&g1.mu + &v, g1.sigma.clone(), g1.n).unwrap();
        let d = frechet_distance(&g1, &moved, 0.0).unwrap();
        prop_assert!((d - v.norm_squared()).abs() <= 1e-8 * (1.0 + d));
    }

    #[test]
    fn gaussian_stats_ignore_row_order(rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 4), 2..12), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let k = (seed as usize) % rows.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let a = gaussian_stats(&FeatureMatrix::from_rows(&rows, FeatureSource::ExternalFile).unwrap()).unwrap();
        let b = gaussian_stats(&FeatureMatrix::from_rows(&shuffled, FeatureSource::ExternalFile).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn welch_is_antisymmetric(a in sample(2..20), b in sample(2..20)) {
        let ab = welch_t_test(&a, &b, 0.05).unwrap();
        let ba = welch_t_test(&b, &a, 0.05).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.p, ba.p);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn welch_is_affine_invariant(a in sample(3..15), b in sample(3..15), shift in -50.0..50.0f64, scale in 0.1..10.0f64) {
        let base = welch_t_test(&a, &b, 0.05).unwrap();
        prop_assume!(base.t.is_finite() && base.t.abs() > 1e-6);
        let f = |x: &Vec<f64>| x.iter().map(|v| v * scale + shift).collect::<Vec<_>>();
        let moved = welch_t_test(&f(&a), &f(&b), 0.05).unwrap();
        prop_assert!((moved.t - base.t).abs() <= 1e-6 * base.t.abs().max(1.0));
        prop_assert!((moved.p - base.p).abs() <= 1e-6);
    }

    #[test]
    fn incomplete_beta_reflection(x in 0.0..=1.0f64, a in 0.1..50.0f64, b in 0.1..50.0f64) {
        let lhs = regularized_incomplete_beta(x, a, b).unwrap();
        let rhs = 1.0 - regularized_incomplete_beta(1.0 - x, b, a).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&lhs));
    }

    #[test]
    fn content_distance_is_a_metric(
        a in prop::collection::vec(0.0..1.0f64, 8),
        b in prop::collection::vec(0.0..1.0f64, 8),
        c in prop::collection::vec(0.0..1.0f64, 8),
    ) {
        let e = |v: Vec<f64>| ContentEmbedding::new("x", v, EncoderTag::External).unwrap();
        let (a, b, c) = (e(a), e(b), e(c));
        let ab = content_distance(&a, &b).unwrap();
        prop_assert_eq!(content_distance(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab, content_distance(&b, &a).unwrap());
        prop_assert!(ab <= content_distance(&a, &c).unwrap() + content_distance(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn canny_is_binary_and_inversion_invariant(img in image(16..28, 16..28)) {
        let p = CannyParams::default();
        let e = canny(&img, &p).unwrap();
        prop_assert!(e.data().iter().all(|&v| v <= 1));
        prop_assert_eq!(e, canny(&img.inverted(), &p).unwrap());
    }

    #[test]
    fn proxy_encoding_is_inversion_invariant(img in image(16..28, 16..28)) {
        let a = proxy_content_encoding(&img, "a").unwrap();
        let b = proxy_content_encoding(&img.inverted(), "b").unwrap();
        prop_assert_eq!(content_distance(&a, &b).unwrap(), 0.0);
        prop_assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sobel_transpose_swaps_gradients(img in image(3..12, 3..12)) {
        let g = sobel_gradients(&img).unwrap();
        let t = sobel_gradients(&img.transposed()).unwrap();
        let (w, h) = img.dimensions();
        for y in 0..h {
            for x in 0..w {
                prop_assert!((g.gx[y * w + x] - t.gy[x * h + y]).abs() <= 1e-12);
                prop_assert!((g.gy[y * w + x] - t.gx[x * h + y]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn resize_to_same_size_is_identity(img in image(1..20, 1..20)) {
        let (w, h) = img.dimensions();
        prop_assert_eq!(resize_bilinear(&img, w, h).unwrap(), img);
    }

    #[test]
    fn blur_stays_in_range(img in image(2..16, 2..16), sigma in 0.3..4.0f64) {
        let b = gaussian_blur(&img, sigma).unwrap();
        let (lo, hi) = img.data().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!(b.data().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn descriptor_has_requested_length(img in image(4..40, 4..40), dims in 1usize..=1024) {
        prop_assert_eq!(dct_descriptor(&img, dims).unwrap().len(), dims);
    }
}
