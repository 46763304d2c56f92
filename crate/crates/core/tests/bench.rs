use thermacal::bench::*;
use thermacal::geom::{CameraModel, DepthMap};

fn opts() -> BenchOptions {
    BenchOptions {
        trials: 5,
        warmup: 1,
        threads: 1,
    }
}

#[test]
fn frame_time_scales_linearly_in_training_size() {
    let frame = DepthMap::filled(160, 120, 0.7);
    let cam = CameraModel::default_for_size(160, 120);
    let time = |n: usize| {
        let gp = synthetic_model(n, 11).unwrap();
        let r = bench_pipeline(
            &frame,
            22.0,
            &cam,
            &gp,
            &[frame.data().len()],
            false,
            &opts(),
        )
        .unwrap();
        assert_eq!(r[0].n_train, n);
        r[0].seconds_per_frame
    };
    let ratio = time(5000) / time(2500);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio:.3}");
}

#[test]
fn kernel_time_grows_with_query_count() {
    let h = typical_hyper();
    let times: Vec<f64> = [2_000, 8_000, 32_000]
        .iter()
        .map(|&m| {
            bench_kernel(1000, m, &h, &opts())
                .unwrap()
                .1
                .seconds_per_frame
        })
        .collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
}

#[test]
fn kernel_variants_agree_on_a_realistic_shape() {
    let (naive, fast) = bench_kernel(500, 3000, &typical_hyper(), &opts()).unwrap();
    assert_eq!(naive.checksum, fast.checksum);
    assert_eq!(naive.variant, "kernel-naive");
    assert!(format_reports(&[naive, fast]).contains("GPU optimized"));
}
