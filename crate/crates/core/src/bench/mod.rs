//! Throughput harness: naive vs expanded-norm cross-kernel, and chunked
//! full-frame correction with and without overlapped feature assembly.

use std::fmt::Write as _;
use std::hint::black_box;
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{is_valid_depth, CameraModel, DepthMap};
use crate::gp::{fit_with_jitter, FeatureVector, FittedGp, Hyperparams, ScaledPoints, TrainingSet};

/// Largest `N * M` the kernel benchmark accepts.
pub const MAX_KERNEL_ENTRIES: usize = 2_000_000_000;
/// Tolerance for naive/fast kernel agreement.
pub const KERNEL_REL_TOL: f64 = 1e-8;
/// Grid that outputs are rounded to before hashing.
pub const CHECKSUM_QUANTUM: f64 = 1e-12;

const SEED: u64 = 0xBE7C_4A11;
const KERNEL_TILE: usize = 8;

/// Published per-frame times for a physical setup, printed for context only.
pub const HARDWARE_REFERENCE: [(&str, f64); 3] =
    [("CPU", 20.0), ("GPU naive", 0.4), ("GPU optimized", 0.14)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub variant: String,
    pub frame_pixels: usize,
    pub n_train: usize,
    pub seconds_per_frame: f64,
    pub fps: f64,
    /// FNV-1a over the canonicalized outputs, as hex.
    pub checksum: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BenchReport {
    fn new(
        variant: String,
        frame_pixels: usize,
        n_train: usize,
        seconds: f64,
        checksum: u64,
    ) -> Self {
        BenchReport {
            variant,
            frame_pixels,
            n_train,
            seconds_per_frame: seconds,
            fps: 1.0 / seconds,
            checksum: format!("{checksum:016x}"),
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    /// Timed repetitions; the median is reported.
    pub trials: usize,
    pub warmup: usize,
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            trials: 5,
            warmup: 1,
            threads: 1,
        }
    }
}

impl BenchOptions {
    fn pool(&self) -> Result<rayon::ThreadPool> {
        if self.trials == 0 {
            return Err(Error::Contract(
                "at least one timed trial is required".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.max(1))
            .build()
            .map_err(|e| Error::Contract(format!("cannot build thread pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// Hash of `values` after rounding to [`CHECKSUM_QUANTUM`]; missing values
/// hash to a fixed marker.
pub fn checksum(values: &[f64]) -> u64 {
    let mut h = Fnv::new();
    for v in values {
        let q = if v.is_finite() {
            (v / CHECKSUM_QUANTUM).round() as i64
        } else {
            i64::MIN
        };
        h.write(&q.to_le_bytes());
    }
    h.0
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Uniform points over the sensor's working volume.
pub fn random_features(n: usize, rng: &mut impl Rng) -> Vec<FeatureVector> {
    (0..n)
        .map(|_| {
            [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(0.4..1.0),
                rng.gen_range(10.0..35.0),
            ]
        })
        .collect()
}

/// Hyperparameters of the scale a trained model ends up with.
pub fn typical_hyper() -> Hyperparams {
    Hyperparams {
        w: [4.0, 4.0, 6.0, 0.005],
        sigma_s: 0.02,
        sigma_y: 1e-3,
    }
}

/// A model fitted on `n` random points with a smooth synthetic target.
pub fn synthetic_model(n: usize, seed: u64) -> Result<FittedGp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_features(n, &mut rng);
    let y = x
        .iter()
        .map(|f| -1e-3 * (f[3] - 10.0) * f[2] * f[2] + 2e-3 * f[0] * f[2])
        .collect();
    fit_with_jitter(&TrainingSet::new(x, y)?, &typical_hyper(), 0.0)
}

fn naive_tile(a: &[FeatureVector], tile: &[FeatureVector], hyper: &Hyperparams, out: &mut [f64]) {
    let n = a.len();
    let sv = hyper.signal_var();
    for (bj, row) in tile.iter().zip(out.chunks_exact_mut(n)) {
        for (ai, o) in a.iter().zip(row.iter_mut()) {
            let mut q = 0.0;
            for k in 0..4 {
                let d = ai[k] - bj[k];
                q += hyper.w[k] * d * d;
            }
            *o = sv * (-0.5 * q).exp();
        }
    }
}

fn fast_tile(points: &ScaledPoints, tile: &[FeatureVector], out: &mut [f64]) {
    for (bj, row) in tile.iter().zip(out.chunks_exact_mut(points.len())) {
        points.kernel_column(bj, row);
    }
}

fn agree(x: f64, y: f64) -> bool {
    let diff = (x - y).abs();
    diff <= KERNEL_REL_TOL * x.abs().max(y.abs()) || diff <= 1e-300
}

/// Times the full `N x M` cross-kernel, computed in tiles of queries, with
/// the naive double loop and with [`ScaledPoints`]. The warm-up pass checks
/// every entry for agreement within [`KERNEL_REL_TOL`] before anything is
/// timed. `M` plays the role of the frame size.
pub fn bench_kernel(
    n: usize,
    m: usize,
    hyper: &Hyperparams,
    opts: &BenchOptions,
) -> Result<(BenchReport, BenchReport)> {
    if n == 0 || m == 0 {
        return Err(Error::Contract("kernel benchmark needs N, M >= 1".into()));
    }
    if n.checked_mul(m).is_none_or(|e| e > MAX_KERNEL_ENTRIES) {
        return Err(Error::Contract(format!(
            "N * M = {n} * {m} exceeds the {MAX_KERNEL_ENTRIES}-entry budget"
        )));
    }
    hyper.validate()?;
    let pool = opts.pool()?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let a = random_features(n, &mut rng);
    let b = random_features(m, &mut rng);
    let points = ScaledPoints::new(&a, hyper)?;
    let tiles: Vec<&[FeatureVector]> = b.chunks(KERNEL_TILE).collect();

    // Equivalence pass; its per-tile sums become the checksums.
    let checked: Vec<(f64, f64, f64)> = pool.install(|| {
        tiles
            .par_iter()
            .map(|tile| {
                let mut slow = vec![0.0; tile.len() * n];
                let mut fast = vec![0.0; tile.len() * n];
                naive_tile(&a, tile, hyper, &mut slow);
                fast_tile(&points, tile, &mut fast);
                let mut worst = 0.0f64;
                for (&s, &f) in slow.iter().zip(&fast) {
                    if !agree(s, f) {
                        worst = worst.max((s - f).abs() / s.abs().max(f.abs()));
                    }
                }
                (slow.iter().sum(), fast.iter().sum(), worst)
            })
            .collect()
    });
    let worst = checked.iter().map(|c| c.2).fold(0.0, f64::max);
    if worst > 0.0 {
        return Err(Error::Equivalence(format!(
            "naive and fast kernels differ by relative {worst:e} (limit {KERNEL_REL_TOL:e})"
        )));
    }
    let sum_hash = |s: f64| {
        let mut h = Fnv::new();
        h.write(format!("{s:.9e}").as_bytes());
        h.0
    };
    let naive_sum: f64 = checked.iter().map(|c| c.0).sum();
    let fast_sum: f64 = checked.iter().map(|c| c.1).sum();

    let run = |fast: bool| -> f64 {
        let t = Instant::now();
        let total: f64 = pool.install(|| {
            tiles
                .par_iter()
                .map_init(
                    || vec![0.0; KERNEL_TILE * n],
                    |buf, tile| {
                        let out = &mut buf[..tile.len() * n];
                        if fast {
                            fast_tile(&points, tile, out);
                        } else {
                            naive_tile(&a, tile, hyper, out);
                        }
                        out[0] + out[out.len() - 1]
                    },
                )
                .sum()
        });
        black_box(total);
        t.elapsed().as_secs_f64()
    };
    for _ in 1..opts.warmup {
        run(false);
        run(true);
    }
    let mut slow_t = Vec::with_capacity(opts.trials);
    let mut fast_t = Vec::with_capacity(opts.trials);
    for _ in 0..opts.trials {
        slow_t.push(run(false));
        fast_t.push(run(true));
    }
    let mut naive = BenchReport::new(
        "kernel-naive".into(),
        m,
        n,
        median(slow_t),
        sum_hash(naive_sum),
    );
    let mut fast = BenchReport::new(
        "kernel-expanded".into(),
        m,
        n,
        median(fast_t),
        sum_hash(fast_sum),
    );
    let note = format!(
        "entries agree within {KERNEL_REL_TOL:e} relative; checksum hashes the entry sum to 10 digits"
    );
    naive.note = Some(note.clone());
    fast.note = Some(note);
    Ok((naive, fast))
}

struct Chunk {
    pixels: Vec<usize>,
    features: Vec<FeatureVector>,
}

fn assemble(frame: &DepthMap, temp: f64, cam: &CameraModel, start: usize, end: usize) -> Chunk {
    let w = frame.width();
    let data = frame.data();
    let mut pixels = Vec::with_capacity(end - start);
    let mut features = Vec::with_capacity(end - start);
    for (idx, &d) in data[start..end]
        .iter()
        .enumerate()
        .map(|(k, d)| (start + k, d))
    {
        if is_valid_depth(d) {
            let r = cam.ray((idx % w) as f64, (idx / w) as f64);
            pixels.push(idx);
            features.push([d * r[0], d * r[1], d, temp]);
        }
    }
    Chunk { pixels, features }
}

fn predict_into(
    out: &mut [f64],
    frame: &[f64],
    chunk: &Chunk,
    gp: &FittedGp,
    pool: &rayon::ThreadPool,
) {
    let means: Vec<f64> =
        pool.install(|| chunk.features.par_iter().map(|q| gp.mean_at(q)).collect());
    for (&idx, m) in chunk.pixels.iter().zip(means) {
        out[idx] = frame[idx] + m;
    }
}

/// Corrects one frame chunk by chunk. With `prefetch`, a second thread
/// assembles the next chunk while the current one is predicted, handing
/// chunks over through a queue of depth one. Returns the corrected map and
/// the time spent assembling features.
pub fn correct_frame_staged(
    frame: &DepthMap,
    temp: f64,
    cam: &CameraModel,
    gp: &FittedGp,
    chunk: usize,
    prefetch: bool,
    pool: &rayon::ThreadPool,
) -> Result<(DepthMap, f64)> {
    if chunk == 0 {
        return Err(Error::Contract("chunk size must be at least 1".into()));
    }
    if !temp.is_finite() {
        return Err(Error::Domain(format!("non-finite temperature {temp}")));
    }
    let total = frame.data().len();
    let bounds: Vec<(usize, usize)> = (0..total)
        .step_by(chunk)
        .map(|s| (s, (s + chunk).min(total)))
        .collect();
    let mut out = vec![f64::NAN; total];
    let mut assembling = 0.0;
    if prefetch {
        std::thread::scope(|s| {
            let (tx, rx) = sync_channel::<(Chunk, f64)>(1);
            s.spawn(move || {
                for &(a, b) in &bounds {
                    let t = Instant::now();
                    let c = assemble(frame, temp, cam, a, b);
                    if tx.send((c, t.elapsed().as_secs_f64())).is_err() {
                        break;
                    }
                }
            });
            for (c, secs) in rx {
                assembling += secs;
                predict_into(&mut out, frame.data(), &c, gp, pool);
            }
        });
    } else {
        for &(a, b) in &bounds {
            let t = Instant::now();
            let c = assemble(frame, temp, cam, a, b);
            assembling += t.elapsed().as_secs_f64();
            predict_into(&mut out, frame.data(), &c, gp, pool);
        }
    }
    Ok((
        DepthMap::new(frame.width(), frame.height(), out)?,
        assembling,
    ))
}

/// End-to-end correction throughput for each chunk size, without prefetch
/// and, when `prefetch` is set, with it. Every configuration must produce
/// the same checksum.
pub fn bench_pipeline(
    frame: &DepthMap,
    temp: f64,
    cam: &CameraModel,
    gp: &FittedGp,
    chunk_sizes: &[usize],
    prefetch: bool,
    opts: &BenchOptions,
) -> Result<Vec<BenchReport>> {
    if chunk_sizes.is_empty() {
        return Err(Error::Contract("no chunk sizes given".into()));
    }
    let pool = opts.pool()?;
    let pixels = frame.data().len();
    let modes: &[bool] = if prefetch { &[false, true] } else { &[false] };
    let mut reports = Vec::new();
    let mut reference: Option<u64> = None;
    for &chunk in chunk_sizes {
        let mut baseline = None;
        for &pf in modes {
            for _ in 0..opts.warmup {
                correct_frame_staged(frame, temp, cam, gp, chunk, pf, &pool)?;
            }
            let mut times = Vec::with_capacity(opts.trials);
            let mut assembly = Vec::with_capacity(opts.trials);
            let mut sum = 0;
            for _ in 0..opts.trials {
                let t = Instant::now();
                let (map, asm) = correct_frame_staged(frame, temp, cam, gp, chunk, pf, &pool)?;
                times.push(t.elapsed().as_secs_f64());
                assembly.push(asm);
                sum = checksum(map.data());
            }
            match reference {
                None => reference = Some(sum),
                Some(r) if r != sum => {
                    return Err(Error::Equivalence(format!(
                        "chunk {chunk} prefetch {pf}: checksum {sum:016x} differs from {r:016x}"
                    )))
                }
                Some(_) => {}
            }
            let secs = median(times);
            let label = if chunk >= pixels {
                "full".to_string()
            } else {
                chunk.to_string()
            };
            let mut report = BenchReport::new(
                format!("chunk={label} prefetch={}", if pf { "on" } else { "off" }),
                pixels,
                gp.len(),
                secs,
                sum,
            );
            let fraction = median(assembly) / secs;
            if pf {
                let (base, base_fraction) = baseline.unwrap_or((secs, fraction));
                let speedup = base / secs;
                let mut note = format!("speedup over prefetch=off {speedup:.3}x");
                if base_fraction < 0.05 {
                    let _ = write!(
                        note,
                        "; assembly is {:.1}% of frame time, below the 5% needed for overlap to pay off",
                        100.0 * base_fraction
                    );
                } else if speedup < 1.05 {
                    let _ = write!(note, "; below 1.05x, overlap needs a spare core");
                }
                report.note = Some(note);
            } else {
                baseline = Some((secs, fraction));
                report.note = Some(format!(
                    "feature assembly {:.1}% of frame time",
                    100.0 * fraction
                ));
            }
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Table of reports plus the published reference times.
pub fn format_reports(reports: &[BenchReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<26}{:>10}{:>8}{:>14}{:>10}  checksum",
        "variant", "pixels", "N", "s/frame", "FPS"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<26}{:>10}{:>8}{:>14.4}{:>10.3}  {}",
            r.variant, r.frame_pixels, r.n_train, r.seconds_per_frame, r.fps, r.checksum
        );
        if let Some(n) = &r.note {
            let _ = writeln!(s, "    {n}");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "hardware reference, published per-frame times (not produced by this run):"
    );
    for (name, secs) in HARDWARE_REFERENCE {
        let _ = writeln!(s, "  {name:<16}{secs:>8.2} s");
    }
    s
}
