//! Seeded, platform-stable random streams.
//!
//! Every stochastic operation derives an independent ChaCha20 stream from a
//! `(base seed, operation tag, lane, chunk)` tuple. ChaCha20 is a
//! counter-based generator whose output is identical on every platform, and
//! normal variates are produced by an explicit Box-Muller transform, so seeded
//! runs are bit-reproducible regardless of how the work is chunked or how
//! many worker threads execute it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// FNV-1a 64-bit hash, used to fold operation tags into stream seeds.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// splitmix64 finalizer; breaks up correlations between related inputs.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the independent stream for `(seed, tag, lane, chunk)`.
///
/// `lane` distinguishes sub-streams within one operation (e.g. one per
/// class); `chunk` splits a Monte-Carlo loop so chunks can be evaluated in
/// any order, or in parallel, with identical results.
pub fn stream(seed: u64, tag: &str, lane: u64, chunk: u64) -> ChaCha20Rng {
    let mut s = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    s = mix(s ^ fnv1a(tag.as_bytes()));
    s = mix(s ^ lane);
    s = mix(s ^ chunk);
    ChaCha20Rng::seed_from_u64(s)
}

/// Derive a child seed for `(seed, tag, lane)`; used when one operation
/// delegates to another that takes its own seed.
pub fn derive(seed: u64, tag: &str, lane: u64) -> u64 {
    let mut s = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    s = mix(s ^ fnv1a(tag.as_bytes()));
    mix(s ^ lane)
}

/// A standard normal variate via Box-Muller.
///
/// Uses two uniforms per draw and no caching, so the stream position after
/// `n` draws does not depend on call history.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    // 1 - u1 lies in (0, 1], keeping the log finite.
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (std::f64::consts::TAU * u2).cos()
}

/// Worker-thread cap for data-parallel sections: `LABELSET_THREADS` when set
/// to a positive integer, otherwise the machine's available parallelism.
pub fn thread_cap() -> usize {
    if let Ok(raw) = std::env::var("LABELSET_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Evaluate `f(chunk_index, range)` over `total` items split into fixed-size
/// chunks, using at most `workers` threads. Results come back in chunk order,
/// so any order-sensitive aggregation is independent of the worker count.
pub(crate) fn chunked_map<T, F>(total: usize, chunk_size: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, std::ops::Range<usize>) -> T + Sync,
{
    assert!(chunk_size > 0);
    let n_chunks = total.div_ceil(chunk_size);
    let ranges: Vec<std::ops::Range<usize>> = (0..n_chunks)
        .map(|c| (c * chunk_size)..((c + 1) * chunk_size).min(total))
        .collect();

    if workers <= 1 || n_chunks <= 1 {
        return ranges
            .into_iter()
            .enumerate()
            .map(|(c, r)| f(c, r))
            .collect();
    }

    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = Vec::with_capacity(n_chunks);
    slots.resize_with(n_chunks, || None);
    let slots = std::sync::Mutex::new(slots);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(n_chunks) {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if c >= n_chunks {
                    break;
                }
                let out = f(c, ranges[c].clone());
                slots.lock().unwrap()[c] = Some(out);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("chunk result missing"))
        .collect()
}
