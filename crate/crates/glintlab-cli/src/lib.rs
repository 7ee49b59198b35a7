//! Scene loading, rendering and experiment runners around the glintlab
//! library.

pub mod camera;
pub mod experiments;
pub mod image;
pub mod render;
pub mod scene;

/// Worker count override from the GLINTLAB_THREADS environment variable;
/// falls back to the number of available CPUs.
pub fn worker_threads() -> usize {
    std::env::var("GLINTLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Builds a rayon pool with the requested worker count.
pub fn thread_pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction")
}
