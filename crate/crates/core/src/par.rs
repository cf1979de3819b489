// Data-parallel helpers. Every macro preserves input order in its output, so
// results do not depend on how the work is scheduled.

/// Map `$f` over `$iter` (an `IntoParallelIterator`/`IntoIterator` value),
/// collecting in order.
macro_rules! par_map {
    ($iter:expr, $f:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::{IntoParallelIterator, ParallelIterator};
            ($iter).into_par_iter().map($f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($iter).into_iter().map($f).collect()
        }
    }};
}

/// Fallible ordered map; the first error in input order wins.
macro_rules! par_try_map {
    ($iter:expr, $f:expr) => {{
        let results: Vec<std::result::Result<_, _>> = par_map!($iter, $f);
        results.into_iter().collect::<std::result::Result<Vec<_>, _>>()
    }};
}
