//! Row-parallel loops over disjoint output slices.
//!
//! Every closure writes one output row from read-only inputs, so results
//! are bitwise identical at any worker count. Small problems stay on the
//! calling thread; the rayon dispatch overhead dwarfs them otherwise.

use rayon::prelude::*;

/// Work threshold (in output elements) below which loops stay sequential.
const PAR_MIN_ELEMS: usize = 16 * 1024;

pub(crate) fn for_each_row<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert!(row_len > 0 && data.len() % row_len == 0);
    if data.len() < PAR_MIN_ELEMS {
        for (r, row) in data.chunks_mut(row_len).enumerate() {
            f(r, row);
        }
    } else {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    }
}
