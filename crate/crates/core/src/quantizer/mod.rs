//! One-dimensional optimal quantizers of `N(0, 1)`, their Voronoi cells,
//! the quantization tree built on them, and d-dimensional quantizers for
//! the path-wise variant.

mod grid;
mod tree;
mod vector;

pub use grid::{
    build_grid, cell_probabilities, distortion, QuantizerGrid, VoronoiCells, DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
};
pub use tree::{
    chapman_check, transition_matrix, QuantizationTree, TransitionMatrix, ENTRY_TOLERANCE,
    TRUNCATION,
};
pub use vector::{build_vector_quantizer, LloydConfig, VectorQuantizer, MAX_PRODUCT_SIZE};
